//! Capacity-constrained sealed-bid rounds.
//!
//! An auction rule is an allocation rule (who wins) paired with a payment
//! rule (what each winner pays). Allocation is the same for every payment
//! rule: the `capacity` highest bids win, ties going to the earlier
//! `(seq, id)` pair.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::domain::Money;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum PaymentRule {
    /// Each winner pays its own bid.
    #[default]
    FirstPrice,
    /// Uniform (k+1)-price: every winner pays the highest losing bid, or
    /// nothing when nobody loses.
    SecondPrice,
}

impl PaymentRule {
    pub fn as_str(self) -> &'static str {
        match self {
            PaymentRule::FirstPrice => "first",
            PaymentRule::SecondPrice => "second",
        }
    }
}

impl fmt::Display for PaymentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PaymentRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "first" | "first-price" => Ok(PaymentRule::FirstPrice),
            "second" | "second-price" => Ok(PaymentRule::SecondPrice),
            other => Err(format!(
                "unknown payment rule `{other}` (expected first|second)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bid {
    pub bidder_id: u64,
    pub amount: Money,
    /// `(seq, id)`; the smaller pair wins a tie.
    pub tiebreak: (u64, u64),
}

impl Bid {
    pub fn new(bidder_id: u64, amount: Money, tiebreak: (u64, u64)) -> Self {
        Bid {
            bidder_id,
            amount,
            tiebreak,
        }
    }

    /// Descending by amount, then ascending by tiebreak.
    pub fn rank_cmp(&self, other: &Bid) -> Ordering {
        other
            .amount
            .cmp(&self.amount)
            .then(self.tiebreak.cmp(&other.tiebreak))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Award {
    pub bidder_id: u64,
    pub payment: Money,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AuctionOutcome {
    /// In rank order.
    pub winners: Vec<Award>,
    /// In rank order.
    pub losers: Vec<u64>,
}

/// Runs one sealed-bid round with room for `capacity` winners.
pub fn allocate(bids: &[Bid], capacity: usize, rule: PaymentRule) -> AuctionOutcome {
    let mut ranked: Vec<&Bid> = bids.iter().collect();
    ranked.sort_by(|a, b| a.rank_cmp(b));

    let split = capacity.min(ranked.len());
    let (won, lost) = ranked.split_at(split);
    let clearing = lost.first().map_or(Money::ZERO, |b| b.amount);

    let winners = won
        .iter()
        .map(|b| Award {
            bidder_id: b.bidder_id,
            payment: match rule {
                PaymentRule::FirstPrice => b.amount,
                PaymentRule::SecondPrice => clearing,
            },
        })
        .collect();
    let losers = lost.iter().map(|b| b.bidder_id).collect();
    AuctionOutcome { winners, losers }
}

/// Utility of bidding `bid` when the bidder values a slot at `own_value`.
/// The bidder loses every tie against the opponents.
pub fn utility(
    own_value: Money,
    bid: Money,
    opponent_bids: &[Money],
    capacity: usize,
    rule: PaymentRule,
) -> i128 {
    const OWN: u64 = u64::MAX;
    let mut bids: Vec<Bid> = opponent_bids
        .iter()
        .enumerate()
        .map(|(i, &amount)| Bid::new(i as u64, amount, (i as u64, i as u64)))
        .collect();
    bids.push(Bid::new(OWN, bid, (u64::MAX, u64::MAX)));
    let outcome = allocate(&bids, capacity, rule);
    outcome
        .winners
        .iter()
        .find(|w| w.bidder_id == OWN)
        .map_or(0, |w| own_value.cents() as i128 - w.payment.cents() as i128)
}

/// Exhaustive best response over `grid`. Among utility-maximizing bids the
/// one closest to `own_value` is returned, so a truthful bid is returned
/// exactly when it is optimal.
///
/// # Panics
///
/// Panics if `grid` is empty.
pub fn brute_force_best_response(
    own_value: Money,
    opponent_bids: &[Money],
    capacity: usize,
    rule: PaymentRule,
    grid: &[Money],
) -> Money {
    assert!(!grid.is_empty(), "best response needs a non-empty grid");
    let distance = |m: Money| m.cents().abs_diff(own_value.cents());
    grid.iter()
        .map(|&bid| (utility(own_value, bid, opponent_bids, capacity, rule), bid))
        .max_by(|(ua, a), (ub, b)| ua.cmp(ub).then(distance(*b).cmp(&distance(*a))))
        .map(|(_, bid)| bid)
        .expect("grid is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bids(amounts: &[u64]) -> Vec<Bid> {
        amounts
            .iter()
            .enumerate()
            .map(|(i, &a)| Bid::new(i as u64, Money::from_units(a), (i as u64, i as u64)))
            .collect()
    }

    fn payments(o: &AuctionOutcome) -> Vec<Money> {
        o.winners.iter().map(|w| w.payment).collect()
    }

    #[test]
    fn first_price_pays_own_bid() {
        let o = allocate(&bids(&[100, 80, 60]), 2, PaymentRule::FirstPrice);
        assert_eq!(
            payments(&o),
            vec![Money::from_units(100), Money::from_units(80)]
        );
        assert_eq!(o.losers, vec![2]);
    }

    #[test]
    fn second_price_pays_highest_loser() {
        let o = allocate(&bids(&[100, 80]), 1, PaymentRule::SecondPrice);
        assert_eq!(
            o.winners,
            vec![Award {
                bidder_id: 0,
                payment: Money::from_units(80)
            }]
        );
        assert_eq!(o.losers, vec![1]);
    }

    #[test]
    fn second_price_without_losers_is_free() {
        let o = allocate(&bids(&[100, 80]), 5, PaymentRule::SecondPrice);
        assert_eq!(payments(&o), vec![Money::ZERO, Money::ZERO]);
    }

    #[test]
    fn empty_round() {
        for rule in [PaymentRule::FirstPrice, PaymentRule::SecondPrice] {
            assert_eq!(allocate(&[], 3, rule), AuctionOutcome::default());
        }
    }

    #[test]
    fn zero_capacity_rejects_everyone() {
        let o = allocate(&bids(&[10, 20]), 0, PaymentRule::FirstPrice);
        assert!(o.winners.is_empty());
        assert_eq!(o.losers, vec![1, 0]);
    }

    #[test]
    fn ties_go_to_earlier_tiebreak() {
        let b = vec![
            Bid::new(7, Money::from_units(50), (2, 7)),
            Bid::new(3, Money::from_units(50), (1, 3)),
        ];
        let o = allocate(&b, 1, PaymentRule::FirstPrice);
        assert_eq!(
            o.winners,
            vec![Award {
                bidder_id: 3,
                payment: Money::from_units(50)
            }]
        );
        assert_eq!(o.losers, vec![7]);
    }

    fn grid_0_to_150() -> Vec<Money> {
        (0..=15).map(|i| Money::from_units(i * 10)).collect()
    }

    // Expected maximizer sets below come from evaluating every grid point by
    // hand: utility(b) = 100 - 80 for b > 80, 0 otherwise.
    #[test]
    fn truthful_best_response_against_lower_opponent() {
        let grid = grid_0_to_150();
        let best: Vec<Money> = grid
            .iter()
            .copied()
            .filter(|&b| {
                utility(
                    Money::from_units(100),
                    b,
                    &[Money::from_units(80)],
                    1,
                    PaymentRule::SecondPrice,
                ) == 2_000
            })
            .collect();
        assert_eq!(best.first(), Some(&Money::from_units(90)));
        assert_eq!(best.last(), Some(&Money::from_units(150)));
        assert_eq!(
            brute_force_best_response(
                Money::from_units(100),
                &[Money::from_units(80)],
                1,
                PaymentRule::SecondPrice,
                &grid
            ),
            Money::from_units(100)
        );
    }

    #[test]
    fn truthful_best_response_against_higher_opponent() {
        let grid = grid_0_to_150();
        let value = Money::from_units(100);
        let opp = [Money::from_units(120)];
        for &b in &grid {
            let u = utility(value, b, &opp, 1, PaymentRule::SecondPrice);
            // a bid of exactly 120 ties and loses the tie
            if b <= Money::from_units(120) {
                assert_eq!(u, 0);
            } else {
                assert!(u < 0, "bid {b} should overpay");
            }
        }
        assert_eq!(
            brute_force_best_response(value, &opp, 1, PaymentRule::SecondPrice, &grid),
            value
        );
    }

    #[test]
    fn zero_value_bids_zero() {
        let grid = grid_0_to_150();
        for rule in [PaymentRule::FirstPrice, PaymentRule::SecondPrice] {
            let best = brute_force_best_response(
                Money::ZERO,
                &[Money::from_units(30), Money::from_units(0)],
                1,
                rule,
                &grid,
            );
            assert_eq!(best, Money::ZERO);
        }
    }

    #[test]
    fn first_price_is_not_truthful() {
        // shading below 100 but above 80 strictly gains
        let best = brute_force_best_response(
            Money::from_units(100),
            &[Money::from_units(80)],
            1,
            PaymentRule::FirstPrice,
            &grid_0_to_150(),
        );
        assert_eq!(best, Money::from_units(90));
    }

    fn arb_bids() -> impl Strategy<Value = Vec<Bid>> {
        prop::collection::vec((0u64..2_000, 0u64..50), 0..20).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (amount, seq))| {
                    Bid::new(i as u64, Money::from_cents(amount), (seq, i as u64))
                })
                .collect()
        })
    }

    fn winner_ids(o: &AuctionOutcome) -> Vec<u64> {
        o.winners.iter().map(|w| w.bidder_id).collect()
    }

    proptest! {
        #[test]
        fn outcome_partitions_bidders(b in arb_bids(), cap in 0usize..25) {
            for rule in [PaymentRule::FirstPrice, PaymentRule::SecondPrice] {
                let o = allocate(&b, cap, rule);
                prop_assert!(o.winners.len() <= cap);
                let mut all: Vec<u64> = winner_ids(&o);
                all.extend(&o.losers);
                all.sort_unstable();
                let mut expected: Vec<u64> = b.iter().map(|x| x.bidder_id).collect();
                expected.sort_unstable();
                prop_assert_eq!(all, expected);
            }
        }

        #[test]
        fn winners_outrank_losers(b in arb_bids(), cap in 0usize..25) {
            let o = allocate(&b, cap, PaymentRule::FirstPrice);
            let find = |id: u64| b.iter().find(|x| x.bidder_id == id).unwrap();
            for w in &o.winners {
                for &l in &o.losers {
                    prop_assert_eq!(find(w.bidder_id).rank_cmp(find(l)), Ordering::Less);
                }
            }
        }

        #[test]
        fn allocation_ignores_payment_rule(b in arb_bids(), cap in 0usize..25) {
            let first = allocate(&b, cap, PaymentRule::FirstPrice);
            let second = allocate(&b, cap, PaymentRule::SecondPrice);
            prop_assert_eq!(winner_ids(&first), winner_ids(&second));
            prop_assert_eq!(first.losers, second.losers);
        }

        #[test]
        fn scaling_preserves_ranking(b in arb_bids(), cap in 0usize..25, k in 1u64..50) {
            let scaled: Vec<Bid> = b
                .iter()
                .map(|x| Bid { amount: Money::from_cents(x.amount.cents() * k), ..*x })
                .collect();
            let o1 = allocate(&b, cap, PaymentRule::FirstPrice);
            let o2 = allocate(&scaled, cap, PaymentRule::FirstPrice);
            prop_assert_eq!(winner_ids(&o1), winner_ids(&o2));
        }

        #[test]
        fn payment_bounds(b in arb_bids(), cap in 0usize..25) {
            let amount = |id: u64| b.iter().find(|x| x.bidder_id == id).unwrap().amount;
            for w in allocate(&b, cap, PaymentRule::SecondPrice).winners {
                prop_assert!(w.payment <= amount(w.bidder_id));
            }
            for w in allocate(&b, cap, PaymentRule::FirstPrice).winners {
                prop_assert_eq!(w.payment, amount(w.bidder_id));
            }
        }

        #[test]
        fn deterministic(b in arb_bids(), cap in 0usize..25) {
            prop_assert_eq!(
                allocate(&b, cap, PaymentRule::SecondPrice),
                allocate(&b, cap, PaymentRule::SecondPrice)
            );
        }
    }
}
