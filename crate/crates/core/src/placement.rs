//! Node-local placement decisions.
//!
//! Every node acts as its own auctioneer: executables compete for storage
//! through their storage bids, and requests compete for parallel processing
//! slots through their processing bids. A node only ever looks at its own
//! state.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::auction::{allocate, Bid, PaymentRule};
use crate::domain::{
    Capacity, Executable, ExecutableId, Millis, Money, NodeKind, NodeSpec, Request, RequestId,
};

/// How stored executables are ranked when one has to make room.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum EvictionPolicy {
    #[default]
    AbsoluteBid,
    BidPerSize,
}

impl EvictionPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            EvictionPolicy::AbsoluteBid => "absolute",
            EvictionPolicy::BidPerSize => "per-size",
        }
    }

    /// Compares the keys of two `(bid, size)` pairs; bid-per-size keys are
    /// compared by cross-multiplication so no precision is lost.
    fn compare(self, a: (Money, u64), b: (Money, u64)) -> Ordering {
        match self {
            EvictionPolicy::AbsoluteBid => a.0.cmp(&b.0),
            EvictionPolicy::BidPerSize => {
                let lhs = a.0.cents() as u128 * b.1 as u128;
                let rhs = b.0.cents() as u128 * a.1 as u128;
                lhs.cmp(&rhs)
            }
        }
    }
}

impl fmt::Display for EvictionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EvictionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "absolute" | "absolute-bid" => Ok(EvictionPolicy::AbsoluteBid),
            "per-size" | "bid-per-size" => Ok(EvictionPolicy::BidPerSize),
            other => Err(format!(
                "unknown eviction policy `{other}` (expected absolute|per-size)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageRejection {
    /// Not enough lower-bidding executables to make room.
    OutBid,
    /// Larger than the node's total storage.
    TooLarge,
    AlreadyStored,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StorageDecision {
    Accepted { evicted: Vec<ExecutableId> },
    Rejected(StorageRejection),
}

impl StorageDecision {
    pub fn accepted(&self) -> bool {
        matches!(self, StorageDecision::Accepted { .. })
    }

    pub fn evicted(&self) -> &[ExecutableId] {
        match self {
            StorageDecision::Accepted { evicted } => evicted,
            StorageDecision::Rejected(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NoExecutable,
    /// Would finish after the end of the simulated period.
    WouldOverflow,
    NoCapacity,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoExecutable => "no-executable",
            RejectReason::WouldOverflow => "would-overflow",
            RejectReason::NoCapacity => "no-capacity",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchOutcome {
    /// Winners in rank order, with their payment.
    pub scheduled: Vec<(Request, Money)>,
    pub rejected: Vec<(Request, RejectReason)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredExecutable {
    pub executable: Executable,
    pub stored_since: Millis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    spec: NodeSpec,
    stored: BTreeMap<ExecutableId, StoredExecutable>,
    used_storage: u64,
    // (finish time, request)
    in_flight: BTreeSet<(Millis, RequestId)>,
    // storage revenue in cent-milliseconds, rounded to cents only on read
    storage_accrued: u128,
    accrued_until: Millis,
    stored_rate: u64,
    newest_since: Millis,
    processing_revenue: Money,
    executions_served: u64,
    horizon: Option<Millis>,
}

impl NodeState {
    pub fn new(spec: NodeSpec) -> Self {
        NodeState {
            spec,
            stored: BTreeMap::new(),
            used_storage: 0,
            in_flight: BTreeSet::new(),
            storage_accrued: 0,
            accrued_until: 0,
            stored_rate: 0,
            newest_since: 0,
            processing_revenue: Money::ZERO,
            executions_served: 0,
            horizon: None,
        }
    }

    /// Non-cloud nodes refuse work that would finish after `horizon`.
    pub fn with_horizon(mut self, horizon: Millis) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn spec(&self) -> &NodeSpec {
        &self.spec
    }

    pub fn kind(&self) -> NodeKind {
        self.spec.kind()
    }

    fn is_cloud(&self) -> bool {
        self.kind() == NodeKind::Cloud
    }

    pub fn stored(&self) -> impl Iterator<Item = &StoredExecutable> {
        self.stored.values()
    }

    pub fn is_stored(&self, id: ExecutableId) -> bool {
        self.stored.contains_key(&id)
    }

    pub fn used_storage(&self) -> u64 {
        self.used_storage
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn free_slots(&self) -> Option<usize> {
        self.spec
            .processing_capacity()
            .bound()
            .map(|c| (c as usize).saturating_sub(self.in_flight.len()))
    }

    pub fn storage_revenue(&self) -> Money {
        Money::from_cent_millis(self.storage_accrued)
    }

    pub fn processing_revenue(&self) -> Money {
        self.processing_revenue
    }

    pub fn executions_served(&self) -> u64 {
        self.executions_served
    }

    /// Mean storage bid of the executables currently stored, at this node's kind.
    pub fn avg_storage_bid_of_stored(&self) -> f64 {
        if self.stored.is_empty() {
            return 0.0;
        }
        let total: Money = self
            .stored
            .values()
            .map(|s| s.executable.storage_bid_at(self.kind()))
            .sum();
        total.as_f64() / self.stored.len() as f64
    }

    fn storage_key(&self, e: &Executable) -> (Money, u64) {
        (e.storage_bid_at(self.kind()), e.size)
    }

    /// Storage auction for one executable.
    ///
    /// Makes room by evicting strictly lower-keyed executables, lowest key
    /// first. If that cannot free enough space the offer is rejected and the
    /// node is left untouched.
    pub fn offer_executable(
        &mut self,
        e: &Executable,
        now: Millis,
        policy: EvictionPolicy,
    ) -> StorageDecision {
        if self.stored.contains_key(&e.id) {
            return StorageDecision::Rejected(StorageRejection::AlreadyStored);
        }
        let capacity = match self.spec.storage_capacity() {
            Capacity::Unbounded => {
                self.insert(e, now);
                return StorageDecision::Accepted { evicted: vec![] };
            }
            Capacity::Bounded(c) => c,
        };
        if e.size > capacity {
            return StorageDecision::Rejected(StorageRejection::TooLarge);
        }

        let mut free = capacity - self.used_storage;
        let mut evict = Vec::new();
        if free < e.size {
            let key = self.storage_key(e);
            let mut candidates: Vec<(&ExecutableId, &StoredExecutable)> = self
                .stored
                .iter()
                .filter(|(_, s)| {
                    policy.compare(self.storage_key(&s.executable), key) == Ordering::Less
                })
                .collect();
            candidates.sort_by(|(a_id, a), (b_id, b)| {
                policy
                    .compare(
                        self.storage_key(&a.executable),
                        self.storage_key(&b.executable),
                    )
                    .then(a_id.cmp(b_id))
            });
            for (id, s) in candidates {
                if free >= e.size {
                    break;
                }
                free += s.executable.size;
                evict.push(*id);
            }
            if free < e.size {
                return StorageDecision::Rejected(StorageRejection::OutBid);
            }
        }

        for id in &evict {
            self.remove(*id, now);
        }
        self.insert(e, now);
        StorageDecision::Accepted { evicted: evict }
    }

    fn insert(&mut self, e: &Executable, now: Millis) {
        self.used_storage += e.size;
        self.stored_rate += e.storage_bid_at(self.kind()).cents();
        self.newest_since = self.newest_since.max(now);
        self.stored.insert(
            e.id,
            StoredExecutable {
                executable: e.clone(),
                stored_since: now,
            },
        );
    }

    fn remove(&mut self, id: ExecutableId, now: Millis) {
        let s = self
            .stored
            .remove(&id)
            .expect("evicting a stored executable");
        let bid = s.executable.storage_bid_at(self.kind());
        // bill the part not yet covered by accrue_storage_revenue
        let from = self.accrued_until.max(s.stored_since);
        if now > from {
            self.storage_accrued += bid.cent_millis(now - from);
        }
        self.used_storage -= s.executable.size;
        self.stored_rate -= bid.cents();
    }

    /// Charges every stored executable for `[from, to)`, counting each one
    /// only from the moment it was stored. Returns the charge for the interval.
    pub fn accrue_storage_revenue(&mut self, from: Millis, to: Millis) -> Money {
        if to <= from {
            return Money::ZERO;
        }
        let amount = if self.newest_since <= from {
            Money::from_cents(self.stored_rate).cent_millis(to - from)
        } else {
            let kind = self.kind();
            self.stored
                .values()
                .filter(|s| s.stored_since < to)
                .map(|s| {
                    s.executable
                        .storage_bid_at(kind)
                        .cent_millis(to - from.max(s.stored_since))
                })
                .sum()
        };
        self.storage_accrued += amount;
        self.accrued_until = to;
        Money::from_cent_millis(amount)
    }

    /// Frees every slot whose request finishes at or before `now`.
    pub fn release_finished(&mut self, now: Millis) -> usize {
        let mut freed = 0;
        while self
            .in_flight
            .first()
            .is_some_and(|&(finish, _)| finish <= now)
        {
            self.in_flight.pop_first();
            freed += 1;
        }
        freed
    }

    /// Processing bid of `r` at this node: the executable's per-kind
    /// override when it has one, otherwise the bid carried by the request.
    pub fn bid_for(&self, r: &Request) -> Money {
        self.stored
            .get(&r.executable_id)
            .and_then(|s| s.executable.overrides.get(&self.kind()))
            .map_or(r.processing_bid, |b| b.processing)
    }

    /// Processing auction over all requests that arrived in one tick:
    ///
    /// 1. reject requests whose executable is not stored here;
    /// 2. rank the rest by bid, highest first;
    /// 3. schedule from the top while slots are free;
    /// 4. reject the remainder.
    ///
    /// Requests that could not finish before the horizon are rejected after
    /// step 1. The cloud skips the rejection steps.
    pub fn offer_requests(
        &mut self,
        batch: Vec<Request>,
        now: Millis,
        rule: PaymentRule,
    ) -> BatchOutcome {
        let mut outcome = BatchOutcome::default();
        let cloud = self.is_cloud();

        let mut candidates = Vec::with_capacity(batch.len());
        let mut overflowing = Vec::new();
        for r in batch {
            if !cloud && !self.stored.contains_key(&r.executable_id) {
                outcome.rejected.push((r, RejectReason::NoExecutable));
            } else if !cloud && self.horizon.is_some_and(|h| now + r.duration > h) {
                overflowing.push((r, RejectReason::WouldOverflow));
            } else {
                candidates.push(r);
            }
        }
        outcome.rejected.append(&mut overflowing);

        let bids: Vec<Bid> = candidates
            .iter()
            .enumerate()
            .map(|(i, r)| Bid::new(i as u64, self.bid_for(r), r.tiebreak()))
            .collect();
        let free = self.free_slots().unwrap_or(candidates.len());
        let auction = allocate(&bids, free, rule);

        let mut slots: Vec<Option<Request>> = candidates.into_iter().map(Some).collect();
        for award in auction.winners {
            let r = slots[award.bidder_id as usize]
                .take()
                .expect("each bidder wins once");
            self.in_flight.insert((now + r.duration, r.id));
            self.processing_revenue += award.payment;
            self.executions_served += 1;
            outcome.scheduled.push((r, award.payment));
        }
        for loser in auction.losers {
            let r = slots[loser as usize]
                .take()
                .expect("each bidder loses once");
            outcome.rejected.push((r, RejectReason::NoCapacity));
        }
        outcome
    }
}
