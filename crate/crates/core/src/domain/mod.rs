//! Core data model: node kinds, money, executables, requests, topologies.

mod money;
mod topology;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub use money::{Money, MoneyParseError};
pub use topology::{validate_topology, Capacity, NodeSpec, Topology, TopologyError};

/// Simulated time in milliseconds since the start of a run.
pub type Millis = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Edge,
    Intermediary,
    Cloud,
}

impl NodeKind {
    pub const ALL: [NodeKind; 3] = [NodeKind::Edge, NodeKind::Intermediary, NodeKind::Cloud];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Edge => "edge",
            NodeKind::Intermediary => "intermediary",
            NodeKind::Cloud => "cloud",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "edge" => Ok(NodeKind::Edge),
            "intermediary" => Ok(NodeKind::Intermediary),
            "cloud" => Ok(NodeKind::Cloud),
            other => Err(DomainError::UnknownNodeKind(other.to_string())),
        }
    }
}

/// One value per node kind.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerKind<T> {
    pub edge: T,
    pub intermediary: T,
    pub cloud: T,
}

impl<T> PerKind<T> {
    pub fn from_fn(mut f: impl FnMut(NodeKind) -> T) -> Self {
        PerKind {
            edge: f(NodeKind::Edge),
            intermediary: f(NodeKind::Intermediary),
            cloud: f(NodeKind::Cloud),
        }
    }

    pub fn get(&self, kind: NodeKind) -> &T {
        match kind {
            NodeKind::Edge => &self.edge,
            NodeKind::Intermediary => &self.intermediary,
            NodeKind::Cloud => &self.cloud,
        }
    }

    pub fn get_mut(&mut self, kind: NodeKind) -> &mut T {
        match kind {
            NodeKind::Edge => &mut self.edge,
            NodeKind::Intermediary => &mut self.intermediary,
            NodeKind::Cloud => &mut self.cloud,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerKind<U> {
        PerKind {
            edge: f(&self.edge),
            intermediary: f(&self.intermediary),
            cloud: f(&self.cloud),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExecutableId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u64);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for ExecutableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("executable size must be positive")]
    ZeroSize,
    #[error("uniform parameter {mean},{half_width} is invalid: {reason}")]
    InvalidUniform {
        mean: f64,
        half_width: f64,
        reason: &'static str,
    },
    #[error("unknown node kind `{0}`")]
    UnknownNodeKind(String),
}

/// A parameter sampled uniformly from `[mean - half_width, mean + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformParam {
    mean: f64,
    half_width: f64,
}

impl UniformParam {
    pub fn new(mean: f64, half_width: f64) -> Result<Self, DomainError> {
        let invalid = |reason| DomainError::InvalidUniform {
            mean,
            half_width,
            reason,
        };
        if !mean.is_finite() || !half_width.is_finite() {
            return Err(invalid("not finite"));
        }
        if half_width < 0.0 {
            return Err(invalid("negative half width"));
        }
        if mean - half_width < 0.0 {
            return Err(invalid("range lower bound is negative"));
        }
        Ok(UniformParam { mean, half_width })
    }

    pub fn constant(value: f64) -> Result<Self, DomainError> {
        Self::new(value, 0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Uniform integer from the closed range. Falls back to the rounded mean
    /// when the range holds no integer.
    pub fn sample_int<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let lo = self.lower().ceil() as u64;
        let hi = self.upper().floor() as u64;
        if lo >= hi {
            return self.mean.round() as u64;
        }
        rng.random_range(lo..=hi)
    }

    /// Uniform amount in whole cents from the closed range.
    pub fn sample_money<R: Rng + ?Sized>(&self, rng: &mut R) -> Money {
        let lo = (self.lower() * 100.0).round() as u64;
        let hi = (self.upper() * 100.0).round() as u64;
        if lo >= hi {
            return Money::from_cents((self.mean * 100.0).round() as u64);
        }
        Money::from_cents(rng.random_range(lo..=hi))
    }
}

impl fmt::Display for UniformParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.mean, self.half_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BidPair {
    pub storage: Money,
    pub processing: Money,
}

/// A deployable function binary. Its size is in abstract storage units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Executable {
    pub id: ExecutableId,
    pub size: u64,
    pub storage_bid: Money,
    pub processing_bid: Money,
    pub overrides: BTreeMap<NodeKind, BidPair>,
}

impl Executable {
    pub fn new(
        id: ExecutableId,
        size: u64,
        storage_bid: Money,
        processing_bid: Money,
    ) -> Result<Self, DomainError> {
        if size == 0 {
            return Err(DomainError::ZeroSize);
        }
        Ok(Executable {
            id,
            size,
            storage_bid,
            processing_bid,
            overrides: BTreeMap::new(),
        })
    }

    pub fn with_override(mut self, kind: NodeKind, bids: BidPair) -> Self {
        self.overrides.insert(kind, bids);
        self
    }

    pub fn effective_bids(&self, kind: NodeKind) -> BidPair {
        self.overrides.get(&kind).copied().unwrap_or(BidPair {
            storage: self.storage_bid,
            processing: self.processing_bid,
        })
    }

    pub fn storage_bid_at(&self, kind: NodeKind) -> Money {
        self.effective_bids(kind).storage
    }
}

/// One function invocation.
///
/// `hops` starts at the origin node and grows by one entry per delegation.
/// `link_latencies[i]` is the pre-drawn latency of the i-th uplink traversal
/// along the origin's path to the cloud.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub id: RequestId,
    pub seq: u64,
    pub executable_id: ExecutableId,
    pub origin_node: NodeId,
    pub arrival_time: Millis,
    pub duration: Millis,
    pub processing_bid: Money,
    pub hops: Vec<NodeId>,
    pub link_latencies: Vec<Millis>,
}

impl Request {
    pub fn new(
        id: RequestId,
        executable_id: ExecutableId,
        origin_node: NodeId,
        arrival_time: Millis,
        duration: Millis,
        processing_bid: Money,
    ) -> Self {
        Request {
            id,
            seq: id.0,
            executable_id,
            origin_node,
            arrival_time,
            duration,
            processing_bid,
            hops: vec![origin_node],
            link_latencies: Vec::new(),
        }
    }

    pub fn current_node(&self) -> NodeId {
        *self.hops.last().expect("hops is never empty")
    }

    /// Number of uplink traversals so far.
    pub fn hop_count(&self) -> usize {
        self.hops.len() - 1
    }

    /// Sum of the link latencies already traversed.
    pub fn network_latency(&self) -> Millis {
        self.link_latencies[..self.hop_count().min(self.link_latencies.len())]
            .iter()
            .sum()
    }

    /// Ordering key for equal bids: earlier arrivals first.
    pub fn tiebreak(&self) -> (u64, u64) {
        (self.seq, self.id.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn node_kind_round_trips() {
        for kind in NodeKind::ALL {
            assert_eq!(kind.as_str().parse::<NodeKind>().unwrap(), kind);
        }
        assert!("fog".parse::<NodeKind>().is_err());
    }

    #[test]
    fn uniform_rejects_negative_lower_bound() {
        assert!(UniformParam::new(30.0, 45.0).is_err());
        assert!(UniformParam::new(30.0, -1.0).is_err());
        assert!(UniformParam::new(30.0, 30.0).is_ok());
    }

    #[test]
    fn uniform_samples_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bid = UniformParam::new(100.0, 50.0).unwrap();
        let lat = UniformParam::new(30.0, 15.0).unwrap();
        let (mut lo_seen, mut hi_seen) = (false, false);
        for _ in 0..20_000 {
            let m = bid.sample_money(&mut rng);
            assert!(m >= Money::from_units(50) && m <= Money::from_units(150));
            let d = lat.sample_int(&mut rng);
            assert!((15..=45).contains(&d));
            lo_seen |= d == 15;
            hi_seen |= d == 45;
        }
        assert!(
            lo_seen && hi_seen,
            "closed range endpoints should be reachable"
        );
    }

    #[test]
    fn zero_width_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = UniformParam::constant(20.0).unwrap();
        assert!((0..100).all(|_| p.sample_int(&mut rng) == 20));
        assert_eq!(p.sample_money(&mut rng), Money::from_units(20));
    }

    #[test]
    fn executable_requires_positive_size() {
        let r = Executable::new(ExecutableId(0), 0, Money::ZERO, Money::ZERO);
        assert_eq!(r, Err(DomainError::ZeroSize));
    }

    fn kind() -> impl Strategy<Value = NodeKind> {
        prop_oneof![
            Just(NodeKind::Edge),
            Just(NodeKind::Intermediary),
            Just(NodeKind::Cloud)
        ]
    }

    proptest! {
        #[test]
        fn effective_bid_prefers_override(
            storage in 0u64..100_000,
            processing in 0u64..100_000,
            overrides in prop::collection::btree_map(kind(), (0u64..100_000, 0u64..100_000), 0..3),
        ) {
            let mut exe = Executable::new(
                ExecutableId(1), 10, Money::from_cents(storage), Money::from_cents(processing),
            ).unwrap();
            for (k, (s, p)) in &overrides {
                exe = exe.with_override(*k, BidPair {
                    storage: Money::from_cents(*s),
                    processing: Money::from_cents(*p),
                });
            }
            for k in NodeKind::ALL {
                let bids = exe.effective_bids(k);
                match overrides.get(&k) {
                    Some((s, p)) => {
                        prop_assert_eq!(bids.storage.cents(), *s);
                        prop_assert_eq!(bids.processing.cents(), *p);
                    }
                    None => {
                        prop_assert_eq!(bids.storage.cents(), storage);
                        prop_assert_eq!(bids.processing.cents(), processing);
                    }
                }
            }
        }
    }
}
