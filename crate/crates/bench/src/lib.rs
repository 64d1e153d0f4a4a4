//! Deterministic inputs shared by the benchmarks.

use fogbid_core::{
    Bid, EvictionPolicy, Executable, ExecutableId, Money, NodeId, NodeKind, NodeSpec, NodeState,
    Request, RequestId,
};

/// `n` bids with pseudo-random amounts in [50, 150] and distinct tiebreaks.
pub fn bids(n: usize) -> Vec<Bid> {
    (0..n as u64)
        .map(|i| {
            let cents = 5_000 + (i.wrapping_mul(2_654_435_761) % 10_001);
            Bid::new(i, Money::from_cents(cents), (i, i))
        })
        .collect()
}

/// An edge node with `slots` free slots that stores executables `0..stored`.
pub fn edge_node(slots: u64, stored: u32) -> NodeState {
    let spec =
        NodeSpec::new(NodeId(0), NodeKind::Edge, 10_000, slots, NodeId(1)).expect("valid node");
    let mut node = NodeState::new(spec);
    for i in 0..stored {
        let e = Executable::new(
            ExecutableId(i),
            10,
            Money::from_units(100),
            Money::from_units(100),
        )
        .expect("size is positive");
        node.offer_executable(&e, 0, EvictionPolicy::AbsoluteBid);
    }
    node
}

/// `n` requests for executables `0..executables`, arriving at time 0.
pub fn batch(n: usize, executables: u32) -> Vec<Request> {
    bids(n)
        .into_iter()
        .map(|b| {
            let exe = ExecutableId((b.bidder_id % u64::from(executables)) as u32);
            Request::new(RequestId(b.bidder_id), exe, NodeId(0), 0, 30, b.amount)
        })
        .collect()
}
