//! Auction-based placement of serverless functions across a fog topology.
//!
//! Nodes at the edge, in intermediary data centres, and in the cloud each
//! run their own sealed-bid auctions: executables bid for storage, requests
//! bid for parallel processing slots. Requests a node turns down move one hop
//! towards the cloud, which serves everything. The [`engine`] simulates this
//! deterministically from a seed, and [`experiments`] sweeps it over load or
//! executable count.

pub mod auction;
pub mod domain;
pub mod engine;
pub mod experiments;
pub mod placement;

pub use auction::{allocate, brute_force_best_response, AuctionOutcome, Award, Bid, PaymentRule};
pub use domain::{
    validate_topology, Capacity, Executable, ExecutableId, Millis, Money, NodeId, NodeKind,
    NodeSpec, PerKind, Request, RequestId, Topology, TopologyError, UniformParam,
};
pub use engine::{
    run, simulate, ConfigError, EngineError, RequestOutcome, SimulationConfig, SimulationResult,
};
pub use experiments::{
    exp1_spec, exp2_spec, run_sweep, write_csv, SweepOptions, SweepRow, SweepSpec,
};
pub use placement::{EvictionPolicy, NodeState, RejectReason};
