//! Discrete-time simulation of one fog topology.
//!
//! Each tick, every node first frees finished slots and bills storage, then
//! receives the requests that arrived during the tick and auctions its free
//! slots among them. Rejected requests travel to the node's uplink and arrive
//! there after the link latency. The cloud serves whatever reaches it, so
//! every request is served exactly once.

mod config;
mod records;
mod result;
mod workload;

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use thiserror::Error;

use crate::domain::{Executable, ExecutableId, Millis, NodeId, Request};
use crate::placement::{EvictionPolicy, NodeState};

pub use config::{parse_entries, ConfigEntry, ConfigError, SimulationConfig, KEYS};
pub use records::write_records;
pub use result::{LatencySummary, NodeReport, RequestOutcome, SimulationResult};
pub use workload::{generate_workload, Workload};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Executables stored by each node after deployment.
pub type Deployment = BTreeMap<NodeId, Vec<ExecutableId>>;

/// Offers every executable to every node at time 0, executable by
/// executable in id order.
pub fn deploy_phase(
    nodes: &mut [NodeState],
    executables: &[Executable],
    policy: EvictionPolicy,
) -> Deployment {
    let mut ordered: Vec<&Executable> = executables.iter().collect();
    ordered.sort_by_key(|e| e.id);
    for e in ordered {
        for node in nodes.iter_mut() {
            node.offer_executable(e, 0, policy);
        }
    }
    nodes
        .iter()
        .map(|n| (n.spec().id(), n.stored().map(|s| s.executable.id).collect()))
        .collect()
}

struct Delivery {
    time: Millis,
    ticket: u64,
    node: NodeId,
    request: Request,
}

impl PartialEq for Delivery {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Delivery {}

impl PartialOrd for Delivery {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Delivery {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.ticket).cmp(&(other.time, other.ticket))
    }
}

/// Generates the workload for `cfg` and simulates it.
pub fn run(cfg: &SimulationConfig) -> Result<SimulationResult, EngineError> {
    let workload = generate_workload(cfg)?;
    Ok(simulate(cfg, workload))
}

/// Simulates a given workload on `cfg`'s topology.
///
/// Requests must originate at nodes of the topology and carry one link
/// latency per uplink hop on their path to the cloud.
pub fn simulate(cfg: &SimulationConfig, workload: Workload) -> SimulationResult {
    let topology = &cfg.topology;
    let end = cfg.duration_ms;
    let tick = cfg.tick_ms;

    let mut nodes: Vec<NodeState> = topology
        .nodes()
        .iter()
        .map(|s| NodeState::new(s.clone()).with_horizon(end))
        .collect();
    let deployment = deploy_phase(&mut nodes, &workload.executables, cfg.eviction_policy);
    let order = topology.processing_order();

    let generated = workload.requests.len();
    let mut next_ticket = 0u64;
    let mut queue: BinaryHeap<Reverse<Delivery>> = workload
        .requests
        .into_iter()
        .map(|request| {
            next_ticket += 1;
            Reverse(Delivery {
                time: request.arrival_time,
                ticket: next_ticket,
                node: request.origin_node,
                request,
            })
        })
        .collect();

    let mut batches: Vec<Vec<Request>> = vec![Vec::new(); nodes.len()];
    let mut outcomes = Vec::with_capacity(generated);
    let mut t: Millis = 0;
    loop {
        for node in nodes.iter_mut() {
            node.release_finished(t);
            if t < end {
                node.accrue_storage_revenue(t, t + tick);
            }
        }

        let tick_end = t + tick;
        while queue.peek().is_some_and(|d| d.0.time < tick_end) {
            let Reverse(d) = queue.pop().expect("peeked");
            batches[d.node.index()].push(d.request);
        }

        for &id in &order {
            let batch = std::mem::take(&mut batches[id.index()]);
            if batch.is_empty() {
                continue;
            }
            let node = &mut nodes[id.index()];
            let kind = node.kind();
            let outcome = node.offer_requests(batch, t, cfg.payment_rule);
            for (request, payment) in outcome.scheduled {
                outcomes.push(RequestOutcome::served(request, kind, id, payment, t, end));
            }
            let uplink = topology.node(id).uplink();
            for (mut request, _) in outcome.rejected {
                let up = uplink.expect("the cloud never rejects");
                let latency = request.link_latencies[request.hop_count()];
                request.hops.push(up);
                let arrival = t + latency;
                if arrival < tick_end {
                    batches[up.index()].push(request);
                } else {
                    next_ticket += 1;
                    queue.push(Reverse(Delivery {
                        time: arrival,
                        ticket: next_ticket,
                        node: up,
                        request,
                    }));
                }
            }
        }

        t = tick_end;
        if t >= end {
            // past the end only in-transit requests remain; skip idle ticks
            match queue.peek() {
                None => break,
                Some(d) => t = t.max(d.0.time - d.0.time % tick),
            }
        }
    }

    outcomes.sort_by_key(|o| o.request_id);
    SimulationResult::new(cfg.clone(), &nodes, deployment, generated, outcomes)
}
