use crate::domain::{ExecutableId, Millis, Money, NodeId, NodeKind, PerKind, Request, RequestId};
use crate::placement::NodeState;

use super::config::SimulationConfig;
use super::Deployment;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestOutcome {
    pub request_id: RequestId,
    pub served_at: NodeKind,
    pub serving_node: NodeId,
    pub payment: Money,
    pub arrival_time: Millis,
    pub start_ms: Millis,
    pub finish_ms: Millis,
    /// Link latencies traversed plus processing duration.
    pub total_latency_ms: Millis,
    pub hop_count: usize,
    pub path: Vec<NodeId>,
    pub overflowed_simulation_end: bool,
}

impl RequestOutcome {
    pub(super) fn served(
        request: Request,
        kind: NodeKind,
        node: NodeId,
        payment: Money,
        start: Millis,
        end: Millis,
    ) -> Self {
        let finish = start + request.duration;
        RequestOutcome {
            request_id: request.id,
            served_at: kind,
            serving_node: node,
            payment,
            arrival_time: request.arrival_time,
            start_ms: start,
            finish_ms: finish,
            total_latency_ms: request.network_latency() + request.duration,
            hop_count: request.hop_count(),
            path: request.hops,
            overflowed_simulation_end: finish > end,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub id: NodeId,
    pub kind: NodeKind,
    pub storage_revenue: Money,
    pub processing_revenue: Money,
    pub executions_served: u64,
    pub avg_execution_price: f64,
    pub stored_executables_at_end: Vec<ExecutableId>,
    pub avg_storage_bid_of_stored: f64,
    stored_bid_total: Money,
}

impl NodeReport {
    fn from_state(node: &NodeState) -> Self {
        let kind = node.kind();
        let served = node.executions_served();
        NodeReport {
            id: node.spec().id(),
            kind,
            storage_revenue: node.storage_revenue(),
            processing_revenue: node.processing_revenue(),
            executions_served: served,
            avg_execution_price: if served == 0 {
                0.0
            } else {
                node.processing_revenue().as_f64() / served as f64
            },
            stored_executables_at_end: node.stored().map(|s| s.executable.id).collect(),
            avg_storage_bid_of_stored: node.avg_storage_bid_of_stored(),
            stored_bid_total: node
                .stored()
                .map(|s| s.executable.storage_bid_at(kind))
                .sum(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencySummary {
    pub avg_ms: f64,
    pub p50_ms: Millis,
    pub p95_ms: Millis,
}

impl LatencySummary {
    /// Nearest-rank percentiles.
    fn from_latencies(mut latencies: Vec<Millis>) -> Self {
        if latencies.is_empty() {
            return LatencySummary::default();
        }
        latencies.sort_unstable();
        let n = latencies.len();
        let rank = |p: f64| latencies[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        LatencySummary {
            avg_ms: latencies.iter().sum::<u64>() as f64 / n as f64,
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub config: SimulationConfig,
    pub deployment: Deployment,
    pub nodes: Vec<NodeReport>,
    pub generated_requests: usize,
    pub latency: LatencySummary,
    pub served_per_kind: PerKind<u64>,
    /// Ordered by request id.
    pub outcomes: Vec<RequestOutcome>,
}

impl SimulationResult {
    pub(super) fn new(
        config: SimulationConfig,
        nodes: &[NodeState],
        deployment: Deployment,
        generated_requests: usize,
        outcomes: Vec<RequestOutcome>,
    ) -> Self {
        let mut served_per_kind = PerKind::<u64>::default();
        for o in &outcomes {
            *served_per_kind.get_mut(o.served_at) += 1;
        }
        let latency =
            LatencySummary::from_latencies(outcomes.iter().map(|o| o.total_latency_ms).collect());
        SimulationResult {
            config,
            deployment,
            nodes: nodes.iter().map(NodeReport::from_state).collect(),
            generated_requests,
            latency,
            served_per_kind,
            outcomes,
        }
    }

    fn of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &NodeReport> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// Processing revenue per execution over all nodes of `kind`; 0 when
    /// they served nothing.
    pub fn avg_execution_price(&self, kind: NodeKind) -> f64 {
        let revenue: Money = self.of_kind(kind).map(|n| n.processing_revenue).sum();
        let served: u64 = self.of_kind(kind).map(|n| n.executions_served).sum();
        if served == 0 {
            0.0
        } else {
            revenue.as_f64() / served as f64
        }
    }

    /// Mean storage bid over everything stored at nodes of `kind` at the end.
    pub fn avg_storage_bid(&self, kind: NodeKind) -> f64 {
        let total: Money = self.of_kind(kind).map(|n| n.stored_bid_total).sum();
        let count: usize = self
            .of_kind(kind)
            .map(|n| n.stored_executables_at_end.len())
            .sum();
        if count == 0 {
            0.0
        } else {
            total.as_f64() / count as f64
        }
    }

    pub fn served_share(&self, kind: NodeKind) -> f64 {
        if self.generated_requests == 0 {
            return 0.0;
        }
        *self.served_per_kind.get(kind) as f64 / self.generated_requests as f64
    }
}
