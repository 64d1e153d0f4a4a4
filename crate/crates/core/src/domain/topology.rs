use std::fmt;

use thiserror::Error;

use super::{NodeId, NodeKind, UniformParam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capacity {
    Bounded(u64),
    Unbounded,
}

impl Capacity {
    pub fn bound(self) -> Option<u64> {
        match self {
            Capacity::Bounded(n) => Some(n),
            Capacity::Unbounded => None,
        }
    }

    pub fn admits(self, amount: u64) -> bool {
        match self {
            Capacity::Bounded(n) => amount <= n,
            Capacity::Unbounded => true,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Capacity::Bounded(n) => n.fmt(f),
            Capacity::Unbounded => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("topology has no cloud node")]
    MissingCloud,
    #[error("topology has more than one cloud node ({0} and {1})")]
    MultipleClouds(NodeId, NodeId),
    #[error("uplink chain starting at node {0} contains a cycle")]
    CyclicUplink(NodeId),
    #[error("node {node} has uplink {uplink}, which does not exist")]
    OrphanNode { node: NodeId, uplink: NodeId },
    #[error("topology has no {0} node")]
    MissingKind(NodeKind),
    #[error("node {0}: non-cloud capacities must be at least 1")]
    InvalidCapacity(NodeId),
    #[error("node at position {position} has id {id}; ids must be dense and in order")]
    IdMismatch { position: usize, id: NodeId },
}

/// Static description of one node.
///
/// Only the constructors can build a value, which keeps "cloud ⇔ no uplink
/// ⇔ unbounded capacities" true by construction. `uplink_latency` of `None`
/// means the simulation's per-tier default applies.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    id: NodeId,
    kind: NodeKind,
    storage_capacity: Capacity,
    processing_capacity: Capacity,
    uplink: Option<NodeId>,
    uplink_latency: Option<UniformParam>,
}

impl NodeSpec {
    pub fn cloud(id: NodeId) -> Self {
        NodeSpec {
            id,
            kind: NodeKind::Cloud,
            storage_capacity: Capacity::Unbounded,
            processing_capacity: Capacity::Unbounded,
            uplink: None,
            uplink_latency: None,
        }
    }

    /// An edge or intermediary node. Passing `NodeKind::Cloud` yields a cloud
    /// node and ignores the remaining arguments.
    pub fn new(
        id: NodeId,
        kind: NodeKind,
        storage_capacity: u64,
        processing_slots: u64,
        uplink: NodeId,
    ) -> Result<Self, TopologyError> {
        if kind == NodeKind::Cloud {
            return Ok(Self::cloud(id));
        }
        if storage_capacity == 0 || processing_slots == 0 {
            return Err(TopologyError::InvalidCapacity(id));
        }
        Ok(NodeSpec {
            id,
            kind,
            storage_capacity: Capacity::Bounded(storage_capacity),
            processing_capacity: Capacity::Bounded(processing_slots),
            uplink: Some(uplink),
            uplink_latency: None,
        })
    }

    pub fn with_uplink_latency(mut self, latency: UniformParam) -> Self {
        if self.uplink.is_some() {
            self.uplink_latency = Some(latency);
        }
        self
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn storage_capacity(&self) -> Capacity {
        self.storage_capacity
    }

    pub fn processing_capacity(&self) -> Capacity {
        self.processing_capacity
    }

    pub fn uplink(&self) -> Option<NodeId> {
        self.uplink
    }

    pub fn uplink_latency(&self) -> Option<UniformParam> {
        self.uplink_latency
    }
}

/// Checks every topology invariant, reporting the first violation.
pub fn validate_topology(nodes: &[NodeSpec]) -> Result<(), TopologyError> {
    for (position, node) in nodes.iter().enumerate() {
        if node.id.index() != position {
            return Err(TopologyError::IdMismatch {
                position,
                id: node.id,
            });
        }
    }

    let mut cloud = None;
    for node in nodes.iter().filter(|n| n.kind == NodeKind::Cloud) {
        match cloud {
            None => cloud = Some(node.id),
            Some(first) => return Err(TopologyError::MultipleClouds(first, node.id)),
        }
    }
    if cloud.is_none() {
        return Err(TopologyError::MissingCloud);
    }

    for node in nodes {
        if let Some(up) = node.uplink {
            if up.index() >= nodes.len() {
                return Err(TopologyError::OrphanNode {
                    node: node.id,
                    uplink: up,
                });
            }
        }
    }

    // every chain must reach the cloud within n steps
    for node in nodes {
        let mut current = node;
        let mut steps = 0;
        while let Some(up) = current.uplink {
            steps += 1;
            if steps > nodes.len() || up == current.id {
                return Err(TopologyError::CyclicUplink(node.id));
            }
            current = &nodes[up.index()];
        }
    }

    for kind in [NodeKind::Edge, NodeKind::Intermediary] {
        if !nodes.iter().any(|n| n.kind == kind) {
            return Err(TopologyError::MissingKind(kind));
        }
    }
    Ok(())
}

/// A validated set of nodes whose uplinks form a tree rooted at the cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeSpec>,
}

impl Topology {
    pub fn new(nodes: Vec<NodeSpec>) -> Result<Self, TopologyError> {
        validate_topology(&nodes)?;
        Ok(Topology { nodes })
    }

    /// Edge → intermediary → cloud.
    pub fn chain(
        edge_storage: u64,
        edge_slots: u64,
        intermediary_storage: u64,
        intermediary_slots: u64,
    ) -> Result<Self, TopologyError> {
        Topology::new(vec![
            NodeSpec::new(
                NodeId(0),
                NodeKind::Edge,
                edge_storage,
                edge_slots,
                NodeId(1),
            )?,
            NodeSpec::new(
                NodeId(1),
                NodeKind::Intermediary,
                intermediary_storage,
                intermediary_slots,
                NodeId(2),
            )?,
            NodeSpec::cloud(NodeId(2)),
        ])
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Edge)
    }

    pub fn cloud(&self) -> NodeId {
        self.nodes
            .iter()
            .find(|n| n.kind == NodeKind::Cloud)
            .map(|n| n.id)
            .expect("validated topology has a cloud")
    }

    /// Nodes visited from `start` to the cloud, both included.
    pub fn path_to_cloud(&self, start: NodeId) -> Vec<NodeId> {
        let mut path = vec![start];
        let mut current = start;
        while let Some(up) = self.node(current).uplink {
            path.push(up);
            current = up;
        }
        path
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.path_to_cloud(node).len() - 1
    }

    /// Nodes ordered farthest-from-cloud first, so a request delegated
    /// within a tick reaches its uplink before that node runs its auction.
    pub fn processing_order(&self) -> Vec<NodeId> {
        let mut order: Vec<(usize, NodeId)> = self
            .nodes
            .iter()
            .map(|n| (self.depth(n.id), n.id))
            .collect();
        order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, id)| id).collect()
    }
}
