//! Simulation configuration and its flat `key = value` text form.
//!
//! Keys mirror the field names of [`SimulationConfig`]. Uniform parameters
//! are written `mean,half_width` (a bare number means a constant). Lines
//! starting with `#` are comments. Topology is either the default
//! edge → intermediary → cloud chain, or is given node by node with
//! repeated `node = kind,storage,slots,uplink` lines (`node = cloud` for the
//! cloud), node ids being assigned in line order. The `*_capacity` keys
//! apply to every node of the named kind.

use std::fmt::Write as _;

use thiserror::Error;

use crate::auction::PaymentRule;
use crate::domain::{
    Capacity, DomainError, Millis, NodeId, NodeKind, NodeSpec, Topology, TopologyError,
    UniformParam,
};
use crate::placement::EvictionPolicy;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
}

impl ConfigError {
    pub fn is_parse(&self) -> bool {
        matches!(self, ConfigError::Parse { .. })
    }

    fn parse(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// One `key = value` line. `line` is 1-based; 0 marks a synthesized entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl ConfigEntry {
    pub fn new(key: impl Into<String>, value: impl Into<String>) -> Self {
        ConfigEntry {
            line: 0,
            key: key.into(),
            value: value.into(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "duration_ms",
    "tick_ms",
    "processing_latency",
    "edge_to_intermediary_latency",
    "intermediary_to_cloud_latency",
    "storage_bid",
    "processing_bid",
    "executable_count",
    "executable_size",
    "requests_per_second_per_edge",
    "payment_rule",
    "eviction_policy",
    "edge_storage_capacity",
    "edge_processing_capacity",
    "intermediary_storage_capacity",
    "intermediary_processing_capacity",
    "node",
];

/// Splits text into entries without interpreting values.
pub fn parse_entries(text: &str) -> Result<Vec<ConfigEntry>, ConfigError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::parse(line, "expected `key = value`"))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::parse(line, format!("unknown key `{key}`")));
        }
        entries.push(ConfigEntry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub duration_ms: Millis,
    pub tick_ms: Millis,
    pub topology: Topology,
    pub processing_latency: UniformParam,
    pub edge_to_intermediary_latency: UniformParam,
    pub intermediary_to_cloud_latency: UniformParam,
    pub storage_bid: UniformParam,
    pub processing_bid: UniformParam,
    pub executable_count: u32,
    pub executable_size: UniformParam,
    pub requests_per_second_per_edge: u64,
    pub payment_rule: PaymentRule,
    pub eviction_policy: EvictionPolicy,
}

fn uniform(mean: f64, half_width: f64) -> UniformParam {
    UniformParam::new(mean, half_width).expect("valid built-in parameter")
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 1,
            duration_ms: 120_000,
            tick_ms: 1,
            topology: Topology::chain(100, 5, 500, 20).expect("valid default chain"),
            processing_latency: uniform(30.0, 15.0),
            edge_to_intermediary_latency: uniform(20.0, 10.0),
            intermediary_to_cloud_latency: uniform(40.0, 20.0),
            storage_bid: uniform(100.0, 50.0),
            processing_bid: uniform(100.0, 50.0),
            executable_count: 10,
            executable_size: uniform(10.0, 5.0),
            requests_per_second_per_edge: 100,
            payment_rule: PaymentRule::FirstPrice,
            eviction_policy: EvictionPolicy::AbsoluteBid,
        }
    }
}

fn parse_num<T: std::str::FromStr>(e: &ConfigEntry) -> Result<T, ConfigError> {
    e.value
        .parse()
        .map_err(|_| ConfigError::parse(e.line, format!("`{}` is not a valid {}", e.value, e.key)))
}

fn parse_uniform(e: &ConfigEntry) -> Result<UniformParam, ConfigError> {
    let bad = || ConfigError::parse(e.line, format!("`{}` is not `mean,half_width`", e.value));
    let (mean, half_width) = match e.value.split_once(',') {
        Some((m, h)) => (
            m.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
        ),
        None => (e.value.parse().map_err(|_| bad())?, 0.0),
    };
    UniformParam::new(mean, half_width).map_err(|err: DomainError| {
        ConfigError::Invalid(format!("{} (line {}): {err}", e.key, e.line))
    })
}

fn parse_node(e: &ConfigEntry, id: NodeId) -> Result<NodeSpec, ConfigError> {
    let fields: Vec<&str> = e.value.split(',').map(str::trim).collect();
    let kind: NodeKind = fields[0]
        .parse()
        .map_err(|err: DomainError| ConfigError::parse(e.line, err.to_string()))?;
    if kind == NodeKind::Cloud {
        if fields.len() != 1 {
            return Err(ConfigError::parse(
                e.line,
                "a cloud node takes no further fields",
            ));
        }
        return Ok(NodeSpec::cloud(id));
    }
    if fields.len() != 4 {
        return Err(ConfigError::parse(
            e.line,
            "expected `node = kind,storage,slots,uplink`",
        ));
    }
    let num = |s: &str| {
        s.parse::<u64>()
            .map_err(|_| ConfigError::parse(e.line, format!("`{s}` is not a non-negative integer")))
    };
    let uplink = NodeId(
        u32::try_from(num(fields[3])?)
            .map_err(|_| ConfigError::parse(e.line, "uplink out of range"))?,
    );
    Ok(NodeSpec::new(
        id,
        kind,
        num(fields[1])?,
        num(fields[2])?,
        uplink,
    )?)
}

/// Replaces capacities of every node of `kind`.
fn set_capacity(
    nodes: &mut [NodeSpec],
    kind: NodeKind,
    storage: Option<u64>,
    slots: Option<u64>,
) -> Result<(), ConfigError> {
    for node in nodes.iter_mut().filter(|n| n.kind() == kind) {
        let current_storage = node.storage_capacity().bound().unwrap_or(0);
        let current_slots = node.processing_capacity().bound().unwrap_or(0);
        let uplink = node.uplink().expect("non-cloud node has an uplink");
        let mut updated = NodeSpec::new(
            node.id(),
            kind,
            storage.unwrap_or(current_storage),
            slots.unwrap_or(current_slots),
            uplink,
        )?;
        if let Some(latency) = node.uplink_latency() {
            updated = updated.with_uplink_latency(latency);
        }
        *node = updated;
    }
    Ok(())
}

impl SimulationConfig {
    /// Parses `text` on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        SimulationConfig::default().with_entries(&parse_entries(text)?)
    }

    /// Applies entries in order and validates the result. `node` entries,
    /// when present, replace the whole topology before capacity keys apply.
    pub fn with_entries(mut self, entries: &[ConfigEntry]) -> Result<Self, ConfigError> {
        let node_entries: Vec<&ConfigEntry> = entries.iter().filter(|e| e.key == "node").collect();
        let mut nodes: Vec<NodeSpec> = if node_entries.is_empty() {
            self.topology.nodes().to_vec()
        } else {
            node_entries
                .iter()
                .enumerate()
                .map(|(i, e)| parse_node(e, NodeId(i as u32)))
                .collect::<Result<_, _>>()?
        };

        for e in entries {
            match e.key.as_str() {
                "seed" => self.seed = parse_num(e)?,
                "duration_ms" => self.duration_ms = parse_num(e)?,
                "tick_ms" => self.tick_ms = parse_num(e)?,
                "processing_latency" => self.processing_latency = parse_uniform(e)?,
                "edge_to_intermediary_latency" => {
                    self.edge_to_intermediary_latency = parse_uniform(e)?
                }
                "intermediary_to_cloud_latency" => {
                    self.intermediary_to_cloud_latency = parse_uniform(e)?
                }
                "storage_bid" => self.storage_bid = parse_uniform(e)?,
                "processing_bid" => self.processing_bid = parse_uniform(e)?,
                "executable_count" => self.executable_count = parse_num(e)?,
                "executable_size" => self.executable_size = parse_uniform(e)?,
                "requests_per_second_per_edge" => self.requests_per_second_per_edge = parse_num(e)?,
                "payment_rule" => {
                    self.payment_rule =
                        e.value.parse().map_err(|m| ConfigError::parse(e.line, m))?
                }
                "eviction_policy" => {
                    self.eviction_policy =
                        e.value.parse().map_err(|m| ConfigError::parse(e.line, m))?
                }
                "edge_storage_capacity" => {
                    set_capacity(&mut nodes, NodeKind::Edge, Some(parse_num(e)?), None)?
                }
                "edge_processing_capacity" => {
                    set_capacity(&mut nodes, NodeKind::Edge, None, Some(parse_num(e)?))?
                }
                "intermediary_storage_capacity" => set_capacity(
                    &mut nodes,
                    NodeKind::Intermediary,
                    Some(parse_num(e)?),
                    None,
                )?,
                "intermediary_processing_capacity" => set_capacity(
                    &mut nodes,
                    NodeKind::Intermediary,
                    None,
                    Some(parse_num(e)?),
                )?,
                "node" => {}
                other => return Err(ConfigError::parse(e.line, format!("unknown key `{other}`"))),
            }
        }
        self.topology = Topology::new(nodes)?;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.duration_ms == 0 {
            return invalid("duration_ms must be positive".into());
        }
        if self.tick_ms == 0 {
            return invalid("tick_ms must be positive".into());
        }
        if !self.duration_ms.is_multiple_of(self.tick_ms) {
            return invalid(format!(
                "duration_ms {} is not a multiple of tick_ms {}",
                self.duration_ms, self.tick_ms
            ));
        }
        if !(self.requests_per_second_per_edge * self.duration_ms).is_multiple_of(1000) {
            return invalid(format!(
                "{} requests/s over {} ms is not a whole number of requests",
                self.requests_per_second_per_edge, self.duration_ms
            ));
        }
        if self.executable_count == 0 {
            return invalid("executable_count is 0, so no request could ever be served".into());
        }
        if self.processing_latency.upper() < 1.0 {
            return invalid("processing_latency must allow durations of at least 1 ms".into());
        }
        Ok(())
    }

    /// Requests generated at each edge node.
    pub fn requests_per_edge(&self) -> u64 {
        self.requests_per_second_per_edge * self.duration_ms / 1000
    }

    /// Latency of the hop leaving `node` towards its uplink.
    pub fn uplink_latency(&self, node: &NodeSpec) -> UniformParam {
        node.uplink_latency().unwrap_or(match node.kind() {
            NodeKind::Edge => self.edge_to_intermediary_latency,
            _ => self.intermediary_to_cloud_latency,
        })
    }

    /// Renders the configuration so that [`SimulationConfig::from_text`]
    /// reads it back unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("seed", self.seed.to_string());
        line("duration_ms", self.duration_ms.to_string());
        line("tick_ms", self.tick_ms.to_string());
        line("processing_latency", self.processing_latency.to_string());
        line(
            "edge_to_intermediary_latency",
            self.edge_to_intermediary_latency.to_string(),
        );
        line(
            "intermediary_to_cloud_latency",
            self.intermediary_to_cloud_latency.to_string(),
        );
        line("storage_bid", self.storage_bid.to_string());
        line("processing_bid", self.processing_bid.to_string());
        line("executable_count", self.executable_count.to_string());
        line("executable_size", self.executable_size.to_string());
        line(
            "requests_per_second_per_edge",
            self.requests_per_second_per_edge.to_string(),
        );
        line("payment_rule", self.payment_rule.to_string());
        line("eviction_policy", self.eviction_policy.to_string());
        for node in self.topology.nodes() {
            let value = match (
                node.storage_capacity(),
                node.processing_capacity(),
                node.uplink(),
            ) {
                (Capacity::Bounded(s), Capacity::Bounded(p), Some(up)) => {
                    format!("{},{s},{p},{up}", node.kind())
                }
                _ => node.kind().to_string(),
            };
            line("node", value);
        }
        out
    }
}
