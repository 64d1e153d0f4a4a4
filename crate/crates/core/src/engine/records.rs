//! Line-oriented record file for a single run.
//!
//! ```text
//! [config]
//! <key = value lines, readable by SimulationConfig::from_text>
//! [outcomes]
//! request_id,served_kind,serving_node,payment,latency_ms,hops,overflow
//! 0,edge,0,103.52,37,0,0
//! ...
//! [nodes]
//! node,kind,storage_revenue,processing_revenue,executions_served,avg_execution_price,stored_executables,avg_storage_bid
//! ...
//! [summary]
//! key = value
//! ```
//!
//! `hops` is the path as node ids joined by `>`; `overflow` is `1` when the
//! request finished after the simulated period.

use std::io::{self, Write};

use crate::domain::NodeKind;

use super::result::SimulationResult;

pub const OUTCOME_HEADER: &str =
    "request_id,served_kind,serving_node,payment,latency_ms,hops,overflow";
pub const NODE_HEADER: &str = "node,kind,storage_revenue,processing_revenue,executions_served,avg_execution_price,stored_executables,avg_storage_bid";

pub fn write_records<W: Write>(result: &SimulationResult, mut out: W) -> io::Result<()> {
    writeln!(out, "[config]")?;
    out.write_all(result.config.to_text().as_bytes())?;

    writeln!(out, "[outcomes]")?;
    writeln!(out, "{OUTCOME_HEADER}")?;
    let mut path = String::new();
    for o in &result.outcomes {
        path.clear();
        for (i, node) in o.path.iter().enumerate() {
            if i > 0 {
                path.push('>');
            }
            path.push_str(&node.to_string());
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            o.request_id,
            o.served_at,
            o.serving_node,
            o.payment,
            o.total_latency_ms,
            path,
            u8::from(o.overflowed_simulation_end)
        )?;
    }

    writeln!(out, "[nodes]")?;
    writeln!(out, "{NODE_HEADER}")?;
    for n in &result.nodes {
        writeln!(
            out,
            "{},{},{},{},{},{:.4},{},{:.4}",
            n.id,
            n.kind,
            n.storage_revenue,
            n.processing_revenue,
            n.executions_served,
            n.avg_execution_price,
            n.stored_executables_at_end.len(),
            n.avg_storage_bid_of_stored
        )?;
    }

    writeln!(out, "[summary]")?;
    writeln!(out, "requests = {}", result.generated_requests)?;
    writeln!(out, "avg_latency_ms = {:.4}", result.latency.avg_ms)?;
    writeln!(out, "p50_latency_ms = {}", result.latency.p50_ms)?;
    writeln!(out, "p95_latency_ms = {}", result.latency.p95_ms)?;
    for kind in NodeKind::ALL {
        writeln!(out, "served_{kind} = {}", result.served_per_kind.get(kind))?;
    }
    for kind in NodeKind::ALL {
        writeln!(
            out,
            "avg_execution_price_{kind} = {:.4}",
            result.avg_execution_price(kind)
        )?;
    }
    let overflowed = result
        .outcomes
        .iter()
        .filter(|o| o.overflowed_simulation_end)
        .count();
    writeln!(out, "overflowed = {overflowed}")?;
    Ok(())
}
