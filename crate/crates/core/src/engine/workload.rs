use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, SimulationConfig};
use crate::domain::{Executable, ExecutableId, Money, Request, RequestId, UniformParam};

// Executables and requests draw from separate streams of the same seed, so
// changing how many of one are generated leaves the other untouched.
const EXECUTABLE_STREAM: u64 = 0;
const REQUEST_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub executables: Vec<Executable>,
    /// Sorted by arrival; `id` and `seq` equal the position.
    pub requests: Vec<Request>,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws executables and requests for `cfg`. Output depends only on `cfg`.
///
/// Every executable bids the configured mean processing price; each request
/// draws its own bid from the processing-bid range centred on its
/// executable's bid. Uplink latencies for the request's whole path to the
/// cloud are drawn up front, one per traversal.
pub fn generate_workload(cfg: &SimulationConfig) -> Result<Workload, ConfigError> {
    cfg.validate()?;

    let mut rng = stream(cfg.seed, EXECUTABLE_STREAM);
    let processing_bid = Money::from_f64_rounded(cfg.processing_bid.mean())
        .ok_or_else(|| ConfigError::Invalid("processing_bid mean is not a valid amount".into()))?;
    let executables: Vec<Executable> = (0..cfg.executable_count)
        .map(|i| {
            let size = cfg.executable_size.sample_int(&mut rng).max(1);
            let storage_bid = cfg.storage_bid.sample_money(&mut rng);
            Executable::new(ExecutableId(i), size, storage_bid, processing_bid)
                .expect("size is at least 1")
        })
        .collect();

    let mut rng = stream(cfg.seed, REQUEST_STREAM);
    let per_edge = cfg.requests_per_edge();
    let mut requests = Vec::with_capacity(per_edge as usize * cfg.topology.edges().count());
    for edge in cfg.topology.edges() {
        let path = cfg.topology.path_to_cloud(edge.id());
        let links: Vec<UniformParam> = path[..path.len() - 1]
            .iter()
            .map(|&n| cfg.uplink_latency(cfg.topology.node(n)))
            .collect();
        for _ in 0..per_edge {
            // one uniform draw per choice keeps streams aligned across executable counts
            let pick = rng.random::<f64>() * executables.len() as f64;
            let exe = &executables[(pick as usize).min(executables.len() - 1)];
            let arrival = rng.random_range(0..cfg.duration_ms);
            let duration = cfg.processing_latency.sample_int(&mut rng).max(1);
            let bid_range =
                UniformParam::new(exe.processing_bid.as_f64(), cfg.processing_bid.half_width())
                    .map_err(|e| ConfigError::Invalid(format!("processing_bid: {e}")))?;
            let bid = bid_range.sample_money(&mut rng);
            let mut request = Request::new(RequestId(0), exe.id, edge.id(), arrival, duration, bid);
            request.link_latencies = links.iter().map(|l| l.sample_int(&mut rng)).collect();
            requests.push(request);
        }
    }

    requests.sort_by_key(|r| (r.arrival_time, r.origin_node));
    for (i, r) in requests.iter_mut().enumerate() {
        r.id = RequestId(i as u64);
        r.seq = i as u64;
    }
    Ok(Workload {
        executables,
        requests,
    })
}
