//! Parameter sweeps over simulation configurations.
//!
//! Two canned sweeps are provided: `exp1` varies the request load on a
//! processing-constrained chain, `exp2` varies the number of executables on
//! a storage-constrained chain. Each sweep point runs several repetitions;
//! repetition `k` uses seed `base_seed + k` at every point, so points share
//! their random streams and differ only in the swept parameter.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{NodeKind, PerKind};
use crate::engine::{self, ConfigEntry, ConfigError, SimulationConfig, SimulationResult, KEYS};

pub const DEFAULT_REPETITIONS: u32 = 5;
/// Extra exp1 load point used to check where the trends lead.
pub const VERIFICATION_LOAD: f64 = 5000.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("nothing to write: no sweep rows")]
    NoRows,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepName {
    Exp1,
    Exp2,
    Custom(String),
}

impl fmt::Display for SweepName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepName::Exp1 => f.write_str("exp1"),
            SweepName::Exp2 => f.write_str("exp2"),
            SweepName::Custom(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: SweepName,
    pub base_config: SimulationConfig,
    pub swept_parameter: String,
    pub values: Vec<f64>,
    pub repetitions: u32,
}

fn format_value(v: f64) -> String {
    // whole numbers print without a fractional part so integer keys parse
    format!("{v}")
}

impl SweepSpec {
    pub fn new(
        name: SweepName,
        base_config: SimulationConfig,
        swept_parameter: &str,
        values: Vec<f64>,
        repetitions: u32,
    ) -> Result<Self, ExperimentError> {
        if !KEYS.contains(&swept_parameter) || matches!(swept_parameter, "node" | "seed") {
            return Err(ExperimentError::InvalidSweep(format!(
                "`{swept_parameter}` is not a sweepable configuration field"
            )));
        }
        if values.is_empty() {
            return Err(ExperimentError::InvalidSweep("no sweep values".into()));
        }
        if values
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
            || values.iter().any(|v| !v.is_finite())
        {
            return Err(ExperimentError::InvalidSweep(
                "sweep values must be finite and strictly increasing".into(),
            ));
        }
        if repetitions == 0 {
            return Err(ExperimentError::InvalidSweep(
                "repetitions must be at least 1".into(),
            ));
        }
        Ok(SweepSpec {
            name,
            base_config,
            swept_parameter: swept_parameter.to_string(),
            values,
            repetitions,
        })
    }

    pub fn base_seed(&self) -> u64 {
        self.base_config.seed
    }

    pub fn seed_for(&self, repetition: u32) -> u64 {
        self.base_seed().wrapping_add(repetition as u64)
    }

    /// Configuration of one sweep point and repetition.
    pub fn point_config(
        &self,
        value: f64,
        repetition: u32,
    ) -> Result<SimulationConfig, ConfigError> {
        self.base_config.clone().with_entries(&[
            ConfigEntry::new(&self.swept_parameter, format_value(value)),
            ConfigEntry::new("seed", self.seed_for(repetition).to_string()),
        ])
    }

    pub fn simulations(&self) -> usize {
        self.values.len() * self.repetitions as usize
    }

    /// `<sweep-name>-<base-seed>.csv`
    pub fn csv_file_name(&self) -> String {
        format!("{}-{}.csv", self.name, self.base_seed())
    }
}

/// Knobs shared by the canned sweeps.
#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Applied to the base configuration; unknown keys are rejected.
    pub overrides: Vec<ConfigEntry>,
    pub seed: Option<u64>,
    pub repetitions: Option<u32>,
    /// exp1 only: append the 5000 req/s point.
    pub with_verification_point: bool,
}

fn apply_options(
    mut base: SimulationConfig,
    options: &SweepOptions,
) -> Result<(SimulationConfig, u32), ExperimentError> {
    base = base.with_entries(&options.overrides)?;
    if let Some(seed) = options.seed {
        base.seed = seed;
    }
    Ok((base, options.repetitions.unwrap_or(DEFAULT_REPETITIONS)))
}

fn shared_settings() -> SimulationConfig {
    // duration, latencies and bid ranges are common to both experiments
    SimulationConfig::default()
}

/// Processing-price experiment: load 100..=2000 req/s in steps of 100 on a
/// chain whose edge (5 slots) and intermediary (20 slots) saturate at about
/// 167 and 833 req/s. Storage never binds.
pub fn exp1_spec(options: &SweepOptions) -> Result<SweepSpec, ExperimentError> {
    let base = shared_settings().with_entries(&[
        ConfigEntry::new("edge_storage_capacity", "10000"),
        ConfigEntry::new("edge_processing_capacity", "5"),
        ConfigEntry::new("intermediary_storage_capacity", "10000"),
        ConfigEntry::new("intermediary_processing_capacity", "20"),
        ConfigEntry::new("processing_bid", "100,50"),
    ])?;
    let (base, repetitions) = apply_options(base, options)?;
    let mut values: Vec<f64> = (1..=20).map(|i| i as f64 * 100.0).collect();
    if options.with_verification_point {
        values.push(VERIFICATION_LOAD);
    }
    SweepSpec::new(
        SweepName::Exp1,
        base,
        "requests_per_second_per_edge",
        values,
        repetitions,
    )
}

/// Storage-price experiment: 5..=100 executables in steps of 5 competing for
/// 100 storage units at the edge and 500 at the intermediary. Processing
/// capacity far exceeds the load.
pub fn exp2_spec(options: &SweepOptions) -> Result<SweepSpec, ExperimentError> {
    let base = shared_settings().with_entries(&[
        ConfigEntry::new("edge_storage_capacity", "100"),
        ConfigEntry::new("edge_processing_capacity", "1000"),
        ConfigEntry::new("intermediary_storage_capacity", "500"),
        ConfigEntry::new("intermediary_processing_capacity", "1000"),
        ConfigEntry::new("storage_bid", "100,50"),
        ConfigEntry::new("executable_size", "10,5"),
        ConfigEntry::new("requests_per_second_per_edge", "100"),
    ])?;
    let (base, repetitions) = apply_options(base, options)?;
    let values = (1..=20).map(|i| i as f64 * 5.0).collect();
    SweepSpec::new(
        SweepName::Exp2,
        base,
        "executable_count",
        values,
        repetitions,
    )
}

/// Aggregates of one simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub exec_price: PerKind<f64>,
    pub storage_bid: PerKind<f64>,
    pub avg_latency_ms: f64,
    pub served_share: PerKind<f64>,
}

impl From<&SimulationResult> for RunSummary {
    fn from(r: &SimulationResult) -> Self {
        RunSummary {
            exec_price: PerKind::from_fn(|k| r.avg_execution_price(k)),
            storage_bid: PerKind::from_fn(|k| r.avg_storage_bid(k)),
            avg_latency_ms: r.latency.avg_ms,
            served_share: PerKind::from_fn(|k| r.served_share(k)),
        }
    }
}

/// One sweep value, averaged over its repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub exec_price: PerKind<f64>,
    pub storage_bid: PerKind<f64>,
    pub avg_latency_ms: f64,
    pub served_share: PerKind<f64>,
    pub seeds: Vec<u64>,
    /// Set when any repetition failed; the averages are then meaningless.
    pub failure: Option<String>,
}

impl SweepRow {
    pub fn repetitions(&self) -> usize {
        self.seeds.len()
    }

    fn aggregate(value: f64, runs: Vec<(u64, Result<RunSummary, String>)>) -> Self {
        let mut seeds = Vec::with_capacity(runs.len());
        let mut ok = Vec::with_capacity(runs.len());
        let mut failure = None;
        for (seed, run) in runs {
            match run {
                Ok(summary) => {
                    seeds.push(seed);
                    ok.push(summary);
                }
                Err(e) => {
                    failure.get_or_insert(format!("seed {seed}: {e}"));
                }
            }
        }
        let n = ok.len().max(1) as f64;
        let mean = |f: &dyn Fn(&RunSummary) -> f64| ok.iter().map(f).sum::<f64>() / n;
        let per_kind = |f: &dyn Fn(&RunSummary) -> &PerKind<f64>| {
            PerKind::from_fn(|k| mean(&|s| *f(s).get(k)))
        };
        SweepRow {
            value,
            exec_price: per_kind(&|s| &s.exec_price),
            storage_bid: per_kind(&|s| &s.storage_bid),
            avg_latency_ms: mean(&|s| s.avg_latency_ms),
            served_share: per_kind(&|s| &s.served_share),
            seeds,
            failure,
        }
    }
}

/// Runs every point and repetition of `spec`, in parallel, and returns one
/// row per value in value order. A failing run marks its row instead of
/// aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Vec<SweepRow> {
    let jobs: Vec<(usize, u32)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();
    let results: Vec<(usize, u64, Result<RunSummary, String>)> = jobs
        .par_iter()
        .map(|&(v, rep)| {
            let run = spec
                .point_config(spec.values[v], rep)
                .map_err(engine::EngineError::from)
                .and_then(|cfg| engine::run(&cfg))
                .map(|r| RunSummary::from(&r))
                .map_err(|e| e.to_string());
            (v, spec.seed_for(rep), run)
        })
        .collect();

    let mut grouped: Vec<Vec<(u64, Result<RunSummary, String>)>> =
        vec![Vec::new(); spec.values.len()];
    for (v, seed, run) in results {
        grouped[v].push((seed, run));
    }
    grouped
        .into_iter()
        .zip(&spec.values)
        .map(|(runs, &value)| SweepRow::aggregate(value, runs))
        .collect()
}

pub const CSV_HEADER: [&str; 12] = [
    "value",
    "edge_avg_exec_price",
    "interm_avg_exec_price",
    "cloud_avg_exec_price",
    "edge_avg_storage_bid",
    "interm_avg_storage_bid",
    "cloud_avg_storage_bid",
    "avg_latency_ms",
    "edge_share",
    "interm_share",
    "cloud_share",
    "repetitions",
];

/// Writes the rows as CSV. Failed rows keep their value and leave every
/// metric empty.
pub fn write_csv_to<W: Write>(rows: &[SweepRow], out: W) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRows);
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    let f = |x: f64| format!("{x:.4}");
    for row in rows {
        let mut record = vec![format_value(row.value)];
        if row.failure.is_some() {
            record.extend(std::iter::repeat_n(String::new(), 10));
            record.push("0".into());
        } else {
            for metric in [row.exec_price, row.storage_bid] {
                record.extend(NodeKind::ALL.iter().map(|k| f(*metric.get(*k))));
            }
            record.push(f(row.avg_latency_ms));
            record.extend(NodeKind::ALL.iter().map(|k| f(*row.served_share.get(*k))));
            record.push(row.repetitions().to_string());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| ExperimentError::Csv(e.into()))?;
    Ok(())
}

/// Writes the rows to `destination`. The file only appears once it is complete.
pub fn write_csv(rows: &[SweepRow], destination: &Path) -> Result<(), ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::NoRows);
    }
    let io_err = |source| ExperimentError::Io {
        path: destination.to_path_buf(),
        source,
    };
    let mut buf = Vec::new();
    write_csv_to(rows, &mut buf)?;
    let tmp = destination.with_extension("csv.partial");
    fs::write(&tmp, &buf).map_err(io_err)?;
    fs::rename(&tmp, destination).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp1_values() {
        let spec = exp1_spec(&SweepOptions::default()).unwrap();
        assert_eq!(spec.values.len(), 20);
        assert_eq!(spec.values[0], 100.0);
        assert_eq!(spec.values[19], 2000.0);
        assert_eq!(spec.repetitions, 5);
        let with = exp1_spec(&SweepOptions {
            with_verification_point: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(with.values.len(), 21);
        assert_eq!(*with.values.last().unwrap(), 5000.0);
    }

    #[test]
    fn exp1_storage_never_binds() {
        let spec = exp1_spec(&SweepOptions::default()).unwrap();
        let cfg = &spec.base_config;
        let worst = cfg.executable_count as u64 * cfg.executable_size.upper().ceil() as u64;
        for node in cfg.topology.nodes() {
            assert!(node.storage_capacity().admits(worst));
        }
    }

    #[test]
    fn exp2_capacities() {
        let spec = exp2_spec(&SweepOptions::default()).unwrap();
        assert_eq!(spec.values.len(), 20);
        assert_eq!(spec.values[0], 5.0);
        assert_eq!(spec.values[19], 100.0);
        let nodes = spec.base_config.topology.nodes();
        assert_eq!(nodes[0].storage_capacity().bound(), Some(100));
        assert_eq!(nodes[1].storage_capacity().bound(), Some(500));
        assert_eq!(nodes[2].storage_capacity().bound(), None);
    }

    #[test]
    fn unknown_override_rejected() {
        let err = exp1_spec(&SweepOptions {
            overrides: vec![ConfigEntry::new("warp_factor", "9")],
            ..Default::default()
        });
        assert!(err.is_err());
        let err = SimulationConfig::default()
            .with_entries(&parse_override("warp_factor = 9"))
            .unwrap_err();
        assert!(err.is_parse());
    }

    fn parse_override(text: &str) -> Vec<ConfigEntry> {
        let (k, v) = text.split_once('=').unwrap();
        vec![ConfigEntry::new(k.trim(), v.trim())]
    }

    #[test]
    fn sweep_validation() {
        let base = SimulationConfig::default();
        assert!(SweepSpec::new(SweepName::Exp1, base.clone(), "bogus", vec![1.0], 1).is_err());
        assert!(
            SweepSpec::new(SweepName::Exp1, base.clone(), "executable_count", vec![], 1).is_err()
        );
        assert!(SweepSpec::new(
            SweepName::Exp1,
            base.clone(),
            "executable_count",
            vec![2.0, 2.0],
            1
        )
        .is_err());
        assert!(SweepSpec::new(SweepName::Exp1, base, "executable_count", vec![2.0], 0).is_err());
    }

    fn small_spec(values: Vec<f64>, reps: u32) -> SweepSpec {
        let base = SimulationConfig::from_text("duration_ms = 2000\nseed = 11").unwrap();
        SweepSpec::new(
            SweepName::Custom("small".into()),
            base,
            "requests_per_second_per_edge",
            values,
            reps,
        )
        .unwrap()
    }

    #[test]
    fn single_point_echoes_run() {
        let spec = small_spec(vec![100.0], 1);
        let rows = run_sweep(&spec);
        assert_eq!(rows.len(), 1);
        let direct = engine::run(&spec.point_config(100.0, 0).unwrap()).unwrap();
        let s = RunSummary::from(&direct);
        assert_eq!(rows[0].avg_latency_ms, s.avg_latency_ms);
        assert_eq!(rows[0].exec_price, s.exec_price);
        assert_eq!(rows[0].seeds, vec![11]);
    }

    #[test]
    fn failed_point_is_recorded() {
        // 3 req/s over 2 s is fine, 1.5 is not a whole count per run
        let spec = small_spec(vec![1.5, 3.0], 2);
        let rows = run_sweep(&spec);
        assert!(rows[0].failure.is_some());
        assert!(rows[1].failure.is_none());
        assert_eq!(rows[1].repetitions(), 2);
        let mut buf = Vec::new();
        write_csv_to(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("1.5,,"));
    }

    #[test]
    fn csv_layout() {
        let rows = run_sweep(&small_spec(vec![50.0, 100.0], 2));
        let mut a = Vec::new();
        write_csv_to(&rows, &mut a).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert!(text.ends_with('\n'));
        assert!(lines[1].starts_with("50,"));
        assert!(lines[2].ends_with(",2"));
        let mut b = Vec::new();
        write_csv_to(&rows, &mut b).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            write_csv_to(&[], Vec::new()),
            Err(ExperimentError::NoRows)
        ));
    }

    #[test]
    fn write_csv_to_unwritable_destination() {
        let rows = run_sweep(&small_spec(vec![50.0], 1));
        let err = write_csv(&rows, Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(matches!(err, ExperimentError::Io { .. }));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("small-11.csv");
        write_csv(&rows, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
    }
}
