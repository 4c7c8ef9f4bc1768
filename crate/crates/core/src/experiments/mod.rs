//! Scripted experiment drivers. Each driver reads its protocol from a
//! [`Config`], runs it deterministically for a seed, and hands back typed
//! findings plus the CSV tables and summary lines written to disk.

mod bench;
pub mod config;
mod sweeps;
mod verify;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub(crate) use bench::epochs_csv;
pub use bench::{cv_bench, noise_study, thread_scaling, BenchFindings, NoiseFindings, NoiseRow, ScalingFindings, ScalingRow};
pub use config::Config;
pub use sweeps::{gridsize_sweep, neighborhood_sweep, pr_sweep, SweepFindings, SweepPoint};
pub use verify::{
    compare_grids, verify_modes, weights_dynamics, GridComparison, HistogramPair, ModeRepeat, VerifyFindings,
    WeightDynamics,
};

use crate::datagen::{Kind, SyntheticSpec};
use crate::dataset::{load_csv, normalize_unit_range, Dataset, LabelColumn};
use crate::error::{Error, Result};
use crate::metrics::{mean, std_dev, MetricReport};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    VerifyCircle,
    VerifyGauss,
    WeightsDynamics,
    NeighborhoodSweep,
    PrSweep,
    GridsizeSweep,
    SineBench,
    CheckerBench,
    NoiseStudy,
    ThreadScaling,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::VerifyCircle,
        Experiment::VerifyGauss,
        Experiment::WeightsDynamics,
        Experiment::NeighborhoodSweep,
        Experiment::PrSweep,
        Experiment::GridsizeSweep,
        Experiment::SineBench,
        Experiment::CheckerBench,
        Experiment::NoiseStudy,
        Experiment::ThreadScaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::VerifyCircle => "verify-circle",
            Experiment::VerifyGauss => "verify-gauss",
            Experiment::WeightsDynamics => "weights-dynamics",
            Experiment::NeighborhoodSweep => "neighborhood-sweep",
            Experiment::PrSweep => "pr-sweep",
            Experiment::GridsizeSweep => "gridsize-sweep",
            Experiment::SineBench => "sine-bench",
            Experiment::CheckerBench => "checker-bench",
            Experiment::NoiseStudy => "noise-study",
            Experiment::ThreadScaling => "thread-scaling",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub threads: usize,
    /// Output directory; nothing is written when `None`.
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn new(seed: u64, threads: usize) -> Self {
        RunOptions {
            seed,
            threads: threads.max(1),
            out: None,
        }
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = Some(out.into());
        self
    }
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.csv", self.name));
        fs::write(&path, self.to_csv()?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Ordered `key: value` lines for `summary.txt`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|l| l.0 == key).map(|l| l.1.as_str())
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }

    pub fn to_text(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }
}

#[derive(Debug, Clone)]
pub enum Findings {
    Verify(VerifyFindings),
    Weights(WeightDynamics),
    Sweep(SweepFindings),
    Bench(BenchFindings),
    Noise(NoiseFindings),
    Scaling(ScalingFindings),
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub experiment: Experiment,
    /// Held-out performance, for drivers that evaluate a classifier.
    pub report: Option<MetricReport>,
    pub findings: Findings,
    pub summary: Summary,
    pub tables: Vec<Table>,
    pub files: Vec<PathBuf>,
}

/// Runs one named protocol and, when `opts.out` is set, writes its tables and
/// `summary.txt` there.
pub fn run_experiment(experiment: Experiment, cfg: &Config, opts: &RunOptions) -> Result<ExperimentOutcome> {
    let started = std::time::Instant::now();
    let (findings, report) = match experiment {
        Experiment::VerifyCircle => (Findings::Verify(verify::run(Kind::Circle, cfg, opts)?), None),
        Experiment::VerifyGauss => (Findings::Verify(verify::run(Kind::GaussianPairs, cfg, opts)?), None),
        Experiment::WeightsDynamics => (Findings::Weights(weights_dynamics(cfg, opts)?), None),
        Experiment::NeighborhoodSweep => (Findings::Sweep(neighborhood_sweep(cfg, opts)?), None),
        Experiment::PrSweep => (Findings::Sweep(pr_sweep(cfg, opts)?), None),
        Experiment::GridsizeSweep => (Findings::Sweep(gridsize_sweep(cfg, opts)?), None),
        Experiment::SineBench | Experiment::CheckerBench => {
            let kind = if experiment == Experiment::SineBench {
                Kind::Sine
            } else {
                Kind::Checkerboard
            };
            let b = cv_bench(kind, cfg, opts)?;
            let r = b.pooled_report();
            (Findings::Bench(b), Some(r))
        }
        Experiment::NoiseStudy => (Findings::Noise(noise_study(cfg, opts)?), None),
        Experiment::ThreadScaling => (Findings::Scaling(thread_scaling(cfg, opts)?), None),
    };
    let (mut summary, tables) = match &findings {
        Findings::Verify(f) => (f.summary(), f.tables()),
        Findings::Weights(f) => (f.summary(), f.tables()),
        Findings::Sweep(f) => (f.summary(), f.tables()),
        Findings::Bench(f) => (f.summary(), f.tables()),
        Findings::Noise(f) => (f.summary(), f.tables()),
        Findings::Scaling(f) => (f.summary(), f.tables()),
    };
    let mut head = Summary::default();
    head.push("experiment", experiment);
    head.push("seed", opts.seed);
    for (k, v) in cfg.entries() {
        head.push(format!("config.{k}"), v);
    }
    head.lines.append(&mut summary.lines);
    let mut summary = head;
    // wall time is informational and kept out of the CSVs, which must be
    // byte-identical across runs
    summary.push("wall_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));

    let mut files = Vec::new();
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for t in &tables {
            files.push(t.write(dir)?);
        }
        let path = dir.join("summary.txt");
        fs::write(&path, summary.to_text()).map_err(|e| Error::io(&path, e))?;
        files.push(path);
    }
    Ok(ExperimentOutcome {
        experiment,
        report,
        findings,
        summary,
        tables,
        files,
    })
}

/// Dataset for a driver: `data.path` (with `data.label`, optional
/// `data.normalize`) when given, otherwise a synthetic `data.kind` of
/// `data.n` instances seeded from `seed`.
pub(crate) fn load_data(cfg: &Config, default_kind: Kind, default_n: usize, seed: u64) -> Result<Dataset> {
    if let Some(path) = cfg.raw("data.path") {
        let label: LabelColumn = cfg.get_or("data.label", LabelColumn::Last)?;
        let d = load_csv(path, &label)?;
        return Ok(if cfg.get_or("data.normalize", true)? {
            normalize_unit_range(&d)
        } else {
            d
        });
    }
    synthetic(cfg, default_kind, default_n, seed)
}

pub(crate) fn synthetic(cfg: &Config, default_kind: Kind, default_n: usize, seed: u64) -> Result<Dataset> {
    let kind = cfg.get_or("data.kind", default_kind)?;
    let n = cfg.get_or("data.n", default_n)?;
    SyntheticSpec::new(kind, n, seed).generate()
}

/// Seed for repeat `r` of stream `tag`.
pub(crate) fn repeat_seed(seed: u64, tag: u64, r: usize) -> u64 {
    rng::derive_seed(seed, &[tag, r as u64])
}

pub(crate) fn mean_sd(xs: &[f64]) -> String {
    if xs.len() < 2 {
        return format!("{}", mean(xs));
    }
    format!("{} ± {}", mean(xs), std_dev(xs))
}

/// Peak resident set size in kB, where the platform reports it.
pub fn peak_rss_kb() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    status
        .lines()
        .find_map(|l| l.strip_prefix("VmHWM:"))
        .and_then(|v| v.trim().trim_end_matches("kB").trim().parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!(matches!("nope".parse::<Experiment>(), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn table_csv_has_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n1,\"x,y\"\n");
    }
}
