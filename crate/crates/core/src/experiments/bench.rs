//! Cross-validated benchmarks, the label-noise study and worker scaling.

use std::time::{Duration, Instant};

use super::{load_data, mean_sd, peak_rss_kb, repeat_seed, synthetic, Config, RunOptions, Summary, Table};
use crate::datagen::{Kind, SyntheticSpec};
use crate::dataset::{holdout_split, inject_label_noise, stratified_folds, Dataset};
use crate::engine::{run_psbml, PsbmlResult};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, Neighborhood};
use crate::learners::{BoostBase, Density, LearnerSpec};
use crate::metrics::{impact, mean, MetricReport};
use crate::par::available_threads;

const TAG_DATA: u64 = 0xda7a;
const TAG_FOLDS: u64 = 0xf01d;
const TAG_SPLIT: u64 = 0x5b1;
const TAG_TEST: u64 = 0x7e57;
const TAG_NOISE: u64 = 0x9015e;
const TAG_ENGINE: u64 = 0xe1;

fn bench_grid_default() -> GridConfig {
    GridConfig::new(3, 3, Neighborhood::C9, 0.2, 10).expect("valid default grid")
}

fn peak_distinct(res: &PsbmlResult) -> usize {
    res.reports.iter().map(|r| r.distinct_count).max().unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct BenchFindings {
    pub kind: Kind,
    pub n: usize,
    /// The engine's pocket classifier on each test fold.
    pub folds: Vec<MetricReport>,
    pub fold_sizes: Vec<usize>,
    pub best_epochs: Vec<usize>,
    /// The base learner trained once on each whole training fold.
    pub baseline: Vec<MetricReport>,
}

fn pool_reports(reports: &[MetricReport], sizes: &[usize]) -> MetricReport {
    let tested: usize = sizes.iter().sum();
    let wrong: usize = reports.iter().map(|r| r.misclassifications).sum();
    let aucs = |f: fn(&MetricReport) -> f64| mean(&reports.iter().map(f).collect::<Vec<_>>());
    MetricReport {
        accuracy: 1.0 - wrong as f64 / tested.max(1) as f64,
        auc_roc: aucs(|r| r.auc_roc),
        auc_prc: aucs(|r| r.auc_prc),
        misclassifications: wrong,
        runtime_secs: reports.iter().map(|r| r.runtime_secs).sum(),
        peak_distinct: reports.iter().map(|r| r.peak_distinct).max().unwrap_or(0),
    }
}

impl BenchFindings {
    pub fn mean_accuracy(&self) -> f64 {
        mean(&self.folds.iter().map(|r| r.accuracy).collect::<Vec<_>>())
    }

    /// Counts summed over all test folds; AUCs averaged per fold.
    pub fn pooled_report(&self) -> MetricReport {
        pool_reports(&self.folds, &self.fold_sizes)
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        s.push("task", self.kind);
        s.push("n", self.n);
        s.push("folds", self.folds.len());
        let col = |v: &[MetricReport], f: fn(&MetricReport) -> f64| v.iter().map(f).collect::<Vec<f64>>();
        s.push("psbml.accuracy", mean_sd(&col(&self.folds, |r| r.accuracy)));
        s.push("psbml.auc_roc", mean_sd(&col(&self.folds, |r| r.auc_roc)));
        s.push("psbml.auc_prc", mean_sd(&col(&self.folds, |r| r.auc_prc)));
        s.push("psbml.runtime_secs", mean_sd(&col(&self.folds, |r| r.runtime_secs)));
        s.push("psbml.peak_distinct", mean_sd(&col(&self.folds, |r| r.peak_distinct as f64)));
        let be: Vec<f64> = self.best_epochs.iter().map(|&e| e as f64).collect();
        s.push("psbml.best_epoch", mean_sd(&be));
        if !self.baseline.is_empty() {
            s.push("baseline.accuracy", mean_sd(&col(&self.baseline, |r| r.accuracy)));
            s.push("baseline.auc_roc", mean_sd(&col(&self.baseline, |r| r.auc_roc)));
            s.push("baseline.runtime_secs", mean_sd(&col(&self.baseline, |r| r.runtime_secs)));
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new(
            "folds",
            &["fold", "method", "accuracy", "auc_roc", "auc_prc", "misclassifications", "peak_distinct", "best_epoch"],
        );
        let row = |f: usize, m: &str, r: &MetricReport, best: String| {
            vec![
                f.to_string(),
                m.to_string(),
                r.accuracy.to_string(),
                r.auc_roc.to_string(),
                r.auc_prc.to_string(),
                r.misclassifications.to_string(),
                r.peak_distinct.to_string(),
                best,
            ]
        };
        for (f, r) in self.folds.iter().enumerate() {
            t.push(row(f, "psbml", r, self.best_epochs[f].to_string()));
            if let Some(b) = self.baseline.get(f) {
                t.push(row(f, "baseline", b, String::new()));
            }
        }
        vec![t]
    }
}

/// k-fold cross-validation of the engine (`exp.folds`, default 10); each
/// training fold gives up `exp.validation` of itself for the pocket.
pub fn cv_bench(default_kind: Kind, cfg: &Config, opts: &RunOptions) -> Result<BenchFindings> {
    let data = load_data(cfg, default_kind, 100_000, repeat_seed(opts.seed, TAG_DATA, 0))?;
    let kind = cfg.get_or("data.kind", default_kind)?;
    let grid = cfg.grid(&bench_grid_default())?;
    let learner = cfg.learner(&LearnerSpec::Tree {
        max_depth: super::config::DEFAULT_TREE_DEPTH,
        min_leaf: 2,
    })?;
    let folds = cfg.get_or("exp.folds", 10usize)?;
    let validation = cfg.get_or("exp.validation", 0.1)?;
    let baseline = cfg.get_or("exp.baseline", true)?;
    let mut out = BenchFindings {
        kind,
        n: data.len(),
        folds: Vec::new(),
        fold_sizes: Vec::new(),
        best_epochs: Vec::new(),
        baseline: Vec::new(),
    };
    for (f, (train_fold, test)) in stratified_folds(&data, folds, repeat_seed(opts.seed, TAG_FOLDS, 0))?
        .into_iter()
        .enumerate()
    {
        let (train, val) = holdout_split(&train_fold, validation, repeat_seed(opts.seed, TAG_SPLIT, f))?;
        let t0 = Instant::now();
        let res = run_psbml(&train, &val, &grid, &learner, repeat_seed(opts.seed, TAG_ENGINE, f), opts.threads)?;
        let elapsed = t0.elapsed();
        out.folds.push(MetricReport::evaluate(res.best_classifier.as_ref(), &test, elapsed, peak_distinct(&res)));
        out.fold_sizes.push(test.len());
        out.best_epochs.push(res.best_epoch);
        if baseline {
            let t0 = Instant::now();
            let clf = learner.train(&train_fold)?;
            out.baseline.push(MetricReport::evaluate(clf.as_ref(), &test, t0.elapsed(), train_fold.len()));
        }
        log::info!("{kind} fold {f}: accuracy {:.4}", out.folds[f].accuracy);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    pub algorithm: String,
    pub dataset: Kind,
    pub noise: f64,
    pub repeat: usize,
    /// Held-out AUC in percent.
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseFindings {
    pub rows: Vec<NoiseRow>,
    pub algorithms: Vec<String>,
    pub datasets: Vec<Kind>,
    pub levels: Vec<f64>,
}

impl NoiseFindings {
    fn mean_auc(&self, alg: &str, kind: Kind, noise: f64) -> f64 {
        let xs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.algorithm == alg && r.dataset == kind && r.noise == noise)
            .map(|r| r.auc)
            .collect();
        mean(&xs)
    }

    /// Mean over datasets of the clean-minus-noisy mean AUC.
    pub fn impact(&self, alg: &str, noise: f64) -> Result<f64> {
        let clean: Vec<f64> = self.datasets.iter().map(|&k| self.mean_auc(alg, k, 0.0)).collect();
        let noisy: Vec<f64> = self.datasets.iter().map(|&k| self.mean_auc(alg, k, noise)).collect();
        impact(&clean, &noisy)
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for a in &self.algorithms {
            for &k in &self.datasets {
                for &l in std::iter::once(&0.0).chain(&self.levels) {
                    s.push(format!("{a}.{k}.noise{l}.auc"), self.mean_auc(a, k, l));
                }
            }
            for &l in &self.levels {
                if let Ok(v) = self.impact(a, l) {
                    s.push(format!("{a}.impact@{l}"), v);
                }
            }
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("auc", &["algorithm", "dataset", "noise", "repeat", "auc"]);
        for r in &self.rows {
            t.push(vec![
                r.algorithm.clone(),
                r.dataset.to_string(),
                r.noise.to_string(),
                r.repeat.to_string(),
                r.auc.to_string(),
            ]);
        }
        let mut i = Table::new("impact", &["algorithm", "noise", "impact"]);
        for a in &self.algorithms {
            for &l in &self.levels {
                if let Ok(v) = self.impact(a, l) {
                    i.push(vec![a.clone(), l.to_string(), v.to_string()]);
                }
            }
        }
        vec![t, i]
    }
}

/// Label noise is injected into the training portion only; test sets stay
/// clean. Each repeat and noise level share the same clean data and split.
pub fn noise_study(cfg: &Config, opts: &RunOptions) -> Result<NoiseFindings> {
    let datasets: Vec<Kind> = cfg.list_or("exp.datasets", &Kind::ALL)?;
    let levels: Vec<f64> = cfg.list_or("exp.noise", &[0.1])?;
    let n = cfg.get_or("data.n", 4000usize)?;
    let repeats = cfg.get_or("exp.repeats", 10usize)?.max(1);
    let test_fraction = cfg.get_or("exp.test_fraction", 0.3)?;
    let validation = cfg.get_or("exp.validation", 0.1)?;
    let grid = cfg.grid(&GridConfig::new(3, 3, Neighborhood::C9, 0.2, 20)?)?;
    let density: Density = cfg.get_or("nb.density", Density::Kernel)?;
    let rounds = cfg.get_or("ada.rounds", 10usize)?;
    let nb = LearnerSpec::NaiveBayes { density };
    let algorithms = vec!["psbml-nb".to_string(), "adaboost-nb".to_string(), "adaboost-stump".to_string()];
    let train_alg = |alg: usize, train: &Dataset, seed: u64| -> Result<Box<dyn crate::learners::Classifier>> {
        match alg {
            0 => {
                let (tr, val) = holdout_split(train, validation, repeat_seed(seed, TAG_SPLIT, 0))?;
                Ok(run_psbml(&tr, &val, &grid, &nb, seed, opts.threads)?.best_classifier)
            }
            1 => LearnerSpec::AdaBoost {
                base: BoostBase::NaiveBayes(density),
                rounds,
            }
            .train(train),
            _ => LearnerSpec::AdaBoost {
                base: BoostBase::Stump,
                rounds,
            }
            .train(train),
        }
    };
    let mut rows = Vec::new();
    for (di, &kind) in datasets.iter().enumerate() {
        for r in 0..repeats {
            let key = (di * 1000 + r) as u64;
            let data = SyntheticSpec::new(kind, n, repeat_seed(opts.seed, TAG_DATA, key as usize)).generate()?;
            let (train, test) = holdout_split(&data, test_fraction, repeat_seed(opts.seed, TAG_TEST, key as usize))?;
            for &level in std::iter::once(&0.0).chain(&levels) {
                let noisy = inject_label_noise(&train, level, repeat_seed(opts.seed, TAG_NOISE, key as usize))?;
                for (ai, name) in algorithms.iter().enumerate() {
                    let clf = train_alg(ai, &noisy, repeat_seed(opts.seed, TAG_ENGINE, key as usize))?;
                    let rep = MetricReport::evaluate(clf.as_ref(), &test, Duration::ZERO, 0);
                    rows.push(NoiseRow {
                        algorithm: name.clone(),
                        dataset: kind,
                        noise: level,
                        repeat: r,
                        auc: 100.0 * rep.auc_roc,
                    });
                }
            }
        }
    }
    Ok(NoiseFindings {
        rows,
        algorithms,
        datasets,
        levels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub workers: usize,
    pub wall_secs: f64,
    pub peak_distinct: usize,
    /// Process peak resident memory after the run, where available.
    pub peak_rss_kb: Option<u64>,
    /// Per-epoch reports rendered as CSV, for the determinism check.
    pub epochs_csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFindings {
    pub host_cores: usize,
    pub rows: Vec<ScalingRow>,
}

impl ScalingFindings {
    /// True when every worker count reproduced the single-worker epochs.
    pub fn deterministic(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].epochs_csv == w[1].epochs_csv)
    }

    /// Wall time non-increasing from 1 to 4 workers; `None` when the host has
    /// fewer than four cores and the check is meaningless.
    pub fn monotone_to_four(&self) -> Option<bool> {
        if self.host_cores < 4 {
            return None;
        }
        let upto: Vec<&ScalingRow> = self.rows.iter().filter(|r| r.workers <= 4).collect();
        Some(upto.windows(2).all(|w| w[1].wall_secs <= w[0].wall_secs))
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        s.push("host_cores", self.host_cores);
        s.push("deterministic_across_workers", self.deterministic());
        s.push(
            "wall_time_monotone_1_to_4",
            match self.monotone_to_four() {
                Some(b) => b.to_string(),
                None => "not evaluable (fewer than 4 cores)".into(),
            },
        );
        for r in &self.rows {
            s.push(format!("workers{}.wall_secs", r.workers), format!("{:.3}", r.wall_secs));
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut t = Table::new("scaling", &["workers", "wall_secs", "peak_distinct", "peak_rss_kb"]);
        for r in &self.rows {
            t.push(vec![
                r.workers.to_string(),
                format!("{:.3}", r.wall_secs),
                r.peak_distinct.to_string(),
                r.peak_rss_kb.map_or(String::new(), |k| k.to_string()),
            ]);
        }
        vec![t]
    }
}

/// Epoch reports as CSV: epoch, val_error, distinct_count, cs_min, cs_max.
pub(crate) fn epochs_csv(res: &PsbmlResult) -> String {
    let mut s = String::from("epoch,val_error,distinct_count,cs_min,cs_max\n");
    for r in &res.reports {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.validation_error, r.distinct_count, r.cs_min, r.cs_max
        ));
    }
    s
}

/// Trains the same seeded run with each worker count in `exp.workers`
/// (default 1, 2, 4, 8) and records wall time. The fastest of
/// `exp.repeats` timings is kept.
pub fn thread_scaling(cfg: &Config, opts: &RunOptions) -> Result<ScalingFindings> {
    let data = synthetic(cfg, Kind::Checkerboard, 20_000, repeat_seed(opts.seed, TAG_DATA, 0))?;
    let grid = cfg.grid(&bench_grid_default())?;
    let learner = cfg.learner(&LearnerSpec::Tree {
        max_depth: super::config::DEFAULT_TREE_DEPTH,
        min_leaf: 2,
    })?;
    let workers: Vec<usize> = cfg.list_or("exp.workers", &[1, 2, 4, 8])?;
    if workers.contains(&0) {
        return Err(Error::Config("exp.workers must be positive".into()));
    }
    let repeats = cfg.get_or("exp.repeats", 1usize)?.max(1);
    let (train, val) = holdout_split(&data, cfg.get_or("exp.validation", 0.1)?, repeat_seed(opts.seed, TAG_SPLIT, 0))?;
    let seed = repeat_seed(opts.seed, TAG_ENGINE, 0);
    let mut rows = Vec::new();
    for w in workers {
        let mut best = f64::INFINITY;
        let mut last = None;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let res = run_psbml(&train, &val, &grid, &learner, seed, w)?;
            best = best.min(t0.elapsed().as_secs_f64());
            last = Some(res);
        }
        let res = last.expect("at least one repeat");
        rows.push(ScalingRow {
            workers: w,
            wall_secs: best,
            peak_distinct: peak_distinct(&res),
            peak_rss_kb: peak_rss_kb(),
            epochs_csv: epochs_csv(&res),
        });
    }
    Ok(ScalingFindings {
        host_cores: available_threads(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench_runs_and_pools() {
        let cfg = Config::default()
            .with("data.n", 1500)
            .with("exp.folds", 3)
            .with("grid.epochs", 3)
            .with("tree.max_depth", 8);
        let b = cv_bench(Kind::Checkerboard, &cfg, &RunOptions::new(4, 1)).unwrap();
        assert_eq!(b.folds.len(), 3);
        assert_eq!(b.baseline.len(), 3);
        let pooled = b.pooled_report();
        assert_eq!(pooled.misclassifications, b.folds.iter().map(|r| r.misclassifications).sum::<usize>());
        assert_eq!(pooled.misclassifications, ((1.0 - pooled.accuracy) * 1500.0).round() as usize);
    }

    #[test]
    fn noise_study_rows_cover_grid() {
        let cfg = Config::default()
            .with("data.n", 400)
            .with("exp.repeats", 1)
            .with("exp.datasets", "circle,gauss")
            .with("grid.epochs", 2)
            .with("nb.density", "gaussian")
            .with("ada.rounds", 3);
        let f = noise_study(&cfg, &RunOptions::new(2, 1)).unwrap();
        // 2 datasets x 2 levels (clean + 0.1) x 3 algorithms
        assert_eq!(f.rows.len(), 12);
        assert!(f.impact("psbml-nb", 0.1).unwrap().is_finite());
    }

    #[test]
    fn scaling_is_deterministic_across_workers() {
        let cfg = Config::default()
            .with("data.n", 1200)
            .with("grid.epochs", 3)
            .with("exp.workers", "1,3")
            .with("tree.max_depth", 6);
        let f = thread_scaling(&cfg, &RunOptions::new(5, 1)).unwrap();
        assert_eq!(f.rows.len(), 2);
        assert!(f.deterministic());
    }
}
