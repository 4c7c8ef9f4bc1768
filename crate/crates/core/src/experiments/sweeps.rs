//! One-parameter sweeps of the engine: neighbourhood shape, replacement
//! probability and grid size.

use super::{load_data, mean_sd, repeat_seed, Config, RunOptions, Summary, Table};
use crate::datagen::Kind;
use crate::dataset::holdout_split;
use crate::engine::run_psbml;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, Neighborhood};
use crate::learners::{Density, LearnerSpec};
use crate::metrics::{mean, MetricReport};

const TAG_DATA: u64 = 0xda7a;
const TAG_SPLIT: u64 = 0x5b1;
const TAG_TEST: u64 = 0x7e57;
const TAG_ENGINE: u64 = 0xe1;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// The swept value as written in the config.
    pub value: String,
    /// Pocket epoch of each repeat.
    pub best_epochs: Vec<usize>,
    /// `val_error[repeat][epoch - 1]`
    pub val_error: Vec<Vec<f64>>,
    /// `distinct[repeat][epoch - 1]`
    pub distinct: Vec<Vec<usize>>,
    /// Held-out AUC of the pocket classifier, when a test split is used.
    pub test_auc: Vec<f64>,
}

impl SweepPoint {
    pub fn mean_best_epoch(&self) -> f64 {
        mean(&self.best_epochs.iter().map(|&e| e as f64).collect::<Vec<_>>())
    }

    /// Mean over repeats of the validation error at a 1-based epoch.
    pub fn mean_error_at(&self, epoch: usize) -> f64 {
        mean(&self.val_error.iter().map(|r| r[epoch - 1]).collect::<Vec<_>>())
    }

    pub fn mean_distinct_at(&self, epoch: usize) -> f64 {
        mean(&self.distinct.iter().map(|r| r[epoch - 1] as f64).collect::<Vec<_>>())
    }

    pub fn epochs(&self) -> usize {
        self.val_error.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFindings {
    pub parameter: String,
    pub points: Vec<SweepPoint>,
}

impl SweepFindings {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        s.push("parameter", &self.parameter);
        for p in &self.points {
            let last = p.epochs();
            let key = format!("{}={}", self.parameter, p.value);
            let be: Vec<f64> = p.best_epochs.iter().map(|&e| e as f64).collect();
            s.push(format!("{key}.best_epoch"), mean_sd(&be));
            let fe: Vec<f64> = p.val_error.iter().map(|r| r[last - 1]).collect();
            s.push(format!("{key}.final_val_error"), mean_sd(&fe));
            let fd: Vec<f64> = p.distinct.iter().map(|r| r[last - 1] as f64).collect();
            s.push(format!("{key}.final_distinct"), mean_sd(&fd));
            if !p.test_auc.is_empty() {
                s.push(format!("{key}.test_auc"), mean_sd(&p.test_auc));
            }
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut curves = Table::new(
            "curves",
            &[self.parameter.as_str(), "epoch", "mean_val_error", "mean_distinct"],
        );
        let mut runs = Table::new(
            "runs",
            &[self.parameter.as_str(), "repeat", "best_epoch", "final_val_error", "final_distinct", "test_auc"],
        );
        for p in &self.points {
            for e in 1..=p.epochs() {
                curves.push(vec![
                    p.value.clone(),
                    e.to_string(),
                    p.mean_error_at(e).to_string(),
                    p.mean_distinct_at(e).to_string(),
                ]);
            }
            for (r, best) in p.best_epochs.iter().enumerate() {
                let last = p.epochs();
                runs.push(vec![
                    p.value.clone(),
                    r.to_string(),
                    best.to_string(),
                    p.val_error[r][last - 1].to_string(),
                    p.distinct[r][last - 1].to_string(),
                    p.test_auc.get(r).map_or(String::new(), |a| a.to_string()),
                ]);
            }
        }
        vec![curves, runs]
    }
}

fn sweep_grid_default() -> GridConfig {
    GridConfig::new(5, 5, Neighborhood::C9, 0.2, 20).expect("valid default grid")
}

fn sweep_learner_default() -> LearnerSpec {
    LearnerSpec::NaiveBayes {
        density: Density::Kernel,
    }
}

/// Repeats the engine for every grid variant. Repeat `r` sees the same data
/// and splits under every variant, so the comparison is paired. The default
/// data is the circle task, whose validation-error curves under kernel Naive
/// Bayes fall and then rise again as the grid concentrates on the margin.
fn sweep(
    parameter: &str,
    variants: Vec<(String, GridConfig)>,
    cfg: &Config,
    opts: &RunOptions,
    default_n: usize,
) -> Result<SweepFindings> {
    let repeats = cfg.get_or("exp.repeats", 10usize)?.max(1);
    let learner = cfg.learner(&sweep_learner_default())?;
    let test_fraction: f64 = cfg.get_or("exp.test_fraction", 0.0)?;
    let validation: f64 = cfg.get_or("exp.validation", 0.1)?;
    let mut points: Vec<SweepPoint> = variants
        .iter()
        .map(|(v, _)| SweepPoint {
            value: v.clone(),
            best_epochs: Vec::new(),
            val_error: Vec::new(),
            distinct: Vec::new(),
            test_auc: Vec::new(),
        })
        .collect();
    for r in 0..repeats {
        let data = load_data(cfg, Kind::Circle, default_n, repeat_seed(opts.seed, TAG_DATA, r))?;
        let (pool, test) = if test_fraction > 0.0 {
            let (a, b) = holdout_split(&data, test_fraction, repeat_seed(opts.seed, TAG_TEST, r))?;
            (a, Some(b))
        } else {
            (data, None)
        };
        let (train, val) = holdout_split(&pool, validation, repeat_seed(opts.seed, TAG_SPLIT, r))?;
        for ((_, grid), point) in variants.iter().zip(&mut points) {
            let res = run_psbml(&train, &val, grid, &learner, repeat_seed(opts.seed, TAG_ENGINE, r), opts.threads)?;
            point.best_epochs.push(res.best_epoch);
            point.val_error.push(res.reports.iter().map(|e| e.validation_error).collect());
            point.distinct.push(res.reports.iter().map(|e| e.distinct_count).collect());
            if let Some(test) = &test {
                let rep = MetricReport::evaluate(res.best_classifier.as_ref(), test, Default::default(), 0);
                point.test_auc.push(rep.auc_roc);
            }
        }
    }
    Ok(SweepFindings {
        parameter: parameter.to_string(),
        points,
    })
}

pub fn neighborhood_sweep(cfg: &Config, opts: &RunOptions) -> Result<SweepFindings> {
    let base = cfg.grid(&sweep_grid_default())?;
    let shapes: Vec<Neighborhood> = cfg.list_or("exp.neighborhoods", &Neighborhood::ALL)?;
    let variants = shapes
        .into_iter()
        .map(|nb| {
            let g = GridConfig::new(base.width, base.height, nb, base.pr, base.epochs)?;
            Ok((nb.to_string(), g))
        })
        .collect::<Result<Vec<_>>>()?;
    sweep("neighborhood", variants, cfg, opts, 10_000)
}

/// Default values are 0.1, 0.2, 0.4 and 0.8 (`exp.pr_values`).
pub fn pr_sweep(cfg: &Config, opts: &RunOptions) -> Result<SweepFindings> {
    let base = cfg.grid(&sweep_grid_default())?;
    let values: Vec<f64> = cfg.list_or("exp.pr_values", &[0.1, 0.2, 0.4, 0.8])?;
    let variants = values
        .into_iter()
        .map(|pr| Ok((pr.to_string(), GridConfig::new(base.width, base.height, base.neighborhood, pr, base.epochs)?)))
        .collect::<Result<Vec<_>>>()?;
    sweep("pr", variants, cfg, opts, 10_000)
}

/// Square grids of side `exp.sizes` (default 3..=7); reports held-out AUC.
pub fn gridsize_sweep(cfg: &Config, opts: &RunOptions) -> Result<SweepFindings> {
    let base = cfg.grid(&sweep_grid_default())?;
    let sizes: Vec<usize> = cfg.list_or("exp.sizes", &[3, 4, 5, 6, 7])?;
    if sizes.is_empty() {
        return Err(Error::Config("exp.sizes is empty".into()));
    }
    let variants = sizes
        .into_iter()
        .map(|s| Ok((format!("{s}x{s}"), GridConfig::new(s, s, base.neighborhood, base.pr, base.epochs)?)))
        .collect::<Result<Vec<_>>>()?;
    let cfg = if cfg.raw("exp.test_fraction").is_none() {
        cfg.clone().with("exp.test_fraction", 0.3)
    } else {
        cfg.clone()
    };
    sweep("grid", variants, &cfg, opts, 10_000)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Config {
        Config::default()
            .with("data.n", 600)
            .with("exp.repeats", 2)
            .with("grid.epochs", 4)
            .with("grid.width", 3)
            .with("grid.height", 3)
            .with("learner", "nb")
    }

    #[test]
    fn pr_sweep_shapes() {
        let f = pr_sweep(&tiny().with("exp.pr_values", "0.1,0.8"), &RunOptions::new(1, 1)).unwrap();
        assert_eq!(f.points.len(), 2);
        for p in &f.points {
            assert_eq!(p.best_epochs.len(), 2);
            assert_eq!(p.epochs(), 4);
            assert!(p.best_epochs.iter().all(|&e| (1..=4).contains(&e)));
        }
        let t = f.tables();
        assert_eq!(t[0].rows.len(), 2 * 4);
    }

    #[test]
    fn gridsize_sweep_reports_auc() {
        let f = gridsize_sweep(&tiny().with("exp.sizes", "2,3"), &RunOptions::new(2, 1)).unwrap();
        assert_eq!(f.points[0].value, "2x2");
        assert!(f.points.iter().all(|p| p.test_auc.len() == 2));
        assert!(f.points.iter().flat_map(|p| &p.test_auc).all(|a| (0.0..=1.0).contains(a)));
    }

    #[test]
    fn sweeps_are_seed_deterministic() {
        let run = || neighborhood_sweep(&tiny().with("exp.neighborhoods", "L5,C13"), &RunOptions::new(9, 1)).unwrap();
        assert_eq!(run(), run());
    }
}
