//! The verification protocols on the circle and Gaussian-pairs tasks:
//! boundary-weighted modes of a mixture fitted to the whole dataset, the
//! engine against the grid of mixtures, and weight-mass dynamics.

use nalgebra::DVector;

use super::{mean_sd, repeat_seed, Config, RunOptions, Summary, Table};
use crate::datagen::{Kind, SyntheticSpec};
use crate::dataset::{holdout_split, Dataset, Instance};
use crate::engine::PsbmlRun;
use crate::error::{Error, Result};
use crate::grid::{GridConfig, Neighborhood};
use crate::learners::LearnerSpec;
use crate::meanshift::{
    default_starts, find_all_modes, gmm_fit_em, surviving_modes, BoundaryWeight, EmInit, EmOptions, GmmGrid,
    GmmGridOptions, ModeOptions, ModeSet,
};
use crate::metrics::{axis_histogram, mean, radial_histogram, Histogram};

const TAG_DATA: u64 = 0xda7a;
const TAG_EM: u64 = 0xe3;
const TAG_STARTS: u64 = 0x57a;
const TAG_SPLIT: u64 = 0x5b1;
const TAG_ENGINE: u64 = 0xe1;

/// Per-task defaults; every field can be overridden from the config.
struct Protocol {
    n: usize,
    repeats: usize,
    components: usize,
    init: EmInit,
    restarts: usize,
    /// Width of the boundary weight for whole-data mode finding.
    sigma: f64,
    /// Width of the a-priori weight on the grid of mixtures.
    grid_sigma: f64,
    learner: LearnerSpec,
    /// Coordinate that tells the two principal modes apart.
    split_axis: usize,
    hist_lo: f64,
    hist_width: f64,
    hist_bins: usize,
}

impl Protocol {
    fn defaults(kind: Kind) -> Result<Self> {
        Ok(match kind {
            Kind::Circle => Protocol {
                n: 20_000,
                repeats: 10,
                components: 2,
                init: EmInit::Quantile { axis: 1 },
                restarts: 0,
                sigma: 0.1,
                grid_sigma: 0.4,
                learner: LearnerSpec::CircleFit,
                split_axis: 1,
                hist_lo: 0.0,
                hist_width: 0.1,
                hist_bins: 15,
            },
            Kind::GaussianPairs => Protocol {
                n: 20_000,
                repeats: 10,
                components: 10,
                init: EmInit::KMeansPlusPlus,
                restarts: 4,
                sigma: 6.0,
                grid_sigma: 8.0,
                learner: LearnerSpec::LinearThreshold { coordinate: 0 },
                split_axis: 0,
                hist_lo: 0.0,
                hist_width: 2.0,
                hist_bins: 20,
            },
            other => return Err(Error::Config(format!("no verification protocol for {other}"))),
        })
    }

    fn from_config(kind: Kind, cfg: &Config) -> Result<Self> {
        let d = Self::defaults(kind)?;
        Ok(Protocol {
            n: cfg.get_or("data.n", d.n)?,
            repeats: cfg.get_or("exp.repeats", d.repeats)?.max(1),
            components: cfg.get_or("exp.components", d.components)?,
            init: match cfg.raw("exp.init") {
                None => d.init,
                Some(s) => parse_init(s)?,
            },
            restarts: cfg.get_or("exp.restarts", d.restarts)?,
            sigma: cfg.get_or("exp.sigma", d.sigma)?,
            grid_sigma: cfg.get_or("exp.grid_sigma", d.grid_sigma)?,
            learner: cfg.learner(&d.learner)?,
            ..d
        })
    }

    fn weight(&self, kind: Kind, sigma: f64) -> Result<BoundaryWeight> {
        match kind {
            Kind::Circle => BoundaryWeight::sphere(DVector::from_column_slice(&[0.0, 0.0]), crate::datagen::CIRCLE_RADIUS, sigma),
            _ => BoundaryWeight::hyperplane(0, crate::datagen::GAUSS_BOUNDARY_X, sigma),
        }
    }

    fn histogram<'a>(&self, kind: Kind, pts: impl Iterator<Item = &'a Instance>) -> Histogram {
        let feats = pts.map(|i| i.features.as_slice());
        let h = match kind {
            Kind::Circle => radial_histogram(feats, &[0.0, 0.0], self.hist_width, self.hist_bins),
            _ => axis_histogram(feats, 0, self.hist_lo, self.hist_width, self.hist_bins),
        };
        h.normalized()
    }
}

/// `kmeans` or `quantile:<axis>`.
fn parse_init(s: &str) -> Result<EmInit> {
    match s.split_once(':') {
        None if s == "kmeans" => Ok(EmInit::KMeansPlusPlus),
        Some(("quantile", a)) => Ok(EmInit::Quantile {
            axis: a.parse().map_err(|_| Error::Config(format!("exp.init: bad axis {a:?}")))?,
        }),
        _ => Err(Error::Config(format!("exp.init: expected kmeans or quantile:<axis>, got {s:?}"))),
    }
}

#[derive(Debug, Clone)]
pub struct ModeRepeat {
    pub data_seed: u64,
    pub weighted: ModeSet,
    pub unweighted: ModeSet,
}

#[derive(Debug, Clone)]
pub struct HistogramPair {
    pub epoch: usize,
    pub engine: Histogram,
    pub gmm_grid: Histogram,
    pub tv: f64,
    /// Distinct modes across all grid nodes after merging.
    pub surviving_modes: usize,
}

#[derive(Debug, Clone)]
pub struct GridComparison {
    pub grid_sigma: f64,
    pub epochs: Vec<HistogramPair>,
}

#[derive(Debug, Clone)]
pub struct VerifyFindings {
    pub kind: Kind,
    pub split_axis: usize,
    pub sigma: f64,
    pub repeats: Vec<ModeRepeat>,
    pub comparison: Option<GridComparison>,
}

/// The two densest modes ordered by the coordinate that separates them.
pub fn principal_pair(ms: &ModeSet, axis: usize) -> Option<[DVector<f64>; 2]> {
    // modes arrive sorted by density, highest first
    let mut top: Vec<&DVector<f64>> = ms.modes.iter().take(2).map(|m| &m.point).collect();
    if top.len() < 2 {
        return None;
    }
    top.sort_by(|a, b| a[axis].total_cmp(&b[axis]));
    Some([top[0].clone(), top[1].clone()])
}

impl VerifyFindings {
    /// Per-repeat principal pairs; repeats with fewer than two modes are
    /// skipped.
    pub fn pairs(&self, weighted: bool) -> Vec<[DVector<f64>; 2]> {
        self.repeats
            .iter()
            .filter_map(|r| principal_pair(if weighted { &r.weighted } else { &r.unweighted }, self.split_axis))
            .collect()
    }

    /// Coordinate-wise mean of the principal pairs.
    pub fn mean_pair(&self, weighted: bool) -> Option<[DVector<f64>; 2]> {
        let pairs = self.pairs(weighted);
        if pairs.is_empty() {
            return None;
        }
        let k = pairs.len() as f64;
        let sum = |i: usize| pairs.iter().fold(DVector::zeros(pairs[0][i].len()), |a, p| a + &p[i]) / k;
        Some([sum(0), sum(1)])
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        s.push("task", self.kind);
        s.push("repeats", self.repeats.len());
        s.push("weight_sigma", self.sigma);
        for (label, weighted) in [("weighted", true), ("unweighted", false)] {
            let counts: Vec<f64> = self
                .repeats
                .iter()
                .map(|r| if weighted { r.weighted.len() } else { r.unweighted.len() } as f64)
                .collect();
            s.push(format!("{label}.mode_count"), mean_sd(&counts));
            let pairs = self.pairs(weighted);
            for i in 0..2 {
                for c in 0..2 {
                    let xs: Vec<f64> = pairs.iter().map(|p| p[i][c]).collect();
                    s.push(format!("{label}.mode{i}.x{c}"), mean_sd(&xs));
                }
            }
        }
        if let Some(c) = &self.comparison {
            s.push("grid_sigma", c.grid_sigma);
            for e in &c.epochs {
                s.push(format!("epoch{}.tv", e.epoch), e.tv);
                s.push(format!("epoch{}.surviving_modes", e.epoch), e.surviving_modes);
            }
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut modes = Table::new(
            "modes",
            &["repeat", "data_seed", "weighted", "rank", "x0", "x1", "basin", "gradient_norm", "density"],
        );
        for (r, rep) in self.repeats.iter().enumerate() {
            for (flag, set) in [("1", &rep.weighted), ("0", &rep.unweighted)] {
                for (rank, m) in set.modes.iter().enumerate() {
                    modes.push(vec![
                        r.to_string(),
                        rep.data_seed.to_string(),
                        flag.into(),
                        rank.to_string(),
                        m.point[0].to_string(),
                        m.point[1].to_string(),
                        m.basin.to_string(),
                        m.gradient_norm.to_string(),
                        m.density.to_string(),
                    ]);
                }
            }
        }
        let mut out = vec![modes];
        if let Some(c) = &self.comparison {
            let mut h = Table::new("histograms", &["epoch", "bin_lo", "bin_hi", "engine", "gmm_grid"]);
            for e in &c.epochs {
                for b in 0..e.engine.bins() {
                    h.push(vec![
                        e.epoch.to_string(),
                        e.engine.edges[b].to_string(),
                        e.engine.edges[b + 1].to_string(),
                        e.engine.masses[b].to_string(),
                        e.gmm_grid.masses[b].to_string(),
                    ]);
                }
            }
            out.push(h);
        }
        out
    }
}

/// Whole-data mode finding, repeated on fresh samples: a mixture is fitted
/// to the unweighted data and the modes of `w(x) p(x)` and of `p(x)` are
/// located from the component means plus random data points.
pub fn verify_modes(kind: Kind, cfg: &Config, seed: u64) -> Result<Vec<ModeRepeat>> {
    let p = Protocol::from_config(kind, cfg)?;
    let bw = p.weight(kind, p.sigma)?;
    let extra = cfg.get_or("exp.extra_starts", 10usize)?;
    let mode_opts = ModeOptions {
        delta: cfg.get_or("exp.delta", ModeOptions::default().delta)?,
        ..ModeOptions::default()
    };
    (0..p.repeats)
        .map(|r| {
            let data_seed = repeat_seed(seed, TAG_DATA, r);
            let d = SyntheticSpec::new(kind, p.n, data_seed).generate()?;
            let pts: Vec<DVector<f64>> = d
                .instances()
                .iter()
                .map(|i| DVector::from_column_slice(&i.features))
                .collect();
            let mut em = EmOptions::new(p.components, repeat_seed(seed, TAG_EM, r));
            em.init = p.init.clone();
            em.restarts = p.restarts;
            let fit = gmm_fit_em(&pts, None, &em)?;
            let starts = default_starts(&fit.mixture, &pts, extra, repeat_seed(seed, TAG_STARTS, r));
            Ok(ModeRepeat {
                data_seed,
                weighted: find_all_modes(&fit.mixture, Some(&bw), &starts, mode_opts)?,
                unweighted: find_all_modes(&fit.mixture, None, &starts, mode_opts)?,
            })
        })
        .collect()
}

fn engine_grid_default() -> GridConfig {
    GridConfig::new(5, 5, Neighborhood::C9, 0.2, 50).expect("valid default grid")
}

/// Runs the engine and the grid of mixtures from the same initial grid and
/// compares their populations at the recorded epochs.
pub fn compare_grids(kind: Kind, cfg: &Config, seed: u64, threads: usize) -> Result<GridComparison> {
    let p = Protocol::from_config(kind, cfg)?;
    let grid = cfg.grid(&engine_grid_default())?;
    let mut record: Vec<usize> = cfg.list_or("exp.record_epochs", &[25, 50])?;
    record.retain(|&e| e >= 1 && e <= grid.epochs);
    let data = SyntheticSpec::new(kind, p.n, repeat_seed(seed, TAG_DATA, 0)).generate()?;
    let (train, val) = holdout_split(&data, cfg.get_or("exp.validation", 0.1)?, repeat_seed(seed, TAG_SPLIT, 0))?;
    // one seed for both so the initial partition is shared
    let grid_seed = repeat_seed(seed, TAG_ENGINE, 0);

    let mut engine_hist = Vec::new();
    let mut run = PsbmlRun::new(&train, &val, &grid, &p.learner, grid_seed)?.with_threads(threads);
    while !run.is_done() {
        run.step()?;
        if record.contains(&run.epoch()) {
            engine_hist.push(p.histogram(kind, run.population()));
        }
    }

    let bw = p.weight(kind, p.grid_sigma)?;
    let opts = GmmGridOptions {
        components: cfg.get_or("exp.grid_components", GmmGridOptions::default().components)?,
        ..GmmGridOptions::default()
    };
    let mut gg = GmmGrid::new(&train, &grid, &bw, opts, grid_seed)?.with_threads(threads);
    let mut epochs = Vec::new();
    for e in 1..=grid.epochs {
        let rec = record.contains(&e);
        let modes = gg.step_with(rec)?;
        if rec {
            let h = p.histogram(kind, gg.population());
            let engine = engine_hist[epochs.len()].clone();
            epochs.push(HistogramPair {
                epoch: e,
                tv: h.total_variation(&engine)?,
                engine,
                gmm_grid: h,
                surviving_modes: surviving_modes(&modes, cfg.get_or("exp.delta", ModeOptions::default().delta)?),
            });
        }
    }
    Ok(GridComparison {
        grid_sigma: p.grid_sigma,
        epochs,
    })
}

pub(super) fn run(kind: Kind, cfg: &Config, opts: &RunOptions) -> Result<VerifyFindings> {
    let p = Protocol::from_config(kind, cfg)?;
    let repeats = verify_modes(kind, cfg, opts.seed)?;
    let comparison = if cfg.get_or("exp.compare", true)? {
        Some(compare_grids(kind, cfg, opts.seed, opts.threads)?)
    } else {
        None
    };
    Ok(VerifyFindings {
        kind,
        split_axis: p.split_axis,
        sigma: p.sigma,
        repeats,
        comparison,
    })
}

/// Weight mass by distance from the circle centre, per epoch, averaged over
/// repeats. Each grid copy of an instance contributes its resampling weight
/// (`exp.mass=copies`, the default); `exp.mass=weight` counts every distinct
/// instance once instead.
#[derive(Debug, Clone)]
pub struct WeightDynamics {
    pub edges: Vec<f64>,
    /// `mass[epoch - 1][bin]`
    pub mass: Vec<Vec<f64>>,
    pub near_band: (f64, f64),
    pub far_band: (f64, f64),
    pub near: Vec<f64>,
    pub far: Vec<f64>,
    pub per_copy: bool,
    pub repeats: usize,
}

/// Centred three-point moving average; the end points average the two
/// values available.
pub fn smooth3(xs: &[f64]) -> Vec<f64> {
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(xs.len() - 1);
            mean(&xs[lo..=hi])
        })
        .collect()
}

impl WeightDynamics {
    pub fn near_smoothed(&self) -> Vec<f64> {
        smooth3(&self.near)
    }

    pub fn far_smoothed(&self) -> Vec<f64> {
        smooth3(&self.far)
    }

    /// Whether the smoothed near-band mass never drops between the two
    /// 1-based epochs.
    pub fn near_non_decreasing(&self, from: usize, to: usize) -> bool {
        let s = self.near_smoothed();
        s[from - 1..to].windows(2).all(|w| w[1] >= w[0])
    }

    /// Smoothed far-band mass at `to` relative to `from`.
    pub fn far_ratio(&self, from: usize, to: usize) -> f64 {
        let s = self.far_smoothed();
        s[to - 1] / s[from - 1]
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        let last = self.mass.len();
        s.push("repeats", self.repeats);
        s.push("epochs", last);
        s.push("mass", if self.per_copy { "copies" } else { "weight" });
        s.push("near_band", format!("[{},{})", self.near_band.0, self.near_band.1));
        s.push("far_band", format!("[{},{})", self.far_band.0, self.far_band.1));
        if last >= 5 {
            s.push("near_non_decreasing_5_to_last", self.near_non_decreasing(5, last));
            s.push("far_ratio_last_over_5", self.far_ratio(5, last));
        }
        s
    }

    pub fn tables(&self) -> Vec<Table> {
        let mut w = Table::new("weights", &["epoch", "bin_lo", "bin_hi", "mass"]);
        for (e, row) in self.mass.iter().enumerate() {
            for (b, m) in row.iter().enumerate() {
                w.push(vec![
                    (e + 1).to_string(),
                    self.edges[b].to_string(),
                    self.edges[b + 1].to_string(),
                    m.to_string(),
                ]);
            }
        }
        let mut bands = Table::new("bands", &["epoch", "near", "far", "near_smoothed", "far_smoothed"]);
        let (ns, fs) = (self.near_smoothed(), self.far_smoothed());
        for e in 0..self.near.len() {
            bands.push(vec![
                (e + 1).to_string(),
                self.near[e].to_string(),
                self.far[e].to_string(),
                ns[e].to_string(),
                fs[e].to_string(),
            ]);
        }
        vec![w, bands]
    }
}

pub fn weights_dynamics(cfg: &Config, opts: &RunOptions) -> Result<WeightDynamics> {
    let n = cfg.get_or("data.n", 20_000usize)?;
    let repeats = cfg.get_or("exp.repeats", 10usize)?.max(1);
    let grid = cfg.grid(&engine_grid_default())?;
    let learner = cfg.learner(&LearnerSpec::CircleFit)?;
    let near = cfg.list_or("exp.near_band", &[0.3, 0.5])?;
    let far = cfg.list_or("exp.far_band", &[0.7, 1.0])?;
    let (width, bins) = (cfg.get_or("exp.bin_width", 0.1)?, cfg.get_or("exp.bins", 15usize)?);
    if near.len() != 2 || far.len() != 2 {
        return Err(Error::Config("bands take two values, lo,hi".into()));
    }
    let per_copy = match cfg.raw("exp.mass").unwrap_or("copies") {
        "weight" => false,
        "copies" => true,
        other => return Err(Error::Config(format!("exp.mass must be weight or copies, got {other:?}"))),
    };
    let mut total = vec![Histogram::empty(0.0, width, bins); grid.epochs];
    for r in 0..repeats {
        let d: Dataset = SyntheticSpec::new(Kind::Circle, n, repeat_seed(opts.seed, TAG_DATA, r)).generate()?;
        let (train, val) = holdout_split(&d, cfg.get_or("exp.validation", 0.1)?, repeat_seed(opts.seed, TAG_SPLIT, r))?;
        let mut run = PsbmlRun::new(&train, &val, &grid, &learner, repeat_seed(opts.seed, TAG_ENGINE, r))?
            .with_threads(opts.threads);
        while !run.is_done() {
            run.step()?;
            let rec = run.last_record().expect("a step has run");
            let h = &mut total[run.epoch() - 1];
            for (pos, inst) in run.corpus().instances().iter().enumerate() {
                let copies = rec.multiplicity()[pos];
                if copies > 0 {
                    let k = if per_copy { f64::from(copies) } else { 1.0 };
                    h.add(inst.features[0].hypot(inst.features[1]), rec.weight(pos) * k);
                }
            }
        }
    }
    let k = repeats as f64;
    let mass: Vec<Vec<f64>> = total.iter().map(|h| h.masses.iter().map(|m| m / k).collect()).collect();
    let band = |h: &Histogram, b: &[f64]| h.mass_between(b[0], b[1]) / k;
    Ok(WeightDynamics {
        edges: total[0].edges.clone(),
        near: total.iter().map(|h| band(h, &near)).collect(),
        far: total.iter().map(|h| band(h, &far)).collect(),
        near_band: (near[0], near[1]),
        far_band: (far[0], far[1]),
        per_copy,
        mass,
        repeats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothing_keeps_length_and_constants() {
        assert_eq!(smooth3(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(smooth3(&[0.0, 3.0, 6.0]), vec![1.5, 3.0, 4.5]);
        assert_eq!(smooth3(&[1.0]), vec![1.0]);
    }

    #[test]
    fn init_parsing() {
        assert_eq!(parse_init("kmeans").unwrap(), EmInit::KMeansPlusPlus);
        assert_eq!(parse_init("quantile:1").unwrap(), EmInit::Quantile { axis: 1 });
        assert!(parse_init("random").is_err());
    }

    #[test]
    fn small_circle_run_finds_two_weighted_modes() {
        let cfg = Config::default().with("data.n", 10_000).with("exp.repeats", 2);
        let reps = verify_modes(Kind::Circle, &cfg, 5).unwrap();
        assert_eq!(reps.len(), 2);
        for r in &reps {
            assert_eq!(r.weighted.len(), 2);
            let [lo, hi] = principal_pair(&r.weighted, 1).unwrap();
            assert!(lo[1] < 0.0 && hi[1] > 0.0);
        }
    }

    #[test]
    fn weight_dynamics_bands_are_consistent() {
        let cfg = Config::default()
            .with("data.n", 2000)
            .with("exp.repeats", 1)
            .with("grid.width", 3)
            .with("grid.height", 3)
            .with("grid.epochs", 6);
        let w = weights_dynamics(&cfg, &RunOptions::new(3, 1)).unwrap();
        assert_eq!(w.mass.len(), 6);
        for (e, row) in w.mass.iter().enumerate() {
            let band: f64 = row[3..5].iter().sum();
            assert!((band - w.near[e]).abs() < 1e-9);
        }
    }
}
