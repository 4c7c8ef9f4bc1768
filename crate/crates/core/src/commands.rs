//! The file-level operations behind the `psbml` subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::datagen::{Kind, SyntheticSpec};
use crate::dataset::{holdout_split, load_csv, normalize_unit_range, write_metadata, Dataset, LabelColumn};
use crate::engine::{run_psbml_with, PsbmlResult};
use crate::error::{Error, Result};
use crate::experiments::Config;
use crate::grid::GridConfig;
use crate::learners::{Density, LearnerSpec};
use crate::meanshift::{default_starts, find_all_modes, gmm_fit_em, BoundaryWeight, EmInit, EmOptions, ModeOptions, ModeSet};
use crate::metrics::Histogram;
use crate::rng;

const TAG_SPLIT: u64 = 0x5b1;
const TAG_EM: u64 = 0xe3;
const TAG_STARTS: u64 = 0x57a;

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub label: LabelColumn,
    pub config: Config,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

/// Trains on a CSV file and writes `epochs.csv`, `weights_epoch<k>.csv` for
/// every epoch, `model.txt` and `margin.csv` (the pocket epoch's pooled
/// training data). `exp.validation` (default 0.1) is held out for the
/// pocket; `data.normalize=true` rescales features to [0,1] first.
pub fn train(args: &TrainArgs) -> Result<(PsbmlResult, Vec<PathBuf>)> {
    let cfg = &args.config;
    let mut data = load_csv(&args.data, &args.label)?;
    if cfg.get_or("data.normalize", false)? {
        data = normalize_unit_range(&data);
    }
    let grid = cfg.grid(&GridConfig::default())?;
    let learner = cfg.learner(&LearnerSpec::NaiveBayes {
        density: Density::Gaussian,
    })?;
    let validation = cfg.get_or("exp.validation", 0.1)?;
    let (train, val) = holdout_split(&data, validation, rng::derive_seed(args.seed, &[TAG_SPLIT]))?;
    ensure_dir(&args.out)?;

    let mut files = Vec::new();
    let mut io_err = None;
    let res = run_psbml_with(&train, &val, &grid, &learner, args.seed, args.threads, |run| {
        let report = run.reports().last().expect("observer runs after a step");
        let path = args.out.join(format!("weights_epoch{}.csv", report.epoch));
        match write(path, &weight_csv(&report.weight_histogram)) {
            Ok(p) => files.push(p),
            Err(e) => io_err = io_err.take().or(Some(e)),
        }
    })?;
    if let Some(e) = io_err {
        return Err(e);
    }
    files.push(write(args.out.join("epochs.csv"), &crate::experiments::epochs_csv(&res))?);

    let mut model = String::new();
    model.push_str(&learner.manifest());
    model.push_str(&format!(
        "grid.width={}\ngrid.height={}\ngrid.neighborhood={}\ngrid.pr={}\ngrid.epochs={}\n",
        grid.width, grid.height, grid.neighborhood, grid.pr, grid.epochs
    ));
    model.push_str(&format!("seed={}\nbest_epoch={}\nbest_val_error={}\n", args.seed, res.best_epoch, res.best_validation_error()));
    model.push_str(&res.best_classifier.manifest());
    files.push(write(args.out.join("model.txt"), &model)?);
    let margin = args.out.join("margin.csv");
    res.margin_data.write_csv(&margin)?;
    files.push(margin);
    Ok((res, files))
}

fn weight_csv(h: &Histogram) -> String {
    let mut s = String::from("bin,bin_lo,bin_hi,mass\n");
    for b in 0..h.bins() {
        s.push_str(&format!("{b},{},{},{}\n", h.edges[b], h.edges[b + 1], h.masses[b]));
    }
    s
}

#[derive(Debug, Clone)]
pub struct ModeshiftArgs {
    pub data: PathBuf,
    pub label: LabelColumn,
    /// Boundary weight spec, see [`BoundaryWeight::parse`].
    pub weights: String,
    pub components: usize,
    pub seed: u64,
    /// Quantile initialisation along this axis instead of k-means++.
    pub quantile_axis: Option<usize>,
    pub restarts: usize,
    pub extra_starts: usize,
    /// Fit the mixture to w-weighted points and seek modes of the fit,
    /// instead of fitting unweighted data and seeking modes of w·p.
    pub weighted_fit: bool,
    pub bins: usize,
    pub out: PathBuf,
}

impl ModeshiftArgs {
    pub fn new(data: impl Into<PathBuf>, weights: &str, components: usize, seed: u64, out: impl Into<PathBuf>) -> Self {
        ModeshiftArgs {
            data: data.into(),
            label: LabelColumn::Last,
            weights: weights.to_string(),
            components,
            seed,
            quantile_axis: None,
            restarts: 0,
            extra_starts: 10,
            weighted_fit: false,
            bins: 20,
            out: out.into(),
        }
    }
}

/// Fits a mixture to the feature vectors of a CSV file and writes its
/// (weighted) modes to `modes.csv` and the weighted distribution of the data
/// along the boundary's signed distance to `histogram.csv`. Without a
/// boundary the histogram is over the distance to the densest mode.
pub fn modeshift(args: &ModeshiftArgs) -> Result<(ModeSet, Vec<PathBuf>)> {
    let data = load_csv(&args.data, &args.label)?;
    let bw = BoundaryWeight::parse(&args.weights)?;
    let pts: Vec<DVector<f64>> = data
        .instances()
        .iter()
        .map(|i| DVector::from_column_slice(&i.features))
        .collect();
    let w: Vec<f64> = pts.iter().map(|p| bw.as_ref().map_or(1.0, |b| b.value(p))).collect();
    let mut em = EmOptions::new(args.components, rng::derive_seed(args.seed, &[TAG_EM]));
    em.restarts = args.restarts;
    if let Some(axis) = args.quantile_axis {
        em.init = EmInit::Quantile { axis };
    }
    let fit = gmm_fit_em(&pts, args.weighted_fit.then_some(w.as_slice()), &em)?;
    let starts = default_starts(&fit.mixture, &pts, args.extra_starts, rng::derive_seed(args.seed, &[TAG_STARTS]));
    let seek = if args.weighted_fit { None } else { bw.as_ref() };
    let modes = find_all_modes(&fit.mixture, seek, &starts, ModeOptions::default())?;

    let coord = |p: &DVector<f64>| match bw.as_ref().and_then(|b| b.signed_distance(p)) {
        Some(d) => d,
        None => modes.modes.first().map_or(0.0, |m| (p - &m.point).norm()),
    };
    let vals: Vec<f64> = pts.iter().map(coord).collect();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / args.bins as f64 } else { 1.0 };
    let mut h = Histogram::empty(lo, width, args.bins.max(1));
    for (v, wi) in vals.iter().zip(&w) {
        h.add(*v, *wi);
    }

    ensure_dir(&args.out)?;
    let files = vec![
        write(args.out.join("modes.csv"), &modes.to_csv())?,
        write(args.out.join("histogram.csv"), &h.normalized().to_csv())?,
    ];
    Ok((modes, files))
}

/// Writes a synthetic dataset and its `<out>.meta` sidecar.
pub fn generate(kind: Kind, n: usize, seed: u64, out: &Path) -> Result<Dataset> {
    let spec = SyntheticSpec::new(kind, n, seed);
    let d = spec.generate()?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    d.write_csv(out)?;
    let mut meta: BTreeMap<String, String> = spec.metadata();
    meta.insert("format".into(), "id,x0..,label".into());
    let mut side = out.as_os_str().to_owned();
    side.push(".meta");
    write_metadata(PathBuf::from(side), &meta)?;
    Ok(d)
}
