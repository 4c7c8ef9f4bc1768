//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Three operations are exposed: stepping a grid run on the circle task,
//! locating weighted and unweighted mixture modes, and drawing a
//! neighbourhood on a toroidal grid. Everything crosses the boundary as flat
//! `f64`/`u8` arrays so the page needs no glue beyond the generated module.

use psbml::datagen::{Kind, SyntheticSpec};
use psbml::dataset::{holdout_split, Dataset};
use psbml::engine::PsbmlRun;
use psbml::experiments::{verify_modes, Config};
use psbml::grid::{neighbors, GridConfig, Neighborhood, NodeId};
use psbml::learners::LearnerSpec;
use psbml::meanshift::ModeSet;
use wasm_bindgen::prelude::*;

fn js_err(e: psbml::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn parse<T: std::str::FromStr<Err = psbml::Error>>(s: &str) -> Result<T, JsValue> {
    s.parse().map_err(js_err)
}

/// A grid run on the circle task, advanced one epoch at a time.
#[wasm_bindgen]
pub struct CircleRun {
    run: PsbmlRun,
}

#[wasm_bindgen]
impl CircleRun {
    #[wasm_bindgen(constructor)]
    pub fn new(
        n: usize,
        seed: u64,
        side: usize,
        neighborhood: &str,
        pr: f64,
        epochs: usize,
    ) -> Result<CircleRun, JsValue> {
        let data = SyntheticSpec::new(Kind::Circle, n, seed).generate().map_err(js_err)?;
        let (train, val) = holdout_split(&data, 0.1, seed).map_err(js_err)?;
        let cfg = GridConfig::new(side, side, parse(neighborhood)?, pr, epochs).map_err(js_err)?;
        let run = PsbmlRun::new(&train, &val, &cfg, &LearnerSpec::CircleFit, seed).map_err(js_err)?;
        Ok(CircleRun { run })
    }

    pub fn epoch(&self) -> usize {
        self.run.epoch()
    }

    pub fn done(&self) -> bool {
        self.run.is_done()
    }

    /// Runs one epoch and returns `[epoch, validation_error, distinct_count, cs_min, cs_max]`.
    pub fn step(&mut self) -> Result<Vec<f64>, JsValue> {
        let r = self.run.step().map_err(js_err)?;
        Ok(vec![
            r.epoch as f64,
            r.validation_error,
            r.distinct_count as f64,
            r.cs_min,
            r.cs_max,
        ])
    }

    /// Current population as `x, y, label` triples, duplicates included.
    pub fn population(&self) -> Vec<f64> {
        self.run
            .population()
            .flat_map(|i| [i.features[0], i.features[1], i.label as f64])
            .collect()
    }

    /// Latest distribution of sampling weights, ten bins on [0,1].
    pub fn weight_histogram(&self) -> Vec<f64> {
        self.run
            .last_record()
            .map_or_else(Vec::new, |r| r.weight_histogram().masses)
    }
}

fn flat_modes(ms: &ModeSet) -> Vec<f64> {
    ms.modes.iter().flat_map(|m| m.point.iter().copied()).collect()
}

/// Modes found on one freshly drawn dataset.
#[wasm_bindgen]
pub struct ModeView {
    data: Dataset,
    weighted: Vec<f64>,
    unweighted: Vec<f64>,
    unconverged: usize,
}

#[wasm_bindgen]
impl ModeView {
    /// `x, y, label` triples of the sample the mixture was fitted to.
    pub fn points(&self) -> Vec<f64> {
        self.data
            .instances()
            .iter()
            .flat_map(|i| [i.features[0], i.features[1], i.label as f64])
            .collect()
    }

    /// Modes of w·p as `x, y` pairs, densest first.
    pub fn weighted(&self) -> Vec<f64> {
        self.weighted.clone()
    }

    /// Modes of the unweighted mixture as `x, y` pairs.
    pub fn unweighted(&self) -> Vec<f64> {
        self.unweighted.clone()
    }

    /// Starts of the weighted search that hit the iteration cap and were dropped.
    pub fn unconverged(&self) -> usize {
        self.unconverged
    }
}

/// Fits a mixture of `components` Gaussians to a `kind` sample ("circle" or
/// "gauss") and seeks modes with and without boundary weighting of width
/// `sigma`.
#[wasm_bindgen]
pub fn find_modes(kind: &str, n: usize, components: usize, sigma: f64, seed: u64) -> Result<ModeView, JsValue> {
    let kind: Kind = parse(kind)?;
    let cfg = Config::default()
        .with("data.n", n)
        .with("exp.repeats", 1)
        .with("exp.components", components)
        .with("exp.sigma", sigma);
    let rep = verify_modes(kind, &cfg, seed).map_err(js_err)?.remove(0);
    let data = SyntheticSpec::new(kind, n, rep.data_seed).generate().map_err(js_err)?;
    Ok(ModeView {
        data,
        weighted: flat_modes(&rep.weighted),
        unweighted: flat_modes(&rep.unweighted),
        unconverged: rep.weighted.unconverged,
    })
}

/// Row-major `height × width` mask: 2 for the node itself, 1 for its other
/// neighbours, 0 elsewhere.
#[wasm_bindgen]
pub fn neighborhood_mask(neighborhood: &str, width: usize, height: usize, row: usize, col: usize) -> Result<Vec<u8>, JsValue> {
    let nb: Neighborhood = parse(neighborhood)?;
    let cfg = GridConfig::new(width, height, nb, 0.0, 1).map_err(js_err)?;
    let node = NodeId::new(row % height.max(1), col % width.max(1));
    let mut mask = vec![0u8; width * height];
    for m in neighbors(&cfg, node) {
        mask[cfg.index(m)] = 1;
    }
    mask[cfg.index(node)] = 2;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_marks_self_and_wraps() {
        let m = neighborhood_mask("C9", 5, 5, 0, 0).unwrap();
        assert_eq!(m.iter().filter(|&&v| v > 0).count(), 9);
        assert_eq!(m[0], 2);
        assert_eq!(m[24], 1);
    }

    #[test]
    fn circle_run_steps_to_completion() {
        let mut run = CircleRun::new(600, 3, 3, "L5", 0.2, 3).unwrap();
        while !run.done() {
            let r = run.step().unwrap();
            assert!((0.0..=1.0).contains(&r[1]));
        }
        assert_eq!(run.epoch(), 3);
        assert_eq!(run.population().len() % 3, 0);
        assert_eq!(run.weight_histogram().len(), 10);
    }

    #[test]
    fn circle_modes_sit_near_the_boundary() {
        let v = find_modes("circle", 10_000, 2, 0.1, 1).unwrap();
        let w = v.weighted();
        assert!(w.len() >= 4);
        assert!(w.chunks(2).take(2).all(|p| (p[0].hypot(p[1]) - 0.4).abs() < 0.1));
    }
}
