//! Seeded generators for the four synthetic tasks. Class 0 is the negative
//! class throughout.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::dataset::{Dataset, Instance};
use crate::error::{Error, Result};
use crate::rng;

pub const CIRCLE_RADIUS: f64 = 0.4;
pub const GAUSS_BOUNDARY_X: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Circle,
    GaussianPairs,
    Sine,
    Checkerboard,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Circle, Kind::GaussianPairs, Kind::Sine, Kind::Checkerboard];
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Circle => "circle",
            Kind::GaussianPairs => "gauss",
            Kind::Sine => "sine",
            Kind::Checkerboard => "checker",
        })
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(Kind::Circle),
            "gauss" | "gaussian_pairs" | "gaussian-pairs" => Ok(Kind::GaussianPairs),
            "sine" => Ok(Kind::Sine),
            "checker" | "checkerboard" => Ok(Kind::Checkerboard),
            _ => Err(Error::Config(format!("unknown dataset kind {s:?}"))),
        }
    }
}

/// Generator parameters. Fields that do not apply to a kind are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: Kind,
    pub n: usize,
    pub seed: u64,
    pub circle_radius: f64,
    /// Sample x2 from [0,2] instead of [-2,2] for the sine task.
    pub sine_upper_half: bool,
    pub checker_cells: usize,
    pub checker_angle_deg: f64,
}

impl SyntheticSpec {
    pub fn new(kind: Kind, n: usize, seed: u64) -> Self {
        SyntheticSpec {
            kind,
            n,
            seed,
            circle_radius: CIRCLE_RADIUS,
            sine_upper_half: false,
            checker_cells: 4,
            checker_angle_deg: 45.0,
        }
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.kind {
            Kind::Circle => gen_circle_with_radius(self.n, self.seed, self.circle_radius),
            Kind::GaussianPairs => gen_gaussian_pairs(self.n, self.seed),
            Kind::Sine => gen_sine_range(self.n, self.seed, self.sine_upper_half),
            Kind::Checkerboard => gen_checkerboard(self.n, self.seed, self.checker_cells, self.checker_angle_deg),
        }
    }

    /// Every parameter that shaped the data, for the sidecar file.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("kind".into(), self.kind.to_string());
        m.insert("n".into(), self.n.to_string());
        m.insert("seed".into(), self.seed.to_string());
        match self.kind {
            Kind::Circle => {
                m.insert("radius".into(), self.circle_radius.to_string());
                m.insert("box".into(), "[-1,1]x[-1,1]".into());
            }
            Kind::GaussianPairs => {
                for (i, c) in GAUSS_COMPONENTS.iter().enumerate() {
                    m.insert(
                        format!("component{i}"),
                        format!(
                            "class={} mean=({},{}) var=({},{})",
                            c.label, c.mean[0], c.mean[1], c.var[0], c.var[1]
                        ),
                    );
                }
                m.insert("boundary".into(), format!("x={GAUSS_BOUNDARY_X}"));
            }
            Kind::Sine => {
                m.insert("x1_range".into(), "[0,6.28]".into());
                let x2 = if self.sine_upper_half { "[0,2]" } else { "[-2,2]" };
                m.insert("x2_range".into(), x2.into());
                m.insert("boundary".into(), "x2 = 2 sin(2 pi x1)".into());
            }
            Kind::Checkerboard => {
                m.insert("cells".into(), self.checker_cells.to_string());
                m.insert("angle_deg".into(), self.checker_angle_deg.to_string());
            }
        }
        m
    }
}

fn require_n(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidArgument(format!("need at least {min} instances, got {n}")));
    }
    Ok(())
}

fn two_class(inst: Vec<Instance>) -> Result<Dataset> {
    Dataset::with_class_names(inst, vec!["neg".into(), "pos".into()])
}

pub fn circle_label(x: &[f64], radius: f64) -> usize {
    usize::from(x[0].hypot(x[1]) >= radius)
}

pub fn gen_circle(n: usize, seed: u64) -> Result<Dataset> {
    gen_circle_with_radius(n, seed, CIRCLE_RADIUS)
}

fn gen_circle_with_radius(n: usize, seed: u64, radius: f64) -> Result<Dataset> {
    require_n(n, 2)?;
    let mut r = rng::from_seed(seed);
    let inst = (0..n)
        .map(|i| {
            let x = vec![r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0)];
            let y = circle_label(&x, radius);
            Instance::new(i, x, y)
        })
        .collect();
    two_class(inst)
}

pub struct GaussComponent {
    pub label: usize,
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

const ISO: [f64; 2] = [1.0, 1.0];
const LONG: [f64; 2] = [2.0, 0.5];

/// Five components per class; the first of each class borders x = 20.
pub const GAUSS_COMPONENTS: [GaussComponent; 10] = [
    GaussComponent { label: 0, mean: [14.0, 8.0], var: ISO },
    GaussComponent { label: 0, mean: [6.0, 4.0], var: ISO },
    GaussComponent { label: 0, mean: [6.0, 12.0], var: LONG },
    GaussComponent { label: 0, mean: [10.0, 4.0], var: LONG },
    GaussComponent { label: 0, mean: [10.0, 12.0], var: ISO },
    GaussComponent { label: 1, mean: [24.0, 8.0], var: ISO },
    GaussComponent { label: 1, mean: [28.0, 4.0], var: LONG },
    GaussComponent { label: 1, mean: [28.0, 12.0], var: ISO },
    GaussComponent { label: 1, mean: [32.0, 4.0], var: ISO },
    GaussComponent { label: 1, mean: [32.0, 12.0], var: LONG },
];

/// Equal-count draws from the ten components; any remainder goes to the
/// first components. Instances are interleaved across components.
pub fn gen_gaussian_pairs(n: usize, seed: u64) -> Result<Dataset> {
    require_n(n, GAUSS_COMPONENTS.len())?;
    let mut r = rng::from_seed(seed);
    let k = GAUSS_COMPONENTS.len();
    let inst = (0..n)
        .map(|i| {
            let c = &GAUSS_COMPONENTS[i % k];
            let x = (0..2)
                .map(|a| {
                    Normal::new(c.mean[a], c.var[a].sqrt())
                        .expect("positive variance")
                        .sample(&mut r)
                })
                .collect();
            Instance::new(i, x, c.label)
        })
        .collect();
    two_class(inst)
}

pub fn sine_label(x: &[f64]) -> usize {
    usize::from(x[1] > 2.0 * (TAU * x[0]).sin())
}

pub fn gen_sine(n: usize, seed: u64) -> Result<Dataset> {
    gen_sine_range(n, seed, false)
}

pub fn gen_sine_range(n: usize, seed: u64, upper_half: bool) -> Result<Dataset> {
    require_n(n, 2)?;
    let mut r = rng::from_seed(seed);
    let lo = if upper_half { 0.0 } else { -2.0 };
    let inst = (0..n)
        .map(|i| {
            let x = vec![r.random_range(0.0..=6.28), r.random_range(lo..=2.0)];
            let y = sine_label(&x);
            Instance::new(i, x, y)
        })
        .collect();
    two_class(inst)
}

/// Parity of the cell holding `x` after rotating by `angle_deg` about the
/// centre of the unit square.
pub fn checker_label(x: &[f64], cells: usize, angle_deg: f64) -> usize {
    let (s, c) = (angle_deg * PI / 180.0).sin_cos();
    let (dx, dy) = (x[0] - 0.5, x[1] - 0.5);
    let below_one = 1.0 - f64::EPSILON;
    let u = (0.5 + c * dx - s * dy).clamp(0.0, below_one);
    let v = (0.5 + s * dx + c * dy).clamp(0.0, below_one);
    let k = cells as f64;
    ((u * k).floor() as usize + (v * k).floor() as usize) % 2
}

pub fn gen_checkerboard(n: usize, seed: u64, cells: usize, angle_deg: f64) -> Result<Dataset> {
    require_n(n, 2)?;
    if cells == 0 {
        return Err(Error::InvalidArgument("checkerboard needs at least one cell".into()));
    }
    let mut r = rng::from_seed(seed);
    let inst = (0..n)
        .map(|i| {
            let x = vec![r.random_range(0.0..1.0), r.random_range(0.0..1.0)];
            let y = checker_label(&x, cells, angle_deg);
            Instance::new(i, x, y)
        })
        .collect();
    two_class(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_labels() {
        assert_eq!(circle_label(&[0.0, 0.0], 0.4), 0);
        assert_eq!(circle_label(&[1.0, 1.0], 0.4), 1);
        assert_eq!(circle_label(&[0.39, 0.0], 0.4), 0);
        assert_eq!(circle_label(&[0.4, 0.0], 0.4), 1);
    }

    #[test]
    fn circle_negative_fraction_matches_area() {
        let d = gen_circle(100_000, 1).unwrap();
        let neg = d.class_counts()[0] as f64 / d.len() as f64;
        assert!((neg - PI * 0.16 / 4.0).abs() < 0.01, "{neg}");
    }

    #[test]
    fn gauss_components() {
        let d = gen_gaussian_pairs(10_000, 2).unwrap();
        let mut counts = [0usize; 10];
        let mut sums = [[0.0; 2]; 10];
        for (i, x) in d.instances().iter().enumerate() {
            counts[i % 10] += 1;
            sums[i % 10][0] += x.features[0];
            sums[i % 10][1] += x.features[1];
        }
        assert!(counts.iter().all(|c| *c == 1000));
        for (k, c) in GAUSS_COMPONENTS.iter().enumerate() {
            let mx = sums[k][0] / 1000.0;
            if c.label == 0 {
                assert!(mx < GAUSS_BOUNDARY_X);
            } else {
                assert!(mx > GAUSS_BOUNDARY_X);
            }
        }
        assert_eq!(GAUSS_COMPONENTS[0].mean, [14.0, 8.0]);
        assert_eq!(GAUSS_COMPONENTS[5].mean, [24.0, 8.0]);
    }

    #[test]
    fn sine_labels() {
        assert_eq!(sine_label(&[0.25, 2.0]), 0);
        assert_eq!(sine_label(&[0.0, 1.0]), 1);
        assert_eq!(sine_label(&[0.75, 0.0]), 1);
    }

    #[test]
    fn checker_parity() {
        assert_eq!(checker_label(&[0.1, 0.1], 4, 0.0), 0);
        assert_eq!(checker_label(&[0.1, 0.3], 4, 0.0), 1);
        for i in 0..4 {
            for j in 0..3 {
                let a = [0.125 + 0.25 * i as f64, 0.125 + 0.25 * j as f64];
                let b = [a[0], a[1] + 0.25];
                let c = [a[1], a[0]];
                let e = [c[0] + 0.25, c[1]];
                assert_ne!(checker_label(&a, 4, 0.0), checker_label(&b, 4, 0.0));
                assert_ne!(checker_label(&c, 4, 0.0), checker_label(&e, 4, 0.0));
            }
        }
    }

    #[test]
    fn checker_balance() {
        let d = gen_checkerboard(100_000, 3, 4, 45.0).unwrap();
        let pos = d.class_counts()[1] as f64 / d.len() as f64;
        // the oracle here is a fine midpoint grid over the same construction
        let m = 1000;
        let grid_pos = (0..m * m)
            .filter(|k| {
                let x = [((k / m) as f64 + 0.5) / m as f64, ((k % m) as f64 + 0.5) / m as f64];
                checker_label(&x, 4, 45.0) == 1
            })
            .count() as f64
            / (m * m) as f64;
        assert!((pos - grid_pos).abs() < 0.01, "{pos} vs {grid_pos}");
        assert!((pos - 0.5).abs() < 0.02, "{pos}");
    }

    #[test]
    fn labels_are_functions_of_features_and_seeded() {
        for kind in [Kind::Circle, Kind::Sine, Kind::Checkerboard] {
            let spec = SyntheticSpec::new(kind, 2000, 9);
            let d = spec.generate().unwrap();
            assert_eq!(d, spec.generate().unwrap());
            for i in d.instances() {
                let y = match kind {
                    Kind::Circle => circle_label(&i.features, CIRCLE_RADIUS),
                    Kind::Sine => sine_label(&i.features),
                    _ => checker_label(&i.features, 4, 45.0),
                };
                assert_eq!(y, i.label);
            }
        }
        let a = SyntheticSpec::new(Kind::GaussianPairs, 100, 1).generate().unwrap();
        let b = SyntheticSpec::new(Kind::GaussianPairs, 100, 2).generate().unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn sine_range_flag() {
        let d = gen_sine_range(1000, 4, true).unwrap();
        assert!(d.instances().iter().all(|i| i.features[1] >= 0.0));
        let d = gen_sine(1000, 4).unwrap();
        assert!(d.instances().iter().any(|i| i.features[1] < 0.0));
    }
}
