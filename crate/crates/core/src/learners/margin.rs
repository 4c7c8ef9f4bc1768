//! Hand-built "margin" learners for the synthetic verification tasks. Their
//! confidence is the distance to the learned boundary, scaled by the largest
//! such distance seen in training.

use super::{Classifier, Prediction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn check_both_classes(d: &Dataset) -> Result<()> {
    let counts = d.class_counts();
    if counts.len() < 2 || counts[0] == 0 {
        return Err(Error::ClassAbsent(0));
    }
    if counts[1] == 0 {
        return Err(Error::ClassAbsent(1));
    }
    Ok(())
}

/// Midpoint between the largest class-0 value and the smallest class-1 value,
/// plus the largest |value - threshold| over the training set.
fn fit_1d(d: &Dataset, value: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let mut max_neg = f64::NEG_INFINITY;
    let mut min_pos = f64::INFINITY;
    for i in d.instances() {
        let v = value(&i.features);
        if i.label == 0 {
            max_neg = max_neg.max(v);
        } else {
            min_pos = min_pos.min(v);
        }
    }
    let threshold = (max_neg + min_pos) / 2.0;
    let scale = d
        .instances()
        .iter()
        .map(|i| (value(&i.features) - threshold).abs())
        .fold(0.0, f64::max);
    (threshold, scale)
}

fn scaled(distance: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        (distance / scale).min(1.0)
    } else {
        0.0
    }
}

/// Circle centred at the origin: inside is class 0, outside class 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleFit {
    radius: f64,
    scale: f64,
    dim: usize,
}

impl CircleFit {
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

pub fn circle_fit_train(d: &Dataset) -> Result<CircleFit> {
    if d.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: d.dim(),
        });
    }
    check_both_classes(d)?;
    let (radius, scale) = fit_1d(d, |x| x[0].hypot(x[1]));
    Ok(CircleFit {
        radius,
        scale,
        dim: 2,
    })
}

impl Classifier for CircleFit {
    fn predict(&self, x: &[f64]) -> Prediction {
        let r = x[0].hypot(x[1]);
        Prediction::new(usize::from(r >= self.radius), scaled((r - self.radius).abs(), self.scale))
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn manifest(&self) -> String {
        format!("model=circle_fit\nradius={}\nscale={}\n", self.radius, self.scale)
    }
}

/// Threshold on one coordinate: at or above is class 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearThreshold {
    coordinate: usize,
    threshold: f64,
    scale: f64,
    dim: usize,
}

impl LinearThreshold {
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn coordinate(&self) -> usize {
        self.coordinate
    }
}

pub fn linear_threshold_train(d: &Dataset, coordinate: usize) -> Result<LinearThreshold> {
    if coordinate >= d.dim() {
        return Err(Error::InvalidArgument(format!(
            "coordinate {coordinate} out of range for {}-dimensional data",
            d.dim()
        )));
    }
    check_both_classes(d)?;
    let (threshold, scale) = fit_1d(d, |x| x[coordinate]);
    Ok(LinearThreshold {
        coordinate,
        threshold,
        scale,
        dim: d.dim(),
    })
}

impl Classifier for LinearThreshold {
    fn predict(&self, x: &[f64]) -> Prediction {
        let v = x[self.coordinate];
        Prediction::new(
            usize::from(v >= self.threshold),
            scaled((v - self.threshold).abs(), self.scale),
        )
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn manifest(&self) -> String {
        format!(
            "model=linear_threshold\ncoordinate={}\nthreshold={}\nscale={}\n",
            self.coordinate, self.threshold, self.scale
        )
    }
}
