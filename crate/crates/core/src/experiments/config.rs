//! Line-oriented `key=value` configuration with namespaced keys.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{GridConfig, Neighborhood};
use crate::learners::{BoostBase, Density, LearnerSpec};

/// Depth cap for `learner=tree` when `tree.max_depth` is absent; deep enough
/// to be inert on the bundled datasets while bounding recursion.
pub const DEFAULT_TREE_DEPTH: usize = 64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    /// `#` starts a comment; blank lines are ignored; later keys win.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    /// Builder form of [`set`](Self::set).
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, value);
        self
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key}={v}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list_or<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
        T: Clone,
    {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<T>().map_err(|e| Error::Config(format!("{key}: {s:?}: {e}"))))
                .collect(),
        }
    }

    /// Grid keys over the given defaults.
    pub fn grid(&self, default: &GridConfig) -> Result<GridConfig> {
        GridConfig::new(
            self.get_or("grid.width", default.width)?,
            self.get_or("grid.height", default.height)?,
            self.get_or::<Neighborhood>("grid.neighborhood", default.neighborhood)?,
            self.get_or("grid.pr", default.pr)?,
            self.get_or("grid.epochs", default.epochs)?,
        )
    }

    /// Learner keys (`learner`, `nb.density`, `tree.*`, `ada.*`,
    /// `linear.coordinate`) over the given default. `learner.kind` is accepted
    /// as an alias of `learner`.
    pub fn learner(&self, default: &LearnerSpec) -> Result<LearnerSpec> {
        let kind = self.raw("learner").or_else(|| self.raw("learner.kind"));
        let Some(kind) = kind else {
            return self.learner_overrides(default.clone());
        };
        let base = match kind {
            "nb" => LearnerSpec::NaiveBayes {
                density: Density::Gaussian,
            },
            "tree" => LearnerSpec::Tree {
                max_depth: DEFAULT_TREE_DEPTH,
                min_leaf: 2,
            },
            "stump" => LearnerSpec::Stump,
            "adaboost" => LearnerSpec::AdaBoost {
                base: BoostBase::Stump,
                rounds: 10,
            },
            "circle" => LearnerSpec::CircleFit,
            "linear" => LearnerSpec::LinearThreshold { coordinate: 0 },
            other => return Err(Error::Config(format!("unknown learner {other:?}"))),
        };
        self.learner_overrides(base)
    }

    fn learner_overrides(&self, spec: LearnerSpec) -> Result<LearnerSpec> {
        Ok(match spec {
            LearnerSpec::NaiveBayes { density } => LearnerSpec::NaiveBayes {
                density: self.get_or("nb.density", density)?,
            },
            LearnerSpec::Tree {
                max_depth,
                min_leaf,
            } => LearnerSpec::Tree {
                max_depth: self.get_or("tree.max_depth", max_depth)?,
                min_leaf: self.get_or("tree.min_leaf", min_leaf)?,
            },
            LearnerSpec::AdaBoost { base, rounds } => LearnerSpec::AdaBoost {
                base: self.get_or("ada.base", base)?,
                rounds: self.get_or("ada.rounds", rounds)?,
            },
            LearnerSpec::LinearThreshold { coordinate } => LearnerSpec::LinearThreshold {
                coordinate: self.get_or("linear.coordinate", coordinate)?,
            },
            other => other,
        })
    }
}
