//! Toroidal grid topology.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Neighborhood {
    L5,
    C9,
    L9,
    C13,
}

const L5: &[(i64, i64)] = &[(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)];
const C9: &[(i64, i64)] = &[
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];
const L9: &[(i64, i64)] = &[
    (-2, 0),
    (-1, 0),
    (0, -2),
    (0, -1),
    (0, 0),
    (0, 1),
    (0, 2),
    (1, 0),
    (2, 0),
];
const C13: &[(i64, i64)] = &[
    (-2, 0),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -2),
    (0, -1),
    (0, 0),
    (0, 1),
    (0, 2),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, 0),
];

impl Neighborhood {
    pub const ALL: [Neighborhood; 4] = [
        Neighborhood::L5,
        Neighborhood::C9,
        Neighborhood::L9,
        Neighborhood::C13,
    ];

    /// (row, col) offsets including the origin, sorted row-major.
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Neighborhood::L5 => L5,
            Neighborhood::C9 => C9,
            Neighborhood::L9 => L9,
            Neighborhood::C13 => C13,
        }
    }
}

/// Cell count before any wrap-around collisions.
pub fn neighborhood_size(n: Neighborhood) -> usize {
    n.offsets().len()
}

impl fmt::Display for Neighborhood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Neighborhood::L5 => "L5",
            Neighborhood::C9 => "C9",
            Neighborhood::L9 => "L9",
            Neighborhood::C13 => "C13",
        })
    }
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L5" => Ok(Neighborhood::L5),
            "C9" => Ok(Neighborhood::C9),
            "L9" => Ok(Neighborhood::L9),
            "C13" => Ok(Neighborhood::C13),
            _ => Err(Error::Config(format!("unknown neighborhood {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub neighborhood: Neighborhood,
    /// Per-slot replacement probability.
    pub pr: f64,
    pub epochs: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 5,
            height: 5,
            neighborhood: Neighborhood::C9,
            pr: 0.2,
            epochs: 50,
        }
    }
}

impl GridConfig {
    pub fn new(width: usize, height: usize, neighborhood: Neighborhood, pr: f64, epochs: usize) -> Result<Self> {
        let cfg = GridConfig {
            width,
            height,
            neighborhood,
            pr,
            epochs,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("grid dimensions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pr) {
            return Err(Error::Config(format!("grid.pr = {} outside [0,1]", self.pr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("grid.epochs must be positive".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major position of a node.
    pub fn index(&self, node: NodeId) -> usize {
        node.row * self.width + node.col
    }

    pub fn node(&self, index: usize) -> NodeId {
        NodeId {
            row: index / self.width,
            col: index % self.width,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count()).map(|i| self.node(i))
    }

    /// Wrap an arbitrary (row, col) onto the torus.
    pub fn wrap(&self, row: i64, col: i64) -> NodeId {
        NodeId {
            row: row.rem_euclid(self.height as i64) as usize,
            col: col.rem_euclid(self.width as i64) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId {
    pub row: usize,
    pub col: usize,
}

impl NodeId {
    pub fn new(row: usize, col: usize) -> Self {
        NodeId { row, col }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// Neighbourhood of `node`, itself included, in offset order with
/// wrap-around duplicates removed (first occurrence kept).
pub fn neighbors(cfg: &GridConfig, node: NodeId) -> Vec<NodeId> {
    let mut out: Vec<NodeId> = Vec::with_capacity(neighborhood_size(cfg.neighborhood));
    for &(dr, dc) in cfg.neighborhood.offsets() {
        let n = cfg.wrap(node.row as i64 + dr, node.col as i64 + dc);
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

/// Neighbour lists for every node, indexed row-major.
pub fn neighbor_table(cfg: &GridConfig) -> Vec<Vec<usize>> {
    cfg.nodes()
        .map(|n| neighbors(cfg, n).into_iter().map(|m| cfg.index(m)).collect())
        .collect()
}
