//! Grid of Gaussian mixtures: the engine's topology and resampling rule with
//! each node's classifier replaced by a weighted GMM plus mean-shift. Point
//! weights are fixed up front by a [`BoundaryWeight`].

use nalgebra::DVector;

use super::gmm::{gmm_fit_em, EmInit, EmOptions, GaussianMixture};
use super::modes::{default_starts, find_all_modes, BoundaryWeight, ModeOptions, ModeSet};
use crate::dataset::{Dataset, Instance};
use crate::engine::{initialize_grid, node_pools, resample_node, NodeState};
use crate::error::{Error, Result};
use crate::grid::GridConfig;
use crate::par::map_indexed;
use crate::rng;

const TAG_EM: u64 = 0xe3;
const TAG_STARTS: u64 = 0x57a;
const TAG_RESAMPLE: u64 = 0x5a3;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmGridOptions {
    pub components: usize,
    /// Random pool points added to the component means as mean-shift starts.
    pub extra_starts: usize,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub modes: ModeOptions,
}

impl Default for GmmGridOptions {
    fn default() -> Self {
        GmmGridOptions {
            components: 4,
            extra_starts: 10,
            em_max_iter: 25,
            em_tol: 1e-6,
            modes: ModeOptions::default(),
        }
    }
}

pub struct GmmGrid {
    corpus: Dataset,
    points: Vec<DVector<f64>>,
    prior: Vec<f64>,
    cfg: GridConfig,
    opts: GmmGridOptions,
    seed: u64,
    threads: usize,
    nodes: Vec<NodeState>,
    mixtures: Vec<Option<GaussianMixture>>,
    epoch: usize,
}

impl GmmGrid {
    pub fn new(corpus: &Dataset, cfg: &GridConfig, bw: &BoundaryWeight, opts: GmmGridOptions, seed: u64) -> Result<Self> {
        let points: Vec<DVector<f64>> = corpus
            .instances()
            .iter()
            .map(|i| DVector::from_column_slice(&i.features))
            .collect();
        let prior: Vec<f64> = points.iter().map(|p| bw.value(p)).collect();
        let nodes = initialize_grid(corpus, cfg, seed)?;
        Ok(GmmGrid {
            corpus: corpus.clone(),
            points,
            prior,
            cfg: cfg.clone(),
            opts,
            seed,
            threads: 1,
            mixtures: vec![None; nodes.len()],
            nodes,
            epoch: 0,
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn mixtures(&self) -> &[Option<GaussianMixture>] {
        &self.mixtures
    }

    /// A-priori weight of each corpus position.
    pub fn prior_weights(&self) -> &[f64] {
        &self.prior
    }

    pub fn population(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.nodes
            .iter()
            .flat_map(|n| n.slots().iter().map(|&p| &self.corpus.instances()[p]))
    }

    /// One epoch: fit and mode-seek on every node's pool, then resample.
    pub fn step(&mut self) -> Result<Vec<ModeSet>> {
        self.step_with(true)
    }

    /// As [`step`](Self::step); with `seek_modes` false only the mixtures are
    /// refitted and the returned list is empty.
    pub fn step_with(&mut self, seek_modes: bool) -> Result<Vec<ModeSet>> {
        let epoch = self.epoch + 1;
        let pools = node_pools(&self.cfg, &self.nodes);
        let neighbours = crate::grid::neighbor_table(&self.cfg);
        let (points, prior, opts, seed) = (&self.points, &self.prior, &self.opts, self.seed);
        let (nodes, mixtures) = (&self.nodes, &self.mixtures);

        let fitted = map_indexed(nodes.len(), self.threads, |i| -> Result<(GaussianMixture, Option<ModeSet>)> {
            // distinct pool points, weighted by prior weight times copy count
            let mut copies = vec![0u32; points.len()];
            for &m in &neighbours[i] {
                for &p in nodes[m].slots() {
                    copies[p] += 1;
                }
            }
            let pts: Vec<DVector<f64>> = pools[i].iter().map(|&p| points[p].clone()).collect();
            let w: Vec<f64> = pools[i].iter().map(|&p| prior[p] * f64::from(copies[p])).collect();
            let mut em = EmOptions::new(opts.components.min(pts.len()), rng::derive_seed(seed, &[i as u64, epoch as u64, TAG_EM]));
            em.max_iter = opts.em_max_iter;
            em.tol = opts.em_tol;
            if let Some(m) = &mixtures[i] {
                if m.components().len() == em.components {
                    em.init = EmInit::From(m.clone());
                }
            }
            let fit = gmm_fit_em(&pts, Some(&w), &em)?;
            if !seek_modes {
                return Ok((fit.mixture, None));
            }
            let starts = default_starts(
                &fit.mixture,
                &pts,
                opts.extra_starts,
                rng::derive_seed(seed, &[i as u64, epoch as u64, TAG_STARTS]),
            );
            let modes = find_all_modes(&fit.mixture, None, &starts, opts.modes)?;
            Ok((fit.mixture, Some(modes)))
        });

        let pr = self.cfg.pr;
        let resampled = map_indexed(nodes.len(), self.threads, |i| {
            let mut r = rng::stream(seed, &[i as u64, epoch as u64, TAG_RESAMPLE]);
            resample_node(nodes[i].slots(), &pools[i], prior, pr, &mut r)
        });

        let mut all_modes = Vec::with_capacity(nodes.len());
        for (i, f) in fitted.into_iter().enumerate() {
            let node = self.nodes[i].node;
            let (mix, modes) = f.map_err(|e| Error::Node {
                row: node.row,
                col: node.col,
                epoch,
                source: Box::new(e),
            })?;
            self.mixtures[i] = Some(mix);
            all_modes.extend(modes);
        }
        for (n, s) in self.nodes.iter_mut().zip(resampled) {
            *n = NodeState::new(n.node, s?);
        }
        self.epoch = epoch;
        Ok(all_modes)
    }
}

/// Advances `grid` by one epoch and returns each node's modes.
pub fn gmm_grid_epoch(grid: &mut GmmGrid) -> Result<Vec<ModeSet>> {
    grid.step()
}

/// Distinct modes across all nodes after single-linkage merging at `delta`.
pub fn surviving_modes(per_node: &[ModeSet], delta: f64) -> usize {
    let pts: Vec<&DVector<f64>> = per_node.iter().flat_map(|m| m.modes.iter().map(|x| &x.point)).collect();
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (pts[i] - pts[j]).norm() <= delta {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..n).filter(|&i| root(&mut parent, i) == i).count()
}
