//! The spatial boosting loop.
//!
//! Each epoch runs four barrier-separated phases over an immutable snapshot of
//! the grid: (A) fresh training of every node on its local data, (B) every
//! node scores the distinct instances of its neighbourhood pool and the
//! grid-wide minimum confidence per instance becomes a resampling weight,
//! (C) every node resamples its slots from its pool, (D) a validation
//! classifier is trained on the distinct pooled instances and the best one is
//! kept (pocket).
//!
//! Node data is stored as positions into the training corpus, so resampled
//! copies always resolve to the original features and label.

use std::collections::HashMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;

use crate::dataset::{stratified_partition, Dataset, Instance};
use crate::error::{Error, Result};
use crate::grid::{neighbor_table, GridConfig, NodeId};
use crate::learners::{error_rate, Classifier, LearnerSpec, Prediction};
use crate::metrics::Histogram;
use crate::par::map_indexed;
use crate::rng::{self, Rng};

const TAG_INIT: u64 = 0x1417;
const TAG_RESAMPLE: u64 = 0x5a3;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub node: NodeId,
    slots: Vec<usize>,
}

impl NodeState {
    pub fn new(node: NodeId, slots: Vec<usize>) -> Self {
        NodeState { node, slots }
    }

    /// Corpus positions held by this node, copies included.
    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn local_data(&self, corpus: &Dataset) -> Dataset {
        corpus.derive(self.slots.iter().map(|&p| corpus.instances()[p].clone()).collect())
    }
}

/// Per-corpus-position confidence statistics for one epoch. Positions that no
/// node evaluated carry `None` and weight zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceRecord {
    raw: Vec<Option<f64>>,
    weights: Vec<f64>,
    multiplicity: Vec<u32>,
    cs_min: f64,
    cs_max: f64,
}

impl ConfidenceRecord {
    /// Builds weights from raw minimum confidences by linear re-scaling onto
    /// [0,1] and reversal; a constant field gives every tested id weight 1.
    pub fn from_raw(raw: Vec<Option<f64>>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in raw.iter().flatten() {
            lo = lo.min(*c);
            hi = hi.max(*c);
        }
        let weights = raw
            .iter()
            .map(|c| match c {
                None => 0.0,
                Some(_) if hi <= lo => 1.0,
                Some(c) => 1.0 - (c - lo) / (hi - lo),
            })
            .collect();
        let multiplicity = vec![0; raw.len()];
        ConfidenceRecord {
            raw,
            weights,
            multiplicity,
            cs_min: lo,
            cs_max: hi,
        }
    }

    pub fn raw(&self, pos: usize) -> Option<f64> {
        self.raw[pos]
    }

    pub fn normalized(&self, pos: usize) -> Option<f64> {
        self.raw[pos].map(|_| 1.0 - self.weights[pos])
    }

    pub fn weight(&self, pos: usize) -> f64 {
        self.weights[pos]
    }

    /// Weights indexed by corpus position.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of grid slots holding each position when the record was made.
    pub fn multiplicity(&self) -> &[u32] {
        &self.multiplicity
    }

    pub fn cs_min(&self) -> f64 {
        self.cs_min
    }

    pub fn cs_max(&self) -> f64 {
        self.cs_max
    }

    pub fn tested(&self) -> usize {
        self.raw.iter().flatten().count()
    }

    /// Histogram of weight values over tested positions, ten bins on [0,1].
    pub fn weight_histogram(&self) -> Histogram {
        let mut h = Histogram::empty(0.0, 0.1, 10);
        for (r, w) in self.raw.iter().zip(&self.weights) {
            if r.is_some() {
                h.add(*w, 1.0);
            }
        }
        h.normalized()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub validation_error: f64,
    pub distinct_count: usize,
    pub cs_min: f64,
    pub cs_max: f64,
    pub weight_histogram: Histogram,
}

#[derive(Debug)]
pub struct PsbmlResult {
    pub best_classifier: Box<dyn Classifier>,
    pub margin_data: Dataset,
    pub best_epoch: usize,
    pub reports: Vec<EpochReport>,
}

impl PsbmlResult {
    pub fn best_validation_error(&self) -> f64 {
        self.reports[self.best_epoch - 1].validation_error
    }

    pub fn predict(&self, x: &Instance) -> Result<Prediction> {
        self.best_classifier.predict_instance(x)
    }
}

pub fn predict(result: &PsbmlResult, x: &Instance) -> Result<Prediction> {
    result.predict(x)
}

fn positions_by_id(corpus: &Dataset) -> Result<HashMap<usize, usize>> {
    let mut map = HashMap::with_capacity(corpus.len());
    for (pos, inst) in corpus.instances().iter().enumerate() {
        if map.insert(inst.id, pos).is_some() {
            return Err(Error::InvalidDataset(format!("duplicate instance id {}", inst.id)));
        }
    }
    Ok(map)
}

/// Stratified disjoint split of `train` over the grid, row-major.
pub fn initialize_grid(train: &Dataset, cfg: &GridConfig, seed: u64) -> Result<Vec<NodeState>> {
    cfg.validate()?;
    if train.len() < cfg.node_count() {
        return Err(Error::InvalidDataset(format!(
            "{} instances cannot fill {} nodes",
            train.len(),
            cfg.node_count()
        )));
    }
    train.require_all_classes()?;
    let by_id = positions_by_id(train)?;
    let parts = stratified_partition(train, cfg.node_count(), rng::derive_seed(seed, &[TAG_INIT]))?;
    Ok(parts
        .iter()
        .enumerate()
        .map(|(i, p)| NodeState::new(cfg.node(i), p.instances().iter().map(|x| by_id[&x.id]).collect()))
        .collect())
}

/// Distinct corpus positions in each node's own-plus-neighbours pool, sorted.
pub fn node_pools(cfg: &GridConfig, nodes: &[NodeState]) -> Vec<Vec<usize>> {
    neighbor_table(cfg)
        .iter()
        .map(|nb| {
            let mut pool: Vec<usize> = nb.iter().flat_map(|&m| nodes[m].slots.iter().copied()).collect();
            pool.sort_unstable();
            pool.dedup();
            pool
        })
        .collect()
}

/// Phase B: every node's classifier scores its pool; the minimum confidence
/// per instance over all evaluations is re-scaled into a weight.
pub fn epoch_test_and_weigh(
    corpus: &Dataset,
    nodes: &[NodeState],
    classifiers: &[Box<dyn Classifier>],
    pools: &[Vec<usize>],
    threads: usize,
) -> ConfidenceRecord {
    let scored: Vec<Vec<f64>> = map_indexed(nodes.len(), threads, |i| {
        pools[i]
            .iter()
            .map(|&p| classifiers[i].predict(&corpus.instances()[p].features).confidence)
            .collect()
    });
    let mut raw: Vec<Option<f64>> = vec![None; corpus.len()];
    for (pool, confs) in pools.iter().zip(&scored) {
        for (&p, &c) in pool.iter().zip(confs) {
            raw[p] = Some(raw[p].map_or(c, |m: f64| m.min(c)));
        }
    }
    let mut rec = ConfidenceRecord::from_raw(raw);
    for n in nodes {
        for &p in &n.slots {
            rec.multiplicity[p] += 1;
        }
    }
    rec
}

/// Phase C for one node: each slot is, with probability `pr`, replaced by a
/// draw from `pool` proportional to `weights[pos]`. All-zero pool weights
/// fall back to uniform draws.
pub fn resample_node(slots: &[usize], pool: &[usize], weights: &[f64], pr: f64, rng: &mut Rng) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::InvalidArgument("empty resampling pool".into()));
    }
    let w: Vec<f64> = pool.iter().map(|&p| weights[p]).collect();
    let dist = if w.iter().any(|x| *x > 0.0) {
        WeightedIndex::new(&w).map_err(|e| Error::Numerical(format!("resampling weights: {e}")))?
    } else {
        WeightedIndex::new(vec![1.0; pool.len()]).expect("uniform weights are valid")
    };
    Ok(slots
        .iter()
        .map(|&s| if rng.random_bool(pr) { pool[dist.sample(rng)] } else { s })
        .collect())
}

/// Union of all node data, one copy per instance, in corpus order.
pub fn pooled_unique(corpus: &Dataset, nodes: &[NodeState]) -> Dataset {
    let mut seen = vec![false; corpus.len()];
    for n in nodes {
        for &p in &n.slots {
            seen[p] = true;
        }
    }
    corpus.derive(
        seen.iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(p, _)| corpus.instances()[p].clone())
            .collect(),
    )
}

/// A run that advances one epoch per [`PsbmlRun::step`].
pub struct PsbmlRun {
    corpus: Dataset,
    validation: Dataset,
    cfg: GridConfig,
    spec: LearnerSpec,
    seed: u64,
    threads: usize,
    nodes: Vec<NodeState>,
    epoch: usize,
    record: Option<ConfidenceRecord>,
    reports: Vec<EpochReport>,
    best: Option<(Box<dyn Classifier>, Dataset, usize)>,
}

impl PsbmlRun {
    pub fn new(train: &Dataset, validation: &Dataset, cfg: &GridConfig, spec: &LearnerSpec, seed: u64) -> Result<Self> {
        if validation.is_empty() {
            return Err(Error::InvalidDataset("empty validation set".into()));
        }
        if validation.dim() != train.dim() {
            return Err(Error::DimensionMismatch {
                expected: train.dim(),
                found: validation.dim(),
            });
        }
        let nodes = initialize_grid(train, cfg, seed)?;
        Ok(PsbmlRun {
            corpus: train.clone(),
            validation: validation.clone(),
            cfg: cfg.clone(),
            spec: spec.clone(),
            seed,
            threads: 1,
            nodes,
            epoch: 0,
            record: None,
            reports: Vec::new(),
            best: None,
        })
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn corpus(&self) -> &Dataset {
        &self.corpus
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.cfg.epochs
    }

    /// Confidence record of the last completed epoch (computed before that
    /// epoch's resampling).
    pub fn last_record(&self) -> Option<&ConfidenceRecord> {
        self.record.as_ref()
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    /// Every slot on the grid, copies included.
    pub fn population(&self) -> impl Iterator<Item = &Instance> + '_ {
        self.nodes
            .iter()
            .flat_map(|n| n.slots.iter().map(|&p| &self.corpus.instances()[p]))
    }

    pub fn step(&mut self) -> Result<&EpochReport> {
        let epoch = self.epoch + 1;
        let (corpus, cfg, spec) = (&self.corpus, &self.cfg, &self.spec);
        let nodes = &self.nodes;

        let trained = map_indexed(nodes.len(), self.threads, |i| {
            spec.train(&nodes[i].local_data(corpus)).map_err(|e| Error::Node {
                row: nodes[i].node.row,
                col: nodes[i].node.col,
                epoch,
                source: Box::new(e),
            })
        });
        let classifiers = trained.into_iter().collect::<Result<Vec<_>>>()?;

        let pools = node_pools(cfg, nodes);
        let record = epoch_test_and_weigh(corpus, nodes, &classifiers, &pools, self.threads);
        drop(classifiers);

        let seed = self.seed;
        let resampled = map_indexed(nodes.len(), self.threads, |i| {
            let mut rng = rng::stream(seed, &[i as u64, epoch as u64, TAG_RESAMPLE]);
            resample_node(&nodes[i].slots, &pools[i], record.weights(), cfg.pr, &mut rng)
        });
        for (n, slots) in self.nodes.iter_mut().zip(resampled) {
            n.slots = slots?;
        }

        let pooled = pooled_unique(&self.corpus, &self.nodes);
        let clf = self.spec.train(&pooled).map_err(|e| Error::Validation {
            epoch,
            source: Box::new(e),
        })?;
        let validation_error = error_rate(clf.as_ref(), &self.validation);
        let best_error = self
            .best
            .as_ref()
            .map_or(f64::INFINITY, |b| self.reports[b.2 - 1].validation_error);
        let distinct_count = pooled.len();
        if validation_error <= best_error {
            self.best = Some((clf, pooled, epoch));
        }
        self.reports.push(EpochReport {
            epoch,
            validation_error,
            distinct_count,
            cs_min: record.cs_min(),
            cs_max: record.cs_max(),
            weight_histogram: record.weight_histogram(),
        });
        self.record = Some(record);
        self.epoch = epoch;
        log::debug!("epoch {epoch}: validation error {validation_error:.4}, {distinct_count} distinct");
        Ok(self.reports.last().expect("just pushed"))
    }

    pub fn finish(self) -> Result<PsbmlResult> {
        let (best_classifier, margin_data, best_epoch) = self
            .best
            .ok_or_else(|| Error::InvalidArgument("no epoch has run".into()))?;
        Ok(PsbmlResult {
            best_classifier,
            margin_data,
            best_epoch,
            reports: self.reports,
        })
    }
}

/// Runs every configured epoch. `observe` sees the run after each epoch.
pub fn run_psbml_with(
    train: &Dataset,
    validation: &Dataset,
    cfg: &GridConfig,
    spec: &LearnerSpec,
    seed: u64,
    threads: usize,
    mut observe: impl FnMut(&PsbmlRun),
) -> Result<PsbmlResult> {
    let mut run = PsbmlRun::new(train, validation, cfg, spec, seed)?.with_threads(threads);
    while !run.is_done() {
        run.step()?;
        observe(&run);
    }
    run.finish()
}

pub fn run_psbml(
    train: &Dataset,
    validation: &Dataset,
    cfg: &GridConfig,
    spec: &LearnerSpec,
    seed: u64,
    threads: usize,
) -> Result<PsbmlResult> {
    run_psbml_with(train, validation, cfg, spec, seed, threads, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Neighborhood;
    use crate::learners::Density;
    use proptest::prelude::*;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut r = rng::from_seed(seed);
        let inst = (0..n)
            .map(|i| {
                let y = i % 2;
                let c = if y == 0 { -1.0 } else { 1.0 };
                let x = vec![c + r.random_range(-1.5..1.5), r.random_range(-1.0..1.0)];
                Instance::new(i, x, y)
            })
            .collect();
        Dataset::new(inst, 2).unwrap()
    }

    fn nb() -> LearnerSpec {
        LearnerSpec::NaiveBayes {
            density: Density::Gaussian,
        }
    }

    #[test]
    fn even_partition() {
        let d = blobs(900, 1);
        let cfg = GridConfig::new(3, 3, Neighborhood::C9, 0.2, 1).unwrap();
        let nodes = initialize_grid(&d, &cfg, 5).unwrap();
        assert_eq!(nodes.len(), 9);
        assert!(nodes.iter().all(|n| n.slots().len() == 100));
        for n in &nodes {
            let pos = n.local_data(&d).class_counts();
            assert!((pos[1] as i64 - 50).abs() <= 1);
        }
        let one = GridConfig::new(1, 1, Neighborhood::C9, 0.2, 1).unwrap();
        assert_eq!(initialize_grid(&d, &one, 5).unwrap()[0].slots().len(), 900);
        let big = GridConfig::new(40, 40, Neighborhood::C9, 0.2, 1).unwrap();
        assert!(initialize_grid(&d, &big, 5).is_err());
    }

    #[test]
    fn min_confidence_and_rescaling() {
        let r = ConfidenceRecord::from_raw(vec![Some(0.2), Some(0.6), Some(1.0), None]);
        assert_eq!(r.weights(), &[1.0, 0.5, 0.0, 0.0]);
        assert_eq!(r.normalized(1), Some(0.5));
        let flat = ConfidenceRecord::from_raw(vec![Some(0.4), Some(0.4)]);
        assert_eq!(flat.weights(), &[1.0, 1.0]);
    }

    #[derive(Debug)]
    struct Fixed(f64);
    impl Classifier for Fixed {
        fn predict(&self, _: &[f64]) -> Prediction {
            Prediction::new(0, self.0)
        }
        fn dim(&self) -> usize {
            2
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn manifest(&self) -> String {
            String::new()
        }
    }

    #[test]
    fn instance_takes_minimum_over_evaluators() {
        let d = blobs(6, 2);
        let nodes: Vec<NodeState> = (0..3).map(|i| NodeState::new(NodeId::new(0, i), vec![2 * i, 2 * i + 1])).collect();
        let clfs: Vec<Box<dyn Classifier>> = vec![Box::new(Fixed(0.9)), Box::new(Fixed(0.3)), Box::new(Fixed(0.7))];
        let pools = vec![vec![0, 1, 2, 3, 4, 5]; 3];
        let rec = epoch_test_and_weigh(&d, &nodes, &clfs, &pools, 2);
        assert_eq!(rec.raw(4), Some(0.3));
        assert_eq!(rec.multiplicity(), &[1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn resampling_edge_cases() {
        let mut r = rng::from_seed(1);
        let slots = vec![0, 1, 2, 3];
        let w = vec![0.2, 0.0, 0.9, 0.4];
        assert_eq!(resample_node(&slots, &[0, 1, 2, 3], &w, 0.0, &mut r).unwrap(), slots);
        let spike = vec![0.0, 0.0, 1.0, 0.0];
        assert_eq!(resample_node(&slots, &[0, 1, 2, 3], &spike, 1.0, &mut r).unwrap(), vec![2; 4]);
        let zero = vec![0.0; 4];
        assert_eq!(resample_node(&slots, &[0, 1, 2, 3], &zero, 1.0, &mut r).unwrap().len(), 4);
    }

    #[test]
    fn resampling_frequency_follows_weights() {
        let mut r = rng::from_seed(11);
        let slots = vec![0usize; 100_000];
        let out = resample_node(&slots, &[0, 1], &[0.75, 0.25], 1.0, &mut r).unwrap();
        let a = out.iter().filter(|&&p| p == 0).count() as f64 / out.len() as f64;
        assert!((a - 0.75).abs() < 0.01, "{a}");
    }

    #[test]
    fn pooled_union() {
        let d = blobs(6, 3);
        let nodes = vec![NodeState::new(NodeId::new(0, 0), vec![1, 2, 1]), NodeState::new(NodeId::new(0, 1), vec![2, 1])];
        let ids: Vec<usize> = pooled_unique(&d, &nodes).instances().iter().map(|i| i.id).collect();
        assert_eq!(ids, vec![1, 2]);
        let nodes = vec![NodeState::new(NodeId::new(0, 0), vec![1, 2]), NodeState::new(NodeId::new(0, 1), vec![3])];
        assert_eq!(pooled_unique(&d, &nodes).len(), 3);
    }

    #[test]
    fn single_node_single_epoch_is_plain_training() {
        let d = blobs(300, 4);
        let v = blobs(100, 5);
        let cfg = GridConfig::new(1, 1, Neighborhood::L5, 0.0, 1).unwrap();
        let res = run_psbml(&d, &v, &cfg, &nb(), 9, 1).unwrap();
        let direct = nb().train(&d).unwrap();
        assert_eq!(res.best_classifier.manifest(), direct.manifest());
        assert_eq!(res.best_validation_error(), error_rate(direct.as_ref(), &v));
    }

    #[test]
    fn pocket_population_and_thread_determinism() {
        let d = blobs(500, 6);
        let v = blobs(200, 7);
        let cfg = GridConfig::new(3, 4, Neighborhood::C9, 0.3, 6).unwrap();
        let mut sizes = Vec::new();
        let mut states = Vec::new();
        let res = run_psbml_with(&d, &v, &cfg, &nb(), 3, 1, |run| {
            sizes.push(run.nodes().iter().map(|n| n.slots().len()).sum::<usize>());
            states.push(run.nodes().to_vec());
        })
        .unwrap();
        assert!(sizes.iter().all(|s| *s == 500));
        let min = res.reports.iter().map(|r| r.validation_error).fold(f64::INFINITY, f64::min);
        assert_eq!(res.best_validation_error(), min);
        assert!(res.reports.iter().all(|r| r.distinct_count <= 500));

        let mut par_states = Vec::new();
        let par = run_psbml_with(&d, &v, &cfg, &nb(), 3, 5, |run| par_states.push(run.nodes().to_vec())).unwrap();
        assert_eq!(states, par_states);
        assert_eq!(res.reports, par.reports);
    }

    #[test]
    fn training_failure_names_the_node() {
        // a node holding a single class makes naive Bayes fail
        let inst = (0..4).map(|i| Instance::new(i, vec![i as f64, 0.0], usize::from(i == 3))).collect();
        let d = Dataset::new(inst, 2).unwrap();
        let cfg = GridConfig::new(2, 1, Neighborhood::L5, 0.0, 1).unwrap();
        let err = run_psbml(&d, &d, &cfg, &nb(), 1, 1).unwrap_err();
        assert!(matches!(err, Error::Node { epoch: 1, .. }), "{err}");
    }

    proptest! {
        #[test]
        fn lower_confidence_means_higher_weight(cs in prop::collection::vec(0.0f64..1.0, 2..50)) {
            let r = ConfidenceRecord::from_raw(cs.iter().map(|c| Some(*c)).collect());
            for i in 0..cs.len() {
                for j in 0..cs.len() {
                    if cs[i] < cs[j] {
                        prop_assert!(r.weight(i) > r.weight(j));
                    }
                }
            }
        }
    }
}
