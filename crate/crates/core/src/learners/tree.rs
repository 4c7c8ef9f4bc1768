use std::fmt::Write as _;

use super::{Classifier, Prediction};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Binary information-gain tree with midpoint thresholds and
/// Laplace-smoothed leaf confidence.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    dim: usize,
    num_classes: usize,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        label: usize,
        confidence: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

struct Builder<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<usize>,
    num_classes: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> Builder<'a> {
    fn leaf(&self, idx: &[usize]) -> Node {
        let mut counts = vec![0usize; self.num_classes];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        let mut label = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[label] {
                label = c;
            }
        }
        let confidence = (counts[label] + 1) as f64 / (idx.len() + self.num_classes) as f64;
        Node::Leaf { label, confidence }
    }

    fn find_split(&self, idx: &mut [usize]) -> Option<BestSplit> {
        let n = idx.len();
        let mut total = vec![0usize; self.num_classes];
        for &i in idx.iter() {
            total[self.labels[i]] += 1;
        }
        let parent = entropy(&total, n);
        let dim = self.rows[idx[0]].len();
        let mut best: Option<BestSplit> = None;
        let mut left = vec![0usize; self.num_classes];
        let mut right = vec![0usize; self.num_classes];
        for feature in 0..dim {
            idx.sort_by(|&a, &b| self.rows[a][feature].total_cmp(&self.rows[b][feature]));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(&total);
            for k in 0..n - 1 {
                let lbl = self.labels[idx[k]];
                left[lbl] += 1;
                right[lbl] -= 1;
                let lo = self.rows[idx[k]][feature];
                let hi = self.rows[idx[k + 1]][feature];
                let n_left = k + 1;
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let child = (n_left as f64 * entropy(&left, n_left)
                    + (n - n_left) as f64 * entropy(&right, n - n_left))
                    / n as f64;
                let gain = parent - child;
                // strict improvement keeps the lowest feature, then the lowest threshold
                if best.as_ref().map_or(true, |b| gain > b.gain + 1e-12) {
                    best = Some(BestSplit {
                        gain,
                        feature,
                        threshold: lo + (hi - lo) / 2.0,
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let pure = idx.iter().all(|&i| self.labels[i] == self.labels[idx[0]]);
        let slot = self.nodes.len();
        self.nodes.push(self.leaf(idx));
        if pure || depth >= self.max_depth || idx.len() < 2 * self.min_leaf.max(1) {
            return slot;
        }
        // zero-gain splits are allowed on impure nodes so that XOR-like
        // structure can still be reached at depth two
        let Some(split) = self.find_split(idx) else {
            return slot;
        };
        let (mut l, mut r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][split.feature] <= split.threshold);
        let left = self.build(&mut l, depth + 1);
        let right = self.build(&mut r, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        slot
    }
}

pub fn tree_train(d: &Dataset, max_depth: usize, min_leaf: usize) -> Result<DecisionTree> {
    if d.is_empty() {
        return Err(Error::InvalidDataset("empty training set".into()));
    }
    if max_depth == 0 || min_leaf == 0 {
        return Err(Error::InvalidArgument("max_depth and min_leaf must be positive".into()));
    }
    let mut b = Builder {
        rows: d.instances().iter().map(|i| i.features.as_slice()).collect(),
        labels: d.labels(),
        num_classes: d.num_classes(),
        max_depth,
        min_leaf,
        nodes: Vec::new(),
    };
    let mut idx: Vec<usize> = (0..d.len()).collect();
    b.build(&mut idx, 0);
    Ok(DecisionTree {
        nodes: b.nodes,
        dim: d.dim(),
        num_classes: d.num_classes(),
    })
}

impl DecisionTree {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, x: &[f64]) -> Prediction {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { label, confidence } => return Prediction::new(*label, *confidence),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn manifest(&self) -> String {
        let mut s = format!(
            "model=decision_tree\ndim={}\nnodes={}\ndepth={}\n",
            self.dim,
            self.nodes.len(),
            self.depth()
        );
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { label, confidence } => {
                    let _ = writeln!(s, "node{i}=leaf {label} {confidence}");
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let _ = writeln!(s, "node{i}=split f{feature} {threshold} {left} {right}");
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;
    use crate::learners::error_rate;

    fn xor() -> Dataset {
        let inst = vec![
            Instance::new(0, vec![0.0, 0.0], 0),
            Instance::new(1, vec![0.0, 1.0], 1),
            Instance::new(2, vec![1.0, 0.0], 1),
            Instance::new(3, vec![1.0, 1.0], 0),
        ];
        Dataset::new(inst, 2).unwrap()
    }

    #[test]
    fn pure_data_gives_a_single_laplace_leaf() {
        let inst = (0..7).map(|i| Instance::new(i, vec![i as f64], 1)).collect();
        let d = Dataset::new(inst, 2).unwrap();
        let t = tree_train(&d, 5, 1).unwrap();
        assert_eq!(t.node_count(), 1);
        let p = t.predict(&[3.0]);
        assert_eq!(p.label, 1);
        assert!((p.confidence - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = xor();
        assert_eq!(error_rate(&tree_train(&d, 2, 1).unwrap(), &d), 0.0);
        assert_eq!(error_rate(&tree_train(&d, 5, 1).unwrap(), &d), 0.0);
        assert_eq!(error_rate(&tree_train(&d, 1, 1).unwrap(), &d), 0.5);
    }

    #[test]
    fn ties_pick_lowest_feature_then_threshold() {
        // both features separate the classes perfectly
        let inst = vec![
            Instance::new(0, vec![0.0, 0.0], 0),
            Instance::new(1, vec![1.0, 1.0], 0),
            Instance::new(2, vec![2.0, 2.0], 1),
            Instance::new(3, vec![3.0, 3.0], 1),
        ];
        let d = Dataset::new(inst, 2).unwrap();
        let t = tree_train(&d, 3, 1).unwrap();
        assert!(t.manifest().contains("node0=split f0 1.5"));
    }

    #[test]
    fn min_leaf_limits_growth() {
        let inst = (0..10).map(|i| Instance::new(i, vec![i as f64], usize::from(i == 9))).collect();
        let d = Dataset::new(inst, 2).unwrap();
        let t = tree_train(&d, 10, 2).unwrap();
        for i in 0..10 {
            assert_eq!(t.predict(&[i as f64]).label, 0);
        }
    }
}
