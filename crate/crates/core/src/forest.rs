//! Random subspace learning with classification trees.
//!
//! Each of the `B` base learners sees a bootstrap sample of the rows and a
//! random subset of the columns drawn without replacement; the ensemble
//! predicts by majority vote.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 20, min_leaf: 1 }
    }
}

impl TreeConfig {
    fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::invalid("max_depth and min_leaf must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { label: usize },
}

/// A Gini classification tree over a subset of the columns.
///
/// Feature indices in split nodes are global column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub feature_subset: Vec<usize>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { label } => return label,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

/// Grows a tree on every row of `data` using only `allowed_features`.
pub fn tree_fit(data: &LabeledDataset, cfg: &TreeConfig, allowed_features: &[usize]) -> Result<DecisionTree> {
    cfg.validate()?;
    if allowed_features.is_empty() {
        return Err(Error::invalid("a tree needs at least one allowed feature"));
    }
    if let Some(&f) = allowed_features.iter().find(|&&f| f >= data.n_features()) {
        return Err(Error::invalid(format!("feature {f} outside 0..{}", data.n_features())));
    }
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let mut features = allowed_features.to_vec();
    features.sort_unstable();
    features.dedup();
    Ok(grow(data.features(), data.labels(), data.n_classes(), rows, features, cfg))
}

fn grow(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    rows: Vec<usize>,
    features: Vec<usize>,
    cfg: &TreeConfig,
) -> DecisionTree {
    let mut builder = Builder { x, labels, n_classes, features: &features, cfg, nodes: Vec::new() };
    builder.build(rows, 0);
    DecisionTree { nodes: builder.nodes, feature_subset: features }
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    labels: &'a [usize],
    n_classes: usize,
    features: &'a [usize],
    cfg: &'a TreeConfig,
    nodes: Vec<Node>,
}

/// `n · Gini` from class counts.
fn scaled_gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { label: 0 });
        let mut counts = vec![0usize; self.n_classes];
        for &r in &rows {
            counts[self.labels[r] - 1] += 1;
        }
        let label = majority_from_counts(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || rows.len() < 2 * self.cfg.min_leaf {
            self.nodes[id] = Node::Leaf { label };
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            self.nodes[id] = Node::Leaf { label };
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| self.x[(r, feature)] <= threshold);
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left: l, right: r };
        id
    }

    /// Lowest weighted child Gini over all midpoints; ties keep the smaller
    /// feature, then the smaller threshold.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let min_leaf = self.cfg.min_leaf;
        let mut total = vec![0usize; self.n_classes];
        for &r in rows {
            total[self.labels[r] - 1] += 1;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &f in self.features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[(r, f)], self.labels[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0usize; self.n_classes];
            for i in 0..n - 1 {
                left[sorted[i].1 - 1] += 1;
                let nl = i + 1;
                if sorted[i].0 == sorted[i + 1].0 || nl < min_leaf || n - nl < min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let imp = scaled_gini(&left, nl) + scaled_gini(&right, n - nl);
                if best.is_none_or(|(b, _, _)| imp < b - 1e-9) {
                    let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
                    best = Some((imp, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn majority_from_counts(counts: &[usize]) -> usize {
    let mut best = 0;
    for k in 1..counts.len() {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    best + 1
}

/// Most frequent label; ties go to the smallest label.
pub fn majority_vote(votes: &[usize]) -> Result<usize> {
    let max = *votes.iter().max().ok_or_else(|| Error::invalid("majority vote over no votes"))?;
    let mut counts = vec![0usize; max + 1];
    for &v in votes {
        counts[v] += 1;
    }
    let mut best = 0;
    for k in 1..counts.len() {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    Ok(best)
}

/// `(1 - 1/n)^n`, the chance that a given row is left out of a bootstrap
/// sample of size `n`.
pub fn oob_probability(n: usize) -> f64 {
    assert!(n >= 1, "bootstrap size must be positive");
    (1.0 - 1.0 / n as f64).powi(n as i32)
}

/// How many columns each base learner sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceMode {
    Fixed(usize),
    /// `floor(sqrt(p))`, at least one.
    Sqrt,
    /// Drawn uniformly from `1..=p-1` for every learner.
    UniformRandom,
    /// Every column: plain bagging.
    All,
}

impl SubspaceMode {
    pub fn describe(&self) -> String {
        match self {
            SubspaceMode::Fixed(d) => format!("fixed:{d}"),
            SubspaceMode::Sqrt => "sqrt".into(),
            SubspaceMode::UniformRandom => "uniform".into(),
            SubspaceMode::All => "all".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sqrt" => Some(SubspaceMode::Sqrt),
            "uniform" => Some(SubspaceMode::UniformRandom),
            "all" => Some(SubspaceMode::All),
            _ => s.strip_prefix("fixed:").and_then(|d| d.trim().parse().ok()).map(SubspaceMode::Fixed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub subspace: SubspaceMode,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 500, subspace: SubspaceMode::Sqrt, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub config: ForestConfig,
    pub tree_config: TreeConfig,
    pub n_classes: usize,
    pub n_features: usize,
}

pub fn rsl_fit(train: &LabeledDataset, cfg: &ForestConfig, tree_cfg: &TreeConfig) -> Result<ForestModel> {
    tree_cfg.validate()?;
    if cfg.n_trees == 0 {
        return Err(Error::invalid("a forest needs at least one tree"));
    }
    let (n, p) = (train.n_rows(), train.n_features());
    match cfg.subspace {
        SubspaceMode::All => {}
        _ if p < 2 => return Err(Error::invalid("feature subsetting needs p >= 2")),
        SubspaceMode::Fixed(d) if d == 0 || d >= p => {
            return Err(Error::invalid(format!("subspace size d = {d} must satisfy 1 <= d < p = {p}")))
        }
        _ => {}
    }
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, b as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let d = match cfg.subspace {
                SubspaceMode::Fixed(d) => d,
                SubspaceMode::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
                SubspaceMode::UniformRandom => rng.random_range(1..p),
                SubspaceMode::All => p,
            };
            let mut features = sample(&mut rng, p, d).into_vec();
            features.sort_unstable();
            grow(train.features(), train.labels(), train.n_classes(), rows, features, tree_cfg)
        })
        .collect();
    Ok(ForestModel { trees, config: *cfg, tree_config: *tree_cfg, n_classes: train.n_classes(), n_features: p })
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        crate::classifiers::check_dim(self.n_features, x)?;
        let votes: Vec<usize> = self.trees.iter().map(|t| t.predict(x)).collect();
        majority_vote(&votes)
    }

    /// Versioned little-endian encoding of every tree, for comparing fits.
    pub fn to_bytes(&self) -> Vec<u8> {
        const VERSION: u8 = 1;
        let mut out = vec![VERSION];
        let put = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        put(&mut out, self.n_classes as u64);
        put(&mut out, self.n_features as u64);
        put(&mut out, self.trees.len() as u64);
        for t in &self.trees {
            put(&mut out, t.feature_subset.len() as u64);
            for &f in &t.feature_subset {
                put(&mut out, f as u64);
            }
            put(&mut out, t.nodes.len() as u64);
            for node in &t.nodes {
                match *node {
                    Node::Leaf { label } => {
                        out.push(0);
                        put(&mut out, label as u64);
                    }
                    Node::Split { feature, threshold, left, right } => {
                        out.push(1);
                        put(&mut out, feature as u64);
                        out.extend_from_slice(&threshold.to_bits().to_le_bytes());
                        put(&mut out, left as u64);
                        put(&mut out, right as u64);
                    }
                }
            }
        }
        out
    }
}

impl crate::classifiers::Classifier for ForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        ForestModel::predict(self, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SimDesign};
    use proptest::prelude::*;

    fn ds(rows: &[[f64; 2]], labels: &[usize]) -> LabeledDataset {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        LabeledDataset::new("t", DMatrix::from_row_slice(rows.len(), 2, &flat), labels.to_vec()).unwrap()
    }

    #[test]
    fn separable_line_needs_one_split() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let d = LabeledDataset::new("t", x, vec![1, 1, 2, 2]).unwrap();
        let t = tree_fit(&d, &TreeConfig::default(), &[0]).unwrap();
        assert_eq!(t.n_splits(), 1);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 2.5, left: 1, right: 2 });
        for i in 0..4 {
            assert_eq!(t.predict(&d.row(i)), d.labels()[i]);
        }
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let d = ds(&[[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]], &[1, 1, 1]);
        let t = tree_fit(&d, &TreeConfig::default(), &[0, 1]).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { label: 1 }]);
    }

    fn depth_one_best_accuracy(d: &LabeledDataset) -> f64 {
        // exhaustive oracle over every (feature, threshold, leaf labels)
        let n = d.n_rows();
        let mut best = 0.0f64;
        for f in 0..d.n_features() {
            let mut vals: Vec<f64> = (0..n).map(|i| d.features()[(i, f)]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                for ll in 1..=d.n_classes() {
                    for rl in 1..=d.n_classes() {
                        let ok = (0..n)
                            .filter(|&i| (if d.features()[(i, f)] <= t { ll } else { rl }) == d.labels()[i])
                            .count();
                        best = best.max(ok as f64 / n as f64);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = ds(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]], &[1, 1, 2, 2]);
        assert!(depth_one_best_accuracy(&d) <= 0.5);
        let t = tree_fit(&d, &TreeConfig::default(), &[0, 1]).unwrap();
        assert_eq!(t.depth(), 2);
        for i in 0..4 {
            assert_eq!(t.predict(&d.row(i)), d.labels()[i]);
        }
    }

    #[test]
    fn depth_limit_and_min_leaf() {
        let d = ds(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]], &[1, 1, 2, 2]);
        let t = tree_fit(&d, &TreeConfig { max_depth: 1, min_leaf: 1 }, &[0, 1]).unwrap();
        assert_eq!(t.depth(), 1);
        let t = tree_fit(&d, &TreeConfig { max_depth: 5, min_leaf: 3 }, &[0, 1]).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!(tree_fit(&d, &TreeConfig::default(), &[]).is_err());
    }

    #[test]
    fn majority_vote_examples() {
        assert_eq!(majority_vote(&[1, 1, 2]).unwrap(), 1);
        assert_eq!(majority_vote(&[1, 2]).unwrap(), 1);
        assert_eq!(majority_vote(&[3, 3, 2, 2, 2]).unwrap(), 2);
        assert!(majority_vote(&[]).is_err());
    }

    #[test]
    fn oob_values() {
        assert_eq!(oob_probability(1), 0.0);
        assert_eq!(oob_probability(2), 0.25);
        for n in [50, 100, 1000, 10_000] {
            assert!((oob_probability(n) - (-1.0f64).exp()).abs() < 0.01);
        }
    }

    #[test]
    fn single_bagged_tree_matches_forest() {
        let data = generate(&SimDesign::default_layout(vec![20, 20], 4, 0.3, 0.0, 1.0, 3)).unwrap();
        let cfg = ForestConfig { n_trees: 1, subspace: SubspaceMode::All, seed: 5 };
        let f = rsl_fit(&data, &cfg, &TreeConfig::default()).unwrap();
        for i in 0..data.n_rows() {
            let x = data.row(i);
            assert_eq!(f.predict(&x).unwrap(), f.trees[0].predict(&x));
        }
    }

    #[test]
    fn constant_labels_predict_that_label() {
        let x = DMatrix::from_fn(10, 3, |i, j| (i * 7 + j * 3) as f64 % 5.0);
        let d = LabeledDataset::with_classes("t", x, vec![2; 10], 2);
        assert!(d.is_err());
        let x = DMatrix::from_fn(10, 3, |i, j| (i * 7 + j * 3) as f64 % 5.0);
        let d = LabeledDataset::new("t", x, vec![1; 10]).unwrap();
        let f = rsl_fit(&d, &ForestConfig { n_trees: 20, ..Default::default() }, &TreeConfig::default()).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
        assert_eq!(f.predict(&[9.0, 9.0, 9.0]).unwrap(), 1);
    }

    #[test]
    fn refit_is_byte_identical() {
        let data = generate(&SimDesign::default_layout(vec![15, 15], 9, 0.5, 0.1, 9.0, 1)).unwrap();
        let cfg = ForestConfig { n_trees: 50, subspace: SubspaceMode::Sqrt, seed: 17 };
        let a = rsl_fit(&data, &cfg, &TreeConfig::default()).unwrap();
        let b = rsl_fit(&data, &cfg, &TreeConfig::default()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = rsl_fit(&data, &ForestConfig { seed: 18, ..cfg }, &TreeConfig::default()).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn subsets_are_legal() {
        let data = generate(&SimDesign::default_layout(vec![15, 15], 12, 0.5, 0.0, 1.0, 1)).unwrap();
        for mode in [SubspaceMode::Sqrt, SubspaceMode::Fixed(5), SubspaceMode::UniformRandom] {
            let f = rsl_fit(&data, &ForestConfig { n_trees: 30, subspace: mode, seed: 2 }, &TreeConfig::default()).unwrap();
            for t in &f.trees {
                let mut s = t.feature_subset.clone();
                s.dedup();
                assert_eq!(s.len(), t.feature_subset.len());
                assert!(!s.is_empty() && s.len() < 12);
                if let SubspaceMode::Fixed(d) = mode {
                    assert_eq!(s.len(), d);
                }
                if mode == SubspaceMode::Sqrt {
                    assert_eq!(s.len(), 3);
                }
                for node in &t.nodes {
                    if let Node::Split { feature, .. } = node {
                        assert!(t.feature_subset.contains(feature));
                    }
                }
            }
        }
        assert!(rsl_fit(&data, &ForestConfig { subspace: SubspaceMode::Fixed(12), ..Default::default() }, &TreeConfig::default()).is_err());
    }

    #[test]
    fn tree_order_does_not_change_votes() {
        let data = generate(&SimDesign::default_layout(vec![15, 15, 15], 6, 0.2, 0.0, 1.0, 4)).unwrap();
        let f = rsl_fit(&data, &ForestConfig { n_trees: 31, subspace: SubspaceMode::Sqrt, seed: 3 }, &TreeConfig::default()).unwrap();
        let mut rev = f.clone();
        rev.trees.reverse();
        for i in 0..data.n_rows() {
            assert_eq!(f.predict(&data.row(i)).unwrap(), rev.predict(&data.row(i)).unwrap());
        }
    }

    #[test]
    fn separable_gaussians_are_learned() {
        let d = SimDesign {
            class_means: crate::synth::shifted_means(2, 10, 5.0),
            ..SimDesign::default_layout(vec![100, 100], 10, 0.0, 0.0, 1.0, 6)
        };
        let train = generate(&d).unwrap();
        let test = generate(&d.with_seed(7)).unwrap();
        let f = rsl_fit(&train, &ForestConfig { n_trees: 100, ..Default::default() }, &TreeConfig::default()).unwrap();
        let acc = (0..test.n_rows()).filter(|&i| f.predict(&test.row(i)).unwrap() == test.labels()[i]).count() as f64
            / test.n_rows() as f64;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn bootstrap_coverage_matches_theory() {
        let n = 100;
        let mut rng = rng_from_seed(12);
        let mut total = 0.0;
        for _ in 0..1000 {
            let mut seen = vec![false; n];
            for _ in 0..n {
                seen[rand::Rng::random_range(&mut rng, 0..n)] = true;
            }
            total += seen.iter().filter(|&&s| s).count() as f64 / n as f64;
        }
        assert!((total / 1000.0 - (1.0 - oob_probability(n))).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn stump_matches_exhaustive_gini(
            pts in proptest::collection::vec((0u8..6, 0u8..6, 1usize..4), 4..14)
        ) {
            let labels: Vec<usize> = pts.iter().map(|t| t.2).collect();
            prop_assume!(labels.contains(&1));
            let g = *labels.iter().max().unwrap();
            prop_assume!((1..=g).all(|k| labels.contains(&k)));
            let flat: Vec<f64> = pts.iter().flat_map(|t| [t.0 as f64, t.1 as f64]).collect();
            let d = LabeledDataset::new("p", DMatrix::from_row_slice(pts.len(), 2, &flat), labels.clone()).unwrap();
            let t = tree_fit(&d, &TreeConfig { max_depth: 1, min_leaf: 1 }, &[0, 1]).unwrap();

            // oracle: enumerate every split, Gini computed from scratch
            let n = pts.len();
            let gini = |idx: &[usize]| -> f64 {
                if idx.is_empty() { return 0.0; }
                let m = idx.len() as f64;
                1.0 - (1..=g).map(|k| { let c = idx.iter().filter(|&&i| labels[i] == k).count() as f64 / m; c * c }).sum::<f64>()
            };
            let mut best: Option<(f64, usize, f64)> = None;
            for f in 0..2 {
                let mut vals: Vec<f64> = (0..n).map(|i| flat[2 * i + f]).collect();
                vals.sort_by(f64::total_cmp);
                vals.dedup();
                for w in vals.windows(2) {
                    let th = 0.5 * (w[0] + w[1]);
                    let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| flat[2 * i + f] <= th);
                    let imp = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n as f64;
                    if best.is_none_or(|b| imp < b.0 - 1e-12) {
                        best = Some((imp, f, th));
                    }
                }
            }
            let pure = labels.iter().all(|&y| y == labels[0]);
            match (best, &t.nodes[0]) {
                (Some((_, f, th)), Node::Split { feature, threshold, .. }) if !pure => {
                    prop_assert_eq!(*feature, f);
                    prop_assert_eq!(*threshold, th);
                }
                (None, Node::Leaf { .. }) => {}
                (_, Node::Leaf { .. }) if pure => {}
                (b, node) => prop_assert!(false, "oracle {:?} tree {:?}", b, node),
            }
        }
    }
}
