//! Projection-pursuit discrimination.
//!
//! For every unordered pair of classes `(j, k)` a unit direction `a` is
//! chosen to maximize the separation index
//!
//! ```text
//! I(a) = |m_j(aᵀX_j) - m_k(aᵀX_k)| / (s_j(aᵀX_j) + s_k(aᵀX_k))
//! ```
//!
//! where `(m, s)` is one of the univariate location/scale estimators. The
//! search scores a fixed candidate set (robust center difference, seeded
//! random directions, and cross-class data differences when `n` is small)
//! and then refines the winner by random coordinate perturbations whose
//! step halves on every failure. Prediction is a pairwise majority vote.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{check_dim, Classifier};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::estimators::{univariate_with, UnivariateConfig, UnivariateKind};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PPSearchConfig {
    pub n_random: usize,
    /// Cross-class difference directions are used when `n` is at most this.
    pub pairwise_max_n: usize,
    pub refine_rounds: usize,
    pub initial_step: f64,
    pub seed: u64,
    pub univariate: UnivariateConfig,
}

impl Default for PPSearchConfig {
    fn default() -> Self {
        Self {
            n_random: 200,
            pairwise_max_n: 100,
            refine_rounds: 50,
            initial_step: 0.1,
            seed: 0,
            univariate: UnivariateConfig::default(),
        }
    }
}

/// Separation below this counts as "no separation".
const MIN_INDEX: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PPPair {
    pub class_a: usize,
    pub class_b: usize,
    pub direction: DVector<f64>,
    pub cutoff: f64,
    /// `+1` when projections above the cutoff belong to `class_a`, `-1` when
    /// they belong to `class_b`, `0` when the pair could not be separated.
    pub orientation: i8,
    pub index: f64,
    /// `s_a + s_b` at the chosen direction, used to standardize margins.
    pub scale_sum: f64,
    /// Vote cast when the pair is unseparated: the larger class.
    pub prior_class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PPModel {
    pub pairs: Vec<PPPair>,
    pub estimator_kind: UnivariateKind,
    pub n_classes: usize,
    pub n_features: usize,
}

pub fn pp_fit(train: &LabeledDataset, kind: UnivariateKind) -> Result<PPModel> {
    pp_fit_with(train, kind, &PPSearchConfig::default())
}

pub fn pp_fit_with(train: &LabeledDataset, kind: UnivariateKind, cfg: &PPSearchConfig) -> Result<PPModel> {
    let g = train.n_classes();
    if g < 2 {
        return Err(Error::TooFewClasses);
    }
    let counts = train.class_counts();
    if let Some(k) = counts.iter().position(|&c| c < 3) {
        return Err(Error::ClassTooSmall { class: k + 1, count: counts[k], required: 3 });
    }
    let classes: Vec<DMatrix<f64>> = (1..=g).map(|k| train.class_matrix(k)).collect();
    let pair_list: Vec<(usize, usize)> = (1..=g).flat_map(|j| ((j + 1)..=g).map(move |k| (j, k))).collect();
    let use_pairwise = train.n_rows() <= cfg.pairwise_max_n;

    let pairs = pair_list
        .par_iter()
        .enumerate()
        .map(|(idx, &(j, k))| {
            let search = PairSearch {
                xa: &classes[j - 1],
                xb: &classes[k - 1],
                kind,
                cfg,
                seed: derive_seed(cfg.seed, idx as u64),
            };
            let prior_class = if counts[k - 1] > counts[j - 1] { k } else { j };
            search.run(j, k, use_pairwise, prior_class)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PPModel { pairs, estimator_kind: kind, n_classes: g, n_features: train.n_features() })
}

struct PairSearch<'a> {
    xa: &'a DMatrix<f64>,
    xb: &'a DMatrix<f64>,
    kind: UnivariateKind,
    cfg: &'a PPSearchConfig,
    seed: u64,
}

struct Scored {
    index: f64,
    loc_a: f64,
    loc_b: f64,
    scale_a: f64,
    scale_b: f64,
}

impl PairSearch<'_> {
    /// Index of a projection; `None` when both scales vanish.
    fn score(&self, proj: &[f64]) -> Option<Scored> {
        let na = self.xa.nrows();
        let ea = univariate_with(&proj[..na], self.kind, &self.cfg.univariate).ok()?;
        let eb = univariate_with(&proj[na..], self.kind, &self.cfg.univariate).ok()?;
        let denom = ea.scale + eb.scale;
        if !(denom > 0.0) {
            return None;
        }
        Some(Scored {
            index: (ea.location - eb.location).abs() / denom,
            loc_a: ea.location,
            loc_b: eb.location,
            scale_a: ea.scale,
            scale_b: eb.scale,
        })
    }

    fn run(&self, class_a: usize, class_b: usize, use_pairwise: bool, prior_class: usize) -> Result<PPPair> {
        let p = self.xa.ncols();
        let na = self.xa.nrows();
        let z = stack_rows(self.xa, self.xb);
        let m = z.nrows();
        let mut rng = rng_from_seed(self.seed);

        // (direction, projections, score) of the best candidate so far
        let mut best: Option<(DVector<f64>, Vec<f64>, Scored)> = None;
        let consider = |dir: DVector<f64>, proj: Vec<f64>, best: &mut Option<(DVector<f64>, Vec<f64>, Scored)>| {
            if let Some(s) = self.score(&proj) {
                if best.as_ref().is_none_or(|b| s.index > b.2.index) {
                    *best = Some((dir, proj, s));
                }
            }
        };

        // robust center difference
        let center_diff = DVector::from_fn(p, |c, _| {
            let la = univariate_with(self.xa.column(c).as_slice(), self.kind, &self.cfg.univariate);
            let lb = univariate_with(self.xb.column(c).as_slice(), self.kind, &self.cfg.univariate);
            match (la, lb) {
                (Ok(a), Ok(b)) => a.location - b.location,
                _ => 0.0,
            }
        });
        if let Some(dir) = normalized(center_diff) {
            let proj = (&z * &dir).as_slice().to_vec();
            consider(dir, proj, &mut best);
        }

        // seeded random directions
        if self.cfg.n_random > 0 {
            let dirs = DMatrix::from_fn(p, self.cfg.n_random, |_, _| rng.sample::<f64, _>(StandardNormal));
            let projs = &z * &dirs;
            for c in 0..self.cfg.n_random {
                if let Some(dir) = normalized(dirs.column(c).into_owned()) {
                    let norm = dirs.column(c).norm();
                    let proj = projs.column(c).iter().map(|v| v / norm).collect();
                    consider(dir, proj, &mut best);
                }
            }
        }

        // cross-class data differences, projected through the Gram matrix
        if use_pairwise {
            let gram = &z * z.transpose();
            for ia in 0..na {
                for ib in na..m {
                    let proj: Vec<f64> = (0..m).map(|r| gram[(r, ia)] - gram[(r, ib)]).collect();
                    let diff = (z.row(ia) - z.row(ib)).transpose();
                    if let Some(dir) = normalized(diff) {
                        let norm = (z.row(ia) - z.row(ib)).norm();
                        let proj = proj.into_iter().map(|v| v / norm).collect();
                        consider(dir, proj, &mut best);
                    }
                }
            }
        }

        let (mut dir, mut proj, mut scored) = best.ok_or_else(|| {
            Error::Degenerate(format!(
                "classes {class_a} and {class_b} have zero scale along every candidate direction"
            ))
        })?;

        // coordinate-wise refinement
        let mut step = self.cfg.initial_step;
        for _ in 0..self.cfg.refine_rounds {
            let c = rng.random_range(0..p);
            let col = z.column(c);
            let mut improved: Option<(f64, Vec<f64>, Scored)> = None;
            for sign in [1.0, -1.0] {
                let delta = sign * step;
                let trial: Vec<f64> = proj.iter().zip(col.iter()).map(|(v, x)| v + delta * x).collect();
                if let Some(s) = self.score(&trial) {
                    let target = improved.as_ref().map_or(scored.index, |b| b.2.index);
                    if s.index > target {
                        improved = Some((delta, trial, s));
                    }
                }
            }
            match improved {
                Some((delta, trial, _)) => {
                    dir[c] += delta;
                    let norm = dir.norm();
                    dir /= norm;
                    proj = trial.into_iter().map(|v| v / norm).collect();
                    scored = self.score(&proj).expect("a rescaled nondegenerate projection stays nondegenerate");
                }
                None => step *= 0.5,
            }
        }

        let scale_sum = scored.scale_a + scored.scale_b;
        let cutoff = (scored.loc_a * scored.scale_b + scored.loc_b * scored.scale_a) / scale_sum;
        let orientation = if scored.index <= MIN_INDEX {
            0
        } else if scored.loc_a > scored.loc_b {
            1
        } else {
            -1
        };
        Ok(PPPair {
            class_a,
            class_b,
            direction: dir,
            cutoff,
            orientation,
            index: scored.index,
            scale_sum,
            prior_class,
        })
    }
}

fn stack_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    z.rows_mut(0, a.nrows()).copy_from(a);
    z.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    z
}

fn normalized(v: DVector<f64>) -> Option<DVector<f64>> {
    let n = v.norm();
    (n > 0.0 && n.is_finite()).then(|| v / n)
}

impl PPModel {
    /// Vote counts and standardized margin sums per class.
    pub fn votes(&self, x: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
        check_dim(self.n_features, x)?;
        let mut votes = vec![0usize; self.n_classes];
        let mut margins = vec![0.0; self.n_classes];
        for pair in &self.pairs {
            let v: f64 = pair.direction.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - pair.cutoff;
            let signed = v * pair.orientation as f64;
            let (winner, margin) = if pair.orientation == 0 {
                (pair.prior_class, 0.0)
            } else if signed > 0.0 {
                (pair.class_a, v.abs() / pair.scale_sum)
            } else if signed < 0.0 {
                (pair.class_b, v.abs() / pair.scale_sum)
            } else {
                (pair.class_a.min(pair.class_b), 0.0)
            };
            votes[winner - 1] += 1;
            margins[winner - 1] += margin;
        }
        Ok((votes, margins))
    }
}

impl Classifier for PPModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Most votes, then largest margin sum, then smallest label.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        let (votes, margins) = self.votes(x)?;
        let mut best = 0;
        for k in 1..self.n_classes {
            if votes[k] > votes[best] || (votes[k] == votes[best] && margins[k] > margins[best]) {
                best = k;
            }
        }
        Ok(best + 1)
    }
}
