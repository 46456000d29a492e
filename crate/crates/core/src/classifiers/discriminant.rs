//! Linear discriminant rules: classical LDA, MCD-based LDA ("Linda") and
//! diagonal discriminant analysis.
//!
//! All three score a point with
//!
//! ```text
//! δ_k(x) = -½ (x - μ_k)ᵀ Σ⁻¹ (x - μ_k) + log π_k
//! ```
//!
//! and differ only in how `μ_k` and `Σ` are estimated.

use nalgebra::{DMatrix, DVector};

use super::{argmax_label, check_dim, Classifier};
use crate::dataset::{class_membership, LabeledDataset};
use crate::error::{Error, Result};
use crate::estimators::{
    default_h, log_det_spd, mcd_fast, pooled_cov, regularize, sample_mean_cov, symmetrize, RegularizationSpec,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMethod {
    Sample,
    Mcd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantModel {
    pub class_means: Vec<DVector<f64>>,
    /// Inverse of the shared (possibly regularized) covariance.
    pub precision: DMatrix<f64>,
    pub log_priors: Vec<f64>,
    pub covariance_method: CovarianceMethod,
    pub regularization: RegularizationSpec,
}

impl DiscriminantModel {
    /// Builds a model from means, a shared covariance and priors, inverting
    /// the covariance after regularization.
    pub fn from_parts(
        class_means: Vec<DVector<f64>>,
        covariance: &DMatrix<f64>,
        priors: &[f64],
        covariance_method: CovarianceMethod,
        regularization: RegularizationSpec,
    ) -> Result<Self> {
        let sigma = regularize(covariance, &regularization)?;
        let precision = invert_spd(&sigma, regularization)?;
        let total: f64 = priors.iter().sum();
        if priors.len() != class_means.len() || !(total > 0.0) || priors.iter().any(|&p| p <= 0.0) {
            return Err(Error::invalid("priors must be positive, one per class"));
        }
        Ok(Self {
            class_means,
            precision,
            log_priors: priors.iter().map(|p| (p / total).ln()).collect(),
            covariance_method,
            regularization,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    /// `δ_k(x)` for every class.
    pub fn discriminant_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.precision.nrows(), x)?;
        let x = DVector::from_column_slice(x);
        Ok(self
            .class_means
            .iter()
            .zip(&self.log_priors)
            .map(|(mu, lp)| {
                let d = &x - mu;
                -0.5 * d.dot(&(&self.precision * &d)) + lp
            })
            .collect())
    }
}

impl Classifier for DiscriminantModel {
    fn n_features(&self) -> usize {
        self.precision.nrows()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_label(&self.discriminant_scores(x)?))
    }
}

fn invert_spd(sigma: &DMatrix<f64>, reg: RegularizationSpec) -> Result<DMatrix<f64>> {
    let hint = if reg == RegularizationSpec::None { "; use ridge or convex regularization" } else { "" };
    if log_det_spd(sigma).is_none() {
        return Err(Error::SingularCovariance(format!("shared covariance is not invertible{hint}")));
    }
    let mut inv = sigma.clone().cholesky().expect("checked positive definite").inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Classical LDA: class means, pooled covariance, observed class proportions.
pub fn lda_fit(train: &LabeledDataset, reg: RegularizationSpec) -> Result<DiscriminantModel> {
    reg.validate()?;
    let (n, p) = (train.n_rows(), train.n_features());
    let g = train.n_classes();
    if reg == RegularizationSpec::None && n.saturating_sub(g) < p {
        return Err(Error::SingularCovariance(format!(
            "pooled covariance has rank at most n - G = {} < p = {p}; use ridge or convex regularization",
            n.saturating_sub(g)
        )));
    }
    let mut means = Vec::with_capacity(g);
    let mut groups = Vec::with_capacity(g);
    for k in 1..=g {
        let xk = train.class_matrix(k);
        let n_k = xk.nrows();
        if n_k < 2 {
            // a singleton contributes its mean but no scatter
            means.push(xk.row_mean().transpose());
            groups.push((n_k, DMatrix::zeros(p, p)));
            continue;
        }
        let est = sample_mean_cov(&xk)?;
        means.push(est.mu);
        groups.push((n_k, est.sigma));
    }
    let pooled = pooled_cov(&groups)?;
    let priors = class_membership(train).proportions;
    DiscriminantModel::from_parts(means, &pooled, &priors, CovarianceMethod::Sample, reg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HRule {
    /// `default_h(n_k, p)` per class.
    Default,
    /// The same subset size for every class.
    Explicit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LindaConfig {
    pub h_rule: HRule,
    pub regularization: RegularizationSpec,
    pub n_starts: usize,
    pub seed: u64,
}

impl Default for LindaConfig {
    fn default() -> Self {
        Self { h_rule: HRule::Default, regularization: RegularizationSpec::None, n_starts: 500, seed: 0 }
    }
}

/// Robust LDA: per-class FAST-MCD location and scatter, pooled with weights
/// `h_k - 1`; priors stay the observed class proportions.
pub fn linda_fit(train: &LabeledDataset, cfg: &LindaConfig) -> Result<DiscriminantModel> {
    cfg.regularization.validate()?;
    let p = train.n_features();
    let g = train.n_classes();
    let counts = train.class_counts();
    let hs: Vec<usize> = counts
        .iter()
        .map(|&n_k| match cfg.h_rule {
            HRule::Default => default_h(n_k, p),
            HRule::Explicit(h) => h,
        })
        .collect();
    // check feasibility of every class before any expensive work
    for &h in &hs {
        if p >= h {
            return Err(Error::McdInfeasible { p, h });
        }
    }
    let mut means = Vec::with_capacity(g);
    let mut groups = Vec::with_capacity(g);
    for k in 1..=g {
        let est = mcd_fast(&train.class_matrix(k), hs[k - 1], cfg.n_starts, derive_seed(cfg.seed, k as u64))?;
        means.push(est.mu);
        groups.push((hs[k - 1], est.sigma));
    }
    let pooled = pooled_cov(&groups)?;
    let priors = class_membership(train).proportions;
    DiscriminantModel::from_parts(means, &pooled, &priors, CovarianceMethod::Mcd, cfg.regularization)
}

/// Diagonal discriminant analysis: pooled per-feature variances.
#[derive(Debug, Clone, PartialEq)]
pub struct DdaModel {
    pub class_means: Vec<DVector<f64>>,
    pub pooled_variances: DVector<f64>,
    pub log_priors: Vec<f64>,
    /// Set when some variance had to be floored.
    pub degenerate: bool,
}

pub const VARIANCE_FLOOR: f64 = 1e-12;

pub fn dda_fit(train: &LabeledDataset) -> Result<DdaModel> {
    let (n, p) = (train.n_rows(), train.n_features());
    let g = train.n_classes();
    if n <= g {
        return Err(Error::invalid(format!("DDA needs more rows ({n}) than classes ({g})")));
    }
    let x = train.features();
    let counts = train.class_counts();
    let mut means = vec![DVector::zeros(p); g];
    for (i, &y) in train.labels().iter().enumerate() {
        means[y - 1] += x.row(i).transpose();
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        *m /= c as f64;
    }
    let mut var = DVector::zeros(p);
    for (i, &y) in train.labels().iter().enumerate() {
        let d = x.row(i).transpose() - &means[y - 1];
        var += d.component_mul(&d);
    }
    var /= (n - g) as f64;
    let mut degenerate = false;
    for v in var.iter_mut() {
        if *v < VARIANCE_FLOOR {
            *v = VARIANCE_FLOOR;
            degenerate = true;
        }
    }
    let log_priors = counts.iter().map(|&c| (c as f64 / n as f64).ln()).collect();
    Ok(DdaModel { class_means: means, pooled_variances: var, log_priors, degenerate })
}

impl DdaModel {
    pub fn discriminant_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.pooled_variances.len(), x)?;
        Ok(self
            .class_means
            .iter()
            .zip(&self.log_priors)
            .map(|(mu, lp)| {
                let q: f64 = x
                    .iter()
                    .zip(mu.iter())
                    .zip(self.pooled_variances.iter())
                    .map(|((xi, mi), v)| (xi - mi).powi(2) / v)
                    .sum();
                -0.5 * q + lp
            })
            .collect())
    }
}

impl Classifier for DdaModel {
    fn n_features(&self) -> usize {
        self.pooled_variances.len()
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax_label(&self.discriminant_scores(x)?))
    }
}
