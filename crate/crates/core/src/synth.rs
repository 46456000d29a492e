//! Synthetic data: covariance builders, Gaussian sampling and the
//! ε-contaminated class-conditional mixture
//!
//! ```text
//! p(x | k) = (1 - ε) N(μ_k, Σ) + ε N(μ_k + η, κ Σ)
//! ```

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    /// `τ[(1 - ρ) I + ρ 11ᵀ]`
    Equicorrelation,
    /// `τ ρ^|i - j|`
    Ar1,
}

impl CovKind {
    pub fn name(self) -> &'static str {
        match self {
            CovKind::Equicorrelation => "equicorrelation",
            CovKind::Ar1 => "ar1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "equicorrelation" => Some(CovKind::Equicorrelation),
            "ar1" => Some(CovKind::Ar1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovSpec {
    pub kind: CovKind,
    pub tau: f64,
    pub rho: f64,
    pub p: usize,
}

impl CovSpec {
    pub fn equicorrelation(p: usize, rho: f64) -> Self {
        Self { kind: CovKind::Equicorrelation, tau: 1.0, rho, p }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("covariance dimension must be positive"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be positive, got {}", self.tau)));
        }
        let ok = match self.kind {
            CovKind::Equicorrelation => (0.0..1.0).contains(&self.rho),
            CovKind::Ar1 => self.rho > -1.0 && self.rho < 1.0,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "rho = {} is outside the admissible range for {}",
                self.rho,
                self.kind.name()
            )));
        }
        Ok(())
    }
}

/// Builds `Σ(τ, ρ)` and confirms it is positive definite.
pub fn build_cov(spec: &CovSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let CovSpec { kind, tau, rho, p } = *spec;
    let sigma = match kind {
        CovKind::Equicorrelation => DMatrix::from_fn(p, p, |i, j| if i == j { tau } else { tau * rho }),
        CovKind::Ar1 => DMatrix::from_fn(p, p, |i, j| tau * rho.powi(i.abs_diff(j) as i32)),
    };
    if sigma.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!("{} with rho = {rho}", kind.name())));
    }
    Ok(sigma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    /// Location shift of the contaminating component.
    pub eta: DVector<f64>,
    /// Scatter inflation of the contaminating component.
    pub kappa: f64,
}

impl ContaminationSpec {
    /// `η = c 1_p`.
    pub fn constant_shift(epsilon: f64, shift: f64, kappa: f64, p: usize) -> Self {
        Self { epsilon, eta: DVector::from_element(p, shift), kappa }
    }

    pub fn none(p: usize) -> Self {
        Self::constant_shift(0.0, 0.0, 1.0, p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon = {} outside [0, 1]", self.epsilon)));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa = {} must be >= 1", self.kappa)));
        }
        if self.eta.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("eta must be finite"));
        }
        Ok(())
    }
}

/// Default class separation along the first coordinate.
pub const DEFAULT_DELTA: f64 = 2.0;
/// Default constant location shift of contaminated rows.
pub const DEFAULT_ETA: f64 = 3.0;

/// Everything needed to regenerate one synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n_classes: usize,
    pub p: usize,
    pub n_per_class: Vec<usize>,
    pub class_means: Vec<DVector<f64>>,
    pub cov: CovSpec,
    pub contamination: ContaminationSpec,
    pub seed: u64,
}

impl SimDesign {
    /// The default layout: `μ_k = (k - 1) δ e₁` with `δ = 2`, equicorrelated
    /// `Σ` with `τ = 1`, and `η = 3·1_p`.
    pub fn default_layout(n_per_class: Vec<usize>, p: usize, rho: f64, epsilon: f64, kappa: f64, seed: u64) -> Self {
        let n_classes = n_per_class.len();
        Self {
            n_classes,
            p,
            class_means: shifted_means(n_classes, p, DEFAULT_DELTA),
            n_per_class,
            cov: CovSpec::equicorrelation(p, rho),
            contamination: ContaminationSpec::constant_shift(epsilon, DEFAULT_ETA, kappa, p),
            seed,
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_per_class.iter().sum()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::invalid(format!("a design needs G >= 2, got {}", self.n_classes)));
        }
        if self.p == 0 {
            return Err(Error::invalid("a design needs p >= 1"));
        }
        if self.n_per_class.len() != self.n_classes || self.class_means.len() != self.n_classes {
            return Err(Error::invalid("n_per_class and class_means need one entry per class"));
        }
        if let Some(k) = self.n_per_class.iter().position(|&n| n < 2) {
            return Err(Error::ClassTooSmall { class: k + 1, count: self.n_per_class[k], required: 2 });
        }
        for mu in &self.class_means {
            if mu.len() != self.p {
                return Err(Error::DimensionMismatch { expected: self.p, found: mu.len() });
            }
        }
        if self.cov.p != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: self.cov.p });
        }
        if self.contamination.eta.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, found: self.contamination.eta.len() });
        }
        self.cov.validate()?;
        self.contamination.validate()
    }
}

/// `μ_k = (k - 1) δ e₁`.
pub fn shifted_means(n_classes: usize, p: usize, delta: f64) -> Vec<DVector<f64>> {
    (0..n_classes)
        .map(|k| {
            let mut m = DVector::zeros(p);
            m[0] = k as f64 * delta;
            m
        })
        .collect()
}

fn standard_normal_matrix(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    // fill row by row so the stream does not depend on storage order
    let mut z = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            z[(i, j)] = rng.sample(StandardNormal);
        }
    }
    z
}

/// `n` i.i.d. rows `μ + L z` where `L Lᵀ = Σ`.
pub fn sample_mvn(mu: &DVector<f64>, sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = mu.len();
    if sigma.shape() != (p, p) {
        return Err(Error::DimensionMismatch { expected: p, found: sigma.nrows() });
    }
    let l = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("sampling covariance".into()))?
        .unpack();
    let mut rng = rng_from_seed(seed);
    let mut x = standard_normal_matrix(n, p, &mut rng) * l.transpose();
    for mut row in x.row_iter_mut() {
        row += mu.transpose();
    }
    Ok(x)
}

/// Rows drawn from one class of a design, with contamination flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedSample {
    pub rows: DMatrix<f64>,
    pub contaminated: Vec<bool>,
}

/// A validated design with its covariance factor computed once.
#[derive(Debug, Clone)]
pub struct DesignSampler {
    design: SimDesign,
    factor_t: DMatrix<f64>,
}

impl DesignSampler {
    pub fn new(design: &SimDesign) -> Result<Self> {
        design.validate()?;
        let sigma = build_cov(&design.cov)?;
        let l = sigma
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("design covariance".into()))?
            .unpack();
        Ok(Self { design: design.clone(), factor_t: l.transpose() })
    }

    pub fn design(&self) -> &SimDesign {
        &self.design
    }

    /// Class `k` (1-based) under the design seed.
    pub fn sample_class(&self, k: usize) -> ContaminatedSample {
        self.sample_class_seeded(k, self.design.seed)
    }

    fn sample_class_seeded(&self, k: usize, seed: u64) -> ContaminatedSample {
        let d = &self.design;
        let n = d.n_per_class[k - 1];
        let mut rng = rng_from_seed(derive_seed(seed, (k - 1) as u64));
        let eps = d.contamination.epsilon;
        let contaminated: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < eps).collect();
        let mut rows = standard_normal_matrix(n, d.p, &mut rng) * &self.factor_t;
        let inflate = d.contamination.kappa.sqrt();
        let mu = &d.class_means[k - 1];
        let shifted = mu + &d.contamination.eta;
        for (i, &flag) in contaminated.iter().enumerate() {
            let mut row = rows.row_mut(i);
            if flag {
                row *= inflate;
                row += shifted.transpose();
            } else {
                row += mu.transpose();
            }
        }
        ContaminatedSample { rows, contaminated }
    }

    /// Generates the dataset under the design seed.
    pub fn generate(&self) -> LabeledDataset {
        self.generate_seeded(self.design.seed).0
    }

    /// Generates with an explicit seed, returning per-row contamination flags.
    pub fn generate_seeded(&self, seed: u64) -> (LabeledDataset, Vec<bool>) {
        let d = &self.design;
        let n = d.n_total();
        let mut blocks = Vec::with_capacity(d.n_classes);
        let mut labels = Vec::with_capacity(n);
        let mut flags = Vec::with_capacity(n);
        for k in 1..=d.n_classes {
            let s = self.sample_class_seeded(k, seed);
            labels.extend(std::iter::repeat_n(k, s.rows.nrows()));
            flags.extend(s.contaminated);
            blocks.push(s.rows);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(seed));

        let mut features = DMatrix::zeros(n, d.p);
        let block_rows: Vec<(usize, usize)> = blocks
            .iter()
            .enumerate()
            .flat_map(|(b, m)| (0..m.nrows()).map(move |i| (b, i)))
            .collect();
        for (dst, &src) in order.iter().enumerate() {
            let (b, i) = block_rows[src];
            features.row_mut(dst).copy_from(&blocks[b].row(i));
        }
        let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let flags: Vec<bool> = order.iter().map(|&i| flags[i]).collect();
        let name = design_name(d);
        let ds = LabeledDataset::with_classes(name, features, labels, d.n_classes)
            .expect("a validated design always yields a valid dataset");
        (ds, flags)
    }
}

/// Rows of class `k` (1-based) with contamination flags.
pub fn sample_contaminated_class(k: usize, design: &SimDesign) -> Result<ContaminatedSample> {
    if k == 0 || k > design.n_classes {
        return Err(Error::invalid(format!("class {k} outside 1..={}", design.n_classes)));
    }
    Ok(DesignSampler::new(design)?.sample_class(k))
}

pub fn generate(design: &SimDesign) -> Result<LabeledDataset> {
    Ok(DesignSampler::new(design)?.generate())
}

/// A short identifier for reports and file names.
pub fn design_name(d: &SimDesign) -> String {
    format!(
        "sim_G{}_p{}_rho{}_eps{}_kappa{}",
        d.n_classes, d.p, d.cov.rho, d.contamination.epsilon, d.contamination.kappa
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    #[test]
    fn equicorrelation_small_cases() {
        let s = build_cov(&CovSpec { kind: CovKind::Equicorrelation, tau: 2.0, rho: 0.0, p: 3 }).unwrap();
        assert_eq!(s, DMatrix::identity(3, 3) * 2.0);
        let s = build_cov(&CovSpec::equicorrelation(2, 0.25)).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 1.0]));
    }

    #[test]
    fn equicorrelation_eigenvalues_match_closed_form() {
        for &(p, rho, tau) in &[(4usize, 0.25, 1.0), (7, 0.75, 2.5), (10, 0.0, 1.0), (5, 0.9, 0.3)] {
            let s = build_cov(&CovSpec { kind: CovKind::Equicorrelation, tau, rho, p }).unwrap();
            let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            let top = tau * (1.0 + (p as f64 - 1.0) * rho);
            assert!((ev[p - 1] - top).abs() < 1e-9, "{ev:?}");
            for v in &ev[..p - 1] {
                assert!((v - tau * (1.0 - rho)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ar1_entries() {
        let s = build_cov(&CovSpec { kind: CovKind::Ar1, tau: 1.5, rho: -0.5, p: 4 }).unwrap();
        assert_eq!(s[(0, 3)], 1.5 * -0.125);
        assert_eq!(s[(2, 1)], 1.5 * -0.5);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn invalid_covariances() {
        assert!(build_cov(&CovSpec::equicorrelation(3, 1.0)).is_err());
        assert!(build_cov(&CovSpec::equicorrelation(3, -0.1)).is_err());
        assert!(build_cov(&CovSpec { kind: CovKind::Ar1, tau: 0.0, rho: 0.1, p: 3 }).is_err());
    }

    #[test]
    fn mvn_rejects_non_spd_and_is_deterministic() {
        let mu = DVector::zeros(2);
        assert!(sample_mvn(&mu, &DMatrix::zeros(2, 2), 5, 1).is_err());
        let s = DMatrix::identity(2, 2);
        assert_eq!(sample_mvn(&mu, &s, 20, 3).unwrap(), sample_mvn(&mu, &s, 20, 3).unwrap());
    }

    #[test]
    fn univariate_mean_within_clt_bound() {
        let n = 100_000;
        let x = sample_mvn(&DVector::zeros(1), &DMatrix::identity(1, 1), n, 77).unwrap();
        let mean = x.mean();
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "{mean}");
        assert!(mean.abs() < 0.02);
    }

    fn design(eps: f64, n: usize) -> SimDesign {
        SimDesign::default_layout(vec![n, n], 3, 0.25, eps, 9.0, 5)
    }

    #[test]
    fn contamination_endpoints() {
        let clean = sample_contaminated_class(1, &design(0.0, 50)).unwrap();
        assert!(clean.contaminated.iter().all(|f| !f));
        let dirty = sample_contaminated_class(1, &design(1.0, 50)).unwrap();
        assert!(dirty.contaminated.iter().all(|&f| f));
        // all rows come from the shifted component: mean near 3, well away from 0
        assert!(dirty.rows.column(1).mean() > 1.5);
    }

    #[test]
    fn contamination_rate_is_binomial() {
        let d = SimDesign::default_layout(vec![10_000, 2], 2, 0.0, 0.15, 25.0, 99);
        let s = sample_contaminated_class(1, &d).unwrap();
        let count = s.contaminated.iter().filter(|&&f| f).count() as f64;
        let sd = (10_000.0f64 * 0.15 * 0.85).sqrt();
        assert!((count - 1500.0).abs() <= 3.0 * sd, "{count}");
    }

    #[test]
    fn generate_shapes_and_determinism() {
        let d = SimDesign::default_layout(vec![5, 5], 4, 0.5, 0.1, 9.0, 8);
        let a = generate(&d).unwrap();
        assert_eq!(a.n_rows(), 10);
        assert_eq!(a.class_counts(), vec![5, 5]);
        assert_eq!(a, generate(&d).unwrap());
        assert_ne!(a, generate(&d.with_seed(9)).unwrap());
    }

    #[test]
    fn generated_correlation_tracks_rho() {
        let d = SimDesign::default_layout(vec![10_000, 2], 100, 0.75, 0.0, 1.0, 4);
        let s = DesignSampler::new(&d).unwrap().sample_class(1);
        let x = s.rows;
        let n = x.nrows() as f64;
        let cols: Vec<(f64, f64)> = (0..10)
            .map(|j| {
                let c = x.column(j);
                let m = c.mean();
                (m, (c.map(|v| (v - m).powi(2)).sum() / (n - 1.0)).sqrt())
            })
            .collect();
        let mut total = 0.0;
        let mut count = 0.0;
        for a in 0..10 {
            for b in (a + 1)..10 {
                let cov = x
                    .column(a)
                    .iter()
                    .zip(x.column(b).iter())
                    .map(|(u, v)| (u - cols[a].0) * (v - cols[b].0))
                    .sum::<f64>()
                    / (n - 1.0);
                total += cov / (cols[a].1 * cols[b].1);
                count += 1.0;
            }
        }
        assert!((total / count - 0.75).abs() < 0.02, "{}", total / count);
    }

    #[test]
    fn validation_catches_bad_designs() {
        let mut d = design(0.0, 5);
        d.contamination.epsilon = 1.5;
        assert!(d.validate().is_err());
        let mut d = design(0.0, 5);
        d.contamination.kappa = 0.5;
        assert!(d.validate().is_err());
        let mut d = design(0.0, 5);
        d.n_per_class[1] = 1;
        assert!(d.validate().is_err());
    }
}
