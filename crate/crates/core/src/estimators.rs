//! Location and scatter estimation.
//!
//! Multivariate: the sample and pooled covariances, ridge and convex
//! shrinkage, and the minimum covariance determinant (MCD) estimator by
//! exhaustive enumeration or by concentration steps from random starts.
//! Univariate: classical, median/MAD, Huber M and biweight S estimates used
//! by the projection-pursuit index.
//!
//! Determinants are always compared on the log scale through a Cholesky
//! factor, so high-dimensional subsets neither overflow nor underflow.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterMethod {
    Sample,
    Pooled,
    McdExact,
    McdFast,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocationScatter {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub method: ScatterMethod,
    /// Size of the MCD subset.
    pub h: Option<usize>,
    /// Row indices of the MCD subset, ascending.
    pub support: Option<Vec<usize>>,
    /// Multiplier applied to the raw subset covariance.
    pub consistency_factor: f64,
    /// Log-determinant of the raw (unscaled) covariance.
    pub log_det: f64,
    /// Set when the covariance is not positive definite.
    pub degenerate: bool,
}

/// Mean and unbiased covariance of the rows of `x`.
pub fn sample_mean_cov(x: &DMatrix<f64>) -> Result<LocationScatter> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid(format!("sample covariance needs n >= 2, got {n}")));
    }
    let (mu, sigma) = mean_cov(x);
    let log_det = log_det_spd(&sigma);
    Ok(LocationScatter {
        mu,
        sigma,
        method: ScatterMethod::Sample,
        h: None,
        support: None,
        consistency_factor: 1.0,
        log_det: log_det.unwrap_or(f64::NEG_INFINITY),
        degenerate: log_det.is_none(),
    })
}

/// Two-pass mean and `n - 1` covariance.
pub(crate) fn mean_cov(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.nrows();
    let mu = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mu.transpose();
    }
    let mut sigma = centered.tr_mul(&centered) / (n as f64 - 1.0);
    symmetrize(&mut sigma);
    (mu, sigma)
}

fn subset_mean_cov(x: &DMatrix<f64>, rows: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    mean_cov(&x.select_rows(rows.iter()))
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `log det Σ` through a Cholesky factor; `None` when `Σ` is not numerically
/// positive definite.
pub fn log_det_spd(sigma: &DMatrix<f64>) -> Option<f64> {
    let chol = sigma.clone().cholesky()?;
    let l = chol.l_dirty();
    let diag = l.diagonal();
    let max = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    // pivots carry roughly half the floating-point digits of the entries, so
    // a ratio below 1e-6 means the matrix is rank deficient
    if !(min > 0.0) || min < max * 1e-6 {
        return None;
    }
    Some(2.0 * diag.iter().map(|d| d.ln()).sum::<f64>())
}

/// `Σ_k (n_k - 1) S_k / (Σ_k n_k - G)`.
pub fn pooled_cov(groups: &[(usize, DMatrix<f64>)]) -> Result<DMatrix<f64>> {
    let first = groups.first().ok_or_else(|| Error::invalid("pooled covariance needs at least one group"))?;
    let p = first.1.nrows();
    let total: usize = groups.iter().map(|(n, _)| n).sum();
    let denom = total as f64 - groups.len() as f64;
    if denom <= 0.0 {
        return Err(Error::invalid(format!(
            "pooled covariance needs more rows ({total}) than groups ({})",
            groups.len()
        )));
    }
    let mut acc = DMatrix::zeros(p, p);
    for (n_k, s_k) in groups {
        if s_k.shape() != (p, p) {
            return Err(Error::DimensionMismatch { expected: p, found: s_k.nrows() });
        }
        if *n_k == 0 {
            return Err(Error::invalid("empty group in pooled covariance"));
        }
        acc += s_k * (*n_k as f64 - 1.0);
    }
    Ok(acc / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RegularizationSpec {
    #[default]
    None,
    /// `Σ + λ I`
    Ridge { lambda: f64 },
    /// `(1 - α) Σ + (α / p) tr(Σ) I`
    Convex { alpha: f64 },
}

impl RegularizationSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegularizationSpec::None => Ok(()),
            RegularizationSpec::Ridge { lambda } if lambda > 0.0 && lambda.is_finite() => Ok(()),
            RegularizationSpec::Convex { alpha } if (0.0..=1.0).contains(&alpha) => Ok(()),
            other => Err(Error::invalid(format!("invalid regularization {other:?}"))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            RegularizationSpec::None => "none".into(),
            RegularizationSpec::Ridge { lambda } => format!("ridge:{lambda}"),
            RegularizationSpec::Convex { alpha } => format!("convex:{alpha}"),
        }
    }
}

pub fn regularize(sigma: &DMatrix<f64>, spec: &RegularizationSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let p = sigma.nrows();
    if sigma.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, found: sigma.ncols() });
    }
    Ok(match *spec {
        RegularizationSpec::None => sigma.clone(),
        RegularizationSpec::Ridge { lambda } => sigma + DMatrix::identity(p, p) * lambda,
        RegularizationSpec::Convex { alpha } => {
            let target = sigma.trace() / p as f64;
            sigma * (1.0 - alpha) + DMatrix::identity(p, p) * (alpha * target)
        }
    })
}

/// `floor((n + p + 1) / 2)` clamped to `[ceil(n / 2), n - 1]`.
///
/// The clamp only bites when `p` is large relative to `n`; in that case
/// [`default_h_is_clamped`] reports it and MCD itself will refuse because
/// `p >= h`.
pub fn default_h(n: usize, p: usize) -> usize {
    let raw = (n + p + 1) / 2;
    let lo = n.div_ceil(2);
    let hi = n.saturating_sub(1).max(lo);
    raw.clamp(lo, hi)
}

pub fn default_h_is_clamped(n: usize, p: usize) -> bool {
    default_h(n, p) != (n + p + 1) / 2
}

/// Ceiling on `n` for [`mcd_exact`].
pub const MCD_ENUMERATION_LIMIT: usize = 25;

fn check_mcd_dims(n: usize, p: usize, h: usize) -> Result<()> {
    if p >= h {
        return Err(Error::McdInfeasible { p, h });
    }
    if h > n {
        return Err(Error::invalid(format!("h = {h} exceeds n = {n}")));
    }
    Ok(())
}

/// Consistency factor at the normal model for an `h`-of-`n` subset in `p`
/// dimensions: `(h/n) / P(χ²_{p+2} <= χ²_{p, h/n})`.
pub fn mcd_consistency_factor(n: usize, p: usize, h: usize) -> f64 {
    if h >= n {
        return 1.0;
    }
    let alpha = h as f64 / n as f64;
    let q = ChiSquared::new(p as f64).unwrap().inverse_cdf(alpha);
    alpha / ChiSquared::new(p as f64 + 2.0).unwrap().cdf(q)
}

fn mcd_result(
    x: &DMatrix<f64>,
    support: Vec<usize>,
    log_det: f64,
    method: ScatterMethod,
) -> LocationScatter {
    let (n, p) = x.shape();
    let h = support.len();
    let (mu, raw) = subset_mean_cov(x, &support);
    let factor = mcd_consistency_factor(n, p, h);
    LocationScatter {
        mu,
        sigma: raw * factor,
        method,
        h: Some(h),
        support: Some(support),
        consistency_factor: factor,
        log_det,
        degenerate: false,
    }
}

/// Exact MCD by enumerating every `h`-subset (lexicographic order; the first
/// minimum wins ties).
pub fn mcd_exact(x: &DMatrix<f64>, h: usize) -> Result<LocationScatter> {
    let (n, p) = x.shape();
    check_mcd_dims(n, p, h)?;
    if n > MCD_ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "exact MCD enumerates C(n, h) subsets and is limited to n <= {MCD_ENUMERATION_LIMIT}, got n = {n}"
        )));
    }
    let mut subset: Vec<usize> = (0..h).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut any_singular = false;
    loop {
        let (_, cov) = subset_mean_cov(x, &subset);
        match log_det_spd(&cov) {
            Some(ld) => {
                if best.as_ref().is_none_or(|(b, _)| ld < *b) {
                    best = Some((ld, subset.clone()));
                }
            }
            None => any_singular = true,
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    if any_singular {
        return Err(Error::Degenerate(
            "an h-subset has a singular covariance (data not in general position)".into(),
        ));
    }
    let (ld, support) = best.expect("at least one subset is enumerated");
    Ok(mcd_result(x, support, ld, ScatterMethod::McdExact))
}

/// Advances `c` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in (i + 1)..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Result of a FAST-MCD run together with per-start diagnostics.
#[derive(Debug, Clone)]
pub struct FastMcdOutcome {
    pub estimate: LocationScatter,
    pub best_start: usize,
    /// Log-determinants of the successive `h`-subsets visited by each start;
    /// empty for starts that could not be initialized.
    pub traces: Vec<Vec<f64>>,
}

const CSTEP_MAX_ITER: usize = 100;
const CSTEP_REL_TOL: f64 = 1e-12;

/// FAST-MCD: `n_starts` random `(p + 1)`-subsets, each concentrated by
/// C-steps until the determinant stops decreasing; the smallest final
/// determinant wins (ties go to the lower start index).
pub fn mcd_fast(x: &DMatrix<f64>, h: usize, n_starts: usize, seed: u64) -> Result<LocationScatter> {
    mcd_fast_traced(x, h, n_starts, seed).map(|o| o.estimate)
}

pub fn mcd_fast_traced(x: &DMatrix<f64>, h: usize, n_starts: usize, seed: u64) -> Result<FastMcdOutcome> {
    let (n, p) = x.shape();
    check_mcd_dims(n, p, h)?;
    if n_starts == 0 {
        return Err(Error::invalid("FAST-MCD needs at least one start"));
    }
    if distinct_rows(x) < p + 1 {
        return Err(Error::Degenerate(format!("fewer than p + 1 = {} distinct rows", p + 1)));
    }

    let runs: Vec<Option<(f64, Vec<usize>, Vec<f64>)>> = (0..n_starts)
        .into_par_iter()
        .map(|s| run_start(x, h, derive_seed(seed, s as u64)))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (s, run) in runs.iter().enumerate() {
        if let Some((ld, _, _)) = run {
            if best.is_none_or(|(_, b)| *ld < b) {
                best = Some((s, *ld));
            }
        }
    }
    let (best_start, ld) = best.ok_or_else(|| {
        Error::Degenerate("no start produced a nonsingular h-subset (data not in general position)".into())
    })?;
    let support = runs[best_start].as_ref().unwrap().1.clone();
    let traces = runs.into_iter().map(|r| r.map(|(_, _, t)| t).unwrap_or_default()).collect();
    Ok(FastMcdOutcome {
        estimate: mcd_result(x, support, ld, ScatterMethod::McdFast),
        best_start,
        traces,
    })
}

fn distinct_rows(x: &DMatrix<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = x.row_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

/// One start: initial `(p + 1)`-subset (grown until nonsingular), then
/// C-steps. Returns the final log-determinant, subset and trace.
fn run_start(x: &DMatrix<f64>, h: usize, seed: u64) -> Option<(f64, Vec<usize>, Vec<f64>)> {
    let (n, p) = x.shape();
    let mut rng = rng_from_seed(seed);
    let order: Vec<usize> = sample(&mut rng, n, n).into_vec();
    let mut size = p + 1;
    let (mut mu, mut sigma) = loop {
        let (mu, sigma) = subset_mean_cov(x, &order[..size]);
        if log_det_spd(&sigma).is_some() {
            break (mu, sigma);
        }
        if size == n {
            return None;
        }
        size += 1;
    };

    let mut trace = Vec::new();
    let mut current: Option<(f64, Vec<usize>)> = None;
    for _ in 0..CSTEP_MAX_ITER {
        let subset = concentrate(x, &mu, &sigma, h)?;
        if current.as_ref().is_some_and(|(_, s)| *s == subset) {
            break;
        }
        let (new_mu, new_sigma) = subset_mean_cov(x, &subset);
        let Some(ld) = log_det_spd(&new_sigma) else {
            break;
        };
        if let Some((old, _)) = &current {
            if ld > *old {
                // rounding noise on an equal-determinant subset
                break;
            }
            let converged = (old - ld).abs() <= CSTEP_REL_TOL * old.abs().max(1.0);
            trace.push(ld);
            current = Some((ld, subset));
            if converged {
                break;
            }
        } else {
            trace.push(ld);
            current = Some((ld, subset));
        }
        mu = new_mu;
        sigma = new_sigma;
    }
    current.map(|(ld, s)| (ld, s, trace))
}

/// Indices of the `h` smallest Mahalanobis distances, ascending by index.
fn concentrate(x: &DMatrix<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>, h: usize) -> Option<Vec<usize>> {
    let chol = sigma.clone().cholesky()?;
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mu.transpose();
    }
    // solve L z = (x - mu) for all rows at once
    let z = chol.l().solve_lower_triangular(&centered.transpose())?;
    let mut d: Vec<(f64, usize)> = z.column_iter().enumerate().map(|(i, c)| (c.norm_squared(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut subset: Vec<usize> = d[..h].iter().map(|&(_, i)| i).collect();
    subset.sort_unstable();
    Some(subset)
}

/// Mahalanobis distances `(x_i - μ)ᵀ Σ⁻¹ (x_i - μ)` of every row.
pub fn mahalanobis_sq(x: &DMatrix<f64>, est: &LocationScatter) -> Option<Vec<f64>> {
    let chol = est.sigma.clone().cholesky()?;
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= est.mu.transpose();
    }
    let z = chol.l().solve_lower_triangular(&centered.transpose())?;
    Some(z.column_iter().map(|c| c.norm_squared()).collect())
}

// ---------------------------------------------------------------------------
// univariate

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnivariateKind {
    Classical,
    MedianMad,
    Huber,
    SEstimator,
}

impl UnivariateKind {
    pub fn is_robust(self) -> bool {
        self != UnivariateKind::Classical
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateEstimate {
    pub location: f64,
    pub scale: f64,
    pub kind: UnivariateKind,
    /// True only for constant samples, where the scale is zero.
    pub degenerate: bool,
}

/// Tuning constants for the M and S estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnivariateConfig {
    /// Huber ψ cutoff.
    pub huber_c: f64,
    /// Tukey biweight cutoff; 1.547645 gives 50% breakdown with `b = 1/2`.
    pub biweight_c: f64,
    pub biweight_b: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for UnivariateConfig {
    fn default() -> Self {
        Self { huber_c: 1.345, biweight_c: 1.547_645, biweight_b: 0.5, tol: 1e-10, max_iter: 100 }
    }
}

/// Normal-consistency constant of the MAD.
pub const MAD_CONSTANT: f64 = 1.4826;
/// Normal-consistency constant of the mean absolute deviation (`√(π/2)`).
const MEAN_AD_CONSTANT: f64 = 1.253_314_137_315_500_3;

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    median_in_place(&mut v)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    assert!(n > 0, "median of an empty sample");
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Normalized MAD about `center`, falling back to the normalized mean
/// absolute deviation when more than half the sample sits on the center.
/// Zero only for constant samples.
fn robust_scale(x: &[f64], center: f64) -> f64 {
    let mut dev: Vec<f64> = x.iter().map(|v| (v - center).abs()).collect();
    let mad = MAD_CONSTANT * median_in_place(&mut dev);
    if mad > 0.0 {
        return mad;
    }
    MEAN_AD_CONSTANT * dev.iter().sum::<f64>() / dev.len() as f64
}

pub fn univariate(x: &[f64], kind: UnivariateKind) -> Result<UnivariateEstimate> {
    univariate_with(x, kind, &UnivariateConfig::default())
}

pub fn univariate_with(x: &[f64], kind: UnivariateKind, cfg: &UnivariateConfig) -> Result<UnivariateEstimate> {
    if x.len() < 2 {
        return Err(Error::invalid(format!("univariate estimate needs at least 2 values, got {}", x.len())));
    }
    let constant = x.iter().all(|&v| v == x[0]);
    if constant {
        return Ok(UnivariateEstimate { location: x[0], scale: 0.0, kind, degenerate: true });
    }
    let (location, scale) = match kind {
        UnivariateKind::Classical => {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        }
        UnivariateKind::MedianMad => {
            let med = median(x);
            (med, robust_scale(x, med))
        }
        UnivariateKind::Huber => huber(x, cfg),
        UnivariateKind::SEstimator => s_estimate(x, cfg),
    };
    Ok(UnivariateEstimate { location, scale, kind, degenerate: false })
}

/// Huber M-location with the scale held at the (normalized) MAD.
fn huber(x: &[f64], cfg: &UnivariateConfig) -> (f64, f64) {
    let med = median(x);
    let scale = robust_scale(x, med);
    let c = cfg.huber_c;
    let mut m = med;
    for _ in 0..cfg.max_iter {
        let (mut num, mut den) = (0.0, 0.0);
        for &v in x {
            let u = ((v - m) / scale).abs();
            let w = if u <= c { 1.0 } else { c / u };
            num += w * v;
            den += w;
        }
        let next = num / den;
        let done = (next - m).abs() <= cfg.tol * scale;
        m = next;
        if done {
            break;
        }
    }
    (m, scale)
}

/// Tukey biweight ρ normalized to a maximum of one.
fn biweight_rho(u: f64, c: f64) -> f64 {
    let t = u / c;
    if t.abs() >= 1.0 {
        1.0
    } else {
        let s = 1.0 - t * t;
        1.0 - s * s * s
    }
}

/// Biweight S-scale (solving `mean ρ(r/s) = b`) alternated with the
/// biweight M-location at that scale, started from median and MAD.
fn s_estimate(x: &[f64], cfg: &UnivariateConfig) -> (f64, f64) {
    let c = cfg.biweight_c;
    let b = cfg.biweight_b;
    let n = x.len() as f64;
    let mut m = median(x);
    let mut s = robust_scale(x, m);
    for _ in 0..cfg.max_iter {
        // scale fixed point
        for _ in 0..cfg.max_iter {
            let mean_rho = x.iter().map(|v| biweight_rho((v - m) / s, c)).sum::<f64>() / n;
            let next = s * (mean_rho / b).sqrt();
            let done = (next - s).abs() <= cfg.tol * s;
            s = next;
            if done || s == 0.0 {
                break;
            }
        }
        if s == 0.0 {
            break;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &v in x {
            let t = (v - m) / (s * c);
            if t.abs() < 1.0 {
                let w = (1.0 - t * t).powi(2);
                num += w * v;
                den += w;
            }
        }
        if den == 0.0 {
            break;
        }
        let next = num / den;
        let done = (next - m).abs() <= cfg.tol * s;
        m = next;
        if done {
            break;
        }
    }
    (m, s)
}

/// Type-7 (linear interpolation) empirical quantile.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of an empty sample");
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
