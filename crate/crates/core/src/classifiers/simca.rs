//! Robust SIMCA: one PCA model per class, classification by score and
//! orthogonal distances.
//!
//! Robustness comes from a single trimming pass: the rows with the largest
//! orthogonal distance under a first PCA fit are dropped and the PCA is
//! refit on the rest.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{argmin_label, check_dim, Classifier};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::estimators::{median, quantile};

/// Quantile of the kept rows' distances used as the class cutoffs.
const CUTOFF_QUANTILE: f64 = 0.975;
/// Relative size below which a singular value counts as zero.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassPca {
    pub center: DVector<f64>,
    /// `p x k` with orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// Positive, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub sd_cutoff: f64,
    pub od_cutoff: f64,
    /// Rows (class-local indices) kept after trimming.
    pub kept: Vec<usize>,
}

impl ClassPca {
    pub fn n_components(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Score distance and orthogonal distance of `x`.
    pub fn distances(&self, x: &DVector<f64>) -> (f64, f64) {
        let centered = x - &self.center;
        let scores = self.loadings.tr_mul(&centered);
        let sd = scores
            .iter()
            .zip(&self.eigenvalues)
            .map(|(t, l)| t * t / l)
            .sum::<f64>()
            .sqrt();
        let od = (centered - &self.loadings * scores).norm();
        (sd, od)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimcaModel {
    pub classes: Vec<ClassPca>,
    pub n_features: usize,
}

pub fn rsimca_fit(train: &LabeledDataset, variance_retained: f64, trim: f64) -> Result<SimcaModel> {
    if !(variance_retained > 0.0 && variance_retained <= 1.0) {
        return Err(Error::invalid(format!("variance_retained = {variance_retained} outside (0, 1]")));
    }
    if !(0.0..1.0).contains(&trim) {
        return Err(Error::invalid(format!("trim = {trim} outside [0, 1)")));
    }
    let counts = train.class_counts();
    if let Some(k) = counts.iter().position(|&c| c < 4) {
        return Err(Error::ClassTooSmall { class: k + 1, count: counts[k], required: 4 });
    }
    let classes = (1..=train.n_classes())
        .into_par_iter()
        .map(|k| fit_class(&train.class_matrix(k), k, variance_retained, trim))
        .collect::<Result<Vec<_>>>()?;
    Ok(SimcaModel { classes, n_features: train.n_features() })
}

struct Pca {
    center: DVector<f64>,
    loadings: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

fn coordinatewise_median(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_fn(x.ncols(), |j, _| median(x.column(j).as_slice()))
}

/// Median-centered PCA of the given rows keeping the smallest number of
/// components reaching `variance_retained`, capped at `cap`.
fn pca(x: &DMatrix<f64>, variance_retained: f64, cap: usize) -> Pca {
    let center = coordinatewise_median(x);
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= center.transpose();
    }
    let m = x.nrows();
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| svd.singular_values[i]);
    let eig: Vec<f64> = order
        .iter()
        .map(|&i| svd.singular_values[i])
        .take_while(|&s| s > top * RANK_TOL && s > 0.0)
        .map(|s| s * s / (m as f64 - 1.0))
        .collect();
    let total: f64 = eig.iter().sum();
    let mut k = 0;
    let mut acc = 0.0;
    while k < eig.len() {
        acc += eig[k];
        k += 1;
        if acc >= variance_retained * total * (1.0 - 1e-12) {
            break;
        }
    }
    let k = k.min(cap).min(eig.len());
    let p = x.ncols();
    let mut loadings = DMatrix::zeros(p, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        loadings.set_column(c, &v_t.row(i).transpose());
    }
    Pca { center, loadings, eigenvalues: eig[..k].to_vec() }
}

fn orthogonal_distances(x: &DMatrix<f64>, pca: &Pca) -> Vec<f64> {
    x.row_iter()
        .map(|row| {
            let c = row.transpose() - &pca.center;
            let t = pca.loadings.tr_mul(&c);
            (c - &pca.loadings * t).norm()
        })
        .collect()
}

fn fit_class(x: &DMatrix<f64>, class: usize, variance_retained: f64, trim: f64) -> Result<ClassPca> {
    let (n_k, p) = x.shape();
    let cap = (n_k - 2).min(p);
    let first = pca(x, variance_retained, cap);
    let od = orthogonal_distances(x, &first);

    let n_drop = (trim * n_k as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n_k).collect();
    // largest OD first; ties drop the later row
    order.sort_by(|&a, &b| od[b].total_cmp(&od[a]).then(b.cmp(&a)));
    let mut kept: Vec<usize> = order[n_drop..].to_vec();
    kept.sort_unstable();
    if kept.len() < 3 {
        return Err(Error::ClassTooSmall { class, count: kept.len(), required: 3 });
    }

    let xk = x.select_rows(kept.iter());
    let fit = pca(&xk, variance_retained, cap);
    let mut sd = Vec::with_capacity(kept.len());
    let mut odk = Vec::with_capacity(kept.len());
    let model = ClassPca {
        center: fit.center,
        loadings: fit.loadings,
        eigenvalues: fit.eigenvalues,
        sd_cutoff: 0.0,
        od_cutoff: 0.0,
        kept,
    };
    for row in xk.row_iter() {
        let (s, o) = model.distances(&row.transpose());
        sd.push(s);
        odk.push(o);
    }
    // a zero cutoff would make any deviation infinitely far
    let floor = f64::EPSILON * (1.0 + model.center.norm());
    Ok(ClassPca {
        sd_cutoff: quantile(&sd, CUTOFF_QUANTILE).max(floor),
        od_cutoff: quantile(&odk, CUTOFF_QUANTILE).max(floor),
        ..model
    })
}

impl SimcaModel {
    /// `sqrt((SD / c_SD)² + (OD / c_OD)²)` for every class.
    pub fn combined_distances(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        let x = DVector::from_column_slice(x);
        Ok(self
            .classes
            .iter()
            .map(|c| {
                let (sd, od) = c.distances(&x);
                ((sd / c.sd_cutoff).powi(2) + (od / c.od_cutoff).powi(2)).sqrt()
            })
            .collect())
    }
}

impl Classifier for SimcaModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmin_label(&self.combined_distances(x)?))
    }
}
