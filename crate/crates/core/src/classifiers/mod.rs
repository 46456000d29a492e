//! Discriminant-family classifiers behind one fit/predict contract.
//!
//! Every fitted model is immutable and implements [`Classifier`]; ties in
//! any argmax or vote resolve to the smallest class label.

mod discriminant;
mod pp;
mod simca;

pub use discriminant::{dda_fit, lda_fit, linda_fit, CovarianceMethod, DdaModel, DiscriminantModel, HRule, LindaConfig};
pub use pp::{pp_fit, pp_fit_with, PPModel, PPPair, PPSearchConfig};
pub use simca::{rsimca_fit, ClassPca, SimcaModel};

use crate::error::{Error, Result};

pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    /// Predicted class label in `1..=G`.
    fn predict(&self, x: &[f64]) -> Result<usize>;
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.len() });
    }
    Ok(())
}

/// 1-based index of the largest score; the first maximum wins.
pub(crate) fn argmax_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best + 1
}

/// 1-based index of the smallest value; the first minimum wins.
pub(crate) fn argmin_label(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = k;
        }
    }
    best + 1
}
