//! Robust classification for high-dimension low-sample-size data.
//!
//! The crate bundles classic and robust discriminant rules, projection
//! pursuit, robust SIMCA and a random subspace forest, together with an
//! ε-contaminated Gaussian simulator and a replicated train/test harness.
//!
//! ```
//! use hdlss::evaluate::{compare, EvalConfig, Method, Source};
//! use hdlss::synth::SimDesign;
//!
//! let design = SimDesign::default_layout(vec![20, 20], 5, 0.25, 0.0, 1.0, 7);
//! let cfg = EvalConfig { replications: 3, methods: vec![Method::Lda, Method::Dda], ..Default::default() };
//! let rows = compare(&[Source::Design(design)], &cfg).unwrap();
//! assert_eq!(rows.len(), 2);
//! ```

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimators;
pub mod evaluate;
pub mod forest;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/data.md")]
    pub struct Data;
    #[doc = include_str!("../../../book/src/estimators.md")]
    pub struct Estimators;
    #[doc = include_str!("../../../book/src/classifiers.md")]
    pub struct Classifiers;
    #[doc = include_str!("../../../book/src/forest.md")]
    pub struct Forest;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
