//! Fall detection from triaxial accelerometer records.
//!
//! The crate is organized as a pipeline:
//!
//! * [`dataset`] loads canonical CSV records and builds Monte-Carlo splits.
//! * [`features`] turns a record into a fixed-length feature vector
//!   (single-scale CWT, SVM, total |SVM|, SMA, per-axis ranges, spectral energy).
//! * [`classifiers`] holds KNN, ENN, a Gini decision tree and the 2-of-3 voting machine.
//! * [`eval`] runs the cross-validation protocol and the parameter sweeps.
//! * [`gateway`] windows a live sample stream and emits fall alerts.
//!
//! ```
//! use fallkit::classifiers::{NeighborParams, TrainingSet, VotingModel};
//! use fallkit::dataset::Label;
//! use fallkit::matrix::Matrix;
//!
//! let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(i)]).collect();
//! let labels = (0..10).map(|i| if i < 5 { Label::Adl } else { Label::Fall }).collect();
//! let train = TrainingSet::new(Matrix::from_rows(&rows), labels).unwrap();
//! let vm = VotingModel::train(train, NeighborParams::SWEEP).unwrap();
//! assert_eq!(vm.predict(&[9.0]).unwrap().label, Label::Fall);
//! ```

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod gateway;
pub mod matrix;
pub mod rng;
pub mod synth;

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// The guide's chapters, compiled so their code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/classifiers.md")]
    mod classifiers {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/gateway.md")]
    mod gateway {}
    #[doc = include_str!("../../../book/src/unimib.md")]
    mod unimib {}
}
