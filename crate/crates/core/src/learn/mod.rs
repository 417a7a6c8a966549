//! Logistic classification, leave-one-subject-out validation and 2-D PCA.

mod cv;
mod linear;
mod pca;

pub use cv::{loso_binary, loso_cv, Confusion, CvOptions, CvResult, FoldReport, RowPrediction};
pub use linear::{fit_binary, fit_linear, predict, FitOptions, LinearModel, Standardization};
pub use pca::{pca2, Pca2Result, DEGENERATE_GAP};
