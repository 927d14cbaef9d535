//! Linear least squares twin support vector machines and two fuzzy
//! variants, with a soft-margin SVM baseline and a cross-validation harness.
//!
//! - [`model`]: crisp LSTSVM, shared types, nearest-plane prediction
//! - [`fuzzy_m1`]: membership-weighted errors with crisp planes
//! - [`fuzzy_m2`]: triangular fuzzy weights and bias, fuzzy distances and
//!   plane membership degrees
//! - [`svm`]: linear soft-margin SVM
//! - [`data`], [`eval`]: datasets, normalization, stratified CV, grid search
//!   and benchmark tables

pub mod classifier;
pub mod data;
pub mod error;
pub mod eval;
pub mod fuzzy_m1;
pub mod fuzzy_m2;
pub mod linalg;
pub mod model;
pub mod model_io;
pub mod svm;

pub use classifier::{Algorithm, Hyperparams, Prediction, TrainedModel, TrainerSpec};
pub use data::{generate_xor, load_csv, normalize, CsvSchema, Dataset, Manifest, ManifestEntry, ManifestSettings, NormStats, Normalization};
pub use error::{Error, Result};
pub use eval::{accuracy, benchmark, grid_search, kfold_cv, ConfusionCounts, CvOptions, CvReport, Grid};
pub use fuzzy_m1::{assign_memberships, train_m1, M1Model, MembershipStrategy, MembershipVector};
pub use fuzzy_m2::{
    fuzzy_distance, hyperplane_membership, predict_m2, train_m2, FuzzyDistance, FuzzyHyperplane, M2Config, M2Model,
};
pub use linalg::{augment_with_ones, solve_spd, Matrix};
pub use model::{plane_distance, predict_twin, train_lstsvm, ClassSplit, Hyperplane, Label, Sample, TrainConfig, TwinModel};
pub use model_io::ModelDocument;
pub use svm::{predict_svm, train_linear_svm, LinearSvm, SvmConfig};
