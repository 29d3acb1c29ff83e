//! Cascade forests with adaptive per-instance weighting.
//!
//! A cascade is a stack of levels. Every level holds several forests whose
//! class vectors are appended to the original features as input for the next
//! level. Between levels each training instance is reweighted from the mean
//! class vector of the level it just went through, so later levels
//! concentrate on the instances earlier levels got wrong. Optionally,
//! instances the cascade is already confident about leave it early.

pub mod cascade;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod forest;
pub mod seed;
pub mod tree;
pub mod weighting;

pub use cascade::{CascadeConfig, CascadeModel, EarlyStop, Prediction};
pub use dataset::{load_csv, stratified_split, Dataset, LabelColumn, SplitPair};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams, Strategy};
pub use tree::{ClassVector, Tree, TreeKind, TreeParams};
pub use weighting::{WeightScheme, WeightVector};
