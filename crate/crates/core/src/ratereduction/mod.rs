//! Coding-rate functionals and white-box layers built from them.
//!
//! For features `Z` (d x m, one sample per column) with precision `eps^2`:
//!
//! ```text
//! R(Z)       = 1/2 log2 det(I + d/(m eps^2) Z Z^T)
//! R^c(Z|Pi)  = sum_j m_j/(2m) log2 det(I + d/(m_j eps^2) Z_j Z_j^T)
//! Delta R    = R - R^c
//! ```
//!
//! where `Z_j` holds the columns of class `j` and `m_j` is its size. All
//! rates are in bits.

mod blocks;
mod coding;
mod redunet;

pub use blocks::{
    ista_step, lasso_objective, mssa_attention, mssa_forward, random_orthonormal_basis,
    unit_norm_dictionary, DictionaryBlock,
};
pub use coding::{coding_rate, conditional_coding_rate, rate_reduction, FeatureBatch};
pub use redunet::{
    nearest_subspace_accuracy, normalize_columns, redunet_forward, redunet_layer,
    two_class_mixture, LayerRates, MixtureSpec, ReduLayerParams, ReduNetRun,
    DEFAULT_ASSIGNMENT_SHARPNESS, DEMO_ASSIGNMENT_SHARPNESS,
};
