//! Correlation measures and entropy estimation for feed-forward networks.
//!
//! * [`correlation`]: neuronal correlation (NC), weight correlation (WC),
//!   closed-form pre-activation correlation, the nonlinearity gap ε, and the
//!   structural coefficient Γ.
//! * [`kernel`]: Gram matrices, the eigendecomposition feature map,
//!   Gershgorin spectrum bounds, kernel alignment, and width selection.
//! * [`entropy`]: binning and Kozachenko–Leonenko estimators, summed over raw
//!   neurons or over decorrelated kernel feature dimensions.
//! * [`network`]: a small MLP with SGD training and snapshot I/O.
//! * [`data`]: IDX and CSV loading, seeded Gaussian samples.

pub mod correlation;
pub mod data;
pub mod entropy;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod network;

pub use correlation::{
    epsilon_gap, neuronal_correlation, preactivation_correlation, preactivation_covariance,
    structure_correlation_coefficient, weight_correlation, ActivationMatrix, ConnectivityPattern,
    CorrelationReport, Measure, WeightMatrix,
};
pub use data::{load_csv, load_idx, sample_gaussian, save_csv, Dataset};
pub use entropy::{
    entropy_kernel_embedding, entropy_original, gaussian_entropy_analytic, EntropyEstimate,
    Estimator, GaussianSpec, KernelEmbeddingConfig, Space, WidthChoice,
};
pub use error::{Error, ErrorClass, Result};
pub use kernel::{
    feature_map_evd, gershgorin_bounds, gram_matrix, kernel_alignment, select_kernel_width,
    FeatureMatrix, GramMatrix, KernelKind, SpectrumBounds,
};
pub use network::{initialize, train, Activation, Init, NetworkSnapshot, NetworkSpec, TrainConfig};
