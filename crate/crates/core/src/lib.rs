//! Evaluation and selection of clustering solutions with the quadratic
//! discriminant score.
//!
//! Any clustering, whatever method produced it, is mapped to a set of cluster
//! triplets `(pi, mu, sigma)`. The quadratic score of a point under a triplet
//! measures how well the cluster describes it, and averaging the cluster-wise
//! best (hard) or softmax-weighted (smooth) score over a sample ranks
//! configurations. Bootstrap and cross-validation estimates of the expected
//! score drive the final selection.
//!
//! Modules, bottom-up:
//!
//! - [`data`], [`rng`], [`error`]: shared types, CSV ingestion, seeded streams
//! - [`qscore`]: quadratic scores, partitions, hard/smooth criteria
//! - [`backends`]: k-means, PAM, Gaussian EM with covariance constraints
//! - [`criteria`]: AIC, BIC, ICL, CH, ASW, FW stability, CVLK
//! - [`resampling`]: bootstrap and cross-validated scores, selection
//! - [`metrics`]: ARI and variation of information
//! - [`dgp`]: simulated designs and population score curves

pub mod backends;
pub mod criteria;
pub mod data;
pub mod dgp;
pub mod error;
pub mod metrics;
pub mod par;
pub mod qscore;
pub mod resampling;
pub mod rng;

pub use backends::{fit, Backend, CovarianceModel, FitResult, Init, MethodSpec};
pub use data::{
    load_csv, read_csv, standardize, validate_configuration, write_csv, ClusterConfiguration,
    ClusterTriplet, DataMatrix, Partition,
};
pub use error::{Error, Result};
pub use qscore::ScoreMode;
pub use rng::SeededRng;
