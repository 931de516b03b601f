use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{ClusterConfiguration, Partition};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    KMeans,
    KMedoids,
    GaussianEM,
}

/// Covariance parametrizations supported by the Gaussian EM backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovarianceModel {
    EII,
    VII,
    EEI,
    VVI,
    EEE,
    VVV,
}

impl CovarianceModel {
    pub const ALL: [CovarianceModel; 6] = [
        CovarianceModel::EII,
        CovarianceModel::VII,
        CovarianceModel::EEI,
        CovarianceModel::VVI,
        CovarianceModel::EEE,
        CovarianceModel::VVV,
    ];

    /// Whether all clusters share one covariance matrix.
    pub fn is_pooled(self) -> bool {
        matches!(
            self,
            CovarianceModel::EII | CovarianceModel::EEI | CovarianceModel::EEE
        )
    }
}

impl fmt::Display for CovarianceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for CovarianceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EII" => Ok(Self::EII),
            "VII" => Ok(Self::VII),
            "EEI" => Ok(Self::EEI),
            "VVI" => Ok(Self::VVI),
            "EEE" => Ok(Self::EEE),
            "VVV" => Ok(Self::VVV),
            other => Err(Error::UnsupportedModel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Init {
    KMeansPlusPlus,
    PamBuild,
    RandomPartition,
}

/// One candidate clustering method with its hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub backend: Backend,
    pub k: usize,
    #[serde(default = "default_model")]
    pub covariance_model: CovarianceModel,
    /// Eigen-ratio bound. Serialized as a number or the string `"inf"`.
    #[serde(with = "gamma_serde", default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_init")]
    pub init: Init,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_model() -> CovarianceModel {
    CovarianceModel::VVV
}
fn default_gamma() -> f64 {
    f64::INFINITY
}
fn default_init() -> Init {
    Init::KMeansPlusPlus
}
fn default_restarts() -> usize {
    1
}
fn default_max_iter() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-8
}

/// Eigen-ratio bound used when turning a k-means or k-medoids partition into
/// triplets.
pub const PARTITION_GAMMA: f64 = 1e4;

impl MethodSpec {
    pub fn gaussian(k: usize, model: CovarianceModel, gamma: f64) -> Self {
        Self {
            backend: Backend::GaussianEM,
            k,
            covariance_model: model,
            gamma,
            init: Init::KMeansPlusPlus,
            restarts: 1,
            max_iter: default_max_iter(),
            tol: default_tol(),
        }
    }

    pub fn kmeans(k: usize) -> Self {
        Self {
            backend: Backend::KMeans,
            k,
            covariance_model: default_model(),
            gamma: PARTITION_GAMMA,
            init: Init::KMeansPlusPlus,
            restarts: 1,
            max_iter: 100,
            tol: 0.0,
        }
    }

    pub fn kmedoids(k: usize) -> Self {
        Self {
            backend: Backend::KMedoids,
            k,
            covariance_model: default_model(),
            gamma: PARTITION_GAMMA,
            init: Init::PamBuild,
            restarts: 1,
            max_iter: 100,
            tol: 0.0,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if self.gamma.is_nan() || self.gamma < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 1, got {}",
                self.gamma
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::InvalidArgument("tol must be non-negative".into()));
        }
        Ok(())
    }

    /// Stable identifier, also used to derive random streams. A suffix
    /// names the initialization when it differs from the backend default.
    pub fn id(&self) -> String {
        let (base, default_init) = match self.backend {
            Backend::KMeans => (format!("kmeans-k{}", self.k), Init::KMeansPlusPlus),
            Backend::KMedoids => (format!("kmedoids-k{}", self.k), Init::PamBuild),
            Backend::GaussianEM => (
                format!(
                    "gmm-{}-g{}-k{}",
                    self.covariance_model,
                    format_gamma(self.gamma),
                    self.k
                ),
                Init::KMeansPlusPlus,
            ),
        };
        if self.init == default_init {
            return base;
        }
        let suffix = match self.init {
            Init::KMeansPlusPlus => "kpp",
            Init::PamBuild => "pam",
            Init::RandomPartition => "rand",
        };
        format!("{base}-{suffix}")
    }

    pub fn has_likelihood(&self) -> bool {
        self.backend == Backend::GaussianEM
    }
}

pub fn format_gamma(gamma: f64) -> String {
    if gamma.is_infinite() {
        "inf".to_string()
    } else {
        format!("{gamma}")
    }
}

pub(crate) mod gamma_serde {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "Inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid gamma {t:?}"))),
        }
    }
}

/// Number of free parameters of a Gaussian mixture with the given model.
pub fn count_free_params(spec: &MethodSpec, p: usize) -> Result<usize> {
    let k = spec.k;
    let alpha = k * p + k - 1;
    let beta = p * (p + 1) / 2;
    Ok(alpha
        + match spec.covariance_model {
            CovarianceModel::EII => 1,
            CovarianceModel::VII => k,
            CovarianceModel::EEI => p,
            CovarianceModel::VVI => k * p,
            CovarianceModel::EEE => beta,
            CovarianceModel::VVV => k * beta,
        })
}

/// Outcome of fitting one method to one data set.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub backend: Backend,
    pub theta: ClusterConfiguration,
    pub partition: Partition,
    /// Log-likelihood for Gaussian EM; within-cluster SSE for k-means; total
    /// dissimilarity to medoids for k-medoids.
    pub objective: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Log-likelihood after each E-step of the winning restart (EM only).
    pub loglik_trace: Vec<f64>,
    /// Cluster centers (k-means) or medoid coordinates (k-medoids), used to
    /// assign new points.
    pub prototypes: Option<Array2<f64>>,
}

impl FitResult {
    pub fn loglik(&self) -> Option<f64> {
        (self.backend == Backend::GaussianEM).then_some(self.objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn em(k: usize, model: CovarianceModel) -> MethodSpec {
        MethodSpec::gaussian(k, model, f64::INFINITY)
    }

    #[test]
    fn free_parameter_table() {
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::EII), 4).unwrap(),
            15
        );
        assert_eq!(
            count_free_params(&em(2, CovarianceModel::VVV), 2).unwrap(),
            11
        );
        assert_eq!(
            count_free_params(&em(1, CovarianceModel::EII), 1).unwrap(),
            2
        );
        // K = 3, p = 4: alpha = 14, beta = 10
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::VII), 4).unwrap(),
            17
        );
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::EEI), 4).unwrap(),
            18
        );
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::VVI), 4).unwrap(),
            26
        );
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::EEE), 4).unwrap(),
            24
        );
        assert_eq!(
            count_free_params(&em(3, CovarianceModel::VVV), 4).unwrap(),
            44
        );
    }

    #[test]
    fn excluded_models_are_unsupported() {
        for name in ["EVE", "VEE", "VVE", "EEV", "VEV", "EVV", "VEI", "EVI"] {
            assert!(matches!(
                name.parse::<CovarianceModel>(),
                Err(Error::UnsupportedModel(_))
            ));
        }
        assert_eq!(
            "VVI".parse::<CovarianceModel>().unwrap(),
            CovarianceModel::VVI
        );
    }

    #[test]
    fn json_round_trip_with_infinite_gamma() {
        let spec = em(4, CovarianceModel::EEE);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"inf\""));
        let back: MethodSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let minimal: MethodSpec =
            serde_json::from_str(r#"{"backend":"KMeans","k":2,"gamma":10}"#).unwrap();
        assert_eq!(minimal.gamma, 10.0);
    }

    #[test]
    fn validation() {
        assert!(em(0, CovarianceModel::EII).validate().is_err());
        assert!(MethodSpec::gaussian(2, CovarianceModel::EII, 0.5)
            .validate()
            .is_err());
        assert!(em(2, CovarianceModel::EII)
            .with_restarts(0)
            .validate()
            .is_err());
        assert!(em(2, CovarianceModel::EII).validate().is_ok());
    }

    #[test]
    fn ids_are_distinct() {
        assert_eq!(
            MethodSpec::gaussian(3, CovarianceModel::VVV, 100.0).id(),
            "gmm-VVV-g100-k3"
        );
        assert_eq!(em(3, CovarianceModel::VVV).id(), "gmm-VVV-ginf-k3");
        assert_eq!(MethodSpec::kmedoids(2).id(), "kmedoids-k2");
        let pam = MethodSpec::gaussian(3, CovarianceModel::VVV, 100.0).with_init(Init::PamBuild);
        assert_eq!(pam.id(), "gmm-VVV-g100-k3-pam");
        assert_eq!(
            MethodSpec::kmeans(2).with_init(Init::RandomPartition).id(),
            "kmeans-k2-rand"
        );
    }
}
