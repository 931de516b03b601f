//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use quadscore::criteria::Criterion;
use quadscore::dgp::{Design, DgpSpec};
use quadscore::resampling::EvaluationOptions;
use quadscore::{Backend, CovarianceModel, Init, MethodSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Bootstrap replicates when the config gives none.
pub const DEFAULT_B_REAL: usize = 1000;
pub const DEFAULT_B_SIMULATION: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        label_column: Option<String>,
    },
    Simulate {
        design: Design,
        n: usize,
        #[serde(default = "one")]
        monte_carlo_reps: usize,
    },
}

fn one() -> usize {
    1
}

/// Cluster count or inclusive range `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KRange {
    One(usize),
    Range([usize; 2]),
}

impl KRange {
    fn values(self) -> std::ops::RangeInclusive<usize> {
        match self {
            KRange::One(k) => k..=k,
            KRange::Range([lo, hi]) => lo..=hi,
        }
    }
}

/// Eigen-ratio bound: a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Value(f64),
    Text(String),
}

impl Gamma {
    fn value(&self) -> CliResult<f64> {
        match self {
            Gamma::Value(v) => Ok(*v),
            Gamma::Text(t) if matches!(t.as_str(), "inf" | "Inf" | "infinity") => Ok(f64::INFINITY),
            Gamma::Text(t) => Err(CliError::Config(format!("invalid gamma {t:?}"))),
        }
    }
}

/// A family of methods: one backend over a grid of K, covariance models and
/// eigen-ratio bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MenuItem {
    pub backend: Backend,
    pub k: KRange,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covariance_models: Vec<CovarianceModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gammas: Vec<Gamma>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<Init>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl MenuItem {
    pub fn expand(&self) -> CliResult<Vec<MethodSpec>> {
        let ks = self.k.values();
        if ks.is_empty() || *ks.start() == 0 {
            return Err(CliError::Config(format!("invalid K range {:?}", self.k)));
        }
        let mut out = Vec::new();
        let base = |k: usize| match self.backend {
            Backend::KMeans => MethodSpec::kmeans(k),
            Backend::KMedoids => MethodSpec::kmedoids(k),
            Backend::GaussianEM => MethodSpec::gaussian(k, CovarianceModel::VVV, f64::INFINITY),
        };
        let models = match (self.backend, self.covariance_models.is_empty()) {
            (Backend::GaussianEM, true) => vec![CovarianceModel::VVV],
            (Backend::GaussianEM, false) => self.covariance_models.clone(),
            (_, _) => vec![CovarianceModel::VVV],
        };
        let gammas: Vec<Option<f64>> = if self.gammas.is_empty() {
            vec![None]
        } else {
            self.gammas
                .iter()
                .map(|g| g.value().map(Some))
                .collect::<CliResult<_>>()?
        };
        for &model in &models {
            for gamma in &gammas {
                for k in ks.clone() {
                    let mut spec = base(k);
                    spec.covariance_model = model;
                    if let Some(g) = gamma {
                        spec.gamma = *g;
                    }
                    if let Some(init) = self.init {
                        spec.init = init;
                    }
                    if let Some(r) = self.restarts {
                        spec.restarts = r;
                    }
                    if let Some(m) = self.max_iter {
                        spec.max_iter = m;
                    }
                    if let Some(t) = self.tol {
                        spec.tol = t;
                    }
                    spec.validate()
                        .map_err(|e| CliError::Config(format!("{}: {e}", spec.id())))?;
                    out.push(spec);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub data: DataSource,
    pub menu: Vec<MenuItem>,
    pub criteria: Vec<Criterion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fw_pairs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvlk_folds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub standardize: bool,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub b: Option<usize>,
    pub alpha: Option<f64>,
    pub folds: Option<usize>,
    pub delta: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::NotFound(path.to_path_buf()),
            _ => CliError::Config(format!("{}: {e}", path.display())),
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSource::Csv { path: csv, .. } = &mut cfg.data {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    *csv = dir.join(&*csv);
                }
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        self.seed = o.seed.or(self.seed);
        self.output_dir = o.out.clone().or(self.output_dir.take());
        self.b = o.b.or(self.b);
        self.alpha = o.alpha.or(self.alpha);
        self.folds = o.folds.or(self.folds);
        self.delta = o.delta.or(self.delta);
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.menu.is_empty() {
            return Err(CliError::Config("menu is empty".into()));
        }
        if self.criteria.is_empty() {
            return Err(CliError::Config("criteria list is empty".into()));
        }
        self.methods()?;
        if let DataSource::Simulate {
            design,
            n,
            monte_carlo_reps,
        } = &self.data
        {
            DgpSpec::new(*design, *n)
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            if *monte_carlo_reps == 0 {
                return Err(CliError::Config(
                    "monte_carlo_reps must be at least 1".into(),
                ));
            }
        }
        let opts = self.options();
        if opts.b < 2 {
            return Err(CliError::Config(format!(
                "b must be at least 2, got {}",
                opts.b
            )));
        }
        if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "alpha must be in (0, 1), got {}",
                opts.alpha
            )));
        }
        if opts.folds < 2 || opts.cvlk_folds < 2 {
            return Err(CliError::Config("folds must be at least 2".into()));
        }
        if opts.delta.is_nan() || opts.delta < 0.0 {
            return Err(CliError::Config(format!(
                "delta must be >= 0, got {}",
                opts.delta
            )));
        }
        if opts.fw_pairs == 0 {
            return Err(CliError::Config("fw_pairs must be at least 1".into()));
        }
        Ok(())
    }

    /// Checks that a seed was given, in the file or on the command line.
    pub fn require_seed(&self) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Config("no seed given; set \"seed\" or pass --seed".into()))
    }

    pub fn methods(&self) -> CliResult<Vec<MethodSpec>> {
        let mut out = Vec::new();
        for item in &self.menu {
            out.extend(item.expand()?);
        }
        let mut ids: Vec<String> = out.iter().map(MethodSpec::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Config(format!("duplicate method {}", w[0])));
        }
        Ok(out)
    }

    pub fn is_simulation(&self) -> bool {
        matches!(self.data, DataSource::Simulate { .. })
    }

    pub fn options(&self) -> EvaluationOptions {
        let d = EvaluationOptions::default();
        let default_b = if self.is_simulation() {
            DEFAULT_B_SIMULATION
        } else {
            DEFAULT_B_REAL
        };
        EvaluationOptions {
            criteria: self.criteria.clone(),
            b: self.b.unwrap_or(default_b),
            alpha: self.alpha.unwrap_or(d.alpha),
            folds: self.folds.unwrap_or(d.folds),
            delta: self.delta.unwrap_or(d.delta),
            fw_pairs: self.fw_pairs.unwrap_or(d.fw_pairs),
            cvlk_folds: self.cvlk_folds.unwrap_or(d.cvlk_folds),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "data": {"csv": {"path": "x.csv", "label_column": "species"}},
        "menu": [
            {"backend": "GaussianEM", "k": [1, 3], "covariance_models": ["EII", "VVV"], "gammas": [1, "inf"]},
            {"backend": "KMeans", "k": 2}
        ],
        "criteria": ["BQS", "BIC"],
        "seed": 4
    }"#;

    #[test]
    fn menu_expands_over_grid() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let m = cfg.methods().unwrap();
        assert_eq!(m.len(), 2 * 2 * 3 + 1);
        assert_eq!(m[0].id(), "gmm-EII-g1-k1");
        assert_eq!(m.last().unwrap().id(), "kmeans-k2");
        assert_eq!(cfg.options().b, DEFAULT_B_REAL);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7"),
            MINIMAL.replace("\"criteria\": [\"BQS\", \"BIC\"]", "\"criteria\": []"),
            MINIMAL.replace("\"k\": 2}", "\"k\": 0}"),
            MINIMAL.replace("\"seed\": 4", "\"seed\": 4, \"alpha\": 1.5"),
            MINIMAL.replace("\"seed\": 4", "\"seed\": 4, \"unknown\": 1"),
            MINIMAL.replace("\"VVV\"", "\"EVE\""),
        ];
        for text in bad {
            assert!(
                matches!(ExperimentConfig::from_json(&text), Err(CliError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn simulation_source_and_round_trip() {
        let text = r#"{
            "schema_version": 1,
            "data": {"simulate": {"design": "T52D", "n": 300, "monte_carlo_reps": 5}},
            "menu": [{"backend": "GaussianEM", "k": [1, 2]}],
            "criteria": ["BQH"]
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert!(cfg.is_simulation());
        assert_eq!(cfg.options().b, DEFAULT_B_SIMULATION);
        assert!(cfg.require_seed().is_err());
        let again = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }
}
