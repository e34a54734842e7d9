use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ClimError, Result};

/// How missing entries are re-estimated each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImputationRule {
    /// Exact minimizer of the masked subproblem (requires symmetrized Laplacians).
    #[default]
    Masked,
    /// `R + E ⊙ (X − R)` with `R = W (F^v + F*)^T (I + L^v)^{-1}`.
    ClosedForm,
}

/// Hyperparameters of one model fit. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Weight of the l2,1 row-sparsity penalty on `W^v`.
    pub lambda: f64,
    /// Weight of the l1 penalty on `F^v`.
    pub beta: f64,
    /// Neighbors per similarity column.
    pub k: usize,
    pub n_clusters: usize,
    /// Orthogonality penalty weight for `F*`.
    pub rho: f64,
    /// Smoothing constant in the `D^v` reweighting.
    pub eps_dv: f64,
    pub inner_fv_steps: usize,
    pub adam_lr: f64,
    pub max_iter: usize,
    /// Relative objective change that stops the loop. `"inf"` runs one iteration.
    #[serde(serialize_with = "ser_tol", deserialize_with = "de_tol")]
    pub tol: f64,
    pub symmetrize_laplacians: bool,
    pub imputation: ImputationRule,
    /// Reject sub-updates that would increase their own subproblem objective.
    pub guard_updates: bool,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            beta: 0.1,
            k: 5,
            n_clusters: 2,
            rho: 1e4,
            eps_dv: 1e-8,
            inner_fv_steps: 10,
            adam_lr: 1e-3,
            max_iter: 200,
            tol: 1e-5,
            symmetrize_laplacians: true,
            imputation: ImputationRule::Masked,
            guard_updates: true,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn with_clusters(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("rho", self.rho),
            ("eps_dv", self.eps_dv),
            ("adam_lr", self.adam_lr),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ClimError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(ClimError::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.n_clusters == 0 || self.n_clusters > n_samples {
            return Err(ClimError::Config(format!(
                "n_clusters must lie in 1..={n_samples}, got {}",
                self.n_clusters
            )));
        }
        if self.k == 0 || self.k + 2 > n_samples {
            return Err(ClimError::Config(format!(
                "k must lie in 1..={} for {n_samples} samples (self-edges are excluded), got {}",
                n_samples.saturating_sub(2),
                self.k
            )));
        }
        if self.max_iter == 0 {
            return Err(ClimError::Config("max_iter must be at least 1".into()));
        }
        if self.imputation == ImputationRule::Masked && !self.symmetrize_laplacians {
            return Err(ClimError::Config(
                "the masked imputation rule needs symmetrize_laplacians = true".into(),
            ));
        }
        Ok(())
    }
}

fn ser_tol<S: Serializer>(tol: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if tol.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*tol)
    }
}

fn de_tol<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Tol {
        Num(f64),
        Text(String),
    }
    match Tol::deserialize(d)? {
        Tol::Num(x) => Ok(x),
        Tol::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
        Tol::Text(t) => Err(serde::de::Error::custom(format!("invalid tol {t:?}"))),
    }
}
