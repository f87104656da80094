//! Weighted marginal odds-ratio estimators.
//!
//! Every estimator is the same two-step recipe: compute per-record weights,
//! then form the weighted outcome rate in each group,
//!
//! ```text
//! p_g = sum_{i: G_i = g} cw_i W_i O_i / sum_{i: G_i = g} cw_i ,
//! ```
//!
//! shrink both rates towards 1/2 and take the log odds ratio.  The methods
//! differ only in the weights and in which (outcome, group) pair they use.

use serde::Serialize;

use crate::data_model::Dataset;
use crate::error::{Error, Result};
use crate::glm::DesignSpec;
use crate::nuisance::{fit_nuisance_models, NuisanceSpecs};
use crate::weights::{
    fit_gp_models, weights_confounding_only, weights_joint_model, weights_outcome_only_model,
    weights_unit, GpSpecs, WeightVector,
};

/// Default shrinkage sample-size constant.
pub const DEFAULT_S: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Unadjusted contrast of the observed surrogates.
    Crude,
    /// Propensity-weighted contrast of the observed surrogates.
    Ps,
    /// Complete-case analysis: propensity weighting within the validation
    /// subset on the true variables.
    Cca,
    /// Outcome-only misclassification correction.
    Gp,
    /// Joint exposure and outcome misclassification correction.
    Ipwm,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Crude => "crude",
            Method::Ps => "ps",
            Method::Cca => "cca",
            Method::Gp => "gp",
            Method::Ipwm => "ipwm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "crude" => Ok(Method::Crude),
            "ps" => Ok(Method::Ps),
            "cca" => Ok(Method::Cca),
            "gp" => Ok(Method::Gp),
            "ipwm" => Ok(Method::Ipwm),
            other => Err(Error::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// Shrinks a proportion towards 1/2 with pseudo-sample-size `s`:
/// `(p s + 1) / (s + 2)`.
pub fn shrink(p: f64, s: f64) -> f64 {
    (p * s + 1.0) / (s + 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrResult {
    pub method: Option<Method>,
    /// Weighted outcome rate in the exposed group, before shrinkage.
    pub p1: f64,
    /// Weighted outcome rate in the unexposed group, before shrinkage.
    pub p0: f64,
    /// Shrunk rates actually used in the contrast.
    pub p1_star: f64,
    pub p0_star: f64,
    pub s: f64,
    pub log_or: f64,
}

impl OrResult {
    pub fn odds_ratio(&self) -> f64 {
        self.log_or.exp()
    }
}

/// The weighted marginal odds ratio of `outcome` over the binary `group`.
pub fn weighted_or(
    outcome: &[f64],
    group: &[f64],
    ipw: &[f64],
    case_w: Option<&[f64]>,
    s: f64,
) -> Result<OrResult> {
    if outcome.len() != group.len() || outcome.len() != ipw.len() {
        return Err(Error::InvalidInput("outcome, group and weights differ in length".into()));
    }
    if s <= 0.0 || !s.is_finite() {
        return Err(Error::InvalidInput(format!("shrinkage constant must be positive, got {s}")));
    }
    let mut num = [0.0f64; 2];
    let mut den = [0.0f64; 2];
    for i in 0..outcome.len() {
        let g = match group[i] {
            v if v == 0.0 => 0usize,
            v if v == 1.0 => 1usize,
            other => {
                return Err(Error::InvalidInput(format!(
                    "group must be binary, found {other}"
                )))
            }
        };
        if outcome[i].is_nan() || ipw[i].is_nan() {
            return Err(Error::MissingValues("outcome or weight".into()));
        }
        let cw = case_w.map_or(1.0, |w| w[i]);
        num[g] += cw * ipw[i] * outcome[i];
        den[g] += cw;
    }
    for (g, &d) in den.iter().enumerate() {
        if d <= 0.0 {
            return Err(Error::DegenerateGroup(g as u8));
        }
    }
    let p0 = num[0] / den[0];
    let p1 = num[1] / den[1];
    let p0_star = shrink(p0, s);
    let p1_star = shrink(p1, s);
    let log_or =
        (p1_star / (1.0 - p1_star)).ln() - (p0_star / (1.0 - p0_star)).ln();
    Ok(OrResult { method: None, p1, p0, p1_star, p0_star, s, log_or })
}

/// Weighted odds ratio of two named dataset columns under precomputed
/// weights, honoring grouped case weights.
pub fn estimate_with_weights(
    ds: &Dataset,
    outcome_col: &str,
    group_col: &str,
    wv: &WeightVector,
    s: f64,
) -> Result<OrResult> {
    let outcome = ds.column(outcome_col)?;
    let group = ds.column(group_col)?;
    let case_w: Option<Vec<f64>> = if ds.case_weights.is_some() {
        Some((0..ds.len()).map(|i| ds.case_weight(i)).collect())
    } else {
        None
    };
    weighted_or(outcome, group, &wv.w, case_w.as_deref(), s)
}

/// Model specifications and tuning constants shared by all methods.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub s: f64,
    /// Joint-correction model set.
    pub nuisance: NuisanceSpecs,
    /// Outcome-only correction model set.
    pub gp: GpSpecs,
    /// Propensity model of the surrogate exposure on the covariates.
    pub propensity_b: DesignSpec,
    /// Propensity model of the true exposure, for the complete-case method.
    pub propensity_a: DesignSpec,
}

impl EstimatorConfig {
    /// Main-effects models over covariates `l1..lk`.
    pub fn main_effects(k: usize) -> Self {
        let ls: Vec<String> = (1..=k).map(|i| format!("l{i}")).collect();
        let lrefs: Vec<&str> = ls.iter().map(|s| s.as_str()).collect();
        EstimatorConfig {
            s: DEFAULT_S,
            nuisance: NuisanceSpecs::main_effects(k),
            gp: GpSpecs::main_effects(k),
            propensity_b: DesignSpec::main_effects("b", &lrefs),
            propensity_a: DesignSpec::main_effects("a", &lrefs),
        }
    }

    /// Saturated models for a single binary covariate.
    pub fn saturated_binary_l() -> Self {
        EstimatorConfig {
            s: DEFAULT_S,
            nuisance: NuisanceSpecs::saturated_binary_l(),
            gp: GpSpecs::saturated_binary_l(),
            propensity_b: DesignSpec::parse("b ~ l1").expect("fixed formula"),
            propensity_a: DesignSpec::parse("a ~ l1").expect("fixed formula"),
        }
    }
}

/// Runs one estimator end to end: fits whatever models it needs, forms the
/// weights, and returns the weighted odds ratio.
pub fn estimate(method: Method, ds: &Dataset, cfg: &EstimatorConfig) -> Result<OrResult> {
    let mut result = match method {
        Method::Crude => estimate_with_weights(ds, "z", "b", &weights_unit(ds), cfg.s)?,
        Method::Ps => {
            let wv = weights_confounding_only(ds, &cfg.propensity_b)?;
            estimate_with_weights(ds, "z", "b", &wv, cfg.s)?
        }
        Method::Cca => {
            let sub = ds.validation_subset()?;
            let wv = weights_confounding_only(&sub, &cfg.propensity_a)?;
            estimate_with_weights(&sub, "y", "a", &wv, cfg.s)?
        }
        Method::Gp => {
            let models = fit_gp_models(ds, &cfg.gp)?;
            let wv = weights_outcome_only_model(ds, &models)?;
            estimate_with_weights(ds, "z", "b", &wv, cfg.s)?
        }
        Method::Ipwm => {
            let models = fit_nuisance_models(ds, &cfg.nuisance)?;
            let wv = weights_joint_model(ds, &models)?;
            estimate_with_weights(ds, "z", "b", &wv, cfg.s)?
        }
    };
    result.method = Some(method);
    Ok(result)
}
