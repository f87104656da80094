//! Inverse-probability weights for the weighted odds-ratio estimators.
//!
//! All joint-misclassification weights implement
//!
//! ```text
//! W = p(B) * Pr(Y=1 | A=B, L) / Pr(Z=1, B | L)
//! ```
//!
//! either from an explicit parameter vector over a single binary covariate,
//! or from fitted regression models over arbitrary covariates via the
//! predictive-value factorization
//!
//! ```text
//! W = sum_{z',b'} pi*(B,z',b',L) lam*(z',b',L)^B ... / sum_{z',b'} ...
//!       * p(B) / (Pr(Z=1|B,L) * Pr(B|L)),
//! ```
//!
//! which marginalizes the validation-subset models over the surrogate
//! distribution.  The outcome-only weights drop the exposure correction and
//! reduce to `p(B) * Pr(Y=1|B,L) / Pr(Z=1, B|L)`.

use std::collections::HashMap;

use crate::data_model::Dataset;
use crate::error::{Error, Result};
use crate::glm::{clamp_prob, expit, fit_formula, DesignSpec, LogisticFit};
use crate::nuisance::{
    joint_from_sensspec, NuisanceModels, PredictiveValueParams, SensSpecParams,
};

/// A per-record weight vector together with a short provenance label.
#[derive(Debug, Clone)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub provenance: &'static str,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

fn bern(p: f64, outcome: u8) -> f64 {
    if outcome == 1 {
        p
    } else {
        1.0 - p
    }
}

fn binary_column(ds: &Dataset, name: &str) -> Result<Vec<u8>> {
    ds.column(name)?
        .iter()
        .map(|&v| match v {
            v if v == 0.0 => Ok(0u8),
            v if v == 1.0 => Ok(1u8),
            other => Err(Error::InvalidInput(format!(
                "column '{name}' must be binary, found {other}"
            ))),
        })
        .collect()
}

/// Case-weighted marginal rate of a binary column.
pub fn marginal_rate(ds: &Dataset, name: &str) -> Result<f64> {
    let col = ds.column(name)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &v) in col.iter().enumerate() {
        let cw = ds.case_weight(i);
        num += cw * v;
        den += cw;
    }
    if den <= 0.0 {
        return Err(Error::ZeroMass(format!("marginal of '{name}'")));
    }
    Ok(num / den)
}

/// Unit weights, i.e. no adjustment at all.
pub fn weights_unit(ds: &Dataset) -> WeightVector {
    WeightVector { w: vec![1.0; ds.len()], provenance: "unit" }
}

/// Marginal-stabilized propensity weights `p(G) / Pr(G | L)` for the group
/// variable named by `spec.response`.
pub fn weights_confounding_only(ds: &Dataset, spec: &DesignSpec) -> Result<WeightVector> {
    let group = binary_column(ds, &spec.response)?;
    let fit = fit_formula(ds, spec)?;
    let p1 = marginal_rate(ds, &spec.response)?;
    let mut w = Vec::with_capacity(ds.len());
    let overrides = HashMap::new();
    for (i, &g) in group.iter().enumerate() {
        let lookup = ds.row_lookup(i, &overrides);
        let row = spec.eval_row(&lookup)?;
        let pr = clamp_prob(fit.predict_prob(&row)?);
        w.push(bern(p1, g) / bern(pr, g));
    }
    Ok(WeightVector { w, provenance: "confounding-only" })
}

/// Joint-misclassification weights from an explicit
/// sensitivity/specificity parameter vector over a single binary covariate.
pub fn weights_joint_sensspec(ds: &Dataset, params: &SensSpecParams) -> Result<WeightVector> {
    let b = binary_column(ds, "b")?;
    let l = binary_column(ds, "l1")?;
    let p_b1 = marginal_rate(ds, "b")?;

    // Pr(Z=1, B=b | L=l) from the exact joint
    let mut pr_z1b = [[0.0f64; 2]; 2];
    for li in 0..2u8 {
        let joint = joint_from_sensspec(params, li);
        for bi in 0..2usize {
            pr_z1b[bi][li as usize] =
                (0..2).flat_map(|y| (0..2).map(move |a| joint[1][bi][y][a])).sum();
        }
    }

    let mut w = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let (bi, li) = (b[i] as usize, l[i] as usize);
        let num = bern(p_b1, b[i]) * params.epsilon[bi][li];
        let den = pr_z1b[bi][li];
        if den <= 0.0 {
            return Err(Error::Positivity(format!("Pr(Z=1, B={bi} | L={li}) is zero")));
        }
        w.push(num / den);
    }
    Ok(WeightVector { w, provenance: "joint (sens/spec form)" })
}

/// Joint-misclassification weights from an explicit predictive-value
/// parameter vector over a single binary covariate.
pub fn weights_joint_predictive(
    ds: &Dataset,
    params: &PredictiveValueParams,
) -> Result<WeightVector> {
    let b = binary_column(ds, "b")?;
    let l = binary_column(ds, "l1")?;
    let p_b1 = marginal_rate(ds, "b")?;

    let mut w = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let (bi, li) = (b[i] as usize, l[i] as usize);
        let mut num = 0.0;
        let mut den = 0.0;
        for zp in 0..2usize {
            for bp in 0..2usize {
                let przb =
                    bern(params.epsilon_star[bp][li], zp as u8) * bern(params.delta_star[li], bp as u8);
                let pr_ab = bern(params.lambda_star[zp][bp][li], b[i]);
                let py = params.pi_star[bi][zp][bp][li];
                num += py * pr_ab * przb;
                den += pr_ab * przb;
            }
        }
        let stabilizer = bern(params.epsilon_star[bi][li], 1) * bern(params.delta_star[li], b[i]);
        if den <= 0.0 || stabilizer <= 0.0 {
            return Err(Error::Positivity(format!(
                "degenerate surrogate distribution at (b={bi}, l={li})"
            )));
        }
        w.push(num / den * bern(p_b1, b[i]) / stabilizer);
    }
    Ok(WeightVector { w, provenance: "joint (predictive-value form)" })
}

/// A predictor value during out-of-sample prediction: the record's own
/// column, a counterfactual constant, or a substituted column.
enum Source<'a> {
    Const(f64),
    Col(&'a [f64]),
}

/// Fitted probabilities for every record with some predictors overridden.
/// Columns are resolved once up front so the per-row work is a plain dot
/// product.
fn predict_column(
    ds: &Dataset,
    fit: &LogisticFit,
    spec: &DesignSpec,
    overrides: &[(&str, Source)],
) -> Result<Vec<f64>> {
    let mut sources: HashMap<&str, Source> = HashMap::new();
    for v in spec.rhs_variables() {
        sources.insert(v, Source::Col(ds.column(v)?));
    }
    for (name, src) in overrides {
        if sources.contains_key(name) {
            sources.insert(
                name,
                match src {
                    Source::Const(c) => Source::Const(*c),
                    Source::Col(c) => Source::Col(c),
                },
            );
        }
    }
    let terms: Vec<Vec<&Source>> = spec
        .terms
        .iter()
        .map(|t| t.iter().map(|f| &sources[f.as_str()]).collect())
        .collect();
    let coefs = &fit.coefficients;
    let skip = usize::from(spec.intercept);

    let mut out = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let mut eta = if spec.intercept { coefs[0] } else { 0.0 };
        for (term, &c) in terms.iter().zip(&coefs[skip..]) {
            let mut v = 1.0;
            for src in term {
                v *= match src {
                    Source::Const(x) => *x,
                    Source::Col(col) => col[i],
                };
            }
            eta += c * v;
        }
        out.push(clamp_prob(expit(eta)));
    }
    Ok(out)
}

/// Joint-misclassification weights from fitted regression models, for
/// arbitrary covariate vectors.
pub fn weights_joint_model(ds: &Dataset, models: &NuisanceModels) -> Result<WeightVector> {
    let b = binary_column(ds, "b")?;
    let b_col = ds.column("b")?;
    let p_b1 = marginal_rate(ds, "b")?;
    let n = ds.len();

    let pb1 = predict_column(ds, &models.b_fit, &models.specs.b, &[])?;
    let pz1_at_b = predict_column(ds, &models.z_fit, &models.specs.z, &[])?;
    // per (z', b') combination: Pr(Z=1|b',L), Pr(A=1|z',b',L), Pr(Y=1|A=B,z',b',L)
    let mut pz1 = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    let mut pa1 = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    let mut py = [[Vec::new(), Vec::new()], [Vec::new(), Vec::new()]];
    for zp in 0..2usize {
        for bp in 0..2usize {
            let vars = [
                ("z", Source::Const(zp as f64)),
                ("b", Source::Const(bp as f64)),
            ];
            pz1[zp][bp] = predict_column(ds, &models.z_fit, &models.specs.z, &vars)?;
            pa1[zp][bp] = predict_column(ds, &models.a_fit, &models.specs.a, &vars)?;
            let yvars = [
                ("z", Source::Const(zp as f64)),
                ("b", Source::Const(bp as f64)),
                ("a", Source::Col(b_col)),
            ];
            py[zp][bp] = predict_column(ds, &models.y_fit, &models.specs.y, &yvars)?;
        }
    }

    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let bi = b[i];
        let mut num = 0.0;
        let mut den = 0.0;
        for zp in 0..2usize {
            for bp in 0..2usize {
                let przb = bern(pz1[zp][bp][i], zp as u8) * bern(pb1[i], bp as u8);
                let pr_ab = bern(pa1[zp][bp][i], bi);
                num += py[zp][bp][i] * pr_ab * przb;
                den += pr_ab * przb;
            }
        }
        let stabilizer = pz1_at_b[i] * bern(pb1[i], bi);
        if den <= 0.0 || stabilizer <= 0.0 {
            return Err(Error::Positivity(format!("degenerate surrogate distribution at record {i}")));
        }
        w.push(num / den * bern(p_b1, bi) / stabilizer);
    }
    Ok(WeightVector { w, provenance: "joint (model-based)" })
}

/// Outcome-only correction weights `p(B) * Pr(Y=1|B,L) / Pr(Z=1, B|L)` from
/// an explicit predictive-value parameter vector.
pub fn weights_outcome_only(
    ds: &Dataset,
    params: &PredictiveValueParams,
) -> Result<WeightVector> {
    let b = binary_column(ds, "b")?;
    let l = binary_column(ds, "l1")?;
    let p_b1 = marginal_rate(ds, "b")?;

    let mut w = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let (bi, li) = (b[i] as usize, l[i] as usize);
        // Pr(Y=1 | B, L) marginalized over (Z, A)
        let mut py = 0.0;
        for zp in 0..2usize {
            let pz = bern(params.epsilon_star[bi][li], zp as u8);
            for ap in 0..2usize {
                let pa = bern(params.lambda_star[zp][bi][li], ap as u8);
                py += pz * pa * params.pi_star[ap][zp][bi][li];
            }
        }
        let den = params.epsilon_star[bi][li] * bern(params.delta_star[li], b[i]);
        if den <= 0.0 {
            return Err(Error::Positivity(format!("Pr(Z=1, B={bi} | L={li}) is zero")));
        }
        w.push(bern(p_b1, b[i]) * py / den);
    }
    Ok(WeightVector { w, provenance: "outcome-only" })
}

/// Formula specs for the outcome-only (three model) correction.
#[derive(Debug, Clone)]
pub struct GpSpecs {
    /// Model of `Y` given `(z, b, l*)`; fit on the validation subset.
    pub y: DesignSpec,
    /// Model of `B` given `(z, l*)`; fit on all records.
    pub b: DesignSpec,
    /// Model of `Z` given `l*`; fit on all records.
    pub z: DesignSpec,
}

impl GpSpecs {
    pub fn main_effects(k: usize) -> Self {
        let ls: Vec<String> = (1..=k).map(|i| format!("l{i}")).collect();
        GpSpecs {
            y: crate::nuisance::main_effects_with("y", &["z", "b"], &ls),
            b: crate::nuisance::main_effects_with("b", &["z"], &ls),
            z: crate::nuisance::main_effects_with("z", &[], &ls),
        }
    }

    pub fn saturated_binary_l() -> Self {
        GpSpecs {
            y: DesignSpec::parse("y ~ z*b*l1").expect("fixed formula"),
            b: DesignSpec::parse("b ~ z*l1").expect("fixed formula"),
            z: DesignSpec::parse("z ~ l1").expect("fixed formula"),
        }
    }
}

/// Fitted models for the outcome-only correction.
#[derive(Debug, Clone)]
pub struct GpModels {
    pub y_fit: LogisticFit,
    pub b_fit: LogisticFit,
    pub z_fit: LogisticFit,
    pub specs: GpSpecs,
}

pub fn fit_gp_models(ds: &Dataset, specs: &GpSpecs) -> Result<GpModels> {
    for v in specs.z.rhs_variables() {
        if ["y", "a", "b"].contains(&v) {
            return Err(Error::Formula(format!("Z model may not reference '{v}'")));
        }
    }
    for v in specs.b.rhs_variables() {
        if ["y", "a"].contains(&v) {
            return Err(Error::Formula(format!("B model may not reference '{v}'")));
        }
    }
    let validation = ds.validation_subset()?;
    let y_fit = fit_formula(&validation, &specs.y)?;
    let b_fit = fit_formula(ds, &specs.b)?;
    let z_fit = fit_formula(ds, &specs.z)?;
    Ok(GpModels { y_fit, b_fit, z_fit, specs: specs.clone() })
}

/// Outcome-only correction weights from fitted regression models.
pub fn weights_outcome_only_model(ds: &Dataset, models: &GpModels) -> Result<WeightVector> {
    let b = binary_column(ds, "b")?;
    let p_b1 = marginal_rate(ds, "b")?;

    let pz1 = predict_column(ds, &models.z_fit, &models.specs.z, &[])?;
    let mut pb1 = [Vec::new(), Vec::new()]; // Pr(B=1 | z', L), indexed by z'
    let mut pyz = [Vec::new(), Vec::new()]; // Pr(Y=1 | z', B, L)
    for zp in 0..2usize {
        let vars = [("z", Source::Const(zp as f64))];
        pb1[zp] = predict_column(ds, &models.b_fit, &models.specs.b, &vars)?;
        pyz[zp] = predict_column(ds, &models.y_fit, &models.specs.y, &vars)?;
    }

    let mut w = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let bi = b[i];
        // joint over (z', B=b_i); its z'-sum is the B-margin
        let mut joint_b = [0.0f64; 2]; // indexed by z'
        let mut pr_b = 0.0;
        for zp in 0..2usize {
            joint_b[zp] = bern(pb1[zp][i], bi) * bern(pz1[i], zp as u8);
            pr_b += joint_b[zp];
        }
        if pr_b <= 0.0 || joint_b[1] <= 0.0 {
            return Err(Error::Positivity(format!("degenerate surrogate distribution at record {i}")));
        }
        // Pr(Y=1 | B, L) = sum_z Pr(Y=1 | z, B, L) Pr(z | B, L)
        let mut py = 0.0;
        for zp in 0..2usize {
            py += pyz[zp][i] * joint_b[zp] / pr_b;
        }
        // Pr(Z=1, B | L) = joint_b[1]
        w.push(bern(p_b1, bi) * py / joint_b[1]);
    }
    Ok(WeightVector { w, provenance: "outcome-only (model-based)" })
}
