//! Nuisance parameters of the misclassification model, in both
//! parameterizations, and the bijection between them.
//!
//! Sensitivity/specificity parameterization (conditionals of surrogates
//! given truth):
//!
//! * `delta[l] = Pr(A=1|L=l)`
//! * `epsilon[a][l] = Pr(Y=1|A=a,L=l)`
//! * `lambda[y][a][l] = Pr(B=1|Y=y,A=a,L=l)`
//! * `pi[b][y][a][l] = Pr(Z=1|B=b,Y=y,A=a,L=l)`
//!
//! Predictive-value parameterization (conditionals of truth given
//! surrogates):
//!
//! * `delta_star[l] = Pr(B=1|L=l)`
//! * `epsilon_star[b][l] = Pr(Z=1|B=b,L=l)`
//! * `lambda_star[z][b][l] = Pr(A=1|Z=z,B=b,L=l)`
//! * `pi_star[a][z][b][l] = Pr(Y=1|A=a,Z=z,B=b,L=l)`

use std::collections::HashMap;
use std::fmt;

use crate::data_model::{m_index_unvalidated, m_index_validated, CellCountTable, Dataset, TableDims};
use crate::error::{Error, Result};
use crate::glm::{clamp_prob, fit_formula, DesignSpec, LogisticFit};

#[derive(Debug, Clone, PartialEq)]
pub struct SensSpecParams {
    pub delta: [f64; 2],
    pub epsilon: [[f64; 2]; 2],
    pub lambda: [[[f64; 2]; 2]; 2],
    pub pi: [[[[f64; 2]; 2]; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveValueParams {
    pub delta_star: [f64; 2],
    pub epsilon_star: [[f64; 2]; 2],
    pub lambda_star: [[[f64; 2]; 2]; 2],
    pub pi_star: [[[[f64; 2]; 2]; 2]; 2],
}

impl fmt::Display for PredictiveValueParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.flat_map() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

impl PredictiveValueParams {
    /// Flat `key -> value` view for CLI inspection.
    pub fn flat_map(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(30);
        for l in 0..2 {
            out.push((format!("delta*[l={l}]"), self.delta_star[l]));
        }
        for b in 0..2 {
            for l in 0..2 {
                out.push((format!("epsilon*[b={b},l={l}]"), self.epsilon_star[b][l]));
            }
        }
        for z in 0..2 {
            for b in 0..2 {
                for l in 0..2 {
                    out.push((format!("lambda*[z={z},b={b},l={l}]"), self.lambda_star[z][b][l]));
                }
            }
        }
        for a in 0..2 {
            for z in 0..2 {
                for b in 0..2 {
                    for l in 0..2 {
                        out.push((
                            format!("pi*[a={a},z={z},b={b},l={l}]"),
                            self.pi_star[a][z][b][l],
                        ));
                    }
                }
            }
        }
        out
    }
}

impl SensSpecParams {
    pub fn flat_map(&self) -> Vec<(String, f64)> {
        let mut out = Vec::with_capacity(30);
        for l in 0..2 {
            out.push((format!("delta[l={l}]"), self.delta[l]));
        }
        for a in 0..2 {
            for l in 0..2 {
                out.push((format!("epsilon[a={a},l={l}]"), self.epsilon[a][l]));
            }
        }
        for y in 0..2 {
            for a in 0..2 {
                for l in 0..2 {
                    out.push((format!("lambda[y={y},a={a},l={l}]"), self.lambda[y][a][l]));
                }
            }
        }
        for b in 0..2 {
            for y in 0..2 {
                for a in 0..2 {
                    for l in 0..2 {
                        out.push((format!("pi[b={b},y={y},a={a},l={l}]"), self.pi[b][y][a][l]));
                    }
                }
            }
        }
        out
    }
}

fn ratio(name: &str, num: f64, den: f64, missing: &mut Vec<String>) -> f64 {
    if den <= 0.0 {
        missing.push(name.to_string());
        f64::NAN
    } else {
        clamp_prob(num / den)
    }
}

/// Closed-form maximum likelihood estimates of the predictive-value
/// parameters from the `m_1..m_48` vector.
pub fn closed_form_mle(m: &CellCountTable) -> Result<PredictiveValueParams> {
    if m.dims() != TableDims::Validation {
        return Err(Error::UnsupportedDimension("expected a validation-type table".into()));
    }
    let mv = |z: u8, b: u8, y: u8, a: u8, l: u8| m.m(m_index_validated(z, b, y, a, l));
    let mu = |z: u8, b: u8, l: u8| m.m(m_index_unvalidated(z, b, l));
    let mut missing = Vec::new();

    let mut delta_star = [0.0; 2];
    for l in 0..2u8 {
        let mut num = 0.0;
        let mut den = 0.0;
        for z in 0..2u8 {
            for b in 0..2u8 {
                let mut cell = mu(z, b, l);
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        cell += mv(z, b, y, a, l);
                    }
                }
                den += cell;
                if b == 1 {
                    num += cell;
                }
            }
        }
        delta_star[l as usize] = ratio(&format!("delta*[l={l}]"), num, den, &mut missing);
    }

    let mut epsilon_star = [[0.0; 2]; 2];
    for b in 0..2u8 {
        for l in 0..2u8 {
            let mut num = 0.0;
            let mut den = 0.0;
            for z in 0..2u8 {
                let mut cell = mu(z, b, l);
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        cell += mv(z, b, y, a, l);
                    }
                }
                den += cell;
                if z == 1 {
                    num += cell;
                }
            }
            epsilon_star[b as usize][l as usize] =
                ratio(&format!("epsilon*[b={b},l={l}]"), num, den, &mut missing);
        }
    }

    let mut lambda_star = [[[0.0; 2]; 2]; 2];
    for z in 0..2u8 {
        for b in 0..2u8 {
            for l in 0..2u8 {
                let mut num = 0.0;
                let mut den = 0.0;
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        let cell = mv(z, b, y, a, l);
                        den += cell;
                        if a == 1 {
                            num += cell;
                        }
                    }
                }
                lambda_star[z as usize][b as usize][l as usize] =
                    ratio(&format!("lambda*[z={z},b={b},l={l}]"), num, den, &mut missing);
            }
        }
    }

    let mut pi_star = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2u8 {
        for z in 0..2u8 {
            for b in 0..2u8 {
                for l in 0..2u8 {
                    let num = mv(z, b, 1, a, l);
                    let den = num + mv(z, b, 0, a, l);
                    pi_star[a as usize][z as usize][b as usize][l as usize] =
                        ratio(&format!("pi*[a={a},z={z},b={b},l={l}]"), num, den, &mut missing);
                }
            }
        }
    }

    if !missing.is_empty() {
        return Err(Error::Inestimable(missing));
    }
    Ok(PredictiveValueParams { delta_star, epsilon_star, lambda_star, pi_star })
}

fn ln_bern(p: f64, outcome: u8) -> f64 {
    if outcome == 1 {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

/// Log-likelihood of the predictive-value parameterization over grouped
/// counts; the structurally-zero one-sided validation types contribute 0.
pub fn loglik_predictive(params: &PredictiveValueParams, m: &CellCountTable) -> f64 {
    let mut ll = 0.0;
    for l in 0..2u8 {
        for z in 0..2u8 {
            for b in 0..2u8 {
                let count = m.m(m_index_unvalidated(z, b, l));
                if count > 0.0 {
                    ll += count
                        * (ln_bern(params.epsilon_star[b as usize][l as usize], z)
                            + ln_bern(params.delta_star[l as usize], b));
                }
                for y in 0..2u8 {
                    for a in 0..2u8 {
                        let count = m.m(m_index_validated(z, b, y, a, l));
                        if count > 0.0 {
                            ll += count
                                * (ln_bern(
                                    params.pi_star[a as usize][z as usize][b as usize][l as usize],
                                    y,
                                ) + ln_bern(
                                    params.lambda_star[z as usize][b as usize][l as usize],
                                    a,
                                ) + ln_bern(params.epsilon_star[b as usize][l as usize], z)
                                    + ln_bern(params.delta_star[l as usize], b));
                        }
                    }
                }
            }
        }
    }
    ll
}

/// Joint distribution of `(Z, B, Y, A)` given `L = l`, indexed `[z][b][y][a]`.
pub fn joint_from_sensspec(p: &SensSpecParams, l: u8) -> [[[[f64; 2]; 2]; 2]; 2] {
    let li = l as usize;
    let mut joint = [[[[0.0; 2]; 2]; 2]; 2];
    for z in 0..2usize {
        for b in 0..2usize {
            for y in 0..2usize {
                for a in 0..2usize {
                    let pi = p.pi[b][y][a][li];
                    let lam = p.lambda[y][a][li];
                    let eps = p.epsilon[a][li];
                    let del = p.delta[li];
                    joint[z][b][y][a] = bern(pi, z) * bern(lam, b) * bern(eps, y) * bern(del, a);
                }
            }
        }
    }
    joint
}

/// Joint distribution of `(Z, B, Y, A)` given `L = l` from the
/// predictive-value factorization.
pub fn joint_from_predictive(p: &PredictiveValueParams, l: u8) -> [[[[f64; 2]; 2]; 2]; 2] {
    let li = l as usize;
    let mut joint = [[[[0.0; 2]; 2]; 2]; 2];
    for z in 0..2usize {
        for b in 0..2usize {
            for y in 0..2usize {
                for a in 0..2usize {
                    let pi = p.pi_star[a][z][b][li];
                    let lam = p.lambda_star[z][b][li];
                    let eps = p.epsilon_star[b][li];
                    let del = p.delta_star[li];
                    joint[z][b][y][a] = bern(pi, y) * bern(lam, a) * bern(eps, z) * bern(del, b);
                }
            }
        }
    }
    joint
}

fn bern(p: f64, outcome: usize) -> f64 {
    if outcome == 1 {
        p
    } else {
        1.0 - p
    }
}

fn conditional(num: f64, den: f64, cell: &str) -> Result<f64> {
    if den <= 0.0 {
        Err(Error::ZeroMass(cell.to_string()))
    } else {
        Ok(num / den)
    }
}

/// Maps the sensitivity/specificity parameters to the predictive-value
/// parameters by constructing the exact 16-cell joint per stratum of `L` and
/// reading off the other factorization's conditionals.
pub fn convert_to_predictive(p: &SensSpecParams) -> Result<PredictiveValueParams> {
    let mut out = PredictiveValueParams {
        delta_star: [0.0; 2],
        epsilon_star: [[0.0; 2]; 2],
        lambda_star: [[[0.0; 2]; 2]; 2],
        pi_star: [[[[0.0; 2]; 2]; 2]; 2],
    };
    for l in 0..2u8 {
        let joint = joint_from_sensspec(p, l);
        let li = l as usize;
        let mass_b = |b: usize| -> f64 {
            (0..2).flat_map(|z| (0..2).flat_map(move |y| (0..2).map(move |a| joint[z][b][y][a]))).sum()
        };
        out.delta_star[li] = conditional(mass_b(1), mass_b(0) + mass_b(1), &format!("B|l={l}"))?;
        for b in 0..2usize {
            let mass_zb = |z: usize| -> f64 {
                (0..2).flat_map(|y| (0..2).map(move |a| joint[z][b][y][a])).sum()
            };
            out.epsilon_star[b][li] = conditional(
                mass_zb(1),
                mass_zb(0) + mass_zb(1),
                &format!("Z|b={b},l={l}"),
            )?;
            for z in 0..2usize {
                let mass_a = |a: usize| -> f64 { (0..2).map(|y| joint[z][b][y][a]).sum() };
                out.lambda_star[z][b][li] = conditional(
                    mass_a(1),
                    mass_a(0) + mass_a(1),
                    &format!("A|z={z},b={b},l={l}"),
                )?;
                for a in 0..2usize {
                    out.pi_star[a][z][b][li] = conditional(
                        joint[z][b][1][a],
                        joint[z][b][0][a] + joint[z][b][1][a],
                        &format!("Y|a={a},z={z},b={b},l={l}"),
                    )?;
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`convert_to_predictive`].
pub fn convert_to_sensspec(p: &PredictiveValueParams) -> Result<SensSpecParams> {
    let mut out = SensSpecParams {
        delta: [0.0; 2],
        epsilon: [[0.0; 2]; 2],
        lambda: [[[0.0; 2]; 2]; 2],
        pi: [[[[0.0; 2]; 2]; 2]; 2],
    };
    for l in 0..2u8 {
        let joint = joint_from_predictive(p, l);
        let li = l as usize;
        let mass_a = |a: usize| -> f64 {
            (0..2).flat_map(|z| (0..2).flat_map(move |b| (0..2).map(move |y| joint[z][b][y][a]))).sum()
        };
        out.delta[li] = conditional(mass_a(1), mass_a(0) + mass_a(1), &format!("A|l={l}"))?;
        for a in 0..2usize {
            let mass_ya = |y: usize| -> f64 {
                (0..2).flat_map(|z| (0..2).map(move |b| joint[z][b][y][a])).sum()
            };
            out.epsilon[a][li] = conditional(
                mass_ya(1),
                mass_ya(0) + mass_ya(1),
                &format!("Y|a={a},l={l}"),
            )?;
            for y in 0..2usize {
                let mass_b = |b: usize| -> f64 { (0..2).map(|z| joint[z][b][y][a]).sum() };
                out.lambda[y][a][li] = conditional(
                    mass_b(1),
                    mass_b(0) + mass_b(1),
                    &format!("B|y={y},a={a},l={l}"),
                )?;
                for b in 0..2usize {
                    out.pi[b][y][a][li] = conditional(
                        joint[1][b][y][a],
                        joint[0][b][y][a] + joint[1][b][y][a],
                        &format!("Z|b={b},y={y},a={a},l={l}"),
                    )?;
                }
            }
        }
    }
    Ok(out)
}

/// Reads the exact sensitivity/specificity parameters off a full joint
/// `(Z,B,Y,A,L)` table by the chain rule.
pub fn sensspec_from_table(table: &CellCountTable) -> Result<SensSpecParams> {
    if table.dims() != TableDims::Zbyal {
        return Err(Error::UnsupportedDimension("expected a full joint table".into()));
    }
    let cell = |z: u8, b: u8, y: u8, a: u8, l: u8| table.zbyal(z, b, y, a, l);
    let mut out = SensSpecParams {
        delta: [0.0; 2],
        epsilon: [[0.0; 2]; 2],
        lambda: [[[0.0; 2]; 2]; 2],
        pi: [[[[0.0; 2]; 2]; 2]; 2],
    };
    for l in 0..2u8 {
        let mass_a = |a: u8| -> f64 {
            let mut m = 0.0;
            for z in 0..2u8 {
                for b in 0..2u8 {
                    for y in 0..2u8 {
                        m += cell(z, b, y, a, l);
                    }
                }
            }
            m
        };
        out.delta[l as usize] =
            conditional(mass_a(1), mass_a(0) + mass_a(1), &format!("A|l={l}"))?;
        for a in 0..2u8 {
            let mass_ya = |y: u8| -> f64 {
                let mut m = 0.0;
                for z in 0..2u8 {
                    for b in 0..2u8 {
                        m += cell(z, b, y, a, l);
                    }
                }
                m
            };
            out.epsilon[a as usize][l as usize] =
                conditional(mass_ya(1), mass_ya(0) + mass_ya(1), &format!("Y|a={a},l={l}"))?;
            for y in 0..2u8 {
                let mass_b = |b: u8| -> f64 { cell(0, b, y, a, l) + cell(1, b, y, a, l) };
                out.lambda[y as usize][a as usize][l as usize] =
                    conditional(mass_b(1), mass_b(0) + mass_b(1), &format!("B|y={y},a={a},l={l}"))?;
                for b in 0..2u8 {
                    out.pi[b as usize][y as usize][a as usize][l as usize] = conditional(
                        cell(1, b, y, a, l),
                        cell(0, b, y, a, l) + cell(1, b, y, a, l),
                        &format!("Z|b={b},y={y},a={a},l={l}"),
                    )?;
                }
            }
        }
    }
    Ok(out)
}

/// Main-effects spec for `extra` variables followed by covariates `ls`.
pub(crate) fn main_effects_with(response: &str, extra: &[&str], ls: &[String]) -> DesignSpec {
    let mut vars: Vec<&str> = extra.to_vec();
    vars.extend(ls.iter().map(|s| s.as_str()));
    DesignSpec::main_effects(response, &vars)
}

/// Formula specs for the four predictive-value models.
#[derive(Debug, Clone)]
pub struct NuisanceSpecs {
    /// Model of `Y`; may reference `(a, z, b, l*)`.  Fit on the validation subset.
    pub y: DesignSpec,
    /// Model of `A`; may reference `(z, b, l*)`.  Fit on the validation subset.
    pub a: DesignSpec,
    /// Model of `Z`; may reference `(b, l*)`.  Fit on all records.
    pub z: DesignSpec,
    /// Model of `B`; may reference `(z, l*)`.  Fit on all records.
    pub b: DesignSpec,
}

impl NuisanceSpecs {
    /// The main-effects model set for covariates `l1..lk`.
    pub fn main_effects(k: usize) -> Self {
        let ls: Vec<String> = (1..=k).map(|i| format!("l{i}")).collect();
        NuisanceSpecs {
            y: main_effects_with("y", &["a", "z", "b"], &ls),
            a: main_effects_with("a", &["z", "b"], &ls),
            z: main_effects_with("z", &["b"], &ls),
            b: main_effects_with("b", &[], &ls),
        }
    }

    /// The fully saturated model set for a single binary covariate `l1`.
    pub fn saturated_binary_l() -> Self {
        NuisanceSpecs {
            y: DesignSpec::parse("y ~ a*z*b*l1").expect("fixed formula"),
            a: DesignSpec::parse("a ~ z*b*l1").expect("fixed formula"),
            z: DesignSpec::parse("z ~ b*l1").expect("fixed formula"),
            b: DesignSpec::parse("b ~ l1").expect("fixed formula"),
        }
    }

    fn check(&self) -> Result<()> {
        let forbid = |spec: &DesignSpec, banned: &[&str], label: &str| -> Result<()> {
            for v in spec.rhs_variables() {
                if banned.contains(&v) {
                    return Err(Error::Formula(format!(
                        "{label} model may not reference '{v}'"
                    )));
                }
            }
            Ok(())
        };
        forbid(&self.a, &["y"], "A")?;
        forbid(&self.z, &["y", "a"], "Z")?;
        forbid(&self.b, &["y", "a"], "B")?;
        Ok(())
    }
}

/// The four fitted predictive-value models.
#[derive(Debug, Clone)]
pub struct NuisanceModels {
    pub y_fit: LogisticFit,
    pub a_fit: LogisticFit,
    pub z_fit: LogisticFit,
    pub b_fit: LogisticFit,
    pub specs: NuisanceSpecs,
}

/// Fits the Y- and A-models on the validation subset and the Z- and B-models
/// on all records; with distinct parameter spaces this jointly maximizes the
/// predictive-value log-likelihood.
pub fn fit_nuisance_models(ds: &Dataset, specs: &NuisanceSpecs) -> Result<NuisanceModels> {
    specs.check()?;
    let validation = ds.validation_subset()?;
    let y_fit = fit_formula(&validation, &specs.y)?;
    let a_fit = fit_formula(&validation, &specs.a)?;
    let z_fit = fit_formula(ds, &specs.z)?;
    let b_fit = fit_formula(ds, &specs.b)?;
    Ok(NuisanceModels { y_fit, a_fit, z_fit, b_fit, specs: specs.clone() })
}

impl NuisanceModels {
    fn predict(&self, fit: &LogisticFit, spec: &DesignSpec, vars: &HashMap<&str, f64>) -> Result<f64> {
        let lookup = |name: &str| -> Result<f64> {
            vars.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.into()))
        };
        let row = spec.eval_row(&lookup)?;
        fit.predict_prob(&row)
    }

    pub fn pr_y1(&self, a: u8, z: u8, b: u8, l: &HashMap<&str, f64>) -> Result<f64> {
        let mut vars = l.clone();
        vars.insert("a", a as f64);
        vars.insert("z", z as f64);
        vars.insert("b", b as f64);
        self.predict(&self.y_fit, &self.specs.y, &vars)
    }

    pub fn pr_a1(&self, z: u8, b: u8, l: &HashMap<&str, f64>) -> Result<f64> {
        let mut vars = l.clone();
        vars.insert("z", z as f64);
        vars.insert("b", b as f64);
        self.predict(&self.a_fit, &self.specs.a, &vars)
    }

    pub fn pr_z1(&self, b: u8, l: &HashMap<&str, f64>) -> Result<f64> {
        let mut vars = l.clone();
        vars.insert("b", b as f64);
        self.predict(&self.z_fit, &self.specs.z, &vars)
    }

    pub fn pr_b1(&self, l: &HashMap<&str, f64>) -> Result<f64> {
        self.predict(&self.b_fit, &self.specs.b, l)
    }

    /// Reads the fitted cell probabilities for a single binary covariate,
    /// i.e. the predictive-value parameter vector implied by the four fits.
    pub fn predictive_params_binary_l(&self) -> Result<PredictiveValueParams> {
        let mut out = PredictiveValueParams {
            delta_star: [0.0; 2],
            epsilon_star: [[0.0; 2]; 2],
            lambda_star: [[[0.0; 2]; 2]; 2],
            pi_star: [[[[0.0; 2]; 2]; 2]; 2],
        };
        for l in 0..2u8 {
            let mut base = HashMap::new();
            base.insert("l1", l as f64);
            out.delta_star[l as usize] = self.pr_b1(&base)?;
            for b in 0..2u8 {
                out.epsilon_star[b as usize][l as usize] = self.pr_z1(b, &base)?;
                for z in 0..2u8 {
                    out.lambda_star[z as usize][b as usize][l as usize] =
                        self.pr_a1(z, b, &base)?;
                    for a in 0..2u8 {
                        out.pi_star[a as usize][z as usize][b as usize][l as usize] =
                            self.pr_y1(a, z, b, &base)?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Draws a random interior parameter vector, for property tests and the
/// invariance checks.
pub fn random_interior_sensspec(rng: &mut impl rand::Rng) -> SensSpecParams {
    let mut draw = || rng.gen_range(0.05..0.95);
    let mut p = SensSpecParams {
        delta: [0.0; 2],
        epsilon: [[0.0; 2]; 2],
        lambda: [[[0.0; 2]; 2]; 2],
        pi: [[[[0.0; 2]; 2]; 2]; 2],
    };
    for l in 0..2 {
        p.delta[l] = draw();
        for a in 0..2 {
            p.epsilon[a][l] = draw();
            for y in 0..2 {
                p.lambda[y][a][l] = draw();
                for b in 0..2 {
                    p.pi[b][y][a][l] = draw();
                }
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::CellCountTable;
    use crate::reinfarction;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    fn printed_table5() -> CellCountTable {
        CellCountTable::from_counts(TableDims::Validation, reinfarction::TABLE5_PRINTED.to_vec())
            .unwrap()
    }

    #[test]
    fn closed_form_matches_printed_anchors() {
        let p = closed_form_mle(&printed_table5()).unwrap();
        // lambda* for the cell holding counts (38, 3, 3797, 9)
        let lam = p.lambda_star[0][1][0];
        assert_abs_diff_eq!(lam, (3797.0 + 9.0) / (38.0 + 3.0 + 3797.0 + 9.0), epsilon = 1e-12);
        assert_abs_diff_eq!(lam, 0.9893, epsilon = 5e-4);
        // pi* for the cell holding counts (2728, 13)
        let pi = p.pi_star[0][0][0][0];
        assert_abs_diff_eq!(pi, 13.0 / (2728.0 + 13.0), epsilon = 1e-12);
        assert_abs_diff_eq!(pi, 0.004743, epsilon = 5e-6);
    }

    #[test]
    fn epsilon_star_matches_collapsed_expected_table() {
        let p = closed_form_mle(&reinfarction::table5_expected()).unwrap();
        assert_abs_diff_eq!(p.epsilon_star[0][0], 1347.0 / 13842.0, epsilon = 5e-4);
    }

    #[test]
    fn uniform_counts_give_uniform_parameters() {
        let mut counts = vec![1.0; 48];
        for slot in counts.iter_mut().take(16).skip(8) {
            *slot = 0.0; // one-sided validation types stay empty
        }
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        let p = closed_form_mle(&m).unwrap();
        for (_, v) in p.flat_map() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_denominator_is_reported() {
        let mut counts = vec![0.0; 48];
        counts[16] = 5.0; // only m17 populated
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        let err = closed_form_mle(&m).unwrap_err();
        match err {
            Error::Inestimable(names) => {
                assert!(names.iter().any(|n| n.contains("pi*")), "{names:?}")
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn loglik_uniform_parameters() {
        let uniform = PredictiveValueParams {
            delta_star: [0.5; 2],
            epsilon_star: [[0.5; 2]; 2],
            lambda_star: [[[0.5; 2]; 2]; 2],
            pi_star: [[[[0.5; 2]; 2]; 2]; 2],
        };
        // N records of unvalidated types -> N * 2 log(1/2)
        let mut counts = vec![0.0; 48];
        counts[0] = 3.0;
        counts[5] = 7.0;
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        assert_abs_diff_eq!(
            loglik_predictive(&uniform, &m),
            10.0 * 2.0 * 0.5f64.ln(),
            epsilon = 1e-12
        );
        // N records of validated types -> N * 4 log(1/2)
        let mut counts = vec![0.0; 48];
        counts[16] = 4.0;
        counts[47] = 6.0;
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        assert_abs_diff_eq!(
            loglik_predictive(&uniform, &m),
            10.0 * 4.0 * 0.5f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loglik_single_validated_record() {
        let mut params = PredictiveValueParams {
            delta_star: [0.5; 2],
            epsilon_star: [[0.5; 2]; 2],
            lambda_star: [[[0.5; 2]; 2]; 2],
            pi_star: [[[[0.5; 2]; 2]; 2]; 2],
        };
        params.pi_star[1][1][1][1] = 0.9;
        params.lambda_star[1][1][1] = 0.8;
        params.epsilon_star[1][1] = 0.7;
        params.delta_star[1] = 0.6;
        let mut counts = vec![0.0; 48];
        counts[47] = 1.0; // (z=1,b=1,y=1,a=1,l=1)
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        assert_abs_diff_eq!(
            loglik_predictive(&params, &m),
            0.9f64.ln() + 0.8f64.ln() + 0.7f64.ln() + 0.6f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn mle_maximizes_loglik_under_perturbation() {
        let m = reinfarction::table5_expected();
        let mle = closed_form_mle(&m).unwrap();
        let best = loglik_predictive(&mle, &m);
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut p = mle.clone();
            for l in 0..2 {
                p.delta_star[l] = jitter(p.delta_star[l], &mut rng);
                for b in 0..2 {
                    p.epsilon_star[b][l] = jitter(p.epsilon_star[b][l], &mut rng);
                    for z in 0..2 {
                        p.lambda_star[z][b][l] = jitter(p.lambda_star[z][b][l], &mut rng);
                        for a in 0..2 {
                            p.pi_star[a][z][b][l] = jitter(p.pi_star[a][z][b][l], &mut rng);
                        }
                    }
                }
            }
            assert!(loglik_predictive(&p, &m) <= best);
        }
    }

    fn jitter(p: f64, rng: &mut impl rand::Rng) -> f64 {
        clamp_prob(p + rng.gen_range(-0.02..0.02))
    }

    #[test]
    fn conversion_round_trips() {
        let symmetric = SensSpecParams {
            delta: [0.5; 2],
            epsilon: [[0.5; 2]; 2],
            lambda: [[[0.5; 2]; 2]; 2],
            pi: [[[[0.5; 2]; 2]; 2]; 2],
        };
        let starred = convert_to_predictive(&symmetric).unwrap();
        for (_, v) in starred.flat_map() {
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-12);
        }

        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..50 {
            let theta = random_interior_sensspec(&mut rng);
            let starred = convert_to_predictive(&theta).unwrap();
            let back = convert_to_sensspec(&starred).unwrap();
            for ((_, x), (_, y)) in theta.flat_map().iter().zip(back.flat_map().iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
            let forward = convert_to_predictive(&back).unwrap();
            for ((_, x), (_, y)) in starred.flat_map().iter().zip(forward.flat_map().iter()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn saturated_fits_equal_closed_form() {
        let table = reinfarction::table5_expected();
        let ds = Dataset::from_validation_table(&table).unwrap();
        let models = fit_nuisance_models(&ds, &NuisanceSpecs::saturated_binary_l()).unwrap();
        let fitted = models.predictive_params_binary_l().unwrap();
        let closed = closed_form_mle(&table).unwrap();
        for ((k, x), (_, y)) in fitted.flat_map().iter().zip(closed.flat_map().iter()) {
            assert!((x - y).abs() <= 1e-6, "{k}: fitted {x} vs closed form {y}");
        }
    }

    #[test]
    fn degenerate_predictor_flags_boundary() {
        // B identically zero
        let mut counts = vec![0.0; 48];
        counts[0] = 50.0; // m1: z=0,b=0,l=0
        counts[2] = 30.0; // m3: z=1,b=0,l=0
        counts[16] = 20.0; // m17
        counts[16 + 4] = 10.0; // m21: y=1
        counts[18] = 10.0; // m19: z=1,b=0,y=0,a=0
        counts[24] = 5.0; // m25: a=1
        let m = CellCountTable::from_counts(TableDims::Validation, counts).unwrap();
        let ds = Dataset::from_validation_table(&m).unwrap();
        // every record sits at l = 0, so the models must not reference l1
        let specs = NuisanceSpecs {
            y: DesignSpec::parse("y ~ z").unwrap(),
            a: DesignSpec::parse("a ~ z").unwrap(),
            z: DesignSpec::parse("z ~ 1").unwrap(),
            b: DesignSpec::parse("b ~ 1").unwrap(),
        };
        let models = fit_nuisance_models(&ds, &specs).unwrap();
        assert!(models.b_fit.boundary);
        assert!(!models.b_fit.converged);
    }

    #[test]
    fn spec_restrictions_are_enforced() {
        let mut specs = NuisanceSpecs::saturated_binary_l();
        specs.z = DesignSpec::parse("z ~ y + l1").unwrap();
        let ds = Dataset::from_validation_table(&reinfarction::table5_expected()).unwrap();
        assert!(matches!(fit_nuisance_models(&ds, &specs), Err(Error::Formula(_))));
    }
}
