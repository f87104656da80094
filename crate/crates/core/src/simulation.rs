//! Monte Carlo study harness: data-generating process, scenario registry,
//! effect-size calibration, performance metrics, and the brute-force
//! standardization oracle.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::bootstrap;
use crate::data_model::{CellCountTable, Dataset, StudyRecord, TableDims};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig, Method};
use crate::glm::expit;
use crate::rng::stream;

/// Marginal log odds ratio targeted by every scenario's `gamma`.
pub const TARGET_LOG_OR: f64 = -0.4;

const SIM_DOMAIN: u64 = 0x73_696d; // "sim"

/// All coefficients of one simulation scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub id: u32,
    pub n: usize,
    pub exposure_misclassification: bool,
    pub mu0: f64,
    pub eta0: f64,
    pub alpha0: f64,
    pub alpha: [f64; 10],
    pub alpha11: f64,
    pub beta0: f64,
    pub beta: [f64; 10],
    pub beta11: f64,
    pub gamma: f64,
    pub xi0: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub nsim: usize,
    pub boot_b: usize,
    pub seed: u64,
}

const ALPHA: [f64; 10] = [0.8, -0.25, 0.6, -0.4, -0.8, -0.5, 0.7, 0.0, 0.0, 0.0];
const BETA: [f64; 10] = [0.3, -0.36, -0.73, -0.2, 0.0, 0.0, 0.0, 0.71, -0.19, 0.26];

/// Per-scenario entries: (exposure misclassification, n, mu0, alpha11,
/// beta0, beta11, gamma, xi0).
const SCENARIOS: [(bool, usize, f64, f64, f64, f64, f64, f64); 36] = [
    (false, 5000, -2.0, 0.0, -3.85, 2.0, -0.431, -1.5),
    (false, 5000, -3.0, 0.0, -3.85, 2.0, -0.417, -1.5),
    (false, 5000, -2.0, 0.0, -3.85, 4.0, -0.624, -1.5),
    (false, 5000, -2.0, 0.0, -3.85, 2.0, -0.431, -2.5),
    (true, 5000, -2.0, 2.0, -3.85, 2.0, -0.431, -1.5),
    (true, 5000, -3.0, 2.0, -3.85, 2.0, -0.417, -1.5),
    (true, 5000, -2.0, 4.0, -3.85, 2.0, -0.431, -1.5),
    (true, 5000, -2.0, 2.0, -3.85, 4.0, -0.624, -1.5),
    (true, 5000, -2.0, 2.0, -3.85, 2.0, -0.431, -2.5),
    (false, 10000, -2.0, 0.0, -3.85, 2.0, -0.431, -1.5),
    (false, 10000, -3.0, 0.0, -3.85, 2.0, -0.417, -1.5),
    (false, 10000, -2.0, 0.0, -3.85, 4.0, -0.624, -1.5),
    (false, 10000, -2.0, 0.0, -3.85, 2.0, -0.431, -2.5),
    (true, 10000, -2.0, 2.0, -3.85, 2.0, -0.431, -1.5),
    (true, 10000, -3.0, 2.0, -3.85, 2.0, -0.417, -1.5),
    (true, 10000, -2.0, 4.0, -3.85, 2.0, -0.431, -1.5),
    (true, 10000, -2.0, 2.0, -3.85, 4.0, -0.624, -1.5),
    (true, 10000, -2.0, 2.0, -3.85, 2.0, -0.431, -2.5),
    (false, 5000, -2.0, 0.0, -2.0, 2.0, -0.470, -1.5),
    (false, 5000, -3.0, 0.0, -2.0, 2.0, -0.445, -1.5),
    (false, 5000, -2.0, 0.0, -2.0, 4.0, -0.641, -1.5),
    (false, 5000, -2.0, 0.0, -2.0, 2.0, -0.470, -2.5),
    (true, 5000, -2.0, 2.0, -2.0, 2.0, -0.470, -1.5),
    (true, 5000, -3.0, 2.0, -2.0, 2.0, -0.445, -1.5),
    (true, 5000, -2.0, 4.0, -2.0, 2.0, -0.470, -1.5),
    (true, 5000, -2.0, 2.0, -2.0, 4.0, -0.641, -1.5),
    (true, 5000, -2.0, 2.0, -2.0, 2.0, -0.470, -2.5),
    (false, 10000, -2.0, 0.0, -2.0, 2.0, -0.470, -1.5),
    (false, 10000, -3.0, 0.0, -2.0, 2.0, -0.445, -1.5),
    (false, 10000, -2.0, 0.0, -2.0, 4.0, -0.641, -1.5),
    (false, 10000, -2.0, 0.0, -2.0, 2.0, -0.470, -2.5),
    (true, 10000, -2.0, 2.0, -2.0, 2.0, -0.470, -1.5),
    (true, 10000, -3.0, 2.0, -2.0, 2.0, -0.445, -1.5),
    (true, 10000, -2.0, 4.0, -2.0, 2.0, -0.470, -1.5),
    (true, 10000, -2.0, 2.0, -2.0, 4.0, -0.641, -1.5),
    (true, 10000, -2.0, 2.0, -2.0, 2.0, -0.470, -2.5),
];

impl ScenarioConfig {
    /// The built-in registry, ids 1 through 36.
    pub fn scenario(id: u32) -> Result<ScenarioConfig> {
        if !(1..=36).contains(&id) {
            return Err(Error::UnknownScenario(id));
        }
        let (misc, n, mu0, alpha11, beta0, beta11, gamma, xi0) = SCENARIOS[(id - 1) as usize];
        Ok(ScenarioConfig {
            id,
            n,
            exposure_misclassification: misc,
            mu0,
            eta0: 0.0,
            alpha0: 0.0,
            alpha: ALPHA,
            alpha11,
            beta0,
            beta: BETA,
            beta11,
            gamma,
            xi0,
            xi1: 2.0,
            xi2: 1.0,
            xi3: -1.0,
            nsim: 200,
            boot_b: 200,
            seed: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.exposure_misclassification && self.alpha11 != 0.0 {
            return Err(Error::InvalidInput(
                "alpha11 must be 0 when exposure misclassification is absent".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor of the fixed 10-dimensional latent
/// correlation matrix.
fn correlation_cholesky() -> Result<[[f64; 10]; 10]> {
    let mut corr = [[0.0f64; 10]; 10];
    for (i, row) in corr.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (i, j, r) in [(0usize, 4usize, 0.2), (1, 5, 0.9), (2, 7, 0.2), (3, 8, 0.9)] {
        corr[i][j] = r;
        corr[j][i] = r;
    }
    let mut chol = [[0.0f64; 10]; 10];
    for i in 0..10 {
        for j in 0..=i {
            let mut sum = corr[i][j];
            for k in 0..j {
                sum -= chol[i][k] * chol[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::InvalidInput(
                        "correlation matrix is not positive definite".into(),
                    ));
                }
                chol[i][j] = sum.sqrt();
            } else {
                chol[i][j] = sum / chol[j][j];
            }
        }
    }
    Ok(chol)
}

/// Draws from the latent 10-dimensional normal, before dichotomization.
pub fn generate_latent(n: usize, rng: &mut impl Rng) -> Result<Vec<[f64; 10]>> {
    let chol = correlation_cholesky()?;
    let normal = rand_distr::StandardNormal;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = [0.0f64; 10];
        for slot in v.iter_mut() {
            *slot = rng.sample(normal);
        }
        let mut x = [0.0f64; 10];
        for i in 0..10 {
            for (k, &vk) in v.iter().enumerate().take(i + 1) {
                x[i] += chol[i][k] * vk;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Dichotomizes latent components 1, 3, 5, 6, 8 and 9 (1-based) via `I(v > 0)`.
pub fn dichotomize(v: &[f64; 10]) -> [f64; 10] {
    let mut l = *v;
    for idx in [0usize, 2, 4, 5, 7, 8] {
        l[idx] = if v[idx] > 0.0 { 1.0 } else { 0.0 };
    }
    l
}

/// Covariate vectors `L1..L10`.
pub fn generate_covariates(n: usize, rng: &mut impl Rng) -> Result<Vec<[f64; 10]>> {
    Ok(generate_latent(n, rng)?.iter().map(dichotomize).collect())
}

/// One simulated subject, including the latent truth.
#[derive(Debug, Clone)]
pub struct SimRecord {
    pub l: [f64; 10],
    pub u1: u8,
    pub u2: u8,
    pub u3: f64,
    pub a: u8,
    pub y0: u8,
    pub y1: u8,
    pub y: u8,
    pub b: u8,
    pub z: u8,
    pub r: u8,
}

fn dot(coef: &[f64; 10], l: &[f64; 10]) -> f64 {
    coef.iter().zip(l.iter()).map(|(c, v)| c * v).sum()
}

/// Generates one dataset from the scenario's structural models.
pub fn generate_dataset(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<Vec<SimRecord>> {
    cfg.validate()?;
    let covariates = generate_covariates(cfg.n, rng)?;
    let mut out = Vec::with_capacity(cfg.n);
    for l in covariates {
        let u1 = u8::from(rng.gen::<f64>() < expit(cfg.eta0));
        let u2 = u8::from(rng.gen::<f64>() < expit(cfg.mu0));
        let pa = expit(cfg.alpha0 + dot(&cfg.alpha, &l) + cfg.alpha11 * u1 as f64);
        let a = u8::from(rng.gen::<f64>() < pa);
        let u3 = rng.gen::<f64>();
        let base = cfg.beta0 + dot(&cfg.beta, &l) + cfg.beta11 * u2 as f64;
        let y0 = u8::from(u3 < expit(base));
        let y1 = u8::from(u3 < expit(base + cfg.gamma));
        let y = if a == 1 { y1 } else { y0 };
        let b = if cfg.exposure_misclassification { u1 } else { a };
        let z = u2;
        let pr = expit(cfg.xi0 + cfg.xi1 * z as f64 + cfg.xi2 * b as f64 + cfg.xi3 * (z * b) as f64);
        let r = u8::from(rng.gen::<f64>() < pr);
        out.push(SimRecord { l, u1, u2, u3, a, y0, y1, y, b, z, r });
    }
    Ok(out)
}

/// Projects simulated subjects onto the observed-data layout.
pub fn to_dataset(records: &[SimRecord]) -> Result<Dataset> {
    let study: Vec<StudyRecord> = records
        .iter()
        .map(|r| {
            let (y, a) = if r.r == 1 { (Some(r.y), Some(r.a)) } else { (None, None) };
            StudyRecord::new(r.z, r.b, r.r, r.r, y, a, r.l.to_vec())
        })
        .collect::<Result<_>>()?;
    Ok(Dataset::from_records(&study))
}

/// Monte Carlo estimate of the marginal log odds ratio
/// `logit E[Y(1)] - logit E[Y(0)]` under effect size `gamma`, averaging the
/// closed-form outcome probabilities over simulated `(L, U2)`.
pub fn true_marginal_logor(
    cfg: &ScenarioConfig,
    gamma: f64,
    n_mc: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let sample = calibration_sample(cfg, n_mc, rng)?;
    Ok(logor_on_sample(&sample, gamma))
}

fn calibration_sample(cfg: &ScenarioConfig, n_mc: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let covariates = generate_covariates(n_mc, rng)?;
    let p_u2 = expit(cfg.mu0);
    Ok(covariates
        .iter()
        .map(|l| {
            let u2 = u8::from(rng.gen::<f64>() < p_u2);
            cfg.beta0 + dot(&cfg.beta, l) + cfg.beta11 * u2 as f64
        })
        .collect())
}

fn logor_on_sample(linear_predictors: &[f64], gamma: f64) -> f64 {
    let n = linear_predictors.len() as f64;
    let m1: f64 = linear_predictors.iter().map(|&lp| expit(lp + gamma)).sum::<f64>() / n;
    let m0: f64 = linear_predictors.iter().map(|&lp| expit(lp)).sum::<f64>() / n;
    (m1 / (1.0 - m1)).ln() - (m0 / (1.0 - m0)).ln()
}

/// Bisection on the (monotone) map `gamma -> marginal log-OR`, holding the
/// Monte Carlo sample fixed across evaluations.
pub fn calibrate_gamma(
    cfg: &ScenarioConfig,
    target: f64,
    tol: f64,
    n_mc: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let sample = calibration_sample(cfg, n_mc, rng)?;
    let (mut lo, mut hi) = (-4.0f64, 2.0f64);
    let (f_lo, f_hi) = (logor_on_sample(&sample, lo), logor_on_sample(&sample, hi));
    if !(f_lo <= target && target <= f_hi) {
        return Err(Error::Calibration(format!(
            "target {target} outside achievable range [{f_lo}, {f_hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = logor_on_sample(&sample, mid);
        if (f - target).abs() <= tol || hi - lo < 1e-12 {
            return Ok(mid);
        }
        if f < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration("bisection failed to converge".into()))
}

/// Performance metrics of one method in one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub scenario: u32,
    pub method: Method,
    pub bias: f64,
    pub bse: f64,
    pub mse: f64,
    pub se: f64,
    /// Square root of the mean bootstrap variance; NaN when not bootstrapped.
    pub sse: f64,
    /// Coverage of the 95% percentile interval; NaN when not bootstrapped.
    pub cp: f64,
    /// Replicates on which the estimator succeeded.
    pub nsim: usize,
    /// Replicates on which it failed.
    pub failures: usize,
}

#[derive(Debug, Clone, Default)]
struct ReplicateOutcome {
    estimate: Option<f64>,
    boot: Option<(f64, bool)>, // (variance, target covered)
}

/// The construction actually fit for a method under a scenario's wiring.
/// Without exposure misclassification `B = A`, so the joint correction's
/// A-model is degenerate (its responses equal one of its predictors); the
/// joint method then reduces to the outcome-only model set, making the two
/// corrections identical replicate by replicate.
pub fn effective_method(cfg: &ScenarioConfig, method: Method) -> Method {
    if method == Method::Ipwm && !cfg.exposure_misclassification {
        Method::Gp
    } else {
        method
    }
}

/// Runs the full study for one scenario.  Bootstrapping (for SSE and CP) is
/// applied only to methods listed in `boot_methods`; confidence level is
/// fixed at 95% as in the study design.
pub fn run_study(
    cfg: &ScenarioConfig,
    methods: &[Method],
    boot_methods: &[Method],
) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if cfg.nsim < 2 {
        return Err(Error::InvalidInput("need at least two replicates".into()));
    }
    let est_cfg = EstimatorConfig::main_effects(10);
    let replicates: Vec<Vec<ReplicateOutcome>> = (0..cfg.nsim)
        .into_par_iter()
        .map(|t| -> Result<Vec<ReplicateOutcome>> {
            let mut rng = stream(cfg.seed, &[SIM_DOMAIN, cfg.id as u64, t as u64]);
            let data = generate_dataset(cfg, &mut rng)?;
            let ds = to_dataset(&data)?;
            let mut row = Vec::with_capacity(methods.len());
            for &method in methods {
                let fit_method = effective_method(cfg, method);
                let mut outcome = ReplicateOutcome::default();
                if let Ok(r) = estimate(fit_method, &ds, &est_cfg) {
                    outcome.estimate = Some(r.log_or);
                    if boot_methods.contains(&method) && cfg.boot_b > 0 {
                        let stat =
                            |d: &Dataset| estimate(fit_method, d, &est_cfg).map(|r| r.log_or);
                        // seeded by the effective method so that aliased
                        // constructions produce identical rows
                        let seed = crate::rng::mix_seed(
                            cfg.seed,
                            &[SIM_DOMAIN, cfg.id as u64, t as u64, fit_method as u64],
                        );
                        if let Ok(s) = bootstrap(&ds, &stat, cfg.boot_b, 0.95, seed) {
                            let covered = s.lower <= TARGET_LOG_OR && TARGET_LOG_OR <= s.upper;
                            outcome.boot = Some((s.se * s.se, covered));
                        }
                    }
                }
                row.push(outcome);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let estimates: Vec<f64> =
            replicates.iter().filter_map(|r| r[mi].estimate).collect();
        let failures = cfg.nsim - estimates.len();
        if estimates.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "method {method} failed on {failures} of {} replicates",
                cfg.nsim
            )));
        }
        let nsim = estimates.len();
        let mean = estimates.iter().sum::<f64>() / nsim as f64;
        let se = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / nsim as f64).sqrt();
        let bias = mean - TARGET_LOG_OR;
        let boots: Vec<(f64, bool)> = replicates.iter().filter_map(|r| r[mi].boot).collect();
        let (sse, cp) = if boots.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mean_var = boots.iter().map(|(v, _)| v).sum::<f64>() / boots.len() as f64;
            let cover = boots.iter().filter(|(_, c)| *c).count() as f64 / boots.len() as f64;
            (mean_var.sqrt(), cover)
        };
        rows.push(MetricsRow {
            scenario: cfg.id,
            method,
            bias,
            bse: se / (nsim as f64).sqrt(),
            mse: se * se + bias * bias,
            se,
            sse,
            cp,
            nsim,
            failures,
        });
    }
    Ok(rows)
}

/// Exact standardized marginal log odds ratio of a joint `(Z,B,Y,A,L)`
/// distribution: `logit E[Y(a)]` with
/// `E[Y(a)] = sum_l Pr(Y=1 | A=a, L=l) Pr(L=l)`.
pub fn oracle_standardized_or(table: &CellCountTable) -> Result<f64> {
    if table.dims() != TableDims::Zbyal {
        return Err(Error::UnsupportedDimension("expected a full joint table".into()));
    }
    let total = table.total();
    if total <= 0.0 {
        return Err(Error::ZeroMass("joint table".into()));
    }
    let mut ey = [0.0f64; 2];
    for a in 0..2u8 {
        for l in 0..2u8 {
            let mut mass_al = 0.0;
            let mut mass_y1 = 0.0;
            for z in 0..2u8 {
                for b in 0..2u8 {
                    for y in 0..2u8 {
                        let cell = table.zbyal(z, b, y, a, l);
                        mass_al += cell;
                        if y == 1 {
                            mass_y1 += cell;
                        }
                    }
                }
            }
            if mass_al <= 0.0 {
                return Err(Error::Positivity(format!("Pr(A={a}, L={l}) is zero")));
            }
            let pr_l = pr_l_margin(table, l) / total;
            ey[a as usize] += mass_y1 / mass_al * pr_l;
        }
    }
    let (e0, e1) = (ey[0], ey[1]);
    Ok((e1 / (1.0 - e1)).ln() - (e0 / (1.0 - e0)).ln())
}

fn pr_l_margin(table: &CellCountTable, l: u8) -> f64 {
    let mut mass = 0.0;
    for z in 0..2u8 {
        for b in 0..2u8 {
            for y in 0..2u8 {
                for a in 0..2u8 {
                    mass += table.zbyal(z, b, y, a, l);
                }
            }
        }
    }
    mass
}

/// Random strictly positive joint table over `(Z,B,Y,A,L)`, for oracle
/// identity tests.
pub fn random_joint_table(rng: &mut impl Rng) -> CellCountTable {
    let counts: Vec<f64> = (0..32).map(|_| rng.gen_range(1.0..100.0)).collect();
    CellCountTable::from_counts(TableDims::Zbyal, counts).expect("positive counts")
}

/// Grouped `(z, b, l1)` dataset of a joint table's observed margin.
pub fn observed_margin_dataset(table: &CellCountTable) -> Result<Dataset> {
    if table.dims() != TableDims::Zbyal {
        return Err(Error::UnsupportedDimension("expected a full joint table".into()));
    }
    let mut z = Vec::new();
    let mut b = Vec::new();
    let mut l1 = Vec::new();
    let mut w = Vec::new();
    for li in 0..2u8 {
        for zi in 0..2u8 {
            for bi in 0..2u8 {
                let mut count = 0.0;
                for yi in 0..2u8 {
                    for ai in 0..2u8 {
                        count += table.zbyal(zi, bi, yi, ai, li);
                    }
                }
                if count > 0.0 {
                    z.push(zi as f64);
                    b.push(bi as f64);
                    l1.push(li as f64);
                    w.push(count);
                }
            }
        }
    }
    Ok(Dataset::new(vec!["z".into(), "b".into(), "l1".into()], vec![z, b, l1], Some(w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_with_weights, DEFAULT_S};
    use crate::nuisance::sensspec_from_table;
    use crate::reinfarction;
    use crate::weights::weights_joint_sensspec;
    use approx::assert_abs_diff_eq;

    fn corr(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
        let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n;
        let vy = y.iter().map(|a| (a - my).powi(2)).sum::<f64>() / n;
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn latent_correlations_and_binary_means() {
        let mut rng = stream(99, &[1]);
        let latent = generate_latent(100_000, &mut rng).unwrap();
        let col = |j: usize| -> Vec<f64> { latent.iter().map(|v| v[j]).collect() };
        assert_abs_diff_eq!(corr(&col(0), &col(4)), 0.2, epsilon = 0.01);
        assert_abs_diff_eq!(corr(&col(1), &col(5)), 0.9, epsilon = 0.01);
        assert_abs_diff_eq!(corr(&col(2), &col(7)), 0.2, epsilon = 0.01);
        assert_abs_diff_eq!(corr(&col(3), &col(8)), 0.9, epsilon = 0.01);
        assert_abs_diff_eq!(corr(&col(0), &col(1)), 0.0, epsilon = 0.02);
        for j in 0..10 {
            let m = col(j).iter().sum::<f64>() / 100_000.0;
            assert_abs_diff_eq!(m, 0.0, epsilon = 0.02);
        }
        let l = dichotomize(&latent[0]);
        for idx in [0, 2, 4, 5, 7, 8] {
            assert!(l[idx] == 0.0 || l[idx] == 1.0);
        }
        let covs = generate_covariates(100_000, &mut rng).unwrap();
        for idx in [0usize, 2, 4, 5, 7, 8] {
            let m = covs.iter().map(|v| v[idx]).sum::<f64>() / 100_000.0;
            assert_abs_diff_eq!(m, 0.5, epsilon = 0.01);
        }
    }

    #[test]
    fn wiring_follows_scenario_flags() {
        let mut rng = stream(3, &[]);
        let cfg1 = ScenarioConfig::scenario(1).unwrap();
        let recs = generate_dataset(&cfg1, &mut rng).unwrap();
        assert!(recs.iter().all(|r| r.b == r.a && r.z == r.u2 && r.y == if r.a == 1 { r.y1 } else { r.y0 }));

        let cfg5 = ScenarioConfig::scenario(5).unwrap();
        let recs = generate_dataset(&cfg5, &mut rng).unwrap();
        assert!(recs.iter().all(|r| r.b == r.u1 && r.z == r.u2));
        assert!(recs.iter().any(|r| r.b != r.a));
    }

    #[test]
    fn marginal_z_rate_and_validation_fraction() {
        let mut rng = stream(17, &[]);
        let mut cfg = ScenarioConfig::scenario(1).unwrap();
        cfg.n = 100_000;
        let recs = generate_dataset(&cfg, &mut rng).unwrap();
        let pz = recs.iter().filter(|r| r.z == 1).count() as f64 / recs.len() as f64;
        assert_abs_diff_eq!(pz, expit(-2.0), epsilon = 0.01);
        for id in [1u32, 5, 9, 27] {
            let mut cfg = ScenarioConfig::scenario(id).unwrap();
            cfg.n = 20_000;
            let recs = generate_dataset(&cfg, &mut rng).unwrap();
            let fr = recs.iter().filter(|r| r.r == 1).count() as f64 / recs.len() as f64;
            assert!((0.15..=0.33).contains(&fr), "scenario {id}: validation fraction {fr}");
        }
    }

    #[test]
    fn null_gamma_gives_null_marginal_logor() {
        let cfg = ScenarioConfig::scenario(1).unwrap();
        let mut rng = stream(5, &[]);
        let lo = true_marginal_logor(&cfg, 0.0, 200_000, &mut rng).unwrap();
        assert_abs_diff_eq!(lo, 0.0, epsilon = 0.02);
    }

    #[test]
    fn table_gamma_hits_target_at_moderate_mc_size() {
        let cfg = ScenarioConfig::scenario(1).unwrap();
        let mut rng = stream(8, &[]);
        let lo = true_marginal_logor(&cfg, cfg.gamma, 400_000, &mut rng).unwrap();
        assert_abs_diff_eq!(lo, TARGET_LOG_OR, epsilon = 0.015);
    }

    #[test]
    fn calibration_recovers_table_gamma() {
        let cfg = ScenarioConfig::scenario(1).unwrap();
        let mut rng = stream(12, &[0x63_616c]);
        let g = calibrate_gamma(&cfg, TARGET_LOG_OR, 0.005, 400_000, &mut rng).unwrap();
        assert_abs_diff_eq!(g, cfg.gamma, epsilon = 0.02);
    }

    #[test]
    fn metric_identities_and_determinism() {
        let mut cfg = ScenarioConfig::scenario(1).unwrap();
        cfg.n = 400;
        cfg.nsim = 4;
        cfg.boot_b = 20;
        let methods = [Method::Crude, Method::Ps];
        let rows = run_study(&cfg, &methods, &[Method::Crude]).unwrap();
        for row in &rows {
            assert_abs_diff_eq!(row.mse, row.se * row.se + row.bias * row.bias, epsilon = 1e-12);
            assert_abs_diff_eq!(row.bse * (row.nsim as f64).sqrt(), row.se, epsilon = 1e-12);
        }
        assert!(rows[0].sse.is_finite() && rows[0].cp.is_finite());
        assert!(rows[1].sse.is_nan() && rows[1].cp.is_nan());
        let again = run_study(&cfg, &methods, &[Method::Crude]).unwrap();
        for (a, b) in rows.iter().zip(again.iter()) {
            assert_eq!(a.bias.to_bits(), b.bias.to_bits());
            assert_eq!(a.sse.to_bits(), b.sse.to_bits());
            assert_eq!(a.cp.to_bits(), b.cp.to_bits());
        }
    }

    #[test]
    fn gp_and_joint_agree_without_exposure_misclassification() {
        let mut cfg = ScenarioConfig::scenario(1).unwrap();
        cfg.n = 1500;
        cfg.nsim = 2;
        cfg.boot_b = 10;
        let methods = [Method::Gp, Method::Ipwm];
        let rows = run_study(&cfg, &methods, &methods).unwrap();
        assert_eq!(rows[0].bias.to_bits(), rows[1].bias.to_bits());
        assert_eq!(rows[0].se.to_bits(), rows[1].se.to_bits());
        assert_eq!(rows[0].sse.to_bits(), rows[1].sse.to_bits());
        assert_eq!(rows[0].cp.to_bits(), rows[1].cp.to_bits());
    }

    #[test]
    fn oracle_matches_published_estimand() {
        let lo = oracle_standardized_or(&reinfarction::table3_expected()).unwrap();
        assert_abs_diff_eq!(lo.exp(), 0.57329, epsilon = 1e-4);
    }

    #[test]
    fn oracle_equals_weighted_means_on_random_joints() {
        let mut rng = stream(31, &[]);
        for _ in 0..20 {
            let table = random_joint_table(&mut rng);
            let truth = oracle_standardized_or(&table).unwrap();
            let theta = sensspec_from_table(&table).unwrap();
            let ds = observed_margin_dataset(&table).unwrap();
            let wv = weights_joint_sensspec(&ds, &theta).unwrap();
            let r = estimate_with_weights(&ds, "z", "b", &wv, DEFAULT_S).unwrap();
            // shrinkage with s = 1e6 perturbs the identity at ~1e-6
            assert_abs_diff_eq!(r.log_or, truth, epsilon = 1e-4);
        }
    }

    #[test]
    fn unknown_scenario_is_rejected() {
        assert!(matches!(ScenarioConfig::scenario(0), Err(Error::UnknownScenario(0))));
        assert!(matches!(ScenarioConfig::scenario(37), Err(Error::UnknownScenario(37))));
    }
}
