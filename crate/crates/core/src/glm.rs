//! Maximum-likelihood logistic regression via iteratively reweighted least
//! squares, plus a small formula language.
//!
//! Formulas follow the usual convention: `response ~ term + term + ...`,
//! where a term is a variable name or a `*`-product.  `a*b` expands to the
//! main effects and all interactions of its factors; `-1` drops the
//! intercept.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::data_model::Dataset;
use crate::error::{Error, Result};

/// Fitted probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-12;

/// Fitted probabilities this close to 0 or 1 flag the fit as lying on the
/// boundary of the parameter space (separation).
pub const BOUNDARY_EPS: f64 = 1e-8;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// A parsed model formula: response, product terms and an intercept flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignSpec {
    pub response: String,
    /// Each term is a product of variable names.
    pub terms: Vec<Vec<String>>,
    pub intercept: bool,
}

impl DesignSpec {
    /// Parses e.g. `"y ~ a + z*b + l1"`.
    pub fn parse(formula: &str) -> Result<Self> {
        let (lhs, rhs) = formula
            .split_once('~')
            .ok_or_else(|| Error::Formula(format!("missing '~' in '{formula}'")))?;
        let response = lhs.trim().to_string();
        if response.is_empty() || !is_identifier(&response) {
            return Err(Error::Formula(format!("invalid response '{response}'")));
        }
        let mut intercept = true;
        let mut terms: Vec<Vec<String>> = Vec::new();
        for raw in rhs.split('+') {
            let raw = raw.trim();
            match raw {
                "" => return Err(Error::Formula(format!("empty term in '{formula}'"))),
                "1" => intercept = true,
                "-1" => intercept = false,
                _ => {
                    let factors: Vec<String> = raw
                        .split('*')
                        .map(|f| f.trim().to_string())
                        .collect();
                    if factors.iter().any(|f| f.is_empty() || !is_identifier(f)) {
                        return Err(Error::Formula(format!("invalid term '{raw}'")));
                    }
                    // a*b*c expands to all non-empty factor subsets, main
                    // effects first.
                    let k = factors.len();
                    let mut expanded: Vec<Vec<String>> = (1..(1usize << k))
                        .map(|mask| {
                            (0..k)
                                .filter(|j| mask & (1 << j) != 0)
                                .map(|j| factors[j].clone())
                                .collect()
                        })
                        .collect();
                    expanded.sort_by_key(|t| t.len());
                    terms.extend(expanded);
                }
            }
        }
        let mut seen = Vec::new();
        for t in &terms {
            let mut key = t.clone();
            key.sort();
            if seen.contains(&key) {
                return Err(Error::Formula(format!("duplicate term '{}'", t.join("*"))));
            }
            seen.push(key);
        }
        Ok(DesignSpec { response, terms, intercept })
    }

    /// Builds a main-effects spec `response ~ var1 + var2 + ...`.
    pub fn main_effects(response: &str, vars: &[&str]) -> Self {
        DesignSpec {
            response: response.to_string(),
            terms: vars.iter().map(|v| vec![v.to_string()]).collect(),
            intercept: true,
        }
    }

    /// Column names in design order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.terms.iter().map(|t| t.join(":")));
        names
    }

    /// All variables appearing on the right-hand side.
    pub fn rhs_variables(&self) -> Vec<&str> {
        let mut vars: Vec<&str> = Vec::new();
        for t in &self.terms {
            for f in t {
                if !vars.contains(&f.as_str()) {
                    vars.push(f);
                }
            }
        }
        vars
    }

    /// Evaluates the design row at the given variable lookup.
    pub fn eval_row(&self, lookup: &dyn Fn(&str) -> Result<f64>) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.terms.len() + 1);
        if self.intercept {
            row.push(1.0);
        }
        for term in &self.terms {
            let mut v = 1.0;
            for f in term {
                v *= lookup(f)?;
            }
            row.push(v);
        }
        Ok(row)
    }
}

fn is_identifier(s: &str) -> bool {
    s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Design matrix, binary response and optional case weights for a spec.
pub fn build_design(
    ds: &Dataset,
    spec: &DesignSpec,
) -> Result<(Array2<f64>, Vec<f64>, Option<Vec<f64>>)> {
    let n = ds.len();
    let response = ds.column(&spec.response)?;
    if response.iter().any(|v| v.is_nan()) {
        return Err(Error::MissingValues(spec.response.clone()));
    }
    let mut var_cols: HashMap<&str, &[f64]> = HashMap::new();
    for v in spec.rhs_variables() {
        let col = ds.column(v)?;
        if col.iter().any(|x| x.is_nan()) {
            return Err(Error::MissingValues(v.to_string()));
        }
        var_cols.insert(v, col);
    }
    let term_cols: Vec<Vec<&[f64]>> = spec
        .terms
        .iter()
        .map(|t| t.iter().map(|f| var_cols[f.as_str()]).collect())
        .collect();
    let p = spec.terms.len() + usize::from(spec.intercept);
    let mut x = Array2::zeros((n, p));
    let xs = x.as_slice_mut().expect("standard layout");
    for i in 0..n {
        let row = &mut xs[i * p..(i + 1) * p];
        let mut j = 0;
        if spec.intercept {
            row[j] = 1.0;
            j += 1;
        }
        for cols in &term_cols {
            let mut v = 1.0;
            for c in cols {
                v *= c[i];
            }
            row[j] = v;
            j += 1;
        }
    }
    Ok((x, response.to_vec(), ds.case_weights.clone()))
}

/// Result of a logistic fit.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// Set when the fit ran against the probability clamp (separation or an
    /// empty cell in a saturated design).
    pub boundary: bool,
    pub iterations: usize,
    pub deviance: f64,
    pub column_names: Vec<String>,
}

impl LogisticFit {
    /// `expit(row · coefficients)`, clamped into the open unit interval.
    pub fn predict_prob(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.coefficients.len() {
            return Err(Error::InvalidInput(format!(
                "row length {} does not match {} coefficients",
                row.len(),
                self.coefficients.len()
            )));
        }
        let eta: f64 = row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        Ok(clamp_prob(expit(eta)))
    }
}

const MAX_ITER: usize = 100;
const DEVIANCE_TOL: f64 = 1e-10;
const SCORE_TOL: f64 = 1e-8;

/// Weighted Bernoulli-logit MLE via IRLS with step halving.
///
/// Boundary estimates (separation, empty cells) are reported via
/// `converged = false` and `boundary = true` rather than an error.
pub fn fit_logistic(
    x: &Array2<f64>,
    y: &[f64],
    case_weights: Option<&[f64]>,
) -> Result<LogisticFit> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("empty design".into()));
    }
    if y.len() != n {
        return Err(Error::InvalidInput("response length mismatch".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput("response must be binary".into()));
    }
    let w: Vec<f64> = match case_weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::InvalidInput("case weight length mismatch".into()));
            }
            if w.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(Error::InvalidInput("case weights must be nonnegative".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("design contains NaN or infinity".into()));
    }

    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let xs = x.as_standard_layout();
    let xs = xs.as_slice().expect("standard layout");

    let mut beta = vec![0.0; p];
    let mut dev = deviance(xs, y, &w, &beta);
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=MAX_ITER {
        iterations = iter;
        let mut xtwx = Array2::<f64>::zeros((p, p));
        let mut xtwz = Array1::<f64>::zeros(p);
        {
            let xtwx_s = xtwx.as_slice_mut().expect("standard layout");
            let xtwz_s = xtwz.as_slice_mut().expect("standard layout");
            for i in 0..n {
                if w[i] == 0.0 {
                    continue;
                }
                let row = &xs[i * p..(i + 1) * p];
                let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                let mu = clamp_prob(expit(eta));
                let wi = w[i] * mu * (1.0 - mu);
                let z = wi * eta + w[i] * (y[i] - mu);
                for j in 0..p {
                    let wxj = wi * row[j];
                    xtwz_s[j] += row[j] * z;
                    let dst = &mut xtwx_s[j * p + j..j * p + p];
                    for (d, &xk) in dst.iter_mut().zip(&row[j..]) {
                        *d += wxj * xk;
                    }
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                xtwx[[j, k]] = xtwx[[k, j]];
            }
        }
        let delta_beta = match solve_spd(&mut xtwx, xtwz, &names) {
            Ok(d) => d,
            // on the first step the working weights are uniform, so a tiny
            // pivot is genuine rank deficiency; later on it means the weights
            // collapsed while drifting to the boundary — keep the last beta
            Err(e) if iter == 1 => return Err(e),
            Err(_) => break,
        };

        // step-halve if the deviance would increase
        let mut step = 1.0;
        let mut new_beta = beta.clone();
        let mut new_dev = f64::INFINITY;
        for _ in 0..30 {
            for j in 0..p {
                new_beta[j] = beta[j] + step * (delta_beta[j] - beta[j]);
            }
            new_dev = deviance(xs, y, &w, &new_beta);
            if new_dev <= dev + 1e-10 * dev.abs().max(1.0) {
                break;
            }
            step *= 0.5;
        }
        let change = dev - new_dev;
        beta = new_beta;
        dev = new_dev;
        if change.abs() < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }

    // score at the solution decides convergence; the clamp decides boundary
    let mut score = vec![0.0; p];
    let mut boundary = false;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let row = &xs[i * p..(i + 1) * p];
        let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let mu = clamp_prob(expit(eta));
        if mu <= BOUNDARY_EPS || mu >= 1.0 - BOUNDARY_EPS {
            boundary = true;
        }
        for j in 0..p {
            score[j] += w[i] * (y[i] - mu) * row[j];
        }
    }
    let score_norm = score.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let converged = converged && score_norm <= SCORE_TOL && !boundary;

    Ok(LogisticFit {
        coefficients: beta,
        converged,
        boundary,
        iterations,
        deviance: dev,
        column_names: names,
    })
}

fn deviance(xs: &[f64], y: &[f64], w: &[f64], beta: &[f64]) -> f64 {
    let p = beta.len();
    let mut dev = 0.0;
    for i in 0..y.len() {
        if w[i] == 0.0 {
            continue;
        }
        let row = &xs[i * p..(i + 1) * p];
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = clamp_prob(expit(eta));
        dev -= 2.0 * w[i] * (y[i] * mu.ln() + (1.0 - y[i]) * (1.0 - mu).ln());
    }
    dev
}

/// Solves a symmetric positive semi-definite system by Gaussian elimination
/// with diagonal pivot checks; a tiny pivot reports the dependent column.
fn solve_spd(a: &mut Array2<f64>, mut b: Array1<f64>, names: &[String]) -> Result<Vec<f64>> {
    let p = b.len();
    let max_diag = (0..p).fold(0.0f64, |m, j| m.max(a[[j, j]].abs()));
    let tol = 1e-10 * max_diag.max(1e-300);
    for j in 0..p {
        // partial pivoting within the remaining rows
        let mut piv = j;
        for i in (j + 1)..p {
            if a[[i, j]].abs() > a[[piv, j]].abs() {
                piv = i;
            }
        }
        if a[[piv, j]].abs() < tol {
            return Err(Error::SingularDesign { column: j, name: names[j].clone() });
        }
        if piv != j {
            for k in 0..p {
                let tmp = a[[j, k]];
                a[[j, k]] = a[[piv, k]];
                a[[piv, k]] = tmp;
            }
            b.swap(j, piv);
        }
        for i in (j + 1)..p {
            let f = a[[i, j]] / a[[j, j]];
            if f == 0.0 {
                continue;
            }
            for k in j..p {
                a[[i, k]] -= f * a[[j, k]];
            }
            b[i] -= f * b[j];
        }
    }
    let mut x = vec![0.0; p];
    for j in (0..p).rev() {
        let mut s = b[j];
        for k in (j + 1)..p {
            s -= a[[j, k]] * x[k];
        }
        x[j] = s / a[[j, j]];
    }
    Ok(x)
}

/// Convenience: builds the design from a formula spec and fits it.
pub fn fit_formula(ds: &Dataset, spec: &DesignSpec) -> Result<LogisticFit> {
    let (x, y, w) = build_design(ds, spec)?;
    let mut fit = fit_logistic(&x, &y, w.as_deref())?;
    fit.column_names = spec.column_names();
    Ok(fit)
}
