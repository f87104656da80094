//! Built-in reinfarction example data: the cross-classified cohort counts,
//! the misclassification rates used to degrade them, and the expected tables
//! derived from both.
//!
//! Note: the published collapsed `(Z, B, L)` table for this example swaps the
//! `(L=0, Z=1)` and `(L=1, Z=0)` row pairs relative to the full expected
//! table it is collapsed from.  Everything here is derived from the full
//! table, whose collapse yields the crude odds ratio of 1.031 quoted for the
//! misclassified data.

use crate::data_model::{
    expected_misclassified_counts, expected_validation_counts, CellCountTable, Dataset,
    MisclassRates, TableDims,
};
use crate::error::Result;
use crate::estimators::{estimate_with_weights, OrResult, DEFAULT_S};
use crate::glm::DesignSpec;
use crate::nuisance::{closed_form_mle, convert_to_predictive, SensSpecParams};
use crate::weights::{
    weights_confounding_only, weights_joint_predictive, weights_joint_sensspec,
    weights_outcome_only, weights_unit,
};

/// Cross-classification of 33,007 subjects by `(Y, A, L)`.
pub fn table1() -> CellCountTable {
    let mut t = CellCountTable::zeros(TableDims::Yal);
    t.set_yal(0, 0, 0, 11602.0);
    t.set_yal(0, 1, 0, 13116.0);
    t.set_yal(1, 0, 0, 890.0);
    t.set_yal(1, 1, 0, 589.0);
    t.set_yal(0, 0, 1, 1302.0);
    t.set_yal(0, 1, 1, 5363.0);
    t.set_yal(1, 0, 1, 49.0);
    t.set_yal(1, 1, 1, 96.0);
    t
}

/// True and false positive rates for the example's dependent differential
/// misclassification channel.
pub fn table2() -> MisclassRates {
    let mut pi = [[[[0.0; 2]; 2]; 2]; 2];
    // pi[b][y][a][l]
    pi[0][0][0][0] = 0.050;
    pi[0][0][0][1] = 0.020;
    pi[1][0][0][0] = 0.060;
    pi[1][0][0][1] = 0.108;
    pi[0][1][0][0] = 0.930;
    pi[0][1][0][1] = 0.806;
    pi[1][1][0][0] = 0.938;
    pi[1][1][0][1] = 0.692;
    pi[0][0][1][0] = 0.030;
    pi[0][0][1][1] = 0.109;
    pi[1][0][1][0] = 0.060;
    pi[1][0][1][1] = 0.050;
    pi[0][1][1][0] = 0.906;
    pi[0][1][1][1] = 0.765;
    pi[1][1][1][0] = 0.950;
    pi[1][1][1][1] = 0.861;
    let mut lambda = [[[0.0; 2]; 2]; 2];
    // lambda[y][a][l]
    lambda[0][0][0] = 0.010;
    lambda[1][0][0] = 0.181;
    lambda[0][1][0] = 0.880;
    lambda[1][1][0] = 0.910;
    lambda[0][0][1] = 0.100;
    lambda[1][0][1] = 0.265;
    lambda[0][1][1] = 0.930;
    lambda[1][1][1] = 0.823;
    MisclassRates { pi, lambda }
}

/// Exact expected `(Z, B, Y, A, L)` counts after misclassification.
pub fn table3_expected() -> CellCountTable {
    expected_misclassified_counts(&table1(), &table2()).expect("fixed rates are valid")
}

/// Exact expected `m_1..m_48` counts after validation sampling with
/// `Pr(R_A=1|B=b) = 0.25 + 0.10 b` and `R_Y = R_A`.
pub fn table5_expected() -> CellCountTable {
    expected_validation_counts(&table3_expected(), &|_z, b, _l| 0.25 + 0.10 * b as f64)
        .expect("fixed selection is valid")
}

/// Printed integer `m` vector of the published validation-count table,
/// used as a regression anchor.
pub const TABLE5_PRINTED: [f64; 48] = [
    9371.0, 7147.0, 1011.0, 884.0, 1120.0, 3165.0, 80.0, 221.0, // m1..m8
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // m9..m16
    2728.0, 38.0, 144.0, 2.0, 13.0, 3.0, 169.0, 53.0, // m17..m24
    382.0, 3797.0, 12.0, 242.0, 1.0, 9.0, 12.0, 178.0, // m25..m32
    287.0, 41.0, 6.0, 5.0, 2.0, 1.0, 7.0, 3.0, // m33..m40
    84.0, 1658.0, 10.0, 87.0, 1.0, 4.0, 3.0, 24.0, // m41..m48
];

/// The complete sensitivity/specificity parameter vector of the example:
/// exposure and outcome models read off the cohort table, misclassification
/// rates from the published channel.
pub fn true_sensspec_params() -> SensSpecParams {
    let t = table1();
    let rates = table2();
    let mut delta = [0.0; 2];
    let mut epsilon = [[0.0; 2]; 2];
    for l in 0..2u8 {
        let cell = |y: u8, a: u8| t.yal(y, a, l);
        let n_a: [f64; 2] = [cell(0, 0) + cell(1, 0), cell(0, 1) + cell(1, 1)];
        delta[l as usize] = n_a[1] / (n_a[0] + n_a[1]);
        for a in 0..2u8 {
            epsilon[a as usize][l as usize] = cell(1, a) / n_a[a as usize];
        }
    }
    SensSpecParams { delta, epsilon, lambda: rates.lambda, pi: rates.pi }
}

/// Grouped `(y, a, l1)` dataset of the full cohort.
pub fn cohort_dataset() -> Dataset {
    let t = table1();
    let mut y = Vec::new();
    let mut a = Vec::new();
    let mut l1 = Vec::new();
    let mut w = Vec::new();
    for yi in 0..2u8 {
        for ai in 0..2u8 {
            for li in 0..2u8 {
                y.push(yi as f64);
                a.push(ai as f64);
                l1.push(li as f64);
                w.push(t.yal(yi, ai, li));
            }
        }
    }
    Dataset::new(vec!["y".into(), "a".into(), "l1".into()], vec![y, a, l1], Some(w))
}

/// Grouped `(z, b, l1)` dataset of the expected misclassified cohort.
pub fn observed_dataset() -> Dataset {
    let t = table3_expected();
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
                        count += t.zbyal(zi, bi, yi, ai, li);
                    }
                }
                z.push(zi as f64);
                b.push(bi as f64);
                l1.push(li as f64);
                w.push(count);
            }
        }
    }
    Dataset::new(vec!["z".into(), "b".into(), "l1".into()], vec![z, b, l1], Some(w))
}

/// The example's full chain of odds-ratio estimates.
#[derive(Debug, Clone)]
pub struct AnchorEstimates {
    /// Crude contrast of `(Y, A)` in the cohort.
    pub crude_true: OrResult,
    /// Propensity-weighted contrast of `(Y, A)`: the estimand.
    pub ipw_true: OrResult,
    /// Crude contrast of the misclassified `(Z, B)`.
    pub crude_observed: OrResult,
    /// Propensity weighting alone on `(Z, B)`.
    pub ps_observed: OrResult,
    /// Outcome-only correction on `(Z, B)`.
    pub gp_observed: OrResult,
    /// Joint correction with the true parameters.
    pub ipwm_true_params: OrResult,
    /// Joint correction with parameters estimated from the validation counts.
    pub ipwm_estimated: OrResult,
}

pub fn anchor_estimates() -> Result<AnchorEstimates> {
    anchor_estimates_with_s(DEFAULT_S)
}

pub fn anchor_estimates_with_s(s: f64) -> Result<AnchorEstimates> {
    let cohort = cohort_dataset();
    let observed = observed_dataset();
    let theta = true_sensspec_params();
    let starred = convert_to_predictive(&theta)?;
    let mle = closed_form_mle(&table5_expected())?;

    let crude_true =
        estimate_with_weights(&cohort, "y", "a", &weights_unit(&cohort), s)?;
    let ipw_w = weights_confounding_only(&cohort, &DesignSpec::parse("a ~ l1")?)?;
    let ipw_true = estimate_with_weights(&cohort, "y", "a", &ipw_w, s)?;

    let crude_observed =
        estimate_with_weights(&observed, "z", "b", &weights_unit(&observed), s)?;
    let ps_w = weights_confounding_only(&observed, &DesignSpec::parse("b ~ l1")?)?;
    let ps_observed = estimate_with_weights(&observed, "z", "b", &ps_w, s)?;

    let gp_w = weights_outcome_only(&observed, &starred)?;
    let gp_observed = estimate_with_weights(&observed, "z", "b", &gp_w, s)?;

    let ipwm_w = weights_joint_sensspec(&observed, &theta)?;
    let ipwm_true_params = estimate_with_weights(&observed, "z", "b", &ipwm_w, s)?;

    let mle_w = weights_joint_predictive(&observed, &mle)?;
    let ipwm_estimated = estimate_with_weights(&observed, "z", "b", &mle_w, s)?;

    Ok(AnchorEstimates {
        crude_true,
        ipw_true,
        crude_observed,
        ps_observed,
        gp_observed,
        ipwm_true_params,
        ipwm_estimated,
    })
}
