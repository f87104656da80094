//! Nonparametric (record-level) bootstrap with percentile intervals.

use rand::Rng;
use serde::Serialize;

use crate::data_model::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream;

const DOMAIN: u64 = 0x626f_6f74; // "boot"

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    /// Statistic on the original data.
    pub estimate: f64,
    /// Percentile interval bounds.
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Standard deviation of the successful replicates.
    pub se: f64,
    pub replicates: usize,
    pub failed: usize,
}

/// Order statistic at the `ceil(q * m)`-th position (1-based) of a sorted
/// sample, clamped to the support.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    debug_assert!(m > 0);
    let k = (q * m as f64).ceil() as usize;
    sorted[k.clamp(1, m) - 1]
}

/// Resamples records with replacement `b` times, applies `statistic` to each
/// resample, and summarizes the replicate distribution.  Replicates on which
/// the statistic fails (separation, empty groups, ...) are dropped; if more
/// than half fail the bootstrap as a whole is reported as degenerate.
pub fn bootstrap(
    ds: &Dataset,
    statistic: &dyn Fn(&Dataset) -> Result<f64>,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapSummary> {
    if b == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one replicate".into()));
    }
    if !(0.0..1.0).contains(&level) || level <= 0.0 {
        return Err(Error::InvalidInput(format!("confidence level {level} out of (0, 1)")));
    }
    let estimate = statistic(ds)?;
    let n = ds.len();
    let mut replicates = Vec::with_capacity(b);
    let mut failed = 0usize;
    for rep in 0..b {
        let mut rng = stream(seed, &[DOMAIN, rep as u64]);
        let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let resample = ds.select(&idx);
        match statistic(&resample) {
            Ok(v) if v.is_finite() => replicates.push(v),
            _ => failed += 1,
        }
    }
    if failed * 2 > b {
        return Err(Error::BootstrapDegenerate { failed, total: b });
    }
    replicates.sort_by(|a, b| a.partial_cmp(b).expect("finite replicates"));
    let m = replicates.len();
    let mean = replicates.iter().sum::<f64>() / m as f64;
    let se = if m > 1 {
        (replicates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    let alpha = 1.0 - level;
    Ok(BootstrapSummary {
        estimate,
        lower: percentile(&replicates, alpha / 2.0),
        upper: percentile(&replicates, 1.0 - alpha / 2.0),
        level,
        se,
        replicates: m,
        failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn single_column(values: Vec<f64>) -> Dataset {
        Dataset::new(vec!["x".into()], vec![values], None)
    }

    fn mean_stat(ds: &Dataset) -> Result<f64> {
        let x = ds.column("x")?;
        Ok(x.iter().sum::<f64>() / x.len() as f64)
    }

    #[test]
    fn percentile_uses_ceil_convention() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&sorted, 0.025), 1.0); // ceil(0.1) = 1
        assert_eq!(percentile(&sorted, 0.5), 2.0); // ceil(2.0) = 2
        assert_eq!(percentile(&sorted, 0.51), 3.0); // ceil(2.04) = 3
        assert_eq!(percentile(&sorted, 0.975), 4.0); // ceil(3.9) = 4
    }

    #[test]
    fn same_seed_reproduces_summary() {
        let ds = single_column((0..200).map(|i| (i % 17) as f64).collect());
        let a = bootstrap(&ds, &mean_stat, 100, 0.95, 42).unwrap();
        let b = bootstrap(&ds, &mean_stat, 100, 0.95, 42).unwrap();
        assert_eq!(a.lower, b.lower);
        assert_eq!(a.upper, b.upper);
        assert_eq!(a.se, b.se);
        let c = bootstrap(&ds, &mean_stat, 100, 0.95, 43).unwrap();
        assert!(a.lower != c.lower || a.upper != c.upper);
    }

    #[test]
    fn constant_statistic_collapses_interval() {
        let ds = single_column(vec![3.0; 50]);
        let s = bootstrap(&ds, &mean_stat, 50, 0.95, 1).unwrap();
        assert_eq!(s.lower, 3.0);
        assert_eq!(s.upper, 3.0);
        assert_eq!(s.se, 0.0);
        assert_eq!(s.failed, 0);
    }

    #[test]
    fn bootstrap_se_of_mean_tracks_theory() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(9);
        let normal = Normal::new(2.0, 3.0).unwrap();
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let sd = {
            let m = x.iter().sum::<f64>() / n as f64;
            (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        let ds = single_column(x);
        let s = bootstrap(&ds, &mean_stat, 800, 0.95, 7).unwrap();
        let theory = sd / (n as f64).sqrt();
        assert_abs_diff_eq!(s.se, theory, epsilon = 0.2 * theory);
        assert!(s.lower <= s.estimate && s.estimate <= s.upper);
    }

    #[test]
    fn failed_replicates_are_counted_and_capped() {
        // fails whenever the resample misses the single record with x = 1
        let mut values = vec![0.0; 40];
        values[0] = 1.0;
        let ds = single_column(values);
        let fragile = |ds: &Dataset| -> Result<f64> {
            let x = ds.column("x")?;
            if x.contains(&1.0) {
                Ok(x.iter().sum())
            } else {
                Err(Error::DegenerateGroup(1))
            }
        };
        let s = bootstrap(&ds, &fragile, 200, 0.95, 3).unwrap();
        assert!(s.failed > 0);
        assert_eq!(s.replicates + s.failed, 200);

        let always_fail =
            |_: &Dataset| -> Result<f64> { Err(Error::DegenerateGroup(0)) };
        // the point estimate itself fails first
        assert!(bootstrap(&ds, &always_fail, 10, 0.95, 3).is_err());
        // and a fragile-enough statistic trips the majority-failure guard
        let mut values = vec![0.0; 3];
        values[0] = 1.0;
        values[1] = 2.0;
        values[2] = 3.0;
        let small = single_column(values);
        let picky = |ds: &Dataset| -> Result<f64> {
            let x = ds.column("x")?;
            if x.contains(&1.0) && x.contains(&2.0) && x.contains(&3.0) {
                Ok(0.0)
            } else {
                Err(Error::DegenerateGroup(0))
            }
        };
        match bootstrap(&small, &picky, 400, 0.95, 11) {
            Err(Error::BootstrapDegenerate { failed, total }) => {
                assert_eq!(total, 400);
                assert!(failed * 2 > total);
            }
            other => panic!("expected degenerate bootstrap, got {other:?}"),
        }
    }
}
