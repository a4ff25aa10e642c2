use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{MetricsError, ScoreMatrix};

pub const DEFAULT_RESAMPLES: usize = 1000;
/// Label written next to every interval.
pub const CI_METHOD: &str = "percentile-bootstrap";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricWithCI {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    /// Resamples on which the statistic was defined.
    pub n_valid: usize,
    pub seed: u64,
    /// Set when the point estimate falls outside its own percentile interval,
    /// which can happen on small or degenerate data.
    pub flagged: bool,
}

/// Linear-interpolation percentile (`q` in [0, 1]) of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 95% percentile bootstrap over samples.
///
/// Resample `i` draws from its own ChaCha stream `(seed, i)`, so the result
/// does not depend on how the resamples are scheduled across threads.
/// Resamples on which `statistic` fails (e.g. a class drops out) are skipped
/// and counted in `n_resamples - n_valid`.
pub fn bootstrap_ci<F>(statistic: F, data: &ScoreMatrix, n_resamples: usize, seed: u64) -> Result<MetricWithCI, MetricsError>
where
    F: Fn(&ScoreMatrix) -> Result<f64, MetricsError> + Sync,
{
    if data.is_empty() {
        return Err(MetricsError::EmptyData);
    }
    let point = statistic(data)?;
    let n = data.len();
    let mut values: Vec<f64> = (0..n_resamples)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let rows = (0..n).map(|_| data.rows()[rng.gen_range(0..n)].clone()).collect();
            statistic(&ScoreMatrix::from_rows_unchecked(rows)).ok()
        })
        .collect();
    if values.is_empty() {
        return Err(MetricsError::NoValidResamples(n_resamples));
    }
    values.sort_by(f64::total_cmp);
    let ci_low = percentile(&values, 0.025);
    let ci_high = percentile(&values, 0.975);
    Ok(MetricWithCI {
        point,
        ci_low,
        ci_high,
        n_resamples,
        n_valid: values.len(),
        seed,
        flagged: !(ci_low <= point && point <= ci_high),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ScoreRow;
    use crate::ActionClass;

    fn bernoulli_matrix(n: usize, seed: u64) -> ScoreMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|i| ScoreRow {
                sample_id: i.to_string(),
                label: if rng.gen_bool(0.5) { ActionClass::Clipping } else { ActionClass::Dissection },
                group: None,
                fold: None,
                probs: [0.1; 10],
            })
            .collect();
        ScoreMatrix::new(rows).unwrap()
    }

    fn clipping_rate(m: &ScoreMatrix) -> Result<f64, MetricsError> {
        Ok(m.rows().iter().filter(|r| r.label == ActionClass::Clipping).count() as f64 / m.len() as f64)
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(percentile(&[0.0, 10.0], 0.25), 2.5);
    }

    #[test]
    fn constant_statistic_has_zero_width() {
        let m = bernoulli_matrix(50, 1);
        let ci = bootstrap_ci(|_| Ok(0.42), &m, 200, 3).unwrap();
        assert_eq!((ci.ci_low, ci.point, ci.ci_high), (0.42, 0.42, 0.42));
        assert!(!ci.flagged);
    }

    #[test]
    fn bernoulli_width_matches_normal_approximation() {
        let m = bernoulli_matrix(10_000, 11);
        let ci = bootstrap_ci(clipping_rate, &m, 1000, 5).unwrap();
        // 2 * 1.96 * sqrt(0.25 / 1e4) = 0.0196
        let width = ci.ci_high - ci.ci_low;
        assert!((width - 0.0196).abs() < 0.002, "width {width}");
        assert!(ci.ci_low <= ci.point && ci.point <= ci.ci_high);
    }

    #[test]
    fn seeded_and_schedule_independent() {
        let m = bernoulli_matrix(300, 2);
        let a = bootstrap_ci(clipping_rate, &m, 300, 9).unwrap();
        let b = bootstrap_ci(clipping_rate, &m, 300, 9).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = single.install(|| bootstrap_ci(clipping_rate, &m, 300, 9).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn empty_data_errors() {
        let m = ScoreMatrix::default();
        assert!(matches!(bootstrap_ci(clipping_rate, &m, 10, 0), Err(MetricsError::EmptyData)));
    }
}
