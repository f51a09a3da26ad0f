//! Goodness-of-fit helpers shared by the harnesses.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::quantum::{ProbabilityDistribution, FORBIDDEN_THRESHOLD};

/// Significance level used by every chi-square conformance check.
pub const SIGNIFICANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }
}

/// Pearson chi-square test of `counts` against `reference`.
///
/// Outcomes the reference assigns zero probability are excluded from the
/// statistic. Any count landing on such an outcome is an outright rejection
/// (`p_value = 0`).
pub fn chi_square_test(counts: &[u64], reference: &ProbabilityDistribution) -> Result<ChiSquareTest> {
    if counts.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: counts.len(),
            right: reference.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::BadParameter("no observations".into()));
    }
    let n = n as f64;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    let mut impossible = false;
    for (&c, &p) in counts.iter().zip(reference.probs()) {
        if p > FORBIDDEN_THRESHOLD {
            let expected = n * p;
            statistic += (c as f64 - expected).powi(2) / expected;
            cells += 1;
        } else if c > 0 {
            impossible = true;
        }
    }
    let dof = cells.saturating_sub(1);
    let p_value = if impossible {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        dist.sf(statistic)
    };
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value,
    })
}

/// Empirical frequencies `counts / Σ counts`.
pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Same fixture as the classic dice example: stat = 2.4179..., p = 0.4903...
        let reference = ProbabilityDistribution::uniform(4);
        let t = chi_square_test(&[28, 31, 40, 35], &reference).unwrap();
        assert!((t.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((t.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
        assert_eq!(t.dof, 3);
    }

    #[test]
    fn zero_reference_cells() {
        let reference = ProbabilityDistribution::new(vec![0.5, 0.5, 0.0]).unwrap();
        assert!(chi_square_test(&[50, 50, 0], &reference).unwrap().passes(SIGNIFICANCE));
        assert_eq!(chi_square_test(&[50, 49, 1], &reference).unwrap().p_value, 0.0);
        let point = ProbabilityDistribution::point_mass(3, 1);
        assert_eq!(chi_square_test(&[0, 10, 0], &point).unwrap().p_value, 1.0);
        assert!(chi_square_test(&[0, 0, 0], &point).is_err());
    }
}
