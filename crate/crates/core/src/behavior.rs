//! Heavy-tailed versus memoryless inter-event intervals.
//!
//! Exponential intervals stand in for behavior that looks like random noise;
//! Pareto intervals stand in for Lévy-like behavior. A Hill estimate of the
//! tail exponent separates the two.

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest sequence [`tail_exponent`] accepts.
pub const MIN_ANALYSIS_LEN: usize = 100;
/// Shortest sequence [`classify`] accepts.
pub const MIN_CLASSIFY_LEN: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IntervalModel {
    Exponential { rate: f64 },
    Pareto { alpha: f64, xmin: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventSequence {
    intervals: Vec<f64>,
}

impl EventSequence {
    pub fn new(intervals: Vec<f64>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::BadParameter("empty sequence".into()));
        }
        if let Some(x) = intervals.iter().find(|x| !x.is_finite() || **x <= 0.0) {
            return Err(Error::BadParameter(format!("interval {x} is not positive")));
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[f64] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.intervals.iter().map(|x| x * factor).collect())
    }

    /// One interval per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let intervals = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad interval `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(intervals)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.intervals.len() * 20);
        for x in &self.intervals {
            out.push_str(&format!("{x}\n"));
        }
        out
    }
}

/// Draws `length` i.i.d. intervals from `model`.
pub fn generate_sequence<R: Rng + ?Sized>(model: IntervalModel, length: usize, rng: &mut R) -> Result<EventSequence> {
    if length < MIN_ANALYSIS_LEN {
        return Err(Error::BadParameter(format!(
            "length {length} is below {MIN_ANALYSIS_LEN}"
        )));
    }
    let intervals = match model {
        IntervalModel::Exponential { rate } => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::BadParameter(format!("rate {rate} must be positive")));
            }
            let d = Exp::new(rate).map_err(|e| Error::BadParameter(e.to_string()))?;
            (0..length).map(|_| d.sample(rng)).collect::<Vec<f64>>()
        }
        IntervalModel::Pareto { alpha, xmin } => {
            if !(alpha > 0.0 && alpha.is_finite() && xmin > 0.0 && xmin.is_finite()) {
                return Err(Error::BadParameter(format!(
                    "pareto needs alpha > 0 and xmin > 0, got {alpha}, {xmin}"
                )));
            }
            let d = Pareto::new(xmin, alpha).map_err(|e| Error::BadParameter(e.to_string()))?;
            (0..length).map(|_| d.sample(rng)).collect()
        }
    };
    // an exponential draw can underflow to exactly zero
    let intervals = intervals.into_iter().map(|x| x.max(f64::MIN_POSITIVE)).collect();
    EventSequence::new(intervals)
}

/// Hill estimate `k / Σ_{i<k} ln(x_(i) / x_(k))` over the `k` largest
/// intervals, `x_(k)` being the next order statistic.
pub fn tail_exponent(seq: &EventSequence, k: usize) -> Result<f64> {
    let n = seq.len();
    if n < MIN_ANALYSIS_LEN {
        return Err(Error::BadParameter(format!(
            "sequence length {n} is below {MIN_ANALYSIS_LEN}"
        )));
    }
    if k < 10 || k > n / 2 {
        return Err(Error::BadParameter(format!(
            "k = {k} must lie in [10, {}]",
            n / 2
        )));
    }
    let mut sorted = seq.intervals.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k];
    let sum: f64 = sorted[..k].iter().map(|x| (x / threshold).ln()).sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateSequence);
    }
    Ok(k as f64 / sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    NoiseLike,
    LevyLike,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Tail exponents below this are Lévy-like.
    pub levy_below: f64,
    /// Tail exponents above this are noise-like.
    pub noise_above: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            levy_below: 2.5,
            noise_above: 3.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatternReport {
    pub tail_exponent: f64,
    pub classification: Pattern,
    pub sample_size: usize,
    pub k: usize,
}

pub fn classify(seq: &EventSequence) -> Result<PatternReport> {
    classify_with(seq, Thresholds::default())
}

/// Hill estimate at `k = max(n / 100, 10)` compared against the thresholds.
pub fn classify_with(seq: &EventSequence, thresholds: Thresholds) -> Result<PatternReport> {
    if thresholds.levy_below > thresholds.noise_above {
        return Err(Error::BadParameter("levy threshold exceeds noise threshold".into()));
    }
    let n = seq.len();
    if n < MIN_CLASSIFY_LEN {
        return Err(Error::BadParameter(format!(
            "classification needs at least {MIN_CLASSIFY_LEN} intervals, got {n}"
        )));
    }
    let k = (n / 100).max(10);
    let alpha = tail_exponent(seq, k)?;
    let classification = if alpha < thresholds.levy_below {
        Pattern::LevyLike
    } else if alpha > thresholds.noise_above {
        Pattern::NoiseLike
    } else {
        Pattern::Indeterminate
    };
    Ok(PatternReport {
        tail_exponent: alpha,
        classification,
        sample_size: n,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    const EXP1: IntervalModel = IntervalModel::Exponential { rate: 1.0 };
    const PARETO15: IntervalModel = IntervalModel::Pareto { alpha: 1.5, xmin: 1.0 };

    #[test]
    fn generator_examples() {
        let s = generate_sequence(EXP1, 10_000, &mut trial_rng(0, 0)).unwrap();
        let mean = s.intervals().iter().sum::<f64>() / s.len() as f64;
        assert!((0.97..=1.03).contains(&mean), "{mean}");

        let s = generate_sequence(PARETO15, 10_000, &mut trial_rng(0, 1)).unwrap();
        assert!(s.intervals().iter().all(|&x| x >= 1.0));

        let a = generate_sequence(PARETO15, 500, &mut trial_rng(3, 3)).unwrap();
        let b = generate_sequence(PARETO15, 500, &mut trial_rng(3, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_rejects_bad_parameters() {
        let mut rng = trial_rng(0, 0);
        assert!(generate_sequence(IntervalModel::Exponential { rate: 0.0 }, 100, &mut rng).is_err());
        assert!(generate_sequence(IntervalModel::Pareto { alpha: -1.0, xmin: 1.0 }, 100, &mut rng).is_err());
        assert!(generate_sequence(IntervalModel::Pareto { alpha: 1.0, xmin: 0.0 }, 100, &mut rng).is_err());
        assert!(generate_sequence(EXP1, 99, &mut rng).is_err());
    }

    #[test]
    fn hill_examples() {
        let s = generate_sequence(PARETO15, 100_000, &mut trial_rng(1, 0)).unwrap();
        let a = tail_exponent(&s, 1000).unwrap();
        assert!((1.35..=1.65).contains(&a), "{a}");

        let s = generate_sequence(EXP1, 100_000, &mut trial_rng(1, 1)).unwrap();
        let a = tail_exponent(&s, 1000).unwrap();
        assert!(a > 3.0, "{a}");

        let flat = EventSequence::new(vec![2.0; 200]).unwrap();
        assert_eq!(tail_exponent(&flat, 10), Err(Error::DegenerateSequence));
    }

    #[test]
    fn hill_rejects_bad_k() {
        let s = generate_sequence(EXP1, 200, &mut trial_rng(0, 0)).unwrap();
        assert!(tail_exponent(&s, 9).is_err());
        assert!(tail_exponent(&s, 101).is_err());
        assert!(tail_exponent(&s, 100).is_ok());
    }

    #[test]
    fn hill_is_scale_free() {
        let s = generate_sequence(PARETO15, 5000, &mut trial_rng(2, 0)).unwrap();
        let a = tail_exponent(&s, 50).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e6] {
            let b = tail_exponent(&s.scaled(c).unwrap(), 50).unwrap();
            assert!((a - b).abs() < 1e-9, "c={c}: {a} vs {b}");
        }
    }

    #[test]
    fn classify_examples() {
        let s = generate_sequence(PARETO15, 10_000, &mut trial_rng(5, 0)).unwrap();
        assert_eq!(classify(&s).unwrap().classification, Pattern::LevyLike);
        let s = generate_sequence(EXP1, 10_000, &mut trial_rng(5, 1)).unwrap();
        let r = classify(&s).unwrap();
        assert_eq!(r.classification, Pattern::NoiseLike);
        assert_eq!((r.k, r.sample_size), (100, 10_000));
        let short = generate_sequence(EXP1, 500, &mut trial_rng(5, 2)).unwrap();
        assert!(matches!(classify(&short), Err(Error::BadParameter(_))));
    }

    #[test]
    fn indeterminate_band() {
        let s = generate_sequence(PARETO15, 10_000, &mut trial_rng(6, 0)).unwrap();
        let a = classify(&s).unwrap().tail_exponent;
        let band = Thresholds { levy_below: a - 0.1, noise_above: a + 0.1 };
        assert_eq!(classify_with(&s, band).unwrap().classification, Pattern::Indeterminate);
    }

    #[test]
    fn text_round_trip() {
        let s = generate_sequence(EXP1, 100, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(EventSequence::parse(&s.to_text()).unwrap(), s);
        assert!(EventSequence::parse("1.0\n-2\n").is_err());
        assert!(EventSequence::parse("1.0\nabc\n").is_err());
    }
}
