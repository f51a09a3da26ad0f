//! Collapse policies.
//!
//! A policy decides the outcome distribution of a projective measurement.
//! [`CollapsePolicy::Born`] is plain quantum randomness. The other variants
//! deviate from the Born rule but only ever redistribute probability among
//! *admissible* outcomes, those with non-zero Born probability. Asking for an
//! inadmissible outcome is an error, never a silent renormalization.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{
    born_distribution, check_outcome, ProbabilityDistribution, ProjectiveMeasurement, StateVector,
    FORBIDDEN_THRESHOLD,
};

#[derive(Clone, Debug, PartialEq)]
pub enum CollapsePolicy {
    Born,
    Forced(usize),
    Biased(ProbabilityDistribution),
    Scripted(Script),
}

/// A fixed outcome sequence consumed one entry per measurement.
///
/// Entries that are inadmissible when reached, and every measurement after the
/// sequence runs out, are delegated to the fallback policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Script {
    sequence: Vec<usize>,
    cursor: usize,
    fallback: Box<CollapsePolicy>,
}

impl Script {
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn fallback(&self) -> &CollapsePolicy {
        &self.fallback
    }

    pub fn rewind(&mut self) {
        self.cursor = 0;
    }
}

/// Audit record for one sampled measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutcomeSample {
    pub outcome: usize,
    pub born_prob: f64,
    pub policy_prob: f64,
    /// A scripted entry was inadmissible and the fallback decided instead.
    pub forbidden_attempted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeviationStatistic {
    pub tv: f64,
    pub chi2: f64,
}

impl CollapsePolicy {
    pub fn forced(target: usize) -> Self {
        Self::Forced(target)
    }

    pub fn biased(weights: Vec<f64>) -> Result<Self> {
        Ok(Self::Biased(ProbabilityDistribution::new(weights)?))
    }

    /// Scripted policy; the fallback may not itself be scripted.
    pub fn scripted(sequence: Vec<usize>, fallback: CollapsePolicy) -> Result<Self> {
        if matches!(fallback, CollapsePolicy::Scripted(_)) {
            return Err(Error::InvalidPolicy(
                "a scripted policy cannot fall back to another script".into(),
            ));
        }
        Ok(Self::Scripted(Script {
            sequence,
            cursor: 0,
            fallback: Box::new(fallback),
        }))
    }

    pub fn is_born(&self) -> bool {
        matches!(self, CollapsePolicy::Born)
    }

    /// Distribution implied by this policy given the Born distribution.
    /// The flag reports a scripted entry that had to be skipped.
    fn resolve(&self, born: &ProbabilityDistribution) -> Result<(ProbabilityDistribution, bool)> {
        let n = born.len();
        match self {
            CollapsePolicy::Born => Ok((born.clone(), false)),
            CollapsePolicy::Forced(t) => {
                check_outcome(*t, n)?;
                require_admissible(*t, born)?;
                Ok((ProbabilityDistribution::point_mass(n, *t), false))
            }
            CollapsePolicy::Biased(w) => {
                if w.len() != n {
                    return Err(Error::LengthMismatch {
                        left: w.len(),
                        right: n,
                    });
                }
                for (j, &wj) in w.probs().iter().enumerate() {
                    if wj > FORBIDDEN_THRESHOLD {
                        require_admissible(j, born)?;
                    }
                }
                Ok((w.clone(), false))
            }
            CollapsePolicy::Scripted(script) => match script.sequence.get(script.cursor) {
                Some(&t) => {
                    check_outcome(t, n)?;
                    if born.probs()[t] > FORBIDDEN_THRESHOLD {
                        Ok((ProbabilityDistribution::point_mass(n, t), false))
                    } else {
                        let (dist, _) = script.fallback.resolve(born)?;
                        Ok((dist, true))
                    }
                }
                None => script.fallback.resolve(born),
            },
        }
    }

    fn advance(&mut self) {
        if let CollapsePolicy::Scripted(script) = self {
            if script.cursor < script.sequence.len() {
                script.cursor += 1;
            }
        }
    }
}

fn require_admissible(outcome: usize, born: &ProbabilityDistribution) -> Result<()> {
    let p = born.probs()[outcome];
    if p > FORBIDDEN_THRESHOLD {
        Ok(())
    } else {
        Err(Error::ForbiddenOutcome {
            outcome,
            born_prob: p,
        })
    }
}

/// Outcomes with Born probability above [`FORBIDDEN_THRESHOLD`].
pub fn admissible_outcomes(s: &StateVector, m: &ProjectiveMeasurement) -> Result<Vec<usize>> {
    Ok(born_distribution(s, m)?.support())
}

/// The outcome distribution `policy` induces on measuring `m` in state `s`.
/// Does not advance a script.
pub fn effective_distribution(
    policy: &CollapsePolicy,
    s: &StateVector,
    m: &ProjectiveMeasurement,
) -> Result<ProbabilityDistribution> {
    let born = born_distribution(s, m)?;
    Ok(policy.resolve(&born)?.0)
}

/// Draws one outcome under `policy`, advancing a script by one entry.
pub fn sample_outcome<R: Rng + ?Sized>(
    policy: &mut CollapsePolicy,
    s: &StateVector,
    m: &ProjectiveMeasurement,
    rng: &mut R,
) -> Result<OutcomeSample> {
    let born = born_distribution(s, m)?;
    sample_with_born(policy, &born, rng)
}

/// [`sample_outcome`] for callers that already hold the Born distribution.
pub fn sample_with_born<R: Rng + ?Sized>(
    policy: &mut CollapsePolicy,
    born: &ProbabilityDistribution,
    rng: &mut R,
) -> Result<OutcomeSample> {
    let (dist, forbidden_attempted) = policy.resolve(born)?;
    let outcome = draw(&dist, rng);
    policy.advance();
    Ok(OutcomeSample {
        outcome,
        born_prob: born.probs()[outcome],
        policy_prob: dist.probs()[outcome],
        forbidden_attempted,
    })
}

/// Inverse-CDF draw. Consumes exactly one `f64` from `rng`, and never
/// returns an index carrying zero mass.
pub fn draw<R: Rng + ?Sized>(dist: &ProbabilityDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in dist.probs().iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

/// Total-variation distance and Pearson chi-square of observed counts
/// against a reference distribution.
pub fn deviation_statistic(counts: &[u64], reference: &ProbabilityDistribution) -> Result<DeviationStatistic> {
    if counts.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: counts.len(),
            right: reference.len(),
        });
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::BadParameter("counts sum to zero".into()));
    }
    let n = total as f64;
    let mut tv = 0.0;
    let mut chi2 = 0.0;
    for (&c, &p) in counts.iter().zip(reference.probs()) {
        tv += (c as f64 / n - p).abs();
        if p > 0.0 {
            chi2 += (c as f64 - n * p).powi(2) / (n * p);
        }
    }
    Ok(DeviationStatistic { tv: 0.5 * tv, chi2 })
}

impl fmt::Display for CollapsePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollapsePolicy::Born => write!(f, "born"),
            CollapsePolicy::Forced(t) => write!(f, "forced:{t}"),
            CollapsePolicy::Biased(w) => {
                let parts: Vec<String> = w.probs().iter().map(|p| p.to_string()).collect();
                write!(f, "biased:{}", parts.join(","))
            }
            CollapsePolicy::Scripted(s) => {
                let parts: Vec<String> = s.sequence.iter().map(|t| t.to_string()).collect();
                write!(f, "scripted:{};fallback={}", parts.join(","), s.fallback)
            }
        }
    }
}

fn parse_weight(token: &str) -> Result<f64> {
    let token = token.trim();
    let bad = || Error::Parse(format!("bad weight `{token}`"));
    match token.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => token.parse().map_err(|_| bad()),
    }
}

fn parse_index_list(body: &str) -> Result<Vec<usize>> {
    if body.trim().is_empty() {
        return Ok(Vec::new());
    }
    body.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad outcome index `{t}`")))
        })
        .collect()
}

/// Grammar: `born`, `forced:<i>`, `biased:<p0,p1,...>` (entries may be
/// fractions such as `3/4`), `scripted:<i1,i2,...>;fallback=<policy>`.
/// A missing fallback defaults to `born`.
impl FromStr for CollapsePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, body) = match s.split_once(':') {
            Some((h, b)) => (h.trim(), Some(b)),
            None => (s, None),
        };
        match (head, body) {
            ("born", None) => Ok(CollapsePolicy::Born),
            ("forced", Some(b)) => b
                .trim()
                .parse()
                .map(CollapsePolicy::Forced)
                .map_err(|_| Error::Parse(format!("bad forced target `{b}`"))),
            ("biased", Some(b)) => {
                let weights = b.split(',').map(parse_weight).collect::<Result<Vec<_>>>()?;
                CollapsePolicy::biased(weights)
            }
            ("scripted", Some(b)) => {
                let (seq, fallback) = match b.split_once(';') {
                    Some((seq, rest)) => {
                        let rest = rest.trim();
                        let fb = rest.strip_prefix("fallback=").ok_or_else(|| {
                            Error::Parse(format!("expected `fallback=<policy>`, got `{rest}`"))
                        })?;
                        (seq, fb.parse()?)
                    }
                    None => (b, CollapsePolicy::Born),
                };
                CollapsePolicy::scripted(parse_index_list(seq)?, fallback)
            }
            _ => Err(Error::Parse(format!("unrecognized policy `{s}`"))),
        }
    }
}
