//! Bob's marginal statistics as a function of Alice's setting.
//!
//! Under the Born rule Bob's marginal is independent of what Alice measures
//! (no-signaling). Once Alice's collapse follows any other admissible
//! distribution, her choice of policy shows up in Bob's marginal on an
//! entangled state, which turns the pair of settings into a classical
//! channel. Its capacity is computed with the Blahut-Arimoto iteration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{draw, effective_distribution, sample_outcome, CollapsePolicy};
use crate::quantum::{
    born_distribution, check_dim, collapse, ProbabilityDistribution, ProjectiveMeasurement,
    StateVector, Subsystem,
};
use crate::rng::{derive_seed, trial_rng};

/// Convergence target for the capacity iteration (bits).
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

/// `Σ_j q_j · Born(Bob | Alice obtained j)` where `q` is the distribution
/// Alice's policy induces. `alice` acts on subsystem A, `bob` on B.
pub fn bob_marginal_analytic(
    shared: &StateVector,
    dims: (usize, usize),
    alice: &ProjectiveMeasurement,
    alice_policy: &CollapsePolicy,
    bob: &ProjectiveMeasurement,
) -> Result<ProbabilityDistribution> {
    check_dim(dims.0 * dims.1, shared.dim())?;
    let alice_full = ProjectiveMeasurement::local(alice.clone(), dims, Subsystem::A)?;
    let bob_full = ProjectiveMeasurement::local(bob.clone(), dims, Subsystem::B)?;
    let q = effective_distribution(alice_policy, shared, &alice_full)?;
    let mut marginal = vec![0.0; bob.outcomes()];
    for (j, &qj) in q.probs().iter().enumerate() {
        if qj == 0.0 {
            continue;
        }
        let post = collapse(shared, &alice_full, j)?;
        let cond = born_distribution(&post, &bob_full)?;
        for (m, p) in marginal.iter_mut().zip(cond.probs()) {
            *m += qj * p;
        }
    }
    ProbabilityDistribution::normalized(&marginal)
}

/// One of Alice's settings: a measurement on her side and a collapse policy.
#[derive(Clone, Debug, PartialEq)]
pub struct AliceSetting {
    pub label: String,
    pub measurement: ProjectiveMeasurement,
    pub policy: CollapsePolicy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalingMode {
    Analytic,
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SettingMarginal {
    pub label: String,
    pub policy: String,
    pub marginal: ProbabilityDistribution,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignalingReport {
    pub bob_marginals: Vec<SettingMarginal>,
    pub max_tv: f64,
    pub channel_bits: f64,
    pub trials_per_setting: Option<u64>,
    pub mode: SignalingMode,
    pub seed: u64,
}

/// Computes Bob's marginal for every setting, the largest pairwise total
/// variation distance between them, and the capacity of the induced
/// setting → Bob-outcome channel.
///
/// `trials = None` selects the exact analytic mode. `Some(n)` samples `n`
/// trials per setting; each setting runs its policy sequentially so that a
/// script advances across trials.
pub fn signaling_experiment(
    shared: &StateVector,
    dims: (usize, usize),
    bob: &ProjectiveMeasurement,
    settings: &[AliceSetting],
    trials: Option<u64>,
    seed: u64,
) -> Result<SignalingReport> {
    if settings.len() < 2 {
        return Err(Error::BadParameter(
            "signaling needs at least two Alice settings".into(),
        ));
    }
    let mut marginals = Vec::with_capacity(settings.len());
    for (idx, setting) in settings.iter().enumerate() {
        let marginal = match trials {
            None => bob_marginal_analytic(shared, dims, &setting.measurement, &setting.policy, bob)?,
            Some(n) => bob_marginal_empirical(
                shared,
                dims,
                setting,
                bob,
                n,
                derive_seed(seed, idx as u64),
            )?,
        };
        marginals.push(SettingMarginal {
            label: setting.label.clone(),
            policy: setting.policy.to_string(),
            marginal,
        });
    }
    let mut max_tv: f64 = 0.0;
    for i in 0..marginals.len() {
        for j in i + 1..marginals.len() {
            max_tv = max_tv.max(marginals[i].marginal.total_variation(&marginals[j].marginal)?);
        }
    }
    let rows: Vec<Vec<f64>> = marginals.iter().map(|m| m.marginal.probs().to_vec()).collect();
    let max_bits = (bob.outcomes() as f64).log2().min((settings.len() as f64).log2());
    let channel_bits = channel_capacity(&rows, CAPACITY_TOLERANCE)?.clamp(0.0, max_bits);
    Ok(SignalingReport {
        bob_marginals: marginals,
        max_tv: max_tv.clamp(0.0, 1.0),
        channel_bits,
        trials_per_setting: trials,
        mode: if trials.is_some() {
            SignalingMode::Empirical
        } else {
            SignalingMode::Analytic
        },
        seed,
    })
}

fn bob_marginal_empirical(
    shared: &StateVector,
    dims: (usize, usize),
    setting: &AliceSetting,
    bob: &ProjectiveMeasurement,
    trials: u64,
    seed: u64,
) -> Result<ProbabilityDistribution> {
    if trials == 0 {
        return Err(Error::BadParameter("trials must be positive".into()));
    }
    check_dim(dims.0 * dims.1, shared.dim())?;
    let alice_full = ProjectiveMeasurement::local(setting.measurement.clone(), dims, Subsystem::A)?;
    let bob_full = ProjectiveMeasurement::local(bob.clone(), dims, Subsystem::B)?;
    // Bob's conditional distributions depend only on Alice's outcome.
    let conditionals = (0..alice_full.outcomes())
        .map(|j| match collapse(shared, &alice_full, j) {
            Ok(post) => born_distribution(&post, &bob_full).map(Some),
            Err(Error::ForbiddenOutcome { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut policy = setting.policy.clone();
    let mut counts = vec![0u64; bob.outcomes()];
    for i in 0..trials {
        let mut rng = trial_rng(seed, i);
        let a = sample_outcome(&mut policy, shared, &alice_full, &mut rng)?;
        let cond = conditionals[a.outcome]
            .as_ref()
            .expect("sampled outcomes are admissible");
        counts[draw(cond, &mut rng)] += 1;
    }
    let n = trials as f64;
    ProbabilityDistribution::new(counts.iter().map(|&c| c as f64 / n).collect())
        .or_else(|_| ProbabilityDistribution::normalized(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>()))
}

/// Capacity in bits of the discrete memoryless channel whose row `x` is
/// `P(y | x)`, by Blahut-Arimoto. Iterates until the gap between the upper
/// and lower capacity bounds falls below `tol`.
pub fn channel_capacity(rows: &[Vec<f64>], tol: f64) -> Result<f64> {
    let nx = rows.len();
    if nx == 0 {
        return Err(Error::BadParameter("channel has no inputs".into()));
    }
    let ny = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != ny) {
        return Err(Error::LengthMismatch {
            left: bad.len(),
            right: ny,
        });
    }
    let mut p = vec![1.0 / nx as f64; nx];
    let ln2 = std::f64::consts::LN_2;
    for _ in 0..1_000_000 {
        let q: Vec<f64> = (0..ny)
            .map(|y| (0..nx).map(|x| p[x] * rows[x][y]).sum())
            .collect();
        // D(W_x || q) in nats
        let d: Vec<f64> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&q)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, qy)| w * (w / qy).ln())
                    .sum::<f64>()
            })
            .collect();
        let c: Vec<f64> = d.iter().map(|v| v.exp()).collect();
        let z: f64 = p.iter().zip(&c).map(|(px, cx)| px * cx).sum();
        let lower = z.ln();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (upper - lower) / ln2 < tol {
            return Ok(lower.max(0.0) / ln2);
        }
        for (px, cx) in p.iter_mut().zip(&c) {
            *px *= cx / z;
        }
    }
    Err(Error::BadParameter("capacity iteration did not converge".into()))
}
