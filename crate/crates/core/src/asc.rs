//! Attention, selection, collapse.
//!
//! A conscious agent first turns its alternatives into a superposition whose
//! Born weights are the normalized priorities (attention), then picks the
//! best admissible alternative under a norm (selection), and finally forces
//! the superposition onto that alternative (collapse). The deterministic
//! robot skips the superposition and takes the argmax directly. Both reach
//! the same action on ordinary inputs; only their traces differ.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{deviation_statistic, draw, sample_outcome, CollapsePolicy, DeviationStatistic};
use crate::quantum::{
    born_distribution, ProbabilityDistribution, ProjectiveMeasurement, StateVector,
    FORBIDDEN_THRESHOLD,
};
use crate::rng::trial_rng;
use crate::stats::{chi_square_test, ChiSquareTest};

/// Norm values closer than this are a tie.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AlternativeSet {
    labels: Vec<String>,
    priorities: Vec<f64>,
}

impl AlternativeSet {
    pub fn new<S: Into<String>>(labels: Vec<S>, priorities: Vec<f64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != priorities.len() {
            return Err(Error::InvalidAlternatives(format!(
                "{} labels but {} priorities",
                labels.len(),
                priorities.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidAlternatives("no alternatives".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidAlternatives(format!("duplicate label `{l}`")));
            }
        }
        if priorities.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidAlternatives(
                "priorities must be non-negative".into(),
            ));
        }
        if priorities.iter().all(|p| *p == 0.0) {
            return Err(Error::AllZeroPriorities);
        }
        Ok(Self { labels, priorities })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Value of each alternative; higher is better.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NormFunction {
    values: BTreeMap<String, f64>,
}

impl NormFunction {
    pub fn new<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    /// Binary moral norm: `good ↦ 1`, `bad ↦ 0`.
    pub fn moral(good: &str, bad: &str) -> Self {
        Self::new([(good, 1.0), (bad, 0.0)])
    }

    /// The same value for every label.
    pub fn constant(alts: &AlternativeSet, value: f64) -> Self {
        Self::new(alts.labels().iter().map(|l| (l.clone(), value)))
    }

    pub fn value(&self, label: &str) -> Result<f64> {
        self.values
            .get(label)
            .copied()
            .ok_or_else(|| Error::NormUndefined(label.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    /// Superposition, norm-guided selection, forced collapse.
    Conscious,
    /// Deterministic argmax with no superposition.
    Robot,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    Attention { tick: u32, probabilities: Vec<f64> },
    Selection { tick: u32, chosen: usize, tie_broken: bool },
    Collapse { tick: u32, outcome: usize, born_prob: f64 },
    Compute { tick: u32, chosen: usize },
}

impl Stage {
    pub fn tick(&self) -> u32 {
        match self {
            Stage::Attention { tick, .. }
            | Stage::Selection { tick, .. }
            | Stage::Collapse { tick, .. }
            | Stage::Compute { tick, .. } => *tick,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Stage::Attention { .. } => "attention",
            Stage::Selection { .. } => "selection",
            Stage::Collapse { .. } => "collapse",
            Stage::Compute { .. } => "compute",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgentTrace {
    pub agent: AgentKind,
    pub stages: Vec<Stage>,
    pub outcome: usize,
    pub label: String,
}

impl AgentTrace {
    pub fn shape(&self) -> Vec<&'static str> {
        self.stages.iter().map(Stage::kind).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Selection {
    pub chosen: usize,
    pub tie_broken: bool,
}

/// `α_j = √(priority_j / Σ priorities)`.
pub fn attention(alts: &AlternativeSet) -> Result<StateVector> {
    let total: f64 = alts.priorities.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroPriorities);
    }
    StateVector::from_real(
        &alts
            .priorities
            .iter()
            .map(|p| (p / total).sqrt())
            .collect::<Vec<_>>(),
    )
}

/// Argmax of the norm over admissible alternatives, ties broken by Born
/// sampling restricted to the tied set.
pub fn selection<R: Rng + ?Sized>(
    s: &StateVector,
    alts: &AlternativeSet,
    norm: &NormFunction,
    rng: &mut R,
) -> Result<Selection> {
    selection_mixed(s, alts, norm, 1.0, rng)
}

/// [`selection`] blended with plain Born sampling: with probability
/// `1 − mixing` the choice is a Born draw over the admissible alternatives,
/// otherwise it is the norm argmax. `mixing = 1` is pure argmax.
pub fn selection_mixed<R: Rng + ?Sized>(
    s: &StateVector,
    alts: &AlternativeSet,
    norm: &NormFunction,
    mixing: f64,
    rng: &mut R,
) -> Result<Selection> {
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::BadParameter(format!("mixing {mixing} outside [0, 1]")));
    }
    if s.dim() != alts.len() {
        return Err(Error::DimensionMismatch {
            expected: alts.len(),
            found: s.dim(),
        });
    }
    let born = born_distribution(s, &ProjectiveMeasurement::computational(s.dim()))?;
    let admissible = born.support();
    if admissible.is_empty() {
        return Err(Error::NoAdmissibleAlternative);
    }
    if mixing < 1.0 && rng.random::<f64>() >= mixing {
        return Ok(Selection {
            chosen: draw(&born, rng),
            tie_broken: false,
        });
    }
    let values = admissible
        .iter()
        .map(|&j| norm.value(&alts.labels[j]))
        .collect::<Result<Vec<_>>>()?;
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = admissible
        .iter()
        .zip(&values)
        .filter(|(_, v)| best - **v <= TIE_TOLERANCE)
        .map(|(j, _)| *j)
        .collect();
    if tied.len() == 1 {
        return Ok(Selection {
            chosen: tied[0],
            tie_broken: false,
        });
    }
    let weights: Vec<f64> = tied.iter().map(|&j| born.probs()[j]).collect();
    let pick = draw(&ProbabilityDistribution::normalized(&weights)?, rng);
    Ok(Selection {
        chosen: tied[pick],
        tie_broken: true,
    })
}

/// Attention → selection → forced collapse onto the selected alternative.
pub fn act<R: Rng + ?Sized>(alts: &AlternativeSet, norm: &NormFunction, rng: &mut R) -> Result<AgentTrace> {
    act_mixed(alts, norm, 1.0, rng)
}

pub fn act_mixed<R: Rng + ?Sized>(
    alts: &AlternativeSet,
    norm: &NormFunction,
    mixing: f64,
    rng: &mut R,
) -> Result<AgentTrace> {
    let state = attention(alts)?;
    let basis = ProjectiveMeasurement::computational(state.dim());
    let probabilities = born_distribution(&state, &basis)?.probs().to_vec();
    let chosen = selection_mixed(&state, alts, norm, mixing, rng)?;
    let sample = sample_outcome(&mut CollapsePolicy::Forced(chosen.chosen), &state, &basis, rng)
        .expect("selection only returns admissible alternatives");
    debug_assert!(sample.born_prob > FORBIDDEN_THRESHOLD);
    Ok(AgentTrace {
        agent: AgentKind::Conscious,
        stages: vec![
            Stage::Attention { tick: 1, probabilities },
            Stage::Selection {
                tick: 2,
                chosen: chosen.chosen,
                tie_broken: chosen.tie_broken,
            },
            Stage::Collapse {
                tick: 3,
                outcome: sample.outcome,
                born_prob: sample.born_prob,
            },
        ],
        outcome: sample.outcome,
        label: alts.labels[sample.outcome].clone(),
    })
}

/// Deterministic argmax over every alternative, priorities ignored; ties go
/// to the lowest index.
pub fn nr_act(alts: &AlternativeSet, norm: &NormFunction) -> Result<AgentTrace> {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (j, label) in alts.labels.iter().enumerate() {
        let v = norm.value(label)?;
        if v > best_value + TIE_TOLERANCE {
            best = j;
            best_value = v;
        }
    }
    Ok(AgentTrace {
        agent: AgentKind::Robot,
        stages: vec![Stage::Compute { tick: 1, chosen: best }],
        outcome: best,
        label: alts.labels[best].clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Distinction {
    /// The agents ended up taking the same action.
    pub objectively_identical: bool,
    /// The traces have different stage structure.
    pub structurally_distinct: bool,
}

pub fn distinguish_traces(a: &AgentTrace, b: &AgentTrace) -> Distinction {
    Distinction {
        objectively_identical: a.label == b.label,
        structurally_distinct: a.shape() != b.shape(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AscSummary {
    pub trials: u64,
    pub counts: Vec<u64>,
    pub born: ProbabilityDistribution,
    pub deviation: DeviationStatistic,
    pub chi_square: ChiSquareTest,
    pub ties_broken: u64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub traces: Vec<AgentTrace>,
}

/// Repeats [`act_mixed`] with per-trial derived seeds and compares the
/// outcome frequencies with the attention state's Born distribution.
pub fn run_asc(
    alts: &AlternativeSet,
    norm: &NormFunction,
    mixing: f64,
    trials: u64,
    seed: u64,
    keep_traces: bool,
) -> Result<AscSummary> {
    if trials == 0 {
        return Err(Error::BadParameter("trials must be positive".into()));
    }
    let state = attention(alts)?;
    let born = born_distribution(&state, &ProjectiveMeasurement::computational(state.dim()))?;
    let mut counts = vec![0u64; alts.len()];
    let mut ties_broken = 0;
    let mut traces = Vec::new();
    for i in 0..trials {
        let trace = act_mixed(alts, norm, mixing, &mut trial_rng(seed, i))?;
        counts[trace.outcome] += 1;
        if trace
            .stages
            .iter()
            .any(|s| matches!(s, Stage::Selection { tie_broken: true, .. }))
        {
            ties_broken += 1;
        }
        if keep_traces {
            traces.push(trace);
        }
    }
    Ok(AscSummary {
        trials,
        deviation: deviation_statistic(&counts, &born)?,
        chi_square: chi_square_test(&counts, &born)?,
        counts,
        born,
        ties_broken,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::admissible_outcomes;
    use crate::stats::SIGNIFICANCE;

    fn tap(alpha: f64) -> AlternativeSet {
        AlternativeSet::new(vec!["tap", "dont_tap"], vec![alpha * alpha, 1.0 - alpha * alpha]).unwrap()
    }

    #[test]
    fn attention_examples() {
        let s = attention(&tap(0.6)).unwrap();
        assert!((s.amplitude(0).re - 0.6).abs() < 1e-12);
        assert!((s.amplitude(1).re - 0.8).abs() < 1e-12);

        let four = AlternativeSet::new(vec!["a", "b", "c", "d"], vec![2.0; 4]).unwrap();
        for a in attention(&four).unwrap().amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-12);
        }

        let skewed = AlternativeSet::new(vec!["a", "b", "c"], vec![1.0, 0.0, 3.0]).unwrap();
        let s = attention(&skewed).unwrap();
        assert_eq!(admissible_outcomes(&s, &ProjectiveMeasurement::computational(3)).unwrap(), vec![0, 2]);
    }

    #[test]
    fn invalid_alternatives() {
        assert_eq!(AlternativeSet::new(vec!["a", "b"], vec![0.0, 0.0]), Err(Error::AllZeroPriorities));
        assert!(AlternativeSet::new(vec!["a", "a"], vec![1.0, 1.0]).is_err());
        assert!(AlternativeSet::new(vec!["a"], vec![1.0, 1.0]).is_err());
        assert!(AlternativeSet::new(vec!["a", "b"], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn selection_examples() {
        let alts = AlternativeSet::new(vec!["good", "bad"], vec![0.3, 0.7]).unwrap();
        let s = attention(&alts).unwrap();
        let norm = NormFunction::moral("good", "bad");
        let sel = selection(&s, &alts, &norm, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(sel, Selection { chosen: 0, tie_broken: false });

        let single = AlternativeSet::new(vec!["x", "y"], vec![0.0, 1.0]).unwrap();
        let s = attention(&single).unwrap();
        let norm = NormFunction::new([("x", 9.0), ("y", 0.0)]);
        assert_eq!(selection(&s, &single, &norm, &mut trial_rng(0, 0)).unwrap().chosen, 1);

        let partial = NormFunction::new([("good", 1.0)]);
        let s = attention(&alts).unwrap();
        assert_eq!(
            selection(&s, &alts, &partial, &mut trial_rng(0, 0)),
            Err(Error::NormUndefined("bad".into()))
        );
    }

    #[test]
    fn equal_norms_tie_break_uniformly() {
        let alts = AlternativeSet::new(vec!["a", "b", "c", "d"], vec![1.0; 4]).unwrap();
        let norm = NormFunction::constant(&alts, 0.0);
        let s = attention(&alts).unwrap();
        let mut counts = [0u64; 4];
        for i in 0..10_000 {
            let sel = selection(&s, &alts, &norm, &mut trial_rng(9, i)).unwrap();
            assert!(sel.tie_broken);
            counts[sel.chosen] += 1;
        }
        let test = chi_square_test(&counts, &ProbabilityDistribution::uniform(4)).unwrap();
        assert!(test.passes(SIGNIFICANCE), "{test:?}");
    }

    #[test]
    fn conscious_agent_overrides_priorities() {
        for alpha in [0.1, 0.5, 0.9, 0.999] {
            let alts = tap(alpha);
            let norm = NormFunction::new([("tap", 0.0), ("dont_tap", 1.0)]);
            let trace = act(&alts, &norm, &mut trial_rng(2, 0)).unwrap();
            assert_eq!(trace.label, "dont_tap");
        }
    }

    #[test]
    fn inadmissible_favourite_is_skipped() {
        let theta = 0.4f64;
        let alts = AlternativeSet::new(vec!["0", "1", "2"], vec![theta.cos().powi(2), theta.sin().powi(2), 0.0]).unwrap();
        let norm = NormFunction::new([("0", 0.2), ("1", 0.5), ("2", 1.0)]);
        let trace = act(&alts, &norm, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(trace.outcome, 1);
        let robot = nr_act(&alts, &norm).unwrap();
        assert_eq!(robot.outcome, 2);
        assert!(!distinguish_traces(&trace, &robot).objectively_identical);
    }

    #[test]
    fn deviation_from_born() {
        let alts = AlternativeSet::new(vec!["0", "1", "2"], vec![0.75, 0.25, 0.0]).unwrap();
        let norm = NormFunction::new([("0", 0.0), ("1", 1.0), ("2", 0.0)]);
        let summary = run_asc(&alts, &norm, 1.0, 10_000, 4, false).unwrap();
        assert_eq!(summary.counts, vec![0, 10_000, 0]);
        assert!((summary.born.probs()[1] - 0.25).abs() < 1e-12);
        assert!((summary.deviation.tv - 0.75).abs() < 1e-12);
    }

    #[test]
    fn robot_examples() {
        let alts = AlternativeSet::new(vec!["bad", "good"], vec![0.5, 0.5]).unwrap();
        let norm = NormFunction::moral("good", "bad");
        let robot = nr_act(&alts, &norm).unwrap();
        assert_eq!(robot.label, "good");
        assert_eq!(robot.shape(), vec!["compute"]);

        let flat = NormFunction::constant(&alts, 1.0);
        assert_eq!(nr_act(&alts, &flat).unwrap().outcome, 0);

        let cgp = act(&alts, &norm, &mut trial_rng(0, 0)).unwrap();
        let d = distinguish_traces(&cgp, &robot);
        assert!(d.objectively_identical && d.structurally_distinct);

        let again = act(&alts, &norm, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(
            distinguish_traces(&cgp, &again),
            Distinction { objectively_identical: true, structurally_distinct: false }
        );
    }

    #[test]
    fn trace_ticks_are_ordered() {
        let alts = tap(0.6);
        let trace = act(&alts, &NormFunction::moral("tap", "dont_tap"), &mut trial_rng(0, 0)).unwrap();
        assert_eq!(trace.shape(), vec!["attention", "selection", "collapse"]);
        let ticks: Vec<u32> = trace.stages.iter().map(Stage::tick).collect();
        assert!(ticks.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mixing_zero_is_born() {
        let alts = AlternativeSet::new(vec!["a", "b", "c"], vec![0.5, 0.3, 0.2]).unwrap();
        let norm = NormFunction::new([("a", 0.0), ("b", 0.0), ("c", 1.0)]);
        let summary = run_asc(&alts, &norm, 0.0, 10_000, 8, false).unwrap();
        assert!(summary.chi_square.passes(SIGNIFICANCE), "{:?}", summary.chi_square);
        assert!(run_asc(&alts, &norm, 1.5, 10, 0, false).is_err());
    }
}
