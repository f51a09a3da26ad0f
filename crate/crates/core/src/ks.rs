//! The 18-ray, 9-context Kochen-Specker set in dimension four, its
//! non-colorability proofs, the maximally entangled twin state, and the
//! two-party trial protocol built on them.
//!
//! Rays are integer vectors in canonical form, so every orthogonality and
//! identity check here is exact. Floating point only enters when a ray is
//! turned into a quantum state.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::policy::{draw, sample_outcome, CollapsePolicy, OutcomeSample};
use crate::quantum::{
    born_distribution, collapse, ProjectiveMeasurement, StateVector, Subsystem, C64,
};
use crate::rng::trial_rng;

/// Number of rays in a context (the Hilbert-space dimension).
pub const CONTEXT_SIZE: usize = 4;

/// A direction in ℝ⁴ with integer components, stored in canonical form:
/// components are coprime and the first non-zero component is positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ray([i64; CONTEXT_SIZE]);

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Ray {
    pub fn new(components: [i64; CONTEXT_SIZE]) -> Result<Self> {
        let g = components.iter().fold(0, |g, &c| gcd(g, c));
        if g == 0 {
            return Err(Error::InvalidTable("zero ray".into()));
        }
        let lead = components.iter().find(|c| **c != 0).copied().unwrap_or(1);
        let sign = lead.signum();
        Ok(Ray(components.map(|c| sign * c / g)))
    }

    pub fn components(&self) -> [i64; CONTEXT_SIZE] {
        self.0
    }

    pub fn dot(&self, other: &Ray) -> i64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    /// The normalized state vector along this ray.
    pub fn state(&self) -> StateVector {
        StateVector::from_real(&self.0.map(|c| c as f64)).expect("canonical rays are non-zero")
    }
}

impl fmt::Display for Ray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "({a},{b},{c},{d})")
    }
}

/// A measurement context: four rays that should be mutually orthogonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Context {
    rays: [Ray; CONTEXT_SIZE],
}

impl Context {
    pub fn new(rays: [Ray; CONTEXT_SIZE]) -> Self {
        Self { rays }
    }

    pub fn from_components(rows: [[i64; CONTEXT_SIZE]; CONTEXT_SIZE]) -> Result<Self> {
        let mut rays = [Ray([1, 0, 0, 0]); CONTEXT_SIZE];
        for (slot, row) in rays.iter_mut().zip(rows) {
            *slot = Ray::new(row)?;
        }
        Ok(Self { rays })
    }

    pub fn rays(&self) -> &[Ray; CONTEXT_SIZE] {
        &self.rays
    }

    pub fn position(&self, ray: &Ray) -> Option<usize> {
        self.rays.iter().position(|r| r == ray)
    }

    /// The context as an orthonormal basis of ℂ⁴.
    pub fn basis_states(&self) -> Vec<StateVector> {
        self.rays.iter().map(Ray::state).collect()
    }

    /// Rank-1 projective measurement onto this context's rays, in order.
    pub fn measurement(&self) -> Result<ProjectiveMeasurement> {
        ProjectiveMeasurement::from_basis(&self.basis_states())
            .map_err(|e| Error::InvalidTable(format!("context is not an orthonormal basis: {e}")))
    }
}

/// A family of contexts together with an index of where each ray occurs.
#[derive(Clone, Debug, PartialEq)]
pub struct KsTable {
    contexts: Vec<Context>,
    ray_index: BTreeMap<Ray, Vec<(usize, usize)>>,
}

impl KsTable {
    pub fn new(contexts: Vec<Context>) -> Self {
        let mut ray_index: BTreeMap<Ray, Vec<(usize, usize)>> = BTreeMap::new();
        for (c, ctx) in contexts.iter().enumerate() {
            for (p, ray) in ctx.rays.iter().enumerate() {
                ray_index.entry(*ray).or_default().push((c, p));
            }
        }
        Self { contexts, ray_index }
    }

    pub fn contexts(&self) -> &[Context] {
        &self.contexts
    }

    /// Distinct rays in canonical order.
    pub fn rays(&self) -> Vec<Ray> {
        self.ray_index.keys().copied().collect()
    }

    /// `(context, position)` pairs where `ray` occurs.
    pub fn occurrences(&self, ray: &Ray) -> &[(usize, usize)] {
        self.ray_index.get(ray).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Number of distinct contexts containing `ray`.
    pub fn multiplicity(&self, ray: &Ray) -> usize {
        self.occurrences(ray).len()
    }

    pub fn without_context(&self, index: usize) -> Self {
        let mut contexts = self.contexts.clone();
        contexts.remove(index);
        Self::new(contexts)
    }
}

/// A broken table invariant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotOrthogonal { context: usize, first: String, second: String, dot: i64 },
    RepeatedInContext { context: usize, ray: String },
    Multiplicity { ray: String, count: usize },
    RayCount { found: usize },
    ContextCount { found: usize },
}

impl Violation {
    /// Whether the violation breaks a single context, as opposed to the
    /// global shape of a Kochen-Specker table.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            Violation::NotOrthogonal { .. } | Violation::RepeatedInContext { .. }
        )
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotOrthogonal { context, first, second, dot } => write!(
                f,
                "S{}: rays {first} and {second} are not orthogonal (dot product {dot})",
                context + 1
            ),
            Violation::RepeatedInContext { context, ray } => {
                write!(f, "S{}: ray {ray} appears twice", context + 1)
            }
            Violation::Multiplicity { ray, count } => {
                write!(f, "ray {ray} occurs in {count} contexts, expected 2")
            }
            Violation::RayCount { found } => write!(f, "{found} distinct rays, expected 18"),
            Violation::ContextCount { found } => write!(f, "{found} contexts, expected 9"),
        }
    }
}

/// Every invariant the table breaks; empty for a valid 18-ray, 9-context
/// set in which each context is an orthogonal basis and each ray occurs
/// exactly twice.
pub fn validate_table(t: &KsTable) -> Vec<Violation> {
    let mut out = structural_violations(t);
    if t.contexts.len() != 9 {
        out.push(Violation::ContextCount {
            found: t.contexts.len(),
        });
    }
    if t.ray_index.len() != 18 {
        out.push(Violation::RayCount {
            found: t.ray_index.len(),
        });
    }
    for (ray, occ) in &t.ray_index {
        if occ.len() != 2 {
            out.push(Violation::Multiplicity {
                ray: ray.to_string(),
                count: occ.len(),
            });
        }
    }
    out
}

fn structural_violations(t: &KsTable) -> Vec<Violation> {
    let mut out = Vec::new();
    for (c, ctx) in t.contexts.iter().enumerate() {
        for i in 0..CONTEXT_SIZE {
            for j in i + 1..CONTEXT_SIZE {
                let (a, b) = (ctx.rays[i], ctx.rays[j]);
                if a == b {
                    out.push(Violation::RepeatedInContext {
                        context: c,
                        ray: a.to_string(),
                    });
                } else if a.dot(&b) != 0 {
                    out.push(Violation::NotOrthogonal {
                        context: c,
                        first: a.to_string(),
                        second: b.to_string(),
                        dot: a.dot(&b),
                    });
                }
            }
        }
    }
    out
}

fn require_structurally_valid(t: &KsTable) -> Result<()> {
    match structural_violations(t).first() {
        None => Ok(()),
        Some(v) => Err(Error::InvalidTable(v.to_string())),
    }
}

/// The nine contexts over eighteen rays used in the free-will-theorem
/// argument. Rows are as printed in the source table after restoring the
/// missing commas; negative leading signs are canonicalized by [`Ray::new`].
pub fn builtin_ks_table() -> KsTable {
    const ROWS: [[[i64; 4]; 4]; 9] = [
        [[0, 0, 0, 1], [0, 0, 1, 0], [1, 1, 0, 0], [1, -1, 0, 0]],
        [[0, 0, 0, 1], [0, 1, 0, 0], [1, 0, 1, 0], [1, 0, -1, 0]],
        [[1, -1, 1, -1], [1, -1, -1, 1], [1, 1, 0, 0], [0, 0, 1, 1]],
        [[1, -1, 1, -1], [1, 1, 1, 1], [1, 0, -1, 0], [0, 1, 0, -1]],
        [[0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 1], [1, 0, 0, -1]],
        [[1, -1, -1, 1], [1, 1, 1, 1], [1, 0, 0, -1], [0, 1, -1, 0]],
        [[1, 1, -1, 1], [1, 1, 1, -1], [1, -1, 0, 0], [0, 0, 1, 1]],
        [[1, 1, -1, 1], [-1, 1, 1, 1], [1, 0, 1, 0], [0, 1, 0, -1]],
        [[1, 1, 1, -1], [-1, 1, 1, 1], [1, 0, 0, 1], [0, 1, -1, 0]],
    ];
    KsTable::new(
        ROWS.iter()
            .map(|rows| Context::from_components(*rows).expect("builtin rays are non-zero"))
            .collect(),
    )
}

/// Outcome of the exhaustive non-contextual coloring search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ColoringResult {
    pub colorable: bool,
    pub assignments_found: u64,
    pub search_space_size: u64,
}

/// Enumerates every way of marking exactly one ray per context with the
/// value 1 (`4^contexts` candidates) and counts the candidates in which every
/// ray receives the same value in all contexts containing it.
pub fn ks_coloring_search(t: &KsTable) -> Result<ColoringResult> {
    require_structurally_valid(t)?;
    let m = t.contexts.len();
    let space = (CONTEXT_SIZE as u64)
        .checked_pow(m as u32)
        .ok_or_else(|| Error::InvalidTable(format!("{m} contexts is too many to enumerate")))?;
    let shared: Vec<&[(usize, usize)]> = t
        .ray_index
        .values()
        .filter(|occ| occ.len() > 1)
        .map(Vec::as_slice)
        .collect();

    let mut choice = vec![0usize; m];
    let mut found = 0u64;
    for _ in 0..space {
        let consistent = shared.iter().all(|occ| {
            let (c0, p0) = occ[0];
            let v0 = choice[c0] == p0;
            occ[1..].iter().all(|&(c, p)| (choice[c] == p) == v0)
        });
        if consistent {
            found += 1;
        }
        // odometer increment
        for digit in choice.iter_mut() {
            *digit += 1;
            if *digit < CONTEXT_SIZE {
                break;
            }
            *digit = 0;
        }
    }
    Ok(ColoringResult {
        colorable: found > 0,
        assignments_found: found,
        search_space_size: space,
    })
}

/// Counting proof of non-colorability: with an odd number of contexts the
/// ones summed row by row are odd, while every ray of even multiplicity
/// contributes an even amount. True when both conditions hold.
pub fn parity_certificate(t: &KsTable) -> Result<bool> {
    require_structurally_valid(t)?;
    let odd_contexts = t.contexts.len() % 2 == 1;
    let even_multiplicities = t.ray_index.values().all(|occ| occ.len() % 2 == 0);
    Ok(odd_contexts && even_multiplicities)
}

/// `½ Σ_k |k⟩_A |k⟩_B` on ℂ⁴ ⊗ ℂ⁴.
pub fn twin_state() -> StateVector {
    let mut amps = vec![0.0; 16];
    for k in 0..4 {
        amps[k * 4 + k] = 0.5;
    }
    StateVector::from_real(&amps).expect("non-zero")
}

/// Amplitudes `⟨a_i| ⊗ ⟨b_j| |ψ⟩` of a bipartite state in a product basis.
pub fn coefficients_in_basis(
    s: &StateVector,
    basis_a: &[StateVector],
    basis_b: &[StateVector],
) -> Result<Vec<Vec<C64>>> {
    basis_a
        .iter()
        .map(|a| {
            basis_b
                .iter()
                .map(|b| a.tensor(b).inner(s))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Values the two parties assign to Bob's ray in one trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FwtOutcome {
    /// Alice's outcome index within her context.
    pub alice_outcome: usize,
    /// 1 if Alice's outcome ray is Bob's ray, 0 if Bob's ray is another
    /// member of her context, `None` if it is not in her context.
    pub alice_value: Option<u8>,
    /// 1 on detection of Bob's ray.
    pub bob_value: u8,
    /// Born probability of Bob's detection given Alice's collapse.
    pub bob_detection_prob: f64,
    pub alice_sample: OutcomeSample,
}

impl FwtOutcome {
    /// `Some(true)` when both assigned the same value to an in-context ray.
    pub fn agreement(&self) -> Option<bool> {
        self.alice_value.map(|v| v == self.bob_value)
    }
}

/// Precomputed measurements for repeated trials on one table.
#[derive(Clone, Debug)]
pub struct FwtSetup {
    table: KsTable,
    rays: Vec<Ray>,
    shared: StateVector,
    alice: Vec<ProjectiveMeasurement>,
    bob: Vec<ProjectiveMeasurement>,
}

impl FwtSetup {
    pub fn new(table: KsTable) -> Result<Self> {
        require_structurally_valid(&table)?;
        let alice = table
            .contexts
            .iter()
            .map(|ctx| ProjectiveMeasurement::local(ctx.measurement()?, (4, 4), Subsystem::A))
            .collect::<Result<Vec<_>>>()?;
        let rays = table.rays();
        let bob = rays
            .iter()
            .map(|r| ProjectiveMeasurement::local(ProjectiveMeasurement::binary(&r.state()), (4, 4), Subsystem::B))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table,
            rays,
            shared: twin_state(),
            alice,
            bob,
        })
    }

    pub fn table(&self) -> &KsTable {
        &self.table
    }

    /// Distinct rays, indexed as Bob chooses them.
    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// One trial: Alice measures context `context` (0-based) on her half of
    /// the twin state under `policy`; Bob measures the binary observable for
    /// `bob_ray` with the Born rule on the collapsed state.
    pub fn trial<R: Rng + ?Sized>(
        &self,
        context: usize,
        bob_ray: &Ray,
        policy: &mut CollapsePolicy,
        rng: &mut R,
    ) -> Result<FwtOutcome> {
        let ctx = self.table.contexts.get(context).ok_or_else(|| {
            Error::BadParameter(format!(
                "context {} out of range 1..={}",
                context + 1,
                self.table.contexts.len()
            ))
        })?;
        let ray_idx = self
            .rays
            .binary_search(bob_ray)
            .map_err(|_| Error::BadParameter(format!("ray {bob_ray} is not in the table")))?;

        let alice_m = &self.alice[context];
        let alice_sample = sample_outcome(policy, &self.shared, alice_m, rng)?;
        let post = collapse(&self.shared, alice_m, alice_sample.outcome)?;

        let bob_dist = born_distribution(&post, &self.bob[ray_idx])?;
        let bob_value = if draw(&bob_dist, rng) == 0 { 1 } else { 0 };

        let alice_value = ctx
            .position(bob_ray)
            .map(|p| u8::from(p == alice_sample.outcome));
        Ok(FwtOutcome {
            alice_outcome: alice_sample.outcome,
            alice_value,
            bob_value,
            bob_detection_prob: bob_dist.probs()[0],
            alice_sample,
        })
    }
}

/// Single trial without a reusable [`FwtSetup`].
pub fn fwt_trial<R: Rng + ?Sized>(
    table: &KsTable,
    context: usize,
    bob_ray: &Ray,
    policy: &mut CollapsePolicy,
    rng: &mut R,
) -> Result<FwtOutcome> {
    FwtSetup::new(table.clone())?.trial(context, bob_ray, policy, rng)
}

/// Which rays Bob picks from in a batch of trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BobChoice {
    /// Uniform over the rays of Alice's context.
    InContext,
    /// Uniform over every ray in the table.
    AnyRay,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FwtTrialRecord {
    pub trial: u64,
    pub context: usize,
    pub bob_ray: String,
    pub alice_outcome: usize,
    pub alice_value: Option<u8>,
    pub bob_value: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FwtSummary {
    pub trials: u64,
    pub in_context_trials: u64,
    pub agreements: u64,
    pub bob_detections: u64,
    pub records: Vec<FwtTrialRecord>,
}

/// Runs `trials` independent trials, each with a fresh clone of `policy` and
/// its own derived random stream. Alice's context is uniform over the table.
pub fn run_fwt(
    setup: &FwtSetup,
    policy: &CollapsePolicy,
    bob: BobChoice,
    trials: u64,
    seed: u64,
) -> Result<FwtSummary> {
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let context = rng.random_range(0..setup.table.contexts.len());
            let ray = match bob {
                BobChoice::InContext => setup.table.contexts[context].rays[rng.random_range(0..CONTEXT_SIZE)],
                BobChoice::AnyRay => setup.rays[rng.random_range(0..setup.rays.len())],
            };
            let mut policy = policy.clone();
            let out = setup.trial(context, &ray, &mut policy, &mut rng)?;
            Ok(FwtTrialRecord {
                trial: i,
                context: context + 1,
                bob_ray: ray.to_string(),
                alice_outcome: out.alice_outcome,
                alice_value: out.alice_value,
                bob_value: out.bob_value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let in_context_trials = records.iter().filter(|r| r.alice_value.is_some()).count() as u64;
    let agreements = records
        .iter()
        .filter(|r| r.alice_value == Some(r.bob_value))
        .count() as u64;
    let bob_detections = records.iter().filter(|r| r.bob_value == 1).count() as u64;
    Ok(FwtSummary {
        trials,
        in_context_trials,
        agreements,
        bob_detections,
        records,
    })
}

/// Text form of a table: one context per line, each ray as
/// parenthesized comma-separated integers.
pub fn format_table(t: &KsTable) -> String {
    let mut out = String::new();
    for ctx in &t.contexts {
        let line: Vec<String> = ctx.rays.iter().map(Ray::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the text form written by [`format_table`]. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_table(text: &str) -> Result<KsTable> {
    let mut contexts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Parse(format!("line {}: {msg}", lineno + 1));
        let mut rays = Vec::new();
        let mut rest = line;
        while !rest.is_empty() {
            let body = rest
                .strip_prefix('(')
                .ok_or_else(|| err("expected `(`"))?;
            let close = body.find(')').ok_or_else(|| err("missing `)`"))?;
            let comps = body[..close]
                .split(',')
                .map(|c| c.trim().parse::<i64>().map_err(|_| err("bad integer")))
                .collect::<Result<Vec<_>>>()?;
            let comps: [i64; CONTEXT_SIZE] = comps
                .try_into()
                .map_err(|_| err("a ray needs exactly 4 components"))?;
            rays.push(Ray::new(comps).map_err(|_| err("zero ray"))?);
            rest = body[close + 1..].trim_start();
        }
        let rays: [Ray; CONTEXT_SIZE] = rays
            .try_into()
            .map_err(|_| err("a context needs exactly 4 rays"))?;
        contexts.push(Context::new(rays));
    }
    Ok(KsTable::new(contexts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{reduced_state, schmidt_coefficients, DensityOperator};

    fn ray(c: [i64; 4]) -> Ray {
        Ray::new(c).unwrap()
    }

    fn z_context() -> Context {
        Context::from_components([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]).unwrap()
    }

    #[test]
    fn canonical_rays() {
        assert_eq!(ray([-1, 1, 1, 1]).components(), [1, -1, -1, -1]);
        assert_eq!(ray([0, -2, 2, 0]).components(), [0, 1, -1, 0]);
        assert!(Ray::new([0, 0, 0, 0]).is_err());
    }

    #[test]
    fn builtin_shape() {
        let t = builtin_ks_table();
        assert_eq!(t.contexts().len(), 9);
        assert_eq!(t.rays().len(), 18);
        assert!(validate_table(&t).is_empty(), "{:?}", validate_table(&t));
        // the ray shared by the first two contexts
        let occ = t.occurrences(&ray([0, 0, 0, 1]));
        assert_eq!(occ.iter().map(|o| o.0).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(t.multiplicity(&ray([1, 0, 0, 0])), 0);
    }

    #[test]
    fn validation_reports_orthogonality_break() {
        let mut contexts = builtin_ks_table().contexts().to_vec();
        let mut rays = *contexts[0].rays();
        rays[0] = ray([1, 1, 1, 0]);
        contexts[0] = Context::new(rays);
        let v = validate_table(&KsTable::new(contexts));
        assert!(v
            .iter()
            .any(|v| matches!(v, Violation::NotOrthogonal { context: 0, .. })));
    }

    #[test]
    fn validation_reports_multiplicity() {
        let t = builtin_ks_table().without_context(4);
        let v = validate_table(&t);
        assert!(v.contains(&Violation::ContextCount { found: 8 }));
        assert!(v
            .iter()
            .any(|v| matches!(v, Violation::Multiplicity { count: 1, .. })));
        assert!(v.iter().all(|v| !v.is_structural()));
    }

    #[test]
    fn search_examples() {
        let r = ks_coloring_search(&builtin_ks_table()).unwrap();
        assert_eq!(r, ColoringResult { colorable: false, assignments_found: 0, search_space_size: 262_144 });

        let single = KsTable::new(vec![z_context()]);
        let r = ks_coloring_search(&single).unwrap();
        assert_eq!((r.colorable, r.assignments_found, r.search_space_size), (true, 4, 4));

        let t = builtin_ks_table();
        let pair = KsTable::new(vec![t.contexts()[0].clone(), t.contexts()[1].clone()]);
        assert_eq!(ks_coloring_search(&pair).unwrap().assignments_found, 10);
    }

    #[test]
    fn search_rejects_broken_context() {
        let bad = Context::new([ray([1, 1, 0, 0]), ray([1, 0, 0, 0]), ray([0, 0, 1, 0]), ray([0, 0, 0, 1])]);
        assert!(matches!(ks_coloring_search(&KsTable::new(vec![bad.clone()])), Err(Error::InvalidTable(_))));
        assert!(matches!(parity_certificate(&KsTable::new(vec![bad])), Err(Error::InvalidTable(_))));
    }

    #[test]
    fn parity_examples() {
        let t = builtin_ks_table();
        assert!(parity_certificate(&t).unwrap());
        let shifted = Context::from_components([[1, 1, 0, 0], [1, -1, 0, 0], [0, 0, 1, 1], [0, 0, 1, -1]]).unwrap();
        assert!(!parity_certificate(&KsTable::new(vec![z_context(), shifted])).unwrap());
        for i in 0..9 {
            assert!(!parity_certificate(&t.without_context(i)).unwrap());
        }
    }

    #[test]
    fn twin_state_properties() {
        let s = twin_state();
        for side in [Subsystem::A, Subsystem::B] {
            let rho = reduced_state(&s, (4, 4), side).unwrap();
            assert!(rho.distance(&DensityOperator::maximally_mixed(4)) < 1e-12);
        }
        for c in schmidt_coefficients(&s, (4, 4)).unwrap() {
            assert!((c - 0.5).abs() < 1e-12);
        }
        for ctx in builtin_ks_table().contexts() {
            let b = ctx.basis_states();
            let coeffs = coefficients_in_basis(&s, &b, &b).unwrap();
            for (i, row) in coeffs.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    let expected = if i == j { 0.5 } else { 0.0 };
                    assert!((z - C64::new(expected, 0.0)).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn text_format_round_trip() {
        let t = builtin_ks_table();
        let text = format_table(&t);
        assert!(text.starts_with("(0,0,0,1) (0,0,1,0) (1,1,0,0) (1,-1,0,0)\n"));
        assert_eq!(parse_table(&text).unwrap(), t);
        let commented = format!("# header\n\n{text}");
        assert_eq!(parse_table(&commented).unwrap(), t);
        assert!(parse_table("(1,0,0) (0,1,0,0) (0,0,1,0) (0,0,0,1)").is_err());
        assert!(parse_table("(1,0,0,0) (0,1,0,0) (0,0,1,0)").is_err());
        assert!(parse_table("(1,0,0,0) x (0,1,0,0) (0,0,1,0) (0,0,0,1)").is_err());
    }

    #[test]
    fn in_context_trials_agree() {
        let setup = FwtSetup::new(builtin_ks_table()).unwrap();
        let first = setup.table().contexts()[0].rays()[0];
        let mut rng = trial_rng(11, 0);
        for _ in 0..10_000 {
            let out = setup.trial(0, &first, &mut CollapsePolicy::Born, &mut rng).unwrap();
            assert_eq!(out.agreement(), Some(true));
        }
        for _ in 0..1000 {
            let out = setup.trial(3, &first, &mut CollapsePolicy::Forced(0), &mut rng).unwrap();
            assert_eq!(out.alice_outcome, 0);
        }
    }

    #[test]
    fn out_of_context_detection_matches_overlap() {
        let setup = FwtSetup::new(builtin_ks_table()).unwrap();
        let t = setup.table();
        // Bob's ray (1,1,1,1) is not in S1
        let bob = ray([1, 1, 1, 1]);
        assert!(t.contexts()[0].position(&bob).is_none());
        let n = 40_000;
        let mut counts = [[0u64; 2]; 4];
        let mut rng = trial_rng(5, 0);
        for _ in 0..n {
            let out = setup.trial(0, &bob, &mut CollapsePolicy::Born, &mut rng).unwrap();
            assert_eq!(out.alice_value, None);
            let k = t.contexts()[0].rays()[out.alice_outcome];
            let analytic = (k.dot(&bob) as f64).powi(2)
                / (k.dot(&k) as f64 * bob.dot(&bob) as f64);
            assert!((out.bob_detection_prob - analytic).abs() < 1e-12);
            counts[out.alice_outcome][out.bob_value as usize] += 1;
        }
        for (k_idx, c) in counts.iter().enumerate() {
            let k = t.contexts()[0].rays()[k_idx];
            let p = (k.dot(&bob) as f64).powi(2) / (k.dot(&k) as f64 * bob.dot(&bob) as f64);
            let m = (c[0] + c[1]) as f64;
            let freq = c[1] as f64 / m;
            let sigma = (p * (1.0 - p) / m).sqrt();
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "k={k} freq={freq} p={p}");
        }
    }
}
