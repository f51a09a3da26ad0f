//! Exact finite-dimensional state vectors, density operators and projective
//! measurements.
//!
//! Everything is dense and exact up to `f64` rounding. Bipartite systems use
//! row-major indexing: the amplitude of `|j⟩_A |k⟩_B` sits at `j * d_B + k`.
//!
//! A [`ProjectiveMeasurement`] is stored structurally rather than as a list of
//! dense projectors whenever possible, so that measuring a single register of
//! an 8192-dimensional state never materializes an 8192 × 8192 matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

/// Complex amplitude type used throughout the crate.
pub type C64 = Complex<f64>;

/// Born probabilities at or below this value are treated as exactly zero.
pub const FORBIDDEN_THRESHOLD: f64 = 1e-12;

/// Tolerance for structural invariants (normalization, hermiticity, ...).
pub const TOLERANCE: f64 = 1e-10;

/// Largest Hilbert-space dimension the harnesses are sized for.
pub const MAX_DIM: usize = 1 << 13;

const ZERO_AMPLITUDE: f64 = 1e-12;

/// Shorthand for a purely real amplitude.
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// One side of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    /// Normalizes `amplitudes` by their Euclidean norm.
    pub fn new(amplitudes: &[C64]) -> Result<Self> {
        Self::from_vector(DVector::from_column_slice(amplitudes))
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::from_vector(DVector::from_iterator(
            amplitudes.len(),
            amplitudes.iter().map(|&x| re(x)),
        ))
    }

    pub(crate) fn from_vector(amps: DVector<C64>) -> Result<Self> {
        if amps.is_empty() || amps.iter().all(|a| a.norm() < ZERO_AMPLITUDE) {
            return Err(Error::ZeroVector);
        }
        let norm = amps.norm();
        Ok(Self { amps: amps.unscale(norm) })
    }

    /// The computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} out of range for dim {dim}");
        let mut amps = DVector::zeros(dim);
        amps[index] = re(1.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amps.dotc(&other.amps))
    }

    /// Equality up to global phase: `|⟨a|b⟩| = 1` within `tol`.
    pub fn same_ray(&self, other: &StateVector, tol: f64) -> bool {
        match self.inner(other) {
            Ok(ip) => (ip.norm() - 1.0).abs() <= tol,
            Err(_) => false,
        }
    }

    pub fn tensor(&self, other: &StateVector) -> StateVector {
        tensor(self, other)
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            matrix: &self.amps * self.amps.adjoint(),
        }
    }

    /// Amplitudes reshaped into a `d_A × d_B` coefficient matrix.
    pub fn coefficient_matrix(&self, dims: (usize, usize)) -> Result<DMatrix<C64>> {
        check_dim(dims.0 * dims.1, self.dim())?;
        Ok(DMatrix::from_row_slice(dims.0, dims.1, self.amps.as_slice()))
    }
}

/// Builds a normalized state from raw amplitudes.
pub fn make_state(amplitudes: &[C64]) -> Result<StateVector> {
    StateVector::new(amplitudes)
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &StateVector, b: &StateVector) -> StateVector {
    StateVector {
        amps: a.amps.kronecker(&b.amps),
    }
}

/// A probability vector summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityDistribution {
    probs: Vec<f64>,
}

impl ProbabilityDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is not a non-negative number"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn point_mass(len: usize, at: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Outcomes carrying more than [`FORBIDDEN_THRESHOLD`] mass.
    pub fn support(&self) -> Vec<usize> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > FORBIDDEN_THRESHOLD)
            .map(|(j, _)| j)
            .collect()
    }

    /// Half the L1 distance.
    pub fn total_variation(&self, other: &ProbabilityDistribution) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// A unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates hermiticity, unit trace and positivity (eigenvalues ≥ −1e-10).
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensity("matrix must be square".into()));
        }
        let herm_err = max_abs(&(&matrix - matrix.adjoint()));
        if herm_err > TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (deviation {herm_err:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TOLERANCE || tr.im.abs() > TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace is {tr}")));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -TOLERANCE {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { matrix })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Entrywise max-norm distance.
    pub fn distance(&self, other: &DensityOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        max_abs(&(&self.matrix - &other.matrix))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    /// Explicit, validated projector matrices.
    Projectors(Vec<DMatrix<C64>>),
    /// Rank-1 projectors onto the computational basis.
    Computational,
    /// An inner measurement acting on one factor of `d_A ⊗ d_B`.
    Local {
        dims: (usize, usize),
        side: Subsystem,
        inner: Box<ProjectiveMeasurement>,
    },
}

/// An ordered, complete set of orthogonal projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMeasurement {
    dim: usize,
    outcomes: usize,
    layout: Layout,
}

impl ProjectiveMeasurement {
    /// Validates each projector (Hermitian, idempotent), mutual orthogonality
    /// and completeness, all within [`TOLERANCE`].
    pub fn from_projectors(projectors: Vec<DMatrix<C64>>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("no projectors".into()))?;
        let dim = first.nrows();
        let mut sum = DMatrix::<C64>::zeros(dim, dim);
        for (j, p) in projectors.iter().enumerate() {
            if p.nrows() != dim || p.ncols() != dim {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {j} is not {dim}×{dim}"
                )));
            }
            if max_abs(&(p - p.adjoint())) > TOLERANCE {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {j} is not Hermitian"
                )));
            }
            if max_abs(&(p * p - p)) > TOLERANCE {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {j} is not idempotent"
                )));
            }
            for (k, q) in projectors.iter().enumerate().skip(j + 1) {
                if q.nrows() == dim && q.ncols() == dim && max_abs(&(p * q)) > TOLERANCE {
                    return Err(Error::InvalidMeasurement(format!(
                        "projectors {j} and {k} are not orthogonal"
                    )));
                }
            }
            sum += p;
        }
        if max_abs(&(sum - DMatrix::identity(dim, dim))) > TOLERANCE {
            return Err(Error::InvalidMeasurement(
                "projectors do not sum to the identity".into(),
            ));
        }
        Ok(Self {
            dim,
            outcomes: projectors.len(),
            layout: Layout::Projectors(projectors),
        })
    }

    /// Rank-1 projectors onto an orthonormal basis, in the given order.
    pub fn from_basis(basis: &[StateVector]) -> Result<Self> {
        let projectors = basis.iter().map(|v| v.density().matrix).collect();
        let m = Self::from_projectors(projectors)?;
        if m.outcomes != m.dim {
            return Err(Error::InvalidMeasurement(format!(
                "{} vectors do not form a basis of dimension {}",
                m.outcomes, m.dim
            )));
        }
        Ok(m)
    }

    /// The two-outcome measurement `{|v⟩⟨v|, 𝕀 − |v⟩⟨v|}`; outcome 0 is detection.
    pub fn binary(v: &StateVector) -> Self {
        let p = v.density().matrix;
        let q = DMatrix::identity(v.dim(), v.dim()) - &p;
        Self {
            dim: v.dim(),
            outcomes: 2,
            layout: Layout::Projectors(vec![p, q]),
        }
    }

    pub fn computational(dim: usize) -> Self {
        Self {
            dim,
            outcomes: dim,
            layout: Layout::Computational,
        }
    }

    /// `inner ⊗ 𝕀` (side A) or `𝕀 ⊗ inner` (side B) on a `d_A ⊗ d_B` space.
    pub fn local(inner: ProjectiveMeasurement, dims: (usize, usize), side: Subsystem) -> Result<Self> {
        let expected = match side {
            Subsystem::A => dims.0,
            Subsystem::B => dims.1,
        };
        check_dim(expected, inner.dim)?;
        Ok(Self {
            dim: dims.0 * dims.1,
            outcomes: inner.outcomes,
            layout: Layout::Local {
                dims,
                side,
                inner: Box::new(inner),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// Dense matrix of projector `j`. Allocates `dim²` entries.
    pub fn projector(&self, j: usize) -> DMatrix<C64> {
        self.apply_columns(j, &DMatrix::identity(self.dim, self.dim))
    }

    /// `M_j |v⟩`.
    pub fn apply(&self, j: usize, v: &DVector<C64>) -> DVector<C64> {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let out = self.apply_columns(j, &m);
        DVector::from_column_slice(out.as_slice())
    }

    /// `M_j X`, applied column by column.
    pub fn apply_columns(&self, j: usize, x: &DMatrix<C64>) -> DMatrix<C64> {
        assert!(j < self.outcomes, "outcome {j} out of range");
        assert_eq!(x.nrows(), self.dim, "operand has wrong dimension");
        match &self.layout {
            Layout::Projectors(ps) => &ps[j] * x,
            Layout::Computational => {
                let mut out = DMatrix::zeros(x.nrows(), x.ncols());
                out.set_row(j, &x.row(j));
                out
            }
            Layout::Local { dims, side, inner } => {
                let (da, db) = *dims;
                let mut out = DMatrix::zeros(x.nrows(), x.ncols());
                for c in 0..x.ncols() {
                    let coeffs = DMatrix::from_row_slice(da, db, x.column(c).as_slice());
                    let projected = match side {
                        Subsystem::A => inner.apply_columns(j, &coeffs),
                        Subsystem::B => inner.apply_columns(j, &coeffs.transpose()).transpose(),
                    };
                    // back to row-major order
                    let flat = projected.transpose();
                    out.column_mut(c).copy_from_slice(flat.as_slice());
                }
                out
            }
        }
    }
}

/// `probs[j] = ⟨s|M_j|s⟩`, clipped to `[0, 1]`.
pub fn born_distribution(s: &StateVector, m: &ProjectiveMeasurement) -> Result<ProbabilityDistribution> {
    check_dim(m.dim(), s.dim())?;
    let probs = (0..m.outcomes())
        .map(|j| m.apply(j, &s.amps).norm_squared().clamp(0.0, 1.0))
        .collect();
    Ok(ProbabilityDistribution { probs })
}

/// Selective update: `M_outcome|s⟩` renormalized.
///
/// Fails with [`Error::ForbiddenOutcome`] when the outcome has zero Born
/// probability. No collapse rule may produce such an outcome.
pub fn collapse(s: &StateVector, m: &ProjectiveMeasurement, outcome: usize) -> Result<StateVector> {
    check_dim(m.dim(), s.dim())?;
    check_outcome(outcome, m.outcomes())?;
    let projected = m.apply(outcome, &s.amps);
    let p = projected.norm_squared();
    if p <= FORBIDDEN_THRESHOLD {
        return Err(Error::ForbiddenOutcome {
            outcome,
            born_prob: p,
        });
    }
    Ok(StateVector {
        amps: projected.unscale(p.sqrt()),
    })
}

/// Non-selective update `ρ' = Σ_j w_j M_j ρ M_j / Tr(M_j ρ M_j)`.
///
/// With `weights = None` the Born weights are used, which reduces to the
/// ordinary `Σ_j M_j ρ M_j`. Explicit weights may only place mass on outcomes
/// with non-zero Born probability.
pub fn nonselective_update(
    rho: &DensityOperator,
    m: &ProjectiveMeasurement,
    weights: Option<&ProbabilityDistribution>,
) -> Result<DensityOperator> {
    check_dim(m.dim(), rho.dim())?;
    let branches: Vec<DMatrix<C64>> = (0..m.outcomes())
        .map(|j| {
            let left = m.apply_columns(j, &rho.matrix);
            m.apply_columns(j, &left.adjoint())
        })
        .collect();
    let dim = rho.dim();
    let matrix = match weights {
        None => branches
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, b| acc + b),
        Some(w) => {
            if w.len() != m.outcomes() {
                return Err(Error::LengthMismatch {
                    left: w.len(),
                    right: m.outcomes(),
                });
            }
            let mut acc = DMatrix::zeros(dim, dim);
            for (j, (branch, &wj)) in branches.iter().zip(w.probs()).enumerate() {
                let born = branch.trace().re;
                if born <= FORBIDDEN_THRESHOLD {
                    if wj > FORBIDDEN_THRESHOLD {
                        return Err(Error::ForbiddenOutcome {
                            outcome: j,
                            born_prob: born.max(0.0),
                        });
                    }
                    continue;
                }
                acc += branch.scale(wj / born);
            }
            acc
        }
    };
    // Symmetrize away rounding before validation.
    let matrix = (&matrix + matrix.adjoint()).scale(0.5);
    DensityOperator::new(matrix)
}

/// Partial trace keeping subsystem `keep` of a `d_A ⊗ d_B` pure state.
pub fn reduced_state(s: &StateVector, dims: (usize, usize), keep: Subsystem) -> Result<DensityOperator> {
    let c = s.coefficient_matrix(dims)?;
    let matrix = match keep {
        Subsystem::A => &c * c.adjoint(),
        Subsystem::B => c.transpose() * c.conjugate(),
    };
    Ok(DensityOperator { matrix })
}

/// Schmidt coefficients of a bipartite pure state, in decreasing order.
pub fn schmidt_coefficients(s: &StateVector, dims: (usize, usize)) -> Result<Vec<f64>> {
    let c = s.coefficient_matrix(dims)?;
    let mut sv: Vec<f64> = c.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_outcome(outcome: usize, outcomes: usize) -> Result<()> {
    if outcome < outcomes {
        Ok(())
    } else {
        Err(Error::OutcomeOutOfRange { outcome, outcomes })
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn plus() -> StateVector {
        StateVector::from_real(&[1.0, 1.0]).unwrap()
    }

    fn bell() -> StateVector {
        StateVector::from_real(&[1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn qutrit(theta: f64) -> StateVector {
        StateVector::from_real(&[theta.cos(), theta.sin(), 0.0]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn make_state_normalizes() {
        let s = make_state(&[re(1.0), re(0.0), re(0.0)]).unwrap();
        assert_eq!(s.amplitudes(), &[re(1.0), re(0.0), re(0.0)]);

        let s = make_state(&[re(1.0), re(1.0)]).unwrap();
        assert!(close(s.amplitude(0).re, FRAC_1_SQRT_2));
        assert!(close(s.amplitude(1).re, FRAC_1_SQRT_2));

        let s = qutrit(PI / 6.0);
        assert!(close(s.amplitude(0).re, 3f64.sqrt() / 2.0));
        assert!(close(s.amplitude(1).re, 0.5));
        assert_eq!(s.amplitude(2), re(0.0));
    }

    #[test]
    fn make_state_rejects_zero_vector() {
        assert_eq!(make_state(&[re(0.0), re(1e-13)]), Err(Error::ZeroVector));
        assert_eq!(make_state(&[]), Err(Error::ZeroVector));
    }

    #[test]
    fn tensor_products() {
        let s = tensor(&StateVector::basis(2, 0), &StateVector::basis(2, 1));
        assert_eq!(s, StateVector::basis(4, 1));

        let s = tensor(&plus(), &StateVector::basis(2, 0));
        let expected = StateVector::from_real(&[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(s.same_ray(&expected, 1e-12));
        assert!(close(s.norm_sqr(), 1.0));
    }

    #[test]
    fn born_examples() {
        let z3 = ProjectiveMeasurement::computational(3);
        let p = born_distribution(&qutrit(PI / 6.0), &z3).unwrap();
        assert!(close(p.probs()[0], 0.75));
        assert!(close(p.probs()[1], 0.25));
        assert_eq!(p.probs()[2], 0.0);

        let p = born_distribution(&StateVector::basis(4, 0), &ProjectiveMeasurement::computational(4)).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0, 0.0, 0.0]);

        let p = born_distribution(&plus(), &ProjectiveMeasurement::computational(2)).unwrap();
        assert!(close(p.probs()[0], 0.5) && close(p.probs()[1], 0.5));
    }

    #[test]
    fn born_dimension_mismatch() {
        let err = born_distribution(&plus(), &ProjectiveMeasurement::computational(3));
        assert_eq!(err, Err(Error::DimensionMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn collapse_examples() {
        let alice_z = ProjectiveMeasurement::local(
            ProjectiveMeasurement::computational(2),
            (2, 2),
            Subsystem::A,
        )
        .unwrap();
        let post = collapse(&bell(), &alice_z, 0).unwrap();
        assert!(post.same_ray(&StateVector::basis(4, 0), 1e-12));

        let z3 = ProjectiveMeasurement::computational(3);
        let post = collapse(&qutrit(PI / 6.0), &z3, 1).unwrap();
        assert!(post.same_ray(&StateVector::basis(3, 1), 1e-12));

        match collapse(&qutrit(PI / 6.0), &z3, 2) {
            Err(Error::ForbiddenOutcome { outcome: 2, .. }) => {}
            other => panic!("expected ForbiddenOutcome, got {other:?}"),
        }
        assert_eq!(
            collapse(&qutrit(PI / 6.0), &z3, 3),
            Err(Error::OutcomeOutOfRange { outcome: 3, outcomes: 3 })
        );
    }

    #[test]
    fn nonselective_examples() {
        let z = ProjectiveMeasurement::computational(2);
        let rho = plus().density();

        let dephased = nonselective_update(&rho, &z, None).unwrap();
        assert!(dephased.distance(&DensityOperator::maximally_mixed(2)) < 1e-12);

        let w = ProbabilityDistribution::new(vec![1.0, 0.0]).unwrap();
        let forced = nonselective_update(&rho, &z, Some(&w)).unwrap();
        assert!(forced.distance(&StateVector::basis(2, 0).density()) < 1e-12);

        let ground = StateVector::basis(2, 0).density();
        for w in [vec![1.0, 0.0], vec![1.0 - 1e-13, 1e-13]] {
            let w = ProbabilityDistribution::new(w).unwrap();
            let out = nonselective_update(&ground, &z, Some(&w)).unwrap();
            assert!(out.distance(&ground) < 1e-12);
        }
        let w = ProbabilityDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            nonselective_update(&ground, &z, Some(&w)),
            Err(Error::ForbiddenOutcome { outcome: 1, .. })
        ));
    }

    #[test]
    fn reduced_state_examples() {
        let rho = reduced_state(&bell(), (2, 2), Subsystem::A).unwrap();
        assert!(rho.distance(&DensityOperator::maximally_mixed(2)) < 1e-12);

        let rho = reduced_state(&StateVector::basis(4, 1), (2, 2), Subsystem::B).unwrap();
        assert!(rho.distance(&StateVector::basis(2, 1).density()) < 1e-12);

        let mut amps = vec![0.0; 16];
        for k in 0..4 {
            amps[k * 4 + k] = 0.5;
        }
        let twin = StateVector::from_real(&amps).unwrap();
        for side in [Subsystem::A, Subsystem::B] {
            let rho = reduced_state(&twin, (4, 4), side).unwrap();
            assert!(rho.distance(&DensityOperator::maximally_mixed(4)) < 1e-12);
        }
        assert!(matches!(
            reduced_state(&bell(), (2, 3), Subsystem::A),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn reduced_state_keeps_the_right_side() {
        // |0⟩_A ⊗ |+⟩_B with unequal dims
        let s = tensor(&StateVector::basis(3, 0), &plus());
        let a = reduced_state(&s, (3, 2), Subsystem::A).unwrap();
        let b = reduced_state(&s, (3, 2), Subsystem::B).unwrap();
        assert!(a.distance(&StateVector::basis(3, 0).density()) < 1e-12);
        assert!(b.distance(&plus().density()) < 1e-12);
    }

    #[test]
    fn local_measurement_matches_dense_kronecker() {
        let x = ProjectiveMeasurement::from_basis(&[
            StateVector::from_real(&[1.0, 1.0]).unwrap(),
            StateVector::from_real(&[1.0, -1.0]).unwrap(),
        ])
        .unwrap();
        let id3 = DMatrix::<C64>::identity(3, 3);
        for side in [Subsystem::A, Subsystem::B] {
            let dims = match side {
                Subsystem::A => (2, 3),
                Subsystem::B => (3, 2),
            };
            let local = ProjectiveMeasurement::local(x.clone(), dims, side).unwrap();
            for j in 0..2 {
                let dense = match side {
                    Subsystem::A => x.projector(j).kronecker(&id3),
                    Subsystem::B => id3.kronecker(&x.projector(j)),
                };
                assert!(max_abs(&(local.projector(j) - dense)) < 1e-14);
            }
        }
    }

    #[test]
    fn invalid_measurements_are_rejected() {
        let p0 = StateVector::basis(2, 0).density().matrix().clone();
        assert!(ProjectiveMeasurement::from_projectors(vec![p0.clone()]).is_err());
        assert!(ProjectiveMeasurement::from_projectors(vec![p0.clone(), p0.clone()]).is_err());
        let half = p0.scale(0.5);
        assert!(ProjectiveMeasurement::from_projectors(vec![half.clone(), half]).is_err());
        assert!(ProjectiveMeasurement::from_basis(&[plus(), StateVector::basis(2, 0)]).is_err());
        assert!(ProjectiveMeasurement::local(
            ProjectiveMeasurement::computational(2),
            (3, 3),
            Subsystem::A
        )
        .is_err());
    }

    #[test]
    fn density_validation() {
        let bad_trace = DMatrix::<C64>::identity(2, 2);
        assert!(DensityOperator::new(bad_trace).is_err());
        let mut not_psd = DMatrix::<C64>::zeros(2, 2);
        not_psd[(0, 0)] = re(1.5);
        not_psd[(1, 1)] = re(-0.5);
        assert!(DensityOperator::new(not_psd).is_err());
        let mut non_herm = DensityOperator::maximally_mixed(2).matrix().clone();
        non_herm[(0, 1)] = re(0.1);
        assert!(DensityOperator::new(non_herm).is_err());
    }

    #[test]
    fn distribution_validation() {
        assert!(ProbabilityDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(ProbabilityDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(ProbabilityDistribution::new(vec![]).is_err());
        let d = ProbabilityDistribution::normalized(&[3.0, 1.0]).unwrap();
        assert_eq!(d.probs(), &[0.75, 0.25]);
        assert_eq!(d.support(), vec![0, 1]);
    }
}
