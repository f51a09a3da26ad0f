//! Mean-energy bookkeeping across a non-selective measurement.
//!
//! A measurement in the energy eigenbasis with Born weights leaves `Tr(Hρ)`
//! unchanged. Re-weighting the branches shifts the mean energy, even though
//! each branch by itself is a legitimate post-measurement state.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{
    check_dim, max_abs, nonselective_update, re, DensityOperator, ProbabilityDistribution,
    ProjectiveMeasurement, C64, TOLERANCE,
};

/// Commutator norm below which a measurement counts as non-demolition.
pub const COMMUTATION_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    matrix: DMatrix<C64>,
}

impl Hamiltonian {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::BadParameter("Hamiltonian must be square".into()));
        }
        if max_abs(&(&matrix - matrix.adjoint())) > TOLERANCE {
            return Err(Error::BadParameter("Hamiltonian is not Hermitian".into()));
        }
        Ok(Self { matrix })
    }

    pub fn diagonal(energies: &[f64]) -> Self {
        let d = nalgebra::DVector::from_iterator(energies.len(), energies.iter().map(|&e| re(e)));
        Self {
            matrix: DMatrix::from_diagonal(&d),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyAudit {
    pub e_before: f64,
    pub e_after: f64,
    pub delta: f64,
    pub commutes: bool,
    pub weights_were_born: bool,
}

/// `Tr(Hρ)`.
pub fn energy_expectation(rho: &DensityOperator, h: &Hamiltonian) -> Result<f64> {
    check_dim(h.dim(), rho.dim())?;
    Ok((h.matrix() * rho.matrix()).trace().re)
}

/// Whether `Σ_j m_j M_j` commutes with `H` (max-entry norm of the
/// commutator below [`COMMUTATION_TOLERANCE`]).
pub fn commutation_check(m: &ProjectiveMeasurement, eigenvalues: &[f64], h: &Hamiltonian) -> Result<bool> {
    check_dim(h.dim(), m.dim())?;
    if eigenvalues.len() != m.outcomes() {
        return Err(Error::LengthMismatch {
            left: eigenvalues.len(),
            right: m.outcomes(),
        });
    }
    let observable = eigenvalues
        .iter()
        .enumerate()
        .fold(DMatrix::zeros(m.dim(), m.dim()), |acc, (j, &mj)| {
            acc + m.projector(j).scale(mj)
        });
    let commutator = &observable * h.matrix() - h.matrix() * &observable;
    Ok(max_abs(&commutator) < COMMUTATION_TOLERANCE)
}

/// Mean energy before and after a non-selective update with the given
/// branch weights (Born weights when `None`).
pub fn audit_measurement(
    rho: &DensityOperator,
    m: &ProjectiveMeasurement,
    eigenvalues: &[f64],
    h: &Hamiltonian,
    weights: Option<&ProbabilityDistribution>,
) -> Result<EnergyAudit> {
    let commutes = commutation_check(m, eigenvalues, h)?;
    let e_before = energy_expectation(rho, h)?;
    let after = nonselective_update(rho, m, weights)?;
    let e_after = energy_expectation(&after, h)?;
    Ok(EnergyAudit {
        e_before,
        e_after,
        delta: e_after - e_before,
        commutes,
        weights_were_born: weights.is_none(),
    })
}

/// Eigen-decomposition of `H` as a projective measurement, one rank-1
/// projector per eigenvector, with the matching energies.
pub fn energy_basis(h: &Hamiltonian) -> Result<(ProjectiveMeasurement, Vec<f64>)> {
    let eig = h.matrix().clone().symmetric_eigen();
    let n = h.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let projectors = order
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            v * v.adjoint()
        })
        .collect();
    let m = ProjectiveMeasurement::from_projectors(projectors)?;
    Ok((m, order.iter().map(|&k| eig.eigenvalues[k]).collect()))
}
