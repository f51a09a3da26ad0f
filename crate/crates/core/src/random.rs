//! Random instances for property tests and the randomized harnesses.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::quantum::{ProjectiveMeasurement, StateVector, C64};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Haar-random pure state.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    loop {
        let amps: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
        if let Ok(s) = StateVector::new(&amps) {
            return s;
        }
    }
}

/// Random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    g.qr().q()
}

/// Random orthonormal basis, as a rank-1 projective measurement.
pub fn random_basis<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ProjectiveMeasurement {
    let u = random_unitary(dim, rng);
    let basis: Vec<StateVector> = (0..dim)
        .map(|c| StateVector::new(u.column(c).as_slice()).expect("unitary column"))
        .collect();
    ProjectiveMeasurement::from_basis(&basis).expect("columns of a unitary are orthonormal")
}

/// Random projective measurement with `outcomes` blocks of (possibly unequal)
/// rank, built by grouping columns of a random unitary.
pub fn random_measurement<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> ProjectiveMeasurement {
    assert!(outcomes >= 1 && outcomes <= dim);
    let u = random_unitary(dim, rng);
    // every block gets one column, the rest are scattered
    let mut owner: Vec<usize> = (0..dim).map(|c| if c < outcomes { c } else { rng.random_range(0..outcomes) }).collect();
    owner.rotate_left(rng.random_range(0..dim));
    let projectors = (0..outcomes)
        .map(|j| {
            let mut p = DMatrix::<C64>::zeros(dim, dim);
            for (c, _) in owner.iter().enumerate().filter(|(_, o)| **o == j) {
                let col = u.column(c);
                p += col * col.adjoint();
            }
            p
        })
        .collect();
    ProjectiveMeasurement::from_projectors(projectors).expect("blocks of a unitary")
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    (&g + g.adjoint()).scale(0.5)
}
