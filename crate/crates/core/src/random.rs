//! Random states, unitaries and channels for tests and examples.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channels::KrausChannel;
use crate::operators::{
    CMatrix, CVector, DensityOperator, StateVector, Tolerances, UnitaryOperator,
};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase of `R`'s
/// diagonal divided out).
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryOperator {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    UnitaryOperator::from_raw(q)
}

/// Uniformly random unit vector.
pub fn state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> StateVector {
    let v = CVector::from_fn(dim, |_, _| gaussian(rng));
    StateVector::new(v)
        .expect("finite")
        .normalized()
        .expect("nonzero with probability one")
}

/// Full-rank trace-one density operator `G G^H / tr(G G^H)`.
pub fn density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(dim, dim, rng);
    let p = &g * g.adjoint();
    let tr = p.trace().re;
    DensityOperator::from_raw(p.unscale(tr))
}

/// Channel with `m` Kraus operators cut from a random isometry.
pub fn channel<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> KrausChannel {
    let u = unitary(m * dim, rng);
    let ops = (0..m)
        .map(|p| u.matrix().view((p * dim, 0), (dim, dim)).into_owned())
        .collect();
    KrausChannel::new(ops, format!("random({m})"), &Tolerances::default())
        .expect("isometry blocks are complete")
}
