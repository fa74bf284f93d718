//! Dense complex matrices with the semantic wrappers used throughout the
//! crate: state vectors, density operators, unitaries and phase factors,
//! plus the Hermitian spectral calculus (square roots and inverse square
//! roots of positive operators) that the transport code is built on.

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Numerical thresholds shared by every check in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max entry of `A - A^H` accepted as Hermitian.
    pub hermitian: f64,
    /// Max entry of `U^H U - 1` accepted as unitary.
    pub unitary: f64,
    /// Eigenvalues in `[-psd, 0)` are clamped to zero; below that is an error.
    pub psd: f64,
    /// Reconstruction identities (`B^2 = A`, `V L V^H = A`, ...).
    pub reconstruction: f64,
    /// Smallest eigenvalue accepted as full rank.
    pub rank: f64,
    /// Smallest overlap modulus for which a phase is defined.
    pub zero_overlap: f64,
    /// Max entry of `sum_p E_p^H E_p - 1` for a Kraus set.
    pub completeness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermitian: 1e-10,
            unitary: 1e-10,
            psd: 1e-10,
            reconstruction: 1e-9,
            rank: 1e-12,
            zero_overlap: 1e-12,
            completeness: 1e-10,
        }
    }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    max_abs(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.nrows())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A (possibly unnormalized) pure state `|psi>`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(CVector);

impl StateVector {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("state vector"));
        }
        if amplitudes
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite);
        }
        Ok(StateVector(amplitudes))
    }

    pub fn from_slice(amplitudes: &[Complex64]) -> Result<Self> {
        Self::new(CVector::from_column_slice(amplitudes))
    }

    /// Computational basis vector `|k>` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut v = CVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        StateVector(self.0.map(|z| z * factor))
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<StateVector> {
        let n = self.norm();
        (n > 0.0).then(|| StateVector(self.0.unscale(n)))
    }

    /// `op |self>`.
    pub fn evolve(&self, op: &CMatrix) -> Result<StateVector> {
        check_dim(op.ncols(), self.dim())?;
        Ok(StateVector(op * &self.0))
    }

    /// `|self><self|`.
    pub fn projector(&self) -> CMatrix {
        &self.0 * self.0.adjoint()
    }
}

/// A Hermitian positive semidefinite operator. Trace is not required to be
/// one: trajectory states carry their probability as trace weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity and positivity before wrapping.
    pub fn new(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&matrix)?;
        let defect = hermitian_defect(&matrix);
        if defect > tol.hermitian {
            return Err(Error::NotHermitian { defect });
        }
        let eig = hermitian_eig(&matrix, tol)?;
        let min = eig.eigenvalues[0];
        if min < -tol.psd {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(DensityOperator {
            matrix: hermitian_part(&matrix),
        })
    }

    /// Wraps a matrix known to be PSD by construction (e.g. `E rho E^H`),
    /// only removing the rounding asymmetry.
    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        DensityOperator {
            matrix: hermitian_part(&matrix),
        }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityOperator::from_raw(psi.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            matrix: CMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `rho / tr rho`. Fails on a zero-trace operator.
    pub fn normalized(&self, tol: &Tolerances) -> Result<DensityOperator> {
        let tr = self.trace();
        if tr <= tol.rank {
            return Err(Error::SingularOperator {
                min_eigenvalue: tr,
                position: None,
            });
        }
        Ok(DensityOperator {
            matrix: self.matrix.unscale(tr),
        })
    }

    /// `(1 - eps) rho + eps tr(rho) 1/d`: mixes in the maximally mixed
    /// state at the same trace.
    pub fn regularized(&self, eps: f64) -> DensityOperator {
        let d = self.dim();
        let tr = self.trace();
        let mixed = CMatrix::identity(d, d).scale(eps * tr / d as f64);
        DensityOperator {
            matrix: self.matrix.scale(1.0 - eps) + mixed,
        }
    }

    /// `A rho A^H`.
    pub fn conjugate_by(&self, op: &CMatrix) -> Result<DensityOperator> {
        check_dim(op.ncols(), self.dim())?;
        Ok(DensityOperator::from_raw(op * &self.matrix * op.adjoint()))
    }
}

/// A unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    pub fn new(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&matrix)?;
        let defect = unitarity_defect(&matrix);
        if defect > tol.unitary {
            return Err(Error::NotUnitary { defect });
        }
        Ok(UnitaryOperator { matrix })
    }

    pub(crate) fn from_raw(matrix: CMatrix) -> Self {
        UnitaryOperator { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        UnitaryOperator {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

impl Mul for &UnitaryOperator {
    type Output = UnitaryOperator;

    fn mul(self, rhs: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator {
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// A unit-modulus complex number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFactor(Complex64);

impl PhaseFactor {
    pub const ONE: PhaseFactor = PhaseFactor(Complex64::new(1.0, 0.0));

    pub fn from_angle(angle: f64) -> Self {
        PhaseFactor(Complex64::from_polar(1.0, angle))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    /// Angle in `(-pi, pi]`.
    pub fn arg(&self) -> f64 {
        self.0.arg()
    }

    pub fn conj(&self) -> PhaseFactor {
        PhaseFactor(self.0.conj())
    }

    /// Magnitude of the angle separating two phase factors, in `[0, pi]`.
    pub fn angle_to(&self, other: &PhaseFactor) -> f64 {
        (other.0 * self.0.conj()).arg().abs()
    }
}

impl Mul for PhaseFactor {
    type Output = PhaseFactor;

    fn mul(self, rhs: PhaseFactor) -> PhaseFactor {
        // renormalize so long products do not drift off the unit circle
        let z = self.0 * rhs.0;
        PhaseFactor(z / z.norm())
    }
}

impl fmt::Display for PhaseFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+.12}{:+.12}i", self.0.re, self.0.im)
    }
}

/// `z / |z|`.
pub fn phase_of(z: Complex64, tol: &Tolerances) -> Result<PhaseFactor> {
    let modulus = z.norm();
    if modulus.is_nan() || modulus <= tol.zero_overlap {
        return Err(Error::ZeroPhaseUndefined {
            position: 0,
            modulus,
        });
    }
    Ok(PhaseFactor(z / modulus))
}

/// Spectral decomposition `A = V diag(eigenvalues) V^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns are the matching eigenvectors.
    pub eigenvectors: UnitaryOperator,
}

impl HermitianEigen {
    /// `V diag(f(lambda)) V^H`.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> CMatrix {
        let v = self.eigenvectors.matrix();
        let mut scaled = v.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let s = f(lambda);
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|x| x)
    }
}

pub fn hermitian_eig(a: &CMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    let d = check_square(a)?;
    let defect = hermitian_defect(a);
    if defect > tol.hermitian {
        return Err(Error::NotHermitian { defect });
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen {
        eigenvalues,
        eigenvectors: UnitaryOperator::from_raw(vectors),
    })
}

fn clamped_eig(a: &CMatrix, tol: &Tolerances) -> Result<HermitianEigen> {
    let mut eig = hermitian_eig(a, tol)?;
    let min = eig.eigenvalues[0];
    if min < -tol.psd {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    for lambda in &mut eig.eigenvalues {
        *lambda = lambda.max(0.0);
    }
    Ok(eig)
}

/// Principal square root of a positive semidefinite operator.
pub fn psd_sqrt(rho: &DensityOperator, tol: &Tolerances) -> Result<DensityOperator> {
    psd_sqrt_matrix(rho.matrix(), tol).map(DensityOperator::from_raw)
}

pub(crate) fn psd_sqrt_matrix(a: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    Ok(clamped_eig(a, tol)?.map(f64::sqrt))
}

/// `rho^{-1/2}` for a full-rank positive operator.
pub fn psd_inv_sqrt(rho: &DensityOperator, tol: &Tolerances) -> Result<CMatrix> {
    psd_inv_sqrt_matrix(rho.matrix(), tol)
}

/// Unitary factor `Q` of the polar decomposition `M = Q H`, by the scaled
/// Newton iteration `X <- (g X + X^{-H} / g) / 2`. `None` if `M` is singular.
pub fn polar_unitary(m: &CMatrix) -> Option<CMatrix> {
    let mut x = m.clone();
    let mut scaled = true;
    for _ in 0..100 {
        let inv = x.clone().try_inverse()?;
        let g = if scaled {
            (inv.norm() / x.norm()).sqrt()
        } else {
            1.0
        };
        let next = (x.scale(g) + inv.adjoint().unscale(g)).scale(0.5);
        let delta = (&next - &x).norm() / next.norm();
        x = next;
        if !scaled && delta <= 1e-15 {
            break;
        }
        // scaling only helps far from convergence
        if delta < 1e-2 {
            scaled = false;
        }
        if !scaled && delta < 1e-9 {
            // quadratic convergence: one more step reaches rounding level
            let inv = x.clone().try_inverse()?;
            x = (&x + inv.adjoint()).scale(0.5);
            break;
        }
    }
    Some(x)
}

pub(crate) fn psd_inv_sqrt_matrix(a: &CMatrix, tol: &Tolerances) -> Result<CMatrix> {
    let eig = clamped_eig(a, tol)?;
    let min = eig.eigenvalues[0];
    if min < tol.rank {
        return Err(Error::SingularOperator {
            min_eigenvalue: min,
            position: None,
        });
    }
    Ok(hermitian_part(&eig.map(|x| 1.0 / x.sqrt())))
}

/// Parses nested `[re, im]` pairs into a square matrix (row-major).
pub fn matrix_from_pairs(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    for row in rows {
        check_dim(n, row.len())?;
    }
    let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
    check_square(&m)?;
    Ok(m)
}

/// Inverse of [`matrix_from_pairs`].
pub fn matrix_to_pairs(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}
