//! Geometric phases of single trajectories.
//!
//! A pure trajectory gets the Pancharatnam phase factor of its closed
//! overlap chain `<psi|psi_N><psi_N|psi_N-1>...<psi_1|psi>`. A mixed
//! trajectory gets the Uhlmann holonomy: amplitudes `W_k = sqrt(rho_k) V_k`
//! are transported so that every `W_{k+1}^H W_k` is positive definite, and
//! the holonomy is the net unitary `V_N V^H`.
//!
//! Transport works on trace-normalized copies of the states; trajectory
//! weights are irrelevant to the geometry. Rank-deficient states are
//! rejected unless the caller regularizes them first with [`regularize`].

use crate::error::{Error, Result};
use crate::operators::{
    check_dim, hermitian_defect, hermitian_eig, phase_of, polar_unitary, psd_sqrt_matrix, CMatrix,
    DensityOperator, PhaseFactor, StateVector, Tolerances, UnitaryOperator,
};

/// Normalized overlap modulus `|<a|b>| / (|a| |b|)`, zero if either vector is.
fn overlap_modulus(a: &StateVector, b: &StateVector, overlap: f64) -> f64 {
    let norms = a.norm() * b.norm();
    if norms > 0.0 {
        overlap / norms
    } else {
        0.0
    }
}

/// Phase factor of the closed overlap chain of `states = [psi, psi_1, ...,
/// psi_N]`.
///
/// Overlaps are checked in step order: position `k` in `1..=N` is
/// `<psi_k|psi_k-1>` and position `N + 1` is the closing `<psi|psi_N>`. The
/// first one whose normalized modulus is at or below `tol.zero_overlap`
/// is reported.
pub fn pancharatnam_phase(states: &[StateVector], tol: &Tolerances) -> Result<PhaseFactor> {
    let first = states.first().ok_or(Error::Empty("state sequence"))?;
    for s in states {
        check_dim(first.dim(), s.dim())?;
    }
    let n = states.len() - 1;
    let mut product = PhaseFactor::ONE;
    for position in 1..=n + 1 {
        let (bra, ket) = if position <= n {
            (&states[position], &states[position - 1])
        } else {
            (&states[0], &states[n])
        };
        let z = bra.inner(ket);
        let modulus = overlap_modulus(bra, ket, z.norm());
        if modulus.is_nan() || modulus <= tol.zero_overlap {
            return Err(Error::ZeroPhaseUndefined { position, modulus });
        }
        product = product * PhaseFactor::from_angle(z.arg());
    }
    Ok(product)
}

/// Normalized state with its square root, checked to be full rank.
struct Prepared {
    root: CMatrix,
}

fn prepare(rho: &DensityOperator, tol: &Tolerances) -> Result<Prepared> {
    let normalized = rho.normalized(tol)?;
    let eig = hermitian_eig(normalized.matrix(), tol)?;
    let min = eig.eigenvalues[0];
    if min < tol.rank {
        return Err(Error::SingularOperator {
            min_eigenvalue: min,
            position: None,
        });
    }
    let root = psd_sqrt_matrix(normalized.matrix(), tol)?;
    Ok(Prepared { root })
}

/// `(sqrt(to) from sqrt(to))^{-1/2} sqrt(to) sqrt(from)` for normalized
/// states, evaluated as the unitary polar factor of `sqrt(to) sqrt(from)`,
/// which stays unitary to rounding for ill-conditioned states.
fn transport_unitary(from: &Prepared, to: &Prepared) -> Result<CMatrix> {
    polar_unitary(&(&to.root * &from.root)).ok_or(Error::SingularOperator {
        min_eigenvalue: 0.0,
        position: None,
    })
}

/// Parallel-transport unitary carrying the phase of an amplitude of
/// `rho_from` to that of `rho_to`.
pub fn uhlmann_step(
    rho_from: &DensityOperator,
    rho_to: &DensityOperator,
    tol: &Tolerances,
) -> Result<UnitaryOperator> {
    check_dim(rho_from.dim(), rho_to.dim())?;
    let from = prepare(rho_from, tol).map_err(|e| e.at_step(0))?;
    let to = prepare(rho_to, tol).map_err(|e| e.at_step(1))?;
    let x = transport_unitary(&from, &to)?;
    UnitaryOperator::new(x, tol)
}

/// Amplitude `W = sqrt(rho) V` of a normalized state.
#[derive(Debug, Clone)]
pub struct UhlmannAmplitude {
    pub root: DensityOperator,
    pub phase: UnitaryOperator,
}

impl UhlmannAmplitude {
    pub fn amplitude(&self) -> CMatrix {
        self.root.matrix() * self.phase.matrix()
    }
}

/// Net unitary picked up by parallel transport along a trajectory.
#[derive(Debug, Clone)]
pub struct Holonomy {
    pub operator: UnitaryOperator,
}

impl Holonomy {
    pub fn matrix(&self) -> &CMatrix {
        self.operator.matrix()
    }
}

/// Full record of a transport: the amplitude at every state and the step
/// unitaries `X_k` with `V_k = X_k V_k-1`.
#[derive(Debug, Clone)]
pub struct Transport {
    pub amplitudes: Vec<UhlmannAmplitude>,
    pub steps: Vec<UnitaryOperator>,
}

impl Transport {
    /// `V_N V^H`.
    pub fn holonomy(&self) -> Holonomy {
        let first = &self.amplitudes[0].phase;
        let last = &self.amplitudes[self.amplitudes.len() - 1].phase;
        Holonomy {
            operator: last * &first.adjoint(),
        }
    }
}

/// Transports the amplitude `sqrt(rho) V` along `states`. With `close_loop`
/// the first state is appended at the end so that the path returns to its
/// starting point.
pub fn uhlmann_transport(
    states: &[DensityOperator],
    initial_phase: &UnitaryOperator,
    close_loop: bool,
    tol: &Tolerances,
) -> Result<Transport> {
    let first = states.first().ok_or(Error::Empty("state sequence"))?;
    if states.len() < 2 {
        return Err(Error::InvalidParameter(
            "transport needs at least two states".into(),
        ));
    }
    check_dim(first.dim(), initial_phase.dim())?;
    let defect = initial_phase.defect();
    if defect > tol.unitary {
        return Err(Error::NotUnitary { defect });
    }
    for s in states {
        check_dim(first.dim(), s.dim())?;
    }
    let mut path: Vec<&DensityOperator> = states.iter().collect();
    if close_loop {
        path.push(first);
    }
    let prepared = path
        .iter()
        .enumerate()
        .map(|(k, rho)| prepare(rho, tol).map_err(|e| e.at_step(k)))
        .collect::<Result<Vec<_>>>()?;

    let mut amplitudes = Vec::with_capacity(path.len());
    let mut steps = Vec::with_capacity(path.len() - 1);
    amplitudes.push(UhlmannAmplitude {
        root: DensityOperator::from_raw(prepared[0].root.clone()),
        phase: initial_phase.clone(),
    });
    for k in 1..prepared.len() {
        let x = transport_unitary(&prepared[k - 1], &prepared[k]).map_err(|e| e.at_step(k))?;
        let x = UnitaryOperator::new(x, tol)?;
        let phase = &x * &amplitudes[k - 1].phase;
        amplitudes.push(UhlmannAmplitude {
            root: DensityOperator::from_raw(prepared[k].root.clone()),
            phase,
        });
        steps.push(x);
    }
    Ok(Transport { amplitudes, steps })
}

/// Holonomy `X_N ... X_2 X_1` of a trajectory of density operators.
pub fn uhlmann_holonomy(
    states: &[DensityOperator],
    close_loop: bool,
    tol: &Tolerances,
) -> Result<Holonomy> {
    let d = states.first().ok_or(Error::Empty("state sequence"))?.dim();
    uhlmann_transport(states, &UnitaryOperator::identity(d), close_loop, tol).map(|t| t.holonomy())
}

#[derive(Debug, Clone)]
pub struct ParallelityReport {
    /// Smallest eigenvalue of `W_k^H W_k-1` for each step `k`.
    pub margins: Vec<f64>,
    /// Max entry of the anti-Hermitian part of each product.
    pub hermiticity_defects: Vec<f64>,
}

impl ParallelityReport {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Recomputes every `W_k^H W_k-1` of a transport and checks that it is
/// Hermitian and strictly positive.
pub fn verify_parallelity(transport: &Transport, tol: &Tolerances) -> Result<ParallelityReport> {
    let mut margins = Vec::with_capacity(transport.steps.len());
    let mut hermiticity_defects = Vec::with_capacity(transport.steps.len());
    for (k, pair) in transport.amplitudes.windows(2).enumerate() {
        let step = k + 1;
        let product = pair[1].amplitude().adjoint() * pair[0].amplitude();
        let defect = hermitian_defect(&product);
        let symmetric = (&product + product.adjoint()).scale(0.5);
        let margin = hermitian_eig(&symmetric, tol)?.eigenvalues[0];
        if defect > tol.hermitian || margin.is_nan() || margin <= 0.0 {
            return Err(Error::ParallelityViolation {
                step,
                margin: if defect > tol.hermitian {
                    -defect
                } else {
                    margin
                },
            });
        }
        margins.push(margin);
        hermiticity_defects.push(defect);
    }
    Ok(ParallelityReport {
        margins,
        hermiticity_defects,
    })
}

/// Phase the holonomy assigns to the direction `psi`: `Phi[<psi|U|psi>]`.
pub fn pure_limit_phase(
    holonomy: &Holonomy,
    psi: &StateVector,
    tol: &Tolerances,
) -> Result<PhaseFactor> {
    let image = psi.evolve(holonomy.matrix())?;
    phase_of(psi.inner(&image), tol)
}

/// `(1 - eps) rho/tr(rho) + eps 1/d` for every state.
pub fn regularize(
    states: &[DensityOperator],
    eps: f64,
    tol: &Tolerances,
) -> Result<Vec<DensityOperator>> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "regularization must lie in [0, 1], got {eps}"
        )));
    }
    states
        .iter()
        .enumerate()
        .map(|(k, rho)| {
            rho.normalized(tol)
                .map(|r| r.regularized(eps))
                .map_err(|e| e.at_step(k))
        })
        .collect()
}

/// Regularized mixed path `(1 - eps)|psi_k><psi_k|/|psi_k|^2 + eps 1/d`.
pub fn regularize_pure_path(
    states: &[StateVector],
    eps: f64,
    tol: &Tolerances,
) -> Result<Vec<DensityOperator>> {
    let mixed: Vec<DensityOperator> = states.iter().map(DensityOperator::from_pure).collect();
    regularize(&mixed, eps, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{max_abs, CVector};
    use crate::random;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ket(a: Complex64, b: Complex64) -> StateVector {
        StateVector::from_slice(&[a, b])
            .unwrap()
            .normalized()
            .unwrap()
    }

    fn octant() -> Vec<StateVector> {
        vec![
            StateVector::basis(2, 0),
            ket(c(1.0, 0.0), c(1.0, 0.0)),
            ket(c(1.0, 0.0), c(0.0, 1.0)),
        ]
    }

    fn diag(values: &[f64]) -> DensityOperator {
        DensityOperator::new(
            CMatrix::from_diagonal(&CVector::from_iterator(
                values.len(),
                values.iter().map(|&x| c(x, 0.0)),
            )),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn constant_path_has_trivial_phase() {
        let states = vec![StateVector::basis(2, 0); 4];
        assert_eq!(
            pancharatnam_phase(&states, &tol()).unwrap(),
            PhaseFactor::ONE
        );
    }

    #[test]
    fn octant_phase() {
        let g = pancharatnam_phase(&octant(), &tol()).unwrap();
        assert!((g.arg() + FRAC_PI_4).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_step_is_reported() {
        let states = vec![
            StateVector::basis(2, 0),
            ket(c(1.0, 0.0), c(1.0, 0.0)),
            StateVector::basis(2, 1).scaled(c(0.0, 0.0)),
        ];
        assert!(matches!(
            pancharatnam_phase(&states, &tol()),
            Err(Error::ZeroPhaseUndefined { position: 2, .. })
        ));
        let states = vec![
            StateVector::basis(2, 0),
            ket(c(1.0, 0.0), c(1.0, 0.0)),
            StateVector::basis(2, 1),
        ];
        assert!(matches!(
            pancharatnam_phase(&states, &tol()),
            Err(Error::ZeroPhaseUndefined { position: 3, .. })
        ));
    }

    #[test]
    fn single_ray_has_trivial_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random::state(3, &mut rng);
        let states: Vec<_> = (0..5)
            .map(|_| {
                let s: f64 = rng.random_range(0.1..3.0);
                let a: f64 = rng.random_range(0.0..6.0);
                psi.scaled(Complex64::from_polar(s, a))
            })
            .collect();
        let g = pancharatnam_phase(&states, &tol()).unwrap();
        assert!((g.value() - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn identical_states_give_identity_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::density(3, &mut rng);
        let x = uhlmann_step(&rho, &rho, &tol()).unwrap();
        assert!(max_abs(&(x.matrix() - CMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn step_matches_inverse_square_root_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random::density(3, &mut rng);
            let b = random::density(3, &mut rng);
            let rb = crate::operators::psd_sqrt(&b, &tol()).unwrap();
            let ra = crate::operators::psd_sqrt(&a, &tol()).unwrap();
            let sandwich = DensityOperator::from_raw(rb.matrix() * a.matrix() * rb.matrix());
            let inv = crate::operators::psd_inv_sqrt(&sandwich, &tol()).unwrap();
            let expected = inv * rb.matrix() * ra.matrix();
            let x = uhlmann_step(&a, &b, &tol()).unwrap();
            assert!(max_abs(&(x.matrix() - expected)) < 1e-10);
        }
    }

    #[test]
    fn commuting_pair_gives_identity_step() {
        let x = uhlmann_step(&diag(&[0.7, 0.3]), &diag(&[0.4, 0.6]), &tol()).unwrap();
        assert!(max_abs(&(x.matrix() - CMatrix::identity(2, 2))) < 1e-14);
    }

    #[test]
    fn step_rejects_rank_deficiency() {
        let err = uhlmann_step(&diag(&[0.7, 0.3]), &diag(&[1.0, 0.0]), &tol()).unwrap_err();
        assert!(matches!(
            err,
            Error::SingularOperator {
                position: Some(1),
                ..
            }
        ));
    }

    #[test]
    fn holonomy_of_constant_and_commuting_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::density(2, &mut rng);
        let h = uhlmann_holonomy(&vec![rho; 4], true, &tol()).unwrap();
        assert!(max_abs(&(h.matrix() - CMatrix::identity(2, 2))) < 1e-12);

        let path = vec![diag(&[0.9, 0.1]), diag(&[0.2, 0.8]), diag(&[0.5, 0.5])];
        for close in [false, true] {
            let h = uhlmann_holonomy(&path, close, &tol()).unwrap();
            assert!(max_abs(&(h.matrix() - CMatrix::identity(2, 2))) < 1e-14);
        }
    }

    #[test]
    fn holonomy_ignores_trace_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let path: Vec<_> = (0..4).map(|_| random::density(2, &mut rng)).collect();
        let scaled: Vec<_> = path
            .iter()
            .enumerate()
            .map(|(k, r)| DensityOperator::from_raw(r.matrix().scale(0.1 + k as f64)))
            .collect();
        let a = uhlmann_holonomy(&path, false, &tol()).unwrap();
        let b = uhlmann_holonomy(&scaled, false, &tol()).unwrap();
        assert!(max_abs(&(a.matrix() - b.matrix())) < 1e-12);
    }

    #[test]
    fn regularized_octant_approaches_pancharatnam() {
        let gamma = pancharatnam_phase(&octant(), &tol()).unwrap();
        let path = regularize_pure_path(&octant(), 1e-4, &tol()).unwrap();
        let h = uhlmann_holonomy(&path, true, &tol()).unwrap();
        let phase = pure_limit_phase(&h, &StateVector::basis(2, 0), &tol()).unwrap();
        assert!((phase.value() - gamma.value()).norm() <= 1e-3);
    }

    #[test]
    fn pure_limit_phase_examples() {
        let psi = StateVector::basis(2, 0);
        let id = Holonomy {
            operator: UnitaryOperator::identity(2),
        };
        assert_eq!(
            pure_limit_phase(&id, &psi, &tol()).unwrap(),
            PhaseFactor::ONE
        );
        let theta = 0.37;
        let u = CMatrix::from_diagonal(&CVector::from_vec(vec![
            Complex64::from_polar(1.0, theta),
            Complex64::from_polar(1.0, -theta),
        ]));
        let h = Holonomy {
            operator: UnitaryOperator::new(u, &tol()).unwrap(),
        };
        let p = pure_limit_phase(&h, &psi, &tol()).unwrap();
        assert!((p.arg() - theta).abs() < 1e-15);
        // an off-diagonal holonomy has no component along |0>
        let flip =
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let h = Holonomy {
            operator: UnitaryOperator::new(flip, &tol()).unwrap(),
        };
        assert!(matches!(
            pure_limit_phase(&h, &psi, &tol()),
            Err(Error::ZeroPhaseUndefined { .. })
        ));
    }

    #[test]
    fn parallelity_of_constant_and_commuting_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random::density(2, &mut rng);
        let t = uhlmann_transport(
            &vec![rho.clone(); 3],
            &UnitaryOperator::identity(2),
            false,
            &tol(),
        )
        .unwrap();
        let report = verify_parallelity(&t, &tol()).unwrap();
        let min_eig = hermitian_eig(rho.matrix(), &tol()).unwrap().eigenvalues[0];
        for m in &report.margins {
            assert!((m - min_eig).abs() < 1e-12);
        }

        let path = vec![diag(&[0.9, 0.1]), diag(&[0.2, 0.8])];
        let t = uhlmann_transport(&path, &UnitaryOperator::identity(2), false, &tol()).unwrap();
        let report = verify_parallelity(&t, &tol()).unwrap();
        // sqrt(0.8 * 0.1) is the smaller diagonal entry of sqrt(rho_2) sqrt(rho_1)
        assert!((report.margins[0] - (0.08f64).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn parallelity_violation_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let path: Vec<_> = (0..3).map(|_| random::density(2, &mut rng)).collect();
        let mut t = uhlmann_transport(&path, &UnitaryOperator::identity(2), false, &tol()).unwrap();
        let flipped = t.amplitudes[2].phase.matrix().scale(-1.0);
        t.amplitudes[2].phase = UnitaryOperator::new(flipped, &tol()).unwrap();
        assert!(matches!(
            verify_parallelity(&t, &tol()),
            Err(Error::ParallelityViolation { step: 2, .. })
        ));
    }

    #[test]
    fn transport_input_errors() {
        let rho = DensityOperator::maximally_mixed(2);
        assert!(uhlmann_transport(&[], &UnitaryOperator::identity(2), false, &tol()).is_err());
        assert!(uhlmann_transport(
            std::slice::from_ref(&rho),
            &UnitaryOperator::identity(2),
            false,
            &tol()
        )
        .is_err());
        assert!(matches!(
            uhlmann_transport(
                &[rho.clone(), rho],
                &UnitaryOperator::identity(3),
                false,
                &tol()
            ),
            Err(Error::DimensionMismatch { .. })
        ));
        let singular = vec![diag(&[0.5, 0.5]), diag(&[0.5, 0.5]), diag(&[1.0, 0.0])];
        assert!(matches!(
            uhlmann_holonomy(&singular, false, &tol()),
            Err(Error::SingularOperator {
                position: Some(2),
                ..
            })
        ));
        assert!(regularize(&singular, 1.5, &tol()).is_err());
        let fixed = regularize(&singular, 1e-3, &tol()).unwrap();
        assert!(uhlmann_holonomy(&fixed, false, &tol()).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn pancharatnam_is_gauge_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let states: Vec<_> = (0..5).map(|_| random::state(2, &mut rng)).collect();
            let g = pancharatnam_phase(&states, &tol()).unwrap();
            let regauged: Vec<_> = states
                .iter()
                .map(|s| {
                    let scale: f64 = rng.random_range(0.01..10.0);
                    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    s.scaled(Complex64::from_polar(scale, angle))
                })
                .collect();
            let h = pancharatnam_phase(&regauged, &tol()).unwrap();
            prop_assert!((g.value() - h.value()).norm() <= 1e-12);
        }

        #[test]
        fn steps_are_unitary_and_parallel(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path: Vec<_> = (0..5).map(|_| random::density(2, &mut rng)).collect();
            let t = uhlmann_transport(&path, &random::unitary(2, &mut rng), true, &tol()).unwrap();
            for x in &t.steps {
                prop_assert!(x.defect() <= 1e-10);
            }
            let report = verify_parallelity(&t, &tol()).unwrap();
            prop_assert!(report.min_margin() > 0.0);
        }
    }
}
