//! Simulated two-arm interferometry of trajectory phases.
//!
//! One arm carries the post-selected state `path`, the other the
//! `reference` state behind a variable U(1) shifter `e^{i chi}`. The
//! recorded intensity is
//!
//! ```text
//! I(chi) = | path + e^{i chi} reference |^2
//!        = |path|^2 + |reference|^2 + 2 Re(e^{i chi} <path|reference>)
//! ```
//!
//! which peaks at `chi* = -arg <path|reference>`, so the reported phase
//! factor `e^{-i chi*}` is `Phi[<path|reference>]`. Arms carry unnormalized
//! trajectory states and which-path information is assumed erased, so the
//! arms never couple to the environment record.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::channels::ChannelSequence;
use crate::error::{Error, Result};
use crate::operators::{check_dim, phase_of, PhaseFactor, StateVector, Tolerances};
use crate::phases::pancharatnam_phase;
use crate::trajectories::{evolve_pure, TrajectoryIndex};

pub const DEFAULT_GRID_SIZE: usize = 4096;
pub const MIN_GRID_SIZE: usize = 8;

/// Intensities on the uniform grid `chi_j = 2 pi j / n` with the refined
/// location of their maximum.
#[derive(Debug, Clone)]
pub struct FringeScan {
    pub grid: Vec<f64>,
    pub intensities: Vec<f64>,
    /// Grid index of the largest intensity.
    pub argmax: usize,
    /// Maximizer after three-point quadratic refinement, in `[0, 2 pi)`.
    pub chi_star: f64,
}

impl FringeScan {
    /// `e^{-i chi*}`.
    pub fn estimated_phase(&self) -> PhaseFactor {
        PhaseFactor::from_angle(-self.chi_star)
    }

    pub fn max(&self) -> f64 {
        self.intensities[self.argmax]
    }

    pub fn min(&self) -> f64 {
        self.intensities
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.intensities.iter().sum::<f64>() / self.intensities.len() as f64
    }

    /// `(I_max - I_min) / (I_max + I_min)` over the grid.
    pub fn visibility(&self) -> f64 {
        let (max, min) = (self.max(), self.min());
        (max - min) / (max + min)
    }

    /// Grid spacing in radians.
    pub fn spacing(&self) -> f64 {
        TAU / self.grid.len() as f64
    }

    /// Two whitespace-separated columns `chi I`, one grid point per line.
    pub fn write_columns<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (chi, i) in self.grid.iter().zip(&self.intensities) {
            writeln!(out, "{chi:.17e} {i:.17e}")?;
        }
        Ok(())
    }
}

pub fn fringe_scan(
    reference: &StateVector,
    path: &StateVector,
    grid_size: usize,
    tol: &Tolerances,
) -> Result<FringeScan> {
    check_dim(reference.dim(), path.dim())?;
    if grid_size < MIN_GRID_SIZE {
        return Err(Error::InvalidParameter(format!(
            "grid size must be at least {MIN_GRID_SIZE}, got {grid_size}"
        )));
    }
    let norms = reference.norm() * path.norm();
    let overlap = path.inner(reference).norm();
    let modulus = if norms > 0.0 { overlap / norms } else { 0.0 };
    if modulus.is_nan() || modulus <= tol.zero_overlap {
        return Err(Error::DegenerateFringe {
            step: None,
            modulus,
        });
    }

    let n = grid_size;
    let grid: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let path_amp = path.amplitudes();
    let ref_amp = reference.amplitudes();
    let intensities: Vec<f64> = grid
        .iter()
        .map(|&chi| {
            let shift = Complex64::from_polar(1.0, chi);
            path_amp
                .iter()
                .zip(ref_amp.iter())
                .map(|(p, r)| (p + shift * r).norm_sqr())
                .sum()
        })
        .collect();

    let argmax =
        intensities.iter().enumerate().fold(
            0,
            |best, (j, &v)| if v > intensities[best] { j } else { best },
        );
    let left = intensities[(argmax + n - 1) % n];
    let centre = intensities[argmax];
    let right = intensities[(argmax + 1) % n];
    let curvature = left - 2.0 * centre + right;
    let offset = if curvature < 0.0 {
        0.5 * (left - right) / curvature
    } else {
        0.0
    };
    let spacing = TAU / n as f64;
    let chi_star = (grid[argmax] + offset * spacing).rem_euclid(TAU);

    Ok(FringeScan {
        grid,
        intensities,
        argmax,
        chi_star,
    })
}

/// Estimated against exact phase for one interferometer in the chain.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// `1..=N` for forward steps, `N + 1` for the closing comparison.
    pub step: usize,
    pub estimated_phase: PhaseFactor,
    pub exact_phase: PhaseFactor,
    /// Angle between estimated and exact phase factors, radians.
    pub abs_error: f64,
    pub visibility: f64,
}

fn scan_pair(
    reference: &StateVector,
    path: &StateVector,
    step: usize,
    grid_size: usize,
    tol: &Tolerances,
) -> Result<(StepRecord, FringeScan)> {
    let scan = fringe_scan(reference, path, grid_size, tol).map_err(|e| e.at_step(step))?;
    let exact_phase =
        phase_of(path.inner(reference), tol).map_err(|_| Error::DegenerateFringe {
            step: Some(step),
            modulus: 0.0,
        })?;
    let estimated_phase = scan.estimated_phase();
    let record = StepRecord {
        step,
        estimated_phase,
        exact_phase,
        abs_error: estimated_phase.angle_to(&exact_phase),
        visibility: scan.visibility(),
    };
    Ok((record, scan))
}

/// Interferometer `k`: reference `psi_{k-1}`, post-selected arm
/// `psi_k = E_{alpha(k)} psi_{k-1}`.
pub fn estimate_step_phase(
    seq: &ChannelSequence,
    psi: &StateVector,
    idx: &TrajectoryIndex,
    k: usize,
    grid_size: usize,
    tol: &Tolerances,
) -> Result<StepRecord> {
    if k == 0 || k > seq.len() {
        return Err(Error::InvalidIndex(format!(
            "step {k} outside 1..={}",
            seq.len()
        )));
    }
    let traj = evolve_pure(seq, psi, idx, tol)?;
    scan_pair(&traj.states[k - 1], &traj.states[k], k, grid_size, tol).map(|(r, _)| r)
}

/// Outcome of the full chain of interferometers along one trajectory.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    /// `N` forward records followed by the closing record.
    pub records: Vec<StepRecord>,
    pub scans: Vec<FringeScan>,
    /// Product of all estimated phase factors.
    pub product: PhaseFactor,
    /// The Pancharatnam phase of the same trajectory, for comparison.
    pub geometric_phase: PhaseFactor,
    /// Post-selection probability of the trajectory.
    pub weight: f64,
}

impl ProtocolRun {
    /// Angle between the measured product and the geometric phase.
    pub fn abs_error(&self) -> f64 {
        self.product.angle_to(&self.geometric_phase)
    }
}

/// Runs one interferometer per step and a closing one comparing `psi_N`
/// with `psi`, multiplying the estimated phase factors.
pub fn run_protocol(
    seq: &ChannelSequence,
    psi: &StateVector,
    idx: &TrajectoryIndex,
    grid_size: usize,
    tol: &Tolerances,
) -> Result<ProtocolRun> {
    let traj = evolve_pure(seq, psi, idx, tol)?;
    let n = seq.len();
    let mut records = Vec::with_capacity(n + 1);
    let mut scans = Vec::with_capacity(n + 1);
    for k in 1..=n + 1 {
        let (reference, path) = if k <= n {
            (&traj.states[k - 1], &traj.states[k])
        } else {
            (&traj.states[n], &traj.states[0])
        };
        let (record, scan) = scan_pair(reference, path, k, grid_size, tol)?;
        records.push(record);
        scans.push(scan);
    }
    let product = records
        .iter()
        .fold(PhaseFactor::ONE, |acc, r| acc * r.estimated_phase);
    let geometric_phase = pancharatnam_phase(&traj.states, tol)?;
    Ok(ProtocolRun {
        records,
        scans,
        product,
        geometric_phase,
        weight: traj.weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{preset, qubit_rotation, KrausChannel};
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn plus() -> StateVector {
        StateVector::from_slice(&[c(1.0, 0.0), c(1.0, 0.0)])
            .unwrap()
            .normalized()
            .unwrap()
    }

    #[test]
    fn equal_arms_peak_at_zero() {
        let zero = StateVector::basis(2, 0);
        let scan = fringe_scan(&zero, &zero, 64, &tol()).unwrap();
        assert_eq!(scan.argmax, 0);
        assert!(scan.chi_star.abs() < 1e-12);
        assert!((scan.max() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_turn_offset() {
        let zero = StateVector::basis(2, 0);
        let path = zero.scaled(c(0.0, 1.0));
        let scan = fringe_scan(&zero, &path, 4096, &tol()).unwrap();
        assert!((scan.chi_star - FRAC_PI_2).abs() < 1e-12);
        assert!((scan.estimated_phase().value() - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn refined_maximum_matches_overlap_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let a = random::state(2, &mut rng);
            let b = random::state(2, &mut rng);
            let scan = fringe_scan(&a, &b, 4096, &tol()).unwrap();
            let exact = phase_of(b.inner(&a), &tol()).unwrap();
            assert!(scan.estimated_phase().angle_to(&exact) <= 1e-5);
        }
    }

    #[test]
    fn fringe_errors() {
        let zero = StateVector::basis(2, 0);
        let one = StateVector::basis(2, 1);
        assert!(matches!(
            fringe_scan(&zero, &one, 64, &tol()),
            Err(Error::DegenerateFringe { step: None, .. })
        ));
        assert!(matches!(
            fringe_scan(&zero, &StateVector::basis(3, 0), 64, &tol()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            fringe_scan(&zero, &zero, 4, &tol()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn fringe_mean_and_visibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random::state(3, &mut rng).scaled(c(0.6, 0.0));
        let b = random::state(3, &mut rng).scaled(c(0.0, 1.3));
        let scan = fringe_scan(&a, &b, 4096, &tol()).unwrap();
        assert!((scan.mean() - (a.norm_sqr() + b.norm_sqr())).abs() <= 1e-9);
        let expected = 2.0 * b.inner(&a).norm() / (a.norm_sqr() + b.norm_sqr());
        assert!((scan.visibility() - expected).abs() <= 1e-5);
        assert!(scan.intensities.iter().all(|&i| i >= 0.0));
    }

    #[test]
    fn columns_export() {
        let zero = StateVector::basis(2, 0);
        let scan = fringe_scan(&zero, &zero, 8, &tol()).unwrap();
        let mut buf = Vec::new();
        scan.write_columns(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 8);
        let first: Vec<f64> = text
            .lines()
            .next()
            .unwrap()
            .split_whitespace()
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(first, vec![0.0, 4.0]);
    }

    #[test]
    fn identity_step_has_unit_phase() {
        let seq =
            ChannelSequence::repeated(preset("identity", &[], 2, &tol()).unwrap(), 2).unwrap();
        let idx = TrajectoryIndex::new(vec![0, 0]);
        let rec = estimate_step_phase(&seq, &plus(), &idx, 1, 4096, &tol()).unwrap();
        assert!(rec.estimated_phase.angle_to(&PhaseFactor::ONE) < 1e-12);
        let run = run_protocol(&seq, &plus(), &idx, 4096, &tol()).unwrap();
        assert_eq!(run.records.len(), 3);
        assert!(run.product.angle_to(&PhaseFactor::ONE) < 1e-12);
    }

    #[test]
    fn z_rotation_step_phase() {
        // exp(i sigma_z theta/2) |0> = e^{i theta/2} |0>, so <psi_1|psi> = e^{-i theta/2}
        let theta = 1.1;
        let u = qubit_rotation(-theta, [0.0, 0.0, 1.0]).unwrap();
        let seq =
            ChannelSequence::new(vec![KrausChannel::new(vec![u], "rz", &tol()).unwrap()]).unwrap();
        let idx = TrajectoryIndex::new(vec![0]);
        let rec =
            estimate_step_phase(&seq, &StateVector::basis(2, 0), &idx, 1, 4096, &tol()).unwrap();
        let expected = PhaseFactor::from_angle(-theta / 2.0);
        assert!(rec.exact_phase.angle_to(&expected) < 1e-14);
        assert!(rec.estimated_phase.angle_to(&expected) < 1e-5);
    }

    #[test]
    fn dephasing_step_is_real_positive() {
        let seq =
            ChannelSequence::repeated(preset("dephasing", &[0.3], 2, &tol()).unwrap(), 1).unwrap();
        let idx = TrajectoryIndex::new(vec![0]);
        let rec = estimate_step_phase(&seq, &plus(), &idx, 1, 4096, &tol()).unwrap();
        assert!(rec.estimated_phase.angle_to(&PhaseFactor::ONE) < 1e-9);
        assert!(matches!(
            estimate_step_phase(&seq, &plus(), &idx, 2, 4096, &tol()),
            Err(Error::InvalidIndex(_))
        ));
    }

    #[test]
    fn octant_protocol() {
        // |0> -> |+> -> |+i> through two rotations
        let to_plus = qubit_rotation(FRAC_PI_2, [0.0, 1.0, 0.0]).unwrap();
        let to_plus_i = qubit_rotation(FRAC_PI_2, [0.0, 0.0, 1.0]).unwrap();
        let seq = ChannelSequence::new(vec![
            KrausChannel::new(vec![to_plus], "ry", &tol()).unwrap(),
            KrausChannel::new(vec![to_plus_i], "rz", &tol()).unwrap(),
        ])
        .unwrap();
        let idx = TrajectoryIndex::new(vec![0, 0]);
        let run = run_protocol(&seq, &StateVector::basis(2, 0), &idx, 4096, &tol()).unwrap();
        assert!((run.geometric_phase.arg() + FRAC_PI_4).abs() < 1e-12);
        assert!(run.product.angle_to(&PhaseFactor::from_angle(-FRAC_PI_4)) <= 1e-4);
        assert!((run.weight - 1.0).abs() < 1e-14);
    }

    #[test]
    fn orthogonal_step_reports_position() {
        let flip = qubit_rotation(std::f64::consts::PI, [1.0, 0.0, 0.0]).unwrap();
        let seq = ChannelSequence::new(vec![
            preset("identity", &[], 2, &tol()).unwrap(),
            KrausChannel::new(vec![flip], "rx(pi)", &tol()).unwrap(),
        ])
        .unwrap();
        let idx = TrajectoryIndex::new(vec![0, 0]);
        assert!(matches!(
            run_protocol(&seq, &StateVector::basis(2, 0), &idx, 512, &tol()),
            Err(Error::DegenerateFringe { step: Some(2), .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn protocol_matches_geometric_phase(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = ChannelSequence::new((0..3).map(|_| random::channel(2, 2, &mut rng)).collect())
                .unwrap();
            let psi = random::state(2, &mut rng);
            let traj = crate::trajectories::sample(&seq, &psi, seed, &tol()).unwrap();
            let run = run_protocol(&seq, &psi, &traj.index, 4096, &tol());
            prop_assume!(run.is_ok());
            let run = run.unwrap();
            prop_assert!(run.abs_error() <= 4.0 * TAU / 4096.0);
        }
    }
}
