//! Probability-weighted averages of trajectory phases, and the comparison
//! of those averages across Kraus representations of the same evolution.
//!
//! The averaged phase `sum_alpha p_alpha gamma_alpha` is a property of the
//! chosen decomposition into trajectories, not of the channel: two Kraus
//! sets with identical action generally give different averages.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channels::{
    compose_sequence, qubit_rotation, transform_representation, ChannelSequence, KrausChannel,
};
use crate::error::{Error, Result};
use crate::operators::{
    check_dim, max_abs, CMatrix, DensityOperator, StateVector, Tolerances, UnitaryOperator,
};
use crate::phases::{pancharatnam_phase, regularize, uhlmann_holonomy};
use crate::trajectories::{enumerate_mixed, enumerate_pure, EnumerateOptions};

pub const DEFAULT_MIN_WEIGHT: f64 = 1e-9;

/// `sum_alpha p_alpha gamma_alpha` for one decomposition.
#[derive(Debug, Clone)]
pub struct AveragedPhase {
    pub label: String,
    pub value: Complex64,
    /// Number of trajectories that entered the sum.
    pub trajectories: usize,
    pub retained_weight: f64,
    /// Weight left out of the sum: light trajectories plus undefined phases.
    pub excluded_weight: f64,
    /// Part of the excluded weight whose phase was undefined.
    pub undefined_weight: f64,
}

impl AveragedPhase {
    pub fn visibility(&self) -> f64 {
        self.value.norm()
    }
}

/// Averages the Pancharatnam phase over every trajectory heavier than
/// `min_weight`. Trajectories whose phase is undefined are left out; if
/// together they weigh more than `min_weight` the average is ill-posed and
/// an error is returned.
pub fn average_phase(
    seq: &ChannelSequence,
    psi: &StateVector,
    min_weight: f64,
    tol: &Tolerances,
) -> Result<AveragedPhase> {
    let opts = EnumerateOptions {
        min_weight,
        ..Default::default()
    };
    let enumeration = enumerate_pure(seq, psi, &opts, tol)?;
    let phases: Vec<Option<Result<Complex64>>> = enumeration
        .entries
        .par_iter()
        .map(|entry| {
            let traj = entry.trajectory.as_ref()?;
            if traj.weight <= min_weight {
                return None;
            }
            Some(match pancharatnam_phase(&traj.states, tol) {
                Ok(g) => Ok(g.value()),
                Err(e) => Err(e),
            })
        })
        .collect();

    let mut value = Complex64::new(0.0, 0.0);
    let mut retained_weight = 0.0;
    let mut undefined_weight = 0.0;
    let mut trajectories = 0;
    for (entry, phase) in enumeration.entries.iter().zip(phases) {
        match phase {
            Some(Ok(g)) => {
                value += g * entry.weight;
                retained_weight += entry.weight;
                trajectories += 1;
            }
            Some(Err(Error::ZeroPhaseUndefined { .. })) => undefined_weight += entry.weight,
            Some(Err(e)) => return Err(e),
            None => {}
        }
    }
    if undefined_weight > min_weight {
        return Err(Error::UndefinedPhaseMass {
            weight: undefined_weight,
            min_weight,
        });
    }
    Ok(AveragedPhase {
        label: "original".to_string(),
        value,
        trajectories,
        retained_weight,
        excluded_weight: enumeration.total_weight - retained_weight,
        undefined_weight,
    })
}

/// A choice of Kraus representation: one mixing unitary per step.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub label: String,
    pub mixers: Vec<UnitaryOperator>,
}

impl Decomposition {
    pub fn apply(&self, seq: &ChannelSequence, tol: &Tolerances) -> Result<ChannelSequence> {
        check_dim(seq.len(), self.mixers.len())?;
        let steps = seq
            .steps()
            .iter()
            .zip(&self.mixers)
            .map(|(ch, u)| transform_representation(ch, u, tol))
            .collect::<Result<Vec<_>>>()?;
        ChannelSequence::new(steps)
    }
}

#[derive(Debug, Clone)]
pub struct DependenceReport {
    /// The original decomposition first, then one entry per mixer set.
    pub phases: Vec<AveragedPhase>,
    /// Largest deviation between the composite channel outputs of any
    /// decomposition and the original, over a tomographically complete
    /// set of probe states.
    pub action_deviation: f64,
    /// `(i, j, |Gamma_i - Gamma_j|)` for every `i < j`.
    pub gaps: Vec<(usize, usize, f64)>,
}

impl DependenceReport {
    pub fn max_gap(&self) -> f64 {
        self.gaps.iter().map(|g| g.2).fold(0.0, f64::max)
    }
}

/// `|j>`, `(|j> + |k>)/sqrt 2` and `(|j> + i|k>)/sqrt 2` for all `j < k`;
/// their projectors span every operator on the space.
fn probe_states(dim: usize) -> Vec<DensityOperator> {
    let mut out = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        out.push(DensityOperator::from_pure(&StateVector::basis(dim, j)));
        for k in j + 1..dim {
            for phase in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut v = crate::operators::CVector::zeros(dim);
                v[j] = Complex64::new(1.0, 0.0);
                v[k] = phase;
                let psi = StateVector::new(v.unscale(2f64.sqrt())).expect("finite");
                out.push(DensityOperator::from_pure(&psi));
            }
        }
    }
    out
}

fn action_deviation(a: &ChannelSequence, b: &ChannelSequence) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for probe in probe_states(a.dim()) {
        let x = compose_sequence(a, &probe)?;
        let y = compose_sequence(b, &probe)?;
        worst = worst.max(max_abs(&(x.matrix() - y.matrix())));
    }
    Ok(worst)
}

/// Averages the phase of `psi` under the original decomposition and under
/// every mixed one, after checking that all of them describe the same
/// composite channel.
pub fn representation_dependence_demo(
    seq: &ChannelSequence,
    psi: &StateVector,
    decompositions: &[Decomposition],
    min_weight: f64,
    tol: &Tolerances,
) -> Result<DependenceReport> {
    let mut sequences = Vec::with_capacity(decompositions.len());
    let mut deviation: f64 = 0.0;
    for dec in decompositions {
        let mixed = dec.apply(seq, tol)?;
        deviation = deviation.max(action_deviation(seq, &mixed)?);
        sequences.push((dec.label.clone(), mixed));
    }
    if deviation > tol.reconstruction {
        return Err(Error::ChannelActionMismatch { deviation });
    }

    let mut phases = vec![average_phase(seq, psi, min_weight, tol)?];
    for (label, mixed) in &sequences {
        let mut avg = average_phase(mixed, psi, min_weight, tol)?;
        avg.label = label.clone();
        phases.push(avg);
    }
    let mut gaps = Vec::new();
    for i in 0..phases.len() {
        for j in i + 1..phases.len() {
            gaps.push((i, j, (phases[i].value - phases[j].value).norm()));
        }
    }
    Ok(DependenceReport {
        phases,
        action_deviation: deviation,
        gaps,
    })
}

/// Lower bound on `|Gamma_1 - Gamma_2|` for [`reference_demo`]; the exact
/// gap is 0.568913...
pub const DEMO_GAP_BOUND: f64 = 0.5689;

/// Reference scenario for the decomposition dependence: three identical
/// qubit steps, each a quarter turn about x followed by dephasing with
/// probability 1/4 (`{sqrt(3/4) R, sqrt(1/4) Z R}`), applied to
/// `cos(pi/8)|0> + sin(pi/8)|1>`. The alternative decomposition mixes each
/// step's Kraus pair with the Hadamard matrix.
pub fn reference_demo(tol: &Tolerances) -> (ChannelSequence, StateVector, Vec<Decomposition>) {
    let p: f64 = 0.25;
    let rotation = qubit_rotation(FRAC_PI_2, [1.0, 0.0, 0.0]).expect("valid axis");
    let z = CMatrix::from_diagonal(&crate::operators::CVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]));
    let step = KrausChannel::new(
        vec![
            rotation.scale((1.0 - p).sqrt()),
            (&z * &rotation).scale(p.sqrt()),
        ],
        "rx(pi/2)+dephasing(0.25)",
        tol,
    )
    .expect("complete by construction");
    let seq = ChannelSequence::repeated(step, 3).expect("nonempty");
    let psi = StateVector::from_slice(&[
        Complex64::new(FRAC_PI_8.cos(), 0.0),
        Complex64::new(FRAC_PI_8.sin(), 0.0),
    ])
    .expect("finite");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = UnitaryOperator::new(
        CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(-h, 0.0),
            ],
        ),
        tol,
    )
    .expect("unitary");
    let decompositions = vec![Decomposition {
        label: "hadamard-mixed".to_string(),
        mixers: vec![hadamard; 3],
    }];
    (seq, psi, decompositions)
}

/// Exploratory mixed-state analogue of the averaged phase:
/// `sum_alpha tr(rho_N^alpha) U^alpha`. Not unitary in general.
#[derive(Debug, Clone)]
pub struct HolonomyAverage {
    pub operator: CMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub trajectories: usize,
    pub retained_weight: f64,
    pub excluded_weight: f64,
}

pub fn average_holonomy_report(
    seq: &ChannelSequence,
    rho: &DensityOperator,
    min_weight: f64,
    epsilon: Option<f64>,
    close_loop: bool,
    tol: &Tolerances,
) -> Result<HolonomyAverage> {
    let opts = EnumerateOptions {
        min_weight,
        ..Default::default()
    };
    let enumeration = enumerate_mixed(seq, rho, &opts, tol)?;
    let holonomies: Vec<Option<Result<CMatrix>>> = enumeration
        .entries
        .par_iter()
        .map(|entry| {
            let traj = entry.trajectory.as_ref()?;
            if traj.weight <= min_weight {
                return None;
            }
            let states = match epsilon {
                Some(eps) => match regularize(&traj.states, eps, tol) {
                    Ok(s) => s,
                    Err(e) => return Some(Err(e)),
                },
                None => traj.states.clone(),
            };
            Some(uhlmann_holonomy(&states, close_loop, tol).map(|h| h.operator.into_matrix()))
        })
        .collect();

    let d = seq.dim();
    let mut operator = CMatrix::zeros(d, d);
    let mut retained_weight = 0.0;
    let mut trajectories = 0;
    for (entry, h) in enumeration.entries.iter().zip(holonomies) {
        if let Some(h) = h {
            operator += h?.scale(entry.weight);
            retained_weight += entry.weight;
            trajectories += 1;
        }
    }
    let mut singular_values: Vec<f64> = operator
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    Ok(HolonomyAverage {
        operator,
        singular_values,
        trajectories,
        retained_weight,
        excluded_weight: enumeration.total_weight - retained_weight,
    })
}
