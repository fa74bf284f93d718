//! Quantum trajectories of a channel sequence: one Kraus outcome per step,
//! with the unnormalized conditional states that outcome record produces.
//!
//! Sampling uses SplitMix64 seeded directly with the caller's seed; each step
//! consumes one 64-bit draw `x`, mapped to `u = (x >> 11) * 2^-53` in
//! `[0, 1)`, and picks the first Kraus index whose cumulative conditional
//! probability exceeds `u` times the total.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSequence;
use crate::error::{Error, Result};
use crate::operators::{check_dim, CMatrix, DensityOperator, StateVector, Tolerances};

/// Default upper bound on the number of index tuples enumerated.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// Outcome record `alpha(1), ..., alpha(N)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajectoryIndex(Vec<usize>);

impl TrajectoryIndex {
    pub fn new(outcomes: Vec<usize>) -> Self {
        TrajectoryIndex(outcomes)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, seq: &ChannelSequence) -> Result<()> {
        if self.len() != seq.len() {
            return Err(Error::InvalidIndex(format!(
                "index has {} entries for a sequence of {} steps",
                self.len(),
                seq.len()
            )));
        }
        for (k, (&p, ch)) in self.0.iter().zip(seq.steps()).enumerate() {
            if p >= ch.len() {
                return Err(Error::InvalidIndex(format!(
                    "outcome {p} at step {} exceeds the {} Kraus operators",
                    k + 1,
                    ch.len()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TrajectoryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for TrajectoryIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split(',')
            .map(|part| {
                part.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidIndex(format!("`{part}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(TrajectoryIndex)
    }
}

/// Pure-state trajectory `|psi> -> |psi_1> -> ... -> |psi_N>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureTrajectory {
    pub index: TrajectoryIndex,
    /// `N + 1` unnormalized vectors, starting with the initial state.
    pub states: Vec<StateVector>,
    /// `<psi_N|psi_N>`.
    pub weight: f64,
}

impl PureTrajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(StateVector::norm).collect()
    }
}

/// Mixed-state trajectory `rho -> rho_1 -> ... -> rho_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTrajectory {
    pub index: TrajectoryIndex,
    /// `N + 1` unnormalized operators, starting with the initial state.
    pub states: Vec<DensityOperator>,
    /// `tr rho_N`.
    pub weight: f64,
}

impl MixedTrajectory {
    /// Trace of each state.
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(DensityOperator::trace).collect()
    }
}

/// Initial condition for a run.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Pure(StateVector),
    Mixed(DensityOperator),
}

impl InitialState {
    pub fn dim(&self) -> usize {
        match self {
            InitialState::Pure(psi) => psi.dim(),
            InitialState::Mixed(rho) => rho.dim(),
        }
    }

    pub fn density(&self) -> DensityOperator {
        match self {
            InitialState::Pure(psi) => DensityOperator::from_pure(psi),
            InitialState::Mixed(rho) => rho.clone(),
        }
    }
}

fn check_normalized(norm_sqr: f64, tol: &Tolerances) -> Result<()> {
    if (norm_sqr - 1.0).abs() > tol.reconstruction {
        return Err(Error::InvalidParameter(format!(
            "initial state must be normalized (norm^2 = {norm_sqr})"
        )));
    }
    Ok(())
}

fn kraus_chain<'a>(
    seq: &'a ChannelSequence,
    idx: &'a TrajectoryIndex,
) -> impl Iterator<Item = &'a CMatrix> + 'a {
    seq.steps()
        .iter()
        .zip(idx.as_slice())
        .map(|(ch, &p)| ch.op(p))
}

pub fn evolve_pure(
    seq: &ChannelSequence,
    psi: &StateVector,
    idx: &TrajectoryIndex,
    tol: &Tolerances,
) -> Result<PureTrajectory> {
    check_dim(seq.dim(), psi.dim())?;
    check_normalized(psi.norm_sqr(), tol)?;
    idx.validate(seq)?;
    let mut states = Vec::with_capacity(seq.len() + 1);
    states.push(psi.clone());
    for e in kraus_chain(seq, idx) {
        let next = states.last().expect("nonempty").evolve(e)?;
        states.push(next);
    }
    let weight = states.last().expect("nonempty").norm_sqr();
    Ok(PureTrajectory {
        index: idx.clone(),
        states,
        weight,
    })
}

pub fn evolve_mixed(
    seq: &ChannelSequence,
    rho: &DensityOperator,
    idx: &TrajectoryIndex,
    tol: &Tolerances,
) -> Result<MixedTrajectory> {
    check_dim(seq.dim(), rho.dim())?;
    check_normalized(rho.trace(), tol)?;
    idx.validate(seq)?;
    let mut states = Vec::with_capacity(seq.len() + 1);
    states.push(rho.clone());
    for e in kraus_chain(seq, idx) {
        let next = states.last().expect("nonempty").conjugate_by(e)?;
        states.push(next);
    }
    let weight = states.last().expect("nonempty").trace();
    Ok(MixedTrajectory {
        index: idx.clone(),
        states,
        weight,
    })
}

/// Every index tuple of `seq` in lexicographic order (last step varies
/// fastest).
pub fn index_tuples(seq: &ChannelSequence, cap: u64) -> Result<Vec<TrajectoryIndex>> {
    let count = seq.trajectory_count();
    if count > cap as u128 {
        return Err(Error::CombinatorialOverflow { count, cap });
    }
    let counts = seq.kraus_counts();
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0usize; counts.len()];
    loop {
        out.push(TrajectoryIndex(current.clone()));
        // odometer increment
        let mut k = counts.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            current[k] += 1;
            if current[k] < counts[k] {
                break;
            }
            current[k] = 0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerateOptions {
    /// Trajectories lighter than this keep their weight but drop their states.
    pub min_weight: f64,
    pub cap: u64,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            min_weight: 0.0,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// One entry of an enumeration. `trajectory` is `None` when the entry fell
/// below the weight threshold and its states were elided.
#[derive(Debug, Clone)]
pub struct Enumerated<T> {
    pub index: TrajectoryIndex,
    pub weight: f64,
    pub trajectory: Option<T>,
}

impl<T> Enumerated<T> {
    pub fn is_elided(&self) -> bool {
        self.trajectory.is_none()
    }
}

/// All trajectories of a sequence with their weight accounting.
#[derive(Debug, Clone)]
pub struct Enumeration<T> {
    pub entries: Vec<Enumerated<T>>,
    /// Sum of all weights, summed in lexicographic order.
    pub total_weight: f64,
    /// Sum of the weights whose states were kept.
    pub retained_weight: f64,
}

impl<T> Enumeration<T> {
    pub fn retained(&self) -> impl Iterator<Item = &T> {
        self.entries.iter().filter_map(|e| e.trajectory.as_ref())
    }

    pub fn excluded_weight(&self) -> f64 {
        self.total_weight - self.retained_weight
    }
}

fn collect_enumeration<T, F>(
    seq: &ChannelSequence,
    opts: &EnumerateOptions,
    evolve: F,
    weight_of: fn(&T) -> f64,
) -> Result<Enumeration<T>>
where
    T: Send,
    F: Fn(&TrajectoryIndex) -> Result<T> + Sync,
{
    if opts.min_weight.is_nan() || opts.min_weight < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "min_weight must be non-negative, got {}",
            opts.min_weight
        )));
    }
    let indices = index_tuples(seq, opts.cap)?;
    let entries = indices
        .into_par_iter()
        .map(|index| {
            let t = evolve(&index)?;
            let weight = weight_of(&t);
            let trajectory = (weight >= opts.min_weight).then_some(t);
            Ok(Enumerated {
                index,
                weight,
                trajectory,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total_weight = 0.0;
    let mut retained_weight = 0.0;
    for e in &entries {
        total_weight += e.weight;
        if !e.is_elided() {
            retained_weight += e.weight;
        }
    }
    Ok(Enumeration {
        entries,
        total_weight,
        retained_weight,
    })
}

pub fn enumerate_pure(
    seq: &ChannelSequence,
    psi: &StateVector,
    opts: &EnumerateOptions,
    tol: &Tolerances,
) -> Result<Enumeration<PureTrajectory>> {
    check_dim(seq.dim(), psi.dim())?;
    check_normalized(psi.norm_sqr(), tol)?;
    collect_enumeration(
        seq,
        opts,
        |idx| evolve_pure(seq, psi, idx, tol),
        |t| t.weight,
    )
}

pub fn enumerate_mixed(
    seq: &ChannelSequence,
    rho: &DensityOperator,
    opts: &EnumerateOptions,
    tol: &Tolerances,
) -> Result<Enumeration<MixedTrajectory>> {
    check_dim(seq.dim(), rho.dim())?;
    check_normalized(rho.trace(), tol)?;
    collect_enumeration(
        seq,
        opts,
        |idx| evolve_mixed(seq, rho, idx, tol),
        |t| t.weight,
    )
}

/// Uniform double in `[0, 1)` from the top 53 bits of one draw.
pub fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Per-record seeds for a batch: the first `n` SplitMix64 outputs of the
/// master seed.
pub fn derive_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = SplitMix64::seed_from_u64(master);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Draws one trajectory by simulating projective measurements of the
/// environment after every step.
pub fn sample(
    seq: &ChannelSequence,
    psi: &StateVector,
    seed: u64,
    tol: &Tolerances,
) -> Result<PureTrajectory> {
    check_dim(seq.dim(), psi.dim())?;
    check_normalized(psi.norm_sqr(), tol)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut states = Vec::with_capacity(seq.len() + 1);
    states.push(psi.clone());
    let mut outcomes = Vec::with_capacity(seq.len());
    let mut weight = 1.0;
    for (k, ch) in seq.steps().iter().enumerate() {
        let current = states.last().expect("nonempty");
        let norm_sqr = current.norm_sqr();
        if norm_sqr <= tol.zero_overlap {
            return Err(Error::DeadEnd { step: k + 1 });
        }
        let branches: Vec<StateVector> = ch
            .ops()
            .iter()
            .map(|e| current.evolve(e))
            .collect::<Result<_>>()?;
        let probs: Vec<f64> = branches.iter().map(|b| b.norm_sqr() / norm_sqr).collect();
        let total: f64 = probs.iter().sum();
        let target = unit_interval(rng.next_u64()) * total;
        let mut cumulative = 0.0;
        let mut chosen = None;
        for (p, &prob) in probs.iter().enumerate() {
            cumulative += prob;
            if prob > 0.0 && target < cumulative {
                chosen = Some(p);
                break;
            }
        }
        // rounding can leave target == cumulative at the end of the list
        let chosen = chosen
            .or_else(|| probs.iter().rposition(|&p| p > 0.0))
            .ok_or(Error::DeadEnd { step: k + 1 })?;
        weight *= probs[chosen];
        outcomes.push(chosen);
        states.push(branches.into_iter().nth(chosen).expect("in range"));
    }
    Ok(PureTrajectory {
        index: TrajectoryIndex(outcomes),
        states,
        weight,
    })
}

/// Sums the final states of a complete set of trajectories; the result is
/// the composite channel applied to the common initial state.
pub fn reconstruct_channel(
    seq: &ChannelSequence,
    trajs: &[MixedTrajectory],
) -> Result<DensityOperator> {
    let expected = seq.trajectory_count();
    let mut seen = BTreeSet::new();
    for t in trajs {
        t.index.validate(seq)?;
        seen.insert(&t.index);
    }
    if seen.len() as u128 != expected || trajs.len() != seen.len() {
        return Err(Error::IncompleteSet {
            expected: usize::try_from(expected).unwrap_or(usize::MAX),
            found: seen.len(),
        });
    }
    let mut ordered: Vec<&MixedTrajectory> = trajs.iter().collect();
    ordered.sort_by(|a, b| a.index.cmp(&b.index));
    let d = seq.dim();
    let sum = ordered.iter().fold(CMatrix::zeros(d, d), |acc, t| {
        acc + t.states.last().expect("nonempty").matrix()
    });
    Ok(DensityOperator::from_raw(sum))
}
