//! Scenario files and their validation.

use std::fs;
use std::path::Path;

use holonomy::channels::{ChannelSequence, ChannelSpec};
use holonomy::ensemble::Decomposition;
use holonomy::interferometry::DEFAULT_GRID_SIZE;
use holonomy::operators::{
    matrix_from_pairs, CMatrix, CVector, DensityOperator, StateVector, Tolerances, UnitaryOperator,
};
use holonomy::trajectories::InitialState;
use holonomy::{Complex64, Error};
use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::failure::Failure;

type Pairs = Vec<[f64; 2]>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    /// Free-form description; not used in computation.
    #[serde(default, rename = "name")]
    _name: Option<String>,
    dim: usize,
    initial: RawInitial,
    steps: Vec<Value>,
    #[serde(default)]
    options: RawOptions,
}

#[derive(Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum RawInitial {
    Preset { preset: String },
    Vector { vector: Pairs },
    Density { density: Vec<Pairs> },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    #[serde(default)]
    tolerances: RawTolerances,
    grid_size: Option<usize>,
    seed: Option<u64>,
    min_weight: Option<f64>,
    #[serde(alias = "epsilon")]
    epsilon_regularization: Option<f64>,
    close_loop: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    hermitian: Option<f64>,
    unitary: Option<f64>,
    psd: Option<f64>,
    reconstruction: Option<f64>,
    rank: Option<f64>,
    zero_overlap: Option<f64>,
    completeness: Option<f64>,
}

impl RawTolerances {
    fn resolve(&self) -> Result<Tolerances, Failure> {
        let mut tol = Tolerances::default();
        let fields = [
            (self.hermitian, &mut tol.hermitian, "hermitian"),
            (self.unitary, &mut tol.unitary, "unitary"),
            (self.psd, &mut tol.psd, "psd"),
            (
                self.reconstruction,
                &mut tol.reconstruction,
                "reconstruction",
            ),
            (self.rank, &mut tol.rank, "rank"),
            (self.zero_overlap, &mut tol.zero_overlap, "zero_overlap"),
            (self.completeness, &mut tol.completeness, "completeness"),
        ];
        for (value, slot, name) in fields {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Failure::invalid(Error::InvalidParameter(format!(
                        "tolerance `{name}` must be finite and non-negative"
                    ))));
                }
                *slot = v;
            }
        }
        Ok(tol)
    }
}

/// Settings from the scenario file; command-line flags take precedence.
#[derive(Debug, Clone, Default)]
pub struct FileOptions {
    pub grid_size: Option<usize>,
    pub seed: Option<u64>,
    pub min_weight: Option<f64>,
    pub epsilon: Option<f64>,
    pub close_loop: Option<bool>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial: InitialState,
    pub seq: ChannelSequence,
    pub tol: Tolerances,
    pub options: FileOptions,
    /// Hex SHA-256 of the scenario file bytes.
    pub hash: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let bytes = fs::read(path)
            .map_err(|e| Failure::usage("Io", format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, Failure> {
        let hash = hex::encode(Sha256::digest(bytes));
        let raw: RawScenario = serde_json::from_slice(bytes)
            .map_err(|e| Failure::usage("ScenarioParse", e.to_string()))?;
        let tol = raw.options.tolerances.resolve()?;
        if raw.dim == 0 {
            return Err(Failure::invalid(Error::InvalidParameter(
                "dim must be positive".into(),
            )));
        }
        let initial = build_initial(&raw.initial, raw.dim, &tol)?;
        let seq = build_steps(&raw.steps, raw.dim, &tol)?;
        let options = FileOptions {
            grid_size: raw.options.grid_size,
            seed: raw.options.seed,
            min_weight: raw.options.min_weight,
            epsilon: raw.options.epsilon_regularization,
            close_loop: raw.options.close_loop,
        };
        Ok(Scenario {
            initial,
            seq,
            tol,
            options,
            hash,
        })
    }

    pub fn pure_initial(&self, command: &str) -> Result<&StateVector, Failure> {
        match &self.initial {
            InitialState::Pure(psi) => Ok(psi),
            InitialState::Mixed(_) => Err(Failure::invalid(Error::InvalidParameter(format!(
                "`{command}` needs a pure initial state"
            )))),
        }
    }

    pub fn default_grid(&self) -> usize {
        self.options.grid_size.unwrap_or(DEFAULT_GRID_SIZE)
    }
}

fn build_initial(raw: &RawInitial, dim: usize, tol: &Tolerances) -> Result<InitialState, Failure> {
    let state = match raw {
        RawInitial::Preset { preset } => preset_state(preset, dim)?,
        RawInitial::Vector { vector } => {
            let v = CVector::from_iterator(
                vector.len(),
                vector.iter().map(|p| Complex64::new(p[0], p[1])),
            );
            let psi = StateVector::new(v).map_err(Failure::invalid)?;
            InitialState::Pure(psi)
        }
        RawInitial::Density { density } => {
            let m = matrix_from_pairs(density).map_err(Failure::invalid)?;
            InitialState::Mixed(DensityOperator::new(m, tol).map_err(Failure::invalid)?)
        }
    };
    if state.dim() != dim {
        return Err(Failure::invalid(Error::DimensionMismatch {
            expected: dim,
            found: state.dim(),
        }));
    }
    let trace = match &state {
        InitialState::Pure(psi) => psi.norm_sqr(),
        InitialState::Mixed(rho) => rho.trace(),
    };
    if (trace - 1.0).abs() > tol.reconstruction {
        return Err(Failure::invalid(Error::InvalidParameter(format!(
            "initial state is not normalized (trace {trace})"
        ))));
    }
    Ok(state)
}

fn preset_state(name: &str, dim: usize) -> Result<InitialState, Failure> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let qubit = |a: Complex64, b: Complex64| -> Result<InitialState, Failure> {
        if dim != 2 {
            return Err(Failure::invalid(Error::InvalidParameter(format!(
                "initial preset `{name}` is defined for qubits only"
            ))));
        }
        Ok(InitialState::Pure(
            StateVector::from_slice(&[a, b]).map_err(Failure::invalid)?,
        ))
    };
    let one = Complex64::new(1.0, 0.0);
    match name {
        "zero" => Ok(InitialState::Pure(StateVector::basis(dim, 0))),
        "one" if dim >= 2 => Ok(InitialState::Pure(StateVector::basis(dim, 1))),
        "plus" => qubit(one * h, one * h),
        "minus" => qubit(one * h, -one * h),
        "plus_i" => qubit(one * h, Complex64::new(0.0, h)),
        "minus_i" => qubit(one * h, Complex64::new(0.0, -h)),
        "uniform" => {
            let amp = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
            Ok(InitialState::Pure(
                StateVector::new(CVector::from_element(dim, amp)).map_err(Failure::invalid)?,
            ))
        }
        "maximally_mixed" => Ok(InitialState::Mixed(DensityOperator::maximally_mixed(dim))),
        other => Err(Failure::invalid(Error::InvalidParameter(format!(
            "unknown initial preset `{other}` for dimension {dim}"
        )))),
    }
}

fn build_steps(raw: &[Value], dim: usize, tol: &Tolerances) -> Result<ChannelSequence, Failure> {
    let mut steps = Vec::new();
    for (k, value) in raw.iter().enumerate() {
        let mut value = value.clone();
        let repeat = match value.as_object_mut().and_then(|o| o.remove("repeat")) {
            None => 1,
            Some(r) => r.as_u64().filter(|&r| r >= 1).ok_or_else(|| {
                Failure::usage(
                    "ScenarioParse",
                    format!("step {}: `repeat` must be a positive integer", k + 1),
                )
            })? as usize,
        };
        let spec: ChannelSpec = serde_json::from_value(value).map_err(|e| {
            Failure::usage(
                "ScenarioParse",
                format!("step {}: not a channel spec ({e})", k + 1),
            )
        })?;
        let channel = spec
            .build(dim, tol)
            .map_err(|e| Failure::invalid_at(e, k + 1))?;
        steps.extend(std::iter::repeat_n(channel, repeat));
    }
    ChannelSequence::new(steps).map_err(Failure::invalid)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixers {
    decompositions: Vec<RawDecomposition>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDecomposition {
    label: String,
    mixers: Vec<Option<Vec<Pairs>>>,
}

/// Reads a mixers file: one entry per decomposition, each listing one
/// unitary per step (`null` keeps that step's Kraus set as is).
pub fn load_mixers(path: &Path, scenario: &Scenario) -> Result<Vec<Decomposition>, Failure> {
    let bytes = fs::read(path)
        .map_err(|e| Failure::usage("Io", format!("cannot read {}: {e}", path.display())))?;
    let raw: RawMixers =
        serde_json::from_slice(&bytes).map_err(|e| Failure::usage("MixersParse", e.to_string()))?;
    let counts = scenario.seq.kraus_counts();
    raw.decompositions
        .iter()
        .map(|dec| {
            if dec.mixers.len() != counts.len() {
                return Err(Failure::invalid(Error::DimensionMismatch {
                    expected: counts.len(),
                    found: dec.mixers.len(),
                }));
            }
            let mixers = dec
                .mixers
                .iter()
                .zip(&counts)
                .map(|(m, &count)| {
                    let matrix = match m {
                        None => CMatrix::identity(count, count),
                        Some(rows) => matrix_from_pairs(rows).map_err(Failure::invalid)?,
                    };
                    if matrix.nrows() != count {
                        return Err(Failure::invalid(Error::DimensionMismatch {
                            expected: count,
                            found: matrix.nrows(),
                        }));
                    }
                    UnitaryOperator::new(matrix, &scenario.tol).map_err(Failure::invalid)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Decomposition {
                label: dec.label.clone(),
                mixers,
            })
        })
        .collect()
}
