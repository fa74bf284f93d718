//! Kraus channels: application to states, sequencing, the unitary freedom
//! of the Kraus representation, and the system-environment dilation
//! `E_p = <e_p| U |e_0>`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    check_dim, matrix_from_pairs, matrix_to_pairs, max_abs, CMatrix, CVector, DensityOperator,
    Tolerances, UnitaryOperator,
};

/// A trace-preserving completely positive map in Kraus form. The order of
/// the operators is significant: index `p` is the outcome label recorded
/// along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    ops: Vec<CMatrix>,
    label: String,
}

/// Max entry of `sum_p E_p^H E_p - 1`.
pub fn completeness_defect(ops: &[CMatrix]) -> f64 {
    let d = ops[0].ncols();
    let sum = ops
        .iter()
        .fold(CMatrix::zeros(d, d), |acc, e| acc + e.adjoint() * e);
    max_abs(&(sum - CMatrix::identity(d, d)))
}

impl KrausChannel {
    pub fn new(ops: Vec<CMatrix>, label: impl Into<String>, tol: &Tolerances) -> Result<Self> {
        let first = ops.first().ok_or(Error::Empty("Kraus operator list"))?;
        let dim = first.nrows();
        if dim == 0 {
            return Err(Error::Empty("Kraus operator"));
        }
        for e in &ops {
            check_dim(dim, e.nrows())?;
            check_dim(dim, e.ncols())?;
            if e.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let defect = completeness_defect(&ops);
        if defect > tol.completeness {
            return Err(Error::CompletenessViolation { defect });
        }
        Ok(KrausChannel {
            dim,
            ops,
            label: label.into(),
        })
    }

    /// Single-operator channel `rho -> V rho V^H`.
    pub fn unitary(v: &UnitaryOperator, label: impl Into<String>) -> Self {
        KrausChannel {
            dim: v.dim(),
            ops: vec![v.matrix().clone()],
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of Kraus operators, `mu + 1`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn op(&self, p: usize) -> &CMatrix {
        &self.ops[p]
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// The steps `E_{t1,t0}, ..., E_{tN,tN-1}` of a discrete open evolution.
/// Steps may differ from one another but share one system dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSequence {
    steps: Vec<KrausChannel>,
}

impl ChannelSequence {
    pub fn new(steps: Vec<KrausChannel>) -> Result<Self> {
        let first = steps.first().ok_or(Error::Empty("channel sequence"))?;
        for ch in &steps {
            check_dim(first.dim(), ch.dim())?;
        }
        Ok(ChannelSequence { steps })
    }

    pub fn repeated(channel: KrausChannel, n: usize) -> Result<Self> {
        Self::new(vec![channel; n])
    }

    pub fn dim(&self) -> usize {
        self.steps[0].dim()
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[KrausChannel] {
        &self.steps
    }

    pub fn kraus_counts(&self) -> Vec<usize> {
        self.steps.iter().map(KrausChannel::len).collect()
    }

    /// Number of distinct trajectories, saturating at `u128::MAX`.
    pub fn trajectory_count(&self) -> u128 {
        self.steps
            .iter()
            .fold(1u128, |acc, ch| acc.saturating_mul(ch.len() as u128))
    }
}

/// `sum_p E_p rho E_p^H`.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    check_dim(ch.dim(), rho.dim())?;
    let d = ch.dim();
    let out = ch.ops().iter().fold(CMatrix::zeros(d, d), |acc, e| {
        acc + e * rho.matrix() * e.adjoint()
    });
    Ok(DensityOperator::from_raw(out))
}

/// Applies the steps left to right (earliest step first).
pub fn compose_sequence(seq: &ChannelSequence, rho: &DensityOperator) -> Result<DensityOperator> {
    check_dim(seq.dim(), rho.dim())?;
    seq.steps()
        .iter()
        .try_fold(rho.clone(), |state, ch| apply_channel(ch, &state))
}

/// New Kraus set `F_q = sum_p u_qp E_p`; describes the same channel.
pub fn transform_representation(
    ch: &KrausChannel,
    u: &UnitaryOperator,
    tol: &Tolerances,
) -> Result<KrausChannel> {
    check_dim(ch.len(), u.dim())?;
    let defect = u.defect();
    if defect > tol.unitary {
        return Err(Error::NotUnitary { defect });
    }
    let d = ch.dim();
    let ops = (0..ch.len())
        .map(|q| {
            ch.ops()
                .iter()
                .enumerate()
                .fold(CMatrix::zeros(d, d), |acc, (p, e)| {
                    acc + e.map(|z| z * u.matrix()[(q, p)])
                })
        })
        .collect();
    KrausChannel::new(ops, format!("{}~mixed", ch.label()), tol)
}

/// Joint system-environment unitary realizing one channel step. Basis
/// ordering of the joint space is environment-major: `|e_p> (x) |j>` has
/// index `p * d + j`, and the environment is prepared in `|e_0>`.
#[derive(Debug, Clone)]
pub struct DilatedStep {
    sys_dim: usize,
    env_dim: usize,
    joint: UnitaryOperator,
}

impl DilatedStep {
    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn prepared_env_index(&self) -> usize {
        0
    }

    pub fn joint_unitary(&self) -> &UnitaryOperator {
        &self.joint
    }

    /// The block `<e_p| U |e_0>`.
    pub fn kraus_block(&self, p: usize) -> CMatrix {
        let d = self.sys_dim;
        self.joint.matrix().view((p * d, 0), (d, d)).into_owned()
    }

    pub fn extract_kraus(&self) -> Vec<CMatrix> {
        (0..self.env_dim).map(|p| self.kraus_block(p)).collect()
    }
}

/// Builds a joint unitary whose first `d` columns stack the Kraus operators
/// (an isometry by completeness) and whose remaining columns extend them to
/// an orthonormal basis. Only the `<e_p|U|e_0>` blocks are meaningful; the
/// completion is one valid choice among many.
pub fn dilate(ch: &KrausChannel, tol: &Tolerances) -> Result<DilatedStep> {
    let defect = completeness_defect(ch.ops());
    if defect > tol.completeness {
        return Err(Error::CompletenessViolation { defect });
    }
    let d = ch.dim();
    let m = ch.len();
    let n = m * d;
    let mut joint = CMatrix::zeros(n, n);
    for (p, e) in ch.ops().iter().enumerate() {
        joint.view_mut((p * d, 0), (d, d)).copy_from(e);
    }

    let mut filled = d;
    for candidate in 0..n {
        if filled == n {
            break;
        }
        let mut v = CVector::zeros(n);
        v[candidate] = Complex64::new(1.0, 0.0);
        // two Gram-Schmidt passes
        for _ in 0..2 {
            for j in 0..filled {
                let col = joint.column(j);
                let overlap = col.dotc(&v);
                v -= col * overlap;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            joint.set_column(filled, &v.unscale(norm));
            filled += 1;
        }
    }
    debug_assert_eq!(filled, n);

    let joint = UnitaryOperator::new(joint, tol)?;
    Ok(DilatedStep {
        sys_dim: d,
        env_dim: m,
        joint,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn probability(name: &str, params: &[f64]) -> Result<f64> {
    match params {
        [p] if (0.0..=1.0).contains(p) => Ok(*p),
        _ => Err(Error::InvalidParameter(format!(
            "{name} expects one probability in [0, 1], got {params:?}"
        ))),
    }
}

fn no_params(name: &str, params: &[f64]) -> Result<()> {
    if params.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} takes no parameters, got {params:?}"
        )))
    }
}

/// Clock matrix `diag(exp(2 pi i k / d))`; `diag(1, -1)` for a qubit.
fn clock(dim: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_fn(dim, |k, _| {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / dim as f64)
    }))
}

/// Cyclic shift `|k> -> |k+1 mod d>`.
fn shift(dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if i == (j + 1) % dim {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

fn pauli(axis: usize) -> CMatrix {
    match axis {
        0 => CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        1 => CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        _ => CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
    }
}

/// `exp(-i theta n.sigma / 2)` for a unit axis `n`.
pub fn qubit_rotation(theta: f64, axis: [f64; 3]) -> Result<CMatrix> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm.is_nan() || norm <= 0.0 || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rotation needs a finite angle and nonzero axis, got {theta}, {axis:?}"
        )));
    }
    let generator = (0..3).fold(CMatrix::zeros(2, 2), |acc, k| {
        acc + pauli(k).scale(axis[k] / norm)
    });
    let (s, co) = (theta / 2.0).sin_cos();
    Ok(CMatrix::identity(2, 2).scale(co) - generator.map(|z| z * c(0.0, s)))
}

/// Canonical Kraus sets, in the order listed:
///
/// * `identity` (no params): `{1}`.
/// * `unitary_rotation`: qubit `[theta]` (z axis) or `[theta, nx, ny, nz]`
///   gives `{exp(-i theta n.sigma/2)}`; any other dimension `[theta]` gives
///   `{diag(exp(-i theta k))}`.
/// * `dephasing [p]`: `{sqrt(1-p) 1, sqrt(p) Z}` with `Z` the clock matrix.
/// * `complete_dephasing` (no params): projectors `|k><k|`, `k = 0..d`.
/// * `depolarizing [p]`: qubit `{sqrt(1-3p/4) 1, sqrt(p/4) X, sqrt(p/4) Y,
///   sqrt(p/4) Z}`; otherwise the `d^2` Weyl operators `X^a Z^b` (a-major)
///   with weights `1 - p + p/d^2` for the identity and `p/d^2` for the rest.
///   Either way the action is `(1-p) rho + p tr(rho) 1/d`.
/// * `amplitude_damping [g]` (qubit only): `{[[1,0],[0,sqrt(1-g)]],
///   [[0,sqrt(g)],[0,0]]}`.
pub fn preset(name: &str, params: &[f64], dim: usize, tol: &Tolerances) -> Result<KrausChannel> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let id = CMatrix::identity(dim, dim);
    let (ops, label) = match name {
        "identity" => {
            no_params(name, params)?;
            (vec![id], "identity".to_string())
        }
        "unitary_rotation" => {
            let op = match (dim, params) {
                (2, [theta]) => qubit_rotation(*theta, [0.0, 0.0, 1.0])?,
                (2, [theta, nx, ny, nz]) => qubit_rotation(*theta, [*nx, *ny, *nz])?,
                (_, [theta]) if dim != 2 && theta.is_finite() => {
                    CMatrix::from_diagonal(&CVector::from_fn(dim, |k, _| {
                        Complex64::from_polar(1.0, -theta * k as f64)
                    }))
                }
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unitary_rotation in dimension {dim} cannot take {params:?}"
                    )))
                }
            };
            (vec![op], format!("unitary_rotation{params:?}"))
        }
        "dephasing" => {
            let p = probability(name, params)?;
            (
                vec![id.scale((1.0 - p).sqrt()), clock(dim).scale(p.sqrt())],
                format!("dephasing({p})"),
            )
        }
        "complete_dephasing" => {
            no_params(name, params)?;
            let ops = (0..dim)
                .map(|k| {
                    let mut e = CMatrix::zeros(dim, dim);
                    e[(k, k)] = c(1.0, 0.0);
                    e
                })
                .collect();
            (ops, "complete_dephasing".to_string())
        }
        "depolarizing" => {
            let p = probability(name, params)?;
            let ops = if dim == 2 {
                let mut ops = vec![id.scale((1.0 - 0.75 * p).sqrt())];
                ops.extend((0..3).map(|k| pauli(k).scale((p / 4.0).sqrt())));
                ops
            } else {
                let d2 = (dim * dim) as f64;
                let (x, z) = (shift(dim), clock(dim));
                let mut ops = Vec::with_capacity(dim * dim);
                let mut xa = id.clone();
                for a in 0..dim {
                    let mut w = xa.clone();
                    for b in 0..dim {
                        let weight = if a == 0 && b == 0 {
                            1.0 - p + p / d2
                        } else {
                            p / d2
                        };
                        ops.push(w.scale(weight.sqrt()));
                        w = &w * &z;
                    }
                    xa = &xa * &x;
                }
                ops
            };
            (ops, format!("depolarizing({p})"))
        }
        "amplitude_damping" => {
            let g = probability(name, params)?;
            if dim != 2 {
                return Err(Error::InvalidParameter(
                    "amplitude_damping is defined for qubits only".into(),
                ));
            }
            let e0 = CMatrix::from_row_slice(
                2,
                2,
                &[
                    c(1.0, 0.0),
                    c(0.0, 0.0),
                    c(0.0, 0.0),
                    c((1.0 - g).sqrt(), 0.0),
                ],
            );
            let e1 = CMatrix::from_row_slice(
                2,
                2,
                &[c(0.0, 0.0), c(g.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            );
            (vec![e0, e1], format!("amplitude_damping({g})"))
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    KrausChannel::new(ops, label, tol)
}

/// Serialized form of a channel: a named preset or explicit Kraus matrices
/// written as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ChannelSpec {
    Preset {
        preset: String,
        #[serde(default)]
        params: Vec<f64>,
    },
    Explicit {
        kraus: Vec<Vec<Vec<[f64; 2]>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

impl ChannelSpec {
    pub fn build(&self, dim: usize, tol: &Tolerances) -> Result<KrausChannel> {
        match self {
            ChannelSpec::Preset {
                preset: name,
                params,
            } => preset(name, params, dim, tol),
            ChannelSpec::Explicit { kraus, label } => {
                let ops = kraus
                    .iter()
                    .map(|rows| matrix_from_pairs(rows))
                    .collect::<Result<Vec<_>>>()?;
                let ch = KrausChannel::new(
                    ops,
                    label.clone().unwrap_or_else(|| "explicit".into()),
                    tol,
                )?;
                check_dim(dim, ch.dim())?;
                Ok(ch)
            }
        }
    }

    pub fn explicit(ch: &KrausChannel) -> Self {
        ChannelSpec::Explicit {
            kraus: ch.ops().iter().map(matrix_to_pairs).collect(),
            label: Some(ch.label().to_string()),
        }
    }
}
