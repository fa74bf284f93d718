use std::collections::BTreeMap;
use std::path::PathBuf;

use holonomy::ensemble::{
    average_holonomy_report, average_phase, representation_dependence_demo, Decomposition,
    DEFAULT_MIN_WEIGHT,
};
use holonomy::interferometry::{run_protocol, MIN_GRID_SIZE};
use holonomy::phases::{pancharatnam_phase, regularize, uhlmann_holonomy};
use holonomy::trajectories::{
    derive_seeds, enumerate_mixed, enumerate_pure, sample, EnumerateOptions, InitialState,
    TrajectoryIndex, DEFAULT_ENUMERATION_CAP,
};
use holonomy::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::failure::Failure;
use crate::output::{cell, matrix_pairs, opt_cell, pair, Emitter};
use crate::scenario::Scenario;

/// Flags shared by the subcommands; unset values fall back to the scenario
/// options and then to library defaults.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub min_weight: Option<f64>,
    pub epsilon: Option<f64>,
    pub close_loop: Option<bool>,
}

struct Settings {
    min_weight: f64,
    epsilon: Option<f64>,
    close_loop: bool,
}

fn settings(sc: &Scenario, flags: &Flags) -> Result<Settings, Failure> {
    let min_weight = flags
        .min_weight
        .or(sc.options.min_weight)
        .unwrap_or(DEFAULT_MIN_WEIGHT);
    if !(min_weight.is_finite() && min_weight >= 0.0) {
        return Err(Failure::invalid(Error::InvalidParameter(format!(
            "min weight must be finite and non-negative, got {min_weight}"
        ))));
    }
    let epsilon = flags.epsilon.or(sc.options.epsilon);
    if let Some(eps) = epsilon {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Failure::invalid(Error::InvalidParameter(format!(
                "epsilon must lie in [0, 1], got {eps}"
            ))));
        }
    }
    Ok(Settings {
        min_weight,
        epsilon,
        close_loop: flags.close_loop.or(sc.options.close_loop).unwrap_or(false),
    })
}

fn enumerate_options(min_weight: f64) -> EnumerateOptions {
    EnumerateOptions {
        min_weight,
        cap: DEFAULT_ENUMERATION_CAP,
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    index: String,
    weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    norms: Option<Vec<f64>>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holonomy: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holonomy_trace: Option<[f64; 2]>,
    /// Overlap (pure) or state (mixed) position where the phase broke down.
    #[serde(skip_serializing_if = "Option::is_none")]
    failed_at: Option<usize>,
}

#[derive(Serialize)]
struct Totals {
    trajectories: usize,
    total_weight: f64,
    retained_weight: f64,
    excluded_weight: f64,
    undefined_weight: f64,
}

enum Outcome {
    Elided,
    Phase(holonomy::operators::PhaseFactor),
    Holonomy(holonomy::operators::CMatrix),
    Undefined(usize),
}

pub fn enumerate(sc: &Scenario, flags: &Flags, csv: bool) -> Result<String, Failure> {
    let s = settings(sc, flags)?;
    let opts = enumerate_options(s.min_weight);
    let mut out = Emitter::new(&sc.hash, csv);
    let (rows, total_weight, retained_weight) = match &sc.initial {
        InitialState::Pure(psi) => {
            let en = enumerate_pure(&sc.seq, psi, &opts, &sc.tol).map_err(Failure::compute)?;
            let outcomes = en
                .entries
                .par_iter()
                .map(|e| match &e.trajectory {
                    None => Ok(Outcome::Elided),
                    Some(t) => match pancharatnam_phase(&t.states, &sc.tol) {
                        Ok(g) => Ok(Outcome::Phase(g)),
                        Err(Error::ZeroPhaseUndefined { position, .. }) => {
                            Ok(Outcome::Undefined(position))
                        }
                        Err(e) => Err(e),
                    },
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::compute)?;
            let rows: Vec<_> = en
                .entries
                .iter()
                .zip(outcomes)
                .map(|(e, o)| {
                    (
                        e.index.clone(),
                        e.weight,
                        e.trajectory.as_ref().map(|t| t.norms()),
                        o,
                    )
                })
                .collect();
            (rows, en.total_weight, en.retained_weight)
        }
        InitialState::Mixed(rho) => {
            let en = enumerate_mixed(&sc.seq, rho, &opts, &sc.tol).map_err(Failure::compute)?;
            let outcomes = en
                .entries
                .par_iter()
                .map(|e| {
                    let Some(t) = &e.trajectory else {
                        return Ok(Outcome::Elided);
                    };
                    let states = match s.epsilon {
                        Some(eps) => regularize(&t.states, eps, &sc.tol)?,
                        None => t.states.clone(),
                    };
                    match uhlmann_holonomy(&states, s.close_loop, &sc.tol) {
                        Ok(h) => Ok(Outcome::Holonomy(h.matrix().clone())),
                        Err(Error::SingularOperator { position, .. }) => {
                            Ok(Outcome::Undefined(position.unwrap_or(0)))
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::compute)?;
            let rows: Vec<_> = en
                .entries
                .iter()
                .zip(outcomes)
                .map(|(e, o)| {
                    (
                        e.index.clone(),
                        e.weight,
                        e.trajectory.as_ref().map(|t| t.norms()),
                        o,
                    )
                })
                .collect();
            (rows, en.total_weight, en.retained_weight)
        }
    };

    let mixed = matches!(sc.initial, InitialState::Mixed(_));
    if mixed {
        out.header(&[
            "index",
            "weight",
            "final_trace",
            "status",
            "trace_re",
            "trace_im",
        ]);
    } else {
        out.header(&[
            "index",
            "weight",
            "final_norm",
            "status",
            "phase_re",
            "phase_im",
        ]);
    }
    let mut undefined_weight = 0.0;
    for (index, weight, norms, outcome) in &rows {
        let mut row = TrajectoryRow {
            index: index.to_string(),
            weight: *weight,
            norms: norms.clone(),
            status: "ok",
            phase: None,
            holonomy: None,
            holonomy_trace: None,
            failed_at: None,
        };
        let value = match outcome {
            Outcome::Elided => {
                row.status = "elided";
                None
            }
            Outcome::Phase(g) => {
                row.phase = Some(pair(g.value()));
                Some(g.value())
            }
            Outcome::Holonomy(h) => {
                row.holonomy = Some(matrix_pairs(h));
                row.holonomy_trace = Some(pair(h.trace()));
                Some(h.trace())
            }
            Outcome::Undefined(at) => {
                row.status = if mixed { "singular" } else { "undefined" };
                row.failed_at = Some(*at);
                undefined_weight += weight;
                None
            }
        };
        out.row(&[
            csv_text(&row.index),
            cell(row.weight),
            opt_cell(row.norms.as_ref().and_then(|n| n.last().copied())),
            cell(row.status),
            opt_cell(value.map(|z| z.re)),
            opt_cell(value.map(|z| z.im)),
        ]);
        out.record("trajectory", &row);
    }
    let totals = Totals {
        trajectories: rows.len(),
        total_weight,
        retained_weight,
        excluded_weight: total_weight - retained_weight,
        undefined_weight,
    };
    out.row(&[
        "total".into(),
        cell(total_weight),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ]);
    out.record("totals", &totals);
    Ok(out.finish())
}

#[derive(Serialize)]
struct SampleRow {
    sample: usize,
    seed: u64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dead_end_step: Option<usize>,
}

#[derive(Serialize)]
struct FrequencyRow {
    index: String,
    count: u64,
    empirical: f64,
    exact: f64,
    sigma: f64,
    /// `|empirical - exact| / sigma`; absent when `sigma` is zero.
    z: Option<f64>,
}

#[derive(Serialize)]
struct SampleSummary {
    n: usize,
    master_seed: u64,
    completed: usize,
    dead_ends: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_z: Option<f64>,
}

pub fn sample_cmd(
    sc: &Scenario,
    n: usize,
    seed: Option<u64>,
    csv: bool,
) -> Result<String, Failure> {
    let psi = sc.pure_initial("sample")?;
    if n == 0 {
        return Err(Failure::invalid(Error::InvalidParameter(
            "sample count must be at least 1".into(),
        )));
    }
    let master = seed.or(sc.options.seed).unwrap_or(0);
    let seeds = derive_seeds(master, n);
    let draws = seeds
        .par_iter()
        .map(|&s| match sample(&sc.seq, psi, s, &sc.tol) {
            Ok(t) => Ok(Ok((t.index, t.weight))),
            Err(Error::DeadEnd { step }) => Ok(Err(step)),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::compute)?;

    let mut out = Emitter::new(&sc.hash, csv);
    let mut counts: BTreeMap<TrajectoryIndex, u64> = BTreeMap::new();
    let mut dead_ends = 0;
    for (i, (draw, &s)) in draws.iter().zip(&seeds).enumerate() {
        let row = match draw {
            Ok((index, weight)) => {
                *counts.entry(index.clone()).or_default() += 1;
                SampleRow {
                    sample: i,
                    seed: s,
                    status: "ok",
                    index: Some(index.to_string()),
                    weight: Some(*weight),
                    dead_end_step: None,
                }
            }
            Err(step) => {
                dead_ends += 1;
                SampleRow {
                    sample: i,
                    seed: s,
                    status: "dead_end",
                    index: None,
                    weight: None,
                    dead_end_step: Some(*step),
                }
            }
        };
        out.record("sample", &row);
    }
    let completed = n - dead_ends;

    let mut max_z = None;
    out.header(&["index", "count", "empirical", "exact", "sigma", "z"]);
    if sc.seq.trajectory_count() <= DEFAULT_ENUMERATION_CAP as u128 && completed > 0 {
        let en = enumerate_pure(&sc.seq, psi, &enumerate_options(0.0), &sc.tol)
            .map_err(Failure::compute)?;
        let total = completed as f64;
        let mut worst: f64 = 0.0;
        for e in &en.entries {
            let count = counts.get(&e.index).copied().unwrap_or(0);
            let empirical = count as f64 / total;
            let p = e.weight.clamp(0.0, 1.0);
            let sigma = (p * (1.0 - p) / total).sqrt();
            let deviation = (empirical - e.weight).abs();
            let z = if sigma > 0.0 {
                Some(deviation / sigma)
            } else if deviation == 0.0 {
                Some(0.0)
            } else {
                None
            };
            worst = match z {
                Some(z) => worst.max(z),
                None => f64::INFINITY,
            };
            let row = FrequencyRow {
                index: e.index.to_string(),
                count,
                empirical,
                exact: e.weight,
                sigma,
                z,
            };
            out.row(&[
                csv_text(&row.index),
                cell(count),
                cell(empirical),
                cell(e.weight),
                cell(sigma),
                opt_cell(z),
            ]);
            out.record("frequency", &row);
        }
        max_z = worst.is_finite().then_some(worst);
    }
    out.record(
        "sample_summary",
        &SampleSummary {
            n,
            master_seed: master,
            completed,
            dead_ends,
            max_z,
        },
    );
    Ok(out.finish())
}

#[derive(Serialize)]
struct StepRow {
    step: usize,
    kind: &'static str,
    estimated_phase: [f64; 2],
    exact_phase: [f64; 2],
    abs_error: f64,
    visibility: f64,
}

#[derive(Serialize)]
struct ProtocolRow {
    index: String,
    weight: f64,
    grid_size: usize,
    product: [f64; 2],
    geometric_phase: [f64; 2],
    abs_error: f64,
}

/// Result of `interfere`: stdout text plus fringe files to write.
pub struct InterfereOutput {
    pub stdout: String,
    pub fringes: Vec<(PathBuf, Vec<u8>)>,
}

pub fn interfere(
    sc: &Scenario,
    trajectory: Option<&str>,
    grid: Option<usize>,
    fringe_dir: Option<&PathBuf>,
    csv: bool,
) -> Result<InterfereOutput, Failure> {
    let psi = sc.pure_initial("interfere")?;
    let idx = match trajectory {
        Some(text) => text.parse::<TrajectoryIndex>().map_err(Failure::invalid)?,
        None => TrajectoryIndex::new(vec![0; sc.seq.len()]),
    };
    idx.validate(&sc.seq).map_err(Failure::invalid)?;
    let grid_size = grid.unwrap_or_else(|| sc.default_grid());
    if grid_size < MIN_GRID_SIZE {
        return Err(Failure::invalid(Error::InvalidParameter(format!(
            "grid size must be at least {MIN_GRID_SIZE}, got {grid_size}"
        ))));
    }
    let run = run_protocol(&sc.seq, psi, &idx, grid_size, &sc.tol).map_err(Failure::compute)?;

    let mut out = Emitter::new(&sc.hash, csv);
    out.header(&[
        "step",
        "kind",
        "estimated_re",
        "estimated_im",
        "exact_re",
        "exact_im",
        "abs_error",
        "visibility",
    ]);
    let n = sc.seq.len();
    for r in &run.records {
        let row = StepRow {
            step: r.step,
            kind: if r.step <= n { "forward" } else { "closing" },
            estimated_phase: pair(r.estimated_phase.value()),
            exact_phase: pair(r.exact_phase.value()),
            abs_error: r.abs_error,
            visibility: r.visibility,
        };
        out.row(&[
            cell(row.step),
            cell(row.kind),
            cell(row.estimated_phase[0]),
            cell(row.estimated_phase[1]),
            cell(row.exact_phase[0]),
            cell(row.exact_phase[1]),
            cell(row.abs_error),
            cell(row.visibility),
        ]);
        out.record("step", &row);
    }
    let summary = ProtocolRow {
        index: idx.to_string(),
        weight: run.weight,
        grid_size,
        product: pair(run.product.value()),
        geometric_phase: pair(run.geometric_phase.value()),
        abs_error: run.abs_error(),
    };
    out.row(&[
        "product".into(),
        "protocol".into(),
        cell(summary.product[0]),
        cell(summary.product[1]),
        cell(summary.geometric_phase[0]),
        cell(summary.geometric_phase[1]),
        cell(summary.abs_error),
        String::new(),
    ]);
    out.record("protocol", &summary);

    let mut fringes = Vec::new();
    if let Some(dir) = fringe_dir {
        for (r, scan) in run.records.iter().zip(&run.scans) {
            let mut bytes = Vec::new();
            scan.write_columns(&mut bytes).expect("writing to memory");
            fringes.push((dir.join(format!("fringe_step_{:02}.dat", r.step)), bytes));
        }
    }
    Ok(InterfereOutput {
        stdout: out.finish(),
        fringes,
    })
}

#[derive(Serialize)]
struct AverageRow {
    label: String,
    gamma: [f64; 2],
    modulus: f64,
    trajectories: usize,
    retained_weight: f64,
    excluded_weight: f64,
    undefined_weight: f64,
}

#[derive(Serialize)]
struct GapRow<'a> {
    a: &'a str,
    b: &'a str,
    gap: f64,
}

#[derive(Serialize)]
struct ActionRow {
    max_deviation: f64,
}

#[derive(Serialize)]
struct HolonomyAverageRow {
    exploratory: bool,
    operator: Vec<Vec<[f64; 2]>>,
    singular_values: Vec<f64>,
    trajectories: usize,
    retained_weight: f64,
    excluded_weight: f64,
    close_loop: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

pub fn average(
    sc: &Scenario,
    flags: &Flags,
    decompositions: Option<Vec<Decomposition>>,
    csv: bool,
) -> Result<String, Failure> {
    let s = settings(sc, flags)?;
    let mut out = Emitter::new(&sc.hash, csv);
    let psi = match &sc.initial {
        InitialState::Pure(psi) => psi,
        InitialState::Mixed(rho) => {
            if decompositions.is_some() {
                return Err(Failure::invalid(Error::InvalidParameter(
                    "mixers apply to pure initial states only".into(),
                )));
            }
            let report = average_holonomy_report(
                &sc.seq,
                rho,
                s.min_weight,
                s.epsilon,
                s.close_loop,
                &sc.tol,
            )
            .map_err(Failure::compute)?;
            out.header(&["singular_value"]);
            for sv in &report.singular_values {
                out.row(&[cell(sv)]);
            }
            out.record(
                "holonomy_average",
                &HolonomyAverageRow {
                    exploratory: true,
                    operator: matrix_pairs(&report.operator),
                    singular_values: report.singular_values.clone(),
                    trajectories: report.trajectories,
                    retained_weight: report.retained_weight,
                    excluded_weight: report.excluded_weight,
                    close_loop: s.close_loop,
                    epsilon: s.epsilon,
                },
            );
            return Ok(out.finish());
        }
    };

    let (phases, gaps, deviation) = match decompositions {
        None => {
            let avg =
                average_phase(&sc.seq, psi, s.min_weight, &sc.tol).map_err(Failure::compute)?;
            (vec![avg], Vec::new(), None)
        }
        Some(decs) => {
            let report = representation_dependence_demo(&sc.seq, psi, &decs, s.min_weight, &sc.tol)
                .map_err(Failure::compute)?;
            (report.phases, report.gaps, Some(report.action_deviation))
        }
    };
    out.header(&[
        "label",
        "gamma_re",
        "gamma_im",
        "modulus",
        "excluded_weight",
    ]);
    for p in &phases {
        let row = AverageRow {
            label: p.label.clone(),
            gamma: pair(p.value),
            modulus: p.visibility(),
            trajectories: p.trajectories,
            retained_weight: p.retained_weight,
            excluded_weight: p.excluded_weight,
            undefined_weight: p.undefined_weight,
        };
        out.row(&[
            csv_text(&row.label),
            cell(row.gamma[0]),
            cell(row.gamma[1]),
            cell(row.modulus),
            cell(row.excluded_weight),
        ]);
        out.record("average", &row);
    }
    for &(i, j, gap) in &gaps {
        out.record(
            "gap",
            &GapRow {
                a: &phases[i].label,
                b: &phases[j].label,
                gap,
            },
        );
    }
    if let Some(max_deviation) = deviation {
        out.record("action", &ActionRow { max_deviation });
    }
    Ok(out.finish())
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
