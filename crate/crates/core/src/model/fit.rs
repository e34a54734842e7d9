use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::objective::{objective, ObjectiveTerms};
use super::state::{init_state, Components, ModelState};
use super::updates::{update_alpha, update_fstar, update_fv, update_h, update_s, update_w, update_xhat};
use crate::dataset::{MaskMatrix, MultiViewDataset};
use crate::error::{ClimError, Result};
use crate::numkit::Matrix;

/// Sub-updates in the order they run inside one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    W,
    Fv,
    Fstar,
    S,
    H,
    Alpha,
    Xhat,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::W,
        Stage::Fv,
        Stage::Fstar,
        Stage::S,
        Stage::H,
        Stage::Alpha,
        Stage::Xhat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::W => "W",
            Stage::Fv => "Fv",
            Stage::Fstar => "Fstar",
            Stage::S => "S",
            Stage::H => "H",
            Stage::Alpha => "alpha",
            Stage::Xhat => "Xhat",
        }
    }
}

/// Runs one sub-update.
pub fn apply_stage(
    stage: Stage,
    state: &mut ModelState,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    comps: &Components,
) -> Result<()> {
    match stage {
        Stage::W => update_w(state, cfg),
        Stage::Fv => update_fv(state, cfg, comps),
        Stage::Fstar => update_fstar(state, cfg, comps),
        Stage::S => update_s(state, cfg, comps),
        Stage::H => update_h(state, cfg, comps),
        Stage::Alpha => update_alpha(state, cfg, comps),
        Stage::Xhat => update_xhat(state, masks, cfg, comps),
    }
}

/// Largest violation of the hard constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Worst `|1ᵀs − 1|` or negative entry over all graph columns.
    pub simplex: f64,
    /// Graph columns without exactly k positive weights or with a self-edge.
    pub sparsity_errors: usize,
    pub alpha: f64,
    /// Most negative entry of `F*` (as a positive number).
    pub fstar_negative: f64,
    /// Observed entries of `X^` that differ from the data.
    pub observed_mismatch: usize,
}

impl ConstraintReport {
    pub fn max_violation(&self) -> f64 {
        let counts = if self.sparsity_errors + self.observed_mismatch > 0 { 1.0 } else { 0.0 };
        self.simplex.max(self.alpha).max(self.fstar_negative).max(counts)
    }
}

fn graph_violations(g: &Matrix, k: usize, rep: &mut ConstraintReport) {
    for j in 0..g.ncols() {
        let col = g.column(j);
        rep.simplex = rep.simplex.max((col.sum() - 1.0).abs());
        let min = col.min();
        if min < 0.0 {
            rep.simplex = rep.simplex.max(-min);
        }
        if col.iter().filter(|&&x| x > 0.0).count() != k || g[(j, j)] != 0.0 {
            rep.sparsity_errors += 1;
        }
    }
}

/// Checks every hard constraint, comparing observed entries against `data`.
pub fn check_constraints(
    state: &ModelState,
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    k: usize,
) -> ConstraintReport {
    let mut rep = ConstraintReport::default();
    for s in &state.s {
        graph_violations(s, k, &mut rep);
    }
    graph_violations(&state.h, k, &mut rep);
    rep.alpha = (state.alpha.sum() - 1.0).abs().max(-state.alpha.min().min(0.0));
    rep.fstar_negative = -state.fstar.min().min(0.0);
    for v in 0..state.n_views() {
        let x = data.view(v);
        let m = masks.view(v);
        rep.observed_mismatch += x
            .iter()
            .zip(state.xhat[v].iter())
            .zip(m.iter())
            .filter(|((a, b), &o)| o && a.to_bits() != b.to_bits())
            .count();
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub terms: ObjectiveTerms,
    pub relative_change: f64,
    pub max_violation: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitTrace {
    pub initial_objective: f64,
    pub initial_terms: ObjectiveTerms,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub spectral_fallback: bool,
}

impl FitTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// Objective sequence including the initial value.
    pub fn objectives(&self) -> Vec<f64> {
        std::iter::once(self.initial_objective)
            .chain(self.rows.iter().map(|r| r.objective))
            .collect()
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| ClimError::parse(path, e.to_string()))?;
        let mut header = vec!["iteration".to_string(), "objective".to_string()];
        header.extend(ObjectiveTerms::NAMES.iter().map(|s| s.to_string()));
        header.extend(["relative_change", "max_violation", "seconds"].map(String::from));
        let io_err = |e: csv::Error| ClimError::parse(path, e.to_string());
        w.write_record(&header).map_err(io_err)?;
        let mut rec = vec!["0".to_string(), format!("{:.16e}", self.initial_objective)];
        rec.extend(self.initial_terms.values().iter().map(|x| format!("{x:.16e}")));
        rec.extend(["".to_string(), "".to_string(), "0".to_string()]);
        w.write_record(&rec).map_err(io_err)?;
        for r in &self.rows {
            let mut rec = vec![r.iteration.to_string(), format!("{:.16e}", r.objective)];
            rec.extend(r.terms.values().iter().map(|x| format!("{x:.16e}")));
            rec.push(format!("{:.16e}", r.relative_change));
            rec.push(format!("{:.16e}", r.max_violation));
            rec.push(format!("{:.6}", r.seconds));
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| ClimError::io(path, e))
    }
}

/// A fit that stopped on an error; carries the trace recorded so far.
#[derive(Debug, thiserror::Error)]
#[error("{source}")]
pub struct FitFailure {
    #[source]
    pub source: ClimError,
    pub trace: FitTrace,
}

impl From<ClimError> for FitFailure {
    fn from(source: ClimError) -> Self {
        Self {
            source,
            trace: FitTrace::default(),
        }
    }
}

pub type Observer<'a> = dyn FnMut(Stage, &ModelState) + 'a;

/// Full fit from the default initialization.
pub fn fit(
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    comps: &Components,
) -> std::result::Result<(ModelState, FitTrace), FitFailure> {
    let mut state = init_state(data, masks, cfg)?;
    let trace = run(&mut state, data, masks, cfg, comps, &mut |_, _| {})?;
    Ok((state, trace))
}

/// Fit from an explicit starting state, calling `observer` after every sub-update.
pub fn fit_from(
    state: &mut ModelState,
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    comps: &Components,
    observer: &mut Observer<'_>,
) -> std::result::Result<FitTrace, FitFailure> {
    cfg.validate(state.n_samples())?;
    state.check_shapes()?;
    run(state, data, masks, cfg, comps, observer)
}

fn run(
    state: &mut ModelState,
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    comps: &Components,
    observer: &mut Observer<'_>,
) -> std::result::Result<FitTrace, FitFailure> {
    let init_terms = objective(state, cfg, comps);
    let mut trace = FitTrace {
        initial_objective: init_terms.total(),
        initial_terms: init_terms,
        spectral_fallback: state.spectral_fallback,
        ..FitTrace::default()
    };
    let mut prev = trace.initial_objective;
    let start = Instant::now();
    for _ in 0..cfg.max_iter {
        let iteration = state.iteration + 1;
        for stage in Stage::ORDER {
            if let Err(e) = apply_stage(stage, state, masks, cfg, comps) {
                return Err(FitFailure {
                    source: ClimError::Update {
                        stage: stage.name(),
                        iteration,
                        source: Box::new(e),
                    },
                    trace,
                });
            }
            observer(stage, state);
        }
        state.iteration = iteration;
        let terms = objective(state, cfg, comps);
        let value = terms.total();
        if !value.is_finite() {
            return Err(FitFailure {
                source: crate::numkit::NumError::NonFinite("objective").into(),
                trace,
            });
        }
        let rel = (prev - value).abs() / prev.abs().max(1e-12);
        let violation = check_constraints(state, data, masks, cfg.k).max_violation();
        debug!("iteration {iteration}: objective {value:.6e} (rel change {rel:.3e})");
        trace.rows.push(TraceRow {
            iteration,
            objective: value,
            terms,
            relative_change: rel,
            max_violation: violation,
            seconds: start.elapsed().as_secs_f64(),
        });
        prev = value;
        if rel < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    info!(
        "fit stopped after {} iterations (converged: {}), objective {:.6e}",
        trace.iterations(),
        trace.converged,
        trace.final_objective()
    );
    Ok(trace)
}
