//! Decoupled impute-then-select baseline and module ablations of the joint model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{mean_impute_all, MaskMatrix, MultiViewDataset};
use crate::error::{ClimError, Result};
use crate::model::{
    fit_from, init_state, rank_by_scores, Components, FitConfig, FitFailure, FitTrace, ModelState, SelectionResult,
    Stage,
};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantKind {
    /// The joint model with every module.
    #[serde(rename = "clim_fs")]
    Full,
    /// Mean imputation, then independent per-view factorization with l2,1 selection.
    #[serde(rename = "two_stage")]
    TwoStage,
    /// No adaptive imputation (missing entries stay mean-filled).
    #[serde(rename = "clim_fs_i")]
    ClimFsI,
    /// No cluster-structure Laplacian on the consensus factor.
    #[serde(rename = "clim_fs_ii")]
    ClimFsII,
    /// No graph learning (similarity graphs and view weights frozen at init, their terms dropped).
    #[serde(rename = "clim_fs_iii")]
    ClimFsIII,
}

impl VariantKind {
    pub const ALL: [VariantKind; 5] = [
        VariantKind::Full,
        VariantKind::TwoStage,
        VariantKind::ClimFsI,
        VariantKind::ClimFsII,
        VariantKind::ClimFsIII,
    ];
    pub const ABLATIONS: [VariantKind; 4] = [
        VariantKind::Full,
        VariantKind::ClimFsI,
        VariantKind::ClimFsII,
        VariantKind::ClimFsIII,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantKind::Full => "clim_fs",
            VariantKind::TwoStage => "two_stage",
            VariantKind::ClimFsI => "clim_fs_i",
            VariantKind::ClimFsII => "clim_fs_ii",
            VariantKind::ClimFsIII => "clim_fs_iii",
        }
    }

    /// Active modules of the joint-model variants (`None` for the two-stage baseline).
    pub fn components(self) -> Option<Components> {
        let full = Components::FULL;
        match self {
            VariantKind::Full => Some(full),
            VariantKind::TwoStage => None,
            VariantKind::ClimFsI => Some(Components { imputation: false, ..full }),
            VariantKind::ClimFsII => Some(Components { cluster_structure: false, ..full }),
            VariantKind::ClimFsIII => Some(Components { graph_learning: false, ..full }),
        }
    }
}

impl fmt::Display for VariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VariantKind {
    type Err = ClimError;

    fn from_str(s: &str) -> Result<Self> {
        VariantKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ClimError::Config(format!("unknown method {s:?}")))
    }
}

/// Components of a single-view factorization with everything but W/F* switched off.
pub const TWO_STAGE_COMPONENTS: Components = Components {
    imputation: false,
    cluster_structure: false,
    graph_learning: false,
    view_specific: false,
};

/// Outcome of one method: fitted states (one per view for the two-stage baseline),
/// their traces, and the imputed views the selection is evaluated on.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub kind: VariantKind,
    pub states: Vec<ModelState>,
    pub traces: Vec<FitTrace>,
    pub imputed: Vec<Matrix>,
}

impl MethodRun {
    pub fn scores(&self) -> Vec<Vec<f64>> {
        self.states
            .iter()
            .flat_map(|s| s.w.iter().map(|w| w.row_iter().map(|r| r.norm()).collect::<Vec<_>>()))
            .collect()
    }

    pub fn select(&self, ratio: f64) -> Result<SelectionResult> {
        rank_by_scores(&self.scores(), ratio)
    }

    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged)
    }
}

impl MethodRun {
    /// Reassembles a run from its fitted parts (see [`method_parts`]).
    pub fn from_parts(kind: VariantKind, states: Vec<ModelState>, traces: Vec<FitTrace>) -> Self {
        let imputed = if kind.components().is_some() {
            states.first().map(|s| s.xhat.clone()).unwrap_or_default()
        } else {
            states.iter().map(|s| s.xhat[0].clone()).collect()
        };
        Self {
            kind,
            states,
            traces,
            imputed,
        }
    }
}

/// One underlying fit of a method: the data it sees, its masks and active modules.
#[derive(Debug, Clone)]
pub struct FitPart {
    pub data: MultiViewDataset,
    pub masks: MaskMatrix,
    pub components: Components,
}

/// The fits a method consists of: one joint fit, or one mean-imputed single-view fit
/// per view for the two-stage baseline.
pub fn method_parts(kind: VariantKind, data: &MultiViewDataset, masks: &MaskMatrix) -> Result<Vec<FitPart>> {
    masks.check_shapes(data)?;
    if let Some(components) = kind.components() {
        return Ok(vec![FitPart {
            data: data.clone(),
            masks: masks.clone(),
            components,
        }]);
    }
    mean_impute_all(data, masks)
        .into_iter()
        .map(|x| {
            let single = MultiViewDataset::from_views(vec![x], data.labels().map(<[usize]>::to_vec))?;
            Ok(FitPart {
                masks: MaskMatrix::all_observed(&single),
                data: single,
                components: TWO_STAGE_COMPONENTS,
            })
        })
        .collect()
}

/// Called after every sub-update with the index of the part being fitted, the data that
/// part sees, and its masks.
pub type RunObserver<'a> = dyn FnMut(usize, Stage, &ModelState, &MultiViewDataset, &MaskMatrix) + 'a;

/// Mean-imputes each view, then fits each view on its own with imputation and graphs frozen.
pub fn run_two_stage(
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
) -> std::result::Result<MethodRun, FitFailure> {
    run_variant_observed(VariantKind::TwoStage, data, masks, cfg, &mut |_, _, _, _, _| {})
}

pub fn run_variant(
    kind: VariantKind,
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
) -> std::result::Result<MethodRun, FitFailure> {
    run_variant_observed(kind, data, masks, cfg, &mut |_, _, _, _, _| {})
}

/// [`run_variant`] with a hook after every sub-update of every part.
pub fn run_variant_observed(
    kind: VariantKind,
    data: &MultiViewDataset,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    observer: &mut RunObserver<'_>,
) -> std::result::Result<MethodRun, FitFailure> {
    let parts = method_parts(kind, data, masks)?;
    let mut states = Vec::with_capacity(parts.len());
    let mut traces = Vec::with_capacity(parts.len());
    for (p, part) in parts.iter().enumerate() {
        let mut state = init_state(&part.data, &part.masks, cfg)?;
        let trace = fit_from(&mut state, &part.data, &part.masks, cfg, &part.components, &mut |stage, s: &ModelState| {
            observer(p, stage, s, &part.data, &part.masks)
        })?;
        states.push(state);
        traces.push(trace);
    }
    Ok(MethodRun::from_parts(kind, states, traces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for k in VariantKind::ALL {
            assert_eq!(k.name().parse::<VariantKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("clim".parse::<VariantKind>().is_err());
    }
}
