//! Resumable snapshots: one CSV per matrix plus a JSON header for everything else.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::state::{row_reweighting, Components, ModelState};
use crate::dataset::{read_mask_csv, read_matrix_csv, write_mask_csv, write_matrix_csv, MaskMatrix};
use crate::error::{ClimError, Result};
use crate::numkit::{AdamState, Vector};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub method: String,
    pub n_views: usize,
    pub iteration: usize,
    pub converged: bool,
    pub spectral_fallback: bool,
    pub config: FitConfig,
    pub components: Components,
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub adam: Vec<AdamState>,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub state: ModelState,
    pub masks: MaskMatrix,
}

pub fn save_checkpoint(
    dir: &Path,
    method: &str,
    state: &ModelState,
    masks: &MaskMatrix,
    cfg: &FitConfig,
    comps: &Components,
    converged: bool,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| ClimError::io(dir, e))?;
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        method: method.to_string(),
        n_views: state.n_views(),
        iteration: state.iteration,
        converged,
        spectral_fallback: state.spectral_fallback,
        config: cfg.clone(),
        components: *comps,
        alpha: state.alpha.as_slice().to_vec(),
        gamma: state.gamma.as_slice().to_vec(),
        xi: state.xi.iter().map(|x| x.as_slice().to_vec()).collect(),
        adam: state.adam.clone(),
    };
    for v in 0..state.n_views() {
        write_matrix_csv(&dir.join(format!("xhat_{v}.csv")), &state.xhat[v])?;
        write_matrix_csv(&dir.join(format!("w_{v}.csv")), &state.w[v])?;
        write_matrix_csv(&dir.join(format!("fv_{v}.csv")), &state.fv[v])?;
        write_matrix_csv(&dir.join(format!("s_{v}.csv")), &state.s[v])?;
        write_mask_csv(&dir.join(format!("mask_{v}.csv")), masks.view(v))?;
    }
    write_matrix_csv(&dir.join("fstar.csv"), &state.fstar)?;
    write_matrix_csv(&dir.join("h.csv"), &state.h)?;
    let path = dir.join("header.json");
    let text = serde_json::to_string_pretty(&header).map_err(|e| ClimError::parse(&path, e.to_string()))?;
    fs::write(&path, text).map_err(|e| ClimError::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join("header.json");
    let text = fs::read_to_string(&path).map_err(|e| ClimError::io(&path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&text).map_err(|e| ClimError::parse(&path, e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ClimError::parse(&path, format!("unsupported format version {}", header.format_version)));
    }
    let nv = header.n_views;
    let read_views = |prefix: &str| -> Result<Vec<_>> {
        (0..nv).map(|v| read_matrix_csv(&dir.join(format!("{prefix}_{v}.csv")))).collect()
    };
    let xhat = read_views("xhat")?;
    let w = read_views("w")?;
    let fv = read_views("fv")?;
    let s = read_views("s")?;
    let masks = MaskMatrix::new(
        (0..nv)
            .map(|v| read_mask_csv(&dir.join(format!("mask_{v}.csv"))))
            .collect::<Result<_>>()?,
    );
    let drow = w.iter().map(|w| row_reweighting(w, header.config.eps_dv)).collect();
    let state = ModelState {
        xhat,
        w,
        fv,
        fstar: read_matrix_csv(&dir.join("fstar.csv"))?,
        s,
        h: read_matrix_csv(&dir.join("h.csv"))?,
        alpha: Vector::from_vec(header.alpha.clone()),
        drow,
        adam: header.adam.clone(),
        xi: header.xi.iter().map(|x| Vector::from_vec(x.clone())).collect(),
        gamma: Vector::from_vec(header.gamma.clone()),
        iteration: header.iteration,
        spectral_fallback: header.spectral_fallback,
    };
    state.check_shapes()?;
    Ok(Checkpoint { header, state, masks })
}
