use log::warn;
use serde::{Deserialize, Serialize};

use super::state::ModelState;
use crate::error::{ClimError, Result};

/// Per-view feature ranking by the row norms of `W^v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub ratio: f64,
    /// Feature indices ordered by decreasing score (ties by index).
    pub rankings: Vec<Vec<usize>>,
    pub scores: Vec<Vec<f64>>,
    /// The first `round(ratio * d_v)` (at least one) ranked features per view.
    pub selected: Vec<Vec<usize>>,
}

pub fn rank_by_scores(scores: &[Vec<f64>], ratio: f64) -> Result<SelectionResult> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(ClimError::Config(format!("selection ratio must lie in (0, 1], got {ratio}")));
    }
    let mut rankings = Vec::with_capacity(scores.len());
    let mut selected = Vec::with_capacity(scores.len());
    for (v, s) in scores.iter().enumerate() {
        if s.iter().any(|x| !x.is_finite()) {
            return Err(crate::numkit::NumError::NonFinite("feature scores").into());
        }
        if s.windows(2).all(|w| w[0] == w[1]) && s.len() > 1 {
            warn!("all feature scores of view {v} are tied; ranking falls back to index order");
        }
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
        let keep = ((ratio * s.len() as f64).round() as usize).clamp(1, s.len());
        selected.push(order[..keep].to_vec());
        rankings.push(order);
    }
    Ok(SelectionResult {
        ratio,
        rankings,
        scores: scores.to_vec(),
        selected,
    })
}

pub fn rank_features(state: &ModelState, ratio: f64) -> Result<SelectionResult> {
    let scores: Vec<Vec<f64>> = state
        .w
        .iter()
        .map(|w| w.row_iter().map(|r| r.norm()).collect())
        .collect();
    rank_by_scores(&scores, ratio)
}
