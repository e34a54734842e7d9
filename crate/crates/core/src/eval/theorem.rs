//! Runtime checks of the cluster-preservation and neighborhood-preservation bounds.

use serde::{Deserialize, Serialize};

use crate::dataset::MaskMatrix;
use crate::model::{cluster_laplacian, reconstruction_error, FitConfig, ModelState};
use crate::numkit::{l1_norm, Matrix};

const SAME_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMargin {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub bound: f64,
    /// Positive when the bound holds.
    pub margin: f64,
}

/// Cluster-preservation check for one view, over pairs of samples with missing entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewClusterCheck {
    pub view: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub fv_l1: f64,
    pub mu: f64,
    pub imputed_samples: usize,
    pub same_cluster_pairs: Vec<PairMargin>,
    pub same_cluster_violations: usize,
    pub cross_cluster_pairs: usize,
    /// Cross-cluster pairs whose premise holds, with `ν` as the (lower) bound.
    pub premise_pairs: Vec<PairMargin>,
    pub cross_cluster_violations: usize,
    /// `"premise holds"`, `"premise unmet"`, `"premise partially met"` or `"no cross-cluster pairs"`.
    pub premise_status: String,
    /// Pairs sharing a dominant cluster (argmax of the F* row), informational.
    pub argmax_same_pairs: usize,
    pub argmax_same_mean_distance: f64,
    pub argmax_cross_mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega1Check {
    pub view: usize,
    pub threshold: f64,
    pub pairs: usize,
    pub violations: usize,
    pub worst_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega2Check {
    pub threshold: f64,
    /// F* subproblem value (reconstruction + cluster Laplacian) at the current state.
    pub subproblem_value: f64,
    pub bound: f64,
    pub pairs: Vec<PairMargin>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub converged: bool,
    pub cluster_checks: Vec<ViewClusterCheck>,
    pub omega1: Vec<Omega1Check>,
    pub omega2: Vec<Omega2Check>,
    /// Violations among the cluster checks (where applicable) and the F* neighborhood bound.
    /// The within-view bound assumes unit-norm imputed columns and is reported without being counted.
    pub total_violations: usize,
}

fn singular_range(w: &Matrix) -> (f64, f64) {
    let sv = w.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = if w.nrows() < w.ncols() {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    (min, max)
}

fn row_distance(f: &Matrix, i: usize, j: usize) -> f64 {
    (f.row(i) - f.row(j)).norm()
}

fn argmax_row(f: &Matrix, i: usize) -> usize {
    let row = f.row(i);
    (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b })
}

fn cluster_check(state: &ModelState, masks: &MaskMatrix, v: usize) -> ViewClusterCheck {
    let (sigma_min, sigma_max) = singular_range(&state.w[v]);
    let fv_l1 = l1_norm(&state.fv[v]);
    let mu = 0.5 * sigma_max * fv_l1 + 1.0;
    let x = &state.xhat[v];
    let f = &state.fstar;
    let imputed: Vec<usize> = (0..state.n_samples()).filter(|&i| masks.has_missing(v, i)).collect();
    let mut same = Vec::new();
    let mut premise_pairs = Vec::new();
    let mut cross = 0;
    let mut unmet = 0;
    let (mut am_same, mut am_same_d, mut am_cross, mut am_cross_d) = (0usize, 0.0, 0usize, 0.0);
    for (a, &i) in imputed.iter().enumerate() {
        for &j in &imputed[a + 1..] {
            let dist = (x.column(i) - x.column(j)).norm();
            let delta = row_distance(f, i, j);
            if argmax_row(f, i) == argmax_row(f, j) {
                am_same += 1;
                am_same_d += dist;
            } else {
                am_cross += 1;
                am_cross_d += dist;
            }
            if delta <= SAME_ROW_TOL {
                same.push(PairMargin { i, j, value: dist, bound: mu, margin: mu - dist });
                continue;
            }
            cross += 1;
            let denom = sigma_min + sigma_max;
            let premise = denom > 0.0 && fv_l1 < (sigma_min * delta - 4.0) / denom;
            if premise {
                let nu = 0.5 * sigma_min * (delta - fv_l1) - 1.0;
                premise_pairs.push(PairMargin { i, j, value: dist, bound: nu, margin: dist - nu });
            } else {
                unmet += 1;
            }
        }
    }
    let premise_status = if cross == 0 {
        "no cross-cluster pairs"
    } else if unmet == 0 {
        "premise holds"
    } else if unmet == cross {
        "premise unmet"
    } else {
        "premise partially met"
    };
    ViewClusterCheck {
        view: v,
        sigma_min,
        sigma_max,
        fv_l1,
        mu,
        imputed_samples: imputed.len(),
        same_cluster_violations: same.iter().filter(|p| p.margin < 0.0).count(),
        same_cluster_pairs: same,
        cross_cluster_pairs: cross,
        cross_cluster_violations: premise_pairs.iter().filter(|p| p.margin < 0.0).count(),
        premise_pairs,
        premise_status: premise_status.to_string(),
        argmax_same_pairs: am_same,
        argmax_same_mean_distance: if am_same > 0 { am_same_d / am_same as f64 } else { 0.0 },
        argmax_cross_mean_distance: if am_cross > 0 { am_cross_d / am_cross as f64 } else { 0.0 },
    }
}

fn omega1(state: &ModelState, masks: &MaskMatrix, v: usize, threshold: f64) -> Omega1Check {
    let c = state.reconstruction(v);
    let x = &state.xhat[v];
    let s = &state.s[v];
    let n = state.n_samples();
    let (mut pairs, mut violations, mut worst): (usize, usize, Option<f64>) = (0, 0, None);
    for i in (0..n).filter(|&i| masks.has_missing(v, i)) {
        let bound = 1.5 - threshold + 0.5 * c.column(i).norm();
        for j in (0..n).filter(|&j| j != i && masks.has_missing(v, j)) {
            if s[(i, j)] >= threshold {
                pairs += 1;
                let margin = bound - (x.column(i) - x.column(j)).norm();
                if margin < 0.0 {
                    violations += 1;
                }
                worst = Some(worst.map_or(margin, |w: f64| w.min(margin)));
            }
        }
    }
    Omega1Check { view: v, threshold, pairs, violations, worst_margin: worst }
}

fn omega2(state: &ModelState, masks: &MaskMatrix, cfg: &FitConfig, threshold: f64) -> Omega2Check {
    let value = reconstruction_error(state) + cluster_laplacian(state, cfg);
    let bound = 2.0 * value / threshold;
    let nv = state.n_views();
    let n = state.n_samples();
    let missing_views: Vec<Vec<usize>> =
        (0..n).map(|i| (0..nv).filter(|&v| masks.has_missing(v, i)).collect()).collect();
    let cross_view = |i: usize, j: usize| {
        missing_views[i].iter().any(|&a| missing_views[j].iter().any(|&b| a != b))
    };
    let mut pairs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i != j && state.h[(i, j)] >= threshold && cross_view(i, j) {
                let d2 = (state.fstar.row(i) - state.fstar.row(j)).norm_squared();
                pairs.push(PairMargin { i, j, value: d2, bound, margin: bound - d2 });
            }
        }
    }
    let violations = pairs.iter().filter(|p| p.margin < 0.0).count();
    Omega2Check { threshold, subproblem_value: value, bound, pairs, violations }
}

/// Evaluates both structural bounds on a (normally converged) state.
pub fn theorem_report(state: &ModelState, masks: &MaskMatrix, cfg: &FitConfig, converged: bool) -> TheoremReport {
    let nv = state.n_views();
    let cluster_checks: Vec<_> = (0..nv).map(|v| cluster_check(state, masks, v)).collect();
    let omega1: Vec<_> = (0..nv)
        .flat_map(|v| [0.1, 0.2].map(|t| omega1(state, masks, v, t)))
        .collect();
    let omega2: Vec<_> = [0.1, 0.2].iter().map(|&t| omega2(state, masks, cfg, t)).collect();
    let total_violations = cluster_checks
        .iter()
        .map(|c| c.same_cluster_violations + c.cross_cluster_violations)
        .sum::<usize>()
        + omega2.iter().map(|o| o.violations).sum::<usize>();
    TheoremReport {
        converged,
        cluster_checks,
        omega1,
        omega2,
        total_violations,
    }
}
