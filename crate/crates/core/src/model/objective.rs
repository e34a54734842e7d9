use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::graph::{laplacian_trace, SparseGraph};
use super::state::{Components, ModelState};
use crate::numkit::{l1_norm, l21_norm, Matrix};

/// Objective value split into its terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub reconstruction: f64,
    pub l21: f64,
    pub l1: f64,
    pub smoothness: f64,
    pub cross_view: f64,
    pub graph_reg: f64,
    pub consensus: f64,
    pub cluster_laplacian: f64,
    pub orthogonality: f64,
}

impl ObjectiveTerms {
    pub const NAMES: [&'static str; 9] = [
        "reconstruction",
        "l21",
        "l1",
        "smoothness",
        "cross_view",
        "graph_reg",
        "consensus",
        "cluster_laplacian",
        "orthogonality",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.reconstruction,
            self.l21,
            self.l1,
            self.smoothness,
            self.cross_view,
            self.graph_reg,
            self.consensus,
            self.cluster_laplacian,
            self.orthogonality,
        ]
    }

    pub fn total(&self) -> f64 {
        self.values().iter().sum()
    }
}

pub fn reconstruction_error(state: &ModelState) -> f64 {
    (0..state.n_views())
        .map(|v| (&state.xhat[v] - state.reconstruction(v)).norm_squared())
        .sum()
}

/// `Tr(F*ᵀ L_H F*)`.
pub fn cluster_laplacian(state: &ModelState, cfg: &FitConfig) -> f64 {
    laplacian_energy(&state.fstar.transpose(), &state.h, cfg.symmetrize_laplacians)
}

/// `Tr(x L xᵀ)` with `x` holding one sample per column.
pub(crate) fn laplacian_energy(x: &Matrix, a: &Matrix, symmetrize: bool) -> f64 {
    if symmetrize {
        SparseGraph::symmetrized(a).smoothness(x)
    } else {
        laplacian_trace(x, a)
    }
}

pub fn orthogonality_penalty(fstar: &Matrix, rho: f64) -> f64 {
    let c = fstar.ncols();
    rho * (fstar.transpose() * fstar - Matrix::identity(c, c)).norm_squared()
}

/// `Q_vm = Tr(S^v S^mᵀ)`.
pub fn graph_gram(s: &[Matrix]) -> Matrix {
    let nv = s.len();
    let mut q = Matrix::zeros(nv, nv);
    for a in 0..nv {
        for b in a..nv {
            let val = s[a].dot(&s[b]);
            q[(a, b)] = val;
            q[(b, a)] = val;
        }
    }
    q
}

pub fn objective(state: &ModelState, cfg: &FitConfig, comps: &Components) -> ObjectiveTerms {
    let mut t = ObjectiveTerms {
        reconstruction: reconstruction_error(state),
        l21: cfg.lambda * state.w.iter().map(l21_norm).sum::<f64>(),
        l1: cfg.beta * state.fv.iter().map(l1_norm).sum::<f64>(),
        orthogonality: orthogonality_penalty(&state.fstar, cfg.rho),
        ..ObjectiveTerms::default()
    };
    if comps.cluster_structure {
        t.cluster_laplacian = cluster_laplacian(state, cfg);
    }
    if comps.graph_learning {
        for v in 0..state.n_views() {
            t.smoothness += laplacian_energy(&state.xhat[v], &state.s[v], cfg.symmetrize_laplacians);
            t.graph_reg += state.s[v]
                .column_iter()
                .zip(state.xi[v].iter())
                .map(|(col, &xi)| xi * col.norm_squared())
                .sum::<f64>();
        }
        let q = graph_gram(&state.s);
        t.cross_view = (state.alpha.transpose() * &q * &state.alpha)[(0, 0)];
        let p = state.weighted_graph();
        t.consensus = -state.h.dot(&p)
            + state
                .h
                .column_iter()
                .zip(state.gamma.iter())
                .map(|(col, &g)| g * col.norm_squared())
                .sum::<f64>();
    }
    t
}
