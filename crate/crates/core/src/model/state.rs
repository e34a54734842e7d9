use log::warn;
use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::FitConfig;
use super::graph::{half_sq_distances, solve_column};
use crate::dataset::{mean_impute_all, MaskMatrix, MultiViewDataset};
use crate::error::{ClimError, Result};
use crate::eval::kmeans;
use crate::numkit::{AdamState, Matrix, Vector};

/// Which parts of the joint model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Components {
    /// Re-estimate missing entries (otherwise they stay mean-imputed).
    pub imputation: bool,
    /// Cluster-structure Laplacian term on `F*`.
    pub cluster_structure: bool,
    /// Learn `S^v`, `H`, `α` (otherwise frozen at init and their terms dropped).
    pub graph_learning: bool,
    /// View-specific factors `F^v` (otherwise fixed to zero).
    pub view_specific: bool,
}

impl Components {
    pub const FULL: Self = Self {
        imputation: true,
        cluster_structure: true,
        graph_learning: true,
        view_specific: true,
    };
}

impl Default for Components {
    fn default() -> Self {
        Self::FULL
    }
}

/// All blocks of the model, plus the adaptive per-column coefficients and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub xhat: Vec<Matrix>,
    pub w: Vec<Matrix>,
    pub fv: Vec<Matrix>,
    pub fstar: Matrix,
    pub s: Vec<Matrix>,
    pub h: Matrix,
    pub alpha: Vector,
    /// Diagonal of the row reweighting `D^v`.
    pub drow: Vec<Vector>,
    pub adam: Vec<AdamState>,
    /// Per-column regularizer `ξ_{v,j}`.
    pub xi: Vec<Vector>,
    pub gamma: Vector,
    pub iteration: usize,
    pub spectral_fallback: bool,
}

impl ModelState {
    pub fn n_views(&self) -> usize {
        self.xhat.len()
    }

    pub fn n_samples(&self) -> usize {
        self.fstar.nrows()
    }

    pub fn n_clusters(&self) -> usize {
        self.fstar.ncols()
    }

    /// `F^v + F*`.
    pub fn factor(&self, v: usize) -> Matrix {
        &self.fv[v] + &self.fstar
    }

    /// `W^v (F^v + F*)ᵀ`.
    pub fn reconstruction(&self, v: usize) -> Matrix {
        &self.w[v] * self.factor(v).transpose()
    }

    /// Weighted consensus input `Σ_v α_v S^v`.
    pub fn weighted_graph(&self) -> Matrix {
        let n = self.n_samples();
        let mut p = Matrix::zeros(n, n);
        for (v, s) in self.s.iter().enumerate() {
            p += s * self.alpha[v];
        }
        p
    }

    pub fn check_shapes(&self) -> Result<()> {
        let v = self.n_views();
        let n = self.n_samples();
        let c = self.n_clusters();
        let lens = [self.w.len(), self.fv.len(), self.s.len(), self.drow.len(), self.adam.len(), self.xi.len()];
        if lens.iter().any(|&l| l != v) || self.alpha.len() != v {
            return Err(ClimError::Shape("per-view block counts disagree".into()));
        }
        if self.h.shape() != (n, n) || self.gamma.len() != n {
            return Err(ClimError::Shape("consensus graph shape".into()));
        }
        for i in 0..v {
            let d = self.xhat[i].nrows();
            let ok = self.xhat[i].ncols() == n
                && self.w[i].shape() == (d, c)
                && self.fv[i].shape() == (n, c)
                && self.s[i].shape() == (n, n)
                && self.drow[i].len() == d
                && self.adam[i].len() == n * c
                && self.xi[i].len() == n;
            if !ok {
                return Err(ClimError::Shape(format!("view {i} block shapes disagree")));
            }
        }
        Ok(())
    }
}

/// `D_ii = 1 / (2 sqrt(‖w_i‖² + ε))`.
pub fn row_reweighting(w: &Matrix, eps: f64) -> Vector {
    Vector::from_iterator(
        w.nrows(),
        w.row_iter().map(|r| 1.0 / (2.0 * (r.norm_squared() + eps).sqrt())),
    )
}

/// k-sparse simplex graph from a cost matrix (column j holds sample j's neighbor costs).
/// Returns the graph and the adaptive coefficient per column.
pub fn knn_graph(cost: &Matrix, k: usize) -> Result<(Matrix, Vector)> {
    let n = cost.nrows();
    let mut g = Matrix::zeros(n, n);
    let mut coef = Vector::zeros(n);
    let mut q = vec![0.0; n];
    for j in 0..n {
        q.copy_from_slice(cost.column(j).as_slice());
        q[j] = f64::INFINITY;
        let sol = solve_column(&q, k)?;
        g.column_mut(j).copy_from_slice(&sol.weights);
        coef[j] = sol.coefficient.unwrap_or(1.0);
    }
    Ok((g, coef))
}

/// Half squared distances over co-observed entries, rescaled to the full feature count and
/// summed over views; pairs with nothing co-observed in a view use the view's mean cost.
pub fn available_case_cost(data: &MultiViewDataset, masks: &MaskMatrix) -> Matrix {
    let n = data.n_samples();
    let mut total = Matrix::zeros(n, n);
    for v in 0..data.n_views() {
        let x = data.view(v);
        let m = masks.view(v);
        let d = x.nrows();
        let mut cost = Matrix::from_element(n, n, f64::NAN);
        let (mut sum, mut cnt) = (0.0, 0usize);
        for j in 0..n {
            for i in 0..j {
                let (mut acc, mut shared) = (0.0, 0usize);
                for r in 0..d {
                    if m[(r, i)] && m[(r, j)] {
                        let diff = x[(r, i)] - x[(r, j)];
                        acc += diff * diff;
                        shared += 1;
                    }
                }
                if shared > 0 {
                    let c = 0.5 * acc * d as f64 / shared as f64;
                    cost[(i, j)] = c;
                    cost[(j, i)] = c;
                    sum += c;
                    cnt += 1;
                }
            }
            cost[(j, j)] = 0.0;
        }
        let fill = if cnt > 0 { sum / cnt as f64 } else { 0.0 };
        total += cost.map(|c| if c.is_nan() { fill } else { c });
    }
    total
}

/// Normalized-spectral clustering of the symmetrized graph; `None` if it breaks down.
pub fn spectral_labels(h: &Matrix, c: usize, seed: u64) -> Option<Vec<usize>> {
    let n = h.nrows();
    let a = (h + h.transpose()) * 0.5;
    let deg: Vec<f64> = (0..n).map(|j| a.column(j).sum()).collect();
    if deg.iter().any(|&d| !(d > 0.0)) {
        return None;
    }
    let m = Matrix::from_fn(n, n, |i, j| a[(i, j)] / (deg[i] * deg[j]).sqrt());
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]).then(x.cmp(&y)));
    let mut emb = Matrix::zeros(c, n);
    for (col, &idx) in order.iter().take(c).enumerate() {
        for i in 0..n {
            emb[(col, i)] = eig.eigenvectors[(i, idx)];
        }
    }
    for mut colv in emb.column_iter_mut() {
        let nrm = colv.norm();
        if nrm > 0.0 {
            colv /= nrm;
        }
    }
    let km = kmeans(&emb, c, seed, 300, 10).ok()?;
    let mut sizes = vec![0usize; c];
    for &l in &km.labels {
        sizes[l] += 1;
    }
    if sizes.contains(&0) {
        return None;
    }
    Some(km.labels)
}

/// Orthonormal nonnegative indicator: one-hot rows scaled by `1/sqrt(cluster size)`.
pub fn scaled_indicator(labels: &[usize], c: usize) -> Matrix {
    let n = labels.len();
    let mut sizes = vec![0usize; c];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut f = Matrix::zeros(n, c);
    for (i, &l) in labels.iter().enumerate() {
        f[(i, l)] = 1.0 / (sizes[l] as f64).sqrt();
    }
    f
}

fn random_balanced_labels(n: usize, c: usize, seed: u64) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f00d));
    labels
}

/// Initial state: mean imputation, uniform α, all-ones W, kNN graphs, spectral F*, zero F^v.
///
/// `data` must be the masked dataset (unobserved entries are ignored).
pub fn init_state(data: &MultiViewDataset, masks: &MaskMatrix, cfg: &FitConfig) -> Result<ModelState> {
    let n = data.n_samples();
    cfg.validate(n)?;
    masks.check_shapes(data)?;
    let nv = data.n_views();
    let c = cfg.n_clusters;
    let xhat = mean_impute_all(data, masks);
    let alpha = Vector::from_element(nv, 1.0 / nv as f64);
    let w: Vec<Matrix> = xhat.iter().map(|x| Matrix::from_element(x.nrows(), c, 1.0)).collect();
    let drow = w.iter().map(|w| row_reweighting(w, cfg.eps_dv)).collect();

    let mut total_cost = Matrix::zeros(n, n);
    let mut s = Vec::with_capacity(nv);
    let mut xi = Vec::with_capacity(nv);
    for x in &xhat {
        let cost = half_sq_distances(x);
        let (g, coef) = knn_graph(&cost, cfg.k)?;
        total_cost += &cost;
        s.push(g);
        xi.push(coef.map(|a| a - alpha[0] * alpha[0]));
    }
    let total_cost = available_case_cost(data, masks);
    let (h, gamma) = knn_graph(&total_cost, cfg.k)?;

    let (labels, spectral_fallback) = match spectral_labels(&h, c, cfg.seed) {
        Some(l) => (l, false),
        None => {
            warn!("spectral initialization failed; using a seeded random indicator");
            (random_balanced_labels(n, c, cfg.seed), true)
        }
    };
    let fstar = scaled_indicator(&labels, c);
    let fv = (0..nv).map(|_| Matrix::zeros(n, c)).collect();
    let adam = (0..nv)
        .map(|_| AdamState::with_params(n * c, cfg.adam_lr, 0.9, 0.999, 1e-8))
        .collect();
    Ok(ModelState {
        xhat,
        w,
        fv,
        fstar,
        s,
        h,
        alpha,
        drow,
        adam,
        xi,
        gamma,
        iteration: 0,
        spectral_fallback,
    })
}
