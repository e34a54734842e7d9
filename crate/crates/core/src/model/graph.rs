//! Neighborhood graphs: pairwise costs, k-sparse column solves, sparse Laplacians.

use crate::numkit::{ksparse_simplex_min, Matrix, NumError};

/// Half squared Euclidean distances between the columns of `x`.
pub fn half_sq_distances(x: &Matrix) -> Matrix {
    let n = x.ncols();
    let norms: Vec<f64> = (0..n).map(|j| x.column(j).norm_squared()).collect();
    let gram = x.transpose() * x;
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (0.5 * (norms[i] + norms[j] - 2.0 * gram[(i, j)])).max(0.0)
        }
    })
}

/// Coefficient of `a_ij` in `Tr(x L(a) xᵀ)`: `½‖x_i − x_j‖²` for the symmetrized
/// Laplacian, `‖x_j‖² − x_i·x_j` for the column-degree one.
pub fn smooth_costs(x: &Matrix, symmetrize: bool) -> Matrix {
    if symmetrize {
        return half_sq_distances(x);
    }
    let gram = x.transpose() * x;
    let n = x.ncols();
    Matrix::from_fn(n, n, |i, j| gram[(j, j)] - gram[(i, j)])
}

/// Result of one column solve.
#[derive(Debug, Clone)]
pub struct ColumnSolve {
    pub weights: Vec<f64>,
    /// Coefficient `a` of `‖s‖²` in the column objective `qᵀs + a‖s‖²`.
    pub coefficient: Option<f64>,
    pub degenerate: bool,
}

/// Minimizes `qᵀs + a‖s‖²` over k-sparse simplex columns, `a` chosen adaptively.
///
/// Exact ties among the lowest k+1 costs (no unique k-set) fall back to uniform weights on
/// the index-ordered k-set; then `coefficient` is `None` and the caller keeps its previous one.
pub fn solve_column(q: &[f64], k: usize) -> Result<ColumnSolve, NumError> {
    match ksparse_simplex_min(q, k) {
        Ok(sol) => Ok(ColumnSolve {
            weights: sol.weights,
            coefficient: Some(sol.xi),
            degenerate: false,
        }),
        Err(NumError::DegenerateNeighborhood) => {
            let mut order: Vec<usize> = (0..q.len()).filter(|&i| q[i].is_finite()).collect();
            order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
            let mut weights = vec![0.0; q.len()];
            for &i in order.iter().take(k) {
                weights[i] = 1.0 / k as f64;
            }
            Ok(ColumnSolve {
                weights,
                coefficient: None,
                degenerate: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Column objective `qᵀs + a‖s‖²` over the finite entries of `q`.
pub fn column_objective(q: &[f64], s: &[f64], a: f64) -> f64 {
    let mut lin = 0.0;
    let mut sq = 0.0;
    for (&qi, &si) in q.iter().zip(s) {
        if si != 0.0 {
            lin += qi * si;
            sq += si * si;
        }
    }
    lin + a * sq
}

/// Symmetrized sparse adjacency `(A + Aᵀ)/2` with its degrees.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    neighbors: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
}

impl SparseGraph {
    pub fn symmetrized(a: &Matrix) -> Self {
        let n = a.nrows();
        let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for j in 0..n {
            for i in 0..n {
                let w = 0.5 * (a[(i, j)] + a[(j, i)]);
                if w != 0.0 && i != j {
                    neighbors[j].push((i, w));
                }
            }
        }
        let degree = neighbors
            .iter()
            .map(|nb| nb.iter().map(|&(_, w)| w).sum())
            .collect();
        Self { neighbors, degree }
    }

    pub fn len(&self) -> usize {
        self.degree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degree.is_empty()
    }

    /// `out = x L` for the Laplacian `L = D − A` (columns of `x` are samples).
    pub fn right_apply(&self, x: &Matrix, out: &mut Matrix) {
        let d = x.nrows();
        let xs = x.as_slice();
        let os = out.as_mut_slice();
        for j in 0..self.len() {
            let col = &mut os[j * d..(j + 1) * d];
            let dj = self.degree[j];
            for (o, &v) in col.iter_mut().zip(&xs[j * d..(j + 1) * d]) {
                *o = dj * v;
            }
            for &(i, w) in &self.neighbors[j] {
                for (o, &v) in col.iter_mut().zip(&xs[i * d..(i + 1) * d]) {
                    *o -= w * v;
                }
            }
        }
    }

    /// `½ Σ_ij a_ij ‖x_i − x_j‖²` for the symmetrized weights, i.e. `Tr(x L xᵀ)`.
    pub fn smoothness(&self, x: &Matrix) -> f64 {
        let mut total = 0.0;
        for j in 0..self.len() {
            for &(i, w) in &self.neighbors[j] {
                let diff = (x.column(i) - x.column(j)).norm_squared();
                total += w * diff;
            }
        }
        0.5 * total
    }
}

/// `Tr(x L xᵀ)` for the (possibly non-symmetric) column-degree Laplacian of `a`.
pub fn laplacian_trace(x: &Matrix, a: &Matrix) -> f64 {
    let gram = x.transpose() * x;
    let n = a.nrows();
    let mut total = 0.0;
    for j in 0..n {
        let colsum: f64 = a.column(j).sum();
        total += colsum * gram[(j, j)];
        for i in 0..n {
            total -= a[(i, j)] * gram[(i, j)];
        }
    }
    total
}
