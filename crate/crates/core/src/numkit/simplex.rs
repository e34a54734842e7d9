use nalgebra::{SymmetricEigen, SVD};

use super::{Matrix, NumError, Vector};

/// Closed-form minimizer of a k-sparse simplex column.
#[derive(Debug, Clone, PartialEq)]
pub struct KSparseSolution {
    /// Nonnegative weights summing to one with exactly `k` nonzeros.
    pub weights: Vec<f64>,
    /// Half-gap `(k * q_thr - sum_{t<=k} q_(t)) / 2`; the adaptive quadratic
    /// coefficient for which `weights` minimizes `q.s + xi * |s|^2`.
    pub xi: f64,
    /// Indices of the nonzero weights, in ascending cost order.
    pub support: Vec<usize>,
}

/// Minimizes `sum_i q_i s_i + xi |s|^2` over the k-sparse simplex with the
/// adaptive choice of `xi` that keeps exactly `k` neighbors.
///
/// Costs are ranked by `(value, index)`. The nonzeros sit at the `k`
/// smallest costs with weight `(q_thr - q_(t)) / (k q_thr - sum q_(t))`,
/// where `q_thr = q_(k+1)`. When `q_(k) == q_(k+1)` but the `k` smallest are
/// not all equal, `q_thr` moves to the next strictly larger cost (or to
/// `2 q_(k) - q_(1)` when none exists) so that all `k` weights stay positive.
///
/// Entries equal to `+inf` are inadmissible and never receive weight.
pub fn ksparse_simplex_min(q: &[f64], k: usize) -> Result<KSparseSolution, NumError> {
    if q.iter().any(|x| x.is_nan() || *x == f64::NEG_INFINITY) {
        return Err(NumError::NonFinite("neighbor costs"));
    }
    let mut order: Vec<usize> = (0..q.len()).filter(|&i| q[i].is_finite()).collect();
    if k == 0 || order.len() <= k {
        return Err(NumError::NeighborCount {
            k,
            available: order.len(),
        });
    }
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));

    let lowest = q[order[0]];
    let kth = q[order[k - 1]];
    let next = q[order[k]];
    if lowest == next {
        return Err(NumError::DegenerateNeighborhood);
    }
    let threshold = if next > kth {
        next
    } else {
        order[k + 1..]
            .iter()
            .map(|&i| q[i])
            .find(|&v| v > kth)
            .unwrap_or(2.0 * kth - lowest)
    };
    // Summing the individual gaps (rather than k * q_thr - sum q) keeps the
    // weights' sum at one to rounding even when the costs dwarf their spread.
    let gaps: Vec<f64> = order[..k].iter().map(|&i| threshold - q[i]).collect();
    let denom: f64 = gaps.iter().sum();
    if !(denom > 0.0) {
        return Err(NumError::DegenerateNeighborhood);
    }

    let mut weights = vec![0.0; q.len()];
    for (&i, &g) in order[..k].iter().zip(&gaps) {
        weights[i] = g / denom;
    }
    Ok(KSparseSolution {
        weights,
        xi: denom / 2.0,
        support: order[..k].to_vec(),
    })
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (j as f64 + 1.0);
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Fixed-point residual `|alpha - P(alpha - grad)|_inf` of
/// `min alpha^T Q alpha + c^T alpha` over the simplex. Zero exactly at KKT points.
pub fn simplex_kkt_residual(q: &Matrix, c: &Vector, alpha: &Vector) -> f64 {
    let grad = q * alpha * 2.0 + c;
    let shifted: Vec<f64> = alpha.iter().zip(grad.iter()).map(|(a, g)| a - g).collect();
    let proj = project_simplex(&shifted);
    alpha
        .iter()
        .zip(proj.iter())
        .map(|(a, p)| (a - p).abs())
        .fold(0.0, f64::max)
}

const MAX_ENUMERATED_VIEWS: usize = 12;

/// Minimizes `alpha^T Q alpha + c^T alpha` subject to `alpha >= 0`, `sum alpha = 1`.
///
/// Small problems enumerate active sets and solve each equality-constrained
/// KKT system exactly (minimum-norm solution when singular). Among optimal
/// candidates the one with the larger support, then the smaller norm, wins,
/// so symmetric problems return symmetric weights.
pub fn simplex_qp(q: &Matrix, c: &Vector) -> Result<Vector, NumError> {
    let v = c.len();
    if v == 0 || q.nrows() != v || q.ncols() != v {
        return Err(NumError::Dimension(format!(
            "Q is {}x{}, c has {v} entries",
            q.nrows(),
            q.ncols()
        )));
    }
    if q.iter().chain(c.iter()).any(|x| !x.is_finite()) {
        return Err(NumError::NonFinite("simplex QP data"));
    }
    let scale = q.amax().max(1.0);
    if (q - q.transpose()).amax() > 1e-10 * scale {
        return Err(NumError::NotSymmetric((q - q.transpose()).amax()));
    }
    let sym = (q + q.transpose()) * 0.5;
    let min_eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
    if min_eig < -1e-8 * scale {
        return Err(NumError::NotPsd(min_eig));
    }
    if v == 1 {
        return Ok(Vector::from_element(1, 1.0));
    }
    if v > MAX_ENUMERATED_VIEWS {
        return Ok(projected_gradient(&sym, c));
    }

    let objective = |a: &Vector| (a.transpose() * &sym * a)[(0, 0)] + c.dot(a);
    let mut best: Option<(f64, usize, f64, Vector)> = None;
    for mask in 1u32..(1u32 << v) {
        let support: Vec<usize> = (0..v).filter(|&i| mask & (1 << i) != 0).collect();
        let Some(alpha) = solve_on_support(&sym, c, &support) else {
            continue;
        };
        if simplex_kkt_residual(&sym, c, &alpha) > 1e-9 {
            continue;
        }
        let f = objective(&alpha);
        let size = support.len();
        let norm = alpha.norm();
        let better = match &best {
            None => true,
            Some((bf, bsize, bnorm, _)) => {
                let tie = 1e-12 * (1.0 + bf.abs());
                f < bf - tie
                    || ((f - bf).abs() <= tie
                        && (size > *bsize || (size == *bsize && norm < bnorm - 1e-14)))
            }
        };
        if better {
            best = Some((f, size, norm, alpha));
        }
    }
    Ok(match best {
        Some((_, _, _, alpha)) => alpha,
        None => projected_gradient(&sym, c),
    })
}

fn solve_on_support(q: &Matrix, c: &Vector, support: &[usize]) -> Option<Vector> {
    let s = support.len();
    let mut kkt = Matrix::zeros(s + 1, s + 1);
    let mut rhs = Vector::zeros(s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = 2.0 * q[(i, j)];
        }
        kkt[(a, s)] = -1.0;
        kkt[(s, a)] = 1.0;
        rhs[a] = -c[i];
    }
    rhs[s] = 1.0;
    let svd = SVD::new(kkt.clone(), true, true);
    let sol = svd.solve(&rhs, 1e-12).ok()?;
    if (&kkt * &sol - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
        return None;
    }
    let mut alpha = Vector::zeros(c.len());
    for (a, &i) in support.iter().enumerate() {
        if sol[a] < -1e-12 {
            return None;
        }
        alpha[i] = sol[a].max(0.0);
    }
    let total = alpha.sum();
    if total <= 0.0 {
        return None;
    }
    Some(alpha / total)
}

fn projected_gradient(q: &Matrix, c: &Vector) -> Vector {
    let v = c.len();
    let lipschitz = 2.0 * SymmetricEigen::new(q.clone()).eigenvalues.max().max(1e-12);
    let step = 1.0 / lipschitz;
    let mut x = Vector::from_element(v, 1.0 / v as f64);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        let grad = q * &y * 2.0 + c;
        let cand: Vec<f64> = y.iter().zip(grad.iter()).map(|(a, g)| a - step * g).collect();
        let next = Vector::from_vec(project_simplex(&cand));
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        let moved = (&next - &x).amax();
        x = next;
        t = t_next;
        if moved < 1e-15 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Bisection projection onto the simplex, kept separate from the sort-based kernel.
    fn bisect_projection(y: &[f64]) -> Vec<f64> {
        let (mut lo, mut hi) = (
            y.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0,
            y.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s: f64 = y.iter().map(|v| (v - mid).max(0.0)).sum();
            if s > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        y.iter().map(|v| (v - theta).max(0.0)).collect()
    }

    fn column_objective(q: &[f64], s: &[f64], xi: f64) -> f64 {
        q.iter()
            .zip(s)
            .filter(|(_, &w)| w != 0.0)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + xi * s.iter().map(|x| x * x).sum::<f64>()
    }

    /// Exhaustive support enumeration of min q.s + xi|s|^2 over {s >= 0, sum 1, |supp| <= k}.
    fn enumeration_oracle(q: &[f64], k: usize, xi: f64) -> f64 {
        let n = q.len();
        let admissible: Vec<usize> = (0..n).filter(|&i| q[i].is_finite()).collect();
        let mut best = f64::INFINITY;
        let m = admissible.len();
        for mask in 1u64..(1u64 << m) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let idx: Vec<usize> = (0..m)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| admissible[b])
                .collect();
            let y: Vec<f64> = idx.iter().map(|&i| -q[i] / (2.0 * xi)).collect();
            let p = bisect_projection(&y);
            let mut s = vec![0.0; n];
            for (a, &i) in idx.iter().enumerate() {
                s[i] = p[a];
            }
            best = best.min(column_objective(q, &s, xi));
        }
        best
    }

    fn check_column(sol: &KSparseSolution, k: usize) {
        assert!(sol.weights.iter().all(|&w| w >= 0.0));
        assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert_eq!(sol.weights.iter().filter(|&&w| w > 0.0).count(), k);
    }

    #[test]
    fn worked_example() {
        let q = [0.1, 0.2, 0.4, 0.9];
        let sol = ksparse_simplex_min(&q, 2).unwrap();
        assert!((sol.weights[0] - 0.6).abs() < 1e-15);
        assert!((sol.weights[1] - 0.4).abs() < 1e-15);
        assert_eq!(&sol.weights[2..], &[0.0, 0.0]);
        let oracle = enumeration_oracle(&q, 2, sol.xi);
        assert!((column_objective(&q, &sol.weights, sol.xi) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn one_neighbor_is_vertex() {
        let q = [0.5, -0.2, 0.3, 0.9];
        let sol = ksparse_simplex_min(&q, 1).unwrap();
        assert_eq!(sol.weights, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_with_one_smaller_entry() {
        let q = [0.7, 0.7, 0.2, 0.7, 0.7];
        let sol = ksparse_simplex_min(&q, 2).unwrap();
        check_column(&sol, 2);
        // boundary tie at q_(2) = q_(3) = 0.7 moves the threshold past it
        assert!(sol.weights[2] > sol.weights[0]);
        assert!(sol.weights[0] > 0.0);
        let oracle = enumeration_oracle(&q, 2, sol.xi);
        assert!(column_objective(&q, &sol.weights, sol.xi) - oracle <= 1e-12);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert_eq!(
            ksparse_simplex_min(&[0.3, 0.3, 0.3, 0.8], 2),
            Err(NumError::DegenerateNeighborhood)
        );
        assert!(matches!(
            ksparse_simplex_min(&[0.1, 0.2], 2),
            Err(NumError::NeighborCount { .. })
        ));
        assert!(matches!(
            ksparse_simplex_min(&[0.1, f64::INFINITY, 0.2], 2),
            Err(NumError::NeighborCount { .. })
        ));
        assert!(ksparse_simplex_min(&[0.1, f64::NAN, 0.2], 1).is_err());
    }

    #[test]
    fn infinite_costs_are_skipped() {
        let q = [f64::INFINITY, 0.3, 0.1, 0.5];
        let sol = ksparse_simplex_min(&q, 2).unwrap();
        assert_eq!(sol.weights[0], 0.0);
        assert_eq!(sol.support, vec![2, 1]);
        check_column(&sol, 2);
    }

    #[test]
    fn matches_enumeration_oracle_on_random_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let n = rng.random_range(3..=6);
            let k = rng.random_range(1..=3.min(n - 1));
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
            let sol = ksparse_simplex_min(&q, k).unwrap();
            check_column(&sol, k);
            let gap = column_objective(&q, &sol.weights, sol.xi) - enumeration_oracle(&q, k, sol.xi);
            assert!(gap.abs() <= 1e-8, "gap {gap}");
        }
    }

    #[test]
    fn projection_agrees_with_bisection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let y: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = project_simplex(&y);
            let b = bisect_projection(&y);
            for (x, z) in a.iter().zip(&b) {
                assert!((x - z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qp_trivial_cases() {
        let alpha = simplex_qp(&Matrix::identity(2, 2), &Vector::zeros(2)).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-14 && (alpha[1] - 0.5).abs() < 1e-14);
        let one = simplex_qp(&Matrix::from_element(1, 1, 3.0), &Vector::from_element(1, -1.0)).unwrap();
        assert_eq!(one[0], 1.0);
        // rank-one Q with equal linear terms: every point is optimal, uniform wins the tie-break
        let flat = simplex_qp(&Matrix::from_element(2, 2, 4.0), &Vector::from_element(2, -2.0)).unwrap();
        assert!((flat[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qp_rejects_indefinite() {
        let q = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(simplex_qp(&q, &Vector::zeros(2)), Err(NumError::NotPsd(_))));
    }

    fn random_psd(rng: &mut ChaCha8Rng, v: usize) -> Matrix {
        let a = Matrix::from_fn(v, v, |_, _| rng.random_range(-1.0..1.0));
        a.transpose() * a
    }

    #[test]
    fn qp_matches_grid_search_on_two_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let q = random_psd(&mut rng, 3);
            let c = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let alpha = simplex_qp(&q, &c).unwrap();
            let f = |a: &Vector| (a.transpose() * &q * a)[(0, 0)] + c.dot(a);
            let steps = 1000;
            let mut grid_best = f64::INFINITY;
            for i in 0..=steps {
                for j in 0..=(steps - i) {
                    let a = Vector::from_vec(vec![
                        i as f64 / steps as f64,
                        j as f64 / steps as f64,
                        (steps - i - j) as f64 / steps as f64,
                    ]);
                    grid_best = grid_best.min(f(&a));
                }
            }
            let fa = f(&alpha);
            assert!(fa <= grid_best + 1e-12);
            assert!((fa - grid_best).abs() <= 5e-3);
        }
    }

    proptest! {
        #[test]
        fn qp_kkt_residual_small(seed in 0u64..10_000, v in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_psd(&mut rng, v);
            let c = Vector::from_fn(v, |_, _| rng.random_range(-2.0..2.0));
            let alpha = simplex_qp(&q, &c).unwrap();
            prop_assert!(alpha.iter().all(|&a| a >= 0.0));
            prop_assert!((alpha.sum() - 1.0).abs() <= 1e-10);
            prop_assert!(simplex_kkt_residual(&q, &c, &alpha) <= 1e-8);
        }

        #[test]
        fn ksparse_invariants(q in prop::collection::vec(-3.0f64..3.0, 3..=6), k in 1usize..=3) {
            prop_assume!(k < q.len());
            let sol = ksparse_simplex_min(&q, k).unwrap();
            prop_assert!(sol.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert_eq!(sol.weights.iter().filter(|&&w| w > 0.0).count(), k);
            let gap = column_objective(&q, &sol.weights, sol.xi) - enumeration_oracle(&q, k, sol.xi);
            prop_assert!(gap.abs() <= 1e-8);
        }
    }
}
