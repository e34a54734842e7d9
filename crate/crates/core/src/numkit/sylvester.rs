use nalgebra::SymmetricEigen;

use super::{Matrix, NumError, Vector};

const SYMMETRY_TOL: f64 = 1e-10;
const PENCIL_FLOOR: f64 = 1e-12;

/// Solves `lambda * diag(d) * W + W * G = C` for `W` (p x c).
///
/// `G` must be symmetric, so it diagonalizes as `Q diag(e) Q^T` and the
/// equation decouples in the rotated basis `C Q`:
/// `W~_ij = (C Q)_ij / (lambda d_i + e_j)`, `W = W~ Q^T`.
/// This is Bartels–Stewart with a diagonal left factor.
pub fn solve_scaled_sylvester(
    d: &Vector,
    lambda: f64,
    g: &Matrix,
    c: &Matrix,
) -> Result<Matrix, NumError> {
    let p = d.len();
    if !g.is_square() || c.nrows() != p || c.ncols() != g.nrows() {
        return Err(NumError::Dimension(format!(
            "D has {p} entries, G is {}x{}, C is {}x{}",
            g.nrows(),
            g.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    if let Some((index, &value)) = d.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(NumError::NonPositiveScaling { index, value });
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(NumError::NonPositiveScaling {
            index: usize::MAX,
            value: lambda,
        });
    }
    let asym = (g - g.transpose()).amax();
    if asym > SYMMETRY_TOL * g.amax().max(1.0) {
        return Err(NumError::NotSymmetric(asym));
    }

    let sym = (g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let q = &eig.eigenvectors;
    let mut rotated = c * q;
    for j in 0..rotated.ncols() {
        let ej = eig.eigenvalues[j];
        for i in 0..p {
            let denom = lambda * d[i] + ej;
            if denom.abs() < PENCIL_FLOOR {
                return Err(NumError::SingularPencil(denom));
            }
            rotated[(i, j)] /= denom;
        }
    }
    Ok(rotated * q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, p: usize, c: usize) -> (Vector, f64, Matrix, Matrix) {
        let d = Vector::from_fn(p, |_, _| rng.random_range(0.05..3.0));
        let a = Matrix::from_fn(c + 1, c, |_, _| rng.random_range(-1.0..1.0));
        let g = a.transpose() * a;
        let cm = Matrix::from_fn(p, c, |_, _| rng.random_range(-2.0..2.0));
        (d, rng.random_range(0.01..5.0), g, cm)
    }

    fn residual(d: &Vector, lambda: f64, g: &Matrix, c: &Matrix, w: &Matrix) -> f64 {
        (Matrix::from_diagonal(d) * w * lambda + w * g - c).norm()
    }

    /// Column-major vec: (I_c ⊗ λD + Gᵀ ⊗ I_p) vec(W) = vec(C).
    fn kronecker_oracle(d: &Vector, lambda: f64, g: &Matrix, c: &Matrix) -> Matrix {
        let (p, k) = (d.len(), g.nrows());
        let mut big = Matrix::zeros(p * k, p * k);
        for j in 0..k {
            for i in 0..p {
                big[(j * p + i, j * p + i)] += lambda * d[i];
            }
        }
        for j in 0..k {
            for l in 0..k {
                for i in 0..p {
                    big[(j * p + i, l * p + i)] += g[(l, j)];
                }
            }
        }
        let rhs = Vector::from_column_slice(c.as_slice());
        let sol = big.lu().solve(&rhs).expect("oracle system singular");
        Matrix::from_column_slice(p, k, sol.as_slice())
    }

    #[test]
    fn identity_case() {
        let d = Vector::from_vec(vec![1.0, 1.0]);
        let g = Matrix::identity(2, 2);
        let c = Matrix::from_row_slice(2, 2, &[2.0, 4.0, 6.0, 8.0]);
        let w = solve_scaled_sylvester(&d, 1.0, &g, &c).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((w - want).amax() < 1e-14);
    }

    #[test]
    fn zero_right_factor_decouples_rows() {
        let d = Vector::from_vec(vec![1.0, 2.0]);
        let g = Matrix::zeros(2, 2);
        let c = Matrix::from_row_slice(2, 2, &[3.0, -1.0, 5.0, 7.0]);
        let w = solve_scaled_sylvester(&d, 1.0, &g, &c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((w[(i, j)] - c[(i, j)] / d[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = rng.random_range(1..=4);
            let c = rng.random_range(1..=4);
            let (d, lambda, g, cm) = random_instance(&mut rng, p, c);
            let w = solve_scaled_sylvester(&d, lambda, &g, &cm).unwrap();
            let oracle = kronecker_oracle(&d, lambda, &g, &cm);
            assert!((&w - &oracle).amax() <= 1e-8, "oracle gap {}", (&w - oracle).amax());
            assert!(residual(&d, lambda, &g, &cm, &w) <= 1e-8 * cm.norm().max(1.0));
        }
    }

    #[test]
    fn residual_bound_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = rng.random_range(1..=8);
            let c = rng.random_range(1..=8);
            let (d, lambda, g, cm) = random_instance(&mut rng, p, c);
            let w = solve_scaled_sylvester(&d, lambda, &g, &cm).unwrap();
            assert!(residual(&d, lambda, &g, &cm, &w) <= 1e-8 * cm.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = Matrix::zeros(2, 2);
        let g = Matrix::identity(2, 2);
        let bad_d = Vector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            solve_scaled_sylvester(&bad_d, 1.0, &g, &c),
            Err(NumError::NonPositiveScaling { index: 1, .. })
        ));
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let d = Vector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            solve_scaled_sylvester(&d, 1.0, &asym, &c),
            Err(NumError::NotSymmetric(_))
        ));
        // eigenvalue -1 cancels lambda * d = 1
        let neg = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        assert!(matches!(
            solve_scaled_sylvester(&d, 1.0, &neg, &c),
            Err(NumError::SingularPencil(_))
        ));
    }
}
