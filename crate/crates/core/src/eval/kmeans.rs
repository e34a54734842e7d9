use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ClimError, Result};
use crate::numkit::{Matrix, NumError};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// One center per column.
    pub centers: Matrix,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(x: &Matrix, i: usize, c: &Matrix, j: usize) -> f64 {
    x.column(i)
        .iter()
        .zip(c.column(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.ncols();
    let mut centers = Matrix::zeros(x.nrows(), k);
    let first = rng.random_range(0..n);
    centers.set_column(0, &x.column(first));
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(x, i, &centers, 0)).collect();
    for c in 1..k {
        let total: f64 = best.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.set_column(c, &x.column(pick));
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(x, i, &centers, c));
        }
    }
    centers
}

fn assign(x: &Matrix, centers: &Matrix, labels: &mut [usize]) -> (f64, Vec<f64>) {
    let mut inertia = 0.0;
    let mut dists = vec![0.0; x.ncols()];
    for i in 0..x.ncols() {
        let (mut best, mut arg) = (f64::INFINITY, 0);
        for c in 0..centers.ncols() {
            let d = sq_dist(x, i, centers, c);
            if d < best {
                best = d;
                arg = c;
            }
        }
        labels[i] = arg;
        dists[i] = best;
        inertia += best;
    }
    (inertia, dists)
}

/// Recomputes centers; an empty cluster takes the point farthest from its current center.
fn recenter(x: &Matrix, labels: &mut [usize], dists: &mut [f64], k: usize) -> Matrix {
    let mut centers = Matrix::zeros(x.nrows(), k);
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        let mut col = centers.column_mut(l);
        col += x.column(i);
    }
    for c in 0..k {
        if counts[c] == 0 {
            let far = (0..x.ncols())
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                let old = labels[i];
                counts[old] -= 1;
                let mut oc = centers.column_mut(old);
                oc -= x.column(i);
                labels[i] = c;
                counts[c] = 1;
                dists[i] = 0.0;
                centers.set_column(c, &x.column(i));
            }
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let mut col = centers.column_mut(c);
            col /= counts[c] as f64;
        }
    }
    centers
}

/// One k-means++ / Lloyd run on the columns of `x`.
pub fn kmeans_single(x: &Matrix, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = x.ncols();
    if k == 0 || k > n {
        return Err(ClimError::Config(format!("k-means needs 1 <= c <= n = {n}, got {k}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NumError::NonFinite("k-means input").into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus(x, k, &mut rng);
    let mut labels = vec![0usize; n];
    let (mut inertia, mut dists) = assign(x, &centers, &mut labels);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let before = labels.clone();
        centers = recenter(x, &mut labels, &mut dists, k);
        let (new_inertia, new_dists) = assign(x, &centers, &mut labels);
        inertia = new_inertia;
        dists = new_dists;
        if labels == before {
            break;
        }
    }
    Ok(KMeansResult {
        labels,
        centers,
        inertia,
        iterations,
    })
}

/// Best of `restarts` runs by inertia; run `r` uses seed `seed + r`.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, max_iter: usize, restarts: usize) -> Result<KMeansResult> {
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let run = kmeans_single(x, k, seed.wrapping_add(r as u64), max_iter)?;
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let vals = [0.0, 0.1, 0.2, 10.0, 10.1, 10.2];
        let x = Matrix::from_row_slice(1, 6, &vals);
        let r = kmeans_single(&x, 2, 3, 300).unwrap();
        assert_eq!(r.labels[0], r.labels[1]);
        assert_eq!(r.labels[1], r.labels[2]);
        assert_eq!(r.labels[3], r.labels[5]);
        assert_ne!(r.labels[0], r.labels[3]);
    }

    #[test]
    fn one_cluster_per_point_and_single_cluster() {
        let x = Matrix::from_fn(2, 5, |i, j| (i * 7 + j * j) as f64);
        let r = kmeans_single(&x, 5, 0, 300).unwrap();
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3, 4]);
        let r1 = kmeans_single(&x, 1, 0, 300).unwrap();
        assert!(r1.labels.iter().all(|&v| v == 0));
        assert!(kmeans_single(&x, 6, 0, 300).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let x = Matrix::from_row_slice(1, 6, &[1.0, 1.0, 1.0, 1.0, 5.0, 9.0]);
        for seed in 0..20 {
            let r = kmeans_single(&x, 3, seed, 300).unwrap();
            assert!(r.inertia < 1e-12);
        }
        let r = kmeans_single(&x, 3, 11, 300).unwrap();
        let mut seen = r.labels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn lloyd_steps_do_not_increase_inertia() {
        let x = Matrix::from_fn(3, 40, |i, j| ((i * 31 + j * 17) % 23) as f64 / 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut centers = plus_plus(&x, 4, &mut rng);
        let mut labels = vec![0; 40];
        let (mut prev, mut dists) = assign(&x, &centers, &mut labels);
        for _ in 0..20 {
            centers = recenter(&x, &mut labels, &mut dists, 4);
            let (inertia, d) = assign(&x, &centers, &mut labels);
            assert!(inertia <= prev + 1e-9);
            prev = inertia;
            dists = d;
        }
    }
}
