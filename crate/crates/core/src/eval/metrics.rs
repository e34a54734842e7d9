use std::collections::{BTreeMap, BTreeSet};

use crate::error::{ClimError, Result};

fn check_lengths(pred: &[usize], truth: &[usize]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(ClimError::Shape(format!(
            "{} predicted labels vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Maps arbitrary label values to 0..m in increasing order.
fn dense_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    let index: BTreeMap<usize, usize> = distinct.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    (labels.iter().map(|l| index[l]).collect(), distinct.len())
}

fn contingency(pred: &[usize], truth: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (p, kp) = dense_labels(pred);
    let (t, kt) = dense_labels(truth);
    let mut table = vec![vec![0usize; kt]; kp];
    for (&a, &b) in p.iter().zip(&t) {
        table[a][b] += 1;
    }
    (table, kp, kt)
}

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn–Munkres with potentials).
/// Returns `assignment[row] = col`.
pub fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Fraction of samples matched under the best one-to-one relabeling of `pred`.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(1.0);
    }
    let (table, kp, kt) = contingency(pred, truth);
    let m = kp.max(kt);
    let cost: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    if a < kp && b < kt {
                        -(table[a][b] as f64)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let assignment = hungarian_min(&cost);
    let matched: usize = assignment
        .iter()
        .enumerate()
        .filter(|&(a, &b)| a < kp && b < kt)
        .map(|(a, &b)| table[a][b])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Normalized mutual information `I / sqrt(H_pred H_truth)`.
///
/// Two constant labelings score 1; exactly one constant labeling scores 0.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let (table, kp, kt) = contingency(pred, truth);
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..kt).map(|b| (0..kp).map(|a| table[a][b]).sum::<usize>() as f64).collect();
    let entropy = |c: &[f64]| -> f64 {
        c.iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| {
                let p = x / n;
                -p * p.ln()
            })
            .sum()
    };
    let (hp, ht) = (entropy(&row), entropy(&col));
    if kp <= 1 && kt <= 1 {
        return Ok(1.0);
    }
    if kp <= 1 || kt <= 1 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for a in 0..kp {
        for b in 0..kt {
            let nij = table[a][b] as f64;
            if nij > 0.0 {
                mi += nij / n * (n * nij / (row[a] * col[b])).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[2, 2, 0, 0, 1, 1], &t).unwrap(), 1.0);
        assert_eq!(clustering_accuracy(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(clustering_accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn accuracy_with_unequal_cluster_counts() {
        assert_eq!(clustering_accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(clustering_accuracy(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.5);
    }

    #[test]
    fn nmi_examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert!((nmi(&t, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-12);
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn nmi_hand_computed_table() {
        // Contingency [[2, 1], [0, 3]] over n = 6.
        let pred = [0, 0, 0, 1, 1, 1];
        let truth = [0, 0, 1, 1, 1, 1];
        let ln = f64::ln;
        let mi = (2.0 / 6.0) * ln(6.0 * 2.0 / (3.0 * 2.0)) + (1.0 / 6.0) * ln(6.0 * 1.0 / (3.0 * 4.0))
            + (3.0 / 6.0) * ln(6.0 * 3.0 / (3.0 * 4.0));
        let hp = ln(2.0);
        let ht = -(2.0 / 6.0) * ln(2.0 / 6.0) - (4.0 / 6.0) * ln(4.0 / 6.0);
        assert!((nmi(&pred, &truth).unwrap() - mi / (hp * ht).sqrt()).abs() < 1e-12);
    }
}
