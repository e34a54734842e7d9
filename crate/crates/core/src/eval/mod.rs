//! Clustering-based evaluation of feature subsets and structural diagnostics.

mod kmeans;
mod metrics;
mod theorem;

pub use kmeans::{kmeans, kmeans_single, KMeansResult};
pub use metrics::{clustering_accuracy, hungarian_min, nmi};
pub use theorem::{theorem_report, Omega1Check, Omega2Check, PairMargin, TheoremReport, ViewClusterCheck};

use serde::{Deserialize, Serialize};

use crate::error::{ClimError, Result};
use crate::model::SelectionResult;
use crate::numkit::Matrix;

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_ratio: f64,
    pub runs: usize,
    pub seed: u64,
    pub n_features: usize,
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
    pub acc_runs: Vec<f64>,
    pub nmi_runs: Vec<f64>,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stacks the selected rows of every view (samples stay as columns).
pub fn selected_features(views: &[Matrix], sel: &SelectionResult) -> Result<Matrix> {
    if views.len() != sel.selected.len() {
        return Err(ClimError::Shape(format!(
            "{} views but a selection for {}",
            views.len(),
            sel.selected.len()
        )));
    }
    let n = views.first().map_or(0, |v| v.ncols());
    let rows: usize = sel.selected.iter().map(Vec::len).sum();
    let mut out = Matrix::zeros(rows, n);
    let mut r = 0;
    for (x, idx) in views.iter().zip(&sel.selected) {
        for &i in idx {
            if i >= x.nrows() {
                return Err(ClimError::Shape(format!("feature {i} out of range for a view with {} rows", x.nrows())));
            }
            out.set_row(r, &x.row(i));
            r += 1;
        }
    }
    Ok(out)
}

/// k-means on the selected features, `runs` times with seeds `seed..seed + runs`.
pub fn evaluate_selection(
    views: &[Matrix],
    labels: Option<&[usize]>,
    sel: &SelectionResult,
    n_clusters: usize,
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    let labels = labels.ok_or(ClimError::MissingLabels)?;
    if runs == 0 {
        return Err(ClimError::Config("evaluation needs at least one run".into()));
    }
    let x = selected_features(views, sel)?;
    if labels.len() != x.ncols() {
        return Err(ClimError::Shape(format!("{} labels for {} samples", labels.len(), x.ncols())));
    }
    let mut acc_runs = Vec::with_capacity(runs);
    let mut nmi_runs = Vec::with_capacity(runs);
    for r in 0..runs {
        let km = kmeans_single(&x, n_clusters, seed.wrapping_add(r as u64), KMEANS_MAX_ITER)?;
        acc_runs.push(clustering_accuracy(&km.labels, labels)?);
        nmi_runs.push(nmi(&km.labels, labels)?);
    }
    let (acc_mean, acc_std) = mean_std(&acc_runs);
    let (nmi_mean, nmi_std) = mean_std(&nmi_runs);
    Ok(EvalReport {
        feature_ratio: sel.ratio,
        runs,
        seed,
        n_features: x.nrows(),
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
        acc_runs,
        nmi_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rank_by_scores;

    #[test]
    fn single_run_report_equals_the_run() {
        let x = Matrix::from_row_slice(1, 6, &[0.0, 0.1, 0.2, 5.0, 5.1, 5.2]);
        let sel = rank_by_scores(&[vec![1.0]], 1.0).unwrap();
        let labels = [1, 1, 1, 0, 0, 0];
        let r = evaluate_selection(&[x.clone()], Some(&labels), &sel, 2, 1, 4).unwrap();
        let km = kmeans_single(&x, 2, 4, KMEANS_MAX_ITER).unwrap();
        assert_eq!(r.acc_runs, vec![clustering_accuracy(&km.labels, &labels).unwrap()]);
        assert_eq!(r.acc_mean, r.acc_runs[0]);
        assert_eq!(r.nmi_mean, r.nmi_runs[0]);
        assert!(evaluate_selection(&[x], None, &sel, 2, 1, 4).is_err());
    }

    #[test]
    fn full_selection_equals_raw_data() {
        let x = Matrix::from_fn(3, 8, |i, j| ((i + 2 * j) % 5) as f64);
        let sel = rank_by_scores(&[vec![0.3, 0.1, 0.2]], 1.0).unwrap();
        let stacked = selected_features(&[x.clone()], &sel).unwrap();
        let labels = [0, 1, 0, 1, 0, 1, 0, 1];
        let a = evaluate_selection(&[x.clone()], Some(&labels), &sel, 2, 5, 0).unwrap();
        let mut b_acc = Vec::new();
        for r in 0..5 {
            // Row order does not change distances.
            let km = kmeans_single(&x, 2, r, KMEANS_MAX_ITER).unwrap();
            b_acc.push(clustering_accuracy(&km.labels, &labels).unwrap());
        }
        assert_eq!(stacked.nrows(), 3);
        for (p, q) in a.acc_runs.iter().zip(&b_acc) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
