//! Multi-view datasets, observation masks, missing-data simulation and
//! mean imputation.
//!
//! Views are stored features x samples: column `i` of every view is sample `i`.

mod io;
mod missing;
mod synth;

pub use io::{
    load_manifest, load_manifest_with_masks, read_labels_csv, read_mask_csv, read_matrix_csv,
    save_dataset, write_labels_csv, write_mask_csv, write_matrix_csv, Manifest, ManifestView,
};
pub use missing::{apply_mask, apply_missing, MissingKind, MissingScenario};
pub use synth::PlantedClusters;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{ClimError, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Option<Vec<usize>>,
    view_names: Vec<String>,
}

impl MultiViewDataset {
    pub fn new(
        views: Vec<Matrix>,
        labels: Option<Vec<usize>>,
        view_names: Vec<String>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(ClimError::Shape("dataset needs at least one view".into()));
        }
        let n = views[0].ncols();
        if n == 0 {
            return Err(ClimError::Shape("dataset has no samples".into()));
        }
        for (v, x) in views.iter().enumerate() {
            if x.ncols() != n {
                return Err(ClimError::Shape(format!(
                    "view {v} has {} samples, view 0 has {n}",
                    x.ncols()
                )));
            }
            if x.nrows() == 0 {
                return Err(ClimError::Shape(format!("view {v} has no features")));
            }
            crate::numkit::ensure_finite(x, "view data")?;
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(ClimError::Shape(format!(
                    "{} labels for {n} samples",
                    l.len()
                )));
            }
        }
        if view_names.len() != views.len() {
            return Err(ClimError::Shape(format!(
                "{} view names for {} views",
                view_names.len(),
                views.len()
            )));
        }
        Ok(Self {
            views,
            labels,
            view_names,
        })
    }

    /// Dataset with generated view names `view0`, `view1`, ...
    pub fn from_views(views: Vec<Matrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        let names = (0..views.len()).map(|v| format!("view{v}")).collect();
        Self::new(views, labels, names)
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &Matrix {
        &self.views[v]
    }

    pub fn view_names(&self) -> &[String] {
        &self.view_names
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn feature_counts(&self) -> Vec<usize> {
        self.views.iter().map(|x| x.nrows()).collect()
    }

    /// Number of distinct label values, if labels are present.
    pub fn n_classes(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut u = l.clone();
            u.sort_unstable();
            u.dedup();
            u.len()
        })
    }

    pub fn with_views(&self, views: Vec<Matrix>) -> Result<Self> {
        Self::new(views, self.labels.clone(), self.view_names.clone())
    }

    /// Scales every nonzero sample column of every view to unit l2 norm.
    pub fn normalize_columns(&self) -> Self {
        let mut views = self.views.clone();
        for (v, x) in views.iter_mut().enumerate() {
            let mut zero = 0usize;
            for mut col in x.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                } else {
                    zero += 1;
                }
            }
            if zero > 0 {
                warn!("view {v}: {zero} all-zero columns left unnormalized");
            }
        }
        Self {
            views,
            labels: self.labels.clone(),
            view_names: self.view_names.clone(),
        }
    }
}

/// Observed-entry indicators, one `d_v x n` boolean matrix per view.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix {
    masks: Vec<DMatrix<bool>>,
}

impl MaskMatrix {
    pub fn new(masks: Vec<DMatrix<bool>>) -> Self {
        Self { masks }
    }

    pub fn all_observed(ds: &MultiViewDataset) -> Self {
        Self {
            masks: ds
                .views()
                .iter()
                .map(|x| DMatrix::from_element(x.nrows(), x.ncols(), true))
                .collect(),
        }
    }

    pub fn view(&self, v: usize) -> &DMatrix<bool> {
        &self.masks[v]
    }

    pub fn views(&self) -> &[DMatrix<bool>] {
        &self.masks
    }

    pub fn n_views(&self) -> usize {
        self.masks.len()
    }

    pub fn check_shapes(&self, ds: &MultiViewDataset) -> Result<()> {
        if self.masks.len() != ds.n_views() {
            return Err(ClimError::Shape(format!(
                "{} masks for {} views",
                self.masks.len(),
                ds.n_views()
            )));
        }
        for (v, (m, x)) in self.masks.iter().zip(ds.views()).enumerate() {
            if m.shape() != x.shape() {
                return Err(ClimError::Shape(format!(
                    "mask {v} is {:?}, view is {:?}",
                    m.shape(),
                    x.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn missing_count(&self, v: usize) -> usize {
        self.masks[v].iter().filter(|&&o| !o).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.masks.iter().all(|m| m.iter().all(|&o| o))
    }

    /// True when sample `i` has no observed entry in view `v`.
    pub fn view_missing(&self, v: usize, i: usize) -> bool {
        self.masks[v].column(i).iter().all(|&o| !o)
    }

    /// True when sample `i` has at least one missing entry in view `v`.
    pub fn has_missing(&self, v: usize, i: usize) -> bool {
        self.masks[v].column(i).iter().any(|&o| !o)
    }

    /// Samples with no observed entry in any view.
    pub fn unobserved_samples(&self) -> Vec<usize> {
        let n = self.masks.first().map_or(0, |m| m.ncols());
        (0..n)
            .filter(|&i| (0..self.masks.len()).all(|v| self.view_missing(v, i)))
            .collect()
    }

    /// Mask as a 0/1 float matrix.
    pub fn as_float(&self, v: usize) -> Matrix {
        self.masks[v].map(|o| if o { 1.0 } else { 0.0 })
    }
}

/// Replaces missing entries by the mean of the observed entries of the same
/// feature row. Rows with no observed entry are filled with zeros.
pub fn mean_impute(view: &Matrix, mask: &DMatrix<bool>) -> Matrix {
    assert_eq!(view.shape(), mask.shape(), "mask shape must match view");
    let mut out = view.clone();
    for r in 0..view.nrows() {
        let (sum, count) = (0..view.ncols())
            .filter(|&c| mask[(r, c)])
            .fold((0.0, 0usize), |(s, k), c| (s + view[(r, c)], k + 1));
        let fill = if count == 0 {
            warn!("feature row {r} has no observed entries; imputing zeros");
            0.0
        } else {
            sum / count as f64
        };
        for c in 0..view.ncols() {
            if !mask[(r, c)] {
                out[(r, c)] = fill;
            }
        }
    }
    out
}

/// Mean-imputes every view of a masked dataset.
pub fn mean_impute_all(ds: &MultiViewDataset, masks: &MaskMatrix) -> Vec<Matrix> {
    ds.views()
        .iter()
        .zip(masks.views())
        .map(|(x, m)| mean_impute(x, m))
        .collect()
}
