use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MaskMatrix, MultiViewDataset};
use crate::error::{ClimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingKind {
    /// Whole views removed for a fraction of the samples.
    ViewMissing,
    /// Individual entries removed from every view.
    VariableMissing,
    /// View removal followed by entry removal on what is left.
    MixedMissing,
}

/// A seeded missing-data protocol. Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingScenario {
    pub kind: MissingKind,
    pub delta: f64,
    pub seed: u64,
}

impl MissingScenario {
    pub fn new(kind: MissingKind, delta: f64, seed: u64) -> Result<Self> {
        let s = Self { kind, delta, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ClimError::Scenario(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

fn rounded(fraction: f64, count: usize) -> usize {
    (fraction * count as f64).round() as usize
}

/// Generates masks for `scenario` and returns the dataset with missing entries
/// set to zero alongside the masks.
///
/// * view-missing: `round(delta * n)` distinct samples each lose one uniformly
///   chosen view.
/// * variable-missing: each view loses `round(delta * d_v * n)` entries drawn
///   uniformly without replacement.
/// * mixed-missing: view removal as above, then each view loses
///   `round(delta * remaining)` of its still-observed entries.
pub fn apply_missing(
    ds: &MultiViewDataset,
    scenario: &MissingScenario,
) -> Result<(MultiViewDataset, MaskMatrix)> {
    scenario.validate()?;
    let n = ds.n_samples();
    let n_views = ds.n_views();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut masks: Vec<DMatrix<bool>> = ds
        .views()
        .iter()
        .map(|x| DMatrix::from_element(x.nrows(), n, true))
        .collect();

    let removes_views = matches!(
        scenario.kind,
        MissingKind::ViewMissing | MissingKind::MixedMissing
    );
    if removes_views {
        if n_views < 2 {
            return Err(ClimError::Scenario(
                "removing whole views needs at least two views".into(),
            ));
        }
        let mut chosen = index::sample(&mut rng, n, rounded(scenario.delta, n)).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            let v = rng.random_range(0..n_views);
            masks[v].column_mut(i).fill(false);
        }
    }
    if matches!(
        scenario.kind,
        MissingKind::VariableMissing | MissingKind::MixedMissing
    ) {
        for mask in masks.iter_mut() {
            let observed: Vec<usize> = mask
                .iter()
                .enumerate()
                .filter(|(_, &o)| o)
                .map(|(p, _)| p)
                .collect();
            let amount = rounded(scenario.delta, observed.len());
            let mut picks = index::sample(&mut rng, observed.len(), amount).into_vec();
            picks.sort_unstable();
            let flat = mask.as_mut_slice();
            for p in picks {
                flat[observed[p]] = false;
            }
        }
    }

    let masks = MaskMatrix::new(masks);
    let lost = masks.unobserved_samples();
    if !lost.is_empty() {
        return Err(ClimError::Scenario(format!(
            "delta {} leaves {} sample(s) with no observed view (first: {})",
            scenario.delta,
            lost.len(),
            lost[0]
        )));
    }
    let masked = apply_mask(ds, &masks)?;
    Ok((masked, masks))
}

/// Zeroes every unobserved entry.
pub fn apply_mask(ds: &MultiViewDataset, masks: &MaskMatrix) -> Result<MultiViewDataset> {
    masks.check_shapes(ds)?;
    let views = ds
        .views()
        .iter()
        .zip(masks.views())
        .map(|(x, m)| x.zip_map(m, |val, o| if o { val } else { 0.0 }))
        .collect();
    ds.with_views(views)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Matrix;

    fn dataset(n_views: usize, d: usize, n: usize) -> MultiViewDataset {
        let views = (0..n_views)
            .map(|v| Matrix::from_fn(d + v, n, |i, j| 1.0 + (i * n + j) as f64))
            .collect();
        MultiViewDataset::from_views(views, None).unwrap()
    }

    #[test]
    fn all_observed_mask_leaves_data_unchanged() {
        let ds = dataset(2, 3, 4);
        let masks = MaskMatrix::all_observed(&ds);
        assert_eq!(apply_mask(&ds, &masks).unwrap(), ds);
    }

    #[test]
    fn same_seed_same_masks() {
        let ds = dataset(3, 5, 20);
        let s = MissingScenario::new(MissingKind::MixedMissing, 0.3, 7).unwrap();
        let (_, a) = apply_missing(&ds, &s).unwrap();
        let (_, b) = apply_missing(&ds, &s).unwrap();
        assert_eq!(a, b);
        let other = MissingScenario { seed: 8, ..s };
        assert_ne!(apply_missing(&ds, &other).unwrap().1, a);
    }

    #[test]
    fn half_of_ten_samples_lose_one_view() {
        let ds = dataset(2, 4, 10);
        let s = MissingScenario::new(MissingKind::ViewMissing, 0.5, 1).unwrap();
        let (masked, masks) = apply_missing(&ds, &s).unwrap();
        let mut affected = 0;
        for i in 0..10 {
            let lost = (0..2).filter(|&v| masks.view_missing(v, i)).count();
            let partial = (0..2)
                .filter(|&v| masks.has_missing(v, i) && !masks.view_missing(v, i))
                .count();
            assert!(lost <= 1);
            assert_eq!(partial, 0);
            affected += lost;
            for v in 0..2 {
                if masks.view_missing(v, i) {
                    assert!(masked.view(v).column(i).iter().all(|&x| x == 0.0));
                }
            }
        }
        assert_eq!(affected, 5);
    }

    #[test]
    fn observed_values_are_untouched() {
        let ds = dataset(2, 6, 15);
        for kind in [
            MissingKind::ViewMissing,
            MissingKind::VariableMissing,
            MissingKind::MixedMissing,
        ] {
            let (masked, masks) = apply_missing(&ds, &MissingScenario::new(kind, 0.4, 3).unwrap()).unwrap();
            for v in 0..2 {
                for (p, &o) in masks.view(v).iter().enumerate() {
                    if o {
                        assert_eq!(masked.view(v).as_slice()[p], ds.view(v).as_slice()[p]);
                    } else {
                        assert_eq!(masked.view(v).as_slice()[p], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn variable_missing_counts_are_exact() {
        let ds = dataset(2, 7, 13);
        let s = MissingScenario::new(MissingKind::VariableMissing, 0.3, 5).unwrap();
        let (_, masks) = apply_missing(&ds, &s).unwrap();
        assert_eq!(masks.missing_count(0), (0.3f64 * 91.0).round() as usize);
        assert_eq!(masks.missing_count(1), (0.3f64 * 104.0).round() as usize);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(MissingScenario::new(MissingKind::ViewMissing, 0.0, 1).is_err());
        assert!(MissingScenario::new(MissingKind::ViewMissing, 1.0, 1).is_err());
        let single = dataset(1, 3, 5);
        let s = MissingScenario::new(MissingKind::ViewMissing, 0.5, 1).unwrap();
        assert!(matches!(apply_missing(&single, &s), Err(ClimError::Scenario(_))));
    }

    #[test]
    fn guard_rejects_samples_losing_everything() {
        // one feature per view: mixed removal at a high rate strips some sample bare
        let views = vec![Matrix::from_element(1, 30, 1.0), Matrix::from_element(1, 30, 2.0)];
        let ds = MultiViewDataset::from_views(views, None).unwrap();
        let s = MissingScenario::new(MissingKind::MixedMissing, 0.9, 2).unwrap();
        assert!(matches!(apply_missing(&ds, &s), Err(ClimError::Scenario(_))));
    }
}
