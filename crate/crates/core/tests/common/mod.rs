#![allow(dead_code)]

use climfs::dataset::{apply_missing, MaskMatrix, MissingKind, MissingScenario, MultiViewDataset, PlantedClusters};
use climfs::model::{row_reweighting, ModelState};
use climfs::numkit::{AdamState, Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub clean: MultiViewDataset,
    pub masked: MultiViewDataset,
    pub masks: MaskMatrix,
}

/// Normalized planted-cluster data with a mixed-missing mask (variable-missing for one view).
pub fn planted(n: usize, c: usize, views: usize, informative: usize, noise: usize, delta: f64, seed: u64) -> Instance {
    let kind = if views > 1 { MissingKind::MixedMissing } else { MissingKind::VariableMissing };
    planted_with(kind, n, c, views, informative, noise, delta, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn planted_with(
    kind: MissingKind,
    n: usize,
    c: usize,
    views: usize,
    informative: usize,
    noise: usize,
    delta: f64,
    seed: u64,
) -> Instance {
    let clean = PlantedClusters::new(n, c, views, informative, noise, seed)
        .generate()
        .unwrap()
        .normalize_columns();
    let sc = MissingScenario::new(kind, delta, seed).unwrap();
    let (masked, masks) = apply_missing(&clean, &sc).unwrap();
    Instance { clean, masked, masks }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A hand-assembled state: all-ones `W`, zero `F^v`, zero graphs, uniform α.
pub fn manual_state(xhat: Vec<Matrix>, fstar: Matrix, lr: f64) -> ModelState {
    let (n, c) = fstar.shape();
    let nv = xhat.len();
    let w: Vec<Matrix> = xhat.iter().map(|x| Matrix::from_element(x.nrows(), c, 1.0)).collect();
    ModelState {
        drow: w.iter().map(|w| row_reweighting(w, 1e-8)).collect(),
        w,
        fv: vec![Matrix::zeros(n, c); nv],
        fstar,
        s: vec![Matrix::zeros(n, n); nv],
        h: Matrix::zeros(n, n),
        alpha: Vector::from_element(nv, 1.0 / nv as f64),
        adam: (0..nv).map(|_| AdamState::with_params(n * c, lr, 0.9, 0.999, 1e-8)).collect(),
        xi: vec![Vector::zeros(n); nv],
        gamma: Vector::zeros(n),
        iteration: 0,
        spectral_fallback: false,
        xhat,
    }
}

/// Objective values must never rise by more than `tol` (relative to magnitude, floor 1).
pub fn assert_non_increasing(values: &[f64], tol: f64, what: &str) {
    for (t, pair) in values.windows(2).enumerate() {
        let slack = tol * pair[0].abs().max(1.0);
        assert!(
            pair[1] <= pair[0] + slack,
            "{what}: step {t} rose from {} to {} (+{:.3e})",
            pair[0],
            pair[1],
            pair[1] - pair[0]
        );
    }
}
