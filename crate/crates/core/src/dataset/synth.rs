use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{ClimError, Result};
use crate::numkit::Matrix;

/// Planted-cluster multi-view generator.
///
/// Every view has `informative` features whose value is a per-cluster center
/// drawn from `N(0, spread²)` plus `N(0, noise_sd²)` noise, followed by `noise`
/// features drawn from `N(0, spread² + noise_sd²)` independently of the cluster,
/// so informative and noise features have the same marginal variance. Cluster
/// sizes are balanced (`n / clusters`, remainder spread over the first clusters)
/// and sample order is shuffled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedClusters {
    pub n_samples: usize,
    pub n_clusters: usize,
    pub n_views: usize,
    pub informative: usize,
    pub noise: usize,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    pub seed: u64,
}

fn default_spread() -> f64 {
    1.0
}

fn default_noise_sd() -> f64 {
    0.5
}

impl PlantedClusters {
    pub fn new(
        n_samples: usize,
        n_clusters: usize,
        n_views: usize,
        informative: usize,
        noise: usize,
        seed: u64,
    ) -> Self {
        Self {
            n_samples,
            n_clusters,
            n_views,
            informative,
            noise,
            spread: default_spread(),
            noise_sd: default_noise_sd(),
            seed,
        }
    }

    pub fn generate(&self) -> Result<MultiViewDataset> {
        if self.n_clusters == 0 || self.n_clusters > self.n_samples {
            return Err(ClimError::Config(format!(
                "need 1 <= clusters <= samples, got {} clusters for {} samples",
                self.n_clusters, self.n_samples
            )));
        }
        if self.n_views == 0 || self.informative + self.noise == 0 {
            return Err(ClimError::Config("generator needs views and features".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut labels: Vec<usize> = (0..self.n_samples).map(|i| i % self.n_clusters).collect();
        labels.shuffle(&mut rng);

        let d = self.informative + self.noise;
        let mut views = Vec::with_capacity(self.n_views);
        for _ in 0..self.n_views {
            let centers = Matrix::from_fn(self.informative, self.n_clusters, |_, _| {
                self.spread * rng.sample::<f64, _>(StandardNormal)
            });
            let noise_scale = (self.spread * self.spread + self.noise_sd * self.noise_sd).sqrt();
            let mut x = Matrix::zeros(d, self.n_samples);
            for (j, &label) in labels.iter().enumerate() {
                for r in 0..d {
                    let eps: f64 = rng.sample(StandardNormal);
                    x[(r, j)] = if r < self.informative {
                        centers[(r, label)] + self.noise_sd * eps
                    } else {
                        noise_scale * eps
                    };
                }
            }
            views.push(x);
        }
        MultiViewDataset::from_views(views, Some(labels))
    }
}
