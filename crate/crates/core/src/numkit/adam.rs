use serde::{Deserialize, Serialize};

use super::NumError;

/// Adam moment estimates with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self::with_params(len, 1e-3, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        assert!(lr > 0.0 && eps > 0.0, "Adam needs lr > 0 and eps > 0");
        assert!(
            (0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2),
            "Adam decay rates must lie in [0, 1)"
        );
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// Advances the moments with `grad` and returns `lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(&mut self, grad: &[f64]) -> Result<Vec<f64>, NumError> {
        if grad.len() != self.len() {
            return Err(NumError::Dimension(format!(
                "gradient has {} entries, Adam state has {}",
                grad.len(),
                self.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NumError::NonFinite("gradient"));
        }
        self.step_count += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        for ((m, v), &g) in self
            .first_moment
            .iter_mut()
            .zip(self.second_moment.iter_mut())
            .zip(grad)
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
        }
        let c1 = 1.0 - b1.powi(self.step_count as i32);
        let c2 = 1.0 - b2.powi(self.step_count as i32);
        Ok(self
            .first_moment
            .iter()
            .zip(&self.second_moment)
            .map(|(m, v)| self.lr * (m / c1) / ((v / c2).sqrt() + self.eps))
            .collect())
    }

    /// Per-coordinate step sizes `lr / (sqrt(v_hat) + eps)` at the current moments.
    pub fn step_sizes(&self) -> Vec<f64> {
        let c2 = if self.step_count == 0 {
            1.0
        } else {
            1.0 - self.beta2.powi(self.step_count as i32)
        };
        self.second_moment
            .iter()
            .map(|v| self.lr / ((v / c2).sqrt() + self.eps))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_gives_zero_step() {
        let mut s = AdamState::new(3);
        assert_eq!(s.step(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn first_step_is_lr_over_one_plus_eps() {
        let mut s = AdamState::with_params(1, 0.1, 0.9, 0.999, 1e-8);
        let step = s.step(&[1.0]).unwrap()[0];
        assert!((step - 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut s = AdamState::with_params(2, 0.01, 0.9, 0.999, 1e-8);
        let mut last = vec![];
        for _ in 0..2000 {
            last = s.step(&[3.0, -0.5]).unwrap();
        }
        assert!((last[0] - 0.01).abs() < 1e-6);
        assert!((last[1] + 0.01).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let mut s = AdamState::new(2);
        assert!(matches!(s.step(&[1.0]), Err(NumError::Dimension(_))));
    }
}
