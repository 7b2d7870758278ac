use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Polynomial target `τ*(t) = θᵀφ(t − origin)` with `φ = [1, s, …, sⁿ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub theta: DVector<f64>,
    /// s
    pub origin: f64,
}

impl TargetModel {
    pub fn new(order: usize) -> Self {
        Self {
            theta: DVector::zeros(order + 1),
            origin: 0.0,
        }
    }

    pub fn order(&self) -> usize {
        self.theta.len() - 1
    }

    /// (τ, τ̇) at absolute time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let n = self.order();
        let s = t - self.origin;
        (
            self.theta.dot(&basis(n, s)),
            self.theta.dot(&basis_dot(n, s)),
        )
    }

    /// Move the local clock origin without changing the represented curve.
    pub fn rebase(&mut self, new_origin: f64) {
        let j = rebase_matrix(self.order(), new_origin - self.origin);
        self.theta = &j * &self.theta;
        self.origin = new_origin;
    }
}

pub fn basis(order: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(order + 1, |i, _| s.powi(i as i32))
}

pub fn basis_dot(order: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(order + 1, |i, _| {
        if i == 0 {
            0.0
        } else {
            i as f64 * s.powi(i as i32 - 1)
        }
    })
}

pub fn basis_ddot(order: usize, s: f64) -> DVector<f64> {
    DVector::from_fn(order + 1, |i, _| {
        if i < 2 {
            0.0
        } else {
            (i * (i - 1)) as f64 * s.powi(i as i32 - 2)
        }
    })
}

/// θ' = Jθ for a shift of the local clock by `d` (s = s' + d).
pub fn rebase_matrix(order: usize, d: f64) -> DMatrix<f64> {
    DMatrix::from_fn(order + 1, order + 1, |j, i| {
        if i < j {
            0.0
        } else {
            binomial(i, j) * d.powi((i - j) as i32)
        }
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
