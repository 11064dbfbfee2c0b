//! Least-squares bowl with axis-aligned ill-conditioning.
//!
//! Features are `x_j = s_j z_j` with `z ~ N(0, 1)` and `s_j²` log-spaced over
//! `[1, condition]`, targets `y = x·w* + noise·ε`. The population objective is
//! `½ (w - w*)ᵀ H (w - w*) + noise²/2` with `H = diag(s²)`, so its gradient is
//! `Hw - b` with `b = Hw*`.

use rand::Rng;

use super::{normal, Batch, BatchData};

#[derive(Debug, Clone)]
pub struct Quadratic {
    scales: Vec<f64>,
    w_star: Vec<f64>,
    noise: f64,
}

impl Quadratic {
    pub(crate) fn new(dim: usize, condition: f64, noise: f64, rng: &mut impl Rng) -> Self {
        let scales = (0..dim)
            .map(|j| {
                let frac = if dim > 1 { j as f64 / (dim - 1) as f64 } else { 0.0 };
                condition.powf(0.5 * frac)
            })
            .collect();
        let w_star = (0..dim).map(|_| normal(rng)).collect();
        Self { scales, w_star, noise }
    }

    pub fn dim(&self) -> usize {
        self.scales.len()
    }

    pub fn minimizer(&self) -> &[f64] {
        &self.w_star
    }

    /// Diagonal of the population Hessian.
    pub fn hessian_diag(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s * s).collect()
    }

    /// Linear term `b = H w*`.
    pub fn linear_term(&self) -> Vec<f64> {
        self.scales.iter().zip(&self.w_star).map(|(s, w)| s * s * w).collect()
    }

    pub fn population_gradient(&self, w: &[f64]) -> Vec<f64> {
        let b = self.linear_term();
        self.hessian_diag().iter().zip(w).zip(&b).map(|((h, w), b)| h * w - b).collect()
    }

    pub(crate) fn init_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        (0..self.dim()).map(|_| normal(rng)).collect()
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng, n: usize) -> Batch {
        let d = self.dim();
        let mut features = Vec::with_capacity(n * d);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let mut y = 0.0;
            for j in 0..d {
                let x = self.scales[j] * normal(rng);
                y += x * self.w_star[j];
                features.push(x);
            }
            targets.push(y + self.noise * normal(rng));
        }
        Batch::regression(features, d, targets)
    }

    pub(crate) fn loss_grad(&self, w: &[f64], batch: &Batch, mut grads: Option<&mut [f64]>) -> f64 {
        let BatchData::Regression { features, width, targets } = &batch.data else {
            unreachable!("quadratic task fed a token batch");
        };
        let n = targets.len() as f64;
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = 0.0;
        for (row, y) in features.chunks_exact(*width).zip(targets) {
            let pred: f64 = row.iter().zip(w).map(|(x, w)| x * w).sum();
            let r = pred - y;
            loss += 0.5 * r * r;
            if let Some(g) = grads.as_deref_mut() {
                for (gj, x) in g.iter_mut().zip(row) {
                    *gj += r * x / n;
                }
            }
        }
        loss / n
    }
}
