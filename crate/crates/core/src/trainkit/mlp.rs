//! One-hidden-layer tanh regression against a random teacher of the same shape.
//!
//! Parameter layout: `W1` (hidden × input, row-major), `b1`, `w2`, `b2`.

use rand::Rng;

use super::{normal, Batch, BatchData};
use crate::optimizer::ParamLayout;

#[derive(Debug, Clone)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    teacher: Vec<f64>,
    noise: f64,
}

impl Mlp {
    pub(crate) fn new(input: usize, hidden: usize, noise: f64, rng: &mut impl Rng) -> Self {
        let mut teacher = Vec::with_capacity(Self::count(input, hidden));
        let w1_scale = 1.5 / (input as f64).sqrt();
        teacher.extend((0..hidden * input).map(|_| w1_scale * normal(rng)));
        teacher.extend((0..hidden).map(|_| 0.5 * normal(rng)));
        let w2_scale = 2.0 / (hidden as f64).sqrt();
        teacher.extend((0..hidden).map(|_| w2_scale * normal(rng)));
        teacher.push(0.5 * normal(rng));
        Self {
            input,
            hidden,
            teacher,
            noise,
        }
    }

    fn count(input: usize, hidden: usize) -> usize {
        hidden * input + 2 * hidden + 1
    }

    pub fn num_params(&self) -> usize {
        Self::count(self.input, self.hidden)
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::from_sizes(&[self.hidden * self.input, self.hidden, self.hidden, 1])
    }

    pub fn teacher(&self) -> &[f64] {
        &self.teacher
    }

    pub(crate) fn init_params(&self, rng: &mut impl Rng) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        let w1_scale = 1.0 / (self.input as f64).sqrt();
        p.extend((0..self.hidden * self.input).map(|_| w1_scale * normal(rng)));
        p.extend(std::iter::repeat_n(0.0, self.hidden));
        let w2_scale = 1.0 / (self.hidden as f64).sqrt();
        p.extend((0..self.hidden).map(|_| w2_scale * normal(rng)));
        p.push(0.0);
        p
    }

    fn forward(&self, params: &[f64], x: &[f64], hidden_out: &mut [f64]) -> f64 {
        let (w1, rest) = params.split_at(self.hidden * self.input);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        let mut out = b2[0];
        for k in 0..self.hidden {
            let row = &w1[k * self.input..(k + 1) * self.input];
            let a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b1[k];
            let z = a.tanh();
            hidden_out[k] = z;
            out += w2[k] * z;
        }
        out
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng, n: usize) -> Batch {
        let mut features = Vec::with_capacity(n * self.input);
        let mut targets = Vec::with_capacity(n);
        let mut hidden = vec![0.0; self.hidden];
        for _ in 0..n {
            let start = features.len();
            features.extend((0..self.input).map(|_| normal(rng)));
            let y = self.forward(&self.teacher, &features[start..], &mut hidden);
            targets.push(y + self.noise * normal(rng));
        }
        Batch::regression(features, self.input, targets)
    }

    pub(crate) fn loss_grad(&self, params: &[f64], batch: &Batch, mut grads: Option<&mut [f64]>) -> f64 {
        let BatchData::Regression { features, width, targets } = &batch.data else {
            unreachable!("mlp task fed a token batch");
        };
        let n = targets.len() as f64;
        let nw1 = self.hidden * self.input;
        let w2 = &params[nw1 + self.hidden..nw1 + 2 * self.hidden];
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let mut z = vec![0.0; self.hidden];
        let mut loss = 0.0;
        for (x, y) in features.chunks_exact(*width).zip(targets) {
            let pred = self.forward(params, x, &mut z);
            let r = pred - y;
            loss += 0.5 * r * r;
            let Some(g) = grads.as_deref_mut() else { continue };
            let dout = r / n;
            let (gw1, rest) = g.split_at_mut(nw1);
            let (gb1, rest) = rest.split_at_mut(self.hidden);
            let (gw2, gb2) = rest.split_at_mut(self.hidden);
            gb2[0] += dout;
            for k in 0..self.hidden {
                gw2[k] += dout * z[k];
                let da = dout * w2[k] * (1.0 - z[k] * z[k]);
                gb1[k] += da;
                for (gw, xi) in gw1[k * self.input..(k + 1) * self.input].iter_mut().zip(x) {
                    *gw += da * xi;
                }
            }
        }
        loss / n
    }
}
