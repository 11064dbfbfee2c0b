//! Bigram next-token model: a full logit table `W[context][next]` trained
//! with softmax cross-entropy on a corpus walked from a random Markov chain.

use rand::Rng;

use super::{normal, Batch, BatchData};

#[derive(Debug, Clone)]
pub struct Bigram {
    alphabet: usize,
    transitions: Vec<f64>,
    corpus: Vec<usize>,
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Numerically stable `log Σ exp(row)`.
fn log_sum_exp(row: &[f64]) -> f64 {
    let peak = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if !peak.is_finite() {
        return peak;
    }
    peak + row.iter().map(|v| (v - peak).exp()).sum::<f64>().ln()
}

impl Bigram {
    pub(crate) fn new(
        alphabet: usize,
        corpus_len: usize,
        peakedness: f64,
        teacher_rng: &mut impl Rng,
        corpus_rng: &mut impl Rng,
    ) -> Self {
        let mut transitions = Vec::with_capacity(alphabet * alphabet);
        for _ in 0..alphabet {
            let logits: Vec<f64> = (0..alphabet).map(|_| peakedness * normal(teacher_rng)).collect();
            let lse = log_sum_exp(&logits);
            transitions.extend(logits.iter().map(|l| (l - lse).exp()));
        }
        let mut this = Self {
            alphabet,
            transitions,
            corpus: Vec::new(),
        };
        this.corpus = this.walk(corpus_len, corpus_rng);
        this
    }

    fn walk(&self, len: usize, rng: &mut impl Rng) -> Vec<usize> {
        let mut tokens = Vec::with_capacity(len);
        let mut current = rng.random_range(0..self.alphabet);
        tokens.push(current);
        while tokens.len() < len {
            current = sample_categorical(self.row(current), rng);
            tokens.push(current);
        }
        tokens
    }

    fn row(&self, context: usize) -> &[f64] {
        &self.transitions[context * self.alphabet..(context + 1) * self.alphabet]
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn num_params(&self) -> usize {
        self.alphabet * self.alphabet
    }

    pub fn corpus(&self) -> &[usize] {
        &self.corpus
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Uniform logits: initial loss is exactly `ln(alphabet)`.
    pub(crate) fn init_params(&self) -> Vec<f64> {
        vec![0.0; self.num_params()]
    }

    /// A fresh walk, disjoint from the training corpus stream.
    pub(crate) fn eval_batch(&self, rng: &mut impl Rng, n: usize) -> Batch {
        let tokens = self.walk(n + 1, rng);
        Batch::tokens(tokens[..n].to_vec(), tokens[1..].to_vec())
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng, n: usize) -> Batch {
        let mut context = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        for _ in 0..n {
            let i = rng.random_range(0..self.corpus.len() - 1);
            context.push(self.corpus[i]);
            next.push(self.corpus[i + 1]);
        }
        Batch::tokens(context, next)
    }

    pub(crate) fn loss_grad(&self, params: &[f64], batch: &Batch, mut grads: Option<&mut [f64]>) -> f64 {
        let BatchData::Tokens {
            context,
            next,
            target_weight,
        } = &batch.data
        else {
            unreachable!("bigram task fed a regression batch");
        };
        let a = self.alphabet;
        let n = next.len() as f64;
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = 0.0;
        for (&c, &t) in context.iter().zip(next) {
            let row = &params[c * a..(c + 1) * a];
            let lse = log_sum_exp(row);
            loss += lse - row[t];
            if let Some(g) = grads.as_deref_mut() {
                let scale = target_weight / n;
                for (j, gj) in g[c * a..(c + 1) * a].iter_mut().enumerate() {
                    let p = (row[j] - lse).exp();
                    let y = if j == t { 1.0 } else { 0.0 };
                    *gj += scale * (p - y);
                }
            }
        }
        target_weight * loss / n
    }
}
