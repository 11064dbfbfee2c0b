#[derive(Debug, Clone, PartialEq)]
pub enum BatchData {
    /// Row-major feature matrix (`targets.len()` rows of `width` columns).
    Regression {
        features: Vec<f64>,
        width: usize,
        targets: Vec<f64>,
    },
    /// Next-token pairs. `target_weight` multiplies every example's loss.
    Tokens {
        context: Vec<usize>,
        next: Vec<usize>,
        target_weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub data: BatchData,
    pub outlier_flag: bool,
}

impl Batch {
    pub fn regression(features: Vec<f64>, width: usize, targets: Vec<f64>) -> Self {
        debug_assert_eq!(features.len(), width * targets.len());
        Self {
            data: BatchData::Regression {
                features,
                width,
                targets,
            },
            outlier_flag: false,
        }
    }

    pub fn tokens(context: Vec<usize>, next: Vec<usize>) -> Self {
        debug_assert_eq!(context.len(), next.len());
        Self {
            data: BatchData::Tokens {
                context,
                next,
                target_weight: 1.0,
            },
            outlier_flag: false,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            BatchData::Regression { targets, .. } => targets.len(),
            BatchData::Tokens { next, .. } => next.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multiplies regression targets (or the token loss weight) by `factor`.
    pub fn scale_targets(&mut self, factor: f64) {
        match &mut self.data {
            BatchData::Regression { targets, .. } => targets.iter_mut().for_each(|t| *t *= factor),
            BatchData::Tokens { target_weight, .. } => *target_weight *= factor,
        }
    }
}
