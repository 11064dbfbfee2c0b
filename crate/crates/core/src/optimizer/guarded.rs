use std::ops::Range;

use super::adamw::{adamw_step_in_place, OptimizerConfig, OptimizerState};
use super::clip::{clip_global_norm, ClipConfig};
use crate::governor::{apply_posture, Governor, StepRecord};
use crate::{Error, Result};

/// Contiguous parameter groups covering a flat parameter vector. Gradient
/// probes compute one RMS per group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    groups: Vec<Range<usize>>,
    len: usize,
}

impl ParamLayout {
    pub fn single(len: usize) -> Self {
        Self {
            groups: std::iter::once(0..len).collect(),
            len,
        }
    }

    /// Builds a layout from consecutive group sizes.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        let mut start = 0;
        let groups = sizes
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect();
        Self { groups, len: start }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.groups
    }

    pub fn split<'a>(&self, values: &'a [f64]) -> Vec<&'a [f64]> {
        self.groups.iter().map(|r| &values[r.clone()]).collect()
    }
}

/// One governed optimizer step.
///
/// Order is fixed: clip (if configured) → sense → classify → posture →
/// AdamW + actuation (unless skipped) → log. The moments always see the
/// post-clip gradient; the posture only scales the applied delta, so with a
/// unit scale the result is bit-identical to a plain AdamW step.
#[allow(clippy::too_many_arguments)]
pub fn guarded_step(
    governor: &mut Governor,
    opt: &mut OptimizerState,
    opt_cfg: &OptimizerConfig,
    layout: &ParamLayout,
    params: &mut [f64],
    grads: &mut [f64],
    loss: f64,
    step: u64,
    lr_t: f64,
    clip: ClipConfig,
) -> Result<StepRecord> {
    if params.len() != layout.len() || grads.len() != layout.len() {
        return Err(Error::ShapeMismatch {
            expected: layout.len(),
            got: if params.len() != layout.len() { params.len() } else { grads.len() },
        });
    }
    let grads_finite = grads.iter().all(|g| g.is_finite());
    if let (Some(g), true) = (clip.g, grads_finite) {
        clip_global_norm(grads, g)?;
    }

    let groups = layout.split(grads);
    let (sample, posture) = governor.observe(step, loss, Some(&groups), lr_t);

    if !posture.skip_step {
        let mut delta = vec![0.0; params.len()];
        adamw_step_in_place(opt, params, grads, lr_t, opt_cfg, &mut delta)?;
        let applied = apply_posture(&delta, &posture)?;
        for (p, d) in params.iter_mut().zip(&applied) {
            *p += d;
        }
    }
    governor.record(&sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::{GuardConfig, Regime};

    fn setup(cfg: GuardConfig) -> (Governor, OptimizerState, OptimizerConfig, ParamLayout) {
        (
            Governor::new(cfg).unwrap(),
            OptimizerState::new(2),
            OptimizerConfig {
                lr: 0.1,
                ..Default::default()
            },
            ParamLayout::single(2),
        )
    }

    #[test]
    fn nan_loss_skips_everything() {
        let (mut gov, mut opt, cfg, layout) = setup(GuardConfig::default());
        let mut params = [1.0, 2.0];
        let mut grads = [0.5, 0.5];
        guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut grads, 1.0, 0, 0.1, ClipConfig::DISABLED).unwrap();
        let (p0, o0) = (params, opt.clone());
        let rec = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut grads, f64::NAN, 1, 0.1, ClipConfig::DISABLED)
            .unwrap();
        assert!(rec.skipped && rec.active);
        assert_eq!(rec.regime, Regime::Spike);
        assert_eq!(params, p0);
        assert_eq!(opt, o0);
    }

    #[test]
    fn non_finite_gradient_skips_when_guarded() {
        let (mut gov, mut opt, cfg, layout) = setup(GuardConfig::default());
        let mut params = [1.0, 2.0];
        let mut grads = [f64::INFINITY, 0.5];
        let rec = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut grads, 1.0, 0, 0.1, ClipConfig::global_norm(1.0))
            .unwrap();
        assert!(rec.skipped);
        assert_eq!(params, [1.0, 2.0]);
        assert_eq!(opt.t, 0);
    }

    #[test]
    fn disabled_guard_propagates_non_finite_gradient() {
        let (mut gov, mut opt, cfg, layout) = setup(GuardConfig::disabled());
        let mut params = [1.0, 2.0];
        let mut grads = [f64::NAN, 0.5];
        let err = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut grads, 1.0, 0, 0.1, ClipConfig::DISABLED);
        assert!(matches!(err, Err(Error::NonFiniteGradient)));
    }

    #[test]
    fn disabled_guard_matches_plain_adamw() {
        let (mut gov, mut opt, cfg, layout) = setup(GuardConfig::disabled());
        let mut plain_opt = OptimizerState::new(2);
        let mut params = [1.0, -2.0];
        let mut plain = params;
        for step in 0..50u64 {
            let loss = if step % 7 == 3 { 100.0 } else { 1.0 };
            let g = [params[0] * 0.3 + 0.1, params[1] - 0.2];
            let mut grads = g;
            let rec = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut grads, loss, step, 0.1, ClipConfig::DISABLED)
                .unwrap();
            assert_eq!(rec.scale, 1.0);
            assert!(!rec.active);

            let pg = [plain[0] * 0.3 + 0.1, plain[1] - 0.2];
            let (delta, next) = crate::optimizer::adamw_step(&plain_opt, &plain, &pg, 0.1, &cfg).unwrap();
            plain_opt = next;
            for (p, d) in plain.iter_mut().zip(&delta) {
                *p += d;
            }
            assert_eq!(params.map(f64::to_bits), plain.map(f64::to_bits));
        }
    }

    #[test]
    fn spike_halves_applied_step_but_not_moments() {
        let (mut gov, mut opt, cfg, layout) = setup(GuardConfig::default());
        let mut params = [0.0, 0.0];
        guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut [1.0, 1.0], 1.0, 0, 0.1, ClipConfig::DISABLED).unwrap();
        let before = params;
        let mut reference = opt.clone();
        let rec = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut [1.0, 1.0], 10.0, 1, 0.1, ClipConfig::DISABLED)
            .unwrap();
        assert_eq!(rec.regime, Regime::Spike);
        assert_eq!(rec.scale, 0.5);
        let mut delta = [0.0; 2];
        adamw_step_in_place(&mut reference, &before, &[1.0, 1.0], 0.1, &cfg, &mut delta).unwrap();
        assert_eq!(opt, reference);
        for i in 0..2 {
            assert_eq!(params[i], before[i] + 0.5 * delta[i]);
        }
    }

    #[test]
    fn layout_split() {
        let l = ParamLayout::from_sizes(&[2, 3, 1]);
        assert_eq!(l.len(), 6);
        let v = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let parts = l.split(&v);
        assert_eq!(parts, vec![&v[0..2], &v[2..5], &v[5..6]]);
    }
}
