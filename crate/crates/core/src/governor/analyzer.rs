use serde::{Deserialize, Serialize};

use super::config::{GuardConfig, ACTIVE_TOLERANCE, RATIO_FLOOR};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Stable,
    Stress,
    Spike,
    Recovery,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Stable => "stable",
            Regime::Stress => "stress",
            Regime::Spike => "spike",
            Regime::Recovery => "recovery",
        }
    }
}

/// What the sensor saw at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub step: u64,
    pub loss: f64,
    /// Present only on probe steps (`step % stats_freq == 0`) with finite gradients.
    pub grad_rms: Option<f64>,
    /// False when any supplied gradient entry is non-finite.
    pub grad_finite: bool,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalyzerState {
    pub loss_ema: f64,
    pub rms_ema: Option<f64>,
    pub regime: Regime,
    pub improving_streak: u32,
    pub initialized: bool,
}

pub fn update_ema(prev: f64, value: f64, decay: f64) -> Result<f64> {
    if !(prev.is_finite() && value.is_finite()) {
        return Err(Error::NonFiniteTelemetry);
    }
    Ok(decay * prev + (1.0 - decay) * value)
}

/// Root-mean-square of each group, reduced across groups by max or mean.
pub fn gradient_rms(grad_groups: &[&[f64]], use_max_rms: bool) -> Result<f64> {
    let groups: Vec<&[f64]> = grad_groups.iter().copied().filter(|g| !g.is_empty()).collect();
    if groups.is_empty() {
        return Err(Error::EmptyGradient);
    }
    let mut reduced = 0.0_f64;
    for group in &groups {
        if group.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
        let mean_sq = group.iter().map(|g| g * g).sum::<f64>() / group.len() as f64;
        let rms = mean_sq.sqrt();
        if use_max_rms {
            reduced = reduced.max(rms);
        } else {
            reduced += rms;
        }
    }
    if !use_max_rms {
        reduced /= groups.len() as f64;
    }
    Ok(reduced)
}

/// Read-only telemetry collection. The loss is sensed every step; the
/// gradient RMS only on probe steps.
pub fn sense(
    step: u64,
    loss: f64,
    grad_groups: Option<&[&[f64]]>,
    lr: f64,
    cfg: &GuardConfig,
) -> TelemetrySample {
    let mut grad_finite = true;
    let mut grad_rms = None;
    if let Some(groups) = grad_groups {
        grad_finite = groups.iter().all(|g| g.iter().all(|x| x.is_finite()));
        if grad_finite && step.is_multiple_of(cfg.stats_freq) {
            grad_rms = gradient_rms(groups, cfg.use_max_rms).ok();
        }
    }
    TelemetrySample {
        step,
        loss,
        grad_rms,
        grad_finite,
        lr,
    }
}

/// Assigns the operating regime for this observation and returns the updated
/// analyzer state.
///
/// Ratios are taken against the EMAs *before* this observation. Spike wins
/// over Stress, which wins over Recovery. Recovery is entered once the loss
/// has been at or below its EMA for `recovery_confirm` consecutive
/// observations while the posture is still damped, and persists until the
/// scale has been released back to `c_max`.
///
/// EMA inputs are capped at `spike_threshold` times the current EMA so that a
/// single outlier cannot blind the detector for the following steps.
/// Non-finite observations never enter the EMAs.
pub fn classify_regime(
    sample: &TelemetrySample,
    state: &AnalyzerState,
    current_scale: f64,
    cfg: &GuardConfig,
) -> (Regime, AnalyzerState) {
    let finite = sample.loss.is_finite() && sample.grad_finite;
    let mut next = *state;

    if !state.initialized {
        if !finite {
            next.regime = Regime::Spike;
            next.improving_streak = 0;
            return (Regime::Spike, next);
        }
        next.initialized = true;
        next.loss_ema = sample.loss;
        next.rms_ema = sample.grad_rms;
        next.regime = Regime::Stable;
        next.improving_streak = 0;
        return (Regime::Stable, next);
    }

    if !finite {
        next.regime = Regime::Spike;
        next.improving_streak = 0;
        return (Regime::Spike, next);
    }

    let ratio = sample.loss / state.loss_ema.max(RATIO_FLOOR);
    let rms_ratio = match (sample.grad_rms, state.rms_ema) {
        (Some(rms), Some(ema)) => Some(rms / ema.max(RATIO_FLOOR)),
        _ => None,
    };

    let regime = if ratio >= cfg.spike_threshold {
        Regime::Spike
    } else if ratio >= cfg.stress_threshold || rms_ratio.is_some_and(|r| r >= cfg.stress_threshold) {
        Regime::Stress
    } else {
        let streak = if ratio <= 1.0 { state.improving_streak + 1 } else { 0 };
        next.improving_streak = streak;
        let damped = current_scale < cfg.c_max - ACTIVE_TOLERANCE;
        let confirmed = streak >= cfg.recovery_confirm;
        if damped && (confirmed || state.regime == Regime::Recovery) {
            Regime::Recovery
        } else {
            Regime::Stable
        }
    };
    if matches!(regime, Regime::Spike | Regime::Stress) {
        next.improving_streak = 0;
    }
    next.regime = regime;

    let capped = sample.loss.min(cfg.spike_threshold * state.loss_ema);
    next.loss_ema = update_ema(state.loss_ema, capped, cfg.ema_decay).unwrap_or(state.loss_ema);
    if let Some(rms) = sample.grad_rms {
        next.rms_ema = Some(match state.rms_ema {
            Some(ema) => update_ema(ema, rms.min(cfg.spike_threshold * ema), cfg.ema_decay).unwrap_or(ema),
            None => rms,
        });
    }
    (regime, next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> GuardConfig {
        GuardConfig {
            stress_threshold: 1.25,
            spike_threshold: 1.8,
            ..Default::default()
        }
    }

    fn sample(step: u64, loss: f64) -> TelemetrySample {
        TelemetrySample {
            step,
            loss,
            grad_rms: None,
            grad_finite: true,
            lr: 1e-3,
        }
    }

    fn warm(loss_ema: f64, regime: Regime) -> AnalyzerState {
        AnalyzerState {
            loss_ema,
            rms_ema: None,
            regime,
            improving_streak: 0,
            initialized: true,
        }
    }

    #[test]
    fn ema_examples() {
        assert_eq!(update_ema(1.0, 1.0, 0.98).unwrap(), 1.0);
        assert_eq!(update_ema(0.0, 2.0, 0.5).unwrap(), 1.0);
        assert_eq!(update_ema(4.0, 0.0, 0.75).unwrap(), 3.0);
        assert!(update_ema(f64::NAN, 1.0, 0.5).is_err());
        assert!(update_ema(1.0, f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn rms_examples() {
        let g = [3.0, 4.0];
        let rms = gradient_rms(&[&g], true).unwrap();
        assert!((rms - 12.5_f64.sqrt()).abs() < 1e-15);
        assert!((rms - 3.53553).abs() < 1e-5);

        let a = [1.0, -1.0, 1.0, -1.0];
        let b = [2.0, 2.0];
        assert_eq!(gradient_rms(&[&a, &b], true).unwrap(), 2.0);
        assert_eq!(gradient_rms(&[&a, &b], false).unwrap(), 1.5);
    }

    #[test]
    fn rms_errors() {
        assert!(matches!(gradient_rms(&[], true), Err(Error::EmptyGradient)));
        assert!(matches!(gradient_rms(&[&[]], true), Err(Error::EmptyGradient)));
        assert!(matches!(gradient_rms(&[&[1.0, f64::NAN]], true), Err(Error::NonFiniteGradient)));
    }

    #[test]
    fn sense_probe_cadence() {
        let cfg = GuardConfig { stats_freq: 10, ..Default::default() };
        let g = [1.0, 2.0];
        let groups: &[&[f64]] = &[&g];
        assert!(sense(0, 2.0, Some(groups), 0.1, &cfg).grad_rms.is_some());
        assert!(sense(7, 2.0, Some(groups), 0.1, &cfg).grad_rms.is_none());
        assert!(sense(20, 2.0, None, 0.1, &cfg).grad_rms.is_none());
        let s = sense(5, f64::NAN, Some(groups), 0.1, &cfg);
        assert!(s.loss.is_nan());
        assert!(s.grad_finite);
        let bad = [f64::INFINITY];
        let s = sense(10, 1.0, Some(&[&bad]), 0.1, &cfg);
        assert!(!s.grad_finite);
        assert!(s.grad_rms.is_none());
    }

    #[test]
    fn first_observation_initializes() {
        let (regime, st) = classify_regime(&sample(0, 2.5), &AnalyzerState::default(), 1.0, &cfg());
        assert_eq!(regime, Regime::Stable);
        assert!(st.initialized);
        assert_eq!(st.loss_ema, 2.5);
    }

    #[test]
    fn classify_examples() {
        let c = cfg();
        let (r, _) = classify_regime(&sample(1, 2.0), &warm(1.0, Regime::Stable), 1.0, &c);
        assert_eq!(r, Regime::Spike);
        let (r, _) = classify_regime(&sample(1, 1.0), &warm(1.0, Regime::Stable), 1.0, &c);
        assert_eq!(r, Regime::Stable);
        let (r, _) = classify_regime(&sample(1, f64::NAN), &warm(1.0, Regime::Stable), 1.0, &c);
        assert_eq!(r, Regime::Spike);
        let (r, _) = classify_regime(&sample(1, 1.3), &warm(1.0, Regime::Stable), 1.0, &c);
        assert_eq!(r, Regime::Stress);
    }

    #[test]
    fn gradient_ratio_triggers_stress() {
        let c = cfg();
        let mut st = warm(1.0, Regime::Stable);
        st.rms_ema = Some(1.0);
        let s = TelemetrySample {
            grad_rms: Some(1.3),
            ..sample(10, 1.0)
        };
        assert_eq!(classify_regime(&s, &st, 1.0, &c).0, Regime::Stress);
    }

    #[test]
    fn recovery_needs_confirmation_and_damped_posture() {
        let c = cfg();
        let mut st = warm(1.0, Regime::Stress);
        let mut regimes = vec![];
        for step in 1..=5 {
            let (r, next) = classify_regime(&sample(step, 0.9), &st, 0.5, &c);
            regimes.push(r);
            st = next;
        }
        assert_eq!(
            regimes,
            [Regime::Stable, Regime::Stable, Regime::Recovery, Regime::Recovery, Regime::Recovery]
        );
        // Recovery persists on a non-improving, non-stressed step while still damped.
        let (r, st2) = classify_regime(&sample(6, 1.0), &st, 0.7, &c);
        assert_eq!(r, Regime::Recovery);
        // Released back to the bound: Stable.
        let (r, _) = classify_regime(&sample(7, 0.8), &st2, 1.0, &c);
        assert_eq!(r, Regime::Stable);
    }

    #[test]
    fn streak_resets_on_trigger() {
        let c = cfg();
        let mut st = warm(1.0, Regime::Stable);
        st.improving_streak = 2;
        let (_, next) = classify_regime(&sample(1, 1.5), &st, 1.0, &c);
        assert_eq!(next.improving_streak, 0);
        let (_, next) = classify_regime(&sample(1, 5.0), &st, 1.0, &c);
        assert_eq!(next.improving_streak, 0);
    }

    #[test]
    fn nan_never_enters_ema() {
        let c = cfg();
        let st = warm(1.25, Regime::Stable);
        for loss in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            let (_, next) = classify_regime(&sample(3, loss), &st, 1.0, &c);
            assert_eq!(next.loss_ema, 1.25);
        }
        let s = TelemetrySample {
            grad_finite: false,
            ..sample(3, 1.0)
        };
        let (r, next) = classify_regime(&s, &st, 1.0, &c);
        assert_eq!(r, Regime::Spike);
        assert_eq!(next.loss_ema, 1.25);
    }

    #[test]
    fn outlier_input_is_capped() {
        let c = cfg();
        let (_, next) = classify_regime(&sample(1, 1e6), &warm(1.0, Regime::Stable), 1.0, &c);
        let expected = c.ema_decay + (1.0 - c.ema_decay) * c.spike_threshold;
        assert!((next.loss_ema - expected).abs() < 1e-15);
    }

    fn any_loss() -> impl Strategy<Value = f64> {
        prop_oneof![
            8 => 0.0..1e6_f64,
            1 => Just(f64::NAN),
            1 => Just(f64::INFINITY),
            1 => Just(f64::NEG_INFINITY),
            1 => -1e3..0.0_f64,
        ]
    }

    proptest! {
        #[test]
        fn regime_is_total_and_ema_stays_finite(
            losses in proptest::collection::vec(any_loss(), 1..60),
            scale in 0.05..=1.0_f64,
        ) {
            let c = cfg();
            let mut st = AnalyzerState::default();
            for (i, loss) in losses.iter().enumerate() {
                let before = st.loss_ema;
                let (regime, next) = classify_regime(&sample(i as u64, *loss), &st, scale, &c);
                prop_assert_eq!(regime, next.regime);
                if next.initialized {
                    prop_assert!(next.loss_ema.is_finite());
                }
                if !loss.is_finite() {
                    prop_assert_eq!(regime, Regime::Spike);
                    prop_assert_eq!(next.loss_ema.to_bits(), before.to_bits());
                }
                st = next;
            }
        }
    }
}
