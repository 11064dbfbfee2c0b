//! AdamW against an independently written reference, and the guarded step's
//! off-switch and moment-consistency contracts.

mod oracles;

use proptest::prelude::*;
use trainguard::governor::{Governor, GuardConfig};
use trainguard::optimizer::{guarded_step, ClipConfig, OptimizerConfig, OptimizerState, ParamLayout};

#[test]
fn hundred_random_steps_match_reference() {
    let worst = oracles::adamw_vs_reference(2024, 5, 100);
    assert!(worst.param <= 1e-12, "{worst:?}");
    assert!(worst.delta <= 1e-9, "{worst:?}");
    assert!(worst.moments <= 1e-12, "{worst:?}");
    assert_eq!(worst.step_count_mismatches, 0);
}

#[test]
fn first_step_closed_form() {
    assert!(oracles::first_step_error() < 1e-9);
}

/// Off-switch: a disabled governor gives the exact floating-point
/// trajectory of a hand-written AdamW loop on every task.
#[test]
fn disabled_guard_is_bit_identical_to_plain_adamw() {
    for spec in oracles::default_specs() {
        assert_eq!(oracles::off_switch_divergence(&spec, 1000), None, "{spec:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Skipped steps freeze (m, v, t); applied steps advance t by one.
    #[test]
    fn moments_freeze_exactly_on_skipped_steps(
        losses in prop::collection::vec(prop_oneof![4 => 0.1f64..10.0, 1 => Just(f64::NAN), 1 => Just(f64::INFINITY)], 1..60),
        grads in prop::collection::vec(-5.0f64..5.0, 3),
    ) {
        let cfg = OptimizerConfig::default();
        let layout = ParamLayout::single(3);
        let mut gov = Governor::new(GuardConfig::default()).unwrap();
        let mut opt = OptimizerState::new(3);
        let mut params = vec![0.5, -0.5, 1.0];
        for (step, &loss) in losses.iter().enumerate() {
            let before = opt.clone();
            let p_before = params.clone();
            let mut g = grads.clone();
            let rec = guarded_step(&mut gov, &mut opt, &cfg, &layout, &mut params, &mut g, loss, step as u64, 1e-2, ClipConfig::DISABLED).unwrap();
            if rec.skipped {
                prop_assert!(!loss.is_finite());
                prop_assert_eq!(&opt, &before);
                prop_assert_eq!(&params, &p_before);
            } else {
                prop_assert_eq!(opt.t, before.t + 1);
            }
            prop_assert!(rec.scale >= 0.05 && rec.scale <= 1.0);
        }
    }
}
