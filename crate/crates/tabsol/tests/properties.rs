//! Property tests for the structural invariants: bounded activations, sign
//! conventions, counter range and exact arithmetic, agreement between the
//! counter emulator and the real-valued sign-sign rule, metric invariances,
//! and schedule bijectivity.

use nalgebra::DVector;
use proptest::prelude::*;

use tabsol::bench::{
    gen_target, make_schedule, percent_rms_error, Schedule, ShuffleMode, TargetFunction,
    TargetKind,
};
use tabsol::dlb::{sol_hw_step_activations, DlbArray, DlbState};
use tabsol::net::{init_network, sign_bit, NetworkConfig, OutputWeights};
use tabsol::trainers::sol_step;

fn arb_target() -> impl Strategy<Value = TargetFunction> {
    (
        prop_oneof![
            Just(TargetKind::Sine),
            Just(TargetKind::Cube),
            Just(TargetKind::Sinc),
            Just(TargetKind::Complex),
        ],
        0.1f64..1000.0,
    )
        .prop_map(|(kind, amplitude)| {
            let mut f = TargetFunction::new(kind);
            f.amplitude = amplitude;
            f
        })
}

proptest! {
    /// tanh keeps every hidden activation strictly inside [-1, 1].
    #[test]
    fn activations_bounded(
        seed in 0u64..1000,
        hidden in 1usize..60,
        gain in 0.1f64..50.0,
        x in -2.0f64..2.0,
    ) {
        let net = init_network(&NetworkConfig {
            hidden_count: hidden,
            activation_gain: gain,
            seed,
            ..NetworkConfig::default()
        }).unwrap();
        let h = net.hidden_activations_scalar(x).unwrap();
        prop_assert!(h.iter().all(|v| v.abs() <= 1.0));
    }

    /// The counter magnitude never leaves its range, whatever the input.
    #[test]
    fn counter_stays_in_range(
        bits in 4u8..=16,
        steps in proptest::collection::vec((any::<bool>(), any::<bool>(), 0u8..=7), 1..200),
    ) {
        let mut state = DlbState::new(bits, 0).unwrap();
        for (se, sh, add_no) in steps {
            if add_no < bits {
                state.add_no = add_no;
            }
            state = state.update(se, sh);
            prop_assert!(state.mag_w <= state.max_mag());
            prop_assert!(state.weight_value().abs() < 1.0);
        }
    }

    /// Away from the saturation rail, one counter step moves the weight by
    /// exactly add_count/2^bits in the sign(e)*sign(h) direction.
    #[test]
    fn counter_matches_exact_arithmetic(
        mag in 0u32..8192,
        sign in any::<bool>(),
        add_no in 0u8..=7,
        se in any::<bool>(),
        sh in any::<bool>(),
    ) {
        let before = DlbState { mag_w: mag, sign_w: sign, add_no, bits: 13 };
        let after = before.update(se, sh);
        let step = (1u32 << add_no) as f64 / 8192.0;
        let dir = if se ^ sh { -1.0 } else { 1.0 };
        let limit = 8191.0 / 8192.0;
        let expected = (before.weight_value() + dir * step).clamp(-limit, limit);
        prop_assert_eq!(after.weight_value(), expected);
    }

    /// The counter emulator and the real-valued sign-sign rule walk the same
    /// trajectory while no counter saturates (weights start at zero and the
    /// step count keeps them far from the rails).
    #[test]
    fn emulator_agrees_with_real_rule(
        seed in 0u64..500,
        hidden in 1usize..20,
        n_steps in 1usize..100,
    ) {
        let net = init_network(&NetworkConfig {
            hidden_count: hidden,
            activation_gain: 10.0,
            seed,
            ..NetworkConfig::default()
        }).unwrap();
        let ds = gen_target(&TargetFunction::new(TargetKind::Sine), 20).unwrap();
        let scale = 200.0;

        let mut dlbs = DlbArray::new(hidden, 13, 0).unwrap();
        let mut w = OutputWeights::zeros(1, hidden);
        for step in 0..n_steps {
            let idx = step % 20;
            let h = net.hidden_activations_scalar(ds.inputs[idx]).unwrap();
            let y = ds.targets[idx] / scale;
            sol_hw_step_activations(&mut dlbs, h.as_slice(), y);
            sol_step(&mut w, &h, &DVector::from_element(1, y), 8192.0).unwrap();
        }
        // n_steps < 8192 steps of 1 LSB cannot reach the rails from zero.
        for (hw, real) in dlbs.weights().iter().zip(w.matrix.iter()) {
            prop_assert!((hw - real).abs() < 1e-12, "hw {hw} vs real {real}");
        }
    }

    /// Percent RMS error is invariant under a common positive scaling.
    #[test]
    fn percent_error_scale_invariance(
        scale in 1e-3f64..1e3,
        pairs in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50),
    ) {
        let target: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        prop_assume!(target.iter().any(|&t| t != 0.0));
        let pred: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let a = percent_rms_error(&pred, &target).unwrap();
        let ts: Vec<f64> = target.iter().map(|v| scale * v).collect();
        let ps: Vec<f64> = pred.iter().map(|v| scale * v).collect();
        let b = percent_rms_error(&ps, &ts).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    /// Every epoch of a random schedule is a permutation of the grid.
    #[test]
    fn schedule_epochs_are_permutations(
        n in 1usize..300,
        epochs in 0usize..6,
        seed in any::<u64>(),
    ) {
        let order = make_schedule(n, &Schedule { epochs, mode: ShuffleMode::Random { seed } });
        prop_assert_eq!(order.len(), epochs * n);
        for epoch in order.chunks(n) {
            let mut seen = vec![false; n];
            for &i in epoch {
                prop_assert!(i < n && !seen[i]);
                seen[i] = true;
            }
        }
    }

    /// Sign convention: the sign bit is true exactly for negative values.
    #[test]
    fn sign_bit_is_strict_negativity(v in -1e6f64..1e6) {
        prop_assert_eq!(sign_bit(v), v < 0.0);
    }

    /// Targets are odd or even as their formulas dictate; the grid is
    /// symmetric, so generated datasets inherit the symmetry.
    #[test]
    fn target_symmetry(f in arb_target(), n in 2usize..100) {
        let ds = gen_target(&f, 2 * n + 1).unwrap();
        for i in 0..ds.inputs.len() {
            let j = ds.inputs.len() - 1 - i;
            let (a, b) = (ds.targets[i], ds.targets[j]);
            match f.kind {
                // odd functions: f(-x) = -f(x)
                TargetKind::Sine | TargetKind::Cube => {
                    prop_assert!((a + b).abs() <= 1e-9 * f.amplitude.max(1.0))
                }
                // sinc is even
                TargetKind::Sinc => prop_assert!((a - b).abs() <= 1e-9 * f.amplitude.max(1.0)),
                TargetKind::Complex => {} // mixed parity
            }
        }
    }
}
