use fbm_ergo::coupling::{binding_drift, coupling_radius, gaussian_coupling_1d, AuxState, CouplingParams, StepKind};
use fbm_ergo::fracops::{
    apply_dh, cost, drift_w_to_b, shift_signal, AlphaExponent, DriftSignal, TransferMode,
};
use fbm_ergo::noise::{concat_pt, fbm_covariance, holder_norm, shift_theta, FuturePath, Hurst, PastPath, TimeGrid};
use fbm_ergo::sde::{solve_increments, CellStepper, DiffusionMatrix, DriftSpec, DEFAULT_SUBSTEPS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn past_from(dt: f64, incs: &[f64]) -> PastPath {
    let n = incs.len();
    let mut v = vec![0.0; n + 1];
    for i in (0..n).rev() {
        v[i] = v[i + 1] - incs[i];
    }
    PastPath::new(TimeGrid::backward(dt, n as f64 * dt).unwrap(), 1, v).unwrap()
}

fn past_signal(dt: f64, vals: Vec<f64>) -> DriftSignal {
    DriftSignal::new(TimeGrid::backward(dt, vals.len() as f64 * dt).unwrap(), 1, vals).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn covariance_is_self_similar(hv in 0.05f64..0.95, a in 0.1f64..10.0, s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let h = Hurst::new(hv).unwrap();
        let lhs = fbm_covariance(h, a * s, a * t);
        let rhs = a.powf(2.0 * hv) * fbm_covariance(h, s, t);
        prop_assert!(close(lhs, rhs, 1e-11));
        prop_assert!(close(fbm_covariance(h, s, t), fbm_covariance(h, t, s), 1e-15));
    }

    #[test]
    fn concat_then_shift_recovers_past(
        incs in prop::collection::vec(-1.0f64..1.0, 16..48),
        fut in prop::collection::vec(-1.0f64..1.0, 1..16),
        k in 1usize..16,
    ) {
        let dt = 0.125;
        let past = past_from(dt, &incs);
        let k = k.min(fut.len());
        let future = FuturePath::from_increments(dt, 1, &fut).unwrap();
        let joined = concat_pt(&past, &future, k as f64 * dt).unwrap();
        let back = shift_theta(&joined, k as f64 * dt).unwrap();
        let keep = back.n_steps();
        let off = past.n_steps() - keep;
        for i in 0..=keep {
            let expect = past.point(off + i)[0] - past.point(past.n_steps())[0];
            prop_assert!((back.point(i)[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn holder_norm_is_a_seminorm(
        a in prop::collection::vec(-1.0f64..1.0, 32),
        b in prop::collection::vec(-1.0f64..1.0, 32),
        c in -3.0f64..3.0,
        hv in 0.1f64..0.9,
    ) {
        let h = Hurst::new(hv).unwrap();
        let (pa, pb) = (past_from(0.125, &a), past_from(0.125, &b));
        let sum = pa.combine(1.0, &pb, 1.0).unwrap();
        prop_assert!(holder_norm(&sum, h) <= holder_norm(&pa, h) + holder_norm(&pb, h) + 1e-12);
        prop_assert!(close(holder_norm(&pa.scaled(c), h), c.abs() * holder_norm(&pa, h), 1e-12));
    }

    #[test]
    fn operator_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        s in -2.0f64..2.0,
        hv in prop::sample::select(vec![0.1, 0.3, 0.7, 0.9]),
    ) {
        let h = Hurst::new(hv).unwrap();
        let (pa, pb) = (past_from(0.0625, &a), past_from(0.0625, &b));
        let lhs = apply_dh(&pa.combine(s, &pb, 1.0).unwrap(), h);
        let rhs = apply_dh(&pa, h).combine(s, &apply_dh(&pb, h), 1.0).unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn drift_transfer_is_linear(
        a in prop::collection::vec(-1.0f64..1.0, 32),
        b in prop::collection::vec(-1.0f64..1.0, 32),
        s in -2.0f64..2.0,
        hv in prop::sample::select(vec![0.3, 0.7]),
    ) {
        let h = Hurst::new(hv).unwrap();
        let grid = TimeGrid::forward(0.125, 4.0).unwrap();
        let ga = DriftSignal::new(grid, 1, a).unwrap();
        let gb = DriftSignal::new(grid, 1, b).unwrap();
        let lhs = drift_w_to_b(&ga.combine(s, &gb, 1.0).unwrap(), h, TransferMode::General).unwrap();
        let rhs = drift_w_to_b(&ga, h, TransferMode::General)
            .unwrap()
            .combine(s, &drift_w_to_b(&gb, h, TransferMode::General).unwrap(), 1.0)
            .unwrap();
        for (x, y) in lhs.values().iter().zip(rhs.values()) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn cost_is_a_norm_and_decays_under_shift(
        a in prop::collection::vec(-1.0f64..1.0, 64),
        b in prop::collection::vec(-1.0f64..1.0, 64),
        c in -3.0f64..3.0,
        shift in 1usize..32,
        quiet in 1usize..8,
        hv in prop::sample::select(vec![0.3, 0.7]),
    ) {
        let h = Hurst::new(hv).unwrap();
        let alpha = AlphaExponent::new(0.05, h).unwrap();
        let dt = 0.125;
        // Keep the newest cells empty so the cost is finite for every H.
        let mut a = a;
        let mut b = b;
        for v in a.iter_mut().rev().take(quiet).chain(b.iter_mut().rev().take(quiet)) {
            *v = 0.0;
        }
        let (ga, gb) = (past_signal(dt, a), past_signal(dt, b));
        let ka = cost(&ga, alpha, h).value();
        let kb = cost(&gb, alpha, h).value();
        prop_assert!(ka >= 0.0);
        let kab = cost(&ga.combine(1.0, &gb, 1.0).unwrap(), alpha, h).value();
        prop_assert!(kab <= (ka + kb) * (1.0 + 1e-9) + 1e-12);
        prop_assert!(close(cost(&ga.scaled(c), alpha, h).value(), c.abs() * ka, 1e-9));
        let shifted = cost(&shift_signal(&ga, shift as f64 * dt).unwrap(), alpha, h).value();
        prop_assert!(shifted <= ka * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn gronwall_contraction(
        x0 in -3.0f64..3.0,
        y0 in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let drift = DriftSpec::double_well(1).unwrap();
        let dt = 1.0 / 32.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = fbm_ergo::noise::wiener_increments(&mut rng, 128, 1, dt);
        let sigma = DiffusionMatrix::identity(1);
        let mut st = CellStepper::new(&drift, DEFAULT_SUBSTEPS);
        let xs = solve_increments(&[x0], &noise, dt, 0.0, &mut st, &sigma, None).unwrap();
        let ys = solve_increments(&[y0], &noise, dt, 0.0, &mut st, &sigma, None).unwrap();
        let r0 = (x0 - y0).abs();
        let (c2, c4) = (drift.c2, drift.c4);
        for i in 0..xs.len() {
            let t = i as f64 * dt;
            let bound = r0 * (-c2 * t).exp() + c4 / c2 * (1.0 - (-c2 * t).exp());
            prop_assert!((xs[i] - ys[i]).abs() <= bound + 1e-6);
        }
    }

    #[test]
    fn gaussian_coupling_gap_within_radius(a in -1.0f64..1.0, extra in 0.0f64..2.0, seed in any::<u64>()) {
        let b = a.abs() + extra + 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let g = gaussian_coupling_1d(a, b, &mut rng).unwrap();
            prop_assert!((g.y - g.x).abs() <= coupling_radius(b));
            if g.bound {
                prop_assert!((g.y - g.x - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binding_drift_points_back(r in prop::collection::vec(-5.0f64..5.0, 1..4), k2 in 1.0f64..20.0) {
        let drift = DriftSpec::double_well(r.len()).unwrap();
        let mut p = CouplingParams::defaults(Hurst::new(0.3).unwrap(), &drift);
        p.kappa2 = k2;
        let g = binding_drift(&r, &p, &DiffusionMatrix::identity(r.len()));
        let dot: f64 = g.iter().zip(&r).map(|(a, b)| a * b).sum();
        prop_assert!(dot <= 0.0);
    }

    #[test]
    fn wait_only_while_waiting(w in 0.0f64..10.0, k in 0usize..4) {
        let step = [StepKind::Init, StepKind::Hitting, StepKind::Coupling, StepKind::Waiting][k];
        let ok = AuxState::new(step, 0, 0, w).is_ok();
        prop_assert_eq!(ok, w == 0.0 || step == StepKind::Waiting);
    }
}
