use proptest::prelude::*;

use trailer_core::kinematics::{
    actual_to_virtual_steer, virtual_to_actual_speed, virtual_to_actual_steer, VirtualInput,
};
use trailer_core::model::{derive_poses, trailer_speed};
use trailer_core::nmpc::{
    compute_input_bounds, cost_and_gradient, pack, predict_step, solve_ocp, trajectory_cost, TrailerState,
};
use trailer_core::pursuit::pursuit_steer;
use trailer_core::{ControlInput, ForwardConfig, ForwardPath, OcpConfig, Plant, SystemState, VehicleTrailerParams};

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn params() -> impl Strategy<Value = VehicleTrailerParams> {
    (2.0..4.0f64, 0.5..1.5f64, 1.5..4.0f64).prop_map(|(l, lh, lt)| VehicleTrailerParams::new(l, lh, lt))
}

fn state() -> impl Strategy<Value = SystemState> {
    (-20.0..20.0f64, -20.0..20.0f64, -3.0..3.0f64, -0.8..0.8f64)
        .prop_map(|(x, y, yaw, hitch)| SystemState::new(x, y, yaw, yaw - hitch))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mirror_commutes_with_integration(s in state(), v in -1.0..1.0f64, d in -0.7..0.7f64) {
        let plant = Plant::new(VehicleTrailerParams::default());
        let a = plant.integrate(&s, &ControlInput::new(v, d), 0.1);
        let m = SystemState::new(s.x, -s.y, -s.yaw, -s.trailer_yaw);
        let b = plant.integrate(&m, &ControlInput::new(v, -d), 0.1);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.x - b.x).abs() < 1e-12);
                prop_assert!((a.y + b.y).abs() < 1e-12);
                prop_assert!((a.yaw + b.yaw).abs() < 1e-12);
                prop_assert!((a.trailer_yaw + b.trailer_yaw).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "guard disagreed: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn links_stay_rigid(p in params(), s in state(), v in -1.0..1.0f64, d in -0.6..0.6f64) {
        let plant = Plant::new(p);
        let mut s = s;
        for _ in 0..30 {
            let poses = derive_poses(&s, &p);
            prop_assert!((dist(poses.front, poses.rear) - p.wheelbase).abs() < 1e-9);
            prop_assert!((dist(poses.rear, poses.hitch) - p.hitch_offset).abs() < 1e-9);
            prop_assert!((dist(poses.hitch, poses.trailer) - p.trailer_length).abs() < 1e-9);
            match plant.integrate(&s, &ControlInput::new(v, d), 0.1) {
                Ok(next) => s = next,
                Err(_) => break,
            }
        }
    }

    #[test]
    fn zero_speed_is_a_fixed_point(s in state(), d in -0.7..0.7f64, dt in 0.01..5.0f64) {
        let plant = Plant::new(VehicleTrailerParams::default());
        prop_assert_eq!(plant.integrate(&s, &ControlInput::new(0.0, d), dt).unwrap(), s);
    }

    #[test]
    fn steer_maps_invert(p in params(), hitch in -1.0..1.0f64, vs in -0.5..0.5f64) {
        if let Ok(steer) = virtual_to_actual_steer(vs, hitch, &p) {
            if let Ok(back) = actual_to_virtual_steer(steer, hitch, &p) {
                prop_assert!((back - vs).abs() < 1e-9, "{vs} -> {steer} -> {back}");
            }
        }
    }

    #[test]
    fn speed_maps_agree(p in params(), hitch in -1.0..1.0f64, vs in -0.5..0.5f64, vt in -1.0..1.0f64) {
        if let Ok(steer) = virtual_to_actual_steer(vs, hitch, &p) {
            let vr = virtual_to_actual_speed(vt, vs, hitch);
            let s = SystemState::new(0.0, 0.0, hitch, 0.0);
            let back = trailer_speed(&s, &ControlInput::new(vr, steer), &p);
            prop_assert!((back - vt).abs() < 1e-9 * (1.0 + vt.abs()));
        }
    }

    #[test]
    fn bounded_virtual_steer_maps_inside_tractor_limits(hitch in -0.6..0.6f64, frac in 0.0..=1.0f64) {
        let p = VehicleTrailerParams::default();
        let cfg = OcpConfig::default();
        if let Ok(b) = compute_input_bounds(hitch, &cfg, &p) {
            let vs = b.steer_lo + frac * (b.steer_hi - b.steer_lo);
            let steer = virtual_to_actual_steer(vs, hitch, &p).unwrap();
            prop_assert!(steer >= cfg.steer_limits.0 - 1e-12 && steer <= cfg.steer_limits.1 + 1e-12);
        }
    }

    #[test]
    fn pursuit_respects_limits(s in state(), look in 1.0..10.0f64) {
        let p = VehicleTrailerParams::default();
        let cfg = ForwardConfig { lookahead: look, ..ForwardConfig::default() };
        let d = pursuit_steer(&s, &ForwardPath::default(), &cfg, &p, (-0.75, 0.75));
        prop_assert!(d.abs() <= 0.75);
    }
}

fn trailer_state() -> impl Strategy<Value = TrailerState> {
    (-12.0..12.0f64, -8.0..8.0f64, -1.2..1.2f64).prop_map(|(x, y, yaw)| TrailerState::new(x, y, yaw))
}

fn inputs(n: usize) -> impl Strategy<Value = Vec<VirtualInput>> {
    prop::collection::vec((-1.0..0.0f64, -0.5..0.5f64).prop_map(|(v, d)| VirtualInput::new(v, d)), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solve_never_worse_than_warm_or_rest(x0 in trailer_state(), hitch in -0.4..0.4f64, warm in inputs(10)) {
        let p = VehicleTrailerParams::default();
        let cfg = OcpConfig::default();
        let b = compute_input_bounds(hitch, &cfg, &p).unwrap();
        let warm: Vec<_> = warm.iter().map(|u| b.clamp(u)).collect();
        let rest = vec![b.clamp(&VirtualInput::default()); 10];
        let r = solve_ocp(&x0, &b, &cfg, &p, Some(&warm)).unwrap();
        prop_assert!(r.inputs.iter().all(|u| b.contains(u)));
        prop_assert!(r.cost <= trajectory_cost(&x0, &warm, &cfg, &p));
        prop_assert!(r.cost <= trajectory_cost(&x0, &rest, &cfg, &p));
        // predicted states follow the prediction recursion exactly
        let mut x = x0;
        for (u, pred) in r.inputs.iter().zip(&r.predicted) {
            x = predict_step(&x, u, cfg.step, &p);
            prop_assert_eq!(x, *pred);
        }
    }

    #[test]
    fn gradient_matches_central_differences(x0 in trailer_state(), u in inputs(10)) {
        let p = VehicleTrailerParams::default();
        let cfg = OcpConfig::default();
        let z = pack(&u);
        let (_, g) = cost_and_gradient(&x0, &z, &cfg, &p);
        let h = 1e-6;
        for i in 0..z.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            let fd = (cost_and_gradient(&x0, &zp, &cfg, &p).0 - cost_and_gradient(&x0, &zm, &cfg, &p).0) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs()).max(1.0);
            prop_assert!((g[i] - fd).abs() / scale < 1e-5, "component {i}: {} vs {fd}", g[i]);
        }
    }
}
