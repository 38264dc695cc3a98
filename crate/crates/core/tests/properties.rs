use proptest::prelude::*;

use sbp_fdec::linalg::{dot, max_abs};
use sbp_fdec::maxwell::MaxwellSystem;
use sbp_fdec::mesh::build_mesh;
use sbp_fdec::mimetic::{full_difference, vandermonde};
use sbp_fdec::sbp_operators::{verify_sbp, OperatorId};
use sbp_fdec::time_integration::{cfl_timestep, crank_nicolson_step, ssprk3_step};

fn operator() -> impl Strategy<Value = OperatorId> {
    prop_oneof![Just(OperatorId::Sbp24), Just(OperatorId::Sbp36)]
}

fn system(id: OperatorId, mx: usize, my: usize, extra: usize) -> MaxwellSystem {
    let op = id.build(id.min_nodes() + extra).unwrap();
    let mesh = build_mesh(mx, my, (-1.0, 1.0), (-0.5, 2.0), op.n_intervals()).unwrap();
    MaxwellSystem::new(mesh, &op).unwrap()
}

fn state(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_verify_for_any_size(id in operator(), extra in 0usize..40) {
        let op = id.build(id.min_nodes() + extra).unwrap();
        prop_assert!(verify_sbp(&op).passed());
        let vd = vandermonde(&op) * full_difference(op.n_intervals());
        prop_assert!((vd - &op.d).abs().max() <= 1e-13 * op.d.abs().max());
    }

    #[test]
    fn weak_and_strong_faraday_agree(
        (id, mx, my, extra, u) in (operator(), 1usize..=3, 1usize..=3, 0usize..3)
            .prop_flat_map(|(id, mx, my, extra)| {
                let len = system(id, mx, my, extra).state_len();
                (Just(id), Just(mx), Just(my), Just(extra), state(len))
            })
    ) {
        let s = system(id, mx, my, extra);
        let n = s.field_len();
        let weak = s.rhs_weak_vec(&u);
        let strong = s.rhs_strong_faraday(&u);
        let dev = strong.iter().zip(&weak[2 * n..]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(dev <= 1e-12 * max_abs(&weak[2 * n..]));
    }

    #[test]
    fn steps_keep_divergence(
        (id, mx, my, u) in (operator(), 1usize..=3, 1usize..=3)
            .prop_flat_map(|(id, mx, my)| {
                let len = system(id, mx, my, 0).state_len();
                (Just(id), Just(mx), Just(my), state(len))
            })
    ) {
        let s = system(id, mx, my, 0);
        let dt = cfl_timestep(&s, 1.0);
        let before = s.divergence(&u).coefficients;
        let rk = ssprk3_step(|x: &[f64], y: &mut [f64]| s.rhs_weak(x, y), &u, dt).unwrap();
        let (cn, _) = crank_nicolson_step(&s, &u, dt, 1e-12, None).unwrap();
        for next in [&rk, &cn] {
            let after = s.divergence(next).coefficients;
            let change = after.iter().zip(&before).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            prop_assert!(change <= 1e-13 * max_abs(&u).max(1.0));
        }
    }

    #[test]
    fn energy_does_not_grow(
        (id, mx, my, u) in (operator(), 1usize..=3, 1usize..=3)
            .prop_flat_map(|(id, mx, my)| {
                let len = system(id, mx, my, 0).state_len();
                (Just(id), Just(mx), Just(my), state(len))
            })
    ) {
        let s = system(id, mx, my, 0);
        let dt = cfl_timestep(&s, 1.0);
        let h0 = s.hamiltonian(&u);
        let g = s.hamiltonian_gradient(&u);
        prop_assert!(dot(&g, &s.rhs_weak_vec(&u)).abs() <= 1e-12 * dot(&g, &g));
        let rk = ssprk3_step(|x: &[f64], y: &mut [f64]| s.rhs_weak(x, y), &u, dt).unwrap();
        prop_assert!(s.hamiltonian(&rk) <= h0 * (1.0 + 1e-13));
        let (cn, _) = crank_nicolson_step(&s, &u, dt, 1e-13, None).unwrap();
        prop_assert!((s.hamiltonian(&cn) - h0).abs() <= 1e-10 * h0);
    }
}
