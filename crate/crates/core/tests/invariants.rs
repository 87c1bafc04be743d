//! Property tests for the model invariants, driven by random macroscopic
//! states and random fields.

use std::sync::Arc;

use isobgk::diagnostics::{energy_functional, split_norms};
use isobgk::discretization::{
    spatial_derivative, KineticField, MacroField, PeriodicField, Snapshot, SpatialGrid,
};
use isobgk::equilibrium::{
    kinetic_entropy, maxwellian, moments, pressure_tensor, slice_entropy, GasParams, MacroState,
    VelocityGrid, DEFAULT_VELOCITY_MARGIN,
};
use isobgk::euler_ref::{euler_step, EulerState};
use isobgk::perturbation::Perturbation;
use isobgk::solver::{cfl_limit, relaxation_step, transport_step, TransportScheme};
use proptest::prelude::*;

fn params(dim: usize) -> GasParams {
    GasParams::new(1.1, dim).unwrap()
}

fn grid_1d(points: usize) -> Arc<VelocityGrid> {
    Arc::new(VelocityGrid::for_params(&params(1), &[points], DEFAULT_VELOCITY_MARGIN).unwrap())
}

/// `(ρ, u)` in the admissible envelope, rejected if the support leaves the box.
fn state(g: &VelocityGrid, rho: f64, u: [f64; 3]) -> Option<MacroState> {
    let p = params(g.dim());
    let r = 0.2 * p.support_radius();
    let mut u = u;
    for x in u.iter_mut() {
        *x *= r;
    }
    let m = MacroState { rho, u };
    (m.speed() <= r && g.contains_support(&p, &m)).then_some(m)
}

/// Nonnegative field built from local Maxwellians times a bounded random factor.
fn noisy_field(cells: usize, points: usize, seed: &[f64]) -> KineticField {
    let p = params(1);
    let s = Arc::new(SpatialGrid::uniform(1, cells).unwrap());
    let g = grid_1d(points);
    let centers: Vec<f64> = (0..cells).map(|c| s.center(c)[0]).collect();
    KineticField::from_fn(s, g.clone(), |cell, out| {
        let x = centers[cell];
        let m = MacroState {
            rho: 1.0 + 0.2 * (x + seed[0]).sin(),
            u: [0.1 * (2.0 * x).cos(), 0.0, 0.0],
        };
        g.sample_maxwellian(&p, &m, out);
        for (k, o) in out.iter_mut().enumerate() {
            *o *= 1.0 + 0.5 * (seed[1] * k as f64 + seed[2] * cell as f64).sin();
        }
    })
}

fn perturbation_slice(pt: &Perturbation, coeffs: &[f64]) -> Vec<f64> {
    let nv = pt.grid().len();
    (0..nv)
        .map(|k| {
            if pt.weight().masked()[k] {
                0.0
            } else {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * ((j + 1) as f64 * 0.37 * k as f64).sin())
                    .sum()
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn maxwellian_is_continuous_at_the_support_edge(
        rho in 0.5f64..2.0, u in -0.5f64..0.5, dir in 0.0f64..std::f64::consts::TAU
    ) {
        let p = params(2);
        let m = MacroState { rho, u: [u, 0.0, 0.0] };
        let r = (2.0 * p.gamma() / (p.gamma() - 1.0) * rho.powf(p.gamma() - 1.0)).sqrt();
        let at = |s: f64| maxwellian(&p, &m, &[u + s * dir.cos(), s * dir.sin(), 0.0]);
        let (inside, outside) = (at(r * (1.0 - 1e-9)), at(r * (1.0 + 1e-9)));
        prop_assert_eq!(outside, 0.0);
        prop_assert!(inside <= 1e-60, "{}", inside);
    }

    #[test]
    fn maxwellian_moments_match_closed_form(rho in 0.5f64..2.0, u in -1.0f64..1.0) {
        let g = grid_1d(512);
        let p = params(1);
        let Some(m) = state(&g, rho, [u, 0.0, 0.0]) else { return Ok(()) };
        let mo = moments(&g.maxwellian(&p, &m), &g);
        let energy = rho * m.u[0] * m.u[0] + rho.powf(p.gamma());
        prop_assert!((mo.rho - rho).abs() <= 1e-6 * rho);
        prop_assert!((mo.momentum[0] - rho * m.u[0]).abs() <= 1e-6 * rho);
        prop_assert!((mo.energy - energy).abs() <= 1e-6 * energy);
    }

    #[test]
    fn pressure_tensor_is_isotropic(rho in 0.5f64..2.0, u1 in -1.0f64..1.0, u2 in -1.0f64..1.0) {
        let p = params(2);
        let g = VelocityGrid::for_params(&p, &[96, 96], DEFAULT_VELOCITY_MARGIN).unwrap();
        let Some(m) = state(&g, rho, [u1, u2, 0.0]) else { return Ok(()) };
        let t = pressure_tensor(&g.maxwellian(&p, &m), &g, &m.u);
        let pr = rho.powf(p.gamma());
        prop_assert!((t[0] - pr).abs() <= 1e-6 * pr && (t[3] - pr).abs() <= 1e-6 * pr, "{:?}", t);
        prop_assert!(t[1].abs() <= 1e-8 && t[2].abs() <= 1e-8, "{:?}", t);
    }

    #[test]
    fn equilibrium_minimizes_entropy(scale in prop::collection::vec(0.05f64..2.0, 8), rho in 0.6f64..1.6) {
        let g = grid_1d(512);
        let p = params(1);
        let Some(m) = state(&g, rho, [0.3, 0.0, 0.0]) else { return Ok(()) };
        let f: Vec<f64> = g.maxwellian(&p, &m).iter().enumerate().map(|(k, x)| x * scale[k % 8]).collect();
        let Ok(st) = moments(&f, &g).macro_state(0) else { return Ok(()) };
        prop_assume!(g.contains_support(&p, &st));
        let eq = g.maxwellian(&p, &st);
        prop_assert!(slice_entropy(&eq, &g, &p) <= slice_entropy(&f, &g, &p) + 1e-10);
    }

    #[test]
    fn stencil_derivatives_sum_to_zero(a in -2.0f64..2.0, b in -2.0f64..2.0, k in 1i32..5, order in prop::sample::select(vec![2usize, 4])) {
        let s = Arc::new(SpatialGrid::uniform(1, 64).unwrap());
        let f = MacroField::from_fn(s, |x| a * (k as f64 * x[0]).sin() + b * (x[0]).cos().exp());
        let d = spatial_derivative(&f, 0, order).unwrap();
        prop_assert!(d.integral(0).abs() <= 1e-12);
    }

    #[test]
    fn coercivity_pythagoras_and_kernel(coeffs in prop::collection::vec(-1.0f64..1.0, 6)) {
        let pt = Perturbation::new(&params(1), grid_1d(512), 1e-6).unwrap();
        let g = pt.grid();
        let f = perturbation_slice(&pt, &coeffs);
        let nf = g.inner(&f, &f);
        prop_assume!(nf > 1e-12);
        let lf = pt.linear_op(&f);
        let micro = pt.micro_part(&f);
        let pf = pt.project(&f);
        prop_assert!((g.inner(&lf, &f) + g.inner(&micro, &micro)).abs() <= 1e-10 * nf);
        prop_assert!((g.inner(&pf, &pf) + g.inner(&micro, &micro) - nf).abs() <= 1e-10 * nf);
        for i in 0..pt.basis().len() {
            let l = pt.linear_op(pt.basis().vector(i));
            prop_assert!(g.inner(&l, &l).sqrt() <= 1e-6);
        }
    }

    #[test]
    fn linear_plus_nonlinear_is_the_full_residual(coeffs in prop::collection::vec(-1.0f64..1.0, 4), amp in 1e-4f64..1e-2) {
        let pt = Perturbation::new(&params(1), grid_1d(512), 1e-6).unwrap();
        let g = pt.grid();
        let w = pt.weight();
        // f = amp·M0^(1−w)·φ with |φ| < 1 keeps F = M0 (1 + amp·φ) nonnegative.
        let f: Vec<f64> = perturbation_slice(&pt, &coeffs)
            .iter()
            .enumerate()
            .map(|(k, x)| amp * w.m0()[k] * w.inv_weight()[k] * x / 4.0)
            .collect();
        let mut big_f = vec![0.0; g.len()];
        pt.from_perturbation_slice(&f, &mut big_f);
        let st = moments(&big_f, g).macro_state(0).unwrap();
        let m = g.maxwellian(pt.params(), &st);
        let lf = pt.linear_op(&f);
        let gamma = pt.nonlinear_op(&f).unwrap().value;
        for k in 0..g.len() {
            if w.masked()[k] {
                continue;
            }
            let direct = w.inv_weight()[k] * (m[k] - w.m0()[k]) - f[k];
            prop_assert!((lf[k] + gamma[k] - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "node {}", k);
        }
    }

    #[test]
    fn transport_conserves_and_stays_nonnegative(seed in prop::collection::vec(0.0f64..3.0, 3)) {
        let mut f = noisy_field(32, 64, &seed);
        let ones = vec![1.0; f.velocity().len()];
        let vel: Vec<f64> = f.velocity().nodes().iter().map(|v| v[0]).collect();
        let (m0, p0) = (f.integrate_against(&ones), f.integrate_against(&vel));
        let dt = cfl_limit(&f, 0.9);
        for _ in 0..10 {
            transport_step(&mut f, dt, 0.9, TransportScheme::Upwind1).unwrap();
        }
        prop_assert!((f.integrate_against(&ones) - m0).abs() <= 1e-13 * m0);
        prop_assert!((f.integrate_against(&vel) - p0).abs() <= 1e-13 * m0);
        prop_assert!(f.min() >= -1e-12 * f.max());
    }

    #[test]
    fn relaxation_conserves_cells_and_dissipates_entropy(seed in prop::collection::vec(0.0f64..3.0, 3), dt in 1e-3f64..10.0) {
        let p = params(1);
        let mut f = noisy_field(8, 256, &seed);
        let before: Vec<_> = f.slices().map(|s| moments(s, f.velocity())).collect();
        let h0 = kinetic_entropy(&f, &p);
        relaxation_step(&mut f, &p, dt, 1.0, None, false).unwrap();
        for (s, b) in f.slices().zip(&before) {
            let a = moments(s, f.velocity());
            prop_assert!((a.rho - b.rho).abs() <= 1e-13 * b.rho);
            prop_assert!((a.momentum[0] - b.momentum[0]).abs() <= 1e-13 * b.rho);
        }
        prop_assert!(kinetic_entropy(&f, &p) <= h0 + 1e-12 * h0.abs());
    }

    #[test]
    fn energy_functional_orders_add_up(seed in prop::collection::vec(0.0f64..3.0, 3)) {
        let f = noisy_field(16, 64, &seed).map_data(|x| 1e-3 * x);
        let parts = energy_functional(&f, 2, 4).unwrap();
        let by_hand: f64 = (0..=2)
            .map(|order| {
                let mut d = f.clone();
                for _ in 0..order {
                    d = spatial_derivative(&d, 0, 4).unwrap();
                }
                d.norm_sq()
            })
            .sum();
        let total: f64 = parts.iter().sum();
        prop_assert!((total - by_hand).abs() <= 1e-12 * by_hand);
        prop_assert!((parts[0] - f.norm_sq()).abs() <= 1e-15 * f.norm_sq());
    }

    #[test]
    fn split_norms_are_pythagorean(seed in prop::collection::vec(0.0f64..3.0, 3)) {
        let f = noisy_field(8, 256, &seed);
        let pt = Perturbation::new(&params(1), f.velocity_arc().clone(), 1e-6).unwrap();
        let (pf, _) = pt.to_perturbation(&f).unwrap();
        let n = split_norms(&pt, &pf);
        prop_assert!((n.macro_part + n.micro_part - n.total).abs() <= 1e-10 * n.total);
    }

    #[test]
    fn euler_step_conserves(a in 0.0f64..0.3, b in -0.3f64..0.3, k in 1i32..4) {
        let s = Arc::new(SpatialGrid::uniform(1, 64).unwrap());
        let e = EulerState::from_fn(
            s,
            |x| 1.0 + a * (k as f64 * x[0]).cos(),
            |x| [b * x[0].sin(), 0.0, 0.0],
        ).unwrap();
        let (m0, p0) = e.totals();
        let mut next = e;
        for _ in 0..20 {
            let dt = next.stable_dt(1.1, 0.4);
            next = euler_step(&next, dt, 1.1, 0.4).unwrap();
        }
        let (m1, p1) = next.totals();
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
        prop_assert!((p1[0] - p0[0]).abs() <= 1e-12 * m0);
    }

    #[test]
    fn kinetic_initialization_matches_euler_data(a in 0.0f64..0.3, b in -0.2f64..0.2) {
        let p = params(1);
        let s = Arc::new(SpatialGrid::uniform(1, 16).unwrap());
        let g = grid_1d(512);
        let rho = |x: f64| 1.0 + a * x.cos();
        let u = |x: f64| b * x.sin();
        let centers: Vec<f64> = (0..16).map(|c| s.center(c)[0]).collect();
        let f = KineticField::from_fn(s.clone(), g.clone(), |cell, out| {
            let x = centers[cell];
            g.sample_maxwellian(&p, &MacroState { rho: rho(x), u: [u(x), 0.0, 0.0] }, out)
        });
        let k = EulerState::from_kinetic(&f).unwrap();
        for (c, &x) in centers.iter().enumerate() {
            prop_assert!((k.rho(c) - rho(x)).abs() <= 1e-6 * rho(x));
            prop_assert!((k.momentum(c)[0] - rho(x) * u(x)).abs() <= 1e-6 * rho(x));
        }
    }

    #[test]
    fn snapshot_round_trip_is_bitwise(seed in prop::collection::vec(0.0f64..3.0, 3), t in 0.0f64..100.0) {
        let f = noisy_field(4, 16, &seed);
        let snap = Snapshot { gamma: 1.1, time: t, field: f };
        let bytes = snap.encode();
        let back = Snapshot::decode(&bytes).unwrap();
        prop_assert_eq!(back.time.to_bits(), t.to_bits());
        prop_assert_eq!(back.encode(), bytes);
        prop_assert!(back.field.data().iter().zip(snap.field.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
