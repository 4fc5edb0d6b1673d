use std::f64::consts::PI;

use hhg_core::model::*;
use hhg_core::observables::*;
use hhg_core::reconstruction::*;
use hhg_core::trajectory::*;
use hhg_core::Complex64;
use proptest::prelude::*;

const GAMMA: f64 = 0.5;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Points with `Re q0 > 0` and `|q0|` in `[0.2, 10]`.
fn manifold_point() -> impl Strategy<Value = Complex64> {
    (0.2f64..10.0, -1.4f64..1.4).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn initial_data_are_derivatives_of_the_action(q0 in manifold_point()) {
        let h = 1e-5;
        let ds = (action0(q0 + h).unwrap() - action0(q0 - h).unwrap()) / (2.0 * h);
        prop_assert!(rel(ds, momentum0(q0).unwrap()) < 1e-8 || (ds - momentum0(q0).unwrap()).norm() < 1e-9);
        let dp = (momentum0(q0 + h).unwrap() - momentum0(q0 - h).unwrap()) / (2.0 * h);
        prop_assert!(rel(dp, alpha0(q0).unwrap()) < 1e-8);
    }

    #[test]
    fn action_exponentiates_to_the_ground_state(q0 in manifold_point()) {
        let via_action = (Complex64::i() * action0(q0).unwrap()).exp();
        prop_assert!(rel(via_action, eval_psi0(q0).unwrap()) < 1e-12);
    }

    #[test]
    fn potential_derivatives_match_differences(
        q in manifold_point(),
        t_re in 0.0f64..100.0,
        t_im in -3.0f64..3.0,
        with_field in any::<bool>(),
    ) {
        let field = FieldParams { f0: 0.0735, omega: 0.0735, n_periods: 4.0 };
        let f = with_field.then_some(&field);
        let t = Complex64::new(t_re, t_im);
        let h = 1e-5;
        let v = potential(q, t, f).unwrap();
        let (vp, vm) = (potential(q + h, t, f).unwrap(), potential(q - h, t, f).unwrap());
        prop_assert!(rel((vp.v - vm.v) / (2.0 * h), v.dv) < 1e-8);
        prop_assert!(rel((vp.dv - vm.dv) / (2.0 * h), v.d2v) < 1e-8);
    }

    #[test]
    fn stability_matrix_stays_symplectic(q0 in (1.0f64..5.0, -1.5f64..1.5), t_end in (0.5f64..6.0, -0.5f64..0.5)) {
        let field = FieldParams { f0: 0.0735, omega: 0.0735, n_periods: 4.0 };
        let prop = Propagator::new(Some(&field), Tolerances::default(), GAMMA);
        let st = TrajectoryState::from_q0(Complex64::new(q0.0, q0.1), GAMMA).unwrap();
        let seg = Segment::Line { from: st.t, to: Complex64::new(t_end.0, t_end.1) };
        let end = propagate_segment(&st, &seg, &prop).unwrap();
        prop_assume!(end.is_alive() && end.q.norm() > 0.05);
        prop_assert!((end.m.det() - 1.0).norm() < 1e-6);
    }

    #[test]
    fn field_free_energy_is_conserved(q0 in (1.0f64..5.0, -1.5f64..1.5), t_end in (0.5f64..8.0, -0.5f64..0.5)) {
        let prop = Propagator::new(None, Tolerances::default(), GAMMA);
        let st = TrajectoryState::from_q0(Complex64::new(q0.0, q0.1), GAMMA).unwrap();
        let seg = Segment::Line { from: st.t, to: Complex64::new(t_end.0, t_end.1) };
        let mut closest = f64::INFINITY;
        let end = {
            let mut path = Vec::new();
            let contour = TimeContour { segments: vec![seg], t_eval: t_end.0 };
            let end = run_trajectory(&st, &contour, &prop, Some(&mut path)).unwrap();
            for p in &path {
                closest = closest.min(p.q.norm());
            }
            end
        };
        prop_assume!(end.is_alive() && closest >= 0.01);
        prop_assert!(rel(end.energy(), st.energy()) < 1e-8);
    }

    #[test]
    fn coherent_label_round_trips(q in (-5.0f64..5.0, -5.0f64..5.0), p in (-5.0f64..5.0, -5.0f64..5.0), gamma in 0.1f64..2.0) {
        let (xi, q_bar, p_bar) = coherent_label(Complex64::new(q.0, q.1), Complex64::new(p.0, p.1), gamma);
        let back = Complex64::new(2.0 * gamma * q_bar, -p_bar);
        prop_assert!((back - xi).norm() <= 1e-12 * xi.norm().max(1.0));
    }

    #[test]
    fn initial_overlaps_are_bounded(q0 in (0.1f64..6.0, -2.0f64..2.0)) {
        let st = TrajectoryState::from_q0(Complex64::new(q0.0, q0.1), GAMMA).unwrap();
        let frame = frame_from_state(&st, GAMMA).unwrap();
        prop_assert!(frame.sigma.re <= 1e-12);
    }

    #[test]
    fn gaussian_modulus_ignores_momentum(x in -5.0f64..5.0, q_bar in -3.0f64..3.0, p1 in -4.0f64..4.0, p2 in -4.0f64..4.0) {
        let a = gaussian_value(x, q_bar, p1, GAMMA).norm();
        let b = gaussian_value(x, q_bar, p2, GAMMA).norm();
        prop_assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn symmetrization_removes_even_harmonics(
        coeffs in proptest::collection::vec(-1.0f64..1.0, 6),
        periods in 2usize..5,
    ) {
        let omega = 0.0735;
        let n_half = 32;
        let dt = PI / omega / n_half as f64;
        let n = (2 * periods + 1) * n_half;
        let a: Vec<f64> = (0..n)
            .map(|j| {
                let w = omega * j as f64 * dt;
                coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * w).sin()).sum::<f64>() + 0.7
            })
            .collect();
        let sym = post_symmetrize(&a, dt, omega).unwrap();
        prop_assert_eq!(sym.len(), 2 * periods * n_half);
        let settings = SpectrumSettings { window: Window::Rectangular, max_harmonic: 6.0, oversample: 1 };
        let s = hhg_spectrum(&sym, dt, omega, 17.6, &settings).unwrap();
        let top = s.max_db();
        for h in [2.0, 4.0, 6.0] {
            prop_assert!(s.power_at(h).unwrap() < top - 150.0 || s.power_at(h).unwrap() < -200.0);
        }
    }
}

#[test]
fn gaussian_is_normalized() {
    let x: Vec<f64> = (0..=20_000).map(|k| -20.0 + 40.0 * k as f64 / 20_000.0).collect();
    let dx = x[1] - x[0];
    let norm: f64 = x.iter().map(|&v| gaussian_value(v, 0.3, 1.1, GAMMA).norm_sqr()).sum::<f64>() * dx;
    assert!((norm - 1.0).abs() < 1e-8);
}

#[test]
fn zero_series_spectrum_is_at_the_floor() {
    let omega = 0.0735;
    let dt = PI / omega / 32.0;
    let s = hhg_spectrum(&vec![0.0; 256], dt, omega, 17.6, &SpectrumSettings::default()).unwrap();
    assert!(s.power_db.iter().all(|&p| p <= -6000.0));
}
