use bslab_core::bskernel::{assemble_q, assemble_r};
use bslab_core::field::{eigenfunction_grid, resolvent_square_gram};
use bslab_core::measure::{circle, AtomicMeasure, DensityField, MeasureDescriptor, Rect};
use bslab_core::specfun::{i0, k0, k1, EULER_GAMMA};
use bslab_core::spectral::{gamma_top, solve_bound_state};
use nalgebra::DVector;
use proptest::prelude::*;

fn arb_measure() -> impl Strategy<Value = AtomicMeasure> {
    prop_oneof![
        (0.3f64..2.0, 8usize..80).prop_map(|(r, n)| MeasureDescriptor::Circle { r, n }),
        (-1.0f64..1.0, -1.0f64..1.0, 0.2f64..2.0, 4usize..60).prop_map(|(x, y, l, n)| {
            MeasureDescriptor::Segment { a: [x, y], b: [x + l, y + 0.3 * l], n }
        }),
        (0.2f64..1.5, 4.0f64..30.0).prop_map(|(h, n_per_unit)| MeasureDescriptor::Polyline {
            vertices: vec![[0.0, 0.0], [1.0, 0.0], [1.0, h], [0.2, h]],
            n_per_unit,
        }),
        (2.5f64..5.0, 4usize..16, 2usize..8)
            .prop_map(|(gamma, n_r, n_theta)| MeasureDescriptor::RadialDensity { gamma, n_r, n_theta }),
        (0.1f64..1.0, 2usize..10, 2usize..10).prop_map(|(sigma, n_x, n_y)| MeasureDescriptor::GridDensity {
            density: DensityField::Gaussian { amplitude: 1.5, sigma, center: [0.1, -0.1] },
            region: Rect::centered(1.0),
            n_x,
            n_y,
        }),
    ]
    .prop_map(|d| d.build().unwrap())
}

fn arb_k() -> impl Strategy<Value = f64> {
    (-6.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

#[test]
fn k0_small_argument_remainder_bound() {
    for i in 0..=400 {
        let x = 10f64.powf(-6.0 + 4.0 * i as f64 / 400.0);
        let remainder = k0(x).unwrap() + (0.5 * x).ln() + EULER_GAMMA;
        assert!(remainder.abs() <= 2.0 * x * x * x.ln().abs(), "x = {x}: {remainder:e}");
    }
}

#[test]
fn i0k0_strictly_decreasing() {
    let xs: Vec<f64> = (0..=2000).map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 2000.0)).collect();
    let p: Vec<f64> = xs.iter().map(|&x| i0(x).unwrap() * k0(x).unwrap()).collect();
    assert!(p.windows(2).all(|w| w[1] < w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn special_functions_are_pure(x in 1e-8f64..700.0) {
        prop_assert_eq!(k0(x).unwrap().to_bits(), k0(x).unwrap().to_bits());
        prop_assert_eq!(k1(x).unwrap().to_bits(), k1(x).unwrap().to_bits());
        prop_assert_eq!(i0(x).unwrap().to_bits(), i0(x).unwrap().to_bits());
    }

    #[test]
    fn q_is_positive_semidefinite(m in arb_measure(), k in arb_k(), seed in any::<u64>()) {
        let q = assemble_q(&m, k).unwrap();
        let a = q.entries();
        let scale = a.diagonal().max();
        let mut state = seed | 1;
        for _ in 0..200 {
            let v = DVector::from_fn(m.len(), |_, _| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            });
            let rq = v.dot(&(a * &v)) / v.dot(&v);
            prop_assert!(rq >= -1e-12 * scale, "Rayleigh quotient {rq:e}");
        }
    }

    #[test]
    fn q_entrywise_monotone_in_k(m in arb_measure(), k in 1e-6f64..1.0) {
        let a = assemble_q(&m, k).unwrap();
        let b = assemble_q(&m, 1.5 * k).unwrap();
        let d = a.entries() - b.entries();
        prop_assert!(d.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn assembly_is_deterministic(m in arb_measure(), k in arb_k()) {
        prop_assert_eq!(assemble_q(&m, k).unwrap(), assemble_q(&m, k).unwrap());
    }

    #[test]
    fn gamma_strictly_decays(m in arb_measure(), k in 1e-6f64..1.0, f in 1.01f64..3.0) {
        let g1 = gamma_top(&m, k).unwrap().gamma;
        let g2 = gamma_top(&m, f * k).unwrap().gamma;
        prop_assert!(g2 < g1);
    }

    #[test]
    fn bound_state_satisfies_equation(m in arb_measure(), target in 1e-5f64..1.0) {
        let alpha = 1.0 / gamma_top(&m, target).unwrap().gamma;
        let bs = solve_bound_state(&m, alpha).unwrap();
        prop_assert!(((bs.k_alpha - target) / target).abs() < 1e-9);
        let g = gamma_top(&m, bs.k_alpha).unwrap().gamma;
        prop_assert!((alpha * g - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn second_eigenvalue_stays_bounded(m in arb_measure(), e in 3.0f64..7.0) {
        let k = 10f64.powf(-e);
        let ev = assemble_q(&m, k).unwrap().eigenvalues();
        let r_norm = assemble_r(&m).unwrap().spectral_norm();
        prop_assert!(ev[ev.len() - 2] <= r_norm + 1.0);
    }

    #[test]
    fn k1_gram_is_positive_semidefinite(m in arb_measure(), k in arb_k()) {
        let e = resolvent_square_gram(&m, k).symmetric_eigenvalues();
        prop_assert!(e.min() >= -1e-10 * e.max());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn eigenfunction_is_positive(m in arb_measure(), target in 1e-3f64..1.0) {
        let alpha = 1.0 / gamma_top(&m, target).unwrap().gamma;
        let bs = solve_bound_state(&m, alpha).unwrap();
        let g = eigenfunction_grid(&m, &bs, Rect::centered(3.0 / bs.k_alpha.min(1.0)), 12, 12).unwrap();
        prop_assert!(g.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }
}

#[test]
fn circle_eigenvector_is_constant() {
    for n in [64, 257, 512] {
        let m = circle(1.3, n).unwrap();
        let p = gamma_top(&m, 0.2).unwrap();
        let w = DVector::from_iterator(n, m.weights().iter().map(|w| w.sqrt()));
        let w = &w / w.norm();
        assert!((p.eigvec - w).amax() < 1e-10);
    }
}
