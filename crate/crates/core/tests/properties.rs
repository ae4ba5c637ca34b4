use betainf::airy;
use betainf::asymptotics;
use betainf::covariance::{self, TailPolicy};
use betainf::kernels;
use betainf::polygrid::{self, SpectrumN};
use proptest::prelude::*;

/// Spectra with well separated values so every level is simple.
fn spectrum(max_len: usize) -> impl Strategy<Value = SpectrumN> {
    prop::collection::vec(0.2f64..1.0, 2..=max_len).prop_map(|gaps| {
        let mut x = 0.0;
        let values = gaps
            .iter()
            .map(|g| {
                x += g;
                x
            })
            .collect();
        SpectrumN::new(values).unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grids_are_affine_equivariant(s in spectrum(10), a in 0.2f64..3.0, b in -2.0f64..2.0) {
        let g = polygrid::appell_grid(&s).unwrap();
        let h = polygrid::appell_grid(&s.affine(a, b).unwrap()).unwrap();
        for k in 1..=g.n() {
            for (x, y) in g.level(k).iter().zip(h.level(k)) {
                prop_assert!(close(a * x + b, *y, 1e-10), "level {k}: {} vs {y}", a * x + b);
            }
        }
    }

    #[test]
    fn grids_interlace(s in spectrum(12)) {
        prop_assert!(polygrid::appell_grid(&s).unwrap().interlacing_violation() <= 0.0);
    }

    #[test]
    fn kernel_semigroup_law(s in spectrum(12), picks in prop::array::uniform3(0usize..1000)) {
        let g = polygrid::appell_grid(&s).unwrap();
        let n = g.n();
        let mut lv = [1 + picks[0] % n, 1 + picks[1] % n, 1 + picks[2] % n];
        lv.sort();
        let [k, l, m] = lv;
        let direct = kernels::diffusion_kernel(&g, k, m).unwrap();
        let split = kernels::diffusion_kernel(&g, k, l).unwrap().then(&kernels::diffusion_kernel(&g, l, m).unwrap()).unwrap();
        for (x, y) in direct.data().iter().zip(split.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for r in direct.row_sums() {
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_prediction_is_shift_equivariant(s in spectrum(10), b in -3.0f64..3.0) {
        prop_assume!(s.len() >= 3);
        // A soft edge needs k < N.
        let k = 2 + (s.len() - 3) / 3;
        let e = asymptotics::edge_prediction(&s, k).unwrap();
        let f = asymptotics::edge_prediction(&s.affine(1.0, b).unwrap(), k).unwrap();
        prop_assert!(close(e.x_edge + b, f.x_edge, 1e-8), "{} vs {}", e.x_edge + b, f.x_edge);
        prop_assert!(close(e.sigma, f.sigma, 1e-6), "{} vs {}", e.sigma, f.sigma);
        prop_assert!(e.g3 > 0.0);
    }

    #[test]
    fn dbm_covariance_scales_linearly(i in 1usize..=5, j in 1usize..=5, t in 0.1f64..5.0, s in 0.1f64..5.0) {
        let a = covariance::cov_dbm(5, i, j, 4.0 * t, 4.0 * s).unwrap();
        let b = 4.0 * covariance::cov_dbm(5, i, j, t, s).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn closed_zeta_obeys_cauchy_schwarz(n in 1usize..=40, i in 0usize..1000, j in 0usize..1000) {
        let (i, j) = (1 + i % n, 1 + j % n);
        let c = covariance::cov_zeta_closed_equal_levels(n, i, j).unwrap();
        let vi = covariance::cov_zeta_closed_equal_levels(n, i, i).unwrap();
        let vj = covariance::cov_zeta_closed_equal_levels(n, j, j).unwrap();
        prop_assert!(c * c <= vi * vj * (1.0 + 1e-12));
    }

    #[test]
    fn zeta_is_xi_plus_propagated_top(n in 2usize..=8, picks in prop::array::uniform4(0usize..1000)) {
        let g = polygrid::hermite_grid(n).unwrap();
        let top = covariance::cov_zeta_closed_matrix(n).unwrap();
        let k1 = 1 + picks[0] % n;
        let k2 = 1 + picks[1] % n;
        let s1 = (k1, 1 + picks[2] % k1);
        let s2 = (k2, 1 + picks[3] % k2);
        let xi = covariance::cov_xi_direct(&g, s1, s2).unwrap();
        let p1 = kernels::diffusion_kernel(&g, k1, n).unwrap();
        let p2 = kernels::diffusion_kernel(&g, k2, n).unwrap();
        let mut prop = 0.0;
        for b in 0..n {
            for d in 0..n {
                prop += p1.get(s1.1 - 1, b) * top.get(b, d) * p2.get(s2.1 - 1, d);
            }
        }
        let z = covariance::cov_zeta_spectral(s1, s2, TailPolicy::default()).unwrap().value;
        prop_assert!((xi + prop - z).abs() < 1e-9, "{s1:?} {s2:?}: {} vs {z}", xi + prop);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn semigroup_is_symmetric(t in 0.05f64..2.0, i in 1usize..=6, j in 1usize..=6) {
        let a = airy::semigroup_p(t, i, j).unwrap().value;
        let b = airy::semigroup_p(t, j, i).unwrap().value;
        prop_assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        prop_assert!(a >= -1e-13);
    }

    #[test]
    fn limit_covariance_obeys_cauchy_schwarz(i in 1usize..=4, j in 1usize..=4, t in -2.0f64..2.0, s in -2.0f64..2.0) {
        let c = airy::limit_cov(i, j, t, s).unwrap();
        let vi = airy::limit_cov(i, i, t, t).unwrap();
        let vj = airy::limit_cov(j, j, s, s).unwrap();
        prop_assert!(c * c <= vi * vj * (1.0 + 1e-10), "{c} {vi} {vj}");
    }

    #[test]
    fn limit_covariance_depends_on_the_gap(i in 1usize..=3, j in 1usize..=3, t in -2.0f64..2.0, s in -2.0f64..2.0, h in -1.0f64..1.0) {
        let a = airy::limit_cov(i, j, t, s).unwrap();
        let b = airy::limit_cov(i, j, t + h, s + h).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn bulk_prediction_is_shift_invariant(x in -0.5f64..0.5, b in -2.0f64..2.0) {
        let s = SpectrumN::two_atom(60).unwrap();
        let r = asymptotics::critical_points(&s, x, 15).unwrap();
        let shifted = asymptotics::critical_points(&s.affine(1.0, b).unwrap(), x + b, 15).unwrap();
        prop_assert_eq!(r.classification, shifted.classification);
        if let (Ok(p), Ok(q)) = (asymptotics::bulk_prediction(&r), asymptotics::bulk_prediction(&shifted)) {
            prop_assert!(close(p.0, q.0, 1e-8) && close(p.1, q.1, 1e-8), "{p:?} vs {q:?}");
        }
    }
}
