use palmfbm::ergodicity::{mixing_covariance, variogram};
use palmfbm::fgn::{circulant_eigenvalues, fgn_autocovariance, FbmMode, LatticeFbm};
use palmfbm::io::{read_points, write_points, Metadata};
use palmfbm::pointproc::{count_closed, depalmize, PalmLatticeSampler};
use palmfbm::spectrum::{dual_grid, empirical_structure_factor, structure_factor_sum, EmpiricalOptions};
use palmfbm::stats::{fit_line, log_spaced};
use palmfbm::{HurstIndex, PointConfiguration, StreamKey};
use proptest::prelude::*;

fn hurst() -> impl Strategy<Value = HurstIndex> {
    (0.02f64..0.98).prop_map(|v| HurstIndex::new(v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hurst_domain_is_open_unit_interval(v in -2.0f64..3.0) {
        prop_assert_eq!(HurstIndex::new(v).is_ok(), v > 0.0 && v < 1.0);
    }

    #[test]
    fn autocovariance_sign_follows_h(h in hurst(), k in 1i64..10_000) {
        let g = fgn_autocovariance(h, k);
        let d = h.value() - 0.5;
        if d == 0.0 {
            prop_assert!(g.abs() < 1e-12);
        } else {
            prop_assert_eq!(g.signum(), d.signum());
        }
    }

    #[test]
    fn eigenvalues_nonnegative_with_trace_identity(h in hurst(), n in 2usize..300) {
        let ev = circulant_eigenvalues(h, n).unwrap();
        prop_assert!(ev.iter().all(|&l| l >= 0.0));
        let s: f64 = ev.iter().sum();
        prop_assert!((s / (2 * n) as f64 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sampler_is_a_pure_function_of_the_key(h in hurst(), seed in any::<u64>(), idx in any::<u64>()) {
        let s = LatticeFbm::new(h, 32, FbmMode::TwoSided).unwrap();
        let k = StreamKey::new(seed, idx);
        prop_assert_eq!(s.sample(k), s.sample(k));
    }

    #[test]
    fn mixing_functional_is_symmetric(h in hurst(), a in -5.0f64..5.0, b in -5.0f64..5.0, t in -50.0f64..5e4) {
        prop_assert_eq!(mixing_covariance(h, a, b, t), mixing_covariance(h, b, a, t));
        prop_assert_eq!(mixing_covariance(h, 0.0, b, t), 0.0);
    }

    #[test]
    fn brownian_functional_vanishes_past_the_origin(a in 0.01f64..5.0, b in 0.01f64..5.0, t in 0.001f64..1e3) {
        let h = HurstIndex::new(0.5).unwrap();
        prop_assert!(mixing_covariance(h, a, b, t).abs() < 1e-9 * (1.0 + t + a + b));
    }

    #[test]
    fn variogram_is_self_similar(h in hurst(), t in 0.01f64..100.0, c in 0.1f64..10.0) {
        let lhs = variogram(h, c * t);
        let rhs = c.powf(h.two_h()) * variogram(h, t);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }

    #[test]
    fn ball_counts_match_linear_scan(mut pts in prop::collection::vec(-50.0f64..50.0, 0..200), r in 0.0f64..60.0) {
        pts.sort_by(f64::total_cmp);
        let brute = pts.iter().filter(|&&x| -r <= x && x <= r).count();
        prop_assert_eq!(count_closed(&pts, -r, r), brute);
    }

    #[test]
    fn constructors_keep_points_sorted(pts in prop::collection::vec(-50.0f64..50.0, 0..100)) {
        let mut v = pts.clone();
        v.push(0.0);
        let c = PointConfiguration::palm(v).unwrap();
        prop_assert!(c.points().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(c.contains_origin());
    }

    #[test]
    fn depalmize_translates_rigidly(h in hurst(), seed in any::<u64>(), x in 0.5f64..10.0) {
        let c = PalmLatticeSampler::new(h, 64, FbmMode::TwoSided).unwrap().sample(StreamKey::root(seed));
        let d = depalmize(&c, x, StreamKey::root(seed ^ 1)).unwrap();
        let u = d.meta.shift.unwrap();
        prop_assert!(u.abs() <= x);
        for (p, q) in c.points().iter().zip(d.points()) {
            prop_assert!((q - p - u).abs() < 1e-9);
        }
    }

    #[test]
    fn power_law_slope_is_recovered(slope in 0.05f64..2.0, c in 0.1f64..10.0) {
        let r = log_spaced(16.0, 4096.0, 24);
        let xs: Vec<f64> = r.iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = r.iter().map(|x| (c * x.powf(slope)).ln()).collect();
        let fit = fit_line(&xs, &ys, None);
        prop_assert!((fit.slope - slope).abs() < 1e-10);
        prop_assert!((fit.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn log_grid_is_increasing(a in 1.0f64..100.0, ratio in 1.5f64..1e4, n in 2usize..50) {
        let g = log_spaced(a, a * ratio, n);
        prop_assert_eq!(g.len(), n);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(g[0], a);
        prop_assert_eq!(g[n - 1], a * ratio);
    }

    #[test]
    fn empirical_translation_invariance(seed in any::<u64>(), u in -5.0f64..5.0) {
        let h = HurstIndex::new(0.3).unwrap();
        let c = PalmLatticeSampler::new(h, 32, FbmMode::TwoSided).unwrap().sample(StreamKey::root(seed));
        let shifted = palmfbm::pointproc::translate(&c, u);
        let opts = EmpiricalOptions { length: 256.0, allow_off_grid: false };
        let ts = dual_grid(256.0, 0.2, 3.0);
        let a = empirical_structure_factor(std::slice::from_ref(&c), &ts, opts).unwrap();
        let b = empirical_structure_factor(&[shifted], &ts, opts).unwrap();
        for (x, y) in a.s.iter().zip(&b.s) {
            prop_assert!((x - y).abs() < 1e-9 * (1.0 + x));
        }
    }

    #[test]
    fn points_csv_round_trip(pts in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..50)) {
        let mut buf = Vec::new();
        let mut meta = Metadata::new();
        meta.insert("seed".into(), "1".into());
        write_points(&mut buf, &pts, &meta).unwrap();
        let (m, back) = read_points(&buf[..]).unwrap();
        prop_assert_eq!(m, meta);
        prop_assert_eq!(back, pts);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lattice_sum_is_even_and_nonnegative(hv in 0.3f64..0.95, t in 0.5f64..3.0) {
        let h = HurstIndex::new(hv).unwrap();
        let a = structure_factor_sum(h, t, 1e-9).unwrap();
        let b = structure_factor_sum(h, -t, 1e-9).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.value > -1e-9);
    }
}
