//! Property tests for the connection-function contracts, graph storage, and
//! statistic algebra.

use lglab_core::connection::ConnectionSpec;
use lglab_core::sampler::{sample_er, GraphSample};
use lglab_core::seed::SeedContext;
use lglab_core::tristat::{signed_triangles_naive, signed_triangles_trace};
use proptest::prelude::*;

fn specs() -> Vec<(&'static str, ConnectionSpec)> {
    let lg = ConnectionSpec::logistic();
    // A moderately dense custom table built from the Gaussian family.
    let ga = ConnectionSpec::gaussian();
    let xs: Vec<f64> = (0..1601).map(|i| -24.0 + 48.0 * i as f64 / 1600.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| ga.cdf(x)).collect();
    let custom = ConnectionSpec::from_table(ga.alpha(), xs, ys).unwrap();
    vec![("logistic", lg), ("gaussian", ga), ("custom", custom)]
}

proptest! {
    #[test]
    fn cdf_monotone(x in -25.0f64..25.0, gap in 1e-9f64..10.0) {
        for (name, spec) in specs() {
            let y = x + gap;
            prop_assert!(spec.cdf(x) <= spec.cdf(y), "{name}: F({x}) > F({y})");
        }
    }

    #[test]
    fn quantile_round_trip(u in 1e-6f64..=0.999999) {
        for (name, spec) in specs() {
            if let Some(x) = spec.quantile(u) {
                let err = (spec.cdf(x) - u).abs();
                prop_assert!(err <= 1e-10, "{name}: |F(F^-1({u})) - {u}| = {err}");
            }
        }
    }

    #[test]
    fn density_is_cdf_derivative(x in -10.0f64..10.0) {
        // Central difference with h = 1e-5; error class O(h^2) sup|f''|.
        let h = 1e-5;
        for (name, spec) in [("logistic", ConnectionSpec::logistic()), ("gaussian", ConnectionSpec::gaussian())] {
            let fd = (spec.cdf(x + h) - spec.cdf(x - h)) / (2.0 * h);
            prop_assert!((fd - spec.pdf(x)).abs() <= 1e-8, "{name} at {x}: {fd} vs {}", spec.pdf(x));
        }
    }

    #[test]
    fn pdf_deriv_is_density_derivative(x in -10.0f64..10.0) {
        let h = 1e-5;
        for (name, spec) in [("logistic", ConnectionSpec::logistic()), ("gaussian", ConnectionSpec::gaussian())] {
            let fd = (spec.pdf(x + h) - spec.pdf(x - h)) / (2.0 * h);
            prop_assert!((fd - spec.pdf_deriv(x)).abs() <= 1e-8, "{name} at {x}: {fd} vs {}", spec.pdf_deriv(x));
        }
    }

    #[test]
    fn graph_binary_round_trip(n in 2usize..80, p in 0.05f64..0.95, seed in 0u64..1000) {
        let g = sample_er(n, p, &SeedContext::new(seed));
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        let back = GraphSample::read_binary(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(g, back);
    }

    #[test]
    fn naive_trace_tau_agree(n in 3usize..40, pi in 0usize..3, seed in 0u64..500) {
        let p = [0.2, 0.5, 0.8][pi];
        let g = sample_er(n, p, &SeedContext::new(seed));
        let a = signed_triangles_naive(&g, p);
        let b = signed_triangles_trace(&g, p);
        let scale = a.tau.abs().max(1.0);
        prop_assert!((a.tau - b.tau).abs() <= 1e-9 * scale);
        prop_assert_eq!(a.triangle_count, b.triangle_count);
        prop_assert_eq!(a.cherry_count, b.cherry_count);
    }

    #[test]
    fn er_sampling_deterministic(n in 2usize..50, seed in 0u64..1000) {
        let a = sample_er(n, 0.4, &SeedContext::new(seed));
        let b = sample_er(n, 0.4, &SeedContext::new(seed));
        prop_assert_eq!(a, b);
    }
}
