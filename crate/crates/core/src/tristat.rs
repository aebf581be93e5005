//! Signed-triangle statistic and motif probability estimators.
//!
//! tau(G) = sum over vertex triples of (a_ij - p)(a_jk - p)(a_ki - p).
//! Two independent algorithms compute it: an exact triple loop, and
//! trace(B^3)/6 for the centered adjacency B = A - p(J - I), which agrees
//! because the zero diagonal annihilates every degenerate index triple.

use crate::calibrate::ModelParams;
use crate::connection::ConnectionSpec;
use crate::error::{Error, Result};
use crate::quad::{pairwise_dot, pairwise_sum};
use crate::sampler::GraphSample;
use crate::seed::SeedContext;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// Signed-triangle statistic plus raw motif counts for one graph.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TriangleStats {
    pub n: usize,
    pub p_center: f64,
    pub tau: f64,
    pub triangle_count: u64,
    /// Unordered 2-paths (center distinguished): sum over vertices of
    /// C(deg, 2). Matches the cherry event {1~2, 1~3} up to labeling.
    pub cherry_count: u64,
}

/// Exact triple-loop evaluation; the oracle for the trace path.
/// For n < 3, tau = 0 by the empty-sum convention.
pub fn signed_triangles_naive(g: &GraphSample, p: f64) -> TriangleStats {
    assert!(p > 0.0 && p < 1.0, "centering p must lie in (0, 1)");
    let n = g.n();
    let mut tau = 0.0;
    let mut triangles = 0u64;
    let mut cherries = 0u64;
    let hi = 1.0 - p;
    let lo = -p;
    for i in 0..n {
        for j in i + 1..n {
            let eij = g.get(i, j);
            let bij = if eij { hi } else { lo };
            for k in j + 1..n {
                let ejk = g.get(j, k);
                let eki = g.get(k, i);
                tau += bij * if ejk { hi } else { lo } * if eki { hi } else { lo };
                if eij && ejk && eki {
                    triangles += 1;
                }
                cherries += (eij && ejk) as u64 + (ejk && eki) as u64 + (eki && eij) as u64;
            }
        }
    }
    TriangleStats {
        n,
        p_center: p,
        tau,
        triangle_count: triangles,
        cherry_count: cherries,
    }
}

/// tau = trace(B^3)/6 via dense symmetric multiplication with pairwise
/// accumulation; triangle count by row-mask popcounts, cherries from degrees.
pub fn signed_triangles_trace(g: &GraphSample, p: f64) -> TriangleStats {
    assert!(p > 0.0 && p < 1.0, "centering p must lie in (0, 1)");
    let n = g.n();
    if n < 3 {
        return TriangleStats {
            n,
            p_center: p,
            tau: 0.0,
            triangle_count: 0,
            cherry_count: 0,
        };
    }

    let hi = 1.0 - p;
    let lo = -p;
    let mut b = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = if g.get(i, j) { hi } else { lo };
            b[i * n + j] = v;
            b[j * n + i] = v;
        }
    }

    // M = B*B, exploiting symmetry: M[i][j] = <row i, row j>.
    let mut m = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let v = pairwise_dot(&b[i * n..(i + 1) * n], &b[j * n..(j + 1) * n]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    let diag: Vec<f64> = (0..n)
        .map(|i| pairwise_dot(&m[i * n..(i + 1) * n], &b[i * n..(i + 1) * n]))
        .collect();
    let tau = pairwise_sum(&diag) / 6.0;

    let rows = g.neighbor_rows();
    let mut triple_incidences = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            if g.get(i, j) {
                triple_incidences += rows[i]
                    .iter()
                    .zip(&rows[j])
                    .map(|(a, c)| (a & c).count_ones() as u64)
                    .sum::<u64>();
            }
        }
    }
    // Each triangle is seen once per edge.
    let triangle_count = triple_incidences / 3;
    let cherry_count = g
        .degrees()
        .iter()
        .map(|&d| d as u64 * (d as u64).saturating_sub(1) / 2)
        .sum();

    TriangleStats {
        n,
        p_center: p,
        tau,
        triangle_count,
        cherry_count,
    }
}

/// Rao-Blackwellized cherry and triangle probability estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MotifEstimates {
    pub p_cherry: f64,
    pub p_cherry_se: f64,
    pub p_triangle: f64,
    pub p_triangle_se: f64,
    pub reps: usize,
}

/// Draw latent triples (x1, x2, x3) and average sigma_12 sigma_13 (cherry)
/// and sigma_12 sigma_23 sigma_31 (triangle). No Bernoulli noise: the edge
/// indicators are integrated out conditionally on the latents.
pub fn motif_prob_estimates(
    spec: &ConnectionSpec,
    params: &ModelParams,
    reps: usize,
    seed: &SeedContext,
) -> Result<MotifEstimates> {
    if reps < 1_000 {
        return Err(Error::DomainError("motif estimation needs reps >= 10^3".into()));
    }
    let d = params.d;
    let mut rng = seed.rng();
    let mut x1 = vec![0.0f64; d];
    let mut x2 = vec![0.0f64; d];
    let mut x3 = vec![0.0f64; d];
    let mut sum_c = 0.0;
    let mut sumsq_c = 0.0;
    let mut sum_t = 0.0;
    let mut sumsq_t = 0.0;
    for _ in 0..reps {
        for v in x1.iter_mut().chain(x2.iter_mut()).chain(x3.iter_mut()) {
            *v = rng.sample(StandardNormal);
        }
        let s12 = params.sigma(spec, pairwise_dot(&x1, &x2));
        let s13 = params.sigma(spec, pairwise_dot(&x1, &x3));
        let s23 = params.sigma(spec, pairwise_dot(&x2, &x3));
        let cherry = s12 * s13;
        let triangle = s12 * s23 * s13;
        sum_c += cherry;
        sumsq_c += cherry * cherry;
        sum_t += triangle;
        sumsq_t += triangle * triangle;
    }
    let nf = reps as f64;
    let mean_c = sum_c / nf;
    let mean_t = sum_t / nf;
    let var_c = (sumsq_c / nf - mean_c * mean_c).max(0.0) * nf / (nf - 1.0);
    let var_t = (sumsq_t / nf - mean_t * mean_t).max(0.0) * nf / (nf - 1.0);
    Ok(MotifEstimates {
        p_cherry: mean_c,
        p_cherry_se: (var_c / nf).sqrt(),
        p_triangle: mean_t,
        p_triangle_se: (var_t / nf).sqrt(),
        reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{calibrate_mu, QuadratureConfig};
    use crate::sampler::sample_er;

    fn complete(n: usize) -> GraphSample {
        let mut g = GraphSample::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                g.set(i, j, true);
            }
        }
        g
    }

    #[test]
    fn empty_graph_closed_form() {
        // tau = C(4,3) * (-1/2)^3 = -0.5.
        let g = GraphSample::empty(4);
        let s = signed_triangles_naive(&g, 0.5);
        assert_eq!(s.tau, -0.5);
        assert_eq!(s.triangle_count, 0);
        assert_eq!(s.cherry_count, 0);
        let t = signed_triangles_trace(&g, 0.5);
        assert!((t.tau - s.tau).abs() <= 1e-12);
    }

    #[test]
    fn complete_graph_closed_form() {
        // tau = C(4,3) * (1/2)^3 = 0.5.
        let g = complete(4);
        let s = signed_triangles_naive(&g, 0.5);
        assert_eq!(s.tau, 0.5);
        assert_eq!(s.triangle_count, 4);
        assert_eq!(s.cherry_count, 12);
    }

    #[test]
    fn single_edge_triple() {
        // n = 3, one edge, p = 1/2: (1/2)(-1/2)(-1/2) = 0.125.
        let mut g = GraphSample::empty(3);
        g.set(0, 1, true);
        let s = signed_triangles_naive(&g, 0.5);
        assert_eq!(s.tau, 0.125);
        assert_eq!(s.cherry_count, 0);
        assert_eq!(s.triangle_count, 0);
    }

    #[test]
    fn centering_sensitivity_closed_form() {
        // Empty graph: tau(p') = -C(n,3) p'^3 exactly.
        let g = GraphSample::empty(6);
        for p in [0.2, 0.3, 0.7] {
            let s = signed_triangles_naive(&g, p);
            let want = -20.0 * p * p * p;
            assert!((s.tau - want).abs() <= 1e-12, "p={p}: {} vs {want}", s.tau);
        }
    }

    #[test]
    fn sub_triple_graphs_have_zero_tau() {
        for n in [0usize, 1, 2] {
            let g = GraphSample::empty(n);
            assert_eq!(signed_triangles_trace(&g, 0.5).tau, 0.0);
            assert_eq!(signed_triangles_naive(&g, 0.5).tau, 0.0);
        }
    }

    #[test]
    fn naive_and_trace_agree_on_random_graphs() {
        let mut checked = 0;
        for (k, &n) in [3usize, 5, 8, 13, 21, 32, 48, 64].iter().enumerate() {
            for (pi, &p) in [0.2, 0.5, 0.8].iter().enumerate() {
                let seed = SeedContext::new(1000 + (k * 3 + pi) as u64);
                let g = sample_er(n, p, &seed);
                let a = signed_triangles_naive(&g, p);
                let b = signed_triangles_trace(&g, p);
                let scale = a.tau.abs().max(1.0);
                assert!(
                    (a.tau - b.tau).abs() <= 1e-9 * scale,
                    "n={n} p={p}: {} vs {}",
                    a.tau,
                    b.tau
                );
                assert_eq!(a.triangle_count, b.triangle_count);
                assert_eq!(a.cherry_count, b.cherry_count);
                checked += 1;
            }
        }
        assert_eq!(checked, 24);
    }

    #[test]
    fn tau_within_extremal_bounds() {
        let seed = SeedContext::new(77);
        let g = sample_er(20, 0.3, &seed);
        for p in [0.2, 0.5, 0.8] {
            let s = signed_triangles_trace(&g, p);
            let cap = 1140.0 * p.max(1.0 - p).powi(3); // C(20,3) max(p,1-p)^3
            assert!(s.tau.abs() <= cap);
            assert!(s.triangle_count <= 1140);
            assert!(s.cherry_count <= 3 * 1140);
        }
    }

    #[test]
    fn near_er_motifs_match_powers_of_p() {
        // r = 10^6: sigma is essentially constant p, so p_cherry -> p^2 and
        // p_triangle -> p^3.
        let spec = ConnectionSpec::logistic();
        let params = calibrate_mu(&spec, 3, 0.4, 2, 1e6, &QuadratureConfig::default()).unwrap();
        let est =
            motif_prob_estimates(&spec, &params, 200_000, &SeedContext::new(2)).unwrap();
        assert!(
            (est.p_cherry - 0.16).abs() <= 3.0 * est.p_cherry_se.max(1e-9) + 1e-6,
            "cherry {} +- {}",
            est.p_cherry,
            est.p_cherry_se
        );
        assert!(
            (est.p_triangle - 0.064).abs() <= 3.0 * est.p_triangle_se.max(1e-9) + 1e-6,
            "triangle {} +- {}",
            est.p_triangle,
            est.p_triangle_se
        );
    }

    #[test]
    fn motif_reps_precondition() {
        let spec = ConnectionSpec::logistic();
        let params = calibrate_mu(&spec, 3, 0.5, 2, 1.0, &QuadratureConfig::default()).unwrap();
        assert!(motif_prob_estimates(&spec, &params, 10, &SeedContext::new(1)).is_err());
    }
}
