//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the elapsed time and asserting the stated thresholds and runtime
//! budget.

use lglab_core::bounds::{
    self, gamma_moments, kl_tv_upper, tail_check, ConstantMode, TailLemma,
};
use lglab_core::calibrate::{
    calibrate_mu, lambda_value, mc_edge_density, McMode, ModelParams, QuadratureConfig,
};
use lglab_core::connection::{ConnectionSpec, FamilyDescriptor};
use lglab_core::experiments::{dkw_radius, phase_sweep, run_power, ExperimentConfig, Mechanism};
use lglab_core::sampler::{
    sample_er, sample_graph_threshold, sample_graph_uniform, sample_latents,
};
use lglab_core::seed::{SeedContext, StreamRole};
use lglab_core::stats;
use lglab_core::tristat::{motif_prob_estimates, signed_triangles_naive, signed_triangles_trace};
use rand::Rng;
use std::time::Instant;

struct Criterion {
    start: Instant,
    label: &'static str,
    budget_secs: f64,
    failures: Vec<String>,
}

impl Criterion {
    fn new(label: &'static str, budget_secs: f64) -> Self {
        Criterion {
            start: Instant::now(),
            label,
            budget_secs,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.failures.push(detail);
        }
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed().as_secs_f64();
        if elapsed > self.budget_secs {
            self.failures
                .push(format!("runtime {elapsed:.1}s exceeds budget {}s", self.budget_secs));
        }
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("acceptance {}: {verdict} ({elapsed:.1}s)", self.label);
        assert!(
            self.failures.is_empty(),
            "{} failed: {:?}",
            self.label,
            self.failures
        );
    }
}

fn base_cfg(n: usize, reps_null: usize, reps_alt: usize, master_seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        n,
        p: 0.5,
        family: FamilyDescriptor::Name("logistic".into()),
        d_list: vec![2],
        r_list: vec![1.0],
        reps_null,
        reps_alt,
        level: 0.05,
        master_seed,
        mechanism: Mechanism::Uniform,
    }
}

/// Criterion 1: null statistic moments at n=30, p=0.5 over 2000 ER
/// replicates: |mean tau| <= 3 sqrt(30^3/2000), Var <= 30^3 * 1.10.
#[test]
fn acceptance_01_null_statistic_moments() {
    let mut c = Criterion::new("01 null-statistic-moments", 10.0);
    let root = SeedContext::new(101);
    let taus: Vec<f64> = (0..2000)
        .map(|k| {
            let g = sample_er(30, 0.5, &root.child(StreamRole::NullReplicate, k));
            signed_triangles_trace(&g, 0.5).tau
        })
        .collect();
    let (mean, var) = stats::mean_var(&taus);
    let mean_cap = 3.0 * (30.0f64.powi(3) / 2000.0).sqrt();
    c.check(
        mean.abs() <= mean_cap,
        format!("|mean tau| = {} > {mean_cap}", mean.abs()),
    );
    let var_cap = 30.0f64.powi(3) * 1.10;
    c.check(var <= var_cap, format!("var tau = {var} > {var_cap}"));
    c.finish();
}

/// Criterion 2: detection at n=64, p=0.5, d=2, r=1 (400+400, level 0.05):
/// power >= 0.95 and empirical TV lower bound >= 0.9.
#[test]
fn acceptance_02_detection_at_desk_scale() {
    let mut c = Criterion::new("02 detection-desk-scale", 60.0);
    let cfg = base_cfg(64, 400, 400, 202);
    let cell = run_power(&cfg, 2, 1.0).unwrap();
    c.check(cell.status == "ok", format!("status {}", cell.status));
    c.check(cell.power >= 0.95, format!("power = {}", cell.power));
    c.check(
        cell.tv_lower_ks >= 0.9,
        format!("tv_lower_ks = {}", cell.tv_lower_ks),
    );
    c.finish();
}

/// Criterion 3: indistinguishability at n=64, p=0.5, d=4096, r=8:
/// power <= 0.10 and tv_lower <= tv_upper + 0.02 with kl_valid true.
#[test]
fn acceptance_03_indistinguishability_at_desk_scale() {
    let mut c = Criterion::new("03 indistinguishability-desk-scale", 120.0);
    let cfg = base_cfg(64, 400, 400, 303);
    let cell = run_power(&cfg, 4096, 8.0).unwrap();
    c.check(cell.status == "ok", format!("status {}", cell.status));
    c.check(cell.power <= 0.10, format!("power = {}", cell.power));
    c.check(cell.kl_valid, format!("kl_valid = {}", cell.kl_valid));
    c.check(
        cell.tv_lower_ks <= cell.tv_upper + 0.02,
        format!("tv_lower {} > tv_upper {} + 0.02", cell.tv_lower_ks, cell.tv_upper),
    );
    // Consistency ordering with the DKW radius never exceeds 1.
    c.check(
        cell.tv_lower_ks - dkw_radius(400) <= 1.0,
        "DKW-corrected lower bound above 1".into(),
    );
    c.finish();
}

/// Criterion 4: calibration correctness on 20 random configurations per
/// built-in family plus mu = 0 +- 1e-8 at p = 1/2.
#[test]
fn acceptance_04_calibration_correctness() {
    let mut c = Criterion::new("04 calibration-correctness", 60.0);
    let q = QuadratureConfig::default();
    let mut rng = SeedContext::new(404).rng();
    for (fi, spec) in [ConnectionSpec::logistic(), ConnectionSpec::gaussian()]
        .iter()
        .enumerate()
    {
        for k in 0..20u64 {
            let p = 0.1 + 0.8 * rng.random::<f64>();
            let d = (1e4f64.powf(rng.random::<f64>())).round().max(1.0) as usize;
            let r = 0.5 * 2000f64.powf(rng.random::<f64>());
            let params = match calibrate_mu(spec, 2, p, d, r, &q) {
                Ok(p) => p,
                Err(e) => {
                    c.check(false, format!("calibration failed at p={p} d={d} r={r}: {e}"));
                    continue;
                }
            };
            let seed = SeedContext::new(404).child(StreamRole::Replicate, fi as u64 * 100 + k);
            let (freq, se) =
                mc_edge_density(spec, params.mu, d, r, 1_000_000, &seed, McMode::Auto);
            c.check(
                (freq - p).abs() <= 4.0 * se,
                format!(
                    "family {fi} p={p:.4} d={d} r={r:.3}: freq {freq:.6} off by {:.2} se",
                    (freq - p).abs() / se
                ),
            );
        }
        for (d, r) in [(1usize, 0.5), (16, 2.0), (100, 1000.0), (10_000, 31.6)] {
            match calibrate_mu(spec, 2, 0.5, d, r, &q) {
                Ok(params) => c.check(
                    params.mu.abs() <= 1e-8,
                    format!("family {fi} (d={d}, r={r}): mu = {}", params.mu),
                ),
                Err(e) => c.check(false, format!("family {fi} (d={d}, r={r}): {e}")),
            }
        }
    }
    c.finish();
}

/// Criterion 5: mechanism equivalence on fixed latents (n=30, d=3, r=1,
/// p=0.5): per-pair frequencies over 10^4 draws agree within 3 SE for >= 99%
/// of pairs, pooled chi-square p-value > 1e-4.
#[test]
fn acceptance_05_mechanism_equivalence() {
    let mut c = Criterion::new("05 mechanism-equivalence", 30.0);
    let n = 30usize;
    let reps = 10_000u64;
    let spec = ConnectionSpec::logistic();
    let params = calibrate_mu(&spec, n, 0.5, 3, 1.0, &QuadratureConfig::default()).unwrap();
    let latents = sample_latents(n, 3, &SeedContext::new(505)).unwrap();
    let pairs = n * (n - 1) / 2;
    let mut count_u = vec![0u32; pairs];
    let mut count_t = vec![0u32; pairs];
    for k in 0..reps {
        let seed = SeedContext::new(505).child(StreamRole::Replicate, k);
        let gu = sample_graph_uniform(&spec, &params, &latents, &seed).unwrap();
        let gt = sample_graph_threshold(&spec, &params, &latents, &seed).unwrap();
        let mut idx = 0;
        for i in 0..n {
            for j in i + 1..n {
                count_u[idx] += gu.get(i, j) as u32;
                count_t[idx] += gt.get(i, j) as u32;
                idx += 1;
            }
        }
    }
    let r = reps as f64;
    let mut within = 0usize;
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for k in 0..pairs {
        let fu = count_u[k] as f64 / r;
        let ft = count_t[k] as f64 / r;
        let pooled = 0.5 * (fu + ft);
        if pooled <= 0.0 || pooled >= 1.0 {
            within += 1; // identical degenerate frequencies
            continue;
        }
        let se = (2.0 * pooled * (1.0 - pooled) / r).sqrt();
        if (fu - ft).abs() <= 3.0 * se {
            within += 1;
        }
        chi2 += (fu - ft) * (fu - ft) / (se * se);
        dof += 1;
    }
    let frac = within as f64 / pairs as f64;
    c.check(frac >= 0.99, format!("only {frac:.4} of pairs within 3 SE"));
    let pvalue = stats::chi2_sf(chi2, dof as f64);
    c.check(
        pvalue > 1e-4,
        format!("pooled chi-square p-value {pvalue:.2e} (chi2 {chi2:.1}, dof {dof})"),
    );
    c.finish();
}

/// Criterion 6: naive vs trace tau within 1e-9 relative on 100 random
/// graphs, n in 3..=64, p in {0.2, 0.5, 0.8}.
#[test]
fn acceptance_06_triangle_algorithm_equivalence() {
    let mut c = Criterion::new("06 triangle-algorithm-equivalence", 10.0);
    let mut rng = SeedContext::new(606).rng();
    for case in 0..100u64 {
        let n = 3 + (rng.random::<u64>() % 62) as usize;
        let p = [0.2, 0.5, 0.8][(rng.random::<u64>() % 3) as usize];
        let g = sample_er(n, p, &SeedContext::new(606).child(StreamRole::Replicate, case));
        let a = signed_triangles_naive(&g, p);
        let b = signed_triangles_trace(&g, p);
        let scale = a.tau.abs().max(1.0);
        c.check(
            (a.tau - b.tau).abs() <= 1e-9 * scale,
            format!("n={n} p={p}: naive {} vs trace {}", a.tau, b.tau),
        );
    }
    c.finish();
}

/// Criterion 7: motif bounds at p=0.5, d=2, r=1, logistic, 10^6 triples:
/// cherry probability below p^2 + alpha^2/(r^4 d) + 3 SE and triangle excess
/// above lambda^3/(4 r^3 sqrt d) - 3 SE.
#[test]
fn acceptance_07_motif_bounds() {
    let mut c = Criterion::new("07 motif-bounds", 60.0);
    let spec = ConnectionSpec::logistic();
    let q = QuadratureConfig::default();
    let params = calibrate_mu(&spec, 3, 0.5, 2, 1.0, &q).unwrap();
    let lambda = lambda_value(&spec, &params, &q).unwrap();
    let est = motif_prob_estimates(&spec, &params, 1_000_000, &SeedContext::new(707)).unwrap();
    let alpha = spec.alpha();
    let cherry_cap = 0.25 + alpha * alpha / 2.0 + 3.0 * est.p_cherry_se;
    c.check(
        est.p_cherry <= cherry_cap,
        format!("p_cherry {} > {cherry_cap}", est.p_cherry),
    );
    let tri_floor = lambda.powi(3) / (4.0 * 2.0f64.sqrt()) - 3.0 * est.p_triangle_se;
    c.check(
        est.p_triangle - 0.125 >= tri_floor,
        format!("p_triangle excess {} < {tri_floor}", est.p_triangle - 0.125),
    );
    c.finish();
}

/// Criterion 8: gamma moment bounds at d=64, r=1, p=0.5, logistic, 10^4
/// outer pairs.
#[test]
fn acceptance_08_gamma_moment_bounds() {
    let mut c = Criterion::new("08 gamma-moment-bounds", 60.0);
    let spec = ConnectionSpec::logistic();
    let params = calibrate_mu(&spec, 2, 0.5, 64, 1.0, &QuadratureConfig::default()).unwrap();
    let est = gamma_moments(&spec, &params, 10_000, 64, &SeedContext::new(808)).unwrap();
    let alpha = spec.alpha();
    let mean_cap = alpha * alpha / 64.0 + 3.0 * est.mean_se;
    c.check(
        est.mean >= -3.0 * est.mean_se && est.mean <= mean_cap,
        format!("E[gamma] = {} +- {} vs cap {mean_cap}", est.mean, est.mean_se),
    );
    let var_cap = 68.0 * alpha * alpha / 64.0 * 1.1;
    c.check(
        est.variance <= var_cap,
        format!("Var[gamma] = {} > {var_cap}", est.variance),
    );
    c.finish();
}

/// Criterion 9: concentration tail suites with zero violations.
#[test]
fn acceptance_09_concentration_tail_suites() {
    let mut c = Criterion::new("09 concentration-tail-suites", 180.0);
    let lg = ConnectionSpec::logistic();
    let ga = ConnectionSpec::gaussian();
    let seed = SeedContext::new(909);

    // InnerGauss: t grids spanning the sub-Gaussian (t < sqrt(2) d) and
    // sub-exponential branches.
    for (i, d) in [2usize, 10, 100].into_iter().enumerate() {
        let df = d as f64;
        let branch = std::f64::consts::SQRT_2 * df;
        let grid = [df.sqrt(), 2.0 * df.sqrt(), branch, 1.5 * branch];
        let params = ModelParams { n: 2, p: 0.5, d, r: 1.0, mu: 0.0, calib_residual: 0.0 };
        let rep = tail_check(
            TailLemma::InnerGauss,
            &lg,
            &params,
            100_000,
            &grid,
            &seed.child(StreamRole::Cell, i as u64),
        )
        .unwrap();
        c.check(
            rep.violations.is_empty(),
            format!("InnerGauss d={d}: {:?}", rep.violations),
        );
    }

    // SphereInner.
    for (i, d) in [2usize, 16, 256].into_iter().enumerate() {
        let params = ModelParams { n: 2, p: 0.5, d, r: 1.0, mu: 0.0, calib_residual: 0.0 };
        let rep = tail_check(
            TailLemma::SphereInner,
            &lg,
            &params,
            100_000,
            &[1.0, 2.0, 3.0, 4.0],
            &seed.child(StreamRole::Cell, 10 + i as u64),
        )
        .unwrap();
        c.check(
            rep.violations.is_empty(),
            format!("SphereInner d={d}: {:?}", rep.violations),
        );
    }

    // LinearRemainder over both families, d in {1,4,16}, r in {1,2}.
    let mut cell = 20u64;
    for (fname, spec) in [("logistic", &lg), ("gaussian", &ga)] {
        for d in [1usize, 4, 16] {
            for r in [1.0, 2.0] {
                let params =
                    calibrate_mu(spec, 2, 0.5, d, r, &QuadratureConfig::default()).unwrap();
                let rep = tail_check(
                    TailLemma::LinearRemainder,
                    spec,
                    &params,
                    100_000,
                    &[6.0, 10.0, 20.0],
                    &seed.child(StreamRole::Cell, cell),
                )
                .unwrap();
                cell += 1;
                c.check(
                    rep.violations.is_empty(),
                    format!("LinearRemainder {fname} d={d} r={r}: {:?}", rep.violations),
                );
            }
        }
    }

    // GammaSubexp at d=16, r=1.
    let params = calibrate_mu(&lg, 2, 0.5, 16, 1.0, &QuadratureConfig::default()).unwrap();
    let rep = tail_check(
        TailLemma::GammaSubexp,
        &lg,
        &params,
        20_000,
        &[1.0, 2.0, 4.0, 8.0, 16.0],
        &seed.child(StreamRole::Cell, 99),
    )
    .unwrap();
    c.check(
        rep.violations.is_empty(),
        format!("GammaSubexp: {:?}", rep.violations),
    );
    c.finish();
}

/// Criterion 10: monotone trends at n=64, p=0.5: mean_tau_alt nonincreasing
/// in r at d=2, power nonincreasing in d at r=1, each at 3 SE resolution.
#[test]
fn acceptance_10_monotone_trends() {
    let mut c = Criterion::new("10 monotone-trends", 120.0);
    let mut cfg = base_cfg(64, 400, 400, 1010);
    cfg.d_list = vec![2];
    cfg.r_list = vec![1.0, 2.0, 4.0, 8.0];
    let along_r = phase_sweep(&cfg).unwrap();
    for w in along_r.windows(2) {
        let slack = 3.0 * (w[0].mean_tau_alt_se.powi(2) + w[1].mean_tau_alt_se.powi(2)).sqrt();
        c.check(
            w[1].mean_tau_alt <= w[0].mean_tau_alt + slack,
            format!(
                "mean_tau_alt rose along r: {} (r={}) -> {} (r={})",
                w[0].mean_tau_alt, w[0].r, w[1].mean_tau_alt, w[1].r
            ),
        );
    }
    let mut cfg = base_cfg(64, 400, 400, 1011);
    cfg.d_list = vec![2, 8, 32, 128];
    cfg.r_list = vec![1.0];
    let along_d = phase_sweep(&cfg).unwrap();
    for w in along_d.windows(2) {
        let slack = 3.0 * (w[0].power_se.powi(2) + w[1].power_se.powi(2)).sqrt().max(1e-9);
        c.check(
            w[1].power <= w[0].power + slack,
            format!(
                "power rose along d: {} (d={}) -> {} (d={})",
                w[0].power, w[0].d, w[1].power, w[1].d
            ),
        );
    }
    c.finish();
}

/// Criterion 11: repeated `sweep` runs with the same master seed produce
/// byte-identical CSV at --threads 1 and at machine parallelism.
#[test]
fn acceptance_11_sweep_determinism() {
    let mut c = Criterion::new("11 sweep-determinism", 120.0);
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("sweep.json");
    std::fs::write(
        &config_path,
        r#"{"n":32,"p":0.5,"family":"logistic","d_list":[2,16],"r_list":[1.0,2.0],"reps_null":150,"reps_alt":150,"level":0.05,"master_seed":1111,"mechanism":"uniform"}"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_lglab");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "0", "0"].iter().enumerate() {
        let out = dir.path().join(format!("sweep{i}.csv"));
        let status = std::process::Command::new(bin)
            .args([
                "sweep",
                "--config",
                config_path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--threads",
                threads,
            ])
            .status()
            .unwrap();
        c.check(status.success(), format!("run {i} exited {status}"));
        outputs.push(std::fs::read(&out).unwrap());
    }
    for i in 1..outputs.len() {
        c.check(
            outputs[i] == outputs[0],
            format!("run {i} differs from run 0"),
        );
    }
    c.finish();
}

/// Criterion 12: exact bound homogeneities: kl(2r) = kl(r)/16 and
/// e_tau_lower_larger(2r) = e_tau_lower_larger(r)/8, bit-exact.
#[test]
fn acceptance_12_bound_homogeneities() {
    let mut c = Criterion::new("12 bound-homogeneities", 10.0);
    let alpha = ConnectionSpec::logistic().alpha();
    for (n, p, d, r) in [(64usize, 0.5, 16usize, 1.0), (200, 0.3, 7, 1.5), (30, 0.7, 3, 2.0)] {
        let params = |rr: f64| ModelParams { n, p, d, r: rr, mu: 0.0, calib_residual: 0.0 };
        let k1 = kl_tv_upper(&params(r), alpha, ConstantMode::PaperStated).unwrap();
        let k2 = kl_tv_upper(&params(2.0 * r), alpha, ConstantMode::PaperStated).unwrap();
        c.check(
            k2.kl_upper == k1.kl_upper / 16.0,
            format!("kl({}) = {} vs kl({r})/16 = {}", 2.0 * r, k2.kl_upper, k1.kl_upper / 16.0),
        );
        let t1 = bounds::e_tau_var_tau_bounds(&params(r), alpha, 0.3).unwrap();
        let t2 = bounds::e_tau_var_tau_bounds(&params(2.0 * r), alpha, 0.3).unwrap();
        c.check(
            t2.e_tau_lower_larger == t1.e_tau_lower_larger / 8.0,
            format!(
                "e_tau_larger({}) = {} vs /8 = {}",
                2.0 * r,
                t2.e_tau_lower_larger,
                t1.e_tau_lower_larger / 8.0
            ),
        );
    }
    c.finish();
}
