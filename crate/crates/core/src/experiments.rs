//! Monte Carlo detection experiments and the (d, r) phase sweep.
//!
//! One cell draws `reps_null` Erdős–Rényi graphs and `reps_alt` geometric
//! graphs, computes the signed-triangle statistic for each, rejects when tau
//! strictly exceeds the empirical (1 - level) quantile of the null sample
//! (strictness biases toward conservatism when the null has atoms), and
//! reports power, tau moments under both hypotheses, the two-sample
//! Kolmogorov–Smirnov distance (a TV lower bound by data processing), and
//! the theory-side bounds.
//!
//! The null sample depends only on (n, p), so a sweep draws it once and
//! shares it across cells. All replicate streams derive from
//! (master_seed, cell_index, replicate_index): output is bit-identical
//! across runs and worker counts.

use crate::bounds::{kl_tv_upper, ConstantMode};
use crate::calibrate::{calibrate_mu, ModelParams, QuadratureConfig};
use crate::connection::{ConnectionSpec, FamilyDescriptor};
use crate::error::{Error, Result};
use crate::sampler::{sample_er, sample_graph_threshold, sample_graph_uniform, sample_latents};
use crate::seed::{SeedContext, StreamRole};
use crate::stats;
use crate::tristat::signed_triangles_trace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which edge-generation mechanism the alternative uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Uniform,
    Threshold,
}

/// Full description of a sweep; mirrors the sweep.json schema field for
/// field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: f64,
    pub family: FamilyDescriptor,
    pub d_list: Vec<usize>,
    pub r_list: Vec<f64>,
    pub reps_null: usize,
    pub reps_alt: usize,
    pub level: f64,
    pub master_seed: u64,
    pub mechanism: Mechanism,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps_null < 100 || self.reps_alt < 100 {
            return Err(Error::DomainError("replicate counts must be >= 100".into()));
        }
        if !(self.level > 0.0 && self.level < 0.5) {
            return Err(Error::DomainError("level must lie in (0, 0.5)".into()));
        }
        if self.d_list.is_empty() || self.r_list.is_empty() {
            return Err(Error::DomainError("d_list and r_list must be nonempty".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::DomainError("p must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Results for one (d, r) grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub d: usize,
    pub r: f64,
    pub mu: f64,
    pub power: f64,
    pub power_se: f64,
    pub tv_lower_ks: f64,
    pub tv_upper: f64,
    pub kl_valid: bool,
    pub mean_tau_null: f64,
    pub mean_tau_null_se: f64,
    pub mean_tau_alt: f64,
    pub mean_tau_alt_se: f64,
    pub var_tau_null: f64,
    pub var_tau_alt: f64,
    /// n^3 / (r^6 d): detectability-side regime ratio.
    pub ratio_r6d: f64,
    /// n^3 / (r^4 d): impossibility-side regime ratio.
    pub ratio_r4d: f64,
    pub status: String,
}

impl SweepCell {
    fn failed(d: usize, r: f64, n: usize, status: String) -> Self {
        let nf = n as f64;
        let df = d as f64;
        SweepCell {
            d,
            r,
            mu: f64::NAN,
            power: f64::NAN,
            power_se: f64::NAN,
            tv_lower_ks: f64::NAN,
            tv_upper: f64::NAN,
            kl_valid: false,
            mean_tau_null: f64::NAN,
            mean_tau_null_se: f64::NAN,
            mean_tau_alt: f64::NAN,
            mean_tau_alt_se: f64::NAN,
            var_tau_null: f64::NAN,
            var_tau_alt: f64::NAN,
            ratio_r6d: nf * nf * nf / (r.powi(6) * df),
            ratio_r4d: nf * nf * nf / (r.powi(4) * df),
            status,
        }
    }
}

/// Null tau sample: depends only on (n, p); shared across cells.
fn null_taus(cfg: &ExperimentConfig, root: &SeedContext) -> Vec<f64> {
    (0..cfg.reps_null)
        .into_par_iter()
        .map(|k| {
            let seed = root.child(StreamRole::NullReplicate, k as u64);
            let g = sample_er(cfg.n, cfg.p, &seed);
            signed_triangles_trace(&g, cfg.p).tau
        })
        .collect()
}

fn alt_taus(
    cfg: &ExperimentConfig,
    spec: &ConnectionSpec,
    params: &ModelParams,
    cell_seed: &SeedContext,
) -> Result<Vec<f64>> {
    (0..cfg.reps_alt)
        .into_par_iter()
        .map(|k| {
            let seed = cell_seed.child(StreamRole::AltReplicate, k as u64);
            let latents = sample_latents(cfg.n, params.d, &seed)?;
            let g = match cfg.mechanism {
                Mechanism::Uniform => sample_graph_uniform(spec, params, &latents, &seed)?,
                Mechanism::Threshold => sample_graph_threshold(spec, params, &latents, &seed)?,
            };
            Ok(signed_triangles_trace(&g, cfg.p).tau)
        })
        .collect()
}

/// Empirical (1 - level) quantile of the null sample: the k-th smallest with
/// k = ceil((1 - level) N), so at most level*N null draws strictly exceed it.
fn null_quantile(null: &[f64], level: f64) -> f64 {
    let mut sorted = null.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((1.0 - level) * sorted.len() as f64).ceil() as usize;
    sorted[k.clamp(1, sorted.len()) - 1]
}

/// Kolmogorov–Smirnov distance between the two tau samples: a lower bound on
/// the total variation distance between the graph distributions by data
/// processing.
pub fn tv_lower_empirical(null_taus: &[f64], alt_taus: &[f64]) -> f64 {
    stats::ks_distance(null_taus, alt_taus)
}

/// DKW 95% confidence radius for an empirical CDF from `reps` samples.
pub fn dkw_radius(reps: usize) -> f64 {
    stats::dkw_radius(reps, 0.05)
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    spec: &ConnectionSpec,
    d: usize,
    r: f64,
    null: &[f64],
    cell_seed: &SeedContext,
) -> SweepCell {
    let q = QuadratureConfig::default();
    let params = match calibrate_mu(spec, cfg.n, cfg.p, d, r, &q) {
        Ok(p) => p,
        Err(e) => return SweepCell::failed(d, r, cfg.n, format!("calibration failed: {e}")),
    };
    let alt = match alt_taus(cfg, spec, &params, cell_seed) {
        Ok(a) => a,
        Err(e) => return SweepCell::failed(d, r, cfg.n, format!("sampling failed: {e}")),
    };
    let threshold = null_quantile(null, cfg.level);
    let rejections = alt.iter().filter(|&&t| t > threshold).count();
    let power = rejections as f64 / alt.len() as f64;
    let power_se = stats::binomial_se(power, alt.len());
    let (mean_null, var_null) = stats::mean_var(null);
    let (mean_alt, var_alt) = stats::mean_var(&alt);
    let (tv_upper, kl_valid) = if r >= 1.0 {
        match kl_tv_upper(&params, spec.alpha(), ConstantMode::PaperStated) {
            Ok(b) => (b.tv_upper, b.kl_valid),
            Err(_) => (1.0, false),
        }
    } else {
        // The KL bound is not asserted below r = 1; report the vacuous 1.
        (1.0, false)
    };
    let nf = cfg.n as f64;
    let df = d as f64;
    SweepCell {
        d,
        r,
        mu: params.mu,
        power,
        power_se,
        tv_lower_ks: tv_lower_empirical(null, &alt),
        tv_upper,
        kl_valid,
        mean_tau_null: mean_null,
        mean_tau_null_se: (var_null / null.len() as f64).sqrt(),
        mean_tau_alt: mean_alt,
        mean_tau_alt_se: (var_alt / alt.len() as f64).sqrt(),
        var_tau_null: var_null,
        var_tau_alt: var_alt,
        ratio_r6d: nf * nf * nf / (r.powi(6) * df),
        ratio_r4d: nf * nf * nf / (r.powi(4) * df),
        status: "ok".into(),
    }
}

/// Power experiment for a single (d, r): identical to the corresponding cell
/// of a single-cell sweep by construction.
pub fn run_power(cfg: &ExperimentConfig, d: usize, r: f64) -> Result<SweepCell> {
    let mut single = cfg.clone();
    single.d_list = vec![d];
    single.r_list = vec![r];
    let mut cells = phase_sweep(&single)?;
    Ok(cells.remove(0))
}

/// Evaluate the full d_list x r_list grid, row-major d-then-r. Failed cells
/// carry a status flag; they are never dropped.
pub fn phase_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let spec = ConnectionSpec::from_descriptor(&cfg.family)?;
    let root = SeedContext::new(cfg.master_seed);
    let null = null_taus(cfg, &root);
    let grid: Vec<(usize, f64)> = cfg
        .d_list
        .iter()
        .flat_map(|&d| cfg.r_list.iter().map(move |&r| (d, r)))
        .collect();
    let cells: Vec<SweepCell> = grid
        .par_iter()
        .enumerate()
        .map(|(ci, &(d, r))| {
            let cell_seed = root.child(StreamRole::Cell, ci as u64);
            evaluate_cell(cfg, &spec, d, r, &null, &cell_seed)
        })
        .collect();
    Ok(cells)
}

/// Size self-test: the alternative replaced by an independent ER batch, so
/// rejection frequency estimates the test's actual size (should match
/// `level` within Monte Carlo error).
pub fn run_size_self_test(cfg: &ExperimentConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    let root = SeedContext::new(cfg.master_seed);
    let null = null_taus(cfg, &root);
    let threshold = null_quantile(&null, cfg.level);
    let fake_alt: Vec<f64> = (0..cfg.reps_alt)
        .into_par_iter()
        .map(|k| {
            let seed = root
                .child(StreamRole::Cell, 0)
                .child(StreamRole::AltReplicate, k as u64);
            let g = sample_er(cfg.n, cfg.p, &seed);
            signed_triangles_trace(&g, cfg.p).tau
        })
        .collect();
    let power = fake_alt.iter().filter(|&&t| t > threshold).count() as f64 / fake_alt.len() as f64;
    Ok((power, stats::binomial_se(power, fake_alt.len())))
}

const CSV_HEADER: &str = "d,r,mu,power,power_se,tv_lower_ks,tv_upper,kl_valid,mean_tau_null,mean_tau_null_se,mean_tau_alt,mean_tau_alt_se,var_tau_null,var_tau_alt,ratio_r6d,ratio_r4d,status";

/// Write cells as CSV with shortest-round-trip float formatting. Status
/// strings are sanitized so the row stays machine-splittable.
pub fn write_sweep_csv<W: Write>(cells: &[SweepCell], w: &mut W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for c in cells {
        let status = c.status.replace(',', ";");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.d,
            c.r,
            c.mu,
            c.power,
            c.power_se,
            c.tv_lower_ks,
            c.tv_upper,
            c.kl_valid,
            c.mean_tau_null,
            c.mean_tau_null_se,
            c.mean_tau_alt,
            c.mean_tau_alt_se,
            c.var_tau_null,
            c.var_tau_alt,
            c.ratio_r6d,
            c.ratio_r4d,
            status
        )?;
    }
    Ok(())
}

/// Gnuplot nonuniform-matrix file of power over the grid: first row lists
/// the d values, then one row per r.
pub fn write_gnuplot_matrix<W: Write>(cfg: &ExperimentConfig, cells: &[SweepCell], w: &mut W) -> Result<()> {
    let nd = cfg.d_list.len();
    let nr = cfg.r_list.len();
    write!(w, "{}", nd)?;
    for &d in &cfg.d_list {
        write!(w, " {d}")?;
    }
    writeln!(w)?;
    for (ri, &r) in cfg.r_list.iter().enumerate() {
        write!(w, "{r}")?;
        for di in 0..nd {
            let cell = &cells[di * nr + ri];
            write!(w, " {}", cell.power)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        ExperimentConfig {
            n: 24,
            p: 0.5,
            family: FamilyDescriptor::Name("logistic".into()),
            d_list: vec![2],
            r_list: vec![1.0],
            reps_null: 200,
            reps_alt: 200,
            level: 0.05,
            master_seed: 42,
            mechanism: Mechanism::Uniform,
        }
    }

    #[test]
    fn single_cell_sweep_equals_run_power() {
        let cfg = small_cfg();
        let sweep = phase_sweep(&cfg).unwrap();
        let single = run_power(&cfg, 2, 1.0).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].power, single.power);
        assert_eq!(sweep[0].tv_lower_ks, single.tv_lower_ks);
        assert_eq!(sweep[0].mean_tau_alt, single.mean_tau_alt);
    }

    #[test]
    fn size_self_test_matches_level() {
        let mut cfg = small_cfg();
        cfg.reps_null = 2_000;
        cfg.reps_alt = 2_000;
        let (size, se) = run_size_self_test(&cfg).unwrap();
        assert!(
            (size - cfg.level).abs() <= 3.0 * se.max(stats::binomial_se(cfg.level, 2_000)),
            "size {size} +- {se}"
        );
    }

    #[test]
    fn ks_degenerate_cases() {
        assert_eq!(tv_lower_empirical(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(tv_lower_empirical(&[1.0, 2.0], &[5.0, 6.0]), 1.0);
    }

    #[test]
    fn sweep_deterministic_across_pools() {
        let cfg = small_cfg();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| phase_sweep(&cfg)).unwrap();
        let b = pool4.install(|| phase_sweep(&cfg)).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_sweep_csv(&a, &mut csv_a).unwrap();
        write_sweep_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn failed_cell_recorded_with_status() {
        let mut cfg = small_cfg();
        // Unreachable density for a range-limited custom family.
        cfg.p = 0.05;
        cfg.family = FamilyDescriptor::Custom(crate::connection::CustomDescriptor {
            family: "custom".into(),
            alpha: 0.5,
            table: crate::connection::TableDescriptor {
                x: vec![-22.0, -1.0, 1.0, 22.0],
                cdf: vec![0.2, 0.4, 0.6, 0.8],
            },
        });
        let cells = phase_sweep(&cfg).unwrap();
        assert_eq!(cells.len(), 1);
        assert!(cells[0].status.contains("calibration failed"));
        assert!(cells[0].power.is_nan());
    }

    #[test]
    fn csv_has_exact_header_and_rows() {
        let cfg = small_cfg();
        let cells = phase_sweep(&cfg).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn gnuplot_matrix_shape() {
        let mut cfg = small_cfg();
        cfg.d_list = vec![2, 4];
        cfg.r_list = vec![1.0, 2.0, 4.0];
        cfg.reps_null = 100;
        cfg.reps_alt = 100;
        let cells = phase_sweep(&cfg).unwrap();
        assert_eq!(cells.len(), 6);
        // Row-major d-then-r ordering.
        assert_eq!((cells[0].d, cells[0].r), (2, 1.0));
        assert_eq!((cells[1].d, cells[1].r), (2, 2.0));
        assert_eq!((cells[3].d, cells[3].r), (4, 1.0));
        let mut buf = Vec::new();
        write_gnuplot_matrix(&cfg, &cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3);
        assert!(text.lines().next().unwrap().starts_with("2 2 4"));
    }
}
