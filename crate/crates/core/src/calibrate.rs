//! Edge-density quadrature and location calibration.
//!
//! The inner product W = <x, y> of two independent standard d-dimensional
//! Gaussians satisfies W | ||x|| ~ Normal(0, ||x||^2), so expectations of the
//! form E[h((W - mu)/(r sqrt(d)))] are computed as a two-level rule: an outer
//! rule matched to the chi-square(d) law of S = ||x||^2 and an inner rule in
//! the conditional Gaussian.
//!
//! The outer rule is generalized Gauss–Laguerre matched to the chi-square
//! weight (for d > 10^4, a 3-point rule on sqrt(S) matched to its first two
//! moments; the neglected third central moment of sqrt(S) is O(d^{-1/2}) and
//! enters scaled by the integrand's third derivative O((r sqrt(d))^{-3}),
//! a total error O(alpha / (r^3 d^2)) < 1e-16 in that regime). The node
//! count is scaled up by ceil(1/r^2) when r < 1 because the integrand then
//! varies on the scale r^2 d, finer than the chi-square scale.
//!
//! The inner integral uses composite Gauss–Legendre panels over the window
//! where h's argument is in the transition region, with the Gaussian mass on
//! either side added in closed form. Panel widths shrink like 1/steepness,
//! which keeps the rule spectrally accurate for arbitrarily steep connection
//! functions (steepness = ||x|| / (r sqrt(d)) is unbounded over the outer
//! nodes even for moderate parameters).
//!
//! Every public evaluation runs twice (coarse and refined rules) and reports
//! `QuadratureNotConverged` when the two disagree beyond `abs_tol`.

use crate::connection::ConnectionSpec;
use crate::error::{Error, Result};
use crate::quad;
use crate::seed::SeedContext;
use crate::stats;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

/// Node budgets and tolerance for the two-level quadrature.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Outer nodes over the radial law of ||x||.
    pub outer_nodes: usize,
    /// Inner budget; per-panel Gauss–Legendre order is inner_nodes/8.
    pub inner_nodes: usize,
    /// Sample count for the common-random-numbers Monte Carlo fallback.
    pub mc_fallback_samples: usize,
    /// Absolute tolerance on the Richardson (coarse vs refined) check.
    pub abs_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            outer_nodes: 64,
            inner_nodes: 128,
            mc_fallback_samples: 200_000,
            abs_tol: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_nodes < 8 || self.inner_nodes < 8 {
            return Err(Error::DomainError("quadrature node counts must be >= 8".into()));
        }
        if !(self.abs_tol > 0.0 && self.abs_tol <= 1e-3) {
            return Err(Error::DomainError("abs_tol must lie in (0, 1e-3]".into()));
        }
        Ok(())
    }
}

/// Full parameterization of one G(n, p, d, r) instance after calibration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub p: f64,
    pub d: usize,
    pub r: f64,
    /// Calibrated location mu_{p,d,r}.
    pub mu: f64,
    /// |edge_density(mu) - p| at acceptance.
    pub calib_residual: f64,
}

impl ModelParams {
    /// r * sqrt(d), the scale of the connection function's argument.
    pub fn rd(&self) -> f64 {
        self.r * (self.d as f64).sqrt()
    }

    /// sigma(w) = F((w - mu) / (r sqrt(d))).
    pub fn sigma(&self, spec: &ConnectionSpec, w: f64) -> f64 {
        spec.cdf((w - self.mu) / self.rd())
    }
}

#[derive(Clone, Copy)]
enum Integrand {
    Cdf,
    Pdf,
}

/// One pass of the two-level rule at a given resolution. Returns the first
/// and second moments of the inner value over the outer nodes (the second
/// moment feeds [`eta_moments`]).
fn moments_pass(
    spec: &ConnectionSpec,
    kind: Integrand,
    mu: f64,
    d: usize,
    r: f64,
    outer_nodes: usize,
    panel_order: usize,
    panel_width_cap: f64,
    panels_per_unit_steepness: f64,
) -> (f64, f64) {
    let rd = r * (d as f64).sqrt();
    let half_width = spec.tail_halfwidth();
    let (left_val, right_val) = match kind {
        // F clamps to its limit values outside the transition window (0 and 1
        // for proper CDFs; tabulated customs may clamp elsewhere).
        Integrand::Cdf => (spec.cdf_left_limit(), spec.cdf_right_limit()),
        Integrand::Pdf => (0.0, 0.0),
    };
    let (gl_x, gl_w) = quad::gauss_legendre(panel_order);

    let inner = |s: f64| -> f64 {
        let root_s = s.sqrt();
        // Transition window in the inner Gaussian variable: the set of g with
        // |(sqrt(s) g - mu) / rd| <= half_width, clipped to +-9 where the
        // Gaussian mass is below 1.2e-19.
        let lo = ((mu - half_width * rd) / root_s).max(-9.0);
        let hi = ((mu + half_width * rd) / root_s).min(9.0);
        if lo >= hi {
            // The transition lies entirely outside the clipped range; only
            // the limit values contribute.
            return left_val * stats::norm_cdf(hi) + right_val * stats::norm_sf(hi);
        }
        let steepness = root_s / rd;
        let width = panel_width_cap.min(panels_per_unit_steepness / steepness);
        let k = ((hi - lo) / width).ceil() as usize;
        let k = k.max(1);
        let step = (hi - lo) / k as f64;
        let mut acc = 0.0;
        for panel in 0..k {
            let a = lo + step * panel as f64;
            let mid = a + 0.5 * step;
            let half = 0.5 * step;
            let mut panel_acc = 0.0;
            for (x, w) in gl_x.iter().zip(&gl_w) {
                let g = mid + half * x;
                let arg = (root_s * g - mu) / rd;
                let hval = match kind {
                    Integrand::Cdf => spec.cdf(arg),
                    Integrand::Pdf => spec.pdf(arg),
                };
                panel_acc += w * stats::norm_pdf(g) * hval;
            }
            acc += half * panel_acc;
        }
        left_val * stats::norm_cdf(lo) + acc + right_val * stats::norm_sf(hi)
    };

    if d <= 10_000 {
        let (s_nodes, s_weights) = quad::chi2_rule(d, outer_nodes);
        let vals: Vec<f64> = s_nodes.iter().map(|&s| inner(s)).collect();
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        (
            quad::pairwise_dot(&vals, &s_weights),
            quad::pairwise_dot(&sq, &s_weights),
        )
    } else {
        let m1 = stats::chi_mean(d);
        let var = d as f64 - m1 * m1;
        let spread = (3.0 * var).sqrt();
        let nodes = [m1, m1 - spread, m1 + spread];
        let weights = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        let mut first = 0.0;
        let mut second = 0.0;
        for (&m, &w) in nodes.iter().zip(&weights) {
            let v = inner(m * m);
            first += w * v;
            second += w * v * v;
        }
        (first, second)
    }
}

fn expectation(
    spec: &ConnectionSpec,
    kind: Integrand,
    mu: f64,
    d: usize,
    r: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    q.validate()?;
    if d < 1 {
        return Err(Error::DomainError("d must be >= 1".into()));
    }
    if !(r > 0.0) {
        return Err(Error::DomainError("r must be positive".into()));
    }
    // The integrand varies on scale r^2 d in S; when that is finer than the
    // chi-square scale d the outer rule needs proportionally more nodes.
    let bump = (4.0 / (r * r * d as f64)).ceil().clamp(1.0, 8.0) as usize;
    let n_outer = (q.outer_nodes * bump).min(1024);
    let base_order = (q.inner_nodes / 8).clamp(8, 48);
    let fine_order = (3 * q.inner_nodes / 16).clamp(12, 64);
    let (coarse, _) = moments_pass(spec, kind, mu, d, r, n_outer, base_order, 1.5, 3.0);
    let (refined, _) = moments_pass(
        spec,
        kind,
        mu,
        d,
        r,
        (3 * n_outer / 2).min(1024),
        fine_order,
        1.0,
        2.0,
    );
    let delta = (coarse - refined).abs();
    if delta > q.abs_tol {
        return Err(Error::QuadratureNotConverged {
            delta,
            abs_tol: q.abs_tol,
        });
    }
    Ok(refined)
}

/// E[F((W - mu)/(r sqrt(d)))] where W is the inner product of two independent
/// standard d-dimensional Gaussians: the marginal edge probability at
/// location mu.
pub fn edge_density(
    spec: &ConnectionSpec,
    mu: f64,
    d: usize,
    r: f64,
    q: &QuadratureConfig,
) -> Result<f64> {
    expectation(spec, Integrand::Cdf, mu, d, r, q)
}

/// lambda = E[f((W - mu)/(r sqrt(d)))], the mean of the connection density
/// along the inner-product law. Controls the detection signal strength;
/// always in (0, 2 sqrt(alpha)].
pub fn lambda_value(spec: &ConnectionSpec, params: &ModelParams, q: &QuadratureConfig) -> Result<f64> {
    expectation(spec, Integrand::Pdf, params.mu, params.d, params.r, q)
}

/// First two moments of eta(S) = E[sigma(W) | ||x||^2 = S] under the
/// chi-square(d) law of S. E[eta] is the edge density; E[eta^2] - 2p E[eta]
/// + p^2 is the exact mean of the covariance kernel gamma, since
/// E[xi(x,y)] = E[eta(z)^2] by Fubini.
pub fn eta_moments(
    spec: &ConnectionSpec,
    params: &ModelParams,
    q: &QuadratureConfig,
) -> Result<(f64, f64)> {
    q.validate()?;
    let (d, r, mu) = (params.d, params.r, params.mu);
    let bump = (4.0 / (r * r * d as f64)).ceil().clamp(1.0, 8.0) as usize;
    let n_outer = (q.outer_nodes * bump).min(1024);
    let base_order = (q.inner_nodes / 8).clamp(8, 48);
    let fine_order = (3 * q.inner_nodes / 16).clamp(12, 64);
    let coarse = moments_pass(spec, Integrand::Cdf, mu, d, r, n_outer, base_order, 1.5, 3.0);
    let refined = moments_pass(
        spec,
        Integrand::Cdf,
        mu,
        d,
        r,
        (3 * n_outer / 2).min(1024),
        fine_order,
        1.0,
        2.0,
    );
    let delta = (coarse.0 - refined.0).abs().max((coarse.1 - refined.1).abs());
    if delta > q.abs_tol {
        return Err(Error::QuadratureNotConverged {
            delta,
            abs_tol: q.abs_tol,
        });
    }
    Ok(refined)
}

/// Solve edge_density(mu) = p for mu.
///
/// edge_density is continuous and strictly decreasing in mu (F strictly
/// increasing under A0, W with full support), so the root is unique. The
/// solver probes the bracket midpoint first — for symmetric families at
/// p = 1/2 that lands exactly on mu = 0 — then runs Illinois-damped false
/// position. Termination is on the function value (|density - p|), refined
/// toward 1e-12 when the quadrature allows, because a tolerance on mu is
/// meaningless in the flat large-r regime.
pub fn calibrate_mu(
    spec: &ConnectionSpec,
    n: usize,
    p: f64,
    d: usize,
    r: f64,
    q: &QuadratureConfig,
) -> Result<ModelParams> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError("p must lie in (0, 1)".into()));
    }
    let rd = r * (d as f64).sqrt();
    let qp = spec.quantile(p).map(f64::abs).unwrap_or(40.0);
    let q1p = spec.quantile(1.0 - p).map(f64::abs).unwrap_or(40.0);
    let lo = -10.0 * rd * qp - 10.0;
    let hi = 10.0 * rd * q1p + 10.0;

    let density = |mu: f64| -> Result<f64> { edge_density(spec, mu, d, r, q) };
    let f_lo = density(lo)? - p;
    let f_hi = density(hi)? - p;
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::BracketFailure { lo, hi, p });
    }

    // Refine beyond the declared tolerance when possible so that derived
    // identities (calibration symmetry, monotonicity in p) hold to well
    // below abs_tol even where the density is steep in mu.
    let target = q.abs_tol.min(1e-12);

    let mut a = lo;
    let mut fa = f_lo;
    let mut b = hi;
    let mut fb = f_hi;
    let mut x = 0.5 * (lo + hi);
    let mut fx = density(x)? - p;
    let mut best = (x, fx.abs());
    let mut side = 0i8;
    for _ in 0..200 {
        if fx.abs() <= target {
            return Ok(ModelParams {
                n,
                p,
                d,
                r,
                mu: x,
                calib_residual: fx.abs(),
            });
        }
        if fx.abs() < best.1 {
            best = (x, fx.abs());
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5; // Illinois damping against end-point stagnation
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        x = if secant.is_finite() && secant > a && secant < b {
            secant
        } else {
            0.5 * (a + b)
        };
        fx = density(x)? - p;
    }
    if best.1 <= q.abs_tol {
        return Ok(ModelParams {
            n,
            p,
            d,
            r,
            mu: best.0,
            calib_residual: best.1,
        });
    }
    Err(Error::NonConvergence {
        iterations: 200,
        residual: best.1,
    })
}

/// How Monte Carlo edge-density estimation draws its pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    /// Pick by problem size: direct vectors while d * pairs <= 2^26.
    Auto,
    /// Draw full latent vectors and form the inner product (the brute force).
    DirectVectors,
    /// Draw W | S ~ Normal(0, S) with S ~ chi-square(d); same law as the
    /// inner product, O(1) per pair at any dimension.
    ConditionalNorm,
}

/// Monte Carlo edge frequency over independent pairs: one Bernoulli edge per
/// pair. Returns (frequency, binomial standard error).
pub fn mc_edge_density(
    spec: &ConnectionSpec,
    mu: f64,
    d: usize,
    r: f64,
    pairs: usize,
    seed: &SeedContext,
    mode: McMode,
) -> (f64, f64) {
    let rd = r * (d as f64).sqrt();
    let direct = match mode {
        McMode::DirectVectors => true,
        McMode::ConditionalNorm => false,
        McMode::Auto => (d as u64) * (pairs as u64) <= 1 << 26,
    };
    let mut rng = seed.rng();
    let mut edges = 0u64;
    if direct {
        let mut x = vec![0.0f64; d];
        let mut y = vec![0.0f64; d];
        for _ in 0..pairs {
            for v in x.iter_mut().chain(y.iter_mut()) {
                *v = rng.sample(StandardNormal);
            }
            let w = quad::pairwise_dot(&x, &y);
            let u: f64 = rng.random();
            if u < spec.cdf((w - mu) / rd) {
                edges += 1;
            }
        }
    } else {
        let gamma = Gamma::new(d as f64 / 2.0, 2.0).expect("valid chi-square shape");
        for _ in 0..pairs {
            let s: f64 = gamma.sample(&mut rng);
            let g: f64 = rng.sample(StandardNormal);
            let w = s.sqrt() * g;
            let u: f64 = rng.random();
            if u < spec.cdf((w - mu) / rd) {
                edges += 1;
            }
        }
    }
    let freq = edges as f64 / pairs as f64;
    (freq, stats::binomial_se(freq, pairs))
}

/// Monte Carlo calibration fallback with common random numbers: one fixed
/// sample of inner-product draws is reused across all mu probes, which keeps
/// the estimated density exactly monotone in mu and the root finder stable.
/// Intended for families whose evaluators are too rough for the quadrature's
/// convergence check.
pub fn calibrate_mu_mc(
    spec: &ConnectionSpec,
    n: usize,
    p: f64,
    d: usize,
    r: f64,
    samples: usize,
    seed: &SeedContext,
) -> Result<ModelParams> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError("p must lie in (0, 1)".into()));
    }
    if samples == 0 {
        return Err(Error::DomainError("samples must be positive".into()));
    }
    let rd = r * (d as f64).sqrt();
    let mut rng = seed.rng();
    let gamma = Gamma::new(d as f64 / 2.0, 2.0).expect("valid chi-square shape");
    let ws: Vec<f64> = (0..samples)
        .map(|_| {
            let s: f64 = gamma.sample(&mut rng);
            let g: f64 = rng.sample(StandardNormal);
            s.sqrt() * g
        })
        .collect();
    let density = |mu: f64| -> f64 {
        let vals: Vec<f64> = ws.iter().map(|&w| spec.cdf((w - mu) / rd)).collect();
        quad::pairwise_sum(&vals) / samples as f64
    };

    let qp = spec.quantile(p).map(f64::abs).unwrap_or(40.0);
    let q1p = spec.quantile(1.0 - p).map(f64::abs).unwrap_or(40.0);
    let lo = -10.0 * rd * qp - 10.0;
    let hi = 10.0 * rd * q1p + 10.0;
    let (mut a, mut fa) = (lo, density(lo) - p);
    let (mut b, mut fb) = (hi, density(hi) - p);
    if fa < 0.0 || fb > 0.0 {
        return Err(Error::BracketFailure { lo, hi, p });
    }
    let mut x = 0.5 * (a + b);
    let mut fx = density(x) - p;
    let mut side = 0i8;
    for _ in 0..200 {
        if fx.abs() <= 1e-12 || b - a <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
        if fx > 0.0 {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
        let secant = b - fb * (b - a) / (fb - fa);
        x = if secant.is_finite() && secant > a && secant < b {
            secant
        } else {
            0.5 * (a + b)
        };
        fx = density(x) - p;
    }
    Ok(ModelParams {
        n,
        p,
        d,
        r,
        mu: x,
        calib_residual: fx.abs(),
    })
}
