//! Quadrature rules and compensated summation helpers.
//!
//! The rules are generated at runtime: Gauss–Legendre by Newton iteration on
//! the Legendre recurrence, Gauss–Hermite and generalized Gauss–Laguerre by
//! the Golub–Welsch algorithm (implicit-QL eigensolver on the Jacobi matrix,
//! tracking only the first eigenvector component, which is all the weights
//! need). Weights of the probability-measure rules are normalized to sum to
//! one so the rules integrate the constant 1 exactly.

/// Pairwise (tree) summation. Error grows like O(log n) ulps instead of O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Dot product with pairwise accumulation.
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= 32 {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            acc += x * y;
        }
        acc
    } else {
        let mid = a.len() / 2;
        pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_pair(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Hermite rule for the standard normal probability measure
/// (weight e^{-x^2/2}/sqrt(2 pi)); weights sum to one.
pub fn gauss_hermite_norm(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|i| (i as f64).sqrt()).collect();
    golub_welsch(diag, off)
}

/// Generalized Gauss–Laguerre rule for the normalized measure
/// u^a e^{-u} / Gamma(a+1) on (0, inf); weights sum to one. Requires a > -1.
pub fn gauss_laguerre_gen(a: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    assert!(a > -1.0);
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + a + 1.0).collect();
    let off: Vec<f64> = (1..n)
        .map(|i| ((i as f64) * (i as f64 + a)).sqrt())
        .collect();
    golub_welsch(diag, off)
}

/// Quadrature rule for S ~ chi-square(d): nodes s_i and probability weights.
/// chi2(d)/2 is Gamma(d/2, 1), so this is the a = d/2 - 1 Laguerre rule with
/// nodes doubled.
pub fn chi2_rule(d: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut u, w) = gauss_laguerre_gen(d as f64 / 2.0 - 1.0, n);
    for x in &mut u {
        *x *= 2.0;
    }
    (u, w)
}

fn golub_welsch(diag: Vec<f64>, off: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    let mut d = diag;
    let mut e = off;
    e.push(0.0);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    symtri_ql_first_row(&mut d, &mut e, &mut z);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let nodes: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut weights: Vec<f64> = order.iter().map(|&i| z[i] * z[i]).collect();
    let total = pairwise_sum(&weights);
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}

/// Implicit-QL with Wilkinson shifts on a symmetric tridiagonal matrix,
/// accumulating only the first row of the eigenvector matrix (EISPACK imtql2
/// restricted to one row). On return `d` holds eigenvalues (unsorted) and `z`
/// the first component of each normalized eigenvector.
fn symtri_ql_first_row(d: &mut [f64], e: &mut [f64], z: &mut [f64]) {
    let n = d.len();
    if n == 1 {
        return;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter <= 50, "tridiagonal QL did not converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let shifted = if g >= 0.0 { g + r } else { g - r };
            g = d[m] - d[l] + e[l] / shifted;
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}
