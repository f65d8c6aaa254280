#![allow(dead_code)]

use ambi_core::ambiguity::{AmbiguityGrid, LagTimeMoments};
use ambi_core::Complex64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

pub fn complex_normals(r: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(r.sample(StandardNormal), r.sample(StandardNormal)))
        .collect()
}

/// Random moments with zeros outside the natural support.
pub fn random_moments(r: &mut ChaCha8Rng, n: usize, dt: f64) -> LagTimeMoments {
    let mut e = Array2::<Complex64>::zeros((2 * n - 1, n));
    for tau in -(n as isize - 1)..n as isize {
        for i in LagTimeMoments::support(n, tau) {
            e[[(tau + n as isize - 1) as usize, i]] = c(r.sample(StandardNormal), r.sample(StandardNormal));
        }
    }
    LagTimeMoments::from_entries(e, dt).unwrap()
}

/// A grid whose every coefficient is free; the support of its inverse is unrestricted.
pub fn random_grid(r: &mut ChaCha8Rng, n: usize, dt: f64) -> AmbiguityGrid {
    let e = Array2::from_shape_fn((2 * n - 1, 2 * n), |_| c(r.sample(StandardNormal), r.sample(StandardNormal)));
    AmbiguityGrid::from_entries(e, dt).unwrap()
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Adaptive Simpson quadrature.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `exp(-z) I0(z)` from the angular integral, trapezoid rule on a periodic integrand.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let m = 400;
    let h = std::f64::consts::PI / m as f64;
    let mut s = 0.0;
    for i in 0..=m {
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        s += w * (z * ((i as f64 * h).cos() - 1.0)).exp();
    }
    s * h / std::f64::consts::PI
}

/// Rice density with location `nu` and scale `s`, evaluated without overflow.
pub fn rice_pdf(x: f64, nu: f64, s: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let s2 = s * s;
    x / s2 * (-(x - nu).powi(2) / (2.0 * s2)).exp() * bessel_i0_scaled(x * nu / s2)
}

/// Median of the exact posterior: point mass `1 - rho_post` at zero plus
/// `rho_post` times a Rice(`lambda q`, `lambda vbar / 2`) magnitude.
pub fn exact_posterior_median(vbar: f64, rho: f64, sigma2: f64, q: f64) -> f64 {
    let wide = vbar + sigma2;
    let a = (1.0 - rho).ln() - vbar.ln() - q * q / vbar;
    let b = rho.ln() - wide.ln() - q * q / wide;
    let rho_post = 1.0 / (1.0 + (a - b).exp());
    if rho_post <= 0.5 {
        return 0.0;
    }
    let lam = sigma2 / wide;
    let nu = lam * q;
    let s = (lam * vbar / 2.0).sqrt();
    let target = 1.0 - 0.5 / rho_post;
    let cdf = |x: f64| integrate(&|t| rice_pdf(t, nu, s), 0.0, x, 1e-12);
    let (mut lo, mut hi) = (0.0, nu + 12.0 * s);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kolmogorov-Smirnov statistic of `x` against a CDF.
pub fn ks_statistic(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = cdf(*v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.01 with the small-sample correction.
pub fn ks_critical_001(n: usize) -> f64 {
    let n = n as f64;
    1.628 / (n.sqrt() + 0.12 + 0.11 / n.sqrt())
}

/// Matrix of the discrete analytic-signal operator, `z = H x`.
pub fn analytic_operator(n: usize) -> nalgebra::DMatrix<Complex64> {
    let h = ambi_core::signal::analytic_weights(n);
    nalgebra::DMatrix::from_fn(n, n, |t, s| {
        (0..n)
            .map(|k| {
                Complex64::from_polar(h[k], 2.0 * std::f64::consts::PI * k as f64 * (t as f64 - s as f64) / n as f64)
            })
            .sum::<Complex64>()
            / n as f64
    })
}
