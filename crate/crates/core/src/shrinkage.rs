//! Mixture fit on normalized ambiguity magnitudes and posterior-median thresholding.

use std::f64::consts::{LN_2, PI};

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::ambiguity::{AmbiguityGrid, LagTimeMoments};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Fitted mixture parameters ψ = (V̄, ρ, σ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageParams {
    pub vbar: f64,
    pub rho: f64,
    pub sigma2: f64,
}

impl ShrinkageParams {
    pub fn new(vbar: f64, rho: f64, sigma2: f64) -> Result<Self> {
        if !(vbar > 0.0 && sigma2 > 0.0 && rho > 0.0 && rho < 1.0) {
            return Err(Error::Parameter(format!(
                "need vbar > 0, 0 < rho < 1, sigma2 > 0; got ({vbar}, {rho}, {sigma2})"
            )));
        }
        Ok(Self { vbar, rho, sigma2 })
    }

    pub fn lambda(&self) -> f64 {
        self.sigma2 / (self.sigma2 + self.vbar)
    }

    /// Log weights of the null and signal components at magnitude `q`, without the `log 2q` term.
    fn log_components(&self, q: f64) -> (f64, f64) {
        let q2 = q * q;
        let wide = self.vbar + self.sigma2;
        let null = (-self.rho).ln_1p() - self.vbar.ln() - q2 / self.vbar;
        let signal = self.rho.ln() - wide.ln() - q2 / wide;
        (null, signal)
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn marginal_nll(params: &ShrinkageParams, magnitudes: &[f64]) -> Result<f64> {
    if magnitudes.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(Error::Input("magnitudes must be finite and non-negative".into()));
    }
    Ok(nll_unchecked(params, magnitudes))
}

fn nll_unchecked(params: &ShrinkageParams, magnitudes: &[f64]) -> f64 {
    let term = |&q: &f64| {
        if q == 0.0 {
            return f64::INFINITY;
        }
        let (a, b) = params.log_components(q);
        -(log_add_exp(a, b) + (2.0 * q).ln())
    };
    if magnitudes.len() > 4096 {
        // fixed chunks summed in order, so the result does not depend on thread scheduling
        let partial: Vec<f64> = magnitudes.par_chunks(4096).map(|c| c.iter().map(term).sum()).collect();
        partial.iter().sum()
    } else {
        magnitudes.iter().map(term).sum()
    }
}

/// Which coefficients enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitDomain {
    /// Decorrelated lattice: stride `max(1, N/64)` in lag and frequency,
    /// `|tau| < N/2`, `|nu| <= 0.4/dt`.
    #[default]
    Lattice,
    /// Every coefficient except the origin.
    Full,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub domain: FitDomain,
    /// Upper bound on ρ imposed by the reparameterization.
    pub rho_max: f64,
    /// Keep the signal component at least as wide as the noise component.
    pub sigma_above_vbar: bool,
    pub optimizer: NelderMeadOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            domain: FitDomain::Lattice,
            rho_max: 0.5,
            sigma_above_vbar: true,
            optimizer: NelderMeadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: ShrinkageParams,
    pub nll: f64,
    pub iterations: usize,
}

pub fn fit_domain_mask(n: usize, domain: FitDomain) -> Array2<bool> {
    let rows = 2 * n - 1;
    let cols = 2 * n;
    let mut mask = Array2::from_elem((rows, cols), true);
    if domain == FitDomain::Lattice {
        let s = (n / 64).max(1) as isize;
        for ((r, c), m) in mask.indexed_iter_mut() {
            let tau = r as isize - (n as isize - 1);
            let k = c as isize - n as isize;
            *m = tau.rem_euclid(s) == 0
                && k.rem_euclid(s) == 0
                && 2 * tau.unsigned_abs() < n
                && (k.unsigned_abs() as f64) <= 0.8 * n as f64;
        }
    }
    mask[[n - 1, n]] = false;
    mask
}

struct Reparam {
    rho_max: f64,
    sigma_above_vbar: bool,
}

impl Reparam {
    fn unpack(&self, x: &[f64]) -> ShrinkageParams {
        let vbar = x[0].exp();
        let rho = self.rho_max / (1.0 + (-x[1]).exp());
        let sigma2 = if self.sigma_above_vbar {
            vbar * (1.0 + x[2].exp())
        } else {
            x[2].exp()
        };
        ShrinkageParams { vbar, rho, sigma2 }
    }

    fn pack(&self, p: &ShrinkageParams) -> Vec<f64> {
        let r = p.rho / self.rho_max;
        let s = if self.sigma_above_vbar {
            (p.sigma2 / p.vbar - 1.0).max(1e-3).ln()
        } else {
            p.sigma2.ln()
        };
        vec![p.vbar.ln(), (r / (1.0 - r)).ln(), s]
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Maximum marginal likelihood on a flat sample of magnitudes. Exact zeros are skipped.
pub fn fit_magnitudes(magnitudes: &[f64], opts: &FitOptions) -> Result<FitResult> {
    if magnitudes.iter().any(|q| !q.is_finite() || *q < 0.0) {
        return Err(Error::Input("magnitudes must be finite and non-negative".into()));
    }
    let q: Vec<f64> = magnitudes.iter().copied().filter(|&v| v > 0.0).collect();
    if q.len() < 3 {
        return Err(Error::Input(format!(
            "need at least 3 positive magnitudes, got {}",
            q.len()
        )));
    }
    if !(opts.rho_max > 0.01 && opts.rho_max <= 1.0) {
        return Err(Error::Parameter("rho_max must lie in (0.01, 1]".into()));
    }
    let mut q2: Vec<f64> = q.iter().map(|v| v * v).collect();
    let v0 = median(&mut q2) / LN_2;
    let top = (q2.len() / 100).max(1);
    let top_mean = q2[q2.len() - top..].iter().sum::<f64>() / top as f64;
    let s0 = (top_mean - v0).max(v0);
    let rp = Reparam {
        rho_max: opts.rho_max,
        sigma_above_vbar: opts.sigma_above_vbar,
    };
    let x0 = rp.pack(&ShrinkageParams {
        vbar: v0,
        rho: 0.01,
        sigma2: s0,
    });
    let r = nelder_mead(|x| nll_unchecked(&rp.unpack(x), &q), &x0, opts.optimizer);
    let params = rp.unpack(&r.x);
    if !r.converged {
        return Err(Error::NonConvergence {
            iterations: r.iterations,
            best: params,
            nll: r.fx,
        });
    }
    Ok(FitResult {
        params,
        nll: r.fx,
        iterations: r.iterations,
    })
}

pub fn fit(a: &AmbiguityGrid, opts: &FitOptions) -> Result<FitResult> {
    if !a.is_normalized() {
        return Err(Error::State("fit needs a normalized grid"));
    }
    let mask = fit_domain_mask(a.n(), opts.domain);
    let q: Vec<f64> = a
        .entries()
        .iter()
        .zip(mask.iter())
        .filter(|(_, &m)| m)
        .map(|(v, _)| v.norm())
        .collect();
    fit_magnitudes(&q, opts)
}

pub fn posterior_rho(params: &ShrinkageParams, qhat: f64) -> f64 {
    let (a, b) = params.log_components(qhat);
    (b - log_add_exp(a, b)).exp()
}

/// Gaussian approximation used for the Rice posterior of the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MedianApprox {
    /// N(√((λq)² + λV̄/2), λV̄/2): moment-matched centre.
    #[default]
    RiceCentred,
    /// N(λq, λV̄/2).
    LambdaQ,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Posterior median of the signal magnitude under the Gaussian approximation; zero
/// when the point mass at zero carries at least half the posterior.
pub fn posterior_median(params: &ShrinkageParams, q: f64, approx: MedianApprox) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let lam = params.lambda();
    let sd = (lam * params.vbar / 2.0).sqrt();
    let mu = lam * q;
    let centre = match approx {
        MedianApprox::LambdaQ => mu,
        MedianApprox::RiceCentred => (mu * mu + sd * sd).sqrt(),
    };
    let rho_post = posterior_rho(params, q);
    let eta = std_normal_cdf(-centre / sd);
    if rho_post * (1.0 - eta) <= 0.5 {
        return 0.0;
    }
    let p = 1.0 - 1.0 / (2.0 * rho_post);
    let z = Normal::standard().inverse_cdf(p);
    (centre + sd * z).max(0.0)
}

pub fn theta_value(params: &ShrinkageParams, q: f64, approx: MedianApprox) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    (posterior_median(params, q, approx) / q).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdField {
    pub theta: Array2<f64>,
    pub rho_post: Array2<f64>,
}

impl ThresholdField {
    /// Fraction of off-origin coefficients with Θ > 0.
    pub fn retained_fraction(&self) -> f64 {
        let n = self.theta.ncols() / 2;
        let kept = self.theta.iter().filter(|&&t| t > 0.0).count()
            - usize::from(self.theta[[n - 1, n]] > 0.0);
        kept as f64 / (self.theta.len() - 1) as f64
    }
}

pub fn threshold_field(
    params: &ShrinkageParams,
    a: &AmbiguityGrid,
    approx: MedianApprox,
) -> Result<ThresholdField> {
    if !a.is_normalized() {
        return Err(Error::State("threshold needs a normalized grid"));
    }
    let dim = a.entries().dim();
    let mut theta = Array2::<f64>::zeros(dim);
    let mut rho_post = Array2::<f64>::zeros(dim);
    Zip::from(&mut theta)
        .and(&mut rho_post)
        .and(a.entries())
        .par_for_each(|t, r, v| {
            let q = v.norm();
            *r = posterior_rho(params, q);
            *t = theta_value(params, q, approx);
        });
    let (r0, c0) = a.origin();
    theta[[r0, c0]] = 1.0;
    Ok(ThresholdField { theta, rho_post })
}

pub fn apply_threshold(a: &AmbiguityGrid, t: &ThresholdField) -> Result<AmbiguityGrid> {
    if t.theta.dim() != a.entries().dim() {
        return Err(Error::Dimension {
            expected: a.entries().dim(),
            got: t.theta.dim(),
        });
    }
    let mut entries = a.entries().clone();
    Zip::from(&mut entries)
        .and(&t.theta)
        .par_for_each(|e, &th| *e *= th);
    a.with_entries(entries)
}

/// Per-lag inverse DFT of Θ over the 2N dual frequencies, indexed by time offset `m` in `0..2N`.
pub fn equivalent_kernel(t: &ThresholdField) -> Array2<Complex64> {
    let (rows, cols) = t.theta.dim();
    let n = cols / 2;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(cols);
    let mut out = Array2::<Complex64>::zeros((rows, cols));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(t.theta.axis_iter(Axis(0)))
        .into_par_iter()
        .for_each(|(mut o, th)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); cols];
            for (c, v) in th.iter().enumerate() {
                buf[(c + n) % cols] = Complex64::new(*v / cols as f64, 0.0);
            }
            ifft.process(&mut buf);
            o.iter_mut().zip(buf).for_each(|(a, b)| *a = b);
        });
    out
}

/// Circular convolution (length 2N, zero padded) of each moment row with its kernel row.
pub fn convolve_moments(m: &LagTimeMoments, kernel: &Array2<Complex64>) -> Result<LagTimeMoments> {
    let n = m.n();
    if kernel.dim() != (2 * n - 1, 2 * n) {
        return Err(Error::Dimension {
            expected: (2 * n - 1, 2 * n),
            got: kernel.dim(),
        });
    }
    let mut out = Array2::<Complex64>::zeros((2 * n - 1, n));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(m.entries().axis_iter(Axis(0)))
        .and(kernel.axis_iter(Axis(0)))
        .into_par_iter()
        .for_each(|(mut o, row, ker)| {
            for (t, v) in o.iter_mut().enumerate() {
                *v = row
                    .iter()
                    .enumerate()
                    .map(|(j, x)| x * ker[(t + 2 * n - j) % (2 * n)])
                    .sum();
            }
        });
    LagTimeMoments::from_entries(out, m.dt())
}

/// Dirichlet-type kernel of an indicator `|k| <= k0` on a 2N grid, at offset `m`.
pub fn indicator_kernel(n: usize, k0: usize, m: usize) -> Complex64 {
    let len = 2 * n;
    let x = 2.0 * PI * m as f64 / len as f64;
    let count = 2 * k0 + 1;
    if m.is_multiple_of(len) {
        return Complex64::new(count as f64 / len as f64, 0.0);
    }
    let v = (count as f64 * x / 2.0).sin() / (x / 2.0).sin();
    Complex64::new(v / len as f64, 0.0)
}
