//! Synthetic nonstationary processes with exact second-order moments.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{analytic_in_place, TimeSeries};

/// Locally stationary component weights.
pub const W_LOCSTAT: [f64; 6] = [1.0, 0.33, 0.266, 0.2, 0.133, 0.066];
/// Cyclostationary component weights.
pub const W_CYCLO: [f64; 6] = [1.0, 0.5, 0.0, 0.3, 0.0, 0.1];

/// Time-varying scale `sigma_t` indexed by raw sample number.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    Constant(f64),
    /// `base + (t/period)(1 - t/period)`
    Parabolic { base: f64, period: f64 },
    /// `amp * |sin(2 pi freq t)|`
    AbsSine { amp: f64, freq: f64 },
    Values(Vec<f64>),
}

impl Modulation {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            Modulation::Constant(v) => *v,
            Modulation::Parabolic { base, period } => {
                let u = t as f64 / period;
                base + u * (1.0 - u)
            }
            Modulation::AbsSine { amp, freq } => amp * (2.0 * PI * freq * t as f64).sin().abs(),
            Modulation::Values(v) => v.get(t).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedMAProcess {
    pub weights: Vec<f64>,
    pub modulation: Modulation,
    pub seed: u64,
}

impl ModulatedMAProcess {
    pub fn locally_stationary(seed: u64) -> Self {
        Self {
            weights: W_LOCSTAT.to_vec(),
            modulation: Modulation::Parabolic {
                base: 0.25,
                period: 512.0,
            },
            seed,
        }
    }

    pub fn cyclostationary(seed: u64) -> Self {
        Self {
            weights: W_CYCLO.to_vec(),
            modulation: Modulation::AbsSine { amp: 4.0, freq: 0.09 },
            seed,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Parameter("weights must be non-empty".into()));
        }
        if n < self.weights.len().max(2) {
            return Err(Error::InvalidLength(format!(
                "n = {n} is shorter than the filter ({} taps) or below 2",
                self.weights.len()
            )));
        }
        for t in 0..n {
            let s = self.modulation.at(t);
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Parameter(format!("modulation at t={t} is {s}")));
            }
        }
        Ok(())
    }

    fn sample(&self, n: usize, stream: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let l = self.weights.len() - 1;
        // eps[j] holds innovation at time j - l
        let eps: Vec<f64> = (0..n + l).map(|_| rng.sample(StandardNormal)).collect();
        (0..n)
            .map(|t| {
                let acc: f64 = self
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * eps[t + l - i])
                    .sum();
                self.modulation.at(t) * acc
            })
            .collect()
    }

    fn covariance_real(&self, n: usize) -> DMatrix<f64> {
        let w = &self.weights;
        let sig: Vec<f64> = (0..n).map(|t| self.modulation.at(t)).collect();
        DMatrix::from_fn(n, n, |s, t| {
            let d = s as isize - t as isize;
            let acv: f64 = (0..w.len() as isize)
                .filter(|l| (0..w.len() as isize).contains(&(l - d)))
                .map(|l| w[l as usize] * w[(l - d) as usize])
                .sum();
            sig[s] * sig[t] * acv
        })
    }
}

/// Filter coefficients `h_{k,n}` for `|k| <= M`.
#[derive(Debug, Clone, PartialEq)]
pub enum TvFilter {
    Delta,
    /// `h_{k,n} = w_{k+M} * sigma_n`
    Separable { weights: Vec<f64>, modulation: Modulation },
    /// `h_{k,n} = hann(k) cos(2 pi (f0 + beta n) k)`
    Chirp { f0: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeVaryingFilterProcess {
    pub filter: TvFilter,
    pub half_width: usize,
    pub noise_floor: f64,
    pub dt: f64,
    pub seed: u64,
}

impl TimeVaryingFilterProcess {
    pub fn h(&self, k: isize, n: usize) -> f64 {
        let m = self.half_width as isize;
        if k.abs() > m {
            return 0.0;
        }
        match &self.filter {
            TvFilter::Delta => f64::from(k == 0),
            TvFilter::Separable { weights, modulation } => {
                weights.get((k + m) as usize).copied().unwrap_or(0.0) * modulation.at(n)
            }
            TvFilter::Chirp { f0, beta } => {
                let g = if m == 0 {
                    1.0
                } else {
                    0.5 * (1.0 - (PI * (k + m) as f64 / m as f64).cos())
                };
                g * (2.0 * PI * (f0 + beta * n as f64) * k as f64).cos()
            }
        }
    }

    /// Chirping stand-in for a time-varying filtered signal.
    pub fn chirp(n: usize, seed: u64) -> Self {
        Self {
            filter: TvFilter::Chirp {
                f0: 0.05,
                beta: 0.3 / n as f64,
            },
            half_width: 8,
            noise_floor: 0.1,
            dt: 1.0,
            seed,
        }
    }

    fn covariance_real(&self, n: usize) -> DMatrix<f64> {
        let m = self.half_width as isize;
        let dt2 = self.dt * self.dt;
        DMatrix::from_fn(n, n, |s, t| {
            let d = s as isize - t as isize;
            let mut acc = 0.0;
            for k in -m..=m {
                let k2 = k - d;
                if k2.abs() <= m {
                    acc += self.h(k, s) * self.h(k2, t);
                }
            }
            let noise = if s == t { self.noise_floor.powi(2) } else { 0.0 };
            dt2 * acc + noise
        })
    }
}

/// `E{X_s conj(X_t)}` as a dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalCovariance {
    pub entries: DMatrix<Complex64>,
}

impl TheoreticalCovariance {
    fn from_real(m: DMatrix<f64>) -> Self {
        Self {
            entries: m.map(|v| Complex64::new(v, 0.0)),
        }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }
}

pub fn gen_modulated_ma(p: &ModulatedMAProcess, n: usize) -> Result<TimeSeries> {
    p.validate(n)?;
    TimeSeries::new(p.sample(n, 0), 1.0)
}

pub fn gen_aggregation(n: usize, seed: u64) -> Result<TimeSeries> {
    let a = ModulatedMAProcess::locally_stationary(seed);
    let b = ModulatedMAProcess::cyclostationary(seed);
    a.validate(n)?;
    b.validate(n)?;
    let x: Vec<f64> = a
        .sample(n, 0)
        .iter()
        .zip(b.sample(n, 1))
        .map(|(u, v)| u + v)
        .collect();
    TimeSeries::new(x, 1.0)
}

pub fn gen_tv_filter(p: &TimeVaryingFilterProcess, n: usize) -> Result<TimeSeries> {
    let m = p.half_width;
    if n < (2 * m + 1).max(2) {
        return Err(Error::InvalidLength(format!("n = {n} is shorter than 2M+1 = {}", 2 * m + 1)));
    }
    if !(p.dt > 0.0) || !(p.noise_floor >= 0.0) {
        return Err(Error::Parameter("dt must be positive and noise_floor non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(0);
    // eps[j] holds innovation at time j - M
    let eps: Vec<f64> = (0..n + 2 * m).map(|_| rng.sample(StandardNormal)).collect();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(p.seed);
    noise_rng.set_stream(2);
    let mi = m as isize;
    let x = (0..n)
        .map(|t| {
            let acc: f64 = (-mi..=mi)
                .map(|k| p.h(k, t) * eps[(t as isize - k + mi) as usize])
                .sum();
            let eta: f64 = noise_rng.sample(StandardNormal);
            p.dt * acc + p.noise_floor * eta
        })
        .collect();
    TimeSeries::new(x, p.dt)
}

/// Generative model whose exact covariance is known.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    WhiteNoise { variance: f64 },
    ModulatedMA(ModulatedMAProcess),
    Aggregation,
    TvFilter(TimeVaryingFilterProcess),
}

pub fn theoretical_covariance(p: &ProcessSpec, n: usize) -> TheoreticalCovariance {
    let real = match p {
        ProcessSpec::WhiteNoise { variance } => DMatrix::identity(n, n) * *variance,
        ProcessSpec::ModulatedMA(m) => m.covariance_real(n),
        ProcessSpec::Aggregation => {
            ModulatedMAProcess::locally_stationary(0).covariance_real(n)
                + ModulatedMAProcess::cyclostationary(0).covariance_real(n)
        }
        ProcessSpec::TvFilter(f) => f.covariance_real(n),
    };
    TheoreticalCovariance::from_real(real)
}

/// Covariance of the analytic signal, `H C Hᴴ`, with `H` the discrete analytic operator.
pub fn analytic_covariance(c: &TheoreticalCovariance) -> TheoreticalCovariance {
    let mut planner = FftPlanner::new();
    let apply_columns = |m: &DMatrix<Complex64>, planner: &mut FftPlanner<f64>| {
        let mut out = m.clone();
        for mut col in out.column_iter_mut() {
            let mut buf: Vec<Complex64> = col.iter().copied().collect();
            analytic_in_place(&mut buf, planner);
            col.iter_mut().zip(buf).for_each(|(a, b)| *a = b);
        }
        out
    };
    let hc = apply_columns(&c.entries, &mut planner);
    let hchh = apply_columns(&hc.adjoint(), &mut planner);
    TheoreticalCovariance {
        entries: (&hchh + hchh.adjoint()).scale(0.5),
    }
}

/// Scaled Dirichlet kernel `sin(pi L x) / sin(pi x)` with its removable singularities filled in.
pub fn dirichlet(l: usize, x: f64) -> f64 {
    let s = (PI * x).sin();
    if s.abs() < 1e-12 {
        l as f64 * (PI * l as f64 * x).cos() / (PI * x).cos()
    } else {
        (PI * l as f64 * x).sin() / s
    }
}

/// Expected EMAF of a stationary process with autocovariance `m_tilde[|tau|]`.
pub fn stationary_emaf_expectation(
    m_tilde: &[f64],
    n: usize,
    dt: f64,
    tau: isize,
    nu: f64,
) -> Result<Complex64> {
    if tau.unsigned_abs() >= n {
        return Err(Error::Parameter(format!("|tau| = {} must be below n = {n}", tau.abs())));
    }
    let m = m_tilde.get(tau.unsigned_abs()).copied().unwrap_or(0.0);
    let l = n - tau.unsigned_abs();
    let phase = Complex64::from_polar(1.0, -PI * nu * dt * (n as f64 + tau as f64 - 1.0));
    Ok(phase * dt * dirichlet(l, dt * nu) * m)
}

/// Large-N covariance of white-noise EMAF coefficients on the grid `nu_j = j / (dt (N - max|tau|))`.
/// `sigma2` is the spectral level of the analytic signal, so `E|z|^2 = sigma2 / (2 dt)`.
pub fn whitenoise_af_covariance(
    n: usize,
    _dt: f64,
    sigma2: f64,
    tau1: isize,
    j1: isize,
    tau2: isize,
    j2: isize,
) -> Complex64 {
    // the grid fixes nu*dt, so dt drops out
    if j1 != j2 {
        return Complex64::new(0.0, 0.0);
    }
    let mt = tau1.unsigned_abs().max(tau2.unsigned_abs());
    if mt >= n {
        return Complex64::new(0.0, 0.0);
    }
    let len = (n - mt) as f64;
    // band in cycles per sample
    let x = j1 as f64 / len;
    let lo = (-x).max(0.0);
    let hi = (0.5 - x).min(0.5);
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let d = (tau1 - tau2) as f64;
    let bracket = if d == 0.0 {
        Complex64::new(hi - lo, 0.0)
    } else {
        (Complex64::from_polar(1.0, 2.0 * PI * hi * d) - Complex64::from_polar(1.0, 2.0 * PI * lo * d))
            / Complex64::new(0.0, 2.0 * PI * d)
    };
    bracket * len * sigma2 * sigma2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Aggregation512,
    WhiteNoise,
    MaLocstat,
    MaCyclo,
    TvChirp,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Aggregation512,
        Preset::WhiteNoise,
        Preset::MaLocstat,
        Preset::MaCyclo,
        Preset::TvChirp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Aggregation512 => "aggregation512",
            Preset::WhiteNoise => "whitenoise",
            Preset::MaLocstat => "ma-locstat",
            Preset::MaCyclo => "ma-cyclo",
            Preset::TvChirp => "tvchirp",
        }
    }

    pub fn default_n(&self) -> usize {
        512
    }

    pub fn spec(&self, n: usize, seed: u64) -> ProcessSpec {
        match self {
            Preset::Aggregation512 => ProcessSpec::Aggregation,
            Preset::WhiteNoise => ProcessSpec::WhiteNoise { variance: 1.0 },
            Preset::MaLocstat => ProcessSpec::ModulatedMA(ModulatedMAProcess::locally_stationary(seed)),
            Preset::MaCyclo => ProcessSpec::ModulatedMA(ModulatedMAProcess::cyclostationary(seed)),
            Preset::TvChirp => ProcessSpec::TvFilter(TimeVaryingFilterProcess::chirp(n, seed)),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<TimeSeries> {
        match self.spec(n, seed) {
            ProcessSpec::Aggregation => gen_aggregation(n, seed),
            ProcessSpec::WhiteNoise { variance } => {
                let p = ModulatedMAProcess {
                    weights: vec![1.0],
                    modulation: Modulation::Constant(variance.sqrt()),
                    seed,
                };
                gen_modulated_ma(&p, n)
            }
            ProcessSpec::ModulatedMA(p) => gen_modulated_ma(&p, n),
            ProcessSpec::TvFilter(p) => gen_tv_filter(&p, n),
        }
    }

    pub fn covariance(&self, n: usize) -> TheoreticalCovariance {
        theoretical_covariance(&self.spec(n, 0), n)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| Error::Input(format!("unknown preset '{s}'")))
    }
}
