//! Raw lag-time moments, the empirical ambiguity function and its normalization.
//!
//! Grids are stored row-major with lag `tau` in `-(N-1)..=N-1` at row `tau + N - 1`.
//! Moment grids have `N` time columns; ambiguity grids have `2N` frequency columns
//! with `k` in `-N..N` at column `k + N` and `nu_k = k / (2 N dt)`.

use std::f64::consts::PI;

use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::AnalyticSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct LagTimeMoments {
    pub(crate) entries: Array2<Complex64>,
    pub(crate) dt: f64,
}

impl LagTimeMoments {
    /// Builds a moment grid from raw entries of shape `(2N-1, N)`.
    pub fn from_entries(entries: Array2<Complex64>, dt: f64) -> Result<Self> {
        let (r, c) = entries.dim();
        if c < 1 || r != 2 * c - 1 {
            return Err(Error::Dimension {
                expected: (2 * c.max(1) - 1, c),
                got: (r, c),
            });
        }
        Ok(Self { entries, dt })
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn row_index(&self, tau: isize) -> usize {
        (tau + self.n() as isize - 1) as usize
    }

    /// Entry at lag `tau` and time index `n`; zero outside the grid.
    pub fn get(&self, tau: isize, n: isize) -> Complex64 {
        let big = self.n() as isize;
        if tau.abs() >= big || n < 0 || n >= big {
            return Complex64::new(0.0, 0.0);
        }
        self.entries[[self.row_index(tau), n as usize]]
    }

    /// Valid time support `[max(0,tau), N-1+min(0,tau)]` as a half-open range.
    pub fn support(n: usize, tau: isize) -> std::ops::Range<usize> {
        let lo = tau.max(0) as usize;
        let hi = (n as isize + tau.min(0)) as usize;
        lo..hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityGrid {
    pub(crate) entries: Array2<Complex64>,
    pub(crate) dt: f64,
    pub(crate) normalized: bool,
    pub(crate) delta: f64,
}

impl AmbiguityGrid {
    /// Builds an un-normalized grid from raw entries of shape `(2N-1, 2N)`.
    pub fn from_entries(entries: Array2<Complex64>, dt: f64) -> Result<Self> {
        let (r, c) = entries.dim();
        if c < 2 || c % 2 != 0 || r != c - 1 {
            return Err(Error::Dimension {
                expected: (c.saturating_sub(1), c),
                got: (r, c),
            });
        }
        Ok(Self {
            entries,
            dt,
            normalized: false,
            delta: 0.5,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.ncols() / 2
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<Complex64> {
        self.entries
    }

    pub fn origin(&self) -> (usize, usize) {
        (self.n() - 1, self.n())
    }

    pub fn get(&self, tau: isize, k: isize) -> Complex64 {
        let n = self.n() as isize;
        self.entries[[(tau + n - 1) as usize, (k + n) as usize]]
    }

    pub fn nu(&self, k: isize) -> f64 {
        k as f64 / (2.0 * self.n() as f64 * self.dt)
    }

    /// Same grid with entries replaced; flags are kept.
    pub fn with_entries(&self, entries: Array2<Complex64>) -> Result<Self> {
        if entries.dim() != self.entries.dim() {
            return Err(Error::Dimension {
                expected: self.entries.dim(),
                got: entries.dim(),
            });
        }
        Ok(Self {
            entries,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationField {
    pub kappa: Array2<f64>,
    pub ell: Array2<f64>,
    pub delta: f64,
}

pub fn raw_moments(z: &AnalyticSeries) -> LagTimeMoments {
    let n = z.n();
    let s = z.samples();
    let mut entries = Array2::<Complex64>::zeros((2 * n - 1, n));
    entries
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut out)| {
            let tau = row as isize - (n as isize - 1);
            for i in LagTimeMoments::support(n, tau) {
                out[i] = s[i] * s[(i as isize - tau) as usize].conj();
            }
        });
    LagTimeMoments {
        entries,
        dt: z.dt(),
    }
}

pub fn emaf(m: &LagTimeMoments) -> AmbiguityGrid {
    let n = m.n();
    let dt = m.dt;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(2 * n);
    let mut entries = Array2::<Complex64>::zeros((2 * n - 1, 2 * n));
    Zip::from(entries.axis_iter_mut(Axis(0)))
        .and(m.entries.axis_iter(Axis(0)))
        .into_par_iter()
        .for_each(|(mut out, row)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
            buf[..n].iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
            fft.process(&mut buf);
            // column k + N holds frequency index k (mod 2N)
            for (c, o) in out.iter_mut().enumerate() {
                *o = buf[(c + n) % (2 * n)] * dt;
            }
        });
    AmbiguityGrid {
        entries,
        dt,
        normalized: false,
        delta: 0.5,
    }
}

/// Direct evaluation of `dt * sum_n m(tau,n) exp(-2 pi i nu t_n)` at an arbitrary `nu`.
pub fn emaf_at(m: &LagTimeMoments, tau: isize, nu: f64) -> Complex64 {
    let n = m.n();
    let row = m.entries.row(m.row_index(tau));
    LagTimeMoments::support(n, tau)
        .map(|i| row[i] * Complex64::from_polar(1.0, -2.0 * PI * nu * i as f64 * m.dt))
        .sum::<Complex64>()
        * m.dt
}

pub fn normalization(n: usize, dt: f64, delta: f64) -> Result<NormalizationField> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if n < 1 || !(dt > 0.0) {
        return Err(Error::Parameter("n must be positive and dt > 0".into()));
    }
    let rows = 2 * n - 1;
    let cols = 2 * n;
    let mut kappa = Array2::<f64>::zeros((rows, cols));
    let mut ell = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        let m = (n - (r as isize - (n as isize - 1)).unsigned_abs()) as f64;
        let scale = m.powf(4.0 * delta - 1.0) / dt;
        for c in 0..cols {
            let nu = (c as f64 - n as f64) / (2.0 * n as f64 * dt);
            // floor at the row's own frequency resolution
            let band = (0.5 / dt - nu.abs()).max(0.5 / (m * dt));
            kappa[[r, c]] = scale * band;
            ell[[r, c]] = 0.25 * m / (0.5 - nu.abs() * dt).max(0.5 / m);
        }
    }
    Ok(NormalizationField { kappa, ell, delta })
}

pub fn normalize(a: &AmbiguityGrid, f: &NormalizationField) -> Result<AmbiguityGrid> {
    if a.normalized {
        return Err(Error::State("grid is already normalized"));
    }
    if f.kappa.dim() != a.entries.dim() {
        return Err(Error::Dimension {
            expected: a.entries.dim(),
            got: f.kappa.dim(),
        });
    }
    let mut entries = a.entries.clone();
    Zip::from(&mut entries)
        .and(&f.kappa)
        .par_for_each(|e, &k| *e /= k.sqrt());
    Ok(AmbiguityGrid {
        entries,
        dt: a.dt,
        normalized: true,
        delta: f.delta,
    })
}

pub fn denormalize(a: &AmbiguityGrid, f: &NormalizationField) -> Result<AmbiguityGrid> {
    if !a.normalized {
        return Err(Error::State("grid is not normalized"));
    }
    if f.kappa.dim() != a.entries.dim() {
        return Err(Error::Dimension {
            expected: a.entries.dim(),
            got: f.kappa.dim(),
        });
    }
    let mut entries = a.entries.clone();
    Zip::from(&mut entries)
        .and(&f.kappa)
        .par_for_each(|e, &k| *e *= k.sqrt());
    Ok(AmbiguityGrid {
        entries,
        dt: a.dt,
        normalized: false,
        delta: a.delta,
    })
}

/// Multiplicative smoothing kernel over the ambiguity plane.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothingKernel {
    Identity,
    /// `exp(-nu^2 / (2 b^2))`, the same in every lag row
    GaussianNu { bandwidth: f64 },
    /// Separable Gaussian in lag and dual frequency.
    Gaussian { tau_width: f64, nu_width: f64 },
    Custom(Array2<f64>),
}

impl SmoothingKernel {
    pub fn values(&self, n: usize, dt: f64) -> Array2<f64> {
        let (rows, cols) = (2 * n - 1, 2 * n);
        let nu = |c: usize| (c as f64 - n as f64) / (2.0 * n as f64 * dt);
        let tau = |r: usize| (r as f64 - (n as f64 - 1.0)) * dt;
        match self {
            SmoothingKernel::Identity => Array2::ones((rows, cols)),
            SmoothingKernel::GaussianNu { bandwidth } => {
                Array2::from_shape_fn((rows, cols), |(_, c)| {
                    (-nu(c).powi(2) / (2.0 * bandwidth * bandwidth)).exp()
                })
            }
            SmoothingKernel::Gaussian { tau_width, nu_width } => {
                Array2::from_shape_fn((rows, cols), |(r, c)| {
                    (-nu(c).powi(2) / (2.0 * nu_width * nu_width)
                        - tau(r).powi(2) / (2.0 * tau_width * tau_width))
                        .exp()
                })
            }
            SmoothingKernel::Custom(v) => v.clone(),
        }
    }
}

pub fn smooth_kernel(a: &AmbiguityGrid, omega: &SmoothingKernel) -> Result<AmbiguityGrid> {
    let w = omega.values(a.n(), a.dt);
    if w.dim() != a.entries.dim() {
        return Err(Error::Dimension {
            expected: a.entries.dim(),
            got: w.dim(),
        });
    }
    if w.iter().any(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Parameter("kernel magnitude exceeds 1".into()));
    }
    let mut entries = a.entries.clone();
    Zip::from(&mut entries).and(&w).for_each(|e, &o| *e *= o);
    a.with_entries(entries)
}
