//! Inversion of ambiguity grids to moments, covariance assembly and PSD correction.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::ambiguity::{AmbiguityGrid, LagTimeMoments};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    None,
    Shift,
    Clip,
}

impl Correction {
    pub fn name(&self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Shift => "shift",
            Correction::Clip => "clip",
        }
    }
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "shift" => Ok(Correction::Shift),
            "clip" => Ok(Correction::Clip),
            other => Err(Error::Parameter(format!("unknown correction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HermitianCovariance {
    entries: DMatrix<Complex64>,
    correction: Correction,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl HermitianCovariance {
    /// Hermitianizes `b` as `(B + Bᴴ)/2` and decomposes it.
    pub fn from_matrix(b: DMatrix<Complex64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::Dimension {
                expected: (b.nrows(), b.nrows()),
                got: b.shape(),
            });
        }
        let h = (&b + b.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
        Ok(Self {
            entries: h,
            correction: Correction::None,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn correction(&self) -> Correction {
        self.correction
    }

    /// Descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn to_array(&self) -> Array2<Complex64> {
        let n = self.n();
        Array2::from_shape_fn((n, n), |(r, c)| self.entries[(r, c)])
    }
}

pub fn invert_af(a: &AmbiguityGrid) -> Result<LagTimeMoments> {
    if a.is_normalized() {
        return Err(Error::State("denormalize before inverting"));
    }
    let n = a.n();
    let dt = a.dt();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(2 * n);
    let mut out = Array2::<Complex64>::zeros((2 * n - 1, n));
    let scale = 1.0 / (2.0 * n as f64 * dt);
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(a.entries().axis_iter(Axis(0)))
        .into_par_iter()
        .for_each(|(mut o, row)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
            for (c, v) in row.iter().enumerate() {
                buf[(c + n) % (2 * n)] = *v;
            }
            ifft.process(&mut buf);
            o.iter_mut().zip(&buf[..n]).for_each(|(x, y)| *x = y * scale);
        });
    LagTimeMoments::from_entries(out, dt)
}

/// Places `m(tau, n)` at `(n, n - tau)` for every lag, then Hermitianizes.
pub fn assemble(m: &LagTimeMoments) -> Result<HermitianCovariance> {
    HermitianCovariance::from_matrix(moment_matrix(m))
}

/// The un-symmetrized matrix `B` behind [`assemble`].
pub fn moment_matrix(m: &LagTimeMoments) -> DMatrix<Complex64> {
    let n = m.n();
    let mut b = DMatrix::<Complex64>::zeros(n, n);
    for tau in -(n as isize - 1)..n as isize {
        let row = m.entries().row(m.row_index(tau));
        for i in LagTimeMoments::support(n, tau) {
            b[(i, (i as isize - tau) as usize)] = row[i];
        }
    }
    b
}

pub fn correct(c: &HermitianCovariance, method: Correction) -> HermitianCovariance {
    let min = c.min_eigenvalue();
    let negative = min < -1e-12 * c.trace().abs() || (min < 0.0 && c.trace() == 0.0);
    let new: Vec<f64> = match method {
        Correction::None => c.eigenvalues.clone(),
        Correction::Shift if negative => c.eigenvalues.iter().map(|v| v - min).collect(),
        Correction::Shift => c.eigenvalues.clone(),
        Correction::Clip => c.eigenvalues.iter().map(|&v| v.max(0.0)).collect(),
    };
    let u = &c.eigenvectors;
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(new[j], 0.0);
    }
    let mut entries = &scaled * u.adjoint();
    entries = (&entries + entries.adjoint()).scale(0.5);
    HermitianCovariance {
        entries,
        correction: method,
        eigenvalues: new,
        eigenvectors: c.eigenvectors.clone(),
    }
}
