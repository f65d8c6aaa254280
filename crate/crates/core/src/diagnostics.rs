//! QQ data, estimation-risk summaries and the white-noise variance probe.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::ambiguity::AmbiguityGrid;
use crate::covariance::{assemble, HermitianCovariance};
use crate::error::{Error, Result};
use crate::pipeline::{analyze, shrink, PipelineOptions};
use crate::procgen::{analytic_covariance, Preset, TheoreticalCovariance};
use crate::signal::{analytic_signal, demean};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QQData {
    pub sample_quantiles: Vec<f64>,
    pub theoretical_quantiles: Vec<f64>,
    pub component: Component,
}

impl QQData {
    /// Least-squares slope of sample against theoretical quantiles.
    pub fn slope(&self) -> f64 {
        let n = self.sample_quantiles.len() as f64;
        let mx = self.theoretical_quantiles.iter().sum::<f64>() / n;
        let my = self.sample_quantiles.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (x, y) in self.theoretical_quantiles.iter().zip(&self.sample_quantiles) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
        }
        sxy / sxx
    }

    /// Two columns: theoretical, sample.
    pub fn to_array(&self) -> Array2<f64> {
        let n = self.sample_quantiles.len();
        Array2::from_shape_fn((n, 2), |(i, j)| {
            if j == 0 {
                self.theoretical_quantiles[i]
            } else {
                self.sample_quantiles[i]
            }
        })
    }
}

fn qq(mut values: Vec<f64>, component: Component) -> QQData {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let normal = Normal::standard();
    let theoretical_quantiles = (1..=n)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / n as f64))
        .collect();
    QQData {
        sample_quantiles: values,
        theoretical_quantiles,
        component,
    }
}

pub fn qq_normalized_af(a: &AmbiguityGrid, vbar: f64) -> Result<(QQData, QQData)> {
    if !a.is_normalized() {
        return Err(Error::State("qq needs a normalized grid"));
    }
    if !(vbar > 0.0) {
        return Err(Error::Parameter(format!("vbar must be positive, got {vbar}")));
    }
    let origin = a.origin();
    let scale = (vbar / 2.0).sqrt();
    let off: Vec<Complex64> = a
        .entries()
        .indexed_iter()
        .filter(|(ix, _)| *ix != origin)
        .map(|(_, v)| v / scale)
        .collect();
    qq_from_values(&off)
}

/// QQ data for already standardized complex values.
pub fn qq_from_values(values: &[Complex64]) -> Result<(QQData, QQData)> {
    if values.len() < 10 {
        return Err(Error::Input(format!("need at least 10 coefficients, got {}", values.len())));
    }
    Ok((
        qq(values.iter().map(|v| v.re).collect(), Component::Real),
        qq(values.iter().map(|v| v.im).collect(), Component::Imaginary),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub normalized_error: Array2<f64>,
    pub frobenius_ratio: f64,
    pub eigen_spectra: Vec<(String, Vec<f64>)>,
}

pub fn risk_report(
    est: &HermitianCovariance,
    raw: &HermitianCovariance,
    truth: &TheoreticalCovariance,
) -> Result<RiskReport> {
    let n = truth.n();
    for m in [est.entries(), raw.entries()] {
        if m.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: (n, n),
                got: m.shape(),
            });
        }
    }
    let t = &truth.entries;
    let tmax = t.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let floor = 1e-12 * tmax;
    let normalized_error = Array2::from_shape_fn((n, n), |(i, j)| {
        let scale = t[(i, j)].norm().max(floor);
        let err = (est.entries()[(i, j)] - t[(i, j)]).norm();
        if scale > 0.0 {
            err / scale
        } else if err == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    });
    let num = (est.entries() - t).norm();
    let den = (raw.entries() - t).norm();
    let frobenius_ratio = if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let truth_eig = HermitianCovariance::from_matrix(t.clone())?;
    Ok(RiskReport {
        normalized_error,
        frobenius_ratio,
        eigen_spectra: vec![
            ("est".into(), est.eigenvalues().to_vec()),
            ("raw".into(), raw.eigenvalues().to_vec()),
            ("truth".into(), truth_eig.eigenvalues().to_vec()),
        ],
    })
}

/// Frobenius norm of a complex matrix difference; convenience for callers without nalgebra.
pub fn frobenius_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceProbe {
    pub var_eb: f64,
    pub var_raw: f64,
    /// Monte Carlo standard error of `var_raw`.
    pub se_raw: f64,
    pub tau: isize,
    pub time: usize,
}

/// Seed of replicate `rep` derived from a base seed.
pub fn replicate_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(rep as u64)
}

fn complex_variance(v: &[Complex64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean: Complex64 = v.iter().sum::<Complex64>() / n;
    let d: Vec<f64> = v.iter().map(|x| (x - mean).norm_sqr()).collect();
    let var = d.iter().sum::<f64>() / (n - 1.0);
    let m4 = d.iter().map(|x| (x - var).powi(2)).sum::<f64>() / (n - 1.0);
    (var, (m4 / n).sqrt())
}

/// Monte Carlo variance of the shrunk and raw moment estimates at lag `tau`, time `time`,
/// under unit white noise.
pub fn variance_reduction_probe_at(
    n: usize,
    reps: usize,
    seed: u64,
    tau: isize,
    time: usize,
    opts: &PipelineOptions,
) -> Result<VarianceProbe> {
    if reps < 100 {
        return Err(Error::Parameter(format!("reps must be at least 100, got {reps}")));
    }
    if time >= n || tau.unsigned_abs() > time || tau.unsigned_abs() >= n {
        return Err(Error::Parameter("probe point outside the moment support".into()));
    }
    let pairs: Vec<(Complex64, Complex64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let x = Preset::WhiteNoise.generate(n, replicate_seed(seed, rep))?;
            let s = shrink(&x, opts)?;
            let z = analytic_signal(&demean(&x));
            let zs = z.samples();
            let raw = zs[time] * zs[(time as isize - tau) as usize].conj();
            Ok((s.moments_eb.get(tau, time as isize), raw))
        })
        .collect::<Result<_>>()?;
    let eb: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let raw: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
    let (var_eb, _) = complex_variance(&eb);
    let (var_raw, se_raw) = complex_variance(&raw);
    Ok(VarianceProbe {
        var_eb,
        var_raw,
        se_raw,
        tau,
        time,
    })
}

/// `(var_eb, var_raw)` at lag 3 and the middle of the record.
pub fn variance_reduction_probe(n: usize, reps: usize, seed: u64) -> Result<(f64, f64)> {
    let p = variance_reduction_probe_at(n, reps, seed, 3, n / 2, &PipelineOptions::default())?;
    Ok((p.var_eb, p.var_raw))
}

/// Frobenius ratio of the corrected shrinkage covariance against the raw estimate, for
/// `reps` replicates of a preset. Returns `(replicate seed, ratio)` pairs.
pub fn risk_ratios(preset: Preset, n: usize, reps: usize, seed: u64, opts: &PipelineOptions) -> Result<Vec<(u64, f64)>> {
    if reps == 0 {
        return Err(Error::Parameter("reps must be positive".into()));
    }
    let truth = analytic_covariance(&preset.covariance(n));
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let s = replicate_seed(seed, rep);
            let a = analyze(&preset.generate(n, s)?, opts)?;
            let raw = assemble(&a.shrunk.moments)?;
            let num = frobenius_distance(a.cov.entries(), &truth.entries);
            let den = frobenius_distance(raw.entries(), &truth.entries);
            Ok((s, num / den))
        })
        .collect()
}
