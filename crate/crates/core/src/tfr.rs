//! Bilinear time-frequency representations built from lag-time moments.

use std::str::FromStr;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::ambiguity::{AmbiguityGrid, LagTimeMoments};
use crate::error::{Error, Result};
use crate::signal::AnalyticSeries;

/// Time smoothing `omega_tau(t)` applied along global time before the lag transform.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeKernel {
    Delta,
    /// Centred weights over time offsets, rescaled to sum to one.
    Window { name: String, weights: Vec<f64> },
}

impl TimeKernel {
    pub fn name(&self) -> String {
        match self {
            TimeKernel::Delta => "delta".into(),
            TimeKernel::Window { name, .. } => name.clone(),
        }
    }

    fn offsets(&self) -> Vec<(isize, f64)> {
        match self {
            TimeKernel::Delta => vec![(0, 1.0)],
            TimeKernel::Window { weights, .. } => {
                let total: f64 = weights.iter().sum();
                let half = (weights.len() / 2) as isize;
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (i as isize - half, w / total))
                    .collect()
            }
        }
    }
}

impl FromStr for TimeKernel {
    type Err = Error;

    /// `delta`, `hann:<len>`, `gaussian:<len>` or `hermite:<len>:<order>`; the Hermite
    /// kernel averages the squared windows of orders `0..=order`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, what: &str| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parameter(format!("kernel '{s}' is missing {what}")))?
                .parse()
                .map_err(|_| Error::Parameter(format!("kernel '{s}': bad {what}")))
        };
        let weights = match parts[0] {
            "delta" if parts.len() == 1 => return Ok(TimeKernel::Delta),
            "hann" | "gaussian" => {
                let kind: WindowKind = parts[0].parse()?;
                window_bank(kind, 0, num(1, "length")?)?.remove(0)
            }
            "hermite" => {
                let bank = window_bank(WindowKind::Hermite, num(2, "order")?, num(1, "length")?)?;
                let len = bank[0].len();
                (0..len)
                    .map(|i| bank.iter().map(|w| w[i] * w[i]).sum::<f64>())
                    .collect()
            }
            _ => return Err(Error::Parameter(format!("unknown kernel '{s}'"))),
        };
        Ok(TimeKernel::Window {
            name: s.to_string(),
            weights,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TFRGrid {
    /// Shape `(N, 2N)`: time index `n`, frequency index `j + N` with `f_j = j / (2 N dt)`.
    pub values: Array2<Complex64>,
    pub alpha: f64,
    pub kernel: String,
    pub dt: f64,
}

impl TFRGrid {
    /// `10 log10 |S|`, with zeros mapped to `-inf`.
    pub fn magnitude_db(&self) -> Array2<f64> {
        self.values.mapv(|v| 10.0 * v.norm().log10())
    }
}

fn interpolated(m: &LagTimeMoments, tau: isize, pos: f64) -> Complex64 {
    let lo = pos.floor();
    let frac = pos - lo;
    let lo = lo as isize;
    if frac == 0.0 {
        return m.get(tau, lo);
    }
    m.get(tau, lo) * (1.0 - frac) + m.get(tau, lo + 1) * frac
}

pub fn bilinear(m: &LagTimeMoments, alpha: f64, kernel: &TimeKernel) -> Result<TFRGrid> {
    if !(-0.5..=0.5).contains(&alpha) {
        return Err(Error::Parameter(format!("alpha must lie in [-1/2, 1/2], got {alpha}")));
    }
    let n = m.n();
    let dt = m.dt();
    let len = 2 * n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let offsets = kernel.offsets();
    let mut values = Array2::<Complex64>::zeros((n, len));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(t, mut out)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for tau in -(n as isize - 1)..n as isize {
                let shift = (0.5 - alpha) * tau as f64;
                let v: Complex64 = offsets
                    .iter()
                    .map(|&(d, w)| interpolated(m, tau, (t as isize + d) as f64 + shift) * w)
                    .sum();
                buf[tau.rem_euclid(len as isize) as usize] = v;
            }
            fft.process(&mut buf);
            for (c, o) in out.iter_mut().enumerate() {
                *o = buf[(c + n) % len] * dt;
            }
        });
    Ok(TFRGrid {
        values,
        alpha,
        kernel: kernel.name(),
        dt,
    })
}

pub fn spectrogram(z: &AnalyticSeries, window: &[f64]) -> Result<TFRGrid> {
    let energy: f64 = window.iter().map(|w| w * w).sum();
    if window.is_empty() || energy == 0.0 {
        return Err(Error::Parameter("empty window".into()));
    }
    let n = z.n();
    if window.len() > n {
        return Err(Error::Parameter("window longer than the signal".into()));
    }
    let h: Vec<f64> = window.iter().map(|w| w / energy.sqrt()).collect();
    let half = (h.len() / 2) as isize;
    let dt = z.dt();
    let len = 2 * n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let s = z.samples();
    let mut values = Array2::<Complex64>::zeros((n, len));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(t, mut out)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            for (i, w) in h.iter().enumerate() {
                let idx = t as isize + i as isize - half;
                if (0..n as isize).contains(&idx) {
                    buf[idx as usize] = s[idx as usize] * *w;
                }
            }
            fft.process(&mut buf);
            for (c, o) in out.iter_mut().enumerate() {
                *o = Complex64::new(buf[(c + n) % len].norm_sqr() * dt, 0.0);
            }
        });
    Ok(TFRGrid {
        values,
        alpha: 0.5,
        kernel: "spectrogram".into(),
        dt,
    })
}

/// `S(nu_k, f_j) = dt * sum_tau A_tau(nu_k) exp(-2 pi i f_j tau dt)`, rows indexed by `k + N`.
pub fn dual_frequency(a: &AmbiguityGrid) -> Array2<Complex64> {
    let n = a.n();
    let len = 2 * n;
    let dt = a.dt();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut out = Array2::<Complex64>::zeros((len, len));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut row)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); len];
            let col = a.entries().column(k);
            for (r, v) in col.iter().enumerate() {
                let tau = r as isize - (n as isize - 1);
                buf[tau.rem_euclid(len as isize) as usize] = *v;
            }
            fft.process(&mut buf);
            for (c, o) in row.iter_mut().enumerate() {
                *o = buf[(c + n) % len] * dt;
            }
        });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Gaussian,
    Hann,
    Hermite,
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(WindowKind::Gaussian),
            "hann" => Ok(WindowKind::Hann),
            "hermite" => Ok(WindowKind::Hermite),
            other => Err(Error::Parameter(format!("unsupported window kind '{other}'"))),
        }
    }
}

fn unit_energy(mut w: Vec<f64>) -> Vec<f64> {
    let e = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= e);
    w
}

/// Unit-energy windows. Hermite returns orders `0..=order`; the other kinds return one window.
pub fn window_bank(kind: WindowKind, order: usize, length: usize) -> Result<Vec<Vec<f64>>> {
    if length < 2 {
        return Err(Error::Parameter("window length must be at least 2".into()));
    }
    let centre = (length as f64 - 1.0) / 2.0;
    // sample points span +/- 5 standard widths of the order-0 function, wider for high orders
    let span = 5.0f64.max((2.0 * order as f64 + 1.0).sqrt() + 3.0);
    let x: Vec<f64> = (0..length).map(|i| (i as f64 - centre) / centre * span).collect();
    let bank = match kind {
        WindowKind::Hann => vec![(0..length)
            .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (length as f64 - 1.0)).cos()))
            .collect()],
        WindowKind::Gaussian => vec![x.iter().map(|v| (-v * v / 2.0).exp()).collect()],
        WindowKind::Hermite => {
            // physicists' recurrence H_{r+1} = 2x H_r - 2r H_{r-1}
            let mut out = Vec::with_capacity(order + 1);
            let mut prev: Vec<f64> = vec![0.0; length];
            let mut cur: Vec<f64> = vec![1.0; length];
            for r in 0..=order {
                out.push(
                    cur.iter()
                        .zip(&x)
                        .map(|(h, v)| h * (-v * v / 2.0).exp())
                        .collect::<Vec<f64>>(),
                );
                let next: Vec<f64> = (0..length)
                    .map(|i| 2.0 * x[i] * cur[i] - 2.0 * r as f64 * prev[i])
                    .collect();
                prev = cur;
                cur = next;
            }
            out
        }
    };
    Ok(bank.into_iter().map(unit_energy).collect())
}
