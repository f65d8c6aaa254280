//! Sampled real signals and their discrete analytic extension.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Real samples `x_n` taken at `t_n = n * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidLength(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite sample".into()));
        }
        Ok(Self { samples, dt })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

/// Complex analytic samples `z_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSeries {
    samples: Vec<Complex64>,
    dt: f64,
}

impl AnalyticSeries {
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidLength(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { samples, dt })
    }

    /// Wraps a real series without any Hilbert transform.
    pub fn from_real(x: &TimeSeries) -> Self {
        Self {
            samples: x.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            dt: x.dt,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }
}

pub fn demean(x: &TimeSeries) -> TimeSeries {
    let mean = x.samples.iter().sum::<f64>() / x.n() as f64;
    TimeSeries {
        samples: x.samples.iter().map(|v| v - mean).collect(),
        dt: x.dt,
    }
}

/// Per-bin weights of the discrete analytic-signal operator.
pub fn analytic_weights(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n];
    h[0] = 1.0;
    let half = n / 2;
    if n.is_multiple_of(2) {
        h[1..half].iter_mut().for_each(|w| *w = 2.0);
        h[half] = 1.0;
    } else {
        h[1..=half].iter_mut().for_each(|w| *w = 2.0);
    }
    h
}

/// Discrete analytic signal of a complex buffer, in place.
pub fn analytic_in_place(buf: &mut [Complex64], planner: &mut FftPlanner<f64>) {
    let n = buf.len();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fwd.process(buf);
    let scale = 1.0 / n as f64;
    for (v, w) in buf.iter_mut().zip(analytic_weights(n)) {
        *v *= w * scale;
    }
    inv.process(buf);
}

pub fn analytic_signal(x: &TimeSeries) -> AnalyticSeries {
    let mut buf: Vec<Complex64> = x.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    analytic_in_place(&mut buf, &mut planner);
    AnalyticSeries {
        samples: buf,
        dt: x.dt,
    }
}
