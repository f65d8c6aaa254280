//! End-to-end estimation: signal to shrunk moments, covariance and time-frequency surface.

use crate::ambiguity::{emaf, normalization, normalize, raw_moments, AmbiguityGrid, LagTimeMoments, NormalizationField};
use crate::covariance::{assemble, correct, invert_af, Correction, HermitianCovariance};
use crate::error::{Error, Result};
use crate::shrinkage::{apply_threshold, fit, threshold_field, FitOptions, MedianApprox, ShrinkageParams, ThresholdField};
use crate::signal::{analytic_signal, demean, AnalyticSeries, TimeSeries};
use crate::tfr::{bilinear, TFRGrid, TimeKernel};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub delta: f64,
    pub fit: FitOptions,
    pub median: MedianApprox,
    pub correction: Correction,
    pub alpha: f64,
    pub kernel: TimeKernel,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            delta: 0.5,
            fit: FitOptions::default(),
            median: MedianApprox::default(),
            correction: Correction::Clip,
            alpha: 0.5,
            kernel: TimeKernel::Delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOutcome {
    pub params: ShrinkageParams,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
    /// No positive magnitudes to fit; everything off the origin is zeroed.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
pub struct Shrunk {
    pub z: AnalyticSeries,
    pub moments: LagTimeMoments,
    pub emaf: AmbiguityGrid,
    pub field: NormalizationField,
    pub normalized: AmbiguityGrid,
    pub fit: FitOutcome,
    pub threshold: ThresholdField,
    pub af_eb: AmbiguityGrid,
    pub moments_eb: LagTimeMoments,
}

/// Runs the shrinkage stage. Non-convergence is reported in `fit.converged`, with the
/// best parameters found used downstream.
pub fn shrink(x: &TimeSeries, opts: &PipelineOptions) -> Result<Shrunk> {
    let z = analytic_signal(&demean(x));
    let moments = raw_moments(&z);
    let a = emaf(&moments);
    let field = normalization(z.n(), z.dt(), opts.delta)?;
    let normalized = normalize(&a, &field)?;
    let fit = match fit(&normalized, &opts.fit) {
        Ok(r) => FitOutcome {
            params: r.params,
            nll: r.nll,
            iterations: r.iterations,
            converged: true,
            degenerate: false,
        },
        Err(Error::NonConvergence { iterations, best, nll }) => FitOutcome {
            params: best,
            nll,
            iterations,
            converged: false,
            degenerate: false,
        },
        Err(Error::Input(_)) if normalized.entries().iter().all(|v| v.norm() == 0.0) => FitOutcome {
            params: ShrinkageParams {
                vbar: 0.0,
                rho: 0.0,
                sigma2: 0.0,
            },
            nll: 0.0,
            iterations: 0,
            converged: true,
            degenerate: true,
        },
        Err(e) => return Err(e),
    };
    let threshold = if fit.degenerate {
        let mut theta = ndarray::Array2::zeros(a.entries().dim());
        let (r0, c0) = a.origin();
        theta[[r0, c0]] = 1.0;
        ThresholdField {
            rho_post: ndarray::Array2::zeros(theta.dim()),
            theta,
        }
    } else {
        threshold_field(&fit.params, &normalized, opts.median)?
    };
    let af_eb = apply_threshold(&a, &threshold)?;
    let moments_eb = invert_af(&af_eb)?;
    Ok(Shrunk {
        z,
        moments,
        emaf: a,
        field,
        normalized,
        fit,
        threshold,
        af_eb,
        moments_eb,
    })
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub shrunk: Shrunk,
    pub cov_uncorrected: HermitianCovariance,
    pub cov: HermitianCovariance,
    pub tfr: TFRGrid,
}

pub fn analyze(x: &TimeSeries, opts: &PipelineOptions) -> Result<Analysis> {
    let shrunk = shrink(x, opts)?;
    let cov_uncorrected = assemble(&shrunk.moments_eb)?;
    let cov = correct(&cov_uncorrected, opts.correction);
    let tfr = bilinear(&shrunk.moments_eb, opts.alpha, &opts.kernel)?;
    Ok(Analysis {
        shrunk,
        cov_uncorrected,
        cov,
        tfr,
    })
}
