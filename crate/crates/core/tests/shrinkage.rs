mod common;

use std::f64::consts::PI;

use ambi_core::ambiguity::{emaf, normalization, normalize, raw_moments, AmbiguityGrid};
use ambi_core::covariance::invert_af;
use ambi_core::procgen::Preset;
use ambi_core::shrinkage::{
    apply_threshold, convolve_moments, equivalent_kernel, fit, fit_magnitudes, indicator_kernel, marginal_nll,
    posterior_median, posterior_rho, theta_value, threshold_field, FitDomain, FitOptions, MedianApprox,
    ShrinkageParams, ThresholdField,
};
use ambi_core::signal::{analytic_signal, demean};
use ambi_core::{pipeline, Complex64, PipelineOptions};
use common::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

/// Magnitudes from the two-component mixture: |A|^2 is exponential with mean V̄ or V̄ + σ².
fn mixture_draws(r: &mut ChaCha8Rng, p: &ShrinkageParams, count: usize) -> Vec<f64> {
    (0..count)
        .map(|_| {
            let mean = if r.random::<f64>() < p.rho { p.vbar + p.sigma2 } else { p.vbar };
            let e: f64 = Exp1.sample(r);
            (mean * e).sqrt()
        })
        .collect()
}

#[test]
fn fit_recovers_mixture() {
    let truth = ShrinkageParams::new(1.0, 0.05, 50.0).unwrap();
    let q = mixture_draws(&mut rng(1), &truth, 200_000);
    let r = fit_magnitudes(&q, &FitOptions::default()).unwrap();
    assert!((0.03..=0.07).contains(&r.params.rho), "{:?}", r.params);
    assert!((0.9..=1.1).contains(&r.params.vbar), "{:?}", r.params);
}

#[test]
fn fit_on_pure_noise() {
    let truth = ShrinkageParams::new(1.0, 0.5, 1.0).unwrap();
    let null = ShrinkageParams { rho: 0.0, ..truth };
    let q = mixture_draws(&mut rng(2), &null, 100_000);
    let r = fit_magnitudes(&q, &FitOptions::default()).unwrap();
    let mean_q2 = q.iter().map(|v| v * v).sum::<f64>() / q.len() as f64;
    assert!(r.params.rho < 1e-3, "{:?}", r.params);
    assert!((r.params.vbar / mean_q2 - 1.0).abs() < 0.05, "{:?} vs {mean_q2}", r.params);
}

/// The per-draw negative log density has mean equal to the entropy of the mixture; the
/// oracle computes that entropy by quadrature and its spread by the sample variance.
#[test]
fn nll_matches_entropy_and_prefers_truth() {
    let truth = ShrinkageParams::new(1.0, 0.05, 50.0).unwrap();
    let count = 10_000;
    let q = mixture_draws(&mut rng(3), &truth, count);
    let nll = marginal_nll(&truth, &q).unwrap();
    let density = |x: f64| {
        let w = truth.vbar + truth.sigma2;
        2.0 * (1.0 - truth.rho) / truth.vbar * x * (-x * x / truth.vbar).exp()
            + 2.0 * truth.rho / w * x * (-x * x / w).exp()
    };
    let entropy = integrate(&|x| {
        let f = density(x);
        if f > 0.0 { -f * f.ln() } else { 0.0 }
    }, 0.0, 60.0, 1e-12);
    let per: Vec<f64> = q.iter().map(|&x| -density(x).ln()).collect();
    let mean = per.iter().sum::<f64>() / count as f64;
    let var = per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0);
    let sd_total = (var * count as f64).sqrt();
    assert!((nll - per.iter().sum::<f64>()).abs() < 1e-6 * nll.abs());
    assert!((nll - count as f64 * entropy).abs() < 3.0 * sd_total, "{nll} vs {}", count as f64 * entropy);
    let wrong = ShrinkageParams::new(1.0, 0.5, 50.0).unwrap();
    assert!(marginal_nll(&wrong, &q).unwrap() > nll);
}

#[test]
fn nll_rho_limit_is_rayleigh() {
    let q = mixture_draws(&mut rng(4), &ShrinkageParams { vbar: 2.0, rho: 0.0, sigma2: 1.0 }, 500);
    let tiny = ShrinkageParams::new(2.0, 1e-14, 3.0).unwrap();
    let rayleigh: f64 = q.iter().map(|x| -((2.0 * x / 2.0).ln() - x * x / 2.0)).sum();
    assert!((marginal_nll(&tiny, &q).unwrap() - rayleigh).abs() < 1e-9 * rayleigh.abs());
    assert_eq!(marginal_nll(&tiny, &[0.0]).unwrap(), f64::INFINITY);
    assert!(marginal_nll(&tiny, &[f64::NAN]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nll_permutation_invariant(seed in any::<u64>(), rho in 0.001f64..0.9, s2 in 0.1f64..100.0) {
        let p = ShrinkageParams::new(1.3, rho, s2).unwrap();
        let mut r = rng(seed);
        let q = mixture_draws(&mut r, &p, 300);
        let mut shuffled = q.clone();
        shuffled.shuffle(&mut r);
        let a = marginal_nll(&p, &q).unwrap();
        let b = marginal_nll(&p, &shuffled).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn theta_bounded(q in 0.0f64..50.0, rho in 0.001f64..0.99, s2 in 0.01f64..1e3, vbar in 0.01f64..10.0) {
        let p = ShrinkageParams::new(vbar, rho, s2).unwrap();
        for approx in [MedianApprox::RiceCentred, MedianApprox::LambdaQ] {
            let t = theta_value(&p, q, approx);
            prop_assert!((0.0..=1.0).contains(&t));
        }
        let rp = posterior_rho(&p, q);
        prop_assert!((0.0..=1.0).contains(&rp));
    }
}

#[test]
fn fit_is_scale_equivariant() {
    let truth = ShrinkageParams::new(1.0, 0.05, 50.0).unwrap();
    let q = mixture_draws(&mut rng(5), &truth, 20_000);
    let base = fit_magnitudes(&q, &FitOptions::default()).unwrap().params;
    for cscale in [0.1, 3.0, 40.0] {
        let qs: Vec<f64> = q.iter().map(|v| v * cscale).collect();
        let p = fit_magnitudes(&qs, &FitOptions::default()).unwrap().params;
        let c2 = cscale * cscale;
        assert!((p.vbar / (c2 * base.vbar) - 1.0).abs() < 1e-4, "{p:?} {base:?}");
        assert!((p.sigma2 / (c2 * base.sigma2) - 1.0).abs() < 1e-3, "{p:?} {base:?}");
        assert!((p.rho / base.rho - 1.0).abs() < 1e-3, "{p:?} {base:?}");
        for &x in q.iter().take(200) {
            let a = theta_value(&base, x, MedianApprox::default());
            let b = theta_value(&p, x * cscale, MedianApprox::default());
            assert!((a - b).abs() < 1e-3, "q={x}: {a} vs {b}");
        }
    }
}

/// Independent evaluation of the posterior probability, written as a single exponent difference.
#[test]
fn posterior_rho_high_precision() {
    let p = ShrinkageParams::new(1.0, 0.1, 100.0).unwrap();
    let q: f64 = 10.0;
    // rho_post = 1 / (1 + (1-rho)/rho * (V+s2)/V * exp(-q^2/V + q^2/(V+s2)))
    let expo = -q * q / 1.0 + q * q / 101.0;
    let ratio = 0.9 / 0.1 * 101.0 * expo.exp();
    let expect = 1.0 / (1.0 + ratio);
    assert!((posterior_rho(&p, q) - expect).abs() < 1e-12);
    // the log ratio is about -92, so the exact value rounds to 1
    assert_eq!(posterior_rho(&p, q), 1.0);
    for q in [0.5f64, 2.0, 3.0, 4.5] {
        let ratio = 9.0 * 101.0 * (-q * q + q * q / 101.0).exp();
        assert!((posterior_rho(&p, q) - 1.0 / (1.0 + ratio)).abs() < 1e-12);
    }
    let p2 = ShrinkageParams::new(2.0, 0.3, 5.0).unwrap();
    let at0 = posterior_rho(&p2, 0.0);
    let expect0 = (0.3 / 7.0) / (0.3 / 7.0 + 0.7 / 2.0);
    assert!((at0 - expect0).abs() < 1e-15);
    assert!((posterior_rho(&p2, 1e3) - 1.0).abs() < 1e-15);
}

#[test]
fn theta_against_exact_posterior_median() {
    let p = ShrinkageParams::new(1.0, 0.1, 100.0).unwrap();
    let exact = exact_posterior_median(1.0, 0.1, 100.0, 10.0);
    let theta = theta_value(&p, 10.0, MedianApprox::default());
    assert!((theta * 10.0 / exact - 1.0).abs() < 0.02, "{} vs {exact}", theta * 10.0);
}

#[test]
fn rice_oracle_sanity() {
    // unit mass and the Rayleigh special case
    let total = integrate(&|x| rice_pdf(x, 3.0, 0.7), 0.0, 20.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-9);
    let s: f64 = 0.8;
    let rayleigh_cdf = integrate(&|x| rice_pdf(x, 0.0, s), 0.0, 1.3, 1e-12);
    assert!((rayleigh_cdf - (1.0 - (-1.3f64 * 1.3 / (2.0 * s * s)).exp())).abs() < 1e-10);
}

#[test]
fn threshold_limits() {
    let mut r = rng(6);
    let grid = AmbiguityGrid::from_entries(
        Array2::from_shape_fn((15, 16), |_| c(r.random::<f64>() * 3.0, r.random::<f64>() * 3.0)),
        1.0,
    )
    .unwrap();
    let f = normalization(8, 1.0, 0.5).unwrap();
    let a = normalize(&grid, &f).unwrap();
    // a vanishing mixture weight thresholds everything off the origin
    let p = ShrinkageParams::new(1.0, 1e-300, 10.0).unwrap();
    let t = threshold_field(&p, &a, MedianApprox::default()).unwrap();
    let (r0, c0) = a.origin();
    for ((i, j), v) in t.theta.indexed_iter() {
        assert_eq!(*v, if (i, j) == (r0, c0) { 1.0 } else { 0.0 });
    }
    assert!(threshold_field(&p, &grid, MedianApprox::default()).is_err());
    let half = ShrinkageParams::new(2.0, 0.3, 2.0).unwrap();
    assert_eq!(half.lambda(), 0.5);
    assert!(posterior_median(&half, 50.0, MedianApprox::LambdaQ) <= 25.0 + 1e-12);
}

#[test]
fn apply_threshold_preserves_phase() {
    let mut r = rng(7);
    let a = random_grid(&mut r, 8, 1.0);
    let theta = Array2::from_shape_fn((15, 16), |_| r.random::<f64>());
    let t = ThresholdField {
        rho_post: Array2::zeros((15, 16)),
        theta: theta.clone(),
    };
    let out = apply_threshold(&a, &t).unwrap();
    for ((x, y), th) in a.entries().iter().zip(out.entries()).zip(&theta) {
        if *th > 0.0 {
            assert!((x.arg() - y.arg()).abs() < 1e-12);
        }
    }
    let ones = ThresholdField {
        rho_post: Array2::zeros((15, 16)),
        theta: Array2::ones((15, 16)),
    };
    assert_eq!(apply_threshold(&a, &ones).unwrap(), a);
    let bad = ThresholdField {
        rho_post: Array2::zeros((3, 4)),
        theta: Array2::ones((3, 4)),
    };
    assert!(apply_threshold(&a, &bad).is_err());
}

fn random_field(r: &mut ChaCha8Rng, n: usize) -> ThresholdField {
    let mut theta = Array2::from_shape_fn((2 * n - 1, 2 * n), |_| {
        if r.random::<f64>() < 0.6 { 0.0 } else { r.random::<f64>() }
    });
    theta[[n - 1, n]] = 1.0;
    ThresholdField {
        rho_post: Array2::zeros(theta.dim()),
        theta,
    }
}

#[test]
fn kernel_path_matches_threshold_path() {
    let mut r = rng(8);
    for (n, dt) in [(8usize, 1.0), (21, 0.1), (32, 2.0)] {
        let x = normals(&mut r, n);
        let z = analytic_signal(&demean(&ambi_core::TimeSeries::new(x, dt).unwrap()));
        let m = raw_moments(&z);
        let t = random_field(&mut r, n);
        let direct = invert_af(&apply_threshold(&emaf(&m), &t).unwrap()).unwrap();
        let conv = convolve_moments(&m, &equivalent_kernel(&t)).unwrap();
        assert!(max_abs_diff(direct.entries(), conv.entries()) < 1e-8);
    }
}

#[test]
fn equivalent_kernel_identity_and_indicator() {
    let n = 10;
    let len = 2 * n;
    let ones = ThresholdField {
        rho_post: Array2::zeros((2 * n - 1, len)),
        theta: Array2::ones((2 * n - 1, len)),
    };
    let k = equivalent_kernel(&ones);
    for row in k.rows() {
        for (m, v) in row.iter().enumerate() {
            let expect = if m == 0 { 1.0 } else { 0.0 };
            assert!((v - c(expect, 0.0)).norm() < 1e-12);
        }
    }
    let k0 = 3;
    let theta = Array2::from_shape_fn((2 * n - 1, len), |(_, col)| {
        if (col as isize - n as isize).unsigned_abs() <= k0 { 1.0 } else { 0.0 }
    });
    let ind = equivalent_kernel(&ThresholdField {
        rho_post: Array2::zeros(theta.dim()),
        theta,
    });
    for m in 0..len {
        // closed form sin((2K0+1) pi m / 2N) / (2N sin(pi m / 2N))
        let x = PI * m as f64 / len as f64;
        let expect = if m == 0 {
            (2 * k0 + 1) as f64 / len as f64
        } else {
            ((2 * k0 + 1) as f64 * x).sin() / (len as f64 * x.sin())
        };
        assert!((ind[[4, m]] - c(expect, 0.0)).norm() < 1e-12);
        assert!((indicator_kernel(n, k0, m) - c(expect, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn fit_needs_normalized_grid_and_lattice_excludes_origin() {
    let mut r = rng(9);
    let a = random_grid(&mut r, 16, 1.0);
    assert!(fit(&a, &FitOptions::default()).is_err());
    let na = normalize(&a, &normalization(16, 1.0, 0.5).unwrap()).unwrap();
    let full = FitOptions {
        domain: FitDomain::Full,
        ..FitOptions::default()
    };
    assert!(fit(&na, &full).is_ok());
    assert!(fit(&na, &FitOptions::default()).is_ok());
}

/// Fraction of off-origin coefficients kept under white noise, averaged over seeds.
#[test]
fn white_noise_retained_fraction_is_small() {
    let opts = PipelineOptions::default();
    for n in [64usize, 128, 256] {
        let fractions: Vec<f64> = (0..10u64)
            .map(|seed| {
                let x = Preset::WhiteNoise.generate(n, 4000 + seed).unwrap();
                pipeline::shrink(&x, &opts).unwrap().threshold.retained_fraction()
            })
            .collect();
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!(mean < 0.01, "N={n}: mean retained {mean}, draws {fractions:?}");
    }
}

#[test]
fn degenerate_zero_signal() {
    let x = ambi_core::TimeSeries::new(vec![0.0; 32], 1.0).unwrap();
    let s = pipeline::shrink(&x, &PipelineOptions::default()).unwrap();
    assert!(s.fit.degenerate);
    assert!(s.af_eb.entries().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    assert!(s.moments_eb.entries().iter().all(|v| v.norm() == 0.0));
}
