//! Browser bindings: coefficient curves over α, Monte Carlo heat content
//! against partial sums, and a stable increment histogram against the
//! exact density. Every export returns a JSON string.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use heatlab::feynman_kac::{estimate_batch, Summand};
use heatlab::quadrature::{integrate, Tolerance};
use heatlab::stable_sampler::{sample_increment, RngStream};
use heatlab::{CoefficientEngine, Component, GaussianMixturePotential, McConfig, SpectralGrid};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Result<T> = std::result::Result<T, String>;

/// `[w0, c0, s0, w1, c1, s1, ...]` as a one-dimensional mixture.
fn potential(params: &[f64]) -> Result<GaussianMixturePotential> {
    if params.is_empty() || !params.len().is_multiple_of(3) {
        return Err("potential needs (weight, center, sharpness) triples".into());
    }
    let comps = params.chunks(3).map(|c| Component::new(c[0], vec![c[1]], c[2])).collect();
    GaussianMixturePotential::new(1, comps).map_err(|e| e.to_string())
}

fn grid() -> SpectralGrid {
    SpectralGrid::default_for(1).expect("valid default grid")
}

fn json<T: Serialize>(r: Result<T>) -> std::result::Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[derive(Debug, Serialize)]
pub struct CoefficientCurves {
    pub alpha: Vec<f64>,
    /// `c[ℓ-1][i]` is `C_ℓ` at `alpha[i]`.
    pub c: Vec<Vec<f64>>,
}

pub fn coefficient_curves_native(params: &[f64], alpha_min: f64, alpha_max: f64, points: usize) -> Result<CoefficientCurves> {
    let v = potential(params)?;
    if !(0.0 < alpha_min && alpha_min <= alpha_max && alpha_max <= 2.0) || points < 2 {
        return Err("need 0 < alpha_min <= alpha_max <= 2 and at least 2 points".into());
    }
    let g = grid();
    let alpha: Vec<f64> = (0..points)
        .map(|i| alpha_min + (alpha_max - alpha_min) * i as f64 / (points - 1) as f64)
        .collect();
    let mut c: Vec<Vec<f64>> = (0..5).map(|_| Vec::with_capacity(points)).collect();
    for &a in &alpha {
        let e = CoefficientEngine::new(&v, &g, a).map_err(|e| e.to_string())?;
        for (ell, row) in c.iter_mut().enumerate() {
            row.push(e.c_ell(ell as u32 + 1).map_err(|e| e.to_string())?);
        }
    }
    Ok(CoefficientCurves { alpha, c })
}

#[wasm_bindgen]
pub fn coefficient_curves(params: &[f64], alpha_min: f64, alpha_max: f64, points: usize) -> std::result::Result<String, JsValue> {
    json(coefficient_curves_native(params, alpha_min, alpha_max, points))
}

#[derive(Debug, Serialize)]
pub struct HeatContentCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// `partial[N-1][i]` is the order-`N` partial sum at `t[i]`.
    pub partial: Vec<Vec<f64>>,
}

pub fn heat_content_curve_native(params: &[f64], alpha: f64, t_max: f64, points: usize, n_paths: usize, seed: u64) -> Result<HeatContentCurve> {
    let v = potential(params)?;
    if !(t_max > 0.0) || points == 0 {
        return Err("need t_max > 0 and at least one point".into());
    }
    let t: Vec<f64> = (1..=points).map(|i| t_max * i as f64 / points as f64).collect();
    // browsers get one thread
    let cfg = McConfig::for_potential(&v, n_paths, 32, seed, 1).map_err(|e| e.to_string())?;
    let batch = estimate_batch(std::slice::from_ref(&v), alpha, &t, &[Summand::HeatContent], &cfg).map_err(|e| e.to_string())?;
    let engine = CoefficientEngine::new(&v, &grid(), alpha).map_err(|e| e.to_string())?;
    let partial = (1..=3)
        .map(|n| t.iter().map(|&s| engine.partial_sum(n, s)).collect::<heatlab::Result<Vec<_>>>())
        .collect::<heatlab::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    let est: Vec<_> = (0..t.len()).map(|i| batch.get(0, i, Summand::HeatContent).clone()).collect();
    Ok(HeatContentCurve {
        mean: est.iter().map(|e| e.mean).collect(),
        se: est.iter().map(|e| e.standard_error).collect(),
        t,
        partial,
    })
}

#[wasm_bindgen]
pub fn heat_content_curve(params: &[f64], alpha: f64, t_max: f64, points: usize, n_paths: usize, seed: u64) -> std::result::Result<String, JsValue> {
    json(heat_content_curve_native(params, alpha, t_max, points, n_paths, seed))
}

#[derive(Debug, Serialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub empirical: Vec<f64>,
    pub exact: Vec<f64>,
    pub outside: usize,
}

/// One-dimensional density of `X_1`, `(1/π)∫_0^∞ cos(ξx) e^{-ξ^α} dξ`.
pub fn stable_density(alpha: f64, x: f64) -> Result<f64> {
    let cutoff = 40f64.powf(1.0 / alpha);
    let tol = Tolerance {
        initial_pieces: 64,
        ..Tolerance::relative(1e-9)
    };
    integrate(|xi| (xi * x).cos() * (-xi.powf(alpha)).exp(), 0.0, cutoff, tol)
        .map(|r| r.value / std::f64::consts::PI)
        .map_err(|e| e.to_string())
}

pub fn increment_histogram_native(alpha: f64, samples: usize, bins: usize, half_width: f64, seed: u64) -> Result<Histogram> {
    if bins == 0 || !(half_width > 0.0) {
        return Err("need bins > 0 and half_width > 0".into());
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let h = 2.0 * half_width / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0;
    for _ in 0..samples {
        let x = sample_increment(alpha, 1, 1.0, &mut rng).map_err(|e| e.to_string())?[0];
        let j = ((x + half_width) / h).floor();
        if j >= 0.0 && (j as usize) < bins {
            counts[j as usize] += 1;
        } else {
            outside += 1;
        }
    }
    let centers: Vec<f64> = (0..bins).map(|j| -half_width + (j as f64 + 0.5) * h).collect();
    let exact = centers.iter().map(|&x| stable_density(alpha, x)).collect::<Result<Vec<_>>>()?;
    Ok(Histogram {
        empirical: counts.iter().map(|&c| c as f64 / (samples as f64 * h)).collect(),
        centers,
        exact,
        outside,
    })
}

#[wasm_bindgen]
pub fn increment_histogram(alpha: f64, samples: usize, bins: usize, half_width: f64, seed: u64) -> std::result::Result<String, JsValue> {
    json(increment_histogram_native(alpha, samples, bins, half_width, seed))
}
