//! Feynman-Kac Monte Carlo for the heat content
//! `Q(t) = ∫ E^x[e^{-∫_0^t V(X_s) ds} - 1] dx`, with the starting point drawn
//! from an isotropic Gaussian proposal and one stable path per draw.
//!
//! Paths are generated in fixed-size chunks; chunk `c` uses the stream
//! `(seed, c)` and chunk results are merged in index order, so estimates are
//! bit-identical for any thread count.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::potentials::GaussianMixturePotential;
use crate::stable_sampler::{unit_increments, RngStream, StablePath, Welford};

/// Paths per chunk (and per RNG stream).
pub const CHUNK_SIZE: usize = 1024;

pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Proposal {
    pub center: Vec<f64>,
    pub sigma: f64,
}

impl Proposal {
    /// Centered at the `|c_i|`-weighted mean of the centers, with
    /// `σ_q = 3 (max width + max center spread)`.
    pub fn default_for(v: &GaussianMixturePotential) -> Self {
        let d = v.dimension();
        let comps = v.components();
        let total: f64 = comps.iter().map(|c| c.weight.abs()).sum();
        let mut center = vec![0.0; d];
        for c in comps {
            let w = if total > 0.0 { c.weight.abs() / total } else { 1.0 / comps.len() as f64 };
            for (m, x) in center.iter_mut().zip(&c.center) {
                *m += w * x;
            }
        }
        let spread = comps
            .iter()
            .map(|c| crate::potentials::dist2(&c.center, &center).sqrt())
            .fold(0.0, f64::max);
        Proposal {
            center,
            sigma: 3.0 * (v.max_width() + spread),
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.center.len() as f64;
        let r2 = crate::potentials::dist2(x, &self.center);
        (2.0 * PI * self.sigma * self.sigma).powf(-d / 2.0) * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// `1 / q(x)`, computed without underflow in the tails.
    fn inverse_density(&self, x: &[f64]) -> f64 {
        let d = self.center.len() as f64;
        let s2 = self.sigma * self.sigma;
        (2.0 * PI * s2).powf(d / 2.0) * (crate::potentials::dist2(x, &self.center) / (2.0 * s2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub m_steps: usize,
    pub proposal: Proposal,
    pub seed: u64,
    pub threads: usize,
}

impl McConfig {
    /// Default proposal for `v`, validated.
    pub fn for_potential(v: &GaussianMixturePotential, n_paths: usize, m_steps: usize, seed: u64, threads: usize) -> Result<Self> {
        let cfg = McConfig {
            n_paths,
            m_steps,
            proposal: Proposal::default_for(v),
            seed,
            threads,
        };
        cfg.validate(v.dimension())?;
        Ok(cfg)
    }

    pub fn validate(&self, dimension: usize) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::InvalidMcConfig(format!("n_paths must be >= {MIN_PATHS}, got {}", self.n_paths)));
        }
        if self.m_steps == 0 {
            return Err(Error::InvalidMcConfig("m_steps must be positive".into()));
        }
        if !(self.proposal.sigma > 0.0 && self.proposal.sigma.is_finite()) {
            return Err(Error::InvalidMcConfig(format!(
                "degenerate proposal: sigma must be positive and finite, got {}",
                self.proposal.sigma
            )));
        }
        if self.proposal.center.len() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                got: self.proposal.center.len(),
            });
        }
        if self.proposal.center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMcConfig("proposal center must be finite".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidMcConfig("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    pub config_digest: String,
}

/// Transformation applied to `A = ∫_0^t V(X_s) ds` before weighting by `1/q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summand {
    /// `e^{-A} - 1`: estimates `Q(t)`.
    HeatContent,
    /// `(e^{-A} - 1 + A) / t²`: estimates `(Q(t) + t∫V) / t²`.
    FirstOrderResidual,
    /// `e^{-A} - 1 + A - A²/2`: estimates `Q(t) + t∫V - t² T_2(t)`, the
    /// remainder after the first two Dyson terms.
    DysonRemainder,
}

impl Summand {
    pub fn as_str(self) -> &'static str {
        match self {
            Summand::HeatContent => "heat_content",
            Summand::FirstOrderResidual => "first_order_residual",
            Summand::DysonRemainder => "dyson_remainder",
        }
    }

    fn apply(self, a: f64, t: f64) -> f64 {
        match self {
            Summand::HeatContent => (-a).exp_m1(),
            Summand::FirstOrderResidual => second_tail(a) / (t * t),
            Summand::DysonRemainder => third_tail(a),
        }
    }
}

/// `e^{-a} - 1 + a`.
fn second_tail(a: f64) -> f64 {
    if a.abs() < 1e-3 {
        let a2 = a * a;
        a2 * (0.5 - a / 6.0 + a2 / 24.0 - a2 * a / 120.0 + a2 * a2 / 720.0)
    } else {
        (-a).exp_m1() + a
    }
}

/// `e^{-a} - 1 + a - a²/2`.
fn third_tail(a: f64) -> f64 {
    if a.abs() < 1e-2 {
        let a3 = a * a * a;
        a3 * (-1.0 / 6.0 + a / 24.0 - a * a / 120.0 + a3 / 720.0 - a3 * a / 5040.0 + a3 * a * a / 40320.0)
    } else {
        (-a).exp_m1() + a - 0.5 * a * a
    }
}

/// Trapezoidal `Σ_j (Δt_j/2)(V(X_{t_j}) + V(X_{t_{j+1}}))` along the skeleton.
pub fn exponent_integral(path: &StablePath, v: &GaussianMixturePotential) -> Result<f64> {
    if path.dimension != v.dimension() {
        return Err(Error::DimensionMismatch {
            expected: v.dimension(),
            got: path.dimension,
        });
    }
    let values: Vec<f64> = path.positions.iter().map(|p| v.value(p)).collect();
    Ok(path
        .times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum())
}

/// Estimates for every `(potential, t, summand)` from one set of draws.
/// The skeleton on `[0, t]` is the unit skeleton scaled by `t^{1/α}`, so all
/// `t` share the same paths.
#[derive(Debug, Clone)]
pub struct McBatch {
    pub t_list: Vec<f64>,
    pub summands: Vec<Summand>,
    estimates: Vec<McEstimate>,
}

impl McBatch {
    pub fn get(&self, potential: usize, t_index: usize, summand: Summand) -> &McEstimate {
        let k = self.summands.iter().position(|s| *s == summand).expect("summand was requested");
        let nt = self.t_list.len();
        let ns = self.summands.len();
        &self.estimates[(potential * nt + t_index) * ns + k]
    }
}

fn digest(parts: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(parts).expect("serializable");
    let hash = Sha256::digest(&bytes);
    hex::encode(&hash[..8])
}

struct Job<'a> {
    potentials: &'a [GaussianMixturePotential],
    alpha: f64,
    t_list: &'a [f64],
    summands: &'a [Summand],
    cfg: &'a McConfig,
    d: usize,
}

impl Job<'_> {
    fn slots(&self) -> usize {
        self.potentials.len() * self.t_list.len() * self.summands.len()
    }

    fn run_chunk(&self, chunk: usize, mut sink: impl FnMut(usize, f64)) -> Result<()> {
        let cfg = self.cfg;
        let (d, m) = (self.d, cfg.m_steps);
        let start = chunk * CHUNK_SIZE;
        let count = CHUNK_SIZE.min(cfg.n_paths - start);
        let mut rng = RngStream::new(cfg.seed, chunk as u64).rng();
        let mut x = vec![0.0; d];
        let mut steps = vec![0.0; m * d];
        let mut cumulative = vec![0.0; m * d];
        let mut point = vec![0.0; d];
        let scales: Vec<f64> = self.t_list.iter().map(|t| t.powf(1.0 / self.alpha)).collect();
        for _ in 0..count {
            draw_start(&mut rng, &cfg.proposal, &mut x);
            unit_increments(self.alpha, d, m, &mut rng, &mut steps);
            let mut acc = vec![0.0; d];
            for (c, s) in cumulative.chunks_exact_mut(d).zip(steps.chunks_exact(d)) {
                for (a, s) in acc.iter_mut().zip(s) {
                    *a += s;
                }
                c.copy_from_slice(&acc);
            }
            let inv_q = cfg.proposal.inverse_density(&x);
            let mut slot = 0;
            for v in self.potentials {
                let v0 = v.value(&x);
                for (&t, &scale) in self.t_list.iter().zip(&scales) {
                    let mut interior = 0.0;
                    let mut last = 0.0;
                    for (j, c) in cumulative.chunks_exact(d).enumerate() {
                        for i in 0..d {
                            point[i] = x[i] + scale * c[i];
                        }
                        let val = v.value(&point);
                        if j + 1 == m {
                            last = val;
                        } else {
                            interior += val;
                        }
                    }
                    let a = t / m as f64 * (0.5 * v0 + interior + 0.5 * last);
                    for &kind in self.summands {
                        let g = kind.apply(a, t);
                        let value = if g == 0.0 { 0.0 } else { g * inv_q };
                        if !value.is_finite() {
                            return Err(Error::NonFiniteSummand { x: x.clone() });
                        }
                        sink(slot, value);
                        slot += 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn chunk_stats(&self, chunk: usize) -> Result<Vec<Welford>> {
        let mut acc = vec![Welford::default(); self.slots()];
        self.run_chunk(chunk, |slot, value| acc[slot].push(value))?;
        Ok(acc)
    }

    fn run(&self) -> Result<Vec<Welford>> {
        let n_chunks = self.cfg.n_paths.div_ceil(CHUNK_SIZE);
        let threads = self.cfg.threads.min(n_chunks).max(1);
        let results: Vec<Result<Vec<Welford>>> = if threads == 1 {
            (0..n_chunks).map(|c| self.chunk_stats(c)).collect()
        } else {
            let next = AtomicUsize::new(0);
            let mut slots: Vec<Option<Result<Vec<Welford>>>> = (0..n_chunks).map(|_| None).collect();
            let per_worker: Vec<Vec<(usize, Result<Vec<Welford>>)>> = std::thread::scope(|scope| {
                let handles: Vec<_> = (0..threads)
                    .map(|_| {
                        scope.spawn(|| {
                            let mut out = Vec::new();
                            loop {
                                let c = next.fetch_add(1, Ordering::Relaxed);
                                if c >= n_chunks {
                                    break;
                                }
                                out.push((c, self.chunk_stats(c)));
                            }
                            out
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            });
            for (c, r) in per_worker.into_iter().flatten() {
                slots[c] = Some(r);
            }
            slots.into_iter().map(|s| s.expect("every chunk ran")).collect()
        };
        let mut total = vec![Welford::default(); self.slots()];
        for r in results {
            for (t, c) in total.iter_mut().zip(r?) {
                t.merge(&c);
            }
        }
        Ok(total)
    }
}

fn draw_start<R: Rng + ?Sized>(rng: &mut R, proposal: &Proposal, x: &mut [f64]) {
    for (xi, ci) in x.iter_mut().zip(&proposal.center) {
        let z: f64 = StandardNormal.sample(rng);
        *xi = ci + proposal.sigma * z;
    }
}

fn check_inputs(potentials: &[GaussianMixturePotential], alpha: f64, t_list: &[f64], cfg: &McConfig) -> Result<usize> {
    let d = potentials
        .first()
        .ok_or_else(|| Error::InvalidMcConfig("no potentials given".into()))?
        .dimension();
    for v in potentials {
        if v.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: v.dimension(),
            });
        }
    }
    cfg.validate(d)?;
    // Surfaces the sampler's alpha validation before any work.
    crate::stable_sampler::sample_increment(alpha, 1, 1.0, &mut RngStream::new(0, 0).rng())?;
    if t_list.is_empty() {
        return Err(Error::InvalidMcConfig("empty t list".into()));
    }
    for &t in t_list {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::out_of_range("t", format!("need t > 0, got {t}")));
        }
    }
    Ok(d)
}

/// Runs one set of draws and evaluates every requested summand for every
/// potential and every `t`.
pub fn estimate_batch(
    potentials: &[GaussianMixturePotential],
    alpha: f64,
    t_list: &[f64],
    summands: &[Summand],
    cfg: &McConfig,
) -> Result<McBatch> {
    let d = check_inputs(potentials, alpha, t_list, cfg)?;
    let job = Job {
        potentials,
        alpha,
        t_list,
        summands,
        cfg,
        d,
    };
    let stats = job.run()?;
    let mut estimates = Vec::with_capacity(stats.len());
    let mut slot = 0;
    for v in potentials {
        for &t in t_list {
            for &kind in summands {
                // The thread count does not change results, so it is left out.
                let token = digest(&(
                    crate::VERSION,
                    kind.as_str(),
                    v,
                    alpha,
                    t,
                    cfg.n_paths,
                    cfg.m_steps,
                    &cfg.proposal,
                    cfg.seed,
                ));
                estimates.push(stats[slot].estimate(token));
                slot += 1;
            }
        }
    }
    Ok(McBatch {
        t_list: t_list.to_vec(),
        summands: summands.to_vec(),
        estimates,
    })
}

fn single(v: &GaussianMixturePotential, alpha: f64, t: f64, kind: Summand, cfg: &McConfig) -> Result<McEstimate> {
    let batch = estimate_batch(std::slice::from_ref(v), alpha, &[t], &[kind], cfg)?;
    Ok(batch.get(0, 0, kind).clone())
}

/// Importance-sampled estimate of `Q(t)`.
pub fn estimate_heat_content(v: &GaussianMixturePotential, alpha: f64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    single(v, alpha, t, Summand::HeatContent, cfg)
}

/// Estimate of `(Q(t) + t∫V) / t²` from the same draws as
/// [`estimate_heat_content`].
pub fn first_order_residual(v: &GaussianMixturePotential, alpha: f64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    single(v, alpha, t, Summand::FirstOrderResidual, cfg)
}

/// Estimate of `Q(t) + t∫V - t² T_2(t)`.
pub fn dyson_remainder(v: &GaussianMixturePotential, alpha: f64, t: f64, cfg: &McConfig) -> Result<McEstimate> {
    single(v, alpha, t, Summand::DysonRemainder, cfg)
}

/// Every individual heat-content summand `(e^{-A} - 1)/q(x)`, in path order.
pub fn path_summands(v: &GaussianMixturePotential, alpha: f64, t: f64, cfg: &McConfig) -> Result<Vec<f64>> {
    let potentials = std::slice::from_ref(v);
    let d = check_inputs(potentials, alpha, &[t], cfg)?;
    let job = Job {
        potentials,
        alpha,
        t_list: &[t],
        summands: &[Summand::HeatContent],
        cfg,
        d,
    };
    let mut out = Vec::with_capacity(cfg.n_paths);
    for c in 0..cfg.n_paths.div_ceil(CHUNK_SIZE) {
        job.run_chunk(c, |_, value| out.push(value))?;
    }
    Ok(out)
}
