//! Exact-in-law sampling of the isotropic α-stable process with
//! characteristic function `e^{-t|ξ|^α}`, via a one-sided `α/2`-stable
//! subordinator (Kanter's representation) and Gaussian variates.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feynman_kac::McEstimate;

/// Largest subordinator index accepted; Kanter's formula loses accuracy as
/// `β → 1`.
pub const MAX_BETA: f64 = 0.975;

/// A reproducible random stream: `(seed, stream_id)` selects a ChaCha8
/// keystream, distinct ids give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::out_of_range("alpha", format!("need 0 < alpha <= 2, got {alpha}")));
    }
    if alpha < 2.0 && alpha / 2.0 > MAX_BETA {
        return Err(Error::out_of_range(
            "alpha",
            format!("alpha in ({}, 2) is not supported by the subordinator, got {alpha}", 2.0 * MAX_BETA),
        ));
    }
    Ok(())
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Positive `S` with `E[e^{-λS}] = e^{-span·λ^β}`.
pub fn sample_subordinator<R: Rng + ?Sized>(beta: f64, span: f64, rng: &mut R) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::out_of_range("beta", format!("need 0 < beta < 1, got {beta}")));
    }
    if beta > MAX_BETA {
        return Err(Error::out_of_range("beta", format!("need beta <= {MAX_BETA}, got {beta}")));
    }
    if !(span > 0.0) {
        return Err(Error::out_of_range("span", format!("need span > 0, got {span}")));
    }
    Ok(span.powf(1.0 / beta) * kanter(beta, rng))
}

fn kanter<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let u = PI * open_unit(rng);
    let e: f64 = Exp1.sample(rng);
    let a = ((beta * u).sin().powf(beta) * ((1.0 - beta) * u).sin().powf(1.0 - beta) / u.sin()).powf(1.0 / (1.0 - beta));
    (a / e).powf((1.0 - beta) / beta)
}

/// Increment with characteristic function `e^{-span|ξ|^α}`, written into `out`.
fn increment_into<R: Rng + ?Sized>(alpha: f64, span: f64, rng: &mut R, out: &mut [f64]) {
    let scale = if alpha == 2.0 {
        (2.0 * span).sqrt()
    } else {
        (2.0 * span.powf(2.0 / alpha) * kanter(alpha / 2.0, rng)).sqrt()
    };
    for o in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *o = scale * z;
    }
}

pub fn sample_increment<R: Rng + ?Sized>(alpha: f64, d: usize, span: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(span > 0.0) {
        return Err(Error::out_of_range("span", format!("need span > 0, got {span}")));
    }
    let mut out = vec![0.0; d];
    increment_into(alpha, span, rng, &mut out);
    Ok(out)
}

/// Skeleton of the process on a uniform time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StablePath {
    pub alpha: f64,
    pub dimension: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl StablePath {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn endpoint(&self) -> &[f64] {
        self.positions.last().unwrap()
    }
}

pub fn sample_path<R: Rng + ?Sized>(
    alpha: f64,
    d: usize,
    horizon: f64,
    steps: usize,
    x0: &[f64],
    rng: &mut R,
) -> Result<StablePath> {
    check_alpha(alpha)?;
    if steps == 0 {
        return Err(Error::out_of_range("steps", "need at least one step"));
    }
    if !(horizon > 0.0) {
        return Err(Error::out_of_range("t", format!("need t > 0, got {horizon}")));
    }
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    let span = horizon / steps as f64;
    let mut positions = Vec::with_capacity(steps + 1);
    positions.push(x0.to_vec());
    let mut step = vec![0.0; d];
    for _ in 0..steps {
        increment_into(alpha, span, rng, &mut step);
        let next: Vec<f64> = positions.last().unwrap().iter().zip(&step).map(|(p, s)| p + s).collect();
        positions.push(next);
    }
    let times = (0..=steps)
        .map(|j| if j == steps { horizon } else { j as f64 * span })
        .collect();
    Ok(StablePath {
        alpha,
        dimension: d,
        times,
        positions,
    })
}

/// Unit-horizon skeleton increments, flattened `steps × d`; callers scale by
/// `t^{1/α}` to get a skeleton on `[0, t]`.
pub(crate) fn unit_increments<R: Rng + ?Sized>(alpha: f64, d: usize, steps: usize, rng: &mut R, out: &mut [f64]) {
    let span = 1.0 / steps as f64;
    for chunk in out[..steps * d].chunks_exact_mut(d) {
        increment_into(alpha, span, rng, chunk);
    }
}

/// Mean and standard error of `|X_t|^γ` over `n` draws from `stream`.
pub fn moment_estimate(alpha: f64, gamma: f64, t: f64, d: usize, n: usize, stream: RngStream) -> Result<McEstimate> {
    check_alpha(alpha)?;
    if !(gamma > 0.0) {
        return Err(Error::out_of_range("gamma", format!("need gamma > 0, got {gamma}")));
    }
    if alpha < 2.0 && gamma >= alpha {
        return Err(Error::InfiniteMoment { gamma, alpha });
    }
    if n < 2 {
        return Err(Error::out_of_range("n_samples", "need at least 2 samples"));
    }
    let mut rng = stream.rng();
    let mut x = vec![0.0; d];
    let mut acc = Welford::default();
    for _ in 0..n {
        increment_into(alpha, t, &mut rng, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        acc.push(r.powf(gamma));
    }
    Ok(acc.estimate(format!("moment:alpha={alpha}:gamma={gamma}:t={t}:d={d}:seed={}:stream={}", stream.seed, stream.stream_id)))
}

/// Transition density for `α ∈ {1, 2}`.
pub fn closed_form_density(alpha: f64, t: f64, x: &[f64]) -> Result<f64> {
    let d = x.len() as f64;
    let r2: f64 = x.iter().map(|v| v * v).sum();
    if alpha == 2.0 {
        Ok((4.0 * PI * t).powf(-d / 2.0) * (-r2 / (4.0 * t)).exp())
    } else if alpha == 1.0 {
        let c = libm::tgamma((d + 1.0) / 2.0) / PI.powf((d + 1.0) / 2.0);
        Ok(c * t / (t * t + r2).powf((d + 1.0) / 2.0))
    } else {
        Err(Error::NoClosedForm(alpha))
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Welford {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn estimate(&self, config_digest: String) -> McEstimate {
        let variance = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean: self.mean,
            standard_error: (variance.max(0.0) / self.n as f64).sqrt(),
            n_samples: self.n as usize,
            config_digest,
        }
    }
}

// Self-tests

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestCheck {
    pub suite: &'static str,
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfTestReport {
    pub seed: u64,
    pub n_cf: usize,
    pub n_ks: usize,
    pub n_moment: usize,
    pub checks: Vec<SelfTestCheck>,
    pub passed: bool,
}

/// Sample sizes for [`run_self_test`].
#[derive(Debug, Clone, Copy)]
pub struct SelfTestSizes {
    pub cf: usize,
    pub ks: usize,
    pub moment: usize,
}

impl Default for SelfTestSizes {
    fn default() -> Self {
        SelfTestSizes {
            cf: 1_000_000,
            ks: 100_000,
            moment: 1_000_000,
        }
    }
}

/// `|mean e^{iξ·X} − e^{−t|ξ|^α}|` over `n` increments.
pub fn empirical_cf_error(alpha: f64, xi: &[f64], t: f64, n: usize, stream: RngStream) -> Result<f64> {
    check_alpha(alpha)?;
    let mut rng = stream.rng();
    let mut x = vec![0.0; xi.len()];
    let (mut re, mut im) = (0.0, 0.0);
    for _ in 0..n {
        increment_into(alpha, t, &mut rng, &mut x);
        let phase: f64 = xi.iter().zip(&x).map(|(a, b)| a * b).sum();
        re += phase.cos();
        im += phase.sin();
    }
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let target = (-t * norm.powf(alpha)).exp();
    Ok(((re / n as f64 - target).powi(2) + (im / n as f64).powi(2)).sqrt())
}

/// Kolmogorov-Smirnov distance between `samples` and the CDF `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let f = cdf(s);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// `estimate(t=4) / (4^{γ/α} estimate(t=1))` and its combined standard error.
pub fn scaling_ratio(alpha: f64, gamma: f64, d: usize, n: usize, seed: u64) -> Result<(f64, f64)> {
    let m1 = moment_estimate(alpha, gamma, 1.0, d, n, RngStream::new(seed, 1))?;
    let m4 = moment_estimate(alpha, gamma, 4.0, d, n, RngStream::new(seed, 2))?;
    let ratio = m4.mean / (4f64.powf(gamma / alpha) * m1.mean);
    let se = ratio * ((m4.standard_error / m4.mean).powi(2) + (m1.standard_error / m1.mean).powi(2)).sqrt();
    Ok((ratio, se))
}

/// CF, KS, Laplace-transform and scaling suites with their pass/fail
/// statistics.
pub fn run_self_test(seed: u64, sizes: SelfTestSizes) -> Result<SelfTestReport> {
    let mut checks = Vec::new();
    let mut stream_id = 100u64;
    let mut next_stream = || {
        stream_id += 1;
        RngStream::new(seed, stream_id)
    };
    let cf_tol = 4.0 / (sizes.cf as f64).sqrt();
    for alpha in [0.8, 1.0, 1.5, 2.0] {
        for d in [1usize, 2] {
            for r in [0.5, 1.0, 2.0] {
                let xi: Vec<f64> = if d == 1 { vec![r] } else { vec![r * 0.6, r * 0.8] };
                let err = empirical_cf_error(alpha, &xi, 1.0, sizes.cf, next_stream())?;
                checks.push(SelfTestCheck {
                    suite: "cf",
                    name: format!("alpha={alpha} d={d} |xi|={r}"),
                    statistic: err,
                    threshold: cf_tol,
                    passed: err <= cf_tol,
                });
            }
        }
    }

    let mut rng = next_stream().rng();
    let mut samples = (0..sizes.ks)
        .map(|_| sample_subordinator(0.5, 1.0, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let ks = ks_statistic(&mut samples, |s| libm::erfc(1.0 / (2.0 * s.sqrt())));
    checks.push(SelfTestCheck {
        suite: "ks",
        name: "levy beta=1/2 span=1".into(),
        statistic: ks,
        threshold: ks_critical_1pct(sizes.ks),
        passed: ks <= ks_critical_1pct(sizes.ks),
    });

    let mut rng = next_stream().rng();
    let mut lt = Welford::default();
    for _ in 0..sizes.cf {
        lt.push((-sample_subordinator(0.75, 1.0, &mut rng)?).exp());
    }
    let lt_est = lt.estimate(String::new());
    let lt_dev = (lt_est.mean - (-1f64).exp()).abs();
    checks.push(SelfTestCheck {
        suite: "laplace",
        name: "beta=0.75 span=1 lambda=1".into(),
        statistic: lt_dev,
        threshold: 4.0 * lt_est.standard_error,
        passed: lt_dev <= 4.0 * lt_est.standard_error,
    });

    for (i, (alpha, gamma)) in [(2.0, 1.0), (1.5, 0.5), (1.0, 0.4)].into_iter().enumerate() {
        let (ratio, se) = scaling_ratio(alpha, gamma, 1, sizes.moment, seed.wrapping_add(1000 + i as u64))?;
        checks.push(SelfTestCheck {
            suite: "scaling",
            name: format!("alpha={alpha} gamma={gamma}"),
            statistic: (ratio - 1.0).abs(),
            threshold: 3.0 * se,
            passed: (ratio - 1.0).abs() <= 3.0 * se,
        });
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(SelfTestReport {
        seed,
        n_cf: sizes.cf,
        n_ks: sizes.ks,
        n_moment: sizes.moment,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = RngStream::new(7, 3).rng();
            move |_| r.random()
        }).collect();
        let c: u64 = RngStream::new(7, 4).rng().random();
        assert_eq!(a, b);
        assert_ne!(a[0], c);
    }

    #[test]
    fn subordinator_rejects_bad_index() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(sample_subordinator(0.0, 1.0, &mut rng).is_err());
        assert!(sample_subordinator(1.0, 1.0, &mut rng).is_err());
        assert!(sample_subordinator(0.99, 1.0, &mut rng).is_err());
        assert!(sample_subordinator(0.5, 0.0, &mut rng).is_err());
        assert!(sample_increment(1.97, 1, 1.0, &mut rng).is_err());
        assert!(sample_increment(2.1, 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn subordinator_is_positive() {
        let mut rng = RngStream::new(2, 0).rng();
        for beta in [0.05, 0.4, 0.5, 0.9, 0.975] {
            for _ in 0..10_000 {
                let s = sample_subordinator(beta, 0.3, &mut rng).unwrap();
                assert!(s > 0.0 && s.is_finite(), "beta {beta}: {s}");
            }
        }
    }

    #[test]
    fn span_scaling_is_exact() {
        let a = sample_subordinator(0.5, 4.0, &mut RngStream::new(3, 0).rng()).unwrap();
        let b = sample_subordinator(0.5, 1.0, &mut RngStream::new(3, 0).rng()).unwrap();
        assert_eq!(a, 16.0 * b);
    }

    #[test]
    fn path_shape() {
        let p = sample_path(1.5, 2, 0.7, 5, &[1.0, -1.0], &mut RngStream::new(4, 0).rng()).unwrap();
        assert_eq!(p.times.len(), 6);
        assert_eq!(p.positions[0], vec![1.0, -1.0]);
        assert_eq!(p.horizon(), 0.7);
        assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_path(1.5, 2, 0.7, 0, &[0.0, 0.0], &mut RngStream::new(4, 0).rng()).is_err());
    }

    #[test]
    fn density_values() {
        assert!((closed_form_density(2.0, 1.0, &[0.0]).unwrap() - 0.282_094_791_773_878_1).abs() < 1e-15);
        assert!((closed_form_density(1.0, 1.0, &[0.0]).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(matches!(closed_form_density(1.5, 1.0, &[0.0]), Err(Error::NoClosedForm(_))));
    }

    #[test]
    fn moment_precondition() {
        let s = RngStream::new(0, 0);
        assert!(matches!(moment_estimate(1.5, 1.5, 1.0, 1, 10, s), Err(Error::InfiniteMoment { .. })));
        assert!(moment_estimate(2.0, 3.0, 1.0, 1, 10, s).is_ok());
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let mut whole = Welford::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = Welford::default();
        let mut b = Welford::default();
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-14);
        assert!((a.m2 - whole.m2).abs() < 1e-12);
    }
}
