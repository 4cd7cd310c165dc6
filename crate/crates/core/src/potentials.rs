//! Gaussian-mixture potentials `V(x) = Σ_i c_i exp(-a_i |x - μ_i|²)`.
//!
//! The family is closed under pointwise products and has closed-form
//! integrals and Fourier transforms, so every power `V^k` and every `∫V^k`
//! used by the coefficient engine is exact.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Relative accuracy targeted by [`GaussianMixturePotential::norms`].
pub const NORM_TARGET_RELATIVE: f64 = 1e-8;

/// Box padding used for the `L¹` quadrature and the sup-norm scan, in
/// standard widths `1/√(2a)` of the widest component.
const PADDING_WIDTHS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub center: Vec<f64>,
    pub sharpness: f64,
}

impl Component {
    pub fn new(weight: f64, center: Vec<f64>, sharpness: f64) -> Self {
        Component {
            weight,
            center,
            sharpness,
        }
    }

    /// Standard deviation of the Gaussian profile, `1/√(2a)`.
    pub fn width(&self) -> f64 {
        (2.0 * self.sharpness).sqrt().recip()
    }

    #[inline]
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * (-self.sharpness * dist2(x, &self.center)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Zero,
    NonNegative,
    NonPositive,
    Indefinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub sup: f64,
    /// Error estimate reported by the `L¹` quadrature.
    pub l1_error: f64,
    pub target_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixturePotential {
    dimension: usize,
    components: Vec<Component>,
}

#[inline]
pub(crate) fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

impl GaussianMixturePotential {
    pub fn new(dimension: usize, components: Vec<Component>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidPotential("dimension must be positive".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidPotential("component list is empty".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.center.len() != dimension {
                return Err(Error::InvalidPotential(format!(
                    "component {i}: center has length {}, dimension is {dimension}",
                    c.center.len()
                )));
            }
            if !(c.sharpness > 0.0 && c.sharpness.is_finite()) {
                return Err(Error::InvalidPotential(format!(
                    "component {i}: sharpness must be positive and finite, got {}",
                    c.sharpness
                )));
            }
            if !c.weight.is_finite() || c.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPotential(format!("component {i}: non-finite weight or center")));
            }
        }
        Ok(GaussianMixturePotential { dimension, components })
    }

    /// `c · exp(-a |x - μ|²)`.
    pub fn single(weight: f64, center: Vec<f64>, sharpness: f64) -> Result<Self> {
        let d = center.len();
        Self::new(d, vec![Component::new(weight, center, sharpness)])
    }

    /// Unit Gaussian `exp(-|x|²)` in dimension `d`.
    pub fn unit_gaussian(d: usize) -> Self {
        Self::single(1.0, vec![0.0; d], 1.0).expect("valid unit Gaussian")
    }

    /// The zero potential, represented by a single zero-weight component.
    pub fn zero(d: usize) -> Self {
        Self::single(0.0, vec![0.0; d], 1.0).expect("valid zero mixture")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.weight == 0.0)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: len,
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.value(x))
    }

    /// Evaluation without the dimension check, for inner loops.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dimension];
        for c in &self.components {
            let v = c.value(x);
            for (gi, (xi, mi)) in g.iter_mut().zip(x.iter().zip(&c.center)) {
                *gi -= 2.0 * c.sharpness * (xi - mi) * v;
            }
        }
        g
    }

    /// `V̂(ξ) = ∫ e^{-i x·ξ} V(x) dx`.
    pub fn fourier(&self, xi: &[f64]) -> Result<Complex64> {
        self.check_dim(xi.len())?;
        Ok(self.fourier_unchecked(xi))
    }

    #[inline]
    pub fn fourier_unchecked(&self, xi: &[f64]) -> Complex64 {
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        let half_d = self.dimension as f64 / 2.0;
        self.components
            .iter()
            .map(|c| {
                let amplitude = c.weight * (PI / c.sharpness).powf(half_d) * (-xi2 / (4.0 * c.sharpness)).exp();
                let phase: f64 = xi.iter().zip(&c.center).map(|(a, b)| a * b).sum();
                Complex64::from_polar(amplitude, -phase)
            })
            .sum()
    }

    /// Exact product mixture; the component count is the product of the
    /// operands' counts.
    pub fn pointwise_product(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dimension)?;
        let mut components = Vec::with_capacity(self.components.len() * other.components.len());
        for p in &self.components {
            for q in &other.components {
                let a = p.sharpness + q.sharpness;
                let center = p
                    .center
                    .iter()
                    .zip(&q.center)
                    .map(|(u, v)| (p.sharpness * u + q.sharpness * v) / a)
                    .collect();
                let cross = p.sharpness * q.sharpness / a * dist2(&p.center, &q.center);
                components.push(Component::new(p.weight * q.weight * (-cross).exp(), center, a));
            }
        }
        Ok(GaussianMixturePotential {
            dimension: self.dimension,
            components,
        })
    }

    /// `V^k` for `k ≥ 1`, with bit-identical components merged.
    pub fn power(&self, k: u32) -> Self {
        assert!(k >= 1, "power needs k >= 1");
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.pointwise_product(self).expect("same dimension").merged();
        }
        acc
    }

    /// Sums the weights of components with identical center and sharpness.
    pub fn merged(&self) -> Self {
        let mut out: Vec<Component> = Vec::new();
        for c in &self.components {
            match out.iter_mut().find(|o| o.sharpness == c.sharpness && o.center == c.center) {
                Some(o) => o.weight += c.weight,
                None => out.push(c.clone()),
            }
        }
        GaussianMixturePotential {
            dimension: self.dimension,
            components: out,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.components {
            c.weight *= s;
        }
        out
    }

    /// `∫ V = Σ_i c_i (π/a_i)^{d/2}`.
    pub fn integral(&self) -> f64 {
        let half_d = self.dimension as f64 / 2.0;
        self.components
            .iter()
            .map(|c| c.weight * (PI / c.sharpness).powf(half_d))
            .sum()
    }

    /// `∫ V^k`, exact.
    pub fn integral_of_power(&self, k: u32) -> f64 {
        self.power(k).integral()
    }

    pub fn max_width(&self) -> f64 {
        self.components.iter().map(Component::width).fold(0.0, f64::max)
    }

    /// Box containing every center, padded by ten standard widths.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let pad = PADDING_WIDTHS * self.max_width();
        let mut lo = vec![f64::INFINITY; self.dimension];
        let mut hi = vec![f64::NEG_INFINITY; self.dimension];
        for c in &self.components {
            for (j, &m) in c.center.iter().enumerate() {
                lo[j] = lo[j].min(m - pad);
                hi[j] = hi[j].max(m + pad);
            }
        }
        (lo, hi)
    }

    /// `‖V‖₁` by adaptive quadrature of `|V|` and `‖V‖∞` by multistart
    /// maximization, both at [`NORM_TARGET_RELATIVE`].
    pub fn norms(&self) -> Result<Norms> {
        let (l1, l1_error) = self.l1_norm()?;
        Ok(Norms {
            l1,
            sup: self.sup_norm(),
            l1_error,
            target_relative: NORM_TARGET_RELATIVE,
        })
    }

    fn l1_norm(&self) -> Result<(f64, f64)> {
        if self.is_zero() {
            return Ok((0.0, 0.0));
        }
        // Single-sign mixtures have no cancellation: |∫V| is exact.
        if self.components.iter().all(|c| c.weight >= 0.0) || self.components.iter().all(|c| c.weight <= 0.0) {
            return Ok((self.integral().abs(), 0.0));
        }
        let (lo, hi) = self.bounding_box();
        let tol = Tolerance {
            abs: 1e-300,
            rel: NORM_TARGET_RELATIVE * 1e-1,
            max_subdivisions: 2000,
            initial_pieces: 16,
        };
        let r = quadrature::integrate_box(|x| self.value(x).abs(), &lo, &hi, tol)?;
        Ok((r.value, r.error_estimate))
    }

    /// `sup |V|`: a grid scan over the padded box plus gradient ascent seeded
    /// at every center and at the best scan points.
    pub fn sup_norm(&self) -> f64 {
        self.extreme(|v| v.abs())
    }

    /// `sup V` (may be negative for nonpositive mixtures).
    pub fn max_value(&self) -> f64 {
        self.extreme(|v| v)
    }

    /// `inf V`.
    pub fn min_value(&self) -> f64 {
        -self.extreme(|v| -v)
    }

    fn extreme(&self, objective: impl Fn(f64) -> f64) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let d = self.dimension;
        let (lo, hi) = self.bounding_box();
        let per_axis = match d {
            1 => 4001,
            2 => 201,
            3 => 41,
            _ => 11,
        };
        let mut scan: Vec<(f64, Vec<f64>)> = Vec::new();
        let total = (per_axis as u64).pow(d as u32);
        let mut idx = vec![0usize; d];
        let mut x = vec![0.0; d];
        for _ in 0..total {
            for j in 0..d {
                x[j] = lo[j] + (hi[j] - lo[j]) * idx[j] as f64 / (per_axis - 1) as f64;
            }
            scan.push((objective(self.value(&x)), x.clone()));
            for i in idx.iter_mut() {
                *i += 1;
                if *i < per_axis {
                    break;
                }
                *i = 0;
            }
        }
        scan.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut seeds: Vec<Vec<f64>> = self.components.iter().map(|c| c.center.clone()).collect();
        seeds.extend(scan.iter().take(16).map(|s| s.1.clone()));
        let mut best = scan[0].0;
        for seed in seeds {
            best = best.max(self.ascend(seed, &objective));
        }
        best
    }

    fn ascend(&self, mut x: Vec<f64>, objective: &impl Fn(f64) -> f64) -> f64 {
        let mut fx = objective(self.value(&x));
        let scale = self.components.iter().map(|c| c.weight.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        for _ in 0..20_000 {
            // Numerical orientation of the objective at x: d(obj)/dV.
            let v = self.value(&x);
            let h = 1e-7 * scale;
            let slope = (objective(v + h) - objective(v - h)) / (2.0 * h);
            let g: Vec<f64> = self.gradient(&x).into_iter().map(|gi| gi * slope).collect();
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if gnorm <= 1e-13 * scale {
                break;
            }
            let mut step = 1.0 / (2.0 * self.components.iter().map(|c| c.sharpness).fold(0.0, f64::max) * scale);
            let mut improved = false;
            while step * gnorm > 1e-15 {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
                let ft = objective(self.value(&trial));
                if ft > fx + 1e-4 * step * gnorm * gnorm {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                break;
            }
        }
        fx
    }

    /// Analytic Lipschitz bound `Σ_i |c_i| √(2 a_i / e)`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight.abs() * (2.0 * c.sharpness / std::f64::consts::E).sqrt())
            .sum()
    }

    /// Constant `M` with `|V(x) - V(y)| ≤ M |x - y|^γ`, from
    /// `min(L s, 2‖V‖∞) ≤ L^γ (2‖V‖∞)^{1-γ} s^γ`.
    pub fn holder_constant(&self, gamma: f64) -> Result<f64> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::out_of_range("gamma", format!("need 0 < gamma <= 1, got {gamma}")));
        }
        let lip = self.lipschitz_bound();
        if gamma == 1.0 {
            return Ok(lip);
        }
        if lip == 0.0 {
            return Ok(0.0);
        }
        Ok(lip.powf(gamma) * (2.0 * self.sup_norm()).powf(1.0 - gamma))
    }

    /// Sign of `V`: from the weights when they share a sign, otherwise from
    /// the numerical extremes.
    pub fn sign(&self) -> Sign {
        if self.is_zero() {
            return Sign::Zero;
        }
        if self.components.iter().all(|c| c.weight >= 0.0) {
            return Sign::NonNegative;
        }
        if self.components.iter().all(|c| c.weight <= 0.0) {
            return Sign::NonPositive;
        }
        let (max, min) = (self.max_value(), self.min_value());
        match (min >= 0.0, max <= 0.0) {
            (true, true) => Sign::Zero,
            (true, false) => Sign::NonNegative,
            (false, true) => Sign::NonPositive,
            (false, false) => Sign::Indefinite,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::assert_close;

    mod approx_eq {
        macro_rules! assert_close {
            ($a:expr, $b:expr, $tol:expr) => {{
                let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
                assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol:e})");
            }};
        }
        pub(crate) use assert_close;
    }

    fn pair() -> GaussianMixturePotential {
        GaussianMixturePotential::new(
            1,
            vec![Component::new(1.0, vec![0.0], 1.0), Component::new(-1.0, vec![5.0], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        assert_eq!(v.evaluate(&[0.0]).unwrap(), 1.0);
        assert_close!(v.evaluate(&[1.0]).unwrap(), 0.367_879_441_171_442_3, 1e-15);
        let cancel = GaussianMixturePotential::new(
            2,
            vec![Component::new(1.0, vec![0.3, 0.1], 2.0), Component::new(-1.0, vec![0.3, 0.1], 2.0)],
        )
        .unwrap();
        assert_eq!(cancel.evaluate(&[0.7, -1.2]).unwrap(), 0.0);
        assert!(matches!(v.evaluate(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_components_rejected() {
        assert!(GaussianMixturePotential::new(1, vec![]).is_err());
        assert!(GaussianMixturePotential::single(1.0, vec![0.0], 0.0).is_err());
        assert!(GaussianMixturePotential::new(2, vec![Component::new(1.0, vec![0.0], 1.0)]).is_err());
    }

    #[test]
    fn fourier_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        assert_close!(v.fourier(&[0.0]).unwrap().re, PI.sqrt(), 1e-15);
        assert_eq!(v.fourier(&[0.0]).unwrap().re, v.integral());
        let shifted = GaussianMixturePotential::single(1.0, vec![2.5], 1.0).unwrap();
        for xi in [0.3, 1.0, 4.0] {
            assert_close!(shifted.fourier(&[xi]).unwrap().norm(), v.fourier(&[xi]).unwrap().norm(), 1e-15);
        }
    }

    #[test]
    fn product_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        let sq = v.pointwise_product(&v).unwrap();
        assert_eq!(sq.components(), &[Component::new(1.0, vec![0.0], 2.0)]);
        let z = v.pointwise_product(&GaussianMixturePotential::zero(1)).unwrap();
        assert_eq!(z.evaluate(&[0.4]).unwrap(), 0.0);
        assert_eq!(pair().pointwise_product(&pair()).unwrap().components().len(), 4);
    }

    #[test]
    fn integral_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        assert_close!(v.integral(), 1.772_453_850_905_516, 1e-15);
        assert_close!(v.integral_of_power(2), 1.253_314_137_315_500_3, 1e-15);
        assert_eq!(GaussianMixturePotential::zero(3).integral(), 0.0);
    }

    #[test]
    fn norm_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        let n = v.norms().unwrap();
        assert_close!(n.l1, PI.sqrt(), 1e-8 * PI.sqrt());
        assert_close!(n.sup, 1.0, 1e-12);
        let n = pair().norms().unwrap();
        // |V| = e^{-x²} - e^{-(x-5)²} changes branch at 2.5
        assert_close!(n.l1, 2.0 * PI.sqrt() * libm::erf(2.5), 1e-8 * 2.0 * PI.sqrt());
        assert_close!(n.sup, 1.0, 1e-10);
    }

    #[test]
    fn sup_of_overlapping_signed_mixture() {
        // 2e^{-x²} - e^{-2(x-0.5)²}: compare against a dense scan.
        let v = GaussianMixturePotential::new(
            1,
            vec![Component::new(2.0, vec![0.0], 1.0), Component::new(-1.0, vec![0.5], 2.0)],
        )
        .unwrap();
        let dense = (0..2_000_001)
            .map(|i| -10.0 + 20.0 * i as f64 / 2e6)
            .map(|x| v.value(&[x]).abs())
            .fold(0.0, f64::max);
        assert!(v.sup_norm() >= dense - 1e-12);
        assert!(v.sup_norm() <= dense + 1e-9);
    }

    #[test]
    fn holder_examples() {
        let v = GaussianMixturePotential::unit_gaussian(1);
        assert_close!(v.holder_constant(1.0).unwrap(), 0.857_763_884_960_706_8, 1e-12);
        assert_close!(
            v.holder_constant(0.5).unwrap(),
            (2.0 / std::f64::consts::E).powf(0.25) * 2f64.sqrt(),
            1e-12
        );
        assert_eq!(GaussianMixturePotential::zero(1).holder_constant(0.5).unwrap(), 0.0);
        assert!(v.holder_constant(0.0).is_err());
        assert!(v.holder_constant(1.5).is_err());
    }

    #[test]
    fn sign_audit() {
        assert_eq!(GaussianMixturePotential::zero(1).sign(), Sign::Zero);
        assert_eq!(GaussianMixturePotential::unit_gaussian(1).scaled(-1.0).sign(), Sign::NonPositive);
        assert_eq!(pair().sign(), Sign::Indefinite);
        // Signed weights, but the positive wide bump dominates everywhere.
        let dominated = GaussianMixturePotential::new(
            1,
            vec![Component::new(2.0, vec![0.0], 1.0), Component::new(-0.5, vec![0.0], 4.0)],
        )
        .unwrap();
        assert_eq!(dominated.sign(), Sign::NonNegative);
    }
}
