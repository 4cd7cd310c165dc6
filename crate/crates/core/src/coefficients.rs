//! Heat content invariants `C_ℓ(V)` and their constituents `C_{n,k}(V)`.
//!
//! The expansion reads `Q(t) = -t C_1 + Σ_{ℓ≥2} (-t)^ℓ C_ℓ + O(t^{N+1})`
//! with `C_ℓ = Σ_{n+k=ℓ, k≥2} C_{n,k} / n!`. Two independent routes are
//! implemented:
//!
//! * closed spatial forms for `ℓ ≤ 5`, built from exact mixture powers and
//!   the spectral grid (`F V`, `F_2 V`, Dirichlet forms);
//! * nested sums over the frequency lattice with the analytic transform and
//!   exact simplex weights `A(n, ℓ)` (`k ∈ {2, 3}`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::GaussianMixturePotential;
use crate::simplex_weights::{enumerate_compositions, weight_a};
use crate::spectral::{self, GridField, SpectralGrid};

/// Imaginary residual above which a lattice sum is rejected.
pub const IMAGINARY_LIMIT: f64 = 1e-9;

/// Largest `n` accepted by the lattice route.
pub const MAX_LATTICE_ORDER: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Analytic,
    FourierGrid,
    ClosedForm,
    Sos,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Analytic => "analytic",
            Route::FourierGrid => "fourier_grid",
            Route::ClosedForm => "closed_form",
            Route::Sos => "sos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub dimension: usize,
    pub points_per_axis: usize,
    pub half_extent: f64,
}

impl From<&SpectralGrid> for GridDescriptor {
    fn from(g: &SpectralGrid) -> Self {
        GridDescriptor {
            dimension: g.dimension(),
            points_per_axis: g.points_per_axis(),
            half_extent: g.half_extent(),
        }
    }
}

impl std::fmt::Display for GridDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d={} N={} L={}", self.dimension, self.points_per_axis, self.half_extent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub label: String,
    pub value: f64,
    pub route: Route,
    /// `None` for purely analytic values.
    pub grid: Option<GridDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub alpha: f64,
    pub entries: Vec<TableEntry>,
    pub provenance: String,
}

impl CoefficientTable {
    pub fn get(&self, label: &str, route: Route) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.label == label && e.route == route)
            .map(|e| e.value)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::out_of_range("alpha", format!("need 0 < alpha <= 2, got {alpha}")));
    }
    Ok(())
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `ψ(u) = (e^{-u} - 1 + u) / u²`, the value of `∫_{I_2} e^{-u(λ_1-λ_2)} dλ`.
pub fn psi(u: f64) -> f64 {
    if u < 1e-4 {
        0.5 - u / 6.0 + u * u / 24.0
    } else {
        (u + (-u).exp_m1()) / (u * u)
    }
}

/// Coefficient engine for one `(V, grid, α)`; the grid fields shared by the
/// closed forms are computed once.
#[derive(Debug, Clone)]
pub struct CoefficientEngine {
    potential: GaussianMixturePotential,
    grid: SpectralGrid,
    alpha: f64,
    v: GridField,
    v_sq: GridField,
    v_hat: GridField,
    v_sq_hat: GridField,
    fv: GridField,
    f2v: GridField,
    magnitudes: Vec<f64>,
}

impl CoefficientEngine {
    pub fn new(potential: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let v = spectral::sample_on_grid(potential, grid)?;
        let v_sq = spectral::sample_on_grid(&potential.power(2), grid)?;
        let v_hat = spectral::forward_transform(&v)?;
        let v_sq_hat = spectral::forward_transform(&v_sq)?;
        let fv_hat = spectral::apply_symbol_power(&v_hat, alpha)?;
        let fv = spectral::inverse_transform(&fv_hat)?;
        let f2v = spectral::inverse_transform(&spectral::apply_symbol_power(&v_hat, 2.0 * alpha)?)?;
        Ok(CoefficientEngine {
            potential: potential.clone(),
            grid: *grid,
            alpha,
            v,
            v_sq,
            v_hat,
            v_sq_hat,
            fv,
            f2v,
            magnitudes: grid.frequency_magnitudes(),
        })
    }

    pub fn potential(&self) -> &GaussianMixturePotential {
        &self.potential
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `F V` on the grid.
    pub fn fv(&self) -> &GridField {
        &self.fv
    }

    fn integral(&self, f: &GridField) -> f64 {
        spectral::grid_integral_re(f).expect("physical field")
    }

    fn product_integral(&self, fields: &[&GridField]) -> f64 {
        let mut acc = fields[0].clone();
        for f in &fields[1..] {
            acc = acc.mul(f).expect("same grid");
        }
        self.integral(&acc)
    }

    /// `E_α(V)` on the grid.
    pub fn dirichlet_form(&self) -> f64 {
        spectral::dirichlet_form_of_field(&self.v_hat, self.alpha).expect("valid alpha")
    }

    /// `C_{0,k} = (1/k!) ∫ V^k`, analytic.
    pub fn c0k(&self, k: u32) -> Result<f64> {
        c0k(&self.potential, k)
    }

    /// `C_1 = ∫ V`.
    pub fn c1(&self) -> f64 {
        self.potential.integral()
    }

    /// `C_2 = (1/2) ∫ V²`.
    pub fn c2(&self) -> f64 {
        0.5 * self.potential.integral_of_power(2)
    }

    /// `C_3 = (1/3!)(∫V³ + E_α(V))`.
    pub fn c3_closed(&self) -> f64 {
        (self.potential.integral_of_power(3) + self.dirichlet_form()) / 6.0
    }

    /// `C_4 = (1/4!)(∫V⁴ + 2∫V² F V + ∫|F V|²)`.
    pub fn c4_closed(&self) -> f64 {
        let v4 = self.potential.integral_of_power(4);
        let cross = self.product_integral(&[&self.v_sq, &self.fv]);
        let fv_sq = self.integral(&self.fv.norm_sqr());
        (v4 + 2.0 * cross + fv_sq) / 24.0
    }

    /// `C_5 = (1/5!)(∫V⁵ + 2∫V³FV + 2∫V²F₂V + ∫V|FV|² + E_α(FV) + E_α(V²))`.
    pub fn c5_closed(&self) -> f64 {
        let terms = self.c5_terms();
        terms.iter().sum::<f64>() / 120.0
    }

    /// The six integrals of the closed form of `C_5`, in order.
    pub fn c5_terms(&self) -> [f64; 6] {
        [
            self.potential.integral_of_power(5),
            2.0 * self.product_integral(&[&self.v_sq, &self.v, &self.fv]),
            2.0 * self.product_integral(&[&self.v_sq, &self.f2v]),
            self.product_integral(&[&self.v, &self.fv.norm_sqr()]),
            spectral::dirichlet_form_of_field(&self.fv, self.alpha).expect("valid alpha"),
            spectral::dirichlet_form_of_field(&self.v_sq_hat, self.alpha).expect("valid alpha"),
        ]
    }

    /// `C_4 = (1/4!) ∫ |V² + F V|²`.
    pub fn c4_sos(&self) -> f64 {
        let s = self.v_sq.add(&self.fv).expect("same grid");
        self.integral(&s.norm_sqr()) / 24.0
    }

    /// `C_5 = (1/5!)[∫ V |V² + F V|² + (2π)^{-d} ∫ | |ξ|^α V̂ + (V²)^ |² |ξ|^α dξ]`.
    pub fn c5_sos(&self) -> f64 {
        let s = self.v_sq.add(&self.fv).expect("same grid");
        let spatial = self.product_integral(&[&self.v, &s.norm_sqr()]);
        let spectral_sum: f64 = self
            .v_hat
            .values()
            .iter()
            .zip(self.v_sq_hat.values())
            .zip(&self.magnitudes)
            .map(|((vh, v2h), &r)| {
                if r == 0.0 {
                    0.0
                } else {
                    let ra = r.powf(self.alpha);
                    (vh * ra + v2h).norm_sqr() * ra
                }
            })
            .sum();
        (spatial + spectral_sum * self.grid.frequency_measure()) / 120.0
    }

    /// Closed forms of the individual `C_{n,k}` with `n + k ≤ 5`.
    pub fn cnk_closed(&self, n: u32, k: u32) -> Result<f64> {
        if k < 2 {
            return Err(Error::out_of_range("k", format!("need k >= 2, got {k}")));
        }
        Ok(match (n, k) {
            (0, k) => self.c0k(k)?,
            (1, 2) => self.dirichlet_form() / 6.0,
            (2, 2) => self.integral(&self.fv.norm_sqr()) / 12.0,
            (3, 2) => spectral::dirichlet_form_of_field(&self.fv, self.alpha)? / 20.0,
            (1, 3) => 2.0 * self.product_integral(&[&self.v_sq, &self.fv]) / 24.0,
            (2, 3) => {
                let a = self.product_integral(&[&self.v, &self.fv.norm_sqr()]);
                let b = self.product_integral(&[&self.v_sq, &self.f2v]);
                (2.0 * a + 4.0 * b) / 120.0
            }
            (1, 4) => {
                let a = self.product_integral(&[&self.v_sq, &self.v, &self.fv]);
                let e = spectral::dirichlet_form_of_field(&self.v_sq_hat, self.alpha)?;
                (2.0 * a + e) / 120.0
            }
            _ => {
                return Err(Error::RouteUnavailable(format!(
                    "no closed form for C_{{{n},{k}}}; closed forms exist for n + k <= 5"
                )))
            }
        })
    }

    /// `C_{n,k}` from the frequency-lattice formula.
    pub fn cnk_fourier(&self, n: u32, k: u32) -> Result<f64> {
        cnk_lattice(&self.potential, &self.grid, self.alpha, n, k)
    }

    /// `C_ℓ`, `1 ≤ ℓ ≤ 5`, from the closed forms.
    pub fn c_ell(&self, ell: u32) -> Result<f64> {
        match ell {
            1 => Ok(self.c1()),
            2 => Ok(self.c2()),
            3 => Ok(self.c3_closed()),
            4 => Ok(self.c4_closed()),
            5 => Ok(self.c5_closed()),
            _ => Err(Error::RouteUnavailable(format!(
                "C_{ell} is available for 1 <= l <= 5 only"
            ))),
        }
    }

    /// `C_ℓ = Σ_{n+k=ℓ} C_{n,k}/n!` with the lattice route for `k ∈ {2,3}`,
    /// analytic `C_{0,k}`, and the reduced closed form for `C_{1,4}`.
    pub fn c_ell_decomposed(&self, ell: u32) -> Result<f64> {
        if !(2..=5).contains(&ell) {
            return Err(Error::RouteUnavailable(format!(
                "decomposition is available for 2 <= l <= 5, got {ell}"
            )));
        }
        let mut total = 0.0;
        for k in 2..=ell {
            let n = ell - k;
            let value = match (n, k) {
                (0, _) => self.c0k(k)?,
                (1, 4) => self.cnk_closed(1, 4)?,
                _ => self.cnk_fourier(n, k)?,
            };
            total += value / factorial(n);
        }
        Ok(total)
    }

    /// `-t C_1 + Σ_{ℓ=2}^{N} (-t)^ℓ C_ℓ`.
    pub fn partial_sum(&self, order: u32, t: f64) -> Result<f64> {
        let coeffs = self.coefficients(order)?;
        Ok(partial_sum_from(&coeffs, t))
    }

    /// `[C_1, …, C_N]` for `1 ≤ N ≤ 5`.
    pub fn coefficients(&self, order: u32) -> Result<Vec<f64>> {
        if !(1..=5).contains(&order) {
            return Err(Error::out_of_range("N", format!("need 1 <= N <= 5, got {order}")));
        }
        (1..=order).map(|l| self.c_ell(l)).collect()
    }

    /// Second Dyson term `T_2(t) = (2π)^{-d} ∫ |V̂(θ)|² ψ(t|θ|^α) dθ`, so that
    /// `Q(t) = -t C_1 + t² T_2(t) + R_3(t)`.
    pub fn t2_exact(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::out_of_range("t", format!("need t >= 0, got {t}")));
        }
        let sum: f64 = (0..self.grid.len())
            .map(|i| {
                let xi = self.grid.frequency(i);
                let r = self.magnitudes[i];
                let u = if r == 0.0 { 0.0 } else { t * r.powf(self.alpha) };
                self.potential.fourier_unchecked(&xi).norm_sqr() * psi(u)
            })
            .sum();
        Ok(sum * self.grid.frequency_measure())
    }

    /// Full table: `C_1..C_5` by closed forms, `C_4`/`C_5` by sums of
    /// squares, every closed `C_{n,k}` with `n+k ≤ 5`, and the lattice route
    /// wherever it is available for this dimension.
    pub fn table(&self, provenance: &str) -> Result<CoefficientTable> {
        let grid = Some(GridDescriptor::from(&self.grid));
        let mut entries = Vec::new();
        let mut push = |label: String, value: f64, route: Route, grid: Option<GridDescriptor>| {
            entries.push(TableEntry {
                label,
                value,
                route,
                grid,
            })
        };
        push("C_1".into(), self.c1(), Route::Analytic, None);
        push("C_2".into(), self.c2(), Route::Analytic, None);
        push("C_3".into(), self.c3_closed(), Route::ClosedForm, grid);
        push("C_4".into(), self.c4_closed(), Route::ClosedForm, grid);
        push("C_5".into(), self.c5_closed(), Route::ClosedForm, grid);
        push("C_4".into(), self.c4_sos(), Route::Sos, grid);
        push("C_5".into(), self.c5_sos(), Route::Sos, grid);
        for ell in 3..=5 {
            if let Ok(v) = self.c_ell_decomposed(ell) {
                push(format!("C_{ell}"), v, Route::FourierGrid, grid);
            }
        }
        push("E_alpha(V)".into(), self.dirichlet_form(), Route::ClosedForm, grid);
        for ell in 2..=5u32 {
            for k in 2..=ell {
                let n = ell - k;
                let label = format!("C_{{{n},{k}}}");
                if n == 0 {
                    push(label, self.c0k(k)?, Route::Analytic, None);
                    continue;
                }
                push(label.clone(), self.cnk_closed(n, k)?, Route::ClosedForm, grid);
                if k <= 3 {
                    if let Ok(v) = self.cnk_fourier(n, k) {
                        push(label, v, Route::FourierGrid, grid);
                    }
                }
            }
        }
        Ok(CoefficientTable {
            alpha: self.alpha,
            entries,
            provenance: provenance.to_string(),
        })
    }
}

pub fn partial_sum_from(coeffs: &[f64], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| (-t).powi(i as i32 + 1) * c)
        .sum()
}

/// `C_{0,k} = (1/k!) ∫ V^k`.
pub fn c0k(v: &GaussianMixturePotential, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::out_of_range("k", format!("need k >= 2, got {k}")));
    }
    Ok(v.integral_of_power(k) / factorial(k))
}

/// `C_{n,k} = Σ_ℓ A(n,ℓ) ∫ V̂(-Σθ_i) ∏ V̂(θ_i) ∏ |Σ_{m≤i} θ_m|^{αℓ_i} đθ` as a
/// nested sum over the frequency lattice of `grid`, with the analytic `V̂`.
pub fn cnk_lattice(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, n: u32, k: u32) -> Result<f64> {
    check_alpha(alpha)?;
    if v.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: v.dimension(),
        });
    }
    let d = grid.dimension();
    let supported = "k = 2 with d <= 2, k = 3 with d = 1 (n <= 6), or n = 0 with any k >= 2";
    if k < 2 {
        return Err(Error::out_of_range("k", format!("need k >= 2, got {k}")));
    }
    if n == 0 && k >= 4 {
        return c0k(v, k);
    }
    if n > MAX_LATTICE_ORDER || k > 3 || d * (k as usize - 1) > 2 {
        return Err(Error::RouteUnavailable(format!(
            "lattice route for (n={n}, k={k}, d={d}) is not supported; supported: {supported}"
        )));
    }
    let measure = grid.frequency_measure();
    let sum = if k == 2 {
        let w = weight_a(&crate::simplex_weights::Composition::new(vec![n])).to_f64();
        let power = alpha * n as f64;
        let s: Complex64 = (0..grid.len())
            .map(|i| {
                let xi = grid.frequency(i);
                let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
                let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.fourier_unchecked(&neg) * v.fourier_unchecked(&xi) * r.powf(power)
            })
            .sum();
        s * (w * measure)
    } else {
        lattice_k3(v, grid, alpha, n) * (measure * measure)
    };
    if sum.im.abs() > IMAGINARY_LIMIT {
        return Err(Error::ImaginaryResidual {
            residual: sum.im.abs(),
            limit: IMAGINARY_LIMIT,
        });
    }
    Ok(sum.re)
}

fn lattice_k3(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, n: u32) -> Complex64 {
    let npts = grid.points_per_axis() as i64;
    let dxi = grid.frequency_spacing();
    let half = npts / 2;
    // θ = m Δξ for m in [-N/2, N/2); sums m1 + m2 in [-N, N - 2].
    let hat = |m: i64| v.fourier_unchecked(&[m as f64 * dxi]);
    let singles: Vec<Complex64> = (-half..half).map(hat).collect();
    let neg_sums: Vec<Complex64> = (-npts..npts - 1).map(|s| hat(-s)).collect();
    let weights: Vec<(f64, f64, f64)> = enumerate_compositions(n, 2)
        .into_iter()
        .map(|c| {
            let p = c.parts();
            (weight_a(&c).to_f64(), alpha * p[0] as f64, alpha * p[1] as f64)
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for (i1, m1) in (-half..half).enumerate() {
        let r1 = (m1 as f64 * dxi).abs();
        let mut row = Complex64::new(0.0, 0.0);
        for (i2, m2) in (-half..half).enumerate() {
            let s = m1 + m2;
            let r12 = (s as f64 * dxi).abs();
            let multiplier: f64 = weights.iter().map(|&(w, p1, p2)| w * r1.powf(p1) * r12.powf(p2)).sum();
            row += singles[i2] * neg_sums[(s + npts) as usize] * multiplier;
        }
        total += singles[i1] * row;
    }
    total
}

// Free-function forms, each over a fresh engine.

pub fn cnk_fourier(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, n: u32, k: u32) -> Result<f64> {
    cnk_lattice(v, grid, alpha, n, k)
}

pub fn c3_closed(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    Ok(CoefficientEngine::new(v, grid, alpha)?.c3_closed())
}

pub fn c4_closed(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    Ok(CoefficientEngine::new(v, grid, alpha)?.c4_closed())
}

pub fn c5_closed(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    Ok(CoefficientEngine::new(v, grid, alpha)?.c5_closed())
}

pub fn c4_sos(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    Ok(CoefficientEngine::new(v, grid, alpha)?.c4_sos())
}

pub fn c5_sos(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    Ok(CoefficientEngine::new(v, grid, alpha)?.c5_sos())
}

pub fn c_ell(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, ell: u32) -> Result<f64> {
    CoefficientEngine::new(v, grid, alpha)?.c_ell(ell)
}

pub fn partial_sum(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, order: u32, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::out_of_range("t", format!("need t > 0, got {t}")));
    }
    CoefficientEngine::new(v, grid, alpha)?.partial_sum(order, t)
}

pub fn t2_exact(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, t: f64) -> Result<f64> {
    CoefficientEngine::new(v, grid, alpha)?.t2_exact(t)
}

/// `(2π)^{-d}`, exposed for callers assembling Fourier-side integrals.
pub fn inverse_two_pi_d(d: usize) -> f64 {
    (2.0 * PI).powi(-(d as i32))
}
