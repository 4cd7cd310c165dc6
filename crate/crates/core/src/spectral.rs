//! Discrete Fourier calculus on the periodic box `[-L, L)^d`.
//!
//! Nodes are `x_k = -L + k h` with `h = 2L/N`; frequencies are
//! `ξ_m = (π/L) m` with `m ∈ {-N/2, …, N/2-1}`. Frequency-space fields are
//! stored in FFT order along every axis: index `j` holds `m = j` for
//! `j < N/2` and `m = j - N` otherwise. Both spaces use row-major order with
//! axis 0 slowest.
//!
//! The forward transform approximates `V̂(ξ) = ∫ e^{-i x·ξ} V(x) dx` and the
//! inverse includes the `(2π)^{-d}` of the inversion formula, so lattice
//! values are directly comparable with analytic transforms.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::GaussianMixturePotential;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    dimension: usize,
    points_per_axis: usize,
    half_extent: f64,
}

impl SpectralGrid {
    pub fn new(dimension: usize, points_per_axis: usize, half_extent: f64) -> Result<Self> {
        if !(1..=3).contains(&dimension) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dimension}")));
        }
        if points_per_axis < 16 || !points_per_axis.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 16, got {points_per_axis}"
            )));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::InvalidGrid(format!("half extent must be positive, got {half_extent}")));
        }
        Ok(SpectralGrid {
            dimension,
            points_per_axis,
            half_extent,
        })
    }

    /// Default resolution: `(256, 16)` in 1-d, `(128, 12)` in 2-d and
    /// `(64, 10)` in 3-d.
    pub fn default_for(dimension: usize) -> Result<Self> {
        match dimension {
            1 => Self::new(1, 256, 16.0),
            2 => Self::new(2, 128, 12.0),
            3 => Self::new(3, 64, 10.0),
            d => Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {d}"))),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.points_per_axis as f64
    }

    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_extent
    }

    /// Total node count `N^d`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// `(Δξ / 2π)^d`, the lattice measure for `đξ = (2π)^{-d} dξ`.
    pub fn frequency_measure(&self) -> f64 {
        (self.frequency_spacing() / (2.0 * PI)).powi(self.dimension as i32)
    }

    /// Physical coordinates of the node with flat index `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(flat)
            .into_iter()
            .map(|k| -self.half_extent + k as f64 * h)
            .collect()
    }

    /// Signed lattice index `m` of FFT-order position `j`.
    pub fn signed_index(&self, j: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Frequency vector of the FFT-order flat index `flat`.
    pub fn frequency(&self, flat: usize) -> Vec<f64> {
        let dxi = self.frequency_spacing();
        self.multi_index(flat)
            .into_iter()
            .map(|j| self.signed_index(j) as f64 * dxi)
            .collect()
    }

    /// `|ξ|` for every frequency-space flat index.
    pub fn frequency_magnitudes(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.frequency(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// Flat index of the frequency `-ξ` (the Nyquist index maps to itself).
    pub fn negated_index(&self, flat: usize) -> usize {
        let n = self.points_per_axis;
        let idx: Vec<usize> = self.multi_index(flat).into_iter().map(|j| (n - j) % n).collect();
        self.flat_index(&idx)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis;
        let mut idx = vec![0; self.dimension];
        for slot in idx.iter_mut().rev() {
            *slot = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &j| acc * self.points_per_axis + j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Physical,
    Frequency,
}

impl SpaceTag {
    fn name(self) -> &'static str {
        match self {
            SpaceTag::Physical => "physical",
            SpaceTag::Frequency => "frequency",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: SpectralGrid,
    values: Vec<Complex64>,
    space: SpaceTag,
}

impl GridField {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>, space: SpaceTag) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridField { grid, values, space })
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| Complex64::new(f(&grid.node(i)), 0.0)).collect();
        GridField {
            grid,
            values,
            space: SpaceTag::Physical,
        }
    }

    pub fn zeros(grid: SpectralGrid, space: SpaceTag) -> Self {
        GridField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            space,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn space(&self) -> SpaceTag {
        self.space
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    fn expect_space(&self, expected: SpaceTag) -> Result<()> {
        if self.space != expected {
            return Err(Error::WrongSpace {
                expected: expected.name(),
                found: self.space.name(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &GridField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<GridField> {
        if self.grid != other.grid || self.space != other.space {
            return Err(Error::InvalidGrid("fields live on different grids or spaces".into()));
        }
        Ok(GridField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
            space: self.space,
        })
    }

    /// Pointwise product (same grid and space).
    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
            space: self.space,
        }
    }

    /// `|f|²` pointwise.
    pub fn norm_sqr(&self) -> GridField {
        GridField {
            grid: self.grid,
            values: self.values.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect(),
            space: self.space,
        }
    }

    /// Writes the field as a little-endian binary dump.
    ///
    /// Layout: magic `b"HLGF"`, `u32` format version (1), `u32` dimension,
    /// `u32` points per axis, `f64` half extent, `u8` space tag
    /// (0 physical, 1 frequency), then `N^d` pairs of `f64` (re, im) in the
    /// field's storage order.
    pub fn write_debug_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"HLGF")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.grid.dimension as u32).to_le_bytes())?;
        w.write_all(&(self.grid.points_per_axis as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_extent.to_le_bytes())?;
        w.write_all(&[matches!(self.space, SpaceTag::Frequency) as u8])?;
        for v in &self.values {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::out_of_range("alpha", format!("need 0 < alpha <= 2, got {alpha}")));
    }
    Ok(())
}

/// Unnormalized multi-dimensional FFT, axis by axis.
fn fft_in_place(grid: &SpectralGrid, values: &mut [Complex64], direction: FftDirection) {
    let n = grid.points_per_axis;
    let d = grid.dimension;
    let fft = FftPlanner::new().plan_fft(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for start in 0..values.len() {
            // Visit each line once: its first element has axis index 0.
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = values[start + k * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (k, v) in line.iter().enumerate() {
                values[start + k * stride] = *v;
            }
        }
    }
}

/// `(-1)^{Σ j}` for the multi-index of `flat`: the centering phase from
/// nodes starting at `-L`.
fn checkerboard(grid: &SpectralGrid, flat: usize) -> f64 {
    if grid.multi_index(flat).iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn sample_on_grid(v: &GaussianMixturePotential, grid: &SpectralGrid) -> Result<GridField> {
    if v.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: v.dimension(),
        });
    }
    Ok(GridField::from_fn(*grid, |x| v.value(x)))
}

/// Analytic `V̂` sampled on the frequency lattice (FFT order).
pub fn analytic_transform_on_grid(v: &GaussianMixturePotential, grid: &SpectralGrid) -> Result<GridField> {
    if v.dimension() != grid.dimension() {
        return Err(Error::DimensionMismatch {
            expected: grid.dimension(),
            got: v.dimension(),
        });
    }
    let values = (0..grid.len()).map(|i| v.fourier_unchecked(&grid.frequency(i))).collect();
    GridField::new(*grid, values, SpaceTag::Frequency)
}

pub fn forward_transform(f: &GridField) -> Result<GridField> {
    f.expect_space(SpaceTag::Physical)?;
    let grid = f.grid;
    let mut values = f.values.clone();
    fft_in_place(&grid, &mut values, FftDirection::Forward);
    let scale = grid.cell_volume();
    for (i, v) in values.iter_mut().enumerate() {
        *v *= scale * checkerboard(&grid, i);
    }
    GridField::new(grid, values, SpaceTag::Frequency)
}

pub fn inverse_transform(f: &GridField) -> Result<GridField> {
    f.expect_space(SpaceTag::Frequency)?;
    let grid = f.grid;
    let mut values: Vec<Complex64> = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * checkerboard(&grid, i))
        .collect();
    fft_in_place(&grid, &mut values, FftDirection::Inverse);
    let scale = 1.0 / (grid.len() as f64 * grid.cell_volume());
    for v in values.iter_mut() {
        *v *= scale;
    }
    GridField::new(grid, values, SpaceTag::Physical)
}

/// Multiplies a frequency-space field by `|ξ|^power`; the zero frequency
/// gets 0.
pub fn apply_symbol_power(f: &GridField, power: f64) -> Result<GridField> {
    f.expect_space(SpaceTag::Frequency)?;
    let mags = f.grid.frequency_magnitudes();
    let values = f
        .values
        .iter()
        .zip(&mags)
        .map(|(v, &r)| if r == 0.0 { Complex64::new(0.0, 0.0) } else { v * r.powf(power) })
        .collect();
    GridField::new(f.grid, values, SpaceTag::Frequency)
}

/// `((-Δ)^{α/2})^j` applied to a physical-space field.
pub fn fractional_laplacian_of_field(f: &GridField, alpha: f64, j: u32) -> Result<GridField> {
    check_alpha(alpha)?;
    if j == 0 {
        return Err(Error::out_of_range("j", "need j >= 1"));
    }
    inverse_transform(&apply_symbol_power(&forward_transform(f)?, alpha * j as f64)?)
}

/// `F_j V = ((-Δ)^{α/2})^j V` on the grid.
pub fn apply_fractional_laplacian(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64, j: u32) -> Result<GridField> {
    check_alpha(alpha)?;
    fractional_laplacian_of_field(&sample_on_grid(v, grid)?, alpha, j)
}

/// `E_α(f) = (2π)^{-d} ∫ |f̂(ξ)|² |ξ|^α dξ` as a lattice sum; accepts either
/// space.
pub fn dirichlet_form_of_field(f: &GridField, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let spectrum = match f.space {
        SpaceTag::Physical => forward_transform(f)?,
        SpaceTag::Frequency => f.clone(),
    };
    let mags = spectrum.grid.frequency_magnitudes();
    let sum: f64 = spectrum
        .values
        .iter()
        .zip(&mags)
        .map(|(v, &r)| if r == 0.0 { 0.0 } else { v.norm_sqr() * r.powf(alpha) })
        .sum();
    Ok(sum * spectrum.grid.frequency_measure())
}

pub fn dirichlet_form(v: &GaussianMixturePotential, grid: &SpectralGrid, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    dirichlet_form_of_field(&sample_on_grid(v, grid)?, alpha)
}

/// `h^d Σ f(x_k)`.
pub fn grid_integral(f: &GridField) -> Result<Complex64> {
    f.expect_space(SpaceTag::Physical)?;
    Ok(f.values.iter().sum::<Complex64>() * f.grid.cell_volume())
}

/// Real part of [`grid_integral`], for fields known to be real.
pub fn grid_integral_re(f: &GridField) -> Result<f64> {
    grid_integral(f).map(|c| c.re)
}
