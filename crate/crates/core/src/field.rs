//! Spatial grid, the single-trajectory c-field state and its observables.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::K_CODE;

/// Minimum resolution needed for the cos(2kz) density structure.
pub const MIN_POINTS_PER_WAVELENGTH: usize = 8;

/// Periodic 1D grid. Lengths are in wavelengths, positions centred on zero.
#[derive(Debug, Clone)]
pub struct Grid {
    pub length: f64,
    pub n_points: usize,
    pub spacing: f64,
    pub positions: Vec<f64>,
    /// Spectral coordinates in FFT order.
    pub wavenumbers: Vec<f64>,
    n_wavelengths: usize,
    cos_kz: Vec<f64>,
    cos2_kz: Vec<f64>,
}

impl Grid {
    pub fn new(n_wavelengths: usize, points_per_wavelength: usize) -> Result<Self> {
        if n_wavelengths == 0 {
            return Err(Error::InvalidGrid("box must span at least one wavelength".into()));
        }
        if points_per_wavelength < MIN_POINTS_PER_WAVELENGTH {
            return Err(Error::InvalidGrid(format!(
                "{points_per_wavelength} points per wavelength, need at least {MIN_POINTS_PER_WAVELENGTH}"
            )));
        }
        if points_per_wavelength % 2 != 0 {
            return Err(Error::InvalidGrid("points per wavelength must be even".into()));
        }
        let n_points = n_wavelengths * points_per_wavelength;
        if !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("{n_points} grid points is not a power of two")));
        }
        let length = n_wavelengths as f64;
        let spacing = length / n_points as f64;
        let positions: Vec<f64> = (0..n_points)
            .map(|j| -length / 2.0 + j as f64 * spacing)
            .collect();
        let dk = 2.0 * PI / length;
        let wavenumbers = (0..n_points)
            .map(|j| {
                let m = if j <= n_points / 2 { j as f64 } else { j as f64 - n_points as f64 };
                m * dk
            })
            .collect();
        let cos_kz: Vec<f64> = positions.iter().map(|z| (K_CODE * z).cos()).collect();
        let cos2_kz = cos_kz.iter().map(|c| c * c).collect();
        Ok(Grid {
            length,
            n_points,
            spacing,
            positions,
            wavenumbers,
            n_wavelengths,
            cos_kz,
            cos2_kz,
        })
    }

    pub fn n_wavelengths(&self) -> usize {
        self.n_wavelengths
    }

    pub fn points_per_wavelength(&self) -> usize {
        self.n_points / self.n_wavelengths
    }

    /// cos(kz_j) on the grid.
    pub fn cos_kz(&self) -> &[f64] {
        &self.cos_kz
    }

    /// cos²(kz_j) on the grid.
    pub fn cos2_kz(&self) -> &[f64] {
        &self.cos2_kz
    }

    /// Largest |k| on the grid.
    pub fn k_max(&self) -> f64 {
        PI / self.spacing
    }

    /// Index shift corresponding to a translation by λ/2.
    pub fn half_period_shift(&self) -> usize {
        self.points_per_wavelength() / 2
    }
}

/// Forward/inverse FFT pair. Plans are shareable across threads; each
/// user keeps its own scratch buffer.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); len]
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(data, scratch);
    }

    /// Inverse transform including the 1/n factor, so forward∘inverse = id.
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, scratch);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

/// One trajectory's state: condensate c-field ψ (Σ|ψ|²Δz = 1) and cavity amplitude α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CField {
    pub psi: Vec<Complex64>,
    pub alpha: Complex64,
    pub time: f64,
}

impl CField {
    pub fn uniform(grid: &Grid) -> Self {
        let amp = (1.0 / grid.length).sqrt();
        CField {
            psi: vec![Complex64::new(amp, 0.0); grid.n_points],
            alpha: Complex64::new(0.0, 0.0),
            time: 0.0,
        }
    }

    /// Builds a state from an arbitrary profile, normalizing it.
    pub fn from_profile(grid: &Grid, psi: Vec<Complex64>) -> Result<Self> {
        if psi.len() != grid.n_points {
            return Err(Error::InvalidGrid(format!(
                "profile has {} points, grid has {}",
                psi.len(),
                grid.n_points
            )));
        }
        let mut s = CField {
            psi,
            alpha: Complex64::new(0.0, 0.0),
            time: 0.0,
        };
        let n = s.norm(grid);
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParam("profile has zero or non-finite norm".into()));
        }
        s.scale(1.0 / n.sqrt());
        Ok(s)
    }

    pub fn norm(&self, grid: &Grid) -> f64 {
        self.psi.iter().map(|p| p.norm_sqr()).sum::<f64>() * grid.spacing
    }

    pub fn scale(&mut self, s: f64) {
        for p in self.psi.iter_mut() {
            *p *= s;
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|p| p.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.alpha.re.is_finite()
            && self.alpha.im.is_finite()
            && self.psi.iter().all(|p| p.re.is_finite() && p.im.is_finite())
    }

    /// Translates ψ by λ/2 (z → z + λ/2) on the periodic grid.
    pub fn half_period_translated(&self, grid: &Grid) -> CField {
        let mut out = self.clone();
        out.psi.rotate_left(grid.half_period_shift());
        out
    }
}

/// Θ = ⟨cos(kz)⟩; positive for the even density wave, negative for the odd one.
pub fn order_parameter(state: &CField, grid: &Grid) -> f64 {
    state
        .psi
        .iter()
        .zip(grid.cos_kz())
        .map(|(p, c)| c * p.norm_sqr())
        .sum::<f64>()
        * grid.spacing
}

/// B = ⟨cos²(kz)⟩, the overlap that shifts the dispersive cavity detuning.
pub fn bunching(state: &CField, grid: &Grid) -> f64 {
    state
        .psi
        .iter()
        .zip(grid.cos2_kz())
        .map(|(p, c)| c * p.norm_sqr())
        .sum::<f64>()
        * grid.spacing
}

/// Range of whole unit cells, counted from the left edge of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellWindow {
    pub start: usize,
    pub count: usize,
}

impl CellWindow {
    pub fn all(grid: &Grid) -> Self {
        CellWindow {
            start: 0,
            count: grid.n_wavelengths(),
        }
    }

    /// The `count` cells around the box centre.
    pub fn central(grid: &Grid, count: usize) -> Self {
        let count = count.min(grid.n_wavelengths()).max(1);
        CellWindow {
            start: (grid.n_wavelengths() - count) / 2,
            count,
        }
    }
}

/// Density folded onto one unit cell, z in wavelengths and ρ normalized to
/// unit area over the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub z: Vec<f64>,
    pub rho: Vec<f64>,
}

impl DensityProfile {
    /// Peak-to-trough ratio minus one; zero for a flat profile.
    pub fn modulation_depth(&self) -> f64 {
        let max = self.rho.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.rho.iter().cloned().fold(f64::MAX, f64::min);
        if min > 0.0 {
            max / min - 1.0
        } else {
            f64::INFINITY
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "z_over_lambda,rho_lambda")?;
        for (z, r) in self.z.iter().zip(&self.rho) {
            writeln!(w, "{z},{r}")?;
        }
        Ok(())
    }
}

pub fn density_snapshot(state: &CField, grid: &Grid, window: CellWindow) -> Result<DensityProfile> {
    let end = window.start + window.count;
    if window.count == 0 || end > grid.n_wavelengths() {
        return Err(Error::WindowOutOfRange {
            start: window.start,
            end,
            available: grid.n_wavelengths(),
        });
    }
    let ppw = grid.points_per_wavelength();
    let mut rho = vec![0.0; ppw];
    for cell in window.start..end {
        for (i, r) in rho.iter_mut().enumerate() {
            *r += state.psi[cell * ppw + i].norm_sqr();
        }
    }
    let area: f64 = rho.iter().sum::<f64>() * grid.spacing;
    if area > 0.0 {
        for r in rho.iter_mut() {
            *r /= area;
        }
    }
    let z0 = grid.positions[window.start * ppw];
    let z = (0..ppw).map(|i| z0 + i as f64 * grid.spacing - z0.floor()).collect();
    Ok(DensityProfile { z, rho })
}
