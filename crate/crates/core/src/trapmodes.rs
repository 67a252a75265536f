//! Trap-induced coupling between momentum modes.
//!
//! Lengths are in units of λ, energies in units of E_rec = ħω_rec, so
//! V(Δk) comes out in units of E_rec·λ.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CField, Grid, Spectral};
use crate::params::{derive_scales, SystemParams, K_CODE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapCoupling {
    /// ω/ω_rec.
    pub b: f64,
    /// Oscillator length.
    pub lz: f64,
    pub lambda: f64,
}

impl TrapCoupling {
    /// Coupling for a trap ratio b, with λ = 1.
    pub fn from_b(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParam(format!("trap ratio b must be positive, got {b}")));
        }
        Ok(TrapCoupling {
            b,
            lz: 1.0 / (PI * (2.0 * b).sqrt()),
            lambda: 1.0,
        })
    }

    pub fn from_params(p: &SystemParams) -> Result<Self> {
        Self::from_b(derive_scales(p).b)
    }
}

/// Gaussian stand-in for the harmonic potential, saturating at b.
pub fn v_eff(z: f64, tc: &TrapCoupling) -> f64 {
    let u = z / (tc.lz * tc.lambda);
    tc.b * (1.0 - (-0.5 * u * u).exp())
}

/// Fourier amplitude of the Gaussian well of `v_eff` at momentum transfer
/// Δk (in units of 1/λ): b·l_z·exp(−Δk²l_z²/2) = √b/(π√2)·exp(−Δk²l_z²/2).
/// The transform carries a 1/√(2π) and drops the k = 0 delta of the
/// constant offset.
pub fn v_of_dk(dk: f64, tc: &TrapCoupling) -> f64 {
    let lz = tc.lz * tc.lambda;
    tc.lambda * tc.b.sqrt() / (PI * 2f64.sqrt()) * (-0.5 * dk * dk * lz * lz).exp()
}

/// Coupling at Δk = π/λ: √b/(π√2)·exp(−1/4b).
pub fn vbar(tc: &TrapCoupling) -> f64 {
    tc.lambda * tc.b.sqrt() / (PI * 2f64.sqrt()) * (-0.25 / tc.b).exp()
}

/// (b, V̄) on `n` evenly spaced points of [lo, hi].
pub fn vbar_curve(lo: f64, hi: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if !(lo > 0.0 && hi >= lo) || n == 0 || (n == 1 && hi != lo) {
        return Err(Error::InvalidParam(format!("bad b range {lo}:{hi}:{n}")));
    }
    (0..n)
        .map(|i| {
            let b = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            Ok((b, vbar(&TrapCoupling::from_b(b)?)))
        })
        .collect()
}

pub fn write_vbar_csv<W: Write>(mut w: W, curve: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "b,vbar_over_erec_lambda")?;
    for (b, v) in curve {
        writeln!(w, "{b},{v:e}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumOccupations {
    /// Ascending wavenumbers in units of 1/λ.
    pub k: Vec<f64>,
    pub population: Vec<f64>,
    /// |k = 0⟩.
    pub k0: f64,
    /// |k = ±2π/λ⟩, both bins.
    pub k1: f64,
    pub residual: f64,
}

impl MomentumOccupations {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k_lambda,population")?;
        for (k, p) in self.k.iter().zip(&self.population) {
            writeln!(w, "{k},{p:e}")?;
        }
        Ok(())
    }
}

/// Plane-wave populations |ψ̃(k)|² of a state; they sum to its norm.
pub fn momentum_occupations(state: &CField, grid: &Grid) -> MomentumOccupations {
    let n = grid.n_points;
    let spectral = Spectral::new(n);
    let mut buf = state.psi.clone();
    let mut scratch = spectral.scratch();
    spectral.forward(&mut buf, &mut scratch);
    let scale = grid.spacing / grid.length;
    let mut pairs: Vec<(f64, f64)> = grid
        .wavenumbers
        .iter()
        .zip(&buf)
        .map(|(&k, a)| (k, a.norm_sqr() * grid.spacing * scale))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let dk = 2.0 * PI / grid.length;
    let near = |k: f64, target: f64| (k - target).abs() < 0.5 * dk;
    let mut k0 = 0.0;
    let mut k1 = 0.0;
    let mut total = 0.0;
    for &(k, p) in &pairs {
        total += p;
        if near(k, 0.0) {
            k0 += p;
        } else if near(k.abs(), K_CODE) {
            k1 += p;
        }
    }
    MomentumOccupations {
        k: pairs.iter().map(|p| p.0).collect(),
        population: pairs.iter().map(|p| p.1).collect(),
        k0,
        k1,
        residual: total - k0 - k1,
    }
}
