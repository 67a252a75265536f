//! Physical parameters and the internal unit system.
//!
//! Inputs are SI. Internally everything runs in units where ħ = m = λ = 1,
//! so the recoil frequency is 2π², the cavity wavenumber is 2π and one unit of
//! time is mλ²/ħ. [`CodeParams`] is the converted, dimensionless view consumed
//! by the integrator.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Mass of a ⁸⁷Rb atom (kg).
pub const RB87_MASS: f64 = 1.443_160_648e-25;

/// Recoil frequency in code units (ħk²/2m with ħ = m = λ = 1).
pub const RECOIL_CODE: f64 = 2.0 * PI * PI;

/// Cavity wavenumber in code units.
pub const K_CODE: f64 = 2.0 * PI;

const KHZ: f64 = 2.0 * PI * 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Atom number N_a.
    pub n_atoms: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Pump and cavity wavelength (m).
    pub wavelength: f64,
    /// ω_rec = 2π²ħ/mλ² (rad/s).
    pub recoil_freq: f64,
    /// Cavity field decay rate κ (rad/s).
    pub kappa: f64,
    /// Light shift per photon U0 (rad/s), negative.
    pub u0: f64,
    /// Effective pump-cavity detuning δ_eff (rad/s).
    pub delta_eff: f64,
    /// Harmonic trap frequency ω (rad/s).
    pub trap_freq: f64,
    /// 1D contact coupling g_aa (J m).
    pub g_contact: f64,
}

/// Energy and length scales derived from a parameter set (SI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    pub e_rec: f64,
    pub e_osc: f64,
    pub e_int: f64,
    /// Oscillator length l_z; infinite without a trap.
    pub osc_length: f64,
    /// b = λ²/(2π² l_z²) = E_osc/E_rec.
    pub b: f64,
}

/// Dimensionless parameters in code units (ħ = m = λ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n_atoms: f64,
    pub kappa: f64,
    pub u0: f64,
    pub delta_c: f64,
    pub delta_eff: f64,
    pub trap_freq: f64,
    /// g_aa per atom in code units; the mean-field term is `g_contact * n_atoms * |ψ|²`.
    pub g_contact: f64,
}

impl SystemParams {
    /// Builds a parameter set from the recoil frequency and mass; the
    /// wavelength follows from ω_rec = 2π²ħ/mλ².
    pub fn from_recoil(
        n_atoms: f64,
        mass: f64,
        recoil_freq: f64,
        kappa: f64,
        u0: f64,
        delta_eff: f64,
    ) -> Result<Self> {
        let wavelength = (2.0 * PI * PI * HBAR / (mass * recoil_freq)).sqrt();
        let p = SystemParams {
            n_atoms,
            mass,
            wavelength,
            recoil_freq,
            kappa,
            u0,
            delta_eff,
            trap_freq: 0.0,
            g_contact: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParam(msg.to_string()));
        let fields = [
            self.n_atoms,
            self.mass,
            self.wavelength,
            self.recoil_freq,
            self.kappa,
            self.u0,
            self.delta_eff,
            self.trap_freq,
            self.g_contact,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if self.n_atoms <= 0.0 {
            return bad("n_atoms must be positive");
        }
        if self.mass <= 0.0 || self.wavelength <= 0.0 || self.recoil_freq <= 0.0 {
            return bad("mass, wavelength and recoil frequency must be positive");
        }
        if self.u0 >= 0.0 {
            return bad("u0 must be negative (red-detuned pump)");
        }
        if self.kappa < 0.0 {
            return bad("kappa must be non-negative");
        }
        if self.trap_freq < 0.0 {
            return bad("trap_freq must be non-negative");
        }
        if self.g_contact < 0.0 {
            return bad("g_contact must be non-negative (attractive interactions unsupported)");
        }
        let expected = 2.0 * PI * PI * HBAR / (self.mass * self.wavelength * self.wavelength);
        if ((expected - self.recoil_freq) / self.recoil_freq).abs() > 1e-9 {
            return bad("recoil_freq inconsistent with mass and wavelength");
        }
        Ok(())
    }

    /// δ_C = δ_eff + N_a U0 / 2.
    pub fn delta_c(&self) -> f64 {
        self.delta_eff + self.n_atoms * self.u0 / 2.0
    }

    /// Seconds per code time unit (mλ²/ħ).
    pub fn time_unit(&self) -> f64 {
        self.mass * self.wavelength * self.wavelength / HBAR
    }

    /// Joules per code energy unit.
    pub fn energy_unit(&self) -> f64 {
        HBAR / self.time_unit()
    }

    pub fn to_code_time(&self, seconds: f64) -> f64 {
        seconds / self.time_unit()
    }

    pub fn from_code_time(&self, t: f64) -> f64 {
        t * self.time_unit()
    }

    pub fn to_code_freq(&self, omega: f64) -> f64 {
        omega * self.time_unit()
    }

    pub fn from_code_freq(&self, w: f64) -> f64 {
        w / self.time_unit()
    }

    /// Converts an ordinary frequency in kHz (ω/2π) to code units.
    pub fn khz_to_code(&self, khz: f64) -> f64 {
        self.to_code_freq(khz * KHZ)
    }

    pub fn code_to_khz(&self, w: f64) -> f64 {
        self.from_code_freq(w) / KHZ
    }

    pub fn ms_to_code(&self, ms: f64) -> f64 {
        self.to_code_time(ms * 1e-3)
    }

    pub fn code_to_ms(&self, t: f64) -> f64 {
        self.from_code_time(t) * 1e3
    }

    pub fn code(&self) -> CodeParams {
        let tu = self.time_unit();
        CodeParams {
            n_atoms: self.n_atoms,
            kappa: self.kappa * tu,
            u0: self.u0 * tu,
            delta_c: self.delta_c() * tu,
            delta_eff: self.delta_eff * tu,
            trap_freq: self.trap_freq * tu,
            g_contact: self.g_contact / (self.energy_unit() * self.wavelength),
        }
    }

    pub fn with_trap_freq(mut self, trap_freq: f64) -> Result<Self> {
        self.trap_freq = trap_freq;
        self.validate()?;
        Ok(self)
    }

    /// Sets ω = ħ/(m l_z²) from the oscillator length in wavelengths.
    /// Zero or infinite `lz_over_lambda` removes the trap.
    pub fn with_osc_length(self, lz_over_lambda: f64) -> Result<Self> {
        if lz_over_lambda.is_nan() || lz_over_lambda < 0.0 {
            return Err(Error::InvalidParam(format!(
                "oscillator length must be positive, got {lz_over_lambda}"
            )));
        }
        if lz_over_lambda == 0.0 || lz_over_lambda.is_infinite() {
            return self.with_trap_freq(0.0);
        }
        let lz = lz_over_lambda * self.wavelength;
        let w = HBAR / (self.mass * lz * lz);
        self.with_trap_freq(w)
    }

    /// Sets ω from E_osc/E_rec.
    pub fn with_e_osc_ratio(self, ratio: f64) -> Result<Self> {
        if !(ratio >= 0.0) || !ratio.is_finite() {
            return Err(Error::InvalidParam(format!(
                "E_osc/E_rec must be non-negative, got {ratio}"
            )));
        }
        let w = ratio * self.recoil_freq;
        self.with_trap_freq(w)
    }
}

/// Parameters of the Hamburg experiment; trap and contact interaction off.
pub fn default_experiment_params() -> SystemParams {
    SystemParams::from_recoil(
        65e3,
        RB87_MASS,
        3.55 * KHZ,
        4.55 * KHZ,
        -2.0 * PI * 0.36,
        -18.5 * KHZ,
    )
    .expect("experiment defaults are valid")
}

pub fn derive_scales(p: &SystemParams) -> DerivedScales {
    let e_rec = HBAR * p.recoil_freq;
    let e_osc = HBAR * p.trap_freq;
    let e_int = p.g_contact * p.n_atoms / p.wavelength;
    let (osc_length, b) = if p.trap_freq > 0.0 {
        let lz = (HBAR / (p.mass * p.trap_freq)).sqrt();
        (lz, p.wavelength * p.wavelength / (2.0 * PI * PI * lz * lz))
    } else {
        (f64::INFINITY, 0.0)
    };
    DerivedScales {
        e_rec,
        e_osc,
        e_int,
        osc_length,
        b,
    }
}

/// Chooses g_aa so that g_aa N_a / λ equals `e_int_over_e_rec` recoil energies.
pub fn set_interaction_energy(p: &SystemParams, e_int_over_e_rec: f64) -> Result<SystemParams> {
    if !(e_int_over_e_rec >= 0.0) || !e_int_over_e_rec.is_finite() {
        return Err(Error::InvalidParam(format!(
            "E_int/E_rec must be a non-negative number, got {e_int_over_e_rec}"
        )));
    }
    let mut out = *p;
    out.g_contact = e_int_over_e_rec * HBAR * p.recoil_freq * p.wavelength / p.n_atoms;
    out.validate()?;
    Ok(out)
}
