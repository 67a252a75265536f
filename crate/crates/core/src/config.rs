//! TOML run configuration. Every key is optional and defaults to the
//! experiment values; unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{ClassifyOptions, LifetimeOptions};
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::params::{set_interaction_energy, SystemParams, RB87_MASS};
use crate::protocol::{CritPumpOptions, PumpSchedule, DEFAULT_DRIVE_CYCLES, HOLD_END_MS, RAMP_MS};
use crate::sweep::{RunSettings, SweepSpec};

const KHZ: f64 = 2.0 * PI * 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub n_atoms: f64,
    pub recoil_khz: f64,
    pub kappa_khz: f64,
    pub u0_hz: f64,
    pub delta_eff_khz: f64,
    /// Oscillator length in wavelengths; mutually exclusive with
    /// `e_osc_over_e_rec`.
    pub lz_over_lambda: Option<f64>,
    pub e_osc_over_e_rec: Option<f64>,
    pub e_int_over_e_rec: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            n_atoms: 65e3,
            recoil_khz: 3.55,
            kappa_khz: 4.55,
            u0_hz: -0.36,
            delta_eff_khz: -18.5,
            lz_over_lambda: None,
            e_osc_over_e_rec: None,
            e_int_over_e_rec: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub wavelengths: usize,
    pub points_per_wavelength: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            wavelengths: 32,
            points_per_wavelength: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub f_d: f64,
    pub omega_d_khz: f64,
    pub epsilon_over_crit: f64,
    pub ramp_ms: f64,
    pub hold_end_ms: f64,
    pub cycles: usize,
}

impl Default for DriveSection {
    fn default() -> Self {
        DriveSection {
            f_d: 0.5,
            omega_d_khz: 4.0,
            epsilon_over_crit: 1.02,
            ramp_ms: RAMP_MS,
            hold_end_ms: HOLD_END_MS,
            cycles: DEFAULT_DRIVE_CYCLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub n_traj: usize,
    pub seed: u64,
    pub noise: bool,
    pub wigner: bool,
    pub samples_per_period: usize,
    pub max_dt: f64,
    pub seed_amplitude: f64,
    pub theta_threshold: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let s = RunSettings::default();
        RunSection {
            n_traj: 64,
            seed: 1,
            noise: s.noise,
            wigner: s.wigner,
            samples_per_period: s.samples_per_period,
            max_dt: s.max_dt,
            seed_amplitude: s.seed_amplitude,
            theta_threshold: s.theta_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub f_d: Vec<f64>,
    pub omega_d_khz: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            f_d: (2..=9).map(|i| i as f64 / 10.0).collect(),
            omega_d_khz: (1..=8).map(|i| i as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifySection {
    pub strobe_offset: f64,
    pub final_cycles: usize,
    pub initial_switches: usize,
    pub retention: f64,
    pub third_harmonic_ratio: f64,
    pub min_plateau_cycles: f64,
    pub plateau_slope_ratio: f64,
    pub envelope_floor: f64,
    pub censor_factor: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let c = ClassifyOptions::default();
        ClassifySection {
            strobe_offset: c.strobe_offset,
            final_cycles: c.final_cycles,
            initial_switches: c.initial_switches,
            retention: c.retention,
            third_harmonic_ratio: c.third_harmonic_ratio,
            min_plateau_cycles: c.lifetime.min_plateau_cycles,
            plateau_slope_ratio: c.lifetime.plateau_slope_ratio,
            envelope_floor: c.lifetime.floor,
            censor_factor: c.lifetime.censor_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CritSection {
    pub theta_threshold: f64,
    pub seed_amplitude: f64,
    pub readout_ms: f64,
    pub rel_tol: f64,
    pub dt: f64,
}

impl Default for CritSection {
    fn default() -> Self {
        let c = CritPumpOptions::default();
        CritSection {
            theta_threshold: c.theta_threshold,
            seed_amplitude: c.seed_amplitude,
            readout_ms: c.readout_ms,
            rel_tol: c.rel_tol,
            dt: c.dt,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub system: SystemSection,
    pub grid: GridSection,
    pub drive: DriveSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub classify: ClassifySection,
    pub crit: CritSection,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Switches to the full-size protocol: 10³ trajectories, 200 cycles and
    /// a fine drive grid.
    pub fn paper_scale(mut self) -> Self {
        self.run.n_traj = 1000;
        self.drive.cycles = DEFAULT_DRIVE_CYCLES;
        self.sweep.f_d = (2..=18).map(|i| i as f64 * 0.05).collect();
        self.sweep.omega_d_khz = (1..=20).map(|i| i as f64 * 0.5).collect();
        self
    }

    /// Checks everything that can be checked without running physics.
    pub fn validate(&self) -> Result<()> {
        let s = &self.system;
        if s.lz_over_lambda.is_some() && s.e_osc_over_e_rec.is_some() {
            return Err(Error::Config(
                "set at most one of system.lz_over_lambda and system.e_osc_over_e_rec".into(),
            ));
        }
        let params = self.params()?;
        self.grid()?;
        self.sweep_spec()?.validate()?;
        self.schedule(&params, 1.0)?;
        let d = &self.drive;
        if !(d.epsilon_over_crit > 0.0) {
            return Err(Error::Config("drive.epsilon_over_crit must be positive".into()));
        }
        if self.run.samples_per_period < 32 {
            return Err(Error::Config("run.samples_per_period must be at least 32".into()));
        }
        if !(self.run.max_dt > 0.0) {
            return Err(Error::Config("run.max_dt must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams> {
        let s = &self.system;
        let mut p = SystemParams::from_recoil(
            s.n_atoms,
            RB87_MASS,
            s.recoil_khz * KHZ,
            s.kappa_khz * KHZ,
            s.u0_hz * 2.0 * PI,
            s.delta_eff_khz * KHZ,
        )?;
        if let Some(lz) = s.lz_over_lambda {
            p = p.with_osc_length(lz)?;
        }
        if let Some(r) = s.e_osc_over_e_rec {
            p = p.with_e_osc_ratio(r)?;
        }
        set_interaction_energy(&p, s.e_int_over_e_rec)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.wavelengths, self.grid.points_per_wavelength)
    }

    pub fn settings(&self) -> RunSettings {
        let r = &self.run;
        RunSettings {
            samples_per_period: r.samples_per_period,
            max_dt: r.max_dt,
            noise: r.noise,
            wigner: r.wigner,
            seed_amplitude: r.seed_amplitude,
            theta_threshold: r.theta_threshold,
        }
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        let c = &self.classify;
        ClassifyOptions {
            strobe_offset: c.strobe_offset,
            final_cycles: c.final_cycles,
            initial_switches: c.initial_switches,
            amplitude_floor: 0.0,
            retention: c.retention,
            third_harmonic_ratio: c.third_harmonic_ratio,
            lifetime: LifetimeOptions {
                min_plateau_cycles: c.min_plateau_cycles,
                plateau_slope_ratio: c.plateau_slope_ratio,
                floor: c.envelope_floor,
                censor_factor: c.censor_factor,
            },
        }
    }

    pub fn crit_options(&self) -> CritPumpOptions {
        let c = &self.crit;
        CritPumpOptions {
            theta_threshold: c.theta_threshold,
            seed_amplitude: c.seed_amplitude,
            readout_ms: c.readout_ms,
            rel_tol: c.rel_tol,
            dt: c.dt,
            ..CritPumpOptions::default()
        }
    }

    /// Drive schedule for a given ε_crit (code units).
    pub fn schedule(&self, params: &SystemParams, epsilon_crit: f64) -> Result<PumpSchedule> {
        let d = &self.drive;
        PumpSchedule::new(
            params.ms_to_code(d.ramp_ms),
            params.ms_to_code(d.hold_end_ms),
            d.epsilon_over_crit * epsilon_crit,
            d.f_d,
            params.khz_to_code(d.omega_d_khz),
            d.cycles,
        )
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let p = self.params()?;
        let scales = crate::params::derive_scales(&p);
        Ok(SweepSpec {
            fd_grid: self.sweep.f_d.clone(),
            wd_khz_grid: self.sweep.omega_d_khz.clone(),
            e_int_over_e_rec: self.system.e_int_over_e_rec,
            e_osc_over_e_rec: scales.e_osc / scales.e_rec,
            n_traj: self.run.n_traj,
            master_seed: self.run.seed,
            drive_cycles: self.drive.cycles,
            epsilon_over_crit: self.drive.epsilon_over_crit,
            ramp_ms: self.drive.ramp_ms,
            hold_end_ms: self.drive.hold_end_ms,
            grid_wavelengths: self.grid.wavelengths,
            points_per_wavelength: self.grid.points_per_wavelength,
            settings: self.settings(),
            classify: self.classify_options(),
            crit: self.crit_options(),
            base: SystemParams { trap_freq: 0.0, g_contact: 0.0, ..p },
        })
    }
}
