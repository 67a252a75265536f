//! Pump-intensity program and the critical-pump finder.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ground_state, EomContext, Stepper, GroundStateOptions};
use crate::error::{Error, Result};
use crate::field::{order_parameter, CField, Grid};
use crate::params::{SystemParams, K_CODE, RECOIL_CODE};

pub const RAMP_MS: f64 = 2.5;
pub const HOLD_END_MS: f64 = 30.0;
pub const DEFAULT_DRIVE_CYCLES: usize = 200;

/// Piecewise pump program in code units: linear ramp, hold, then
/// ε₀(1 + f_d sin(ω_d (t - t₀))) from t₀ = `hold_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSchedule {
    pub ramp_duration: f64,
    pub hold_end: f64,
    pub epsilon0: f64,
    pub f_d: f64,
    pub omega_d: f64,
    pub drive_cycles: usize,
}

impl PumpSchedule {
    pub fn new(
        ramp_duration: f64,
        hold_end: f64,
        epsilon0: f64,
        f_d: f64,
        omega_d: f64,
        drive_cycles: usize,
    ) -> Result<Self> {
        let s = PumpSchedule {
            ramp_duration,
            hold_end,
            epsilon0,
            f_d,
            omega_d,
            drive_cycles,
        };
        s.validate()?;
        Ok(s)
    }

    /// The experimental protocol: 2.5 ms ramp, hold until 30 ms, then drive.
    pub fn experiment(
        params: &SystemParams,
        epsilon0: f64,
        f_d: f64,
        omega_d_khz: f64,
        drive_cycles: usize,
    ) -> Result<Self> {
        Self::new(
            params.ms_to_code(RAMP_MS),
            params.ms_to_code(HOLD_END_MS),
            epsilon0,
            f_d,
            params.khz_to_code(omega_d_khz),
            drive_cycles,
        )
    }

    /// Constant pump ε₀ from t = 0 with no modulation.
    pub fn constant(epsilon0: f64) -> Self {
        PumpSchedule {
            ramp_duration: 0.0,
            hold_end: 0.0,
            epsilon0,
            f_d: 0.0,
            omega_d: 0.0,
            drive_cycles: 0,
        }
    }

    /// Ramp and hold only, no modulation phase.
    pub fn ramp_and_hold(ramp_duration: f64, hold_end: f64, epsilon0: f64) -> Result<Self> {
        Self::new(ramp_duration, hold_end, epsilon0, 0.0, 0.0, 0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.epsilon0 >= 0.0) || !self.epsilon0.is_finite() {
            return bad(format!("epsilon0 must be non-negative, got {}", self.epsilon0));
        }
        if !(0.0..=1.0).contains(&self.f_d) {
            return bad(format!("f_d must lie in [0, 1] so that the pump stays non-negative, got {}", self.f_d));
        }
        if !(self.ramp_duration >= 0.0) || !(self.hold_end >= self.ramp_duration) {
            return bad("need 0 <= ramp_duration <= hold_end".into());
        }
        if self.drive_cycles > 0 && !(self.omega_d > 0.0) {
            return bad("drive frequency must be positive".into());
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_d
    }

    /// t₀, the last instant before modulation.
    pub fn drive_start(&self) -> f64 {
        self.hold_end
    }

    pub fn end_time(&self) -> f64 {
        if self.drive_cycles == 0 {
            self.hold_end
        } else {
            self.hold_end + self.drive_cycles as f64 * self.period()
        }
    }

    pub fn epsilon_at(&self, t: f64) -> f64 {
        if t < self.ramp_duration {
            self.epsilon0 * t.max(0.0) / self.ramp_duration
        } else if t <= self.hold_end || self.f_d == 0.0 {
            self.epsilon0
        } else {
            self.epsilon0 * (1.0 + self.f_d * (self.omega_d * (t - self.hold_end)).sin())
        }
    }

    pub fn with_epsilon0(mut self, epsilon0: f64) -> Self {
        self.epsilon0 = epsilon0;
        self
    }
}

/// Homogeneous mean-field threshold of the ideal system,
/// ε = ω_rec(δ_eff² + κ²)/(2|U0| N_a |δ_eff|), in code units. Used to
/// bracket the numerical search.
pub fn homogeneous_threshold(params: &SystemParams) -> f64 {
    let c = params.code();
    RECOIL_CODE * (c.delta_eff * c.delta_eff + c.kappa * c.kappa)
        / (2.0 * c.u0.abs() * c.n_atoms * c.delta_eff.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CritPumpOptions {
    /// Organization threshold on |Θ|.
    pub theta_threshold: f64,
    /// Amplitude of the cos(kz) seed that breaks the mirror symmetry.
    pub seed_amplitude: f64,
    /// Read-out window at the end of the hold (ms).
    pub readout_ms: f64,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
    /// Integration step in code units.
    pub dt: f64,
    pub max_expansions: usize,
}

impl Default for CritPumpOptions {
    fn default() -> Self {
        CritPumpOptions {
            theta_threshold: 0.05,
            seed_amplitude: 1e-4,
            readout_ms: 5.0,
            rel_tol: 0.01,
            dt: 2e-3,
            max_expansions: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub epsilon: f64,
    pub mean_abs_theta: f64,
    pub organized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritPumpResult {
    pub epsilon_crit: f64,
    pub trace: Vec<ProbePoint>,
}

impl CritPumpResult {
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,epsilon,mean_abs_theta,organized")?;
        for (i, p) in self.trace.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", p.epsilon, p.mean_abs_theta, p.organized as u8)?;
        }
        Ok(())
    }
}

/// The mean-field initial state used by the threshold search: the ground
/// state with a small cos(kz) seed.
pub fn seeded_state(ground: &CField, grid: &Grid, amplitude: f64) -> Result<CField> {
    let psi = ground
        .psi
        .iter()
        .zip(&grid.positions)
        .map(|(p, z)| p * (1.0 + amplitude * (K_CODE * z).cos()))
        .collect::<Vec<Complex64>>();
    CField::from_profile(grid, psi)
}

/// Runs ramp + hold at pump `epsilon` without noise and reports the mean |Θ|
/// over the read-out window at the end of the hold.
pub fn probe_organization(
    params: &SystemParams,
    grid: &Grid,
    initial: &CField,
    epsilon: f64,
    opts: &CritPumpOptions,
) -> Result<ProbePoint> {
    let schedule = PumpSchedule::ramp_and_hold(
        params.ms_to_code(RAMP_MS),
        params.ms_to_code(HOLD_END_MS),
        epsilon,
    )?;
    let ctx = EomContext::new(*params, grid.clone(), schedule, opts.dt, false, false)?;
    let mut stepper = Stepper::new(&ctx, 0);
    let mut state = initial.clone();
    state.time = 0.0;
    let n_steps = (schedule.hold_end / opts.dt).round() as usize;
    let readout_start = schedule.hold_end - params.ms_to_code(opts.readout_ms);
    let mut sum = 0.0;
    let mut count = 0usize;
    stepper.evolve(&mut state, n_steps, 10, |s: &CField| {
        if s.time >= readout_start {
            sum += order_parameter(s, grid).abs();
            count += 1;
        }
    })?;
    let mean_abs_theta = if count > 0 { sum / count as f64 } else { 0.0 };
    Ok(ProbePoint {
        epsilon,
        mean_abs_theta,
        organized: mean_abs_theta > opts.theta_threshold,
    })
}

/// Bisects for the smallest pump that self-organizes the cloud within the
/// ramp + hold window. Returns the organizing end of the final bracket.
pub fn find_critical_pump(
    params: &SystemParams,
    grid: &Grid,
    opts: &CritPumpOptions,
) -> Result<CritPumpResult> {
    let ground = ground_state(params, grid, &GroundStateOptions::default())?;
    let initial = seeded_state(&ground, grid, opts.seed_amplitude)?;
    let mut trace = Vec::new();
    let probe = |eps: f64, trace: &mut Vec<ProbePoint>| -> Result<bool> {
        let p = probe_organization(params, grid, &initial, eps, opts)?;
        trace.push(p);
        Ok(p.organized)
    };

    let guess = homogeneous_threshold(params);
    let mut lo = 0.8 * guess;
    let mut hi = 1.25 * guess;
    let mut expansions = 0;
    while probe(lo, &mut trace)? {
        hi = lo;
        lo *= 0.5;
        expansions += 1;
        if expansions > opts.max_expansions {
            return Err(Error::Bracket { lo, hi });
        }
    }
    while !probe(hi, &mut trace)? {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > opts.max_expansions {
            return Err(Error::Bracket { lo, hi });
        }
    }
    while (hi - lo) / hi > opts.rel_tol {
        let mid = 0.5 * (lo + hi);
        if probe(mid, &mut trace)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CritPumpResult {
        epsilon_crit: hi,
        trace,
    })
}
