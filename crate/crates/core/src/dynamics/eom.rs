use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{bunching, order_parameter, CField, Grid, Spectral};
use crate::params::{CodeParams, SystemParams};
use crate::protocol::PumpSchedule;

/// Largest phase any linear rate may accumulate in one step.
pub const STABILITY_BOUND: f64 = std::f64::consts::PI;

/// Everything a trajectory needs besides its state: parameters in code
/// units, the grid and its transform plans, the pump program and the
/// integration settings.
#[derive(Debug, Clone)]
pub struct EomContext {
    pub params: SystemParams,
    pub code: CodeParams,
    pub grid: Grid,
    pub pump: PumpSchedule,
    pub dt: f64,
    pub noise_on: bool,
    pub wigner_sampling_on: bool,
    pub spectral: Spectral,
    trap: Vec<f64>,
    kinetic: Vec<f64>,
}

impl EomContext {
    pub fn new(
        params: SystemParams,
        grid: Grid,
        pump: PumpSchedule,
        dt: f64,
        noise_on: bool,
        wigner_sampling_on: bool,
    ) -> Result<Self> {
        params.validate()?;
        pump.validate()?;
        let code = params.code();
        let kinetic: Vec<f64> = grid.wavenumbers.iter().map(|k| 0.5 * k * k).collect();
        let rate = code
            .delta_c
            .abs()
            .max(code.kappa)
            .max(0.5 * grid.k_max() * grid.k_max());
        if !(dt > 0.0) || !(dt * rate < STABILITY_BOUND) {
            return Err(Error::UnstableStep {
                dt,
                rate,
                bound: STABILITY_BOUND,
            });
        }
        let w2 = code.trap_freq * code.trap_freq;
        let trap = grid.positions.iter().map(|z| 0.5 * w2 * z * z).collect();
        let spectral = Spectral::new(grid.n_points);
        Ok(EomContext {
            params,
            code,
            grid,
            pump,
            dt,
            noise_on,
            wigner_sampling_on,
            spectral,
            trap,
            kinetic,
        })
    }

    /// ½ω²z² on the grid.
    pub fn trap_potential(&self) -> &[f64] {
        &self.trap
    }

    /// k²/2 in FFT order.
    pub fn kinetic_spectrum(&self) -> &[f64] {
        &self.kinetic
    }

    /// Pump coupling √(ε/ħ|U0|) at time t.
    pub fn pump_amplitude(&self, t: f64) -> f64 {
        self.pump_amplitude_for(self.pump.epsilon_at(t))
    }

    pub fn pump_amplitude_for(&self, epsilon: f64) -> f64 {
        (epsilon / self.code.u0.abs()).sqrt()
    }

    pub fn with_pump(&self, pump: PumpSchedule) -> Self {
        let mut c = self.clone();
        c.pump = pump;
        c
    }

    /// Applies the kinetic operator -½∂²_z spectrally.
    pub fn apply_kinetic(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut buf = psi.to_vec();
        let mut scratch = self.spectral.scratch();
        self.spectral.forward(&mut buf, &mut scratch);
        for (v, k) in buf.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.spectral.inverse(&mut buf, &mut scratch);
        buf
    }
}

/// Deterministic time derivative of (ψ, α).
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub psi: Vec<Complex64>,
    pub alpha: Complex64,
}

/// c-number drift
///
///   i ∂ψ/∂t = [-½∂² + ½ω²z² + gN|ψ|² + U0 cos²(kz)|α|² + 2U0 η cos(kz) Re α] ψ
///   dα/dt   = i(δ_C - U0 N B) α - i U0 N η Θ - κ α
///
/// with η = √(ε/|U0|). The Langevin term is not included.
pub fn drift(state: &CField, t: f64, ctx: &EomContext) -> Result<Drift> {
    if !state.is_finite() {
        return Err(Error::NonFinite {
            time: t,
            what: "drift evaluated on non-finite state".into(),
        });
    }
    let c = &ctx.code;
    let eta = ctx.pump_amplitude(t);
    let alpha = state.alpha;
    let kin = ctx.apply_kinetic(&state.psi);
    let gn = c.g_contact * c.n_atoms;
    let cav2 = c.u0 * alpha.norm_sqr();
    let cav1 = 2.0 * c.u0 * eta * alpha.re;
    let grid = &ctx.grid;
    let minus_i = Complex64::new(0.0, -1.0);
    let psi = state
        .psi
        .iter()
        .zip(&kin)
        .enumerate()
        .map(|(j, (p, kp))| {
            let v = ctx.trap[j]
                + gn * p.norm_sqr()
                + cav2 * grid.cos2_kz()[j]
                + cav1 * grid.cos_kz()[j];
            minus_i * (kp + v * p)
        })
        .collect();
    let theta = order_parameter(state, grid);
    let b = bunching(state, grid);
    let i = Complex64::new(0.0, 1.0);
    let dalpha = i * (c.delta_c - c.u0 * c.n_atoms * b) * alpha
        - i * (c.u0 * c.n_atoms * eta * theta)
        - c.kappa * alpha;
    Ok(Drift { psi, alpha: dalpha })
}

/// c-number Hamiltonian H(ψ, α) at pump ε, in code energy units, for the
/// field Ψ = √N ψ:
///
///   H = -δ_C|α|² + N⟨ψ|-½∂² + V|ψ⟩ + ½gN² ∫|ψ|⁴ + N U0 |α|² B + 2 N U0 η Θ Re α
pub fn energy(state: &CField, epsilon: f64, ctx: &EomContext) -> f64 {
    let c = &ctx.code;
    let grid = &ctx.grid;
    let n = c.n_atoms;
    let eta = ctx.pump_amplitude_for(epsilon);
    let kin = ctx.apply_kinetic(&state.psi);
    let mut single = 0.0;
    let mut quartic = 0.0;
    for (j, (p, kp)) in state.psi.iter().zip(&kin).enumerate() {
        single += (p.conj() * kp).re + ctx.trap[j] * p.norm_sqr();
        quartic += p.norm_sqr() * p.norm_sqr();
    }
    single *= grid.spacing;
    quartic *= grid.spacing;
    let a2 = state.alpha.norm_sqr();
    -c.delta_c * a2
        + n * single
        + 0.5 * c.g_contact * n * n * quartic
        + n * c.u0 * a2 * bunching(state, grid)
        + 2.0 * n * c.u0 * eta * order_parameter(state, grid) * state.alpha.re
}
