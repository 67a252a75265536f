use num_complex::Complex64;

use super::eom::EomContext;
use super::integrator::Stepper;
use crate::error::{Error, Result};
use crate::field::{CField, Grid};
use crate::params::SystemParams;
use crate::protocol::PumpSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    /// Imaginary time step (code units).
    pub dtau: f64,
    /// Converged when |ΔE/E| per unit imaginary time drops below this.
    pub tol: f64,
    pub max_steps: usize,
    pub check_every: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        GroundStateOptions {
            dtau: 2e-3,
            tol: 1e-11,
            max_steps: 2_000_000,
            check_every: 200,
        }
    }
}

/// Normalized Gaussian density exp(-z²/l_z²) on the grid.
pub fn gaussian_density(grid: &Grid, lz: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid.positions.iter().map(|z| (-(z * z) / (lz * lz)).exp()).collect();
    let s: f64 = raw.iter().sum::<f64>() * grid.spacing;
    raw.into_iter().map(|r| r / s).collect()
}

/// Thomas-Fermi chemical potential for a harmonic trap in code units:
/// μ = (3 gN ω / 4√2)^{2/3}.
pub fn thomas_fermi_mu(gn: f64, omega: f64) -> f64 {
    (3.0 * gn * omega / (4.0 * std::f64::consts::SQRT_2)).powf(2.0 / 3.0)
}

/// Thomas-Fermi density max(μ - ½ω²z², 0)/gN, normalized to one.
pub fn thomas_fermi_density(params: &SystemParams, grid: &Grid) -> Vec<f64> {
    let c = params.code();
    let gn = c.g_contact * c.n_atoms;
    let mu = thomas_fermi_mu(gn, c.trap_freq);
    let raw: Vec<f64> = grid
        .positions
        .iter()
        .map(|z| ((mu - 0.5 * c.trap_freq * c.trap_freq * z * z) / gn).max(0.0))
        .collect();
    let s: f64 = raw.iter().sum::<f64>() * grid.spacing;
    raw.into_iter().map(|r| r / s).collect()
}

fn gp_energy(psi: &[Complex64], ctx: &EomContext) -> f64 {
    let kin = ctx.apply_kinetic(psi);
    let gn = ctx.code.g_contact * ctx.code.n_atoms;
    let trap = ctx.trap_potential();
    let mut e = 0.0;
    for (j, (p, kp)) in psi.iter().zip(&kin).enumerate() {
        let d = p.norm_sqr();
        e += (p.conj() * kp).re + trap[j] * d + 0.5 * gn * d * d;
    }
    e * ctx.grid.spacing
}

/// Ground state of the trapped, interacting condensate without pump, by
/// imaginary-time split-step propagation with renormalization after every
/// step. The initial guess is uniform without a trap, the oscillator
/// Gaussian when the Thomas-Fermi chemical potential is below ω, and the
/// Thomas-Fermi profile otherwise.
pub fn ground_state(params: &SystemParams, grid: &Grid, opts: &GroundStateOptions) -> Result<CField> {
    let c = params.code();
    if c.trap_freq == 0.0 {
        return Ok(CField::uniform(grid));
    }
    let gn = c.g_contact * c.n_atoms;
    let lz = (1.0 / c.trap_freq).sqrt();
    let guess = if gn == 0.0 || thomas_fermi_mu(gn, c.trap_freq) < c.trap_freq {
        gaussian_density(grid, lz)
    } else {
        let tf = thomas_fermi_density(params, grid);
        let peak = tf.iter().cloned().fold(0.0, f64::max);
        tf.into_iter().map(|r| r + 1e-6 * peak).collect()
    };
    let psi = guess.iter().map(|r| Complex64::new(r.sqrt(), 0.0)).collect();
    let mut state = CField::from_profile(grid, psi)?;

    // reuse the context for plans and potentials; the pump is irrelevant
    let ctx = EomContext::new(*params, grid.clone(), PumpSchedule::constant(0.0), opts.dtau, false, false)?;
    let dtau = opts.dtau;
    let kin_half: Vec<f64> = ctx.kinetic_spectrum().iter().map(|e| (-e * 0.5 * dtau).exp()).collect();
    let trap = ctx.trap_potential().to_vec();
    let mut scratch = ctx.spectral.scratch();
    let kinetic = |psi: &mut [Complex64], scratch: &mut [Complex64]| {
        ctx.spectral.forward(psi, scratch);
        for (v, f) in psi.iter_mut().zip(&kin_half) {
            *v *= f;
        }
        ctx.spectral.inverse(psi, scratch);
    };

    let mut e_prev = gp_energy(&state.psi, &ctx);
    let mut residual = f64::INFINITY;
    let mut steps = 0;
    while steps < opts.max_steps {
        for _ in 0..opts.check_every {
            kinetic(&mut state.psi, &mut scratch);
            for (j, p) in state.psi.iter_mut().enumerate() {
                *p *= (-(trap[j] + gn * p.norm_sqr()) * dtau).exp();
            }
            kinetic(&mut state.psi, &mut scratch);
            let n = state.norm(grid);
            state.scale(1.0 / n.sqrt());
        }
        steps += opts.check_every;
        if !state.is_finite() {
            return Err(Error::NonFinite {
                time: steps as f64 * dtau,
                what: "imaginary-time propagation diverged".into(),
            });
        }
        let e = gp_energy(&state.psi, &ctx);
        residual = ((e - e_prev) / e).abs() / (opts.check_every as f64 * dtau);
        e_prev = e;
        if residual < opts.tol {
            state.time = 0.0;
            return Ok(state);
        }
    }
    Err(Error::NoConvergence {
        iterations: steps,
        residual,
    })
}

/// Relative L² change of the density after propagating `state` in real
/// time for `duration` (code units) without pump or noise.
pub fn real_time_density_change(
    params: &SystemParams,
    grid: &Grid,
    state: &CField,
    duration: f64,
    dt: f64,
) -> Result<f64> {
    let ctx = EomContext::new(*params, grid.clone(), PumpSchedule::constant(0.0), dt, false, false)?;
    let mut stepper = Stepper::new(&ctx, 0);
    let mut s = state.clone();
    let n = (duration / dt).round() as usize;
    stepper.evolve(&mut s, n, n.max(1), |_| {})?;
    let before = state.density();
    let after = s.density();
    let num: f64 = before.iter().zip(&after).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = before.iter().map(|a| a * a).sum();
    Ok((num / den).sqrt())
}
