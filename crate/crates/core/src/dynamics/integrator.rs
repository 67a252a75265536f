use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use super::checkpoint::RngState;
use super::eom::EomContext;
use super::noise::{trajectory_rng, CavityNoise, STREAM_LANGEVIN};
use crate::error::{Error, Result};
use crate::field::{bunching, order_parameter, CField};

/// (e^z - 1)/z, stable near zero.
fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        (z.exp() - 1.0) / z
    }
}

/// Result of integrating dα/ds = a α + b exactly over one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityFlow {
    /// α at the end of the step.
    pub alpha: Complex64,
    /// ∫|α|² ds over the step.
    pub photons_integral: f64,
    /// ∫Re α ds over the step.
    pub re_alpha_integral: f64,
}

/// Exact flow of the linear cavity equation with constant coefficients.
pub fn cavity_flow(alpha0: Complex64, a: Complex64, b: Complex64, dt: f64) -> CavityFlow {
    if (a * dt).norm() < 1e-8 {
        let alpha = alpha0 + b * dt;
        let photons = alpha0.norm_sqr() * dt
            + (alpha0.conj() * b).re * dt * dt
            + b.norm_sqr() * dt * dt * dt / 3.0;
        let re = alpha0.re * dt + b.re * dt * dt / 2.0;
        return CavityFlow {
            alpha,
            photons_integral: photons,
            re_alpha_integral: re,
        };
    }
    let fixed = -b / a;
    let amp = alpha0 - fixed;
    let e1 = dt * phi1(a * dt);
    let e2 = dt * phi1(Complex64::new(2.0 * a.re * dt, 0.0)).re;
    let photons = fixed.norm_sqr() * dt + 2.0 * (fixed.conj() * amp * e1).re + amp.norm_sqr() * e2;
    let re = fixed.re * dt + (amp * e1).re;
    CavityFlow {
        alpha: fixed + amp * (a * dt).exp(),
        photons_integral: photons,
        re_alpha_integral: re,
    }
}

/// Strang-split stochastic integrator for one trajectory.
///
/// Each step is a kinetic half-step in spectral space, a position-space
/// step in which |ψ|² is frozen so that Θ and B are constant and the cavity
/// amplitude follows its linear equation exactly, and a second kinetic
/// half-step. The pump is frozen at its mid-step value. When noise is on a
/// Langevin increment is added to α after the position-space step.
pub struct Stepper<'a> {
    ctx: &'a EomContext,
    kin_half: Vec<Complex64>,
    kin_full: Vec<Complex64>,
    scratch: Vec<Complex64>,
    noise: CavityNoise,
    rng: ChaCha8Rng,
}

impl<'a> Stepper<'a> {
    pub fn new(ctx: &'a EomContext, seed: u64) -> Self {
        Self::with_rng(ctx, trajectory_rng(seed, STREAM_LANGEVIN))
    }

    pub fn with_rng(ctx: &'a EomContext, rng: ChaCha8Rng) -> Self {
        let phases = |tau: f64| -> Vec<Complex64> {
            ctx.kinetic_spectrum()
                .iter()
                .map(|e| Complex64::from_polar(1.0, -e * tau))
                .collect()
        };
        Stepper {
            ctx,
            kin_half: phases(0.5 * ctx.dt),
            kin_full: phases(ctx.dt),
            scratch: ctx.spectral.scratch(),
            noise: CavityNoise::new(ctx.code.kappa, ctx.dt),
            rng,
        }
    }

    pub fn context(&self) -> &EomContext {
        self.ctx
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    fn kinetic(&mut self, psi: &mut [Complex64], full: bool) {
        let spectral = &self.ctx.spectral;
        spectral.forward(psi, &mut self.scratch);
        let phases = if full { &self.kin_full } else { &self.kin_half };
        for (v, p) in psi.iter_mut().zip(phases) {
            *v *= p;
        }
        spectral.inverse(psi, &mut self.scratch);
    }

    fn potential(&mut self, state: &mut CField) {
        let ctx = self.ctx;
        let c = &ctx.code;
        let grid = &ctx.grid;
        let dt = ctx.dt;
        let eta = ctx.pump_amplitude(state.time + 0.5 * dt);
        let theta = order_parameter(state, grid);
        let b = bunching(state, grid);
        let n_u0 = c.u0 * c.n_atoms;
        let a = Complex64::new(-c.kappa, c.delta_c - n_u0 * b);
        let drive = Complex64::new(0.0, -n_u0 * eta * theta);
        let flow = cavity_flow(state.alpha, a, drive, dt);

        let gn = c.g_contact * c.n_atoms;
        let cav2 = c.u0 * flow.photons_integral;
        let cav1 = 2.0 * c.u0 * eta * flow.re_alpha_integral;
        let trap = ctx.trap_potential();
        let cos = grid.cos_kz();
        let cos2 = grid.cos2_kz();
        for (j, p) in state.psi.iter_mut().enumerate() {
            let phase = (trap[j] + gn * p.norm_sqr()) * dt + cav2 * cos2[j] + cav1 * cos[j];
            *p *= Complex64::from_polar(1.0, -phase);
        }
        state.alpha = flow.alpha;
        if ctx.noise_on {
            state.alpha += self.noise.sample(&mut self.rng);
        }
        state.time += dt;
    }

    fn check(&self, state: &CField) -> Result<()> {
        if state.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                time: state.time,
                what: format!("trajectory diverged (alpha = {})", state.alpha),
            })
        }
    }

    /// Advances one step of length dt.
    pub fn step(&mut self, state: &mut CField) -> Result<()> {
        self.kinetic(&mut state.psi, false);
        self.potential(state);
        self.kinetic(&mut state.psi, false);
        self.check(state)
    }

    /// Advances `n_steps` steps, calling `observe` every `every` steps and
    /// after the last one. Kinetic half-steps between unobserved steps are
    /// fused into full steps.
    pub fn evolve<F: FnMut(&CField)>(
        &mut self,
        state: &mut CField,
        n_steps: usize,
        every: usize,
        mut observe: F,
    ) -> Result<()> {
        let every = every.max(1);
        let mut pending = false;
        for i in 0..n_steps {
            self.kinetic(&mut state.psi, pending);
            self.potential(state);
            if !state.alpha.re.is_finite() || !state.alpha.im.is_finite() {
                return self.check(state);
            }
            if (i + 1) % every == 0 || i + 1 == n_steps {
                self.kinetic(&mut state.psi, false);
                pending = false;
                self.check(state)?;
                observe(state);
            } else {
                pending = true;
            }
        }
        Ok(())
    }
}
