use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::eom::EomContext;
use super::noise::{trajectory_rng, STREAM_INITIAL};
use crate::field::CField;

/// Adds vacuum (half-quantum) Wigner noise to a coherent mean-field state.
///
/// Each plane-wave mode of the box, for the field √N ψ, and the cavity
/// amplitude receive an independent complex Gaussian with variance 1/4 per
/// quadrature. With `ctx.wigner_sampling_on` unset the state is returned
/// unchanged.
pub fn sample_initial(state0: &CField, ctx: &EomContext, seed: u64) -> CField {
    let mut out = state0.clone();
    if !ctx.wigner_sampling_on {
        return out;
    }
    let mut rng = trajectory_rng(seed, STREAM_INITIAL);
    let gauss = |rng: &mut rand_chacha::ChaCha8Rng| -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(0.5 * re, 0.5 * im)
    };
    out.alpha += gauss(&mut rng);

    let grid = &ctx.grid;
    let n = grid.n_points;
    // ψ(z_j) = Σ_m a_m e^{ik_m z_j}/√L; an unnormalized inverse DFT of the
    // mode noise gives Σ_m δa_m e^{2πi m j/n}, the phase offset from z_0 being
    // irrelevant for isotropic noise.
    let mut modes: Vec<Complex64> = (0..n).map(|_| gauss(&mut rng)).collect();
    let mut scratch = ctx.spectral.scratch();
    ctx.spectral.inverse(&mut modes, &mut scratch);
    let scale = n as f64 / (ctx.code.n_atoms * grid.length).sqrt();
    for (p, d) in out.psi.iter_mut().zip(&modes) {
        *p += d * scale;
    }
    out
}
