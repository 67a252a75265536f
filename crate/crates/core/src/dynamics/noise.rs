use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// RNG stream used for Wigner sampling of the initial state.
pub const STREAM_INITIAL: u64 = 0;
/// RNG stream used for the cavity Langevin increments.
pub const STREAM_LANGEVIN: u64 = 1;

/// Per-trajectory generator. Streams of the same seed are independent.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex Gaussian increment ξΔt with ⟨|ξΔt|²⟩ = κΔt, i.e. variance κΔt/2
/// in each quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityNoise {
    sigma: f64,
}

impl CavityNoise {
    pub fn new(kappa: f64, dt: f64) -> Self {
        CavityNoise {
            sigma: (0.5 * kappa * dt).sqrt(),
        }
    }

    /// Standard deviation per quadrature.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(self.sigma * re, self.sigma * im)
    }
}
