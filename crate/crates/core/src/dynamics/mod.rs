//! Equations of motion, the split-step stochastic integrator, Wigner
//! sampling and imaginary-time ground states.

mod checkpoint;
mod eom;
mod ground;
mod integrator;
mod noise;
mod wigner;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, RngState, CHECKPOINT_VERSION};
pub use eom::{drift, energy, Drift, EomContext, STABILITY_BOUND};
pub use ground::{
    gaussian_density, ground_state, real_time_density_change, thomas_fermi_density,
    thomas_fermi_mu, GroundStateOptions,
};
pub use integrator::{cavity_flow, CavityFlow, Stepper};
pub use noise::{trajectory_rng, CavityNoise, STREAM_INITIAL, STREAM_LANGEVIN};
pub use wigner::sample_initial;
