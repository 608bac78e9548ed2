//! Quantum-walk-driven categorical diffusion models at desk scale.
//!
//! The forward (noising) process of a discrete-state diffusion model is
//! realized by quantum dynamics on a cycle graph: either a continuous-time
//! quantum stochastic walk whose generator interpolates between coherent and
//! incoherent evolution ([`lindblad`]), or a noisy discrete-time coined walk
//! with delay-scheduled damping channels ([`dtqw`]). Per-step categorical
//! transition kernels extracted from those dynamics drive an image-level
//! forward chain ([`diffusion`]); the backward chain is a trained multilayer
//! perceptron ([`denoiser`]); evaluation uses KL divergence and a Fréchet
//! distance proxy ([`metrics`]).

pub mod data;
pub mod denoiser;
pub mod diffusion;
pub mod dtqw;
pub mod graphs;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod rng;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
