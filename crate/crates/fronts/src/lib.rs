//! Numerical laboratory for pulled monostable reaction–diffusion fronts.
//!
//! The crate computes traveling waves of `∂t u = ∂xx u + f(u)` and their tail
//! asymptotics, simulates the Cauchy problem to long times, and evaluates and
//! certifies explicit sub- and supersolutions whose level sets carry the
//! logarithmic delay of the front.

pub mod constructions;
pub mod numerics;
pub mod ode;
pub mod pde;
pub mod perturbed;
pub mod reaction;
pub mod spectral;
pub mod wave;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
