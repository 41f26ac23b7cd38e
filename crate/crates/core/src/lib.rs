//! Numerical laboratory for level-set estimates, distribution-function
//! iterations and sharp Lebesgue exponents of radial p-Poisson problems on the
//! unit ball.

pub mod cli;
pub mod distribution;
pub mod error;
pub mod exponents;
pub mod iteration;
mod optimize;
pub mod profile;
pub mod quadrature;
pub mod radial;
pub mod sharpness;

pub use error::{Error, Result};
pub use exponents::{validate_context, ExponentContext, Regime};
pub use profile::{ProfileForm, RadialProfile};
pub use quadrature::QuadratureConfig;
