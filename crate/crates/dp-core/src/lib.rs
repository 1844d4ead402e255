//! Numerical laboratory for the Degasperis-Procesi equation
//!
//! ```text
//! u_t - u_txx + 3 kappa u_x + 4 u u_x = 3 u_x u_xx + u u_xxx,   kappa = 1
//! ```
//!
//! The crate provides the spectral frame of the associated 3x3 Lax
//! problem ([`spectral`]), scattering-data handling and dressing factors
//! ([`scattering`]), exact N-soliton solutions through the discrete
//! Riemann-Hilbert system ([`nsoliton`]), long-time asymptotic formulas
//! ([`asymptotics`]), an independent pseudo-spectral time integrator
//! ([`pde_oracle`]), and a direct-scattering map for numerically
//! recovering reflection coefficients ([`forward_scattering`]).

pub mod asymptotics;
pub mod forward_scattering;
pub mod nsoliton;
pub mod numerics;
pub mod pde_oracle;
pub mod scattering;
pub mod spectral;
