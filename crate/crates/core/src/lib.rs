//! Brownian motion in the Smoluchowski approximation, with and without
//! medium recoil.
//!
//! Three independent routes compute the same densities and are checked
//! against each other and against closed forms:
//!
//! * [`sde`]: Euler-Maruyama ensembles of the Ito equation,
//! * [`pde::fokker_planck`]: Crank-Nicolson with exponentially fitted fluxes,
//! * [`pde::schrodinger`]: the linear wave equation whose Madelung fields
//!   solve the recoil dynamics.
//!
//! All numerics are generic over [`Real`]; the aliases below fix `f64`.

pub mod analytic;
pub mod calculus;
pub mod diagnostics;
pub mod drift;
pub mod dual;
pub mod error;
pub mod fieldcalc;
pub mod grid;
pub mod params;
pub mod pde;
pub mod scalar;
pub mod sde;

pub use dual::Dual;
pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid = grid::Grid1D<f64>;
pub type Field = grid::ScalarField<f64>;
pub type WaveField = grid::ComplexField<f64>;
pub type Params = params::PhysicalParams<f64>;
pub type Hydro = fieldcalc::HydroFields<f64>;
