use crate::calculus::gradient;
use crate::grid::ScalarField;
use crate::params::PhysicalParams;
use crate::scalar::Real;

/// `Omega = F^2 / (2 m^2 beta^2) + (D / m beta) dF/dx` at a point.
pub fn smoluchowski_omega_at<T: Real>(force: T, force_x: T, params: &PhysicalParams<T>) -> T {
    let mob = params.mobility();
    T::lit(0.5) * force * force * mob * mob + params.d() * mob * force_x
}

/// Effective potential of a Smoluchowski force field, with a mesh derivative.
pub fn smoluchowski_omega<T: Real>(force: &ScalarField<T>, params: &PhysicalParams<T>) -> ScalarField<T> {
    let df = gradient(force);
    let vals = force.values().iter().zip(df.values()).map(|(&f, &fx)| smoluchowski_omega_at(f, fx, params)).collect();
    ScalarField::from_raw(*force.grid(), vals)
}
