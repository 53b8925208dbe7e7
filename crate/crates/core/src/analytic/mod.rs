//! Closed-form solutions of the worked examples.
//!
//! Every solution implements [`ClosedForm`], which evaluates the whole
//! hydrodynamic bundle at a point for any [`Real`] scalar. Evaluating with
//! [`Dual`] numbers gives exact space and time derivatives, used by
//! [`exact_residuals`] to check the field equations without mesh error.

mod free_brownian;
mod free_recoil;
mod harmonic;
mod smoluchowski;

pub use free_brownian::{Dim, FreeBrownianSolution};
pub use free_recoil::FreeRecoilSolution;
pub use harmonic::{HarmonicRecoilSolution, HarmonicRegime};
pub use smoluchowski::{smoluchowski_omega, smoluchowski_omega_at};

use crate::dual::Dual;
use crate::error::Result;
use crate::fieldcalc::{
    continuity_residual_at, girsanov_rhs_at, hj_residual_at, momentum_residual_at, HydroFields, Sign,
};
use crate::grid::{Grid1D, ScalarField};
use crate::params::PhysicalParams;
use crate::scalar::Real;

/// All closed-form fields at one space-time point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointFields<T> {
    pub rho: T,
    /// `ln rho` evaluated analytically (no underflow in the tails).
    pub ln_rho: T,
    pub s: T,
    pub v: T,
    pub u: T,
    pub b: T,
    pub q: T,
    pub p: T,
    pub omega: T,
}

/// A solution known in closed form.
pub trait ClosedForm<T: Real> {
    fn params(&self) -> &PhysicalParams<T>;

    /// Which Hamilton-Jacobi equation the solution satisfies.
    fn sign(&self) -> Sign;

    /// Fields at `(x, t)`, evaluated in an arbitrary scalar type.
    fn point<U: Real>(&self, x: U, t: U) -> PointFields<U>;

    /// Second moment `<x^2>` at time `t`.
    fn msd(&self, t: T) -> T;
}

/// Samples a closed form on a grid.
pub fn sample_hydro<T: Real, C: ClosedForm<T>>(sol: &C, grid: Grid1D<T>, t: T) -> Result<HydroFields<T>> {
    let pts: Vec<PointFields<T>> = grid.nodes().map(|x| sol.point(x, t)).collect();
    let field = |f: fn(&PointFields<T>) -> T| ScalarField::new(grid, pts.iter().map(f).collect());
    let two_d = T::lit(2.0) * sol.params().d();
    HydroFields::from_parts(
        t,
        field(|p| p.rho)?,
        field(|p| p.s)?,
        field(|p| p.v)?,
        field(|p| p.u)?,
        field(|p| p.q)?,
        field(|p| p.omega)?,
        field(|p| p.p)?,
        ScalarField::new(grid, pts.iter().map(|p| T::lit(0.5) * p.ln_rho + p.s / two_d).collect())?,
    )
}

/// Density and potential on a grid, the input of a numerical solver.
pub fn sample_density<T: Real, C: ClosedForm<T>>(sol: &C, grid: Grid1D<T>, t: T) -> Result<ScalarField<T>> {
    ScalarField::from_fn(grid, |x| sol.point(x, t).rho)
}

/// Fields together with their exact partial derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ExactDerivatives<T> {
    pub value: PointFields<T>,
    pub d_dx: PointFields<T>,
    pub d_dt: PointFields<T>,
}

fn split<T: Real>(p: PointFields<Dual<T>>) -> (PointFields<T>, PointFields<T>) {
    let re = PointFields {
        rho: p.rho.re,
        ln_rho: p.ln_rho.re,
        s: p.s.re,
        v: p.v.re,
        u: p.u.re,
        b: p.b.re,
        q: p.q.re,
        p: p.p.re,
        omega: p.omega.re,
    };
    let eps = PointFields {
        rho: p.rho.eps,
        ln_rho: p.ln_rho.eps,
        s: p.s.eps,
        v: p.v.eps,
        u: p.u.eps,
        b: p.b.eps,
        q: p.q.eps,
        p: p.p.eps,
        omega: p.omega.eps,
    };
    (re, eps)
}

/// Exact first derivatives of every field, by forward-mode differentiation.
pub fn exact_derivatives<T: Real, C: ClosedForm<T>>(sol: &C, x: T, t: T) -> ExactDerivatives<T> {
    let (value, d_dx) = split(sol.point(Dual::variable(x), Dual::constant(t)));
    let (_, d_dt) = split(sol.point(Dual::constant(x), Dual::variable(t)));
    ExactDerivatives { value, d_dx, d_dt }
}

/// Pointwise residuals of the field equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResiduals<T> {
    pub hamilton_jacobi: T,
    pub momentum: T,
    pub continuity: T,
    pub girsanov: T,
}

impl<T: Real> PointResiduals<T> {
    pub fn max_abs(&self) -> T {
        self.hamilton_jacobi.abs().max(self.momentum.abs()).max(self.continuity.abs()).max(self.girsanov.abs())
    }
}

/// Residuals of the solution's own field equations at `(x, t)`, with exact
/// derivatives. `sign` selects the process; a closed form evaluated with the
/// wrong sign leaves a residual of `2(Q - Omega)`.
pub fn exact_residuals<T: Real, C: ClosedForm<T>>(sol: &C, x: T, t: T, sign: Sign) -> PointResiduals<T> {
    let e = exact_derivatives(sol, x, t);
    let (f, fx, ft) = (e.value, e.d_dx, e.d_dt);
    let d = sol.params().d();
    let two_d = T::lit(2.0) * d;
    let phi_t = T::lit(0.5) * ft.ln_rho + ft.s / two_d;
    let j_x = fx.v * f.rho + f.v * fx.rho;
    PointResiduals {
        hamilton_jacobi: hj_residual_at(ft.s, fx.s, f.q, f.omega, sign),
        momentum: momentum_residual_at(ft.v, f.v, fx.v, fx.q, fx.omega, sign),
        continuity: continuity_residual_at(ft.rho, j_x),
        girsanov: sign.effective_omega(f.q, f.omega) - girsanov_rhs_at(phi_t, f.b, fx.b, d),
    }
}
