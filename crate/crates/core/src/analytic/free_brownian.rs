use serde::Serialize;

use super::{ClosedForm, PointFields};
use crate::fieldcalc::Sign;
use crate::params::PhysicalParams;
use crate::scalar::Real;

/// Spatial dimension of the free expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Dim {
    One,
    Three,
}

impl Dim {
    pub fn get(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Three => 3,
        }
    }

    fn value<T: Real>(self) -> T {
        T::from_usize_lossy(self.get())
    }
}

/// Free Brownian expansion of the Gaussian `rho_0 ~ exp(-x^2 / alpha^2)`.
///
/// With `tau = t + t0` the density is the heat kernel of width `2 D tau`;
/// `v = x / 2 tau`, `u = -v`, zero forward drift. In three dimensions the
/// scalar fields are radial and `x` is the distance from the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeBrownianSolution<T> {
    params: PhysicalParams<T>,
    dim: Dim,
}

impl<T: Real> FreeBrownianSolution<T> {
    pub fn new(params: PhysicalParams<T>, dim: Dim) -> Self {
        Self { params, dim }
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// `2 dim D (t + t0)`.
    pub fn msd(&self, t: T) -> T {
        T::lit(2.0) * self.dim.value::<T>() * self.params.d() * (t + self.params.t0())
    }

    /// Kinetic energy per unit mass, `dim D / (4 (t + t0))`.
    pub fn kinetic(&self, t: T) -> T {
        self.dim.value::<T>() * self.params.d() / (T::lit(4.0) * (t + self.params.t0()))
    }

    /// `kinetic(0) = dim D^2 / alpha^2`.
    pub fn initial_kinetic(&self) -> T {
        let p = &self.params;
        self.dim.value::<T>() * p.d() * p.d() / (p.alpha() * p.alpha())
    }
}

impl<T: Real> ClosedForm<T> for FreeBrownianSolution<T> {
    fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    fn sign(&self) -> Sign {
        Sign::Standard
    }

    fn point<U: Real>(&self, x: U, t: U) -> PointFields<U> {
        let p = self.params.cast::<U>();
        let d = p.d();
        let dim = self.dim.value::<U>();
        let tau = t + p.t0();
        let two = U::lit(2.0);
        let four_pi_d_tau = U::lit(4.0) * U::PI() * d * tau;
        let ln_rho = -dim / two * four_pi_d_tau.ln() - x * x / (U::lit(4.0) * d * tau);
        let rho = ln_rho.exp();
        let v = x / (two * tau);
        let u = -v;
        PointFields {
            rho,
            ln_rho,
            s: x * x / (U::lit(4.0) * tau) + dim / two * d * four_pi_d_tau.ln(),
            v,
            u,
            b: v + u,
            q: x * x / (U::lit(8.0) * tau * tau) - dim * d / (two * tau),
            p: -d / (two * tau) * rho,
            omega: U::zero(),
        }
    }

    fn msd(&self, t: T) -> T {
        FreeBrownianSolution::msd(self, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(dim: Dim) -> FreeBrownianSolution<f64> {
        FreeBrownianSolution::new(PhysicalParams::diffusion(1.0, 1.0).unwrap(), dim)
    }

    #[test]
    fn pressure_potential_at_origin() {
        assert!((sol(Dim::Three).point::<f64>(0.0, 0.0).q + 6.0).abs() < 1e-14);
        assert!((sol(Dim::One).point::<f64>(0.0, 0.75).q + 0.5).abs() < 1e-14);
    }

    #[test]
    fn velocities() {
        for dim in [Dim::One, Dim::Three] {
            assert_eq!(sol(dim).point::<f64>(0.0, 0.4).v, 0.0);
        }
        let p = sol(Dim::One).point::<f64>(1.3, 0.75);
        assert!((p.v - 0.65).abs() < 1e-15);
        assert!((p.u + 0.65).abs() < 1e-15);
        assert_eq!(p.b, 0.0);
    }

    #[test]
    fn msd_values() {
        assert!((sol(Dim::Three).msd(0.0) - 1.5).abs() < 1e-15);
        assert!((sol(Dim::Three).msd(1.0) - 7.5).abs() < 1e-15);
        assert!((sol(Dim::One).msd(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kinetic_values() {
        assert!((sol(Dim::Three).kinetic(0.0) - 3.0).abs() < 1e-15);
        assert!((sol(Dim::One).kinetic(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(sol(Dim::One).kinetic(0.0), sol(Dim::One).initial_kinetic());
        assert!(sol(Dim::Three).kinetic(1e12) < 1e-11);
        // kinetic * (t + t0) is constant
        let s = sol(Dim::Three);
        for t in [0.0, 1.0, 10.0] {
            assert!((s.kinetic(t) * (t + 0.25) - 0.75).abs() < 1e-14);
        }
    }

    #[test]
    fn pressure_function_and_f32() {
        let s = sol(Dim::Three);
        let p = s.point::<f64>(0.8, 0.5);
        assert!((p.p + p.rho / (2.0 * 0.75)).abs() < 1e-15);
        let s32 = FreeBrownianSolution::new(PhysicalParams::diffusion(1.0f32, 1.0).unwrap(), Dim::Three);
        assert!((s32.point(0.0f32, 0.0).q + 6.0).abs() < 1e-5);
    }
}
