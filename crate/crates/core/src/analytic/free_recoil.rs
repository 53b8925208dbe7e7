use serde::Serialize;

use super::{ClosedForm, PointFields};
use crate::fieldcalc::Sign;
use crate::params::PhysicalParams;
use crate::scalar::Real;

/// Free diffusion with recoil in one dimension, started from the same
/// Gaussian as the free expansion but with zero initial current velocity.
///
/// With `A(t) = alpha^4 + 4 D^2 t^2` the density stays Gaussian with
/// variance `A / (2 alpha^2)`; the velocity potential is
/// `S = 2 D^2 x^2 t / A - D atan(2 D t / alpha^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeRecoilSolution<T> {
    params: PhysicalParams<T>,
}

impl<T: Real> FreeRecoilSolution<T> {
    pub fn new(params: PhysicalParams<T>) -> Self {
        Self { params }
    }

    fn spread(&self, t: T) -> T {
        let (a, d) = (self.params.alpha(), self.params.d());
        a.powi(4) + T::lit(4.0) * d * d * t * t
    }

    /// `alpha^2 / 2 + 2 D^2 t^2 / alpha^2`.
    pub fn msd(&self, t: T) -> T {
        let (a, d) = (self.params.alpha(), self.params.d());
        a * a / T::lit(2.0) + T::lit(2.0) * d * d * t * t / (a * a)
    }

    /// `4 D^4 t^2 / (alpha^2 A(t))`, increasing towards `D^2 / alpha^2`.
    pub fn kinetic(&self, t: T) -> T {
        let (a, d) = (self.params.alpha(), self.params.d());
        T::lit(4.0) * d.powi(4) * t * t / (a * a * self.spread(t))
    }

    /// `k(t)` in the linear forward drift `b = k x`, `k = 2D (2Dt - alpha^2) / A(t)`.
    pub fn drift_coefficient(&self, t: T) -> T {
        let (a, d) = (self.params.alpha(), self.params.d());
        T::lit(2.0) * d * (T::lit(2.0) * d * t - a * a) / self.spread(t)
    }

    /// Conserved `∫ (v^2/2 - Q) rho dx = D^2 / alpha^2`.
    pub fn total_energy(&self) -> T {
        let (a, d) = (self.params.alpha(), self.params.d());
        d * d / (a * a)
    }
}

impl<T: Real> ClosedForm<T> for FreeRecoilSolution<T> {
    fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    fn sign(&self) -> Sign {
        Sign::Recoil
    }

    fn point<U: Real>(&self, x: U, t: U) -> PointFields<U> {
        let p = self.params.cast::<U>();
        let (d, al) = (p.d(), p.alpha());
        let two = U::lit(2.0);
        let a2 = al * al;
        let spread = a2 * a2 + U::lit(4.0) * d * d * t * t;
        let ln_rho = al.ln() - U::lit(0.5) * (U::PI() * spread).ln() - x * x * a2 / spread;
        let rho = ln_rho.exp();
        let v = U::lit(4.0) * d * d * t * x / spread;
        let u = -two * d * a2 * x / spread;
        let k = two * d * d * a2 / spread;
        PointFields {
            rho,
            ln_rho,
            s: two * d * d * x * x * t / spread - d * (two * d * t / a2).atan(),
            v,
            u,
            b: v + u,
            q: k * (a2 * x * x / spread - U::one()),
            p: -k * rho,
            omega: U::zero(),
        }
    }

    fn msd(&self, t: T) -> T {
        FreeRecoilSolution::msd(self, t)
    }
}
