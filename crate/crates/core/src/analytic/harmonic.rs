use serde::Serialize;

use super::{ClosedForm, PointFields};
use crate::error::{Error, Result};
use crate::fieldcalc::Sign;
use crate::params::PhysicalParams;
use crate::scalar::Real;

/// Whether the harmonic recoil ensemble keeps its width.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicRegime {
    /// `alpha^2 = 2 D / gamma`: the initial Gaussian is the ground state.
    Stationary,
    /// Any other width: the variance oscillates with period `pi / gamma`
    /// between `sigma0^2` and `(D/gamma)^2 / sigma0^2`.
    Breathing,
}

/// Recoil dynamics in `Omega = gamma^2 x^2 / 2 - D gamma` from the Gaussian
/// initial density with zero initial current.
///
/// The density is a breathing Gaussian with
/// `sigma^2(t) = sigma0^2 cos^2(gamma t) + (D/gamma)^2 / sigma0^2 sin^2(gamma t)`,
/// `v = x (d sigma^2/dt) / (2 sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicRecoilSolution<T> {
    params: PhysicalParams<T>,
    sigma0_sq: T,
}

/// Relative tolerance for calling a width matched.
const MATCH_TOL: f64 = 1e-12;

impl<T: Real> HarmonicRecoilSolution<T> {
    pub fn new(params: PhysicalParams<T>) -> Result<Self> {
        if !(params.gamma() > T::zero()) {
            return Err(Error::WrongScenario);
        }
        Ok(Self { params, sigma0_sq: params.initial_variance() })
    }

    pub fn sigma0_sq(&self) -> T {
        self.sigma0_sq
    }

    /// Ground-state variance `D / gamma`.
    pub fn ground_variance(&self) -> T {
        self.params.d() / self.params.gamma()
    }

    /// Variance at the quarter period, `(D/gamma)^2 / sigma0^2`.
    pub fn turning_variance(&self) -> T {
        let g = self.ground_variance();
        g * g / self.sigma0_sq
    }

    /// `k(t)` in the linear forward drift `b = k x`.
    pub fn drift_coefficient(&self, t: T) -> T {
        let (d, gamma) = (self.params.d(), self.params.gamma());
        let two = T::lit(2.0);
        let s0 = self.sigma0_sq;
        let turn = self.turning_variance();
        let (sn, cs) = (gamma * t).sin_cos();
        let var = s0 * cs * cs + turn * sn * sn;
        let var_rate = two * gamma * sn * cs * (turn - s0);
        (var_rate / two - d) / var
    }

    pub fn regime(&self) -> HarmonicRegime {
        let g = self.ground_variance();
        if ((self.sigma0_sq - g) / g).abs() <= T::lit(MATCH_TOL) {
            HarmonicRegime::Stationary
        } else {
            HarmonicRegime::Breathing
        }
    }

    /// Period of `<x^2>(t)`, `pi / gamma`.
    pub fn period(&self) -> T {
        T::PI() / self.params.gamma()
    }

    /// Upper bound of `<x^2>` over all times.
    pub fn msd_bound(&self) -> T {
        self.sigma0_sq.max(self.turning_variance())
    }

    pub fn msd(&self, t: T) -> T {
        let (s, c) = (self.params.gamma() * t).sin_cos();
        self.sigma0_sq * c * c + self.turning_variance() * s * s
    }
}

impl<T: Real> ClosedForm<T> for HarmonicRecoilSolution<T> {
    fn params(&self) -> &PhysicalParams<T> {
        &self.params
    }

    fn sign(&self) -> Sign {
        Sign::Recoil
    }

    fn point<U: Real>(&self, x: U, t: U) -> PointFields<U> {
        let p = self.params.cast::<U>();
        let (d, gamma) = (p.d(), p.gamma());
        let two = U::lit(2.0);
        let half = U::lit(0.5);
        let s0 = p.initial_variance();
        let ground = d / gamma;
        let turn = ground * ground / s0;
        let (sn, cs) = (gamma * t).sin_cos();
        let var = s0 * cs * cs + turn * sn * sn;
        let var_rate = two * gamma * sn * cs * (turn - s0);
        // continuous phase offset of the Gaussian wave, c(t) = D gamma t - D Theta(t)
        let r = ground / s0;
        let offset = -d * ((r - U::one()) * sn * cs).atan2(cs * cs + r * sn * sn);
        let ln_rho = -half * (two * U::PI() * var).ln() - x * x / (two * var);
        let rho = ln_rho.exp();
        let v = x * var_rate / (two * var);
        let u = -d * x / var;
        PointFields {
            rho,
            ln_rho,
            s: var_rate / (U::lit(4.0) * var) * x * x + offset,
            v,
            u,
            b: v + u,
            q: d * d * x * x / (two * var * var) - d * d / var,
            p: -(d * d / var) * rho,
            omega: half * gamma * gamma * x * x - d * gamma,
        }
    }

    fn msd(&self, t: T) -> T {
        HarmonicRecoilSolution::msd(self, t)
    }
}
