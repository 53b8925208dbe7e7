use serde::Serialize;

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Physical constants of a run.
///
/// The time offset `t0 = alpha^2 / (4 D)` is derived on construction and never
/// stored independently of `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhysicalParams<T> {
    d: T,
    m: T,
    beta: T,
    gamma: T,
    alpha: T,
    t0: T,
}

impl<T: Real> PhysicalParams<T> {
    pub fn new(d: T, m: T, beta: T, gamma: T, alpha: T) -> Result<Self> {
        let positive = |name: &'static str, v: T| {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("D", d)?;
        positive("m", m)?;
        positive("beta", beta)?;
        positive("alpha", alpha)?;
        if !(gamma.is_finite() && gamma >= T::zero()) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { d, m, beta, gamma, alpha, t0: alpha * alpha / (T::lit(4.0) * d) })
    }

    /// Diffusion-only parameters: `m = beta = 1`, `gamma = 0`.
    pub fn diffusion(d: T, alpha: T) -> Result<Self> {
        Self::new(d, T::one(), T::one(), T::zero(), alpha)
    }

    pub fn with_gamma(self, gamma: T) -> Result<Self> {
        Self::new(self.d, self.m, self.beta, gamma, self.alpha)
    }

    pub fn with_alpha(self, alpha: T) -> Result<Self> {
        Self::new(self.d, self.m, self.beta, self.gamma, alpha)
    }

    pub fn d(&self) -> T {
        self.d
    }
    pub fn m(&self) -> T {
        self.m
    }
    pub fn beta(&self) -> T {
        self.beta
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn alpha(&self) -> T {
        self.alpha
    }
    pub fn t0(&self) -> T {
        self.t0
    }

    /// Variance of the initial Gaussian, `alpha^2 / 2`.
    pub fn initial_variance(&self) -> T {
        self.alpha * self.alpha / T::lit(2.0)
    }

    /// Mobility factor `1 / (m beta)` turning a force into a forward drift.
    pub fn mobility(&self) -> T {
        (self.m * self.beta).recip()
    }

    pub fn cast<U: Real>(&self) -> PhysicalParams<U> {
        let c = |v: T| U::lit(v.as_f64());
        PhysicalParams {
            d: c(self.d),
            m: c(self.m),
            beta: c(self.beta),
            gamma: c(self.gamma),
            alpha: c(self.alpha),
            t0: c(self.t0),
        }
    }
}
