//! Hydrodynamic fields of a diffusion process and the operators acting on them:
//! osmotic velocity, pressure potential, the auxiliary potential of a drift,
//! and residuals of the Hamilton-Jacobi, momentum, continuity and Girsanov
//! relations.
//!
//! Residual kernels come in two flavours sharing one formula: pointwise
//! (`*_at`, fed with exact derivatives) and on-mesh (fed with [`HydroFields`]
//! slices and finite differences).

use serde::Serialize;

use crate::calculus::{cumulative_integral, gradient, gradient_slice, integrate_interval};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::scalar::Real;

/// Relative density floor applied before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Negative densities down to `-NEGATIVE_TOLERANCE * peak` are treated as roundoff.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Which momentum law a process obeys.
///
/// `Standard` is the ordinary Smoluchowski process: `dv/dt = grad(Omega - Q)`.
/// `Recoil` is the process with medium back-reaction: `dv/dt = grad(Q - Omega)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Standard,
    Recoil,
}

impl Sign {
    /// Coefficient of `(Q - Omega)` in the Hamilton-Jacobi residual.
    pub fn factor<T: Real>(self) -> T {
        match self {
            Sign::Standard => T::one(),
            Sign::Recoil => -T::one(),
        }
    }

    /// The potential entering the drift identity: `Omega` for the standard
    /// process, `Omega_r = 2Q - Omega` with recoil.
    pub fn effective_omega<T: Real>(self, q: T, omega: T) -> T {
        match self {
            Sign::Standard => omega,
            Sign::Recoil => T::lit(2.0) * q - omega,
        }
    }
}

/// `dS/dt + |dS/dx|^2 / 2 + f (Q - Omega)`, `f = +1` standard, `-1` recoil.
pub fn hj_residual_at<T: Real>(s_t: T, s_x: T, q: T, omega: T, sign: Sign) -> T {
    s_t + T::lit(0.5) * s_x * s_x + sign.factor::<T>() * (q - omega)
}

/// `dv/dt + v dv/dx + f (dQ/dx - dOmega/dx)`.
pub fn momentum_residual_at<T: Real>(v_t: T, v: T, v_x: T, q_x: T, omega_x: T, sign: Sign) -> T {
    v_t + v * v_x + sign.factor::<T>() * (q_x - omega_x)
}

/// `d rho/dt + d(v rho)/dx`.
pub fn continuity_residual_at<T: Real>(rho_t: T, j_x: T) -> T {
    rho_t + j_x
}

/// Right-hand side of the drift identity, `2D [dphi/dt + (b^2/2D + db/dx)/2]`.
pub fn girsanov_rhs_at<T: Real>(phi_t: T, b: T, b_x: T, d: T) -> T {
    let two = T::lit(2.0);
    two * d * (phi_t + T::lit(0.5) * (b * b / (two * d) + b_x))
}

/// The hydrodynamic bundle of one time slice.
#[derive(Clone, Debug, Serialize)]
pub struct HydroFields<T> {
    pub t: T,
    /// Probability density.
    pub rho: ScalarField<T>,
    /// Velocity potential, `v = dS/dx`.
    pub s: ScalarField<T>,
    /// Current velocity.
    pub v: ScalarField<T>,
    /// Osmotic velocity `D d(ln rho)/dx`.
    pub u: ScalarField<T>,
    /// Forward drift `v + u`.
    pub b: ScalarField<T>,
    /// Osmotic pressure potential `u^2/2 + D du/dx`.
    pub q: ScalarField<T>,
    /// Auxiliary potential of the standard process.
    pub omega: ScalarField<T>,
    /// Pressure function, `dP/dx = rho dQ/dx`, `P(x_min) = 0`.
    pub p: ScalarField<T>,
    /// Probability current `v rho`.
    pub j: ScalarField<T>,
    /// Drift potential `ln(rho)/2 + S/2D`, so that `b = 2D dphi/dx`.
    pub phi: ScalarField<T>,
    /// Fraction of nodes where the density floor was applied.
    pub floored_fraction: f64,
}

struct FlooredLog<T> {
    ln_rho: Vec<T>,
    floored: usize,
}

fn floored_log<T: Real>(rho: &ScalarField<T>) -> Result<FlooredLog<T>> {
    let peak = rho.max();
    if !(peak > T::zero()) {
        return Err(Error::CorruptDensity { index: rho.argmax(), value: peak.as_f64() });
    }
    let floor = (peak * T::lit(DENSITY_FLOOR)).max(T::min_positive_value());
    let neg_tol = -peak * T::lit(NEGATIVE_TOLERANCE);
    let mut floored = 0;
    let mut ln_rho = Vec::with_capacity(rho.len());
    for (index, &r) in rho.values().iter().enumerate() {
        if r < neg_tol {
            return Err(Error::CorruptDensity { index, value: r.as_f64() });
        }
        if r < floor {
            floored += 1;
            ln_rho.push(floor.ln());
        } else {
            ln_rho.push(r.ln());
        }
    }
    Ok(FlooredLog { ln_rho, floored })
}

/// Osmotic velocity `u = D d(ln rho)/dx`, with the density floored first.
pub fn osmotic_velocity<T: Real>(rho: &ScalarField<T>, d: T) -> Result<ScalarField<T>> {
    let fl = floored_log(rho)?;
    Ok(osmotic_from_log(rho, &fl.ln_rho, d))
}

fn osmotic_from_log<T: Real>(rho: &ScalarField<T>, ln_rho: &[T], d: T) -> ScalarField<T> {
    let g = rho.grid();
    ScalarField::from_raw(*g, gradient_slice(ln_rho, g.dx()).into_iter().map(|x| d * x).collect())
}

/// Fraction of nodes below the density floor.
pub fn floored_fraction<T: Real>(rho: &ScalarField<T>) -> Result<f64> {
    let fl = floored_log(rho)?;
    Ok(fl.floored as f64 / rho.len() as f64)
}

#[derive(Clone, Debug)]
pub struct Pressure<T> {
    pub q: ScalarField<T>,
    pub p: ScalarField<T>,
}

/// `Q = u^2/2 + D du/dx` and the pressure `P` with `dP/dx = rho dQ/dx`, `P(x_min) = 0`.
pub fn pressure_potential<T: Real>(rho: &ScalarField<T>, d: T) -> Result<Pressure<T>> {
    let u = osmotic_velocity(rho, d)?;
    Ok(pressure_from_u(rho, &u, d))
}

fn pressure_from_u<T: Real>(rho: &ScalarField<T>, u: &ScalarField<T>, d: T) -> Pressure<T> {
    let g = *rho.grid();
    let du = gradient(u);
    let half = T::lit(0.5);
    let q: Vec<T> = u.values().iter().zip(du.values()).map(|(&u, &du)| half * u * u + d * du).collect();
    let q = ScalarField::from_raw(g, q);
    let dq = gradient(&q);
    let force = ScalarField::from_raw(g, rho.values().iter().zip(dq.values()).map(|(&r, &f)| r * f).collect());
    let p = cumulative_integral(&force, 0);
    Pressure { q, p }
}

/// Drift potential `phi` with `b = 2D dphi/dx`, anchored at the node nearest `x = 0`.
pub fn drift_potential<T: Real>(b: &ScalarField<T>, d: T) -> ScalarField<T> {
    let g = *b.grid();
    let scaled = ScalarField::from_raw(g, b.values().iter().map(|&v| v / (T::lit(2.0) * d)).collect());
    cumulative_integral(&scaled, g.nearest_index(T::zero()))
}

/// Checks `b = 2D dphi/dx` on the mesh, returning the largest mismatch.
pub fn check_gradient_drift<T: Real>(b: &ScalarField<T>, phi: &ScalarField<T>, d: T, tol: T) -> Result<T> {
    b.same_grid(phi)?;
    let gphi = gradient(phi);
    let two_d = T::lit(2.0) * d;
    let scale = T::one() + b.max_abs();
    let mismatch = b
        .values()
        .iter()
        .zip(gphi.values())
        .fold(T::zero(), |m, (&b, &g)| m.max((b - two_d * g).abs()));
    if mismatch > tol * scale {
        Err(Error::NotGradientDrift { mismatch: mismatch.as_f64() })
    } else {
        Ok(mismatch)
    }
}

/// Auxiliary potential of a gradient drift: `2D [dphi/dt + (b^2/2D + db/dx)/2]`.
pub fn omega_from_drift<T: Real>(b: &ScalarField<T>, phi_t: &ScalarField<T>, d: T) -> Result<ScalarField<T>> {
    b.same_grid(phi_t)?;
    let db = gradient(b);
    let vals = b
        .values()
        .iter()
        .zip(db.values())
        .zip(phi_t.values())
        .map(|((&b, &bx), &pt)| girsanov_rhs_at(pt, b, bx, d))
        .collect();
    ScalarField::new(*b.grid(), vals)
}

/// `Omega_r = 2Q - Omega`.
pub fn recoil_omega<T: Real>(h: &HydroFields<T>) -> ScalarField<T> {
    ScalarField::from_raw(
        *h.q.grid(),
        h.q.values().iter().zip(h.omega.values()).map(|(&q, &o)| Sign::Recoil.effective_omega(q, o)).collect(),
    )
}

fn mul<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> ScalarField<T> {
    ScalarField::from_raw(*a.grid(), a.values().iter().zip(b.values()).map(|(&x, &y)| x * y).collect())
}

impl<T: Real> HydroFields<T> {
    /// Builds the bundle from a density and a velocity potential.
    pub fn from_density_phase(t: T, rho: ScalarField<T>, s: ScalarField<T>, omega: ScalarField<T>, d: T) -> Result<Self> {
        rho.same_grid(&s)?;
        rho.same_grid(&omega)?;
        let fl = floored_log(&rho)?;
        let u = osmotic_from_log(&rho, &fl.ln_rho, d);
        let v = gradient(&s);
        let b = ScalarField::from_raw(*rho.grid(), v.values().iter().zip(u.values()).map(|(&a, &c)| a + c).collect());
        let Pressure { q, p } = pressure_from_u(&rho, &u, d);
        let j = mul(&v, &rho);
        let two_d = T::lit(2.0) * d;
        let phi = ScalarField::from_raw(
            *rho.grid(),
            fl.ln_rho.iter().zip(s.values()).map(|(&l, &s)| T::lit(0.5) * l + s / two_d).collect(),
        );
        let floored_fraction = fl.floored as f64 / rho.len() as f64;
        Ok(Self { t, rho, s, v, u, b, q, omega, p, j, phi, floored_fraction })
    }

    /// Builds the bundle from a density and a forward drift; `v = b - u` and
    /// `S` is its antiderivative vanishing at `x = 0`.
    pub fn from_density_drift(t: T, rho: ScalarField<T>, b: ScalarField<T>, omega: ScalarField<T>, d: T) -> Result<Self> {
        rho.same_grid(&b)?;
        let fl = floored_log(&rho)?;
        let u = osmotic_from_log(&rho, &fl.ln_rho, d);
        let v = ScalarField::from_raw(*rho.grid(), b.values().iter().zip(u.values()).map(|(&a, &c)| a - c).collect());
        let s = cumulative_integral(&v, rho.grid().nearest_index(T::zero()));
        let mut h = Self::from_density_phase(t, rho, s, omega, d)?;
        // keep the supplied drift and current velocity rather than their re-differentiated copies
        h.v = v;
        h.b = b;
        h.j = mul(&h.v, &h.rho);
        Ok(h)
    }

    /// Assembles a bundle from externally computed fields (closed forms).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        t: T,
        rho: ScalarField<T>,
        s: ScalarField<T>,
        v: ScalarField<T>,
        u: ScalarField<T>,
        q: ScalarField<T>,
        omega: ScalarField<T>,
        p: ScalarField<T>,
        phi: ScalarField<T>,
    ) -> Result<Self> {
        for f in [&s, &v, &u, &q, &omega, &p, &phi] {
            rho.same_grid(f)?;
        }
        let b = ScalarField::from_raw(*rho.grid(), v.values().iter().zip(u.values()).map(|(&a, &c)| a + c).collect());
        let j = mul(&v, &rho);
        Ok(Self { t, rho, s, v, u, b, q, omega, p, j, phi, floored_fraction: 0.0 })
    }

    pub fn grid(&self) -> &crate::grid::Grid1D<T> {
        self.rho.grid()
    }
}

/// Three consecutive time slices for centered time differences.
#[derive(Clone, Copy, Debug)]
pub struct TimeStencil<'a, T> {
    pub prev: &'a HydroFields<T>,
    pub cur: &'a HydroFields<T>,
    pub next: &'a HydroFields<T>,
}

impl<'a, T: Real> TimeStencil<'a, T> {
    pub fn new(prev: &'a HydroFields<T>, cur: &'a HydroFields<T>, next: &'a HydroFields<T>) -> Result<Self> {
        prev.rho.same_grid(&cur.rho)?;
        cur.rho.same_grid(&next.rho)?;
        if !(prev.t < cur.t && cur.t < next.t) {
            return Err(crate::error::invalid("time stencil", "slice times must be strictly increasing"));
        }
        Ok(Self { prev, cur, next })
    }

    /// Stencil centred on `slices[index]`.
    pub fn around(slices: &'a [HydroFields<T>], index: usize) -> Result<Self> {
        if index == 0 || index + 1 >= slices.len() {
            return Err(Error::MissingTimeNeighbor { index });
        }
        Self::new(&slices[index - 1], &slices[index], &slices[index + 1])
    }

    /// Second-order time derivative at `cur.t` of the selected field.
    pub fn time_derivative(&self, pick: impl Fn(&HydroFields<T>) -> &ScalarField<T>) -> Vec<T> {
        let h1 = self.cur.t - self.prev.t;
        let h2 = self.next.t - self.cur.t;
        let c0 = -h2 / (h1 * (h1 + h2));
        let c1 = (h2 - h1) / (h1 * h2);
        let c2 = h1 / (h2 * (h1 + h2));
        let (a, b, c) = (pick(self.prev).values(), pick(self.cur).values(), pick(self.next).values());
        (0..a.len()).map(|i| c0 * a[i] + c1 * b[i] + c2 * c[i]).collect()
    }
}

/// Mesh residual of the Hamilton-Jacobi equation of the chosen process.
pub fn hj_residual<T: Real>(st: &TimeStencil<'_, T>, sign: Sign) -> ScalarField<T> {
    let s_t = st.time_derivative(|h| &h.s);
    let h = st.cur;
    let vals = (0..s_t.len())
        .map(|i| hj_residual_at(s_t[i], h.v.values()[i], h.q.values()[i], h.omega.values()[i], sign))
        .collect();
    ScalarField::from_raw(*h.grid(), vals)
}

/// Mesh residual of the local momentum law of the chosen process.
pub fn momentum_law_residual<T: Real>(st: &TimeStencil<'_, T>, sign: Sign) -> ScalarField<T> {
    let v_t = st.time_derivative(|h| &h.v);
    let h = st.cur;
    let (vx, qx, ox) = (gradient(&h.v), gradient(&h.q), gradient(&h.omega));
    let vals = (0..v_t.len())
        .map(|i| momentum_residual_at(v_t[i], h.v.values()[i], vx.values()[i], qx.values()[i], ox.values()[i], sign))
        .collect();
    ScalarField::from_raw(*h.grid(), vals)
}

/// Mesh residual of the continuity equation.
pub fn continuity_residual<T: Real>(st: &TimeStencil<'_, T>) -> ScalarField<T> {
    let rho_t = st.time_derivative(|h| &h.rho);
    let jx = gradient(&st.cur.j);
    let vals = rho_t.iter().zip(jx.values()).map(|(&a, &b)| continuity_residual_at(a, b)).collect();
    ScalarField::from_raw(*st.cur.grid(), vals)
}

/// `Omega_r - 2D [dphi/dt + (b^2/2D + db/dx)/2]` on the mesh.
pub fn girsanov_residual<T: Real>(st: &TimeStencil<'_, T>, omega_r: &ScalarField<T>, d: T) -> Result<ScalarField<T>> {
    st.cur.rho.same_grid(omega_r)?;
    let phi_t = st.time_derivative(|h| &h.phi);
    let h = st.cur;
    let bx = gradient(&h.b);
    let vals = (0..phi_t.len())
        .map(|i| omega_r.values()[i] - girsanov_rhs_at(phi_t[i], h.b.values()[i], bx.values()[i], d))
        .collect();
    Ok(ScalarField::from_raw(*h.grid(), vals))
}

/// Momentum rate of change in `[a, b]` per unit mass: `∫ rho d(Omega - Q)/dx dx`.
pub fn volume_momentum_rate<T: Real>(h: &HydroFields<T>, a: T, b: T) -> Result<T> {
    let diff = ScalarField::from_raw(*h.grid(), h.omega.values().iter().zip(h.q.values()).map(|(&o, &q)| o - q).collect());
    let integrand = mul(&h.rho, &gradient(&diff));
    integrate_interval(&integrand, a, b)
}

/// Mass defect of the co-moving interval: endpoints are advected with the
/// current velocity of `h0` over `h1.t - h0.t`, and the enclosed mass at the
/// two times is compared.
pub fn comoving_interval_mass_check<T: Real>(h0: &HydroFields<T>, h1: &HydroFields<T>, a: T, b: T) -> Result<T> {
    h0.rho.same_grid(&h1.rho)?;
    let dt = h1.t - h0.t;
    let outside = || Error::IntervalOutsideGrid {
        a: a.as_f64(),
        b: b.as_f64(),
        x_min: h0.grid().x_min().as_f64(),
        x_max: h0.grid().x_max().as_f64(),
    };
    let va = h0.v.interpolate(a).ok_or_else(outside)?;
    let vb = h0.v.interpolate(b).ok_or_else(outside)?;
    let m0 = integrate_interval(&h0.rho, a, b)?;
    let m1 = integrate_interval(&h1.rho, a + va * dt, b + vb * dt)?;
    Ok((m1 - m0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    fn gauss(g: Grid1D<f64>, alpha: f64) -> ScalarField<f64> {
        let pi = std::f64::consts::PI;
        ScalarField::from_fn(g, |x| (-x * x / (alpha * alpha)).exp() / (pi.sqrt() * alpha)).unwrap()
    }

    #[test]
    fn osmotic_velocity_examples() {
        let g = Grid1D::symmetric(6.0, 1201).unwrap();
        let u = osmotic_velocity(&gauss(g, 1.0), 1.0).unwrap();
        assert!((u.interpolate(1.0).unwrap() + 2.0).abs() < 1e-9);
        let flat = osmotic_velocity(&ScalarField::constant(g, 0.1), 1.0).unwrap();
        assert!(flat.max_abs() < 1e-12);
        // free-recoil density at D = 1, alpha = 1, t = 1 is Gaussian with A = 5
        let a = 5.0;
        let pi = std::f64::consts::PI;
        let rho = ScalarField::from_fn(g, |x| (-x * x / a).exp() / (pi * a).sqrt()).unwrap();
        let u = osmotic_velocity(&rho, 1.0).unwrap();
        assert!((u.interpolate(1.0).unwrap() + 0.4).abs() < 1e-9);
    }

    #[test]
    fn corrupt_density_is_rejected() {
        let g = Grid1D::symmetric(1.0, 11).unwrap();
        let mut v = vec![1.0; 11];
        v[4] = -0.5;
        let rho = ScalarField::new(g, v).unwrap();
        assert!(matches!(osmotic_velocity(&rho, 1.0), Err(Error::CorruptDensity { index: 4, .. })));
        assert!(osmotic_velocity(&ScalarField::zeros(g), 1.0).is_err());
    }

    #[test]
    fn floor_is_reported() {
        let g = Grid1D::symmetric(40.0, 801).unwrap();
        let rho = gauss(g, 1.0);
        let f = floored_fraction(&rho).unwrap();
        assert!(f > 0.0 && f < 1.0);
        let u = osmotic_velocity(&rho, 1.0).unwrap();
        assert!(u.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pressure_examples() {
        let g = Grid1D::symmetric(8.0, 1601).unwrap();
        let pr = pressure_potential(&gauss(g, 1.0), 1.0).unwrap();
        assert!((pr.q.interpolate(0.0).unwrap() + 2.0).abs() < 1e-3);
        let flat = pressure_potential(&ScalarField::constant(g, 0.0625), 1.0).unwrap();
        assert!(flat.q.max_abs() < 1e-10 && flat.p.max_abs() < 1e-10, "{} {}", flat.q.max_abs(), flat.p.max_abs());

        // 1D free Brownian at t + t0 = 1: Gaussian with variance 2 D (t + t0) = 2
        let pi = std::f64::consts::PI;
        let rho = ScalarField::from_fn(g, |x| (-x * x / 4.0).exp() / (4.0 * pi).sqrt()).unwrap();
        let pr = pressure_potential(&rho, 1.0).unwrap();
        assert!((pr.q.interpolate(0.0).unwrap() + 0.5).abs() < 1e-4);
        // closed form P = -(D / 2(t+t0)) rho
        for x in [-1.0, 0.0, 0.7, 2.0] {
            let want = -0.5 * rho.interpolate(x).unwrap();
            assert!((pr.p.interpolate(x).unwrap() - want).abs() < 1e-4, "x={x}");
        }
    }

    #[test]
    fn omega_of_linear_drift() {
        let (d, gamma) = (0.7f64, 1.3f64);
        let g = Grid1D::symmetric(3.0, 301).unwrap();
        let b = ScalarField::from_fn(g, |x| -gamma * x).unwrap();
        let phi = ScalarField::from_fn(g, |x| -gamma * x * x / (4.0 * d)).unwrap();
        check_gradient_drift(&b, &phi, d, 1e-10).unwrap();
        let omega = omega_from_drift(&b, &ScalarField::zeros(g), d).unwrap();
        for (x, o) in g.nodes().zip(omega.values()) {
            assert!((o - (0.5 * gamma * gamma * x * x - d * gamma)).abs() < 1e-10);
        }
        let zero = omega_from_drift(&ScalarField::zeros(g), &ScalarField::zeros(g), d).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let wrong = ScalarField::from_fn(g, |x| x * x).unwrap();
        assert!(matches!(check_gradient_drift(&b, &wrong, d, 1e-6), Err(Error::NotGradientDrift { .. })));
        let recovered = drift_potential(&b, d);
        check_gradient_drift(&b, &recovered, d, 1e-10).unwrap();
    }

    #[test]
    fn pointwise_sign_identity() {
        for (st, sx, q, om) in [(0.3f64, -1.2f64, 0.8f64, 2.0f64), (-1.0, 0.0, -0.5, 0.25)] {
            let a = hj_residual_at(st, sx, q, om, Sign::Standard);
            let b = hj_residual_at(st, sx, q, om, Sign::Recoil);
            assert!((a - b - 2.0 * (q - om)).abs() < 1e-15);
        }
        assert_eq!(hj_residual_at(0.0, 0.0, 0.0, 0.0, Sign::Recoil), 0.0);
        assert_eq!(Sign::Recoil.effective_omega(1.5, 0.5), 2.5);
        assert_eq!(Sign::Standard.effective_omega(1.5, 0.5), 0.5);
    }

    fn static_slice(g: Grid1D<f64>, t: f64, offset: f64) -> HydroFields<f64> {
        let rho = ScalarField::constant(g, 1.0 / (g.x_max() - g.x_min()));
        HydroFields::from_density_phase(t, rho, ScalarField::zeros(g), ScalarField::constant(g, offset), 1.0).unwrap()
    }

    #[test]
    fn static_equilibrium_has_zero_residuals() {
        let g = Grid1D::symmetric(1.0, 21).unwrap();
        let slices = [static_slice(g, 0.0, 0.0), static_slice(g, 0.1, 0.0), static_slice(g, 0.2, 0.0)];
        let st = TimeStencil::around(&slices, 1).unwrap();
        for sign in [Sign::Standard, Sign::Recoil] {
            assert!(momentum_law_residual(&st, sign).max_abs() < 1e-12);
            assert!(hj_residual(&st, sign).max_abs() < 1e-12);
        }
        assert!(continuity_residual(&st).max_abs() < 1e-12);
        let g_res = girsanov_residual(&st, &recoil_omega(st.cur), 1.0).unwrap();
        assert!(g_res.max_abs() < 1e-12);
        assert!(matches!(TimeStencil::around(&slices, 0), Err(Error::MissingTimeNeighbor { index: 0 })));
        assert!(matches!(TimeStencil::around(&slices, 2), Err(Error::MissingTimeNeighbor { index: 2 })));
        let rate = volume_momentum_rate(st.cur, -0.5, 0.5).unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(comoving_interval_mass_check(&slices[0], &slices[1], -0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn residual_signs_differ_by_twice_pressure_gap() {
        let g = Grid1D::symmetric(4.0, 201).unwrap();
        let mk = |t: f64| {
            let rho = gauss(g, 1.0 + t);
            let s = ScalarField::from_fn(g, |x| 0.3 * t * x * x).unwrap();
            let om = ScalarField::from_fn(g, |x| 0.1 * x * x).unwrap();
            HydroFields::from_density_phase(t, rho, s, om, 1.0).unwrap()
        };
        let slices = [mk(0.0), mk(0.05), mk(0.1)];
        let st = TimeStencil::around(&slices, 1).unwrap();
        let a = hj_residual(&st, Sign::Standard);
        let b = hj_residual(&st, Sign::Recoil);
        for i in 0..g.n() {
            let gap = 2.0 * (st.cur.q.values()[i] - st.cur.omega.values()[i]);
            assert!((a.values()[i] - b.values()[i] - gap).abs() < 1e-9 * (1.0 + gap.abs()));
        }
        let omr = recoil_omega(st.cur);
        for i in 0..g.n() {
            let sum = omr.values()[i] + st.cur.omega.values()[i];
            assert!((sum - 2.0 * st.cur.q.values()[i]).abs() < 1e-12 * (1.0 + sum.abs()));
        }
        let h = st.cur;
        for i in 0..g.n() {
            assert!((h.b.values()[i] - h.v.values()[i] - h.u.values()[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn drift_constructor_keeps_decomposition() {
        let g = Grid1D::symmetric(5.0, 501).unwrap();
        let rho = gauss(g, 1.0);
        let b = ScalarField::from_fn(g, |x| -0.5 * x).unwrap();
        let h = HydroFields::from_density_drift(0.0, rho, b, ScalarField::zeros(g), 1.0).unwrap();
        for i in 0..g.n() {
            assert!((h.b.values()[i] - h.v.values()[i] - h.u.values()[i]).abs() < 1e-14);
        }
        // u = -2x, so v = b - u = 1.5 x and S = 0.75 x^2
        assert!((h.s.interpolate(2.0).unwrap() - 3.0).abs() < 1e-9);
    }
}
