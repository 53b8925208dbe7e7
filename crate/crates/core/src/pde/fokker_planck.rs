//! `d rho/dt = -d(b rho)/dx + D d^2 rho/dx^2` with zero-flux ends.
//!
//! Nodes are cell centres. The flux through the face between nodes `i` and
//! `i + 1` is the exponentially fitted (Scharfetter-Gummel) form
//! `F = (D/dx) [B(-w) rho_i - B(w) rho_{i+1}]`, `w = b dx / D`,
//! `B(z) = z / (e^z - 1)`, which reproduces `rho ∝ exp(∫ b/D)` exactly for a
//! drift that is linear between nodes. Time stepping is Crank-Nicolson.
//! Mass `dx Σ rho` is conserved to roundoff.

use serde::Serialize;

use super::tridiag::Tridiagonal;
use super::Schedule;
use crate::calculus::integrate;
use crate::drift::DriftSource;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::scalar::Real;

/// Densities below `-NEGATIVE_DENSITY_TOL` abort the run.
pub const NEGATIVE_DENSITY_TOL: f64 = 1e-12;

/// Largest initial mass defect accepted.
pub const MASS_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FokkerPlanckProblem<T> {
    pub rho0: ScalarField<T>,
    pub drift: DriftSource<T>,
    pub d: T,
    pub dt: T,
    pub t_start: T,
    pub t_end: T,
    pub store_every: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FokkerPlanckSolution<T> {
    pub grid: Grid1D<T>,
    pub times: Vec<T>,
    pub rho: Vec<ScalarField<T>>,
    pub dt: T,
    /// Largest change of `dx Σ rho` over one step.
    pub max_mass_drift: f64,
    /// `2 D dt / dx^2`; above 1 only the implicit scheme is stable.
    pub stability_ratio: f64,
}

/// `z / (e^z - 1)`.
fn bernoulli<T: Real>(z: T) -> T {
    if z.abs() < T::lit(1e-6) {
        T::one() - z / T::lit(2.0) + z * z / T::lit(12.0)
    } else {
        z / z.exp_m1()
    }
}

/// Generator `L` of the semi-discrete system `d rho/dt = L rho`.
fn generator<T: Real>(faces: &[T], d: T, dx: T) -> Tridiagonal<T> {
    let n = faces.len() + 1;
    let k = d / (dx * dx);
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    for (f, &b) in faces.iter().enumerate() {
        let w = b * dx / d;
        let (bp, bm) = (bernoulli(w), bernoulli(-w));
        // face f couples nodes f and f + 1
        diag[f] -= k * bm;
        upper[f] += k * bp;
        lower[f + 1] += k * bm;
        diag[f + 1] -= k * bp;
    }
    Tridiagonal::new(lower, diag, upper)
}

/// `I + s L`.
fn shifted<T: Real>(l: &Tridiagonal<T>, s: T) -> Tridiagonal<T> {
    Tridiagonal::new(
        l.lower.iter().map(|&a| s * a).collect(),
        l.diag.iter().map(|&a| T::one() + s * a).collect(),
        l.upper.iter().map(|&a| s * a).collect(),
    )
}

fn is_static<T>(drift: &DriftSource<T>) -> bool {
    matches!(drift, DriftSource::Zero | DriftSource::Smoluchowski { .. })
}

pub fn solve_fokker_planck<T: Real>(p: &FokkerPlanckProblem<T>) -> Result<FokkerPlanckSolution<T>> {
    if !(p.d > T::zero() && p.d.is_finite()) {
        return Err(invalid("D", "must be finite and > 0"));
    }
    let grid = *p.rho0.grid();
    if let Some(index) = p.rho0.values().iter().position(|&r| r < -T::lit(NEGATIVE_DENSITY_TOL)) {
        return Err(Error::CorruptDensity { index, value: p.rho0.values()[index].as_f64() });
    }
    let mass0 = integrate(&p.rho0);
    if (mass0 - T::one()).abs() > T::lit(MASS_TOL) {
        return Err(Error::NotNormalized { norm: mass0.as_f64() });
    }
    let sched = Schedule::new(p.t_start, p.t_end, p.dt, p.store_every)?;
    p.drift.check_horizon(p.t_start, sched.time(sched.n_steps))?;
    let dx = grid.dx();
    let dt = sched.dt;
    let stability_ratio = (T::lit(2.0) * p.d * dt / (dx * dx)).as_f64();
    if stability_ratio > 1.0 {
        log::info!("Fokker-Planck dt exceeds the explicit bound dx^2/2D by {stability_ratio:.2}x; relying on Crank-Nicolson");
    }

    let half = dt * T::lit(0.5);
    let fixed = is_static(&p.drift);
    let mut l_now = generator(&p.drift.on_faces(&grid, sched.time(0))?, p.d, dx);
    let mut implicit = shifted(&l_now, -half).factor()?;
    let mut rho = p.rho0.values().to_vec();
    let mut rhs = vec![T::zero(); rho.len()];
    let sum_mass = |r: &[T]| r.iter().copied().sum::<T>() * dx;
    let mut max_mass_drift = 0.0f64;
    let mut times = vec![sched.time(0)];
    let mut stored = vec![p.rho0.clone()];

    for step in 1..=sched.n_steps {
        let explicit = shifted(&l_now, half);
        explicit.apply(&rho, &mut rhs);
        if !fixed {
            l_now = generator(&p.drift.on_faces(&grid, sched.time(step))?, p.d, dx);
            implicit = shifted(&l_now, -half).factor()?;
        }
        let before = sum_mass(&rho);
        implicit.solve(&mut rhs);
        std::mem::swap(&mut rho, &mut rhs);
        if rho.iter().any(|r| !r.is_finite()) {
            return Err(Error::StabilityViolation { step });
        }
        if let Some(index) = rho.iter().position(|&r| r < -T::lit(NEGATIVE_DENSITY_TOL)) {
            return Err(Error::NegativeDensity { step, index, value: rho[index].as_f64() });
        }
        max_mass_drift = max_mass_drift.max((sum_mass(&rho) - before).abs().as_f64());
        if sched.stores(step) {
            times.push(sched.time(step));
            stored.push(ScalarField::new(grid, rho.clone())?);
        }
    }
    Ok(FokkerPlanckSolution { grid, times, rho: stored, dt, max_mass_drift, stability_ratio })
}
