//! `i dpsi/dt = -D d^2psi/dx^2 + (Omega / 2D) psi` on a box with `psi = 0` at
//! both ends, by Crank-Nicolson.
//!
//! With `psi = sqrt(rho) exp(i theta)` and `S = 2 D theta`, `rho` and `S` obey
//! the continuity equation with `v = dS/dx` and the recoil Hamilton-Jacobi
//! equation `dS/dt + (dS/dx)^2/2 - Q + Omega = 0`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use super::tridiag::{Factored, Tridiagonal};
use super::Schedule;
use crate::calculus::integrate;
use crate::error::{Error, Result};
use crate::drift::DriftTable;
use crate::fieldcalc::HydroFields;
use crate::grid::{ComplexField, Grid1D, ScalarField};
use crate::scalar::Real;

/// Aborts when `|psi|^2` next to either wall exceeds this fraction of the peak.
pub const EDGE_GUARD: f64 = 1e-10;

/// Largest accepted deviation of the initial norm from 1.
pub const NORM_TOL: f64 = 1e-6;

/// Phase steps above this between two well-populated nodes mean the grid is
/// too coarse for the local wavelength.
pub const MAX_PHASE_STEP: f64 = 0.75 * std::f64::consts::PI;

/// Nodes with `rho > PHASE_CHECK_DENSITY * peak` are checked for phase resolution.
pub const PHASE_CHECK_DENSITY: f64 = 1e-6;

/// The auxiliary potential `Omega`.
#[derive(Clone)]
pub enum Potential<T> {
    Static(ScalarField<T>),
    /// Evaluated at step midpoints. Experimental: no example needs it.
    TimeDependent(Arc<dyn Fn(T) -> Result<ScalarField<T>> + Send + Sync>),
}

impl<T: Real> Potential<T> {
    pub fn at(&self, t: T) -> Result<ScalarField<T>> {
        match self {
            Potential::Static(f) => Ok(f.clone()),
            Potential::TimeDependent(f) => f(t),
        }
    }

    /// Returns the same potential shifted by a constant.
    pub fn shifted(&self, c: T) -> Self {
        match self {
            Potential::Static(f) => Potential::Static(f.map(|v| v + c).expect("finite shift")),
            Potential::TimeDependent(f) => {
                let f = f.clone();
                Potential::TimeDependent(Arc::new(move |t| f(t)?.map(|v| v + c)))
            }
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Potential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Static(field) => f.debug_tuple("Static").field(field).finish(),
            Potential::TimeDependent(_) => f.write_str("TimeDependent(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchrodingerProblem<T> {
    pub psi0: ComplexField<T>,
    pub potential: Potential<T>,
    pub d: T,
    pub dt: T,
    pub t_start: T,
    pub t_end: T,
    pub store_every: usize,
}

/// Stored wave slices.
#[derive(Clone, Debug)]
pub struct WaveSolution<T> {
    pub grid: Grid1D<T>,
    pub d: T,
    pub dt: T,
    pub times: Vec<T>,
    pub psi: Vec<ComplexField<T>>,
    /// Phase at the anchor node, followed continuously in time.
    pub anchor_phase: Vec<T>,
    pub anchor: usize,
    pub potential: Potential<T>,
    /// Largest change of the squared norm over one step.
    pub max_norm_drift: f64,
}

impl<T: Real> WaveSolution<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Madelung fields of stored slice `index`.
    pub fn hydro(&self, index: usize) -> Result<HydroFields<T>> {
        let t = self.times[index];
        let omega = self.potential.at(t)?;
        madelung_decompose(&self.psi[index], self.anchor, self.anchor_phase[index], omega, self.d, t)
    }

    pub fn hydro_all(&self) -> Result<Vec<HydroFields<T>>> {
        (0..self.len()).map(|i| self.hydro(i)).collect()
    }

    /// Forward drift of every stored slice, without keeping the other fields.
    pub fn drift_table(&self, threshold: T) -> Result<DriftTable<T>> {
        DriftTable::from_hydro_iter((0..self.len()).map(|i| self.hydro(i)), threshold)
    }
}

/// Splits `psi` into density and velocity potential `S = 2 D theta`.
///
/// The phase is unwrapped from `anchor` outward, starting from the
/// continuously tracked `anchor_phase`.
pub fn madelung_decompose<T: Real>(
    psi: &ComplexField<T>,
    anchor: usize,
    anchor_phase: T,
    omega: ScalarField<T>,
    d: T,
    t: T,
) -> Result<HydroFields<T>> {
    let grid = *psi.grid();
    let z = psi.values();
    let rho = psi.density();
    let peak = rho.max();
    let dense = peak * T::lit(PHASE_CHECK_DENSITY);
    let two_d = T::lit(2.0) * d;
    let mut theta = vec![T::zero(); z.len()];
    theta[anchor] = anchor_phase;
    let step = |i: usize, j: usize| -> Result<T> {
        let dphi = (z[j] * z[i].conj()).arg();
        let r = rho.values();
        if r[i] > dense && r[j] > dense && dphi.abs() > T::lit(MAX_PHASE_STEP) {
            return Err(Error::PhaseUnderResolved { index: i.min(j), step: dphi.as_f64() });
        }
        Ok(dphi)
    };
    for i in anchor + 1..z.len() {
        theta[i] = theta[i - 1] + step(i - 1, i)?;
    }
    for i in (0..anchor).rev() {
        theta[i] = theta[i + 1] + step(i + 1, i)?;
    }
    let s = ScalarField::new(grid, theta.into_iter().map(|th| two_d * th).collect())?;
    HydroFields::from_density_phase(t, rho, s, omega, d)
}

/// Cayley propagator for one potential. The minimum of the potential is
/// split off and applied as an exact global phase, so constant shifts of
/// `Omega` leave `|psi|^2` untouched.
struct Stepper<T> {
    explicit: Tridiagonal<Complex<T>>,
    implicit: Factored<Complex<T>>,
    /// Phase `offset dt / 2D` removed per step.
    phase_per_step: T,
}

impl<T: Real> Stepper<T> {
    fn new(omega: &ScalarField<T>, d: T, dt: T) -> Result<Self> {
        if let Some(index) = omega.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::PotentialUnbounded { index });
        }
        let dx = omega.grid().dx();
        let m = omega.len() - 2;
        let off = -d / (dx * dx);
        let half = dt * T::lit(0.5);
        let i_half = Complex::new(T::zero(), half);
        let one = Complex::new(T::one(), T::zero());
        let offset = omega.min();
        let two_d = T::lit(2.0) * d;
        let h_diag: Vec<T> =
            omega.values()[1..=m].iter().map(|&o| two_d / (dx * dx) + (o - offset) / two_d).collect();
        let band = |sign: T| {
            Tridiagonal::new(
                vec![i_half * sign * off; m],
                h_diag.iter().map(|&h| one + i_half * sign * h).collect(),
                vec![i_half * sign * off; m],
            )
        };
        Ok(Self { explicit: band(-T::one()), implicit: band(T::one()).factor()?, phase_per_step: offset * dt / two_d })
    }

    fn advance(&self, psi: &mut [Complex<T>], scratch: &mut [Complex<T>]) {
        let m = psi.len() - 2;
        self.explicit.apply(&psi[1..=m], &mut scratch[..m]);
        self.implicit.solve(&mut scratch[..m]);
        psi[1..=m].copy_from_slice(&scratch[..m]);
    }
}

fn edge_ratio<T: Real>(psi: &[Complex<T>]) -> T {
    let peak = psi.iter().fold(T::zero(), |m, z| m.max(z.norm_sqr()));
    let n = psi.len();
    psi[1].norm_sqr().max(psi[n - 2].norm_sqr()) / peak
}

fn rect_norm<T: Real>(psi: &[Complex<T>], dx: T) -> T {
    psi.iter().map(|z| z.norm_sqr()).sum::<T>() * dx
}

pub fn solve_schrodinger<T: Real>(p: &SchrodingerProblem<T>) -> Result<WaveSolution<T>> {
    if !(p.d > T::zero() && p.d.is_finite()) {
        return Err(crate::error::invalid("D", "must be finite and > 0"));
    }
    let grid = *p.psi0.grid();
    let norm = p.psi0.norm_sqr();
    if (norm - T::one()).abs() > T::lit(NORM_TOL) {
        return Err(Error::NotNormalized { norm: norm.as_f64() });
    }
    let sched = Schedule::new(p.t_start, p.t_end, p.dt, p.store_every)?;
    let dx = grid.dx();
    let dt = sched.dt;
    let mut psi = p.psi0.values().to_vec();
    psi[0] = Complex::new(T::zero(), T::zero());
    let last = psi.len() - 1;
    psi[last] = psi[0];
    let guard = T::lit(EDGE_GUARD);
    let ratio = edge_ratio(&psi);
    if ratio > guard {
        return Err(Error::BoundaryReached { t: p.t_start.as_f64(), ratio: ratio.as_f64() });
    }

    let anchor = grid.nearest_index(T::zero());
    let mut phase = psi[anchor].arg();
    let fixed = matches!(p.potential, Potential::Static(_));
    let half = dt * T::lit(0.5);
    let mut stepper = Stepper::new(&p.potential.at(sched.time(0) + half)?, p.d, dt)?;
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); psi.len()];
    let mut max_norm_drift = 0.0f64;
    let mut times = vec![sched.time(0)];
    let mut slices = vec![ComplexField::new(grid, psi.clone())?];
    let mut phases = vec![phase];
    // psi is carried without the split-off global phase
    let mut global = T::zero();

    for step in 1..=sched.n_steps {
        if !fixed && step > 1 {
            stepper = Stepper::new(&p.potential.at(sched.time(step - 1) + half)?, p.d, dt)?;
        }
        let before = rect_norm(&psi, dx);
        let old_anchor = psi[anchor];
        stepper.advance(&mut psi, &mut scratch);
        global -= stepper.phase_per_step;
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::StabilityViolation { step });
        }
        phase += (psi[anchor] * old_anchor.conj()).arg();
        max_norm_drift = max_norm_drift.max((rect_norm(&psi, dx) - before).abs().as_f64());
        let ratio = edge_ratio(&psi);
        if ratio > guard {
            return Err(Error::BoundaryReached { t: sched.time(step).as_f64(), ratio: ratio.as_f64() });
        }
        if sched.stores(step) {
            times.push(sched.time(step));
            let rot = Complex::from_polar(T::one(), global);
            slices.push(ComplexField::new(grid, psi.iter().map(|z| z * rot).collect())?);
            phases.push(phase + global);
        }
    }
    Ok(WaveSolution {
        grid,
        d: p.d,
        dt,
        times,
        psi: slices,
        anchor_phase: phases,
        anchor,
        potential: p.potential.clone(),
        max_norm_drift,
    })
}

/// Recoil problem from an initial density at rest: `psi0 = sqrt(rho0)`.
pub fn build_recoil_problem<T: Real>(
    rho0: &ScalarField<T>,
    potential: Potential<T>,
    d: T,
    dt: T,
    t_end: T,
    store_every: usize,
) -> Result<SchrodingerProblem<T>> {
    if let Some(index) = rho0.values().iter().position(|&r| r < T::zero()) {
        return Err(Error::CorruptDensity { index, value: rho0.values()[index].as_f64() });
    }
    let mass = integrate(rho0);
    if (mass - T::one()).abs() > T::lit(NORM_TOL) {
        return Err(Error::NotNormalized { norm: mass.as_f64() });
    }
    let grid = *rho0.grid();
    let mut amp: Vec<Complex<T>> = rho0.values().iter().map(|&r| Complex::new(r.sqrt(), T::zero())).collect();
    let n = amp.len();
    amp[0] = Complex::new(T::zero(), T::zero());
    amp[n - 1] = amp[0];
    let psi0 = ComplexField::new(grid, amp)?;
    let psi0 = psi0.scaled(psi0.norm_sqr().sqrt().recip());
    Ok(SchrodingerProblem { psi0, potential, d, dt, t_start: T::zero(), t_end, store_every })
}

/// Serializable run summary.
#[derive(Clone, Debug, Serialize)]
pub struct WaveSummary {
    pub steps_stored: usize,
    pub dt: f64,
    pub max_norm_drift: f64,
}

impl<T: Real> From<&WaveSolution<T>> for WaveSummary {
    fn from(w: &WaveSolution<T>) -> Self {
        Self { steps_stored: w.len(), dt: w.dt.as_f64(), max_norm_drift: w.max_norm_drift }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{sample_density, ClosedForm, FreeRecoilSolution, HarmonicRecoilSolution};
    use crate::params::PhysicalParams;

    fn unit() -> PhysicalParams<f64> {
        PhysicalParams::diffusion(1.0, 1.0).unwrap()
    }

    fn linf(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
        a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn free_recoil_density_and_drift() {
        let sol = FreeRecoilSolution::new(unit());
        let g = Grid1D::symmetric(20.0, 2001).unwrap();
        let rho0 = sample_density(&sol, g, 0.0).unwrap();
        let p = build_recoil_problem(&rho0, Potential::Static(ScalarField::zeros(g)), 1.0, 1e-3, 1.0, 100).unwrap();
        let w = solve_schrodinger(&p).unwrap();
        assert_eq!(w.len(), 11);
        assert!(w.max_norm_drift < 1e-12);
        let rho1 = w.psi.last().unwrap().density();
        assert!(linf(&rho1, &sample_density(&sol, g, 1.0).unwrap()) < 1e-4);
        let h = w.hydro(w.len() - 1).unwrap();
        for x in [-2.0, -0.5, 0.7, 1.5] {
            let i = g.nearest_index(x);
            let xi = g.x(i);
            assert!((h.v.values()[i] - 0.8 * xi).abs() < 1e-3, "v at {xi}");
            assert!((h.b.values()[i] - 0.4 * xi).abs() < 1e-3, "b at {xi}");
        }
        let h0 = w.hydro(0).unwrap();
        assert!(h0.v.max_abs() < 1e-12);
        let i = g.nearest_index(1.0);
        assert!((h0.b.values()[i] + 2.0).abs() < 1e-4);
        // tracked phase matches the analytic S at the origin, S(0, 1) = -arctan 2
        assert!((h.s.values()[w.anchor] - sol.point(0.0, 1.0).s).abs() < 1e-4);
    }

    #[test]
    fn matched_harmonic_is_stationary() {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 2.0, 1.0).unwrap();
        let sol = HarmonicRecoilSolution::new(params).unwrap();
        let g = Grid1D::symmetric(8.0, 3201).unwrap();
        let omega = ScalarField::from_fn(g, |x| 0.5 * 4.0 * x * x - 2.0).unwrap();
        let rho0 = sample_density(&sol, g, 0.0).unwrap();
        let period = std::f64::consts::PI / 2.0;
        let p = build_recoil_problem(&rho0, Potential::Static(omega), 1.0, 1e-3, 3.0 * period, 100).unwrap();
        let w = solve_schrodinger(&p).unwrap();
        let first = w.psi[0].density();
        // residual breathing comes from the O(dx^2) gap between the continuum
        // and the discrete ground state: about 0.018 dx^2 here
        for psi in &w.psi {
            assert!(linf(&psi.density(), &first) < 3e-6);
        }
    }

    #[test]
    fn constant_shift_of_potential_only_changes_phase() {
        let sol = FreeRecoilSolution::new(unit());
        let g = Grid1D::symmetric(15.0, 601).unwrap();
        let rho0 = sample_density(&sol, g, 0.0).unwrap();
        let omega = Potential::Static(ScalarField::from_fn(g, |x| 0.1 * x * x).unwrap());
        let a = solve_schrodinger(&build_recoil_problem(&rho0, omega.clone(), 1.0, 1e-2, 1.0, 100).unwrap()).unwrap();
        let b = solve_schrodinger(&build_recoil_problem(&rho0, omega.shifted(3.0), 1.0, 1e-2, 1.0, 100).unwrap()).unwrap();
        let (ra, rb) = (a.psi.last().unwrap().density(), b.psi.last().unwrap().density());
        assert!(linf(&ra, &rb) < 1e-12);
    }

    #[test]
    fn one_step_preserves_norm_of_flat_state() {
        let g = Grid1D::symmetric(50.0, 1001).unwrap();
        let mut v = vec![Complex::new(1.0, 0.0); 1001];
        v[0] = Complex::new(0.0, 0.0);
        v[1000] = v[0];
        for (k, z) in v.iter_mut().enumerate().take(60) {
            *z = z.scale(k as f64 / 60.0);
        }
        for (k, z) in v.iter_mut().rev().enumerate().take(60) {
            *z = z.scale(k as f64 / 60.0);
        }
        let psi = ComplexField::new(g, v).unwrap();
        let psi0 = psi.scaled(psi.norm_sqr().sqrt().recip());
        let before = psi0.norm_sqr();
        let stepper = Stepper::new(&ScalarField::zeros(g), 1.0, 0.01).unwrap();
        let mut z = psi0.values().to_vec();
        let mut scratch = z.clone();
        stepper.advance(&mut z, &mut scratch);
        let after = ComplexField::new(g, z).unwrap().norm_sqr();
        assert!((after - before).abs() < 1e-14);
    }

    #[test]
    fn guards() {
        let sol = FreeRecoilSolution::new(unit());
        let g = Grid1D::symmetric(6.0, 301).unwrap();
        let rho0 = sample_density(&sol, g, 0.0).unwrap();
        let p = build_recoil_problem(&rho0, Potential::Static(ScalarField::zeros(g)), 1.0, 1e-2, 5.0, 10).unwrap();
        assert!(matches!(solve_schrodinger(&p), Err(Error::BoundaryReached { .. })));
        let half = rho0.map(|r| 0.5 * r).unwrap();
        assert!(matches!(
            build_recoil_problem(&half, Potential::Static(ScalarField::zeros(g)), 1.0, 1e-2, 1.0, 1),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn real_positive_wave_has_no_current() {
        let g = Grid1D::symmetric(8.0, 401).unwrap();
        let rho = ScalarField::from_fn(g, |x: f64| (-x * x).exp() / std::f64::consts::PI.sqrt()).unwrap();
        let psi = ComplexField::new(g, rho.values().iter().map(|r| Complex::new(r.sqrt(), 0.0)).collect()).unwrap();
        let h = madelung_decompose(&psi, 200, 0.0, ScalarField::zeros(g), 1.0, 0.0).unwrap();
        assert_eq!(h.s.max_abs(), 0.0);
        assert_eq!(h.v.max_abs(), 0.0);
        assert_eq!(h.b, h.u);
    }

    #[test]
    fn coarse_phase_is_reported() {
        let g = Grid1D::symmetric(8.0, 101).unwrap();
        let psi = ComplexField::new(
            g,
            g.nodes().map(|x: f64| Complex::from_polar((-x * x / 8.0).exp(), 19.0 * x)).collect(),
        )
        .unwrap();
        assert!(matches!(
            madelung_decompose(&psi, 50, 0.0, ScalarField::zeros(g), 1.0, 0.0),
            Err(Error::PhaseUnderResolved { .. })
        ));
    }
}
