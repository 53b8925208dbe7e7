//! Deterministic field evolution: the Fokker-Planck equation under a given
//! drift, and the linear wave equation whose Madelung fields carry the
//! recoil dynamics.

pub mod fokker_planck;
pub mod schrodinger;
pub mod tridiag;

pub use fokker_planck::{solve_fokker_planck, FokkerPlanckProblem, FokkerPlanckSolution};
pub use schrodinger::{
    build_recoil_problem, madelung_decompose, solve_schrodinger, Potential, SchrodingerProblem, WaveSolution,
};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Uniform stepping from `t_start` to `t_end`, keeping every `store_every`-th
/// step and the last one.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Schedule<T> {
    pub n_steps: usize,
    pub dt: T,
    pub t_start: T,
    store_every: usize,
}

impl<T: Real> Schedule<T> {
    pub fn new(t_start: T, t_end: T, dt: T, store_every: usize) -> Result<Self> {
        let span = t_end - t_start;
        if !(dt > T::zero() && dt.is_finite() && span.is_finite() && span >= T::zero()) {
            return Err(invalid("dt", "need dt > 0 and t_end >= t_start"));
        }
        if store_every == 0 {
            return Err(invalid("store_every", "must be at least 1"));
        }
        let n_steps = (span / dt - T::lit(1e-9)).ceil().to_usize().unwrap_or(0);
        let dt = if n_steps == 0 { dt } else { span / T::from_usize_lossy(n_steps) };
        Ok(Self { n_steps, dt, t_start, store_every })
    }

    pub fn time(&self, step: usize) -> T {
        self.t_start + self.dt * T::from_usize_lossy(step)
    }

    pub fn stores(&self, step: usize) -> bool {
        step % self.store_every == 0 || step == self.n_steps
    }
}
