//! Forward drifts `b(x, t)` fed to the ensemble and Fokker-Planck routes.

use std::fmt;
use std::sync::Arc;

use crate::analytic::{FreeRecoilSolution, HarmonicRecoilSolution};
use crate::error::{invalid, Error, Result};
use crate::fieldcalc::HydroFields;
use crate::grid::{Grid1D, ScalarField};
use crate::scalar::Real;

/// External force of a Smoluchowski process.
#[derive(Clone)]
pub enum Force<T> {
    /// `F = -k x`.
    Linear { stiffness: T },
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> Force<T> {
    pub fn at(&self, x: T) -> T {
        match self {
            Force::Linear { stiffness } => -*stiffness * x,
            Force::Custom(f) => f(x),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Force<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Force::Linear { stiffness } => f.debug_struct("Linear").field("stiffness", stiffness).finish(),
            Force::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Recoil drifts known in closed form.
#[derive(Clone, Copy, Debug)]
pub enum AnalyticDrift<T> {
    FreeRecoil(FreeRecoilSolution<T>),
    HarmonicRecoil(HarmonicRecoilSolution<T>),
}

impl<T: Real> AnalyticDrift<T> {
    /// Both recoil drifts are linear in `x`: `b = k(t) x`.
    pub fn coefficient(&self, t: T) -> T {
        match self {
            AnalyticDrift::FreeRecoil(s) => s.drift_coefficient(t),
            AnalyticDrift::HarmonicRecoil(s) => s.drift_coefficient(t),
        }
    }

    pub fn at(&self, x: T, t: T) -> T {
        self.coefficient(t) * x
    }
}

/// Drift sampled on a space-time mesh.
///
/// Each slice carries the node range where it is trusted; the range is the
/// contiguous block around the density peak above a relative threshold.
#[derive(Clone, Debug)]
pub struct DriftTable<T> {
    grid: Grid1D<T>,
    times: Vec<T>,
    b: Vec<Vec<T>>,
    valid: Vec<(usize, usize)>,
}

/// Default relative density below which tabulated drift values are not trusted.
pub const TABLE_DENSITY_THRESHOLD: f64 = 1e-14;

/// Why a strict table lookup failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Miss {
    Space,
    Time,
}

impl<T: Real> DriftTable<T> {
    pub fn new(grid: Grid1D<T>, times: Vec<T>, b: Vec<Vec<T>>, valid: Vec<(usize, usize)>) -> Result<Self> {
        if times.is_empty() || times.len() != b.len() || times.len() != valid.len() {
            return Err(invalid("drift table", "need one drift slice and one valid range per time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("drift table", "times must be strictly increasing"));
        }
        for (k, (slice, &(lo, hi))) in b.iter().zip(&valid).enumerate() {
            if slice.len() != grid.n() {
                return Err(Error::LengthMismatch { expected: grid.n(), got: slice.len() });
            }
            if !(lo < hi && hi < grid.n()) {
                return Err(invalid("drift table", format!("bad valid range ({lo}, {hi}) in slice {k}")));
            }
            if let Some(index) = slice[lo..=hi].iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: lo + index });
            }
        }
        Ok(Self { grid, times, b, valid })
    }

    /// Tabulates the drift of hydrodynamic slices, trusting nodes where
    /// `rho > threshold * peak`.
    pub fn from_hydro(slices: &[HydroFields<T>], threshold: T) -> Result<Self> {
        Self::from_hydro_iter(slices.iter().map(|h| Ok(h.clone())), threshold)
    }

    /// Same as [`DriftTable::from_hydro`], consuming slices one at a time.
    pub fn from_hydro_iter(slices: impl IntoIterator<Item = Result<HydroFields<T>>>, threshold: T) -> Result<Self> {
        let mut grid = None;
        let (mut times, mut b, mut valid) = (Vec::new(), Vec::new(), Vec::new());
        for h in slices {
            let h = h?;
            match grid {
                None => grid = Some(*h.grid()),
                Some(g) if g != *h.grid() => return Err(Error::GridMismatch),
                Some(_) => {}
            }
            times.push(h.t);
            valid.push(trusted_range(&h.rho, threshold));
            b.push(h.b.into_values());
        }
        let grid = grid.ok_or_else(|| invalid("drift table", "no slices"))?;
        Self::new(grid, times, b, valid)
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn valid_range(&self, k: usize) -> (usize, usize) {
        self.valid[k]
    }

    pub fn t_min(&self) -> T {
        self.times[0]
    }
    pub fn t_max(&self) -> T {
        self.times[self.times.len() - 1]
    }

    /// Slice index `k` and weight `w` with `t = (1 - w) t_k + w t_{k+1}`.
    fn bracket(&self, t: T) -> Option<(usize, T)> {
        let n = self.times.len();
        let slack = T::lit(1e-9) * (T::one() + self.t_max().abs());
        if t < self.t_min() - slack || t > self.t_max() + slack {
            return None;
        }
        if n == 1 {
            return Some((0, T::zero()));
        }
        let k = self.times.partition_point(|&s| s <= t).clamp(1, n - 1) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        Some((k, w.max(T::zero()).min(T::one())))
    }

    /// Bilinear lookup that refuses to leave the trusted region.
    pub fn at(&self, x: T, t: T) -> std::result::Result<T, Miss> {
        let (k, w) = self.bracket(t).ok_or(Miss::Time)?;
        self.at_bracket(x, k, w)
    }

    fn at_bracket(&self, x: T, k: usize, w: T) -> std::result::Result<T, Miss> {
        let (i, s) = self.grid.locate(x).ok_or(Miss::Space)?;
        let k1 = (k + 1).min(self.times.len() - 1);
        for kk in [k, k1] {
            let (lo, hi) = self.valid[kk];
            if i < lo || i + 1 > hi {
                return Err(Miss::Space);
            }
        }
        let lerp = |row: &[T]| row[i] + s * (row[i + 1] - row[i]);
        let (b0, b1) = (lerp(&self.b[k]), lerp(&self.b[k1]));
        Ok(b0 + w * (b1 - b0))
    }

    /// Lookup that holds the edge value of the trusted region outside it.
    pub fn held(&self, x: T, t: T) -> Result<T> {
        let (k, w) = self.bracket(t).ok_or(Error::DriftHorizon {
            t: t.as_f64(),
            t_min: self.t_min().as_f64(),
            t_max: self.t_max().as_f64(),
        })?;
        let k1 = (k + 1).min(self.times.len() - 1);
        let at = |kk: usize| {
            let (lo, hi) = self.valid[kk];
            let xc = x.max(self.grid.x(lo)).min(self.grid.x(hi));
            let (i, s) = self.grid.locate(xc).expect("clamped into grid");
            let row = &self.b[kk];
            if i + 1 > hi {
                row[hi]
            } else {
                row[i] + s * (row[i + 1] - row[i])
            }
        };
        let (b0, b1) = (at(k), at(k1));
        Ok(b0 + w * (b1 - b0))
    }
}

fn trusted_range<T: Real>(rho: &ScalarField<T>, threshold: T) -> (usize, usize) {
    let v = rho.values();
    let peak_i = rho.argmax();
    let cut = v[peak_i] * threshold;
    let mut lo = peak_i;
    while lo > 0 && v[lo - 1] > cut {
        lo -= 1;
    }
    let mut hi = peak_i;
    while hi + 1 < v.len() && v[hi + 1] > cut {
        hi += 1;
    }
    if lo == hi {
        if hi + 1 < v.len() {
            hi += 1;
        } else {
            lo -= 1;
        }
    }
    (lo, hi)
}

/// Time-dependent part of a drift evaluation, shared by all particles at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prepared<T> {
    /// `b = k x`.
    Linear(T),
    Custom,
    Table { k: usize, w: T },
    OutOfTime,
}

/// Where the forward drift comes from.
#[derive(Clone, Debug)]
pub enum DriftSource<T> {
    Zero,
    /// `b = F / (m beta)`.
    Smoluchowski { force: Force<T>, mobility: T },
    Analytic(AnalyticDrift<T>),
    Tabulated(Arc<DriftTable<T>>),
}

impl<T: Real> DriftSource<T> {
    /// Strict pointwise drift; a tabulated source refuses points outside its trusted region.
    pub fn at(&self, x: T, t: T) -> std::result::Result<T, Miss> {
        match self {
            DriftSource::Zero => Ok(T::zero()),
            DriftSource::Smoluchowski { force, mobility } => Ok(*mobility * force.at(x)),
            DriftSource::Analytic(a) => Ok(a.at(x, t)),
            DriftSource::Tabulated(table) => table.at(x, t),
        }
    }

    /// Precomputes everything that depends on `t` only.
    pub fn prepare(&self, t: T) -> Prepared<T> {
        match self {
            DriftSource::Zero => Prepared::Linear(T::zero()),
            DriftSource::Smoluchowski { force: Force::Linear { stiffness }, mobility } => {
                Prepared::Linear(-*mobility * *stiffness)
            }
            DriftSource::Smoluchowski { .. } => Prepared::Custom,
            DriftSource::Analytic(a) => Prepared::Linear(a.coefficient(t)),
            DriftSource::Tabulated(table) => match table.bracket(t) {
                Some((k, w)) => Prepared::Table { k, w },
                None => Prepared::OutOfTime,
            },
        }
    }

    /// Same as [`DriftSource::at`] with the time part precomputed by [`DriftSource::prepare`].
    #[inline]
    pub fn at_prepared(&self, x: T, prepared: &Prepared<T>) -> std::result::Result<T, Miss> {
        match (prepared, self) {
            (Prepared::Linear(k), _) => Ok(*k * x),
            (Prepared::Custom, DriftSource::Smoluchowski { force, mobility }) => Ok(*mobility * force.at(x)),
            (Prepared::Table { k, w }, DriftSource::Tabulated(table)) => table.at_bracket(x, *k, *w),
            (Prepared::OutOfTime, _) => Err(Miss::Time),
            _ => unreachable!("prepared for a different drift source"),
        }
    }

    /// Drift at arbitrary points; tabulated sources hold their edge values.
    pub fn held(&self, x: T, t: T) -> Result<T> {
        match self {
            DriftSource::Tabulated(table) => table.held(x, t),
            other => Ok(other.at(x, t).expect("closed-form drifts are total")),
        }
    }

    /// Errors if the source cannot serve times in `[t0, t1]`.
    pub fn check_horizon(&self, t0: T, t1: T) -> Result<()> {
        if let DriftSource::Tabulated(table) = self {
            for t in [t0, t1] {
                if table.bracket(t).is_none() {
                    return Err(Error::DriftHorizon {
                        t: t.as_f64(),
                        t_min: table.t_min().as_f64(),
                        t_max: table.t_max().as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Drift at the grid nodes.
    pub fn on_nodes(&self, grid: &Grid1D<T>, t: T) -> Result<ScalarField<T>> {
        ScalarField::new(*grid, grid.nodes().map(|x| self.held(x, t)).collect::<Result<Vec<T>>>()?)
    }

    /// Drift at the `n - 1` cell faces `x_i + dx/2`.
    pub fn on_faces(&self, grid: &Grid1D<T>, t: T) -> Result<Vec<T>> {
        let half = grid.dx() * T::lit(0.5);
        (0..grid.n() - 1).map(|i| self.held(grid.x(i) + half, t)).collect()
    }
}
