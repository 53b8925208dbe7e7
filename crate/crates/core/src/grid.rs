use num_complex::Complex;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

/// Uniform 1D mesh on `[x_min, x_max]` with `n` nodes, both ends included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D<T> {
    x_min: T,
    x_max: T,
    n: usize,
    dx: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::GridTooSmall { n, min: MIN_NODES });
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(invalid("grid", format!("need finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        let dx = (x_max - x_min) / T::from_usize_lossy(n - 1);
        Ok(Self { x_min, x_max, n, dx })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: T, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }
    pub fn x_max(&self) -> T {
        self.x_max
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dx(&self) -> T {
        self.dx
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + self.dx * T::from_usize_lossy(i)
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = T> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Cell index `i` and fractional offset `s in [0, 1]` with `x = x_i + s dx`.
    pub fn locate(&self, x: T) -> Option<(usize, T)> {
        if !self.contains(x) {
            return None;
        }
        let pos = (x - self.x_min) / self.dx;
        let i = pos.floor().to_usize().unwrap_or(0).min(self.n - 2);
        Some((i, pos - T::from_usize_lossy(i)))
    }

    pub fn nearest_index(&self, x: T) -> usize {
        let pos = ((x - self.x_min) / self.dx).round();
        if pos <= T::zero() {
            0
        } else {
            pos.to_usize().unwrap_or(self.n - 1).min(self.n - 1)
        }
    }

    /// Same interval with every cell halved (`2n - 1` nodes).
    pub fn refined(&self) -> Self {
        Self::new(self.x_min, self.x_max, 2 * self.n - 1).expect("refinement of a valid grid")
    }

    pub fn cast<U: Real>(&self) -> Grid1D<U> {
        Grid1D::new(U::lit(self.x_min.as_f64()), U::lit(self.x_max.as_f64()), self.n)
            .expect("cast of a valid grid")
    }
}

fn check_len<T: Real>(grid: &Grid1D<T>, len: usize) -> Result<()> {
    if len == grid.n() {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected: grid.n(), got: len })
    }
}

/// Real function sampled on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarField<T> {
    grid: Grid1D<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D<T>, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(grid, grid.nodes().map(f).collect())
    }

    pub fn constant(grid: Grid1D<T>, c: T) -> Self {
        Self { grid, values: vec![c; grid.n()] }
    }

    pub fn zeros(grid: Grid1D<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_raw(grid: Grid1D<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    pub fn into_values(self) -> Vec<T> {
        self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.same_grid(other)?;
        Self::new(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Piecewise-linear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x: T) -> Option<T> {
        let (i, s) = self.grid.locate(x)?;
        Some(self.values[i] + s * (self.values[i + 1] - self.values[i]))
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }
}

/// Complex function sampled on a [`Grid1D`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField<T> {
    grid: Grid1D<T>,
    values: Vec<Complex<T>>,
}

impl<T: Real> ComplexField<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<Complex<T>>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(index) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Grid1D<T>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `|psi|^2` as a density field.
    pub fn density(&self) -> ScalarField<T> {
        ScalarField::from_raw(self.grid, self.values.iter().map(|z| z.norm_sqr()).collect())
    }

    /// Squared L2 norm, trapezoidal rule.
    pub fn norm_sqr(&self) -> T {
        crate::calculus::integrate(&self.density())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::from_raw(self.grid, self.values.iter().map(|z| z * s).collect())
    }
}
