use std::ops::{Add, Div, Mul, Sub};

use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Element type of a tridiagonal system (real or complex).
pub trait Entry: Copy + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {}

impl<F> Entry for F where F: Copy + Zero + One + Add<Output = F> + Sub<Output = F> + Mul<Output = F> + Div<Output = F> {}

/// Tridiagonal matrix; `lower[0]` and `upper[n - 1]` are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal<F> {
    pub lower: Vec<F>,
    pub diag: Vec<F>,
    pub upper: Vec<F>,
}

impl<F: Entry> Tridiagonal<F> {
    pub fn new(lower: Vec<F>, diag: Vec<F>, upper: Vec<F>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len(), "band lengths differ");
        Self { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[F], y: &mut [F]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc = acc + self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc = acc + self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    /// Thomas elimination without pivoting.
    pub fn factor(&self) -> Result<Factored<F>> {
        let n = self.len();
        let mut inv = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut prev_c = F::zero();
        for i in 0..n {
            let denom = if i == 0 { self.diag[0] } else { self.diag[i] - self.lower[i] * prev_c };
            if denom.is_zero() {
                return Err(Error::SingularSystem { row: i });
            }
            let r = F::one() / denom;
            prev_c = if i + 1 < n { self.upper[i] * r } else { F::zero() };
            inv.push(r);
            c.push(prev_c);
        }
        Ok(Factored { lower: self.lower.clone(), inv, c })
    }
}

/// LU factors of a [`Tridiagonal`], reusable across right-hand sides.
#[derive(Clone, Debug)]
pub struct Factored<F> {
    lower: Vec<F>,
    inv: Vec<F>,
    c: Vec<F>,
}

impl<F: Entry> Factored<F> {
    /// Solves in place.
    pub fn solve(&self, rhs: &mut [F]) {
        let n = rhs.len();
        rhs[0] = rhs[0] * self.inv[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - self.c[i] * rhs[i + 1];
        }
    }
}
