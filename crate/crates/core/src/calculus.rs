//! Second-order mesh calculus: derivatives, trapezoidal quadrature and
//! antiderivatives on a uniform grid.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, ScalarField};
use crate::scalar::Real;

/// First derivative. Centered differences in the interior, one-sided
/// second-order stencils at both ends; exact for quadratics everywhere.
pub fn gradient<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid();
    ScalarField::from_raw(*g, gradient_slice(f.values(), g.dx()))
}

pub(crate) fn gradient_slice<T: Real>(v: &[T], dx: T) -> Vec<T> {
    let n = v.len();
    let inv2 = (T::lit(2.0) * dx).recip();
    let mut out = Vec::with_capacity(n);
    out.push((T::lit(-3.0) * v[0] + T::lit(4.0) * v[1] - v[2]) * inv2);
    out.extend((1..n - 1).map(|i| (v[i + 1] - v[i - 1]) * inv2));
    out.push((T::lit(3.0) * v[n - 1] - T::lit(4.0) * v[n - 2] + v[n - 3]) * inv2);
    out
}

/// Second derivative: 3-point stencil inside, 4-point one-sided stencils at the ends.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = f.grid();
    let v = f.values();
    let n = v.len();
    let inv = (g.dx() * g.dx()).recip();
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(n);
    out.push((two * v[0] - T::lit(5.0) * v[1] + T::lit(4.0) * v[2] - v[3]) * inv);
    out.extend((1..n - 1).map(|i| (v[i + 1] - two * v[i] + v[i - 1]) * inv));
    out.push((two * v[n - 1] - T::lit(5.0) * v[n - 2] + T::lit(4.0) * v[n - 3] - v[n - 4]) * inv);
    ScalarField::from_raw(*g, out)
}

/// Trapezoidal rule over the whole grid.
pub fn integrate<T: Real>(f: &ScalarField<T>) -> T {
    trapezoid(f.values(), f.grid().dx())
}

pub(crate) fn trapezoid<T: Real>(v: &[T], dx: T) -> T {
    let n = v.len();
    let inner: T = v[1..n - 1].iter().copied().sum();
    dx * (inner + (v[0] + v[n - 1]) * T::lit(0.5))
}

/// Trapezoidal integral of the piecewise-linear interpolant over `[a, b]`.
pub fn integrate_interval<T: Real>(f: &ScalarField<T>, a: T, b: T) -> Result<T> {
    let g = f.grid();
    if !(a <= b && g.contains(a) && g.contains(b)) {
        return Err(Error::IntervalOutsideGrid {
            a: a.as_f64(),
            b: b.as_f64(),
            x_min: g.x_min().as_f64(),
            x_max: g.x_max().as_f64(),
        });
    }
    let v = f.values();
    let half = T::lit(0.5);
    let (ia, sa) = g.locate(a).expect("checked");
    let (ib, sb) = g.locate(b).expect("checked");
    let at = |i: usize, s: T| v[i] + s * (v[i + 1] - v[i]);
    let dx = g.dx();
    if ia == ib {
        return Ok((sb - sa) * dx * (at(ia, sa) + at(ib, sb)) * half);
    }
    // partial cell from a to node ia+1, full cells, partial cell from node ib to b
    let mut total = (T::one() - sa) * dx * (at(ia, sa) + v[ia + 1]) * half;
    for i in ia + 1..ib {
        total += dx * (v[i] + v[i + 1]) * half;
    }
    total += sb * dx * (v[ib] + at(ib, sb)) * half;
    Ok(total)
}

/// Running trapezoidal antiderivative that vanishes at node `anchor`.
pub fn cumulative_integral<T: Real>(f: &ScalarField<T>, anchor: usize) -> ScalarField<T> {
    let g = f.grid();
    let v = f.values();
    let n = v.len();
    let anchor = anchor.min(n - 1);
    let h = g.dx() * T::lit(0.5);
    let mut out = vec![T::zero(); n];
    for i in anchor + 1..n {
        out[i] = out[i - 1] + h * (v[i - 1] + v[i]);
    }
    for i in (0..anchor).rev() {
        out[i] = out[i + 1] - h * (v[i] + v[i + 1]);
    }
    ScalarField::from_raw(*g, out)
}

/// Weighted moment `∫ x^k f dx`.
pub fn moment<T: Real>(f: &ScalarField<T>, k: i32) -> T {
    let g: &Grid1D<T> = f.grid();
    let w: Vec<T> = g.nodes().zip(f.values()).map(|(x, &v)| x.powi(k) * v).collect();
    trapezoid(&w, g.dx())
}
