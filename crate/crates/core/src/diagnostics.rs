//! Moments, energies, dispersion classification and field comparisons.
//!
//! Reports are plain `f64` regardless of the scalar type of the run.

use serde::{Deserialize, Serialize};

use crate::calculus::{integrate, moment};
use crate::error::{invalid, Error, Result};
use crate::fieldcalc::HydroFields;
use crate::grid::ScalarField;
use crate::params::PhysicalParams;
use crate::scalar::Real;
use crate::sde::{empirical_moments, EnsembleState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSource {
    Analytic,
    Sde,
    Pde,
}

/// Second moment `<x^2>` against time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsdSeries {
    pub times: Vec<f64>,
    pub msd: Vec<f64>,
    /// Jackknife standard errors, ensemble series only.
    pub std_err: Option<Vec<f64>>,
    pub source: SeriesSource,
}

impl MsdSeries {
    pub fn new(times: Vec<f64>, msd: Vec<f64>, std_err: Option<Vec<f64>>, source: SeriesSource) -> Result<Self> {
        if times.len() != msd.len() || std_err.as_ref().is_some_and(|e| e.len() != times.len()) {
            return Err(invalid("msd series", "times, values and errors differ in length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("msd series", "times must be strictly increasing"));
        }
        if msd.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(invalid("msd series", "second moments must be finite and non-negative"));
        }
        Ok(Self { times, msd, std_err, source })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `∫ x^2 rho / ∫ rho` for each slice.
pub fn msd_from_fields<T: Real>(times: &[T], rho: &[ScalarField<T>], source: SeriesSource) -> Result<MsdSeries> {
    if times.len() != rho.len() {
        return Err(invalid("msd series", "one density per time"));
    }
    let msd = rho
        .iter()
        .map(|r| {
            let mass = integrate(r);
            if !(mass > T::zero()) {
                return Err(Error::NonNormalizable { mass: mass.as_f64() });
            }
            Ok((moment(r, 2) / mass).as_f64())
        })
        .collect::<Result<Vec<f64>>>()?;
    MsdSeries::new(times.iter().map(|t| t.as_f64()).collect(), msd, None, source)
}

pub fn msd_from_ensemble<T: Real>(snapshots: &[EnsembleState<T>]) -> Result<MsdSeries> {
    let mut msd = Vec::with_capacity(snapshots.len());
    let mut err = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        let m = empirical_moments(s, &[2])?[0];
        msd.push(m.value);
        err.push(m.std_err);
    }
    MsdSeries::new(snapshots.iter().map(|s| s.t.as_f64()).collect(), msd, Some(err), SeriesSource::Sde)
}

/// Energy functionals per slice; `total = kinetic + osmotic + potential`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `∫ v^2/2 rho`.
    pub kinetic: Vec<f64>,
    /// `-∫ Q rho`.
    pub osmotic: Vec<f64>,
    /// `∫ Omega rho`.
    pub potential: Vec<f64>,
    pub total: Vec<f64>,
}

impl EnergyReport {
    /// Largest deviation of the total from its first value.
    pub fn total_drift(&self) -> f64 {
        let t0 = self.total.first().copied().unwrap_or(0.0);
        self.total.iter().fold(0.0, |m, t| m.max((t - t0).abs()))
    }
}

pub fn energy_report<T: Real>(slices: &[HydroFields<T>]) -> Result<EnergyReport> {
    let mut r = EnergyReport { times: vec![], kinetic: vec![], osmotic: vec![], potential: vec![], total: vec![] };
    if let Some(first) = slices.first() {
        for h in slices {
            first.rho.same_grid(&h.rho)?;
        }
    }
    for h in slices {
        let weighted = |f: &dyn Fn(usize) -> T| {
            let vals = (0..h.rho.len()).map(|i| f(i) * h.rho.values()[i]).collect();
            integrate(&ScalarField::new(*h.grid(), vals).expect("finite fields")).as_f64()
        };
        let kin = weighted(&|i| T::lit(0.5) * h.v.values()[i] * h.v.values()[i]);
        let osm = -weighted(&|i| h.q.values()[i]);
        let pot = weighted(&|i| h.omega.values()[i]);
        r.times.push(h.t.as_f64());
        r.kinetic.push(kin);
        r.osmotic.push(osm);
        r.potential.push(pot);
        r.total.push(kin + osm + pot);
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Enhanced,
    Normal,
    NonDispersive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DispersionVerdict {
    pub regime: Regime,
    /// Log-log slope on the tail window, unbounded regimes only.
    pub exponent: Option<f64>,
    /// Half-width of the 95% interval of the slope.
    pub exponent_ci: Option<f64>,
    /// Largest `<x^2>` on the window, bounded regime only.
    pub bound: Option<f64>,
    pub window: (f64, f64),
}

/// Thresholds of [`classify_dispersion`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispersionConfig {
    /// The fit window is the last decade and must start past this time.
    pub crossover: f64,
    pub enhanced: (f64, f64),
    pub normal: (f64, f64),
    /// A window with `max/min < bounded_ratio` is non-dispersive.
    pub bounded_ratio: f64,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { crossover: 0.0, enhanced: (1.7, 2.3), normal: (0.7, 1.3), bounded_ratio: 1.5 }
    }
}

impl DispersionConfig {
    /// Default thresholds with crossover `alpha^2 / 2D`.
    pub fn for_params<T: Real>(p: &PhysicalParams<T>) -> Self {
        Self { crossover: (p.alpha() * p.alpha() / (T::lit(2.0) * p.d())).as_f64(), ..Self::default() }
    }
}

/// Least-squares line `y = a + b x`; returns `(b, standard error of b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, se)
}

/// Classifies the growth of `<x^2>` on the last decade of the series.
pub fn classify_dispersion(s: &MsdSeries, cfg: &DispersionConfig) -> Result<DispersionVerdict> {
    let t_last = *s.times.last().ok_or_else(|| Error::SeriesTooShort { reason: "empty series".into() })?;
    let t_lo = t_last / 10.0;
    if !(t_lo > 0.0 && t_lo >= cfg.crossover) {
        return Err(Error::SeriesTooShort {
            reason: format!("last time {t_last} is not a decade past the crossover {}", cfg.crossover),
        });
    }
    let window: Vec<(f64, f64)> =
        s.times.iter().zip(&s.msd).filter(|(t, _)| **t >= t_lo * (1.0 - 1e-12)).map(|(&t, &m)| (t, m)).collect();
    if window.len() < 3 {
        return Err(Error::SeriesTooShort { reason: format!("{} samples in the fit window", window.len()) });
    }
    let hi = window.iter().fold(0.0f64, |m, p| m.max(p.1));
    let lo = window.iter().fold(f64::INFINITY, |m, p| m.min(p.1));
    let span = (window[0].0, t_last);
    if lo > 0.0 && hi / lo < cfg.bounded_ratio {
        return Ok(DispersionVerdict {
            regime: Regime::NonDispersive,
            exponent: None,
            exponent_ci: None,
            bound: Some(hi),
            window: span,
        });
    }
    if !(lo > 0.0) {
        return Err(Error::SeriesTooShort { reason: "zero second moment in the fit window".into() });
    }
    let lx: Vec<f64> = window.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let (slope, se) = linear_fit(&lx, &ly);
    let inside = |r: (f64, f64)| slope >= r.0 && slope <= r.1;
    let regime = if inside(cfg.enhanced) {
        Regime::Enhanced
    } else if inside(cfg.normal) {
        Regime::Normal
    } else {
        return Err(Error::AmbiguousDispersion { exponent: slope });
    };
    Ok(DispersionVerdict { regime, exponent: Some(slope), exponent_ci: Some(1.96 * se), bound: None, window: span })
}

/// Distances between two fields on a common grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldComparison {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Errors of the moments of order 0, 1, 2 of `a` against `b`: relative
    /// where the reference moment is nonzero, absolute otherwise.
    pub moment_errors: [f64; 3],
}

/// Reference moments below this are compared absolutely.
const MOMENT_ZERO: f64 = 1e-12;

pub fn compare_fields<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> Result<FieldComparison> {
    a.same_grid(b)?;
    let diff = a.zip_with(b, |x, y| x - y)?;
    let l1 = integrate(&diff.map(|v| v.abs())?).as_f64();
    let l2 = integrate(&diff.map(|v| v * v)?).as_f64().sqrt();
    let linf = diff.max_abs().as_f64();
    let mut moment_errors = [0.0; 3];
    for (k, e) in moment_errors.iter_mut().enumerate() {
        let (ma, mb) = (moment(a, k as i32).as_f64(), moment(b, k as i32).as_f64());
        *e = if mb.abs() > MOMENT_ZERO { (ma - mb).abs() / mb.abs() } else { (ma - mb).abs() };
    }
    Ok(FieldComparison { l1, l2, linf, moment_errors })
}

/// Least-squares slope of `v` against `x` on `[-half_width, half_width]`,
/// times `t`: the ratio `v t / x` of a linear velocity field.
pub fn velocity_ratio<T: Real>(v: &ScalarField<T>, t: T, half_width: T) -> Result<f64> {
    let g = v.grid();
    let (xs, vs): (Vec<f64>, Vec<f64>) = g
        .nodes()
        .zip(v.values())
        .filter(|(x, _)| x.abs() <= half_width)
        .map(|(x, &val)| (x.as_f64(), val.as_f64()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::SeriesTooShort { reason: format!("{} nodes in the velocity window", xs.len()) });
    }
    Ok(linear_fit(&xs, &vs).0 * t.as_f64())
}
