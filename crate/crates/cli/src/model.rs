//! Physics of each scenario: closed forms, potentials and drifts.

use std::sync::Arc;

use recoil_lab::analytic::{
    sample_hydro, smoluchowski_omega_at, ClosedForm, Dim, FreeBrownianSolution, FreeRecoilSolution,
    HarmonicRecoilSolution, HarmonicRegime,
};
use recoil_lab::drift::{AnalyticDrift, DriftSource, Force};
use recoil_lab::{Field, Grid, Hydro, Params};

use crate::io::{read_profile, IoError};
use crate::spec::{ScenarioKind, ScenarioSpec};

/// Smoluchowski relaxation `b = -gamma x` from the Gaussian initial density.
#[derive(Clone, Copy, Debug)]
pub struct OuSolution {
    pub params: Params,
}

impl OuSolution {
    fn stationary(&self) -> f64 {
        self.params.d() / self.params.gamma()
    }

    /// `D/gamma + (sigma0^2 - D/gamma) exp(-2 gamma t)`.
    pub fn msd(&self, t: f64) -> f64 {
        let s = self.stationary();
        s + (self.params.initial_variance() - s) * (-2.0 * self.params.gamma() * t).exp()
    }

    fn force_stiffness(&self) -> f64 {
        self.params.gamma() / self.params.mobility()
    }
}

#[derive(Clone, Debug)]
pub enum Model {
    FreeBrownian(FreeBrownianSolution<f64>),
    FreeRecoil(FreeRecoilSolution<f64>),
    Harmonic(HarmonicRecoilSolution<f64>),
    Ou(OuSolution),
    Custom { params: Params, omega: Option<Vec<f64>>, drift: Option<Vec<f64>> },
}

fn gaussian(alpha: f64, x: f64) -> f64 {
    (-x * x / (alpha * alpha)).exp() / (std::f64::consts::PI.sqrt() * alpha)
}

fn gaussian_var(var: f64, x: f64) -> f64 {
    (-x * x / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

impl Model {
    pub fn params(&self) -> &Params {
        match self {
            Model::FreeBrownian(s) => s.params(),
            Model::FreeRecoil(s) => s.params(),
            Model::Harmonic(s) => s.params(),
            Model::Ou(s) => &s.params,
            Model::Custom { params, .. } => params,
        }
    }

    /// Builds the model; custom tables are read and sampled on `grid`.
    pub fn build(spec: &ScenarioSpec, params: Params, grid: &Grid) -> Result<Self, IoError> {
        Ok(match spec.scenario {
            ScenarioKind::FreeBrownian => {
                let dim = if spec.params.dim == 3 { Dim::Three } else { Dim::One };
                Model::FreeBrownian(FreeBrownianSolution::new(params, dim))
            }
            ScenarioKind::FreeRecoil => Model::FreeRecoil(FreeRecoilSolution::new(params)),
            ScenarioKind::HarmonicRecoil => {
                Model::Harmonic(HarmonicRecoilSolution::new(params).expect("validated gamma > 0"))
            }
            ScenarioKind::SmoluchowskiOu => Model::Ou(OuSolution { params }),
            ScenarioKind::Custom => {
                let custom = spec.custom.as_ref().expect("validated custom section");
                let sample = |p: &Option<std::path::PathBuf>| -> Result<Option<Vec<f64>>, IoError> {
                    p.as_ref().map(|p| read_profile(p, grid.nodes())).transpose()
                };
                Model::Custom { params, omega: sample(&custom.omega)?, drift: sample(&custom.drift)? }
            }
        })
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self, Model::Custom { .. })
    }

    pub fn harmonic_regime(&self) -> Option<HarmonicRegime> {
        match self {
            Model::Harmonic(s) => Some(s.regime()),
            _ => None,
        }
    }

    pub fn msd(&self, t: f64) -> Option<f64> {
        match self {
            Model::FreeBrownian(s) => Some(s.msd(t)),
            Model::FreeRecoil(s) => Some(s.msd(t)),
            Model::Harmonic(s) => Some(s.msd(t)),
            Model::Ou(s) => Some(s.msd(t)),
            Model::Custom { .. } => None,
        }
    }

    /// Largest analytic `<x^2>` over `[0, t_end]`.
    pub fn max_msd(&self, t_end: f64) -> Option<f64> {
        match self {
            Model::Harmonic(s) => Some(s.msd_bound()),
            Model::Ou(s) => Some(s.msd(0.0).max(s.msd(t_end))),
            _ => self.msd(t_end),
        }
    }

    /// Initial density, the Gaussian of width `alpha`.
    pub fn initial_density(&self, grid: &Grid) -> Field {
        let alpha = self.params().alpha();
        Field::from_fn(*grid, |x| gaussian(alpha, x)).expect("finite Gaussian")
    }

    /// Static potential `Omega` entering the field equations.
    pub fn omega(&self, grid: &Grid) -> Field {
        match self {
            Model::FreeBrownian(_) | Model::FreeRecoil(_) => Field::zeros(*grid),
            Model::Harmonic(s) => Field::from_fn(*grid, |x| s.point(x, 0.0).omega).expect("finite potential"),
            Model::Ou(s) => {
                let k = s.force_stiffness();
                Field::from_fn(*grid, |x| smoluchowski_omega_at(-k * x, -k, &s.params)).expect("finite potential")
            }
            Model::Custom { omega, .. } => match omega {
                Some(v) => Field::new(*grid, v.clone()).expect("sampled on grid"),
                None => Field::zeros(*grid),
            },
        }
    }

    /// Closed-form or table-defined forward drift, if the scenario has one.
    pub fn drift(&self, grid: &Grid) -> Option<DriftSource<f64>> {
        match self {
            Model::FreeBrownian(_) => Some(DriftSource::Zero),
            Model::FreeRecoil(s) => Some(DriftSource::Analytic(AnalyticDrift::FreeRecoil(*s))),
            Model::Harmonic(s) => Some(DriftSource::Analytic(AnalyticDrift::HarmonicRecoil(*s))),
            Model::Ou(s) => Some(DriftSource::Smoluchowski {
                force: Force::Linear { stiffness: s.force_stiffness() },
                mobility: s.params.mobility(),
            }),
            Model::Custom { drift, .. } => drift.as_ref().map(|b| {
                let field = Field::new(*grid, b.clone()).expect("sampled on grid");
                let (lo, hi) = (b[0], b[b.len() - 1]);
                let x_min = grid.x_min();
                let f = move |x: f64| field.interpolate(x).unwrap_or(if x < x_min { lo } else { hi });
                DriftSource::Smoluchowski { force: Force::Custom(Arc::new(f)), mobility: 1.0 }
            }),
        }
    }

    /// Closed-form density on `grid`.
    pub fn density(&self, grid: &Grid, t: f64) -> Option<Field> {
        match self {
            Model::Ou(s) => {
                let var = s.msd(t);
                Some(Field::from_fn(*grid, |x| gaussian_var(var, x)).expect("finite Gaussian"))
            }
            Model::Custom { .. } => None,
            _ => self.hydro(grid, t).map(|h| h.expect("closed form on grid").rho),
        }
    }

    /// Closed-form hydrodynamic fields; the Smoluchowski case derives `S`
    /// and the velocities from its exact density and drift.
    pub fn hydro(&self, grid: &Grid, t: f64) -> Option<recoil_lab::Result<Hydro>> {
        Some(match self {
            Model::FreeBrownian(s) => sample_hydro(s, *grid, t),
            Model::FreeRecoil(s) => sample_hydro(s, *grid, t),
            Model::Harmonic(s) => sample_hydro(s, *grid, t),
            Model::Ou(s) => {
                let rho = self.density(grid, t)?;
                let g = s.params.gamma();
                let b = Field::from_fn(*grid, |x| -g * x).expect("finite drift");
                Hydro::from_density_drift(t, rho, b, self.omega(grid), s.params.d())
            }
            Model::Custom { .. } => return None,
        })
    }
}
