//! Scenario specification files.
//!
//! A spec is a TOML document; every section except `[params]` and `[time]`
//! has defaults. See `scenarios/` for complete examples.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use recoil_lab::diagnostics::Regime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    FreeBrownian,
    FreeRecoil,
    HarmonicRecoil,
    SmoluchowskiOu,
    Custom,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::FreeBrownian => "free_brownian",
            ScenarioKind::FreeRecoil => "free_recoil",
            ScenarioKind::HarmonicRecoil => "harmonic_recoil",
            ScenarioKind::SmoluchowskiOu => "smoluchowski_ou",
            ScenarioKind::Custom => "custom",
        }
    }

    /// Whether the dynamics is the recoil (sign-flipped) process.
    pub fn is_recoil(self) -> bool {
        matches!(self, ScenarioKind::FreeRecoil | ScenarioKind::HarmonicRecoil | ScenarioKind::Custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Analytic,
    Schrodinger,
    Fp,
    Sde,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Analytic => "analytic",
            Route::Schrodinger => "schrodinger",
            Route::Fp => "fp",
            Route::Sde => "sde",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    #[serde(rename = "D")]
    pub d: f64,
    pub alpha: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub beta: f64,
    /// Spatial dimension of the free Brownian closed form (1 or 3).
    #[serde(default = "one_usize")]
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to eight standard deviations of the widest analytic density.
    pub half_width: Option<f64>,
    #[serde(default = "default_nodes")]
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: None, n: default_nodes() }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Schrodinger step; defaults to `1e-3 alpha^2 / D`.
    pub dt: Option<f64>,
    /// Fokker-Planck step; defaults to `dt`.
    pub fp_dt: Option<f64>,
    /// Spacing of stored slices; defaults to `t_end / 20`.
    pub store_dt: Option<f64>,
    /// Spacing of the Madelung drift table; defaults to the largest divisor
    /// of `store_dt` not above `1e-2 alpha^2 / D`.
    pub table_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    #[serde(default = "default_particles")]
    pub particles: usize,
    /// Defaults to `1e-3 alpha^2 / D`.
    pub dt: Option<f64>,
    /// Particles written to the snapshot file; all when absent.
    pub write_particles: Option<usize>,
    /// Repeat the run at `dt / 2` and report the change of the terminal moments.
    #[serde(default)]
    pub weak_order: bool,
}

impl Default for SdeSpec {
    fn default() -> Self {
        Self { particles: default_particles(), dt: None, write_particles: None, weak_order: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum BandwidthSpec {
    Rule(BandwidthRule),
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Silverman,
    Scott,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KdeSpec {
    pub bandwidth: BandwidthSpec,
}

impl Default for KdeSpec {
    fn default() -> Self {
        Self { bandwidth: BandwidthSpec::Rule(BandwidthRule::Silverman) }
    }
}

/// Tolerances checked after a run. A gate is evaluated only when both sides
/// of its comparison were computed.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gates {
    /// Largest `|rho - rho_exact|` of a field route over the stored slices.
    pub rho_linf: f64,
    /// Largest relative error of a field route's `<x^2>`.
    pub msd_rel: f64,
    /// Largest `|<x^2>_sde - <x^2>_ref|` in jackknife standard errors.
    pub msd_sigma: f64,
    /// Pairwise L1 distance of the final densities of all routes.
    pub triangle_l1: f64,
    /// Largest change of the total energy of a recoil field route.
    pub energy_drift: f64,
    /// Expected dispersion regime of the reference route.
    pub regime: Option<Regime>,
}

impl Default for Gates {
    fn default() -> Self {
        Self { rho_linf: 1e-4, msd_rel: 1e-3, msd_sigma: 3.0, triangle_l1: 2e-2, energy_drift: 1e-3, regime: None }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionSpec {
    /// Defaults to `alpha^2 / 2D`.
    pub crossover: Option<f64>,
    pub enhanced: (f64, f64),
    pub normal: (f64, f64),
    pub bounded_ratio: f64,
}

impl Default for DispersionSpec {
    fn default() -> Self {
        Self { crossover: None, enhanced: (1.7, 2.3), normal: (0.7, 1.3), bounded_ratio: 1.5 }
    }
}

/// Tables of the custom scenario: two-column CSV files `x,value`, resolved
/// relative to the spec file.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    /// Static potential `Omega(x)` of the recoil dynamics.
    pub omega: Option<PathBuf>,
    /// Static forward drift `b(x)` for the Fokker-Planck and SDE routes.
    pub drift: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub scenario: ScenarioKind,
    pub routes: Vec<Route>,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    pub params: ParamsSpec,
    #[serde(default)]
    pub grid: GridSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub sde: SdeSpec,
    #[serde(default)]
    pub kde: KdeSpec,
    #[serde(default)]
    pub gates: Gates,
    #[serde(default)]
    pub dispersion: DispersionSpec,
    pub custom: Option<CustomSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse spec: {0}")]
    Parse(String),
    #[error("invalid spec: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Invalid(msg.into())
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_nodes() -> usize {
    4001
}
fn default_particles() -> usize {
    100_000
}

impl ScenarioSpec {
    /// Parses and validates; relative custom table paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, SpecError> {
        let mut spec: ScenarioSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
        if let Some(custom) = &mut spec.custom {
            for p in [&mut custom.omega, &mut custom.drift].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<(Self, String), SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Read { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok((Self::parse(&text, base)?, text))
    }

    pub fn has(&self, route: Route) -> bool {
        self.routes.contains(&route)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name must not be empty"));
        }
        if self.routes.is_empty() {
            return Err(invalid("at least one route is required"));
        }
        let mut sorted = self.routes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.routes.len() {
            return Err(invalid("routes must not repeat"));
        }
        let p = &self.params;
        recoil_lab::params::PhysicalParams::new(p.d, p.m, p.beta, p.gamma, p.alpha)
            .map_err(|e| invalid(e.to_string()))?;
        if p.dim != 1 && p.dim != 3 {
            return Err(invalid("params.dim must be 1 or 3"));
        }
        if p.dim == 3 && (self.scenario != ScenarioKind::FreeBrownian || self.routes != [Route::Analytic]) {
            return Err(invalid("dim = 3 is available only for the analytic free_brownian route"));
        }
        let kind = self.scenario;
        match kind {
            ScenarioKind::HarmonicRecoil | ScenarioKind::SmoluchowskiOu if p.gamma <= 0.0 => {
                return Err(invalid(format!("{} needs gamma > 0", kind.name())));
            }
            ScenarioKind::FreeRecoil if p.gamma != 0.0 => {
                return Err(invalid("free_recoil has no potential; use harmonic_recoil for gamma > 0"));
            }
            _ => {}
        }
        if self.has(Route::Schrodinger) && !kind.is_recoil() {
            return Err(invalid(format!("the schrodinger route solves recoil dynamics only, not {}", kind.name())));
        }
        if kind == ScenarioKind::Custom {
            let custom = self.custom.as_ref().ok_or_else(|| invalid("custom scenario needs a [custom] section"))?;
            if custom.omega.is_none() && custom.drift.is_none() {
                return Err(invalid("custom scenario needs an omega or drift table"));
            }
            if self.has(Route::Analytic) {
                return Err(invalid("custom scenario has no analytic route"));
            }
            if self.has(Route::Schrodinger) && custom.omega.is_none() {
                return Err(invalid("the schrodinger route of a custom scenario needs an omega table"));
            }
            if (self.has(Route::Fp) || self.has(Route::Sde)) && custom.drift.is_none() && !self.has(Route::Schrodinger) {
                return Err(invalid("fp and sde routes of a custom scenario need a drift table or the schrodinger route"));
            }
            if self.grid.half_width.is_none() {
                return Err(invalid("custom scenario needs grid.half_width"));
            }
        } else if self.custom.is_some() {
            return Err(invalid("[custom] is only valid for the custom scenario"));
        }
        positive("time.t_end", Some(self.time.t_end))?;
        for (name, v) in [
            ("time.dt", self.time.dt),
            ("time.fp_dt", self.time.fp_dt),
            ("time.store_dt", self.time.store_dt),
            ("time.table_dt", self.time.table_dt),
            ("sde.dt", self.sde.dt),
            ("grid.half_width", self.grid.half_width),
        ] {
            positive(name, v)?;
        }
        if self.grid.n < recoil_lab::grid::MIN_NODES {
            return Err(invalid(format!("grid.n must be at least {}", recoil_lab::grid::MIN_NODES)));
        }
        if self.sde.particles < 2 {
            return Err(invalid("sde.particles must be at least 2"));
        }
        if let BandwidthSpec::Fixed(h) = self.kde.bandwidth {
            positive("kde.bandwidth", Some(h))?;
        }
        let g = &self.gates;
        for (name, v) in [
            ("gates.rho_linf", g.rho_linf),
            ("gates.msd_rel", g.msd_rel),
            ("gates.msd_sigma", g.msd_sigma),
            ("gates.triangle_l1", g.triangle_l1),
            ("gates.energy_drift", g.energy_drift),
        ] {
            positive(name, Some(v))?;
        }
        let d = &self.dispersion;
        if !(d.bounded_ratio > 1.0) || d.enhanced.0 > d.enhanced.1 || d.normal.0 > d.normal.1 {
            return Err(invalid("dispersion thresholds are inconsistent"));
        }
        Ok(())
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<(), SpecError> {
    match v {
        Some(v) if !(v.is_finite() && v > 0.0) => Err(invalid(format!("{name} must be finite and > 0, got {v}"))),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "fr"
scenario = "free_recoil"
routes = ["analytic", "schrodinger"]

[params]
D = 1.0
alpha = 1.0

[time]
t_end = 1.0
"#;

    fn parse(text: &str) -> Result<ScenarioSpec, SpecError> {
        ScenarioSpec::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.grid.n, 4001);
        assert_eq!(s.sde.particles, 100_000);
        assert_eq!(s.format, Format::Csv);
        assert_eq!(s.gates.rho_linf, 1e-4);
        assert_eq!(s.kde.bandwidth, BandwidthSpec::Rule(BandwidthRule::Silverman));
    }

    #[test]
    fn no_routes_is_rejected() {
        let text = MINIMAL.replace(r#"routes = ["analytic", "schrodinger"]"#, "routes = []");
        assert!(matches!(parse(&text), Err(SpecError::Invalid(m)) if m.contains("route")));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("t_end = 1.0", "t_end = 1.0\ntypo = 3");
        assert!(matches!(parse(&text), Err(SpecError::Parse(_))));
    }

    #[test]
    fn schrodinger_needs_recoil() {
        let text = MINIMAL.replace("free_recoil", "free_brownian");
        assert!(matches!(parse(&text), Err(SpecError::Invalid(m)) if m.contains("recoil")));
        let text = MINIMAL.replace("free_recoil", "smoluchowski_ou").replace("alpha = 1.0", "alpha = 1.0\ngamma = 1.0");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn custom_needs_tables() {
        let text = MINIMAL.replace("free_recoil", "custom").replace(r#"["analytic", "schrodinger"]"#, r#"["fp"]"#);
        assert!(parse(&text).is_err());
        let text = format!("{text}\n[custom]\ndrift = \"b.csv\"\n");
        assert!(matches!(parse(&text), Err(SpecError::Invalid(m)) if m.contains("half_width")));
        let text = text.replace("[time]", "[grid]\nhalf_width = 5.0\n\n[time]");
        let s = ScenarioSpec::parse(&text, Path::new("/specs")).unwrap();
        assert_eq!(s.custom.unwrap().drift.unwrap(), PathBuf::from("/specs/b.csv"));
    }

    #[test]
    fn fixed_bandwidth_and_regime_parse() {
        let text = format!("{MINIMAL}\n[kde]\nbandwidth = 0.2\n\n[gates]\nregime = \"enhanced\"\n");
        let s = parse(&text).unwrap();
        assert_eq!(s.kde.bandwidth, BandwidthSpec::Fixed(0.2));
        assert_eq!(s.gates.regime, Some(Regime::Enhanced));
    }

    #[test]
    fn bad_numbers_are_rejected() {
        for (from, to) in [("t_end = 1.0", "t_end = -1.0"), ("D = 1.0", "D = 0.0"), ("alpha = 1.0", "alpha = 1.0\ndim = 2")] {
            assert!(parse(&MINIMAL.replace(from, to)).is_err(), "{to}");
        }
    }
}
