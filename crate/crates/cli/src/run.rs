//! Executes a scenario spec: dispatches the routes, checks the gates and
//! writes the run directory.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use recoil_lab::analytic::HarmonicRegime;
use recoil_lab::diagnostics::{
    classify_dispersion, compare_fields, energy_report, msd_from_ensemble, msd_from_fields, DispersionConfig,
    EnergyReport, FieldComparison, MsdSeries, SeriesSource,
};
use recoil_lab::drift::{DriftSource, TABLE_DENSITY_THRESHOLD};
use recoil_lab::pde::{
    build_recoil_problem, solve_fokker_planck, solve_schrodinger, FokkerPlanckProblem, Potential,
};
use recoil_lab::sde::{
    empirical_moments, evolve, kde_density, kurtosis_ratio, sample_initial, Bandwidth, EnsembleRun, InitialDensity,
    MomentEstimate, SdeConfig,
};
use recoil_lab::{Error, Field, Grid, Hydro, Params};

use crate::io::{IoError, Manifest, OutputDir, Table};
use crate::model::Model;
use crate::spec::{BandwidthRule, BandwidthSpec, Format, Gates, ParamsSpec, Route, ScenarioKind, ScenarioSpec, SpecError};

/// Command-line overrides of a spec.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    /// Stop after the first stage with a failed gate, and fail gates that
    /// could not be evaluated.
    pub strict: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{route} route failed: {source}")]
    Solver { route: Route, source: Error },
    #[error(transparent)]
    Io(#[from] IoError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Spec(_) => 2,
            RunError::Solver { .. } | RunError::Io(_) => 3,
        }
    }
}

fn solver(route: Route) -> impl Fn(Error) -> RunError {
    move |source| RunError::Solver { route, source }
}

/// Resolved numerical settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Plan {
    pub half_width: f64,
    pub n: usize,
    pub t_end: f64,
    pub store_dt: f64,
    pub n_store: usize,
    pub dt: f64,
    pub store_every: usize,
    pub table_every: usize,
    pub fp_dt: f64,
    pub fp_store_every: usize,
    pub sde_dt: f64,
    pub sde_stride: usize,
    pub particles: usize,
    pub seed: u64,
}

/// Number of `step`s in `span`, which must be a whole multiple.
fn whole(span: f64, step: f64, what: &str) -> Result<usize, SpecError> {
    let k = (span / step).round();
    if k < 1.0 || (k * step - span).abs() > 1e-9 * span {
        return Err(SpecError::Invalid(format!("{what}: {span} is not a whole multiple of {step}")));
    }
    Ok(k as usize)
}

/// Largest step not above `target` that divides `span`.
fn dividing_step(span: f64, target: f64) -> f64 {
    span / (span / target - 1e-9).ceil().max(1.0)
}

impl Plan {
    pub fn resolve(spec: &ScenarioSpec, seed: u64, params: &Params) -> Result<Self, SpecError> {
        let time = &spec.time;
        let t_end = time.t_end;
        let tau = params.alpha() * params.alpha() / params.d();
        let store_dt = time.store_dt.unwrap_or(t_end / 20.0);
        let n_store = whole(t_end, store_dt, "time.t_end over time.store_dt")?;
        let dt = time.dt.unwrap_or_else(|| dividing_step(store_dt, 1e-3 * tau));
        let store_every = whole(store_dt, dt, "time.store_dt over time.dt")?;
        let table_every = match time.table_dt {
            Some(table_dt) => {
                let k = whole(table_dt, dt, "time.table_dt over time.dt")?;
                if store_every % k != 0 {
                    return Err(SpecError::Invalid("time.store_dt must be a whole multiple of time.table_dt".into()));
                }
                k
            }
            None => (1..=store_every)
                .filter(|m| store_every % m == 0)
                .map(|m| store_every / m)
                .find(|&k| k as f64 * dt <= 1e-2 * tau * (1.0 + 1e-9))
                .unwrap_or(1),
        };
        let fp_dt = time.fp_dt.unwrap_or(dt);
        let fp_store_every = whole(store_dt, fp_dt, "time.store_dt over time.fp_dt")?;
        let sde_dt = spec.sde.dt.unwrap_or_else(|| dividing_step(store_dt, 1e-3 * tau));
        let sde_stride = whole(store_dt, sde_dt, "time.store_dt over sde.dt")?;
        let half_width = match spec.grid.half_width {
            Some(h) => h,
            None => {
                let probe = Grid::symmetric(1.0, recoil_lab::grid::MIN_NODES).expect("valid probe grid");
                let model = Model::build(spec, *params, &probe).expect("closed-form scenarios read no files");
                8.0 * model.max_msd(t_end).expect("closed form").sqrt()
            }
        };
        Ok(Self {
            half_width,
            n: spec.grid.n,
            t_end,
            store_dt,
            n_store,
            dt,
            store_every,
            table_every,
            fp_dt,
            fp_store_every,
            sde_dt,
            sde_stride,
            particles: spec.sde.particles,
            seed,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionReport {
    /// `enhanced`, `normal`, `non_dispersive`, `ambiguous` or `unavailable`.
    pub regime: String,
    pub exponent: Option<f64>,
    pub exponent_ci: Option<f64>,
    pub bound: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub reason: Option<String>,
}

fn regime_name(r: recoil_lab::diagnostics::Regime) -> String {
    serde_json::to_value(r).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

impl DispersionReport {
    fn classify(s: &MsdSeries, cfg: &DispersionConfig) -> Self {
        match classify_dispersion(s, cfg) {
            Ok(v) => Self {
                regime: regime_name(v.regime),
                exponent: v.exponent,
                exponent_ci: v.exponent_ci,
                bound: v.bound,
                window: Some(v.window),
                reason: None,
            },
            Err(Error::AmbiguousDispersion { exponent }) => Self {
                regime: "ambiguous".into(),
                exponent: Some(exponent),
                exponent_ci: None,
                bound: None,
                window: None,
                reason: Some("slope matches no regime band".into()),
            },
            Err(e) => Self {
                regime: "unavailable".into(),
                exponent: None,
                exponent_ci: None,
                bound: None,
                window: None,
                reason: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakOrderReport {
    pub dt: f64,
    pub msd: f64,
    pub msd_half_dt: f64,
    pub difference: f64,
    pub std_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouteReport {
    pub files: Vec<String>,
    pub msd: MsdSeries,
    pub dispersion: DispersionReport,
    pub energy: Option<EnergyReport>,
    pub diagnostics: BTreeMap<String, f64>,
    pub weak_order: Option<WeakOrderReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub a: Route,
    pub b: Route,
    pub t: f64,
    #[serde(flatten)]
    pub metrics: FieldComparison,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateResult {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: Option<f64>,
    pub expected: Option<String>,
    pub observed: Option<String>,
    pub status: GateStatus,
}

impl GateResult {
    fn bound(name: String, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { GateStatus::Pass } else { GateStatus::Fail };
        Self { name, value: Some(value), tolerance: Some(tolerance), expected: None, observed: None, status }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub params: ParamsSpec,
    pub settings: Plan,
    pub harmonic_regime: Option<HarmonicRegime>,
    pub routes: BTreeMap<Route, RouteReport>,
    pub comparisons: Vec<Comparison>,
    pub tolerances: Gates,
    pub gates: Vec<GateResult>,
    pub stopped_early: bool,
    pub passed: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: Report,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed
    }
}

/// Stored slices of a deterministic route.
struct FieldSeries {
    times: Vec<f64>,
    hydro: Vec<Hydro>,
}

impl FieldSeries {
    fn rho(&self) -> Vec<Field> {
        self.hydro.iter().map(|h| h.rho.clone()).collect()
    }
}

fn fields_table(s: &FieldSeries) -> Table {
    let mut t = Table::new(&["t", "x", "rho", "S", "v", "u", "b", "Q"]);
    for h in &s.hydro {
        let g = h.grid();
        for i in 0..g.n() {
            let at = |f: &Field| f.values()[i];
            t.push(vec![h.t, g.x(i), at(&h.rho), at(&h.s), at(&h.v), at(&h.u), at(&h.b), at(&h.q)]);
        }
    }
    t
}

fn msd_table(s: &MsdSeries) -> Table {
    let mut t = match s.std_err {
        Some(_) => Table::new(&["t", "msd", "std_err"]),
        None => Table::new(&["t", "msd"]),
    };
    for k in 0..s.len() {
        let mut row = vec![s.times[k], s.msd[k]];
        if let Some(e) = &s.std_err {
            row.push(e[k]);
        }
        t.push(row);
    }
    t
}

fn energy_table(e: &EnergyReport) -> Table {
    let mut t = Table::new(&["t", "kinetic", "osmotic", "potential", "total"]);
    for k in 0..e.times.len() {
        t.push(vec![e.times[k], e.kinetic[k], e.osmotic[k], e.potential[k], e.total[k]]);
    }
    t
}

fn density_table(times: &[f64], rho: &[Field]) -> Table {
    let mut t = Table::new(&["t", "x", "rho"]);
    for (&time, r) in times.iter().zip(rho) {
        for (x, &v) in r.grid().nodes().zip(r.values()) {
            t.push(vec![time, x, v]);
        }
    }
    t
}

/// Everything a finished route hands to the gate checks.
struct RouteData {
    route: Route,
    msd: MsdSeries,
    /// Densities at the stored times (KDE for the ensemble).
    rho: Vec<Field>,
    energy: Option<EnergyReport>,
}

struct Runner<'a> {
    spec: &'a ScenarioSpec,
    plan: Plan,
    params: Params,
    grid: Grid,
    model: Model,
    out: OutputDir,
    strict: bool,
    dispersion: DispersionConfig,
    routes: BTreeMap<Route, RouteReport>,
    data: BTreeMap<Route, RouteData>,
    comparisons: Vec<Comparison>,
    gates: Vec<GateResult>,
}

impl Runner<'_> {
    fn failed(&self) -> bool {
        self.gates.iter().any(|g| g.status == GateStatus::Fail)
    }

    fn store_times(&self) -> Vec<f64> {
        (0..=self.plan.n_store).map(|k| k as f64 * self.plan.store_dt).collect()
    }

    /// Writes the common files of a field route and records it.
    fn finish_field_route(
        &mut self,
        route: Route,
        series: &FieldSeries,
        diagnostics: BTreeMap<String, f64>,
    ) -> Result<(), RunError> {
        let rho = series.rho();
        let msd = match route {
            Route::Analytic => {
                let m = series.times.iter().map(|&t| self.model.msd(t).expect("closed form")).collect();
                MsdSeries::new(series.times.clone(), m, None, SeriesSource::Analytic)
            }
            _ => msd_from_fields(&series.times, &rho, SeriesSource::Pde),
        }
        .map_err(solver(route))?;
        let radial = self.spec.params.dim == 3;
        let energy = if radial { None } else { Some(energy_report(&series.hydro).map_err(solver(route))?) };
        let mut files = vec![
            self.out.write_table(&format!("fields_{route}"), &fields_table(series))?,
            self.out.write_table(&format!("msd_{route}"), &msd_table(&msd))?,
        ];
        if let Some(e) = &energy {
            files.push(self.out.write_table(&format!("energy_{route}"), &energy_table(e))?);
        }
        let dispersion = DispersionReport::classify(&msd, &self.dispersion);
        self.routes.insert(
            route,
            RouteReport { files, msd: msd.clone(), dispersion, energy: energy.clone(), diagnostics, weak_order: None },
        );
        self.data.insert(route, RouteData { route, msd, rho, energy });
        Ok(())
    }

    fn run_analytic(&mut self) -> Result<(), RunError> {
        let times = self.store_times();
        let hydro = times
            .iter()
            .map(|&t| self.model.hydro(&self.grid, t).expect("closed form"))
            .collect::<Result<Vec<_>, _>>()
            .map_err(solver(Route::Analytic))?;
        self.finish_field_route(Route::Analytic, &FieldSeries { times, hydro }, BTreeMap::new())
    }

    /// Runs the wave equation; returns the Madelung drift table when later
    /// routes need it.
    fn run_schrodinger(&mut self, want_table: bool) -> Result<Option<DriftSource<f64>>, RunError> {
        let route = Route::Schrodinger;
        let p = &self.plan;
        let store = if want_table { p.table_every } else { p.store_every };
        let rho0 = self.model.initial_density(&self.grid);
        let omega = self.model.omega(&self.grid);
        let problem =
            build_recoil_problem(&rho0, Potential::Static(omega), self.params.d(), p.dt, p.t_end, store)
                .map_err(solver(route))?;
        let wave = solve_schrodinger(&problem).map_err(solver(route))?;
        let every = p.store_every / store;
        let picked: Vec<usize> = (0..wave.len()).step_by(every).collect();
        let hydro = picked.iter().map(|&i| wave.hydro(i)).collect::<Result<Vec<_>, _>>().map_err(solver(route))?;
        let series = FieldSeries { times: picked.iter().map(|&i| wave.times[i]).collect(), hydro };
        let diagnostics = BTreeMap::from([("max_norm_drift".to_string(), wave.max_norm_drift)]);
        self.finish_field_route(route, &series, diagnostics)?;
        if !want_table {
            return Ok(None);
        }
        let table = wave.drift_table(TABLE_DENSITY_THRESHOLD).map_err(solver(route))?;
        Ok(Some(DriftSource::Tabulated(Arc::new(table))))
    }

    fn bandwidth(&self) -> Bandwidth {
        match self.spec.kde.bandwidth {
            BandwidthSpec::Rule(BandwidthRule::Silverman) => Bandwidth::Silverman,
            BandwidthSpec::Rule(BandwidthRule::Scott) => Bandwidth::Scott,
            BandwidthSpec::Fixed(h) => Bandwidth::Fixed(h),
        }
    }

    fn run_pair(&mut self, drift: &DriftSource<f64>) -> Result<(), RunError> {
        let this = &*self;
        let (fp, sde) = rayon::join(
            || this.has(Route::Fp).then(|| this.compute_fp(drift)),
            || this.has(Route::Sde).then(|| this.compute_sde(drift)),
        );
        if let Some(fp) = fp {
            let (series, diagnostics) = fp?;
            self.finish_field_route(Route::Fp, &series, diagnostics)?;
        }
        if let Some(sde) = sde {
            self.finish_sde(sde?)?;
        }
        Ok(())
    }

    fn has(&self, route: Route) -> bool {
        self.spec.has(route)
    }

    fn compute_fp(&self, drift: &DriftSource<f64>) -> Result<(FieldSeries, BTreeMap<String, f64>), RunError> {
        let route = Route::Fp;
        let p = &self.plan;
        let sol = solve_fokker_planck(&FokkerPlanckProblem {
            rho0: self.model.initial_density(&self.grid),
            drift: drift.clone(),
            d: self.params.d(),
            dt: p.fp_dt,
            t_start: 0.0,
            t_end: p.t_end,
            store_every: p.fp_store_every,
        })
        .map_err(solver(route))?;
        let omega = self.model.omega(&self.grid);
        let hydro = sol
            .times
            .iter()
            .zip(&sol.rho)
            .map(|(&t, rho)| {
                let b = drift.on_nodes(&self.grid, t)?;
                Hydro::from_density_drift(t, rho.clone(), b, omega.clone(), self.params.d())
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(solver(route))?;
        let diagnostics = BTreeMap::from([
            ("max_mass_drift".to_string(), sol.max_mass_drift),
            ("stability_ratio".to_string(), sol.stability_ratio),
        ]);
        Ok((FieldSeries { times: sol.times.clone(), hydro }, diagnostics))
    }

    fn ensemble(&self, drift: &DriftSource<f64>, dt: f64, stride: usize) -> Result<EnsembleRun<f64>, RunError> {
        let p = &self.plan;
        let alpha = self.params.alpha();
        let x0 = sample_initial(&InitialDensity::Gaussian { alpha }, p.particles, p.seed, 0.0)
            .map_err(solver(Route::Sde))?;
        let cfg = SdeConfig { n_particles: p.particles, dt, t_start: 0.0, t_end: p.t_end, seed: p.seed, snapshot_stride: stride };
        evolve(&x0, drift, self.params.d(), &cfg).map_err(solver(Route::Sde))
    }

    fn compute_sde(&self, drift: &DriftSource<f64>) -> Result<SdeResult, RunError> {
        let route = Route::Sde;
        let p = &self.plan;
        let run = self.ensemble(drift, p.sde_dt, p.sde_stride)?;
        let msd = msd_from_ensemble(&run.snapshots).map_err(solver(route))?;
        let bw = self.bandwidth();
        let rho = run
            .snapshots
            .iter()
            .map(|s| kde_density(s, &self.grid, bw))
            .collect::<Result<Vec<_>, _>>()
            .map_err(solver(route))?;
        let last = run.snapshots.last().expect("at least the initial snapshot");
        let kurt = kurtosis_ratio(last).map_err(solver(route))?;
        let moments = empirical_moments(last, &[1, 2, 4]).map_err(solver(route))?;
        let weak_order = if self.spec.sde.weak_order {
            let half = self.ensemble(drift, p.sde_dt / 2.0, usize::MAX)?;
            let m_half = empirical_moments(half.snapshots.last().expect("final snapshot"), &[2]).map_err(solver(route))?[0];
            let m = moments[1];
            Some(WeakOrderReport {
                dt: p.sde_dt,
                msd: m.value,
                msd_half_dt: m_half.value,
                difference: m.value - m_half.value,
                std_err: m.std_err.hypot(m_half.std_err),
            })
        } else {
            None
        };
        Ok(SdeResult { run, msd, rho, kurt, moments, weak_order })
    }

    fn finish_sde(&mut self, r: SdeResult) -> Result<(), RunError> {
        let route = Route::Sde;
        let times: Vec<f64> = r.run.snapshots.iter().map(|s| s.t).collect();
        let limit = self.spec.sde.write_particles.unwrap_or(usize::MAX);
        let mut snaps = Table::new(&["t", "particle_index", "x"]);
        for s in &r.run.snapshots {
            for (i, &x) in s.positions.iter().take(limit).enumerate() {
                snaps.push(vec![s.t, i as f64, x]);
            }
        }
        let files = vec![
            self.out.write_table("snapshots_sde", &snaps)?,
            self.out.write_table("density_sde", &density_table(&times, &r.rho))?,
            self.out.write_table("msd_sde", &msd_table(&r.msd))?,
        ];
        let mut diagnostics = BTreeMap::from([
            ("dt".to_string(), r.run.dt),
            ("kurtosis_ratio".to_string(), r.kurt.value),
            ("kurtosis_ratio_std_err".to_string(), r.kurt.std_err),
        ]);
        for m in &r.moments {
            diagnostics.insert(format!("moment_{}", m.order), m.value);
            diagnostics.insert(format!("moment_{}_std_err", m.order), m.std_err);
        }
        let dispersion = DispersionReport::classify(&r.msd, &self.dispersion);
        self.routes.insert(
            route,
            RouteReport { files, msd: r.msd.clone(), dispersion, energy: None, diagnostics, weak_order: r.weak_order },
        );
        self.data.insert(route, RouteData { route, msd: r.msd, rho: r.rho, energy: None });
        Ok(())
    }

    /// Gates of one finished route against the analytic route.
    fn check_route(&mut self, route: Route) -> Result<(), RunError> {
        let gates = self.spec.gates.clone();
        let Some(data) = self.data.get(&route) else { return Ok(()) };
        let mut found = Vec::new();
        let mut comps = Vec::new();
        if matches!(route, Route::Schrodinger | Route::Fp) {
            if self.data.contains_key(&Route::Analytic) {
                let mut linf = 0.0f64;
                let mut rel = 0.0f64;
                for (k, rho) in data.rho.iter().enumerate() {
                    let t = data.msd.times[k];
                    let reference = self.model.density(&self.grid, t).expect("closed form");
                    let c = compare_fields(rho, &reference).map_err(solver(route))?;
                    linf = linf.max(c.linf);
                    rel = rel.max((data.msd.msd[k] / self.model.msd(t).expect("closed form") - 1.0).abs());
                    if k + 1 == data.rho.len() {
                        comps.push(Comparison { a: route, b: Route::Analytic, t, metrics: c });
                    }
                }
                found.push(GateResult::bound(format!("rho_linf:{route}"), linf, gates.rho_linf));
                found.push(GateResult::bound(format!("msd_rel:{route}"), rel, gates.msd_rel));
            }
        }
        if route == Route::Sde {
            let reference = [Route::Analytic, Route::Schrodinger, Route::Fp]
                .iter()
                .find_map(|r| self.data.get(r))
                .map(|r| r.msd.clone());
            if let (Some(reference), Some(se)) = (reference, data.msd.std_err.as_ref()) {
                let mut worst = 0.0f64;
                for (k, &t) in data.msd.times.iter().enumerate() {
                    let Some(j) = reference.times.iter().position(|&s| (s - t).abs() <= 1e-9 * (1.0 + t)) else {
                        continue;
                    };
                    let z = (data.msd.msd[k] - reference.msd[j]).abs() / se[k].max(f64::MIN_POSITIVE);
                    worst = worst.max(z);
                }
                found.push(GateResult::bound(format!("msd_sigma:{route}"), worst, gates.msd_sigma));
            }
        }
        if self.spec.scenario.is_recoil() {
            if let Some(e) = &data.energy {
                found.push(GateResult::bound(format!("energy_drift:{route}"), e.total_drift(), gates.energy_drift));
            }
        }
        self.gates.extend(found);
        self.comparisons.extend(comps);
        Ok(())
    }

    fn check_triangle(&mut self) -> Result<(), RunError> {
        let finals: Vec<(Route, &Field, f64)> = self
            .data
            .values()
            .filter(|d| !(d.route == Route::Analytic && self.spec.params.dim == 3))
            .map(|d| (d.route, d.rho.last().expect("final slice"), *d.msd.times.last().expect("final time")))
            .collect();
        let mut found = Vec::new();
        let mut comps = Vec::new();
        for i in 0..finals.len() {
            for j in i + 1..finals.len() {
                let (a, ra, t) = finals[i];
                let (b, rb, _) = finals[j];
                let c = compare_fields(ra, rb).map_err(solver(a))?;
                found.push(GateResult::bound(format!("triangle_l1:{a}-{b}"), c.l1, self.spec.gates.triangle_l1));
                comps.push(Comparison { a, b, t, metrics: c });
            }
        }
        self.gates.extend(found);
        self.comparisons.extend(comps);
        Ok(())
    }

    fn check_regime(&mut self) {
        let Some(expected) = self.spec.gates.regime else { return };
        let expected = regime_name(expected);
        let Some((route, report)) = self.routes.iter().next() else { return };
        let observed = report.dispersion.regime.clone();
        let status = if observed == expected {
            GateStatus::Pass
        } else if observed == "unavailable" && !self.strict {
            GateStatus::Skipped
        } else {
            GateStatus::Fail
        };
        self.gates.push(GateResult {
            name: format!("regime:{route}"),
            value: report.dispersion.exponent,
            tolerance: None,
            expected: Some(expected),
            observed: Some(observed),
            status,
        });
    }

    fn finalize(mut self, spec_text: &str, stopped_early: bool) -> Result<RunOutcome, RunError> {
        if !stopped_early {
            self.check_regime();
        }
        let passed = !self.failed() && !stopped_early;
        let report = Report {
            name: self.spec.name.clone(),
            scenario: self.spec.scenario,
            seed: self.plan.seed,
            params: self.spec.params.clone(),
            settings: self.plan.clone(),
            harmonic_regime: self.model.harmonic_regime(),
            routes: self.routes,
            comparisons: self.comparisons,
            tolerances: self.spec.gates.clone(),
            gates: self.gates,
            stopped_early,
            passed,
        };
        self.out.write_json("report.json", &report)?;
        let dir = self.out.root().to_path_buf();
        let manifest = self.out.finish(&self.spec.name, spec_text)?;
        Ok(RunOutcome { dir, report, manifest })
    }
}

struct SdeResult {
    run: EnsembleRun<f64>,
    msd: MsdSeries,
    rho: Vec<Field>,
    kurt: MomentEstimate,
    moments: Vec<MomentEstimate>,
    weak_order: Option<WeakOrderReport>,
}

/// Default output directory of a spec without `output` or `--out`.
pub fn default_output(spec: &ScenarioSpec) -> PathBuf {
    PathBuf::from("runs").join(&spec.name)
}

/// Runs a parsed spec. `spec_text` is hashed into the manifest.
pub fn execute(spec: &ScenarioSpec, spec_text: &str, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let p = &spec.params;
    let params = Params::new(p.d, p.m, p.beta, p.gamma, p.alpha).map_err(|e| SpecError::Invalid(e.to_string()))?;
    let seed = opts.seed.unwrap_or(spec.seed);
    let plan = Plan::resolve(spec, seed, &params)?;
    let grid = Grid::symmetric(plan.half_width, plan.n).map_err(|e| SpecError::Invalid(e.to_string()))?;
    let model = Model::build(spec, params, &grid).map_err(|e| SpecError::Invalid(e.to_string()))?;
    let dir = opts.out.clone().or_else(|| spec.output.clone()).unwrap_or_else(|| default_output(spec));
    let out = OutputDir::create(&dir, opts.format.unwrap_or(spec.format))?;
    let d = &spec.dispersion;
    let dispersion = DispersionConfig {
        crossover: d.crossover.unwrap_or_else(|| DispersionConfig::for_params(&params).crossover),
        enhanced: d.enhanced,
        normal: d.normal,
        bounded_ratio: d.bounded_ratio,
    };
    let mut r = Runner {
        spec,
        plan,
        params,
        grid,
        model,
        out,
        strict: opts.strict,
        dispersion,
        routes: BTreeMap::new(),
        data: BTreeMap::new(),
        comparisons: Vec::new(),
        gates: Vec::new(),
    };

    if r.has(Route::Analytic) {
        log::info!("{}: analytic route", spec.name);
        r.run_analytic()?;
    }
    let numeric = r.has(Route::Fp) || r.has(Route::Sde);
    let custom_drift = r.model.drift(&r.grid).filter(|_| spec.scenario == ScenarioKind::Custom);
    let mut drift = None;
    if r.has(Route::Schrodinger) {
        log::info!("{}: schrodinger route", spec.name);
        drift = r.run_schrodinger(numeric && custom_drift.is_none())?;
        r.check_route(Route::Schrodinger)?;
        if r.strict && r.failed() {
            return r.finalize(spec_text, true);
        }
    }
    if numeric {
        let drift = custom_drift.or(drift).or_else(|| r.model.drift(&r.grid)).expect("validated drift source");
        log::info!("{}: fokker-planck / sde routes", spec.name);
        r.run_pair(&drift)?;
        r.check_route(Route::Fp)?;
        r.check_route(Route::Sde)?;
        if r.strict && r.failed() {
            return r.finalize(spec_text, true);
        }
    }
    r.check_triangle()?;
    r.finalize(spec_text, false)
}
