//! Acceptance criteria C1-C9. Runs without the libtest harness so that the
//! PASS/FAIL line of every criterion is always printed.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use recoil_cli::io::Table;
use recoil_cli::spec::Route;
use recoil_cli::{execute, RunOptions, RunOutcome, ScenarioSpec};
use recoil_lab::analytic::{
    exact_residuals, sample_density, sample_hydro, ClosedForm, Dim, FreeBrownianSolution, FreeRecoilSolution,
    HarmonicRecoilSolution,
};
use recoil_lab::calculus::moment;
use recoil_lab::diagnostics::{energy_report, linear_fit, msd_from_ensemble, velocity_ratio};
use recoil_lab::drift::{DriftSource, Force};
use recoil_lab::fieldcalc::{
    continuity_residual, girsanov_residual, hj_residual, momentum_law_residual, recoil_omega, HydroFields, Sign,
    TimeStencil,
};
use recoil_lab::grid::{Grid1D, ScalarField};
use recoil_lab::params::PhysicalParams;
use recoil_lab::pde::{
    build_recoil_problem, solve_fokker_planck, solve_schrodinger, FokkerPlanckProblem, Potential, WaveSolution,
};
use recoil_lab::sde::{evolve, sample_initial, InitialDensity, SdeConfig};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn run_spec(rel: &str, out: &Path) -> RunOutcome {
    let (spec, text) = ScenarioSpec::load(&scenarios().join(rel)).expect("committed spec parses");
    let opts = RunOptions { out: Some(out.to_path_buf()), ..Default::default() };
    execute(&spec, &text, &opts).expect("run completes")
}

fn index_of(times: &[f64], t: f64) -> usize {
    times.iter().position(|&s| (s - t).abs() < 1e-9).unwrap_or_else(|| panic!("no slice at t={t}"))
}

/// `msd` of the wave solution at every stored slice.
fn wave_msd(w: &WaveSolution<f64>) -> Vec<f64> {
    w.psi.iter().map(|p| moment(&p.density(), 2)).collect()
}

fn harmonic_run(gamma: f64, half_width: f64, n: usize, store_every: usize) -> WaveSolution<f64> {
    let sol = HarmonicRecoilSolution::new(PhysicalParams::new(1.0, 1.0, 1.0, gamma, 1.0).unwrap()).unwrap();
    let grid = Grid1D::symmetric(half_width, n).unwrap();
    let rho0 = sample_density(&sol, grid, 0.0).unwrap();
    let omega = ScalarField::from_fn(grid, |x| sol.point(x, 0.0).omega).unwrap();
    let t_end = 3.0 * std::f64::consts::PI / gamma;
    let p = build_recoil_problem(&rho0, Potential::Static(omega), 1.0, 1e-3, t_end, store_every).unwrap();
    solve_schrodinger(&p).unwrap()
}

/// D = 1, gamma = 2, alpha = 1: alpha^2 = 2D/gamma.
fn matched() -> &'static WaveSolution<f64> {
    static W: OnceLock<WaveSolution<f64>> = OnceLock::new();
    W.get_or_init(|| harmonic_run(2.0, 10.0, 4001, 10))
}

/// D = 1, gamma = 1, alpha = 1.
fn breathing() -> &'static WaveSolution<f64> {
    static W: OnceLock<WaveSolution<f64>> = OnceLock::new();
    W.get_or_init(|| harmonic_run(1.0, 15.0, 3001, 10))
}

/// Free recoil, D = 1, alpha = 1, wide enough to reach t = 20.
fn long_free_recoil() -> &'static WaveSolution<f64> {
    static W: OnceLock<WaveSolution<f64>> = OnceLock::new();
    W.get_or_init(|| {
        let grid = Grid1D::symmetric(250.0, 10001).unwrap();
        let sol = FreeRecoilSolution::new(PhysicalParams::diffusion(1.0, 1.0).unwrap());
        let rho0 = sample_density(&sol, grid, 0.0).unwrap();
        let p = build_recoil_problem(&rho0, Potential::Static(ScalarField::zeros(grid)), 1.0, 1e-3, 20.0, 100).unwrap();
        solve_schrodinger(&p).unwrap()
    })
}

fn c1_enhanced_diffusion() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_spec("acceptance/enhanced_diffusion.toml", tmp.path());
    let wave = &o.report.routes[&Route::Schrodinger].msd;
    let sde = &o.report.routes[&Route::Sde].msd;
    let se = sde.std_err.as_ref().expect("ensemble errors");
    let mut worst_rel = 0.0f64;
    let mut worst_z = 0.0f64;
    for t in [0.5, 1.0, 2.0] {
        let exact = 0.5 + 2.0 * t * t;
        let k = index_of(&wave.times, t);
        worst_rel = worst_rel.max((wave.msd[k] - exact).abs() / exact);
        let k = index_of(&sde.times, t);
        worst_z = worst_z.max((sde.msd[k] - exact).abs() / se[k]);
    }
    check(worst_rel <= 1e-3 && worst_z <= 3.0, format!("wave rel err {worst_rel:.2e} (tol 1e-3), sde |z| {worst_z:.2} (tol 3)"))
}

fn c2_kinetic_growth() -> Verdict {
    let w = long_free_recoil();
    let e = energy_report(&w.hydro_all().unwrap()).unwrap();
    let at1 = e.kinetic[index_of(&e.times, 1.0)];
    let at20 = e.kinetic[index_of(&e.times, 20.0)];
    let monotone = e.kinetic.windows(2).all(|p| p[1] > p[0]);
    check(
        (at1 - 0.8).abs() <= 1e-3 && monotone && (at20 - 1.0).abs() <= 5e-3,
        format!("K(1) = {at1:.6} (0.8 ± 1e-3), K(20) = {at20:.6} (1 ± 0.5%), monotone {monotone}"),
    )
}

fn c3_energy_conservation() -> Verdict {
    let e = energy_report(&long_free_recoil().hydro_all().unwrap()).unwrap();
    let free = e.total.iter().fold(0.0f64, |m, t| m.max((t - 1.0).abs()));
    let drift = |w: &WaveSolution<f64>| energy_report(&w.hydro_all().unwrap()).unwrap().total_drift();
    let (m, b) = (drift(matched()), drift(breathing()));
    check(
        free <= 1e-3 && m <= 1e-3 && b <= 1e-3,
        format!("free |E-1| {free:.2e}, harmonic drift matched {m:.2e} / breathing {b:.2e} (tol 1e-3)"),
    )
}

/// Second moments of `i psi_t = -D psi'' + (Omega/2D) psi` with
/// `Omega = gamma^2 x^2/2 - D gamma`: an oscillator of mass `1/2D` and
/// frequency `gamma`. State `(<x^2>, <xp + px>, <p^2>)`, classical RK4.
fn variance_oracle(d: f64, gamma: f64, alpha: f64, t_end: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let rhs = |y: [f64; 3]| [2.0 * d * y[1], 4.0 * d * y[2] - gamma * gamma / d * y[0], -gamma * gamma / (2.0 * d) * y[1]];
    let axpy = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let mut y = [alpha * alpha / 2.0, 0.0, 1.0 / (2.0 * alpha * alpha)];
    let steps = (t_end / h).round() as usize;
    let (mut ts, mut xs) = (vec![0.0], vec![y[0]]);
    for n in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(axpy(y, k1, h / 2.0));
        let k3 = rhs(axpy(y, k2, h / 2.0));
        let k4 = rhs(axpy(y, k3, h));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        ts.push((n + 1) as f64 * h);
        xs.push(y[0]);
    }
    (ts, xs)
}

/// Interior maxima refined by a parabola through three samples.
fn peaks(ts: &[f64], ys: &[f64]) -> Vec<(f64, f64)> {
    let h = ts[1] - ts[0];
    (1..ys.len() - 1)
        .filter(|&k| ys[k] > ys[k - 1] && ys[k] >= ys[k + 1])
        .map(|k| {
            let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
            let delta = 0.5 * (a - c) / (a - 2.0 * b + c);
            (ts[k] + delta * h, b - 0.25 * (a - c) * delta)
        })
        .collect()
}

fn period(p: &[(f64, f64)]) -> f64 {
    (p[p.len() - 1].0 - p[0].0) / (p.len() - 1) as f64
}

fn c4_non_dispersive() -> Verdict {
    let m = wave_msd(matched());
    let ratio = m.iter().cloned().fold(f64::MIN, f64::max) / m.iter().cloned().fold(f64::MAX, f64::min);

    let w = breathing();
    let pk = peaks(&w.times, &wave_msd(w));
    let (ot, ox) = variance_oracle(1.0, 1.0, 1.0, w.times[w.len() - 1], 1e-3);
    let opk = peaks(&ot, &ox);
    if pk.len() < 2 || opk.len() < 2 {
        return Err(format!("found {} peaks, oracle {}", pk.len(), opk.len()));
    }
    let (per, oper) = (period(&pk), period(&opk));
    let peak_err = pk.iter().zip(&opk).map(|(a, b)| (a.1 - b.1).abs()).fold(0.0, f64::max);
    let oracle_ok = (oper - std::f64::consts::PI).abs() < 1e-6 && opk.iter().all(|p| (p.1 - 2.0).abs() < 1e-6);
    check(
        ratio < 1.0 + 1e-5 && (per / oper - 1.0).abs() <= 1e-2 && peak_err <= 1e-3 && oracle_ok,
        format!(
            "matched max/min {ratio:.8} (< 1+1e-5); breathing period {per:.5} vs oracle {oper:.5}, peak {:.5} vs oracle {:.5}",
            pk[0].1, opk[0].1
        ),
    )
}

fn c5_brownian_control() -> Verdict {
    let n = 1_000_000;
    let cfg = SdeConfig { n_particles: n, dt: 0.01, t_start: 0.0, t_end: 5.0, seed: 17, snapshot_stride: 50 };
    let x0 = sample_initial(&InitialDensity::Gaussian { alpha: 1.0 }, n, 17, 0.0).unwrap();
    let run = evolve(&x0, &DriftSource::Zero, 1.0, &cfg).unwrap();
    let msd = msd_from_ensemble(&run.snapshots).unwrap();
    let (slope, _) = linear_fit(&msd.times, &msd.msd);

    // OU: D = 1, gamma = 2 from variance 2
    let grid = Grid1D::<f64>::symmetric(8.0, 1601).unwrap();
    let rho0 = ScalarField::from_fn(grid, |x: f64| (-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt()).unwrap();
    let fp = solve_fokker_planck(&FokkerPlanckProblem {
        rho0,
        drift: DriftSource::Smoluchowski { force: Force::Linear { stiffness: 2.0 }, mobility: 1.0 },
        d: 1.0,
        dt: 1e-3,
        t_start: 0.0,
        t_end: 15.0,
        store_every: usize::MAX / 2,
    })
    .unwrap();
    let var = moment(fp.rho.last().unwrap(), 2);
    check(
        (slope / 2.0 - 1.0).abs() <= 1e-2 && (var - 0.5).abs() <= 1e-4,
        format!("slope {slope:.5} (2 ± 1%), OU variance {var:.7} (0.5 ± 1e-4)"),
    )
}

fn mesh_residual<C: ClosedForm<f64>>(sol: &C, n: usize, t: f64) -> f64 {
    let grid = Grid1D::symmetric(6.0, n).unwrap();
    let h = 2.0 * grid.dx();
    let slices: Vec<HydroFields<f64>> = [t - h, t, t + h].iter().map(|&s| sample_hydro(sol, grid, s).unwrap()).collect();
    let st = TimeStencil::around(&slices, 1).unwrap();
    let sign = sol.sign();
    let omega_r = match sign {
        Sign::Recoil => recoil_omega(&slices[1]),
        Sign::Standard => slices[1].omega.clone(),
    };
    let inner = |f: &ScalarField<f64>| {
        (0..grid.n()).filter(|&i| grid.x(i).abs() <= 3.0).map(|i| f.values()[i].abs()).fold(0.0, f64::max)
    };
    [
        hj_residual(&st, sign),
        momentum_law_residual(&st, sign),
        continuity_residual(&st),
        girsanov_residual(&st, &omega_r, 1.0).unwrap(),
    ]
    .iter()
    .map(inner)
    .fold(0.0, f64::max)
}

fn c6_residuals() -> Verdict {
    let fr = FreeRecoilSolution::new(PhysicalParams::diffusion(1.0, 1.0).unwrap());
    let hr = HarmonicRecoilSolution::new(PhysicalParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
    let fb = FreeBrownianSolution::new(PhysicalParams::diffusion(1.0, 1.0).unwrap(), Dim::One);
    let mut exact = 0.0f64;
    let mut wrong_sign = f64::MAX;
    for i in 0..=32 {
        let x = -4.0 + 0.25 * i as f64;
        for t in [0.0, 0.3, 1.0, 2.5, 5.0] {
            exact = exact
                .max(exact_residuals(&fr, x, t, Sign::Recoil).max_abs())
                .max(exact_residuals(&hr, x, t, Sign::Recoil).max_abs())
                .max(exact_residuals(&fb, x, t, Sign::Standard).max_abs());
            if x.abs() < 1.0 {
                wrong_sign = wrong_sign.min(exact_residuals(&fr, x, t, Sign::Standard).max_abs());
            }
        }
    }
    let ratios = [
        mesh_residual(&fr, 601, 0.7) / mesh_residual(&fr, 1201, 0.7),
        mesh_residual(&hr, 601, 0.7) / mesh_residual(&hr, 1201, 0.7),
        mesh_residual(&fb, 601, 0.7) / mesh_residual(&fb, 1201, 0.7),
    ];
    check(
        exact <= 1e-8 && wrong_sign > 1e-3 && ratios.iter().all(|r| (3.0..5.0).contains(r)),
        format!("exact max {exact:.1e} (tol 1e-8), wrong sign min {wrong_sign:.2e}, mesh ratios {ratios:.2?}"),
    )
}

/// Density column at time `t` of a `(t, x, rho, ...)` table.
fn density_at(path: &Path, t: f64) -> (Vec<f64>, Vec<f64>) {
    let table = Table::read(path).unwrap();
    let col = |name: &str| table.columns.iter().position(|c| c == name).unwrap();
    let (ct, cx, cr) = (col("t"), col("x"), col("rho"));
    table.rows.iter().filter(|r| (r[ct] - t).abs() < 1e-9).map(|r| (r[cx], r[cr])).unzip()
}

fn l1_distance(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)) -> f64 {
    assert_eq!(a.0, b.0, "same nodes");
    let d: Vec<f64> = a.1.iter().zip(&b.1).map(|(p, q)| (p - q).abs()).collect();
    let dx = a.0[1] - a.0[0];
    dx * (d.iter().sum::<f64>() - 0.5 * (d[0] + d[d.len() - 1]))
}

fn c7_triangle() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    run_spec("acceptance/triangle.toml", tmp.path());
    let wave = density_at(&tmp.path().join("fields_schrodinger.csv"), 1.0);
    let fp = density_at(&tmp.path().join("fields_fp.csv"), 1.0);
    let sde = density_at(&tmp.path().join("density_sde.csv"), 1.0);
    let d = [l1_distance(&wave, &fp), l1_distance(&wave, &sde), l1_distance(&fp, &sde)];
    check(d.iter().all(|&v| v <= 2e-2), format!("L1 wave-fp {:.2e}, wave-sde {:.2e}, fp-sde {:.2e} (tol 2e-2)", d[0], d[1], d[2]))
}

fn c8_velocity_ratio() -> Verdict {
    let grid = Grid1D::symmetric(200.0, 4001).unwrap();
    let p = PhysicalParams::diffusion(1.0, 1.0).unwrap();
    let t = 50.0;
    let recoil = velocity_ratio(&sample_hydro(&FreeRecoilSolution::new(p), grid, t).unwrap().v, t, 100.0).unwrap();
    let brown =
        velocity_ratio(&sample_hydro(&FreeBrownianSolution::new(p, Dim::One), grid, t).unwrap().v, t, 100.0).unwrap();
    check(
        (recoil - 1.0).abs() <= 1e-2 && (brown / 0.5 - 1.0).abs() <= 1e-2,
        format!("recoil {recoil:.5} (1 ± 1%), free Brownian {brown:.5} (0.5 ± 1%)"),
    )
}

fn c9_reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut specs: Vec<PathBuf> = std::fs::read_dir(scenarios())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    specs.sort();
    let mut compared = 0;
    for spec in &specs {
        let stem = spec.file_stem().unwrap().to_string_lossy().into_owned();
        let run = |threads: &str| {
            let out = tmp.path().join(format!("{stem}-{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_recoil"))
                .args(["run", spec.to_str().unwrap(), "--out", out.to_str().unwrap()])
                .env("RECOIL_THREADS", threads)
                .output()
                .unwrap()
                .status;
            (out, status.code())
        };
        let (a, ca) = run("1");
        let (b, cb) = run("4");
        if ca != Some(0) || cb != Some(0) {
            return Err(format!("{stem}: exit codes {ca:?} / {cb:?}"));
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            if std::fs::read(a.join(&name)).unwrap() != std::fs::read(b.join(&name)).unwrap_or_default() {
                return Err(format!("{stem}: {} differs between 1 and 4 threads", name.to_string_lossy()));
            }
            compared += 1;
        }
    }
    check(compared > 0, format!("{} specs, {compared} files byte-identical at 1 and 4 threads", specs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("C1 enhanced diffusion", c1_enhanced_diffusion),
        ("C2 kinetic energy growth", c2_kinetic_growth),
        ("C3 energy conservation", c3_energy_conservation),
        ("C4 non-dispersive regime", c4_non_dispersive),
        ("C5 Brownian control", c5_brownian_control),
        ("C6 residual suite", c6_residuals),
        ("C7 consistency triangle", c7_triangle),
        ("C8 asymptotic velocity ratio", c8_velocity_ratio),
        ("C9 reproducibility", c9_reproducibility),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 9 acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
