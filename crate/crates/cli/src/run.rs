//! Command dispatch. Every command writes its CSVs, then `manifest.json`.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use rmb_core::ode::{ode_rhs, BlochState};
use rmb_core::{
    bloch_integrate, build_collision, classify_regime, complete_fields, conserved_hc, default_lambdas,
    fit_pole_order, fixed_points, gain_curve, integrate, integrate_ode, poles, residual_correspondence,
    sech_profile, sinh_gordon_residual, solve_kink, stationary_state, track_and_phase_shift, zcr_norm,
    Complex64, Correspondence, FieldState, Grid1D, ModelParams, OdeState, Patch, RmbError, SolitonSpec,
    TrackConfig, Trajectory,
};

use crate::config::{
    BlochBlock, CommandBlock, ConfigError, InitialData, LaxBlock, LaxData, OdeBlock, RunConfig, ScanBlock,
    SolitonBlock,
};
use crate::output::{fmt_real, sha256_file, write_csv, OutputFile, RunManifest, Table};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Overrides `run.output_dir`.
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Only drives `lax-check` random fields.
    pub seed: u64,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Model { context: String, source: RmbError },
    Io { path: PathBuf, source: io::Error },
}

impl RunError {
    /// 2 for bad configuration, 3 for a failed computation, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model { source, .. } if source.is_numerical() => 3,
            RunError::Model { .. } => 2,
            RunError::Io { .. } => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Model { context, source } => write!(f, "{context}: {source}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

type Res<T> = std::result::Result<T, RunError>;

fn ctx<T>(context: &str, r: rmb_core::Result<T>) -> Res<T> {
    r.map_err(|source| RunError::Model {
        context: context.to_string(),
        source,
    })
}

/// One output table staged for writing.
struct Staged {
    name: &'static str,
    table: Table,
}

struct Outcome {
    tables: Vec<Staged>,
    summary: Value,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Executes a parsed config and writes its outputs.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Res<RunManifest> {
    let started = unix_now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        if n == 0 {
            return Err(RunError::Config(ConfigError {
                line: None,
                message: "--threads must be >= 1".into(),
            }));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Io {
        path: PathBuf::new(),
        source: io::Error::other(e.to_string()),
    })?;
    let outcome = pool.install(|| dispatch(cfg, opts))?;

    let dir = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut files = Vec::new();
    for s in &outcome.tables {
        let path = dir.join(s.name);
        write_csv(&s.table, &path).map_err(io_err(&path))?;
        files.push(OutputFile {
            name: s.name.to_string(),
            bytes: fs::metadata(&path).map_err(io_err(&path))?.len(),
            sha256: sha256_file(&path).map_err(io_err(&path))?,
        });
    }
    let manifest = RunManifest {
        label: cfg.label.clone(),
        command: cfg.command.as_str().to_string(),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.echo.clone(),
        seed: opts.seed,
        started_unix: started,
        finished_unix: unix_now(),
        files,
        summary: outcome.summary,
        path: dir.join("manifest.json"),
    };
    let text = serde_json::to_string_pretty(&manifest.to_json()).expect("manifest serialises");
    fs::write(&manifest.path, text + "\n").map_err(io_err(&manifest.path))?;
    Ok(manifest)
}

fn dispatch(cfg: &RunConfig, opts: &RunOptions) -> Res<Outcome> {
    let params = cfg.params;
    match &cfg.block {
        CommandBlock::Simulate(init) => simulate(cfg, params.expect("params"), init),
        CommandBlock::Collide(sol) => collide(cfg, params.expect("params"), sol),
        CommandBlock::MiScan(scan) => mi_scan(params.expect("params"), scan),
        CommandBlock::Ode(ode) => ode_run(cfg, params.expect("params"), ode),
        CommandBlock::Bloch(b) => bloch_run(cfg, b),
        CommandBlock::Kink { problem, output_stride } => {
            let sol = ctx("kink", solve_kink(problem))?;
            let mut t = Table::new(&["x", "E", "tanh_ref"]);
            for i in (0..sol.x.len()).step_by(*output_stride) {
                t.push_reals(&[sol.x[i], sol.e[i], sol.tanh_ref[i]]);
            }
            Ok(Outcome {
                tables: vec![Staged { name: "kink.csv", table: t }],
                summary: json!({
                    "residual": sol.residual,
                    "tanh_distance": sol.tanh_distance,
                    "odd_defect": sol.odd_defect,
                    "root_minus": sol.root_minus,
                    "root_plus": sol.root_plus,
                    "boundary_left": sol.e[0],
                    "boundary_right": sol.e[sol.e.len() - 1],
                    "iterations": sol.iterations,
                }),
            })
        }
        CommandBlock::LaxCheck(lax) => lax_check(params.expect("params"), lax, opts.seed),
    }
}

fn trajectory_tables(traj: &Trajectory, x_stride: usize) -> Vec<Staged> {
    let mut t = Table::new(&["t", "x", "E", "P", "N", "Q"]);
    for s in &traj.snapshots {
        for i in (0..s.len()).step_by(x_stride) {
            t.push_reals(&[s.time, traj.grid.x(i), s.e[i], s.p[i], s.n[i], s.q[i]]);
        }
    }
    let mut inv = Table::new(&["t", "H_gen", "eta_max_drift"]);
    for m in &traj.monitors {
        inv.push_reals(&[m.time, m.h_gen, m.eta_max_drift]);
    }
    vec![
        Staged {
            name: "trajectory.csv",
            table: t,
        },
        Staged {
            name: "invariants.csv",
            table: inv,
        },
    ]
}

fn drift_summary(traj: &Trajectory) -> Value {
    json!({
        "eta_drift_relative": traj.eta_drift_relative(),
        "h_gen_drift_relative": traj.h_gen_drift_relative(),
        "snapshots": traj.snapshots.len(),
    })
}

fn soliton_initial(params: &ModelParams, grid: &Grid1D, sol: &SolitonBlock) -> Res<(FieldState, Vec<rmb_core::SechProfile>)> {
    let specs: Vec<SolitonSpec> = sol
        .e0
        .iter()
        .zip(&sol.x0)
        .zip(&sol.polarity)
        .map(|((&e0, &x0), &pol)| ctx("soliton", SolitonSpec::new(e0, x0, pol)))
        .collect::<Res<_>>()?;
    let profiles: Vec<_> = specs
        .iter()
        .map(|s| ctx("soliton", sech_profile(s, params, sol.n_inf)))
        .collect::<Res<_>>()?;
    let state = if specs.len() == 1 {
        ctx("soliton", complete_fields(&profiles[0], params, sol.n_inf, grid, 0.0))?
    } else {
        ctx("collision set-up", build_collision(&specs[0], &specs[1], params, grid, sol.n_inf))?
    };
    Ok((state, profiles))
}

fn simulate(cfg: &RunConfig, params: ModelParams, init: &InitialData) -> Res<Outcome> {
    let grid = cfg.grid.expect("grid");
    let step = cfg.step.expect("step");
    let mut extra = json!({});
    let initial = match init {
        InitialData::Solitons(sol) => {
            let (state, profiles) = soliton_initial(&params, &grid, sol)?;
            extra["speeds"] = json!(profiles.iter().map(|p| p.speed).collect::<Vec<_>>());
            state
        }
        InitialData::Background {
            q0,
            n0,
            formulation,
            amplitude,
            mode,
        } => {
            let bg = ctx("background", stationary_state(&params, *q0, *n0, *formulation))?;
            let kappa = 2.0 * PI * *mode as f64 / grid.length();
            let curve = ctx("gain", gain_curve(&params, &bg, &[kappa], *formulation))?;
            extra["kappa"] = json!(kappa);
            extra["predicted_gain"] = json!(curve.gains[0]);
            let mut s = bg.lift(&grid);
            for i in 0..grid.n_points() {
                s.e[i] += amplitude * (kappa * (grid.x(i) - grid.origin())).cos();
            }
            s
        }
        InitialData::SinhGordon {
            e_amplitude,
            phi_amplitude,
        } => FieldState::from_fn(&grid, 0.0, |x| {
            let s = 1.0 / x.cosh();
            let phi = phi_amplitude * s;
            [e_amplitude * s, phi.sinh(), phi.cosh(), 0.0]
        }),
    };
    let traj = ctx("integrate", integrate(&initial, &params, &grid, &step))?;
    let mut summary = drift_summary(&traj);
    for (k, v) in extra.as_object().expect("object") {
        summary[k] = v.clone();
    }
    if matches!(init, InitialData::SinhGordon { .. }) {
        summary["sinh_gordon_residual"] = json!(ctx("sinh-Gordon check", sinh_gordon_residual(&traj))?);
    }
    Ok(Outcome {
        tables: trajectory_tables(&traj, cfg.x_stride),
        summary,
    })
}

fn collide(cfg: &RunConfig, params: ModelParams, sol: &SolitonBlock) -> Res<Outcome> {
    let grid = cfg.grid.expect("grid");
    let step = cfg.step.expect("step");
    let (initial, profiles) = soliton_initial(&params, &grid, sol)?;
    let traj = ctx("integrate", integrate(&initial, &params, &grid, &step))?;
    let report = ctx("tracking", track_and_phase_shift(&traj, &TrackConfig::for_profiles(&profiles)))?;
    let mut peaks = Table::new(&["t", "label", "x", "amplitude"]);
    for p in &report.peaks {
        peaks.push(vec![fmt_real(p.t), p.label.to_string(), fmt_real(p.x), fmt_real(p.amplitude)]);
    }
    let mut tables = trajectory_tables(&traj, cfg.x_stride);
    tables.insert(1, Staged { name: "peaks.csv", table: peaks });
    let mut summary = drift_summary(&traj);
    summary["collision_window"] = json!(report.collision_window.map(|(a, b)| [a, b]));
    summary["solitons"] = json!(report
        .solitons
        .iter()
        .zip(&profiles)
        .map(|(s, p)| json!({
            "speed": s.speed,
            "predicted_speed": p.speed,
            "phase_shift": s.phase_shift,
            "amplitude_pre": s.amplitude_pre,
            "amplitude_post": s.amplitude_post,
            "fit_rms": s.fit_rms,
        }))
        .collect::<Vec<_>>());
    Ok(Outcome { tables, summary })
}

struct ScanJob {
    params: ModelParams,
    q0: f64,
    n0: f64,
    formulation: rmb_core::Formulation,
}

fn mi_scan(base: ModelParams, scan: &ScanBlock) -> Res<Outcome> {
    let mut jobs = Vec::new();
    for &(s1, s2) in &scan.pairs {
        for &c in &scan.c {
            let params = ctx("params", ModelParams::new(s1, s2, base.omega0, base.alpha, c))?;
            let n0s = scan.n0.clone().unwrap_or_else(|| vec![-s1.value()]);
            for &q0 in &scan.q0 {
                for &n0 in &n0s {
                    for &formulation in &scan.formulations {
                        jobs.push(ScanJob {
                            params,
                            q0,
                            n0,
                            formulation,
                        });
                    }
                }
            }
        }
    }
    let classifiable = scan.kappas.len() >= 256 && scan.kappas[0] <= 0.0;
    let results: Vec<_> = jobs
        .par_iter()
        .map(|j| {
            let bg = ctx("background", stationary_state(&j.params, j.q0, j.n0, j.formulation))?;
            let curve = ctx("gain curve", gain_curve(&j.params, &bg, &scan.kappas, j.formulation))?;
            let regime = if classifiable && *scan.kappas.last().expect("nonempty") >= 10.0 * j.params.omega0 {
                Some(ctx("regime", classify_regime(&j.params, &bg, &scan.kappas, j.formulation))?)
            } else {
                None
            };
            Ok((curve, regime))
        })
        .collect::<Res<Vec<_>>>()?;

    let mut gain = Table::new(&["sigma1", "sigma2", "Q0", "N0", "c", "alpha", "omega0", "kappa", "gain", "mode"]);
    let mut regimes = Table::new(&[
        "sigma1",
        "sigma2",
        "Q0",
        "N0",
        "c",
        "mode",
        "regime",
        "expected",
        "max_gain",
        "kappa_at_max",
        "high_k_gain",
    ]);
    let mut mismatches = 0usize;
    for (j, (curve, regime)) in jobs.iter().zip(&results) {
        let p = &j.params;
        let lead = |v: &[String]| {
            let mut r = vec![p.sigma1.to_string(), p.sigma2.to_string(), fmt_real(j.q0), fmt_real(j.n0), fmt_real(p.c)];
            r.extend_from_slice(v);
            r
        };
        for (k, g) in curve.kappas.iter().zip(&curve.gains) {
            gain.push(lead(&[
                fmt_real(p.alpha),
                fmt_real(p.omega0),
                fmt_real(*k),
                fmt_real(*g),
                j.formulation.as_str().into(),
            ]));
        }
        if let Some(r) = regime {
            if !r.matches_expected() {
                mismatches += 1;
            }
            regimes.push(lead(&[
                j.formulation.as_str().into(),
                r.regime.as_str().into(),
                r.expected.as_str().into(),
                fmt_real(r.max_gain),
                fmt_real(r.kappa_at_max),
                fmt_real(r.high_k_gain),
            ]));
        }
    }
    let mut tables = vec![Staged { name: "gain.csv", table: gain }];
    if !regimes.rows.is_empty() {
        tables.push(Staged {
            name: "regimes.csv",
            table: regimes,
        });
    }
    Ok(Outcome {
        tables,
        summary: json!({
            "jobs": jobs.len(),
            "classified": classifiable,
            "regime_mismatches": mismatches,
        }),
    })
}

fn ode_run(cfg: &RunConfig, params: ModelParams, ode: &OdeBlock) -> Res<Outcome> {
    let step = cfg.step.expect("step");
    let init = OdeState::new(ode.p, ode.n, ode.q);
    let orbit = ctx("ode", integrate_ode(&init, &params, step.dt, step.t_end))?;
    let (h0, c0) = ctx("ode", conserved_hc(&init, &params))?;
    let mut t = Table::new(&["t", "P", "N", "Q", "H", "C"]);
    let (mut dh, mut dc) = (0.0f64, 0.0f64);
    let last = orbit.len() - 1;
    for (k, (time, s)) in orbit.iter().enumerate() {
        let (h, c) = ctx("ode", conserved_hc(s, &params))?;
        dh = dh.max((h - h0).abs());
        dc = dc.max((c - c0).abs());
        if k % step.snapshot_stride == 0 || k == last {
            t.push_reals(&[*time, s.p, s.n, s.q, h, c]);
        }
    }
    let fps = ctx("fixed points", fixed_points(&params, init.q.abs(), init.n))?;
    let fp_json: Vec<Value> = fps
        .iter()
        .map(|fp| {
            let r = ode_rhs(&fp.state, &params).map(|v| v.to_array().iter().fold(0.0f64, |m, x| m.max(x.abs())));
            json!({
                "P": fp.state.p,
                "N": fp.state.n,
                "Q": fp.state.q,
                "kind": fp.kind.as_str(),
                "rhs_norm": r.ok(),
            })
        })
        .collect();
    Ok(Outcome {
        tables: vec![Staged { name: "ode.csv", table: t }],
        summary: json!({
            "H_drift": dh,
            "C_drift": dc,
            "fixed_points": fp_json,
        }),
    })
}

fn bloch_run(cfg: &RunConfig, b: &BlochBlock) -> Res<Outcome> {
    let step = cfg.step.expect("step");
    let init = ctx("bloch", BlochState::new(b.f, b.p, b.variant, b.omega, b.omega0))?;
    let samples = ctx("bloch", bloch_integrate(&init, step.dt, step.t_end))?;
    let eta0 = init.eta();
    let mut t = Table::new(&["t", "f", "p_re", "p_im", "eta"]);
    let mut drift = 0.0f64;
    let last = samples.len() - 1;
    for (k, s) in samples.iter().enumerate() {
        drift = drift.max((s.eta - eta0).abs());
        if k % step.snapshot_stride == 0 || k == last {
            t.push_reals(&[s.t, s.f, s.p.re, s.p.im, s.eta]);
        }
    }
    Ok(Outcome {
        tables: vec![Staged { name: "bloch.csv", table: t }],
        summary: json!({ "eta_drift": drift }),
    })
}

/// Sum of three random plane waves per field on an `nx x nt` patch at the
/// origin; `N` is offset by one. Deterministic in `seed`.
pub fn random_smooth_patch(seed: u64, nx: usize, nt: usize, hx: f64, ht: f64) -> rmb_core::Result<Patch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = [[[0.0f64; 4]; 3]; 4];
    for field in modes.iter_mut() {
        for m in field.iter_mut() {
            *m = [
                rng.random_range(-0.5..0.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
                rng.random_range(0.0..2.0 * PI),
            ];
        }
    }
    let offset = [0.0, 0.0, 1.0, 0.0];
    Patch::from_fn(0.0, 0.0, hx, ht, nx, nt, |x, t| {
        std::array::from_fn(|f| {
            offset[f]
                + modes[f]
                    .iter()
                    .map(|[a, kx, kt, ph]| a * (kx * x + kt * t + ph).cos())
                    .sum::<f64>()
        })
    })
}

fn lax_patch(params: &ModelParams, lax: &LaxBlock, seed: u64, refine: usize) -> rmb_core::Result<Patch> {
    let (hx, ht) = (lax.hx / refine as f64, lax.ht / refine as f64);
    match lax.data {
        LaxData::Random => random_smooth_patch(seed, lax.nx, lax.nt, hx, ht),
        LaxData::Soliton => {
            let spec = SolitonSpec::new(lax.e0, 0.0, rmb_core::Sign::Plus)?;
            Patch::sech_soliton(&spec, params, rmb_core::DEFAULT_N_INF, (0.3, 0.2), hx, ht, lax.nx, lax.nt)
        }
    }
}

fn lax_check(params: ModelParams, lax: &LaxBlock, seed: u64) -> Res<Outcome> {
    let lambdas = lax.lambdas.clone().unwrap_or_else(|| default_lambdas(&params, lax.form));
    let patch = ctx("patch", lax_patch(&params, lax, seed, 1))?;
    let fine = ctx("patch", lax_patch(&params, lax, seed, 2))?;
    let norms: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&l| {
            Ok((
                ctx("zero curvature", zcr_norm(&patch, l, &params, lax.form))?,
                ctx("zero curvature", zcr_norm(&fine, l, &params, lax.form))?,
            ))
        })
        .collect::<Res<_>>()?;
    let mut t = Table::new(&["lambda_re", "lambda_im", "residual_norm"]);
    for (l, (n, _)) in lambdas.iter().zip(&norms) {
        t.push_reals(&[l.re, l.im, *n]);
    }
    let corr = ctx("correspondence", residual_correspondence(&patch, &lambdas, &params, lax.form))?;
    let k = (lax.nt / 2) * patch.nx + lax.nx / 2;
    let probe = [patch.p[k], patch.n[k], patch.q[k]];
    let pole_fits: Vec<Value> = poles(lax.form, &params)
        .iter()
        .map(|&(p, order): &(Complex64, u32)| {
            let fitted = fit_pole_order(lax.form, &params, p, probe).ok();
            json!({ "re": p.re, "im": p.im, "declared": order, "fitted": fitted })
        })
        .collect();
    let ratio = norms
        .iter()
        .map(|(a, b)| if *b > 0.0 { a / b } else { f64::NAN })
        .collect::<Vec<_>>();
    Ok(Outcome {
        tables: vec![Staged { name: "lax.csv", table: t }],
        summary: json!({
            "form": lax.form.as_str(),
            "correspondence": match corr.outcome {
                Correspondence::ConsistentZero => json!("consistent-zero"),
                Correspondence::Mismatch(m) => json!(m),
            },
            "condition": corr.condition,
            "refinement_ratio": ratio.iter().map(|r| if r.is_finite() { json!(r) } else { Value::Null }).collect::<Vec<_>>(),
            "poles": pole_fits,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn run_text(text: &str, dir: &Path) -> Res<RunManifest> {
        let cfg = parse_config(text)?;
        run(
            &cfg,
            &RunOptions {
                out: Some(dir.to_path_buf()),
                threads: Some(2),
                seed: 7,
            },
        )
    }

    #[test]
    fn mi_scan_rows_per_job_and_kappa() {
        let dir = tempfile::tempdir().unwrap();
        let text = "command = mi-scan\n[params]\nsigma1 = 1\nsigma2 = 1\n[scan]\nsigma1 = 1, -1\nsigma2 = 1, -1\nq0 = 0.5, 1.5\nkappa_points = 300\n";
        let m = run_text(text, dir.path()).unwrap();
        let gain = crate::output::read_csv(&dir.path().join("gain.csv")).unwrap();
        assert_eq!(gain.rows.len(), 4 * 2 * 300);
        assert_eq!(gain.header.len(), 10);
        assert_eq!(m.files.len(), 2);
        assert!(m.stale_files(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn numerical_failure_maps_to_exit_three() {
        let dir = tempfile::tempdir().unwrap();
        let text = "command = kink\n[kink]\nn_points = 2001\nmax_iter = 1\ntol = 1e-14\n";
        let err = run_text(text, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }

    #[test]
    fn domain_error_maps_to_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        // sigma1 = -1 has no bright soliton
        let text = "command = simulate\n[params]\nsigma1 = -1\nsigma2 = 1\n[grid]\nn_points = 256\n[step]\nt_end = 0.01\n";
        let err = run_text(text, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{err}");
    }

    #[test]
    fn random_patch_is_seeded() {
        let a = random_smooth_patch(3, 6, 6, 0.1, 0.1).unwrap();
        let b = random_smooth_patch(3, 6, 6, 0.1, 0.1).unwrap();
        let c = random_smooth_patch(4, 6, 6, 0.1, 0.1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
