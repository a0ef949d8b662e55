//! Method-of-lines integration of the four-field system with classic RK4.

use crate::derivative::{DerivativeScheme, Differentiator};
use crate::error::{invalid, Result, RmbError};
use crate::model::{bloch_quantity, hamiltonian, Boundary, FieldState, Grid1D, ModelParams};

/// Edge amplitude allowed for [`Boundary::Vanishing`] initial data.
pub const VANISHING_EDGE_TOL: f64 = 1e-12;

/// Fixed-step controls for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub scheme: DerivativeScheme,
}

impl StepControl {
    pub fn new(dt: f64, t_end: f64, snapshot_stride: usize, scheme: DerivativeScheme) -> Self {
        StepControl {
            dt,
            t_end,
            snapshot_stride,
            scheme,
        }
    }

    pub fn validate(&self, params: &ModelParams, grid: &Grid1D) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > self.dt && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must exceed dt, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(invalid("snapshot_stride", "must be >= 1"));
        }
        if params.c != 0.0 {
            let limit = 0.5 * grid.spacing() / (1.0f64).max((1.0 / params.c).abs());
            if self.dt > limit {
                return Err(invalid(
                    "dt",
                    format!("CFL guard: dt = {} exceeds {limit}", self.dt),
                ));
            }
        }
        Ok(())
    }

    /// Number of RK4 steps; the last step lands on `t_end` to round-off.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }
}

/// One row of the monitor time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    pub time: f64,
    pub h_gen: f64,
    /// `max_x |eta(x, t) - eta(x, 0)|`.
    pub eta_max_drift: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub n_min: f64,
    pub n_max: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub grid: Grid1D,
    pub scheme: DerivativeScheme,
    pub snapshots: Vec<FieldState>,
    pub monitors: Vec<MonitorRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &FieldState {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }

    /// Largest pointwise eta drift over the run, relative to `max_x |eta(x, 0)|`.
    pub fn eta_drift_relative(&self) -> f64 {
        let eta0 = bloch_quantity(&self.snapshots[0], &self.params).expect("validated state");
        let scale = eta0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let drift = self.monitors.iter().fold(0.0f64, |m, r| m.max(r.eta_max_drift));
        drift / scale
    }

    /// Largest `|H_gen(t) - H_gen(0)| / |H_gen(0)|` over the run.
    pub fn h_gen_drift_relative(&self) -> f64 {
        let h0 = self.monitors[0].h_gen;
        self.monitors
            .iter()
            .fold(0.0f64, |m, r| m.max((r.h_gen - h0).abs()))
            / h0.abs()
    }
}

/// Right-hand side evaluator with preallocated derivative buffers.
#[derive(Debug)]
pub struct RhsEvaluator {
    params: ModelParams,
    diff: Differentiator,
    e_x: Vec<f64>,
}

impl RhsEvaluator {
    pub fn new(params: &ModelParams, grid: &Grid1D, scheme: DerivativeScheme) -> Result<Self> {
        if params.c == 0.0 {
            return Err(RmbError::NoTimeEvolution);
        }
        Ok(RhsEvaluator {
            params: *params,
            diff: Differentiator::new(scheme, grid.n_points(), grid.length()),
            e_x: vec![0.0; grid.n_points()],
        })
    }

    /// Writes `(E_t, P_t, N_t, Q_t)` into `out`.
    pub fn eval_into(&mut self, state: &FieldState, out: &mut FieldState) {
        let ModelParams {
            omega0: w,
            alpha,
            c,
            ..
        } = self.params;
        let (s1, s2) = (self.params.s1(), self.params.s2());
        self.diff.apply(&state.e, &mut self.e_x);
        let inv_c = 1.0 / c;
        for i in 0..state.len() {
            let (e, p, n, q) = (state.e[i], state.p[i], state.n[i], state.q[i]);
            out.e[i] = (alpha * p - self.e_x[i]) * inv_c;
            out.p[i] = e * n + s2 * w * q;
            out.n[i] = -s1 * e * p;
            out.q[i] = -w * p;
        }
        out.time = state.time;
    }
}

/// Time derivative of every field, with `E_t = (alpha P - E_x) / c`.
pub fn rhs(
    state: &FieldState,
    params: &ModelParams,
    grid: &Grid1D,
    scheme: DerivativeScheme,
) -> Result<FieldState> {
    state.validate(grid)?;
    let mut eval = RhsEvaluator::new(params, grid, scheme)?;
    let mut out = FieldState::zeros(grid.n_points(), state.time);
    eval.eval_into(state, &mut out);
    Ok(out)
}

struct Rk4Buffers {
    k: [FieldState; 4],
    stage: FieldState,
}

fn axpy_state(out: &mut FieldState, base: &FieldState, a: f64, k: &FieldState) {
    for (o, (b, d)) in out.fields_mut().into_iter().zip(base.fields().into_iter().zip(k.fields())) {
        for ((ov, &bv), &dv) in o.iter_mut().zip(b).zip(d) {
            *ov = bv + a * dv;
        }
    }
}

fn rk4_step(eval: &mut RhsEvaluator, y: &mut FieldState, dt: f64, buf: &mut Rk4Buffers) {
    let t0 = y.time;
    eval.eval_into(y, &mut buf.k[0]);
    axpy_state(&mut buf.stage, y, 0.5 * dt, &buf.k[0]);
    buf.stage.time = t0 + 0.5 * dt;
    eval.eval_into(&buf.stage, &mut buf.k[1]);
    axpy_state(&mut buf.stage, y, 0.5 * dt, &buf.k[1]);
    eval.eval_into(&buf.stage, &mut buf.k[2]);
    axpy_state(&mut buf.stage, y, dt, &buf.k[2]);
    buf.stage.time = t0 + dt;
    eval.eval_into(&buf.stage, &mut buf.k[3]);
    let w = dt / 6.0;
    let [k1, k2, k3, k4] = &buf.k;
    for (field, ((d1, d2), (d3, d4))) in y
        .fields_mut()
        .into_iter()
        .zip(k1.fields().into_iter().zip(k2.fields()).zip(k3.fields().into_iter().zip(k4.fields())))
    {
        for i in 0..field.len() {
            field[i] += w * (d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i]);
        }
    }
}

fn check_vanishing_edges(state: &FieldState) -> Result<()> {
    let last = state.len() - 1;
    for (name, f) in [("E", &state.e), ("P", &state.p), ("Q", &state.q)] {
        let edge = f[0].abs().max(f[last].abs());
        if edge > VANISHING_EDGE_TOL {
            return Err(invalid(
                "initial",
                format!("vanishing boundary requested but |{name}| = {edge:e} at the edge"),
            ));
        }
    }
    if (state.n[0] - state.n[last]).abs() > VANISHING_EDGE_TOL {
        return Err(invalid("initial", "N differs between the two edges"));
    }
    Ok(())
}

fn monitor(state: &FieldState, eta0: &[f64], params: &ModelParams, grid: &Grid1D) -> MonitorRecord {
    let eta = bloch_quantity(state, params).expect("validated state");
    let drift = eta
        .iter()
        .zip(eta0)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let (e_min, e_max) = extrema(&state.e);
    let (n_min, n_max) = extrema(&state.n);
    MonitorRecord {
        time: state.time,
        h_gen: hamiltonian(state, params, grid).expect("validated state"),
        eta_max_drift: drift,
        e_min,
        e_max,
        n_min,
        n_max,
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Integrates from `initial` with fixed-step RK4, sampling a snapshot and a
/// monitor record every `snapshot_stride` steps and at the final time.
pub fn integrate(
    initial: &FieldState,
    params: &ModelParams,
    grid: &Grid1D,
    ctl: &StepControl,
) -> Result<Trajectory> {
    initial.validate(grid)?;
    ctl.validate(params, grid)?;
    if grid.boundary() == Boundary::Vanishing {
        check_vanishing_edges(initial)?;
    }
    let mut eval = RhsEvaluator::new(params, grid, ctl.scheme)?;
    let n = grid.n_points();
    let mut buf = Rk4Buffers {
        k: std::array::from_fn(|_| FieldState::zeros(n, 0.0)),
        stage: FieldState::zeros(n, 0.0),
    };

    let t0 = initial.time;
    let eta0 = bloch_quantity(initial, params)?;
    let mut y = initial.clone();
    let mut snapshots = vec![y.clone()];
    let mut monitors = vec![monitor(&y, &eta0, params, grid)];
    let steps = ctl.n_steps();
    for step in 1..=steps {
        rk4_step(&mut eval, &mut y, ctl.dt, &mut buf);
        y.time = t0 + step as f64 * ctl.dt;
        if !y.is_finite() {
            return Err(RmbError::BlowUp {
                time: y.time,
                last_good: Box::new(snapshots.last().cloned().expect("initial snapshot")),
            });
        }
        if step % ctl.snapshot_stride == 0 || step == steps {
            monitors.push(monitor(&y, &eta0, params, grid));
            snapshots.push(y.clone());
        }
    }
    Ok(Trajectory {
        params: *params,
        grid: *grid,
        scheme: ctl.scheme,
        snapshots,
        monitors,
    })
}

/// Tolerance on `N^2 - P^2 - 1` for sinh-Gordon data.
pub const SHEET_TOL: f64 = 1e-8;

/// Checks the `omega0 = 0`, `sigma1 = -1`, `Q = 0` reduction on a trajectory.
///
/// With `P = sinh(phi)` and `N = cosh(phi)` the `P` and `N` equations give
/// `phi_t = E`, and the `E` equation becomes
/// `c phi_tt + phi_xt = alpha sinh(phi)`; at `c = 0` this is the sinh-Gordon
/// equation `phi_xt = alpha sinh(phi)`. `phi = asinh(P)` is reconstructed on
/// every snapshot, time derivatives use second-order central differences across
/// snapshots (which must be uniformly spaced) and `x` derivatives use the
/// trajectory's scheme. Returns the largest absolute residual over interior
/// snapshots.
pub fn sinh_gordon_residual(traj: &Trajectory) -> Result<f64> {
    let params = &traj.params;
    if params.omega0 != 0.0 {
        return Err(invalid("omega0", "sinh-Gordon limit needs omega0 = 0"));
    }
    if params.sigma1.as_int() != -1 {
        return Err(invalid("sigma1", "sinh-Gordon limit needs sigma1 = -1"));
    }
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(invalid("trajectory", "need at least three snapshots"));
    }
    for s in snaps {
        if s.q.iter().any(|&q| q != 0.0) {
            return Err(invalid("Q", "sinh-Gordon limit needs Q = 0"));
        }
        for (&p, &n) in s.p.iter().zip(&s.n) {
            if n <= 0.0 {
                return Err(RmbError::OffSheet(format!("N = {n} <= 0 at t = {}", s.time)));
            }
            let defect = n * n - p * p - 1.0;
            if defect.abs() > SHEET_TOL * (1.0 + n * n) {
                return Err(RmbError::OffSheet(format!(
                    "N^2 - P^2 - 1 = {defect:e} at t = {}",
                    s.time
                )));
            }
        }
    }
    let tau = snaps[1].time - snaps[0].time;
    for w in snaps.windows(2) {
        let gap = w[1].time - w[0].time;
        if (gap - tau).abs() > 1e-9 * tau {
            return Err(invalid("trajectory", "snapshots must be uniformly spaced"));
        }
    }

    let phi: Vec<Vec<f64>> = snaps.iter().map(|s| s.p.iter().map(|p| p.asinh()).collect()).collect();
    let mut diff = Differentiator::new(traj.scheme, traj.grid.n_points(), traj.grid.length());
    let n = traj.grid.n_points();
    let mut phi_t = vec![0.0; n];
    let mut phi_xt = vec![0.0; n];
    let mut worst = 0.0f64;
    for k in 1..snaps.len() - 1 {
        for i in 0..n {
            phi_t[i] = (phi[k + 1][i] - phi[k - 1][i]) / (2.0 * tau);
        }
        diff.apply(&phi_t, &mut phi_xt);
        for i in 0..n {
            let phi_tt = (phi[k + 1][i] - 2.0 * phi[k][i] + phi[k - 1][i]) / (tau * tau);
            let r = params.c * phi_tt + phi_xt[i] - params.alpha * phi[k][i].sinh();
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}
