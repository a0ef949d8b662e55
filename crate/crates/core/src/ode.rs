//! The spatially constant reduction (a conservative Lorenz-63 system) and the
//! driven two-level Bloch equations.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{invalid, Result, RmbError};
use crate::model::ModelParams;

/// Reduced state; the field is slaved to it through `E = -Q / (c omega0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub p: f64,
    pub n: f64,
    pub q: f64,
}

impl OdeState {
    pub fn new(p: f64, n: f64, q: f64) -> Self {
        OdeState { p, n, q }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p, self.n, self.q]
    }

    pub fn from_array([p, n, q]: [f64; 3]) -> Self {
        OdeState { p, n, q }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.n.is_finite() && self.q.is_finite()
    }

    pub fn field(&self, params: &ModelParams) -> f64 {
        -self.q / (params.c * params.omega0)
    }

    pub fn distance(&self, other: &OdeState) -> f64 {
        let (a, b, c) = (self.p - other.p, self.n - other.n, self.q - other.q);
        (a * a + b * b + c * c).sqrt()
    }
}

fn check_reduction(params: &ModelParams) -> Result<()> {
    if params.omega0 == 0.0 {
        return Err(RmbError::ReductionUndefined("omega0 = 0 (division by c omega0)"));
    }
    if params.c == 0.0 {
        return Err(RmbError::ReductionUndefined("c = 0 (division by c omega0)"));
    }
    Ok(())
}

fn rhs_array(s: [f64; 3], params: &ModelParams) -> [f64; 3] {
    let [p, n, q] = s;
    let cw = params.c * params.omega0;
    [
        -q * n / cw + params.s2() * params.omega0 * q,
        params.s1() * q * p / cw,
        -params.omega0 * p,
    ]
}

/// `(P_t, N_t, Q_t)` for the reduced system.
pub fn ode_rhs(s: &OdeState, params: &ModelParams) -> Result<OdeState> {
    check_reduction(params)?;
    Ok(OdeState::from_array(rhs_array(s.to_array(), params)))
}

/// `H = sigma1 Q^2 / (2 c omega0) + omega0 N` and
/// `C = P^2 / 2 + sigma1 (N - sigma2 c omega0^2)^2 / 2`.
pub fn conserved_hc(s: &OdeState, params: &ModelParams) -> Result<(f64, f64)> {
    check_reduction(params)?;
    let (c, w, s1, s2) = (params.c, params.omega0, params.s1(), params.s2());
    let h = s1 * s.q * s.q / (2.0 * c * w) + w * s.n;
    let shifted = s.n - s2 * c * w * w;
    let cc = 0.5 * s.p * s.p + 0.5 * s1 * shifted * shifted;
    Ok((h, cc))
}

/// `P^2 + sigma2 Q^2 + sigma1 N^2` rebuilt from `(H, C)` alone:
/// `2 C + 2 sigma1 sigma2 c omega0 H - sigma1 c^2 omega0^4`.
pub fn bloch_from_hc(h: f64, cc: f64, params: &ModelParams) -> f64 {
    let (c, w, s1, s2) = (params.c, params.omega0, params.s1(), params.s2());
    2.0 * cc + 2.0 * s1 * s2 * c * w * h - s1 * c * c * w.powi(4)
}

pub fn ode_bloch_quantity(s: &OdeState, params: &ModelParams) -> f64 {
    s.p * s.p + params.s2() * s.q * s.q + params.s1() * s.n * s.n
}

fn rk4<const D: usize>(y: [f64; D], dt: f64, f: &impl Fn([f64; D]) -> [f64; D]) -> [f64; D] {
    let add = |a: [f64; D], b: [f64; D], h: f64| -> [f64; D] { std::array::from_fn(|i| a[i] + h * b[i]) };
    let k1 = f(y);
    let k2 = f(add(y, k1, 0.5 * dt));
    let k3 = f(add(y, k2, 0.5 * dt));
    let k4 = f(add(y, k3, dt));
    std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn check_steps(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !(t_end > dt && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must exceed dt, got {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil() as usize)
}

/// Fixed-step RK4 orbit, every step recorded, starting with `(0, initial)`.
pub fn integrate_ode(initial: &OdeState, params: &ModelParams, dt: f64, t_end: f64) -> Result<Vec<(f64, OdeState)>> {
    check_reduction(params)?;
    let steps = check_steps(dt, t_end)?;
    if !initial.is_finite() {
        return Err(RmbError::NonFinite {
            time: 0.0,
            what: "initial ODE state".into(),
        });
    }
    let f = |y: [f64; 3]| rhs_array(y, params);
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = initial.to_array();
    out.push((0.0, *initial));
    for step in 1..=steps {
        let next = rk4(y, dt, &f);
        let t = step as f64 * dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(RmbError::NonFinite {
                time: t,
                what: format!("ODE state after (P, N, Q) = {y:?}"),
            });
        }
        y = next;
        out.push((t, OdeState::from_array(y)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnReport {
    pub period: f64,
    /// `|s(period) - s(0)|`.
    pub distance: f64,
}

/// First return to the plane through `initial` normal to the flow there.
///
/// The crossing time is refined by secant iteration on the partial RK4 step
/// from the last sample before the crossing.
pub fn poincare_return(initial: &OdeState, params: &ModelParams, dt: f64, t_max: f64) -> Result<ReturnReport> {
    check_reduction(params)?;
    let steps = check_steps(dt, t_max)?;
    let f = |y: [f64; 3]| rhs_array(y, params);
    let s0 = initial.to_array();
    let v0 = f(s0);
    if v0.iter().all(|&v| v == 0.0) {
        return Err(invalid("initial", "fixed point has no return map"));
    }
    let g = |y: [f64; 3]| (0..3).map(|i| (y[i] - s0[i]) * v0[i]).sum::<f64>();
    let mut y = s0;
    let mut g_prev = 0.0;
    for step in 1..=steps {
        let next = rk4(y, dt, &f);
        let g_now = g(next);
        if g_prev < 0.0 && g_now >= 0.0 {
            // secant on the substep length
            let (mut a, mut ga, mut b, mut gb) = (0.0, g_prev, dt, g_now);
            let mut h = b;
            for _ in 0..60 {
                h = b - gb * (b - a) / (gb - ga);
                let gh = g(rk4(y, h, &f));
                if gh.abs() < 1e-15 || (b - a).abs() < 1e-16 {
                    break;
                }
                (a, ga, b, gb) = (b, gb, h, gh);
            }
            let end = OdeState::from_array(rk4(y, h, &f));
            return Ok(ReturnReport {
                period: (step - 1) as f64 * dt + h,
                distance: end.distance(initial),
            });
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(RmbError::NonFinite {
                time: step as f64 * dt,
                what: "orbit diverged before returning".into(),
            });
        }
        y = next;
        g_prev = g_now;
    }
    Err(RmbError::Tracking(format!("no return to the section before t = {t_max}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Centre,
    Saddle,
    Degenerate,
}

impl FixedPointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FixedPointKind::Centre => "centre",
            FixedPointKind::Saddle => "saddle",
            FixedPointKind::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub state: OdeState,
    pub eigenvalues: [Complex64; 3],
    pub kind: FixedPointKind,
}

/// Analytic Jacobian of [`ode_rhs`], rows `(P, N, Q)`.
pub fn ode_jacobian(s: &OdeState, params: &ModelParams) -> Result<Matrix3<f64>> {
    check_reduction(params)?;
    let cw = params.c * params.omega0;
    let (s1, s2, w) = (params.s1(), params.s2(), params.omega0);
    #[rustfmt::skip]
    let j = Matrix3::new(
        0.0,            -s.q / cw, -s.n / cw + s2 * w,
        s1 * s.q / cw,  0.0,       s1 * s.p / cw,
        -w,             0.0,       0.0,
    );
    Ok(j)
}

/// Two-sided finite-difference Jacobian with step `h`.
pub fn ode_jacobian_fd(s: &OdeState, params: &ModelParams, h: f64) -> Result<Matrix3<f64>> {
    check_reduction(params)?;
    let base = s.to_array();
    let mut j = Matrix3::zeros();
    for col in 0..3 {
        let mut plus = base;
        let mut minus = base;
        plus[col] += h;
        minus[col] -= h;
        let (fp, fm) = (rhs_array(plus, params), rhs_array(minus, params));
        for row in 0..3 {
            j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
        }
    }
    Ok(j)
}

pub fn eigenvalues3(j: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = j.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

fn classify(ev: &[Complex64; 3]) -> FixedPointKind {
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * scale.max(1.0);
    if ev.iter().any(|z| z.re.abs() > tol) {
        FixedPointKind::Saddle
    } else if ev.iter().any(|z| z.im.abs() > tol) {
        FixedPointKind::Centre
    } else {
        FixedPointKind::Degenerate
    }
}

/// The equilibrium `(0, n_rest, 0)` of the `Q = 0` family followed by
/// `(0, sigma2 c omega0^2, +Q_amplitude)` and `(0, sigma2 c omega0^2, -Q_amplitude)`.
pub fn fixed_points(params: &ModelParams, q_amplitude: f64, n_rest: f64) -> Result<Vec<FixedPoint>> {
    check_reduction(params)?;
    let n_star = params.s2() * params.c * params.omega0 * params.omega0;
    let states = [
        OdeState::new(0.0, n_rest, 0.0),
        OdeState::new(0.0, n_star, q_amplitude),
        OdeState::new(0.0, n_star, -q_amplitude),
    ];
    states
        .iter()
        .map(|&state| {
            let eigenvalues = eigenvalues3(&ode_jacobian(&state, params)?);
            Ok(FixedPoint {
                state,
                eigenvalues,
                kind: classify(&eigenvalues),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlochVariant {
    /// Two-level (sphere) equations.
    Sbe,
    /// Hyperbolic equations.
    Hbe,
}

impl BlochVariant {
    fn sign(self) -> f64 {
        match self {
            BlochVariant::Sbe => 1.0,
            BlochVariant::Hbe => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub f: f64,
    pub p: Complex64,
    pub variant: BlochVariant,
    pub omega: Complex64,
    pub omega0: f64,
}

impl BlochState {
    pub fn new(f: f64, p: Complex64, variant: BlochVariant, omega: Complex64, omega0: f64) -> Result<Self> {
        let s = BlochState {
            f,
            p,
            variant,
            omega,
            omega0,
        };
        if ![f, p.re, p.im, omega.re, omega.im, omega0].iter().all(|v| v.is_finite()) {
            return Err(invalid("bloch", "all entries must be finite"));
        }
        if variant == BlochVariant::Sbe && !(-1.0..=1.0).contains(&f) {
            return Err(invalid("f", format!("SBE occupation must lie in [-1, 1], got {f}")));
        }
        Ok(s)
    }

    /// `(f - 1/2)^2 + |p|^2` for SBE, `(f + 1/2)^2 - |p|^2` for HBE.
    pub fn eta(&self) -> f64 {
        match self.variant {
            BlochVariant::Sbe => (self.f - 0.5).powi(2) + self.p.norm_sqr(),
            BlochVariant::Hbe => (self.f + 0.5).powi(2) - self.p.norm_sqr(),
        }
    }

    /// `(f_dot, p_dot)` with `i p_dot = omega0 p + (2 f -+ 1) Omega` and
    /// `f_dot = -+ 2 Im(Omega p*)`, upper signs for SBE.
    pub fn rates(&self) -> (f64, Complex64) {
        let s = self.variant.sign();
        let p_dot = Complex64::new(0.0, -1.0) * (self.omega0 * self.p + (2.0 * self.f - s) * self.omega);
        let f_dot = -s * 2.0 * (self.omega * self.p.conj()).im;
        (f_dot, p_dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSample {
    pub t: f64,
    pub f: f64,
    pub p: Complex64,
    pub eta: f64,
}

pub fn bloch_integrate(initial: &BlochState, dt: f64, t_end: f64) -> Result<Vec<BlochSample>> {
    let steps = check_steps(dt, t_end)?;
    let rhs = |y: [f64; 3]| {
        let s = BlochState {
            f: y[0],
            p: Complex64::new(y[1], y[2]),
            ..*initial
        };
        let (fd, pd) = s.rates();
        [fd, pd.re, pd.im]
    };
    let mut y = [initial.f, initial.p.re, initial.p.im];
    let sample = |t: f64, y: [f64; 3]| {
        let s = BlochState {
            f: y[0],
            p: Complex64::new(y[1], y[2]),
            ..*initial
        };
        BlochSample {
            t,
            f: s.f,
            p: s.p,
            eta: s.eta(),
        }
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(sample(0.0, y));
    for step in 1..=steps {
        y = rk4(y, dt, &rhs);
        let t = step as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(RmbError::NonFinite {
                time: t,
                what: "Bloch state".into(),
            });
        }
        out.push(sample(t, y));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_params;
    use proptest::prelude::*;

    fn rmb() -> ModelParams {
        make_params(1, 1, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn equilibria() {
        let params = rmb();
        for n in [-2.0, 0.0, 3.5] {
            let d = ode_rhs(&OdeState::new(0.0, n, 0.0), &params).unwrap();
            assert_eq!(d.to_array(), [0.0, 0.0, 0.0]);
        }
        let d = ode_rhs(&OdeState::new(0.0, 0.25, 0.7), &params).unwrap();
        assert!(d.to_array().iter().all(|v| v.abs() <= 1e-15));
    }

    #[test]
    fn lower_sheet_orbit_stays_on_its_sheet() {
        // sigma1 = -1, sigma2 = 1, eta < 0: the H parabola closes the N < 0 sheet at c = 1
        let params = make_params(-1, 1, 0.6, 1.0, 1.0).unwrap();
        let init = OdeState::new(0.2, -1.0, 0.3);
        let eta = ode_bloch_quantity(&init, &params);
        assert!(eta < 0.0);
        for (_, s) in integrate_ode(&init, &params, 1e-3, 50.0).unwrap() {
            assert!(s.n <= -(-eta).sqrt() + 1e-9);
            assert!((ode_bloch_quantity(&s, &params) - eta).abs() < 1e-9);
        }
    }

    #[test]
    fn reduction_needs_omega0() {
        let params = make_params(1, 1, 0.0, 1.0, 1.0).unwrap();
        let err = ode_rhs(&OdeState::new(0.0, 1.0, 0.0), &params).unwrap_err();
        assert!(err.to_string().contains("reduction undefined"));
        assert!(conserved_hc(&OdeState::new(0.0, 1.0, 0.0), &params).is_err());
    }

    #[test]
    fn hc_at_origin() {
        let (h, c) = conserved_hc(&OdeState::new(0.0, 0.0, 0.0), &rmb()).unwrap();
        assert_eq!(h, 0.0);
        assert!((c - 0.03125).abs() < 1e-15);
        let hyper = make_params(-1, 1, 0.5, 1.0, 1.0).unwrap();
        let (_, c) = conserved_hc(&OdeState::new(0.0, 0.0, 0.0), &hyper).unwrap();
        assert!((c + 0.03125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn hc_rates_vanish(
            p in -3.0..3.0f64, n in -3.0..3.0f64, q in -3.0..3.0f64,
            w in 0.2..2.0f64, c in 0.5..2.0f64, s1 in prop::bool::ANY, s2 in prop::bool::ANY,
        ) {
            let params = make_params(if s1 { 1 } else { -1 }, if s2 { 1 } else { -1 }, w, 1.0, c).unwrap();
            let s = OdeState::new(p, n, q);
            let d = ode_rhs(&s, &params).unwrap();
            let (s1, s2) = (params.s1(), params.s2());
            // gradients of H and C
            let gh = [0.0, w, s1 * q / (c * w)];
            let gc = [p, s1 * (n - s2 * c * w * w), 0.0];
            let dv = d.to_array();
            let dh: f64 = gh.iter().zip(&dv).map(|(a, b)| a * b).sum();
            let dc: f64 = gc.iter().zip(&dv).map(|(a, b)| a * b).sum();
            let scale = 1.0 + dv.iter().map(|v| v.abs()).sum::<f64>() * 10.0;
            prop_assert!(dh.abs() <= 1e-14 * scale);
            prop_assert!(dc.abs() <= 1e-14 * scale);

            let (h, cc) = conserved_hc(&s, &params).unwrap();
            let eta = ode_bloch_quantity(&s, &params);
            prop_assert!((bloch_from_hc(h, cc, &params) - eta).abs() <= 1e-12 * (1.0 + eta.abs()));
        }
    }

    #[test]
    fn fixed_point_stays_put() {
        let params = rmb();
        let traj = integrate_ode(&OdeState::new(0.0, 0.25, 0.4), &params, 1e-2, 5.0).unwrap();
        let last = traj.last().unwrap().1;
        assert!(last.distance(&OdeState::new(0.0, 0.25, 0.4)) <= 1e-12);
    }

    #[test]
    fn sphere_orbit_returns() {
        let params = rmb();
        let start = OdeState::new(0.1, -0.5, 0.2);
        let rep = poincare_return(&start, &params, 1e-3, 200.0).unwrap();
        assert!(rep.period > 0.1);
        assert!(rep.distance <= 1e-6, "{rep:?}");
    }

    #[test]
    fn classification() {
        let params = rmb();
        let fps = fixed_points(&params, 0.6, 1.0).unwrap();
        assert_eq!(fps[0].kind, FixedPointKind::Saddle); // n/c = 1 > omega0^2
        assert_eq!(fps[1].kind, FixedPointKind::Centre);
        assert_eq!(fps[2].kind, FixedPointKind::Centre);
        let low = fixed_points(&params, 0.6, -1.0).unwrap();
        assert_eq!(low[0].kind, FixedPointKind::Centre);
        let hyper = make_params(-1, 1, 0.5, 1.0, 1.0).unwrap();
        let fps = fixed_points(&hyper, 0.6, -1.0).unwrap();
        assert_eq!(fps[1].kind, FixedPointKind::Saddle);
        for fp in &fps {
            let d = ode_rhs(&fp.state, &hyper).unwrap();
            assert!(d.to_array().iter().all(|v| v.abs() <= 1e-14));
        }
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let params = make_params(1, -1, 0.7, 1.0, 1.3).unwrap();
        let s = OdeState::new(0.3, -0.8, 0.45);
        let a = ode_jacobian(&s, &params).unwrap();
        let b = ode_jacobian_fd(&s, &params, 1e-6).unwrap();
        assert!((a - b).amax() < 1e-8);
    }

    #[test]
    fn bloch_free_rotation() {
        let s = BlochState::new(0.3, Complex64::new(0.4, 0.0), BlochVariant::Sbe, Complex64::new(0.0, 0.0), 1.5)
            .unwrap();
        let traj = bloch_integrate(&s, 1e-3, 2.0).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.f, 0.3);
        assert!((last.p.norm() - 0.4).abs() < 1e-12);
        assert!((last.p.arg() + 1.5 * 2.0).abs() < 1e-9);
    }

    #[test]
    fn bloch_variants_flip_f_rate() {
        let om = Complex64::new(0.3, 0.1);
        let p = Complex64::new(0.2, -0.5);
        let a = BlochState::new(0.1, p, BlochVariant::Sbe, om, 1.0).unwrap();
        let b = BlochState { variant: BlochVariant::Hbe, ..a };
        assert_eq!(a.rates().0, -b.rates().0);
        assert!(BlochState::new(1.5, p, BlochVariant::Sbe, om, 1.0).is_err());
        assert!(BlochState::new(1.5, p, BlochVariant::Hbe, om, 1.0).is_ok());
    }
}
