//! Sech pulses on a vanishing background: exact four-field data, collision
//! set-ups and world-line fits.

use crate::error::{invalid, Result, RmbError};
use crate::model::{FieldState, Grid1D, ModelParams, Sign};
use crate::pde::Trajectory;

/// Background inversion of the collision runs.
pub const DEFAULT_N_INF: f64 = -1.0;

/// Largest accepted normalised overlap `max |E_a E_b| / (A_a A_b)`.
pub const OVERLAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonSpec {
    /// Peak amplitude.
    pub e0: f64,
    /// Peak position at `t = 0`.
    pub x0: f64,
    pub polarity: Sign,
}

impl SolitonSpec {
    pub fn new(e0: f64, x0: f64, polarity: Sign) -> Result<Self> {
        if !(e0 > 0.0 && e0.is_finite()) {
            return Err(invalid("E0", format!("amplitude must be > 0, got {e0}")));
        }
        if !x0.is_finite() {
            return Err(invalid("x0", "must be finite"));
        }
        Ok(SolitonSpec { e0, x0, polarity })
    }
}

/// A travelling wave `E(xi)`, `xi = t - (x - x0) / v`, with its first two
/// derivatives in `xi`.
pub trait TravellingWave {
    fn speed(&self) -> f64;
    fn x0(&self) -> f64;
    /// `[E, E', E'']` at `xi`.
    fn shape(&self, xi: f64) -> [f64; 3];

    fn xi(&self, x: f64, t: f64) -> f64 {
        t - (x - self.x0()) / self.speed()
    }
}

/// `E = +-E0 sech(E0 xi / 2)` with the speed fixed by the `P` equation:
/// `v = D / (c D - 4 alpha N_inf)`, `D = E0^2 + 4 sigma2 omega0^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechProfile {
    pub spec: SolitonSpec,
    pub n_inf: f64,
    pub speed: f64,
    /// `D / 4`, the speed of the same pulse written with `c = 0`,
    /// `alpha = 1`, `N_inf = -1`.
    pub reference_speed: f64,
    /// Inverse width in `xi`.
    pub k: f64,
}

impl SechProfile {
    /// Closed-form `E(x, t)`.
    pub fn e(&self, x: f64, t: f64) -> f64 {
        self.shape(self.xi(x, t))[0]
    }

    /// Pulse width in `x` at fixed `t`, `|v| / k`.
    pub fn width(&self) -> f64 {
        self.speed.abs() / self.k
    }
}

impl TravellingWave for SechProfile {
    fn speed(&self) -> f64 {
        self.speed
    }

    fn x0(&self) -> f64 {
        self.spec.x0
    }

    fn shape(&self, xi: f64) -> [f64; 3] {
        let a = self.spec.polarity.value() * self.spec.e0;
        let s = 1.0 / (self.k * xi).cosh();
        let th = (self.k * xi).tanh();
        let e = a * s;
        let de = -a * self.k * s * th;
        let dde = a * self.k * self.k * s * (th * th - s * s);
        [e, de, dde]
    }
}

/// The zero travelling wave, for testing the field completion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vacuum {
    pub speed: f64,
}

impl TravellingWave for Vacuum {
    fn speed(&self) -> f64 {
        self.speed
    }

    fn x0(&self) -> f64 {
        0.0
    }

    fn shape(&self, _xi: f64) -> [f64; 3] {
        [0.0; 3]
    }
}

pub fn sech_profile(spec: &SolitonSpec, params: &ModelParams, n_inf: f64) -> Result<SechProfile> {
    if params.sigma1 == Sign::Minus {
        return Err(RmbError::NoBrightSoliton);
    }
    if n_inf == 0.0 || !n_inf.is_finite() {
        return Err(invalid("N_inf", "background inversion must be finite and nonzero"));
    }
    let d = spec.e0 * spec.e0 + 4.0 * params.s2() * params.omega0 * params.omega0;
    if d == 0.0 {
        return Err(invalid("E0", "E0^2 + 4 sigma2 omega0^2 vanishes"));
    }
    let denom = params.c * d - 4.0 * params.alpha * n_inf;
    if denom == 0.0 {
        return Err(invalid("c", "pulse would have infinite speed"));
    }
    Ok(SechProfile {
        spec: *spec,
        n_inf,
        speed: d / denom,
        reference_speed: d / 4.0,
        k: 0.5 * spec.e0,
    })
}

/// Tolerance on `P_t - E N - sigma2 omega0 Q` for [`complete_fields`].
pub const TRAVELLING_TOL: f64 = 1e-8;

/// `(E, P, N, Q)` of a travelling wave at one point, plus the residual of the
/// `P` equation there. With `beta = (c - 1/v) / alpha` the other three
/// equations integrate to `P = beta E'`, `N = N_inf - sigma1 beta E^2 / 2` and
/// `Q = -omega0 beta E`.
pub fn travelling_fields(
    wave: &impl TravellingWave,
    params: &ModelParams,
    n_inf: f64,
    x: f64,
    t: f64,
) -> ([f64; 4], f64) {
    let beta = (params.c - 1.0 / wave.speed()) / params.alpha;
    let (s1, s2, w) = (params.s1(), params.s2(), params.omega0);
    let [e, de, dde] = wave.shape(wave.xi(x, t));
    let p = beta * de;
    let n = n_inf - 0.5 * s1 * beta * e * e;
    let q = -w * beta * e;
    let r = beta * dde - e * n - s2 * w * q;
    let scale = (beta * dde).abs().max((e * n).abs()).max(1.0);
    ([e, p, n, q], r / scale)
}

/// Builds `(E, P, N, Q)` at time `t` from a travelling `E` with
/// [`travelling_fields`], checking the `P` equation pointwise.
pub fn complete_fields(
    wave: &impl TravellingWave,
    params: &ModelParams,
    n_inf: f64,
    grid: &Grid1D,
    t: f64,
) -> Result<FieldState> {
    let v = wave.speed();
    if v == 0.0 || !v.is_finite() {
        return Err(invalid("speed", "travelling wave needs finite nonzero speed"));
    }
    let mut worst = 0.0f64;
    let state = FieldState::from_fn(grid, t, |x| {
        let (f, r) = travelling_fields(wave, params, n_inf, x, t);
        worst = worst.max(r.abs());
        f
    });
    if worst > TRAVELLING_TOL {
        return Err(RmbError::InconsistentTravellingWave(worst));
    }
    Ok(state)
}

/// Signed distance from `a` to `b` on the periodic grid.
fn periodic_delta(a: f64, b: f64, length: f64) -> f64 {
    let d = b - a;
    d - length * (d / length).round()
}

/// Additive superposition of two completed pulses over the shared background.
pub fn build_collision(
    a: &SolitonSpec,
    b: &SolitonSpec,
    params: &ModelParams,
    grid: &Grid1D,
    n_inf: f64,
) -> Result<FieldState> {
    let pa = sech_profile(a, params, n_inf)?;
    let pb = sech_profile(b, params, n_inf)?;
    let fa = complete_fields(&pa, params, n_inf, grid, 0.0)?;
    let fb = complete_fields(&pb, params, n_inf, grid, 0.0)?;
    // Overlap on the periodic domain: use the nearest image of each peak.
    let mut overlap = 0.0f64;
    for i in 0..grid.n_points() {
        let x = grid.x(i);
        let ea = pa.e(pa.spec.x0 + periodic_delta(pa.spec.x0, x, grid.length()), 0.0);
        let eb = pb.e(pb.spec.x0 + periodic_delta(pb.spec.x0, x, grid.length()), 0.0);
        overlap = overlap.max((ea * eb).abs() / (a.e0 * b.e0));
    }
    if overlap > OVERLAP_TOL {
        return Err(RmbError::NotSeparated(overlap));
    }
    let mut out = fa.clone();
    for i in 0..grid.n_points() {
        out.e[i] += fb.e[i];
        out.p[i] += fb.p[i];
        out.n[i] += fb.n[i] - n_inf;
        out.q[i] += fb.q[i];
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: f64,
    pub amplitude: f64,
}

/// Local maxima of `|E|` above `min_height`, refined by a parabola through the
/// three samples around each maximum (periodic wrap).
pub fn find_peaks(e: &[f64], grid: &Grid1D, min_height: f64) -> Vec<Peak> {
    let n = e.len();
    let h = grid.spacing();
    let mut out = Vec::new();
    for i in 0..n {
        let (l, c, r) = (e[(i + n - 1) % n].abs(), e[i].abs(), e[(i + 1) % n].abs());
        if c < min_height || c <= l || c < r {
            continue;
        }
        let curv = l - 2.0 * c + r;
        let (shift, amp) = if curv < 0.0 {
            let s = 0.5 * (l - r) / curv;
            (s, c - 0.25 * (l - r) * s)
        } else {
            (0.0, c)
        };
        let mut x = grid.x(i) + shift * h;
        // keep positions inside the grid window
        if x < grid.origin() {
            x += grid.length();
        } else if x >= grid.origin() + grid.length() {
            x -= grid.length();
        }
        out.push(Peak { x, amplitude: amp });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackConfig {
    pub expected: usize,
    /// Only maxima of `|E|` above this count as pulses.
    pub min_height: f64,
    /// Snapshots with pulses closer than this are treated as colliding.
    pub min_gap: f64,
}

impl TrackConfig {
    /// Half the smallest amplitude and ten of the widest pulse widths.
    pub fn for_profiles(profiles: &[SechProfile]) -> Self {
        let min_amp = profiles.iter().map(|p| p.spec.e0).fold(f64::INFINITY, f64::min);
        let width = profiles.iter().map(|p| p.width()).fold(0.0, f64::max);
        TrackConfig {
            expected: profiles.len(),
            min_height: 0.5 * min_amp,
            min_gap: 10.0 * width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonTrack {
    /// Common slope of the pre- and post-collision world-lines.
    pub speed: f64,
    pub intercept_pre: f64,
    pub intercept_post: f64,
    /// `intercept_post - intercept_pre`.
    pub phase_shift: f64,
    pub amplitude_pre: f64,
    pub amplitude_post: f64,
    /// Root-mean-square misfit of the joint line fit.
    pub fit_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakRecord {
    pub t: f64,
    pub label: usize,
    /// Unwrapped position.
    pub x: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    /// Pulses in order of their initial position.
    pub solitons: Vec<SolitonTrack>,
    pub peaks: Vec<PeakRecord>,
    /// First and last snapshot times classed as interacting.
    pub collision_window: Option<(f64, f64)>,
}

fn min_pair_gap(peaks: &[Peak], length: f64) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..peaks.len() {
        for j in i + 1..peaks.len() {
            gap = gap.min(periodic_delta(peaks[i].x, peaks[j].x, length).abs());
        }
    }
    gap
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let v = sxy / sxx;
    (v, xm - v * tm)
}

/// Least squares for `x = v t + b_pre` (pre) and `x = v t + b_post` (post).
fn joint_fit(pre: &[(f64, f64)], post: &[(f64, f64)]) -> (f64, f64, f64, f64) {
    // Normal equations for unknowns (v, b_pre, b_post).
    let mean = |s: &[(f64, f64)]| {
        let n = s.len() as f64;
        (s.iter().map(|p| p.0).sum::<f64>() / n, s.iter().map(|p| p.1).sum::<f64>() / n)
    };
    let (tp, xp) = mean(pre);
    let (tq, xq) = mean(post);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for &(t, x) in pre {
        sxy += (t - tp) * (x - xp);
        sxx += (t - tp) * (t - tp);
    }
    for &(t, x) in post {
        sxy += (t - tq) * (x - xq);
        sxx += (t - tq) * (t - tq);
    }
    let v = sxy / sxx;
    let (b_pre, b_post) = (xp - v * tp, xq - v * tq);
    let mut ss = 0.0;
    for &(t, x) in pre {
        ss += (x - v * t - b_pre).powi(2);
    }
    for &(t, x) in post {
        ss += (x - v * t - b_post).powi(2);
    }
    let rms = (ss / (pre.len() + post.len()) as f64).sqrt();
    (v, b_pre, b_post, rms)
}

/// Tracks pulses through a trajectory and fits their world-lines.
///
/// Snapshots with fewer than `expected` pulses, or with two pulses closer than
/// `min_gap`, form the collision window; the fits use the snapshots before and
/// after it. Without a collision the run is split in half, so the phase shift
/// measures fit noise. Pulses are matched across the window by amplitude
/// order and positions are unwrapped across the periodic boundary.
pub fn track_and_phase_shift(traj: &Trajectory, cfg: &TrackConfig) -> Result<TrackReport> {
    if cfg.expected == 0 {
        return Err(invalid("expected", "need at least one pulse"));
    }
    let length = traj.grid.length();
    let found: Vec<Vec<Peak>> = traj
        .snapshots
        .iter()
        .map(|s| find_peaks(&s.e, &traj.grid, cfg.min_height))
        .collect();
    let interacting: Vec<bool> = found
        .iter()
        .map(|p| p.len() < cfg.expected || min_pair_gap(p, length) < cfg.min_gap)
        .collect();
    let first = interacting.iter().position(|&b| b);
    let last = interacting.iter().rposition(|&b| b);
    let ns = traj.snapshots.len();
    let (pre_range, post_range, window) = match (first, last) {
        (Some(f), Some(l)) => (0..f, l + 1..ns, Some((traj.snapshots[f].time, traj.snapshots[l].time))),
        _ => (0..ns / 2, ns / 2..ns, None),
    };
    for k in pre_range.clone().chain(post_range.clone()) {
        if found[k].len() > cfg.expected {
            return Err(RmbError::PeakAmbiguity {
                time: traj.snapshots[k].time,
                found: found[k].len(),
                expected: cfg.expected,
            });
        }
    }
    if pre_range.len() < 3 || post_range.len() < 3 {
        return Err(RmbError::Tracking(format!(
            "fit windows too short ({} and {} snapshots)",
            pre_range.len(),
            post_range.len()
        )));
    }

    // Label by initial position, then by amplitude rank.
    let mut initial = found[pre_range.start].clone();
    initial.sort_by(|a, b| a.x.total_cmp(&b.x));
    let rank_of = |peaks: &[Peak]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..peaks.len()).collect();
        idx.sort_by(|&i, &j| peaks[j].amplitude.total_cmp(&peaks[i].amplitude));
        idx
    };
    // label_by_rank[r] = label of the pulse with the r-th largest amplitude
    let label_by_rank = rank_of(&initial);

    let mut series: Vec<(Vec<(f64, f64)>, Vec<(f64, f64)>, Vec<f64>, Vec<f64>)> =
        vec![(Vec::new(), Vec::new(), Vec::new(), Vec::new()); cfg.expected];
    let mut last_x: Vec<Option<f64>> = vec![None; cfg.expected];
    let mut records = Vec::new();
    for (phase, range) in [(0usize, pre_range.clone()), (1, post_range.clone())] {
        if phase == 1 {
            // predict positions after the window from the pre-collision lines
            for (label, s) in series.iter().enumerate() {
                let (v, b) = line_fit(&s.0);
                last_x[label] = Some(v * traj.snapshots[range.start].time + b);
            }
        }
        for k in range {
            let t = traj.snapshots[k].time;
            let order = rank_of(&found[k]);
            for (rank, &pi) in order.iter().enumerate() {
                let label = label_by_rank[rank];
                let peak = found[k][pi];
                let x = match last_x[label] {
                    Some(prev) => prev + periodic_delta(prev, peak.x, length),
                    None => peak.x,
                };
                last_x[label] = Some(x);
                let s = &mut series[label];
                if phase == 0 {
                    s.0.push((t, x));
                    s.2.push(peak.amplitude);
                } else {
                    s.1.push((t, x));
                    s.3.push(peak.amplitude);
                }
                records.push(PeakRecord {
                    t,
                    label,
                    x,
                    amplitude: peak.amplitude,
                });
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let solitons = series
        .iter()
        .map(|(pre, post, apre, apost)| {
            let (v, b_pre, b_post, rms) = joint_fit(pre, post);
            SolitonTrack {
                speed: v,
                intercept_pre: b_pre,
                intercept_post: b_post,
                phase_shift: b_post - b_pre,
                amplitude_pre: mean(apre),
                amplitude_post: mean(apost),
                fit_rms: rms,
            }
        })
        .collect();
    records.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.label.cmp(&b.label)));
    Ok(TrackReport {
        solitons,
        peaks: records,
        collision_window: window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::DerivativeScheme;
    use crate::model::{make_params, Boundary};
    use crate::pde::rhs;

    fn params(s2: i64) -> ModelParams {
        make_params(1, s2, 0.6, 1.0, 1.0).unwrap()
    }

    #[test]
    fn peak_value_and_speeds() {
        let spec = SolitonSpec::new(1.0, 3.0, Sign::Plus).unwrap();
        let p = sech_profile(&spec, &params(1), -1.0).unwrap();
        assert_eq!(p.e(3.0, 0.0), 1.0);
        assert!((p.reference_speed - 0.61).abs() < 1e-15);
        assert!((p.speed - 2.44 / 6.44).abs() < 1e-15);
        // c = 0, alpha = 1 recovers D / 4
        let lax = params(1).with_c(0.0).unwrap();
        let q = sech_profile(&spec, &lax, -1.0).unwrap();
        assert!((q.speed - 0.61).abs() < 1e-15);
    }

    #[test]
    fn opposite_speeds_for_negative_sigma2() {
        let a = sech_profile(&SolitonSpec::new(1.0, 0.0, Sign::Plus).unwrap(), &params(-1), -1.0).unwrap();
        let b = sech_profile(&SolitonSpec::new(2.5, 0.0, Sign::Plus).unwrap(), &params(-1), -1.0).unwrap();
        assert!(a.speed < 0.0 && b.speed > 0.0);
        assert!(a.reference_speed < 0.0 && b.reference_speed > 0.0);
    }

    #[test]
    fn profile_errors() {
        let spec = SolitonSpec::new(1.0, 0.0, Sign::Plus).unwrap();
        let hyper = make_params(-1, 1, 0.6, 1.0, 1.0).unwrap();
        let err = sech_profile(&spec, &hyper, -1.0).unwrap_err();
        assert!(err.to_string().contains("use kink solver"));
        let p = make_params(1, -1, 0.5, 1.0, 1.0).unwrap();
        assert!(sech_profile(&spec, &p, -1.0).is_err());
        assert!(SolitonSpec::new(0.0, 0.0, Sign::Plus).is_err());
    }

    #[test]
    fn vacuum_completion() {
        let grid = Grid1D::new(10.0, 16, Boundary::Periodic).unwrap();
        let s = complete_fields(&Vacuum { speed: 0.5 }, &params(1), -0.7, &grid, 0.0).unwrap();
        assert!(s.e.iter().chain(&s.p).chain(&s.q).all(|&v| v == 0.0));
        assert!(s.n.iter().all(|&v| v == -0.7));
    }

    #[test]
    fn wrong_speed_is_rejected() {
        let spec = SolitonSpec::new(1.0, 0.0, Sign::Plus).unwrap();
        let mut p = sech_profile(&spec, &params(1), -1.0).unwrap();
        p.speed = p.reference_speed;
        let grid = Grid1D::new(40.0, 512, Boundary::Periodic).unwrap();
        assert!(matches!(
            complete_fields(&p, &params(1), -1.0, &grid, 0.0),
            Err(RmbError::InconsistentTravellingWave(_))
        ));
    }

    #[test]
    fn completed_state_solves_bloch_equations() {
        for s2 in [1, -1] {
            for pol in [Sign::Plus, Sign::Minus] {
                let par = params(s2);
                let spec = SolitonSpec::new(2.5, 1.0, pol).unwrap();
                let prof = sech_profile(&spec, &par, -1.0).unwrap();
                let grid = Grid1D::new(60.0, 4096, Boundary::Vanishing).unwrap();
                let s = complete_fields(&prof, &par, -1.0, &grid, 0.0).unwrap();
                let d = rhs(&s, &par, &grid, DerivativeScheme::Spectral).unwrap();
                // exact time derivative of the travelling wave
                let exact = complete_fields(&prof, &par, -1.0, &grid, 1e-4).unwrap();
                let back = complete_fields(&prof, &par, -1.0, &grid, -1e-4).unwrap();
                for f in 0..4 {
                    let (a, b, dd) = (exact.fields()[f], back.fields()[f], d.fields()[f]);
                    for i in 0..grid.n_points() {
                        let fd = (a[i] - b[i]) / 2e-4;
                        assert!((fd - dd[i]).abs() < 1e-6, "field {f} at {i}: {fd} vs {}", dd[i]);
                    }
                }
            }
        }
    }

    #[test]
    fn collision_overlap() {
        let grid = Grid1D::new(100.0, 2048, Boundary::Vanishing).unwrap();
        let a = SolitonSpec::new(1.0, 0.0, Sign::Plus).unwrap();
        assert!(matches!(
            build_collision(&a, &a, &params(1), &grid, -1.0),
            Err(RmbError::NotSeparated(_))
        ));
        let b = SolitonSpec::new(2.5, -24.0, Sign::Plus).unwrap();
        let s = build_collision(&a, &b, &params(1), &grid, -1.0).unwrap();
        let peaks = find_peaks(&s.e, &grid, 0.5);
        assert_eq!(peaks.len(), 2);
    }

    #[test]
    fn parabolic_peak_refinement() {
        let grid = Grid1D::new(20.0, 400, Boundary::Periodic).unwrap();
        let e: Vec<f64> = grid.points().iter().map(|x| (-(x - 0.123f64).powi(2)).exp()).collect();
        let p = find_peaks(&e, &grid, 0.5);
        assert_eq!(p.len(), 1);
        assert!((p[0].x - 0.123).abs() < 1e-4);
        assert!((p[0].amplitude - 1.0).abs() < 1e-4);
    }
}
