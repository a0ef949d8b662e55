//! Parameters, grids and field snapshots shared by every solver, plus the
//! pointwise Bloch invariant and the integral energy functional.

use std::fmt;

use crate::error::{invalid, Result, RmbError};

/// A sign selector, `+1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_int(value: i64) -> Result<Sign> {
        match value {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(RmbError::SignOutOfRange(other)),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    /// All four `(sigma1, sigma2)` combinations in panel order.
    pub fn pairs() -> [(Sign, Sign); 4] {
        [
            (Sign::Plus, Sign::Plus),
            (Sign::Plus, Sign::Minus),
            (Sign::Minus, Sign::Plus),
            (Sign::Minus, Sign::Minus),
        ]
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_int())
    }
}

/// Selects one of the four equations and carries the physical constants of
///
/// ```text
/// c E_t + E_x = alpha P
///         P_t = E N + sigma2 omega0 Q
///         N_t = -sigma1 E P
///         Q_t = -omega0 P
/// ```
///
/// `sigma1 = +1` gives the RMB pair, `sigma1 = -1` the hyperbolic (HRMB) pair.
/// `c = 0` is only meaningful for the zero-curvature checks, which use the
/// swapped `x <-> t` orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub sigma1: Sign,
    pub sigma2: Sign,
    pub omega0: f64,
    pub alpha: f64,
    pub c: f64,
}

impl ModelParams {
    pub fn new(sigma1: Sign, sigma2: Sign, omega0: f64, alpha: f64, c: f64) -> Result<Self> {
        if !omega0.is_finite() || omega0 < 0.0 {
            return Err(invalid("omega0", format!("must be finite and >= 0, got {omega0}")));
        }
        if !alpha.is_finite() || alpha == 0.0 {
            return Err(invalid("alpha", format!("must be finite and nonzero, got {alpha}")));
        }
        if !c.is_finite() {
            return Err(invalid("c", format!("must be finite, got {c}")));
        }
        Ok(ModelParams {
            sigma1,
            sigma2,
            omega0,
            alpha,
            c,
        })
    }

    pub fn s1(&self) -> f64 {
        self.sigma1.value()
    }

    pub fn s2(&self) -> f64 {
        self.sigma2.value()
    }

    /// Same parameters with another `c`.
    pub fn with_c(self, c: f64) -> Result<Self> {
        ModelParams::new(self.sigma1, self.sigma2, self.omega0, self.alpha, c)
    }
}

/// Validating constructor taking integer signs.
pub fn make_params(sigma1: i64, sigma2: i64, omega0: f64, alpha: f64, c: f64) -> Result<ModelParams> {
    ModelParams::new(Sign::from_int(sigma1)?, Sign::from_int(sigma2)?, omega0, alpha, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    /// Decaying fields on a periodic domain wide enough that the edges sit in
    /// the tails.
    Vanishing,
}

/// Uniform 1-D grid `x_i = origin + i * spacing`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    length: f64,
    n_points: usize,
    origin: f64,
    boundary: Boundary,
}

impl Grid1D {
    /// A grid centred on the origin, `[-length/2, length/2)`.
    pub fn new(length: f64, n_points: usize, boundary: Boundary) -> Result<Self> {
        Grid1D::with_origin(length, n_points, -0.5 * length, boundary)
    }

    pub fn with_origin(length: f64, n_points: usize, origin: f64, boundary: Boundary) -> Result<Self> {
        if !length.is_finite() || length <= 0.0 {
            return Err(invalid("length", format!("must be > 0, got {length}")));
        }
        if n_points < 8 {
            return Err(invalid("n_points", format!("must be >= 8, got {n_points}")));
        }
        if !origin.is_finite() {
            return Err(invalid("origin", "must be finite"));
        }
        Ok(Grid1D {
            length,
            n_points,
            origin,
            boundary,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }
}

/// The four fields sampled on a grid at one instant.
///
/// `n` is the population inversion field (`N` in the equations).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub time: f64,
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<f64>,
    pub q: Vec<f64>,
}

impl FieldState {
    pub fn zeros(len: usize, time: f64) -> Self {
        FieldState {
            time,
            e: vec![0.0; len],
            p: vec![0.0; len],
            n: vec![0.0; len],
            q: vec![0.0; len],
        }
    }

    pub fn constant(len: usize, e: f64, p: f64, n: f64, q: f64) -> Self {
        FieldState {
            time: 0.0,
            e: vec![e; len],
            p: vec![p; len],
            n: vec![n; len],
            q: vec![q; len],
        }
    }

    /// Samples `f(x) -> (E, P, N, Q)` on the grid.
    pub fn from_fn(grid: &Grid1D, time: f64, mut f: impl FnMut(f64) -> [f64; 4]) -> Self {
        let mut state = FieldState::zeros(grid.n_points(), time);
        for i in 0..grid.n_points() {
            let [e, p, n, q] = f(grid.x(i));
            state.e[i] = e;
            state.p[i] = p;
            state.n[i] = n;
            state.q[i] = q;
        }
        state
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    pub fn fields(&self) -> [&[f64]; 4] {
        [&self.e, &self.p, &self.n, &self.q]
    }

    pub fn fields_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.e, &mut self.p, &mut self.n, &mut self.q]
    }

    pub fn is_finite(&self) -> bool {
        self.fields().iter().all(|f| f.iter().all(|v| v.is_finite()))
    }

    /// Checks the array lengths against `n_points` and that every entry is finite.
    pub fn validate(&self, grid: &Grid1D) -> Result<()> {
        self.check_len(grid.n_points())?;
        if !self.is_finite() {
            return Err(RmbError::NonFinite {
                time: self.time,
                what: "field state".into(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, expected: usize) -> Result<()> {
        let lens = [self.e.len(), self.p.len(), self.n.len(), self.q.len()];
        if lens.iter().any(|&l| l != expected) {
            return Err(RmbError::ShapeMismatch(format!(
                "field lengths {lens:?}, grid has {expected} points"
            )));
        }
        Ok(())
    }
}

/// Pointwise `eta = P^2 + sigma2 Q^2 + sigma1 N^2`.
pub fn bloch_quantity(state: &FieldState, params: &ModelParams) -> Result<Vec<f64>> {
    state.check_len(state.e.len())?;
    let (s1, s2) = (params.s1(), params.s2());
    Ok(state
        .p
        .iter()
        .zip(&state.n)
        .zip(&state.q)
        .map(|((&p, &n), &q)| p * p + s2 * q * q + s1 * n * n)
        .collect())
}

/// `H_gen = sum_i dx [c E^2 / (2 alpha) + sigma1 N]`, the functional the
/// dynamics conserves on periodic or decaying data.
pub fn hamiltonian(state: &FieldState, params: &ModelParams, grid: &Grid1D) -> Result<f64> {
    state.check_len(grid.n_points())?;
    let weight = params.c / (2.0 * params.alpha);
    Ok(riemann_sum(state, grid, weight, params.s1()))
}

/// The density `E^2/(2c) + sigma1 N` written with a `1/(2c)` prefactor. It
/// agrees with [`hamiltonian`] only when `c = alpha = 1`.
pub fn hamiltonian_paper_compat(state: &FieldState, params: &ModelParams, grid: &Grid1D) -> Result<f64> {
    state.check_len(grid.n_points())?;
    if params.c == 0.0 {
        return Err(invalid("c", "the 1/(2c) density is undefined at c = 0"));
    }
    Ok(riemann_sum(state, grid, 0.5 / params.c, params.s1()))
}

fn riemann_sum(state: &FieldState, grid: &Grid1D, e_weight: f64, n_weight: f64) -> f64 {
    let sum: f64 = state
        .e
        .iter()
        .zip(&state.n)
        .map(|(&e, &n)| e_weight * e * e + n_weight * n)
        .sum();
    sum * grid.spacing()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn make_params_accepts_figure_values() {
        let rmb = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(rmb.sigma1, Sign::Plus);
        let hrmb = make_params(-1, 1, 0.6, 1.0, 1.0).unwrap();
        assert_eq!(hrmb.sigma1, Sign::Minus);
        assert_eq!(hrmb.omega0, 0.6);
    }

    #[test]
    fn make_params_rejects_bad_values() {
        let err = make_params(1, 0, 0.5, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("sign out of range"));
        assert!(make_params(2, 1, 0.5, 1.0, 1.0).is_err());
        assert!(make_params(1, 1, -0.1, 1.0, 1.0).is_err());
        assert!(make_params(1, 1, 0.5, 0.0, 1.0).is_err());
        // c = 0 is the Lax convention and is allowed here.
        assert!(make_params(1, 1, 0.5, 1.0, 0.0).is_ok());
    }

    #[test]
    fn grid_spacing_times_points_is_length() {
        let grid = Grid1D::new(37.3, 1000, Boundary::Periodic).unwrap();
        assert!((grid.spacing() * grid.n_points() as f64 - grid.length()).abs() < 1e-12);
        assert_eq!(grid.x(0), -18.65);
        assert!(Grid1D::new(1.0, 4, Boundary::Periodic).is_err());
        assert!(Grid1D::new(0.0, 16, Boundary::Periodic).is_err());
    }

    #[test]
    fn bloch_quantity_single_term() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let state = FieldState::constant(16, 0.0, 0.0, 1.0, 0.0);
        assert!(bloch_quantity(&state, &params).unwrap().iter().all(|&v| v == 1.0));

        let hyper = make_params(-1, 1, 0.5, 1.0, 1.0).unwrap();
        assert!(bloch_quantity(&state, &hyper).unwrap().iter().all(|&v| v == -1.0));
    }

    #[test]
    fn hamiltonian_constant_fields() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let grid = Grid1D::new(10.0, 64, Boundary::Periodic).unwrap();
        let zero = FieldState::zeros(64, 0.0);
        assert_eq!(hamiltonian(&zero, &params, &grid).unwrap(), 0.0);

        let (e0, n0) = (0.7, -0.3);
        let state = FieldState::constant(64, e0, 0.0, n0, 0.0);
        let h = hamiltonian(&state, &params, &grid).unwrap();
        assert!((h - 10.0 * (e0 * e0 / 2.0 + n0)).abs() < 1e-12);
        let compat = hamiltonian_paper_compat(&state, &params, &grid).unwrap();
        assert!((h - compat).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_forms_differ_away_from_unit_constants() {
        let params = make_params(1, 1, 0.5, 2.0, 0.5).unwrap();
        let grid = Grid1D::new(10.0, 64, Boundary::Periodic).unwrap();
        let state = FieldState::constant(64, 1.0, 0.0, 0.0, 0.0);
        let h = hamiltonian(&state, &params, &grid).unwrap();
        let compat = hamiltonian_paper_compat(&state, &params, &grid).unwrap();
        assert!((h - 10.0 * 0.5 / 4.0).abs() < 1e-12);
        assert!((compat - 10.0).abs() < 1e-12);
        let lax = params.with_c(0.0).unwrap();
        assert!(hamiltonian_paper_compat(&state, &lax, &grid).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let grid = Grid1D::new(10.0, 64, Boundary::Periodic).unwrap();
        let mut state = FieldState::zeros(64, 0.0);
        state.q.pop();
        assert!(matches!(
            hamiltonian(&state, &params, &grid),
            Err(RmbError::ShapeMismatch(_))
        ));
        assert!(bloch_quantity(&state, &params).is_err());
    }

    proptest! {
        // d/dt of eta along the Bloch part of the flow vanishes identically.
        #[test]
        fn bloch_rate_cancels(
            e in -5.0..5.0f64, p in -5.0..5.0f64, n in -5.0..5.0f64, q in -5.0..5.0f64,
            w in 0.0..3.0f64, s1 in prop::bool::ANY, s2 in prop::bool::ANY,
        ) {
            let s1 = if s1 { 1.0 } else { -1.0 };
            let s2 = if s2 { 1.0 } else { -1.0 };
            let rate = p * (e * n + s2 * w * q) + s2 * q * (-w * p) + s1 * n * (-s1 * e * p);
            let scale = 1.0 + (p * e * n).abs() + (w * p * q).abs();
            prop_assert!(rate.abs() <= 1e-14 * scale);
        }

        #[test]
        fn invariants_are_pure(vals in prop::collection::vec(-3.0..3.0f64, 32)) {
            let params = make_params(-1, 1, 0.4, 1.0, 1.0).unwrap();
            let grid = Grid1D::new(4.0, 8, Boundary::Periodic).unwrap();
            let state = FieldState {
                time: 0.0,
                e: vals[0..8].to_vec(),
                p: vals[8..16].to_vec(),
                n: vals[16..24].to_vec(),
                q: vals[24..32].to_vec(),
            };
            let a = bloch_quantity(&state, &params).unwrap();
            let b = bloch_quantity(&state, &params).unwrap();
            prop_assert_eq!(a, b);
            let h1 = hamiltonian(&state, &params, &grid).unwrap();
            let h2 = hamiltonian(&state, &params, &grid).unwrap();
            prop_assert_eq!(h1.to_bits(), h2.to_bits());
        }
    }
}
