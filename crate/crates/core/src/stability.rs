//! Constant backgrounds, the dispersion cubic and modulational-instability
//! regimes.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{invalid, Result, RmbError};
use crate::model::{FieldState, Grid1D, ModelParams, Sign};
use crate::poly;

/// Gains at or below this are treated as zero.
pub const GAIN_ZERO: f64 = 1e-10;

/// Which version of a formula to use: as printed, or rederived from the
/// field equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Paper,
    Rederived,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Paper => "paper",
            Formulation::Rederived => "rederived",
        }
    }
}

/// A spatially constant solution `(E0, 0, N0, Q0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundState {
    pub q0: f64,
    pub n0: f64,
    pub e0: f64,
    pub p0: f64,
}

impl BackgroundState {
    /// The background as a constant field on `grid`.
    pub fn lift(&self, grid: &Grid1D) -> FieldState {
        FieldState::constant(grid.n_points(), self.e0, self.p0, self.n0, self.q0)
    }

    /// `S = (sigma2 N0^2 + sigma1 Q0^2) / N0^2`.
    pub fn s_factor(&self, params: &ModelParams) -> f64 {
        (params.s2() * self.n0 * self.n0 + params.s1() * self.q0 * self.q0) / (self.n0 * self.n0)
    }
}

/// Constant solution with `P0 = 0`.
///
/// `Rederived` uses `E0 = -sigma2 omega0 Q0 / N0`, the value that makes
/// `P_t = E N + sigma2 omega0 Q` vanish; `Paper` drops the `omega0`.
pub fn stationary_state(params: &ModelParams, q0: f64, n0: f64, mode: Formulation) -> Result<BackgroundState> {
    if n0 == 0.0 || !n0.is_finite() {
        return Err(invalid("N0", "background inversion must be finite and nonzero"));
    }
    if !q0.is_finite() {
        return Err(invalid("Q0", "must be finite"));
    }
    let e0 = match mode {
        Formulation::Paper => -params.s2() * q0 / n0,
        Formulation::Rederived => -params.s2() * params.omega0 * q0 / n0,
    };
    // avoid -0.0 in outputs
    let e0 = if e0 == 0.0 { 0.0 } else { e0 };
    Ok(BackgroundState { q0, n0, e0, p0: 0.0 })
}

/// Coefficients (leading first) of
/// `-c w^3 - kappa w^2 + (c K - alpha N0) w + kappa K`,
/// with `K = omega0^2 S` (`Rederived`) or `K = omega0 S` (`Paper`).
pub fn dispersion_coefficients(
    params: &ModelParams,
    bg: &BackgroundState,
    kappa: f64,
    mode: Formulation,
) -> Result<[f64; 4]> {
    if bg.n0 == 0.0 {
        return Err(invalid("N0", "background inversion must be nonzero"));
    }
    if params.c == 0.0 {
        return Err(RmbError::DegeneratePolynomial(
            "leading coefficient -c vanishes (c = 0)".into(),
        ));
    }
    let s = bg.s_factor(params);
    let k_coef = match mode {
        Formulation::Paper => params.omega0 * s,
        Formulation::Rederived => params.omega0 * params.omega0 * s,
    };
    Ok([
        -params.c,
        -kappa,
        params.c * k_coef - params.alpha * bg.n0,
        kappa * k_coef,
    ])
}

fn cubic_discriminant([a, b, c, d]: [f64; 4]) -> f64 {
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c - 4.0 * a * c.powi(3) - 27.0 * a * a * d * d
}

/// The three roots of the dispersion cubic in ascending (re, im) order.
///
/// When the discriminant is non-negative all three roots are real and any
/// imaginary round-off from the eigenvalue solver is discarded.
pub fn dispersion_roots(
    params: &ModelParams,
    bg: &BackgroundState,
    kappa: f64,
    mode: Formulation,
) -> Result<[Complex64; 3]> {
    if !kappa.is_finite() {
        return Err(invalid("kappa", "must be finite"));
    }
    let coeffs = dispersion_coefficients(params, bg, kappa, mode)?;
    let mut roots = poly::real_roots_of(&coeffs)?;
    if cubic_discriminant(coeffs) >= 0.0 {
        for z in roots.iter_mut() {
            z.im = 0.0;
        }
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
    }
    Ok([roots[0], roots[1], roots[2]])
}

fn gain_of(roots: &[Complex64]) -> (f64, Complex64) {
    roots
        .iter()
        .fold((0.0, roots[0]), |(g, m), z| if z.im.abs() > g { (z.im.abs(), *z) } else { (g, m) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub kappas: Vec<f64>,
    pub gains: Vec<f64>,
    pub roots: Vec<[Complex64; 3]>,
}

impl GainCurve {
    /// Largest gain and the wavenumber where it occurs.
    pub fn peak(&self) -> (f64, f64) {
        self.kappas
            .iter()
            .zip(&self.gains)
            .fold((f64::NAN, 0.0), |(k, g), (&kk, &gg)| if gg > g || k.is_nan() { (kk, gg) } else { (k, g) })
    }
}

pub fn gain_curve(
    params: &ModelParams,
    bg: &BackgroundState,
    kappa_grid: &[f64],
    mode: Formulation,
) -> Result<GainCurve> {
    if kappa_grid.iter().any(|k| !k.is_finite()) {
        return Err(invalid("kappa_grid", "entries must be finite"));
    }
    if kappa_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("kappa_grid", "must be sorted"));
    }
    let mut gains = Vec::with_capacity(kappa_grid.len());
    let mut roots = Vec::with_capacity(kappa_grid.len());
    for &k in kappa_grid {
        let r = dispersion_roots(params, bg, k, mode)?;
        gains.push(gain_of(&r).0);
        roots.push(r);
    }
    Ok(GainCurve {
        kappas: kappa_grid.to_vec(),
        gains,
        roots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    StableAllFrequencies,
    MiBand,
    MiPlusAllFreq,
    UnstableAllFreqWithLowBand,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::StableAllFrequencies => "stable_all_frequencies",
            Regime::MiBand => "mi_band",
            Regime::MiPlusAllFreq => "mi_plus_allfreq",
            Regime::UnstableAllFreqWithLowBand => "unstable_allfreq_with_low_band",
        }
    }

    /// The label the four-case enumeration assigns to a sign pair.
    pub fn expected(sigma1: Sign, sigma2: Sign, q0: f64, n0: f64) -> Regime {
        let beyond = q0 * q0 > n0 * n0;
        match (sigma1, sigma2) {
            (Sign::Plus, Sign::Plus) => Regime::MiBand,
            (Sign::Plus, Sign::Minus) if beyond => Regime::MiPlusAllFreq,
            (Sign::Plus, Sign::Minus) => Regime::MiBand,
            (Sign::Minus, Sign::Plus) if beyond => Regime::UnstableAllFreqWithLowBand,
            (Sign::Minus, Sign::Plus) => Regime::StableAllFrequencies,
            (Sign::Minus, Sign::Minus) => Regime::UnstableAllFreqWithLowBand,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    /// Label read off the computed gain curve.
    pub regime: Regime,
    /// Label of the four-case enumeration for the same signs and background.
    pub expected: Regime,
    /// `Q0^2 > N0^2`.
    pub transition_flag: bool,
    pub max_gain: f64,
    pub kappa_at_max: f64,
    /// Gain at the largest wavenumber of the grid.
    pub high_k_gain: f64,
}

impl RegimeReport {
    pub fn matches_expected(&self) -> bool {
        self.regime == self.expected
    }
}

/// Classifies the gain curve by its shape:
///
/// * no gain anywhere: `stable_all_frequencies`;
/// * gain vanishes at the top of the grid: `mi_band`;
/// * gain persists and the curve has a low-wavenumber maximum clearly above
///   its high-wavenumber level: `mi_plus_allfreq`;
/// * gain persists without such a maximum: `unstable_allfreq_with_low_band`.
pub fn classify_regime(
    params: &ModelParams,
    bg: &BackgroundState,
    kappa_grid: &[f64],
    mode: Formulation,
) -> Result<RegimeReport> {
    if kappa_grid.len() < 256 {
        return Err(invalid("kappa_grid", "need at least 256 points"));
    }
    let lo = kappa_grid[0];
    let hi = *kappa_grid.last().expect("nonempty");
    if lo > 0.0 || hi < 10.0 * params.omega0 {
        return Err(invalid("kappa_grid", "must span [0, 10 omega0]"));
    }
    let curve = gain_curve(params, bg, kappa_grid, mode)?;
    let (kappa_at_max, max_gain) = curve.peak();
    let high_k_gain = *curve.gains.last().expect("nonempty");
    let regime = if max_gain <= GAIN_ZERO {
        Regime::StableAllFrequencies
    } else if high_k_gain <= GAIN_ZERO {
        Regime::MiBand
    } else if max_gain > 1.05 * high_k_gain + GAIN_ZERO {
        Regime::MiPlusAllFreq
    } else {
        Regime::UnstableAllFreqWithLowBand
    };
    Ok(RegimeReport {
        regime,
        expected: Regime::expected(params.sigma1, params.sigma2, bg.q0, bg.n0),
        transition_flag: bg.q0 * bg.q0 > bg.n0 * bg.n0,
        max_gain,
        kappa_at_max,
        high_k_gain,
    })
}

/// Frequencies `omega` of the linearized system about `bg` for perturbations
/// `exp(i kappa x + mu t)`, `omega = -i mu`, from the eigenvalues of the
/// 4x4 symbol matrix. One of them is always zero.
pub fn jacobian_oracle(params: &ModelParams, bg: &BackgroundState, kappa: f64) -> Result<[Complex64; 4]> {
    if params.c == 0.0 {
        return Err(RmbError::NoTimeEvolution);
    }
    let z = Complex64::new(0.0, 0.0);
    let r = |v: f64| Complex64::new(v, 0.0);
    let (c, a, w) = (params.c, params.alpha, params.omega0);
    let (s1, s2) = (params.s1(), params.s2());
    #[rustfmt::skip]
    let m = Matrix4::new(
        Complex64::new(0.0, -kappa / c), r(a / c),            z,             z,
        r(bg.n0),                        z,                   r(bg.e0),      r(s2 * w),
        z,                               r(-s1 * bg.e0),      z,             z,
        z,                               r(-w),               z,             z,
    );
    let eig = m
        .try_schur(1e-15, 10_000)
        .ok_or(RmbError::EigenNoConvergence(10_000))?
        .eigenvalues()
        .ok_or(RmbError::EigenNoConvergence(10_000))?;
    let minus_i = Complex64::new(0.0, -1.0);
    Ok([eig[0] * minus_i, eig[1] * minus_i, eig[2] * minus_i, eig[3] * minus_i])
}

/// Drops the oracle value closest to zero and returns the largest distance
/// between the remaining three and `roots` under the best pairing.
pub fn oracle_mismatch(oracle: &[Complex64; 4], roots: &[Complex64; 3]) -> f64 {
    let drop = (0..4)
        .min_by(|&i, &j| oracle[i].norm().total_cmp(&oracle[j].norm()))
        .expect("four values");
    let rest: Vec<Complex64> = (0..4).filter(|&i| i != drop).map(|i| oracle[i]).collect();
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    PERMS
        .iter()
        .map(|p| (0..3).map(|i| (rest[p[i]] - roots[i]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// `n` evenly spaced wavenumbers on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derivative::DerivativeScheme;
    use crate::model::{make_params, Boundary};
    use crate::pde::rhs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stationary_modes() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let paper = stationary_state(&params, 1.0, 2.0, Formulation::Paper).unwrap();
        assert_eq!(paper.e0, -0.5);
        let re = stationary_state(&params, 1.0, 2.0, Formulation::Rederived).unwrap();
        assert_eq!(re.e0, -0.25);
        assert!(stationary_state(&params, 1.0, 0.0, Formulation::Rederived).is_err());

        let grid = Grid1D::new(10.0, 32, Boundary::Periodic).unwrap();
        let d = rhs(&re.lift(&grid), &params, &grid, DerivativeScheme::Spectral).unwrap();
        let worst = d.fields().iter().flat_map(|f| f.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-14);
        // the printed E0 is not a fixed point unless omega0 = 1
        let d = rhs(&paper.lift(&grid), &params, &grid, DerivativeScheme::Spectral).unwrap();
        assert!(d.p[0].abs() > 0.1);

        let zero = stationary_state(&params, 0.0, -3.0, Formulation::Paper).unwrap();
        assert_eq!(zero.e0, 0.0);
        assert!(zero.e0.is_sign_positive());
    }

    #[test]
    fn triple_zero_at_kappa_zero() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let bg = stationary_state(&params, 1.0, 1.0, Formulation::Paper).unwrap();
        let r = dispersion_roots(&params, &bg, 0.0, Formulation::Paper).unwrap();
        assert!(r.iter().all(|z| z.norm() < 1e-12), "{r:?}");
    }

    #[test]
    fn conjugate_pair_case() {
        // With c = 1 this background is linearly stable at kappa = 0.1; the
        // complex pair appears once the sign of c is flipped.
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let bg = stationary_state(&params, 0.5, -1.0, Formulation::Paper).unwrap();
        let r = dispersion_roots(&params, &bg, 0.1, Formulation::Paper).unwrap();
        assert!(r.iter().all(|z| z.im == 0.0), "{r:?}");

        let flipped = params.with_c(-1.0).unwrap();
        let r = dispersion_roots(&flipped, &bg, 0.1, Formulation::Paper).unwrap();
        let real: Vec<_> = r.iter().filter(|z| z.im == 0.0).collect();
        let complex: Vec<_> = r.iter().filter(|z| z.im != 0.0).collect();
        assert_eq!(real.len(), 1, "{r:?}");
        assert_eq!(complex.len(), 2);
        assert!((complex[0] - complex[1].conj()).norm() < 1e-12);
        assert!((complex[0].im.abs() - 0.630_269_39).abs() < 1e-7);
    }

    #[test]
    fn degenerate_when_c_is_zero() {
        let params = make_params(1, 1, 0.5, 1.0, 0.0).unwrap();
        let bg = stationary_state(&params, 0.5, -1.0, Formulation::Paper).unwrap();
        assert!(matches!(
            dispersion_roots(&params, &bg, 0.1, Formulation::Paper),
            Err(RmbError::DegeneratePolynomial(_))
        ));
    }

    #[test]
    fn gains_are_even_in_kappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (s1, s2) in Sign::pairs() {
            let params = ModelParams::new(s1, s2, 0.5, 1.0, 1.0).unwrap();
            let bg = stationary_state(&params, rng.random_range(0.0..2.0), -s1.value(), Formulation::Rederived)
                .unwrap();
            let ks = linspace(0.0, 5.0, 41);
            let neg: Vec<f64> = ks.iter().rev().map(|k| -k).collect();
            let a = gain_curve(&params, &bg, &ks, Formulation::Rederived).unwrap();
            let b = gain_curve(&params, &bg, &neg, Formulation::Rederived).unwrap();
            for (g, h) in a.gains.iter().zip(b.gains.iter().rev()) {
                assert!((g - h).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hyperbolic_sub_transition_is_stable() {
        let params = make_params(-1, 1, 0.5, 1.0, -1.0).unwrap();
        let bg = stationary_state(&params, 0.5, 1.0, Formulation::Rederived).unwrap();
        let ks = linspace(0.0, 5.0, 512);
        let rep = classify_regime(&params, &bg, &ks, Formulation::Rederived).unwrap();
        assert_eq!(rep.regime, Regime::StableAllFrequencies);
        assert!(rep.matches_expected());
        assert!(!rep.transition_flag);
    }

    #[test]
    fn classify_rejects_short_grids() {
        let params = make_params(1, 1, 0.5, 1.0, 1.0).unwrap();
        let bg = stationary_state(&params, 0.5, -1.0, Formulation::Rederived).unwrap();
        assert!(classify_regime(&params, &bg, &linspace(0.0, 5.0, 100), Formulation::Paper).is_err());
        assert!(classify_regime(&params, &bg, &linspace(0.0, 2.0, 300), Formulation::Paper).is_err());
    }

    #[test]
    fn oracle_agrees_with_cubic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let (s1, s2) = Sign::pairs()[rng.random_range(0..4)];
            let params = ModelParams::new(
                s1,
                s2,
                rng.random_range(0.1..2.0),
                rng.random_range(0.5..2.0),
                rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            )
            .unwrap();
            let n0 = rng.random_range(0.3..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let bg = stationary_state(&params, rng.random_range(-2.0..2.0), n0, Formulation::Rederived).unwrap();
            let kappa = rng.random_range(-4.0..4.0);
            let oracle = jacobian_oracle(&params, &bg, kappa).unwrap();
            let roots = dispersion_roots(&params, &bg, kappa, Formulation::Rederived).unwrap();
            let mismatch = oracle_mismatch(&oracle, &roots);
            assert!(mismatch < 1e-8, "{params:?} {bg:?} {kappa}: {mismatch}");
        }
    }

    #[test]
    fn modes_coincide_at_unit_omega() {
        let params = make_params(1, -1, 1.0, 1.0, 1.0).unwrap();
        let bg = stationary_state(&params, 0.7, -1.0, Formulation::Rederived).unwrap();
        for k in linspace(0.0, 10.0, 21) {
            let a = dispersion_roots(&params, &bg, k, Formulation::Paper).unwrap();
            let b = dispersion_roots(&params, &bg, k, Formulation::Rederived).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).norm() <= 1e-10);
            }
        }
    }
}
