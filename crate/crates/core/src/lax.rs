//! Zero-curvature checks for the Lax pair of the four-field family.
//!
//! Everything here works in the swapped orientation with `c = 0`,
//! `alpha = 1`, where the field equations read
//!
//! ```text
//! E_t = P,  P_x = E N + sigma2 omega0 Q,  N_x = -sigma1 E P,  Q_x = -omega0 P
//! ```
//!
//! and the compatibility condition is `L_t - M_x + [L, M] = 0`.
//!
//! Two pairs are available. [`LaxForm::Printed`] is the pair with
//! `L = lambda diag(i, -i) + offdiag(E, -sigma1 E)` and the rational `M` whose
//! poles sit at `+-omega0` (simple) or at `omega0` (double) and `-omega0`.
//! Its zero-curvature condition does not reproduce the field equations.
//! [`LaxForm::Consistent`] halves `L` and uses
//!
//! ```text
//! M = [[-i N l, i P l + sigma2 omega0 Q], [sigma1 (i P l - sigma2 omega0 Q), i N l]]
//!     / (2 (l^2 - sigma2 omega0^2))
//! ```
//!
//! which satisfies the condition identically on solutions.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{invalid, Result, RmbError};
use crate::model::{ModelParams, Sign};
use crate::soliton::{sech_profile, travelling_fields, SolitonSpec};

pub type Mat2 = Matrix2<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LaxForm {
    Printed,
    Consistent,
}

impl LaxForm {
    pub fn as_str(self) -> &'static str {
        match self {
            LaxForm::Printed => "printed",
            LaxForm::Consistent => "consistent",
        }
    }
}

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn mat(a: Complex64, b: Complex64, cc: Complex64, d: Complex64) -> Mat2 {
    Mat2::new(a, b, cc, d)
}

/// The printed `L = lambda diag(i, -i) + [[0, E], [-sigma1 E, 0]]`.
pub fn lax_l(e: f64, lambda: Complex64, sigma1: Sign) -> Mat2 {
    mat(I * lambda, c(e), c(-sigma1.value() * e), -I * lambda)
}

fn l_scale(form: LaxForm) -> f64 {
    match form {
        LaxForm::Printed => 1.0,
        LaxForm::Consistent => 0.5,
    }
}

pub fn lax_l_form(form: LaxForm, e: f64, lambda: Complex64, sigma1: Sign) -> Mat2 {
    lax_l(e, lambda, sigma1) * c(l_scale(form))
}

/// `dL/dE` for the chosen form.
fn dl_de(form: LaxForm, sigma1: Sign) -> Mat2 {
    mat(c(0.0), c(1.0), c(-sigma1.value()), c(0.0)) * c(l_scale(form))
}

/// Declared poles of `M` as (location, order).
pub fn poles(form: LaxForm, params: &ModelParams) -> Vec<(Complex64, u32)> {
    let w = params.omega0;
    match (form, params.sigma2) {
        (_, Sign::Plus) => vec![(c(w), 1), (c(-w), 1)],
        (LaxForm::Printed, Sign::Minus) => vec![(c(w), 2), (c(-w), 1)],
        (LaxForm::Consistent, Sign::Minus) => vec![(I * w, 1), (-I * w, 1)],
    }
}

/// Coefficient matrices `(M_P, M_N, M_Q)` with `M = P M_P + N M_N + Q M_Q`.
fn m_coefficients(form: LaxForm, lambda: Complex64, params: &ModelParams) -> [Mat2; 3] {
    let w = params.omega0;
    let s1 = params.s1();
    let l = lambda;
    let z = c(0.0);
    match (form, params.sigma2) {
        (LaxForm::Printed, Sign::Plus) => {
            let den = (l * l - w * w) * 2.0;
            [
                mat(z, l, l * s1, z) / den,
                mat(-I * l, z, z, I * l) / den,
                mat(z, c(-w), c(s1 * w), z) / den,
            ]
        }
        (LaxForm::Printed, Sign::Minus) => {
            let den = (l * l - w * w) * (l - w) * 2.0;
            [
                mat(z, I * l * l, -I * l * l * s1, z) / den,
                mat(I * w * w, z, z, -I * w * w) / den,
                mat(z, -l * w, -l * w * s1, z) / den,
            ]
        }
        (LaxForm::Consistent, s2) => {
            let s2 = s2.value();
            let den = (l * l - s2 * w * w) * 2.0;
            [
                mat(z, I * l, I * l * s1, z) / den,
                mat(-I * l, z, z, I * l) / den,
                mat(z, c(s2 * w), c(-s1 * s2 * w), z) / den,
            ]
        }
    }
}

fn check_pole(form: LaxForm, lambda: Complex64, params: &ModelParams) -> Result<()> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(invalid("lambda", "must be finite"));
    }
    for (p, _) in poles(form, params) {
        let d = (lambda - p).norm();
        if d == 0.0 || d < 1e-3 * params.omega0 {
            return Err(RmbError::SpectralPole {
                re: lambda.re,
                im: lambda.im,
                distance: d,
            });
        }
    }
    Ok(())
}

fn m_unchecked(form: LaxForm, p: f64, n: f64, q: f64, lambda: Complex64, params: &ModelParams) -> Mat2 {
    let [mp, mn, mq] = m_coefficients(form, lambda, params);
    mp * c(p) + mn * c(n) + mq * c(q)
}

/// The printed `M` operator.
pub fn lax_m(p: f64, n: f64, q: f64, lambda: Complex64, params: &ModelParams) -> Result<Mat2> {
    lax_m_form(LaxForm::Printed, p, n, q, lambda, params)
}

pub fn lax_m_form(form: LaxForm, p: f64, n: f64, q: f64, lambda: Complex64, params: &ModelParams) -> Result<Mat2> {
    check_pole(form, lambda, params)?;
    Ok(m_unchecked(form, p, n, q, lambda, params))
}

/// Fitted order of the pole at `pole`: minus the least-squares slope of
/// `log |M|` against `log eps` for `lambda = pole + eps e^{i theta}`,
/// `eps = omega0 * 0.02 / 2^k`, `k = 0..5`. Every sample stays outside the
/// evaluation guard of [`lax_m_form`].
pub fn fit_pole_order(form: LaxForm, params: &ModelParams, pole: Complex64, fields: [f64; 3]) -> Result<f64> {
    if params.omega0 <= 0.0 {
        return Err(invalid("omega0", "pole fits need omega0 > 0"));
    }
    let dir = Complex64::from_polar(1.0, 0.3);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..5 {
        let eps = params.omega0 * 0.02 / f64::powi(2.0, k);
        let m = lax_m_form(form, fields[0], fields[1], fields[2], pole + dir * eps, params)?;
        xs.push(eps.ln());
        ys.push(m.norm().ln());
    }
    let n = xs.len() as f64;
    let (xm, ym) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    Ok(-sxy / sxx)
}

/// Field samples on a rectangle `x = x0 + i hx`, `t = t0 + j ht`, row-major in
/// `t` (index `j * nx + i`), in the swapped orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub nx: usize,
    pub nt: usize,
    pub hx: f64,
    pub ht: f64,
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub n: Vec<f64>,
    pub q: Vec<f64>,
}

impl Patch {
    #[allow(clippy::too_many_arguments)]
    pub fn from_fn(
        x0: f64,
        t0: f64,
        hx: f64,
        ht: f64,
        nx: usize,
        nt: usize,
        mut f: impl FnMut(f64, f64) -> [f64; 4],
    ) -> Result<Patch> {
        if nx < 3 || nt < 3 {
            return Err(RmbError::PatchTooSmall(format!(
                "{nx} x {nt} points; the three-point stencil needs at least 3 x 3"
            )));
        }
        if !(hx > 0.0 && ht > 0.0) {
            return Err(invalid("patch", "steps must be positive"));
        }
        let len = nx * nt;
        let mut patch = Patch {
            nx,
            nt,
            hx,
            ht,
            e: Vec::with_capacity(len),
            p: Vec::with_capacity(len),
            n: Vec::with_capacity(len),
            q: Vec::with_capacity(len),
        };
        for j in 0..nt {
            for i in 0..nx {
                let [e, p, n, q] = f(x0 + i as f64 * hx, t0 + j as f64 * ht);
                patch.e.push(e);
                patch.p.push(p);
                patch.n.push(n);
                patch.q.push(q);
            }
        }
        Ok(patch)
    }

    /// A sech pulse of the `c = 0`, `alpha = 1` system, sampled with the
    /// roles of `x` and `t` exchanged.
    #[allow(clippy::too_many_arguments)]
    pub fn sech_soliton(
        spec: &SolitonSpec,
        params: &ModelParams,
        n_inf: f64,
        centre: (f64, f64),
        hx: f64,
        ht: f64,
        nx: usize,
        nt: usize,
    ) -> Result<Patch> {
        check_convention(params)?;
        let prof = sech_profile(spec, params, n_inf)?;
        let x0 = centre.0 - 0.5 * (nx - 1) as f64 * hx;
        let t0 = centre.1 - 0.5 * (nt - 1) as f64 * ht;
        Patch::from_fn(x0, t0, hx, ht, nx, nt, |x, t| travelling_fields(&prof, params, n_inf, t, x).0)
    }

    fn interior(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.nt - 1).flat_map(move |j| (1..self.nx - 1).map(move |i| (i, j)))
    }
}

fn check_convention(params: &ModelParams) -> Result<()> {
    if params.c != 0.0 || params.alpha != 1.0 {
        return Err(invalid(
            "params",
            "zero-curvature checks use the c = 0, alpha = 1 convention",
        ));
    }
    Ok(())
}

/// Central differences and pointwise values at an interior node.
struct Local {
    e: f64,
    p: f64,
    n: f64,
    q: f64,
    e_t: f64,
    p_x: f64,
    n_x: f64,
    q_x: f64,
}

fn local(patch: &Patch, i: usize, j: usize) -> Local {
    let k = j * patch.nx + i;
    let dx = |f: &[f64]| (f[k + 1] - f[k - 1]) / (2.0 * patch.hx);
    let dt = |f: &[f64]| (f[k + patch.nx] - f[k - patch.nx]) / (2.0 * patch.ht);
    Local {
        e: patch.e[k],
        p: patch.p[k],
        n: patch.n[k],
        q: patch.q[k],
        e_t: dt(&patch.e),
        p_x: dx(&patch.p),
        n_x: dx(&patch.n),
        q_x: dx(&patch.q),
    }
}

fn zcr_at(form: LaxForm, lambda: Complex64, params: &ModelParams, coeffs: &[Mat2; 3], s: &Local) -> Mat2 {
    let l = lax_l_form(form, s.e, lambda, params.sigma1);
    let m = coeffs[0] * c(s.p) + coeffs[1] * c(s.n) + coeffs[2] * c(s.q);
    let mx = coeffs[0] * c(s.p_x) + coeffs[1] * c(s.n_x) + coeffs[2] * c(s.q_x);
    dl_de(form, params.sigma1) * c(s.e_t) - mx + (l * m - m * l)
}

/// `(E_t - P, P_x - E N - sigma2 omega0 Q, N_x + sigma1 E P, Q_x + omega0 P)`.
fn pde_residual_at(params: &ModelParams, s: &Local) -> [f64; 4] {
    let (s1, s2, w) = (params.s1(), params.s2(), params.omega0);
    [
        s.e_t - s.p,
        s.p_x - s.e * s.n - s2 * w * s.q,
        s.n_x + s1 * s.e * s.p,
        s.q_x + w * s.p,
    ]
}

/// `L_t - M_x + [L, M]` at every interior node, in [`Patch`] index order.
pub fn zcr_residual(patch: &Patch, lambda: Complex64, params: &ModelParams, form: LaxForm) -> Result<Vec<Mat2>> {
    check_convention(params)?;
    check_pole(form, lambda, params)?;
    let coeffs = m_coefficients(form, lambda, params);
    Ok(patch
        .interior()
        .map(|(i, j)| zcr_at(form, lambda, params, &coeffs, &local(patch, i, j)))
        .collect())
}

/// Largest entry modulus of the zero-curvature residual over the patch.
pub fn zcr_norm(patch: &Patch, lambda: Complex64, params: &ModelParams, form: LaxForm) -> Result<f64> {
    Ok(zcr_residual(patch, lambda, params, form)?
        .iter()
        .flat_map(|m| m.iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0, f64::max))
}

/// The four discrete field-equation residuals at every interior node.
pub fn pde_residuals(patch: &Patch, params: &ModelParams) -> Result<Vec<[f64; 4]>> {
    check_convention(params)?;
    Ok(patch
        .interior()
        .map(|(i, j)| pde_residual_at(params, &local(patch, i, j)))
        .collect())
}

/// `{2 w, 3 w, i w, 1 + i}` times `max(1, w)`; a sample landing on a pole of
/// the chosen form is moved to twice its distance from the origin.
pub fn default_lambdas(params: &ModelParams, form: LaxForm) -> Vec<Complex64> {
    let w = params.omega0;
    let scale = w.max(1.0);
    [c(2.0 * w), c(3.0 * w), I * w, Complex64::new(1.0, 1.0)]
        .iter()
        .map(|&l| {
            let l = l * scale;
            let near = poles(form, params).iter().any(|(p, _)| (l - p).norm() < 0.25 * w);
            if near {
                l * 2.0
            } else {
                l
            }
        })
        .collect()
}

/// Linear map from the field-equation residuals `r` to the zero-curvature
/// residuals at the given spectral parameters, as a real
/// `8 n_lambda x 4` matrix.
fn correspondence_matrix(form: LaxForm, lambdas: &[Complex64], params: &ModelParams) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(8 * lambdas.len(), 4);
    let dl = dl_de(form, params.sigma1);
    for (li, &lambda) in lambdas.iter().enumerate() {
        let [mp, mn, mq] = m_coefficients(form, lambda, params);
        let cols = [dl, -mp, -mn, -mq];
        for (col, m) in cols.iter().enumerate() {
            for (e, z) in m.iter().enumerate() {
                a[(8 * li + 2 * e, col)] = z.re;
                a[(8 * li + 2 * e + 1, col)] = z.im;
            }
        }
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correspondence {
    /// Both the field-equation and zero-curvature residuals vanish.
    ConsistentZero,
    /// `max |r_recovered - r_direct| / max |r_direct|`.
    Mismatch(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrespondenceReport {
    pub outcome: Correspondence,
    /// 2-norm condition number of the stacked linear map.
    pub condition: f64,
    pub points: usize,
    pub max_direct: f64,
    pub max_zcr: f64,
}

impl CorrespondenceReport {
    pub fn mismatch(&self) -> Option<f64> {
        match self.outcome {
            Correspondence::Mismatch(m) => Some(m),
            Correspondence::ConsistentZero => None,
        }
    }
}

/// Condition numbers above this reject a spectral sample set.
pub const MAX_CONDITION: f64 = 1e8;

/// Pre-images of zero-curvature residuals: solves the stacked least-squares
/// system for the field-equation residual vector at each node.
/// `zcr[k][l]` is the residual at node `k` for `lambdas[l]`.
pub fn recover_residuals(
    zcr: &[Vec<Mat2>],
    lambdas: &[Complex64],
    params: &ModelParams,
    form: LaxForm,
) -> Result<(Vec<[f64; 4]>, f64)> {
    let a = correspondence_matrix(form, lambdas, params);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(RmbError::IllConditioned(condition));
    }
    let mut out = Vec::with_capacity(zcr.len());
    let mut b = DVector::zeros(8 * lambdas.len());
    for node in zcr {
        for (li, m) in node.iter().enumerate() {
            for (e, z) in m.iter().enumerate() {
                b[8 * li + 2 * e] = z.re;
                b[8 * li + 2 * e + 1] = z.im;
            }
        }
        let r = svd
            .solve(&b, 0.0)
            .map_err(|e| RmbError::Tracking(format!("least squares failed: {e}")))?;
        out.push([r[0], r[1], r[2], r[3]]);
    }
    Ok((out, condition))
}

/// Checks that the zero-curvature residual is the image of the discrete
/// field-equation residuals under the linear map implied by the pair.
pub fn residual_correspondence(
    patch: &Patch,
    lambdas: &[Complex64],
    params: &ModelParams,
    form: LaxForm,
) -> Result<CorrespondenceReport> {
    check_convention(params)?;
    if lambdas.len() < 4 {
        return Err(invalid("lambda_samples", "need at least four values"));
    }
    for (i, a) in lambdas.iter().enumerate() {
        if lambdas[..i].iter().any(|b| (a - b).norm() == 0.0) {
            return Err(invalid("lambda_samples", "values must be distinct"));
        }
        check_pole(form, *a, params)?;
    }
    let per_lambda: Vec<Vec<Mat2>> = lambdas
        .iter()
        .map(|&l| zcr_residual(patch, l, params, form))
        .collect::<Result<_>>()?;
    let points = per_lambda[0].len();
    let zcr: Vec<Vec<Mat2>> = (0..points)
        .map(|k| per_lambda.iter().map(|v| v[k]).collect())
        .collect();
    let direct = pde_residuals(patch, params)?;
    let (recovered, condition) = recover_residuals(&zcr, lambdas, params, form)?;

    let max_direct = direct.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_zcr = zcr
        .iter()
        .flatten()
        .flat_map(|m| m.iter().map(|z| z.norm()).collect::<Vec<_>>())
        .fold(0.0f64, f64::max);
    let field_scale = [&patch.e, &patch.p, &patch.n, &patch.q]
        .iter()
        .flat_map(|f| f.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let zero = 1e-12 * field_scale;
    let outcome = if max_direct <= zero && max_zcr <= zero {
        Correspondence::ConsistentZero
    } else {
        let diff = recovered
            .iter()
            .zip(&direct)
            .flat_map(|(a, b)| (0..4).map(move |i| (a[i] - b[i]).abs()))
            .fold(0.0f64, f64::max);
        Correspondence::Mismatch(diff / max_direct.max(zero))
    };
    Ok(CorrespondenceReport {
        outcome,
        condition,
        points,
        max_direct,
        max_zcr,
    })
}
