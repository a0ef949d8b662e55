//! Kink fronts of `E'' = V'(E)` with
//! `V(E) = a4 E^4 + a2 E^2 - f sgn(x) E`, by damped Newton on a
//! second-order finite-difference grid.

use crate::error::{invalid, Result, RmbError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkProblem {
    /// `a4`, default 1.
    pub quartic_coeff: f64,
    /// `a2`, default -1.
    pub quadratic_coeff: f64,
    /// `f >= 0`, default 0.2.
    pub forcing: f64,
    /// The domain is `[-half_width, half_width]`.
    pub half_width: f64,
    /// Odd, so that `x = 0` is a grid node.
    pub n_points: usize,
    /// Target for `max |E'' - V'(E)|`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KinkProblem {
    fn default() -> Self {
        KinkProblem {
            quartic_coeff: 1.0,
            quadratic_coeff: -1.0,
            forcing: 0.2,
            half_width: 12.0,
            n_points: 96_001,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

impl KinkProblem {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    fn dv(&self, e: f64, sgn: f64) -> f64 {
        4.0 * self.quartic_coeff * e * e * e + 2.0 * self.quadratic_coeff * e - self.forcing * sgn
    }

    fn ddv(&self, e: f64) -> f64 {
        12.0 * self.quartic_coeff * e * e + 2.0 * self.quadratic_coeff
    }

    /// Amplitude and rate `(a, b)` of the forcing-free kink `a tanh(b x)`:
    /// `a^2 = -a2 / (2 a4)`, `b^2 = -a2`.
    pub fn tanh_parameters(&self) -> (f64, f64) {
        let a = (-self.quadratic_coeff / (2.0 * self.quartic_coeff)).sqrt();
        (a, (-self.quadratic_coeff).sqrt())
    }

    fn validate(&self) -> Result<()> {
        if !(self.quartic_coeff > 0.0) {
            return Err(invalid("quartic_coeff", "must be > 0"));
        }
        if !(self.quadratic_coeff < 0.0) {
            return Err(invalid("quadratic_coeff", "must be < 0 for a double-well potential"));
        }
        if !(self.forcing >= 0.0 && self.forcing.is_finite()) {
            return Err(invalid("forcing", "must be finite and >= 0"));
        }
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(invalid("half_width", "must be > 0"));
        }
        if self.n_points < 9 || self.n_points.is_multiple_of(2) {
            return Err(invalid("n_points", "must be odd and >= 9"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be > 0"));
        }
        Ok(())
    }

    /// Outer root of `4 a4 E^3 + 2 a2 E = target`, on the side `sign`.
    ///
    /// Exists only when the forcing stays below the local extremum of the
    /// cubic; found by bisection.
    pub fn outer_root(&self, sign: f64) -> Result<f64> {
        // g(E) = V'(E) with sgn = sign; the outer root on side `sign` lies beyond
        // the extremum of the cubic at E_c = sqrt(-a2 / (6 a4)).
        let g = |e: f64| self.dv(e, sign);
        let ec = (-self.quadratic_coeff / (6.0 * self.quartic_coeff)).sqrt();
        let (mut lo, mut hi) = if sign > 0.0 { (ec, 1.0) } else { (-1.0, -ec) };
        while g(lo).signum() == g(hi).signum() {
            if sign > 0.0 {
                hi *= 2.0;
            } else {
                lo *= 2.0;
            }
            if hi.abs() > 1e6 || lo.abs() > 1e6 {
                return Err(invalid("forcing", "no outer root of V'"));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid).signum() == g(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        // three real roots are required for the well structure
        let third = |e: f64| self.dv(e, -sign);
        if third(ec) * third(-ec) > 0.0 {
            return Err(invalid("forcing", "too strong: V' has a single real root"));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinkSolution {
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    /// Forcing-free reference `a tanh(b x)`.
    pub tanh_ref: Vec<f64>,
    pub root_minus: f64,
    pub root_plus: f64,
    /// `max |E'' - V'(E)|` over interior nodes.
    pub residual: f64,
    /// `max |E - tanh_ref|`.
    pub tanh_distance: f64,
    /// `max |E(x) + E(-x)|`.
    pub odd_defect: f64,
    pub iterations: usize,
}

/// Solves a tridiagonal system in place (Thomas algorithm). `lower[0]` and
/// `upper[n-1]` are ignored.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

pub fn solve_kink(problem: &KinkProblem) -> Result<KinkSolution> {
    problem.validate()?;
    let n = problem.n_points;
    let h = problem.spacing();
    let mid = n / 2;
    let x: Vec<f64> = (0..n)
        .map(|i| if i == mid { 0.0 } else { -problem.half_width + i as f64 * h })
        .collect();
    let sgn: Vec<f64> = (0..n).map(|i| (i as f64 - mid as f64).signum()).collect();
    let r_plus = problem.outer_root(1.0)?;
    let r_minus = problem.outer_root(-1.0)?;
    // The exact front has E(0) = 0: for f = 0 by choice of translate, for
    // f > 0 because matching the first integrals across x = 0 forces it. The
    // grid only fixes the position to within a cell (sgn changes at a node),
    // so the centre value is pinned in both cases.

    let (_, b) = problem.tanh_parameters();
    let mut e: Vec<f64> = x
        .iter()
        .map(|&xi| {
            let t = (b * xi).tanh();
            if xi >= 0.0 {
                r_plus * t
            } else {
                -r_minus * t
            }
        })
        .collect();
    e[0] = r_minus;
    e[n - 1] = r_plus;

    let inv_h2 = 1.0 / (h * h);
    let residual_of = |e: &[f64], out: &mut [f64]| -> f64 {
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let r = if i == mid {
                // E(0) = 0 is imposed, not solved for
                0.0
            } else {
                (e[i - 1] - 2.0 * e[i] + e[i + 1]) * inv_h2 - problem.dv(e[i], sgn[i])
            };
            out[i] = r;
            worst = worst.max(r.abs());
        }
        worst
    };

    let m = n - 2;
    let mut res = vec![0.0; n];
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut step = vec![0.0; m];
    let mut trial = e.clone();
    let mut trial_res = vec![0.0; n];
    let mut norm = residual_of(&e, &mut res);
    let mut iterations = 0;
    while norm > problem.tol {
        if iterations == problem.max_iter {
            return Err(RmbError::NewtonNoConvergence {
                iterations,
                residual: norm,
            });
        }
        iterations += 1;
        for j in 0..m {
            let i = j + 1;
            if i == mid {
                lower[j] = 0.0;
                diag[j] = 1.0;
                upper[j] = 0.0;
                step[j] = -res[i];
            } else {
                lower[j] = inv_h2;
                diag[j] = -2.0 * inv_h2 - problem.ddv(e[i]);
                upper[j] = inv_h2;
                step[j] = -res[i];
            }
        }
        thomas(&lower, &mut diag, &upper, &mut step);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= 1.0 / 1024.0 {
            for j in 0..m {
                trial[j + 1] = e[j + 1] + lambda * step[j];
            }
            let t_norm = residual_of(&trial, &mut trial_res);
            if t_norm < norm {
                std::mem::swap(&mut e, &mut trial);
                std::mem::swap(&mut res, &mut trial_res);
                norm = t_norm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // round-off floor of the discrete second derivative
            let floor = 16.0 * f64::EPSILON * r_plus.abs().max(r_minus.abs()) * inv_h2;
            if norm <= problem.tol.max(floor) {
                break;
            }
            return Err(RmbError::NewtonNoConvergence {
                iterations,
                residual: norm,
            });
        }
    }

    let (a, b) = problem.tanh_parameters();
    let tanh_ref: Vec<f64> = x.iter().map(|&xi| a * (b * xi).tanh()).collect();
    let tanh_distance = e.iter().zip(&tanh_ref).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    let odd_defect = (0..n).fold(0.0f64, |m, i| m.max((e[i] + e[n - 1 - i]).abs()));
    Ok(KinkSolution {
        x,
        e,
        tanh_ref,
        root_minus: r_minus,
        root_plus: r_plus,
        residual: norm,
        tanh_distance,
        odd_defect,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        let lower = [0.0, 1.0, 1.0];
        let mut diag = [4.0, 4.0, 4.0];
        let upper = [1.0, 1.0, 0.0];
        let mut rhs = [5.0, 6.0, 5.0];
        thomas(&lower, &mut diag, &upper, &mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn roots_of_forced_cubic() {
        let p = KinkProblem::default();
        let r = p.outer_root(1.0).unwrap();
        assert!((4.0 * r * r * r - 2.0 * r - 0.2).abs() < 1e-14);
        assert!(r > 0.7);
        let l = p.outer_root(-1.0).unwrap();
        assert!((l + r).abs() < 1e-14);
        let free = KinkProblem { forcing: 0.0, ..p };
        assert!((free.outer_root(1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        let strong = KinkProblem { forcing: 2.0, ..p };
        assert!(strong.outer_root(1.0).is_err());
    }

    #[test]
    fn coarse_unforced_kink_converges_at_second_order() {
        let err = |n: usize| {
            let p = KinkProblem {
                forcing: 0.0,
                n_points: n,
                half_width: 10.0,
                tol: 1e-10,
                ..KinkProblem::default()
            };
            solve_kink(&p).unwrap().tanh_distance
        };
        let ratio = err(401) / err(801);
        assert!((3.6..4.4).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn rejects_bad_problems() {
        let p = KinkProblem::default();
        assert!(solve_kink(&KinkProblem { n_points: 100, ..p }).is_err());
        assert!(solve_kink(&KinkProblem { quadratic_coeff: 1.0, ..p }).is_err());
        assert!(solve_kink(&KinkProblem { forcing: -0.1, ..p }).is_err());
    }

    #[test]
    fn newton_budget_is_enforced() {
        let p = KinkProblem {
            n_points: 2001,
            max_iter: 1,
            tol: 1e-14,
            ..KinkProblem::default()
        };
        assert!(matches!(solve_kink(&p), Err(RmbError::NewtonNoConvergence { .. })));
    }
}
