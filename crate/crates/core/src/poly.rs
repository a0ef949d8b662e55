//! Polynomial roots as eigenvalues of the companion matrix.
//!
//! The companion matrix is already upper Hessenberg, so a plain complex
//! single-shift QR iteration with Wilkinson shifts suffices. Each root is then
//! polished by a few Newton steps on the original polynomial and checked by
//! back-substitution.

use num_complex::Complex64;

use crate::error::{Result, RmbError};

const MAX_SWEEPS: usize = 60;

/// Relative back-substitution tolerance applied by [`roots`].
pub const ROOT_TOL: f64 = 1e-10;

/// Horner evaluation; `coeffs[0]` is the leading coefficient.
pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// `sum_k |a_k| |z|^(deg - k)`, the natural scale for the residual at `z`.
pub fn residual_scale(coeffs: &[Complex64], z: Complex64) -> f64 {
    let r = z.norm();
    coeffs.iter().fold(0.0, |acc, a| acc * r + a.norm())
}

fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().fold((zero, zero), |(p, dp), &a| (p * z + a, dp * z + p))
}

/// All roots of `coeffs[0] z^d + ... + coeffs[d]`, each verified to satisfy
/// `|p(z)| <= ROOT_TOL * residual_scale(z)`.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(RmbError::DegeneratePolynomial("non-finite coefficient".into()));
    }
    let lead = match coeffs.first() {
        Some(a) if a.norm() > 0.0 => *a,
        Some(_) => {
            return Err(RmbError::DegeneratePolynomial("leading coefficient is zero".into()))
        }
        None => return Err(RmbError::DegeneratePolynomial("empty coefficient list".into())),
    };
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }

    let mut h = vec![vec![Complex64::new(0.0, 0.0); deg]; deg];
    for (j, a) in coeffs[1..].iter().enumerate() {
        h[0][j] = -a / lead;
    }
    for i in 1..deg {
        h[i][i - 1] = Complex64::new(1.0, 0.0);
    }
    let mut found = hessenberg_eigenvalues(h)?;

    for z in found.iter_mut() {
        polish(coeffs, z);
        let residual = eval(coeffs, *z).norm();
        let bound = ROOT_TOL * residual_scale(coeffs, *z);
        if residual > bound {
            return Err(RmbError::RootVerification { residual, bound });
        }
    }
    // Deterministic order: by real part, then imaginary part.
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(found)
}

/// Convenience wrapper for real coefficients.
pub fn real_roots_of(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let c: Vec<Complex64> = coeffs.iter().map(|&a| Complex64::new(a, 0.0)).collect();
    roots(&c)
}

fn polish(coeffs: &[Complex64], z: &mut Complex64) {
    let mut best = eval(coeffs, *z).norm();
    for _ in 0..4 {
        let (p, dp) = eval_with_derivative(coeffs, *z);
        if dp.norm() == 0.0 || best == 0.0 {
            return;
        }
        let candidate = *z - p / dp;
        let r = eval(coeffs, candidate).norm();
        if r < best {
            *z = candidate;
            best = r;
        } else {
            return;
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by shifted QR with deflation.
fn hessenberg_eigenvalues(mut h: Vec<Vec<Complex64>>) -> Result<Vec<Complex64>> {
    let n = h.len();
    let mut out = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut sweeps = 0usize;
    let eps = f64::EPSILON;
    loop {
        if hi == 0 {
            out.push(h[0][0]);
            break;
        }
        // Find the start of the active unreduced block.
        let mut l = hi;
        while l > 0 {
            let scale = h[l][l].norm() + h[l - 1][l - 1].norm();
            let scale = if scale == 0.0 { 1.0 } else { scale };
            if h[l][l - 1].norm() <= eps * scale {
                h[l][l - 1] = Complex64::new(0.0, 0.0);
                break;
            }
            l -= 1;
        }
        if l == hi {
            out.push(h[hi][hi]);
            hi -= 1;
            sweeps = 0;
            continue;
        }
        sweeps += 1;
        if sweeps > MAX_SWEEPS {
            return Err(RmbError::EigenNoConvergence(MAX_SWEEPS));
        }

        let mu = if sweeps.is_multiple_of(11) {
            // exceptional shift to break cycles
            h[hi][hi] + Complex64::new(0.75 * h[hi][hi - 1].norm(), 0.5 * h[hi][hi - 1].norm())
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };

        for k in l..=hi {
            h[k][k] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (x, y) = (h[k][k], h[k + 1][k]);
            let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (x / r, y / r)
            };
            // rows k, k+1 <- G [row k; row k+1], G = [[c*, s*], [-s, c]]
            for j in k..=hi {
                let (a, b) = (h[k][j], h[k + 1][j]);
                h[k][j] = c.conj() * a + s.conj() * b;
                h[k + 1][j] = -s * a + c * b;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = l + offset;
            // columns k, k+1 <- [col k, col k+1] G^H
            for i in l..=(k + 1).min(hi) {
                let (a, b) = (h[i][k], h[i][k + 1]);
                h[i][k] = a * c + b * s;
                h[i][k + 1] = -a * s.conj() + b * c.conj();
            }
        }
        for k in l..=hi {
            h[k][k] += mu;
        }
    }
    Ok(out)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() <= (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quadratic_and_cubic_roots() {
        let r = real_roots_of(&[1.0, 0.0, -4.0]).unwrap();
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - c(2.0, 0.0)).norm() < 1e-14);

        // z^2 + 1
        let r = real_roots_of(&[1.0, 0.0, 1.0]).unwrap();
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14);
        assert!((r[1] - c(0.0, 1.0)).norm() < 1e-14);

        // (z - 1)(z - 2)(z - 3)
        let r = real_roots_of(&[1.0, -6.0, 11.0, -6.0]).unwrap();
        for (z, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z - c(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn triple_zero_root() {
        let r = real_roots_of(&[-1.0, -0.0, 0.0, 0.0]).unwrap();
        assert!(r.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn degenerate_input() {
        assert!(matches!(
            real_roots_of(&[0.0, 1.0, 2.0]),
            Err(RmbError::DegeneratePolynomial(_))
        ));
        assert!(real_roots_of(&[]).is_err());
        assert!(real_roots_of(&[1.0, f64::NAN]).is_err());
        assert!(real_roots_of(&[3.0]).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn reconstructs_random_monic_cubics(
            r0 in -3.0..3.0f64, re in -3.0..3.0f64, im in -3.0..3.0f64,
        ) {
            // roots r0, re +- i im
            let coeffs = [
                1.0,
                -(r0 + 2.0 * re),
                2.0 * r0 * re + re * re + im * im,
                -r0 * (re * re + im * im),
            ];
            let got = real_roots_of(&coeffs).unwrap();
            let want = [c(r0, 0.0), c(re, im), c(re, -im)];
            for w in want {
                let d = got.iter().map(|z| (z - w).norm()).fold(f64::INFINITY, f64::min);
                // clustered roots are only determined to ~sqrt(eps)
                prop_assert!(d < 1e-6, "missing {w}, got {got:?}");
            }
        }

        #[test]
        fn complex_quartic_residuals(a in prop::collection::vec(-2.0..2.0f64, 8)) {
            let coeffs = [c(1.0, 0.0), c(a[0], a[1]), c(a[2], a[3]), c(a[4], a[5]), c(a[6], a[7])];
            let r = roots(&coeffs).unwrap();
            prop_assert_eq!(r.len(), 4);
            for z in r {
                prop_assert!(eval(&coeffs, z).norm() <= ROOT_TOL * residual_scale(&coeffs, z));
            }
        }
    }
}
