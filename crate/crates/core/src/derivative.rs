//! Spatial derivatives on the periodic grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeScheme {
    /// Fourier differentiation; the Nyquist mode of even grids is zeroed so the
    /// operator stays real and skew-symmetric.
    Spectral,
    /// Fourth-order central differences with periodic wrap.
    Central4,
}

/// Reusable first-derivative operator for one grid size and spacing.
pub struct Differentiator {
    scheme: DerivativeScheme,
    n: usize,
    spacing: f64,
    forward: Option<Arc<dyn Fft<f64>>>,
    inverse: Option<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<f64>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Differentiator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Differentiator")
            .field("scheme", &self.scheme)
            .field("n", &self.n)
            .field("spacing", &self.spacing)
            .finish()
    }
}

impl Differentiator {
    pub fn new(scheme: DerivativeScheme, n: usize, length: f64) -> Self {
        let spacing = length / n as f64;
        match scheme {
            DerivativeScheme::Spectral => {
                let mut planner = FftPlanner::new();
                let forward = planner.plan_fft_forward(n);
                let inverse = planner.plan_fft_inverse(n);
                let scratch_len = forward
                    .get_inplace_scratch_len()
                    .max(inverse.get_inplace_scratch_len());
                let base = 2.0 * std::f64::consts::PI / length;
                let wavenumbers = (0..n)
                    .map(|k| {
                        if n.is_multiple_of(2) && k == n / 2 {
                            0.0
                        } else if k <= n / 2 {
                            base * k as f64
                        } else {
                            base * (k as f64 - n as f64)
                        }
                    })
                    .collect();
                Differentiator {
                    scheme,
                    n,
                    spacing,
                    forward: Some(forward),
                    inverse: Some(inverse),
                    wavenumbers,
                    buffer: vec![Complex64::new(0.0, 0.0); n],
                    scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
                }
            }
            DerivativeScheme::Central4 => Differentiator {
                scheme,
                n,
                spacing,
                forward: None,
                inverse: None,
                wavenumbers: Vec::new(),
                buffer: Vec::new(),
                scratch: Vec::new(),
            },
        }
    }

    pub fn scheme(&self) -> DerivativeScheme {
        self.scheme
    }

    /// Writes `d/dx input` into `out`.
    pub fn apply(&mut self, input: &[f64], out: &mut [f64]) {
        assert_eq!(input.len(), self.n);
        assert_eq!(out.len(), self.n);
        match self.scheme {
            DerivativeScheme::Spectral => self.spectral(input, out),
            DerivativeScheme::Central4 => central4_periodic(input, self.spacing, out),
        }
    }

    pub fn derivative(&mut self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; input.len()];
        self.apply(input, &mut out);
        out
    }

    fn spectral(&mut self, input: &[f64], out: &mut [f64]) {
        let (forward, inverse) = match (&self.forward, &self.inverse) {
            (Some(f), Some(i)) => (f.clone(), i.clone()),
            _ => unreachable!("spectral differentiator without plans"),
        };
        for (b, &v) in self.buffer.iter_mut().zip(input) {
            *b = Complex64::new(v, 0.0);
        }
        forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let norm = 1.0 / self.n as f64;
        for (b, &k) in self.buffer.iter_mut().zip(&self.wavenumbers) {
            // multiply by i k
            *b = Complex64::new(-k * b.im, k * b.re) * norm;
        }
        inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (o, b) in out.iter_mut().zip(&self.buffer) {
            *o = b.re;
        }
    }
}

fn central4_periodic(input: &[f64], h: f64, out: &mut [f64]) {
    let n = input.len();
    let inv = 1.0 / (12.0 * h);
    for i in 0..n {
        let m2 = input[(i + n - 2) % n];
        let m1 = input[(i + n - 1) % n];
        let p1 = input[(i + 1) % n];
        let p2 = input[(i + 2) % n];
        out[i] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) * inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(n: usize, length: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(-0.5 * length + i as f64 * length / n as f64)).collect()
    }

    #[test]
    fn spectral_is_exact_on_trig_modes() {
        let (n, length) = (64, 2.0 * PI);
        let mut d = Differentiator::new(DerivativeScheme::Spectral, n, length);
        let u = sample(n, length, |x| (3.0 * x).sin() + 0.5 * (7.0 * x).cos());
        let du = d.derivative(&u);
        let exact = sample(n, length, |x| 3.0 * (3.0 * x).cos() - 3.5 * (7.0 * x).sin());
        let err = du.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "err = {err}");
    }

    #[test]
    fn central4_converges_at_fourth_order() {
        let length = 2.0 * PI;
        let err = |n: usize| {
            let mut d = Differentiator::new(DerivativeScheme::Central4, n, length);
            let u = sample(n, length, |x| x.sin().exp());
            let du = d.derivative(&u);
            let exact = sample(n, length, |x| x.cos() * x.sin().exp());
            du.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(64) / err(128);
        assert!((13.0..19.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn both_schemes_are_skew() {
        // sum_i u_i (D u)_i = 0 for a skew-symmetric D; this is what makes the
        // discrete energy exactly conserved by the semi-discrete flow.
        for scheme in [DerivativeScheme::Spectral, DerivativeScheme::Central4] {
            let n = 32;
            let mut d = Differentiator::new(scheme, n, 5.0);
            let u: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let du = d.derivative(&u);
            let dot: f64 = u.iter().zip(&du).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-11, "{scheme:?}: {dot}");
        }
    }
}
