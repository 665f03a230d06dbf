//! Fourier transforms of test functions and sampled fields.
//!
//! The lab fixes the forward transform as `f~(p) = \int f(x) e^{-i<p,x>} dx`.
//! A 2*pi-symmetric variant (`e^{-2*pi*i<p,x>}`) is exposed behind a flag for
//! cross-checks against the Gaussian-integrator conventions.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::grid::Grid1;
use crate::quad::trapezoid_complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Convention {
    /// e^{-i p x} dx
    #[default]
    Angular,
    /// e^{-2 pi i p x} dx
    Symmetric,
}

impl Convention {
    fn phase(&self, p: f64, x: f64) -> Complex64 {
        let arg = match self {
            Convention::Angular => -p * x,
            Convention::Symmetric => -2.0 * std::f64::consts::PI * p * x,
        };
        Complex64::new(0.0, arg).exp()
    }
}

/// Continuous Fourier transform of grid samples by trapezoid quadrature,
/// evaluated at the requested momenta. Spectrally accurate for smooth
/// rapidly-decreasing samples that vanish at the grid ends.
pub fn continuous_ft(grid: &Grid1, values: &[f64], momenta: &[f64], conv: Convention) -> Vec<Complex64> {
    assert_eq!(values.len(), grid.n);
    momenta
        .iter()
        .map(|&p| {
            let integrand: Vec<Complex64> = grid
                .points()
                .zip(values)
                .map(|(x, &v)| conv.phase(p, x) * v)
                .collect();
            trapezoid_complex(&integrand, grid.step)
        })
        .collect()
}

/// In-place forward DFT (rustfft convention: X_k = sum_j x_j e^{-2 pi i jk/N}).
pub fn dft_forward(values: &mut [Complex64]) {
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(values.len()).process(values);
}

/// In-place inverse DFT including the 1/N normalization.
pub fn dft_inverse(values: &mut [Complex64]) {
    let n = values.len();
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(values);
    let scale = 1.0 / n as f64;
    for v in values.iter_mut() {
        *v *= scale;
    }
}

/// Angular frequencies for a periodic grid of n points and box length L,
/// in FFT ordering: 0, 1, ..., n/2, -(n/2-1), ..., -1 times 2 pi / L.
pub fn fft_frequencies(n: usize, box_length: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / box_length;
    (0..n)
        .map(|k| {
            let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            base * k
        })
        .collect()
}
