//! Multi-dimensional complex FFT over the torus grid, applied axis by axis.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Field, TorusGrid};

#[derive(Clone)]
pub(crate) struct NdFft {
    resolutions: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for NdFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NdFft")
            .field("resolutions", &self.resolutions)
            .finish()
    }
}

impl NdFft {
    pub(crate) fn new(grid: &TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let resolutions = grid.resolutions().to_vec();
        let forward = resolutions
            .iter()
            .map(|&n| planner.plan_fft_forward(n))
            .collect();
        let inverse = resolutions
            .iter()
            .map(|&n| planner.plan_fft_inverse(n))
            .collect();
        Self {
            resolutions,
            forward,
            inverse,
        }
    }

    fn len(&self) -> usize {
        self.resolutions.iter().product()
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.forward);
    }

    /// Unnormalized inverse; callers divide by the node count.
    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.inverse);
    }

    fn run(&self, buf: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        debug_assert_eq!(buf.len(), self.len());
        let total = buf.len();
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.resolutions[axis];
            let stride: usize = self.resolutions[axis + 1..].iter().product();
            let block = n * stride;
            let mut line = vec![Complex64::default(); n];
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = buf[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, slot) in line.iter().enumerate() {
                        buf[base + j * stride] = *slot;
                    }
                }
            }
        }
    }

    /// Applies a diagonal frequency-space multiplier to every component of
    /// `u` and returns the real part of the result.
    pub(crate) fn apply(&self, u: &Field, multiplier: &[Complex64]) -> Field {
        let m = self.len();
        let n = u.n();
        let scale = 1.0 / m as f64;
        let mut out = Field::zeros(u.grid(), n);
        let mut buf = vec![Complex64::default(); m];
        for i in 0..n {
            for (slot, &v) in buf.iter_mut().zip(u.values().iter().skip(i).step_by(n)) {
                *slot = Complex64::new(v, 0.0);
            }
            self.forward(&mut buf);
            for (slot, &mul) in buf.iter_mut().zip(multiplier) {
                *slot *= mul;
            }
            self.inverse(&mut buf);
            for (dst, src) in out.values_mut().iter_mut().skip(i).step_by(n).zip(&buf) {
                *dst = src.re * scale;
            }
        }
        out
    }

    /// Same as [`NdFft::apply`] with a real multiplier.
    pub(crate) fn apply_real(&self, u: &Field, multiplier: &[f64]) -> Field {
        let complex: Vec<Complex64> = multiplier.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        self.apply(u, &complex)
    }

    /// Forward transform of one component, returned as a fresh buffer.
    pub(crate) fn spectrum(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }
}

/// Signed frequency of DFT bin `j` on an axis with `n` points. The Nyquist
/// bin `n/2` maps to `+n/2`.
pub(crate) fn signed_frequency(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}
