//! Dimensionless time axis and its dual frequency axis.
//!
//! The spectral convention follows the physical one for fields written as
//! `A(t) exp(-i omega_bar t)`: a component `exp(-i w T)` of an envelope sits
//! at the positive detuning `w`. The unitary transform pair is
//!
//! ```text
//! F(w) = (2 pi)^-1/2 \int f(T) exp(+i w T) dT
//! f(T) = (2 pi)^-1/2 \int F(w) exp(-i w T) dw
//! ```
//!
//! discretised on `T_n = T_min + n dt` and `w_k = (k - N/2) dw`, with
//! `dw dt N = 2 pi`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t_axis: Vec<f64>,
    pub w_axis: Vec<f64>,
    pub dt: f64,
    pub dw: f64,
}

impl Grid {
    pub fn new(n: usize, t_min: f64, t_max: f64) -> Result<Self> {
        if n < 2 || t_max.partial_cmp(&t_min) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::GridMismatch(format!(
                "cannot build a grid of {n} points on [{t_min}, {t_max})"
            )));
        }
        let dt = (t_max - t_min) / n as f64;
        let dw = 2.0 * PI / (n as f64 * dt);
        let half = (n / 2) as f64;
        Ok(Self {
            t_axis: (0..n).map(|k| t_min + k as f64 * dt).collect(),
            w_axis: (0..n).map(|k| (k as f64 - half) * dw).collect(),
            dt,
            dw,
        })
    }

    pub fn len(&self) -> usize {
        self.t_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_axis.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.t_axis[0]
    }

    pub fn t_max(&self) -> f64 {
        self.t_min() + self.len() as f64 * self.dt
    }

    /// Angular frequencies in FFT storage order (0, dw, ..., -dw), as seen by
    /// an unnormalised forward DFT followed by `exp(+i nu T)` synthesis.
    pub fn fft_frequencies(&self) -> Vec<f64> {
        let n = self.len() as i64;
        (0..n)
            .map(|k| if k < n / 2 { k } else { k - n } as f64 * self.dw)
            .collect()
    }
}

/// Cached forward/inverse plans for one transform length.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
    n: usize,
}

impl std::fmt::Debug for FftPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPair").field("n", &self.n).finish()
    }
}

impl FftPair {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        let len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        vec![Complex64::new(0.0, 0.0); len]
    }
}

/// Unitary transform of a time-domain vector to the centred frequency axis.
pub fn time_to_freq(grid: &Grid, fft: &FftPair, f: &[Complex64]) -> Vec<Complex64> {
    let mut buf = f.to_vec();
    time_to_freq_in_place(grid, fft, &mut buf, &mut fft.scratch());
    buf
}

pub fn freq_to_time(grid: &Grid, fft: &FftPair, spec: &[Complex64]) -> Vec<Complex64> {
    let mut buf = spec.to_vec();
    freq_to_time_in_place(grid, fft, &mut buf, &mut fft.scratch());
    buf
}

/// In-place unitary transform of one or more consecutive length-N rows.
pub(crate) fn time_to_freq_in_place(
    grid: &Grid,
    fft: &FftPair,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = grid.len();
    for row in buf.chunks_exact_mut(n) {
        for (k, v) in row.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    fft.inverse.process_with_scratch(buf, scratch);
    let norm = grid.dt / (2.0 * PI).sqrt();
    let t_min = grid.t_min();
    let phase: Vec<Complex64> = grid
        .w_axis
        .iter()
        .map(|w| Complex64::from_polar(norm, w * t_min))
        .collect();
    for row in buf.chunks_exact_mut(n) {
        for (v, p) in row.iter_mut().zip(&phase) {
            *v *= p;
        }
    }
}

pub(crate) fn freq_to_time_in_place(
    grid: &Grid,
    fft: &FftPair,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
) {
    let n = grid.len();
    let norm = grid.dw / (2.0 * PI).sqrt();
    let t_min = grid.t_min();
    let phase: Vec<Complex64> = grid
        .w_axis
        .iter()
        .map(|w| Complex64::from_polar(norm, -w * t_min))
        .collect();
    for row in buf.chunks_exact_mut(n) {
        for (v, p) in row.iter_mut().zip(&phase) {
            *v *= p;
        }
    }
    fft.forward.process_with_scratch(buf, scratch);
    for row in buf.chunks_exact_mut(n) {
        for (k, v) in row.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
}

/// Blocked out-of-place transpose of a square row-major matrix, parallel
/// over bands of destination rows.
pub(crate) fn transpose_square(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    dst.par_chunks_mut(BLOCK * n)
        .enumerate()
        .for_each(|(band, out)| {
            let r0 = band * BLOCK;
            let rows = out.len() / n;
            for cb in (0..n).step_by(BLOCK) {
                for r in 0..rows {
                    for c in cb..(cb + BLOCK).min(n) {
                        out[r * n + c] = src[c * n + r0 + r];
                    }
                }
            }
        });
}

/// Sum of |f|^2 dx.
pub fn norm_sq(f: &[Complex64], dx: f64) -> f64 {
    f.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
}
