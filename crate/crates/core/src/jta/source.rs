//! Driving term of the joint-amplitude equation.
//!
//! In the time domain the term is supported on the diagonal T_s = T_i:
//! S = c i gamma A_p1(T) A_p2(T) exp(-i Theta_si) delta(T_s - T_i). The
//! spectral form builds the same term from the convolution of the two pump
//! spectra and an inverse transform in both variables.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::transform_2d;
use crate::grid::{time_to_freq, FftPair, Grid};
use crate::pump::PumpEnvelopes;

/// Weight c of the driving term relative to i gamma A_p1 A_p2 delta(T_s - T_i).
///
/// The generation kernel G(w_s, w_i) = i \int A_p1(x) A_p2(w_s + w_i - x) dx
/// is written with unitary pump spectra and mapped back to time with the
/// non-unitary synthesis f(T) = \int F(w) exp(-i w T) dw in each variable,
/// which leaves a net factor 2 pi on the diagonal source.
pub const SOURCE_NORMALIZATION: f64 = 2.0 * PI;

/// Diagonal weights sigma_j such that S[j][k] = delta_jk sigma_j / dt.
pub fn source_diagonal(pumps: &PumpEnvelopes, gamma: f64, theta_si: f64) -> Vec<Complex64> {
    let pre = Complex64::from_polar(SOURCE_NORMALIZATION * gamma, 0.5 * PI - theta_si);
    pumps
        .a_p1
        .iter()
        .zip(&pumps.a_p2)
        .map(|(a, b)| pre * a * b)
        .collect()
}

/// Full n x n driving term in the time domain, with the delta function
/// represented as 1/dt on the grid diagonal.
pub fn source_term(
    pumps: &PumpEnvelopes,
    grid: &Grid,
    gamma: f64,
    theta_si: f64,
) -> Vec<Complex64> {
    let n = grid.len();
    let mut s = vec![Complex64::new(0.0, 0.0); n * n];
    for (j, sigma) in source_diagonal(pumps, gamma, theta_si)
        .into_iter()
        .enumerate()
    {
        s[j * n + j] = sigma / grid.dt;
    }
    s
}

/// The same driving term evaluated through its spectral kernel: explicit
/// convolution of the pump spectra, then a unitary 2D inverse transform.
pub fn source_term_spectral(
    pumps: &PumpEnvelopes,
    grid: &Grid,
    gamma: f64,
    theta_si: f64,
) -> Vec<Complex64> {
    let n = grid.len();
    let fft = FftPair::new(n);
    let a1 = time_to_freq(grid, &fft, &pumps.a_p1);
    let a2 = time_to_freq(grid, &fft, &pumps.a_p2);

    // Sampled spectra are periodic in the index up to a phase fixed by the
    // window origin.
    let wrap = 2.0 * PI * grid.t_min() / grid.dt;
    let at = |v: &[Complex64], idx: i64| -> Complex64 {
        let m = idx.div_euclid(n as i64);
        let k = idx.rem_euclid(n as i64) as usize;
        if m == 0 {
            v[k]
        } else {
            v[k] * Complex64::from_polar(1.0, m as f64 * wrap)
        }
    };

    // conv[s] = dw sum_k1 A1(w_k1) A2(w_s' - w_k1), indexed by s = ks + ki.
    let conv: Vec<Complex64> = (0..2 * n - 1)
        .map(|s| {
            a1.iter()
                .enumerate()
                .map(|(k1, x)| x * at(&a2, s as i64 - k1 as i64))
                .sum::<Complex64>()
                * grid.dw
        })
        .collect();

    let pre = Complex64::from_polar(
        SOURCE_NORMALIZATION * gamma / (2.0 * PI),
        0.5 * PI - theta_si,
    );
    let mut g: Vec<Complex64> = (0..n * n).map(|k| pre * conv[k / n + k % n]).collect();
    transform_2d(grid, &fft, &mut g, false);
    g
}
