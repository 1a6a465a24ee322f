//! Two-photon joint temporal amplitude: storage, domain conversion and the
//! driven evolution along the waveguide.

mod evolve;
mod oracle;
mod source;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, FftPair, Grid};

pub use evolve::{evolve_jta, evolve_jta_with, EvolveOptions, JtaRun};

use crate::model::{validate_config, SourceConfig};
use crate::pump::{initial_envelopes, propagate_pumps};
pub use oracle::perturbative_oracle;
pub use source::{source_diagonal, source_term, source_term_spectral, SOURCE_NORMALIZATION};

/// Validate a configuration, propagate the pumps and integrate the joint
/// amplitude.
pub fn simulate(cfg: &SourceConfig) -> Result<JtaRun> {
    simulate_with(cfg, &EvolveOptions::default())
}

pub fn simulate_with(cfg: &SourceConfig, opts: &EvolveOptions) -> Result<JtaRun> {
    validate_config(cfg).into_result()?;
    let env = initial_envelopes(cfg)?;
    let trace = propagate_pumps(cfg, &env)?;
    evolve_jta_with(cfg, &trace, opts)
}

/// Rows handed to one worker per transform batch.
const ROW_BATCH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Time,
    Frequency,
}

/// Square joint amplitude, row-major with the Signal coordinate as the row
/// index and the Idler coordinate as the column index.
///
/// In the time domain the measure is dt^2 on (T_s, T_i); in the frequency
/// domain dw^2 on (w_s, w_i). `norm_sq` is the integral of |Phi|^2, the pair
/// probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointAmplitude {
    pub values: Vec<Complex64>,
    pub domain: Domain,
    pub grid: Grid,
    pub z: f64,
    pub norm_sq: f64,
    /// Time unit of the dimensionless axes (s).
    pub t0: f64,
    /// Position of the pump 1 peak on the dimensionless time axis; arrival
    /// times are reported relative to it.
    pub pump1_center: f64,
}

impl JointAmplitude {
    pub fn new(
        values: Vec<Complex64>,
        domain: Domain,
        grid: Grid,
        z: f64,
        t0: f64,
    ) -> Result<Self> {
        let n = grid.len();
        if values.len() != n * n {
            return Err(Error::GridMismatch(format!(
                "{} values cannot fill a {n} x {n} joint amplitude",
                values.len()
            )));
        }
        let mut phi = Self {
            values,
            domain,
            grid,
            z,
            norm_sq: 0.0,
            t0,
            pump1_center: 0.0,
        };
        phi.refresh_norm();
        Ok(phi)
    }

    pub fn zeros(domain: Domain, grid: Grid, z: f64, t0: f64) -> Self {
        let n = grid.len();
        Self::new(vec![Complex64::new(0.0, 0.0); n * n], domain, grid, z, t0)
            .expect("sized by construction")
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.n() + col]
    }

    /// Area element of the current domain.
    pub fn cell(&self) -> f64 {
        match self.domain {
            Domain::Time => self.grid.dt * self.grid.dt,
            Domain::Frequency => self.grid.dw * self.grid.dw,
        }
    }

    /// Axis values of the current domain (shared by rows and columns).
    pub fn axis(&self) -> &[f64] {
        match self.domain {
            Domain::Time => &self.grid.t_axis,
            Domain::Frequency => &self.grid.w_axis,
        }
    }

    pub fn integrated_norm(&self) -> f64 {
        grid::norm_sq(&self.values, self.cell())
    }

    pub fn refresh_norm(&mut self) {
        self.norm_sq = self.integrated_norm();
    }

    pub fn expect_domain(&self, expected: Domain) -> Result<()> {
        if self.domain == expected {
            Ok(())
        } else {
            Err(Error::Domain {
                expected,
                found: self.domain,
            })
        }
    }

    pub fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "joint amplitudes on {} and {} point grids with dt {} / {}",
                self.n(),
                other.n(),
                self.grid.dt,
                other.grid.dt
            )))
        }
    }

    /// Unitary two-dimensional transform to the other domain. The stored
    /// `norm_sq` is kept; the recomputed one agrees to rounding.
    pub fn transformed(&self) -> Self {
        let fft = FftPair::new(self.n());
        let mut out = self.clone();
        let to_freq = self.domain == Domain::Time;
        transform_2d(&self.grid, &fft, &mut out.values, to_freq);
        out.domain = if to_freq {
            Domain::Frequency
        } else {
            Domain::Time
        };
        out
    }

    pub fn to_domain(&self, domain: Domain) -> Self {
        if self.domain == domain {
            self.clone()
        } else {
            self.transformed()
        }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.norm_sq = self.norm_sq * factor.norm_sqr();
        out
    }
}

/// Apply the unitary 1D transform to every length-n row of `buf`.
pub(crate) fn transform_rows(grid: &Grid, fft: &FftPair, buf: &mut [Complex64], to_freq: bool) {
    let n = grid.len();
    buf.par_chunks_mut(n * ROW_BATCH).for_each_init(
        || fft.scratch(),
        |scratch, chunk| {
            if to_freq {
                grid::time_to_freq_in_place(grid, fft, chunk, scratch);
            } else {
                grid::freq_to_time_in_place(grid, fft, chunk, scratch);
            }
        },
    );
}

pub(crate) fn transform_2d(grid: &Grid, fft: &FftPair, values: &mut [Complex64], to_freq: bool) {
    let n = grid.len();
    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    transform_rows(grid, fft, values, to_freq);
    grid::transpose_square(values, &mut tmp, n);
    transform_rows(grid, fft, &mut tmp, to_freq);
    grid::transpose_square(&tmp, values, n);
}

/// Cumulative pair probability along the waveguide.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiProfile {
    pub z_nodes: Vec<f64>,
    pub xi: Vec<f64>,
    pub spectral_map: Option<SpectralMap>,
}

/// Idler marginal spectrum |Phi(w_s, w_i, z)|^2 integrated over w_s, at
/// each snapshot position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMap {
    pub z: Vec<f64>,
    pub w_axis: Vec<f64>,
    /// One row per z, one column per w_i bin.
    pub intensity: Vec<Vec<f64>>,
    pub normalized: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_jta(n: usize, seed: &[f64]) -> JointAmplitude {
        let g = Grid::new(n, -4.0, 12.0).unwrap();
        let values = (0..n * n)
            .map(|k| {
                let a = seed[k % seed.len()];
                let b = seed[(k * 7 + 3) % seed.len()];
                Complex64::new(a * (k as f64 * 0.37).sin(), b * (k as f64 * 0.11).cos())
            })
            .collect();
        JointAmplitude::new(values, Domain::Time, g, 0.0, 1.0).unwrap()
    }

    #[test]
    fn rejects_wrong_size() {
        let g = Grid::new(64, -4.0, 12.0).unwrap();
        assert!(JointAmplitude::new(
            vec![Complex64::new(0.0, 0.0); 10],
            Domain::Time,
            g,
            0.0,
            1.0
        )
        .is_err());
    }

    #[test]
    fn separable_gaussian_maps_to_separable_gaussian() {
        let g = Grid::new(128, -16.0, 16.0).unwrap();
        let n = g.len();
        let values: Vec<Complex64> = (0..n * n)
            .map(|k| {
                let (ts, ti) = (g.t_axis[k / n], g.t_axis[k % n]);
                Complex64::new((-(ts * ts + ti * ti) / 2.0).exp(), 0.0)
            })
            .collect();
        let phi = JointAmplitude::new(values, Domain::Time, g.clone(), 0.0, 1.0).unwrap();
        let jsa = phi.transformed();
        for k in 0..n * n {
            let (ws, wi) = (g.w_axis[k / n], g.w_axis[k % n]);
            let expected = (-(ws * ws + wi * wi) / 2.0).exp();
            assert!((jsa.values[k] - expected).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn round_trip_and_parseval(seed in proptest::collection::vec(-1.0f64..1.0, 5..40)) {
            let phi = random_jta(64, &seed);
            let jsa = phi.transformed();
            prop_assert_eq!(jsa.domain, Domain::Frequency);
            let rel = (jsa.integrated_norm() - phi.norm_sq).abs() / phi.norm_sq.max(1e-300);
            prop_assert!(rel < 1e-12);
            let back = jsa.transformed();
            let err: f64 = back.values.iter().zip(&phi.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            let scale: f64 = phi.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-12 * scale.max(1e-300));
        }
    }
}
