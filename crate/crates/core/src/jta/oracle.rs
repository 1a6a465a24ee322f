use num_complex::Complex64;

use super::evolve::replica_masks;
use super::{source_diagonal, Domain, JointAmplitude};
use crate::error::{Error, Result};
use crate::grid::{transpose_square, FftPair};
use crate::model::{derive_run_params, kappa_profile, SourceConfig};
use crate::pump::{grid_for, PumpTrace};

/// First-order solution by direct quadrature: every step's diagonal source
/// h S(z_mid) is carried to z = L by the exact free Signal/Idler propagator
/// (loss, walk-off and dispersion, all diagonal in frequency) and summed.
/// The replica filter commutes with that propagator and is applied once.
///
/// Only valid without the pump-induced phases on Signal and Idler, so the
/// configuration must have `xpm_spm_enabled = false`.
pub fn perturbative_oracle(cfg: &SourceConfig, trace: &PumpTrace) -> Result<JointAmplitude> {
    if cfg.numerics.xpm_spm_enabled {
        return Err(Error::Config(
            "the perturbative oracle ignores cross-phase modulation; set numerics.xpm_spm_enabled = false".into(),
        ));
    }
    let grid = grid_for(cfg)?;
    let n = grid.len();
    let n_z = cfg.numerics.n_z;
    if trace.grid != grid || trace.midpoints.len() != n_z {
        return Err(Error::GridMismatch(
            "pump trace does not match the configuration".into(),
        ));
    }
    let p = derive_run_params(cfg);
    let d = &cfg.dispersion;
    let disp = cfg.numerics.dispersion_enabled;
    let kappa = kappa_profile(cfg);
    let length = cfg.geometry.length;
    let h = p.dz;
    let nu = grid.fft_frequencies();
    let rate = |alpha: f64, lw: f64, ld: f64| -> Vec<Complex64> {
        nu.iter()
            .map(|&v| {
                Complex64::new(
                    -0.5 * alpha,
                    -v / lw + if disp { v * v / (2.0 * ld) } else { 0.0 },
                )
            })
            .collect()
    };
    let rs = rate(p.alpha_s, d.walkoff_length.s, d.dispersion_length.s);
    let ri = rate(p.alpha_i, d.walkoff_length.i, d.dispersion_length.i);

    let fft = FftPair::new(n);
    let mut scratch = fft.scratch();
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for step in 0..n_z {
        let z_mid = (step as f64 + 0.5) * h;
        let remaining = length - z_mid;
        let sigma = source_diagonal(
            &trace.midpoints[step],
            d.gamma.g_p1p2si,
            kappa.theta_si(z_mid),
        );
        // 2D DFT of diag(v) is V[(ks + ki) mod n].
        let mut spec: Vec<Complex64> = sigma.iter().map(|s| s * (h / grid.dt)).collect();
        fft.forward.process_with_scratch(&mut spec, &mut scratch);
        let es: Vec<Complex64> = rs.iter().map(|r| (r * remaining).exp()).collect();
        let ei: Vec<Complex64> = ri.iter().map(|r| (r * remaining).exp()).collect();
        for ks in 0..n {
            let row = &mut acc[ks * n..(ks + 1) * n];
            for (ki, v) in row.iter_mut().enumerate() {
                *v += spec[(ks + ki) % n] * es[ks] * ei[ki];
            }
        }
    }

    let (mask_s, mask_i) = replica_masks(cfg, &nu);
    for (ks, row) in acc.chunks_exact_mut(n).enumerate() {
        for (v, w) in row.iter_mut().zip(&mask_i) {
            *v *= mask_s[ks] * w;
        }
    }

    let mut tmp = vec![Complex64::new(0.0, 0.0); n * n];
    for row in acc.chunks_exact_mut(n) {
        fft.inverse.process_with_scratch(row, &mut scratch);
    }
    transpose_square(&acc, &mut tmp, n);
    for row in tmp.chunks_exact_mut(n) {
        fft.inverse.process_with_scratch(row, &mut scratch);
    }
    transpose_square(&tmp, &mut acc, n);
    let scale = Complex64::from_polar(1.0 / (n * n) as f64, kappa.theta_si(length));
    acc.iter_mut().for_each(|v| *v *= scale);
    let mut phi = JointAmplitude::new(acc, Domain::Time, grid, length, cfg.pump.t0_fwhm)?;
    phi.pump1_center = p.tau_norm;
    Ok(phi)
}
