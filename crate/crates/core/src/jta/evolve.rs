use std::collections::BTreeSet;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{source_diagonal, Domain, JointAmplitude, XiProfile, ROW_BATCH};
use crate::error::{Error, Result};
use crate::grid::{transpose_square, FftPair, Grid};
use crate::model::{derive_run_params, kappa_profile, SourceConfig};
use crate::pump::{grid_for, PumpTrace};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvolveOptions {
    /// Switch the driving term off for z beyond this position (m).
    pub source_cutoff: Option<f64>,
    /// Overrides `numerics.snapshot_count`.
    pub snapshot_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JtaRun {
    /// Phi(T_s, T_i, L) in the time domain, Theta_si restored.
    pub jta: JointAmplitude,
    pub xi: XiProfile,
    pub snapshots: Vec<JointAmplitude>,
    /// xi(L) from the integral of -(alpha_s + alpha_i) xi + 2 Re<S, Phi>
    /// along the run.
    pub xi_balance: f64,
}

/// Per-axis exp(dz L_q(nu)) in FFT order, including the 1/n of the inverse FFT.
fn axis_factor(
    nu: &[f64],
    dz: f64,
    alpha: f64,
    walkoff: f64,
    l_d: f64,
    disp: bool,
) -> Vec<Complex64> {
    let n = nu.len() as f64;
    nu.iter()
        .map(|&v| {
            let mut phase = -v / walkoff;
            if disp {
                phase += v * v / (2.0 * l_d);
            }
            Complex64::from_polar((-0.5 * alpha * dz).exp() / n, phase * dz)
        })
        .collect()
}

/// Detuning of the vertex of the pair phase mismatch on the (Signal, Idler)
/// axes, in FFT frequency units. Along nu_i = -nu_s the mismatch is
/// nu_s (1/L_w,i - 1/L_w,s) + nu_s^2 (1/L_D,s + 1/L_D,i) / 2, whose roots are
/// 0 and twice the vertex.
pub(crate) fn mismatch_vertex(cfg: &SourceConfig) -> Option<(f64, f64)> {
    if !cfg.numerics.dispersion_enabled {
        return None;
    }
    let d = &cfg.dispersion;
    let curvature = 1.0 / d.dispersion_length.s + 1.0 / d.dispersion_length.i;
    if curvature == 0.0 {
        return None;
    }
    let v = -(1.0 / d.walkoff_length.i - 1.0 / d.walkoff_length.s) / curvature;
    Some((v, -v))
}

/// 0/1 weights per axis keeping the side of the mismatch vertex that
/// contains zero detuning; all ones when the filter is off.
pub(crate) fn replica_masks(cfg: &SourceConfig, nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let keep = |vertex: f64| {
        nu.iter()
            .map(|v| if v / vertex < 1.0 { 1.0 } else { 0.0 })
            .collect()
    };
    match mismatch_vertex(cfg).filter(|_| cfg.numerics.replica_filter) {
        Some((vs, vi)) => (keep(vs), keep(vi)),
        None => (vec![1.0; nu.len()], vec![1.0; nu.len()]),
    }
}

struct LinearStep {
    s: Vec<Complex64>,
    i: Vec<Complex64>,
}

/// Field stored either with T_s as row index (normal) or transposed.
struct Field {
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    transposed: bool,
    n: usize,
}

impl Field {
    fn filter_rows(&mut self, fft: &FftPair, factor: &[Complex64]) {
        let n = self.n;
        self.buf.par_chunks_mut(n * ROW_BATCH).for_each_init(
            || fft.scratch(),
            |scratch, chunk| {
                fft.forward.process_with_scratch(chunk, scratch);
                for row in chunk.chunks_exact_mut(n) {
                    for (v, f) in row.iter_mut().zip(factor) {
                        *v *= f;
                    }
                }
                fft.inverse.process_with_scratch(chunk, scratch);
            },
        );
    }

    /// Apply a separable linear step; flips the storage layout.
    fn linear(&mut self, fft: &FftPair, step: &LinearStep) {
        let (first, second) = if self.transposed {
            (&step.s, &step.i)
        } else {
            (&step.i, &step.s)
        };
        self.filter_rows(fft, first);
        transpose_square(&self.buf, &mut self.tmp, self.n);
        std::mem::swap(&mut self.buf, &mut self.tmp);
        self.filter_rows(fft, second);
        self.transposed = !self.transposed;
    }

    fn normal_values(&self) -> Vec<Complex64> {
        if self.transposed {
            let mut out = vec![Complex64::new(0.0, 0.0); self.buf.len()];
            transpose_square(&self.buf, &mut out, self.n);
            out
        } else {
            self.buf.clone()
        }
    }

    fn sum_sq(&self) -> f64 {
        self.buf
            .par_chunks(self.n * ROW_BATCH)
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum()
    }
}

fn check_trace(cfg: &SourceConfig, grid: &Grid, trace: &PumpTrace) -> Result<()> {
    let n_z = cfg.numerics.n_z;
    let h = cfg.geometry.length / n_z as f64;
    if trace.grid != *grid {
        return Err(Error::GridMismatch(
            "pump trace was computed on a different time grid".into(),
        ));
    }
    if trace.midpoints.len() != n_z
        || trace.nodes.len() != n_z + 1
        || (trace.dz - h).abs() > 1e-12 * h
    {
        return Err(Error::GridMismatch(format!(
            "pump trace has {} steps of {:e} m, the run needs {n_z} steps of {h:e} m",
            trace.midpoints.len(),
            trace.dz
        )));
    }
    Ok(())
}

fn snapshot_nodes(n_z: usize, count: usize) -> BTreeSet<usize> {
    (1..=count)
        .map(|k| ((k * n_z) as f64 / count as f64).round() as usize)
        .filter(|&m| m >= 1)
        .collect()
}

pub fn evolve_jta(cfg: &SourceConfig, trace: &PumpTrace) -> Result<JtaRun> {
    evolve_jta_with(cfg, trace, &EvolveOptions::default())
}

/// Integrate the driven joint-amplitude equation for Phi~ = Phi exp(-i Theta_si)
/// with symmetric splitting: half linear step, XPM phase and midpoint source
/// injection, half linear step. Consecutive half steps are merged.
pub fn evolve_jta_with(
    cfg: &SourceConfig,
    trace: &PumpTrace,
    opts: &EvolveOptions,
) -> Result<JtaRun> {
    let grid = grid_for(cfg)?;
    check_trace(cfg, &grid, trace)?;
    let n = grid.len();
    let n_z = cfg.numerics.n_z;
    let params = derive_run_params(cfg);
    let h = params.dz;
    let d = &cfg.dispersion;
    let disp = cfg.numerics.dispersion_enabled;
    let xpm = cfg.numerics.xpm_spm_enabled;
    let kappa = kappa_profile(cfg);
    let nu = grid.fft_frequencies();
    let fft = FftPair::new(n);
    let alpha = params.alpha_s + params.alpha_i;
    let dt = grid.dt;

    let (mask_s, mask_i) = replica_masks(cfg, &nu);
    let masked = |f: Vec<Complex64>, m: &[f64]| f.into_iter().zip(m).map(|(v, w)| v * w).collect();
    let make = |dz: f64| LinearStep {
        s: masked(
            axis_factor(
                &nu,
                dz,
                params.alpha_s,
                d.walkoff_length.s,
                d.dispersion_length.s,
                disp,
            ),
            &mask_s,
        ),
        i: masked(
            axis_factor(
                &nu,
                dz,
                params.alpha_i,
                d.walkoff_length.i,
                d.dispersion_length.i,
                disp,
            ),
            &mask_i,
        ),
    };
    let band_weight: Vec<f64> = {
        let mut count = vec![0.0; n];
        for (ks, ws) in mask_s.iter().enumerate() {
            for (ki, wi) in mask_i.iter().enumerate() {
                count[(ks + ki) % n] += ws * wi;
            }
        }
        count.into_iter().map(|c| c / (n * n) as f64).collect()
    };
    let full = make(h);
    let half = make(0.5 * h);

    let snaps = snapshot_nodes(
        n_z,
        opts.snapshot_count.unwrap_or(cfg.numerics.snapshot_count),
    );
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut field = Field {
        buf: vec![Complex64::new(0.0, 0.0); n * n],
        tmp: vec![Complex64::new(0.0, 0.0); n * n],
        transposed: false,
        n,
    };
    let mut xi = Vec::with_capacity(n_z + 1);
    xi.push(0.0);
    let mut drive_integral = 0.0;
    let mut ps = vec![Complex64::new(1.0, 0.0); n];
    let mut pi = vec![Complex64::new(1.0, 0.0); n];
    let mut half_diag = vec![Complex64::new(1.0, 0.0); n];

    let phi_at = |values: Vec<Complex64>, z: f64| -> JointAmplitude {
        let rot = Complex64::from_polar(1.0, kappa.theta_si(z));
        let values = values.into_iter().map(|v| v * rot).collect();
        let mut phi = JointAmplitude::new(values, Domain::Time, grid.clone(), z, cfg.pump.t0_fwhm)
            .expect("sized by construction");
        phi.pump1_center = params.tau_norm;
        phi
    };

    for step in 0..n_z {
        let z_mid = (step as f64 + 0.5) * h;
        let z_next = (step + 1) as f64 * h;
        let pumps = &trace.midpoints[step];

        if xpm {
            let g = &d.gamma;
            for j in 0..n {
                let i1 = pumps.a_p1[j].norm_sqr();
                let i2 = pumps.a_p2[j].norm_sqr();
                let phs = 2.0 * (g.g11ss * i1 + g.g22ss * i2);
                let phi_ = 2.0 * (g.g11ii * i1 + g.g22ii * i2);
                ps[j] = Complex64::from_polar(1.0, phs * h);
                pi[j] = Complex64::from_polar(1.0, phi_ * h);
                half_diag[j] = Complex64::from_polar(1.0, 0.5 * (phs + phi_) * h);
            }
        }

        let driving = opts.source_cutoff.is_none_or(|zc| z_mid <= zc);
        let sigma = if driving {
            Some(source_diagonal(
                pumps,
                d.gamma.g_p1p2si,
                kappa.theta_si(z_mid),
            ))
        } else {
            None
        };

        // 2 Re <S, Phi_mid> with Phi_mid = exp(N h / 2) Phi + h P S / 2, P the
        // replica filter. The 2D DFT of diag(sigma) is sigma^[(k_s + k_i) mod n],
        // so |P S|^2 only needs the in-band count along each anti-diagonal.
        if let Some(sigma) = &sigma {
            let mut g = 0.0;
            for j in 0..n {
                g += (sigma[j] * (half_diag[j] * field.buf[j * n + j]).conj()).re;
            }
            let mut spec = sigma.clone();
            fft.forward.process(&mut spec);
            let in_band: f64 = spec
                .iter()
                .zip(&band_weight)
                .map(|(v, w)| v.norm_sqr() * w)
                .sum();
            g += 0.5 * h / dt * in_band;
            drive_integral += h * 2.0 * g * dt;
        }

        if xpm {
            let (rows, cols) = if field.transposed {
                (&pi, &ps)
            } else {
                (&ps, &pi)
            };
            field
                .buf
                .par_chunks_mut(n)
                .zip(rows.par_iter())
                .for_each(|(row, r)| {
                    for (v, c) in row.iter_mut().zip(cols.iter()) {
                        *v *= r * c;
                    }
                });
        }
        if let Some(sigma) = &sigma {
            for j in 0..n {
                field.buf[j * n + j] += h * half_diag[j] * sigma[j] / dt;
            }
        }

        if snaps.contains(&(step + 1)) && step + 1 < n_z {
            let mut copy = Field {
                buf: field.buf.clone(),
                tmp: vec![Complex64::new(0.0, 0.0); n * n],
                transposed: field.transposed,
                n,
            };
            copy.linear(&fft, &half);
            snapshots.push(phi_at(copy.normal_values(), z_next));
        }
        // The node value is the norm half a (filtered) linear step past the
        // injection; read it off after the merged step.
        let total = if step + 1 < n_z {
            field.linear(&fft, &full);
            (0.5 * alpha * h).exp() * field.sum_sq() * dt * dt
        } else {
            field.linear(&fft, &half);
            field.sum_sq() * dt * dt
        };
        if !total.is_finite() {
            return Err(Error::Numerical {
                step: step + 1,
                reason: "non-finite joint amplitude".into(),
            });
        }
        xi.push(total);
    }

    let jta = phi_at(field.normal_values(), cfg.geometry.length);
    if snaps.contains(&n_z) {
        snapshots.push(jta.clone());
    }
    let loss_integral: f64 = xi.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
    let z_nodes = (0..=n_z).map(|k| k as f64 * h).collect();
    Ok(JtaRun {
        jta,
        xi: XiProfile {
            z_nodes,
            xi,
            spectral_map: None,
        },
        snapshots,
        xi_balance: drive_integral - alpha * loss_integral,
    })
}
