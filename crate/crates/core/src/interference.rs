//! Two-source interference: RHOM and HHOM visibilities, arrival-time
//! compensation and the search over the two pump delays.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::FftPair;
use crate::jta::{simulate, transform_2d, Domain, JointAmplitude};
use crate::model::{SourceConfig, CONSTANTS};

/// Delay lattice: tau = k tau_max / LATTICE for k in 0..=LATTICE.
pub const LATTICE: i64 = 200;
/// Spacing of the coarse grid in lattice units (11 points per axis).
pub const COARSE_STEP: i64 = 20;
/// Pattern-search step sizes in lattice units.
pub const PATTERN_STEPS: [i64; 4] = [10, 5, 2, 1];
/// Objective differences below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Largest fraction of the norm allowed to wrap across the periodic window
/// in a time shift.
pub const SHIFT_WRAP_LIMIT: f64 = 1e-6;

fn unit_norms(phi1: &JointAmplitude, phi2: &JointAmplitude) -> Result<(f64, f64)> {
    phi1.same_grid(phi2)?;
    if phi1.domain != phi2.domain {
        return Err(Error::Domain {
            expected: phi1.domain,
            found: phi2.domain,
        });
    }
    let (n1, n2) = (phi1.integrated_norm(), phi2.integrated_norm());
    if n1 <= 0.0 || n2 <= 0.0 {
        return Err(Error::ZeroField("visibility"));
    }
    Ok((n1, n2))
}

/// |<Phi_2|Phi_1>|^2 of the unit-normalized amplitudes. The overlap is the
/// same in either domain, so no transform is needed.
pub fn rhom_visibility(phi1: &JointAmplitude, phi2: &JointAmplitude) -> Result<f64> {
    let (n1, n2) = unit_norms(phi1, phi2)?;
    let overlap: Complex64 = phi1
        .values
        .iter()
        .zip(&phi2.values)
        .map(|(a, b)| a * b.conj())
        .sum::<Complex64>()
        * phi1.cell();
    Ok(overlap.norm_sqr() / (n1 * n2))
}

/// Tr(rho_1 rho_2) of the heralded Signal states, with
/// rho_k(T_s, T_s') = \int Phi_k(T_s, T_i) Phi_k^*(T_s', T_i) dT_i. Equals
/// ||Phi_1^dagger Phi_2||_F^2 for unit-normalized amplitudes.
pub fn hhom_visibility(phi1: &JointAmplitude, phi2: &JointAmplitude) -> Result<f64> {
    phi1.expect_domain(Domain::Time)?;
    phi2.expect_domain(Domain::Time)?;
    let (n1, n2) = unit_norms(phi1, phi2)?;
    let n = phi1.n();
    let a = DMatrix::from_row_slice(n, n, &phi1.values);
    let b = DMatrix::from_row_slice(n, n, &phi2.values);
    let m = a.adjoint() * b;
    let cell = phi1.cell();
    Ok(m.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell * cell / (n1 * n2))
}

/// Fraction of the norm lying within `shift` of the window edge that a
/// translation by `shift` carries across.
fn wrapped_fraction(marginal: &[f64], t_axis: &[f64], t_min: f64, t_max: f64, shift: f64) -> f64 {
    let total: f64 = marginal.iter().sum();
    let moved: f64 = marginal
        .iter()
        .zip(t_axis)
        .filter(|(_, &t)| {
            if shift > 0.0 {
                t < t_min + shift
            } else {
                t >= t_max + shift
            }
        })
        .map(|(m, _)| m)
        .sum();
    moved / total
}

/// Phi(T_s + shift_s / T0, T_i + shift_i / T0) through a linear spectral
/// phase, exact and norm preserving for amplitudes that stay inside the
/// window.
pub fn apply_time_shift(
    phi: &JointAmplitude,
    shift_s: f64,
    shift_i: f64,
) -> Result<JointAmplitude> {
    phi.expect_domain(Domain::Time)?;
    let (a, b) = (shift_s / phi.t0, shift_i / phi.t0);
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Shift("non-finite shift".into()));
    }
    if a == 0.0 && b == 0.0 {
        return Ok(phi.clone());
    }
    let g = &phi.grid;
    let span = g.t_max() - g.t_min();
    if a.abs() >= span || b.abs() >= span {
        return Err(Error::Shift(format!(
            "shift ({a:.3}, {b:.3}) T0 exceeds the {span} T0 window"
        )));
    }
    if phi.integrated_norm() > 0.0 {
        let (ms, mi) = crate::metrics::marginals(phi);
        let ws = wrapped_fraction(&ms, &g.t_axis, g.t_min(), g.t_max(), a);
        let wi = wrapped_fraction(&mi, &g.t_axis, g.t_min(), g.t_max(), b);
        if ws.max(wi) > SHIFT_WRAP_LIMIT {
            return Err(Error::Shift(format!(
                "shift ({a:.3}, {b:.3}) T0 moves a fraction {:.2e} of the amplitude across the window edge",
                ws.max(wi)
            )));
        }
    }
    let n = phi.n();
    let fft = FftPair::new(n);
    let mut values = phi.values.clone();
    transform_2d(g, &fft, &mut values, true);
    let ramp = |w: f64, d: f64| Complex64::from_polar(1.0, -w * d);
    let rs: Vec<Complex64> = g.w_axis.iter().map(|&w| ramp(w, a)).collect();
    let ri: Vec<Complex64> = g.w_axis.iter().map(|&w| ramp(w, b)).collect();
    values
        .par_chunks_mut(n)
        .zip(rs.par_iter())
        .for_each(|(row, r)| {
            for (v, c) in row.iter_mut().zip(&ri) {
                *v *= r * c;
            }
        });
    transform_2d(g, &fft, &mut values, false);
    let mut out = phi.clone();
    out.values = values;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Rhom,
    Hhom,
}

impl Objective {
    pub fn evaluate(self, phi1: &JointAmplitude, phi2: &JointAmplitude) -> Result<f64> {
        match self {
            Objective::Rhom => rhom_visibility(phi1, phi2),
            Objective::Hhom => hhom_visibility(phi1, phi2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Candidate {
    pub tau1: f64,
    pub tau2: f64,
    /// None when the arrival compensation would push amplitude across the
    /// window edge; such points are excluded from the search.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairStudy {
    pub cfg1: SourceConfig,
    pub cfg2: SourceConfig,
    pub objective: Objective,
    /// Source 1 and the arrival-compensated source 2 at the optimum.
    pub phi1: JointAmplitude,
    pub phi2: JointAmplitude,
    /// Delays applied to the Signal and Idler of source 2 (s).
    pub shift_s: f64,
    pub shift_i: f64,
    pub v_rhom: f64,
    pub v_hhom: f64,
    pub optimal_tau1: f64,
    pub optimal_tau2: f64,
    /// Both sources at tau_max / 2 with no arrival compensation.
    pub raw_rhom: f64,
    pub raw_hhom: f64,
    pub candidates: Vec<Candidate>,
}

/// One simulated source at one lattice delay, with its arrival means on the
/// dimensionless grid.
struct Sample {
    phi: JointAmplitude,
    mean_s: f64,
    mean_i: f64,
}

impl Sample {
    fn run(cfg: &SourceConfig) -> Result<Self> {
        let phi = simulate(cfg)?.jta;
        if phi.integrated_norm() <= 0.0 {
            return Err(Error::ZeroField("arrival time"));
        }
        let (ms, mi) = crate::metrics::marginals(&phi);
        let mean = |m: &[f64]| {
            m.iter()
                .zip(&phi.grid.t_axis)
                .map(|(p, t)| p * t)
                .sum::<f64>()
                / m.iter().sum::<f64>()
        };
        Ok(Self {
            mean_s: mean(&ms),
            mean_i: mean(&mi),
            phi,
        })
    }
}

fn config_key(cfg: &SourceConfig) -> String {
    let mut c = cfg.clone();
    c.pump.tau = 0.0;
    let text = serde_json::to_string(&c).expect("configurations serialize");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

type Point = (i64, i64);

/// Delay search over a pair of sources. Simulations are memoized on
/// (configuration without delay, lattice index), so identical sources and
/// repeated objectives share runs.
pub struct DelayOptimizer {
    cfg1: SourceConfig,
    cfg2: SourceConfig,
    keys: [String; 2],
    cache: Mutex<HashMap<(String, i64), Arc<Sample>>>,
}

impl DelayOptimizer {
    pub fn new(cfg1: &SourceConfig, cfg2: &SourceConfig) -> Self {
        Self {
            keys: [config_key(cfg1), config_key(cfg2)],
            cfg1: cfg1.clone(),
            cfg2: cfg2.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn cfg(&self, source: usize) -> &SourceConfig {
        if source == 0 {
            &self.cfg1
        } else {
            &self.cfg2
        }
    }

    pub fn tau(&self, source: usize, k: i64) -> f64 {
        self.cfg(source).tau_max() * k as f64 / LATTICE as f64
    }

    /// Number of distinct simulations run so far.
    pub fn simulations(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    fn sample(&self, source: usize, k: i64) -> Result<Arc<Sample>> {
        let key = (self.keys[source].clone(), k);
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let sample = Arc::new(Sample::run(
            &self.cfg(source).with_tau(self.tau(source, k)),
        )?);
        Ok(self
            .cache
            .lock()
            .expect("cache lock")
            .entry(key)
            .or_insert(sample)
            .clone())
    }

    fn prefetch(&self, points: &[Point]) {
        let mut wanted: Vec<(usize, i64)> =
            points.iter().flat_map(|&(a, b)| [(0, a), (1, b)]).collect();
        wanted.sort_unstable();
        wanted.dedup();
        // Errors resurface, with their delays, when the objective is evaluated.
        wanted.par_iter().for_each(|&(s, k)| {
            let _ = self.sample(s, k);
        });
    }

    /// Source 2 delayed so that both photons' mean arrival times coincide
    /// with those of source 1; returns the shifted amplitude and the shifts.
    fn compensated(&self, p: Point) -> Result<(Arc<Sample>, JointAmplitude, f64, f64)> {
        let s1 = self.sample(0, p.0)?;
        let s2 = self.sample(1, p.1)?;
        let t0 = s2.phi.t0;
        let (shift_s, shift_i) = ((s2.mean_s - s1.mean_s) * t0, (s2.mean_i - s1.mean_i) * t0);
        let phi2 = apply_time_shift(&s2.phi, shift_s, shift_i)?;
        Ok((s1, phi2, shift_s, shift_i))
    }

    /// Objective at a lattice point; Ok(None) when the point is infeasible
    /// because the compensating shift is rejected.
    fn evaluate(&self, objective: Objective, p: Point) -> Result<Option<f64>> {
        let run = || -> Result<f64> {
            let (s1, phi2, _, _) = self.compensated(p)?;
            objective.evaluate(&s1.phi, &phi2)
        };
        match run() {
            Ok(v) => Ok(Some(v)),
            Err(Error::Shift(_)) => Ok(None),
            Err(e) => Err(Error::Objective {
                tau1: self.tau(0, p.0),
                tau2: self.tau(1, p.1),
                source: Box::new(e),
            }),
        }
    }

    fn evaluate_all(
        &self,
        objective: Objective,
        points: &[Point],
    ) -> Result<Vec<(Point, Option<f64>)>> {
        self.prefetch(points);
        points
            .par_iter()
            .map(|&p| self.evaluate(objective, p).map(|v| (p, v)))
            .collect()
    }

    /// Coarse grid over [0, tau_max]^2, then pattern search on the lattice.
    pub fn optimize(&self, objective: Objective) -> Result<PairStudy> {
        let mut seen: HashMap<Point, Option<f64>> = HashMap::new();
        let coarse: Vec<Point> = (0..=LATTICE)
            .step_by(COARSE_STEP as usize)
            .flat_map(|a| {
                (0..=LATTICE)
                    .step_by(COARSE_STEP as usize)
                    .map(move |b| (a, b))
            })
            .collect();
        for (p, v) in self.evaluate_all(objective, &coarse)? {
            seen.insert(p, v);
        }
        let feasible = |seen: &HashMap<Point, Option<f64>>, pts: Vec<Point>| {
            pick_best(
                pts.into_iter()
                    .filter_map(|p| seen.get(&p).copied().flatten().map(|v| (p, v))),
            )
        };
        let mut best = feasible(&seen, coarse.clone()).ok_or_else(|| {
            Error::Shift(
                "no coarse delay pair admits arrival compensation inside the window".into(),
            )
        })?;

        for step in PATTERN_STEPS {
            loop {
                let neighbours: Vec<Point> = [
                    (-1, -1),
                    (-1, 0),
                    (-1, 1),
                    (0, -1),
                    (0, 1),
                    (1, -1),
                    (1, 0),
                    (1, 1),
                ]
                .iter()
                .map(|(da, db)| (best.0 .0 + da * step, best.0 .1 + db * step))
                .filter(|(a, b)| (0..=LATTICE).contains(a) && (0..=LATTICE).contains(b))
                .filter(|p| !seen.contains_key(p))
                .collect();
                for (p, v) in self.evaluate_all(objective, &neighbours)? {
                    seen.insert(p, v);
                }
                let local = [
                    (-1, -1),
                    (-1, 0),
                    (-1, 1),
                    (0, -1),
                    (0, 0),
                    (0, 1),
                    (1, -1),
                    (1, 0),
                    (1, 1),
                ]
                .iter()
                .map(|(da, db)| (best.0 .0 + da * step, best.0 .1 + db * step))
                .collect();
                let next = feasible(&seen, local).expect("current point is feasible");
                if next.0 == best.0 {
                    break;
                }
                best = next;
            }
        }
        self.study(objective, best.0, seen)
    }

    fn study(
        &self,
        objective: Objective,
        p: Point,
        seen: HashMap<Point, Option<f64>>,
    ) -> Result<PairStudy> {
        let wrap = |e: Error| Error::Objective {
            tau1: self.tau(0, p.0),
            tau2: self.tau(1, p.1),
            source: Box::new(e),
        };
        let (s1, phi2, shift_s, shift_i) = self.compensated(p).map_err(wrap)?;
        let v_rhom = rhom_visibility(&s1.phi, &phi2)?;
        let v_hhom = hhom_visibility(&s1.phi, &phi2)?;
        let mid = LATTICE / 2;
        let r1 = self.sample(0, mid)?;
        let r2 = self.sample(1, mid)?;
        let mut candidates: Vec<Candidate> = seen
            .into_iter()
            .map(|((a, b), value)| Candidate {
                tau1: self.tau(0, a),
                tau2: self.tau(1, b),
                value,
            })
            .collect();
        candidates.sort_by(|x, y| x.tau1.total_cmp(&y.tau1).then(x.tau2.total_cmp(&y.tau2)));
        Ok(PairStudy {
            cfg1: self.cfg1.clone(),
            cfg2: self.cfg2.clone(),
            objective,
            phi1: s1.phi.clone(),
            phi2,
            shift_s,
            shift_i,
            v_rhom,
            v_hhom,
            optimal_tau1: self.tau(0, p.0),
            optimal_tau2: self.tau(1, p.1),
            raw_rhom: rhom_visibility(&r1.phi, &r2.phi)?,
            raw_hhom: hhom_visibility(&r1.phi, &r2.phi)?,
            candidates,
        })
    }
}

/// Highest value; within TIE_TOLERANCE the point closer to the lattice
/// centre wins, then the lexicographically smaller point.
fn pick_best(points: impl Iterator<Item = (Point, f64)>) -> Option<(Point, f64)> {
    let dist = |p: Point| (p.0 - LATTICE / 2).pow(2) + (p.1 - LATTICE / 2).pow(2);
    points.fold(None, |acc: Option<(Point, f64)>, (p, v)| match acc {
        None => Some((p, v)),
        Some((bp, bv)) => {
            let better = if (v - bv).abs() <= TIE_TOLERANCE {
                (dist(p), p) < (dist(bp), bp)
            } else {
                v > bv
            };
            Some(if better { (p, v) } else { (bp, bv) })
        }
    })
}

/// Pair study at the delays already set in the two configurations, with the
/// same arrival compensation as the optimizer. The raw visibilities are those
/// of the uncompensated amplitudes at these delays.
pub fn compare_at_configured(
    cfg1: &SourceConfig,
    cfg2: &SourceConfig,
    objective: Objective,
) -> Result<PairStudy> {
    let wrap = |e: Error| Error::Objective {
        tau1: cfg1.pump.tau,
        tau2: cfg2.pump.tau,
        source: Box::new(e),
    };
    let s1 = Sample::run(cfg1).map_err(wrap)?;
    let s2 = Sample::run(cfg2).map_err(wrap)?;
    let t0 = s2.phi.t0;
    let (shift_s, shift_i) = ((s2.mean_s - s1.mean_s) * t0, (s2.mean_i - s1.mean_i) * t0);
    let phi2 = apply_time_shift(&s2.phi, shift_s, shift_i).map_err(wrap)?;
    let value = objective.evaluate(&s1.phi, &phi2).map_err(wrap)?;
    Ok(PairStudy {
        cfg1: cfg1.clone(),
        cfg2: cfg2.clone(),
        objective,
        v_rhom: rhom_visibility(&s1.phi, &phi2)?,
        v_hhom: hhom_visibility(&s1.phi, &phi2)?,
        raw_rhom: rhom_visibility(&s1.phi, &s2.phi)?,
        raw_hhom: hhom_visibility(&s1.phi, &s2.phi)?,
        phi2,
        phi1: s1.phi,
        shift_s,
        shift_i,
        optimal_tau1: cfg1.pump.tau,
        optimal_tau2: cfg2.pump.tau,
        candidates: vec![Candidate {
            tau1: cfg1.pump.tau,
            tau2: cfg2.pump.tau,
            value: Some(value),
        }],
    })
}

pub fn optimize_delays(
    cfg1: &SourceConfig,
    cfg2: &SourceConfig,
    objective: Objective,
) -> Result<PairStudy> {
    DelayOptimizer::new(cfg1, cfg2).optimize(objective)
}

/// Sizing of a reconfigurable delay line made of cascaded asymmetric
/// Mach-Zehnder interferometers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayLineSpec {
    pub delta_t: f64,
    pub wavelength: f64,
    /// Free spectral range in wavelength, 2 lambda^2 / (c delta_t) (m).
    pub fsr: f64,
    /// Minimum 3 dB bandwidth of the transmittance, 1.27 FSR / 2 (m).
    pub bw_3db: f64,
    /// Rest-state delay tau_0 at the centre of the tunable range (s).
    pub bias_delay: f64,
    /// Arm length difference v_p1 (tau_max / 2 - tau_0) (m).
    pub arm_length_difference: f64,
}

pub const DEFAULT_DELAY_LINE_WAVELENGTH: f64 = 1550e-9;

/// Delay line covering [tau_lo, tau_hi] for the given source.
pub fn delay_line_for_range(
    cfg: &SourceConfig,
    tau_lo: f64,
    tau_hi: f64,
    wavelength: f64,
) -> Result<DelayLineSpec> {
    let mut spec = delay_line_requirements(tau_hi - tau_lo, wavelength)?;
    spec.bias_delay = 0.5 * (tau_lo + tau_hi);
    spec.arm_length_difference =
        cfg.dispersion.group_velocity.p1 * (0.5 * cfg.tau_max() - spec.bias_delay);
    Ok(spec)
}

pub fn delay_line_requirements(delta_t: f64, wavelength: f64) -> Result<DelayLineSpec> {
    if !(delta_t > 0.0 && delta_t.is_finite()) {
        return Err(Error::Config(format!(
            "delay range must be positive, got {delta_t}"
        )));
    }
    let fsr = 2.0 * wavelength * wavelength / (CONSTANTS.c * delta_t);
    Ok(DelayLineSpec {
        delta_t,
        wavelength,
        fsr,
        bw_3db: 1.27 * fsr / 2.0,
        bias_delay: 0.0,
        arm_length_difference: 0.0,
    })
}

/// Unit-norm separable Gaussian on the given grid, used by the tests and
/// as a reference pure state.
pub fn product_gaussian(
    grid: &crate::grid::Grid,
    t0: f64,
    center: (f64, f64),
    width: (f64, f64),
) -> JointAmplitude {
    let n = grid.len();
    let f =
        |t: f64, c: f64, w: f64| (-(t - c).powi(2) / (2.0 * w * w)).exp() / (PI * w * w).powf(0.25);
    let values = (0..n * n)
        .map(|k| {
            Complex64::new(
                f(grid.t_axis[k / n], center.0, width.0) * f(grid.t_axis[k % n], center.1, width.1),
                0.0,
            )
        })
        .collect();
    JointAmplitude::new(values, Domain::Time, grid.clone(), 0.0, t0).expect("sized by construction")
}
