//! Acceptance criteria for the simulator, one PASS/FAIL line per criterion
//! followed by the individual checks behind it.
//!
//! Some checks are known to disagree with the reference values. They are
//! listed with `Expect::KnownFailure` and still print FAIL. The process exits
//! non-zero when any check lands on the other side of its expectation, so a
//! regression in a passing check and an unexplained improvement in a failing
//! one both stop the run.
//!
//! Grids: the purity reference uses the default 512 x 512, n_z = 2000. Delay
//! and power sweeps use 256 x 256, n_z = 2000 and pair studies 128 x 128,
//! n_z = 1000; criterion 10 checks that these reductions move xi and purity
//! by less than 1e-3 relative at the reference point.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ifwm::analytic::{fit_generation_profile, Collision};
use ifwm::interference::{
    delay_line_requirements, hhom_visibility, DelayOptimizer, Objective, PairStudy,
};
use ifwm::jta::{
    evolve_jta, perturbative_oracle, simulate, source_term, source_term_spectral, Domain,
};
use ifwm::metrics::{
    analytic_arrival_times, arrival_times, compute_metrics, heralded_purity, MetricsReport,
};
use ifwm::model::{reference_config, SourceConfig, CONSTANTS};
use ifwm::pump::{grid_for, initial_envelopes, propagate_pumps};

const REFERENCE_GRID: (usize, usize) = (512, 2000);
const SWEEP_GRID: (usize, usize) = (256, 2000);
const PAIR_GRID: (usize, usize) = (128, 1000);

const MW: f64 = 1e-3;
const NM: f64 = 1e-9;
const UM: f64 = 1e-6;

#[derive(Clone, Copy, PartialEq)]
enum Expect {
    Pass,
    /// Disagrees with the reference value; analysed in the decisions log.
    KnownFailure,
}

struct Check {
    label: String,
    passed: bool,
    expect: Expect,
}

struct Criterion {
    id: u32,
    title: &'static str,
    checks: Vec<Check>,
    started: Instant,
}

impl Criterion {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            checks: Vec::new(),
            started: Instant::now(),
        }
    }

    fn check(&mut self, label: String, passed: bool, expect: Expect) {
        self.checks.push(Check {
            label,
            passed,
            expect,
        });
    }

    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64, expect: Expect) {
        let passed = (value - target).abs() <= tol;
        self.check(
            format!("{what} = {value:.4} (target {target} +/- {tol})"),
            passed,
            expect,
        );
    }

    fn at_least(&mut self, what: &str, value: f64, bound: f64, expect: Expect) {
        self.check(
            format!("{what} = {value:.5} (>= {bound})"),
            value >= bound,
            expect,
        );
    }

    fn at_most(&mut self, what: &str, value: f64, bound: f64, expect: Expect) {
        self.check(
            format!("{what} = {value:.3e} (<= {bound:e})"),
            value <= bound,
            expect,
        );
    }

    /// Prints the criterion and returns the number of unexpected outcomes.
    fn report(self) -> usize {
        let ok = self.checks.iter().all(|c| c.passed);
        println!(
            "{} criterion {:>2}: {} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.started.elapsed().as_secs_f64()
        );
        let mut surprises = 0;
        for c in &self.checks {
            let note = match (c.passed, c.expect) {
                (true, Expect::Pass) => "ok",
                (false, Expect::KnownFailure) => "known deviation",
                (false, Expect::Pass) => {
                    surprises += 1;
                    "UNEXPECTED FAILURE"
                }
                (true, Expect::KnownFailure) => {
                    surprises += 1;
                    "UNEXPECTED PASS"
                }
            };
            println!(
                "       {} {}  [{note}]",
                if c.passed { "pass" } else { "FAIL" },
                c.label
            );
        }
        surprises
    }
}

fn on_grid(mut cfg: SourceConfig, (n_t, n_z): (usize, usize)) -> SourceConfig {
    cfg.numerics.n_t = n_t;
    cfg.numerics.n_z = n_z;
    cfg.numerics.snapshot_count = 0;
    cfg
}

fn tapered(dw: f64) -> SourceConfig {
    let mut c = reference_config();
    c.geometry.taper_amplitude = dw;
    c
}

fn metrics(cfg: &SourceConfig) -> MetricsReport {
    let run = simulate(cfg).expect("simulation");
    compute_metrics(&run.jta, cfg).expect("metrics")
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::new(1, "reference purity (dw = 0, tau = tau_max/2, 1 mW, 512^2)");
    let cfg = on_grid(reference_config().with_tau_fraction(0.5), REFERENCE_GRID);
    let m = metrics(&cfg);
    c.within("purity", m.purity, 0.998, 0.005, Expect::Pass);
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::new(2, "purity versus taper amplitude at tau = tau_max/2");
    for (dw, target, tol) in [(0.08, 0.98, 0.01), (0.25, 0.91, 0.02)] {
        let m = metrics(&on_grid(
            tapered(dw * UM).with_tau_fraction(0.5),
            SWEEP_GRID,
        ));
        c.within(
            &format!("purity at dw = {dw} um"),
            m.purity,
            target,
            tol,
            Expect::Pass,
        );
    }
    c
}

/// Mean Signal and Idler shifts (nm) over tau/tau_max in `fractions`.
fn tau_sweep(base: &SourceConfig, fractions: &[f64]) -> Vec<(f64, f64)> {
    fractions
        .iter()
        .map(|&f| {
            let m = metrics(&on_grid(base.with_tau_fraction(f), SWEEP_GRID));
            (m.dlam_s / NM, m.dlam_i / NM)
        })
        .collect()
}

fn criterion_3() -> Criterion {
    let mut c = Criterion::new(3, "tuning range and monotone tuning in tau");
    let fractions: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
    for (dw, target, tol) in [(0.08, 2.0, 0.5), (0.25, 6.5, 1.0)] {
        let shifts = tau_sweep(&tapered(dw * UM), &fractions);
        let s: Vec<f64> = shifts.iter().map(|p| p.0).collect();
        let range = s[s.len() - 1] - s[0];
        c.within(
            &format!("Signal tuning range at dw = {dw} um (nm)"),
            range,
            target,
            tol,
            Expect::KnownFailure,
        );
        let monotone = s.windows(2).all(|w| w[1] > w[0]);
        c.check(
            format!("Signal shift increases with tau at dw = {dw} um: {s:.3?}"),
            monotone,
            Expect::Pass,
        );
    }
    c
}

fn criterion_4() -> Criterion {
    let mut c = Criterion::new(4, "generation localization from the erf fit (dw = 0.1 um)");
    let base = tapered(0.1 * UM);
    let length = base.geometry.length;
    for f in [0.25, 0.5, 0.75] {
        let cfg = on_grid(base.with_tau_fraction(f), SWEEP_GRID);
        let run = simulate(&cfg).expect("simulation");
        let fit = fit_generation_profile(&cfg, &run.xi).expect("fit");
        c.within(
            &format!(
                "L_match/L at tau/tau_max = {f} (fit reliable: {})",
                fit.reliable
            ),
            fit.l_match_fit / length,
            f,
            0.02,
            Expect::Pass,
        );
        if f == 0.5 {
            let analytic = Collision::new(&cfg).delta_z() / length;
            c.within(
                &format!(
                    "Delta_z/L at tau/tau_max = 0.5 (analytic sqrt(2) L_wp/L = {analytic:.4})"
                ),
                fit.delta_z_fwhm / length,
                0.21,
                0.02,
                Expect::KnownFailure,
            );
        }
    }
    c
}

fn criterion_5() -> Criterion {
    let mut c = Criterion::new(
        5,
        "absolute pair probability and its power scaling (dw = 0, tau = tau_max/2)",
    );
    let at = |p: f64| {
        let mut cfg = reference_config().with_tau_fraction(0.5);
        cfg.pump.avg_power = p * MW;
        metrics(&on_grid(cfg, SWEEP_GRID)).xi
    };
    let xi1 = at(1.0);
    c.check(
        format!("xi(1 mW) = {xi1:.4} (in [0.05, 0.2])"),
        (0.05..=0.2).contains(&xi1),
        Expect::Pass,
    );
    let low: Vec<(f64, f64)> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&p| (p, at(p) / (p * p)))
        .collect();
    let mean = low.iter().map(|v| v.1).sum::<f64>() / low.len() as f64;
    let spread = low
        .iter()
        .map(|v| (v.1 / mean - 1.0).abs())
        .fold(0.0, f64::max);
    c.at_most(
        "max deviation of xi/P^2 from its mean over 0.05-0.2 mW",
        spread,
        0.005,
        Expect::Pass,
    );
    let ratio = at(2.0) / xi1;
    c.within("xi(2 mW)/xi(1 mW)", ratio, 2.5, 0.5, Expect::KnownFailure);
    c
}

fn criterion_6() -> Criterion {
    let mut c = Criterion::new(6, "identical-source HHOM visibility");
    let cfg = on_grid(tapered(0.25 * UM).with_tau_fraction(0.5), SWEEP_GRID);
    let phi = simulate(&cfg).expect("simulation").jta;
    let v = hhom_visibility(&phi, &phi).expect("visibility");
    c.within("V_HHOM at dw = 0.25 um", v, 0.93, 0.02, Expect::Pass);

    let mut rng = ChaCha8Rng::seed_from_u64(0x1f3d);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut cfg = reference_config().with_tau_fraction(rng.gen_range(0.1..0.9));
        cfg.geometry.taper_amplitude = rng.gen_range(0.0..0.25) * UM;
        cfg.geometry.height_offset = rng.gen_range(-2.0..2.0) * NM;
        cfg.geometry.width_offset = rng.gen_range(-30.0..30.0) * NM;
        cfg.pump.avg_power = rng.gen_range(0.2..2.0) * MW;
        let phi = simulate(&on_grid(cfg, (64, 400))).expect("simulation").jta;
        let d = (hhom_visibility(&phi, &phi).unwrap() - heralded_purity(&phi).unwrap()).abs();
        worst = worst.max(d);
    }
    c.at_most(
        "max |V_HHOM(phi, phi) - purity(phi)| over 20 random states",
        worst,
        1e-9,
        Expect::Pass,
    );
    c
}

fn pair_study(cfg1: SourceConfig, cfg2: SourceConfig) -> PairStudy {
    DelayOptimizer::new(&on_grid(cfg1, PAIR_GRID), &on_grid(cfg2, PAIR_GRID))
        .optimize(Objective::Rhom)
        .expect("pair study")
}

fn criterion_7() -> Criterion {
    let mut c = Criterion::new(
        7,
        "height-error study (dw = 0.25 um, RHOM-optimized delays)",
    );
    let base = tapered(0.25 * UM);
    let with_height = |dh: f64| {
        let mut b = base.clone();
        b.geometry.height_offset = dh * NM;
        pair_study(base.clone(), b)
    };
    let equal = with_height(0.0);
    let one = with_height(1.0);
    c.within(
        "raw V_RHOM at |dh| = 1 nm",
        one.raw_rhom,
        0.89,
        0.05,
        Expect::KnownFailure,
    );
    c.within(
        "raw V_HHOM at |dh| = 1 nm",
        one.raw_hhom,
        0.81,
        0.05,
        Expect::Pass,
    );
    c.at_least(
        "optimized V_RHOM at |dh| = 1 nm",
        one.v_rhom,
        0.995,
        Expect::Pass,
    );
    let degradation = (equal.v_hhom - one.v_hhom) / equal.v_hhom;
    c.check(
        format!(
            "optimized V_HHOM degradation at |dh| = 1 nm = {:.3}% (< 0.5%; equal heights {:.4}, 1 nm {:.4})",
            100.0 * degradation,
            equal.v_hhom,
            one.v_hhom
        ),
        degradation < 0.005,
        Expect::Pass,
    );
    let far = with_height(4.3);
    c.check(
        format!(
            "optimized V_RHOM at |dh| = 4.3 nm = {:.4} (> 0.95; delays {:.3}, {:.3} tau_max)",
            far.v_rhom,
            far.optimal_tau1 / base.tau_max(),
            far.optimal_tau2 / base.tau_max()
        ),
        far.v_rhom > 0.95,
        Expect::KnownFailure,
    );
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::new(8, "width-error study (dw = 0.1 um, RHOM-optimized delays)");
    let base = tapered(0.1 * UM);
    let tau_max = base.tau_max();
    let mut taus = Vec::new();
    let mut last = None;
    for d in [0.0, 15.0, 30.0, 45.0, 60.0] {
        let (mut a, mut b) = (base.clone(), base.clone());
        a.geometry.width_offset = -0.5 * d * NM;
        b.geometry.width_offset = 0.5 * d * NM;
        let s = pair_study(a, b);
        taus.push((d, s.optimal_tau1 / tau_max, s.optimal_tau2 / tau_max));
        last = Some(s);
    }
    let s = last.expect("studies ran");
    c.at_least("optimized V_RHOM at 60 nm", s.v_rhom, 0.99, Expect::Pass);
    c.at_least("optimized V_HHOM at 60 nm", s.v_hhom, 0.97, Expect::Pass);
    c.within(
        "raw V_RHOM at 60 nm",
        s.raw_rhom,
        0.92,
        0.05,
        Expect::KnownFailure,
    );
    c.within("raw V_HHOM at 60 nm", s.raw_hhom, 0.88, 0.05, Expect::Pass);
    let falling = taus.windows(2).all(|w| w[1].1 < w[0].1);
    let rising = taus.windows(2).all(|w| w[1].2 > w[0].2);
    let table: Vec<String> = taus
        .iter()
        .map(|(d, a, b)| format!("{d}: ({a:.3}, {b:.3})"))
        .collect();
    c.check(
        format!(
            "tau1 decreases and tau2 increases with width difference [{}]",
            table.join(", ")
        ),
        falling && rising,
        Expect::KnownFailure,
    );
    let split = taus.windows(2).all(|w| w[1].2 - w[1].1 > w[0].2 - w[0].1);
    c.check(
        "tau2 - tau1 increases with width difference".into(),
        split,
        Expect::Pass,
    );
    c
}

fn criterion_9() -> Criterion {
    let mut c = Criterion::new(
        9,
        "XPM tunability slopes and energy-conservation deviation (dw = 0.25 um)",
    );
    let base = tapered(0.25 * UM);
    let powers = [0.5, 1.0, 2.0, 3.0];
    let mut range_s = Vec::new();
    let mut range_i = Vec::new();
    for p in powers {
        let mut cfg = base.clone();
        cfg.pump.avg_power = p * MW;
        let ends = tau_sweep(&cfg, &[0.0, 1.0]);
        range_s.push(ends[1].0 - ends[0].0);
        range_i.push((ends[1].1 - ends[0].1).abs());
    }
    let (ks, ki) = (slope(&powers, &range_s), slope(&powers, &range_i));
    c.within(
        &format!("Signal d(range)/dP (nm/mW; ranges {range_s:.3?})"),
        ks,
        0.26,
        0.08,
        Expect::KnownFailure,
    );
    c.within(
        &format!("Idler d(range)/dP (nm/mW; ranges {range_i:.3?})"),
        ki,
        0.33,
        0.10,
        Expect::Pass,
    );

    let mut worst: f64 = 0.0;
    for p in [0.5, 1.0] {
        for f in [0.25, 0.4, 0.55, 0.7] {
            let mut cfg = base.with_tau_fraction(f);
            cfg.pump.avg_power = p * MW;
            worst = worst.max(metrics(&on_grid(cfg, SWEEP_GRID)).ec_deviation.abs());
        }
    }
    c.at_most(
        "max |lambda_i - lambda_i,EC| (nm) for P <= 1 mW, tau in [0.25, 0.7] tau_max",
        worst / NM,
        0.1,
        Expect::Pass,
    );
    let mut cfg = base.with_tau_fraction(0.0);
    cfg.pump.avg_power = 2.0 * MW;
    let high = metrics(&on_grid(cfg, SWEEP_GRID)).ec_deviation.abs() / NM;
    c.within(
        "|lambda_i - lambda_i,EC| at 2 mW, tau = 0 (nm)",
        high,
        1.0,
        0.5,
        Expect::KnownFailure,
    );
    c
}

fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
        / scale
}

fn criterion_10() -> Criterion {
    let mut c = Criterion::new(10, "numerical property suite");

    let cfg = on_grid(tapered(0.25 * UM).with_tau_fraction(0.3), (128, 500));
    let phi = simulate(&cfg).expect("simulation").jta;
    let jsa = phi.to_domain(Domain::Frequency);
    let back = jsa.to_domain(Domain::Time);
    let p = [
        phi.integrated_norm(),
        jsa.integrated_norm(),
        back.integrated_norm(),
    ];
    let parseval = p.iter().map(|x| (x / p[0] - 1.0).abs()).fold(0.0, f64::max);
    c.at_most(
        "Parseval, time -> frequency -> time",
        parseval,
        1e-10,
        Expect::Pass,
    );

    let small = on_grid(tapered(0.25 * UM).with_tau_fraction(0.4), (64, 500));
    let trace = propagate_pumps(&small, &initial_envelopes(&small).unwrap()).unwrap();
    let grid = grid_for(&small).unwrap();
    let mid = &trace.midpoints[trace.midpoints.len() / 3];
    let d = source_term(mid, &grid, 1.34, 0.7);
    let s = source_term_spectral(mid, &grid, 1.34, 0.7);
    let max = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = d
        .iter()
        .zip(&s)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / max;
    c.at_most(
        "diagonal versus spectral source term (max relative)",
        err,
        1e-10,
        Expect::Pass,
    );

    let mut lin = small.clone();
    lin.numerics.xpm_spm_enabled = false;
    let trace = propagate_pumps(&lin, &initial_envelopes(&lin).unwrap()).unwrap();
    let a = perturbative_oracle(&lin, &trace).unwrap();
    let b = evolve_jta(&lin, &trace).unwrap().jta;
    c.at_most(
        "perturbative oracle versus split-step solver, 64^2",
        rel_diff(&b.values, &a.values),
        1e-6,
        Expect::Pass,
    );

    let mut r1 = small.clone();
    r1.geometry.height_offset = 1.5 * NM;
    let mut r2 = r1.clone();
    r2.mismatch.distribution = [0.3, 0.2, -0.3, -0.2];
    let m1 = simulate(&r1).unwrap().jta;
    let m2 = simulate(&r2).unwrap().jta;
    let peak = m1.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let worst = m1
        .values
        .iter()
        .zip(&m2.values)
        .map(|(x, y)| (x.norm() - y.norm()).abs())
        .fold(0.0, f64::max)
        / peak;
    c.at_most(
        "|JTA| under redistribution of the mismatch among the fields",
        worst,
        1e-8,
        Expect::Pass,
    );

    let reference = on_grid(reference_config().with_tau_fraction(0.5), REFERENCE_GRID);
    let fine = simulate(&reference).unwrap().jta;
    let mut doubled = reference.clone();
    doubled.numerics.n_z *= 2;
    let finer = simulate(&doubled).unwrap().jta;
    c.at_most(
        "relative change of xi when n_z doubles from 2000 at 512^2",
        (finer.norm_sq / fine.norm_sq - 1.0).abs(),
        1e-3,
        Expect::Pass,
    );
    let purity_ref = heralded_purity(&fine).unwrap();
    for grid in [SWEEP_GRID, PAIR_GRID] {
        let phi = simulate(&on_grid(reference.clone(), grid)).unwrap().jta;
        let dxi = (phi.norm_sq / fine.norm_sq - 1.0).abs();
        let dp = (heralded_purity(&phi).unwrap() / purity_ref - 1.0).abs();
        c.at_most(
            &format!("reduced grid {grid:?} versus 512^2: max relative change of xi, purity"),
            dxi.max(dp),
            1e-3,
            Expect::Pass,
        );
    }

    let mut worst: f64 = 0.0;
    let mut per_tau = Vec::new();
    for f in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let cfg = on_grid(reference_config().with_tau_fraction(f), SWEEP_GRID);
        let t = arrival_times(&simulate(&cfg).unwrap().jta).unwrap();
        let (ts, ti) = analytic_arrival_times(&cfg);
        let t0 = cfg.pump.t0_fwhm;
        let d = ((t.mean_s - ts) / t0)
            .abs()
            .max(((t.mean_i - ti) / t0).abs());
        per_tau.push(format!("{f}: {d:.3}"));
        worst = worst.max(d);
    }
    c.at_most(
        &format!(
            "arrival means versus the walk-off formula in units of T0 [{}]",
            per_tau.join(", ")
        ),
        worst,
        0.2,
        Expect::KnownFailure,
    );

    let line = delay_line_requirements(1.47e-12, 1550e-9).unwrap();
    let fsr = 2.0 * 1550e-9f64.powi(2) / (CONSTANTS.c * 1.47e-12);
    c.check(
        format!(
            "delay line for 1.47 ps: FSR = {:.3} nm, 3 dB bandwidth = {:.3} nm (about 11 and 7)",
            line.fsr / NM,
            line.bw_3db / NM
        ),
        (line.fsr / fsr - 1.0).abs() < 1e-12
            && (line.bw_3db / (1.27 * fsr / 2.0) - 1.0).abs() < 1e-12
            && (line.fsr / NM - 11.0).abs() < 0.5
            && (line.bw_3db / NM - 7.0).abs() < 0.5,
        Expect::Pass,
    );
    c
}

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(u32, fn() -> Criterion); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut surprises = 0;
    let mut failed = 0;
    let mut ran = 0;
    for (id, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let crit = run();
        ran += 1;
        if crit.checks.iter().any(|c| !c.passed) {
            failed += 1;
        }
        surprises += crit.report();
    }
    println!(
        "acceptance: {} of {ran} criteria pass, {failed} fail, {surprises} unexpected outcomes",
        ran - failed
    );
    if surprises == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
