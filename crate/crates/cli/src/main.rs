use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use ifwm::analytic::{fit_generation_profile, overlay, Collision, ErfFit};
use ifwm::interference::{
    compare_at_configured, delay_line_for_range, optimize_delays, DelayLineSpec, Objective,
    DEFAULT_DELAY_LINE_WAVELENGTH,
};
use ifwm::io::{self, MatrixFormat, RunManifest, SweepRow};
use ifwm::jta::{simulate, simulate_with, EvolveOptions};
use ifwm::metrics::{compute_metrics, jta_to_jsa, spectral_cumulative};
use ifwm::model::SourceConfig;
use ifwm::Error;

#[derive(Parser)]
#[command(
    name = "ifwm",
    version,
    about = "Delayed-pump IFWM photon-pair source simulator"
)]
struct Cli {
    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run: metrics.json, xi_profile.csv and optional matrices
    Simulate {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long, default_value = "out")]
        out: PathBuf,
        /// Override the delay as a fraction of tau_max
        #[arg(long)]
        tau_fraction: Option<f64>,
        #[arg(long)]
        dump_jta: bool,
        #[arg(long)]
        dump_jsa: bool,
        /// Number of z snapshots for the spectrally resolved generation map
        #[arg(long)]
        snapshots: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Cjm1)]
        format: Format,
    },
    /// One metrics row per parameter value
    Sweep {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
    /// Interference between two sources
    Pair {
        #[arg(long = "c1")]
        config1: PathBuf,
        #[arg(long = "c2")]
        config2: PathBuf,
        #[arg(short = 'o', long, default_value = "out")]
        out: PathBuf,
        /// Search both delays instead of using the configured ones
        #[arg(long)]
        optimize: bool,
        #[arg(long, value_enum, default_value_t = Obj::Rhom)]
        objective: Obj,
        /// Delay-line wavelength for the sizing report (m)
        #[arg(long, default_value_t = DEFAULT_DELAY_LINE_WAVELENGTH)]
        wavelength: f64,
    },
    /// Erf fit of the cumulative generation profile
    Oracle {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        tau_fraction: Option<f64>,
    },
    /// xi and purity under joint doublings of n_t and n_z
    Convergence {
        #[arg(short = 'c', long)]
        config: PathBuf,
        #[arg(short = 'o', long, default_value = "out")]
        out: PathBuf,
        /// Number of grids; the finest is the one in the configuration
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Cjm1,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    /// Pump delay in seconds
    Tau,
    /// Pump delay as a fraction of tau_max
    TauFraction,
    TaperAmplitude,
    WidthOffset,
    HeightOffset,
    AvgPower,
}

#[derive(Clone, Copy, ValueEnum)]
enum Obj {
    Rhom,
    Hhom,
}

impl From<Obj> for Objective {
    fn from(o: Obj) -> Self {
        match o {
            Obj::Rhom => Objective::Rhom,
            Obj::Hhom => Objective::Hhom,
        }
    }
}

impl Param {
    fn apply(self, cfg: &SourceConfig, v: f64) -> SourceConfig {
        let mut c = cfg.clone();
        match self {
            Param::Tau => c.pump.tau = v,
            Param::TauFraction => c.pump.tau = v * cfg.tau_max(),
            Param::TaperAmplitude => c.geometry.taper_amplitude = v,
            Param::WidthOffset => c.geometry.width_offset = v,
            Param::HeightOffset => c.geometry.height_offset = v,
            Param::AvgPower => c.pump.avg_power = v,
        }
        c
    }
}

/// Files written so far, for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Error> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }
}

#[derive(Serialize)]
struct PairReport {
    objective: Objective,
    optimized: bool,
    v_rhom: f64,
    v_hhom: f64,
    raw_rhom: f64,
    raw_hhom: f64,
    tau1: f64,
    tau2: f64,
    tau1_over_tau_max: f64,
    tau2_over_tau_max: f64,
    shift_s: f64,
    shift_i: f64,
    delay_line: Option<DelayLineSpec>,
    candidates_file: String,
}

#[derive(Serialize)]
struct OracleReport {
    tau_over_tau_max: f64,
    analytic_l_match: f64,
    analytic_sigma_z: f64,
    analytic_delta_z: f64,
    length: f64,
    fit: ErfFit,
}

#[derive(Serialize)]
struct ConvergenceRow {
    n_t: usize,
    n_z: usize,
    xi: f64,
    purity: f64,
    xi_rel_change: Option<f64>,
    purity_rel_change: Option<f64>,
}

fn with_tau_fraction(cfg: SourceConfig, f: Option<f64>) -> SourceConfig {
    match f {
        Some(f) => cfg.with_tau_fraction(f),
        None => cfg,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let started = SystemTime::now();
    let clock = Instant::now();
    match cli.command {
        Command::Simulate {
            config,
            out,
            tau_fraction,
            dump_jta,
            dump_jsa,
            snapshots,
            format,
        } => {
            let cfg = with_tau_fraction(io::parse_config(&config)?, tau_fraction);
            let opts = EvolveOptions {
                snapshot_count: snapshots,
                ..Default::default()
            };
            let run = simulate_with(&cfg, &opts)?;
            let metrics = compute_metrics(&run.jta, &cfg)?;
            let mut o = Outputs::new(&out)?;
            io::write_metrics(&metrics, &o.path("metrics.json"))?;
            io::write_xi_profile(&run.xi, cfg.geometry.length, &o.path("xi_profile.csv"))?;
            if run.snapshots.len() >= 2 {
                let map = spectral_cumulative(&run.snapshots, false)?;
                io::write_spectral_map(&map, &o.path("spectral_map.csv"))?;
            }
            let (fmt, ext) = match format {
                Format::Cjm1 => (MatrixFormat::Cjm1, "cjm1"),
                Format::Csv => (MatrixFormat::Csv, "csv"),
            };
            if dump_jta {
                let written = io::export_matrix(&run.jta, &o.dir.join(format!("jta.{ext}")), fmt)?;
                o.files.extend(written);
            }
            if dump_jsa {
                let written = io::export_matrix(
                    &jta_to_jsa(&run.jta)?,
                    &o.dir.join(format!("jsa.{ext}")),
                    fmt,
                )?;
                o.files.extend(written);
            }
            println!(
                "xi = {:.6e}  purity = {:.6}  dlam_s = {:.4} nm  dlam_i = {:.4} nm",
                metrics.xi,
                metrics.purity,
                metrics.dlam_s * 1e9,
                metrics.dlam_i * 1e9
            );
            RunManifest::new("simulate", vec![cfg], &out, started)
                .finish(&o.files, clock.elapsed())?;
        }
        Command::Sweep {
            config,
            out,
            param,
            from,
            to,
            steps,
        } => {
            if steps == 0 || !from.is_finite() || !to.is_finite() {
                return Err(Error::Config(
                    "sweep needs finite bounds and at least one step".into(),
                ));
            }
            let mut cfg = io::parse_config(&config)?;
            cfg.numerics.snapshot_count = 0;
            let values: Vec<f64> = (0..steps)
                .map(|k| {
                    if steps == 1 {
                        from
                    } else {
                        from + (to - from) * k as f64 / (steps - 1) as f64
                    }
                })
                .collect();
            let rows: Vec<SweepRow> = values
                .par_iter()
                .map(|&v| {
                    let c = param.apply(&cfg, v);
                    let outcome = simulate(&c)
                        .and_then(|r| compute_metrics(&r.jta, &c))
                        .map_err(|e| e.to_string());
                    SweepRow { value: v, outcome }
                })
                .collect();
            let mut o = Outputs::new(&out)?;
            io::write_sweep(&rows, &o.path("sweep.csv"))?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} points, {failed} failed", rows.len());
            RunManifest::new("sweep", vec![cfg], &out, started)
                .finish(&o.files, clock.elapsed())?;
        }
        Command::Pair {
            config1,
            config2,
            out,
            optimize,
            objective,
            wavelength,
        } => {
            let c1 = io::parse_config(&config1)?;
            let c2 = io::parse_config(&config2)?;
            let study = if optimize {
                optimize_delays(&c1, &c2, objective.into())?
            } else {
                compare_at_configured(&c1, &c2, objective.into())?
            };
            let mut o = Outputs::new(&out)?;
            io::write_candidates(&study.candidates, &o.path("candidates.csv"))?;
            // A single line spanning both chosen delays; None when they coincide.
            let (lo, hi) = (
                study.optimal_tau1.min(study.optimal_tau2),
                study.optimal_tau1.max(study.optimal_tau2),
            );
            let report = PairReport {
                objective: study.objective,
                optimized: optimize,
                v_rhom: study.v_rhom,
                v_hhom: study.v_hhom,
                raw_rhom: study.raw_rhom,
                raw_hhom: study.raw_hhom,
                tau1: study.optimal_tau1,
                tau2: study.optimal_tau2,
                tau1_over_tau_max: study.optimal_tau1 / c1.tau_max(),
                tau2_over_tau_max: study.optimal_tau2 / c2.tau_max(),
                shift_s: study.shift_s,
                shift_i: study.shift_i,
                delay_line: delay_line_for_range(&c1, lo, hi, wavelength).ok(),
                candidates_file: "candidates.csv".into(),
            };
            io::write_json(&report, &o.path("pair.json"))?;
            println!(
                "V_RHOM = {:.5} (raw {:.5})  V_HHOM = {:.5} (raw {:.5})  tau = ({:.3}, {:.3}) tau_max",
                report.v_rhom,
                report.raw_rhom,
                report.v_hhom,
                report.raw_hhom,
                report.tau1_over_tau_max,
                report.tau2_over_tau_max
            );
            RunManifest::new("pair", vec![c1, c2], &out, started)
                .finish(&o.files, clock.elapsed())?;
        }
        Command::Oracle {
            config,
            out,
            tau_fraction,
        } => {
            let mut cfg = with_tau_fraction(io::parse_config(&config)?, tau_fraction);
            cfg.numerics.snapshot_count = 0;
            let run = simulate(&cfg)?;
            let fit = fit_generation_profile(&cfg, &run.xi)?;
            let col = Collision::new(&cfg);
            let length = cfg.geometry.length;
            let mut o = Outputs::new(&out)?;
            io::write_overlay(&overlay(&run.xi, &fit, length), &o.path("overlay.csv"))?;
            let report = OracleReport {
                tau_over_tau_max: cfg.pump.tau / cfg.tau_max(),
                analytic_l_match: col.l_match,
                analytic_sigma_z: col.sigma_z,
                analytic_delta_z: col.delta_z(),
                length,
                fit,
            };
            io::write_json(&report, &o.path("fit.json"))?;
            println!(
                "L_match/L = {:.4} (analytic {:.4})  dz/L = {:.4} (analytic {:.4})  reliable = {}",
                report.fit.l_match_fit / length,
                col.l_match / length,
                report.fit.delta_z_fwhm / length,
                col.delta_z() / length,
                report.fit.reliable
            );
            RunManifest::new("oracle", vec![cfg], &out, started)
                .finish(&o.files, clock.elapsed())?;
        }
        Command::Convergence {
            config,
            out,
            levels,
        } => {
            let mut cfg = io::parse_config(&config)?;
            cfg.numerics.snapshot_count = 0;
            if levels == 0 {
                return Err(Error::Config("convergence needs at least one level".into()));
            }
            let div = 1usize << (levels - 1);
            let (nt, nz) = (cfg.numerics.n_t, cfg.numerics.n_z);
            if nt % div != 0 || nz % div != 0 {
                return Err(Error::Config(format!(
                    "n_t = {nt} and n_z = {nz} cannot be halved {} times",
                    levels - 1
                )));
            }
            let mut rows: Vec<ConvergenceRow> = Vec::new();
            for j in 0..levels {
                let mut c = cfg.clone();
                c.numerics.n_t = (nt / div) << j;
                c.numerics.n_z = (nz / div) << j;
                let r = simulate(&c)?;
                let purity = ifwm::metrics::heralded_purity(&r.jta)?;
                let xi = r.jta.norm_sq;
                let prev = rows.last();
                rows.push(ConvergenceRow {
                    n_t: c.numerics.n_t,
                    n_z: c.numerics.n_z,
                    xi,
                    purity,
                    xi_rel_change: prev.map(|p| (xi - p.xi).abs() / p.xi.abs()),
                    purity_rel_change: prev.map(|p| (purity - p.purity).abs() / p.purity.abs()),
                });
            }
            println!(
                "{:>6} {:>6} {:>14} {:>10} {:>12}",
                "n_t", "n_z", "xi", "purity", "d_xi/xi"
            );
            for r in &rows {
                let d = r
                    .xi_rel_change
                    .map(|d| format!("{d:.3e}"))
                    .unwrap_or_default();
                println!(
                    "{:>6} {:>6} {:>14.6e} {:>10.6} {:>12}",
                    r.n_t, r.n_z, r.xi, r.purity, d
                );
            }
            let mut o = Outputs::new(&out)?;
            io::write_json(&rows, &o.path("convergence.json"))?;
            RunManifest::new("convergence", vec![cfg], &out, started)
                .finish(&o.files, clock.elapsed())?;
        }
    }
    Ok(())
}

/// clap only takes single-character short flags; accept `-c1`/`-c2` as
/// spellings of `--c1`/`--c2`.
fn normalize_args(args: impl Iterator<Item = String>) -> Vec<String> {
    args.map(|a| match a.as_str() {
        "-c1" => "--c1".to_string(),
        "-c2" => "--c2".to_string(),
        _ => a,
    })
    .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(normalize_args(std::env::args()));
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            })
        }
    }
}
