//! Command-line interface. Exit codes: 0 on success/pass, 2 when an
//! experiment ran but its acceptance checks failed, 1 on usage or I/O
//! errors.

use crate::config::{BasisConfig, ExperimentConfig, MeasureConfig, MeasureKindConfig};
use crate::experiments;
use crate::io;
use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use gibbsflow_core::canonical::{density_by_inversion, sample_conditioned, CanonicalSpec};
use gibbsflow_core::dynamics::{evolve_recorded, FlowConfig, FlowState};
use gibbsflow_core::fields::read_field_csv;
use gibbsflow_core::measures::{build_ensemble, sample_gaussian, Observable};
use serde::Serialize;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_EXPERIMENT_FAILED: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gibbsflow",
    about = "Gibbs measures of the trapped 1D cubic NLS at finite truncation: \
             spectra, sampling, flow, and statistical acceptance suites",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct BasisArgs {
    /// Potential growth exponent (> 1)
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 2048)]
    grid: usize,
    /// Half extent L of the grid
    #[arg(long, default_value_t = 12.0)]
    extent: f64,
    /// Number of retained modes J
    #[arg(long, default_value_t = 32)]
    modes: usize,
}

impl BasisArgs {
    fn config(&self) -> BasisConfig {
        BasisConfig {
            s: self.s,
            grid_points: self.grid,
            half_extent: self.extent,
            n_modes: self.modes,
            fd_order: 4,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct ExperimentArgs {
    /// JSON config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of Monte Carlo samples
    #[arg(long)]
    n: Option<usize>,
    /// Base RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Force single-threaded (bit-reproducible) execution
    #[arg(long)]
    serial: bool,
    /// Report output path (stdout summary is always printed)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Eigendecompose the trapped Schrödinger operator; prints a CSV of
    /// eigenvalues and optionally writes the binary basis cache
    Spectrum {
        #[command(flatten)]
        basis: BasisArgs,
        /// Write the versioned binary basis cache here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a weighted ensemble and export it as CSV
    Sample {
        #[command(flatten)]
        basis: BasisArgs,
        /// Measure kind: gaussian | defocusing | focusing
        #[arg(long, default_value = "gaussian")]
        measure: String,
        /// Frequency cutoff Lambda
        #[arg(long, conflicts_with = "lambda_cut_mode")]
        lambda_cut: Option<f64>,
        /// Cutoff at the 1-based mode index
        #[arg(long)]
        lambda_cut_mode: Option<usize>,
        /// Focusing mass cutoff (defaults to 2 std of the renormalized mass)
        #[arg(long)]
        mass_cut: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the truncated flow from a CSV snapshot or a seeded draw
    Flow {
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long)]
        lambda_cut: Option<f64>,
        #[arg(long)]
        lambda_cut_mode: Option<usize>,
        /// Nonlinearity sign: +1 defocusing, -1 focusing
        #[arg(long, default_value = "+1", allow_hyphen_values = true)]
        sign: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Horizon T
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        /// Initial data: a field CSV path or `random:SEED`
        #[arg(long)]
        init: String,
        /// Record every k-th step into the trajectory CSV
        #[arg(long, default_value_t = 10)]
        record_every: usize,
        /// Also record per-mode magnitudes
        #[arg(long)]
        record_modes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grand-canonical invariance experiment (defaults to the defocusing
    /// desk-scale configuration)
    Invariance {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Use the focusing measure with the two-sigma mass cutoff
        #[arg(long)]
        focusing: bool,
    },
    /// Gaussian sampler moment identities
    Moments {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Tail functional-form suite
    Tails {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Density of the high-frequency renormalized mass via inversion
    CanonicalDensity {
        #[command(flatten)]
        basis: BasisArgs,
        #[arg(long, default_value_t = 0.0)]
        lambda_cut: f64,
        #[arg(long, allow_hyphen_values = true)]
        xmin: f64,
        #[arg(long, allow_hyphen_values = true)]
        xmax: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection-sample the mass-conditioned Gaussian measure
    CanonicalSample {
        #[command(flatten)]
        basis: BasisArgs,
        /// Target renormalized mass
        #[arg(long, allow_hyphen_values = true)]
        m: f64,
        /// Window half-width
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full canonical suite: density checks, window diagnostics, and the
    /// conditioned invariance run
    CanonicalSuite {
        #[command(flatten)]
        common: ExperimentArgs,
    },
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_PASS,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Spectrum { basis, out } => {
            let b = basis.config().build()?;
            let mut csv = Vec::new();
            io::write_spectrum_csv(&b, &mut csv)?;
            print!("{}", String::from_utf8(csv).expect("ascii csv"));
            if let Some(path) = out {
                gibbsflow_core::spectral::write_basis_cache(&b, &path)?;
                eprintln!("basis cache written to {}", path.display());
            }
            Ok(EXIT_PASS)
        }
        Command::Sample {
            basis,
            measure,
            lambda_cut,
            lambda_cut_mode,
            mass_cut,
            n,
            seed,
            serial,
            out,
        } => {
            let b = basis.config().build()?;
            let kind = match measure.as_str() {
                "gaussian" => MeasureKindConfig::Gaussian,
                "defocusing" => MeasureKindConfig::Defocusing,
                "focusing" => MeasureKindConfig::Focusing,
                other => bail!("unknown measure `{other}` (gaussian|defocusing|focusing)"),
            };
            let mc = MeasureConfig {
                kind,
                lambda_cut,
                lambda_cut_mode,
                mass_cut,
            };
            let spec = mc.spec(&b)?;
            let ens = build_ensemble(&b, &spec, n, seed, !serial);
            let theta = gibbsflow_core::default_theta(basis.s);
            let observables = experiments::default_observables(0, theta, spec.lambda_cut);
            let mut csv = Vec::new();
            io::write_ensemble_csv(&ens, &observables, &mut csv)?;
            io::write_output(&String::from_utf8(csv).expect("ascii csv"), out.as_deref())?;
            eprintln!(
                "n = {}, effective sample size = {:.1}",
                ens.len(),
                ens.effective_sample_size()
            );
            Ok(EXIT_PASS)
        }
        Command::Flow {
            basis,
            lambda_cut,
            lambda_cut_mode,
            sign,
            dt,
            horizon,
            init,
            record_every,
            record_modes,
            out,
        } => {
            let b = basis.config().build()?;
            let mc = MeasureConfig {
                kind: MeasureKindConfig::Gaussian,
                lambda_cut,
                lambda_cut_mode,
                mass_cut: None,
            };
            let cut = mc.resolve_lambda_cut(&b)?;
            let sgn: i8 = match sign.as_str() {
                "+1" | "1" => 1,
                "-1" => -1,
                other => bail!("sign must be +1 or -1, got `{other}`"),
            };
            let u = if let Some(seed) = init.strip_prefix("random:") {
                let seed: u64 = seed.parse().context("parsing random:SEED")?;
                let mut rng = gibbsflow_core::rng::master_stream(seed);
                sample_gaussian(&b, b.lambda_max(), &mut rng)
            } else {
                let file = std::fs::File::open(&init)
                    .with_context(|| format!("opening init snapshot {init}"))?;
                read_field_csv(&b, std::io::BufReader::new(file))?
            };
            let state = FlowState::new(u, cut, sgn);
            let theta = gibbsflow_core::default_theta(basis.s);
            let cfg = FlowConfig::new(dt, horizon);
            let (_, samples) = evolve_recorded(&state, &cfg, record_every.max(1), theta, record_modes)?;
            let mut csv = Vec::new();
            io::write_trajectory_csv(&samples, &mut csv)?;
            io::write_output(&String::from_utf8(csv).expect("ascii csv"), out.as_deref())?;
            Ok(EXIT_PASS)
        }
        Command::Invariance { common, focusing } => {
            let base = if focusing {
                ExperimentConfig::default_focusing_invariance()
            } else {
                ExperimentConfig::default_invariance()
            };
            let cfg = apply_overrides(base, &common)?;
            let report = experiments::run_invariance(&cfg)?;
            finish(report, &common)
        }
        Command::Moments { common } => {
            let cfg = apply_overrides(ExperimentConfig::default_moments(), &common)?;
            let report = experiments::run_moment_suite(&cfg)?;
            finish(report, &common)
        }
        Command::Tails { common } => {
            let cfg = apply_overrides(ExperimentConfig::default_tails(), &common)?;
            let report = experiments::run_tail_suite(&cfg)?;
            finish(report, &common)
        }
        Command::CanonicalDensity {
            basis,
            lambda_cut,
            xmin,
            xmax,
            points,
            out,
        } => {
            let b = basis.config().build()?;
            if points < 2 || xmax <= xmin {
                bail!("need points >= 2 and xmax > xmin");
            }
            let xs: Vec<f64> = (0..points)
                .map(|i| xmin + (xmax - xmin) * i as f64 / (points - 1) as f64)
                .collect();
            let curve = density_by_inversion(&b, lambda_cut, &xs)?;
            let mut csv = Vec::new();
            io::write_density_csv(&curve, &mut csv)?;
            io::write_output(&String::from_utf8(csv).expect("ascii csv"), out.as_deref())?;
            eprintln!(
                "s range [-{}, {}], step {}, sigma {}, imag residue {:.2e}, truncation tail {:.2e}",
                curve.s_max, curve.s_max, curve.s_step, curve.sigma, curve.imag_residue,
                curve.truncation_tail
            );
            Ok(EXIT_PASS)
        }
        Command::CanonicalSample {
            basis,
            m,
            eps,
            n,
            seed,
            serial,
            out,
        } => {
            let b = basis.config().build()?;
            let spec = CanonicalSpec::new(&b, m, eps, b.lambda_max())?;
            let (ens, stats) = sample_conditioned(&b, &spec, n, seed, !serial, 200_000_000)?;
            let theta = gibbsflow_core::default_theta(basis.s);
            let observables: Vec<Observable<f64>> = vec![
                Observable::ModeIntensity { j: 0 },
                Observable::SobolevSq { theta },
                Observable::RenormMass {
                    lambda_cut: b.lambda_max(),
                },
            ];
            let mut csv = Vec::new();
            io::write_ensemble_csv(&ens, &observables, &mut csv)?;
            io::write_output(&String::from_utf8(csv).expect("ascii csv"), out.as_deref())?;
            eprintln!(
                "acceptance rate {:.4} (+- {:.4}) over {} proposals",
                stats.rate(),
                stats.rate_se(),
                stats.proposed
            );
            Ok(EXIT_PASS)
        }
        Command::CanonicalSuite { common } => {
            let cfg = apply_overrides(ExperimentConfig::default_canonical(), &common)?;
            let report = experiments::run_canonical_suite(&cfg)?;
            finish(report, &common)
        }
    }
}

fn apply_overrides(
    default: ExperimentConfig,
    args: &ExperimentArgs,
) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => default,
    };
    if let Some(n) = args.n {
        cfg.n_samples = n;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.serial {
        cfg.serial = true;
    }
    Ok(cfg)
}

fn finish<P: Serialize>(report: crate::report::Report<P>, args: &ExperimentArgs) -> anyhow::Result<i32> {
    let json = report.to_json();
    match &args.out {
        Some(path) => {
            std::fs::write(path, json.as_bytes())
                .with_context(|| format!("writing report {}", path.display()))?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    println!(
        "{}: {}",
        report.experiment,
        if report.pass { "PASS" } else { "FAIL" }
    );
    Ok(if report.pass {
        EXIT_PASS
    } else {
        EXIT_EXPERIMENT_FAILED
    })
}
