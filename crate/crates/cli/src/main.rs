//! Command-line front end for the nodal Monte Carlo laboratory.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical or validation
//! failure. Every output artifact carries the resolved configuration,
//! the master seed and a fingerprint; identical configurations produce
//! byte-identical outputs regardless of worker count.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{build_ensemble, RunConfig, UsageError, SEED_ENV};
use nodal_mc::ensembles::{
    export_sample, lag_covariance_plane, lag_covariance_torus, row_lag_covariance_sphere,
    sample_arw, sample_bandlimited_torus, sample_rwm_plane, sample_sphere, EnsembleDescriptor,
    FieldSample, PointSampler,
};
use nodal_mc::grid::GridGeometry;
use nodal_mc::laws::SeedStream;
use nodal_mc::mcstats::{
    distribution_compare, locality_check, mc_expectation, variance_scan, ExperimentSpec,
    MCSummary, Measurement,
};
use nodal_mc::nodal::{export_contours, small_ball_envelope, small_ball_probability};
use nodal_mc::special::{bessel_j, isotropic_kernel, kac_rice_density, legendre_p, KernelSpec};
use nodal_mc::spectra::{annulus_points, annulus_volume_estimate, circle_points, sphere_degree};
use output::Report;

#[derive(Parser)]
#[command(
    name = "nodal-mc",
    version,
    about = "Monte Carlo laboratory for nodal sets of random band-limited fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Flat key=value config file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (also settable via NODAL_MC_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replicate parallelism (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json, csv or table
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug, Default)]
struct EnsembleArgs {
    /// Ensemble family: arw, sphere, torus-window or rwm
    #[arg(long)]
    ensemble: Option<String>,
    /// ARW energy level (|mu|^2 = n)
    #[arg(long)]
    n: Option<u64>,
    /// Spherical harmonic degree
    #[arg(long)]
    ell: Option<u32>,
    /// Window top frequency
    #[arg(long = "T")]
    t: Option<f64>,
    /// Window width
    #[arg(long)]
    rho: Option<f64>,
    /// Plane-wave count
    #[arg(long = "J")]
    j: Option<usize>,
    /// Coefficient law: gaussian, rademacher, uniform or two-point:p
    #[arg(long)]
    law: Option<String>,
    /// Sphere basis: real or complex-bernoulli
    #[arg(long)]
    basis: Option<String>,
    /// Grid size (torus/plane side; sphere theta rows, phi = 2x)
    #[arg(long)]
    grid: Option<usize>,
    /// Plane chart side length
    #[arg(long)]
    side: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form Kac-Rice nodal density of the unit-speed field
    Kacrice {
        #[command(flatten)]
        common: CommonArgs,
        /// Ambient dimension n >= 2
        #[arg(long)]
        dim: Option<usize>,
        /// Inner spectral fraction (1 = monochromatic)
        #[arg(long)]
        upsilon: Option<f64>,
    },
    /// Enumerate a frequency set and print it as JSON
    Lattice {
        #[command(flatten)]
        common: CommonArgs,
        /// ARW energy level
        #[arg(long)]
        arw: Option<u64>,
        /// Spherical degree
        #[arg(long)]
        ell: Option<u32>,
        /// Window dimension (with --T/--rho)
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long = "T")]
        t: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Synthesize one field realization and export it
    Sample {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Replicate index
        #[arg(long)]
        replicate: Option<u64>,
        /// Base path for the exported sample (header + values)
        #[arg(long)]
        export: Option<PathBuf>,
        /// Write values as flat little-endian f64 instead of CSV
        #[arg(long)]
        binary: bool,
        /// Also export contour segments as CSV
        #[arg(long)]
        contours: Option<PathBuf>,
    },
    /// Monte Carlo expectation of a nodal measurement
    Expectation {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Replicate count
        #[arg(long)]
        m: Option<u64>,
        /// Measurement: global or restricted
        #[arg(long)]
        measurement: Option<String>,
        /// Restricted-ball centre as x,y
        #[arg(long)]
        center: Option<String>,
        /// Restricted-ball radius
        #[arg(long)]
        radius: Option<f64>,
        /// Refinement ladder: true, false or auto
        #[arg(long)]
        richardson: Option<String>,
        /// Write per-replicate measurements to this CSV
        #[arg(long)]
        dump_replicates: Option<PathBuf>,
    },
    /// Two-sample comparison (KS + permutation p-value) between laws
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        m: Option<u64>,
        /// Law of side A (defaults to --law, then gaussian)
        #[arg(long)]
        law_a: Option<String>,
        /// Law of side B
        #[arg(long)]
        law_b: Option<String>,
        /// Seed of side B (defaults to seed + 1)
        #[arg(long)]
        seed_b: Option<u64>,
        #[arg(long)]
        measurement: Option<String>,
        #[arg(long)]
        center: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Variance scan over a parameter ladder (exploratory)
    VarianceScan {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        m: Option<u64>,
        /// Comma-separated ladder of n / ell / T values
        #[arg(long)]
        params: Option<String>,
    },
    /// Empirical covariance against the closed-form kernel
    CovarianceCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        m: Option<u64>,
        /// Comma-separated lags in grid steps
        #[arg(long)]
        lags: Option<String>,
    },
    /// Small-ball probability estimates with the anti-concentration envelope
    SmallBall {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        m: Option<u64>,
        /// Comma-separated thresholds tau
        #[arg(long)]
        tau: Option<String>,
        /// Evaluation point as x,y (intrinsic coordinates)
        #[arg(long)]
        point: Option<String>,
    },
    /// Global-vs-restricted locality identity on ARW batches
    LocalityCheck {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        m: Option<u64>,
        /// Ball centres per grid side (centres^2 total)
        #[arg(long)]
        centers: Option<usize>,
    },
}

enum CliError {
    Usage(String),
    Run(String),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<nodal_mc::Error> for CliError {
    fn from(e: nodal_mc::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(format!("i/o failure: {e}"))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap usage/version/help output
            let is_help = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if is_help { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

/// Builds the resolved config from (defaults <- env <- file <- flags).
fn resolve_common(
    name: &str,
    common: &CommonArgs,
    apply: impl FnOnce(&mut RunConfig),
) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.overlay("seed", common.seed);
    cfg.overlay("workers", common.workers);
    cfg.overlay("format", common.format.as_ref());
    apply(&mut cfg);
    if cfg.get("seed").is_none() {
        if let Ok(env_seed) = std::env::var(SEED_ENV) {
            let parsed: u64 = env_seed
                .parse()
                .map_err(|e| UsageError(format!("{SEED_ENV}={env_seed:?}: {e}")))?;
            cfg.set("seed", parsed);
        }
    }
    cfg.default_key("seed", 0u64);
    cfg.default_key("format", "json");
    cfg.default_key("workers", "auto");
    cfg.set("subcommand", name);
    if let Some(w) = cfg.get("workers").filter(|w| *w != "auto") {
        let workers: usize = w
            .parse()
            .map_err(|e| UsageError(format!("workers={w:?}: {e}")))?;
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    Ok(cfg)
}

fn ensemble_overlay(cfg: &mut RunConfig, args: &EnsembleArgs) {
    cfg.overlay("ensemble", args.ensemble.as_ref());
    cfg.overlay("n", args.n);
    cfg.overlay("ell", args.ell);
    cfg.overlay("t", args.t);
    cfg.overlay("rho", args.rho);
    cfg.overlay("j", args.j);
    cfg.overlay("law", args.law.as_ref());
    cfg.overlay("basis", args.basis.as_ref());
    cfg.overlay("grid", args.grid);
    cfg.overlay("side", args.side);
}

fn ensemble_defaults(cfg: &mut RunConfig) -> Result<(), CliError> {
    cfg.default_key("ensemble", "arw");
    cfg.default_key("law", "gaussian");
    match cfg.require("ensemble")? {
        "arw" => {
            cfg.default_key("n", 25u64);
            cfg.default_key("grid", 128usize);
        }
        "torus-window" => {
            cfg.default_key("t", 30.0);
            let t: f64 = cfg.parse("t")?;
            cfg.default_key("rho", t / t.ln());
            cfg.default_key("grid", 256usize);
        }
        "sphere" => {
            cfg.default_key("ell", 20u32);
            cfg.default_key("basis", "real");
            cfg.default_key("grid", 128usize);
        }
        "rwm" => {
            cfg.default_key("j", 64usize);
            cfg.default_key("side", 2.0);
            cfg.default_key("grid", 128usize);
        }
        other => return Err(UsageError(format!("unknown ensemble {other:?}")).into()),
    }
    Ok(())
}

fn summary_json(s: &MCSummary) -> serde_json::Value {
    serde_json::json!({
        "replicates": s.replicates,
        "mean": s.mean,
        "variance": s.variance,
        "std_error": s.std_error,
        "ci95": [s.ci95.0, s.ci95.1],
        "experiment_fingerprint": s.fingerprint,
    })
}

fn parse_point(raw: &str) -> Result<[f64; 2], UsageError> {
    let parts: Vec<&str> = raw.split(',').collect();
    if parts.len() != 2 {
        return Err(UsageError(format!("point {raw:?} must be x,y")));
    }
    let x = parts[0]
        .trim()
        .parse()
        .map_err(|e| UsageError(format!("point {raw:?}: {e}")))?;
    let y = parts[1]
        .trim()
        .parse()
        .map_err(|e| UsageError(format!("point {raw:?}: {e}")))?;
    Ok([x, y])
}

/// Measurement settings shared by expectation and compare.
fn resolve_measurement(
    cfg: &mut RunConfig,
    ensemble: &EnsembleDescriptor,
) -> Result<Measurement, CliError> {
    cfg.default_key("measurement", "global");
    match cfg.require("measurement")? {
        "global" => Ok(Measurement::GlobalLength),
        "restricted" => {
            cfg.default_key("center", "0.5,0.5");
            let scale = ensemble.unit_speed_scale();
            cfg.default_key("radius", 1.0 / (2.0 * scale));
            let center = parse_point(cfg.require("center")?)?;
            let radius: f64 = cfg.parse("radius")?;
            Ok(Measurement::RestrictedLength { center, radius })
        }
        other => Err(UsageError(format!(
            "unknown measurement {other:?} (expected global|restricted)"
        ))
        .into()),
    }
}

fn resolve_richardson(
    cfg: &mut RunConfig,
    ensemble: &EnsembleDescriptor,
    measurement: &Measurement,
) -> Result<bool, CliError> {
    cfg.default_key("richardson", "auto");
    let resolved = match cfg.require("richardson")? {
        "auto" => {
            matches!(measurement, Measurement::GlobalLength)
                && !matches!(ensemble, EnsembleDescriptor::Rwm { .. })
        }
        "true" => true,
        "false" => false,
        other => return Err(UsageError(format!("richardson={other:?}: expected true|false|auto")).into()),
    };
    cfg.set("richardson", resolved);
    Ok(resolved)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Kacrice { common, dim, upsilon } => {
            let cfg = resolve_common("kacrice", &common, |cfg| {
                cfg.overlay("dim", dim);
                cfg.overlay("upsilon", upsilon);
                cfg.default_key("dim", 2usize);
                cfg.default_key("upsilon", 1.0);
            })?;
            let n: usize = cfg.parse("dim")?;
            let u: f64 = cfg.parse("upsilon")?;
            let spec = KernelSpec::new(n, u).map_err(|e| CliError::Run(e.to_string()))?;
            let density = kac_rice_density(&spec);
            let formula = if u == 1.0 {
                "sqrt(4*pi/n) * Gamma((n+1)/2) / Gamma(n/2), monochromatic unit-speed field"
            } else {
                "s/sqrt(pi) * Gamma((n+1)/2) / Gamma(n/2), s^2 = (2*pi)^2/(n+2) * (1-U^(n+2))/(1-U^n)"
            };
            let report = Report {
                result: serde_json::json!({
                    "dimension": n,
                    "upsilon": u,
                    "density": density,
                    "formula": formula,
                }),
                columns: vec!["dimension".into(), "upsilon".into(), "density".into()],
                rows: vec![vec![n.to_string(), format!("{u}"), format!("{density:.12}")]],
            };
            println!("{density:.12}  [{formula}]");
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::Lattice { common, arw, ell, dim, t, rho } => {
            let cfg = resolve_common("lattice", &common, |cfg| {
                cfg.overlay("arw", arw);
                cfg.overlay("ell", ell);
                cfg.overlay("dim", dim);
                cfg.overlay("t", t);
                cfg.overlay("rho", rho);
            })?;
            let fs = if let Some(n) = cfg.get("arw") {
                let n: u64 = n.parse().map_err(|e| UsageError(format!("arw={n:?}: {e}")))?;
                circle_points(n)
            } else if let Some(l) = cfg.get("ell") {
                let l: u32 = l.parse().map_err(|e| UsageError(format!("ell={l:?}: {e}")))?;
                sphere_degree(l)
            } else if cfg.get("t").is_some() {
                let d: usize = cfg.get("dim").unwrap_or("2").parse().map_err(|e| {
                    UsageError(format!("dim: {e}"))
                })?;
                let t: f64 = cfg.parse("t")?;
                let rho: f64 = cfg.parse("rho")?;
                let fs = annulus_points(d, t, rho)?;
                let estimate = annulus_volume_estimate(d, t, rho);
                log::info!(
                    "window count {} vs volume heuristic {estimate:.1}",
                    fs.count
                );
                fs
            } else {
                return Err(UsageError(
                    "lattice needs --arw N, --ell L, or --T/--rho (with optional --dim)".into(),
                )
                .into());
            };
            let dim = fs.dim();
            let points: Vec<Vec<i64>> =
                fs.points.iter().map(|p| p[..dim].to_vec()).collect();
            let report = Report {
                result: serde_json::json!({
                    "kind": fs.kind,
                    "count": fs.count,
                    "points": points,
                }),
                columns: vec!["count".into()],
                rows: vec![vec![fs.count.to_string()]],
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::Sample { common, ensemble, replicate, export, binary, contours } => {
            let cfg = resolve_common("sample", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("replicate", replicate);
                cfg.default_key("replicate", 0u64);
            })?;
            let mut cfg = cfg;
            ensemble_defaults(&mut cfg)?;
            let (descriptor, geometry) = build_ensemble(&cfg)?;
            let seed: u64 = cfg.parse("seed")?;
            let rep: u64 = cfg.parse("replicate")?;
            let stream = SeedStream::new(seed, rep);
            let sample = synthesize(&descriptor, &geometry, stream)?;
            if let Some(base) = &export {
                export_sample(&sample, base, binary)?;
            }
            if let Some(path) = &contours {
                export_contours(&sample, path)?;
            }
            let report = Report {
                result: serde_json::json!({
                    "descriptor": sample.descriptor,
                    "geometry": sample.geometry,
                    "replicate": rep,
                    "freq_scale": sample.freq_scale,
                    "grid_mean_square": sample.mean_square(),
                    "exported": export.as_ref().map(|p| p.display().to_string()),
                    "contours": contours.as_ref().map(|p| p.display().to_string()),
                }),
                columns: vec!["replicate".into(), "grid_mean_square".into()],
                rows: vec![vec![rep.to_string(), format!("{:.6}", sample.mean_square())]],
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::Expectation {
            common,
            ensemble,
            m,
            measurement,
            center,
            radius,
            richardson,
            dump_replicates,
        } => {
            let mut cfg = resolve_common("expectation", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("measurement", measurement.as_ref());
                cfg.overlay("center", center.as_ref());
                cfg.overlay("radius", radius);
                cfg.overlay("richardson", richardson.as_ref());
                cfg.default_key("m", 200u64);
            })?;
            ensemble_defaults(&mut cfg)?;
            let (descriptor, geometry) = build_ensemble(&cfg)?;
            let meas = resolve_measurement(&mut cfg, &descriptor)?;
            let rich = resolve_richardson(&mut cfg, &descriptor, &meas)?;
            let spec = ExperimentSpec {
                ensemble: descriptor.clone(),
                geometry,
                replicates: cfg.parse("m")?,
                master_seed: cfg.parse("seed")?,
                measurement: meas.clone(),
                richardson: rich,
            };
            let reportx = mc_expectation(&spec)?;
            if let Some(path) = &dump_replicates {
                let mut text = format!(
                    "# schema=1\n# fingerprint={}\n# seed={}\nreplicate,raw,extrapolated\n",
                    cfg.fingerprint(),
                    cfg.require("seed")?
                );
                for (i, v) in reportx.raw_values.iter().enumerate() {
                    let ex = reportx
                        .extrapolated_values
                        .as_ref()
                        .map(|e| format!("{:.12e}", e[i]))
                        .unwrap_or_default();
                    text.push_str(&format!("{i},{v:.12e},{ex}\n"));
                }
                std::fs::write(path, text)?;
            }
            let reference = asymptotic_reference(&descriptor, &spec.geometry, &meas);
            let best = reportx.best();
            let report = Report {
                result: serde_json::json!({
                    "raw": summary_json(&reportx.raw),
                    "extrapolated": reportx.extrapolated.as_ref().map(summary_json),
                    "asymptotic_reference": reference,
                }),
                columns: vec![
                    "estimate".into(),
                    "mean".into(),
                    "std_error".into(),
                    "ci95_lo".into(),
                    "ci95_hi".into(),
                ],
                rows: {
                    let mut rows = vec![vec![
                        "raw".to_string(),
                        format!("{:.8}", reportx.raw.mean),
                        format!("{:.3e}", reportx.raw.std_error),
                        format!("{:.8}", reportx.raw.ci95.0),
                        format!("{:.8}", reportx.raw.ci95.1),
                    ]];
                    if let Some(ex) = &reportx.extrapolated {
                        rows.push(vec![
                            "extrapolated".to_string(),
                            format!("{:.8}", ex.mean),
                            format!("{:.3e}", ex.std_error),
                            format!("{:.8}", ex.ci95.0),
                            format!("{:.8}", ex.ci95.1),
                        ]);
                    }
                    let _ = best;
                    rows
                },
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::Compare {
            common,
            ensemble,
            m,
            law_a,
            law_b,
            seed_b,
            measurement,
            center,
            radius,
            permutations,
        } => {
            let mut cfg = resolve_common("compare", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("law-a", law_a.as_ref());
                cfg.overlay("law-b", law_b.as_ref());
                cfg.overlay("seed-b", seed_b);
                cfg.overlay("measurement", measurement.as_ref());
                cfg.overlay("center", center.as_ref());
                cfg.overlay("radius", radius);
                cfg.overlay("permutations", permutations);
                cfg.default_key("m", 500u64);
                cfg.default_key("permutations", 1999usize);
            })?;
            ensemble_defaults(&mut cfg)?;
            cfg.default_key("law-a", cfg.get("law").unwrap_or("gaussian").to_string());
            cfg.default_key("law-b", "rademacher");
            let seed: u64 = cfg.parse("seed")?;
            cfg.default_key("seed-b", seed + 1);
            let (_, geometry) = build_ensemble(&cfg)?;
            let descriptor_for = |law_key: &str, cfg: &RunConfig| -> Result<EnsembleDescriptor, CliError> {
                // validate the side law, then rebuild the descriptor with it
                config::parse_law(cfg.require(law_key)?)?;
                let mut clone = cfg.clone();
                clone.set("law", cfg.require(law_key)?);
                Ok(build_ensemble(&clone)?.0)
            };
            let desc_a = descriptor_for("law-a", &cfg)?;
            let desc_b = descriptor_for("law-b", &cfg)?;
            let meas = resolve_measurement(&mut cfg, &desc_a)?;
            let spec_a = ExperimentSpec {
                ensemble: desc_a,
                geometry,
                replicates: cfg.parse("m")?,
                master_seed: seed,
                measurement: meas.clone(),
                richardson: false,
            };
            let spec_b = ExperimentSpec {
                ensemble: desc_b,
                geometry,
                replicates: cfg.parse("m")?,
                master_seed: cfg.parse("seed-b")?,
                measurement: meas,
                richardson: false,
            };
            let perms: usize = cfg.parse("permutations")?;
            let cmp = distribution_compare(&spec_a, &spec_b, perms, seed ^ 0x5DEECE66D)?;
            let report = Report {
                result: serde_json::json!({
                    "ks_distance": cmp.ks_distance,
                    "p_value": cmp.p_value,
                    "permutations": cmp.permutations,
                    "m_a": cmp.m_a,
                    "m_b": cmp.m_b,
                    "fingerprint_a": cmp.fingerprint_a,
                    "fingerprint_b": cmp.fingerprint_b,
                }),
                columns: vec!["ks_distance".into(), "p_value".into(), "permutations".into()],
                rows: vec![vec![
                    format!("{:.6}", cmp.ks_distance),
                    format!("{:.6}", cmp.p_value),
                    cmp.permutations.to_string(),
                ]],
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::VarianceScan { common, ensemble, m, params } => {
            let mut cfg = resolve_common("variance-scan", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("params", params.as_ref());
                cfg.default_key("m", 200u64);
                cfg.default_key("params", "5,25,65");
            })?;
            ensemble_defaults(&mut cfg)?;
            let ladder = cfg.parse_list_f64("params")?;
            let mut specs = Vec::new();
            for p in &ladder {
                let mut item = cfg.clone();
                match cfg.require("ensemble")? {
                    "arw" => item.set("n", *p as u64),
                    "sphere" => item.set("ell", *p as u32),
                    "torus-window" => {
                        item.set("t", *p);
                        item.set("rho", *p / p.ln());
                    }
                    "rwm" => item.set("j", *p as usize),
                    _ => unreachable!(),
                }
                let (descriptor, geometry) = build_ensemble(&item)?;
                specs.push(ExperimentSpec {
                    ensemble: descriptor,
                    geometry,
                    replicates: cfg.parse("m")?,
                    master_seed: cfg.parse("seed")?,
                    measurement: Measurement::GlobalLength,
                    richardson: false,
                });
            }
            let scan = variance_scan(&specs)?;
            let rows: Vec<Vec<String>> = scan
                .rows
                .iter()
                .map(|r| {
                    vec![
                        format!("{}", r.parameter),
                        format!("{:.6}", r.mean),
                        format!("{:.6e}", r.variance),
                        format!("{:.3e}", r.variance_se),
                        format!("{:.4}", r.mean_v_log_v),
                    ]
                })
                .collect();
            let report = Report {
                result: serde_json::json!({
                    "rows": scan.rows,
                    "loglog_slope": scan.loglog_slope,
                }),
                columns: vec![
                    "parameter".into(),
                    "mean".into(),
                    "variance".into(),
                    "variance_se".into(),
                    "mean_v_log_v".into(),
                ],
                rows,
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::CovarianceCheck { common, ensemble, m, lags } => {
            let mut cfg = resolve_common("covariance-check", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("lags", lags.as_ref());
                cfg.default_key("m", 200u64);
                cfg.default_key("lags", "2,4,6,8,12,16");
            })?;
            ensemble_defaults(&mut cfg)?;
            let (descriptor, geometry) = build_ensemble(&cfg)?;
            let lag_steps = cfg.parse_list_usize("lags")?;
            let m: u64 = cfg.parse("m")?;
            let seed: u64 = cfg.parse("seed")?;
            let samples: Vec<FieldSample> = (0..m)
                .map(|i| synthesize(&descriptor, &geometry, SeedStream::new(seed, i)))
                .collect::<Result<_, _>>()?;
            let rows = covariance_rows(&descriptor, &geometry, &samples, &lag_steps)?;
            let report = Report {
                result: serde_json::json!({
                    "rows": rows
                        .iter()
                        .map(|r| serde_json::json!({
                            "lag_steps": r.0,
                            "distance": r.1,
                            "empirical": r.2,
                            "std_error": r.3,
                            "theory": r.4,
                        }))
                        .collect::<Vec<_>>(),
                }),
                columns: vec![
                    "lag_steps".into(),
                    "distance".into(),
                    "empirical".into(),
                    "std_error".into(),
                    "theory".into(),
                    "diff".into(),
                ],
                rows: rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.0.to_string(),
                            format!("{:.6}", r.1),
                            format!("{:+.6}", r.2),
                            format!("{:.2e}", r.3),
                            format!("{:+.6}", r.4),
                            format!("{:+.6}", r.2 - r.4),
                        ]
                    })
                    .collect(),
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::SmallBall { common, ensemble, m, tau, point } => {
            let mut cfg = resolve_common("small-ball", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("tau", tau.as_ref());
                cfg.overlay("point", point.as_ref());
                cfg.default_key("m", 4000u64);
                cfg.default_key("tau", "0.01,0.05,0.1");
                cfg.default_key("point", "0.31,0.77");
                cfg.default_key("envelope-constant", 10.0);
            })?;
            ensemble_defaults(&mut cfg)?;
            let (descriptor, _) = build_ensemble(&cfg)?;
            let pt = parse_point(cfg.require("point")?)?;
            let sampler = PointSampler::new(&descriptor, pt)?;
            let taus = cfg.parse_list_f64("tau")?;
            let m: u64 = cfg.parse("m")?;
            let seed: u64 = cfg.parse("seed")?;
            let constant: f64 = cfg.parse("envelope-constant")?;
            let mut rows = Vec::new();
            let mut json_rows = Vec::new();
            for t in &taus {
                let est = small_ball_probability(&sampler, *t, m, seed)?;
                let envelope = small_ball_envelope(*t, est.modes, constant);
                json_rows.push(serde_json::json!({
                    "tau": t,
                    "probability": est.probability,
                    "std_error": est.std_error,
                    "modes": est.modes,
                    "envelope": envelope,
                }));
                rows.push(vec![
                    format!("{t}"),
                    format!("{:.6}", est.probability),
                    format!("{:.2e}", est.std_error),
                    est.modes.to_string(),
                    format!("{:.4}", envelope),
                ]);
            }
            let report = Report {
                result: serde_json::json!({ "rows": json_rows }),
                columns: vec![
                    "tau".into(),
                    "probability".into(),
                    "std_error".into(),
                    "modes".into(),
                    "envelope".into(),
                ],
                rows,
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }

        Command::LocalityCheck { common, ensemble, m, centers } => {
            let mut cfg = resolve_common("locality-check", &common, |cfg| {
                ensemble_overlay(cfg, &ensemble);
                cfg.overlay("m", m);
                cfg.overlay("centers", centers);
                cfg.default_key("m", 50u64);
                cfg.default_key("centers", 10usize);
                cfg.default_key("ensemble", "arw");
                cfg.default_key("n", 25u64);
                cfg.default_key("grid", 256usize);
            })?;
            ensemble_defaults(&mut cfg)?;
            if cfg.require("ensemble")? != "arw" {
                return Err(UsageError("locality-check runs on the arw ensemble".into()).into());
            }
            let (descriptor, geometry) = build_ensemble(&cfg)?;
            let m: u64 = cfg.parse("m")?;
            let seed: u64 = cfg.parse("seed")?;
            let samples: Vec<FieldSample> = (0..m)
                .map(|i| synthesize(&descriptor, &geometry, SeedStream::new(seed, i)))
                .collect::<Result<_, _>>()?;
            let centers: usize = cfg.parse("centers")?;
            let rep = locality_check(&samples, centers)?;
            let report = Report {
                result: serde_json::json!({
                    "radius": rep.radius,
                    "centers": rep.centers,
                    "mean_relative_discrepancy": rep.mean_relative_discrepancy,
                    "per_sample": rep.per_sample,
                }),
                columns: vec![
                    "radius".into(),
                    "centers".into(),
                    "mean_relative_discrepancy".into(),
                ],
                rows: vec![vec![
                    format!("{:.6}", rep.radius),
                    rep.centers.to_string(),
                    format!("{:.6}", rep.mean_relative_discrepancy),
                ]],
            };
            output::emit(&cfg, &report, common.out.as_deref())?;
            Ok(())
        }
    }
}

fn synthesize(
    descriptor: &EnsembleDescriptor,
    geometry: &GridGeometry,
    stream: SeedStream,
) -> Result<FieldSample, nodal_mc::Error> {
    match descriptor {
        EnsembleDescriptor::Arw { n, law } => sample_arw(*n, *law, geometry, stream),
        EnsembleDescriptor::TorusWindow { dim, t, rho, law } => {
            sample_bandlimited_torus(*dim, *t, *rho, *law, geometry, stream)
        }
        EnsembleDescriptor::Sphere { ell, law, basis } => {
            sample_sphere(*ell, *law, geometry, stream, *basis)
        }
        EnsembleDescriptor::Rwm { j, law } => sample_rwm_plane(*j, geometry, stream, *law),
        EnsembleDescriptor::Synthetic { .. } => Err(nodal_mc::Error::InvalidExperiment(
            "synthetic descriptors cannot be drawn".into(),
        )),
    }
}

type CovRow = (usize, f64, f64, f64, f64);

fn covariance_rows(
    descriptor: &EnsembleDescriptor,
    geometry: &GridGeometry,
    samples: &[FieldSample],
    lag_steps: &[usize],
) -> Result<Vec<CovRow>, CliError> {
    let mut rows = Vec::new();
    match (descriptor, geometry) {
        (EnsembleDescriptor::Arw { n, .. }, GridGeometry::Torus2 { n: grid }) => {
            let fs = circle_points(*n);
            for &k in lag_steps {
                let est = lag_covariance_torus(samples, [0, k])?;
                let r = k as f64 / *grid as f64;
                let exact = fs
                    .points2()
                    .map(|p| (2.0 * std::f64::consts::PI * p[1] as f64 * r).cos())
                    .sum::<f64>()
                    / fs.count as f64;
                rows.push((k, r, est.mean, est.std_error, exact));
            }
        }
        (EnsembleDescriptor::TorusWindow { t, rho, .. }, GridGeometry::Torus2 { n: grid }) => {
            let kernel = KernelSpec::new(2, 1.0 - rho / t).map_err(|e| CliError::Run(e.to_string()))?;
            for &k in lag_steps {
                let est = lag_covariance_torus(samples, [0, k])?;
                let r = k as f64 / *grid as f64;
                let theory = isotropic_kernel(&kernel, t * r)?;
                rows.push((k, r, est.mean, est.std_error, theory));
            }
        }
        (EnsembleDescriptor::Sphere { ell, .. }, GridGeometry::Sphere { n_theta, .. }) => {
            let row = n_theta / 2;
            for &k in lag_steps {
                let (est, d) = row_lag_covariance_sphere(samples, row, k)?;
                let theory = legendre_p(*ell, d.cos()).map_err(|e| CliError::Run(e.to_string()))?;
                rows.push((k, d, est.mean, est.std_error, theory));
            }
        }
        (EnsembleDescriptor::Rwm { .. }, GridGeometry::PlaneChart { n, side }) => {
            let h = side / (*n as f64 - 1.0);
            for &k in lag_steps {
                let est = lag_covariance_plane(samples, k)?;
                let r = k as f64 * h;
                let theory = bessel_j(0.0, 2.0 * std::f64::consts::PI * r)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                rows.push((k, r, est.mean, est.std_error, theory));
            }
        }
        _ => {
            return Err(UsageError("covariance-check: unsupported ensemble/grid pairing".into()).into())
        }
    }
    Ok(rows)
}

fn asymptotic_reference(
    descriptor: &EnsembleDescriptor,
    geometry: &GridGeometry,
    measurement: &Measurement,
) -> Option<f64> {
    if !matches!(measurement, Measurement::GlobalLength) {
        return None;
    }
    let upsilon = match descriptor {
        EnsembleDescriptor::TorusWindow { t, rho, .. } => 1.0 - rho / t,
        _ => 1.0,
    };
    let spec = KernelSpec::new(2, upsilon).ok()?;
    Some(kac_rice_density(&spec) * descriptor.unit_speed_scale() * geometry.volume())
}
