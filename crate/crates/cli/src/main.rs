//! `cim`: generate Ising instances, run simulation campaigns, sweep the
//! mean-field models, compute Wigner diagnostics, fit scaling curves, and
//! exercise the library's invariant suite.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use cim_core::campaign::{run_campaign, CampaignConfig, CampaignError};
use cim_core::instances::{gen_discrete_instance, gen_wishart_planted};
use cim_core::meanfield::{sweep_csv, threshold_sweep, SweepSettings};
use cim_core::metrics::fit_exp_sqrt;
use cim_core::qme::read_rho_snapshot;
use cim_core::wigner::{default_grid, grid_csv, reduced_and_reference, reduced_csv, wigner_from_rho};

mod selftest;

/// Exit codes: 0 ok, 2 configuration error, 3 aborted trajectories,
/// 4 resource refusal.
const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTS: u8 = 3;
const EXIT_RESOURCE: u8 = 4;

#[derive(Parser)]
#[command(name = "cim", version, about = "coherent Ising machine simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write instance files for one of the built-in ensembles.
    Gen(GenArgs),
    /// Run a campaign described by a TOML config file.
    Run(RunArgs),
    /// Threshold sweep of the mean-field models (density matrix + analytic).
    Meanfield(MeanfieldArgs),
    /// Wigner grid and reduced-profile CSVs from a density-matrix snapshot.
    Wigner(WignerArgs),
    /// Exponential scaling fits of a time-to-solution curve.
    Fit(FitArgs),
    /// Run the library invariant suite.
    Selftest,
}

#[derive(Args)]
struct GenArgs {
    /// Ensemble: discrete | wishart
    #[arg(long)]
    ensemble: String,
    #[arg(long)]
    n: usize,
    /// Density parameter of the wishart ensemble.
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the instance files.
    #[arg(long, default_value = "instances")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Campaign TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Override: model list, comma-separated.
    #[arg(long)]
    models: Option<String>,
    /// Override: instance count.
    #[arg(long)]
    count: Option<usize>,
    /// Override: runs per instance.
    #[arg(long)]
    runs: Option<u32>,
    /// Override: time horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Override: master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override: output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override: worker threads (0 = all).
    #[arg(long)]
    threads: Option<usize>,
    /// Keep going when trajectories abort.
    #[arg(long)]
    allow_aborts: bool,
}

#[derive(Args)]
struct MeanfieldArgs {
    /// Threshold range as "lo..hi" (inclusive) or "lo..hi:step".
    #[arg(long, default_value = "-5..3")]
    pthr: String,
    #[arg(long, default_value_t = 5.0)]
    g2: f64,
    #[arg(long, default_value_t = 5.0)]
    j: f64,
    /// Pump offset above threshold, p = p_thr + offset.
    #[arg(long, default_value_t = 10.0)]
    pump_offset: f64,
    #[arg(long, default_value_t = 5e-4)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    /// Photon-number cutoff of the density-matrix run.
    #[arg(long, default_value_t = 20)]
    nm: usize,
    /// Fixed-point iteration budget of the analytic branch.
    #[arg(long, default_value_t = 2000)]
    iters: u32,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WignerArgs {
    /// Density-matrix snapshot file.
    #[arg(long)]
    rho: PathBuf,
    /// Site index inside the snapshot.
    #[arg(long, default_value_t = 0)]
    site: usize,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output CSV for the full grid.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output CSV for the reduced profile and Gaussian reference.
    #[arg(long)]
    reduced: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV file with two columns: N, value (no header needed).
    #[arg(long)]
    input: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Run(args) => run_run(args),
        Command::Meanfield(args) => run_meanfield(args),
        Command::Wigner(args) => run_wigner(args),
        Command::Fit(args) => run_fit(args),
        Command::Selftest => return selftest::run(),
    };
    match code {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run_gen(args: GenArgs) -> Result<ExitCode> {
    std::fs::create_dir_all(&args.out)?;
    for idx in 0..args.count {
        let seed = args.seed.wrapping_add(idx as u64);
        let inst = match args.ensemble.as_str() {
            "discrete" => gen_discrete_instance(args.n, seed)?,
            "wishart" => gen_wishart_planted(args.n, args.alpha, seed)?,
            other => bail!("unknown ensemble '{other}' (expected discrete | wishart)"),
        };
        let path = args.out.join(format!(
            "{}_n{}_seed{seed}.txt",
            args.ensemble, args.n
        ));
        inst.write_file(&path)
            .with_context(|| format!("writing {path:?}"))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_run(args: RunArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {:?}", args.config))?;
    let mut cfg: CampaignConfig = toml::from_str(&text).context("parsing campaign config")?;
    if let Some(models) = &args.models {
        cfg.models = models
            .split(',')
            .map(parse_model)
            .collect::<Result<Vec<_>>>()?;
    }
    if let Some(count) = args.count {
        cfg.instances.count = count;
    }
    if let Some(runs) = args.runs {
        cfg.runs_per_instance = runs;
    }
    if let Some(t_end) = args.t_end {
        cfg.t_end = t_end;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.out_dir = Some(out);
    }
    if let Some(threads) = args.threads {
        cfg.threads = threads;
    } else if let Ok(v) = std::env::var("CIM_THREADS") {
        cfg.threads = v.parse().context("CIM_THREADS must be an integer")?;
    }
    cfg.allow_aborts |= args.allow_aborts;

    match run_campaign(&cfg) {
        Ok(out) => {
            for m in &out.models {
                let mv = m
                    .min_mvmts
                    .map(|(v, t)| format!(" min_mvmts={v:.4e} at t={t:.3}"))
                    .unwrap_or_default();
                println!(
                    "{:?}: Ps = {:.6} [{:.6}, {:.6}] ({} of {}){}",
                    m.model, m.ps, m.wilson_low, m.wilson_high, m.successes, m.trials, mv
                );
            }
            if let Some(d) = &out.deviations {
                println!("deviations: d1 = {:+.4e} d2 = {:+.4e} d3 = {:+.4e}", d.d1, d.d2, d.d3);
            }
            if out.aborted_total > 0 {
                eprintln!("{} trajectories aborted", out.aborted_total);
                if !cfg.allow_aborts {
                    return Ok(ExitCode::from(EXIT_ABORTS));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(CampaignError::NoGroundOracle { n, limit }) => {
            eprintln!("error: no ground-state oracle for n = {n} (exhaustive bound {limit})");
            Ok(ExitCode::from(EXIT_RESOURCE))
        }
        Err(err) => Err(err.into()),
    }
}

fn parse_model(s: &str) -> Result<cim_core::ModelKind> {
    use cim_core::ModelKind::*;
    Ok(match s.trim() {
        "skew" | "skew-gaussian" => SkewGaussian,
        "gaussian" => Gaussian,
        "gapp" => Gapp,
        "qme" | "qme-ct" => QmeCt,
        "dc-skew" | "dc-skew-gaussian" => DcSkewGaussian,
        "dc-gaussian" => DcGaussian,
        "dc-qme" => DcQme,
        other => bail!("unknown model '{other}'"),
    })
}

fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let (range, step) = match spec.split_once(':') {
        Some((r, s)) => (r, s.parse::<f64>().context("range step")?),
        None => (spec, 1.0),
    };
    let (lo, hi) = range
        .split_once("..")
        .with_context(|| format!("range '{spec}' must look like lo..hi[:step]"))?;
    let lo: f64 = lo.parse().context("range start")?;
    let hi: f64 = hi.parse().context("range end")?;
    if step <= 0.0 || hi < lo {
        bail!("empty range '{spec}'");
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    Ok((0..count).map(|i| lo + step * i as f64).collect())
}

fn run_meanfield(args: MeanfieldArgs) -> Result<ExitCode> {
    let p_thrs = parse_range(&args.pthr)?;
    let settings = SweepSettings {
        g2: args.g2,
        j: args.j,
        pump_offset: args.pump_offset,
        dt: args.dt,
        t_end: args.t_end,
        cutoff: args.nm,
        iterations: args.iters,
    };
    let rows = threshold_sweep(&p_thrs, &settings)?;
    let csv = sweep_csv(&rows);
    match args.out {
        Some(path) => {
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_wigner(args: WignerArgs) -> Result<ExitCode> {
    let (rhos, t) = read_rho_snapshot(&args.rho)
        .with_context(|| format!("reading snapshot {:?}", args.rho))?;
    let Some(rho) = rhos.get(args.site) else {
        bail!("snapshot has {} sites, requested {}", rhos.len(), args.site);
    };
    let m = rho.moments();
    let (xs, ps) = default_grid(m.mean_x, m.var_x, m.var_p, args.points);
    let grid = wigner_from_rho(rho, &xs, &ps);
    let deficit = (1.0 - grid.norm).abs();
    if deficit > 0.01 {
        eprintln!("warning: grid too small, normalization deficit {deficit:.3e}");
    }
    println!(
        "snapshot t = {t}: mean_x = {:.6}, var_x = {:.6}, skews = ({:+.5e}, {:+.5e}), norm = {:.6}",
        m.mean_x, m.var_x, m.skew_self, m.skew_cross, grid.norm
    );
    if let Some(path) = &args.out {
        std::fs::write(path, grid_csv(&grid))?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.reduced {
        let cmp = reduced_and_reference(&grid, m.mean_x, m.var_x)?;
        std::fs::write(path, reduced_csv(&grid.xs, &cmp))?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn run_fit(args: FitArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut ns = Vec::new();
    let mut vals = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split([',', ' ', '\t']).filter(|p| !p.is_empty());
        let (Some(a), Some(b)) = (parts.next(), parts.next()) else {
            continue;
        };
        if let (Ok(n), Ok(v)) = (a.parse::<f64>(), b.parse::<f64>()) {
            ns.push(n);
            vals.push(v);
        }
    }
    let fit = fit_exp_sqrt(&ns, &vals)?;
    println!(
        "exp(a + b sqrt(N)): a = {:+.6e}, b = {:+.6e}, R^2 = {:.6}",
        fit.sqrt.a, fit.sqrt.b, fit.sqrt.r_squared
    );
    println!(
        "exp(a + b N):       a = {:+.6e}, b = {:+.6e}, R^2 = {:.6}",
        fit.linear.a, fit.linear.b, fit.linear.r_squared
    );
    Ok(ExitCode::SUCCESS)
}
