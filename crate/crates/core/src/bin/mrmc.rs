use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use mrmc::experiments::{self, BaselineKind, ExperimentSpec, SweepRow, SweepVar};
use mrmc::optimizer::{bcd_ap_mrmc, RunOptions};
use mrmc::{oracles, Scenario, SystemConfig};

#[derive(Parser)]
#[command(name = "mrmc", version, about = "Radar code and full-duplex MU-MIMO precoder co-design")]
struct Cli {
    /// Override a config key, e.g. `--set k=4 --set sigma2_si=-30dB`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Record wall-clock seconds in CSV output (off keeps output byte-identical).
    #[arg(long, value_enum, default_value_t = Toggle::Off, global = true)]
    timing: Toggle,

    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise one channel realisation and write the per-iteration trace.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "run.csv")]
        out: PathBuf,
    },
    /// Monte Carlo sweep over one parameter.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// snr_r | cnr | sigma2_si | eta2_csi | none
        #[arg(long, default_value = "none")]
        sweep: String,
        /// Comma-separated grid (dB for snr_r, cnr, sigma2_si).
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        grid: String,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Comma-separated baselines, `all` or `none`.
        #[arg(long, default_value = "all")]
        baselines: String,
        /// Skip the joint design and run baselines only.
        #[arg(long)]
        no_codesign: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Run the oracle suite; exit code 1 if any check fails.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Print the default configuration file.
    Defaults,
}

fn load_config(path: Option<&Path>, set: &[String]) -> Result<SystemConfig> {
    let mut cfg = match path {
        Some(p) => SystemConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => SystemConfig::defaults(),
    };
    let pairs = set
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
            None => bail!("override '{s}' is not KEY=VALUE"),
        })
        .collect::<Result<Vec<_>>>()?;
    cfg.apply_overrides(&pairs)?;
    Ok(cfg)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let t = t.trim();
            let t = t.strip_suffix("dB").or_else(|| t.strip_suffix("db")).unwrap_or(t);
            t.trim().parse::<f64>().with_context(|| format!("bad grid value '{t}'"))
        })
        .collect()
}

fn parse_baselines(s: &str) -> Result<Vec<BaselineKind>> {
    match s.trim() {
        "all" => Ok(BaselineKind::ALL.to_vec()),
        "none" | "" => Ok(Vec::new()),
        list => list.split(',').map(|b| b.trim().parse::<BaselineKind>().map_err(Into::into)).collect(),
    }
}

fn run(cfg: SystemConfig, seed: Option<u64>, out: &Path, timing: bool) -> Result<()> {
    let started = experiments::unix_seconds();
    let seed = seed.unwrap_or(cfg.seed);
    let sc = Scenario::generate(&cfg, seed)?;
    let mut opts = RunOptions::from_config(&cfg);
    opts.seed = seed;
    let res = bcd_ap_mrmc(&sc, &opts)?;
    let rows: Vec<SweepRow> = res
        .report
        .records
        .iter()
        .map(|r| SweepRow {
            sweep_var: "iteration".into(),
            value: r.ell as f64,
            design: "co-design".into(),
            trial: 0,
            i_cwsm: r.i_cwsm,
            i_fd: f64::NAN,
            min_rate_slack: r.slacks.rate,
            iterations: r.ell,
            seconds: r.seconds,
        })
        .collect();
    let extra = serde_json::json!({
        "seed": seed,
        "final_i_cwsm": res.i_cwsm,
        "final_i_fd": res.rates.i_fd(&cfg),
        "termination": res.report.termination,
        "best_iteration": res.report.best_ell,
        "outer_iterations": res.report.outer_iterations,
        "dual_iterations": res.report.dual_iterations,
        "radar_fallbacks": res.report.radar_fallbacks,
        "rescaled": res.report.rescaled,
    });
    experiments::write_results(out, &cfg, None, &rows, timing, started, extra)?;
    println!(
        "I_CWSM = {:.6}  I_FD = {:.6}  after {} outer iterations ({:?})",
        res.i_cwsm,
        res.rates.i_fd(&cfg),
        res.report.outer_iterations,
        res.report.termination
    );
    Ok(())
}

fn verify(seed: u64) -> bool {
    let reports = oracles::run_suite(seed);
    let mut ok = true;
    for r in &reports {
        println!(
            "{} {:<40} err {:.3e} tol {:.1e} [{}]",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.max_rel_error,
            r.tolerance,
            r.instance
        );
        ok &= r.pass;
    }
    ok
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let timing = cli.timing == Toggle::On;
    match cli.cmd {
        Command::Run { config, seed, out } => {
            let cfg = load_config(config.as_deref(), &cli.set)?;
            run(cfg, seed, &out, timing)?;
        }
        Command::Sweep { config, sweep, grid, trials, baselines, no_codesign, seed, out } => {
            let cfg = load_config(config.as_deref(), &cli.set)?;
            let spec = ExperimentSpec {
                sweep: sweep.parse::<SweepVar>()?,
                grid: parse_grid(&grid)?,
                trials,
                baselines: parse_baselines(&baselines)?,
                codesign: !no_codesign,
                master_seed: seed.unwrap_or(cfg.seed),
            };
            let started = experiments::unix_seconds();
            let rows = experiments::run_sweep(&cfg, &spec)?;
            experiments::write_results(&out, &cfg, Some(&spec), &rows, timing, started, serde_json::Value::Null)?;
            for s in experiments::summarize(&rows) {
                println!(
                    "{} = {:>7}  {:<18} I_CWSM {:.4} ± {:.4}  I_FD {:.4}  ({} failed)",
                    spec.sweep.name(),
                    s.value,
                    s.design,
                    s.mean_cwsm,
                    s.se_cwsm,
                    s.mean_fd,
                    s.failed
                );
            }
            info!("wrote {}", out.display());
        }
        Command::Verify { seed } => {
            return Ok(if verify(seed) { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Defaults => print!("{}", SystemConfig::defaults().to_toml_string()),
    }
    Ok(ExitCode::SUCCESS)
}
