//! `mecsim`: single runs, V sweeps, policy comparisons and solver
//! certification for the mobile-edge computing simulator.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mec_lyapunov::experiment::{
    average_over_seeds, gnuplot_script, log_space, run_once, sweep, write_averaged, write_rows,
    SweepRow,
};
use mec_lyapunov::oracle::certify;
use mec_lyapunov::simulator::{write_diagnostics, write_trace};
use mec_lyapunov::{ConfigError, PolicyKind, SimError};

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(
    name = "mecsim",
    version,
    about = "Power/delay simulator for mobile-edge computing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one policy on one configuration.
    Run(RunArgs),
    /// Sweep V (and seeds) for one or more policies.
    Sweep(SweepArgs),
    /// Sweep V for several policies into one file for overlay plots.
    Compare(SweepArgs),
    /// Certify the slot solver against brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Config file path or preset name (default, fig4_amax8, fig4_n10).
    #[arg(long, default_value = "default")]
    config: String,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// `key=value` config override, repeatable. V and T alias the long keys;
    /// device keys apply to every device block.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policy: Option<String>,
    /// Also write the per-slot trace.
    #[arg(long)]
    trace: bool,
    /// Also write per-slot solver telemetry.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated policy names.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    /// Comma-separated V values, or `log:LO:HI:COUNT`.
    #[arg(long, default_value = "log:1e6:5e9:20")]
    v_list: String,
    /// Number of consecutive seeds starting at the master seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Also write a gnuplot script for the seed-averaged file.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Random joint power/bandwidth instances (1 to 3 devices).
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 1e-3)]
    alpha_step: f64,
    /// Random single-device frequency and power instances.
    #[arg(long, default_value_t = 1000)]
    scalar_instances: usize,
    #[arg(long, default_value_t = 10_000)]
    grid_points: usize,
}

fn parse_v_list(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: String| CliError::Config(format!("invalid `--v-list` `{s}`: {why}"));
    let values = if let Some(spec) = s.strip_prefix("log:") {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected log:LO:HI:COUNT".into()));
        }
        let lo: f64 = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
        let hi: f64 = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
        let n: usize = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(bad("need 0 < LO <= HI".into()));
        }
        log_space(lo, hi, n)
    } else {
        s.split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("{x}: {e}")))
            })
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(bad(format!("V must be positive, got {v}")));
    }
    Ok(values)
}

fn parse_policies(names: &[String]) -> Result<Vec<PolicyKind>, CliError> {
    let mut out = Vec::new();
    for name in names {
        let p: PolicyKind = name.trim().parse()?;
        if !out.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_err(path, e))
}

fn load(common: &Common) -> Result<config::Loaded, CliError> {
    let mut loaded = config::load(&common.config, &common.overrides)?;
    if let Some(seed) = common.seed {
        loaded.scenario = loaded.scenario.with_seed(seed);
    }
    fs::create_dir_all(&common.out_dir).map_err(|e| io_err(&common.out_dir, e))?;
    Ok(loaded)
}

fn write_echo(
    common: &Common,
    loaded: &config::Loaded,
    policy: Option<PolicyKind>,
) -> Result<(), CliError> {
    let path = common.out_dir.join("config_echo.toml");
    fs::write(&path, config::echo(&loaded.scenario, policy)).map_err(|e| io_err(&path, e))
}

fn cmd_run(args: RunArgs) -> Result<(), CliError> {
    let loaded = load(&args.common)?;
    let policy = match &args.policy {
        Some(name) => name.parse()?,
        None => loaded.policy.unwrap_or(PolicyKind::Lyapunov),
    };
    let sc = &loaded.scenario;
    let summary = run_once(sc, policy)?;
    let out = &args.common.out_dir;
    write_echo(&args.common, &loaded, Some(policy))?;

    let path = out.join("summary.csv");
    write_rows(create(&path)?, &[SweepRow::from_summary(policy, &summary)])
        .map_err(|e| io_err(&path, e))?;
    let stem = format!("{policy}_{}_seed{}", summary.config_hash, summary.seed);
    if args.trace {
        let path = out.join(format!("trace_{stem}.csv"));
        write_trace(create(&path)?, &summary.trace).map_err(|e| io_err(&path, e))?;
    }
    if args.diagnostics {
        let path = out.join(format!("diagnostics_{stem}.csv"));
        write_diagnostics(create(&path)?, &summary.trace).map_err(|e| io_err(&path, e))?;
    }
    println!(
        "{policy}: V = {:e}, seed = {}, avg power = {:.6} W, delay = {:.4} ms, sum of avg queues = {:.1} bits",
        summary.control_v, summary.seed, summary.avg_power, summary.delay_ms, summary.sum_avg_queue
    );
    if summary.unconverged_slots > 0 {
        eprintln!(
            "note: {} slots stopped at a solver iteration cap",
            summary.unconverged_slots
        );
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, name: &str, min_policies: usize) -> Result<(), CliError> {
    let loaded = load(&args.common)?;
    let mut policies = parse_policies(&args.policy)?;
    if policies.is_empty() {
        policies = match (min_policies, loaded.policy) {
            (1, Some(p)) => vec![p],
            (1, None) => vec![PolicyKind::Lyapunov],
            _ => vec![PolicyKind::Lyapunov, PolicyKind::LocalOnly],
        };
    }
    if policies.len() < min_policies {
        return Err(CliError::Config(format!(
            "`{name}` needs at least {min_policies} distinct policies; valid policies: {}",
            PolicyKind::ALL.map(|p| p.as_str()).join(", ")
        )));
    }
    let v_list = parse_v_list(&args.v_list)?;
    if args.seeds == 0 {
        return Err(CliError::Config("`--seeds` must be at least 1".into()));
    }
    let base = loaded.scenario.system.rng_seed;
    let seeds: Vec<u64> = (0..args.seeds).map(|k| base.wrapping_add(k)).collect();
    let rows = sweep(&loaded.scenario, &policies, &v_list, &seeds);

    let out = &args.common.out_dir;
    write_echo(&args.common, &loaded, None)?;
    let path = out.join(format!("{name}.csv"));
    write_rows(create(&path)?, &rows).map_err(|e| io_err(&path, e))?;
    let averaged = average_over_seeds(&rows);
    let avg_name = format!("{name}_avg.csv");
    let path = out.join(&avg_name);
    write_averaged(create(&path)?, &averaged).map_err(|e| io_err(&path, e))?;
    if args.gnuplot {
        let path = out.join(format!("{name}.gp"));
        fs::write(&path, gnuplot_script(&avg_name, &policies)).map_err(|e| io_err(&path, e))?;
    }

    for r in &averaged {
        println!(
            "{:<13} V = {:<10e} avg power = {:.6} W, delay = {:.4} ms",
            r.policy.as_str(),
            r.control_v,
            r.avg_power,
            r.delay_ms
        );
    }
    let failed: Vec<&SweepRow> = rows.iter().filter(|r| !r.is_ok()).collect();
    if let Some(first) = failed.first() {
        return Err(CliError::Runtime(format!(
            "{} of {} runs failed (flagged in {name}.csv); first: {} V = {:e} seed {}: {}",
            failed.len(),
            rows.len(),
            first.policy,
            first.control_v,
            first.seed,
            first.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), CliError> {
    let report = certify(
        args.seed,
        args.instances,
        args.alpha_step,
        args.scalar_instances,
        args.grid_points,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    println!(
        "joint solver: {} instances, {} failures, worst relative excess {:e}",
        report.sp2_instances, report.sp2_failures, report.sp2_worst_excess
    );
    println!(
        "optimality conditions: {} failures, max stationarity residual {:e}, max slackness {:e}",
        report.kkt_failures, report.max_kkt_residual, report.max_slackness
    );
    println!(
        "cpu frequency: {} instances, {} failures; transmit power: {} instances, {} failures",
        report.sp1_instances, report.sp1_failures, report.pwr_instances, report.pwr_failures
    );
    if report.passed() {
        println!("certification passed");
        Ok(())
    } else {
        Err(CliError::Runtime("certification failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes count as configuration errors
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a, "sweep", 1),
        Command::Compare(a) => cmd_sweep(a, "compare", 2),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
