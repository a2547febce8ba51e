use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pscc_core::config::{Config, RefStep, WfMode};
use pscc_core::harness::{pareto_sweep, reversal_test, run, step_wf_test, sweep_grid, RunLog};
use pscc_core::output::{write_manifest, write_run, write_step_summary, write_sweep};
use pscc_core::Error;

/// Five-phase induction motor drive simulator with predictive current
/// control and closed-loop weighting-factor tuning.
#[derive(Parser)]
#[command(name = "pscc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured scenario.
    Run(Common),
    /// Fixed-weight run with one weight change (`[step_wf]`).
    StepWf(Common),
    /// Adaptive run with one index-reference change.
    StepRef(StepRefArgs),
    /// Speed reversal with adaptive and fixed weights (`[reversal]`).
    Reversal(Common),
    /// Steady-state indices over a grid of fixed weights (`[sweep]`).
    ParetoSweep(Common),
    /// Resolve and check a configuration without simulating.
    ValidateConfig(ConfigArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set scenario.duration=1.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct Common {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct StepRefArgs {
    #[command(flatten)]
    common: Common,
    /// Time of the reference change (s).
    #[arg(long, default_value_t = 1.0)]
    t_step: f64,
    /// New x–y error reference (A).
    #[arg(long)]
    gamma2: Option<f64>,
    /// New switching reference.
    #[arg(long)]
    gamma3: Option<f64>,
}

fn load(args: &ConfigArgs) -> pscc_core::Result<Config> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    Config::load(&text, &args.overrides)
}

fn finish_run(dir: &Path, cfg: &Config, log: &RunLog) -> pscc_core::Result<()> {
    write_run(dir, log)?;
    write_manifest(dir, cfg)?;
    if let Some(f) = &log.fault {
        return Err(Error::IntegrationFault { t: f.t, last_good_t: f.last_good_t });
    }
    Ok(())
}

fn execute(command: Command) -> pscc_core::Result<()> {
    match command {
        Command::Run(c) => {
            let cfg = load(&c.cfg)?;
            let log = run(&cfg)?;
            finish_run(&c.out, &cfg, &log)?;
            println!("{} blocks written to {}", log.blocks.len(), c.out.display());
        }
        Command::StepWf(c) => {
            let cfg = load(&c.cfg)?;
            let s = step_wf_test(&cfg, cfg.step_wf.pre, cfg.step_wf.post)?;
            finish_run(&c.out, &cfg, &s.log)?;
            write_step_summary(fs::File::create(c.out.join("summary.csv"))?, &s)?;
            for (i, name) in ["gamma1", "gamma2", "gamma3"].iter().enumerate() {
                println!("{name}: {:.6} -> {:.6}", s.pre.mean[i], s.post.mean[i]);
            }
        }
        Command::StepRef(a) => {
            let mut cfg = load(&a.common.cfg)?;
            if a.gamma2.is_none() && a.gamma3.is_none() {
                return Err(Error::config("step-ref", "give --gamma2 and/or --gamma3"));
            }
            cfg.scenario.mode = WfMode::Adaptive;
            cfg.scenario.wf_steps.clear();
            cfg.scenario.ref_steps = vec![RefStep { t: a.t_step, gamma2: a.gamma2, gamma3: a.gamma3 }];
            cfg.validate()?;
            let log = run(&cfg)?;
            finish_run(&a.common.out, &cfg, &log)?;
            println!("{} blocks written to {}", log.blocks.len(), a.common.out.display());
        }
        Command::Reversal(c) => {
            let cfg = load(&c.cfg)?;
            let out = reversal_test(&cfg, cfg.reversal.omega_target)?;
            write_manifest(&c.out, &cfg)?;
            finish_run(&c.out.join("adaptive"), &cfg, &out.adaptive)?;
            finish_run(&c.out.join("fixed"), &cfg, &out.fixed)?;
            let (a, f) = out.rms();
            println!("speed RMS adaptive {a:.6} rad/s, fixed {f:.6} rad/s");
        }
        Command::ParetoSweep(c) => {
            let cfg = load(&c.cfg)?;
            let grid = sweep_grid(&cfg.sweep.lambda_xy, &cfg.sweep.lambda_sc);
            let rows = pareto_sweep(&cfg, &grid, c.jobs)?;
            fs::create_dir_all(&c.out)?;
            write_sweep(fs::File::create(c.out.join("sweep.csv"))?, &rows)?;
            write_manifest(&c.out, &cfg)?;
            println!("{} grid points written to {}", rows.len(), c.out.display());
        }
        Command::ValidateConfig(a) => {
            let cfg = load(&a)?;
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::IntegrationFault { .. }) => {
            eprintln!("simulation fault: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
