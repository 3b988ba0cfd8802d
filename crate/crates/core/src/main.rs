use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hiercontrol::commands::{self, Overrides, Suite};
use hiercontrol::scenario::{load_scenario, Scenario};
use hiercontrol::{Error, Result};

#[derive(Parser)]
#[command(name = "hiercontrol", version, about = "Hierarchic Stackelberg-Nash control of quasi-linear parabolic equations")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct LeaderFlags {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max: Option<usize>,
}

#[derive(Args)]
struct NashFlags {
    #[arg(long)]
    nash_tol: Option<f64>,
    #[arg(long)]
    nash_damping: Option<f64>,
    #[arg(long)]
    nash_max_iter: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Full hierarchic solve: outer fixed point, leader control and follower equilibrium.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        leader: LeaderFlags,
        #[command(flatten)]
        nash: NashFlags,
        #[arg(long)]
        outer_tol: Option<f64>,
        #[arg(long)]
        max_outer: Option<usize>,
        /// Also write SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Follower Nash equilibrium for the scenario's leader control.
    Nash {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        nash: NashFlags,
    },
    /// Leader control of the problem linearized at the uncontrolled state.
    Leader {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        leader: LeaderFlags,
        #[arg(long)]
        svg: bool,
    },
    /// Dump the Carleman weights as CSV (t,x,beta,nu,rho_hat).
    Weights {
        #[arg(value_parser = ["dump"], default_value = "dump")]
        action: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        leader: LeaderFlags,
    },
    /// Oracle checks and empirical probes.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = Suite::NAMES, default_value = "all")]
        suite: String,
        /// Sample count override for the selected suites.
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        leader: LeaderFlags,
    },
}

fn scenario(common: &Common, o: Overrides) -> Result<Scenario> {
    let mut sc = load_scenario(&common.config)?;
    Overrides { seed: common.seed, ..o }.apply(&mut sc)?;
    Ok(sc)
}

fn leader_overrides(l: &LeaderFlags) -> Overrides {
    Overrides {
        epsilon: l.epsilon,
        lambda: l.lambda,
        mu: l.mu,
        cg_tol: l.cg_tol,
        cg_max: l.cg_max,
        ..Overrides::default()
    }
}

fn with_nash(o: Overrides, n: &NashFlags) -> Overrides {
    Overrides {
        nash_tol: n.nash_tol,
        nash_damping: n.nash_damping,
        nash_max_iter: n.nash_max_iter,
        ..o
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HIERCONTROL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::validation("HIERCONTROL_THREADS", format!("expected a positive integer, got '{raw}'")))?;
    let cap = std::thread::available_parallelism().map_or(n, |a| a.get().min(n));
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Solve {
            common,
            leader,
            nash,
            outer_tol,
            max_outer,
            svg,
        } => {
            let o = Overrides {
                outer_tol,
                max_outer,
                ..with_nash(leader_overrides(&leader), &nash)
            };
            let sc = scenario(&common, o)?;
            let r = commands::run_solve(&sc, &common.out, svg)?;
            println!(
                "converged in {} outer iterations; terminal norm {:.6e}, J_eps {:.6e}",
                r.iterations, r.terminal_norm, r.j_eps
            );
        }
        Command::Nash { common, nash } => {
            let sc = scenario(&common, with_nash(Overrides::default(), &nash))?;
            let n = commands::run_nash(&sc, &common.out)?;
            let s = n.summary();
            println!(
                "{} Picard iterations; first-order residuals {:.3e} {:.3e}",
                s.picard_iterations, s.residual_j1, s.residual_j2
            );
        }
        Command::Leader { common, leader, svg } => {
            let sc = scenario(&common, leader_overrides(&leader))?;
            let l = commands::run_leader(&sc, &common.out, svg)?;
            println!(
                "{} CG iterations; terminal norm {:.6e} (free {:.6e}), J_eps {:.6e}",
                l.cg_residuals.len(),
                l.terminal_norm,
                l.free_terminal_norm,
                l.j_eps_value
            );
        }
        Command::Weights { common, leader, .. } => {
            let sc = scenario(&common, leader_overrides(&leader))?;
            let rows = commands::run_weights(&sc, &common.out)?;
            println!("{rows} rows written to {}", common.out.join("weights.csv").display());
        }
        Command::Verify {
            common,
            suite,
            samples,
            leader,
        } => {
            let sc = scenario(&common, leader_overrides(&leader))?;
            let report = commands::run_verify(&sc, suite.parse()?, &common.out, samples)?;
            for (name, r) in &report.suites {
                println!(
                    "{name}: {} (worst {:.3e} over {} samples)",
                    if r.pass { "pass" } else { "FAIL" },
                    r.worst_ratio,
                    r.samples
                );
            }
            for (name, why) in &report.skipped {
                println!("{name}: skipped ({why})");
            }
            if !report.pass {
                return Err(Error::Budget("at least one verification suite failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
