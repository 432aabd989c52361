use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use riskctl::dp::EuVariant;
use riskctl::run::{run, Command, RunConfig, Solver};

const JOBS_ENV: &str = "RISKCTL_JOBS";

/// Risk-averse optimal control on grids: exponential utility and CVaR.
#[derive(Parser)]
#[command(name = "riskctl", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve and write value and policy tables.
    Solve(Args),
    /// Solve, simulate, and write samples plus summary statistics.
    Simulate(Args),
    /// Solve, simulate, and write only the summary statistics.
    Tradeoff(Args),
    /// Solve and write sublevel sets of the optimal values.
    SafeSets(Args),
    /// Curves of the one-shot quadratic example.
    Pedagogical(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Eu,
    Cvar,
    RiskNeutral,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Raw,
    Nonnegative,
}

#[derive(clap::Args, Default)]
struct Args {
    /// JSON run configuration; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// thermostat, stormwater or pedagogical.
    #[arg(long)]
    system: Option<String>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Comma-separated θ values, e.g. --theta=-5e-5,-3,-9
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Vec<f64>,
    /// Comma-separated α values.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Budget-axis cells on [0, ā].
    #[arg(long)]
    s_res: Option<usize>,
    /// Trajectories per parameter and initial condition.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial condition, coordinates separated by commas; repeat for more.
    #[arg(long, allow_hyphen_values = true)]
    x0: Vec<String>,
    /// Comma-separated safe-set thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    r: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overridden by RISKCTL_JOBS).
    #[arg(long)]
    jobs: Option<usize>,
    /// Memory budget for CVaR tables, in bytes or with a K/M/G suffix.
    #[arg(long)]
    mem_budget: Option<String>,
    /// Comma-separated certainty-equivalent prices (pedagogical).
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
}

fn parse_bytes(text: &str) -> anyhow::Result<u64> {
    let t = text.trim().trim_end_matches(['B', 'b']).trim_end_matches(['i', 'I']);
    let (digits, scale) = match t.chars().last() {
        Some('K' | 'k') => (&t[..t.len() - 1], 1u64 << 10),
        Some('M' | 'm') => (&t[..t.len() - 1], 1 << 20),
        Some('G' | 'g') => (&t[..t.len() - 1], 1 << 30),
        Some('T' | 't') => (&t[..t.len() - 1], 1 << 40),
        _ => (t, 1),
    };
    let n: f64 = digits.trim().parse().with_context(|| format!("invalid memory budget {text:?}"))?;
    if !(n >= 0.0) {
        bail!("invalid memory budget {text:?}");
    }
    Ok((n * scale as f64) as u64)
}

fn parse_point(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("invalid coordinate in --x0 {text:?}")))
        .collect()
}

fn resolve(args: Args) -> anyhow::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.system {
        config.system = s;
    }
    if let Some(s) = args.solver {
        config.solver = match s {
            SolverArg::Eu => Solver::Eu,
            SolverArg::Cvar => Solver::Cvar,
            SolverArg::RiskNeutral => Solver::RiskNeutral,
        };
    }
    if !args.theta.is_empty() {
        config.theta = args.theta;
    }
    if !args.alpha.is_empty() {
        config.alpha = args.alpha;
    }
    if let Some(v) = args.variant {
        config.variant = match v {
            VariantArg::Raw => EuVariant::Raw,
            VariantArg::Nonnegative => EuVariant::Nonnegative,
        };
    }
    if let Some(s) = args.s_res {
        config.s_res = s;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if !args.x0.is_empty() {
        config.x0 = args.x0.iter().map(|p| parse_point(p)).collect::<anyhow::Result<_>>()?;
    }
    if !args.r.is_empty() {
        config.r = args.r;
    }
    if let Some(out) = args.out {
        config.out = out;
    }
    if let Some(j) = args.jobs {
        config.jobs = Some(j);
    }
    if let Ok(text) = std::env::var(JOBS_ENV) {
        let j: usize = text
            .trim()
            .parse()
            .with_context(|| format!("{JOBS_ENV}={text:?} is not a thread count"))?;
        config.jobs = Some(j);
    }
    if let Some(m) = args.mem_budget {
        config.mem_budget = parse_bytes(&m)?;
    }
    if !args.gamma.is_empty() {
        config.gamma = args.gamma;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Tradeoff(a) => (Command::Tradeoff, a),
        Cmd::SafeSets(a) => (Command::SafeSets, a),
        Cmd::Pedagogical(a) => (Command::Pedagogical, a),
    };
    let outcome = resolve(args).and_then(|config| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(j) = config.jobs {
            pool = pool.num_threads(j);
        }
        let pool = pool.build()?;
        let report = pool.install(|| run(command, &config))?;
        Ok(report)
    });
    match outcome {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
