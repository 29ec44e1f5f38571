use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qtransport::classical::{exact_distribution, run_tally};
use qtransport::convergence::{classical_predicate_rmse, mlqae_rmse, ConvergenceRow};
use qtransport::qae::{build_a_operator, exact_amplitude, mlqae_estimate, oracle_calls, parse_schedule, Predicate};
use qtransport::resources::{circuit_budget, full_scale_estimate};
use qtransport::transport::build_transport_circuit;
use qtransport::{Error, SimConfig, TransportProblem};
use serde_json::json;

#[derive(Parser)]
#[command(name = "qtransport", version, about = "Simulate a one-dimensional radiation-transport quantum circuit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Final-position distribution as `position,probability` CSV.
    Exact {
        #[command(flatten)]
        io: Io,
        /// Use the classical dynamic-programming oracle instead of the statevector.
        #[arg(long)]
        oracle: bool,
    },
    /// Sampled final positions as `position,count,frequency` CSV.
    Mc {
        #[command(flatten)]
        io: Io,
        #[arg(long, default_value_t = 10_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::Flowchart)]
        mode: Mode,
    },
    /// Amplitude estimate of a final-position predicate as JSON.
    Qae {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        est: Estimation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Logical-qubit counts as JSON, for `--flights N` or a problem file.
    Resources {
        #[arg(long, conflicts_with = "problem", required_unless_present = "problem")]
        flights: Option<u64>,
        #[arg(short, long)]
        problem: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// RMSE against budget for Monte Carlo and amplitude estimation, as
    /// `method,budget,rmse` CSV.
    Convergence {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        est: Estimation,
        /// Monte Carlo history counts; defaults to the amplitude-estimation budgets.
        #[arg(long, value_delimiter = ',')]
        budgets: Option<Vec<u64>>,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gate listing of the transport circuit.
    DumpCircuit {
        #[command(flatten)]
        io: Io,
    },
}

#[derive(Args)]
struct Io {
    #[arg(short, long)]
    problem: PathBuf,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Estimation {
    /// `geq:K`, `eq:V` or `region2`.
    #[arg(long, default_value = "region2")]
    predicate: String,
    /// Grover powers, `m0,m1,...` or `exp:K`.
    #[arg(long, default_value = "exp:6")]
    schedule: String,
    #[arg(long, default_value_t = 100)]
    shots_per_power: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Measure the simulated circuit.
    Circuit,
    /// Run particle histories directly.
    Flowchart,
}

#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(String, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(..) => 2,
            Failure::Lib(e) => match e {
                Error::Parse(_) | Error::InvalidArgument(_) => 2,
                Error::Capacity { .. } => 4,
                Error::InvalidPredicate(_) => 5,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lib(e) => write!(f, "{e}"),
            Failure::Io(path, e) => write!(f, "{path}: {e}"),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn load(path: &Path) -> Outcome<TransportProblem> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(path.display().to_string(), e))?;
    Ok(TransportProblem::from_json(&text)?)
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Io(path.display().to_string(), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn exact(io: &Io, oracle: bool, config: &SimConfig) -> Outcome<String> {
    let problem = load(&io.problem)?;
    let dist = if oracle {
        exact_distribution(&problem)?
    } else {
        build_transport_circuit(&problem)?.position_distribution(config)?
    };
    let mut csv = String::from("position,probability\n");
    for (x, p) in dist.probabilities().iter().enumerate() {
        writeln!(csv, "{x},{p}").unwrap();
    }
    Ok(csv)
}

fn mc(io: &Io, shots: u64, seed: u64, mode: Mode, config: &SimConfig) -> Outcome<String> {
    let problem = load(&io.problem)?;
    let counts = match mode {
        Mode::Flowchart => run_tally(&problem, shots, seed)?.counts,
        Mode::Circuit => {
            if shots == 0 {
                return Err(Error::InvalidArgument("shots must be at least 1".into()).into());
            }
            let tc = build_transport_circuit(&problem)?;
            tc.simulate(config)?.sample(tc.x_register(), shots, seed)?
        }
    };
    let mut csv = String::from("position,count,frequency\n");
    for (x, c) in counts.iter().enumerate() {
        writeln!(csv, "{x},{c},{}", *c as f64 / shots as f64).unwrap();
    }
    Ok(csv)
}

fn qae(io: &Io, est: &Estimation, seed: u64, config: &SimConfig) -> Outcome<String> {
    let problem = load(&io.problem)?;
    let predicate: Predicate = est.predicate.parse()?;
    predicate.resolve(&problem)?;
    let schedule = parse_schedule(&est.schedule)?;
    let tc = build_transport_circuit(&problem)?;
    let a = build_a_operator(&tc, predicate)?;
    let estimate = mlqae_estimate(&a, tc.flag(), &schedule, est.shots_per_power, seed, config)?;
    let mut value = serde_json::to_value(&estimate).expect("estimate serializes");
    value["predicate"] = json!(predicate.to_string());
    value["exact_p"] = json!(exact_amplitude(&a, tc.flag(), config)?);
    value["seed"] = json!(seed);
    Ok(to_json(&value))
}

fn resources(flights: Option<u64>, problem: Option<&Path>) -> Outcome<String> {
    let value = match (flights, problem) {
        (Some(n), _) => serde_json::to_value(full_scale_estimate(n)?),
        (None, Some(path)) => serde_json::to_value(circuit_budget(&load(path)?)?),
        (None, None) => unreachable!("clap requires one of them"),
    }
    .expect("report serializes");
    Ok(to_json(&value))
}

fn convergence(
    io: &Io,
    est: &Estimation,
    budgets: Option<&[u64]>,
    seeds: u64,
    seed: u64,
    config: &SimConfig,
) -> Outcome<String> {
    let problem = load(&io.problem)?;
    let predicate: Predicate = est.predicate.parse()?;
    predicate.resolve(&problem)?;
    let schedule = parse_schedule(&est.schedule)?;
    let budgets: Vec<u64> = match budgets {
        Some(b) => b.to_vec(),
        None => (1..=schedule.len()).map(|j| oracle_calls(&schedule[..j], est.shots_per_power)).collect(),
    };
    if budgets.contains(&0) {
        return Err(Error::InvalidArgument("budgets must be at least 1".into()).into());
    }
    let mut rows: Vec<ConvergenceRow> = classical_predicate_rmse(&problem, predicate, &budgets, seeds, seed)?;
    rows.extend(mlqae_rmse(&problem, predicate, &schedule, est.shots_per_power, seeds, seed, config)?);
    let mut csv = String::from("method,budget,rmse\n");
    for r in rows {
        writeln!(csv, "{},{},{}", r.method, r.budget, r.rmse).unwrap();
    }
    Ok(csv)
}

fn run(cli: Cli) -> Outcome<()> {
    let config = SimConfig::from_env()?;
    match cli.command {
        Command::Exact { io, oracle } => emit(io.out.as_deref(), &exact(&io, oracle, &config)?),
        Command::Mc { io, shots, seed, mode } => emit(io.out.as_deref(), &mc(&io, shots, seed, mode, &config)?),
        Command::Qae { io, est, seed } => emit(io.out.as_deref(), &qae(&io, &est, seed, &config)?),
        Command::Resources { flights, problem, out } => {
            emit(out.as_deref(), &resources(flights, problem.as_deref())?)
        }
        Command::Convergence { io, est, budgets, seeds, seed } => emit(
            io.out.as_deref(),
            &convergence(&io, &est, budgets.as_deref(), seeds, seed, &config)?,
        ),
        Command::DumpCircuit { io } => {
            let problem = load(&io.problem)?;
            emit(io.out.as_deref(), &build_transport_circuit(&problem)?.circuit().to_string())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
