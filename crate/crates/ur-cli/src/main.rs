use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use ur_api::{router, Service, Tokens, DEFAULT_PORT, TOKEN_FILE_ENV};
use ur_core::policy::{load_policy, Policy};
use ur_sim::{bundled, verify_snapshot, Mode, Scenario, SimError, Simulation, VerifyOutcome};

#[derive(Parser)]
#[command(name = "ur", version, about = "Uncertainty registry: scenario runs, log replay, HTTP service")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in batch mode and write log, snapshot and trace report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        /// Defaults to the scenario's own seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; without it only the trace summary is printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the registry from an event log and print or verify its snapshot.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long = "verify-snapshot")]
        verify_snapshot: Option<PathBuf>,
    },
    /// Serve a scenario interactively over HTTP.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Advance one tick every N milliseconds; otherwise ticks advance via POST /scenario/step.
        #[arg(long = "tick-ms")]
        tick_ms: Option<u64>,
        /// Token file; defaults to the UR_TOKEN_FILE environment variable.
        #[arg(long = "token-file")]
        token_file: Option<PathBuf>,
    },
    /// Write the bundled scenarios, rule set and default policy to a directory.
    Bundled {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Mismatch(String),
    Invalid(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Mismatch(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::TraceMismatch(m) => Failure::Mismatch(format!("trace mismatch: {m}")),
            SimError::ScenarioInvalid(_) => Failure::Invalid(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn policy_file(path: &Path) -> Result<Policy, Failure> {
    load_policy(&read(path)?).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn scenario_file(path: &Path) -> Result<Scenario, Failure> {
    Scenario::load(path).map_err(|e| match e {
        SimError::Io { .. } => Failure::Invalid(e.to_string()),
        other => other.into(),
    })
}

fn run(scenario: &Path, policy: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), Failure> {
    let scenario = scenario_file(scenario)?;
    let policy = policy_file(policy)?;
    let seed = seed.unwrap_or(scenario.seed);
    let output = match out {
        Some(dir) => ur_sim::run(&scenario, &policy, seed, dir),
        None => ur_sim::simulate(&scenario, &policy, seed).and_then(|o| match o.report.first_divergence.clone() {
            Some(d) => {
                print!("{}", o.report_text);
                Err(SimError::TraceMismatch(d))
            }
            None => Ok(o),
        }),
    }?;
    print!("{}", output.report_text);
    Ok(())
}

fn replay(log: &Path, expected: Option<&Path>) -> Result<(), Failure> {
    let text = read(log)?;
    let invalid = |e: SimError| Failure::Invalid(format!("{}: {e}", log.display()));
    match expected {
        None => {
            print!("{}", ur_sim::replay_log(&text).map_err(invalid)?);
            Ok(())
        }
        Some(snap) => {
            let bytes = std::fs::read(snap)
                .map_err(|e| Failure::Invalid(format!("{}: {e}", snap.display())))?;
            match verify_snapshot(&text, &bytes).map_err(invalid)? {
                VerifyOutcome::Identical => {
                    println!("snapshot identical");
                    Ok(())
                }
                VerifyOutcome::Differs { at } => Err(Failure::Mismatch(format!(
                    "snapshot {} differs from replay at byte {at}",
                    snap.display()
                ))),
            }
        }
    }
}

struct ServeArgs {
    addr: SocketAddr,
    scenario: PathBuf,
    policy: PathBuf,
    seed: Option<u64>,
    tick_ms: Option<u64>,
    token_file: Option<PathBuf>,
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let token_path = args
        .token_file
        .or_else(|| std::env::var_os(TOKEN_FILE_ENV).map(PathBuf::from))
        .ok_or_else(|| Failure::Invalid(format!("no token file: pass --token-file or set {TOKEN_FILE_ENV}")))?;
    let tokens = Tokens::load(&token_path).map_err(Failure::Invalid)?;
    let scenario = scenario_file(&args.scenario)?;
    let policy = policy_file(&args.policy)?;
    let seed = args.seed.unwrap_or(scenario.seed);
    let sim = Simulation::new(scenario, policy, seed, Mode::Interactive)?;

    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
    rt.block_on(async move {
        let service = Service::spawn(sim);
        if let Some(ms) = args.tick_ms {
            service.spawn_ticker(Duration::from_millis(ms.max(1)));
        }
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(|e| Failure::Runtime(format!("bind {}: {e}", args.addr)))?;
        tracing::info!("listening on http://{}", args.addr);
        axum::serve(listener, router(service, tokens))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| Failure::Runtime(e.to_string()))
    })
}

fn export(out: &Path) -> Result<(), Failure> {
    for (path, text) in bundled::files() {
        let dest = out.join(path);
        if let Some(dir) = dest.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&dest, text).map_err(|e| Failure::Runtime(format!("{}: {e}", dest.display())))?;
        println!("{}", dest.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            policy,
            seed,
            out,
        } => run(&scenario, &policy, seed, out.as_deref()),
        Command::Replay {
            log,
            verify_snapshot,
        } => replay(&log, verify_snapshot.as_deref()),
        Command::Serve {
            port,
            host,
            scenario,
            policy,
            seed,
            tick_ms,
            token_file,
        } => serve(ServeArgs {
            addr: SocketAddr::new(host, port),
            scenario,
            policy,
            seed,
            tick_ms,
            token_file,
        }),
        Command::Bundled { out } => export(&out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Mismatch(m) | Failure::Invalid(m) | Failure::Runtime(m)) = &f;
            eprintln!("ur: {m}");
            ExitCode::from(f.code())
        }
    }
}
