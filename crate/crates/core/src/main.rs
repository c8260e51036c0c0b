use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tokio_util::sync::CancellationToken;
use tracing_subscriber::EnvFilter;

use forumbot::agent::{self, AgentMode, EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, EXIT_UNREACHABLE};
use forumbot::mcp::server::{run_stdio, ServerSettings, ToolServer};
use forumbot::orchestrator::{self, ForumbotConfig, Scenario};

#[derive(Parser)]
#[command(name = "forumbot", version, about = "Forum-mediated robot agents")]
struct Cli {
    /// Shared TOML config.
    #[arg(long, global = true, env = "FORUMBOT_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the forum service.
    Serve,
    /// Run one agent from the config.
    Agent {
        /// Agent id; optional when only one agent is configured.
        #[arg(long)]
        agent: Option<String>,
        /// polling, http-service or single-run.
        #[arg(long)]
        mode: Option<AgentMode>,
    },
    /// Create the demo boards and accounts on a running forum.
    Seed {
        #[arg(long)]
        json: bool,
    },
    /// Run a scripted scenario file.
    Scenario {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Show forum and agent health.
    Status {
        #[arg(long)]
        json: bool,
    },
    /// JSON-RPC tool server on stdio.
    McpServer,
}

fn stop_on_signal() -> CancellationToken {
    let token = CancellationToken::new();
    let t = token.clone();
    tokio::spawn(async move {
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            let mut term = signal(SignalKind::terminate()).expect("SIGTERM handler");
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
        }
        #[cfg(not(unix))]
        let _ = tokio::signal::ctrl_c().await;
        t.cancel();
    });
    token
}

fn load(config: Option<&PathBuf>) -> Result<ForumbotConfig, i32> {
    ForumbotConfig::discover(config.map(PathBuf::as_path)).map_err(|e| {
        eprintln!("config: {e}");
        EXIT_CONFIG
    })
}

async fn run(cli: Cli) -> i32 {
    match cli.command {
        Cmd::McpServer => {
            let mut server = ToolServer::new(ServerSettings::from_env());
            let stdin = tokio::io::BufReader::new(tokio::io::stdin());
            match run_stdio(&mut server, stdin, tokio::io::stdout()).await {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("mcp-server: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Cmd::Serve => {
            let cfg = match load(cli.config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match orchestrator::serve_forum(&cfg.server, stop_on_signal()).await {
                Ok(_) => EXIT_OK,
                Err(e) => {
                    eprintln!("serve: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Cmd::Agent { agent: id, mode } => {
            let cfg = match load(cli.config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let mut config = match cfg.agent(id.as_deref()) {
                Ok(a) => a.clone(),
                Err(e) => {
                    eprintln!("config: {e}");
                    return EXIT_CONFIG;
                }
            };
            if let Some(m) = mode {
                config.mode = m;
            }
            agent::run(config, stop_on_signal()).await
        }
        Cmd::Seed { json } => {
            let cfg = match load(cli.config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match orchestrator::seed(&cfg, &cfg.server.base_url()).await {
                Ok(report) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&report).expect("report serializes")
                        );
                    } else {
                        for b in &report.boards {
                            println!(
                                "board {:>3} {}{}",
                                b.id,
                                b.name,
                                if b.created { " (created)" } else { "" }
                            );
                        }
                        for a in &report.accounts {
                            println!(
                                "account {} [{}]{}",
                                a.username,
                                a.role,
                                if a.created { " (created)" } else { "" }
                            );
                        }
                    }
                    EXIT_OK
                }
                Err(e) if e.retryable => {
                    eprintln!("seed: {e}");
                    EXIT_UNREACHABLE
                }
                Err(e) => {
                    eprintln!("seed: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Cmd::Scenario { file, json } => {
            let cfg = match load(cli.config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let scenario = match Scenario::load(&file) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("scenario: {e}");
                    return EXIT_CONFIG;
                }
            };
            let exe = match std::env::current_exe() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("scenario: {e}");
                    return EXIT_FAILURE;
                }
            };
            let stop = stop_on_signal();
            let report = tokio::select! {
                r = orchestrator::scenario::execute(&scenario, &cfg, &exe) => r,
                _ = stop.cancelled() => Err("interrupted".into()),
            };
            match report {
                Ok(report) => {
                    if json {
                        println!(
                            "{}",
                            serde_json::to_string_pretty(&report).expect("report serializes")
                        );
                    } else {
                        for line in report.summary_lines() {
                            println!("{line}");
                        }
                    }
                    if report.passed {
                        EXIT_OK
                    } else {
                        EXIT_FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("scenario: {e}");
                    EXIT_FAILURE
                }
            }
        }
        Cmd::Status { json } => {
            let cfg = match load(cli.config.as_ref()) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let st = orchestrator::status(&cfg).await;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&st).expect("status serializes")
                );
            } else {
                match st.forum.boards {
                    Some(n) => println!("forum  {}  online, {n} boards", st.forum.url),
                    None => println!("forum  {}  offline", st.forum.url),
                }
                for a in &st.agents {
                    let detail = match (&a.status, &a.url) {
                        (Some(s), _) => format!(
                            "online, processed={} executions={}",
                            s["processed_count"], s["executions"]
                        ),
                        (None, Some(_)) => "offline".into(),
                        (None, None) => "no http endpoint".into(),
                    };
                    println!("agent  {}  {detail}", a.agent_id);
                }
            }
            if st.forum.online {
                EXIT_OK
            } else {
                EXIT_UNREACHABLE
            }
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    ExitCode::from(run(cli).await as u8)
}
