use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use iotchat::config::Config;
use iotchat::gateway::Gateway;
use iotchat::nlu::{RuleEngine, Utterance};
use iotchat::{http, transcript};

#[derive(Parser)]
#[command(
    name = "iotchat",
    version,
    about = "Chat gateway for a simulated IoT device fleet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Replay a transcript; exits 0 only if every bot line matches exactly.
    Replay {
        transcript: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "owner")]
        principal: String,
    },
    /// Validate a configuration and print a summary of what it seeds.
    Seed {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the entities found in a phrase, one JSON object per line.
    Entities {
        text: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the parse result for a phrase with an empty context.
    Parse {
        text: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "owner")]
        principal: String,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn load(path: Option<&PathBuf>) -> Result<Config, Box<dyn std::error::Error>> {
    Ok(Config::load_or_default(path.map(PathBuf::as_path))?)
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Serve { config, port, host } => {
            let gateway = Arc::new(Gateway::from_config(&load(config.as_ref())?)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(http::serve(gateway, (host, port).into()))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay {
            transcript: path,
            config,
            principal,
        } => {
            let gateway = Gateway::from_config(&load(config.as_ref())?)?;
            let lines = transcript::parse_file(&path)?;
            let outcome = transcript::replay(&gateway, &principal, &lines)?;
            match outcome.failure {
                None => {
                    println!(
                        "ok {} ({} bot lines)",
                        path.display(),
                        outcome.bot_lines_checked
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Some(failure) => {
                    println!("FAIL {}: {failure}", path.display());
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Seed { config } => {
            let gateway = Gateway::from_config(&load(config.as_ref())?)?;
            let devices = gateway.fabric().snapshot();
            println!(
                "configuration ok: {} intents, {} devices, {} principals",
                gateway.engine().intents().len(),
                devices.len(),
                gateway.fabric().principals().len()
            );
            for d in devices {
                println!(
                    "  {} {} {:?} in {}{}",
                    d.serial_id,
                    d.kind.as_str(),
                    d.friendly_name,
                    d.location,
                    if d.configured { "" } else { " (not set up)" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Entities { text, config } => {
            let config = load(config.as_ref())?;
            let engine =
                RuleEngine::from_specs(&config.entities, &config.intents, config.default_lifespan)?;
            for entity in engine.inspect(&text).1 {
                println!("{}", serde_json::to_string(&entity.attributes)?);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Parse {
            text,
            config,
            principal,
        } => {
            let gateway = Gateway::from_config(&load(config.as_ref())?)?;
            let candidates = gateway.fabric().candidates(&principal);
            let contexts = gateway.engine().new_context_stack();
            let utterance = Utterance {
                session_id: "cli".into(),
                text,
                turn_index: 0,
            };
            let result = gateway
                .engine()
                .understand(&utterance, &contexts, &candidates);
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}
