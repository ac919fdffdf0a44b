use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use vibroshield::layout::{self, io as layout_io, BodyModel, Hyperparameters, PerceptionModel};
use vibroshield::protocol::{self, ChainMessage};
use vibroshield::server::{self, ServeOptions, SessionCore};
use vibroshield::sim::batch::{write_aggregate_csv, write_records_csv};
use vibroshield::sim::trial::TickRecord;
use vibroshield::sim::{self, BatchConfig, Direction, Mode, PilotSpec, Scenario, SimConfig};
use vibroshield::Vec3;

#[derive(Parser)]
#[command(name = "vibroshield", version, about = "Haptic shared-control simulator and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scripted trial.
    Simulate(SimulateArgs),
    /// Run a batch of trials described by a config file.
    Batch {
        #[arg(long)]
        config: PathBuf,
        /// Directory for aggregate.csv and trials.csv (default: print aggregate).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the default simulation config.
    Config,
    /// Actuator layout tools.
    #[command(subcommand)]
    Layout(LayoutCommand),
    /// Daisy-chain protocol tools (hex in, hex or JSON out).
    #[command(subcommand)]
    Protocol(ProtocolCommand),
    /// Host a live session on ws://HOST:PORT/session.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PilotArg {
    GoalSeeker,
    Noisy,
    HapticReactive,
    Compliant,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "forward")]
    direction: Direction,
    #[arg(long, default_value = "vsc")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "haptic-reactive")]
    pilot: PilotArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulation config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load the scenario from a file instead of generating it.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Write the generated scenario to this file.
    #[arg(long)]
    save_scenario: Option<PathBuf>,
    /// Replay the commands of a trace written by `--trace`.
    #[arg(long, conflicts_with = "pilot")]
    replay: Option<PathBuf>,
    /// Metrics output (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-tick trace output (JSON lines).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LayoutCommand {
    /// Generate a synthetic pointing dataset.
    Sample {
        #[arg(long, default_value_t = 1)]
        participants: u32,
        #[arg(long, default_value_t = 46)]
        actuators: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Noise-free reports.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the direction-to-position model and write the 32-actuator layout.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum ProtocolCommand {
    /// Encode one message.
    Encode {
        #[arg(long)]
        address: u8,
        #[arg(long)]
        stop: bool,
        #[arg(long, default_value_t = 0)]
        intensity: u8,
        #[arg(long, default_value_t = 3)]
        frequency: u8,
    },
    /// Decode hex byte pairs into JSON messages.
    Decode { hex: String },
    /// Push hex-encoded messages through a simulated chain.
    Simulate {
        #[arg(long, default_value_t = protocol::MAX_UNITS)]
        units: usize,
        hex: String,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value = "forward")]
    direction: Direction,
    #[arg(long, default_value = "vsc")]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Final metrics output (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Batch { config, out_dir } => batch(&config, out_dir.as_deref()),
        Command::Config => {
            print!("{}", SimConfig::default().to_toml());
            Ok(())
        }
        Command::Layout(cmd) => layout_cmd(cmd),
        Command::Protocol(cmd) => protocol_cmd(cmd),
        Command::Serve(args) => serve(args),
    }
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        None => Ok(SimConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimConfig::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
        }
    }
}

fn read_replay(path: &Path) -> Result<Vec<Vec3>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .enumerate()
        .map(|(i, line)| {
            let rec: TickRecord = serde_json::from_str(&line?).with_context(|| format!("trace line {}", i + 1))?;
            Ok(rec.u_ref)
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let scenario = match &args.scenario {
        Some(p) => Scenario::read_json(File::open(p)?)?,
        None => sim::generate_scenario(args.direction, args.seed)?,
    };
    if let Some(p) = &args.save_scenario {
        scenario.write_json(BufWriter::new(File::create(p)?))?;
    }
    let pilot = match (&args.replay, args.pilot) {
        (Some(p), _) => PilotSpec::replay(read_replay(p)?),
        (None, PilotArg::GoalSeeker) => PilotSpec::goal_seeker(),
        (None, PilotArg::Noisy) => PilotSpec::noisy(args.seed),
        (None, PilotArg::HapticReactive) => PilotSpec::haptic_reactive(),
        (None, PilotArg::Compliant) => PilotSpec::compliant(),
    };
    let metrics = sim::run_trial(&scenario, &pilot, args.mode, &cfg, args.trace.is_some())?;
    if let Some(p) = &args.trace {
        let mut w = BufWriter::new(File::create(p)?);
        metrics.write_trace(&mut w)?;
        w.flush()?;
    }
    let summary = sim::TrialMetrics {
        trace: None,
        ..metrics
    };
    let json = serde_json::to_string_pretty(&summary)?;
    match &args.out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn batch(config: &Path, out_dir: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = BatchConfig::from_toml(&text).map_err(|e| anyhow::anyhow!("{}: {e}", config.display()))?;
    let records = sim::run_batch(&cfg);
    let rows = sim::aggregate(&records);
    for r in records.iter().filter(|r| r.result.is_err()) {
        eprintln!("{} {} seed {}: {}", r.direction, r.mode, r.seed, r.result.as_ref().unwrap_err());
    }
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_aggregate_csv(File::create(dir.join("aggregate.csv"))?, &rows)?;
            write_records_csv(File::create(dir.join("trials.csv"))?, &records)?;
        }
        None => write_aggregate_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn layout_cmd(cmd: LayoutCommand) -> Result<()> {
    match cmd {
        LayoutCommand::Sample {
            participants,
            actuators,
            reps,
            seed,
            exact,
            out,
        } => {
            if actuators == 0 || reps == 0 {
                bail!("--actuators and --reps must be at least 1");
            }
            let mut body = BodyModel::default();
            if exact {
                body = body.with_perception(PerceptionModel::exact());
            }
            let data = layout::generate_study(&body, participants, actuators, reps, seed);
            layout_io::write_dataset(BufWriter::new(File::create(&out)?), &data)?;
            eprintln!("wrote {} samples to {}", data.len(), out.display());
        }
        LayoutCommand::Fit {
            data,
            out,
            model,
            epochs,
            lambda,
            learning_rate,
            seed,
        } => {
            let samples = layout_io::read_dataset(File::open(&data)?)?;
            let defaults = Hyperparameters::default();
            let hp = Hyperparameters {
                epochs: epochs.unwrap_or(defaults.epochs),
                lambda: lambda.unwrap_or(defaults.lambda),
                learning_rate: learning_rate.unwrap_or(defaults.learning_rate),
                seed,
                ..defaults
            };
            let (fitted, report) = layout::train(&samples, &hp)?;
            eprintln!(
                "loss {:.6} -> {:.6} (mse {:.6}, tv {:.6})",
                report.initial.total, report.last.total, report.last.mse, report.last.tv
            );
            let placed = layout::optimize_layout(&fitted, &BodyModel::default());
            layout_io::write_layout(BufWriter::new(File::create(&out)?), &placed)?;
            if let Some(p) = model {
                layout_io::write_model(BufWriter::new(File::create(p)?), &fitted)?;
            }
        }
    }
    Ok(())
}

fn protocol_cmd(cmd: ProtocolCommand) -> Result<()> {
    match cmd {
        ProtocolCommand::Encode {
            address,
            stop,
            intensity,
            frequency,
        } => {
            let msg = ChainMessage {
                address,
                start: !stop,
                intensity_level: if stop { 0 } else { intensity },
                frequency_index: frequency,
            };
            println!("{}", protocol::format_hex(&protocol::encode(&msg)?));
        }
        ProtocolCommand::Decode { hex } => {
            for msg in decode_all(&hex)? {
                println!("{}", serde_json::to_string(&msg)?);
            }
        }
        ProtocolCommand::Simulate { units, hex } => {
            let mut chain = protocol::Chain::new(units)?;
            for msg in decode_all(&hex)? {
                let d = chain.inject(msg);
                println!(
                    "{}",
                    serde_json::json!({
                        "message": protocol::format_hex(&protocol::encode(&msg)?),
                        "executed_by": d.executed_by,
                        "forwards": d.forwards,
                    })
                );
            }
            let levels: Vec<u8> = chain.units().iter().map(|u| u.effective_level()).collect();
            println!("{}", serde_json::json!({ "levels": levels }));
        }
    }
    Ok(())
}

fn decode_all(hex: &str) -> Result<Vec<ChainMessage>> {
    let bytes = protocol::parse_hex(hex).map_err(anyhow::Error::msg)?;
    if bytes.len() % 2 != 0 {
        bail!("messages are two bytes each; got {} bytes", bytes.len());
    }
    bytes
        .chunks(2)
        .map(|pair| protocol::decode([pair[0], pair[1]]).map_err(Into::into))
        .collect()
}

fn serve(args: ServeArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let scenario = sim::generate_scenario(args.direction, args.seed)?;
    let session = SessionCore::new(scenario, args.mode, cfg)?;
    let runtime = tokio::runtime::Runtime::new()?;
    let metrics = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await?;
        eprintln!("listening on ws://{}/session", listener.local_addr()?);
        let mut opts = ServeOptions::new(session);
        opts.out = args.out.clone();
        server::serve(listener, opts).await
    })?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}
