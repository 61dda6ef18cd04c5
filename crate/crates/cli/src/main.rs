use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use qradar_cli::{parse_config, presets, run};
use qradar_core::channel::{ChannelPreset, FIG10_TARGET_DEPTH};

#[derive(Parser)]
#[command(
    name = "qradar",
    version,
    about = "Gaussian-state models of microwave quantum illumination"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file or a bundled preset.
    Run {
        /// Path to a scenario JSON file.
        config: Option<PathBuf>,
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Overrides the file's output_dir.
        #[arg(long, env = "QRADAR_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
        /// Overrides the file's parallelism.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Check a scenario file without running it.
    Validate { config: PathBuf },
    /// List or print bundled presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match cli.command {
        Command::Run {
            config,
            preset,
            output_dir,
            parallelism,
        } => {
            let text = match load(config, preset) {
                Ok(t) => t,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(1);
                }
            };
            let mut scenario = match parse_config(&text) {
                Ok(s) => s,
                Err(errs) => {
                    eprintln!("{errs}");
                    return ExitCode::from(1);
                }
            };
            if let Some(p) = parallelism {
                if p == 0 {
                    eprintln!("error: --parallelism must be at least 1");
                    return ExitCode::from(1);
                }
                scenario.parallelism = p;
            }
            let dir = output_dir
                .or_else(|| scenario.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("qradar-out"));
            let start = Instant::now();
            match run(&scenario, &text, &dir) {
                Ok(outcome) => {
                    for f in &outcome.files {
                        println!("{}", f.display());
                    }
                    eprintln!(
                        "{} finished in {:.2} s",
                        scenario.kind.name(),
                        start.elapsed().as_secs_f64()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(1);
                }
            };
            match parse_config(&text) {
                Ok(s) => {
                    println!("ok: {}", s.kind.name());
                    ExitCode::SUCCESS
                }
                Err(errs) => {
                    eprintln!("{errs}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, text) in presets::SCENARIOS {
                let kind = parse_config(text)
                    .map(|s| s.kind.name())
                    .unwrap_or("invalid");
                println!("{name:<16} {kind}");
            }
            for c in ChannelPreset::ALL {
                println!("{:<16} channel", c.name());
            }
            ExitCode::SUCCESS
        }
        Command::Presets {
            action: PresetAction::Show { name },
        } => {
            if let Some(text) = presets::scenario(&name) {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            if let Some(c) = presets::channel(&name) {
                // Reference settings: cold atmosphere, 1 cm target, 20 dB gain.
                let (param, extra) = match c {
                    ChannelPreset::Fig10Atmosphere => (0.0, 0.0),
                    ChannelPreset::Fig10Target => (FIG10_TARGET_DEPTH, 0.0),
                    ChannelPreset::QuantumLimitedAmp => (20.0, 0.0),
                };
                match c.build(param, extra) {
                    Ok(ch) => {
                        println!("{}", ch.description);
                        println!("X = {:?}", ch.x.as_slice());
                        println!("Y = {:?}", ch.y.as_slice());
                        return ExitCode::SUCCESS;
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            unknown_preset(&name)
        }
    }
}

fn unknown_preset(name: &str) -> ExitCode {
    match presets::nearest(name) {
        Some(n) => eprintln!("error: unknown preset `{name}`; did you mean `{n}`?"),
        None => eprintln!("error: unknown preset `{name}`; see `qradar presets list`"),
    }
    ExitCode::from(1)
}

fn load(config: Option<PathBuf>, preset: Option<String>) -> Result<String, String> {
    match (config, preset) {
        (Some(path), None) => std::fs::read_to_string(&path)
            .map_err(|e| format!("cannot read {}: {e}", path.display())),
        (None, Some(name)) => presets::scenario(&name).map(str::to_owned).ok_or_else(|| {
            match presets::nearest(&name) {
                Some(n) => format!("unknown preset `{name}`; did you mean `{n}`?"),
                None => format!("unknown preset `{name}`"),
            }
        }),
        _ => Err("give a scenario file or --preset <name>".into()),
    }
}
