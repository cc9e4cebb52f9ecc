use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edgespike::config::{RunConfig, Settings};
use edgespike::error::{Error, Result};
use edgespike::io::write_dataset;
use edgespike::pipeline::{cmd_ablate, cmd_map, cmd_report, cmd_run, cmd_train};
use edgespike::{presets, seed};

#[derive(Parser)]
#[command(name = "edgespike", version, about = "Spiking networks on modeled neuromorphic edge chips")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Chip preset (loihi2-like, truenorth-like, desk16) or chip file.
    #[arg(long, global = true, value_name = "PRESET|PATH")]
    chip: Option<String>,
    /// Runtime threshold adaptation.
    #[arg(long, global = true, value_enum)]
    adaptive: Option<Switch>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Stage latency measurement; wall-clock figures make reports
    /// non-reproducible.
    #[arg(long, global = true, value_enum)]
    timing: Option<Timing>,
    /// Any setting, e.g. `--set trainer.epochs=5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Timing {
    Wall,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train a preset network; writes network, mapping, history and summary.
    Train {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
        /// desk-mlp or desk-cnn.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Place a trained network on the chip's cores.
    Map {
        #[arg(long, value_name = "PATH")]
        network: Option<PathBuf>,
    },
    /// Classify a test set and account energy.
    Run {
        #[arg(long, value_name = "PATH")]
        network: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        mapping: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
        /// Dataset to split a test set from when --test is absent.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        /// Write the per-step threshold trajectory (with --adaptive on).
        #[arg(long)]
        activity_csv: bool,
    },
    /// Compare run reports as Markdown tables and SVG charts.
    Report {
        #[arg(required = true, value_name = "RUN_REPORT")]
        reports: Vec<PathBuf>,
    },
    /// Print every setting with its effective value.
    ShowConfig,
    /// Write a bundled synthetic dataset (`.bin` selects the packed format).
    Generate {
        /// blobs2, blobs or digits.
        #[arg(long, default_value = "blobs2")]
        kind: String,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Rate / hybrid / mapping / adaptation ablation table.
    Ablate {
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        test: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
}

fn settings(g: &Global, cmd: &Command) -> Result<Settings> {
    let mut s = Settings::default();
    if let Some(p) = &g.config {
        s.merge_file(p)?;
    }
    s.merge_env(|k| std::env::var(k).ok());
    let mut put = |k: &str, v: String| s.set(k, &v);
    if let Some(x) = g.seed {
        put("seed", x.to_string())?;
    }
    if let Some(x) = &g.chip {
        put("chip", x.clone())?;
    }
    if let Some(x) = g.adaptive {
        put("adapt.enabled", matches!(x, Switch::On).then_some("on").unwrap_or("off").into())?;
    }
    if let Some(x) = &g.out {
        put("out", x.display().to_string())?;
    }
    if let Some(x) = g.timing {
        put("run.timing", matches!(x, Timing::Wall).then_some("on").unwrap_or("off").into())?;
    }
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    match cmd {
        Command::Train { data, test, preset, .. } | Command::Ablate { data, test, preset } => {
            if let Some(d) = path(data) {
                put("data.train", d)?;
            }
            if let Some(t) = path(test) {
                put("data.test", t)?;
            }
            if let Some(p) = preset {
                put("network.preset", p.clone())?;
            }
            if let Command::Train { epochs: Some(e), .. } = cmd {
                put("trainer.epochs", e.to_string())?;
            }
        }
        Command::Map { network } => {
            if let Some(n) = path(network) {
                put("network.path", n)?;
            }
        }
        Command::Run { network, mapping, test, data, activity_csv } => {
            if let Some(n) = path(network) {
                put("network.path", n)?;
            }
            if let Some(m) = path(mapping) {
                put("network.mapping", m)?;
            }
            if let Some(t) = path(test) {
                put("data.test", t)?;
            }
            if let Some(d) = path(data) {
                put("data.train", d)?;
            }
            if *activity_csv {
                put("run.activity_csv", "on".into())?;
            }
        }
        _ => {}
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        s.set(k.trim(), v)?;
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<()> {
    let s = settings(&cli.global, &cli.command)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", s.render());
        return Ok(());
    }
    let cfg = RunConfig::from_settings(&s)?;
    match cli.command {
        Command::Train { .. } => {
            let sum = cmd_train(&cfg)?;
            if let Some(last) = sum.history.epochs.last() {
                println!(
                    "trained {} epochs: task loss {:.4}, train accuracy {:.1}%",
                    last.epoch,
                    last.task_loss,
                    last.train_acc * 100.0
                );
            }
            println!(
                "test accuracy {:.1}%, {:.1} spikes/inference, {:.4e} J/inference",
                sum.report.accuracy * 100.0,
                sum.report.spikes_per_inference,
                sum.report.energy_per_inference_j
            );
            for p in &sum.artifacts {
                println!("wrote {}", p.display());
            }
        }
        Command::Map { .. } => {
            let m = cmd_map(&cfg)?;
            print!("{}", m.to_text(&cfg.chip));
            println!("wrote {}", cfg.out.join("mapping.txt").display());
        }
        Command::Run { .. } => {
            let r = cmd_run(&cfg)?;
            print!("{}", r.energy.to_table());
            println!(
                "accuracy {:.1}% over {} samples ({} without output spikes)",
                r.report.accuracy * 100.0,
                r.report.n_samples,
                r.report.low_confidence
            );
            println!("wrote {}", cfg.out.join("run_report.txt").display());
        }
        Command::Report { reports } => {
            let r = cmd_report(&reports, &cfg.out)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", r.markdown);
        }
        Command::Generate { kind, samples, classes, output } => {
            let d = presets::dataset(&kind, samples, classes, seed::derive(cfg.seed, "dataset"))?;
            if let Some(dir) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            write_dataset(&output, &d)?;
            println!(
                "wrote {} ({} samples, {} features, {} classes)",
                output.display(),
                d.samples.len(),
                d.n_features,
                d.n_classes
            );
        }
        Command::Ablate { .. } => {
            let a = cmd_ablate(&cfg)?;
            print!("{}", a.to_markdown());
            println!("wrote {}", cfg.out.join("ablation.md").display());
        }
        Command::ShowConfig => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
