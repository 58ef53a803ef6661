//! Batch entry point for the pinching-antenna system simulator.
//!
//! Subcommands: `evaluate` (closed-form energy efficiency of the reference
//! state), `optimize` (joint precoding / radiation / placement optimization
//! with a per-iteration trace), `experiment` (figure-style sweeps),
//! `baseline` (MIMO or cell-free benchmark), and `grids` (protocol search
//! grids). Messages go to stderr, data to files; exit code 0 on success, 1
//! on configuration errors, 2 on runtime errors.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pass_core::baseline::{evaluate_baseline_ee, BaselineKind, BaselineLayout};
use pass_core::experiment::{run_experiment, write_summary, ExperimentKind};
use pass_core::metrics::energy_efficiency;
use pass_core::optim::{maximize_energy_efficiency, reference_state};
use pass_core::protocol::{coarse_grid, fine_grid, GridSets, ProtocolKind};
use pass_core::rng::SeedStreams;

use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "pass", version, about = "Pinching-antenna system simulator and optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML); omit or pass `default` for the built-in
    /// parameter set.
    #[arg(long)]
    config: Option<String>,
    /// Override a config key, e.g. `--set p_max_dbw=0` or
    /// `--set grid.protocol=sat`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed for stochastic operations; recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form energy efficiency of the non-optimized reference state.
    Evaluate(CommonArgs),
    /// Joint optimization of precoding, radiation power, and positions.
    Optimize(CommonArgs),
    /// Run an experiment sweep and write its CSV table and JSON summary.
    Experiment {
        #[command(flatten)]
        common: CommonArgs,
        /// Experiment kind (overrides the config file).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Evaluate a conventional-architecture benchmark.
    Baseline {
        #[command(flatten)]
        common: CommonArgs,
        /// Architecture: mimo | cellfree.
        #[arg(long)]
        kind: String,
    },
    /// Print the search grid sets of a protocol.
    Grids {
        #[command(flatten)]
        common: CommonArgs,
        /// Protocol: stt | sta | sat | saa (overrides the config file).
        #[arg(long)]
        protocol: Option<String>,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<pass_core::Error> for CliError {
    fn from(e: pass_core::Error) -> Self {
        match e {
            pass_core::Error::Config(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are not errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_manifest(
    common: &CommonArgs,
    kind: Option<ExperimentKind>,
    protocol: Option<ProtocolKind>,
) -> Result<RunManifest, CliError> {
    let text = match common.config.as_deref() {
        None | Some("default") => String::new(),
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {path:?}: {e}")))?,
    };
    RunManifest::load(&text, &common.set, kind, protocol, common.seed)
        .map_err(|errs| CliError::Config(format!("invalid configuration:\n  {}", errs.join("\n  "))))
}

fn ensure_out(common: &CommonArgs) -> Result<PathBuf, CliError> {
    let out = common
        .out
        .clone()
        .ok_or_else(|| CliError::Config("--out DIR is required for this subcommand".into()))?;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create output directory: {e}")))?;
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {path:?}: {e}")))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("json: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(common) => {
            let m = load_manifest(&common, None, None)?;
            let out = ensure_out(&common)?;
            let (w, s, placement, ch) = reference_state(&m.system, &m.users)?;
            let report = energy_efficiency(&w, &s, &ch, &m.system, m.protocol);
            let value = serde_json::json!({
                "config_hash": m.config_hash(),
                "protocol": m.protocol.to_string(),
                "sinr": report.sinr,
                "rates_bits_per_s_per_hz": report.rates,
                "sum_rate_bits_per_s_per_hz": report.sum_rate,
                "total_power_w": report.p_all,
                "energy_efficiency_bits_per_joule": report.ee,
                "placement_x_m": placement.x,
            });
            write_json(&out.join("evaluate.json"), &value)?;
            write_text(&out.join("manifest.toml"), &m.to_toml_string())?;
            eprintln!("evaluate: EE = {:.6e} bits/joule -> {}", report.ee, out.display());
            Ok(())
        }

        Command::Optimize(common) => {
            let m = load_manifest(&common, None, None)?;
            let out = ensure_out(&common)?;
            let grids = GridSets::build(m.protocol, &m.system, &m.grid)?;
            let sol =
                maximize_energy_efficiency(&m.system, &m.users, m.protocol, &grids, &m.optimizer)?;
            let mut wtr = csv::WriterBuilder::new()
                .from_path(out.join("trace.csv"))
                .map_err(|e| CliError::Runtime(format!("trace.csv: {e}")))?;
            for rec in &sol.trace {
                wtr.serialize(rec)
                    .map_err(|e| CliError::Runtime(format!("trace.csv: {e}")))?;
            }
            wtr.flush()
                .map_err(|e| CliError::Runtime(format!("trace.csv: {e}")))?;
            let value = serde_json::json!({
                "config_hash": m.config_hash(),
                "protocol": m.protocol.to_string(),
                "converged": sol.converged,
                "energy_efficiency_bits_per_joule": sol.report.ee,
                "sum_rate_bits_per_s_per_hz": sol.report.sum_rate,
                "rates_bits_per_s_per_hz": sol.report.rates,
                "total_power_w": sol.report.p_all,
                "transmit_power_w": sol.w.total_transmit_power(),
                "rho": sol.dual.rho,
                "placement_x_m": sol.placement.x,
                "radiation_amplitudes": sol.s.s,
                "trace_rows": sol.trace.len(),
                "radiation_skipped_blocks": sol.radiation_skipped_blocks,
            });
            write_json(&out.join("summary.json"), &value)?;
            write_text(&out.join("manifest.toml"), &m.to_toml_string())?;
            eprintln!(
                "optimize: EE = {:.6e} bits/joule (converged: {}) -> {}",
                sol.report.ee,
                sol.converged,
                out.display()
            );
            Ok(())
        }

        Command::Experiment { common, kind } => {
            let kind_flag = kind
                .as_deref()
                .map(str::parse::<ExperimentKind>)
                .transpose()
                .map_err(|e| CliError::Config(e.to_string()))?;
            if common.seed.is_none() {
                return Err(CliError::Config(
                    "--seed is required for experiment runs".into(),
                ));
            }
            let m = load_manifest(&common, kind_flag, None)?;
            let out = ensure_out(&common)?;
            let outcome = run_experiment(
                &m.experiment,
                &m.system,
                &m.users,
                &m.grid,
                &m.optimizer,
                SeedStreams::new(m.seed),
            )?;
            outcome.table.write_csv(&out.join("results.csv"))?;
            write_summary(
                &outcome.table,
                &m.experiment,
                &m.config_hash(),
                &outcome.failures,
                &out.join("summary.json"),
            )?;
            write_text(&out.join("manifest.toml"), &m.to_toml_string())?;
            eprintln!(
                "experiment {}: {} rows -> {}",
                m.experiment.kind,
                outcome.table.len(),
                out.display()
            );
            if !outcome.failures.is_empty() {
                for f in &outcome.failures {
                    eprintln!("cell failed: {f}");
                }
                return Err(CliError::Runtime(format!(
                    "{} experiment cell(s) failed; partial results written",
                    outcome.failures.len()
                )));
            }
            Ok(())
        }

        Command::Baseline { common, kind } => {
            let arch: BaselineKind = kind.parse().map_err(|e: pass_core::Error| {
                CliError::Config(e.to_string())
            })?;
            let m = load_manifest(&common, None, None)?;
            let out = ensure_out(&common)?;
            let layout = BaselineLayout::build(arch, &m.system);
            let layout_errs = layout.validate(&m.system);
            if !layout_errs.is_empty() {
                return Err(CliError::Config(layout_errs.join("\n")));
            }
            let report = evaluate_baseline_ee(&layout, &m.users, &m.system, &m.optimizer)?;
            let value = serde_json::json!({
                "config_hash": m.config_hash(),
                "architecture": arch.to_string(),
                "energy_efficiency_bits_per_joule": report.ee,
                "sum_rate_bits_per_s_per_hz": report.sum_rate,
                "total_power_w": report.p_all,
                "iterations": report.iterations,
            });
            write_json(&out.join("baseline.json"), &value)?;
            write_text(&out.join("manifest.toml"), &m.to_toml_string())?;
            eprintln!(
                "baseline {arch}: EE = {:.6e} bits/joule -> {}",
                report.ee,
                out.display()
            );
            Ok(())
        }

        Command::Grids { common, protocol } => {
            let protocol_flag = protocol
                .as_deref()
                .map(str::parse::<ProtocolKind>)
                .transpose()
                .map_err(|e: pass_core::Error| CliError::Config(e.to_string()))?;
            let m = load_manifest(&common, None, protocol_flag)?;
            let coarse = coarse_grid(m.protocol, &m.system, &m.grid)?;
            let fine = fine_grid(m.protocol, &m.system, &m.grid);
            println!(
                "protocol {}: coarse: {} points, fine: {} points",
                m.protocol, coarse.count, fine.count
            );
            if let Some(dir) = &common.out {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::Runtime(format!("cannot create output directory: {e}")))?;
                let mut wtr = csv::WriterBuilder::new()
                    .from_path(dir.join("grids.csv"))
                    .map_err(|e| CliError::Runtime(format!("grids.csv: {e}")))?;
                wtr.write_record(["stage", "index", "coordinate_m"])
                    .map_err(|e| CliError::Runtime(format!("grids.csv: {e}")))?;
                for (i, x) in coarse.iter().enumerate() {
                    wtr.write_record(["coarse", &i.to_string(), &format!("{x}")])
                        .map_err(|e| CliError::Runtime(format!("grids.csv: {e}")))?;
                }
                for (i, x) in fine.iter().enumerate() {
                    wtr.write_record(["fine", &i.to_string(), &format!("{x}")])
                        .map_err(|e| CliError::Runtime(format!("grids.csv: {e}")))?;
                }
                wtr.flush()
                    .map_err(|e| CliError::Runtime(format!("grids.csv: {e}")))?;
                write_text(&dir.join("manifest.toml"), &m.to_toml_string())?;
            }
            Ok(())
        }
    }
}
