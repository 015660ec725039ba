//! `qkd-metro` command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::calibrate::{calibrate, AnchorSet, FreeParam};
use crate::config::{parse_config, parse_settings, render_config};
use crate::error::{Error, Result};
use crate::optical_path::{feasibility, path_loss, Feasibility};
use crate::svg::render_svg;
use crate::sweep::{aes_rekey, run_sweep, write_csv};

#[derive(Debug, Parser)]
#[command(name = "qkd-metro", version, about = "QKD coexistence planner for metro backbone and GPON networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the link over the configured distance sweep and write CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Abort on a collapsed decoy bound instead of recording zero secret rate.
        #[arg(long)]
        strict: bool,
        /// Also write a chart of the sweep.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit noise parameters to measured anchors and write the fitted configuration.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        anchors: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Parameters to fit, e.g. `rho:ssmf,launch_dbm`. Defaults depend on the scenario.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
    },
    /// Signal intensity that maximizes the secret key rate.
    OptimizeMu {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        length_km: f64,
    },
    /// Bits encrypted per AES key for a given key supply.
    Rekey {
        #[arg(long)]
        total_bps: f64,
        #[arg(long)]
        key_rate: f64,
        #[arg(long)]
        key_bits: f64,
    },
    /// Loss of the transparent route at one wavelength.
    PathLoss {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        wavelength: f64,
        #[arg(long, default_value_t = 0.0)]
        length_km: f64,
        /// Report the margin against this loss budget.
        #[arg(long)]
        budget_db: Option<f64>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn run(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Sweep { config, out: csv_path, strict, svg } => {
            let (scenario, spec) = parse_config(&read(&config)?)?;
            let records = run_sweep(&scenario, &spec, strict)?;
            let mut buf = Vec::new();
            write_csv(&records, &mut buf)?;
            write(&csv_path, &buf)?;
            if let Some(svg_path) = svg {
                let title = format!("{} link, quantum channel {} nm", scenario.kind(), scenario.quantum_nm());
                write(&svg_path, render_svg(&records, &title).as_bytes())?;
            }
            writeln!(out, "wrote {} records to {}", records.len(), csv_path.display())?;
        }
        Command::Calibrate { config, anchors, out: out_path, free } => {
            let (settings, spec) = parse_settings(&read(&config)?)?;
            let anchors = AnchorSet::from_csv(read(&anchors)?.as_bytes())?;
            let params = if free.is_empty() {
                FreeParam::default_set(settings.kind)
            } else {
                free.iter().map(|s| s.parse()).collect::<Result<Vec<FreeParam>>>()?
            };
            let report = calibrate(&settings, &anchors, &params)?;
            for w in &report.warnings {
                writeln!(err, "warning: {w}")?;
            }
            let mut text = String::from("# fitted:");
            for (p, v) in &report.fitted {
                text += &format!(" {p}={v:e}");
            }
            text += &format!("\n# residual: {:e}\n", report.residual);
            text += &render_config(&report.settings, &spec);
            write(&out_path, text.as_bytes())?;
            let mut shown = report.clone();
            shown.warnings.clear();
            writeln!(out, "{shown}")?;
        }
        Command::OptimizeMu { config, length_km } => {
            let (scenario, _) = parse_config(&read(&config)?)?;
            writeln!(out, "{}", scenario.optimize_mu(length_km)?)?;
        }
        Command::Rekey { total_bps, key_rate, key_bits } => {
            writeln!(out, "{:e}", aes_rekey(total_bps, key_rate, key_bits)?)?;
        }
        Command::PathLoss { config, wavelength, length_km, budget_db } => {
            let (scenario, _) = parse_config(&read(&config)?)?;
            let route = scenario.route(length_km)?;
            writeln!(out, "{}", path_loss(&route.path, wavelength))?;
            if let Some(budget) = budget_db {
                match feasibility(&route.path, budget, wavelength)? {
                    Feasibility::Feasible { margin_db } => writeln!(out, "feasible, margin {margin_db} dB")?,
                    Feasibility::Infeasible { margin_db } => writeln!(out, "infeasible, margin {margin_db} dB")?,
                }
            }
        }
    }
    Ok(())
}

/// Runs the tool on `argv` (program name first) and returns the exit status:
/// 0 on success, 1 on a domain error, 2 on a usage or input-format error.
pub fn dispatch<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { write!(out, "{rendered}") } else { write!(err, "{rendered}") };
            return code;
        }
    };
    match run(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_usage() { 2 } else { 1 }
        }
    }
}
