use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stbc_las::channel::db_to_linear;
use stbc_las::estimation::{capacity_bound, ergodic_capacity_csir, TrainingBoundParams};
use stbc_las::harness::output::{csv_string, json_string};
use stbc_las::harness::{
    emit_results, read_csv, run_ber_sweep, run_selftest, siso_awgn_reference, Curve, ExperimentConfig, OutputFormat,
};
use stbc_las::Error;

const SNR_NOTE: &str = "SNR convention: snr_db is the average receive SNR per antenna, gamma = N_t E_s / sigma^2 \
with unit-variance channel taps. Transmitted code matrices are scaled so each antenna radiates E_s per channel use.";

#[derive(Parser)]
#[command(name = "stbc-las", version, about = "Space-time block codes from cyclic division algebras with LAS detection", after_help = SNR_NOTE)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BER sweep.
    #[command(after_help = SNR_NOTE)]
    Simulate(SimulateArgs),
    /// Ergodic capacity with perfect CSIR and the training-based lower bound.
    #[command(after_help = SNR_NOTE)]
    Capacity(CapacityArgs),
    /// Turn result CSV files into per-curve series files and an SVG plot.
    Plot(PlotArgs),
    /// Quick internal consistency checks.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a configuration key, `section.key=value` or `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    n_r: Option<usize>,
    /// Square QAM order.
    #[arg(long)]
    modulation: Option<usize>,
    /// `fd-ill` or `ill-only`.
    #[arg(long)]
    code: Option<String>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
}

impl ConfigArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>, Error> {
        let mut out = Vec::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(vec![format!("override `{s}` is not KEY=VALUE")]))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("system.n_t", self.n_t.map(|v| v.to_string()));
        push("system.n_r", self.n_r.map(|v| v.to_string()));
        push("system.modulation", self.modulation.map(|v| v.to_string()));
        push("system.code", self.code.as_ref().map(|v| format!("\"{v}\"")));
        push("sweep.snr_db", self.snr_db.as_ref().map(|v| toml_floats(v)));
        Ok(out)
    }
}

fn toml_floats(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Base seed; every trial draws from its own stream under it.
    #[arg(long)]
    seed: u64,
    /// Highest LAS sub-stage order; 0 reports the filter output.
    #[arg(long)]
    m_max: Option<usize>,
    /// `mmse`, `zf` or `mf`.
    #[arg(long)]
    filter: Option<String>,
    /// `perfect`, `one-shot` or `iterative`.
    #[arg(long)]
    csir: Option<String>,
    #[arg(long)]
    min_errors: Option<u64>,
    #[arg(long)]
    max_bits: Option<u64>,
    /// Write wall_ms = 0 so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// `csv`, `json` or `plot-data`.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file, or directory for plot data. CSV and JSON go to stdout
    /// without it.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Curve label for plot data.
    #[arg(long, default_value = "simulated")]
    label: String,
    /// Add the SISO AWGN curve of the same modulation to plot data.
    #[arg(long)]
    reference: bool,
}

#[derive(Args)]
struct CapacityArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Monte-Carlo trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
    /// Coherence time in channel uses.
    #[arg(long)]
    coherence: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// Result CSV files, optionally labelled as `label=path`.
    #[arg(required = true)]
    inputs: Vec<String>,
    /// Output directory.
    #[arg(long, short)]
    output: PathBuf,
    /// Draw the SISO AWGN reference for this QAM order.
    #[arg(long)]
    reference: Option<usize>,
}

fn exit_code(category: &str) -> u8 {
    match category {
        "config" => 3,
        "io" => 4,
        "format" => 5,
        "shape" => 6,
        "unsupported" => 7,
        "budget" => 8,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            eprint!("error[usage]: {text}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Capacity(a) => capacity(a),
        Command::Plot(a) => plot(a),
        Command::Selftest { seed } => return selftest(seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(e.category()))
        }
    }
}

fn write_out(output: Option<&Path>, text: &str) -> Result<(), Error> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let format: OutputFormat = a.format.parse()?;
    let mut overrides = a.config.overrides()?;
    overrides.push(("sweep.seed".into(), a.seed.to_string()));
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    };
    push("detector.m_max", a.m_max.map(|v| v.to_string()));
    push("detector.filter", a.filter.map(|v| format!("\"{v}\"")));
    push("channel.csir", a.csir.map(|v| format!("\"{v}\"")));
    push("sweep.min_errors", a.min_errors.map(|v| v.to_string()));
    push("sweep.max_bits", a.max_bits.map(|v| v.to_string()));
    if a.no_timing {
        overrides.push(("sweep.record_timing".into(), "false".into()));
    }
    let cfg = ExperimentConfig::load(a.config.config.as_deref(), &overrides)?;
    let records = run_ber_sweep(&cfg)?;
    match format {
        OutputFormat::Csv => write_out(a.output.as_deref(), &csv_string(&records)?),
        OutputFormat::Json => write_out(a.output.as_deref(), &json_string(&records)?),
        OutputFormat::PlotData => {
            let dir = a
                .output
                .ok_or_else(|| Error::Config(vec!["plot-data output needs --output DIR".into()]))?;
            let curve = Curve {
                label: a.label,
                records,
            };
            if a.reference {
                let reference = siso_awgn_reference(cfg.system.modulation, &cfg.sweep.snr_db)?;
                stbc_las::harness::write_plot_data(&dir, &[curve], Some(&reference))?;
            } else {
                emit_results(&[curve], format, &dir)?;
            }
            Ok(())
        }
    }
}

fn capacity(a: CapacityArgs) -> Result<(), Error> {
    let mut overrides = a.config.overrides()?;
    if let Some(t) = a.trials {
        overrides.push(("capacity.trials".into(), t.to_string()));
    }
    if let Some(t) = a.coherence {
        overrides.push(("capacity.coherence".into(), t.to_string()));
    }
    let cfg = ExperimentConfig::load(a.config.config.as_deref(), &overrides)?;
    let (n_t, n_r) = (cfg.system.n_t, cfg.system.n_r);
    let mut text = String::from("snr_db,csir,csir_ci95,bound,bound_ci95\n");
    for &snr_db in &cfg.sweep.snr_db {
        let gamma = db_to_linear(snr_db);
        let csir = ergodic_capacity_csir(n_t, n_r, gamma, cfg.capacity.trials, a.seed)?;
        let params = TrainingBoundParams {
            n_t,
            n_r,
            coherence: cfg.capacity.coherence,
            tau: cfg.training_length(),
            gamma,
            beta_p: cfg.channel.beta_p,
            beta_d: cfg.channel.beta_d,
        };
        let bound = capacity_bound(&params, cfg.capacity.trials, a.seed)?;
        writeln!(text, "{snr_db},{},{},{},{}", csir.mean, csir.ci95, bound.mean, bound.ci95).unwrap();
    }
    write_out(a.output.as_deref(), &text)
}

fn plot(a: PlotArgs) -> Result<(), Error> {
    let mut curves = Vec::new();
    for input in &a.inputs {
        let (label, path) = match input.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(input);
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                (stem, p)
            }
        };
        curves.push(Curve {
            label,
            records: read_csv(&path)?,
        });
    }
    let reference = match a.reference {
        Some(order) => {
            let mut grid: Vec<f64> = curves.iter().flat_map(|c| c.records.iter().map(|r| r.snr_db)).collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            Some(siso_awgn_reference(order, &grid)?)
        }
        None => None,
    };
    for p in stbc_las::harness::write_plot_data(&a.output, &curves, reference.as_deref())? {
        println!("{}", p.display());
    }
    Ok(())
}

fn selftest(seed: u64) -> ExitCode {
    let checks = run_selftest(seed);
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("error[selftest]: {failed} of {} checks failed", checks.len());
        ExitCode::from(9)
    }
}
