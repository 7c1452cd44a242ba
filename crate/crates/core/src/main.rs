use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use flyprac::analysis::{AnalysisParams, AnalysisRow};
use flyprac::crc::{Crc8, CrcSpec};
use flyprac::harness::validate::{validate, Scale};
use flyprac::harness::{
    run, sweep, write_csv, CodingMode, Feedback, GridSpec, RecoveryMode, ScenarioConfig, Topology,
    Verification,
};

/// Partial packet recovery simulator for random linear and sparse network
/// coding.
#[derive(Parser)]
#[command(name = "flyprac", version)]
struct Cli {
    /// TOML scenario (for `sweep`, a file with `[base]` and `[grid]` tables).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Measure compute time of recovery and decoding (adds wall-clock
    /// values to the CSV, which then differs between runs).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its averaged metrics.
    Simulate(ScenarioArgs),
    /// Run every cell of a parameter grid.
    Sweep {
        /// Grid file; defaults to `--config`.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Evaluate the closed forms on a parameter grid.
    Analyze(AnalyzeArgs),
    /// Check the closed forms against reference points and simulation.
    Validate {
        #[arg(long, value_enum, default_value = "quick")]
        scale: Scale,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    topology: Option<Topology>,
    #[arg(long, value_enum)]
    mode: Option<CodingMode>,
    /// Nonzero coefficients per vector in snc mode.
    #[arg(long)]
    w: Option<usize>,
    #[arg(long, value_enum)]
    recovery: Option<RecoveryMode>,
    #[arg(long)]
    dependent_rows: Option<bool>,
    #[arg(long, value_enum)]
    feedback: Option<Feedback>,
    #[arg(long, value_enum)]
    verification: Option<Verification>,
    /// Generation size.
    #[arg(short, long)]
    g: Option<usize>,
    /// Symbols per packet.
    #[arg(short, long)]
    l: Option<usize>,
    /// Segments per packet.
    #[arg(short, long)]
    s: Option<usize>,
    /// Dependent group size.
    #[arg(short = 'R', long = "group-size")]
    r: Option<usize>,
    /// Bits per symbol, 1 or 8.
    #[arg(long)]
    q: Option<u8>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_hop2: Option<f64>,
    /// Bits per second for the modeled transmission time.
    #[arg(long)]
    data_rate: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e-5, 5e-5, 1e-4, 1e-3])]
    epsilon: Vec<f64>,
    #[arg(short = 'R', long = "group-size", value_delimiter = ',', default_values_t = vec![5, 10, 25, 50])]
    r: Vec<u32>,
    #[arg(short, long, default_value_t = 8)]
    b: u32,
    #[arg(short, long, default_value_t = 50)]
    l: u32,
    #[arg(short, long, default_value_t = 5)]
    s: u32,
    #[arg(short, long, default_value_t = 100)]
    g: u32,
}

impl ScenarioArgs {
    fn apply(&self, sc: &mut ScenarioConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    sc.$f = v;
                }
            )*};
        }
        set!(
            topology,
            mode,
            w,
            recovery,
            feedback,
            verification,
            g,
            l,
            s,
            r,
            q,
            epsilon,
            data_rate
        );
        if self.dependent_rows.is_some() {
            sc.dependent_rows = self.dependent_rows;
        }
        if self.epsilon_hop2.is_some() {
            sc.epsilon_hop2 = self.epsilon_hop2;
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => {
            let mut sc = match &cli.config {
                Some(p) => ScenarioConfig::from_toml(&read(p)?)?,
                None => ScenarioConfig::default(),
            };
            args.apply(&mut sc);
            if let Some(s) = cli.seed {
                sc.seed = s;
            }
            if let Some(t) = cli.trials {
                sc.trials = t;
            }
            sc.timing |= cli.timing;
            let sim = run(&sc)?;
            let m = &sim.metrics;
            eprintln!(
                "{} trials: {:.2} transmissions, ADD {:.2}, recovery ratio {:.3}, {} decode failures",
                m.trials, m.total_transmissions, m.add, m.recovery_ratio, m.decode_failures
            );
            write_csv(output(&cli.out)?, &[(sc, sim.metrics)])?;
        }
        Command::Sweep { grid } => {
            let Some(path) = grid.as_ref().or(cli.config.as_ref()) else {
                bail!("sweep needs --grid or --config");
            };
            let mut spec = GridSpec::from_toml(&read(path)?)?;
            if let Some(s) = cli.seed {
                spec.base.seed = s;
            }
            if let Some(t) = cli.trials {
                spec.base.trials = t;
            }
            spec.base.timing |= cli.timing;
            sweep(&spec, output(&cli.out)?)?;
        }
        Command::Analyze(a) => {
            let crc = Crc8::shared(CrcSpec::default());
            let mut w = csv::Writer::from_writer(output(&cli.out)?);
            w.write_record(AnalysisRow::HEADER)?;
            for &epsilon in &a.epsilon {
                if !(0.0..=1.0).contains(&epsilon) {
                    bail!("epsilon {epsilon} is outside [0, 1]");
                }
                for &r in &a.r {
                    let p = AnalysisParams {
                        epsilon,
                        b: a.b,
                        r,
                        l: a.l,
                        s: a.s,
                        g: a.g,
                    };
                    w.write_record(AnalysisRow::evaluate(p, crc).record())?;
                }
            }
            w.flush()?;
        }
        Command::Validate { scale } => {
            let checks = validate(*scale, cli.seed.unwrap_or(1));
            let mut out = output(&cli.out)?;
            for c in &checks {
                writeln!(out, "{}", c.line())?;
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            writeln!(
                out,
                "{} of {} checks passed",
                checks.len() - failed,
                checks.len()
            )?;
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
