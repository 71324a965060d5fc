use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::builder::PossibleValuesParser;
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

use split_xray_cli::config::{ExperimentConfig, Format, PartialConfig, COMMANDS};
use split_xray_cli::{run, suites};

const USAGE_ERROR: u8 = 2;
const CHECK_FAILURE: u8 = 1;

/// Verification suites for the split-signature X-ray transform.
///
/// Every flag overrides the key of the same name in the TOML file given
/// with --config.
#[derive(Parser, Debug)]
#[command(name = "split-xray", version)]
struct Cli {
    /// Suite to run; falls back to `command` in the config file.
    #[arg(value_parser = PossibleValuesParser::new(COMMANDS))]
    command: Option<String>,

    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    richardson: Option<bool>,
    /// Tolerance override as name=value; repeatable.
    #[arg(long = "tolerances", value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "max_degree")]
    max_degree: Option<u32>,
    /// zero, flagship-u1, asd-u1, pure-gauge, pure-gauge(c1,c2,c3,c4), su2-constant.
    #[arg(long)]
    connection: Option<String>,
    /// Report path; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, alias = "n_frames")]
    n_frames: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    /// First elementary-state covector, e.g. "1,0,i,0".
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Second elementary-state covector.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Write the reconstruct design matrix CSV here (sidecar gets .json).
    #[arg(long, alias = "design_output")]
    design_output: Option<PathBuf>,
    /// Worker threads; SPLIT_XRAY_THREADS is used when absent.
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected name=value")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Cli {
    fn into_partial(self) -> anyhow::Result<PartialConfig> {
        let file = match &self.config {
            Some(p) => PartialConfig::from_file(p)?,
            None => PartialConfig::default(),
        };
        let flags = PartialConfig {
            command: self.command,
            nodes: self.nodes,
            h: self.h,
            richardson: self.richardson,
            tolerances: self.tolerances.into_iter().collect(),
            seed: self.seed,
            max_degree: self.max_degree,
            connection: self.connection,
            output: self.output,
            format: self.format,
            points: self.points,
            n_frames: self.n_frames,
            noise: self.noise,
            a: self.a,
            b: self.b,
            design_output: self.design_output,
            threads: self.threads,
        };
        Ok(file.merge(flags))
    }
}

fn output(cfg: &ExperimentConfig) -> anyhow::Result<Box<dyn Write>> {
    Ok(match &cfg.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("{}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn threads(cfg: &ExperimentConfig) -> anyhow::Result<Option<usize>> {
    if cfg.threads.is_some() {
        return Ok(cfg.threads);
    }
    match std::env::var("SPLIT_XRAY_THREADS") {
        Ok(v) => Ok(Some(v.parse().context("SPLIT_XRAY_THREADS")?)),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            eprint!("{msg}");
            if !msg.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let cfg = match cli.into_partial().and_then(|p| Ok(ExperimentConfig::resolve(p)?)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    match execute(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}

fn execute(cfg: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    if let Some(n) = threads(cfg)? {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    if cfg.command == "export-basis" {
        let mut out = output(cfg)?;
        suites::export_basis(cfg, &mut out)?;
        out.flush()?;
        return Ok(ExitCode::SUCCESS);
    }
    let report = run(cfg)?;
    let mut out = output(cfg)?;
    match cfg.format {
        Format::Json => writeln!(out, "{}", report.to_json()?)?,
        Format::Csv => report.write_csv(&mut out)?,
    }
    out.flush()?;
    if report.pass {
        return Ok(ExitCode::SUCCESS);
    }
    for c in report.failures() {
        eprintln!(
            "FAIL {}: value {:e} exceeds tolerance {:e}",
            c.name, c.value, c.tolerance
        );
    }
    Ok(ExitCode::from(CHECK_FAILURE))
}
