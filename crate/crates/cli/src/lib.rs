//! `ddbforge` command line. [`run`] does all the work and returns what to
//! print, so it can be tested without spawning a process.
//!
//! Exit codes: 0 success, 1 validation errors (or a failed simulation),
//! 2 input or usage errors, 3 I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use ddbforge_core::codegen::emit_bundle;
use ddbforge_core::fragmenter::FragmentationPlan;
use ddbforge_core::pipeline::{compile, InputError};
use ddbforge_core::simulator::{generate_dataset, simulate, Dataset};
use ddbforge_core::validator::{validate, validate_with_sample, Level, Overall, ValidationReport};
use ddbforge_service::ServiceConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const REDACTED: &str = ddbforge_service::REDACTED;
pub const DEFAULT_ROWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Plan,
    Generate,
    Simulate,
    Serve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Compile a relational schema, a site topology and a distribution policy
/// into per-site Oracle scripts.
#[derive(Debug, Clone, Parser)]
#[command(name = "ddbforge", version)]
pub struct CliConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// DDL file with the centralized schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Topology JSON file.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Distribution policy JSON file.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Dataset JSON: sample rows for `validate`, input for `simulate`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for `generate`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of a generated dataset for `simulate`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Row cap per table of a generated dataset.
    #[arg(long, default_value_t = DEFAULT_ROWS)]
    pub rows: usize,
    /// Port for `serve`.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory `serve` writes projects to and reloads them from.
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
    /// Origin allowed to call `serve` from a browser. Any when unset.
    #[arg(long)]
    pub allow_origin: Option<String>,
    /// Replace link secrets with a placeholder in plans and scripts.
    #[arg(long)]
    pub redact: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Disable ANSI styling of text output.
    #[arg(long, env = "DDBFORGE_NO_COLOR", value_parser = clap::builder::FalseyValueParser::new())]
    pub no_color: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Self { code, stdout: String::new(), stderr }
    }
}

struct Styler {
    on: bool,
}

impl Styler {
    fn paint(&self, text: &str, code: &str) -> String {
        if self.on {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    /// Color level words and the overall line of a rendered report.
    fn report(&self, text: &str) -> String {
        if !self.on {
            return text.to_string();
        }
        text.lines()
            .map(|line| {
                let styled = [("error", "31"), ("indeterminate", "35"), ("warning", "33"), ("pass", "32")]
                    .iter()
                    .find(|(word, _)| line.trim_end().ends_with(word) && !line.starts_with(' '))
                    .map(|(word, code)| {
                        let cut = line.trim_end().len() - word.len();
                        format!("{}{}", &line[..cut], self.paint(word, code))
                    });
                styled.unwrap_or_else(|| line.to_string()) + "\n"
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String, Outcome> {
    fs::read_to_string(path)
        .map_err(|e| Outcome::fail(EXIT_IO, format!("error: reading {}: {e}", path.display())))
}

fn input_error(e: &InputError) -> Outcome {
    Outcome::fail(EXIT_INPUT, format!("error: {e}"))
}

fn load_plan(config: &CliConfig) -> Result<FragmentationPlan, Outcome> {
    let need = |p: &Option<PathBuf>, flag: &str| {
        p.clone().ok_or_else(|| Outcome::fail(EXIT_INPUT, format!("error: --{flag} is required")))
    };
    let schema = read(&need(&config.schema, "schema")?)?;
    let topology = read(&need(&config.topology, "topology")?)?;
    let policy = read(&need(&config.policy, "policy")?)?;
    let plan = compile(&schema, &topology, &policy).map_err(|e| input_error(&e))?;
    Ok(if config.redact { plan.redacted(REDACTED) } else { plan })
}

fn load_data(path: &Path, plan: &FragmentationPlan) -> Result<Dataset, Outcome> {
    let text = read(path)?;
    Dataset::from_json(&text, &plan.schema)
        .map_err(|e| Outcome::fail(EXIT_INPUT, format!("error: dataset {}: {e}", path.display())))
}

fn render_report(report: &ValidationReport, config: &CliConfig, style: &Styler) -> String {
    match config.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => style.report(&report.render_text()),
    }
}

/// Run one command. `serve` blocks until the server stops.
pub fn run(config: &CliConfig) -> Outcome {
    match run_inner(config) {
        Ok(o) | Err(o) => o,
    }
}

fn run_inner(config: &CliConfig) -> Result<Outcome, Outcome> {
    let style = Styler { on: !config.no_color && config.format == Format::Text };
    match config.command {
        Command::Validate => {
            let plan = load_plan(config)?;
            let report = match &config.data {
                Some(path) => validate_with_sample(&plan, &plan.schema, &load_data(path, &plan)?),
                None => validate(&plan, &plan.schema),
            };
            let code = if report.is_invalid() { EXIT_INVALID } else { EXIT_OK };
            Ok(Outcome { code, stdout: render_report(&report, config, &style), stderr: String::new() })
        }
        Command::Plan => {
            let plan = load_plan(config)?;
            Ok(Outcome { code: EXIT_OK, stdout: plan.to_json() + "\n", stderr: String::new() })
        }
        Command::Generate => {
            let out = config
                .out
                .as_ref()
                .ok_or_else(|| Outcome::fail(EXIT_INPUT, "error: generate needs --out"))?;
            let plan = load_plan(config)?;
            let report = validate(&plan, &plan.schema);
            if report.is_invalid() {
                return Ok(Outcome {
                    code: EXIT_INVALID,
                    stdout: render_report(&report, config, &style),
                    stderr: "error: the plan has validation errors; no scripts written\n".into(),
                });
            }
            let mut stderr = String::new();
            if report.overall == Overall::ValidWithWarnings {
                let n = report
                    .verdicts
                    .iter()
                    .filter(|v| matches!(v.level, Level::Warning | Level::Indeterminate))
                    .count();
                let _ = writeln!(
                    stderr,
                    "{}",
                    style.paint(&format!("warning: generating despite {n} validation warning(s)"), "33")
                );
            }
            let written = emit_bundle(&plan, out).map_err(|e| match e {
                ddbforge_core::codegen::CodegenError::Io { .. } => {
                    Outcome::fail(EXIT_IO, format!("error: {e}"))
                }
                other => Outcome::fail(EXIT_INPUT, format!("error: {other}")),
            })?;
            let stdout = match config.format {
                Format::Json => {
                    let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
                    serde_json::to_string_pretty(&files).expect("paths serialize") + "\n"
                }
                Format::Text => written.iter().map(|p| format!("wrote {}\n", p.display())).collect(),
            };
            Ok(Outcome { code: EXIT_OK, stdout, stderr })
        }
        Command::Simulate => {
            let plan = load_plan(config)?;
            let data = match (&config.data, config.seed) {
                (Some(path), None) => load_data(path, &plan)?,
                (None, Some(seed)) => generate_dataset(&plan, seed, config.rows)
                    .map_err(|e| Outcome::fail(EXIT_INPUT, format!("error: {e}")))?,
                _ => {
                    return Err(Outcome::fail(
                        EXIT_INPUT,
                        "error: simulate needs exactly one of --data or --seed",
                    ))
                }
            };
            let report = validate(&plan, &plan.schema);
            if report.is_invalid() {
                return Ok(Outcome {
                    code: EXIT_INVALID,
                    stdout: render_report(&report, config, &style),
                    stderr: "error: the plan has validation errors; nothing simulated\n".into(),
                });
            }
            let sim = simulate(&plan, &data);
            let stdout = match config.format {
                Format::Json => sim.to_json() + "\n",
                Format::Text => sim.render_text(),
            };
            Ok(Outcome {
                code: if sim.passed { EXIT_OK } else { EXIT_INVALID },
                stdout,
                stderr: String::new(),
            })
        }
        Command::Serve => {
            let addr = SocketAddr::from(([0, 0, 0, 0], config.port));
            let service = ServiceConfig {
                state_dir: config.state_dir.clone(),
                allowed_origin: config.allow_origin.clone(),
            };
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Outcome::fail(EXIT_IO, format!("error: {e}")))?;
            eprintln!("listening on http://{addr}");
            runtime
                .block_on(ddbforge_service::serve(addr, service))
                .map_err(|e| Outcome::fail(EXIT_IO, format!("error: {e}")))?;
            Ok(Outcome::default())
        }
    }
}
