use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pharmasim_core::analysis::{analyze_paths, load_logs};
use pharmasim_core::discourse::{build_discussions, indicator_rows, indicators_from};
use pharmasim_core::pharmacist::{PharmacistAgent, PromptTemplateSet, ScriptedProvider};
use pharmasim_core::scenario::{validate_scenario, Scenario, ScenarioSet};
use pharmasim_core::scoring::{read_grades, score_session, PhaseScores};
use pharmasim_core::session::{encode_log, read_events, regenerate};

use crate::provider::ProviderSettings;
use crate::server::{self, ApiConfig};

#[derive(Debug, Parser)]
#[command(name = "pharmasim", version, about = "Diagnostic-reasoning simulation: service and analysis tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportKind {
    /// Surface indicators per session and per discussion.
    Indicators,
    /// One row per student, phase and measure.
    Long,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario file, or every `*.json` in a directory.
    Validate { path: PathBuf },
    /// Regenerate a log with the scripted mentor and compare it byte for byte.
    Replay {
        log: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Also write the regenerated log here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strategy scores for every log in a directory.
    Score {
        logs: PathBuf,
        grades: PathBuf,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Label distributions, rater agreement and the condition comparison.
    Analyze {
        logs: PathBuf,
        annotations: PathBuf,
        #[arg(long)]
        grades: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
        /// Aggregate this rater's labels instead of the default primary rater.
        #[arg(long)]
        rater: Option<String>,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// CSV export for external analysis.
    Export {
        logs: PathBuf,
        #[arg(long, value_enum, default_value = "indicators")]
        kind: ExportKind,
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        grades: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// Run the HTTP service. Provider settings come from the environment.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080", env = "PHARMASIM_BIND")]
        bind: SocketAddr,
        #[arg(long, env = "PHARMASIM_STORE", default_value = "sessions")]
        store: PathBuf,
        #[arg(long, env = "PHARMASIM_SCENARIOS")]
        scenarios: Option<PathBuf>,
        #[arg(long, env = "PHARMASIM_TEMPLATES")]
        templates: Option<PathBuf>,
    },
}

fn scenario_set(dir: Option<&Path>) -> anyhow::Result<ScenarioSet> {
    Ok(match dir {
        Some(d) => ScenarioSet::load_dir(d).with_context(|| format!("loading scenarios from {}", d.display()))?,
        None => ScenarioSet::builtin(),
    })
}

/// Runs one subcommand; the returned code is the process exit status.
pub fn execute(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Validate { path } => validate(&path, out),
        Command::Replay {
            log,
            scenarios,
            templates,
            out: dest,
        } => replay(&log, scenarios.as_deref(), templates.as_deref(), dest.as_deref(), out),
        Command::Score {
            logs,
            grades,
            scenarios,
            format,
        } => score(&logs, &grades, scenarios.as_deref(), format, out),
        Command::Analyze {
            logs,
            annotations,
            grades,
            scenarios,
            rater,
            format,
        } => {
            let set = scenario_set(scenarios.as_deref())?;
            let a = analyze_paths(&logs, Some(&annotations), grades.as_deref(), &set, rater.as_deref())?;
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&a)?)?,
                Format::Csv => write_csv(out, &a.report.rows)?,
                Format::Table => {
                    write!(out, "{}", a.report.render_table())?;
                    writeln!(out)?;
                    for k in &a.agreement {
                        let kappa = k.kappa.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
                        writeln!(out, "kappa {} {}/{} n={} {kappa}", k.dimension, k.rater_a, k.rater_b, k.n)?;
                    }
                }
            }
            Ok(0)
        }
        Command::Export {
            logs,
            kind,
            annotations,
            grades,
            scenarios,
        } => {
            let set = scenario_set(scenarios.as_deref())?;
            match kind {
                ExportKind::Indicators => {
                    let mut rows = Vec::new();
                    for log in load_logs(&logs, &set)? {
                        let discussions = build_discussions(&log.events)
                            .with_context(|| format!("segmenting {}", log.path.display()))?;
                        let ind = indicators_from(&log.events, &discussions);
                        let student = log.student_id().to_string();
                        rows.extend(indicator_rows(&student, &ind, &discussions));
                    }
                    write_csv(out, &rows)?;
                }
                ExportKind::Long => {
                    let a = analyze_paths(&logs, annotations.as_deref(), grades.as_deref(), &set, None)?;
                    write_csv(out, &a.long_rows())?;
                }
            }
            Ok(0)
        }
        Command::Serve {
            bind,
            store,
            scenarios,
            templates,
        } => {
            let config = ApiConfig {
                bind,
                scenario_dir: scenarios,
                templates,
                provider: ProviderSettings::from_env()?,
                store_dir: store,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(config, shutdown_signal()))?;
            Ok(0)
        }
    }
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!(error = %e, "cannot listen for ctrl-c");
        std::future::pending::<()>().await;
    }
}

fn write_csv<T: serde::Serialize>(out: &mut dyn Write, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn validate(path: &Path, out: &mut dyn Write) -> anyhow::Result<i32> {
    let files = if path.is_dir() {
        let mut v: Vec<_> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        bail!("no scenario files in {}", path.display());
    }
    let mut failed = false;
    for f in files {
        let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
        let scenario: Scenario = match serde_json::from_str(&text) {
            Ok(s) => s,
            Err(e) => {
                failed = true;
                eprintln!("{}: malformed scenario: {e}", f.display());
                continue;
            }
        };
        let issues = validate_scenario(&scenario);
        if issues.is_empty() {
            writeln!(out, "{}: ok ({})", f.display(), scenario.id)?;
        } else {
            failed = true;
            for i in issues {
                eprintln!("{}: {}: {}", f.display(), i.path, i.message);
            }
        }
    }
    Ok(if failed { 1 } else { 0 })
}

fn replay(
    log: &Path,
    scenarios: Option<&Path>,
    templates: Option<&Path>,
    dest: Option<&Path>,
    out: &mut dyn Write,
) -> anyhow::Result<i32> {
    let original = fs::read(log).with_context(|| format!("reading {}", log.display()))?;
    let events = read_events(original.as_slice()).with_context(|| format!("reading {}", log.display()))?;
    let agent = match templates {
        Some(p) => PharmacistAgent::new(PromptTemplateSet::load_file(p)?, Default::default()),
        None => PharmacistAgent::with_defaults(),
    };
    let set = Arc::new(scenario_set(scenarios)?);
    let again = encode_log(&regenerate(&events, set, &agent, &ScriptedProvider::default())?);
    if let Some(d) = dest {
        fs::write(d, &again).with_context(|| format!("writing {}", d.display()))?;
    }
    if again.as_bytes() == original.as_slice() {
        writeln!(out, "identical: {} events", events.len())?;
        return Ok(0);
    }
    let line = again
        .lines()
        .zip(String::from_utf8_lossy(&original).lines())
        .position(|(a, b)| a != b)
        .unwrap_or_else(|| again.lines().count().min(events.len()));
    eprintln!("{}: regenerated log differs from line {}", log.display(), line + 1);
    Ok(1)
}

fn score(logs: &Path, grades: &Path, scenarios: Option<&Path>, format: Format, out: &mut dyn Write) -> anyhow::Result<i32> {
    let set = scenario_set(scenarios)?;
    let grades = read_grades(fs::File::open(grades).with_context(|| format!("opening {}", grades.display()))?)?;
    let mut all: Vec<PhaseScores> = Vec::new();
    for log in load_logs(logs, &set)? {
        all.extend(score_session(&log.events, &set, &grades).with_context(|| format!("scoring {}", log.path.display()))?);
    }
    match format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&all)?)?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["student_id", "phase", "checklist_pct", "interpersonal_pct", "interpretation_pct"])?;
            for s in &all {
                w.write_record([
                    s.student_id.clone(),
                    s.phase.to_string(),
                    s.scores.checklist_pct.to_string(),
                    s.scores.interpersonal_pct.to_string(),
                    s.scores.interpretation_pct.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Table => {
            writeln!(
                out,
                "{:<16} {:<5} {:>10} {:>14} {:>15}",
                "student", "phase", "checklist", "interpersonal", "interpretation"
            )?;
            for s in &all {
                writeln!(
                    out,
                    "{:<16} {:<5} {:>10.2} {:>14.2} {:>15.2}",
                    s.student_id, s.phase, s.scores.checklist_pct, s.scores.interpersonal_pct, s.scores.interpretation_pct
                )?;
            }
        }
    }
    Ok(0)
}
