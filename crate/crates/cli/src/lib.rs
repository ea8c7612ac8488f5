//! Command-line front end for the contint diagnostics.

pub mod cli;
pub mod config;
pub mod run;

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use contint::moduli::Verdict;

use config::{ExperimentConfig, Expectation};
use run::Outcome;

/// Exit status when a verdict contradicts the configured expectation.
pub const EXIT_UNEXPECTED: u8 = 2;

/// Resolves and runs `cfg`, then writes its reports. Returns the exit code.
pub fn run_config(cfg: &ExperimentConfig) -> Result<u8> {
    let resolved = run::resolve(cfg)?;
    let outcome = run::execute(&resolved)?;
    write_reports(&resolved, &outcome)?;
    Ok(exit_code(resolved.experiment.expect, outcome.verdict))
}

pub fn exit_code(expect: Option<Expectation>, verdict: Option<Verdict>) -> u8 {
    match (expect, verdict) {
        (Some(Expectation::Holds), Some(Verdict::Fails)) | (Some(Expectation::Fails), Some(Verdict::Holds)) => {
            EXIT_UNEXPECTED
        }
        _ => 0,
    }
}

fn write_reports(cfg: &ExperimentConfig, outcome: &Outcome) -> Result<()> {
    let config_text = cfg.to_toml()?;
    let mut rendered = Vec::new();
    for (name, csv) in &outcome.reports {
        let mut csv = csv.clone();
        if let Some(v) = outcome.verdict {
            csv.meta("overall_verdict", v);
        }
        csv.meta("config", config_text.trim_end());
        rendered.push((name, csv.render()));
    }
    match &cfg.output.dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            for (name, text) in rendered {
                let path = Path::new(dir).join(format!("{name}.csv"));
                fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        None => {
            for (i, (_, text)) in rendered.iter().enumerate() {
                if i > 0 {
                    println!();
                }
                print!("{text}");
            }
        }
    }
    Ok(())
}
