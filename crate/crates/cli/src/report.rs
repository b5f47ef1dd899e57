//! Output files.
//!
//! Every output directory receives a `manifest.json` holding the resolved
//! configuration; it can be passed back to `--config` to rerun. Nothing
//! written here depends on the clock or the thread count unless benchmark
//! timings are requested.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use doi_core::simbench::BenchmarkReport;
use doi_core::{PosteriorDraws, SummaryRow};
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Chain health numbers stored next to the summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub sweeps: usize,
    pub retained: usize,
    pub alpha_acceptance: f64,
    pub final_k: usize,
    pub growth: Vec<usize>,
    pub sign_violations: usize,
    pub mean_occupied: f64,
    pub units: usize,
    pub mirrored_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub households: Option<usize>,
    pub pagerank_scores: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelledSummary {
    pub estimand: String,
    #[serde(flatten)]
    pub row: SummaryRow,
}

#[derive(Debug)]
pub enum RunResults {
    Fit {
        summaries: Vec<LabelledSummary>,
        draws: PosteriorDraws,
        diagnostics: FitDiagnostics,
    },
    Simulate {
        /// Unit table in the ingestion schema.
        units: Vec<u8>,
        /// Edge list, absent for household designs.
        edges: Option<Vec<u8>>,
        truth: Value,
    },
    Benchmark {
        report: BenchmarkReport,
        wall_time: bool,
    },
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io {
            context: format!("cannot write {}", path.display()),
            source: e,
        })
}

fn write_bytes(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable report");
    text.push('\n');
    write_bytes(dir, name, text.as_bytes())
}

/// Summary CSV with columns `estimand,mean,sd,q2.5,median,q97.5,length`.
pub fn summary_csv(summaries: &[LabelledSummary]) -> Result<Vec<u8>, CliError> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "estimand", "mean", "sd", "q2.5", "median", "q97.5", "length",
    ])?;
    for s in summaries {
        let r = &s.row;
        out.write_record([
            s.estimand.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.q025.to_string(),
            r.median.to_string(),
            r.q975.to_string(),
            r.length.to_string(),
        ])?;
    }
    out.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

/// Writes all files of a run into `outdir`, creating it if needed and
/// overwriting earlier outputs.
pub fn emit_report(outdir: &Path, results: &RunResults, manifest: &Value) -> Result<(), CliError> {
    std::fs::create_dir_all(outdir).map_err(|e| CliError::Io {
        context: format!("cannot create {}", outdir.display()),
        source: e,
    })?;
    match results {
        RunResults::Fit {
            summaries,
            draws,
            diagnostics,
        } => {
            write_bytes(outdir, "summary.csv", &summary_csv(summaries)?)?;
            write_json(
                outdir,
                "summary.json",
                &serde_json::json!({ "estimands": summaries, "diagnostics": diagnostics }),
            )?;
            let mut trace = create(outdir, "trace.csv")?;
            draws.write_trace(&mut trace)?;
            trace.flush()?;
        }
        RunResults::Simulate {
            units,
            edges,
            truth,
        } => {
            write_bytes(outdir, "units.csv", units)?;
            if let Some(e) = edges {
                write_bytes(outdir, "edges.csv", e)?;
            }
            write_json(outdir, "truth.json", truth)?;
        }
        RunResults::Benchmark { report, wall_time } => {
            let mut w = create(outdir, "summary.csv")?;
            report.write_summary(&mut w, *wall_time)?;
            w.flush()?;
            let mut w = create(outdir, "replicates.csv")?;
            report.write_replicates(&mut w, *wall_time)?;
            w.flush()?;
        }
    }
    write_json(outdir, "manifest.json", manifest)
}
