//! Report serialization: JSON, per-trial CSV with a summary sibling file, and
//! plot-ready tuples.

use std::ffi::OsStr;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binomial::{CertificateEntry, CertificateReport, ProofStepReport};
use crate::experiment::{CrossValReport, ExperimentError, SummaryReport, TailScanReport};
use crate::oracle::DiscrepancyResult;
use crate::witness::WitnessResult;

const Z_99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    /// `(s, value, ci_low, ci_high)` tuples for external plotting tools.
    PlotData,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "plot" | "plot-data" | "plot_data" | "plotdata" => Ok(Self::PlotData),
            other => Err(format!(
                "unknown output format {other:?} (expected json, csv, or plot)"
            )),
        }
    }
}

/// A report that knows how to write itself in the supported formats.
pub trait Emit {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError>;

    fn write_csv(&self, _out: &mut dyn Write) -> Result<(), ExperimentError> {
        Err(ExperimentError::Config(
            "csv output not supported for this report".into(),
        ))
    }

    fn write_plot_data(&self, _out: &mut dyn Write) -> Result<(), ExperimentError> {
        Err(ExperimentError::Config(
            "plot output not supported for this report".into(),
        ))
    }

    /// Content for the summary file written next to a per-row CSV.
    fn csv_footer(&self) -> Option<String> {
        None
    }
}

fn json_to<T: Serialize>(value: &T, out: &mut dyn Write) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `report` to `path`. CSV reports with a footer additionally write
/// `<stem>.summary.<ext>` next to the main file.
pub fn emit<R: Emit + ?Sized>(
    report: &R,
    format: OutputFormat,
    path: &Path,
) -> Result<(), ExperimentError> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Json => report.write_json(&mut out)?,
        OutputFormat::Csv => {
            report.write_csv(&mut out)?;
            if let Some(footer) = report.csv_footer() {
                std::fs::write(summary_sibling(path), footer)?;
            }
        }
        OutputFormat::PlotData => report.write_plot_data(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn summary_sibling(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(OsStr::to_str).unwrap_or("report");
    let mut name = format!("{stem}.summary");
    if let Some(ext) = path.extension().and_then(OsStr::to_str) {
        name.push('.');
        name.push_str(ext);
    }
    path.with_file_name(name)
}

impl Emit for SummaryReport {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(out, "trial_index,excess,k,normalized_excess,tail_event")?;
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{},{}",
                t.trial_index, t.excess, t.k, t.normalized_excess, t.tail_event
            )?;
        }
        Ok(())
    }

    fn write_plot_data(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(out, "dim,mean_normalized_excess,ci_low,ci_high")?;
        writeln!(
            out,
            "{},{},{},{}",
            self.config.dim,
            self.mean_normalized_excess,
            self.mean_normalized_excess - self.ci99_half_width,
            self.mean_normalized_excess + self.ci99_half_width
        )?;
        Ok(())
    }

    fn csv_footer(&self) -> Option<String> {
        let c = &self.config;
        Some(format!(
            "n_points,dim,trials,base_seed,rule,tail_threshold_factor,\
             mean_normalized_excess,median_normalized_excess,min_normalized_excess,\
             max_normalized_excess,ci99_half_width,mean_k,k_bound,tail_fraction,\
             normalized_excess_bound,bound_met,guarantees_apply\n\
             {},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.n_points,
            c.dim,
            c.trials,
            c.base_seed,
            c.rule,
            c.tail_threshold_factor,
            self.mean_normalized_excess,
            self.median_normalized_excess,
            self.min_normalized_excess,
            self.max_normalized_excess,
            self.ci99_half_width,
            self.mean_k,
            self.k_bound,
            self.tail_fraction,
            self.normalized_excess_bound,
            self.bound_met,
            self.guarantees_apply,
        ))
    }
}

impl Emit for TailScanReport {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(
            out,
            "dim,n_points,trials,tail_event_threshold,tail_fraction,mean_k,\
             mean_normalized_excess,ci99_half_width"
        )?;
        for e in &self.entries {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                e.dim,
                e.n_points,
                e.trials,
                e.tail_event_threshold,
                e.tail_fraction,
                e.mean_k,
                e.mean_normalized_excess,
                e.ci99_half_width
            )?;
        }
        Ok(())
    }

    fn write_plot_data(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(out, "dim,tail_fraction,ci_low,ci_high")?;
        for e in &self.entries {
            // normal-approximation interval for a proportion
            let half = Z_99 * (e.tail_fraction * (1.0 - e.tail_fraction) / e.trials as f64).sqrt();
            writeln!(
                out,
                "{},{},{},{}",
                e.dim,
                e.tail_fraction,
                (e.tail_fraction - half).max(0.0),
                (e.tail_fraction + half).min(1.0)
            )?;
        }
        Ok(())
    }

    fn csv_footer(&self) -> Option<String> {
        Some(format!("non_increasing\n{}\n", self.non_increasing))
    }
}

impl Emit for CrossValReport {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(out, "trial_index,d_star,excess,normalized_excess")?;
        for t in &self.trials {
            writeln!(
                out,
                "{},{},{},{}",
                t.trial_index, t.d_star, t.excess, t.normalized_excess
            )?;
        }
        Ok(())
    }

    fn csv_footer(&self) -> Option<String> {
        Some(format!(
            "trials,violations,mean_scaled_discrepancy,mean_scaled_witness\n{},{},{},{}\n",
            self.trials.len(),
            self.violations.len(),
            self.mean_scaled_discrepancy,
            self.mean_scaled_witness,
        ))
    }
}

fn certificate_rows(
    entries: &[CertificateEntry],
    out: &mut dyn Write,
) -> Result<(), ExperimentError> {
    writeln!(out, "n,p_num,p_den,cutoff,tail_prob,bound,holds")?;
    for e in entries {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.query.n, e.query.p_num, e.query.p_den, e.query.cutoff, e.tail_prob, e.bound, e.holds
        )?;
    }
    Ok(())
}

impl Emit for CertificateReport {
    /// The JSON form carries the summary (counts, minimum margin, arg-min
    /// query); the full entry list goes to CSV.
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        #[derive(Serialize)]
        struct JsonSummary<'a> {
            name: &'a str,
            summary: &'a crate::binomial::CertificateSummary,
        }
        json_to(
            &JsonSummary {
                name: &self.name,
                summary: &self.summary,
            },
            out,
        )
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        certificate_rows(&self.entries, out)
    }
}

impl Emit for ProofStepReport {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        writeln!(
            out,
            "check,checked,violations,min_margin,argmin_n,argmin_p_num,argmin_p_den"
        )?;
        for (name, check) in [
            ("central_binomial", &self.central_binomial),
            ("window_count", &self.window_count),
            ("median", &self.median),
            ("mode_probability", &self.mode_probability),
        ] {
            let (margin, n, p_num, p_den) = match (&check.min_margin, &check.argmin) {
                (Some(m), Some(c)) => (m.to_string(), c.n, c.p_num, c.p_den),
                _ => (String::new(), 0, 0, 0),
            };
            writeln!(
                out,
                "{name},{},{},{margin},{n},{p_num},{p_den}",
                check.checked, check.violations
            )?;
        }
        Ok(())
    }
}

impl Emit for WitnessResult {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }
}

impl Emit for DiscrepancyResult {
    fn write_json(&self, out: &mut dyn Write) -> Result<(), ExperimentError> {
        json_to(self, out)
    }
}
