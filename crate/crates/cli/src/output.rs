//! Trace, summary and figure tables.

use std::io::Write;

use nvhf_core::protocol::{median, StepSummary, TrialEnsemble};
use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// Column order of the trace table.
pub const TRACE_HEADER: [&str; 15] = [
    "trial",
    "k",
    "tau_us",
    "m_k",
    "Z_k",
    "A_k_MHz",
    "Delta_k_MHz",
    "R_k_us",
    "Delta_QML_MHz",
    "Delta_SQL_MHz",
    "resonance_ok",
    "taylor_ok",
    "visibility_ok",
    "qml_ok",
    "repeated_tau",
];

/// Column order of the figure table.
pub const FIGURE_HEADER: [&str; 6] = ["model", "K", "Delta_K", "Delta_QML", "Delta_SQL", "Delta_K_over_QML"];

/// One step of one trial; field names match [`TRACE_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub trial: usize,
    pub k: usize,
    pub tau_us: f64,
    pub m_k: u64,
    #[serde(rename = "Z_k")]
    pub z_k: f64,
    #[serde(rename = "A_k_MHz")]
    pub a_k_mhz: f64,
    #[serde(rename = "Delta_k_MHz")]
    pub delta_k_mhz: f64,
    #[serde(rename = "R_k_us")]
    pub r_k_us: f64,
    #[serde(rename = "Delta_QML_MHz")]
    pub delta_qml_mhz: f64,
    #[serde(rename = "Delta_SQL_MHz")]
    pub delta_sql_mhz: f64,
    pub resonance_ok: bool,
    pub taylor_ok: bool,
    pub visibility_ok: bool,
    pub qml_ok: bool,
    pub repeated_tau: bool,
}

impl TraceRow {
    fn fields(&self) -> [String; 15] {
        let f = |x: f64| format!("{x:.16e}");
        [
            self.trial.to_string(),
            self.k.to_string(),
            f(self.tau_us),
            self.m_k.to_string(),
            f(self.z_k),
            f(self.a_k_mhz),
            f(self.delta_k_mhz),
            f(self.r_k_us),
            f(self.delta_qml_mhz),
            f(self.delta_sql_mhz),
            self.resonance_ok.to_string(),
            self.taylor_ok.to_string(),
            self.visibility_ok.to_string(),
            self.qml_ok.to_string(),
            self.repeated_tau.to_string(),
        ]
    }
}

pub fn trace_rows(ensemble: &TrialEnsemble) -> Vec<TraceRow> {
    ensemble
        .traces
        .iter()
        .enumerate()
        .flat_map(|(trial, t)| {
            t.steps.iter().map(move |s| TraceRow {
                trial,
                k: s.k,
                tau_us: s.tau,
                m_k: s.m,
                z_k: s.z,
                a_k_mhz: s.a_k,
                delta_k_mhz: s.delta_k,
                r_k_us: s.r_k,
                delta_qml_mhz: s.delta_qml,
                delta_sql_mhz: s.delta_sql,
                resonance_ok: s.constraints.resonance_ok,
                taylor_ok: s.constraints.taylor_ok,
                visibility_ok: s.constraints.visibility_ok,
                qml_ok: s.constraints.qml_ok,
                repeated_tau: s.repeated_tau,
            })
        })
        .collect()
}

pub fn write_trace<W: Write>(rows: &[TraceRow], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TRACE_HEADER).map_err(output_err)?;
            for row in rows {
                w.write_record(row.fields()).map_err(output_err)?;
            }
            w.flush().map_err(output_err)
        }
        Format::Json => write_json(rows, out),
    }
}

/// Aggregate statistics over the final step of every trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub error_model: String,
    pub trials: usize,
    pub true_a_mhz: f64,
    pub median_steps: f64,
    #[serde(rename = "median_Delta_K_MHz")]
    pub median_delta_k_mhz: f64,
    /// Median over trials of `Δ_K/Δ_QML`.
    pub median_ratio_qml: f64,
    /// Median over trials of `Δ_K/Δ_SQL`.
    pub median_ratio_sql: f64,
    /// Fraction of trials with the true `A` inside `A_K ± 1.96Δ_K`.
    pub coverage: f64,
    pub steps: Vec<StepSummary>,
}

pub fn summarize(ensemble: &TrialEnsemble) -> Summary {
    let last = |f: &dyn Fn(&nvhf_core::protocol::StepRecord) -> f64| {
        ensemble.traces.iter().map(|t| f(t.last())).collect::<Vec<_>>()
    };
    Summary {
        error_model: ensemble.config.error_model.name().to_string(),
        trials: ensemble.traces.len(),
        true_a_mhz: ensemble.config.true_a(),
        median_steps: median(&ensemble.traces.iter().map(|t| t.steps.len() as f64).collect::<Vec<_>>()),
        median_delta_k_mhz: median(&ensemble.final_deltas()),
        median_ratio_qml: median(&last(&|s| s.delta_k / s.delta_qml)),
        median_ratio_sql: median(&last(&|s| s.delta_k / s.delta_sql)),
        coverage: ensemble.final_coverage(),
        steps: ensemble.summaries(),
    }
}

/// Median precisions per step, each divided by its own step-1 value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRow {
    pub model: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Delta_K")]
    pub delta_k: f64,
    #[serde(rename = "Delta_QML")]
    pub delta_qml: f64,
    #[serde(rename = "Delta_SQL")]
    pub delta_sql: f64,
    /// Median over trials of the unnormalized `Δ_K/Δ_QML`.
    #[serde(rename = "Delta_K_over_QML")]
    pub delta_k_over_qml: f64,
}

/// Plot-ready precision curves of one ensemble.
pub fn emit_figure_data(ensemble: &TrialEnsemble) -> Vec<FigureRow> {
    let summaries = ensemble.summaries();
    let Some(first) = summaries.first().copied() else {
        return Vec::new();
    };
    let model = ensemble.config.error_model.name();
    summaries
        .iter()
        .map(|s| FigureRow {
            model: model.to_string(),
            k: s.k,
            delta_k: s.median_delta / first.median_delta,
            delta_qml: s.median_delta_qml / first.median_delta_qml,
            delta_sql: s.median_delta_sql / first.median_delta_sql,
            delta_k_over_qml: s.median_ratio_qml,
        })
        .collect()
}

pub fn write_figure<W: Write>(rows: &[FigureRow], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(FIGURE_HEADER).map_err(output_err)?;
            for r in rows {
                let f = |x: f64| format!("{x:.16e}");
                w.write_record([
                    r.model.clone(),
                    r.k.to_string(),
                    f(r.delta_k),
                    f(r.delta_qml),
                    f(r.delta_sql),
                    f(r.delta_k_over_qml),
                ])
                .map_err(output_err)?;
            }
            w.flush().map_err(output_err)
        }
        Format::Json => write_json(rows, out),
    }
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, value).map_err(output_err)?;
    out.write_all(b"\n").map_err(output_err)
}

fn output_err(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}
