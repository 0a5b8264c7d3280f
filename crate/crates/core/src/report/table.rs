//! CSV tables.
//!
//! Every number that also appears in a plot is formatted by the functions
//! here, so the two always agree.

use std::collections::BTreeMap;

use super::{Method, MetricReport, ReportError};
use crate::metrics::{summarize, DistributionSummary};

/// `0.1018` becomes `10.18%`.
pub fn format_percent(value: f64) -> String {
    format!("{:.2}%", value * 100.0)
}

/// Mean and spread in the `10.18% ± 1.81` style: both in percentage points,
/// spread being the population standard deviation.
pub fn format_mean_std(mean: f64, std_dev: f64) -> String {
    format!("{:.2}% ± {:.2}", mean * 100.0, std_dev * 100.0)
}

/// Percentage points with two decimals and no sign, e.g. `1.81`.
pub fn format_points(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

/// Signed count, e.g. `+12`, `-3`, `0`.
pub fn format_delta(delta: i64) -> String {
    if delta > 0 {
        format!("+{delta}")
    } else {
        delta.to_string()
    }
}

fn format_exact(value: f64) -> String {
    format!("{value:.12}")
}

/// Label used for rows without an LLM stage.
pub const NO_LLM: &str = "--";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableMetric {
    Wer,
    McWer,
    /// WER of one speaker role's stream (`Doctor` or `Patient`).
    Speaker(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableGroup {
    pub llm: Option<String>,
    pub stt: String,
    pub method: Method,
    pub values: Vec<f64>,
}

impl TableGroup {
    pub fn label(&self) -> String {
        format!("{} / {} / {}", self.llm.as_deref().unwrap_or(NO_LLM), self.stt, self.method)
    }

    pub fn summary(&self) -> Option<DistributionSummary> {
        summarize(&self.values).ok()
    }
}

/// Per-conversation values of `metric`, grouped by (STT system, LLM, method).
pub fn table_groups(report: &MetricReport, metric: TableMetric) -> Vec<TableGroup> {
    let mut groups: BTreeMap<(String, Option<String>, Method), Vec<f64>> = BTreeMap::new();
    for row in &report.rows {
        let value = match &metric {
            TableMetric::Wer => Some(row.wer),
            TableMetric::McWer => row.mc_wer,
            TableMetric::Speaker(role) => row.speaker_wer.get(role).copied(),
        };
        let entry = groups.entry((row.system.clone(), row.llm.clone(), row.method)).or_default();
        entry.extend(value);
    }
    groups
        .into_iter()
        .map(|((stt, llm, method), values)| TableGroup { llm, stt, method, values })
        .collect()
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

/// One row per group, sorted by ascending mean WER. Groups with no values are
/// skipped with a warning.
pub fn emit_table(groups: &[TableGroup]) -> Result<String, ReportError> {
    emit_metric_table("WER", groups)
}

/// Same as [`emit_table`] with `metric` naming the value columns.
pub fn emit_metric_table(metric: &str, groups: &[TableGroup]) -> Result<String, ReportError> {
    let mut rows: Vec<(&TableGroup, DistributionSummary)> = Vec::new();
    for g in groups {
        match g.summary() {
            Some(s) => rows.push((g, s)),
            None => log::warn!("skipping table group {}: no finite values", g.label()),
        }
    }
    if rows.is_empty() {
        return Err(ReportError::EmptyReport(format!("no {metric} values to tabulate")));
    }
    rows.sort_by(|(ga, a), (gb, b)| {
        a.mean
            .total_cmp(&b.mean)
            .then_with(|| (&ga.llm, &ga.stt, ga.method).cmp(&(&gb.llm, &gb.stt, gb.method)))
    });

    let mut w = csv_writer();
    let header = ["LLM".to_string(), "STT".into(), "Method".into(), metric.into(), format!("{metric}-mean"), format!("{metric}-std")];
    w.write_record(&header).expect("in-memory write");
    for (g, s) in rows {
        w.write_record([
            g.llm.as_deref().unwrap_or(NO_LLM),
            &g.stt,
            g.method.label(),
            &format_mean_std(s.mean, s.std_dev),
            &format_points(s.mean),
            &format_points(s.std_dev),
        ])
        .expect("in-memory write");
    }
    Ok(finish(w))
}

/// Per-conversation scores with 12 decimals.
pub fn emit_scores(report: &MetricReport) -> String {
    let mut w = csv_writer();
    w.write_record([
        "conversation_id",
        "system",
        "llm",
        "method",
        "wer",
        "mc_wer",
        "substitutions",
        "deletions",
        "insertions",
        "reference_words",
        "concept_substitutions",
        "concept_deletions",
        "concept_insertions",
        "concepts",
        "wer_doctor",
        "wer_patient",
        "der",
    ])
    .expect("in-memory write");
    let opt = |v: Option<f64>| v.map(format_exact).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.conversation_id.clone(),
            r.system.clone(),
            r.llm.clone().unwrap_or_else(|| NO_LLM.into()),
            r.method.label().into(),
            format_exact(r.wer),
            opt(r.mc_wer),
            r.substitutions.to_string(),
            r.deletions.to_string(),
            r.insertions.to_string(),
            r.reference_words.to_string(),
            r.concept_substitutions.to_string(),
            r.concept_deletions.to_string(),
            r.concept_insertions.to_string(),
            r.concepts.to_string(),
            opt(r.speaker_wer.get("Doctor").copied()),
            opt(r.speaker_wer.get("Patient").copied()),
            opt(r.diarization_error_rate),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn emit_deltas(report: &MetricReport) -> String {
    let mut w = csv_writer();
    w.write_record(["system", "llm", "category", "kind", "before", "after", "delta"]).expect("in-memory write");
    for section in &report.analysis {
        for d in &section.category_deltas {
            w.write_record([
                section.system.clone(),
                section.llm.clone(),
                d.category.label().to_string(),
                d.kind.label().to_string(),
                d.before.to_string(),
                d.after.to_string(),
                format_delta(d.delta),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

pub fn emit_char_diff(report: &MetricReport) -> String {
    let mut w = csv_writer();
    w.write_record([
        "system",
        "llm",
        "threshold",
        "total",
        "low_diff",
        "low_diff_resolved",
        "low_diff_fraction",
        "resolved_fraction",
    ])
    .expect("in-memory write");
    for s in &report.analysis {
        let c = &s.char_diff;
        w.write_record([
            s.system.clone(),
            s.llm.clone(),
            c.threshold.to_string(),
            c.total.to_string(),
            c.low_diff.to_string(),
            c.low_diff_resolved.to_string(),
            c.low_diff_fraction.map(format_exact).unwrap_or_default(),
            c.resolved_fraction.map(format_exact).unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(stt: &str, values: Vec<f64>) -> TableGroup {
        TableGroup { llm: None, stt: stt.into(), method: Method::Asr, values }
    }

    #[test]
    fn formats_like_the_tables() {
        assert_eq!(format_mean_std(0.1018, 0.0181), "10.18% ± 1.81");
        assert_eq!(format_percent(0.2742), "27.42%");
        assert_eq!(format_delta(12), "+12");
        assert_eq!(format_delta(-3), "-3");
        assert_eq!(format_delta(0), "0");
    }

    #[test]
    fn ascending_by_mean() {
        let csv = emit_table(&[group("a", vec![0.10]), group("b", vec![0.27]), group("c", vec![0.14])]).unwrap();
        let order: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(order, vec!["a", "c", "b"]);
    }

    #[test]
    fn single_row_has_header() {
        let csv = emit_table(&[group("a", vec![0.5])]).unwrap();
        assert_eq!(csv, "LLM,STT,Method,WER,WER-mean,WER-std\n--,a,ASR,50.00% ± 0.00,50.00,0.00\n");
    }

    #[test]
    fn empty_groups_are_skipped() {
        let csv = emit_table(&[group("a", vec![]), group("b", vec![0.2])]).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(matches!(emit_table(&[group("a", vec![f64::NAN])]), Err(ReportError::EmptyReport(_))));
        assert!(matches!(emit_table(&[]), Err(ReportError::EmptyReport(_))));
    }
}
