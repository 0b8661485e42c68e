//! Delimited-text outputs: alignment and sequence dumps, the feature matrix
//! and comparison reports.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::features::SessionFeatures;
use crate::ingest::IngestError;
use crate::pipeline::SessionAnalysis;
use crate::stats::{FeatureMatrix, GroupComparison, GroupSplit, Phase, ScoreKind};

fn csv_err(e: csv::Error) -> IngestError {
    IngestError::Malformed {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// One record per aligned fixation.
pub fn write_aligned_dump<W: Write>(sink: W, sessions: &[SessionAnalysis]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "participant_id",
        "page_id",
        "line_id",
        "fixation",
        "t_start_ms",
        "word_index",
        "rank",
        "cost",
    ])
    .map_err(csv_err)?;
    for s in sessions {
        for page in &s.pages {
            for a in &page.alignment.aligned {
                w.write_record([
                    s.participant_id.clone(),
                    page.page_id().to_owned(),
                    a.line_id.to_string(),
                    a.fixation.to_string(),
                    a.t_start_ms.to_string(),
                    a.word_index.to_string(),
                    a.rank.to_string(),
                    a.cost.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One record per reading sequence.
pub fn write_sequence_dump<W: Write>(sink: W, sessions: &[SessionAnalysis]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "participant_id",
        "page_id",
        "sequence",
        "start_ms",
        "end_ms",
        "n_fixations",
        "min_index",
        "max_index",
        "n_regressions",
    ])
    .map_err(csv_err)?;
    for s in sessions {
        for page in &s.pages {
            for (i, seq) in page.sequences.iter().enumerate() {
                w.write_record([
                    s.participant_id.clone(),
                    page.page_id().to_owned(),
                    i.to_string(),
                    seq.start_ms.to_string(),
                    seq.end_ms.to_string(),
                    seq.members.len().to_string(),
                    seq.min_index.to_string(),
                    seq.max_index.to_string(),
                    seq.regressions.len().to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_feature_matrix<W: Write>(sink: W, rows: &[SessionFeatures]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["participant_id"];
    header.extend(SessionFeatures::NAMES);
    w.write_record(&header).map_err(csv_err)?;
    for f in rows {
        let mut record = vec![f.participant_id.clone()];
        record.extend(f.values().iter().map(f64::to_string));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_matrix(rows: &[SessionFeatures]) -> FeatureMatrix {
    FeatureMatrix {
        columns: SessionFeatures::NAMES.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|f| (f.participant_id.clone(), f.values().to_vec()))
            .collect(),
    }
}

/// Reads a feature matrix with a `participant_id` column and any number of
/// numeric feature columns.
pub fn read_feature_matrix<R: Read>(source: R) -> Result<FeatureMatrix, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(csv_err)?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "participant_id")
        .ok_or(IngestError::MissingColumn("participant_id"))?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != id_col)
        .map(|(_, h)| h.to_owned())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut values = Vec::with_capacity(columns.len());
        for (i, raw) in record.iter().enumerate() {
            if i == id_col {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| IngestError::Field {
                line,
                column: headers.get(i).unwrap_or_default().to_owned(),
                message: format!("`{raw}` is not a decimal number"),
            })?;
            values.push(v);
        }
        rows.push((record.get(id_col).unwrap_or_default().to_owned(), values));
    }
    Ok(FeatureMatrix { columns, rows })
}

/// Comparisons of all features for one Low/High split.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonBlock {
    pub split: GroupSplit,
    pub comparisons: Vec<GroupComparison>,
}

pub fn write_comparisons<W: Write>(sink: W, blocks: &[ComparisonBlock]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "score_kind",
        "phase",
        "feature",
        "n_low",
        "n_high",
        "mean_low",
        "mean_high",
        "u",
        "p_value",
        "tier",
    ])
    .map_err(csv_err)?;
    for b in blocks {
        for c in &b.comparisons {
            w.write_record([
                b.split.score_kind.to_string(),
                b.split.phase.to_string(),
                c.feature.clone(),
                c.n_low.to_string(),
                c.n_high.to_string(),
                c.mean_low.to_string(),
                c.mean_high.to_string(),
                c.u.to_string(),
                c.p_value.to_string(),
                c.tier.name().to_owned(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Three significant digits, the way group means are usually tabulated.
fn sig3(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let digits = v.abs().log10().floor() as i32;
    let decimals = (2 - digits).max(0) as usize;
    format!("{v:.decimals$}")
}

fn p_cell(p: f64) -> String {
    let s = format!("{p:.3}");
    s.strip_prefix('0').map(str::to_owned).unwrap_or(s)
}

/// Human-readable report of every block. Markers: `.` for .05 ≤ p < .1,
/// `*` for .01 ≤ p ≤ .05, `**` for p < .01.
pub fn render_comparisons(blocks: &[ComparisonBlock]) -> String {
    let mut out = String::new();
    for b in blocks {
        let s = &b.split;
        let _ = writeln!(
            out,
            "== {} / {}: threshold {:.4}, Low n={}, High n={}, excluded n={}",
            s.score_kind,
            s.phase,
            s.threshold,
            s.low.len(),
            s.high.len(),
            s.excluded.len()
        );
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>10} {:>10} {:>7} {:<3}",
            "feature", "Low", "High", "U", "p", ""
        );
        for c in &b.comparisons {
            let _ = writeln!(
                out,
                "{:<24} {:>10} {:>10} {:>10} {:>7} {:<3}",
                c.feature,
                sig3(c.mean_low),
                sig3(c.mean_high),
                c.u,
                p_cell(c.p_value),
                c.tier.marker()
            );
        }
        out.push('\n');
    }
    out
}

fn find(blocks: &[ComparisonBlock], kind: ScoreKind, phase: Phase) -> Option<&ComparisonBlock> {
    blocks
        .iter()
        .find(|b| b.split.score_kind == kind && b.split.phase == phase)
}

/// Knowledge-gain rows first, then the y-position rows for prior knowledge,
/// with MCQ and essay side by side.
pub fn render_summary_table(blocks: &[ComparisonBlock]) -> String {
    const PRE_ROWS: [&str; 2] = ["max_y_of_RFix", "avg_y_of_RFix"];
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>9} {:>9} {:>6} {:<2} {:>9} {:>9} {:>6} {:<2}",
        "feature", "MCQ Low", "MCQ High", "p", "", "Ess Low", "Ess High", "p", ""
    );
    let row = |out: &mut String, feature: &str, phase: Phase| {
        let mut cells = format!("{feature:<24}");
        for kind in ScoreKind::ALL {
            let c = find(blocks, kind, phase).and_then(|b| b.comparisons.iter().find(|c| c.feature == feature));
            match c {
                Some(c) => {
                    let _ = write!(
                        cells,
                        " {:>9} {:>9} {:>6} {:<2}",
                        sig3(c.mean_low),
                        sig3(c.mean_high),
                        p_cell(c.p_value),
                        c.tier.marker()
                    );
                }
                None => {
                    let _ = write!(cells, " {:>9} {:>9} {:>6} {:<2}", "-", "-", "-", "");
                }
            }
        }
        let _ = writeln!(out, "{}", cells.trim_end());
    };
    for name in SessionFeatures::NAMES.iter().filter(|n| !PRE_ROWS.contains(n)) {
        row(&mut out, name, Phase::Kg);
    }
    let _ = writeln!(out, "{}", "=".repeat(24));
    for name in PRE_ROWS {
        row(&mut out, name, Phase::Pre);
    }
    out
}

/// Low/High group sizes per phase, for MCQ, essay, and both at once.
pub fn render_group_counts(blocks: &[ComparisonBlock]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9}",
        "phase", "Low MCQ", "Low Ess", "Low both", "High MCQ", "High Ess", "High both"
    );
    for phase in Phase::ALL {
        let (Some(m), Some(e)) = (find(blocks, ScoreKind::Mcq, phase), find(blocks, ScoreKind::Essay, phase)) else {
            continue;
        };
        let _ = writeln!(
            out,
            "{:<6} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9}",
            phase.to_string(),
            m.split.low.len(),
            e.split.low.len(),
            m.split.low.intersection(&e.split.low).count(),
            m.split.high.len(),
            e.split.high.len(),
            m.split.high.intersection(&e.split.high).count()
        );
    }
    out
}
