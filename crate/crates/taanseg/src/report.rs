//! Evaluation report as a text table or JSON, and channel-map images.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use taanseg_core::cnn::ChannelMap;
use taanseg_core::eval::{DeviationStats, FrameMetrics, RocPoint, SectionMatchReport};

use crate::error::{IoError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSummary {
    pub metrics: FrameMetrics,
    /// Operating point where precision equals recall.
    pub eer: Option<RocPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub sections: SectionMatchReport,
    /// Absent when nothing was retrieved.
    pub deviation: Option<DeviationStats>,
    pub frames: Option<FrameSummary>,
}

fn undefined_or(v: f64, undefined: bool) -> String {
    if undefined {
        "undefined".into()
    } else {
        format!("{v:.3}")
    }
}

/// Section counts laid out as retrieved (by segmentation quality), missed
/// and false alarms, followed by boundary and frame statistics.
pub fn render_table(r: &EvaluationReport) -> String {
    let s = &r.sections;
    let mut out = String::new();
    let rule = "+--------------------+--------------------+-------+";
    let _ = writeln!(out, "{rule}");
    let rows = [
        ("True detection", "Under-segmentation", s.under_segmented),
        (&*format!("({})", s.retrieved()), "Over-segmentation", s.over_segmented),
        ("", "Exact detection", s.exact),
    ];
    for (a, b, n) in rows {
        let _ = writeln!(out, "| {a:<18} | {b:<18} | {n:>5} |");
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "| {:<39} | {:>5} |", "Missed", s.missed);
    let _ = writeln!(out, "| {:<39} | {:>5} |", "False alarm", s.false_alarm);
    let _ = writeln!(out, "+-----------------------------------------+-------+");
    let _ = writeln!(out, "truth sections: {}, detected sections: {}", s.n_truth, s.n_detected);
    if let Some(d) = &r.deviation {
        let _ = writeln!(
            out,
            "boundary deviation over {} matches: onset mean {:.2} s max {:.2} s, offset mean {:.2} s max {:.2} s",
            d.matches, d.mean_onset_s, d.max_onset_s, d.mean_offset_s, d.max_offset_s
        );
    }
    if let Some(f) = &r.frames {
        let m = &f.metrics;
        let _ = writeln!(
            out,
            "frames: precision {} recall {} f-score {} (tp {} fp {} fn {})",
            undefined_or(m.precision, m.precision_undefined),
            undefined_or(m.recall, m.recall_undefined),
            undefined_or(m.f1, m.precision_undefined || m.recall_undefined),
            m.true_pos,
            m.false_pos,
            m.false_neg
        );
        if let Some(e) = &f.eer {
            let _ = writeln!(
                out,
                "equal error point: threshold {:.3}, precision {:.3}, recall {:.3}",
                e.threshold, e.precision, e.recall
            );
        }
    }
    out
}

pub fn render_json(r: &EvaluationReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

/// Binary 8-bit PGM, min-max scaled, lowest frequency row at the bottom.
pub fn channel_map_pgm(map: &ChannelMap) -> Vec<u8> {
    let lo = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{} {}\n255\n", map.cols, map.rows).into_bytes();
    for r in (0..map.rows).rev() {
        for c in 0..map.cols {
            let v = (map.values[r * map.cols + c] - lo) / span;
            out.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    out
}

/// One CSV line per map row (row 0 = lowest frequency), raw values.
pub fn channel_map_csv(map: &ChannelMap) -> String {
    let mut out = String::new();
    for r in 0..map.rows {
        let row: Vec<String> = map.values[r * map.cols..(r + 1) * map.cols]
            .iter()
            .map(f64::to_string)
            .collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Picks PGM or CSV by file extension.
pub fn write_channel_map(map: &ChannelMap, path: &Path) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => channel_map_pgm(map),
        Some(e) if e.eq_ignore_ascii_case("csv") => channel_map_csv(map).into_bytes(),
        _ => return Err(IoError::Usage(format!("{}: map output must end in .pgm or .csv", path.display()))),
    };
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
