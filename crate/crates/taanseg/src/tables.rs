//! Delimited text formats: pitch tracks, features, posteriors, section
//! timelines and frame labels.
//!
//! Floats are written in shortest round-trip form, so every writer/reader
//! pair is lossless.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use taanseg_core::features::{NormStats, StyleFeatureSeq};
use taanseg_core::mlp::PosteriorSeq;
use taanseg_core::segment::{Label, Section, SectionTimeline};
use taanseg_core::tracks::{PitchEnergyTrack, TRACK_HOP_S};

use crate::error::{IoError, Result};

pub const TRACK_HEADER: [&str; 4] = ["time_s", "f0_hz", "energy_db", "voiced"];
pub const FEATURE_HEADER: [&str; 5] = ["frame_s", "mod_rate", "mod_energy", "energy_zcr", "vocal"];
pub const POSTERIOR_HEADER: [&str; 3] = ["frame_s", "p_taan", "taan"];
pub const TIMELINE_HEADER: [&str; 3] = ["start_s", "end_s", "label"];
pub const FRAME_LABEL_HEADER: [&str; 2] = ["frame_s", "label"];

/// Allowed deviation of a track timestamp from its nominal grid time.
pub const HOP_TOLERANCE_S: f64 = 1e-6;

struct Row {
    line: usize,
    fields: Vec<String>,
}

fn read_rows(path: &Path, delimiter: u8) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        rows.push(Row {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    Ok(rows)
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::io(path, io),
        csv::ErrorKind::Utf8 { err, .. } => IoError::parse(path, line, format!("invalid UTF-8: {err}")),
        other => IoError::parse(path, line, format!("{other:?}")),
    }
}

/// Strips a required header row.
fn take_header(path: &Path, rows: &mut Vec<Row>, header: &[&str]) -> Result<()> {
    match rows.first() {
        Some(r) if r.fields.iter().map(String::as_str).eq(header.iter().copied()) => {
            rows.remove(0);
            Ok(())
        }
        Some(r) => Err(IoError::parse(
            path,
            r.line,
            format!("expected header {:?}, found {:?}", header.join(","), r.fields.join(",")),
        )),
        None => Err(IoError::parse(path, 1, "missing header")),
    }
}

/// Strips a header row if present.
fn skip_optional_header(rows: &mut Vec<Row>, header: &[&str]) {
    if rows
        .first()
        .is_some_and(|r| r.fields.iter().map(String::as_str).eq(header.iter().copied()))
    {
        rows.remove(0);
    }
}

fn check_width(path: &Path, row: &Row, n: usize) -> Result<()> {
    if row.fields.len() != n {
        return Err(IoError::parse(
            path,
            row.line,
            format!("expected {n} columns, found {}", row.fields.len()),
        ));
    }
    Ok(())
}

fn field<T: FromStr>(path: &Path, row: &Row, col: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    row.fields[col]
        .parse()
        .map_err(|e| IoError::parse(path, row.line, format!("column {name}: {:?}: {e}", row.fields[col])))
}

fn finite(path: &Path, row: &Row, col: usize, name: &str) -> Result<f64> {
    let v: f64 = field(path, row, col, name)?;
    if !v.is_finite() {
        return Err(IoError::parse(path, row.line, format!("column {name}: value must be finite")));
    }
    Ok(v)
}

fn flag(path: &Path, row: &Row, col: usize, name: &str) -> Result<bool> {
    match row.fields[col].as_str() {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(IoError::parse(path, row.line, format!("column {name}: {other:?} is not 0 or 1"))),
    }
}

/// Checks row widths and that column 0 holds `i × frame_s` with the
/// spacing taken from the second row (1 s for a single row).
fn frame_grid(path: &Path, rows: &[Row], width: usize) -> Result<f64> {
    let mut frame_s = 1.0;
    for (i, row) in rows.iter().enumerate() {
        check_width(path, row, width)?;
        let t = finite(path, row, 0, "frame_s")?;
        if i == 1 {
            frame_s = t;
            if !(frame_s > 0.0) {
                return Err(IoError::format(path, format!("line {}: frame spacing must be positive", row.line)));
            }
        }
        if (t - i as f64 * frame_s).abs() > HOP_TOLERANCE_S {
            return Err(IoError::format(path, format!("line {}: frame times must be evenly spaced from 0", row.line)));
        }
    }
    Ok(frame_s)
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| IoError::io(path, e))
}

fn write_lines(path: &Path, delimiter: char, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    let sep = delimiter.to_string();
    let io = |e| IoError::io(path, e);
    writeln!(w, "{}", header.join(&sep)).map_err(io)?;
    for r in rows {
        writeln!(w, "{}", r.join(&sep)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Ingests an externally computed pitch/energy track. Row `i` must sit at
/// `i × 0.01 s` within [`HOP_TOLERANCE_S`].
pub fn read_track_csv(path: &Path) -> Result<PitchEnergyTrack> {
    let mut rows = read_rows(path, b',')?;
    take_header(path, &mut rows, &TRACK_HEADER)?;
    let mut f0 = Vec::with_capacity(rows.len());
    let mut energy = Vec::with_capacity(rows.len());
    let mut voiced = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        check_width(path, row, 4)?;
        let t = finite(path, row, 0, "time_s")?;
        if (t - i as f64 * TRACK_HOP_S).abs() > HOP_TOLERANCE_S {
            return Err(IoError::format(
                path,
                format!("line {}: time {t} s is off the 10 ms grid (expected {} s)", row.line, i as f64 * TRACK_HOP_S),
            ));
        }
        let f = finite(path, row, 1, "f0_hz")?;
        let v = flag(path, row, 3, "voiced")?;
        if f < 0.0 || (f > 0.0) != v {
            return Err(IoError::parse(
                path,
                row.line,
                format!("f0 {f} Hz inconsistent with voiced={}", v as u8),
            ));
        }
        f0.push(f);
        energy.push(finite(path, row, 2, "energy_db")?);
        voiced.push(v);
    }
    Ok(PitchEnergyTrack::new(TRACK_HOP_S, f0, energy, voiced)?)
}

pub fn write_track_csv(track: &PitchEnergyTrack, path: &Path) -> Result<()> {
    let hop = track.hop_s();
    let rows = (0..track.len()).map(|i| {
        vec![
            (i as f64 * hop).to_string(),
            track.f0_hz()[i].to_string(),
            track.energy_db()[i].to_string(),
            (track.voiced()[i] as u8).to_string(),
        ]
    });
    write_lines(path, ',', &TRACK_HEADER, rows)
}

/// Normalization statistics are not part of the feature CSV; the reader
/// reports an identity normalization.
pub fn read_feature_csv(path: &Path) -> Result<StyleFeatureSeq> {
    let mut rows = read_rows(path, b',')?;
    take_header(path, &mut rows, &FEATURE_HEADER)?;
    let frame_s = frame_grid(path, &rows, 5)?;
    let mut frames = Vec::with_capacity(rows.len());
    for row in &rows {
        if flag(path, row, 4, "vocal")? {
            frames.push(Some([
                finite(path, row, 1, "mod_rate")?,
                finite(path, row, 2, "mod_energy")?,
                finite(path, row, 3, "energy_zcr")?,
            ]));
        } else {
            if row.fields[1..4].iter().any(|f| !f.is_empty()) {
                return Err(IoError::parse(path, row.line, "non-vocal frames must leave feature columns empty"));
            }
            frames.push(None);
        }
    }
    if frames.is_empty() {
        return Err(IoError::format(path, "no feature rows"));
    }
    Ok(StyleFeatureSeq::new(
        frame_s,
        frames,
        NormStats {
            mean: [0.0; 3],
            std: [1.0; 3],
        },
    ))
}

pub fn write_feature_csv(seq: &StyleFeatureSeq, path: &Path) -> Result<()> {
    let fs = seq.frame_s();
    let rows = seq.features().iter().enumerate().map(|(i, f)| {
        let t = (i as f64 * fs).to_string();
        match f {
            Some(v) => vec![t, v[0].to_string(), v[1].to_string(), v[2].to_string(), "1".into()],
            None => vec![t, String::new(), String::new(), String::new(), "0".into()],
        }
    });
    write_lines(path, ',', &FEATURE_HEADER, rows)
}

pub fn write_posterior_csv(post: &PosteriorSeq, threshold: f64, path: &Path) -> Result<()> {
    let fs = post.frame_s();
    let rows = post.p_taan().iter().enumerate().map(|(i, p)| {
        let t = (i as f64 * fs).to_string();
        match p {
            Some(p) => vec![t, p.to_string(), ((*p >= threshold) as u8).to_string()],
            None => vec![t, String::new(), String::new()],
        }
    });
    write_lines(path, ',', &POSTERIOR_HEADER, rows)
}

/// The decision column is recomputed on use, so only `p_taan` is read.
pub fn read_posterior_csv(path: &Path) -> Result<PosteriorSeq> {
    let mut rows = read_rows(path, b',')?;
    take_header(path, &mut rows, &POSTERIOR_HEADER)?;
    let frame_s = frame_grid(path, &rows, 3)?;
    let mut p = Vec::with_capacity(rows.len());
    for row in &rows {
        p.push(if row.fields[1].is_empty() {
            None
        } else {
            Some(finite(path, row, 1, "p_taan")?)
        });
    }
    Ok(PosteriorSeq::new(frame_s, p)?)
}

/// Reads `start_s<TAB>end_s<TAB>label`, with an optional header line.
pub fn read_timeline_tsv(path: &Path) -> Result<SectionTimeline> {
    let mut rows = read_rows(path, b'\t')?;
    skip_optional_header(&mut rows, &TIMELINE_HEADER);
    let mut sections = Vec::with_capacity(rows.len());
    for row in &rows {
        check_width(path, row, 3)?;
        let start = finite(path, row, 0, "start_s")?;
        let end = finite(path, row, 1, "end_s")?;
        let label: Label = field(path, row, 2, "label")?;
        sections.push(Section::new(start, end, label));
    }
    SectionTimeline::new(sections).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn write_timeline_tsv(tl: &SectionTimeline, path: &Path) -> Result<()> {
    let rows = tl
        .sections()
        .iter()
        .map(|s| vec![s.start_s.to_string(), s.end_s.to_string(), s.label.to_string()]);
    write_lines(path, '\t', &TIMELINE_HEADER, rows)
}

/// Labels keyed by frame index (`round(frame_s / frame_len)`).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabels {
    pub frame_s: f64,
    pub labels: Vec<(usize, Label)>,
}

impl FrameLabels {
    /// Dense labels for `n` frames; unlisted frames are `None`.
    pub fn dense(&self, n: usize) -> Vec<Option<Label>> {
        let mut out = vec![None; n];
        for &(i, l) in &self.labels {
            if i < n {
                out[i] = Some(l);
            }
        }
        out
    }
}

pub fn read_frame_labels(path: &Path, frame_s: f64) -> Result<FrameLabels> {
    let mut rows = read_rows(path, b'\t')?;
    skip_optional_header(&mut rows, &FRAME_LABEL_HEADER);
    let mut labels: Vec<(usize, Label)> = Vec::with_capacity(rows.len());
    for row in &rows {
        check_width(path, row, 2)?;
        let t = finite(path, row, 0, "frame_s")?;
        let idx = (t / frame_s).round();
        if t < 0.0 || (t - idx * frame_s).abs() > HOP_TOLERANCE_S {
            return Err(IoError::parse(path, row.line, format!("time {t} s is not on the {frame_s} s frame grid")));
        }
        let idx = idx as usize;
        if labels.last().is_some_and(|&(prev, _)| prev >= idx) {
            return Err(IoError::parse(path, row.line, "frame times must strictly increase"));
        }
        labels.push((idx, field(path, row, 1, "label")?));
    }
    Ok(FrameLabels { frame_s, labels })
}

pub fn write_frame_labels(labels: &FrameLabels, path: &Path) -> Result<()> {
    let rows = labels
        .labels
        .iter()
        .map(|&(i, l)| vec![(i as f64 * labels.frame_s).to_string(), l.to_string()]);
    write_lines(path, '\t', &FRAME_LABEL_HEADER, rows)
}
