//! Frame metrics, ROC/EER and section matching.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segment::{Section, SectionTimeline};

/// Precision, recall and F1; undefined ratios are reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FrameMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Metrics over frames selected by `mask` (all frames when `None`).
pub fn frame_metrics(pred: &[bool], truth: &[bool], mask: Option<&[bool]>) -> Result<FrameMetrics> {
    if pred.len() != truth.len() || mask.is_some_and(|m| m.len() != pred.len()) {
        return Err(Error::invalid("prediction, truth and mask lengths differ"));
    }
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for i in 0..pred.len() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        match (pred[i], truth[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let (precision, pu) = ratio(tp, tp + fp);
    let (recall, ru) = ratio(tp, tp + fneg);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(FrameMetrics {
        precision,
        recall,
        f1,
        true_pos: tp,
        false_pos: fp,
        false_neg: fneg,
        precision_undefined: pu,
        recall_undefined: ru,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RocPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RocCurve {
    /// One point per distinct posterior, thresholds descending.
    pub points: Vec<RocPoint>,
    /// Operating point where precision equals recall, interpolated
    /// linearly between adjacent sweep points.
    pub eer: RocPoint,
}

/// Sweeps `p ≥ threshold` over every distinct posterior value.
pub fn roc_curve(posteriors: &[f64], truth: &[bool], mask: Option<&[bool]>) -> Result<RocCurve> {
    if posteriors.len() != truth.len() || mask.is_some_and(|m| m.len() != truth.len()) {
        return Err(Error::invalid("posterior, truth and mask lengths differ"));
    }
    let mut frames: Vec<(f64, bool)> = (0..truth.len())
        .filter(|&i| mask.is_none_or(|m| m[i]))
        .map(|i| (posteriors[i], truth[i]))
        .collect();
    if frames.iter().any(|f| !f.0.is_finite()) {
        return Err(Error::invalid("posteriors must be finite"));
    }
    let positives = frames.iter().filter(|f| f.1).count();
    if positives == 0 || positives == frames.len() {
        return Err(Error::invalid("ROC needs both positive and negative frames"));
    }
    frames.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < frames.len() {
        let th = frames[i].0;
        while i < frames.len() && frames[i].0 == th {
            if frames[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: th,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    let diff = |p: &RocPoint| p.precision - p.recall;
    let mut eer = *points
        .iter()
        .min_by(|a, b| diff(a).abs().total_cmp(&diff(b).abs()))
        .expect("at least one sweep point");
    for w in points.windows(2) {
        let (d0, d1) = (diff(&w[0]), diff(&w[1]));
        if d0 == 0.0 {
            eer = w[0];
            break;
        }
        if d0.signum() != d1.signum() {
            let a = d0 / (d0 - d1);
            let lerp = |x: f64, y: f64| x + a * (y - x);
            eer = RocPoint {
                threshold: lerp(w[0].threshold, w[1].threshold),
                precision: lerp(w[0].precision, w[1].precision),
                recall: lerp(w[0].recall, w[1].recall),
            };
            break;
        }
    }
    Ok(RocCurve { points, eer })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MatchCategory {
    Exact,
    OverSegmented,
    UnderSegmented,
    Missed,
}

/// Outcome for one ground-truth taan section.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TruthOutcome {
    pub truth: Section,
    pub category: MatchCategory,
    /// Indices into the detected taan sections overlapping this section.
    pub detections: Vec<usize>,
}

/// Signed boundary offsets (detected − truth) of an exact match.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundaryDeviation {
    pub truth_index: usize,
    pub onset_s: f64,
    pub offset_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SectionMatchReport {
    pub exact: usize,
    pub over_segmented: usize,
    pub under_segmented: usize,
    pub missed: usize,
    pub false_alarm: usize,
    pub n_truth: usize,
    pub n_detected: usize,
    pub outcomes: Vec<TruthOutcome>,
    /// Indices of detected taan sections counted as false alarms.
    pub false_alarms: Vec<usize>,
    pub deviations: Vec<BoundaryDeviation>,
}

impl SectionMatchReport {
    pub fn retrieved(&self) -> usize {
        self.exact + self.over_segmented + self.under_segmented
    }

    pub fn partitions_truth(&self) -> bool {
        self.retrieved() + self.missed == self.n_truth
    }
}

/// Section-level matching of taan sections.
///
/// A truth section is retrieved when the overlap with detected taan
/// sections reaches half its duration; with `cumulative` the overlaps of
/// all detections are summed, otherwise the best single detection must
/// reach it. Retrieved sections touched by two or more detections are
/// over-segmented. A single detection that also retrieves another truth
/// section makes both under-segmented; otherwise the match is exact. A
/// detection is a false alarm when its summed overlap with truth taan
/// sections is under half its own duration.
pub fn match_sections(detected: &SectionTimeline, truth: &SectionTimeline, cumulative: bool) -> SectionMatchReport {
    let dets: Vec<Section> = detected.taan_sections().copied().collect();
    let truths: Vec<Section> = truth.taan_sections().copied().collect();
    let overlap: Vec<Vec<f64>> = truths.iter().map(|t| dets.iter().map(|d| t.overlap(d)).collect()).collect();
    let single_retrieves = |ti: usize, dj: usize| overlap[ti][dj] >= 0.5 * truths[ti].duration();

    let mut report = SectionMatchReport {
        n_truth: truths.len(),
        n_detected: dets.len(),
        ..Default::default()
    };
    for (ti, t) in truths.iter().enumerate() {
        let touching: Vec<usize> = (0..dets.len()).filter(|&j| overlap[ti][j] > 0.0).collect();
        let covered = if cumulative {
            touching.iter().map(|&j| overlap[ti][j]).sum::<f64>()
        } else {
            touching.iter().map(|&j| overlap[ti][j]).fold(0.0, f64::max)
        };
        let category = if covered < 0.5 * t.duration() {
            MatchCategory::Missed
        } else if touching.len() >= 2 {
            MatchCategory::OverSegmented
        } else {
            let j = touching[0];
            if (0..truths.len()).any(|k| k != ti && single_retrieves(k, j)) {
                MatchCategory::UnderSegmented
            } else {
                report.deviations.push(BoundaryDeviation {
                    truth_index: ti,
                    onset_s: dets[j].start_s - t.start_s,
                    offset_s: dets[j].end_s - t.end_s,
                });
                MatchCategory::Exact
            }
        };
        match category {
            MatchCategory::Exact => report.exact += 1,
            MatchCategory::OverSegmented => report.over_segmented += 1,
            MatchCategory::UnderSegmented => report.under_segmented += 1,
            MatchCategory::Missed => report.missed += 1,
        }
        report.outcomes.push(TruthOutcome {
            truth: *t,
            category,
            detections: touching,
        });
    }
    for (j, d) in dets.iter().enumerate() {
        let total: f64 = (0..truths.len()).map(|ti| overlap[ti][j]).sum();
        if total < 0.5 * d.duration() {
            report.false_alarm += 1;
            report.false_alarms.push(j);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DeviationStats {
    pub matches: usize,
    pub mean_onset_s: f64,
    pub mean_offset_s: f64,
    pub max_onset_s: f64,
    pub max_offset_s: f64,
}

impl DeviationStats {
    pub fn max_s(&self) -> f64 {
        self.max_onset_s.max(self.max_offset_s)
    }
}

/// Absolute boundary deviations over exact matches.
pub fn boundary_deviation(report: &SectionMatchReport) -> Result<DeviationStats> {
    let d = &report.deviations;
    if d.is_empty() {
        return Err(Error::empty("no exact matches to measure boundary deviation"));
    }
    let n = d.len() as f64;
    Ok(DeviationStats {
        matches: d.len(),
        mean_onset_s: d.iter().map(|x| x.onset_s.abs()).sum::<f64>() / n,
        mean_offset_s: d.iter().map(|x| x.offset_s.abs()).sum::<f64>() / n,
        max_onset_s: d.iter().map(|x| x.onset_s.abs()).fold(0.0, f64::max),
        max_offset_s: d.iter().map(|x| x.offset_s.abs()).fold(0.0, f64::max),
    })
}
