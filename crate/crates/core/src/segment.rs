//! Posterior self-distance matrix, checkerboard novelty, boundary picking,
//! majority labeling and taan grouping.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::mlp::PosteriorSeq;

/// Section label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Label {
    Taan,
    NonTaan,
    Instrumental,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Taan => "taan",
            Label::NonTaan => "non-taan",
            Label::Instrumental => "instrumental",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "taan" => Ok(Label::Taan),
            "non-taan" => Ok(Label::NonTaan),
            "instrumental" => Ok(Label::Instrumental),
            other => Err(Error::invalid(alloc::format!("unknown section label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Section {
    pub start_s: f64,
    pub end_s: f64,
    pub label: Label,
}

impl Section {
    pub fn new(start_s: f64, end_s: f64, label: Label) -> Self {
        Section { start_s, end_s, label }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn overlap(&self, other: &Section) -> f64 {
        (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0)
    }
}

/// Sorted, non-overlapping labeled intervals.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SectionTimeline {
    sections: Vec<Section>,
}

impl SectionTimeline {
    pub fn new(sections: Vec<Section>) -> Result<Self> {
        for (i, s) in sections.iter().enumerate() {
            if !s.start_s.is_finite() || !s.end_s.is_finite() || s.start_s < 0.0 {
                return Err(Error::invalid(alloc::format!("section {i}: bounds must be finite and non-negative")));
            }
            if !(s.end_s > s.start_s) {
                return Err(Error::invalid(alloc::format!(
                    "section {i}: end {} not after start {}",
                    s.end_s,
                    s.start_s
                )));
            }
            if i > 0 && s.start_s < sections[i - 1].end_s {
                return Err(Error::invalid(alloc::format!(
                    "section {i} starting at {} overlaps the previous section ending at {}",
                    s.start_s,
                    sections[i - 1].end_s
                )));
            }
        }
        Ok(SectionTimeline { sections })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn taan_sections(&self) -> impl Iterator<Item = &Section> + '_ {
        self.sections.iter().filter(|s| s.label == Label::Taan)
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.sections.first()?.start_s, self.sections.last()?.end_s))
    }

    /// Label of the section containing each frame centre; frames outside
    /// every section are `None`.
    pub fn frame_labels(&self, frame_s: f64, n_frames: usize) -> Vec<Option<Label>> {
        let mut out = vec![None; n_frames];
        let mut k = 0;
        for (j, slot) in out.iter_mut().enumerate() {
            let t = (j as f64 + 0.5) * frame_s;
            while k < self.sections.len() && self.sections[k].end_s <= t {
                k += 1;
            }
            if let Some(s) = self.sections.get(k) {
                if s.start_s <= t {
                    *slot = Some(s.label);
                }
            }
        }
        out
    }

    /// Same intervals shifted by `dt` seconds.
    pub fn shifted(&self, dt: f64) -> Result<Self> {
        SectionTimeline::new(
            self.sections
                .iter()
                .map(|s| Section::new(s.start_s + dt, s.end_s + dt, s.label))
                .collect(),
        )
    }
}

/// Symmetric matrix of Euclidean distances between posterior vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfDistanceMatrix {
    n: usize,
    frame_s: f64,
    values: Vec<f64>,
}

impl SelfDistanceMatrix {
    pub fn from_vectors(vectors: &[[f64; 2]], frame_s: f64) -> Result<Self> {
        let n = vectors.len();
        if n < 2 {
            return Err(Error::invalid("self-distance matrix needs at least 2 frames"));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("posteriors must be finite"));
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d0 = vectors[i][0] - vectors[j][0];
                let d1 = vectors[i][1] - vectors[j][1];
                let d = libm::sqrt(d0 * d0 + d1 * d1);
                values[i * n + j] = d;
                values[j * n + i] = d;
            }
        }
        Ok(SelfDistanceMatrix { n, frame_s, values })
    }

    /// Builds from arbitrary values (used by tests and oracle inputs).
    pub fn from_values(n: usize, frame_s: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n || n < 2 {
            return Err(Error::invalid("matrix must be n×n with n ≥ 2"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix values must be finite"));
        }
        Ok(SelfDistanceMatrix { n, frame_s, values })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn frame_s(&self) -> f64 {
        self.frame_s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// SDM of classifier posteriors; non-vocal frames enter as (0.5, 0.5).
pub fn posterior_sdm(posteriors: &PosteriorSeq) -> Result<SelfDistanceMatrix> {
    SelfDistanceMatrix::from_vectors(&posteriors.pairs(), posteriors.frame_s())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SegmentConfig {
    /// Checkerboard kernel half-width.
    pub half_width_s: f64,
    /// Gaussian radial taper (σ = half-width / 2); binary kernel when off.
    pub gaussian_taper: bool,
    /// Peak-picking neighbourhood on either side.
    pub neighborhood_s: f64,
    /// Peaks below this fraction of the global maximum are ignored.
    pub rel_threshold: f64,
    /// Taan sections separated by vocal-containing gaps up to this long merge.
    pub max_vocal_gap_s: f64,
    /// Taan sections separated by purely instrumental gaps up to this long merge.
    pub max_instrumental_gap_s: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            half_width_s: 5.0,
            gaussian_taper: true,
            neighborhood_s: 5.0,
            rel_threshold: 0.3,
            max_vocal_gap_s: 20.0,
            max_instrumental_gap_s: 50.0,
        }
    }
}

impl SegmentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.half_width_s, self.neighborhood_s];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("kernel half-width and neighbourhood must be positive"));
        }
        if !(0.0..=1.0).contains(&self.rel_threshold) {
            return Err(Error::invalid("rel_threshold must lie in [0, 1]"));
        }
        if !(self.max_vocal_gap_s >= 0.0) || !(self.max_instrumental_gap_s >= 0.0) {
            return Err(Error::invalid("grouping gaps must be non-negative"));
        }
        Ok(())
    }
}

/// 2L×2L checkerboard, row-major. Entries are −1 within a quadrant pair
/// and +1 across, so that a distance matrix yields positive novelty at a
/// section change.
pub fn checkerboard_kernel(l: usize, gaussian_taper: bool) -> Vec<f64> {
    let m = 2 * l;
    let sigma = l as f64 / 2.0;
    let c = l as f64 - 0.5;
    let mut k = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            let sign = if (a < l) == (b < l) { -1.0 } else { 1.0 };
            let w = if gaussian_taper {
                let (x, y) = (a as f64 - c, b as f64 - c);
                libm::exp(-(x * x + y * y) / (2.0 * sigma * sigma))
            } else {
                1.0
            };
            k[a * m + b] = sign * w;
        }
    }
    k
}

/// Novelty at every frame boundary `t` (between frames t−1 and t).
///
/// Near the edges the kernel is cropped symmetrically to half-width
/// `min(L, t, n − t)` and the result rescaled by the ratio of full to
/// cropped kernel mass.
pub fn novelty(sdm: &SelfDistanceMatrix, half_width_s: f64, gaussian_taper: bool) -> Result<Vec<f64>> {
    let n = sdm.len();
    let l = libm::round(half_width_s / sdm.frame_s()) as usize;
    if l == 0 {
        return Err(Error::invalid("novelty kernel half-width is below one frame"));
    }
    if n < 2 * l {
        return Err(Error::invalid(alloc::format!(
            "novelty needs at least {} frames for a {half_width_s} s kernel, got {n}",
            2 * l
        )));
    }
    let kernel = checkerboard_kernel(l, gaussian_taper);
    let m = 2 * l;
    let full_mass: f64 = kernel.iter().map(|v| v.abs()).sum();
    let out = (0..n)
        .map(|t| {
            let h = l.min(t).min(n - t);
            if h == 0 {
                return 0.0;
            }
            let off = l - h;
            let mut acc = 0.0;
            let mut mass = 0.0;
            for a in off..m - off {
                let i = t + a - l;
                let row = &kernel[a * m..(a + 1) * m];
                for b in off..m - off {
                    let j = t + b - l;
                    acc += row[b] * sdm.get(i, j);
                    mass += row[b].abs();
                }
            }
            acc * full_mass / mass
        })
        .collect();
    Ok(out)
}

/// Local maxima of the novelty curve within ±`neighborhood` frames that
/// reach `rel_threshold` of the global maximum. A plateau yields its first
/// frame. Frame 0 is an implicit segment start and never reported.
pub fn pick_boundaries(novelty: &[f64], neighborhood: usize, rel_threshold: f64) -> Vec<usize> {
    let max = novelty.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let floor = rel_threshold * max;
    let n = novelty.len();
    (1..n)
        .filter(|&t| {
            let v = novelty[t];
            if !(v > 0.0) || v < floor {
                return false;
            }
            let lo = t.saturating_sub(neighborhood);
            let hi = (t + neighborhood).min(n - 1);
            novelty[lo..t].iter().all(|&u| v > u) && novelty[t + 1..=hi].iter().all(|&u| v >= u)
        })
        .collect()
}

/// Labels each inter-boundary segment by strict majority over its vocal
/// frames; segments without vocal frames are instrumental. Adjacent
/// segments with equal labels are joined.
pub fn label_segments(
    boundaries: &[usize],
    decisions: &[bool],
    vocal_mask: &[bool],
    frame_s: f64,
) -> Result<SectionTimeline> {
    let n = decisions.len();
    if vocal_mask.len() != n {
        return Err(Error::invalid("decisions and vocal mask differ in length"));
    }
    if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.last().is_some_and(|&b| b > n) {
        return Err(Error::invalid("boundaries must be strictly increasing and within range"));
    }
    let mut cuts = vec![0];
    cuts.extend(boundaries.iter().copied().filter(|&b| b > 0 && b < n));
    cuts.push(n);
    let mut sections: Vec<Section> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let vocal = (a..b).filter(|&j| vocal_mask[j]).count();
        let taan = (a..b).filter(|&j| vocal_mask[j] && decisions[j]).count();
        let label = if vocal == 0 {
            Label::Instrumental
        } else if 2 * taan > vocal {
            Label::Taan
        } else {
            Label::NonTaan
        };
        let (start, end) = (a as f64 * frame_s, b as f64 * frame_s);
        match sections.last_mut() {
            Some(last) if last.label == label => last.end_s = end,
            _ => sections.push(Section::new(start, end, label)),
        }
    }
    SectionTimeline::new(sections)
}

/// Merges taan sections across short gaps. A gap containing any
/// non-instrumental section is vocal (limit `max_vocal_gap_s`); otherwise
/// it is instrumental (limit `max_instrumental_gap_s`).
pub fn group_sections(timeline: &SectionTimeline, max_vocal_gap_s: f64, max_instrumental_gap_s: f64) -> SectionTimeline {
    let src = timeline.sections();
    let mut out: Vec<Section> = Vec::with_capacity(src.len());
    let mut i = 0;
    while i < src.len() {
        let s = src[i];
        if s.label != Label::Taan {
            out.push(s);
            i += 1;
            continue;
        }
        let mut merged = s;
        let mut j = i + 1;
        while let Some(next) = (j..src.len()).find(|&k| src[k].label == Label::Taan) {
            let gap = src[next].start_s - merged.end_s;
            let vocal = src[j..next].iter().any(|g| g.label == Label::NonTaan);
            let limit = if vocal { max_vocal_gap_s } else { max_instrumental_gap_s };
            if gap > limit {
                break;
            }
            merged.end_s = src[next].end_s;
            j = next + 1;
        }
        out.push(merged);
        i = j;
    }
    SectionTimeline { sections: out }
}

/// Intermediate and final results of segmenting one concert.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub novelty: Vec<f64>,
    pub boundaries: Vec<usize>,
    pub raw: SectionTimeline,
    pub grouped: SectionTimeline,
}

/// SDM → novelty → boundaries → majority labels → grouping.
pub fn segment_posteriors(
    pairs: &[[f64; 2]],
    decisions: &[bool],
    vocal_mask: &[bool],
    frame_s: f64,
    cfg: &SegmentConfig,
) -> Result<Segmentation> {
    cfg.validate()?;
    if pairs.len() != decisions.len() {
        return Err(Error::invalid("posteriors and decisions differ in length"));
    }
    let sdm = SelfDistanceMatrix::from_vectors(pairs, frame_s)?;
    let novelty = novelty(&sdm, cfg.half_width_s, cfg.gaussian_taper)?;
    let w = libm::round(cfg.neighborhood_s / frame_s) as usize;
    let boundaries = pick_boundaries(&novelty, w, cfg.rel_threshold);
    let raw = label_segments(&boundaries, decisions, vocal_mask, frame_s)?;
    let grouped = group_sections(&raw, cfg.max_vocal_gap_s, cfg.max_instrumental_gap_s);
    Ok(Segmentation {
        novelty,
        boundaries,
        raw,
        grouped,
    })
}

/// Frame-level taan decisions and placeholders from a posterior sequence.
pub fn segment_sequence(posteriors: &PosteriorSeq, threshold: f64, cfg: &SegmentConfig) -> Result<Segmentation> {
    segment_posteriors(
        &posteriors.pairs(),
        &posteriors.decisions(threshold),
        &posteriors.vocal_mask(),
        posteriors.frame_s(),
        cfg,
    )
}

impl fmt::Display for SectionTimeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sections {
            writeln!(f, "{:.3}\t{:.3}\t{}", s.start_s, s.end_s, s.label)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step_pairs(n: usize, steps: &[usize]) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let k = steps.iter().filter(|&&s| i >= s).count();
                if k % 2 == 0 {
                    [0.9, 0.1]
                } else {
                    [0.1, 0.9]
                }
            })
            .collect()
    }

    /// Direct definition: full kernel where it fits, otherwise only the
    /// symmetric in-range sub-block, rescaled.
    fn brute_novelty(d: &SelfDistanceMatrix, l: usize, taper: bool) -> Vec<f64> {
        let n = d.len() as isize;
        let li = l as isize;
        let sigma = l as f64 / 2.0;
        let w = |a: isize, b: isize| {
            let sign = if (a < li) == (b < li) { -1.0 } else { 1.0 };
            let (x, y) = (a as f64 - (l as f64 - 0.5), b as f64 - (l as f64 - 0.5));
            sign * if taper { libm::exp(-(x * x + y * y) / (2.0 * sigma * sigma)) } else { 1.0 }
        };
        (0..n)
            .map(|t| {
                let h = li.min(t).min(n - t);
                let (mut acc, mut mass, mut full) = (0.0, 0.0, 0.0);
                for a in 0..2 * li {
                    for b in 0..2 * li {
                        full += w(a, b).abs();
                        let inside = |x: isize| x >= li - h && x < li + h;
                        if inside(a) && inside(b) {
                            acc += w(a, b) * d.get((t - li + a) as usize, (t - li + b) as usize);
                            mass += w(a, b).abs();
                        }
                    }
                }
                if h == 0 {
                    0.0
                } else {
                    acc * full / mass
                }
            })
            .collect()
    }

    #[test]
    fn sdm_basics() {
        let d = SelfDistanceMatrix::from_vectors(&[[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]], 1.0).unwrap();
        assert_eq!(d.get(0, 1), core::f64::consts::SQRT_2);
        assert_eq!(d.get(0, 2), 0.0);
        let same = SelfDistanceMatrix::from_vectors(&[[0.3, 0.7]; 5], 1.0).unwrap();
        assert!(same.values().iter().all(|&v| v == 0.0));
        assert!(SelfDistanceMatrix::from_vectors(&[[0.5, 0.5]], 1.0).is_err());
    }

    #[test]
    fn step_novelty_matches_oracle() {
        for taper in [true, false] {
            let pairs = step_pairs(60, &[27]);
            let d = SelfDistanceMatrix::from_vectors(&pairs, 1.0).unwrap();
            let nov = novelty(&d, 5.0, taper).unwrap();
            let oracle = brute_novelty(&d, 5, taper);
            for (a, b) in nov.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-9);
            }
            let arg = (0..nov.len()).fold(0, |m, i| if nov[i] > nov[m] { i } else { m });
            assert!((26..=28).contains(&arg), "argmax {arg}");
        }
    }

    #[test]
    fn homogeneous_and_linear() {
        let d = SelfDistanceMatrix::from_values(30, 1.0, vec![0.7; 900]).unwrap();
        assert!(novelty(&d, 5.0, true).unwrap().iter().all(|v| v.abs() <= 1e-9));
        let pairs = step_pairs(40, &[13, 29]);
        let d = SelfDistanceMatrix::from_vectors(&pairs, 1.0).unwrap();
        let d2 = SelfDistanceMatrix::from_values(40, 1.0, d.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        let (a, b) = (novelty(&d, 5.0, true).unwrap(), novelty(&d2, 5.0, true).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-12);
        }
        let short = SelfDistanceMatrix::from_values(9, 1.0, vec![0.0; 81]).unwrap();
        assert!(novelty(&short, 5.0, true).is_err());
    }

    #[test]
    fn boundary_picking() {
        let mono: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(pick_boundaries(&mono, 5, 0.3), vec![19]);
        assert!(pick_boundaries(&[0.0; 20], 5, 0.3).is_empty());
        let pairs = step_pairs(80, &[25, 55]);
        let d = SelfDistanceMatrix::from_vectors(&pairs, 1.0).unwrap();
        let nov = novelty(&d, 5.0, true).unwrap();
        assert_eq!(pick_boundaries(&nov, 5, 0.3), vec![25, 55]);
        // plateau resolves to its first frame
        let plateau = [0.0, 1.0, 3.0, 3.0, 1.0, 0.0];
        assert_eq!(pick_boundaries(&plateau, 2, 0.3), vec![2]);
    }

    #[test]
    fn majority_labels() {
        let vocal = [true; 10];
        let six: Vec<bool> = (0..10).map(|i| i < 6).collect();
        let five: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let t = label_segments(&[], &six, &vocal, 1.0).unwrap();
        assert_eq!(t.sections()[0].label, Label::Taan);
        let t = label_segments(&[], &five, &vocal, 1.0).unwrap();
        assert_eq!(t.sections()[0].label, Label::NonTaan);
        let t = label_segments(&[], &six, &[false; 10], 1.0).unwrap();
        assert_eq!(t.sections()[0].label, Label::Instrumental);
        // non-vocal frames do not vote
        let mask: Vec<bool> = (0..10).map(|i| i < 3).collect();
        let dec: Vec<bool> = (0..10).map(|i| i < 2).collect();
        let t = label_segments(&[], &dec, &mask, 1.0).unwrap();
        assert_eq!(t.sections()[0].label, Label::Taan);
        let t = label_segments(&[4], &six, &vocal, 2.0).unwrap();
        assert_eq!(t.sections(), &[Section::new(0.0, 8.0, Label::Taan), Section::new(8.0, 20.0, Label::NonTaan)]);
        // equal neighbours are joined
        let t = label_segments(&[3, 7], &[true; 10], &vocal, 1.0).unwrap();
        assert_eq!(t.sections(), &[Section::new(0.0, 10.0, Label::Taan)]);
    }

    fn three(gap_label: Label, gap: f64) -> SectionTimeline {
        SectionTimeline::new(vec![
            Section::new(0.0, 30.0, Label::Taan),
            Section::new(30.0, 30.0 + gap, gap_label),
            Section::new(30.0 + gap, 60.0 + gap, Label::Taan),
        ])
        .unwrap()
    }

    #[test]
    fn grouping_rule_edges() {
        let g = |t: &SectionTimeline| group_sections(t, 20.0, 50.0).len();
        assert_eq!(g(&three(Label::NonTaan, 19.0)), 1);
        assert_eq!(g(&three(Label::NonTaan, 21.0)), 3);
        assert_eq!(g(&three(Label::Instrumental, 49.0)), 1);
        assert_eq!(g(&three(Label::Instrumental, 51.0)), 3);
        // mixed 30 s gap counts as vocal
        let mixed = SectionTimeline::new(vec![
            Section::new(0.0, 10.0, Label::Taan),
            Section::new(10.0, 25.0, Label::Instrumental),
            Section::new(25.0, 40.0, Label::NonTaan),
            Section::new(40.0, 50.0, Label::Taan),
        ])
        .unwrap();
        assert_eq!(group_sections(&mixed, 20.0, 50.0).len(), 4);
    }

    #[test]
    fn timeline_validation_and_frames() {
        assert!(SectionTimeline::new(vec![Section::new(0.0, 2.0, Label::Taan), Section::new(1.0, 3.0, Label::Taan)]).is_err());
        assert!(SectionTimeline::new(vec![Section::new(2.0, 2.0, Label::Taan)]).is_err());
        let t = SectionTimeline::new(vec![Section::new(1.0, 3.0, Label::Taan)]).unwrap();
        assert_eq!(t.frame_labels(1.0, 4), vec![None, Some(Label::Taan), Some(Label::Taan), None]);
        for l in [Label::Taan, Label::NonTaan, Label::Instrumental] {
            assert_eq!(l.as_str().parse::<Label>().unwrap(), l);
        }
    }

    #[test]
    fn end_to_end_step() {
        let n = 120;
        let pairs = step_pairs(n, &[40, 80]);
        let dec: Vec<bool> = pairs.iter().map(|p| p[0] > 0.5).collect();
        let seg = segment_posteriors(&pairs, &dec, &vec![true; n], 1.0, &SegmentConfig::default()).unwrap();
        assert_eq!(seg.boundaries, vec![40, 80]);
        let labels: Vec<Label> = seg.grouped.sections().iter().map(|s| s.label).collect();
        assert_eq!(labels, vec![Label::Taan, Label::NonTaan, Label::Taan]);
    }

    fn arb_timeline() -> impl Strategy<Value = SectionTimeline> {
        prop::collection::vec((1u32..80, 0usize..3), 1..20).prop_map(|parts| {
            let mut t = 0.0;
            let sections = parts
                .into_iter()
                .map(|(d, l)| {
                    let label = [Label::Taan, Label::NonTaan, Label::Instrumental][l];
                    let s = Section::new(t, t + d as f64, label);
                    t += d as f64;
                    s
                })
                .collect();
            SectionTimeline::new(sections).unwrap()
        })
    }

    proptest! {
        #[test]
        fn sdm_symmetric_zero_diagonal(p in prop::collection::vec(0.0f64..1.0, 2..40)) {
            let pairs: Vec<[f64; 2]> = p.iter().map(|&x| [x, 1.0 - x]).collect();
            let d = SelfDistanceMatrix::from_vectors(&pairs, 1.0).unwrap();
            for i in 0..d.len() {
                prop_assert_eq!(d.get(i, i), 0.0);
                for j in 0..d.len() {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert!(d.get(i, j) <= core::f64::consts::SQRT_2 + 1e-12);
                }
            }
        }

        #[test]
        fn grouping_idempotent_and_span_preserving(t in arb_timeline()) {
            let once = group_sections(&t, 20.0, 50.0);
            let twice = group_sections(&once, 20.0, 50.0);
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once.span(), t.span());
            prop_assert!(SectionTimeline::new(once.sections().to_vec()).is_ok());
            let cover = |x: &SectionTimeline| x.sections().iter().map(Section::duration).sum::<f64>();
            prop_assert!((cover(&once) - cover(&t)).abs() < 1e-9);
        }
    }
}
