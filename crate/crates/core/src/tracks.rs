//! Vocal attributes at a 10 ms hop: predominant F0, harmonic energy and a
//! vocal-activity mask.
//!
//! The F0 tracker here is a harmonic-summation baseline. Tracks computed by
//! an external melody extractor can be ingested through the `taanseg`
//! pitch-track CSV reader and enter the pipeline at the same point.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::LogSpectrogram;
use crate::error::{Error, Result};

/// Hop of every pitch/energy track, in seconds.
pub const TRACK_HOP_S: f64 = 0.01;

/// Energy assigned to unvoiced frames.
pub const UNVOICED_DB: f64 = -120.0;

/// Time-aligned F0, vocal energy and voicing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchEnergyTrack {
    hop_s: f64,
    f0_hz: Vec<f64>,
    energy_db: Vec<f64>,
    voiced: Vec<bool>,
}

impl PitchEnergyTrack {
    /// Validates equal lengths, finiteness and `voiced[t] ⟺ f0[t] > 0`.
    pub fn new(hop_s: f64, f0_hz: Vec<f64>, energy_db: Vec<f64>, voiced: Vec<bool>) -> Result<Self> {
        if f0_hz.len() != energy_db.len() || f0_hz.len() != voiced.len() {
            return Err(Error::invalid(alloc::format!(
                "track columns differ in length: f0 {}, energy {}, voiced {}",
                f0_hz.len(),
                energy_db.len(),
                voiced.len()
            )));
        }
        if !(hop_s > 0.0) {
            return Err(Error::invalid("track hop must be positive"));
        }
        for (t, ((&f, &e), &v)) in f0_hz.iter().zip(&energy_db).zip(&voiced).enumerate() {
            if !f.is_finite() || f < 0.0 {
                return Err(Error::invalid(alloc::format!("frame {t}: f0 {f} not a finite non-negative value")));
            }
            if !e.is_finite() {
                return Err(Error::invalid(alloc::format!("frame {t}: energy {e} not finite")));
            }
            if (f > 0.0) != v {
                return Err(Error::invalid(alloc::format!(
                    "frame {t}: voiced flag {v} inconsistent with f0 {f}"
                )));
            }
        }
        Ok(PitchEnergyTrack {
            hop_s,
            f0_hz,
            energy_db,
            voiced,
        })
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn f0_hz(&self) -> &[f64] {
        &self.f0_hz
    }

    pub fn energy_db(&self) -> &[f64] {
        &self.energy_db
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 * self.hop_s
    }

    /// Replaces the energy column, keeping F0 and voicing.
    pub fn with_energy(self, energy_db: Vec<f64>) -> Result<Self> {
        PitchEnergyTrack::new(self.hop_s, self.f0_hz, energy_db, self.voiced)
    }
}

/// Harmonic-summation tracker settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrackerConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub grid_cents: f64,
    /// Half-width of the search window around each harmonic.
    pub tolerance_cents: f64,
    pub max_harmonics: usize,
    /// Harmonics at or above this frequency are ignored.
    pub max_harmonic_hz: f64,
    /// A frame is unvoiced when its best salience is below this multiple of
    /// the salience a flat spectrum at the frame's median magnitude would give.
    pub voicing_ratio: f64,
    /// Harmonic `h` is weighted by `harmonic_decay^(h-1)` in the salience sum.
    pub harmonic_decay: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            f_min_hz: 80.0,
            f_max_hz: 600.0,
            grid_cents: 10.0,
            tolerance_cents: 30.0,
            max_harmonics: 10,
            max_harmonic_hz: 5000.0,
            voicing_ratio: 3.0,
            harmonic_decay: 0.8,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min_hz > 0.0) || !(self.f_min_hz < self.f_max_hz) {
            return Err(Error::invalid("F0 search grid is empty (need 0 < f_min < f_max)"));
        }
        if !(self.grid_cents > 0.0) || !(self.tolerance_cents > 0.0) {
            return Err(Error::invalid("grid and tolerance must be positive"));
        }
        if self.max_harmonics == 0 || !(self.max_harmonic_hz > 0.0) {
            return Err(Error::invalid("need at least one harmonic below a positive limit"));
        }
        if !(self.voicing_ratio >= 0.0) || !(self.harmonic_decay > 0.0 && self.harmonic_decay <= 1.0) {
            return Err(Error::invalid("voicing_ratio must be >= 0 and harmonic_decay in (0, 1]"));
        }
        Ok(())
    }
}

fn cents_factor(cents: f64) -> f64 {
    libm::pow(2.0, cents / 1200.0)
}

/// Inclusive bin range within `± tolerance` cents of `freq`, or the nearest
/// bin when the range holds no bin centre.
fn bin_window(freq: f64, tol_factor: f64, bin_hz: f64, n_bins: usize) -> (usize, usize) {
    let last = n_bins - 1;
    let lo = libm::ceil(freq / tol_factor / bin_hz) as usize;
    let hi = libm::floor(freq * tol_factor / bin_hz) as usize;
    if lo > hi || lo > last {
        let c = (libm::round(freq / bin_hz) as usize).min(last);
        (c, c)
    } else {
        (lo, hi.min(last))
    }
}

fn max_in(mags: &[f64], (lo, hi): (usize, usize)) -> (usize, f64) {
    let mut best = (lo, mags[lo]);
    for (b, &m) in mags.iter().enumerate().take(hi + 1).skip(lo + 1) {
        if m > best.1 {
            best = (b, m);
        }
    }
    best
}

struct Candidate {
    f0: f64,
    windows: Vec<(usize, usize)>,
    weight_sum: f64,
}

fn harmonic_limit(spec: &LogSpectrogram, cfg_max_hz: f64) -> f64 {
    let nyquist = (spec.n_bins() - 1) as f64 * spec.bin_hz();
    cfg_max_hz.min(nyquist)
}

/// Baseline predominant-F0 detector with the default [`TrackerConfig`] and
/// the given search range. Energy is left at 0 dB on voiced frames.
pub fn detect_f0_baseline(spec: &LogSpectrogram, f_min: f64, f_max: f64) -> Result<PitchEnergyTrack> {
    let cfg = TrackerConfig {
        f_min_hz: f_min,
        f_max_hz: f_max,
        ..TrackerConfig::default()
    };
    detect_f0(spec, &cfg)
}

/// Harmonic-summation F0 search on a log-spaced grid.
///
/// For every candidate `f` the salience is `Σ_h w_h · m_h(f)` where `m_h` is
/// the largest linear magnitude within the tolerance window around `h·f`.
/// The winning candidate is refined by a magnitude-weighted average of the
/// parabolically interpolated harmonic peaks.
pub fn detect_f0(spec: &LogSpectrogram, cfg: &TrackerConfig) -> Result<PitchEnergyTrack> {
    cfg.validate()?;
    if (spec.hop_s() - TRACK_HOP_S).abs() > 1e-6 {
        return Err(Error::invalid(alloc::format!(
            "tracker needs a {TRACK_HOP_S} s hop, got {}",
            spec.hop_s()
        )));
    }
    if spec.bin_hz() > 8.0 {
        return Err(Error::invalid(alloc::format!(
            "bin spacing {} Hz too coarse for F0 search (need <= 8 Hz)",
            spec.bin_hz()
        )));
    }
    let n_bins = spec.n_bins();
    let bin_hz = spec.bin_hz();
    let limit = harmonic_limit(spec, cfg.max_harmonic_hz);
    let tol = cents_factor(cfg.tolerance_cents);
    let weights: Vec<f64> = (0..cfg.max_harmonics)
        .map(|h| libm::pow(cfg.harmonic_decay, h as f64))
        .collect();

    let n_grid = libm::floor(1200.0 * libm::log2(cfg.f_max_hz / cfg.f_min_hz) / cfg.grid_cents) as usize + 1;
    let candidates: Vec<Candidate> = (0..n_grid)
        .map(|i| {
            let f0 = cfg.f_min_hz * cents_factor(i as f64 * cfg.grid_cents);
            let windows: Vec<_> = (1..=cfg.max_harmonics)
                .take_while(|&h| h as f64 * f0 < limit)
                .map(|h| bin_window(h as f64 * f0, tol, bin_hz, n_bins))
                .collect();
            let weight_sum = weights[..windows.len()].iter().sum();
            Candidate {
                f0,
                windows,
                weight_sum,
            }
        })
        .collect();

    let top_bin = ((limit / bin_hz) as usize + 1).min(n_bins);
    let mut mags = vec![0.0; n_bins];
    let mut scratch = Vec::with_capacity(top_bin);
    let mut f0_out = Vec::with_capacity(spec.n_frames());
    for t in 0..spec.n_frames() {
        let frame = spec.frame(t);
        for (m, &l) in mags.iter_mut().zip(frame) {
            *m = libm::exp(l);
        }
        scratch.clear();
        scratch.extend_from_slice(&mags[..top_bin]);
        let median = median_in_place(&mut scratch);

        let mut best: Option<(usize, f64)> = None;
        for (ci, c) in candidates.iter().enumerate() {
            if c.windows.is_empty() {
                continue;
            }
            let s: f64 = c
                .windows
                .iter()
                .zip(&weights)
                .map(|(&w, &wt)| wt * max_in(&mags, w).1)
                .sum();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((ci, s));
            }
        }
        let f0 = match best {
            Some((ci, s)) if s > 0.0 && s >= cfg.voicing_ratio * median * candidates[ci].weight_sum => {
                refine(&candidates[ci], frame, &mags, &weights, bin_hz, tol)
                    .clamp(cfg.f_min_hz, cfg.f_max_hz)
            }
            _ => 0.0,
        };
        f0_out.push(f0);
    }
    let voiced: Vec<bool> = f0_out.iter().map(|&f| f > 0.0).collect();
    let energy = voiced.iter().map(|&v| if v { 0.0 } else { UNVOICED_DB }).collect();
    PitchEnergyTrack::new(spec.hop_s(), f0_out, energy, voiced)
}

fn refine(c: &Candidate, log_frame: &[f64], mags: &[f64], weights: &[f64], bin_hz: f64, tol: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (h, (&w, &wt)) in c.windows.iter().zip(weights).enumerate() {
        let (b, m) = max_in(mags, w);
        let mut pos = b as f64;
        if b > 0 && b + 1 < log_frame.len() {
            let (a, p, g) = (log_frame[b - 1], log_frame[b], log_frame[b + 1]);
            let denom = a - 2.0 * p + g;
            if denom < 0.0 {
                pos += (0.5 * (a - g) / denom).clamp(-0.5, 0.5);
            }
        }
        let est = pos * bin_hz / (h + 1) as f64;
        num += wt * m * est;
        den += wt * m;
    }
    if den <= 0.0 {
        return c.f0;
    }
    (num / den).clamp(c.f0 / tol, c.f0 * tol)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Vocal energy `10·log10 Σ_h m_h²` over harmonics of `f0` below
/// `max_harmonic_hz`; unvoiced frames (f0 = 0) get [`UNVOICED_DB`].
pub fn harmonic_energy(spec: &LogSpectrogram, f0_hz: &[f64], cfg: &TrackerConfig) -> Result<Vec<f64>> {
    if f0_hz.len() != spec.n_frames() {
        return Err(Error::invalid(alloc::format!(
            "{} f0 values for {} spectrogram frames",
            f0_hz.len(),
            spec.n_frames()
        )));
    }
    let limit = harmonic_limit(spec, cfg.max_harmonic_hz);
    let tol = cents_factor(cfg.tolerance_cents);
    let mut mags = vec![0.0; spec.n_bins()];
    let mut out = Vec::with_capacity(f0_hz.len());
    for (t, &f0) in f0_hz.iter().enumerate() {
        if !(f0 > 0.0) {
            out.push(UNVOICED_DB);
            continue;
        }
        for (m, &l) in mags.iter_mut().zip(spec.frame(t)) {
            *m = libm::exp(l);
        }
        let mut power = 0.0;
        let mut h = 1;
        while (h as f64) * f0 < limit {
            let (_, m) = max_in(&mags, bin_window(h as f64 * f0, tol, spec.bin_hz(), spec.n_bins()));
            power += m * m;
            h += 1;
        }
        out.push(if power > 0.0 { 10.0 * libm::log10(power) } else { UNVOICED_DB });
    }
    Ok(out)
}

/// Smoothing and hysteresis for the vocal-activity mask.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VocalActivityConfig {
    /// Odd median-filter length applied to the voiced mask.
    pub median_len: usize,
    /// Vocal runs shorter than this are dropped.
    pub min_run_s: f64,
    /// Non-vocal gaps shorter than this between vocal runs are absorbed.
    pub max_gap_s: f64,
}

impl Default for VocalActivityConfig {
    fn default() -> Self {
        VocalActivityConfig {
            median_len: 5,
            min_run_s: 0.2,
            max_gap_s: 0.1,
        }
    }
}

impl VocalActivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.median_len == 0 || self.median_len.is_multiple_of(2) {
            return Err(Error::invalid("median_len must be odd"));
        }
        if !(self.min_run_s >= 0.0) || !(self.max_gap_s >= 0.0) {
            return Err(Error::invalid("run and gap durations must be non-negative"));
        }
        Ok(())
    }
}

fn median_filter_bool(mask: &[bool], len: usize) -> Vec<bool> {
    let half = len / 2;
    (0..mask.len())
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half + 1).min(mask.len());
            let on = mask[lo..hi].iter().filter(|&&v| v).count();
            let total = hi - lo;
            match (2 * on).cmp(&total) {
                core::cmp::Ordering::Greater => true,
                core::cmp::Ordering::Less => false,
                core::cmp::Ordering::Equal => mask[t],
            }
        })
        .collect()
}

/// Runs of equal values as `(start, end_exclusive, value)`.
pub(crate) fn runs(mask: &[bool]) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=mask.len() {
        if t == mask.len() || mask[t] != mask[start] {
            out.push((start, t, mask[start]));
            start = t;
        }
    }
    out
}

/// Vocal-spurt mask: median-filtered voicing, short interior gaps absorbed,
/// then short vocal runs dropped.
pub fn detect_vocal_activity(track: &PitchEnergyTrack, cfg: &VocalActivityConfig) -> Vec<bool> {
    if track.is_empty() {
        return Vec::new();
    }
    let hop = track.hop_s();
    let min_run = libm::round(cfg.min_run_s / hop) as usize;
    let max_gap = libm::round(cfg.max_gap_s / hop) as usize;
    let mut mask = median_filter_bool(track.voiced(), cfg.median_len.max(1));

    let segments = runs(&mask);
    for (i, &(s, e, v)) in segments.iter().enumerate() {
        let interior = i > 0 && i + 1 < segments.len();
        if !v && interior && e - s < max_gap {
            mask[s..e].iter_mut().for_each(|m| *m = true);
        }
    }
    for (s, e, v) in runs(&mask) {
        if v && e - s < min_run {
            mask[s..e].iter_mut().for_each(|m| *m = false);
        }
    }
    mask
}
