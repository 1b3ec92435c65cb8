//! Melodic-style descriptors at a 1 s frame rate.
//!
//! Each 1 s analysis window (500 ms hop) of a 10 ms pitch track yields
//! three raw values:
//!
//! 1. pitch-modulation rate: location of the modulation-spectrum peak of
//!    the cubic-detrended cents contour, searched between 1 and 20 Hz;
//! 2. modulation energy: power-spectrum energy in the 5 bins around that
//!    peak;
//! 3. energy zero-crossing rate of the mean-removed energy contour.
//!
//! Raw values are averaged over 5 s within each vocal region, sampled at
//! 1 s, and z-normalized over all vocal frames of the recording.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::FftPlan;
use crate::error::{Error, Result};
use crate::tracks::PitchEnergyTrack;

/// Reference pitch for the cents scale.
pub const REFERENCE_HZ: f64 = 55.0;
/// Samples per analysis window (1 s at 10 ms).
pub const WINDOW_LEN: usize = 100;
/// Modulation DFT length.
pub const MOD_DFT_LEN: usize = 128;
/// Number of modulation-spectrum bins kept (`0..=64`).
pub const MOD_BINS: usize = MOD_DFT_LEN / 2 + 1;
/// Modulation bin spacing in Hz for a 100 Hz pitch-track rate.
pub const MOD_BIN_HZ: f64 = 100.0 / MOD_DFT_LEN as f64;

/// Cents above [`REFERENCE_HZ`]; `None` marks unvoiced (0 Hz) samples.
pub fn hz_to_cents(f0_hz: &[f64]) -> Result<Vec<Option<f64>>> {
    f0_hz
        .iter()
        .map(|&f| {
            if f.is_nan() || f < 0.0 {
                Err(Error::invalid(alloc::format!("f0 {f} Hz is negative or NaN")))
            } else if f == 0.0 {
                Ok(None)
            } else {
                Ok(Some(1200.0 * libm::log2(f / REFERENCE_HZ)))
            }
        })
        .collect()
}

/// Linearly interpolates `None` samples. Leading and trailing gaps hold the
/// nearest value. Returns `None` if more than `max_gap_fraction` of the
/// window is missing.
pub fn fill_gaps(window: &[Option<f64>], max_gap_fraction: f64) -> Option<Vec<f64>> {
    let missing = window.iter().filter(|v| v.is_none()).count();
    if window.is_empty() || missing as f64 > max_gap_fraction * window.len() as f64 || missing == window.len() {
        return None;
    }
    let known: Vec<(usize, f64)> = window
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|x| (i, x)))
        .collect();
    let mut out = Vec::with_capacity(window.len());
    let mut next = 0;
    for i in 0..window.len() {
        while next < known.len() && known[next].0 < i {
            next += 1;
        }
        let v = match (next.checked_sub(1).map(|p| known[p]), known.get(next)) {
            (_, Some(&(j, x))) if j == i => x,
            (Some((a, xa)), Some(&(b, xb))) => xa + (xb - xa) * (i - a) as f64 / (b - a) as f64,
            (Some((_, xa)), None) => xa,
            (None, Some(&(_, xb))) => xb,
            (None, None) => unreachable!("window has at least one known sample"),
        };
        out.push(v);
    }
    Some(out)
}

/// Least-squares cubic detrending via an orthonormal polynomial basis
/// built once for a fixed window length.
#[derive(Debug, Clone)]
pub struct CubicDetrender {
    basis: [Vec<f64>; 4],
}

impl CubicDetrender {
    pub fn new(len: usize) -> Result<Self> {
        if len < 4 {
            return Err(Error::invalid("cubic detrending needs at least 4 samples"));
        }
        let half = (len - 1) as f64 / 2.0;
        let t: Vec<f64> = (0..len).map(|i| (i as f64 - half) / half.max(1.0)).collect();
        let mut basis: [Vec<f64>; 4] = Default::default();
        for d in 0..4 {
            let mut v: Vec<f64> = t.iter().map(|&x| libm::pow(x, d as f64)).collect();
            // two Gram-Schmidt passes keep the basis orthogonal to rounding
            for _ in 0..2 {
                for q in basis.iter().take(d) {
                    let proj = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
                }
            }
            let norm = libm::sqrt(dot(&v, &v));
            v.iter_mut().for_each(|a| *a /= norm);
            basis[d] = v;
        }
        Ok(CubicDetrender { basis })
    }

    pub fn len(&self) -> usize {
        self.basis[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `window - cubic_fit(window)`.
    pub fn residual(&self, window: &[f64]) -> Result<Vec<f64>> {
        if window.len() != self.len() {
            return Err(Error::invalid(alloc::format!(
                "detrender built for {} samples, got {}",
                self.len(),
                window.len()
            )));
        }
        let mut r = window.to_vec();
        for q in &self.basis {
            let c = dot(window, q);
            r.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        Ok(r)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Residual of a least-squares cubic fit over the window.
pub fn detrend_poly3(window: &[f64]) -> Result<Vec<f64>> {
    CubicDetrender::new(window.len())?.residual(window)
}

/// Magnitudes of bins `0..=64` of the 128-point DFT of a zero-padded
/// 100-sample residual.
pub fn modulation_spectrum(residual: &[f64]) -> Result<Vec<f64>> {
    modulation_spectrum_with(&FftPlan::new(MOD_DFT_LEN)?, residual)
}

fn modulation_spectrum_with(plan: &FftPlan, residual: &[f64]) -> Result<Vec<f64>> {
    if residual.len() != WINDOW_LEN {
        return Err(Error::invalid(alloc::format!(
            "modulation window must hold {WINDOW_LEN} samples, got {}",
            residual.len()
        )));
    }
    if residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("modulation residual must be finite"));
    }
    let mut out = Vec::with_capacity(MOD_BINS);
    plan.real_magnitudes(residual, &mut out);
    Ok(out)
}

/// Peak of the modulation spectrum inside the search band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationPeak {
    pub rate_hz: f64,
    pub energy: f64,
    /// Set when the searched band is entirely zero.
    pub degenerate: bool,
}

/// Analysis-window and smoothing parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FeatureConfig {
    /// Window hop in pitch-track samples (50 = 500 ms).
    pub hop_len: usize,
    /// Windows with a larger fraction of unusable samples are skipped.
    pub max_gap_fraction: f64,
    /// First searched modulation bin (2 = 1.5625 Hz).
    pub peak_lo_bin: usize,
    /// Last searched modulation bin (25 = 19.53 Hz).
    pub peak_hi_bin: usize,
    /// Bins on each side of the peak summed into the modulation energy.
    pub neighborhood_bins: usize,
    pub smoothing_s: f64,
    pub variance_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            hop_len: 50,
            max_gap_fraction: 0.2,
            peak_lo_bin: 2,
            peak_hi_bin: 25,
            neighborhood_bins: 2,
            smoothing_s: 5.0,
            variance_floor: 1e-12,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_len == 0 || self.hop_len > WINDOW_LEN {
            return Err(Error::invalid("feature hop must be in 1..=100 samples"));
        }
        if !(0.0..1.0).contains(&self.max_gap_fraction) {
            return Err(Error::invalid("max_gap_fraction must be in [0, 1)"));
        }
        if self.peak_lo_bin > self.peak_hi_bin || self.peak_hi_bin >= MOD_BINS {
            return Err(Error::invalid("peak search band must satisfy lo <= hi <= 64"));
        }
        if !(self.smoothing_s > 0.0) || !(self.variance_floor > 0.0) {
            return Err(Error::invalid("smoothing_s and variance_floor must be positive"));
        }
        Ok(())
    }
}

/// Peak location (Hz) and the summed power of the peak bin ± the
/// configured neighbourhood. Ties resolve to the lowest bin.
pub fn modulation_peak_features(mag: &[f64], cfg: &FeatureConfig) -> ModulationPeak {
    let hi = cfg.peak_hi_bin.min(mag.len().saturating_sub(1));
    let lo = cfg.peak_lo_bin.min(hi);
    let mut peak = lo;
    for b in lo..=hi {
        if mag[b] > mag[peak] {
            peak = b;
        }
    }
    let from = peak.saturating_sub(cfg.neighborhood_bins);
    let to = (peak + cfg.neighborhood_bins).min(mag.len() - 1);
    let energy = mag[from..=to].iter().map(|m| m * m).sum();
    ModulationPeak {
        rate_hz: peak as f64 * MOD_BIN_HZ,
        energy,
        degenerate: mag[peak] == 0.0,
    }
}

/// Sign changes of the mean-removed window (strict product < 0).
pub fn energy_zcr(window: &[f64]) -> f64 {
    if window.is_empty() {
        return 0.0;
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    window
        .windows(2)
        .filter(|p| (p[0] - mean) * (p[1] - mean) < 0.0)
        .count() as f64
}

/// Raw per-window features at the analysis hop.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatureSeq {
    hop_s: f64,
    /// `None` for skipped or non-vocal windows.
    values: Vec<Option<[f64; 3]>>,
    /// Vocal-region id of each window's centre sample.
    window_region: Vec<Option<usize>>,
    /// Vocal-region id of each 1 s frame's centre sample.
    frame_region: Vec<Option<usize>>,
}

impl RawFeatureSeq {
    pub fn new(
        hop_s: f64,
        values: Vec<Option<[f64; 3]>>,
        window_region: Vec<Option<usize>>,
        frame_region: Vec<Option<usize>>,
    ) -> Result<Self> {
        if values.len() != window_region.len() {
            return Err(Error::invalid("one region id per raw window required"));
        }
        if !(hop_s > 0.0) {
            return Err(Error::invalid("raw feature hop must be positive"));
        }
        Ok(RawFeatureSeq {
            hop_s,
            values,
            window_region,
            frame_region,
        })
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn values(&self) -> &[Option<[f64; 3]>] {
        &self.values
    }

    pub fn n_frames(&self) -> usize {
        self.frame_region.len()
    }
}

fn region_ids(mask: &[bool]) -> Vec<Option<usize>> {
    let mut id = 0;
    let mut prev = false;
    mask.iter()
        .map(|&v| {
            if v && !prev {
                id += 1;
            }
            prev = v;
            v.then_some(id - 1)
        })
        .collect()
}

/// Raw features for every analysis window of the track. Only samples that
/// are both vocal and voiced are used; the rest are gaps.
pub fn raw_features(track: &PitchEnergyTrack, vocal_mask: &[bool], cfg: &FeatureConfig) -> Result<RawFeatureSeq> {
    cfg.validate()?;
    if vocal_mask.len() != track.len() {
        return Err(Error::invalid(alloc::format!(
            "vocal mask has {} frames, track has {}",
            vocal_mask.len(),
            track.len()
        )));
    }
    let samples_per_frame = libm::round(1.0 / track.hop_s()) as usize;
    let regions = region_ids(vocal_mask);
    let cents = hz_to_cents(track.f0_hz())?;
    let usable: Vec<bool> = vocal_mask.iter().zip(track.voiced()).map(|(&a, &b)| a && b).collect();

    let detrender = CubicDetrender::new(WINDOW_LEN)?;
    let plan = FftPlan::new(MOD_DFT_LEN)?;
    let n_windows = if track.len() >= WINDOW_LEN {
        (track.len() - WINDOW_LEN) / cfg.hop_len + 1
    } else {
        0
    };
    let mut values = Vec::with_capacity(n_windows);
    let mut window_region = Vec::with_capacity(n_windows);
    let mut pitch = vec![None; WINDOW_LEN];
    let mut energy = vec![None; WINDOW_LEN];
    for k in 0..n_windows {
        let start = k * cfg.hop_len;
        let region = regions[start + WINDOW_LEN / 2];
        window_region.push(region);
        if region.is_none() {
            values.push(None);
            continue;
        }
        for i in 0..WINDOW_LEN {
            let t = start + i;
            pitch[i] = if usable[t] { cents[t] } else { None };
            energy[i] = usable[t].then(|| track.energy_db()[t]);
        }
        let (Some(p), Some(e)) = (
            fill_gaps(&pitch, cfg.max_gap_fraction),
            fill_gaps(&energy, cfg.max_gap_fraction),
        ) else {
            values.push(None);
            continue;
        };
        let residual = detrender.residual(&p)?;
        let mag = modulation_spectrum_with(&plan, &residual)?;
        let peak = modulation_peak_features(&mag, cfg);
        values.push(Some([peak.rate_hz, peak.energy, energy_zcr(&e)]));
    }
    let n_frames = track.len() / samples_per_frame;
    let frame_region = (0..n_frames)
        .map(|j| regions[j * samples_per_frame + samples_per_frame / 2])
        .collect();
    Ok(RawFeatureSeq {
        hop_s: cfg.hop_len as f64 * track.hop_s(),
        values,
        window_region,
        frame_region,
    })
}

/// Per-dimension normalization statistics over vocal frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// Normalized 3-d features at 1 s; `None` on non-vocal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleFeatureSeq {
    frame_s: f64,
    features: Vec<Option<[f64; 3]>>,
    stats: NormStats,
}

impl StyleFeatureSeq {
    pub fn new(frame_s: f64, features: Vec<Option<[f64; 3]>>, stats: NormStats) -> Self {
        StyleFeatureSeq {
            frame_s,
            features,
            stats,
        }
    }

    pub fn frame_s(&self) -> f64 {
        self.frame_s
    }

    pub fn features(&self) -> &[Option<[f64; 3]>] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn vocal_mask(&self) -> Vec<bool> {
        self.features.iter().map(Option::is_some).collect()
    }

    pub fn stats(&self) -> NormStats {
        self.stats
    }
}

/// Centred moving average of valid windows of the same vocal region,
/// sampled at 1 s, followed by z-normalization over the vocal frames.
pub fn smooth_and_normalize(raw: &RawFeatureSeq, cfg: &FeatureConfig) -> Result<StyleFeatureSeq> {
    let frame_hops = libm::round(1.0 / raw.hop_s) as isize;
    let half = libm::round(cfg.smoothing_s / 2.0 / raw.hop_s) as isize;
    let mut smoothed: Vec<Option<[f64; 3]>> = Vec::with_capacity(raw.n_frames());
    for (j, region) in raw.frame_region.iter().enumerate() {
        let Some(region) = *region else {
            smoothed.push(None);
            continue;
        };
        let centre = j as isize * frame_hops;
        let mut acc = [0.0; 3];
        let mut n = 0usize;
        for k in (centre - half).max(0)..=(centre + half) {
            let k = k as usize;
            if k >= raw.values.len() {
                break;
            }
            if raw.window_region[k] != Some(region) {
                continue;
            }
            if let Some(v) = raw.values[k] {
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
                n += 1;
            }
        }
        smoothed.push((n > 0).then(|| acc.map(|a| a / n as f64)));
    }
    normalize(smoothed, cfg.variance_floor, 1.0)
}

fn normalize(values: Vec<Option<[f64; 3]>>, floor: f64, frame_s: f64) -> Result<StyleFeatureSeq> {
    let vocal: Vec<[f64; 3]> = values.iter().flatten().copied().collect();
    if vocal.is_empty() {
        return Err(Error::empty("no vocal frames to normalize"));
    }
    let n = vocal.len() as f64;
    let mut mean = [0.0; 3];
    for v in &vocal {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x / n);
    }
    let mut var = [0.0; 3];
    for v in &vocal {
        for d in 0..3 {
            var[d] += (v[d] - mean[d]) * (v[d] - mean[d]) / n;
        }
    }
    let std = var.map(|v| libm::sqrt(v.max(floor)));
    let features = values
        .into_iter()
        .map(|f| f.map(|v| core::array::from_fn(|d| (v[d] - mean[d]) / std[d])))
        .collect();
    Ok(StyleFeatureSeq {
        frame_s,
        features,
        stats: NormStats { mean, std },
    })
}

/// Raw extraction followed by smoothing and normalization.
pub fn extract_features(track: &PitchEnergyTrack, vocal_mask: &[bool], cfg: &FeatureConfig) -> Result<StyleFeatureSeq> {
    let raw = raw_features(track, vocal_mask, cfg)?;
    smooth_and_normalize(&raw, cfg)
}
