//! Deterministic synthetic concerts with section and frame ground truth.
//!
//! Vocal sections are an 8-harmonic source (1/h rolloff) following a pitch
//! contour at 10 ms resolution, with amplitude modulation in dB. A drone
//! triad on the tonic runs throughout; instrumental sections add 1 Hz
//! noise-burst percussion.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnn::{raw_patches, SpectrogramPatch, PATCH_COLS, PATCH_HOP_LEN, PATCH_N_DFT, PATCH_SAMPLE_RATE, PATCH_WIN_LEN};
use crate::dsp::{log_spectrogram, AudioClip, ACCEPTED_RATES};
use crate::error::{Error, Result};
use crate::features::REFERENCE_HZ;
use crate::segment::{Label, Section, SectionTimeline};
use crate::Class;

pub const CONTOUR_HOP_S: f64 = 0.01;
pub const MAX_CONCERT_S: f64 = 1800.0;
pub const N_HARMONICS: usize = 8;
/// Total vocal amplitude before AM.
const VOCAL_GAIN: f64 = 0.3;
const PERCUSSION_GAIN: f64 = 0.25;
const PERCUSSION_DECAY_S: f64 = 0.03;
/// Slow AM rate for non-taan vocal styles.
const SLOW_AM_HZ: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Style {
    Taan,
    SteadyVocal,
    GlideVocal,
    Instrumental,
}

impl Style {
    pub fn label(self) -> Label {
        match self {
            Style::Taan => Label::Taan,
            Style::SteadyVocal | Style::GlideVocal => Label::NonTaan,
            Style::Instrumental => Label::Instrumental,
        }
    }
}

/// One section of a script. Interpretation of the modulation fields by
/// style:
///
/// - taan: FM rate (5–10 Hz) and depth in cents on top of ±700-cent ramps;
///   AM in dB at the FM rate.
/// - steady: `mod_depth_cents` is the jitter amplitude.
/// - glide: sinusoid at `mod_rate_hz` (≤ 2 Hz) with the given depth.
/// - instrumental: modulation fields are ignored.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SectionSpec {
    pub style: Style,
    pub duration_s: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_f0"))]
    pub f0_hz: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mod_rate_hz: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mod_depth_cents: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub am_depth_db: f64,
}

#[allow(dead_code)]
fn default_f0() -> f64 {
    220.0
}

impl SectionSpec {
    pub fn taan(duration_s: f64, f0_hz: f64, rate_hz: f64, depth_cents: f64) -> Self {
        SectionSpec {
            style: Style::Taan,
            duration_s,
            f0_hz,
            mod_rate_hz: rate_hz,
            mod_depth_cents: depth_cents,
            am_depth_db: 3.0,
        }
    }

    pub fn steady(duration_s: f64, f0_hz: f64) -> Self {
        SectionSpec {
            style: Style::SteadyVocal,
            duration_s,
            f0_hz,
            mod_rate_hz: 0.0,
            mod_depth_cents: 10.0,
            am_depth_db: 3.0,
        }
    }

    pub fn glide(duration_s: f64, f0_hz: f64, rate_hz: f64, depth_cents: f64) -> Self {
        SectionSpec {
            style: Style::GlideVocal,
            duration_s,
            f0_hz,
            mod_rate_hz: rate_hz,
            mod_depth_cents: depth_cents,
            am_depth_db: 3.0,
        }
    }

    pub fn instrumental(duration_s: f64) -> Self {
        SectionSpec {
            style: Style::Instrumental,
            duration_s,
            f0_hz: default_f0(),
            mod_rate_hz: 0.0,
            mod_depth_cents: 0.0,
            am_depth_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.duration_s, self.f0_hz, self.mod_rate_hz, self.mod_depth_cents, self.am_depth_db];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("section parameters must be finite"));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid("section duration must be positive"));
        }
        if self.mod_depth_cents < 0.0 || self.am_depth_db < 0.0 || self.mod_rate_hz < 0.0 {
            return Err(Error::invalid("modulation rate and depths must be non-negative"));
        }
        match self.style {
            Style::Taan if !(5.0..=10.0).contains(&self.mod_rate_hz) => {
                Err(Error::invalid(alloc::format!("taan modulation rate {} Hz outside [5, 10]", self.mod_rate_hz)))
            }
            Style::GlideVocal if self.mod_rate_hz > 2.0 => {
                Err(Error::invalid("glide modulation rate must not exceed 2 Hz"))
            }
            Style::Instrumental => Ok(()),
            _ if !(self.f0_hz > 0.0) => Err(Error::invalid("vocal f0 must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ConcertScript {
    pub sections: Vec<SectionSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_rate"))]
    pub sample_rate: u32,
    /// Drone fundamental.
    #[cfg_attr(feature = "serde", serde(default = "default_tonic"))]
    pub tonic_hz: f64,
    /// Drone level relative to the vocal source.
    #[cfg_attr(feature = "serde", serde(default = "default_drone_db"))]
    pub drone_db: f64,
}

#[allow(dead_code)]
fn default_rate() -> u32 {
    16000
}

#[allow(dead_code)]
fn default_tonic() -> f64 {
    110.0
}

#[allow(dead_code)]
fn default_drone_db() -> f64 {
    -10.0
}

impl ConcertScript {
    pub fn new(sections: Vec<SectionSpec>, seed: u64, sample_rate: u32) -> Self {
        ConcertScript {
            sections,
            seed,
            sample_rate,
            tonic_hz: default_tonic(),
            drone_db: default_drone_db(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.sections.iter().map(|s| s.duration_s).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(Error::empty("script has no sections"));
        }
        if !ACCEPTED_RATES.contains(&self.sample_rate) {
            return Err(Error::invalid(alloc::format!("unsupported sample rate {}", self.sample_rate)));
        }
        if !(self.tonic_hz > 0.0) || !self.drone_db.is_finite() {
            return Err(Error::invalid("drone tonic must be positive and level finite"));
        }
        for (i, s) in self.sections.iter().enumerate() {
            s.validate()
                .map_err(|e| Error::invalid(alloc::format!("section {i}: {e}")))?;
        }
        let total = self.duration_s();
        if total > MAX_CONCERT_S {
            return Err(Error::ResourceLimit(alloc::format!(
                "script lasts {total} s, above the {MAX_CONCERT_S} s limit"
            )));
        }
        Ok(())
    }

    /// Section boundaries in seconds, exactly as stored in the timeline.
    pub fn timeline(&self) -> Result<SectionTimeline> {
        let mut t = 0.0;
        let sections = self
            .sections
            .iter()
            .map(|s| {
                let sec = Section::new(t, t + s.duration_s, s.style.label());
                t += s.duration_s;
                sec
            })
            .collect();
        SectionTimeline::new(sections)
    }
}

fn section_rng(seed: u64, index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream);
    rng
}

/// Pitch contour in cents re 55 Hz at 10 ms; empty for instrumental
/// sections.
pub fn synth_pitch_contour(spec: &SectionSpec, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if spec.style == Style::Instrumental {
        return Ok(Vec::new());
    }
    let n = libm::ceil(spec.duration_s / CONTOUR_HOP_S - 1e-9) as usize;
    let base = 1200.0 * libm::log2(spec.f0_hz / REFERENCE_HZ);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = |i: usize| i as f64 * CONTOUR_HOP_S;
    let contour = match spec.style {
        Style::Taan => {
            let ramps = taan_ramps(spec.duration_s, &mut rng);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (0..n)
                .map(|i| {
                    base + ramp_value(&ramps, t(i))
                        + spec.mod_depth_cents * libm::sin(2.0 * PI * spec.mod_rate_hz * t(i) + phase)
                })
                .collect()
        }
        Style::SteadyVocal => {
            // jitter knots every 100 ms, linearly interpolated
            let knots: Vec<f64> = (0..n / 10 + 2)
                .map(|_| rng.gen_range(-1.0..=1.0) * spec.mod_depth_cents)
                .collect();
            (0..n)
                .map(|i| {
                    let (k, f) = (i / 10, (i % 10) as f64 / 10.0);
                    base + knots[k] + f * (knots[k + 1] - knots[k])
                })
                .collect()
        }
        Style::GlideVocal => {
            let phase = rng.gen_range(0.0..2.0 * PI);
            (0..n)
                .map(|i| base + spec.mod_depth_cents * libm::sin(2.0 * PI * spec.mod_rate_hz * t(i) + phase))
                .collect()
        }
        Style::Instrumental => unreachable!(),
    };
    Ok(contour)
}

/// Alternating ascent/descent ramps spanning 700 cents, 2–3.5 s each.
fn taan_ramps(duration: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut knots = vec![(0.0, -350.0)];
    let mut t = 0.0;
    let mut up = true;
    while t < duration {
        t += rng.gen_range(2.0..3.5);
        knots.push((t, if up { 350.0 } else { -350.0 }));
        up = !up;
    }
    knots
}

fn ramp_value(knots: &[(f64, f64)], t: f64) -> f64 {
    let k = knots.partition_point(|&(kt, _)| kt <= t).clamp(1, knots.len() - 1);
    let ((t0, v0), (t1, v1)) = (knots[k - 1], knots[k]);
    v0 + (t - t0) / (t1 - t0) * (v1 - v0)
}

/// Synthesized audio and its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConcert {
    pub audio: AudioClip,
    pub timeline: SectionTimeline,
    /// Label of each whole 1 s frame, by frame centre.
    pub frame_labels: Vec<Label>,
}

impl SynthConcert {
    /// Frame classes for training/evaluation; instrumental frames count as
    /// non-taan.
    pub fn frame_classes(&self) -> Vec<Class> {
        self.frame_labels
            .iter()
            .map(|&l| if l == Label::Taan { Class::Taan } else { Class::NonTaan })
            .collect()
    }
}

pub fn synth_concert(script: &ConcertScript) -> Result<SynthConcert> {
    script.validate()?;
    let sr = script.sample_rate as f64;
    let total = script.duration_s();
    let n_total = libm::round(total * sr) as usize;
    let mut out = vec![0.0; n_total];

    let mut start = 0.0;
    for (idx, spec) in script.sections.iter().enumerate() {
        let a = libm::round(start * sr) as usize;
        start += spec.duration_s;
        let b = (libm::round(start * sr) as usize).min(n_total);
        let dst = &mut out[a..b];
        if spec.style == Style::Instrumental {
            render_percussion(dst, sr, &mut section_rng(script.seed, idx, 2));
        } else {
            let contour = synth_pitch_contour(spec, section_rng(script.seed, idx, 0).gen())?;
            render_voice(dst, sr, spec, &contour, &mut section_rng(script.seed, idx, 1));
        }
    }
    render_drone(&mut out, sr, script);
    out.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));

    let timeline = script.timeline()?;
    let n_frames = libm::floor(total + 1e-9) as usize;
    let frame_labels = timeline
        .frame_labels(1.0, n_frames)
        .into_iter()
        .map(|l| l.unwrap_or(Label::Instrumental))
        .collect();
    Ok(SynthConcert {
        audio: AudioClip::new(out, script.sample_rate)?,
        timeline,
        frame_labels,
    })
}

fn render_voice(dst: &mut [f64], sr: f64, spec: &SectionSpec, contour: &[f64], rng: &mut ChaCha8Rng) {
    let norm: f64 = (1..=N_HARMONICS).map(|h| 1.0 / h as f64).sum();
    let amps: Vec<f64> = (1..=N_HARMONICS).map(|h| VOCAL_GAIN / (norm * h as f64)).collect();
    let offsets: Vec<f64> = (0..N_HARMONICS).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let (am_rate, am_phase) = match spec.style {
        Style::Taan => (spec.mod_rate_hz, rng.gen_range(0.0..2.0 * PI)),
        _ => (SLOW_AM_HZ, rng.gen_range(0.0..2.0 * PI)),
    };
    let nyquist = 0.45 * sr;
    let mut phase = 0.0;
    let last = contour.len().saturating_sub(1);
    for (i, v) in dst.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let pos = t / CONTOUR_HOP_S;
        let k = (pos as usize).min(last);
        let f = pos - k as f64;
        let cents = if k < last {
            contour[k] + f * (contour[k + 1] - contour[k])
        } else {
            contour[last]
        };
        let f0 = REFERENCE_HZ * libm::exp2(cents / 1200.0);
        phase += 2.0 * PI * f0 / sr;
        if phase > 2.0 * PI {
            phase -= 2.0 * PI;
        }
        let gain = libm::pow(10.0, spec.am_depth_db * libm::sin(2.0 * PI * am_rate * t + am_phase) / 20.0);
        let mut s = 0.0;
        for h in 0..N_HARMONICS {
            if (h + 1) as f64 * f0 >= nyquist {
                break;
            }
            s += amps[h] * libm::sin((h + 1) as f64 * phase + offsets[h]);
        }
        *v += gain * s;
    }
}

fn render_percussion(dst: &mut [f64], sr: f64, rng: &mut ChaCha8Rng) {
    let period = sr as usize;
    for (i, v) in dst.iter_mut().enumerate() {
        let since = (i % period) as f64 / sr;
        let env = libm::exp(-since / PERCUSSION_DECAY_S);
        let noise: f64 = rng.gen_range(-1.0..1.0);
        if env > 1e-4 {
            *v += PERCUSSION_GAIN * env * noise;
        }
    }
}

/// Tonic, fifth and octave, each with three 1/h harmonics.
fn render_drone(dst: &mut [f64], sr: f64, script: &ConcertScript) {
    let level = VOCAL_GAIN * libm::pow(10.0, script.drone_db / 20.0);
    let notes = [script.tonic_hz, 1.5 * script.tonic_hz, 2.0 * script.tonic_hz];
    let mut partials = Vec::new();
    for f in notes {
        for h in 1..=3 {
            if h as f64 * f < 0.45 * sr {
                partials.push((2.0 * PI * h as f64 * f / sr, 1.0 / h as f64));
            }
        }
    }
    let norm: f64 = partials.iter().map(|p| p.1).sum();
    for (i, v) in dst.iter_mut().enumerate() {
        let n = i as f64;
        *v += level / norm * partials.iter().map(|&(w, a)| a * libm::sin(w * n)).sum::<f64>();
    }
}

/// Ten-minute reference concert: six taan sections separated by 45–60 s
/// gaps that always contain non-taan singing. Pitch and rates vary with
/// `seed`; the layout does not.
pub fn default_test_script(seed: u64) -> ConcertScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f0 = || rng.gen_range(150.0..260.0);
    let layout: [(Style, f64); 20] = [
        (Style::Instrumental, 15.0),
        (Style::GlideVocal, 35.0),
        (Style::SteadyVocal, 30.0),
        (Style::Taan, 30.0),
        (Style::SteadyVocal, 25.0),
        (Style::Instrumental, 15.0),
        (Style::GlideVocal, 20.0),
        (Style::Taan, 40.0),
        (Style::GlideVocal, 45.0),
        (Style::Taan, 20.0),
        (Style::SteadyVocal, 30.0),
        (Style::Instrumental, 20.0),
        (Style::Taan, 35.0),
        (Style::GlideVocal, 25.0),
        (Style::SteadyVocal, 25.0),
        (Style::Taan, 30.0),
        (Style::SteadyVocal, 45.0),
        (Style::Taan, 35.0),
        (Style::GlideVocal, 40.0),
        (Style::Instrumental, 40.0),
    ];
    let f0s: Vec<f64> = (0..layout.len()).map(|_| f0()).collect();
    let sections = layout
        .iter()
        .zip(f0s)
        .map(|(&(style, d), f)| match style {
            Style::Taan => SectionSpec::taan(d, f, rng.gen_range(5.5..9.0), rng.gen_range(100.0..200.0)),
            Style::SteadyVocal => SectionSpec::steady(d, f),
            Style::GlideVocal => SectionSpec::glide(d, f, rng.gen_range(0.2..0.5), rng.gen_range(50.0..150.0)),
            Style::Instrumental => SectionSpec::instrumental(d),
        })
        .collect();
    ConcertScript::new(sections, seed, 16000)
}

/// One-second 8 kHz clips whose spectrogram gives exactly one patch.
pub const PATCH_CLIP_LEN: usize = (PATCH_COLS - 1) * PATCH_HOP_LEN + PATCH_WIN_LEN;

/// Labeled raw (unnormalized) patches: taan clips carry 5–10 Hz FM, the
/// others are steady or slowly gliding tones. Classes alternate.
pub fn synth_patch_corpus(n_per_class: usize, seed: u64) -> Result<(Vec<SpectrogramPatch>, Vec<Class>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = PATCH_SAMPLE_RATE;
    let dur = PATCH_CLIP_LEN as f64 / sr as f64;
    let mut patches = Vec::with_capacity(2 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for i in 0..2 * n_per_class {
        let class = Class::from_index(i % 2);
        let f0 = rng.gen_range(140.0..300.0);
        let spec = match class {
            Class::Taan => SectionSpec::taan(dur, f0, rng.gen_range(5.0..10.0), rng.gen_range(100.0..200.0)),
            Class::NonTaan if rng.gen_bool(0.5) => SectionSpec::steady(dur, f0),
            Class::NonTaan => SectionSpec::glide(dur, f0, rng.gen_range(0.2..1.0), rng.gen_range(30.0..120.0)),
        };
        let script = ConcertScript {
            tonic_hz: rng.gen_range(100.0..150.0),
            ..ConcertScript::new(vec![spec], rng.gen(), sr)
        };
        let concert = synth_concert(&script)?;
        let mut samples = concert.audio.into_samples();
        samples.resize(PATCH_CLIP_LEN, 0.0);
        let clip = AudioClip::new(samples, sr)?;
        let spec = log_spectrogram(&clip, 0.04, 0.02, PATCH_N_DFT)?;
        let mut p = raw_patches(&spec, i as u32)?;
        let patch = p.pop().ok_or_else(|| Error::Internal("patch clip produced no patch".into()))?;
        patches.push(patch);
        labels.push(class);
    }
    Ok((patches, labels))
}
