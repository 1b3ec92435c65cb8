//! Audio → tracks → features → posteriors → sections.

use alloc::vec::Vec;

use crate::cnn::{raw_patches, ConvNet, SpectrogramPatch, PATCH_HOP_LEN, PATCH_N_DFT, PATCH_SAMPLE_RATE, PATCH_WIN_LEN};
use crate::config::PipelineConfig;
use crate::dsp::{log_spectrogram, resample, AudioClip};
use crate::error::{Error, Result};
use crate::features::{extract_features, StyleFeatureSeq};
use crate::mlp::{classify_frames, mlp_train, Dataset, Mlp, PosteriorSeq};
use crate::segment::{segment_sequence, Segmentation};
use crate::tracks::{detect_f0, detect_vocal_activity, harmonic_energy, PitchEnergyTrack};
use crate::Class;

/// Pitch/energy track plus its vocal-activity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct VocalTracks {
    pub track: PitchEnergyTrack,
    pub vocal_mask: Vec<bool>,
}

/// Downsamples to the analysis rate, tracks F0 and harmonic energy, and
/// detects vocal activity.
pub fn compute_tracks(clip: &AudioClip, cfg: &PipelineConfig) -> Result<VocalTracks> {
    let a = &cfg.analysis;
    let clip = resample(clip, a.sample_rate)?;
    let spec = log_spectrogram(&clip, a.win_s, a.hop_s, a.n_dft)?;
    let f0 = detect_f0(&spec, &cfg.tracker)?;
    let energy = harmonic_energy(&spec, f0.f0_hz(), &cfg.tracker)?;
    let track = f0.with_energy(energy)?;
    let vocal_mask = detect_vocal_activity(&track, &cfg.vocal_activity);
    Ok(VocalTracks { track, vocal_mask })
}

/// Features from a track, using its own vocal-activity mask.
pub fn features_from_track(track: &PitchEnergyTrack, cfg: &PipelineConfig) -> Result<StyleFeatureSeq> {
    let mask = detect_vocal_activity(track, &cfg.vocal_activity);
    extract_features(track, &mask, &cfg.features)
}

pub fn compute_features(clip: &AudioClip, cfg: &PipelineConfig) -> Result<StyleFeatureSeq> {
    let t = compute_tracks(clip, cfg)?;
    extract_features(&t.track, &t.vocal_mask, &cfg.features)
}

/// Labels padded or truncated to `n` frames; missing frames are non-taan.
pub fn align_labels(labels: &[Class], n: usize) -> Vec<Class> {
    (0..n).map(|i| labels.get(i).copied().unwrap_or(Class::NonTaan)).collect()
}

/// Trains a fresh MLP on the vocal frames of one or more concerts.
pub fn train_mlp(concerts: &[(StyleFeatureSeq, Vec<Class>)], cfg: &PipelineConfig) -> Result<Mlp> {
    let mut data = Dataset::new(crate::mlp::FEATURE_DIM);
    for (seq, labels) in concerts {
        let ds = Dataset::from_features(seq, &align_labels(labels, seq.len()))?;
        for i in 0..ds.len() {
            data.push(ds.input(i), ds.label(i))?;
        }
    }
    let mut model = Mlp::new(crate::mlp::FEATURE_DIM, cfg.mlp.hidden, cfg.mlp.seed)?;
    let history = mlp_train(&mut model, &data, &cfg.mlp)?;
    model.meta.init_seed = cfg.mlp.seed;
    model.meta.epochs = cfg.mlp.epochs;
    model.meta.loss_history = history;
    Ok(model)
}

/// MLP posteriors and segmentation of one concert's features.
pub fn segment_with_mlp(model: &Mlp, features: &StyleFeatureSeq, cfg: &PipelineConfig) -> Result<(PosteriorSeq, Segmentation)> {
    let (post, _) = classify_frames(model, features, cfg.classify.threshold)?;
    let seg = segment_sequence(&post, cfg.classify.threshold, &cfg.segment)?;
    Ok((post, seg))
}

/// Unnormalized 1 s patches of a whole recording; patch `j` covers frame `j`.
pub fn concert_patches(clip: &AudioClip, concert: u32) -> Result<Vec<SpectrogramPatch>> {
    let clip = resample(clip, PATCH_SAMPLE_RATE)?;
    let win_s = PATCH_WIN_LEN as f64 / PATCH_SAMPLE_RATE as f64;
    let hop_s = PATCH_HOP_LEN as f64 / PATCH_SAMPLE_RATE as f64;
    let spec = log_spectrogram(&clip, win_s, hop_s, PATCH_N_DFT)?;
    raw_patches(&spec, concert)
}

/// CNN posteriors on every whole 1 s patch. Frames outside `vocal_mask`
/// (when given) get no posterior.
pub fn cnn_posteriors(model: &ConvNet, clip: &AudioClip, vocal_mask: Option<&[bool]>) -> Result<PosteriorSeq> {
    let patches = concert_patches(clip, 0)?;
    let p = patches
        .iter()
        .enumerate()
        .map(|(j, patch)| {
            if vocal_mask.is_some_and(|m| !m.get(j).copied().unwrap_or(false)) {
                Ok(None)
            } else {
                model.classify_raw(patch).map(|p| Some(p[0]))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PosteriorSeq::new(1.0, p)
}

/// Everything `segment` produces for one concert.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcertAnalysis {
    pub features: StyleFeatureSeq,
    pub posteriors: PosteriorSeq,
    pub segmentation: Segmentation,
}

pub fn analyze_concert(model: &Mlp, clip: &AudioClip, cfg: &PipelineConfig) -> Result<ConcertAnalysis> {
    cfg.validate()?;
    let features = compute_features(clip, cfg)?;
    if features.len() < 2 {
        return Err(Error::empty("concert too short to segment"));
    }
    let (posteriors, segmentation) = segment_with_mlp(model, &features, cfg)?;
    Ok(ConcertAnalysis {
        features,
        posteriors,
        segmentation,
    })
}
