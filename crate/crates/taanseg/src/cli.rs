//! Argument definitions and subcommand implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use taanseg_core::cnn::{
    accuracy, cnn_train, export_channel_maps, Activation, BandStats, CnnArchitecture, SpectrogramPatch,
};
use taanseg_core::config::PipelineConfig;
use taanseg_core::eval::{boundary_deviation, frame_metrics, match_sections, roc_curve};
use taanseg_core::features::StyleFeatureSeq;
use taanseg_core::gmm::bootstrap_labels;
use taanseg_core::mlp::{classify_frames, PosteriorSeq};
use taanseg_core::pipeline::{
    cnn_posteriors, compute_features, compute_tracks, concert_patches, features_from_track, train_mlp,
};
use taanseg_core::segment::{segment_sequence, Label, SectionTimeline};
use taanseg_core::synth::{default_test_script, synth_concert, synth_patch_corpus, ConcertScript};
use taanseg_core::Class;

use crate::config::{build_config, config_path, CONFIG_ENV};
use crate::error::{IoError, Result};
use crate::model::{load_model, save_model, Model};
use crate::report::{render_json, render_table, write_channel_map, EvaluationReport, FrameSummary};
use crate::tables::{
    read_feature_csv, read_frame_labels, read_posterior_csv, read_timeline_tsv, read_track_csv, write_feature_csv,
    write_frame_labels, write_posterior_csv, write_timeline_tsv, write_track_csv, FrameLabels,
};
use crate::textgrid::{doc_from_timeline, emit_textgrid, parse_textgrid, timeline_from_doc};
use crate::wav::{read_wav, write_wav};

/// Taan detection and segmentation for khayal concert recordings.
#[derive(Debug, Parser)]
#[command(name = "taanseg", version)]
pub struct Cli {
    /// JSON configuration file; missing keys keep their defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set segment.half_width_s=4`.
    /// Repeatable; applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic concert with its ground truth.
    Synth(SynthArgs),
    /// Pitch, vocal energy and voicing at 10 ms.
    Tracks(TracksArgs),
    /// Style features at 1 s from audio or an ingested pitch track.
    Features(FeaturesArgs),
    /// Train the feature MLP on labeled concerts.
    TrainMlp(TrainMlpArgs),
    /// Train the spectrogram-patch CNN.
    TrainCnn(TrainCnnArgs),
    /// Frame posteriors from a trained model.
    Classify(ClassifyArgs),
    /// Full pipeline: features, classification, novelty, grouping.
    Segment(SegmentArgs),
    /// Compare detected sections (and optionally posteriors) to ground truth.
    Evaluate(EvaluateArgs),
    /// Print a CNN's layer shapes and export pooled channel maps.
    InspectCnn(InspectCnnArgs),
    /// Expand a few seed frame labels to a whole concert by GMM self-training.
    BootstrapLabels(BootstrapArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Concert script (JSON). Without it the 10-minute default test concert is used.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Random seed; overrides the script's own seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output WAV (16-bit PCM).
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth section timeline (TSV).
    #[arg(long)]
    pub timeline: Option<PathBuf>,
    /// Ground-truth 1 s frame labels (TSV).
    #[arg(long)]
    pub frames: Option<PathBuf>,
    /// Ground truth as a Praat TextGrid.
    #[arg(long)]
    pub textgrid: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TracksArgs {
    /// Concert audio (WAV).
    #[arg(long)]
    pub audio: PathBuf,
    /// Pitch-track CSV (`time_s,f0_hz,energy_db,voiced`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Concert audio (WAV).
    #[arg(long, conflicts_with = "track", required_unless_present = "track")]
    pub audio: Option<PathBuf>,
    /// Externally computed pitch-track CSV instead of audio.
    #[arg(long)]
    pub track: Option<PathBuf>,
    /// Feature CSV (`frame_s,mod_rate,mod_energy,energy_zcr,vocal`).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainMlpArgs {
    /// Feature CSV per concert; repeat once per concert.
    #[arg(long = "features", required = true)]
    pub features: Vec<PathBuf>,
    /// Frame-label TSV (or TextGrid) per concert, in the same order.
    #[arg(long = "labels", required = true)]
    pub labels: Vec<PathBuf>,
    /// Output `.tseg` model; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Training epochs; overrides `mlp.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initialization seed; overrides `mlp.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainCnnArgs {
    /// Concert audio; repeat once per concert.
    #[arg(long = "audio", required_unless_present = "synthetic")]
    pub audio: Vec<PathBuf>,
    /// Frame-label TSV (or TextGrid) per concert, in the same order.
    #[arg(long = "labels")]
    pub labels: Vec<PathBuf>,
    /// Train on a synthetic patch corpus with this many patches per class.
    #[arg(long, conflicts_with = "audio")]
    pub synthetic: Option<usize>,
    /// Output `.tseg` model; metadata goes to `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Epochs per training stage; overrides `cnn.epochs`.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initialization seed; overrides `cnn.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `cnn.activation`.
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ActivationArg {
    Sigmoid,
    Tanh,
    Relu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Relu => Activation::Relu,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// `.tseg` model (MLP or CNN).
    #[arg(long)]
    pub model: PathBuf,
    /// Concert audio (WAV); required for CNN models.
    #[arg(long, required_unless_present = "features")]
    pub audio: Option<PathBuf>,
    /// Feature CSV (MLP models only).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Posterior CSV (`frame_s,p_taan,taan`).
    #[arg(long)]
    pub out: PathBuf,
    /// Taan decision threshold on p(taan); overrides `classify.threshold`.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// `.tseg` model (MLP or CNN).
    #[arg(long)]
    pub model: PathBuf,
    /// Concert audio (WAV); required for CNN models.
    #[arg(long, required_unless_present = "features")]
    pub audio: Option<PathBuf>,
    /// Feature CSV (MLP models only).
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Section timeline TSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the sections as a TextGrid.
    #[arg(long)]
    pub textgrid: Option<PathBuf>,
    /// Also write the frame posteriors.
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
    /// Taan decision threshold on p(taan); overrides `classify.threshold`.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Detected timeline (TSV or TextGrid).
    #[arg(long)]
    pub detected: PathBuf,
    /// Ground-truth timeline (TSV or TextGrid).
    #[arg(long)]
    pub truth: PathBuf,
    /// TextGrid tier to read; defaults to the first interval tier.
    #[arg(long)]
    pub tier: Option<String>,
    /// Frame posteriors for frame-level precision/recall and the ROC.
    #[arg(long)]
    pub posteriors: Option<PathBuf>,
    /// Decision threshold for frame metrics; overrides `classify.threshold`.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report printed to stdout.
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    /// Also write the JSON report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectCnnArgs {
    /// `.tseg` CNN model.
    #[arg(long)]
    pub model: PathBuf,
    /// Recording to take a patch from.
    #[arg(long, requires_all = ["time", "out"])]
    pub audio: Option<PathBuf>,
    /// Patch start time in seconds (rounded down to a whole frame).
    #[arg(long)]
    pub time: Option<f64>,
    /// Zero-based channel of the final pooling layer.
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Map output, `.pgm` or `.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    /// Feature CSV of the concert.
    #[arg(long)]
    pub features: PathBuf,
    /// Seed frame labels (TSV, at least two taan and two non-taan frames).
    #[arg(long = "seed-labels")]
    pub seed_labels: PathBuf,
    /// Frame labels for every vocal frame (TSV).
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(config_path(cli.config).as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Tracks(a) => tracks(a, &cfg),
        Command::Features(a) => features(a, &cfg),
        Command::TrainMlp(a) => train_mlp_cmd(a, cfg),
        Command::TrainCnn(a) => train_cnn_cmd(a, cfg),
        Command::Classify(a) => classify(a, cfg),
        Command::Segment(a) => segment(a, cfg),
        Command::Evaluate(a) => evaluate(a, &cfg),
        Command::InspectCnn(a) => inspect_cnn(a),
        Command::BootstrapLabels(a) => bootstrap(a),
    }
}

fn is_textgrid(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("textgrid"))
}

/// Reads a timeline from TSV or TextGrid, printing TextGrid warnings.
pub fn read_timeline(path: &Path, tier: Option<&str>) -> Result<SectionTimeline> {
    if is_textgrid(path) {
        let parsed = parse_textgrid(path)?;
        for w in &parsed.warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        timeline_from_doc(&parsed.doc, tier).map_err(|m| IoError::format(path, m))
    } else {
        read_timeline_tsv(path)
    }
}

/// Frame labels from a frame-label TSV, or rasterized from a TextGrid.
fn read_labels(path: &Path, n_frames: usize) -> Result<Vec<Option<Label>>> {
    if is_textgrid(path) {
        Ok(read_timeline(path, None)?.frame_labels(1.0, n_frames))
    } else {
        Ok(read_frame_labels(path, 1.0)?.dense(n_frames))
    }
}

fn label_class(l: Label) -> Class {
    if l == Label::Taan {
        Class::Taan
    } else {
        Class::NonTaan
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut script: ConcertScript = match &a.script {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| IoError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| IoError::parse(p, e.line(), e.to_string()))?
        }
        None => default_test_script(a.seed.unwrap_or(0)),
    };
    if let Some(s) = a.seed {
        script.seed = s;
    }
    let concert = synth_concert(&script)?;
    write_wav(&concert.audio, &a.out)?;
    if let Some(p) = &a.timeline {
        write_timeline_tsv(&concert.timeline, p)?;
    }
    if let Some(p) = &a.frames {
        let labels = FrameLabels {
            frame_s: 1.0,
            labels: concert.frame_labels.iter().copied().enumerate().collect(),
        };
        write_frame_labels(&labels, p)?;
    }
    if let Some(p) = &a.textgrid {
        emit_textgrid(&doc_from_timeline(&concert.timeline, "sections", Some(script.duration_s())), p)?;
    }
    Ok(())
}

fn tracks(a: TracksArgs, cfg: &PipelineConfig) -> Result<()> {
    let clip = read_wav(&a.audio)?;
    write_track_csv(&compute_tracks(&clip, cfg)?.track, &a.out)
}

fn features(a: FeaturesArgs, cfg: &PipelineConfig) -> Result<()> {
    let seq = match (&a.audio, &a.track) {
        (Some(p), _) => compute_features(&read_wav(p)?, cfg)?,
        (None, Some(p)) => features_from_track(&read_track_csv(p)?, cfg)?,
        (None, None) => return Err(IoError::Usage("give --audio or --track".into())),
    };
    write_feature_csv(&seq, &a.out)
}

/// Keeps only vocal frames that carry a label.
fn labeled_features(seq: &StyleFeatureSeq, labels: &[Option<Label>]) -> (StyleFeatureSeq, Vec<Class>) {
    let frames = seq
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| f.filter(|_| labels.get(i).is_some_and(Option::is_some)))
        .collect();
    let classes = labels.iter().map(|l| l.map_or(Class::NonTaan, label_class)).collect();
    (StyleFeatureSeq::new(seq.frame_s(), frames, seq.stats()), classes)
}

fn train_mlp_cmd(a: TrainMlpArgs, mut cfg: PipelineConfig) -> Result<()> {
    if a.features.len() != a.labels.len() {
        return Err(IoError::Usage(format!(
            "{} feature files but {} label files",
            a.features.len(),
            a.labels.len()
        )));
    }
    if let Some(e) = a.epochs {
        cfg.mlp.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.mlp.seed = s;
    }
    cfg.mlp.validate()?;
    let mut concerts = Vec::with_capacity(a.features.len());
    for (f, l) in a.features.iter().zip(&a.labels) {
        let seq = read_feature_csv(f)?;
        let labels = read_labels(l, seq.len())?;
        concerts.push(labeled_features(&seq, &labels));
    }
    let model = train_mlp(&concerts, &cfg)?;
    if let Some(loss) = model.meta.loss_history.last() {
        eprintln!("trained {} epochs, final loss {loss:.4}", model.meta.epochs);
    }
    save_model(&Model::Mlp(model), &[], &a.out)
}

fn train_cnn_cmd(a: TrainCnnArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.cnn.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.cnn.seed = s;
    }
    if let Some(act) = a.activation {
        cfg.cnn.activation = act.into();
    }
    cfg.cnn.validate()?;
    let (raw, labels): (Vec<SpectrogramPatch>, Vec<Class>) = match a.synthetic {
        Some(n) => synth_patch_corpus(n, cfg.cnn.seed)?,
        None => {
            if a.audio.len() != a.labels.len() {
                return Err(IoError::Usage(format!(
                    "{} audio files but {} label files",
                    a.audio.len(),
                    a.labels.len()
                )));
            }
            let mut raw = Vec::new();
            let mut classes = Vec::new();
            for (i, (audio, lab)) in a.audio.iter().zip(&a.labels).enumerate() {
                let patches = concert_patches(&read_wav(audio)?, i as u32)?;
                let frame_labels = read_labels(lab, patches.len())?;
                for (p, l) in patches.into_iter().zip(frame_labels) {
                    if let Some(l @ (Label::Taan | Label::NonTaan)) = l {
                        raw.push(p);
                        classes.push(label_class(l));
                    }
                }
            }
            (raw, classes)
        }
    };
    let stats = BandStats::estimate(&raw)?;
    let patches = raw.iter().map(|p| stats.normalize(p)).collect::<std::result::Result<Vec<_>, _>>()?;
    let (net, report) = cnn_train(&CnnArchitecture::reference(), &patches, &labels, Some(stats), &cfg.cnn)?;
    eprintln!(
        "trained on {} patches, training accuracy {:.3}",
        patches.len(),
        accuracy(&net, &patches, &labels)?
    );
    save_model(&Model::Cnn(net), &report.stage1_loss, &a.out)
}

/// Frame posteriors for either model kind.
fn posteriors(model: &Model, audio: Option<&Path>, features: Option<&Path>, cfg: &PipelineConfig) -> Result<PosteriorSeq> {
    match model {
        Model::Mlp(m) => {
            let seq = match (features, audio) {
                (Some(f), _) => read_feature_csv(f)?,
                (None, Some(a)) => compute_features(&read_wav(a)?, cfg)?,
                (None, None) => return Err(IoError::Usage("give --audio or --features".into())),
            };
            Ok(classify_frames(m, &seq, cfg.classify.threshold)?.0)
        }
        Model::Cnn(net) => {
            let audio = audio.ok_or_else(|| IoError::Usage("a CNN model needs --audio".into()))?;
            let clip = read_wav(audio)?;
            let mask = compute_features(&clip, cfg)?.vocal_mask();
            Ok(cnn_posteriors(net, &clip, Some(&mask))?)
        }
    }
}

fn classify(a: ClassifyArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.classify.threshold = t;
        cfg.validate()?;
    }
    let (model, _) = load_model(&a.model)?;
    let post = posteriors(&model, a.audio.as_deref(), a.features.as_deref(), &cfg)?;
    write_posterior_csv(&post, cfg.classify.threshold, &a.out)
}

fn segment(a: SegmentArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(t) = a.threshold {
        cfg.classify.threshold = t;
        cfg.validate()?;
    }
    let (model, _) = load_model(&a.model)?;
    let post = posteriors(&model, a.audio.as_deref(), a.features.as_deref(), &cfg)?;
    if post.len() < 2 {
        return Err(taanseg_core::Error::EmptyInput("recording too short to segment".into()).into());
    }
    let seg = segment_sequence(&post, cfg.classify.threshold, &cfg.segment)?;
    write_timeline_tsv(&seg.grouped, &a.out)?;
    if let Some(p) = &a.textgrid {
        emit_textgrid(&doc_from_timeline(&seg.grouped, "sections", Some(post.len() as f64 * post.frame_s())), p)?;
    }
    if let Some(p) = &a.posteriors {
        write_posterior_csv(&post, cfg.classify.threshold, p)?;
    }
    Ok(())
}

pub fn evaluation_report(
    detected: &SectionTimeline,
    truth: &SectionTimeline,
    post: Option<(&PosteriorSeq, f64)>,
    cfg: &PipelineConfig,
) -> Result<EvaluationReport> {
    let sections = match_sections(detected, truth, cfg.eval.cumulative_overlap);
    let deviation = boundary_deviation(&sections).ok();
    let frames = match post {
        Some((post, threshold)) => {
            let truth_frames: Vec<bool> = truth
                .frame_labels(post.frame_s(), post.len())
                .iter()
                .map(|l| *l == Some(Label::Taan))
                .collect();
            let mask = post.vocal_mask();
            let metrics = frame_metrics(&post.decisions(threshold), &truth_frames, Some(&mask))?;
            let p: Vec<f64> = post.p_taan().iter().map(|p| p.unwrap_or(0.0)).collect();
            let eer = roc_curve(&p, &truth_frames, Some(&mask)).ok().map(|r| r.eer);
            Some(FrameSummary { metrics, eer })
        }
        None => None,
    };
    Ok(EvaluationReport {
        sections,
        deviation,
        frames,
    })
}

fn evaluate(a: EvaluateArgs, cfg: &PipelineConfig) -> Result<()> {
    let detected = read_timeline(&a.detected, a.tier.as_deref())?;
    let truth = read_timeline(&a.truth, a.tier.as_deref())?;
    let post = a.posteriors.as_deref().map(read_posterior_csv).transpose()?;
    let threshold = a.threshold.unwrap_or(cfg.classify.threshold);
    let report = evaluation_report(&detected, &truth, post.as_ref().map(|p| (p, threshold)), cfg)?;
    match a.format {
        ReportFormat::Table => print!("{}", render_table(&report)),
        ReportFormat::Json => println!("{}", render_json(&report)),
    }
    if let Some(p) = &a.json {
        std::fs::write(p, render_json(&report) + "\n").map_err(|e| IoError::io(p, e))?;
    }
    Ok(())
}

fn inspect_cnn(a: InspectCnnArgs) -> Result<()> {
    let (model, _) = load_model(&a.model)?;
    let Model::Cnn(net) = model else {
        return Err(IoError::format(&a.model, "not a CNN model"));
    };
    let arch = net.architecture();
    let (r, c) = net.input_shape();
    println!("input 1@{r}x{c}");
    for (ch, rows, cols) in arch.shape_trace()? {
        println!("maps {ch}@{rows}x{cols}");
    }
    println!("features {}", arch.feature_len()?);
    if let Some(h) = arch.hidden {
        println!("hidden {h}");
    }
    println!("output 2");
    println!("parameters {}", net.param_count());
    if let (Some(audio), Some(t), Some(out)) = (&a.audio, a.time, &a.out) {
        let patches = concert_patches(&read_wav(audio)?, 0)?;
        if !(t >= 0.0) {
            return Err(IoError::Usage("--time must be non-negative".into()));
        }
        let j = t.floor() as usize;
        let raw = patches
            .get(j)
            .ok_or_else(|| IoError::Usage(format!("--time {t} is beyond the last whole patch ({})", patches.len())))?;
        let patch = match net.band_stats() {
            Some(s) => s.normalize(raw)?,
            None => raw.clone(),
        };
        write_channel_map(&export_channel_maps(&net, &patch, a.channel)?, out)?;
    }
    Ok(())
}

fn bootstrap(a: BootstrapArgs) -> Result<()> {
    let seq = read_feature_csv(&a.features)?;
    let seed_labels = read_frame_labels(&a.seed_labels, seq.frame_s())?;
    let vocal: Vec<usize> = (0..seq.len()).filter(|&i| seq.features()[i].is_some()).collect();
    let points: Vec<[f64; 3]> = vocal.iter().map(|&i| seq.features()[i].expect("vocal frame")).collect();
    let mut seed = Vec::with_capacity(seed_labels.labels.len());
    for &(frame, label) in &seed_labels.labels {
        let pos = vocal.binary_search(&frame).map_err(|_| {
            IoError::format(&a.seed_labels, format!("seed frame at {} s is not a vocal frame", frame as f64 * seq.frame_s()))
        })?;
        let class = match label {
            Label::Taan => Class::Taan,
            Label::NonTaan => Class::NonTaan,
            Label::Instrumental => {
                return Err(IoError::format(&a.seed_labels, "seed labels must be taan or non-taan"));
            }
        };
        seed.push((pos, class));
    }
    let result = bootstrap_labels(&points, &seed)?;
    eprintln!(
        "bootstrap {} after {} iterations",
        if result.converged { "converged" } else { "stopped" },
        result.iterations
    );
    let labels = FrameLabels {
        frame_s: seq.frame_s(),
        labels: vocal
            .iter()
            .zip(&result.labels)
            .map(|(&i, &c)| (i, if c == Class::Taan { Label::Taan } else { Label::NonTaan }))
            .collect(),
    };
    write_frame_labels(&labels, &a.out)
}
