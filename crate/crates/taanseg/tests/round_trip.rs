use proptest::prelude::*;
use taanseg::model::{decode_model, encode_model, load_model, save_model, Model};
use taanseg::tables::*;
use taanseg::textgrid::{emit_textgrid, parse_textgrid, Interval, IntervalTier, TextGridDoc};
use taanseg::wav::{read_wav, write_wav};
use taanseg::IoError;
use taanseg_core::cnn::{Activation, BandStats, CnnArchitecture, ConvNet};
use taanseg_core::dsp::AudioClip;
use taanseg_core::features::{NormStats, StyleFeatureSeq};
use taanseg_core::mlp::{Mlp, PosteriorSeq};
use taanseg_core::segment::{Label, Section, SectionTimeline};
use taanseg_core::tracks::PitchEnergyTrack;

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Taan), Just(Label::NonTaan), Just(Label::Instrumental)]
}

fn timeline() -> impl Strategy<Value = SectionTimeline> {
    prop::collection::vec((0.0f64..30.0, 0.01f64..40.0, label()), 0..12).prop_map(|parts| {
        let mut t = 0.0;
        let sections = parts
            .into_iter()
            .map(|(gap, len, l)| {
                let s = Section::new(t + gap, t + gap + len, l);
                t = s.end_s;
                s
            })
            .collect();
        SectionTimeline::new(sections).unwrap()
    })
}

fn text() -> impl Strategy<Value = String> {
    prop_oneof![
        Just(String::new()),
        Just("taan".to_string()),
        "[a-z \"\n]{0,12}",
        "\\PC{0,8}",
    ]
}

fn textgrid_doc() -> impl Strategy<Value = TextGridDoc> {
    let tier = ("[A-Za-z0-9 _\"]{0,10}", prop::collection::vec((0.0f64..5.0, 0.001f64..20.0, text()), 0..8)).prop_map(
        |(name, parts)| {
            let mut t = 0.0;
            let intervals: Vec<Interval> = parts
                .into_iter()
                .map(|(gap, len, text)| {
                    let iv = Interval {
                        xmin: t + gap,
                        xmax: t + gap + len,
                        text,
                    };
                    t = iv.xmax;
                    iv
                })
                .collect();
            IntervalTier {
                name,
                xmin: 0.0,
                xmax: t + 1.0,
                intervals,
            }
        },
    );
    prop::collection::vec(tier, 0..4).prop_map(|tiers| {
        let xmax = tiers.iter().map(|t| t.xmax).fold(1.0, f64::max);
        TextGridDoc { xmin: 0.0, xmax, tiers }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn wav_16bit_is_bit_exact(samples in prop::collection::vec(any::<i16>(), 1..2000), rate_ix in 0usize..5) {
        let rate = taanseg_core::dsp::ACCEPTED_RATES[rate_ix];
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
        let clip = AudioClip::new(samples.iter().map(|&s| s as f64 / 32768.0).collect(), rate).unwrap();
        write_wav(&clip, &a).unwrap();
        let back = read_wav(&a).unwrap();
        prop_assert_eq!(&back, &clip);
        write_wav(&back, &b).unwrap();
        prop_assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn track_csv(rows in prop::collection::vec((prop::option::of(50.0f64..900.0), -130.0f64..10.0), 1..300)) {
        let f0: Vec<f64> = rows.iter().map(|r| r.0.unwrap_or(0.0)).collect();
        let voiced: Vec<bool> = rows.iter().map(|r| r.0.is_some()).collect();
        let energy: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let track = PitchEnergyTrack::new(0.01, f0, energy, voiced).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_track_csv(&track, &p).unwrap();
        prop_assert_eq!(read_track_csv(&p).unwrap(), track);
    }

    #[test]
    fn feature_csv(frames in prop::collection::vec(prop::option::of(prop::array::uniform3(-5.0f64..5.0)), 1..200)) {
        let seq = StyleFeatureSeq::new(1.0, frames, NormStats { mean: [0.0; 3], std: [1.0; 3] });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        write_feature_csv(&seq, &p).unwrap();
        prop_assert_eq!(read_feature_csv(&p).unwrap(), seq);
    }

    #[test]
    fn posterior_csv(p in prop::collection::vec(prop::option::of(0.0f64..=1.0), 1..200)) {
        let post = PosteriorSeq::new(1.0, p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_posterior_csv(&post, 0.5, &path).unwrap();
        prop_assert_eq!(read_posterior_csv(&path).unwrap(), post);
    }

    #[test]
    fn timeline_tsv(tl in timeline()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tsv");
        write_timeline_tsv(&tl, &p).unwrap();
        prop_assert_eq!(read_timeline_tsv(&p).unwrap(), tl);
    }

    #[test]
    fn frame_label_tsv(steps in prop::collection::vec((1usize..5, label()), 0..100)) {
        let mut i = 0;
        let labels = steps.into_iter().map(|(d, l)| { i += d; (i - 1, l) }).collect();
        let fl = FrameLabels { frame_s: 1.0, labels };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.tsv");
        write_frame_labels(&fl, &p).unwrap();
        prop_assert_eq!(read_frame_labels(&p, 1.0).unwrap(), fl);
    }

    #[test]
    fn textgrid_doc_round_trip(doc in textgrid_doc()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.TextGrid");
        emit_textgrid(&doc, &p).unwrap();
        let parsed = parse_textgrid(&p).unwrap();
        prop_assert!(parsed.warnings.is_empty());
        prop_assert_eq!(parsed.doc, doc);
    }

    #[test]
    fn mlp_model_is_bit_exact(hidden in 1usize..20, seed in any::<u64>(), scale in -1e3f64..1e3) {
        let mut m = Mlp::new(3, hidden, seed).unwrap();
        let params: Vec<f64> = m.parameters().iter().map(|p| p * scale).collect();
        m.set_parameters(&params).unwrap();
        m.meta.loss_history = vec![scale, 1.0 / 3.0, f64::MIN_POSITIVE];
        m.meta.epochs = 3;
        let model = Model::Mlp(m);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.tseg");
        save_model(&model, &[], &p).unwrap();
        let (back, side) = load_model(&p).unwrap();
        prop_assert!(side.is_some());
        prop_assert_eq!(encode_model(&back), encode_model(&model));
        prop_assert_eq!(back, model);
    }
}

#[test]
fn reference_cnn_model_is_bit_exact() {
    let mut net = ConvNet::new(&CnnArchitecture::reference(), Activation::Sigmoid, 11).unwrap();
    let rows = CnnArchitecture::reference().rows;
    let mean: Vec<f64> = (0..rows).map(|i| i as f64 * 0.1 - 3.0).collect();
    let std: Vec<f64> = (0..rows).map(|i| 1.0 + i as f64 / 7.0).collect();
    net.set_band_stats(Some(BandStats::from_parts(mean, std).unwrap())).unwrap();
    let model = Model::Cnn(net);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.tseg");
    save_model(&model, &[0.69, 0.5], &p).unwrap();
    let (back, side) = load_model(&p).unwrap();
    assert_eq!(side.unwrap().stage1_loss, vec![0.69, 0.5]);
    assert!(back == model);
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(encode_model(&back), bytes);
    assert_eq!(encode_model(&decode_model(&bytes, &p).unwrap()), bytes);
}

/// RIFF header with an arbitrary format tag and no sample data.
fn wav_with_format_tag(tag: u16) -> Vec<u8> {
    let mut v = Vec::new();
    v.extend_from_slice(b"RIFF");
    v.extend_from_slice(&36u32.to_le_bytes());
    v.extend_from_slice(b"WAVEfmt ");
    v.extend_from_slice(&16u32.to_le_bytes());
    v.extend_from_slice(&tag.to_le_bytes());
    v.extend_from_slice(&1u16.to_le_bytes());
    v.extend_from_slice(&8000u32.to_le_bytes());
    v.extend_from_slice(&8000u32.to_le_bytes());
    v.extend_from_slice(&1u16.to_le_bytes());
    v.extend_from_slice(&8u16.to_le_bytes());
    v.extend_from_slice(b"data");
    v.extend_from_slice(&0u32.to_le_bytes());
    v
}

#[test]
fn compressed_wav_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("adpcm.wav");
    std::fs::write(&p, wav_with_format_tag(0x0055)).unwrap();
    match read_wav(&p) {
        Err(e @ IoError::Format { .. }) => assert!(e.to_string().contains("unsupported"), "{e}"),
        other => panic!("{other:?}"),
    }
}
