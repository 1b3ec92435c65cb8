//! Spectral primitives: Hamming windows, radix-2 FFT, log-magnitude
//! spectrograms and windowed-sinc downsampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Sample rates accepted anywhere in the pipeline.
pub const ACCEPTED_RATES: [u32; 5] = [8000, 16000, 22050, 44100, 48000];

/// Floor applied to linear magnitudes before taking the natural log.
pub const LOG_FLOOR: f64 = 1e-10;

/// Mono audio with a sample rate from [`ACCEPTED_RATES`].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if !ACCEPTED_RATES.contains(&sample_rate) {
            return Err(Error::invalid(alloc::format!(
                "sample rate {sample_rate} Hz not in {ACCEPTED_RATES:?}"
            )));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2πk/(n-1))`.
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("hamming window needs n >= 2"));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|k| 0.54 - 0.46 * libm::cos(2.0 * PI * k as f64 / denom))
        .collect())
}

/// Precomputed tables for a complex FFT of fixed size.
///
/// Power-of-two sizes use an iterative radix-2 transform; any other size
/// falls back to a direct DFT.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("fft size must be positive"));
        }
        let cos = (0..n)
            .map(|k| libm::cos(2.0 * PI * k as f64 / n as f64))
            .collect();
        let sin = (0..n)
            .map(|k| libm::sin(2.0 * PI * k as f64 / n as f64))
            .collect();
        let bitrev = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        } else {
            Vec::new()
        };
        Ok(FftPlan {
            n,
            cos,
            sin,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform `X[k] = Σ x[t] e^{-2πi kt/n}` in place.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) {
        assert_eq!(re.len(), self.n);
        assert_eq!(im.len(), self.n);
        if self.n.is_power_of_two() {
            self.radix2(re, im);
        } else {
            self.direct(re, im);
        }
    }

    fn radix2(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let wr = self.cos[k * stride];
                    let wi = -self.sin[k * stride];
                    let a = start + k;
                    let b = a + half;
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            len <<= 1;
        }
    }

    fn direct(&self, re: &mut [f64], im: &mut [f64]) {
        let n = self.n;
        let xr = re.to_vec();
        let xi = im.to_vec();
        for k in 0..n {
            let mut sr = 0.0;
            let mut si = 0.0;
            for t in 0..n {
                let idx = (k * t) % n;
                let (c, s) = (self.cos[idx], self.sin[idx]);
                sr += xr[t] * c + xi[t] * s;
                si += xi[t] * c - xr[t] * s;
            }
            re[k] = sr;
            im[k] = si;
        }
    }

    /// Magnitudes of bins `0..=n/2` of a real input zero-padded to `n`.
    pub fn real_magnitudes(&self, input: &[f64], out: &mut Vec<f64>) {
        assert!(input.len() <= self.n, "input longer than transform");
        let mut re = vec![0.0; self.n];
        let mut im = vec![0.0; self.n];
        re[..input.len()].copy_from_slice(input);
        self.forward(&mut re, &mut im);
        out.clear();
        out.extend(
            (0..=self.n / 2).map(|k| libm::sqrt(re[k] * re[k] + im[k] * im[k])),
        );
    }
}

/// Natural-log magnitude spectrogram stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrogram {
    values: Vec<f64>,
    n_bins: usize,
    n_frames: usize,
    bin_hz: f64,
    hop_s: f64,
    sample_rate: u32,
    n_dft: usize,
    win_len: usize,
    hop_len: usize,
}

impl LogSpectrogram {
    /// Builds a spectrogram from explicit frames of log magnitudes. Mostly
    /// useful for constructing test inputs.
    pub fn from_frames(frames: &[Vec<f64>], bin_hz: f64, hop_s: f64) -> Result<Self> {
        let n_bins = frames.first().map(Vec::len).unwrap_or(0);
        if frames.iter().any(|f| f.len() != n_bins) {
            return Err(Error::invalid("ragged spectrogram frames"));
        }
        if !(bin_hz > 0.0) || !(hop_s > 0.0) {
            return Err(Error::invalid("bin_hz and hop_s must be positive"));
        }
        let values: Vec<f64> = frames.iter().flatten().copied().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrogram values must be finite"));
        }
        let n_dft = 2 * n_bins.saturating_sub(1);
        Ok(LogSpectrogram {
            values,
            n_bins,
            n_frames: frames.len(),
            bin_hz,
            hop_s,
            sample_rate: libm::round(bin_hz * n_dft as f64) as u32,
            n_dft,
            win_len: 0,
            hop_len: 0,
        })
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn n_dft(&self) -> usize {
        self.n_dft
    }

    /// Analysis window length in samples (0 for hand-built spectrograms).
    pub fn win_len(&self) -> usize {
        self.win_len
    }

    /// Hop length in samples (0 for hand-built spectrograms).
    pub fn hop_len(&self) -> usize {
        self.hop_len
    }

    /// Log magnitudes of one frame, bins `0..n_bins`.
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_bins..(t + 1) * self.n_bins]
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.values[frame * self.n_bins + bin]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_bins.max(1))
    }
}

fn samples_for(seconds: f64, rate: u32) -> usize {
    libm::round(seconds * rate as f64) as usize
}

/// Log-magnitude spectrogram with a Hamming window of `win_s`, hop `hop_s`
/// and an `n_dft`-point zero-padded DFT. Partial trailing frames are
/// dropped.
pub fn log_spectrogram(
    clip: &AudioClip,
    win_s: f64,
    hop_s: f64,
    n_dft: usize,
) -> Result<LogSpectrogram> {
    let sr = clip.sample_rate();
    let win = samples_for(win_s, sr);
    let hop = samples_for(hop_s, sr);
    if win < 2 || hop == 0 {
        return Err(Error::invalid("window must span >= 2 samples and hop >= 1"));
    }
    if win > n_dft {
        return Err(Error::invalid(alloc::format!(
            "window of {win} samples exceeds n_dft = {n_dft}"
        )));
    }
    if clip.len() < win {
        return Err(Error::empty(alloc::format!(
            "clip of {} samples shorter than one {win}-sample window",
            clip.len()
        )));
    }
    let window = hamming_window(win)?;
    let plan = FftPlan::new(n_dft)?;
    let n_frames = (clip.len() - win) / hop + 1;
    let n_bins = n_dft / 2 + 1;
    let mut values = Vec::with_capacity(n_frames * n_bins);
    let mut re = vec![0.0; n_dft];
    let mut im = vec![0.0; n_dft];
    let samples = clip.samples();
    for t in 0..n_frames {
        let seg = &samples[t * hop..t * hop + win];
        re.iter_mut().for_each(|v| *v = 0.0);
        im.iter_mut().for_each(|v| *v = 0.0);
        for (dst, (x, w)) in re.iter_mut().zip(seg.iter().zip(&window)) {
            *dst = x * w;
        }
        plan.forward(&mut re, &mut im);
        values.extend((0..n_bins).map(|k| {
            let mag = libm::sqrt(re[k] * re[k] + im[k] * im[k]);
            libm::log(mag.max(LOG_FLOOR))
        }));
    }
    Ok(LogSpectrogram {
        values,
        n_bins,
        n_frames,
        bin_hz: sr as f64 / n_dft as f64,
        hop_s: hop as f64 / sr as f64,
        sample_rate: sr,
        n_dft,
        win_len: win,
        hop_len: hop,
    })
}

const RESAMPLE_TAPS: usize = 64;

/// Downsamples with a 64-tap Blackman-windowed sinc low-pass at
/// `0.45 * target_hz`. Equal rates return the input unchanged.
pub fn resample(clip: &AudioClip, target_hz: u32) -> Result<AudioClip> {
    if !ACCEPTED_RATES.contains(&target_hz) {
        return Err(Error::invalid(alloc::format!(
            "target rate {target_hz} Hz not in {ACCEPTED_RATES:?}"
        )));
    }
    let source_hz = clip.sample_rate();
    if target_hz > source_hz {
        return Err(Error::Unsupported(alloc::format!(
            "upsampling {source_hz} Hz -> {target_hz} Hz"
        )));
    }
    if target_hz == source_hz {
        return Ok(clip.clone());
    }
    if clip.is_empty() {
        return Err(Error::empty("cannot resample an empty clip"));
    }
    let x = clip.samples();
    let ratio = source_hz as f64 / target_hz as f64;
    let out_len = libm::round(x.len() as f64 / ratio) as usize;
    let cutoff = 0.45 * target_hz as f64 / source_hz as f64; // cycles per source sample
    let half = (RESAMPLE_TAPS / 2) as isize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let t = i as f64 * ratio;
        let base = libm::floor(t) as isize;
        let mut acc = 0.0;
        let mut gain = 0.0;
        for k in (base - half + 1)..=(base + half) {
            let tau = t - k as f64;
            let h = windowed_sinc(tau, cutoff, half as f64);
            gain += h;
            if k >= 0 && (k as usize) < x.len() {
                acc += x[k as usize] * h;
            }
        }
        out.push(if gain.abs() > 0.0 { acc / gain } else { 0.0 });
    }
    AudioClip::new(out, target_hz)
}

fn windowed_sinc(tau: f64, cutoff: f64, half_width: f64) -> f64 {
    if tau.abs() >= half_width {
        return 0.0;
    }
    let arg = 2.0 * cutoff * tau;
    let sinc = if arg.abs() < 1e-12 {
        1.0
    } else {
        libm::sin(PI * arg) / (PI * arg)
    };
    let phase = PI * tau / half_width;
    let blackman = 0.42 + 0.5 * libm::cos(phase) + 0.08 * libm::cos(2.0 * phase);
    2.0 * cutoff * sinc * blackman
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, seconds: f64, sr: u32) -> AudioClip {
        let n = (seconds * sr as f64) as usize;
        let s = (0..n)
            .map(|i| 0.5 * libm::sin(2.0 * PI * freq * i as f64 / sr as f64))
            .collect();
        AudioClip::new(s, sr).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
            .0
    }

    #[test]
    fn hamming_small_values() {
        let w = hamming_window(3).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert!((w[2] - 0.08).abs() < 1e-12);
        let w5 = hamming_window(5).unwrap();
        assert!((w5[1] - w5[3]).abs() < 1e-15);
        assert!(hamming_window(1).is_err());
    }

    #[test]
    fn hamming_sum_matches_direct_summation() {
        // For the symmetric window the cosine terms over k = 0..n-2 cancel,
        // and k = n-1 contributes cos(2π) = 1.
        let oracle = 0.54 * 320.0 - 0.46;
        let sum: f64 = hamming_window(320).unwrap().iter().sum();
        assert!((sum - oracle).abs() < 1e-6, "{sum} vs {oracle}");
    }

    #[test]
    fn fft_matches_direct_dft() {
        let n = 16;
        let x: Vec<f64> = (0..n).map(|i| libm::sin(i as f64 * 0.7) + 0.1 * i as f64).collect();
        let radix = FftPlan::new(n).unwrap();
        let mut re = x.clone();
        let mut im = vec![0.0; n];
        radix.forward(&mut re, &mut im);
        for k in 0..n {
            let (mut sr, mut si) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * t) as f64 / n as f64;
                sr += v * libm::cos(a);
                si += v * libm::sin(a);
            }
            assert!((re[k] - sr).abs() < 1e-9 && (im[k] - si).abs() < 1e-9);
        }
        // non power of two goes through the direct path
        let odd = FftPlan::new(12).unwrap();
        let mut re = vec![1.0; 12];
        let mut im = vec![0.0; 12];
        odd.forward(&mut re, &mut im);
        assert!((re[0] - 12.0).abs() < 1e-9);
        assert!(re[1..].iter().chain(&im).all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn parseval_rectangular() {
        let n = 256;
        let x: Vec<f64> = (0..n).map(|i| libm::cos(i as f64 * 0.31) * (1.0 + (i % 7) as f64)).collect();
        let plan = FftPlan::new(n).unwrap();
        let mut re = x.clone();
        let mut im = vec![0.0; n];
        plan.forward(&mut re, &mut im);
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>() / n as f64;
        assert!(((time - freq) / time).abs() < 1e-6);
    }

    #[test]
    fn silence_spectrogram_is_floor() {
        let clip = AudioClip::new(vec![0.0; 8000], 8000).unwrap();
        let s = log_spectrogram(&clip, 0.04, 0.02, 1024).unwrap();
        let floor = libm::log(LOG_FLOOR);
        assert!(s.frames().flatten().all(|&v| v == floor));
    }

    #[test]
    fn tone_argmax_bin_and_frame_count() {
        let clip = tone(400.0, 1.0, 8000);
        let s = log_spectrogram(&clip, 0.04, 0.02, 1024).unwrap();
        assert_eq!(s.n_bins(), 513);
        assert!((s.bin_hz() - 7.8125).abs() < 1e-12);
        for t in 0..s.n_frames() {
            assert_eq!(argmax(s.frame(t)), 51);
        }
        let two = AudioClip::new(vec![0.0; 16000], 8000).unwrap();
        assert_eq!(log_spectrogram(&two, 0.04, 0.02, 1024).unwrap().n_frames(), 99);
    }

    #[test]
    fn spectrogram_errors() {
        let short = AudioClip::new(vec![0.0; 100], 8000).unwrap();
        assert!(matches!(
            log_spectrogram(&short, 0.04, 0.02, 1024),
            Err(Error::EmptyInput(_))
        ));
        let clip = AudioClip::new(vec![0.0; 8000], 8000).unwrap();
        assert!(matches!(
            log_spectrogram(&clip, 0.04, 0.02, 256),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spectrogram_deterministic() {
        let clip = tone(313.0, 0.5, 16000);
        let a = log_spectrogram(&clip, 0.04, 0.01, 1024).unwrap();
        let b = log_spectrogram(&clip, 0.04, 0.01, 1024).unwrap();
        assert!(a.frames().flatten().zip(b.frames().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rejects_unknown_rates() {
        assert!(AudioClip::new(vec![0.0], 11025).is_err());
    }

    #[test]
    fn resample_identity_and_upsampling() {
        let clip = tone(440.0, 0.1, 8000);
        assert_eq!(resample(&clip, 8000).unwrap(), clip);
        assert!(matches!(resample(&clip, 16000), Err(Error::Unsupported(_))));
    }

    #[test]
    fn resample_keeps_tone_frequency() {
        let clip = tone(1000.0, 1.0, 44100);
        let down = resample(&clip, 8000).unwrap();
        assert!((down.len() as i64 - 8000).abs() <= 1);
        let before = log_spectrogram(&clip, 0.04, 0.02, 2048).unwrap();
        let after = log_spectrogram(&down, 0.04, 0.02, 1024).unwrap();
        let hz_before = argmax(before.frame(10)) as f64 * before.bin_hz();
        let hz_after = argmax(after.frame(10)) as f64 * after.bin_hz();
        assert!((hz_before - 1000.0).abs() <= before.bin_hz());
        assert!((hz_after - 1000.0).abs() <= after.bin_hz());
    }

    #[test]
    fn resample_attenuates_above_cutoff() {
        // 5 kHz is above the 3.6 kHz cutoff for an 8 kHz target.
        let clip = tone(5000.0, 0.5, 16000);
        let down = resample(&clip, 8000).unwrap();
        let rms = libm::sqrt(down.samples()[100..3900].iter().map(|v| v * v).sum::<f64>() / 3800.0);
        assert!(rms < 0.01, "rms {rms}");
    }
}
