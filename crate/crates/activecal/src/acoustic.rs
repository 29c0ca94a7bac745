//! Multichannel signal synthesis and SRP-PHAT direction-of-arrival
//! estimation.
//!
//! Synthesis uses a far-field plane-wave model: each channel is the same
//! periodic chirp, fractionally delayed per the theoretical pair TDOAs.
//! Delays are applied as frequency-domain phase shifts, which is exact
//! for the periodic frame. Estimation steers the PHAT-normalized cross
//! power of every microphone pair over a uniform angle grid and picks the
//! maximum.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;

use nalgebra::Vector2;

use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;

/// Spectral bins with raw cross-power magnitude below this are skipped in
/// the PHAT sum.
const PHAT_MAG_FLOOR: f64 = 1e-12;

/// Microphone positions in the array frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub mic_offsets: Vec<Vector2<f64>>,
}

impl ArrayGeometry {
    pub fn new(mic_offsets: Vec<Vector2<f64>>) -> Result<Self> {
        let distinct = mic_offsets
            .iter()
            .any(|a| (a - mic_offsets[0]).norm() > 1e-12);
        if mic_offsets.len() < 2 || !distinct {
            return Err(Error::Acoustic(
                "geometry needs at least two distinct microphones".into(),
            ));
        }
        Ok(ArrayGeometry { mic_offsets })
    }

    /// Uniform circular array with microphone 0 on the +x axis.
    pub fn circular(n: usize, radius: f64) -> Result<Self> {
        let offsets = (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Vector2::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        Self::new(offsets)
    }

    pub fn n_mics(&self) -> usize {
        self.mic_offsets.len()
    }
}

/// One frame of synchronized multichannel samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelFrame {
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl MultichannelFrame {
    pub fn new(sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate <= 0.0 {
            return Err(Error::Acoustic("sample rate must be positive".into()));
        }
        if channels.is_empty() || channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(Error::Acoustic("channels must have equal lengths".into()));
        }
        Ok(MultichannelFrame {
            sample_rate,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels[0].is_empty()
    }
}

/// Periodic linear chirp parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpSpec {
    pub f0: f64,
    pub f1: f64,
    /// Sweep period, seconds.
    pub period: f64,
}

impl Default for ChirpSpec {
    fn default() -> Self {
        ChirpSpec {
            f0: 3000.0,
            f1: 5000.0,
            period: 0.128,
        }
    }
}

/// Theoretical far-field TDOA of microphone pair `(m, n)` for a plane
/// wave arriving from `alpha`: the projection of the offset difference
/// onto the arrival direction over the speed of sound.
pub fn tdoa_theoretical(
    geometry: &ArrayGeometry,
    m: usize,
    n: usize,
    alpha: f64,
) -> Result<f64> {
    if m == n || m >= geometry.n_mics() || n >= geometry.n_mics() {
        return Err(Error::Acoustic(format!("invalid microphone pair ({m}, {n})")));
    }
    let u = Vector2::new(alpha.cos(), alpha.sin());
    Ok((geometry.mic_offsets[m] - geometry.mic_offsets[n]).dot(&u) / SPEED_OF_SOUND)
}

/// Synthesize one frame of the chirp as heard by every microphone for a
/// source at bearing `source_alpha`, at `snr_db` (infinite for
/// noise-free). The frame length is two chirp periods.
pub fn synthesize(
    geometry: &ArrayGeometry,
    source_alpha: f64,
    chirp: &ChirpSpec,
    fs: f64,
    snr_db: f64,
    rng: &mut impl Rng,
) -> Result<MultichannelFrame> {
    if fs <= 2.0 * chirp.f1 {
        return Err(Error::Acoustic(format!(
            "sample rate {} Hz aliases a {} Hz chirp",
            fs, chirp.f1
        )));
    }
    let n = (2.0 * chirp.period * fs).round() as usize;
    let rate = (chirp.f1 - chirp.f0) / chirp.period;
    let base: Vec<f64> = (0..n)
        .map(|i| {
            let tau = (i as f64 / fs).rem_euclid(chirp.period);
            (2.0 * std::f64::consts::PI * (chirp.f0 * tau + 0.5 * rate * tau * tau)).sin()
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex<f64>> =
        base.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut spectrum);

    let u = Vector2::new(source_alpha.cos(), source_alpha.sin());
    let rms = (base.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let noise_std = if snr_db.is_finite() {
        rms / 10.0_f64.powf(snr_db / 20.0)
    } else {
        0.0
    };

    let mut channels = Vec::with_capacity(geometry.n_mics());
    for offset in &geometry.mic_offsets {
        // Microphones closer to the source (larger projection onto the
        // arrival direction) hear the wavefront earlier.
        let delay = -offset.dot(&u) / SPEED_OF_SOUND;
        let mut shifted = spectrum.clone();
        for (k, bin) in shifted.iter_mut().enumerate() {
            let f = if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            } * fs
                / n as f64;
            *bin *= Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * f * delay);
        }
        ifft.process(&mut shifted);
        let mut samples: Vec<f64> = shifted.iter().map(|c| c.re / n as f64).collect();
        if noise_std > 0.0 {
            for s in &mut samples {
                let e: f64 = StandardNormal.sample(rng);
                *s += noise_std * e;
            }
        }
        channels.push(samples);
    }
    MultichannelFrame::new(fs, channels)
}

/// PHAT-normalized cross spectra for every microphone pair.
pub struct CrossSpectra {
    pub pairs: Vec<(usize, usize)>,
    /// Frequency of each retained bin, Hz.
    pub freqs: Vec<f64>,
    /// `data[pair][bin]`, unit-magnitude where retained, zero where the
    /// raw magnitude was below the floor.
    pub data: Vec<Vec<Complex<f64>>>,
}

pub fn phat_cross_spectra(
    frame: &MultichannelFrame,
    geometry: &ArrayGeometry,
) -> Result<CrossSpectra> {
    if geometry.n_mics() != frame.channels.len() {
        return Err(Error::Acoustic(format!(
            "geometry has {} mics but frame has {} channels",
            geometry.n_mics(),
            frame.channels.len()
        )));
    }
    if frame
        .channels
        .iter()
        .all(|c| c.iter().all(|&v| v == 0.0))
    {
        return Err(Error::Acoustic(
            "all-zero frame: PHAT normalization undefined".into(),
        ));
    }
    let n = frame.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let spectra: Vec<Vec<Complex<f64>>> = frame
        .channels
        .iter()
        .map(|ch| {
            let mut buf: Vec<Complex<f64>> =
                ch.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            buf
        })
        .collect();

    let m = geometry.n_mics();
    let mut pairs = Vec::new();
    for a in 0..m - 1 {
        for b in a + 1..m {
            pairs.push((a, b));
        }
    }
    // Positive frequencies only; the steered sum is taken as a real part,
    // which accounts for the conjugate half.
    let bins: Vec<usize> = (1..n / 2).collect();
    let freqs: Vec<f64> = bins.iter().map(|&k| k as f64 * frame.sample_rate / n as f64).collect();
    let data = pairs
        .iter()
        .map(|&(a, b)| {
            bins.iter()
                .map(|&k| {
                    let cross = spectra[a][k] * spectra[b][k].conj();
                    let mag = cross.norm();
                    if mag > PHAT_MAG_FLOOR {
                        cross / mag
                    } else {
                        Complex::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    Ok(CrossSpectra { pairs, freqs, data })
}

/// Steered response power at candidate bearing `alpha`: the real part of
/// the phase-aligned PHAT cross power summed over pairs and bins.
pub fn steered_power(
    spectra: &CrossSpectra,
    geometry: &ArrayGeometry,
    alpha: f64,
) -> Result<f64> {
    let mut power = 0.0;
    for (pi, &(a, b)) in spectra.pairs.iter().enumerate() {
        let tau = tdoa_theoretical(geometry, a, b, alpha)?;
        for (bi, &f) in spectra.freqs.iter().enumerate() {
            let c = spectra.data[pi][bi];
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            power += (c * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * f * tau)).re;
        }
    }
    Ok(power)
}

/// Grid-search DOA estimate: the candidate angle maximizing the steered
/// response power. Ties break toward the smallest angle.
pub fn srp_phat(
    frame: &MultichannelFrame,
    geometry: &ArrayGeometry,
    grid_step: f64,
) -> Result<f64> {
    if !(grid_step > 0.0 && grid_step <= std::f64::consts::PI / 18.0) {
        return Err(Error::Acoustic(format!(
            "grid step {} outside (0, pi/18]",
            grid_step
        )));
    }
    let spectra = phat_cross_spectra(frame, geometry)?;
    let n_grid = (2.0 * std::f64::consts::PI / grid_step).floor() as usize;
    let mut best_alpha = f64::NAN;
    let mut best_power = f64::NEG_INFINITY;
    for k in 0..n_grid {
        let alpha = -std::f64::consts::PI + k as f64 * grid_step;
        let p = steered_power(&spectra, geometry, alpha)?;
        if p > best_power {
            best_power = p;
            best_alpha = alpha;
        }
    }
    Ok(best_alpha)
}
