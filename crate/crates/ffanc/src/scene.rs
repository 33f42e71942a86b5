//! Acoustic path sets, calibration noise fields and synthetic scenes.
//!
//! A scene is a family of [`AcousticPathSet`]s, one per headphone insertion
//! ("repetition"). Each set carries the per-direction primary paths from a
//! source to the external microphone and to the ear drum, the secondary path
//! from the loudspeaker to the drum, and the feedback path from the
//! loudspeaker back to the microphone.
//!
//! [`synthesize_scene`] builds a deterministic desk-scale stand-in for a
//! measured path database: delayed decaying-exponential kernels with a
//! head-shadow gain over azimuth, a lowpass passive-attenuation device path,
//! and per-repetition gain/delay perturbations emulating reinsertion
//! variability.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::spectral::ImpulseResponse;

/// Horizontal-plane direction of arrival, stored in millidegrees so it can
/// key ordered maps exactly. 270 degrees is ipsilateral (device side), 90
/// degrees contralateral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Doa(u32);

impl Doa {
    pub const IPSILATERAL: Doa = Doa(270_000);
    pub const CONTRALATERAL: Doa = Doa(90_000);

    /// Builds a DoA from degrees, normalized into `[0, 360)` and rounded to
    /// the nearest millidegree.
    pub fn from_degrees(deg: f64) -> Self {
        let wrapped = deg.rem_euclid(360.0);
        let milli = (wrapped * 1000.0).round() as u32 % 360_000;
        Doa(milli)
    }

    pub fn from_millidegrees(milli: u32) -> Self {
        Doa(milli % 360_000)
    }

    pub fn degrees(&self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn millidegrees(&self) -> u32 {
        self.0
    }

    /// Minimal angular separation from `other` in degrees, in `[0, 180]`.
    pub fn separation(&self, other: Doa) -> f64 {
        let diff = (self.degrees() - other.degrees()).abs();
        diff.min(360.0 - diff)
    }

    /// True when the direction lies in the closed ipsilateral half-plane
    /// (within 90 degrees of the device side).
    pub fn is_ipsilateral(&self) -> bool {
        self.separation(Doa::IPSILATERAL) <= 90.0
    }
}

impl std::fmt::Display for Doa {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}°", self.degrees())
    }
}

/// Primary paths for one direction of arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalPaths {
    /// Source to external microphone.
    pub to_mic: ImpulseResponse,
    /// Source to ear drum.
    pub to_drum: ImpulseResponse,
}

/// One measurement repetition's acoustic paths.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPathSet {
    pub repetition_id: usize,
    pub doa_paths: BTreeMap<Doa, DirectionalPaths>,
    /// Secondary path: loudspeaker to ear drum.
    pub secondary: ImpulseResponse,
    /// Feedback path: loudspeaker to external microphone.
    pub feedback: ImpulseResponse,
    pub sample_rate: f64,
}

impl AcousticPathSet {
    pub fn new(
        repetition_id: usize,
        doa_paths: BTreeMap<Doa, DirectionalPaths>,
        secondary: ImpulseResponse,
        feedback: ImpulseResponse,
    ) -> Result<Self> {
        if doa_paths.is_empty() {
            return Err(Error::InvalidConfig {
                field: "doa_paths",
                reason: "path set must cover at least one direction".into(),
            });
        }
        let sample_rate = secondary.sample_rate();
        let mut rates = vec![feedback.sample_rate()];
        for paths in doa_paths.values() {
            rates.push(paths.to_mic.sample_rate());
            rates.push(paths.to_drum.sample_rate());
        }
        if rates.iter().any(|&r| r != sample_rate) {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: "all impulse responses in a path set must share one sample rate".into(),
            });
        }
        Ok(Self {
            repetition_id,
            doa_paths,
            secondary,
            feedback,
            sample_rate,
        })
    }

    pub fn doas(&self) -> Vec<Doa> {
        self.doa_paths.keys().copied().collect()
    }

    pub fn paths_for(&self, doa: Doa) -> Result<&DirectionalPaths> {
        self.doa_paths.get(&doa).ok_or(Error::MissingDoa {
            doa_deg: doa.degrees(),
        })
    }
}

/// Kind of calibration noise field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FieldKind {
    /// Cylindrical-isotropic: uncorrelated broadband sources at every grid
    /// direction.
    Diffuse,
    /// A single free-field source at the given direction.
    SingleDoa(Doa),
}

/// A seeded broadband calibration field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFieldSpec {
    pub kind: FieldKind,
    pub duration_s: f64,
    pub sample_rate: f64,
    pub seed: u64,
    /// Linear amplitude applied to every source.
    pub level: f64,
}

impl NoiseFieldSpec {
    pub fn new(kind: FieldKind, duration_s: f64, sample_rate: f64, seed: u64) -> Self {
        Self {
            kind,
            duration_s,
            sample_rate,
            seed,
            level: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidConfig {
                field: "duration_s",
                reason: format!("must be positive, got {}", self.duration_s),
            });
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: format!("must be positive, got {}", self.sample_rate),
            });
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }
}

/// Per-source seed for direction index `index` under master seed `master`.
///
/// SplitMix64 step; stable so that per-DoA simulations can be reproduced in
/// isolation and summed to match a diffuse simulation bit-exactly.
pub fn doa_source_seed(master: u64, index: usize) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn white_noise(n: usize, seed: u64, level: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| level * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Simulates the external-microphone and ear-drum signals produced by a
/// calibration field incident on one path set.
///
/// Convolutions are full linear convolutions truncated to the requested
/// duration. Diffuse fields superpose independent per-direction sources in
/// ascending DoA order, each seeded by [`doa_source_seed`].
pub fn simulate_incident(
    paths: &AcousticPathSet,
    field: &NoiseFieldSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    field.validate()?;
    if field.sample_rate != paths.sample_rate {
        return Err(Error::InvalidConfig {
            field: "sample_rate",
            reason: format!(
                "field rate {} Hz does not match path set rate {} Hz",
                field.sample_rate, paths.sample_rate
            ),
        });
    }
    let n = field.samples();
    match field.kind {
        FieldKind::SingleDoa(doa) => {
            let dir = paths.paths_for(doa)?;
            let source = white_noise(n, field.seed, field.level);
            Ok((
                convolve_truncated(dir.to_mic.samples(), &source, n),
                convolve_truncated(dir.to_drum.samples(), &source, n),
            ))
        }
        FieldKind::Diffuse => {
            let mut mic = vec![0.0; n];
            let mut drum = vec![0.0; n];
            for (index, dir) in paths.doa_paths.values().enumerate() {
                let source = white_noise(n, doa_source_seed(field.seed, index), field.level);
                accumulate(&mut mic, &convolve_truncated(dir.to_mic.samples(), &source, n));
                accumulate(
                    &mut drum,
                    &convolve_truncated(dir.to_drum.samples(), &source, n),
                );
            }
            Ok((mic, drum))
        }
    }
}

fn convolve_truncated(kernel: &[f64], signal: &[f64], n: usize) -> Vec<f64> {
    let mut out = dsp::convolve_full(kernel, signal);
    out.truncate(n);
    out.resize(n, 0.0);
    out
}

fn accumulate(acc: &mut [f64], add: &[f64]) {
    for (a, b) in acc.iter_mut().zip(add.iter()) {
        *a += b;
    }
}

/// Parameters of the synthetic scene generator. Delays are in samples at
/// `sample_rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub sample_rate: f64,
    pub doa_resolution_deg: f64,
    pub repetitions: usize,
    pub seed: u64,

    /// Base source-to-microphone arrival delay.
    pub mic_delay: usize,
    /// Extra arrival delay at the contralateral pole.
    pub contra_extra_delay: usize,
    pub mic_kernel_len: usize,
    pub mic_kernel_decay: f64,
    /// Head-shadow attenuation at the contralateral pole, in dB.
    pub max_shadow_db: f64,

    /// Propagation delay from the microphone position to the ear drum.
    pub device_delay: usize,
    /// Additional device delay at the ipsilateral pole, shrinking to zero at
    /// the contralateral pole; this makes the mic-to-drum transfer
    /// direction-dependent.
    pub device_delay_spread: usize,
    pub device_kernel_len: usize,
    /// Cutoff of the passive-attenuation lowpass, Hz.
    pub device_cutoff_hz: f64,
    /// Broadband passive attenuation of the earpiece, dB (positive).
    pub passive_attenuation_db: f64,

    /// Loudspeaker-to-drum delay; must stay below `device_delay` for a
    /// usable causality margin.
    pub secondary_delay: usize,
    pub secondary_kernel_len: usize,
    pub secondary_kernel_decay: f64,
    /// Buffer length the secondary (and feedback) responses are padded to.
    pub secondary_len: usize,

    /// Feedback-path gain: `B_x` is the secondary path scaled by this factor.
    pub leakage: f64,

    /// Reinsertion gain perturbation, fraction in `[0, 1)`.
    pub gain_perturbation: f64,
    /// Reinsertion delay jitter, maximum shift in samples.
    pub delay_jitter: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        // Paper-scale geometry at 44.1 kHz.
        Self {
            sample_rate: 44_100.0,
            doa_resolution_deg: 7.5,
            repetitions: 7,
            seed: 1,
            mic_delay: 66,
            contra_extra_delay: 22,
            mic_kernel_len: 33,
            mic_kernel_decay: 0.55,
            max_shadow_db: 12.0,
            device_delay: 66,
            device_delay_spread: 17,
            device_kernel_len: 132,
            device_cutoff_hz: 1200.0,
            passive_attenuation_db: 15.0,
            secondary_delay: 17,
            secondary_kernel_len: 44,
            secondary_kernel_decay: 0.5,
            secondary_len: 712,
            leakage: 0.25,
            gain_perturbation: 0.2,
            delay_jitter: 3,
        }
    }
}

impl SceneConfig {
    /// Desk-scale preset: same geometry scaled to 16 kHz so the whole
    /// design/evaluation pipeline runs in seconds.
    pub fn fast() -> Self {
        Self {
            sample_rate: 16_000.0,
            doa_resolution_deg: 15.0,
            repetitions: 7,
            seed: 1,
            mic_delay: 24,
            contra_extra_delay: 8,
            mic_kernel_len: 12,
            mic_kernel_decay: 0.55,
            max_shadow_db: 12.0,
            device_delay: 24,
            device_delay_spread: 6,
            device_kernel_len: 48,
            device_cutoff_hz: 1200.0,
            passive_attenuation_db: 15.0,
            secondary_delay: 6,
            secondary_kernel_len: 16,
            secondary_kernel_decay: 0.5,
            secondary_len: 96,
            leakage: 0.25,
            gain_perturbation: 0.2,
            delay_jitter: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig {
                field: "repetitions",
                reason: "need at least one repetition".into(),
            });
        }
        if !(self.gain_perturbation >= 0.0 && self.gain_perturbation < 1.0) {
            return Err(Error::InvalidConfig {
                field: "gain_perturbation",
                reason: format!("must lie in [0, 1), got {}", self.gain_perturbation),
            });
        }
        if !(self.doa_resolution_deg > 0.0)
            || (360.0 / self.doa_resolution_deg).fract().abs() > 1e-9
        {
            return Err(Error::InvalidConfig {
                field: "doa_resolution_deg",
                reason: format!("must evenly divide 360, got {}", self.doa_resolution_deg),
            });
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: format!("must be positive, got {}", self.sample_rate),
            });
        }
        if self.secondary_delay == 0 {
            return Err(Error::InvalidConfig {
                field: "secondary_delay",
                reason: "must be at least one sample (no instantaneous loudspeaker paths)".into(),
            });
        }
        if self.device_delay <= self.delay_jitter {
            return Err(Error::InvalidConfig {
                field: "delay_jitter",
                reason: format!(
                    "jitter {} would push the device delay {} below zero",
                    self.delay_jitter, self.device_delay
                ),
            });
        }
        if self.secondary_delay <= self.delay_jitter {
            return Err(Error::InvalidConfig {
                field: "delay_jitter",
                reason: format!(
                    "jitter {} would push the secondary delay {} below zero",
                    self.delay_jitter, self.secondary_delay
                ),
            });
        }
        let kernel_lens = [
            self.mic_kernel_len,
            self.device_kernel_len,
            self.secondary_kernel_len,
        ];
        if kernel_lens.iter().any(|&l| l == 0) {
            return Err(Error::InvalidConfig {
                field: "kernel lengths",
                reason: "kernels need at least one tap".into(),
            });
        }
        if self.secondary_len < self.secondary_delay + self.delay_jitter + self.secondary_kernel_len
        {
            return Err(Error::InvalidConfig {
                field: "secondary_len",
                reason: "buffer too short for the configured delay, jitter and kernel".into(),
            });
        }
        Ok(())
    }

    pub fn doa_grid(&self) -> Vec<Doa> {
        let count = (360.0 / self.doa_resolution_deg).round() as usize;
        (0..count)
            .map(|i| Doa::from_degrees(i as f64 * self.doa_resolution_deg))
            .collect()
    }

    /// Fraction of head shadow at `doa`: 0 at the ipsilateral pole, 1 at the
    /// contralateral pole.
    fn shade(&self, doa: Doa) -> f64 {
        let rel = (doa.degrees() - Doa::IPSILATERAL.degrees()).to_radians();
        (1.0 - rel.cos()) / 2.0
    }
}

/// A synthesized scene plus any generator warnings.
#[derive(Debug, Clone)]
pub struct SynthesizedScene {
    pub repetitions: Vec<AcousticPathSet>,
    pub warnings: Vec<String>,
}

/// Unit-DC decaying exponential kernel.
fn decaying_kernel(len: usize, decay: f64) -> Vec<f64> {
    let mut k: Vec<f64> = (0..len).map(|j| decay.powi(j as i32)).collect();
    let dc: f64 = k.iter().sum();
    for v in &mut k {
        *v /= dc;
    }
    k
}

/// Two-pole lowpass kernel `(j+1) a^j` with unit DC gain.
fn lowpass_kernel(len: usize, cutoff_hz: f64, sample_rate: f64) -> Vec<f64> {
    let a = (-2.0 * std::f64::consts::PI * cutoff_hz / sample_rate).exp();
    let mut k: Vec<f64> = (0..len).map(|j| (j as f64 + 1.0) * a.powi(j as i32)).collect();
    let dc: f64 = k.iter().sum();
    for v in &mut k {
        *v /= dc;
    }
    k
}

fn shifted(kernel: &[f64], delay: usize, total_len: usize) -> Vec<f64> {
    let mut out = vec![0.0; total_len];
    for (j, &v) in kernel.iter().enumerate() {
        if delay + j < total_len {
            out[delay + j] = v;
        }
    }
    out
}

fn scaled(samples: &[f64], gain: f64) -> Vec<f64> {
    samples.iter().map(|&v| gain * v).collect()
}

/// Deterministically generates `repetitions` path sets from the config.
///
/// Repetition 0 is the nominal geometry; repetitions `r >= 1` perturb the
/// device and secondary paths in gain and delay to emulate reinsertion
/// variability. The primary source-to-microphone paths are left untouched.
pub fn synthesize_scene(config: &SceneConfig) -> Result<SynthesizedScene> {
    config.validate()?;
    let mut warnings = Vec::new();
    let causality_headroom =
        self::causality_headroom(config.device_delay, config.secondary_delay, config.delay_jitter);
    if causality_headroom <= 0 {
        warnings.push(format!(
            "control path (secondary delay {} + jitter {}) is not faster than the \
             disturbance path (device delay {}); broadband attenuation will be poor",
            config.secondary_delay, config.delay_jitter, config.device_delay
        ));
    }

    let fs = config.sample_rate;
    let mic_kernel = decaying_kernel(config.mic_kernel_len, config.mic_kernel_decay);
    let device_kernel = lowpass_kernel(config.device_kernel_len, config.device_cutoff_hz, fs);
    let passive_gain = 10f64.powf(-config.passive_attenuation_db / 20.0);
    let secondary_kernel =
        decaying_kernel(config.secondary_kernel_len, config.secondary_kernel_decay);

    let grid = config.doa_grid();
    let mic_len = config.mic_delay + config.contra_extra_delay + config.mic_kernel_len;

    // Direction-independent pieces of the per-DoA mic paths.
    let mut mic_paths: BTreeMap<Doa, Vec<f64>> = BTreeMap::new();
    for &doa in &grid {
        let shade = config.shade(doa);
        let gain = 10f64.powf(-config.max_shadow_db * shade / 20.0);
        let delay = config.mic_delay + (config.contra_extra_delay as f64 * shade).round() as usize;
        mic_paths.insert(doa, scaled(&shifted(&mic_kernel, delay, mic_len), gain));
    }

    let mut repetitions = Vec::with_capacity(config.repetitions);
    for r in 0..config.repetitions {
        // One perturbation draw per reinsertion, shared across directions.
        let (device_gain, device_shift, secondary_gain, secondary_shift) = if r == 0 {
            (1.0, 0isize, 1.0, 0isize)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(doa_source_seed(config.seed, 1_000_000 + r));
            let p = config.gain_perturbation;
            let j = config.delay_jitter as isize;
            let dg = 1.0 + rng.random_range(-p..=p);
            let ds = rng.random_range(-j..=j);
            let sg = 1.0 + rng.random_range(-p..=p);
            let ss = rng.random_range(-j..=j);
            (dg, ds, sg, ss)
        };

        let secondary_delay = (config.secondary_delay as isize + secondary_shift) as usize;
        let secondary = scaled(
            &shifted(&secondary_kernel, secondary_delay, config.secondary_len),
            secondary_gain,
        );
        let feedback = scaled(&secondary, config.leakage);

        let device_len = config.device_delay
            + config.device_delay_spread
            + config.delay_jitter
            + config.device_kernel_len;
        let mut doa_paths = BTreeMap::new();
        for &doa in &grid {
            let shade = config.shade(doa);
            let extra = (config.device_delay_spread as f64 * (1.0 - shade)).round() as usize;
            let delay =
                (config.device_delay as isize + extra as isize + device_shift) as usize;
            let device = scaled(
                &shifted(&device_kernel, delay, device_len),
                passive_gain * device_gain,
            );
            let to_mic = mic_paths[&doa].clone();
            let to_drum = dsp::convolve_full(&to_mic, &device);
            doa_paths.insert(
                doa,
                DirectionalPaths {
                    to_mic: ImpulseResponse::new(to_mic, fs)?,
                    to_drum: ImpulseResponse::new(to_drum, fs)?,
                },
            );
        }

        repetitions.push(AcousticPathSet::new(
            r,
            doa_paths,
            ImpulseResponse::new(secondary, fs)?,
            ImpulseResponse::new(feedback, fs)?,
        )?);
    }

    Ok(SynthesizedScene {
        repetitions,
        warnings,
    })
}

fn causality_headroom(device_delay: usize, secondary_delay: usize, jitter: usize) -> isize {
    device_delay as isize - (secondary_delay + jitter) as isize
}
