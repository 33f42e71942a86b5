//! Power-spectral estimation on a fixed DFT grid.
//!
//! Spectra are estimated as DFTs of biased correlation sequences: the lag
//! sequence is wrapped into a circular buffer (lag 0 at index 0, negative
//! lags at the end) so that autospectra come out real and nonnegative up to
//! round-off. Signals are processed at full length, without segmentation or
//! averaging.

use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};

/// Bins with power below this fraction of the strongest bin are treated as
/// unexcited and skipped wherever a spectrum appears in a denominator.
pub const EXCITATION_FLOOR: f64 = 1e-12;

/// A sampled impulse response (dimensionless pressure gain per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl ImpulseResponse {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyImpulseResponse {
                role: "impulse response",
            });
        }
        if !samples.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "impulse response",
                reason: "contains non-finite samples".into(),
            });
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: format!("must be positive, got {sample_rate}"),
            });
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Index of the first sample with non-negligible magnitude, if any.
    pub fn onset(&self) -> Option<usize> {
        let peak = self.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if peak == 0.0 {
            return None;
        }
        self.samples.iter().position(|s| s.abs() > 1e-12 * peak)
    }

    /// Frequency response on the half grid, `len() <= L_DFT` required.
    pub fn frequency_response(&self, grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
        fir_frequency_response(&self.samples, grid)
    }
}

/// The shared DFT frequency grid: bins `k = 0..=L_DFT/2` at normalized
/// frequencies `2*pi*k/L_DFT`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    dft_length: usize,
    sample_rate: f64,
}

impl FrequencyGrid {
    pub fn new(dft_length: usize, sample_rate: f64) -> Result<Self> {
        if dft_length == 0 || dft_length % 2 != 0 {
            return Err(Error::InvalidConfig {
                field: "dft_length",
                reason: format!("must be a positive even integer, got {dft_length}"),
            });
        }
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidConfig {
                field: "sample_rate",
                reason: format!("must be positive, got {sample_rate}"),
            });
        }
        Ok(Self {
            dft_length,
            sample_rate,
        })
    }

    pub fn dft_length(&self) -> usize {
        self.dft_length
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Number of retained bins, `L_DFT/2 + 1`.
    pub fn bins(&self) -> usize {
        self.dft_length / 2 + 1
    }

    /// Normalized frequency of bin `k` in radians per sample.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.dft_length as f64
    }

    pub fn freq_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.dft_length as f64
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.sample_rate / 2.0
    }

    /// Smallest bin with `freq_hz(k) >= f`, if inside the grid.
    pub fn bin_at_or_above(&self, f: f64) -> Option<usize> {
        let k = (f * self.dft_length as f64 / self.sample_rate).ceil();
        if k < 0.0 {
            return Some(0);
        }
        let k = k as usize;
        (k < self.bins()).then_some(k)
    }

    /// Largest bin with `freq_hz(k) <= f`, if any.
    pub fn bin_at_or_below(&self, f: f64) -> Option<usize> {
        if f < 0.0 {
            return None;
        }
        let k = (f * self.dft_length as f64 / self.sample_rate).floor() as usize;
        Some(k.min(self.bins() - 1))
    }
}

/// A biased correlation sequence over the symmetric lag range
/// `-lag_max..=lag_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEstimate {
    values: Vec<f64>,
    lag_max: usize,
}

impl CorrelationEstimate {
    pub fn new(values: Vec<f64>, lag_max: usize) -> Result<Self> {
        if values.len() != 2 * lag_max + 1 {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: 2 * lag_max + 1,
            });
        }
        Ok(Self { values, lag_max })
    }

    pub fn lag_max(&self) -> usize {
        self.lag_max
    }

    /// Values in ascending lag order, index 0 holding lag `-lag_max`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at_lag(&self, tau: isize) -> f64 {
        assert!(tau.unsigned_abs() <= self.lag_max, "lag out of range");
        self.values[(tau + self.lag_max as isize) as usize]
    }

    /// Lag of the largest value.
    pub fn peak_lag(&self) -> isize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best as isize - self.lag_max as isize
    }
}

/// Auto- and cross-power spectra of one calibration record on the half grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// PSD of the external microphone (reference) signal, clamped to `>= 0`.
    pub psd_reference: Vec<f64>,
    /// CPSD between the ear-drum signal and the reference signal.
    pub cpsd_drum_reference: Vec<Complex64>,
    /// PSD of the ear-drum signal, clamped to `>= 0`.
    pub psd_drum: Vec<f64>,
    pub grid: FrequencyGrid,
    pub repetition_id: usize,
}

impl SpectralEstimate {
    /// Magnitude-squared coherence at bin `k`, clamped to `[0, 1]`.
    ///
    /// Returns 0 where either PSD sits below the excitation floor.
    pub fn coherence(&self, k: usize) -> f64 {
        let px = self.psd_reference[k];
        let pd = self.psd_drum[k];
        let x_floor = EXCITATION_FLOOR * self.max_psd_reference();
        let d_floor = EXCITATION_FLOOR * self.max_psd_drum();
        if px <= x_floor || pd <= d_floor {
            return 0.0;
        }
        (self.cpsd_drum_reference[k].norm_sqr() / (px * pd)).clamp(0.0, 1.0)
    }

    pub fn max_psd_reference(&self) -> f64 {
        self.psd_reference.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn max_psd_drum(&self) -> f64 {
        self.psd_drum.iter().fold(0.0f64, |m, &v| m.max(v))
    }

    /// Bins whose reference power clears the excitation floor.
    pub fn excited_mask(&self) -> Vec<bool> {
        let floor = EXCITATION_FLOOR * self.max_psd_reference();
        self.psd_reference.iter().map(|&p| p > floor).collect()
    }

    /// Zero-lag autocorrelation of the reference signal (its mean square),
    /// recovered from the spectrum by Parseval over the full circular grid.
    pub fn reference_mean_square(&self) -> f64 {
        let l = self.grid.dft_length();
        let half = l / 2;
        let mut acc = self.psd_reference[0] + self.psd_reference[half];
        for k in 1..half {
            acc += 2.0 * self.psd_reference[k];
        }
        acc / l as f64
    }
}

/// Biased correlation estimate `(1/N) * sum_n a(n + tau) * b(n)` over the
/// symmetric lag range `-tau_max..=tau_max`.
pub fn biased_correlation(a: &[f64], b: &[f64], tau_max: usize) -> Result<CorrelationEstimate> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if tau_max >= a.len() {
        return Err(Error::LagTooLong {
            tau_max,
            len: a.len(),
        });
    }
    let n = a.len() as f64;
    let mut values = dsp::cross_correlation_sums(a, b, tau_max);
    for v in &mut values {
        *v /= n;
    }
    CorrelationEstimate::new(values, tau_max)
}

/// DFT of a correlation sequence on the half grid.
///
/// Lag 0 lands at time index 0 and negative lags wrap to the end of the
/// `L_DFT` buffer, so autocorrelations produce real, nonnegative spectra up
/// to round-off.
pub fn correlation_to_spectrum(
    corr: &CorrelationEstimate,
    grid: &FrequencyGrid,
) -> Result<Vec<Complex64>> {
    let l = grid.dft_length();
    let lags = 2 * corr.lag_max() + 1;
    if lags > l {
        return Err(Error::CorrelationTooLong {
            lags,
            dft_length: l,
        });
    }
    let mut buf = vec![Complex64::ZERO; l];
    buf[0] = Complex64::new(corr.at_lag(0), 0.0);
    for tau in 1..=corr.lag_max() {
        buf[tau] = Complex64::new(corr.at_lag(tau as isize), 0.0);
        buf[l - tau] = Complex64::new(corr.at_lag(-(tau as isize)), 0.0);
    }
    dsp::fft_in_place(&mut buf);
    buf.truncate(grid.bins());
    Ok(buf)
}

/// Estimates the reference PSD, drum/reference CPSD and drum PSD from one
/// calibration record, with lag span `tau_max = l_s + l_w - 1`.
pub fn estimate_spectra(
    reference: &[f64],
    drum: &[f64],
    l_s: usize,
    l_w: usize,
    grid: &FrequencyGrid,
    repetition_id: usize,
) -> Result<SpectralEstimate> {
    if reference.len() != drum.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: drum.len(),
        });
    }
    let tau_max = l_s + l_w - 1;
    if reference.len() < 2 * tau_max {
        return Err(Error::SignalTooShort {
            len: reference.len(),
            min: 2 * tau_max,
        });
    }
    let rxx = biased_correlation(reference, reference, tau_max)?;
    let rdx = biased_correlation(drum, reference, tau_max)?;
    let rdd = biased_correlation(drum, drum, tau_max)?;

    let psd_reference = real_clamped(correlation_to_spectrum(&rxx, grid)?);
    let cpsd_drum_reference = correlation_to_spectrum(&rdx, grid)?;
    let psd_drum = real_clamped(correlation_to_spectrum(&rdd, grid)?);

    Ok(SpectralEstimate {
        psd_reference,
        cpsd_drum_reference,
        psd_drum,
        grid: *grid,
        repetition_id,
    })
}

/// Real parts of an autospectrum with tiny negative round-off clamped to 0.
fn real_clamped(spectrum: Vec<Complex64>) -> Vec<f64> {
    spectrum.iter().map(|c| c.re.max(0.0)).collect()
}

/// Frequency response `W(omega_k) = sum_m w[m] e^{-j omega_k m}` on the half
/// grid.
pub fn fir_frequency_response(w: &[f64], grid: &FrequencyGrid) -> Result<Vec<Complex64>> {
    let l = grid.dft_length();
    if w.len() > l {
        return Err(Error::FilterTooLong {
            taps: w.len(),
            dft_length: l,
        });
    }
    let mut buf = vec![Complex64::ZERO; l];
    for (slot, &tap) in buf.iter_mut().zip(w.iter()) {
        *slot = Complex64::new(tap, 0.0);
    }
    dsp::fft_in_place(&mut buf);
    buf.truncate(grid.bins());
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn white_noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Naive `O(bins * lags)` DFT of a lag sequence, the oracle for
    /// `correlation_to_spectrum`.
    fn direct_lag_dft(corr: &CorrelationEstimate, grid: &FrequencyGrid) -> Vec<Complex64> {
        (0..grid.bins())
            .map(|k| {
                let omega = grid.omega(k);
                let mut acc = Complex64::ZERO;
                for tau in -(corr.lag_max() as isize)..=(corr.lag_max() as isize) {
                    let phase = -omega * tau as f64;
                    acc += corr.at_lag(tau) * Complex64::new(phase.cos(), phase.sin());
                }
                acc
            })
            .collect()
    }

    #[test]
    fn impulse_autocorrelation() {
        let mut a = vec![0.0; 8];
        a[0] = 1.0;
        let corr = biased_correlation(&a, &a, 2).unwrap();
        let expected = [0.0, 0.0, 0.125, 0.0, 0.0];
        for (got, want) in corr.values().iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_signal_correlation() {
        let a = vec![1.0; 4];
        let corr = biased_correlation(&a, &a, 1).unwrap();
        let expected = [0.75, 1.0, 0.75];
        for (got, want) in corr.values().iter().zip(expected.iter()) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let a = white_noise(2048, 7);
        let corr = biased_correlation(&a, &a, 64).unwrap();
        let zero = corr.at_lag(0);
        for tau in -64..=64 {
            assert!(zero >= corr.at_lag(tau).abs() - 1e-12);
        }
        let ms = a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64;
        assert!((zero - ms).abs() < 1e-12);
    }

    #[test]
    fn correlation_errors() {
        let a = vec![0.0; 8];
        let b = vec![0.0; 7];
        assert!(matches!(
            biased_correlation(&a, &b, 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            biased_correlation(&a, &a, 8),
            Err(Error::LagTooLong { .. })
        ));
    }

    #[test]
    fn delta_correlation_yields_flat_spectrum() {
        let grid = FrequencyGrid::new(64, 1000.0).unwrap();
        let c = 3.25;
        let corr = CorrelationEstimate::new(vec![0.0, 0.0, c, 0.0, 0.0], 2).unwrap();
        let spec = correlation_to_spectrum(&corr, &grid).unwrap();
        assert_eq!(spec.len(), 33);
        for bin in &spec {
            assert!((bin.re - c).abs() < 1e-12);
            assert!(bin.im.abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_correlation_yields_real_spectrum() {
        let grid = FrequencyGrid::new(128, 1000.0).unwrap();
        let a = white_noise(512, 3);
        let corr = biased_correlation(&a, &a, 20).unwrap();
        let spec = correlation_to_spectrum(&corr, &grid).unwrap();
        let max_re = spec.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
        for bin in &spec {
            assert!(bin.im.abs() < 1e-10 * max_re);
        }
    }

    #[test]
    fn cosine_correlation_peaks_at_matching_bin() {
        let l_dft = 256;
        let grid = FrequencyGrid::new(l_dft, 1000.0).unwrap();
        let k0 = 17;
        let tau_max = 40;
        let values: Vec<f64> = (-(tau_max as isize)..=tau_max as isize)
            .map(|tau| {
                (2.0 * std::f64::consts::PI * tau as f64 * k0 as f64 / l_dft as f64).cos()
            })
            .collect();
        let corr = CorrelationEstimate::new(values, tau_max).unwrap();
        let spec = correlation_to_spectrum(&corr, &grid).unwrap();
        let oracle = direct_lag_dft(&corr, &grid);
        for (got, want) in spec.iter().zip(oracle.iter()) {
            assert!((got - want).norm() < 1e-10);
        }
        let peak = (0..spec.len())
            .max_by(|&a, &b| spec[a].re.partial_cmp(&spec[b].re).unwrap())
            .unwrap();
        assert_eq!(peak, k0);
    }

    #[test]
    fn correlation_rejected_when_longer_than_dft() {
        let grid = FrequencyGrid::new(8, 1000.0).unwrap();
        let corr = CorrelationEstimate::new(vec![0.0; 11], 5).unwrap();
        assert!(matches!(
            correlation_to_spectrum(&corr, &grid),
            Err(Error::CorrelationTooLong { .. })
        ));
    }

    #[test]
    fn identical_signals_have_unit_coherence() {
        let grid = FrequencyGrid::new(256, 8000.0).unwrap();
        let x = white_noise(4096, 11);
        let est = estimate_spectra(&x, &x, 20, 13, &grid, 0).unwrap();
        for k in 0..grid.bins() {
            assert!((est.psd_reference[k] - est.psd_drum[k]).abs() < 1e-9);
            assert!((est.cpsd_drum_reference[k].re - est.psd_reference[k]).abs() < 1e-9);
        }
        let floor = 1e-6 * est.max_psd_reference();
        for k in 0..grid.bins() {
            if est.psd_reference[k] > floor {
                assert!((est.coherence(k) - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn pure_delay_shows_linear_phase() {
        let grid = FrequencyGrid::new(512, 8000.0).unwrap();
        let delta = 9usize;
        let x = white_noise(30000, 21);
        let d: Vec<f64> = (0..x.len())
            .map(|n| if n >= delta { x[n - delta] } else { 0.0 })
            .collect();
        let est = estimate_spectra(&x, &d, 20, 13, &grid, 0).unwrap();
        // Phase of the CPSD should track e^{-j omega delta} where the grid is
        // well excited; edge truncation of the biased estimator makes this
        // approximate.
        let floor = 0.2 * est.max_psd_reference();
        let mut checked = 0;
        for k in 4..grid.bins() - 4 {
            if est.psd_reference[k] < floor {
                continue;
            }
            let expected = Complex64::from_polar(1.0, -grid.omega(k) * delta as f64);
            let got = est.cpsd_drum_reference[k] / est.psd_reference[k];
            assert!(
                (got - expected).norm() < 0.15,
                "bin {k}: {got} vs {expected}"
            );
            checked += 1;
        }
        assert!(checked > 100);
    }

    #[test]
    fn independent_signals_have_low_coherence() {
        let grid = FrequencyGrid::new(256, 8000.0).unwrap();
        let x = white_noise(60000, 100);
        let d = white_noise(60000, 200);
        let est = estimate_spectra(&x, &d, 16, 9, &grid, 0).unwrap();
        let mean: f64 =
            (0..grid.bins()).map(|k| est.coherence(k)).sum::<f64>() / grid.bins() as f64;
        assert!(mean < 0.1, "band-averaged coherence {mean}");
    }

    #[test]
    fn coherence_bounded_on_random_records() {
        let grid = FrequencyGrid::new(256, 8000.0).unwrap();
        for seed in 0..5 {
            let x = white_noise(8192, 1000 + seed);
            let noise = white_noise(8192, 2000 + seed);
            let d: Vec<f64> = x
                .iter()
                .zip(noise.iter())
                .map(|(a, b)| 0.7 * a + 0.3 * b)
                .collect();
            let est = estimate_spectra(&x, &d, 12, 9, &grid, 0).unwrap();
            let x_floor = EXCITATION_FLOOR * est.max_psd_reference();
            let d_floor = EXCITATION_FLOOR * est.max_psd_drum();
            for k in 0..grid.bins() {
                if est.psd_reference[k] > x_floor && est.psd_drum[k] > d_floor {
                    let raw = est.cpsd_drum_reference[k].norm_sqr()
                        / (est.psd_reference[k] * est.psd_drum[k]);
                    assert!(raw <= 1.0 + 1e-6, "bin {k}: coherence {raw}");
                }
            }
        }
    }

    #[test]
    fn reference_mean_square_matches_signal_power() {
        let grid = FrequencyGrid::new(512, 8000.0).unwrap();
        let x = white_noise(5000, 5);
        let est = estimate_spectra(&x, &x, 30, 21, &grid, 0).unwrap();
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!((est.reference_mean_square() - ms).abs() < 1e-9 * ms);
    }

    #[test]
    fn short_record_periodogram_identity() {
        // With N <= tau_max every lag of the biased autocorrelation is kept,
        // so the correlogram equals (1/N)|DFT(zero-padded signal)|^2 exactly.
        let grid = FrequencyGrid::new(128, 1000.0).unwrap();
        let a = white_noise(24, 9);
        let tau_max = 30;
        let corr = biased_correlation(&a, &a, tau_max).unwrap();
        let spec = correlation_to_spectrum(&corr, &grid).unwrap();
        let mut padded = vec![Complex64::ZERO; grid.dft_length()];
        for (slot, &v) in padded.iter_mut().zip(a.iter()) {
            *slot = Complex64::new(v, 0.0);
        }
        dsp::fft_in_place(&mut padded);
        let peak = padded.iter().fold(0.0f64, |m, c| m.max(c.norm_sqr()));
        for (k, bin) in spec.iter().enumerate() {
            let want = padded[k].norm_sqr() / a.len() as f64;
            assert!(
                (bin.re - want).abs() <= 1e-9 * peak / a.len() as f64,
                "bin {k}"
            );
        }
    }

    #[test]
    fn identity_filter_response() {
        let grid = FrequencyGrid::new(64, 1000.0).unwrap();
        let resp = fir_frequency_response(&[1.0], &grid).unwrap();
        for bin in &resp {
            assert!((bin - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn unit_delay_response() {
        let grid = FrequencyGrid::new(64, 1000.0).unwrap();
        let resp = fir_frequency_response(&[0.0, 1.0], &grid).unwrap();
        for (k, bin) in resp.iter().enumerate() {
            assert!((bin.norm() - 1.0).abs() < 1e-12);
            let want = Complex64::from_polar(1.0, -grid.omega(k));
            assert!((bin - want).norm() < 1e-12);
        }
    }

    #[test]
    fn long_filter_matches_direct_sum() {
        let grid = FrequencyGrid::new(8192, 44100.0).unwrap();
        let w = white_noise(512, 31);
        let resp = fir_frequency_response(&w, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let k = rng.random_range(0..grid.bins());
            let omega = grid.omega(k);
            let mut acc = Complex64::ZERO;
            for (m, &tap) in w.iter().enumerate() {
                let phase = -omega * m as f64;
                acc += tap * Complex64::new(phase.cos(), phase.sin());
            }
            assert!((resp[k] - acc).norm() < 1e-10);
        }
        assert!(matches!(
            fir_frequency_response(&vec![0.0; 8193], &grid),
            Err(Error::FilterTooLong { .. })
        ));
    }

    proptest! {
        #[test]
        fn frequency_response_is_linear(
            u in proptest::collection::vec(-1.0f64..1.0, 8),
            v in proptest::collection::vec(-1.0f64..1.0, 8),
            alpha in -4.0f64..4.0,
        ) {
            let grid = FrequencyGrid::new(32, 1000.0).unwrap();
            let combo: Vec<f64> = u.iter().zip(v.iter()).map(|(a, b)| alpha * a + b).collect();
            let ru = fir_frequency_response(&u, &grid).unwrap();
            let rv = fir_frequency_response(&v, &grid).unwrap();
            let rc = fir_frequency_response(&combo, &grid).unwrap();
            for k in 0..grid.bins() {
                let want = alpha * ru[k] + rv[k];
                prop_assert!((rc[k] - want).norm() < 1e-12);
            }
        }

        #[test]
        fn autospectra_stay_nonnegative(seed in 0u64..500) {
            let grid = FrequencyGrid::new(128, 1000.0).unwrap();
            let a = white_noise(1200, seed);
            let est = estimate_spectra(&a, &a, 10, 7, &grid, 0).unwrap();
            for k in 0..grid.bins() {
                prop_assert!(est.psd_reference[k] >= 0.0);
                prop_assert!(est.psd_drum[k] >= 0.0);
            }
        }
    }
}
