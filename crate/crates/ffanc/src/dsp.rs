//! Internal FFT helpers: linear convolution and circular cross-correlation.
//!
//! Small inputs use direct summation, large ones go through rustfft. Both
//! paths compute the same quantities; the property tests in `spectral`
//! compare them on random inputs.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Work threshold above which the FFT path is used.
const DIRECT_WORK_LIMIT: usize = 1 << 21;

pub(crate) fn fft_in_place(data: &mut [Complex64]) {
    let fft = FftPlanner::new().plan_fft_forward(data.len());
    fft.process(data);
}

pub(crate) fn ifft_in_place(data: &mut [Complex64]) {
    let fft = FftPlanner::new().plan_fft_inverse(data.len());
    fft.process(data);
}

/// Full linear convolution, output length `a.len() + b.len() - 1`.
pub(crate) fn convolve_full(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len() * b.len() <= DIRECT_WORK_LIMIT {
        let mut out = vec![0.0; out_len];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                out[i + j] += ai * bj;
            }
        }
        return out;
    }
    let m = out_len.next_power_of_two();
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(m, Complex64::ZERO);
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(m, Complex64::ZERO);
    fft_in_place(&mut fa);
    fft_in_place(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y;
    }
    ifft_in_place(&mut fa);
    let scale = 1.0 / m as f64;
    fa.truncate(out_len);
    fa.iter().map(|c| c.re * scale).collect()
}

/// Raw cross-correlation sums `r(tau) = sum_n a(n + tau) * b(n)` for
/// `tau` in `-tau_max..=tau_max`, out-of-range samples treated as zero.
/// Returned in ascending lag order. Caller divides by `N` for the biased
/// estimator.
pub(crate) fn cross_correlation_sums(a: &[f64], b: &[f64], tau_max: usize) -> Vec<f64> {
    let n = a.len();
    debug_assert_eq!(n, b.len());
    debug_assert!(tau_max < n);
    let lags = 2 * tau_max + 1;
    if n * lags <= DIRECT_WORK_LIMIT {
        let mut out = vec![0.0; lags];
        for (i, slot) in out.iter_mut().enumerate() {
            let tau = i as isize - tau_max as isize;
            let mut acc = 0.0;
            // n + tau must stay inside [0, n)
            let lo = (-tau).max(0) as usize;
            let hi = (n as isize - tau.max(0)) as usize;
            for k in lo..hi {
                acc += a[(k as isize + tau) as usize] * b[k];
            }
            *slot = acc;
        }
        return out;
    }
    // Circular correlation of zero-padded copies; padding to >= n + tau_max
    // keeps every retained lag free of wrap-around terms.
    let m = (n + tau_max).next_power_of_two();
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fa.resize(m, Complex64::ZERO);
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fb.resize(m, Complex64::ZERO);
    fft_in_place(&mut fa);
    fft_in_place(&mut fb);
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y.conj();
    }
    ifft_in_place(&mut fa);
    let scale = 1.0 / m as f64;
    let mut out = vec![0.0; lags];
    for (i, slot) in out.iter_mut().enumerate() {
        let tau = i as isize - tau_max as isize;
        let idx = tau.rem_euclid(m as isize) as usize;
        *slot = fa[idx].re * scale;
    }
    out
}
