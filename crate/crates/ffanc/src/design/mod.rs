//! Stability-constrained FIR controller design.
//!
//! The controller taps `w` minimize the DFT-domain cost
//!
//! ```text
//! sum_r sum_k |T(k,r) - W(k) S(k,r) / (1 + W(k) Bx(k,r))|^2 Pxx(k,r) + beta |W(k)|^2
//! ```
//!
//! over the half grid `k = 0..=L_DFT/2`, where `T = Pdx/Pxx` is the estimated
//! mic-to-drum transfer of each calibration record, subject to the per-bin
//! open-loop constraint
//!
//! ```text
//! |W Bx|^2 - |W Bx + 2 rho|^2 < 0   <=>   Re(W(k) Bx(k, r0)) > -rho,
//! ```
//!
//! which confines the open-loop contour to the right of a vertical boundary
//! and thereby keeps it away from the Nyquist point (-1, 0). The constraint
//! is linear in `w`, so the feasible set is an intersection of half-spaces;
//! the solver runs L-BFGS on a smooth quadratic-hinge penalty with analytic
//! gradients, escalating the penalty weight until the margin holds, and
//! falls back to an exact feasibility rescale (valid because the constraint
//! is linear) if the penalty path ends marginally outside.

mod margins;
mod solver;

pub use margins::{compute_margins, StabilityReport};

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::AcousticPathSet;
use crate::spectral::{fir_frequency_response, FrequencyGrid, SpectralEstimate};

use solver::{minimize, LbfgsOptions};

/// Relative floor below which `|1 + W Bx|` counts as a closed-loop
/// singularity.
const SINGULARITY_FLOOR: f64 = 1e-12;

/// Relative floor for `|S|` in the nominal-repetition selection.
const SECONDARY_FLOOR: f64 = 1e-12;

/// Solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Absolute infinity-norm tolerance on the (penalized) gradient,
    /// relative to `max(1, |initial cost|)`.
    pub gradient_tol: f64,
    /// Penalty escalation rounds.
    pub max_outer_iterations: usize,
    /// L-BFGS iterations per round.
    pub max_inner_iterations: usize,
    /// Required slack on `Re(W Bx) + rho` at every constrained bin.
    pub feasibility_margin: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-9,
            max_outer_iterations: 15,
            max_inner_iterations: 600,
            feasibility_margin: 1e-3,
        }
    }
}

/// Controller design configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// FIR controller length `L_w`.
    pub filter_taps: usize,
    /// DFT length of the design grid.
    pub dft_length: usize,
    /// Tikhonov factor; the absolute weight is
    /// `beta_relative * phi_xx(0, r0)`.
    pub beta_relative: f64,
    /// Robustness parameter of the vertical-boundary constraint.
    pub rho: f64,
    /// Band over which the nominal repetition is selected.
    pub nominal_band_hz: (f64, f64),
    /// Repetition ids entering the cost; `None` means every provided one.
    pub repetitions_used: Option<Vec<usize>>,
    /// Constrain every repetition's feedback path instead of only the
    /// nominal one.
    pub constrain_all_repetitions: bool,
    /// Constrain every `n`-th bin (1 = all bins).
    pub constraint_decimation: usize,
    pub solver: SolverOptions,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            filter_taps: 512,
            dft_length: 8192,
            beta_relative: 0.01,
            rho: 0.8,
            nominal_band_hz: (100.0, 12_000.0),
            repetitions_used: None,
            constrain_all_repetitions: false,
            constraint_decimation: 1,
            solver: SolverOptions::default(),
        }
    }
}

impl DesignConfig {
    /// Desk-scale preset matching [`crate::scene::SceneConfig::fast`].
    pub fn fast() -> Self {
        Self {
            filter_taps: 64,
            dft_length: 1024,
            nominal_band_hz: (100.0, 6_000.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_taps == 0 {
            return Err(Error::InvalidConfig {
                field: "filter_taps",
                reason: "controller needs at least one tap".into(),
            });
        }
        if self.dft_length == 0 || self.dft_length % 2 != 0 {
            return Err(Error::InvalidConfig {
                field: "dft_length",
                reason: format!("must be a positive even integer, got {}", self.dft_length),
            });
        }
        if self.filter_taps > self.dft_length {
            return Err(Error::InvalidConfig {
                field: "filter_taps",
                reason: "controller longer than the DFT buffer".into(),
            });
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig {
                field: "rho",
                reason: format!("must lie in (0, 1), got {}", self.rho),
            });
        }
        if !(self.beta_relative >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "beta_relative",
                reason: format!("must be nonnegative, got {}", self.beta_relative),
            });
        }
        if !(self.solver.feasibility_margin > 0.0 && self.solver.feasibility_margin < self.rho) {
            return Err(Error::InvalidConfig {
                field: "solver.feasibility_margin",
                reason: format!(
                    "must lie in (0, rho), got {}",
                    self.solver.feasibility_margin
                ),
            });
        }
        if self.constraint_decimation == 0 {
            return Err(Error::InvalidConfig {
                field: "constraint_decimation",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.nominal_band_hz.0 < self.nominal_band_hz.1) {
            return Err(Error::InvalidConfig {
                field: "nominal_band_hz",
                reason: "lower edge must be below upper edge".into(),
            });
        }
        Ok(())
    }
}

/// Solver telemetry attached to a finished design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// `min_k Re(W Bx) + rho` over the constrained bins.
    pub final_constraint_margin: f64,
    /// Infinity norm of the final penalized gradient.
    pub stationarity: f64,
    /// Whether the last inner solve hit the gradient tolerance.
    pub converged: bool,
    /// Whether the returned filter improves on the initial point.
    pub improved: bool,
    /// Absolute Tikhonov weight used.
    pub beta: f64,
}

/// A designed controller with the configuration and telemetry that produced
/// it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerDesign {
    pub coefficients: Vec<f64>,
    /// Configuration with `repetitions_used` resolved to the actual ids.
    pub config: DesignConfig,
    pub nominal_repetition: usize,
    /// Cost after each accepted (improving) outer iterate; non-increasing.
    pub cost_trace: Vec<f64>,
    pub feasible: bool,
    pub diagnostics: DesignDiagnostics,
}

impl ControllerDesign {
    pub fn repetitions_used(&self) -> &[usize] {
        self.config
            .repetitions_used
            .as_deref()
            .unwrap_or_default()
    }
}

/// Picks the repetition whose secondary path generates the least restrictive
/// multiplicative uncertainty over the band: the candidate `c` minimizing
/// `max_{k in band} max_{r != c} |S(k,r) - S(k,c)| / |S(k,c)|`.
///
/// A single repetition is returned as-is; exact ties resolve to the lowest
/// repetition id.
pub fn select_nominal_repetition(
    paths: &[&AcousticPathSet],
    grid: &FrequencyGrid,
    band_hz: (f64, f64),
) -> Result<usize> {
    if paths.is_empty() {
        return Err(Error::InvalidConfig {
            field: "paths",
            reason: "need at least one repetition".into(),
        });
    }
    if paths.len() == 1 {
        return Ok(paths[0].repetition_id);
    }
    if band_hz.1 > grid.nyquist_hz() + 1e-9 {
        return Err(Error::InvalidConfig {
            field: "nominal_band_hz",
            reason: format!(
                "upper edge {} Hz beyond Nyquist {} Hz",
                band_hz.1,
                grid.nyquist_hz()
            ),
        });
    }
    let k_lo = grid.bin_at_or_above(band_hz.0).ok_or(Error::EmptyBand {
        f_low_hz: band_hz.0,
        f_high_hz: band_hz.1,
    })?;
    let k_hi = grid.bin_at_or_below(band_hz.1).ok_or(Error::EmptyBand {
        f_low_hz: band_hz.0,
        f_high_hz: band_hz.1,
    })?;
    if k_lo > k_hi {
        return Err(Error::EmptyBand {
            f_low_hz: band_hz.0,
            f_high_hz: band_hz.1,
        });
    }

    let responses: Vec<Vec<Complex64>> = paths
        .iter()
        .map(|p| p.secondary.frequency_response(grid))
        .collect::<Result<_>>()?;

    let mut sorted: Vec<usize> = (0..paths.len()).collect();
    sorted.sort_by_key(|&i| paths[i].repetition_id);

    let mut best: Option<(f64, usize)> = None;
    for &c in &sorted {
        let s_c = &responses[c];
        let peak = s_c.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let floor = SECONDARY_FLOOR * peak;
        let mut worst = 0.0f64;
        for k in k_lo..=k_hi {
            let mag_c = s_c[k].norm();
            if mag_c <= floor {
                return Err(Error::SecondaryPathFloor {
                    freq_hz: grid.freq_hz(k),
                    repetition: paths[c].repetition_id,
                });
            }
            for (r, s_r) in responses.iter().enumerate() {
                if r == c {
                    continue;
                }
                worst = worst.max((s_r[k] - s_c[k]).norm() / mag_c);
            }
        }
        if best.map_or(true, |(l, _)| worst < l) {
            best = Some((worst, paths[c].repetition_id));
        }
    }
    Ok(best.expect("non-empty candidate list").1)
}

/// Per-bin stability constraint values `c_k = |W Bx|^2 - |W Bx + 2 rho|^2`.
///
/// Feasibility means `c_k < 0` at every bin, which is algebraically
/// equivalent to `Re(W Bx) > -rho`.
pub fn stability_constraint(w: &[f64], bx_nominal: &[Complex64], rho: f64) -> Vec<f64> {
    assert!(bx_nominal.len() >= 2, "need at least two bins");
    assert!(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
    let l = 2 * (bx_nominal.len() - 1);
    assert!(w.len() <= l, "filter longer than the implied DFT buffer");
    let response = half_grid_response(w, l);
    response
        .iter()
        .zip(bx_nominal.iter())
        .map(|(wk, bk)| {
            let v = wk * bk;
            v.norm_sqr() - (v + Complex64::new(2.0 * rho, 0.0)).norm_sqr()
        })
        .collect()
}

fn half_grid_response(w: &[f64], dft_length: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::ZERO; dft_length];
    for (slot, &tap) in buf.iter_mut().zip(w.iter()) {
        *slot = Complex64::new(tap, 0.0);
    }
    crate::dsp::fft_in_place(&mut buf);
    buf.truncate(dft_length / 2 + 1);
    buf
}

struct RepetitionData {
    repetition_id: usize,
    /// Estimated target transfer `Pdx / Pxx`, zero at unexcited bins.
    target: Vec<Complex64>,
    /// Reference PSD weights.
    weight: Vec<f64>,
    excited: Vec<bool>,
    secondary: Vec<Complex64>,
    feedback: Vec<Complex64>,
}

/// Precomputed cost, gradient and constraint evaluations for one design
/// instance. All methods are pure.
pub struct DesignProblem {
    grid: FrequencyGrid,
    filter_taps: usize,
    rho: f64,
    beta: f64,
    reps: Vec<RepetitionData>,
    nominal_repetition: usize,
    /// Feedback responses whose open loop is constrained (the nominal one,
    /// or all of them in strict mode).
    constrained: Vec<Vec<Complex64>>,
    decimation: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl DesignProblem {
    pub fn new(
        spectra: &[SpectralEstimate],
        paths: &[AcousticPathSet],
        config: &DesignConfig,
    ) -> Result<Self> {
        config.validate()?;
        if spectra.is_empty() {
            return Err(Error::InvalidConfig {
                field: "spectra",
                reason: "need at least one repetition".into(),
            });
        }
        let grid = spectra[0].grid;
        if grid.dft_length() != config.dft_length {
            return Err(Error::InvalidConfig {
                field: "dft_length",
                reason: format!(
                    "config says {}, spectra carry {}",
                    config.dft_length,
                    grid.dft_length()
                ),
            });
        }
        let mut used: Vec<usize> = match &config.repetitions_used {
            Some(ids) => ids.clone(),
            None => spectra.iter().map(|s| s.repetition_id).collect(),
        };
        used.sort_unstable();
        used.dedup();
        if used.is_empty() {
            return Err(Error::InvalidConfig {
                field: "repetitions_used",
                reason: "no repetitions selected".into(),
            });
        }

        let find_spectra = |id: usize| {
            spectra
                .iter()
                .find(|s| s.repetition_id == id)
                .ok_or(Error::MissingRepetition(id))
        };
        let find_paths = |id: usize| {
            paths
                .iter()
                .find(|p| p.repetition_id == id)
                .ok_or(Error::MissingRepetition(id))
        };

        let used_paths: Vec<&AcousticPathSet> =
            used.iter().map(|&id| find_paths(id)).collect::<Result<_>>()?;
        let nominal_repetition =
            select_nominal_repetition(&used_paths, &grid, config.nominal_band_hz)?;

        let mut reps = Vec::with_capacity(used.len());
        for &id in &used {
            let est = find_spectra(id)?;
            if est.grid != grid {
                return Err(Error::InvalidConfig {
                    field: "spectra",
                    reason: "all spectral estimates must share one grid".into(),
                });
            }
            let set = find_paths(id)?;
            let excited = est.excited_mask();
            let target: Vec<Complex64> = (0..grid.bins())
                .map(|k| {
                    if excited[k] {
                        est.cpsd_drum_reference[k] / est.psd_reference[k]
                    } else {
                        Complex64::ZERO
                    }
                })
                .collect();
            reps.push(RepetitionData {
                repetition_id: id,
                target,
                weight: est.psd_reference.clone(),
                excited,
                secondary: set.secondary.frequency_response(&grid)?,
                feedback: set.feedback.frequency_response(&grid)?,
            });
        }

        let beta = config.beta_relative * find_spectra(nominal_repetition)?.reference_mean_square();

        let constrained: Vec<Vec<Complex64>> = if config.constrain_all_repetitions {
            reps.iter().map(|r| r.feedback.clone()).collect()
        } else {
            vec![reps
                .iter()
                .find(|r| r.repetition_id == nominal_repetition)
                .expect("nominal repetition is one of the used ids")
                .feedback
                .clone()]
        };

        let mut planner = FftPlanner::new();
        Ok(Self {
            grid,
            filter_taps: config.filter_taps,
            rho: config.rho,
            beta,
            reps,
            nominal_repetition,
            constrained,
            decimation: config.constraint_decimation,
            fft: planner.plan_fft_forward(config.dft_length),
            ifft: planner.plan_fft_inverse(config.dft_length),
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn filter_taps(&self) -> usize {
        self.filter_taps
    }

    pub fn nominal_repetition(&self) -> usize {
        self.nominal_repetition
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Overrides the Tikhonov weight computed from the nominal repetition.
    pub fn set_beta(&mut self, beta: f64) {
        self.beta = beta;
    }

    pub fn repetitions_used(&self) -> Vec<usize> {
        self.reps.iter().map(|r| r.repetition_id).collect()
    }

    fn response(&self, w: &[f64]) -> Vec<Complex64> {
        let l = self.grid.dft_length();
        let mut buf = vec![Complex64::ZERO; l];
        for (slot, &tap) in buf.iter_mut().zip(w.iter()) {
            *slot = Complex64::new(tap, 0.0);
        }
        self.fft.process(&mut buf);
        buf.truncate(self.grid.bins());
        buf
    }

    /// The design cost. Returns `f64::INFINITY` (never NaN) when the closed
    /// loop is singular at some excited bin.
    pub fn cost(&self, w: &[f64]) -> f64 {
        let response = self.response(w);
        let mut total = 0.0;
        for rep in &self.reps {
            for k in 0..self.grid.bins() {
                let wk = response[k];
                if rep.excited[k] {
                    let den = Complex64::new(1.0, 0.0) + wk * rep.feedback[k];
                    if den.norm() < SINGULARITY_FLOOR {
                        return f64::INFINITY;
                    }
                    let err = rep.target[k] - wk * rep.secondary[k] / den;
                    total += rep.weight[k] * err.norm_sqr();
                }
                total += self.beta * wk.norm_sqr();
            }
        }
        total
    }

    /// Analytic cost gradient. Errors at a closed-loop singularity.
    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        let response = self.response(w);
        let mut spectral_grad = vec![Complex64::ZERO; self.grid.bins()];
        self.accumulate_cost_gradient(&response, &mut spectral_grad)?;
        Ok(self.assemble_gradient(&spectral_grad))
    }

    /// Adds the cost's spectral gradient factors `G_k` (defined by
    /// `dJ/dw_m = 2 Re sum_k G_k e^{-j omega_k m}`) into `out`.
    fn accumulate_cost_gradient(
        &self,
        response: &[Complex64],
        out: &mut [Complex64],
    ) -> Result<()> {
        let n_reps = self.reps.len() as f64;
        for rep in &self.reps {
            for k in 0..self.grid.bins() {
                let wk = response[k];
                if rep.excited[k] {
                    let den = Complex64::new(1.0, 0.0) + wk * rep.feedback[k];
                    if den.norm() < SINGULARITY_FLOOR {
                        return Err(Error::ClosedLoopSingular {
                            bin: k,
                            freq_hz: self.grid.freq_hz(k),
                        });
                    }
                    let err = rep.target[k] - wk * rep.secondary[k] / den;
                    // d err / d W = -S / (1 + W Bx)^2
                    out[k] -= rep.weight[k] * err.conj() * rep.secondary[k] / (den * den);
                }
            }
        }
        for (k, slot) in out.iter_mut().enumerate() {
            *slot += n_reps * self.beta * response[k].conj();
        }
        Ok(())
    }

    /// Converts spectral gradient factors into tap space:
    /// `grad_m = 2 Re sum_{k=0}^{L/2} G_k e^{-j omega_k m}`, evaluated for
    /// all taps at once through one inverse FFT.
    fn assemble_gradient(&self, spectral: &[Complex64]) -> Vec<f64> {
        let l = self.grid.dft_length();
        let mut buf = vec![Complex64::ZERO; l];
        for (slot, g) in buf.iter_mut().zip(spectral.iter()) {
            *slot = g.conj();
        }
        self.ifft.process(&mut buf);
        buf[..self.filter_taps].iter().map(|c| 2.0 * c.re).collect()
    }

    fn constrained_bins(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.grid.bins()).step_by(self.decimation)
    }

    /// Smallest `Re(W Bx) + rho` over the constrained bins.
    pub fn min_constraint_margin(&self, w: &[f64]) -> f64 {
        let response = self.response(w);
        let mut min = f64::INFINITY;
        for feedback in &self.constrained {
            for k in self.constrained_bins() {
                min = min.min((response[k] * feedback[k]).re + self.rho);
            }
        }
        min
    }

    /// Penalized objective and gradient:
    /// `J(w) + mu * sum max(0, 2*eps - margin)^2`.
    fn penalized_value_grad(&self, w: &[f64], mu: f64, eps: f64, grad: &mut Vec<f64>) -> f64 {
        let response = self.response(w);
        let mut spectral_grad = vec![Complex64::ZERO; self.grid.bins()];
        let mut value = match self.accumulate_cost_gradient(&response, &mut spectral_grad) {
            Ok(()) => {
                let mut total = 0.0;
                for rep in &self.reps {
                    for k in 0..self.grid.bins() {
                        let wk = response[k];
                        if rep.excited[k] {
                            let den = Complex64::new(1.0, 0.0) + wk * rep.feedback[k];
                            let err = rep.target[k] - wk * rep.secondary[k] / den;
                            total += rep.weight[k] * err.norm_sqr();
                        }
                        total += self.beta * wk.norm_sqr();
                    }
                }
                total
            }
            Err(_) => {
                grad.clear();
                grad.resize(self.filter_taps, 0.0);
                return f64::INFINITY;
            }
        };

        let threshold = 2.0 * eps;
        for feedback in &self.constrained {
            for k in self.constrained_bins() {
                let margin = (response[k] * feedback[k]).re + self.rho;
                let short = threshold - margin;
                if short > 0.0 {
                    value += mu * short * short;
                    // d margin / d w_m = Re(Bx_k e^{-j omega_k m})
                    spectral_grad[k] -= mu * short * feedback[k];
                }
            }
        }
        *grad = self.assemble_gradient(&spectral_grad);
        value
    }

    /// Largest downscale of `w` that restores the feasibility margin; exact
    /// because the constraint is linear in `w`.
    fn scale_to_feasible(&self, w: &[f64], eps: f64) -> Vec<f64> {
        let response = self.response(w);
        let mut alpha = 1.0f64;
        for feedback in &self.constrained {
            for k in self.constrained_bins() {
                let re = (response[k] * feedback[k]).re;
                if re < 0.0 {
                    alpha = alpha.min((self.rho - eps) / (-re));
                }
            }
        }
        let alpha = alpha.max(0.0) * (1.0 - 1e-12);
        w.iter().map(|&v| alpha * v).collect()
    }
}

/// The design cost of `w` for the given calibration spectra and paths;
/// `f64::INFINITY` marks a singular closed loop.
pub fn cost(
    w: &[f64],
    spectra: &[SpectralEstimate],
    paths: &[AcousticPathSet],
    config: &DesignConfig,
) -> Result<f64> {
    Ok(DesignProblem::new(spectra, paths, config)?.cost(w))
}

/// Analytic gradient of [`cost`] with respect to the taps.
pub fn cost_gradient(
    w: &[f64],
    spectra: &[SpectralEstimate],
    paths: &[AcousticPathSet],
    config: &DesignConfig,
) -> Result<Vec<f64>> {
    DesignProblem::new(spectra, paths, config)?.gradient(w)
}

/// Designs a controller by penalized L-BFGS descent from `w_init` (or the
/// always-feasible zero filter).
///
/// The returned design is feasible with margin at least
/// `solver.feasibility_margin` on every constrained bin and never costs more
/// than the starting point.
pub fn optimize(
    spectra: &[SpectralEstimate],
    paths: &[AcousticPathSet],
    config: &DesignConfig,
    w_init: Option<&[f64]>,
) -> Result<ControllerDesign> {
    let problem = DesignProblem::new(spectra, paths, config)?;
    let taps = problem.filter_taps();
    let eps = config.solver.feasibility_margin;

    let zero = vec![0.0; taps];
    let cost_zero = problem.cost(&zero);

    let mut incumbent = zero.clone();
    let mut incumbent_cost = cost_zero;
    if let Some(init) = w_init {
        if init.len() != taps {
            return Err(Error::InvalidConfig {
                field: "w_init",
                reason: format!("expected {taps} taps, got {}", init.len()),
            });
        }
        let mut start = init.to_vec();
        if problem.min_constraint_margin(&start) < eps {
            start = problem.scale_to_feasible(&start, eps);
        }
        let start_cost = problem.cost(&start);
        if start_cost.is_finite() && start_cost < incumbent_cost {
            incumbent = start;
            incumbent_cost = start_cost;
        }
    }

    let baseline_cost = incumbent_cost;
    let mut trace = vec![incumbent_cost];

    let mut mu = 10.0 * (incumbent_cost.abs() + 1e-9) / (config.rho * config.rho);
    let mut x = incumbent.clone();
    let mut inner_total = 0;
    let mut outer_done = 0;
    let mut stationarity = f64::NAN;
    let mut converged = false;

    let lbfgs_opts = LbfgsOptions {
        memory: 10,
        max_iterations: config.solver.max_inner_iterations,
        gradient_tol: config.solver.gradient_tol * incumbent_cost.abs().max(1.0),
    };

    for outer in 0..config.solver.max_outer_iterations {
        let outcome = minimize(
            |w, grad| problem.penalized_value_grad(w, mu, eps, grad),
            x,
            &lbfgs_opts,
        );
        inner_total += outcome.iterations;
        stationarity = outcome.grad_inf_norm;
        x = outcome.x;
        outer_done = outer + 1;

        let margin = problem.min_constraint_margin(&x);
        let candidate = if margin >= eps {
            x.clone()
        } else {
            problem.scale_to_feasible(&x, eps)
        };
        let candidate_cost = problem.cost(&candidate);
        if candidate_cost.is_finite() && candidate_cost < incumbent_cost {
            incumbent = candidate;
            incumbent_cost = candidate_cost;
            trace.push(incumbent_cost);
        }

        if margin >= eps && outcome.converged {
            converged = true;
            break;
        }
        mu *= 10.0;
    }

    let final_margin = problem.min_constraint_margin(&incumbent);
    let improved = incumbent_cost < baseline_cost;
    let mut resolved = config.clone();
    resolved.repetitions_used = Some(problem.repetitions_used());

    Ok(ControllerDesign {
        coefficients: incumbent,
        config: resolved,
        nominal_repetition: problem.nominal_repetition(),
        cost_trace: trace,
        feasible: final_margin >= eps - 1e-12,
        diagnostics: DesignDiagnostics {
            inner_iterations: inner_total,
            outer_iterations: outer_done,
            final_constraint_margin: final_margin,
            stationarity,
            converged,
            improved,
            beta: problem.beta(),
        },
    })
}

#[cfg(test)]
mod tests;
