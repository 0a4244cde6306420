//! Cutting under platform motion: sinusoidal disturbance estimation, the
//! three synchronization controllers (open-loop, full, intermittent), and a
//! Monte-Carlo error budget for estimation noise and latency.
//!
//! Lengths are millimetres (the scale cutting accuracy lives at; the
//! platform's 2.5 cm disturbance is 25 mm here) and times are seconds.
//! Tracking error is measured in the gauze frame: the difference between
//! where the scissors are relative to the moving gauze and where the plan
//! wants them. Error statistics accumulate only while the scissors move —
//! a holding robot does not degrade the cut.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::parallel::map_indexed;
use crate::seeds;

/// The time-to-distance scale of the normalized error budget: the published
/// analysis states its phase-noise figure under a unit-slope assumption
/// (d/dt = 1) that maps the 0.22 s phase RMSE to ≈ 1 mm, i.e. 1 mm per
/// 0.22 s. The physical slope A·2πf is reported alongside; the two are
/// deliberately not reconciled.
pub const UNIT_SLOPE_MM_PER_S: f64 = 1.0 / 0.22;

/// Default intermittent actuation window, seconds.
pub const DEFAULT_WINDOW_S: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub enum SyncError {
    InsufficientData { samples: usize },
    ZeroAmplitude,
    FitNonConvergence,
    InvalidParam { name: &'static str, value: f64 },
    UnboundedWindow,
}

impl fmt::Display for SyncError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyncError::InsufficientData { samples } => write!(
                f,
                "need at least 2 periods sampled at 8+ samples/period, got {samples} samples"
            ),
            SyncError::ZeroAmplitude => {
                write!(f, "samples are constant: sinusoid amplitude unidentifiable")
            }
            SyncError::FitNonConvergence => write!(f, "sinusoid fit did not converge"),
            SyncError::InvalidParam { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            SyncError::UnboundedWindow => {
                write!(f, "zero curvature at the optimum: window width unbounded")
            }
        }
    }
}

impl std::error::Error for SyncError {}

/// A single-axis sinusoidal disturbance C(t) = A·sin(2πf(t + φ)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub amplitude_mm: f64,
    pub freq_hz: f64,
    pub phase_s: f64,
}

impl Wave {
    pub fn value(&self, t_s: f64) -> f64 {
        self.amplitude_mm
            * (2.0 * std::f64::consts::PI * self.freq_hz * (t_s + self.phase_s)).sin()
    }

    /// Position extrema (velocity zeros) t_k = (0.25 + 0.5k)/f − φ within
    /// [t0, t1], ascending.
    pub fn extrema_in(&self, t0: f64, t1: f64) -> Vec<f64> {
        let f = self.freq_hz;
        let k_min = ((t0 + self.phase_s) * f * 2.0 - 0.5).floor() as i64;
        let k_max = ((t1 + self.phase_s) * f * 2.0 - 0.5).ceil() as i64;
        let mut out = Vec::new();
        for k in k_min..=k_max {
            let t = (0.25 + 0.5 * k as f64) / f - self.phase_s;
            if t >= t0 && t <= t1 {
                out.push(t);
            }
        }
        out
    }
}

/// Disturbance plus the estimator/actuation noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceModel {
    pub wave: Wave,
    /// Relative frequency RMSE of the estimator (3 % for the tracked
    /// platform).
    pub sigma_freq_rel: f64,
    /// Phase RMSE, seconds (0.22 s for the tracked platform).
    pub sigma_phase_s: f64,
    /// Deterministic command latency, seconds.
    pub latency_mean_s: f64,
    /// Uniform latency jitter spread, seconds (command arrives at mean +
    /// U[0, jitter]; the observed spread is 0.576 s).
    pub latency_jitter_s: f64,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        DisturbanceModel {
            wave: Wave { amplitude_mm: 25.0, freq_hz: 0.2, phase_s: 0.0 },
            sigma_freq_rel: 0.03,
            sigma_phase_s: 0.22,
            latency_mean_s: 0.0,
            latency_jitter_s: 0.576,
        }
    }
}

/// Controller choice for cutting under motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControllerKind {
    /// Cut along the fixed trajectory, ignoring the disturbance.
    OpenLoop,
    /// Subtract the estimated disturbance from the commanded motion.
    FullSync,
    /// Move only inside windows of the given width centred on the estimated
    /// position extrema, holding (and pausing the cut) otherwise.
    Intermittent { window_s: f64 },
}

impl ControllerKind {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::OpenLoop => "open_loop",
            ControllerKind::FullSync => "full_sync",
            ControllerKind::Intermittent { .. } => "intermittent",
        }
    }
}

/// Sinusoid fit result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidFit {
    pub amplitude_mm: f64,
    pub freq_hz: f64,
    /// Phase normalized into [0, 1/f).
    pub phase_s: f64,
    /// Constant offset absorbed by the fit (the disturbance model itself is
    /// zero-mean).
    pub offset_mm: f64,
    pub rmse_mm: f64,
}

impl SinusoidFit {
    pub fn wave(&self) -> Wave {
        Wave { amplitude_mm: self.amplitude_mm, freq_hz: self.freq_hz, phase_s: self.phase_s }
    }
}

/// Least-squares residual of a 3-parameter linear fit (sin, cos, offset) at
/// fixed frequency; None when the normal equations are singular.
fn linear_fit_at(samples: &[(f64, f64)], freq_hz: f64) -> Option<(f64, f64, f64, f64)> {
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(t, y) in samples {
        let row = Vector3::new((omega * t).sin(), (omega * t).cos(), 1.0);
        ata += row * row.transpose();
        atb += row * y;
    }
    let sol = ata.lu().solve(&atb)?;
    let (a, b, c) = (sol[0], sol[1], sol[2]);
    let mut ssr = 0.0;
    for &(t, y) in samples {
        let model = a * (omega * t).sin() + b * (omega * t).cos() + c;
        ssr += (y - model) * (y - model);
    }
    Some((a, b, c, (ssr / samples.len() as f64).sqrt()))
}

/// Fit A·sin(2πf(t+φ)) + offset to (t, value) samples: coarse frequency scan
/// at resolution 1/(8·span) over every frequency with ≥ 2 periods in the
/// data and ≥ 8 samples per period, then golden-section refinement of the
/// best cell. Rejects constant data and fits whose best frequency violates
/// the data-coverage preconditions.
pub fn fit_sinusoid(samples: &[(f64, f64)]) -> Result<SinusoidFit, SyncError> {
    let n = samples.len();
    if n < 16 {
        return Err(SyncError::InsufficientData { samples: n });
    }
    let t0 = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t1 = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let span = t1 - t0;
    if !(span > 0.0) {
        return Err(SyncError::InsufficientData { samples: n });
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        (lo.min(s.1), hi.max(s.1))
    });
    if hi - lo <= 0.0 {
        return Err(SyncError::ZeroAmplitude);
    }
    let rate = (n as f64 - 1.0) / span;
    let f_lo = 2.0 / span;
    let f_hi = rate / 8.0;
    if f_lo > f_hi {
        return Err(SyncError::InsufficientData { samples: n });
    }
    let df = 1.0 / (8.0 * span);
    let mut best: Option<(f64, f64)> = None; // (rmse, freq)
    let mut f = f_lo;
    while f <= f_hi + 1e-15 {
        if let Some((_, _, _, rmse)) = linear_fit_at(samples, f) {
            if best.map_or(true, |(b, _)| rmse < b) {
                best = Some((rmse, f));
            }
        }
        f += df;
    }
    let Some((_, f_coarse)) = best else {
        return Err(SyncError::FitNonConvergence);
    };
    // Golden-section refinement on rmse(f) around the winning cell.
    let golden = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut a = (f_coarse - df).max(f_lo * 0.5);
    let mut b = f_coarse + df;
    let eval = |f: f64| linear_fit_at(samples, f).map_or(f64::INFINITY, |r| r.3);
    let mut x1 = b - golden * (b - a);
    let mut x2 = a + golden * (b - a);
    let (mut f1, mut f2) = (eval(x1), eval(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - golden * (b - a);
            f1 = eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + golden * (b - a);
            f2 = eval(x2);
        }
    }
    let f_best = 0.5 * (a + b);
    let Some((sa, cb, offset, rmse)) = linear_fit_at(samples, f_best) else {
        return Err(SyncError::FitNonConvergence);
    };
    let amplitude = (sa * sa + cb * cb).sqrt();
    if amplitude <= 1e-9 * (hi - lo) {
        return Err(SyncError::ZeroAmplitude);
    }
    // Post-validate the recovered frequency against the data coverage.
    if span * f_best < 2.0 - 1e-9 || rate < 8.0 * f_best - 1e-9 {
        return Err(SyncError::InsufficientData { samples: n });
    }
    // a·sin(ωt) + b·cos(ωt) = A·sin(ω(t+φ)) with a = A·cos(ωφ), b = A·sin(ωφ).
    let phase = cb.atan2(sa) / (2.0 * std::f64::consts::PI * f_best);
    let period = 1.0 / f_best;
    Ok(SinusoidFit {
        amplitude_mm: amplitude,
        freq_hz: f_best,
        phase_s: phase.rem_euclid(period),
        offset_mm: offset,
        rmse_mm: rmse,
    })
}

/// Execution horizon and the commanded cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecuteConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    /// Cut length to complete, mm (infinite = run the full horizon).
    pub progress_len_mm: f64,
    /// Cutting speed while moving, mm/s.
    pub speed_mm_s: f64,
}

impl Default for ExecuteConfig {
    fn default() -> Self {
        ExecuteConfig { duration_s: 30.0, dt_s: 0.005, progress_len_mm: 100.0, speed_mm_s: 10.0 }
    }
}

/// One controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRow {
    pub t_s: f64,
    pub moving: bool,
    pub progress_mm: f64,
    pub error_mm: f64,
}

/// Full execution trace plus summary statistics over the moving rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingTrace {
    pub rows: Vec<TrackRow>,
    pub completed_at_s: Option<f64>,
    pub max_error_mm: f64,
    pub rms_error_mm: f64,
}

impl TrackingTrace {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "t_s,moving,progress_mm,error_mm")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.t_s, u8::from(r.moving), r.progress_mm, r.error_mm)?;
        }
        Ok(())
    }
}

/// Run one controller against the true disturbance using the estimate.
/// Tracking error in the gauze frame per step:
/// open-loop |C(t)|; full sync |Ĉ(t−ℓ) − C(t)| (correction computed from the
/// estimate at the latency-delayed time); intermittent |Ĉ(t̂_k) − C(t)|
/// inside window k (the robot synchronizes to the estimated extremum
/// position and holds that correction), 0 while holding. The cut progresses
/// only while moving; intermittent motion is gated to the windows.
pub fn execute(
    controller: &ControllerKind,
    cfg: &ExecuteConfig,
    truth: &Wave,
    estimate: &Wave,
    latency_s: f64,
) -> Result<TrackingTrace, SyncError> {
    if !(cfg.dt_s > 0.0) || !cfg.dt_s.is_finite() {
        return Err(SyncError::InvalidParam { name: "dt_s", value: cfg.dt_s });
    }
    if !(cfg.duration_s > 0.0) || !cfg.duration_s.is_finite() {
        return Err(SyncError::InvalidParam { name: "duration_s", value: cfg.duration_s });
    }
    if !(cfg.speed_mm_s > 0.0) {
        return Err(SyncError::InvalidParam { name: "speed_mm_s", value: cfg.speed_mm_s });
    }
    if let ControllerKind::Intermittent { window_s } = controller {
        if !(*window_s > 0.0) || !window_s.is_finite() {
            return Err(SyncError::InvalidParam { name: "window_s", value: *window_s });
        }
    }

    // Precompute estimated-extrema windows.
    let windows: Vec<(f64, f64)> = match controller {
        ControllerKind::Intermittent { window_s } => estimate
            .extrema_in(-window_s / 2.0, cfg.duration_s + window_s / 2.0)
            .into_iter()
            .map(|t| (t - window_s / 2.0, t))
            .collect(),
        _ => Vec::new(),
    };
    let window_anchor = |t: f64| -> Option<f64> {
        match controller {
            ControllerKind::Intermittent { window_s } => windows
                .iter()
                .find(|(start, _)| t >= *start && t <= *start + *window_s)
                .map(|(_, anchor)| *anchor),
            _ => None,
        }
    };

    let steps = (cfg.duration_s / cfg.dt_s).round() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut progress = 0.0f64;
    let mut completed_at = None;
    let mut sum_sq = 0.0f64;
    let mut moving_rows = 0usize;
    let mut max_error = 0.0f64;
    for k in 0..=steps {
        let t = k as f64 * cfg.dt_s;
        let incomplete = completed_at.is_none();
        let (moving, error) = match controller {
            ControllerKind::OpenLoop => (incomplete, truth.value(t).abs()),
            ControllerKind::FullSync => {
                (incomplete, (estimate.value(t - latency_s) - truth.value(t)).abs())
            }
            ControllerKind::Intermittent { .. } => match window_anchor(t) {
                Some(anchor) if incomplete => {
                    (true, (estimate.value(anchor) - truth.value(t)).abs())
                }
                _ => (false, 0.0),
            },
        };
        let error = if moving { error } else { 0.0 };
        if moving {
            progress += cfg.speed_mm_s * cfg.dt_s;
            sum_sq += error * error;
            moving_rows += 1;
            max_error = max_error.max(error);
            if progress >= cfg.progress_len_mm {
                completed_at = Some(t);
            }
        }
        rows.push(TrackRow { t_s: t, moving, progress_mm: progress, error_mm: error });
    }
    let rms = if moving_rows > 0 { (sum_sq / moving_rows as f64).sqrt() } else { 0.0 };
    Ok(TrackingTrace {
        rows,
        completed_at_s: completed_at,
        max_error_mm: max_error,
        rms_error_mm: rms,
    })
}

/// Analytic worst-case bounds slope·(σ_φ [+ jitter]) at the normalized unit
/// slope (1 mm per 0.22 s) and at the physical slope A·2πf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticBounds {
    pub unit_slope_phase_mm: f64,
    pub unit_slope_total_mm: f64,
    pub physical_phase_mm: f64,
    pub physical_total_mm: f64,
}

/// Per-trial and pooled Monte-Carlo error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudgetReport {
    pub controller: ControllerKind,
    pub per_trial: Vec<TrialStats>,
    /// Pooled RMS over all moving rows of all trials.
    pub rms_mm: f64,
    pub worst_mm: f64,
    pub analytic: AnalyticBounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStats {
    pub trial: usize,
    pub rms_mm: f64,
    pub worst_mm: f64,
}

impl ErrorBudgetReport {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "trial,controller,rms_mm,worst_mm")?;
        for t in &self.per_trial {
            writeln!(w, "{},{},{},{}", t.trial, self.controller.name(), t.rms_mm, t.worst_mm)?;
        }
        Ok(())
    }
}

/// Draw a zero-mean normal deviate, treating σ ≤ 0 as exactly zero (the
/// zero-noise model must produce zero errors, not a sampler panic).
fn draw_normal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
    } else {
        0.0
    }
}

fn draw_uniform<R: Rng>(rng: &mut R, width: f64) -> f64 {
    if width > 0.0 {
        rng.gen_range(0.0..width)
    } else {
        0.0
    }
}

/// Monte-Carlo error budget: per trial, draw (f̂, φ̂, latency) from the noise
/// model, execute the controller with that estimate against the true wave,
/// and pool the per-step tracking errors. Trials use independent named
/// substreams of `seed` and run concurrently; results are independent of the
/// worker count.
pub fn error_budget(
    model: &DisturbanceModel,
    controller: &ControllerKind,
    trials: usize,
    seed: u64,
    cfg: &ExecuteConfig,
    threads: usize,
) -> Result<ErrorBudgetReport, SyncError> {
    if trials == 0 {
        return Err(SyncError::InvalidParam { name: "trials", value: 0.0 });
    }
    for (name, value) in [
        ("sigma_freq_rel", model.sigma_freq_rel),
        ("sigma_phase_s", model.sigma_phase_s),
        ("latency_jitter_s", model.latency_jitter_s),
    ] {
        if value < 0.0 || !value.is_finite() {
            return Err(SyncError::InvalidParam { name, value });
        }
    }
    let indices: Vec<usize> = (0..trials).collect();
    let results = map_indexed(&indices, threads.max(1), |_, &trial| {
        let mut rng = seeds::stream_rng(seed, &format!("budget-trial-{trial}"));
        let freq = model.wave.freq_hz * (1.0 + draw_normal(&mut rng, model.sigma_freq_rel));
        let phase = model.wave.phase_s + draw_normal(&mut rng, model.sigma_phase_s);
        let latency = model.latency_mean_s + draw_uniform(&mut rng, model.latency_jitter_s);
        let estimate = Wave { amplitude_mm: model.wave.amplitude_mm, freq_hz: freq, phase_s: phase };
        execute(controller, cfg, &model.wave, &estimate, latency).map(|trace| {
            let moving = trace.rows.iter().filter(|r| r.moving).count();
            (trace.rms_error_mm, trace.max_error_mm, moving)
        })
    });
    let mut per_trial = Vec::with_capacity(trials);
    let mut pooled_sq = 0.0f64;
    let mut pooled_rows = 0usize;
    let mut worst = 0.0f64;
    for (trial, r) in results.into_iter().enumerate() {
        let (rms, max, moving) = r?;
        per_trial.push(TrialStats { trial, rms_mm: rms, worst_mm: max });
        pooled_sq += rms * rms * moving as f64;
        pooled_rows += moving;
        worst = worst.max(max);
    }
    let slope_physical =
        model.wave.amplitude_mm * 2.0 * std::f64::consts::PI * model.wave.freq_hz;
    let spread = model.sigma_phase_s + model.latency_jitter_s;
    Ok(ErrorBudgetReport {
        controller: *controller,
        per_trial,
        rms_mm: if pooled_rows > 0 { (pooled_sq / pooled_rows as f64).sqrt() } else { 0.0 },
        worst_mm: worst,
        analytic: AnalyticBounds {
            unit_slope_phase_mm: UNIT_SLOPE_MM_PER_S * model.sigma_phase_s,
            unit_slope_total_mm: UNIT_SLOPE_MM_PER_S * spread,
            physical_phase_mm: slope_physical * model.sigma_phase_s,
            physical_total_mm: slope_physical * spread,
        },
    })
}

/// Intermittent window width from the curvature at the optimum: the
/// parabolic approximation C(t) ≈ C(t*) − ½|C″|(t−t*)² stays within
/// `tolerance` for |t−t*| ≤ √(2·tol/|C″|), giving a full width of
/// 2·√(2·tol/|C″|) with |C″| = A·(2πf)² at the extrema.
pub fn window_width_from_curvature(
    estimate: &Wave,
    tolerance_mm: f64,
) -> Result<f64, SyncError> {
    if !(tolerance_mm > 0.0) || !tolerance_mm.is_finite() {
        return Err(SyncError::InvalidParam { name: "tolerance_mm", value: tolerance_mm });
    }
    let curvature = estimate.amplitude_mm
        * (2.0 * std::f64::consts::PI * estimate.freq_hz).powi(2);
    if !(curvature > 0.0) {
        return Err(SyncError::UnboundedWindow);
    }
    Ok(2.0 * (2.0 * tolerance_mm / curvature).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const RIG_WAVE: Wave = Wave { amplitude_mm: 25.0, freq_hz: 0.2, phase_s: 0.0 };

    fn sample_wave(wave: &Wave, rate_hz: f64, duration_s: f64) -> Vec<(f64, f64)> {
        let n = (rate_hz * duration_s) as usize;
        (0..n).map(|i| (i as f64 / rate_hz, wave.value(i as f64 / rate_hz))).collect()
    }

    #[test]
    fn fit_recovers_noiseless_parameters() {
        let truth = Wave { amplitude_mm: 2.5, freq_hz: 0.2, phase_s: 0.3 };
        let fit = fit_sinusoid(&sample_wave(&truth, 15.0, 60.0)).unwrap();
        assert!((fit.amplitude_mm - 2.5).abs() < 1e-6, "A = {}", fit.amplitude_mm);
        assert!((fit.freq_hz - 0.2).abs() < 1e-6, "f = {}", fit.freq_hz);
        assert!((fit.phase_s - 0.3).abs() < 1e-6, "phase = {}", fit.phase_s);
        assert!(fit.rmse_mm < 1e-6);
        assert!(fit.offset_mm.abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_constant_samples() {
        let flat: Vec<(f64, f64)> = (0..600).map(|i| (i as f64 / 10.0, 1.5)).collect();
        assert_eq!(fit_sinusoid(&flat), Err(SyncError::ZeroAmplitude));
    }

    #[test]
    fn fit_rejects_too_little_data() {
        let truth = RIG_WAVE;
        // Too few samples outright.
        let short = sample_wave(&truth, 15.0, 2.5);
        assert!(matches!(
            fit_sinusoid(&short[..4]),
            Err(SyncError::InsufficientData { samples: 4 })
        ));
        // 16 samples spread over 60 s: no frequency offers both two periods
        // of span coverage and eight samples per period.
        let sparse: Vec<(f64, f64)> =
            (0..16).map(|i| (i as f64 * 4.0, truth.value(i as f64 * 4.0))).collect();
        assert!(matches!(
            fit_sinusoid(&sparse),
            Err(SyncError::InsufficientData { samples: 16 })
        ));
    }

    #[test]
    fn fit_survives_noise() {
        // 5 % amplitude noise: recovered frequency within 1 % relative.
        let truth = Wave { amplitude_mm: 2.0, freq_hz: 0.25, phase_s: 1.1 };
        let mut worst_rel = 0.0f64;
        for trial in 0..20 {
            let mut rng = seeds::stream_rng(88, &format!("fit-noise-{trial}"));
            let noisy: Vec<(f64, f64)> = sample_wave(&truth, 15.0, 60.0)
                .into_iter()
                .map(|(t, y)| (t, y + draw_normal(&mut rng, 0.05 * truth.amplitude_mm)))
                .collect();
            let fit = fit_sinusoid(&noisy).unwrap();
            worst_rel = worst_rel.max((fit.freq_hz - truth.freq_hz).abs() / truth.freq_hz);
        }
        assert!(worst_rel < 0.01, "worst relative frequency error {worst_rel}");
    }

    #[test]
    fn open_loop_error_is_the_disturbance() {
        let cfg = ExecuteConfig {
            duration_s: 10.0,
            dt_s: 0.001,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let trace =
            execute(&ControllerKind::OpenLoop, &cfg, &RIG_WAVE, &RIG_WAVE, 0.0).unwrap();
        assert_relative_eq!(trace.max_error_mm, 25.0, epsilon = 1e-3);
        assert!(trace.completed_at_s.is_none());
    }

    #[test]
    fn full_sync_with_perfect_estimate_cancels() {
        let cfg = ExecuteConfig::default();
        let trace =
            execute(&ControllerKind::FullSync, &cfg, &RIG_WAVE, &RIG_WAVE, 0.0).unwrap();
        assert!(trace.max_error_mm < 1e-9, "max error {}", trace.max_error_mm);
    }

    #[test]
    fn intermittent_respects_cosine_bound() {
        let cfg = ExecuteConfig {
            duration_s: 30.0,
            dt_s: 0.001,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let controller = ControllerKind::Intermittent { window_s: 0.25 };
        let trace = execute(&controller, &cfg, &RIG_WAVE, &RIG_WAVE, 0.0).unwrap();
        let bound = 25.0
            * (1.0 - (2.0 * std::f64::consts::PI * 0.2 * 0.125).cos());
        assert!(bound <= 0.31, "analytic bound {bound}");
        assert!(
            trace.max_error_mm <= bound * 1.05,
            "max {} vs bound {}",
            trace.max_error_mm,
            bound
        );
        // The robot did move (windows exist) but not constantly.
        let moving = trace.rows.iter().filter(|r| r.moving).count();
        assert!(moving > 0);
        assert!(moving < trace.rows.len() / 2);
    }

    #[test]
    fn intermittent_is_slower_than_open_loop() {
        let cfg = ExecuteConfig {
            duration_s: 120.0,
            dt_s: 0.002,
            progress_len_mm: 50.0,
            speed_mm_s: 10.0,
        };
        let open =
            execute(&ControllerKind::OpenLoop, &cfg, &RIG_WAVE, &RIG_WAVE, 0.0).unwrap();
        let gated = execute(
            &ControllerKind::Intermittent { window_s: 0.25 },
            &cfg,
            &RIG_WAVE,
            &RIG_WAVE,
            0.0,
        )
        .unwrap();
        let t_open = open.completed_at_s.expect("open loop finishes");
        let t_gated = gated.completed_at_s.expect("gated run finishes in 120 s");
        assert!(
            t_gated > t_open * 2.0,
            "open {t_open} s vs intermittent {t_gated} s"
        );
    }

    #[test]
    fn zero_noise_budget_is_exactly_zero() {
        let model = DisturbanceModel {
            sigma_freq_rel: 0.0,
            sigma_phase_s: 0.0,
            latency_mean_s: 0.0,
            latency_jitter_s: 0.0,
            ..DisturbanceModel::default()
        };
        let cfg = ExecuteConfig {
            duration_s: 10.0,
            dt_s: 0.01,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let report =
            error_budget(&model, &ControllerKind::FullSync, 8, 42, &cfg, 2).unwrap();
        assert_eq!(report.rms_mm, 0.0);
        assert_eq!(report.worst_mm, 0.0);
        for t in &report.per_trial {
            assert_eq!(t.worst_mm, 0.0);
        }
    }

    #[test]
    fn budget_reports_unit_slope_figures() {
        let model = DisturbanceModel::default();
        let cfg = ExecuteConfig {
            duration_s: 5.0,
            dt_s: 0.05,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let report =
            error_budget(&model, &ControllerKind::FullSync, 2, 1, &cfg, 1).unwrap();
        assert_relative_eq!(report.analytic.unit_slope_phase_mm, 1.0, epsilon = 1e-12);
        assert!(report.analytic.unit_slope_total_mm > 3.0);
        assert_relative_eq!(
            report.analytic.physical_phase_mm,
            25.0 * 2.0 * std::f64::consts::PI * 0.2 * 0.22,
            epsilon = 1e-9
        );
    }

    #[test]
    fn budget_is_deterministic_and_thread_independent() {
        let model = DisturbanceModel::default();
        let cfg = ExecuteConfig {
            duration_s: 5.0,
            dt_s: 0.02,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let a = error_budget(&model, &ControllerKind::FullSync, 6, 7, &cfg, 1).unwrap();
        let b = error_budget(&model, &ControllerKind::FullSync, 6, 7, &cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_error_grows_with_noise() {
        // Monotone ordering over nested noise levels (phase noise only, so
        // the comparison is clean).
        let cfg = ExecuteConfig {
            duration_s: 10.0,
            dt_s: 0.02,
            progress_len_mm: f64::INFINITY,
            speed_mm_s: 10.0,
        };
        let rms_at = |sigma_phase: f64, jitter: f64| {
            let model = DisturbanceModel {
                sigma_freq_rel: 0.0,
                sigma_phase_s: sigma_phase,
                latency_mean_s: 0.0,
                latency_jitter_s: jitter,
                ..DisturbanceModel::default()
            };
            error_budget(&model, &ControllerKind::FullSync, 24, 3, &cfg, 2)
                .unwrap()
                .rms_mm
        };
        let quiet = rms_at(0.02, 0.0);
        let louder = rms_at(0.1, 0.0);
        let loudest = rms_at(0.22, 0.0);
        assert!(quiet < louder && louder < loudest, "{quiet} {louder} {loudest}");
        let with_latency = rms_at(0.22, 0.576);
        assert!(with_latency > loudest);
    }

    #[test]
    fn window_width_matches_plugin_arithmetic() {
        let w = window_width_from_curvature(&RIG_WAVE, 0.5).unwrap();
        // 2·√(2·0.5 / (25·(0.4π)²)) ≈ 0.3183 s.
        assert_relative_eq!(w, 0.3183, epsilon = 2e-4);
        // Doubling the frequency halves the window.
        let double = Wave { freq_hz: 0.4, ..RIG_WAVE };
        let w2 = window_width_from_curvature(&double, 0.5).unwrap();
        assert_relative_eq!(w2, w / 2.0, epsilon = 1e-12);
        // Tolerance → 0 drives the window to 0.
        let tiny = window_width_from_curvature(&RIG_WAVE, 1e-12).unwrap();
        assert!(tiny < 1e-5);
    }

    #[test]
    fn window_width_rejects_flat_curvature() {
        let flat = Wave { amplitude_mm: 0.0, ..RIG_WAVE };
        assert_eq!(window_width_from_curvature(&flat, 0.5), Err(SyncError::UnboundedWindow));
        assert!(matches!(
            window_width_from_curvature(&RIG_WAVE, 0.0),
            Err(SyncError::InvalidParam { .. })
        ));
    }

    #[test]
    fn extrema_enumeration_brackets_range() {
        let wave = Wave { amplitude_mm: 1.0, freq_hz: 0.5, phase_s: 0.1 };
        let ext = wave.extrema_in(0.0, 4.0);
        // Extrema every 1 s starting at 0.5/0.5−0.1 ... = 0.4, 1.4, 2.4, 3.4.
        assert_eq!(ext.len(), 4);
        for (i, t) in ext.iter().enumerate() {
            assert_relative_eq!(*t, 0.4 + i as f64, epsilon = 1e-12);
            let v = wave.value(*t).abs();
            assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        }
    }
}
