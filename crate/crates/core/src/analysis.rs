//! Decay-law fitting for simulated trajectories: exponential and algebraic
//! rate fits in transformed coordinates, model selection per regime, and the
//! monotonicity / differential-comparison checks on the composite value.

use crate::error::{Error, Result};
use crate::model::RegimeTag;
use serde::{Deserialize, Serialize};

pub const MIN_FIT_SAMPLES: usize = 10;

/// Samples below this fraction of the series maximum are treated as numeric
/// floor and dropped before fitting. The floor sits well above f64 epsilon
/// because the Laplacian term of the distance amplifies rounding noise by
/// 4/h² per axis: at 256 cells on a unit interval that turns state noise of
/// order 1e-16 into a distance floor near 1e-9 relative to an 1e-2 peak.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// d(t) = K1ε · e^(−K2 t)
    Exponential,
    /// d(t) = 1 / (1/(K1ε) + K2 t)
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Amplitude: K1ε for the exponential law, K1ε of the reciprocal
    /// intercept for the algebraic law.
    pub k1: f64,
    /// Rate, in inverse time.
    pub k2: f64,
    /// RMS misfit in transformed coordinates divided by the transformed
    /// range.
    pub residual: f64,
    pub window: (f64, f64),
}

fn affine_lsq(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut sse = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let e = y - (intercept + slope * x);
        sse += e * e;
    }
    let rms = (sse / n).sqrt();
    (slope, intercept, rms)
}

fn check_series(series: &[(f64, f64)]) -> Result<()> {
    if series.len() < MIN_FIT_SAMPLES {
        return Err(Error::NotApplicable(format!(
            "rate fit needs at least {MIN_FIT_SAMPLES} samples, got {}",
            series.len()
        )));
    }
    if series.iter().any(|&(_, d)| !(d > 0.0)) {
        return Err(Error::NotApplicable(
            "rate fit requires strictly positive distances".into(),
        ));
    }
    Ok(())
}

fn transformed_range(ys: &[f64]) -> f64 {
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Affine least squares of log d against t; the fit is rejected unless the
/// recovered rate is positive.
pub fn fit_exponential(series: &[(f64, f64)]) -> Result<RateFit> {
    check_series(series)?;
    let xs: Vec<f64> = series.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = series.iter().map(|&(_, d)| d.ln()).collect();
    let (slope, intercept, rms) = affine_lsq(&xs, &ys);
    let k2 = -slope;
    if !(k2 > 0.0) {
        return Err(Error::NotApplicable(format!(
            "exponential fit needs a positive decay rate, got {k2}"
        )));
    }
    let range = transformed_range(&ys);
    Ok(RateFit {
        model: RateModel::Exponential,
        k1: intercept.exp(),
        k2,
        residual: if range > 0.0 { rms / range } else { 0.0 },
        window: (xs[0], *xs.last().unwrap()),
    })
}

/// Affine least squares of 1/d against t.
pub fn fit_algebraic(series: &[(f64, f64)]) -> Result<RateFit> {
    check_series(series)?;
    let xs: Vec<f64> = series.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = series.iter().map(|&(_, d)| 1.0 / d).collect();
    let (slope, intercept, rms) = affine_lsq(&xs, &ys);
    let k2 = slope;
    if !(k2 > 0.0) {
        return Err(Error::NotApplicable(format!(
            "algebraic fit needs a positive decay rate, got {k2}"
        )));
    }
    let range = transformed_range(&ys);
    Ok(RateFit {
        model: RateModel::Algebraic,
        k1: 1.0 / intercept,
        k2,
        residual: if range > 0.0 { rms / range } else { 0.0 },
        window: (xs[0], *xs.last().unwrap()),
    })
}

/// Outcome of fitting both decay laws on the tail window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSelection {
    pub exponential: Option<RateFit>,
    pub algebraic: Option<RateFit>,
    pub winner: RateModel,
    pub predicted: RateModel,
    pub matches_prediction: bool,
}

/// The decay law the stability theory predicts for the regime.
pub fn predicted_model(regime: RegimeTag) -> RateModel {
    match regime {
        RegimeTag::DegenerateExclusionH2 => RateModel::Algebraic,
        _ => RateModel::Exponential,
    }
}

/// Tail window: the last 80% of samples, after dropping a trailing stretch
/// that has fallen to the numeric floor.
pub fn tail_window(series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let peak = series.iter().map(|&(_, d)| d).fold(0.0, f64::max);
    let floor = RELATIVE_FLOOR * peak;
    let mut trimmed: &[(f64, f64)] = series;
    while let Some((_, d)) = trimmed.last() {
        if *d < floor && trimmed.len() > MIN_FIT_SAMPLES {
            trimmed = &trimmed[..trimmed.len() - 1];
        } else {
            break;
        }
    }
    let skip = trimmed.len() / 5;
    trimmed[skip..].to_vec()
}

/// Fits both laws on the tail window and picks the smaller residual. A
/// mismatch with the regime's predicted law is reported, never raised.
pub fn select_rate_model(
    series: &[(f64, f64)],
    regime: RegimeTag,
) -> Result<ModelSelection> {
    let tail = tail_window(series);
    let exponential = fit_exponential(&tail).ok();
    let algebraic = fit_algebraic(&tail).ok();
    let winner = match (&exponential, &algebraic) {
        (Some(e), Some(a)) => {
            if e.residual <= a.residual {
                RateModel::Exponential
            } else {
                RateModel::Algebraic
            }
        }
        (Some(_), None) => RateModel::Exponential,
        (None, Some(_)) => RateModel::Algebraic,
        (None, None) => {
            return Err(Error::NotApplicable(
                "neither decay law admits a fit on the tail window".into(),
            ))
        }
    };
    let predicted = predicted_model(regime);
    Ok(ModelSelection {
        exponential,
        algebraic,
        winner,
        predicted,
        matches_prediction: winner == predicted,
    })
}

/// Result of the monotone-decay scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub passed: bool,
    /// Index of the first sample rising above tolerance, when any.
    pub first_violation: Option<usize>,
    /// Largest observed rise between consecutive samples.
    pub max_rise: f64,
}

/// Flags any rise of y between consecutive samples above tolerance·y(0).
pub fn check_monotone_decay(ys: &[(f64, f64)], tolerance: f64) -> MonotoneReport {
    let y0 = ys.first().map(|&(_, y)| y).unwrap_or(0.0);
    let mut max_rise = 0.0f64;
    let mut first_violation = None;
    for i in 1..ys.len() {
        let rise = ys[i].1 - ys[i - 1].1;
        max_rise = max_rise.max(rise);
        if rise > tolerance * y0 && first_violation.is_none() {
            first_violation = Some(i);
        }
    }
    MonotoneReport {
        passed: first_violation.is_none(),
        first_violation,
        max_rise,
    }
}

/// Differential-comparison check: fits K₂ from the series endpoints of
/// y(t) ≈ y(0)e^(−2K₂t), then verifies y′ + 2K₂y ≤ slack pointwise with
/// central differences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdeComparisonReport {
    pub k2: f64,
    pub max_slack: f64,
    pub slacks: Vec<(f64, f64)>,
}

pub fn check_ode_comparison(ys: &[(f64, f64)]) -> Result<OdeComparisonReport> {
    if ys.len() < 3 {
        return Err(Error::NotApplicable(
            "comparison check needs at least three samples".into(),
        ));
    }
    let (t0, y0) = ys[0];
    let (t1, y1) = *ys.last().unwrap();
    if !(y0 > 0.0 && y1 > 0.0 && t1 > t0) {
        return Err(Error::NotApplicable(
            "comparison check requires positive endpoints".into(),
        ));
    }
    let k2 = (y0 / y1).ln() / (2.0 * (t1 - t0));
    let mut slacks = Vec::with_capacity(ys.len() - 2);
    let mut max_slack = f64::NEG_INFINITY;
    for i in 1..ys.len() - 1 {
        let dy = (ys[i + 1].1 - ys[i - 1].1) / (ys[i + 1].0 - ys[i - 1].0);
        let slack = dy + 2.0 * k2 * ys[i].1;
        max_slack = max_slack.max(slack);
        slacks.push((ys[i].0, slack));
    }
    Ok(OdeComparisonReport {
        k2,
        max_slack,
        slacks,
    })
}

/// Coefficient of determination of the affine regression of 1/d against t;
/// near 1 when the series follows the reciprocal-affine decay shape.
pub fn reciprocal_affinity_r2(series: &[(f64, f64)]) -> Result<f64> {
    check_series(series)?;
    let xs: Vec<f64> = series.iter().map(|&(t, _)| t).collect();
    let ys: Vec<f64> = series.iter().map(|&(_, d)| 1.0 / d).collect();
    let (slope, intercept, rms) = affine_lsq(&xs, &ys);
    let _ = (slope, intercept);
    let n = ys.len() as f64;
    let my = ys.iter().sum::<f64>() / n;
    let var = ys.iter().map(|&y| (y - my) * (y - my)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::NotApplicable(
            "constant series has no regression variance".into(),
        ));
    }
    Ok(1.0 - rms * rms / var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synth(f: impl Fn(f64) -> f64, n: usize, t_end: f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = t_end * i as f64 / (n - 1) as f64;
                (t, f(t))
            })
            .collect()
    }

    #[test]
    fn exponential_fit_exact_recovery() {
        let series = synth(|t| 3.0 * (-0.7 * t).exp(), 50, 10.0);
        let fit = fit_exponential(&series).unwrap();
        assert_relative_eq!(fit.k2, 0.7, max_relative = 1e-10);
        assert_relative_eq!(fit.k1, 3.0, max_relative = 1e-10);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn algebraic_fit_exact_recovery() {
        let series = synth(|t| 1.0 / (2.0 + 0.3 * t), 50, 20.0);
        let fit = fit_algebraic(&series).unwrap();
        assert_relative_eq!(fit.k2, 0.3, max_relative = 1e-10);
        assert_relative_eq!(1.0 / fit.k1, 2.0, max_relative = 1e-10);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn cross_fits_separate_models() {
        let algebraic_data = synth(|t| 1.0 / (1.0 + t), 80, 100.0);
        let e = fit_exponential(&algebraic_data).unwrap();
        let a = fit_algebraic(&algebraic_data).unwrap();
        assert!(e.residual >= 10.0 * a.residual.max(1e-300));

        let exp_data = synth(|t| (-0.5 * t).exp(), 80, 20.0);
        let e = fit_exponential(&exp_data).unwrap();
        let a = fit_algebraic(&exp_data).unwrap();
        assert!(a.residual >= 10.0 * e.residual.max(1e-300));
    }

    #[test]
    fn degenerate_series_are_rejected() {
        let constant = synth(|_| 1.0, 20, 5.0);
        assert!(fit_exponential(&constant).is_err());
        let short = synth(|t| (-t).exp(), 2, 1.0);
        assert!(fit_algebraic(&short).is_err());
        let with_zero: Vec<_> = (0..20).map(|i| (i as f64, 0.0)).collect();
        assert!(fit_exponential(&with_zero).is_err());
    }

    #[test]
    fn selection_prefers_the_generating_model() {
        let exp_data = synth(|t| (-0.5 * t).exp(), 100, 30.0);
        let sel = select_rate_model(&exp_data, RegimeTag::CoexistenceH2).unwrap();
        assert_eq!(sel.winner, RateModel::Exponential);
        assert!(sel.matches_prediction);

        // the same data labeled degenerate flips the mismatch flag
        let sel =
            select_rate_model(&exp_data, RegimeTag::DegenerateExclusionH2).unwrap();
        assert_eq!(sel.winner, RateModel::Exponential);
        assert!(!sel.matches_prediction);
    }

    #[test]
    fn selection_is_scale_invariant() {
        let data = synth(|t| 1.0 / (1.0 + 0.4 * t), 60, 50.0);
        let scaled: Vec<_> = data.iter().map(|&(t, d)| (t, 100.0 * d)).collect();
        let a = select_rate_model(&data, RegimeTag::DegenerateExclusionH2).unwrap();
        let b =
            select_rate_model(&scaled, RegimeTag::DegenerateExclusionH2).unwrap();
        assert_eq!(a.winner, b.winner);
        // scaling d by c rescales the algebraic rate by 1/c; the shape and
        // the winner are unchanged
        assert_relative_eq!(
            a.algebraic.unwrap().k2,
            100.0 * b.algebraic.unwrap().k2,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            a.exponential.unwrap().k2,
            b.exponential.unwrap().k2,
            max_relative = 1e-9
        );
    }

    #[test]
    fn tail_window_drops_floor_samples() {
        // exponential decay that bottoms out at rounding level
        let series = synth(|t| (-2.0 * t).exp().max(1e-16), 100, 40.0);
        let tail = tail_window(&series);
        assert!(tail.iter().all(|&(_, d)| d > 1e-16));
        // the fit on the cleaned tail recovers the true rate
        let fit = fit_exponential(&tail).unwrap();
        assert_relative_eq!(fit.k2, 2.0, max_relative = 1e-6);
        // without floor contamination the window is just the last 80%
        let clean = synth(|t| (-0.1 * t).exp(), 50, 5.0);
        assert_eq!(tail_window(&clean).len(), 40);
    }

    #[test]
    fn monotone_check_finds_constructed_bump() {
        let mut ys = synth(|t| (-0.001 * t).exp(), 50, 5.0);
        let clean = check_monotone_decay(&ys, 1e-10);
        assert!(clean.passed);
        ys[25].1 += 1e-3 * ys[0].1;
        let bumped = check_monotone_decay(&ys, 1e-10);
        assert!(!bumped.passed);
        assert_eq!(bumped.first_violation, Some(25));
    }

    #[test]
    fn comparison_check_on_pure_exponential() {
        let ys = synth(|t| (-t).exp(), 200, 5.0);
        let report = check_ode_comparison(&ys).unwrap();
        assert_relative_eq!(report.k2, 0.5, max_relative = 1e-12);
        // central differencing of a smooth exponential leaves only O(dt^2)
        // slack
        assert!(report.max_slack.abs() < 1e-3);
    }

    #[test]
    fn reciprocal_affinity_is_high_for_algebraic_data() {
        let data = synth(|t| 1.0 / (3.0 + 0.25 * t), 50, 80.0);
        assert!(reciprocal_affinity_r2(&data).unwrap() > 0.999999);
        let exp_data = synth(|t| (-0.5 * t).exp(), 50, 30.0);
        assert!(reciprocal_affinity_r2(&exp_data).unwrap() < 0.9);
    }
}
