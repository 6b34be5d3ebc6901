//! Timescale extraction: exponential decays of the energy density (τ*) and
//! of the staggered magnetization (τ_PDTC), the homogenization time τ_pre,
//! and Lorentzian peak fits.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::observables::ObservableSeries;

/// Default first period of the τ_PDTC fit window.
pub const DEFAULT_PDTC_N_MIN: usize = 2;
/// Default homogenization threshold for [`prethermal_time`].
pub const DEFAULT_PRETHERMAL_THRESHOLD: f64 = 0.1;
/// Consecutive records that must stay below the threshold.
pub const PRETHERMAL_HOLD: usize = 3;
/// Fewest records a decay fit accepts.
pub const MIN_DECAY_POINTS: usize = 6;

/// Outcome of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// One-sigma standard errors, same order as `params`.
    pub errors: Vec<f64>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A fitted timescale, or an explicit statement that the data show no decay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Timescale {
    Finite { value: f64, error: f64 },
    Undetermined,
}

impl Timescale {
    pub fn value(&self) -> Option<f64> {
        match self {
            Timescale::Finite { value, .. } => Some(*value),
            Timescale::Undetermined => None,
        }
    }

    pub fn error(&self) -> Option<f64> {
        match self {
            Timescale::Finite { error, .. } => Some(*error),
            Timescale::Undetermined => None,
        }
    }
}

/// Result of fitting A·exp(−t/τ) to a window of records.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub timescale: Timescale,
    pub amplitude: f64,
    pub amplitude_error: f64,
    /// Indices [first, last] of the records used.
    pub window: (usize, usize),
    /// Set when the window was cut short at a change of sign.
    pub truncated: bool,
    pub fit: FitResult,
}

/// Result of fitting a/((x − x₀)² + γ²) + c.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakFit {
    pub center: f64,
    pub center_error: f64,
    /// Half-width at half-maximum |γ|.
    pub hwhm: f64,
    /// Quarter-width at half-maximum, γ/2.
    pub width: f64,
    pub width_error: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub fit: FitResult,
}

/// Levenberg–Marquardt for small parameter counts.
///
/// `model(p, x)` returns the value and its gradient with respect to `p`.
/// With `sigma` given the residuals are weighted by 1/σ and the covariance is
/// absolute; without it the covariance is rescaled by the residual variance.
pub fn levenberg_marquardt(
    x: &[f64],
    y: &[f64],
    sigma: Option<&[f64]>,
    initial: &[f64],
    model: impl Fn(&[f64], f64) -> (f64, Vec<f64>),
) -> Result<FitResult> {
    const MAX_ITER: usize = 500;
    let (n, m) = (x.len(), initial.len());
    if y.len() != n || sigma.is_some_and(|s| s.len() != n) {
        return Err(invalid("data", "x, y and sigma lengths differ"));
    }
    if n < m {
        return Err(Error::TooFewPoints { needed: m, have: n });
    }
    let weight = |i: usize| sigma.map_or(1.0, |s| 1.0 / s[i]);
    let evaluate = |p: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, m);
        for i in 0..n {
            let (f, g) = model(p, x[i]);
            let w = weight(i);
            r[i] = w * (y[i] - f);
            for j in 0..m {
                jac[(i, j)] = w * g[j];
            }
        }
        (r, jac)
    };

    let mut p = initial.to_vec();
    let (mut r, mut jac) = evaluate(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut damped = jtj.clone();
        for j in 0..m {
            damped[(j, j)] += lambda * jtj[(j, j)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
        let (tr, tj) = evaluate(&trial);
        let trial_cost = tr.norm_squared();
        if trial_cost.is_finite() && trial_cost <= cost {
            let small_step = step
                .iter()
                .zip(&trial)
                .all(|(d, v)| d.abs() <= 1e-13 * (v.abs() + 1e-300));
            let small_gain = cost - trial_cost <= 1e-15 * cost;
            p = trial;
            r = tr;
            jac = tj;
            cost = trial_cost;
            lambda = (lambda / 3.0).max(1e-12);
            if small_step || small_gain || cost == 0.0 {
                converged = true;
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent direction left: a stationary point.
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::FitNotConverged { iterations });
    }
    let jtj = jac.transpose() * &jac;
    let scale = if sigma.is_some() || n == m {
        1.0
    } else {
        cost / (n - m) as f64
    };
    let errors = match jtj.try_inverse() {
        Some(cov) => (0..m).map(|j| (cov[(j, j)] * scale).max(0.0).sqrt()).collect(),
        None => alloc::vec![f64::INFINITY; m],
    };
    Ok(FitResult {
        params: p,
        errors,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
    })
}

/// Slope and intercept of ln|y| against t, skipping zeros.
fn log_linear_guess(t: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v != 0.0)
        .map(|(a, v)| (*a, v.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (0.0, pts.first().map_or(0.0, |p| p.1));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Fits A·exp(−t/τ). The fit runs in the rate k = 1/τ so that "no decay" is
/// an ordinary point of parameter space.
pub fn fit_exponential_decay(t: &[f64], y: &[f64]) -> Result<(FitResult, Timescale)> {
    if t.len() < MIN_DECAY_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_DECAY_POINTS,
            have: t.len(),
        });
    }
    let (slope, intercept) = log_linear_guess(t, y);
    let sign = if y[0] < 0.0 { -1.0 } else { 1.0 };
    let initial = [sign * intercept.exp(), -slope];
    let fit = levenberg_marquardt(t, y, None, &initial, |p, x| {
        let e = (-p[1] * x).exp();
        (p[0] * e, alloc::vec![e, -p[0] * x * e])
    })?;
    let (k, k_err) = (fit.params[1], fit.errors[1]);
    let span = t.last().copied().unwrap_or(0.0) - t[0];
    // k·span below round-off means the data do not decay.
    let timescale = if !(k > 0.0) || k * span.abs() < 1e-9 {
        Timescale::Undetermined
    } else {
        Timescale::Finite {
            value: 1.0 / k,
            error: k_err / (k * k),
        }
    };
    Ok((fit, timescale))
}

/// Longest prefix of `y` (from index 0) that keeps the sign of `y[0]`.
fn same_sign_prefix(y: &[f64]) -> usize {
    let s = y[0].signum();
    y.iter().position(|v| v.signum() != s || *v == 0.0).unwrap_or(y.len())
}

fn decay_over(t: &[f64], y: &[f64], offset: usize) -> Result<DecayFit> {
    if y.is_empty() || y[0] == 0.0 {
        return Err(Error::SignIndefinite { index: offset });
    }
    let keep = same_sign_prefix(y);
    if keep < MIN_DECAY_POINTS {
        if keep < y.len() {
            return Err(Error::SignIndefinite { index: offset + keep });
        }
        return Err(Error::TooFewPoints {
            needed: MIN_DECAY_POINTS,
            have: keep,
        });
    }
    let (fit, timescale) = fit_exponential_decay(&t[..keep], &y[..keep])?;
    Ok(DecayFit {
        timescale,
        amplitude: fit.params[0],
        amplitude_error: fit.errors[0],
        window: (offset, offset + keep - 1),
        truncated: keep < y.len(),
        fit,
    })
}

/// τ* from ε(t) = ε₀·exp(−t/τ*) with the offset pinned at zero, in t·J₀ units.
///
/// The window ends before the first record whose sign differs from ε(0).
pub fn fit_heating_time(series: &ObservableSeries) -> Result<DecayFit> {
    let eps = series
        .energy_density()
        .ok_or_else(|| invalid("series", "records carry no energy density"))?;
    if eps.len() < MIN_DECAY_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_DECAY_POINTS,
            have: eps.len(),
        });
    }
    decay_over(&series.times_j0(), &eps, 0)
}

/// τ_PDTC from the staggered signal (−1)ⁿ·M(nT) over records with n ≥ `n_min`.
pub fn fit_pdtc_lifetime(series: &ObservableSeries, n_min: usize) -> Result<DecayFit> {
    let first = series
        .records
        .iter()
        .position(|r| r.period >= n_min)
        .ok_or(Error::TooFewPoints {
            needed: MIN_DECAY_POINTS,
            have: 0,
        })?;
    let recs = &series.records[first..];
    let t: Vec<f64> = recs.iter().map(|r| r.time_j0).collect();
    let y: Vec<f64> = recs.iter().map(|r| r.parity.sign() * r.magnetization).collect();
    decay_over(&t, &y, first)
}

/// τ_PDTC for several window starts, to show how much the choice matters.
pub fn pdtc_window_sensitivity(series: &ObservableSeries, starts: &[usize]) -> Vec<(usize, Result<DecayFit>)> {
    starts.iter().map(|&n| (n, fit_pdtc_lifetime(series, n))).collect()
}

/// The two central sites of an N-site chain: ⌊(N−1)/2⌋ and the next one.
pub fn central_pair(n: usize) -> (usize, usize) {
    let a = (n.max(2) - 1) / 2;
    (a, a + 1)
}

/// |mean⟨σˣ⟩ of the central pair − mean⟨σˣ⟩ of the other sites| per record.
pub fn homogenization_spread(series: &ObservableSeries) -> Result<Vec<f64>> {
    let n = series.n_sites();
    if n < 3 {
        return Err(invalid("series", "needs at least three sites"));
    }
    let (a, b) = central_pair(n);
    Ok(series
        .records
        .iter()
        .map(|r| {
            let centre = 0.5 * (r.site_x[a] + r.site_x[b]);
            let rest: f64 = r
                .site_x
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != a && *i != b)
                .map(|(_, v)| v)
                .sum::<f64>()
                / (n - 2) as f64;
            (centre - rest).abs()
        })
        .collect())
}

/// First t·J₀ at which the spread drops below `threshold` and stays there for
/// [`PRETHERMAL_HOLD`] consecutive records. Error is half the record spacing.
pub fn prethermal_time(series: &ObservableSeries, threshold: f64) -> Result<Timescale> {
    if !(threshold > 0.0) {
        return Err(invalid("threshold", "must be positive"));
    }
    let spread = homogenization_spread(series)?;
    let times = series.times_j0();
    let spacing = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
    let mut run = 0;
    for (k, s) in spread.iter().enumerate() {
        if *s < threshold {
            run += 1;
            if run == PRETHERMAL_HOLD || (k + 1 == spread.len() && run == k + 1) {
                let start = k + 1 - run;
                return Ok(Timescale::Finite {
                    value: times[start],
                    error: 0.5 * spacing,
                });
            }
        } else {
            run = 0;
        }
    }
    Ok(Timescale::Undetermined)
}

/// Fits a/((x − x₀)² + γ²) + c. Needs ≥ 5 points and an interior maximum.
pub fn fit_lorentzian_peak(x: &[f64], y: &[f64], y_err: Option<&[f64]>) -> Result<PeakFit> {
    if x.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, have: x.len() });
    }
    if y.len() != x.len() {
        return Err(invalid("y", "length differs from x"));
    }
    let (imax, ymax) = y
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    if imax == 0 || imax + 1 == y.len() || !(ymax > ymin) {
        return Err(Error::NoPeak);
    }
    // Half-maximum crossings on either side give the starting width.
    let half = ymin + 0.5 * (ymax - ymin);
    let left = (0..imax).rev().find(|&i| y[i] < half).map_or(x[0], |i| x[i]);
    let right = (imax + 1..y.len()).find(|&i| y[i] < half).map_or(x[x.len() - 1], |i| x[i]);
    let gamma0 = (0.5 * (right - left).abs()).max(1e-12 * x[imax].abs().max(1e-300));
    let initial = [(ymax - ymin) * gamma0 * gamma0, x[imax], gamma0, ymin];
    let fit = levenberg_marquardt(x, y, y_err, &initial, |p, xv| {
        let (a, x0, g, _c) = (p[0], p[1], p[2], p[3]);
        let d = xv - x0;
        let q = d * d + g * g;
        let f = a / q;
        (
            f + p[3],
            alloc::vec![1.0 / q, 2.0 * a * d / (q * q), -2.0 * a * g / (q * q), 1.0],
        )
    })?;
    let (center, gamma) = (fit.params[1], fit.params[2].abs());
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(center > lo && center < hi) || !(fit.params[0] > 0.0) {
        return Err(Error::NoPeak);
    }
    Ok(PeakFit {
        center,
        center_error: fit.errors[1],
        hwhm: gamma,
        width: 0.5 * gamma,
        width_error: 0.5 * fit.errors[2],
        amplitude: fit.params[0],
        offset: fit.params[3],
        fit,
    })
}
