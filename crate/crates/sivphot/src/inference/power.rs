//! Staged fit of the power-dependent shape parameters.
//!
//! The procedure mirrors how the model separates: the limiting values fix
//! the four intrinsic rates, the pump slope `sigma` is fitted on `tau1(P)`
//! alone (whose power dependence it dominates), then `c` is fitted on
//! `a(P)` with `sigma` held, and `tau2(P)` is predicted rather than fitted.
//!
//! Raw endpoint plateaus bias the limits when the measured power range does
//! not reach them (`tau2` keeps rising steeply toward P = 0 whenever the
//! de-shelving term still dominates at the lowest measured power), so the
//! limits are refined to self-consistency: after each `sigma`/`c` pass the
//! endpoint estimates are corrected by the model's own finite-power ratio,
//! and `tau2^0` is re-estimated from the per-point de-shelving rates
//! `k31 = 1/(tau2 + a (tau2 - tau1))`, which invert the amplitude equation
//! exactly and turn the zero-power limit into a well-conditioned
//! three-parameter saturation fit.

use serde::{Deserialize, Serialize};

use super::lm::{self, LmOptions};
use super::{fit_log_positive, FitError, FitResult, PowerSeries};
use crate::rate_model::{
    limits_from_rates, rates_from_limits, shape_from_rates, CoreRates, LimitingValues,
    RateCoefficients,
};

/// Knobs of the staged procedure.
#[derive(Debug, Clone)]
pub struct PowerFitOptions {
    /// Refine the limiting values to self-consistency (on by default); when
    /// off, a single `sigma`/`c` pass runs on the plateau (or user) limits.
    pub refine_limits: bool,
    pub max_outer_iterations: usize,
    /// Relative change of the limiting values that stops the refinement.
    pub tol: f64,
}

impl Default for PowerFitOptions {
    fn default() -> Self {
        Self { refine_limits: true, max_outer_iterations: 80, tol: 1e-9 }
    }
}

/// Everything the staged fit produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerDependenceFit {
    pub rates: CoreRates,
    pub sigma: f64,
    pub c: f64,
    /// Limiting values the rates were inverted from.
    pub limits: LimitingValues,
    pub sigma_fit: FitResult,
    pub c_fit: FitResult,
    /// False when the data cannot constrain `c` (vanishing `d`).
    pub c_identifiable: bool,
    pub outer_iterations: usize,
    /// Relative limit change at the last refinement step.
    pub outer_delta: f64,
    /// Predicted bunching-time curve at the data powers (the model overlay;
    /// `tau2` is never fitted directly).
    pub predicted_tau2_ns: Vec<(f64, f64)>,
}

impl PowerDependenceFit {
    pub fn coefficients(&self) -> Result<RateCoefficients, FitError> {
        RateCoefficients::from_core(self.rates, self.sigma, self.c).map_err(FitError::from)
    }
}

/// Endpoint plateau estimate of the limiting values: `tau1^0` and `tau2^0`
/// from the mean of the two lowest-power points, `tau2^inf` and `a^inf`
/// from the mean of the three highest.
pub fn plateau_limits(
    series_a: &PowerSeries,
    series_tau1: &PowerSeries,
    series_tau2: &PowerSeries,
) -> Result<LimitingValues, FitError> {
    if series_a.len() < 4 {
        return Err(FitError::InsufficientData(format!(
            "plateau detection needs >= 4 points, got {}",
            series_a.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let t1 = series_tau1.values();
    let t2 = series_tau2.values();
    let a = series_a.values();
    let n = a.len();
    Ok(LimitingValues {
        tau1_zero_ns: mean(&t1[..2]),
        tau2_zero_ns: mean(&t2[..2]),
        tau2_inf_ns: mean(&t2[n - 3..]),
        amp_inf: mean(&a[n - 3..]),
    })
}

/// Per-point de-shelving rates (MHz) from the exact inversion of the
/// amplitude equation: `k31 = 1 / (tau2 + a (tau2 - tau1))`.
fn per_point_k31(a: &[f64], t1_ns: &[f64], t2_ns: &[f64]) -> Vec<f64> {
    a.iter()
        .zip(t1_ns)
        .zip(t2_ns)
        .map(|((&a, &t1), &t2)| 1e3 / (t2 + a * (t2 - t1)))
        .collect()
}

struct Stage<'d> {
    powers: &'d [f64],
    a: &'d [f64],
    t1: &'d [f64],
    w_a: Vec<f64>,
    w_t1: Vec<f64>,
    k31: Vec<f64>,
    w_k31: Vec<f64>,
}

impl Stage<'_> {
    /// Fit `sigma` on the antibunching-time series with all else fixed.
    fn fit_sigma(&self, core: &CoreRates, c: f64, sigma0: f64) -> Result<lm::LmOutcome, FitError> {
        let out = fit_log_positive(
            |p: &[f64]| {
                let rc = RateCoefficients::from_core(*core, p[0], c).ok()?;
                let mut r = Vec::with_capacity(self.powers.len());
                for ((&pw, &y), &w) in self.powers.iter().zip(self.t1).zip(&self.w_t1) {
                    r.push((shape_from_rates(&rc, pw).ok()?.tau1_ns - y) * w);
                }
                Some(r)
            },
            &[sigma0],
            &LmOptions::default(),
        );
        if !out.converged {
            return Err(FitError::StageDivergence {
                stage: "sigma",
                reason: format!("no convergence after {} iterations", out.iterations),
            });
        }
        Ok(out)
    }

    /// Fit `c` on the amplitude series with `sigma` held fixed.
    fn fit_c(&self, core: &CoreRates, sigma: f64, c0: f64) -> Result<lm::LmOutcome, FitError> {
        let out = fit_log_positive(
            |p: &[f64]| {
                let rc = RateCoefficients::from_core(*core, sigma, p[0]).ok()?;
                let mut r = Vec::with_capacity(self.powers.len());
                for ((&pw, &y), &w) in self.powers.iter().zip(self.a).zip(&self.w_a) {
                    r.push((shape_from_rates(&rc, pw).ok()?.amplitude - y) * w);
                }
                Some(r)
            },
            &[c0],
            &LmOptions::default(),
        );
        if !out.converged {
            return Err(FitError::StageDivergence {
                stage: "c",
                reason: format!("no convergence after {} iterations", out.iterations),
            });
        }
        Ok(out)
    }

    /// Saturation fit of the per-point de-shelving rates; returns
    /// `(k31_0, d, c)`.
    fn fit_k31_saturation(&self, init: [f64; 3]) -> Option<[f64; 3]> {
        let out = fit_log_positive(
            |p: &[f64]| {
                Some(
                    self.powers
                        .iter()
                        .zip(&self.k31)
                        .zip(&self.w_k31)
                        .map(|((&pw, &k), &w)| (p[0] + p[1] * pw / (pw + p[2]) - k) * w)
                        .collect(),
                )
            },
            &init,
            &LmOptions::default(),
        );
        out.converged.then(|| [out.params[0], out.params[1], out.params[2]])
    }
}

/// Staged power-dependence fit.
///
/// The three series must share one power grid. `limits` seeds the inversion
/// when given; otherwise the plateau estimate refined through the per-point
/// de-shelving rates is used. On success the reported `sigma` and `c` are
/// the stage fits at the final limits.
pub fn fit_power_dependence(
    series_a: &PowerSeries,
    series_tau1: &PowerSeries,
    series_tau2: &PowerSeries,
    limits: Option<LimitingValues>,
    opts: &PowerFitOptions,
) -> Result<PowerDependenceFit, FitError> {
    let n = series_a.len();
    if series_tau1.len() != n || series_tau2.len() != n {
        return Err(FitError::InvalidInput("the three series must have equal length".into()));
    }
    if series_tau1.powers() != series_a.powers() || series_tau2.powers() != series_a.powers() {
        return Err(FitError::InvalidInput("the three series must share one power grid".into()));
    }
    if n < 4 {
        return Err(FitError::InsufficientData(format!(
            "power-dependence fit needs >= 4 powers, got {n}"
        )));
    }
    let powers = series_a.powers();
    let a = series_a.values();
    let t1 = series_tau1.values();
    let t2 = series_tau2.values();

    // weights: supplied uncertainties, else relative (floored for tiny a)
    let a_floor = 1e-3 * a.iter().cloned().fold(f64::MIN, f64::max).max(1e-6);
    let w_a = match series_a.uncertainties() {
        Some(u) => u.iter().map(|s| 1.0 / s).collect(),
        None => a.iter().map(|&y| 1.0 / y.abs().max(a_floor)).collect(),
    };
    let w_t1 = match series_tau1.uncertainties() {
        Some(u) => u.iter().map(|s| 1.0 / s).collect(),
        None => t1.iter().map(|&y| 1.0 / y.abs().max(1e-12)).collect(),
    };
    let k31 = per_point_k31(a, t1, t2);
    if k31.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(FitError::InvalidInput(
            "per-point de-shelving rates are not positive; check the series".into(),
        ));
    }
    // propagate tau2/a errors into the per-point rates when available
    let w_k31: Vec<f64> = match (series_tau2.uncertainties(), series_a.uncertainties()) {
        (Some(ut2), ua) => k31
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let dk_dt2 = k * k * (1.0 + a[i]) / 1e3;
                let dk_da = k * k * (t2[i] - t1[i]) / 1e3;
                let sa = ua.map(|u| u[i]).unwrap_or(0.0);
                let var = (dk_dt2 * ut2[i]).powi(2) + (dk_da * sa).powi(2);
                1.0 / var.sqrt().max(1e-12 * k)
            })
            .collect(),
        _ => k31.iter().map(|&k| 1.0 / k).collect(),
    };
    let stage = Stage { powers, a, t1, w_a, w_t1, k31, w_k31 };

    // initial limits: user-supplied, else plateau with the zero-power
    // bunching limit taken from the per-point rate saturation fit
    let mut lv = match limits {
        Some(lv) => {
            lv.validate()?;
            lv
        }
        None => plateau_limits(series_a, series_tau1, series_tau2)?,
    };
    let mut sigma;
    let mut c;
    {
        // algebraic seed for sigma and c: A - k31 = sigma P + (k21 + k23) is
        // linear in P
        let q: Vec<f64> = (0..n)
            .map(|i| 1e3 / t1[i] + 1e3 / t2[i] - stage.k31[i])
            .collect();
        let (slope, _intercept) = linear_fit(powers, &q);
        sigma = slope.max(1e-6);
        let k31_lo = stage.k31[0].min(stage.k31[n - 1]);
        let k31_span = (stage.k31[n - 1] - stage.k31[0]).abs().max(1e-6);
        let sat = stage.fit_k31_saturation([
            (0.9 * k31_lo).max(1e-6),
            k31_span,
            crate::math::median(powers),
        ]);
        c = sat.map(|s| s[2]).unwrap_or_else(|| crate::math::median(powers));
        if limits.is_none() {
            if let Some([k31_0, _, _]) = sat {
                lv.tau2_zero_ns = 1e3 / k31_0;
            }
        }
    }

    let mut outer_delta = f64::INFINITY;
    let mut iterations = 0;
    let max_outer = if opts.refine_limits { opts.max_outer_iterations } else { 1 };
    for iter in 1..=max_outer {
        iterations = iter;
        let core = rates_from_limits(&lv)?;
        let sigma_out = stage.fit_sigma(&core, c, sigma)?;
        sigma = sigma_out.params[0];
        let d_resolved = core.d > 1e-6 * core.k31_0;
        if d_resolved {
            let c_out = stage.fit_c(&core, sigma, c)?;
            c = c_out.params[0];
        }
        if !opts.refine_limits {
            break;
        }

        // self-consistent limit refresh
        let rc = RateCoefficients::from_core(core, sigma, c)?;
        let model: Vec<_> = powers
            .iter()
            .map(|&p| shape_from_rates(&rc, p))
            .collect::<Result<_, _>>()?;
        let mean = |f: &dyn Fn(usize) -> f64, idx: std::ops::Range<usize>| {
            let m = idx.len() as f64;
            idx.map(f).sum::<f64>() / m
        };
        let ideal = limits_from_rates(&core);
        let new_t1_0 = mean(&|i| t1[i], 0..2) * ideal.tau1_zero_ns
            / mean(&|i| model[i].tau1_ns, 0..2);
        let new_t2_inf = mean(&|i| t2[i], n - 3..n) * ideal.tau2_inf_ns
            / mean(&|i| model[i].tau2_ns, n - 3..n);
        let new_a_inf = mean(&|i| a[i], n - 3..n) * ideal.amp_inf
            / mean(&|i| model[i].amplitude, n - 3..n);
        let new_t2_0 = match stage.fit_k31_saturation([
            core.k31_0,
            core.d.max(1e-4 * core.k31_0),
            c.max(1e-3),
        ]) {
            Some([k31_0, _, _]) => 1e3 / k31_0,
            None => lv.tau2_zero_ns,
        };
        // late damping guards against limit cycles on noisy series
        let damp = if iter > 30 { 0.5 } else { 1.0 };
        let update = |old: f64, new: f64| old * (new / old).powf(damp);
        let proposed = LimitingValues {
            tau1_zero_ns: update(lv.tau1_zero_ns, new_t1_0),
            tau2_zero_ns: update(lv.tau2_zero_ns, new_t2_0),
            tau2_inf_ns: update(lv.tau2_inf_ns, new_t2_inf),
            amp_inf: update(lv.amp_inf, new_a_inf),
        };
        outer_delta = [
            proposed.tau1_zero_ns / lv.tau1_zero_ns,
            proposed.tau2_zero_ns / lv.tau2_zero_ns,
            proposed.tau2_inf_ns / lv.tau2_inf_ns,
            proposed.amp_inf / lv.amp_inf,
        ]
        .iter()
        .map(|r| (r - 1.0).abs())
        .fold(0.0_f64, f64::max);
        lv = proposed;
        if outer_delta < opts.tol {
            break;
        }
    }
    if opts.refine_limits && outer_delta > 1e-3 {
        return Err(FitError::StageDivergence {
            stage: "limit-refresh",
            reason: format!(
                "limits still moving by {outer_delta:.2e} after {iterations} iterations"
            ),
        });
    }

    // final consistent pass at the converged limits
    let core = rates_from_limits(&lv)?;
    let sigma_out = stage.fit_sigma(&core, c, sigma)?;
    sigma = sigma_out.params[0];
    let d_resolved = core.d > 1e-6 * core.k31_0;
    let c_out = if d_resolved {
        let out = stage.fit_c(&core, sigma, c)?;
        c = out.params[0];
        out
    } else {
        lm::LmOutcome {
            params: vec![c],
            covariance: vec![0.0],
            ssr: f64::NAN,
            iterations: 0,
            converged: true,
            ill_conditioned: true,
        }
    };
    let c_identifiable = d_resolved && !c_out.ill_conditioned;

    let rc = RateCoefficients::from_core(core, sigma, c)?;
    let predicted_tau2_ns = powers
        .iter()
        .map(|&p| shape_from_rates(&rc, p).map(|s| (p, s.tau2_ns)))
        .collect::<Result<_, _>>()?;

    let as_result = |out: &lm::LmOutcome, name: &str| FitResult {
        names: vec![name.to_string()],
        values: out.params.clone(),
        covariance: out.covariance.clone(),
        residual_norm: out.ssr,
        n_points: n,
        converged: out.converged,
        ill_conditioned: out.ill_conditioned,
        iterations: out.iterations,
    };
    Ok(PowerDependenceFit {
        rates: core,
        sigma,
        c,
        limits: lv,
        sigma_fit: as_result(&sigma_out, "sigma"),
        c_fit: as_result(&c_out, "c"),
        c_identifiable,
        outer_iterations: iterations,
        outer_delta,
        predicted_tau2_ns,
    })
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    (slope, (sy - slope * sx) / n)
}
