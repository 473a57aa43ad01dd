//! Nonlinear least-squares estimation: saturation curves, correlation
//! histograms, and the staged fit of the power-dependent shape parameters
//! that yields the de-shelving model coefficients.

pub mod lm;

mod g2fit;
mod power;

pub use g2fit::{fit_g2, G2Fit};
pub use power::{
    fit_power_dependence, plateau_limits, PowerDependenceFit, PowerFitOptions,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rate_model::{
    shape_from_rates, steady_state_high_power, RateCoefficients, RateModelError,
};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("fit did not converge after {iterations} iterations (SSR {ssr:.6e})")]
    NoConvergence { iterations: usize, ssr: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] RateModelError),
    #[error("power-dependence stage `{stage}` failed: {reason}")]
    StageDivergence { stage: &'static str, reason: String },
    #[error("estimated probability {value:.4e} falls outside (0, 1]")]
    OutOfRange { value: f64 },
}

/// Named parameter estimates with their covariance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    /// Row-major p x p covariance of `values`.
    pub covariance: Vec<f64>,
    /// Weighted sum of squared residuals at the optimum.
    pub residual_norm: f64,
    pub n_points: usize,
    pub converged: bool,
    pub ill_conditioned: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// One-sigma uncertainty of a named parameter.
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let p = self.names.len();
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.covariance[i * p + i].max(0.0).sqrt())
    }
}

/// A quantity sampled over strictly increasing positive excitation powers,
/// with optional one-sigma uncertainties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerSeries {
    powers: Vec<f64>,
    values: Vec<f64>,
    uncertainties: Option<Vec<f64>>,
}

impl PowerSeries {
    pub fn new(powers: Vec<f64>, values: Vec<f64>) -> Result<Self, FitError> {
        Self::build(powers, values, None)
    }

    pub fn with_uncertainties(
        powers: Vec<f64>,
        values: Vec<f64>,
        uncertainties: Vec<f64>,
    ) -> Result<Self, FitError> {
        Self::build(powers, values, Some(uncertainties))
    }

    fn build(
        powers: Vec<f64>,
        values: Vec<f64>,
        uncertainties: Option<Vec<f64>>,
    ) -> Result<Self, FitError> {
        if powers.len() != values.len() || powers.is_empty() {
            return Err(FitError::InvalidInput(format!(
                "series needs matching non-empty powers/values, got {}/{}",
                powers.len(),
                values.len()
            )));
        }
        if let Some(u) = &uncertainties {
            if u.len() != powers.len() || u.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(FitError::InvalidInput(
                    "uncertainties must be positive, one per point".into(),
                ));
            }
        }
        if powers.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(FitError::InvalidInput("powers must be positive".into()));
        }
        if powers.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FitError::InvalidInput("powers must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FitError::InvalidInput("values must be finite".into()));
        }
        Ok(Self { powers, values, uncertainties })
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn uncertainties(&self) -> Option<&[f64]> {
        self.uncertainties.as_deref()
    }

    /// 1/sigma weights; unit weights when no uncertainties were supplied.
    pub(crate) fn weights(&self) -> Vec<f64> {
        match &self.uncertainties {
            Some(u) => u.iter().map(|s| 1.0 / s).collect(),
            None => vec![1.0; self.len()],
        }
    }
}

/// Result of a saturation-curve fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaturationFit {
    pub fit: FitResult,
}

impl SaturationFit {
    pub fn i_inf(&self) -> f64 {
        self.fit.value("i_inf").unwrap()
    }

    pub fn psat(&self) -> f64 {
        self.fit.value("psat").unwrap()
    }

    pub fn c_backgr(&self) -> f64 {
        self.fit.value("c_backgr").unwrap()
    }

    /// Probability that a detected photon stems from the emitter at power `p`:
    /// `signal / (signal + background) = I_inf / (I_inf + c_backgr (P + Psat))`.
    pub fn pe(&self, power: f64) -> f64 {
        let i_inf = self.i_inf();
        i_inf / (i_inf + self.c_backgr() * (power + self.psat()))
    }
}

/// Weighted fit of `I(P) = I_inf P / (P + Psat) + c_backgr P`.
///
/// Needs at least four points; the knee should be bracketed by the data for
/// the parameters to separate (a `Psat` estimate escaping the sampled power
/// range is reported through the `ill_conditioned` flag, not an error).
pub fn fit_saturation(data: &PowerSeries) -> Result<SaturationFit, FitError> {
    if data.len() < 4 {
        return Err(FitError::InsufficientData(format!(
            "saturation fit needs >= 4 points, got {}",
            data.len()
        )));
    }
    let powers = data.powers().to_vec();
    let values = data.values().to_vec();
    let weights = data.weights();

    // heuristics: knee near the power where the rate passes half its maximum
    let y_max = values.iter().cloned().fold(f64::MIN, f64::max);
    if y_max <= 0.0 {
        return Err(FitError::InvalidInput("all rates are non-positive".into()));
    }
    let i_inf0 = 1.2 * y_max;
    let half = values
        .iter()
        .position(|&y| y >= 0.5 * y_max)
        .unwrap_or(values.len() / 2);
    let psat0 = powers[half].max(powers[0]);
    let last = values.len() - 1;
    // beyond the knee the saturating part flattens, so the slope between the
    // two highest powers approximates the linear background coefficient
    let tail_slope = (values[last] - values[last - 1]) / (powers[last] - powers[last - 1]);
    let cb0 = tail_slope.max(1e-9 * y_max / psat0);

    let outcome = fit_log_positive(
        |p: &[f64]| {
            Some(
                powers
                    .iter()
                    .zip(&values)
                    .zip(&weights)
                    .map(|((&pw, &y), &w)| {
                        (crate::rate_model::saturation_curve(p[0], p[1], p[2], pw) - y) * w
                    })
                    .collect(),
            )
        },
        &[i_inf0, psat0, cb0],
        &lm::LmOptions::default(),
    );
    if !outcome.converged {
        return Err(FitError::NoConvergence {
            iterations: outcome.iterations,
            ssr: outcome.ssr,
        });
    }
    let psat = outcome.params[1];
    let bracketed = psat >= powers[0] && psat <= powers[last];
    Ok(SaturationFit {
        fit: FitResult {
            names: vec!["i_inf".into(), "psat".into(), "c_backgr".into()],
            values: outcome.params,
            covariance: outcome.covariance,
            residual_norm: outcome.ssr,
            n_points: data.len(),
            converged: outcome.converged,
            ill_conditioned: outcome.ill_conditioned || !bracketed,
            iterations: outcome.iterations,
        },
    })
}

/// Shape-parameter curves over a power grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeCurves {
    pub powers: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub tau1_ns: Vec<f64>,
    pub tau2_ns: Vec<f64>,
}

/// Evaluate the de-shelving model curves on a power grid.
pub fn shape_curves(rc: &RateCoefficients, powers: &[f64]) -> Result<ShapeCurves, RateModelError> {
    let mut out = ShapeCurves {
        powers: powers.to_vec(),
        amplitude: Vec::with_capacity(powers.len()),
        tau1_ns: Vec::with_capacity(powers.len()),
        tau2_ns: Vec::with_capacity(powers.len()),
    };
    for &p in powers {
        let s = shape_from_rates(rc, p)?;
        out.amplitude.push(s.amplitude);
        out.tau1_ns.push(s.tau1_ns);
        out.tau2_ns.push(s.tau2_ns);
    }
    Ok(out)
}

/// Shape-parameter curves for the nested model with a constant de-shelving
/// rate `k31` and pump slope `sigma`.
///
/// To compare against a fitted de-shelving model at its high-power end, pass
/// `k31 = k31_0 + d` together with a slope from
/// [`crate::rate_model::sigma_constant_rate_model`].
pub fn constant_rate_prediction(
    k21: f64,
    k23: f64,
    k31: f64,
    sigma: f64,
    powers: &[f64],
) -> Result<ShapeCurves, RateModelError> {
    let rc = RateCoefficients::new(k21, k23, k31, 0.0, 1.0, sigma)?;
    shape_curves(&rc, powers)
}

/// Quantum efficiency implied by a saturated photon rate:
/// `I_inf / (eta_det_int * eta_coll * k21 * n2_inf)`.
pub fn estimate_quantum_efficiency(
    i_inf_cps: f64,
    rc: &RateCoefficients,
    eta_det_int: f64,
    eta_coll: f64,
) -> Result<f64, FitError> {
    for (name, p) in [("eta_det_int", eta_det_int), ("eta_coll", eta_coll)] {
        if !(p > 0.0 && p <= 1.0) {
            return Err(FitError::InvalidInput(format!("{name} = {p} must lie in (0, 1]")));
        }
    }
    if !(i_inf_cps > 0.0 && i_inf_cps.is_finite()) {
        return Err(FitError::InvalidInput(format!("i_inf = {i_inf_cps} cps must be positive")));
    }
    rc.validate()?;
    let n2 = steady_state_high_power(rc).excited;
    let qe = i_inf_cps / (eta_det_int * eta_coll * rc.k21 * 1e6 * n2);
    if qe > 1.0 {
        return Err(FitError::OutOfRange { value: qe });
    }
    Ok(qe)
}

/// Run the minimizer over strictly positive parameters via a log transform,
/// mapping the covariance back to natural parameters.
pub(crate) fn fit_log_positive<F>(
    residuals: F,
    initial: &[f64],
    opts: &lm::LmOptions,
) -> lm::LmOutcome
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let p = initial.len();
    let init_log: Vec<f64> = initial.iter().map(|v| v.max(1e-300).ln()).collect();
    let mut out = lm::minimize(
        |phi: &[f64]| {
            if phi.iter().any(|v| v.abs() > 600.0) {
                return None; // exp would overflow or underflow to a stuck region
            }
            let nat: Vec<f64> = phi.iter().map(|v| v.exp()).collect();
            residuals(&nat)
        },
        &init_log,
        opts,
    );
    let nat: Vec<f64> = out.params.iter().map(|v| v.exp()).collect();
    // cov_theta = diag(theta) cov_phi diag(theta)
    for a in 0..p {
        for b in 0..p {
            out.covariance[a * p + b] *= nat[a] * nat[b];
        }
    }
    out.params = nat;
    out
}
