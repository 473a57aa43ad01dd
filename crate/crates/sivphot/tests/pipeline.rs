//! Statistical end-to-end checks: the simulator's photon streams must
//! reproduce the analytic model through the correlation estimator.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use sivphot::correlation::{bin_timetrace, correlate, G2Histogram};
use sivphot::emitter_sim::{expected_count_rate, simulate, SimConfig};
use sivphot::emitters;
use sivphot::inference::fit_g2;
use sivphot::rate_model::{g2_analytic, shape_from_rates, G2Shape};

/// Chi-square goodness of fit of the histogram against a model curve,
/// returning the p-value. Expected counts come from the model times the
/// uncorrelated normalization.
fn chi_square_p(hist: &G2Histogram, model: impl Fn(f64) -> f64) -> f64 {
    let mut chi2 = 0.0;
    let mut dof = 0.0;
    for (i, &c) in hist.counts.iter().enumerate() {
        let expected = hist.norm_constant * model(hist.tau_at(i));
        if expected < 10.0 {
            continue; // Poisson-to-chi-square approximation needs counts
        }
        chi2 += (c as f64 - expected).powi(2) / expected;
        dof += 1.0;
    }
    assert!(dof > 50.0, "too few populated bins ({dof})");
    let dist = ChiSquared::new(dof).unwrap();
    1.0 - dist.cdf(chi2)
}

#[test]
fn simulated_histogram_matches_analytic_correlation() {
    // ideal detection chain: no jitter, no dead time, no background
    let rec = emitters::deshelving_fit("ND3").unwrap();
    let rc = rec.coefficients();
    let power = rec.psat_uw;
    let shape = shape_from_rates(&rc, power).unwrap();

    let mut cfg = SimConfig::new(rc, power, 0.0, 20260711);
    cfg.eta_detect = 0.05;
    cfg.irf_sigma_ns = 0.0;
    let rate = expected_count_rate(&cfg);
    cfg.duration_s = 1.1e6 / rate; // >= 1e6 detected photons
    let stream = simulate(&cfg).unwrap();
    assert!(stream.len() >= 1_000_000, "only {} photons", stream.len());

    let max_tau = 8.0 * shape.tau2_ns;
    let bin = (shape.tau1_ns / 8.0).max(0.001);
    let hist = correlate(&stream, max_tau, bin).unwrap();
    let p = chi_square_p(&hist, |tau| g2_analytic(&shape, tau));
    assert!(p > 0.01, "chi-square p = {p:.4}");

    // and the fitted shape parameters agree with the generator
    let fit = fit_g2(&hist, 1.0, 0.0).unwrap();
    assert!(fit.bunching_resolved);
    let t2 = fit.tau2_ns.unwrap();
    assert!((fit.amplitude - shape.amplitude).abs() / shape.amplitude < 0.05);
    assert!((fit.tau1_ns - shape.tau1_ns).abs() / shape.tau1_ns < 0.05);
    assert!((t2 - shape.tau2_ns).abs() / shape.tau2_ns < 0.05);
}

#[test]
fn jittered_stream_is_described_by_the_convolved_shape() {
    let rec = emitters::deshelving_fit("ND3").unwrap();
    let rc = rec.coefficients();
    let power = 2.0 * rec.psat_uw;
    let shape = shape_from_rates(&rc, power).unwrap();

    let mut cfg = SimConfig::new(rc, power, 0.0, 777);
    cfg.eta_detect = 0.05;
    cfg.irf_sigma_ns = 0.35;
    cfg.duration_s = 1.2e6 / expected_count_rate(&cfg);
    let stream = simulate(&cfg).unwrap();

    let hist = correlate(&stream, 6.0 * shape.tau2_ns, shape.tau1_ns / 10.0).unwrap();
    // per-photon jitter sigma smears the correlation by sqrt(2) sigma
    let pair_sigma = std::f64::consts::SQRT_2 * cfg.irf_sigma_ns;
    let fit = fit_g2(&hist, 1.0, pair_sigma).unwrap();
    assert!((fit.tau1_ns - shape.tau1_ns).abs() / shape.tau1_ns < 0.08);
    assert!((fit.tau2_ns.unwrap() - shape.tau2_ns).abs() / shape.tau2_ns < 0.08);
    // ignoring the response would misread the washed-out dip
    let naive = fit_g2(&hist, 1.0, 0.0).unwrap();
    assert!(naive.tau1_ns < fit.tau1_ns);
}

#[test]
fn background_only_stream_is_uncorrelated_at_every_lag() {
    let rc = emitters::deshelving_fit("ND2").unwrap().coefficients();
    let mut cfg = SimConfig::new(rc, 0.0, 4.0, 99);
    cfg.eta_detect = 0.0;
    cfg.background_rate_cps = 5e5;
    let stream = simulate(&cfg).unwrap();
    let hist = correlate(&stream, 5_000.0, 50.0).unwrap();
    let p = chi_square_p(&hist, |_| 1.0);
    assert!(p > 0.01, "chi-square p = {p:.4}");
    // every lag individually within 5 sigma of unity
    let sigma = 1.0 / hist.norm_constant.sqrt();
    for (i, &g) in hist.normalized.iter().enumerate() {
        assert!(
            (g - 1.0).abs() < 5.0 * sigma,
            "bin {i}: g2 = {g} (sigma = {sigma:.4})"
        );
    }
}

#[test]
fn trace_mean_matches_expected_rate() {
    let rec = emitters::deshelving_fit("NI7").unwrap();
    let rc = rec.coefficients();
    let mut cfg = SimConfig::new(rc, 0.7 * rec.psat_uw, 3.0, 5150);
    cfg.eta_detect = 0.002;
    cfg.background_rate_cps = 2e4;
    let stream = simulate(&cfg).unwrap();
    let trace = bin_timetrace(&stream, 100.0).unwrap();
    let expected = expected_count_rate(&cfg);
    let n = stream.len() as f64;
    let se = expected / n.sqrt();
    assert!(
        (trace.mean_rate() - expected).abs() < 3.0 * se,
        "trace mean {} vs expected {expected} (se {se})",
        trace.mean_rate()
    );
}

#[test]
fn detected_fraction_follows_thinning_probability() {
    let rc = emitters::deshelving_fit("ND3").unwrap().coefficients();
    let mut cfg = SimConfig::new(rc, 40.0, 0.0, 31415);
    cfg.eta_detect = 0.25;
    cfg.duration_s = 0.02;
    let (_, stats) = sivphot::emitter_sim::simulate_with_stats(&cfg).unwrap();
    let expected = cfg.eta_detect * stats.emitted as f64;
    let se = (stats.emitted as f64 * cfg.eta_detect * (1.0 - cfg.eta_detect)).sqrt();
    assert!(
        (stats.detected as f64 - expected).abs() < 4.0 * se,
        "detected {} vs {expected}",
        stats.detected
    );
}

#[test]
fn two_level_histogram_shows_pure_antibunching() {
    // k23 = 0: no bunching anywhere in the histogram
    let rc = sivphot::rate_model::RateCoefficients::new(80.0, 0.0, 0.1, 0.0, 10.0, 1.0).unwrap();
    let mut cfg = SimConfig::new(rc, 40.0, 0.0, 8);
    cfg.eta_detect = 0.3;
    cfg.irf_sigma_ns = 0.0;
    cfg.duration_s = 1.0e6 / expected_count_rate(&cfg);
    let stream = simulate(&cfg).unwrap();
    let shape = shape_from_rates(&rc, 40.0).unwrap();
    assert!(shape.two_level);
    let hist = correlate(&stream, 500.0, 0.5).unwrap();
    let model = G2Shape { amplitude: 0.0, ..shape };
    let p = chi_square_p(&hist, |tau| g2_analytic(&model, tau));
    assert!(p > 0.01, "chi-square p = {p:.4}");
}
