//! Reproduction suite: every criterion prints one PASS line (run with
//! `cargo test -p sivphot --test acceptance -- --nocapture` to see them).
//!
//! Criteria 1-2 reproduce the published population and quantum-efficiency
//! tables, 3-4 the dipole-above-iridium emission characteristics, 5 the
//! full synthetic round trip (simulate -> correlate -> fit-g2 -> fit-power),
//! 6 the de-shelving vs constant-rate contrast, 7 the analytic consistency
//! suite, and 8 the excitation calibration constants.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sivphot::correlation::correlate;
use sivphot::dipole::{
    collection_efficiency, decay_rates, effective_quantum_yield, nonradiative_dissipation,
    DipoleEnvironment, Orientation,
};
use sivphot::emitter_sim::{expected_count_rate, simulate, SimConfig};
use sivphot::emitters::{self, DeshelvingFit};
use sivphot::inference::{
    estimate_quantum_efficiency, fit_g2, fit_power_dependence, PowerFitOptions, PowerSeries,
};
use sivphot::rate_model::{
    absorption_cross_section, g2_analytic, limits_from_rates, power_to_photon_flux,
    rates_from_limits, shape_from_rates, sigma_constant_rate_model, steady_state,
    steady_state_high_power, PumpState, RateCoefficients,
};

fn coefficients_for(rates: sivphot::rate_model::CoreRates) -> RateCoefficients {
    // sigma and c do not enter the infinite-power populations
    RateCoefficients::from_core(rates, 1.0, 1.0).unwrap()
}

#[test]
fn criterion_1_steady_state_population_table() {
    let mut worst = 0.0_f64;
    for rec in emitters::catalog() {
        let rc = coefficients_for(rec.rates);
        let n2 = steady_state_high_power(&rc).excited;
        let err = (n2 - rec.n2_inf).abs();
        worst = worst.max(err);
        assert!(
            err <= 0.01,
            "criterion 1: FAIL — {} n2_inf {:.4} vs published {:.2}",
            rec.name,
            n2,
            rec.n2_inf
        );
        // the infinite-power limit is the supremum of the finite-power curve
        let near = steady_state(&rc, 1e9).excited;
        assert!((near - n2).abs() < 1e-3);
    }
    println!(
        "criterion 1: PASS — 14/14 high-power populations within ±0.01 (worst |Δ| = {worst:.4})"
    );
}

#[test]
fn criterion_2_quantum_efficiency_table() {
    let mut worst = 0.0_f64;
    for rec in emitters::catalog() {
        let rc = coefficients_for(rec.rates);
        let i_inf = rec.i_inf_mcps * 1e6;
        let par = estimate_quantum_efficiency(i_inf, &rc, 0.25, 0.78).unwrap() * 100.0;
        let perp = estimate_quantum_efficiency(i_inf, &rc, 0.25, 0.28).unwrap() * 100.0;
        for (got, want, which) in [
            (par, rec.qe_parallel_pct, "parallel"),
            (perp, rec.qe_perpendicular_pct, "perpendicular"),
        ] {
            let err = (got - want).abs();
            worst = worst.max(err);
            assert!(
                err <= 0.2,
                "criterion 2: FAIL — {} {which} qe {got:.2}% vs published {want:.1}%",
                rec.name
            );
        }
    }
    println!(
        "criterion 2: PASS — 28/28 quantum efficiencies within ±0.2 pp (worst |Δ| = {worst:.3} pp)"
    );
}

#[test]
fn criterion_3_dipole_collection_and_power_balance() {
    let env = |z: f64, o: Orientation| DipoleEnvironment::above_iridium(z, o).unwrap();

    // collection efficiency anchors at 75 nm
    let par75 = collection_efficiency(&env(75.0, Orientation::Parallel)).unwrap();
    let perp75 = collection_efficiency(&env(75.0, Orientation::Perpendicular)).unwrap();
    assert!(
        (par75 - 0.78).abs() <= 0.03,
        "criterion 3: FAIL — parallel collection {par75:.4} vs 0.78 ± 0.03"
    );
    assert!(
        (perp75 - 0.28).abs() <= 0.03,
        "criterion 3: FAIL — perpendicular collection {perp75:.4} vs 0.28 ± 0.03"
    );

    // flatness over the 40-100 nm emitter range; the published "within 10%"
    // is in collection-efficiency percentage points (the relative spread of
    // the perpendicular curve is larger and is printed for reference)
    let mut spreads = Vec::new();
    for o in [Orientation::Parallel, Orientation::Perpendicular] {
        let vals: Vec<f64> = (40..=100)
            .step_by(2)
            .map(|z| collection_efficiency(&env(z as f64, o)).unwrap())
            .collect();
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        let central = 0.5 * (max + min);
        let spread_pp = 100.0 * (max - min);
        let spread_rel = 100.0 * (max - min) / central;
        assert!(
            (max - central) * 100.0 <= 5.0 && (central - min) * 100.0 <= 5.0,
            "criterion 3: FAIL — {o:?} collection spans {spread_pp:.1} points over 40-100 nm"
        );
        spreads.push((o, spread_pp, spread_rel));
    }

    // the radiative enhancement of a parallel dipole stays modest
    let mut max_gr: f64 = 0.0;
    for z in (10..=300).step_by(2) {
        let r = decay_rates(&env(z as f64, Orientation::Parallel)).unwrap();
        max_gr = max_gr.max(r.radiative);
    }
    assert!(max_gr <= 2.2, "criterion 3: FAIL — max radiative rate {max_gr:.3} > 2.2");

    // three quadrature routes agree: Sommerfeld total vs far field + dissipation
    let mut worst_balance = 0.0_f64;
    for z in [10.0, 40.0, 75.0, 80.0, 100.0, 200.0] {
        for o in [Orientation::Parallel, Orientation::Perpendicular] {
            let e = env(z, o);
            let r = decay_rates(&e).unwrap();
            let nr = nonradiative_dissipation(&e).unwrap();
            let balance = ((r.radiative + nr - r.total) / r.total).abs();
            worst_balance = worst_balance.max(balance);
            assert!(
                balance <= 1e-3,
                "criterion 3: FAIL — power balance at z = {z} nm {o:?} off by {balance:.2e}"
            );
        }
    }
    println!(
        "criterion 3: PASS — collection 75 nm par {par75:.3} / perp {perp75:.3}; spreads over \
         40-100 nm: {:.1} pp ({:.1}% rel) par, {:.1} pp ({:.1}% rel) perp; max gamma_r par \
         {max_gr:.3} <= 2.2; power balance worst {worst_balance:.1e}",
        spreads[0].1, spreads[0].2, spreads[1].1, spreads[1].2
    );
}

#[test]
fn criterion_4_effective_quantum_yield_shape() {
    let eta0 = 0.05;
    let eta_at = |z: f64, o: Orientation| {
        let rates = decay_rates(&DipoleEnvironment::above_iridium(z, o).unwrap()).unwrap();
        effective_quantum_yield(eta0, &rates)
    };
    let mut best = (0.0_f64, 0.0_f64);
    for z in (20..=300).step_by(2) {
        let eta = eta_at(z as f64, Orientation::Parallel);
        if eta > best.0 {
            best = (eta, z as f64);
        }
    }
    assert!(
        best.0 > eta0,
        "criterion 4: FAIL — parallel effective yield never exceeds eta0 (max {:.4})",
        best.0
    );
    for o in [Orientation::Parallel, Orientation::Perpendicular] {
        let near = eta_at(5.0, o);
        let far = eta_at(20.0, o);
        assert!(
            near < far / 3.0 && near < 0.01,
            "criterion 4: FAIL — {o:?} yield not quenched near contact ({near:.4})"
        );
    }
    println!(
        "criterion 4: PASS — parallel yield peaks at {:.4} (z = {:.0} nm) above eta0 = 0.05; \
         both orientations quench toward z = 5 nm",
        best.0, best.1
    );
}

/// One synthetic power point: simulate, correlate, fit.
fn battery_point(
    rec: &DeshelvingFit,
    frac: f64,
    eta_floor: f64,
    seed: u64,
) -> (f64, [f64; 3], [f64; 3], usize) {
    let rc = rec.coefficients();
    let power = frac * rec.psat_uw;
    let predicted = shape_from_rates(&rc, power).unwrap();
    let r_emit = rc.k21 * steady_state(&rc, power).excited * 1e6;

    let detected_target = 1.0e7;
    let window_ns = 5.0 * predicted.tau2_ns;
    let window_s = window_ns * 1e-9;
    // trade trajectory length against pair count; low powers get a floor so
    // the zero-power de-shelving limit stays well measured
    let eta_balanced = (2.2e7 / (detected_target * r_emit * window_s)).sqrt();
    let eta = eta_balanced.clamp(eta_floor, 0.8);

    let mut cfg = SimConfig::new(rc, power, 0.0, seed);
    cfg.eta_detect = eta;
    cfg.irf_sigma_ns = 0.35;
    cfg.duration_s = 1.02 * detected_target / (eta * r_emit);
    let stream = simulate(&cfg).unwrap();
    let detected = stream.len();
    assert!(
        detected as f64 >= detected_target,
        "{} at {frac} Psat: only {detected} photons",
        rec.name
    );

    let pair_sigma = std::f64::consts::SQRT_2 * cfg.irf_sigma_ns;
    let bin = (predicted.tau1_ns.max(pair_sigma) / 8.0).max(0.002);
    let hist = correlate(&stream, window_ns, bin).unwrap();
    let fit = fit_g2(&hist, 1.0, pair_sigma).unwrap();
    assert!(fit.bunching_resolved, "{} at {frac} Psat: bunching unresolved", rec.name);
    let tau2 = fit.tau2_ns.unwrap();
    let err = |name: &str, v: f64| fit.fit.std_error(name).unwrap().max(1e-6 * v.abs());
    (
        power,
        [fit.amplitude, fit.tau1_ns, tau2],
        [err("a", fit.amplitude), err("tau1", fit.tau1_ns), err("tau2", tau2)],
        detected,
    )
}

#[test]
fn criterion_5_round_trip_battery() {
    let t0 = std::time::Instant::now();
    let fracs = [0.05, 0.065, 0.09, 0.15, 0.4, 1.2, 3.5, 10.0];
    // (row, low-power thinning floor): rows whose k31_0 sits far below the
    // de-shelving rate at the lowest measured power need better statistics
    let rows = [("ND2", 0.5), ("ND3", 0.5), ("NI7", 0.02)];
    for (row_idx, (name, low_floor)) in rows.iter().enumerate() {
        let rec = emitters::deshelving_fit(name).unwrap();
        let mut powers = Vec::new();
        let mut vals = [Vec::new(), Vec::new(), Vec::new()];
        let mut errs = [Vec::new(), Vec::new(), Vec::new()];
        let mut photons = 0usize;
        for (i, &frac) in fracs.iter().enumerate() {
            let floor = if i < 3 { *low_floor } else { 0.02 };
            let seed = 0x51F0_0000 + (row_idx as u64) * 1000 + i as u64;
            let (p, v, e, det) = battery_point(rec, frac, floor, seed);
            powers.push(p);
            for k in 0..3 {
                vals[k].push(v[k]);
                errs[k].push(e[k]);
            }
            photons += det;
        }
        let series: Vec<PowerSeries> = (0..3)
            .map(|k| {
                PowerSeries::with_uncertainties(
                    powers.clone(),
                    vals[k].clone(),
                    errs[k].clone(),
                )
                .unwrap()
            })
            .collect();
        let fit = fit_power_dependence(
            &series[0],
            &series[1],
            &series[2],
            None,
            &PowerFitOptions::default(),
        )
        .unwrap_or_else(|e| panic!("criterion 5: FAIL — {name}: {e}"));

        let checks = [
            ("k21", fit.rates.k21, rec.rates.k21, 0.10),
            ("sigma", fit.sigma, rec.sigma, 0.10),
            ("k23", fit.rates.k23, rec.rates.k23, 0.20),
            ("d", fit.rates.d, rec.rates.d, 0.20),
            ("k31_0", fit.rates.k31_0, rec.rates.k31_0, 0.30),
            ("c", fit.c, rec.c, 0.50),
        ];
        let mut summary = String::new();
        for (what, got, want, tol) in checks {
            let rel = (got - want).abs() / want;
            assert!(
                rel <= tol,
                "criterion 5: FAIL — {name} {what} {got:.4} vs {want} ({:.1}% > {:.0}%)",
                100.0 * rel,
                100.0 * tol
            );
            summary.push_str(&format!("{what} {:+.1}% ", 100.0 * (got / want - 1.0)));
        }
        println!(
            "criterion 5: {name} recovered [{summary}] from {photons} photons over 8 powers"
        );
    }
    println!(
        "criterion 5: PASS — ND2/ND3/NI7 round trips within tolerances in {:.0} s",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_6_model_contrast_at_low_power() {
    let mut lines = Vec::new();
    for rec in emitters::deshelving_fits() {
        if rec.rates.d <= 10.0 * rec.rates.k31_0 {
            continue;
        }
        let p = 0.01 * rec.psat_uw;
        let desh = shape_from_rates(&rec.coefficients(), p).unwrap();
        // constant-rate comparison pinned to the high-power de-shelving rate
        let k31_inf = rec.rates.k31_0 + rec.rates.d;
        let sigma_const =
            sigma_constant_rate_model(rec.rates.k21, rec.rates.k23, k31_inf, rec.psat_uw);
        let rc_const = RateCoefficients::new(
            rec.rates.k21,
            rec.rates.k23,
            k31_inf,
            0.0,
            1.0,
            sigma_const,
        )
        .unwrap();
        let cons = shape_from_rates(&rc_const, p).unwrap();
        let ratio = desh.tau2_ns / cons.tau2_ns;
        assert!(
            ratio > 10.0,
            "criterion 6: FAIL — {} tau2 contrast only {ratio:.1}x at 0.01 Psat",
            rec.name
        );
        lines.push(format!("{} {:.0}x", rec.name, ratio));
    }
    assert!(lines.len() >= 5, "criterion 6: expected at least five qualifying rows");
    println!(
        "criterion 6: PASS — de-shelving vs constant-rate bunching-time contrast at 0.01 Psat: {}",
        lines.join(", ")
    );
}

#[test]
fn criterion_7_analytic_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC7);
    let mut worst_eig = 0.0_f64;
    let mut worst_rt = 0.0_f64;
    for _ in 0..1000 {
        let rc = RateCoefficients::new(
            rng.gen_range(50.0..6000.0),
            rng.gen_range(0.05..200.0),
            rng.gen_range(0.02..5.0),
            rng.gen_range(0.0..120.0),
            rng.gen_range(0.5..3000.0),
            rng.gen_range(0.5..20.0),
        )
        .unwrap();
        let power = rng.gen_range(0.0..2000.0);
        let shape = shape_from_rates(&rc, power).unwrap();

        // dense eigensolve of the explicitly assembled generator
        let pump = PumpState::at(&rc, power);
        let m = Matrix3::new(
            -pump.k12,
            rc.k21,
            pump.k31,
            pump.k12,
            -(rc.k21 + rc.k23),
            0.0,
            0.0,
            rc.k23,
            -pump.k31,
        );
        let mut eig: Vec<f64> = m.complex_eigenvalues().iter().map(|e| -e.re).collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rel2 = ((eig[1] - 1e3 / shape.tau2_ns) / (1e3 / shape.tau2_ns)).abs();
        let rel1 = ((eig[2] - 1e3 / shape.tau1_ns) / (1e3 / shape.tau1_ns)).abs();
        worst_eig = worst_eig.max(rel1).max(rel2);
        assert!(rel1 <= 1e-9 && rel2 <= 1e-9, "criterion 7: FAIL — eigenvalue gap {rel1:.2e}/{rel2:.2e}");

        assert_eq!(g2_analytic(&shape, 0.0), 0.0, "criterion 7: FAIL — g2(0) != 0");

        let lv = limits_from_rates(&rc.core());
        let back = rates_from_limits(&lv).unwrap();
        for (got, want) in [
            (back.k21, rc.k21),
            (back.k23, rc.k23),
            (back.k31_0, rc.k31_0),
            (back.d, rc.d),
        ] {
            let rel = (got - want).abs() / want.max(1e-12);
            worst_rt = worst_rt.max(rel);
            assert!(rel <= 1e-9, "criterion 7: FAIL — round trip {got} vs {want}");
        }
    }
    println!(
        "criterion 7: PASS — 1000 random sets: eigenvalue agreement worst {worst_eig:.1e}, \
         limit round-trip worst {worst_rt:.1e}, g2(0) exactly zero"
    );
}

#[test]
fn criterion_8_excitation_calibration() {
    // the published flux values are two-significant-figure roundings; the
    // exact products are compared against the full-precision values and the
    // printed figures against the rounded ones
    let hi = power_to_photon_flux(692.0, 695.0).unwrap();
    assert!((hi - 2.05524e23).abs() / 2.05524e23 < 0.01);
    assert_eq!(format!("{:.1e}", hi / 1e22), "2.1e1".to_string());
    let lo = power_to_photon_flux(14.3, 671.0).unwrap();
    assert!((lo - 4.1e21).abs() / 4.1e21 < 0.01);

    let big = absorption_cross_section(12.0, 671.0).unwrap();
    assert!((big - 4.2e-14).abs() / 4.2e-14 < 0.02, "sigma_abs {big:.3e} vs 4.2e-14");
    let small = absorption_cross_section(4.2, 695.0).unwrap();
    assert!((small - 1.4e-14).abs() / 1.4e-14 < 0.02, "sigma_abs {small:.3e} vs 1.4e-14");
    println!(
        "criterion 8: PASS — fluxes {hi:.3e} / {lo:.3e} photons/s/cm^2, cross sections \
         {big:.2e} / {small:.2e} cm^2 at the published extremes"
    );
}

/// The count-rate chain behind criteria 1-2 stays consistent with the
/// simulator's expected rate.
#[test]
fn expected_rate_reproduces_saturated_brightness() {
    let rec = emitters::emitter("ND1").unwrap();
    let rc = coefficients_for(rec.rates);
    let mut cfg = SimConfig::new(rc, 1e9, 1.0, 0);
    cfg.eta_detect = 0.25 * 0.78 * 0.008;
    let rate = expected_count_rate(&cfg);
    assert!((rate / 1e6 - rec.i_inf_mcps).abs() < 0.02);
}
