//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;

use sivphot::correlation::{bin_timetrace, correlate as correlate_stream, detect_intermittence};
use sivphot::dipole::{
    collection_efficiency, decay_rates, effective_quantum_yield, pattern_at, DipoleEnvironment,
    Orientation,
};
use sivphot::emitter_sim::{expected_count_rate, simulate as run_sim, SimConfig};
use sivphot::emitters;
use sivphot::inference::{
    constant_rate_prediction, estimate_quantum_efficiency, fit_g2 as fit_g2_hist, fit_power_dependence,
    fit_saturation, shape_curves, G2Fit, PowerFitOptions, PowerSeries,
};
use sivphot::rate_model::{
    sigma_constant_rate_model, steady_state_high_power, CoreRates, RateCoefficients,
};
use sivphot::stream::TimestampStream;

use crate::util::{
    header, load_stream, read_histogram, read_table, resolve_out, write_histogram, write_table,
    Report,
};
use crate::Global;

/// TOML config file with per-subcommand sections; flags win over file values.
pub struct FileConfig(Option<toml::Value>);

impl FileConfig {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self(None)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("read config {}", p.display()))?;
                Ok(Self(Some(text.parse::<toml::Value>().context("parse config")?)))
            }
        }
    }

    fn get<T: DeserializeOwned>(&self, section: &str, key: &str) -> Option<T> {
        self.0
            .as_ref()?
            .get(section)?
            .get(key)
            .cloned()
            .and_then(|v| v.try_into().ok())
    }
}

/// `cli_value.or(config[section][key]).unwrap_or(default)`.
macro_rules! resolve {
    ($cfg:expr, $section:literal, $cli:expr, $key:literal, $default:expr) => {
        $cli.or_else(|| $cfg.get($section, $key)).unwrap_or($default)
    };
    ($cfg:expr, $section:literal, $cli:expr, $key:literal) => {
        $cli.or_else(|| $cfg.get($section, $key))
    };
}

fn rates_from_flags(
    emitter: &Option<String>,
    k21: Option<f64>,
    k23: Option<f64>,
    k31_0: Option<f64>,
    d: Option<f64>,
    c: Option<f64>,
    sigma: Option<f64>,
) -> Result<(RateCoefficients, Option<&'static emitters::DeshelvingFit>)> {
    if let Some(name) = emitter {
        let fit = emitters::deshelving_fit(name)
            .ok_or_else(|| anyhow!("unknown emitter {name:?}; known: ND1-ND4, NI1, NI7"))?;
        let mut rc = fit.coefficients();
        // explicit flags override catalog values
        if let Some(v) = k21 {
            rc.k21 = v;
        }
        if let Some(v) = k23 {
            rc.k23 = v;
        }
        if let Some(v) = k31_0 {
            rc.k31_0 = v;
        }
        if let Some(v) = d {
            rc.d = v;
        }
        if let Some(v) = c {
            rc.c = v;
        }
        if let Some(v) = sigma {
            rc.sigma = v;
        }
        rc.validate()?;
        return Ok((rc, Some(fit)));
    }
    match (k21, k23, k31_0, d, c, sigma) {
        (Some(k21), Some(k23), Some(k31_0), Some(d), Some(c), Some(sigma)) => {
            Ok((RateCoefficients::new(k21, k23, k31_0, d, c, sigma)?, None))
        }
        _ => bail!("specify --emitter NAME or all of --k21 --k23 --k31-0 --d --c --sigma"),
    }
}

// ---------------------------------------------------------------- simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Use a catalog emitter's coefficients (ND1-ND4, NI1, NI7).
    #[arg(long)]
    emitter: Option<String>,
    #[arg(long)]
    k21: Option<f64>,
    #[arg(long)]
    k23: Option<f64>,
    #[arg(long)]
    k31_0: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Excitation power (uW); defaults to the emitter's saturation power.
    #[arg(long)]
    power: Option<f64>,
    /// Acquisition length (s).
    #[arg(long)]
    duration: Option<f64>,
    /// Detection probability per emitted photon.
    #[arg(long)]
    eta_detect: Option<f64>,
    /// Background rate at the detectors (cps).
    #[arg(long)]
    background_cps: Option<f64>,
    /// Per-photon timing jitter (ns).
    #[arg(long)]
    irf_sigma: Option<f64>,
    /// Per-channel dead time (ns).
    #[arg(long)]
    dead_time: Option<f64>,
    /// Probability of routing to channel a.
    #[arg(long)]
    splitter: Option<f64>,
    /// Output stream (binary format).
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the plain-text variant here.
    #[arg(long)]
    text_out: Option<PathBuf>,
}

pub fn simulate(global: &Global, args: SimulateArgs) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let (rates, preset) = rates_from_flags(
        &args.emitter.clone().or_else(|| file.get("simulate", "emitter")),
        resolve!(file, "simulate", args.k21, "k21"),
        resolve!(file, "simulate", args.k23, "k23"),
        resolve!(file, "simulate", args.k31_0, "k31_0"),
        resolve!(file, "simulate", args.d, "d"),
        resolve!(file, "simulate", args.c, "c"),
        resolve!(file, "simulate", args.sigma, "sigma"),
    )?;
    let power = resolve!(file, "simulate", args.power, "power")
        .or(preset.map(|p| p.psat_uw))
        .ok_or_else(|| anyhow!("--power required without --emitter"))?;
    let cfg = SimConfig {
        rates,
        power_uw: power,
        duration_s: resolve!(file, "simulate", args.duration, "duration", 0.1),
        eta_detect: resolve!(file, "simulate", args.eta_detect, "eta_detect", 0.01),
        background_rate_cps: resolve!(file, "simulate", args.background_cps, "background_cps", 0.0),
        irf_sigma_ns: resolve!(file, "simulate", args.irf_sigma, "irf_sigma", 0.35),
        dead_time_ns: resolve!(file, "simulate", args.dead_time, "dead_time", 0.0),
        splitter_ratio: resolve!(file, "simulate", args.splitter, "splitter", 0.5),
        seed: global.seed.or_else(|| file.get("simulate", "seed")).unwrap_or(1),
    };
    let mut stream = run_sim(&cfg)?;
    // outputs embed the fully resolved configuration
    stream.metadata = Some(serde_json::to_string(&cfg)?);
    let out = resolve_out(&global.output_dir, &args.out);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    stream.write_binary(&out)?;
    if let Some(text) = &args.text_out {
        stream.write_text(&resolve_out(&global.output_dir, text))?;
    }
    eprintln!(
        "wrote {} events over {} s to {} (expected rate {:.3e} cps, seed {})",
        stream.len(),
        cfg.duration_s,
        out.display(),
        expected_count_rate(&cfg),
        cfg.seed
    );
    Ok(())
}

// --------------------------------------------------------------- correlate

#[derive(Args)]
pub struct CorrelateArgs {
    /// Input stream (binary or `channel<TAB>time_ns` text).
    #[arg(long, short)]
    input: PathBuf,
    /// Histogram half-range (ns).
    #[arg(long)]
    max_tau: Option<f64>,
    /// Bin width (ns); default tau1/10 when --expected-tau1 is given, else
    /// max_tau/2000.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Antibunching-time scale used for the default bin width.
    #[arg(long)]
    expected_tau1: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

pub fn correlate(global: &Global, args: CorrelateArgs) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let max_tau = resolve!(file, "correlate", args.max_tau, "max_tau")
        .ok_or_else(|| anyhow!("--max-tau required"))?;
    let bin = resolve!(file, "correlate", args.bin_width, "bin_width").unwrap_or_else(|| {
        match args.expected_tau1 {
            Some(t1) => (t1 / 10.0).max(0.001),
            None => max_tau / 2000.0,
        }
    });
    let stream = load_stream(&args.input)?;
    let hist = correlate_stream(&stream, max_tau, bin)?;
    let cfg = serde_json::json!({
        "input": args.input.display().to_string(),
        "max_tau_ns": max_tau,
        "bin_width_ns": bin,
    });
    let out = resolve_out(&global.output_dir, &args.out);
    write_histogram(&out, &header("correlate", &cfg.to_string(), !global.no_timestamp), &hist)?;
    eprintln!(
        "histogram: {} bins of {:.4} ns, {} coincidences -> {}",
        hist.counts.len(),
        hist.bin_width_ns,
        hist.total_counts(),
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------------- trace

#[derive(Args)]
pub struct TraceArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Window length (ms).
    #[arg(long)]
    window: Option<f64>,
    /// Dark threshold as a fraction of the bright level.
    #[arg(long)]
    threshold_fraction: Option<f64>,
    /// Minimum dark-interval length (ms).
    #[arg(long)]
    min_dark: Option<f64>,
    #[arg(long, short)]
    out: PathBuf,
}

pub fn trace(global: &Global, args: TraceArgs) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let window = resolve!(file, "trace", args.window, "window", 100.0);
    let threshold = resolve!(file, "trace", args.threshold_fraction, "threshold_fraction", 0.3);
    let min_dark = resolve!(file, "trace", args.min_dark, "min_dark", 200.0);
    let stream = load_stream(&args.input)?;
    let trace = bin_timetrace(&stream, window)?;
    let cfg = serde_json::json!({
        "input": args.input.display().to_string(),
        "window_ms": window,
        "threshold_fraction": threshold,
        "min_dark_ms": min_dark,
    });
    let out = resolve_out(&global.output_dir, &args.out);
    write_table(
        &out,
        &header("trace", &cfg.to_string(), !global.no_timestamp),
        &["t_ms", "rate_cps"],
        &[("window_ms", format!("{window}"))],
        trace
            .rates_cps
            .iter()
            .enumerate()
            .map(|(i, &r)| vec![(i as f64 + 0.5) * window, r]),
    )?;
    let mut report = Report::default();
    report.push("mean_rate_cps", trace.mean_rate(), None);
    match detect_intermittence(&trace, threshold, min_dark) {
        Ok(rep) => {
            report.note("classification", format!("{:?}", rep.classification).to_lowercase());
            report.push("bright_level_cps", rep.bright_level_cps, None);
            report.push("threshold_cps", rep.threshold_cps, None);
            report.push("dark_intervals", rep.dark_intervals.len() as f64, None);
            for (i, (s, e)) in rep.dark_intervals.iter().enumerate() {
                report.push(&format!("dark_{i}_start_ms"), *s, None);
                report.push(&format!("dark_{i}_end_ms"), *e, None);
            }
        }
        Err(sivphot::correlation::CorrelationError::DegenerateTrace) => {
            report.note("classification", "degenerate");
        }
        Err(e) => return Err(e.into()),
    }
    report.emit(None, global.structured(), "trace", &cfg.to_string(), !global.no_timestamp)?;
    Ok(())
}

// ------------------------------------------------------------------ fit-g2

#[derive(Args)]
pub struct FitG2Args {
    /// Histogram file written by `correlate`.
    #[arg(long, short)]
    input: PathBuf,
    /// Probability that a detected photon stems from the emitter.
    #[arg(long)]
    pe: Option<f64>,
    /// Correlation-axis response width (ns); for a per-photon jitter s this
    /// is sqrt(2) s. Default matches the simulator's default jitter.
    #[arg(long)]
    irf_sigma: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn g2_report(fit: &G2Fit) -> Report {
    let mut report = Report::default();
    report.push("a", fit.amplitude, fit.fit.std_error("a"));
    report.push("tau1_ns", fit.tau1_ns, fit.fit.std_error("tau1"));
    if let Some(t2) = fit.tau2_ns {
        report.push("tau2_ns", t2, fit.fit.std_error("tau2"));
    }
    report.push("delta_g2_zero", fit.delta_g2_zero, None);
    report.push("residual_norm", fit.fit.residual_norm, None);
    report.push("iterations", fit.fit.iterations as f64, None);
    report.note("bunching_resolved", fit.bunching_resolved.to_string());
    report.note("converged", fit.fit.converged.to_string());
    report
}

pub fn fit_g2(global: &Global, args: FitG2Args) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let pe = resolve!(file, "fit-g2", args.pe, "pe", 1.0);
    let default_irf = std::f64::consts::SQRT_2 * sivphot::emitter_sim::DEFAULT_IRF_SIGMA_NS;
    let irf = resolve!(file, "fit-g2", args.irf_sigma, "irf_sigma", default_irf);
    let hist = read_histogram(&args.input)?;
    let fit = fit_g2_hist(&hist, pe, irf)?;
    let cfg = serde_json::json!({
        "input": args.input.display().to_string(),
        "pe": pe,
        "irf_sigma_ns": irf,
    });
    let report = g2_report(&fit);
    let out = args.out.as_ref().map(|p| resolve_out(&global.output_dir, p));
    report.emit(out.as_deref(), global.structured(), "fit-g2", &cfg.to_string(), !global.no_timestamp)
}

// ----------------------------------------------------------------- fit-sat

#[derive(Args)]
pub struct FitSatArgs {
    /// Series file: columns power_uw rate_cps [sigma].
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn series_from_table(path: &Path) -> Result<PowerSeries> {
    let (rows, _) = read_table(path)?;
    if rows.is_empty() {
        bail!("{}: empty series", path.display());
    }
    let powers: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| r.get(1).copied().ok_or_else(|| anyhow!("{}: need two columns", path.display())))
        .collect::<Result<_>>()?;
    if rows.iter().all(|r| r.len() >= 3) {
        let sig: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        Ok(PowerSeries::with_uncertainties(powers, values, sig)?)
    } else {
        Ok(PowerSeries::new(powers, values)?)
    }
}

pub fn fit_sat(global: &Global, args: FitSatArgs) -> Result<()> {
    let data = series_from_table(&args.input)?;
    let fit = fit_saturation(&data)?;
    let cfg = serde_json::json!({ "input": args.input.display().to_string() });
    let mut report = Report::default();
    report.push("i_inf_cps", fit.i_inf(), fit.fit.std_error("i_inf"));
    report.push("psat_uw", fit.psat(), fit.fit.std_error("psat"));
    report.push("c_backgr_cps_per_uw", fit.c_backgr(), fit.fit.std_error("c_backgr"));
    report.push("pe_at_psat", fit.pe(fit.psat()), None);
    report.push("residual_norm", fit.fit.residual_norm, None);
    report.note("converged", fit.fit.converged.to_string());
    report.note("ill_conditioned", fit.fit.ill_conditioned.to_string());
    let out = args.out.as_ref().map(|p| resolve_out(&global.output_dir, p));
    report.emit(out.as_deref(), global.structured(), "fit-sat", &cfg.to_string(), !global.no_timestamp)
}

// --------------------------------------------------------------- fit-power

#[derive(Args)]
pub struct FitPowerArgs {
    /// Amplitude series file (power value [sigma]).
    #[arg(long)]
    a: Option<PathBuf>,
    /// Antibunching-time series file.
    #[arg(long)]
    tau1: Option<PathBuf>,
    /// Bunching-time series file.
    #[arg(long)]
    tau2: Option<PathBuf>,
    /// Timestamp streams, one per power (alternative to the series files).
    #[arg(long, num_args = 1..)]
    streams: Vec<PathBuf>,
    /// Excitation powers (uW) matching --streams.
    #[arg(long, num_args = 1..)]
    powers: Vec<f64>,
    /// Background fraction passed to the per-power correlation fits.
    #[arg(long)]
    pe: Option<f64>,
    /// Correlation-axis response width for the per-power fits (ns).
    #[arg(long)]
    irf_sigma: Option<f64>,
    /// Initial histogram half-range for the per-power fits (ns).
    #[arg(long)]
    max_tau: Option<f64>,
    /// Saturated photon rate (cps): adds a quantum-efficiency estimate.
    #[arg(long)]
    i_inf: Option<f64>,
    #[arg(long)]
    eta_coll: Option<f64>,
    #[arg(long)]
    eta_det_int: Option<f64>,
    /// Saturation power (uW) for the constant-rate overlay slope.
    #[arg(long)]
    psat: Option<f64>,
    /// Write report and curve files under this path prefix.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

/// Time prefix of a stream that keeps the all-pairs sweep near
/// `max_pairs` coincidences for the given window.
fn head_slice(stream: &TimestampStream, max_pairs: f64, window_ns: f64) -> TimestampStream {
    let duration_ns = stream.duration_ns().max(1.0);
    let rb_per_ns = stream.channel_b.len() as f64 / duration_ns;
    let pairs_per_a = (rb_per_ns * 2.0 * window_ns).max(1e-9);
    let keep = ((max_pairs / pairs_per_a) as usize).max(10_000);
    if keep >= stream.channel_a.len() {
        return stream.clone();
    }
    let t_cut = stream.channel_a[keep];
    let b_cut = stream.channel_b.partition_point(|&t| t < t_cut);
    TimestampStream {
        channel_a: stream.channel_a[..keep].to_vec(),
        channel_b: stream.channel_b[..b_cut].to_vec(),
        duration_ps: t_cut,
        metadata: None,
    }
}

/// Correlate one stream with self-refining window and binning, then fit.
///
/// Exploratory passes run on a time slice of the stream (the pair sweep is
/// quadratic in rate); only the settled window sees the full data.
fn fit_stream(stream: &TimestampStream, pe: f64, irf: f64, max_tau: f64) -> Result<G2Fit> {
    let mut window = max_tau;
    let mut bin = (max_tau / 2000.0).max(0.002);
    for _ in 0..2 {
        let slice = head_slice(stream, 2e8, window);
        let hist = correlate_stream(&slice, window, bin)?;
        let f = fit_g2_hist(&hist, pe, irf)?;
        bin = (f.tau1_ns.max(irf) / 10.0).clamp(0.002, window / 300.0);
        if let Some(tau2) = f.tau2_ns {
            // never shrink below a few hundred bins of plateau
            window = (8.0 * tau2).clamp(300.0 * bin, max_tau);
        }
    }
    let hist = correlate_stream(stream, window, bin)?;
    fit_g2_hist(&hist, pe, irf).map_err(Into::into)
}

pub fn fit_power(global: &Global, args: FitPowerArgs) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let pe = resolve!(file, "fit-power", args.pe, "pe", 1.0);
    let default_irf = std::f64::consts::SQRT_2 * sivphot::emitter_sim::DEFAULT_IRF_SIGMA_NS;
    let irf = resolve!(file, "fit-power", args.irf_sigma, "irf_sigma", default_irf);

    let (series_a, series_t1, series_t2, cfg) = if !args.streams.is_empty() {
        if args.streams.len() != args.powers.len() {
            bail!(
                "{} streams but {} powers",
                args.streams.len(),
                args.powers.len()
            );
        }
        if args.streams.len() < 4 {
            bail!("need at least 4 powers, got {}", args.streams.len());
        }
        let max_tau = args
            .max_tau
            .ok_or_else(|| anyhow!("--max-tau required in streams mode"))?;
        let mut order: Vec<usize> = (0..args.powers.len()).collect();
        order.sort_by(|&i, &j| args.powers[i].partial_cmp(&args.powers[j]).unwrap());
        let mut powers = Vec::new();
        let mut vals = [Vec::new(), Vec::new(), Vec::new()];
        let mut errs = [Vec::new(), Vec::new(), Vec::new()];
        for &i in &order {
            let stream = load_stream(&args.streams[i])?;
            let fit = fit_stream(&stream, pe, irf, max_tau)?;
            let tau2 = fit.tau2_ns.ok_or_else(|| {
                anyhow!(
                    "{}: bunching unresolved; cannot place this power in the series",
                    args.streams[i].display()
                )
            })?;
            powers.push(args.powers[i]);
            let e = |name: &str, v: f64| {
                fit.fit.std_error(name).unwrap_or(0.0).max(1e-6 * v.abs())
            };
            vals[0].push(fit.amplitude);
            errs[0].push(e("a", fit.amplitude));
            vals[1].push(fit.tau1_ns);
            errs[1].push(e("tau1", fit.tau1_ns));
            vals[2].push(tau2);
            errs[2].push(e("tau2", tau2));
        }
        let cfg = serde_json::json!({
            "streams": args.streams.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "pe": pe, "irf_sigma_ns": irf, "max_tau_ns": max_tau,
        });
        (
            PowerSeries::with_uncertainties(powers.clone(), vals[0].clone(), errs[0].clone())?,
            PowerSeries::with_uncertainties(powers.clone(), vals[1].clone(), errs[1].clone())?,
            PowerSeries::with_uncertainties(powers, vals[2].clone(), errs[2].clone())?,
            cfg,
        )
    } else {
        let (a, t1, t2) = match (&args.a, &args.tau1, &args.tau2) {
            (Some(a), Some(t1), Some(t2)) => (a, t1, t2),
            _ => bail!("specify --a --tau1 --tau2 series files, or --streams with --powers"),
        };
        let cfg = serde_json::json!({
            "a": a.display().to_string(),
            "tau1": t1.display().to_string(),
            "tau2": t2.display().to_string(),
        });
        (series_from_table(a)?, series_from_table(t1)?, series_from_table(t2)?, cfg)
    };

    let fit = fit_power_dependence(
        &series_a,
        &series_t1,
        &series_t2,
        None,
        &PowerFitOptions::default(),
    )?;
    let mut report = Report::default();
    report.push("k21_mhz", fit.rates.k21, None);
    report.push("k23_mhz", fit.rates.k23, None);
    report.push("k31_0_mhz", fit.rates.k31_0, None);
    report.push("d_mhz", fit.rates.d, None);
    report.push("sigma_mhz_per_uw", fit.sigma, fit.sigma_fit.std_error("sigma"));
    report.push("c_uw", fit.c, fit.c_fit.std_error("c"));
    report.note("c_identifiable", fit.c_identifiable.to_string());
    report.push("outer_iterations", fit.outer_iterations as f64, None);
    let n2 = steady_state_high_power(&fit.coefficients()?).excited;
    report.push("n2_inf", n2, None);
    if let Some(i_inf) = args.i_inf {
        let eta_coll = args.eta_coll.unwrap_or(0.78);
        let eta_det = args.eta_det_int.unwrap_or(0.25);
        let qe = estimate_quantum_efficiency(i_inf, &fit.coefficients()?, eta_det, eta_coll)?;
        report.push("qe", qe, None);
        report.note("qe_inputs", format!("eta_coll={eta_coll} eta_det_int={eta_det}"));
    }

    // curve files: data plus both model overlays
    if let Some(prefix) = &args.out_prefix {
        let prefix = resolve_out(&global.output_dir, prefix);
        let rc = fit.coefficients()?;
        let powers = series_a.powers();
        let lo = powers[0] * 0.5;
        let hi = powers[powers.len() - 1] * 2.0;
        let grid: Vec<f64> =
            (0..240).map(|i| lo * (hi / lo).powf(i as f64 / 239.0)).collect();
        let desh = shape_curves(&rc, &grid)?;
        let k31_const = fit.rates.k31_0 + fit.rates.d;
        let sigma_const = match args.psat {
            Some(psat) => {
                sigma_constant_rate_model(fit.rates.k21, fit.rates.k23, k31_const, psat)
            }
            None => fit.sigma,
        };
        let cons = constant_rate_prediction(
            fit.rates.k21,
            fit.rates.k23,
            k31_const,
            sigma_const,
            &grid,
        )?;
        let head = header("fit-power", &cfg.to_string(), !global.no_timestamp);
        for (name, series, model, cm) in [
            ("a", &series_a, &desh.amplitude, &cons.amplitude),
            ("tau1", &series_t1, &desh.tau1_ns, &cons.tau1_ns),
            ("tau2", &series_t2, &desh.tau2_ns, &cons.tau2_ns),
        ] {
            let data_path = prefix.with_extension(format!("{name}.dat"));
            let sigmas = series.uncertainties();
            write_table(
                &data_path,
                &head,
                &["power_uw", "value", "sigma"],
                &[],
                series.powers().iter().enumerate().map(|(i, &p)| {
                    vec![p, series.values()[i], sigmas.map(|s| s[i]).unwrap_or(0.0)]
                }),
            )?;
            let curve_path = prefix.with_extension(format!("{name}.curve.dat"));
            write_table(
                &curve_path,
                &head,
                &["power_uw", "deshelving_model", "constant_rate_model"],
                &[("constant_rate_k31_mhz", format!("{k31_const}")),
                  ("constant_rate_sigma", format!("{sigma_const}"))],
                grid.iter().enumerate().map(|(i, &p)| vec![p, model[i], cm[i]]),
            )?;
        }
        let report_path = prefix.with_extension(if global.structured() {
            "report.json"
        } else {
            "report.txt"
        });
        report.emit(
            Some(&report_path),
            global.structured(),
            "fit-power",
            &cfg.to_string(),
            !global.no_timestamp,
        )?;
        eprintln!("report and curves written under {}", prefix.display());
        return Ok(());
    }
    report.emit(None, global.structured(), "fit-power", &cfg.to_string(), !global.no_timestamp)
}

// ---------------------------------------------------------------------- qe

#[derive(Args)]
pub struct QeArgs {
    /// Saturated photon rate (cps).
    #[arg(long)]
    i_inf: f64,
    /// Use a catalog emitter's rate coefficients.
    #[arg(long)]
    emitter: Option<String>,
    #[arg(long)]
    k21: Option<f64>,
    #[arg(long)]
    k23: Option<f64>,
    #[arg(long)]
    k31_0: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    eta_coll: Option<f64>,
    #[arg(long)]
    eta_det_int: Option<f64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

pub fn qe(global: &Global, args: QeArgs) -> Result<()> {
    let core = if let Some(name) = &args.emitter {
        emitters::emitter(name)
            .map(|r| r.rates)
            .or_else(|| emitters::deshelving_fit(name).map(|f| f.rates))
            .ok_or_else(|| anyhow!("unknown emitter {name:?}"))?
    } else {
        match (args.k21, args.k23, args.k31_0, args.d) {
            (Some(k21), Some(k23), Some(k31_0), Some(d)) => CoreRates { k21, k23, k31_0, d },
            _ => bail!("specify --emitter NAME or all of --k21 --k23 --k31-0 --d"),
        }
    };
    let rc = RateCoefficients::from_core(core, 1.0, 1.0)?;
    let eta_coll = args.eta_coll.unwrap_or(0.78);
    let eta_det = args.eta_det_int.unwrap_or(0.25);
    let qe = estimate_quantum_efficiency(args.i_inf, &rc, eta_det, eta_coll)?;
    let cfg = serde_json::json!({
        "i_inf_cps": args.i_inf, "eta_coll": eta_coll, "eta_det_int": eta_det,
        "k21": core.k21, "k23": core.k23, "k31_0": core.k31_0, "d": core.d,
    });
    let mut report = Report::default();
    report.push("qe", qe, None);
    report.push("qe_percent", qe * 100.0, None);
    report.push("n2_inf", steady_state_high_power(&rc).excited, None);
    let out = args.out.as_ref().map(|p| resolve_out(&global.output_dir, p));
    report.emit(out.as_deref(), global.structured(), "qe", &cfg.to_string(), !global.no_timestamp)
}

// ------------------------------------------------------------------ dipole

#[derive(Args)]
pub struct DipoleArgs {
    #[arg(long)]
    z_min: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    z_step: Option<f64>,
    /// Vacuum wavelength (nm).
    #[arg(long)]
    wavelength: Option<f64>,
    /// Substrate permittivity, real part.
    #[arg(long)]
    epsilon_re: Option<f64>,
    /// Substrate permittivity, imaginary part.
    #[arg(long)]
    epsilon_im: Option<f64>,
    #[arg(long)]
    na: Option<f64>,
    /// Intrinsic quantum yield entering the effective-yield curve.
    #[arg(long)]
    eta0: Option<f64>,
    /// Height at which the radiation pattern is exported (nm).
    #[arg(long)]
    pattern_z: Option<f64>,
    /// Output path prefix.
    #[arg(long)]
    out_prefix: PathBuf,
}

pub fn dipole(global: &Global, args: DipoleArgs) -> Result<()> {
    let file = FileConfig::load(&global.config)?;
    let z_min = resolve!(file, "dipole", args.z_min, "z_min", 5.0);
    let z_max = resolve!(file, "dipole", args.z_max, "z_max", 300.0);
    let z_step = resolve!(file, "dipole", args.z_step, "z_step", 5.0);
    let wavelength = resolve!(file, "dipole", args.wavelength, "wavelength", 740.0);
    let eps = Complex64::new(
        resolve!(file, "dipole", args.epsilon_re, "epsilon_re", -18.0),
        resolve!(file, "dipole", args.epsilon_im, "epsilon_im", 25.0),
    );
    let na = resolve!(file, "dipole", args.na, "na", 0.8);
    let eta0 = resolve!(file, "dipole", args.eta0, "eta0", 0.05);
    let pattern_z = resolve!(file, "dipole", args.pattern_z, "pattern_z", 80.0);
    if !(z_min > 0.0 && z_max > z_min && z_step > 0.0) {
        bail!("need 0 < z_min < z_max and z_step > 0");
    }
    if z_min < 5.0 {
        eprintln!(
            "note: heights below 5 nm are in the near-field energy-transfer regime; \
             the point-dipole numbers there are qualitative"
        );
    }

    let env_at = |z: f64, o: Orientation| {
        DipoleEnvironment::new(z, wavelength, eps, o, na).map_err(anyhow::Error::from)
    };
    let n = ((z_max - z_min) / z_step).floor() as usize + 1;
    let zs: Vec<f64> = (0..n).map(|i| z_min + i as f64 * z_step).collect();
    let rows: Vec<Vec<f64>> = zs
        .par_iter()
        .map(|&z| -> Result<Vec<f64>> {
            let mut row = vec![z];
            for o in [Orientation::Parallel, Orientation::Perpendicular] {
                let env = env_at(z, o)?;
                let rates = decay_rates(&env)?;
                let coll = collection_efficiency(&env)?;
                let eta = effective_quantum_yield(eta0, &rates);
                row.extend([rates.radiative, rates.nonradiative, rates.total, coll, eta]);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let cfg = serde_json::json!({
        "z_min": z_min, "z_max": z_max, "z_step": z_step,
        "wavelength_nm": wavelength, "epsilon": [eps.re, eps.im],
        "na": na, "eta0": eta0, "pattern_z": pattern_z,
    });
    let head = header("dipole", &cfg.to_string(), !global.no_timestamp);
    let prefix = resolve_out(&global.output_dir, &args.out_prefix);

    write_table(
        &prefix.with_extension("rates.dat"),
        &head,
        &[
            "z_nm",
            "gr_par", "gnr_par", "gtot_par", "coll_par", "eta_par",
            "gr_perp", "gnr_perp", "gtot_perp", "coll_perp", "eta_perp",
        ],
        &[],
        rows.iter().cloned(),
    )?;
    write_table(
        &prefix.with_extension("yield.dat"),
        &head,
        &["z_nm", "eta_par", "eta_perp"],
        &[("eta0", format!("{eta0}"))],
        rows.iter().map(|r| vec![r[0], r[5], r[10]]),
    )?;
    write_table(
        &prefix.with_extension("collection.dat"),
        &head,
        &["z_nm", "coll_par", "coll_perp"],
        &[("na", format!("{na}"))],
        rows.iter().map(|r| vec![r[0], r[4], r[9]]),
    )?;

    // far-field pattern at one height, free-space curves for comparison
    let par = env_at(pattern_z, Orientation::Parallel)?;
    let perp = env_at(pattern_z, Orientation::Perpendicular)?;
    let vac = Complex64::new(1.0, 0.0);
    let free_par = DipoleEnvironment::new(pattern_z, wavelength, vac, Orientation::Parallel, na)?;
    let free_perp =
        DipoleEnvironment::new(pattern_z, wavelength, vac, Orientation::Perpendicular, na)?;
    let m = 361;
    write_table(
        &prefix.with_extension("pattern.dat"),
        &head,
        &["theta_rad", "par", "perp", "free_par", "free_perp"],
        &[("z_nm", format!("{pattern_z}"))],
        (0..m).map(|i| {
            let t = i as f64 / (m - 1) as f64 * std::f64::consts::FRAC_PI_2;
            vec![
                t,
                pattern_at(&par, t),
                pattern_at(&perp, t),
                pattern_at(&free_par, t),
                pattern_at(&free_perp, t),
            ]
        }),
    )?;
    eprintln!("dipole sweep ({n} heights) written under {}", prefix.display());
    Ok(())
}

// -------------------------------------------------------- reproduce-tables

#[derive(Args)]
pub struct ReproduceArgs {
    /// Also export the yield/collection/pattern curves here.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
}

pub fn reproduce_tables(global: &Global, args: ReproduceArgs) -> Result<()> {
    let mut failures = 0usize;
    let mut check = |label: String, got: f64, want: f64, tol: f64| {
        let ok = (got - want).abs() <= tol;
        if !ok {
            failures += 1;
        }
        println!(
            "  {} {label}: {got:.4} (reference {want:.2}, tol ±{tol})",
            if ok { "ok  " } else { "FAIL" }
        );
    };

    println!("population and quantum-efficiency dataset (14 emitters):");
    for rec in emitters::catalog() {
        let rc = RateCoefficients::from_core(rec.rates, 1.0, 1.0)?;
        let n2 = steady_state_high_power(&rc).excited;
        check(format!("{} n2_inf", rec.name), n2, rec.n2_inf, 0.01);
        let i_inf = rec.i_inf_mcps * 1e6;
        let qe_par = estimate_quantum_efficiency(i_inf, &rc, 0.25, 0.78)? * 100.0;
        check(format!("{} qe_par %", rec.name), qe_par, rec.qe_parallel_pct, 0.2);
        let qe_perp = estimate_quantum_efficiency(i_inf, &rc, 0.25, 0.28)? * 100.0;
        check(format!("{} qe_perp %", rec.name), qe_perp, rec.qe_perpendicular_pct, 0.2);
    }

    println!("dipole above iridium (740 nm, NA 0.8):");
    let par = collection_efficiency(&DipoleEnvironment::above_iridium(
        75.0,
        Orientation::Parallel,
    )?)?;
    check("collection par @75nm".into(), par, 0.78, 0.03);
    let perp = collection_efficiency(&DipoleEnvironment::above_iridium(
        75.0,
        Orientation::Perpendicular,
    )?)?;
    check("collection perp @75nm".into(), perp, 0.28, 0.03);
    let mut peak = 0.0_f64;
    for z in (20..=300).step_by(4) {
        let rates = decay_rates(&DipoleEnvironment::above_iridium(
            z as f64,
            Orientation::Parallel,
        )?)?;
        peak = peak.max(effective_quantum_yield(0.05, &rates));
    }
    println!(
        "  {} effective yield peak {peak:.4} exceeds eta0 = 0.05",
        if peak > 0.05 { "ok  " } else { "FAIL" }
    );
    if peak <= 0.05 {
        failures += 1;
    }

    println!("de-shelving vs constant-rate bunching-time contrast at 0.01 Psat:");
    for rec in emitters::deshelving_fits() {
        if rec.rates.d <= 10.0 * rec.rates.k31_0 {
            continue;
        }
        let p = 0.01 * rec.psat_uw;
        let desh = sivphot::rate_model::shape_from_rates(&rec.coefficients(), p)?;
        let k31_inf = rec.rates.k31_0 + rec.rates.d;
        let sc = sigma_constant_rate_model(rec.rates.k21, rec.rates.k23, k31_inf, rec.psat_uw);
        let cons = constant_rate_prediction(rec.rates.k21, rec.rates.k23, k31_inf, sc, &[p])?;
        let ratio = desh.tau2_ns / cons.tau2_ns[0];
        println!(
            "  {} {} tau2 ratio {ratio:.0}x",
            if ratio > 10.0 { "ok  " } else { "FAIL" },
            rec.name
        );
        if ratio <= 10.0 {
            failures += 1;
        }
    }

    if let Some(prefix) = args.out_prefix {
        dipole(
            global,
            DipoleArgs {
                z_min: Some(5.0),
                z_max: Some(300.0),
                z_step: Some(2.5),
                wavelength: None,
                epsilon_re: None,
                epsilon_im: None,
                na: None,
                eta0: None,
                pattern_z: Some(80.0),
                out_prefix: prefix,
            },
        )?;
    }
    if failures > 0 {
        bail!("{failures} reproduction checks failed");
    }
    println!("all reproduction checks passed");
    Ok(())
}
