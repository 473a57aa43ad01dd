//! Seeded Monte Carlo simulation of the pumped three-level emitter and its
//! detection chain.
//!
//! The emitter trajectory is a continuous-time Markov chain over the three
//! levels with exponential waiting times for the four transitions. Every
//! radiative 2 -> 1 transition emits a photon; detection applies thinning
//! (collection times detector efficiency folded into one probability),
//! Gaussian timing jitter, a beam-splitter routing onto two channels,
//! uncorrelated Poisson background and per-channel dead time.
//!
//! Each random ingredient draws from its own counter-based substream of one
//! seeded ChaCha generator, so runs are reproducible and substreams (e.g.
//! background generation) can be regenerated independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rate_model::{steady_state, RateCoefficients};
use crate::stream::{TimestampStream, PS_PER_NS};

/// Default detector timing jitter (ns, one standard deviation per photon).
pub const DEFAULT_IRF_SIGMA_NS: f64 = 0.35;

#[derive(Debug, Error)]
pub enum EmitterSimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Everything a simulation run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rates: RateCoefficients,
    /// Excitation power (uW).
    pub power_uw: f64,
    /// Wall-clock acquisition length (s).
    pub duration_s: f64,
    /// Probability that an emitted photon is recorded (collection times
    /// internal detection efficiency; a quantum efficiency below one can be
    /// folded in here as well, the photon record cannot tell the difference).
    pub eta_detect: f64,
    /// Uncorrelated background at the detectors (cps, both channels summed).
    pub background_rate_cps: f64,
    /// Per-photon Gaussian timing jitter (ns). Note that the correlation of
    /// two jittered photons is smeared by sqrt(2) times this value.
    pub irf_sigma_ns: f64,
    /// Non-paralyzable per-channel dead time (ns).
    pub dead_time_ns: f64,
    /// Probability that a recorded photon lands on channel a.
    pub splitter_ratio: f64,
    pub seed: u64,
}

impl SimConfig {
    /// A config with ideal detection: unit efficiency, no background, the
    /// default timing jitter, no dead time, balanced splitter.
    pub fn new(rates: RateCoefficients, power_uw: f64, duration_s: f64, seed: u64) -> Self {
        Self {
            rates,
            power_uw,
            duration_s,
            eta_detect: 1.0,
            background_rate_cps: 0.0,
            irf_sigma_ns: DEFAULT_IRF_SIGMA_NS,
            dead_time_ns: 0.0,
            splitter_ratio: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), EmitterSimError> {
        self.rates
            .validate()
            .map_err(|e| EmitterSimError::InvalidConfig(e.to_string()))?;
        let probs = [("eta_detect", self.eta_detect), ("splitter_ratio", self.splitter_ratio)];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(EmitterSimError::InvalidConfig(format!(
                    "{name} = {p} must lie in [0, 1]"
                )));
            }
        }
        let nonneg = [
            ("power_uw", self.power_uw),
            ("duration_s", self.duration_s),
            ("background_rate_cps", self.background_rate_cps),
            ("irf_sigma_ns", self.irf_sigma_ns),
            ("dead_time_ns", self.dead_time_ns),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(EmitterSimError::InvalidConfig(format!(
                    "{name} = {v} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// Aggregate trajectory statistics of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimStats {
    /// Fraction of simulated time spent in (ground, excited, shelved).
    pub occupancy: [f64; 3],
    pub transitions: u64,
    /// Photons emitted on the radiative transition.
    pub emitted: u64,
    /// Photons surviving thinning and landing inside the acquisition window.
    pub detected: u64,
    /// Background counts added.
    pub background: u64,
}

#[derive(Clone, Copy, PartialEq)]
enum Level {
    Ground,
    Excited,
    Shelved,
}

/// Run the simulation, returning the stream only.
pub fn simulate(cfg: &SimConfig) -> Result<TimestampStream, EmitterSimError> {
    simulate_with_stats(cfg).map(|(s, _)| s)
}

/// Run the simulation, also returning occupancy and count statistics.
pub fn simulate_with_stats(cfg: &SimConfig) -> Result<(TimestampStream, SimStats), EmitterSimError> {
    cfg.validate()?;
    let mut stats = SimStats::default();
    let duration_ns = cfg.duration_s * 1e9;
    let duration_ps = (duration_ns * PS_PER_NS).round() as u64;

    // independent substreams: trajectory, detection/routing, jitter, background
    let substream = |n: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(n);
        rng
    };
    let mut traj_rng = substream(0);
    let mut det_rng = substream(1);
    let mut jit_rng = substream(2);
    let mut bg_rng = substream(3);

    // per-ns rates
    let k12 = cfg.rates.sigma * cfg.power_uw * 1e-3;
    let k21 = cfg.rates.k21 * 1e-3;
    let k23 = cfg.rates.k23 * 1e-3;
    let k31 = crate::rate_model::deshelving_rate(&cfg.rates, cfg.power_uw) * 1e-3;

    let mut channel_a: Vec<u64> = Vec::new();
    let mut channel_b: Vec<u64> = Vec::new();

    let jitter = if cfg.irf_sigma_ns > 0.0 {
        Some(Normal::new(0.0, cfg.irf_sigma_ns).expect("validated"))
    } else {
        None
    };
    let record = |t_ns: f64,
                      route_rng: &mut ChaCha8Rng,
                      jit_rng: &mut ChaCha8Rng,
                      a: &mut Vec<u64>,
                      b: &mut Vec<u64>|
     -> bool {
        let t = match jitter {
            Some(n) => t_ns + n.sample(jit_rng),
            None => t_ns,
        };
        if !(0.0..duration_ns).contains(&t) {
            return false;
        }
        let tick = (t * PS_PER_NS).round() as u64;
        if tick >= duration_ps {
            return false;
        }
        if route_rng.gen::<f64>() < cfg.splitter_ratio {
            a.push(tick);
        } else {
            b.push(tick);
        }
        true
    };

    // emitter trajectory
    if duration_ns > 0.0 {
        let exit_excited = Exp::new(k21 + k23).expect("k21 > 0");
        let exit_shelved = Exp::new(k31).expect("k31_0 > 0");
        let branch_shelve = k23 / (k21 + k23);
        let mut t = 0.0_f64;
        let mut level = Level::Ground;
        loop {
            let (dwell, next) = match level {
                Level::Ground => {
                    if k12 <= 0.0 {
                        // no pumping: stay dark until the end of the run
                        stats.occupancy[0] += duration_ns - t;
                        break;
                    }
                    (Exp::new(k12).unwrap().sample(&mut traj_rng), Level::Excited)
                }
                Level::Excited => {
                    let next = if traj_rng.gen::<f64>() < branch_shelve {
                        Level::Shelved
                    } else {
                        Level::Ground
                    };
                    (exit_excited.sample(&mut traj_rng), next)
                }
                Level::Shelved => (exit_shelved.sample(&mut traj_rng), Level::Ground),
            };
            let t_next = t + dwell;
            let idx = match level {
                Level::Ground => 0,
                Level::Excited => 1,
                Level::Shelved => 2,
            };
            if t_next >= duration_ns {
                stats.occupancy[idx] += duration_ns - t;
                break;
            }
            stats.occupancy[idx] += dwell;
            stats.transitions += 1;
            if level == Level::Excited && next == Level::Ground {
                stats.emitted += 1;
                if det_rng.gen::<f64>() < cfg.eta_detect
                    && record(t_next, &mut det_rng, &mut jit_rng, &mut channel_a, &mut channel_b)
                {
                    stats.detected += 1;
                }
            }
            t = t_next;
            level = next;
        }
        for o in &mut stats.occupancy {
            *o /= duration_ns;
        }
    }

    // uncorrelated background as a homogeneous Poisson process
    if cfg.background_rate_cps > 0.0 && duration_ns > 0.0 {
        let gap = Exp::new(cfg.background_rate_cps * 1e-9).expect("positive rate");
        let mut t = gap.sample(&mut bg_rng);
        while t < duration_ns {
            let tick = (t * PS_PER_NS).round() as u64;
            if tick < duration_ps {
                if bg_rng.gen::<f64>() < cfg.splitter_ratio {
                    channel_a.push(tick);
                } else {
                    channel_b.push(tick);
                }
                stats.background += 1;
            }
            t += gap.sample(&mut bg_rng);
        }
    }

    let dead_ticks = (cfg.dead_time_ns * PS_PER_NS).round() as u64;
    for ch in [&mut channel_a, &mut channel_b] {
        ch.sort_unstable();
        // exact tick collisions are dropped so channels stay strictly increasing
        ch.dedup();
        if dead_ticks > 0 {
            let mut last: Option<u64> = None;
            ch.retain(|&t| match last {
                Some(prev) if t - prev < dead_ticks => false,
                _ => {
                    last = Some(t);
                    true
                }
            });
        }
    }

    let stream = TimestampStream {
        channel_a,
        channel_b,
        duration_ps,
        metadata: None,
    };
    Ok((stream, stats))
}

/// Expected detected rate (cps): thinned radiative rate of the stationary
/// emitter plus background.
pub fn expected_count_rate(cfg: &SimConfig) -> f64 {
    let ss = steady_state(&cfg.rates, cfg.power_uw);
    cfg.eta_detect * cfg.rates.k21 * ss.excited * 1e6 + cfg.background_rate_cps
}
