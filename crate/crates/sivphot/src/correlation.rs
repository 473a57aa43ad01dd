//! Correlation histograms, binned fluorescence time traces and
//! intermittence detection from timestamp streams.

use thiserror::Error;

use crate::math::median;
use crate::stream::{TimestampStream, PS_PER_NS};

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("channel {0} has no events")]
    EmptyChannel(char),
    #[error("invalid binning: {0}")]
    InvalidBinning(String),
    #[error("degenerate trace: no window rises above the floor")]
    DegenerateTrace,
}

/// Cross-correlation histogram between the two channels.
///
/// Bins are uniform and centered on integer multiples of the (picosecond
/// quantized) bin width, symmetric about zero delay: bin `m` covers
/// `[(m - 1/2) w, (m + 1/2) w)`. A pair contributes at the delay
/// `t_b - t_a`, so the histogram covers both signs without double counting.
#[derive(Debug, Clone)]
pub struct G2Histogram {
    /// Effective bin width (ns), quantized to an integer picosecond count.
    pub bin_width_ns: f64,
    /// Raw coincidence counts, `2 * half_bins + 1` entries.
    pub counts: Vec<u64>,
    /// `counts / norm_constant`.
    pub normalized: Vec<f64>,
    /// Expected coincidences per bin for uncorrelated channels
    /// (`r_a * r_b * T * bin_width`).
    pub norm_constant: f64,
    /// Index of the zero-delay bin.
    pub half_bins: usize,
    /// Total events on each channel that entered the histogram.
    pub events: (usize, usize),
    /// Stream duration (ns).
    pub duration_ns: f64,
}

impl G2Histogram {
    /// Delay at the center of bin `i` (ns).
    pub fn tau_at(&self, i: usize) -> f64 {
        (i as i64 - self.half_bins as i64) as f64 * self.bin_width_ns
    }

    /// Bin edges (ns), `counts.len() + 1` entries.
    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|i| (i as f64 - self.half_bins as f64 - 0.5) * self.bin_width_ns)
            .collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram all a-b delay pairs within `max_tau_ns`.
///
/// Requires `bin_width_ns > 0` (at least 1 ps) and `max_tau_ns` of at least
/// ten bins. Normalization uses the measured channel rates, assuming the
/// correlation has decayed to one at the window edge.
pub fn correlate(
    stream: &TimestampStream,
    max_tau_ns: f64,
    bin_width_ns: f64,
) -> Result<G2Histogram, CorrelationError> {
    if stream.channel_a.is_empty() {
        return Err(CorrelationError::EmptyChannel('a'));
    }
    if stream.channel_b.is_empty() {
        return Err(CorrelationError::EmptyChannel('b'));
    }
    let bin_ps = (bin_width_ns * PS_PER_NS).round() as i64;
    if bin_ps < 1 {
        return Err(CorrelationError::InvalidBinning(format!(
            "bin width {bin_width_ns} ns is below one picosecond tick"
        )));
    }
    if !(max_tau_ns.is_finite() && max_tau_ns >= 10.0 * bin_width_ns) {
        return Err(CorrelationError::InvalidBinning(format!(
            "max_tau = {max_tau_ns} ns must span at least ten bins of {bin_width_ns} ns"
        )));
    }
    let half_bins = (max_tau_ns * PS_PER_NS / bin_ps as f64).round() as i64;
    // covered range: delays whose rounded bin index lies in [-half_bins, half_bins]
    let window_ps = half_bins * bin_ps + bin_ps / 2;
    let nbins = (2 * half_bins + 1) as usize;
    let mut counts = vec![0u64; nbins];

    let a = &stream.channel_a;
    let b = &stream.channel_b;
    let mut lo = 0usize;
    let mut hi = 0usize;
    for &ta in a {
        let ta = ta as i64;
        while lo < b.len() && (b[lo] as i64) < ta - window_ps {
            lo += 1;
        }
        while hi < b.len() && (b[hi] as i64) <= ta + window_ps {
            hi += 1;
        }
        for &tb in &b[lo..hi] {
            let delta = tb as i64 - ta;
            // round-half-up on |delta| keeps the histogram exactly symmetric
            let m = (2 * delta.abs() + bin_ps) / (2 * bin_ps);
            if m <= half_bins {
                let idx = (half_bins + delta.signum() * m) as usize;
                counts[idx] += 1;
            }
        }
    }

    let duration_ns = stream.duration_ns();
    let bin_width_ns = bin_ps as f64 / PS_PER_NS;
    let norm_constant = a.len() as f64 * b.len() as f64 * bin_width_ns / duration_ns;
    let normalized = counts.iter().map(|&c| c as f64 / norm_constant).collect();
    Ok(G2Histogram {
        bin_width_ns,
        counts,
        normalized,
        norm_constant,
        half_bins: half_bins as usize,
        events: (a.len(), b.len()),
        duration_ns,
    })
}

/// Fluorescence rate in consecutive windows.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    /// Window length (ms).
    pub window_ms: f64,
    /// Combined two-channel count rate per window (cps).
    pub rates_cps: Vec<f64>,
}

impl TimeTrace {
    pub fn mean_rate(&self) -> f64 {
        if self.rates_cps.is_empty() {
            0.0
        } else {
            self.rates_cps.iter().sum::<f64>() / self.rates_cps.len() as f64
        }
    }
}

/// Bin both channels into count rates over consecutive windows; a trailing
/// partial window is dropped so every rate is estimated over the same span.
pub fn bin_timetrace(stream: &TimestampStream, window_ms: f64) -> Result<TimeTrace, CorrelationError> {
    if !(window_ms > 0.0 && window_ms.is_finite()) {
        return Err(CorrelationError::InvalidBinning(format!(
            "window = {window_ms} ms must be positive"
        )));
    }
    let window_ps = (window_ms * 1e9).round() as u64;
    if window_ps == 0 {
        return Err(CorrelationError::InvalidBinning("window below one tick".into()));
    }
    let n_windows = (stream.duration_ps / window_ps) as usize;
    let mut counts = vec![0u64; n_windows];
    for ch in [&stream.channel_a, &stream.channel_b] {
        for &t in ch {
            let w = (t / window_ps) as usize;
            if w < n_windows {
                counts[w] += 1;
            }
        }
    }
    let window_s = window_ms * 1e-3;
    Ok(TimeTrace {
        window_ms,
        rates_cps: counts.into_iter().map(|c| c as f64 / window_s).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Blinking,
    Bleached,
}

/// Dark intervals of a fluorescence time trace and the resulting class.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermittenceReport {
    /// Disjoint, sorted `(start, end)` pairs in ms from trace start.
    pub dark_intervals: Vec<(f64, f64)>,
    /// Absolute threshold used (cps).
    pub threshold_cps: f64,
    /// Robust bright level the threshold was derived from (cps).
    pub bright_level_cps: f64,
    pub classification: Stability,
}

/// Find dark intervals: runs of at least `min_dark_ms` of consecutive
/// windows below `threshold_fraction` of the robust bright level (median of
/// the above-threshold windows, bootstrapped from the overall median).
///
/// Classification: no dark interval is `Stable`; a final dark interval
/// reaching the end of the trace with at least ten times `min_dark_ms` is
/// `Bleached`; anything else is `Blinking`.
pub fn detect_intermittence(
    trace: &TimeTrace,
    threshold_fraction: f64,
    min_dark_ms: f64,
) -> Result<IntermittenceReport, CorrelationError> {
    if !(0.0..1.0).contains(&threshold_fraction) || threshold_fraction == 0.0 {
        return Err(CorrelationError::InvalidBinning(format!(
            "threshold_fraction = {threshold_fraction} must lie in (0, 1)"
        )));
    }
    if trace.rates_cps.is_empty() {
        return Err(CorrelationError::DegenerateTrace);
    }
    // bootstrap the bright level from the overall median, then re-estimate it
    // from the windows the provisional threshold calls bright
    let provisional = threshold_fraction * median(&trace.rates_cps);
    let bright: Vec<f64> =
        trace.rates_cps.iter().copied().filter(|&r| r >= provisional).collect();
    let bright_level = if bright.is_empty() { 0.0 } else { median(&bright) };
    if bright_level <= 0.0 {
        return Err(CorrelationError::DegenerateTrace);
    }
    let threshold = threshold_fraction * bright_level;

    let w = trace.window_ms;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &r) in trace.rates_cps.iter().enumerate() {
        if r < threshold {
            run_start.get_or_insert(i);
        } else if let Some(s) = run_start.take() {
            let len = (i - s) as f64 * w;
            if len >= min_dark_ms {
                intervals.push((s as f64 * w, i as f64 * w));
            }
        }
    }
    let mut ends_dark = false;
    if let Some(s) = run_start {
        let end = trace.rates_cps.len();
        let len = (end - s) as f64 * w;
        if len >= min_dark_ms {
            intervals.push((s as f64 * w, end as f64 * w));
            ends_dark = true;
        }
    }
    let classification = if intervals.is_empty() {
        Stability::Stable
    } else if ends_dark {
        let (s, e) = *intervals.last().unwrap();
        if e - s >= 10.0 * min_dark_ms {
            Stability::Bleached
        } else {
            Stability::Blinking
        }
    } else {
        Stability::Blinking
    };
    Ok(IntermittenceReport {
        dark_intervals: intervals,
        threshold_cps: threshold,
        bright_level_cps: bright_level,
        classification,
    })
}
