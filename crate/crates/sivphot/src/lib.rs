//! Photophysics of single silicon-vacancy (SiV) color centers.
//!
//! The crate models a continuously pumped three-level emitter whose shelving
//! state is emptied by an intensity-dependent (saturating) de-shelving
//! process, and everything needed to confront that model with photon
//! counting data:
//!
//! - [`rate_model`] — closed-form populations, correlation shape parameters
//!   `(a, tau1, tau2)`, background and timing-response corrections, and the
//!   forward/inverse maps between rate coefficients and observables;
//! - [`emitter_sim`] — a seeded continuous-time Markov simulation of the
//!   emitter plus detection chain producing two-channel photon timestamps;
//! - [`correlation`] — correlation histograms, binned fluorescence time
//!   traces and intermittence detection from timestamp streams;
//! - [`inference`] — Levenberg-Marquardt fits of saturation curves,
//!   correlation histograms, and the staged power-dependence fit that
//!   extracts rate coefficients, pump slope and de-shelving saturation;
//! - [`dipole`] — decay rates, far-field patterns, collection efficiency and
//!   effective quantum yield of a dipole above a metal half-space;
//! - [`emitters`] — reference parameter sets for fourteen measured emitters;
//! - [`stream`] — the timestamp container and its binary/text file formats.
//!
//! A worked guide with runnable snippets lives in the `book/` directory of
//! the repository; its code blocks compile as doc-tests of this crate.

pub mod correlation;
pub mod dipole;
pub mod emitter_sim;
pub mod emitters;
pub mod inference;
pub(crate) mod math;
pub mod rate_model;
pub mod stream;

// Compile the guide's code blocks as doc-tests so the book cannot drift from
// the library.
#[cfg(doctest)]
#[doc(hidden)]
pub mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }
    chapter!(three_level_model, "../../../book/src/three-level-model.md");
    chapter!(simulating_photon_streams, "../../../book/src/simulating-photon-streams.md");
    chapter!(correlation_and_time_traces, "../../../book/src/correlation-and-time-traces.md");
    chapter!(fitting_the_power_dependence, "../../../book/src/fitting-the-power-dependence.md");
    chapter!(dipole_above_a_mirror, "../../../book/src/dipole-above-a-mirror.md");
}
