//! Comparison schemes and the shared method dispatch.
//!
//! The three benchmarks reuse the scalable optimizer on a deliberately
//! simplified design model: frequency-flat elements, a single design
//! frequency, or single target points. Evaluation is identical for every
//! method and always applies the physical phase scaling.

use crate::io::IterationRecord;
use crate::lc_phase::{beta_factor, wrap_phase, PhaseProfile};
use crate::scalable::{run_scalable, Aggregation, ScalableOptions, ScalableOutcome};
use crate::scenario::{frequency_grids, Scenario};
use crate::sdp::{run_sdp, SdpOptions, SdpOutcome};
use crate::secrecy::{worst_case_report, EvalMode, LinkEvaluator, QuadraticFormSet, SecrecyReport};
use crate::{Error, Point};
use std::fmt;
use std::str::FromStr;

/// Benchmark configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchmarkId {
    /// All design frequencies and both regions, frequency-flat design model.
    FlatArea = 1,
    /// Center frequency only, both regions.
    CenterArea = 2,
    /// All design frequencies, frequency-flat model, region centers only.
    FlatPoint = 3,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 3] = [BenchmarkId::FlatArea, BenchmarkId::CenterArea, BenchmarkId::FlatPoint];

    pub fn from_number(id: u8) -> Result<Self, Error> {
        match id {
            1 => Ok(Self::FlatArea),
            2 => Ok(Self::CenterArea),
            3 => Ok(Self::FlatPoint),
            other => Err(Error::UnknownBenchmark(other)),
        }
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::FlatArea => "all design frequencies, regions, frequency-flat design",
            Self::CenterArea => "center frequency only, regions",
            Self::FlatPoint => "all design frequencies, region centers, frequency-flat design",
        }
    }
}

/// Optimization method selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Sdp,
    Scalable,
    Benchmark(BenchmarkId),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Sdp,
        Method::Scalable,
        Method::Benchmark(BenchmarkId::FlatArea),
        Method::Benchmark(BenchmarkId::CenterArea),
        Method::Benchmark(BenchmarkId::FlatPoint),
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Sdp => f.write_str("sdp"),
            Method::Scalable => f.write_str("scalable"),
            Method::Benchmark(id) => write!(f, "benchmark{}", id.number()),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "sdp" => Ok(Method::Sdp),
            "scalable" => Ok(Method::Scalable),
            "benchmark1" => Ok(Method::Benchmark(BenchmarkId::FlatArea)),
            "benchmark2" => Ok(Method::Benchmark(BenchmarkId::CenterArea)),
            "benchmark3" => Ok(Method::Benchmark(BenchmarkId::FlatPoint)),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Design-time model used by `method`: frequencies, phase scalings and
/// target points.
pub fn design_forms(scenario: &Scenario, method: Method) -> Result<QuadraticFormSet, Error> {
    let evaluator = LinkEvaluator::new(scenario)?;
    let fc = scenario.freq.center_hz;
    let (design, _) = frequency_grids(&scenario.freq);
    let (users, eves) = (scenario.user_points(), scenario.eve_points());
    let physical = |freqs: &[f64]| -> Result<Vec<f64>, Error> {
        freqs.iter().map(|&f| beta_factor(f, fc, scenario.lc.beta)).collect()
    };
    let flat = vec![1.0; design.len()];
    match method {
        Method::Sdp | Method::Scalable => QuadraticFormSet::build(&evaluator, &design, &physical(&design)?, &users, &eves),
        Method::Benchmark(BenchmarkId::FlatArea) => QuadraticFormSet::build(&evaluator, &design, &flat, &users, &eves),
        Method::Benchmark(BenchmarkId::CenterArea) => QuadraticFormSet::build(&evaluator, &[fc], &[1.0], &users, &eves),
        Method::Benchmark(BenchmarkId::FlatPoint) => QuadraticFormSet::build(
            &evaluator,
            &design,
            &flat,
            &[scenario.user_region.center()],
            &[scenario.eve_region.center()],
        ),
    }
}

/// Knobs shared by every method run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub aggregation: Aggregation,
    pub eta_persist: bool,
    pub mode: EvalMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { aggregation: Aggregation::ChainRule, eta_persist: false, mode: EvalMode::LosOnly }
    }
}

#[derive(Debug, Clone)]
pub enum MethodOutcome {
    Sdp(SdpOutcome),
    Scalable(ScalableOutcome),
}

#[derive(Debug, Clone)]
pub struct MethodRun {
    pub method: Method,
    pub profile: PhaseProfile,
    pub report: SecrecyReport,
    pub outcome: MethodOutcome,
}

/// Optimizes with `method` and evaluates the result on the evaluation grid
/// over the full regions.
pub fn run_method(
    scenario: &Scenario,
    method: Method,
    seed: u64,
    options: &RunOptions,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<MethodRun, Error> {
    let forms = design_forms(scenario, method)?;
    let (beta, fc) = (scenario.lc.beta, scenario.freq.center_hz);
    let outcome = match method {
        Method::Sdp => {
            let mut opts = SdpOptions::from_hyper(&scenario.hyper);
            opts.eta_persist = options.eta_persist;
            MethodOutcome::Sdp(run_sdp(&forms, &opts, seed, beta, fc, log)?)
        }
        Method::Scalable | Method::Benchmark(_) => {
            let mut opts = ScalableOptions::from_hyper(&scenario.hyper);
            opts.aggregation = options.aggregation;
            MethodOutcome::Scalable(run_scalable(&forms, &opts, seed, beta, fc, log)?)
        }
    };
    let profile = match &outcome {
        MethodOutcome::Sdp(o) => o.profile.clone(),
        MethodOutcome::Scalable(o) => o.profile.clone(),
    };
    let report = evaluate_profile(scenario, &profile, options.mode)?;
    Ok(MethodRun { method, profile, report, outcome })
}

/// Worst-case report of `profile` on the evaluation grid and full regions.
pub fn evaluate_profile(scenario: &Scenario, profile: &PhaseProfile, mode: EvalMode) -> Result<SecrecyReport, Error> {
    let evaluator = LinkEvaluator::new(scenario)?;
    let (_, eval) = frequency_grids(&scenario.freq);
    worst_case_report(&evaluator, profile, &eval, &scenario.user_points(), &scenario.eve_points(), mode)
}

/// Runs benchmark `id` and evaluates it with the physical dispersion.
pub fn run_benchmark(
    id: BenchmarkId,
    scenario: &Scenario,
    seed: u64,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<(PhaseProfile, SecrecyReport), Error> {
    let run = run_method(scenario, Method::Benchmark(id), seed, &RunOptions::default(), log)?;
    Ok((run.profile, run.report))
}

/// Maximum-ratio profile toward a single point at the center frequency,
/// ignoring eavesdroppers.
pub fn max_ratio_profile(scenario: &Scenario, target: &Point) -> Result<PhaseProfile, Error> {
    let evaluator = LinkEvaluator::new(scenario)?;
    let fc = scenario.freq.center_hz;
    let a = evaluator.factors(fc, std::slice::from_ref(target))?.remove(0);
    // |aᴴ s| is maximal when every term a_n* s_n has the same phase
    let phases: Vec<f64> = a.iter().map(|z| wrap_phase(z.arg())).collect();
    Ok(PhaseProfile::new(&phases, scenario.lc.beta, fc))
}
