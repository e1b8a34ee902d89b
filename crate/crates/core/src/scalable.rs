//! Scalable majorization optimizer.
//!
//! For each tuple (frequency, user point, eavesdropper point) the indefinite
//! form `A = a_u a_uᴴ − γ a_e a_eᴴ` is shifted by its smallest eigenvalue,
//! which makes `sᴴ A s` minorizable by a linear function of `s` around the
//! current iterate. Tuples are weighted by a log-sum-exp softening of the
//! worst case and the weighted linear terms are maximized in closed form by
//! phase alignment. Everything runs in `O(N)` per tuple because `A` has rank
//! two and its eigenvalues come from a 2×2 problem.

use crate::io::IterationRecord;
use crate::lc_phase::{phase_vector, wrap_phase, PhaseProfile};
use crate::linalg::CVector;
use crate::scenario::HyperParams;
use crate::secrecy::{raw_secrecy_rate, QuadraticFormSet};
use crate::sdp::random_phases;
use crate::Error;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// How per-frequency linear terms are combined into one phase update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Sum the per-frequency vectors directly, treating every `s_k` as `s_c`.
    Literal,
    /// Rotate each frequency's vector back to the center-frequency phase
    /// and weight it by its phase scaling, following the chain rule of
    /// `s_k = s_c^∘β_k`.
    ChainRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalableOptions {
    pub restarts: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub mu: f64,
    pub gamma0: f64,
    pub aggregation: Aggregation,
    /// Inner loop stops after `early_exit_count` consecutive updates moving
    /// no entry by more than `early_exit_tol`.
    pub early_exit_tol: f64,
    pub early_exit_count: usize,
}

impl ScalableOptions {
    pub fn from_hyper(h: &HyperParams) -> Self {
        Self {
            restarts: h.scalable_restarts,
            outer_iterations: h.scalable_outer,
            inner_iterations: h.scalable_inner,
            mu: h.lse_mu,
            gamma0: h.gamma0,
            aggregation: Aggregation::ChainRule,
            early_exit_tol: 1e-5,
            early_exit_count: 3,
        }
    }
}

/// Gram entries of one factor pair: `(‖a_u‖², ‖a_e‖², a_uᴴ a_e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGram {
    pub uu: f64,
    pub ee: f64,
    pub ue: Complex64,
}

impl PairGram {
    pub fn new(a_u: &CVector, a_e: &CVector) -> Self {
        Self { uu: a_u.norm_squared(), ee: a_e.norm_squared(), ue: a_u.dotc(a_e) }
    }

    /// Smallest eigenvalue of `a_u a_uᴴ − γ a_e a_eᴴ`, from the roots of
    /// the characteristic polynomial of `diag(1, −γ) · Gram`; the remaining
    /// `N − 2` eigenvalues are zero, so the result is capped at 0.
    pub fn lambda_min(&self, gamma: f64) -> f64 {
        let t = self.uu - gamma * self.ee;
        let d = -gamma * (self.uu * self.ee - self.ue.norm_sqr()).max(0.0);
        let disc = (t * t - 4.0 * d).max(0.0).sqrt();
        // numerically stable pair of roots
        let big = if t >= 0.0 { (t + disc) / 2.0 } else { (t - disc) / 2.0 };
        let small = if big != 0.0 { d / big } else { 0.0 };
        big.min(small).min(0.0)
    }
}

/// Smallest eigenvalue of `a_u a_uᴴ − γ a_e a_eᴴ` in `O(N)`.
pub fn lambda_min_rank2(a_u: &CVector, a_e: &CVector, gamma: f64) -> Result<f64, Error> {
    if gamma < 0.0 {
        return Err(Error::InvalidArgument("rate ratio must be nonnegative".into()));
    }
    Ok(PairGram::new(a_u, a_e).lambda_min(gamma))
}

/// Linear minorizer of `sᴴ A s + 1 − γ` around `s̃` for unit-modulus `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Majorizer {
    /// `Φ s̃` with `Φ = A − λ_min I`.
    pub beta_vec: CVector,
    /// `λ_min N − s̃ᴴ Φ s̃ + 1 − γ`.
    pub offset: f64,
    pub gamma: f64,
}

impl Majorizer {
    /// Lower bound of `sᴴ A s` at `s`; tight at `s = s̃`.
    pub fn bound(&self, s: &CVector) -> f64 {
        self.offset + 2.0 * s.dotc(&self.beta_vec).re + self.gamma - 1.0
    }
}

/// Minorizer for `A = a_u a_uᴴ − γ a_e a_eᴴ` without forming `A`.
pub fn majorizer_vector(a_u: &CVector, a_e: &CVector, gamma: f64, lambda_min: f64, s_tilde: &CVector) -> Majorizer {
    let xu = a_u.dotc(s_tilde);
    let xe = a_e.dotc(s_tilde);
    let beta_vec = a_u * xu - a_e * (xe * gamma) - s_tilde * Complex64::new(lambda_min, 0.0);
    let n = s_tilde.len() as f64;
    let quad = xu.norm_sqr() - gamma * xe.norm_sqr() - lambda_min * s_tilde.norm_squared();
    Majorizer { beta_vec, offset: lambda_min * n - quad + 1.0 - gamma, gamma }
}

/// Normalized weights `exp(−v/μ) / Σ exp(−v/μ)` and the smooth minimum
/// `−μ ln Σ exp(−v/μ)`, computed with a max shift.
pub fn lse_weights(values: &[f64], mu: f64) -> (Vec<f64>, f64) {
    let scaled: Vec<f64> = values.iter().map(|v| -v / mu).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|x| (x - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    (exps.iter().map(|e| e / total).collect(), -mu * (m + total.ln()))
}

/// Phases of `aggregate` in `[0, 2π)`; zero entries keep the previous phase.
pub fn phase_update(aggregate: &CVector, previous: &[f64]) -> Vec<f64> {
    aggregate
        .iter()
        .zip(previous)
        .map(|(z, &p)| if z.norm() == 0.0 { p } else { wrap_phase(z.arg()) })
        .collect()
}

/// Result of one random restart.
#[derive(Debug, Clone)]
pub struct RestartResult {
    pub best_sr: f64,
    pub phases: Vec<f64>,
    /// Best-so-far value after each inner iteration.
    pub best_trace: Vec<f64>,
    /// `γ` after each outer iteration, starting with the seed value.
    pub gammas: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct ScalableOutcome {
    pub profile: PhaseProfile,
    /// Smallest unclipped secrecy rate over the design tuples.
    pub best_sr: f64,
    pub restarts: Vec<RestartResult>,
}

/// Per-iterate quantities shared by the weights, the update and the tracker.
struct Evaluation {
    s_k: Vec<CVector>,
    /// `a_uᴴ s_k` and `a_eᴴ s_k`.
    xu: Vec<Vec<Complex64>>,
    xe: Vec<Vec<Complex64>>,
    /// Unclipped rate per tuple in (k, u, e) order.
    rates: Vec<f64>,
}

impl Evaluation {
    fn new(forms: &QuadraticFormSet, phases: &[f64]) -> Self {
        let s_k = forms.surface_vectors(phases);
        let xu: Vec<Vec<Complex64>> = (0..forms.freq_count()).map(|k| forms.users[k].iter().map(|a| a.dotc(&s_k[k])).collect()).collect();
        let xe: Vec<Vec<Complex64>> = (0..forms.freq_count()).map(|k| forms.eves[k].iter().map(|a| a.dotc(&s_k[k])).collect()).collect();
        let mut rates = Vec::with_capacity(forms.tuple_count());
        for k in 0..forms.freq_count() {
            for x in &xu[k] {
                for y in &xe[k] {
                    rates.push(raw_secrecy_rate(x.norm_sqr(), y.norm_sqr()));
                }
            }
        }
        Self { s_k, xu, xe, rates }
    }

    fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct Problem<'a> {
    forms: &'a QuadraticFormSet,
    /// `grams[k][u * E + e]`.
    grams: Vec<Vec<PairGram>>,
}

impl<'a> Problem<'a> {
    fn new(forms: &'a QuadraticFormSet) -> Self {
        let grams = (0..forms.freq_count())
            .map(|k| {
                forms.users[k]
                    .iter()
                    .flat_map(|u| forms.eves[k].iter().map(move |e| PairGram::new(u, e)))
                    .collect()
            })
            .collect();
        Self { forms, grams }
    }

    /// Weighted sum of the tuple vectors `Φ s̃_k`, grouped per frequency:
    /// `Σ_u a_u x_u W_u − γ Σ_e a_e x_e W_e − (Σ w λ) s̃_k`.
    fn aggregate(&self, ev: &Evaluation, weights: &[f64], gamma: f64, phases: &[f64], mode: Aggregation) -> CVector {
        let f = self.forms;
        let n = f.dim();
        let ne = f.eve_points.len();
        let nu = f.user_points.len();
        let mut total = CVector::zeros(n);
        let s_c = phase_vector(phases);
        let mut t0 = 0;
        for k in 0..f.freq_count() {
            let mut agg = CVector::zeros(n);
            let mut wu = vec![0.0; nu];
            let mut we = vec![0.0; ne];
            let mut lam = 0.0;
            for u in 0..nu {
                for e in 0..ne {
                    let w = weights[t0 + u * ne + e];
                    wu[u] += w;
                    we[e] += w;
                    lam += w * self.grams[k][u * ne + e].lambda_min(gamma);
                }
            }
            for u in 0..nu {
                agg.axpy(ev.xu[k][u] * wu[u], &f.users[k][u], Complex64::new(1.0, 0.0));
            }
            for e in 0..ne {
                agg.axpy(-ev.xe[k][e] * (gamma * we[e]), &f.eves[k][e], Complex64::new(1.0, 0.0));
            }
            agg.axpy(Complex64::new(-lam, 0.0), &ev.s_k[k], Complex64::new(1.0, 0.0));
            match mode {
                Aggregation::Literal => total += agg,
                Aggregation::ChainRule => {
                    let b = f.beta_k[k];
                    for i in 0..n {
                        total[i] += agg[i] * ev.s_k[k][i].conj() * s_c[i] * b;
                    }
                }
            }
            t0 += nu * ne;
        }
        total
    }

    fn restart(&self, options: &ScalableOptions, seed: u64, t: usize) -> RestartResult {
        let f = self.forms;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut phases = random_phases(f.dim(), &mut rng);
        let mut gamma = options.gamma0;
        let mut best_sr = f64::NEG_INFINITY;
        let mut best = phases.clone();
        let mut best_trace = Vec::new();
        let mut gammas = vec![gamma];
        let mut history = Vec::new();

        for j in 1..=options.outer_iterations {
            let mut still = 0;
            let mut ev = Evaluation::new(f, &phases);
            for i in 1..=options.inner_iterations {
                let start = Instant::now();
                let (weights, lse_bound) = lse_weights(&ev.rates, options.mu);
                let agg = self.aggregate(&ev, &weights, gamma, &phases, options.aggregation);
                let next = phase_update(&agg, &phases);
                let step = next
                    .iter()
                    .zip(&phases)
                    .map(|(a, b)| (Complex64::from_polar(1.0, *a) - Complex64::from_polar(1.0, *b)).norm())
                    .fold(0.0f64, f64::max);
                phases = next;
                ev = Evaluation::new(f, &phases);
                let current = ev.min_rate();
                if current > best_sr {
                    best_sr = current;
                    best.clone_from(&phases);
                }
                best_trace.push(best_sr);
                history.push(IterationRecord {
                    method: "scalable".into(),
                    restart: Some(t),
                    outer: j,
                    inner: i,
                    gamma,
                    rank_gap: None,
                    objective: None,
                    lse_bound: Some(lse_bound),
                    min_sr: Some(current),
                    wall_ms: start.elapsed().as_secs_f64() * 1e3,
                });
                still = if step < options.early_exit_tol { still + 1 } else { 0 };
                if still >= options.early_exit_count {
                    break;
                }
            }
            gamma = f.gamma_from_vectors(&f.surface_vectors(&best)).max(0.0);
            gammas.push(gamma);
        }
        RestartResult { best_sr, phases: best, best_trace, gammas, history }
    }
}

/// Runs all restarts (in parallel) and keeps the best profile; ties go to
/// the lowest restart index.
pub fn run_scalable(
    forms: &QuadraticFormSet,
    options: &ScalableOptions,
    seed: u64,
    beta: f64,
    center_hz: f64,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<ScalableOutcome, Error> {
    if !(options.mu > 0.0) {
        return Err(Error::InvalidArgument("smoothing parameter must be positive".into()));
    }
    if options.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let problem = Problem::new(forms);
    let restarts: Vec<RestartResult> = (0..options.restarts)
        .into_par_iter()
        .map(|t| problem.restart(options, seed, t))
        .collect();
    for r in &restarts {
        for rec in &r.history {
            log(rec);
        }
    }
    let mut pick = 0;
    for (t, r) in restarts.iter().enumerate() {
        if r.best_sr > restarts[pick].best_sr {
            pick = t;
        }
    }
    Ok(ScalableOutcome {
        profile: PhaseProfile::new(&restarts[pick].phases, beta, center_hz),
        best_sr: restarts[pick].best_sr,
        restarts,
    })
}
