//! Beamforming, SNR and secrecy-rate evaluation.
//!
//! With the reflection coefficients `Γ` the signal reaching point `p` is
//! `Σ_n h_r[n] Γ_n g[n] + h_dᵀ q`, where `g = H_t q` is the field on the
//! surface. Without the direct path this is `aᴴ s` for the unit-modulus
//! vector `s = exp(jω)` and the per-point factor
//! `a = conj(Ω ∘ h_r ∘ g) / σ_n`, so `SNR = sᴴ (a aᴴ) s`.

use crate::channel::{ChannelModel, Draw};
use crate::lc_phase::{phase_vector, PhaseProfile};
use crate::linalg::{CMatrix, CVector};
use crate::scenario::Scenario;
use crate::{Error, Point};
use num_complex::Complex64;
use rayon::prelude::*;

/// Matched transmit beamformer toward the surface center.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub q: CVector,
}

/// Unit-norm transmit vector of the base station that focuses on `p`.
pub fn bs_steering(scenario: &Scenario, p: &Point, f: f64) -> Result<CVector, Error> {
    Ok(crate::channel::steering(&scenario.bs.positions, p, f)?.conjugate())
}

/// `q = √P_t · a_BS(p_RIS, f_c)`.
pub fn beamformer(scenario: &Scenario) -> Result<Beamformer, Error> {
    let a = bs_steering(scenario, &scenario.ris.center, scenario.freq.center_hz)?;
    Ok(Beamformer { q: a * Complex64::new(scenario.rf.tx_power_w.sqrt(), 0.0) })
}

/// `[log2(1 + snr_u) − log2(1 + snr_e)]⁺`.
pub fn secrecy_rate(snr_u: f64, snr_e: f64) -> f64 {
    raw_secrecy_rate(snr_u, snr_e).max(0.0)
}

/// Secrecy rate before clipping at zero.
pub fn raw_secrecy_rate(snr_u: f64, snr_e: f64) -> f64 {
    (1.0 + snr_u).log2() - (1.0 + snr_e).log2()
}

/// Which signal paths an evaluation includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Line-of-sight cascaded path only; the optimizers' model.
    LosOnly,
    /// Line-of-sight cascaded path plus the attenuated direct path.
    LosBlocked,
    /// Rician channels on every link, averaged over realizations.
    Rician { realizations: usize },
}

impl EvalMode {
    pub fn label(&self) -> &'static str {
        match self {
            EvalMode::LosOnly => "los",
            EvalMode::LosBlocked => "blocked",
            EvalMode::Rician { .. } => "rician",
        }
    }
}

/// Computes SNRs for a scenario with the fixed beamformer.
#[derive(Debug, Clone)]
pub struct LinkEvaluator<'a> {
    pub scenario: &'a Scenario,
    pub beamformer: Beamformer,
    pub noise_power: f64,
}

/// Per-frequency state shared by all points: the reflection coefficients
/// times the field on the surface, and one draw's key.
struct FrequencyField {
    weighted: CVector,
    realization: Option<u64>,
}

impl<'a> LinkEvaluator<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, Error> {
        Ok(Self { scenario, beamformer: beamformer(scenario)?, noise_power: scenario.noise_power() })
    }

    fn draw<'p>(&self, realization: Option<u64>, key: &'p Point) -> Option<Draw<'p>> {
        realization.map(|r| Draw { seed: self.scenario.hyper.seed, realization: r, key_point: key })
    }

    fn field(&self, profile: &PhaseProfile, f: f64, realization: Option<u64>) -> Result<FrequencyField, Error> {
        let model = ChannelModel::new(self.scenario);
        let center = self.scenario.ris.center;
        let ht = model.bs_ris(f, self.draw(realization, &center))?;
        let g = &ht * &self.beamformer.q;
        let gamma = profile.reflection_coefficients(&self.scenario.lc.amplitude, f)?;
        Ok(FrequencyField { weighted: gamma.component_mul(&g), realization })
    }

    fn point_snr(&self, field: &FrequencyField, f: f64, p: &Point, direct: bool) -> Result<f64, Error> {
        let model = ChannelModel::new(self.scenario);
        let hr = model.ris_point(f, p, self.draw(field.realization, p))?;
        let mut r: Complex64 = hr.iter().zip(field.weighted.iter()).map(|(h, w)| h * w).sum();
        if direct {
            let hd = model.bs_point(f, p, self.draw(field.realization, p))?;
            r += hd.iter().zip(self.beamformer.q.iter()).map(|(h, q)| h * q).sum::<Complex64>();
        }
        Ok(r.norm_sqr() / self.noise_power)
    }

    /// SNR at each point for one frequency. `realization` selects a Rician
    /// draw; `None` means line of sight.
    pub fn snr_at_points(
        &self,
        profile: &PhaseProfile,
        f: f64,
        points: &[Point],
        direct: bool,
        realization: Option<u64>,
    ) -> Result<Vec<f64>, Error> {
        self.check_profile(profile)?;
        let field = self.field(profile, f, realization)?;
        points.par_iter().map(|p| self.point_snr(&field, f, p, direct)).collect()
    }

    /// SNR at one point.
    pub fn snr(&self, profile: &PhaseProfile, f: f64, p: &Point, mode: EvalMode, realization: u64) -> Result<f64, Error> {
        let (direct, real) = match mode {
            EvalMode::LosOnly => (false, None),
            EvalMode::LosBlocked => (true, None),
            EvalMode::Rician { .. } => (true, Some(realization)),
        };
        Ok(self.snr_at_points(profile, f, std::slice::from_ref(p), direct, real)?[0])
    }

    pub fn check_profile(&self, profile: &PhaseProfile) -> Result<(), Error> {
        let n = self.scenario.ris_len();
        if profile.len() != n {
            return Err(Error::ProfileLength { got: profile.len(), expected: n });
        }
        Ok(())
    }

    /// Per-point factors `a` such that `SNR = |aᴴ s|²` on the line-of-sight model.
    pub fn factors(&self, f: f64, points: &[Point]) -> Result<Vec<CVector>, Error> {
        let model = ChannelModel::new(self.scenario);
        let g = model.bs_ris(f, None)? * &self.beamformer.q;
        let sigma = self.noise_power.sqrt();
        let amp = &self.scenario.lc.amplitude;
        points
            .par_iter()
            .map(|p| {
                let hr = model.ris_point(f, p, None)?;
                Ok(CVector::from_iterator(
                    hr.len(),
                    (0..hr.len()).map(|n| (hr[n] * g[n] * amp[n]).conj() / sigma),
                ))
            })
            .collect()
    }
}

/// Which side of the link a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    User,
    Eve,
}

/// Rank-one SNR factors on the design grid: for design frequency `k` and
/// point `p`, `SNR = |a_{k,p}ᴴ s_k|²` with `s_k = exp(j β_k ω_c)`.
#[derive(Debug, Clone)]
pub struct QuadraticFormSet {
    pub freqs: Vec<f64>,
    /// Phase scaling per design frequency as seen by the design model.
    pub beta_k: Vec<f64>,
    pub user_points: Vec<Point>,
    pub eve_points: Vec<Point>,
    /// `users[k][u]`.
    pub users: Vec<Vec<CVector>>,
    /// `eves[k][e]`.
    pub eves: Vec<Vec<CVector>>,
}

impl QuadraticFormSet {
    /// Factors for the given design frequencies, scalings and point sets.
    pub fn build(
        evaluator: &LinkEvaluator<'_>,
        freqs: &[f64],
        beta_k: &[f64],
        user_points: &[Point],
        eve_points: &[Point],
    ) -> Result<Self, Error> {
        if freqs.len() != beta_k.len() {
            return Err(Error::InvalidArgument("one phase scaling per design frequency required".into()));
        }
        let mut users = Vec::with_capacity(freqs.len());
        let mut eves = Vec::with_capacity(freqs.len());
        for &f in freqs {
            users.push(evaluator.factors(f, user_points)?);
            eves.push(evaluator.factors(f, eve_points)?);
        }
        Ok(Self {
            freqs: freqs.to_vec(),
            beta_k: beta_k.to_vec(),
            user_points: user_points.to_vec(),
            eve_points: eve_points.to_vec(),
            users,
            eves,
        })
    }

    /// Factors from explicit vectors; used by tests and synthetic instances.
    pub fn from_factors(beta_k: Vec<f64>, users: Vec<Vec<CVector>>, eves: Vec<Vec<CVector>>) -> Self {
        let k = beta_k.len();
        assert_eq!(users.len(), k);
        assert_eq!(eves.len(), k);
        let zeros = |n: usize| vec![Point::zeros(); n];
        Self {
            freqs: vec![0.0; k],
            user_points: zeros(users.first().map_or(0, Vec::len)),
            eve_points: zeros(eves.first().map_or(0, Vec::len)),
            beta_k,
            users,
            eves,
        }
    }

    pub fn dim(&self) -> usize {
        self.users.first().and_then(|u| u.first()).map_or(0, |a| a.len())
    }

    pub fn freq_count(&self) -> usize {
        self.beta_k.len()
    }

    pub fn tuple_count(&self) -> usize {
        self.freq_count() * self.user_points.len() * self.eve_points.len()
    }

    pub fn factor(&self, k: usize, role: Role, idx: usize) -> &CVector {
        match role {
            Role::User => &self.users[k][idx],
            Role::Eve => &self.eves[k][idx],
        }
    }

    /// `A = a aᴴ`.
    pub fn dense(&self, k: usize, role: Role, idx: usize) -> CMatrix {
        let a = self.factor(k, role, idx);
        a * a.adjoint()
    }

    /// `s_k = exp(j β_k ω)` for every design frequency.
    pub fn surface_vectors(&self, phases: &[f64]) -> Vec<CVector> {
        self.beta_k
            .iter()
            .map(|&b| phase_vector(&phases.iter().map(|w| w * b).collect::<Vec<_>>()))
            .collect()
    }

    /// SNRs `|aᴴ s_k|²` of all users and eavesdroppers at design frequency `k`.
    pub fn snrs(&self, k: usize, s: &CVector) -> (Vec<f64>, Vec<f64>) {
        let f = |a: &CVector| a.dotc(s).norm_sqr();
        (self.users[k].iter().map(f).collect(), self.eves[k].iter().map(f).collect())
    }

    /// Smallest unclipped secrecy rate over all tuples.
    pub fn min_raw_secrecy(&self, s_k: &[CVector]) -> f64 {
        (0..self.freq_count())
            .map(|k| {
                let (u, e) = self.snrs(k, &s_k[k]);
                raw_secrecy_rate(min(&u), max(&e))
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Rate ratio `min_{k,u,e} (tr(A_u S_k) + 1) / (tr(A_e S_k) + 1)` for
    /// rank-one `S_k = s_k s_kᴴ`.
    pub fn gamma_from_vectors(&self, s_k: &[CVector]) -> f64 {
        (0..self.freq_count())
            .map(|k| {
                let (u, e) = self.snrs(k, &s_k[k]);
                (min(&u) + 1.0) / (max(&e) + 1.0)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Same ratio for general matrices `S_k`.
    pub fn gamma_from_matrices(&self, s_k: &[CMatrix]) -> f64 {
        let quad = |a: &CVector, s: &CMatrix| a.dotc(&(s * a)).re;
        (0..self.freq_count())
            .map(|k| {
                let u: Vec<f64> = self.users[k].iter().map(|a| quad(a, &s_k[k])).collect();
                let e: Vec<f64> = self.eves[k].iter().map(|a| quad(a, &s_k[k])).collect();
                (min(&u) + 1.0) / (max(&e) + 1.0)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// First index of the smallest value.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Worst case at one evaluation frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResult {
    pub freq_hz: f64,
    /// Worst-case secrecy rate; the mean over draws in Rician mode.
    pub sr_min_bits: f64,
    pub worst_user: Point,
    pub best_eve: Point,
    /// 10th percentile over draws in Rician mode.
    pub sr_p10_bits: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyReport {
    pub mode: String,
    pub rows: Vec<FrequencyResult>,
    pub band_min_bits: f64,
    pub band_min_freq_hz: f64,
}

impl SecrecyReport {
    fn from_rows(mode: EvalMode, rows: Vec<FrequencyResult>) -> Self {
        let mut idx = 0;
        for (i, r) in rows.iter().enumerate() {
            if r.sr_min_bits < rows[idx].sr_min_bits {
                idx = i;
            }
        }
        let (band_min_bits, band_min_freq_hz) =
            rows.get(idx).map_or((0.0, 0.0), |r| (r.sr_min_bits, r.freq_hz));
        Self { mode: mode.label().into(), rows, band_min_bits, band_min_freq_hz }
    }
}

/// Linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Worst-case secrecy rate per evaluation frequency: the least favorable
/// user point against the most favorable eavesdropper point. Ties resolve
/// to the first point in grid order. In Rician mode each draw is reduced
/// separately; the reported witnesses come from the worst draw.
pub fn worst_case_report(
    evaluator: &LinkEvaluator<'_>,
    profile: &PhaseProfile,
    freqs: &[f64],
    user_points: &[Point],
    eve_points: &[Point],
    mode: EvalMode,
) -> Result<SecrecyReport, Error> {
    evaluator.check_profile(profile)?;
    if user_points.is_empty() || eve_points.is_empty() {
        return Err(Error::InvalidArgument("report needs user and eavesdropper points".into()));
    }
    let single = |f: f64, direct: bool, realization: Option<u64>| -> Result<(f64, usize, usize), Error> {
        let su = evaluator.snr_at_points(profile, f, user_points, direct, realization)?;
        let se = evaluator.snr_at_points(profile, f, eve_points, direct, realization)?;
        let (iu, ie) = (argmin(&su), argmax(&se));
        Ok((secrecy_rate(su[iu], se[ie]), iu, ie))
    };
    let rows: Result<Vec<FrequencyResult>, Error> = freqs
        .par_iter()
        .map(|&f| {
            let (sr, p10, iu, ie) = match mode {
                EvalMode::LosOnly | EvalMode::LosBlocked => {
                    let (sr, iu, ie) = single(f, mode == EvalMode::LosBlocked, None)?;
                    (sr, None, iu, ie)
                }
                EvalMode::Rician { realizations } => {
                    let draws: Vec<(f64, usize, usize)> =
                        (0..realizations.max(1) as u64).map(|r| single(f, true, Some(r))).collect::<Result<_, _>>()?;
                    let srs: Vec<f64> = draws.iter().map(|d| d.0).collect();
                    let worst = argmin(&srs);
                    let mean = srs.iter().sum::<f64>() / srs.len() as f64;
                    (mean, Some(percentile(&srs, 0.1)), draws[worst].1, draws[worst].2)
                }
            };
            Ok(FrequencyResult {
                freq_hz: f,
                sr_min_bits: sr,
                worst_user: user_points[iu],
                best_eve: eve_points[ie],
                sr_p10_bits: p10,
            })
        })
        .collect();
    Ok(SecrecyReport::from_rows(mode, rows?))
}
