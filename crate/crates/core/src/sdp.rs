//! Semidefinite-relaxation optimizer.
//!
//! The profile is lifted to `S_c = s_c s_cᴴ` (unit diagonal, PSD). Each
//! inner step solves a convex subproblem in which
//! * the per-frequency Hadamard powers `S_c^∘β_k` are linearized around the
//!   previous iterate,
//! * the rank-one constraint becomes the penalty `η (‖S_c‖_* − ‖S_c‖₂)` with
//!   `‖S_c‖_* = tr S_c = N` and `‖S_c‖₂` linearized from below,
//! * the rate ratio `γ` inside the constraint matrices is held fixed.
//!
//! The outer loop refreshes `γ` in closed form and restarts the penalty.

use crate::io::IterationRecord;
use crate::lc_phase::{wrap_phase, PhaseProfile};
use crate::linalg::{self, CMatrix, CVector};
use crate::scenario::HyperParams;
use crate::secrecy::{QuadraticFormSet, Role};
use crate::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use riswb_conic::{Atom, ConicProblem, ConicSolver, Constraint, InteriorPoint, IpmSettings, PsdTerm, SolverError};
use std::f64::consts::{PI, TAU};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOptions {
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub eta0: f64,
    pub penalty_growth: f64,
    /// Keep growing the penalty across outer iterations instead of resetting it.
    pub eta_persist: bool,
    pub gamma0: f64,
    /// Relative eigenvalue cutoff when factoring the Taylor slope matrices.
    pub atom_tolerance: f64,
    pub solver: IpmSettings,
}

impl SdpOptions {
    pub fn from_hyper(h: &HyperParams) -> Self {
        Self {
            outer_iterations: h.sdp_outer,
            inner_iterations: h.sdp_inner,
            eta0: h.eta0,
            penalty_growth: h.penalty_growth,
            eta_persist: false,
            gamma0: h.gamma0,
            atom_tolerance: 1e-10,
            solver: IpmSettings::default(),
        }
    }
}

/// `A_k^u(p_u) − γ A_k^e(p_e)`.
pub fn build_a_diff(forms: &QuadraticFormSet, gamma: f64, k: usize, u: usize, e: usize) -> CMatrix {
    forms.dense(k, Role::User, u) - forms.dense(k, Role::Eve, e) * Complex64::new(gamma, 0.0)
}

/// Wraps an angle into `(−π, π]`.
fn wrap_pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI { r - TAU } else { r }
}

/// Entrywise power `[S]_mn^p = |S_mn|^p exp(j p θ_mn)`, where the branch of
/// `θ_mn = arg S_mn` is the one closest to `φ_m − φ_n` for the anchor
/// phases `φ ∈ [0, 2π)`. For `S = s sᴴ` with `s = exp(jφ)` this gives
/// exactly `s^p (s^p)ᴴ`, so rank one, PSD and unit diagonal are preserved.
pub fn hadamard_power(s: &CMatrix, anchor: &[f64], p: f64) -> Result<CMatrix, Error> {
    let n = s.nrows();
    if p == 0.0 {
        return Ok(CMatrix::from_element(n, n, Complex64::new(1.0, 0.0)));
    }
    let mut out = CMatrix::zeros(n, n);
    for c in 0..n {
        for r in 0..n {
            let z = s[(r, c)];
            let m = z.norm();
            if m < 1e-12 {
                if p < 0.0 {
                    return Err(Error::TaylorReference(m));
                }
                continue;
            }
            let base = anchor[r] - anchor[c];
            let theta = base + wrap_pi(z.arg() - base);
            out[(r, c)] = Complex64::from_polar(m.powf(p), p * theta);
        }
    }
    Ok(out)
}

/// First-order expansion of `S ↦ S^∘β` at `S_ref`: returns the constant
/// `S_ref^∘β` and the slope `β S_ref^∘(β−1)`, so that
/// `S^∘β ≈ constant + slope ∘ (S − S_ref)`.
pub fn hadamard_taylor(s_ref: &CMatrix, anchor: &[f64], beta_k: f64) -> Result<(CMatrix, CMatrix), Error> {
    let min_mod = s_ref.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if beta_k != 1.0 && min_mod < 1e-12 {
        return Err(Error::TaylorReference(min_mod));
    }
    let constant = hadamard_power(s_ref, anchor, beta_k)?;
    let slope = hadamard_power(s_ref, anchor, beta_k - 1.0)? * Complex64::new(beta_k, 0.0);
    Ok((constant, slope))
}

/// Linear lower bound of the spectral norm at `S_ref`:
/// `‖S‖₂ ≥ ‖S_ref‖₂ + tr(v vᴴ (S − S_ref))` with `v` a top eigenvector.
/// Returns the norm, `v`, and the gradient `v vᴴ`.
pub fn spectral_taylor(s_ref: &CMatrix) -> (f64, CVector, CMatrix) {
    let (vals, vecs) = linalg::hermitian_eigen(s_ref);
    let last = vals.len() - 1;
    let v = vecs.column(last).clone_owned();
    let grad = &v * v.adjoint();
    (vals[last], v, grad)
}

/// `‖S‖_* − ‖S‖₂` for Hermitian `S`.
pub fn rank_gap(s: &CMatrix) -> f64 {
    let vals = linalg::hermitian_eigenvalues(s);
    let nuclear: f64 = vals.iter().map(|v| v.abs()).sum();
    let spectral = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    nuclear - spectral
}

/// Phases of the top eigenvector, rotated so its global phase best matches
/// `reference` (when given), mapped into `[0, 2π)`.
pub fn principal_phases(s: &CMatrix, reference: Option<&[f64]>) -> Vec<f64> {
    let (_, v, _) = spectral_taylor(s);
    let rot = match reference {
        Some(r) => {
            let c: Complex64 = v.iter().zip(r).map(|(x, &p)| x * Complex64::from_polar(1.0, -p)).sum();
            if c.norm() > 0.0 { Complex64::from_polar(1.0, -c.arg()) } else { Complex64::new(1.0, 0.0) }
        }
        None => Complex64::new(1.0, 0.0),
    };
    v.iter().map(|x| wrap_phase((x * rot).arg())).collect()
}

/// Unit-modulus profile from the top eigenvector of `S_c`.
pub fn extract_profile(s: &CMatrix, beta: f64, center_hz: f64) -> PhaseProfile {
    let gap = rank_gap(s);
    if gap > 1e-3 * s.nrows() as f64 {
        log::warn!("extracting a profile from a matrix with rank gap {gap:.3e}");
    }
    PhaseProfile::new(&principal_phases(s, None), beta, center_hz)
}

/// Result of one convex subproblem.
#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s: CMatrix,
    /// Value of the penalized subproblem objective at `s`.
    pub objective: f64,
    /// Optimal value of the free rate variable.
    pub gamma_var: f64,
    pub solver_iterations: usize,
}

/// Taylor data of one design frequency.
struct FrequencyTaylor {
    constant: CMatrix,
    /// `conj(D_k) ≈ Σ w_r v_r v_rᴴ` when few eigenvalues are significant.
    factors: Option<(CMatrix, Vec<f64>)>,
    slope_conj: CMatrix,
}

fn frequency_taylor(s_ref: &CMatrix, anchor: &[f64], beta_k: f64, tolerance: f64) -> Result<FrequencyTaylor, Error> {
    let n = s_ref.nrows();
    let (constant, slope) = hadamard_taylor(s_ref, anchor, beta_k)?;
    let slope_conj = slope.conjugate();
    let (vals, vecs) = linalg::hermitian_eigen(&slope_conj);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > tolerance * scale).collect();
    let factors = (2 * keep.len() < n.max(2)).then(|| {
        let v = CMatrix::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])]);
        (v, keep.iter().map(|&i| vals[i]).collect())
    });
    Ok(FrequencyTaylor { constant, factors, slope_conj })
}

/// Builds the per-atom data of the linearized constraints: the atom for
/// `(k, point)` is `diag(a) conj(D_k) diag(a)ᴴ` with `D_k` the Taylor slope,
/// and its constant is `aᴴ C_k a − <atom, S_ref>`. Returns the atoms, their
/// constants, and per frequency the index of the first user and eve atom.
fn linearized_atoms(
    forms: &QuadraticFormSet,
    s_ref: &CMatrix,
    anchor: &[f64],
    tolerance: f64,
) -> Result<(Vec<Atom>, Vec<f64>, Vec<[usize; 2]>), Error> {
    let n = forms.dim();
    let kc = forms.freq_count();
    let nu = forms.user_points.len();
    let ne = forms.eve_points.len();
    let taylor: Vec<FrequencyTaylor> = (0..kc)
        .into_par_iter()
        .map(|k| frequency_taylor(s_ref, anchor, forms.beta_k[k], tolerance))
        .collect::<Result<_, Error>>()?;

    let mut index = Vec::with_capacity(kc);
    let mut jobs = Vec::new();
    for k in 0..kc {
        let base = jobs.len();
        jobs.extend((0..nu).map(|u| (k, Role::User, u)));
        jobs.extend((0..ne).map(|e| (k, Role::Eve, e)));
        index.push([base, base + nu]);
    }
    let built: Vec<(Atom, f64)> = jobs
        .par_iter()
        .map(|&(k, role, idx)| {
            let a = forms.factor(k, role, idx);
            let t = &taylor[k];
            let atom = match &t.factors {
                Some((v, w)) => {
                    let mut vecs = v.clone();
                    for mut col in vecs.column_iter_mut() {
                        col.component_mul_assign(a);
                    }
                    Atom::Factored { vectors: vecs, weights: w.clone() }
                }
                None => Atom::Dense(CMatrix::from_fn(n, n, |r, c| a[r] * t.slope_conj[(r, c)] * a[c].conj())),
            };
            let quad = a.dotc(&(&t.constant * a)).re;
            let constant = quad - atom.inner(s_ref);
            (atom, constant)
        })
        .collect();
    let (atoms, constants) = built.into_iter().unzip();
    Ok((atoms, constants, index))
}

/// Solves one linearized, penalized subproblem around `s_ref`.
#[allow(clippy::too_many_arguments)]
pub fn solve_subproblem(
    solver: &dyn ConicSolver,
    forms: &QuadraticFormSet,
    gamma: f64,
    s_ref: &CMatrix,
    anchor: &[f64],
    eta: f64,
    atom_tolerance: f64,
) -> Result<SubproblemSolution, SolverError> {
    if gamma < 0.0 {
        return Err(SolverError::InvalidProblem("rate ratio must be nonnegative".into()));
    }
    let n = forms.dim();
    let (atoms, constants, index) = linearized_atoms(forms, s_ref, anchor, atom_tolerance)
        .map_err(|e| SolverError::InvalidProblem(e.to_string()))?;
    let (_, top, grad) = spectral_taylor(s_ref);
    let l1: Vec<f64> = atoms.iter().map(|a| linalg::entrywise_l1(&a.to_dense())).collect();

    let kc = forms.freq_count();
    let nu = forms.user_points.len();
    let ne = forms.eve_points.len();
    let tuples = kc * nu * ne;
    // rate variable γ_var = g + shift with g ≥ 0; any shift below the
    // smallest attainable value keeps the reformulation exact
    let mut bound = 0.0f64;
    for k in 0..kc {
        for u in 0..nu {
            for e in 0..ne {
                let (iu, ie) = (index[k][0] + u, index[k][1] + e);
                let b = l1[iu] + gamma * l1[ie] + (constants[iu] - gamma * constants[ie]).abs();
                bound = bound.max(b);
            }
        }
    }
    let shift = -bound;

    let build = |scaled: bool| {
        let mut p = ConicProblem::new(n, 1 + tuples);
        p.objective = grad.clone() * Complex64::new(-eta, 0.0);
        p.objective_linear[0] = -1.0;
        p.atoms = atoms.clone();
        for d in 0..n {
            p.constraints.push(Constraint { psd: PsdTerm::Diagonal(d), linear: vec![], rhs: 1.0 });
        }
        let mut t = 0;
        for k in 0..kc {
            for u in 0..nu {
                for e in 0..ne {
                    let (iu, ie) = (index[k][0] + u, index[k][1] + e);
                    let c = constants[iu] - gamma * constants[ie];
                    let w = if scaled { 1.0 / (1.0 + l1[iu] + gamma * l1[ie]) } else { 1.0 };
                    p.constraints.push(Constraint {
                        psd: PsdTerm::Atoms(vec![(iu, w), (ie, -gamma * w)]),
                        linear: vec![(0, -w), (1 + t, -w)],
                        rhs: w * (shift - 1.0 - c),
                    });
                    t += 1;
                }
            }
        }
        p
    };

    let sol = match solver.solve(&build(false)) {
        Ok(s) => s,
        Err(SolverError::InvalidProblem(m)) => return Err(SolverError::InvalidProblem(m)),
        Err(first) => {
            log::debug!("subproblem retry with scaled rows after: {first}");
            solver.solve(&build(true))?
        }
    };
    let mut s = sol.x;
    linalg::hermitianize(&mut s);
    // D^{-1/2} S D^{-1/2} removes the solver's residual on the unit diagonal
    let d: Vec<f64> = (0..n).map(|i| 1.0 / s[(i, i)].re.max(f64::MIN_POSITIVE).sqrt()).collect();
    for c in 0..n {
        for r in 0..n {
            s[(r, c)] *= d[r] * d[c];
        }
    }
    let gamma_var = sol.x_linear[0] + shift;
    let objective = gamma_var - eta * (n as f64 - top.dotc(&(&s * &top)).re);
    Ok(SubproblemSolution { s, objective, gamma_var, solver_iterations: sol.iterations })
}

/// Iteration state of the semidefinite optimizer.
#[derive(Debug, Clone)]
pub struct SdpState {
    pub s_c: CMatrix,
    /// Phases of the rank-one reference used for the Hadamard branch.
    pub anchor: Vec<f64>,
    pub gamma: f64,
    pub eta: f64,
    pub outer: usize,
    pub inner: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct SdpOutcome {
    pub profile: PhaseProfile,
    pub state: SdpState,
    /// `γ` after each outer iteration (starting with the seed value).
    pub gammas: Vec<f64>,
    /// Rank gap after the last inner iteration of each outer iteration.
    pub rank_gaps: Vec<f64>,
}

/// Random unit-modulus start `exp(j 2π u)`, `u ~ U[0, 1)^N`.
pub fn random_phases(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| TAU * rng.random::<f64>()).collect()
}

/// Runs the alternating optimization with the built-in interior-point backend.
pub fn run_sdp(
    forms: &QuadraticFormSet,
    options: &SdpOptions,
    seed: u64,
    beta: f64,
    center_hz: f64,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<SdpOutcome, Error> {
    let solver = InteriorPoint::new(options.solver.clone());
    run_sdp_with(&solver, forms, options, seed, beta, center_hz, log)
}

/// Runs the alternating optimization with a caller-provided conic backend.
#[allow(clippy::too_many_arguments)]
pub fn run_sdp_with(
    solver: &dyn ConicSolver,
    forms: &QuadraticFormSet,
    options: &SdpOptions,
    seed: u64,
    beta: f64,
    center_hz: f64,
    log: &mut dyn FnMut(&IterationRecord),
) -> Result<SdpOutcome, Error> {
    let n = forms.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = random_phases(n, &mut rng);
    let s0 = linalg::CVector::from_iterator(n, anchor.iter().map(|&p| Complex64::from_polar(1.0, p)));
    let mut state = SdpState {
        s_c: &s0 * s0.adjoint(),
        anchor,
        gamma: options.gamma0,
        eta: options.eta0,
        outer: 0,
        inner: 0,
        history: Vec::new(),
    };
    let mut gammas = vec![state.gamma];
    let mut rank_gaps = Vec::new();

    for j in 1..=options.outer_iterations {
        if j == 1 || !options.eta_persist {
            state.eta = options.eta0;
        }
        for i in 1..=options.inner_iterations {
            let start = Instant::now();
            let sol = solve_subproblem(solver, forms, state.gamma, &state.s_c, &state.anchor, state.eta, options.atom_tolerance)
                .map_err(|source| Error::Solver { outer: j, inner: i, source })?;
            state.anchor = principal_phases(&sol.s, Some(&state.anchor));
            state.s_c = sol.s;
            state.outer = j;
            state.inner = i;
            let record = IterationRecord {
                method: "sdp".into(),
                restart: None,
                outer: j,
                inner: i,
                gamma: state.gamma,
                rank_gap: Some(rank_gap(&state.s_c)),
                objective: Some(sol.objective),
                lse_bound: None,
                min_sr: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            log(&record);
            state.history.push(record);
            state.eta *= options.penalty_growth;
        }
        rank_gaps.push(rank_gap(&state.s_c));
        let per_freq: Vec<CMatrix> = forms
            .beta_k
            .iter()
            .map(|&b| hadamard_power(&state.s_c, &state.anchor, b))
            .collect::<Result<_, _>>()?;
        state.gamma = forms.gamma_from_matrices(&per_freq);
        gammas.push(state.gamma);
    }
    let profile = PhaseProfile::new(&state.anchor, beta, center_hz);
    Ok(SdpOutcome { profile, state, gammas, rank_gaps })
}
