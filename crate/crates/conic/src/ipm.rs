//! Primal-dual interior-point method with the HKM search direction and
//! Mehrotra predictor-corrector steps, started from an infeasible point.

use crate::linalg::{self, CMatrix, Op};
use crate::problem::{Atom, ConicProblem, PsdTerm};
use crate::SolverError;
use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

/// Stopping rules and step control.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmSettings {
    /// Target for relative primal/dual infeasibility and relative gap.
    pub tolerance: f64,
    /// Accepted when the iteration budget runs out or progress stalls.
    pub loose_tolerance: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            loose_tolerance: 1e-5,
            max_iterations: 80,
            step_fraction: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// All measures below `tolerance`.
    Optimal,
    /// All measures below `loose_tolerance` only.
    Inaccurate,
}

/// Primal-dual pair returned by a solver.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: CMatrix,
    pub x_linear: Vec<f64>,
    pub y: Vec<f64>,
    pub z: CMatrix,
    pub z_linear: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

/// Anything able to solve a [`ConicProblem`].
pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &ConicProblem) -> Result<Solution, SolverError>;
}

/// The built-in interior-point backend.
#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub settings: IpmSettings,
}

impl InteriorPoint {
    pub fn new(settings: IpmSettings) -> Self {
        Self { settings }
    }
}

impl ConicSolver for InteriorPoint {
    fn name(&self) -> &'static str {
        "interior-point"
    }

    fn solve(&self, problem: &ConicProblem) -> Result<Solution, SolverError> {
        problem.validate()?;
        Ipm::new(problem, &self.settings).run()
    }
}

/// Static layout of atoms and rows, built once per solve.
struct Layout {
    n: usize,
    m: usize,
    dense: Vec<usize>,
    /// All factored vectors side by side.
    w: CMatrix,
    lam: Vec<f64>,
    /// Atom owning each column of `w`.
    col_atom: Vec<usize>,
    /// Row coefficients on the basis {e_n e_n'} ∪ {atoms}; m × (n + atoms).
    basis_coef: DMatrix<f64>,
    /// Linear block coefficients; m × linear_dim.
    g: DMatrix<f64>,
    has_diag: bool,
}

impl Layout {
    fn new(p: &ConicProblem) -> Self {
        let n = p.dim;
        let m = p.constraints.len();
        let na = p.atoms.len();
        let mut dense = Vec::new();
        let mut cols = Vec::new();
        let mut lam = Vec::new();
        let mut col_atom = Vec::new();
        for (a, atom) in p.atoms.iter().enumerate() {
            match atom {
                Atom::Dense(_) => dense.push(a),
                Atom::Factored { vectors, weights } => {
                    for r in 0..vectors.ncols() {
                        cols.push(vectors.column(r).clone_owned());
                        lam.push(weights[r]);
                        col_atom.push(a);
                    }
                }
            }
        }
        let w = if cols.is_empty() {
            CMatrix::zeros(n, 0)
        } else {
            CMatrix::from_columns(&cols)
        };
        let mut basis_coef = DMatrix::zeros(m, n + na);
        let mut g = DMatrix::zeros(m, p.linear_dim);
        let mut has_diag = false;
        for (i, row) in p.constraints.iter().enumerate() {
            match &row.psd {
                PsdTerm::Zero => {}
                PsdTerm::Diagonal(d) => {
                    basis_coef[(i, *d)] += 1.0;
                    has_diag = true;
                }
                PsdTerm::Atoms(t) => {
                    for &(a, c) in t {
                        basis_coef[(i, n + a)] += c;
                    }
                }
            }
            for &(l, c) in &row.linear {
                g[(i, l)] += c;
            }
        }
        Self { n, m, dense, w, lam, col_atom, basis_coef, g, has_diag }
    }

    fn atom_count(&self) -> usize {
        self.basis_coef.ncols() - self.n
    }

    /// `<F_a, Y>` for every atom.
    fn atom_values(&self, atoms: &[Atom], y: &CMatrix) -> Vec<f64> {
        let mut vals = vec![0.0; atoms.len()];
        for &a in &self.dense {
            if let Atom::Dense(f) = &atoms[a] {
                vals[a] = linalg::inner(f, y);
            }
        }
        if self.w.ncols() > 0 {
            let yw = linalg::mul(y, &self.w);
            for (c, &a) in self.col_atom.iter().enumerate() {
                vals[a] += self.lam[c] * self.w.column(c).dotc(&yw.column(c)).re;
            }
        }
        vals
    }

    /// Row values of the PSD part only.
    fn apply_psd(&self, atoms: &[Atom], y: &CMatrix) -> DVector<f64> {
        let mut basis = DVector::zeros(self.basis_coef.ncols());
        for d in 0..self.n {
            basis[d] = y[(d, d)].re;
        }
        for (a, v) in self.atom_values(atoms, y).into_iter().enumerate() {
            basis[self.n + a] = v;
        }
        &self.basis_coef * basis
    }

    fn adjoint_psd(&self, atoms: &[Atom], y: &DVector<f64>) -> CMatrix {
        let basis = self.basis_coef.transpose() * y;
        let mut out = CMatrix::zeros(self.n, self.n);
        for d in 0..self.n {
            out[(d, d)] = Complex64::new(basis[d], 0.0);
        }
        let w: Vec<f64> = (0..self.atom_count()).map(|a| basis[self.n + a]).collect();
        crate::problem::add_atom_combination(atoms, &w, &mut out);
        out
    }

    /// Schur complement `M_ij = Re tr(A_i X A_j Z⁻¹) + Σ_l G_il G_jl x_l / z_l`.
    fn schur(
        &self,
        atoms: &[Atom],
        x: &CMatrix,
        zinv: &CMatrix,
        x_lin: &[f64],
        z_lin: &[f64],
    ) -> DMatrix<f64> {
        let n = self.n;
        let na = self.atom_count();
        let nb = n + na;
        // Gram matrix of the basis under the bilinear form Re tr(B_i X B_j Z⁻¹)
        let mut k = DMatrix::<f64>::zeros(nb, nb);
        if self.has_diag {
            for i in 0..n {
                for j in 0..n {
                    let v = x[(i, j)] * zinv[(j, i)];
                    k[(i, j)] = v.re;
                }
            }
        }

        let nd = self.dense.len();
        let nn = n * n;
        let mut p_stack = CMatrix::zeros(nn, nd);
        let mut qt_stack = CMatrix::zeros(nn, nd);
        let xw = if self.w.ncols() > 0 { linalg::mul(x, &self.w) } else { CMatrix::zeros(n, 0) };
        let zw = if self.w.ncols() > 0 { linalg::mul(zinv, &self.w) } else { CMatrix::zeros(n, 0) };
        let mut fa_xw: Vec<CMatrix> = Vec::with_capacity(nd);
        for (slot, &a) in self.dense.iter().enumerate() {
            let Atom::Dense(f) = &atoms[a] else { unreachable!() };
            let p = linalg::mul(f, x);
            let q = linalg::mul(f, zinv);
            for c in 0..n {
                for r in 0..n {
                    // conj(vec(P)) and vec(Qᵀ)
                    p_stack[(r + c * n, slot)] = p[(r, c)].conj();
                    qt_stack[(r + c * n, slot)] = q[(c, r)];
                }
            }
            if self.has_diag {
                // (X F Z⁻¹)_dd = Σ_m X[d, m] Q[m, d]
                for d in 0..n {
                    let mut acc = 0.0;
                    for mm in 0..n {
                        let v = x[(d, mm)] * q[(mm, d)];
                        acc += v.re;
                    }
                    k[(d, n + a)] = acc;
                    k[(n + a, d)] = acc;
                }
            }
            if self.w.ncols() > 0 {
                fa_xw.push(linalg::mul(f, &xw));
            }
        }
        if nd > 0 {
            let t = linalg::gemm(&p_stack, Op::Adjoint, &qt_stack, Op::None);
            for (i, &a) in self.dense.iter().enumerate() {
                for (j, &b) in self.dense.iter().enumerate() {
                    k[(n + a, n + b)] = t[(i, j)].re;
                }
            }
        }
        if self.w.ncols() > 0 {
            let r = self.w.ncols();
            let xr = linalg::gemm(&self.w, Op::Adjoint, &xw, Op::None);
            let zr = linalg::gemm(&self.w, Op::Adjoint, &zw, Op::None);
            for p in 0..r {
                let a = self.col_atom[p];
                for q in 0..r {
                    let b = self.col_atom[q];
                    let v = (xr[(p, q)] * zr[(q, p)]).re * self.lam[p] * self.lam[q];
                    k[(n + a, n + b)] += v;
                }
                if self.has_diag {
                    for d in 0..n {
                        let v = (xw[(d, p)] * zw[(d, p)].conj()).re * self.lam[p];
                        k[(d, n + a)] += v;
                        k[(n + a, d)] += v;
                    }
                }
            }
            for (slot, &a) in self.dense.iter().enumerate() {
                let fxw = &fa_xw[slot];
                for q in 0..r {
                    let b = self.col_atom[q];
                    let v = zw.column(q).dotc(&fxw.column(q)).re * self.lam[q];
                    k[(n + a, n + b)] += v;
                    k[(n + b, n + a)] += v;
                }
            }
        }

        let mut m = &self.basis_coef * k * self.basis_coef.transpose();
        if self.g.ncols() > 0 {
            let mut scaled = self.g.clone();
            for l in 0..self.g.ncols() {
                scaled.column_mut(l).scale_mut(x_lin[l] / z_lin[l]);
            }
            m += scaled * self.g.transpose();
        }
        // symmetrize against rounding
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }
}

/// Largest `α` with `X + α dX ⪰ 0`; `X` must be positive definite.
fn max_step_psd(x: &CMatrix, dx: &CMatrix) -> Result<f64, SolverError> {
    let chol = Cholesky::new(x.clone()).ok_or(SolverError::Numerical("iterate left the cone"))?;
    let l = chol.l();
    let t = l
        .solve_lower_triangular(dx)
        .ok_or(SolverError::Numerical("triangular solve failed"))?;
    let mut s = l
        .solve_lower_triangular(&t.adjoint())
        .ok_or(SolverError::Numerical("triangular solve failed"))?;
    linalg::hermitianize(&mut s);
    let lmin = linalg::hermitian_eigenvalues(&s)[0];
    Ok(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn max_step_lin(x: &[f64], dx: &[f64]) -> f64 {
    x.iter()
        .zip(dx)
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn hermitian_inverse(m: &CMatrix) -> Result<CMatrix, SolverError> {
    let chol = Cholesky::new(m.clone()).ok_or(SolverError::Numerical("dual iterate left the cone"))?;
    let mut inv = chol.inverse();
    linalg::hermitianize(&mut inv);
    Ok(inv)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Ipm<'a> {
    p: &'a ConicProblem,
    s: &'a IpmSettings,
    layout: Layout,
    b: Vec<f64>,
}

struct Iterate {
    x: CMatrix,
    xl: Vec<f64>,
    y: DVector<f64>,
    z: CMatrix,
    zl: Vec<f64>,
}

struct Direction {
    dx: CMatrix,
    dxl: Vec<f64>,
    dy: DVector<f64>,
    dz: CMatrix,
    dzl: Vec<f64>,
}

impl<'a> Ipm<'a> {
    fn new(p: &'a ConicProblem, s: &'a IpmSettings) -> Self {
        Self { p, s, layout: Layout::new(p), b: p.rhs() }
    }

    fn start(&self) -> Iterate {
        let n = self.p.dim as f64;
        let atom_norms: Vec<f64> = self.p.atoms.iter().map(Atom::norm).collect();
        let mut xi = 10f64.max(n.sqrt());
        let mut zeta = 10f64.max(n.sqrt()).max(self.p.objective.norm());
        for (i, row) in self.p.constraints.iter().enumerate() {
            let psd_norm = match &row.psd {
                PsdTerm::Zero => 0.0,
                PsdTerm::Diagonal(_) => 1.0,
                PsdTerm::Atoms(t) => t.iter().map(|&(a, c)| c.abs() * atom_norms[a]).sum(),
            };
            let lin_norm = norm(&row.linear.iter().map(|t| t.1).collect::<Vec<_>>());
            let row_norm = psd_norm + lin_norm;
            xi = xi.max(n.max(1.0) * (1.0 + self.b[i].abs()) / (1.0 + row_norm));
            zeta = zeta.max(row_norm);
        }
        zeta = zeta.max(norm(&self.p.objective_linear));
        let dim = self.p.dim;
        Iterate {
            x: CMatrix::identity(dim, dim) * Complex64::new(xi, 0.0),
            xl: vec![xi; self.p.linear_dim],
            y: DVector::zeros(self.layout.m),
            z: CMatrix::identity(dim, dim) * Complex64::new(zeta, 0.0),
            zl: vec![zeta; self.p.linear_dim],
        }
    }

    fn linear_apply(&self, v: &[f64]) -> DVector<f64> {
        if v.is_empty() {
            return DVector::zeros(self.layout.m);
        }
        &self.layout.g * DVector::from_column_slice(v)
    }

    fn linear_adjoint(&self, y: &DVector<f64>) -> Vec<f64> {
        if self.p.linear_dim == 0 {
            return Vec::new();
        }
        (self.layout.g.transpose() * y).iter().copied().collect()
    }

    /// Solves the Newton system given the right-hand-side builders
    /// `rhs_psd` (the dX terms independent of dy) and `rhs_lin`.
    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        zinv: &CMatrix,
        schur: &Cholesky<f64, nalgebra::Dyn>,
        rp: &DVector<f64>,
        rd: &CMatrix,
        rdl: &[f64],
        rhs_psd: CMatrix,
        rhs_lin: Vec<f64>,
    ) -> Direction {
        let atoms = &self.p.atoms;
        let h = rp - self.layout.apply_psd(atoms, &rhs_psd) - self.linear_apply(&rhs_lin);
        let dy = schur.solve(&h);
        let aty = self.layout.adjoint_psd(atoms, &dy);
        let dz = rd - &aty;
        let gty = self.linear_adjoint(&dy);
        let dzl: Vec<f64> = rdl.iter().zip(&gty).map(|(r, g)| r - g).collect();
        let mut dx = rhs_psd + linalg::mul(&linalg::mul(&it.x, &aty), zinv);
        linalg::hermitianize(&mut dx);
        let dxl: Vec<f64> = (0..self.p.linear_dim)
            .map(|l| rhs_lin[l] + it.xl[l] / it.zl[l] * gty[l])
            .collect();
        Direction { dx, dxl, dy, dz, dzl }
    }

    fn step_lengths(&self, it: &Iterate, d: &Direction) -> Result<(f64, f64), SolverError> {
        let ap = max_step_psd(&it.x, &d.dx)?.min(max_step_lin(&it.xl, &d.dxl));
        let ad = max_step_psd(&it.z, &d.dz)?.min(max_step_lin(&it.zl, &d.dzl));
        Ok((ap, ad))
    }

    fn run(&self) -> Result<Solution, SolverError> {
        let p = self.p;
        let atoms = &p.atoms;
        let nu = (p.dim + p.linear_dim) as f64;
        let b = DVector::from_column_slice(&self.b);
        let cnorm = p.objective.norm() + norm(&p.objective_linear);
        let mut it = self.start();
        let mut best: Option<(f64, Solution)> = None;
        let mut stalled = 0;
        let mut best_iter = 0;

        for iter in 0..=self.s.max_iterations {
            let zinv = hermitian_inverse(&it.z)?;
            let xl: Vec<f64> = it.xl.clone();
            let ax = self.layout.apply_psd(atoms, &it.x) + self.linear_apply(&xl);
            let rp = &b - ax;
            let aty = self.layout.adjoint_psd(atoms, &it.y);
            let rd = &p.objective - &aty - &it.z;
            let gty = self.linear_adjoint(&it.y);
            let rdl: Vec<f64> = (0..p.linear_dim)
                .map(|l| p.objective_linear[l] - gty[l] - it.zl[l])
                .collect();
            let complementarity = linalg::inner(&it.x, &it.z) + dot(&it.xl, &it.zl);
            let mu = complementarity / nu;
            let pobj = p.objective_value(&it.x, &it.xl);
            let dobj = b.dot(&it.y);
            // per row, so small right-hand sides are not swamped by large ones
            let pinf = rp.iter().zip(&self.b).map(|(r, b)| r.abs() / (1.0 + b.abs())).fold(0.0, f64::max);
            let dinf = (rd.norm() + norm(&rdl)) / (1.0 + cnorm);
            let gap = complementarity.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
            let merit = pinf.max(dinf).max(gap);
            log::trace!(
                "ipm iter {iter}: pobj {pobj:.6e} dobj {dobj:.6e} pinf {pinf:.2e} dinf {dinf:.2e} gap {gap:.2e}"
            );
            if !merit.is_finite() {
                break;
            }
            let snapshot = |status| Solution {
                x: it.x.clone(),
                x_linear: it.xl.clone(),
                y: it.y.iter().copied().collect(),
                z: it.z.clone(),
                z_linear: it.zl.clone(),
                primal_objective: pobj,
                dual_objective: dobj,
                iterations: iter,
                status,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                relative_gap: gap,
            };
            if merit < self.s.tolerance {
                return Ok(snapshot(SolveStatus::Optimal));
            }
            if best.as_ref().is_none_or(|(m, _)| merit < *m) {
                best = Some((merit, snapshot(SolveStatus::Inaccurate)));
                best_iter = iter;
            }
            // past the loose target, give up once progress stops
            let stagnant = merit_ok(&best, self.s.loose_tolerance) && iter - best_iter >= 5;
            if iter == self.s.max_iterations || stalled >= 3 || stagnant {
                break;
            }

            let schur_m = self.layout.schur(atoms, &it.x, &zinv, &it.xl, &it.zl);
            let schur = factor_schur(schur_m)?;
            let x_rd_zinv = linalg::mul(&linalg::mul(&it.x, &rd), &zinv);

            // predictor
            let rhs_psd = -&it.x - &x_rd_zinv;
            let rhs_lin: Vec<f64> = (0..p.linear_dim)
                .map(|l| -it.xl[l] - it.xl[l] / it.zl[l] * rdl[l])
                .collect();
            let aff = self.direction(&it, &zinv, &schur, &rp, &rd, &rdl, rhs_psd, rhs_lin);
            let (ap, ad) = self.step_lengths(&it, &aff)?;
            let (ap_aff, ad_aff) = (ap.min(1.0), ad.min(1.0));
            let x_aff = &it.x + &aff.dx * Complex64::new(ap_aff, 0.0);
            let z_aff = &it.z + &aff.dz * Complex64::new(ad_aff, 0.0);
            let lin_aff: f64 = (0..p.linear_dim)
                .map(|l| (it.xl[l] + ap_aff * aff.dxl[l]) * (it.zl[l] + ad_aff * aff.dzl[l]))
                .sum();
            let mu_aff = (linalg::inner(&x_aff, &z_aff) + lin_aff) / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let second = linalg::mul(&linalg::mul(&aff.dx, &aff.dz), &zinv);
            let rhs_psd = -&it.x + &zinv * Complex64::new(sigma * mu, 0.0) - &x_rd_zinv - second;
            let rhs_lin: Vec<f64> = (0..p.linear_dim)
                .map(|l| {
                    -it.xl[l] + sigma * mu / it.zl[l]
                        - it.xl[l] / it.zl[l] * rdl[l]
                        - aff.dxl[l] * aff.dzl[l] / it.zl[l]
                })
                .collect();
            let dir = self.direction(&it, &zinv, &schur, &rp, &rd, &rdl, rhs_psd, rhs_lin);
            let (ap, ad) = self.step_lengths(&it, &dir)?;
            // stay further from the boundary when the predictor was blocked
            let fraction = 0.9 + (self.s.step_fraction - 0.9) * ap_aff.min(ad_aff);
            let mut ap = (fraction * ap).min(1.0);
            let mut ad = (fraction * ad).min(1.0);
            // rounding can leave a boundary step just outside the cone
            let (x_next, z_next) = loop {
                let mut x = &it.x + &dir.dx * Complex64::new(ap, 0.0);
                linalg::hermitianize(&mut x);
                let mut z = &it.z + &dir.dz * Complex64::new(ad, 0.0);
                linalg::hermitianize(&mut z);
                if Cholesky::new(x.clone()).is_some() && Cholesky::new(z.clone()).is_some() {
                    break (x, z);
                }
                if ap.max(ad) < 1e-12 {
                    return Err(SolverError::Numerical("iterate left the cone"));
                }
                ap *= 0.5;
                ad *= 0.5;
            };
            if ap < 1e-8 && ad < 1e-8 {
                stalled += 1;
            } else {
                stalled = 0;
            }
            log::trace!("steps ap {ap:.3e} ad {ad:.3e} sigma {sigma:.2e} mu {mu:.2e}");
            it.x = x_next;
            it.z = z_next;
            it.y += &dir.dy * ad;
            for l in 0..p.linear_dim {
                it.xl[l] += ap * dir.dxl[l];
                it.zl[l] += ad * dir.dzl[l];
            }
        }

        match best {
            Some((merit, sol)) if merit < self.s.loose_tolerance => Ok(sol),
            Some((merit, sol)) => Err(SolverError::NotConverged {
                iterations: sol.iterations,
                residual: merit,
            }),
            None => Err(SolverError::Numerical("non-finite residuals")),
        }
    }
}

fn merit_ok(best: &Option<(f64, Solution)>, tolerance: f64) -> bool {
    best.as_ref().is_some_and(|(m, _)| *m < tolerance)
}

/// Cholesky of the Schur complement with a growing diagonal shift on failure.
fn factor_schur(m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, SolverError> {
    if m.nrows() == 0 {
        return Cholesky::new(m).ok_or(SolverError::Numerical("empty Schur complement"));
    }
    let scale = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..8 {
        let mut t = m.clone();
        for i in 0..t.nrows() {
            t[(i, i)] += shift;
        }
        if let Some(c) = Cholesky::new(t) {
            return Ok(c);
        }
        shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
    }
    Err(SolverError::Numerical("Schur complement is not positive definite"))
}
