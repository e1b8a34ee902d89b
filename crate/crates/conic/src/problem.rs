//! Problem description in standard primal form.
//!
//! ```text
//! minimize    <C, X> + c_lin' x
//! subject to  <A_i, X> + (G x)_i = b_i      i = 1..m
//!             X Hermitian positive semidefinite, x >= 0
//! ```
//!
//! Constraint matrices `A_i` are either a single diagonal selector `e_n e_n'`
//! or a real combination of shared Hermitian atoms. Sharing matters: many
//! rows reuse the same few atoms and the Schur complement is assembled at the
//! atom level.

use crate::linalg::{self, CMatrix, Op};
use crate::SolverError;
use num_complex::Complex64;

/// Hermitian matrix used as a building block of constraint rows.
#[derive(Debug, Clone)]
pub enum Atom {
    /// Explicit Hermitian matrix.
    Dense(CMatrix),
    /// `Σ_r weights[r] · v_r v_rᴴ` with `v_r` the columns of `vectors`.
    Factored { vectors: CMatrix, weights: Vec<f64> },
}

impl Atom {
    pub fn dim(&self) -> usize {
        match self {
            Atom::Dense(m) => m.nrows(),
            Atom::Factored { vectors, .. } => vectors.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Atom::Dense(m) => m.clone(),
            Atom::Factored { vectors, weights } => {
                let scaled = scale_columns(vectors, weights);
                linalg::gemm(&scaled, Op::None, vectors, Op::Adjoint)
            }
        }
    }

    /// `Re tr(self · y)`.
    pub fn inner(&self, y: &CMatrix) -> f64 {
        match self {
            Atom::Dense(m) => linalg::inner(m, y),
            Atom::Factored { vectors, weights } => {
                let yv = linalg::mul(y, vectors);
                weights
                    .iter()
                    .enumerate()
                    .map(|(r, w)| w * vectors.column(r).dotc(&yv.column(r)).re)
                    .sum()
            }
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        match self {
            Atom::Dense(m) => m.norm(),
            Atom::Factored { vectors, weights } => {
                let gram = linalg::gemm(vectors, Op::Adjoint, vectors, Op::None);
                let mut acc = 0.0;
                for p in 0..weights.len() {
                    for q in 0..weights.len() {
                        acc += weights[p] * weights[q] * gram[(p, q)].norm_sqr();
                    }
                }
                acc.max(0.0).sqrt()
            }
        }
    }

    /// Low-rank approximation of a Hermitian matrix: eigenpairs with
    /// `|λ| > rel_tol · max|λ|` are kept. Falls back to the dense form when
    /// truncation does not reduce the rank below half the dimension.
    pub fn compress(m: &CMatrix, rel_tol: f64) -> Atom {
        let (vals, vecs) = linalg::hermitian_eigen(m);
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&i| vals[i].abs() > rel_tol * scale)
            .collect();
        if 2 * keep.len() >= m.nrows().max(1) {
            return Atom::Dense(m.clone());
        }
        let vectors = CMatrix::from_fn(m.nrows(), keep.len(), |r, c| vecs[(r, keep[c])]);
        let weights = keep.iter().map(|&i| vals[i]).collect();
        Atom::Factored { vectors, weights }
    }
}

pub(crate) fn scale_columns(m: &CMatrix, w: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (c, &s) in w.iter().enumerate() {
        out.column_mut(c).scale_mut(s);
    }
    out
}

/// PSD part of a constraint row.
#[derive(Debug, Clone, PartialEq)]
pub enum PsdTerm {
    /// The row does not touch `X`.
    Zero,
    /// `X[n, n]`.
    Diagonal(usize),
    /// `Σ coef · <atoms[index], X>`.
    Atoms(Vec<(usize, f64)>),
}

/// One equality row.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub psd: PsdTerm,
    /// Sparse coefficients on the nonnegative vector `x`.
    pub linear: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    /// Side length of the Hermitian block.
    pub dim: usize,
    /// Length of the nonnegative vector.
    pub linear_dim: usize,
    /// Hermitian cost matrix on the PSD block.
    pub objective: CMatrix,
    pub objective_linear: Vec<f64>,
    pub atoms: Vec<Atom>,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new(dim: usize, linear_dim: usize) -> Self {
        Self {
            dim,
            linear_dim,
            objective: CMatrix::zeros(dim, dim),
            objective_linear: vec![0.0; linear_dim],
            atoms: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.atoms.len() - 1
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidProblem(msg));
        if self.objective.shape() != (self.dim, self.dim) {
            return bad("objective shape does not match dimension".into());
        }
        if self.objective_linear.len() != self.linear_dim {
            return bad("linear objective length does not match linear dimension".into());
        }
        if self.objective.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return bad("objective has non-finite entries".into());
        }
        for (i, atom) in self.atoms.iter().enumerate() {
            if atom.dim() != self.dim {
                return bad(format!("atom {i} has dimension {}", atom.dim()));
            }
            if let Atom::Factored { vectors, weights } = atom {
                if vectors.ncols() != weights.len() {
                    return bad(format!("atom {i}: weight count differs from vector count"));
                }
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return bad(format!("constraint {i} has non-finite right-hand side"));
            }
            match &row.psd {
                PsdTerm::Zero => {}
                PsdTerm::Diagonal(n) if *n >= self.dim => {
                    return bad(format!("constraint {i} selects diagonal {n}"));
                }
                PsdTerm::Diagonal(_) => {}
                PsdTerm::Atoms(terms) => {
                    for &(a, c) in terms {
                        if a >= self.atoms.len() || !c.is_finite() {
                            return bad(format!("constraint {i} has an invalid atom term"));
                        }
                    }
                }
            }
            for &(l, c) in &row.linear {
                if l >= self.linear_dim || !c.is_finite() {
                    return bad(format!("constraint {i} has an invalid linear term"));
                }
            }
        }
        Ok(())
    }

    /// Row values `<A_i, X> + (G x)_i`.
    pub fn apply(&self, x_psd: &CMatrix, x_lin: &[f64]) -> Vec<f64> {
        let atom_vals: Vec<f64> = self.atoms.iter().map(|a| a.inner(x_psd)).collect();
        self.constraints
            .iter()
            .map(|row| {
                let psd = match &row.psd {
                    PsdTerm::Zero => 0.0,
                    PsdTerm::Diagonal(n) => x_psd[(*n, *n)].re,
                    PsdTerm::Atoms(t) => t.iter().map(|&(a, c)| c * atom_vals[a]).sum(),
                };
                psd + row.linear.iter().map(|&(l, c)| c * x_lin[l]).sum::<f64>()
            })
            .collect()
    }

    /// `Σ_i y_i A_i` and `G' y`.
    pub fn adjoint(&self, y: &[f64]) -> (CMatrix, Vec<f64>) {
        let mut psd = CMatrix::zeros(self.dim, self.dim);
        let mut lin = vec![0.0; self.linear_dim];
        let mut atom_w = vec![0.0; self.atoms.len()];
        for (row, &yi) in self.constraints.iter().zip(y) {
            match &row.psd {
                PsdTerm::Zero => {}
                PsdTerm::Diagonal(n) => psd[(*n, *n)] += Complex64::new(yi, 0.0),
                PsdTerm::Atoms(t) => {
                    for &(a, c) in t {
                        atom_w[a] += c * yi;
                    }
                }
            }
            for &(l, c) in &row.linear {
                lin[l] += c * yi;
            }
        }
        add_atom_combination(&self.atoms, &atom_w, &mut psd);
        (psd, lin)
    }

    pub fn objective_value(&self, x_psd: &CMatrix, x_lin: &[f64]) -> f64 {
        linalg::inner(&self.objective, x_psd)
            + self
                .objective_linear
                .iter()
                .zip(x_lin)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|r| r.rhs).collect()
    }
}

/// `target += Σ_a w_a F_a`, batching factored atoms into one product.
pub(crate) fn add_atom_combination(atoms: &[Atom], w: &[f64], target: &mut CMatrix) {
    let n = target.nrows();
    let mut cols: Vec<(usize, usize)> = Vec::new();
    let mut total = 0;
    for (a, atom) in atoms.iter().enumerate() {
        if w[a] == 0.0 {
            continue;
        }
        match atom {
            Atom::Dense(m) => {
                target.zip_apply(m, |t, v| *t += v * w[a]);
            }
            Atom::Factored { vectors, .. } => {
                cols.push((a, total));
                total += vectors.ncols();
            }
        }
    }
    if total == 0 {
        return;
    }
    let mut left = CMatrix::zeros(n, total);
    let mut right = CMatrix::zeros(n, total);
    for &(a, offset) in &cols {
        if let Atom::Factored { vectors, weights } = &atoms[a] {
            for (r, &lam) in weights.iter().enumerate() {
                right.column_mut(offset + r).copy_from(&vectors.column(r));
                left.column_mut(offset + r)
                    .copy_from(&(vectors.column(r) * Complex64::new(lam * w[a], 0.0)));
            }
        }
    }
    linalg::gemm_into(
        Complex64::new(1.0, 0.0),
        &left,
        Op::None,
        &right,
        Op::Adjoint,
        Complex64::new(1.0, 0.0),
        target,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rank: usize, rng: &mut ChaCha8Rng) -> (CMatrix, Vec<f64>) {
        let v = CMatrix::from_fn(n, rank, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let w: Vec<f64> = (0..rank).map(|_| rng.random_range(-2.0..2.0)).collect();
        (v, w)
    }

    #[test]
    fn factored_and_dense_atoms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (v, w) = random_hermitian(6, 2, &mut rng);
        let fact = Atom::Factored { vectors: v, weights: w };
        let dense = Atom::Dense(fact.to_dense());
        let (y, _) = random_hermitian(6, 6, &mut rng);
        let y = y.clone() + y.adjoint();
        assert!((fact.inner(&y) - dense.inner(&y)).abs() < 1e-10);
        assert!((fact.norm() - dense.norm()).abs() < 1e-10);
    }

    #[test]
    fn compress_recovers_low_rank_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (v, w) = random_hermitian(8, 2, &mut rng);
        let m = Atom::Factored { vectors: v, weights: w }.to_dense();
        let c = Atom::compress(&m, 1e-12);
        assert!(matches!(c, Atom::Factored { ref weights, .. } if weights.len() == 2));
        assert!((c.to_dense() - m).norm() < 1e-10);
    }

    #[test]
    fn adjoint_is_transpose_of_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 5;
        let mut p = ConicProblem::new(n, 3);
        let (v, w) = random_hermitian(n, 2, &mut rng);
        let a0 = p.add_atom(Atom::Factored { vectors: v, weights: w });
        let (d, _) = random_hermitian(n, n, &mut rng);
        let a1 = p.add_atom(Atom::Dense(&d + d.adjoint()));
        p.constraints.push(Constraint {
            psd: PsdTerm::Diagonal(2),
            linear: vec![(0, 1.5)],
            rhs: 1.0,
        });
        p.constraints.push(Constraint {
            psd: PsdTerm::Atoms(vec![(a0, 0.7), (a1, -1.2)]),
            linear: vec![(1, -1.0), (2, 0.3)],
            rhs: 0.0,
        });
        p.constraints.push(Constraint { psd: PsdTerm::Zero, linear: vec![(2, 1.0)], rhs: 2.0 });
        p.validate().unwrap();

        let (x, _) = random_hermitian(n, n, &mut rng);
        let x = &x + x.adjoint();
        let xl = [0.3, -0.4, 1.1];
        let y = [0.9, -0.2, 0.5];
        let ax = p.apply(&x, &xl);
        let (aty, gty) = p.adjoint(&y);
        let lhs: f64 = ax.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs = linalg::inner(&aty, &x) + gty.iter().zip(&xl).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn validate_rejects_out_of_range_indices() {
        let mut p = ConicProblem::new(3, 1);
        p.constraints.push(Constraint { psd: PsdTerm::Diagonal(3), linear: vec![], rhs: 0.0 });
        assert!(p.validate().is_err());
        p.constraints[0] = Constraint { psd: PsdTerm::Atoms(vec![(0, 1.0)]), linear: vec![], rhs: 0.0 };
        assert!(p.validate().is_err());
        p.constraints[0] = Constraint { psd: PsdTerm::Zero, linear: vec![(1, 1.0)], rhs: 0.0 };
        assert!(p.validate().is_err());
    }
}
