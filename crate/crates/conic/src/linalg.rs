//! Dense complex kernels shared by the solver and its callers.
//!
//! Matrix products go through `matrixmultiply::zgemm`; nalgebra's generic
//! product is several times slower for `Complex<f64>`.

use matrixmultiply::CGemmOption;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Operand transformation applied before multiplication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// Use the matrix as is.
    None,
    /// Conjugate transpose.
    Adjoint,
}

fn op_dims(m: &CMatrix, op: Op) -> (usize, usize) {
    match op {
        Op::None => (m.nrows(), m.ncols()),
        Op::Adjoint => (m.ncols(), m.nrows()),
    }
}

fn op_layout(m: &CMatrix, op: Op) -> (isize, isize) {
    // column-major storage: element (i, j) at i + j * nrows
    let rows = m.nrows() as isize;
    match op {
        Op::None => (1, rows),
        Op::Adjoint => (rows, 1),
    }
}

/// `c <- alpha * op(a) * op(b) + beta * c`.
pub fn gemm_into(
    alpha: Complex64,
    a: &CMatrix,
    op_a: Op,
    b: &CMatrix,
    op_b: Op,
    beta: Complex64,
    c: &mut CMatrix,
) {
    let (m, k) = op_dims(a, op_a);
    let (kb, n) = op_dims(b, op_b);
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.nrows(), c.ncols()), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.iter_mut() {
            *v *= beta;
        }
        return;
    }
    // zgemm has no conjugation flag, so adjoint operands are conjugated up
    // front and read through transposed strides
    let a_conj;
    let a = match op_a {
        Op::None => a,
        Op::Adjoint => {
            a_conj = a.conjugate();
            &a_conj
        }
    };
    let b_conj;
    let b = match op_b {
        Op::None => b,
        Op::Adjoint => {
            b_conj = b.conjugate();
            &b_conj
        }
    };
    let (rsa, csa) = op_layout(a, op_a);
    let (rsb, csb) = op_layout(b, op_b);
    let rsc = 1isize;
    let csc = c.nrows() as isize;
    // SAFETY: Complex<f64> is #[repr(C)] { re, im }, layout-identical to [f64; 2];
    // the strides describe exactly the column-major buffers owned by a, b, c,
    // and c does not alias a or b (it is borrowed mutably).
    unsafe {
        matrixmultiply::zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.as_ptr() as *const [f64; 2],
            rsa,
            csa,
            b.as_ptr() as *const [f64; 2],
            rsb,
            csb,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            rsc,
            csc,
        );
    }
}

/// `op(a) * op(b)` as a new matrix.
pub fn gemm(a: &CMatrix, op_a: Op, b: &CMatrix, op_b: Op) -> CMatrix {
    let (m, _) = op_dims(a, op_a);
    let (_, n) = op_dims(b, op_b);
    let mut c = CMatrix::zeros(m, n);
    gemm_into(
        Complex64::new(1.0, 0.0),
        a,
        op_a,
        b,
        op_b,
        Complex64::new(0.0, 0.0),
        &mut c,
    );
    c
}

/// `a * b`.
pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    gemm(a, Op::None, b, Op::None)
}

/// `(m + mᴴ) / 2`, in place.
pub fn hermitianize(m: &mut CMatrix) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    for j in 0..n {
        m[(j, j)].im = 0.0;
        for i in (j + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Real inner product `Re tr(aᴴ b)`; equals `tr(a b)` when `a` is Hermitian.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// `Re Σ_mn p[m,n] q[n,m]`, i.e. `Re tr(p q)` without forming the product.
pub fn trace_of_product(p: &CMatrix, q: &CMatrix) -> f64 {
    let n = p.nrows();
    debug_assert_eq!(p.ncols(), q.nrows());
    debug_assert_eq!(q.ncols(), n);
    let mut acc = 0.0;
    for m in 0..n {
        for k in 0..p.ncols() {
            let a = p[(m, k)];
            let b = q[(k, m)];
            acc += a.re * b.re - a.im * b.im;
        }
    }
    acc
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum of absolute values of the entries.
pub fn entrywise_l1(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}
