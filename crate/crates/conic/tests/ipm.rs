use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riswb_conic::linalg::{hermitian_eigenvalues, hermitianize, inner};
use riswb_conic::{
    Atom, CMatrix, ConicProblem, ConicSolver, Constraint, InteriorPoint, PsdTerm, SolveStatus,
};

fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let mut m = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    hermitianize(&mut m);
    m
}

fn random_rank_one(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let v = CMatrix::from_fn(n, 1, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    v.clone()
}

fn identity_atom(n: usize, factored: bool) -> Atom {
    if factored {
        Atom::Factored { vectors: CMatrix::identity(n, n), weights: vec![1.0; n] }
    } else {
        Atom::Dense(CMatrix::identity(n, n))
    }
}

/// min <C, X> s.t. tr X = 1 equals the smallest eigenvalue of C.
fn smallest_eigenvalue_by_sdp(c: &CMatrix, factored: bool) -> f64 {
    let n = c.nrows();
    let mut p = ConicProblem::new(n, 0);
    p.objective = c.clone();
    let id = p.add_atom(identity_atom(n, factored));
    p.constraints.push(Constraint { psd: PsdTerm::Atoms(vec![(id, 1.0)]), linear: vec![], rhs: 1.0 });
    let sol = InteriorPoint::default().solve(&p).expect("solve");
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol.primal_objective
}

#[test]
fn trace_constrained_minimum_is_smallest_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 3, 8, 20] {
        let c = random_hermitian(n, &mut rng);
        let oracle = hermitian_eigenvalues(&c)[0];
        for factored in [false, true] {
            let v = smallest_eigenvalue_by_sdp(&c, factored);
            assert!((v - oracle).abs() < 1e-6, "n={n} factored={factored}: {v} vs {oracle}");
        }
    }
}

#[test]
fn five_cycle_max_cut_relaxation() {
    // maximize Σ_edges (1 - Re X_ij) / 2 with unit diagonal; the optimum for
    // the 5-cycle is (5/2)(1 + cos(pi/5)).
    let n = 5;
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        let j = (i + 1) % n;
        c[(i, j)] += Complex64::new(0.25, 0.0);
        c[(j, i)] += Complex64::new(0.25, 0.0);
    }
    let mut p = ConicProblem::new(n, 0);
    p.objective = c;
    for d in 0..n {
        p.constraints.push(Constraint { psd: PsdTerm::Diagonal(d), linear: vec![], rhs: 1.0 });
    }
    let sol = InteriorPoint::default().solve(&p).unwrap();
    // objective = Σ_edges Re X_ij / 2, so the cut value is 5/2 - objective
    let cut = 2.5 - sol.primal_objective;
    let expected = 2.5 * (1.0 + (std::f64::consts::PI / 5.0).cos());
    assert!((cut - expected).abs() < 1e-6, "{cut} vs {expected}");
    for d in 0..n {
        assert!((sol.x[(d, d)].re - 1.0).abs() < 1e-7);
    }
}

/// max t s.t. <F_k, X> >= t for all k, tr X = 1, with t split as t⁺ - t⁻ and
/// slacks w_k. Solutions are checked through the optimality certificate.
fn max_min_problem(atoms: Vec<Atom>, n: usize) -> ConicProblem {
    let k = atoms.len();
    // linear vector: [t⁺, t⁻, w_1..w_k]
    let mut p = ConicProblem::new(n, 2 + k);
    p.objective_linear[0] = -1.0;
    p.objective_linear[1] = 1.0;
    let id = p.add_atom(identity_atom(n, false));
    p.constraints.push(Constraint { psd: PsdTerm::Atoms(vec![(id, 1.0)]), linear: vec![], rhs: 1.0 });
    for (i, a) in atoms.into_iter().enumerate() {
        let ai = p.add_atom(a);
        p.constraints.push(Constraint {
            psd: PsdTerm::Atoms(vec![(ai, 1.0)]),
            linear: vec![(0, -1.0), (1, 1.0), (2 + i, -1.0)],
            rhs: 0.0,
        });
    }
    p
}

#[test]
fn single_rank_one_max_min_is_largest_eigenvalue() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_rank_one(6, &mut rng);
    let f = &v * v.adjoint();
    let oracle = v.norm_squared();
    let p = max_min_problem(vec![Atom::Factored { vectors: v, weights: vec![1.0] }], 6);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    assert!((-sol.primal_objective - oracle).abs() < 1e-6);
    assert!((inner(&f, &sol.x) - oracle).abs() < 1e-6);
}

#[test]
fn max_min_certificate_holds_for_mixed_atoms() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 7;
    let mut atoms = Vec::new();
    for i in 0..6 {
        let m = random_hermitian(n, &mut rng);
        atoms.push(if i % 2 == 0 {
            Atom::Dense(m)
        } else {
            let (vals, vecs) = riswb_conic::linalg::hermitian_eigen(&m);
            Atom::Factored { vectors: vecs, weights: vals }
        });
    }
    let p = max_min_problem(atoms.clone(), n);
    let sol = InteriorPoint::default().solve(&p).unwrap();
    // primal feasibility, dual feasibility, and zero gap certify optimality
    let rows = p.apply(&sol.x, &sol.x_linear);
    for (r, c) in rows.iter().zip(&p.constraints) {
        assert!((r - c.rhs).abs() < 1e-6);
    }
    assert!(hermitian_eigenvalues(&sol.x)[0] > -1e-9);
    assert!(hermitian_eigenvalues(&sol.z)[0] > -1e-9);
    assert!(sol.x_linear.iter().chain(&sol.z_linear).all(|&v| v > -1e-9));
    assert!((sol.primal_objective - sol.dual_objective).abs() < 1e-6);
    let t = sol.x_linear[0] - sol.x_linear[1];
    let worst = atoms.iter().map(|a| a.inner(&sol.x)).fold(f64::INFINITY, f64::min);
    assert!((worst - t).abs() < 1e-6);
    // any feasible point gives a lower value: try the eigenvectors of each atom
    for a in &atoms {
        let d = a.to_dense();
        let (_, vecs) = riswb_conic::linalg::hermitian_eigen(&d);
        let v = vecs.column(n - 1).clone_owned();
        let x = &v * v.adjoint();
        let val = atoms.iter().map(|b| b.inner(&x)).fold(f64::INFINITY, f64::min);
        assert!(val <= t + 1e-7);
    }
}

#[test]
fn invalid_problem_is_rejected() {
    let mut p = ConicProblem::new(2, 0);
    p.constraints.push(Constraint { psd: PsdTerm::Diagonal(5), linear: vec![], rhs: 1.0 });
    assert!(InteriorPoint::default().solve(&p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn sdp_eigenvalue_matches_dense_eigensolver(seed in 0u64..10_000, n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_hermitian(n, &mut rng);
        let oracle = hermitian_eigenvalues(&c)[0];
        let v = smallest_eigenvalue_by_sdp(&c, seed % 2 == 0);
        prop_assert!((v - oracle).abs() < 1e-6);
    }
}
