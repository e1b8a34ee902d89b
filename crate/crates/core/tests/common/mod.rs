//! Shared fixtures and independent reference computations.
#![allow(dead_code)]

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riswb_core::lc_phase::PhaseProfile;
use riswb_core::linalg::{CMatrix, CVector};
use riswb_core::scenario::Scenario;
use riswb_core::Point;
use std::f64::consts::{PI, TAU};

pub const C: f64 = 3e8;

/// Reference geometry shrunk to `n` surface elements and a 4×4 base station.
pub fn small_scenario(n: usize) -> Scenario {
    Scenario::reference()
        .modified(|c| {
            c.arrays.ris_shape = [n, 1];
            c.arrays.bs_shape = [4, 4];
            c.frequency.design_points = 3;
            c.frequency.eval_points = 7;
        })
        .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_phases(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

pub fn random_profile(s: &Scenario, rng: &mut ChaCha8Rng) -> PhaseProfile {
    PhaseProfile::new(&random_phases(s.ris_len(), rng), s.lc.beta, s.freq.center_hz)
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn unit_modulus(phases: &[f64]) -> CVector {
    CVector::from_iterator(phases.len(), phases.iter().map(|&p| Complex64::from_polar(1.0, p)))
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn spherical(k: f64, a: &Point, b: &Point) -> Complex64 {
    Complex64::from_polar(1.0, k * (a - b).norm())
}

fn amplitude(f: f64, d: f64, exponent: f64) -> f64 {
    ((C / (4.0 * PI * f)).powi(2) * (1.0 / d).powf(exponent)).sqrt()
}

/// Line-of-sight SNR at `p` written out element by element from the
/// geometry: per-hop free-space amplitudes, exact spherical phases, matched
/// base-station beam toward the surface center.
pub fn reference_snr(s: &Scenario, profile: &PhaseProfile, f: f64, p: &Point, direct: bool) -> f64 {
    let k = 2.0 * PI * f / C;
    let kc = 2.0 * PI * s.freq.center_hz / C;
    let sigma = s.rf.pathloss_exponents;
    let nt = s.bs.positions.len() as f64;
    let q: Vec<Complex64> = s
        .bs
        .positions
        .iter()
        .map(|b| spherical(kc, &s.ris.center, b).conj() * (s.rf.tx_power_w / nt).sqrt())
        .collect();
    let c_t = amplitude(f, (s.ris.center - s.bs.center).norm(), sigma[1]);
    let c_r = amplitude(f, (p - s.ris.center).norm(), sigma[2]);
    let b = 1.0 + s.lc.beta * (f / s.freq.center_hz - 1.0);
    let mut r = Complex64::new(0.0, 0.0);
    for (n, u) in s.ris.positions.iter().enumerate() {
        let g: Complex64 = s.bs.positions.iter().zip(&q).map(|(bp, qm)| spherical(k, u, bp) * qm).sum::<Complex64>() * c_t;
        let gamma = Complex64::from_polar(s.lc.amplitude[n], profile.omega_c[n] * b);
        r += spherical(k, p, u) * c_r * gamma * g;
    }
    if direct {
        let c_d = amplitude(f, (p - s.bs.center).norm(), sigma[0]) * s.rf.blockage_power_factor.sqrt();
        r += s.bs.positions.iter().zip(&q).map(|(bp, qm)| spherical(k, p, bp) * qm).sum::<Complex64>() * c_d;
    }
    r.norm_sqr() / (s.freq.subcarrier_bandwidth_hz * s.rf.noise_psd_w_hz * s.rf.noise_figure)
}

pub fn point(x: f64, y: f64, z: f64) -> Point {
    Vector3::new(x, y, z)
}
