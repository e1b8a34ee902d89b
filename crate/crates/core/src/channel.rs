//! Near-field line-of-sight and Rician channels between the base station,
//! the surface and arbitrary points.
//!
//! Matrices are indexed `[receiver, transmitter]` and hold the complex gain
//! of each element pair, so the signal received by a vector of elements is
//! `H · x`.

use crate::linalg::{CMatrix, CVector};
use crate::scenario::Scenario;
use crate::{Error, Point};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

pub const SPEED_OF_LIGHT: f64 = 3e8;

/// `κ = 2πf / c`.
pub fn wavenumber(f: f64) -> f64 {
    2.0 * PI * f / SPEED_OF_LIGHT
}

fn distance(a: &Point, b: &Point) -> Result<f64, Error> {
    let d = (a - b).norm();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(format!("coincident points at {:?}", a.as_slice())))
    }
}

/// Spherical-wave phases `exp(jκ‖rx_m − tx_n‖)`.
pub fn los_matrix(tx: &[Point], rx: &[Point], f: f64) -> Result<CMatrix, Error> {
    let k = wavenumber(f);
    let mut m = CMatrix::zeros(rx.len(), tx.len());
    for (c, t) in tx.iter().enumerate() {
        for (r, p) in rx.iter().enumerate() {
            m[(r, c)] = Complex64::from_polar(1.0, k * distance(p, t)?);
        }
    }
    Ok(m)
}

/// Free-space amplitude `sqrt(ρ (d0/d)^σ)` with `ρ = (c / 4πf)²`.
pub fn pathloss_amplitude(f: f64, d: f64, exponent: f64, reference_distance: f64) -> Result<f64, Error> {
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry("pathloss at zero distance".into()));
    }
    let rho = (SPEED_OF_LIGHT / (4.0 * PI * f)).powi(2);
    Ok((rho * (reference_distance / d).powf(exponent)).sqrt())
}

/// Unit-norm near-field steering vector of `elements` toward `p`.
pub fn steering(elements: &[Point], p: &Point, f: f64) -> Result<CVector, Error> {
    let k = wavenumber(f);
    let scale = 1.0 / (elements.len() as f64).sqrt();
    let mut v = CVector::zeros(elements.len());
    for (n, u) in elements.iter().enumerate() {
        v[n] = Complex64::from_polar(scale, k * distance(p, u)?);
    }
    Ok(v)
}

/// Link classes, each with its own pathloss exponent and K-factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    BsPoint = 0,
    BsRis = 1,
    RisPoint = 2,
}

/// A reflecting plane with per-link K-factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflector {
    pub point: Point,
    /// Unit normal.
    pub normal: Point,
    /// Weight of the deterministic mirror-image component, per link.
    pub mean_k: [f64; 3],
    /// Weight of the diffuse component, per link.
    pub stochastic_k: [f64; 3],
}

impl Reflector {
    pub fn new(point: Point, normal: Point, mean_k: [f64; 3], stochastic_k: [f64; 3]) -> Result<Self, Error> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() || !point.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("reflector needs a finite point and nonzero normal".into()));
        }
        if mean_k.iter().chain(&stochastic_k).any(|k| !k.is_finite() || *k < 0.0) {
            return Err(Error::Validation("K-factors must be nonnegative".into()));
        }
        Ok(Self { point, normal: normal / n, mean_k, stochastic_k })
    }

    /// Mirror image across the plane.
    pub fn mirror(&self, p: &Point) -> Point {
        p - self.normal * (2.0 * (p - self.point).dot(&self.normal))
    }

    fn contains(&self, p: &Point) -> bool {
        (p - self.point).dot(&self.normal).abs() < 1e-9
    }
}

/// Independent random stream for one (seed, link, frequency, receiver,
/// realization, reflector) combination. Derived by hashing, so draws do not
/// depend on evaluation order or thread count.
pub fn stream_rng(seed: u64, link: Link, f: f64, rx: &Point, realization: u64, reflector: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update([link as u8]);
    h.update(f.to_bits().to_le_bytes());
    for c in rx.iter() {
        h.update(c.to_bits().to_le_bytes());
    }
    h.update(realization.to_le_bytes());
    h.update((reflector as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Circularly symmetric complex Gaussian sample with unit variance.
pub fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Identifies the random streams of one channel draw.
#[derive(Debug, Clone, Copy)]
pub struct Draw<'a> {
    pub seed: u64,
    pub realization: u64,
    /// Receiver reference point used in the stream key.
    pub key_point: &'a Point,
}

/// `c0 · (H_LOS + Σ_r k̄_r H̄_r + k̃_r H̃_r)`; `H̄_r` uses receiver images across
/// plane `r` and `H̃_r` has i.i.d. unit-variance complex Gaussian entries.
pub fn rician_channel(
    tx: &[Point],
    rx: &[Point],
    reflectors: &[Reflector],
    link: Link,
    f: f64,
    c0: f64,
    draw: Draw<'_>,
) -> Result<CMatrix, Error> {
    let mut h = los_matrix(tx, rx, f)?;
    let tx_center = centroid(tx);
    let rx_center = centroid(rx);
    for (r, refl) in reflectors.iter().enumerate() {
        let mk = refl.mean_k[link as usize];
        let sk = refl.stochastic_k[link as usize];
        if mk > 0.0 {
            if refl.contains(&tx_center) && refl.contains(&rx_center) {
                return Err(Error::DegenerateImage);
            }
            let images: Vec<Point> = rx.iter().map(|p| refl.mirror(p)).collect();
            h += los_matrix(tx, &images, f)? * Complex64::new(mk, 0.0);
        }
        if sk > 0.0 {
            let mut rng = stream_rng(draw.seed, link, f, draw.key_point, draw.realization, r);
            for i in 0..h.nrows() {
                for j in 0..h.ncols() {
                    h[(i, j)] += complex_normal(&mut rng) * sk;
                }
            }
        }
    }
    Ok(h * Complex64::new(c0, 0.0))
}

fn centroid(pts: &[Point]) -> Point {
    pts.iter().fold(Point::zeros(), |a, p| a + p) / pts.len().max(1) as f64
}

/// Channels of a scenario. Line-of-sight channels feed the optimizers;
/// Rician channels are available for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ChannelModel<'a> {
    pub scenario: &'a Scenario,
}

impl<'a> ChannelModel<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self { scenario }
    }

    fn amplitude(&self, link: Link, f: f64, d: f64) -> Result<f64, Error> {
        let rf = &self.scenario.rf;
        pathloss_amplitude(f, d, rf.pathloss_exponents[link as usize], rf.reference_distance_m)
    }

    /// BS → surface, `N × N_t`.
    pub fn bs_ris(&self, f: f64, draw: Option<Draw<'_>>) -> Result<CMatrix, Error> {
        let s = self.scenario;
        let c0 = self.amplitude(Link::BsRis, f, distance(&s.ris.center, &s.bs.center)?)?;
        match draw {
            None => Ok(los_matrix(&s.bs.positions, &s.ris.positions, f)? * Complex64::new(c0, 0.0)),
            Some(d) => rician_channel(&s.bs.positions, &s.ris.positions, &s.reflectors, Link::BsRis, f, c0, d),
        }
    }

    /// Surface → point, one gain per surface element.
    pub fn ris_point(&self, f: f64, p: &Point, draw: Option<Draw<'_>>) -> Result<CVector, Error> {
        let s = self.scenario;
        let c0 = self.amplitude(Link::RisPoint, f, distance(p, &s.ris.center)?)?;
        let m = match draw {
            None => los_matrix(&s.ris.positions, std::slice::from_ref(p), f)? * Complex64::new(c0, 0.0),
            Some(d) => rician_channel(&s.ris.positions, std::slice::from_ref(p), &s.reflectors, Link::RisPoint, f, c0, d)?,
        };
        Ok(m.row(0).transpose())
    }

    /// Base station → point through the blocked direct path, one gain per
    /// base-station antenna.
    pub fn bs_point(&self, f: f64, p: &Point, draw: Option<Draw<'_>>) -> Result<CVector, Error> {
        let s = self.scenario;
        let c0 = self.amplitude(Link::BsPoint, f, distance(p, &s.bs.center)?)? * s.rf.blockage_power_factor.sqrt();
        let m = match draw {
            None => los_matrix(&s.bs.positions, std::slice::from_ref(p), f)? * Complex64::new(c0, 0.0),
            Some(d) => rician_channel(&s.bs.positions, std::slice::from_ref(p), &s.reflectors, Link::BsPoint, f, c0, d)?,
        };
        Ok(m.row(0).transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect()
    }

    #[test]
    fn wavenumber_at_sixty_gigahertz() {
        assert!((wavenumber(60e9) - 1256.637).abs() < 1e-3);
    }

    #[test]
    fn los_entries_match_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tx = random_points(2, &mut rng);
        let rx = random_points(2, &mut rng);
        let f = 61.3e9;
        let m = los_matrix(&tx, &rx, f).unwrap();
        let k = 2.0 * PI * f / 3e8;
        for r in 0..2 {
            for c in 0..2 {
                let dx = rx[r][0] - tx[c][0];
                let dy = rx[r][1] - tx[c][1];
                let dz = rx[r][2] - tx[c][2];
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                let expected = Complex64::new((k * d).cos(), (k * d).sin());
                assert!((m[(r, c)] - expected).norm() < 1e-12);
                assert!((m[(r, c)].norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn los_is_reciprocal_and_rejects_coincident_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_points(4, &mut rng);
        let b = random_points(3, &mut rng);
        let ab = los_matrix(&a, &b, 59e9).unwrap();
        let ba = los_matrix(&b, &a, 59e9).unwrap();
        assert_eq!(ab, ba.transpose());
        let err = los_matrix(&a, &a[..1], 59e9).unwrap_err();
        assert!(err.to_string().contains("degenerate geometry"));
    }

    #[test]
    fn pathloss_examples() {
        let a = pathloss_amplitude(60e9, 1.0, 2.0, 1.0).unwrap();
        assert!((a * a - 1.583e-7).abs() < 1e-10);
        assert!((10.0 * (a * a).log10() + 68.0).abs() < 0.05);
        let far = pathloss_amplitude(60e9, 2.0, 2.0, 1.0).unwrap();
        assert!((20.0 * (a / far).log10() - 6.0206).abs() < 1e-3);
        let lo = pathloss_amplitude(56e9, 5.0, 2.0, 1.0).unwrap();
        let hi = pathloss_amplitude(64e9, 5.0, 2.0, 1.0).unwrap();
        assert!((20.0 * (lo / hi).log10() - 1.16).abs() < 0.01);
        assert!(pathloss_amplitude(60e9, 0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn steering_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let elements = random_points(7, &mut rng);
        let p = Vector3::new(10.0, 1.0, 2.0);
        assert!((steering(&elements, &p, 60e9).unwrap().norm() - 1.0).abs() < 1e-12);

        let single = [Vector3::zeros()];
        let d = p.norm();
        let v = steering(&single, &p, 60e9).unwrap();
        assert!((v[0] - Complex64::from_polar(1.0, wavenumber(60e9) * d)).norm() < 1e-9);
    }

    #[test]
    fn far_field_steering_is_linear_phase() {
        // λ/2 ULA along y, observed from direction (x, y) = (cos θ, sin θ)
        let n = 16;
        let f = 60e9;
        let spacing = 3e8 / f / 2.0;
        let elements: Vec<Point> = (0..n).map(|i| Vector3::new(0.0, (i as f64 - 7.5) * spacing, 0.0)).collect();
        let theta: f64 = 0.4;
        let aperture = n as f64 * spacing;
        let dist = 1e4 * aperture;
        let p = Vector3::new(theta.cos(), theta.sin(), 0.0) * dist;
        let v = steering(&elements, &p, f).unwrap();
        let k = wavenumber(f);
        for i in 1..n {
            let measured = (v[i] * v[0].conj()).arg();
            let plane = -k * (i as f64) * spacing * theta.sin();
            let diff = (measured - plane + PI).rem_euclid(2.0 * PI) - PI;
            assert!(diff.abs() < 1e-3, "element {i}: {diff}");
        }
    }

    #[test]
    fn mirror_image_examples() {
        let ground = Reflector::new(Vector3::new(0.0, 0.0, -6.5), Vector3::z(), [0.1; 3], [0.1; 3]).unwrap();
        let p = Vector3::new(1.0, 2.0, -5.0);
        assert_eq!(ground.mirror(&p), Vector3::new(1.0, 2.0, -8.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tilted = Reflector::new(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.3, -1.0, 2.0), [0.0; 3], [0.0; 3]).unwrap();
        for q in random_points(10, &mut rng) {
            assert!((tilted.mirror(&tilted.mirror(&q)) - q).norm() < 1e-12);
        }
        let tx = random_points(3, &mut rng);
        let rx = random_points(2, &mut rng);
        let images: Vec<Point> = rx.iter().map(|p| ground.mirror(p)).collect();
        let h = los_matrix(&tx, &images, 60e9).unwrap();
        assert!(h.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
    }

    #[test]
    fn zero_k_factors_collapse_to_line_of_sight() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tx = random_points(3, &mut rng);
        let rx = random_points(2, &mut rng);
        let planes = vec![Reflector::new(Vector3::new(0.0, 0.0, -9.0), Vector3::z(), [0.0; 3], [0.0; 3]).unwrap()];
        let key = Vector3::zeros();
        let draw = Draw { seed: 1, realization: 0, key_point: &key };
        let h = rician_channel(&tx, &rx, &planes, Link::BsPoint, 60e9, 0.5, draw).unwrap();
        let los = los_matrix(&tx, &rx, 60e9).unwrap() * Complex64::new(0.5, 0.0);
        assert!((h - los).norm() < 1e-15);
    }

    #[test]
    fn degenerate_image_is_rejected() {
        let tx = vec![Vector3::new(0.0, 0.0, 0.0)];
        let rx = vec![Vector3::new(1.0, 0.0, 0.0)];
        let plane = vec![Reflector::new(Vector3::zeros(), Vector3::z(), [1.0; 3], [0.0; 3]).unwrap()];
        let key = Vector3::zeros();
        let draw = Draw { seed: 1, realization: 0, key_point: &key };
        let err = rician_channel(&tx, &rx, &plane, Link::BsRis, 60e9, 1.0, draw).unwrap_err();
        assert!(err.to_string().contains("degenerate image"));
    }

    #[test]
    fn diffuse_component_has_unit_variance() {
        let key = Vector3::new(1.0, 2.0, 3.0);
        let mut rng = stream_rng(9, Link::RisPoint, 60e9, &key, 0, 0);
        let draws: Vec<Complex64> = (0..10_000).map(|_| complex_normal(&mut rng)).collect();
        let mean = draws.iter().sum::<Complex64>() / 10_000.0;
        let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / 9_999.0;
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let p = Vector3::new(5.0, 1.0, -5.0);
        let a = complex_normal(&mut stream_rng(3, Link::RisPoint, 60e9, &p, 2, 1));
        let b = complex_normal(&mut stream_rng(3, Link::RisPoint, 60e9, &p, 2, 1));
        let c = complex_normal(&mut stream_rng(3, Link::RisPoint, 60e9, &p, 3, 1));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
