//! Frequency response of liquid-crystal unit cells.
//!
//! A cell programmed to phase `ω_c` at the center frequency reflects with
//! phase `β_k · ω_c` at frequency `f_k`, where `β_k = 1 + β (f_k / f_c − 1)`.

use crate::channel::SPEED_OF_LIGHT;
use crate::linalg::CVector;
use crate::Error;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Optional physical description of the phase shifter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcMaterial {
    pub eps_parallel: f64,
    pub eps_perp: f64,
    pub length_m: f64,
    /// `(volts, radians)` samples of the voltage-to-phase map, nondecreasing
    /// in both coordinates and spanning `[0, 2π]` in phase.
    pub voltage_table: Vec<[f64; 2]>,
}

impl LcMaterial {
    /// A plausible voltage-to-phase curve shape (slow onset, steep middle,
    /// saturation). Illustrative only; not measured data.
    pub fn illustrative() -> Self {
        let table = [
            [0.0, 0.0],
            [1.0, 0.05],
            [2.0, 0.35],
            [3.0, 1.3],
            [4.0, 2.6],
            [5.0, 3.8],
            [6.0, 4.7],
            [7.0, 5.4],
            [8.0, 5.9],
            [10.0, TAU],
        ];
        Self {
            eps_parallel: 3.3,
            eps_perp: 2.5,
            // full 2π range at 60 GHz for these permittivities
            length_m: SPEED_OF_LIGHT / ((3.3f64.sqrt() - 2.5f64.sqrt()) * 60e9),
            voltage_table: table.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.eps_perp > 0.0 && self.eps_parallel >= self.eps_perp) {
            return Err(Error::Validation("LC permittivities must satisfy eps_parallel >= eps_perp > 0".into()));
        }
        if !(self.length_m > 0.0) {
            return Err(Error::Validation("LC phase-shifter length must be positive".into()));
        }
        let t = &self.voltage_table;
        if t.len() < 2 {
            return Err(Error::Validation("voltage table needs at least two samples".into()));
        }
        if t.windows(2).any(|w| w[1][0] <= w[0][0] || w[1][1] < w[0][1]) {
            return Err(Error::Validation("voltage table must be increasing in volts and nondecreasing in phase".into()));
        }
        if t[0][1].abs() > 1e-9 || (t[t.len() - 1][1] - TAU).abs() > 1e-9 {
            return Err(Error::Validation("voltage table must span phases [0, 2π]".into()));
        }
        Ok(())
    }

    /// Maximum birefringence `√ε_∥ − √ε_⊥`.
    pub fn max_birefringence(&self) -> f64 {
        self.eps_parallel.sqrt() - self.eps_perp.sqrt()
    }

    /// Smallest voltage reaching `phase` on the piecewise-linear map.
    pub fn voltage_for_phase(&self, phase: f64) -> f64 {
        let t = &self.voltage_table;
        let phase = phase.clamp(t[0][1], t[t.len() - 1][1]);
        for w in t.windows(2) {
            let ([v0, p0], [v1, p1]) = (w[0], w[1]);
            if phase <= p1 {
                if p1 == p0 {
                    return v0;
                }
                return v0 + (phase - p0) / (p1 - p0) * (v1 - v0);
            }
        }
        t[t.len() - 1][0]
    }
}

/// Dispersion slope and per-element gains.
#[derive(Debug, Clone, PartialEq)]
pub struct LcParams {
    pub beta: f64,
    pub amplitude: Vec<f64>,
    pub material: Option<LcMaterial>,
}

impl LcParams {
    pub fn new(beta: f64, amplitude: Option<Vec<f64>>, material: Option<LcMaterial>, n: usize) -> Result<Self, Error> {
        if !beta.is_finite() {
            return Err(Error::Validation("beta must be finite".into()));
        }
        let amplitude = amplitude.unwrap_or_else(|| vec![1.0; n]);
        if amplitude.len() != n {
            return Err(Error::Validation(format!("amplitude has {} entries, surface has {n}", amplitude.len())));
        }
        if amplitude.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Validation("amplitudes must lie in [0, 1]".into()));
        }
        if let Some(m) = &material {
            m.validate()?;
        }
        Ok(Self { beta, amplitude, material })
    }

    /// Fails when `β_k ≤ 0` somewhere in `[f_c − W/2, f_c + W/2]`.
    pub fn validate_band(&self, center_hz: f64, bandwidth_hz: f64) -> Result<(), Error> {
        for f in [center_hz - bandwidth_hz / 2.0, center_hz + bandwidth_hz / 2.0] {
            beta_factor(f, center_hz, self.beta)?;
        }
        Ok(())
    }
}

/// `β_k = 1 + β (f / f_c − 1)`.
pub fn beta_factor(f: f64, center_hz: f64, beta: f64) -> Result<f64, Error> {
    let b = 1.0 + beta * (f / center_hz - 1.0);
    if b > 0.0 {
        Ok(b)
    } else {
        Err(Error::Dispersion { freq_hz: f, factor: b })
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_phase(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid may round up to exactly 2π for tiny negative inputs
    if r >= TAU { 0.0 } else { r }
}

/// `exp(j θ_n)` entrywise.
pub fn phase_vector(phases: &[f64]) -> CVector {
    CVector::from_iterator(phases.len(), phases.iter().map(|&t| Complex64::from_polar(1.0, t)))
}

/// Center-frequency phase profile of the surface.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    /// Phases at the center frequency, in `[0, 2π)`.
    pub omega_c: Vec<f64>,
    pub beta: f64,
    pub center_hz: f64,
}

impl PhaseProfile {
    /// Wraps the given phases into `[0, 2π)`.
    pub fn new(phases: &[f64], beta: f64, center_hz: f64) -> Self {
        Self { omega_c: phases.iter().map(|&p| wrap_phase(p)).collect(), beta, center_hz }
    }

    pub fn len(&self) -> usize {
        self.omega_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega_c.is_empty()
    }

    pub fn beta_factor(&self, f: f64) -> Result<f64, Error> {
        beta_factor(f, self.center_hz, self.beta)
    }

    /// `ω(f) = β_k · ω_c`, not wrapped.
    pub fn phases_at_frequency(&self, f: f64) -> Result<Vec<f64>, Error> {
        let b = self.beta_factor(f)?;
        Ok(self.omega_c.iter().map(|w| w * b).collect())
    }

    /// Diagonal of the reflection matrix at `f`.
    pub fn reflection_coefficients(&self, amplitude: &[f64], f: f64) -> Result<CVector, Error> {
        let ph = self.phases_at_frequency(f)?;
        Ok(CVector::from_iterator(
            ph.len(),
            ph.iter().zip(amplitude).map(|(&t, &a)| Complex64::from_polar(a, t)),
        ))
    }
}

/// `Δω_max(f) = 2π l Δn_max (f_c + β (f − f_c)) / c`.
pub fn max_phase_range(material: &LcMaterial, f: f64, center_hz: f64, beta: f64) -> f64 {
    TAU * material.length_m * material.max_birefringence() * (center_hz + beta * (f - center_hz)) / SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn beta_factor_examples() {
        assert_eq!(beta_factor(60e9, 60e9, 2.4).unwrap(), 1.0);
        assert!((beta_factor(64e9, 60e9, 2.4).unwrap() - 1.16).abs() < 1e-12);
        assert!((beta_factor(56e9, 60e9, 2.4).unwrap() - 0.84).abs() < 1e-12);
        let err = beta_factor(30e9, 60e9, 2.4).unwrap_err();
        assert!(err.to_string().contains("dispersion model invalid for bandwidth"));
    }

    #[test]
    fn phases_scale_with_frequency() {
        let p = PhaseProfile::new(&[PI, 0.0, 1.0], 2.4, 60e9);
        assert_eq!(p.phases_at_frequency(60e9).unwrap(), p.omega_c);
        let at = p.phases_at_frequency(64e9).unwrap();
        assert!((at[0] - 1.16 * PI).abs() < 1e-12);
        let zero = PhaseProfile::new(&[0.0; 4], 2.4, 60e9);
        assert!(zero.phases_at_frequency(57e9).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reflection_coefficients_examples() {
        let zero = PhaseProfile::new(&[0.0; 3], 2.4, 60e9);
        let g = zero.reflection_coefficients(&[1.0; 3], 62e9).unwrap();
        assert!(g.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let p = PhaseProfile::new(&[0.3, 2.0, 5.5], 2.4, 60e9);
        let amp = [1.0, 0.5, 0.25];
        let g = p.reflection_coefficients(&amp, 63e9).unwrap();
        let b = 1.0 + 2.4 * (63.0 / 60.0 - 1.0);
        for n in 0..3 {
            assert!((g[n].norm() - amp[n]).abs() < 1e-12);
            let expected = Complex64::new(0.0, b * p.omega_c[n]).exp() * amp[n];
            assert!((g[n] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn profile_is_wrapped_into_range() {
        let p = PhaseProfile::new(&[-0.5, TAU, 7.0, -1e-18], 2.4, 60e9);
        assert!(p.omega_c.iter().all(|&w| (0.0..TAU).contains(&w)));
        assert!((p.omega_c[0] - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(p.omega_c[1], 0.0);
    }

    #[test]
    fn max_phase_range_examples() {
        let mut m = LcMaterial::illustrative();
        assert!((max_phase_range(&m, 60e9, 60e9, 2.4) - TAU).abs() < 1e-9);
        assert!((max_phase_range(&m, 64e9, 60e9, 2.4) / TAU - 1.16).abs() < 1e-9);
        let r: Vec<f64> = [56e9, 60e9, 64e9].iter().map(|&f| max_phase_range(&m, f, 60e9, 2.4)).collect();
        assert!(((r[1] - r[0]) - (r[2] - r[1])).abs() < 1e-9);
        m.eps_parallel = m.eps_perp;
        assert_eq!(max_phase_range(&m, 64e9, 60e9, 2.4), 0.0);
    }

    #[test]
    fn voltage_lookup_inverts_table() {
        let m = LcMaterial::illustrative();
        m.validate().unwrap();
        assert_eq!(m.voltage_for_phase(0.0), 0.0);
        assert!((m.voltage_for_phase(TAU) - 10.0).abs() < 1e-12);
        assert!((m.voltage_for_phase(1.95) - 3.5).abs() < 1e-12);
        let mut last = 0.0;
        for i in 0..100 {
            let v = m.voltage_for_phase(i as f64 * TAU / 99.0);
            assert!(v >= last);
            last = v;
        }
    }
}
