//! Result surfaces: SNR heat maps, beam-squint studies and runtime sweeps.

use crate::channel::los_matrix;
use crate::lc_phase::PhaseProfile;
use crate::scenario::{uniform_grid, Region};
use crate::secrecy::{EvalMode, LinkEvaluator};
use crate::{Error, Point};
use nalgebra::Vector3;
use std::time::Instant;

/// Cells below this many dB under the map maximum are clamped.
pub const HEATMAP_FLOOR_DB: f64 = 60.0;

/// Extent and resolution of a heat map in a horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatMapSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub z: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for HeatMapSpec {
    fn default() -> Self {
        Self { x_range: [0.0, 10.0], y_range: [-5.0, 5.0], z: -5.0, nx: 200, ny: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatMapGrid {
    pub freq_hz: f64,
    pub z: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// SNR in dB, x-major; `None` where the SNR is zero.
    pub snr_db: Vec<Option<f64>>,
    pub user_region: Region,
    pub eve_region: Region,
}

impl HeatMapGrid {
    pub fn points(xs: &[f64], ys: &[f64], z: f64) -> Vec<Point> {
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| Vector3::new(x, y, z))).collect()
    }
}

/// Linear SNR at each point; Rician mode averages over draws.
pub fn snr_map(
    evaluator: &LinkEvaluator<'_>,
    profile: &PhaseProfile,
    f: f64,
    points: &[Point],
    mode: EvalMode,
) -> Result<Vec<f64>, Error> {
    match mode {
        EvalMode::LosOnly => evaluator.snr_at_points(profile, f, points, false, None),
        EvalMode::LosBlocked => evaluator.snr_at_points(profile, f, points, true, None),
        EvalMode::Rician { realizations } => {
            let r = realizations.max(1);
            let mut acc = vec![0.0; points.len()];
            for real in 0..r as u64 {
                let v = evaluator.snr_at_points(profile, f, points, true, Some(real))?;
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x / r as f64;
                }
            }
            Ok(acc)
        }
    }
}

/// SNR heat map at frequency `f`.
pub fn heatmap(
    evaluator: &LinkEvaluator<'_>,
    profile: &PhaseProfile,
    f: f64,
    spec: &HeatMapSpec,
    mode: EvalMode,
) -> Result<HeatMapGrid, Error> {
    if spec.nx == 0 || spec.ny == 0 {
        return Err(Error::InvalidArgument("heat map needs at least one cell per axis".into()));
    }
    let xs = uniform_grid(spec.x_range[0], spec.x_range[1], spec.nx);
    let ys = uniform_grid(spec.y_range[0], spec.y_range[1], spec.ny);
    let points = HeatMapGrid::points(&xs, &ys, spec.z);
    let snr = snr_map(evaluator, profile, f, &points, mode)?;
    Ok(HeatMapGrid {
        freq_hz: f,
        z: spec.z,
        xs,
        ys,
        snr_db: to_floored_db(&snr),
        user_region: evaluator.scenario.user_region.clone(),
        eve_region: evaluator.scenario.eve_region.clone(),
    })
}

/// dB values clamped at [`HEATMAP_FLOOR_DB`] below the maximum; zero maps to `None`.
pub fn to_floored_db(values: &[f64]) -> Vec<Option<f64>> {
    let db: Vec<Option<f64>> = values.iter().map(|&v| (v > 0.0).then(|| 10.0 * v.log10())).collect();
    let top = db.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    db.into_iter().map(|v| v.map(|x| x.max(top - HEATMAP_FLOOR_DB))).collect()
}

/// Geometry of the beam-squint study: an `N`-element half-wavelength ULA
/// at the origin along y, beamforming at the center frequency toward a
/// single-antenna receiver at `distance_m`, `angle_deg` off broadside in
/// the x–y plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SquintSetup {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub angle_deg: f64,
    /// Frequencies sampled across the band.
    pub freq_points: usize,
}

impl SquintSetup {
    pub fn new(center_hz: f64, bandwidth_hz: f64) -> Self {
        Self { center_hz, bandwidth_hz, distance_m: 25.0, angle_deg: 45.0, freq_points: 401 }
    }

    fn elements(&self, n: usize) -> Vec<Point> {
        let d = crate::channel::SPEED_OF_LIGHT / self.center_hz / 2.0;
        (0..n).map(|i| Vector3::new(0.0, (i as f64 - (n as f64 - 1.0) / 2.0) * d, 0.0)).collect()
    }

    fn receiver(&self) -> Point {
        let a = self.angle_deg.to_radians();
        Vector3::new(a.cos(), a.sin(), 0.0) * self.distance_m
    }

    fn freqs(&self) -> Vec<f64> {
        let lo = self.center_hz - self.bandwidth_hz / 2.0;
        let hi = self.center_hz + self.bandwidth_hz / 2.0;
        let mut g = uniform_grid(lo, hi, self.freq_points);
        if self.freq_points % 2 == 1 {
            g[self.freq_points / 2] = self.center_hz;
        }
        g
    }

    /// `SNR_k / SNR_c` in dB at each frequency for an `n`-element array.
    /// Pathloss and transmit power cancel; only the array gain remains.
    pub fn normalized_snr_db(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>), Error> {
        let tx = self.elements(n);
        let rx = [self.receiver()];
        let hc = los_matrix(&tx, &rx, self.center_hz)?.row(0).transpose();
        // q_c = conj(h_c) / |h_c| so the received amplitude is h_kᵀ q_c
        let qc = hc.conjugate().unscale(hc.norm());
        let peak = hc.norm_squared();
        let freqs = self.freqs();
        let vals = freqs
            .iter()
            .map(|&f| {
                let hk = los_matrix(&tx, &rx, f)?.row(0).transpose();
                let g = hk.iter().zip(qc.iter()).map(|(h, q)| h * q).sum::<num_complex::Complex64>();
                Ok(10.0 * (g.norm_sqr() / peak).log10())
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok((freqs, vals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SquintAxis {
    /// Normalized SNR per frequency at a fixed array size.
    Frequency,
    /// Minimum normalized SNR over the band per array size.
    ArraySize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SquintStudy {
    pub axis_kind: SquintAxis,
    pub axis: Vec<f64>,
    pub norm_snr_db: Vec<f64>,
}

/// Normalized SNR across the band for a fixed array size.
pub fn squint_vs_frequency(setup: &SquintSetup, n: usize) -> Result<SquintStudy, Error> {
    let (freqs, vals) = setup.normalized_snr_db(n)?;
    Ok(SquintStudy { axis_kind: SquintAxis::Frequency, axis: freqs, norm_snr_db: vals })
}

/// Worst normalized SNR over the band for each array size.
pub fn squint_vs_size(setup: &SquintSetup, sizes: &[usize]) -> Result<SquintStudy, Error> {
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let (_, vals) = setup.normalized_snr_db(n)?;
        out.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
    }
    Ok(SquintStudy {
        axis_kind: SquintAxis::ArraySize,
        axis: sizes.iter().map(|&n| n as f64).collect(),
        norm_snr_db: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeRow {
    pub n: usize,
    pub seconds: f64,
}

/// Wall time of `run(n)` for each size.
pub fn runtime_sweep(sizes: &[usize], mut run: impl FnMut(usize) -> Result<(), Error>) -> Result<Vec<RuntimeRow>, Error> {
    sizes
        .iter()
        .map(|&n| {
            let start = Instant::now();
            run(n)?;
            Ok(RuntimeRow { n, seconds: start.elapsed().as_secs_f64() })
        })
        .collect()
}

/// Least-squares slope of `log(seconds)` against `log(n)`.
pub fn log_log_slope(rows: &[RuntimeRow]) -> f64 {
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.seconds.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
