//! Experiment configuration: array geometry, target regions, frequency plan,
//! RF constants, liquid-crystal parameters and algorithm hyperparameters.
//!
//! The on-disk schema ([`ScenarioConfig`]) keeps interface units (dBm, dB);
//! [`Scenario`] holds the validated, linear-unit view used by the numerics.

use crate::channel::{Reflector, SPEED_OF_LIGHT};
use crate::lc_phase::{LcMaterial, LcParams};
use crate::{Error, Point};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

/// Bundled configuration reproducing the reference desk-scale setup.
pub const REFERENCE_SCENARIO: &str = include_str!("../scenarios/paper_v.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraysConfig {
    pub bs_center: [f64; 3],
    /// Elements along x and z (the base station lies in the x–z plane).
    pub bs_shape: [usize; 2],
    /// Element spacing; half the center wavelength when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bs_spacing_m: Option<f64>,
    pub ris_center: [f64; 3],
    /// Elements along y and z.
    pub ris_shape: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ris_spacing_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub grid: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub user: RegionConfig,
    pub eve: RegionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_bandwidth_hz: f64,
    #[serde(default = "default_design_points")]
    pub design_points: usize,
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
}

fn default_design_points() -> usize {
    9
}
fn default_eval_points() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfConfig {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    #[serde(default = "default_reference_distance")]
    pub reference_distance_m: f64,
    /// Pathloss exponents for the BS–point, BS–RIS and RIS–point links.
    pub pathloss_exponents: [f64; 3],
    #[serde(default = "default_blockage")]
    pub blockage_loss_db: f64,
}

fn default_reference_distance() -> f64 {
    1.0
}
fn default_blockage() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcConfig {
    pub beta: f64,
    /// Per-element reflection gains; all ones when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<LcMaterial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HyperParams {
    /// Initial rank-penalty weight.
    pub eta0: f64,
    pub penalty_growth: f64,
    pub sdp_outer: usize,
    pub sdp_inner: usize,
    pub scalable_restarts: usize,
    pub scalable_outer: usize,
    pub scalable_inner: usize,
    /// Log-sum-exp smoothing, bits per symbol.
    pub lse_mu: f64,
    pub gamma0: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            eta0: 0.0018,
            penalty_growth: 5.0,
            sdp_outer: 2,
            sdp_inner: 9,
            scalable_restarts: 10,
            scalable_outer: 14,
            scalable_inner: 50,
            lse_mu: 0.05,
            gamma0: 1.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneConfig {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    pub mean_k: [f64; 3],
    pub stochastic_k: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectorsConfig {
    /// Rician K-factors for the BS–point, BS–RIS and RIS–point links.
    pub k_factors: [f64; 3],
    /// Height of the ground plane, which carries the deterministic component.
    pub ground_z_m: f64,
    /// Number of randomly placed purely diffuse planes.
    pub random_planes: usize,
    /// Explicit planes; when non-empty they replace the generated set.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub planes: Vec<PlaneConfig>,
}

impl Default for ReflectorsConfig {
    fn default() -> Self {
        Self { k_factors: [0.0, 0.1, 0.1], ground_z_m: -6.5, random_planes: 9, planes: Vec::new() }
    }
}

/// On-disk scenario schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub arrays: ArraysConfig,
    pub regions: RegionsConfig,
    pub frequency: FrequencyConfig,
    pub rf: RfConfig,
    pub lc: LcConfig,
    #[serde(default)]
    pub hyper: HyperParams,
    #[serde(default)]
    pub reflectors: ReflectorsConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Element positions of an antenna array or surface, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub center: Point,
    pub spacing: f64,
    pub positions: Vec<Point>,
}

impl ArrayGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Grid spanned by `u` and `v` around `center`; the `u` index varies slowest.
    fn planar(center: Point, counts: [usize; 2], spacing: f64, u: Point, v: Point) -> Self {
        let mut positions = Vec::with_capacity(counts[0] * counts[1]);
        let off = |i: usize, n: usize| (i as f64 - (n as f64 - 1.0) / 2.0) * spacing;
        for i in 0..counts[0] {
            for j in 0..counts[1] {
                positions.push(center + u * off(i, counts[0]) + v * off(j, counts[1]));
            }
        }
        Self { center, spacing, positions }
    }

    /// Base-station array in the x–z plane.
    pub fn base_station(center: Point, shape: [usize; 2], spacing: f64) -> Self {
        Self::planar(center, shape, spacing, Vector3::x(), Vector3::z())
    }

    /// Surface in the y–z plane; `shape = [n, 1]` is a linear array along y.
    pub fn surface(center: Point, shape: [usize; 2], spacing: f64) -> Self {
        Self::planar(center, shape, spacing, Vector3::y(), Vector3::z())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub min: Point,
    pub max: Point,
    pub grid: [usize; 3],
}

impl Region {
    fn from_config(c: &RegionConfig) -> Self {
        Self { min: Vector3::from(c.min), max: Vector3::from(c.max), grid: c.grid }
    }

    pub fn center(&self) -> Point {
        (self.min + self.max) / 2.0
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] - 1e-12 && p[i] <= self.max[i] + 1e-12)
    }

    /// Closed boxes intersect.
    pub fn overlaps(&self, other: &Region) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// The same box collapsed to its center point.
    pub fn singleton(&self) -> Region {
        Region { min: self.min, max: self.max, grid: [1, 1, 1] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarrier_bandwidth_hz: f64,
    pub design_points: usize,
    pub eval_points: usize,
}

/// RF constants in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct RfConstants {
    /// Transmit power, watts.
    pub tx_power_w: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd_w_hz: f64,
    /// Linear noise figure.
    pub noise_figure: f64,
    pub reference_distance_m: f64,
    pub pathloss_exponents: [f64; 3],
    /// Linear power factor applied to the direct BS–point link.
    pub blockage_power_factor: f64,
}

impl RfConstants {
    /// Per-subcarrier noise power `W_k · N_0 · N_f`, watts.
    pub fn noise_power(&self, subcarrier_bandwidth_hz: f64) -> f64 {
        subcarrier_bandwidth_hz * self.noise_psd_w_hz * self.noise_figure
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub bs: ArrayGeometry,
    pub ris: ArrayGeometry,
    pub user_region: Region,
    pub eve_region: Region,
    pub freq: FrequencyPlan,
    pub rf: RfConstants,
    pub lc: LcParams,
    pub hyper: HyperParams,
    pub reflectors: Vec<Reflector>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn finite3(name: &str, v: &[f64; 3]) -> Result<(), Error> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{name} has non-finite coordinates")))
    }
}

impl Scenario {
    pub fn from_config(config: ScenarioConfig) -> Result<Self, Error> {
        let a = &config.arrays;
        let f = &config.frequency;
        let rf = &config.rf;
        let h = &config.hyper;

        if !(f.center_hz > 0.0) {
            return Err(invalid("center frequency must be positive"));
        }
        if !(f.bandwidth_hz > 0.0 && f.bandwidth_hz < 2.0 * f.center_hz) {
            return Err(invalid("bandwidth must lie in (0, 2 f_c)"));
        }
        if !(f.subcarrier_bandwidth_hz > 0.0) {
            return Err(invalid("subcarrier bandwidth must be positive"));
        }
        if f.design_points < 1 {
            return Err(invalid("design grid needs at least one frequency"));
        }
        if f.eval_points < f.design_points {
            return Err(invalid("evaluation grid must be at least as fine as the design grid"));
        }

        let half_wavelength = SPEED_OF_LIGHT / f.center_hz / 2.0;
        let bs_spacing = a.bs_spacing_m.unwrap_or(half_wavelength);
        let ris_spacing = a.ris_spacing_m.unwrap_or(half_wavelength);
        if !(bs_spacing > 0.0) || !(ris_spacing > 0.0) {
            return Err(invalid("array element spacing must be positive"));
        }
        if a.bs_shape.contains(&0) || a.ris_shape.contains(&0) {
            return Err(invalid("arrays need at least one element"));
        }
        finite3("bs_center", &a.bs_center)?;
        finite3("ris_center", &a.ris_center)?;

        let mut regions = Vec::new();
        for (name, r) in [("user", &config.regions.user), ("eve", &config.regions.eve)] {
            finite3(name, &r.min)?;
            finite3(name, &r.max)?;
            if (0..3).any(|i| r.min[i] > r.max[i]) {
                return Err(invalid(format!("{name} region has min > max")));
            }
            if r.grid.contains(&0) {
                return Err(invalid(format!("{name} region grid counts must be >= 1")));
            }
            regions.push(Region::from_config(r));
        }
        if regions[0].overlaps(&regions[1]) {
            return Err(invalid("regions overlap"));
        }

        if !rf.tx_power_dbm.is_finite() || !rf.noise_psd_dbm_hz.is_finite() || !rf.noise_figure_db.is_finite() {
            return Err(invalid("RF constants must be finite"));
        }
        if !(rf.reference_distance_m > 0.0) {
            return Err(invalid("reference distance must be positive"));
        }
        if rf.pathloss_exponents.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(invalid("pathloss exponents must be finite and nonnegative"));
        }
        if !rf.blockage_loss_db.is_finite() {
            return Err(invalid("blockage loss must be finite"));
        }

        if !(h.eta0 > 0.0) {
            return Err(invalid("eta0 must be positive"));
        }
        if !(h.penalty_growth > 1.0) {
            return Err(invalid("penalty_growth must exceed 1"));
        }
        if !(h.lse_mu > 0.0) {
            return Err(invalid("lse_mu must be positive"));
        }
        if !(h.gamma0 >= 1.0) {
            return Err(invalid("gamma0 must be at least 1"));
        }
        if h.sdp_outer == 0 || h.sdp_inner == 0 || h.scalable_outer == 0 || h.scalable_inner == 0 || h.scalable_restarts == 0 {
            return Err(invalid("iteration counts must be positive"));
        }

        let bs = ArrayGeometry::base_station(Vector3::from(a.bs_center), a.bs_shape, bs_spacing);
        let ris = ArrayGeometry::surface(Vector3::from(a.ris_center), a.ris_shape, ris_spacing);
        let lc = LcParams::new(config.lc.beta, config.lc.amplitude.clone(), config.lc.material.clone(), ris.len())?;
        let freq = FrequencyPlan {
            center_hz: f.center_hz,
            bandwidth_hz: f.bandwidth_hz,
            subcarrier_bandwidth_hz: f.subcarrier_bandwidth_hz,
            design_points: f.design_points,
            eval_points: f.eval_points,
        };
        lc.validate_band(freq.center_hz, freq.bandwidth_hz)?;

        let rf_lin = RfConstants {
            tx_power_w: dbm_to_watts(rf.tx_power_dbm),
            noise_psd_w_hz: dbm_to_watts(rf.noise_psd_dbm_hz),
            noise_figure: db_to_linear(rf.noise_figure_db),
            reference_distance_m: rf.reference_distance_m,
            pathloss_exponents: rf.pathloss_exponents,
            blockage_power_factor: db_to_linear(-rf.blockage_loss_db),
        };
        let reflectors = build_reflectors(&config.reflectors, h.seed)?;
        let user_region = regions.remove(0);
        let eve_region = regions.remove(0);
        Ok(Self {
            hyper: h.clone(),
            config,
            bs,
            ris,
            user_region,
            eve_region,
            freq,
            rf: rf_lin,
            lc,
            reflectors,
        })
    }

    /// The bundled reference scenario.
    pub fn reference() -> Self {
        Self::from_config(ScenarioConfig::from_toml(REFERENCE_SCENARIO).expect("bundled config parses"))
            .expect("bundled config is valid")
    }

    /// Rebuilds the scenario after editing its configuration.
    pub fn modified(&self, edit: impl FnOnce(&mut ScenarioConfig)) -> Result<Self, Error> {
        let mut c = self.config.clone();
        edit(&mut c);
        Self::from_config(c)
    }

    pub fn with_seed(&self, seed: u64) -> Result<Self, Error> {
        self.modified(|c| c.hyper.seed = seed)
    }

    pub fn ris_len(&self) -> usize {
        self.ris.len()
    }

    pub fn noise_power(&self) -> f64 {
        self.rf.noise_power(self.freq.subcarrier_bandwidth_hz)
    }

    pub fn hash(&self) -> String {
        self.config.hash()
    }

    pub fn user_points(&self) -> Vec<Point> {
        sample_region(&self.user_region)
    }

    pub fn eve_points(&self) -> Vec<Point> {
        sample_region(&self.eve_region)
    }
}

/// Loads a TOML or JSON scenario; the format follows the file extension,
/// with TOML tried first for unknown extensions.
pub fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config = if is_json {
        ScenarioConfig::from_json(&text)
    } else {
        ScenarioConfig::from_toml(&text).or_else(|e| ScenarioConfig::from_json(&text).map_err(|_| e))
    }
    .map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Scenario::from_config(config)
}

/// `count` points spanning `[lo, hi]`, symmetric about the midpoint; a single
/// point sits at the midpoint.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let mid = (lo + hi) / 2.0;
    if count <= 1 {
        return vec![mid];
    }
    let step = (hi - lo) / (count as f64 - 1.0);
    let half = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                mid + (i as f64 - half) * step
            }
        })
        .collect()
}

/// Design and evaluation frequency grids over `[f_c − W/2, f_c + W/2]`.
pub fn frequency_grids(plan: &FrequencyPlan) -> (Vec<f64>, Vec<f64>) {
    let lo = plan.center_hz - plan.bandwidth_hz / 2.0;
    let hi = plan.center_hz + plan.bandwidth_hz / 2.0;
    let grid = |k: usize| {
        let mut g = uniform_grid(lo, hi, k);
        if k % 2 == 1 {
            g[k / 2] = plan.center_hz;
        }
        g
    };
    (grid(plan.design_points), grid(plan.eval_points))
}

/// Cartesian grid over the region, x-major, then y, then z.
pub fn sample_region(region: &Region) -> Vec<Point> {
    let axes: Vec<Vec<f64>> = (0..3).map(|i| uniform_grid(region.min[i], region.max[i], region.grid[i])).collect();
    let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &x in &axes[0] {
        for &y in &axes[1] {
            for &z in &axes[2] {
                out.push(Vector3::new(x, y, z));
            }
        }
    }
    out
}

/// Reflecting planes: the ground plane carries the deterministic component;
/// the remaining planes are purely diffuse and placed at random from `seed`.
fn build_reflectors(cfg: &ReflectorsConfig, seed: u64) -> Result<Vec<Reflector>, Error> {
    if cfg.k_factors.iter().any(|k| !k.is_finite() || *k < 0.0) {
        return Err(invalid("K-factors must be nonnegative"));
    }
    if !cfg.planes.is_empty() {
        return cfg
            .planes
            .iter()
            .map(|p| Reflector::new(Vector3::from(p.point), Vector3::from(p.normal), p.mean_k, p.stochastic_k))
            .collect();
    }
    let mut out = vec![Reflector::new(
        Vector3::new(0.0, 0.0, cfg.ground_z_m),
        Vector3::z(),
        cfg.k_factors,
        cfg.k_factors,
    )?];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7265_666c_6563_746f);
    for _ in 0..cfg.random_planes {
        let point = Vector3::new(
            rng.random_range(-5.0..15.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(cfg.ground_z_m..8.0),
        );
        let normal = loop {
            let v = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                break v / n;
            }
        };
        out.push(Reflector::new(point, normal, [0.0; 3], cfg.k_factors)?);
    }
    Ok(out)
}
