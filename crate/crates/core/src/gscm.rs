//! Path enumeration for the geometry-based stochastic channel model,
//! including the large-vehicle reflection and obstruction model.
//!
//! Amplitude law per path type (power in dB):
//!
//! ```text
//! P = G0 - 10 n_p log10(max(d, d_ref) / d_ref) + s(x)
//! ```
//!
//! with `d` the traveled distance, `d_ref = 1 m` and `s(x)` a Gaussian
//! process in dB over traveled distance with exponential autocorrelation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::path::Path as FsPath;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::geom::{segment_intersection, segment_length_in_polygon, OrientedRect, Point2};
use crate::rng::{self, tag};
use crate::scenario::{place_diffuse_scatterers, select_relevant_diffuse, DiffuseScatterer, Scenario};
use crate::{Error, Result, SPEED_OF_LIGHT};

pub const D_REF: f64 = 1.0;
/// Path-loss exponent increment per meter of LOS distance through a bus.
pub const ALPHA_BUS_PER_M: f64 = 0.008;

/// Parameters of one scatterer type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScattererTypeParams {
    pub g0_db: f64,
    pub n_p: f64,
    /// Standard deviation of the large-scale fading, dB. Zero disables fading.
    pub mu_sigma: f64,
    pub mu_c: f64,
    pub d_c_min: f64,
}

impl ScattererTypeParams {
    pub fn coherence_distance(&self) -> f64 {
        self.mu_c.max(self.d_c_min)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = self.g0_db.is_finite()
            && self.n_p >= 0.0
            && self.mu_sigma >= 0.0
            && (self.mu_sigma == 0.0 || self.coherence_distance() > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid {name} scatterer parameters")))
        }
    }
}

/// How the traveled distance of a scattered path enters the loss law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceLaw {
    /// `d = d1 + d2`.
    #[default]
    Additive,
    /// Loss evaluated on `d1 * d2` (bistatic form).
    Product,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub los: ScattererTypeParams,
    pub sd: ScattererTypeParams,
    pub md: ScattererTypeParams,
    pub di: ScattererTypeParams,
    /// Maximum number of diffuse scatterers per link and snapshot.
    pub diffuse_budget: usize,
    /// Maximum two-hop delay of a diffuse path, s.
    pub tau_max: f64,
    pub distance_law: DistanceLaw,
}

impl Default for ModelParams {
    fn default() -> Self {
        crate::presets::table5()
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.los.validate("LOS")?;
        self.sd.validate("SD")?;
        self.md.validate("MD")?;
        self.di.validate("DI")?;
        if !(self.tau_max > 0.0) {
            return Err(Error::Validation("tau_max must be positive".into()));
        }
        Ok(())
    }
}

/// Received power in dB at traveled distance `d`.
pub fn power_db(params: &ScattererTypeParams, d: f64, fading_db: f64) -> f64 {
    params.g0_db - 10.0 * params.n_p * (d.max(D_REF) / D_REF).log10() + fading_db
}

/// Complex amplitude of a path of length `d`.
pub fn path_gain(
    params: &ScattererTypeParams,
    d: f64,
    fading_db: f64,
    wavelength: f64,
    initial_phase: f64,
) -> Complex64 {
    let amplitude = 10f64.powf(power_db(params, d, fading_db) / 20.0);
    Complex64::from_polar(amplitude, initial_phase - TAU * d / wavelength)
}

/// Large-scale fading in dB: zero-mean Gaussian over traveled distance
/// with autocorrelation `exp(-|dx| / d_c)`, sampled exactly for arbitrary
/// steps by a first-order recursion.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    sigma_db: f64,
    d_c: f64,
    value: f64,
    rng: ChaCha8Rng,
}

impl FadingProcess {
    pub fn new(sigma_db: f64, d_c: f64, mut rng: ChaCha8Rng) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        Self {
            sigma_db,
            d_c,
            value: sigma_db * z,
            rng,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn advance(&mut self, dx: f64) -> f64 {
        if self.sigma_db > 0.0 && dx > 0.0 {
            let rho = (-dx / self.d_c).exp();
            let z: f64 = self.rng.sample(StandardNormal);
            self.value = rho * self.value + (1.0 - rho * rho).sqrt() * self.sigma_db * z;
        }
        self.value
    }
}

/// Normalized axial loss profile of an obstructing vehicle, `u = 0` at the
/// front face and `u = 1` at the back face.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstructionProfile {
    samples: Vec<(f64, f64)>,
}

impl ObstructionProfile {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation("obstruction profile needs at least two samples".into()));
        }
        if samples.iter().any(|&(u, l)| !u.is_finite() || !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Validation("obstruction profile losses must be finite and non-negative".into()));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation("obstruction profile u must be strictly increasing".into()));
        }
        if samples[0].0 > 0.0 || samples[samples.len() - 1].0 < 1.0 {
            return Err(Error::Validation("obstruction profile must cover u in [0, 1]".into()));
        }
        Ok(Self { samples })
    }

    /// `bus_default`: linear 8.6 dB at the glass front to 28.6 dB at the
    /// metallic back. `van_default`: flat 7.5 dB.
    pub fn builtin(name: &str) -> Option<Self> {
        let samples = match name {
            "bus_default" => vec![(0.0, 8.6), (1.0, 28.6)],
            "van_default" => vec![(0.0, 7.5), (1.0, 7.5)],
            _ => return None,
        };
        Some(Self { samples })
    }

    /// Reads `u,loss_db` rows (with header).
    pub fn load_csv(path: &FsPath) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut samples = Vec::new();
        for row in reader.deserialize::<(f64, f64)>() {
            samples.push(row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?);
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn eval(&self, u: f64) -> f64 {
        let s = &self.samples;
        let u = u.clamp(s[0].0, s[s.len() - 1].0);
        let i = s.partition_point(|&(x, _)| x <= u).clamp(1, s.len() - 1);
        let ((u0, l0), (u1, l1)) = (s[i - 1], s[i]);
        l0 + (l1 - l0) * (u - u0) / (u1 - u0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReflectionCase {
    /// Both nodes ahead of the front face, `x_MD = +l/2`.
    Front,
    /// Both nodes behind the back face, `x_MD = -l/2`.
    Back,
    /// Any other configuration, `x_MD = 0`.
    Center,
}

/// Geometry of one link relative to a large vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeVehicleState {
    pub case: ReflectionCase,
    pub x_md: f64,
    pub theta_tx_front: f64,
    pub theta_rx_front: f64,
    pub theta_tx_back: f64,
    pub theta_rx_back: f64,
    pub d_los: f64,
    /// LOS segment intersects the vehicle footprint.
    pub olos: bool,
    /// LOS segment crosses both the front and the back face.
    pub through_length: bool,
}

fn angle_to(heading: Point2, v: Point2) -> f64 {
    heading.cross(v).atan2(heading.dot(v))
}

/// Applies the three-case rule for the reflection point on the mid-axis and
/// reports whether the vehicle obstructs the LOS.
pub fn select_reflection_point(tx: Point2, rx: Point2, pose: &OrientedRect) -> Result<LargeVehicleState> {
    if !((pose.heading.norm() - 1.0).abs() < 1e-6) || !pose.center.is_finite() {
        return Err(Error::Validation("degenerate vehicle pose (heading is not a unit vector)".into()));
    }
    if tx.distance(rx) < 1e-9 {
        return Err(Error::Validation("transmitter and receiver coincide".into()));
    }
    let h = pose.heading;
    let (front, back) = (pose.front_mid(), pose.back_mid());
    let theta_tx_front = angle_to(h, tx - front);
    let theta_rx_front = angle_to(h, rx - front);
    let theta_tx_back = angle_to(h, tx - back);
    let theta_rx_back = angle_to(h, rx - back);
    let half = 0.5 * PI;
    let case = if theta_tx_front.abs() <= half && theta_rx_front.abs() <= half {
        ReflectionCase::Front
    } else if theta_tx_back.abs() >= half && theta_rx_back.abs() >= half {
        ReflectionCase::Back
    } else {
        ReflectionCase::Center
    };
    let x_md = match case {
        ReflectionCase::Front => 0.5 * pose.length,
        ReflectionCase::Back => -0.5 * pose.length,
        ReflectionCase::Center => 0.0,
    };
    let (f0, f1) = pose.front_face();
    let (b0, b1) = pose.back_face();
    let through_length =
        segment_intersection(tx, rx, f0, f1).is_some() && segment_intersection(tx, rx, b0, b1).is_some();
    Ok(LargeVehicleState {
        case,
        x_md,
        theta_tx_front,
        theta_rx_front,
        theta_tx_back,
        theta_rx_back,
        d_los: tx.distance(rx),
        olos: pose.intersects_segment(tx, rx),
        through_length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Los,
    Sd,
    Md,
    Di,
}

/// Origin of a path: SD site index, vehicle index or diffuse scatterer index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceId {
    Los,
    Sd(usize),
    Md(usize),
    Di(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    pub source: SourceId,
    /// Delay, s.
    pub delay: f64,
    pub gain: Complex64,
}

/// LOS bookkeeping for one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LosState {
    pub distance: f64,
    pub olos: bool,
    /// Sum of the obstruction profile losses, dB.
    pub obstruction_db: f64,
    /// Path-loss exponent increment from vehicles crossed lengthwise.
    pub alpha: f64,
    pub vegetation_db: f64,
}

#[derive(Debug, Clone)]
pub struct PathSet {
    pub t: f64,
    pub link: (u16, u16),
    pub los: LosState,
    pub paths: Vec<Path>,
}

/// MD reflection off a vehicle. Empty when the vehicle obstructs the LOS.
pub fn large_vehicle_paths(
    tx: Point2,
    rx: Point2,
    pose: &OrientedRect,
    front_gain_db: f64,
    back_gain_db: f64,
    params_md: &ScattererTypeParams,
    fading_db: f64,
    wavelength: f64,
) -> Result<Vec<Path>> {
    let state = select_reflection_point(tx, rx, pose)?;
    if state.olos {
        return Ok(Vec::new());
    }
    let point = pose.axis_point(state.x_md);
    let d = tx.distance(point) + point.distance(rx);
    let offset = match state.case {
        ReflectionCase::Front => front_gain_db,
        ReflectionCase::Back => back_gain_db,
        ReflectionCase::Center => 0.0,
    };
    Ok(vec![Path {
        kind: PathKind::Md,
        source: SourceId::Md(0),
        delay: d / SPEED_OF_LIGHT,
        gain: path_gain(params_md, d, fading_db + offset, wavelength, 0.0),
    }])
}

/// Extra LOS loss and exponent increment from one obstructing vehicle, or
/// `None` when the LOS does not intersect it.
pub fn obstruct_los(tx: Point2, rx: Point2, pose: &OrientedRect, profile: Option<&ObstructionProfile>, alpha_per_m: f64) -> Option<(f64, f64)> {
    if !pose.intersects_segment(tx, rx) {
        return None;
    }
    let x = pose.axis_crossing(tx, rx).unwrap_or(0.0);
    let u = (0.5 * pose.length - x) / pose.length;
    let loss = profile.map_or(0.0, |p| p.eval(u));
    let (f0, f1) = pose.front_face();
    let (b0, b1) = pose.back_face();
    let through = segment_intersection(tx, rx, f0, f1).is_some() && segment_intersection(tx, rx, b0, b1).is_some();
    let alpha = if through { alpha_per_m * tx.distance(rx) } else { 0.0 };
    Some((loss, alpha))
}

/// Model instance for one scenario and seed: holds the diffuse population.
#[derive(Debug, Clone)]
pub struct Gscm<'a> {
    pub scenario: &'a Scenario,
    pub params: ModelParams,
    pub carrier_hz: f64,
    pub seed: u64,
    pub diffuse: Vec<DiffuseScatterer>,
}

impl<'a> Gscm<'a> {
    pub fn new(scenario: &'a Scenario, params: ModelParams, carrier_hz: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(carrier_hz > 0.0) {
            return Err(Error::Validation("carrier frequency must be positive".into()));
        }
        let di = scenario.scatterer_params.di;
        let diffuse = place_diffuse_scatterers(&scenario.geometry, di.chi, di.w, seed);
        Ok(Self {
            scenario,
            params,
            carrier_hz,
            seed,
            diffuse,
        })
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Stateful evaluator for link `(a, b)` with fading coherent over time.
    pub fn tracker(&self, a: u16, b: u16) -> Result<LinkTracker<'_, 'a>> {
        if a == b {
            return Err(Error::Validation(format!("link ({a}, {b}) connects a node to itself")));
        }
        let ia = self
            .scenario
            .node_index(a)
            .ok_or_else(|| Error::Validation(format!("unknown node {a}")))?;
        let ib = self
            .scenario
            .node_index(b)
            .ok_or_else(|| Error::Validation(format!("unknown node {b}")))?;
        Ok(LinkTracker {
            gscm: self,
            link: (a, b),
            ia,
            ib,
            last_t: None,
            last_centers: Vec::new(),
            odometer: vec![0.0; self.scenario.vehicles.len()],
            fading: BTreeMap::new(),
        })
    }

    fn scattered_distance(&self, d1: f64, d2: f64, dh: f64) -> (f64, f64) {
        // Vertical offset unfolds over the full path for vertical reflectors.
        let travel = (d1 + d2).hypot(dh);
        let law = match self.params.distance_law {
            DistanceLaw::Additive => travel,
            DistanceLaw::Product => d1.max(D_REF) * d2.max(D_REF),
        };
        (travel, law)
    }
}

/// Snapshot-by-snapshot path evaluation for one link. Times must be
/// non-decreasing; fading processes advance with the traveled distance of
/// both link ends (and of the reflecting vehicle for MD paths).
#[derive(Debug, Clone)]
pub struct LinkTracker<'g, 'a> {
    gscm: &'g Gscm<'a>,
    link: (u16, u16),
    ia: usize,
    ib: usize,
    last_t: Option<f64>,
    last_centers: Vec<Point2>,
    odometer: Vec<f64>,
    fading: BTreeMap<SourceId, (FadingProcess, f64)>,
}

impl LinkTracker<'_, '_> {
    fn fading_db(&mut self, source: SourceId, x: f64) -> f64 {
        let params = &self.gscm.params;
        let p = match source {
            SourceId::Los => params.los,
            SourceId::Sd(_) => params.sd,
            SourceId::Md(_) => params.md,
            SourceId::Di(_) => return 0.0,
        };
        if p.mu_sigma == 0.0 {
            return 0.0;
        }
        let (lo, hi) = (self.link.0.min(self.link.1), self.link.0.max(self.link.1));
        let (kind, index) = match source {
            SourceId::Los => (0, 0),
            SourceId::Sd(i) => (1, i),
            SourceId::Md(i) => (2, i),
            SourceId::Di(i) => (3, i),
        };
        let seed = self.gscm.seed;
        let (process, last_x) = self.fading.entry(source).or_insert_with(|| {
            let rng = rng::stream(seed, &[tag::FADING, u64::from(lo), u64::from(hi), kind, index as u64]);
            (FadingProcess::new(p.mu_sigma, p.coherence_distance(), rng), x)
        });
        let dx = x - *last_x;
        *last_x = x;
        process.advance(dx)
    }

    pub fn paths_at(&mut self, t: f64) -> Result<PathSet> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(Error::Validation(format!("link tracker evaluated backwards in time ({t} < {last})")));
            }
        }
        let g = self.gscm;
        let sc = g.scenario;
        let poses = sc
            .vehicles
            .iter()
            .map(|v| v.pose(t))
            .collect::<Result<Vec<_>>>()?;
        let centers: Vec<Point2> = poses.iter().map(|p| p.center).collect();
        if !self.last_centers.is_empty() {
            for (odo, (c, l)) in self.odometer.iter_mut().zip(centers.iter().zip(&self.last_centers)) {
                *odo += c.distance(*l);
            }
        }
        self.last_centers = centers;
        self.last_t = Some(t);

        let (va, vb) = (&sc.vehicles[self.ia], &sc.vehicles[self.ib]);
        let tx = va.antenna_position(t)?;
        let rx = vb.antenna_position(t)?;
        let dh = va.trajectory.antenna_height - vb.trajectory.antenna_height;
        let x_link = self.odometer[self.ia] + self.odometer[self.ib];
        let lambda = g.wavelength();
        let mut paths = Vec::new();

        // LOS, with vegetation and vehicle obstruction.
        let d_plane = tx.distance(rx);
        let d_los = d_plane.hypot(dh);
        let mut los = LosState {
            distance: d_los,
            ..LosState::default()
        };
        for f in &sc.geometry.foliage {
            los.vegetation_db += f.loss_db_per_m * segment_length_in_polygon(tx, rx, &f.polygon);
        }
        let mut blocked_by = vec![false; sc.vehicles.len()];
        for (vi, (v, pose)) in sc.vehicles.iter().zip(&poses).enumerate() {
            if vi == self.ia || vi == self.ib {
                continue;
            }
            if let Some((loss, alpha)) = obstruct_los(tx, rx, pose, sc.profile(v), v.alpha_per_m) {
                blocked_by[vi] = true;
                los.olos = true;
                los.obstruction_db += loss;
                los.alpha += alpha;
            }
        }
        let mut los_params = g.params.los;
        los_params.n_p += los.alpha;
        let s = self.fading_db(SourceId::Los, x_link);
        paths.push(Path {
            kind: PathKind::Los,
            source: SourceId::Los,
            delay: d_los / SPEED_OF_LIGHT,
            gain: path_gain(&los_params, d_los, s - los.obstruction_db - los.vegetation_db, lambda, 0.0),
        });

        // Static discrete scatterers, first-order reflections.
        for (i, &site) in sc.geometry.sd_sites.iter().enumerate() {
            let (travel, law) = g.scattered_distance(tx.distance(site), site.distance(rx), dh);
            let s = self.fading_db(SourceId::Sd(i), x_link);
            paths.push(Path {
                kind: PathKind::Sd,
                source: SourceId::Sd(i),
                delay: travel / SPEED_OF_LIGHT,
                gain: scattered_gain(&g.params.sd, law, travel, s, lambda, 0.0),
            });
        }

        // Mobile discrete scatterers: every other vehicle.
        for (vi, (v, pose)) in sc.vehicles.iter().zip(&poses).enumerate() {
            if vi == self.ia || vi == self.ib || blocked_by[vi] {
                continue;
            }
            let state = select_reflection_point(tx, rx, pose)?;
            let point = pose.axis_point(state.x_md);
            let (travel, law) = g.scattered_distance(tx.distance(point), point.distance(rx), dh);
            let offset = match state.case {
                ReflectionCase::Front => v.front_gain_db,
                ReflectionCase::Back => v.back_gain_db,
                ReflectionCase::Center => 0.0,
            };
            let s = self.fading_db(SourceId::Md(vi), x_link + self.odometer[vi]);
            paths.push(Path {
                kind: PathKind::Md,
                source: SourceId::Md(vi),
                delay: travel / SPEED_OF_LIGHT,
                gain: scattered_gain(&g.params.md, law, travel, s + offset, lambda, 0.0),
            });
        }

        // Diffuse scatterers.
        for d in select_relevant_diffuse(&g.diffuse, tx, rx, g.params.diffuse_budget, g.params.tau_max) {
            let (travel, law) = g.scattered_distance(tx.distance(d.position), d.position.distance(rx), dh);
            paths.push(Path {
                kind: PathKind::Di,
                source: SourceId::Di(d.index),
                delay: travel / SPEED_OF_LIGHT,
                gain: scattered_gain(&g.params.di, law, travel, 0.0, lambda, d.initial_phase),
            });
        }

        Ok(PathSet {
            t,
            link: self.link,
            los,
            paths,
        })
    }
}

/// Gain with the loss evaluated at `law_d` and the phase at the traveled
/// distance `travel`.
fn scattered_gain(
    params: &ScattererTypeParams,
    law_d: f64,
    travel: f64,
    fading_db: f64,
    wavelength: f64,
    initial_phase: f64,
) -> Complex64 {
    let amplitude = 10f64.powf(power_db(params, law_d, fading_db) / 20.0);
    Complex64::from_polar(amplitude, initial_phase - TAU * travel / wavelength)
}

/// Time step used by [`enumerate_paths`] to walk the fading processes from
/// the start of the common span to `t`.
pub const ENUMERATION_STEP_S: f64 = 0.01;

/// Path set of link `(a, b)` at time `t` under the default model parameters
/// and a 5.9 GHz carrier.
pub fn enumerate_paths(scenario: &Scenario, link: (u16, u16), t: f64, seed: u64) -> Result<PathSet> {
    let gscm = Gscm::new(scenario, ModelParams::default(), 5.9e9, seed)?;
    enumerate_with(&gscm, link, t)
}

/// Path set at `t` for an existing model instance. Fading is walked from
/// the start of the common span in fixed steps, so the result depends on
/// `t` only.
pub fn enumerate_with(gscm: &Gscm<'_>, link: (u16, u16), t: f64) -> Result<PathSet> {
    let (start, end) = gscm.scenario.common_span();
    if !(t >= start && t <= end) {
        return Err(Error::OutOfSpan { t, start, end });
    }
    let mut tracker = gscm.tracker(link.0, link.1)?;
    let steps = ((t - start) / ENUMERATION_STEP_S).floor() as usize;
    for i in 0..steps {
        tracker.paths_at(start + i as f64 * ENUMERATION_STEP_S)?;
    }
    tracker.paths_at(t)
}
