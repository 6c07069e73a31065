//! Simulation world: static geometry, scatterer populations and vehicle
//! trajectories.
//!
//! Scenarios are stored as TOML:
//!
//! ```toml
//! schema = 1
//! name = "example"
//! seed = 7
//!
//! [geometry]
//! origin = { lat = 48.2, lon = 16.4 }
//! sd_sites = [[120.0, -8.0]]
//! [[geometry.walls]]
//! vertices = [[0.0, -12.0], [100.0, -12.0]]
//! [[geometry.foliage]]
//! polygon = [[10.0, 8.0], [20.0, 8.0], [20.0, 11.0], [10.0, 11.0]]
//! density = "medium"
//! loss_db_per_m = 1.0
//!
//! [[vehicles]]
//! id = "car1"
//! role = "node"
//! node = 1
//! length = 4.5
//! width = 1.8
//! antenna = { height = 1.55, dx = 1.5, dy = -0.7 }
//! waypoints = [[0.0, 0.0, -2.0], [1.0, 10.0, -2.0]]
//!
//! [scatterer_params]
//! di = { chi = 0.5, w = 0.5 }
//!
//! [profiles.bus]
//! builtin = "bus_default"
//! ```
//!
//! Wall vertex order matters: diffuse scatterers are displaced towards the
//! left-hand side of each wall segment, which should face the street.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::TAU;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{polyline_length, OrientedRect, Point2};
use crate::gscm::ObstructionProfile;
use crate::rng::{self, tag};
use crate::spline::CubicSpline;
use crate::{Error, Result, SPEED_OF_LIGHT};

pub const SCHEMA_VERSION: u32 = 1;
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Geodetic anchor of the local frame (x east, y north).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoAnchor {
    pub lat: f64,
    pub lon: f64,
}

impl GeoAnchor {
    /// Equirectangular projection about the anchor.
    pub fn to_local(&self, lat: f64, lon: f64) -> Point2 {
        let x = (lon - self.lon).to_radians() * self.lat.to_radians().cos() * EARTH_RADIUS_M;
        let y = (lat - self.lat).to_radians() * EARTH_RADIUS_M;
        Point2::new(x, y)
    }

    pub fn to_geodetic(&self, p: Point2) -> (f64, f64) {
        let lat = self.lat + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon + (p.x / (EARTH_RADIUS_M * self.lat.to_radians().cos())).to_degrees();
        (lat, lon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foliage {
    pub polygon: Vec<Point2>,
    pub density: String,
    pub loss_db_per_m: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Geometry {
    pub walls: Vec<Vec<Point2>>,
    pub foliage: Vec<Foliage>,
    pub sd_sites: Vec<Point2>,
    pub origin: Option<GeoAnchor>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Kinematic state from the trajectory spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: Point2,
    pub velocity: Point2,
}

/// Time-continuous trajectory of a vehicle center.
#[derive(Debug, Clone)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    pub antenna_height: f64,
    /// Antenna position in the vehicle frame: `x` forward, `y` to the left.
    pub antenna_offset: Point2,
    sx: CubicSpline,
    sy: CubicSpline,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>, antenna_height: f64, antenna_offset: Point2) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation("trajectory needs at least two samples".into()));
        }
        if samples.iter().any(|s| !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite())) {
            return Err(Error::Validation("trajectory contains non-finite values".into()));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::Validation(format!(
                "non-increasing time in trajectory ({} s followed by {} s)",
                w[0].t, w[1].t
            )));
        }
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let x: Vec<f64> = samples.iter().map(|s| s.x).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
        Ok(Self {
            sx: CubicSpline::natural(&t, &x),
            sy: CubicSpline::natural(&t, &y),
            samples,
            antenna_height,
            antenna_offset,
        })
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn state(&self, t: f64) -> Result<Kinematics> {
        if !(t >= self.start() && t <= self.end()) {
            return Err(Error::OutOfSpan {
                t,
                start: self.start(),
                end: self.end(),
            });
        }
        let (x, vx) = self.sx.eval(t);
        let (y, vy) = self.sy.eval(t);
        Ok(Kinematics {
            position: Point2::new(x, y),
            velocity: Point2::new(vx, vy),
        })
    }
}

/// Position and velocity `(x, y, vx, vy)` of a trajectory at time `t`.
pub fn interpolate_position(traj: &Trajectory, t: f64) -> Result<(f64, f64, f64, f64)> {
    let k = traj.state(t)?;
    Ok((k.position.x, k.position.y, k.velocity.x, k.velocity.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Node,
    MobileScatterer,
}

#[derive(Debug, Clone)]
pub struct Vehicle {
    pub id: String,
    pub role: Role,
    /// Sounder node number (1-based) for `role = node`.
    pub node: Option<u16>,
    pub trajectory: Trajectory,
    pub length: f64,
    pub width: f64,
    pub front_gain_db: f64,
    pub back_gain_db: f64,
    pub obstruction_profile: Option<String>,
    /// Path-loss exponent increment per meter of LOS distance applied when
    /// the LOS crosses both the front and the back face.
    pub alpha_per_m: f64,
    /// Heading used while the vehicle is standing still, degrees from +x.
    pub heading_deg: Option<f64>,
}

impl Vehicle {
    /// Footprint at time `t`, oriented along the velocity.
    pub fn pose(&self, t: f64) -> Result<OrientedRect> {
        let k = self.trajectory.state(t)?;
        let heading = match k.velocity.normalized().filter(|_| k.velocity.norm() > 1e-6) {
            Some(h) => h,
            None => match self.heading_deg {
                Some(deg) => Point2::new(deg.to_radians().cos(), deg.to_radians().sin()),
                None => {
                    return Err(Error::Validation(format!(
                        "vehicle '{}' is standing still at t = {t} s and has no heading_deg",
                        self.id
                    )))
                }
            },
        };
        Ok(OrientedRect {
            center: k.position,
            heading,
            length: self.length,
            width: self.width,
        })
    }

    pub fn antenna_position(&self, t: f64) -> Result<Point2> {
        let rect = self.pose(t)?;
        let o = self.trajectory.antenna_offset;
        Ok(rect.center + rect.heading * o.x + rect.left() * o.y)
    }
}

/// Placement parameters of one scatterer type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Scatter point density, 1/m.
    pub chi: f64,
    /// Maximum scatterer distance from the wall, m.
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScattererParams {
    pub sd: Placement,
    pub md: Placement,
    pub di: Placement,
}

impl Default for ScattererParams {
    fn default() -> Self {
        crate::presets::table5_placement()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffuseScatterer {
    /// Stable index within the population.
    pub index: usize,
    pub wall: usize,
    pub position: Point2,
    /// Initial phase in `[0, 2π)`.
    pub initial_phase: f64,
}

/// Places `round(chi * len)` diffuse scatterers along every wall.
pub fn place_diffuse_scatterers(geometry: &Geometry, chi: f64, w: f64, seed: u64) -> Vec<DiffuseScatterer> {
    let mut out = Vec::new();
    for (wi, wall) in geometry.walls.iter().enumerate() {
        let len = polyline_length(wall);
        let count = (chi * len).round() as usize;
        if count == 0 || len <= 0.0 {
            continue;
        }
        let mut rng = rng::stream(seed, &[tag::DIFFUSE_PLACEMENT, wi as u64]);
        for _ in 0..count {
            let mut s = rng.random::<f64>() * len;
            let offset = rng.random::<f64>() * w;
            let initial_phase = rng.random::<f64>() * TAU;
            let mut position = wall[wall.len() - 1];
            for seg in wall.windows(2) {
                let l = seg[0].distance(seg[1]);
                if s <= l && l > 0.0 {
                    let dir = (seg[1] - seg[0]) * (1.0 / l);
                    position = seg[0] + dir * s + dir.perp() * offset;
                    break;
                }
                s -= l;
            }
            out.push(DiffuseScatterer {
                index: out.len(),
                wall: wi,
                position,
                initial_phase,
            });
        }
    }
    out
}

/// At most `budget` scatterers whose two-hop delay is within `tau_max`,
/// nearest (shortest two-hop distance) first.
pub fn select_relevant_diffuse<'a>(
    scatterers: &'a [DiffuseScatterer],
    tx: Point2,
    rx: Point2,
    budget: usize,
    tau_max: f64,
) -> Vec<&'a DiffuseScatterer> {
    let max_distance = tau_max * SPEED_OF_LIGHT;
    let mut candidates: Vec<(f64, &DiffuseScatterer)> = scatterers
        .iter()
        .map(|s| (tx.distance(s.position) + s.position.distance(rx), s))
        .filter(|(d, _)| *d <= max_distance)
        .collect();
    let order = |a: &(f64, &DiffuseScatterer), b: &(f64, &DiffuseScatterer)| {
        a.0.total_cmp(&b.0).then(a.1.index.cmp(&b.1.index))
    };
    if candidates.len() > budget {
        if budget == 0 {
            return Vec::new();
        }
        candidates.select_nth_unstable_by(budget - 1, order);
        candidates.truncate(budget);
    }
    candidates.sort_by(order);
    candidates.into_iter().map(|(_, s)| s).collect()
}

/// Validated simulation world. Immutable after loading.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub geometry: Geometry,
    pub vehicles: Vec<Vehicle>,
    pub scatterer_params: ScattererParams,
    pub profiles: BTreeMap<String, ObstructionProfile>,
}

impl Scenario {
    pub fn node(&self, number: u16) -> Option<&Vehicle> {
        self.vehicles.iter().find(|v| v.node == Some(number))
    }

    pub fn node_index(&self, number: u16) -> Option<usize> {
        self.vehicles.iter().position(|v| v.node == Some(number))
    }

    pub fn node_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.role == Role::Node).count()
    }

    /// Interval in which every trajectory is defined.
    pub fn common_span(&self) -> (f64, f64) {
        let start = self
            .vehicles
            .iter()
            .map(|v| v.trajectory.start())
            .fold(f64::NEG_INFINITY, f64::max);
        let end = self
            .vehicles
            .iter()
            .map(|v| v.trajectory.end())
            .fold(f64::INFINITY, f64::min);
        (start, end)
    }

    pub fn profile(&self, vehicle: &Vehicle) -> Option<&ObstructionProfile> {
        vehicle.obstruction_profile.as_ref().and_then(|id| self.profiles.get(id))
    }

    /// Parses scenario text. Relative profile CSV paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.build(base_dir)
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml(&text, path.parent())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema: u32,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    vehicles: Vec<RawVehicle>,
    #[serde(default)]
    scatterer_params: Option<ScattererParams>,
    #[serde(default)]
    profiles: BTreeMap<String, RawProfile>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    #[serde(default)]
    origin: Option<GeoAnchor>,
    #[serde(default)]
    walls: Vec<RawWall>,
    #[serde(default)]
    foliage: Vec<RawFoliage>,
    #[serde(default)]
    sd_sites: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWall {
    #[serde(default)]
    vertices: Option<Vec<[f64; 2]>>,
    /// Geodetic vertices `[lat, lon]`, projected about the origin.
    #[serde(default)]
    latlon: Option<Vec<[f64; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFoliage {
    polygon: Vec<[f64; 2]>,
    #[serde(default = "default_density")]
    density: String,
    #[serde(default = "default_foliage_loss")]
    loss_db_per_m: f64,
}

fn default_density() -> String {
    "medium".into()
}

fn default_foliage_loss() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAntenna {
    height: f64,
    #[serde(default)]
    dx: f64,
    #[serde(default)]
    dy: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVehicle {
    id: String,
    role: Role,
    #[serde(default)]
    node: Option<u16>,
    length: f64,
    width: f64,
    #[serde(default)]
    antenna: Option<RawAntenna>,
    waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    front_gain_db: f64,
    #[serde(default)]
    back_gain_db: f64,
    #[serde(default)]
    obstruction_profile: Option<String>,
    #[serde(default)]
    alpha_per_m: Option<f64>,
    #[serde(default)]
    heading_deg: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(default)]
    builtin: Option<String>,
    #[serde(default)]
    samples: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    csv: Option<String>,
}

fn to_points(v: &[[f64; 2]]) -> Vec<Point2> {
    v.iter().map(|p| Point2::new(p[0], p[1])).collect()
}

fn check_finite(points: &[Point2], what: &str) -> Result<()> {
    if points.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("{what} has non-finite coordinates")))
    }
}

impl RawScenario {
    fn build(self, base_dir: Option<&Path>) -> Result<Scenario> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported scenario schema {} (expected {SCHEMA_VERSION})",
                self.schema
            )));
        }
        let origin = self.geometry.origin;
        let mut walls = Vec::with_capacity(self.geometry.walls.len());
        for (i, w) in self.geometry.walls.iter().enumerate() {
            let pts = match (&w.vertices, &w.latlon) {
                (Some(v), None) => to_points(v),
                (None, Some(ll)) => {
                    let anchor = origin.ok_or_else(|| {
                        Error::Validation(format!("wall {i} uses latlon but geometry has no origin"))
                    })?;
                    ll.iter().map(|p| anchor.to_local(p[0], p[1])).collect()
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "wall {i} needs exactly one of `vertices` or `latlon`"
                    )))
                }
            };
            if pts.len() < 2 {
                return Err(Error::Validation(format!("wall {i} has fewer than two vertices")));
            }
            check_finite(&pts, &format!("wall {i}"))?;
            walls.push(pts);
        }
        let mut foliage = Vec::new();
        for (i, f) in self.geometry.foliage.into_iter().enumerate() {
            let polygon = to_points(&f.polygon);
            if polygon.len() < 3 {
                return Err(Error::Validation(format!("foliage {i} has fewer than three vertices")));
            }
            check_finite(&polygon, &format!("foliage {i}"))?;
            if !(f.loss_db_per_m >= 0.0) {
                return Err(Error::Validation(format!("foliage {i} has negative loss")));
            }
            foliage.push(Foliage {
                polygon,
                density: f.density,
                loss_db_per_m: f.loss_db_per_m,
            });
        }
        let sd_sites = to_points(&self.geometry.sd_sites);
        check_finite(&sd_sites, "sd_sites")?;
        let geometry = Geometry {
            walls,
            foliage,
            sd_sites,
            origin,
        };

        let mut profiles = BTreeMap::new();
        for (id, p) in self.profiles {
            let profile = match (p.builtin, p.samples, p.csv) {
                (Some(name), None, None) => ObstructionProfile::builtin(&name)
                    .ok_or_else(|| Error::Validation(format!("unknown builtin profile '{name}'")))?,
                (None, Some(samples), None) => {
                    ObstructionProfile::new(samples.iter().map(|s| (s[0], s[1])).collect())?
                }
                (None, None, Some(file)) => {
                    let path = base_dir.map_or_else(|| Path::new(&file).to_path_buf(), |d| d.join(&file));
                    ObstructionProfile::load_csv(&path)?
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "profile '{id}' needs exactly one of builtin, samples or csv"
                    )))
                }
            };
            profiles.insert(id, profile);
        }

        if self.vehicles.is_empty() {
            return Err(Error::Validation("scenario contains no vehicles".into()));
        }
        let mut ids = BTreeSet::new();
        let mut nodes = BTreeSet::new();
        let mut vehicles = Vec::with_capacity(self.vehicles.len());
        for v in self.vehicles {
            if !ids.insert(v.id.clone()) {
                return Err(Error::Validation(format!("duplicate vehicle id '{}'", v.id)));
            }
            if !(v.length > 0.0 && v.width > 0.0) {
                return Err(Error::Validation(format!("vehicle '{}' needs positive length and width", v.id)));
            }
            if v.role == Role::Node {
                let n = v
                    .node
                    .ok_or_else(|| Error::Validation(format!("node vehicle '{}' has no node number", v.id)))?;
                if n == 0 || !nodes.insert(n) {
                    return Err(Error::Validation(format!("invalid or duplicate node number {n}")));
                }
                if v.antenna.is_none() {
                    return Err(Error::Validation(format!("node vehicle '{}' has no antenna", v.id)));
                }
            } else if v.node.is_some() {
                return Err(Error::Validation(format!("mobile scatterer '{}' must not carry a node number", v.id)));
            }
            if let Some(p) = &v.obstruction_profile {
                if !profiles.contains_key(p) {
                    return Err(Error::Validation(format!("vehicle '{}' references unknown profile '{p}'", v.id)));
                }
            }
            let samples = v
                .waypoints
                .iter()
                .map(|w| TrajectorySample { t: w[0], x: w[1], y: w[2] })
                .collect();
            let (height, offset) = v
                .antenna
                .as_ref()
                .map_or((0.0, Point2::default()), |a| (a.height, Point2::new(a.dx, a.dy)));
            let trajectory = Trajectory::new(samples, height, offset)
                .map_err(|e| Error::Validation(format!("vehicle '{}': {e}", v.id)))?;
            vehicles.push(Vehicle {
                id: v.id,
                role: v.role,
                node: v.node,
                trajectory,
                length: v.length,
                width: v.width,
                front_gain_db: v.front_gain_db,
                back_gain_db: v.back_gain_db,
                obstruction_profile: v.obstruction_profile,
                alpha_per_m: v.alpha_per_m.unwrap_or(crate::gscm::ALPHA_BUS_PER_M),
                heading_deg: v.heading_deg,
            });
        }

        Ok(Scenario {
            name: self.name.unwrap_or_default(),
            seed: self.seed.unwrap_or(0),
            geometry,
            vehicles,
            scatterer_params: self.scatterer_params.unwrap_or_default(),
            profiles,
        })
    }
}
