//! Synthetic ground truth and sensor scans on rectangle road maps.
//!
//! Vehicles follow the dense lane polylines of their route by arc length, so the
//! truth never shares the filter's CTRV model. Speed is either a scripted
//! profile or the full IDM (free-road term included) behind the vehicle ahead on
//! the same route.

mod io;
mod library;
mod path;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{read_scans_csv, read_truth_csv, write_scans_csv, write_truth_csv, ScanRow, TruthRow};
pub use library::{build_scenario, scenario_library, scenario_names, ScenarioParams};
pub use path::{arc_points, line_points, PathPose, RoutePath};

use crate::error::{Error, Result};
use crate::filter::{FieldOfView, MeasurementScan, SensorModel};
use crate::idm::{desired_gap, IdmParams};
use crate::lmb::{StateVector, Vector2};
use crate::roadmap::{BuiltMap, MapDocument, Point, RectId};

/// Hard limit on simulated deceleration (m/s^2).
const MAX_DECEL: f64 = 9.81;
/// Margin around the map bounding box used as clutter region.
const CLUTTER_MARGIN: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Behavior {
    /// Piecewise-linear speed over time, `[t, v]` pairs sorted by `t`.
    Scripted { profile: Vec<[f64; 2]> },
    /// Full IDM with free-road term `1 - (v / v0)^delta`.
    IdmFollow {
        desired_speed: f64,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default)]
        params: IdmParams,
    },
}

fn default_delta() -> f64 {
    4.0
}

impl Behavior {
    pub fn constant(speed: f64) -> Self {
        Behavior::Scripted { profile: vec![[0.0, speed]] }
    }

    fn scripted_speed(profile: &[[f64; 2]], t: f64) -> f64 {
        let i = profile.partition_point(|p| p[0] <= t);
        if i == 0 {
            return profile[0][1];
        }
        if i == profile.len() {
            return profile[i - 1][1];
        }
        let ([t0, v0], [t1, v1]) = (profile[i - 1], profile[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub id: u32,
    #[serde(default)]
    pub spawn_time: f64,
    /// Lane ids in travel order; consecutive lanes must be linked.
    pub route: Vec<RectId>,
    /// Initial arc length along the route (m).
    #[serde(default)]
    pub offset: f64,
    /// Initial speed (m/s); scripted vehicles use their profile instead.
    pub speed: f64,
    pub behavior: Behavior,
}

/// Time span in which one vehicle is invisible to all sensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionWindow {
    pub vehicle: u32,
    pub start: f64,
    pub end: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcclusionConfig {
    pub windows: Vec<OcclusionWindow>,
    /// Geometric shadowing by other vehicles' discs.
    pub disc_shadowing: bool,
    pub disc_radius: f64,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self { windows: Vec::new(), disc_shadowing: false, disc_radius: 1.5 }
    }
}

/// Scenario file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub map: MapDocument,
    pub vehicles: Vec<VehicleSpec>,
    pub sensors: Vec<SensorModel>,
    /// Seconds.
    pub duration: f64,
    /// Seconds.
    pub step: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Vehicle evaluated by the RMSE and label metrics.
    pub reference_vehicle: u32,
    #[serde(default)]
    pub occlusion: OcclusionConfig,
}

/// Validated scenario with its built map and route geometry.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub map: BuiltMap,
    pub paths: Vec<RoutePath>,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    /// Validates everything and builds map and route paths.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        if !(self.step > 0.0) {
            return Err(Error::scenario("step", "must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::scenario("duration", "must be positive"));
        }
        let map = self.map.build().map_err(|e| match e {
            Error::Scenario { field, reason } => Error::scenario(format!("map.{field}"), reason),
            other => Error::scenario("map", other.to_string()),
        })?;
        let mut ids = BTreeSet::new();
        let mut paths = Vec::with_capacity(self.vehicles.len());
        for (i, v) in self.vehicles.iter().enumerate() {
            let field = |f: &str| format!("vehicles[{i}].{f}");
            if !ids.insert(v.id) {
                return Err(Error::scenario(field("id"), format!("duplicate vehicle id {}", v.id)));
            }
            if v.route.is_empty() {
                return Err(Error::scenario(field("route"), "empty route"));
            }
            let mut pts = Vec::new();
            for (j, lane) in v.route.iter().enumerate() {
                let spec = self
                    .map
                    .lanes
                    .iter()
                    .find(|l| l.id_prefix == *lane)
                    .ok_or_else(|| Error::scenario(field("route"), format!("unknown lane {lane}")))?;
                if j > 0 && !map.lane_connected(v.route[j - 1], *lane) {
                    return Err(Error::scenario(
                        field("route"),
                        format!("lane {} is not linked to lane {lane}", v.route[j - 1]),
                    ));
                }
                pts.extend(spec.points());
            }
            let path = RoutePath::new(&pts).map_err(|e| Error::scenario(field("route"), e.to_string()))?;
            if !(0.0..path.length()).contains(&v.offset) {
                return Err(Error::scenario(field("offset"), "must lie on the route"));
            }
            if !(v.speed >= 0.0) || !(v.spawn_time >= 0.0) {
                return Err(Error::scenario(field("speed"), "speed and spawn time must be non-negative"));
            }
            match &v.behavior {
                Behavior::Scripted { profile } => {
                    if profile.is_empty()
                        || profile.iter().any(|p| !(p[1] >= 0.0))
                        || profile.windows(2).any(|w| !(w[1][0] > w[0][0]))
                    {
                        return Err(Error::scenario(
                            field("behavior.profile"),
                            "needs increasing times and non-negative speeds",
                        ));
                    }
                }
                Behavior::IdmFollow { desired_speed, delta, params } => {
                    if !(*desired_speed > 0.0 && *delta > 0.0) {
                        return Err(Error::scenario(field("behavior"), "desired speed and delta must be positive"));
                    }
                    params
                        .validate()
                        .map_err(|e| Error::scenario(field("behavior.params"), e.to_string()))?;
                }
            }
            paths.push(path);
        }
        if !ids.contains(&self.reference_vehicle) {
            return Err(Error::scenario("reference_vehicle", "no such vehicle"));
        }
        let mut sensor_ids = BTreeSet::new();
        for (i, s) in self.sensors.iter().enumerate() {
            s.validate().map_err(|e| Error::scenario(format!("sensors[{i}]"), e.to_string()))?;
            if !sensor_ids.insert(s.id) {
                return Err(Error::scenario(format!("sensors[{i}].id"), "duplicate sensor id"));
            }
        }
        for (i, w) in self.occlusion.windows.iter().enumerate() {
            if !ids.contains(&w.vehicle) || !(w.end >= w.start) {
                return Err(Error::scenario(format!("occlusion.windows[{i}]"), "unknown vehicle or empty window"));
            }
        }
        if self.occlusion.disc_shadowing && !(self.occlusion.disc_radius > 0.0) {
            return Err(Error::scenario("occlusion.disc_radius", "must be positive"));
        }
        Ok(PreparedScenario { scenario: self.clone(), map, paths })
    }
}

/// Ground truth of all active vehicles at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthStep {
    pub step: u64,
    pub vehicles: Vec<(u32, StateVector)>,
}

impl TruthStep {
    pub fn get(&self, id: u32) -> Option<&StateVector> {
        self.vehicles.iter().find(|(v, _)| *v == id).map(|(_, s)| s)
    }
}

pub type GroundTruthLog = Vec<TruthStep>;

/// One sensor scan plus the diagnostic clutter flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimScan {
    pub scan: MeasurementScan,
    pub is_clutter: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOutput {
    pub truth: GroundTruthLog,
    /// Scans in `(step, sensor_id)` order.
    pub scans: Vec<SimScan>,
}

impl SimulationOutput {
    /// Scans of one step.
    pub fn scans_at(&self, step: u64) -> Vec<MeasurementScan> {
        let start = self.scans.partition_point(|s| s.scan.timestamp < step);
        self.scans[start..].iter().take_while(|s| s.scan.timestamp == step).map(|s| s.scan.clone()).collect()
    }
}

/// Generator for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

#[derive(Clone, Debug)]
struct VehicleState {
    s: f64,
    v: f64,
    spawned: bool,
    finished: bool,
}

fn clutter_region(sensor: &SensorModel, map: &BuiltMap) -> Option<(Vec<[f64; 2]>, f64)> {
    match &sensor.field_of_view {
        FieldOfView::Polygon(v) => sensor.field_of_view.area().map(|a| (v.clone(), a)),
        FieldOfView::FullPlane => map.map.bounding_box().map(|(lo, hi)| {
            let (lo, hi) = (lo - Point::repeat(CLUTTER_MARGIN), hi + Point::repeat(CLUTTER_MARGIN));
            let poly = vec![[lo.x, lo.y], [hi.x, lo.y], [hi.x, hi.y], [lo.x, hi.y]];
            let area = (hi.x - lo.x) * (hi.y - lo.y);
            (poly, area)
        }),
    }
}

fn segment_hits_disc(a: &Point, b: &Point, center: &Point, radius: f64) -> bool {
    let ab = b - a;
    let t = if ab.norm_squared() > 0.0 { ((center - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
    (a + ab * t - center).norm() < radius
}

/// Runs `prepared` with the given generator. Deterministic for a fixed generator state.
pub fn simulate_with(prepared: &PreparedScenario, rng: &mut ChaCha8Rng) -> Result<SimulationOutput> {
    let sc = &prepared.scenario;
    let dt = sc.step;
    let steps = sc.steps();
    let mut states: Vec<VehicleState> = sc
        .vehicles
        .iter()
        .map(|v| VehicleState { s: v.offset, v: v.speed, spawned: false, finished: false })
        .collect();
    let regions: Vec<Option<(Vec<[f64; 2]>, f64)>> =
        sc.sensors.iter().map(|s| clutter_region(s, &prepared.map)).collect();
    let mut sensors: Vec<(usize, &SensorModel)> = sc.sensors.iter().enumerate().collect();
    sensors.sort_by_key(|(_, s)| s.id);
    let noise_roots: Vec<_> = sc
        .sensors
        .iter()
        .map(|s| s.measurement_noise.cholesky().map(|c| c.l()).ok_or(Error::SingularCovariance))
        .collect::<Result<_>>()?;

    let mut truth = Vec::with_capacity(steps + 1);
    let mut scans = Vec::with_capacity((steps + 1) * sensors.len());
    for k in 0..=steps {
        let t = k as f64 * dt;
        for (st, spec) in states.iter_mut().zip(&sc.vehicles) {
            if !st.spawned && t + 1e-9 >= spec.spawn_time {
                st.spawned = true;
                if let Behavior::Scripted { profile } = &spec.behavior {
                    st.v = Behavior::scripted_speed(profile, t);
                }
            }
        }
        let active: Vec<usize> = (0..states.len()).filter(|&i| states[i].spawned && !states[i].finished).collect();
        let mut step_truth = Vec::with_capacity(active.len());
        for &i in &active {
            let pose = prepared.paths[i].pose(states[i].s);
            let v = states[i].v;
            step_truth.push((
                sc.vehicles[i].id,
                StateVector::new(pose.position.x, pose.position.y, v, pose.heading, v * pose.curvature),
            ));
        }

        for (si, sensor) in &sensors {
            let origin = Point::new(sensor.position[0], sensor.position[1]);
            let mut measurements = Vec::new();
            let mut is_clutter = Vec::new();
            for (id, state) in &step_truth {
                let pos = state.position();
                let hidden = sc.occlusion.windows.iter().any(|w| w.vehicle == *id && t >= w.start && t < w.end)
                    || (sc.occlusion.disc_shadowing
                        && step_truth.iter().any(|(other, o)| {
                            other != id
                                && (o.position() - origin).norm() < (pos - origin).norm()
                                && segment_hits_disc(&origin, &pos, &o.position(), sc.occlusion.disc_radius)
                        }));
                let p_d = if hidden { 0.0 } else { sensor.detection_prob_at(&pos) };
                // One uniform and two normals per vehicle and sensor, drawn unconditionally
                // so occlusion does not shift the random stream.
                let u: f64 = rng.gen();
                let n = Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                if u < p_d {
                    measurements.push(pos + noise_roots[*si] * n);
                    is_clutter.push(false);
                }
            }
            if let Some((poly, area)) = &regions[*si] {
                let mean = sensor.clutter_intensity * area;
                let count = if mean > 0.0 {
                    Poisson::new(mean).map_err(|e| Error::param("clutter_intensity", e.to_string()))?.sample(rng)
                        as usize
                } else {
                    0
                };
                let fov = FieldOfView::Polygon(poly.clone());
                let (lo, hi) = poly.iter().fold(
                    ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
                    |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
                );
                for _ in 0..count {
                    loop {
                        let z = Vector2::new(rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1]));
                        if fov.contains(&z) {
                            measurements.push(z);
                            is_clutter.push(true);
                            break;
                        }
                    }
                }
            }
            scans.push(SimScan {
                scan: MeasurementScan { timestamp: k as u64, sensor_id: sensor.id, measurements },
                is_clutter,
            });
        }
        truth.push(TruthStep { step: k as u64, vehicles: step_truth });

        // Advance to k + 1: accelerations from the current states, applied together.
        let next_t = t + dt;
        let mut next_speed = vec![0.0; states.len()];
        for &i in &active {
            let spec = &sc.vehicles[i];
            let st = &states[i];
            next_speed[i] = match &spec.behavior {
                Behavior::Scripted { profile } => Behavior::scripted_speed(profile, next_t),
                Behavior::IdmFollow { desired_speed, delta, params } => {
                    let leader = active
                        .iter()
                        .filter(|&&j| j != i && sc.vehicles[j].route == spec.route && states[j].s > st.s)
                        .min_by(|&&a, &&b| states[a].s.total_cmp(&states[b].s));
                    let interaction = leader.map_or(0.0, |&j| {
                        let gap = states[j].s - st.s;
                        let ratio = desired_gap(st.v, st.v - states[j].v, params) / gap;
                        ratio * ratio
                    });
                    let accel = params.max_accel * (1.0 - (st.v / desired_speed).powf(*delta) - interaction);
                    (st.v + accel.max(-MAX_DECEL) * dt).max(0.0)
                }
            };
        }
        for &i in &active {
            let st = &mut states[i];
            st.s += 0.5 * (st.v + next_speed[i]) * dt;
            st.v = next_speed[i];
            if st.s > prepared.paths[i].length() {
                st.finished = true;
            }
        }
    }
    Ok(SimulationOutput { truth, scans })
}

/// Runs replicate `replicate` of the scenario, seeded from its `rng_seed`.
pub fn simulate(scenario: &Scenario, replicate: u64) -> Result<SimulationOutput> {
    let prepared = scenario.prepare()?;
    simulate_with(&prepared, &mut replicate_rng(scenario.rng_seed, replicate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadmap::LaneSpec;

    pub(crate) fn straight_scenario(vehicles: Vec<VehicleSpec>, sensor: SensorModel) -> Scenario {
        let points = line_points(Point::new(0.0, 0.0), Point::new(1000.0, 0.0), 5.0);
        Scenario {
            name: "straight".into(),
            map: MapDocument {
                default_width: 3.5,
                default_tolerance: 0.1,
                lanes: vec![LaneSpec { id_prefix: 0, width: None, tolerance: None, points: points.iter().map(|p| [p.x, p.y]).collect() }],
                links: vec![],
                lane_links: vec![],
            },
            vehicles,
            sensors: vec![sensor],
            duration: 10.0,
            step: 0.1,
            rng_seed: 1,
            reference_vehicle: 0,
            occlusion: OcclusionConfig::default(),
        }
    }

    fn vehicle(id: u32, offset: f64, behavior: Behavior) -> VehicleSpec {
        VehicleSpec { id, spawn_time: 0.0, route: vec![0], offset, speed: 10.0, behavior }
    }

    fn perfect() -> SensorModel {
        SensorModel {
            detection_prob: 1.0,
            clutter_intensity: 0.0,
            measurement_noise: crate::lmb::Matrix2::identity() * 1e-30,
            ..SensorModel::radar()
        }
    }

    #[test]
    fn constant_speed_kinematics() {
        let sc = straight_scenario(vec![vehicle(0, 0.0, Behavior::constant(10.0))], perfect());
        let out = simulate(&sc, 0).unwrap();
        assert_eq!(out.truth.len(), 101);
        let last = out.truth.last().unwrap().get(0).unwrap();
        assert!((last.x - 100.0).abs() < 1e-9);
        assert_eq!(last.phi, 0.0);
        for (step, scan) in out.truth.iter().zip(&out.scans) {
            let p = step.get(0).unwrap().position();
            assert_eq!(scan.scan.measurements.len(), 1);
            assert!((scan.scan.measurements[0] - p).norm() < 1e-12);
        }
    }

    #[test]
    fn scripted_profile_interpolates() {
        let profile = vec![[0.0, 10.0], [2.0, 0.0]];
        assert_eq!(Behavior::scripted_speed(&profile, 1.0), 5.0);
        assert_eq!(Behavior::scripted_speed(&profile, 5.0), 0.0);
        assert_eq!(Behavior::scripted_speed(&profile, -1.0), 10.0);
    }

    #[test]
    fn idm_follower_settles() {
        let follower = Behavior::IdmFollow { desired_speed: 30.0, delta: 4.0, params: IdmParams::default() };
        let mut sc = straight_scenario(
            vec![vehicle(0, 50.0, Behavior::constant(10.0)), vehicle(1, 0.0, follower)],
            perfect(),
        );
        sc.duration = 60.0;
        let out = simulate(&sc, 0).unwrap();
        let last = out.truth.last().unwrap();
        let gap = last.get(0).unwrap().x - last.get(1).unwrap().x;
        assert!((gap - 18.0).abs() < 2.0, "gap {gap}");
    }

    #[test]
    fn occlusion_window_hides_vehicle() {
        let mut sc = straight_scenario(vec![vehicle(0, 0.0, Behavior::constant(10.0))], perfect());
        sc.occlusion.windows.push(OcclusionWindow { vehicle: 0, start: 1.0, end: 2.0 });
        let out = simulate(&sc, 0).unwrap();
        let empty: Vec<u64> = out.scans.iter().filter(|s| s.scan.measurements.is_empty()).map(|s| s.scan.timestamp).collect();
        assert_eq!(empty, (10..20).collect::<Vec<_>>());
    }

    #[test]
    fn disc_shadowing() {
        let mut sensor = perfect();
        sensor.position = [-20.0, 0.0];
        let mut sc = straight_scenario(
            vec![vehicle(0, 0.0, Behavior::constant(10.0)), vehicle(1, 30.0, Behavior::constant(10.0))],
            sensor,
        );
        sc.occlusion.disc_shadowing = true;
        let out = simulate(&sc, 0).unwrap();
        assert!(out.scans.iter().all(|s| s.scan.measurements.len() == 1));
    }

    #[test]
    fn seeded_runs_repeat() {
        let sensor = SensorModel { clutter_intensity: 1e-3, ..SensorModel::radar() };
        let sc = straight_scenario(vec![vehicle(0, 0.0, Behavior::constant(10.0))], sensor);
        assert_eq!(simulate(&sc, 3).unwrap(), simulate(&sc, 3).unwrap());
        assert_ne!(simulate(&sc, 3).unwrap().scans, simulate(&sc, 4).unwrap().scans);
    }

    #[test]
    fn validation_names_field() {
        let mut sc = straight_scenario(vec![vehicle(0, 0.0, Behavior::constant(10.0))], perfect());
        sc.vehicles[0].route = vec![7];
        match sc.prepare() {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "vehicles[0].route"),
            other => panic!("unexpected {other:?}"),
        }
        sc.vehicles[0].route = vec![0];
        sc.step = 0.0;
        assert!(matches!(sc.prepare(), Err(Error::Scenario { .. })));
    }
}
