use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::SensorModel;
use crate::idm::IdmParams;
use crate::lmb::Matrix2;
use crate::roadmap::{LaneSpec, MapDocument, Point, RectId};

use super::path::{arc_points, line_points};
use super::{Behavior, OcclusionConfig, OcclusionWindow, Scenario, VehicleSpec};

/// Sampling distance of the dense lane polylines (m).
const SPACING: f64 = 0.5;
/// Simplification tolerance for curved lanes; small enough that neighbouring
/// rectangles differ by only a few hundredths of a radian.
const CURVE_TOLERANCE: f64 = 0.005;
const STRAIGHT_TOLERANCE: f64 = 0.1;

/// Knobs shared by all library scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub rng_seed: u64,
    /// Overrides the builder's duration (s).
    pub duration: Option<f64>,
    /// Measurement noise standard deviation per axis (m).
    pub noise_std: f64,
    pub detection_prob: f64,
    /// Clutter per m^2.
    pub clutter_intensity: f64,
    /// Keep the builder's scripted occlusion windows.
    pub occlusion: bool,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self { rng_seed: 0, duration: None, noise_std: 1.0, detection_prob: 0.85, clutter_intensity: 1e-5, occlusion: true }
    }
}

type Builder = fn(&ScenarioParams) -> Scenario;

/// Named scenario builders with a one-line description.
pub fn scenario_library() -> Vec<(&'static str, &'static str, Builder)> {
    vec![
        ("roundabout", "single-lane roundabout (R = 25 m) with flared entry and exit, two vehicles, reference occluded 0.4 s", roundabout),
        ("urban-intersection", "four-way junction, reference turns left at 7 m/s", urban_intersection),
        ("long-right-turn", "90 degree right turn, R = 60 m, 10 m/s", long_right_turn),
        ("rural-intersection", "T junction, reference slows from 14 to 8 m/s and turns right", rural_intersection),
        ("s-curve", "left then right 60 degree arcs, R = 40 m, 12 m/s", s_curve),
        ("dense-following", "three-vehicle IDM platoon behind a stop-and-go leader, middle vehicle occluded 2 s", dense_following),
    ]
}

pub fn scenario_names() -> Vec<&'static str> {
    scenario_library().into_iter().map(|(n, _, _)| n).collect()
}

pub fn build_scenario(name: &str, params: &ScenarioParams) -> Result<Scenario> {
    scenario_library()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, build)| build(params))
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

fn lane(id: RectId, points: Vec<Point>, tolerance: f64) -> LaneSpec {
    LaneSpec { id_prefix: id, width: None, tolerance: Some(tolerance), points: points.iter().map(|p| [p.x, p.y]).collect() }
}

fn straight(id: RectId, a: (f64, f64), b: (f64, f64)) -> LaneSpec {
    lane(id, line_points(Point::new(a.0, a.1), Point::new(b.0, b.1), SPACING), STRAIGHT_TOLERANCE)
}

fn arc(id: RectId, center: (f64, f64), radius: f64, start: f64, end: f64) -> LaneSpec {
    lane(id, arc_points(Point::new(center.0, center.1), radius, start, end, SPACING), CURVE_TOLERANCE)
}

fn map(lanes: Vec<LaneSpec>, lane_links: Vec<[RectId; 2]>) -> MapDocument {
    MapDocument { default_width: 3.5, default_tolerance: STRAIGHT_TOLERANCE, lanes, links: Vec::new(), lane_links }
}

fn radar(p: &ScenarioParams, position: [f64; 2]) -> SensorModel {
    SensorModel {
        detection_prob: p.detection_prob,
        clutter_intensity: p.clutter_intensity,
        measurement_noise: Matrix2::identity() * (p.noise_std * p.noise_std),
        position,
        ..SensorModel::radar()
    }
}

fn scripted(id: u32, route: Vec<RectId>, offset: f64, profile: Vec<[f64; 2]>) -> VehicleSpec {
    VehicleSpec { id, spawn_time: 0.0, route, offset, speed: profile[0][1], behavior: Behavior::Scripted { profile } }
}

#[allow(clippy::too_many_arguments)]
fn scenario(
    name: &str,
    p: &ScenarioParams,
    map: MapDocument,
    vehicles: Vec<VehicleSpec>,
    sensor_position: [f64; 2],
    duration: f64,
    reference_vehicle: u32,
    windows: Vec<OcclusionWindow>,
) -> Scenario {
    Scenario {
        name: name.to_string(),
        map,
        vehicles,
        sensors: vec![radar(p, sensor_position)],
        duration: p.duration.unwrap_or(duration),
        step: 0.1,
        rng_seed: p.rng_seed,
        reference_vehicle,
        occlusion: OcclusionConfig { windows: if p.occlusion { windows } else { Vec::new() }, ..Default::default() },
    }
}

fn roundabout(p: &ScenarioParams) -> Scenario {
    // Counter-clockwise ring; radial arms join it through right-turn flares
    // that touch the ring tangentially at the bottom (entry) and top (exit).
    let (r, flare) = (25.0, 15.0);
    let c = r + flare;
    let lanes = vec![
        straight(1000, (-flare, -c - 40.0), (-flare, -c)),
        arc(7000, (0.0, -c), flare, PI, FRAC_PI_2),
        arc(2000, (0.0, 0.0), r, -FRAC_PI_2, 0.0),
        arc(3000, (0.0, 0.0), r, 0.0, FRAC_PI_2),
        arc(4000, (0.0, 0.0), r, FRAC_PI_2, PI),
        arc(5000, (0.0, 0.0), r, PI, 1.5 * PI),
        arc(8000, (0.0, c), flare, 1.5 * PI, PI),
        straight(6000, (-flare, c), (-flare, c + 40.0)),
    ];
    let links = vec![
        [1000, 7000],
        [7000, 2000],
        [2000, 3000],
        [3000, 4000],
        [4000, 5000],
        [5000, 2000],
        [3000, 8000],
        [8000, 6000],
    ];
    let route = vec![1000, 7000, 2000, 3000, 4000, 5000, 2000, 3000, 8000, 6000];
    let vehicles = vec![scripted(0, route.clone(), 0.0, vec![[0.0, 8.0]]), scripted(1, route, 20.0, vec![[0.0, 8.0]])];
    let windows = vec![OcclusionWindow { vehicle: 0, start: 12.0, end: 12.4 }];
    scenario("roundabout", p, map(lanes, links), vehicles, [0.0, 0.0], 42.0, 0, windows)
}

fn urban_intersection(p: &ScenarioParams) -> Scenario {
    let lanes = vec![
        straight(1000, (-50.0, -1.75), (-8.0, -1.75)),
        straight(2000, (-8.0, -1.75), (50.0, -1.75)),
        arc(3000, (-8.0, 8.0), 9.75, -FRAC_PI_2, 0.0),
        straight(4000, (1.75, 8.0), (1.75, 50.0)),
        arc(5000, (-8.0, -8.0), 6.25, FRAC_PI_2, 0.0),
        straight(6000, (-1.75, -8.0), (-1.75, -50.0)),
    ];
    let links = vec![[1000, 2000], [1000, 3000], [1000, 5000], [3000, 4000], [5000, 6000]];
    let vehicles = vec![
        scripted(0, vec![1000, 3000, 4000], 0.0, vec![[0.0, 7.0]]),
        scripted(1, vec![1000, 2000], 25.0, vec![[0.0, 8.0]]),
    ];
    scenario("urban-intersection", p, map(lanes, links), vehicles, [0.0, 0.0], 13.5, 0, Vec::new())
}

fn long_right_turn(p: &ScenarioParams) -> Scenario {
    let lanes = vec![
        straight(1000, (-40.0, 0.0), (0.0, 0.0)),
        arc(2000, (0.0, -60.0), 60.0, FRAC_PI_2, 0.0),
        straight(3000, (60.0, -60.0), (60.0, -100.0)),
    ];
    let vehicles = vec![scripted(0, vec![1000, 2000, 3000], 0.0, vec![[0.0, 10.0]])];
    scenario("long-right-turn", p, map(lanes, vec![[1000, 2000], [2000, 3000]]), vehicles, [20.0, -30.0], 17.0, 0, Vec::new())
}

fn rural_intersection(p: &ScenarioParams) -> Scenario {
    let lanes = vec![
        straight(1000, (-80.0, 0.0), (0.0, 0.0)),
        straight(2000, (0.0, 0.0), (80.0, 0.0)),
        arc(3000, (0.0, -15.0), 15.0, FRAC_PI_2, 0.0),
        straight(4000, (15.0, -15.0), (15.0, -80.0)),
    ];
    let links = vec![[1000, 2000], [1000, 3000], [3000, 4000]];
    let vehicles = vec![
        scripted(0, vec![1000, 3000, 4000], 0.0, vec![[0.0, 14.0], [4.0, 8.0], [12.0, 8.0], [15.0, 14.0]]),
        scripted(1, vec![1000, 2000], 40.0, vec![[0.0, 16.0]]),
    ];
    scenario("rural-intersection", p, map(lanes, links), vehicles, [0.0, -10.0], 16.0, 0, Vec::new())
}

fn s_curve(p: &ScenarioParams) -> Scenario {
    let r = 40.0;
    let (s, c) = FRAC_PI_3.sin_cos();
    let p1 = (r * s, r - r * c);
    let c2 = (p1.0 + r * s, p1.1 - r * c);
    let lanes = vec![
        straight(1000, (-40.0, 0.0), (0.0, 0.0)),
        arc(2000, (0.0, r), r, -FRAC_PI_2, -FRAC_PI_2 + FRAC_PI_3),
        arc(3000, c2, r, 5.0 * PI / 6.0, FRAC_PI_2),
        straight(4000, (c2.0, c2.1 + r), (c2.0 + 40.0, c2.1 + r)),
    ];
    let links = vec![[1000, 2000], [2000, 3000], [3000, 4000]];
    let vehicles = vec![scripted(0, vec![1000, 2000, 3000, 4000], 0.0, vec![[0.0, 12.0]])];
    scenario("s-curve", p, map(lanes, links), vehicles, [35.0, 20.0], 13.0, 0, Vec::new())
}

fn dense_following(p: &ScenarioParams) -> Scenario {
    let follow = || Behavior::IdmFollow { desired_speed: 30.0, delta: 4.0, params: IdmParams::default() };
    let route = vec![1000];
    let vehicles = vec![
        scripted(0, route.clone(), 40.0, vec![[0.0, 10.0], [4.0, 10.0], [7.0, 4.0], [10.0, 4.0], [13.0, 10.0], [16.0, 10.0], [19.0, 3.0]]),
        VehicleSpec { id: 1, spawn_time: 0.0, route: route.clone(), offset: 20.0, speed: 10.0, behavior: follow() },
        VehicleSpec { id: 2, spawn_time: 0.0, route, offset: 0.0, speed: 10.0, behavior: follow() },
    ];
    let lanes = vec![straight(1000, (0.0, 0.0), (600.0, 0.0))];
    let windows = vec![OcclusionWindow { vehicle: 1, start: 5.0, end: 7.0 }];
    scenario("dense-following", p, map(lanes, Vec::new()), vehicles, [100.0, 20.0], 22.0, 1, windows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_builders_validate() {
        for (name, _, build) in scenario_library() {
            let sc = build(&ScenarioParams::default());
            assert_eq!(sc.name, name);
            sc.prepare().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(matches!(build_scenario("nope", &ScenarioParams::default()), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn dense_following_gaps() {
        let sc = build_scenario("dense-following", &ScenarioParams::default()).unwrap();
        let offsets: Vec<f64> = sc.vehicles.iter().map(|v| v.offset).collect();
        assert_eq!(offsets.windows(2).map(|w| w[0] - w[1]).collect::<Vec<_>>(), vec![20.0, 20.0]);
        assert!(sc.vehicles.iter().all(|v| v.route == sc.vehicles[0].route));
    }

    #[test]
    fn s_curve_turns_once() {
        let sc = build_scenario("s-curve", &ScenarioParams::default()).unwrap();
        let built = sc.prepare().unwrap().map;
        let orientations: Vec<f64> = [1000, 2000, 3000, 4000]
            .iter()
            .flat_map(|l| built.lanes[l].iter().map(|id| built.map.get(*id).unwrap().orientation))
            .collect();
        let signs: Vec<f64> = orientations
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| d.abs() > 1e-9)
            .map(f64::signum)
            .collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn roundabout_lanes_join_smoothly() {
        let sc = build_scenario("roundabout", &ScenarioParams::default()).unwrap();
        let lane = |id: RectId| sc.map.lanes.iter().find(|l| l.id_prefix == id).unwrap().points.clone();
        let heading = |a: [f64; 2], b: [f64; 2]| (b[1] - a[1]).atan2(b[0] - a[0]);
        for pair in &sc.map.lane_links {
            let (a, b) = (lane(pair[0]), lane(pair[1]));
            let (end, start) = (a[a.len() - 1], b[0]);
            assert!((end[0] - start[0]).hypot(end[1] - start[1]) < 1e-9, "{pair:?}");
            let kink = crate::angle::angular_distance(heading(a[a.len() - 2], end), heading(start, b[1]));
            assert!(kink < 0.05, "{pair:?}: {kink}");
        }
    }

    #[test]
    fn roundabout_loop_turns_full_circle() {
        let sc = build_scenario("roundabout", &ScenarioParams::default()).unwrap();
        let built = sc.prepare().unwrap().map;
        let mut ring: Vec<f64> = [2000, 3000, 4000, 5000]
            .iter()
            .flat_map(|l| built.lanes[l].iter().map(|id| built.map.get(*id).unwrap().orientation))
            .collect();
        ring.push(ring[0]);
        let total: f64 = ring.windows(2).map(|w| crate::angle::wrap_angle(w[1] - w[0])).sum();
        assert!((total - 2.0 * PI).abs() < 1e-9, "{total}");
    }
}
