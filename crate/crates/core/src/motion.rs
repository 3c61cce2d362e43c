//! Unscented CTRV prediction of single Gaussian components, with per-sigma-point
//! velocity (IDM) and turn-rate (road map) adaptation.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, wrap_angle};
use crate::error::{Error, Result};
use crate::idm::{interaction_accel, IdmParams};
use crate::linalg::{cholesky_with_jitter, symmetrize};
use crate::lmb::{GaussianComponent, Label, Matrix5, StateVector, Vector5, HEADING};
use crate::roadmap::{Point, RectId, Rectangle, RoadMap};

/// Augmented dimension: 5 state entries plus velocity and turn-rate noise.
pub const AUG_DIM: usize = 7;
pub type AugVector = SVector<f64, AUG_DIM>;
pub type AugMatrix = SMatrix<f64, AUG_DIM, AUG_DIM>;

const CTRV_MIN_TURN_RATE: f64 = 1e-4;
const SIGMA_JITTER: f64 = 1e-9;

/// Standard deviations of the acceleration-like process noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    /// Velocity noise, m/s^2.
    pub q_v: f64,
    /// Turn-rate noise, rad/s^2.
    pub q_omega: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self { q_v: 5.0, q_omega: 0.1 }
    }
}

impl ProcessNoise {
    pub fn zero() -> Self {
        Self { q_v: 0.0, q_omega: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct SigmaPointSet {
    pub points: Vec<AugVector>,
    pub weights: Vec<f64>,
    pub n: usize,
    pub kappa: f64,
}

/// Tunables of the adapted prediction (`prediction:` in the config file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionParams {
    pub kappa: f64,
    /// Below this speed the turn-rate correction is skipped (m/s).
    pub v_min: f64,
    /// Floor on the distance to the rectangle exit (m).
    pub s_min: f64,
    /// Turn-rate clamp after correction (rad/s).
    pub omega_max: f64,
    /// Successor hops searched for a leader.
    pub max_lookahead: usize,
    pub leader_existence_threshold: f64,
    /// Leaders farther than this are ignored (m).
    pub max_gap: f64,
    /// Cap on the IDM deceleration magnitude (m/s^2).
    pub decel_cap: f64,
    /// Lateral half-width of the leader search corridor used off-map (m).
    pub corridor_half_width: f64,
    pub component_cap: usize,
    pub merge_distance: f64,
    pub min_component_weight: f64,
    pub enable_interaction: bool,
    pub enable_map: bool,
}

impl Default for PredictionParams {
    fn default() -> Self {
        Self {
            kappa: 2.0,
            v_min: 0.5,
            s_min: 0.5,
            omega_max: 1.0,
            max_lookahead: 3,
            leader_existence_threshold: 0.5,
            max_gap: 100.0,
            decel_cap: 9.81,
            corridor_half_width: 1.75,
            component_cap: 12,
            merge_distance: 0.1,
            min_component_weight: 1e-5,
            enable_interaction: true,
            enable_map: true,
        }
    }
}

impl PredictionParams {
    pub fn validate(&self) -> Result<()> {
        if !(AUG_DIM as f64 + self.kappa > 0.0) {
            return Err(Error::param("prediction.kappa", "n + kappa must be positive"));
        }
        if self.component_cap == 0 {
            return Err(Error::param("prediction.component_cap", "must be at least 1"));
        }
        for (name, v) in [
            ("prediction.s_min", self.s_min),
            ("prediction.omega_max", self.omega_max),
            ("prediction.max_gap", self.max_gap),
            ("prediction.decel_cap", self.decel_cap),
        ] {
            if !(v > 0.0) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// k-1 estimate of another track, used as a potential leader.
#[derive(Clone, Debug, PartialEq)]
pub struct LeaderEntry {
    pub label: Label,
    pub mean: StateVector,
    pub existence: f64,
    /// Rectangles containing `mean`.
    pub rects: Vec<RectId>,
}

impl LeaderEntry {
    pub fn new(label: Label, mean: StateVector, existence: f64, map: Option<&RoadMap>) -> Self {
        let rects = map.map(|m| m.containing(&mean.position())).unwrap_or_default();
        Self { label, mean, existence, rects }
    }
}

/// Everything a component prediction may read besides the component itself.
#[derive(Clone, Debug)]
pub struct PredictionContext<'a> {
    pub road_map: Option<&'a RoadMap>,
    pub snapshot: &'a [LeaderEntry],
    /// Track being predicted; excluded from the snapshot.
    pub ego: Option<Label>,
    pub idm: IdmParams,
    pub dt: f64,
    pub noise: ProcessNoise,
    pub params: &'a PredictionParams,
}

impl PredictionContext<'_> {
    fn others(&self) -> impl Iterator<Item = &LeaderEntry> {
        let ego = self.ego;
        self.snapshot.iter().filter(move |e| Some(e.label) != ego)
    }
}

/// Counters for adaptations that were skipped or applied.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdaptationStats {
    pub velocity_adapted: usize,
    pub velocity_skipped: usize,
    pub turn_adapted: usize,
    pub turn_skipped: usize,
}

impl std::ops::AddAssign for AdaptationStats {
    fn add_assign(&mut self, o: Self) {
        self.velocity_adapted += o.velocity_adapted;
        self.velocity_skipped += o.velocity_skipped;
        self.turn_adapted += o.turn_adapted;
        self.turn_skipped += o.turn_skipped;
    }
}

/// CTRV transition over `dt` seconds; straight-line limit for tiny turn rates.
pub fn ctrv_transition(state: &StateVector, dt: f64) -> StateVector {
    let StateVector { x, y, v, phi, omega } = *state;
    let (dx, dy) = if omega.abs() < CTRV_MIN_TURN_RATE {
        (v * dt * phi.cos(), v * dt * phi.sin())
    } else {
        let r = v / omega;
        let phi_next = phi + omega * dt;
        (r * (phi_next.sin() - phi.sin()), r * (phi.cos() - phi_next.cos()))
    };
    StateVector { x: x + dx, y: y + dy, v, phi: wrap_angle(phi + omega * dt), omega }
}

/// `2n + 1` sigma points of the augmented density `N([m, 0], diag(P, Q))`.
pub fn generate_sigma_points(
    mean: &StateVector,
    cov: &Matrix5,
    noise: &ProcessNoise,
    kappa: f64,
) -> Result<SigmaPointSet> {
    let n = AUG_DIM;
    let spread = n as f64 + kappa;
    if !(spread > 0.0) {
        return Err(Error::param("kappa", format!("n + kappa = {spread} must be positive")));
    }
    let mut sigma = AugMatrix::zeros();
    sigma.fixed_view_mut::<5, 5>(0, 0).copy_from(cov);
    sigma[(5, 5)] = noise.q_v * noise.q_v;
    sigma[(6, 6)] = noise.q_omega * noise.q_omega;
    let root = cholesky_with_jitter(&sigma, SIGMA_JITTER).ok_or(Error::DegenerateCovariance)? * spread.sqrt();

    let mut mu = AugVector::zeros();
    mu.fixed_rows_mut::<5>(0).copy_from(&mean.to_vector());

    let mut points = Vec::with_capacity(2 * n + 1);
    points.push(mu);
    for i in 0..n {
        points.push(mu + root.column(i));
    }
    for i in 0..n {
        points.push(mu - root.column(i));
    }
    let mut weights = vec![1.0 / (2.0 * spread); 2 * n + 1];
    weights[0] = kappa / spread;
    Ok(SigmaPointSet { points, weights, n, kappa })
}

/// Adds the noise entries of an augmented point: `v += n_v dt`, `omega += n_omega dt`.
pub fn apply_process_noise(point: &AugVector, dt: f64) -> StateVector {
    StateVector {
        x: point[0],
        y: point[1],
        v: point[2] + point[5] * dt,
        phi: point[3],
        omega: point[4] + point[6] * dt,
    }
}

/// Weighted mean and covariance of propagated sigma points. Heading uses the
/// circular mean and wrapped residuals; the covariance is symmetrized.
pub fn recombine(points: &[StateVector], weights: &[f64]) -> (StateVector, Matrix5) {
    let mut m = Vector5::zeros();
    let (mut s, mut c) = (0.0, 0.0);
    for (p, w) in points.iter().zip(weights) {
        m += p.to_vector() * *w;
        s += w * p.phi.sin();
        c += w * p.phi.cos();
    }
    m[HEADING] = wrap_angle(s.atan2(c));
    let mean = StateVector::from_vector(&m);
    let mut cov = Matrix5::zeros();
    for (p, w) in points.iter().zip(weights) {
        let d = p.residual(&mean);
        cov += d * d.transpose() * *w;
    }
    symmetrize(&mut cov);
    (mean, cov)
}

/// Nearest qualifying track ahead of `point`, with the Euclidean gap.
///
/// On a map, candidates must sit in one of `rects` or downstream of the rectangle
/// best aligned with the point heading. Off-map (or without a map) a lateral
/// corridor around the heading is used instead.
pub fn find_leader(
    point: &StateVector,
    rects: &[RectId],
    ctx: &PredictionContext<'_>,
) -> Option<(StateVector, f64)> {
    let p = &ctx.params;
    let pos = point.position();
    let (sin, cos) = point.phi.sin_cos();
    let reachable: Option<BTreeSet<RectId>> = match ctx.road_map {
        Some(map) if !rects.is_empty() => {
            let canonical = map.closest_in_orientation(rects, point.phi)?;
            let mut set = map.downstream(canonical, p.max_lookahead);
            set.extend(rects.iter().copied());
            Some(set)
        }
        _ => None,
    };

    let mut best: Option<(StateVector, f64)> = None;
    for entry in ctx.others() {
        if entry.existence < p.leader_existence_threshold {
            continue;
        }
        let d = entry.mean.position() - pos;
        let ahead = d.x * cos + d.y * sin;
        if ahead <= 0.0 {
            continue;
        }
        let gap = d.norm();
        if gap > p.max_gap {
            continue;
        }
        let on_route = match &reachable {
            Some(set) => entry.rects.iter().any(|r| set.contains(r)),
            None => {
                let lateral = -d.x * sin + d.y * cos;
                lateral.abs() <= p.corridor_half_width
                    && angular_distance(entry.mean.phi, point.phi) < FRAC_PI_2
            }
        };
        if on_route && best.as_ref().is_none_or(|(_, g)| gap < *g) {
            best = Some((entry.mean, gap));
        }
    }
    best
}

/// IDM speed update `v <- max(0, v + max(a_int, -decel_cap) dt)`.
///
/// Points that are not moving forward are returned unchanged.
pub fn adapt_velocity(
    point: &StateVector,
    leader: &StateVector,
    gap: f64,
    idm: &IdmParams,
    dt: f64,
    decel_cap: f64,
) -> Result<StateVector> {
    if !(gap > 0.0) {
        return Err(Error::InvalidGap(gap));
    }
    if point.v <= 0.0 {
        return Ok(*point);
    }
    let accel = interaction_accel(point.v, point.v - leader.v, gap, idm)?.max(-decel_cap);
    Ok(StateVector { v: (point.v + accel * dt).max(0.0), ..*point })
}

/// Turn rate that steers the heading onto the rectangle orientation by the time
/// the point leaves the rectangle: `omega = dphi * v / s`, with `s` floored at
/// `s_min`. Returns `None` when `v < v_min`.
pub fn adapt_turn_rate(
    point: &StateVector,
    rect: &Rectangle,
    params: &PredictionParams,
) -> Option<StateVector> {
    if point.v < params.v_min {
        return None;
    }
    let dphi = wrap_angle(rect.orientation - point.phi);
    let s = rect.remaining_length(&point.position()).max(params.s_min);
    let omega = (dphi * point.v / s).clamp(-params.omega_max, params.omega_max);
    Some(StateVector { omega, ..*point })
}

/// Lane hypotheses for a component located at `state`: rectangles containing it
/// and roughly aligned with its heading, minus those that merely precede another
/// candidate on the same lane chain.
pub fn map_branches(map: &RoadMap, state: &StateVector, lookahead: usize) -> Vec<RectId> {
    let aligned: Vec<RectId> = map
        .containing(&state.position())
        .into_iter()
        .filter(|id| map.get(*id).is_some_and(|r| angular_distance(r.orientation, state.phi) < FRAC_PI_2))
        .collect();
    let heads = downstream_heads(map, &aligned, lookahead);
    if heads.is_empty() {
        map.closest_in_orientation(&aligned, state.phi).into_iter().collect()
    } else {
        heads
    }
}

struct Branch<'m> {
    assigned: &'m Rectangle,
    chain: BTreeSet<RectId>,
}

impl<'m> Branch<'m> {
    fn new(map: &'m RoadMap, id: RectId, lookahead: usize) -> Result<Self> {
        let assigned = map.rect(id)?;
        let mut chain = map.downstream(id, lookahead);
        chain.extend(map.predecessors(id).iter().copied());
        Ok(Self { assigned, chain })
    }

    /// Rectangle a sigma point is adapted against: one on this branch's chain if
    /// it contains the point, else any aligned containing one, else the assigned.
    /// Where consecutive rectangles overlap the downstream one wins; picking the
    /// upstream one would pull a lagging heading further back.
    fn resolve(&self, map: &'m RoadMap, point: &StateVector, containing: &[RectId], lookahead: usize) -> &'m Rectangle {
        let mut candidates: Vec<RectId> = containing.iter().copied().filter(|id| self.chain.contains(id)).collect();
        if candidates.is_empty() {
            candidates = containing
                .iter()
                .copied()
                .filter(|id| {
                    map.get(*id)
                        .is_some_and(|r| angular_distance(r.orientation, self.assigned.orientation) < FRAC_PI_2)
                })
                .collect();
        }
        let heads = downstream_heads(map, &candidates, lookahead);
        let pick = map.closest_in_orientation(if heads.is_empty() { &candidates } else { &heads }, point.phi);
        pick.and_then(|id| map.get(id)).unwrap_or(self.assigned)
    }
}

/// Candidates that do not lie upstream of another candidate.
fn downstream_heads(map: &RoadMap, candidates: &[RectId], lookahead: usize) -> Vec<RectId> {
    if candidates.len() <= 1 {
        return candidates.to_vec();
    }
    candidates
        .iter()
        .copied()
        .filter(|&id| {
            let down = map.downstream(id, lookahead);
            !candidates.iter().any(|&other| other != id && down.contains(&other))
        })
        .collect()
}

/// Plain UKF-CTRV prediction of one component, no adaptation.
pub fn predict_component_standard(
    component: &GaussianComponent,
    noise: &ProcessNoise,
    dt: f64,
    kappa: f64,
) -> Result<GaussianComponent> {
    let sigma = generate_sigma_points(&component.mean, &component.covariance, noise, kappa)?;
    let propagated: Vec<StateVector> = sigma
        .points
        .iter()
        .map(|p| ctrv_transition(&apply_process_noise(p, dt), dt))
        .collect();
    let (mean, covariance) = recombine(&propagated, &sigma.weights);
    Ok(GaussianComponent::new(component.weight, mean, covariance))
}

/// Adapted prediction of one component. At intersections the component is split
/// into one equally weighted copy per lane branch; output weights sum to the
/// input weight.
pub fn predict_component(
    component: &GaussianComponent,
    ctx: &PredictionContext<'_>,
) -> Result<(Vec<GaussianComponent>, AdaptationStats)> {
    let params = ctx.params;
    let mut stats = AdaptationStats::default();
    let map = ctx.road_map;

    let branches: Vec<Option<Branch<'_>>> = match map {
        Some(m) if params.enable_map => {
            let ids = map_branches(m, &component.mean, params.max_lookahead);
            if ids.is_empty() {
                vec![None]
            } else {
                ids.into_iter()
                    .map(|id| Branch::new(m, id, params.max_lookahead).map(Some))
                    .collect::<Result<_>>()?
            }
        }
        _ => vec![None],
    };

    let sigma = generate_sigma_points(&component.mean, &component.covariance, &ctx.noise, params.kappa)?;
    let copies = branches.len();
    let share = component.weight / copies as f64;
    let mut out = Vec::with_capacity(copies);
    let mut assigned_weight = 0.0;
    for (k, branch) in branches.iter().enumerate() {
        let mut propagated = Vec::with_capacity(sigma.points.len());
        for aug in &sigma.points {
            let mut state = apply_process_noise(aug, ctx.dt);
            let containing = match (map, params.enable_interaction || branch.is_some()) {
                (Some(m), true) => m.containing(&state.position()),
                _ => Vec::new(),
            };
            if params.enable_interaction {
                if let Some((leader, gap)) = find_leader(&state, &containing, ctx) {
                    match adapt_velocity(&state, &leader, gap, &ctx.idm, ctx.dt, params.decel_cap) {
                        Ok(adapted) => {
                            state = adapted;
                            stats.velocity_adapted += 1;
                        }
                        Err(_) => stats.velocity_skipped += 1,
                    }
                }
            }
            if let (Some(b), Some(m)) = (branch, map) {
                let rect = b.resolve(m, &state, &containing, params.max_lookahead);
                match adapt_turn_rate(&state, rect, params) {
                    Some(adapted) => {
                        state = adapted;
                        stats.turn_adapted += 1;
                    }
                    None => stats.turn_skipped += 1,
                }
            }
            propagated.push(ctrv_transition(&state, ctx.dt));
        }
        let (mean, covariance) = recombine(&propagated, &sigma.weights);
        let weight = if k + 1 == copies { component.weight - assigned_weight } else { share };
        assigned_weight += weight;
        out.push(GaussianComponent::new(weight, mean, covariance));
    }
    Ok((out, stats))
}

/// Unit vector along the heading.
pub fn heading_vector(phi: f64) -> Point {
    Point::new(phi.cos(), phi.sin())
}
