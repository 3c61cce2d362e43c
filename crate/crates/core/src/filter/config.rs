use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idm::IdmParams;
use crate::lmb::{Matrix2, Matrix5, StateVector, Vector2, Vector5};
use crate::motion::{PredictionParams, ProcessNoise};

/// Region where a sensor can detect objects.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "vertices")]
pub enum FieldOfView {
    #[default]
    FullPlane,
    Polygon(Vec<[f64; 2]>),
}

impl FieldOfView {
    /// Even-odd point-in-polygon test; boundary points count as inside when the
    /// ray test says so.
    pub fn contains(&self, p: &Vector2) -> bool {
        match self {
            FieldOfView::FullPlane => true,
            FieldOfView::Polygon(v) => {
                let mut inside = false;
                let n = v.len();
                for i in 0..n {
                    let [xi, yi] = v[i];
                    let [xj, yj] = v[(i + n - 1) % n];
                    if (yi > p.y) != (yj > p.y) && p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi {
                        inside = !inside;
                    }
                }
                inside
            }
        }
    }

    /// Shoelace area, `None` for the full plane.
    pub fn area(&self) -> Option<f64> {
        match self {
            FieldOfView::FullPlane => None,
            FieldOfView::Polygon(v) => {
                let n = v.len();
                let twice: f64 = (0..n)
                    .map(|i| {
                        let [x0, y0] = v[i];
                        let [x1, y1] = v[(i + 1) % n];
                        x0 * y1 - x1 * y0
                    })
                    .sum();
                Some(twice.abs() / 2.0)
            }
        }
    }
}

/// Position sensor: detection probability, clutter density and noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorModel {
    pub id: u32,
    pub detection_prob: f64,
    /// Expected clutter detections per m^2.
    pub clutter_intensity: f64,
    pub measurement_noise: Matrix2,
    pub field_of_view: FieldOfView,
    /// Mounting position, used for occlusion in the simulator.
    pub position: [f64; 2],
    /// Whether unassociated detections of this sensor spawn births.
    pub spawns_births: bool,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self::radar()
    }
}

impl SensorModel {
    pub fn radar() -> Self {
        Self {
            id: 0,
            detection_prob: 0.85,
            clutter_intensity: 1e-5,
            measurement_noise: Matrix2::identity(),
            field_of_view: FieldOfView::FullPlane,
            position: [0.0, 0.0],
            spawns_births: true,
        }
    }

    pub fn camera() -> Self {
        Self { id: 1, detection_prob: 0.75, clutter_intensity: 0.01, spawns_births: false, ..Self::radar() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detection_prob) {
            return Err(Error::param("sensor.detection_prob", "must lie in [0, 1]"));
        }
        if !(self.clutter_intensity >= 0.0) {
            return Err(Error::param("sensor.clutter_intensity", "must be non-negative"));
        }
        let r = &self.measurement_noise;
        if (r[(0, 1)] - r[(1, 0)]).abs() > 1e-12 || r.determinant() <= 0.0 || r[(0, 0)] <= 0.0 {
            return Err(Error::param("sensor.measurement_noise", "must be symmetric positive definite"));
        }
        if let FieldOfView::Polygon(v) = &self.field_of_view {
            if v.len() < 3 {
                return Err(Error::param("sensor.field_of_view", "polygon needs at least 3 vertices"));
            }
        }
        Ok(())
    }

    /// Detection probability for an object at `p`; zero outside the field of view.
    pub fn detection_prob_at(&self, p: &Vector2) -> f64 {
        if self.field_of_view.contains(p) {
            self.detection_prob
        } else {
            0.0
        }
    }
}

/// Detections of one sensor at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementScan {
    pub timestamp: u64,
    pub sensor_id: u32,
    pub measurements: Vec<Vector2>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirthLocation {
    pub mean: StateVector,
    pub covariance: Matrix5,
    pub existence: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthMode {
    StaticRegions,
    #[default]
    MeasurementDriven,
}

/// Where new tracks come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BirthModel {
    pub mode: BirthMode,
    /// Used in static-regions mode, added every step.
    pub locations: Vec<BirthLocation>,
    /// Base existence of a measurement-driven birth, scaled by `1 - r_U`.
    pub existence: f64,
    /// A measurement spawns a birth when `1 - r_U` exceeds this.
    pub min_unassociated: f64,
    pub speed_mean: f64,
    pub speed_std: f64,
    pub turn_rate_std: f64,
    /// Heading hypotheses spread evenly around the circle.
    pub heading_components: usize,
}

impl Default for BirthModel {
    fn default() -> Self {
        Self {
            mode: BirthMode::MeasurementDriven,
            locations: Vec::new(),
            existence: 0.05,
            min_unassociated: 0.2,
            speed_mean: 8.0,
            speed_std: 5.0,
            turn_rate_std: 0.1,
            heading_components: 8,
        }
    }
}

impl BirthModel {
    pub fn static_regions(locations: Vec<BirthLocation>) -> Self {
        Self { mode: BirthMode::StaticRegions, locations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |r: f64| r > 0.0 && r < 1.0;
        if !in_unit(self.existence) || self.locations.iter().any(|l| !in_unit(l.existence)) {
            return Err(Error::param("birth.existence", "must lie in (0, 1)"));
        }
        if self.mode == BirthMode::MeasurementDriven && self.heading_components == 0 {
            return Err(Error::param("birth.heading_components", "must be at least 1"));
        }
        if !(self.speed_std > 0.0 && self.turn_rate_std > 0.0) {
            return Err(Error::param("birth.speed_std", "prior deviations must be positive"));
        }
        Ok(())
    }

    /// Heading-split prior centred on a measured position.
    pub fn components_at(&self, z: &Vector2, noise: &Matrix2) -> Vec<(f64, StateVector, Matrix5)> {
        let n = self.heading_components.max(1);
        let spacing = std::f64::consts::TAU / n as f64;
        let heading_std = spacing / 2.0;
        let mut cov = Matrix5::from_diagonal(&Vector5::new(
            0.0,
            0.0,
            self.speed_std * self.speed_std,
            heading_std * heading_std,
            self.turn_rate_std * self.turn_rate_std,
        ));
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(noise);
        (0..n)
            .map(|i| {
                let phi = -std::f64::consts::PI + spacing * (i as f64 + 0.5);
                (1.0 / n as f64, StateVector::new(z.x, z.y, self.speed_mean, phi, 0.0), cov)
            })
            .collect()
    }
}

/// Filter recursion parameters (defaults follow the published evaluation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub survival_prob: f64,
    pub extraction_threshold: f64,
    pub prune_threshold: f64,
    /// Step length (s).
    pub dt: f64,
    pub process_noise: ProcessNoise,
    pub prediction: PredictionParams,
    pub idm: IdmParams,
    /// Chi-square gate on the squared innovation distance (2 dof).
    pub gate: f64,
    /// Hypotheses kept per association group.
    pub max_hypotheses: usize,
    pub birth: BirthModel,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            survival_prob: 0.99,
            extraction_threshold: 0.2,
            prune_threshold: 0.01,
            dt: 0.1,
            process_noise: ProcessNoise::default(),
            prediction: PredictionParams::default(),
            idm: IdmParams::default(),
            gate: 13.8,
            max_hypotheses: 100,
            birth: BirthModel::default(),
        }
    }
}

impl FilterConfig {
    /// Same configuration with both prediction adaptations switched off.
    pub fn baseline(&self) -> Self {
        let mut c = self.clone();
        c.prediction.enable_interaction = false;
        c.prediction.enable_map = false;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.survival_prob > 0.0 && self.survival_prob <= 1.0) {
            return Err(Error::param("survival_prob", "must lie in (0, 1]"));
        }
        if !(0.0 < self.prune_threshold
            && self.prune_threshold < self.extraction_threshold
            && self.extraction_threshold < 1.0)
        {
            return Err(Error::param(
                "prune_threshold",
                "need 0 < prune_threshold < extraction_threshold < 1",
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if !(self.gate > 0.0) {
            return Err(Error::param("gate", "must be positive"));
        }
        if self.max_hypotheses == 0 {
            return Err(Error::param("max_hypotheses", "must be at least 1"));
        }
        if !(self.process_noise.q_v >= 0.0 && self.process_noise.q_omega >= 0.0) {
            return Err(Error::param("process_noise", "must be non-negative"));
        }
        self.prediction.validate()?;
        self.idm.validate()?;
        self.birth.validate()
    }
}
