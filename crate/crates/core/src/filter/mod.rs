//! LMB filter recursion: prediction with survival and birth, measurement update,
//! pruning and track extraction.

mod config;
mod update;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{BirthLocation, BirthMode, BirthModel, FieldOfView, FilterConfig, MeasurementScan, SensorModel};
pub use update::{update, MeasurementPrediction, UpdateOutcome};

use crate::error::{Error, Result};
use crate::lmb::{BernoulliTrack, GaussianComponent, GaussianMixture, Label, LmbDensity, Matrix5, StateVector};
use crate::motion::{
    predict_component, predict_component_standard, AdaptationStats, LeaderEntry, PredictionContext,
};
use crate::roadmap::RoadMap;

/// Which component prediction the filter runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// Adapted prediction; adaptations follow the config flags.
    #[default]
    Adapted,
    /// Plain UKF-CTRV, ignoring map and other tracks.
    Standard,
}

/// Birth track waiting to be added at the next prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendingBirth {
    pub existence: f64,
    pub density: GaussianMixture,
}

/// Reported track state at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub label: Label,
    pub existence: f64,
    pub state: StateVector,
    pub covariance: Matrix5,
}

fn predict_mixture(
    mixture: &GaussianMixture,
    ctx: &PredictionContext<'_>,
    kind: PredictorKind,
    config: &FilterConfig,
) -> Result<(GaussianMixture, AdaptationStats)> {
    let mut comps: Vec<GaussianComponent> = Vec::with_capacity(mixture.len());
    let mut stats = AdaptationStats::default();
    for c in &mixture.components {
        match kind {
            PredictorKind::Adapted => {
                let (out, s) = predict_component(c, ctx)?;
                comps.extend(out);
                stats += s;
            }
            PredictorKind::Standard => {
                comps.push(predict_component_standard(c, &ctx.noise, ctx.dt, config.prediction.kappa)?);
            }
        }
    }
    let p = &config.prediction;
    let reduced = GaussianMixture::new(comps).reduce(p.min_component_weight, p.merge_distance, p.component_cap)?;
    Ok((reduced, stats))
}

/// Predicts every track one step ahead (`r <- p_S r`) and appends `births` with
/// fresh labels `(k, i)`, `k` being the new timestamp.
///
/// Each track sees the k-1 best-component means of all other tracks as leaders.
pub fn predict(
    density: &LmbDensity,
    births: &[PendingBirth],
    config: &FilterConfig,
    map: Option<&RoadMap>,
    kind: PredictorKind,
) -> Result<(LmbDensity, AdaptationStats)> {
    let k = density.timestamp + 1;
    let snapshot: Vec<LeaderEntry> = density
        .tracks()
        .iter()
        .filter_map(|t| t.density.best().map(|c| LeaderEntry::new(t.label, c.mean, t.existence, map)))
        .collect();
    let ctx = |ego: Option<Label>| PredictionContext {
        road_map: map,
        snapshot: &snapshot,
        ego,
        idm: config.idm,
        dt: config.dt,
        noise: config.process_noise,
        params: &config.prediction,
    };

    let survivors: Vec<(BernoulliTrack, AdaptationStats)> = density
        .tracks()
        .par_iter()
        .map(|t| {
            let (mixture, stats) = predict_mixture(&t.density, &ctx(Some(t.label)), kind, config)?;
            Ok((BernoulliTrack::new(t.label, config.survival_prob * t.existence, mixture), stats))
        })
        .collect::<Result<_>>()?;
    let born: Vec<(BernoulliTrack, AdaptationStats)> = births
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            let index = u32::try_from(i).map_err(|_| Error::param("birth", "too many births in one step"))?;
            let (mixture, stats) = predict_mixture(&b.density, &ctx(None), kind, config)?;
            Ok((BernoulliTrack::new(Label::new(k, index), b.existence, mixture), stats))
        })
        .collect::<Result<_>>()?;

    let mut out = LmbDensity::new(k);
    let mut stats = AdaptationStats::default();
    for (t, s) in survivors.into_iter().chain(born) {
        out.insert(t)?;
        stats += s;
    }
    Ok((out, stats))
}

/// Tracks with `r > threshold`, reported by their highest-weight component.
pub fn extract(density: &LmbDensity, threshold: f64) -> Vec<Estimate> {
    density
        .tracks()
        .iter()
        .filter(|t| t.existence > threshold)
        .filter_map(|t| {
            t.density.best().map(|c| Estimate {
                label: t.label,
                existence: t.existence,
                state: c.mean,
                covariance: c.covariance,
            })
        })
        .collect()
}

/// Removes tracks with `r < threshold`.
pub fn prune(density: &LmbDensity, threshold: f64) -> LmbDensity {
    let mut out = density.clone();
    out.retain(|t| t.existence >= threshold);
    out
}

/// Serializable filter state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub density: LmbDensity,
    pub pending: Vec<PendingBirth>,
    pub started: bool,
}

/// Filter instance driving predict, update, prune and extract per step.
#[derive(Clone, Debug)]
pub struct LmbFilter {
    config: FilterConfig,
    map: Option<Arc<RoadMap>>,
    sensors: Vec<SensorModel>,
    kind: PredictorKind,
    density: LmbDensity,
    pending: Vec<PendingBirth>,
    started: bool,
    stats: AdaptationStats,
}

impl LmbFilter {
    pub fn new(config: FilterConfig, map: Option<Arc<RoadMap>>, sensors: Vec<SensorModel>) -> Result<Self> {
        Self::with_kind(config, map, sensors, PredictorKind::Adapted)
    }

    pub fn with_kind(
        config: FilterConfig,
        map: Option<Arc<RoadMap>>,
        sensors: Vec<SensorModel>,
        kind: PredictorKind,
    ) -> Result<Self> {
        config.validate()?;
        for (i, s) in sensors.iter().enumerate() {
            s.validate()?;
            if sensors[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::param("sensors", format!("duplicate sensor id {}", s.id)));
            }
        }
        Ok(Self {
            config,
            map,
            sensors,
            kind,
            density: LmbDensity::new(0),
            pending: Vec::new(),
            started: false,
            stats: AdaptationStats::default(),
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn density(&self) -> &LmbDensity {
        &self.density
    }

    pub fn stats(&self) -> AdaptationStats {
        self.stats
    }

    fn births(&self) -> Vec<PendingBirth> {
        match self.config.birth.mode {
            BirthMode::StaticRegions => self
                .config
                .birth
                .locations
                .iter()
                .map(|l| PendingBirth {
                    existence: l.existence,
                    density: GaussianMixture::single(l.mean, l.covariance),
                })
                .collect(),
            BirthMode::MeasurementDriven => self.pending.clone(),
        }
    }

    /// Runs one recursion for step `timestamp`. The first call only anchors the
    /// time axis; later calls must advance it by exactly one step. Scans are
    /// applied in `(timestamp, sensor_id)` order.
    pub fn step(&mut self, timestamp: u64, scans: &[MeasurementScan]) -> Result<Vec<Estimate>> {
        if self.started {
            if timestamp != self.density.timestamp + 1 {
                return Err(Error::param(
                    "timestamp",
                    format!("expected step {}, got {timestamp}", self.density.timestamp + 1),
                ));
            }
            let births = self.births();
            let (predicted, stats) = predict(&self.density, &births, &self.config, self.map.as_deref(), self.kind)?;
            self.density = predicted;
            self.stats += stats;
        } else {
            // Anchor: the first birth set at `timestamp` is added unpredicted.
            self.started = true;
            let mut density = LmbDensity::new(timestamp);
            for (i, b) in self.births().into_iter().enumerate() {
                density.insert(BernoulliTrack::new(Label::new(timestamp, i as u32), b.existence, b.density))?;
            }
            self.density = density;
        }
        self.pending.clear();

        let mut ordered: Vec<&MeasurementScan> = scans.iter().collect();
        ordered.sort_by_key(|s| (s.timestamp, s.sensor_id));
        for scan in ordered {
            if scan.timestamp != timestamp {
                return Err(Error::param("scan.timestamp", format!("scan at {} fed at step {timestamp}", scan.timestamp)));
            }
            let sensor = self
                .sensors
                .iter()
                .find(|s| s.id == scan.sensor_id)
                .ok_or_else(|| Error::param("scan.sensor_id", format!("unknown sensor {}", scan.sensor_id)))?;
            let outcome = update(&self.density, scan, sensor, &self.config)?;
            self.density = outcome.density;
            if sensor.spawns_births && self.config.birth.mode == BirthMode::MeasurementDriven {
                let birth = &self.config.birth;
                for (z, r_u) in scan.measurements.iter().zip(&outcome.association) {
                    let free = 1.0 - r_u;
                    if free > birth.min_unassociated {
                        let comps = birth
                            .components_at(z, &sensor.measurement_noise)
                            .into_iter()
                            .map(|(w, m, p)| GaussianComponent::new(w, m, p))
                            .collect();
                        self.pending.push(PendingBirth {
                            existence: birth.existence * free,
                            density: GaussianMixture::new(comps),
                        });
                    }
                }
            }
        }

        for track in self.density.tracks_mut() {
            track.density.components.iter_mut().for_each(GaussianComponent::make_forward);
        }
        self.density = prune(&self.density, self.config.prune_threshold);
        Ok(extract(&self.density, self.config.extraction_threshold))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { density: self.density.clone(), pending: self.pending.clone(), started: self.started }
    }

    pub fn restore(&mut self, checkpoint: Checkpoint) {
        self.density = checkpoint.density;
        self.pending = checkpoint.pending;
        self.started = checkpoint.started;
    }

    pub fn checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.checkpoint())?)
    }
}
