//! GM-LMB measurement update for position measurements.
//!
//! Tracks that share gated measurements form a group; each group's association
//! hypotheses are ranked with Murty's algorithm and the weighted hypotheses are
//! collapsed back to one Bernoulli component per label.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SMatrix};

use crate::angle::wrap_angle;
use crate::assignment::murty_k_best;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, symmetrize};
use crate::lmb::{
    BernoulliTrack, GaussianComponent, GaussianMixture, LmbDensity, Matrix2, Matrix5, StateVector, Vector2, Vector5,
    HEADING,
};

use super::config::{FilterConfig, MeasurementScan, SensorModel};

type Matrix52 = SMatrix<f64, 5, 2>;

const MAX_DETECTION_MASS: f64 = 1.0 - 1e-12;

/// Unscented prediction of `h(x) = (x, y)` for one component, with the Kalman
/// quantities needed to update it against any measurement.
#[derive(Clone, Debug)]
pub struct MeasurementPrediction {
    pub z_hat: Vector2,
    pub innovation_cov: Matrix2,
    pub gain: Matrix52,
    pub posterior_cov: Matrix5,
    s_inv: Matrix2,
    log_norm: f64,
}

impl MeasurementPrediction {
    pub fn new(component: &GaussianComponent, noise: &Matrix2, kappa: f64) -> Result<Self> {
        const N: usize = 5;
        let spread = N as f64 + kappa;
        if !(spread > 0.0) {
            return Err(Error::param("kappa", "n + kappa must be positive"));
        }
        let root = cholesky_with_jitter(&component.covariance, 1e-9).ok_or(Error::DegenerateCovariance)? * spread.sqrt();
        let m = component.mean.to_vector();
        let w0 = kappa / spread;
        let wi = 1.0 / (2.0 * spread);

        // Sigma points are symmetric about the mean, so the deviations are +/- columns.
        let mut z_hat = m.fixed_rows::<2>(0).into_owned();
        let mut points = Vec::with_capacity(2 * N);
        for i in 0..N {
            let c = root.column(i).into_owned();
            points.push(c);
            points.push(-c);
        }
        let mut z_mean = z_hat * w0;
        for d in &points {
            z_mean += (z_hat + d.fixed_rows::<2>(0)) * wi;
        }
        z_hat = z_mean;

        let mut s = *noise;
        let mut cross = Matrix52::zeros();
        let d0 = m.fixed_rows::<2>(0) - z_hat;
        s += d0 * d0.transpose() * w0;
        for d in &points {
            let dz = m.fixed_rows::<2>(0) + d.fixed_rows::<2>(0) - z_hat;
            s += dz * dz.transpose() * wi;
            cross += d * dz.transpose() * wi;
        }
        symmetrize(&mut s);
        let s_inv = s.try_inverse().ok_or(Error::SingularCovariance)?;
        let det = s.determinant();
        if !(det > 0.0) {
            return Err(Error::SingularCovariance);
        }
        let gain = cross * s_inv;
        let mut posterior_cov = component.covariance - gain * s * gain.transpose();
        symmetrize(&mut posterior_cov);
        Ok(Self { z_hat, innovation_cov: s, gain, posterior_cov, s_inv, log_norm: -(2.0 * PI).ln() - 0.5 * det.ln() })
    }

    pub fn distance_sq(&self, z: &Vector2) -> f64 {
        let d = z - self.z_hat;
        (d.transpose() * self.s_inv * d)[0]
    }

    pub fn likelihood(&self, z: &Vector2) -> f64 {
        (self.log_norm - 0.5 * self.distance_sq(z)).exp()
    }

    pub fn updated_mean(&self, mean: &StateVector, z: &Vector2) -> StateVector {
        let mut m: Vector5 = mean.to_vector() + self.gain * (z - self.z_hat);
        m[HEADING] = wrap_angle(m[HEADING]);
        StateVector::from_vector(&m)
    }
}

/// Posterior density plus the probability that each measurement was assigned
/// to an existing track.
#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    pub density: LmbDensity,
    /// `r_U` per measurement, in scan order.
    pub association: Vec<f64>,
    pub groups: usize,
    pub hypotheses: usize,
}

struct TrackTerms {
    preds: Vec<MeasurementPrediction>,
    detection: f64,
    /// Per measurement: mixture likelihood, or `None` outside the gate.
    likelihood: Vec<Option<f64>>,
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let next = parent[c];
        parent[c] = r;
        c = next;
    }
    r
}

/// Standard GM-LMB update of `density` with one sensor scan.
pub fn update(
    density: &LmbDensity,
    scan: &MeasurementScan,
    sensor: &SensorModel,
    config: &FilterConfig,
) -> Result<UpdateOutcome> {
    if scan.timestamp < density.timestamp {
        return Err(Error::param(
            "scan.timestamp",
            format!("scan at {} precedes density at {}", scan.timestamp, density.timestamp),
        ));
    }
    let tracks = density.tracks();
    let zs = &scan.measurements;
    let clutter = if sensor.clutter_intensity > 0.0 { sensor.clutter_intensity } else { f64::MIN_POSITIVE };

    let mut terms = Vec::with_capacity(tracks.len());
    for t in tracks {
        let preds = t
            .density
            .components
            .iter()
            .map(|c| MeasurementPrediction::new(c, &sensor.measurement_noise, config.prediction.kappa))
            .collect::<Result<Vec<_>>>()?;
        let position = t.density.best().map(|c| c.mean.position()).unwrap_or_default();
        let detection = sensor.detection_prob_at(&position);
        let likelihood = zs
            .iter()
            .map(|z| {
                if detection <= 0.0 || !preds.iter().any(|p| p.distance_sq(z) <= config.gate) {
                    return None;
                }
                let l: f64 = t.density.components.iter().zip(&preds).map(|(c, p)| c.weight * p.likelihood(z)).sum();
                (l > 0.0).then_some(l)
            })
            .collect();
        terms.push(TrackTerms { preds, detection, likelihood });
    }

    // Groups: tracks linked through shared gated measurements.
    let mut parent: Vec<usize> = (0..tracks.len()).collect();
    for j in 0..zs.len() {
        let mut first = None;
        for (i, t) in terms.iter().enumerate() {
            if t.likelihood[j].is_some() {
                match first {
                    None => first = Some(i),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, i));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_group = vec![usize::MAX; tracks.len()];
    for i in 0..tracks.len() {
        let r = find(&mut parent, i);
        if root_group[r] == usize::MAX {
            root_group[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_group[r]].push(i);
    }

    let mut association = vec![0.0; zs.len()];
    let mut posterior = LmbDensity::new(scan.timestamp);
    let mut hypothesis_count = 0;
    let mut updated: Vec<Option<BernoulliTrack>> = vec![None; tracks.len()];

    for group in &groups {
        let meas: Vec<usize> =
            (0..zs.len()).filter(|&j| group.iter().any(|&i| terms[i].likelihood[j].is_some())).collect();
        let n = group.len();
        let m = meas.len();
        let mut cost = DMatrix::from_element(n, m + n, f64::INFINITY);
        for (row, &i) in group.iter().enumerate() {
            let r = tracks[i].existence;
            let rd = (r * terms[i].detection).min(MAX_DETECTION_MASS);
            for (col, &j) in meas.iter().enumerate() {
                if let Some(l) = terms[i].likelihood[j] {
                    cost[(row, col)] = -(rd * l / clutter).ln();
                }
            }
            cost[(row, m + row)] = -(1.0 - rd).ln();
        }
        let ranked = murty_k_best(&cost, config.max_hypotheses);
        hypothesis_count += ranked.len();
        let best = ranked.first().map(|a| a.cost).unwrap_or(0.0);
        let weights: Vec<f64> = ranked.iter().map(|a| (best - a.cost).exp()).collect();
        let total: f64 = weights.iter().sum();

        // miss[row] and assigned[row][col] are normalized hypothesis masses.
        let mut miss = vec![0.0; n];
        let mut assigned = vec![vec![0.0; m]; n];
        for (a, w) in ranked.iter().zip(&weights) {
            let w = w / total;
            for (row, &col) in a.cols.iter().enumerate() {
                if col < m {
                    assigned[row][col] += w;
                    association[meas[col]] += w;
                } else {
                    miss[row] += w;
                }
            }
        }

        for (row, &i) in group.iter().enumerate() {
            let track = &tracks[i];
            let r = track.existence;
            let pd = terms[i].detection;
            let rd = (r * pd).min(MAX_DETECTION_MASS);
            let q = r * (1.0 - pd) / (1.0 - rd);
            let miss_mass = miss[row] * q;
            let detect_mass: f64 = assigned[row].iter().sum();
            let existence = (miss_mass + detect_mass).clamp(0.0, 1.0);

            let density = if detect_mass <= 0.0 {
                track.density.clone()
            } else {
                let mut comps = Vec::new();
                if miss_mass > 0.0 {
                    comps.extend(track.density.components.iter().map(|c| GaussianComponent {
                        weight: c.weight * miss_mass,
                        ..c.clone()
                    }));
                }
                for (col, &j) in meas.iter().enumerate() {
                    let mass = assigned[row][col];
                    let Some(l) = terms[i].likelihood[j].filter(|_| mass > 0.0) else {
                        continue;
                    };
                    let z = &zs[j];
                    for (c, p) in track.density.components.iter().zip(&terms[i].preds) {
                        let w = mass * c.weight * p.likelihood(z) / l;
                        if w > 0.0 {
                            comps.push(GaussianComponent::new(w, p.updated_mean(&c.mean, z), p.posterior_cov));
                        }
                    }
                }
                GaussianMixture::new(comps).reduce(
                    config.prediction.min_component_weight,
                    config.prediction.merge_distance,
                    config.prediction.component_cap,
                )?
            };
            updated[i] = Some(BernoulliTrack { label: track.label, existence, density });
        }
    }

    for t in updated.into_iter().flatten() {
        posterior.insert(t)?;
    }
    for a in &mut association {
        *a = a.clamp(0.0, 1.0);
    }
    Ok(UpdateOutcome { density: posterior, association, groups: groups.len(), hypotheses: hypothesis_count })
}
