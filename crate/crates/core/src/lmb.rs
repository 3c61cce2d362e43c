//! Labeled multi-Bernoulli densities and their Gaussian-mixture spatial parts.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Cholesky, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::{Error, Result};
use crate::linalg::symmetrize;

pub type Vector2 = SVector<f64, 2>;
pub type Vector5 = SVector<f64, 5>;
pub type Matrix2 = SMatrix<f64, 2, 2>;
pub type Matrix5 = SMatrix<f64, 5, 5>;

/// Index of the heading entry in the CTRV state vector.
pub const HEADING: usize = 3;

/// CTRV state: position (m), speed (m/s), heading (rad), turn rate (rad/s).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub omega: f64,
}

impl StateVector {
    pub fn new(x: f64, y: f64, v: f64, phi: f64, omega: f64) -> Self {
        Self { x, y, v, phi: wrap_angle(phi), omega }
    }

    pub fn from_vector(v: &Vector5) -> Self {
        Self { x: v[0], y: v[1], v: v[2], phi: v[3], omega: v[4] }
    }

    pub fn to_vector(&self) -> Vector5 {
        Vector5::new(self.x, self.y, self.v, self.phi, self.omega)
    }

    pub fn position(&self) -> Vector2 {
        Vector2::new(self.x, self.y)
    }

    /// Difference `self - other` with the heading residual wrapped.
    pub fn residual(&self, other: &StateVector) -> Vector5 {
        Vector5::new(
            self.x - other.x,
            self.y - other.y,
            self.v - other.v,
            wrap_angle(self.phi - other.phi),
            self.omega - other.omega,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: StateVector,
    pub covariance: Matrix5,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: StateVector, covariance: Matrix5) -> Self {
        Self { weight, mean, covariance }
    }

    /// Gaussian density of this component at `state` (weight not applied).
    pub fn density(&self, state: &StateVector) -> Result<f64> {
        let chol = regularized_cholesky(&self.covariance)?;
        let d = state.residual(&self.mean);
        let maha = chol.solve(&d).dot(&d);
        let det: f64 = chol.l().diagonal().iter().map(|x| x * x).product();
        Ok((-0.5 * maha).exp() / ((2.0 * PI).powi(5) * det).sqrt())
    }

    /// Rewrites a component whose mean speed is negative as the equivalent
    /// forward-moving one. CTRV positions and position measurements are
    /// invariant under `(v, phi, omega) -> (-v, phi + pi, omega)`.
    pub fn make_forward(&mut self) {
        if self.mean.v >= 0.0 {
            return;
        }
        self.mean.v = -self.mean.v;
        self.mean.phi = wrap_angle(self.mean.phi + PI);
        for i in 0..5 {
            if i != 2 {
                self.covariance[(2, i)] = -self.covariance[(2, i)];
                self.covariance[(i, 2)] = -self.covariance[(i, 2)];
            }
        }
    }

    /// Squared Mahalanobis distance of `state` under this component.
    pub fn mahalanobis_sq(&self, state: &StateVector) -> Result<f64> {
        let chol = regularized_cholesky(&self.covariance)?;
        let d = state.residual(&self.mean);
        Ok(chol.solve(&d).dot(&d))
    }
}

fn regularized_cholesky(p: &Matrix5) -> Result<Cholesky<f64, nalgebra::Const<5>>> {
    Cholesky::new(*p)
        .or_else(|| Cholesky::new(p + Matrix5::identity() * 1e-9))
        .ok_or(Error::SingularCovariance)
}

/// Weighted list of Gaussian components; weights sum to one for a live track.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Self {
        Self { components }
    }

    pub fn single(mean: StateVector, covariance: Matrix5) -> Self {
        Self { components: vec![GaussianComponent::new(1.0, mean, covariance)] }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Highest-weight component; ties go to the earliest.
    pub fn best(&self) -> Option<&GaussianComponent> {
        self.components.iter().fold(None, |best: Option<&GaussianComponent>, c| match best {
            Some(b) if b.weight >= c.weight => Some(b),
            _ => Some(c),
        })
    }

    /// Drops tiny components, merges near-duplicates, keeps at most `cap`
    /// components and renormalizes.
    pub fn reduce(&self, min_weight: f64, merge_distance: f64, cap: usize) -> Result<Self> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return Err(Error::DegenerateMixture);
        }
        let kept: Vec<_> = self
            .components
            .iter()
            .filter(|c| c.weight / total >= min_weight)
            .cloned()
            .collect();
        let kept = if kept.is_empty() {
            vec![self.best().cloned().ok_or(Error::DegenerateMixture)?]
        } else {
            kept
        };
        let mut merged = merge_components(kept, merge_distance);
        merged.truncate(cap.max(1));
        normalize_mixture(&GaussianMixture::new(merged))
    }
}

/// Greedy moment-matching merge. Output is sorted by decreasing weight.
fn merge_components(mut comps: Vec<GaussianComponent>, merge_distance: f64) -> Vec<GaussianComponent> {
    sort_by_weight(&mut comps);
    if merge_distance <= 0.0 {
        return comps;
    }
    let threshold_sq = merge_distance * merge_distance;
    let mut used = vec![false; comps.len()];
    let mut out = Vec::with_capacity(comps.len());
    for i in 0..comps.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let lead = &comps[i];
        let Ok(chol) = regularized_cholesky(&lead.covariance) else {
            out.push(lead.clone());
            continue;
        };
        let mut cluster = vec![i];
        for j in (i + 1)..comps.len() {
            if used[j] {
                continue;
            }
            let d = comps[j].mean.residual(&lead.mean);
            if chol.solve(&d).dot(&d) < threshold_sq {
                used[j] = true;
                cluster.push(j);
            }
        }
        if cluster.len() == 1 {
            out.push(lead.clone());
            continue;
        }
        let weight: f64 = cluster.iter().map(|&k| comps[k].weight).sum();
        let members: Vec<(f64, StateVector)> =
            cluster.iter().map(|&k| (comps[k].weight / weight, comps[k].mean)).collect();
        let mean = weighted_mean(&members);
        let mut cov = Matrix5::zeros();
        for &k in &cluster {
            let d = comps[k].mean.residual(&mean);
            cov += (comps[k].covariance + d * d.transpose()) * (comps[k].weight / weight);
        }
        symmetrize(&mut cov);
        out.push(GaussianComponent::new(weight, mean, cov));
    }
    sort_by_weight(&mut out);
    out
}

fn sort_by_weight(comps: &mut [GaussianComponent]) {
    comps.sort_by(|a, b| b.weight.total_cmp(&a.weight));
}

/// Weighted mean of states; heading is the circular mean.
pub fn weighted_mean(members: &[(f64, StateVector)]) -> StateVector {
    let mut acc = StateVector::default();
    let (mut s, mut c) = (0.0, 0.0);
    for (w, m) in members {
        acc.x += w * m.x;
        acc.y += w * m.y;
        acc.v += w * m.v;
        acc.omega += w * m.omega;
        s += w * m.phi.sin();
        c += w * m.phi.cos();
    }
    acc.phi = wrap_angle(s.atan2(c));
    acc
}

/// Scales weights to sum to one, preserving order.
pub fn normalize_mixture(mixture: &GaussianMixture) -> Result<GaussianMixture> {
    let total = mixture.total_weight();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateMixture);
    }
    let components = mixture
        .components
        .iter()
        .map(|c| GaussianComponent { weight: c.weight / total, ..c.clone() })
        .collect();
    Ok(GaussianMixture { components })
}

/// Mixture density `sum_j w_j N(state; m_j, P_j)` with wrapped heading residuals.
pub fn evaluate_mixture(mixture: &GaussianMixture, state: &StateVector) -> Result<f64> {
    mixture
        .components
        .iter()
        .map(|c| c.density(state).map(|d| c.weight * d))
        .sum()
}

/// Track label: birth step and ordinal within that step's births.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub birth_time: u64,
    pub birth_index: u32,
}

impl Label {
    pub fn new(birth_time: u64, birth_index: u32) -> Self {
        Self { birth_time, birth_index }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.birth_time, self.birth_index)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernoulliTrack {
    pub label: Label,
    pub existence: f64,
    pub density: GaussianMixture,
}

impl BernoulliTrack {
    pub fn new(label: Label, existence: f64, density: GaussianMixture) -> Self {
        Self { label, existence: existence.clamp(0.0, 1.0), density }
    }
}

/// Labeled multi-Bernoulli parameter set `{(r, p)}`, kept sorted by label.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LmbDensity {
    pub timestamp: u64,
    tracks: Vec<BernoulliTrack>,
}

impl LmbDensity {
    pub fn new(timestamp: u64) -> Self {
        Self { timestamp, tracks: Vec::new() }
    }

    pub fn from_tracks(timestamp: u64, tracks: Vec<BernoulliTrack>) -> Result<Self> {
        let mut density = Self::new(timestamp);
        for t in tracks {
            density.insert(t)?;
        }
        Ok(density)
    }

    pub fn insert(&mut self, track: BernoulliTrack) -> Result<()> {
        match self.tracks.binary_search_by(|t| t.label.cmp(&track.label)) {
            Ok(_) => Err(Error::DuplicateLabel(track.label)),
            Err(pos) => {
                self.tracks.insert(pos, track);
                Ok(())
            }
        }
    }

    pub fn tracks(&self) -> &[BernoulliTrack] {
        &self.tracks
    }

    pub fn tracks_mut(&mut self) -> &mut [BernoulliTrack] {
        &mut self.tracks
    }

    pub fn get(&self, label: &Label) -> Option<&BernoulliTrack> {
        self.tracks
            .binary_search_by(|t| t.label.cmp(label))
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tracks.iter().map(|t| t.label)
    }

    pub fn retain(&mut self, f: impl FnMut(&BernoulliTrack) -> bool) {
        self.tracks.retain(f);
    }

    pub fn into_tracks(self) -> Vec<BernoulliTrack> {
        self.tracks
    }
}

/// Probability that exactly the labels in `labels` exist:
/// `prod_{i not in L} (1 - r_i) * prod_{l in L} r_l`.
///
/// Evaluated in product form, which equals the ratio form
/// `prod_i (1 - r_i) * prod_{l in L} r_l / (1 - r_l)` without dividing by `1 - r`,
/// so `r = 1` needs no special casing. Labels absent from the density give 0.
pub fn lmb_set_weight(density: &LmbDensity, labels: &BTreeSet<Label>) -> f64 {
    if labels.iter().any(|l| density.get(l).is_none()) {
        return 0.0;
    }
    density
        .tracks()
        .iter()
        .map(|t| {
            if labels.contains(&t.label) {
                t.existence
            } else {
                1.0 - t.existence
            }
        })
        .product()
}
