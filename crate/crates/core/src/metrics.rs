//! Evaluation against ground truth: per-component RMSE of the reference vehicle,
//! the label-error series and OSPA.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::assignment::solve;
use crate::error::{Error, Result};
use crate::filter::Estimate;
use crate::lmb::{Label, StateVector, Vector2};
use crate::sim::{GroundTruthLog, TruthStep};

/// Default estimate-to-truth matching gate (m).
pub const DEFAULT_MATCH_GATE: f64 = 5.0;

/// Extracted tracks at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackStep {
    pub step: u64,
    pub estimates: Vec<Estimate>,
}

/// Per-component RMSE; angles in degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentErrors {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub phi: f64,
    pub omega: f64,
}

impl ComponentErrors {
    pub const NAMES: [&'static str; 5] = ["x [m]", "y [m]", "v [m/s]", "phi [deg]", "omega [deg/s]"];

    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.v, self.phi, self.omega]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { x: a[0], y: a[1], v: a[2], phi: a[3], omega: a[4] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse: ComponentErrors,
    pub matched_steps: usize,
    pub unmatched_steps: usize,
}

/// Signed estimation error `estimate - truth` with wrapped heading.
pub fn state_error(estimate: &StateVector, truth: &StateVector) -> [f64; 5] {
    [
        estimate.x - truth.x,
        estimate.y - truth.y,
        estimate.v - truth.v,
        wrap_angle(estimate.phi - truth.phi),
        estimate.omega - truth.omega,
    ]
}

fn truth_by_step(truth: &GroundTruthLog) -> BTreeMap<u64, &TruthStep> {
    truth.iter().map(|t| (t.step, t)).collect()
}

/// Estimate nearest to the reference vehicle within `gate`, per truth step in
/// which the reference vehicle exists.
pub fn match_reference<'a>(
    tracks: &'a [TrackStep],
    truth: &GroundTruthLog,
    reference: u32,
    gate: f64,
) -> Vec<(u64, StateVector, Option<&'a Estimate>)> {
    let by_step: BTreeMap<u64, &TrackStep> = tracks.iter().map(|t| (t.step, t)).collect();
    truth_by_step(truth)
        .into_iter()
        .filter_map(|(step, t)| {
            let reference_state = *t.get(reference)?;
            let best = by_step.get(&step).and_then(|ts| {
                ts.estimates
                    .iter()
                    .map(|e| ((e.state.position() - reference_state.position()).norm(), e))
                    .filter(|(d, _)| *d <= gate)
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .map(|(_, e)| e)
            });
            Some((step, reference_state, best))
        })
        .collect()
}

/// Per-step error traces of the matched reference track (`None` when unmatched).
pub fn error_trace(
    tracks: &[TrackStep],
    truth: &GroundTruthLog,
    reference: u32,
    gate: f64,
) -> Vec<(u64, Option<[f64; 5]>)> {
    match_reference(tracks, truth, reference, gate)
        .into_iter()
        .map(|(step, t, e)| (step, e.map(|e| state_error(&e.state, &t))))
        .collect()
}

/// RMSE over steps where an estimate matched the reference vehicle.
pub fn rmse_report(tracks: &[TrackStep], truth: &GroundTruthLog, reference: u32, gate: f64) -> Result<RmseReport> {
    let trace = error_trace(tracks, truth, reference, gate);
    let mut sum = [0.0; 5];
    let mut matched = 0;
    for e in trace.iter().filter_map(|(_, e)| e.as_ref()) {
        for (s, v) in sum.iter_mut().zip(e) {
            *s += v * v;
        }
        matched += 1;
    }
    if matched == 0 {
        return Err(Error::UndefinedRmse);
    }
    let mut rmse = sum.map(|s| (s / matched as f64).sqrt());
    rmse[3] = rmse[3].to_degrees();
    rmse[4] = rmse[4].to_degrees();
    Ok(RmseReport { rmse: ComponentErrors::from_array(rmse), matched_steps: matched, unmatched_steps: trace.len() - matched })
}

/// Per-step label error: 0 when the reference vehicle is unmatched, otherwise the
/// number of distinct labels matched to it so far.
pub fn label_error(tracks: &[TrackStep], truth: &GroundTruthLog, reference: u32, gate: f64) -> Vec<u32> {
    let mut seen: BTreeSet<Label> = BTreeSet::new();
    match_reference(tracks, truth, reference, gate)
        .into_iter()
        .map(|(_, _, e)| match e {
            Some(e) => {
                seen.insert(e.label);
                seen.len() as u32
            }
            None => 0,
        })
        .collect()
}

/// OSPA distance of order `p` with cutoff `c` between two position sets.
pub fn ospa(estimates: &[Vector2], truth: &[Vector2], c: f64, p: f64) -> Result<f64> {
    if !(c > 0.0) || !(p >= 1.0) {
        return Err(Error::param("ospa", "need c > 0 and p >= 1"));
    }
    let (small, large) = if estimates.len() <= truth.len() { (estimates, truth) } else { (truth, estimates) };
    let n = large.len();
    if n == 0 {
        return Ok(0.0);
    }
    let m = small.len();
    let cost = DMatrix::from_fn(m, n, |i, j| (small[i] - large[j]).norm().min(c).powf(p));
    let assigned = solve(&cost).map_or(0.0, |a| a.cost);
    let total = assigned + c.powf(p) * (n - m) as f64;
    Ok((total / n as f64).powf(1.0 / p).min(c))
}

/// OSPA per truth step between all extracted positions and all true positions.
pub fn ospa_series(tracks: &[TrackStep], truth: &GroundTruthLog, c: f64, p: f64) -> Result<Vec<f64>> {
    let by_step: BTreeMap<u64, &TrackStep> = tracks.iter().map(|t| (t.step, t)).collect();
    truth
        .iter()
        .map(|t| {
            let est: Vec<Vector2> =
                by_step.get(&t.step).map(|s| s.estimates.iter().map(|e| e.state.position()).collect()).unwrap_or_default();
            let tru: Vec<Vector2> = t.vehicles.iter().map(|(_, s)| s.position()).collect();
            ospa(&est, &tru, c, p)
        })
        .collect()
}

/// Evaluation of one filter run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rmse: Option<RmseReport>,
    pub label_error_series: Vec<u32>,
    pub ospa_series: Vec<f64>,
}

impl EvaluationReport {
    pub fn evaluate(
        tracks: &[TrackStep],
        truth: &GroundTruthLog,
        reference: u32,
        gate: f64,
        ospa_cutoff: f64,
        ospa_order: f64,
    ) -> Result<Self> {
        let rmse = match rmse_report(tracks, truth, reference, gate) {
            Ok(r) => Some(r),
            Err(Error::UndefinedRmse) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            rmse,
            label_error_series: label_error(tracks, truth, reference, gate),
            ospa_series: ospa_series(tracks, truth, ospa_cutoff, ospa_order)?,
        })
    }

    pub fn final_label_error(&self) -> u32 {
        self.label_error_series.last().copied().unwrap_or(0)
    }

    pub fn mean_ospa(&self) -> f64 {
        if self.ospa_series.is_empty() {
            0.0
        } else {
            self.ospa_series.iter().sum::<f64>() / self.ospa_series.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Sample mean and (n - 1) standard deviation; zero spread for fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

/// Monte-Carlo aggregate of one filter variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: String,
    pub replicates: usize,
    /// Replicates in which the reference vehicle was never matched.
    pub untracked_replicates: usize,
    pub rmse: [MeanStd; 5],
    pub final_label_error: MeanStd,
    pub mean_ospa: MeanStd,
    /// Per-replicate RMSE, `None` when undefined.
    pub replicate_rmse: Vec<Option<ComponentErrors>>,
    pub replicate_final_label_error: Vec<u32>,
}

impl VariantSummary {
    pub fn from_reports(variant: &str, reports: &[EvaluationReport]) -> Self {
        let defined: Vec<[f64; 5]> = reports.iter().filter_map(|r| r.rmse.map(|x| x.rmse.to_array())).collect();
        let rmse = std::array::from_fn(|i| MeanStd::of(&defined.iter().map(|a| a[i]).collect::<Vec<_>>()));
        let finals: Vec<u32> = reports.iter().map(EvaluationReport::final_label_error).collect();
        Self {
            variant: variant.to_string(),
            replicates: reports.len(),
            untracked_replicates: reports.len() - defined.len(),
            rmse,
            final_label_error: MeanStd::of(&finals.iter().map(|&v| f64::from(v)).collect::<Vec<_>>()),
            mean_ospa: MeanStd::of(&reports.iter().map(EvaluationReport::mean_ospa).collect::<Vec<_>>()),
            replicate_rmse: reports.iter().map(|r| r.rmse.map(|x| x.rmse)).collect(),
            replicate_final_label_error: finals,
        }
    }
}

/// `100 (baseline - candidate) / baseline`; zero when the baseline is zero.
pub fn improvement_pct(baseline: f64, candidate: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - candidate) / baseline
    }
}

/// Candidate-versus-baseline comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub candidate: String,
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub candidate: MeanStd,
    pub baseline: MeanStd,
    pub improvement_pct: f64,
}

impl Comparison {
    pub fn new(candidate: &VariantSummary, baseline: &VariantSummary) -> Self {
        let mut rows: Vec<ComparisonRow> = ComponentErrors::NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| ComparisonRow {
                quantity: (*name).to_string(),
                candidate: candidate.rmse[i],
                baseline: baseline.rmse[i],
                improvement_pct: improvement_pct(baseline.rmse[i].mean, candidate.rmse[i].mean),
            })
            .collect();
        rows.push(ComparisonRow {
            quantity: "final label error".into(),
            candidate: candidate.final_label_error,
            baseline: baseline.final_label_error,
            improvement_pct: improvement_pct(baseline.final_label_error.mean, candidate.final_label_error.mean),
        });
        rows.push(ComparisonRow {
            quantity: "mean OSPA [m]".into(),
            candidate: candidate.mean_ospa,
            baseline: baseline.mean_ospa,
            improvement_pct: improvement_pct(baseline.mean_ospa.mean, candidate.mean_ospa.mean),
        });
        Self { candidate: candidate.variant.clone(), baseline: baseline.variant.clone(), rows }
    }

    /// Markdown table with columns Interacting LMB, Standard LMB, Improvement %.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| RMSE | Interacting LMB ({}) | Standard LMB ({}) | Improvement % |", self.candidate, self.baseline);
        let _ = writeln!(out, "|---|---:|---:|---:|");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {:.4} ± {:.4} | {:.4} ± {:.4} | {:.2} |",
                r.quantity, r.candidate.mean, r.candidate.std, r.baseline.mean, r.baseline.std, r.improvement_pct
            );
        }
        out
    }
}
