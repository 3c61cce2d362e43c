//! Monte-Carlo batch runner behind `track run`.
//!
//! Each replicate simulates its scenario once; every filter variant then consumes
//! the identical scan stream.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Error;
use crate::filter::{FilterConfig, LmbFilter, PredictorKind};
use crate::metrics::{Comparison, EvaluationReport, TrackStep, VariantSummary, DEFAULT_MATCH_GATE};
use crate::sim::{
    build_scenario, replicate_rng, simulate_with, write_scans_csv, write_truth_csv, PreparedScenario, Scenario,
    ScenarioParams, SimulationOutput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Standard UKF-CTRV prediction.
    Baseline,
    /// Both adaptations.
    Interacting,
    InteractionOnly,
    MapOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Interacting, Variant::InteractionOnly, Variant::MapOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Interacting => "interacting",
            Variant::InteractionOnly => "interaction-only",
            Variant::MapOnly => "map-only",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::param("variants", format!("unknown variant `{s}`")))
    }

    pub fn predictor(self) -> PredictorKind {
        match self {
            Variant::Baseline => PredictorKind::Standard,
            _ => PredictorKind::Adapted,
        }
    }

    /// `base` with the adaptation flags of this variant.
    pub fn configure(self, base: &FilterConfig) -> FilterConfig {
        let mut c = base.clone();
        let (interaction, map) = match self {
            Variant::Baseline => (false, false),
            Variant::Interacting => (true, true),
            Variant::InteractionOnly => (true, false),
            Variant::MapOnly => (false, true),
        };
        c.prediction.enable_interaction = interaction;
        c.prediction.enable_map = map;
        c
    }
}

/// Library scenario by name, or a scenario JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSource {
    pub name: Option<String>,
    pub file: Option<PathBuf>,
    pub params: ScenarioParams,
}

impl Default for ScenarioSource {
    fn default() -> Self {
        Self { name: Some("s-curve".into()), file: None, params: ScenarioParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MonteCarlo {
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        Self { replicates: 1, seed: 0, threads: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub match_gate: f64,
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { match_gate: DEFAULT_MATCH_GATE, ospa_cutoff: 10.0, ospa_order: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: ScenarioSource,
    pub filter: FilterConfig,
    pub variants: Vec<Variant>,
    pub monte_carlo: MonteCarlo,
    pub metrics: MetricsConfig,
    pub output: PathBuf,
    /// Write truth, scans, tracks and error traces per replicate.
    pub replicate_logs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSource::default(),
            filter: FilterConfig::default(),
            variants: vec![Variant::Baseline, Variant::Interacting],
            monte_carlo: MonteCarlo::default(),
            metrics: MetricsConfig::default(),
            output: PathBuf::from("track-output"),
            replicate_logs: true,
        }
    }
}

/// Failure of a run, classified for the process exit status.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(Error),
    #[error("scenario error: {0}")]
    Scenario(Error),
    #[error("runtime error: {0}")]
    Runtime(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Scenario(_) => 3,
            RunError::Runtime(_) => 4,
        }
    }
}

/// Sets `path` (dot separated) in a JSON object tree. `raw` is parsed as JSON
/// when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<(), Error> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::param(path, "empty key in override path"));
    }
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            return Err(Error::param(path, format!("`{key}` is not inside an object")));
        }
        node = node
            .as_object_mut()
            .map(|o| o.entry(key.to_string()).or_insert_with(|| Value::Object(Default::default())))
            .ok_or_else(|| Error::param(path, "not an object"))?;
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    let obj = node.as_object_mut().ok_or_else(|| Error::param(path, "parent is not an object"))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Recursive object merge; `patch` wins on conflicts.
pub fn merge_json(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

impl RunConfig {
    /// Defaults, then the optional JSON file, then `key.path=value` overrides.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, RunError> {
        let mut value = serde_json::to_value(RunConfig::default()).map_err(|e| RunError::Config(e.into()))?;
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| RunError::Config(e.into()))?;
            let patch: Value = serde_json::from_str(&text).map_err(|e| RunError::Config(e.into()))?;
            merge_json(&mut value, patch);
        }
        for (k, v) in overrides {
            apply_override(&mut value, k, v).map_err(RunError::Config)?;
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|e| RunError::Config(e.into()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        self.filter.validate().map_err(RunError::Config)?;
        if self.variants.is_empty() {
            return Err(RunError::Config(Error::param("variants", "at least one variant required")));
        }
        if self.monte_carlo.replicates == 0 {
            return Err(RunError::Config(Error::param("monte_carlo.replicates", "must be at least 1")));
        }
        if self.scenario.name.is_none() == self.scenario.file.is_none() {
            return Err(RunError::Config(Error::param("scenario", "give exactly one of `name` and `file`")));
        }
        Ok(())
    }

    /// Resolves and validates the scenario.
    pub fn prepare_scenario(&self) -> Result<PreparedScenario, RunError> {
        let mut scenario: Scenario = match (&self.scenario.name, &self.scenario.file) {
            (Some(name), _) => build_scenario(name, &self.scenario.params).map_err(RunError::Scenario)?,
            (None, Some(path)) => {
                let text = fs::read_to_string(path).map_err(|e| RunError::Scenario(e.into()))?;
                serde_json::from_str(&text).map_err(|e| RunError::Scenario(e.into()))?
            }
            (None, None) => return Err(RunError::Config(Error::param("scenario", "missing"))),
        };
        scenario.rng_seed = self.monte_carlo.seed;
        scenario.prepare().map_err(RunError::Scenario)
    }
}

/// Runs one filter variant over a simulated replicate.
pub fn run_variant(
    prepared: &PreparedScenario,
    sim: &SimulationOutput,
    variant: Variant,
    base: &FilterConfig,
) -> Result<Vec<TrackStep>, Error> {
    let config = FilterConfig { dt: prepared.scenario.step, ..variant.configure(base) };
    let map = Arc::new(prepared.map.map.clone());
    let mut filter = LmbFilter::with_kind(config, Some(map), prepared.scenario.sensors.clone(), variant.predictor())?;
    sim.truth
        .iter()
        .map(|t| Ok(TrackStep { step: t.step, estimates: filter.step(t.step, &sim.scans_at(t.step))? }))
        .collect()
}

/// Outputs of one replicate.
#[derive(Clone, Debug)]
pub struct ReplicateResult {
    pub index: usize,
    pub sim: SimulationOutput,
    /// Per variant in config order.
    pub tracks: Vec<Vec<TrackStep>>,
    pub reports: Vec<EvaluationReport>,
}

pub fn run_replicate(config: &RunConfig, prepared: &PreparedScenario, index: usize) -> Result<ReplicateResult, Error> {
    let sim = simulate_with(prepared, &mut replicate_rng(config.monte_carlo.seed, index as u64))?;
    let mut tracks = Vec::with_capacity(config.variants.len());
    let mut reports = Vec::with_capacity(config.variants.len());
    let m = &config.metrics;
    for &variant in &config.variants {
        let t = run_variant(prepared, &sim, variant, &config.filter)?;
        reports.push(EvaluationReport::evaluate(
            &t,
            &sim.truth,
            prepared.scenario.reference_vehicle,
            m.match_gate,
            m.ospa_cutoff,
            m.ospa_order,
        )?);
        tracks.push(t);
    }
    Ok(ReplicateResult { index, sim, tracks, reports })
}

/// Aggregate report of one variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub scenario: String,
    pub summary: VariantSummary,
    pub replicates: Vec<EvaluationReport>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub reports: Vec<VariantReport>,
    pub comparisons: Vec<Comparison>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(file, value)?;
    Ok(())
}

#[derive(Serialize)]
struct TrackRow {
    step: u64,
    label: String,
    existence: f64,
    x: f64,
    y: f64,
    v: f64,
    phi: f64,
    omega: f64,
}

#[derive(Serialize)]
struct ErrorRow {
    step: u64,
    matched: bool,
    err_x: Option<f64>,
    err_y: Option<f64>,
    err_v: Option<f64>,
    err_phi: Option<f64>,
    err_omega: Option<f64>,
    label_error: u32,
    ospa: f64,
}

fn write_replicate(dir: &Path, config: &RunConfig, prepared: &PreparedScenario, r: &ReplicateResult) -> Result<(), Error> {
    fs::create_dir_all(dir)?;
    write_truth_csv(&r.sim.truth, BufWriter::new(File::create(dir.join("truth.csv"))?))?;
    write_scans_csv(&r.sim.scans, BufWriter::new(File::create(dir.join("scans.csv"))?))?;
    for ((variant, tracks), report) in config.variants.iter().zip(&r.tracks).zip(&r.reports) {
        let mut w = csv::Writer::from_path(dir.join(format!("tracks_{}.csv", variant.name())))?;
        for step in tracks {
            for e in &step.estimates {
                let s = e.state;
                w.serialize(TrackRow {
                    step: step.step,
                    label: e.label.to_string(),
                    existence: e.existence,
                    x: s.x,
                    y: s.y,
                    v: s.v,
                    phi: s.phi,
                    omega: s.omega,
                })?;
            }
        }
        w.flush()?;
        let trace = crate::metrics::error_trace(
            tracks,
            &r.sim.truth,
            prepared.scenario.reference_vehicle,
            config.metrics.match_gate,
        );
        let mut w = csv::Writer::from_path(dir.join(format!("errors_{}.csv", variant.name())))?;
        let ospa_by_step: std::collections::BTreeMap<u64, f64> =
            r.sim.truth.iter().map(|t| t.step).zip(report.ospa_series.iter().copied()).collect();
        for ((step, err), label_error) in trace.iter().zip(&report.label_error_series) {
            let e = err.map(|e| e.map(Some)).unwrap_or([None; 5]);
            w.serialize(ErrorRow {
                step: *step,
                matched: err.is_some(),
                err_x: e[0],
                err_y: e[1],
                err_v: e[2],
                err_phi: e[3],
                err_omega: e[4],
                label_error: *label_error,
                ospa: ospa_by_step.get(step).copied().unwrap_or(0.0),
            })?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Runs all replicates and variants, writes artifacts under `config.output`.
pub fn run(config: &RunConfig) -> Result<RunOutcome, RunError> {
    let prepared = config.prepare_scenario()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.monte_carlo.threads)
        .build()
        .map_err(|e| RunError::Runtime(Error::param("monte_carlo.threads", e.to_string())))?;
    let results: Vec<ReplicateResult> = pool
        .install(|| {
            (0..config.monte_carlo.replicates)
                .into_par_iter()
                .map(|i| run_replicate(config, &prepared, i))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(RunError::Runtime)?;

    let out = &config.output;
    let io = |e: Error| RunError::Runtime(e);
    fs::create_dir_all(out).map_err(|e| io(e.into()))?;
    if config.replicate_logs {
        for r in &results {
            write_replicate(&out.join(format!("replicate_{:03}", r.index)), config, &prepared, r).map_err(io)?;
        }
    }

    let reports: Vec<VariantReport> = config
        .variants
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let per: Vec<EvaluationReport> = results.iter().map(|r| r.reports[vi].clone()).collect();
            VariantReport {
                scenario: prepared.scenario.name.clone(),
                summary: VariantSummary::from_reports(v.name(), &per),
                replicates: per,
            }
        })
        .collect();
    for (v, r) in config.variants.iter().zip(&reports) {
        write_json(&out.join(format!("report_{}.json", v.name())), r).map_err(io)?;
    }

    let mut comparisons = Vec::new();
    if let Some(bi) = config.variants.iter().position(|v| *v == Variant::Baseline) {
        for (vi, v) in config.variants.iter().enumerate() {
            if *v != Variant::Baseline {
                comparisons.push(Comparison::new(&reports[vi].summary, &reports[bi].summary));
            }
        }
    }
    let markdown: String = comparisons.iter().map(|c| format!("{}\n", c.to_markdown())).collect();
    fs::write(out.join("comparison.md"), markdown).map_err(|e| io(e.into()))?;
    write_json(&out.join("comparison.json"), &comparisons).map_err(io)?;
    Ok(RunOutcome { reports, comparisons })
}

/// Compares two saved variant reports, `a` as candidate and `b` as baseline.
pub fn diff_reports(a: &Path, b: &Path) -> Result<Comparison, RunError> {
    let load = |p: &Path| -> Result<VariantReport, RunError> {
        let text = fs::read_to_string(p).map_err(|e| RunError::Config(e.into()))?;
        serde_json::from_str(&text).map_err(|e| RunError::Config(e.into()))
    };
    Ok(Comparison::new(&load(a)?.summary, &load(b)?.summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_paths() {
        let mut v = serde_json::json!({"filter": {"survival_prob": 0.99}});
        apply_override(&mut v, "filter.survival_prob", "0.9").unwrap();
        apply_override(&mut v, "scenario.name", "roundabout").unwrap();
        apply_override(&mut v, "a.b.c", "[1, 2]").unwrap();
        assert_eq!(v["filter"]["survival_prob"], 0.9);
        assert_eq!(v["scenario"]["name"], "roundabout");
        assert_eq!(v["a"]["b"]["c"], serde_json::json!([1, 2]));
        assert!(apply_override(&mut v, "filter..x", "1").is_err());
        assert!(apply_override(&mut v, "filter.survival_prob.x", "1").is_err());
    }

    #[test]
    fn load_with_overrides() {
        let c = RunConfig::load(None, &[("monte_carlo.replicates".into(), "3".into())]).unwrap();
        assert_eq!(c.monte_carlo.replicates, 3);
        let bad = RunConfig::load(None, &[("filter.prune_threshold".into(), "0.5".into())]);
        assert_eq!(bad.unwrap_err().exit_code(), 2);
        let unknown = RunConfig::load(None, &[("scenario.name".into(), "nowhere".into())]).unwrap();
        assert_eq!(unknown.prepare_scenario().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn variant_flags() {
        let base = FilterConfig::default();
        let c = Variant::MapOnly.configure(&base);
        assert!(c.prediction.enable_map && !c.prediction.enable_interaction);
        assert_eq!(Variant::parse("interaction-only").unwrap(), Variant::InteractionOnly);
        assert!(Variant::parse("nope").is_err());
        assert_eq!(Variant::Baseline.predictor(), PredictorKind::Standard);
    }
}
