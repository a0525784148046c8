//! Zoo-level scoring: one report row per model, ranking metrics per score
//! column and the node/edge ablation with its temperature sweep.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_scores, BaselineConfig, DEFAULT_SND_TAU};
use crate::bundle::{load_bundle, normalize_bundle, DatasetBundle};
use crate::error::{Error, Result};
use crate::graphs::{CovMode, EdgeTransform, DEFAULT_SHRINKAGE};
use crate::metrics::{ranking_metrics, RankingMetrics};
use crate::synth::bundle_accuracy;
use crate::vega::{temperature_sweep, vega_score, VegaConfig, DEFAULT_TEMPERATURE};

/// Temperatures evaluated by [`ablate`], ascending.
pub const SWEEP_TEMPERATURES: [f64; 5] = [0.005, 0.01, 0.05, 0.1, 0.5];

/// Score columns a report can be ranked by.
pub const METHOD_COLUMNS: [&str; 9] = [
    "vega",
    "s_n",
    "s_e",
    "ent_score",
    "ent_raw",
    "conf",
    "snd",
    "ds",
    "rot",
];

/// Resolved scoring configuration, echoed into every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub t: f64,
    pub cov_mode: CovMode,
    pub edge_transform: EdgeTransform,
    pub shrinkage: f64,
    pub snd_tau: f64,
    pub ds_seed: u64,
    pub normalize: bool,
    pub exclude_diagonal: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            t: DEFAULT_TEMPERATURE,
            cov_mode: CovMode::Diag,
            edge_transform: EdgeTransform::BhCoefficient,
            shrinkage: DEFAULT_SHRINKAGE,
            snd_tau: DEFAULT_SND_TAU,
            ds_seed: 0,
            normalize: true,
            exclude_diagonal: false,
        }
    }
}

impl ScoreConfig {
    pub fn vega(&self) -> VegaConfig {
        VegaConfig {
            t: self.t,
            cov_mode: self.cov_mode,
            edge_transform: self.edge_transform,
            shrinkage: self.shrinkage,
            normalize: self.normalize,
            exclude_diagonal: self.exclude_diagonal,
        }
    }

    pub fn baselines(&self) -> BaselineConfig {
        BaselineConfig {
            snd_tau: self.snd_tau,
            ds_seed: self.ds_seed,
            normalize: self.normalize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("snd_tau", self.snd_tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.shrinkage >= 0.0 && self.shrinkage.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "shrinkage must be non-negative, got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZooEntry {
    pub model_id: String,
    /// Relative paths resolve against the manifest's directory.
    pub bundle_path: PathBuf,
}

/// The list of candidate models for one dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZooManifest {
    pub dataset_id: String,
    pub entries: Vec<ZooEntry>,
}

impl ZooManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let manifest: ZooManifest = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.model_id.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate model_id `{}` in zoo manifest",
                    e.model_id
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, manifest_dir: &Path, entry: &ZooEntry) -> PathBuf {
        if entry.bundle_path.is_absolute() {
            entry.bundle_path.clone()
        } else {
            manifest_dir.join(&entry.bundle_path)
        }
    }
}

mod ds_sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if *x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "-inf" => Ok(Some(f64::NEG_INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("unexpected value `{t}`"))),
        }
    }
}

/// One model's scores. Score fields are `None` only when the row failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model_id: String,
    pub s_n: Option<f64>,
    pub s_e: Option<f64>,
    pub vega: Option<f64>,
    pub ent_raw: Option<f64>,
    pub ent_score: Option<f64>,
    pub conf: Option<f64>,
    pub snd: Option<f64>,
    /// `"-inf"` in JSON when the clusters collapse.
    #[serde(with = "ds_sentinel")]
    pub ds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rot: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub active_classes: Option<usize>,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportRow {
    fn failed(model_id: String, error: String, wall_time: f64) -> Self {
        Self {
            model_id,
            s_n: None,
            s_e: None,
            vega: None,
            ent_raw: None,
            ent_score: None,
            conf: None,
            snd: None,
            ds: None,
            rot: None,
            accuracy: None,
            active_classes: None,
            wall_time,
            warnings: Vec::new(),
            error: Some(error),
        }
    }

    /// Value of a named score column.
    pub fn column(&self, name: &str) -> Option<f64> {
        match name {
            "vega" | "s" => self.vega,
            "s_n" => self.s_n,
            "s_e" => self.s_e,
            "ent_score" | "ent" => self.ent_score,
            "ent_raw" => self.ent_raw,
            "conf" => self.conf,
            "snd" => self.snd,
            "ds" => self.ds,
            "rot" => self.rot,
            "accuracy" => self.accuracy,
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub dataset_id: String,
    pub config: ScoreConfig,
    pub rows: Vec<ReportRow>,
}

impl ScoreReport {
    pub fn has_accuracy(&self) -> bool {
        self.rows.iter().any(|r| r.accuracy.is_some())
    }

    pub fn has_rotation(&self) -> bool {
        self.rows.iter().any(|r| r.rot.is_some())
    }
}

fn score_row(model_id: String, bundle: &DatasetBundle, config: &ScoreConfig) -> Result<ReportRow> {
    let start = Instant::now();
    let vega = vega_score(bundle, &config.vega())?;
    let (baselines, report) = baseline_scores(bundle, &config.baselines())?;
    let accuracy = match bundle.labels {
        Some(_) => Some(bundle_accuracy(&normalize_bundle(bundle).0)?),
        None => None,
    };
    let warnings = report.issues.into_iter().map(|i| i.message).collect();
    Ok(ReportRow {
        model_id,
        s_n: Some(vega.s_n),
        s_e: Some(vega.s_e),
        vega: Some(vega.s),
        ent_raw: Some(baselines.ent_raw),
        ent_score: Some(baselines.ent),
        conf: Some(baselines.conf),
        snd: Some(baselines.snd),
        ds: Some(baselines.ds),
        rot: baselines.rot,
        accuracy,
        active_classes: Some(vega.active_classes),
        wall_time: start.elapsed().as_secs_f64(),
        warnings,
        error: None,
    })
}

/// Scores one in-memory bundle into a report row. Failures are captured in
/// the row rather than returned.
pub fn score_bundle(model_id: &str, bundle: &DatasetBundle, config: &ScoreConfig) -> ReportRow {
    let start = Instant::now();
    score_row(model_id.to_string(), bundle, config).unwrap_or_else(|e| {
        ReportRow::failed(
            model_id.to_string(),
            e.to_string(),
            start.elapsed().as_secs_f64(),
        )
    })
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// Scores in-memory bundles, keyed by their own `model_id`.
pub fn score_bundles(
    dataset_id: &str,
    bundles: &[DatasetBundle],
    config: &ScoreConfig,
    workers: Option<usize>,
) -> Result<ScoreReport> {
    config.validate()?;
    let rows = pool(workers)?.install(|| {
        bundles
            .par_iter()
            .map(|b| score_bundle(&b.model_id, b, config))
            .collect()
    });
    Ok(ScoreReport {
        dataset_id: dataset_id.to_string(),
        config: *config,
        rows,
    })
}

/// Loads and scores every model in a zoo manifest. Rows keep manifest order;
/// a bundle that fails to load or score yields a row with `error` set.
pub fn score_zoo(
    manifest: &ZooManifest,
    manifest_dir: &Path,
    config: &ScoreConfig,
    workers: Option<usize>,
) -> Result<ScoreReport> {
    config.validate()?;
    manifest.validate()?;
    let rows = pool(workers)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let start = Instant::now();
                match load_bundle(manifest.resolve(manifest_dir, entry)) {
                    Ok(b) => score_bundle(&entry.model_id, &b, config),
                    Err(e) => ReportRow::failed(
                        entry.model_id.clone(),
                        e.to_string(),
                        start.elapsed().as_secs_f64(),
                    ),
                }
            })
            .collect()
    });
    Ok(ScoreReport {
        dataset_id: manifest.dataset_id.clone(),
        config: *config,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub method: String,
    pub models: usize,
    pub metrics: RankingMetrics,
    /// `(accuracy, score)` per ranked model, in report order.
    pub scatter: Vec<(f64, f64)>,
    /// Models left out because the row failed or lacks the column.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

/// Ranking metrics of one score column against the accuracy column.
pub fn rank_report(report: &ScoreReport, method: &str) -> Result<RankResult> {
    if !METHOD_COLUMNS.contains(&method) && !matches!(method, "s" | "ent" | "accuracy") {
        return Err(Error::InvalidParameter(format!(
            "unknown method column `{method}` (expected one of {})",
            METHOD_COLUMNS.join(", ")
        )));
    }
    if !report.has_accuracy() {
        return Err(Error::MissingLabels(
            "ranking (report has no accuracy column)",
        ));
    }
    if report.rows.iter().all(|r| r.column(method).is_none()) {
        return Err(Error::InvalidParameter(format!(
            "report has no values in column `{method}`"
        )));
    }
    let mut scatter = Vec::new();
    let mut skipped = Vec::new();
    for row in &report.rows {
        match (row.accuracy, row.column(method)) {
            (Some(a), Some(s)) => scatter.push((a, s)),
            _ => skipped.push(row.model_id.clone()),
        }
    }
    let (acc, scores): (Vec<f64>, Vec<f64>) = scatter.iter().copied().unzip();
    Ok(RankResult {
        method: method.to_string(),
        models: scatter.len(),
        metrics: ranking_metrics(&acc, &scores)?,
        scatter,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub metrics: RankingMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub metrics: RankingMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub dataset_id: String,
    pub config: ScoreConfig,
    pub models: usize,
    /// `s_n`, `s_e`, `s_n+s_e`, in that order.
    pub variants: Vec<AblationRow>,
    /// Full score at each temperature in [`SWEEP_TEMPERATURES`].
    pub sweep: Vec<SweepRow>,
}

/// Per-model inputs of the ablation: accuracy plus `(s_n, s_e)` at the
/// configured temperature and at every sweep temperature.
struct AblationInputs {
    accuracy: f64,
    base: (f64, f64),
    sweep: Vec<f64>,
}

fn ablation_inputs(bundle: &DatasetBundle, config: &ScoreConfig) -> Result<AblationInputs> {
    if bundle.labels.is_none() {
        return Err(Error::MissingLabels("ablation"));
    }
    let accuracy = bundle_accuracy(&normalize_bundle(bundle).0)?;
    let mut temps = vec![config.t];
    temps.extend_from_slice(&SWEEP_TEMPERATURES);
    let scores = temperature_sweep(bundle, &config.vega(), &temps)?;
    Ok(AblationInputs {
        accuracy,
        base: (scores[0].s_n, scores[0].s_e),
        sweep: scores[1..].iter().map(|s| s.s).collect(),
    })
}

fn ablation_table(
    dataset_id: &str,
    config: &ScoreConfig,
    inputs: Vec<AblationInputs>,
) -> Result<AblationTable> {
    let acc: Vec<f64> = inputs.iter().map(|i| i.accuracy).collect();
    let column =
        |f: &dyn Fn(&AblationInputs) -> f64| -> Vec<f64> { inputs.iter().map(f).collect() };
    let variants = [
        ("s_n", column(&|i| i.base.0)),
        ("s_e", column(&|i| i.base.1)),
        ("s_n+s_e", column(&|i| i.base.0 + i.base.1)),
    ]
    .into_iter()
    .map(|(name, scores)| {
        Ok(AblationRow {
            variant: name.to_string(),
            metrics: ranking_metrics(&acc, &scores)?,
        })
    })
    .collect::<Result<Vec<_>>>()?;
    let sweep = SWEEP_TEMPERATURES
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            Ok(SweepRow {
                t,
                metrics: ranking_metrics(&acc, &column(&|i| i.sweep[k]))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationTable {
        dataset_id: dataset_id.to_string(),
        config: *config,
        models: inputs.len(),
        variants,
        sweep,
    })
}

/// Node-only, edge-only and combined ranking metrics plus the temperature
/// sweep, over in-memory labeled bundles.
pub fn ablate_bundles(
    dataset_id: &str,
    bundles: &[DatasetBundle],
    config: &ScoreConfig,
    workers: Option<usize>,
) -> Result<AblationTable> {
    config.validate()?;
    let inputs = pool(workers)?.install(|| {
        bundles
            .par_iter()
            .map(|b| ablation_inputs(b, config))
            .collect::<Result<Vec<_>>>()
    })?;
    ablation_table(dataset_id, config, inputs)
}

/// [`ablate_bundles`] over the bundles of a zoo manifest.
pub fn ablate(
    manifest: &ZooManifest,
    manifest_dir: &Path,
    config: &ScoreConfig,
    workers: Option<usize>,
) -> Result<AblationTable> {
    config.validate()?;
    manifest.validate()?;
    let inputs = pool(workers)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| ablation_inputs(&load_bundle(manifest.resolve(manifest_dir, e))?, config))
            .collect::<Result<Vec<_>>>()
    })?;
    ablation_table(&manifest.dataset_id, config, inputs)
}
