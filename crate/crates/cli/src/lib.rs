//! File-level front end for `vega-core`: each `run_*` function backs one
//! subcommand of the `vega` binary.
//!
//! JSON outputs are authoritative. Every JSON file written here gets a CSV
//! mirror next to it (`report.json` -> `report.csv`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use vega_core::bundle::{validate_bundle_dir, write_bundle, ValidationReport};
use vega_core::synth::{generate_zoo, SynthConfig};
use vega_core::zoo::{
    ablate, rank_report, score_zoo, AblationTable, RankResult, ScoreConfig, ScoreReport, ZooEntry,
    ZooManifest,
};
use vega_core::RankingMetrics;

/// File name of the zoo manifest written by [`run_synth`].
pub const ZOO_MANIFEST: &str = "zoo.json";
/// Per-model alignment and accuracy written alongside a synthetic zoo.
pub const ZOO_TRUTH: &str = "truth.csv";

/// Scoring flags that override the config file.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub no_normalize: bool,
    pub exclude_diagonal: bool,
}

pub fn load_config(path: Option<&Path>, overrides: Overrides) -> Result<ScoreConfig> {
    let mut config = match path {
        Some(p) => {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))?
        }
        None => ScoreConfig::default(),
    };
    if overrides.no_normalize {
        config.normalize = false;
    }
    if overrides.exclude_diagonal {
        config.exclude_diagonal = true;
    }
    config.validate()?;
    Ok(config)
}

/// `report.json` -> `report.csv`; anything else gets `.csv` appended.
pub fn csv_mirror_path(out: &Path) -> PathBuf {
    match out.extension().and_then(|e| e.to_str()) {
        Some("json") => out.with_extension("csv"),
        _ => {
            let mut s = out.as_os_str().to_owned();
            s.push(".csv");
            PathBuf::from(s)
        }
    }
}

/// `metrics.json` -> `metrics.scatter.csv`.
pub fn scatter_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "rank".into());
    out.with_file_name(format!("{stem}.scatter.csv"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let json = serde_json::to_string_pretty(value)?;
    fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn metric_fields(m: &RankingMetrics) -> [String; 5] {
    [m.r5, m.tau5, m.tau, m.top1_acc, m.oracle].map(|v| v.to_string())
}

const METRIC_HEADER: [&str; 5] = ["r5", "tau5", "tau", "top1_acc", "oracle"];

pub fn write_report(report: &ScoreReport, out: &Path) -> Result<()> {
    write_json(out, report)?;
    let with_rot = report.has_rotation();
    let with_acc = report.has_accuracy();
    let mut header = vec![
        "model_id",
        "s_n",
        "s_e",
        "vega",
        "ent_raw",
        "ent_score",
        "conf",
        "snd",
        "ds",
    ];
    if with_rot {
        header.push("rot");
    }
    if with_acc {
        header.push("accuracy");
    }
    header.extend(["active_classes", "wall_time", "error"]);

    let path = csv_mirror_path(out);
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(&header)?;
    for r in &report.rows {
        let mut rec = vec![
            r.model_id.clone(),
            fmt(r.s_n),
            fmt(r.s_e),
            fmt(r.vega),
            fmt(r.ent_raw),
            fmt(r.ent_score),
            fmt(r.conf),
            fmt(r.snd),
            fmt(r.ds),
        ];
        if with_rot {
            rec.push(fmt(r.rot));
        }
        if with_acc {
            rec.push(fmt(r.accuracy));
        }
        rec.push(r.active_classes.map(|v| v.to_string()).unwrap_or_default());
        rec.push(r.wall_time.to_string());
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ScoreReport> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading report {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
}

/// Validates one bundle directory. Never fails: problems become issues.
pub fn run_validate(dir: &Path) -> ValidationReport {
    validate_bundle_dir(dir)
}

pub fn run_score(
    zoo: &Path,
    config: &ScoreConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<ScoreReport> {
    let manifest = ZooManifest::load(zoo)?;
    let dir = zoo.parent().unwrap_or(Path::new("."));
    let report = score_zoo(&manifest, dir, config, workers)?;
    write_report(&report, out)?;
    Ok(report)
}

pub fn run_rank(report_path: &Path, method: &str, out: &Path) -> Result<RankResult> {
    let report = read_report(report_path)?;
    let result = rank_report(&report, method)?;

    #[derive(Serialize)]
    struct RankFile<'a> {
        method: &'a str,
        models: usize,
        #[serde(flatten)]
        metrics: &'a RankingMetrics,
        #[serde(skip_serializing_if = "<[String]>::is_empty")]
        skipped: &'a [String],
    }
    write_json(
        out,
        &RankFile {
            method: &result.method,
            models: result.models,
            metrics: &result.metrics,
            skipped: &result.skipped,
        },
    )?;

    let mut w = csv::Writer::from_path(csv_mirror_path(out))?;
    let mut header = vec!["method", "models"];
    header.extend(METRIC_HEADER);
    w.write_record(&header)?;
    let mut rec = vec![result.method.clone(), result.models.to_string()];
    rec.extend(metric_fields(&result.metrics));
    w.write_record(&rec)?;
    w.flush()?;

    let mut w = csv::Writer::from_path(scatter_path(out))?;
    w.write_record(["accuracy", "score"])?;
    for (a, s) in &result.scatter {
        w.write_record([a.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok(result)
}

/// Contents of a `synth` config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthZooConfig {
    pub n_models: usize,
    pub alpha_range: (f64, f64),
    #[serde(default)]
    pub base: SynthConfig,
    #[serde(default)]
    pub dataset_id: Option<String>,
}

pub fn run_synth(config_path: &Path, out_dir: &Path) -> Result<ZooManifest> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("reading synth config {}", config_path.display()))?;
    let config: SynthZooConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing synth config {}", config_path.display()))?;
    synth_to_dir(&config, out_dir)
}

pub fn synth_to_dir(config: &SynthZooConfig, out_dir: &Path) -> Result<ZooManifest> {
    let (lo, hi) = config.alpha_range;
    if lo > hi {
        bail!("alpha_range must be ascending, got ({lo}, {hi})");
    }
    let zoo = generate_zoo(config.n_models, &config.base, config.alpha_range)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;

    let dataset_id = config
        .dataset_id
        .clone()
        .unwrap_or_else(|| zoo[0].bundle.dataset_id.clone());
    let mut entries = Vec::with_capacity(zoo.len());
    let mut truth = csv::Writer::from_path(out_dir.join(ZOO_TRUTH))?;
    truth.write_record(["model_id", "alpha", "accuracy"])?;
    for member in &zoo {
        let mut bundle = member.bundle.clone();
        bundle.dataset_id = dataset_id.clone();
        let rel = PathBuf::from("bundles").join(&bundle.model_id);
        write_bundle(&bundle, out_dir.join(&rel))?;
        truth.write_record([
            bundle.model_id.clone(),
            member.alpha.to_string(),
            member.accuracy.to_string(),
        ])?;
        entries.push(ZooEntry {
            model_id: bundle.model_id.clone(),
            bundle_path: rel,
        });
    }
    truth.flush()?;
    let manifest = ZooManifest {
        dataset_id,
        entries,
    };
    manifest.save(out_dir.join(ZOO_MANIFEST))?;
    Ok(manifest)
}

pub fn write_ablation(table: &AblationTable, out: &Path) -> Result<()> {
    write_json(out, table)?;
    let mut w = csv::Writer::from_path(csv_mirror_path(out))?;
    let mut header = vec!["section", "variant", "t"];
    header.extend(METRIC_HEADER);
    w.write_record(&header)?;
    for row in &table.variants {
        let mut rec = vec![
            "ablation".to_string(),
            row.variant.clone(),
            table.config.t.to_string(),
        ];
        rec.extend(metric_fields(&row.metrics));
        w.write_record(&rec)?;
    }
    for row in &table.sweep {
        let mut rec = vec![
            "sweep".to_string(),
            "s_n+s_e".to_string(),
            row.t.to_string(),
        ];
        rec.extend(metric_fields(&row.metrics));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_ablate(
    zoo: &Path,
    config: &ScoreConfig,
    out: &Path,
    workers: Option<usize>,
) -> Result<AblationTable> {
    let manifest = ZooManifest::load(zoo)?;
    let dir = zoo.parent().unwrap_or(Path::new("."));
    let table = ablate(&manifest, dir, config, workers)?;
    write_ablation(&table, out)?;
    Ok(table)
}
