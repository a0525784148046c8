//! On-disk embedding bundles and the in-memory data model shared by every
//! scoring stage.
//!
//! A bundle is a directory holding `manifest.json` plus raw tensor payloads
//! under `tensors/`. Float tensors are little-endian IEEE-754 `f32`, labels
//! are little-endian `i32`, and every tensor is stored row-major:
//!
//! ```text
//! bundle/
//!   manifest.json
//!   tensors/visual.bin             N x D
//!   tensors/textual.bin            K x D      (or textual_templates.bin, P x K x D)
//!   tensors/labels.bin             N          (optional)
//!   tensors/rot_visual.bin         4N x D     (optional)
//!   tensors/rot_textual.bin        4 x D      (optional)
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Manifest version understood by this reader.
pub const FORMAT_VERSION: u64 = 1;

/// Rows whose Euclidean norm falls below this are left as zeros by
/// [`l2_normalize`].
pub const ZERO_NORM_EPS: f64 = 1e-12;

pub const MANIFEST_FILE: &str = "manifest.json";
const TENSOR_DIR: &str = "tensors";

/// Dense row-major `f32` matrix. Every value is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::InvalidParameter(format!("{rows} x {cols} overflows")))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                tensor: "matrix".into(),
                offset,
                byte_offset: offset * 4,
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// New matrix with rows taken in the given order.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(order.len() * self.cols);
        for &i in order {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Per-template textual features, `templates x classes x dims`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateTensor {
    templates: usize,
    classes: usize,
    dims: usize,
    data: Vec<f32>,
}

impl TemplateTensor {
    pub fn new(templates: usize, classes: usize, dims: usize, data: Vec<f32>) -> Result<Self> {
        let expected = templates
            .checked_mul(classes)
            .and_then(|v| v.checked_mul(dims))
            .ok_or_else(|| Error::InvalidParameter("template tensor shape overflows".into()))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        if let Some(offset) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                tensor: "textual_templates".into(),
                offset,
                byte_offset: offset * 4,
            });
        }
        Ok(Self {
            templates,
            classes,
            dims,
            data,
        })
    }

    pub fn templates(&self) -> usize {
        self.templates
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Feature of class `k` under template `p`.
    pub fn feature(&self, p: usize, k: usize) -> &[f32] {
        let start = (p * self.classes + k) * self.dims;
        &self.data[start..start + self.dims]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Class order permuted consistently across every template.
    pub fn select_classes(&self, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.templates * order.len() * self.dims);
        for p in 0..self.templates {
            for &k in order {
                data.extend_from_slice(self.feature(p, k));
            }
        }
        Self {
            templates: self.templates,
            classes: order.len(),
            dims: self.dims,
            data,
        }
    }
}

/// One model's view of one dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    pub model_id: String,
    pub dataset_id: String,
    pub class_names: Vec<String>,
    /// Image features, `N x D`.
    pub visual: EmbeddingMatrix,
    /// Class features, `K x D`. When templates are present this is their
    /// per-class average.
    pub textual: EmbeddingMatrix,
    pub textual_templates: Option<TemplateTensor>,
    pub labels: Option<Vec<usize>>,
    /// Image `i` at angle index `r` lives at row `4 * i + r`.
    pub rot_visual: Option<EmbeddingMatrix>,
    /// One prompt feature per angle in 0, 90, 180, 270 degrees.
    pub rot_textual: Option<EmbeddingMatrix>,
}

impl DatasetBundle {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn num_images(&self) -> usize {
        self.visual.rows()
    }

    pub fn dims(&self) -> usize {
        self.visual.cols()
    }

    pub fn has_rotation(&self) -> bool {
        self.rot_visual.is_some() && self.rot_textual.is_some()
    }

    /// Copy with ground-truth labels removed.
    pub fn without_labels(&self) -> Self {
        Self {
            labels: None,
            ..self.clone()
        }
    }

    /// Checks every structural invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        let k = self.class_names.len();
        let d = self.visual.cols();
        if k < 2 {
            return Err(Error::InvalidBundle(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if self.textual.rows() != k {
            return Err(Error::InvalidBundle(format!(
                "textual has {} rows but there are {k} class names",
                self.textual.rows()
            )));
        }
        if self.textual.cols() != d {
            return Err(Error::InvalidBundle(format!(
                "textual dimension {} differs from visual dimension {d}",
                self.textual.cols()
            )));
        }
        if let Some(t) = &self.textual_templates {
            if t.templates() == 0 {
                return Err(Error::InvalidBundle(
                    "textual_templates has no templates".into(),
                ));
            }
            if t.classes() != k || t.dims() != d {
                return Err(Error::InvalidBundle(format!(
                    "textual_templates shape {}x{}x{} does not match K={k}, D={d}",
                    t.templates(),
                    t.classes(),
                    t.dims()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.visual.rows() {
                return Err(Error::InvalidBundle(format!(
                    "{} labels for {} images",
                    labels.len(),
                    self.visual.rows()
                )));
            }
            if let Some(offset) = labels.iter().position(|&l| l >= k) {
                return Err(Error::LabelOutOfRange {
                    offset,
                    value: labels[offset] as i64,
                    classes: k,
                });
            }
        }
        match (&self.rot_visual, &self.rot_textual) {
            (None, None) => {}
            (Some(rv), Some(rt)) => {
                if rv.rows() != 4 * self.visual.rows() {
                    return Err(Error::InvalidBundle(format!(
                        "rot_visual has {} rows, expected 4 x {}",
                        rv.rows(),
                        self.visual.rows()
                    )));
                }
                if rt.rows() != 4 {
                    return Err(Error::InvalidBundle(format!(
                        "rot_textual has {} rows, expected 4",
                        rt.rows()
                    )));
                }
                if rv.cols() != d || rt.cols() != d {
                    return Err(Error::InvalidBundle(
                        "rotation tensors do not match feature dimension".into(),
                    ));
                }
            }
            _ => {
                return Err(Error::InvalidBundle(
                    "rot_visual and rot_textual must be supplied together".into(),
                ))
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

/// Outcome of validating a bundle. `ok` is false iff some issue is an error.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self {
            ok: true,
            issues: Vec::new(),
        }
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            message: message.into(),
        });
    }

    pub fn error(&mut self, message: impl Into<String>) {
        self.ok = false;
        self.issues.push(Issue {
            severity: Severity::Error,
            message: message.into(),
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.ok &= other.ok;
        self.issues.extend(other.issues);
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    I32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub file: String,
    pub dtype: DType,
    pub shape: Vec<usize>,
    pub byte_order: String,
    pub layout: String,
}

impl TensorEntry {
    fn new(name: &str, dtype: DType, shape: Vec<usize>) -> Self {
        Self {
            file: format!("{TENSOR_DIR}/{name}.bin"),
            dtype,
            shape,
            byte_order: "little".into(),
            layout: "row-major".into(),
        }
    }
}

/// Contents of `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub model_id: String,
    pub dataset_id: String,
    pub class_names: Vec<String>,
    pub tensors: BTreeMap<String, TensorEntry>,
    /// Free-form producer metadata; ignored by the reader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<serde_json::Value>,
}

const KNOWN_TENSORS: [&str; 6] = [
    "visual",
    "textual",
    "textual_templates",
    "labels",
    "rot_visual",
    "rot_textual",
];

fn expected_rank(name: &str) -> usize {
    match name {
        "textual_templates" => 3,
        "labels" => 1,
        _ => 2,
    }
}

fn expected_dtype(name: &str) -> DType {
    if name == "labels" {
        DType::I32
    } else {
        DType::F32
    }
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| Error::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: manifest.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let bad = |message: String| Error::Manifest {
        path: path.clone(),
        message,
    };
    for (name, entry) in &manifest.tensors {
        if !KNOWN_TENSORS.contains(&name.as_str()) {
            return Err(bad(format!("unknown tensor `{name}`")));
        }
        if entry.byte_order != "little" {
            return Err(bad(format!(
                "tensor `{name}`: unsupported byte_order `{}`",
                entry.byte_order
            )));
        }
        if entry.layout != "row-major" {
            return Err(bad(format!(
                "tensor `{name}`: unsupported layout `{}`",
                entry.layout
            )));
        }
        if entry.dtype != expected_dtype(name) {
            return Err(bad(format!(
                "tensor `{name}`: dtype {:?} not allowed",
                entry.dtype
            )));
        }
        if entry.shape.len() != expected_rank(name) {
            return Err(bad(format!(
                "tensor `{name}`: expected rank {}, got shape {:?}",
                expected_rank(name),
                entry.shape
            )));
        }
    }
    if !manifest.tensors.contains_key("visual") {
        return Err(bad("required tensor `visual` is missing".into()));
    }
    match (
        manifest.tensors.contains_key("textual"),
        manifest.tensors.contains_key("textual_templates"),
    ) {
        (true, false) | (false, true) => {}
        _ => {
            return Err(bad(
                "exactly one of `textual` or `textual_templates` is required".into(),
            ))
        }
    }
    Ok(manifest)
}

/// Reads a tensor payload and checks its length against the declared shape.
fn read_payload(dir: &Path, name: &str, entry: &TensorEntry) -> Result<Vec<u8>> {
    let path = dir.join(&entry.file);
    if !path.is_file() {
        return Err(Error::MissingTensorFile {
            tensor: name.into(),
            path,
        });
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expected = entry
        .shape
        .iter()
        .try_fold(4u64, |acc, &s| acc.checked_mul(s as u64));
    match expected {
        Some(expected) if expected == bytes.len() as u64 => Ok(bytes),
        _ => Err(Error::ShapeMismatch {
            tensor: name.into(),
            shape: entry.shape.clone(),
            expected: expected.unwrap_or(u64::MAX),
            actual: bytes.len() as u64,
        }),
    }
}

fn decode_f32(name: &str, bytes: &[u8]) -> Result<Vec<f32>> {
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(i, c)| {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    tensor: name.into(),
                    offset: i,
                    byte_offset: i * 4,
                })
            }
        })
        .collect()
}

fn read_matrix(dir: &Path, manifest: &Manifest, name: &str) -> Result<Option<EmbeddingMatrix>> {
    let Some(entry) = manifest.tensors.get(name) else {
        return Ok(None);
    };
    let bytes = read_payload(dir, name, entry)?;
    let data = decode_f32(name, &bytes)?;
    EmbeddingMatrix::new(entry.shape[0], entry.shape[1], data).map(Some)
}

fn read_labels(dir: &Path, manifest: &Manifest, classes: usize) -> Result<Option<Vec<usize>>> {
    let Some(entry) = manifest.tensors.get("labels") else {
        return Ok(None);
    };
    let bytes = read_payload(dir, "labels", entry)?;
    bytes
        .chunks_exact(4)
        .enumerate()
        .map(|(offset, c)| {
            let v = i32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v < 0 || v as usize >= classes {
                Err(Error::LabelOutOfRange {
                    offset,
                    value: v as i64,
                    classes,
                })
            } else {
                Ok(v as usize)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Loads and fully validates a bundle directory.
///
/// Tensor payloads are returned exactly as stored; normalization happens at
/// scoring time (see [`normalize_bundle`]). When the bundle carries
/// per-template textual features, `textual` is their renormalized average.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let k = manifest.class_names.len();

    let visual = read_matrix(dir, &manifest, "visual")?.expect("checked in read_manifest");
    let textual_templates = match manifest.tensors.get("textual_templates") {
        Some(entry) => {
            let bytes = read_payload(dir, "textual_templates", entry)?;
            let data = decode_f32("textual_templates", &bytes)?;
            let s = &entry.shape;
            Some(TemplateTensor::new(s[0], s[1], s[2], data)?)
        }
        None => None,
    };
    let textual = match &textual_templates {
        Some(t) => average_templates(t)?.0,
        None => read_matrix(dir, &manifest, "textual")?.expect("checked in read_manifest"),
    };
    let labels = read_labels(dir, &manifest, k)?;
    let rot_visual = read_matrix(dir, &manifest, "rot_visual")?;
    let rot_textual = read_matrix(dir, &manifest, "rot_textual")?;

    let bundle = DatasetBundle {
        model_id: manifest.model_id,
        dataset_id: manifest.dataset_id,
        class_names: manifest.class_names,
        visual,
        textual,
        textual_templates,
        labels,
        rot_visual,
        rot_textual,
    };
    bundle.validate()?;
    Ok(bundle)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn f32_bytes(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Writes `bundle` as a bundle directory, creating `dir` if needed.
///
/// Bundles carrying templates store `textual_templates` in place of
/// `textual`.
pub fn write_bundle(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    bundle.validate()?;
    let dir = dir.as_ref();
    let tensor_dir = dir.join(TENSOR_DIR);
    fs::create_dir_all(&tensor_dir).map_err(|e| Error::io(&tensor_dir, e))?;

    let mut tensors = BTreeMap::new();
    let mut put_matrix = |name: &str, m: &EmbeddingMatrix| -> Result<()> {
        let entry = TensorEntry::new(name, DType::F32, vec![m.rows(), m.cols()]);
        write_file(&dir.join(&entry.file), &f32_bytes(m.as_slice()))?;
        tensors.insert(name.to_string(), entry);
        Ok(())
    };
    put_matrix("visual", &bundle.visual)?;
    match &bundle.textual_templates {
        Some(_) => {}
        None => put_matrix("textual", &bundle.textual)?,
    }
    if let Some(m) = &bundle.rot_visual {
        put_matrix("rot_visual", m)?;
    }
    if let Some(m) = &bundle.rot_textual {
        put_matrix("rot_textual", m)?;
    }
    if let Some(t) = &bundle.textual_templates {
        let entry = TensorEntry::new(
            "textual_templates",
            DType::F32,
            vec![t.templates(), t.classes(), t.dims()],
        );
        write_file(&dir.join(&entry.file), &f32_bytes(t.as_slice()))?;
        tensors.insert("textual_templates".into(), entry);
    }
    if let Some(labels) = &bundle.labels {
        let entry = TensorEntry::new("labels", DType::I32, vec![labels.len()]);
        let bytes: Vec<u8> = labels
            .iter()
            .flat_map(|&l| (l as i32).to_le_bytes())
            .collect();
        write_file(&dir.join(&entry.file), &bytes)?;
        tensors.insert("labels".into(), entry);
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model_id: bundle.model_id.clone(),
        dataset_id: bundle.dataset_id.clone(),
        class_names: bundle.class_names.clone(),
        tensors,
        notes: None,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    write_file(&path, &json)
}

/// Scales every row to unit Euclidean norm.
///
/// Rows with norm below [`ZERO_NORM_EPS`] become all-zero; their indices are
/// returned so callers can surface a warning.
pub fn l2_normalize(m: &EmbeddingMatrix) -> (EmbeddingMatrix, Vec<usize>) {
    let mut data = Vec::with_capacity(m.rows() * m.cols());
    let mut zero_rows = Vec::new();
    for (i, row) in m.iter_rows().enumerate() {
        let norm = row
            .iter()
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt();
        if norm < ZERO_NORM_EPS {
            zero_rows.push(i);
            data.extend(std::iter::repeat_n(0.0, row.len()));
        } else {
            data.extend(row.iter().map(|&v| (v as f64 / norm) as f32));
        }
    }
    (
        EmbeddingMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data,
        },
        zero_rows,
    )
}

/// Per-class mean over templates, renormalized to unit length.
pub fn average_templates(t: &TemplateTensor) -> Result<(EmbeddingMatrix, Vec<usize>)> {
    if t.templates() == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut data = Vec::with_capacity(t.classes() * t.dims());
    let scale = 1.0 / t.templates() as f64;
    for k in 0..t.classes() {
        let mut acc = vec![0.0f64; t.dims()];
        for p in 0..t.templates() {
            for (a, &v) in acc.iter_mut().zip(t.feature(p, k)) {
                *a += v as f64;
            }
        }
        data.extend(acc.into_iter().map(|a| (a * scale) as f32));
    }
    let mean = EmbeddingMatrix {
        rows: t.classes(),
        cols: t.dims(),
        data,
    };
    Ok(l2_normalize(&mean))
}

/// L2-normalizes every feature tensor of a bundle, reporting zero rows as
/// warnings.
pub fn normalize_bundle(bundle: &DatasetBundle) -> (DatasetBundle, ValidationReport) {
    let mut report = ValidationReport::new();
    let mut norm = |name: &str, m: &EmbeddingMatrix| {
        let (out, zeros) = l2_normalize(m);
        if !zeros.is_empty() {
            report.warn(format!(
                "tensor `{name}`: {} zero-norm row(s) left as zeros (first at row {})",
                zeros.len(),
                zeros[0]
            ));
        }
        out
    };
    let visual = norm("visual", &bundle.visual);
    let textual = norm("textual", &bundle.textual);
    let rot_visual = bundle.rot_visual.as_ref().map(|m| norm("rot_visual", m));
    let rot_textual = bundle.rot_textual.as_ref().map(|m| norm("rot_textual", m));
    (
        DatasetBundle {
            visual,
            textual,
            rot_visual,
            rot_textual,
            ..bundle.clone()
        },
        report,
    )
}

/// Loads a bundle and reports every problem as a structured issue instead
/// of an error.
pub fn validate_bundle_dir(dir: impl AsRef<Path>) -> ValidationReport {
    let mut report = ValidationReport::new();
    match load_bundle(dir) {
        Ok(bundle) => {
            let (_, warnings) = normalize_bundle(&bundle);
            report.merge(warnings);
            if let Some(t) = &bundle.textual_templates {
                if let Ok((_, zeros)) = average_templates(t) {
                    if !zeros.is_empty() {
                        report.warn(format!(
                            "tensor `textual_templates`: template average vanishes for {} class(es)",
                            zeros.len()
                        ));
                    }
                }
            }
        }
        Err(e) => report.error(e.to_string()),
    }
    report
}
