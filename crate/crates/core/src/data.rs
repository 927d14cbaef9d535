//! Dataset loading, feature scaling and the synthetic XOR set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, Sample};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub provenance: String,
    pub samples: Vec<Sample>,
    /// Non-fatal diagnostics collected while loading.
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, provenance: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            provenance: provenance.into(),
            samples,
            warnings: Vec::new(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::data(
                None,
                format!("dataset {} has {} samples, need at least 2", self.name, self.samples.len()),
            ));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::data(None, format!("dataset {} has no features", self.name)));
        }
        if let Some(i) = self.samples.iter().position(|s| s.features.len() != dim) {
            return Err(Error::data(
                Some(i + 1),
                format!("sample has {} features, expected {dim}", self.samples[i].features.len()),
            ));
        }
        if let Some(i) = self
            .samples
            .iter()
            .position(|s| s.features.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::data(Some(i + 1), "non-finite feature value"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(positive, negative)` sample counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label == Label::Positive).count();
        (pos, self.samples.len() - pos)
    }

    /// `x1,…,xd,label` rows with a header; labels as `+1` / `-1`, reals in
    /// shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        let _ = writeln!(out, "{},label", header.join(","));
        for s in &self.samples {
            for v in &s.features {
                let _ = write!(out, "{v:?},");
            }
            let _ = writeln!(out, "{}", s.label);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

/// How to read one delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    /// `None` sniffs `;` vs `,` from the first line.
    pub delimiter: Option<u8>,
    pub has_header: bool,
    /// `None` means the last column.
    pub label_column: Option<ColumnRef>,
    /// Columns dropped in addition to the label.
    pub ignore_columns: Vec<ColumnRef>,
    /// Raw label text to class. Empty accepts `1`/`+1` and `-1`.
    pub label_map: BTreeMap<String, Label>,
    /// Drop rows with unparseable values (recording a warning) instead of failing.
    pub skip_invalid_rows: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            delimiter: None,
            has_header: true,
            label_column: None,
            ignore_columns: Vec::new(),
            label_map: BTreeMap::new(),
            skip_invalid_rows: false,
        }
    }
}

impl CsvSchema {
    fn map_label(&self, raw: &str) -> Option<Label> {
        let raw = raw.trim();
        if self.label_map.is_empty() {
            return match raw {
                "1" | "+1" | "1.0" => Some(Label::Positive),
                "-1" | "-1.0" => Some(Label::Negative),
                _ => None,
            };
        }
        self.label_map.get(raw).copied()
    }
}

fn resolve_column(col: &ColumnRef, header: Option<&csv::StringRecord>, width: usize) -> Result<usize> {
    match col {
        ColumnRef::Index(i) if *i < width => Ok(*i),
        ColumnRef::Index(i) => Err(Error::data(None, format!("column {i} out of range (width {width})"))),
        ColumnRef::Name(name) => match header {
            None => Err(Error::data(None, format!("column {name:?} given by name but the file has no header line"))),
            Some(h) => h
                .iter()
                .position(|f| f.trim() == name)
                .ok_or_else(|| Error::data(None, format!("no column named {name:?}"))),
        },
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    parse_csv(&text, &name, &path.display().to_string(), schema)
}

/// Parses delimited text; `origin` is recorded as provenance. Lines starting
/// with `#` are comments.
pub fn parse_csv(text: &str, name: &str, origin: &str, schema: &CsvSchema) -> Result<Dataset> {
    let (rows, warnings) = read_rows(text, origin, schema, true)?;
    let samples = rows
        .into_iter()
        .map(|(x, l)| Sample::new(x, l.expect("labeled rows carry a label")))
        .collect();
    let mut ds = Dataset::new(name, origin, samples)?;
    ds.warnings = warnings;
    Ok(ds)
}

/// Feature rows of a file without a label column (`label_column` and
/// `label_map` are ignored). Returns the rows and any skipped-row warnings.
pub fn load_features(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (rows, warnings) = read_rows(&text, &path.display().to_string(), schema, false)?;
    Ok((rows.into_iter().map(|(x, _)| x).collect(), warnings))
}

type Rows = (Vec<(Vec<f64>, Option<Label>)>, Vec<String>);

fn read_rows(text: &str, origin: &str, schema: &CsvSchema, labeled: bool) -> Result<Rows> {
    if text.trim().is_empty() {
        return Err(Error::data(None, format!("{origin} is empty")));
    }
    let delimiter = schema.delimiter.unwrap_or_else(|| {
        let first = text.lines().next().unwrap_or("");
        if first.matches(';').count() > first.matches(',').count() {
            b';'
        } else {
            b','
        }
    });
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(schema.has_header)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = if schema.has_header {
        Some(
            reader
                .headers()
                .map_err(|e| Error::data(Some(1), e.to_string()))?
                .clone(),
        )
    } else {
        None
    };
    let first_data_row = if schema.has_header { 2 } else { 1 };

    let mut width = header.as_ref().map(|h| h.len());
    let mut layout: Option<(Option<usize>, Vec<usize>)> = None;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();

    for (k, rec) in reader.records().enumerate() {
        let fallback = first_data_row + k;
        let rec = rec.map_err(|e| {
            let row = e.position().map_or(fallback, |p| p.line() as usize);
            Error::data(Some(row), e.to_string())
        })?;
        // physical line number, so comment lines are counted
        let row = rec.position().map_or(fallback, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::data(
                Some(row),
                format!("{} columns, expected {w}", rec.len()),
            ));
        }
        if layout.is_none() {
            let lc = if labeled {
                Some(match &schema.label_column {
                    Some(c) => resolve_column(c, header.as_ref(), w)?,
                    None => w - 1,
                })
            } else {
                None
            };
            let ignored = schema
                .ignore_columns
                .iter()
                .map(|c| resolve_column(c, header.as_ref(), w))
                .collect::<Result<Vec<_>>>()?;
            layout = Some((lc, ignored));
        }
        let (lc, ignored) = layout.as_ref().expect("layout set above");

        let label = match lc {
            Some(lc) => {
                let raw_label = &rec[*lc];
                match schema.map_label(raw_label) {
                    Some(l) => Some(l),
                    None => {
                        return Err(Error::data(
                            Some(row),
                            format!("label {raw_label:?} has no class mapping"),
                        ))
                    }
                }
            }
            None => None,
        };
        let mut features = Vec::with_capacity(w);
        let mut bad = None;
        for (j, field) in rec.iter().enumerate() {
            if Some(j) == *lc || ignored.contains(&j) {
                continue;
            }
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    bad = Some((j, field.to_string()));
                    break;
                }
            }
        }
        if let Some((j, field)) = bad {
            let msg = format!("column {j} value {field:?} is not a finite number");
            if schema.skip_invalid_rows {
                warnings.push(format!("row {row} skipped: {msg}"));
                continue;
            }
            return Err(Error::data(Some(row), msg));
        }
        rows.push((features, label));
    }

    if rows.is_empty() {
        return Err(Error::data(None, format!("{origin} contains no data rows")));
    }
    Ok((rows, warnings))
}

/// Grid points per axis in the XOR set.
pub const XOR_GRID: usize = 11;
pub const XOR_JITTER: f64 = 0.05;

/// 121 points on an 11×11 grid over `[−1, 1]²`, labeled +1 when both
/// coordinates have the same sign (zero counts as positive), then jittered
/// uniformly by up to 0.05 per coordinate.
pub fn generate_xor(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = (XOR_GRID / 2) as i64;
    let mut samples = Vec::with_capacity(XOR_GRID * XOR_GRID);
    for i in -half..=half {
        for j in -half..=half {
            let label = if (i >= 0) == (j >= 0) {
                Label::Positive
            } else {
                Label::Negative
            };
            let x = i as f64 / half as f64 + rng.gen_range(-XOR_JITTER..=XOR_JITTER);
            let y = j as f64 / half as f64 + rng.gen_range(-XOR_JITTER..=XOR_JITTER);
            samples.push(Sample::new(vec![x, y], label));
        }
    }
    Dataset {
        name: "xor".to_string(),
        provenance: format!("synthetic xor grid {XOR_GRID}x{XOR_GRID}, jitter {XOR_JITTER}, seed {seed}"),
        samples,
        warnings: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    MinMax,
    ZScore,
    None,
}

impl Normalization {
    pub fn tag(self) -> &'static str {
        match self {
            Normalization::MinMax => "minmax",
            Normalization::ZScore => "zscore",
            Normalization::None => "none",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Normalization::MinMax),
            "zscore" => Ok(Normalization::ZScore),
            "none" => Ok(Normalization::None),
            other => Err(Error::Argument(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Per-feature affine map `x ↦ (x − offset) · scale`, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub method: Normalization,
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
    /// Constant features, mapped to 0.
    pub constant_features: Vec<usize>,
}

impl NormStats {
    pub fn fit(samples: &[Sample], method: Normalization) -> Result<Self> {
        let dim = samples.first().map_or(0, |s| s.features.len());
        if samples.is_empty() || dim == 0 {
            return Err(Error::Argument("cannot fit normalization on no data".to_string()));
        }
        let n = samples.len() as f64;
        let mut offset = vec![0.0; dim];
        let mut scale = vec![1.0; dim];
        let mut constant_features = Vec::new();
        if method == Normalization::None {
            return Ok(NormStats {
                method,
                offset,
                scale,
                constant_features,
            });
        }
        for j in 0..dim {
            let col = samples.iter().map(|s| s.features[j]);
            let (lo, hi) = col.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
            let (o, spread) = match method {
                Normalization::MinMax => (lo, hi - lo),
                Normalization::ZScore => {
                    let mean = col.clone().sum::<f64>() / n;
                    let var = col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    (mean, var.sqrt())
                }
                Normalization::None => unreachable!(),
            };
            if hi == lo || !(spread > 0.0) {
                constant_features.push(j);
                offset[j] = lo;
                scale[j] = 0.0;
            } else {
                offset[j] = o;
                scale[j] = 1.0 / spread;
            }
        }
        Ok(NormStats {
            method,
            offset,
            scale,
            constant_features,
        })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.offset.iter().zip(&self.scale))
            .map(|(v, (o, s))| (v - o) * s)
            .collect()
    }

    pub fn apply_samples(&self, samples: &[Sample]) -> Vec<Sample> {
        samples
            .iter()
            .map(|s| Sample::new(self.apply(&s.features), s.label))
            .collect()
    }
}

/// Fits statistics on `ds` and returns the transformed copy with them.
pub fn normalize(ds: &Dataset, method: Normalization) -> Result<(Dataset, NormStats)> {
    let stats = NormStats::fit(&ds.samples, method)?;
    let mut out = ds.clone();
    out.samples = stats.apply_samples(&ds.samples);
    if !stats.constant_features.is_empty() {
        out.warnings.push(format!(
            "constant features mapped to 0: {:?}",
            stats.constant_features
        ));
    }
    Ok((out, stats))
}

/// One entry of a benchmark manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub label_column: Option<ColumnRef>,
    #[serde(default)]
    pub ignore_columns: Vec<ColumnRef>,
    #[serde(default)]
    pub positive: Vec<String>,
    #[serde(default)]
    pub negative: Vec<String>,
    #[serde(default)]
    pub skip_invalid_rows: bool,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    #[serde(default)]
    pub expected_features: Option<usize>,
    /// Published accuracies in percent keyed by algorithm tag.
    #[serde(default)]
    pub reference: BTreeMap<String, f64>,
}

impl ManifestEntry {
    pub fn schema(&self) -> Result<CsvSchema> {
        let mut label_map = BTreeMap::new();
        for v in &self.positive {
            label_map.insert(v.clone(), Label::Positive);
        }
        for v in &self.negative {
            if label_map.insert(v.clone(), Label::Negative).is_some() {
                return Err(Error::Format(format!(
                    "{}: label {v:?} mapped to both classes",
                    self.name
                )));
            }
        }
        let delimiter = match self.delimiter {
            None => None,
            Some(c) if c.is_ascii() => Some(c as u8),
            Some(c) => return Err(Error::Format(format!("{}: delimiter {c:?} is not ASCII", self.name))),
        };
        Ok(CsvSchema {
            delimiter,
            has_header: self.has_header,
            label_column: self.label_column.clone(),
            ignore_columns: self.ignore_columns.clone(),
            label_map,
            skip_invalid_rows: self.skip_invalid_rows,
        })
    }
}

/// Run settings a manifest may carry; command-line flags override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSettings {
    pub k: Option<usize>,
    pub inner_k: Option<usize>,
    pub seed: Option<u64>,
    pub normalization: Option<String>,
    pub membership: Option<String>,
    pub algorithms: Option<Vec<String>>,
    pub grid_p: Option<Vec<f64>>,
    pub grid_c: Option<Vec<f64>>,
    pub grid_m: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub settings: ManifestSettings,
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<ManifestEntry>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        m.base_dir = base_dir.into();
        if m.datasets.is_empty() {
            return Err(Error::Format("manifest lists no datasets".to_string()));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Loads one entry; a shape that differs from the expected one is a warning.
    pub fn load_entry(&self, entry: &ManifestEntry) -> Result<Dataset> {
        let path = self.resolve(entry);
        let mut ds = load_csv(&path, &entry.schema()?)?;
        ds.name = entry.name.clone();
        if let Some(rows) = entry.expected_rows {
            if rows != ds.len() {
                ds.warnings
                    .push(format!("expected {rows} rows, found {}", ds.len()));
            }
        }
        if let Some(cols) = entry.expected_features {
            if cols != ds.dim() {
                ds.warnings
                    .push(format!("expected {cols} features, found {}", ds.dim()));
            }
        }
        Ok(ds)
    }
}
