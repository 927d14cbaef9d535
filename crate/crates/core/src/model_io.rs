//! Plain-text model documents.
//!
//! One `key = value` pair per line, `#` starts a comment. Reals are written
//! with 17 significant digits so a save/load round trip is lossless; vectors
//! are comma separated. Example:
//!
//! ```text
//! format = flstsvm-model
//! version = 1
//! algorithm = lstsvm
//! config.p1 = 1.0000000000000000e0
//! config.p2 = 1.0000000000000000e0
//! plane1.w = 5.0000000000000000e-1,0.0000000000000000e0
//! plane1.b = -1.0000000000000000e0
//! plane1.regularized = false
//! ...
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::TrainedModel;
use crate::data::{NormStats, Normalization};
use crate::error::{Error, Result};
use crate::fuzzy_m1::{M1Model, MembershipVector};
use crate::fuzzy_m2::{FuzzyHyperplane, FuzzyPlaneFit, M2Config, M2Model};
use crate::model::{Hyperplane, TrainConfig, TwinModel};
use crate::svm::{LinearSvm, SvmConfig};

pub const FORMAT_NAME: &str = "flstsvm-model";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model with the preprocessing it expects and free-form metadata
/// (seed, membership strategy, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    pub model: TrainedModel,
    pub normalization: Option<NormStats>,
    pub meta: BTreeMap<String, String>,
}

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_real(*x)).collect::<Vec<_>>().join(",")
}

struct Writer(String);

impl Writer {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn real(&mut self, key: &str, v: f64) {
        self.kv(key, fmt_real(v));
    }

    fn vec(&mut self, key: &str, v: &[f64]) {
        self.kv(key, fmt_vec(v));
    }

    fn plane(&mut self, prefix: &str, h: &Hyperplane, regularized: bool) {
        self.vec(&format!("{prefix}.w"), &h.w);
        self.real(&format!("{prefix}.b"), h.b);
        self.kv(&format!("{prefix}.regularized"), regularized);
    }

    fn twin(&mut self, m: &TwinModel) {
        self.real("config.p1", m.config.p1);
        self.real("config.p2", m.config.p2);
        self.plane("plane1", &m.plane1, m.regularized[0]);
        self.plane("plane2", &m.plane2, m.regularized[1]);
    }

    fn fuzzy(&mut self, prefix: &str, fit: &FuzzyPlaneFit) {
        let h = &fit.plane;
        self.vec(&format!("{prefix}.w"), &h.w);
        self.real(&format!("{prefix}.b"), h.b);
        self.vec(&format!("{prefix}.c"), &h.c);
        self.real(&format!("{prefix}.d"), h.d);
        self.vec(&format!("{prefix}.stationary"), &fit.stationary);
        self.kv(&format!("{prefix}.regularized"), fit.regularized);
        self.kv(&format!("{prefix}.projected"), fit.projected);
    }
}

impl ModelDocument {
    pub fn new(model: TrainedModel) -> Self {
        ModelDocument {
            model,
            normalization: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut w = Writer(String::new());
        w.kv("format", FORMAT_NAME);
        w.kv("version", FORMAT_VERSION);
        w.kv("algorithm", self.model.algorithm().tag());
        match &self.model {
            TrainedModel::Svm(m) => {
                w.real("config.C", m.config.c);
                w.kv("config.max_iterations", m.config.max_iterations);
                w.real("config.tolerance", m.config.tolerance);
                w.plane("plane", &m.plane, false);
                w.kv("converged", m.converged);
                w.kv("iterations", m.iterations);
            }
            TrainedModel::Lstsvm(m) => w.twin(m),
            TrainedModel::M1(m) => {
                w.twin(&m.twin);
                w.vec("membership.a", m.mu_a.values());
                w.vec("membership.b", m.mu_b.values());
            }
            TrainedModel::M2(m) => {
                w.real("config.p1", m.config.p1);
                w.real("config.p2", m.config.p2);
                w.real("config.M", m.config.m);
                w.fuzzy("plane1", &m.h1);
                w.fuzzy("plane2", &m.h2);
            }
        }
        if let Some(n) = &self.normalization {
            w.kv("normalization.method", n.method.tag());
            w.vec("normalization.offset", &n.offset);
            w.vec("normalization.scale", &n.scale);
            w.kv(
                "normalization.constant",
                n.constant_features
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        for (k, v) in &self.meta {
            w.kv(&format!("meta.{k}"), v);
        }
        w.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let doc = Fields::parse(text)?;
        if doc.str("format")? != FORMAT_NAME {
            return Err(Error::Format(format!("not a {FORMAT_NAME} document")));
        }
        let version: u32 = doc.parsed("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let model = match doc.str("algorithm")? {
            "svm" => TrainedModel::Svm(LinearSvm {
                plane: doc.plane("plane")?,
                config: SvmConfig {
                    c: doc.real("config.C")?,
                    max_iterations: doc.parsed("config.max_iterations")?,
                    tolerance: doc.real("config.tolerance")?,
                },
                converged: doc.parsed("converged")?,
                iterations: doc.parsed("iterations")?,
            }),
            "lstsvm" => TrainedModel::Lstsvm(doc.twin()?),
            "m1" => TrainedModel::M1(M1Model {
                twin: doc.twin()?,
                mu_a: MembershipVector::new(doc.vec("membership.a")?)?,
                mu_b: MembershipVector::new(doc.vec("membership.b")?)?,
            }),
            "m2" => TrainedModel::M2(M2Model {
                h1: doc.fuzzy("plane1")?,
                h2: doc.fuzzy("plane2")?,
                config: M2Config {
                    p1: doc.real("config.p1")?,
                    p2: doc.real("config.p2")?,
                    m: doc.real("config.M")?,
                },
            }),
            other => return Err(Error::Format(format!("unknown algorithm {other:?}"))),
        };

        let normalization = if doc.has("normalization.method") {
            let method: Normalization = doc.str("normalization.method")?.parse()?;
            let constant = doc.str("normalization.constant")?;
            Some(NormStats {
                method,
                offset: doc.vec("normalization.offset")?,
                scale: doc.vec("normalization.scale")?,
                constant_features: if constant.is_empty() {
                    Vec::new()
                } else {
                    constant
                        .split(',')
                        .map(|s| s.trim().parse().map_err(|_| Error::Format(format!("bad index {s:?}"))))
                        .collect::<Result<_>>()?
                },
            })
        } else {
            None
        };
        let meta = doc
            .0
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v.clone())))
            .collect();
        Ok(ModelDocument {
            model,
            normalization,
            meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", i + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Format(format!("line {}: duplicate key {}", i + 1, k.trim())));
            }
        }
        Ok(Fields(map))
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn str(&self, key: &str) -> Result<&str> {
        self.0
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("missing key {key}")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("{key}: cannot parse {raw:?}")))
    }

    fn real(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parsed(key)?;
        if !v.is_finite() {
            return Err(Error::Format(format!("{key}: non-finite value")));
        }
        Ok(v)
    }

    fn vec(&self, key: &str) -> Result<Vec<f64>> {
        let raw = self.str(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Format(format!("{key}: cannot parse {s:?}"))),
            })
            .collect()
    }

    fn plane(&self, prefix: &str) -> Result<Hyperplane> {
        Ok(Hyperplane::new(
            self.vec(&format!("{prefix}.w"))?,
            self.real(&format!("{prefix}.b"))?,
        ))
    }

    fn twin(&self) -> Result<TwinModel> {
        let plane1 = self.plane("plane1")?;
        let plane2 = self.plane("plane2")?;
        if plane1.w.len() != plane2.w.len() {
            return Err(Error::Format("planes disagree on dimension".to_string()));
        }
        Ok(TwinModel {
            plane1,
            plane2,
            config: TrainConfig::new(self.real("config.p1")?, self.real("config.p2")?)?,
            regularized: [
                self.parsed("plane1.regularized")?,
                self.parsed("plane2.regularized")?,
            ],
        })
    }

    fn fuzzy(&self, prefix: &str) -> Result<FuzzyPlaneFit> {
        let key = |s: &str| format!("{prefix}.{s}");
        let plane = FuzzyHyperplane {
            w: self.vec(&key("w"))?,
            b: self.real(&key("b"))?,
            c: self.vec(&key("c"))?,
            d: self.real(&key("d"))?,
        };
        if plane.c.len() != plane.w.len() {
            return Err(Error::Format(format!("{prefix}: widths and centers differ in length")));
        }
        if plane.c.iter().any(|&c| c < 0.0) || plane.d < 0.0 {
            return Err(Error::Format(format!("{prefix}: negative width")));
        }
        Ok(FuzzyPlaneFit {
            plane,
            stationary: self.vec(&key("stationary"))?,
            regularized: self.parsed(&key("regularized"))?,
            projected: self.parsed(&key("projected"))?,
        })
    }
}
