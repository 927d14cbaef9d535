//! Uniform front over the four trainers, used by the harness and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy_m1::{assign_memberships, train_m1, M1Model, MembershipStrategy};
use crate::fuzzy_m2::{predict_m2, train_m2, M2Config, M2Model};
use crate::model::{predict_twin, train_lstsvm, ClassSplit, Label, TrainConfig, TwinModel};
use crate::svm::{train_linear_svm, LinearSvm, SvmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Svm,
    Lstsvm,
    M1,
    M2,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Svm, Algorithm::Lstsvm, Algorithm::M1, Algorithm::M2];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Svm => "svm",
            Algorithm::Lstsvm => "lstsvm",
            Algorithm::M1 => "m1",
            Algorithm::M2 => "m2",
        }
    }

    pub fn uses_memberships(self) -> bool {
        matches!(self, Algorithm::M1 | Algorithm::M2)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(Algorithm::Svm),
            "lstsvm" => Ok(Algorithm::Lstsvm),
            "m1" | "flstsvm-m1" => Ok(Algorithm::M1),
            "m2" | "flstsvm-m2" | "flstsvm" => Ok(Algorithm::M2),
            other => Err(Error::Argument(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Every tunable knob; each algorithm reads only its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub p1: f64,
    pub p2: f64,
    pub c: f64,
    pub m: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            p1: 1.0,
            p2: 1.0,
            c: 1.0,
            m: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn twin(&self) -> TrainConfig {
        TrainConfig {
            p1: self.p1,
            p2: self.p2,
        }
    }

    pub fn m2(&self) -> M2Config {
        M2Config {
            p1: self.p1,
            p2: self.p2,
            m: self.m,
        }
    }

    pub fn svm(&self) -> SvmConfig {
        SvmConfig::with_c(self.c)
    }

    /// Only the parameters `algo` actually uses, in a fixed order.
    pub fn relevant(&self, algo: Algorithm) -> Vec<(&'static str, f64)> {
        match algo {
            Algorithm::Svm => vec![("C", self.c)],
            Algorithm::Lstsvm | Algorithm::M1 => vec![("p1", self.p1), ("p2", self.p2)],
            Algorithm::M2 => vec![("p1", self.p1), ("p2", self.p2), ("M", self.m)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerSpec {
    pub algorithm: Algorithm,
    pub params: Hyperparams,
    pub membership: MembershipStrategy,
}

impl TrainerSpec {
    pub fn new(algorithm: Algorithm, params: Hyperparams) -> Self {
        TrainerSpec {
            algorithm,
            params,
            membership: MembershipStrategy::Centroid,
        }
    }

    pub fn fit(&self, split: &ClassSplit) -> Result<TrainedModel> {
        let p = &self.params;
        Ok(match self.algorithm {
            Algorithm::Svm => TrainedModel::Svm(train_linear_svm(split, &p.svm())?),
            Algorithm::Lstsvm => TrainedModel::Lstsvm(train_lstsvm(split, &p.twin())?),
            Algorithm::M1 => {
                let (mu_a, mu_b) = assign_memberships(split, &self.membership)?;
                TrainedModel::M1(train_m1(split, &mu_a, &mu_b, &p.twin())?)
            }
            Algorithm::M2 => {
                let (mu_a, mu_b) = assign_memberships(split, &self.membership)?;
                TrainedModel::M2(train_m2(split, &mu_a, &mu_b, &p.m2())?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(LinearSvm),
    Lstsvm(TwinModel),
    M1(M1Model),
    M2(M2Model),
}

/// A class decision plus, for M2, the two plane membership degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub memberships: Option<(f64, f64)>,
}

impl TrainedModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Svm(_) => Algorithm::Svm,
            TrainedModel::Lstsvm(_) => Algorithm::Lstsvm,
            TrainedModel::M1(_) => Algorithm::M1,
            TrainedModel::M2(_) => Algorithm::M2,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Svm(m) => m.plane.w.len(),
            TrainedModel::Lstsvm(m) => m.dim(),
            TrainedModel::M1(m) => m.twin.dim(),
            TrainedModel::M2(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let crisp = |label| Prediction {
            label,
            memberships: None,
        };
        Ok(match self {
            TrainedModel::Svm(m) => crisp(m.predict(x)?),
            TrainedModel::Lstsvm(m) => crisp(predict_twin(m, x)?),
            TrainedModel::M1(m) => crisp(predict_twin(&m.twin, x)?),
            TrainedModel::M2(m) => {
                let p = predict_m2(m, x)?;
                Prediction {
                    label: p.label,
                    memberships: Some((p.mu1, p.mu2)),
                }
            }
        })
    }

    /// Notes about solver fallbacks worth surfacing in reports.
    pub fn flags(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        match self {
            TrainedModel::Svm(m) => {
                if !m.converged {
                    out.push("not-converged");
                }
            }
            TrainedModel::Lstsvm(m) | TrainedModel::M1(M1Model { twin: m, .. }) => {
                if m.is_regularized() {
                    out.push("regularized");
                }
            }
            TrainedModel::M2(m) => {
                if m.h1.regularized || m.h2.regularized {
                    out.push("regularized");
                }
                if m.h1.projected || m.h2.projected {
                    out.push("projected");
                }
            }
        }
        out
    }
}
