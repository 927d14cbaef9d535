//! Shared classifier types and the crisp least squares twin SVM.
//!
//! Plane 1 stays close to the positive samples `A` while keeping the negative
//! samples `B` near `w·x + b = −1`; plane 2 is the mirror image. With
//! `E = [A e]` and `F = [B e]` the two problems reduce to
//!
//! ```text
//! [w1; b1] = −(FᵀF + EᵀE / p1)⁻¹ Fᵀe
//! [w2; b2] =  (EᵀE + FᵀF / p2)⁻¹ Eᵀe
//! ```
//!
//! and a point is assigned to the class whose plane is nearer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{augment_with_ones, dot, norm, solve_spd, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> i8 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Label> {
        match sign {
            1 => Ok(Label::Positive),
            -1 => Ok(Label::Negative),
            other => Err(Error::Argument(format!("class tag must be +1 or -1, got {other}"))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Positive => f.write_str("+1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: Label) -> Self {
        Sample { features, label }
    }
}

/// Training data split by class: `a` holds the positive samples, `b` the
/// negative ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSplit {
    a: Matrix,
    b: Matrix,
}

impl ClassSplit {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        if a.rows() == 0 || b.rows() == 0 {
            return Err(Error::Argument(format!(
                "both classes need at least one sample (got {} positive, {} negative)",
                a.rows(),
                b.rows()
            )));
        }
        if a.cols() != b.cols() {
            return Err(Error::Argument(format!(
                "class matrices disagree on feature count: {} vs {}",
                a.cols(),
                b.cols()
            )));
        }
        if a.cols() == 0 {
            return Err(Error::Argument("samples have no features".to_string()));
        }
        Ok(ClassSplit { a, b })
    }

    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for s in samples {
            match s.label {
                Label::Positive => pos.push(s.features.as_slice()),
                Label::Negative => neg.push(s.features.as_slice()),
            }
        }
        let dim = pos.first().or(neg.first()).map_or(0, |f| f.len());
        let to_matrix = |rows: &[&[f64]]| {
            if rows.is_empty() {
                Ok(Matrix::zeros(0, dim))
            } else {
                Matrix::from_rows(rows)
            }
        };
        Self::new(to_matrix(&pos)?, to_matrix(&neg)?)
    }

    /// Positive-class samples.
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// Negative-class samples.
    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    /// Samples with their labels, positives first.
    pub fn labeled_rows(&self) -> impl Iterator<Item = (&[f64], Label)> + '_ {
        self.a
            .row_iter()
            .map(|r| (r, Label::Positive))
            .chain(self.b.row_iter().map(|r| (r, Label::Negative)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    pub fn new(w: Vec<f64>, b: f64) -> Self {
        Hyperplane { w, b }
    }

    /// Splits a stacked `[w; b]` solution vector.
    pub(crate) fn from_stacked(mut z: Vec<f64>) -> Self {
        let b = z.pop().unwrap_or(0.0);
        Hyperplane { w: z, b }
    }

    pub fn decision_value(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

/// Penalty parameters of the twin problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub p1: f64,
    pub p2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { p1: 1.0, p2: 1.0 }
    }
}

impl TrainConfig {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        let cfg = TrainConfig { p1, p2 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinModel {
    pub plane1: Hyperplane,
    pub plane2: Hyperplane,
    pub config: TrainConfig,
    /// Whether each plane's system needed the ridge fallback.
    pub regularized: [bool; 2],
}

impl TwinModel {
    pub fn dim(&self) -> usize {
        self.plane1.w.len()
    }

    pub fn is_regularized(&self) -> bool {
        self.regularized.iter().any(|&r| r)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        predict_twin(self, x)
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Argument(format!(
            "point has {} features, model expects {expected}",
            x.len()
        )));
    }
    Ok(())
}

/// Trains the crisp twin model from the two closed-form systems.
pub fn train_lstsvm(split: &ClassSplit, cfg: &TrainConfig) -> Result<TwinModel> {
    cfg.validate()?;
    let e = augment_with_ones(split.a())?;
    let f = augment_with_ones(split.b())?;
    let ete = e.weighted_gram(None);
    let ftf = f.weighted_gram(None);

    let sys1 = ftf.add_scaled(&ete, 1.0 / cfg.p1)?;
    let rhs1: Vec<f64> = f.weighted_column_sums(None).iter().map(|v| -v).collect();
    let sol1 = solve_spd(&sys1, &rhs1)?;

    let sys2 = ete.add_scaled(&ftf, 1.0 / cfg.p2)?;
    let rhs2 = e.weighted_column_sums(None);
    let sol2 = solve_spd(&sys2, &rhs2)?;

    Ok(TwinModel {
        plane1: Hyperplane::from_stacked(sol1.x),
        plane2: Hyperplane::from_stacked(sol2.x),
        config: *cfg,
        regularized: [sol1.regularized, sol2.regularized],
    })
}

/// Euclidean distance `|w·x + b| / ‖w‖` from `x` to the plane.
pub fn plane_distance(h: &Hyperplane, x: &[f64]) -> Result<f64> {
    check_dim(h.w.len(), x)?;
    let wn = norm(&h.w);
    if !(wn > 0.0) {
        return Err(Error::Model("hyperplane has a zero weight vector".to_string()));
    }
    Ok(h.decision_value(x).abs() / wn)
}

/// Nearest-plane rule; exact ties go to the positive class.
pub fn predict_twin(model: &TwinModel, x: &[f64]) -> Result<Label> {
    check_dim(model.dim(), x)?;
    let d1 = plane_distance(&model.plane1, x)?;
    let d2 = plane_distance(&model.plane2, x)?;
    Ok(if d1 <= d2 { Label::Positive } else { Label::Negative })
}
