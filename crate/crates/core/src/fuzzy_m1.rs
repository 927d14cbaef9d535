//! Fuzzy LSTSVM with membership-weighted errors and crisp planes (model M1).
//!
//! The slack of plane 1 is produced by the negative samples, so plane 1 is
//! weighted by `μB`; plane 2 is weighted by `μA`. With `S = diag(μ)`:
//!
//! ```text
//! [w1; b1] = −(FᵀS_B F + EᵀE / p1)⁻¹ FᵀS_B e
//! [w2; b2] =  (EᵀS_A E + FᵀF / p2)⁻¹ EᵀS_A e
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{augment_with_ones, norm, solve_spd, Matrix};
use crate::model::{predict_twin, ClassSplit, Hyperplane, Label, TrainConfig, TwinModel};

/// Offset keeping the farthest sample's centroid membership above zero.
pub const CENTROID_EPSILON: f64 = 1e-6;
/// Lower clamp for centroid memberships.
pub const MEMBERSHIP_FLOOR: f64 = 0.05;

/// Per-sample importance degrees, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MembershipVector(Vec<f64>);

impl MembershipVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && **v <= 1.0))
        {
            return Err(Error::Argument(format!(
                "membership {i} is {v}, expected a value in (0, 1]"
            )));
        }
        Ok(MembershipVector(values))
    }

    pub fn uniform(len: usize) -> Self {
        MembershipVector(vec![1.0; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MembershipStrategy {
    /// Every sample gets membership 1.
    Uniform,
    /// Distance to the class centroid, scaled into `[0.05, 1]`.
    Centroid,
    /// Caller-supplied degrees for the positive and negative samples.
    User { a: Vec<f64>, b: Vec<f64> },
}

impl MembershipStrategy {
    pub fn tag(&self) -> &'static str {
        match self {
            MembershipStrategy::Uniform => "uniform",
            MembershipStrategy::Centroid => "centroid",
            MembershipStrategy::User { .. } => "user",
        }
    }
}

pub fn assign_memberships(
    split: &ClassSplit,
    strategy: &MembershipStrategy,
) -> Result<(MembershipVector, MembershipVector)> {
    let (m1, m2) = (split.a().rows(), split.b().rows());
    match strategy {
        MembershipStrategy::Uniform => {
            Ok((MembershipVector::uniform(m1), MembershipVector::uniform(m2)))
        }
        MembershipStrategy::Centroid => Ok((centroid_memberships(split.a()), centroid_memberships(split.b()))),
        MembershipStrategy::User { a, b } => {
            if a.len() != m1 || b.len() != m2 {
                return Err(Error::Argument(format!(
                    "expected {m1} positive and {m2} negative memberships, got {} and {}",
                    a.len(),
                    b.len()
                )));
            }
            Ok((MembershipVector::new(a.clone())?, MembershipVector::new(b.clone())?))
        }
    }
}

fn centroid_memberships(class: &Matrix) -> MembershipVector {
    let n = class.rows() as f64;
    let centroid: Vec<f64> = class.weighted_column_sums(None).iter().map(|s| s / n).collect();
    let dists: Vec<f64> = class
        .row_iter()
        .map(|r| {
            let diff: Vec<f64> = r.iter().zip(&centroid).map(|(x, c)| x - c).collect();
            norm(&diff)
        })
        .collect();
    let d_max = dists.iter().copied().fold(0.0, f64::max);
    MembershipVector(
        dists
            .iter()
            .map(|d| (1.0 - d / (d_max + CENTROID_EPSILON)).clamp(MEMBERSHIP_FLOOR, 1.0))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M1Model {
    pub twin: TwinModel,
    pub mu_a: MembershipVector,
    pub mu_b: MembershipVector,
}

impl M1Model {
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        predict_twin(&self.twin, x)
    }
}

pub fn train_m1(
    split: &ClassSplit,
    mu_a: &MembershipVector,
    mu_b: &MembershipVector,
    cfg: &TrainConfig,
) -> Result<M1Model> {
    cfg.validate()?;
    if mu_a.len() != split.a().rows() || mu_b.len() != split.b().rows() {
        return Err(Error::Argument(format!(
            "membership lengths ({}, {}) do not match class sizes ({}, {})",
            mu_a.len(),
            mu_b.len(),
            split.a().rows(),
            split.b().rows()
        )));
    }
    let e = augment_with_ones(split.a())?;
    let f = augment_with_ones(split.b())?;

    let sys1 = f
        .weighted_gram(Some(mu_b.values()))
        .add_scaled(&e.weighted_gram(None), 1.0 / cfg.p1)?;
    let rhs1: Vec<f64> = f
        .weighted_column_sums(Some(mu_b.values()))
        .iter()
        .map(|v| -v)
        .collect();
    let sol1 = solve_spd(&sys1, &rhs1)?;

    let sys2 = e
        .weighted_gram(Some(mu_a.values()))
        .add_scaled(&f.weighted_gram(None), 1.0 / cfg.p2)?;
    let rhs2 = e.weighted_column_sums(Some(mu_a.values()));
    let sol2 = solve_spd(&sys2, &rhs2)?;

    Ok(M1Model {
        twin: TwinModel {
            plane1: Hyperplane::from_stacked(sol1.x),
            plane2: Hyperplane::from_stacked(sol2.x),
            config: *cfg,
            regularized: [sol1.regularized, sol2.regularized],
        },
        mu_a: mu_a.clone(),
        mu_b: mu_b.clone(),
    })
}
