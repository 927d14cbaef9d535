//! Fuzzy LSTSVM with fuzzy hyperplanes (model M2).
//!
//! Every weight and the bias are symmetric triangular fuzzy numbers, so a
//! plane evaluated at `x` yields the fuzzy value
//! `(w·x + b, c·|x| + d)` (center, width). Plane 1 minimizes
//!
//! ```text
//! ½‖Aw + eb‖² + M(½‖c‖² + d) + (p1/2) Σ_j μB_j ξ_j²,   ξ_j = 1 + (w·x_j + b) − (c·|x_j| + d)
//! ```
//!
//! over the negative samples `x_j`: the lower end of each negative sample's
//! fuzzy value is pulled to −1 and the widths buy slack at price `M`. Plane 2
//! is the mirror image with the upper end of each positive sample's value
//! pulled to +1, weighted by `μA`. Zeroing the gradient in the stacked
//! unknowns `(w, b, c, d)` gives one symmetric linear system per plane.
//!
//! Widths must be nonnegative. When the stationary point has negative widths,
//! those widths are pinned to zero and the remaining unknowns re-solved
//! (a bound-constrained active-set iteration) and the plane is marked
//! as projected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy_m1::MembershipVector;
use crate::linalg::{dot, norm, solve_spd, Matrix};
use crate::model::{ClassSplit, Label};

/// Symmetric triangular fuzzy number with center `o` and width `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularFuzzyNumber {
    pub o: f64,
    pub r: f64,
}

impl TriangularFuzzyNumber {
    pub fn new(o: f64, r: f64) -> Result<Self> {
        if !(r >= 0.0) || !o.is_finite() || !r.is_finite() {
            return Err(Error::Argument(format!(
                "triangular fuzzy number needs finite center and width >= 0, got ({o}, {r})"
            )));
        }
        Ok(TriangularFuzzyNumber { o, r })
    }

    /// Degree to which `x` belongs to the number.
    pub fn membership(&self, x: f64) -> f64 {
        let gap = (x - self.o).abs();
        if self.r == 0.0 {
            return if gap == 0.0 { 1.0 } else { 0.0 };
        }
        (1.0 - gap / self.r).max(0.0)
    }

    pub fn add(self, other: Self) -> Self {
        TriangularFuzzyNumber {
            o: self.o + other.o,
            r: self.r + other.r,
        }
    }

    /// Product with a crisp scalar.
    pub fn scale(self, k: f64) -> Self {
        TriangularFuzzyNumber {
            o: k * self.o,
            r: k.abs() * self.r,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyHyperplane {
    /// Weight centers.
    pub w: Vec<f64>,
    /// Weight widths, elementwise nonnegative.
    pub c: Vec<f64>,
    /// Bias center.
    pub b: f64,
    /// Bias width.
    pub d: f64,
}

impl FuzzyHyperplane {
    pub fn weight(&self, i: usize) -> TriangularFuzzyNumber {
        TriangularFuzzyNumber {
            o: self.w[i],
            r: self.c[i],
        }
    }

    pub fn bias(&self) -> TriangularFuzzyNumber {
        TriangularFuzzyNumber { o: self.b, r: self.d }
    }

    /// Fuzzy value `W·x + B` at a crisp point.
    pub fn evaluate(&self, x: &[f64]) -> TriangularFuzzyNumber {
        (0..self.w.len())
            .map(|i| self.weight(i).scale(x[i]))
            .fold(self.bias(), TriangularFuzzyNumber::add)
    }

    /// `½‖c‖² + d`.
    pub fn vagueness(&self) -> f64 {
        0.5 * dot(&self.c, &self.c) + self.d
    }

    fn from_stacked(z: &[f64]) -> Self {
        let n = (z.len() - 2) / 2;
        FuzzyHyperplane {
            w: z[..n].to_vec(),
            b: z[n],
            c: z[n + 1..2 * n + 1].to_vec(),
            d: z[2 * n + 1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M2Config {
    pub p1: f64,
    pub p2: f64,
    /// Price of vagueness.
    pub m: f64,
}

impl Default for M2Config {
    fn default() -> Self {
        M2Config {
            p1: 1.0,
            p2: 1.0,
            m: 1.0,
        }
    }
}

impl M2Config {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("M", self.m)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Center distance `delta` and spread distance `gamma` from a point to a
/// fuzzy hyperplane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyDistance {
    pub delta: f64,
    pub gamma: f64,
}

/// One trained fuzzy plane plus how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPlaneFit {
    pub plane: FuzzyHyperplane,
    /// Stationary point of the unconstrained objective, stacked as `(w, b, c, d)`.
    pub stationary: Vec<f64>,
    pub regularized: bool,
    /// Whether any width had to be pinned at zero.
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M2Model {
    pub h1: FuzzyPlaneFit,
    pub h2: FuzzyPlaneFit,
    pub config: M2Config,
}

impl M2Model {
    pub fn dim(&self) -> usize {
        self.h1.plane.w.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<M2Prediction> {
        predict_m2(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2Prediction {
    pub label: Label,
    pub mu1: f64,
    pub mu2: f64,
}

/// Which end of the other class's fuzzy value a plane pulls onto its target.
#[derive(Debug, Clone, Copy)]
enum Target {
    /// Lower end to −1 (plane 1).
    Negative,
    /// Upper end to +1 (plane 2).
    Positive,
}

/// Linear system `H z = r` obtained by zeroing the gradient of one plane's
/// objective in `z = (w, b, c, d)`.
struct PlaneSystem {
    h: Matrix,
    rhs: Vec<f64>,
}

fn assemble(own: &Matrix, other: &Matrix, mu: &[f64], p: f64, m: f64, target: Target) -> PlaneSystem {
    let n = own.cols();
    let dim = 2 * n + 2;
    let t = match target {
        Target::Negative => -1.0,
        Target::Positive => 1.0,
    };
    let mut h = Matrix::zeros(dim, dim);
    let mut rhs = vec![0.0; dim];

    let mut row = vec![0.0; dim];
    for x in own.row_iter() {
        row[..n].copy_from_slice(x);
        row[n] = 1.0;
        add_outer(&mut h, &row[..n + 1], 1.0);
    }

    // slack ξ = 1 − g·z with g = (t·x, t, |x|, 1)
    for (x, &mu_j) in other.row_iter().zip(mu) {
        for i in 0..n {
            row[i] = t * x[i];
            row[n + 1 + i] = x[i].abs();
        }
        row[n] = t;
        row[dim - 1] = 1.0;
        let weight = p * mu_j;
        add_outer(&mut h, &row, weight);
        for (r, g) in rhs.iter_mut().zip(&row) {
            *r += weight * g;
        }
    }

    for i in n + 1..dim - 1 {
        h[(i, i)] += m;
    }
    rhs[dim - 1] -= m;
    PlaneSystem { h, rhs }
}

/// `h[..k, ..k] += weight · v vᵀ` for `k = v.len()`.
fn add_outer(h: &mut Matrix, v: &[f64], weight: f64) {
    for i in 0..v.len() {
        let wi = weight * v[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..v.len() {
            h[(i, j)] += wi * v[j];
        }
    }
}

fn solve_plane(sys: &PlaneSystem, n: usize) -> Result<FuzzyPlaneFit> {
    let raw = solve_spd(&sys.h, &sys.rhs)?;
    let spreads: Vec<usize> = (n + 1..2 * n + 2).collect();
    let mut regularized = raw.regularized;

    let mut pinned: Vec<bool> = vec![false; 2 * n + 2];
    for &i in &spreads {
        pinned[i] = raw.x[i] < 0.0;
    }
    if !pinned.iter().any(|&p| p) {
        return Ok(FuzzyPlaneFit {
            plane: FuzzyHyperplane::from_stacked(&raw.x),
            stationary: raw.x,
            regularized,
            projected: false,
        });
    }

    let release_tol = 1e-12 * (1.0 + sys.rhs.iter().fold(0.0_f64, |a, v| a.max(v.abs())));
    let mut z = raw.x.clone();
    let max_rounds = 4 * spreads.len() + 8;
    for _ in 0..max_rounds {
        let free: Vec<usize> = (0..z.len()).filter(|&i| !pinned[i]).collect();
        let sub = sys.h.principal_submatrix(&free);
        let sub_rhs: Vec<f64> = free.iter().map(|&i| sys.rhs[i]).collect();
        let sol = solve_spd(&sub, &sub_rhs)?;
        regularized |= sol.regularized;
        z.iter_mut().for_each(|v| *v = 0.0);
        for (&i, v) in free.iter().zip(&sol.x) {
            z[i] = *v;
        }

        let negative: Vec<usize> = spreads.iter().copied().filter(|&i| !pinned[i] && z[i] < 0.0).collect();
        if !negative.is_empty() {
            for i in negative {
                pinned[i] = true;
            }
            continue;
        }

        // pinned widths must have a nonnegative gradient at the bound
        let hz = sys.h.mul_vec(&z)?;
        let release = spreads
            .iter()
            .copied()
            .filter(|&i| pinned[i])
            .map(|i| (i, hz[i] - sys.rhs[i]))
            .filter(|&(_, g)| g < -release_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match release {
            Some((i, _)) => pinned[i] = false,
            None => break,
        }
    }
    for &i in &spreads {
        z[i] = z[i].max(0.0);
    }

    Ok(FuzzyPlaneFit {
        plane: FuzzyHyperplane::from_stacked(&z),
        stationary: raw.x,
        regularized,
        projected: true,
    })
}

pub fn train_m2(
    split: &ClassSplit,
    mu_a: &MembershipVector,
    mu_b: &MembershipVector,
    cfg: &M2Config,
) -> Result<M2Model> {
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
    let n = split.dim();
    let sys1 = assemble(split.a(), split.b(), mu_b.values(), cfg.p1, cfg.m, Target::Negative);
    let sys2 = assemble(split.b(), split.a(), mu_a.values(), cfg.p2, cfg.m, Target::Positive);
    Ok(M2Model {
        h1: solve_plane(&sys1, n)?,
        h2: solve_plane(&sys2, n)?,
        config: *cfg,
    })
}

/// `delta = |w·x + b| / ‖w‖` and `gamma = |(w + c)·x| / ‖w‖`, with `‖w‖`
/// the norm of the weight centers.
pub fn fuzzy_distance(h: &FuzzyHyperplane, x: &[f64]) -> Result<FuzzyDistance> {
    if x.len() != h.w.len() || h.c.len() != h.w.len() {
        return Err(Error::Argument(format!(
            "point has {} features, fuzzy plane expects {}",
            x.len(),
            h.w.len()
        )));
    }
    let wn = norm(&h.w);
    if !(wn > 0.0) {
        return Err(Error::Model("fuzzy hyperplane has zero weight centers".to_string()));
    }
    let delta = (dot(&h.w, x) + h.b).abs() / wn;
    let gamma = h.w.iter().zip(&h.c).zip(x).map(|((w, c), xi)| (w + c) * xi).sum::<f64>().abs() / wn;
    Ok(FuzzyDistance { delta, gamma })
}

/// Degree that a point with distance `own` to one plane and `other` to the
/// other belongs to the first plane, or `None` when the case denominator is 0.
fn plane_degree(own: FuzzyDistance, other: FuzzyDistance) -> Option<f64> {
    let (d1, g1, d2, g2) = (own.delta, own.gamma, other.delta, other.gamma);
    let (num, den) = match (d1 >= g1, d2 >= g2) {
        (true, true) => (d1 + g1, d1 + g1 + d2 + g2),
        (false, true) => (d1, d1 + d2 + g2),
        (true, false) => (d1 + g1, d1 + g1 + d2),
        (false, false) => (d1, d1 + d2),
    };
    (den > 0.0).then(|| 1.0 - num / den)
}

/// Membership degrees `(μ1, μ2)` of a point in the two fuzzy planes.
pub fn hyperplane_membership(d1: FuzzyDistance, d2: FuzzyDistance) -> Result<(f64, f64)> {
    for v in [d1.delta, d1.gamma, d2.delta, d2.gamma] {
        if !(v >= 0.0) {
            return Err(Error::Argument(format!("fuzzy distances must be nonnegative, got {v}")));
        }
    }
    match (plane_degree(d1, d2), plane_degree(d2, d1)) {
        (Some(m1), Some(m2)) => Ok((m1, m2)),
        _ => Ok((0.5, 0.5)),
    }
}

/// Picks the plane with the larger membership degree; ties go positive.
pub fn predict_m2(model: &M2Model, x: &[f64]) -> Result<M2Prediction> {
    let d1 = fuzzy_distance(&model.h1.plane, x)?;
    let d2 = fuzzy_distance(&model.h2.plane, x)?;
    let (mu1, mu2) = hyperplane_membership(d1, d2)?;
    let label = if mu2 > mu1 { Label::Negative } else { Label::Positive };
    Ok(M2Prediction { label, mu1, mu2 })
}
