//! Linear soft-margin SVM baseline.
//!
//! Minimizes `½‖w‖² + C Σ max(0, 1 − yᵢ(w·xᵢ + b))` through its dual with
//! sequential minimal optimization and second-order working-set selection.
//! The bias is not regularized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{ClassSplit, Hyperplane, Label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub max_iterations: usize,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_iterations: 200_000,
            tolerance: 1e-6,
        }
    }
}

impl SvmConfig {
    pub fn with_c(c: f64) -> Self {
        SvmConfig {
            c,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::Argument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::Argument(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub plane: Hyperplane,
    pub config: SvmConfig,
    pub converged: bool,
    pub iterations: usize,
}

impl LinearSvm {
    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        predict_svm(&self.plane, x)
    }
}

/// Primal objective `½‖w‖² + C Σ hinge` of `plane` on `split`.
pub fn hinge_objective(split: &ClassSplit, plane: &Hyperplane, c: f64) -> f64 {
    let loss: f64 = split
        .labeled_rows()
        .map(|(x, y)| (1.0 - f64::from(y.sign()) * plane.decision_value(x)).max(0.0))
        .sum();
    0.5 * dot(&plane.w, &plane.w) + c * loss
}

const TAU: f64 = 1e-12;

pub fn train_linear_svm(split: &ClassSplit, cfg: &SvmConfig) -> Result<LinearSvm> {
    cfg.validate()?;
    let (xs, ys): (Vec<&[f64]>, Vec<f64>) = split
        .labeled_rows()
        .map(|(x, y)| (x, f64::from(y.sign())))
        .unzip();
    let n = xs.len();
    let c = cfg.c;

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = ys[i] * ys[j] * dot(xs[i], xs[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        // i maximizes −y G over the up set
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            for t in 0..n {
                if !low(alpha[t], ys[t]) {
                    continue;
                }
                let v = -ys[t] * grad[t];
                gmin = gmin.min(v);
                let diff = gmax - v;
                if diff > 0.0 {
                    let curv = q[i * n + i] + q[t * n + t] - 2.0 * ys[i] * ys[t] * q[i * n + t];
                    let gain = -(diff * diff) / curv.max(TAU);
                    if gain <= best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if gmax - gmin < cfg.tolerance {
            converged = true;
            break;
        }
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            converged = true;
            break;
        };
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if ys[i] != ys[j] {
            let curv = (q[i * n + i] + q[j * n + j] + 2.0 * q[i * n + j]).max(TAU);
            let delta = (-grad[i] - grad[j]) / curv;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let curv = (q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j]).max(TAU);
            let delta = (grad[i] - grad[j]) / curv;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q[t * n + i] * di + q[t * n + j] * dj;
        }
    }

    let dim = split.dim();
    let mut w = vec![0.0; dim];
    for t in 0..n {
        if alpha[t] != 0.0 {
            for (wk, xk) in w.iter_mut().zip(xs[t]) {
                *wk += alpha[t] * ys[t] * xk;
            }
        }
    }
    let b = -bias_offset(&alpha, &grad, &ys, c);

    Ok(LinearSvm {
        plane: Hyperplane::new(w, b),
        config: *cfg,
        converged,
        iterations,
    })
}

/// Offset `ρ` with decision value `w·x − ρ`: the mean of `y G` over free
/// multipliers, or the midpoint of the feasible interval when none is free.
fn bias_offset(alpha: &[f64], grad: &[f64], ys: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum += yg;
        }
    }
    if free > 0 {
        sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Sign of the decision value; points on the boundary are positive.
pub fn predict_svm(h: &Hyperplane, x: &[f64]) -> Result<Label> {
    if x.len() != h.w.len() {
        return Err(Error::Argument(format!(
            "point has {} features, model expects {}",
            x.len(),
            h.w.len()
        )));
    }
    Ok(if h.decision_value(x) >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    })
}
