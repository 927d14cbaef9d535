//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls the library's solvers: objectives are written out
//! sample by sample, minimized with a derivative-free-gradient conjugate
//! gradient method, and small linear systems use Gaussian elimination.

#![allow(dead_code)]

use flstsvm::{ClassSplit, Dataset, Label, Matrix, Sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two overlapping Gaussian-ish clouds in `[-1, 1]^d`, shifted apart.
pub fn random_split(rng: &mut ChaCha8Rng, per_class: (usize, usize), dim: usize) -> ClassSplit {
    let mut class = |n: usize, shift: f64| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0) + shift).collect())
            .collect();
        Matrix::from_rows(&rows).unwrap()
    };
    let a = class(per_class.0, 0.4);
    let b = class(per_class.1, -0.4);
    ClassSplit::new(a, b).unwrap()
}

/// A split with at most 8 points and at most 3 features.
pub fn small_split(rng: &mut ChaCha8Rng) -> ClassSplit {
    let dim = rng.gen_range(1..=3);
    let na = rng.gen_range(2..=4);
    let nb = rng.gen_range(2..=4);
    random_split(rng, (na, nb), dim)
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn split_to_dataset(split: &ClassSplit, name: &str) -> Dataset {
    let samples = split
        .labeled_rows()
        .map(|(x, l)| Sample::new(x.to_vec(), l))
        .collect();
    Dataset::new(name, "test", samples).unwrap()
}

pub fn random_mu(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.2..=1.0)).collect()
}

fn affine(x: &[f64], z: &[f64]) -> f64 {
    let n = x.len();
    let mut s = z[n];
    for i in 0..n {
        s += z[i] * x[i];
    }
    s
}

/// Plane 1 of the crisp/M1 problem in `z = (w, b)`:
/// `½ Σ_A (w·a + b)² + (p/2) Σ_B μ_j (1 + w·x_j + b)²`.
pub fn twin_objective1(a: &[Vec<f64>], b: &[Vec<f64>], mu_b: &[f64], p: f64, z: &[f64]) -> f64 {
    let own: f64 = a.iter().map(|x| affine(x, z).powi(2)).sum();
    let slack: f64 = b.iter().zip(mu_b).map(|(x, m)| m * (1.0 + affine(x, z)).powi(2)).sum();
    0.5 * own + 0.5 * p * slack
}

/// Plane 2: `½ Σ_B (w·x + b)² + (p/2) Σ_A μ_i (1 − w·a_i − b)²`.
pub fn twin_objective2(a: &[Vec<f64>], b: &[Vec<f64>], mu_a: &[f64], p: f64, z: &[f64]) -> f64 {
    let own: f64 = b.iter().map(|x| affine(x, z).powi(2)).sum();
    let slack: f64 = a.iter().zip(mu_a).map(|(x, m)| m * (1.0 - affine(x, z)).powi(2)).sum();
    0.5 * own + 0.5 * p * slack
}

/// Fuzzy plane 1 in `z = (w, b, c, d)`:
/// `½ Σ_A (w·a + b)² + M(½‖c‖² + d) + (p/2) Σ_B μ_j ξ_j²` with
/// `ξ_j = 1 + (w·x_j + b) − (c·|x_j| + d)`.
pub fn fuzzy_objective1(a: &[Vec<f64>], b: &[Vec<f64>], mu_b: &[f64], p: f64, m: f64, z: &[f64]) -> f64 {
    fuzzy_objective(a, b, mu_b, p, m, z, 1.0)
}

/// Fuzzy plane 2: own class `B`, `ξ_i = 1 − (w·a_i + b) − (c·|a_i| + d)`.
pub fn fuzzy_objective2(a: &[Vec<f64>], b: &[Vec<f64>], mu_a: &[f64], p: f64, m: f64, z: &[f64]) -> f64 {
    fuzzy_objective(b, a, mu_a, p, m, z, -1.0)
}

fn fuzzy_objective(own: &[Vec<f64>], other: &[Vec<f64>], mu: &[f64], p: f64, m: f64, z: &[f64], sign: f64) -> f64 {
    let n = own[0].len();
    let (wb, cd) = z.split_at(n + 1);
    let spread = |x: &[f64]| -> f64 { cd[n] + x.iter().zip(cd).map(|(xi, ci)| xi.abs() * ci).sum::<f64>() };
    let prox: f64 = own.iter().map(|x| affine(x, wb).powi(2)).sum();
    let vague = 0.5 * cd[..n].iter().map(|c| c * c).sum::<f64>() + cd[n];
    let slack: f64 = other
        .iter()
        .zip(mu)
        .map(|(x, mu)| mu * (1.0 + sign * affine(x, wb) - spread(x)).powi(2))
        .sum();
    0.5 * prox + m * vague + 0.5 * p * slack
}

/// Central-difference gradient.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, z: &[f64], h: f64) -> Vec<f64> {
    let mut zz = z.to_vec();
    (0..z.len())
        .map(|i| {
            let step = h * (1.0 + z[i].abs());
            zz[i] = z[i] + step;
            let up = f(&zz);
            zz[i] = z[i] - step;
            let down = f(&zz);
            zz[i] = z[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Finite-difference Hessian (exact up to rounding for quadratics).
pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, z: &[f64]) -> Vec<Vec<f64>> {
    let n = z.len();
    let h = 1e-2;
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut up = z.to_vec();
        up[j] += h;
        let mut down = z.to_vec();
        down[j] -= h;
        let gu = fd_gradient(f, &up, 1e-2);
        let gd = fd_gradient(f, &down, 1e-2);
        for i in 0..n {
            out[i][j] = (gu[i] - gd[i]) / (2.0 * h);
        }
    }
    out
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Polak–Ribière conjugate gradient with finite-difference gradients and a
/// secant line search. Returns the minimizer and its objective value.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, dim: usize) -> (Vec<f64>, f64) {
    let grad = |z: &[f64]| fd_gradient(f, z, 1e-3);
    let mut z = vec![0.0; dim];
    let mut g = grad(&z);
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    for iter in 0..200 * dim.max(1) {
        let gn = dotv(&g, &g).sqrt();
        if gn <= 1e-13 * (1.0 + f(&z).abs()) {
            break;
        }
        // curvature along dir from a gradient difference
        let dn = dotv(&dir, &dir).sqrt();
        let s = 1.0 / dn;
        let probe: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
        let gp = grad(&probe);
        let curv = dotv(&dir, &gp.iter().zip(&g).map(|(a, b)| (a - b) / s).collect::<Vec<_>>());
        if !(curv > 0.0) {
            break;
        }
        let alpha = -dotv(&g, &dir) / curv;
        for (zi, di) in z.iter_mut().zip(&dir) {
            *zi += alpha * di;
        }
        let g_new = grad(&z);
        let beta = if (iter + 1) % dim.max(1) == 0 {
            0.0
        } else {
            (dotv(&g_new, &g_new.iter().zip(&g).map(|(a, b)| a - b).collect::<Vec<_>>()) / dotv(&g, &g)).max(0.0)
        };
        dir = dir.iter().zip(&g_new).map(|(d, gi)| -gi + beta * d).collect();
        g = g_new;
    }
    let v = f(&z);
    (z, v)
}

/// Gaussian elimination with partial pivoting; `None` when a pivot is tiny.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

pub fn labeled(split: &ClassSplit) -> Vec<(Vec<f64>, f64)> {
    split
        .labeled_rows()
        .map(|(x, l)| (x.to_vec(), if l == Label::Positive { 1.0 } else { -1.0 }))
        .collect()
}

/// `½‖w‖² + C Σ max(0, 1 − y(w·x + b))`.
pub fn hinge_primal(data: &[(Vec<f64>, f64)], w: &[f64], b: f64, c: f64) -> f64 {
    let reg = 0.5 * dotv(w, w);
    let loss: f64 = data.iter().map(|(x, y)| (1.0 - y * (dotv(w, x) + b)).max(0.0)).sum();
    reg + c * loss
}

/// Exact soft-margin SVM optimum by enumerating which points sit on the
/// margin (`E`), violate it (`I`) or clear it. For each partition with a
/// nonempty `E` the stationarity conditions
/// `w = C Σ_I y_i x_i + Σ_E α_i y_i x_i`, `Σ_E α_i y_i + C Σ_I y_i = 0`,
/// `y_i(w·x_i + b) = 1 (i ∈ E)` form a square linear system; the best
/// primal value over all candidates is the optimum.
pub fn svm_enumeration_optimum(data: &[(Vec<f64>, f64)], c: f64) -> f64 {
    let n = data.len();
    let d = data[0].0.len();
    let mut best = f64::INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let on: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        if on.is_empty() {
            continue;
        }
        let viol: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        // unknowns: w (d), b, α_E
        let m = d + 1 + on.len();
        let mut a = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for j in 0..d {
            a[j][j] = 1.0;
            for (e, &i) in on.iter().enumerate() {
                a[j][d + 1 + e] = -data[i].1 * data[i].0[j];
            }
            rhs[j] = viol.iter().map(|&i| c * data[i].1 * data[i].0[j]).sum();
        }
        for (e, &i) in on.iter().enumerate() {
            a[d][d + 1 + e] = data[i].1;
        }
        rhs[d] = -viol.iter().map(|&i| c * data[i].1).sum::<f64>();
        for (e, &i) in on.iter().enumerate() {
            let row = d + 1 + e;
            for j in 0..d {
                a[row][j] = data[i].1 * data[i].0[j];
            }
            a[row][d] = data[i].1;
            rhs[row] = 1.0;
        }
        if let Some(sol) = gauss_solve(a, rhs) {
            let v = hinge_primal(data, &sol[..d], sol[d], c);
            if v < best {
                best = v;
            }
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn stacked(w: &[f64], b: f64) -> Vec<f64> {
    let mut z = w.to_vec();
    z.push(b);
    z
}
