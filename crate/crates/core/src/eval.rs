//! Stratified k-fold cross-validation, nested grid search and benchmark
//! tables.
//!
//! Every fold normalizes with statistics fitted on its own training portion
//! and every grid choice is made from inner folds of that same portion, so
//! held-out samples never influence training. Folds and grid points run on
//! the rayon pool; results are gathered in index order, which keeps reports
//! bit-identical for a given seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{Algorithm, Hyperparams, TrainedModel, TrainerSpec};
use crate::data::{Dataset, NormStats, Normalization};
use crate::error::{Error, Result};
use crate::fuzzy_m1::MembershipStrategy;
use crate::model::{ClassSplit, Label, Sample};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Positive, Label::Positive) => self.tp += 1,
            (Label::Negative, Label::Negative) => self.tn += 1,
            (Label::Negative, Label::Positive) => self.fp += 1,
            (Label::Positive, Label::Negative) => self.fn_ += 1,
        }
    }
}

/// `(TP + TN) / (TP + FP + TN + FN)`.
pub fn accuracy(c: &ConfusionCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Argument("accuracy of an empty confusion table".to_string()));
    }
    Ok((c.tp + c.tn) as f64 / total as f64)
}

/// Candidate hyperparameters. `p` sets `p1 = p2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub p: Vec<f64>,
    pub c: Vec<f64>,
    pub m: Vec<f64>,
}

impl Default for Grid {
    /// Powers of two `2⁻⁸ … 2⁸` for the penalties, `M ∈ {0.1, 1, 10}`.
    fn default() -> Self {
        let pow2: Vec<f64> = (-8..=8).map(|e| 2f64.powi(e)).collect();
        Grid {
            p: pow2.clone(),
            c: pow2,
            m: vec![0.1, 1.0, 10.0],
        }
    }
}

impl Grid {
    pub fn single(params: Hyperparams) -> Self {
        Grid {
            p: vec![params.p1],
            c: vec![params.c],
            m: vec![params.m],
        }
    }

    /// Distinct candidates for `algo`, ascending by its penalty, then by `M`.
    pub fn candidates(&self, algo: Algorithm) -> Result<Vec<Hyperparams>> {
        let base = Hyperparams::default();
        let mut out: Vec<Hyperparams> = match algo {
            Algorithm::Svm => self.c.iter().map(|&c| Hyperparams { c, ..base }).collect(),
            Algorithm::Lstsvm | Algorithm::M1 => self
                .p
                .iter()
                .map(|&p| Hyperparams { p1: p, p2: p, ..base })
                .collect(),
            Algorithm::M2 => self
                .p
                .iter()
                .flat_map(|&p| self.m.iter().map(move |&m| Hyperparams { p1: p, p2: p, m, ..base }))
                .collect(),
        };
        if out.is_empty() {
            return Err(Error::Argument(format!("grid has no candidates for {algo}")));
        }
        let key = |h: &Hyperparams| h.relevant(algo).iter().map(|(_, v)| *v).collect::<Vec<f64>>();
        out.sort_by(|a, b| {
            key(a)
                .iter()
                .zip(key(b).iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out.dedup_by(|a, b| key(a) == key(b));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    /// Folds used inside each training portion when tuning.
    pub inner_k: usize,
    pub seed: u64,
    pub normalization: Normalization,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            inner_k: 5,
            seed: 1,
            normalization: Normalization::MinMax,
        }
    }
}

/// Fold index of every sample: each class is shuffled with `seed` and dealt
/// round-robin, positives first, so class ratios are preserved per fold.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Argument(format!("need at least 2 folds, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Argument(format!(
            "{k} folds requested for {} samples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [Label::Positive, Label::Negative] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::Argument(format!(
                "class {class} has {} samples; stratified folds need at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut folds = vec![0; labels.len()];
    for (pos, &i) in order.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Deterministic per-fold seed for inner resampling.
fn derive_seed(seed: u64, fold: usize) -> u64 {
    seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    /// Index into the dataset.
    pub index: usize,
    pub truth: i8,
    pub predicted: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    /// Hyperparameters the fold was trained with.
    pub params: BTreeMap<String, f64>,
    pub flags: Vec<String>,
    /// Normalization fitted on this fold's training portion.
    pub stats: NormStats,
    pub predictions: Vec<SamplePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub algorithm: Algorithm,
    pub dataset: String,
    pub k: usize,
    pub seed: u64,
    pub membership: String,
    pub normalization: String,
    /// `fixed` or `nested-grid`.
    pub tuning: String,
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
}

fn params_map(algo: Algorithm, h: &Hyperparams) -> BTreeMap<String, f64> {
    h.relevant(algo).into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Normalizes with training statistics, trains and returns the fitted model
/// and statistics.
pub fn fit_on(
    train: &[Sample],
    spec: &TrainerSpec,
    normalization: Normalization,
) -> Result<(TrainedModel, NormStats)> {
    let stats = NormStats::fit(train, normalization)?;
    let scaled = stats.apply_samples(train);
    let split = ClassSplit::from_samples(&scaled)?;
    Ok((spec.fit(&split)?, stats))
}

fn evaluate_fold(
    ds: &Dataset,
    folds: &[usize],
    fold: usize,
    spec: &TrainerSpec,
    normalization: Normalization,
) -> Result<FoldResult> {
    let train: Vec<Sample> = ds
        .samples
        .iter()
        .zip(folds)
        .filter(|(_, &f)| f != fold)
        .map(|(s, _)| s.clone())
        .collect();
    let (model, stats) = fit_on(&train, spec, normalization)?;
    let mut counts = ConfusionCounts::default();
    let mut predictions = Vec::new();
    for (index, (s, _)) in ds.samples.iter().zip(folds).enumerate().filter(|(_, (_, &f))| f == fold) {
        let p = model.predict(&stats.apply(&s.features))?;
        counts.record(s.label, p.label);
        predictions.push(SamplePrediction {
            index,
            truth: s.label.sign(),
            predicted: p.label.sign(),
            mu: p.memberships,
        });
    }
    Ok(FoldResult {
        fold,
        accuracy: accuracy(&counts)?,
        counts,
        params: params_map(spec.algorithm, &spec.params),
        flags: model.flags().into_iter().map(String::from).collect(),
        stats,
        predictions,
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Cross-validates one fixed trainer configuration.
pub fn kfold_cv(ds: &Dataset, spec: &TrainerSpec, opts: &CvOptions) -> Result<CvReport> {
    ds.validate()?;
    let labels: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, opts.k, opts.seed)?;
    let results = (0..opts.k)
        .into_par_iter()
        .map(|f| evaluate_fold(ds, &folds, f, spec, opts.normalization))
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        algorithm: spec.algorithm,
        dataset: ds.name.clone(),
        k: opts.k,
        seed: opts.seed,
        membership: membership_tag(spec),
        normalization: opts.normalization.tag().to_string(),
        tuning: "fixed".to_string(),
        mean_accuracy: mean(results.iter().map(|r| r.accuracy)),
        folds: results,
    })
}

fn membership_tag(spec: &TrainerSpec) -> String {
    if spec.algorithm.uses_memberships() {
        spec.membership.tag().to_string()
    } else {
        "n/a".to_string()
    }
}

/// Mean CV accuracy of each candidate on `samples`, in candidate order.
fn score_candidates(
    samples: &[Sample],
    algo: Algorithm,
    membership: &MembershipStrategy,
    candidates: &[Hyperparams],
    k: usize,
    seed: u64,
    normalization: Normalization,
) -> Result<Vec<f64>> {
    let labels: Vec<Label> = samples.iter().map(|s| s.label).collect();
    let smallest = [Label::Positive, Label::Negative]
        .iter()
        .map(|c| labels.iter().filter(|l| *l == c).count())
        .min()
        .unwrap_or(0);
    let k = k.min(smallest).max(2);
    let folds = stratified_folds(&labels, k, seed)?;
    let inner = Dataset {
        name: "inner".to_string(),
        provenance: String::new(),
        samples: samples.to_vec(),
        warnings: Vec::new(),
    };
    candidates
        .par_iter()
        .map(|h| {
            let spec = TrainerSpec {
                algorithm: algo,
                params: *h,
                membership: membership.clone(),
            };
            let accs = (0..k)
                .map(|f| evaluate_fold(&inner, &folds, f, &spec, normalization).map(|r| r.accuracy))
                .collect::<Result<Vec<_>>>()?;
            Ok(mean(accs.into_iter()))
        })
        .collect()
}

/// First candidate with the highest score; candidates arrive sorted so ties
/// resolve toward smaller penalties.
fn pick_best(candidates: &[Hyperparams], scores: &[f64]) -> (Hyperparams, f64) {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    (candidates[best], scores[best])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// Configuration chosen by CV over the whole dataset.
    pub best: Hyperparams,
    pub best_score: f64,
    /// Outer estimate where every fold tunes on its own training portion.
    pub report: CvReport,
}

/// Nested cross-validation over `grid`.
pub fn grid_search(
    ds: &Dataset,
    algo: Algorithm,
    membership: &MembershipStrategy,
    grid: &Grid,
    opts: &CvOptions,
) -> Result<GridSearchResult> {
    ds.validate()?;
    let candidates = grid.candidates(algo)?;
    let labels: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, opts.k, opts.seed)?;

    let outer = (0..opts.k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<Sample> = ds
                .samples
                .iter()
                .zip(&folds)
                .filter(|(_, &g)| g != f)
                .map(|(s, _)| s.clone())
                .collect();
            let chosen = if candidates.len() == 1 {
                candidates[0]
            } else {
                let scores = score_candidates(
                    &train,
                    algo,
                    membership,
                    &candidates,
                    opts.inner_k,
                    derive_seed(opts.seed, f),
                    opts.normalization,
                )?;
                pick_best(&candidates, &scores).0
            };
            let spec = TrainerSpec {
                algorithm: algo,
                params: chosen,
                membership: membership.clone(),
            };
            evaluate_fold(ds, &folds, f, &spec, opts.normalization)
        })
        .collect::<Result<Vec<_>>>()?;

    let (best, best_score) = if candidates.len() == 1 {
        (candidates[0], f64::NAN)
    } else {
        let scores = score_candidates(
            &ds.samples,
            algo,
            membership,
            &candidates,
            opts.k,
            opts.seed,
            opts.normalization,
        )?;
        pick_best(&candidates, &scores)
    };
    let spec = TrainerSpec {
        algorithm: algo,
        params: best,
        membership: membership.clone(),
    };
    Ok(GridSearchResult {
        best,
        best_score,
        report: CvReport {
            algorithm: algo,
            dataset: ds.name.clone(),
            k: opts.k,
            seed: opts.seed,
            membership: membership_tag(&spec),
            normalization: opts.normalization.tag().to_string(),
            tuning: "nested-grid".to_string(),
            mean_accuracy: mean(outer.iter().map(|r| r.accuracy)),
            folds: outer,
        },
    })
}

/// Published accuracies (percent) for the datasets this harness reproduces,
/// keyed by algorithm. The fuzzy column is reported for M2.
pub fn published_reference(dataset: &str) -> BTreeMap<Algorithm, f64> {
    let key = dataset.to_ascii_lowercase();
    let row: Option<[f64; 3]> = if key.contains("xor") {
        Some([53.0, 65.0, 73.0])
    } else if key.contains("heart") {
        Some([84.1, 85.5, 87.9])
    } else if key.contains("austral") {
        Some([85.5, 86.6, 90.7])
    } else if key.contains("liver") || key.contains("bupa") {
        Some([58.3, 70.9, 73.2])
    } else if key.contains("breast") || key.contains("wpbc") {
        Some([79.9, 83.8, 98.2])
    } else {
        None
    };
    row.map(|[svm, lst, fl]| {
        [(Algorithm::Svm, svm), (Algorithm::Lstsvm, lst), (Algorithm::M2, fl)]
            .into_iter()
            .collect()
    })
    .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCell {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub result: std::result::Result<GridSearchResult, String>,
    pub reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub datasets: Vec<String>,
    pub algorithms: Vec<Algorithm>,
    pub cells: Vec<BenchmarkCell>,
    pub options: CvOptions,
    pub grid: Grid,
    pub membership: String,
}

impl BenchmarkTable {
    pub fn cell(&self, dataset: &str, algo: Algorithm) -> Option<&BenchmarkCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.algorithm == algo)
    }

    /// Mean accuracy in percent, if the cell succeeded.
    pub fn percent(&self, dataset: &str, algo: Algorithm) -> Option<f64> {
        self.cell(dataset, algo)
            .and_then(|c| c.result.as_ref().ok())
            .map(|r| 100.0 * r.report.mean_accuracy)
    }
}

/// Every algorithm on every dataset, each cell tuned by nested grid search.
/// A failing cell is recorded with its error rather than aborting the table.
pub fn benchmark(
    datasets: &[Dataset],
    algorithms: &[Algorithm],
    membership: &MembershipStrategy,
    grid: &Grid,
    opts: &CvOptions,
    references: &BTreeMap<String, BTreeMap<Algorithm, f64>>,
) -> BenchmarkTable {
    let mut cells = Vec::new();
    for ds in datasets {
        for &algo in algorithms {
            let result = grid_search(ds, algo, membership, grid, opts)
                .map_err(|e| format!("{}/{}: {e}", ds.name, algo));
            let reference = references
                .get(&ds.name)
                .and_then(|r| r.get(&algo))
                .copied()
                .or_else(|| published_reference(&ds.name).get(&algo).copied());
            cells.push(BenchmarkCell {
                dataset: ds.name.clone(),
                algorithm: algo,
                result,
                reference,
            });
        }
    }
    BenchmarkTable {
        datasets: datasets.iter().map(|d| d.name.clone()).collect(),
        algorithms: algorithms.to_vec(),
        cells,
        options: opts.clone(),
        grid: grid.clone(),
        membership: membership.tag().to_string(),
    }
}

/// Line-delimited JSON: a header record with the resolved configuration,
/// then one record per fold.
pub fn report_records(report: &CvReport) -> String {
    let mut out = String::new();
    let header = serde_json::json!({
        "kind": "config",
        "algorithm": report.algorithm,
        "dataset": report.dataset,
        "k": report.k,
        "seed": report.seed,
        "membership": report.membership,
        "normalization": report.normalization,
        "tuning": report.tuning,
    });
    let _ = writeln!(out, "{header}");
    push_fold_records(&mut out, report);
    let summary = serde_json::json!({
        "kind": "summary",
        "algorithm": report.algorithm,
        "dataset": report.dataset,
        "mean_accuracy": report.mean_accuracy,
        "fold_accuracies": report.folds.iter().map(|f| f.accuracy).collect::<Vec<_>>(),
    });
    let _ = writeln!(out, "{summary}");
    out
}

fn push_fold_records(out: &mut String, report: &CvReport) {
    for f in &report.folds {
        let rec = serde_json::json!({
            "kind": "fold",
            "algorithm": report.algorithm,
            "dataset": report.dataset,
            "fold": f.fold,
            "tp": f.counts.tp,
            "tn": f.counts.tn,
            "fp": f.counts.fp,
            "fn": f.counts.fn_,
            "accuracy": f.accuracy,
            "params": f.params,
            "flags": f.flags,
            "seed": report.seed,
            "predictions": f.predictions,
        });
        let _ = writeln!(out, "{rec}");
    }
}

pub fn render_report(report: &CvReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} on {} | k = {} | seed = {} | membership = {} | normalization = {} | tuning = {}",
        report.algorithm,
        report.dataset,
        report.k,
        report.seed,
        report.membership,
        report.normalization,
        report.tuning
    );
    let _ = writeln!(out, "{:>4}  {:>4} {:>4} {:>4} {:>4}  {:>8}  params", "fold", "TP", "TN", "FP", "FN", "acc(%)");
    for f in &report.folds {
        let params = f
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            out,
            "{:>4}  {:>4} {:>4} {:>4} {:>4}  {:>8.2}  {params}",
            f.fold,
            f.counts.tp,
            f.counts.tn,
            f.counts.fp,
            f.counts.fn_,
            100.0 * f.accuracy
        );
    }
    let _ = writeln!(out, "mean accuracy: {:.2}%", 100.0 * report.mean_accuracy);
    out
}

/// Line-delimited JSON for a benchmark: configuration header, one record per
/// dataset × algorithm × fold, then one summary per cell.
pub fn benchmark_records(table: &BenchmarkTable) -> String {
    let mut out = String::new();
    let header = serde_json::json!({
        "kind": "config",
        "datasets": table.datasets,
        "algorithms": table.algorithms,
        "k": table.options.k,
        "inner_k": table.options.inner_k,
        "seed": table.options.seed,
        "normalization": table.options.normalization.tag(),
        "membership": table.membership,
        "grid": table.grid,
    });
    let _ = writeln!(out, "{header}");
    for cell in &table.cells {
        match &cell.result {
            Ok(r) => {
                push_fold_records(&mut out, &r.report);
                let rec = serde_json::json!({
                    "kind": "summary",
                    "dataset": cell.dataset,
                    "algorithm": cell.algorithm,
                    "mean_accuracy": r.report.mean_accuracy,
                    "best_params": params_map(cell.algorithm, &r.best),
                    "reference_percent": cell.reference,
                });
                let _ = writeln!(out, "{rec}");
            }
            Err(e) => {
                let rec = serde_json::json!({
                    "kind": "error",
                    "dataset": cell.dataset,
                    "algorithm": cell.algorithm,
                    "error": e,
                });
                let _ = writeln!(out, "{rec}");
            }
        }
    }
    out
}

/// Dataset × algorithm accuracy table with published values in brackets.
pub fn render_benchmark(table: &BenchmarkTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {}-fold CV, nested grid search (inner k = {}), seed = {}, normalization = {}, membership = {}",
        table.options.k,
        table.options.inner_k,
        table.options.seed,
        table.options.normalization.tag(),
        table.membership
    );
    let width = table.datasets.iter().map(|d| d.len()).max().unwrap_or(7).max(7);
    let _ = write!(out, "{:<width$}", "dataset");
    for a in &table.algorithms {
        let _ = write!(out, " | {:>18}", a.tag());
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{}", "-".repeat(width + 21 * table.algorithms.len()));
    for d in &table.datasets {
        let _ = write!(out, "{d:<width$}");
        for &a in &table.algorithms {
            let cell = table.cell(d, a);
            let acc = table
                .percent(d, a)
                .map_or_else(|| "error".to_string(), |p| format!("{p:.1}"));
            let text = match cell.and_then(|c| c.reference) {
                Some(r) => format!("{acc} [{r:.1}]"),
                None => acc,
            };
            let _ = write!(out, " | {text:>18}");
        }
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "values: mean accuracy (%); [published value]");
    for c in &table.cells {
        if let Err(e) = &c.result {
            let _ = writeln!(out, "error: {e}");
        }
    }
    out
}

/// Model output over a regular grid of 2-D points, as CSV rows
/// `x,y,label,mu1,mu2` (memberships empty for crisp models). Points are in
/// raw feature units and pass through `stats` before prediction.
pub fn decision_grid(
    model: &TrainedModel,
    stats: &NormStats,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<String> {
    if model.dim() != 2 {
        return Err(Error::Argument(format!(
            "decision grids need 2 features, model has {}",
            model.dim()
        )));
    }
    if resolution < 2 {
        return Err(Error::Argument("grid resolution must be at least 2".to_string()));
    }
    let mut out = String::from("x,y,label,mu1,mu2\n");
    let step = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (resolution - 1) as f64;
    for i in 0..resolution {
        for j in 0..resolution {
            let pt = [step(x_range, i), step(y_range, j)];
            let p = model.predict(&stats.apply(&pt))?;
            let (m1, m2) = p
                .memberships
                .map_or((String::new(), String::new()), |(a, b)| (format!("{a:?}"), format!("{b:?}")));
            let _ = writeln!(out, "{:?},{:?},{},{m1},{m2}", pt[0], pt[1], p.label);
        }
    }
    Ok(out)
}
