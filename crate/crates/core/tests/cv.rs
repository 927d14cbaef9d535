mod common;

use common::*;
use flstsvm::eval::{benchmark_records, report_records, stratified_folds};
use flstsvm::{
    accuracy, benchmark, generate_xor, grid_search, kfold_cv, Algorithm, ConfusionCounts, CvOptions, Dataset, Grid,
    Hyperparams, Label, MembershipStrategy, Sample, TrainerSpec,
};
use rand::Rng;

fn blobs(seed: u64, n: usize, gap: f64) -> Dataset {
    let mut r = rng(seed);
    let samples = (0..2 * n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let x = vec![s * gap + r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            Sample::new(x, if s > 0.0 { Label::Positive } else { Label::Negative })
        })
        .collect();
    Dataset::new("blobs", "generated", samples).unwrap()
}

fn small_grid() -> Grid {
    Grid {
        p: vec![0.25, 1.0, 4.0],
        c: vec![0.25, 1.0, 4.0],
        m: vec![0.1, 1.0],
    }
}

#[test]
fn accuracy_counts_correct_predictions() {
    let c = ConfusionCounts {
        tp: 40,
        tn: 45,
        fp: 5,
        fn_: 10,
    };
    assert_eq!(accuracy(&c).unwrap(), 0.85);
    assert!(accuracy(&ConfusionCounts::default()).is_err());
}

#[test]
fn folds_are_stratified_and_reproducible() {
    let ds = generate_xor(1);
    let labels: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, 10, 4).unwrap();
    assert_eq!(folds, stratified_folds(&labels, 10, 4).unwrap());
    assert_ne!(folds, stratified_folds(&labels, 10, 5).unwrap());
    for class in [Label::Positive, Label::Negative] {
        let counts: Vec<usize> = (0..10)
            .map(|f| (0..labels.len()).filter(|&i| folds[i] == f && labels[i] == class).count())
            .collect();
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(hi - lo <= 1, "{class}: {counts:?}");
    }
    assert!(stratified_folds(&labels, 1, 0).is_err());
    assert!(stratified_folds(&labels, 500, 0).is_err());
}

#[test]
fn leave_one_out_is_k_equals_n() {
    let ds = blobs(1, 6, 3.0);
    let spec = TrainerSpec::new(Algorithm::Lstsvm, Hyperparams::default());
    let opts = CvOptions {
        k: ds.len(),
        ..CvOptions::default()
    };
    let report = kfold_cv(&ds, &spec, &opts).unwrap();
    assert_eq!(report.folds.len(), 12);
    assert!(report.folds.iter().all(|f| f.counts.total() == 1));
    let mut seen: Vec<usize> = report.folds.iter().flat_map(|f| f.predictions.iter().map(|p| p.index)).collect();
    seen.sort_unstable();
    assert_eq!(seen, (0..12).collect::<Vec<_>>());
}

#[test]
fn separable_data_is_classified_perfectly() {
    let ds = blobs(2, 20, 4.0);
    for algo in Algorithm::ALL {
        let report = kfold_cv(&ds, &TrainerSpec::new(algo, Hyperparams::default()), &CvOptions::default()).unwrap();
        assert_eq!(report.mean_accuracy, 1.0, "{algo}");
    }
}

#[test]
fn accuracy_recounts_from_stored_predictions() {
    let ds = generate_xor(2);
    let report = kfold_cv(&ds, &TrainerSpec::new(Algorithm::M2, Hyperparams::default()), &CvOptions::default()).unwrap();
    let mut total = 0.0;
    for f in &report.folds {
        let right = f.predictions.iter().filter(|p| p.truth == p.predicted).count();
        assert_eq!(right, f.counts.tp + f.counts.tn);
        assert_eq!(f.predictions.len(), f.counts.total());
        assert_eq!(f.accuracy, right as f64 / f.predictions.len() as f64);
        for p in &f.predictions {
            assert_eq!(p.truth, ds.samples[p.index].label.sign());
            let (m1, m2) = p.mu.unwrap();
            assert!((m1 + m2 - 1.0).abs() < 1e-12);
        }
        total += f.accuracy;
    }
    assert!((report.mean_accuracy - total / report.folds.len() as f64).abs() < 1e-15);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let ds = generate_xor(3);
    let opts = CvOptions {
        seed: 17,
        ..CvOptions::default()
    };
    let run = || {
        let g = grid_search(&ds, Algorithm::M2, &MembershipStrategy::Centroid, &small_grid(), &opts).unwrap();
        report_records(&g.report)
    };
    assert_eq!(run(), run());
}

#[test]
fn grid_search_is_idempotent_and_singletons_match_fixed_cv() {
    let ds = blobs(4, 15, 1.0);
    let opts = CvOptions::default();
    for algo in Algorithm::ALL {
        let a = grid_search(&ds, algo, &MembershipStrategy::Centroid, &small_grid(), &opts).unwrap();
        let b = grid_search(&ds, algo, &MembershipStrategy::Centroid, &small_grid(), &opts).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.report.folds, b.report.folds);

        let params = Hyperparams {
            p1: 0.5,
            p2: 0.5,
            c: 0.5,
            m: 0.5,
        };
        let single = grid_search(&ds, algo, &MembershipStrategy::Centroid, &Grid::single(params), &opts).unwrap();
        let fixed = kfold_cv(&ds, &TrainerSpec::new(algo, params), &opts).unwrap();
        assert_eq!(single.best.relevant(algo), params.relevant(algo));
        assert_eq!(single.report.folds, fixed.folds);
        assert_eq!(single.report.mean_accuracy, fixed.mean_accuracy);
    }
}

#[test]
fn held_out_samples_never_reach_training() {
    let ds = generate_xor(5);
    let opts = CvOptions::default();
    let labels: Vec<Label> = ds.samples.iter().map(|s| s.label).collect();
    let folds = stratified_folds(&labels, opts.k, opts.seed).unwrap();
    for algo in [Algorithm::Lstsvm, Algorithm::M2] {
        let base = grid_search(&ds, algo, &MembershipStrategy::Centroid, &small_grid(), &opts).unwrap();
        for target in [0, 4, 9] {
            let victim = (0..ds.len()).find(|&i| folds[i] == target).unwrap();
            let mut mutated = ds.clone();
            let s = &mut mutated.samples[victim];
            s.features = s.features.iter().map(|v| v * 100.0 + 7.0).collect();
            let again = grid_search(&mutated, algo, &MembershipStrategy::Centroid, &small_grid(), &opts).unwrap();
            let (f0, f1) = (&base.report.folds[target], &again.report.folds[target]);
            assert_eq!(f0.stats, f1.stats, "{algo} fold {target}: normalization changed");
            assert_eq!(f0.params, f1.params, "{algo} fold {target}: grid choice changed");
        }
    }
}

#[test]
fn benchmark_table_reports_every_cell() {
    let xor = generate_xor(1);
    let blobs = blobs(6, 12, 2.0);
    let grid = small_grid();
    let opts = CvOptions::default();
    let table = benchmark(
        &[xor, blobs],
        &Algorithm::ALL,
        &MembershipStrategy::Centroid,
        &grid,
        &opts,
        &Default::default(),
    );
    assert_eq!(table.cells.len(), 8);
    assert_eq!(table.cell("xor", Algorithm::M2).unwrap().reference, Some(73.0));
    assert!(table.cell("blobs", Algorithm::Svm).unwrap().reference.is_none());
    assert!(table.percent("blobs", Algorithm::Svm).unwrap() > 90.0);
    let records = benchmark_records(&table);
    assert!(records.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}
