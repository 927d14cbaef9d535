//! `flstsvm` command-line tool: train and apply models, cross-validate,
//! run benchmark tables and generate the XOR set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use flstsvm::data::{load_features, ColumnRef};
use flstsvm::eval::{benchmark_records, decision_grid, fit_on, render_benchmark, render_report, report_records};
use flstsvm::{
    benchmark, generate_xor, grid_search, kfold_cv, load_csv, Algorithm, CsvSchema, CvOptions, Dataset,
    Error, Grid, Hyperparams, Label, Manifest, ManifestSettings, MembershipStrategy, ModelDocument, NormStats,
    Normalization, TrainerSpec,
};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  unexpected failure
  2  invalid command line or argument value
  3  malformed input: data file, manifest or model document
  4  training failed (degenerate data, numerical breakdown, failed benchmark cell)
  5  a file could not be read or written

Settings resolve as: command-line flag, then the manifest's [settings] table,
then the built-in default. Output directories default to $FLSTSVM_OUT_DIR,
or the current directory when it is unset.";

#[derive(Parser)]
#[command(name = "flstsvm", version, about = "Least squares twin SVM and fuzzy variants", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a whole dataset and save it.
    Train(TrainArgs),
    /// Apply a saved model to a data file.
    Predict(PredictArgs),
    /// Stratified k-fold cross-validation, optionally with nested grid search.
    Cv(CvArgs),
    /// Grid-searched accuracy table over several datasets and algorithms.
    Bench(BenchArgs),
    /// Write the synthetic XOR dataset as CSV.
    GenXor(GenXorArgs),
}

#[derive(Args)]
struct CsvArgs {
    /// The file has no header line.
    #[arg(long)]
    no_header: bool,
    /// Field separator; sniffed (`,` or `;`) when omitted.
    #[arg(long)]
    delimiter: Option<char>,
    /// Label column, by zero-based index or header name (default: last).
    #[arg(long)]
    label_column: Option<String>,
    /// Columns to drop, by index or name.
    #[arg(long, value_delimiter = ',')]
    ignore_columns: Vec<String>,
    /// Label values meaning class +1 (default accepts 1 / +1 and -1).
    #[arg(long, value_delimiter = ',')]
    positive: Vec<String>,
    /// Label values meaning class -1.
    #[arg(long, value_delimiter = ',')]
    negative: Vec<String>,
    /// Drop rows with unparseable numbers instead of failing.
    #[arg(long)]
    skip_invalid_rows: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// CSV data file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Benchmark manifest (TOML); pick an entry with --dataset.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Use the generated XOR set with this seed.
    #[arg(long, value_name = "SEED")]
    xor: Option<u64>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    source: Source,
    /// Manifest entry to use (required when the manifest lists several).
    #[arg(long, requires = "manifest")]
    dataset: Option<String>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args)]
struct ModelArgs {
    /// svm, lstsvm, m1 or m2.
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    /// Penalty on the second class's slacks when fitting the first plane
    #[arg(long)]
    p1: Option<f64>,
    /// Penalty on the first class's slacks when fitting the second plane
    #[arg(long)]
    p2: Option<f64>,
    /// SVM penalty.
    #[arg(long = "C")]
    c: Option<f64>,
    /// M2 vagueness penalty.
    #[arg(long = "M")]
    m: Option<f64>,
    #[command(flatten)]
    prep: PrepArgs,
}

#[derive(Args)]
struct PrepArgs {
    /// uniform, centroid or user (user needs --membership-file; train only).
    #[arg(long)]
    membership: Option<String>,
    /// One membership value per data row, in file order.
    #[arg(long)]
    membership_file: Option<PathBuf>,
    /// minmax, zscore or none.
    #[arg(long)]
    normalization: Option<String>,
}

#[derive(Args)]
struct GridArgs {
    /// Candidate p (= p1 = p2) values.
    #[arg(long, value_delimiter = ',')]
    grid_p: Option<Vec<f64>>,
    /// Candidate C values.
    #[arg(long, value_delimiter = ',')]
    grid_c: Option<Vec<f64>>,
    /// Candidate M values.
    #[arg(long, value_delimiter = ',')]
    grid_m: Option<Vec<f64>>,
}

#[derive(Args)]
struct FoldArgs {
    /// Outer folds.
    #[arg(long)]
    k: Option<usize>,
    /// Inner folds used for grid search.
    #[arg(long)]
    inner_k: Option<usize>,
    /// Seed for the fold shuffles
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Model file to write [default: $FLSTSVM_OUT_DIR/model.txt].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model document written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with the same feature columns as the training data.
    #[arg(long)]
    data: PathBuf,
    /// The file has no label column.
    #[arg(long)]
    unlabeled: bool,
    #[command(flatten)]
    csv: CsvArgs,
    /// Predictions CSV [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    folds: FoldArgs,
    /// Tune hyperparameters by nested grid search instead of using fixed ones.
    #[arg(long)]
    tune: bool,
    #[command(flatten)]
    grid: GridArgs,
    /// Output directory.
    #[arg(long, env = "FLSTSVM_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
#[group(id = "bench_source", required = true, multiple = true)]
struct BenchSource {
    /// Benchmark manifest (TOML) listing the datasets.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Include the generated XOR set with this seed.
    #[arg(long, value_name = "SEED")]
    xor: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: BenchSource,
    /// Algorithms to run [default: all].
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algo: Vec<Algorithm>,
    #[command(flatten)]
    folds: FoldArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    prep: PrepArgs,
    /// Points per axis of the decision-grid CSVs for 2-feature datasets.
    #[arg(long, default_value_t = 101)]
    grid_resolution: usize,
    /// Output directory.
    #[arg(long, env = "FLSTSVM_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GenXorArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// CSV file to write [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Argument(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Argument(_) => 2,
                Error::Data { .. } | Error::Format(_) => 3,
                Error::Model(_) | Error::Numerical(_) => 4,
                Error::Io { .. } => 5,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 5;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a),
        Command::Bench(a) => bench(a),
        Command::GenXor(a) => gen_xor(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Where an artifact's inputs came from, embedded in every output.
struct Provenance {
    command: &'static str,
    inputs: Vec<(String, String)>,
    config: Value,
}

impl Provenance {
    fn record(&self) -> Value {
        json!({
            "kind": "provenance",
            "tool": "flstsvm",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "inputs": self.inputs.iter().map(|(p, h)| json!({"source": p, "sha256": h})).collect::<Vec<_>>(),
            "config": self.config,
        })
    }

    /// The same information as `# `-prefixed text lines.
    fn comment(&self) -> String {
        let mut out = format!("# flstsvm {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for (p, h) in &self.inputs {
            let _ = writeln!(out, "# input {p} sha256={h}");
        }
        let _ = writeln!(out, "# config {}", self.config);
        out
    }
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn sha256_text(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn column_ref(s: &str) -> ColumnRef {
    s.parse().map_or_else(|_| ColumnRef::Name(s.to_string()), ColumnRef::Index)
}

fn csv_schema(a: &CsvArgs) -> Result<CsvSchema> {
    let mut label_map = BTreeMap::new();
    for v in &a.positive {
        label_map.insert(v.clone(), Label::Positive);
    }
    for v in &a.negative {
        if label_map.insert(v.clone(), Label::Negative).is_some() {
            return Err(usage(format!("label {v:?} given for both classes")));
        }
    }
    let delimiter = match a.delimiter {
        Some(c) if !c.is_ascii() => return Err(usage(format!("delimiter {c:?} is not ASCII"))),
        other => other.map(|c| c as u8),
    };
    Ok(CsvSchema {
        delimiter,
        has_header: !a.no_header,
        label_column: a.label_column.as_deref().map(column_ref),
        ignore_columns: a.ignore_columns.iter().map(|s| column_ref(s)).collect(),
        label_map,
        skip_invalid_rows: a.skip_invalid_rows,
    })
}

struct Loaded {
    dataset: Dataset,
    inputs: Vec<(String, String)>,
    settings: ManifestSettings,
    references: BTreeMap<Algorithm, f64>,
}

fn references(raw: &BTreeMap<String, f64>) -> Result<BTreeMap<Algorithm, f64>> {
    raw.iter()
        .map(|(k, v)| Ok((k.parse::<Algorithm>().map_err(|e| Error::Format(e.to_string()))?, *v)))
        .collect()
}

fn load_manifest(path: &Path) -> Result<(Manifest, (String, String))> {
    let manifest = Manifest::load(path)?;
    Ok((manifest, (path.display().to_string(), sha256_file(path)?)))
}

fn load_manifest_entry(manifest: &Manifest, entry: &flstsvm::ManifestEntry) -> Result<Loaded> {
    let path = manifest.resolve(entry);
    let dataset = manifest.load_entry(entry)?;
    Ok(Loaded {
        inputs: vec![(path.display().to_string(), sha256_file(&path)?)],
        dataset,
        settings: manifest.settings.clone(),
        references: references(&entry.reference)?,
    })
}

fn xor_source(seed: u64) -> Loaded {
    let dataset = generate_xor(seed);
    Loaded {
        inputs: vec![(format!("generated:xor(seed={seed})"), sha256_text(&dataset.to_csv()))],
        dataset,
        settings: ManifestSettings::default(),
        references: BTreeMap::new(),
    }
}

fn load_data(a: &DataArgs) -> Result<Loaded> {
    let loaded = if let Some(path) = &a.source.data {
        let dataset = load_csv(path, &csv_schema(&a.csv)?)?;
        Loaded {
            inputs: vec![(path.display().to_string(), sha256_file(path)?)],
            dataset,
            settings: ManifestSettings::default(),
            references: BTreeMap::new(),
        }
    } else if let Some(path) = &a.source.manifest {
        let (manifest, m_input) = load_manifest(path)?;
        let entry = match &a.dataset {
            Some(name) => manifest
                .datasets
                .iter()
                .find(|e| &e.name == name)
                .ok_or_else(|| usage(format!("manifest has no dataset named {name:?}")))?,
            None if manifest.datasets.len() == 1 => &manifest.datasets[0],
            None => {
                let names: Vec<&str> = manifest.datasets.iter().map(|e| e.name.as_str()).collect();
                return Err(usage(format!("choose one with --dataset: {}", names.join(", "))));
            }
        };
        let mut loaded = load_manifest_entry(&manifest, entry)?;
        loaded.inputs.insert(0, m_input);
        loaded
    } else {
        xor_source(a.source.xor.expect("clap requires one source"))
    };
    for w in &loaded.dataset.warnings {
        eprintln!("warning: {}: {w}", loaded.dataset.name);
    }
    Ok(loaded)
}

fn normalization(flag: &Option<String>, settings: &ManifestSettings) -> Result<Normalization> {
    match flag.as_ref().or(settings.normalization.as_ref()) {
        Some(s) => Ok(s.parse()?),
        None => Ok(Normalization::MinMax),
    }
}

fn membership_name(flag: &Option<String>, settings: &ManifestSettings) -> String {
    flag.clone()
        .or_else(|| settings.membership.clone())
        .unwrap_or_else(|| "centroid".to_string())
}

/// Membership strategy for resampling commands, where per-row values cannot
/// follow the folds.
fn fold_membership(name: &str) -> Result<MembershipStrategy> {
    match name {
        "uniform" => Ok(MembershipStrategy::Uniform),
        "centroid" => Ok(MembershipStrategy::Centroid),
        "user" => Err(usage("user memberships are only supported by `train`")),
        other => Err(usage(format!("unknown membership strategy {other:?}"))),
    }
}

fn read_memberships(path: &Path, ds: &Dataset) -> Result<MembershipStrategy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let values = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::data(Some(i + 1), format!("{}: {l:?} is not a number", path.display())))
        })
        .collect::<std::result::Result<Vec<f64>, Error>>()?;
    if values.len() != ds.len() {
        return Err(Error::data(
            None,
            format!("{} has {} memberships for {} rows", path.display(), values.len(), ds.len()),
        )
        .into());
    }
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (s, v) in ds.samples.iter().zip(values) {
        match s.label {
            Label::Positive => a.push(v),
            Label::Negative => b.push(v),
        }
    }
    Ok(MembershipStrategy::User { a, b })
}

fn hyperparams(m: &ModelArgs) -> Hyperparams {
    let d = Hyperparams::default();
    Hyperparams {
        p1: m.p1.unwrap_or(d.p1),
        p2: m.p2.unwrap_or(d.p2),
        c: m.c.unwrap_or(d.c),
        m: m.m.unwrap_or(d.m),
    }
}

fn params_json(algo: Algorithm, h: &Hyperparams) -> Value {
    h.relevant(algo)
        .into_iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn resolve_grid(g: &GridArgs, settings: &ManifestSettings) -> Grid {
    let d = Grid::default();
    Grid {
        p: g.grid_p.clone().or_else(|| settings.grid_p.clone()).unwrap_or(d.p),
        c: g.grid_c.clone().or_else(|| settings.grid_c.clone()).unwrap_or(d.c),
        m: g.grid_m.clone().or_else(|| settings.grid_m.clone()).unwrap_or(d.m),
    }
}

fn resolve_folds(f: &FoldArgs, settings: &ManifestSettings, norm: Normalization) -> CvOptions {
    let d = CvOptions::default();
    CvOptions {
        k: f.k.or(settings.k).unwrap_or(d.k),
        inner_k: f.inner_k.or(settings.inner_k).unwrap_or(d.inner_k),
        seed: f.seed.or(settings.seed).unwrap_or(d.seed),
        normalization: norm,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// File-name-safe form of a dataset name.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c.to_ascii_lowercase() } else { '_' })
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    let loaded = load_data(&a.data)?;
    let ds = &loaded.dataset;
    let norm = normalization(&a.model.prep.normalization, &loaded.settings)?;
    let name = membership_name(&a.model.prep.membership, &loaded.settings);
    let membership = match (name.as_str(), &a.model.prep.membership_file) {
        ("user", Some(path)) => read_memberships(path, ds)?,
        ("user", None) => return Err(usage("--membership user needs --membership-file")),
        (_, Some(_)) => return Err(usage("--membership-file requires --membership user")),
        (other, None) => fold_membership(other)?,
    };
    let params = hyperparams(&a.model);
    let spec = TrainerSpec {
        algorithm: a.model.algo,
        params,
        membership,
    };
    let (model, stats) = fit_on(&ds.samples, &spec, norm).context("training failed")?;

    let correct = ds
        .samples
        .iter()
        .map(|s| model.predict(&stats.apply(&s.features)).map(|p| p.label == s.label))
        .collect::<flstsvm::Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&ok| ok)
        .count();

    let mut doc = ModelDocument::new(model);
    doc.normalization = Some(stats);
    doc.meta.insert("tool".into(), format!("flstsvm {}", env!("CARGO_PKG_VERSION")));
    doc.meta.insert("dataset".into(), ds.name.clone());
    doc.meta.insert("rows".into(), ds.len().to_string());
    doc.meta.insert("membership".into(), name);
    if let Some(path) = &a.model.prep.membership_file {
        doc.meta.insert("membership_sha256".into(), sha256_file(path)?);
    }
    for (i, (src, h)) in loaded.inputs.iter().enumerate() {
        doc.meta.insert(format!("input{i}"), format!("{src} sha256={h}"));
    }
    let out = match a.out {
        Some(p) => p,
        None => {
            let dir = out_dir();
            create_dir(&dir)?;
            dir.join("model.txt")
        }
    };
    doc.save(&out)?;
    let flags = doc.model.flags();
    println!(
        "trained {} on {} ({} rows, {} features): training accuracy {:.2}%{}",
        spec.algorithm,
        ds.name,
        ds.len(),
        ds.dim(),
        100.0 * correct as f64 / ds.len() as f64,
        if flags.is_empty() { String::new() } else { format!(" [{}]", flags.join(", ")) }
    );
    println!("model written to {}", out.display());
    Ok(())
}

fn out_dir() -> PathBuf {
    std::env::var_os("FLSTSVM_OUT_DIR").map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn predict(a: PredictArgs) -> Result<()> {
    let doc = ModelDocument::load(&a.model)?;
    let schema = csv_schema(&a.csv)?;
    let (rows, truth): (Vec<Vec<f64>>, Option<Vec<Label>>) = if a.unlabeled {
        let (rows, warnings) = load_features(&a.data, &schema)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        (rows, None)
    } else {
        let ds = load_csv(&a.data, &schema)?;
        for w in &ds.warnings {
            eprintln!("warning: {w}");
        }
        let labels = ds.samples.iter().map(|s| s.label).collect();
        (ds.samples.into_iter().map(|s| s.features).collect(), Some(labels))
    };
    let identity = NormStats {
        method: Normalization::None,
        offset: vec![0.0; doc.model.dim()],
        scale: vec![1.0; doc.model.dim()],
        constant_features: Vec::new(),
    };
    let stats = doc.normalization.as_ref().unwrap_or(&identity);

    let prov = Provenance {
        command: "predict",
        inputs: vec![
            (a.model.display().to_string(), sha256_file(&a.model)?),
            (a.data.display().to_string(), sha256_file(&a.data)?),
        ],
        config: json!({ "algorithm": doc.model.algorithm(), "unlabeled": a.unlabeled }),
    };
    let mut out = prov.comment();
    out.push_str(if truth.is_some() { "index,label,mu1,mu2,truth\n" } else { "index,label,mu1,mu2\n" });
    let mut correct = 0;
    for (i, x) in rows.iter().enumerate() {
        if x.len() != doc.model.dim() {
            return Err(Error::data(
                None,
                format!("row {} has {} features, model expects {}", i + 1, x.len(), doc.model.dim()),
            )
            .into());
        }
        let p = doc.model.predict(&stats.apply(x))?;
        let (m1, m2) = p.memberships.map_or((String::new(), String::new()), |(a, b)| (format!("{a:?}"), format!("{b:?}")));
        let _ = write!(out, "{i},{},{m1},{m2}", p.label);
        if let Some(t) = &truth {
            let _ = write!(out, ",{}", t[i]);
            correct += usize::from(t[i] == p.label);
        }
        out.push('\n');
    }
    match &a.out {
        Some(path) => write_file(path, &out)?,
        None => print!("{out}"),
    }
    if truth.is_some() {
        eprintln!("accuracy {:.2}% on {} rows", 100.0 * correct as f64 / rows.len() as f64, rows.len());
    }
    Ok(())
}

fn cv(a: CvArgs) -> Result<()> {
    let loaded = load_data(&a.data)?;
    let ds = &loaded.dataset;
    let s = &loaded.settings;
    let norm = normalization(&a.model.prep.normalization, s)?;
    let name = membership_name(&a.model.prep.membership, s);
    if a.model.prep.membership_file.is_some() {
        return Err(usage("--membership-file is only supported by `train`"));
    }
    let membership = fold_membership(&name)?;
    let opts = resolve_folds(&a.folds, s, norm);
    let algo = a.model.algo;
    let params = hyperparams(&a.model);

    let (report, config, selection) = if a.tune {
        let grid = resolve_grid(&a.grid, s);
        let g = grid_search(ds, algo, &membership, &grid, &opts)?;
        let config = json!({
            "algorithm": algo, "dataset": ds.name, "k": opts.k, "inner_k": opts.inner_k,
            "seed": opts.seed, "normalization": norm.tag(), "membership": name, "grid": grid,
        });
        let selection = json!({
            "kind": "selection",
            "best_params": params_json(algo, &g.best),
            "best_score": if g.best_score.is_finite() { json!(g.best_score) } else { Value::Null },
        });
        (g.report, config, Some(selection))
    } else {
        let spec = TrainerSpec {
            algorithm: algo,
            params,
            membership,
        };
        let report = kfold_cv(ds, &spec, &opts)?;
        let config = json!({
            "algorithm": algo, "dataset": ds.name, "k": opts.k, "seed": opts.seed,
            "normalization": norm.tag(), "membership": name, "params": params_json(algo, &params),
        });
        (report, config, None)
    };
    let prov = Provenance {
        command: "cv",
        inputs: loaded.inputs.clone(),
        config,
    };

    let mut records = format!("{}\n", prov.record());
    records.push_str(&report_records(&report));
    if let Some(sel) = &selection {
        let _ = writeln!(records, "{sel}");
    }
    let text = format!("{}{}", prov.comment(), render_report(&report));

    create_dir(&a.out)?;
    let stem = format!("cv-{}-{}", slug(&ds.name), algo.tag());
    write_file(&a.out.join(format!("{stem}.jsonl")), &records)?;
    write_file(&a.out.join(format!("{stem}.txt")), &text)?;
    print!("{}", render_report(&report));
    if let Some(sel) = selection {
        println!("selected on the full dataset: {}", sel["best_params"]);
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let mut sets: Vec<Loaded> = Vec::new();
    let mut settings = ManifestSettings::default();
    if let Some(path) = &a.source.manifest {
        let (manifest, m_input) = load_manifest(path)?;
        inputs.push(m_input);
        settings = manifest.settings.clone();
        for entry in &manifest.datasets {
            sets.push(load_manifest_entry(&manifest, entry)?);
        }
    }
    if let Some(seed) = a.source.xor {
        sets.push(xor_source(seed));
    }
    for l in &sets {
        inputs.extend(l.inputs.iter().cloned());
        for w in &l.dataset.warnings {
            eprintln!("warning: {}: {w}", l.dataset.name);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in &sets {
        if !seen.insert(l.dataset.name.clone()) {
            return Err(usage(format!("dataset name {:?} appears twice", l.dataset.name)));
        }
    }

    let norm = normalization(&a.prep.normalization, &settings)?;
    let name = membership_name(&a.prep.membership, &settings);
    if a.prep.membership_file.is_some() {
        return Err(usage("--membership-file is only supported by `train`"));
    }
    let membership = fold_membership(&name)?;
    let opts = resolve_folds(&a.folds, &settings, norm);
    let grid = resolve_grid(&a.grid, &settings);
    let algos: Vec<Algorithm> = if !a.algo.is_empty() {
        a.algo.clone()
    } else if let Some(list) = &settings.algorithms {
        list.iter().map(|s| s.parse()).collect::<flstsvm::Result<_>>()?
    } else {
        Algorithm::ALL.to_vec()
    };
    if a.grid_resolution < 2 {
        return Err(usage("--grid-resolution must be at least 2"));
    }

    let refs: BTreeMap<String, BTreeMap<Algorithm, f64>> = sets
        .iter()
        .filter(|l| !l.references.is_empty())
        .map(|l| (l.dataset.name.clone(), l.references.clone()))
        .collect();
    let datasets: Vec<Dataset> = sets.into_iter().map(|l| l.dataset).collect();
    let table = benchmark(&datasets, &algos, &membership, &grid, &opts, &refs);

    let prov = Provenance {
        command: "bench",
        inputs,
        config: json!({
            "algorithms": algos, "k": opts.k, "inner_k": opts.inner_k, "seed": opts.seed,
            "normalization": norm.tag(), "membership": name, "grid": grid,
        }),
    };
    create_dir(&a.out)?;
    let text = render_benchmark(&table);
    write_file(&a.out.join("bench.txt"), &format!("{}{text}", prov.comment()))?;
    write_file(
        &a.out.join("bench.jsonl"),
        &format!("{}\n{}", prov.record(), benchmark_records(&table)),
    )?;

    for ds in datasets.iter().filter(|d| d.dim() == 2) {
        for &algo in &algos {
            let Some(Ok(result)) = table.cell(&ds.name, algo).map(|c| c.result.as_ref()) else {
                continue;
            };
            let spec = TrainerSpec {
                algorithm: algo,
                params: result.best,
                membership: membership.clone(),
            };
            let (model, stats) = fit_on(&ds.samples, &spec, norm)?;
            let range = |j: usize| {
                let (lo, hi) = ds.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.features[j]), hi.max(s.features[j]))
                });
                let pad = 0.1 * (hi - lo).max(1e-12);
                (lo - pad, hi + pad)
            };
            let csv = decision_grid(&model, &stats, range(0), range(1), a.grid_resolution)?;
            let header = Provenance {
                command: "bench decision-grid",
                inputs: prov.inputs.clone(),
                config: json!({
                    "dataset": ds.name, "algorithm": algo, "params": params_json(algo, &result.best),
                    "membership": spec.membership.tag(), "normalization": norm.tag(),
                    "resolution": a.grid_resolution,
                }),
            };
            let path = a.out.join(format!("decision-{}-{}.csv", slug(&ds.name), algo.tag()));
            write_file(&path, &format!("{}{csv}", header.comment()))?;
        }
    }

    print!("{text}");
    let failed = table.cells.iter().filter(|c| c.result.is_err()).count();
    if failed > 0 {
        return Err(Error::Model(format!("{failed} benchmark cell(s) failed; see bench.jsonl")).into());
    }
    Ok(())
}

fn gen_xor(a: GenXorArgs) -> Result<()> {
    let ds = generate_xor(a.seed);
    let prov = Provenance {
        command: "gen-xor",
        inputs: Vec::new(),
        config: json!({ "seed": a.seed, "grid": flstsvm::data::XOR_GRID, "jitter": flstsvm::data::XOR_JITTER }),
    };
    let text = format!("{}{}", prov.comment(), ds.to_csv());
    match &a.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

