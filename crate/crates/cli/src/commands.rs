use std::fmt;
use std::fs;
use std::path::Path;

use glyphlab::augment::{augment_batch, AugmentPolicy};
use glyphlab::dataset::{ingest_dir, read_gly_file, split_stratified, write_gly_file, GrayImage, LabeledDataset, SplitSpec};
use glyphlab::eda::{clustered_map, hcluster_average, pairwise_euclidean, tsne as run_tsne, TsneConfig};
use glyphlab::metrics::{accuracy, confusion_matrix, macro_auc_ovr, overfit_epoch, roc_curve};
use glyphlab::models::{cnn_train, mlr_train, read_gmd_file, write_gmd_file, Model, TrainConfig, TrainHistory};

use crate::manifest::RunManifest;
use crate::svg;
use crate::{DistmapArgs, EvaluateArgs, IngestArgs, PreviewArgs, SplitArgs, TrainArgs, TsneArgs};

const OVERFIT_PATIENCE: usize = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or inputs that fail validation.
    Usage(String),
    Lib(glyphlab::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_io_like() => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<glyphlab::Error> for CliError {
    fn from(e: glyphlab::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlr,
    Cnn,
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| {
        CliError::Lib(glyphlab::Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The dataset restricted to `classes` (all when absent) and the original
/// index of every kept record.
fn select(ds: &LabeledDataset, classes: &Option<Vec<String>>) -> Result<(LabeledDataset, Vec<usize>), CliError> {
    let Some(names) = classes else {
        return Ok((ds.clone(), (0..ds.len()).collect()));
    };
    let sub = ds.select_classes(names)?;
    let kept: Vec<usize> = (0..ds.len())
        .filter(|&i| names.iter().any(|n| *n == ds.class_names()[ds.labels()[i]]))
        .collect();
    Ok((sub, kept))
}

fn require_two_classes(ds: &LabeledDataset) -> CliResult {
    let present = ds.class_counts().iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(CliError::Usage(format!(
            "need samples from at least 2 classes, found {present}"
        )));
    }
    Ok(())
}

pub fn ingest(a: &IngestArgs) -> CliResult {
    if !a.input.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", a.input.display())));
    }
    if a.size == 0 {
        return Err(CliError::Usage("--size must be positive".into()));
    }
    let ds = ingest_dir(&a.input, a.size)?;
    write_gly_file(&ds, &a.output)?;
    RunManifest::new("ingest", None)
        .param("size", a.size)
        .input(&a.input)
        .output(&a.output)
        .write(&a.output)?;
    println!("n={} classes={} size={}", ds.len(), ds.n_classes(), a.size);
    Ok(())
}

pub fn split(a: &SplitArgs) -> CliResult {
    let ds = read_gly_file(&a.input)?;
    let spec = SplitSpec::new(a.train_frac, a.val_frac, a.test_frac, a.seed)?;
    let (train, val, test) = split_stratified(&ds, &spec)?;
    write_gly_file(&train, &a.train_out)?;
    write_gly_file(&val, &a.val_out)?;
    write_gly_file(&test, &a.test_out)?;
    RunManifest::new("split", Some(a.seed))
        .param("train_frac", a.train_frac)
        .param("val_frac", a.val_frac)
        .param("test_frac", a.test_frac)
        .input(&a.input)
        .output(&a.train_out)
        .output(&a.val_out)
        .output(&a.test_out)
        .write(&a.train_out)?;
    println!("train={} val={} test={}", train.len(), val.len(), test.len());
    Ok(())
}

pub fn tsne(a: &TsneArgs) -> CliResult {
    let ds = read_gly_file(&a.input)?;
    let (ds, _) = select(&ds, &a.classes)?;
    require_two_classes(&ds)?;
    if a.perplexity.is_nan() || a.perplexity < 1.0 {
        return Err(CliError::Usage(format!("--perplexity must be >= 1, got {}", a.perplexity)));
    }
    let cfg = TsneConfig {
        perplexity: a.perplexity,
        iters: a.iters,
        exaggeration_iters: TsneConfig::default().exaggeration_iters.min(a.iters),
        seed: a.seed,
        ..TsneConfig::default()
    };
    let emb = run_tsne(ds.images(), &cfg)?;

    let mut csv = String::from("x,y,z,label,class_name\n");
    for (i, &l) in ds.labels().iter().enumerate() {
        let p = emb.y.row(i);
        csv.push_str(&format!("{},{},{},{},{}\n", p[0], p[1], p[2], l, csv_field(&ds.class_names()[l])));
    }
    csv.push_str("# iter,kl\n");
    for (k, kl) in emb.kl_history.iter().enumerate() {
        csv.push_str(&format!("# {k},{kl}\n"));
    }
    write_file(&a.out_csv, csv)?;

    let points: Vec<(f64, f64)> = (0..ds.len()).map(|i| (emb.y.row(i)[0], emb.y.row(i)[1])).collect();
    write_file(
        &a.out_svg,
        svg::scatter("t-SNE embedding (axes 1-2)", &points, ds.labels(), ds.class_names()),
    )?;
    RunManifest::new("tsne", Some(a.seed))
        .param("classes", ds.class_names().to_vec())
        .param("perplexity", a.perplexity)
        .param("effective_perplexity", cfg.effective_perplexity(ds.len()))
        .param("iters", a.iters)
        .input(&a.input)
        .output(&a.out_csv)
        .output(&a.out_svg)
        .write(&a.out_csv)?;
    println!(
        "n={} initial_kl={} final_kl={}",
        ds.len(),
        emb.initial_kl(),
        emb.final_kl()
    );
    Ok(())
}

pub fn distmap(a: &DistmapArgs) -> CliResult {
    let ds = read_gly_file(&a.input)?;
    let (ds, kept) = select(&ds, &a.classes)?;
    if ds.len() < 2 {
        return Err(CliError::Usage(format!("need at least 2 samples, got {}", ds.len())));
    }
    let d = pairwise_euclidean(ds.images())?;
    let dg = hcluster_average(&d)?;
    let map = clustered_map(&d, &dg, ds.labels())?;

    let ids: Vec<String> = map.order.iter().map(|&k| kept[k].to_string()).collect();
    let mut csv = format!("sample,{}\n", ids.join(","));
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<String> = (0..map.n).map(|j| map.get(i, j).to_string()).collect();
        csv.push_str(&format!("{id},{}\n", row.join(",")));
    }
    write_file(&a.out_csv, csv)?;
    write_file(
        &a.out_svg,
        svg::heatmap("clustered distance map", map.n, &map.reordered, &map.ribbon, ds.class_names()),
    )?;
    RunManifest::new("distmap", None)
        .param("classes", ds.class_names().to_vec())
        .input(&a.input)
        .output(&a.out_csv)
        .output(&a.out_svg)
        .write(&a.out_csv)?;
    println!("n={} top_merge_height={}", ds.len(), dg.merges.last().map_or(0.0, |m| m.height));
    Ok(())
}

fn train_config(a: &TrainArgs, kind: ModelKind) -> Result<TrainConfig, CliError> {
    let base = match kind {
        ModelKind::Mlr => TrainConfig::mlr_default(),
        ModelKind::Cnn => TrainConfig::cnn_default(),
    };
    let cfg = TrainConfig {
        epochs: a.epochs.unwrap_or(base.epochs),
        batch_size: a.batch.unwrap_or(base.batch_size),
        learning_rate: a.lr.unwrap_or(base.learning_rate),
        l2: a.l2.unwrap_or(base.l2),
        seed: a.seed,
        augment_policy: AugmentPolicy::preset(&a.augment)?,
        ..base
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: &TrainArgs, kind: ModelKind) -> CliResult {
    let cfg = train_config(a, kind)?;
    let train = read_gly_file(&a.train)?;
    let val = read_gly_file(&a.val)?;
    let (model, history): (Model, TrainHistory) = match kind {
        ModelKind::Mlr => {
            let (m, h) = mlr_train(&train, &val, &cfg)?;
            (Model::Mlr(m), h)
        }
        ModelKind::Cnn => {
            let (m, h) = cnn_train(&train, &val, &cfg)?;
            (Model::Cnn(m), h)
        }
    };
    write_gmd_file(&model, &a.model_out)?;
    write_file(&a.history_out, history.to_csv())?;
    let name = match kind {
        ModelKind::Mlr => "train-mlr",
        ModelKind::Cnn => "train-cnn",
    };
    RunManifest::new(name, Some(a.seed))
        .param("augment", a.augment.as_str())
        .param("epochs", cfg.epochs)
        .param("batch", cfg.batch_size)
        .param("lr", cfg.learning_rate)
        .param("l2", cfg.l2)
        .param("rmsprop_rho", cfg.rmsprop_rho)
        .param("rmsprop_eps", cfg.rmsprop_eps)
        .param("class_names", train.class_names().to_vec())
        .input(&a.train)
        .input(&a.val)
        .output(&a.model_out)
        .output(&a.history_out)
        .write(&a.model_out)?;

    println!("params={} epochs={}", model.param_count(), history.len());
    if let (Some(l), Some(acc)) = (history.val_loss.last(), history.val_acc.last()) {
        println!("final val_loss={l} val_acc={acc}");
    }
    if let Some(e) = overfit_epoch(&history, OVERFIT_PATIENCE) {
        println!("overfit_epoch={}", e + 1);
    }
    Ok(())
}

/// Index of the largest entry, first on ties.
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult {
    let model = read_gmd_file(&a.model)?;
    let ds = read_gly_file(&a.data)?;
    if model.n_classes() != ds.n_classes() {
        return Err(CliError::Usage(format!(
            "model predicts {} classes but the dataset has {}",
            model.n_classes(),
            ds.n_classes()
        )));
    }
    let probs = model.class_probabilities(ds.images())?;
    let c = ds.n_classes();
    let predicted: Vec<usize> = probs.data().chunks(c).map(argmax).collect();
    let cm = confusion_matrix(&predicted, ds.labels(), c)?;
    let (per_class, macro_auc) = macro_auc_ovr(&probs, ds.labels())?;
    let names = ds.class_names();

    let mut csv = String::from("class,auc\n");
    for (name, auc) in names.iter().zip(&per_class) {
        csv.push_str(&format!("{},{auc}\n", csv_field(name)));
    }
    csv.push_str(&format!("macro_auc,{macro_auc}\naccuracy,{}\n\n", accuracy(&cm)));
    let header: Vec<String> = names.iter().map(|n| csv_field(n)).collect();
    csv.push_str(&format!("true\\predicted,{}\n", header.join(",")));
    for (name, row) in names.iter().zip(&cm.counts) {
        let counts: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!("{},{}\n", csv_field(name), counts.join(",")));
    }
    write_file(&a.out_csv, csv)?;

    let curves = (0..c)
        .map(|k| {
            let scores: Vec<f64> = probs.data().chunks(c).map(|r| r[k]).collect();
            let binary: Vec<u8> = ds.labels().iter().map(|&l| u8::from(l == k)).collect();
            roc_curve(&scores, &binary).map(|r| r.points)
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_file(&a.roc_svg, svg::roc("ROC (one vs rest)", &curves, names))?;
    RunManifest::new("evaluate", None)
        .param("class_names", names.to_vec())
        .input(&a.model)
        .input(&a.data)
        .output(&a.out_csv)
        .output(&a.roc_svg)
        .write(&a.out_csv)?;
    println!("accuracy={} macro_auc={macro_auc}", accuracy(&cm));
    Ok(())
}

pub fn augment_preview(a: &PreviewArgs) -> CliResult {
    let policy = AugmentPolicy::preset(&a.policy)?;
    let ds = read_gly_file(&a.input)?;
    if ds.is_empty() {
        return Err(CliError::Usage("input dataset is empty".into()));
    }
    fs::create_dir_all(&a.out)?;
    let (h, w) = (ds.height(), ds.width());
    for k in 0..a.count {
        let batch = augment_batch(ds.images(), &policy, a.seed, k as u64)?;
        for i in 0..ds.len() {
            let pixels = batch.row(i).iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
            let img = GrayImage::new(w, h, pixels)?;
            write_file(&a.out.join(format!("{i:05}_{k:02}.pgm")), img.to_pgm())?;
        }
    }
    RunManifest::new("augment-preview", Some(a.seed))
        .param("policy", a.policy.as_str())
        .param("count", a.count)
        .input(&a.input)
        .output(&a.out)
        .write(&a.out)?;
    println!("wrote {} images", ds.len() * a.count);
    Ok(())
}
