use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::artifacts::{num, RunManifest, StageRecord, StageWriter};
use super::{PipelineError, Result, RunConfig, SmoothingConfig, Stage};
use crate::data::{
    deduplicate, default_schema, load_dataset, load_schema, smooth_dataset, split, write_dataset,
    ColumnSchema, Dataset, ScalingParams, SplitSpec,
};
use crate::gp::{self, coverage, score, GpError, KernelMode, ModelFile, Score, TrainedGP};
use crate::lime::{
    explain_all, global_scores, select_features, LimeConfig, LocalExplanation, RankBy, SelectionStrategy,
};
use crate::synth::drilling_dataset;

/// Artifact file names inside the output directory.
pub mod files {
    pub const SYNTHETIC_INPUT: &str = "synthetic_input.csv";
    pub const SCHEMA: &str = "schema.json";
    pub const PREPROCESSED: &str = "preprocessed.csv";
    pub const TRAIN: &str = "train.csv";
    pub const TEST: &str = "test.csv";
    pub const SCALING: &str = "scaling.json";
    pub const SPLIT: &str = "split.json";
    pub const PREPROCESS_REPORT: &str = "preprocess.json";
    pub const MODEL: &str = "model.json";
    pub const FIT_REPORT: &str = "fit_report.json";
    pub const FIT_TRACE: &str = "fit_trace.json";
    pub const HYPERPARAMS: &str = "hyperparams.csv";
    pub const PREDICTIONS: &str = "predictions.csv";
    pub const PREDICTIONS_HEAD: &str = "predictions_first150.csv";
    pub const METRICS: &str = "metrics.json";
    pub const EXPLANATIONS: &str = "explanations.jsonl";
    pub const IMPORTANCE_CSV: &str = "importance.csv";
    pub const IMPORTANCE_JSON: &str = "importance.json";
    pub const SELECTION: &str = "selection.json";
    pub const SELECTION_STEPS: &str = "selection_steps.csv";
    pub const SELECTED_MODEL: &str = "model_selected.json";
}

const HEAD_ROWS: usize = 150;

type Summary = BTreeMap<String, Value>;

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn require(dir: &Path, name: &str, stage: Stage) -> Result<PathBuf> {
    let path = dir.join(name);
    if path.is_file() {
        Ok(path)
    } else {
        Err(PipelineError::Missing { path, stage })
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

fn stage_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    let schema: Vec<ColumnSchema> = read_json(&require(dir, files::SCHEMA, Stage::Preprocess)?)?;
    let path = require(dir, name, Stage::Preprocess)?;
    load_dataset(&path, &schema).map_err(|source| PipelineError::Input { path, source })
}

fn dataset_csv(ds: &Dataset) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf)?;
    Ok(buf)
}

struct LoadedModel {
    file: ModelFile,
    model: TrainedGP,
    scaling: ScalingParams,
}

fn load_model(dir: &Path) -> Result<LoadedModel> {
    let file = ModelFile::load(&require(dir, files::MODEL, Stage::Fit)?)?;
    let model = file.to_model()?;
    let scaling = match &file.scaling {
        Some(s) => s.clone(),
        None => read_json(&require(dir, files::SCALING, Stage::Preprocess)?)?,
    };
    Ok(LoadedModel { file, model, scaling })
}

fn check_dims(model: &TrainedGP, ds: &Dataset) -> Result<()> {
    if model.n_features() != ds.n_features() {
        return Err(GpError::Dimension(format!(
            "model has {} inputs, test data has {}",
            model.n_features(),
            ds.n_features()
        ))
        .into());
    }
    Ok(())
}

/// Test-set score in raw target units.
fn raw_score(model: &TrainedGP, test: &Dataset, scaling: &ScalingParams) -> Result<Score> {
    let mean = model.predict_mean(&test.features)?;
    let pred: Vec<f64> = mean.iter().map(|&m| scaling.unscale_target(m)).collect();
    let actual: Vec<f64> = test.target.iter().map(|&t| scaling.unscale_target(t)).collect();
    Ok(score(&pred, &actual)?)
}

#[derive(Serialize, Deserialize)]
struct SplitRecord {
    spec: SplitSpec,
    train: Vec<usize>,
    test: Vec<usize>,
}

#[derive(Serialize)]
struct PreprocessReport {
    source: String,
    rows_read: usize,
    deduplicate: bool,
    duplicates_removed: usize,
    rows_after_dedup: usize,
    smoothing: Option<SmoothingConfig>,
    train_rows: usize,
    test_rows: usize,
    features: Vec<String>,
    target: String,
}

fn preprocess(cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    let (raw, source) = match &cfg.input {
        Some(path) => {
            let schema = match &cfg.schema {
                Some(p) => load_schema(p).map_err(|source| PipelineError::Input { path: p.clone(), source })?,
                None => default_schema(),
            };
            let ds = load_dataset(path, &schema).map_err(|source| PipelineError::Input {
                path: path.clone(),
                source,
            })?;
            (ds, path.display().to_string())
        }
        None => {
            if cfg.schema.is_some() {
                return Err(PipelineError::Config("a custom schema needs an input file".into()));
            }
            let ds = drilling_dataset(cfg.synthetic.rows, cfg.synthetic.seed)?;
            out.bytes(files::SYNTHETIC_INPUT, &dataset_csv(&ds)?)?;
            (ds, files::SYNTHETIC_INPUT.to_string())
        }
    };
    let rows_read = raw.n_rows();
    let (deduped, removed) = if cfg.preprocess.deduplicate {
        deduplicate(&raw)
    } else {
        (raw, 0)
    };
    let rows_after_dedup = deduped.n_rows();
    let cleaned = match &cfg.preprocess.smoothing {
        Some(s) => smooth_dataset(&deduped, s.window, s.order)?,
        None => deduped,
    };
    let (train_raw, test_raw, idx) = split(&cleaned, &cfg.split)?;
    let scaling = ScalingParams::fit(&train_raw)?;
    let train = scaling.apply(&train_raw)?;
    let test = scaling.apply(&test_raw)?;

    out.json(files::SCHEMA, &cleaned.schema)?;
    out.bytes(files::PREPROCESSED, &dataset_csv(&cleaned)?)?;
    out.bytes(files::TRAIN, &dataset_csv(&train)?)?;
    out.bytes(files::TEST, &dataset_csv(&test)?)?;
    out.json(files::SCALING, &scaling)?;
    out.json(
        files::SPLIT,
        &SplitRecord {
            spec: cfg.split.clone(),
            train: idx.train.clone(),
            test: idx.test.clone(),
        },
    )?;
    let report = PreprocessReport {
        source,
        rows_read,
        deduplicate: cfg.preprocess.deduplicate,
        duplicates_removed: removed,
        rows_after_dedup,
        smoothing: cfg.preprocess.smoothing.clone(),
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        features: cleaned.feature_columns().map(|c| c.symbol.clone()).collect(),
        target: cleaned.target_column().symbol.clone(),
    };
    out.json(files::PREPROCESS_REPORT, &report)?;

    Ok(Summary::from([
        ("rows_read".into(), json!(rows_read)),
        ("removed".into(), json!(removed)),
        ("train_rows".into(), json!(report.train_rows)),
        ("test_rows".into(), json!(report.test_rows)),
    ]))
}

#[derive(Serialize)]
struct NamedValue {
    symbol: String,
    name: String,
    value: f64,
}

#[derive(Serialize)]
struct RestartSummary {
    restart: usize,
    start_lml: Option<f64>,
    lml: Option<f64>,
    termination: Option<crate::lbfgs::Termination>,
    iterations: usize,
    evaluations: usize,
    error: Option<String>,
}

#[derive(Serialize)]
struct FitReport {
    kernel: KernelMode,
    units: &'static str,
    signal_std: f64,
    noise_std: f64,
    length_scales: Vec<NamedValue>,
    jitter: f64,
    initial_lml: Option<f64>,
    final_lml: f64,
    best_restart: usize,
    restarts: Vec<RestartSummary>,
    train_rows: usize,
}

fn feature_schema(ds: &Dataset) -> Vec<ColumnSchema> {
    ds.feature_columns().cloned().collect()
}

fn fit_model(x: &Dataset, gp_cfg: &gp::FitConfig, out: &mut StageWriter) -> Result<TrainedGP> {
    match gp::fit(&x.features, &x.target, gp_cfg) {
        Ok(m) => Ok(m),
        Err(GpError::AllRestartsFailed { message, restarts }) => {
            out.json(files::FIT_TRACE, &restarts)?;
            Err(GpError::AllRestartsFailed { message, restarts }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn fit_stage(cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    let train = stage_dataset(&out.dir, files::TRAIN)?;
    let scaling: ScalingParams = read_json(&require(&out.dir, files::SCALING, Stage::Preprocess)?)?;
    let model = fit_model(&train, &cfg.gp, out)?;
    let cols = feature_schema(&train);
    let symbols: Vec<String> = cols.iter().map(|c| c.symbol.clone()).collect();
    out.json(files::MODEL, &ModelFile::new(&model, Some(scaling), symbols))?;

    let h = &model.hyperparams;
    let log = &model.fit_log;
    let report = FitReport {
        kernel: model.mode,
        units: "standardized",
        signal_std: h.signal_std,
        noise_std: h.noise_std,
        length_scales: cols
            .iter()
            .zip(&h.length_scales)
            .map(|(c, &value)| NamedValue {
                symbol: c.symbol.clone(),
                name: c.name.clone(),
                value,
            })
            .collect(),
        jitter: model.jitter,
        initial_lml: log.initial_lml,
        final_lml: log.final_lml,
        best_restart: log.best_restart,
        restarts: log
            .restarts
            .iter()
            .enumerate()
            .map(|(restart, r)| RestartSummary {
                restart,
                start_lml: r.start_lml,
                lml: r.lml,
                termination: r.termination,
                iterations: r.iterations,
                evaluations: r.evaluations,
                error: r.error.clone(),
            })
            .collect(),
        train_rows: train.n_rows(),
    };
    out.json(files::FIT_REPORT, &report)?;

    let mut rows = vec![
        vec!["signal_std".into(), "sigma_f".into(), num(h.signal_std)],
        vec!["noise_std".into(), "sigma_n".into(), num(h.noise_std)],
    ];
    for (c, &l) in cols.iter().zip(&h.length_scales) {
        rows.push(vec!["length_scale".into(), c.symbol.clone(), num(l)]);
    }
    out.csv(files::HYPERPARAMS, &["parameter", "symbol", "value"], &rows)?;

    Ok(Summary::from([
        ("final_lml".into(), json!(log.final_lml)),
        ("initial_lml".into(), json!(log.initial_lml)),
        ("restarts".into(), json!(log.restarts.len())),
    ]))
}

#[derive(Serialize)]
struct Metrics {
    rmse: f64,
    r2: f64,
    coverage_95: f64,
    test_rows: usize,
    units: String,
}

fn predict_stage(_cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    let loaded = load_model(&out.dir)?;
    let test = stage_dataset(&out.dir, files::TEST)?;
    let split: SplitRecord = read_json(&require(&out.dir, files::SPLIT, Stage::Preprocess)?)?;
    check_dims(&loaded.model, &test)?;
    let preds: Vec<gp::Prediction> = loaded
        .model
        .predict(&test.features)?
        .iter()
        .map(|p| p.destandardize(&loaded.scaling))
        .collect();
    let actual: Vec<f64> = test.target.iter().map(|&t| loaded.scaling.unscale_target(t)).collect();

    let rows: Vec<Vec<String>> = preds
        .iter()
        .zip(&actual)
        .enumerate()
        .map(|(i, (p, a))| {
            let row = split.test.get(i).map(|r| r.to_string()).unwrap_or_default();
            vec![i.to_string(), row, num(*a), num(p.mean), num(p.lower), num(p.upper)]
        })
        .collect();
    let header = ["index", "row", "actual", "predicted", "lower95", "upper95"];
    out.csv(files::PREDICTIONS, &header, &rows)?;
    out.csv(files::PREDICTIONS_HEAD, &header, &rows[..rows.len().min(HEAD_ROWS)])?;

    let mean: Vec<f64> = preds.iter().map(|p| p.mean).collect();
    let lower: Vec<f64> = preds.iter().map(|p| p.lower).collect();
    let upper: Vec<f64> = preds.iter().map(|p| p.upper).collect();
    let s = score(&mean, &actual)?;
    let metrics = Metrics {
        rmse: s.rmse,
        r2: s.r2,
        coverage_95: coverage(&actual, &lower, &upper),
        test_rows: actual.len(),
        units: test.target_column().unit.clone(),
    };
    out.json(files::METRICS, &metrics)?;
    Ok(Summary::from([
        ("rmse".into(), json!(metrics.rmse)),
        ("r2".into(), json!(metrics.r2)),
        ("coverage_95".into(), json!(metrics.coverage_95)),
    ]))
}

#[derive(Serialize)]
struct ImportanceRow {
    rank: usize,
    feature: usize,
    symbol: String,
    name: String,
    mean_abs: f64,
    actual_mean: f64,
    support_freq: f64,
    weighted_mean: f64,
}

#[derive(Serialize)]
struct ImportanceFile {
    rank_by: RankBy,
    explanations: usize,
    weighted_fallback: bool,
    kernel_width: f64,
    lime: LimeConfig,
    features: Vec<ImportanceRow>,
}

fn explain_stage(cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    let loaded = load_model(&out.dir)?;
    let test = stage_dataset(&out.dir, files::TEST)?;
    check_dims(&loaded.model, &test)?;
    let explanations = explain_all(&loaded.model, &test.features, &cfg.lime)?;
    let report = global_scores(&explanations, cfg.rank_by)?;

    let mut lines = String::new();
    for e in &explanations {
        lines.push_str(&serde_json::to_string(e)?);
        lines.push('\n');
    }
    out.bytes(files::EXPLANATIONS, lines.as_bytes())?;

    let cols = feature_schema(&test);
    let rows: Vec<ImportanceRow> = report
        .ranking
        .iter()
        .map(|&j| {
            let f = &report.features[j];
            ImportanceRow {
                rank: f.rank,
                feature: j,
                symbol: cols[j].symbol.clone(),
                name: cols[j].name.clone(),
                mean_abs: f.mean_abs,
                actual_mean: f.actual_mean,
                support_freq: f.support_freq,
                weighted_mean: f.weighted_mean,
            }
        })
        .collect();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.rank.to_string(),
                r.symbol.clone(),
                r.name.clone(),
                num(r.mean_abs),
                num(r.actual_mean),
                num(r.support_freq),
                num(r.weighted_mean),
            ]
        })
        .collect();
    out.csv(
        files::IMPORTANCE_CSV,
        &["rank", "symbol", "name", "mean_abs", "actual_mean", "support_freq", "weighted_mean"],
        &csv_rows,
    )?;
    let top: Vec<String> = rows.iter().take(5).map(|r| r.symbol.clone()).collect();
    out.json(
        files::IMPORTANCE_JSON,
        &ImportanceFile {
            rank_by: cfg.rank_by,
            explanations: explanations.len(),
            weighted_fallback: report.weighted_fallback,
            kernel_width: cfg.lime.kernel_width_for(test.n_features()),
            lime: cfg.lime.clone(),
            features: rows,
        },
    )?;
    Ok(Summary::from([
        ("explanations".into(), json!(explanations.len())),
        ("test_rows".into(), json!(test.n_rows())),
        ("top5".into(), json!(top)),
    ]))
}

#[derive(Serialize)]
struct ModelScore {
    n_features: usize,
    rmse: f64,
    r2: f64,
}

#[derive(Serialize)]
struct SelectionReport {
    strategy: SelectionStrategy,
    rank_by: RankBy,
    selected: Vec<String>,
    selected_indices: Vec<usize>,
    candidates: Vec<String>,
    frequencies: Option<Vec<f64>>,
    full: ModelScore,
    selected_model: ModelScore,
    units: String,
}

struct Retrained {
    model: TrainedGP,
    score: Score,
}

fn retrain(
    train: &Dataset,
    test: &Dataset,
    scaling: &ScalingParams,
    columns: &[usize],
    gp_cfg: &gp::FitConfig,
    out: &mut StageWriter,
) -> Result<Retrained> {
    let tr = train.select_features(columns);
    let te = test.select_features(columns);
    let mut cfg = gp_cfg.clone();
    if cfg.init.as_ref().is_some_and(|v| v.len() != gp::LogParams::len_for(cfg.kernel, columns.len())) {
        cfg.init = None;
    }
    let model = fit_model(&tr, &cfg, out)?;
    let score = raw_score(&model, &te, scaling)?;
    Ok(Retrained { model, score })
}

fn read_explanations(path: &Path) -> Result<Vec<LocalExplanation>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(PipelineError::from))
        .collect()
}

fn select_stage(cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    let explanations = read_explanations(&require(&out.dir, files::EXPLANATIONS, Stage::Explain)?)?;
    require(&out.dir, files::IMPORTANCE_JSON, Stage::Explain)?;
    let loaded = load_model(&out.dir)?;
    let train = stage_dataset(&out.dir, files::TRAIN)?;
    let test = stage_dataset(&out.dir, files::TEST)?;
    check_dims(&loaded.model, &test)?;
    let report = global_scores(&explanations, cfg.rank_by)?;
    let selection = select_features(&report, &explanations, &cfg.selection)?;
    let cols = feature_schema(&test);
    let sym = |idx: &[usize]| -> Vec<String> { idx.iter().map(|&j| cols[j].symbol.clone()).collect() };

    let full = raw_score(&loaded.model, &test, &loaded.scaling)?;
    let d = test.n_features();
    let mut steps: Vec<Vec<String>> = vec![vec![
        "0".into(),
        "full".into(),
        d.to_string(),
        sym(&(0..d).collect::<Vec<_>>()).join(";"),
        num(full.rmse),
        num(full.r2),
        "true".into(),
    ]];

    let (chosen, best) = match cfg.selection {
        SelectionStrategy::Forward { improvement_floor } => {
            let mut best: Option<(usize, Retrained)> = None;
            for k in 1..=selection.candidates.len() {
                let cols_k = &selection.candidates[..k];
                let r = retrain(&train, &test, &loaded.scaling, cols_k, &cfg.gp, out)?;
                let keep = match &best {
                    None => true,
                    Some((_, prev)) => (prev.score.rmse - r.score.rmse) / prev.score.rmse >= improvement_floor,
                };
                steps.push(vec![
                    k.to_string(),
                    "forward".into(),
                    k.to_string(),
                    sym(cols_k).join(";"),
                    num(r.score.rmse),
                    num(r.score.r2),
                    keep.to_string(),
                ]);
                if !keep {
                    break;
                }
                best = Some((k, r));
            }
            let (k, r) = best.expect("at least one candidate");
            (selection.candidates[..k].to_vec(), r)
        }
        _ => {
            let r = retrain(&train, &test, &loaded.scaling, &selection.features, &cfg.gp, out)?;
            steps.push(vec![
                "1".into(),
                "selected".into(),
                selection.features.len().to_string(),
                sym(&selection.features).join(";"),
                num(r.score.rmse),
                num(r.score.r2),
                "true".into(),
            ]);
            (selection.features.clone(), r)
        }
    };

    out.csv(
        files::SELECTION_STEPS,
        &["step", "model", "n_features", "features", "rmse", "r2", "kept"],
        &steps,
    )?;
    let sel_scaling = loaded.scaling.select_features(&chosen);
    out.json(files::SELECTED_MODEL, &ModelFile::new(&best.model, Some(sel_scaling), sym(&chosen)))?;
    let report = SelectionReport {
        strategy: cfg.selection.clone(),
        rank_by: cfg.rank_by,
        selected: sym(&chosen),
        selected_indices: chosen.clone(),
        candidates: sym(&selection.candidates),
        frequencies: selection.frequencies.clone(),
        full: ModelScore {
            n_features: d,
            rmse: full.rmse,
            r2: full.r2,
        },
        selected_model: ModelScore {
            n_features: chosen.len(),
            rmse: best.score.rmse,
            r2: best.score.r2,
        },
        units: test.target_column().unit.clone(),
    };
    out.json(files::SELECTION, &report)?;
    debug_assert_eq!(loaded.file.feature_symbols.len(), d);
    Ok(Summary::from([
        ("selected".into(), json!(report.selected)),
        ("full_rmse".into(), json!(full.rmse)),
        ("selected_rmse".into(), json!(best.score.rmse)),
    ]))
}

fn execute(stage: Stage, cfg: &RunConfig, out: &mut StageWriter) -> Result<Summary> {
    match stage {
        Stage::Preprocess => preprocess(cfg, out),
        Stage::Fit => fit_stage(cfg, out),
        Stage::Predict => predict_stage(cfg, out),
        Stage::Explain => explain_stage(cfg, out),
        Stage::Select => select_stage(cfg, out),
    }
}

fn timed(stage: Stage, cfg: &RunConfig) -> Result<StageRecord> {
    let start = Instant::now();
    let mut out = StageWriter::new(&cfg.output_dir);
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| io_err(&cfg.output_dir, e))?;
    let summary = execute(stage, cfg, &mut out)?;
    Ok(StageRecord {
        stage,
        seconds: start.elapsed().as_secs_f64(),
        artifacts: out.written,
        summary,
    })
}

/// Runs one stage and merges its record into the manifest in the output
/// directory.
pub fn run_stage(stage: Stage, config: &RunConfig) -> Result<RunManifest> {
    let cfg = config.resolved();
    let rec = timed(stage, &cfg)?;
    let mut manifest = RunManifest::load_or_new(&cfg.output_dir, &cfg);
    manifest.record(rec);
    manifest.save(&cfg.output_dir)?;
    Ok(manifest)
}

pub fn cmd_preprocess(config: &RunConfig) -> Result<RunManifest> {
    run_stage(Stage::Preprocess, config)
}

pub fn cmd_fit(config: &RunConfig) -> Result<RunManifest> {
    run_stage(Stage::Fit, config)
}

pub fn cmd_predict(config: &RunConfig) -> Result<RunManifest> {
    run_stage(Stage::Predict, config)
}

pub fn cmd_explain(config: &RunConfig) -> Result<RunManifest> {
    run_stage(Stage::Explain, config)
}

pub fn cmd_select(config: &RunConfig) -> Result<RunManifest> {
    run_stage(Stage::Select, config)
}

/// All stages in order under one fresh manifest. The first failure stops
/// the run; artifacts of completed stages stay in place and the manifest
/// lists them.
pub fn cmd_run_all(config: &RunConfig) -> Result<RunManifest> {
    let cfg = config.resolved();
    let mut manifest = RunManifest::new(&cfg);
    for stage in Stage::ALL {
        match timed(stage, &cfg) {
            Ok(rec) => manifest.record(rec),
            Err(e) => {
                if cfg.output_dir.is_dir() {
                    manifest.save(&cfg.output_dir)?;
                }
                return Err(PipelineError::Stage {
                    stage,
                    source: Box::new(e),
                });
            }
        }
    }
    manifest.save(&cfg.output_dir)?;
    Ok(manifest)
}
