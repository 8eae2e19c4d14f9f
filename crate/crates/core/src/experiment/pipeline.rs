//! The experiment stages and the artifacts they exchange.
//!
//! Each stage reads its inputs from an output directory and writes its own
//! artifacts there, so stages can be run one at a time:
//!
//! | stage         | writes                                   |
//! |---------------|------------------------------------------|
//! | `synth`       | `X.mat`, `labels.json`, `truth/`         |
//! | `acquire`     | `Y.mat`, `A.mat`, `operator.json`        |
//! | `fit`         | `split.json`, `model/`                   |
//! | `encode`      | `codes.mat`                              |
//! | `reconstruct` | `Xhat.mat`                               |
//! | `classify`    | `classification.json`                    |
//! | `report`      | `report.json`                            |
//!
//! A stage first deletes its own previous artifacts and deletes whatever it
//! wrote if it fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dbcs::{
    bcs_fit, dbcs_fit, dl_fit, encode as encode_codes, load_model, save_model, DbcsModel, FitSnapshot, Lambda,
    LayerSpec, Method,
};
use crate::dbcs::{read_json, write_json};
use crate::error::{Error, Result};
use crate::eval::{accuracy, confusion_matrix, knn_predict, macro_accuracy, nmse, sens_spec, split_indices, LabeledDataset};
use crate::io::{mat_read, mat_write};
use crate::linear_map::LinearMap;
use crate::matrix::DenseMatrix;
use crate::operators::{build_operator, MeasurementOperator, OperatorDescriptor, OperatorKind, OperatorParams};
use crate::rng::{streams, Rng};
use crate::solvers::ista;

use super::config::{DataSpec, ExperimentConfig, FeatureProtocol, SyntheticSpec};
use super::report::{
    min_norm_least_squares, ClassMetrics, ClassificationReport, DataSummary, ObjectiveSummary,
    ReconstructionSummary, Report, REPORT_FORMAT, VERSION,
};
use super::synth::{generate, PlantedTruth};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Acquire,
    Fit,
    Encode,
    Reconstruct,
    Classify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Synth,
        Stage::Acquire,
        Stage::Fit,
        Stage::Encode,
        Stage::Reconstruct,
        Stage::Classify,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Acquire => "acquire",
            Stage::Fit => "fit",
            Stage::Encode => "encode",
            Stage::Reconstruct => "reconstruct",
            Stage::Classify => "classify",
            Stage::Report => "report",
        }
    }
}

/// Paths of the artifacts inside an output directory.
#[derive(Clone, Debug)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn x(&self) -> PathBuf {
        self.root.join("X.mat")
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.json")
    }
    pub fn truth(&self) -> PathBuf {
        self.root.join("truth")
    }
    pub fn y(&self) -> PathBuf {
        self.root.join("Y.mat")
    }
    pub fn a(&self) -> PathBuf {
        self.root.join("A.mat")
    }
    pub fn operator(&self) -> PathBuf {
        self.root.join("operator.json")
    }
    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model")
    }
    pub fn codes(&self) -> PathBuf {
        self.root.join("codes.mat")
    }
    pub fn xhat(&self) -> PathBuf {
        self.root.join("Xhat.mat")
    }
    pub fn classification(&self) -> PathBuf {
        self.root.join("classification.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn outputs(&self, stage: Stage) -> Vec<PathBuf> {
        match stage {
            Stage::Synth => vec![self.x(), self.labels(), self.truth()],
            Stage::Acquire => vec![self.y(), self.a(), self.operator()],
            Stage::Fit => vec![self.split(), self.model()],
            Stage::Encode => vec![self.codes()],
            Stage::Reconstruct => vec![self.xhat()],
            Stage::Classify => vec![self.classification()],
            Stage::Report => vec![self.report()],
        }
    }
}

/// Which samples train the classifier, which are tested, and which the
/// model was fitted on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fit: Vec<usize>,
}

fn remove(path: &Path) {
    let _ = if path.is_dir() {
        fs::remove_dir_all(path)
    } else {
        fs::remove_file(path)
    };
}

fn guarded(stage: Stage, ws: &Workspace, body: impl FnOnce() -> Result<()>) -> Result<()> {
    let outputs = ws.outputs(stage);
    outputs.iter().for_each(|p| remove(p));
    log::info!("stage {}", stage.name());
    let result = fs::create_dir_all(ws.root())
        .map_err(|e| Error::io(ws.root(), e))
        .and_then(|_| body());
    result.map_err(|e| {
        outputs.iter().for_each(|p| remove(p));
        Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        }
    })
}

fn resolved(cfg: &ExperimentConfig, x: &DenseMatrix) -> Result<ExperimentConfig> {
    cfg.resolve(x.rows())
}

fn read_labels(ws: &Workspace) -> Result<Option<Vec<usize>>> {
    let path = ws.labels();
    if path.exists() {
        read_json(&path).map(Some)
    } else {
        Ok(None)
    }
}

fn read_truth(ws: &Workspace) -> Result<Option<PlantedTruth>> {
    let dir = ws.truth();
    if !dir.exists() {
        return Ok(None);
    }
    let mut dictionaries = Vec::new();
    loop {
        let path = dir.join(format!("D{}.mat", dictionaries.len() + 1));
        if !path.exists() {
            break;
        }
        dictionaries.push(mat_read(path)?);
    }
    if dictionaries.is_empty() {
        return Err(Error::Empty("ground-truth dictionaries"));
    }
    let codes = mat_read(dir.join("Z.mat"))?;
    Ok(Some(PlantedTruth { dictionaries, codes }))
}

fn read_operator(ws: &Workspace) -> Result<MeasurementOperator> {
    let d: OperatorDescriptor = read_json(&ws.operator())?;
    MeasurementOperator::from_descriptor(&d)
}

/// Generates or loads the signals.
pub fn synth(cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Synth, ws, || {
        let (x, labels, truth) = match &cfg.data {
            DataSpec::Synthetic(spec) => {
                let mut rng = Rng::from_stream(cfg.seed, streams::SYNTH);
                let data = generate(spec, &mut rng)?;
                (data.x, data.labels, data.truth)
            }
            DataSpec::File { path, labels } => {
                let x = mat_read(path)?;
                let labels = match labels {
                    Some(p) => {
                        let l: Vec<usize> = read_json(p)?;
                        if l.len() != x.cols() {
                            return Err(Error::mismatch("labels vs signal columns", x.cols(), l.len()));
                        }
                        Some(l)
                    }
                    None => None,
                };
                (x, labels, None)
            }
        };
        mat_write(&x, ws.x())?;
        if let Some(l) = &labels {
            write_json(l, &ws.labels())?;
        }
        if let Some(t) = &truth {
            let dir = ws.truth();
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            for (i, d) in t.dictionaries.iter().enumerate() {
                mat_write(d, dir.join(format!("D{}.mat", i + 1)))?;
            }
            mat_write(&t.codes, dir.join("Z.mat"))?;
        }
        Ok(())
    })
}

/// Builds the operator and simulates `Y = A X`.
pub fn acquire(cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Acquire, ws, || {
        let x = mat_read(ws.x())?;
        let r = resolved(cfg, &x)?;
        let spec = &r.operator;
        let params = OperatorParams {
            density: spec.density,
            kept_rows: spec.kept_rows.clone(),
        };
        let op = build_operator(spec.kind, spec.m.unwrap(), x.rows(), spec.seed.unwrap(), &params)?;
        let y = op.apply(&x)?;
        mat_write(&y, ws.y())?;
        mat_write(&op.materialize(), ws.a())?;
        write_json(op.descriptor(), &ws.operator())
    })
}

/// Splits the samples and fits the configured model.
pub fn fit(cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Fit, ws, || {
        let x = mat_read(ws.x())?;
        let r = resolved(cfg, &x)?;
        let y = mat_read(ws.y())?;
        let op = read_operator(ws)?;
        let labels = read_labels(ws)?;
        let split = make_split(&r, labels.as_deref(), x.cols())?;
        write_json(&split, &ws.split())?;
        let model = fit_model(&r, &op, &x, &y, &split.fit, ws)?;
        save_model(&model, ws.model())
    })
}

fn make_split(r: &ExperimentConfig, labels: Option<&[usize]>, samples: usize) -> Result<Split> {
    let all: Vec<usize> = (0..samples).collect();
    let Some(labels) = labels else {
        return Ok(Split {
            train: all.clone(),
            test: Vec::new(),
            fit: all,
        });
    };
    let mut rng = Rng::from_stream(r.seed, streams::SPLIT);
    let (train, test) = split_indices(labels, r.eval.train_fraction, &mut rng)?;
    let fit = match r.eval.protocol {
        FeatureProtocol::FrozenEncode => train.clone(),
        FeatureProtocol::Transductive => all,
    };
    Ok(Split { train, test, fit })
}

fn fit_model(
    r: &ExperimentConfig,
    op: &MeasurementOperator,
    x: &DenseMatrix,
    y: &DenseMatrix,
    columns: &[usize],
    ws: &Workspace,
) -> Result<DbcsModel> {
    let spec = &r.model;
    let layers = spec.layers.as_deref().expect("resolved config has layers");
    let opts = spec.train_options();
    let mut rng = Rng::from_stream(r.seed, streams::FIT);
    let y_fit = y.select_columns(columns);
    match spec.method {
        Method::Dbcs => {
            let mut sizes = vec![op.n()];
            sizes.extend_from_slice(layers);
            dbcs_fit(&y_fit, op, &LayerSpec::new(sizes)?, spec.lambda_rule(), &opts, &mut rng)
        }
        Method::Bcs => bcs_fit(&y_fit, op, layers[0], spec.lambda_rule(), spec.mu, &opts, &mut rng),
        Method::Dl => dl_fit(&x.select_columns(columns), layers[0], spec.lambda_rule(), &opts, &mut rng),
        Method::CsIsta => {
            let dict = match read_truth(ws)? {
                Some(t) => t.synthesis(),
                None => DenseMatrix::identity(op.n()),
            };
            let g = op.forward(&dict);
            let lambda_rule = spec.lambda_rule();
            let lambda = match lambda_rule {
                Lambda::Absolute(v) => v,
                Lambda::DataScaled(s) => s * g.tr_matmul(&y_fit).max_abs(),
            };
            let out = ista(&g, &y_fit, lambda, &DenseMatrix::zeros(dict.cols(), y_fit.cols()), &spec.ista)?;
            Ok(DbcsModel {
                layer_spec: LayerSpec::new(vec![dict.rows(), dict.cols()])?,
                dictionaries: vec![dict],
                codes: out.z,
                lambda,
                initial_objective: out.trace[0],
                objective_trace: out.trace[1..].to_vec(),
                rejected_sweeps: Vec::new(),
                config: FitSnapshot {
                    method: Method::CsIsta,
                    seed: rng.seed(),
                    stream: rng.stream(),
                    lambda_rule,
                    mu: 0.0,
                    options: opts,
                    operator: op.descriptor().clone(),
                },
            })
        }
    }
}

/// The signals a method consumes and the operator relating them to the
/// model: `X` with the identity for `dl`, `Y` with `A` otherwise.
fn model_input(method: Method, ws: &Workspace) -> Result<(DenseMatrix, MeasurementOperator)> {
    if method == Method::Dl {
        let x = mat_read(ws.x())?;
        let id = build_operator(OperatorKind::Identity, x.rows(), x.rows(), 0, &OperatorParams::default())?;
        Ok((x, id))
    } else {
        Ok((mat_read(ws.y())?, read_operator(ws)?))
    }
}

/// Codes for every sample: fitted codes for the samples the model was fitted
/// on, frozen-dictionary encodings for the rest.
pub fn encode(_cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Encode, ws, || {
        let model = load_model(ws.model())?;
        let split: Split = read_json(&ws.split())?;
        let (signals, op) = model_input(model.config.method, ws)?;
        let samples = signals.cols();
        if model.codes.cols() != split.fit.len() {
            return Err(Error::mismatch("model codes vs fitted samples", split.fit.len(), model.codes.cols()));
        }
        let mut codes = DenseMatrix::zeros(model.layer_spec.code_dim(), samples);
        let mut fitted = vec![false; samples];
        for (k, &j) in split.fit.iter().enumerate() {
            if j >= samples {
                return Err(Error::InvalidArgument(format!("split index {j} out of range")));
            }
            codes.col_mut(j).copy_from_slice(model.codes.col(k));
            fitted[j] = true;
        }
        let rest: Vec<usize> = (0..samples).filter(|&j| !fitted[j]).collect();
        if !rest.is_empty() {
            let new = encode_codes(
                &op,
                &model.dictionaries,
                &signals.select_columns(&rest),
                model.lambda,
                &model.config.options.ista,
            )?;
            for (k, &j) in rest.iter().enumerate() {
                codes.col_mut(j).copy_from_slice(new.col(k));
            }
        }
        mat_write(&codes, ws.codes())
    })
}

/// `X̂ = D1 ⋯ DM Z`.
pub fn reconstruct(_cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Reconstruct, ws, || {
        let model = load_model(ws.model())?;
        let codes = mat_read(ws.codes())?;
        let synthesis = model.synthesis();
        if synthesis.cols() != codes.rows() {
            return Err(Error::mismatch("codes rows vs dictionary atoms", synthesis.cols(), codes.rows()));
        }
        mat_write(&synthesis.matmul(&codes), ws.xhat())
    })
}

/// Nearest-neighbour classification of the codes, plus the same classifier
/// on raw measurements. Does nothing for unlabeled data.
pub fn classify(cfg: &ExperimentConfig, ws: &Workspace) -> Result<()> {
    guarded(Stage::Classify, ws, || {
        let Some(labels) = read_labels(ws)? else {
            return Ok(());
        };
        let split: Split = read_json(&ws.split())?;
        if split.test.is_empty() {
            return Ok(());
        }
        let x = mat_read(ws.x())?;
        let r = resolved(cfg, &x)?;
        let k = r.eval.k;
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);

        let codes = LabeledDataset::with_classes(mat_read(ws.codes())?, labels.clone(), num_classes)?;
        let train = codes.subset(&split.train);
        let test = codes.subset(&split.test);
        let pred = knn_predict(&train, test.features(), k)?;
        let truth = test.labels();

        let raw = LabeledDataset::with_classes(mat_read(ws.y())?, labels, num_classes)?;
        let raw_pred = knn_predict(&raw.subset(&split.train), raw.subset(&split.test).features(), k)?;

        let per_class = (0..num_classes)
            .map(|c| {
                let rates = sens_spec(&pred, truth, c)?;
                Ok(ClassMetrics {
                    class: c,
                    support: truth.iter().filter(|&&t| t == c).count(),
                    sensitivity: rates.sensitivity,
                    specificity: rates.specificity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let report = ClassificationReport {
            classifier: format!("{k}-nearest-neighbour, Euclidean distance"),
            k,
            protocol: r.eval.protocol,
            num_classes,
            train_size: split.train.len(),
            test_size: split.test.len(),
            accuracy: accuracy(&pred, truth)?,
            macro_accuracy: macro_accuracy(&pred, truth)?,
            per_class,
            confusion: confusion_matrix(&pred, truth, num_classes)?,
            raw_measurement_accuracy: accuracy(&raw_pred, truth)?,
            predictions: pred,
        };
        write_json(&report, &ws.classification())
    })
}

/// Collects every artifact into `report.json`.
pub fn report(cfg: &ExperimentConfig, ws: &Workspace, wall_time_seconds: Option<f64>) -> Result<()> {
    guarded(Stage::Report, ws, || {
        let doc = build_report(cfg, ws, wall_time_seconds)?;
        doc.ensure_finite()?;
        write_json(&doc, &ws.report())
    })
}

fn build_report(cfg: &ExperimentConfig, ws: &Workspace, wall_time_seconds: Option<f64>) -> Result<Report> {
    let x = mat_read(ws.x())?;
    let r = resolved(cfg, &x)?;
    let y = mat_read(ws.y())?;
    let operator: OperatorDescriptor = read_json(&ws.operator())?;
    let model = load_model(ws.model())?;
    let xhat = mat_read(ws.xhat())?;
    let labels = read_labels(ws)?;
    let has_truth = ws.truth().exists();

    let reconstruction = if x.frobenius_norm_sq() > 0.0 {
        let baseline = min_norm_least_squares(&mat_read(ws.a())?, &y);
        Some(ReconstructionSummary {
            nmse: nmse(&x, &xhat)?,
            nmse_zero_baseline: nmse(&x, &DenseMatrix::zeros(x.rows(), x.cols()))?,
            nmse_min_norm_least_squares: baseline.map(|b| nmse(&x, &b)).transpose()?,
        })
    } else {
        None
    };
    let classification: Option<ClassificationReport> = if ws.classification().exists() {
        Some(read_json(&ws.classification())?)
    } else {
        None
    };

    let method = r.model.method;
    let protocol = r.eval.protocol;
    let mut notes = vec![format!(
        "features are classified with a {}-nearest-neighbour rule (Euclidean distance)",
        r.eval.k
    )];
    notes.push(match protocol {
        FeatureProtocol::FrozenEncode => {
            "model fitted on training samples only; test samples encoded with the dictionaries frozen".into()
        }
        FeatureProtocol::Transductive => {
            "transductive: model fitted on training and test samples together".into()
        }
    });
    match method {
        Method::Dl => notes.push("dl fits the uncompressed signals; measurements are used only by baselines".into()),
        Method::CsIsta => notes.push(if has_truth {
            "cs_ista codes against the generating dictionary product".into()
        } else {
            "cs_ista codes against the identity dictionary".into()
        }),
        _ => {}
    }

    let source = match &r.data {
        DataSpec::Synthetic(SyntheticSpec::PlantedFactorization(_)) => "planted_factorization",
        DataSpec::Synthetic(SyntheticSpec::LabeledMixture(_)) => "labeled_mixture",
        DataSpec::File { .. } => "file",
    };

    Ok(Report {
        format: REPORT_FORMAT.into(),
        version: VERSION.into(),
        method,
        feature_protocol: protocol,
        transductive: protocol == FeatureProtocol::Transductive,
        data: DataSummary {
            source: source.into(),
            signal_dim: x.rows(),
            samples: x.cols(),
            measurements: y.rows(),
            num_classes: labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1)),
            ground_truth_factors: has_truth,
        },
        operator,
        lambda: model.lambda,
        objective: ObjectiveSummary {
            initial: model.initial_objective,
            trace: model.objective_trace.clone(),
            last: model.final_objective(),
            rejected_sweeps: model.rejected_sweeps.clone(),
        },
        reconstruction,
        classification,
        notes,
        wall_time_seconds,
        config: r,
    })
}

/// Runs every stage into `cfg.output_dir`; returns the report path.
pub fn run(cfg: &ExperimentConfig) -> Result<PathBuf> {
    run_in(cfg, &Workspace::new(&cfg.output_dir))
}

/// Runs every stage into `ws`. On failure everything the run wrote is
/// removed, including the directory itself if the run created it.
pub fn run_in(cfg: &ExperimentConfig, ws: &Workspace) -> Result<PathBuf> {
    let start = Instant::now();
    let existed = ws.root().exists();
    let result = (|| {
        synth(cfg, ws)?;
        acquire(cfg, ws)?;
        fit(cfg, ws)?;
        encode(cfg, ws)?;
        reconstruct(cfg, ws)?;
        classify(cfg, ws)?;
        report(cfg, ws, Some(start.elapsed().as_secs_f64()))
    })();
    match result {
        Ok(()) => Ok(ws.report()),
        Err(e) => {
            if existed {
                Stage::ALL.iter().flat_map(|&s| ws.outputs(s)).for_each(|p| remove(&p));
            } else {
                let _ = fs::remove_dir_all(ws.root());
            }
            Err(e)
        }
    }
}

