use std::fs;
use std::path::Path;

use dbcs_core::dbcs::objective;
use dbcs_core::experiment::{
    self, synth::generate, ExperimentConfig, FeatureProtocol, MixtureSpec, PlantedSpec, Report, Stage,
    SyntheticSpec, Workspace, REPORT_SCHEMA,
};
use dbcs_core::{build_operator, mat_read, mat_write, DenseMatrix, Error, OperatorKind, Rng};
use serde_json::Value;

fn planted_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{
            "seed": 11,
            "data": {"source": "synthetic", "generator": "planted_factorization",
                     "sizes": [16, 12, 8], "sparsity": 2, "samples": 40},
            "model": {"sweeps": 8}
        }"#,
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn mixture_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(
        r#"{
            "seed": 5,
            "data": {"source": "synthetic", "generator": "labeled_mixture",
                     "classes": 3, "dim": 16, "samples_per_class": 10},
            "operator": {"ratio": 0.5},
            "model": {"layers": [12, 8], "sweeps": 5}
        }"#,
    )
    .unwrap();
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn read_report(path: &Path) -> (Report, Value) {
    let text = fs::read_to_string(path).unwrap();
    (serde_json::from_str(&text).unwrap(), serde_json::from_str(&text).unwrap())
}

fn validate(doc: &Value) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

fn without_wall_time(path: &Path) -> Value {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["wall_time_seconds"] = Value::Null;
    v
}

fn mat_files(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        if entry.extension().is_some_and(|e| e == "mat") {
            out.push(entry.strip_prefix(dir).unwrap().display().to_string());
        }
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

#[test]
fn planted_run_produces_valid_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = planted_config(&tmp.path().join("out"));
    let path = experiment::run(&cfg).unwrap();
    let (report, doc) = read_report(&path);
    validate(&doc);

    assert_eq!(report.config.operator.m, Some(4));
    assert_eq!(report.config.model.layers, Some(vec![12, 8]));
    assert!(report.wall_time_seconds.is_some());
    assert!(report.classification.is_none());
    assert!(report.data.ground_truth_factors);
    let rec = report.reconstruction.unwrap();
    assert_eq!(rec.nmse_zero_baseline, 1.0);
    assert!(rec.nmse.is_finite());
    for w in report.objective.trace.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9));
    }
    for name in ["X.mat", "Y.mat", "A.mat", "operator.json", "split.json", "codes.mat", "Xhat.mat"] {
        assert!(tmp.path().join("out").join(name).exists(), "{name}");
    }
    assert!(tmp.path().join("out/model/manifest.json").exists());
    assert!(tmp.path().join("out/truth/D2.mat").exists());
}

#[test]
fn dbcs_quarter_sampling_beats_zero_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.data = experiment::DataSpec::Synthetic(SyntheticSpec::PlantedFactorization(PlantedSpec {
        sizes: vec![32, 24, 16],
        sparsity: 3,
        noise: 0.0,
        samples: 100,
    }));
    cfg.model.sweeps = 10;
    cfg.output_dir = tmp.path().to_path_buf();
    let (report, _) = read_report(&experiment::run(&cfg).unwrap());
    assert_eq!(report.config.operator.ratio, 0.25);
    let rec = report.reconstruction.unwrap();
    assert!(rec.nmse < rec.nmse_zero_baseline);
}

#[test]
fn labeled_run_reports_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = mixture_config(tmp.path());
    let (report, doc) = read_report(&experiment::run(&cfg).unwrap());
    validate(&doc);
    let c = report.classification.unwrap();
    assert_eq!(c.num_classes, 3);
    assert_eq!(c.train_size + c.test_size, 30);
    assert_eq!(c.train_size, 15);
    assert_eq!(c.per_class.len(), 3);
    assert_eq!(c.confusion.iter().flatten().sum::<usize>(), c.test_size);
    assert_eq!(report.feature_protocol, FeatureProtocol::FrozenEncode);
    assert!(!report.transductive);
    let codes = mat_read(tmp.path().join("codes.mat")).unwrap();
    assert_eq!(codes.shape(), (8, 30));
}

#[test]
fn transductive_protocol_is_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = mixture_config(tmp.path());
    cfg.eval.protocol = FeatureProtocol::Transductive;
    let (report, _) = read_report(&experiment::run(&cfg).unwrap());
    assert!(report.transductive);
    assert!(report.notes.iter().any(|n| n.contains("transductive")));
    let split: experiment::Split =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("split.json")).unwrap()).unwrap();
    assert_eq!(split.fit, (0..30).collect::<Vec<_>>());
}

#[test]
fn every_method_runs() {
    for method in ["dbcs", "bcs", "dl", "cs_ista"] {
        let tmp = tempfile::tempdir().unwrap();
        let layers = if method == "dbcs" { "[12, 8]" } else { "[12]" };
        let mut cfg = ExperimentConfig::from_json(&format!(
            r#"{{"data": {{"source": "synthetic", "generator": "labeled_mixture",
                          "classes": 2, "dim": 16, "samples_per_class": 6}},
                "operator": {{"kind": "sparse_binary", "ratio": 0.5}},
                "model": {{"method": "{method}", "layers": {layers}, "sweeps": 3}}}}"#
        ))
        .unwrap();
        cfg.output_dir = tmp.path().to_path_buf();
        let (report, doc) = read_report(&experiment::run(&cfg).unwrap());
        validate(&doc);
        assert_eq!(report.method.as_str(), method);
    }
}

#[test]
fn cs_ista_on_planted_data_has_monotone_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = planted_config(tmp.path());
    cfg.model.method = dbcs_core::dbcs::Method::CsIsta;
    let (report, _) = read_report(&experiment::run(&cfg).unwrap());
    let trace = &report.objective.trace;
    assert!(!trace.is_empty());
    assert!(trace[0] <= report.objective.initial);
    for w in trace.windows(2) {
        assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
    }
    // the dictionary is the generating one
    let d = mat_read(tmp.path().join("model/D1.mat")).unwrap();
    assert_eq!(d.shape(), (16, 8));
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for cfg in [mixture_config(&a), planted_config(&a)] {
        let mut cfg_b = cfg.clone();
        cfg_b.output_dir = b.clone();
        let mut cfg_a = cfg;
        cfg_a.output_dir = a.clone();
        experiment::run(&cfg_a).unwrap();
        experiment::run(&cfg_b).unwrap();
        let mut ra = without_wall_time(&a.join("report.json"));
        let mut rb = without_wall_time(&b.join("report.json"));
        ra["config"]["output_dir"] = Value::Null;
        rb["config"]["output_dir"] = Value::Null;
        assert_eq!(ra, rb);
        let files = mat_files(&a);
        assert_eq!(files, mat_files(&b));
        for f in files {
            assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn stages_one_by_one_match_run() {
    let tmp = tempfile::tempdir().unwrap();
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    let mut cfg = mixture_config(&whole);
    experiment::run(&cfg).unwrap();

    cfg.output_dir = staged.clone();
    let ws = Workspace::new(&staged);
    experiment::synth(&cfg, &ws).unwrap();
    experiment::acquire(&cfg, &ws).unwrap();
    experiment::fit(&cfg, &ws).unwrap();
    experiment::encode(&cfg, &ws).unwrap();
    experiment::reconstruct(&cfg, &ws).unwrap();
    experiment::classify(&cfg, &ws).unwrap();
    experiment::report(&cfg, &ws, None).unwrap();

    for f in mat_files(&whole) {
        assert_eq!(fs::read(whole.join(&f)).unwrap(), fs::read(staged.join(&f)).unwrap(), "{f}");
    }
    for f in ["classification.json", "split.json", "operator.json", "model/manifest.json"] {
        assert_eq!(fs::read(whole.join(f)).unwrap(), fs::read(staged.join(f)).unwrap(), "{f}");
    }
    let mut a = without_wall_time(&whole.join("report.json"));
    let mut b = without_wall_time(&staged.join("report.json"));
    a["config"]["output_dir"] = Value::Null;
    b["config"]["output_dir"] = Value::Null;
    assert_eq!(a, b);
}

#[test]
fn failing_stage_is_named_and_outputs_removed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut cfg = mixture_config(&out);
    cfg.eval.k = 1000;
    match experiment::run(&cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "classify"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    assert!(!out.exists(), "partial outputs left behind");

    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let err = experiment::run(&cfg).unwrap_err();
    assert!(err.to_string().contains("classify"), "{err}");
    let left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, vec![std::ffi::OsString::from("keep.txt")]);
}

#[test]
fn missing_input_fails_in_synth() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json(r#"{"data": {"source": "file", "path": "/nonexistent/x.mat"}}"#).unwrap();
    cfg.output_dir = tmp.path().join("out");
    match experiment::run(&cfg) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "synth");
            assert!(source.to_string().contains("/nonexistent/x.mat"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn file_source_with_labels() {
    let tmp = tempfile::tempdir().unwrap();
    let data = generate(
        &SyntheticSpec::LabeledMixture(MixtureSpec {
            classes: 2,
            dim: 8,
            samples_per_class: 5,
            ..Default::default()
        }),
        &mut Rng::new(3),
    )
    .unwrap();
    mat_write(&data.x, tmp.path().join("x.mat")).unwrap();
    fs::write(tmp.path().join("labels.json"), serde_json::to_string(&data.labels.unwrap()).unwrap()).unwrap();
    let cfg_path = tmp.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"data": {"source": "file", "path": "x.mat", "labels": "labels.json"},
            "operator": {"kind": "row_subsample", "ratio": 0.5},
            "model": {"sweeps": 2}}"#,
    )
    .unwrap();
    let mut cfg = ExperimentConfig::load(&cfg_path).unwrap();
    cfg.output_dir = tmp.path().join("out");
    let (report, doc) = read_report(&experiment::run(&cfg).unwrap());
    validate(&doc);
    assert_eq!(report.data.source, "file");
    assert_eq!(report.data.num_classes, Some(2));
    assert!(report.classification.is_some());
}

#[test]
fn planted_synth_is_exact() {
    let data = generate(&SyntheticSpec::default(), &mut Rng::new(1)).unwrap();
    let truth = data.truth.unwrap();
    let n = data.x.rows();
    let id = build_operator(OperatorKind::Identity, n, n, 0, &Default::default()).unwrap();
    let f = objective(&truth.dictionaries, &truth.codes, &data.x, &id, 0.0).unwrap();
    assert!(f <= 1e-10, "{f}");
}

#[test]
fn stage_outputs_cover_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let ws = Workspace::new(tmp.path());
    let cfg = planted_config(tmp.path());
    experiment::run(&cfg).unwrap();
    let listed: Vec<_> = Stage::ALL.iter().flat_map(|&s| ws.outputs(s)).collect();
    for e in fs::read_dir(tmp.path()).unwrap() {
        let p = e.unwrap().path();
        assert!(listed.contains(&p), "{} not owned by any stage", p.display());
    }
}

#[test]
fn csv_export_from_file() {
    let tmp = tempfile::tempdir().unwrap();
    let m = DenseMatrix::from_row_major(2, 3, &[1.0, -0.25, 3e-9, 0.0, 1e22, 7.0]).unwrap();
    mat_write(&m, tmp.path().join("m.mat")).unwrap();
    experiment::export_csv(tmp.path().join("m.mat"), tmp.path().join("m.csv")).unwrap();
    let text = fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert_eq!(text, "1,-0.25,3e-9\n0,1e22,7\n");

    fs::write(tmp.path().join("bad.mat"), b"NOPE!xxxxxxxx").unwrap();
    assert!(matches!(
        experiment::export_csv(tmp.path().join("bad.mat"), tmp.path().join("bad.csv")),
        Err(Error::BadMagic { .. })
    ));
}
