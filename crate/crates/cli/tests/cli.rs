use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use csf_cli::commands::{cmd_nystrom_bench, cmd_spectral, cmd_sweep, cmd_synth, SpectralRequest, SweepKind};
use csf_cli::config::ExperimentConfig;
use csf_cli::experiment::{read_json, run_experiment, RunRecord, AGGREGATE_FILE, GAMMA_SCORES_FILE, RUNS_DIR};
use csf_core::nystrom::NystromMode;
use csf_core::tsv::Table;

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy2")
}

fn quick(dataset: &str) -> ExperimentConfig {
    ExperimentConfig {
        dataset: dataset.into(),
        depths: vec![1, 2],
        seeds: vec![0, 1, 2],
        epochs: 20,
        ..Default::default()
    }
}

#[test]
fn toy_run_writes_one_report() {
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dataset: toy_dir().to_string_lossy().into_owned(),
        depths: vec![1],
        seeds: vec![0],
        ..Default::default()
    };
    let res = run_experiment(&cfg, Some(out.path())).unwrap();
    assert_eq!(res.records.len(), 1);
    assert_eq!(res.metadata.split_source, "splits.json");
    let runs: Vec<_> = fs::read_dir(out.path().join(RUNS_DIR)).unwrap().collect();
    assert_eq!(runs.len(), 1);
    let record: RunRecord = read_json(&out.path().join(RUNS_DIR).join("d1_s0.json")).unwrap();
    assert_eq!(record, res.records[0]);

    let scores = Table::load(out.path().join(GAMMA_SCORES_FILE)).unwrap();
    assert_eq!(scores.column_f64("gamma").unwrap(), cfg.gamma_grid);
    let val: Vec<f64> = record.gamma_scores.iter().map(|s| s.val_accuracy).collect();
    assert_eq!(scores.column_f64("val_accuracy").unwrap(), val);

    let fixed = ExperimentConfig {
        gamma: Some(0.5),
        ..cfg
    };
    let out2 = tempfile::tempdir().unwrap();
    run_experiment(&fixed, Some(out2.path())).unwrap();
    assert!(!out2.path().join(GAMMA_SCORES_FILE).exists());
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = quick("synthetic:smoothing_probe");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(a.path())).unwrap();
    run_experiment(&cfg, Some(b.path())).unwrap();
    for rel in ["aggregate.tsv", "config.json", "metadata.json", "runs/d2_s1.json"] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn aggregate_matches_recomputation_from_run_files() {
    let cfg = quick("synthetic:smoothing_probe:4");
    let out = tempfile::tempdir().unwrap();
    run_experiment(&cfg, Some(out.path())).unwrap();
    let table = Table::load(out.path().join(AGGREGATE_FILE)).unwrap();
    let means = table.column_f64("mean_test_acc").unwrap();
    let stds = table.column_f64("std_test_acc").unwrap();
    for (row, &depth) in cfg.depths.iter().enumerate() {
        let accs: Vec<f64> = cfg
            .seeds
            .iter()
            .map(|&s| {
                let r: RunRecord = read_json(&out.path().join(RUNS_DIR).join(RunRecord::file_name(depth, s))).unwrap();
                r.report.test_acc_at_best_val
            })
            .collect();
        let n = accs.len() as f64;
        let mean = accs.iter().sum::<f64>() / n;
        let std = (accs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        assert!((means[row] - mean).abs() < 1e-15);
        assert!((stds[row] - std).abs() < 1e-15);
    }
}

#[test]
fn singleton_sweep_equals_run() {
    let cfg = ExperimentConfig {
        a2: 10.0,
        ..quick("synthetic:smoothing_probe")
    };
    let out = tempfile::tempdir().unwrap();
    let rows = cmd_sweep(&cfg, SweepKind::A2, &[10.0], Some(out.path())).unwrap();
    let run = run_experiment(&cfg, None).unwrap();
    assert_eq!(rows.len(), run.aggregate.len());
    for (s, r) in rows.iter().zip(&run.aggregate) {
        assert_eq!(&s.row, r);
    }
    let t = Table::load(out.path().join("sweep.tsv")).unwrap();
    assert_eq!(t.rows.len(), 2);
    assert!(cmd_sweep(&cfg, SweepKind::A2, &[], None).is_err());
}

#[test]
fn disassortative_graphs_prefer_large_a2() {
    let cfg = ExperimentConfig {
        dataset: "synthetic:disassortative".into(),
        depths: vec![2],
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let rows = cmd_sweep(&cfg, SweepKind::A2, &[0.1, 1.0, 10.0, 100.0], None).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[3].row.mean_test_acc >= rows[0].row.mean_test_acc);
}

#[test]
fn knn_sparsity_barely_moves_accuracy() {
    let cfg = ExperimentConfig {
        dataset: "synthetic:texas".into(),
        depths: vec![2],
        ..Default::default()
    };
    let rows = cmd_sweep(&cfg, SweepKind::KnnTopk, &[5.0, 10.0, 20.0, 50.0], None).unwrap();
    let accs: Vec<f64> = rows.iter().map(|r| r.row.mean_test_acc).collect();
    let spread = accs.iter().cloned().fold(f64::MIN, f64::max) - accs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 0.05, "{accs:?}");
}

#[test]
fn spectral_tables() {
    let cfg = ExperimentConfig {
        dataset: "synthetic:smoothing_probe".into(),
        ..Default::default()
    };
    let req = SpectralRequest {
        filters: vec!["attr:a2=1,a3=1".parse().unwrap(), "gcn:pbar=2".parse().unwrap()],
        lambdas: Some(vec![0.0, 1.0, 2.0]),
        signals: vec![0, 3],
    };
    let out = tempfile::tempdir().unwrap();
    let t = cmd_spectral(&cfg, &req, Some(out.path())).unwrap();
    let v = t.profile.column_f64("value").unwrap();
    assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 2.0 / 3.0).abs() < 1e-15);
    assert!((v[3] - v[4]) - (v[4] - v[5]) < 1e-15 && v[4] < v[3]);

    // Highest-frequency Laplacian eigenvector: the fused kernel keeps more of it.
    let fused = t.response.column_f64("fused").unwrap();
    let top = t.response.column_f64("top").unwrap();
    let last = fused.len() - 1;
    assert!(fused[last] > top[last]);

    for name in ["profile.tsv", "response.tsv", "signals.tsv"] {
        let back = Table::load(out.path().join(name)).unwrap();
        let mem = match name {
            "profile.tsv" => &t.profile,
            "response.tsv" => &t.response,
            _ => &t.signals,
        };
        assert_eq!(&back, mem);
    }
    let bad = SpectralRequest {
        filters: vec![],
        lambdas: None,
        signals: vec![10_000],
    };
    assert!(cmd_spectral(&cfg, &bad, None).is_err());
    assert!("bandpass".parse::<csf_core::filters::FilterSpec>().is_err());
}

#[test]
fn nystrom_bench_full_sample_is_exact() {
    let cfg = ExperimentConfig {
        dataset: "synthetic:smoothing_probe".into(),
        seeds: vec![0, 1],
        ..Default::default()
    };
    let out = tempfile::tempdir().unwrap();
    let rows = cmd_nystrom_bench(&cfg, &[6, 30, 60], NystromMode::Inverse, false, Some(out.path())).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].m.is_none());
    assert!(rows[3].attr_error <= 1e-6 && rows[3].kernel_error <= 1e-6);
    assert!(rows[1].attr_error > rows[3].attr_error);
    let t = Table::load(out.path().join("nystrom.tsv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    assert!(t.column_f64("attr_error").is_some());
}

#[test]
fn synth_exports_load_back() {
    let out = tempfile::tempdir().unwrap();
    let d = cmd_synth("cornell", 2, out.path()).unwrap();
    let back = csf_core::dataset::load_dataset(out.path()).unwrap();
    assert_eq!(back.labels, d.labels);
    assert_eq!(back.graph.n_nodes(), 183);
}

fn csf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csf"))
}

#[test]
fn binary_reports_errors_with_nonzero_exit() {
    let out = csf()
        .args(["run", "--dataset", "/definitely/missing"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing"));

    let out = csf()
        .args(["run", "--dataset", "x", "--variant", "bogus"])
        .output()
        .unwrap();
    assert!(!out.status.success());

    let out = csf()
        .env("CSF_THREADS", "zero")
        .args(["run", "--dataset", "synthetic:texas"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CSF_THREADS"));
}

#[test]
fn binary_config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let toy = toy_dir();
    fs::write(
        &cfg_path,
        format!(
            r#"{{"dataset": "{}", "depths": [1], "id": "from-file"}}"#,
            toy.display()
        ),
    )
    .unwrap();
    let out = csf()
        .env("CSF_THREADS", "1")
        .args(["run", "--dataset", "/ignored", "--depths", "3", "--seed-list", "4,5"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = dir.path().join("from-file").join(RUNS_DIR);
    let mut names: Vec<String> = fs::read_dir(runs)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, vec!["d1_s4.json", "d1_s5.json"]);
}
