use std::path::{Path, PathBuf};

use fairtrip::checkpoint::{decode_params, encode_params, load_params, save_params};
use fairtrip::config::{Dataset, ExperimentConfig, Overrides};
use fairtrip::experiment::{emit_baseline, run_experiment, run_table, write_table, TABLE_HEADER};
use fairtrip::report::read_embeddings;
use fairtrip_core::embedder::init_params;
use fairtrip_core::seeded_rng;
use rand::Rng as _;
use serde_json::json;

/// 300 rows where passing depends on the scores and race on the region.
fn law_csv(dir: &Path) -> PathBuf {
    let mut rng = seeded_rng(11);
    let mut text = String::from("lsat,ugpa,region,race,pass_bar\n");
    for _ in 0..300 {
        let lsat: f64 = rng.gen_range(10.0..48.0);
        let gpa: f64 = rng.gen_range(1.5..4.0);
        let north = rng.gen_bool(0.5);
        let white = rng.gen_bool(if north { 0.9 } else { 0.6 });
        let pass = lsat / 48.0 + gpa / 4.0 + rng.gen_range(-0.3..0.3) > 1.0;
        text += &format!(
            "{lsat:.1},{gpa:.2},{},{},{}\n",
            if north { "N" } else { "S" },
            if white { 7 } else { 3 },
            u8::from(pass)
        );
    }
    let path = dir.join("law.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn small_config(dir: &Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: Dataset::LawSchool,
        data_path: Some(law_csv(dir)),
        epochs: 4,
        minibatch: 16,
        method: "counterfactual".into(),
        activation: "softmax".into(),
        margin: 3.0,
        ..ExperimentConfig::default()
    }
}

#[test]
fn checkpoints_round_trip_bit_for_bit() {
    let mut p = init_params(7, 3).unwrap();
    p.running_mean = [0.1, -0.2, 1e-300];
    p.running_var = [2.0, 0.5, 1.0];
    let bytes = encode_params(&p);
    assert_eq!(&bytes[..4], b"FTL1");
    assert_eq!(bytes.len(), 16 + 8 * (7 * 4 + 4 + 4 * 3 + 9));
    assert_eq!(decode_params(&bytes).unwrap(), p);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ftl");
    save_params(&path, &p).unwrap();
    assert_eq!(load_params(&path).unwrap(), p);

    assert_eq!(decode_params(&bytes[..bytes.len() - 1]).unwrap_err().exit_code(), 3);
    assert_eq!(decode_params(b"FTL2").unwrap_err().exit_code(), 3);
    let mut wrong_dim = bytes.clone();
    wrong_dim[12] = 4;
    assert!(decode_params(&wrong_dim).is_err());
}

#[test]
fn resolution_fills_every_default() {
    let c = ExperimentConfig {
        epochs: 300,
        ..ExperimentConfig::default()
    }
    .resolve()
    .unwrap();
    assert_eq!(c.snapshot_epochs, [1, 10, 100, 300]);
    assert_eq!(c.sensitive.as_deref(), Some("sex"));
    assert!(c.data_path.unwrap().ends_with("adult"));
    let full = ExperimentConfig::default().resolve().unwrap();
    assert_eq!(full.snapshot_epochs, [1, 10, 100, 500, 1000]);
    assert_eq!((full.learning_rate, full.minibatch, full.margin), (0.05, 128, 0.0));
}

#[test]
fn invalid_configs_are_config_errors() {
    let base = ExperimentConfig::default();
    let bad = [
        json!({"method": "hardest"}),
        json!({"activation": "relu"}),
        json!({"margin": -1.0}),
        json!({"test_fraction": 1.0}),
        json!({"max_rows": 0}),
        json!({"snapshot_epochs": [0]}),
        json!({"epochs": 5, "snapshot_epochs": [6]}),
        json!({"probe": {"seeds": []}}),
        json!({"histogram": {"bins": 0}}),
    ];
    for delta in bad {
        let err = base.with_delta(&delta).and_then(|c| c.resolve()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{delta}");
    }
    assert_eq!(base.with_delta(&json!({"learning_rat": 0.1})).unwrap_err().exit_code(), 2);
    assert_eq!(base.with_delta(&json!([1])).unwrap_err().exit_code(), 2);
    assert_eq!(ExperimentConfig::from_json("{").unwrap_err().exit_code(), 2);
}

#[test]
fn deltas_merge_and_overrides_replace() {
    let base = ExperimentConfig::default();
    let c = base.with_delta(&json!({"margin": 100.0, "probe": {"n_trees": 5}})).unwrap();
    assert_eq!(c.margin, 100.0);
    assert_eq!(c.probe.n_trees, 5);
    assert_eq!(c.probe.max_depth, base.probe.max_depth);

    let mut c = ExperimentConfig {
        data_path: Some("x.csv".into()),
        sensitive: Some("race".into()),
        ..ExperimentConfig::default()
    };
    c.apply(&Overrides {
        epochs: Some(3),
        activation: Some("tanh".into()),
        ..Overrides::default()
    });
    assert_eq!((c.epochs, c.activation.as_str()), (3, "tanh"));
    assert_eq!(c.sensitive.as_deref(), Some("race"));
    c.apply(&Overrides {
        dataset: Some(Dataset::LawSchool),
        ..Overrides::default()
    });
    assert_eq!((c.data_path, c.sensitive), (None, None));
}

#[test]
fn a_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = ExperimentConfig {
        out: Some(out.clone()),
        snapshot_epochs: vec![2, 4],
        ..small_config(dir.path())
    };
    let report = run_experiment(&config, false).unwrap();
    assert_eq!(report.split.train_rows + report.split.test_rows, report.data.rows_used);
    assert_eq!(report.max_squared_distance, Some(2.0));
    assert!(report.outrageous_margin);
    assert_eq!(report.snapshots.iter().map(|s| s.epoch).collect::<Vec<_>>(), [2, 4]);
    for s in &report.snapshots {
        assert_eq!(s.active_fraction, 1.0);
        assert!((0.0..=1.0).contains(&s.probe.auc_y) && (0.0..=1.0).contains(&s.probe.auc_s));
    }
    let mut files: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    let mut want = vec!["config.json", "load_report.txt", "report.json", "training.csv"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    for e in [2, 4] {
        for stem in ["epoch_{}.csv", "histogram_{}.csv", "cluster_{}.txt", "probe_{}.json", "params_{}.ftl", "summary_{}.csv"] {
            want.push(stem.replace("{}", &e.to_string()));
        }
    }
    want.sort();
    assert_eq!(files, want);

    let (emb, y, s) = read_embeddings(&out.join("epoch_4.csv")).unwrap();
    assert_eq!((emb.len(), y.len(), s.len()), (report.split.train_rows, report.split.train_rows, report.split.train_rows));
    let training = std::fs::read_to_string(out.join("training.csv")).unwrap();
    assert_eq!(training.lines().count(), 5);
    let params = load_params(&out.join("params_4.ftl")).unwrap();
    assert_eq!(params.input_dim(), report.data.features);
    let saved: ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved, report.config);
    let load = std::fs::read_to_string(out.join("load_report.txt")).unwrap();
    assert!(load.contains("rows_read=300\n") && load.contains("sensitive_column=race\n"), "{load}");
}

#[test]
fn a_non_empty_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir(&out).unwrap();
    std::fs::write(out.join("keep.txt"), "mine").unwrap();
    let config = ExperimentConfig {
        out: Some(out.clone()),
        ..small_config(dir.path())
    };
    assert_eq!(run_experiment(&config, false).unwrap_err().exit_code(), 2);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 1);
    run_experiment(&config, true).unwrap();
    assert_eq!(std::fs::read_to_string(out.join("keep.txt")).unwrap(), "mine");
}

#[test]
fn failures_carry_their_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let base = small_config(dir.path());
    let missing = ExperimentConfig {
        data_path: Some(dir.path().join("nope.csv")),
        ..base.clone()
    };
    assert_eq!(run_experiment(&missing, false).unwrap_err().exit_code(), 3);
    let exploding = ExperimentConfig {
        activation: "none".into(),
        learning_rate: 1e300,
        margin: 1e6,
        ..base.clone()
    };
    assert_eq!(run_experiment(&exploding, false).unwrap_err().exit_code(), 4);
    let bad_sensitive = ExperimentConfig {
        sensitive: Some("age".into()),
        ..base
    };
    assert_eq!(run_experiment(&bad_sensitive, false).unwrap_err().exit_code(), 2);
}

#[test]
fn tables_keep_going_past_failed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        out: Some(dir.path().join("table")),
        ..small_config(dir.path())
    };
    let matrix = json!([{"margin": 0.0}, {"method": "nonsense"}, {"activation": "tanh", "seed": 3}]);
    let rows = run_table(&base, &matrix, false).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == TABLE_HEADER.len()));
    assert_eq!(rows[0][14], "ok");
    assert!(rows[1][14].starts_with("error (exit 2)"), "{}", rows[1][14]);
    assert_eq!((rows[2][2].as_str(), rows[2][8].as_str(), rows[2][14].as_str()), ("tanh", "3", "ok"));
    assert!(dir.path().join("table/row_2/report.json").exists());

    let csv = dir.path().join("t.csv");
    write_table(&csv, &rows).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("Dataset,Triplet Selection Method,Activation,Margin,ROC-AUC on Y,ROC-AUC on S,"));

    assert!(run_table(&base, &json!([]), false).unwrap().is_empty());
    write_table(&csv, &[]).unwrap();
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1);
    assert_eq!(run_table(&base, &json!({}), false).unwrap_err().exit_code(), 2);
}

#[test]
fn baseline_hides_the_sensitive_column_from_its_probe() {
    let dir = tempfile::tempdir().unwrap();
    let b = emit_baseline(&small_config(dir.path())).unwrap();
    assert!(b.sensitive_column_excluded);
    // pass_bar follows the scores, race only the region
    assert!(b.probe.auc_y > 0.8, "{}", b.probe.auc_y);
    assert!(b.probe.auc_s < 0.75, "{}", b.probe.auc_s);
    assert_eq!(b.probe.seeds, [17, 29, 43]);
}
