use std::path::Path;
use std::process::{Command, Output};

fn fairtrip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairtrip")).args(args).output().unwrap()
}

fn law_csv(dir: &Path) -> String {
    let mut text = String::from("lsat,ugpa,race,pass_bar\n");
    for i in 0..400 {
        let lsat = 20 + (i * 7) % 25;
        let gpa = 2.0 + f64::from((i * 13) % 20) / 10.0;
        let race = if i % 5 == 0 { 3 } else { 7 };
        text += &format!("{lsat},{gpa:.1},{race},{}\n", u8::from(lsat > 30));
    }
    let path = dir.join("law.csv");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_then_inspect_and_histogram() {
    let dir = tempfile::tempdir().unwrap();
    let data = law_csv(dir.path());
    let out = dir.path().join("run");
    let out_s = out.to_str().unwrap();
    let common = [
        "run", "--dataset", "law_school", "--data-path", &data, "--epochs", "2", "--activation", "sigmoid",
        "--margin", "5", "--out", out_s,
    ];
    let o = fairtrip(&common);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("epoch     2"));

    // the directory is now taken
    let o = fairtrip(&common);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--overwrite"));
    let mut again = common.to_vec();
    again.push("--overwrite");
    assert_eq!(code(&fairtrip(&again)), 0);

    let snapshot = out.join("epoch_2.csv");
    let o = fairtrip(&["inspect-snapshot", snapshot.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("collapsed=") && text.contains("group_s1:"), "{text}");

    let hist = dir.path().join("h.csv");
    let o = fairtrip(&["histogram", snapshot.to_str().unwrap(), "--out", hist.to_str().unwrap(), "--bins", "7"]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 8);
}

#[test]
fn config_file_table_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let data = law_csv(dir.path());
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        format!(r#"{{"dataset": "law_school", "data_path": {data:?}, "epochs": 2, "probe": {{"n_trees": 20}}}}"#),
    )
    .unwrap();
    let matrix = dir.path().join("m.json");
    std::fs::write(&matrix, r#"[{"margin": 1.0}, {"activation": "bogus"}]"#).unwrap();
    let csv = dir.path().join("t.csv");
    let o = fairtrip(&[
        "table",
        matrix.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("2 rows, 1 failed"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let o = fairtrip(&["baseline", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["probe"]["auc_y"].as_f64().unwrap() > 0.9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    // config
    assert_eq!(code(&fairtrip(&["run", "--method", "hardest", "--out", out])), 2);
    assert_eq!(code(&fairtrip(&["run", "--dataset", "mnist", "--out", out])), 2);
    assert_eq!(code(&fairtrip(&["run", "--epochs", "3"])), 2);
    // data
    let missing = dir.path().join("none.csv");
    let args = ["run", "--dataset", "law_school", "--data-path", missing.to_str().unwrap(), "--out", out];
    assert_eq!(code(&fairtrip(&args)), 3);
    assert_eq!(code(&fairtrip(&["inspect-snapshot", missing.to_str().unwrap()])), 3);
    let junk = dir.path().join("junk.dta");
    std::fs::write(&junk, b"not stata").unwrap();
    assert_eq!(code(&fairtrip(&["convert-stata", junk.to_str().unwrap(), out])), 3);
    // numeric
    let data = law_csv(dir.path());
    let config = dir.path().join("boom.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"dataset": "law_school", "data_path": {data:?}, "epochs": 3, "activation": "none",
                "learning_rate": 1e300, "margin": 1e6}}"#
        ),
    )
    .unwrap();
    let o = fairtrip(&["run", "--config", config.to_str().unwrap(), "--out", out, "--overwrite"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}
