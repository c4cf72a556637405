use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latent-debias"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    let mut a = vec!["--json"];
    a.extend_from_slice(args);
    serde_json::from_str(&ok(&a)).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let out = ok(&["--help"]);
    for c in
        ["ingest", "train-ae", "fit-sentdebias", "fit-inlp", "export-transform", "evaluate", "diagnose", "synthetic"]
    {
        assert!(out.contains(c), "{c} missing from help");
    }
}

#[test]
fn table_fixture_evaluates_to_published_cells() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synthetic", "--preset", "reference-table", "--out", s(dir.path())]);
    let scores = dir.path().join("reference-table.scores.tsv");
    let out_dir = dir.path().join("report");
    let table = ok(&["evaluate", "--scores", s(&scores), "--out-dir", s(&out_dir)]);
    let en = table.lines().find(|l| l.starts_with("en ")).unwrap();
    assert!(en.contains("14.17") && en.contains("13.61") && en.contains("7.5"), "{en}");
    assert!(out_dir.join("report.json").exists());
    let csv = std::fs::read_to_string(out_dir.join("plot.csv")).unwrap();
    assert!(csv.starts_with("eval_lang,debias_lang,technique,space,deviation"));

    let report = json(&["evaluate", "--scores", s(&scores)]);
    assert_eq!(report["missing"].as_array().unwrap().len(), 0);
}

#[test]
fn ingest_then_evaluate_from_workspace() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synthetic", "--preset", "reference-table", "--out", s(dir.path())]);
    let ws = dir.path().join("ws");
    let scores = dir.path().join("reference-table.scores.tsv");
    let r = json(&["ingest", "-w", s(&ws), "--scores", s(&scores)]);
    assert_eq!(r["added"][0], "scores/reference-table.scores.tsv");
    let table = ok(&["evaluate", "-w", s(&ws)]);
    assert!(table.contains("14.17"));
}

#[test]
fn training_writes_model_history_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    let small = ["--train", "64", "--dev", "16", "--dim", "6", "--semantic-dim", "3"];
    let mut a = vec!["synthetic", "--preset", "offset-langs", "--out", s(&ws)];
    a.extend_from_slice(&small);
    ok(&a);
    let r = json(&["train-ae", "-w", s(&ws), "--latent", "3", "--hidden", "8", "--epochs", "1", "--lr", "1e-3"]);
    assert_eq!(r["epochs"], 1);
    let history: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.join("history.json")).unwrap()).unwrap();
    assert_eq!(history["epochs"].as_array().unwrap().len(), 1);
    assert!(ws.join("model.xlae").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["model"]["file"], "model.xlae");
}

#[test]
fn planted_bias_pipeline_removes_the_attribute() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    ok(&["--seed", "2", "synthetic", "--preset", "planted-bias", "--out", s(&ws), "--train", "400", "--dev", "40"]);

    let raw = json(&["diagnose", "-w", s(&ws)]);
    assert!(raw["mean_retrieval"].as_f64().unwrap() < 0.3);

    let fit = json(&[
        "--seed",
        "2",
        "fit-inlp",
        "-w",
        s(&ws),
        "--space",
        "original",
        "--bias-type",
        "gender",
        "--lang",
        "en",
    ]);
    let (acc, maj) = (fit["final_accuracy"].as_f64().unwrap(), fit["majority"].as_f64().unwrap());
    assert!(acc <= maj + 0.05, "final probe {acc} vs majority {maj}");

    let sd = json(&[
        "fit-sentdebias",
        "-w",
        s(&ws),
        "--space",
        "original",
        "--bias-type",
        "gender",
        "--lang",
        "en",
        "--name",
        "sd",
    ]);
    assert_eq!(sd["k"], 1);
    let out = dir.path().join("export/sd.xltf");
    ok(&["export-transform", "-w", s(&ws), "--name", "sd", "--out", s(&out)]);
    assert_eq!(&std::fs::read(&out).unwrap()[..4], b"XLTF");

    let csv = dir.path().join("points.csv");
    ok(&["diagnose", "-w", s(&ws), "--csv", s(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("id,language,x,y"));
    assert_eq!(text.lines().count(), 1 + 4 * 40);
}

#[test]
fn latent_fit_requires_a_trained_model() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    ok(&[
        "synthetic",
        "--preset",
        "planted-bias",
        "--out",
        s(&ws),
        "--train",
        "40",
        "--dev",
        "10",
        "--debias-pairs",
        "20",
    ]);
    let out = run(&["fit-inlp", "-w", s(&ws), "--space", "latent", "--bias-type", "gender", "--lang", "en"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train-ae"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["evaluate", "--scores", "/definitely/missing.tsv"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.xleb");
    std::fs::write(&bad, b"XLEB\x01\x00").unwrap();
    let out = run(&["ingest", "-w", s(&dir.path().join("ws")), "--embeddings", s(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset"));

    let ws = dir.path().join("small");
    ok(&[
        "synthetic",
        "--preset",
        "offset-langs",
        "--out",
        s(&ws),
        "--train",
        "50",
        "--dev",
        "10",
        "--dim",
        "6",
        "--semantic-dim",
        "3",
    ]);
    let lr0 = run(&["train-ae", "-w", s(&ws), "--latent", "3", "--hidden", "8", "--lr", "0"]);
    assert_eq!(lr0.status.code(), Some(2));
    let diverged = run(&["train-ae", "-w", s(&ws), "--latent", "3", "--hidden", "8", "--epochs", "3", "--lr", "1e30"]);
    assert_eq!(diverged.status.code(), Some(4));
}

#[test]
fn thread_variable_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");
    ok(&[
        "synthetic",
        "--preset",
        "offset-langs",
        "--out",
        s(&ws),
        "--train",
        "64",
        "--dev",
        "16",
        "--dim",
        "6",
        "--semantic-dim",
        "3",
    ]);
    let train = |threads: &str| {
        let out = bin()
            .env("LATENT_DEBIAS_THREADS", threads)
            .args(["train-ae", "-w", s(&ws), "--latent", "3", "--hidden", "8", "--epochs", "2", "--lr", "1e-3"])
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(ws.join("model.xlae")).unwrap()
    };
    assert_eq!(train("1"), train("3"));
}
