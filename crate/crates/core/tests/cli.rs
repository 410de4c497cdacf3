use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gadk::harness::{read_scores_csv, RunReport};
use gadk::io::{load_groups, FileFormat};

fn gadk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gadk")).args(args).output().expect("spawn gadk")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SYNTH: &str = r#"
n_regular = 20
n_anomalous = 3
points_per_group = 16
"#;

fn experiment(method: &str, extra: &str) -> String {
    format!(
        "name = \"tiny\"\nseed = 4\n\n[dataset.synthetic]\n{SYNTH}\n[method]\nkind = \"{method}\"\n{extra}\n"
    )
}

#[test]
fn generate_writes_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    fs::write(&cfg, SYNTH).unwrap();
    for name in ["g.csv", "g.bin"] {
        let out = dir.path().join(name);
        let o = gadk(&["generate", "--config", s(&cfg), "--seed", "3", "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let ds = load_groups(&out, FileFormat::from_path(&out)).unwrap();
        assert_eq!(ds.len(), 23);
        assert_eq!(ds.labels().unwrap().iter().filter(|&&l| l).count(), 3);
    }
}

#[test]
fn run_then_score_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mgm.toml");
    fs::write(&cfg, experiment("mgm", "restarts = 1\nmax_iter = 20")).unwrap();
    let out = dir.path().join("run");
    let o = gadk(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["scores.csv", "report.json", "model.gadt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: RunReport = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.scores.len(), 23);
    assert!(report.metrics.is_some());

    let e = gadk(&["eval", "--scores", s(&out.join("scores.csv")), "--format", "csv"]);
    assert!(e.status.success());
    let text = String::from_utf8(e.stdout).unwrap();
    assert!(text.starts_with("auprc,auroc,auprc_regular"));
    let auroc: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(auroc, report.metrics.unwrap().auroc);

    let data = dir.path().join("fresh.csv");
    assert!(gadk(&["generate", "--config", s(&dir.path().join("none.toml")), "--out", s(&data)]).status.code() == Some(3));
    fs::write(dir.path().join("synth.toml"), SYNTH).unwrap();
    assert!(gadk(&["generate", "--config", s(&dir.path().join("synth.toml")), "--seed", "8", "--out", s(&data)])
        .status
        .success());
    let scored = dir.path().join("fresh_scores.csv");
    let sc = gadk(&["score", "--model", s(&out.join("model.gadt")), "--data", s(&data), "--out", s(&scored)]);
    assert!(sc.status.success(), "{}", String::from_utf8_lossy(&sc.stderr));
    let (scores, labels) = read_scores_csv(&scored).unwrap();
    assert_eq!(scores.len(), 23);
    assert!(labels.is_some());
}

#[test]
fn suite_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    fs::write(cfgs.join("a.toml"), experiment("mgm", "restarts = 1\nmax_iter = 10")).unwrap();
    fs::write(cfgs.join("b.toml"), experiment("ocsvm", "features = \"flatten\"")).unwrap();
    let out = dir.path().join("suite");
    let o = gadk(&["suite", "--config", s(&cfgs), "--out", s(&out), "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "method,tiny_auprc,tiny_auroc");
    assert_eq!(lines.count(), 2);
    assert!(out.join("tiny").join("mgm").join("report.json").exists());
}

#[test]
fn invalid_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, experiment("mgm", "n_components = 0")).unwrap();
    assert_eq!(gadk(&["run", "--config", s(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, experiment("mgm", "no_such_field = 1")).unwrap();
    assert_eq!(gadk(&["run", "--config", s(&cfg)]).status.code(), Some(2));
}
