use std::path::Path;
use std::process::{Command, Output};

fn adgat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adgat"))
        .args(args)
        .output()
        .expect("spawn adgat")
}

fn ok(args: &[&str]) -> String {
    let out = adgat(args);
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "adgat {args:?} failed\nstdout: {stdout}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

/// Runs a command expected to fail and returns the error tag from stderr.
fn fails(args: &[&str]) -> String {
    let out = adgat(args);
    assert!(!out.status.success(), "adgat {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    let tag = line
        .strip_prefix("error[")
        .and_then(|rest| rest.split(']').next())
        .unwrap_or_else(|| panic!("no error tag in {stderr:?}"));
    tag.to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY_SPEC: &str = r#"
name = "tiny"
variants = ["gat", "adgat"]
depths = [1, 2]
seeds = [0, 1]

[synthetic]
num_nodes = 80
num_classes = 3
feat_dim = 8
train = 20
val = 20
test = 30

[hparams]
learning_rate = 0.01
epochs = 10
patience = 10
"#;

#[test]
fn prep_synthetic_then_depth() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synth");
    let stdout = ok(&[
        "prep",
        "synthetic",
        "--out",
        s(&data),
        "--nodes",
        "300",
        "--avg-degree",
        "4",
        "--classes",
        "4",
        "--feat-dim",
        "16",
        "--splits",
        "40,60,100",
        "--seed",
        "3",
    ]);
    assert!(stdout.contains("300 nodes"), "{stdout}");
    assert!(stdout.contains("degree: q=4.0000"), "{stdout}");
    for f in ["meta.json", "edges.csv", "features.csv", "labels.csv", "splits.json"] {
        assert!(data.join(f).is_file(), "{f}");
    }

    let out = dir.path().join("depth");
    let stdout = ok(&["depth", "--dataset", s(&data), "--out", s(&out)]);
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("depth.json")).unwrap()).unwrap();
    // 300 nodes, 600 edges: q = 4, log_4(1 - 300 + 1200) = log_4 901.
    let l_real = 901f64.ln() / 4f64.ln();
    assert!((value["L_real"].as_f64().unwrap() - l_real).abs() < 1e-12);
    assert_eq!(value["L_selected"].as_u64(), Some(5));
    assert!(stdout.contains("L_selected=5"), "{stdout}");
}

#[test]
fn convert_complete_graph_gives_depth_two() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let mut edges = String::new();
    for u in 0..5 {
        for v in u + 1..5 {
            edges.push_str(&format!("{u} {v}\n"));
        }
    }
    std::fs::write(p.join("edges.txt"), edges).unwrap();
    std::fs::write(p.join("features.csv"), "1,0\n0,1\n1,1\n0,0\n1,0\n").unwrap();
    std::fs::write(p.join("labels.csv"), "0\n1\n0\n1\n0\n").unwrap();
    let data = p.join("k5");
    ok(&[
        "prep",
        "convert",
        "--out",
        s(&data),
        "--name",
        "k5",
        "--edges",
        s(&p.join("edges.txt")),
        "--features",
        s(&p.join("features.csv")),
        "--labels",
        s(&p.join("labels.csv")),
        "--random-splits",
        "2,1,2",
    ]);
    let stdout = ok(&["depth", "--dataset", s(&data)]);
    assert!(stdout.contains("L_real=2.0000 L_selected=2"), "{stdout}");

    std::fs::write(p.join("bad_edges.txt"), "0 7\n").unwrap();
    let tag = fails(&[
        "prep",
        "convert",
        "--out",
        s(&p.join("bad")),
        "--name",
        "bad",
        "--edges",
        s(&p.join("bad_edges.txt")),
        "--features",
        s(&p.join("features.csv")),
        "--labels",
        s(&p.join("labels.csv")),
        "--random-splits",
        "2,1,2",
    ]);
    assert_eq!(tag, "edge_out_of_range");
    let tag = fails(&[
        "prep",
        "convert",
        "--out",
        s(&p.join("bad")),
        "--name",
        "bad",
        "--edges",
        s(&p.join("edges.txt")),
        "--features",
        s(&p.join("features.csv")),
        "--labels",
        s(&p.join("labels.csv")),
        "--random-splits",
        "4,1,2",
    ]);
    assert_eq!(tag, "infeasible");
}

#[test]
fn run_then_report_reproduces_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, TINY_SPEC).unwrap();
    let out = dir.path().join("results");
    let stdout = ok(&["run", "--config", s(&config), "--out", s(&out)]);
    assert!(stdout.contains("adgat"), "{stdout}");
    let csv = std::fs::read_to_string(out.join("table.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert!(lines.next().unwrap().starts_with("dataset,variant,depth"));
    assert_eq!(lines.count(), 4);
    assert_eq!(std::fs::read_dir(out.join("traces")).unwrap().count(), 8);

    let stdout = ok(&["report", "--out", s(&out)]);
    assert!(stdout.contains("max |stored - recomputed|"), "{stdout}");

    // Tampering with a stored mean is caught by re-aggregation.
    let path = out.join("table.json");
    let mut table: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mean = table["rows"][0]["test_mean"].as_f64().unwrap();
    table["rows"][0]["test_mean"] = (mean + 0.01).into();
    std::fs::write(&path, serde_json::to_string(&table).unwrap()).unwrap();
    assert_eq!(fails(&["report", "--out", s(&out)]), "config");

    // Command-line overrides narrow the run.
    let out2 = dir.path().join("gat_only");
    ok(&[
        "run",
        "--config",
        s(&config),
        "--out",
        s(&out2),
        "--variant",
        "gat",
        "--depths",
        "2",
        "--seeds",
        "1",
    ]);
    let csv = std::fs::read_to_string(out2.join("table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn probe_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    std::fs::write(&config, TINY_SPEC).unwrap();
    let out = dir.path().join("probes");
    ok(&[
        "probe",
        "oversmoothing",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--depths",
        "1,3",
        "--epochs",
        "5",
    ]);
    let text = std::fs::read_to_string(out.join("oversmoothing.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# preset=oversmoothing"));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(header.contains(&"depth") && header.contains(&"smv"), "{header:?}");
    assert_eq!(lines.count(), 2);

    ok(&[
        "probe",
        "gradient_vanishing",
        "--config",
        s(&config),
        "--out",
        s(&out),
        "--epochs",
        "6",
    ]);
    let text = std::fs::read_to_string(out.join("gradient_vanishing.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "epoch,grad_depth2,grad_depth7");
    assert_eq!(text.lines().count(), 2 + 6);
}

#[test]
fn failures_print_stable_tags() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nothing");
    assert_eq!(fails(&["depth", "--dataset", s(&missing)]), "missing_file");
    assert_eq!(fails(&["probe", "figure9", "--out", s(dir.path())]), "unknown");
    assert_eq!(fails(&["run", "--depths", "3-1", "--out", s(dir.path())]), "parse");
    assert_eq!(
        fails(&["run", "--config", s(&missing), "--out", s(dir.path())]),
        "missing_file"
    );
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "epochs = 5\n").unwrap();
    assert_eq!(fails(&["run", "--config", s(&bad), "--out", s(dir.path())]), "parse");
    std::fs::write(&bad, "variants = []\n").unwrap();
    assert_eq!(fails(&["run", "--config", s(&bad), "--out", s(dir.path())]), "config");
}
