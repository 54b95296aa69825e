use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copula-mom"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn synth_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth", "--kind", "gaussian", "--rho", "0.4", "--dim", "3", "--n", "500", "--out", "d",
        ],
    );
    let info = json(&ok(dir.path(), &["inspect", "d/train.bin"]));
    assert_eq!(info["dims"], serde_json::json!([500, 3, 1, 1]));
    assert_eq!(info["values"], 1500);
    assert_eq!(info["nonzero_pct"], 100.0);
}

#[test]
fn basis_plot_layout() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(
        dir.path(),
        &["basis-plot", "--family", "fourier", "--max-degree", "3"],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "y,t,phi");
    assert_eq!(lines.len(), 1 + 4 * 512);
    assert!(lines[1].starts_with("-1,0,0.7071067811865476"));
}

#[test]
fn moments_gci_and_gcd() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--kind",
            "comonotone",
            "--n",
            "2000",
            "--seed",
            "1",
            "--out",
            "s",
        ],
    );
    ok(
        d,
        &[
            "copula",
            "--train",
            "s/train.bin",
            "--filters",
            "0,1",
            "--out",
            "c.bin",
        ],
    );
    ok(
        d,
        &["moments", "c.bin", "--max-degree", "6", "--out", "m.bin"],
    );
    let gci = json(&ok(d, &["gci", "m.bin", "--top", "3"]));
    assert!(gci["gci"].as_f64().unwrap() > 1.0);
    assert_eq!(gci["top"].as_array().unwrap().len(), 3);
    let gcd = json(&ok(d, &["gcd", "m.bin", "m.bin"]));
    assert_eq!(gcd["gcd"], 0.0);
}

#[test]
fn density_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--kind",
            "tail-dependent",
            "--n",
            "5000",
            "--out",
            "s",
        ],
    );
    let csv = ok(
        d,
        &[
            "density-grid",
            "s/train.bin",
            "--filters",
            "0,1",
            "--resolution",
            "8",
        ],
    );
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "y1,y2,legendre,fourier,histogram");
    assert_eq!(lines.len(), 1 + 64);
    for line in &lines[1..] {
        let cols: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert!(cols[2..].iter().all(|&v| v > 0.0));
    }
}

#[test]
fn group_experiment_is_reproducible_and_configurable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--kind",
            "independent",
            "--dim",
            "5",
            "--n",
            "3000",
            "--out",
            "s",
        ],
    );
    let args = [
        "group-experiment",
        "l0=s/train.bin:s/test.bin",
        "--rounds",
        "3",
        "--seed",
        "4",
    ];
    let a = ok(d, &args);
    let b = ok(d, &args);
    assert_eq!(a, b);
    let report = json(&a);
    assert_eq!(report[0]["layer"], "l0");
    assert_eq!(report[0]["methods"].as_array().unwrap().len(), 3);

    std::fs::write(
        d.join("cfg.json"),
        r#"{"layers": [{"name": "cfg", "train": "s/train.bin", "test": "s/test.bin"}],
            "rounds": 2, "methods": ["histogram"], "seed": 4}"#,
    )
    .unwrap();
    let report = json(&ok(d, &["group-experiment", "--config", "cfg.json"]));
    assert_eq!(report[0]["layer"], "cfg");
    assert_eq!(report[0]["rounds"], 2);
    assert_eq!(report[0]["methods"].as_array().unwrap().len(), 1);
}

#[test]
fn marginal_reports_and_nonzero_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--dim", "2", "--n", "3000", "--out", "s"]);
    let csv = ok(
        d,
        &[
            "marginals",
            "s/train.bin:s/test.bin",
            "--rounds",
            "2",
            "--format",
            "csv",
        ],
    );
    assert_eq!(csv.lines().count(), 1 + 5);
    let table = ok(
        d,
        &["nonzero-table", "s/train.bin:s/test.bin", "--out", "t.csv"],
    );
    assert!(table.is_empty());
    let written = std::fs::read_to_string(d.join("t.csv")).unwrap();
    assert_eq!(
        written.lines().nth(1).unwrap(),
        "layer0,2,0,100.0000,100.0000"
    );
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for args in [
        vec!["inspect", "missing.bin"],
        vec!["synth", "--kind", "gaussian", "--rho", "1.5", "--out", "s"],
        vec!["group-experiment"],
        vec!["group-experiment", "not-a-layer-spec"],
        vec!["basis-plot", "--family", "legendre", "--max-degree", "65"],
    ] {
        let out = run(d, &args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
    std::fs::write(d.join("junk.bin"), b"JUNKJUNKJUNK").unwrap();
    assert!(!run(d, &["inspect", "junk.bin"]).status.success());
}
