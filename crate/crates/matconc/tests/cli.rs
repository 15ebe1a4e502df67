use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn matconc(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_matconc"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("MATCONC_THREADS", t),
        None => cmd.env_remove("MATCONC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(2)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

#[test]
fn boundary_golden_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cfg = repo_file("configs/scalar_boundary.toml");
    let o = matconc(&["boundary", "--config", cfg.to_str().unwrap(), "--out", out, "--quiet"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let got = fs::read_to_string(tmp.path().join("boundary.csv")).unwrap();
    let golden = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/boundary_d1.csv")).unwrap();
    assert_eq!(got, golden);

    // Values from a 40-digit evaluation of the same formulas.
    let expected = [
        [1.0, 0.0, 1.001, 1e-6, 0.0058450129680007577, 0.0091340195157143562, 0.004557889421125506, 0.0091340195157143562, 1.0],
        [2.0, 0.0, 1.002001, 2e-6, 0.0082826370709130871, 0.0091340195157143562, 0.0078972425031119882, 0.0091340195157143562, 1.0],
        [3.0, 1.0, 1.003003001, 3e-6, 0.010164415652864328, 0.015857757776352644, 0.010268215721249981, 0.015857757776352644, 1.0],
    ];
    let rows = data_rows(&golden);
    assert_eq!(rows.len(), 3);
    for (row, want) in rows.iter().zip(expected.iter()) {
        for (g, w) in row.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-13 * w.abs(), "{g} vs {w}");
        }
    }
}

const SCALAR_02: &str = r#"
[distribution]
kind = "finite_support"
atoms = [ { matrix = [[0.0]], probability = 0.5 }, { matrix = [[2.0]], probability = 0.5 } ]
[schedule]
kind = "constant"
c = 1.0
[boundary]
delta = 0.1
[experiment]
n_max = 2
[verify]
fixed_threshold = 5.0
mc_trajectories = 4000
"#;

#[test]
fn zero_schedule_gives_zero_boundaries() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SCALAR_02.replace("c = 1.0", "c = 0.0").replace("n_max = 2", "n_max = 20");
    let cfg = write_config(tmp.path(), "zero.toml", &text);
    let out = tmp.path().join("o");
    let o = matconc(&["boundary", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("boundary.csv")).unwrap();
    for row in data_rows(&csv) {
        assert_eq!(row[2], 1.0);
        assert!(row[3..8].iter().all(|&v| v == 0.0), "{row:?}");
        assert_eq!(row[8], 1.0);
    }
}

#[test]
fn boundary_rows_share_value_within_epoch() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SCALAR_02.replace("c = 1.0", "c = 0.01").replace("n_max = 2", "n_max = 300");
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("o");
    assert_eq!(matconc(&["boundary", "--config", &cfg, "--out", out.to_str().unwrap()], None).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("boundary.csv")).unwrap();
    let mut by_epoch = std::collections::HashMap::new();
    for line in csv.lines().skip(2) {
        let cells: Vec<&str> = line.split(',').collect();
        // Compare the text cells: bit-identical values print identically.
        let prev = by_epoch.entry(cells[1].to_string()).or_insert(cells[5].to_string());
        assert_eq!(prev, cells[5]);
    }
    assert!(by_epoch.len() >= 8);
}

#[test]
fn verify_scalar_prints_exact_quarter() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", SCALAR_02);
    let o = matconc(&["verify", "--config", &cfg], Some("2"));
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}{}", stderr(&o));
    assert!(text.contains("P(dev_2 >= 5) = 0.25\n"), "{text}");
    for check in ["martingale", "submartingale", "sandwich", "mc_vs_oracle"] {
        assert!(text.contains(&format!("PASS {check}:")), "{text}");
    }
    // The unit step violates the step-size condition.
    assert!(text.contains("SKIP soundness"), "{text}");
}

#[test]
fn verify_single_atom_all_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
[distribution]
kind = "finite_support"
atoms = [ { matrix = [[1.0, 0.0], [0.0, 2.0]], probability = 1.0 } ]
[schedule]
kind = "constant"
c = 0.1
[boundary]
delta = 0.1
[experiment]
n_max = 6
"#;
    let cfg = write_config(tmp.path(), "one.toml", text);
    let o = matconc(&["verify", "--config", &cfg], Some("1"));
    let out = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{out}{}", stderr(&o));
    assert!(!out.contains("FAIL") && !out.contains("SKIP"), "{out}");
    // Zero up to rounding of the spectral mean.
    let residual: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("PASS martingale: max residual "))
        .and_then(|rest| rest.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(residual < 1e-14, "{out}");
    assert!(out.contains("exact anytime crossing probability for n <= 6 (boundary scale 1): 0\n"), "{out}");
}

#[test]
fn verify_negative_control_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(repo_file("configs/scalar_oracle.toml"))
        .unwrap()
        .replace("eta_epoch = 2.0", "eta_epoch = 2.0\nscale = 0.01")
        .replace("n_max = 16", "n_max = 10")
        .replace("mc_trajectories = 20000", "mc_trajectories = 2000");
    let cfg = write_config(tmp.path(), "neg.toml", &text);
    let o = matconc(&["verify", "--config", &cfg, "--quiet"], Some("2"));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("FAIL soundness"), "{}", stderr(&o));
}

#[test]
fn validation_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.toml", &SCALAR_02.replace("delta = 0.1", "delta = 0.1\ndelt = 3"));
    let o = matconc(&["boundary", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("boundary.delt:") && stderr(&o).contains("unknown field"), "{}", stderr(&o));

    let cfg = write_config(tmp.path(), "bad2.toml", &SCALAR_02.replace("delta = 0.1", "delta = 2.0"));
    let o = matconc(&["boundary", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("boundary.delta"), "{}", stderr(&o));

    assert_eq!(matconc(&["boundary"], None).status.code(), Some(1));
    assert_eq!(matconc(&["frobnicate"], None).status.code(), Some(1));
    assert_eq!(matconc(&["boundary", "--seed", "x"], None).status.code(), Some(1));
    assert_eq!(matconc(&["boundary", "--config", "/nonexistent.toml"], None).status.code(), Some(1));
    assert_eq!(matconc(&["--help"], None).status.code(), Some(0));

    let good = write_config(tmp.path(), "good.toml", SCALAR_02);
    assert_eq!(matconc(&["simulate", "--config", &good, "--out", tmp.path().to_str().unwrap()], Some("0")).status.code(), Some(1));

    // A fixed horizon that ends inside the last epoch.
    let short = SCALAR_02
        .replace("kind = \"constant\"", "kind = \"fixed_horizon\"\nhorizon = 3")
        .replace("n_max = 2", "n_max = 3");
    let cfg = write_config(tmp.path(), "short.toml", &short);
    let o = matconc(&["boundary", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("horizon"), "{}", stderr(&o));

    // Exact verification needs finite support.
    let cont = fs::read_to_string(repo_file("configs/oja.toml")).unwrap();
    let cfg = write_config(tmp.path(), "cont.toml", &cont);
    let o = matconc(&["verify", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("distribution.kind"));
}

#[test]
fn simulate_is_thread_count_independent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/noncommuting.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let o = matconc(
            &["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--trajectories", "300", "--seed", "9"],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("note: crossings are counted for n <= 8 only"));
        outputs.push((
            fs::read(dir.join("trajectories.csv")).unwrap(),
            fs::read(dir.join("epochs.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert!(text.starts_with("# matconc "));
    assert_eq!(text.lines().nth(1), Some("index,first_crossing,max_dev,max_ydev,max_ratio,sandwich"));
    assert_eq!(text.lines().count(), 302);
    assert!(!text.contains('\r'));
}

#[test]
fn seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = repo_file("configs/noncommuting.toml");
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let dir = tmp.path().join(seed);
        let o = matconc(
            &["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--trajectories", "50", "--seed", seed],
            Some("1"),
        );
        assert_eq!(o.status.code(), Some(0));
        files.push(fs::read_to_string(dir.join("trajectories.csv")).unwrap());
    }
    // Different seed, different hash and different draws.
    assert_ne!(files[0].lines().next(), files[1].lines().next());
    assert_ne!(files[0].lines().nth(2), files[1].lines().nth(2));
}

#[test]
fn tail_and_oja_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let rank_one = repo_file("configs/rank_one_d5.toml");
    let dir = tmp.path().join("tail");
    let o = matconc(
        &["tail", "--config", rank_one.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--trajectories", "100"],
        Some("2"),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("tail.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("u,empirical,bound,ci_lo,ci_hi"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!(r[3] <= r[1] && r[1] <= r[4] && r[2] <= 1.0);
    }

    let text = fs::read_to_string(repo_file("configs/oja.toml")).unwrap().replace("n_max = 2000", "n_max = 1024");
    let cfg = write_config(tmp.path(), "oja.toml", &text);
    let dir = tmp.path().join("oja");
    let o = matconc(&["oja", "--config", &cfg, "--out", dir.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.join("oja.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("n,sin2_error,dev,boundary"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1024);
    assert!(rows.iter().all(|r| r[3].is_finite() && (0.0..=1.0).contains(&r[1])));
}
