use std::path::PathBuf;
use std::process::{Command, Output};

const PURE: &str = r#"
[rho]
kind = "iid"
state = { pure = [1.0, 0.0] }

[sigma]
kind = "iid"
state = { pure = [0.7071067811865476, 0.7071067811865476] }
"#;

const BERNOULLI: &str = r#"
[rho]
kind = "iid"
state = { diagonal = [0.5, 0.5] }

[sigma]
kind = "iid"
state = { diagonal = [0.9, 0.1] }

[sweep]
a_values = [0.1, -0.1]
n_list = [2000, 50]
"#;

fn config(name: &str, text: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("qexp-test-{}-{name}.toml", std::process::id()));
    std::fs::write(&path, text).unwrap();
    path
}

fn qexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qexp")).args(args).output().unwrap()
}

fn run(verb: &str, name: &str, text: &str, extra: &[&str]) -> Output {
    let path = config(name, text);
    let mut args = vec![verb, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = qexp(&args);
    std::fs::remove_file(path).ok();
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn pure_state_chernoff_is_log_two() {
    let out = run("exponents", "pure", PURE, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let c = report["chernoff"].as_f64().unwrap();
    assert!((c - std::f64::consts::LN_2).abs() < 1e-12, "C = {c}");
    assert_eq!(report["units"], "nats per site");
    for row in report["psi"].as_array().unwrap() {
        assert!((row["psi"].as_f64().unwrap() + std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn sweep_header_and_row_order() {
    let out = run("sweep", "sweep", BERNOULLI, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,a,slope_alpha,slope_beta,pred_alpha,pred_beta,gap_alpha,gap_beta");
    let keys: Vec<(f64, usize)> = lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            assert_eq!(cells.len(), 8);
            (cells[1].parse().unwrap(), cells[0].parse().unwrap())
        })
        .collect();
    assert_eq!(keys, vec![(-0.1, 50), (-0.1, 2000), (0.1, 50), (0.1, 2000)]);
}

#[test]
fn classical_sweep_converges_at_two_thousand_sites() {
    let out = run("sweep", "converge", BERNOULLI, &[]);
    let text = stdout(&out);
    for line in text.lines().skip(1).filter(|l| l.starts_with("2000,")) {
        let gap_beta: f64 = line.split(',').nth(7).unwrap().parse().unwrap();
        assert!(gap_beta.abs() <= 0.01, "{line}");
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = run("exponents", "det-a", BERNOULLI, &["--format", "csv"]);
    let b = run("exponents", "det-b", BERNOULLI, &["--format", "csv"]);
    assert_eq!(a.stdout, b.stdout);
    let a = qexp(&["verify", "--seed", "5"]);
    let b = qexp(&["verify", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn no_nan_reaches_the_output() {
    for (verb, text) in [("exponents", PURE), ("exponents", BERNOULLI), ("sweep", BERNOULLI)] {
        for format in ["csv", "json"] {
            let out = run(verb, "nan", text, &["--format", format]);
            assert!(out.status.success());
            let text = stdout(&out).to_lowercase();
            assert!(!text.contains("nan"), "{verb} {format}");
        }
    }
}

#[test]
fn non_stochastic_transition_is_a_config_error() {
    let bad = "[rho]\nkind = \"classical_markov\"\ntransition = [[0.5, 0.6], [0.5, 0.5]]\n";
    let out = run("exponents", "rowsum", bad, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row sums"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_are_rejected() {
    let out = run("exponents", "unknown", &format!("{PURE}\nthreshold = 3\n"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("threshold"));
}

#[test]
fn orthogonal_supports_are_a_computation_error() {
    let text = "[rho]\nkind = \"iid\"\nstate = { diagonal = [1.0, 0.0] }\n[sigma]\nkind = \"iid\"\nstate = { diagonal = [0.0, 1.0] }\n";
    let out = run("exponents", "orth", text, &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("orthogonal"));
}

#[test]
fn default_verify_suite_passes_with_json_lines() {
    let out = qexp(&["verify"]);
    assert!(out.status.success(), "{}{}", stdout(&out), stderr(&out));
    let text = stdout(&out);
    assert!(text.lines().count() >= 5);
    for line in text.lines() {
        let check: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(check["passed"], true, "{line}");
    }
}

#[test]
fn missing_config_is_reported() {
    let out = qexp(&["exponents"]);
    assert_eq!(out.status.code(), Some(2));
}
