//! End-to-end tests driving the `senns` binary.

use std::path::Path;
use std::process::{Command, Output};

use senns_core::network::{default_transfers, Network};

fn senns(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_senns"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

const TRAIN_SMALL: &[&str] = &[
    "train",
    "--data-kind",
    "two-moons",
    "--n",
    "30",
    "--layers",
    "4,2",
    "--seed",
    "11",
    "--alpha",
    "0.05",
    "--max-iters",
    "15",
];

#[test]
fn train_is_deterministic_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = senns(dir, TRAIN_SMALL);
        assert!(out.status.success(), "train failed: {}", stderr(&out));
    }
    let model_a = std::fs::read(dir_a.path().join("model.senns")).unwrap();
    let model_b = std::fs::read(dir_b.path().join("model.senns")).unwrap();
    assert_eq!(model_a, model_b, "model bytes differ across identical runs");
    let telemetry_a = std::fs::read(dir_a.path().join("telemetry.csv")).unwrap();
    let telemetry_b = std::fs::read(dir_b.path().join("telemetry.csv")).unwrap();
    assert_eq!(telemetry_a, telemetry_b);
}

#[test]
fn invalid_lambda_sum_is_a_usage_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = senns(
        dir.path(),
        &[
            "train",
            "--data-kind",
            "two-moons",
            "--layers",
            "4,2",
            "--lambda1",
            "0.5",
            "--lambda2",
            "0.4",
            "--lambda3",
            "0.0",
            "--lambda4",
            "0.0",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("lambda"));
    assert!(
        std::fs::read_dir(dir.path()).unwrap().next().is_none(),
        "usage failure must not leave files behind"
    );
}

#[test]
fn zero_iterations_returns_the_initialized_network() {
    let dir = tempfile::tempdir().unwrap();
    let out = senns(
        dir.path(),
        &[
            "train",
            "--data-kind",
            "two-moons",
            "--n",
            "20",
            "--layers",
            "4,2",
            "--seed",
            "7",
            "--max-iters",
            "0",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let trained = Network::load(&dir.path().join("model.senns")).unwrap();
    let expected = Network::init_random(&[2, 4, 2], &default_transfers(2), 7).unwrap();
    assert_eq!(trained, expected);
}

#[test]
fn telemetry_has_header_and_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = senns(dir.path(), TRAIN_SMALL);
    assert!(out.status.success());
    let telemetry = std::fs::read_to_string(dir.path().join("telemetry.csv")).unwrap();
    let lines: Vec<&str> = telemetry.lines().collect();
    assert_eq!(lines[0], "iter,J,J1,J2,J3");
    assert!(lines[1].starts_with("0,"));
    assert_eq!(lines.len(), 1 + 15 + 1, "header + initial J + 15 iterations");
}

const IDENTITY_MODEL: &str = "SENNS-MODEL v1\n2 2\nlinear\nW 1\n1 0\n0 1\nb 1\n0 0\n";

#[test]
fn extract_through_identity_model_reproduces_inputs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("identity.senns"), IDENTITY_MODEL).unwrap();
    std::fs::write(dir.path().join("data.csv"), "1.5,2,A\n-3,0.25,B\n").unwrap();
    let out = senns(
        dir.path(),
        &[
            "extract",
            "--model",
            "identity.senns",
            "--data-kind",
            "csv",
            "--data-path",
            "data.csv",
            "--label-column",
            "2",
            "--out",
            "features.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let features = std::fs::read_to_string(dir.path().join("features.csv")).unwrap();
    assert_eq!(features, "1.5,2,A\n-3,0.25,B\n");
}

#[test]
fn extract_rejects_mismatched_dimensions_without_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("identity.senns"), IDENTITY_MODEL).unwrap();
    std::fs::write(dir.path().join("data.csv"), "1,2,3,A\n4,5,6,B\n").unwrap();
    let out = senns(
        dir.path(),
        &[
            "extract",
            "--model",
            "identity.senns",
            "--data-kind",
            "csv",
            "--data-path",
            "data.csv",
            "--label-column",
            "3",
            "--out",
            "features.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr(&out).contains("expected length 2, got 3"),
        "stderr: {}",
        stderr(&out)
    );
    assert!(!dir.path().join("features.csv").exists());
}

#[test]
fn eval_prints_the_hand_enumerated_scatter_ratio() {
    // Two 1-D clusters A = {0, 2}, B = {10, 12}: intra mean 4, inter
    // mean 102.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("features.csv"), "0,A\n2,A\n10,B\n12,B\n").unwrap();
    let out = senns(dir.path(), &["eval", "features.csv", "--k", "1"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("scatter_ratio 0.0392156862745098"),
        "stdout: {text}"
    );
    assert!(text.contains("knn_accuracy 1"), "stdout: {text}");
}

#[test]
fn eval_shares_one_label_vocabulary_across_train_and_test_files() {
    // The two files list their classes in different first-appearance
    // orders; accuracy must still be computed on the shared names.
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("train.csv"), "0,B\n10,A\n").unwrap();
    std::fs::write(dir.path().join("test.csv"), "9.9,A\n0.1,B\n").unwrap();
    let out = senns(
        dir.path(),
        &["eval", "train.csv", "--test", "test.csv", "--k", "1"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(
        stdout(&out).contains("knn_accuracy 1"),
        "stdout: {}",
        stdout(&out)
    );
}

#[test]
fn train_extract_eval_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = senns(dir.path(), TRAIN_SMALL);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let out = senns(
        dir.path(),
        &[
            "extract",
            "--model",
            "model.senns",
            "--data-kind",
            "two-moons",
            "--n",
            "30",
            "--seed",
            "11",
            "--out",
            "features.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let out = senns(dir.path(), &["eval", "features.csv", "--k", "3"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("knn_accuracy"));
}

#[test]
fn pairs_csv_carries_the_counts_comment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.csv"), "1,2,A\n3,4,A\n5,6,B\n").unwrap();
    let out = senns(
        dir.path(),
        &[
            "pairs",
            "--data-kind",
            "csv",
            "--data-path",
            "tiny.csv",
            "--label-column",
            "2",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# m_c=5 m_d=4\nt,u,same_class\n"), "{text}");
    assert_eq!(text.lines().count(), 2 + 9);

    let out = senns(
        dir.path(),
        &[
            "pairs",
            "--data-kind",
            "csv",
            "--data-path",
            "tiny.csv",
            "--label-column",
            "2",
            "--pair-mode",
            "heuristic",
            "--k",
            "1",
        ],
    );
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("# m_c=2 m_d=3\n"), "{}", stdout(&out));
}

#[test]
fn gradcheck_passes_and_fault_injection_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = senns(dir.path(), &["gradcheck", "--seed", "4"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("gradcheck: PASS"));

    let out = senns(dir.path(), &["gradcheck", "--seed", "4", "--sabotage-sign"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("gradcheck: FAIL"));
    assert!(stderr(&out).contains("at W["), "failure names the coordinate");
}

#[test]
fn config_file_is_honored_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        r#"
seed = 11
layers = [4, 2]
alpha = 0.05
max_iters = 15

[data]
kind = "two-moons"
n = 30
"#,
    )
    .unwrap();
    let out = senns(dir.path(), &["train", "--config", "run.toml"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let from_config = std::fs::read(dir.path().join("model.senns")).unwrap();

    let dir_flags = tempfile::tempdir().unwrap();
    let out = senns(dir_flags.path(), TRAIN_SMALL);
    assert!(out.status.success());
    let from_flags = std::fs::read(dir_flags.path().join("model.senns")).unwrap();
    assert_eq!(from_config, from_flags);

    // A flag overrides the file value: one extra iteration changes the
    // model.
    let out = senns(
        dir.path(),
        &["train", "--config", "run.toml", "--max-iters", "16"],
    );
    assert!(out.status.success());
    let overridden = std::fs::read(dir.path().join("model.senns")).unwrap();
    assert_ne!(from_config, overridden);
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "learning_rate = 0.1\n").unwrap();
    let out = senns(dir.path(), &["train", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr(&out));
}
