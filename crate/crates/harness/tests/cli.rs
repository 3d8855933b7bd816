mod common;

use std::process::{Command, Output};

fn baps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_baps")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = baps(args);
    assert!(
        out.status.success(),
        "baps {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn every_subcommand_is_deterministic() {
    let root = tempfile::tempdir().unwrap();
    common::cli_determinism(root.path());
}

#[test]
fn blackbox_serve_is_deterministic() {
    let mut input = common::request(4, 5, 1, 2, 0.3);
    input.extend(common::request(3, 3, 7, 0, 0.3));
    let a = common::serve(&input);
    assert_eq!(a, common::serve(&input));
    // ok frame: 4-byte length, status 0, H, W, 20 floats of 1.0
    assert_eq!(&a[0..4], &(1u32 + 8 + 80).to_le_bytes());
    assert_eq!(a[4], 0);
    assert_eq!(&a[13..17], &1.0f32.to_le_bytes());
    // second request: point outside the 3×3 image
    let second = &a[4 + 89..];
    assert_eq!(second[4], 1);
}

fn code(args: &[&str]) -> i32 {
    baps(args).status.code().unwrap()
}

#[test]
fn exit_codes_by_category() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().to_str().unwrap();
    // usage and config errors
    assert_eq!(code(&["train", "--mode", "sometimes"]), 2);
    assert_eq!(
        code(&["train", "--mode", "zeroshot", "--optimizer", "spsa", "--out", out]),
        2
    );
    assert_eq!(code(&["eval", "--mode", "baps", "--alpha", "-1", "--out", out]), 2);
    // data errors
    let missing = root.path().join("nowhere");
    assert_eq!(
        code(&[
            "eval",
            "--mode",
            "zeroshot",
            "--data-dir",
            missing.to_str().unwrap(),
            "--out",
            out
        ]),
        3
    );
    assert_eq!(
        code(&[
            "eval",
            "--mode",
            "baps",
            "--n-test",
            "4",
            "--eval-repeats",
            "1",
            "--out",
            out
        ]),
        3
    );
    // oracle errors
    assert_eq!(
        code(&[
            "eval",
            "--mode",
            "zeroshot",
            "--n-test",
            "4",
            "--oracle",
            "subprocess",
            "--oracle-command",
            "/bin/true",
            "--out",
            out
        ]),
        4
    );
    // divergence
    let trace = root.path().join("t.csv");
    assert_eq!(
        code(&[
            "bench-optimizer",
            "--function",
            "rosenbrock",
            "--dim",
            "2",
            "--alpha",
            "1e300",
            "--budget",
            "50",
            "--out",
            trace.to_str().unwrap()
        ]),
        5
    );
}

#[test]
fn config_file_with_flag_override() {
    let root = tempfile::tempdir().unwrap();
    let cfg = root.path().join("run.toml");
    std::fs::write(&cfg, "mode = \"zeroshot\"\nn_test = 4\neval_repeats = 1\nseed = 9\n").unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    ok(&["eval", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    ok(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--eval-repeats",
        "2",
        "--out",
        b.to_str().unwrap(),
    ]);
    let ra = std::fs::read_to_string(a.join("eval.csv")).unwrap();
    let rb = std::fs::read_to_string(b.join("eval.csv")).unwrap();
    assert_eq!(ra.lines().count(), 1 + 4);
    assert_eq!(rb.lines().count(), 1 + 8);
    std::fs::write(&cfg, "mode = \"zeroshot\"\nlearning_rate = 0.1\n").unwrap();
    assert_eq!(
        code(&["eval", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]),
        2
    );
}
