#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use baps_core::dataset::DatasetSpec;
use baps_harness::{DataSource, Mode, OracleMode, RunConfig};

/// A run small enough for debug-free test times: 32×32 images, 8 training
/// samples in batches of 4, two epochs.
pub fn small_config(mode: Mode, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::for_mode(mode);
    cfg.data = DataSource::Generate(DatasetSpec {
        n_train: 8,
        n_val: 4,
        n_test: 6,
        height: 32,
        width: 32,
        seed: 5,
        ..DatasetSpec::default()
    });
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.eval_repeats = 2;
    cfg.seed = 3;
    cfg.out = out.to_path_buf();
    cfg
}

pub fn subprocess(mut cfg: RunConfig) -> RunConfig {
    cfg.oracle = OracleMode::Subprocess;
    cfg.oracle_command = Some(PathBuf::from(env!("CARGO_BIN_EXE_baps")));
    cfg
}

pub fn read(path: impl AsRef<Path>) -> Vec<u8> {
    let path = path.as_ref();
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Items the rest of the workspace may take from the segmenter crate: the
/// constructor, its parameters, and the subprocess transport. Everything
/// else talks to `BlackboxOracle` only.
pub const SEGMENTER_SURFACE: [&str; 4] = ["make_oracle", "GrowerParams", "serve", "SubprocessOracle"];

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rust_sources(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            rust_sources(&path, out);
        } else if path.extension().is_some_and(|e| e == "rs") {
            out.push(path);
        }
    }
}

fn dependency_names(manifest: &Path, table: &str) -> Vec<String> {
    let text = std::fs::read_to_string(manifest).unwrap();
    let doc: toml::Table = text.parse().unwrap();
    doc.get(table)
        .and_then(|t| t.as_table())
        .map(|t| t.keys().cloned().collect())
        .unwrap_or_default()
}

/// Checks who may see the segmenter. Returns one message per violation.
pub fn audit_segmenter_boundary() -> Vec<String> {
    let root = workspace();
    let mut problems = Vec::new();

    // the optimizer sees scalar losses only; the adapter and metrics see the
    // oracle trait only
    for (krate, forbidden) in [
        ("zoo", &["baps-blackbox", "baps-core", "baps-harness"][..]),
        ("core", &["baps-blackbox", "baps-harness"][..]),
    ] {
        let manifest = root.join("crates").join(krate).join("Cargo.toml");
        for table in ["dependencies", "dev-dependencies", "build-dependencies"] {
            for dep in dependency_names(&manifest, table) {
                if forbidden.contains(&dep.as_str()) {
                    problems.push(format!("{krate} {table} includes {dep}"));
                }
            }
        }
        let mut files = Vec::new();
        rust_sources(&root.join("crates").join(krate).join("src"), &mut files);
        for f in files {
            let text = std::fs::read_to_string(&f).unwrap();
            if text.contains("baps_blackbox") {
                problems.push(format!("{} mentions baps_blackbox", f.display()));
            }
        }
    }

    let mut files = Vec::new();
    rust_sources(&root.join("crates/harness/src"), &mut files);
    for f in files {
        let text = std::fs::read_to_string(&f).unwrap();
        for (at, _) in text.match_indices("baps_blackbox::") {
            let rest = &text[at + "baps_blackbox::".len()..];
            let names: Vec<&str> = if let Some(list) = rest.strip_prefix('{') {
                list[..list.find('}').unwrap()]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .collect()
            } else {
                let end = rest
                    .find(|c: char| !(c.is_alphanumeric() || c == '_'))
                    .unwrap_or(rest.len());
                vec![&rest[..end]]
            };
            for n in names {
                if !SEGMENTER_SURFACE.contains(&n) {
                    problems.push(format!("{} uses baps_blackbox::{n}", f.display()));
                }
            }
        }
    }
    problems
}

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

fn same_files(a: &Path, b: &Path, files: &[&str]) {
    for f in files {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, y, "{f} differs");
    }
}

/// One length-prefixed single-channel segmentation request.
pub fn request(h: u32, w: u32, x: u32, y: u32, pixel: f32) -> Vec<u8> {
    let mut payload = Vec::new();
    for v in [h, w, 1, x, y] {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    for _ in 0..h * w {
        payload.extend_from_slice(&pixel.to_le_bytes());
    }
    let mut frame = (payload.len() as u32).to_le_bytes().to_vec();
    frame.extend(payload);
    frame
}

pub fn serve(input: &[u8]) -> Vec<u8> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_baps"))
        .arg("blackbox-serve")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    out.stdout
}

/// Runs gen-data, train, eval, compare, bench-optimizer and blackbox-serve
/// twice each under `root` and asserts byte-identical outputs.
pub fn cli_determinism(root: &Path) {
    let p = |s: &str| root.join(s).to_str().unwrap().to_string();

    for d in ["data_a", "data_b"] {
        ok(&[
            "gen-data",
            "--out",
            &p(d),
            "--n-train",
            "8",
            "--n-val",
            "4",
            "--n-test",
            "6",
            "--height",
            "32",
            "--width",
            "32",
            "--seed",
            "5",
        ]);
    }
    same_files(
        &root.join("data_a"),
        &root.join("data_b"),
        &["train.bin", "val.bin", "test.bin", "fingerprint.txt"],
    );

    let data = p("data_a");
    let common = [
        "--batch-size",
        "4",
        "--epochs",
        "2",
        "--eval-repeats",
        "2",
        "--seed",
        "3",
        "--data-dir",
        data.as_str(),
    ];
    for run in ["baps_a", "baps_b"] {
        let out = p(run);
        let mut args = vec!["train", "--mode", "baps", "--out", out.as_str()];
        args.extend(common);
        ok(&args);
        args[0] = "eval";
        ok(&args);
    }
    let (a, b) = (root.join("baps_a"), root.join("baps_b"));
    same_files(
        &a,
        &b,
        &["checkpoint.bin", "trace.csv", "val.csv", "eval.csv", "report.toml"],
    );
    let without_out = |dir: &Path| -> Vec<String> {
        let text = std::fs::read_to_string(dir.join("config.toml")).unwrap();
        text.lines()
            .filter(|l| !l.starts_with("out "))
            .map(String::from)
            .collect()
    };
    assert_eq!(without_out(&a), without_out(&b));

    let zs = p("zs");
    let mut args = vec!["eval", "--mode", "zeroshot", "--out", zs.as_str()];
    args.extend(common);
    ok(&args);

    for cmp in ["cmp_a", "cmp_b"] {
        let reports = [format!("{zs}/report.toml"), format!("{}/report.toml", p("baps_a"))];
        let out = p(cmp);
        let printed = ok(&["compare", &reports[0], &reports[1], "--out", &out]);
        assert!(String::from_utf8_lossy(&printed.stdout).contains("baps/spsa-geass"));
    }
    same_files(&root.join("cmp_a"), &root.join("cmp_b"), &["comparison.csv"]);

    for name in ["bench_a.csv", "bench_b.csv"] {
        ok(&[
            "bench-optimizer",
            "--function",
            "rastrigin",
            "--dim",
            "4",
            "--budget",
            "300",
            "--seed",
            "7",
            "--out",
            &p(name),
        ]);
    }
    assert_eq!(
        std::fs::read(p("bench_a.csv")).unwrap(),
        std::fs::read(p("bench_b.csv")).unwrap()
    );

    let mut input = request(8, 8, 3, 4, 0.6);
    input.extend(request(5, 7, 6, 1, 0.2));
    let first = serve(&input);
    assert!(!first.is_empty());
    assert_eq!(first, serve(&input), "blackbox-serve output differs");
}
