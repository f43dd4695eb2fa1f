#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_ulab"))
}

pub fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin()).args(args).current_dir(dir).env_remove("ULAB_SEED").output().expect("spawn ulab")
}

/// Small invocations covering every subcommand; the output path is appended.
/// The flag reports whether the subcommand takes `--threads`.
pub fn small_cases() -> Vec<(&'static str, Vec<&'static str>, bool)> {
    let exp = |sub: &'static str, extra: &[&'static str]| {
        let mut v = vec![sub, "--m", "60", "--n", "80", "--seed", "3"];
        v.extend_from_slice(extra);
        v
    };
    vec![
        ("fpe-lasso", vec!["fpe", "--model", "lasso", "--delta", "0.8", "--lambda", "1"], false),
        ("fpe-robust", vec!["fpe", "--model", "robust", "--delta", "0.8", "--lambda", "0.5", "--loss", "huber:1"], false),
        ("solve", exp("solve", &["--estimator", "lasso", "--lambda", "0.5", "--alpha", "0.05"]), false),
        (
            "risk-curve",
            exp("risk-curve", &["--design", "gaussian", "--design", "student:3.5", "--estimator", "lasso", "--lambda-grid", "0.5:2:3", "--reps", "3"]),
            true,
        ),
        ("qq", exp("qq", &["--estimator", "ridge", "--lambda", "1", "--reps", "2"]), true),
        ("residual", exp("residual", &["--estimator", "lasso", "--lambda", "1", "--reps", "3"]), true),
        ("sparsity", exp("sparsity", &["--lambda-grid", "0.5:2:3", "--reps", "3"]), true),
        ("coverage", exp("coverage", &["--lambda", "1", "--reps", "3", "--design", "student:3"]), true),
        ("counterexample", vec!["counterexample", "--L", "4", "--m", "80", "--n", "20", "--reps", "10", "--seed", "3"], true),
        (
            "cost-compare",
            exp("cost-compare", &["--estimator", "robust", "--loss", "huber:1", "--lambda", "1", "--reps", "2", "--design", "gaussian", "--design", "student:6"]),
            true,
        ),
    ]
}

fn strip_runtime(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).expect("metadata is JSON");
    if let Some(o) = v.as_object_mut() {
        o.remove("runtime_seconds");
    }
    v
}

/// Runs a case twice (with different worker counts where supported) and
/// reports whether the primary output bytes and the metadata, apart from
/// the wall-clock time, agree.
pub fn deterministic(name: &str, args: &[&str], threads: bool) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ext = if name.starts_with("fpe") { "json" } else { "csv" };
    let mut outputs = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let out = format!("run{k}.{ext}");
        let mut argv: Vec<&str> = args.to_vec();
        argv.extend(["--out", out.as_str()]);
        if threads {
            argv.extend(["--threads", workers]);
        }
        let o = run(&argv, dir.path());
        if !o.status.success() {
            return Err(format!("{name}: exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)));
        }
        let main = std::fs::read(dir.path().join(&out)).map_err(|e| e.to_string())?;
        let meta = std::fs::read(dir.path().join(format!("run{k}.meta.json"))).ok().map(|b| strip_runtime(&b));
        outputs.push((main, meta));
    }
    if outputs[0].0.is_empty() {
        return Err(format!("{name}: empty output"));
    }
    if outputs[0].0 != outputs[1].0 {
        return Err(format!("{name}: outputs differ between reruns"));
    }
    if outputs[0].1 != outputs[1].1 {
        return Err(format!("{name}: metadata differs between reruns"));
    }
    Ok(())
}
