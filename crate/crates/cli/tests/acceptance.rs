//! Acceptance criteria, each reported as one PASS/FAIL line on stderr.
//!
//! The end-to-end criterion trains three default models and takes a while on
//! a single core. Set `ACCEPTANCE_SKIP_TRAINING=1` to report it as skipped,
//! and `ACCEPTANCE_OUT=dir` to keep its artifacts.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use steingraph::data::load_graphs;
use steingraph::metrics::Report;
use support::criteria::{self, Verdict};

const TRAINING_SEEDS: [u64; 3] = [1, 2, 3];
const TRAINING_LIMIT: Duration = Duration::from_secs(2 * 3600);

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_steingraph"));
    c.env("ASTRAGEM_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn same_bytes(a: &Path, b: &Path) -> Result<(), String> {
    let read = |p: &Path| fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    if read(a)? == read(b)? {
        Ok(())
    } else {
        Err(format!("{} and {} differ", a.display(), b.display()))
    }
}

/// Criterion 8: trained samples against the density-matched ER baseline.
fn end_to_end(root: &Path) -> Verdict {
    let mut lines = Vec::new();
    let mut failed = false;
    for seed in TRAINING_SEEDS {
        let dir = root.join(format!("seed{seed}"));
        let seed_arg = seed.to_string();
        let data = dir.join("data");
        run(&["gen-data", "--dataset", "community-small", "--seed", &seed_arg, "--out", s(&data)])?;
        let train = data.join("train.json");
        let test = data.join("test.json");
        let count = load_graphs(&test).map_err(|e| e.to_string())?.len().to_string();

        let run_dir = dir.join("run");
        let start = Instant::now();
        run(&["train", "--data", s(&train), "--seed", &seed_arg, "--out", s(&run_dir)])?;
        let took = start.elapsed();
        let samples = dir.join("samples.json");
        let ckpt = run_dir.join("final.ckpt");
        run(&["sample", "--ckpt", s(&ckpt), "--count", &count, "--out", s(&samples)])?;
        let er = dir.join("er.json");
        run(&["baseline", "--train", s(&train), "--count", &count, "--seed", &seed_arg, "--out", s(&er)])?;

        let model_report = dir.join("model_report.json");
        let er_report = dir.join("er_report.json");
        run(&["eval", "--samples", s(&samples), "--test", s(&test), "--out", s(&model_report)])?;
        run(&["eval", "--samples", s(&er), "--test", s(&test), "--out", s(&er_report)])?;
        let m = Report::load(&model_report).map_err(|e| e.to_string())?;
        let b = Report::load(&er_report).map_err(|e| e.to_string())?;

        let wins = [m.deg < b.deg, m.clus < b.clus, m.orbit < b.orbit]
            .iter()
            .filter(|&&w| w)
            .count();
        let ok = m.avg < b.avg && wins >= 2 && took <= TRAINING_LIMIT;
        failed |= !ok;
        lines.push(format!(
            "seed {seed}: model deg {:.3} clus {:.3} orbit {:.3} avg {:.3} vs ER {:.3} {:.3} {:.3} {:.3}, {wins}/3 lower, trained in {:.0?}",
            m.deg, m.clus, m.orbit, m.avg, b.deg, b.clus, b.orbit, b.avg, took
        ));
    }
    let summary = lines.join("; ");
    if failed {
        Err(summary)
    } else {
        Ok(summary)
    }
}

const TINY_RUN: &str = "iterations = 3\nlangevin_steps = 100\n";

/// Criterion 9: identical seeds give identical bytes at any thread count.
fn determinism(root: &Path) -> Verdict {
    let config = root.join("run.toml");
    fs::write(&config, TINY_RUN).map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    // Both runs read the first run's data: the training data path is part of
    // the stored config.
    let shared = root.join("threads1").join("data");
    let train = shared.join("train.json");
    let test = shared.join("test.json");
    for threads in ["1", "4"] {
        let dir = root.join(format!("threads{threads}"));
        let data = dir.join("data");
        let run_dir = dir.join("run");
        let t = ["--threads", threads];
        run(&[&t[..], &["gen-data", "--seed", "9", "--out", s(&data)]].concat())?;
        run(&[&t[..], &["train", "--config", s(&config), "--data", s(&train), "--seed", "9", "--out", s(&run_dir)]].concat())?;
        let ckpt = run_dir.join("final.ckpt");
        let samples = dir.join("samples.json");
        run(&[&t[..], &["sample", "--ckpt", s(&ckpt), "--count", "4", "--out", s(&samples)]].concat())?;
        let report = dir.join("report.json");
        run(&[&t[..], &["eval", "--samples", s(&samples), "--test", s(&test), "--out", s(&report)]].concat())?;
        dirs.push(dir);
    }
    let files = [
        "data/train.json",
        "data/test.json",
        "data/provenance.json",
        "run/final.ckpt",
        "run/log.jsonl",
        "samples.json",
        "report.json",
    ];
    for f in files {
        same_bytes(&dirs[0].join(f), &dirs[1].join(f))?;
    }
    Ok(format!("{} artifacts byte-identical with --threads 1 and 4", files.len()))
}

/// Criterion 10: generated graph sizes stay within the dataset bounds.
fn dataset_bounds(root: &Path) -> Verdict {
    let mut summary = Vec::new();
    for (dataset, seeds, lo, hi) in [("community-small", [1, 2, 3], 12, 20), ("ego-small", [1, 2, 3], 4, 18)] {
        let mut total = 0;
        for seed in seeds {
            let out = root.join(format!("{dataset}-{seed}"));
            run(&["gen-data", "--dataset", dataset, "--seed", &seed.to_string(), "--out", s(&out)])?;
            for split in ["train.json", "test.json"] {
                let graphs = load_graphs(&out.join(split)).map_err(|e| e.to_string())?;
                if let Some(g) = graphs.graphs.iter().find(|g| !(lo..=hi).contains(&g.node_count())) {
                    return Err(format!("{dataset} seed {seed}: a graph has {} nodes", g.node_count()));
                }
                total += graphs.len();
            }
        }
        summary.push(format!("{total} {dataset} graphs in [{lo}, {hi}]"));
    }
    Ok(summary.join(", "))
}

fn report(number: usize, name: &str, outcome: &str, detail: &str) {
    // Written to the raw handle so the line shows up without --nocapture.
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {number:>2} {name}: {outcome} ({detail})");
}

#[test]
fn acceptance_criteria() {
    let kept = std::env::var_os("ACCEPTANCE_OUT").map(PathBuf::from);
    let temp = tempfile::tempdir().unwrap();
    let root = kept.unwrap_or_else(|| temp.path().to_path_buf());
    let area = |name: &str| {
        let p = root.join(name);
        fs::create_dir_all(&p).unwrap();
        p
    };

    let checks: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("gradient oracles", Box::new(criteria::gradient_oracles)),
        ("nested derivative", Box::new(criteria::nested_derivative)),
        ("stein identity", Box::new(criteria::stein_identity)),
        ("permutation suite", Box::new(criteria::permutation_suite)),
        ("orbit oracle", Box::new(criteria::orbit_suite)),
        ("mmd sanity", Box::new(criteria::mmd_sanity)),
        ("langevin calibration", Box::new(criteria::langevin_calibration)),
        ("end-to-end community-small", Box::new(|| end_to_end(&area("end_to_end")))),
        ("determinism", Box::new(|| determinism(&area("determinism")))),
        ("dataset bounds", Box::new(|| dataset_bounds(&area("datasets")))),
    ];
    let skip_training = std::env::var_os("ACCEPTANCE_SKIP_TRAINING").is_some();
    let mut failures = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let number = i + 1;
        if number == 8 && skip_training {
            report(number, name, "SKIP", "ACCEPTANCE_SKIP_TRAINING is set");
            continue;
        }
        match check() {
            Ok(detail) => report(number, name, "PASS", &detail),
            Err(detail) => {
                report(number, name, "FAIL", &detail);
                failures.push(number);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
