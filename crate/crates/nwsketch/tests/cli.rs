use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nwsketch::csvio::{write_csv, CsvOptions};
use nwsketch::dataset::DatasetSpec;
use nwsketch::io::save_nws;
use nwsketch_core::stats::pearson;
use nwsketch_core::{LshFamilySpec, NwConfig, NwSketch};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nwsketch"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "nwsketch {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn out_dir(root: &Path, name: &str) -> String {
    root.join(name).to_str().unwrap().to_string()
}

fn numbers(csv_text: &str, column: usize) -> Vec<f64> {
    csv_text.lines().skip(1).map(|l| l.split(',').nth(column).unwrap().parse().unwrap()).collect()
}

#[test]
fn regress_bench_single_r_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_dir(dir.path(), "rb");
    run(&["regress-bench", "--data", "smooth-angular:n=400,d=3", "-R", "50", "--output", &o]);
    let text = read(Path::new(&o).join("regress_bench.csv"));
    let want = golden("regress_bench_single_r.csv");
    assert_eq!(text.lines().count(), want.lines().count());
    for (got, exp) in text.lines().zip(want.lines()) {
        if exp.starts_with("method") {
            assert_eq!(got, exp);
        } else {
            // Everything but the measured value is fixed.
            let (g, e) = (got.rsplit_once(',').unwrap(), exp.rsplit_once(',').unwrap());
            assert_eq!(g.0, e.0);
            assert!(g.1.parse::<f64>().unwrap().is_finite());
        }
    }
    assert!(Path::new(&o).join("manifest.toml").exists());
}

#[test]
fn regress_bench_ols_wins_on_linear_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_dir(dir.path(), "rb");
    run(&["regress-bench", "--data", "linear:n=2000,d=4,noise=0.1", "-R", "10", "--output", &o]);
    let mse = numbers(&read(Path::new(&o).join("regress_bench.csv")), 3);
    assert!(mse[1] * 10.0 < mse[0], "ols {} vs nws {}", mse[1], mse[0]);
}

#[test]
fn error_study_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_dir(dir.path(), "es");
    run(&["error-study", "-R", "10,20,40,80,160", "--seeds", "5", "--output", &o]);
    let text = read(Path::new(&o).join("error_study.csv"));
    assert_eq!(text.lines().next().unwrap(), golden("error_study_header.csv").trim_end());
    let p99 = numbers(&text, 2);
    let bound = numbers(&text, 3);
    assert!(p99.iter().zip(&bound).all(|(p, b)| p <= b));
    let shrink = p99[0] / p99[4];
    assert!(shrink >= 1.6, "p99 shrank only {shrink:.2}x over four doublings");
}

#[test]
fn every_subcommand_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let train = root.join("train.csv");
    let data = "smooth-angular:n=300,d=3".parse::<DatasetSpec>().unwrap().load(1, &CsvOptions::default()).unwrap();
    write_csv(&data, &train, true).unwrap();
    let queries = root.join("q.csv");
    std::fs::write(&queries, "a,b,c\n1,0,0\n0.5,-1,2\n").unwrap();
    let train_s = train.to_str().unwrap();
    let queries_s = queries.to_str().unwrap();

    for run_id in ["a", "b"] {
        let o = |name: &str| out_dir(root, &format!("{name}-{run_id}"));
        run(&["sketch-build", "--data", train_s, "-R", "20", "--seed", "3", "--output", &o("build")]);
        // Both query runs read the first snapshot so their manifests match.
        let snap = format!("{}/sketch.nws", out_dir(root, "build-a"));
        run(&["sketch-query", "--snapshot", &snap, "--queries", queries_s, "--output", &o("query")]);
        run(&["regress-bench", "--data", train_s, "-R", "10,20", "--seed", "3", "--output", &o("bench")]);
        run(&["error-study", "-R", "5,10", "--seeds", "2", "--n-train", "200", "--output", &o("study")]);
        run(&["train-demo", "--no-clock", "--seed", "2", "--output", &o("demo")]);
        let base = format!("{}/baseline.csv", out_dir(root, "demo-a"));
        let adapt = format!("{}/adaptive.csv", out_dir(root, "demo-a"));
        run(&["compare", "--baseline", &base, "--adaptive", &adapt, "--output", &o("cmp")]);
    }
    for name in ["build", "query", "bench", "study", "demo", "cmp"] {
        let a = root.join(format!("{name}-a"));
        for entry in std::fs::read_dir(&a).unwrap() {
            let file = entry.unwrap().file_name();
            let b = root.join(format!("{name}-b")).join(&file);
            let a_bytes = std::fs::read(a.join(&file)).unwrap();
            let b_bytes = std::fs::read(&b).unwrap();
            assert!(a_bytes == b_bytes, "{name}/{} differs between runs", file.to_string_lossy());
        }
    }
}

#[test]
fn build_then_query_tracks_targets() {
    let dir = tempfile::tempdir().unwrap();
    let spec = "smooth-angular:n=2000,d=4,noise=0.05";
    let o = out_dir(dir.path(), "build");
    run(&["sketch-build", "--data", spec, "-R", "400", "--seed", "7", "--output", &o]);

    // Reproduce the synthetic training points and query at them.
    let data = spec.parse::<DatasetSpec>().unwrap().load(7, &CsvOptions::default()).unwrap();
    let queries = dir.path().join("q.csv");
    let mut text = String::from("x0,x1,x2,x3\n");
    for row in data.rows() {
        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    std::fs::write(&queries, text).unwrap();
    let q = out_dir(dir.path(), "query");
    let snap = format!("{o}/sketch.nws");
    run(&["sketch-query", "--snapshot", &snap, "--queries", queries.to_str().unwrap(), "--seed", "7", "--output", &q]);
    let est = numbers(&read(Path::new(&q).join("estimates.csv")), 0);
    let r = pearson(&est, data.y().unwrap()).unwrap();
    assert!(r >= 0.9, "pearson {r}");
}

#[test]
fn empty_snapshot_answers_zero() {
    let dir = tempfile::tempdir().unwrap();
    let snap = dir.path().join("empty.nws");
    let spec = LshFamilySpec::srp(6, 2, 1).unwrap();
    let sketch = NwSketch::new(spec, NwConfig { rows: 10, y_bound: 1.0, estimator: Default::default() }).unwrap();
    save_nws(&sketch, &snap).unwrap();
    let queries = dir.path().join("q.csv");
    std::fs::write(&queries, "a,b\n1,2\n-3,0.5\n").unwrap();
    let o = out_dir(dir.path(), "q");
    run(&["sketch-query", "--snapshot", snap.to_str().unwrap(), "--queries", queries.to_str().unwrap(), "--output", &o]);
    assert_eq!(read(Path::new(&o).join("estimates.csv")), "estimate\n0\n0\n");
}

#[test]
fn query_rejects_mismatches_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_dir(dir.path(), "build");
    run(&["sketch-build", "--data", "step:n=100,d=3", "-R", "5", "--seed", "1", "--output", &o]);
    let snap = PathBuf::from(&o).join("sketch.nws");
    let queries = dir.path().join("q.csv");
    std::fs::write(&queries, "a,b,c\n1,2,3\n").unwrap();
    let query = |snap: &Path, queries: &Path, seed: &str| {
        bin()
            .args(["sketch-query", "--snapshot", snap.to_str().unwrap(), "--queries", queries.to_str().unwrap()])
            .args(["--seed", seed, "--output", &out_dir(dir.path(), "q")])
            .output()
            .unwrap()
    };
    assert!(query(&snap, &queries, "1").status.success());
    assert!(!query(&snap, &queries, "2").status.success());

    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "a,b\n1,2\n").unwrap();
    assert!(!query(&snap, &narrow, "1").status.success());

    let mut bytes = std::fs::read(&snap).unwrap();
    bytes[10] ^= 0xff;
    let bad = dir.path().join("bad.nws");
    std::fs::write(&bad, bytes).unwrap();
    let out = query(&bad, &queries, "1");
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_dir(dir.path(), "x");
    for args in [
        vec!["regress-bench", "--data", "/nonexistent/file.csv", "--output", &o],
        vec!["regress-bench", "--data", "step:n=abc", "--output", &o],
        vec!["error-study", "--delta", "2", "--output", &o],
        vec!["error-study", "--kind", "linear", "--output", &o],
        vec!["sketch-build", "--data", "step:n=50,d=2", "--estimator", "median", "--output", &o],
        vec!["no-such-command"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
    }
}

#[test]
fn train_demo_report_schema_and_reduction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[data]\ndataset = \"two-gaussians:n=1000,d=4,separation=2.5\"\n\
         [train]\niterations = 120\n\
         [train.sampler]\ntarget_ratio = 1.0\np_min = 1.0\n",
    )
    .unwrap();
    let o = out_dir(dir.path(), "demo");
    run(&["train-demo", "--config", cfg.to_str().unwrap(), "--output", &o]);
    let report: serde_json::Value = serde_json::from_str(&read(Path::new(&o).join("report.json"))).unwrap();

    let mut lines = Vec::new();
    fn walk(v: &serde_json::Value, prefix: &str, out: &mut Vec<String>) {
        for (k, v) in v.as_object().unwrap() {
            let ty = match v {
                serde_json::Value::Object(_) => "dict",
                serde_json::Value::Number(n) if n.is_f64() => "float",
                serde_json::Value::Number(_) => "int",
                serde_json::Value::String(_) => "str",
                _ => "other",
            };
            out.push(format!("{prefix}{k}:{ty}"));
            if v.is_object() {
                walk(v, &format!("{prefix}{k}."), out);
            }
        }
    }
    walk(&report, "", &mut lines);
    let mut want: Vec<String> = golden("report_schema.txt").lines().map(str::to_string).collect();
    lines.sort();
    want.sort();
    assert_eq!(lines, want);
    assert_eq!(report["speedup_examples"], serde_json::json!(1.0));

    // Re-running from the manifest reproduces the metric streams.
    let again = out_dir(dir.path(), "again");
    let manifest = format!("{o}/manifest.toml");
    run(&["train-demo", "--config", &manifest, "--no-clock", "--output", &again]);
    let first = out_dir(dir.path(), "first");
    run(&["train-demo", "--config", cfg.to_str().unwrap(), "--no-clock", "--output", &first]);
    assert_eq!(read(Path::new(&first).join("adaptive.csv")), read(Path::new(&again).join("adaptive.csv")));
}
