use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn goals(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_goals"))
        .args(args)
        .output()
        .expect("spawn goals")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn bowl_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![
        "train",
        "--set",
        "problem=synthetic-bowl",
        "--set",
        "batch_size=10",
        "--set",
        "eval_budget=200",
        "--set",
        "synthetic_samples=50",
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn train_writes_csv_to_stdout() {
    let out = goals(&bowl_args(&["--set", "strategy=goals-4"]));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("iter,evals,train_loss,test_loss,train_acc,test_acc,alpha,evals_iter,termination\n"));
    assert!(text.lines().count() > 2);
}

#[test]
fn train_reads_config_file_and_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# noisy scalar problem\nproblem = synthetic-quadratic\nstrategy = gos\nbatch_size = 10\neval_budget = 100\n",
    )
    .unwrap();
    let csv = dir.path().join("out.csv");
    let out = goals(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    assert!(fs::read_to_string(&csv).unwrap().starts_with("iter,evals"));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let a = goals(&bowl_args(&["--set", "strategy=goals-2", "--set", "seed=9"]));
    let b = goals(&bowl_args(&["--set", "strategy=goals-2", "--set", "seed=9"]));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_errors_exit_one() {
    assert_eq!(goals(&bowl_args(&["--set", "strategy=nope"])).status.code(), Some(1));
    assert_eq!(goals(&bowl_args(&["--set", "colour=blue"])).status.code(), Some(1));
    assert_eq!(goals(&bowl_args(&["--set", "batch_size=0"])).status.code(), Some(1));
    assert_eq!(goals(&bowl_args(&["--set", "c=1.5"])).status.code(), Some(1));
}

#[test]
fn missing_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = format!("data_dir={}", dir.path().display());
    let out = goals(&["train", "--set", &data, "--set", "eval_budget=10"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_three() {
    let out = goals(&bowl_args(&["--set", "strategy=fixed", "--set", "gamma=50"]));
    assert_eq!(out.status.code(), Some(3));
    // The partial log is still written.
    assert!(stdout(&out).starts_with("iter,evals"));
}

#[test]
fn robustness_from_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("acc.csv");
    fs::write(
        &table,
        "strategy,problem,optimizer,accuracy\n\
         a,p1,sgd,90\nb,p1,sgd,80\n\
         a,p2,sgd,70\nb,p2,sgd,75\n",
    )
    .unwrap();
    let out = goals(&["robustness", "--table", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().any(|l| l == "a,5"), "{text}");
    assert!(text.lines().any(|l| l == "b,10"), "{text}");
}

#[test]
fn robustness_rejects_incomplete_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("acc.csv");
    fs::write(
        &table,
        "strategy,problem,optimizer,accuracy\na,p1,sgd,90\nb,p2,sgd,80\n",
    )
    .unwrap();
    let out = goals(&["robustness", "--table", table.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_then_robustness_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("runs");
    let out = goals(&[
        "sweep",
        "--set",
        "problem=synthetic-bowl",
        "--set",
        "eval_budget=100",
        "--set",
        "synthetic_samples=50",
        "--strategies",
        "gos,fixed",
        "--batch-sizes",
        "5,10",
        "--seeds",
        "0,1",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = out_dir.join("manifest.csv");
    assert_eq!(fs::read_to_string(&manifest).unwrap().lines().count(), 9);
    assert!(Path::new(&out_dir.join("gos-sgd-b5-s1.csv")).exists());
    // Synthetic problems report no test accuracy to aggregate.
    let out = goals(&["robustness", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn histogram_counts_crossings() {
    let out = goals(&["histogram", "--trials", "50", "--points", "41"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha_lo,alpha_hi,count"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 40);
    let total: u64 = rows
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert!(total >= 50);
}

#[test]
fn gradcheck_passes_and_fails_on_tolerance() {
    let ok = goals(&["gradcheck", "--sizes", "3,4,2"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("3-4-2"));
    let strict = goals(&["gradcheck", "--sizes", "3,4,2", "--tolerance", "0"]);
    assert_eq!(strict.status.code(), Some(1));
}
