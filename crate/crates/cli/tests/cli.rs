use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use streambank::array_io::{write_matrix, Dtype};
use streambank::cost::{predict_incremental_sum, CostQuery};
use streambank::linalg::{Matrix, Precision};
use streambank::rate::SampleRate;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streambank"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// m × n matrix of exact rank `rank` built from smooth deterministic factors.
fn rank_matrix(m: usize, n: usize, rank: usize, phase: f64) -> Matrix {
    let mut data = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            let v: f64 = (0..rank)
                .map(|t| {
                    let t = t as f64 + 1.0;
                    (0.7 * t * i as f64 + t).sin() * (0.31 * t * j as f64 + phase).cos()
                })
                .sum();
            data.push(v);
        }
    }
    Matrix::from_col_major(m, n, data, Precision::Double).unwrap()
}

fn features(dir: &Path, name: &str, x: &Matrix) -> PathBuf {
    let path = dir.join(name);
    write_matrix(&path, x, Dtype::F8).unwrap();
    path
}

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn train_small(dir: &Path) -> (PathBuf, PathBuf) {
    let input = features(dir, "train.npy", &rank_matrix(12, 64, 4, 0.0));
    let bank = dir.join("bank");
    ok(&[
        "train",
        "--input",
        p(&input),
        "--output",
        p(&bank),
        "--k",
        "4",
        "--batch-size",
        "16",
        "--sample-rate",
        "0.25",
        "--incremental-sampling",
        "--buffer",
        "no",
    ]);
    (input, bank)
}

#[test]
fn train_reports_counts_that_match_the_cost_model() {
    let tmp = tempfile::tempdir().unwrap();
    let input = features(tmp.path(), "train.npy", &rank_matrix(12, 64, 4, 0.0));
    let bank = tmp.path().join("bank");
    let summary = json(&ok(&[
        "train",
        "--input",
        p(&input),
        "--output",
        p(&bank),
        "--k",
        "4",
        "--batch-size",
        "16",
        "--sample-rate",
        "0.25",
        "--incremental-sampling",
        "--buffer",
        "no",
    ]));
    assert_eq!(summary["bank_size"], 16);
    assert_eq!(summary["vectors_seen"], 64);
    let q = CostQuery::new(64, 16, SampleRate::new(1, 4).unwrap()).unwrap();
    let predicted = predict_incremental_sum(&q).unwrap() as u64;
    assert_eq!(summary["greedy_comparisons"].as_u64(), Some(predicted));

    let info = json(&ok(&["info", p(&bank)]));
    assert_eq!(info["bank_size"], 16);
    assert_eq!(info["m"], 12);
}

#[test]
fn empty_bank_configuration_exits_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let input = features(tmp.path(), "few.npy", &rank_matrix(6, 5, 2, 0.0));
    let out = run(&[
        "train",
        "--input",
        p(&input),
        "--output",
        p(&tmp.path().join("bank")),
        "--k",
        "2",
        "--batch-size",
        "4",
        "--sample-rate",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("= 0 vectors"));
    assert!(!tmp.path().join("bank").exists());
}

#[test]
fn several_problems_are_reported_at_once() {
    let tmp = tempfile::tempdir().unwrap();
    let input = features(tmp.path(), "x.npy", &rank_matrix(6, 20, 2, 0.0));
    let out = run(&[
        "train",
        "--input",
        p(&input),
        "--output",
        p(&tmp.path().join("bank")),
        "--k",
        "0",
        "--batch-size",
        "0",
        "--sample-rate",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("--k") && err.contains("--batch-size") && err.contains("1.5"),
        "{err}"
    );
}

#[test]
fn full_rate_bank_scores_its_own_span_near_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let x = rank_matrix(10, 40, 3, 0.0);
    let input = features(tmp.path(), "x.npy", &x);
    let bank = tmp.path().join("bank");
    ok(&[
        "train",
        "--input",
        p(&input),
        "--output",
        p(&bank),
        "--k",
        "3",
        "--batch-size",
        "8",
        "--sample-rate",
        "1",
    ]);
    let scores = tmp.path().join("scores.tsv");
    ok(&[
        "score",
        "--bank",
        p(&bank),
        "--input",
        p(&input),
        "--output",
        p(&scores),
    ]);
    let text = fs::read_to_string(&scores).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("vector_index\tscore\tnearest_index"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 40);
    for row in rows {
        let score: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
        assert!(score <= 1e-9, "{row}");
    }
}

#[test]
fn empty_query_file_writes_only_the_header() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, bank) = train_small(tmp.path());
    let empty = features(
        tmp.path(),
        "empty.npy",
        &Matrix::zeros(12, 0, Precision::Double),
    );
    let scores = tmp.path().join("scores.tsv");
    ok(&[
        "score",
        "--bank",
        p(&bank),
        "--input",
        p(&empty),
        "--output",
        p(&scores),
    ]);
    assert_eq!(
        fs::read_to_string(&scores).unwrap(),
        "vector_index\tscore\tnearest_index\n"
    );
}

#[test]
fn query_dimension_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, bank) = train_small(tmp.path());
    let wrong = features(tmp.path(), "wrong.npy", &rank_matrix(11, 4, 2, 0.0));
    let out = run(&[
        "score",
        "--bank",
        p(&bank),
        "--input",
        p(&wrong),
        "--output",
        p(&tmp.path().join("s.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!tmp.path().join("s.tsv").exists());
}

#[test]
fn groups_produce_image_scores_and_eval_reads_them() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, bank) = train_small(tmp.path());
    // Image a is in-span; image b is pushed well off the training subspace.
    let normal = rank_matrix(12, 4, 4, 0.3);
    let mut odd = rank_matrix(12, 4, 4, 0.9);
    odd.append_columns(&Matrix::from_col_major(12, 1, vec![9.0; 12], Precision::Double).unwrap())
        .unwrap();
    let normal_path = features(tmp.path(), "a.npy", &normal);
    let odd_path = features(tmp.path(), "b.npy", &odd);
    let groups = tmp.path().join("groups.json");
    fs::write(&groups, r#"{"a": [0, 4], "b": [4, 9]}"#).unwrap();
    let scores = tmp.path().join("out.tsv");
    ok(&[
        "score",
        "--bank",
        p(&bank),
        "--input",
        p(&normal_path),
        p(&odd_path),
        "--output",
        p(&scores),
        "--groups",
        p(&groups),
    ]);
    let images = fs::read_to_string(tmp.path().join("out.images.tsv")).unwrap();
    let rows: Vec<(String, f64)> = images
        .lines()
        .skip(1)
        .map(|l| {
            let (id, s) = l.split_once('\t').unwrap();
            (id.to_string(), s.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].1 > rows[0].1);

    let labels = tmp.path().join("labels.tsv");
    fs::write(&labels, "id\tlabel\nb\t1\na\t0\n").unwrap();
    let summary = json(&ok(&[
        "eval",
        "--input",
        p(&tmp.path().join("out.images.tsv")),
        "--labels",
        p(&labels),
    ]));
    assert_eq!(summary["auroc"], 1.0);
    assert_eq!(
        (summary["n_pos"].as_u64(), summary["n_neg"].as_u64()),
        (Some(1), Some(1))
    );
}

#[test]
fn bad_groups_are_rejected_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, bank) = train_small(tmp.path());
    let groups = tmp.path().join("groups.json");
    fs::write(&groups, r#"{"a": [0, 40], "b": [30, 64]}"#).unwrap();
    let out = run(&[
        "score",
        "--bank",
        p(&bank),
        "--input",
        p(&input),
        "--output",
        p(&tmp.path().join("s.tsv")),
        "--groups",
        p(&groups),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(!tmp.path().join("s.tsv").exists());
}

#[test]
fn eval_examples() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("s.tsv");
    fs::write(
        &scores,
        "image_id\timage_score\nx\t0.1\ny\t0.9\nz\t0.5\nw\t0.5\n",
    )
    .unwrap();
    let labels = tmp.path().join("l.tsv");
    fs::write(&labels, "w\t1\nz\t0\ny\t1\nx\t0\n").unwrap();
    let out = tmp.path().join("eval.json");
    ok(&[
        "eval",
        "--input",
        p(&scores),
        "--labels",
        p(&labels),
        "--output",
        p(&out),
    ]);
    // Pairs: (y,x) (y,z) (w,x) win, (w,z) ties.
    assert_eq!(json(&fs::read_to_string(&out).unwrap())["auroc"], 0.875);

    fs::write(&labels, "w\t0\nz\t0\ny\t0\nx\t0\n").unwrap();
    let single = run(&["eval", "--input", p(&scores), "--labels", p(&labels)]);
    assert_eq!(single.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&single.stderr).contains("both classes"));

    fs::write(&labels, "w\t0\nz\t1\ny\t0\n").unwrap();
    let missing = run(&["eval", "--input", p(&scores), "--labels", p(&labels)]);
    assert_eq!(missing.status.code(), Some(3));
}

#[test]
fn bench_rows_match_the_worked_example() {
    let out = ok(&[
        "bench-sampling",
        "--synthetic",
        "16",
        "--sample-batch",
        "4",
        "--sample-rate",
        "0.25",
        "--buffer",
        "no,all",
    ]);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("N\tB\tr\tpolicy\tmeasured_comparisons\tpredicted_comparisons\tratio_vs_batchless\tpeak_stored")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][3..6], &["no", "60", "60"]);
    assert_eq!(&rows[1][3..6], &["all", "64", "64"]);
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let input = features(tmp.path(), "x.npy", &rank_matrix(9, 120, 5, 0.2));
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let bank = tmp.path().join(format!("bank{run_id}"));
        let reduced = tmp.path().join(format!("reduced{run_id}"));
        let scores = tmp.path().join(format!("s{run_id}.tsv"));
        ok(&[
            "train",
            "--input",
            p(&input),
            "--output",
            p(&bank),
            "--k",
            "4",
            "--batch-size",
            "32",
            "--sample-rate",
            "0.1",
            "--incremental-sampling",
            "--buffer",
            "2",
        ]);
        ok(&[
            "reduce",
            "--input",
            p(&input),
            "--output",
            p(&reduced),
            "--k",
            "4",
            "--batch-size",
            "32",
        ]);
        ok(&[
            "score",
            "--bank",
            p(&bank),
            "--input",
            p(&input),
            "--output",
            p(&scores),
        ]);
        let mut files = Vec::new();
        for dir in [&bank, &reduced] {
            let mut names: Vec<_> = fs::read_dir(dir)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            files.extend(names.into_iter().map(|f| fs::read(f).unwrap()));
        }
        files.push(fs::read(&scores).unwrap());
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn unreadable_input_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.npy");
    fs::write(&bad, b"not an npy file at all").unwrap();
    let out = run(&["info", p(&bad)]);
    assert_eq!(out.status.code(), Some(3));
    let missing = run(&["info", p(&tmp.path().join("nope.npy"))]);
    assert_eq!(missing.status.code(), Some(3));
}
