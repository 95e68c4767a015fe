#![allow(clippy::needless_range_loop)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kong_core::fixtures::ordered_example_dataset;
use kong_core::generate::{random_dataset, RandomGraphSpec};
use kong_core::write_temporal_edge_list;

fn kong(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kong")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn mutag() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data/MUTAG")
        .display()
        .to_string()
}

struct Fixture {
    _dir: tempfile::TempDir,
    edges: PathBuf,
    labels: PathBuf,
    classes: PathBuf,
}

impl Fixture {
    fn write(edges: &str, labels: &str, classes: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Fixture {
            edges: dir.path().join("edges.csv"),
            labels: dir.path().join("labels.csv"),
            classes: dir.path().join("classes.csv"),
            _dir: dir,
        };
        fs::write(&f.edges, edges).unwrap();
        fs::write(&f.labels, labels).unwrap();
        fs::write(&f.classes, classes).unwrap();
        f
    }

    fn from_dataset(ds: &kong_core::GraphDataset) -> Self {
        let f = Self::write("", "", "");
        write_temporal_edge_list(ds, &f.edges, &f.labels, Some(&f.classes)).unwrap();
        f
    }

    /// Three small graphs: a path, a star and a triangle.
    fn three_graphs() -> Self {
        Self::write(
            "0,0,1,0\n0,1,2,1\n1,0,1,0\n1,0,2,1\n1,0,3,2\n2,0,1,0\n2,1,2,1\n2,2,0,2\n",
            "0,0,A\n0,1,B\n0,2,A\n1,0,B\n1,1,A\n1,2,A\n1,3,C\n2,0,A\n2,1,A\n2,2,B\n",
            "0,1\n1,0\n2,1\n",
        )
    }

    fn input(&self) -> Vec<String> {
        vec![
            "--edges".into(),
            self.edges.display().to_string(),
            "--node-labels".into(),
            self.labels.display().to_string(),
            "--graph-classes".into(),
            self.classes.display().to_string(),
        ]
    }

    fn run(&self, command: &str, extra: &[&str]) -> Output {
        let mut args: Vec<String> = vec![command.into()];
        args.extend(self.input());
        args.extend(extra.iter().map(|s| s.to_string()));
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        kong(&refs)
    }
}

#[test]
fn help_and_version_succeed() {
    let out = kong(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("oracle-check"));
    assert_eq!(kong(&["features", "--help"]).status.code(), Some(0));
    assert_eq!(kong(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(kong(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(kong(&["features"]).status.code(), Some(1));
    let f = Fixture::three_graphs();
    assert_eq!(
        f.run("features", &["--kernel", "cosine", "--c", "1"]).status.code(),
        Some(1)
    );
    assert_eq!(f.run("features", &["--k", "0"]).status.code(), Some(1));
    assert_eq!(f.run("features", &["--sketch-size", "100"]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let out = kong(&["features", "--dataset", "/nonexistent/NOPE"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    let bad = Fixture::write("0,0,7,0\n", "0,0,A\n", "0,1\n");
    assert_eq!(bad.run("features", &[]).status.code(), Some(2));
}

#[test]
fn unigrams_at_depth_zero_are_label_histograms() {
    let f = Fixture::three_graphs();
    let dir = tempfile::tempdir().unwrap();
    let vocab = dir.path().join("vocab.tsv");
    let out = f.run(
        "features",
        &["--k", "1", "--h", "0", "--vocab", vocab.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "1 0:2 1:1\n0 0:2 1:1 2:1\n1 0:2 1:1\n");
    assert_eq!(fs::read_to_string(vocab).unwrap(), "0\tA\n1\tB\n2\tC\n");
}

#[test]
fn sketched_output_is_reproducible() {
    let f = Fixture::three_graphs();
    let args = ["--sketch-size", "64", "--p", "2", "--seed", "9", "--format", "dense"];
    let a = f.run("features", &args);
    let b = f.run("features", &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("class,f0,"));
}

#[test]
fn unigram_features_ignore_shuffling() {
    let f = Fixture::from_dataset(&random_dataset(3, 20, &RandomGraphSpec::default()).unwrap());
    let plain = f.run("features", &["--k", "1", "--h", "3"]);
    let shuffled = f.run("features", &["--k", "1", "--h", "3", "--shuffle", "--seed", "4"]);
    assert_eq!(plain.status.code(), Some(0));
    assert_eq!(plain.stdout, shuffled.stdout);
    let bigrams = f.run("features", &["--k", "2", "--h", "3"]);
    let shuffled = f.run("features", &["--k", "2", "--h", "3", "--shuffle", "--seed", "4"]);
    assert_ne!(bigrams.stdout, shuffled.stdout);
}

#[test]
fn oracle_check_passes_and_detects_corruption() {
    let f = Fixture::from_dataset(&ordered_example_dataset());
    let out = f.run("oracle-check", &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("cases: 32") && text.ends_with("result: PASS\n"), "{text}");

    let out = kong(&["oracle-check", "--random", "200", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("cases: 6400"));

    let out = f.run("oracle-check", &["--corrupt"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout(&out).ends_with("result: FAIL\n"));
}

#[test]
fn gram_is_a_symmetric_csv() {
    let f = Fixture::three_graphs();
    let out = f.run("gram", &["--kernel", "cosine"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("graph,0,1,2"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for i in 0..3 {
        assert_eq!(rows[i].len(), 3);
        for j in 0..3 {
            assert_eq!(rows[i][j], rows[j][i]);
        }
    }
}

#[test]
fn stream_matches_in_memory_features() {
    let f = Fixture::from_dataset(&random_dataset(5, 15, &RandomGraphSpec::default()).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("memory.txt"), dir.path().join("stream.txt"));
    let common = ["--sketch-size", "128", "--p", "2", "--relabel", "--seed", "3"];
    let mut args = common.to_vec();
    args.extend(["--h", "2", "--out", a.to_str().unwrap()]);
    assert_eq!(f.run("features", &args).status.code(), Some(0));

    let mut args: Vec<String> = vec![
        "stream".into(),
        "--edges".into(),
        f.edges.display().to_string(),
        "--node-labels".into(),
        f.labels.display().to_string(),
        "--graph-classes".into(),
        f.classes.display().to_string(),
        "--passes".into(),
        "2".into(),
        "--out".into(),
        b.display().to_string(),
    ];
    args.extend(common.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = kong(&refs);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn train_reports_accuracy_and_saves_a_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.txt");
    let out = kong(&[
        "train",
        "--dataset",
        &mutag(),
        "--undirected",
        "--preset",
        "poly-rlb-1",
        "--repetitions",
        "2",
        "--save-model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let accuracy: f64 = text
        .strip_prefix("accuracy: ")
        .and_then(|t| t.split_whitespace().next())
        .unwrap()
        .parse()
        .unwrap();
    assert!((70.0..=100.0).contains(&accuracy), "{text}");
    assert!(fs::read_to_string(model).unwrap().starts_with("kong-linear-model 1"));
}
