use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graphda_core::io::read_pcst_instance;
use graphda_core::{brute_force_pcst, pcst_objective, solve_pcst, PcstInstance};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn graphda(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphda"))
        .args(args)
        .env_remove("GRAPHDA_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [&["frobnicate"][..], &["run", "--bogus"], &[]] {
        let o = graphda(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).contains("Usage:"), "{args:?}");
    }
    assert_eq!(graphda(&["project", "--mode", "sideways"]).status.code(), Some(2));
    assert_eq!(graphda(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_are_one_line() {
    let o = graphda(&["project", "--vector", "/no/such/file", "--mode", "top-s", "--s", "2"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("graphda: error:"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "trials = 1\nwho = me\n").unwrap();
    let o = graphda(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let four = fixture("four.vec");
    let o = graphda(&["project", "--vector", four.to_str().unwrap(), "--mode", "tail", "--s", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--graph"));
}

#[test]
fn top_s_projection_of_four_values() {
    let four = fixture("four.vec");
    let o = graphda(&["project", "--vector", four.to_str().unwrap(), "--mode", "top-s", "--s", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("support 1 2 3"));
    assert_eq!(lines.collect::<Vec<_>>(), vec!["0.0", "-3.0", "2.0", "1.0"]);
}

#[test]
fn tail_projection_is_connected() {
    let (graph, six) = (fixture("toy.graph"), fixture("six.vec"));
    let o = graphda(&[
        "project", "--vector", six.to_str().unwrap(), "--graph", graph.to_str().unwrap(),
        "--mode", "tail", "--s", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    // the heaviest entries 2, 3, 4 form the path w3-w4-w5; the size window
    // (3, ceil(3 * 1.1)) is empty, so the search may settle on 4 nodes
    let text = stdout(&o);
    let support: Vec<usize> = text.lines().next().unwrap().split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect();
    assert!([2, 3, 4].iter().all(|i| support.contains(i)), "{support:?}");
    assert!(support.len() <= 4);
}

#[test]
fn pcst_on_toy_fixture_matches_brute_force() {
    let path = fixture("toy.pcst");
    let o = graphda(&["pcst", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let objective: f64 = text.lines().next().unwrap().strip_prefix("objective ").unwrap().parse().unwrap();

    let (graph, prizes) = read_pcst_instance(&path).unwrap();
    let instance = PcstInstance::new(&graph, &prizes, 1);
    let ours = solve_pcst(&instance).unwrap();
    let best = brute_force_pcst(&instance).unwrap();
    let optimum = pcst_objective(&graph, &prizes, &best, 1.0).unwrap();
    assert_eq!(objective, pcst_objective(&graph, &prizes, &ours, 1.0).unwrap());
    assert!(objective <= 2.0 * optimum + 1e-9);
    let nodes: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().skip(1).collect();
    let edges = text.lines().filter(|l| l.starts_with("edge ")).count();
    assert_eq!(nodes.len(), ours.nodes.len());
    assert_eq!(edges, ours.edges.len());
}

#[test]
fn run_writes_csv_and_config_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.cfg");
    let out = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let o = graphda(&[
        "run", "--config", cfg.to_str().unwrap(), "--trials", "5", "--threads", "1",
        "--out", out.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(&out).unwrap();
    // config says 2 trials, 3 learners
    assert_eq!(rows.lines().count(), 1 + 2 * 3);
    assert!(rows.starts_with("method,trial,t,"));
    assert!(std::fs::read_to_string(&summary).unwrap().lines().count() == 4);

    // same seed, other thread count: identical bytes
    let again = dir.path().join("again.csv");
    let o = graphda(&[
        "--threads", "2", "run", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&again).unwrap(), rows.as_bytes());

    let reseeded = dir.path().join("reseeded.csv");
    graphda(&["run", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", reseeded.to_str().unwrap()]);
    assert_ne!(std::fs::read(&reseeded).unwrap(), rows.as_bytes());

    let o = graphda(&["report", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report.starts_with("method,t,sweep,trials,validation,pre,rec,f1"));
    assert!(report.lines().nth(1).unwrap().starts_with("graph-da,30,,2,"));
}

#[test]
fn sweep_and_tune() {
    let cfg = fixture("small.cfg");
    let o = graphda(&["sweep", "--kind", "mu", "--values", "0.5,1.5", "--config", cfg.to_str().unwrap(), "--trials", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 3);
    assert!(text.lines().any(|l| l.starts_with("adam,0,30,1.5,")));

    let o = graphda(&["tune", "--learner", "da-iht", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("da-iht s="), "{}", stdout(&o));
}

#[test]
fn gen_data_writes_splits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("small.cfg");
    let o = graphda(&["gen-data", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let graph = std::fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert!(graph.starts_with("p 36\n"));
    let train = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(train.lines().count(), 31);
    let truth = std::fs::read_to_string(dir.path().join("truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 6);
    assert_eq!(graphda(&["gen-data", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}
