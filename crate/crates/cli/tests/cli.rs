use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn vecnbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vecnbt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vecnbt(args);
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

#[test]
fn staged_commands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);
    let (graph, labels, corpus, emb, pred) = (d("g.txt"), d("y.txt"), d("s.txt"), d("e.txt"), d("p.txt"));

    ok(&["--seed", "4", "generate", "--n", "120", "--c", "12", "--graph", p(&graph), "--labels", p(&labels)]);
    let header = fs::read_to_string(&graph).unwrap();
    assert!(header.starts_with("120 "));
    assert_eq!(fs::read_to_string(&labels).unwrap().lines().count(), 120);

    ok(&["--seed", "4", "walk", "--graph", p(&graph), "--policy", "begrudging", "--r", "5", "--l", "10", "--out", p(&corpus)]);
    ok(&["--seed", "4", "embed", "--corpus", p(&corpus), "--graph", p(&graph), "--dim", "8", "--window", "5", "--out", p(&emb)]);
    assert!(fs::read_to_string(&emb).unwrap().starts_with("120 8\n"));
    ok(&["--seed", "4", "cluster", "--embeddings", p(&emb), "--k", "2", "--out", p(&pred)]);
    assert_eq!(fs::read_to_string(&pred).unwrap().lines().count(), 120);

    let json = ok(&["score", "--truth", p(&labels), "--pred", p(&pred)]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let ccr = v["ccr"].as_f64().unwrap();
    assert!((0.5..=1.0).contains(&ccr));
    assert_eq!(v["nodes"], 120);

    let csv = ok(&["score", "--truth", p(&labels), "--pred", p(&pred), "--graph", p(&graph), "--mask-isolated", "--format", "csv"]);
    assert!(csv.starts_with("ccr,nmi,nodes\n"));
}

#[test]
fn pipeline_with_config_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, labels, cfg, out) = (
        dir.path().join("g.txt"),
        dir.path().join("y.txt"),
        dir.path().join("p.toml"),
        dir.path().join("pred.txt"),
    );
    ok(&["--seed", "1", "generate", "--n", "200", "--c", "16", "--graph", p(&graph), "--labels", p(&labels)]);
    fs::write(
        &cfg,
        "arm = \"bt\"\nmask_isolated = true\n[walk]\nr = 4\n[embed]\ndim = 12\nepochs = 3\n[cluster]\nrestarts = 3\n",
    )
    .unwrap();
    let json = ok(&[
        "--seed", "2", "--sequential", "pipeline", "--graph", p(&graph), "--k", "2", "--truth", p(&labels),
        "--config", p(&cfg), "--l", "20", "--out", p(&out),
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert!(v["nmi"].as_f64().unwrap() > 0.5, "{json}");
    assert!(v["timings"]["embed"].as_f64().unwrap() >= 0.0);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 200);

    let again = ok(&[
        "--seed", "2", "--sequential", "pipeline", "--graph", p(&graph), "--k", "2", "--truth", p(&labels),
        "--config", p(&cfg), "--l", "20", "--format", "csv",
    ]);
    let fields: Vec<&str> = again.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(fields[1].parse::<f64>().unwrap(), v["nmi"].as_f64().unwrap());

    fs::write(&cfg, "bogus = 1\n").unwrap();
    let bad = vecnbt(&["pipeline", "--graph", p(&graph), "--k", "2", "--config", p(&cfg)]);
    assert!(!bad.status.success());
}

#[test]
fn sweep_is_reproducible_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(
        &cfg,
        r#"
trials = 2
[sbm]
n = [80]
c = [4.0, 10.0]
[[arms]]
name = "BT"
policy = "simple"
r = 2
l = [20]
w = 4
[[arms]]
name = "NBT"
policy = "begrudging"
r = 4
l = [5]
w = 3
[embed]
dim = 8
epochs = 2
[cluster]
restarts = 2
"#,
    )
    .unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        ok(&["--seed", "9", "sweep", "--config", p(&cfg), "--out", p(out), "--no-wall-time"]);
    }
    let bytes = fs::read(&a).unwrap();
    assert_eq!(bytes, fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert_eq!(
        text.lines().next().unwrap(),
        "arm,n,k,c,lambda,l,r,w,trial,ccr,nmi,wall_time_seconds"
    );

    let svg = dir.path().join("fig.svg");
    ok(&["plot", "--csv", p(&a), "--figure", "fig1", "--out", p(&svg)]);
    let doc = fs::read_to_string(&svg).unwrap();
    assert!(doc.starts_with("<svg") && doc.contains("stroke-dasharray"));

    let bad = dir.path().join("bad.svg");
    let out = vecnbt(&["plot", "--csv", p(&a), "--x", "sparsity", "--out", p(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sparsity"));
    assert!(!bad.exists());
}

#[test]
fn plot_rejects_empty_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    fs::write(&csv, "").unwrap();
    let svg = dir.path().join("out.svg");
    let out = vecnbt(&["plot", "--csv", p(&csv), "--figure", "fig2", "--out", p(&svg)]);
    assert!(!out.status.success());
    assert!(!svg.exists());
}

#[test]
fn spectral_report_on_petersen_graph() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("petersen.txt");
    let mut text = String::from("10 15\n");
    for i in 0..5 {
        text += &format!("{} {}\n", i, (i + 1) % 5);
        text += &format!("{} {}\n", i, i + 5);
        text += &format!("{} {}\n", 5 + i, 5 + (i + 2) % 5);
    }
    fs::write(&graph, text).unwrap();
    let json = ok(&["spectral", "--graph", p(&graph), "--require-regular"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    // Petersen spectrum: 3, 1 (x5), -2 (x4)
    assert!((v["lambda2"].as_f64().unwrap() - 1.0).abs() < 1e-8, "{json}");
    assert!((v["rho"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-8);
    assert_eq!(v["regime"], "below_threshold");
    assert_eq!(v["begrudging_doubly_stochastic"], true);
    assert_eq!(v["nbt_equals_begrudging"], true);
    assert!(v["vertex_stationarity_residual"].as_f64().unwrap() < 1e-12);

    let csv = ok(&["spectral", "--graph", p(&graph), "--format", "csv"]);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), lines.next().unwrap().split(',').count());
    assert!(header.contains(&"rho_nbt"));
}

#[test]
fn errors_exit_nonzero_with_diagnostic() {
    let out = vecnbt(&["walk", "--graph", "/nonexistent/graph.txt", "--out", "/tmp/never.txt"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("path.txt");
    fs::write(&graph, "3 2\n0 1\n1 2\n").unwrap();
    let out = vecnbt(&["spectral", "--graph", p(&graph), "--require-regular"]);
    assert!(!out.status.success());

    fs::write(&graph, "3 1\n0 7\n").unwrap();
    let out = vecnbt(&["walk", "--graph", p(&graph), "--out", p(&dir.path().join("c.txt"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains(".txt:2:"));
}
