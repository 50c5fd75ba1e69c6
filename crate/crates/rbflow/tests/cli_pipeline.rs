//! End-to-end checks of the command-line workbench: exit codes, artifact
//! layout, and byte-level determinism of the pipeline.

use std::path::{Path, PathBuf};
use std::process::Command;

use rbflow::config::RunConfig;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rbflow")
}

struct TestDir {
    root: PathBuf,
}

impl TestDir {
    fn new(tag: &str) -> TestDir {
        let root = std::env::temp_dir().join(format!(
            "rbflow-cli-{tag}-{}-{}",
            std::process::id(),
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        std::fs::create_dir_all(&root).unwrap();
        TestDir { root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

impl Drop for TestDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.root);
    }
}

/// A small, fast configuration: 8 x 3 cells, 80 recorded steps, stride 5.
fn small_config(workspace: &Path) -> RunConfig {
    let mut cfg = RunConfig::desk_default(workspace.to_path_buf());
    cfg.mesh.nx = 8;
    cfg.mesh.ny = 3;
    cfg.mesh.length = 2.0;
    cfg.time.dt = 0.01;
    cfg.time.n_steps = 80;
    cfg.time.stride = 5;
    cfg.pod.tol = 1e-3;
    if let Some(g) = cfg.greedy.as_mut() {
        g.n_max_triplets = 2;
        g.alpha_train = 0.1;
    }
    cfg
}

fn write_config(dir: &TestDir, cfg: &RunConfig) -> PathBuf {
    let path = dir.path("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(config: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn missing_and_malformed_configs_exit_2() {
    let dir = TestDir::new("cfg");
    let (code, _, err) = run(&dir.path("absent.json"), &["run-hifi"]);
    assert_eq!(code, 2, "stderr: {err}");
    assert!(err.contains("cannot read"));

    let cfg = small_config(&dir.path("ws"));
    let mut v = serde_json::to_value(&cfg).unwrap();
    v["mesh"]["extra_key"] = serde_json::json!(1);
    let bad = dir.path("bad.json");
    std::fs::write(&bad, serde_json::to_vec(&v).unwrap()).unwrap();
    let (code, _, err) = run(&bad, &["run-hifi"]);
    assert_eq!(code, 2, "stderr: {err}");
}

#[test]
fn full_pipeline_artifacts_and_determinism() {
    let dir = TestDir::new("pipe");
    let ws = dir.path("ws");
    let cfg = small_config(&ws);
    let config = write_config(&dir, &cfg);

    // high-fidelity run
    let (code, out, err) = run(&config, &["run-hifi"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("stored 16 snapshots"));
    assert!(ws.join("snapshots/velocity.snap").exists());
    assert!(ws.join("mesh/channel.txt").exists());
    let outputs_fem = std::fs::read_to_string(ws.join("results/outputs_fem.csv")).unwrap();
    assert!(outputs_fem.starts_with("t,flow_rate,wss_area1,wss_area2\n"));
    assert_eq!(outputs_fem.lines().count(), 17);

    // reduced model; rebuilding must be byte-identical
    let (code, _, err) = run(&config, &["build-rom"]);
    assert_eq!(code, 0, "stderr: {err}");
    let model_bytes = std::fs::read(ws.join("rom/model.roma")).unwrap();
    let (code, _, _) = run(&config, &["build-rom"]);
    assert_eq!(code, 0);
    assert_eq!(model_bytes, std::fs::read(ws.join("rom/model.roma")).unwrap());

    // online run twice: identical error tables
    let (code, _, err) = run(&config, &["run-rom", "--alpha", "0"]);
    assert_eq!(code, 0, "stderr: {err}");
    let errors1 = std::fs::read(ws.join("results/errors.csv")).unwrap();
    assert!(ws.join("results/norms.csv").exists());
    assert!(ws.join("results/outputs_rom.csv").exists());
    let (code, _, _) = run(&config, &["run-rom", "--alpha", "0"]);
    assert_eq!(code, 0);
    assert_eq!(errors1, std::fs::read(ws.join("results/errors.csv")).unwrap());
    let header = String::from_utf8(errors1).unwrap();
    assert!(header.starts_with("t,eps_u,eps_p,dual_norm,err_X\n"));

    // aggregates recomputed from the CSVs match the summary
    let (code, out, err) = run(&config, &["compare"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("match"));
    assert!(!out.contains("MISMATCH"));
    assert!(ws.join("results/compare.json").exists());

    // greedy enrichment: +3 basis functions per row of the trace
    let (code, out, err) = run(&config, &["enrich"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("-> "), "stdout: {out}");
    let trace = std::fs::read_to_string(ws.join("results/greedy_trace.csv")).unwrap();
    assert!(trace
        .starts_with("iteration,selected_n_t,selected_n_s,max_dual_norm,basis_size,skipped_flag"));
    assert_eq!(trace.lines().count(), 3, "trace: {trace}");
    assert!(ws.join("rom/model_enriched.roma").exists());

    // outputs command refreshes both tables
    let (code, out, err) = run(&config, &["outputs"]);
    assert_eq!(code, 0, "stderr: {err}");
    assert!(out.contains("outputs_fem.csv"));

    // a second workspace reproduces the artifacts byte for byte
    let dir2 = TestDir::new("pipe2");
    let ws2 = dir2.path("ws");
    let cfg2 = small_config(&ws2);
    let config2 = write_config(&dir2, &cfg2);
    for cmd in [&["run-hifi"][..], &["build-rom"], &["run-rom", "--alpha", "0"]] {
        let (code, _, err) = run(&config2, cmd);
        assert_eq!(code, 0, "stderr: {err}");
    }
    for rel in [
        "snapshots/velocity.snap",
        "snapshots/pressure.snap",
        "rom/model.roma",
        "results/errors.csv",
    ] {
        assert_eq!(
            std::fs::read(ws.join(rel)).unwrap(),
            std::fs::read(ws2.join(rel)).unwrap(),
            "{rel} differs between workspaces"
        );
    }
}

#[test]
fn data_errors_exit_3() {
    let dir = TestDir::new("data");
    let ws = dir.path("ws");
    let cfg = small_config(&ws);
    let config = write_config(&dir, &cfg);

    // no snapshots yet
    let (code, _, err) = run(&config, &["build-rom"]);
    assert_eq!(code, 3, "stderr: {err}");

    // empty snapshot set
    std::fs::create_dir_all(ws.join("snapshots")).unwrap();
    let empty = faer::Mat::<f64>::zeros(10, 0);
    rbflow::snap::write_matrix(&ws.join("snapshots/velocity.snap"), &empty).unwrap();
    rbflow::snap::write_matrix(&ws.join("snapshots/pressure.snap"), &empty).unwrap();
    let side = serde_json::json!({
        "times": [], "stride": 5,
        "params": rbflow::fem::PhysicalParams::blood_like(0.01),
        "mesh_hash": "0", "dirichlet_scale": [], "alpha": 0.0,
        "t0": 0.8, "initial_scale": 0.0,
    });
    std::fs::write(
        ws.join("snapshots/meta.json"),
        serde_json::to_vec(&side).unwrap(),
    )
    .unwrap();
    let (code, _, err) = run(&config, &["build-rom"]);
    assert_eq!(code, 3, "stderr: {err}");

    // a held workspace lock is a data error
    let dir2 = TestDir::new("lock");
    let ws2 = dir2.path("ws");
    let cfg2 = small_config(&ws2);
    let config2 = write_config(&dir2, &cfg2);
    std::fs::create_dir_all(&ws2).unwrap();
    std::fs::write(ws2.join(".lock"), b"held\n").unwrap();
    let (code, _, err) = run(&config2, &["run-hifi"]);
    assert_eq!(code, 3, "stderr: {err}");
    assert!(err.contains("locked"));
}

#[test]
fn run_rom_rejects_inadmissible_alpha() {
    let dir = TestDir::new("alpha");
    let ws = dir.path("ws");
    let cfg = small_config(&ws);
    let config = write_config(&dir, &cfg);
    let (code, _, err) = run(&config, &["run-rom", "--alpha", "0.5"]);
    assert_eq!(code, 2, "stderr: {err}");
}
