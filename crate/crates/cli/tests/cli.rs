use std::path::Path;
use std::process::{Command, Output};

fn cmbec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmbec")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL: &str = r#"
n_atoms = 20
[lattice]
dx = 0.5
m_cells = 25
[sweep]
g1d_n = [1.0]
kappa_tilde = [1.0]
[sim]
dt = 1e-3
t_final = 0.2
n_trajectories = 16
"#;

#[test]
fn schema_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let cfg = write_config(dir.path(), "n_atom = 100\n");
    let r = cmbec(&["gpe", "--config", &cfg, "--out-dir", out]);
    assert_eq!(code(&r), 2);
    assert!(String::from_utf8_lossy(&r.stderr).contains("n_atom"));

    let cfg = write_config(dir.path(), "[lattice]\nm_cells = 40\n");
    assert_eq!(code(&cmbec(&["gpe", "--config", &cfg, "--out-dir", out])), 2);

    let cfg = write_config(dir.path(), "mode = \"meanfield\"\n");
    assert_eq!(code(&cmbec(&["gpe", "--config", &cfg, "--out-dir", out])), 2);

    assert_eq!(code(&cmbec(&["positivep", "--dt", "0.5", "--out-dir", out])), 2);
    assert_eq!(code(&cmbec(&["gpe", "--config", "/nonexistent.toml"])), 2);
    assert!(!Path::new(out).exists());
}

#[test]
fn gpe_writes_profiles_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let r = cmbec(&["gpe", "--g1d-n", "0,5", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("ground_state_g0.csv").exists());
    assert!(out.join("ground_state_g5.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["mode"], "gpe");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["runs"].as_array().unwrap().len(), 2);
    assert_eq!(m["scenario_hash"].as_str().unwrap().len(), 16);
    assert!(m["wall_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn meanfield_table_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let r = cmbec(&["meanfield", "--g1d-n", "1,4", "--out-dir", out.to_str().unwrap()]);
        assert_eq!(code(&r), 0);
    }
    let ta = std::fs::read(a.join("eta_meanfield.csv")).unwrap();
    assert_eq!(ta, std::fs::read(b.join("eta_meanfield.csv")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(manifest(&a)["scenario_hash"], manifest(&b)["scenario_hash"]);
}

#[test]
fn positivep_csv_is_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let r = cmbec(&[
            "positivep",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--threads",
            threads,
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
        out
    };
    let a = run("a", "11", "1");
    let b = run("b", "11", "2");
    let c = run("c", "12", "1");
    for file in ["density_g1_k1.csv", "g2_g1_k1.csv", "eta_positivep.csv"] {
        let fa = std::fs::read(a.join(file)).unwrap();
        assert_eq!(fa, std::fs::read(b.join(file)).unwrap(), "{file}");
        assert_ne!(fa, std::fs::read(c.join(file)).unwrap(), "{file}");
    }
    let m = manifest(&a);
    let runs = m["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    assert_ne!(runs[0]["seed"], runs[1]["seed"]);
    assert!(runs.iter().all(|r| r["config_hash"].as_str().unwrap().len() == 16));
}

#[test]
fn checkpoint_extension_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let ckpt = dir.path().join("ckpt");
    let go = |name: &str, traj: &str, with_ckpt: bool| {
        let out = dir.path().join(name);
        let mut args = vec!["positivep", "--config", &cfg, "--trajectories", traj, "--out-dir", out.to_str().unwrap()];
        if with_ckpt {
            args.extend(["--checkpoint-dir", ckpt.to_str().unwrap()]);
        }
        assert_eq!(code(&cmbec(&args)), 0);
        std::fs::read(out.join("density_g1_k1.csv")).unwrap()
    };
    go("first", "64", true);
    let resumed = go("resumed", "128", true);
    let direct = go("direct", "128", false);
    assert_eq!(resumed, direct);
    assert!(ckpt.join("g1_k1.ckpt").exists());
}

#[test]
fn failing_cell_does_not_stop_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    // The strong cloud overflows the fixed 25-cell lattice.
    let r = cmbec(&["positivep", "--config", &cfg, "--g1d-n", "1,2000", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&r), 1);
    assert!(out.join("density_g1_k1.csv").exists());
    let m = manifest(&out);
    assert_eq!(m["status"], "failed");
    let runs = m["runs"].as_array().unwrap();
    assert!(runs.iter().any(|r| r["g1d_n"] == 2000.0 && r["status"] == "failed"));
    assert!(runs.iter().any(|r| r["g1d_n"] == 1.0 && r["status"] == "ok"));
}

#[test]
fn divergence_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SMALL.replace("n_trajectories = 16", "n_trajectories = 16\ndivergence_threshold = 0.5"),
    );
    let out = dir.path().join("out");
    let r = cmbec(&["positivep", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&r), 3);
    let m = manifest(&out);
    assert_eq!(m["status"], "diverged");
    let d = &m["runs"][0]["divergence"];
    assert!(d["magnitude"].as_f64().unwrap() > 0.5);
    assert!(d["time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn oracle_mismatch_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let fixture = dir.path().join("fixture.csv");
    let base = ["oracle-check", "--trajectories", "256", "--out-dir", out.to_str().unwrap()];

    let mut args = base.to_vec();
    args.extend(["--write-fixture", fixture.to_str().unwrap()]);
    assert_eq!(code(&cmbec(&args)), 0);
    assert!(out.join("oracle_check.csv").exists());

    let mut args = base.to_vec();
    args.extend(["--fixture", fixture.to_str().unwrap()]);
    assert_eq!(code(&cmbec(&args)), 0);

    let text = std::fs::read_to_string(&fixture).unwrap();
    let tampered: String = text
        .lines()
        .map(|l| if l.contains(",n,1,") { format!("{},9.0", &l[..l.rfind(',').unwrap()]) } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&fixture, tampered + "\n").unwrap();
    assert_eq!(code(&cmbec(&args)), 4);
    assert_eq!(manifest(&out)["status"], "oracle-mismatch");
}
