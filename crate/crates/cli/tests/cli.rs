use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vqdyn_core::estimator::GridTable;

fn vqdyn(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vqdyn"))
        .args(args)
        .env("VQDYN_OUTPUT_ROOT", root)
        .current_dir(root)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn header(path: impl AsRef<Path>) -> String {
    read(path).lines().next().unwrap().to_string()
}

fn json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(path)).unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).expect("stderr holds a JSON error record")
}

const TWO_SPIN: &str = "experiment = \"two_spin_spectrum\"\n";
const SHORT_SHOTS: &str = r#"
experiment = "custom"
ansatz = "tfim2_even"
total_time = 1.0
[estimator]
mode = "hadamard_shots"
shots = 2048
seed = 5
"#;

#[test]
fn two_spin_spectrum_writes_four_trajectories() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "spec.toml", TWO_SPIN);
    let out = vqdyn(&["run", cfg.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("spec");
    let mut names: Vec<String> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        ["spectrum.csv", "summary.json", "trajectory_0.csv", "trajectory_1.csv", "trajectory_2.csv", "trajectory_3.csv"]
    );
    assert_eq!(
        header(dir.join("trajectory_0.csv")),
        "t,theta_1,theta_2,energy,fidelity,energy_err,fidelity_err,cond_M,flags"
    );
    assert_eq!(header(dir.join("spectrum.csv")), "t,E_exact0,E_exact1,E_exact2,E_exact3");
    assert_eq!(read(dir.join("trajectory_0.csv")).lines().count(), 1002);
    let s = json(dir.join("summary.json"));
    assert_eq!(s["experiment"], "two_spin_spectrum");
    for t in s["trajectories"].as_array().unwrap() {
        assert!(t["final_fidelity"].as_f64().unwrap() >= 0.999);
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "shots.toml", SHORT_SHOTS);
    let c = cfg.to_str().unwrap();
    assert!(vqdyn(&["run", c, "--out", "a"], tmp.path()).status.success());
    assert!(vqdyn(&["run", c, "--out", "b"], tmp.path()).status.success());
    assert!(vqdyn(&["run", c, "--out", "c", "--seed", "6"], tmp.path()).status.success());
    let file = "trajectory_0.csv";
    let a = read(tmp.path().join("a").join(file));
    assert_eq!(a, read(tmp.path().join("b").join(file)));
    assert_ne!(a, read(tmp.path().join("c").join(file)));
    assert_eq!(read(tmp.path().join("a/summary.json")), read(tmp.path().join("b/summary.json")));
    // the thread count does not change results
    assert!(vqdyn(&["--threads", "1", "run", c, "--out", "d"], tmp.path()).status.success());
    assert_eq!(a, read(tmp.path().join("d").join(file)));
}

#[test]
fn three_spin_ground_summary_and_report() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "three.toml",
        "experiment = \"three_spin_ground\"\noutput_dir = \"out/three\"\n[bootstrap]\nn_samples = 20\n",
    );
    assert!(vqdyn(&["run", cfg.to_str().unwrap()], tmp.path()).status.success());
    let dir = tmp.path().join("out/three");
    let s = json(dir.join("summary.json"));
    assert!(s["trajectories"][0]["final_fidelity"].as_f64().unwrap() >= 0.98);
    assert_eq!(s["config"]["bootstrap"]["n_samples"], 20);

    let out = vqdyn(&["report", dir.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(header(dir.join("fig4a.csv")), "t,theta_1,theta_2");
    assert_eq!(header(dir.join("fig4b.csv")), "t,energy,E_exact0");
    assert_eq!(header(dir.join("fig4c.csv")), "t,fidelity,err");
    for line in read(dir.join("fig4c.csv")).lines().skip(1) {
        let err: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!(err >= 0.0);
    }
    // reports also refuse to overwrite
    assert_eq!(vqdyn(&["report", dir.to_str().unwrap()], tmp.path()).status.code(), Some(2));
    assert!(vqdyn(&["--force", "report", dir.to_str().unwrap()], tmp.path()).status.success());
}

#[test]
fn two_spin_report_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "two.toml", "experiment = \"two_spin_spectrum\"\ntotal_time = 1.0\n");
    assert!(vqdyn(&["run", cfg.to_str().unwrap()], tmp.path()).status.success());
    let dir = tmp.path().join("two");
    assert!(vqdyn(&["report", dir.to_str().unwrap()], tmp.path()).status.success());
    assert_eq!(header(dir.join("fig3b.csv")), "t,E_traj0,E_traj1,E_traj2,E_traj3,E_exact0,E_exact1,E_exact2,E_exact3");
    assert_eq!(header(dir.join("fig3c.csv")), "t,F_traj0,F_traj1,F_traj2,F_traj3");
    assert!(header(dir.join("fig3a.csv")).starts_with("t,theta_1_traj0,theta_2_traj0,"));
}

#[test]
fn grid_files_are_deterministic_and_complete() {
    let tmp = TempDir::new().unwrap();
    let text = "experiment = \"custom\"\nansatz = \"tfim2_even\"\n[estimator]\nmode = \"grid_interp\"\ngrid_resolution = 20\n";
    let cfg = write_config(tmp.path(), "grid.toml", text);
    let c = cfg.to_str().unwrap();
    assert!(vqdyn(&["grid", c, "--out", "g1"], tmp.path()).status.success());
    assert!(vqdyn(&["grid", c, "--out", "g2"], tmp.path()).status.success());
    let a = read(tmp.path().join("g1/grid.txt"));
    assert_eq!(a, read(tmp.path().join("g2/grid.txt")));
    let table = GridTable::parse(&a).unwrap();
    for key in [(1, 1), (1, 2), (2, 1), (2, 2), (1, 0), (2, 0)] {
        assert_eq!(table.rows.keys().filter(|(k, _)| *k == key).count(), 400, "{key:?}");
    }

    // grid-driven run against the exact run
    assert!(vqdyn(&["run", c, "--out", "run_grid"], tmp.path()).status.success());
    let exact = write_config(tmp.path(), "exact.toml", "experiment = \"custom\"\nansatz = \"tfim2_even\"\n");
    assert!(vqdyn(&["run", exact.to_str().unwrap(), "--out", "run_exact"], tmp.path()).status.success());
    let f = |d: &str| json(tmp.path().join(d).join("summary.json"))["trajectories"][0]["final_fidelity"].as_f64().unwrap();
    assert!((f("run_grid") - f("run_exact")).abs() <= 0.02);
}

#[test]
fn grid_rejects_three_parameter_counts() {
    let tmp = TempDir::new().unwrap();
    // the three-spin ansatz has two parameters and is accepted
    let cfg = write_config(tmp.path(), "g.toml", "experiment = \"three_spin_ground\"\n[grid]\nfile = \"g3.txt\"\ntime = 2.5\n");
    assert!(vqdyn(&["grid", cfg.to_str().unwrap()], tmp.path()).status.success());
    let table = GridTable::parse(&read(tmp.path().join("g/g3.txt"))).unwrap();
    assert_eq!(table.header.ansatz, "tfim3_qaoa");
    assert_eq!(table.header.t, 2.5);
}

#[test]
fn invalid_config_leaves_no_outputs() {
    let tmp = TempDir::new().unwrap();
    for (name, text) in [
        ("typo.toml", "experiment = \"two_spin_spectrum\"\nd_t = 0.01\n"),
        ("step.toml", "experiment = \"two_spin_spectrum\"\ndt = 0.3\n"),
        ("shots.toml", "experiment = \"three_spin_ground\"\n[estimator]\nmode = \"hadamard_shots\"\nshots = 0\n"),
        ("syntax.toml", "experiment = \n"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let out = vqdyn(&["run", cfg.to_str().unwrap()], tmp.path());
        assert_eq!(out.status.code(), Some(2), "{name}");
        let rec = error_record(&out);
        assert_eq!(rec["status"], "error");
        assert_eq!(rec["kind"], "config");
        assert_eq!(rec["exit_code"], 2);
        assert!(!tmp.path().join(name.trim_end_matches(".toml")).exists(), "{name}");
    }
    let missing = vqdyn(&["run", "does_not_exist.toml"], tmp.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn outputs_are_overwritten_only_with_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "shots.toml", SHORT_SHOTS);
    let c = cfg.to_str().unwrap();
    assert!(vqdyn(&["run", c], tmp.path()).status.success());
    let path = tmp.path().join("shots/trajectory_0.csv");
    std::fs::write(&path, "marker").unwrap();
    let again = vqdyn(&["run", c], tmp.path());
    assert_eq!(again.status.code(), Some(2));
    assert_eq!(error_record(&again)["kind"], "exists");
    assert_eq!(read(&path), "marker");
    assert!(vqdyn(&["run", c, "--force"], tmp.path()).status.success());
    assert_ne!(read(&path), "marker");
}

#[test]
fn report_rejects_corrupt_runs() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = vqdyn(&["report", empty.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["kind"], "artifact");

    let cfg = write_config(tmp.path(), "shots.toml", SHORT_SHOTS);
    assert!(vqdyn(&["run", cfg.to_str().unwrap()], tmp.path()).status.success());
    let dir = tmp.path().join("shots");
    std::fs::write(dir.join("trajectory_0.csv"), "t,theta_1\n0,zero\n").unwrap();
    assert_eq!(vqdyn(&["report", dir.to_str().unwrap()], tmp.path()).status.code(), Some(2));
    assert!(!dir.join("fidelity.csv").exists());
}
