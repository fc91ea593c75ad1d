//! End-to-end checks of the scenario runner: determinism across worker
//! counts, negative/positive controls, strict config validation, and the
//! binary's exit-code contract.

use std::fs;
use std::path::Path;
use std::process::Command;

use minsurf_cli::config::{default_spec, ScenarioSpec, StartSpec, SurfaceSpec};
use minsurf_cli::scenarios::run_scenario;
use minsurf_cli::CliError;

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

fn small_spec(name: &str, n: u64, out: &Path) -> ScenarioSpec {
    let mut spec = default_spec(name).unwrap();
    spec.n_traj = n;
    spec.seed = 11;
    spec.control.t_max = spec.control.t_max.min(2.0);
    spec.outputs = out.display().to_string();
    spec
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["mirror-coupling-plane", "sto-comp", "halfspace"] {
        let d1 = tmp.path().join(format!("{name}-w1"));
        let d4 = tmp.path().join(format!("{name}-w4"));
        run_scenario(&small_spec(name, 12, &d1), 1).unwrap();
        run_scenario(&small_spec(name, 12, &d4), 4).unwrap();
        let a = read_dir_bytes(&d1);
        let b = read_dir_bytes(&d4);
        assert_eq!(a.len(), b.len(), "{name}: file counts differ");
        for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
            assert_eq!(na, nb, "{name}: file names differ");
            assert_eq!(ba, bb, "{name}: {na} differs between worker counts");
        }
        // Rerun in place reproduces byte-for-byte.
        run_scenario(&small_spec(name, 12, &d1), 2).unwrap();
        assert_eq!(read_dir_bytes(&d1), a, "{name}: rerun differs");
    }
}

fn plane_at(offset: [f64; 3]) -> SurfaceSpec {
    SurfaceSpec {
        kind: "plane".into(),
        radius: Some(50.0),
        r_in: None,
        r_out: None,
        boundary: false,
        wg_const: None,
        offset,
    }
}

#[test]
fn halfspace_stacked_planes_negative_control() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_spec("halfspace").unwrap();
    spec.surfaces = vec![plane_at([0.0; 3]), plane_at([0.0, 0.0, 1.0])];
    spec.starts = vec![StartSpec { u: 0.0, v: 0.0 }, StartSpec { u: 0.0, v: 0.0 }];
    spec.n_traj = 20;
    spec.control.t_max = 2.0;
    spec.outputs = tmp.path().join("neg").display().to_string();
    let report = run_scenario(&spec, 1).unwrap();
    assert!(report.pass, "{report:?}");
    let names: Vec<_> = report.statistics.iter().map(|s| s.name.as_str()).collect();
    assert!(names.contains(&"inf-r-constant"));
    assert!(names.contains(&"never-couples"));
}

#[test]
fn halfspace_same_plane_couples() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_spec("halfspace").unwrap();
    spec.surfaces = vec![plane_at([0.0; 3])];
    spec.starts = vec![StartSpec { u: 0.2, v: 0.0 }, StartSpec { u: -0.2, v: 0.0 }];
    spec.n_traj = 30;
    spec.control.t_max = 2.0;
    spec.outputs = tmp.path().join("pos").display().to_string();
    let report = run_scenario(&spec, 1).unwrap();
    let couples = report
        .statistics
        .iter()
        .find(|s| s.name == "couples")
        .expect("mirror mode");
    assert!(couples.pass && couples.estimate > 0.5, "{couples:?}");
}

#[test]
fn max_principle_requires_boundary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_spec("max-principle-boundary").unwrap();
    for s in &mut spec.surfaces {
        s.boundary = false;
    }
    spec.outputs = tmp.path().display().to_string();
    match run_scenario(&spec, 1) {
        Err(CliError::MissingBoundary) => {}
        other => panic!("expected MissingBoundary, got {other:?}"),
    }
}

#[test]
fn max_principle_parallel_disks_equality() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_spec("max-principle-boundary").unwrap();
    let mut lower = plane_at([0.0; 3]);
    lower.radius = Some(2.0);
    lower.boundary = true;
    let mut upper = plane_at([0.0, 0.0, 1.0]);
    upper.radius = Some(2.0);
    upper.boundary = true;
    spec.surfaces = vec![lower, upper];
    spec.starts = vec![StartSpec { u: 0.0, v: 0.0 }, StartSpec { u: 0.0, v: 0.0 }];
    spec.n_traj = 10;
    spec.control.t_max = 20.0;
    spec.outputs = tmp.path().display().to_string();
    let report = run_scenario(&spec, 1).unwrap();
    assert!(report.pass, "{report:?}");
    let stat = report
        .statistics
        .iter()
        .find(|s| s.name == "min-stopped-r")
        .unwrap();
    // Synchronous pair: terminal r equals r₀ = 1 for every trajectory.
    assert!((stat.estimate - 1.0).abs() < 1e-6, "{stat:?}");
}

#[test]
fn sto_comp_single_trajectory_degenerate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut spec = default_spec("sto-comp").unwrap();
    spec.n_traj = 1;
    spec.outputs = tmp.path().display().to_string();
    let report = run_scenario(&spec, 1).unwrap();
    let stat = &report.statistics[0];
    assert!(stat.stderr.is_none());
    assert!(!stat.pass);
    assert!(!report.pass);
}

#[test]
fn mirror_r_couple_sensitivity() {
    // Halving the coupling radius moves the estimate by less than 0.005:
    // the bridge-corrected detector is insensitive to the band width.
    let tmp = tempfile::tempdir().unwrap();
    let run = |rc: f64, tag: &str| {
        let mut spec = default_spec("mirror-coupling-plane").unwrap();
        spec.n_traj = 4000;
        spec.seed = 21;
        spec.control.r_couple = rc;
        spec.outputs = tmp.path().join(tag).display().to_string();
        let report = run_scenario(&spec, 1).unwrap();
        report.statistics[0].estimate
    };
    let coarse = run(1e-3, "a");
    let fine = run(5e-4, "b");
    assert!(
        (coarse - fine).abs() < 0.005,
        "sensitivity {coarse} vs {fine}"
    );
}

#[test]
fn binary_exit_codes_and_print_config() {
    let bin = env!("CARGO_BIN_EXE_minsurf");
    let tmp = tempfile::tempdir().unwrap();
    let ok = Command::new(bin)
        .args([
            "sto-comp",
            "--traj",
            "20",
            "--seed",
            "3",
            "--out",
            tmp.path().join("ok").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS"));

    let printed = Command::new(bin)
        .args(["print-config", "halfspace"])
        .output()
        .unwrap();
    assert!(printed.status.success());
    let text = String::from_utf8(printed.stdout).unwrap();
    ScenarioSpec::from_toml(&text).unwrap();

    // Unknown keys in a config are a hard error.
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "name = \"sto-comp\"\nn_traj = 1\nbogus = 1\n").unwrap();
    let bad = Command::new(bin)
        .args(["sto-comp", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}
