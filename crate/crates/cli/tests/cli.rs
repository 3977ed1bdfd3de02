use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use phd_core::injectivity::phi_alpha;
use phd_core::kernel::{PolyDiskMap, PolyDiskMapFile};
use phd_core::linalg::C64;
use serde_json::{json, Value};

fn phd(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phd"));
    cmd.current_dir(dir).args(args).env_remove("PHD_THREADS");
    if let Some(t) = threads {
        cmd.env("PHD_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn disk_json(f: &PolyDiskMap) -> Value {
    serde_json::to_value(PolyDiskMapFile::from(f)).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(phd(dir.path(), &["--help"], None).status.code(), Some(0));
    assert_eq!(phd(dir.path(), &["solve"], None).status.code(), Some(1));
    assert_eq!(phd(dir.path(), &["frobnicate"], None).status.code(), Some(1));
    let out = phd(dir.path(), &["solve", "--structure", "missing.json", "--h", "h.json", "--out", "f.json"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn solve_with_standard_structure_returns_h() {
    let dir = tempfile::tempdir().unwrap();
    let h = PolyDiskMap::from_terms(
        2,
        1.0,
        16,
        &[(0, 0, vec![C64::new(0.1, 0.2), C64::new(0.0, 0.0)]), (1, 0, vec![C64::new(1.0, 0.0), C64::new(0.3, -0.1)])],
    )
    .unwrap();
    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 2}));
    write(dir.path(), "h.json", &disk_json(&h));
    let out = phd(dir.path(), &["solve", "--structure", "S.json", "--h", "h.json", "--out", "f.json"], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("converged residual="), "{stdout}");
    let f: PolyDiskMapFile = serde_json::from_slice(&read(dir.path(), "f.json")).unwrap();
    assert_eq!(PolyDiskMap::try_from(f).unwrap(), h);
    let report: Value = serde_json::from_slice(&read(dir.path(), "f.report.json")).unwrap();
    assert_eq!(report["status"], "converged");
    assert_eq!(report["result"]["iterations"], 1);
    assert!(report["meta"]["config_sha256"].as_str().unwrap().len() == 64);
}

#[test]
fn schema_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 1, "strength": 0.1}));
    write(dir.path(), "h.json", &disk_json(&PolyDiskMap::zeros(1, 1.0, 4)));
    let out = phd(dir.path(), &["solve", "--structure", "S.json", "--h", "h.json", "--out", "f.json"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("strength"), "{}", stderr(&out));
    assert!(!dir.path().join("f.json").exists());

    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 1}));
    write(dir.path(), "D.json", &json!({"kind": "ball", "center": [[0.0, 0.0]]}));
    let out = phd(
        dir.path(),
        &["pseudonorm", "--domain", "D.json", "--structure", "S.json", "--point", "[[0,0]]", "--dir", "[[1,0]]", "--out", "e.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("radius"), "{}", stderr(&out));

    write(dir.path(), "cfg.json", &json!({"solver": {"tolerance": 1e-8}}));
    let out = phd(
        dir.path(),
        &["solve", "--structure", "S.json", "--h", "h.json", "--out", "f.json", "--config", "cfg.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("tolerance"));
}

#[test]
fn numerical_failures_exit_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 1}));
    write(dir.path(), "D.json", &json!({"kind": "ball", "center": [[0.0, 0.0]], "radius": 1.0}));
    let out = phd(
        dir.path(),
        &["pseudonorm", "--domain", "D.json", "--structure", "S.json", "--point", "[[2,0]]", "--dir", "[[1,0]]", "--out", "e.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&read(dir.path(), "e.json")).unwrap();
    assert_eq!(report["status"], "failed");
    assert!(report["error"]["kind"]["OutsideDomain"]["margin"].as_f64().unwrap() < 0.0);
}

#[test]
fn perturbation_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = phd(
        dir.path(),
        &["perturb-injective", "--disk", "f.json", "--structure", "S.json", "--delta", "0.05", "--epsilon", "0", "--out", "g.json"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--seed"));
}

#[test]
fn empty_jet_list_gives_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 2}));
    write(dir.path(), "D.json", &json!({"kind": "ball", "center": [[0.0, 0.0], [0.0, 0.0]], "radius": 1.0}));
    write(dir.path(), "jets.json", &json!([]));
    let out = phd(
        dir.path(),
        &["compare", "--domain", "D.json", "--structure", "S.json", "--jets", "jets.json", "--out", "t.csv"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(read(dir.path(), "t.csv"), b"jet_id,F_hat,S_hat,gap,r_star_F,r_star_S,n\n");
}

#[test]
fn compare_on_a_ball_in_c3_has_small_gaps() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "S.json", &json!({"kind": "standard", "n": 3}));
    write(dir.path(), "D.json", &json!({"kind": "ball", "center": [[0, 0], [0, 0], [0, 0]], "radius": 1.0}));
    write(
        dir.path(),
        "jets.json",
        &json!([
            {"a": [[0, 0], [0, 0], [0, 0]], "v": [[0.5, 0], [0, 0], [0, 0]]},
            {"a": [[0.2, 0.1], [0, 0], [-0.1, 0]], "v": [[0.3, 0], [0.2, 0.1], [0, 0.4]]}
        ]),
    );
    let out = phd(
        dir.path(),
        &["compare", "--domain", "D.json", "--structure", "S.json", "--jets", "jets.json", "--out", "t.csv"],
        None,
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = String::from_utf8(read(dir.path(), "t.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 7);
        let gap: f64 = cols[3].parse().unwrap();
        assert!((0.0..=0.02).contains(&gap), "{row}");
        assert_eq!(cols[6], "3");
    }
}

/// Run `args` twice in fresh directories (once with a single worker) and
/// compare every file written.
fn assert_reproducible(setup: &dyn Fn(&Path), args: &[&str], outputs: &[&str]) {
    let runs: Vec<Vec<Vec<u8>>> = [None, Some("1")]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            setup(dir.path());
            let out = phd(dir.path(), args, threads);
            assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
            outputs.iter().map(|name| read(dir.path(), name)).collect()
        })
        .collect();
    for (name, (a, b)) in outputs.iter().zip(runs[0].iter().zip(&runs[1])) {
        assert!(a == b, "{name} differs between runs of {args:?}");
    }
}

fn phi2_files(dir: &Path) {
    let f = phi_alpha(C64::new(2.0, 0.0)).unwrap();
    write(dir, "phi2.json", &disk_json(&f));
    write(dir, "phi2_c3.json", &disk_json(&f.embed(3)));
    write(dir, "S2.json", &json!({"kind": "standard", "n": 2}));
    write(dir, "S3.json", &json!({"kind": "standard", "n": 3}));
    write(dir, "D.json", &json!({"kind": "ball", "center": [[0, 0], [0, 0]], "radius": 1.0}));
    write(dir, "jets.json", &json!([{"a": [[0.1, 0], [0, 0]], "v": [[0.4, 0], [0, 0.2]]}]));
    write(
        dir,
        "Q.json",
        &json!({"kind": "q_field", "n": 2, "box_radius": 2.0, "coeffs": [
            {"monomial": [0, 0, 0, 0], "matrix": [[0, 0, 0.05, 0], [0, 0, 0, -0.05], [0, 0, 0, 0], [0, 0, 0, 0]]},
            {"monomial": [1, 0, 0, 0], "matrix": [[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0.03, 0], [0, 0, 0, -0.03]]}
        ]}),
    );
    let flat = PolyDiskMap::linear(&[C64::default(); 2], &[C64::new(1.0, 0.0), C64::default()], 1.0, 1);
    write(dir, "flat.json", &disk_json(&flat));
    write(dir, "jet.json", &json!({"a": [[0.01, 0], [0, 0.02]], "v": [[1.0, 0.01], [0.02, 0]]}));
}

#[test]
fn every_command_is_reproducible() {
    let cases: &[(&[&str], &[&str])] = &[
        (&["solve", "--structure", "Q.json", "--h", "flat.json", "--out", "f.json"], &["f.json", "f.report.json"]),
        (
            &["deform", "--structure", "Q.json", "--disk", "flat.json", "--target-jet", "jet.json", "--epsilon", "0.1", "--out", "g.json"],
            &["g.json", "g.report.json"],
        ),
        (&["self-intersect", "--disk", "phi2.json", "--out", "x.json"], &["x.json"]),
        (
            &[
                "perturb-injective", "--disk", "phi2_c3.json", "--structure", "S3.json", "--delta", "0.05", "--epsilon",
                "0.1", "--seed", "7", "--out", "inj.json",
            ],
            &["inj.json", "inj.report.json"],
        ),
        (
            &["pseudonorm", "--domain", "D.json", "--structure", "S2.json", "--point", "[[0,0],[0,0]]", "--dir", "[[0.5,0],[0,0]]", "--injective", "--out", "e.json"],
            &["e.json"],
        ),
        (
            &["distance", "--domain", "D.json", "--structure", "S2.json", "--from", "[[0,0],[0,0]]", "--to", "[[0.5,0],[0,0]]", "--samples", "4", "--out", "d.json"],
            &["d.json"],
        ),
        (
            &["compare", "--domain", "D.json", "--structure", "Q.json", "--jets", "jets.json", "--seed", "3", "--out", "t.csv"],
            &["t.csv", "t.report.json"],
        ),
        (
            &["nijenhuis", "--structure", "Q.json", "--point", "[[0.3,-0.2],[0.5,0.1]]", "--x", "[1,0,0,0]", "--y", "[0,0,1,0]", "--out", "n.json"],
            &["n.json"],
        ),
        (&["report", "--disk", "phi2.json", "--out", "grid.csv", "--radial", "4", "--angular", "8"], &["grid.csv"]),
    ];
    for (args, outputs) in cases {
        assert_reproducible(&phi2_files, args, outputs);
    }
}

#[test]
fn self_intersection_report_finds_the_double_point() {
    let dir = tempfile::tempdir().unwrap();
    phi2_files(dir.path());
    let out = phd(dir.path(), &["self-intersect", "--disk", "phi2.json", "--out", "x.json"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("self_intersecting count=1.00000000000e0"));
    let report: Value = serde_json::from_slice(&read(dir.path(), "x.json")).unwrap();
    let x = &report["result"]["scan"]["intersections"][0];
    assert_eq!(x["transversal"], true);
}

#[test]
fn grid_csv_has_plot_columns() {
    let dir = tempfile::tempdir().unwrap();
    phi2_files(dir.path());
    let out = phd(dir.path(), &["report", "--disk", "phi2.json", "--out", "grid.csv"], None);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(read(dir.path(), "grid.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "x,y,Re f1,Im f1,Re f2,Im f2");
    assert_eq!(csv.lines().count(), 1 + 1 + 24 * 64 + 64);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    phi2_files(dir.path());
    let out = phd(dir.path(), &["self-intersect", "--disk", "phi2.json", "--out", "x.json"], Some("zero"));
    assert_eq!(out.status.code(), Some(1));
}
