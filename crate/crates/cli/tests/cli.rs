use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use shapesig::mesh::{assemble_laplacian, shapes, write_off};
use shapesig::{DescriptorField, TriangleMesh};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_shapesig"));
    c.env_remove("SHAPESIG_CACHE_DIR").env_remove("RUST_LOG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn status(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn assert_ok(out: &Output) {
    assert_eq!(status(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

/// Deterministically bumped copy of a mesh, so no two vertices look alike.
fn bumped(mesh: &TriangleMesh, amount: f64, phase: f64) -> TriangleMesh {
    let v = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = 1.0 + amount * (17.0 * i as f64 + phase).sin();
            [p[0] * s, p[1] * s, p[2] * s]
        })
        .collect();
    TriangleMesh::new(v, mesh.triangles().to_vec()).unwrap()
}

fn save(mesh: &TriangleMesh, path: &Path) -> PathBuf {
    write_off(mesh, fs::File::create(path).unwrap()).unwrap();
    path.to_path_buf()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_direct_first_step_matches_dense_solve() {
    let dir = tempfile::tempdir().unwrap();
    let tet = TriangleMesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
    .unwrap();
    let mesh = save(&tet, &dir.path().join("tet.off"));
    let out = dir.path().join("tet.ssdf");
    let args = ["signature", "--reference", s(&mesh), "--method", "full", "--solver", "direct", "--t-max", "2", "--levels", "4"];
    assert_ok(&run(&[&args[..], &["--out", s(&out)]].concat()));
    let field = DescriptorField::read_binary(&out).unwrap();
    assert_eq!((field.nrows(), field.ncols()), (4, 4));

    let op = assemble_laplacian(&tet).unwrap();
    let (w, d) = (op.weights().to_dense(), DMatrix::from_diagonal(&DVector::from_column_slice(op.areas())));
    let tau = 0.5;
    for i in 0..4 {
        let mut e = DVector::zeros(4);
        e[i] = 1.0;
        let u1 = (&d - &w * tau).lu().solve(&e).unwrap();
        assert!((field.get(i, 0) - u1[i]).abs() <= 1e-14, "{} vs {}", field.get(i, 0), u1[i]);
    }
}

#[test]
fn self_match_is_perfect_and_report_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = save(&bumped(&shapes::icosphere(2), 0.08, 0.0), &dir.path().join("blob.off"));
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "method = \"mcr\"\nmodes = 10\nlevels = 7\nadapt_time = true\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "match", "--config", s(&cfg), "--modes", "30", "--reference", s(&mesh), "--target", s(&mesh),
        "--ground-truth", "identity", "--out-dir", s(&out_dir),
    ]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["hit_rate"], 100.0);
    assert_eq!(report["fraction_at_threshold"], 100.0);
    assert_eq!(report["config"]["modes"], 30);
    assert_eq!(report["config"]["levels"], 7);
    assert_eq!(report["config"]["adapt_time"], true);
    assert_eq!(report["samples"].as_array().unwrap().len(), 7);
    let assignment = fs::read_to_string(out_dir.join("assignment.csv")).unwrap();
    assert_eq!(assignment.lines().next(), Some("ref_index,target_index"));
    assert_eq!(assignment.lines().count(), 163);
    let curve = fs::read_to_string(out_dir.join("geodesic_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 102);
}

#[test]
fn target_adopts_reference_sampling_and_mismatches_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let a = save(&bumped(&shapes::icosphere(2), 0.05, 0.0), &dir.path().join("a.off"));
    let b = save(&bumped(&shapes::icosphere(2), 0.05, 0.3), &dir.path().join("b.off"));
    let (fa, fb, fc) = (dir.path().join("a.ssdf"), dir.path().join("b.ssdf"), dir.path().join("c.ssdf"));
    let common = ["--method", "mcr", "--modes", "12", "--adapt-time", "--levels", "10"];
    assert_ok(&run(&[&["signature", "--reference", s(&a), "--out", s(&fa)][..], &common].concat()));
    assert_ok(&run(&[&["signature", "--reference", s(&b), "--reference-descriptor", s(&fa), "--out", s(&fb)][..], &common].concat()));
    let (ra, rb) = (DescriptorField::read_binary(&fa).unwrap(), DescriptorField::read_binary(&fb).unwrap());
    assert_eq!(ra.sampling(), rb.sampling());
    assert!(ra.time_grid().unwrap().t_max() > 25.0);

    // same M but computed independently: each shape adapts to its own spectrum
    assert_ok(&run(&[&["signature", "--reference", s(&b), "--out", s(&fc)][..], &common].concat()));
    let out_dir = dir.path().join("m");
    let refused = run(&[
        "match", "--reference", s(&a), "--target", s(&b), "--reference-descriptor", s(&fa),
        "--target-descriptor", s(&fc), "--out-dir", s(&out_dir),
    ]);
    assert_eq!(status(&refused), 2, "{}", String::from_utf8_lossy(&refused.stderr));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("disagree"));

    // different M
    let fd = dir.path().join("d.ssdf");
    assert_ok(&run(&["signature", "--reference", s(&b), "--method", "mcr", "--modes", "12", "--levels", "11", "--out", s(&fd)]));
    let refused = run(&[
        "match", "--reference", s(&a), "--target", s(&b), "--reference-descriptor", s(&fa),
        "--target-descriptor", s(&fd), "--out-dir", s(&out_dir),
    ]);
    assert_eq!(status(&refused), 2);
}

#[test]
fn exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = save(&shapes::icosphere(1), &dir.path().join("m.off"));
    let out = dir.path().join("x.ssdf");
    assert_eq!(status(&run(&["signature", "--bogus"])), 1);
    assert_eq!(status(&run(&["signature", "--reference", "missing.off", "--out", s(&out)])), 2);
    assert_eq!(status(&run(&["signature", "--reference", s(&mesh), "--method", "ksmor", "--sigma", "0", "--out", s(&out)])), 1);
    assert_eq!(status(&run(&["signature", "--reference", s(&mesh), "--modes", "500", "--out", s(&out)])), 1);
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "mode = 3\n").unwrap();
    assert_eq!(status(&run(&["signature", "--config", s(&bad), "--reference", s(&mesh), "--out", s(&out)])), 1);
    let garbage = dir.path().join("g.off");
    fs::write(&garbage, "OFF\n3 1 0\n0 0 0\n").unwrap();
    assert_eq!(status(&run(&["signature", "--reference", s(&garbage), "--out", s(&out)])), 2);
    // an exhausted CG iteration cap is a valid truncated solve, not a failure
    let cg = ["signature", "--reference", s(&mesh), "--method", "full", "--solver", "cg", "--eps", "1e-12", "--max-iters", "1"];
    assert_ok(&run(&[&cg[..], &["--out", s(&out)]].concat()));
    assert_eq!(status(&run(&["--help"])), 0);
}

#[test]
fn cached_models_reproduce_cold_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let mesh = save(&bumped(&shapes::icosphere(2), 0.05, 1.0), &dir.path().join("m.off"));
    let (cold, warm, again) = (dir.path().join("cold.ssdf"), dir.path().join("warm.ssdf"), dir.path().join("again.ssdf"));
    for method in ["mcr", "hks"] {
        let args = ["signature", "--reference", s(&mesh), "--method", method, "--modes", "15"];
        assert_ok(&bin().args([&args[..], &["--out", s(&cold)]].concat()).output().unwrap());
        for out in [&warm, &again] {
            let o = bin().env("SHAPESIG_CACHE_DIR", &cache).args([&args[..], &["--out", s(out)]].concat()).output().unwrap();
            assert_ok(&o);
        }
        let entries: Vec<_> = fs::read_dir(&cache).unwrap().collect();
        assert_eq!(entries.len(), 1, "one entry per (mesh, r, eig-mode)");
        let (c, w, a) = (fs::read(&cold).unwrap(), fs::read(&warm).unwrap(), fs::read(&again).unwrap());
        assert_eq!(c, w);
        assert_eq!(w, a);
    }
}

fn toy_dataset(dir: &Path) {
    let sphere = shapes::icosphere(2);
    save(&bumped(&sphere, 0.05, 0.0), &dir.join("blob0.off"));
    save(&bumped(&sphere, 0.05, 0.02), &dir.join("blob1.off"));
    let torus = shapes::torus(12, 8, 2.0, 0.7);
    save(&bumped(&torus, 0.03, 0.0), &dir.join("ring0.off"));
    save(&bumped(&torus, 0.03, 0.05), &dir.join("ring3.off"));
}

#[test]
fn benchmark_rows_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    toy_dataset(&data);
    let csv = |name: &str| dir.path().join(name);
    let modes = ["benchmark", "--suite", "modes-sweep", "--dataset", s(&data), "--methods", "mcr,hks,wks", "--sweep-modes", "5,10,20", "--no-timings"];
    for name in ["a.csv", "b.csv"] {
        assert_ok(&run(&[&modes[..], &["--out", s(&csv(name))]].concat()));
    }
    let a = fs::read_to_string(csv("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(csv("b.csv")).unwrap());
    let rows: Vec<&str> = a.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 * 3);
    assert!(rows.iter().all(|r| r.ends_with(',')), "no row failed:\n{a}");
    assert!(rows[0].starts_with("blob0-blob1,mcr,heat,5,"));

    // a pair without usable ground truth fails per row; the run continues
    save(&shapes::icosphere(1), &data.join("odd0.off"));
    save(&shapes::icosphere(2), &data.join("odd1.off"));
    let solver = ["benchmark", "--suite", "solver-sweep", "--dataset", s(&data), "--sweep-eps", "1e-4,1e-8", "--sweep-max-iters", "5,500", "--levels", "5"];
    assert_ok(&run(&[&solver[..], &["--out", s(&csv("s.csv"))]].concat()));
    let s_rows = fs::read_to_string(csv("s.csv")).unwrap();
    assert_eq!(s_rows.lines().count(), 1 + 3 * 5);
    let failed: Vec<&str> = s_rows.lines().skip(1).filter(|r| !r.ends_with(',')).collect();
    assert_eq!(failed.len(), 5);
    assert!(failed.iter().all(|r| r.starts_with("odd0-odd1,full,") && r.contains("vertex counts differ")));

    fs::remove_file(data.join("odd1.off")).unwrap();
    let density = ["benchmark", "--suite", "density-sweep", "--dataset", s(&data), "--methods", "mcr,wks", "--modes", "20"];
    assert_ok(&run(&[&density[..], &["--out", s(&csv("d.csv"))]].concat()));
    let d = fs::read_to_string(csv("d.csv")).unwrap();
    assert_eq!(d.lines().count(), 1 + 2 * 2);
    for row in d.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let min: f64 = cols[11].parse().unwrap();
        assert!(min > 0.0 && min <= 100.0);
    }

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(status(&run(&["benchmark", "--suite", "modes-sweep", "--dataset", s(&empty), "--out", s(&csv("e.csv"))])), 2);
}

#[test]
fn softmap_sweep_and_sparsified_map() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path();
    toy_dataset(data);
    let out_dir = dir.path().join("soft");
    let out = run(&[
        "softmap", "--reference", s(&data.join("blob0.off")), "--target", s(&data.join("blob1.off")), "--ground-truth", "identity",
        "--method", "mcr", "--pde", "wave", "--modes", "20", "--density", "20", "--out-dir", s(&out_dir), "--threads", "2",
    ]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    let min = report["minimum_density"].as_f64().unwrap();
    assert!(min > 0.0 && min <= 100.0);
    assert_eq!(report["config"]["threads"], 2);
    let sweep = fs::read_to_string(out_dir.join("density_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next(), Some("density,soft_hit_rate"));
    let triplets = fs::read_to_string(out_dir.join("softmap.txt")).unwrap();
    let header: Vec<f64> = triplets.lines().next().unwrap().split_whitespace().map(|x| x.parse().unwrap()).collect();
    assert_eq!(&header[..2], &[162.0, 162.0]);
    assert!((header[2] - 20.0).abs() < 0.01);
}
