use std::path::Path;
use std::process::{Command, Output};

use sdph::io;
use sdph::mixture::{Component, MixtureModel, Phase};

fn sdph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdph")).current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> serde_json::Value {
    let out = sdph(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    serde_json::from_str(&stdout).unwrap()
}

fn torus_field(dir: &Path) {
    ok(dir, &["phantom", "--kind", "torus", "--dims", "32,32,32", "--ring-radius", "10", "--tube-radius", "3", "--out", "torus.vol"]);
    ok(dir, &["sdt", "--input", "torus.vol", "--out", "torus.fld"]);
}

#[test]
fn ph_on_torus_field_has_the_loop_row() {
    let dir = tempfile::tempdir().unwrap();
    torus_field(dir.path());
    let summary = ok(dir.path(), &["ph", "--input", "torus.fld", "--out", "torus.csv"]);
    assert_eq!(summary["status"], "ok");
    let written = io::read_diagram(&dir.path().join("torus.csv")).unwrap();
    let field = io::read_field(&dir.path().join("torus.fld")).unwrap();
    assert_eq!(written.signature(), sdph::cubical::persistence(&field).signature());
    let loops: Vec<_> = written.degree(1).filter(|p| p.persistence() > 5.0).collect();
    assert_eq!(loops.len(), 1);
    assert!((loops[0].birth + 3.0).abs() <= 1.5 && (loops[0].death - 7.0).abs() <= 1.5);
    assert_eq!(written.source_id, "torus");
}

#[test]
fn chunked_ph_flags_boundary_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    torus_field(dir.path());
    let s = ok(dir.path(), &["--set", "chunks=[2,1,1]", "ph", "--input", "torus.fld", "--out", "c.csv"]);
    assert_eq!(s["boundary_artifacts"], true);
    let d = io::read_diagram(&dir.path().join("c.csv")).unwrap();
    assert!(d.degree(1).all(|p| p.persistence() <= 5.0));
}

#[test]
fn classify_with_one_model_predicts_its_phase() {
    let dir = tempfile::tempdir().unwrap();
    torus_field(dir.path());
    ok(dir.path(), &["ph", "--input", "torus.fld", "--out", "torus.csv"]);
    ok(dir.path(), &["quadrant", "--input", "torus.csv", "--out", "torus.q.csv"]);
    let model = MixtureModel::new(vec![Component {
        alpha: 1.0,
        mu: vec![-2.0, 6.0],
        sigma: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    }])
    .with_phase(Phase::II);
    io::write_model(&dir.path().join("m.json"), &model).unwrap();
    let s = ok(
        dir.path(),
        &["--set", "sample_components=[1,1]", "classify", "--input", "torus.q.csv", "--model", "m.json", "--truth", "II", "--out", "e.csv"],
    );
    assert_eq!(s["predictions"]["torus"], "II");
    let rows = io::read_evaluation(&dir.path().join("e.csv")).unwrap();
    assert_eq!((rows.len(), rows[0].predicted, rows[0].phase), (1, Phase::II, Some(Phase::II)));
    let e = ok(dir.path(), &["evaluate", "--input", "e.csv", "--out", "r.json"]);
    assert_eq!(e["accuracy"], 1.0);
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.vol", "b.vol"] {
        ok(dir.path(), &["--set", "seed=9", "phantom", "--class", "thin-dilated", "--dims", "40,40,40", "--out", out]);
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.vol"), read("b.vol"));
    assert_eq!(io::read_seed(&dir.path().join("a.vol")).unwrap(), Some(9));
    ok(dir.path(), &["--set", "seed=10", "phantom", "--class", "thin-dilated", "--dims", "40,40,40", "--out", "c.vol"]);
    assert_ne!(read("a.vol"), read("c.vol"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "seed = 5\nphantom_dims = [20, 20, 20]\n").unwrap();
    let s = ok(dir.path(), &["--config", "c.toml", "phantom", "--kind", "ball", "--radius", "4", "--out", "b.vol"]);
    assert_eq!((s["seed"].as_u64(), s["dims"][0].as_u64()), (Some(5), Some(20)));
    let s = ok(dir.path(), &["--config", "c.toml", "--set", "seed=6", "phantom", "--kind", "ball", "--out", "b.vol"]);
    assert_eq!(s["seed"].as_u64(), Some(6));
}

#[test]
fn exit_codes_and_error_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = sdph(dir.path(), &["--set", "kde_sigma=0", "phantom", "--out", "x.vol"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "error");
    assert!(v["error"].as_str().unwrap().contains("kde_sigma"));
    assert!(!dir.path().join("x.vol").exists());

    std::fs::write(dir.path().join("bad.csv"), "degree,birth,death,bx,by,bz,dx,dy,dz,essential\n1,oops,2,,,,,,,0\n").unwrap();
    let out = sdph(dir.path(), &["quadrant", "--input", "bad.csv", "--out", "q.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bad.csv:2"));

    assert_eq!(sdph(dir.path(), &["no-such-command"]).status.code(), Some(1));
    assert_eq!(sdph(dir.path(), &["--help"]).status.code(), Some(0));
    let help = String::from_utf8(sdph(dir.path(), &["classify", "--help"]).stdout).unwrap();
    for flag in ["--input", "--model", "--truth", "--out", "--config", "--set"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn outputs_leave_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    torus_field(dir.path());
    ok(dir.path(), &["ph", "--input", "torus.fld", "--out", "torus.csv"]);
    let names: Vec<String> =
        std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    assert!(names.iter().all(|n| !n.contains("partial")), "{names:?}");
}

#[test]
fn thread_cap_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sdph"))
        .current_dir(dir.path())
        .env("SDPH_THREADS", "2")
        .args(["phantom", "--kind", "ball", "--dims", "9,9,9", "--radius", "3", "--out", "b.vol"])
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn texture_and_tree_stages() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut qs = Vec::new();
    let mut dgms = Vec::new();
    for (i, class) in ["thick-sparse", "thin-dense", "thin-dilated"].iter().enumerate() {
        let seed = format!("seed={i}");
        ok(d, &["--set", &seed, "phantom", "--class", class, "--out", &format!("{class}.vol")]);
        ok(d, &["sdt", "--input", &format!("{class}.vol"), "--out", &format!("{class}.fld")]);
        ok(d, &["ph", "--input", &format!("{class}.fld"), "--out", &format!("{class}.csv")]);
        ok(d, &["quadrant", "--input", &format!("{class}.csv"), "--out", &format!("{class}.q.csv")]);
        dgms.push(format!("{class}.csv"));
        qs.push(format!("{class}.q.csv"));
    }
    let mut args = vec!["--set", "grid_spacing=16", "features", "--out", "f.csv", "--input"];
    args.extend(dgms.iter().map(String::as_str));
    let s = ok(d, &args);
    assert_eq!(s["rows"], 3 * 64);
    let s = ok(d, &["cluster", "--input", "f.csv", "--out", "l.csv", "--compositions", "c.csv", "--embedding", "p.csv"]);
    let sizes: u64 = s["cluster_sizes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(sizes, 192);
    let comps = io::decode_compositions(&std::fs::read_to_string(d.join("c.csv")).unwrap(), "c.csv").unwrap();
    for c in &comps {
        assert!((c.percentages.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }
    let mut args = vec!["kde", "--out-dir", "kde", "--input"];
    args.extend(qs.iter().map(String::as_str));
    ok(d, &args);
    let s = ok(d, &["tree", "--out", "t.nwk", "--cut", "1e9", "--input", "kde/thick-sparse.density.csv", "kde/thin-dense.density.csv", "kde/thin-dilated.density.csv"]);
    assert_eq!(s["clusters"], serde_json::json!([0, 0, 0]));
    let newick = std::fs::read_to_string(d.join("t.nwk")).unwrap();
    for class in ["thick-sparse", "thin-dense", "thin-dilated"] {
        assert!(newick.contains(class));
    }
}
