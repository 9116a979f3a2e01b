use std::fs;
use std::process::{Command, Output};

fn cncvem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cncvem"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn solve_writes_errors_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = cncvem(&["solve", "--mesh", "box:2", "--case", "patch", "--k", "1", "--out", out]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert!(csv.starts_with("mesh,h,dofs,e_l2,e_h1,seconds"));
    let vtk = fs::read_to_string(dir.path().join("solution.vtk")).unwrap();
    assert!(vtk.contains("displacement"));
}

#[test]
fn config_file_replaces_the_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &config,
        format!("[converge]\ncase = \"cube\"\nmeshes = \"box:2,3\"\nno-timing = true\nout = {:?}\n", out),
    )
    .unwrap();
    let run = cncvem(&["--config", config.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.000")));
}

#[test]
fn invalid_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["solve", "--mesh", "box:2", "--case", "torus", "--out", out],
        vec!["solve", "--mesh", "box:2", "--case", "cube", "--nc-tags", "nowhere", "--out", out],
        vec!["mesh-info", "--mesh", "box:0"],
        vec!["solve", "--bogus-flag"],
    ] {
        assert_eq!(cncvem(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn missing_mesh_file_is_an_io_error() {
    let run = cncvem(&["mesh-info", "--mesh", "/nonexistent/mesh.json"]);
    assert_eq!(run.status.code(), Some(1));
}

#[test]
fn mesh_info_reports_counts() {
    let run = cncvem(&["mesh-info", "--mesh", "cyl:2x8x2"]);
    assert!(run.status.success());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("lateral"), "{text}");
}
