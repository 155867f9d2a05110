use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_infinitas"));
    c.env_remove("INFINITAS_THREADS");
    c
}

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn rabier_reads_stdin() {
    let mut child = bin()
        .args(["rabier", "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"# one row\n3, 4\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["nu"], 5.0);
    assert!(v["equivalences"]["discrepancy"].as_f64().unwrap() < 1e-6);
}

#[test]
fn input_errors_exit_4() {
    assert_eq!(code(&run(&["scan", "--bogus"])), 4);
    assert_eq!(code(&run(&["links", "--spec", "/nonexistent.toml"])), 4);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[family]\nkind = \"map-graph\"\nn = 2\ns = 1\nexpr = \"x1 +* x2\"\n",
    )
    .unwrap();
    let o = run(&["links", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&run(&["links", "--catalog", "broughton", "--at", "1,2"])), 4);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn links_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = specs().join("broughton.toml");
    let o = run(&[
        "links",
        "--spec",
        spec.to_str().unwrap(),
        "--at",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("stable chi = 6"));
    let csv = std::fs::read_to_string(dir.path().join("links.csv")).unwrap();
    assert!(csv.starts_with("# infinitas links v1\nR,chi,status\n4,6,ok\n"), "{csv}");
}

#[test]
fn unstable_link_exits_3() {
    // the level line x2 = 5·10⁴ enters the ball between the first two radii
    let dir = tempfile::tempdir().unwrap();
    let line = dir.path().join("line.toml");
    std::fs::write(
        &line,
        "[family]\nkind = \"hypersurface-family\"\nn = 2\ns = 1\nexpr = \"x2 - y1\"\n",
    )
    .unwrap();
    let o = run(&[
        "links",
        "--spec",
        line.to_str().unwrap(),
        "--schedule",
        "10000:10:3",
        "--at",
        "50000",
    ]);
    assert_eq!(code(&o), 3, "{}", stdout(&o));
    assert!(stdout(&o).contains("not stabilized"));
}

#[test]
fn flow_reports_endpoint() {
    let o = run(&["flow", "--catalog", "x1", "--start", "0,5", "--to", "2", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["endpoint"][0].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!(v["max_residual"].as_f64().unwrap() <= 1e-6);
    // the start point must lie over --from
    assert_eq!(
        code(&run(&[
            "flow",
            "--catalog",
            "x1",
            "--start",
            "0,5",
            "--from",
            "1",
            "--to",
            "2"
        ])),
        4
    );
}

#[test]
fn density_and_gb_check() {
    let o = run(&["density", "--catalog", "line", "--targets", "kappa:0,theta", "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v[0]["value"].as_f64().unwrap() - 2.0).abs() < 0.02);
    assert!((v[1]["value"].as_f64().unwrap() - 0.5).abs() < 0.02);

    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "gb-check",
        "--catalog",
        "disk",
        "--planes",
        "50",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("gb.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.contains(",pass,")), "{csv}");
}

fn scan_files(threads: &str) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let spec = specs().join("circle.toml");
    let o = bin()
        .env("INFINITAS_THREADS", threads)
        .args([
            "scan",
            "--spec",
            spec.to_str().unwrap(),
            "--grid",
            "0.5:2:4",
            "--planes",
            "20",
            "--seed",
            "11",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn scan_output_is_independent_of_thread_count() {
    let one = scan_files("1");
    let names: Vec<&str> = one.iter().map(|f| f.0.as_str()).collect();
    assert!(names.contains(&"scan.csv") && names.contains(&"jumps.csv") && names.contains(&"sigma_1.svg"));
    assert_eq!(one, scan_files("4"));
    assert_eq!(one, scan_files("8"));
}
