use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn reebchord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reebchord"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_catalog(p: &Path) -> Vec<Value> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn kepler_scan(dir: &Path) -> std::path::PathBuf {
    let cat = dir.join("kepler.jsonl");
    let out = reebchord(&[
        "scan",
        "--mu",
        "0",
        "--jacobi",
        "-2",
        "--branch",
        "minus",
        "--s-range",
        "0.1:0.53",
        "--grid",
        "50",
        "--out",
        path_str(&cat),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    cat
}

#[test]
fn lagrange_symmetric_case() {
    let out = reebchord(&["lagrange", "--mu", "0.5", "--json"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let c = v["first_critical_value"].as_f64().unwrap();
    assert!((c + 2.0).abs() < 1e-12, "{c}");
}

#[test]
fn lagrange_small_mu_is_near_kepler_value() {
    let out = reebchord(&["lagrange", "--mu", "1e-6", "--json"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    let c = v["first_critical_value"].as_f64().unwrap();
    assert!((c + 1.5).abs() < 1e-3, "{c}");
}

#[test]
fn lagrange_rejects_mass_ratio_above_one() {
    let out = reebchord(&["lagrange", "--mu", "1.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn malformed_arguments_are_usage_errors() {
    assert_eq!(code(&reebchord(&["scan", "--mu", "0", "--jacobi", "auto-x"])), 2);
    assert_eq!(code(&reebchord(&["integrate", "--mu", "0", "--state", "1,2,3"])), 2);
    assert_eq!(code(&reebchord(&["frobnicate"])), 2);
}

#[test]
fn kepler_scan_finds_one_radial_chord() {
    let dir = tempfile::tempdir().unwrap();
    let cat = kepler_scan(dir.path());
    let entries = read_catalog(&cat);
    assert_eq!(entries.len(), 1);
    let e = &entries[0];
    assert!((e["flight_time"].as_f64().unwrap() - PI / 4.0).abs() < 1e-8);
    assert!((e["s0"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert_eq!(e["branch"], "minus");
    assert_eq!(e["run_config"]["command"], "scan");
    assert!(e["artifact_version"].as_str().unwrap().starts_with("reebchord"));
}

#[test]
fn scan_with_no_brackets_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("empty.jsonl");
    let out = reebchord(&[
        "scan",
        "--mu",
        "0",
        "--jacobi",
        "-2",
        "--branch",
        "minus",
        "--s-range",
        "0.1:0.3",
        "--grid",
        "20",
        "--out",
        path_str(&cat),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(read_catalog(&cat).is_empty());
}

#[test]
fn scan_above_critical_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("c.jsonl");
    let out = reebchord(&["scan", "--mu", "0", "--jacobi", "-0.5", "--out", path_str(&cat)]);
    assert_eq!(code(&out), 2);
    let out = reebchord(&[
        "scan",
        "--mu",
        "0",
        "--jacobi",
        "-0.5",
        "--force",
        "--s-range",
        "1.5:2.5",
        "--grid",
        "50",
        "--branch",
        "minus",
        "--out",
        path_str(&cat),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stderr(&out).contains("warning"));
    let e = &read_catalog(&cat)[0];
    assert!((e["flight_time"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-6);
}

#[test]
fn full_scan_below_critical() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("auto.jsonl");
    let out = reebchord(&["scan", "--mu", "0.1", "--jacobi", "auto-0.1", "--out", path_str(&cat)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let entries = read_catalog(&cat);
    assert!(entries.len() >= 5, "{} chords", entries.len());
    let taus: Vec<f64> = entries.iter().map(|e| e["tau_reeb"].as_f64().unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[0] <= w[1]));
    for e in &entries {
        let (tau, action) = (e["tau_reeb"].as_f64().unwrap(), e["action"].as_f64().unwrap());
        assert!((tau - action).abs() < 1e-6);
        assert_eq!(e["symmetric"], true);
    }
}

#[test]
fn scan_output_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cat = dir.path().join("t.jsonl");
    let args = |jobs: &'static str| {
        vec![
            "scan", "--mu", "0.1", "--jacobi", "auto-0.1", "--side", "positive", "--grid", "60", "--kmax", "2",
            "--jobs", jobs, "--out",
        ]
    };
    let mut a = args("1");
    a.push(path_str(&cat));
    assert_eq!(code(&reebchord(&a)), 0);
    let first = std::fs::read(&cat).unwrap();
    let mut b = args("4");
    b.push(path_str(&cat));
    assert_eq!(code(&reebchord(&b)), 0);
    assert_eq!(first, std::fs::read(&cat).unwrap());
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn equilibrium_gives_constant_csv() {
    // At mu = 0 every point of the unit circle with p = J q is at rest.
    let out = reebchord(&["integrate", "--mu", "0", "--state", "1,0,0,1", "--tmax", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("# run_config {"));
    assert!(text.contains("\nt,chart,q1,q2,p1,p2,H,Kcheck,a1,a2,b1,b2\n"));
    let rows = csv_rows(&text);
    assert!(rows.len() > 2);
    for r in &rows {
        let q1: f64 = r[2].parse().unwrap();
        let p2: f64 = r[5].parse().unwrap();
        assert!((q1 - 1.0).abs() < 1e-12 && (p2 - 1.0).abs() < 1e-12, "{r:?}");
        assert_eq!(r[6], rows[0][6]);
    }
}

#[test]
fn physical_flow_refuses_collisions() {
    let out = reebchord(&["integrate", "--mu", "0", "--state", "0.5,0,0,0", "--tmax", "1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("use the regularized flow"), "{}", stderr(&out));
}

#[test]
fn regularized_flow_marks_collisions() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("radial.csv");
    let out = reebchord(&[
        "integrate",
        "--mu",
        "0",
        "--state",
        "0.5,0,0,0",
        "--regularized",
        "--tmax",
        "3",
        "--out",
        path_str(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows = csv_rows(&text);
    let hits: Vec<&Vec<String>> = rows.iter().filter(|r| r[2].is_empty()).collect();
    assert_eq!(hits.len(), 1);
    let r = hits[0];
    assert_eq!(r[1], "south");
    let a: Vec<f64> = r[8..10].iter().map(|x| x.parse().unwrap()).collect();
    let b: Vec<f64> = r[10..12].iter().map(|x| x.parse().unwrap()).collect();
    assert!(a[0].hypot(a[1]) < 1e-8);
    assert!((b[0].hypot(b[1]) - 2.0).abs() < 1e-8);
    let kcheck: f64 = r[7].parse().unwrap();
    assert!((kcheck - 0.5).abs() < 1e-9);
}

#[test]
fn starshape_passes_below_critical() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("s.json");
    let out = reebchord(&[
        "starshape",
        "--mu",
        "0.1",
        "--jacobi",
        "auto-0.1",
        "--base-grid",
        "12",
        "--ray-grid",
        "12",
        "--out",
        path_str(&report),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: Value = serde_json::from_str(std::fs::read_to_string(&report).unwrap().trim()).unwrap();
    assert_eq!(v["pass"], true);
    assert!(v["min_margin"].as_f64().unwrap() > 0.0);
    assert_eq!(v["run_config"]["starshape"]["base_grid"], 12);
}

#[test]
fn starshape_refuses_above_critical() {
    let out = reebchord(&["starshape", "--mu", "0.1", "--jacobi", "-1"]);
    assert_eq!(code(&out), 2);
}

fn polyline(svg: &str) -> Vec<(f64, f64)> {
    let start = svg.find("class=\"orbit\" points=\"").unwrap() + "class=\"orbit\" points=\"".len();
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end]
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

fn attr(svg: &str, id: &str, name: &str) -> f64 {
    let at = svg.find(&format!("id=\"{id}\"")).unwrap();
    let key = format!("{name}=\"");
    let s = at + svg[at..].find(&key).unwrap() + key.len();
    let e = s + svg[s..].find('"').unwrap();
    svg[s..e].parse().unwrap()
}

#[test]
fn kepler_svg_leaves_and_returns_radially() {
    let dir = tempfile::tempdir().unwrap();
    let cat = kepler_scan(dir.path());
    let svg_path = dir.path().join("k.svg");
    let args = [
        "orbit-svg",
        "--catalog",
        path_str(&cat),
        "--index",
        "0",
        "--out",
        path_str(&svg_path),
    ];
    assert_eq!(code(&reebchord(&args)), 0);
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.contains("class=\"zero-velocity\""));
    assert!(!svg.contains("id=\"E\""));
    assert_eq!(svg.matches("class=\"collision\"").count(), 2);

    let (ox, oy) = (attr(&svg, "O", "cx"), attr(&svg, "O", "cy"));
    let pts = polyline(&svg);
    let dist = |p: (f64, f64)| (p.0 - ox).hypot(p.1 - oy);
    assert!(dist(pts[0]) < 1e-2 && dist(*pts.last().unwrap()) < 1e-2);
    // Near O both legs are straight segments through O.
    for leg in [&pts[..40], &pts[pts.len() - 40..]] {
        let angle = |p: &(f64, f64)| (p.1 - oy).atan2(p.0 - ox);
        let far = if dist(leg[0]) > dist(leg[39]) {
            &leg[0]
        } else {
            &leg[39]
        };
        let reference = angle(far);
        for p in leg.iter().filter(|p| dist(**p) > 2.0) {
            assert!((angle(p) - reference).abs() < 0.05, "{p:?} vs {far:?}");
        }
    }
}

#[test]
fn svg_is_byte_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cat = kepler_scan(dir.path());
    let svg_path = dir.path().join("k.svg");
    let args = [
        "orbit-svg",
        "--catalog",
        path_str(&cat),
        "--index",
        "0",
        "--out",
        path_str(&svg_path),
    ];
    assert_eq!(code(&reebchord(&args)), 0);
    let first = std::fs::read(&svg_path).unwrap();
    assert_eq!(code(&reebchord(&args)), 0);
    assert_eq!(first, std::fs::read(&svg_path).unwrap());
}

#[test]
fn svg_with_bad_index_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cat = kepler_scan(dir.path());
    let svg_path = dir.path().join("x.svg");
    let out = reebchord(&[
        "orbit-svg",
        "--catalog",
        path_str(&cat),
        "--index",
        "7",
        "--out",
        path_str(&svg_path),
    ]);
    assert_eq!(code(&out), 2);
    assert!(!svg_path.exists());
    let missing = dir.path().join("none.jsonl");
    let out = reebchord(&[
        "orbit-svg",
        "--catalog",
        path_str(&missing),
        "--index",
        "0",
        "--out",
        path_str(&svg_path),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oberth_gain() {
    let out = reebchord(&["oberth", "--v", "2", "--dv", "0.5", "--json"]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["energy_gain"].as_f64().unwrap(), 1.125);
}
