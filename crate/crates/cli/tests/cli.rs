use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use h2fatigue::experiment::{compute_delta_k, CoefficientSet};

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h2fatigue"))
        .args(args)
        .current_dir(cwd)
        .env("H2FCG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Scaled air experiment that grows about 1 mm in a few hundred cycles.
const SMALL_AIR: &str = r#"
[fatigue]
alpha_bar_0 = 0.08

[geometry]
refine_length = 1.6

[load]
delta_P = 14000.0
increments_per_cycle = 4
cycle_jump = 5
max_cycles = 5000

[output]
run_id = "air"
directory = "out"
"#;

#[test]
fn run_writes_rates_and_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("air.toml"), SMALL_AIR).unwrap();
    let o = cli(&["run", "air.toml"], dir.path());
    assert!(
        o.status.success(),
        "{}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    let text = stdout(&o);
    assert!(text.contains("Paris fit: C = "), "{text}");
    let table = std::fs::read_to_string(dir.path().join("out/air.csv")).unwrap();
    assert!(table.starts_with("# coefficient_set=astm\n"));
    assert!(table.contains("run_id,p_H2_MPa,R,f_Hz,N,t_s,a_mm,deltaK_MPa_sqrtm,dadN_mm_per_cycle,C_tip_wppm"));
    let rates = table
        .lines()
        .filter(|l| l.starts_with("air,"))
        .filter(|l| !l.split(',').nth(8).unwrap().is_empty())
        .count();
    assert!(rates > 0);
    assert!(dir.path().join("out/air.resolved.toml").exists());
}

#[test]
fn sweep_gives_one_record_per_value_and_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[fatigue]
alpha_bar_0 = 0.08
[geometry]
refine_length = 1.6
[load]
delta_P = 9000.0
increments_per_cycle = 4
max_cycles = 2
p_H2 = 106.0
precharged = true
[output]
run_id = "fs"
directory = "out"
"#;
    std::fs::write(dir.path().join("fs.toml"), cfg).unwrap();
    let o = cli(&["sweep", "fs.toml", "f=0.001,0.1,1,100"], dir.path());
    assert!(
        o.status.success(),
        "{}\n{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["0.001", "0.1", "1", "100"] {
        assert!(
            dir.path().join(format!("out/fs_f{f}.csv")).exists(),
            "missing record for f = {f}"
        );
    }
    let table = std::fs::read_to_string(dir.path().join("out/fs_sweep.csv")).unwrap();
    let runs = table.lines().filter(|l| l.starts_with("# run ")).count();
    assert_eq!(runs, 4);
}

#[test]
fn postprocess_recovers_synthetic_paris_slope() {
    let (w, b, dp) = (50.8, 25.4, 4000.0);
    let rate = |a: f64| {
        1e-8 * compute_delta_k(dp, a, w, b, CoefficientSet::Astm)
            .unwrap()
            .value
            .powi(3)
    };
    let mut csv = String::from("run_id,p_H2_MPa,R,f_Hz,N,t_s,a_mm,deltaK_MPa_sqrtm,dadN_mm_per_cycle,C_tip_wppm\n");
    let (mut a, mut n) = (12.7, 0.0);
    for k in 0..=120 {
        if k > 0 {
            // Midpoint rule over 200 sub-steps of the 0.1 mm interval.
            for _ in 0..200 {
                n += 0.0005 / rate(a + 0.00025);
                a += 0.0005;
            }
        }
        let dk = compute_delta_k(dp, a, w, b, CoefficientSet::Astm).unwrap().value;
        writeln!(csv, "synthetic,0,0.1,1,{n},{n},{a},{dk},,0").unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("paris.csv"), csv).unwrap();
    let o = cli(&["postprocess", "paris.csv"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let m: f64 = text
        .split("m = ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("no slope in {text}"));
    assert!((m - 3.0).abs() <= 0.05, "m = {m}");
    let o = cli(&["postprocess", "paris.csv", "--fit-window", "20", "30"], dir.path());
    assert!(o.status.success());
}

#[test]
fn invalid_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[load]\nR = 1.2\n").unwrap();
    let o = cli(&["run", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("R"));
    let o = cli(&["run", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    std::fs::write(dir.path().join("typo.toml"), "[load]\nspeling = 1\n").unwrap();
    let o = cli(&["export-mesh", "typo.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("speling"));
}

#[test]
fn export_mesh_writes_vtk() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.toml"), "[geometry]\nrefine_length = 2.0\n").unwrap();
    let o = cli(&["export-mesh", "m.toml", "--out", "mesh.vtk"], dir.path());
    assert!(o.status.success());
    let vtk = std::fs::read_to_string(dir.path().join("mesh.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(stdout(&o).contains("elements"));
}
