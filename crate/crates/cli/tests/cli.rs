use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deadoil_core::io::{load_field, save_field};
use deadoil_core::{Grid2D, ScalarField};

const BASE: &str = r#"
[grid]
nx = 9
ny = 9
lx = 3.0
ly = 3.0

[time]
t_final = 0.04
steps = 8

[initial]
u0 = { kind = "sines", amplitude = 0.5 }
p0 = { kind = "sines", amplitude = 0.3 }

[cost]
beta1 = 0.01
q0 = 1.5
target_u = { kind = "constant", value = 0.1 }
target_p = { kind = "sines", amplitude = 0.2, mx = 2 }

[verify]
mms = false
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deadoil"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn count_prefixed(dir: &Path, prefix: &str) -> usize {
    std::fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with(prefix)
        })
        .count()
}

#[test]
fn forward_writes_one_file_per_saved_level() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("fwd");
    let o = run(&["forward", "--stride", "2"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(count_prefixed(&out, "u_"), 8 / 2 + 1);
    assert_eq!(count_prefixed(&out, "p_"), 8 / 2 + 1);
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("\"u_0008.csv\" = "));
    assert!(manifest.contains("tau = "));
}

#[test]
fn small_q0_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &BASE.replace("q0 = 1.5", "q0 = 0.5"));
    let o = run(&["forward"], &cfg, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q0 > 1"));
}

#[test]
fn unknown_key_and_missing_file_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &BASE.replace("steps = 8", "steps = 8\ndt = 0.1"),
    );
    let o = run(&["forward"], &cfg, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dt"));

    let cfg = write_config(
        tmp.path(),
        &BASE.replace(
            r#"{ kind = "constant", value = 0.1 }"#,
            r#"{ kind = "file", path = "missing.csv" }"#,
        ),
    );
    let o = run(&["forward"], &cfg, &tmp.path().join("o"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.csv"));
}

#[test]
fn field_file_targets_and_control_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = Grid2D::new(9, 9, 3.0, 3.0).unwrap();
    let target = ScalarField::from_fn(&grid, |x, y| (x * y).sin() / 3.0);
    save_field(&target, &tmp.path().join("target.csv")).unwrap();
    let text = BASE.replace(
        r#"{ kind = "constant", value = 0.1 }"#,
        r#"{ kind = "file", path = "target.csv" }"#,
    );
    let cfg = write_config(tmp.path(), &text);
    let out = tmp.path().join("opt");
    let o = run(&["optimize"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let log = std::fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert!(log.starts_with("iter,J,grad_norm,kkt_residual,step_size,shrinks\n"));
    assert_eq!(count_prefixed(&out, "f_"), 8);

    // restart from the saved control trajectory
    let text = format!("{text}\n[control]\ninit = {{ kind = \"trajectory\", dir = \"opt\" }}\n");
    let cfg = write_config(tmp.path(), &text);
    let o = run(&["forward"], &cfg, &tmp.path().join("fwd"));
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let f0 = load_field(&grid, &out.join("f_0000.csv")).unwrap();
    assert!(f0.norm_max() > 0.0);
}

#[test]
fn gradcheck_report_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("gc");
    let o = run(&["gradcheck", "--seed", "3"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "direction,fd,adjoint,rel_error");
    assert_eq!(lines.len(), 11);
    for line in &lines[1..] {
        let rel: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel <= 1e-6, "{line}");
    }
}

#[test]
fn gradcheck_with_impossible_tolerance_is_a_verification_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{BASE}\n[gradcheck]\ntol = 1e-30\ndirections = 2\n"),
    );
    let out = tmp.path().join("gc");
    let o = run(&["gradcheck"], &cfg, &out);
    assert_eq!(o.status.code(), Some(4));
    assert!(out.join("manifest.toml").exists());
}

#[test]
fn adjoint_writes_multipliers_and_kkt_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("adj");
    let o = run(&["adjoint"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(count_prefixed(&out, "lamu_"), 9);
    assert!(out.join("e1.csv").exists() && out.join("p1.csv").exists());
    let grid = Grid2D::new(9, 9, 3.0, 3.0).unwrap();
    assert_eq!(
        load_field(&grid, &out.join("lamu_0008.csv"))
            .unwrap()
            .norm_max(),
        0.0
    );
    let kkt = std::fs::read_to_string(out.join("kkt.csv")).unwrap();
    assert!(kkt.lines().nth(1).unwrap().starts_with("terminal,true,"));
}

#[test]
fn verify_reports_hypotheses() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("v");
    let o = run(&["verify"], &cfg, &out);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(out.join("hypotheses.csv")).unwrap();
    assert_eq!(text.lines().count(), 15);
    assert!(!text.contains(",false,"));
}

#[test]
fn unstable_step_is_a_numeric_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let text = BASE
        .replace("t_final = 0.04\nsteps = 8", "t_final = 200.0\nsteps = 400")
        .replace("amplitude = 0.5", "amplitude = 5.0");
    let cfg = write_config(tmp.path(), &text);
    let o = run(&["forward"], &cfg, &tmp.path().join("o"));
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stability bound"), "{err}");
}

#[test]
fn identical_runs_give_identical_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), BASE);
    let out = tmp.path().join("det");
    let mut manifests = Vec::new();
    for _ in 0..2 {
        let _ = std::fs::remove_dir_all(&out);
        let o = run(&["adjoint"], &cfg, &out);
        assert_eq!(o.status.code(), Some(0));
        manifests.push(std::fs::read(out.join("manifest.toml")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
}
