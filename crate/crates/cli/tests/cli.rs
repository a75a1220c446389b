use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wavetopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wavetopo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> String {
    let text = String::from_utf8(wavetopo(&["dump-preset", "cantilever"]).stdout).unwrap();
    let path = dir.join(name);
    fs::write(&path, edit(text)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn dump_preset_parses_back() {
    for id in [
        "asym-plate",
        "cantilever",
        "girder",
        "inverter",
        "gripper",
        "l-bracket",
    ] {
        let out = wavetopo(&["dump-preset", id]);
        assert!(out.status.success());
        let config =
            wavetopo::config::parse_config(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
        assert_eq!(config, wavetopo::preset(id.parse().unwrap()));
    }
}

#[test]
fn run_writes_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = wavetopo(&[
        "run",
        "--preset",
        "cantilever",
        "--nx",
        "40",
        "--ny",
        "20",
        "--iters",
        "3",
        "--snapshot-every",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    let lines: Vec<&str> = history.lines().collect();
    assert_eq!(
        lines[0],
        "iteration,J,J_over_J0,G,vol_frac,max_vm,C_v,lambda,wall_ms"
    );
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').nth(2), Some("1.0000000000000000e0"));
    for it in 0..3 {
        assert!(out.join(format!("fields_{it:05}.vtk")).exists());
        assert!(out.join(format!("material_{it:05}.png")).exists());
    }
    let config = wavetopo::config::load_config(&out.join("config.toml")).unwrap();
    assert_eq!((config.mesh.nx, config.max_iterations), (40, 3));
    assert!(fs::read_to_string(out.join("manifest.toml"))
        .unwrap()
        .contains("format_version = 1"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = wavetopo(&[
        "run",
        "--preset",
        "cantilever",
        "--scheme",
        "we",
        "--m",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));

    let typo = write_config(dir.path(), "typo.toml", |t| t.replace("beta =", "betta ="));
    let o = wavetopo(&[
        "run",
        "--config",
        &typo,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("evolution"));

    let o = wavetopo(&["run", "--preset", "cantilever", "--iters", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = wavetopo(&["dump-preset", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "blow.toml", |t| {
        t.replace("youngs_modulus = 210000000000.0", "youngs_modulus = 1e-300")
            .replace("traction = [0.0, -1000.0]", "traction = [0.0, -1e300]")
    });
    let out = dir.path().join("out");
    let o = wavetopo(&[
        "run",
        "--config",
        &path,
        "--nx",
        "40",
        "--ny",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn sweep_runs_every_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = wavetopo(&[
        "sweep",
        "--preset",
        "cantilever",
        "--nx",
        "40",
        "--ny",
        "20",
        "--iters",
        "2",
        "--param",
        "beta",
        "--values",
        "2,5,8",
        "--jobs",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    for (row, v) in rows[1..].iter().zip(["2", "5", "8"]) {
        assert!(row.starts_with(&format!("{v},max-iterations,2,")), "{row}");
        assert!(out.join(format!("beta_{v}")).join("history.csv").exists());
    }
}
