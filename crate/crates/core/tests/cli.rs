use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use meco_core::scenario::{desk_spec, GenSpec};

fn meco(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_meco")).args(args).output().expect("binary runs")
}

fn put(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn one_user(f: Value, user: Value) -> String {
    json!({ "system": { "T": 0.1, "B": 1e7, "N0": 1e-9, "F": f }, "users": [user] }).to_string()
}

fn error_kind(o: &Output) -> String {
    let line = String::from_utf8_lossy(&o.stderr);
    let v: Value = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    assert!(v["message"].is_string());
    v["error"].as_str().unwrap().to_string()
}

#[test]
fn cheap_local_users_stay_local() {
    let dir = TempDir::new().unwrap();
    let user = json!({ "beta": 1.0, "C": 1000.0, "P": 1e-14, "h2": 1e-6, "R": 5e4, "Fk": 1e9 });
    let sc = put(dir.path(), "s.json", &one_user(json!(6e9), user));
    let o = meco(&["solve", s(&sc)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["allocation"]["ell"], json!([0.0]));
    assert_eq!(r["allocation"]["t"], json!([0.0]));
}

#[test]
fn error_exit_codes() {
    let dir = TempDir::new().unwrap();
    let user = json!({ "beta": 1.0, "C": 1000.0, "P": 1e-10, "h2": 1e-6, "R": 4e5, "Fk": 1e9 });
    let tight = put(dir.path(), "tight.json", &one_user(json!(1e6), user));
    let o = meco(&["solve", s(&tight)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "infeasible");
    // without the cloud bound the same scenario solves
    assert_eq!(meco(&["solve", s(&tight), "--policy", "P2-optimal"]).status.code(), Some(0));

    let bad = put(dir.path(), "bad.json", "{ \"system\": ");
    let o = meco(&["solve", s(&bad)]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_kind(&o), "parse");

    let negative = put(dir.path(), "neg.json", &one_user(json!(6e9), json!({ "beta": 1.0, "C": 1000.0, "P": 1e-10, "h2": -1.0, "R": 4e5, "Fk": 1e9 })));
    assert_eq!(meco(&["solve", s(&negative)]).status.code(), Some(3));

    let missing = dir.path().join("absent.json");
    assert_eq!(meco(&["solve", s(&missing)]).status.code(), Some(1));
    assert_eq!(meco(&["solve"]).status.code(), Some(3));
    assert_eq!(meco(&["--version"]).status.code(), Some(0));
}

#[test]
fn generated_scenario_solves_and_checks() {
    let dir = TempDir::new().unwrap();
    let sc = dir.path().join("s.json");
    let rep = dir.path().join("r.json");
    assert_eq!(meco(&["gen", "--seed", "42", "--out", s(&sc)]).status.code(), Some(0));
    let o = meco(&["solve", s(&sc), "--policy", "P1-optimal", "--out", s(&rep)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let o = meco(&["check", s(&sc), s(&rep)]);
    assert_eq!(o.status.code(), Some(0));
    let c: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(c["feasible"], json!(true));
    assert_eq!(c["violations"], json!([]));
    let r: Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(r["allocation"]["ell"].as_array().unwrap().len(), 30);

    // stretching every time share breaks the slot constraint
    let mut a = r["allocation"].clone();
    for t in a["t"].as_array_mut().unwrap() {
        *t = json!(t.as_f64().unwrap() * 2.0 + 0.01);
    }
    let bent = put(dir.path(), "bent.json", &a.to_string());
    let o = meco(&["check", s(&sc), s(&bent)]);
    assert_eq!(o.status.code(), Some(1));
    let c: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!c["violations"].as_array().unwrap().is_empty());
}

#[test]
fn gen_is_reproducible_and_honours_presets() {
    let a = meco(&["gen", "--seed", "5"]);
    let b = meco(&["gen", "--seed", "5"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, meco(&["gen", "--seed", "6"]).stdout);
    let d: Value = serde_json::from_slice(&meco(&["gen", "--preset", "default"]).stdout).unwrap();
    let r = d["users"][0]["R"].as_f64().unwrap();
    assert!((819_200.0..=4_096_000.0).contains(&r));
}

fn sweep_spec(dir: &Path, axis: &str, values: &[f64], trials: usize) -> PathBuf {
    let base: Value = serde_json::from_str(&GenSpec { users: 10, ..desk_spec() }.to_json()).unwrap();
    put(dir, "sweep.json", &json!({ "base": base, "axis": axis, "values": values, "trials": trials }).to_string())
}

#[test]
fn sweep_output_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let spec = sweep_spec(dir.path(), "slot_T", &[0.05, 0.1, 0.2], 8);
    let a = meco(&["sweep", s(&spec)]);
    let b = meco(&["sweep", s(&spec)]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "axis_value,trial,policy,weighted_energy_J,lambda,mu,offloaded_bits_total,solve_iterations"
    );
    // (8 trials + 1 mean) × 3 values × 3 policies
    assert_eq!(text.lines().count(), 1 + 9 * 3 * 3);
    let c = meco(&["sweep", s(&spec), "--seed", "99"]);
    assert_ne!(c.stdout, b.stdout);
}

#[test]
fn cloud_sweep_is_monotone_and_ordered() {
    let dir = TempDir::new().unwrap();
    let values = [2e9, 4e9, 6e9, 8e9, 10e9];
    let spec = sweep_spec(dir.path(), "cloud_F", &values, 20);
    let out = dir.path().join("out.csv");
    let o = meco(&["sweep", s(&spec), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let mut rd = csv::Reader::from_path(&out).unwrap();
    let rows: Vec<(f64, String, String, f64)> = rd
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), r[1].to_string(), r[2].to_string(), r[3].parse().unwrap())
        })
        .collect();
    let get = |f: f64, trial: &str, policy: &str| {
        rows.iter().find(|r| r.0 == f && r.1 == trial && r.2 == policy).unwrap().3
    };
    let mut last = f64::INFINITY;
    for &f in &values {
        let e = get(f, "mean", "P1-optimal");
        assert!(e <= last * (1.0 + 1e-12), "F={f}");
        last = e;
        for t in 0..20 {
            let t = t.to_string();
            let opt = get(f, &t, "P1-optimal");
            assert!(opt <= get(f, &t, "suboptimal") * (1.0 + 1e-9));
            assert!(opt <= get(f, &t, "baseline") * (1.0 + 1e-9));
        }
    }
    // past saturation the optimum no longer moves
    let (hi, top) = (get(8e9, "mean", "P1-optimal"), get(10e9, "mean", "P1-optimal"));
    assert!((hi - top).abs() <= 1e-3 * top);
}
