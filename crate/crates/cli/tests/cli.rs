//! End-to-end runs of the `spinmem` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PRESETS: [&str; 5] = [
    "free-electron",
    "P:Si-like",
    "Bi:Si-like",
    "3D-cavity-Xband",
    "planar-LC-probst-like",
];

fn spinmem(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinmem"))
        .args(args)
        .env("SPINMEM_OUT", out)
        .output()
        .expect("binary runs")
}

fn written(o: &Output) -> Vec<PathBuf> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .map(PathBuf::from)
        .collect()
}

fn report(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json = written(o)
        .into_iter()
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .expect("json report");
    serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap()
}

fn drop_nulls(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|_, x| !x.is_null());
            m.values_mut().for_each(drop_nulls);
        }
        Value::Array(a) => a.iter_mut().for_each(drop_nulls),
        _ => {}
    }
}

fn scenario_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn presets_are_listed_and_valid() {
    let dir = tempfile::tempdir().unwrap();
    let o = spinmem(&["presets"], dir.path());
    let listed: Vec<String> = String::from_utf8(o.stdout).unwrap().lines().map(String::from).collect();
    assert_eq!(listed, PRESETS);
    for p in PRESETS {
        let o = spinmem(&["validate", "--preset", p], dir.path());
        assert!(o.status.success(), "{p}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn bismuth_has_four_clock_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&spinmem(&["clock-find", "--preset", "Bi:Si-like"], dir.path()));
    assert_eq!(r["results"]["count"], 4);
    let fields: Vec<f64> = r["results"]["clock_transitions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["field_t"].as_f64().unwrap())
        .collect();
    for (f, want) in fields.iter().zip([0.026673, 0.079959, 0.133539, 0.188181]) {
        assert!((f - want).abs() < 1e-5, "{fields:?}");
    }
    let r = report(&spinmem(&["clock-find", "--preset", "P:Si-like"], dir.path()));
    assert_eq!(r["results"]["count"], 0);
}

#[test]
fn sensitivity_report_against_reference() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(&spinmem(
        &["sensitivity", "--preset", "planar-LC-probst-like"],
        dir.path(),
    ));
    let res = &r["results"];
    assert_eq!(res["reference"]["spins_per_rt_hz"], 65.0);
    let model = res["report"]["n_min_per_rt_hz"].as_f64().unwrap();
    assert!(model > 65.0 / 4.0 && model < 65.0 * 4.0, "{model}");
    assert!(r["assumptions"].as_array().unwrap().iter().any(|a| a == "resonator.q"));
}

#[test]
fn runs_are_deterministic_apart_from_timestamp() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ra = report(&spinmem(
        &["memory-sim", "--preset", "3D-cavity-Xband", "--format", "json"],
        a.path(),
    ));
    let mut rb = report(&spinmem(
        &["memory-sim", "--preset", "3D-cavity-Xband", "--format", "json"],
        b.path(),
    ));
    ra["timestamp"] = Value::Null;
    rb["timestamp"] = Value::Null;
    assert_eq!(ra, rb);

    let sa = report(&spinmem(
        &["sweep", "--preset", "3D-cavity-Xband", "--threads", "3"],
        a.path(),
    ));
    let sb = report(&spinmem(
        &["sweep", "--preset", "3D-cavity-Xband", "--threads", "1"],
        b.path(),
    ));
    assert_eq!(sa["results"], sb["results"]);
}

#[test]
fn seed_override_changes_sampled_detunings() {
    let dir = tempfile::tempdir().unwrap();
    let a = report(&spinmem(
        &["memory-sim", "--preset", "3D-cavity-Xband", "--seed", "1"],
        dir.path(),
    ));
    let b = report(&spinmem(
        &["memory-sim", "--preset", "3D-cavity-Xband", "--seed", "2"],
        dir.path(),
    ));
    assert_eq!(a["seed"], 1);
    assert_ne!(
        a["results"]["multimode"]["fidelity"],
        b["results"]["multimode"]["fidelity"]
    );
}

#[test]
fn lifetime_violation_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario_file(
        dir.path(),
        "bad.toml",
        "name = \"bad\"\n\n[lifetimes]\nt1_s = 1.0\nt2_s = 3.0\n",
    );
    let o = spinmem(&["validate", "--scenario", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("bad.toml:5: lifetimes.t2_s"), "{err}");
    assert!(err.contains("T2 ≤ 2T1"), "{err}");
}

#[test]
fn sampled_detunings_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let src = "name = \"noseed\"\n\n[memory]\nn_spins = 8\ng0_hz = 1e3\nkappa_hz = 1e2\ndetuning = { shape = \"gaussian\", fwhm_hz = 1e2 }\n";
    let p = scenario_file(dir.path(), "noseed.toml", src);
    let o = spinmem(&["memory-sim", "--scenario", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("seed is required"));
}

#[test]
fn unknown_keys_are_rejected_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = scenario_file(
        dir.path(),
        "typo.toml",
        "name = \"t\"\n\n[resonator]\nfrequency_hz = 1e9\nqq = 10.0\n",
    );
    let o = spinmem(&["validate", "--scenario", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("typo.toml:5"));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let src = "name = \"dark\"\n\n[memory]\nn_spins = 4\ng0_hz = 0.0\nkappa_hz = 1e3\ngamma2_per_s = 0.0\n";
    let p = scenario_file(dir.path(), "dark.toml", src);
    let o = spinmem(&["memory-sim", "--scenario", p.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn inputs_round_trip_to_a_valid_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, preset) in [
        ("regime", "3D-cavity-Xband"),
        ("sensitivity", "planar-LC-probst-like"),
        ("coupling", "free-electron"),
    ] {
        let r = report(&spinmem(&[cmd, "--preset", preset], dir.path()));
        let mut inputs = r["inputs"].clone();
        drop_nulls(&mut inputs);
        let text = toml::to_string(&inputs).unwrap();
        let p = scenario_file(dir.path(), "round.toml", &text);
        let o = spinmem(&["validate", "--scenario", p.to_str().unwrap()], dir.path());
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let again = report(&spinmem(&[cmd, "--scenario", p.to_str().unwrap()], dir.path()));
        assert_eq!(again["results"], r["results"], "{cmd}");
    }
}

#[test]
fn csv_headers_carry_units() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, preset) in [
        ("spectrum", "free-electron"),
        ("purcell", "free-electron"),
        ("memory-sim", "3D-cavity-Xband"),
    ] {
        let o = spinmem(&[cmd, "--preset", preset, "--format", "csv"], dir.path());
        assert!(o.status.success());
        let files = written(&o);
        assert!(!files.is_empty() && files.iter().all(|p| p.extension().is_some_and(|e| e == "csv")));
        for f in files {
            let mut rd = csv::Reader::from_path(&f).unwrap();
            let units = [
                "_t",
                "_hz",
                "_s",
                "_per_s",
                "_dimensionless",
                "_photons",
                "_index",
                "_per_t",
                "_per_t2",
            ];
            for h in rd.headers().unwrap() {
                assert!(units.iter().any(|u| h.ends_with(u)), "{}: {h}", f.display());
            }
            assert!(rd.records().count() > 0);
        }
    }
}
