use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use contint_cli::config::{CriterionChoice, Expectation, ExperimentConfig, Kind, Preset};
use proptest::prelude::*;

fn contint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_contint"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn body(report: &str) -> String {
    report.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
}

fn header_value<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# {key}=");
    report.lines().find_map(|l| l.strip_prefix(prefix.as_str()))
}

/// The embedded config, reassembled from its continuation lines.
fn header_config(report: &str) -> String {
    let mut lines = report.lines().skip_while(|l| !l.starts_with("# config="));
    let first = lines.next().unwrap().trim_start_matches("# config=").to_string();
    let rest = lines.map_while(|l| l.strip_prefix("#   ").or(if l == "#" { Some("") } else { None }));
    std::iter::once(first).chain(rest.map(str::to_string)).collect::<Vec<_>>().join("\n")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn contact_form_has_unit_defect() {
    let out = contint(&["frobenius", "--form", "dz - y*dx", "--lattice", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let defect: f64 = header_value(&text, "max_defect").unwrap().parse().unwrap();
    assert!((defect - 1.0).abs() <= 1e-12, "{text}");
    for row in body(&text).lines().skip(1) {
        let last: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((last - 1.0).abs() <= 1e-12, "{row}");
    }
    assert_eq!(header_value(&text, "overall_verdict"), Some("Fails"));
}

#[test]
fn involutive_form_has_zero_defect() {
    let out = contint(&["frobenius", "--form", "dz - x*dx", "--lattice", "3"]);
    let text = stdout(&out);
    let defect: f64 = header_value(&text, "max_defect").unwrap().parse().unwrap();
    assert_eq!(defect, 0.0);
    assert_eq!(header_value(&text, "overall_verdict"), Some("Holds"));
}

#[test]
fn log_hoelder_example_holds() {
    let out = contint(&[
        "ode", "check", "--example", "paper-ex1", "--alpha", "0.9", "--beta", "0.5", "--gamma", "0.5", "--delta",
        "0.5", "--expect", "holds",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(header_value(&text, "overall_verdict"), Some("Holds"));
    assert_eq!(header_value(&text, "component"), Some("y"));
}

#[test]
fn contradicted_expectation_exits_two() {
    let out = contint(&["ode", "check", "--example", "peano", "--expect", "holds"]);
    assert_eq!(out.status.code(), Some(2));
    let out = contint(&["ode", "check", "--example", "peano", "--expect", "fails"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_config_exits_one() {
    let out = contint(&["run", "--config", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing.cfg") && err.contains("No such file"), "{err}");
}

#[test]
fn malformed_input_reports_position_and_operation() {
    let dir = scratch("malformed");
    let path = dir.join("bad.toml");
    fs::write(&path, "[experiment]\nkind = \"frobenius\"\n\n[params]\nlatice = 3\n").unwrap();
    let out = contint(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 5") && err.contains("latice"), "{err}");

    let out = contint(&["frobenius", "--form", "dz - y*"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("frobenius failed") && err.contains("column"), "{err}");
}

#[test]
fn repeated_runs_give_identical_bodies() {
    let args = ["ode", "funnel", "--example", "peano", "--deltas", "1e-2,1e-3,1e-4", "--ensemble", "3", "--seed", "9"];
    let a = stdout(&contint(&args));
    let b = stdout(&contint(&args));
    assert!(!body(&a).is_empty());
    assert_eq!(body(&a), body(&b));
}

#[test]
fn header_config_reproduces_the_run() {
    let dir = scratch("provenance");
    let first = stdout(&contint(&["dyn", "dominate", "--example", "cat-map", "--k-max", "6", "--lattice", "3"]));
    let config = header_config(&first);
    let parsed = ExperimentConfig::from_toml(&config).unwrap();
    assert_eq!(parsed.experiment.kind, Kind::DynDominate);
    assert!(parsed.system.map.is_some(), "preset is expanded in the header");
    let path = dir.join("replay.toml");
    fs::write(&path, &config).unwrap();
    let again = contint(&["run", "--config", path.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0), "{}", String::from_utf8_lossy(&again.stderr));
    let written = fs::read_to_string(dir.join("dyn-dominate.csv")).unwrap();
    assert_eq!(body(&written), body(&first));
}

#[test]
fn every_example_preset_runs() {
    let cases: &[&[&str]] = &[
        &["pde", "check", "--example", "paper-ex2", "--expect", "holds"],
        &["pde", "check", "--example", "paper-ex3", "--expect", "holds"],
        &["pde", "solve-special", "--example", "paper-ex2", "--grid", "3", "--expect", "holds"],
        &["surface", "--example", "contact", "--grid", "5", "--lattice", "3", "--expect", "holds"],
        &["dyn", "transport", "--example", "skew-product", "--k-max", "4", "--lattice", "3"],
        &["dyn", "traces", "--example", "cat-map", "--k-max", "4", "--lattice", "3", "--expect", "holds"],
        &["moduli", "--modulus", "loglip(beta=1)", "--expect", "holds"],
        &["mollify", "--function", "abs(x)", "--modulus", "lipschitz(k=1)", "--names", "x", "--lo", "-1", "--hi", "1"],
    ];
    for args in cases {
        let out = contint(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(header_value(&stdout(&out), "config").is_some(), "{args:?}");
    }
}

fn kind() -> impl Strategy<Value = Kind> {
    prop_oneof![
        Just(Kind::ModuliCheck),
        Just(Kind::Frobenius),
        Just(Kind::OdeFunnel),
        Just(Kind::PdeFrames),
        Just(Kind::DynTraces),
    ]
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, 1e-12f64..1e-3]
}

fn text() -> impl Strategy<Value = String> {
    "[a-z0-9_ *+().^-]{0,12}"
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (kind(), prop::option::of(Just(Preset::CatMap)), prop::option::of(Just(Expectation::Fails)), 0..=i64::MAX as u64),
        (
            prop::option::of(prop::collection::vec(text(), 0..4)),
            prop::option::of(prop::collection::vec(prop::collection::vec(text(), 1..3), 0..3)),
            prop::option::of(prop::collection::vec(prop::collection::vec(finite(), 0..3), 0..3)),
            prop::option::of(any::<bool>()),
        ),
        (
            prop::option::of(finite()),
            prop::option::of(prop::collection::vec(finite(), 0..5)),
            prop::option::of(0usize..1000),
            prop::option::of(Just(CriterionChoice::Limit)),
        ),
    )
        .prop_map(|(e, s, p)| {
            let mut c = ExperimentConfig::new(e.0);
            c.experiment.preset = e.1;
            c.experiment.expect = e.2;
            c.experiment.seed = e.3;
            c.system.rhs = s.0;
            c.system.matrix = s.1;
            c.system.initial = s.2;
            c.system.torus = s.3;
            c.params.eps1 = p.0;
            c.params.eps = p.1;
            c.params.grid = p.2;
            c.params.criterion = p.3;
            c
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn configs_round_trip_through_text(c in config()) {
        let text = c.to_toml().unwrap();
        prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_never_parse(c in config(), section in prop_oneof![Just("experiment"), Just("system"), Just("params")], key in "[a-z]{3,8}_x") {
        let mut table: toml::Table = toml::from_str(&c.to_toml().unwrap()).unwrap();
        table
            .entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .unwrap()
            .insert(key.clone(), toml::Value::Integer(1));
        let err = ExperimentConfig::from_toml(&toml::to_string(&table).unwrap()).unwrap_err();
        prop_assert!(err.to_string().contains(&key), "{}", err);
    }
}
