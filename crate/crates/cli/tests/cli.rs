use std::fs;
use std::path::Path;
use std::process::Command;

use homlab::ergodic::SubadditivityReport;
use homlab::{Interval1, Rational};
use homlab_cli::report::{emit_report, load_record, FAILURES_FILE, RECORD_FILE, SUMMARY_FILE};
use homlab_cli::runner::{run, CheckResult};
use homlab_cli::{parse_config, ExperimentConfig, ExperimentKind};

const GHOM_CONSTANT: &str = "
[experiment]
kind = ghom

[medium]
kind = constant
value = 2

[query]
zeta = [1]
nu = [0,1]/1

[schedule]
t = 8, 16

[seeds]
base = 7
count = 2
";

const FHOM_LAMINATE: &str = "
[experiment]
kind = fhom

[medium]
kind = laminate
axis = 0
period = 2
values = [1, 4]

[query]
xi = [1, 0]

[schedule]
t = 16, 32

[seeds]
count = 2
";

fn homlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homlab"))
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != RECORD_FILE)
        .map(|e| {
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn ghom_constant_entry_is_exact() {
    let record = run(&parse_config(GHOM_CONSTANT).unwrap()).unwrap();
    let entry = &record.tables[0].entries[0];
    assert_eq!(entry.estimate, 2.0);
    assert_eq!(entry.error_bar, 0.0);
    assert!(record.passed());
}

#[test]
fn fhom_laminate_near_harmonic_mean() {
    let record = run(&parse_config(FHOM_LAMINATE).unwrap()).unwrap();
    let est = record.tables[0].entries[0].estimate;
    assert!((est - 1.6).abs() / 1.6 <= 0.05, "{est}");
}

#[test]
fn quick_verify_structural_checks_pass() {
    let record = run(&ExperimentConfig::verify_defaults(true)).unwrap();
    for name in ["covariance", "subadditivity", "mincut_exactness", "bounds"] {
        assert!(
            record.checks.iter().any(|c| c.name == name),
            "{name} missing"
        );
    }
    let failures: Vec<_> = record.failures().iter().map(|c| c.line()).collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn series_file_has_header_and_one_row_per_seed_and_t() {
    let dir = tempfile::tempdir().unwrap();
    let record = run(&parse_config(GHOM_CONSTANT).unwrap()).unwrap();
    emit_report(&record, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("series_00.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "seed,t,value,normalized");
    assert_eq!(lines[1], "7,8,16,2");
    assert_eq!(lines[4], "8,16,32,2");
    let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 3);
}

#[test]
fn failed_subadditivity_is_listed() {
    let report = SubadditivityReport {
        seed: 42,
        interval: Interval1::new(Rational::from_integer(0), Rational::from_integer(6)).unwrap(),
        cuts: vec![Rational::from_integer(2)],
        whole_units: 10,
        parts_units: 9,
        slack: -1.0,
        pass: false,
    };
    let mut record = run(&parse_config(GHOM_CONSTANT).unwrap()).unwrap();
    record.checks.push(CheckResult {
        name: "subadditivity".into(),
        pass: report.pass,
        detail: report.to_string(),
    });
    let dir = tempfile::tempdir().unwrap();
    emit_report(&record, dir.path()).unwrap();
    let failures = fs::read_to_string(dir.path().join(FAILURES_FILE)).unwrap();
    assert_eq!(
        failures.trim_end(),
        "FAIL subadditivity subadditivity seed=42 interval=[0,6) cuts=[2] slack=-1e0"
    );
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert!(summary.contains("status = FAIL"));
    assert_eq!(load_record(dir.path()).unwrap(), record);
}

#[test]
fn identical_configs_give_identical_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(
        GHOM_CONSTANT
            .replace(
                "constant\nvalue = 2",
                "iid_cells\nvalues = [1, 3]\nprob = 0.5",
            )
            .as_str(),
    )
    .unwrap();
    for sub in ["a", "b"] {
        emit_report(&run(&cfg).unwrap(), &dir.path().join(sub)).unwrap();
    }
    assert_eq!(
        data_files(&dir.path().join("a")),
        data_files(&dir.path().join("b"))
    );
}

#[test]
fn binary_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ghom.cfg");
    fs::write(&cfg, GHOM_CONSTANT).unwrap();
    let out = dir.path().join("out");
    let status = homlab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success());
    assert!(String::from_utf8_lossy(&status.stdout).contains("status = PASS"));
    let before = data_files(&out);
    let report = homlab().arg("report").arg(&out).output().unwrap();
    assert!(report.status.success());
    assert_eq!(before, data_files(&out));
}

#[test]
fn binary_reports_parse_errors_with_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[experiment]\nkind = ghom\n[seeds]\ncount = many\n").unwrap();
    let out = homlab().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("line 4") && err.contains("seeds.count"),
        "{err}"
    );
}

#[test]
fn binary_exits_nonzero_with_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("budget.cfg");
    fs::write(&cfg, format!("{GHOM_CONSTANT}\n[solver]\nbudget = 200\n")).unwrap();
    let out_dir = dir.path().join("out");
    let out = homlab()
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let failures = fs::read_to_string(out_dir.join(FAILURES_FILE)).unwrap();
    assert!(failures.starts_with("FAIL budget"), "{failures}");
}

#[test]
fn binary_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let out = homlab()
        .args([
            "calibrate",
            "--nu",
            "3,4/5",
            "--neighborhood",
            "n4",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("calibration.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("[3,4]/5,n4,32,1.4"));
}

#[test]
fn kind_defaults_are_valid() {
    for kind in [
        ExperimentKind::Fhom,
        ExperimentKind::Ghom,
        ExperimentKind::Verify,
        ExperimentKind::Calibrate,
        ExperimentKind::Table,
    ] {
        let c = ExperimentConfig::defaults(kind);
        c.validate().unwrap();
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
    }
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let c = parse_config(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(parse_config(&c.serialize()).unwrap(), c);
        seen += 1;
    }
    assert!(seen >= 4);
}
