use std::path::PathBuf;
use std::process::{Command, Output};

use qkd_metro::calibrate::{calibrate, AnchorSet, FreeParam};
use qkd_metro::config::parse_settings;
use qkd_metro::network::{ScenarioKind, ScenarioSettings};
use qkd_metro::sweep::read_csv;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkd-metro")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn rekey_subcommand() {
    let o = run(&["rekey", "--total-bps", "3.84e11", "--key-rate", "1000", "--key-bits", "256"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "9.8304e10");
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["teleport"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(!o.stderr.is_empty());
}

#[test]
fn gpon_sweep_reaches_zero_rate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gpon.csv");
    let svg = dir.path().join("gpon.svg");
    let o = run(&[
        "sweep",
        "--config",
        configs().join("gpon.conf").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let records = read_csv(std::fs::File::open(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 11);
    assert!(records[0].secret_bps > 0.0);
    assert!(records.iter().filter(|r| r.length_km >= 4.5).all(|r| r.secret_bps == 0.0));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn config_errors_report_line_and_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "[scenario]\nkind = gpon\n[filter]\nwidth = 0.4\n").unwrap();
    let o = run(&["optimize-mu", "--config", conf.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    let missing = run(&["path-loss", "--config", dir.path().join("none.conf").to_str().unwrap(), "--wavelength", "1550"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("split.conf");
    std::fs::write(&conf, "[scenario]\nkind = gpon\nsplitter_ratio = 8\n").unwrap();
    assert_eq!(run(&["optimize-mu", "--config", conf.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["rekey", "--total-bps=-1", "--key-rate", "1", "--key-bits", "1"]).status.code(), Some(1));
}

#[test]
fn path_loss_with_budget() {
    let o = run(&[
        "path-loss",
        "--config",
        configs().join("backbone.conf").to_str().unwrap(),
        "--wavelength",
        "1550",
        "--length-km",
        "10",
        "--budget-db",
        "15",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let loss: f64 = text.lines().next().unwrap().parse().unwrap();
    assert!((loss - (8.0 + 10.1 * 0.21 + 4.0 * 0.5)).abs() < 1e-9, "{loss}");
    assert!(text.contains("feasible"));
}

#[test]
fn calibrate_writes_loadable_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fitted.conf");
    let o = run(&[
        "calibrate",
        "--config",
        configs().join("backbone_50ghz.conf").to_str().unwrap(),
        "--anchors",
        configs().join("paper_anchors.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (fitted, _) = parse_settings(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(fitted.filter.width_nm, 0.4);
    let s = fitted.build().unwrap();
    let secret = s.evaluate_link_lenient(6.0).unwrap().rates.secret_bps;
    assert!((250.0..=1000.0).contains(&secret));
    assert!(stdout(&o).contains("residual"));
}

#[test]
fn calibrate_rejects_unknown_free_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "calibrate",
        "--config",
        configs().join("gpon.conf").to_str().unwrap(),
        "--anchors",
        configs().join("paper_anchors.csv").to_str().unwrap(),
        "--out",
        dir.path().join("x.conf").to_str().unwrap(),
        "--free",
        "rho:ssmf,gain",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn calibration_is_deterministic_and_beats_the_grid() {
    let anchors = AnchorSet::from_csv(std::fs::File::open(configs().join("paper_anchors.csv")).unwrap()).unwrap();
    let base = ScenarioSettings::defaults(ScenarioKind::Gpon);
    let params = FreeParam::default_set(ScenarioKind::Gpon);
    let a = calibrate(&base, &anchors, &params).unwrap();
    let b = calibrate(&base, &anchors, &params).unwrap();
    assert_eq!(a, b);
    assert!(a.residual <= a.grid_best);
}

#[test]
fn shipped_configs_parse() {
    for name in ["backbone.conf", "backbone_50ghz.conf", "backbone_two_fiber.conf", "gpon.conf"] {
        let text = std::fs::read_to_string(configs().join(name)).unwrap();
        let (settings, spec) = parse_settings(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        settings.build().unwrap();
        assert!(!spec.lengths().is_empty());
    }
}
