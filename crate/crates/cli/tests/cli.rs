use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use feec_heat_cli::config::RunConfig;
use feec_heat_cli::output::{fmt_f64, CSV_HEADER};

fn feec_heat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feec-heat")).args(args).output().expect("spawn feec-heat")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = "case = annulus2d\nr = 1\nlevels = 2\ndt = 2e-3\nt_final = 0.01\n";

#[test]
fn mesh_info_prints_counts() {
    let o = feec_heat(&["mesh-info", "--case", "annulus2d", "--level", "1"]);
    assert_eq!(o.status.code(), Some(0));
    // one refinement: V + E new vertices, 2E + 3T edges, 4T triangles
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "V=72 E=168 T=96 b1=1");
}

#[test]
fn usage_errors_exit_one_with_message() {
    let o = feec_heat(&["convergence", "--frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.cfg", "case = annulus2d\nr = 3\nlevels = 2\ndt = 1e-3\nt_final = 0.01\n");
    let o = feec_heat(&["convergence", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("r = 3"));

    let one = write_config(dir.path(), "one.cfg", "case = annulus2d\nr = 1\nlevels = 1\ndt = 1e-3\nt_final = 0.01\n");
    assert_eq!(feec_heat(&["convergence", "--config", &one]).status.code(), Some(1));

    let mode = write_config(dir.path(), "mode.cfg", &format!("{SMALL}mode = run\n"));
    assert_eq!(feec_heat(&["convergence", "--config", &mode]).status.code(), Some(1));
}

#[test]
fn convergence_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("t.csv");
    let o = feec_heat(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], CSV_HEADER);
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((first[0], first[3], first[5], first[7]), ("0", "", "", ""));
    let second: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(second.len(), 8);
    let first: Vec<f64> = lines[1].split(',').filter(|f| !f.is_empty()).map(|f| f.parse().unwrap()).collect();
    assert!(second[2] < first[2] && second[4] < first[3] && second[6] < first[4]);
    assert!(second[3] > 1.5);

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.csv.json")).unwrap()).unwrap();
    assert_eq!(json["mode"], "convergence");
    assert_eq!(json["steps"], 5);
    assert_eq!(json["config"]["case"], "annulus2d");
    assert_eq!(json["mesh_sizes"].as_array().unwrap().len(), 2);
}

#[test]
fn single_run_reports_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.cfg", SMALL);
    let out = dir.path().join("r.csv");
    let o = feec_heat(&["run", "--config", &cfg, "--level", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.csv.json")).unwrap()).unwrap();
    assert_eq!(json["level"], 0);
    assert_eq!(json["harmonic_dim"], 1);
    assert!(json["max_codifferential_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn check_passes() {
    let o = feec_heat(&["check"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 7);
}

proptest! {
    #[test]
    fn fmt_f64_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn valid_configs_parse(
        levels in 1usize..6,
        steps in 1usize..500,
        k in 2i32..5,
        base in 1usize..9,
        zero in any::<bool>(),
        comment in "[a-z ]{0,12}",
    ) {
        let dt = 10f64.powi(-k);
        let t_final = steps as f64 * dt;
        let init = if zero { "zero" } else { "elliptic_projection" };
        let text = format!(
            "# {comment}\ncase = cube3d\nr = 1\n  levels={levels}\ndt = {dt:e}\nt_final = {t_final:e} # {comment}\nbase_resolution = {base}\ninit = {init}\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        prop_assert_eq!((c.levels, c.base_resolution, c.dim), (levels, base, 3));
        prop_assert_eq!((c.dt, c.t_final), (dt, t_final));
    }

    #[test]
    fn unknown_keys_are_rejected(key in "[a-z]{3,10}") {
        prop_assume!(!["case", "levels", "t_final", "init", "output", "mode"].contains(&key.as_str()));
        let text = format!("{SMALL}{key} = 1\n");
        prop_assert!(RunConfig::parse(&text).is_err());
    }
}
