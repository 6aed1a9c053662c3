//! CSV tables and JSON run metadata.

use serde::Serialize;

use feec_heat_core::mms::{ConvergenceTable, InitKind, LevelRun};

use crate::config::RunConfig;

pub const CSV_HEADER: &str = "level,h,err_sigma,rate_sigma,err_dsigma,rate_dsigma,err_u,rate_u";

/// Round-trip (17 significant digit) scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_rate(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn table_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &table.rows {
        let e = &row.errors;
        let r = row.rates;
        let fields = [
            row.level.to_string(),
            fmt_f64(row.h),
            fmt_f64(e.sigma),
            fmt_rate(r.map(|r| r.sigma)),
            fmt_f64(e.dsigma),
            fmt_rate(r.map(|r| r.dsigma)),
            fmt_f64(e.u),
            fmt_rate(r.map(|r| r.u)),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn run_csv(run: &LevelRun) -> String {
    let e = &run.errors;
    format!(
        "{CSV_HEADER}\n{},{},{},,{},,{},\n",
        run.level,
        fmt_f64(run.h),
        fmt_f64(e.sigma),
        fmt_f64(e.dsigma),
        fmt_f64(e.u)
    )
}

#[derive(Debug, Serialize)]
struct ConfigMeta<'a> {
    case: &'a str,
    r: usize,
    dim: usize,
    levels: usize,
    dt: f64,
    t_final: f64,
    base_resolution: usize,
    init: &'static str,
}

impl<'a> ConfigMeta<'a> {
    fn new(cfg: &'a RunConfig) -> Self {
        Self {
            case: cfg.case.as_str(),
            r: cfg.r,
            dim: cfg.dim,
            levels: cfg.levels,
            dt: cfg.dt,
            t_final: cfg.t_final,
            base_resolution: cfg.base_resolution,
            init: match cfg.init {
                InitKind::Zero => "zero",
                InitKind::EllipticProjection => "elliptic_projection",
            },
        }
    }
}

#[derive(Debug, Serialize)]
struct StudyMeta<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    config: ConfigMeta<'a>,
    steps: usize,
    mesh_sizes: Vec<f64>,
    final_rates: Option<[f64; 3]>,
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'static str,
    config: ConfigMeta<'a>,
    level: usize,
    h: f64,
    steps: usize,
    sigma_dofs: usize,
    u_dofs: usize,
    harmonic_dim: Option<usize>,
    max_codifferential_residual: f64,
}

/// Deterministic metadata for a study (no timestamps or host data).
pub fn study_json(cfg: &RunConfig, table: &ConvergenceTable, steps: usize) -> String {
    let meta = StudyMeta {
        tool: "feec-heat",
        version: env!("CARGO_PKG_VERSION"),
        mode: "convergence",
        config: ConfigMeta::new(cfg),
        steps,
        mesh_sizes: table.rows.iter().map(|r| r.h).collect(),
        final_rates: table.final_rates().map(|r| [r.sigma, r.dsigma, r.u]),
    };
    serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"
}

pub fn run_json(cfg: &RunConfig, run: &LevelRun) -> String {
    let meta = RunMeta {
        tool: "feec-heat",
        version: env!("CARGO_PKG_VERSION"),
        mode: "run",
        config: ConfigMeta::new(cfg),
        level: run.level,
        h: run.h,
        steps: run.steps,
        sigma_dofs: run.n_sigma,
        u_dofs: run.n_u,
        harmonic_dim: run.harmonic_dim,
        max_codifferential_residual: run.max_codifferential_residual,
    };
    serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use feec_heat_core::mms::{CaseName, ErrorNorms};

    #[test]
    fn csv_layout() {
        let e = |s: f64| ErrorNorms { sigma: s, dsigma: 10.0 * s, u: 0.5 * s };
        let t = ConvergenceTable::from_errors(CaseName::Cube3d, 1, 1e-4, 0.01, 4, vec![(0, 0.25, e(0.4)), (1, 0.125, e(0.1))]);
        let csv = table_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "0,2.5000000000000000e-1,4.0000000000000002e-1,,4.0000000000000000e0,,2.0000000000000001e-1,"
        );
        let cells: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[3], "2.0000000000000000e0");
        assert_eq!(cells[3].parse::<f64>().unwrap(), 2.0);
    }

    #[test]
    fn fmt_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, 5e-324, 1.7976931348623157e308] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
