//! Driver for the `feec-heat` binary.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use feec_heat_core::hodge::expected_harmonic_dim;
use feec_heat_core::mms::{convergence_study, run_level, CaseName, ManufacturedCase};
use feec_heat_core::verify::run_property_suite;
use feec_heat_core::Error;

use config::{Mode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_PROPERTY: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "feec-heat", version, about = "Mixed FEM solver for the Hodge heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study and write its CSV table.
    Convergence {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Solve on one mesh level and report final-time errors.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Defaults to the finest configured level.
        #[arg(long, value_name = "N")]
        level: Option<usize>,
    },
    /// Print simplex counts and Betti numbers of a case mesh.
    MeshInfo {
        #[arg(long, value_name = "NAME")]
        case: String,
        #[arg(long, value_name = "N", default_value_t = 0)]
        level: usize,
    },
    /// Run the invariant suite.
    Check,
}

/// A failure with its exit code; the message goes to standard error.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::Unsupported(_) | Error::Parse { .. } => EXIT_USAGE,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let result = match cli.command {
        Command::Convergence { config, out } => convergence(&config, out),
        Command::Run { config, out, level } => single_run(&config, out, level),
        Command::MeshInfo { case, level } => mesh_info(&case, level),
        Command::Check => check(),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("feec-heat: {}", f.message);
            f.code
        }
    }
}

fn load_config(path: &Path, mode: Mode) -> Result<RunConfig, Failure> {
    let cfg = RunConfig::load(path).map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(Failure::usage(format!(
                "{}: configured mode {m:?} does not match the command",
                path.display()
            )));
        }
    }
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure {
        code: EXIT_SOLVER,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// `t1.csv` -> `t1.csv.json`
fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn convergence(config: &Path, out: Option<PathBuf>) -> Result<i32, Failure> {
    let cfg = load_config(config, Mode::Convergence)?;
    if cfg.levels < 2 {
        return Err(Failure::usage("a convergence study needs levels >= 2"));
    }
    let case = cfg.manufactured_case();
    let table = convergence_study(&case, cfg.r, cfg.levels, cfg.dt, cfg.t_final, cfg.init)?;
    let csv = output::table_csv(&table);
    print!("{csv}");
    if let Some(path) = out.or_else(|| cfg.output.clone()) {
        let steps = (cfg.t_final / cfg.dt).round() as usize;
        write_file(&path, &csv)?;
        write_file(&sidecar(&path), &output::study_json(&cfg, &table, steps))?;
    }
    Ok(EXIT_OK)
}

fn single_run(config: &Path, out: Option<PathBuf>, level: Option<usize>) -> Result<i32, Failure> {
    let cfg = load_config(config, Mode::SingleRun)?;
    let level = level.unwrap_or(cfg.levels - 1);
    let case = cfg.manufactured_case();
    let run = run_level(&case, cfg.r, level, cfg.dt, cfg.t_final, cfg.init)?;
    let csv = output::run_csv(&run);
    print!("{csv}");
    if let Some(path) = out.or_else(|| cfg.output.clone()) {
        write_file(&path, &csv)?;
        write_file(&sidecar(&path), &output::run_json(&cfg, &run))?;
    }
    Ok(EXIT_OK)
}

/// `V=.. E=.. T=.. b1=..` in 2D; `V=.. E=.. F=.. T=.. b1=.. b2=..` in 3D
/// (`T` counts top cells in both).
pub fn mesh_info_line(case: CaseName, level: usize) -> Result<String, Error> {
    let mesh = ManufacturedCase::by_name(case).family().mesh(level)?;
    let b = mesh.betti_numbers();
    debug_assert_eq!(b[1], expected_harmonic_dim(&mesh));
    Ok(if mesh.dim() == 2 {
        format!(
            "V={} E={} T={} b1={}",
            mesh.num_simplices(0),
            mesh.num_simplices(1),
            mesh.num_simplices(2),
            b[1]
        )
    } else {
        format!(
            "V={} E={} F={} T={} b1={} b2={}",
            mesh.num_simplices(0),
            mesh.num_simplices(1),
            mesh.num_simplices(2),
            mesh.num_simplices(3),
            b[1],
            b[2]
        )
    })
}

fn mesh_info(case: &str, level: usize) -> Result<i32, Failure> {
    let case: CaseName = case.parse().map_err(|e: Error| Failure::usage(e.to_string()))?;
    println!("{}", mesh_info_line(case, level)?);
    Ok(EXIT_OK)
}

fn check() -> Result<i32, Failure> {
    let results = run_property_suite();
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure {
            code: EXIT_PROPERTY,
            message: format!("{failed} of {} properties failed", results.len()),
        });
    }
    println!("all {} properties passed", results.len());
    Ok(EXIT_OK)
}
