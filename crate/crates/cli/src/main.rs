//! `micromaser` command-line driver.
//!
//! Exit codes: 0 success, 1 failed verification or runtime error, 2 bad
//! flags, 3 sweep finished with some failed points.

mod args;
mod output;
mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use micromaser::{solve_adaptive, sweep, Error, ModelSpec, SweepTemplate};
use thiserror::Error as ThisError;

use args::{Cli, Command, GridArgs, ModelArgs, PnArgs, SolverArgs, SweepArgs, VerifyArgs};
use output::{float, RunManifest};

const BAD_FLAGS: u8 = 2;
const PARTIAL_SWEEP: u8 = 3;

#[derive(Debug, ThisError)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Sweep(a) => cmd_sweep(&a, &argv),
        Command::Pn(a) => cmd_pn(&a, &argv),
        Command::Verify(a) => cmd_verify(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Core(Error::Config(_) | Error::InvalidSector(_)) => {
                    ExitCode::from(BAD_FLAGS)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

/// Grid `from, from + step, ...` up to `to`, tolerant of rounding in the
/// step count.
fn d_grid(from: f64, to: f64, step: f64) -> micromaser::Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && from.is_finite() && to.is_finite() && to >= from) {
        return Err(Error::Config(format!(
            "need --D-step > 0 and --D-to >= --D-from (got {from}..{to} step {step})"
        )));
    }
    let q = (to - from) / step;
    let steps = if (q - q.round()).abs() <= 1e-9 * q.max(1.0) {
        q.round()
    } else {
        q.floor()
    };
    Ok((0..=steps as usize)
        .map(|i| from + step * i as f64)
        .collect())
}

fn model_parameters(m: &ModelArgs, s: &SolverArgs) -> Vec<(String, String)> {
    vec![
        ("model".into(), m.model.to_string()),
        ("N".into(), float(m.pump())),
        ("nbar".into(), float(m.nbar)),
        ("delta".into(), float(m.delta)),
        ("tol".into(), float(s.tol)),
        (
            "nmax0".into(),
            s.nmax0
                .map_or_else(|| "auto".to_string(), |n| n.to_string()),
        ),
    ]
}

fn emit(
    out: Option<&Path>,
    body: &str,
    argv: &[String],
    parameters: Vec<(String, String)>,
) -> CliResult<()> {
    match out {
        None => {
            io::stdout()
                .write_all(body.as_bytes())
                .map_err(io_error(Path::new("<stdout>")))?;
        }
        Some(path) => {
            fs::write(path, body).map_err(io_error(path))?;
            let manifest_path = RunManifest::path_for(path);
            let manifest = RunManifest {
                command_line: argv.to_vec(),
                parameters,
                seed: None,
                artifacts: vec![path.to_path_buf(), manifest_path.clone()],
            };
            let stamp = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
            fs::write(&manifest_path, manifest.render(&stamp)).map_err(io_error(&manifest_path))?;
        }
    }
    Ok(())
}

fn sweep_points(grid: &GridArgs, pump: f64) -> micromaser::Result<Vec<f64>> {
    match (grid.d, grid.d_from, grid.gtau) {
        (Some(d), None, None) => Ok(vec![d]),
        (None, Some(from), None) => d_grid(from, grid.d_to.unwrap(), grid.d_step.unwrap()),
        (None, None, Some(gtau)) => Ok(vec![pump.sqrt() * gtau]),
        _ => Err(Error::Config(
            "give exactly one of --D, --D-from/--D-to/--D-step, --gtau".into(),
        )),
    }
}

fn cmd_sweep(a: &SweepArgs, argv: &[String]) -> CliResult<ExitCode> {
    let template = SweepTemplate {
        variant: a.model.model,
        pump: a.model.pump(),
        nbar_th: a.model.nbar,
        delta: a.model.delta,
    };
    let ds = sweep_points(&a.grid, template.pump)?;
    if a.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()).into());
    }
    let rows = sweep(&template, &ds, &a.solver.settings(), a.threads)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();

    let mut parameters = model_parameters(&a.model, &a.solver);
    parameters.push(("points".into(), ds.len().to_string()));
    parameters.push(("threads".into(), a.threads.to_string()));
    emit(
        a.out.as_deref(),
        &output::sweep_csv(&rows),
        argv,
        parameters,
    )?;

    for r in rows.iter().filter(|r| !r.is_ok()) {
        if let micromaser::RowStatus::Failed(reason) = &r.status {
            eprintln!("D = {}: {reason}", r.d);
        }
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(PARTIAL_SWEEP)
    })
}

fn cmd_pn(a: &PnArgs, argv: &[String]) -> CliResult<ExitCode> {
    let pump = a.model.pump();
    let spec = match (a.point.d, a.point.gtau) {
        (Some(d), None) => {
            ModelSpec::at_pump_parameter(a.model.model, pump, a.model.nbar, d, a.model.delta)?
        }
        (None, Some(gtau)) => ModelSpec {
            variant: a.model.model,
            pump,
            nbar_th: a.model.nbar,
            gtau,
            delta: a.model.delta,
        },
        _ => return Err(Error::Config("give exactly one of --D, --gtau".into()).into()),
    };
    let (p, m) = solve_adaptive(&spec, &a.solver.settings())?;

    let mut header = vec![
        ("model", spec.variant.to_string()),
        ("N", float(spec.pump)),
        ("nbar", float(spec.nbar_th)),
        ("delta", float(spec.delta)),
        ("D", float(spec.pump_parameter())),
        ("gtau", float(spec.gtau)),
    ];
    header.extend(output::moments_fields(&m));
    let mut parameters = model_parameters(&a.model, &a.solver);
    parameters.push(("D".into(), float(spec.pump_parameter())));
    parameters.push(("gtau".into(), float(spec.gtau)));
    emit(
        a.out.as_deref(),
        &output::pn_csv(&header, &p),
        argv,
        parameters,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: &VerifyArgs) -> CliResult<ExitCode> {
    let checks = verify::run(a.suite, a.seed)?;
    let mut out = io::stdout().lock();
    let failed = checks.iter().filter(|c| !c.passed()).count();
    for c in &checks {
        writeln!(out, "{}", c.line()).ok();
    }
    writeln!(
        out,
        "summary passed={} failed={failed} seed={}",
        checks.len() - failed,
        a.seed
    )
    .ok();
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
