//! Plain-text CSV exchange for trajectories and simulation logs.
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so a
//! written file parses back to bit-identical values and diffs between runs
//! are meaningful.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use thiserror::Error;

use crate::analysis::Trajectory;
use crate::multiagent::StepRecord;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid trajectory: {0}")]
    Invalid(String),
}

fn io_err(path: &Path, source: std::io::Error) -> CsvError {
    CsvError::Io { path: path.display().to_string(), source }
}

/// Writes `t,y1,...,yn[,dy1,...,dyn]` rows, one per sample.
pub fn write_trajectory<W: Write>(w: &mut W, traj: &Trajectory) -> std::io::Result<()> {
    let n = traj.dimension();
    write!(w, "t")?;
    for i in 1..=n {
        write!(w, ",y{i}")?;
    }
    if traj.has_derivatives() {
        for i in 1..=n {
            write!(w, ",dy{i}")?;
        }
    }
    writeln!(w)?;
    for (k, (t, y)) in traj.times().iter().zip(traj.states()).enumerate() {
        write!(w, "{t}")?;
        for v in y.iter() {
            write!(w, ",{v}")?;
        }
        if let Some(d) = traj.derivatives() {
            for v in d[k].iter() {
                write!(w, ",{v}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_trajectory_file(path: &Path, traj: &Trajectory) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_trajectory(&mut w, traj).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_trajectory<R: Read>(r: R) -> Result<Trajectory, CsvError> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, Ok(h))) => h,
        Some((_, Err(e))) => return Err(CsvError::Header(e.to_string())),
        None => return Err(CsvError::Header("empty file".into())),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(CsvError::Header(format!(
            "first column must be 't', got '{}'",
            cols.first().unwrap_or(&"")
        )));
    }
    let mut n = 0;
    while n + 1 < cols.len() && cols[n + 1] == format!("y{}", n + 1) {
        n += 1;
    }
    if n == 0 {
        return Err(CsvError::Header("no y columns found".into()));
    }
    let with_derivs = cols.len() == 1 + 2 * n;
    let expected_cols = if with_derivs { 1 + 2 * n } else { 1 + n };
    if cols.len() != expected_cols {
        return Err(CsvError::Header(format!(
            "expected columns t,y1..y{n} or t,y1..y{n},dy1..dy{n}, got {} columns",
            cols.len()
        )));
    }
    if with_derivs {
        for i in 1..=n {
            if cols[n + i] != format!("dy{i}") {
                return Err(CsvError::Header(format!(
                    "column {} should be 'dy{i}', got '{}'",
                    n + i + 1,
                    cols[n + i]
                )));
            }
        }
    }

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut derivs = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CsvError::Parse { line: idx + 1, msg: e.to_string() })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            return Err(CsvError::Parse {
                line: idx + 1,
                msg: format!("expected {expected_cols} fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64, CsvError> {
            s.parse::<f64>().map_err(|e| CsvError::Parse {
                line: idx + 1,
                msg: format!("'{s}': {e}"),
            })
        };
        times.push(parse(fields[0])?);
        let mut y = DVector::zeros(n);
        for i in 0..n {
            y[i] = parse(fields[1 + i])?;
        }
        states.push(y);
        if with_derivs {
            let mut d = DVector::zeros(n);
            for i in 0..n {
                d[i] = parse(fields[1 + n + i])?;
            }
            derivs.push(d);
        }
    }
    Trajectory::new(times, states, with_derivs.then_some(derivs))
        .map_err(|e| CsvError::Invalid(e.to_string()))
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory, CsvError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_trajectory(file)
}

/// Writes the per-agent step log: `t,agent,u,g_minus,g_plus`.
pub fn write_step_log<W: Write>(w: &mut W, log: &[StepRecord]) -> std::io::Result<()> {
    writeln!(w, "t,agent,u,g_minus,g_plus")?;
    for rec in log {
        for i in 0..rec.u.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                rec.t, i, rec.u[i], rec.g_minus[i], rec.g_plus[i]
            )?;
        }
    }
    Ok(())
}

pub fn write_step_log_file(path: &Path, log: &[StepRecord]) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_step_log(&mut w, log).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes realized perturbations per directed edge:
/// `t,observer,neighbor,p`. `directed` lists (observer, neighbor) pairs in
/// the same order as `StepRecord::perturbations`.
pub fn write_perturbations<W: Write>(
    w: &mut W,
    log: &[StepRecord],
    directed: &[(usize, usize)],
) -> std::io::Result<()> {
    writeln!(w, "t,observer,neighbor,p")?;
    for rec in log {
        for (e, &(obs, nb)) in directed.iter().enumerate() {
            writeln!(w, "{},{},{},{}", rec.t, obs, nb, rec.perturbations[e])?;
        }
    }
    Ok(())
}

pub fn write_perturbations_file(
    path: &Path,
    log: &[StepRecord],
    directed: &[(usize, usize)],
) -> Result<(), CsvError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_perturbations(&mut w, log, directed).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
