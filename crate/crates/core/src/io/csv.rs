//! CSV writers. Column order is fixed per table; floats use the shortest
//! representation that round-trips, switching to exponent form for very
//! large or small magnitudes.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::forward::DiagnosticsRow;
use crate::optimize::{GradCheckRow, IterRecord};
use crate::second_order::CurvatureRow;

pub fn write_table<R, F>(path: impl AsRef<Path>, header: &[&str], rows: &[R], cells: F) -> Result<()>
where
    F: Fn(&R) -> Vec<String>,
{
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", cells(r).join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn s(v: impl Display) -> String {
    v.to_string()
}

fn f(v: f64) -> String {
    format!("{v:?}")
}

/// `t,energy,mass,enstrophy,grad_mu_sq,max_speed`
pub fn write_diagnostics(path: impl AsRef<Path>, rows: &[DiagnosticsRow]) -> Result<()> {
    write_table(path, &DiagnosticsRow::HEADER, rows, |r| r.values().iter().map(|&v| f(v)).collect())
}

/// `iter,J,grad_norm,step,backtracks`
pub fn write_history(path: impl AsRef<Path>, rows: &[IterRecord]) -> Result<()> {
    write_table(path, &IterRecord::HEADER, rows, |r| {
        vec![s(r.iter), f(r.cost), f(r.grad_norm), f(r.step), s(r.backtracks)]
    })
}

/// `direction,eps,fd_value,adjoint_value,rel_err`
pub fn write_gradcheck(path: impl AsRef<Path>, rows: &[GradCheckRow]) -> Result<()> {
    write_table(path, &GradCheckRow::HEADER, rows, |r| {
        vec![s(r.direction), f(r.eps), f(r.fd_value), f(r.adjoint_value), f(r.rel_err)]
    })
}

/// `seed,s,Q,2dJ,fd_curvature`
pub fn write_curvature(path: impl AsRef<Path>, rows: &[CurvatureRow]) -> Result<()> {
    write_table(path, &CurvatureRow::HEADER, rows, |r| {
        vec![s(r.seed), f(r.s), f(r.q), f(r.two_delta_j), f(r.fd_curvature)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagnostics_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        let row = DiagnosticsRow {
            t: 0.5,
            energy: 1.0,
            mass: -0.25,
            enstrophy: 2.0,
            grad_mu_sq: 3.0,
            max_speed: 0.1,
        };
        write_diagnostics(&p, &[row, DiagnosticsRow { energy: 8.5e305, mass: 1e-20, ..row }]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "t,energy,mass,enstrophy,grad_mu_sq,max_speed\n0.5,1.0,-0.25,2.0,3.0,0.1\n0.5,8.5e305,1e-20,2.0,3.0,0.1\n");
    }
}
