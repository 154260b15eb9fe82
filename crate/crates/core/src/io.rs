//! Self-describing CSV serialization for sampled arrays and result tables.
//!
//! Every file carries comment headers naming the conventions in force:
//! the Weyl composition sign, the Hilbert-Schmidt measure, the free shear,
//! and the block pairing of the diffusion matrix.

use crate::charfn::{C64, SampledCharFn};
use crate::error::{Error, Result};
use crate::grid::{GridAxis, PhaseGrid};
use crate::transform::WignerFn;
use ndarray::ArrayD;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

pub const CONVENTIONS: &[&str] = &[
    "weyl=e^{i q.K + i p.X} with multiplication phase e^{(i/2)(-q1.p2 + p1.q2)}",
    "measure=(2pi)^-d dq dp",
    "shear=q -> q + t p",
    "block_pairing=q-slot ~ x-blocks of the diffusion matrix",
    "shift_phase=position shift by a multiplies phi by e^{+i p.a}",
];

pub fn convention_header() -> String {
    let mut s = String::new();
    for line in CONVENTIONS {
        let _ = writeln!(s, "# convention: {line}");
    }
    s
}

fn write_axes(out: &mut String, names: &[&str], axes: &[GridAxis]) {
    for (name, ax) in names.iter().zip(axes) {
        let _ = writeln!(
            out,
            "# axis {name}: half_width = {:.17e}, n = {}",
            ax.half_width, ax.n
        );
    }
}

fn axis_names(dim: usize, first: char, second: char) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..dim {
        names.push(format!("{first}{i}"));
    }
    for i in 0..dim {
        names.push(format!("{second}{i}"));
    }
    names
}

/// Sampled characteristic function as CSV: header rows describe the grid,
/// data rows are `index..., re, im` in row-major order.
pub fn write_sampled_charfn_csv(path: &Path, s: &SampledCharFn) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# decolab sampled characteristic function");
    out.push_str(&convention_header());
    let _ = writeln!(out, "# dim = {}", s.grid.dim);
    let names = axis_names(s.grid.dim, 'q', 'p');
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_axes(&mut out, &name_refs, &s.grid.axes);
    let _ = writeln!(out, "{},re,im", names.join(","));
    let mut idx = vec![0usize; 2 * s.grid.dim];
    for flat in 0..s.grid.len() {
        s.grid.unravel(flat, &mut idx);
        let v = s.data[idx.as_slice()];
        let cols: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{},{:.17e},{:.17e}", cols.join(","), v.re, v.im);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_sampled_charfn_csv(path: &Path) -> Result<SampledCharFn> {
    let text = std::fs::read_to_string(path)?;
    let mut dim = None;
    let mut axes: Vec<GridAxis> = Vec::new();
    let mut data: Vec<C64> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# dim = ") {
            dim = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Domain("bad dim header".into()))?,
            );
        } else if let Some(rest) = line.strip_prefix("# axis ") {
            let parts: Vec<&str> = rest.split([':', ',']).collect();
            let mut half_width = None;
            let mut n = None;
            for p in &parts[1..] {
                let p = p.trim();
                if let Some(v) = p.strip_prefix("half_width = ") {
                    half_width = v.trim().parse::<f64>().ok();
                } else if let Some(v) = p.strip_prefix("n = ") {
                    n = v.trim().parse::<usize>().ok();
                }
            }
            match (half_width, n) {
                (Some(l), Some(n)) => axes.push(GridAxis::new(l, n)?),
                _ => return Err(Error::Domain(format!("bad axis header `{rest}`"))),
            }
        } else if line.starts_with('#') || line.is_empty() || line.starts_with('q') {
            continue;
        } else {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 2 {
                return Err(Error::Domain(format!("bad data row `{line}`")));
            }
            let re = cols[cols.len() - 2]
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad re in `{line}`")))?;
            let im = cols[cols.len() - 1]
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("bad im in `{line}`")))?;
            data.push(C64::new(re, im));
        }
    }
    let dim = dim.ok_or_else(|| Error::Domain("missing dim header".into()))?;
    let grid = PhaseGrid::new(dim, axes)?;
    let shape = grid.shape();
    let arr = ArrayD::from_shape_vec(shape, data)
        .map_err(|e| Error::Domain(format!("shape mismatch reading csv: {e}")))?;
    SampledCharFn::new(grid, arr)
}

/// Wigner function / classical density as CSV.
pub fn write_wigner_csv(path: &Path, w: &WignerFn, label: &str) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# decolab {label}");
    out.push_str(&convention_header());
    let _ = writeln!(out, "# dim = {}", w.dim);
    let names = axis_names(w.dim, 'x', 'v');
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    write_axes(&mut out, &name_refs, &w.axes);
    let _ = writeln!(out, "{},value", names.join(","));
    let shape: Vec<usize> = w.axes.iter().map(|a| a.n).collect();
    let mut idx = vec![0usize; shape.len()];
    let total: usize = shape.iter().product();
    for flat in 0..total {
        let mut rem = flat;
        for a in (0..shape.len()).rev() {
            idx[a] = rem % shape[a];
            rem /= shape[a];
        }
        let cols: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{},{:.17e}", cols.join(","), w.data[idx.as_slice()]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Generic result table with the convention header.
pub fn write_table_csv(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&convention_header());
    let _ = writeln!(out, "{}", columns.join(","));
    for row in rows {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(out, "{}", cols.join(","));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Append-style text report writer used by the validation experiment.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
