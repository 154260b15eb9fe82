//! Experiment configuration: key = value lines grouped into [sections].
//! Parsing is total with line-numbered diagnostics; unknown keys are errors.

use crate::error::{Error, Result};
use crate::noise::{Atom, JumpMeasure, NoiseSpec};
use crate::states::Gaussian1D;
use nalgebra::DMatrix;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Validate,
    IndexSeries,
    Evolve,
    Asymptotics,
    Relaxation,
    Classical,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "validate" => Some(Self::Validate),
            "index" | "index_series" => Some(Self::IndexSeries),
            "evolve" => Some(Self::Evolve),
            "asymptotics" => Some(Self::Asymptotics),
            "relaxation" => Some(Self::Relaxation),
            "classical" => Some(Self::Classical),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::IndexSeries => "index_series",
            Self::Evolve => "evolve",
            Self::Asymptotics => "asymptotics",
            Self::Relaxation => "relaxation",
            Self::Classical => "classical",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub noise: NoiseSpec,
    pub state: Gaussian1D,
    pub times: Vec<f64>,
    pub grid_n: usize,
    pub grid_half_width: f64,
    pub mc_n: usize,
    pub mc_steps: usize,
    pub classical_cells: usize,
    pub baseline_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            seed: 1,
            out_dir: PathBuf::from("out"),
            noise: NoiseSpec::zero(1),
            state: Gaussian1D::ground_state(),
            times: vec![1.0],
            grid_n: 512,
            grid_half_width: 8.0,
            mc_n: 100_000,
            mc_steps: 256,
            classical_cells: 64,
            baseline_file: None,
        }
    }
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

struct Sections {
    // (section, key) -> entry; top-level keys live under ""
    entries: BTreeMap<(String, String), Entry>,
}

impl Sections {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            if let Some(name) = stripped.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config(line, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = stripped
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("expected key = value, got `{stripped}`")))?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(line, "empty key"));
            }
            let prev = entries.insert(
                (section.clone(), key.clone()),
                Entry {
                    line,
                    value: value.trim().to_string(),
                    used: false,
                },
            );
            if prev.is_some() {
                return Err(Error::config(line, format!("duplicate key `{key}`")));
            }
        }
        Ok(Sections { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.used = true;
                (e.line, e.value.clone())
            })
    }

    fn check_all_used(&self) -> Result<()> {
        for ((section, key), entry) in &self.entries {
            if !entry.used {
                let place = if section.is_empty() {
                    key.clone()
                } else {
                    format!("[{section}] {key}")
                };
                return Err(Error::config(entry.line, format!("unknown key `{place}`")));
            }
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::config(line, format!("`{key}` is not a number: `{value}`")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::config(line, format!("`{key}` is not a count: `{value}`")))
}

fn parse_matrix(line: usize, key: &str, value: &str, n: usize) -> Result<DMatrix<f64>> {
    let rows: Vec<&str> = value.split(';').map(str::trim).collect();
    if rows.len() != n {
        return Err(Error::config(
            line,
            format!("`{key}` needs {n} rows separated by `;`, got {}", rows.len()),
        ));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        let vals: Vec<&str> = row.split_whitespace().collect();
        if vals.len() != n {
            return Err(Error::config(
                line,
                format!("`{key}` row {} has {} entries, expected {n}", i + 1, vals.len()),
            ));
        }
        for (j, v) in vals.iter().enumerate() {
            m[(i, j)] = parse_f64(line, key, v)?;
        }
    }
    Ok(m)
}

/// Parse tuple lists like `(0, 1, 0.5) (0, -1, 0.5)`.
fn parse_tuples(line: usize, key: &str, value: &str, arity: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut rest = value.trim();
    while !rest.is_empty() {
        if !rest.starts_with('(') {
            return Err(Error::config(line, format!("`{key}` expects `(..)` tuples")));
        }
        let close = rest
            .find(')')
            .ok_or_else(|| Error::config(line, format!("`{key}` has an unterminated tuple")))?;
        let inner = &rest[1..close];
        let vals: Vec<f64> = inner
            .split(',')
            .map(|v| parse_f64(line, key, v.trim()))
            .collect::<Result<_>>()?;
        if vals.len() != arity {
            return Err(Error::config(
                line,
                format!(
                    "`{key}` tuple {} has arity {}, expected {arity}",
                    out.len() + 1,
                    vals.len()
                ),
            ));
        }
        out.push(vals);
        rest = rest[close + 1..].trim_start();
    }
    if out.is_empty() {
        return Err(Error::config(line, format!("`{key}` is empty")));
    }
    Ok(out)
}

fn parse_noise(sections: &mut Sections) -> Result<NoiseSpec> {
    let dim = match sections.take("noise", "dim") {
        Some((line, v)) => {
            let d = parse_usize(line, "dim", &v)?;
            if d == 0 || d > 3 {
                return Err(Error::config(line, "dim must be 1, 2, or 3"));
            }
            d
        }
        None => 1,
    };
    let diffusion = match sections.take("noise", "diffusion") {
        Some((line, v)) => parse_matrix(line, "diffusion", &v, 2 * dim)?,
        None => DMatrix::zeros(2 * dim, 2 * dim),
    };
    let jump = match sections.take("noise", "jump") {
        None => JumpMeasure::empty(dim),
        Some((line, kind)) => match kind.as_str() {
            "empty" => JumpMeasure::empty(dim),
            "momentum_atoms" | "position_atoms" | "atoms" => {
                let (aline, atoms_text) = sections.take("noise", "atoms").ok_or_else(|| {
                    Error::config(line, format!("jump = {kind} needs an `atoms` key"))
                })?;
                match kind.as_str() {
                    "momentum_atoms" => {
                        let rows = parse_tuples(aline, "atoms", &atoms_text, dim + 1)?;
                        JumpMeasure::momentum_atoms(
                            dim,
                            rows.into_iter()
                                .map(|r| (r[..dim].to_vec(), r[dim]))
                                .collect(),
                        )
                        .map_err(|e| Error::config(aline, e.to_string()))?
                    }
                    "position_atoms" => {
                        let rows = parse_tuples(aline, "atoms", &atoms_text, dim + 1)?;
                        JumpMeasure::position_atoms(
                            dim,
                            rows.into_iter()
                                .map(|r| (r[..dim].to_vec(), r[dim]))
                                .collect(),
                        )
                        .map_err(|e| Error::config(aline, e.to_string()))?
                    }
                    _ => {
                        let rows = parse_tuples(aline, "atoms", &atoms_text, 2 * dim + 1)?;
                        let atoms = rows
                            .into_iter()
                            .map(|r| Atom {
                                x: r[..dim].to_vec(),
                                k: r[dim..2 * dim].to_vec(),
                                weight: r[2 * dim],
                            })
                            .collect();
                        JumpMeasure::atoms(dim, atoms)
                            .map_err(|e| Error::config(aline, e.to_string()))?
                    }
                }
            }
            "momentum_gaussian_density" | "position_gaussian_density" => {
                if dim != 1 {
                    return Err(Error::config(line, "density jumps are 1-d"));
                }
                let sigma = match sections.take("noise", "density_sigma") {
                    Some((l, v)) => parse_f64(l, "density_sigma", &v)?,
                    None => 1.0,
                };
                let points = match sections.take("noise", "density_points") {
                    Some((l, v)) => parse_usize(l, "density_points", &v)?,
                    None => 101,
                };
                let half = match sections.take("noise", "density_halfwidth") {
                    Some((l, v)) => parse_f64(l, "density_halfwidth", &v)?,
                    None => 8.0 * sigma,
                };
                let rate = match sections.take("noise", "density_rate") {
                    Some((l, v)) => parse_f64(l, "density_rate", &v)?,
                    None => 1.0,
                };
                let grid: Vec<f64> = (0..points)
                    .map(|j| -half + 2.0 * half * j as f64 / (points - 1) as f64)
                    .collect();
                let values: Vec<f64> = grid
                    .iter()
                    .map(|k| {
                        rate * (-(k * k) / (2.0 * sigma * sigma)).exp()
                            / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
                    })
                    .collect();
                let built = if kind.starts_with("momentum") {
                    JumpMeasure::momentum_density_1d(&grid, &values)
                } else {
                    JumpMeasure::position_density_1d(&grid, &values)
                };
                built.map_err(|e| Error::config(line, e.to_string()))?
            }
            other => {
                return Err(Error::config(
                    line,
                    format!("unknown jump kind `{other}`"),
                ))
            }
        },
    };
    NoiseSpec::new(dim, diffusion, jump).map_err(|e| Error::config(0, e.to_string()))
}

fn parse_state(sections: &mut Sections) -> Result<Gaussian1D> {
    let mut params = Gaussian1D::ground_state();
    let mut explicit_f = None;
    for key in ["a", "b", "c", "d", "e", "f"] {
        if let Some((line, v)) = sections.take("state", key) {
            let value = parse_f64(line, key, &v)?;
            match key {
                "a" => params.a = value,
                "b" => params.b = value,
                "c" => params.c = value,
                "d" => params.d = value,
                "e" => params.e = value,
                _ => explicit_f = Some(value),
            }
        }
    }
    params.f = match explicit_f {
        Some(f) => f,
        // the normalization constant is determined by E and C
        None => params.e * params.e / (4.0 * params.c),
    };
    let violations = crate::states::validate(&params);
    if !violations.is_empty() {
        return Err(Error::config(
            0,
            format!("invalid [state]: {}", violations.join("; ")),
        ));
    }
    Ok(params)
}

/// Parse a full experiment configuration; unknown keys and malformed values
/// are reported with their line numbers.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections = Sections::parse(text)?;
    let mut config = ExperimentConfig::default();
    if let Some((line, v)) = sections.take("", "kind") {
        config.kind = Some(
            ExperimentKind::parse(&v)
                .ok_or_else(|| Error::config(line, format!("unknown kind `{v}`")))?,
        );
    }
    if let Some((line, v)) = sections.take("", "seed") {
        config.seed = v
            .parse::<u64>()
            .map_err(|_| Error::config(line, format!("`seed` is not an integer: `{v}`")))?;
    }
    if let Some((_, v)) = sections.take("", "out") {
        config.out_dir = PathBuf::from(v);
    }
    config.noise = parse_noise(&mut sections)?;
    config.state = parse_state(&mut sections)?;
    if let Some((line, v)) = sections.take("times", "list") {
        let times: Vec<f64> = v
            .split_whitespace()
            .map(|t| parse_f64(line, "list", t))
            .collect::<Result<_>>()?;
        if times.is_empty() {
            return Err(Error::config(line, "`list` must name at least one time"));
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::config(
                    line,
                    format!("`list` must be strictly increasing, got {} after {}", w[1], w[0]),
                ));
            }
        }
        if times[0] < 0.0 {
            return Err(Error::config(line, "`list` times must be nonnegative"));
        }
        config.times = times;
    }
    if let Some((line, v)) = sections.take("grid", "n") {
        let n = parse_usize(line, "n", &v)?;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(line, "grid n must be a power of two >= 8"));
        }
        config.grid_n = n;
    }
    if let Some((line, v)) = sections.take("grid", "half_width") {
        let l = parse_f64(line, "half_width", &v)?;
        if !(l > 0.0) {
            return Err(Error::config(line, "grid half_width must be positive"));
        }
        config.grid_half_width = l;
    }
    if let Some((line, v)) = sections.take("mc", "n") {
        config.mc_n = parse_usize(line, "n", &v)?;
    }
    if let Some((line, v)) = sections.take("mc", "steps") {
        config.mc_steps = parse_usize(line, "steps", &v)?;
    }
    if let Some((line, v)) = sections.take("classical", "cells") {
        let n = parse_usize(line, "cells", &v)?;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::config(line, "classical cells must be a power of two >= 8"));
        }
        config.classical_cells = n;
    }
    if let Some((_, v)) = sections.take("relaxation", "baseline_file") {
        config.baseline_file = Some(PathBuf::from(v));
    }
    sections.check_all_used()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_case1_config_fills_defaults() {
        let text = "\
kind = index_series

[noise]
dim = 1
diffusion = 1 0; 0 0

[times]
list = 15 20 30 40 60
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.kind, Some(ExperimentKind::IndexSeries));
        assert_eq!(config.grid_n, 512);
        assert_eq!(config.mc_n, 100_000);
        assert_eq!(config.mc_steps, 256);
        assert_eq!(config.times.len(), 5);
        assert_eq!(config.noise.block_xx()[(0, 0)], 1.0);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = "gamma = 3\n";
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn wrong_matrix_arity_names_the_row() {
        let text = "\
[noise]
diffusion = 1 0 0; 0 0
";
        let err = parse_config(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
    }

    #[test]
    fn decreasing_times_rejected() {
        let text = "\
[times]
list = 5 3
";
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"));
    }

    #[test]
    fn atoms_config_roundtrip() {
        let text = "\
[noise]
dim = 1
diffusion = 1 0; 0 0
jump = momentum_atoms
atoms = (1, 0.5) (-1, 0.5)
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.noise.jump().atoms_slice().len(), 2);
        assert_eq!(config.noise.jump().total_rate(), 1.0);
    }

    #[test]
    fn state_f_is_derived_when_omitted() {
        let text = "\
[state]
a = 0.5
c = 0.25
e = 1.0
";
        let config = parse_config(text).unwrap();
        assert_eq!(config.state.f, 1.0);
    }
}
