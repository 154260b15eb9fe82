//! Config-driven experiment runner: binds the modules into reproducible
//! studies and emits manifests plus plot-ready CSV tables.

use crate::asymptotics;
use crate::charfn::{hs_norm, CharFn};
use crate::classical;
use crate::coherence;
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::io;
use crate::noise::{NoiseSpec, RadiusScan};
use crate::propagator;
use crate::states;
use crate::transform;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
struct Manifest {
    tool: String,
    version: String,
    kind: String,
    seed: u64,
    conventions: Vec<String>,
    grid_n: usize,
    grid_half_width: f64,
    mc_samples: usize,
    mc_steps: usize,
    classical_cells: usize,
    times: Vec<f64>,
    state: StateManifest,
    noise: NoiseManifest,
    artifacts: Vec<String>,
    flags: Vec<String>,
}

#[derive(Debug, Serialize)]
struct StateManifest {
    kind: String,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    e: f64,
    f: f64,
}

#[derive(Debug, Serialize)]
struct NoiseManifest {
    dim: usize,
    diffusion_rows: Vec<Vec<f64>>,
    jump_kind: String,
    atoms: Vec<Vec<f64>>,
    total_rate: f64,
}

fn noise_manifest(noise: &NoiseSpec) -> NoiseManifest {
    let a = noise.diffusion();
    let rows = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect();
    let atoms = noise
        .jump()
        .atoms_slice()
        .iter()
        .map(|at| {
            let mut row = at.x.clone();
            row.extend(&at.k);
            row.push(at.weight);
            row
        })
        .collect();
    NoiseManifest {
        dim: noise.dim(),
        diffusion_rows: rows,
        jump_kind: format!("{:?}", noise.jump().kind()),
        atoms,
        total_rate: noise.jump().total_rate(),
    }
}

/// Outcome of one experiment run.
#[derive(Debug)]
pub struct RunSummary {
    pub kind: ExperimentKind,
    pub ok: bool,
    pub messages: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

pub fn run(kind: ExperimentKind, config: &ExperimentConfig) -> Result<RunSummary> {
    if let Some(configured) = config.kind {
        if configured != kind {
            return Err(Error::config(
                0,
                format!(
                    "config kind `{}` does not match requested `{}`",
                    configured.name(),
                    kind.name()
                ),
            ));
        }
    }
    std::fs::create_dir_all(&config.out_dir)?;
    let mut summary = RunSummary {
        kind,
        ok: true,
        messages: Vec::new(),
        artifacts: Vec::new(),
    };
    match kind {
        ExperimentKind::Validate => run_validate(config, &mut summary)?,
        ExperimentKind::IndexSeries => run_index(config, &mut summary)?,
        ExperimentKind::Evolve => run_evolve(config, &mut summary)?,
        ExperimentKind::Asymptotics => run_asymptotics(config, &mut summary)?,
        ExperimentKind::Relaxation => run_relaxation(config, &mut summary)?,
        ExperimentKind::Classical => run_classical(config, &mut summary)?,
    }
    let manifest = Manifest {
        tool: "decolab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: kind.name().into(),
        seed: config.seed,
        conventions: io::CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        grid_n: config.grid_n,
        grid_half_width: config.grid_half_width,
        mc_samples: config.mc_n,
        mc_steps: config.mc_steps,
        classical_cells: config.classical_cells,
        times: config.times.clone(),
        state: StateManifest {
            kind: "gaussian1d".into(),
            a: config.state.a,
            b: config.state.b,
            c: config.state.c,
            d: config.state.d,
            e: config.state.e,
            f: config.state.f,
        },
        noise: noise_manifest(&config.noise),
        artifacts: summary
            .artifacts
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        flags: summary.messages.clone(),
    };
    let manifest_path = config.out_dir.join("manifest.json");
    let file = std::fs::File::create(&manifest_path)?;
    serde_json::to_writer_pretty(file, &manifest)
        .map_err(|e| Error::Domain(format!("manifest serialization failed: {e}")))?;
    summary.artifacts.push(manifest_path);
    Ok(summary)
}

fn initial_state(config: &ExperimentConfig) -> Result<CharFn> {
    states::gaussian_charfn(&config.state)
}

struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn check_le(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        pass: value <= threshold,
    }
}

fn run_validate(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut checks: Vec<Check> = Vec::new();
    let phi0 = initial_state(config)?;
    let noise = &config.noise;

    // state invariants
    let origin = phi0.eval(&[0.0], &[0.0]);
    checks.push(check_le(
        "state_unit_trace",
        (origin - crate::charfn::C64::new(1.0, 0.0)).norm(),
        1e-9,
    ));
    checks.push(Check {
        name: "state_hermitian",
        value: 0.0,
        threshold: 1e-9,
        pass: phi0.check_state().is_ok(),
    });

    // isometry: kernel-side vs characteristic-function-side HS norm
    let axis = crate::grid::GridAxis::new(config.grid_half_width.max(10.0), config.grid_n)?;
    let kernel = states::gaussian_kernel_1d(&config.state, axis)?;
    let grid = PhaseGrid::conjugate_1d(axis);
    let phi_sampled = transform::kernel_to_charfn(&kernel, &grid)?;
    let iso_gap = (kernel.hs_norm() - phi_sampled.hs_norm()).abs();
    checks.push(check_le("isometry_gap", iso_gap, 1e-6));

    // numeric vs closed-form index
    let closed = states::closed_form_index(&config.state)?;
    let numeric = coherence::coherence_index(&phi0)?;
    let idx_gap = [
        (numeric.c_x - closed.c_x).abs(),
        (numeric.d_x - closed.d_x).abs(),
        (numeric.s_x - closed.s_x).abs(),
        (numeric.c_k - closed.c_k).abs(),
        (numeric.d_k - closed.d_k).abs(),
        (numeric.s_k - closed.s_k).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    checks.push(check_le("index_closed_form_gap", idx_gap, 1e-6));

    // uncertainty products
    let (cxdk, ckdx) = numeric.uncertainty_products();
    checks.push(Check {
        name: "uncertainty_products",
        value: cxdk.min(ckdx),
        threshold: 0.5 - 1e-9,
        pass: cxdk >= 0.5 - 1e-9 && ckdx >= 0.5 - 1e-9,
    });

    // quadratic closed form vs quadrature on the configured noise
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let d = noise.dim();
    let mut quad_gap = 0.0f64;
    for _ in 0..20 {
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t: f64 = rng.gen_range(0.0..2.0);
        let closed = noise.integrated_quadratic(&q, &p, t);
        let quadr = crate::quad::integrate_doubling(0.0, t, 8, 512, 1e-14, |u| {
            let qq: Vec<f64> = q.iter().zip(&p).map(|(qi, pi)| qi + u * pi).collect();
            noise.quadratic_form(&qq, &p)
        });
        quad_gap = quad_gap.max((closed - quadr).abs());
    }
    checks.push(check_le("quadratic_closed_form_gap", quad_gap, 1e-10));

    // jump-exponent origin symmetry
    let mut sym_gap = 0.0f64;
    for _ in 0..100 {
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let nq: Vec<f64> = q.iter().map(|v| -v).collect();
        let np: Vec<f64> = p.iter().map(|v| -v).collect();
        sym_gap = sym_gap
            .max((noise.jump().exponent(&q, &p) - noise.jump().exponent(&nq, &np)).abs());
    }
    checks.push(check_le("jump_exponent_symmetry", sym_gap, 1e-12));

    // evolution invariants at t = 1
    let phi_1 = propagator::evolve(&phi0, noise, 1.0)?;
    checks.push(check_le(
        "evolved_unit_trace",
        (phi_1.eval(&vec![0.0; d], &vec![0.0; d]) - crate::charfn::C64::new(1.0, 0.0)).norm(),
        1e-12,
    ));
    checks.push(Check {
        name: "evolved_hermitian",
        value: 0.0,
        threshold: 1e-9,
        pass: phi_1.check_state().is_ok(),
    });
    let mut prev = hs_norm(&phi0)?;
    let mut contraction_ok = true;
    for &t in &[1.0, 2.0, 4.0, 8.0] {
        let n = hs_norm(&propagator::evolve(&phi0, noise, t)?)?;
        if n > prev + 1e-9 {
            contraction_ok = false;
        }
        prev = n;
    }
    checks.push(Check {
        name: "contraction_monotone",
        value: 0.0,
        threshold: 0.0,
        pass: contraction_ok,
    });

    // generator consistency
    let residual = propagator::generator_residual(&phi0, noise, 1e-4)?;
    checks.push(check_le("generator_residual", residual, 1e-3));

    // quadratic bounds of the jump exponent
    if !noise.jump().is_empty() {
        let delta = crate::noise::check_quadratic_bounds(noise.jump(), 0.1, RadiusScan::default());
        checks.push(Check {
            name: "jump_quadratic_bounds",
            value: delta.as_ref().copied().unwrap_or(0.0),
            threshold: 0.0,
            pass: delta.map(|v| v > 0.0).unwrap_or(false),
        });
    }

    let rows: Vec<Vec<f64>> = checks
        .iter()
        .map(|c| vec![c.value, c.threshold, if c.pass { 1.0 } else { 0.0 }])
        .collect();
    let mut text = io::convention_header();
    text.push_str("check,value,threshold,pass\n");
    for (c, row) in checks.iter().zip(&rows) {
        text.push_str(&format!(
            "{},{:.3e},{:.3e},{}\n",
            c.name, row[0], row[1], row[2] as i64
        ));
    }
    let path = config.out_dir.join("validation.csv");
    io::write_text(&path, &text)?;
    summary.artifacts.push(path);
    for c in &checks {
        let status = if c.pass { "pass" } else { "FAIL" };
        summary
            .messages
            .push(format!("{}: {} (value {:.3e})", c.name, status, c.value));
        if !c.pass {
            summary.ok = false;
        }
    }
    Ok(())
}

fn index_series(config: &ExperimentConfig) -> Result<Vec<(f64, coherence::IndexReport)>> {
    let phi0 = initial_state(config)?;
    config
        .times
        .iter()
        .map(|&t| {
            let phi_t = propagator::evolve(&phi0, &config.noise, t)?;
            Ok((t, coherence::coherence_index(&phi_t)?))
        })
        .collect()
}

fn run_index(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let series = index_series(config)?;
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|(t, r)| {
            let (cxdk, ckdx) = r.uncertainty_products();
            vec![*t, r.c_x, r.d_x, r.s_x, r.c_k, r.d_k, r.s_k, cxdk, ckdx]
        })
        .collect();
    let path = config.out_dir.join("index_series.csv");
    io::write_table_csv(
        &path,
        &["t", "C_X", "D_X", "S_X", "C_K", "D_K", "S_K", "CxDk", "CkDx"],
        &rows,
    )?;
    summary.artifacts.push(path);
    Ok(())
}

fn run_evolve(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let phi0 = initial_state(config)?;
    let grid = PhaseGrid::square_1d(config.grid_half_width, config.grid_n)?;
    for &t in &config.times {
        let phi_t = propagator::evolve(&phi0, &config.noise, t)?;
        let sampled = crate::charfn::SampledCharFn::from_charfn(&phi_t, &grid)?;
        if sampled.boundary_max() > 1e-10 {
            summary.messages.push(format!(
                "t = {t}: boundary magnitude {:.2e} above 1e-10 (truncation flagged)",
                sampled.boundary_max()
            ));
        }
        let path = config.out_dir.join(format!("charfn_t{t}.csv"));
        io::write_sampled_charfn_csv(&path, &sampled)?;
        summary.artifacts.push(path);
    }
    Ok(())
}

fn run_asymptotics(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let phi0 = initial_state(config)?;
    let prediction = asymptotics::classify_and_predict(&config.noise, &phi0)?;
    let series = index_series(config)?;
    let s_series: Vec<(f64, f64)> = series.iter().map(|(t, r)| (*t, r.s_x)).collect();
    let fit = asymptotics::powerlaw_fit(&s_series)?;
    let rows: Vec<Vec<f64>> = s_series
        .iter()
        .map(|&(t, s)| {
            let predicted = prediction.value(t);
            vec![t, s, predicted, s / predicted]
        })
        .collect();
    let path = config.out_dir.join("asymptotics.csv");
    io::write_table_csv(&path, &["t", "S_X", "predicted", "ratio"], &rows)?;
    summary.artifacts.push(path);
    let fit_path = config.out_dir.join("powerlaw_fit.csv");
    io::write_table_csv(
        &fit_path,
        &[
            "predicted_power",
            "fitted_power",
            "predicted_coefficient",
            "fitted_coefficient",
            "fit_residual",
        ],
        &[vec![
            prediction.power,
            fit.power,
            prediction.coefficient,
            fit.coefficient,
            fit.residual,
        ]],
    )?;
    summary.artifacts.push(fit_path);
    summary.messages.push(format!(
        "predicted power {} vs fitted {:.4}; predicted coefficient {:.6} vs fitted {:.6}",
        prediction.power, fit.power, prediction.coefficient, fit.coefficient
    ));
    Ok(())
}

fn run_relaxation(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let phi0 = initial_state(config)?;
    let mut rows = Vec::new();
    let mut last = None;
    for &t in &config.times {
        if t <= 0.0 {
            return Err(Error::Domain("relaxation needs strictly positive times".into()));
        }
        let phi_t = propagator::evolve(&phi0, &config.noise, t)?;
        let dist = asymptotics::relaxation_distance(&phi_t, &config.noise, t)?;
        rows.push(vec![t, dist]);
        last = Some((t, dist));
    }
    let path = config.out_dir.join("relaxation.csv");
    io::write_table_csv(&path, &["t", "relative_hs_distance"], &rows)?;
    summary.artifacts.push(path);
    if let Some(baseline) = &config.baseline_file {
        let (t_base, threshold) = read_baseline(baseline)?;
        if let Some((t, dist)) = last {
            if (t - t_base).abs() < 1e-9 {
                let pass = dist <= threshold;
                summary.messages.push(format!(
                    "baseline at t = {t_base}: distance {dist:.6e} vs threshold {threshold:.6e} ({})",
                    if pass { "pass" } else { "FAIL" }
                ));
                if !pass {
                    summary.ok = false;
                }
            } else {
                summary.messages.push(format!(
                    "baseline time {t_base} not among configured times; no comparison"
                ));
            }
        }
    }
    Ok(())
}

/// Baseline files are `key = value` text with `t` and `threshold`.
pub fn read_baseline(path: &Path) -> Result<(f64, f64)> {
    let text = std::fs::read_to_string(path)?;
    let mut t = None;
    let mut threshold = None;
    for line in text.lines() {
        let line = line.trim();
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if let Some((k, v)) = line.split_once('=') {
            let v = v.trim().parse::<f64>().ok();
            match k.trim() {
                "t" => t = v,
                "threshold" => threshold = v,
                _ => {}
            }
        }
    }
    match (t, threshold) {
        (Some(t), Some(th)) => Ok((t, th)),
        _ => Err(Error::Domain(format!(
            "baseline file {} needs `t` and `threshold`",
            path.display()
        ))),
    }
}

/// Wigner function of the evolved state on the histogram axes: closed form
/// for Gaussian states, FFT on the conjugate grid otherwise.
fn wigner_on_axes(
    phi_t: &CharFn,
    axes: &[crate::grid::GridAxis],
    dim: usize,
) -> Result<transform::WignerFn> {
    if let CharFn::Gaussian(g) = phi_t {
        return transform::gaussian_wigner_on_grid(g, axes);
    }
    // conjugate-axis trick: the FFT of a grid with q = conj(v), p = conj(x)
    // lands exactly on the requested (x, v) axes
    let mut phase_axes = Vec::with_capacity(2 * dim);
    phase_axes.extend(axes[dim..2 * dim].iter().map(|a| a.conjugate()));
    phase_axes.extend(axes[..dim].iter().map(|a| a.conjugate()));
    let grid = PhaseGrid::new(dim, phase_axes)?;
    transform::charfn_to_wigner(phi_t, &grid)
}

fn run_classical(config: &ExperimentConfig, summary: &mut RunSummary) -> Result<()> {
    let phi0 = initial_state(config)?;
    let d = config.noise.dim();
    let mut distance_rows = Vec::new();
    for (t_idx, &t) in config.times.iter().enumerate() {
        let seed = config.seed.wrapping_add(t_idx as u64);
        let ens = classical::sample_paths(&config.noise, t, config.mc_n, config.mc_steps, seed)?;
        let axes = classical::fitted_axes(&ens, config.classical_cells)?;
        let hist = classical::classical_density(&ens, &axes)?;
        let hist_path = config.out_dir.join(format!("classical_hist_t{t}.csv"));
        io::write_wigner_csv(&hist_path, &hist, "classical density histogram")?;
        summary.artifacts.push(hist_path);

        let phi_t = propagator::evolve(&phi0, &config.noise, t)?;
        match wigner_on_axes(&phi_t, &axes, d) {
            Ok(w) => {
                let dist = classical::wigner_classical_distance(&w, &hist)?;
                distance_rows.push(vec![t, dist]);
            }
            Err(Error::Truncation(msg)) => {
                summary
                    .messages
                    .push(format!("t = {t}: wigner transform truncated ({msg})"));
            }
            Err(e) => return Err(e),
        }

        // characteristic panel: empirical vs exact multiplier at 20 points,
        // scaled into the region where the multiplier is O(1)
        let panel = propagator::test_panel(d, 20, propagator::PANEL_SEED);
        let m_scale = (config.noise.momentum_kick_matrix().trace()
            + config.noise.position_kick_matrix().trace())
        .max(1e-6)
            / (2.0 * d as f64);
        let sq = 1.0 / (1.0 + m_scale * t).sqrt();
        let sp = (3.0 / (1.0 + m_scale * t.powi(3))).sqrt();
        let mut panel_rows = Vec::new();
        for (qu, pu) in &panel {
            let q: Vec<f64> = qu.iter().map(|v| v * sq).collect();
            let p: Vec<f64> = pu.iter().map(|v| v * sp).collect();
            let (est, se) = classical::empirical_charfn(&ens, &q, &p);
            let exact = config.noise.integrated_exponent(&q, &p, t)?.exp();
            let gap = (est - crate::charfn::C64::new(exact, 0.0)).norm();
            panel_rows.push(vec![q[0], p[0], est.re, est.im, se, exact, gap]);
            if gap > 3.0 * se && gap > 1e-12 {
                summary.messages.push(format!(
                    "t = {t}: panel point q={:.4} p={:.4} off by {gap:.3e} > 3 stderr {se:.3e}",
                    q[0], p[0]
                ));
                summary.ok = false;
            }
        }
        let panel_path = config.out_dir.join(format!("classical_panel_t{t}.csv"));
        io::write_table_csv(
            &panel_path,
            &["q", "p", "est_re", "est_im", "stderr", "exact", "gap"],
            &panel_rows,
        )?;
        summary.artifacts.push(panel_path);
    }
    let dist_path = config.out_dir.join("classical_distance.csv");
    io::write_table_csv(&dist_path, &["t", "relative_l2_distance"], &distance_rows)?;
    summary.artifacts.push(dist_path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("decolab_exp_{tag}"));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn validate_ground_state_zero_noise_passes() {
        let config = ExperimentConfig {
            out_dir: tmp_dir("validate"),
            ..Default::default()
        };
        let summary = run(ExperimentKind::Validate, &config).unwrap();
        assert!(summary.ok, "messages: {:?}", summary.messages);
        assert!(config.out_dir.join("validation.csv").exists());
        assert!(config.out_dir.join("manifest.json").exists());
    }

    #[test]
    fn index_series_is_deterministic() {
        let text = "\
kind = index_series
seed = 7

[noise]
dim = 1
diffusion = 1 0; 0 0

[times]
list = 2 4
";
        let mut config = parse_config(text).unwrap();
        config.out_dir = tmp_dir("index_a");
        run(ExperimentKind::IndexSeries, &config).unwrap();
        let a = std::fs::read_to_string(config.out_dir.join("index_series.csv")).unwrap();
        config.out_dir = tmp_dir("index_b");
        run(ExperimentKind::IndexSeries, &config).unwrap();
        let b = std::fs::read_to_string(config.out_dir.join("index_series.csv")).unwrap();
        assert_eq!(a, b, "re-run must reproduce every number bit-exactly");
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let config = ExperimentConfig {
            kind: Some(ExperimentKind::Evolve),
            out_dir: tmp_dir("mismatch"),
            ..Default::default()
        };
        let err = run(ExperimentKind::IndexSeries, &config).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
