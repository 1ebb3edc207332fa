//! Preset runs and the artifacts they leave on disk.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use degen_core::grid::Grid;
use degen_core::inversion::{estimate_order, minimize, Family, InverseProblemSpec, InversionResult, OrderFit};
use degen_core::observations::{add_noise, NoiseSpec, Observation};
use degen_core::parabolic::{dissipativity_check, solve_parabolic, Trajectory};
use degen_core::presets::Preset;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::{num, write_json, write_text, Table};
use crate::svg::{heatmap, Plot, Series};

/// Acceptance of a noiseless run against the preset's truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetCheck {
    pub pass: bool,
    pub detail: String,
}

enum Tolerance {
    Params(f64),
    /// Cost bound and pointwise coefficient error relative to `max a_d`.
    Profile {
        cost: f64,
        relative: f64,
    },
}

fn tolerance(name: &str) -> Option<Tolerance> {
    Some(match name {
        "test1" | "test2" | "test3" | "test4" => Tolerance::Params(1e-4),
        "test5" | "test6" | "test7" | "test8" | "test9" | "test10" | "test11" | "test12" => Tolerance::Params(1e-3),
        "test13" => Tolerance::Params(1e-2),
        "test14" => Tolerance::Profile {
            cost: 1e-10,
            relative: 0.06,
        },
        _ => return None,
    })
}

/// `max_x |a_c(x) − a_d(x)| / max_x a_d(x)` over 1001 points of `[0, ℓ]`.
pub fn profile_error(family: &Family, truth: &[f64], params: &[f64], ell: f64) -> Result<f64> {
    let (t, c) = (family.model(truth)?, family.model(params)?);
    let xs = (0..=1000).map(|k| ell * k as f64 / 1000.0);
    let (mut diff, mut top) = (0.0_f64, 0.0_f64);
    for x in xs {
        let (a, b) = (
            t.profile.eval(x).context("tabulated profile")?,
            c.profile.eval(x).context("tabulated profile")?,
        );
        diff = diff.max((a - b).abs());
        top = top.max(a.abs());
    }
    Ok(diff / top)
}

/// Tolerance check of a noiseless result, `None` for presets without a reference.
pub fn reference_check(preset: &Preset, r: &InversionResult) -> Result<Option<PresetCheck>> {
    let Some(tol) = tolerance(&preset.name) else {
        return Ok(None);
    };
    Ok(Some(match tol {
        Tolerance::Params(eps) => {
            let err = r
                .params
                .iter()
                .zip(&preset.truth)
                .fold(0.0_f64, |m, (p, t)| m.max((p - t).abs()));
            PresetCheck {
                pass: err <= eps,
                detail: format!("max |p - p_d| = {err:.3e} (tol {eps:.0e})"),
            }
        }
        Tolerance::Profile { cost, relative } => {
            let e = profile_error(&preset.family, &preset.truth, &r.params, preset.ell)?;
            PresetCheck {
                pass: r.cost <= cost && e <= relative,
                detail: format!(
                    "cost = {:.3e} (tol {cost:.0e}), max |a_c - a_d| / max a_d = {e:.3e} (tol {relative})",
                    r.cost
                ),
            }
        }
    }))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub noise: f64,
    pub seed: u64,
    pub cost: f64,
    pub iterations: usize,
    pub params: Vec<f64>,
    pub termination: String,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub result: InversionResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub preset: String,
    pub ell: f64,
    pub t_final: f64,
    pub nx: usize,
    pub nt: usize,
    pub t0: Option<f64>,
    pub u0: String,
    pub source: String,
    pub params: Vec<String>,
    pub truth: Vec<f64>,
    pub initial: Vec<f64>,
    pub bounds: Vec<[f64; 2]>,
    pub rows: Vec<RunRow>,
    /// Check of the noiseless row, when there is one and a reference exists.
    pub check: Option<PresetCheck>,
    /// Convergence order of the first parameter in the noiseless run.
    pub order: Option<OrderFit>,
    pub order_note: Option<String>,
    pub setup_time_s: f64,
}

impl RunSummary {
    pub fn noiseless(&self) -> Option<&RunRow> {
        self.rows.iter().find(|r| r.noise == 0.0)
    }
}

fn jobs(cfg: &ExperimentConfig) -> Vec<(f64, u64)> {
    let mut out = Vec::new();
    for &level in &cfg.noise {
        if level == 0.0 {
            out.push((0.0, cfg.seeds.first().copied().unwrap_or(0)));
        } else {
            out.extend(cfg.seeds.iter().map(|&s| (level, s)));
        }
    }
    out
}

/// Build the preset, run one minimization per `(noise level, seed)` and
/// collect the rows in configuration order.
pub fn run_inversions(cfg: &ExperimentConfig) -> Result<(Preset, InverseProblemSpec, RunSummary)> {
    let preset = cfg.preset()?;
    let start = Instant::now();
    let spec = preset.build()?;
    let setup_time_s = start.elapsed().as_secs_f64();
    let rows = jobs(cfg)
        .par_iter()
        .map(|&(noise, seed)| {
            let obs = add_noise(&spec.observation, NoiseSpec::new(noise, seed)?);
            let r = minimize(&spec.with_observation(obs))?;
            Ok(RunRow {
                noise,
                seed,
                cost: r.cost,
                iterations: r.iterations,
                params: r.params.clone(),
                termination: format!("{:?}", r.termination),
                wall_time_s: r.wall_time_s,
                warnings: r.warnings.clone(),
                result: r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = RunSummary {
        preset: preset.name.clone(),
        ell: preset.ell,
        t_final: preset.t_final,
        nx: preset.nx,
        nt: preset.nt,
        t0: preset.t0(),
        u0: preset.u0_formula.into(),
        source: preset.source_formula.into(),
        params: preset.family.param_names().iter().map(|s| s.to_string()).collect(),
        truth: preset.truth.clone(),
        initial: preset.initial.clone(),
        bounds: preset.bounds.iter().map(|b| [b.lo, b.hi]).collect(),
        rows,
        check: None,
        order: None,
        order_note: None,
        setup_time_s,
    };
    if let Some(row) = summary.noiseless() {
        let check = reference_check(&preset, &row.result)?;
        let first: Vec<f64> = row.result.param_history.iter().map(|p| p[0]).collect();
        let (order, note) = match estimate_order(&first, preset.truth[0]) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        };
        summary.check = check;
        summary.order = order;
        summary.order_note = note;
    }
    Ok((preset, spec, summary))
}

fn param_header(names: &[String]) -> Vec<String> {
    names.iter().map(|n| format!("{n}_c")).collect()
}

/// `table.csv`: the columns of the published tables.
pub fn results_table(s: &RunSummary) -> Table {
    let mut h = vec![
        "noise_percent".to_string(),
        "seed".into(),
        "cost".into(),
        "iterations".into(),
    ];
    h.extend(param_header(&s.params));
    let mut t = Table::new(&h);
    for r in &s.rows {
        let mut row = vec![
            num(100.0 * r.noise),
            r.seed.to_string(),
            num(r.cost),
            r.iterations.to_string(),
        ];
        row.extend(r.params.iter().map(|&p| num(p)));
        t.push(row);
    }
    t
}

/// `history.csv`: every accepted iterate of every run.
pub fn history_table(s: &RunSummary) -> Table {
    let mut h = vec![
        "noise_percent".to_string(),
        "seed".into(),
        "iteration".into(),
        "cost".into(),
    ];
    h.extend(s.params.iter().cloned());
    let mut t = Table::new(&h);
    for r in &s.rows {
        for (k, (c, p)) in r.result.cost_history.iter().zip(&r.result.param_history).enumerate() {
            let mut row = vec![num(100.0 * r.noise), r.seed.to_string(), k.to_string(), num(*c)];
            row.extend(p.iter().map(|&v| num(v)));
            t.push(row);
        }
    }
    t
}

fn surface(traj: &Trajectory, title: &str) -> String {
    let g = traj.grid();
    let rows = 60.min(g.nt() + 1);
    let cols = 80.min(g.n_nodes());
    let pick = |k: usize, n: usize, m: usize| if n <= 1 { 0 } else { k * (m - 1) / (n - 1) };
    let levels: Vec<usize> = (0..rows).map(|k| pick(k, rows, g.nt() + 1)).collect();
    let nodes: Vec<usize> = (0..cols).map(|k| pick(k, cols, g.n_nodes())).collect();
    let values: Vec<Vec<f64>> = levels
        .iter()
        .map(|&n| nodes.iter().map(|&i| traj.level(n)[i]).collect())
        .collect();
    let xs: Vec<f64> = nodes.iter().map(|&i| g.x(i)).collect();
    let ts: Vec<f64> = levels.iter().map(|&n| g.t(n)).collect();
    heatmap(title, "x", "t", &xs, &ts, &values)
}

fn write_plots(dir: &Path, preset: &Preset, spec: &InverseProblemSpec, s: &RunSummary) -> Result<()> {
    let Some(row) = s.noiseless().or(s.rows.first()) else {
        return Ok(());
    };
    let r = &row.result;
    let plots = dir.join("plots");
    let mut iterates = Plot::new(&format!("{}: iterates", s.preset), "iteration", "parameter");
    for (k, name) in s.params.iter().enumerate() {
        let pts = r
            .param_history
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64, p[k]))
            .collect();
        iterates = iterates.with(Series::new(format!("{name}_n"), pts));
        let last = r.param_history.len().saturating_sub(1).max(1) as f64;
        iterates =
            iterates.with(Series::new(format!("{name}_d"), vec![(0.0, s.truth[k]), (last, s.truth[k])]).dashed());
    }
    write_text(&plots.join("iterates.svg"), &iterates.render())?;
    let cost = Plot::new(&format!("{}: cost", s.preset), "iteration", "J")
        .log_y()
        .with(Series::new(
            "J",
            r.cost_history.iter().enumerate().map(|(i, c)| (i as f64, *c)).collect(),
        ));
    write_text(&plots.join("cost.svg"), &cost.render())?;
    if matches!(
        preset.family,
        Family::Affine { .. } | Family::Quadratic { .. } | Family::AlphaQuadratic
    ) {
        let (truth, got) = (preset.family.model(&s.truth)?, preset.family.model(&r.params)?);
        let curve = |m: &degen_core::DiffusionModel| -> Vec<(f64, f64)> {
            (0..=200)
                .map(|k| {
                    let x = preset.ell * k as f64 / 200.0;
                    (x, m.profile.eval(x).unwrap_or(f64::NAN))
                })
                .collect()
        };
        let plot = Plot::new(&format!("{}: coefficient profile", s.preset), "x", "a(x)")
            .with(Series::new("a_d", curve(&truth)))
            .with(Series::new("a_c", curve(&got)).dashed());
        write_text(&plots.join("coefficient.svg"), &plot.render())?;
    }
    if !preset.source.is_zero() {
        let model = preset.family.model(&r.params)?;
        let traj = solve_parabolic(
            &model,
            preset.kind,
            &spec.grid,
            &spec.grid.sample(preset.u0),
            &preset.source,
        )?;
        write_text(
            &plots.join("solution.svg"),
            &surface(&traj, &format!("{}: u(x, t) at recovered coefficient", s.preset)),
        )?;
    }
    Ok(())
}

/// `invert` / `noise-sweep`: run and write every artifact into `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let (preset, spec, summary) = run_inversions(cfg)?;
    let dir = &cfg.out;
    results_table(&summary).write(&dir.join("table.csv"))?;
    history_table(&summary).write(&dir.join("history.csv"))?;
    write_plots(dir, &preset, &spec, &summary)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_text(&dir.join("config.txt"), &cfg.to_text())?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ForwardSummary {
    pub preset: String,
    pub params: Vec<f64>,
    pub ell: f64,
    pub nx: usize,
    pub nt: usize,
    pub contractive: Option<bool>,
    pub max_violation: Option<f64>,
    pub final_l2: f64,
}

/// `forward`: solve with the preset's true coefficient, store a subsampled
/// trajectory, the synthesized observation and a surface plot.
pub fn forward(cfg: &ExperimentConfig) -> Result<ForwardSummary> {
    let preset = cfg.preset()?;
    let grid: Grid = preset.grid()?;
    let model = preset.family.model(&preset.truth)?;
    let traj = solve_parabolic(&model, preset.kind, &grid, &grid.sample(preset.u0), &preset.source)?;
    let dir = &cfg.out;

    let mut t = Table::new(&["t", "x", "u"]);
    let levels = 51.min(grid.nt() + 1);
    for k in 0..levels {
        let n = k * grid.nt() / (levels - 1).max(1);
        for (i, &u) in traj.level(n).iter().enumerate() {
            t.push(vec![num(grid.t(n)), num(grid.x(i)), num(u)]);
        }
    }
    t.write(&dir.join("trajectory.csv"))?;

    let obs = preset.build()?.observation;
    let obs_table = match &obs {
        Observation::InteriorAtT0 { gamma, beta, .. } => {
            let mut t = Table::new(&["x", "gamma", "beta"]);
            for (i, (g, b)) in gamma.values().iter().zip(beta.values()).enumerate() {
                t.push(vec![num(grid.x(i)), num(*g), num(*b)]);
            }
            t
        }
        Observation::BoundaryFlux { eta, .. } => {
            let mut t = Table::new(&["t", "eta"]);
            for (n, e) in eta.iter().enumerate() {
                t.push(vec![num(grid.t(n)), num(*e)]);
            }
            t
        }
    };
    obs_table.write(&dir.join("observation.csv"))?;
    write_text(
        &dir.join("plots").join("solution.svg"),
        &surface(&traj, &format!("{}: u(x, t)", preset.name)),
    )?;
    let diss = preset.source.is_zero().then(|| dissipativity_check(&traj));
    let summary = ForwardSummary {
        preset: preset.name.clone(),
        params: preset.truth.clone(),
        ell: preset.ell,
        nx: preset.nx,
        nt: preset.nt,
        contractive: diss.map(|d| d.contractive),
        max_violation: diss.map(|d| d.max_violation),
        final_l2: degen_core::grid::l2_norm_sq(&traj.last())?.sqrt(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}
