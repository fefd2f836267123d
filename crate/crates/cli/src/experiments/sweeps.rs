use std::sync::Arc;

use rayon::prelude::*;
use stochhom::brownian::sample_path;
use stochhom::effective::{build_effective_flux, p_range_for, MeanValueEngine};
use stochhom::fv::{solve_effective, solve_problem, Grid, GridField};
use stochhom::lab::{
    corrector_field, default_test_functions, eps_sweep, midpoint_nodes, young_measure_estimate,
    ConvergenceTable, Reference, SweepPlan,
};
use stochhom::model::{BoundaryMode, ProblemSpec, Variant};

use super::{csv, seeds, text, Assertion, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::setup::{build_setup, Setup};

pub const P2: &str = "\
[problem]
variant = stiff-source
T = 0.5
kappa0 = 0.5
initial = sin
amplitude = 0.5

[flux]
f1 = linear

[oscillation]
potential = sin

[grid]
L = 1

[sweep]
epsilons = 1/8, 1/16, 1/32, 1/64
seeds = 1, 2, 3
cells_per_eps = 16

[output]
fields = true
";

pub const YOUNG: &str = "\
[problem]
variant = stiff-source
T = 0.5
kappa0 = 0.5
initial = sin
amplitude = 0.5

[flux]
f1 = linear

[oscillation]
potential = sin

[sweep]
epsilons = 1/8, 1/16, 1/32
seeds = 1, 2, 3
cells_per_eps = 16
y_bins = 8
xi_bins = 32
";

pub const SHEAR: &str = "\
[problem]
variant = transport
T = 0.25
kappa0 = 0.5
initial = sin
phase = 0.5, 1.0

[flux]
f1 = linear

[noise]
model = additive

[oscillation]
velocity = shear
shear_mean = 1
shear_amplitude = 0.5
period = 1

[grid]
dim = 2
L = 0.25

[sweep]
epsilons = 1/4, 1/8, 1/16
seeds = 1, 2
min_cells = 128
nodes = 16
";

const MEAN_TOL: f64 = 1e-12;

fn base_plan(cfg: &Config, setup: &Setup, reference: Reference) -> Result<SweepPlan, CliError> {
    let spec = &setup.spec;
    let eps = cfg.f64_list("sweep", "epsilons", &[spec.epsilon])?;
    let phis = default_test_functions(spec.domain.dim, spec.domain.half_width);
    let mut plan = SweepPlan::new(spec.clone(), eps, seeds(cfg)?, phis, reference);
    plan.times = cfg.f64_list("sweep", "times", &[])?;
    plan.scheme = setup.scheme;
    plan.min_cells = cfg.usize("sweep", "min_cells", 16)?;
    plan.cells_per_eps = cfg.f64("sweep", "cells_per_eps", 16.0)?;
    plan.path_level = cfg.usize("sweep", "path_level", 0)? as u32;
    Ok(plan)
}

/// Flux table covering every state the homogenized run can reach: the
/// initial flow coordinates widened by six standard deviations of
/// `kappa0 W(T)`.
fn table_for(
    cfg: &Config,
    spec: &ProblemSpec,
) -> Result<Arc<stochhom::effective::EffectiveFluxTable>, CliError> {
    let v = spec.potential().expect("stiff-source").clone();
    let engine = MeanValueEngine::new(v.clone(), MEAN_TOL);
    let (a_lo, a_hi) = spec.alpha_bounds(256)?;
    let spread = 6.0 * spec.kappa0().abs() * spec.final_time.sqrt() + 0.5;
    let p_range = match cfg.get("sweep", "p_range") {
        Some(_) => cfg.pair("sweep", "p_range", (0.0, 1.0))?,
        None => p_range_for(spec.flux(), &v, &engine, (a_lo - spread, a_hi + spread))?,
    };
    let nodes = cfg.usize("sweep", "p_nodes", 401)?;
    Ok(Arc::new(build_effective_flux(
        spec.flux(),
        &v,
        &engine,
        p_range,
        nodes,
    )?))
}

/// For a linear `f_1 = c u` on a periodic line the homogenized solution is
/// transported along characteristics in flow coordinates:
/// `ubar(t, x) = gbar(v_0(x - c t) + kappa0 W(t))`.
fn linear_characteristics(
    spec: &ProblemSpec,
    table: &Arc<stochhom::effective::EffectiveFluxTable>,
) -> Option<Reference> {
    let Variant::StiffSource { flux, v0, .. } = &spec.variant else {
        return None;
    };
    let f1 = flux.f1();
    let (lo, hi) = flux.range;
    let c = f1.d1(0.0);
    let linear = [lo, 0.5 * lo, 0.5 * hi, hi]
        .iter()
        .all(|&u| f1.d2(u) == 0.0 && f1.d1(u) == c && f1.eval(u) == c * u);
    if !linear || spec.domain.dim != 1 || spec.domain.boundary != BoundaryMode::Periodic {
        return None;
    }
    let (v0, table, k0, l) = (
        v0.clone(),
        table.clone(),
        spec.kappa0(),
        spec.domain.half_width,
    );
    Some(Reference::Exact(Arc::new(move |t, w, x| {
        let xs = (x[0] - c * t + l).rem_euclid(2.0 * l) - l;
        table.gbar(v0(&[xs]) + k0 * w).unwrap_or(f64::NAN)
    })))
}

fn p2_plan(cfg: &Config) -> Result<SweepPlan, CliError> {
    let setup = build_setup(cfg)?;
    if !setup.spec.is_stiff_source() {
        return Err(CliError::Validation(
            "this sweep needs problem.variant = stiff-source".into(),
        ));
    }
    let table = table_for(cfg, &setup.spec)?;
    let reference = linear_characteristics(&setup.spec, &table).unwrap_or(Reference::Effective);
    let mut plan = base_plan(cfg, &setup, reference)?;
    plan.table = Some(table);
    if cfg.get("sweep", "y_bins").is_some() || cfg.get("sweep", "xi_bins").is_some() {
        plan.young = Some((
            cfg.usize("sweep", "y_bins", 8)?,
            cfg.usize("sweep", "xi_bins", 32)?,
        ));
    }
    plan.validate()?;
    Ok(plan)
}

/// `(u_eps, ubar, corrector)` at the final time for one `(seed, eps)`.
fn final_fields(
    plan: &SweepPlan,
    seed: u64,
    eps: f64,
) -> Result<(GridField, GridField, GridField), CliError> {
    let spec = plan.spec.with_epsilon(eps);
    let n = plan.cells(eps);
    let path = sample_path(seed, 0, spec.final_time, plan.path_level)?;
    let run = solve_problem(&spec, n, &path, &plan.scheme, &[])?;
    let u = run.final_field();
    let end = run.snapshots.last().expect("final snapshot");
    let table = plan
        .table
        .as_ref()
        .expect("stiff-source plan carries a table");
    let ubar = match &plan.reference {
        Reference::Exact(f) => {
            let mut g = GridField::from_fn(u.grid, u.boundary, |x| f(end.time, end.w, x));
            g.time = end.time;
            g
        }
        _ => {
            let Variant::StiffSource { v0, .. } = &spec.variant else {
                unreachable!()
            };
            let grid = Grid::new(spec.domain.dim, n, spec.domain.half_width)?;
            solve_effective(
                table,
                &**v0,
                grid,
                spec.domain.boundary,
                spec.kappa0(),
                &path,
                &plan.scheme,
                spec.final_time,
                &[],
            )?
            .final_field()
        }
    };
    let corr = corrector_field(&ubar, table, &spec)?;
    Ok((u, ubar, corr))
}

fn tables(out: &mut Outcome, t: &ConvergenceTable) {
    out.file("convergence.csv", csv(|w| t.write_csv(w)));
    out.file("ratios.csv", csv(|w| t.write_ratios_csv(w)));
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::INFINITY, f64::min)
}

pub fn p2(cfg: &Config) -> Result<Outcome, CliError> {
    let plan = p2_plan(cfg)?;
    let table = eps_sweep(&plan)?;
    let ratios = table.ratios();
    let mut out = Outcome::default();
    tables(&mut out, &table);

    if cfg.bool("output", "fields", false)? {
        let seed = plan.seeds[0];
        let fields = plan
            .epsilons
            .par_iter()
            .map(|&eps| final_fields(&plan, seed, eps).map(|f| (eps, f)))
            .collect::<Result<Vec<_>, _>>()?;
        for (k, (eps, (u, ubar, corr))) in fields.iter().enumerate() {
            let rows = (0..u.values.len()).map(|i| {
                format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    eps,
                    u.grid.center(i)[0],
                    u.values[i],
                    ubar.values[i],
                    corr.values[i]
                )
            });
            out.file(
                format!("snapshot_eps{k}.csv"),
                text("eps,x,u,ubar,corrector", rows),
            );
        }
    }

    if ratios.is_empty() {
        return Err(CliError::Validation(
            "sweep.epsilons needs at least two values".into(),
        ));
    }
    out.check(Assertion::at_most(
        "weak-star ratio per eps halving",
        max_of(ratios.iter().flat_map(|r| r.weak_star.iter().copied())),
        0.7,
    ));
    let corr = || ratios.iter().filter_map(|r| r.corrector);
    out.check(Assertion::at_most(
        "corrector ratio (max)",
        max_of(corr()),
        0.7,
    ));
    out.check(Assertion::at_least(
        "corrector ratio (min)",
        min_of(corr()),
        0.4,
    ));
    // corrector error = C dx with C stable across eps
    let cs: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.time > 0.0)
        .filter_map(|r| {
            r.corrector
                .map(|c| c / (2.0 * plan.spec.domain.half_width / r.n as f64))
        })
        .collect();
    out.check(Assertion::at_most(
        "corrector constant spread (max C / min C)",
        max_of(cs.iter().copied()) / min_of(cs.iter().copied()),
        2.0,
    ));
    Ok(out)
}

pub fn young(cfg: &Config) -> Result<Outcome, CliError> {
    let plan = p2_plan(cfg)?;
    let Some((yb, xb)) = plan.young else {
        return Err(CliError::Validation(
            "young-concentration needs sweep.y_bins and sweep.xi_bins".into(),
        ));
    };
    let table = eps_sweep(&plan)?;
    let ratios = table.ratios();
    if ratios.is_empty() {
        return Err(CliError::Validation(
            "sweep.epsilons needs at least two values".into(),
        ));
    }
    let mut out = Outcome::default();
    tables(&mut out, &table);

    let seed = plan.seeds[0];
    let period = plan
        .spec
        .potential()
        .and_then(|v| v.period())
        .unwrap_or(1.0);
    let hists = plan
        .epsilons
        .par_iter()
        .map(|&eps| -> Result<Vec<u8>, CliError> {
            let (u, _, corr) = final_fields(&plan, seed, eps)?;
            let residual = GridField {
                values: u
                    .values
                    .iter()
                    .zip(&corr.values)
                    .map(|(a, b)| a - b)
                    .collect(),
                ..u
            };
            let h = young_measure_estimate(&residual, eps, period, yb, xb)?;
            Ok(csv(|w| h.write_csv(w)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (k, h) in hists.into_iter().enumerate() {
        out.file(format!("young_eps{k}.csv"), h);
    }

    out.check(Assertion::at_most(
        "young variance ratio per eps halving",
        max_of(ratios.iter().filter_map(|r| r.young_variance)),
        0.5,
    ));
    Ok(out)
}

pub fn shear(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    if setup.spec.is_stiff_source() {
        return Err(CliError::Validation(
            "the shear sweep needs problem.variant = transport".into(),
        ));
    }
    let m = cfg.usize("sweep", "nodes", 16)?;
    if m == 0 {
        return Err(CliError::Validation("sweep.nodes must be positive".into()));
    }
    let (y_nodes, weights) = midpoint_nodes(m, setup.spec.domain.dim);
    let plan = base_plan(cfg, &setup, Reference::Family { y_nodes, weights })?;
    plan.validate()?;
    let table = eps_sweep(&plan)?;
    let ratios = table.ratios();
    if ratios.is_empty() {
        return Err(CliError::Validation(
            "sweep.epsilons needs at least two values".into(),
        ));
    }
    let mut out = Outcome::default();
    tables(&mut out, &table);
    out.check(Assertion::below(
        "weak-star ratio per eps halving",
        max_of(ratios.iter().flat_map(|r| r.weak_star.iter().copied())),
        1.0,
    ));
    Ok(out)
}
