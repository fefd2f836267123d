use std::f64::consts::PI;

use rayon::prelude::*;
use stochhom::brownian::{node_normal, sample_path};
use stochhom::fv::GridField;
use stochhom::lab::{TestFunction, WindowKind};
use stochhom::verify::{
    comparison_test, kruzkov_residual, kruzkov_stable, l1_contraction_test, viscosity_crosscheck,
    WeightFunction,
};

use super::{seeds, text, Assertion, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::setup::{build_setup, Setup};

pub const COMPARISON: &str = "\
[problem]
variant = stiff-source
T = 0.5
eps = 1/8
kappa0 = 0.5
initial = zero

[flux]
f1 = cubic
delta0 = 1

[oscillation]
potential = sin

[grid]
n = 128

[sweep]
seeds = 1
paths = 16
path_level = 4
";

pub const CONTRACTION: &str = "\
[problem]
variant = transport
T = 1
kappa0 = 0.5
initial = bump
amplitude = 1

[flux]
f1 = burgers

[noise]
model = sinh

[grid]
L = 4
n = 256
boundary = far-field
lower = 0
upper = 0

[sweep]
seeds = 1
paths = 64
weight = 1
";

pub const KRUZKOV: &str = "\
[problem]
variant = stiff-source
T = 0.5
eps = 1/8
kappa0 = 0.5
initial = sin
amplitude = 0.5

[flux]
f1 = linear

[oscillation]
potential = sin

[sweep]
seeds = 0, 1, 2
resolutions = 256, 512
alphas = -0.5, 0.2
path_level = 6
";

pub const VISCOSITY: &str = "\
[problem]
variant = transport
T = 0.5
kappa0 = 0.5
initial = sin

[flux]
f1 = burgers

[noise]
model = sinh

[grid]
n = 128

[sweep]
seeds = 5
factors = 4, 2, 1
path_level = 4
";

fn one_dimensional(setup: &Setup, what: &str) -> Result<(), CliError> {
    if setup.spec.domain.dim != 1 {
        return Err(CliError::Validation(format!("{what} runs on grid.dim = 1")));
    }
    Ok(())
}

fn smooth(c: &[f64], l: f64, x: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(j, a)| a * ((j + 1) as f64 * PI * x / l + j as f64).sin())
        .sum()
}

// Stream ids of the random initial pairs; paths use streams 0..paths.
const LOW_STREAM: u64 = 1 << 32;
const GAP_STREAM: u64 = 2 << 32;

pub fn comparison(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    one_dimensional(&setup, "comparison")?;
    let spec = &setup.spec;
    let l = spec.domain.half_width;
    let seed = seeds(cfg)?[0];
    let paths = cfg.usize("sweep", "paths", 16)?;
    let level = cfg.usize("sweep", "path_level", 0)? as u32;
    let base = GridField::initial(spec, setup.n)?;

    let rows = (0..paths as u64)
        .into_par_iter()
        .map(|j| -> Result<String, CliError> {
            let c: Vec<f64> = (0..3)
                .map(|m| 0.5 * node_normal(seed, LOW_STREAM + j, 0, m))
                .collect();
            let gap: Vec<f64> = (0..2)
                .map(|m| 0.25 * node_normal(seed, GAP_STREAM + j, 0, m))
                .collect();
            let g = base.grid;
            let low = GridField {
                values: base
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, u)| u + smooth(&c, l, g.center(i)[0]))
                    .collect(),
                ..base.clone()
            };
            let high = GridField {
                values: low
                    .values
                    .iter()
                    .enumerate()
                    .map(|(i, u)| u + smooth(&gap, l, g.center(i)[0]).abs())
                    .collect(),
                ..base.clone()
            };
            let path = sample_path(seed, j, spec.final_time, level)?;
            let r = comparison_test(spec, &low, &high, &path, &setup.scheme)?;
            Ok(format!(
                "{j},{},{:.17e},{},{}",
                r.violations, r.max_violation, r.steps, r.cells
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total: usize = rows
        .iter()
        .map(|r| {
            r.split(',')
                .nth(1)
                .and_then(|v| v.parse::<usize>().ok())
                .unwrap_or(0)
        })
        .sum();

    let mut out = Outcome::default();
    out.file(
        "comparison.csv",
        text("path,violations,max_violation,steps,cells", rows),
    );
    out.check(Assertion::equals("ordering violations", total as f64, 0.0));
    Ok(out)
}

pub fn contraction(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    one_dimensional(&setup, "contraction")?;
    let spec = &setup.spec;
    let t = spec.final_time;
    let times = cfg.f64_list("sweep", "times", &[0.25 * t, 0.5 * t, t])?;
    let weight =
        WeightFunction::for_boundary(spec.domain.boundary, cfg.f64("sweep", "weight", 1.0)?);
    if let WeightFunction::Polynomial(n) = weight {
        WeightFunction::polynomial(n, spec.domain.dim)?;
    }
    let u_a = GridField::initial(spec, setup.n)?;
    // second datum: u_a plus a signed two-bump perturbation
    let u_b = GridField {
        values: u_a
            .values
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let x = u_a.grid.center(i)[0];
                u + 0.5 * (-2.0 * (x - 0.5).powi(2)).exp() - 0.2 * (-(x + 1.0).powi(2)).exp()
            })
            .collect(),
        ..u_a.clone()
    };
    let paths = cfg.usize("sweep", "paths", 64)?;
    let r = l1_contraction_test(
        spec,
        &u_a,
        &u_b,
        paths,
        weight,
        &times,
        &setup.scheme,
        seeds(cfg)?[0],
    )?;

    let mut out = Outcome::default();
    out.file(
        "contraction.csv",
        text(
            "t,mean,half_width,bound,rate,initial,paths",
            r.rows.iter().map(|row| {
                format!(
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                    row.time, row.mean, row.half_width, row.bound, r.rate, r.initial, r.n_paths
                )
            }),
        ),
    );
    for row in &r.rows {
        out.check(Assertion::at_most(
            format!("E int |u_a - u_b| w at t = {}", row.time),
            row.mean,
            row.bound,
        ));
    }
    Ok(out)
}

pub fn kruzkov(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    one_dimensional(&setup, "kruzkov")?;
    let spec = &setup.spec;
    let l = spec.domain.half_width;
    let phi = TestFunction::new(WindowKind::Bump, vec![0.0], vec![0.5 * l])?;
    let mut ns = cfg.u64_list("sweep", "resolutions", &[256, 512])?;
    ns.sort_unstable();
    if ns.len() < 2 {
        return Err(CliError::Validation(
            "sweep.resolutions needs at least two grids".into(),
        ));
    }
    let alphas = cfg.f64_list("sweep", "alphas", &[0.0])?;
    let level = cfg.usize("sweep", "path_level", 0)? as u32;
    let jobs: Vec<(u64, f64)> = seeds(cfg)?
        .iter()
        .flat_map(|&s| alphas.iter().map(move |&a| (s, a)))
        .collect();

    let results = jobs
        .par_iter()
        .map(|&(seed, alpha)| -> Result<_, CliError> {
            let path = sample_path(seed, 0, spec.final_time, level)?;
            let reports = ns
                .iter()
                .map(|&n| kruzkov_residual(spec, n as usize, &path, alpha, &phi, &setup.scheme))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((seed, alpha, reports))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::new();
    let mut unstable = 0usize;
    for (seed, alpha, reports) in &results {
        for (n, r) in ns.iter().zip(reports) {
            rows.push(format!(
                "{seed},{alpha:.17e},{n},{:.17e},{:.17e},{:.17e}",
                r.dx, r.residual, r.c_res
            ));
        }
        unstable += reports
            .windows(2)
            .filter(|w| !kruzkov_stable(&w[0], &w[1]))
            .count();
    }
    let mut out = Outcome::default();
    out.file("kruzkov.csv", text("seed,alpha,n,dx,residual,c_res", rows));
    out.check(Assertion::equals(
        "residual constants unstable under refinement",
        unstable as f64,
        0.0,
    ));
    Ok(out)
}

pub fn viscosity(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    let spec = &setup.spec;
    let factors = cfg.f64_list("sweep", "factors", &[4.0, 2.0, 1.0])?;
    let level = cfg.usize("sweep", "path_level", 0)? as u32;
    let reports = seeds(cfg)?
        .par_iter()
        .map(|&seed| -> Result<_, CliError> {
            let path = sample_path(seed, 0, spec.final_time, level)?;
            Ok((
                seed,
                viscosity_crosscheck(spec, setup.n, &path, &setup.scheme, &factors)?,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (seed, r) in &reports {
        for ((f, nu), d) in factors.iter().zip(&r.nus).zip(&r.distances) {
            rows.push(format!(
                "{seed},{f:.17e},{nu:.17e},{d:.17e},{:.17e}",
                r.truncation
            ));
        }
        out.check(Assertion::equals(
            format!("seed {seed}: distances decrease with viscosity"),
            r.monotone as u8 as f64,
            1.0,
        ));
        let smallest = r.distances.iter().copied().fold(f64::INFINITY, f64::min);
        out.check(Assertion::at_most(
            format!("seed {seed}: smallest distance vs 2x truncation estimate"),
            smallest,
            2.0 * r.truncation,
        ));
    }
    out.file(
        "viscosity.csv",
        text("seed,factor,nu,distance,truncation", rows),
    );
    Ok(out)
}
