//! Special solutions must be kept exactly by the scheme: the transport
//! problem through its constant state, the stiff-source problem through the
//! well-balanced reconstruction.

use rayon::prelude::*;
use stochhom::brownian::sample_path;
use stochhom::fv::solve_problem;

use super::{seeds, text, Assertion, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::setup::build_setup;

pub const P1: &str = "\
[problem]
variant = transport
T = 1
kappa0 = 0.5
initial = special
alpha = 0.4

[flux]
f1 = burgers

[noise]
model = sinh

[grid]
n = 512

[scheme]
min_level = 10

[sweep]
seeds = 1, 2, 3

[output]
fields = true
";

pub const P2: &str = "\
[problem]
variant = stiff-source
T = 1
eps = 1/16
kappa0 = 0.5
initial = special
alpha = 0.3

[flux]
f1 = cubic
delta0 = 1

[oscillation]
potential = sin

[grid]
n = 1024

[sweep]
seeds = 1, 2, 3

[output]
fields = true
";

struct Run {
    seed: u64,
    w: f64,
    level: u32,
    deviation: f64,
    field: Vec<u8>,
}

pub fn invariance(cfg: &Config) -> Result<Outcome, CliError> {
    if cfg.string("problem", "initial", "sin") != "special" {
        return Err(CliError::Validation(
            "problem.initial must be 'special' for the invariance experiments".into(),
        ));
    }
    let setup = build_setup(cfg)?;
    let spec = &setup.spec;
    let alpha = cfg.f64("problem", "alpha", 0.0)?;
    let level = setup
        .scheme
        .min_level
        .max(cfg.usize("sweep", "path_level", 0)? as u32);
    let fields = cfg.bool("output", "fields", false)?;
    let tol = if spec.is_stiff_source() { 1e-9 } else { 1e-10 };

    let runs = seeds(cfg)?
        .par_iter()
        .map(|&seed| -> Result<Run, CliError> {
            let path = sample_path(seed, 0, spec.final_time, level)?;
            let traj = solve_problem(spec, setup.n, &path, &setup.scheme, &[])?;
            let end = traj.snapshots.last().expect("final snapshot");
            let grid = traj.grid();
            let mut deviation: f64 = 0.0;
            let mut rows = Vec::new();
            for (i, u) in end.values.iter().enumerate() {
                let x = &grid.center(i)[..grid.dim];
                let psi = spec.special_solution(alpha, end.w, x)?;
                deviation = deviation.max((u - psi).abs());
                if fields {
                    let coords: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
                    rows.push(format!("{},{u:.17e},{psi:.17e}", coords.join(",")));
                }
            }
            let header = if grid.dim == 1 {
                "x,u,psi"
            } else {
                "x,y,u,psi"
            };
            Ok(Run {
                seed,
                w: end.w,
                level: traj.level,
                deviation,
                field: if fields {
                    text(header, rows)
                } else {
                    Vec::new()
                },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outcome::default();
    out.file(
        "deviations.csv",
        text(
            "seed,W_T,steps,max_deviation",
            runs.iter().map(|r| {
                format!(
                    "{},{:.17e},{},{:.17e}",
                    r.seed,
                    r.w,
                    1u64 << r.level,
                    r.deviation
                )
            }),
        ),
    );
    for r in &runs {
        if fields {
            out.file(format!("field_seed{}.csv", r.seed), r.field.clone());
        }
    }
    let worst = runs.iter().map(|r| r.deviation).fold(0.0, f64::max);
    out.check(Assertion::at_most("max |u(T) - psi(T)|", worst, tol));
    if !spec.is_stiff_source() && setup.scheme.min_level > 0 {
        let max_level = runs.iter().map(|r| r.level).max().unwrap_or(0);
        out.check(Assertion::equals(
            "time steps",
            (1u64 << max_level) as f64,
            (1u64 << setup.scheme.min_level) as f64,
        ));
    }
    Ok(out)
}
