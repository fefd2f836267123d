use rayon::prelude::*;
use stochhom::effective::{build_effective_flux, check_miraculous, p_range_for, MeanValueEngine};
use stochhom::model::{FlowPrimitive, FluxInverseFlow, OscillatoryPotential, ScalarFlux};

use super::{csv, text, Assertion, Outcome};
use crate::config::Config;
use crate::error::CliError;
use crate::setup::{build_flux, build_potential, build_setup};

pub const EFFECTIVE_FLUX: &str = "\
[problem]
variant = stiff-source

[flux]
f1 = linear
f2 = burgers

[oscillation]
potential = sin

[grid]
dim = 2

[sweep]
probes = -1, 0, 0.5, 1
p_range = -2, 2
p_nodes = 401
";

pub const MIRACULOUS: &str = "\
[problem]
variant = stiff-source

[flux]
f1 = cubic
delta0 = 1

[oscillation]
potential = sin

[sweep]
v_range = -2, 2
v_points = 41
p_nodes = 801
";

const MEAN_TOL: f64 = 1e-13;

/// Midpoint average over one period; exact to roundoff for smooth periodic
/// integrands at this resolution.
fn period_mean(v: &OscillatoryPotential, mut f: impl FnMut(f64) -> f64) -> f64 {
    let p = v.period().unwrap_or(1.0);
    let m = 4096;
    (0..m)
        .map(|j| f(v.value((j as f64 + 0.5) * p / m as f64)))
        .sum::<f64>()
        / m as f64
}

/// `q` with `M[g(q + V)] = p`, by bisection.
fn solve_q(
    p: f64,
    flux: &ScalarFlux,
    g: &FluxInverseFlow,
    v: &OscillatoryPotential,
) -> Result<f64, CliError> {
    let a = v.amplitude_sum() + v.mean().abs() + 1.0;
    let c = flux.f1().eval(p);
    let (mut lo, mut hi) = (c - a, c + a);
    let mean = |q: f64| -> Result<f64, CliError> {
        let mut err = None;
        let m = period_mean(v, |z| {
            g.forward(q + z).unwrap_or_else(|e| {
                err = Some(e);
                f64::NAN
            })
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(m),
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn effective_flux(cfg: &Config) -> Result<Outcome, CliError> {
    let dim = cfg.usize("grid", "dim", 1)?;
    if !(1..=2).contains(&dim) {
        return Err(CliError::Validation(format!(
            "grid.dim must be 1 or 2, got {dim}"
        )));
    }
    // Only the averaging formulas are exercised here, so f_k' >= 0 for
    // k >= 2 is not required.
    let flux = build_flux(cfg, dim)?;
    flux.check_range()?;
    let delta0 = flux
        .delta0
        .ok_or_else(|| CliError::Validation("flux.delta0 is required for a nonlinear f1".into()))?;
    let v = build_potential(cfg)?;
    if v.period().is_none() {
        return Err(CliError::Validation(
            "effective-flux needs a periodic potential".into(),
        ));
    }
    let engine = MeanValueEngine::new(v.clone(), MEAN_TOL);
    let p_range = cfg.pair("sweep", "p_range", (-2.0, 2.0))?;
    let nodes = cfg.usize("sweep", "p_nodes", 401)?;
    let table = build_effective_flux(&flux, &v, &engine, p_range, nodes)?;
    let probes = cfg.f64_list("sweep", "probes", &[-1.0, 0.0, 0.5, 1.0])?;
    let g = FluxInverseFlow::new(flux.f1().clone(), delta0)?;

    let rows = probes
        .par_iter()
        .map(|&p| -> Result<Vec<(f64, usize, f64, f64)>, CliError> {
            let q = solve_q(p, &flux, &g, &v)?;
            let mut out = vec![(p, 1, table.fbar1(p)?, q)];
            for k in 2..=flux.dim() {
                let fk = &flux.components[k - 1];
                let direct = period_mean(&v, |z| fk.eval(g.forward(q + z).unwrap_or(f64::NAN)));
                out.push((p, k, table.fbar_k(k, p)?, direct));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, _>>()?
        .concat();

    let mut out = Outcome::default();
    out.file("table.csv", csv(|w| table.write_csv(w)));
    out.file(
        "probes.csv",
        text(
            "p,k,table,direct,abs_diff",
            rows.iter().map(|(p, k, t, d)| {
                format!("{p:.17e},{k},{t:.17e},{d:.17e},{:.17e}", (t - d).abs())
            }),
        ),
    );
    let worst = rows
        .iter()
        .map(|(_, _, t, d)| (t - d).abs())
        .fold(0.0, f64::max);
    out.check(Assertion::at_most(
        "max |table - direct average|",
        worst,
        1e-8,
    ));
    out.check(Assertion::at_most(
        "fixed point residual",
        table.fixed_point_residual,
        1e-10,
    ));
    Ok(out)
}

pub fn miraculous(cfg: &Config) -> Result<Outcome, CliError> {
    let setup = build_setup(cfg)?;
    let spec = &setup.spec;
    let flux = spec.flux();
    let v = spec
        .potential()
        .ok_or_else(|| CliError::Validation("miraculous needs the stiff-source problem".into()))?
        .clone();
    let engine = MeanValueEngine::new(v.clone(), MEAN_TOL);
    let (lo, hi) = cfg.pair("sweep", "v_range", (-2.0, 2.0))?;
    let m = cfg.usize("sweep", "v_points", 41)?;
    if m < 2 {
        return Err(CliError::Validation(
            "sweep.v_points must be at least 2".into(),
        ));
    }
    let margin = 0.25 * (hi - lo);
    let p_range = p_range_for(flux, &v, &engine, (lo - margin, hi + margin))?;
    let table = build_effective_flux(
        flux,
        &v,
        &engine,
        p_range,
        cfg.usize("sweep", "p_nodes", 801)?,
    )?;
    let grid: Vec<f64> = (0..m)
        .map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64)
        .collect();
    let per_point = grid
        .par_iter()
        .map(|&x| check_miraculous(&table, flux, &v, &engine, &[x]).map(|r| (x, r)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut out = Outcome::default();
    out.file("table.csv", csv(|w| table.write_csv(w)));
    out.file(
        "residuals.csv",
        text(
            "v,sigma_residual,h_residual",
            per_point
                .iter()
                .map(|(x, r)| format!("{x:.17e},{:.17e},{:.17e}", r.sigma_residual, r.h_residual)),
        ),
    );
    let s = per_point
        .iter()
        .map(|(_, r)| r.sigma_residual)
        .fold(0.0, f64::max);
    let h = per_point
        .iter()
        .map(|(_, r)| r.h_residual)
        .fold(0.0, f64::max);
    out.check(Assertion::at_most("sigma identity residual", s, 1e-7));
    out.check(Assertion::at_most("h identity residual", h, 1e-7));
    Ok(out)
}
