//! Turns a configuration into a validated problem, scheme and grid size.

use std::f64::consts::PI;
use std::sync::Arc;

use stochhom::fv::{FluxKind, SchemeConfig};
use stochhom::model::{
    validate_problem, BoundaryMode, Domain, FluxComponent, OscillatoryPotential, PointFn,
    ProblemSpec, ScalarFlux, SmoothFn, StochasticFlowModel, ValidationReport, VelocityField,
};

use crate::config::Config;
use crate::error::CliError;

pub struct Setup {
    pub spec: ProblemSpec,
    pub scheme: SchemeConfig,
    pub n: usize,
    pub report: ValidationReport,
}

impl std::fmt::Debug for Setup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Setup")
            .field("spec", &self.spec)
            .field("scheme", &self.scheme)
            .field("n", &self.n)
            .finish()
    }
}

fn choice<'a>(
    cfg: &'a Config,
    section: &str,
    key: &str,
    default: &'a str,
    allowed: &[&str],
) -> Result<&'a str, CliError> {
    let v = cfg.string(section, key, default);
    if allowed.contains(&v) {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "{section}.{key}: '{v}' is not one of {}",
            allowed.join(", ")
        )))
    }
}

fn flux_component(name: &str) -> FluxComponent {
    match name {
        "linear" => FluxComponent::monotone(SmoothFn::linear(1.0)),
        "burgers" => FluxComponent::new(SmoothFn::burgers(), vec![0.0]),
        _ => FluxComponent::monotone(SmoothFn::cubic()),
    }
}

const FLUXES: [&str; 3] = ["linear", "burgers", "cubic"];

/// Flux of `[flux]`: `f1`, plus `f2` when `components` is 2.
pub fn build_flux(cfg: &Config, components: usize) -> Result<ScalarFlux, CliError> {
    let f1 = choice(cfg, "flux", "f1", "linear", &FLUXES)?;
    let mut comps = vec![flux_component(f1)];
    if components == 2 {
        let f2 = choice(cfg, "flux", "f2", f1, &FLUXES)?;
        comps.push(flux_component(f2));
    } else if cfg.get("flux", "f2").is_some() {
        return Err(CliError::Validation(
            "flux.f2 is only used with grid.dim = 2".into(),
        ));
    }
    // u -> u has f1' = 1 everywhere, so its bound is known
    let delta0 = match cfg.opt_f64("flux", "delta0")? {
        Some(d) => Some(d),
        None if f1 == "linear" => Some(1.0),
        None => None,
    };
    let range = cfg.pair("flux", "range", (-20.0, 20.0))?;
    Ok(ScalarFlux::new(comps, delta0, range))
}

pub fn build_potential(cfg: &Config) -> Result<OscillatoryPotential, CliError> {
    let kind = choice(cfg, "oscillation", "potential", "sin", &["sin", "zero"])?;
    Ok(match kind {
        "sin" => {
            let period = cfg.f64("oscillation", "period", 1.0)?;
            if !(period > 0.0) {
                return Err(CliError::Validation(
                    "oscillation.period must be positive".into(),
                ));
            }
            OscillatoryPotential::sine(cfg.f64("oscillation", "amplitude", 1.0)?, period)
        }
        _ => OscillatoryPotential::zero(),
    })
}

fn build_velocity(cfg: &Config, dim: usize) -> Result<VelocityField, CliError> {
    let kind = choice(
        cfg,
        "oscillation",
        "velocity",
        "constant",
        &["constant", "shear"],
    )?;
    Ok(match kind {
        "constant" => VelocityField::Constant(vec![cfg.f64("oscillation", "speed", 1.0)?; dim]),
        _ => {
            let b = OscillatoryPotential::sine(
                cfg.f64("oscillation", "shear_amplitude", 0.5)?,
                cfg.f64("oscillation", "period", 1.0)?,
            )
            .with_offset(cfg.f64("oscillation", "shear_mean", 1.0)?);
            VelocityField::Shear { c1: 0.0, b }
        }
    })
}

/// Macroscopic profile of `[problem] initial` on the box `[-l, l)^d`.
pub fn initial_profile(cfg: &Config, l: f64) -> Result<PointFn, CliError> {
    let kind = choice(
        cfg,
        "problem",
        "initial",
        "sin",
        &["sin", "cos", "zero", "constant", "bump", "special"],
    )?;
    let a = cfg.f64("problem", "amplitude", 1.0)?;
    let c = cfg.f64("problem", "offset", 0.0)?;
    let phases = cfg.f64_list("problem", "phase", &[0.0])?;
    if phases.is_empty() {
        return Err(CliError::Validation(
            "problem.phase needs at least one value".into(),
        ));
    }
    let phase = move |k: usize| phases[k.min(phases.len() - 1)];
    Ok(match kind {
        "sin" => Arc::new(move |x: &[f64]| {
            c + a * x
                .iter()
                .enumerate()
                .map(|(k, v)| (PI * v / l + phase(k)).sin())
                .product::<f64>()
        }),
        "cos" => Arc::new(move |x: &[f64]| {
            c + a * x
                .iter()
                .enumerate()
                .map(|(k, v)| (PI * v / l + phase(k)).cos())
                .product::<f64>()
        }),
        "zero" => Arc::new(|_: &[f64]| 0.0),
        "constant" => Arc::new(move |_: &[f64]| c),
        "bump" => Arc::new(move |x: &[f64]| c + a * (-x.iter().map(|v| v * v).sum::<f64>()).exp()),
        _ => {
            let alpha = cfg.f64("problem", "alpha", 0.0)?;
            Arc::new(move |_: &[f64]| alpha)
        }
    })
}

fn positive(cfg: &Config, section: &str, key: &str, default: f64) -> Result<f64, CliError> {
    let v = cfg.f64(section, key, default)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "{section}.{key} must be positive, got {v}"
        )))
    }
}

pub fn build_scheme(cfg: &Config) -> Result<SchemeConfig, CliError> {
    let name = cfg.string("scheme", "flux", "godunov");
    let flux: FluxKind = name
        .parse()
        .map_err(|e| CliError::Validation(format!("scheme.flux: {e}")))?;
    let scheme = SchemeConfig {
        flux,
        cfl: cfg.f64("scheme", "cfl", 0.9)?,
        viscosity: cfg.f64("scheme", "viscosity", 0.0)?,
        well_balanced: cfg.bool("scheme", "well_balanced", true)?,
        min_level: cfg.usize("scheme", "min_level", 0)? as u32,
        record_steps: false,
    };
    scheme
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(scheme)
}

/// Builds and validates the problem; every failed invariant is reported.
pub fn build_setup(cfg: &Config) -> Result<Setup, CliError> {
    let variant = choice(
        cfg,
        "problem",
        "variant",
        "stiff-source",
        &["transport", "stiff-source"],
    )?;
    let dim = cfg.usize("grid", "dim", 1)?;
    if !(1..=2).contains(&dim) {
        return Err(CliError::Validation(format!(
            "grid.dim must be 1 or 2, got {dim}"
        )));
    }
    let l = positive(cfg, "grid", "L", 1.0)?;
    let boundary = match choice(
        cfg,
        "grid",
        "boundary",
        "periodic",
        &["periodic", "far-field"],
    )? {
        "periodic" => BoundaryMode::Periodic,
        _ => BoundaryMode::FarField {
            lower: cfg.f64("grid", "lower", 0.0)?,
            upper: cfg.f64("grid", "upper", 0.0)?,
        },
    };
    let domain = Domain {
        dim,
        half_width: l,
        boundary,
    };
    let eps = positive(cfg, "problem", "eps", 0.125)?;
    let t = positive(cfg, "problem", "T", 0.5)?;
    let kappa0 = cfg.f64("problem", "kappa0", 0.5)?;
    let profile = initial_profile(cfg, l)?;

    let spec = if variant == "transport" {
        let noise = match choice(cfg, "noise", "model", "sinh", &["sinh", "additive"])? {
            "sinh" => StochasticFlowModel::sinh(kappa0),
            _ => StochasticFlowModel::additive(kappa0),
        };
        let flux = build_flux(cfg, 1)?;
        let velocity = build_velocity(cfg, dim)?;
        let initial = if cfg.string("problem", "initial", "sin") == "special" {
            // psi_alpha(0) = g(alpha)
            let u = noise.flow.forward(cfg.f64("problem", "alpha", 0.0)?)?;
            Arc::new(move |_: &[f64], _: &[f64]| u) as stochhom::model::TwoScaleFn
        } else {
            Arc::new(move |x: &[f64], _: &[f64]| profile(x))
        };
        ProblemSpec::transport(flux, velocity, noise, initial, eps, domain, t)
    } else {
        if cfg.get("noise", "model").is_some() {
            return Err(CliError::Validation(
                "noise.model applies to the transport problem; the stiff-source noise follows from f1".into(),
            ));
        }
        let flux = build_flux(cfg, dim)?;
        if flux.delta0.is_none() {
            return Err(CliError::Validation(format!(
                "flux.delta0 is required: the stiff-source problem needs a positive lower bound for f1' (f1 = {})",
                cfg.string("flux", "f1", "linear")
            )));
        }
        ProblemSpec::stiff_source(flux, build_potential(cfg)?, kappa0, profile, eps, domain, t)
            .map_err(|e| CliError::Validation(e.to_string()))?
    };

    let report = validate_problem(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
    if !report.passed() {
        let failed: Vec<String> = report
            .failures()
            .map(|c| format!("{} (worst {:.3e})", c.name, c.worst))
            .collect();
        return Err(CliError::Validation(format!(
            "problem fails {}",
            failed.join(", ")
        )));
    }
    let n = cfg.usize("grid", "n", 256)?;
    if n < 2 {
        return Err(CliError::Validation("grid.n must be at least 2".into()));
    }
    Ok(Setup {
        spec,
        scheme: build_scheme(cfg)?,
        n,
        report,
    })
}
