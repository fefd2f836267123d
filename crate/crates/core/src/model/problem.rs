use std::fmt;
use std::sync::Arc;

use super::flow::{noise_from_flux, StochasticFlowModel};
use super::flux::{sampled_max, ScalarFlux};
use super::potential::{OscillatoryPotential, VelocityField};
use crate::error::{Error, Result};

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type TwoScaleFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryMode {
    Periodic,
    /// Ghost cells hold equilibria with flow coordinates `lower` (left) and
    /// `upper` (right); one-dimensional boxes only.
    FarField {
        lower: f64,
        upper: f64,
    },
}

/// Truncated box `[-L, L)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub dim: usize,
    pub half_width: f64,
    pub boundary: BoundaryMode,
}

impl Domain {
    pub fn periodic(dim: usize, half_width: f64) -> Self {
        Self {
            dim,
            half_width,
            boundary: BoundaryMode::Periodic,
        }
    }
}

#[derive(Clone)]
pub enum Variant {
    /// Nonlinear transport by an oscillatory divergence-free field.
    Transport {
        flux: ScalarFlux,
        velocity: VelocityField,
        noise: StochasticFlowModel,
        /// `U_0(x, y)`; the fine-scale data is `U_0(x, x/eps)`.
        initial: TwoScaleFn,
    },
    /// Conservation law with the stiff source `V'(x_1/eps)/eps`.
    StiffSource {
        flux: ScalarFlux,
        potential: OscillatoryPotential,
        noise: StochasticFlowModel,
        /// `v_0(x)`; the fine-scale data is `g(V(x_1/eps) + v_0(x))`.
        v0: PointFn,
    },
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub variant: Variant,
    pub epsilon: f64,
    pub domain: Domain,
    pub final_time: f64,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.variant {
            Variant::Transport { .. } => "Transport",
            Variant::StiffSource { .. } => "StiffSource",
        };
        f.debug_struct("ProblemSpec")
            .field("variant", &name)
            .field("epsilon", &self.epsilon)
            .field("domain", &self.domain)
            .field("final_time", &self.final_time)
            .finish()
    }
}

impl ProblemSpec {
    pub fn transport(
        flux: ScalarFlux,
        velocity: VelocityField,
        noise: StochasticFlowModel,
        initial: TwoScaleFn,
        epsilon: f64,
        domain: Domain,
        final_time: f64,
    ) -> Self {
        Self {
            variant: Variant::Transport {
                flux,
                velocity,
                noise,
                initial,
            },
            epsilon,
            domain,
            final_time,
        }
    }

    /// Builds the stiff-source problem; the noise is derived from `f_1`.
    /// A missing `delta0` is tolerated here and reported by validation.
    pub fn stiff_source(
        flux: ScalarFlux,
        potential: OscillatoryPotential,
        kappa0: f64,
        v0: PointFn,
        epsilon: f64,
        domain: Domain,
        final_time: f64,
    ) -> Result<Self> {
        flux.check_range()?;
        let delta0 = match flux.delta0 {
            Some(d) => d,
            None => {
                let (lo, hi) = flux.range;
                let m = -sampled_max(|u| -flux.f1().d1(u), lo, hi);
                if m > 0.0 {
                    m
                } else {
                    f64::MIN_POSITIVE
                }
            }
        };
        let noise =
            StochasticFlowModel::from_flux(flux.f1(), delta0.max(f64::MIN_POSITIVE), kappa0)?;
        Ok(Self {
            variant: Variant::StiffSource {
                flux,
                potential,
                noise,
                v0,
            },
            epsilon,
            domain,
            final_time,
        })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s
    }

    pub fn flux(&self) -> &ScalarFlux {
        match &self.variant {
            Variant::Transport { flux, .. } | Variant::StiffSource { flux, .. } => flux,
        }
    }

    pub fn noise(&self) -> &StochasticFlowModel {
        match &self.variant {
            Variant::Transport { noise, .. } | Variant::StiffSource { noise, .. } => noise,
        }
    }

    pub fn kappa0(&self) -> f64 {
        self.noise().kappa0
    }

    pub fn potential(&self) -> Option<&OscillatoryPotential> {
        match &self.variant {
            Variant::StiffSource { potential, .. } => Some(potential),
            _ => None,
        }
    }

    pub fn is_stiff_source(&self) -> bool {
        matches!(self.variant, Variant::StiffSource { .. })
    }

    /// Equilibrium offset in flow coordinates at `x`: `V(x_1/eps)` for the
    /// stiff-source problem, zero otherwise.
    pub fn shift(&self, x: &[f64]) -> f64 {
        match &self.variant {
            Variant::StiffSource { potential, .. } => potential.value(x[0] / self.epsilon),
            _ => 0.0,
        }
    }

    /// Exact special solution with parameter `alpha` when `W(t) = w`.
    pub fn special_solution(&self, alpha: f64, w: f64, x: &[f64]) -> Result<f64> {
        self.noise()
            .flow
            .forward(alpha + self.kappa0() * w + self.shift(x))
    }

    /// Fine-scale initial value at `x`.
    pub fn initial_value(&self, x: &[f64]) -> Result<f64> {
        match &self.variant {
            Variant::Transport { initial, .. } => {
                let y: Vec<f64> = x.iter().map(|xi| xi / self.epsilon).collect();
                Ok(initial(x, &y))
            }
            Variant::StiffSource { v0, noise, .. } => noise.flow.forward(self.shift(x) + v0(x)),
        }
    }

    /// Sampled `[alpha_1, alpha_2]` with `psi_{alpha_1}(0) <= u_0 <= psi_{alpha_2}(0)`.
    pub fn alpha_bounds(&self, per_axis: usize) -> Result<(f64, f64)> {
        let l = self.domain.half_width;
        let d = self.domain.dim;
        let h = 2.0 * l / per_axis as f64;
        let total = per_axis.pow(d as u32);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let flow = &self.noise().flow;
        for idx in 0..total {
            let x: Vec<f64> = (0..d)
                .map(|k| -l + h * (((idx / per_axis.pow(k as u32)) % per_axis) as f64 + 0.5))
                .collect();
            let a = flow.inverse(self.initial_value(&x)?)? - self.shift(&x);
            lo = lo.min(a);
            hi = hi.max(a);
        }
        Ok((lo, hi))
    }
}

/// `psi_alpha(t) = g(alpha + kappa0 W(t))` of the transport problem.
pub fn special_solution_p1(alpha: f64, w_t: f64, model: &StochasticFlowModel) -> Result<f64> {
    model.flow.forward(alpha + model.kappa0 * w_t)
}

/// `g(V(y) + kappa0 W(t) + alpha)` of the stiff-source problem.
pub fn special_solution_p2(alpha: f64, y: f64, w_t: f64, spec: &ProblemSpec) -> Result<f64> {
    match &spec.variant {
        Variant::StiffSource {
            potential, noise, ..
        } => noise
            .flow
            .forward(potential.value(y) + noise.kappa0 * w_t + alpha),
        _ => Err(Error::MalformedSpec(
            "special_solution_p2 needs a stiff-source problem".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, worst: f64) {
        self.checks.push(Check {
            name,
            passed,
            worst,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<32} {}  worst = {:.3e}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.worst
            )?;
        }
        Ok(())
    }
}

const SAMPLES: usize = 1000;

/// Checks every sampled invariant of a problem specification.
pub fn validate_problem(spec: &ProblemSpec) -> Result<ValidationReport> {
    let flux = spec.flux();
    flux.check_range()?;
    if !(spec.epsilon > 0.0) || !(spec.final_time > 0.0) || !(spec.domain.half_width > 0.0) {
        return Err(Error::MalformedSpec(
            "epsilon, final time and box half-width must be positive".into(),
        ));
    }
    let mut report = ValidationReport::default();
    let us = flux.sample_points(SAMPLES);
    let noise = spec.noise();
    let d = spec.domain.dim;

    // transport carries one scalar flux f; the source problem one f_k per axis
    let flux_dim = if spec.is_stiff_source() { d } else { 1 };
    report.push(
        "dimension",
        flux.dim() == flux_dim && (1..=2).contains(&d),
        (flux.dim() as f64 - flux_dim as f64).abs(),
    );
    if let BoundaryMode::FarField { .. } = spec.domain.boundary {
        report.push("far_field_one_dimensional", d == 1, d as f64);
    }

    match &spec.variant {
        Variant::StiffSource { potential, .. } => {
            let delta0 = match flux.delta0 {
                Some(v) if v > 0.0 => v,
                Some(v) => {
                    return Err(Error::MalformedSpec(format!(
                        "delta0 must be positive, got {v}"
                    )))
                }
                None => {
                    return Err(Error::MalformedSpec(
                        "delta0 (lower bound for f1') is required for the stiff-source problem"
                            .into(),
                    ))
                }
            };
            let min_f1p = us
                .iter()
                .map(|&u| flux.f1().d1(u))
                .fold(f64::INFINITY, f64::min);
            report.push(
                "f1_prime_lower_bound",
                min_f1p >= delta0,
                (delta0 - min_f1p).max(0.0),
            );
            let mut worst_neg: f64 = 0.0;
            for comp in flux.components.iter().skip(1) {
                for &u in &us {
                    worst_neg = worst_neg.max(-comp.speed(u));
                }
            }
            report.push("fk_prime_nonnegative", worst_neg <= 0.0, worst_neg.max(0.0));

            let (sig, h) = noise_from_flux(flux.f1());
            let mut worst_s: f64 = 0.0;
            let mut worst_h: f64 = 0.0;
            let mut rel_ok = true;
            for &u in &us {
                let rs = (noise.sigma.eval(u) - sig.eval(u)).abs();
                let rh = (noise.h.eval(u) - h.eval(u)).abs();
                rel_ok &= rs <= 1e-8 * sig.eval(u).abs().max(1.0)
                    && rh <= 1e-8 * h.eval(u).abs().max(1.0);
                worst_s = worst_s.max(rs);
                worst_h = worst_h.max(rh);
            }
            report.push("sigma_h_from_f1", rel_ok, worst_s.max(worst_h));

            check_flow_inverse(&mut report, spec, &us)?;
            check_potential(&mut report, potential);
        }
        Variant::Transport { velocity, .. } => {
            // zero set of f' declared and spot-checked by sign changes
            let mut undeclared = 0usize;
            for comp in &flux.components {
                for w in us.windows(2) {
                    let (a, b) = (comp.speed(w[0]), comp.speed(w[1]));
                    if a * b < 0.0 && !comp.critical_points.iter().any(|&c| c >= w[0] && c <= w[1])
                    {
                        undeclared += 1;
                    }
                }
            }
            report.push("f_prime_zero_set", undeclared == 0, undeclared as f64);

            let min_sigma = us
                .iter()
                .map(|&u| noise.sigma.eval(u))
                .fold(f64::INFINITY, f64::min);
            report.push("sigma_positive", min_sigma > 0.0, (-min_sigma).max(0.0));

            let mut worst: f64 = 0.0;
            let mut ok = true;
            for &u in &us {
                let target = noise.sigma.d1(u) * noise.sigma.eval(u);
                let r = (noise.h.eval(u) - target).abs();
                ok &= r <= 1e-8 * target.abs().max(1.0);
                worst = worst.max(r);
            }
            report.push("h_equals_sigma_prime_sigma", ok, worst);

            // g' = sigma(g), checked by central differences of the table
            let (lo, hi) = flux.range;
            match (noise.flow.inverse(lo), noise.flow.inverse(hi)) {
                (Ok(xa), Ok(xb)) => {
                    let mut worst: f64 = 0.0;
                    let mut ok = true;
                    let step = 1e-5;
                    for j in 1..SAMPLES {
                        let xi = xa + (xb - xa) * j as f64 / SAMPLES as f64;
                        let fd = (noise.flow.forward(xi + step)?
                            - noise.flow.forward(xi - step)?)
                            / (2.0 * step);
                        let s = noise.sigma.eval(noise.flow.forward(xi)?);
                        let r = (fd - s).abs();
                        ok &= r <= 1e-6 * s.abs();
                        worst = worst.max(r / s.abs());
                    }
                    report.push("flow_ode", ok, worst);
                }
                _ => report.push("flow_covers_range", false, f64::INFINITY),
            }
            check_flow_inverse(&mut report, spec, &us)?;

            let supported = velocity.projected().is_ok();
            report.push(
                "velocity_family_supported",
                supported,
                if supported { 0.0 } else { 1.0 },
            );
            report.push(
                "velocity_dimension",
                velocity.dim() == d,
                (velocity.dim() as f64 - d as f64).abs(),
            );
            if let VelocityField::Shear { b, .. } = velocity {
                check_potential(&mut report, b);
            }
        }
    }

    match spec.alpha_bounds(if d == 1 { 512 } else { 128 }) {
        Ok((a1, a2)) => report.push(
            "initial_data_bounded",
            a1.is_finite() && a2.is_finite(),
            a2 - a1,
        ),
        Err(_) => report.push("initial_data_bounded", false, f64::INFINITY),
    }
    Ok(report)
}

fn check_flow_inverse(report: &mut ValidationReport, spec: &ProblemSpec, us: &[f64]) -> Result<()> {
    let flow = &spec.noise().flow;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for &u in us.iter().skip(1).take(us.len() - 2) {
        match flow.inverse(u) {
            Ok(xi) => {
                let back = flow.inverse(flow.forward(xi)?)?;
                let r = (back - xi).abs();
                ok &= r <= 1e-10 * xi.abs().max(1.0);
                worst = worst.max(r);
            }
            Err(_) => {
                ok = false;
                worst = f64::INFINITY;
            }
        }
    }
    report.push("flow_inverse", ok, worst);
    Ok(())
}

fn check_potential(report: &mut ValidationReport, v: &OscillatoryPotential) {
    let mut worst: f64 = 0.0;
    let bound = v.amplitude_sum() + v.offset.abs();
    for k in 0..1000 {
        let z = -50.0 + 0.1 * k as f64;
        worst = worst.max(v.value(z).abs() - bound);
    }
    report.push("potential_bounded", worst <= 1e-12, worst.max(0.0));
    if let Some(defect) = v.periodicity_defect() {
        report.push("potential_periodic", defect <= 1e-12, defect);
    }
    report.push("potential_mean_finite", v.mean().is_finite(), 0.0);
}
