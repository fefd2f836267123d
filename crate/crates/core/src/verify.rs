//! Pathwise and statistical checks of well-posedness: comparison, weighted
//! L1 contraction, the stochastic Kruzkov inequality against special
//! solutions, sandwich bounds and the vanishing viscosity limit.

use rayon::prelude::*;

use crate::brownian::{sample_path, BrownianPath};
use crate::error::{Error, Result};
use crate::fv::{
    advance, Dynamics, Forcing, Grid, GridField, Operator, SchemeConfig, Stepper, Trajectory,
};
use crate::lab::{mean_half_width, TestFunction};
use crate::model::flux::sampled_max;
use crate::model::ProblemSpec;

pub use crate::lab::WeightFunction;

impl WeightFunction {
    /// `w_N` with the integrability requirement `N > d/2`.
    pub fn polynomial(n: f64, dim: usize) -> Result<Self> {
        if !(n > 0.5 * dim as f64) {
            return Err(Error::MalformedSpec(format!(
                "weight exponent {n} must exceed d/2 = {}",
                0.5 * dim as f64
            )));
        }
        Ok(Self::Polynomial(n))
    }

    /// `|grad w(x)| <= (1 + sqrt 2) N w(x) / (1 + |x|)` at `x`. The constant
    /// is sharp: `2 N r (1 + r) / (1 + r^2)` peaks at `r = 1 + sqrt 2`.
    pub fn gradient_bound_holds(&self, x: &[f64]) -> bool {
        match *self {
            Self::Unit => true,
            Self::Polynomial(n) => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let grad = 2.0 * n * r2.sqrt() * (1.0 + r2).powf(-n - 1.0);
                grad <= (1.0 + 2f64.sqrt()) * n * self.eval(x) / (1.0 + r2.sqrt()) * (1.0 + 1e-12)
            }
        }
    }
}

/// Both runs share one dyadic level so that they step in lockstep.
fn lockstep(
    spec: &ProblemSpec,
    a: &GridField,
    b: &GridField,
    path: &BrownianPath,
    scheme: &SchemeConfig,
) -> Result<(Stepper, Stepper)> {
    a.check_same_grid(b)?;
    let dynamics = Dynamics::from_spec(spec);
    let op = Operator::new(dynamics, a.grid, a.boundary, *scheme)?;
    let level = Stepper::required_level(&op, a, path)?.max(Stepper::required_level(&op, b, path)?);
    let sa = Stepper::with_level(op.clone(), a, path, level, spec.final_time)?;
    let sb = Stepper::with_level(op, b, path, level, spec.final_time)?;
    Ok((sa, sb))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub violations: usize,
    pub max_violation: f64,
    pub steps: usize,
    pub cells: usize,
}

/// Runs `low` and `high` along `path` and counts cells (over all steps)
/// where `low > high + 1e-12`.
pub fn comparison_test(
    spec: &ProblemSpec,
    low: &GridField,
    high: &GridField,
    path: &BrownianPath,
    scheme: &SchemeConfig,
) -> Result<ComparisonReport> {
    if low.values.iter().zip(&high.values).any(|(a, b)| a > b) {
        return Err(Error::MalformedSpec("initial pair is not ordered".into()));
    }
    let (mut a, mut b) = lockstep(spec, low, high, path, scheme)?;
    let mut report = ComparisonReport {
        violations: 0,
        max_violation: 0.0,
        steps: a.steps(),
        cells: low.values.len(),
    };
    while !a.done() {
        a.step()?;
        b.step()?;
        for (x, y) in a.values().iter().zip(b.values()) {
            if x - y > 1e-12 {
                report.violations += 1;
                report.max_violation = report.max_violation.max(x - y);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRow {
    pub time: f64,
    pub mean: f64,
    pub half_width: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// Growth rate `kappa0^2 Lip(h) / 2` over the realized state range.
    pub rate: f64,
    pub initial: f64,
    pub n_paths: usize,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

/// Monte Carlo estimate of `E int |u_a - u_b| w dx` at `times`, checked
/// against `exp(C t) I (1 + 0.1) + 2 half_width`.
#[allow(clippy::too_many_arguments)]
pub fn l1_contraction_test(
    spec: &ProblemSpec,
    u_a: &GridField,
    u_b: &GridField,
    n_paths: usize,
    weight: WeightFunction,
    times: &[f64],
    scheme: &SchemeConfig,
    seed: u64,
) -> Result<ContractionReport> {
    if n_paths < 16 {
        return Err(Error::InsufficientPaths {
            needed: 16,
            got: n_paths,
        });
    }
    let initial = u_a.weighted_l1_distance(u_b, |x| weight.eval(x))?;
    let runs = (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| -> Result<(Vec<f64>, Vec<f64>, (f64, f64))> {
            let path = sample_path(seed, stream, spec.final_time, 0)?;
            let (a, b) = lockstep(spec, u_a, u_b, &path, scheme)?;
            let ta = a.run(times)?;
            let tb = b.run(times)?;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut d = Vec::new();
            let mut t = Vec::new();
            for (sa, sb) in ta.snapshots.iter().zip(&tb.snapshots) {
                let fa = ta.field(sa);
                let fb = tb.field(sb);
                for f in [&fa, &fb] {
                    let (l, h) = f.min_max();
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
                d.push(fa.weighted_l1_distance(&fb, |x| weight.eval(x))?);
                t.push(sa.time);
            }
            Ok((t, d, (lo, hi)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi) = runs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| {
            (l.min(r.2 .0), h.max(r.2 .1))
        });
    let h = &spec.noise().h;
    let lip_h = sampled_max(|u| h.d1(u).abs(), lo, hi);
    let k0 = spec.kappa0();
    let rate = 0.5 * k0 * k0 * lip_h;
    let mut rows = Vec::new();
    for (s, &time) in runs[0].0.iter().enumerate() {
        if time == 0.0 {
            continue;
        }
        let samples: Vec<f64> = runs.iter().map(|r| r.1[s]).collect();
        let (mean, half_width) = mean_half_width(&samples, 0.95)?;
        let bound = (rate * time).exp() * initial * 1.1 + 2.0 * half_width;
        rows.push(ContractionRow {
            time,
            mean,
            half_width,
            bound,
            passed: mean <= bound,
        });
    }
    Ok(ContractionReport {
        rate,
        initial,
        n_paths,
        rows,
    })
}

/// `theta(t) = (1 - (t/tau)^2)^3` on `[0, tau)`.
pub fn time_cutoff(t: f64, tau: f64) -> f64 {
    if t >= tau {
        0.0
    } else {
        (1.0 - (t / tau).powi(2)).powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KruzkovReport {
    pub residual: f64,
    pub dx: f64,
    /// `max(0, -residual) / dx`.
    pub c_res: f64,
}

/// Discrete stochastic Kruzkov functional of the numerical solution on `n`
/// cells against `psi_alpha`, with test function `theta(t) phi(x)` and the
/// stochastic integral taken at left endpoints.
pub fn kruzkov_residual(
    spec: &ProblemSpec,
    n: usize,
    path: &BrownianPath,
    alpha: f64,
    phi: &TestFunction,
    scheme: &SchemeConfig,
) -> Result<KruzkovReport> {
    if phi.dim() != spec.domain.dim || !phi.fits(spec.domain.half_width) {
        return Err(Error::UnsupportedTestFunction(
            "test function must be supported inside the box".into(),
        ));
    }
    let field = GridField::initial(spec, n)?;
    let op = Operator::new(
        Dynamics::from_spec(spec),
        field.grid,
        field.boundary,
        *scheme,
    )?;
    let grid: Grid = op.grid;
    let dim = grid.dim;
    let dyn_ = op.dynamics.clone();
    let k0 = dyn_.noise.kappa0;
    let tau = spec.final_time;
    let vol = grid.cell_volume();

    let centers: Vec<Vec<f64>> = (0..grid.cells())
        .map(|i| grid.center(i)[..dim].to_vec())
        .collect();
    let phi_x: Vec<f64> = centers.iter().map(|x| phi.eval(x)).collect();
    let grad: Vec<Vec<f64>> = centers.iter().map(|x| phi.gradient(x)).collect();
    // flux direction factors: a(x/eps) for transport, one otherwise
    let velocity: Vec<Vec<f64>> = centers
        .iter()
        .map(|x| match &dyn_.forcing {
            Forcing::Velocity { field, epsilon } => {
                let y: Vec<f64> = x.iter().map(|v| v / epsilon).collect();
                (0..dim).map(|k| field.component(k, &y)).collect()
            }
            _ => vec![1.0; dim],
        })
        .collect();
    let psi = |w: f64, x: &[f64]| dyn_.equilibrium(alpha + k0 * w, x);
    let sgn = |d: f64| {
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };

    let mut stepper = Stepper::new(op.clone(), &field, path, spec.final_time)?;
    let mut residual = 0.0;
    for (i, x) in centers.iter().enumerate() {
        residual += (field.values[i] - psi(0.0, x)?).abs() * phi_x[i] * vol;
    }
    while !stepper.done() {
        let t = stepper.time();
        let w = stepper.w();
        let dt = stepper.dt();
        let u = stepper.values().to_vec();
        stepper.step()?;
        let dw = stepper.w() - w;
        let dtheta = time_cutoff(t + dt, tau) - time_cutoff(t, tau);
        let theta = time_cutoff(t, tau);
        let mut s = 0.0;
        for (i, x) in centers.iter().enumerate() {
            let p = psi(w, x)?;
            let sg = sgn(u[i] - p);
            let mut term = (u[i] - p).abs() * phi_x[i] * dtheta;
            let mut flux_dot = 0.0;
            for k in 0..dim {
                let comp = dyn_.component(k);
                flux_dot += velocity[i][k] * (comp.eval(u[i]) - comp.eval(p)) * grad[i][k];
            }
            term += sg * flux_dot * theta * dt;
            term += 0.5
                * k0
                * k0
                * sg
                * (dyn_.noise.h.eval(u[i]) - dyn_.noise.h.eval(p))
                * phi_x[i]
                * theta
                * dt;
            term += k0
                * sg
                * (dyn_.noise.sigma.eval(u[i]) - dyn_.noise.sigma.eval(p))
                * phi_x[i]
                * theta
                * dw;
            s += term;
        }
        residual += s * vol;
    }
    let dx = grid.dx();
    Ok(KruzkovReport {
        residual,
        dx,
        c_res: (-residual).max(0.0) / dx,
    })
}

/// Pass rule for residual constants at two resolutions: both nonnegative
/// residuals, or constants within a factor two of each other.
pub fn kruzkov_stable(coarse: &KruzkovReport, fine: &KruzkovReport) -> bool {
    if coarse.c_res <= 1e-12 && fine.c_res <= 1e-12 {
        return true;
    }
    if coarse.c_res <= 1e-12 || fine.c_res <= 1e-12 {
        return false;
    }
    let r = fine.c_res / coarse.c_res;
    (0.5..=2.0).contains(&r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub violations: usize,
    pub max_violation: f64,
    pub snapshots: usize,
}

/// Checks `psi_{alpha1} <= u <= psi_{alpha2}` cellwise at every snapshot.
pub fn sandwich_test(trajectory: &Trajectory, alpha1: f64, alpha2: f64) -> Result<SandwichReport> {
    let op = &trajectory.operator;
    let dim = op.grid.dim;
    let k0 = op.dynamics.noise.kappa0;
    let mut report = SandwichReport {
        violations: 0,
        max_violation: 0.0,
        snapshots: trajectory.snapshots.len(),
    };
    for snap in &trajectory.snapshots {
        for (i, &u) in snap.values.iter().enumerate() {
            let x = &op.grid.center(i)[..dim];
            let lo = op.dynamics.equilibrium(alpha1 + k0 * snap.w, x)?;
            let hi = op.dynamics.equilibrium(alpha2 + k0 * snap.w, x)?;
            let v = (lo - u).max(u - hi);
            if v > 1e-10 {
                report.violations += 1;
                report.max_violation = report.max_violation.max(v);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityReport {
    /// Viscosity unit `c`; runs use `nu = factor * c * dx`.
    pub c: f64,
    pub nus: Vec<f64>,
    pub distances: Vec<f64>,
    /// `2 || u_dx - u_{dx/2} ||_{L^1}` of the inviscid scheme.
    pub truncation: f64,
    pub monotone: bool,
    pub passed: bool,
}

/// Average of `2^d` fine cells onto the coarse grid.
fn restrict(fine: &GridField, coarse: Grid) -> GridField {
    let n = coarse.n;
    let mut values = vec![0.0; coarse.cells()];
    let scale = 1.0 / (1u32 << coarse.dim) as f64;
    for (idx, v) in fine.values.iter().enumerate() {
        let (i1, i2) = (idx % fine.grid.n, idx / fine.grid.n);
        let c = (i2 / 2) * n + i1 / 2;
        values[c] += scale * v;
    }
    GridField {
        grid: coarse,
        values,
        ..fine.clone()
    }
}

/// Compares viscous runs with `nu = factor * c * dx`, `c = S/8` with `S` the
/// speed bound over the sandwich range, against the inviscid run along the
/// same path and level.
pub fn viscosity_crosscheck(
    spec: &ProblemSpec,
    n: usize,
    path: &BrownianPath,
    scheme: &SchemeConfig,
    factors: &[f64],
) -> Result<ViscosityReport> {
    let field = GridField::initial(spec, n)?;
    let dynamics = Dynamics::from_spec(spec);
    let inviscid = SchemeConfig {
        viscosity: 0.0,
        ..*scheme
    };
    let op = Operator::new(dynamics.clone(), field.grid, field.boundary, inviscid)?;
    let alpha = op.alpha_range(&field.values, (0.0, 0.0))?;
    let p = path.at_level(Stepper::required_level(&op, &field, path)?)?;
    let (lo, hi) = op.state_range(alpha, p.min_max())?;
    let dx = field.grid.dx();
    let c = op.speed_bound(lo, hi) / 8.0;

    let nus: Vec<f64> = factors.iter().map(|f| f * c * dx).collect();
    let mut level = Stepper::required_level(&op, &field, path)?;
    for &nu in &nus {
        let o = Operator::new(
            dynamics.clone(),
            field.grid,
            field.boundary,
            SchemeConfig {
                viscosity: nu,
                ..inviscid
            },
        )?;
        level = level.max(Stepper::required_level(&o, &field, path)?);
    }
    let common = SchemeConfig {
        min_level: level,
        ..inviscid
    };
    let base = advance(&dynamics, &field, path, &common, spec.final_time, &[])?.final_field();
    let distances = nus
        .par_iter()
        .map(|&nu| {
            let s = SchemeConfig {
                viscosity: nu,
                ..common
            };
            advance(&dynamics, &field, path, &s, spec.final_time, &[])?
                .final_field()
                .l1_distance(&base)
        })
        .collect::<Result<Vec<_>>>()?;

    let fine_field = GridField::initial(spec, 2 * n)?;
    let fine = advance(
        &dynamics,
        &fine_field,
        path,
        &inviscid,
        spec.final_time,
        &[],
    )?
    .final_field();
    let coarse = advance(&dynamics, &field, path, &inviscid, spec.final_time, &[])?.final_field();
    let truncation = 2.0 * restrict(&fine, field.grid).l1_distance(&coarse)?;

    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    let smallest = distances.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ViscosityReport {
        c,
        nus,
        passed: monotone && smallest <= 2.0 * truncation,
        distances,
        truncation,
        monotone,
    })
}
