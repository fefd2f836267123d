use std::sync::Arc;

use super::grid::Grid;
use super::numflux::{numerical_flux, FluxKind};
use crate::effective::EffectiveFluxTable;
use crate::error::{Error, Result};
use crate::model::flux::sampled_max;
use crate::model::{
    BoundaryMode, OscillatoryPotential, ProblemSpec, RealFn, ScalarFlux, SmoothFn,
    StochasticFlowModel, Variant, VelocityField,
};

/// Transport term besides the flux.
#[derive(Debug, Clone)]
pub enum Forcing {
    /// `div(a(x/eps) f(u))` with a single scalar flux `f`.
    Velocity { field: VelocityField, epsilon: f64 },
    /// `div f(u) = V'(x_1/eps)/eps`.
    Source {
        potential: OscillatoryPotential,
        epsilon: f64,
    },
    /// `div f(u)` alone.
    Plain,
}

/// Everything the finite-volume engine needs about one equation.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub flux: ScalarFlux,
    pub noise: StochasticFlowModel,
    pub forcing: Forcing,
}

impl Dynamics {
    pub fn from_spec(spec: &ProblemSpec) -> Self {
        match &spec.variant {
            Variant::Transport {
                flux,
                velocity,
                noise,
                ..
            } => Self {
                flux: flux.clone(),
                noise: noise.clone(),
                forcing: Forcing::Velocity {
                    field: velocity.clone(),
                    epsilon: spec.epsilon,
                },
            },
            Variant::StiffSource {
                flux,
                potential,
                noise,
                ..
            } => Self {
                flux: flux.clone(),
                noise: noise.clone(),
                forcing: Forcing::Source {
                    potential: potential.clone(),
                    epsilon: spec.epsilon,
                },
            },
        }
    }

    /// Homogenized equation `du + div fbar(u) dt = kappa0 sigma_bar dW + ...`
    /// whose noise acts on `fbar_1(u)`.
    pub fn effective(table: &EffectiveFluxTable, kappa0: f64) -> Self {
        let t = Arc::new(table.clone());
        let (a, b) = (t.clone(), t.clone());
        let sigma = SmoothFn::new(
            "sigma_bar",
            vec![
                Arc::new(move |p| 1.0 / a.fbar1_prime(p).unwrap_or(f64::NAN)) as RealFn,
                Arc::new(move |p| {
                    let d1 = b.fbar1_prime(p).unwrap_or(f64::NAN);
                    -b.fbar1_second(p).unwrap_or(f64::NAN) / (d1 * d1)
                }),
            ],
        );
        let (c, d) = (t.clone(), t);
        let h = SmoothFn::new(
            "h_bar",
            vec![
                Arc::new(move |p| c.h_bar(p).unwrap_or(f64::NAN)) as RealFn,
                Arc::new(move |p| {
                    let d1 = d.fbar1_prime(p).unwrap_or(f64::NAN);
                    let d2 = d.fbar1_second(p).unwrap_or(f64::NAN);
                    let d3 = d.fbar1_third(p).unwrap_or(f64::NAN);
                    -d3 / d1.powi(3) + 3.0 * d2 * d2 / d1.powi(4)
                }),
            ],
        );
        Self {
            flux: table.flux(),
            noise: StochasticFlowModel::with_flow(sigma, h, Arc::new(table.flow()), kappa0),
            forcing: Forcing::Plain,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match &self.forcing {
            Forcing::Velocity { epsilon, .. } | Forcing::Source { epsilon, .. } => Some(*epsilon),
            Forcing::Plain => None,
        }
    }

    /// Equilibrium offset `V(x_1/eps)` in flow coordinates.
    #[inline]
    pub fn shift(&self, x: &[f64]) -> f64 {
        match &self.forcing {
            Forcing::Source { potential, epsilon } => potential.value(x[0] / epsilon),
            _ => 0.0,
        }
    }

    pub fn shift_bounds(&self) -> (f64, f64) {
        match &self.forcing {
            Forcing::Source { potential, .. } => potential.bounds(),
            _ => (0.0, 0.0),
        }
    }

    /// State of the equilibrium with flow coordinate `beta` at `x`.
    pub fn equilibrium(&self, beta: f64, x: &[f64]) -> Result<f64> {
        self.noise.flow.forward(beta + self.shift(x))
    }

    /// Flow coordinate `g^{-1}(u) - V(x_1/eps)`.
    pub fn flow_coordinate(&self, u: f64, x: &[f64]) -> Result<f64> {
        Ok(self.noise.flow.inverse(u)? - self.shift(x))
    }

    /// Flux component used along `axis`.
    pub fn component(&self, axis: usize) -> &crate::model::FluxComponent {
        match self.forcing {
            Forcing::Velocity { .. } => &self.flux.components[0],
            _ => &self.flux.components[axis],
        }
    }

    fn max_velocity(&self, axis: usize) -> f64 {
        match &self.forcing {
            Forcing::Velocity { field, .. } => field.max_abs_component(axis),
            _ => 1.0,
        }
    }
}

/// Finite-volume scheme options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub flux: FluxKind,
    /// Target `lambda * (sum of axis speeds)`, in `(0, 1]`.
    pub cfl: f64,
    pub viscosity: f64,
    pub well_balanced: bool,
    /// Runs use at least `2^min_level` time steps.
    pub min_level: u32,
    pub record_steps: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            flux: FluxKind::Godunov,
            cfl: 0.9,
            viscosity: 0.0,
            well_balanced: true,
            min_level: 0,
            record_steps: false,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::MalformedSpec(format!(
                "CFL number {} not in (0, 1]",
                self.cfl
            )));
        }
        if !(self.viscosity >= 0.0) {
            return Err(Error::MalformedSpec(format!(
                "viscosity {} is negative",
                self.viscosity
            )));
        }
        Ok(())
    }
}

/// Discrete operators of one equation on one grid.
#[derive(Debug, Clone)]
pub struct Operator {
    pub dynamics: Dynamics,
    pub grid: Grid,
    pub boundary: BoundaryMode,
    pub scheme: SchemeConfig,
    /// Per axis, `a_axis` at every face, laid out `line * (n + 1) + face`.
    face_velocity: Vec<Vec<f64>>,
    /// `V(x_face / eps)` along axis 0, ghost-side faces included.
    v_face: Vec<f64>,
    /// `V(x_c / eps)` for `c = -1..=n` along axis 0.
    v_center: Vec<f64>,
    reconstruct: bool,
}

impl Operator {
    pub fn new(
        dynamics: Dynamics,
        grid: Grid,
        boundary: BoundaryMode,
        scheme: SchemeConfig,
    ) -> Result<Self> {
        scheme.validate()?;
        if let BoundaryMode::FarField { .. } = boundary {
            if grid.dim != 1 {
                return Err(Error::MalformedSpec(
                    "far-field boundaries are supported in one dimension only".into(),
                ));
            }
        }
        let n = grid.n;
        let dx = grid.dx();
        let mut face_velocity = Vec::new();
        let mut v_face = Vec::new();
        let mut v_center = Vec::new();
        let mut reconstruct = false;
        match &dynamics.forcing {
            Forcing::Velocity { field, epsilon } => {
                if field.dim() != grid.dim {
                    return Err(Error::MalformedSpec(format!(
                        "velocity field of dimension {} on a {}-d grid",
                        field.dim(),
                        grid.dim
                    )));
                }
                if dynamics.flux.dim() != 1 {
                    return Err(Error::MalformedSpec(
                        "transport needs one scalar flux".into(),
                    ));
                }
                for axis in 0..grid.dim {
                    let mut a = Vec::with_capacity(grid.lines() * (n + 1));
                    for line in 0..grid.lines() {
                        let other = grid.center_coord(line);
                        for j in 0..=n {
                            let mut y = [0.0; 2];
                            y[axis] = grid.face_coord(j) / epsilon;
                            if grid.dim > 1 {
                                y[1 - axis] = other / epsilon;
                            }
                            a.push(field.component(axis, &y[..grid.dim]));
                        }
                    }
                    face_velocity.push(a);
                }
            }
            Forcing::Source { potential, epsilon } => {
                if dynamics.flux.dim() != grid.dim {
                    return Err(Error::MalformedSpec(format!(
                        "flux with {} components on a {}-d grid",
                        dynamics.flux.dim(),
                        grid.dim
                    )));
                }
                reconstruct = scheme.well_balanced && !potential.is_zero();
                v_face = (0..=n)
                    .map(|j| potential.value(grid.face_coord(j) / epsilon))
                    .collect();
                v_center = (0..n + 2)
                    .map(|c| potential.value((-grid.half_width + (c as f64 - 0.5) * dx) / epsilon))
                    .collect();
            }
            Forcing::Plain => {
                if dynamics.flux.dim() != grid.dim {
                    return Err(Error::MalformedSpec(format!(
                        "flux with {} components on a {}-d grid",
                        dynamics.flux.dim(),
                        grid.dim
                    )));
                }
            }
        }
        Ok(Self {
            dynamics,
            grid,
            boundary,
            scheme,
            face_velocity,
            v_face,
            v_center,
            reconstruct,
        })
    }

    pub fn reconstructs(&self) -> bool {
        self.reconstruct
    }

    /// Flow coordinates of `u` over the grid: `g^{-1}(u_i) - V(x_i/eps)`.
    pub fn flow_coordinates(&self, u: &[f64]) -> Result<Vec<f64>> {
        u.iter()
            .enumerate()
            .map(|(idx, &v)| {
                let c = self.grid.center(idx);
                self.dynamics.flow_coordinate(v, &c[..self.grid.dim])
            })
            .collect()
    }

    /// Sum over axes of the largest `|a_k| |f_k'|` over states in
    /// `[lo, hi]`, times the monotonicity factor of the reconstruction.
    pub fn speed_bound(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for axis in 0..self.grid.dim {
            let comp = self.dynamics.component(axis);
            let s = sampled_max(|u| comp.speed(u).abs(), lo, hi) * self.dynamics.max_velocity(axis);
            total += s * if axis == 0 {
                self.reconstruction_factor(lo, hi)
            } else {
                1.0
            };
        }
        total
    }

    fn reconstruction_factor(&self, lo: f64, hi: f64) -> f64 {
        if !self.reconstruct || self.scheme.flux != FluxKind::Rusanov {
            return 1.0;
        }
        let f1 = self.dynamics.flux.f1();
        let max = sampled_max(|u| f1.d1(u), lo, hi);
        let min = -sampled_max(|u| -f1.d1(u), lo, hi);
        2.0 * max / min
    }

    /// Sandwich bounds `[forward(a1 + kappa0 w + min V), forward(a2 + kappa0 w + max V)]`
    /// over the Brownian values in `[w_lo, w_hi]`.
    pub fn state_range(&self, alpha: (f64, f64), w: (f64, f64)) -> Result<(f64, f64)> {
        let k = self.dynamics.noise.kappa0;
        let (s_lo, s_hi) = self.dynamics.shift_bounds();
        let (n_lo, n_hi) = ((k * w.0).min(k * w.1), (k * w.0).max(k * w.1));
        let flow = &self.dynamics.noise.flow;
        Ok((
            flow.forward(alpha.0 + n_lo + s_lo)?,
            flow.forward(alpha.1 + n_hi + s_hi)?,
        ))
    }

    /// Flow-coordinate range of a field and its far-field states.
    pub fn alpha_range(&self, u: &[f64], beta: (f64, f64)) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for a in self.flow_coordinates(u)? {
            lo = lo.min(a);
            hi = hi.max(a);
        }
        if let BoundaryMode::FarField { .. } = self.boundary {
            lo = lo.min(beta.0).min(beta.1);
            hi = hi.max(beta.0).max(beta.1);
        }
        Ok((lo, hi))
    }

    fn ghost_position(&self, left: bool) -> f64 {
        let g = &self.grid;
        if left {
            -g.half_width - 0.5 * g.dx()
        } else {
            g.half_width + 0.5 * g.dx()
        }
    }

    /// Ghost states `(left, right)` of one line.
    fn ghosts(&self, axis: usize, line: usize, u: &[f64], beta: (f64, f64)) -> Result<(f64, f64)> {
        let n = self.grid.n;
        match self.boundary {
            BoundaryMode::Periodic => Ok((
                u[self.grid.line_index(axis, line, n - 1)],
                u[self.grid.line_index(axis, line, 0)],
            )),
            BoundaryMode::FarField { .. } => Ok((
                self.dynamics
                    .equilibrium(beta.0, &[self.ghost_position(true)])?,
                self.dynamics
                    .equilibrium(beta.1, &[self.ghost_position(false)])?,
            )),
        }
    }

    /// Left and right states at every face of every line along `axis`,
    /// laid out `line * (n + 1) + face`.
    pub fn interface_states(
        &self,
        axis: usize,
        u: &[f64],
        beta: (f64, f64),
    ) -> Result<Vec<(f64, f64)>> {
        let n = self.grid.n;
        let mut out = Vec::with_capacity(self.grid.lines() * (n + 1));
        let mut cells = vec![0.0; n + 2];
        for line in 0..self.grid.lines() {
            let (gl, gr) = self.ghosts(axis, line, u, beta)?;
            cells[0] = gl;
            cells[n + 1] = gr;
            for i in 0..n {
                cells[i + 1] = u[self.grid.line_index(axis, line, i)];
            }
            if axis == 0 && self.reconstruct {
                let flow = &self.dynamics.noise.flow;
                let mut w = vec![0.0; n + 2];
                for c in 0..n + 2 {
                    w[c] = flow.inverse(cells[c])? - self.v_center[c];
                }
                match self.boundary {
                    BoundaryMode::Periodic => {
                        w[0] = w[n];
                        w[n + 1] = w[1];
                    }
                    BoundaryMode::FarField { .. } => {
                        w[0] = beta.0;
                        w[n + 1] = beta.1;
                    }
                }
                for j in 0..=n {
                    let vf = self.v_face[j];
                    let ul = flow.forward_near(w[j] + vf, cells[j])?;
                    let ur = flow.forward_near(w[j + 1] + vf, cells[j + 1])?;
                    out.push((ul, ur));
                }
            } else {
                for j in 0..=n {
                    out.push((cells[j], cells[j + 1]));
                }
            }
        }
        Ok(out)
    }

    /// Numerical flux through face `face` of `line` along `axis`.
    #[inline]
    pub fn face_flux(&self, axis: usize, line: usize, face: usize, ul: f64, ur: f64) -> f64 {
        let comp = self.dynamics.component(axis);
        let kind = self.scheme.flux;
        if self.face_velocity.is_empty() {
            return numerical_flux(ul, ur, comp, kind);
        }
        let a = self.face_velocity[axis][line * (self.grid.n + 1) + face];
        if a >= 0.0 {
            a * numerical_flux(ul, ur, comp, kind)
        } else {
            a * numerical_flux(ur, ul, comp, kind)
        }
    }

    /// Source contribution per unit time to cell `i` of a line along axis 0.
    fn source_rate(&self, i: usize) -> f64 {
        match &self.dynamics.forcing {
            Forcing::Source { potential, epsilon } if !potential.is_zero() => {
                if self.reconstruct {
                    (self.v_face[i + 1] - self.v_face[i]) / self.grid.dx()
                } else {
                    potential.derivative(self.grid.center_coord(i) / epsilon) / epsilon
                }
            }
            _ => 0.0,
        }
    }

    /// One explicit step of the deterministic part, all axes from the same
    /// input (unsplit). Fails if the realized Courant number exceeds one.
    pub fn det_step(&self, u: &[f64], beta: (f64, f64), dt: f64) -> Result<Vec<f64>> {
        let n = self.grid.n;
        let lambda = dt / self.grid.dx();
        let mut out = u.to_vec();
        let mut courant = 0.0;
        for axis in 0..self.grid.dim {
            let states = self.interface_states(axis, u, beta)?;
            let comp = self.dynamics.component(axis);
            let mut smax: f64 = 0.0;
            let mut fluxes = vec![0.0; n + 1];
            for line in 0..self.grid.lines() {
                for j in 0..=n {
                    let (ul, ur) = states[line * (n + 1) + j];
                    fluxes[j] = self.face_flux(axis, line, j, ul, ur);
                    let a = if self.face_velocity.is_empty() {
                        1.0
                    } else {
                        self.face_velocity[axis][line * (n + 1) + j].abs()
                    };
                    smax = smax.max(a * comp.speed(ul).abs().max(comp.speed(ur).abs()));
                }
                for i in 0..n {
                    let idx = self.grid.line_index(axis, line, i);
                    out[idx] -= lambda * (fluxes[i + 1] - fluxes[i]);
                    if axis == 0 {
                        let src = self.source_rate(i);
                        if src != 0.0 {
                            out[idx] += dt * src;
                        }
                    }
                }
            }
            courant += lambda * smax;
        }
        if courant > 1.0 + 1e-12 {
            return Err(Error::CflViolation(courant));
        }
        Ok(out)
    }

    /// Explicit centered heat step `u += nu dt Laplacian_h u`.
    pub fn viscous_step(&self, u: &[f64], beta: (f64, f64), nu: f64, dt: f64) -> Result<Vec<f64>> {
        if nu == 0.0 {
            return Ok(u.to_vec());
        }
        let dx = self.grid.dx();
        let limit = dx * dx / (2.0 * self.grid.dim as f64 * nu);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation { dt, limit });
        }
        let n = self.grid.n;
        let mu = nu * dt / (dx * dx);
        let mut out = u.to_vec();
        for axis in 0..self.grid.dim {
            for line in 0..self.grid.lines() {
                let (gl, gr) = self.ghosts(axis, line, u, beta)?;
                for i in 0..n {
                    let c = u[self.grid.line_index(axis, line, i)];
                    let l = if i == 0 {
                        gl
                    } else {
                        u[self.grid.line_index(axis, line, i - 1)]
                    };
                    let r = if i + 1 == n {
                        gr
                    } else {
                        u[self.grid.line_index(axis, line, i + 1)]
                    };
                    out[self.grid.line_index(axis, line, i)] += mu * (l - 2.0 * c + r);
                }
            }
        }
        Ok(out)
    }

    /// Exact noise map over `delta = kappa0 dW`, cellwise.
    pub fn noise_step(&self, u: &mut [f64], delta: f64) -> Result<()> {
        if delta == 0.0 {
            return Ok(());
        }
        let flow = &self.dynamics.noise.flow;
        for v in u.iter_mut() {
            *v = flow.forward_near(flow.inverse(*v)? + delta, *v)?;
        }
        Ok(())
    }
}
