use std::sync::Arc;

use rayon::prelude::*;

use super::grid::{Grid, GridField};
use super::numflux::FluxKind;
use super::operator::{Dynamics, Forcing, Operator, SchemeConfig};
use crate::brownian::{BrownianPath, MAX_LEVEL};
use crate::effective::EffectiveFluxTable;
use crate::error::{Error, Result};
use crate::model::{
    BoundaryMode, FlowPrimitive, FluxComponent, OscillatoryPotential, ProblemSpec, ScalarFlux,
    SmoothFn, StochasticFlowModel, Variant, VelocityField,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub step: usize,
    /// `W(time)`
    pub w: f64,
    /// Far-field flow coordinates at `time`.
    pub beta: (f64, f64),
    pub values: Vec<f64>,
}

/// States around the deterministic part of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub dw: f64,
    pub beta: (f64, f64),
    /// `u^n`
    pub before: Vec<f64>,
    /// After the hyperbolic update, before viscosity and noise.
    pub after_det: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub operator: Operator,
    pub level: u32,
    pub dt: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub snapshots: Vec<Snapshot>,
    pub records: Option<Vec<StepRecord>>,
}

impl Trajectory {
    pub fn grid(&self) -> Grid {
        self.operator.grid
    }

    pub fn field(&self, s: &Snapshot) -> GridField {
        GridField {
            grid: self.operator.grid,
            boundary: match self.operator.boundary {
                BoundaryMode::Periodic => BoundaryMode::Periodic,
                BoundaryMode::FarField { .. } => BoundaryMode::FarField {
                    lower: s.beta.0,
                    upper: s.beta.1,
                },
            },
            time: s.time,
            values: s.values.clone(),
        }
    }

    pub fn final_field(&self) -> GridField {
        self.field(self.snapshots.last().expect("trajectory has snapshots"))
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots
            .iter()
            .find(|s| (s.time - t).abs() <= 1e-12 * t.abs().max(1.0))
    }
}

/// Lie-split time stepper on a uniform dyadic grid in time.
#[derive(Debug, Clone)]
pub struct Stepper {
    op: Operator,
    path: BrownianPath,
    values: Vec<f64>,
    beta: (f64, f64),
    step: usize,
    steps: usize,
    dt: f64,
    records: Option<Vec<StepRecord>>,
}

fn initial_beta(field: &GridField) -> (f64, f64) {
    match field.boundary {
        BoundaryMode::FarField { lower, upper } => (lower, upper),
        BoundaryMode::Periodic => (0.0, 0.0),
    }
}

impl Stepper {
    /// Smallest level `L >= max(min_level, path level)` whose step
    /// `T / 2^L` satisfies the CFL and diffusion limits for the sandwich
    /// bounds of `field` along the path.
    pub fn required_level(op: &Operator, field: &GridField, path: &BrownianPath) -> Result<u32> {
        let alpha = op.alpha_range(&field.values, initial_beta(field))?;
        let dx = op.grid.dx();
        let nu = op.scheme.viscosity;
        let mut level = op.scheme.min_level.max(path.level());
        loop {
            let p = path.at_level(level)?;
            let dt = p.dt();
            let (lo, hi) = op.state_range(alpha, p.min_max())?;
            let courant = dt * op.speed_bound(lo, hi) / dx;
            let diffusion_ok = nu == 0.0 || dt <= dx * dx / (2.0 * op.grid.dim as f64 * nu);
            if courant <= op.scheme.cfl && diffusion_ok {
                return Ok(level);
            }
            if level >= MAX_LEVEL {
                return Err(Error::CflViolation(courant / op.scheme.cfl));
            }
            level += 1;
        }
    }

    pub fn new(
        op: Operator,
        field: &GridField,
        path: &BrownianPath,
        t_target: f64,
    ) -> Result<Self> {
        let level = Self::required_level(&op, field, path)?;
        Self::with_level(op, field, path, level, t_target)
    }

    pub fn with_level(
        op: Operator,
        field: &GridField,
        path: &BrownianPath,
        level: u32,
        t_target: f64,
    ) -> Result<Self> {
        if field.grid != op.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                field.grid, op.grid
            )));
        }
        let path = path.at_level(level)?;
        let dt = path.dt();
        let steps = (t_target / dt).round() as usize;
        if !(t_target > 0.0)
            || steps > path.steps()
            || (steps as f64 * dt - t_target).abs() > 1e-9 * path.final_time
        {
            return Err(Error::MalformedSpec(format!(
                "target time {t_target} is not a node of the level-{level} grid on [0, {}]",
                path.final_time
            )));
        }
        Ok(Self {
            records: op.scheme.record_steps.then(Vec::new),
            op,
            path,
            values: field.values.clone(),
            beta: initial_beta(field),
            step: 0,
            steps,
            dt,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        if self.done() {
            return Ok(());
        }
        let dw = self.path.increment(self.step)?;
        let det = self.op.det_step(&self.values, self.beta, self.dt)?;
        let mut next = self
            .op
            .viscous_step(&det, self.beta, self.op.scheme.viscosity, self.dt)?;
        let time = self.time();
        if let Some(rec) = &mut self.records {
            rec.push(StepRecord {
                step: self.step,
                time,
                dt: self.dt,
                dw,
                beta: self.beta,
                before: std::mem::take(&mut self.values),
                after_det: det,
            });
        }
        let delta = self.op.dynamics.noise.kappa0 * dw;
        self.op.noise_step(&mut next, delta)?;
        if let BoundaryMode::FarField { .. } = self.op.boundary {
            self.beta = (self.beta.0 + delta, self.beta.1 + delta);
        }
        self.values = next;
        self.step += 1;
        Ok(())
    }

    pub fn done(&self) -> bool {
        self.step >= self.steps
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    pub fn w(&self) -> f64 {
        self.path.values()[self.step]
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn level(&self) -> u32 {
        self.path.level()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn beta(&self) -> (f64, f64) {
        self.beta
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time(),
            step: self.step,
            w: self.w(),
            beta: self.beta,
            values: self.values.clone(),
        }
    }

    /// Runs to the end, keeping snapshots at the listed times (plus the
    /// initial and final states).
    pub fn run(mut self, snapshot_times: &[f64]) -> Result<Trajectory> {
        let mut wanted = Vec::new();
        for &t in snapshot_times {
            let k = (t / self.dt).round();
            if !(t >= 0.0)
                || (k * self.dt - t).abs() > 1e-9 * self.path.final_time
                || k as usize > self.steps
            {
                return Err(Error::MalformedSpec(format!(
                    "snapshot time {t} is not a node of the run grid (dt = {})",
                    self.dt
                )));
            }
            wanted.push(k as usize);
        }
        wanted.push(0);
        wanted.push(self.steps);
        wanted.sort_unstable();
        wanted.dedup();
        let mut snapshots = Vec::with_capacity(wanted.len());
        let mut next = wanted.into_iter().peekable();
        loop {
            if next.peek() == Some(&self.step) {
                snapshots.push(self.snapshot());
                next.next();
            }
            if self.done() {
                break;
            }
            self.step()?;
        }
        Ok(Trajectory {
            level: self.path.level(),
            dt: self.dt,
            seed: self.path.seed,
            stream_id: self.path.stream_id,
            snapshots,
            records: self.records,
            operator: self.op,
        })
    }
}

/// Runs `dynamics` from `field` along `path` until `t_target`.
pub fn advance(
    dynamics: &Dynamics,
    field: &GridField,
    path: &BrownianPath,
    scheme: &SchemeConfig,
    t_target: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let op = Operator::new(dynamics.clone(), field.grid, field.boundary, *scheme)?;
    Stepper::new(op, field, path, t_target)?.run(snapshot_times)
}

/// Runs the fine-scale problem of `spec` on `n` cells per axis.
pub fn solve_problem(
    spec: &ProblemSpec,
    n: usize,
    path: &BrownianPath,
    scheme: &SchemeConfig,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let field = GridField::initial(spec, n)?;
    advance(
        &Dynamics::from_spec(spec),
        &field,
        path,
        scheme,
        spec.final_time,
        snapshot_times,
    )
}

/// Homogenized problem with initial data `gbar(v_0(x))`, sharing `path`.
#[allow(clippy::too_many_arguments)]
pub fn solve_effective(
    table: &EffectiveFluxTable,
    v0: &(dyn Fn(&[f64]) -> f64 + Sync),
    grid: Grid,
    boundary: BoundaryMode,
    kappa0: f64,
    path: &BrownianPath,
    scheme: &SchemeConfig,
    t_target: f64,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    let field = GridField::try_from_fn(grid, boundary, |x| table.gbar(v0(x)))?;
    advance(
        &Dynamics::effective(table, kappa0),
        &field,
        path,
        scheme,
        t_target,
        snapshot_times,
    )
}

/// Family of frozen-`y` problems `dU + div(a(y) f(U)) dt = noise` and its
/// quadrature average over `y`.
pub struct FamilySolution {
    pub members: Vec<Trajectory>,
    /// `sum_j weights_j U(t, x, y_j)` at each snapshot time.
    pub average: Vec<GridField>,
}

#[allow(clippy::too_many_arguments)]
pub fn solve_family_p1(
    spec: &ProblemSpec,
    n: usize,
    path: &BrownianPath,
    y_nodes: &[Vec<f64>],
    weights: &[f64],
    scheme: &SchemeConfig,
    snapshot_times: &[f64],
) -> Result<FamilySolution> {
    let (flux, velocity, noise, initial) = match &spec.variant {
        Variant::Transport {
            flux,
            velocity,
            noise,
            initial,
        } => (flux, velocity.projected()?, noise, initial),
        _ => {
            return Err(Error::MalformedSpec(
                "the y-family is defined for the transport problem".into(),
            ))
        }
    };
    if y_nodes.len() != weights.len() || y_nodes.is_empty() {
        return Err(Error::MalformedSpec(
            "y nodes and weights differ in length".into(),
        ));
    }
    let grid = Grid::new(spec.domain.dim, n, spec.domain.half_width)?;
    let members = y_nodes
        .par_iter()
        .map(|y| {
            let a: Vec<f64> = (0..grid.dim).map(|k| velocity.component(k, y)).collect();
            let dynamics = Dynamics {
                flux: flux.clone(),
                noise: noise.clone(),
                forcing: Forcing::Velocity {
                    field: VelocityField::Constant(a),
                    epsilon: 1.0,
                },
            };
            let field = GridField::from_fn(grid, spec.domain.boundary, |x| initial(x, y));
            advance(
                &dynamics,
                &field,
                path,
                scheme,
                spec.final_time,
                snapshot_times,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut average = Vec::new();
    for (s, snap) in members[0].snapshots.iter().enumerate() {
        let mut values = vec![0.0; grid.cells()];
        for (m, w) in members.iter().zip(weights) {
            let other = &m.snapshots[s];
            if (other.time - snap.time).abs() > 1e-12 {
                return Err(Error::GridMismatch(
                    "family members disagree on snapshot times".into(),
                ));
            }
            for (acc, v) in values.iter_mut().zip(&other.values) {
                *acc += w * v;
            }
        }
        average.push(GridField {
            grid,
            boundary: spec.domain.boundary,
            time: snap.time,
            values,
        });
    }
    Ok(FamilySolution { members, average })
}

/// Flow primitive of the identity `g(xi) = xi`.
#[derive(Debug)]
struct IdentityFlow;

impl FlowPrimitive for IdentityFlow {
    fn forward(&self, xi: f64) -> Result<f64> {
        Ok(xi)
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        Ok(u)
    }
}

fn noiseless(flux: ScalarFlux, forcing: Forcing) -> Dynamics {
    Dynamics {
        flux,
        noise: StochasticFlowModel::with_flow(
            SmoothFn::constant(1.0),
            SmoothFn::constant(0.0),
            Arc::new(IdentityFlow),
            0.0,
        ),
        forcing,
    }
}

/// One hyperbolic step of the transport problem with face-evaluated `a(x/eps)`.
pub fn det_step_p1(
    field: &GridField,
    velocity: &VelocityField,
    flux: &FluxComponent,
    epsilon: f64,
    dt: f64,
    kind: FluxKind,
) -> Result<GridField> {
    let flux = ScalarFlux::new(vec![flux.clone()], None, (f64::MIN, f64::MAX));
    let dynamics = noiseless(
        flux,
        Forcing::Velocity {
            field: velocity.clone(),
            epsilon,
        },
    );
    let scheme = SchemeConfig {
        flux: kind,
        ..SchemeConfig::default()
    };
    let op = Operator::new(dynamics, field.grid, field.boundary, scheme)?;
    let values = op.det_step(&field.values, initial_beta(field), dt)?;
    Ok(GridField {
        values,
        time: field.time + dt,
        ..field.clone()
    })
}

/// One well-balanced hyperbolic step of the stiff-source problem. The noise
/// model supplies the equilibrium map `g`.
pub fn det_step_p2(
    field: &GridField,
    flux: &ScalarFlux,
    noise: &StochasticFlowModel,
    potential: &OscillatoryPotential,
    epsilon: f64,
    dt: f64,
    kind: FluxKind,
) -> Result<GridField> {
    let dynamics = Dynamics {
        flux: flux.clone(),
        noise: noise.clone(),
        forcing: Forcing::Source {
            potential: potential.clone(),
            epsilon,
        },
    };
    let scheme = SchemeConfig {
        flux: kind,
        ..SchemeConfig::default()
    };
    let op = Operator::new(dynamics, field.grid, field.boundary, scheme)?;
    let values = op.det_step(&field.values, initial_beta(field), dt)?;
    Ok(GridField {
        values,
        time: field.time + dt,
        ..field.clone()
    })
}

/// `u_i -> noise_flow(u_i, kappa0 dW)`.
pub fn noise_step(field: &GridField, dw: f64, model: &StochasticFlowModel) -> Result<GridField> {
    let mut values = field.values.clone();
    let delta = model.kappa0 * dw;
    if delta != 0.0 {
        for v in values.iter_mut() {
            *v = crate::model::noise_flow(*v, delta, model)?;
        }
    }
    let boundary = match field.boundary {
        BoundaryMode::FarField { lower, upper } => BoundaryMode::FarField {
            lower: lower + delta,
            upper: upper + delta,
        },
        b => b,
    };
    Ok(GridField {
        values,
        boundary,
        ..field.clone()
    })
}

/// Explicit heat step; far-field ghost cells hold the boundary values.
pub fn viscous_step(field: &GridField, nu: f64, dt: f64) -> Result<GridField> {
    let comps = (0..field.grid.dim)
        .map(|_| FluxComponent::monotone(SmoothFn::constant(0.0)))
        .collect();
    let dynamics = noiseless(
        ScalarFlux::new(comps, None, (f64::MIN, f64::MAX)),
        Forcing::Plain,
    );
    let op = Operator::new(
        dynamics,
        field.grid,
        field.boundary,
        SchemeConfig::default(),
    )?;
    let values = op.viscous_step(&field.values, initial_beta(field), nu, dt)?;
    Ok(GridField {
        values,
        ..field.clone()
    })
}
