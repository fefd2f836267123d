use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use super::testfn::{weak_star_error, TestFunction};
use super::young::young_measure_estimate;
use crate::brownian::{sample_path, BrownianPath};
use crate::effective::EffectiveFluxTable;
use crate::error::{Error, Result};
use crate::fv::{solve_effective, solve_family_p1, solve_problem, Grid, GridField, SchemeConfig};
use crate::kinetic::rigidity_defect;
use crate::model::{ProblemSpec, Variant};

/// `ubar(t, W(t), x)` in closed form.
pub type ExactFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;

/// Source of the homogenized solution compared against.
#[derive(Clone)]
pub enum Reference {
    Exact(ExactFn),
    /// Numerical homogenized solution of the stiff-source problem, built from
    /// the plan's effective flux table on the same grid and path.
    Effective,
    /// Quadrature average of the frozen-`y` family of the transport problem.
    Family {
        y_nodes: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

impl std::fmt::Debug for Reference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Exact(_) => f.write_str("Exact"),
            Self::Effective => f.write_str("Effective"),
            Self::Family { y_nodes, .. } => write!(f, "Family({} nodes)", y_nodes.len()),
        }
    }
}

/// Midpoint nodes `y_1 = (j + 1/2)/m` of the unit period with equal weights.
pub fn midpoint_nodes(m: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let nodes = (0..m)
        .map(|j| {
            let mut y = vec![0.0; dim];
            y[0] = (j as f64 + 0.5) / m as f64;
            y
        })
        .collect();
    (nodes, vec![1.0 / m as f64; m])
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub spec: ProblemSpec,
    pub epsilons: Vec<f64>,
    pub seeds: Vec<u64>,
    pub test_functions: Vec<TestFunction>,
    /// Observation times; zero and the final time are always included.
    pub times: Vec<f64>,
    pub reference: Reference,
    /// Needed for corrector and Young measure statistics of the
    /// stiff-source problem.
    pub table: Option<Arc<EffectiveFluxTable>>,
    pub scheme: SchemeConfig,
    pub min_cells: usize,
    /// Cells per unit of `eps` along each axis; at least 16.
    pub cells_per_eps: f64,
    pub path_level: u32,
    /// `(y_bins, xi_bins)` of the residual histogram.
    pub young: Option<(usize, usize)>,
}

impl SweepPlan {
    pub fn new(
        spec: ProblemSpec,
        epsilons: Vec<f64>,
        seeds: Vec<u64>,
        test_functions: Vec<TestFunction>,
        reference: Reference,
    ) -> Self {
        Self {
            spec,
            epsilons,
            seeds,
            test_functions,
            times: Vec::new(),
            reference,
            table: None,
            scheme: SchemeConfig::default(),
            min_cells: 16,
            cells_per_eps: 16.0,
            path_level: 0,
            young: None,
        }
    }

    pub fn cells(&self, eps: f64) -> usize {
        let l = self.spec.domain.half_width;
        let n = (self.cells_per_eps * 2.0 * l / eps - 1e-9).ceil() as usize;
        n.max(self.min_cells)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.seeds.is_empty() {
            return Err(Error::MalformedSpec(
                "sweep needs at least one eps and one seed".into(),
            ));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::MalformedSpec("eps must be positive".into()));
        }
        if self.cells_per_eps < 16.0 {
            return Err(Error::ResolutionTooCoarse(format!(
                "{} cells per eps, need 16",
                self.cells_per_eps
            )));
        }
        let l = self.spec.domain.half_width;
        for phi in &self.test_functions {
            if phi.dim() != self.spec.domain.dim || !phi.fits(l) {
                return Err(Error::UnsupportedTestFunction(format!(
                    "{:?} window at {:?} does not fit the box",
                    phi.kind, phi.center
                )));
            }
        }
        match (&self.reference, &self.spec.variant) {
            (Reference::Family { .. }, Variant::StiffSource { .. }) => {
                return Err(Error::MalformedSpec(
                    "family reference needs the transport problem".into(),
                ))
            }
            (Reference::Effective, Variant::Transport { .. }) => {
                return Err(Error::MalformedSpec(
                    "effective reference needs the stiff-source problem".into(),
                ))
            }
            (Reference::Effective, _) if self.table.is_none() => {
                return Err(Error::MalformedSpec(
                    "effective reference needs a flux table".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }
}

/// `|| u - g(fbar1(ubar) + V(x_1/eps)) ||_{L^1}` for the stiff-source problem.
pub fn corrector_error(
    u_eps: &GridField,
    u_bar: &GridField,
    table: &EffectiveFluxTable,
    spec: &ProblemSpec,
) -> Result<f64> {
    let corr = corrector_field(u_bar, table, spec)?;
    u_eps.l1_distance(&corr)
}

/// `U(t, x, x/eps) = g(fbar1(ubar(t, x)) + V(x_1/eps))`.
pub fn corrector_field(
    u_bar: &GridField,
    table: &EffectiveFluxTable,
    spec: &ProblemSpec,
) -> Result<GridField> {
    let flow = &spec.noise().flow;
    let g = u_bar.grid;
    let values = u_bar
        .values
        .iter()
        .enumerate()
        .map(|(i, &ub)| flow.forward(table.fbar1(ub)? + spec.shift(&g.center(i)[..g.dim])))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridField {
        values,
        ..u_bar.clone()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub epsilon: f64,
    pub n: usize,
    pub time: f64,
    /// `W(time)`
    pub w: f64,
    pub weak_star: Vec<f64>,
    pub corrector: Option<f64>,
    /// Mean per-bin variance of the corrector residual.
    pub young_variance: Option<f64>,
    /// Rigidity defect of the residual histogram.
    pub rigidity: Option<f64>,
}

/// Consecutive ratios `e(eps_{j+1}) / e(eps_j)` for one seed and time.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub seed: u64,
    pub time: f64,
    pub eps_from: f64,
    pub eps_to: f64,
    pub weak_star: Vec<f64>,
    pub corrector: Option<f64>,
    pub young_variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<SweepRow>,
}

impl ConvergenceTable {
    /// Rows of one seed and time, ordered by decreasing eps.
    pub fn series(&self, seed: u64, time: f64) -> Vec<&SweepRow> {
        let mut v: Vec<&SweepRow> = self
            .rows
            .iter()
            .filter(|r| r.seed == seed && (r.time - time).abs() < 1e-12)
            .collect();
        v.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
        v
    }

    /// Ratios at positive times; at `t = 0` both fields share their data.
    pub fn ratios(&self) -> Vec<RatioRow> {
        let mut keys: Vec<(u64, f64)> = Vec::new();
        for r in self.rows.iter().filter(|r| r.time > 0.0) {
            if !keys
                .iter()
                .any(|(s, t)| *s == r.seed && (*t - r.time).abs() < 1e-12)
            {
                keys.push((r.seed, r.time));
            }
        }
        let ratio = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => Some(b / a),
            _ => None,
        };
        let mut out = Vec::new();
        for (seed, time) in keys {
            let s = self.series(seed, time);
            for w in s.windows(2) {
                out.push(RatioRow {
                    seed,
                    time,
                    eps_from: w[0].epsilon,
                    eps_to: w[1].epsilon,
                    weak_star: w[0]
                        .weak_star
                        .iter()
                        .zip(&w[1].weak_star)
                        .map(|(a, b)| b / a)
                        .collect(),
                    corrector: ratio(w[0].corrector, w[1].corrector),
                    young_variance: ratio(w[0].young_variance, w[1].young_variance),
                });
            }
        }
        out
    }

    /// Long format `seed,eps,n,t,W,metric,index,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seed,eps,n,t,W,metric,index,value")?;
        for r in &self.rows {
            let head = format!(
                "{},{:.17e},{},{:.17e},{:.17e}",
                r.seed, r.epsilon, r.n, r.time, r.w
            );
            for (i, e) in r.weak_star.iter().enumerate() {
                writeln!(out, "{head},weak_star,{i},{e:.17e}")?;
            }
            for (name, v) in [
                ("corrector", r.corrector),
                ("young_variance", r.young_variance),
                ("rigidity", r.rigidity),
            ] {
                if let Some(v) = v {
                    writeln!(out, "{head},{name},0,{v:.17e}")?;
                }
            }
        }
        Ok(())
    }

    /// Columns `seed,t,eps_from,eps_to,metric,index,ratio`.
    pub fn write_ratios_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seed,t,eps_from,eps_to,metric,index,ratio")?;
        for r in self.ratios() {
            let head = format!(
                "{},{:.17e},{:.17e},{:.17e}",
                r.seed, r.time, r.eps_from, r.eps_to
            );
            for (i, e) in r.weak_star.iter().enumerate() {
                writeln!(out, "{head},weak_star,{i},{e:.17e}")?;
            }
            for (name, v) in [
                ("corrector", r.corrector),
                ("young_variance", r.young_variance),
            ] {
                if let Some(v) = v {
                    writeln!(out, "{head},{name},0,{v:.17e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Reference fields that do not depend on `eps`, shared by every run of
/// one seed on one grid.
fn shared_reference(
    plan: &SweepPlan,
    spec: &ProblemSpec,
    grid: Grid,
    path: &BrownianPath,
) -> Result<Vec<GridField>> {
    match &plan.reference {
        Reference::Exact(_) => unreachable!("computed per run"),
        Reference::Effective => {
            let table = plan.table.as_ref().expect("validated");
            let v0 = match &spec.variant {
                Variant::StiffSource { v0, .. } => v0.clone(),
                _ => unreachable!("validated"),
            };
            let traj = solve_effective(
                table,
                &*v0,
                grid,
                spec.domain.boundary,
                spec.kappa0(),
                path,
                &plan.scheme,
                spec.final_time,
                &plan.times,
            )?;
            Ok(traj.snapshots.iter().map(|s| traj.field(s)).collect())
        }
        Reference::Family { y_nodes, weights } => Ok(solve_family_p1(
            spec,
            grid.n,
            path,
            y_nodes,
            weights,
            &plan.scheme,
            &plan.times,
        )?
        .average),
    }
}

fn sweep_job(
    plan: &SweepPlan,
    seed: u64,
    eps: f64,
    shared: &HashMap<(u64, usize), Vec<GridField>>,
) -> Result<Vec<SweepRow>> {
    let spec = plan.spec.with_epsilon(eps);
    let n = plan.cells(eps);
    let path = sample_path(seed, 0, spec.final_time, plan.path_level)?;
    let run = solve_problem(&spec, n, &path, &plan.scheme, &plan.times)?;
    let grid = run.grid();
    let exact;
    let refs = match &plan.reference {
        Reference::Exact(f) => {
            exact = run
                .snapshots
                .iter()
                .map(|s| {
                    let mut field =
                        GridField::from_fn(grid, spec.domain.boundary, |x| f(s.time, s.w, x));
                    field.time = s.time;
                    field
                })
                .collect::<Vec<_>>();
            &exact
        }
        _ => &shared[&(seed, n)],
    };
    if refs.len() != run.snapshots.len() {
        return Err(Error::GridMismatch(
            "reference and fine run disagree on snapshot times".into(),
        ));
    }
    let table = if spec.is_stiff_source() {
        plan.table.as_deref()
    } else {
        None
    };
    run.snapshots
        .iter()
        .zip(refs)
        .map(|(snap, ubar)| {
            let u = run.field(snap);
            let weak_star = weak_star_error(&u, ubar, &plan.test_functions)?;
            let mut row = SweepRow {
                seed,
                epsilon: eps,
                n,
                time: snap.time,
                w: snap.w,
                weak_star,
                corrector: None,
                young_variance: None,
                rigidity: None,
            };
            if let Some(table) = table {
                let corr = corrector_field(ubar, table, &spec)?;
                row.corrector = Some(u.l1_distance(&corr)?);
                if let Some((yb, xb)) = plan.young {
                    let residual = GridField {
                        values: u
                            .values
                            .iter()
                            .zip(&corr.values)
                            .map(|(a, b)| a - b)
                            .collect(),
                        ..u.clone()
                    };
                    let period = spec.potential().and_then(|v| v.period()).unwrap_or(1.0);
                    let h = young_measure_estimate(&residual, eps, period, yb, xb)?;
                    row.young_variance = Some(h.mean_variance());
                    row.rigidity = Some(rigidity_defect(&h));
                }
            }
            Ok(row)
        })
        .collect()
}

/// Runs every `(seed, eps)` pair; each seed drives all its eps-runs and the
/// reference with the same Brownian path.
pub fn eps_sweep(plan: &SweepPlan) -> Result<ConvergenceTable> {
    plan.validate()?;
    let jobs: Vec<(u64, f64)> = plan
        .seeds
        .iter()
        .flat_map(|&s| plan.epsilons.iter().map(move |&e| (s, e)))
        .collect();
    let mut keys: Vec<(u64, usize)> = jobs.iter().map(|&(s, e)| (s, plan.cells(e))).collect();
    keys.sort_unstable();
    keys.dedup();
    if matches!(plan.reference, Reference::Exact(_)) {
        keys.clear();
    }
    let shared: HashMap<(u64, usize), Vec<GridField>> = keys
        .par_iter()
        .map(|&(seed, n)| {
            let path = sample_path(seed, 0, plan.spec.final_time, plan.path_level)?;
            let grid = Grid::new(plan.spec.domain.dim, n, plan.spec.domain.half_width)?;
            Ok(((seed, n), shared_reference(plan, &plan.spec, grid, &path)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(seed, eps)| sweep_job(plan, seed, eps, &shared))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        rows: rows.into_iter().flatten().collect(),
    })
}
