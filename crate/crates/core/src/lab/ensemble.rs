use std::io::{self, Write};

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::brownian::sample_path;
use crate::error::{Error, Result};
use crate::fv::{solve_problem, GridField, SchemeConfig};
use crate::model::{BoundaryMode, ProblemSpec};

/// Spatial weight `w_N(x) = (1 + |x|^2)^(-N)`; identically one on periodic
/// boxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    Unit,
    Polynomial(f64),
}

impl WeightFunction {
    pub fn for_boundary(boundary: BoundaryMode, n: f64) -> Self {
        match boundary {
            BoundaryMode::Periodic => Self::Unit,
            BoundaryMode::FarField { .. } => Self::Polynomial(n),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Self::Unit => 1.0,
            Self::Polynomial(n) => (1.0 + x.iter().map(|v| v * v).sum::<f64>()).powf(-n),
        }
    }

    /// `int w |u|^p dx` as a midpoint sum.
    pub fn moment(&self, u: &GridField, p: f64) -> f64 {
        let g = u.grid;
        let s: f64 = u
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.eval(&g.center(i)[..g.dim]) * v.abs().powf(p))
            .sum();
        s * g.cell_volume()
    }
}

/// Sample mean and Student-t half width at the given confidence.
pub fn mean_half_width(samples: &[f64], confidence: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::MalformedSpec(e.to_string()))?
        .inverse_cdf(0.5 + 0.5 * confidence);
    Ok((mean, t * (var / n as f64).sqrt()))
}

#[derive(Debug, Clone)]
pub struct EnsemblePlan {
    pub spec: ProblemSpec,
    pub n: usize,
    pub seed: u64,
    /// Level of the sampled paths; the solver refines as needed.
    pub path_level: u32,
    pub scheme: SchemeConfig,
    pub times: Vec<f64>,
    pub weight: WeightFunction,
    pub p_values: Vec<f64>,
    pub confidence: f64,
}

impl EnsemblePlan {
    pub fn new(spec: ProblemSpec, n: usize, seed: u64) -> Self {
        let weight = WeightFunction::for_boundary(spec.domain.boundary, 1.0);
        Self {
            spec,
            n,
            seed,
            path_level: 0,
            scheme: SchemeConfig::default(),
            times: Vec::new(),
            weight,
            p_values: vec![1.0, 2.0, 4.0],
            confidence: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStat {
    pub p: f64,
    pub mean: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTime {
    pub time: f64,
    pub mean_field: GridField,
    pub moments: Vec<MomentStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_paths: usize,
    pub confidence: f64,
    pub times: Vec<EnsembleTime>,
}

impl EnsembleStats {
    /// Columns `t,p,mean,half_width`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,p,mean,half_width")?;
        for t in &self.times {
            for m in &t.moments {
                writeln!(
                    out,
                    "{:.17e},{},{:.17e},{:.17e}",
                    t.time, m.p, m.mean, m.half_width
                )?;
            }
        }
        Ok(())
    }
}

/// Runs `n_paths` independent streams of `plan.seed` and aggregates the
/// snapshots in stream order.
pub fn monte_carlo(plan: &EnsemblePlan, n_paths: usize) -> Result<EnsembleStats> {
    if n_paths < 2 {
        return Err(Error::InsufficientPaths {
            needed: 2,
            got: n_paths,
        });
    }
    let runs = (0..n_paths as u64)
        .into_par_iter()
        .map(|stream| {
            let path = sample_path(plan.seed, stream, plan.spec.final_time, plan.path_level)?;
            solve_problem(&plan.spec, plan.n, &path, &plan.scheme, &plan.times)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut times = Vec::new();
    for (s, snap) in runs[0].snapshots.iter().enumerate() {
        let fields: Vec<GridField> = runs.iter().map(|r| r.field(&r.snapshots[s])).collect();
        let mut mean = vec![0.0; snap.values.len()];
        for f in &fields {
            for (m, v) in mean.iter_mut().zip(&f.values) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n_paths as f64;
        }
        let moments = plan
            .p_values
            .iter()
            .map(|&p| {
                let samples: Vec<f64> = fields.iter().map(|f| plan.weight.moment(f, p)).collect();
                let (mean, half_width) = mean_half_width(&samples, plan.confidence)?;
                Ok(MomentStat {
                    p,
                    mean,
                    half_width,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        times.push(EnsembleTime {
            time: snap.time,
            mean_field: GridField {
                values: mean,
                ..fields[0].clone()
            },
            moments,
        });
    }
    Ok(EnsembleStats {
        n_paths,
        confidence: plan.confidence,
        times,
    })
}
