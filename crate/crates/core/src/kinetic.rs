//! Kinetic functions, discrete Kruzkov entropy production and the rigidity
//! defect of Young measure histograms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fv::{Forcing, Grid, Operator, Trajectory};
use crate::lab::YoungMeasureHistogram;

/// Uniform grid of `n` cells of width `step` starting at `lo`; sums use the
/// cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiGrid {
    pub lo: f64,
    pub step: f64,
    pub n: usize,
}

impl XiGrid {
    pub fn new(lo: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) || n == 0 || !lo.is_finite() {
            return Err(Error::MalformedSpec(format!(
                "bad xi grid lo={lo} step={step} n={n}"
            )));
        }
        Ok(Self { lo, step, n })
    }

    /// Smallest grid of spacing `step` containing `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(hi >= lo) {
            return Err(Error::MalformedSpec(format!("empty xi range [{lo}, {hi}]")));
        }
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        Self::new(lo, step, n)
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.step * self.n as f64
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.step
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|j| self.midpoint(j))
    }
}

/// `chi_+(xi, u) = 1_{xi < u}`.
#[inline]
pub fn chi_plus(xi: f64, u: f64) -> f64 {
    if xi < u {
        1.0
    } else {
        0.0
    }
}

/// `chi(xi, u) = 1_{xi < u} - 1_{xi < 0}`.
#[inline]
pub fn chi(xi: f64, u: f64) -> f64 {
    chi_plus(xi, u) - chi_plus(xi, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticSample {
    pub u: f64,
    pub grid: XiGrid,
    pub chi_plus: Vec<f64>,
    pub chi: Vec<f64>,
}

impl KineticSample {
    pub fn new(u: f64, grid: XiGrid) -> Self {
        Self {
            u,
            grid,
            chi_plus: grid.midpoints().map(|x| chi_plus(x, u)).collect(),
            chi: grid.midpoints().map(|x| chi(x, u)).collect(),
        }
    }

    pub fn integral_of_chi(&self) -> f64 {
        self.chi.iter().sum::<f64>() * self.grid.step
    }
}

/// Quadrature values and exact values of the four kinetic identities:
/// `int chi(xi,u) = u` (over the grid), `int chi_+(u)(1 - chi_+(v)) = (u-v)_+`,
/// `int |chi_+(u) - chi_+(v)| = |u-v|` and `int (g - g^2) = |u-v|/4`
/// with `g = (chi_+(u) + chi_+(v))/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiCheck {
    pub integrals: [f64; 4],
    pub exact: [f64; 4],
}

impl ChiCheck {
    pub fn residuals(&self) -> [f64; 4] {
        std::array::from_fn(|i| (self.integrals[i] - self.exact[i]).abs())
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().into_iter().fold(0.0, f64::max)
    }
}

pub fn chi_identity_check(u: f64, v: f64, grid: &XiGrid) -> Result<ChiCheck> {
    let need_lo = u.min(v) - 1.0;
    let need_hi = u.max(v) + 1.0;
    if grid.lo > need_lo || grid.hi() < need_hi {
        return Err(Error::GridTooNarrow {
            lo: grid.lo,
            hi: grid.hi(),
            need_lo,
            need_hi,
        });
    }
    let a = KineticSample::new(u, *grid);
    let b = KineticSample::new(v, *grid);
    let mut s = [0.0; 4];
    for j in 0..grid.n {
        let (p, q) = (a.chi_plus[j], b.chi_plus[j]);
        let g = 0.5 * (p + q);
        s[0] += a.chi[j];
        s[1] += p * (1.0 - q);
        s[2] += (p - q).abs();
        s[3] += g - g * g;
    }
    Ok(ChiCheck {
        integrals: s.map(|x| x * grid.step),
        exact: [
            u.clamp(grid.lo, grid.hi()) - 0.0f64.clamp(grid.lo, grid.hi()),
            (u - v).max(0.0),
            (u - v).abs(),
            0.25 * (u - v).abs(),
        ],
    })
}

/// Discrete production of the Kruzkov entropies `|u - psi_k|` by the
/// hyperbolic part of each step. `psi_k` is the constant `k` for transport
/// and effective dynamics, and the discrete equilibrium `g(V(x/eps) + k)` for
/// the stiff-source problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProductionField {
    pub k_values: Vec<f64>,
    /// Trapezoid weights of `k_values`.
    pub k_weights: Vec<f64>,
    pub grid: Grid,
    pub dt: f64,
    pub steps: usize,
    /// `[k][cell]`, summed over steps, times the cell volume.
    pub per_cell: Vec<Vec<f64>>,
    /// `[k][step]`, summed over cells, times the cell volume.
    pub per_step: Vec<Vec<f64>>,
    /// Extreme single (k, cell, step) entries.
    pub min_entry: f64,
    pub max_entry: f64,
}

impl EntropyProductionField {
    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.min_entry >= -tol
    }

    /// Total production of entropy `k`.
    pub fn total(&self, k_index: usize) -> f64 {
        self.per_cell[k_index].iter().sum()
    }

    /// Kinetic measure density in `k`: half the entropy production.
    pub fn kinetic_measure(&self, k_index: usize) -> Vec<f64> {
        self.per_cell[k_index].iter().map(|p| 0.5 * p).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

fn trapezoid_weights(k: &[f64]) -> Vec<f64> {
    if k.len() == 1 {
        return vec![1.0];
    }
    (0..k.len())
        .map(|i| {
            let l = if i == 0 { 0.0 } else { k[i] - k[i - 1] };
            let r = if i + 1 == k.len() {
                0.0
            } else {
                k[i + 1] - k[i]
            };
            0.5 * (l + r)
        })
        .collect()
}

/// Entropy `k` as a field and its far-field flow coordinates.
fn reference_state(op: &Operator, k: f64) -> Result<(Vec<f64>, (f64, f64))> {
    let cells = op.grid.cells();
    let dim = op.grid.dim;
    if op.reconstructs() || matches!(op.dynamics.forcing, Forcing::Source { .. }) {
        let psi = (0..cells)
            .map(|i| op.dynamics.equilibrium(k, &op.grid.center(i)[..dim]))
            .collect::<Result<Vec<_>>>()?;
        Ok((psi, (k, k)))
    } else {
        let b = op.dynamics.noise.flow.inverse(k)?;
        Ok((vec![k; cells], (b, b)))
    }
}

/// Per-face `Q = F(u v psi) - F(u ^ psi)` along `axis`.
fn entropy_fluxes(
    op: &Operator,
    axis: usize,
    states: &[(f64, f64)],
    psi: &[(f64, f64)],
) -> Vec<f64> {
    let n1 = op.grid.n + 1;
    states
        .iter()
        .zip(psi)
        .enumerate()
        .map(|(idx, (&(ul, ur), &(pl, pr)))| {
            let (line, face) = (idx / n1, idx % n1);
            op.face_flux(axis, line, face, ul.max(pl), ur.max(pr))
                - op.face_flux(axis, line, face, ul.min(pl), ur.min(pr))
        })
        .collect()
}

pub fn entropy_production(
    trajectory: &Trajectory,
    k_values: &[f64],
) -> Result<EntropyProductionField> {
    let records = trajectory.records.as_ref().ok_or(Error::MissingStepData)?;
    if k_values.is_empty() {
        return Err(Error::MalformedSpec("no Kruzkov parameters".into()));
    }
    let mut k_sorted = k_values.to_vec();
    k_sorted.sort_by(f64::total_cmp);
    let op = &trajectory.operator;
    let grid = op.grid;
    let n = grid.n;
    let vol = grid.cell_volume();
    let lambda = trajectory.dt / grid.dx();

    let per_k = k_sorted
        .par_iter()
        .map(|&k| -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
            let (psi, beta_psi) = reference_state(op, k)?;
            let psi_states = (0..grid.dim)
                .map(|axis| op.interface_states(axis, &psi, beta_psi))
                .collect::<Result<Vec<_>>>()?;
            let mut cell = vec![0.0; grid.cells()];
            let mut step = Vec::with_capacity(records.len());
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for rec in records {
                let mut e: Vec<f64> = (0..grid.cells())
                    .map(|i| (rec.before[i] - psi[i]).abs() - (rec.after_det[i] - psi[i]).abs())
                    .collect();
                for (axis, ps) in psi_states.iter().enumerate() {
                    let states = op.interface_states(axis, &rec.before, rec.beta)?;
                    let q = entropy_fluxes(op, axis, &states, ps);
                    for line in 0..grid.lines() {
                        for i in 0..n {
                            let dq = q[line * (n + 1) + i + 1] - q[line * (n + 1) + i];
                            e[grid.line_index(axis, line, i)] -= lambda * dq;
                        }
                    }
                }
                let mut total = 0.0;
                for (c, v) in cell.iter_mut().zip(&e) {
                    *c += v * vol;
                    total += v * vol;
                    min = min.min(*v);
                    max = max.max(*v);
                }
                step.push(total);
            }
            Ok((cell, step, min, max))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_cell = Vec::with_capacity(per_k.len());
    let mut per_step = Vec::with_capacity(per_k.len());
    let mut min_entry = f64::INFINITY;
    let mut max_entry = f64::NEG_INFINITY;
    for (c, s, lo, hi) in per_k {
        per_cell.push(c);
        per_step.push(s);
        min_entry = min_entry.min(lo);
        max_entry = max_entry.max(hi);
    }
    Ok(EntropyProductionField {
        k_weights: trapezoid_weights(&k_sorted),
        k_values: k_sorted,
        grid,
        dt: trajectory.dt,
        steps: records.len(),
        per_cell,
        per_step,
        min_entry,
        max_entry,
    })
}

/// `sum_k |k|^p w(k) sum_i w_N(x_i) m(k, x_i)` with `m` the kinetic measure.
pub fn weighted_p_moment(field: &EntropyProductionField, p: f64, w: impl Fn(&[f64]) -> f64) -> f64 {
    let dim = field.grid.dim;
    let wx: Vec<f64> = (0..field.grid.cells())
        .map(|i| w(&field.grid.center(i)[..dim]))
        .collect();
    field
        .k_values
        .iter()
        .zip(&field.k_weights)
        .zip(&field.per_cell)
        .map(|((k, kw), cells)| {
            let kp = if p == 0.0 { 1.0 } else { k.abs().powf(p) };
            let s: f64 = cells.iter().zip(&wx).map(|(m, w)| 0.5 * m * w).sum();
            kp * kw * s
        })
        .sum()
}

/// `int (rho - rho^2) dxi` per y-bin, averaged over y-bins, where `rho` is
/// the complementary distribution function of the bin with its mass placed
/// at the xi-bin centers.
pub fn rigidity_defect(h: &YoungMeasureHistogram) -> f64 {
    if h.weights.is_empty() {
        return 0.0;
    }
    let dxi = h.xi_step();
    let total: f64 = h
        .weights
        .iter()
        .map(|bin| {
            let mut rho = 1.0;
            let mut s = 0.0;
            for w in &bin[..bin.len().saturating_sub(1)] {
                rho -= w;
                let r = rho.clamp(0.0, 1.0);
                s += r - r * r;
            }
            s * dxi
        })
        .sum();
    total / h.weights.len() as f64
}
