//! Homogenized flux of the stiff-source problem.
//!
//! With `g = f_1^{-1}` and `F(q) = M[g(q + V)]`, the effective flux is
//! `fbar_1 = F^{-1}`, its inverse is `gbar = F`, and
//! `fbar_k(p) = M[f_k(g(fbar_1(p) + V))]`. Derivatives of `fbar_1` come from
//! implicit differentiation of `F`, whose derivatives are mean values of the
//! derivatives of `g`.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::interp::Hermite;
use crate::model::flux::solve_increasing;
use crate::model::{
    FlowPrimitive, FluxComponent, OscillatoryPotential, PotentialKind, RealFn, ScalarFlux, SmoothFn,
};

/// Nodes `V(z_j)` and weights of a mean-value rule.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Change against the previous refinement.
    pub bracket: f64,
}

impl Quadrature {
    pub fn mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(&w, &c)| c * f(w))
            .sum()
    }

    pub fn mean_k<const K: usize>(&self, f: impl Fn(f64) -> [f64; K]) -> [f64; K] {
        let mut acc = [0.0; K];
        for (&w, &c) in self.values.iter().zip(&self.weights) {
            let v = f(w);
            for k in 0..K {
                acc[k] += c * v[k];
            }
        }
        acc
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            })
    }
}

/// Mean values `M[phi(V)]` for a trigonometric potential.
///
/// Periodic potentials use the trapezoid rule over one period, doubling the
/// node count until two rules agree. Quasi-periodic potentials use
/// Hann-weighted averages over `[0, R]` for `R` in `windows`, accepting the
/// first window that agrees with its predecessor.
#[derive(Debug, Clone)]
pub struct MeanValueEngine {
    pub potential: OscillatoryPotential,
    pub tolerance: f64,
    pub windows: Vec<f64>,
}

const MIN_POINTS: usize = 64;
const MAX_POINTS: usize = 1 << 22;

impl MeanValueEngine {
    pub fn new(potential: OscillatoryPotential, tolerance: f64) -> Self {
        Self {
            potential,
            tolerance,
            windows: vec![1e3, 1e4, 1e5],
        }
    }

    fn periodic_rule(&self, period: f64, n: usize) -> Quadrature {
        let values = (0..n)
            .map(|j| self.potential.value(period * j as f64 / n as f64))
            .collect();
        Quadrature {
            values,
            weights: vec![1.0 / n as f64; n],
            bracket: f64::INFINITY,
        }
    }

    fn window_rule(&self, r: f64) -> Quadrature {
        let fmax = self
            .potential
            .modes
            .iter()
            .map(|m| m.frequency.abs())
            .fold(0.0, f64::max)
            .max(1e-3);
        let n = ((16.0 * fmax * r).ceil() as usize).max(MIN_POINTS);
        let dz = r / n as f64;
        let mut values = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 0..n {
            let z = (j as f64 + 0.5) * dz;
            values.push(self.potential.value(z));
            weights.push((std::f64::consts::PI * z / r).sin().powi(2));
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Quadrature {
            values,
            weights,
            bracket: f64::INFINITY,
        }
    }

    /// Smallest rule under which every component of `probe` is stable.
    pub fn resolve(&self, probe: &dyn Fn(f64) -> Vec<f64>) -> Result<Quadrature> {
        let eval = |q: &Quadrature| -> Vec<f64> {
            let mut acc: Vec<f64> = Vec::new();
            for (&w, &c) in q.values.iter().zip(&q.weights) {
                let v = probe(w);
                if acc.is_empty() {
                    acc = vec![0.0; v.len()];
                }
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += c * x;
                }
            }
            acc
        };
        let gap = |a: &[f64], b: &[f64]| -> (f64, bool) {
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for (x, y) in a.iter().zip(b) {
                let d = (x - y).abs();
                worst = worst.max(d);
                ok &= d <= self.tolerance * y.abs().max(1.0);
            }
            (worst, ok)
        };
        if self.potential.is_constant() {
            return Ok(Quadrature {
                values: vec![self.potential.mean()],
                weights: vec![1.0],
                bracket: 0.0,
            });
        }
        match self.potential.kind {
            PotentialKind::Periodic { period } => {
                let mut n = MIN_POINTS;
                let mut prev = self.periodic_rule(period, n);
                let mut prev_val = eval(&prev);
                let mut bracket = f64::INFINITY;
                while n < MAX_POINTS {
                    n *= 2;
                    let mut next = self.periodic_rule(period, n);
                    let val = eval(&next);
                    let (d, ok) = gap(&prev_val, &val);
                    bracket = d;
                    if ok {
                        // the coarser rule already agrees with its refinement
                        prev.bracket = d;
                        return Ok(prev);
                    }
                    next.bracket = d;
                    prev = next;
                    prev_val = val;
                }
                Err(Error::NoConvergence {
                    bracket,
                    tolerance: self.tolerance,
                })
            }
            PotentialKind::QuasiPeriodic => {
                let mut prev: Option<Vec<f64>> = None;
                let mut bracket = f64::INFINITY;
                for &r in &self.windows {
                    let mut q = self.window_rule(r);
                    let val = eval(&q);
                    if let Some(p) = &prev {
                        let (d, ok) = gap(p, &val);
                        bracket = d;
                        if ok {
                            q.bracket = d;
                            return Ok(q);
                        }
                    }
                    prev = Some(val);
                }
                Err(Error::NoConvergence {
                    bracket,
                    tolerance: self.tolerance,
                })
            }
        }
    }

    /// `M[integrand(V)]` and its error bracket.
    pub fn mean_value(&self, integrand: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
        let q = self.resolve(&|w| vec![integrand(w)])?;
        Ok((q.mean(&integrand), q.bracket))
    }
}

/// `M[integrand(V)]`.
pub fn mean_value(integrand: impl Fn(f64) -> f64, engine: &MeanValueEngine) -> Result<f64> {
    engine.mean_value(integrand).map(|(v, _)| v)
}

/// `g = f_1^{-1}` and its first three derivatives.
#[derive(Clone)]
struct InverseFlux {
    f1: SmoothFn,
    delta0: f64,
}

impl InverseFlux {
    fn g(&self, z: f64) -> f64 {
        let c = self.f1.eval(0.0);
        let reach = (z - c) / self.delta0;
        let (lo, hi) = if reach >= 0.0 {
            (0.0, reach)
        } else {
            (reach, 0.0)
        };
        solve_increasing(
            |u| self.f1.eval(u) - z,
            |u| self.f1.d1(u),
            lo,
            hi,
            (z - c) / self.f1.d1(0.0),
        )
    }

    /// `[g, g', g'', g''']` at `z`.
    fn jet(&self, z: f64) -> [f64; 4] {
        let u = self.g(z);
        let (p1, p2, p3) = (self.f1.d1(u), self.f1.d2(u), self.f1.d3(u));
        [
            u,
            1.0 / p1,
            -p2 / p1.powi(3),
            -(p3 * p1 - 3.0 * p2 * p2) / p1.powi(5),
        ]
    }
}

fn inverse_flux(flux: &ScalarFlux) -> Result<InverseFlux> {
    match flux.delta0 {
        Some(d) if d > 0.0 => Ok(InverseFlux {
            f1: flux.f1().clone(),
            delta0: d,
        }),
        _ => Err(Error::MalformedSpec(
            "effective flux needs delta0 > 0 bounding f1' from below".into(),
        )),
    }
}

fn probe_quadrature(
    flux: &ScalarFlux,
    engine: &MeanValueEngine,
    q_lo: f64,
    q_hi: f64,
) -> Result<Quadrature> {
    let ginv = inverse_flux(flux)?;
    let qs = [q_lo, 0.5 * (q_lo + q_hi), q_hi];
    engine.resolve(&|w| {
        qs.iter()
            .flat_map(|&q| {
                let j = ginv.jet(q + w);
                [j[0], j[1], j[2]]
            })
            .collect()
    })
}

fn same_potential(engine: &MeanValueEngine, v: &OscillatoryPotential) -> Result<()> {
    if engine.potential != *v {
        return Err(Error::MalformedSpec(
            "mean-value engine was built for a different potential".into(),
        ));
    }
    Ok(())
}

/// Root `q` of `F(q) = p` under a fixed rule.
fn fbar1_with(ginv: &InverseFlux, quad: &Quadrature, p: f64, range: (f64, f64)) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::OutOfRange(p));
    }
    let (vmin, vmax) = quad.min_max();
    let f1p = ginv.f1.eval(p);
    let (lo, hi) = (f1p - vmax, f1p - vmin);
    let q = solve_increasing(
        |q| quad.mean(|w| ginv.g(q + w)) - p,
        |q| quad.mean(|w| ginv.jet(q + w)[1]),
        lo,
        hi,
        f1p - quad.mean(|w| w),
    );
    let (g_lo, g_hi) = (ginv.g(q + vmin), ginv.g(q + vmax));
    if g_lo < range.0 || g_hi > range.1 {
        return Err(Error::OutOfRange(p));
    }
    Ok(q)
}

/// `fbar_1(p)`: the `q` with `M[g(q + V)] = p`.
pub fn solve_fbar1(
    p: f64,
    flux: &ScalarFlux,
    v: &OscillatoryPotential,
    engine: &MeanValueEngine,
) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::OutOfRange(p));
    }
    same_potential(engine, v)?;
    let ginv = inverse_flux(flux)?;
    let f1p = flux.f1().eval(p);
    let (vmin, vmax) = v.bounds();
    let quad = probe_quadrature(flux, engine, f1p - vmax, f1p - vmin)?;
    fbar1_with(&ginv, &quad, p, flux.range)
}

/// Tabulated effective flux on a uniform `p` grid.
#[derive(Clone)]
pub struct EffectiveFluxTable {
    pub p: Vec<f64>,
    pub fbar1: Vec<f64>,
    pub fbar1p: Vec<f64>,
    pub fbar1pp: Vec<f64>,
    pub fbar1ppp: Vec<f64>,
    /// `fbar_k` and `fbar_k'` for `k >= 2`.
    pub fbar_k: Vec<(Vec<f64>, Vec<f64>)>,
    /// Worst `|F(fbar_1(p_j)) - p_j|`.
    pub fixed_point_residual: f64,
    /// Worst `|gbar(fbar_1(p_j)) - p_j|` of the interpolated inverse.
    pub inverse_residual: f64,
    pub quadrature_points: usize,
    i_f1: Hermite,
    i_f1p: Hermite,
    i_f1pp: Hermite,
    i_fk: Vec<Hermite>,
    crit_k: Vec<Vec<f64>>,
}

impl std::fmt::Debug for EffectiveFluxTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EffectiveFluxTable")
            .field("nodes", &self.p.len())
            .field("p_range", &self.p_range())
            .field("fixed_point_residual", &self.fixed_point_residual)
            .field("inverse_residual", &self.inverse_residual)
            .finish()
    }
}

struct NodeData {
    q: f64,
    d: [f64; 3],
    fk: Vec<(f64, f64)>,
    residual: f64,
}

/// Builds the table on `n` uniform nodes spanning `p_range`.
pub fn build_effective_flux(
    flux: &ScalarFlux,
    v: &OscillatoryPotential,
    engine: &MeanValueEngine,
    p_range: (f64, f64),
    n: usize,
) -> Result<EffectiveFluxTable> {
    let (p_lo, p_hi) = p_range;
    if !(p_lo < p_hi) || n < 2 {
        return Err(Error::MalformedSpec(format!(
            "effective flux grid [{p_lo}, {p_hi}] with {n} nodes"
        )));
    }
    same_potential(engine, v)?;
    let ginv = inverse_flux(flux)?;
    let (vmin, vmax) = v.bounds();
    let quad = probe_quadrature(
        flux,
        engine,
        flux.f1().eval(p_lo) - vmax,
        flux.f1().eval(p_hi) - vmin,
    )?;
    let h = (p_hi - p_lo) / (n - 1) as f64;
    let ps: Vec<f64> = (0..n).map(|j| p_lo + h * j as f64).collect();
    let nodes: Vec<Result<NodeData>> = ps
        .par_iter()
        .map(|&p| {
            let q = fbar1_with(&ginv, &quad, p, flux.range)?;
            let [m0, m1, m2, m3] = quad.mean_k(|w| ginv.jet(q + w));
            let fk = flux.components[1..]
                .iter()
                .map(|c| {
                    let [a, b] = quad.mean_k(|w| {
                        let j = ginv.jet(q + w);
                        [c.eval(j[0]), c.speed(j[0]) * j[1]]
                    });
                    (a, b / m1)
                })
                .collect();
            Ok(NodeData {
                q,
                d: [m1, m2, m3],
                fk,
                residual: (m0 - p).abs(),
            })
        })
        .collect();
    let nodes = nodes.into_iter().collect::<Result<Vec<_>>>()?;

    let mut t = EffectiveFluxTable {
        p: ps,
        fbar1: Vec::with_capacity(n),
        fbar1p: Vec::with_capacity(n),
        fbar1pp: Vec::with_capacity(n),
        fbar1ppp: Vec::with_capacity(n),
        fbar_k: vec![(Vec::with_capacity(n), Vec::with_capacity(n)); flux.dim() - 1],
        fixed_point_residual: 0.0,
        inverse_residual: 0.0,
        quadrature_points: quad.len(),
        i_f1: Hermite::new(0.0, 1.0, vec![0.0; 2], vec![0.0; 2]),
        i_f1p: Hermite::new(0.0, 1.0, vec![0.0; 2], vec![0.0; 2]),
        i_f1pp: Hermite::new(0.0, 1.0, vec![0.0; 2], vec![0.0; 2]),
        i_fk: Vec::new(),
        crit_k: Vec::new(),
    };
    for nd in &nodes {
        let [a1, a2, a3] = nd.d;
        t.fbar1.push(nd.q);
        t.fbar1p.push(1.0 / a1);
        t.fbar1pp.push(-a2 / a1.powi(3));
        t.fbar1ppp
            .push(-a3 / a1.powi(4) + 3.0 * a2 * a2 / a1.powi(5));
        for (k, &(v, dv)) in nd.fk.iter().enumerate() {
            t.fbar_k[k].0.push(v);
            t.fbar_k[k].1.push(dv);
        }
        t.fixed_point_residual = t.fixed_point_residual.max(nd.residual);
    }
    t.i_f1 = Hermite::new_monotone(p_lo, h, t.fbar1.clone(), t.fbar1p.clone());
    t.i_f1p = Hermite::new(p_lo, h, t.fbar1p.clone(), t.fbar1pp.clone());
    t.i_f1pp = Hermite::new(p_lo, h, t.fbar1pp.clone(), t.fbar1ppp.clone());
    t.i_fk = t
        .fbar_k
        .iter()
        .map(|(v, dv)| Hermite::new(p_lo, h, v.clone(), dv.clone()))
        .collect();
    t.crit_k = t
        .i_fk
        .iter()
        .zip(&t.fbar_k)
        .map(|(ip, (_, dv))| sign_changes(ip, dv, p_lo, h))
        .collect();
    for (j, &q) in t.fbar1.iter().enumerate() {
        let back = t.gbar(q)?;
        t.inverse_residual = t.inverse_residual.max((back - t.p[j]).abs());
    }
    Ok(t)
}

/// Zeros of the derivative of an interpolated `fbar_k`, by bisection on
/// sign changes between nodes.
fn sign_changes(ip: &Hermite, dv: &[f64], p_lo: f64, h: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for j in 0..dv.len() - 1 {
        if dv[j] == 0.0 {
            out.push(p_lo + h * j as f64);
        } else if dv[j] * dv[j + 1] < 0.0 {
            let (mut a, mut b) = (p_lo + h * j as f64, p_lo + h * (j + 1) as f64);
            let sa = ip.derivative(a).signum();
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                if ip.derivative(m).signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}

impl EffectiveFluxTable {
    pub fn p_range(&self) -> (f64, f64) {
        (self.p[0], self.p[self.p.len() - 1])
    }

    fn check(&self, p: f64) -> Result<()> {
        if !self.i_f1.contains(p) {
            let (lo, hi) = self.p_range();
            return Err(Error::RangeExceeded {
                what: "effective flux table",
                value: p,
                lo,
                hi,
            });
        }
        Ok(())
    }

    pub fn fbar1(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.i_f1.eval(p))
    }

    pub fn fbar1_prime(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.i_f1p.eval(p))
    }

    pub fn fbar1_second(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.i_f1pp.eval(p))
    }

    pub fn fbar1_third(&self, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.i_f1pp.derivative(p))
    }

    /// `fbar_k` for `k >= 2` (one-based as in the flux vector).
    pub fn fbar_k(&self, k: usize, p: f64) -> Result<f64> {
        self.check(p)?;
        Ok(self.i_fk[k - 2].eval(p))
    }

    /// `gbar = fbar_1^{-1}`, by inverting the interpolant.
    pub fn gbar(&self, xi: f64) -> Result<f64> {
        self.i_f1.inverse(xi).ok_or_else(|| Error::RangeExceeded {
            what: "effective inverse flux gbar",
            value: xi,
            lo: self.i_f1.values()[0],
            hi: *self.i_f1.values().last().unwrap(),
        })
    }

    /// `sigma_{fbar1}(p) = 1/fbar_1'(p)`.
    pub fn sigma_bar(&self, p: f64) -> Result<f64> {
        Ok(1.0 / self.fbar1_prime(p)?)
    }

    /// `h_{fbar1}(p) = -fbar_1''(p)/fbar_1'(p)^3`.
    pub fn h_bar(&self, p: f64) -> Result<f64> {
        let d1 = self.fbar1_prime(p)?;
        Ok(-self.fbar1_second(p)? / d1.powi(3))
    }

    pub fn min_fbar1_prime(&self) -> f64 {
        self.fbar1p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// The effective flux vector as evaluable functions, for the solver.
    pub fn flux(&self) -> ScalarFlux {
        let range = self.p_range();
        let a = self.i_f1.clone();
        let b = self.i_f1p.clone();
        let c = self.i_f1pp.clone();
        let d = self.i_f1pp.clone();
        let f1 = SmoothFn::new(
            "fbar1",
            vec![
                Arc::new(move |p| a.eval(p)) as RealFn,
                Arc::new(move |p| b.eval(p)),
                Arc::new(move |p| c.eval(p)),
                Arc::new(move |p| d.derivative(p)),
            ],
        );
        let mut comps = vec![FluxComponent::monotone(f1)];
        for (k, ip) in self.i_fk.iter().enumerate() {
            let a = ip.clone();
            let b = ip.clone();
            comps.push(FluxComponent::new(
                SmoothFn::new(
                    format!("fbar{}", k + 2),
                    vec![
                        Arc::new(move |p| a.eval(p)) as RealFn,
                        Arc::new(move |p| b.derivative(p)),
                    ],
                ),
                self.crit_k[k].clone(),
            ));
        }
        ScalarFlux::new(comps, Some(self.min_fbar1_prime()), range)
    }

    /// Flow primitive `(gbar, fbar_1)` of the effective noise.
    pub fn flow(&self) -> EffectiveFlow {
        EffectiveFlow {
            table: self.i_f1.clone(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "p,fbar1,fbar1p,fbar1pp,gbar")?;
        for k in 0..self.fbar_k.len() {
            write!(out, ",fbar{}", k + 2)?;
        }
        writeln!(out)?;
        for j in 0..self.p.len() {
            // gbar evaluated at fbar1(p_j) returns p_j
            write!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.p[j], self.fbar1[j], self.fbar1p[j], self.fbar1pp[j], self.p[j]
            )?;
            for (v, _) in &self.fbar_k {
                write!(out, ",{:.17e}", v[j])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `forward = gbar`, `inverse = fbar_1`, both from the table interpolant.
#[derive(Debug, Clone)]
pub struct EffectiveFlow {
    table: Hermite,
}

impl FlowPrimitive for EffectiveFlow {
    fn forward(&self, xi: f64) -> Result<f64> {
        self.table.inverse(xi).ok_or_else(|| Error::RangeExceeded {
            what: "effective inverse flux gbar",
            value: xi,
            lo: self.table.values()[0],
            hi: *self.table.values().last().unwrap(),
        })
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        if !self.table.contains(u) {
            return Err(Error::RangeExceeded {
                what: "effective flux table",
                value: u,
                lo: self.table.x_min(),
                hi: self.table.x_max(),
            });
        }
        Ok(self.table.eval(u))
    }
}

/// Residuals of the effective-noise identities
/// `sigma_{fbar1}(gbar(v)) = M[sigma_{f1}(g(v + V))]` and the `h` analogue.
#[derive(Debug, Clone, PartialEq)]
pub struct MiraculousReport {
    pub sigma_residual: f64,
    pub h_residual: f64,
    pub points: usize,
}

pub fn check_miraculous(
    table: &EffectiveFluxTable,
    flux: &ScalarFlux,
    v: &OscillatoryPotential,
    engine: &MeanValueEngine,
    v_grid: &[f64],
) -> Result<MiraculousReport> {
    same_potential(engine, v)?;
    let f1 = flux.f1().clone();
    let ginv = inverse_flux(flux)?;
    let mut sigma_residual: f64 = 0.0;
    let mut h_residual: f64 = 0.0;
    for &vv in v_grid {
        let p = table.gbar(vv)?;
        let lhs_s = table.sigma_bar(p)?;
        let lhs_h = table.h_bar(p)?;
        let probe = |w: f64| {
            let u = ginv.g(vv + w);
            let d1 = f1.d1(u);
            [1.0 / d1, -f1.d2(u) / d1.powi(3)]
        };
        let quad = engine.resolve(&|w| probe(w).to_vec())?;
        let [rs, rh] = quad.mean_k(probe);
        sigma_residual = sigma_residual.max((lhs_s - rs).abs());
        h_residual = h_residual.max((lhs_h - rh).abs());
    }
    Ok(MiraculousReport {
        sigma_residual,
        h_residual,
        points: v_grid.len(),
    })
}

/// Effective initial data `ubar_0(x) = M[g(v_0(x) + V)] = gbar(v_0(x))`.
pub fn effective_initial_value(table: &EffectiveFluxTable, v0: f64) -> Result<f64> {
    table.gbar(v0)
}

/// `p` interval `[F(v_lo), F(v_hi)]` covering flow coordinates `[v_lo, v_hi]`.
pub fn p_range_for(
    flux: &ScalarFlux,
    v: &OscillatoryPotential,
    engine: &MeanValueEngine,
    v_range: (f64, f64),
) -> Result<(f64, f64)> {
    same_potential(engine, v)?;
    let ginv = inverse_flux(flux)?;
    let quad = engine.resolve(&|w| vec![ginv.g(v_range.0 + w), ginv.g(v_range.1 + w)])?;
    Ok((
        quad.mean(|w| ginv.g(v_range.0 + w)),
        quad.mean(|w| ginv.g(v_range.1 + w)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mode;

    fn sine() -> OscillatoryPotential {
        OscillatoryPotential::sine(1.0, 1.0)
    }

    fn flux1(f1: SmoothFn, extra: Vec<FluxComponent>) -> ScalarFlux {
        let mut c = vec![FluxComponent::monotone(f1)];
        c.extend(extra);
        ScalarFlux::new(c, Some(1.0), (-10.0, 10.0))
    }

    #[test]
    fn mean_value_examples() {
        let e = MeanValueEngine::new(sine(), 1e-13);
        assert!((mean_value(|w| w * w, &e).unwrap() - 0.5).abs() < 1e-14);
        let c = MeanValueEngine::new(OscillatoryPotential::constant(0.3), 1e-13);
        assert_eq!(mean_value(|_| 2.5, &c).unwrap(), 2.5);
        assert_eq!(mean_value(|_| 2.5, &e).unwrap(), 2.5);

        let w = 1.0 / (2.0 * std::f64::consts::PI);
        let qp = OscillatoryPotential::quasi_periodic(
            vec![
                Mode {
                    amplitude: 1.0,
                    frequency: w,
                    phase: 0.0,
                },
                Mode {
                    amplitude: 1.0,
                    frequency: 2f64.sqrt() * w,
                    phase: 0.0,
                },
            ],
            0.0,
        );
        let e = MeanValueEngine::new(qp, 1e-4);
        let (m, bracket) = e.mean_value(|w| w * w).unwrap();
        assert!((m - 1.0).abs() < 1e-4, "{m}");
        assert!(bracket < 1e-4);
    }

    #[test]
    fn fbar1_trivial_cases() {
        let e = MeanValueEngine::new(sine(), 1e-13);
        let cubic = flux1(SmoothFn::cubic(), vec![]);
        assert!(solve_fbar1(0.0, &cubic, &sine(), &e).unwrap().abs() < 1e-13);
        let id = flux1(SmoothFn::linear(1.0), vec![]);
        assert!((solve_fbar1(0.7, &id, &sine(), &e).unwrap() - 0.7).abs() < 1e-13);
        let zero = OscillatoryPotential::zero();
        let ez = MeanValueEngine::new(zero.clone(), 1e-13);
        let q = solve_fbar1(1.3, &cubic, &zero, &ez).unwrap();
        assert!((q - SmoothFn::cubic().eval(1.3)).abs() < 1e-12);
        assert!(matches!(
            solve_fbar1(f64::NAN, &cubic, &sine(), &e),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn fbar2_closed_form() {
        let e = MeanValueEngine::new(sine(), 1e-13);
        let fl = flux1(
            SmoothFn::linear(1.0),
            vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])],
        );
        let t = build_effective_flux(&fl, &sine(), &e, (-2.0, 2.0), 401).unwrap();
        for p in [-1.0, 0.0, 0.5, 1.0] {
            assert!((t.fbar_k(2, p).unwrap() - (p * p + 0.5) / 2.0).abs() < 1e-8);
            assert!((t.fbar1_prime(p).unwrap() - 1.0).abs() < 1e-13);
        }
        assert_eq!(t.crit_k[0].len(), 1);
        assert!(t.crit_k[0][0].abs() < 1e-10);
    }

    #[test]
    fn no_oscillation_recovers_original_flux() {
        let zero = OscillatoryPotential::zero();
        let e = MeanValueEngine::new(zero.clone(), 1e-13);
        let fl = flux1(
            SmoothFn::cubic(),
            vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])],
        );
        let t = build_effective_flux(&fl, &zero, &e, (-1.5, 1.5), 301).unwrap();
        for p in [-1.2, -0.3, 0.0, 0.77, 1.4] {
            assert!((t.fbar1(p).unwrap() - SmoothFn::cubic().eval(p)).abs() < 1e-10);
            assert!((t.fbar_k(2, p).unwrap() - 0.5 * p * p).abs() < 1e-10);
        }
    }

    #[test]
    fn cubic_table_invariants() {
        let e = MeanValueEngine::new(sine(), 1e-13);
        let fl = flux1(SmoothFn::cubic(), vec![]);
        let t = build_effective_flux(&fl, &sine(), &e, (-1.5, 1.5), 601).unwrap();
        assert!(t.fixed_point_residual <= 1e-10);
        assert!(t.inverse_residual <= 1e-10);
        assert!(t.fbar1.windows(2).all(|w| w[1] > w[0]));
        assert!(t.min_fbar1_prime() >= 1.0);
        let r = check_miraculous(&t, &fl, &sine(), &e, &[-0.5, 0.0, 0.5]).unwrap();
        assert!(r.sigma_residual < 1e-7 && r.h_residual < 1e-7, "{r:?}");
    }

    #[test]
    fn linear_flux_has_trivial_identities() {
        let e = MeanValueEngine::new(sine(), 1e-13);
        let fl = flux1(SmoothFn::linear(1.0), vec![]);
        let t = build_effective_flux(&fl, &sine(), &e, (-3.0, 3.0), 61).unwrap();
        let r = check_miraculous(&t, &fl, &sine(), &e, &[-1.0, 0.0, 2.0]).unwrap();
        assert!(r.sigma_residual < 1e-14 && r.h_residual < 1e-14);
    }
}
