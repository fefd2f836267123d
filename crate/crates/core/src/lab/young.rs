use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::fv::GridField;

/// Values of a field grouped by fast variable `y = (x_1/eps mod period)`,
/// histogrammed over a uniform xi-range.
#[derive(Debug, Clone, PartialEq)]
pub struct YoungMeasureHistogram {
    pub time: f64,
    pub epsilon: f64,
    pub period: f64,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// `[y_bin][xi_bin]`, each row summing to one.
    pub weights: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// Sample mean and (population) variance of the raw values per y-bin.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl YoungMeasureHistogram {
    /// Histogram with explicit weights; moments are taken from the xi-bin
    /// centers.
    pub fn from_weights(xi_lo: f64, xi_hi: f64, weights: Vec<Vec<f64>>) -> Result<Self> {
        if !(xi_hi > xi_lo)
            || weights
                .iter()
                .any(|w| w.is_empty() || w.len() != weights[0].len())
        {
            return Err(Error::MalformedSpec("bad histogram layout".into()));
        }
        let nb = weights.first().map_or(1, |w| w.len());
        let dxi = (xi_hi - xi_lo) / nb as f64;
        let center = |j: usize| xi_lo + (j as f64 + 0.5) * dxi;
        let mut mean = Vec::new();
        let mut variance = Vec::new();
        for w in &weights {
            let m: f64 = w.iter().enumerate().map(|(j, p)| p * center(j)).sum();
            let v: f64 = w
                .iter()
                .enumerate()
                .map(|(j, p)| p * (center(j) - m).powi(2))
                .sum();
            mean.push(m);
            variance.push(v);
        }
        Ok(Self {
            time: 0.0,
            epsilon: 1.0,
            period: 1.0,
            xi_lo,
            xi_hi,
            counts: vec![0; weights.len()],
            weights,
            mean,
            variance,
        })
    }

    pub fn y_bins(&self) -> usize {
        self.weights.len()
    }

    pub fn xi_bins(&self) -> usize {
        self.weights.first().map_or(0, |w| w.len())
    }

    pub fn xi_step(&self) -> f64 {
        (self.xi_hi - self.xi_lo) / self.xi_bins().max(1) as f64
    }

    pub fn is_valid(&self) -> bool {
        self.weights
            .iter()
            .all(|w| w.iter().all(|&p| p >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-12)
    }

    /// Average over y-bins of the per-bin variance.
    pub fn mean_variance(&self) -> f64 {
        self.variance.iter().sum::<f64>() / self.variance.len().max(1) as f64
    }

    /// Columns `y,xi,weight` with bin centers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "y,xi,weight")?;
        let ny = self.y_bins() as f64;
        for (b, row) in self.weights.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                let y = (b as f64 + 0.5) / ny * self.period;
                let xi = self.xi_lo + (j as f64 + 0.5) * self.xi_step();
                writeln!(out, "{y:.17e},{xi:.17e},{p:.17e}")?;
            }
        }
        Ok(())
    }
}

/// Histogram of `u` over `y_bins` fast-variable bins (along the first axis)
/// and `xi_bins` value bins spanning the range of `u`.
pub fn young_measure_estimate(
    u: &GridField,
    epsilon: f64,
    period: f64,
    y_bins: usize,
    xi_bins: usize,
) -> Result<YoungMeasureHistogram> {
    if y_bins == 0 || xi_bins == 0 || !(epsilon > 0.0) || !(period > 0.0) {
        return Err(Error::MalformedSpec(
            "young measure bins and scales must be positive".into(),
        ));
    }
    let g = u.grid;
    let per_period = period * epsilon / g.dx();
    if per_period < y_bins as f64 {
        return Err(Error::ResolutionTooCoarse(format!(
            "{per_period:.2} cells per period for {y_bins} y-bins"
        )));
    }
    let (mut lo, mut hi) = u.min_max();
    if hi - lo <= 1e-14 * lo.abs().max(1.0) {
        lo -= 0.5;
        hi += 0.5;
    }
    let dxi = (hi - lo) / xi_bins as f64;
    let mut weights = vec![vec![0.0; xi_bins]; y_bins];
    let mut counts = vec![0usize; y_bins];
    let mut sum = vec![0.0; y_bins];
    let mut sum_sq = vec![0.0; y_bins];
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); y_bins];
    for (idx, &v) in u.values.iter().enumerate() {
        let x = g.center(idx)[0];
        let y = (x / epsilon).rem_euclid(period) / period;
        let b = ((y * y_bins as f64) as usize).min(y_bins - 1);
        let j = (((v - lo) / dxi) as usize).min(xi_bins - 1);
        weights[b][j] += 1.0;
        counts[b] += 1;
        sum[b] += v;
        members[b].push(v);
    }
    let mut mean = vec![0.0; y_bins];
    let mut variance = vec![0.0; y_bins];
    for b in 0..y_bins {
        if counts[b] == 0 {
            continue;
        }
        let c = counts[b] as f64;
        mean[b] = sum[b] / c;
        for v in &members[b] {
            sum_sq[b] += (v - mean[b]).powi(2);
        }
        variance[b] = sum_sq[b] / c;
        for w in weights[b].iter_mut() {
            *w /= c;
        }
    }
    Ok(YoungMeasureHistogram {
        time: u.time,
        epsilon,
        period,
        xi_lo: lo,
        xi_hi: hi,
        weights,
        counts,
        mean,
        variance,
    })
}
