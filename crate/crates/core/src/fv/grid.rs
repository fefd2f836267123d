use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::{BoundaryMode, ProblemSpec};

/// Uniform grid of `n^dim` cells on `[-L, L)^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) || n < 2 || !(half_width > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "grid needs dim in {{1, 2}}, n >= 2 and L > 0 (got {dim}, {n}, {half_width})"
            )));
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Center coordinate of cell `i` along one axis.
    #[inline]
    pub fn center_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.dx()
    }

    /// Coordinate of face `j` (between cells `j - 1` and `j`).
    #[inline]
    pub fn face_coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Center of the cell with flat index `idx`; storage is `i2 * n + i1`.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let i1 = idx % self.n;
        let i2 = idx / self.n;
        [
            self.center_coord(i1),
            if self.dim > 1 {
                self.center_coord(i2)
            } else {
                0.0
            },
        ]
    }

    /// Flat index of the `i`-th cell on line `line` along `axis`.
    #[inline]
    pub fn line_index(&self, axis: usize, line: usize, i: usize) -> usize {
        if axis == 0 {
            line * self.n + i
        } else {
            i * self.n + line
        }
    }

    pub fn lines(&self) -> usize {
        self.cells() / self.n
    }
}

/// Cell averages on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub boundary: BoundaryMode,
    pub time: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_fn(grid: Grid, boundary: BoundaryMode, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cells())
            .map(|idx| {
                let c = grid.center(idx);
                f(&c[..grid.dim])
            })
            .collect();
        Self {
            grid,
            boundary,
            time: 0.0,
            values,
        }
    }

    pub fn try_from_fn(
        grid: Grid,
        boundary: BoundaryMode,
        f: impl Fn(&[f64]) -> Result<f64>,
    ) -> Result<Self> {
        let values = (0..grid.cells())
            .map(|idx| {
                let c = grid.center(idx);
                f(&c[..grid.dim])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            boundary,
            time: 0.0,
            values,
        })
    }

    pub fn constant(grid: Grid, boundary: BoundaryMode, c: f64) -> Self {
        Self::from_fn(grid, boundary, |_| c)
    }

    /// Fine-scale initial data of a problem sampled at cell centers.
    pub fn initial(spec: &ProblemSpec, n: usize) -> Result<Self> {
        let grid = Grid::new(spec.domain.dim, n, spec.domain.half_width)?;
        Self::try_from_fn(grid, spec.domain.boundary, |x| spec.initial_value(x))
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            })
    }

    pub fn check_same_grid(&self, other: &GridField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        if (self.time - other.time).abs() > 1e-12 * self.time.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "fields at different times {} and {}",
                self.time, other.time
            )));
        }
        Ok(())
    }

    /// `sum_i |u_i - v_i| w(x_i) dx^d`.
    pub fn weighted_l1_distance(
        &self,
        other: &GridField,
        w: impl Fn(&[f64]) -> f64,
    ) -> Result<f64> {
        self.check_same_grid(other)?;
        let mut acc = 0.0;
        for (idx, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let c = self.grid.center(idx);
            acc += (a - b).abs() * w(&c[..self.grid.dim]);
        }
        Ok(acc * self.grid.cell_volume())
    }

    pub fn l1_distance(&self, other: &GridField) -> Result<f64> {
        self.weighted_l1_distance(other, |_| 1.0)
    }

    pub fn max_abs_diff(&self, other: &GridField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Columns `x[,y],u`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        if self.grid.dim == 1 {
            writeln!(out, "x,u")?;
        } else {
            writeln!(out, "x,y,u")?;
        }
        for (idx, v) in self.values.iter().enumerate() {
            let c = self.grid.center(idx);
            if self.grid.dim == 1 {
                writeln!(out, "{:.17e},{:.17e}", c[0], v)?;
            } else {
                writeln!(out, "{:.17e},{:.17e},{:.17e}", c[0], c[1], v)?;
            }
        }
        Ok(())
    }
}
