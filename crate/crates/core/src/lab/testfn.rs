use crate::error::{Error, Result};
use crate::fv::GridField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowKind {
    /// `exp(1 - 1/(1 - r^2))` on `|r| < 1`.
    Bump,
    /// `cos^2(pi r / 2)` on `|r| < 1`.
    Hann,
}

impl WindowKind {
    fn eval(self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Bump => (1.0 - 1.0 / (1.0 - r * r)).exp(),
            Self::Hann => (0.5 * std::f64::consts::PI * r).cos().powi(2),
        }
    }

    fn derivative(self, r: f64) -> f64 {
        if r.abs() >= 1.0 {
            return 0.0;
        }
        match self {
            Self::Bump => {
                let s = 1.0 - r * r;
                (1.0 - 1.0 / s).exp() * (-2.0 * r / (s * s))
            }
            Self::Hann => -0.5 * std::f64::consts::PI * (std::f64::consts::PI * r).sin(),
        }
    }
}

/// Product window `scale * prod_k phi((x_k - c_k) / h_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub kind: WindowKind,
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
    pub scale: f64,
}

impl TestFunction {
    pub fn new(kind: WindowKind, center: Vec<f64>, half_width: Vec<f64>) -> Result<Self> {
        if center.len() != half_width.len() || center.is_empty() || center.len() > 2 {
            return Err(Error::UnsupportedTestFunction(format!(
                "center of dimension {} with {} half widths",
                center.len(),
                half_width.len()
            )));
        }
        if half_width.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::UnsupportedTestFunction(
                "half widths must be positive".into(),
            ));
        }
        Ok(Self {
            kind,
            center,
            half_width,
            scale: 1.0,
        })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            kind: WindowKind::Bump,
            center: vec![0.0; dim],
            half_width: vec![1.0; dim],
            scale: 0.0,
        }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.scale == 0.0 {
            return 0.0;
        }
        let mut v = self.scale;
        for k in 0..self.dim() {
            v *= self.kind.eval((x[k] - self.center[k]) / self.half_width[k]);
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let r: Vec<f64> = (0..d)
            .map(|k| (x[k] - self.center[k]) / self.half_width[k])
            .collect();
        (0..d)
            .map(|k| {
                let mut g = self.scale * self.kind.derivative(r[k]) / self.half_width[k];
                for (j, rj) in r.iter().enumerate() {
                    if j != k {
                        g *= self.kind.eval(*rj);
                    }
                }
                g
            })
            .collect()
    }

    /// Support contained in the box `[-l, l]^d`.
    pub fn fits(&self, half_width: f64) -> bool {
        self.center
            .iter()
            .zip(&self.half_width)
            .all(|(c, h)| c - h >= -half_width - 1e-12 && c + h <= half_width + 1e-12)
    }
}

/// Bumps and Hann windows centered at `0`, `-l/4` and `3l/8` with half
/// widths `l/2` and `l/4`. Centers and widths sit on the `l/8` lattice.
pub fn default_test_functions(dim: usize, l: f64) -> Vec<TestFunction> {
    let mut out = Vec::new();
    for kind in [WindowKind::Bump, WindowKind::Hann] {
        for (c, h) in [(0.0, 0.5 * l), (-0.25 * l, 0.25 * l), (0.375 * l, 0.25 * l)] {
            let center = vec![c; dim];
            let hw = vec![h; dim];
            out.push(TestFunction::new(kind, center, hw).expect("valid window"));
        }
    }
    out
}

/// `|sum_i (u_i - ubar_i) phi(x_i) dx^d|` for every `phi`.
pub fn weak_star_error(
    u_eps: &GridField,
    u_bar: &GridField,
    phis: &[TestFunction],
) -> Result<Vec<f64>> {
    u_eps.check_same_grid(u_bar)?;
    let g = u_eps.grid;
    let vol = g.cell_volume();
    phis.iter()
        .map(|phi| {
            if phi.dim() != g.dim {
                return Err(Error::UnsupportedTestFunction(format!(
                    "test function of dimension {} on a {}-d grid",
                    phi.dim(),
                    g.dim
                )));
            }
            let mut s = 0.0;
            for (i, (a, b)) in u_eps.values.iter().zip(&u_bar.values).enumerate() {
                let w = phi.eval(&g.center(i)[..g.dim]);
                if w != 0.0 {
                    s += (a - b) * w;
                }
            }
            Ok((s * vol).abs())
        })
        .collect()
}
