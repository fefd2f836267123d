use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    /// Rational frequency ratios with fundamental period `period`.
    Periodic {
        period: f64,
    },
    QuasiPeriodic,
}

/// `V(z) = offset + sum_j A_j sin(2 pi lambda_j z + phi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatoryPotential {
    pub modes: Vec<Mode>,
    pub offset: f64,
    pub kind: PotentialKind,
}

impl OscillatoryPotential {
    pub fn zero() -> Self {
        Self {
            modes: Vec::new(),
            offset: 0.0,
            kind: PotentialKind::Periodic { period: 1.0 },
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            offset: c,
            ..Self::zero()
        }
    }

    /// `amplitude * sin(2 pi z / period)`.
    pub fn sine(amplitude: f64, period: f64) -> Self {
        Self {
            modes: vec![Mode {
                amplitude,
                frequency: 1.0 / period,
                phase: 0.0,
            }],
            offset: 0.0,
            kind: PotentialKind::Periodic { period },
        }
    }

    pub fn periodic(modes: Vec<Mode>, offset: f64, period: f64) -> Self {
        Self {
            modes,
            offset,
            kind: PotentialKind::Periodic { period },
        }
    }

    pub fn quasi_periodic(modes: Vec<Mode>, offset: f64) -> Self {
        Self {
            modes,
            offset,
            kind: PotentialKind::QuasiPeriodic,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .map(|m| m.amplitude * (2.0 * PI * m.frequency * z + m.phase).sin())
                .sum::<f64>()
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let w = 2.0 * PI * m.frequency;
                m.amplitude * w * (w * z + m.phase).cos()
            })
            .sum()
    }

    /// Mean value `M(V)`; zero-frequency modes are constants.
    pub fn mean(&self) -> f64 {
        self.offset
            + self
                .modes
                .iter()
                .filter(|m| m.frequency == 0.0)
                .map(|m| m.amplitude * m.phase.sin())
                .sum::<f64>()
    }

    pub fn amplitude_sum(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude.abs()).sum()
    }

    /// Bounds `offset -/+ sum |A_j|` enclosing the range of `V`.
    pub fn bounds(&self) -> (f64, f64) {
        let a = self.amplitude_sum();
        (self.offset - a, self.offset + a)
    }

    pub fn is_zero(&self) -> bool {
        self.offset == 0.0 && self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.modes
            .iter()
            .all(|m| m.amplitude == 0.0 || m.frequency == 0.0)
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Periodic { period } => Some(period),
            PotentialKind::QuasiPeriodic => None,
        }
    }

    /// Worst `|V(z + P) - V(z)|` over sampled `z`, for the periodic kind.
    pub fn periodicity_defect(&self) -> Option<f64> {
        let p = self.period()?;
        let mut worst: f64 = 0.0;
        for k in 0..1000 {
            let z = -7.3 + 0.0173 * k as f64;
            worst = worst.max((self.value(z + p) - self.value(z)).abs());
        }
        Some(worst)
    }
}

pub type VectorFieldFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Divergence-free fast-scale velocity `a(y)`.
#[derive(Clone)]
pub enum VelocityField {
    Constant(Vec<f64>),
    /// `a(y) = (c1, b(y_1))` in two dimensions.
    Shear {
        c1: f64,
        b: OscillatoryPotential,
    },
    /// Any other field; accepted by the fine-scale solver only. Its
    /// projection on flow-invariant functions is not computable, so
    /// homogenized family solves reject it.
    General {
        dim: usize,
        field: VectorFieldFn,
    },
}

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::Shear { c1, b } => f
                .debug_struct("Shear")
                .field("c1", c1)
                .field("b", b)
                .finish(),
            Self::General { dim, .. } => f.debug_struct("General").field("dim", dim).finish(),
        }
    }
}

impl VelocityField {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(c) => c.len(),
            Self::Shear { .. } => 2,
            Self::General { dim, .. } => *dim,
        }
    }

    /// Component `k` of `a(y)`.
    pub fn component(&self, k: usize, y: &[f64]) -> f64 {
        match self {
            Self::Constant(c) => c[k],
            Self::Shear { c1, b } => {
                if k == 0 {
                    *c1
                } else {
                    b.value(y[0])
                }
            }
            Self::General { field, .. } => field(y)[k],
        }
    }

    pub fn max_abs_component(&self, k: usize) -> f64 {
        match self {
            Self::Constant(c) => c[k].abs(),
            Self::Shear { c1, b } => {
                if k == 0 {
                    c1.abs()
                } else {
                    let (lo, hi) = b.bounds();
                    lo.abs().max(hi.abs())
                }
            }
            Self::General { field, dim } => {
                // sampled over a unit cell
                let mut m: f64 = 0.0;
                let n = 64;
                for i in 0..n {
                    for j in 0..if *dim > 1 { n } else { 1 } {
                        let y = [i as f64 / n as f64, j as f64 / n as f64];
                        m = m.max(field(&y[..*dim])[k].abs());
                    }
                }
                m * 1.05
            }
        }
    }

    /// Projection of `a` onto functions invariant along its own flow, for
    /// the families where it is known in closed form: `a` itself.
    pub fn projected(&self) -> Result<VelocityField> {
        match self {
            Self::Constant(_) => Ok(self.clone()),
            Self::Shear { c1, b } => {
                if *c1 != 0.0 && !b.is_constant() {
                    return Err(Error::UnsupportedVelocityFamily(format!(
                        "shear with cross component c1 = {c1} mixes y1; projection unknown"
                    )));
                }
                Ok(self.clone())
            }
            Self::General { .. } => Err(Error::UnsupportedVelocityFamily(
                "only constant and shear velocity fields are admitted".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_potential_basics() {
        let v = OscillatoryPotential::sine(1.0, 1.0);
        assert!((v.value(0.25) - 1.0).abs() < 1e-15);
        assert_eq!(v.mean(), 0.0);
        assert!(v.periodicity_defect().unwrap() < 1e-12);
        for k in 0..100 {
            let z = -3.0 + 0.061 * k as f64;
            assert!(v.value(z).abs() <= v.amplitude_sum() + 1e-15);
            let fd = (v.value(z + 1e-6) - v.value(z - 1e-6)) / 2e-6;
            assert!((fd - v.derivative(z)).abs() < 1e-6);
        }
    }

    #[test]
    fn quasi_periodic_has_no_period() {
        let w = 1.0 / (2.0 * PI);
        let v = OscillatoryPotential::quasi_periodic(
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
        assert!(v.periodicity_defect().is_none());
        assert!((v.value(1.0) - (1f64.sin() + 2f64.sqrt().sin())).abs() < 1e-14);
    }

    #[test]
    fn shear_projection_rules() {
        let b = OscillatoryPotential::sine(0.5, 1.0).with_offset(1.0);
        let ok = VelocityField::Shear {
            c1: 0.0,
            b: b.clone(),
        };
        assert!(ok.projected().is_ok());
        assert!((ok.component(1, &[0.25, 0.0]) - 1.5).abs() < 1e-15);
        let mixed = VelocityField::Shear { c1: 1.0, b };
        assert!(matches!(
            mixed.projected(),
            Err(Error::UnsupportedVelocityFamily(_))
        ));
        let general = VelocityField::General {
            dim: 2,
            field: Arc::new(|y: &[f64]| vec![(2.0 * PI * y[1]).sin(), (2.0 * PI * y[0]).sin()]),
        };
        assert!(matches!(
            general.projected(),
            Err(Error::UnsupportedVelocityFamily(_))
        ));
    }
}
