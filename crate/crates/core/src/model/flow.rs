//! Pathwise noise flows.
//!
//! Both stochastic problems have a noise term of the form
//! `kappa0 * s(u) o dW` (Stratonovich), which is solved exactly by a change
//! of variable `u = g(xi)` with `g' = s(g)`: in the `xi` coordinate the noise
//! is additive. A [`FlowPrimitive`] is the pair `(g, g^{-1})`.

use std::fmt;
use std::sync::Arc;

use super::flux::solve_increasing;
use super::smooth::{RealFn, SmoothFn};
use crate::error::{Error, Result};
use crate::interp::Hermite;

/// Strictly increasing change of variable `u = forward(xi)`.
pub trait FlowPrimitive: Send + Sync + fmt::Debug {
    fn forward(&self, xi: f64) -> Result<f64>;
    fn inverse(&self, u: f64) -> Result<f64>;

    /// `forward(xi)` when a nearby value `guess` is known.
    fn forward_near(&self, xi: f64, guess: f64) -> Result<f64> {
        let _ = guess;
        self.forward(xi)
    }
}

/// `g` obtained by integrating `g' = sigma(g)`, `g(0) = 0`, with classical RK4
/// on a uniform `xi` grid, interpolated by cubic Hermite with the exact
/// slopes `sigma(g_j)`. The inverse is the exact inverse of the interpolant,
/// so `forward(inverse(u)) == u` up to rounding.
#[derive(Debug, Clone)]
pub struct TabulatedFlow {
    table: Hermite,
}

impl TabulatedFlow {
    pub const DEFAULT_STEP: f64 = 1.0 / 512.0;
    const MAX_NODES: usize = 4_000_000;

    /// Tabulates `g` until it leaves `u_range` on both sides.
    pub fn integrate(sigma: &SmoothFn, u_range: (f64, f64), step: f64) -> Result<Self> {
        let (u_lo, u_hi) = u_range;
        if !(u_lo < u_hi) || !(step > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "cannot tabulate flow on [{u_lo}, {u_hi}] with step {step}"
            )));
        }
        let s = |u: f64| sigma.eval(u);
        let rk4 = |g: f64, h: f64| {
            let k1 = s(g);
            let k2 = s(g + 0.5 * h * k1);
            let k3 = s(g + 0.5 * h * k2);
            let k4 = s(g + h * k3);
            g + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        };
        let march = |h: f64, stop: &dyn Fn(f64) -> bool| -> Result<Vec<f64>> {
            let mut out = vec![0.0];
            let mut g = 0.0;
            while !stop(g) {
                g = rk4(g, h);
                if !g.is_finite() || out.len() > Self::MAX_NODES {
                    return Err(Error::MalformedSpec(
                        "flow primitive does not cover the evaluation range (sigma too small?)"
                            .into(),
                    ));
                }
                out.push(g);
            }
            // one extra node so the range end is interior
            out.push(rk4(g, h));
            Ok(out)
        };
        let fwd = march(step, &|g| g >= u_hi)?;
        let bwd = march(-step, &|g| g <= u_lo)?;
        let nb = bwd.len() - 1;
        let mut values: Vec<f64> = bwd.into_iter().skip(1).rev().collect();
        values.extend(fwd);
        let slopes: Vec<f64> = values.iter().map(|&g| s(g)).collect();
        if slopes.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::MalformedSpec(
                "sigma must be positive along the flow".into(),
            ));
        }
        let x0 = -(nb as f64) * step;
        Ok(Self {
            table: Hermite::new_monotone(x0, step, values, slopes),
        })
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.table.x_min(), self.table.x_max())
    }

    pub fn u_range(&self) -> (f64, f64) {
        let v = self.table.values();
        (v[0], v[v.len() - 1])
    }

    /// `g'(xi)` of the interpolant.
    pub fn slope(&self, xi: f64) -> Result<f64> {
        let (lo, hi) = self.xi_range();
        if !self.table.contains(xi) {
            return Err(Error::RangeExceeded {
                what: "flow primitive g",
                value: xi,
                lo,
                hi,
            });
        }
        Ok(self.table.derivative(xi))
    }
}

impl FlowPrimitive for TabulatedFlow {
    fn forward(&self, xi: f64) -> Result<f64> {
        if !self.table.contains(xi) {
            let (lo, hi) = self.xi_range();
            return Err(Error::RangeExceeded {
                what: "flow primitive g",
                value: xi,
                lo,
                hi,
            });
        }
        Ok(self.table.eval(xi))
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        self.table.inverse(u).ok_or_else(|| {
            let (lo, hi) = self.u_range();
            Error::RangeExceeded {
                what: "inverse flow primitive",
                value: u,
                lo,
                hi,
            }
        })
    }
}

/// Flow primitive with `g` and `g^{-1}` in closed form.
#[derive(Debug, Clone, Copy)]
pub struct ExplicitFlow {
    pub name: &'static str,
    pub forward: fn(f64) -> f64,
    pub inverse: fn(f64) -> f64,
}

impl FlowPrimitive for ExplicitFlow {
    fn forward(&self, xi: f64) -> Result<f64> {
        let u = (self.forward)(xi);
        if !u.is_finite() {
            return Err(Error::RangeExceeded {
                what: "flow primitive g",
                value: xi,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
        Ok(u)
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        let xi = (self.inverse)(u);
        if !xi.is_finite() {
            return Err(Error::RangeExceeded {
                what: "inverse flow primitive",
                value: u,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
        Ok(xi)
    }
}

/// `g = f_1^{-1}` for an increasing flux with `f_1' >= delta0 > 0`.
/// The flow coordinate of `u` is `f_1(u)`.
#[derive(Debug, Clone)]
pub struct FluxInverseFlow {
    f1: SmoothFn,
    delta0: f64,
}

impl FluxInverseFlow {
    pub fn new(f1: SmoothFn, delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "delta0 must be positive, got {delta0}"
            )));
        }
        Ok(Self { f1, delta0 })
    }
}

impl FlowPrimitive for FluxInverseFlow {
    fn forward(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::RangeExceeded {
                what: "inverse flux g",
                value: z,
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
        let c = self.f1.eval(0.0);
        let reach = (z - c) / self.delta0;
        let (lo, hi) = if reach >= 0.0 {
            (0.0, reach)
        } else {
            (reach, 0.0)
        };
        let guess = (z - c) / self.f1.d1(0.0);
        Ok(solve_increasing(
            |u| self.f1.eval(u) - z,
            |u| self.f1.d1(u),
            lo,
            hi,
            guess,
        ))
    }

    fn inverse(&self, u: f64) -> Result<f64> {
        Ok(self.f1.eval(u))
    }

    fn forward_near(&self, z: f64, guess: f64) -> Result<f64> {
        if !z.is_finite() || !guess.is_finite() {
            return self.forward(z);
        }
        // f1' >= delta0 confines the root to guess +- |f1(guess) - z| / delta0
        let r = self.f1.eval(guess) - z;
        if r == 0.0 {
            return Ok(guess);
        }
        let reach = r.abs() / self.delta0;
        let (lo, hi) = if r > 0.0 {
            (guess - reach, guess)
        } else {
            (guess, guess + reach)
        };
        Ok(solve_increasing(
            |u| self.f1.eval(u) - z,
            |u| self.f1.d1(u),
            lo,
            hi,
            guess - r / self.f1.d1(guess),
        ))
    }
}

/// Noise structure of a problem: amplitude `sigma`, Itô drift `h`, the flow
/// primitive that integrates them exactly, and the strength `kappa0`.
#[derive(Debug, Clone)]
pub struct StochasticFlowModel {
    pub sigma: SmoothFn,
    pub h: SmoothFn,
    pub flow: Arc<dyn FlowPrimitive>,
    pub kappa0: f64,
}

impl StochasticFlowModel {
    /// Noise for the transport problem: `sigma` and a declared `h`
    /// (which should equal `sigma' sigma`; see validation). `u_range` is the
    /// range the tabulated flow must cover.
    pub fn transport(
        sigma: SmoothFn,
        h: SmoothFn,
        kappa0: f64,
        u_range: (f64, f64),
        step: f64,
    ) -> Result<Self> {
        let flow = TabulatedFlow::integrate(&sigma, u_range, step)?;
        Ok(Self {
            sigma,
            h,
            flow: Arc::new(flow),
            kappa0,
        })
    }

    /// Additive noise: `sigma = 1`, `h = 0`, `g = id`.
    pub fn additive(kappa0: f64) -> Self {
        let flow = ExplicitFlow {
            name: "identity",
            forward: |xi| xi,
            inverse: |u| u,
        };
        Self::with_flow(
            SmoothFn::constant(1.0),
            SmoothFn::constant(0.0),
            Arc::new(flow),
            kappa0,
        )
    }

    /// `sigma = sqrt(1 + u^2)`, `h = u`, `g = sinh`.
    pub fn sinh(kappa0: f64) -> Self {
        let flow = ExplicitFlow {
            name: "sinh",
            forward: f64::sinh,
            inverse: f64::asinh,
        };
        Self::with_flow(
            SmoothFn::sqrt_one_plus_sq(),
            SmoothFn::linear(1.0),
            Arc::new(flow),
            kappa0,
        )
    }

    /// Noise for the stiff-source problem, derived from `f_1`:
    /// `sigma = 1/f_1'`, `h = -f_1''/f_1'^3`, flow primitive `f_1^{-1}`.
    pub fn from_flux(f1: &SmoothFn, delta0: f64, kappa0: f64) -> Result<Self> {
        let (sigma, h) = noise_from_flux(f1);
        Ok(Self {
            sigma,
            h,
            flow: Arc::new(FluxInverseFlow::new(f1.clone(), delta0)?),
            kappa0,
        })
    }

    pub fn with_flow(
        sigma: SmoothFn,
        h: SmoothFn,
        flow: Arc<dyn FlowPrimitive>,
        kappa0: f64,
    ) -> Self {
        Self {
            sigma,
            h,
            flow,
            kappa0,
        }
    }
}

/// `sigma_{f1} = 1/f1'` and `h_{f1} = -f1''/f1'^3`, each with one derivative.
pub fn noise_from_flux(f1: &SmoothFn) -> (SmoothFn, SmoothFn) {
    let a = f1.clone();
    let b = f1.clone();
    let sigma_v: RealFn = Arc::new(move |u| 1.0 / a.d1(u));
    let sigma_d: RealFn = Arc::new(move |u| -b.d2(u) / (b.d1(u) * b.d1(u)));
    let c = f1.clone();
    let d = f1.clone();
    let h_v: RealFn = Arc::new(move |u| -c.d2(u) / c.d1(u).powi(3));
    let h_d: RealFn = Arc::new(move |u| {
        let (p1, p2, p3) = (d.d1(u), d.d2(u), d.d3(u));
        -(p3 * p1 - 3.0 * p2 * p2) / p1.powi(4)
    });
    (
        SmoothFn::new(format!("sigma[{}]", f1.name()), vec![sigma_v, sigma_d]),
        SmoothFn::new(format!("h[{}]", f1.name()), vec![h_v, h_d]),
    )
}

/// Exact solution map of `du = kappa0 sigma(u) dW + kappa0^2/2 h(u) dt` over
/// an increment `delta = kappa0 * dW`: `u -> g(g^{-1}(u) + delta)`.
pub fn noise_flow(u: f64, delta: f64, model: &StochasticFlowModel) -> Result<f64> {
    if delta == 0.0 {
        return Ok(u);
    }
    model.flow.forward(model.flow.inverse(u)? + delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sinh_model() -> StochasticFlowModel {
        StochasticFlowModel::transport(
            SmoothFn::sqrt_one_plus_sq(),
            SmoothFn::linear(1.0),
            1.0,
            (-200.0, 200.0),
            TabulatedFlow::DEFAULT_STEP,
        )
        .unwrap()
    }

    #[test]
    fn explicit_flows_match_tabulated() {
        let tab = sinh_model();
        let exp = StochasticFlowModel::sinh(1.0);
        for u in [-20.0, -1.0, 0.0, 0.4, 7.5] {
            for d in [-2.0, 0.3, 1.1] {
                let a = noise_flow(u, d, &tab).unwrap();
                let b = noise_flow(u, d, &exp).unwrap();
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{u} {d}");
            }
        }
        let add = StochasticFlowModel::additive(0.5);
        assert_eq!(noise_flow(0.25, 0.5, &add).unwrap(), 0.75);
        assert!(exp.flow.forward(1e6).is_err());
    }

    /// Euler on du/dxi = sigma(u), the deterministic-increment version of
    /// du = sigma(u) o dW.
    fn euler_oracle(sigma: impl Fn(f64) -> f64, u0: f64, delta: f64, h: f64) -> f64 {
        let n = (delta.abs() / h).round() as usize;
        let dh = delta / n as f64;
        let mut u = u0;
        for _ in 0..n {
            u += dh * sigma(u);
        }
        u
    }

    #[test]
    fn tabulated_sinh_matches_euler_oracle() {
        let m = sinh_model();
        let oracle = euler_oracle(|u| (1.0 + u * u).sqrt(), 0.0, 1.0, 1e-5);
        assert!((oracle - 1.17520).abs() < 1e-4);
        let g1 = noise_flow(0.0, 1.0, &m).unwrap();
        assert!((g1 - oracle).abs() < 1e-4);
        assert!((g1 - 1.0_f64.sinh()).abs() < 1e-11);
    }

    #[test]
    fn identity_flow_for_unit_sigma() {
        let m = StochasticFlowModel::transport(
            SmoothFn::constant(1.0),
            SmoothFn::constant(0.0),
            1.0,
            (-3.0, 3.0),
            TabulatedFlow::DEFAULT_STEP,
        )
        .unwrap();
        assert!((m.flow.forward(0.5).unwrap() - 0.5).abs() < 1e-13);
        assert_eq!(noise_flow(0.7, 0.0, &m).unwrap(), 0.7);
    }

    #[test]
    fn additive_shift_for_linear_flux() {
        let m = StochasticFlowModel::from_flux(&SmoothFn::linear(1.0), 1.0, 1.0).unwrap();
        assert_eq!(noise_flow(2.0, -0.5, &m).unwrap(), 1.5);
    }

    #[test]
    fn range_exceeded_outside_table() {
        let m = sinh_model();
        let err = noise_flow(0.0, 50.0, &m).unwrap_err();
        assert!(matches!(err, Error::RangeExceeded { .. }));
    }

    #[test]
    fn derived_noise_coefficients() {
        let f1 = SmoothFn::cubic();
        let (s, h) = noise_from_flux(&f1);
        for u in [-1.3, 0.0, 0.8] {
            assert!((s.eval(u) - 1.0 / (1.0 + u * u)).abs() < 1e-15);
            assert!((h.eval(u) + 2.0 * u / (1.0 + u * u).powi(3)).abs() < 1e-15);
            let fd = (h.eval(u + 1e-6) - h.eval(u - 1e-6)) / 2e-6;
            assert!((fd - h.d1(u)).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn semigroup_and_order(u in -3.0f64..3.0, v in -3.0f64..3.0, a in -1.5f64..1.5, b in -1.5f64..1.5) {
            for m in [sinh_model(), StochasticFlowModel::from_flux(&SmoothFn::cubic(), 1.0, 0.7).unwrap()] {
                let two = noise_flow(noise_flow(u, a, &m).unwrap(), b, &m).unwrap();
                let one = noise_flow(u, a + b, &m).unwrap();
                prop_assert!((two - one).abs() <= 1e-12 * one.abs().max(1.0));
                let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
                prop_assert!(noise_flow(lo, a, &m).unwrap() <= noise_flow(hi, a, &m).unwrap());
            }
        }
    }
}
