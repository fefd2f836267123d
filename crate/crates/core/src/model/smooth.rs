use std::fmt;
use std::sync::Arc;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function together with its first few derivatives.
///
/// Coefficients are user-supplied callables, so derivatives are supplied by
/// hand rather than computed symbolically. `derivs[0]` is the function itself.
#[derive(Clone)]
pub struct SmoothFn {
    name: String,
    derivs: Vec<RealFn>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SmoothFn({}, {} derivs)",
            self.name,
            self.derivs.len() - 1
        )
    }
}

impl SmoothFn {
    pub fn new(name: impl Into<String>, derivs: Vec<RealFn>) -> Self {
        assert!(!derivs.is_empty(), "SmoothFn needs at least the value");
        Self {
            name: name.into(),
            derivs,
        }
    }

    pub fn from_closures<F, D1, D2, D3>(name: &str, f: F, d1: D1, d2: D2, d3: D3) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D1: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        D3: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            name,
            vec![Arc::new(f), Arc::new(d1), Arc::new(d2), Arc::new(d3)],
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.derivs.len() - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.derivs[0])(x)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        self.deriv(1, x)
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        self.deriv(2, x)
    }

    #[inline]
    pub fn d3(&self, x: f64) -> f64 {
        self.deriv(3, x)
    }

    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        match self.derivs.get(k) {
            Some(d) => d(x),
            None => panic!("{}: derivative of order {k} not supplied", self.name),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_closures(
            &format!("const({c})"),
            move |_| c,
            |_| 0.0,
            |_| 0.0,
            |_| 0.0,
        )
    }

    /// `c * u`
    pub fn linear(c: f64) -> Self {
        Self::from_closures(
            &format!("linear({c})"),
            move |u| c * u,
            move |_| c,
            |_| 0.0,
            |_| 0.0,
        )
    }

    /// `u^2 / 2`
    pub fn burgers() -> Self {
        Self::from_closures("burgers", |u| 0.5 * u * u, |u| u, |_| 1.0, |_| 0.0)
    }

    /// `u + u^3 / 3`
    pub fn cubic() -> Self {
        Self::from_closures(
            "cubic",
            |u| u + u * u * u / 3.0,
            |u| 1.0 + u * u,
            |u| 2.0 * u,
            |_| 2.0,
        )
    }

    /// `sqrt(1 + u^2)`; its flow primitive is `sinh`.
    pub fn sqrt_one_plus_sq() -> Self {
        Self::from_closures(
            "sqrt1pu2",
            |u| (1.0 + u * u).sqrt(),
            |u| u / (1.0 + u * u).sqrt(),
            |u| (1.0 + u * u).powf(-1.5),
            |u| -3.0 * u * (1.0 + u * u).powf(-2.5),
        )
    }

    /// `a * sin(2 pi k u)`
    pub fn sine(amplitude: f64, k: f64) -> Self {
        let w = 2.0 * std::f64::consts::PI * k;
        Self::from_closures(
            &format!("sine({amplitude},{k})"),
            move |u| amplitude * (w * u).sin(),
            move |u| amplitude * w * (w * u).cos(),
            move |u| -amplitude * w * w * (w * u).sin(),
            move |u| -amplitude * w * w * w * (w * u).cos(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivs(f: &SmoothFn, xs: &[f64]) {
        let h = 1e-5;
        for &x in xs {
            for k in 0..f.order() {
                let fd = (f.deriv(k, x + h) - f.deriv(k, x - h)) / (2.0 * h);
                let an = f.deriv(k + 1, x);
                assert!(
                    (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                    "{} order {k} at {x}: fd {fd} vs {an}",
                    f.name()
                );
            }
        }
    }

    #[test]
    fn builtin_derivatives_match_finite_differences() {
        let xs = [-1.7, -0.3, 0.0, 0.4, 2.2];
        for f in [
            SmoothFn::linear(1.5),
            SmoothFn::burgers(),
            SmoothFn::cubic(),
            SmoothFn::sqrt_one_plus_sq(),
            SmoothFn::sine(0.5, 1.0),
        ] {
            check_derivs(&f, &xs);
        }
    }
}
