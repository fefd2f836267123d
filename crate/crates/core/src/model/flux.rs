use super::smooth::SmoothFn;
use crate::error::{Error, Result};

/// One flux component `f_k` with the declared zero set of `f_k'`.
///
/// The zero set is needed by the Godunov and Engquist–Osher fluxes, which
/// extremize or integrate `f_k` between two states.
#[derive(Debug, Clone)]
pub struct FluxComponent {
    pub func: SmoothFn,
    pub critical_points: Vec<f64>,
}

impl FluxComponent {
    pub fn new(func: SmoothFn, mut critical_points: Vec<f64>) -> Self {
        critical_points.sort_by(f64::total_cmp);
        Self {
            func,
            critical_points,
        }
    }

    /// Component with a monotone function (no interior extrema).
    pub fn monotone(func: SmoothFn) -> Self {
        Self::new(func, Vec::new())
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.func.eval(u)
    }

    #[inline]
    pub fn speed(&self, u: f64) -> f64 {
        self.func.d1(u)
    }
}

/// Flux vector `f = (f_1, ..., f_d)` and its evaluation range.
#[derive(Debug, Clone)]
pub struct ScalarFlux {
    pub components: Vec<FluxComponent>,
    /// Lower bound for `f_1'`; mandatory for the stiff-source problem.
    pub delta0: Option<f64>,
    pub range: (f64, f64),
}

impl ScalarFlux {
    pub fn new(components: Vec<FluxComponent>, delta0: Option<f64>, range: (f64, f64)) -> Self {
        Self {
            components,
            delta0,
            range,
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn f1(&self) -> &SmoothFn {
        &self.components[0].func
    }

    /// `samples + 1` equispaced points covering the evaluation range.
    pub fn sample_points(&self, samples: usize) -> Vec<f64> {
        let (lo, hi) = self.range;
        (0..=samples)
            .map(|j| lo + (hi - lo) * j as f64 / samples as f64)
            .collect()
    }

    pub fn check_range(&self) -> Result<()> {
        let (lo, hi) = self.range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::MalformedSpec(format!(
                "evaluation range [{lo}, {hi}] is empty"
            )));
        }
        if self.components.is_empty() {
            return Err(Error::MalformedSpec("flux has no components".into()));
        }
        Ok(())
    }

    /// Largest `|f_k'|` over `[lo, hi]`, sampled.
    pub fn max_speed(&self, k: usize, lo: f64, hi: f64) -> f64 {
        sampled_max(|u| self.components[k].speed(u).abs(), lo, hi)
    }
}

/// Maximum of `f` over a closed interval from 1025 equispaced samples.
pub(crate) fn sampled_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const N: usize = 1024;
    let mut m = f64::NEG_INFINITY;
    for j in 0..=N {
        let u = lo + (hi - lo) * j as f64 / N as f64;
        m = m.max(f(u));
    }
    m
}

/// Root of an increasing function on a bracket, Newton with bisection
/// safeguard. `f(lo) <= 0 <= f(hi)` is assumed.
pub(crate) fn solve_increasing(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    guess: f64,
) -> f64 {
    let mut x = if guess > lo && guess < hi {
        guess
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..200 {
        let r = f(x);
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - r / d;
        if !(next >= lo && next <= hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
            return next;
        }
        x = next;
        if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
            return x;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_bisection_finds_cubic_root() {
        let f = SmoothFn::cubic();
        let target = 11.0 / 6.0;
        let u = solve_increasing(|u| f.eval(u) - target, |u| f.d1(u), -10.0, 10.0, 0.0);
        assert!((f.eval(u) - target).abs() < 1e-14);
        // bisection oracle
        let (mut a, mut b) = (0.0_f64, 2.0_f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f.eval(m) < target {
                a = m
            } else {
                b = m
            }
        }
        assert!((u - a).abs() < 1e-13);
        assert!((u - 1.22323).abs() < 1e-5);
    }

    #[test]
    fn empty_range_is_malformed() {
        let fl = ScalarFlux::new(
            vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
            None,
            (1.0, 1.0),
        );
        assert!(matches!(fl.check_range(), Err(Error::MalformedSpec(_))));
    }
}
