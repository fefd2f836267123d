//! Piecewise cubic Hermite interpolation on uniform grids.
//!
//! Nodes carry values and slopes. When the tabulated function is increasing
//! the slopes are limited (Fritsch–Carlson) so the interpolant stays
//! monotone and can be inverted exactly by a safeguarded Newton iteration.

/// Cubic Hermite interpolant on a uniform grid `x0 + j*h`.
#[derive(Debug, Clone)]
pub struct Hermite {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Node positions of a uniform partition of the value range, so that
    /// `inverse` searches a short window instead of the whole table.
    buckets: Vec<u32>,
}

impl Hermite {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, slopes: Vec<f64>) -> Self {
        assert!(values.len() >= 2 && values.len() == slopes.len());
        assert!(h > 0.0);
        Self {
            x0,
            h,
            values,
            slopes,
            buckets: Vec::new(),
        }
    }

    /// Same as [`Hermite::new`] but clamps slopes so that an increasing data
    /// set yields an increasing interpolant.
    pub fn new_monotone(x0: f64, h: f64, values: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        for j in 0..values.len() - 1 {
            let secant = (values[j + 1] - values[j]) / h;
            if secant <= 0.0 {
                slopes[j] = 0.0;
                slopes[j + 1] = 0.0;
                continue;
            }
            let a = slopes[j] / secant;
            let b = slopes[j + 1] / secant;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                slopes[j] = tau * a * secant;
                slopes[j + 1] = tau * b * secant;
            }
        }
        let mut out = Self::new(x0, h, values, slopes);
        out.buckets = bucket_index(&out.values);
        out
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    pub fn nodes(&self) -> usize {
        self.values.len()
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x0 + self.h * j as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min() && x <= self.x_max()
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.x0) / self.h;
        let last = self.values.len() - 2;
        let j = (s.floor().max(0.0) as usize).min(last);
        (j, s - j as f64)
    }

    /// Value at `x`; callers check [`Hermite::contains`] first.
    pub fn eval(&self, x: f64) -> f64 {
        let (j, t) = self.locate(x);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.h, self.slopes[j + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (j, t) = self.locate(x);
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.h, self.slopes[j + 1] * self.h);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * m1)
            / self.h
    }

    /// Inverse of an increasing interpolant: the `x` with `eval(x) == y`.
    /// Returns `None` when `y` lies outside the tabulated range.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let vals = &self.values;
        if !(y >= vals[0] && y <= vals[vals.len() - 1]) {
            return None;
        }
        // first node with value > y
        let k = if self.buckets.len() > 2 {
            let m = self.buckets.len() - 1;
            let (v0, vn) = (vals[0], vals[vals.len() - 1]);
            let b = ((y - v0) / (vn - v0) * m as f64) as usize;
            let lo = self.buckets[b.saturating_sub(1).min(m)] as usize;
            let hi = self.buckets[(b + 2).min(m)] as usize;
            lo + vals[lo..hi].partition_point(|&v| v <= y)
        } else {
            vals.partition_point(|&v| v <= y)
        };
        let j = k.saturating_sub(1).min(vals.len() - 2);
        let mut lo = self.node(j);
        let mut hi = self.node(j + 1);
        let (flo, fhi) = (vals[j], vals[j + 1]);
        if y == flo {
            return Some(lo);
        }
        if y == fhi {
            return Some(hi);
        }
        let mut x = lo + (y - flo) / (fhi - flo) * self.h;
        for _ in 0..100 {
            let r = self.eval(x) - y;
            if r == 0.0 {
                return Some(x);
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.derivative(x);
            let mut next = if d > 0.0 { x - r / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let tol = 4.0 * f64::EPSILON * x.abs().max(1.0);
            if (next - x).abs() <= tol || hi - lo <= tol {
                return Some(next);
            }
            x = next;
        }
        Some(x)
    }
}

fn bucket_index(values: &[f64]) -> Vec<u32> {
    let n = values.len();
    let (v0, vn) = (values[0], values[n - 1]);
    if !(vn > v0) || values.windows(2).any(|w| w[1] < w[0]) {
        return Vec::new();
    }
    let m = n;
    (0..=m)
        .map(|b| {
            if b == m {
                return n as u32;
            }
            let edge = v0 + (vn - v0) * b as f64 / m as f64;
            values.partition_point(|&v| v <= edge) as u32
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let f = |x: f64| x * x * x - 2.0 * x + 1.0;
        let df = |x: f64| 3.0 * x * x - 2.0;
        let n = 11;
        let h = 0.3;
        let xs: Vec<f64> = (0..n).map(|j| -1.5 + h * j as f64).collect();
        let it = Hermite::new(
            -1.5,
            h,
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| df(x)).collect(),
        );
        for k in 0..200 {
            let x = -1.5 + 3.0 * k as f64 / 199.0;
            assert!((it.eval(x) - f(x)).abs() < 1e-12);
            assert!((it.derivative(x) - df(x)).abs() < 1e-11);
        }
    }

    #[test]
    fn inverse_roundtrip_on_increasing_data() {
        let h = 0.01;
        let xs: Vec<f64> = (0..401).map(|j| -2.0 + h * j as f64).collect();
        let it = Hermite::new_monotone(
            -2.0,
            h,
            xs.iter().map(|x| x.sinh()).collect(),
            xs.iter().map(|x| x.cosh()).collect(),
        );
        for k in 0..97 {
            let x = -1.99 + 3.98 * k as f64 / 96.0;
            let y = it.eval(x);
            let back = it.inverse(y).unwrap();
            assert!((back - x).abs() < 1e-13, "{x} {back}");
        }
        assert!(it.inverse(10.0).is_none());
    }

    #[test]
    fn monotone_limiter_keeps_order() {
        // steep step data that an unlimited Hermite would overshoot
        let vals = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let slopes = vec![0.0, 0.0, 5.0, 5.0, 0.0, 0.0];
        let it = Hermite::new_monotone(0.0, 1.0, vals, slopes);
        let mut prev = -1.0;
        for k in 0..=500 {
            let v = it.eval(5.0 * k as f64 / 500.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }
}
