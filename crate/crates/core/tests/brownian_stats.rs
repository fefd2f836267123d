use statrs::distribution::{ContinuousCDF, Normal};
use stochhom::brownian::{node_normal, sample_path};

#[test]
fn terminal_value_moments_over_many_streams() {
    let n = 100_000u64;
    let xs: Vec<f64> = (0..n)
        .map(|s| sample_path(1, s, 1.0, 0).unwrap().terminal())
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((var - 1.0).abs() < 0.015, "variance {var}");
}

#[test]
fn bridge_midpoint_variance() {
    let n = 100_000u64;
    let mut acc = 0.0;
    for s in 0..n {
        let p = sample_path(5, s, 1.0, 1).unwrap();
        let d = p.values()[1] - 0.5 * (p.values()[0] + p.values()[2]);
        acc += d * d;
    }
    let var = acc / n as f64;
    assert!((var - 0.25).abs() < 0.005, "midpoint variance {var}");
}

#[test]
fn normalized_increments_pass_kolmogorov_smirnov() {
    let p = sample_path(2024, 0, 3.0, 14).unwrap();
    let sd = p.dt().sqrt();
    let mut z: Vec<f64> = (0..10_000).map(|j| p.increment(j).unwrap() / sd).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    let n = z.len() as f64;
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    // asymptotic critical value at significance 0.01
    assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn node_draws_are_standard_normal() {
    let n = 50_000;
    let xs: Vec<f64> = (0..n).map(|k| node_normal(9, 0, 20, 2 * k + 1)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let m4 = xs.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.02);
    assert!((m4 - 3.0).abs() < 0.15, "fourth moment {m4}");
}
