use std::sync::Arc;

use proptest::prelude::*;
use stochhom::brownian::sample_path;
use stochhom::fv::*;
use stochhom::kinetic::*;
use stochhom::lab::{young_measure_estimate, YoungMeasureHistogram};
use stochhom::model::*;
use stochhom::Error;

fn unit_noise(kappa0: f64) -> StochasticFlowModel {
    StochasticFlowModel::transport(
        SmoothFn::constant(1.0),
        SmoothFn::constant(0.0),
        kappa0,
        (-20.0, 20.0),
        TabulatedFlow::DEFAULT_STEP,
    )
    .unwrap()
}

fn recorded() -> SchemeConfig {
    SchemeConfig {
        record_steps: true,
        ..Default::default()
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn stationary_shock(n: usize, t: f64) -> Trajectory {
    let spec = ProblemSpec::transport(
        ScalarFlux::new(
            vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])],
            None,
            (-5.0, 5.0),
        ),
        VelocityField::Constant(vec![1.0]),
        unit_noise(0.0),
        Arc::new(|x: &[f64], _: &[f64]| if x[0] < 0.0 { 1.0 } else { -1.0 }),
        1.0,
        Domain {
            dim: 1,
            half_width: 1.0,
            boundary: BoundaryMode::FarField {
                lower: 1.0,
                upper: -1.0,
            },
        },
        t,
    );
    let path = sample_path(1, 0, t, 0).unwrap();
    solve_problem(&spec, n, &path, &recorded(), &[]).unwrap()
}

#[test]
fn stationary_burgers_shock_dissipation() {
    let t = 0.5;
    let traj = stationary_shock(64, t);
    // the discrete shock is steady
    assert_eq!(traj.snapshots[0].values, traj.final_field().values);
    let ks = linspace(-1.5, 1.5, 301);
    let prod = entropy_production(&traj, &ks).unwrap();
    assert!(prod.is_nonnegative(1e-12));
    // 1 - k^2 per unit time for |k| < 1
    for (i, k) in prod.k_values.iter().enumerate() {
        let expect = (1.0 - k * k).max(0.0) * t;
        assert!((prod.total(i) - expect).abs() < 1e-12, "k={k}");
    }
    // kinetic measure mass per unit time: jump^3 / 12
    let mass = weighted_p_moment(&prod, 0.0, |_| 1.0) / t;
    assert!((mass - 8.0 / 12.0).abs() < 0.1 * 8.0 / 12.0, "{mass}");
    assert!(weighted_p_moment(&prod, 2.0, |_| 1.0) < weighted_p_moment(&prod, 0.0, |_| 1.0));
}

#[test]
fn constant_field_produces_nothing() {
    let spec = ProblemSpec::transport(
        ScalarFlux::new(
            vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])],
            None,
            (-5.0, 5.0),
        ),
        VelocityField::Constant(vec![1.0]),
        unit_noise(0.5),
        Arc::new(|_: &[f64], _: &[f64]| 0.3),
        1.0,
        Domain::periodic(1, 1.0),
        0.25,
    );
    let path = sample_path(2, 0, 0.25, 3).unwrap();
    let traj = solve_problem(&spec, 32, &path, &recorded(), &[]).unwrap();
    let prod = entropy_production(&traj, &[-1.0, 0.0, 0.3, 0.5]).unwrap();
    assert!(prod.per_cell.iter().flatten().all(|&v| v == 0.0));
    assert_eq!(weighted_p_moment(&prod, 1.0, |_| 1.0), 0.0);
}

#[test]
fn smooth_advection_production_vanishes_with_dx() {
    let spec = |_: ()| {
        ProblemSpec::transport(
            ScalarFlux::new(
                vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
                None,
                (-5.0, 5.0),
            ),
            VelocityField::Constant(vec![1.0]),
            unit_noise(0.0),
            Arc::new(|x: &[f64], _: &[f64]| (std::f64::consts::PI * x[0]).sin()),
            1.0,
            Domain::periodic(1, 1.0),
            0.5,
        )
    };
    let ks = linspace(-1.2, 1.2, 49);
    let mut totals = Vec::new();
    let mut entries = Vec::new();
    for n in [64, 128, 256] {
        let path = sample_path(3, 0, 0.5, 0).unwrap();
        let traj = solve_problem(&spec(()), n, &path, &recorded(), &[]).unwrap();
        let prod = entropy_production(&traj, &ks).unwrap();
        assert!(prod.is_nonnegative(1e-12));
        totals.push(weighted_p_moment(&prod, 0.0, |_| 1.0));
        let dx = traj.grid().dx();
        // largest cell contribution to the measure, max_entry * dx, is O(dx^2)
        entries.push(prod.max_entry * dx / (dx * dx));
    }
    for w in totals.windows(2) {
        let r = w[1] / w[0];
        assert!(r > 0.4 && r < 0.6, "{totals:?}");
    }
    assert!(entries[2] < 1.5 * entries[0], "{entries:?}");
}

#[test]
fn missing_step_data() {
    let traj = {
        let spec = ProblemSpec::transport(
            ScalarFlux::new(
                vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
                None,
                (-5.0, 5.0),
            ),
            VelocityField::Constant(vec![1.0]),
            unit_noise(0.0),
            Arc::new(|_: &[f64], _: &[f64]| 0.0),
            1.0,
            Domain::periodic(1, 1.0),
            0.25,
        );
        solve_problem(
            &spec,
            16,
            &sample_path(1, 0, 0.25, 0).unwrap(),
            &SchemeConfig::default(),
            &[],
        )
        .unwrap()
    };
    assert_eq!(
        entropy_production(&traj, &[0.0]).unwrap_err(),
        Error::MissingStepData
    );
}

fn random_field(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x + j as f64).sin())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn production_is_nonnegative_for_transport(coeffs in prop::collection::vec(-1.0f64..1.0, 1..4), seed in 0u64..1000, kind in 0usize..3) {
        let c = coeffs.clone();
        let sinh = StochasticFlowModel::transport(SmoothFn::sqrt_one_plus_sq(), SmoothFn::linear(1.0), 0.5, (-50.0, 50.0), TabulatedFlow::DEFAULT_STEP).unwrap();
        let spec = ProblemSpec::transport(
            ScalarFlux::new(vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])], None, (-50.0, 50.0)),
            VelocityField::Constant(vec![1.0]),
            sinh,
            Arc::new(move |x: &[f64], _: &[f64]| random_field(&c, x[0])),
            1.0,
            Domain::periodic(1, 1.0),
            0.25,
        );
        let scheme = SchemeConfig { flux: FluxKind::ALL[kind], record_steps: true, ..Default::default() };
        let traj = solve_problem(&spec, 48, &sample_path(seed, 0, 0.25, 2).unwrap(), &scheme, &[]).unwrap();
        let prod = entropy_production(&traj, &linspace(-3.0, 3.0, 25)).unwrap();
        prop_assert!(prod.is_nonnegative(1e-12), "min {}", prod.min_entry);
    }

    #[test]
    fn production_is_nonnegative_for_stiff_source(coeffs in prop::collection::vec(-1.0f64..1.0, 1..4), seed in 0u64..1000, kind in 0usize..3) {
        let c = coeffs.clone();
        let flux = ScalarFlux::new(vec![FluxComponent::monotone(SmoothFn::cubic())], Some(1.0), (-20.0, 20.0));
        let spec = ProblemSpec::stiff_source(
            flux,
            OscillatoryPotential::sine(1.0, 1.0),
            0.5,
            Arc::new(move |x: &[f64]| random_field(&c, x[0])),
            0.25,
            Domain::periodic(1, 1.0),
            0.25,
        ).unwrap();
        let scheme = SchemeConfig { flux: FluxKind::ALL[kind], record_steps: true, ..Default::default() };
        let traj = solve_problem(&spec, 64, &sample_path(seed, 0, 0.25, 2).unwrap(), &scheme, &[]).unwrap();
        let prod = entropy_production(&traj, &linspace(-4.0, 4.0, 17)).unwrap();
        prop_assert!(prod.is_nonnegative(1e-12), "min {}", prod.min_entry);
    }

    #[test]
    fn chi_identities_hold(u in -5.0f64..5.0, v in -5.0f64..5.0) {
        let g = XiGrid::covering(-7.0, 7.0, 1e-3).unwrap();
        let c = chi_identity_check(u, v, &g).unwrap();
        prop_assert!(c.max_residual() <= 2e-3);
    }

    #[test]
    fn rigidity_defect_is_nonnegative(raw in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 8), 1..5)) {
        let weights: Vec<Vec<f64>> = raw.iter().map(|r| {
            let s: f64 = r.iter().sum::<f64>() + 1e-9;
            let mut w: Vec<f64> = r.iter().map(|x| x / s).collect();
            let rest = 1.0 - w.iter().sum::<f64>();
            w[0] += rest;
            w
        }).collect();
        let h = YoungMeasureHistogram::from_weights(0.0, 1.0, weights).unwrap();
        prop_assert!(rigidity_defect(&h) >= 0.0);
    }
}

#[test]
fn rigidity_defect_examples() {
    let two = YoungMeasureHistogram::from_weights(-0.5, 1.5, vec![vec![0.5, 0.5]]).unwrap();
    assert_eq!(rigidity_defect(&two), 0.25);
    let mut fine = vec![0.0; 200];
    fine[0] = 0.5;
    fine[100] = 0.5;
    let h = YoungMeasureHistogram::from_weights(-0.005, 1.995, vec![fine.clone(), fine]).unwrap();
    assert!((rigidity_defect(&h) - 0.25).abs() < 1e-12);
    let dirac = YoungMeasureHistogram::from_weights(
        0.0,
        1.0,
        vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]],
    )
    .unwrap();
    assert_eq!(rigidity_defect(&dirac), 0.0);
}

#[test]
fn young_measure_of_exact_oscillation() {
    let eps = 0.125;
    let grid = Grid::new(1, 128, 1.0).unwrap();
    // 8 cells per period
    let psi = |y: f64| (2.0 * std::f64::consts::PI * y).sin();
    let f = GridField::from_fn(grid, BoundaryMode::Periodic, |x| psi(x[0] / eps));
    let h = young_measure_estimate(&f, eps, 1.0, 8, 64).unwrap();
    assert!(h.is_valid());
    for (b, v) in h.variance.iter().enumerate() {
        assert!(*v <= h.xi_step().powi(2));
        assert!((h.mean[b] - psi((b as f64 + 0.5) / 8.0)).abs() < 1e-12);
    }
    assert_eq!(rigidity_defect(&h), 0.0);
    assert!(matches!(
        young_measure_estimate(&f, eps, 1.0, 16, 64),
        Err(Error::ResolutionTooCoarse(_))
    ));

    let c = GridField::constant(grid, BoundaryMode::Periodic, 0.4);
    let hc = young_measure_estimate(&c, eps, 1.0, 4, 9).unwrap();
    for row in &hc.weights {
        assert_eq!(row.iter().filter(|&&w| w > 0.0).count(), 1);
        assert_eq!(row[4], 1.0);
    }
}
