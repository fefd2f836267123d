use std::sync::Arc;

use stochhom::effective::{build_effective_flux, MeanValueEngine};
use stochhom::fv::*;
use stochhom::kinetic::rigidity_defect;
use stochhom::lab::*;
use stochhom::model::*;
use stochhom::Error;

const PI: f64 = std::f64::consts::PI;

fn linear_spec(kappa0: f64, eps: f64, t: f64) -> ProblemSpec {
    let flux = ScalarFlux::new(
        vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
        Some(1.0),
        (-20.0, 20.0),
    );
    ProblemSpec::stiff_source(
        flux,
        OscillatoryPotential::sine(1.0, 1.0),
        kappa0,
        Arc::new(|x: &[f64]| 0.5 * (PI * x[0]).sin()),
        eps,
        Domain::periodic(1, 1.0),
        t,
    )
    .unwrap()
}

fn linear_plan(kappa0: f64, eps: Vec<f64>, seeds: Vec<u64>) -> SweepPlan {
    let spec = linear_spec(kappa0, eps[0], 0.5);
    let exact: ExactFn = Arc::new(move |t, w, x| 0.5 * (PI * (x[0] - t)).sin() + kappa0 * w);
    let v = OscillatoryPotential::sine(1.0, 1.0);
    let table = build_effective_flux(
        spec.flux(),
        &v,
        &MeanValueEngine::new(v.clone(), 1e-12),
        (-4.0, 4.0),
        161,
    )
    .unwrap();
    let mut plan = SweepPlan::new(
        spec,
        eps,
        seeds,
        default_test_functions(1, 1.0),
        Reference::Exact(exact),
    );
    plan.table = Some(Arc::new(table));
    plan.young = Some((8, 32));
    plan
}

#[test]
fn weak_star_trivial_cases() {
    let g = Grid::new(1, 64, 1.0).unwrap();
    let u = GridField::from_fn(g, BoundaryMode::Periodic, |x| x[0].cos());
    let phis = default_test_functions(1, 1.0);
    assert!(weak_star_error(&u, &u, &phis)
        .unwrap()
        .iter()
        .all(|&e| e == 0.0));
    let v = GridField::constant(g, BoundaryMode::Periodic, 3.0);
    assert_eq!(
        weak_star_error(&u, &v, &[TestFunction::zero(1)]).unwrap(),
        vec![0.0]
    );
    let other = GridField::constant(Grid::new(1, 32, 1.0).unwrap(), BoundaryMode::Periodic, 0.0);
    assert!(matches!(
        weak_star_error(&u, &other, &phis),
        Err(Error::GridMismatch(_))
    ));
    let mut late = u.clone();
    late.time = 0.5;
    assert!(matches!(
        weak_star_error(&u, &late, &phis),
        Err(Error::GridMismatch(_))
    ));
    let plane = TestFunction::new(WindowKind::Bump, vec![0.0, 0.0], vec![0.5, 0.5]).unwrap();
    assert!(matches!(
        weak_star_error(&u, &v, &[plane]),
        Err(Error::UnsupportedTestFunction(_))
    ));
}

#[test]
fn weak_star_is_invariant_under_common_shift() {
    let g = Grid::new(1, 128, 1.0).unwrap();
    let u = GridField::from_fn(g, BoundaryMode::Periodic, |x| (3.0 * x[0]).sin());
    let ub = GridField::from_fn(g, BoundaryMode::Periodic, |x| x[0] * x[0]);
    let shift = |f: &GridField| GridField {
        values: f.values.iter().map(|v| v + 2.5).collect(),
        ..f.clone()
    };
    let phis = default_test_functions(1, 1.0);
    let a = weak_star_error(&u, &ub, &phis).unwrap();
    let b = weak_star_error(&shift(&u), &shift(&ub), &phis).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-13);
    }
}

#[test]
fn oscillatory_pairing_obeys_integration_by_parts_bound() {
    // |int sin(2 pi x/eps) phi| <= eps/(2 pi) int |phi'|
    for phi in default_test_functions(1, 1.0) {
        let tv: f64 = {
            let n = 20000;
            (0..n)
                .map(|i| {
                    let x = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                    phi.gradient(&[x])[0].abs() * 2.0 / n as f64
                })
                .sum()
        };
        for k in 3..7 {
            let eps = 0.5f64.powi(k);
            let g = Grid::new(1, 4096, 1.0).unwrap();
            let osc =
                GridField::from_fn(g, BoundaryMode::Periodic, |x| (2.0 * PI * x[0] / eps).sin());
            let zero = GridField::constant(g, BoundaryMode::Periodic, 0.0);
            let e = weak_star_error(&osc, &zero, std::slice::from_ref(&phi)).unwrap()[0];
            assert!(
                e <= eps / (2.0 * PI) * tv + 1e-12,
                "{phi:?} eps={eps} e={e}"
            );
        }
    }
}

#[test]
fn corrector_trivial_cases() {
    let spec = linear_spec(0.5, 0.125, 0.5);
    let v = OscillatoryPotential::sine(1.0, 1.0);
    let table = build_effective_flux(
        spec.flux(),
        &v,
        &MeanValueEngine::new(v.clone(), 1e-12),
        (-4.0, 4.0),
        81,
    )
    .unwrap();
    let u0 = GridField::initial(&spec, 256).unwrap();
    let ubar0 = GridField::from_fn(u0.grid, BoundaryMode::Periodic, |x| 0.5 * (PI * x[0]).sin());
    assert!(corrector_error(&u0, &ubar0, &table, &spec).unwrap() < 1e-12);

    let flat = build_effective_flux(
        spec.flux(),
        &OscillatoryPotential::zero(),
        &MeanValueEngine::new(OscillatoryPotential::zero(), 1e-12),
        (-4.0, 4.0),
        81,
    )
    .unwrap();
    let no_v = ProblemSpec::stiff_source(
        spec.flux().clone(),
        OscillatoryPotential::zero(),
        0.5,
        Arc::new(|x: &[f64]| x[0]),
        0.125,
        Domain::periodic(1, 1.0),
        0.5,
    )
    .unwrap();
    let a = GridField::from_fn(u0.grid, BoundaryMode::Periodic, |x| x[0].sin());
    let e = corrector_error(&a, &ubar0, &flat, &no_v).unwrap();
    assert!((e - a.l1_distance(&ubar0).unwrap()).abs() < 1e-12);
}

#[test]
fn linear_sweep_halves_errors() {
    let plan = linear_plan(0.5, vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], vec![1, 2]);
    let table = eps_sweep(&plan).unwrap();
    assert_eq!(table.rows.len(), 2 * 3 * 2);
    let ratios = table.ratios();
    assert_eq!(ratios.len(), 2 * 2);
    for r in &ratios {
        for w in &r.weak_star {
            assert!((0.4..=0.7).contains(w), "{r:?}");
        }
        assert!((0.4..=0.7).contains(&r.corrector.unwrap()), "{r:?}");
        assert!(r.young_variance.unwrap() <= 0.5, "{r:?}");
    }
    // corrector error is C dx with C stable across eps
    let cs: Vec<f64> = table
        .rows
        .iter()
        .filter(|r| r.time > 0.0)
        .map(|r| r.corrector.unwrap() / (2.0 / r.n as f64))
        .collect();
    let (lo, hi) = cs
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    assert!(hi <= 2.0 * lo, "{cs:?}");
    // concentration: the residual histograms approach Dirac masses
    let defects: Vec<f64> = table
        .series(1, 0.5)
        .iter()
        .map(|r| r.rigidity.unwrap())
        .collect();
    assert!(defects.windows(2).all(|w| w[1] < w[0]), "{defects:?}");
}

#[test]
fn deterministic_sweep_has_same_trend() {
    let plan = linear_plan(0.0, vec![1.0 / 8.0, 1.0 / 16.0], vec![5]);
    let table = eps_sweep(&plan).unwrap();
    for r in table.ratios() {
        assert!((0.4..=0.7).contains(&r.corrector.unwrap()));
    }
    // W plays no role without noise
    let other = eps_sweep(&SweepPlan {
        seeds: vec![6],
        ..plan
    })
    .unwrap();
    for (a, b) in table.rows.iter().zip(&other.rows) {
        assert_eq!(a.weak_star, b.weak_star);
    }
}

#[test]
fn single_eps_plan() {
    let mut plan = linear_plan(0.5, vec![1.0 / 8.0], vec![3]);
    plan.times = vec![0.25];
    let table = eps_sweep(&plan).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table.ratios().is_empty());
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("seed,eps,n,t,W,metric,index,value\n"));
}

#[test]
fn sweep_plan_validation() {
    let mut plan = linear_plan(0.5, vec![0.125], vec![1]);
    plan.test_functions
        .push(TestFunction::new(WindowKind::Hann, vec![0.9], vec![0.25]).unwrap());
    assert!(matches!(
        eps_sweep(&plan),
        Err(Error::UnsupportedTestFunction(_))
    ));
    let mut plan = linear_plan(0.5, vec![0.125], vec![1]);
    plan.cells_per_eps = 8.0;
    assert!(matches!(
        eps_sweep(&plan),
        Err(Error::ResolutionTooCoarse(_))
    ));
    let mut plan = linear_plan(0.5, vec![0.125], vec![1]);
    plan.reference = Reference::Family {
        y_nodes: vec![vec![0.5]],
        weights: vec![1.0],
    };
    assert!(matches!(eps_sweep(&plan), Err(Error::MalformedSpec(_))));
}

#[test]
fn effective_reference_matches_exact_in_the_linear_case() {
    let mut plan = linear_plan(0.5, vec![1.0 / 16.0], vec![4]);
    let exact = eps_sweep(&plan).unwrap();
    plan.reference = Reference::Effective;
    let numerical = eps_sweep(&plan).unwrap();
    let last = |t: &ConvergenceTable| t.rows.last().unwrap().clone();
    // both runs carry the same upwind error, so the pairing collapses
    assert!(last(&numerical).weak_star.iter().all(|&e| e < 1e-10));
    assert!(last(&exact).weak_star.iter().all(|&e| e > 1e-6));
}

#[test]
fn young_histogram_rows_are_probabilities() {
    let spec = linear_spec(0.5, 0.125, 0.5);
    let u = GridField::initial(&spec, 256).unwrap();
    let h = young_measure_estimate(&u, 0.125, 1.0, 8, 40).unwrap();
    assert!(h.is_valid());
    assert!(rigidity_defect(&h) > 0.0);
}

fn sinh_constant_spec(alpha: f64, kappa0: f64, t: f64) -> ProblemSpec {
    let noise = StochasticFlowModel::transport(
        SmoothFn::sqrt_one_plus_sq(),
        SmoothFn::linear(1.0),
        kappa0,
        (-200.0, 200.0),
        TabulatedFlow::DEFAULT_STEP,
    )
    .unwrap();
    ProblemSpec::transport(
        ScalarFlux::new(
            vec![FluxComponent::new(SmoothFn::burgers(), vec![0.0])],
            None,
            (-200.0, 200.0),
        ),
        VelocityField::Constant(vec![1.0]),
        noise,
        Arc::new(move |_: &[f64], _: &[f64]| alpha.sinh()),
        1.0,
        Domain::periodic(1, 1.0),
        t,
    )
}

#[test]
fn monte_carlo_matches_gaussian_oracle() {
    let (alpha, k0, t) = (0.3, 0.5, 1.0);
    let plan = EnsemblePlan::new(sinh_constant_spec(alpha, k0, t), 8, 11);
    let stats = monte_carlo(&plan, 2000).unwrap();
    let last = stats.times.last().unwrap();
    // E sinh^2(alpha + k0 W(T)) = (cosh(2 alpha) exp(2 k0^2 T) - 1)/2, times |box| = 2
    let exact = (2.0 * alpha).cosh() * (2.0 * k0 * k0 * t).exp() - 1.0;
    let m2 = last.moments.iter().find(|m| m.p == 2.0).unwrap();
    assert!(
        (m2.mean - exact).abs() <= 2.0 * m2.half_width,
        "{m2:?} vs {exact}"
    );
    // sample Cauchy-Schwarz: (E int |u|)^2 <= E int |u|^2 * int w
    let m1 = last.moments.iter().find(|m| m.p == 1.0).unwrap();
    assert!(m1.mean * m1.mean <= m2.mean * 2.0);
}

#[test]
fn monte_carlo_edge_cases() {
    let plan = EnsemblePlan::new(sinh_constant_spec(0.2, 0.0, 0.5), 8, 1);
    let stats = monte_carlo(&plan, 4).unwrap();
    for t in &stats.times {
        assert!(t.moments.iter().all(|m| m.half_width == 0.0));
    }
    let plan = EnsemblePlan::new(sinh_constant_spec(0.2, 0.5, 0.5), 8, 1);
    let two = monte_carlo(&plan, 2).unwrap();
    assert!(two
        .times
        .iter()
        .flat_map(|t| &t.moments)
        .all(|m| m.half_width.is_finite()));
    assert_eq!(
        monte_carlo(&plan, 1).unwrap_err(),
        Error::InsufficientPaths { needed: 2, got: 1 }
    );
    // reproducible across thread counts
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    assert_eq!(
        pool.install(|| monte_carlo(&plan, 6).unwrap()),
        monte_carlo(&plan, 6).unwrap()
    );
}
