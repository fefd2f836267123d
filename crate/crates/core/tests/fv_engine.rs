use std::sync::Arc;

use stochhom::brownian::sample_path;
use stochhom::effective::{build_effective_flux, MeanValueEngine};
use stochhom::fv::*;
use stochhom::model::*;
use stochhom::Error;

fn sinh_noise(kappa0: f64, range: f64) -> StochasticFlowModel {
    StochasticFlowModel::transport(
        SmoothFn::sqrt_one_plus_sq(),
        SmoothFn::linear(1.0),
        kappa0,
        (-range, range),
        TabulatedFlow::DEFAULT_STEP,
    )
    .unwrap()
}

fn transport_spec(
    flux: FluxComponent,
    velocity: VelocityField,
    noise: StochasticFlowModel,
    dim: usize,
    eps: f64,
    t: f64,
) -> ProblemSpec {
    ProblemSpec::transport(
        ScalarFlux::new(vec![flux], None, (-50.0, 50.0)),
        velocity,
        noise,
        Arc::new(|x: &[f64], _: &[f64]| (std::f64::consts::PI * x[0]).sin()),
        eps,
        Domain::periodic(dim, 1.0),
        t,
    )
}

fn cubic_flux() -> ScalarFlux {
    ScalarFlux::new(
        vec![FluxComponent::monotone(SmoothFn::cubic())],
        Some(1.0),
        (-20.0, 20.0),
    )
}

#[test]
fn transport_preserves_special_solution() {
    let kappa0 = 0.5;
    let spec = transport_spec(
        FluxComponent::new(SmoothFn::burgers(), vec![0.0]),
        VelocityField::Constant(vec![1.0]),
        sinh_noise(kappa0, 200.0),
        1,
        0.1,
        1.0,
    );
    let path = sample_path(3, 0, 1.0, 10).unwrap();
    let alpha = 0.4;
    let grid = Grid::new(1, 512, 1.0).unwrap();
    let psi0 = special_solution_p1(alpha, 0.0, spec.noise()).unwrap();
    let field = GridField::constant(grid, BoundaryMode::Periodic, psi0);
    let traj = advance(
        &Dynamics::from_spec(&spec),
        &field,
        &path,
        &SchemeConfig {
            min_level: 10,
            ..Default::default()
        },
        1.0,
        &[],
    )
    .unwrap();
    assert_eq!(traj.level, 10);
    let exact = special_solution_p1(alpha, path.terminal(), spec.noise()).unwrap();
    let err = traj
        .final_field()
        .values
        .iter()
        .map(|u| (u - exact).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-10, "max deviation {err}");
}

#[test]
fn stiff_source_preserves_special_solution() {
    let eps = 1.0 / 16.0;
    let v = OscillatoryPotential::sine(1.0, 1.0);
    let spec = ProblemSpec::stiff_source(
        cubic_flux(),
        v.clone(),
        0.5,
        Arc::new(|_: &[f64]| 0.3),
        eps,
        Domain::periodic(1, 1.0),
        1.0,
    )
    .unwrap();
    let path = sample_path(5, 0, 1.0, 4).unwrap();
    let traj = solve_problem(&spec, 1024, &path, &SchemeConfig::default(), &[]).unwrap();
    let end = traj.snapshots.last().unwrap();
    let mut err: f64 = 0.0;
    for (i, u) in end.values.iter().enumerate() {
        let x = traj.grid().center_coord(i);
        let exact = special_solution_p2(0.3, x / eps, end.w, &spec).unwrap();
        err = err.max((u - exact).abs());
    }
    assert!(err <= 1e-9, "max deviation {err}");
}

#[test]
fn well_balanced_step_keeps_discrete_steady_state() {
    let eps = 0.1;
    let v = OscillatoryPotential::sine(0.7, 1.0);
    let noise = StochasticFlowModel::from_flux(&SmoothFn::cubic(), 1.0, 0.0).unwrap();
    let grid = Grid::new(1, 200, 1.0).unwrap();
    let field = GridField::from_fn(grid, BoundaryMode::Periodic, |x| {
        noise.flow.forward(v.value(x[0] / eps) + 0.2).unwrap()
    });
    for kind in FluxKind::ALL {
        let next = det_step_p2(&field, &cubic_flux(), &noise, &v, eps, 0.001, kind).unwrap();
        assert!(
            next.max_abs_diff(&GridField {
                time: next.time,
                ..field.clone()
            })
            .unwrap()
                < 1e-13,
            "{kind}"
        );
    }
}

#[test]
fn zero_potential_reduces_to_plain_update() {
    let grid = Grid::new(1, 64, 1.0).unwrap();
    let field = GridField::from_fn(grid, BoundaryMode::Periodic, |x| {
        0.5 + 0.3 * (std::f64::consts::PI * x[0]).cos()
    });
    let noise = StochasticFlowModel::from_flux(&SmoothFn::cubic(), 1.0, 0.0).unwrap();
    let a = det_step_p2(
        &field,
        &cubic_flux(),
        &noise,
        &OscillatoryPotential::zero(),
        0.1,
        0.005,
        FluxKind::Godunov,
    )
    .unwrap();
    let b = det_step_p1(
        &field,
        &VelocityField::Constant(vec![1.0]),
        &FluxComponent::monotone(SmoothFn::cubic()),
        0.1,
        0.005,
        FluxKind::Godunov,
    )
    .unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn constant_states_and_mass() {
    let grid = Grid::new(2, 32, 1.0).unwrap();
    let b = OscillatoryPotential::sine(0.5, 1.0).with_offset(1.0);
    let shear = VelocityField::Shear { c1: 0.0, b };
    let burgers = FluxComponent::new(SmoothFn::burgers(), vec![0.0]);
    let c = GridField::constant(grid, BoundaryMode::Periodic, 0.8);
    let next = det_step_p1(&c, &shear, &burgers, 0.25, 0.01, FluxKind::Godunov).unwrap();
    assert!(next.values.iter().all(|&v| v == 0.8));

    let bump = GridField::from_fn(grid, BoundaryMode::Periodic, |x| {
        (-4.0 * (x[0] * x[0] + x[1] * x[1])).exp()
    });
    let a = VelocityField::Constant(vec![0.6, -0.3]);
    let mut f = bump.clone();
    for _ in 0..20 {
        f = det_step_p1(
            &f,
            &a,
            &FluxComponent::monotone(SmoothFn::linear(1.0)),
            1.0,
            0.02,
            FluxKind::EngquistOsher,
        )
        .unwrap();
    }
    assert!((f.mass() - bump.mass()).abs() < 1e-12);
}

#[test]
fn cfl_violation_is_reported() {
    let grid = Grid::new(1, 16, 1.0).unwrap();
    let f = GridField::constant(grid, BoundaryMode::Periodic, 1.0);
    let err = det_step_p1(
        &f,
        &VelocityField::Constant(vec![1.0]),
        &FluxComponent::monotone(SmoothFn::linear(1.0)),
        1.0,
        1.0,
        FluxKind::Godunov,
    );
    assert!(matches!(err, Err(Error::CflViolation(_))));
}

#[test]
fn noise_step_examples() {
    let grid = Grid::new(1, 8, 1.0).unwrap();
    let zero = GridField::constant(grid, BoundaryMode::Periodic, 0.0);
    let m = sinh_noise(1.0, 20.0);
    let next = noise_step(&zero, 1.0, &m).unwrap();
    assert!(next.values.iter().all(|v| (v - 1.17520).abs() < 1e-5));
    assert_eq!(noise_step(&zero, 0.0, &m).unwrap(), zero);
    let lin = StochasticFlowModel::from_flux(&SmoothFn::linear(1.0), 1.0, 0.5).unwrap();
    let f = GridField::constant(grid, BoundaryMode::Periodic, 2.0);
    assert!(noise_step(&f, -1.0, &lin)
        .unwrap()
        .values
        .iter()
        .all(|&v| v == 1.5));
}

#[test]
fn viscous_step_matches_fourier_decay() {
    let grid = Grid::new(1, 128, 1.0).unwrap();
    let k = std::f64::consts::PI;
    let f = GridField::from_fn(grid, BoundaryMode::Periodic, |x| (k * x[0]).sin());
    let nu = 0.1;
    let dt = 0.5 * grid.dx() * grid.dx() / (2.0 * nu);
    let g = viscous_step(&f, nu, dt).unwrap();
    // discrete symbol of the centered Laplacian
    let dx = grid.dx();
    let factor = 1.0 - nu * dt * 4.0 / (dx * dx) * (0.5 * k * dx).sin().powi(2);
    for (a, b) in f.values.iter().zip(&g.values) {
        assert!((b - factor * a).abs() < 1e-13);
    }
    assert!((factor - (-nu * k * k * dt).exp()).abs() < 1e-6);
    assert_eq!(viscous_step(&f, 0.0, dt).unwrap(), f);
    assert!(matches!(
        viscous_step(&f, nu, 4.0 * dt),
        Err(Error::StabilityViolation { .. })
    ));
}

#[test]
fn linear_stiff_source_converges_at_first_order() {
    let k = std::f64::consts::PI;
    let v0 = move |x: &[f64]| 0.5 * (k * x[0]).sin();
    let eps = 0.25;
    let v = OscillatoryPotential::sine(1.0, 1.0);
    let lin = ScalarFlux::new(
        vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
        Some(1.0),
        (-20.0, 20.0),
    );
    let spec = ProblemSpec::stiff_source(
        lin,
        v.clone(),
        0.5,
        Arc::new(v0),
        eps,
        Domain::periodic(1, 1.0),
        0.5,
    )
    .unwrap();
    let path = sample_path(9, 0, 0.5, 2).unwrap();
    let mut errs = Vec::new();
    for n in [128, 256, 512] {
        let traj = solve_problem(&spec, n, &path, &SchemeConfig::default(), &[]).unwrap();
        let end = traj.snapshots.last().unwrap();
        let g = traj.grid();
        let err: f64 = end
            .values
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let x = g.center_coord(i);
                (u - (v.value(x / eps) + v0(&[x - 0.5]) + 0.5 * end.w)).abs()
            })
            .sum::<f64>()
            * g.dx();
        errs.push(err);
    }
    for w in errs.windows(2) {
        let r = w[1] / w[0];
        assert!(r > 0.4 && r < 0.65, "{errs:?}");
    }
}

#[test]
fn effective_solver_preserves_effective_special_solution() {
    let v = OscillatoryPotential::sine(1.0, 1.0);
    let engine = MeanValueEngine::new(v.clone(), 1e-13);
    let table = build_effective_flux(&cubic_flux(), &v, &engine, (-2.5, 2.5), 501).unwrap();
    let path = sample_path(2, 1, 1.0, 4).unwrap();
    let grid = Grid::new(1, 128, 1.0).unwrap();
    let gamma = 0.2;
    let traj = solve_effective(
        &table,
        &|_| gamma,
        grid,
        BoundaryMode::Periodic,
        0.5,
        &path,
        &SchemeConfig::default(),
        1.0,
        &[],
    )
    .unwrap();
    let end = traj.snapshots.last().unwrap();
    let exact = table.gbar(gamma + 0.5 * end.w).unwrap();
    let err = end
        .values
        .iter()
        .map(|u| (u - exact).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-10, "{err}");
}

#[test]
fn shear_family_matches_quadrature_oracle() {
    let b = OscillatoryPotential::sine(0.5, 1.0).with_offset(1.0);
    let spec = ProblemSpec::transport(
        ScalarFlux::new(
            vec![FluxComponent::monotone(SmoothFn::linear(1.0))],
            None,
            (-10.0, 10.0),
        ),
        VelocityField::Shear {
            c1: 0.0,
            b: b.clone(),
        },
        StochasticFlowModel::transport(
            SmoothFn::constant(1.0),
            SmoothFn::constant(0.0),
            0.5,
            (-10.0, 10.0),
            TabulatedFlow::DEFAULT_STEP,
        )
        .unwrap(),
        Arc::new(|x: &[f64], _: &[f64]| (std::f64::consts::PI * x[1]).sin()),
        0.25,
        Domain::periodic(2, 1.0),
        0.25,
    );
    let path = sample_path(4, 0, 0.25, 2).unwrap();
    let m = 8;
    let ys: Vec<Vec<f64>> = (0..m).map(|j| vec![j as f64 / m as f64, 0.0]).collect();
    let ws = vec![1.0 / m as f64; m];
    let mut errs = Vec::new();
    for n in [32, 64] {
        let sol =
            solve_family_p1(&spec, n, &path, &ys, &ws, &SchemeConfig::default(), &[]).unwrap();
        let avg = sol.average.last().unwrap();
        let w_t = sol.members[0].snapshots.last().unwrap().w;
        let oracle = GridField::from_fn(avg.grid, BoundaryMode::Periodic, |x| {
            ys.iter()
                .zip(&ws)
                .map(|(y, w)| w * (std::f64::consts::PI * (x[1] - b.value(y[0]) * 0.25)).sin())
                .sum::<f64>()
                + 0.5 * w_t
        });
        errs.push(
            GridField {
                time: avg.time,
                ..oracle
            }
            .l1_distance(avg)
            .unwrap(),
        );
    }
    assert!(errs[1] < 0.6 * errs[0], "{errs:?}");

    // a constant field gives identical members
    let c = transport_spec(
        FluxComponent::monotone(SmoothFn::linear(1.0)),
        VelocityField::Constant(vec![1.0]),
        sinh_noise(0.3, 50.0),
        1,
        0.5,
        0.25,
    );
    let fam = solve_family_p1(
        &c,
        32,
        &path,
        &[vec![0.1], vec![0.7]],
        &[0.5, 0.5],
        &SchemeConfig::default(),
        &[],
    )
    .unwrap();
    assert_eq!(fam.members[0].snapshots, fam.members[1].snapshots);
}

#[test]
fn general_velocity_family_is_rejected() {
    let spec = transport_spec(
        FluxComponent::monotone(SmoothFn::linear(1.0)),
        VelocityField::General {
            dim: 1,
            field: Arc::new(|_| vec![1.0]),
        },
        sinh_noise(0.3, 50.0),
        1,
        0.5,
        0.25,
    );
    let path = sample_path(4, 0, 0.25, 2).unwrap();
    let r = solve_family_p1(
        &spec,
        16,
        &path,
        &[vec![0.0]],
        &[1.0],
        &SchemeConfig::default(),
        &[],
    );
    assert!(matches!(r, Err(Error::UnsupportedVelocityFamily(_))));
}

#[test]
fn snapshots_must_lie_on_the_time_grid() {
    let spec = transport_spec(
        FluxComponent::monotone(SmoothFn::linear(1.0)),
        VelocityField::Constant(vec![1.0]),
        sinh_noise(0.3, 50.0),
        1,
        0.5,
        1.0,
    );
    let path = sample_path(4, 0, 1.0, 3).unwrap();
    let cfg = SchemeConfig {
        min_level: 6,
        ..Default::default()
    };
    let r = solve_problem(&spec, 16, &path, &cfg, &[0.3]);
    assert!(matches!(r, Err(Error::MalformedSpec(_))));
    let t = solve_problem(&spec, 16, &path, &cfg, &[0.25, 0.5]).unwrap();
    assert_eq!(t.snapshots.len(), 4);
    assert!(t.snapshot_at(0.5).is_some());
}

#[test]
fn far_field_equilibria_are_preserved() {
    let eps = 0.1;
    let v = OscillatoryPotential::sine(0.5, 1.0);
    let spec = ProblemSpec::stiff_source(
        cubic_flux(),
        v,
        0.4,
        Arc::new(|_: &[f64]| -0.3),
        eps,
        Domain {
            dim: 1,
            half_width: 1.05,
            boundary: BoundaryMode::FarField {
                lower: -0.3,
                upper: -0.3,
            },
        },
        0.5,
    )
    .unwrap();
    let path = sample_path(8, 2, 0.5, 3).unwrap();
    let traj = solve_problem(&spec, 210, &path, &SchemeConfig::default(), &[]).unwrap();
    let end = traj.snapshots.last().unwrap();
    for (i, u) in end.values.iter().enumerate() {
        let x = traj.grid().center_coord(i);
        let exact = special_solution_p2(-0.3, x / eps, end.w, &spec).unwrap();
        assert!((u - exact).abs() < 1e-10);
    }
    assert!((end.beta.0 - (-0.3 + 0.4 * end.w)).abs() < 1e-12);
}

#[test]
fn reruns_are_bit_identical() {
    let spec = transport_spec(
        FluxComponent::new(SmoothFn::burgers(), vec![0.0]),
        VelocityField::Constant(vec![1.0]),
        sinh_noise(0.5, 200.0),
        1,
        0.5,
        0.5,
    );
    let path = sample_path(17, 3, 0.5, 2).unwrap();
    let a = solve_problem(&spec, 128, &path, &SchemeConfig::default(), &[]).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let b =
        pool.install(|| solve_problem(&spec, 128, &path, &SchemeConfig::default(), &[]).unwrap());
    assert_eq!(a.snapshots, b.snapshots);
}
