use minmax_hj::grid::{FieldMeta, Grid, GridField};
use minmax_hj::hamiltonian::*;
use minmax_hj::media::{sample_realization, MediumRealization, MediumSpec};
use minmax_hj::solver::*;
use minmax_hj::Error;

fn flat() -> MediumRealization {
    sample_realization(&MediumSpec::empty(1), 0).unwrap()
}

fn sin2() -> MediumRealization {
    sample_realization(&MediumSpec::sin2_1d("V", 1.0, 0.0, 1.0), 0).unwrap()
}

fn abs_h(m: &MediumRealization) -> EnvelopeHamiltonian {
    let c = Piece::new(Profile::abs(0.0, 1.0, 0.0), Coupling::None, Convexity::Quasiconvex).unwrap();
    EnvelopeHamiltonian::new(&c.into(), m).unwrap()
}

fn abs_plus_sin2(m: &MediumRealization) -> EnvelopeHamiltonian {
    EnvelopeHamiltonian::new(&Piece::abs_additive(0.0, 1.0, 0.0, 0, 1.0).unwrap().into(), m).unwrap()
}

/// `c` everywhere, for the homogenized solver.
struct ConstantH(f64);

impl Hamiltonian for ConstantH {
    fn dim(&self) -> usize {
        1
    }
    fn eval_split(&self, _: &[f64], _: &[f64], _: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = 0.0;
        self.0
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn is_x_independent(&self) -> bool {
        true
    }
}

#[test]
fn x_independent_discounted_solutions_are_constant() {
    let m = flat();
    let h = abs_h(&m);
    let g = Grid::torus(1, 64, 1.0).unwrap();
    let s = solve_discounted(&h, &[0.0], 0.1, &g, &SchemeParams::default()).unwrap();
    assert!(s.field.values.iter().all(|v| *v == 0.0));
    for p0 in [-2.5, 0.3, 1.0, 7.0] {
        for lambda in [1.0, 0.1, 1e-3] {
            let s = solve_discounted(&h, &[p0], lambda, &g, &SchemeParams::default()).unwrap();
            assert_eq!(s.estimate_at_origin(), f64::abs(p0));
            assert!(s.field.values.iter().all(|v| (v + f64::abs(p0) / lambda).abs() <= 1e-12 * (1.0 + 1.0 / lambda)));
        }
    }
}

#[test]
fn oscillating_potential_approaches_three_halves() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = Grid::torus(1, 2048, 1.0).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [1e-1, 3e-2, 1e-2] {
        let s = solve_discounted(&h, &[1.0], lambda, &g, &SchemeParams::default()).unwrap();
        let est = s.estimate_at_origin();
        let err = (est - 1.5).abs();
        assert!(err < last, "λ = {lambda}: error {err} did not decrease");
        last = err;
        assert!(s.report.residual <= s.report.tol);
        assert!(s.scaled.iter().all(|u| u.abs() <= s.h_bound + 1e-12));
    }
    assert!(last < 1e-2);
}

#[test]
fn explicit_relaxation_matches_newton() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = Grid::torus(1, 32, 1.0).unwrap();
    let newton = solve_discounted(&h, &[0.7], 0.5, &g, &SchemeParams::default()).unwrap();
    let explicit = solve_discounted(
        &h,
        &[0.7],
        0.5,
        &g,
        &SchemeParams { relaxation: Relaxation::Explicit, ..SchemeParams::default() },
    )
    .unwrap();
    assert!(explicit.report.newton_steps == 0 && explicit.report.explicit_steps > 0);
    for (a, b) in newton.scaled.iter().zip(&explicit.scaled) {
        assert!((a - b).abs() < 1e-7);
    }
}

#[test]
fn residual_history_exports_as_csv() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = Grid::torus(1, 64, 1.0).unwrap();
    let s = solve_discounted(&h, &[1.0], 0.1, &g, &SchemeParams::default()).unwrap();
    let mut out = Vec::new();
    s.report.write_history_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("iteration,residual\n"));
    assert_eq!(text.lines().count(), s.report.history.len() + 1);
}

#[test]
fn non_monotone_parameters_are_rejected() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = Grid::torus(1, 64, 1.0).unwrap();
    let low = SchemeParams { theta: Some(0.5), ..SchemeParams::default() };
    assert!(matches!(solve_discounted(&h, &[1.0], 0.1, &g, &low), Err(Error::MonotonicityViolation(_))));
    let big_tau = SchemeParams { tau: Some(1.0), ..SchemeParams::default() };
    assert!(matches!(solve_discounted(&h, &[1.0], 0.1, &g, &big_tau), Err(Error::MonotonicityViolation(_))));
    assert!(solve_discounted(&h, &[1.0], 0.0, &g, &SchemeParams::default()).is_err());
}

#[test]
fn iteration_cap_reports_history() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = Grid::torus(1, 256, 1.0).unwrap();
    let p = SchemeParams { relaxation: Relaxation::Explicit, max_iterations: 5, ..SchemeParams::default() };
    match solve_discounted(&h, &[1.0], 0.01, &g, &p) {
        Err(Error::NoConvergence { iterations, residual, history }) => {
            assert_eq!(iterations, 5);
            assert!(residual > 0.0);
            assert_eq!(history.len(), 6);
        }
        other => panic!("expected no convergence, got {other:?}"),
    }
}

#[test]
fn two_dimensional_constant_solution() {
    let m = sample_realization(&MediumSpec::empty(2), 0).unwrap();
    let c = Piece::new(
        Profile::AbsShift { center: vec![0.0, 0.0], slope: 1.0, offset: 0.0 },
        Coupling::None,
        Convexity::Quasiconvex,
    )
    .unwrap();
    let h = EnvelopeHamiltonian::new(&c.into(), &m).unwrap();
    let g = Grid::torus(2, 16, 1.0).unwrap();
    let s = solve_discounted(&h, &[3.0, 4.0], 0.1, &g, &SchemeParams::default()).unwrap();
    assert_eq!(s.estimate_at_origin(), 5.0);
}

#[test]
fn two_dimensional_oscillating_solve_converges() {
    let spec = MediumSpec::periodic(
        2,
        1.0,
        vec![minmax_hj::media::PeriodicChannel {
            name: "V".into(),
            terms: vec![minmax_hj::media::PeriodicTerm {
                kind: minmax_hj::media::TermKind::Sin2,
                amplitude: 1.0,
                wavevector: vec![1, 1],
                phase: 0.0,
            }],
            offset: 0.0,
        }],
    );
    let m = sample_realization(&spec, 0).unwrap();
    let c = Piece::new(
        Profile::AbsShift { center: vec![0.0, 0.0], slope: 1.0, offset: 0.0 },
        Coupling::Additive { channel: 0, scale: 1.0 },
        Convexity::Quasiconvex,
    )
    .unwrap();
    let h = EnvelopeHamiltonian::new(&c.into(), &m).unwrap();
    let g = Grid::torus(2, 32, 1.0).unwrap();
    let s = solve_discounted(&h, &[1.0, 0.0], 0.1, &g, &SchemeParams::default()).unwrap();
    assert!(s.report.residual <= s.report.tol);
    assert!(s.scaled.iter().all(|u| u.abs() <= s.h_bound + 1e-12));
}

fn box_grid(n: usize) -> Grid {
    Grid::centered(1, n, 4.0).unwrap()
}

fn hopf_lax_abs(x: f64, t: f64) -> f64 {
    (x.abs() - t).max(0.0).min(1.0)
}

#[test]
fn evolution_matches_hopf_lax_for_abs() {
    let m = flat();
    let h = abs_h(&m);
    let mut prev = f64::INFINITY;
    for n in [200, 800] {
        let g = box_grid(n);
        let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| x[0].abs().min(1.0));
        let e = solve_time_dependent(&h, &u0, 1.0, 0.5, &TimeParams::default()).unwrap();
        let err = (0..g.len())
            .map(|i| (e.last().values[i] - hopf_lax_abs(g.coord(i), 0.5)).abs())
            .fold(0.0, f64::max);
        assert!(err < prev);
        prev = err;
    }
    assert!(prev < 1e-2, "error {prev}");
}

#[test]
fn constant_datum_moves_by_h_of_zero() {
    let m = flat();
    let c = Piece::new(Profile::abs(0.0, 2.0, 0.75), Coupling::None, Convexity::Quasiconvex).unwrap();
    let h = EnvelopeHamiltonian::new(&c.into(), &m).unwrap();
    let g = box_grid(64);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |_| 2.0);
    let e = solve_time_dependent(&h, &u0, 0.5, 1.0, &TimeParams::default()).unwrap();
    assert!(e.last().values.iter().all(|v| (v - (2.0 - 0.75)).abs() < 1e-12));
}

#[test]
fn semigroup_property() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = box_grid(256);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| (x[0].abs()).min(1.0));
    let params = TimeParams { dt: Some(0.01), ..TimeParams::default() };
    let full = solve_time_dependent(&h, &u0, 0.25, 0.5, &params).unwrap();
    let first = solve_time_dependent(&h, &u0, 0.25, 0.2, &params).unwrap();
    let second = solve_time_dependent(&h, first.last(), 0.25, 0.3, &params).unwrap();
    let diff = full
        .last()
        .values
        .iter()
        .zip(&second.last().values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 2e-12, "diff {diff}");
    // snapshots reproduce the restart exactly
    let snap = solve_time_dependent(&h, &u0, 0.25, 0.5, &TimeParams { snapshots: vec![0.2], ..params.clone() }).unwrap();
    assert_eq!(snap.times, vec![0.2, 0.5]);
    assert_eq!(snap.fields[0].values, first.last().values);
}

#[test]
fn evolution_stays_in_kt_band() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = box_grid(256);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| (x[0] * 3.0).cos());
    let t = 0.5;
    let e = solve_time_dependent(&h, &u0, 0.25, t, &TimeParams::default()).unwrap();
    // |Du0| ≤ 3 so K = sup_{|p| ≤ 3} |H| = 4
    let k = 4.0;
    assert!(e.last().min() >= u0.min() - k * t - 1e-12);
    assert!(e.last().max() <= u0.max() + k * t + 1e-12);
}

#[test]
fn cfl_and_resolution_errors() {
    let m = sin2();
    let h = abs_plus_sin2(&m);
    let g = box_grid(64);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |_| 0.0);
    let too_big = TimeParams { dt: Some(g.spacing()), ..TimeParams::default() };
    assert!(matches!(solve_time_dependent(&h, &u0, 1.0, 0.1, &too_big), Err(Error::Cfl(_))));
    assert!(matches!(
        solve_time_dependent(&h, &u0, g.spacing(), 0.1, &TimeParams::default()),
        Err(Error::UnderResolved(_))
    ));
}

#[test]
fn homogenized_constant_hamiltonian() {
    let g = box_grid(64);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| x[0].abs().min(1.0));
    let e = solve_homogenized(&ConstantH(0.8), &u0, 0.5, &TimeParams { dt: Some(0.05), ..TimeParams::default() }).unwrap();
    for (a, b) in e.last().values.iter().zip(&u0.values) {
        assert!((a - (b - 0.4)).abs() < 1e-12);
    }
    let m = sin2();
    assert!(solve_homogenized(&abs_plus_sin2(&m), &u0, 0.5, &TimeParams::default()).is_err());
}

#[test]
fn homogenized_abs_matches_hopf_lax() {
    let m = flat();
    let g = box_grid(800);
    let u0 = GridField::from_fn(g, FieldMeta::Plain, |x| x[0].abs().min(1.0));
    let e = solve_homogenized(&abs_h(&m), &u0, 0.5, &TimeParams::default()).unwrap();
    let err = (0..g.len())
        .map(|i| (e.last().values[i] - hopf_lax_abs(g.coord(i), 0.5)).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-2);
}
