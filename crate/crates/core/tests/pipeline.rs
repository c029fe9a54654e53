use lpd_core::harness::{default_start, run_algorithm, Algorithm, StepOverride};
use lpd_core::instances::{
    build_policy_eval, build_robust_least_squares, gen_quadratic_instance, gen_synthetic_mdp_trace,
    GeneratorConfig, MdpTrace,
};
use lpd_core::metrics::{
    primal_dual_gap, read_trace_csv, solve_saddle, solve_saddle_exact, write_trace_csv,
    RecorderOptions,
};
use lpd_core::problem::{BilinearProblem, Coupling, FeasibleSet, QuadraticFunction};
use nalgebra::{DMatrix, DVector};

fn graded() -> BilinearProblem {
    gen_quadratic_instance(&GeneratorConfig {
        d: 4,
        r: 1.5,
        seed: 3,
    })
    .unwrap()
}

#[test]
fn every_strongly_convex_method_approaches_the_saddle() {
    let p = graded();
    let cert = solve_saddle_exact(&p).unwrap();
    let (x0, y0) = (default_start(4, 1), default_start(4, 2));
    let algs = [
        Algorithm::LpdScsc,
        Algorithm::LpdCsc,
        Algorithm::Olpd,
        Algorithm::Ppm,
        Algorithm::Pd,
        Algorithm::Mp,
        Algorithm::MpBal,
        Algorithm::Ogda,
        Algorithm::Gda,
    ];
    for alg in algs {
        let rec = RecorderOptions {
            record_gap: false,
            ..Default::default()
        };
        let out = run_algorithm(
            &p,
            Some(&cert),
            &alg,
            &x0,
            &y0,
            3000,
            rec,
            &StepOverride::default(),
        )
        .unwrap();
        let first = out.records.first().unwrap().dist_sq.unwrap();
        let last = out.records.last().unwrap().dist_sq.unwrap();
        assert!(last < 1e-3 * first, "{}: {first} -> {last}", alg.name());
    }
}

#[test]
fn trace_file_round_trip() {
    let p = graded();
    let cert = solve_saddle_exact(&p).unwrap();
    let out = run_algorithm(
        &p,
        Some(&cert),
        &Algorithm::LpdScsc,
        &default_start(4, 5),
        &default_start(4, 6),
        40,
        RecorderOptions {
            every: 7,
            ..Default::default()
        },
        &StepOverride::default(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trace_csv(&out.records, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_trace_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(back, out.records);
    // every 7th iterate plus the last
    let ks: Vec<usize> = back.iter().map(|r| r.k).collect();
    assert_eq!(ks, vec![0, 7, 14, 21, 28, 35, 40]);
}

#[test]
fn policy_evaluation_from_saved_trace() {
    let trace = gen_synthetic_mdp_trace(400, 5, 0.95, 8).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mdp.csv");
    trace.save(&path).unwrap();
    let loaded = MdpTrace::load(&path, 0.95).unwrap();
    let (a, b) = (
        build_policy_eval(&trace, 1.0).unwrap(),
        build_policy_eval(&loaded, 1.0).unwrap(),
    );
    assert!((a.coupling.matrix() - b.coupling.matrix()).amax() < 1e-12);
    let cert = solve_saddle_exact(&b).unwrap();
    let out = run_algorithm(
        &b,
        Some(&cert),
        &Algorithm::LpdScsc,
        &DVector::zeros(5),
        &DVector::zeros(5),
        400,
        RecorderOptions::default(),
        &StepOverride::default(),
    )
    .unwrap();
    assert!(out.records.last().unwrap().gap.unwrap() < 1e-8);
}

#[test]
fn robust_least_squares_with_growing_schedule() {
    // f = ‖Ax‖² is flat along the null space of A, so only the max block is
    // strongly concave
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
    let y0 = DVector::from_vec(vec![1.0, 0.0, 2.0]);
    let p = build_robust_least_squares(&a, &y0, 3.0).unwrap();
    assert_eq!(p.mu_x(), 0.0);
    // minimizers in x form a line, so no unique saddle exists
    assert!(solve_saddle(&p).is_err());
    let out = run_algorithm(
        &p,
        None,
        &Algorithm::LpdCsc,
        &DVector::from_vec(vec![1.0, 1.0]),
        &DVector::zeros(3),
        2000,
        RecorderOptions::default(),
        &StepOverride::default(),
    )
    .unwrap();
    let g = out.records.last().unwrap().gap.unwrap();
    assert!(g < 1e-4, "gap {g}");
    assert!(!out.transposed);
}

#[test]
fn transposed_growing_schedule_reports_original_blocks() {
    // strongly convex in x only: solved as the transposed problem
    let f = QuadraticFunction::new(
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![1.0, -1.0]),
        0.0,
    )
    .unwrap();
    let h = QuadraticFunction::new(DMatrix::zeros(2, 2), DVector::zeros(2), 0.0).unwrap();
    let p = BilinearProblem::new(
        f.into(),
        h.into(),
        Coupling::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).unwrap(),
        FeasibleSet::unconstrained(2),
        FeasibleSet::cube(2, 3.0),
    )
    .unwrap();
    let out = run_algorithm(
        &p,
        None,
        &Algorithm::LpdCsc,
        &DVector::zeros(2),
        &DVector::zeros(2),
        3000,
        RecorderOptions::default(),
        &StepOverride::default(),
    )
    .unwrap();
    assert!(out.transposed);
    assert_eq!((out.x.len(), out.y.len()), (2, 2));
    let g = primal_dual_gap(&p, &out.x, &out.y, 1e-11).unwrap();
    assert!(g.upper() < 1e-4, "gap {}", g.upper());
}

#[test]
fn smoothing_on_bounded_flat_problem() {
    let f = QuadraticFunction::new(
        DMatrix::zeros(2, 2),
        DVector::from_vec(vec![0.3, -0.2]),
        0.0,
    )
    .unwrap();
    let h = QuadraticFunction::isotropic(2, 1.0).unwrap();
    let p = BilinearProblem::new(
        f.into(),
        h.into(),
        Coupling::new(DMatrix::identity(2, 2)).unwrap(),
        FeasibleSet::cube(2, 1.0),
        FeasibleSet::unconstrained(2),
    )
    .unwrap();
    let alg = Algorithm::LpdSmoothed {
        eps: 1e-3,
        lambda: None,
        radius: None,
    };
    let z = DVector::zeros(2);
    let out = run_algorithm(
        &p,
        None,
        &alg,
        &z,
        &z,
        100_000,
        RecorderOptions::default(),
        &StepOverride::default(),
    )
    .unwrap();
    let g = primal_dual_gap(&p, &out.x, &out.y, 1e-11).unwrap();
    assert!(g.upper() <= 1e-3, "gap {}", g.upper());
}
