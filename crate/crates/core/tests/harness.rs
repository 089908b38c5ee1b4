use stokes_darcy::case::{CaseId, ManufacturedCase};
use stokes_darcy::error::Error;
use stokes_darcy::harness::*;
use stokes_darcy::quadrature::QuadratureRule;
use stokes_darcy::solve::{run_ddm, solve_monolithic, DdmOptions, Discretization, Solution};
use stokes_darcy::spaces::{interpolate_ih, interpolate_jh};

fn disc(id: CaseId, n: usize, k: usize) -> Discretization {
    Discretization::new(ManufacturedCase::new(id), n, k).unwrap()
}

fn injected(d: &Discretization) -> Solution {
    let (m, sp, r) = (&d.mesh, &d.spaces, &d.rule);
    let c = d.case;
    Solution {
        sigma: sp.sigma.interpolate(m, r, &|p| c.sigma(p).to_vec()),
        us: sp.us.interpolate(m, r, &|p| c.u_s(p).to_vec()),
        ud: interpolate_jh(&sp.ud, m, r, &|p| c.u_d(p)).unwrap(),
        pd: interpolate_ih(&sp.pd, m, r, &|p| c.p_d(p)).unwrap(),
    }
}

#[test]
fn injected_exact_solution_has_no_error() {
    for k in 2..=3 {
        let d = disc(CaseId::Polynomial, 2, k);
        let e = l2_errors(&injected(&d), &d, &error_rule(k)).unwrap();
        assert!(e.as_array().iter().all(|v| *v <= 1e-11), "k={k}: {e:?}");
    }
}

#[test]
fn errors_need_an_exact_solution() {
    let d = disc(CaseId::Example4, 4, 1);
    let s = solve_monolithic(&d).unwrap();
    assert!(matches!(l2_errors(&s, &d, &d.rule), Err(Error::Unsupported(_))));
}

#[test]
fn errors_do_not_depend_on_quadrature() {
    for k in 1..=3 {
        let d = disc(CaseId::Example1 { mu: 1.0 }, 4, k);
        let s = solve_monolithic(&d).unwrap();
        let a = l2_errors(&s, &d, &error_rule(k)).unwrap().as_array();
        let b = l2_errors(&s, &d, &QuadratureRule::with_degree(2 * error_rule(k).degree)).unwrap().as_array();
        for i in 0..4 {
            assert!(((a[i] - b[i]) / b[i]).abs() < 1e-9, "k={k} variable {i}: {} vs {}", a[i], b[i]);
        }
    }
}

#[test]
fn example_one_orders_k1() {
    let rows = convergence_study(ManufacturedCase::new(CaseId::Example1 { mu: 1.0 }), 1, &[2, 4, 8, 16, 32], SolveMode::Monolithic).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows[0].orders.is_none());
    let o = rows[4].orders.unwrap();
    let expected = [2.0, 1.0, 2.0, 2.0];
    for i in 0..4 {
        assert!((o[i] - expected[i]).abs() <= 0.15, "{o:?}");
    }
}

#[test]
fn example_one_pressure_orders_k2() {
    let rows = convergence_study(ManufacturedCase::new(CaseId::Example1 { mu: 1.0 }), 2, &[2, 4, 8, 16], SolveMode::Monolithic).unwrap();
    for r in &rows[1..] {
        assert!((r.orders.unwrap()[3] - 3.0).abs() < 0.25, "{:?}", r.orders);
    }
}

#[test]
fn single_level_has_no_orders() {
    let rows = convergence_study(ManufacturedCase::new(CaseId::Example2), 1, &[4], SolveMode::Monolithic).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].orders.is_none());
    let csv = rows_to_csv(&rows);
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().nth(1).unwrap().ends_with(','));
    assert!(convergence_study(ManufacturedCase::new(CaseId::Example2), 1, &[], SolveMode::Monolithic).is_err());
}

#[test]
fn failing_level_does_not_stop_sweep() {
    // Example 4 needs multiples of four
    let rows = convergence_study(ManufacturedCase::new(CaseId::Example4), 1, &[2, 4], SolveMode::Monolithic).unwrap();
    assert!(rows[0].failure.is_some());
    assert!(rows[1].failure.is_none());
}

#[test]
fn ddm_sweep_matches_monolithic() {
    let case = ManufacturedCase::new(CaseId::Example2);
    let ns = [4, 8];
    let mono = convergence_study(case, 1, &ns, SolveMode::Monolithic).unwrap();
    let ddm = convergence_study(case, 1, &ns, SolveMode::Ddm(DdmOptions::new(1.0, 0.5).unwrap())).unwrap();
    for (a, b) in mono.iter().zip(&ddm) {
        let (a, b) = (a.errors.unwrap().as_array(), b.errors.unwrap().as_array());
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-5);
        }
    }
    assert!(ddm.iter().all(|r| r.iterations.is_some() && !r.history.is_empty()));
    let csv = iterations_to_csv(&ddm);
    assert!(csv.starts_with("h_inv,iterations\n4,"));
}

#[test]
fn continuity_residual() {
    for id in [CaseId::Example1 { mu: 1.0 }, CaseId::Example2, CaseId::Example3 { mu: 1.0 }] {
        for k in 1..=2 {
            let d = disc(id, 4, k);
            let s = solve_monolithic(&d).unwrap();
            assert!(interface_continuity_residual(&s, &d) <= 1e-8 * max_fluid_velocity(&s, &d));
        }
    }
    let d = disc(CaseId::Zero, 2, 1);
    let s = solve_monolithic(&d).unwrap();
    assert_eq!(interface_continuity_residual(&s, &d), 0.0);
}

#[test]
fn continuity_residual_detects_perturbation() {
    let d = disc(CaseId::Example3 { mu: 1.0 }, 4, 1);
    let mut s = solve_monolithic(&d).unwrap();
    let (_, td) = d.mesh.interface_pair(d.mesh.interface[0]);
    let dof = d.spaces.ud.element(td).dofs.last().copied().unwrap();
    s.ud.values[dof] += 1e-3;
    assert!(interface_continuity_residual(&s, &d) > 1e-6);
}

#[test]
fn local_conservation() {
    for k in 1..=2 {
        let d = disc(CaseId::Example1 { mu: 1.0 }, 4, k);
        let s = solve_monolithic(&d).unwrap();
        let c = conservation_residuals(&s, &d).unwrap();
        assert!(c.darcy <= 1e-10 * c.darcy_scale, "{c:?}");
        assert!(c.stokes <= 1e-10);
    }
}

#[test]
fn conservation_without_porous_source() {
    let d = disc(CaseId::Polynomial, 2, 2);
    assert!((d.case.f_d([0.3, 0.4])).abs() < 1e-14);
    let s = solve_monolithic(&d).unwrap();
    let c = conservation_residuals(&s, &d).unwrap();
    assert!(c.darcy < 1e-12);
}

#[test]
fn conservation_detects_perturbation() {
    let d = disc(CaseId::Example2, 4, 1);
    let mut s = solve_monolithic(&d).unwrap();
    s.ud.values[0] += 1e-2;
    s.us.values[0] += 1e-2;
    let c = conservation_residuals(&s, &d).unwrap();
    assert!(c.darcy > 1e-6);
    assert!(c.stokes > 1e-6);
}

#[test]
fn invariant_suite_passes() {
    let r = check_invariants(ManufacturedCase::new(CaseId::Example1 { mu: 1.0 }), 2, 1).unwrap();
    assert_eq!(r.len(), 9);
    for c in r {
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn duality_is_exact() {
    for k in 1..=3 {
        assert!(duality_defect(&disc(CaseId::Example2, 2, k)) < 1e-10);
    }
}

#[test]
fn example_bundle_shapes() {
    let p = ExampleParams { ns: vec![2, 4, 8, 16, 32], ..Default::default() };
    let b = run_example(1, &p).unwrap();
    let table = &b.files.iter().find(|f| f.0 == "errors.csv").unwrap().1;
    assert_eq!(table.lines().count(), 1 + 4 * 5);
    assert!(b.iterations.is_none());
    assert!(run_example(9, &p).is_err());
}

#[test]
fn cavity_example_converges() {
    let p = ExampleParams { ns: vec![8], ddm: Some(DdmOptions::new(1.0, 0.25).unwrap()), sample_density: 8, ..Default::default() };
    let b = run_example(4, &p).unwrap();
    assert!(b.rows.is_empty());
    assert!(b.iterations.unwrap() > 1);
    assert!(b.continuity < 1e-12);
    let names: Vec<&str> = b.files.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(names, ["iterations.csv", "samples_speed.csv", "samples_pressure.csv"]);
    let samples = &b.files[1].1;
    assert!(samples.starts_with("x,y,value\n"));
    // fluid region (0,1)x(1,1.25) plus porous region (0,1)x(0.25,1) on an 8-per-unit grid
    assert_eq!(samples.lines().count(), 1 + 9 * 3 + 9 * 7);
    let dir = tempfile::tempdir().unwrap();
    let written = b.write_to(dir.path()).unwrap();
    assert_eq!(written.len(), 3);
}

/// Increments of each parity class decrease after the first iteration.
fn parity_monotone(h: &[(f64, f64)]) -> bool {
    let s: Vec<f64> = h.iter().map(|x| x.0 + x.1).collect();
    (1..s.len().saturating_sub(2)).all(|i| s[i + 2] < s[i])
}

#[test]
fn cavity_increments_decrease() {
    let d = disc(CaseId::Example4, 8, 1);
    for df in [0.25, 0.5] {
        let r = run_ddm(&d, &DdmOptions::new(1.0, df).unwrap()).unwrap();
        assert!(parity_monotone(&r.history), "{:?}", r.history);
    }
}

#[test]
fn iterations_grow_with_robin_ratio() {
    let d = disc(CaseId::Example2, 8, 1);
    let its: Vec<usize> = [0.25, 0.5, 1.0]
        .iter()
        .map(|df| run_ddm(&d, &DdmOptions::new(1.0, *df).unwrap()).unwrap().iterations)
        .collect();
    assert!(its.windows(2).all(|w| w[0] <= w[1]), "{its:?}");
}

#[test]
fn observed_order_formula() {
    assert!((observed_order(4.0, 1.0, 2, 4) - 2.0).abs() < 1e-15);
    assert!((observed_order(8.0, 1.0, 4, 8) - 3.0).abs() < 1e-15);
}

#[test]
fn history_csv_format() {
    let csv = history_to_csv(&[(1.0, 0.5), (0.25, 0.125)]);
    assert_eq!(csv, "iter,res_stokes,res_darcy\n1,1.000000e0,5.000000e-1\n2,2.500000e-1,1.250000e-1\n");
}

#[test]
fn rate_of_geometric_sequence() {
    let h: Vec<(f64, f64)> = (0..20).map(|i| (0.5f64.powi(i), 0.0)).collect();
    assert!((fitted_rate(&h, 0, 1).unwrap() - 0.5).abs() < 1e-12);
    assert!((fitted_rate(&h, 2, 2).unwrap() - 0.25).abs() < 1e-12);
    assert!(fitted_rate(&h[..2], 0, 1).is_none());
}
