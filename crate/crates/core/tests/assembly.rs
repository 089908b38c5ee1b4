use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stokes_darcy::assembly::*;
use stokes_darcy::basis::dim_p;
use stokes_darcy::case::{CaseId, ManufacturedCase};
use stokes_darcy::harness::relative_min_eigenvalue;
use stokes_darcy::mesh::build_coupled_mesh;
use stokes_darcy::quadrature::make_quadrature;
use stokes_darcy::solve::{solve_monolithic, Discretization};
use stokes_darcy::spaces::{element_quadrature, Spaces};

fn disc(id: CaseId, n: usize, k: usize) -> Discretization {
    Discretization::new(ManufacturedCase::new(id), n, k).unwrap()
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

#[test]
fn material_validation() {
    assert!(MaterialParams::new(1.0, 1.0, 1.0, 1.0).is_ok());
    assert!(MaterialParams::new(0.0, 1.0, 1.0, 1.0).is_err());
    assert!(MaterialParams::new(1.0, -1.0, 1.0, 1.0).is_err());
    assert!(MaterialParams::new(1.0, 1.0, f64::NAN, 1.0).is_err());
    assert!(MaterialParams::new(1.0, 1.0, 1.0, 0.0).is_err());
}

#[test]
fn deviatoric_operator() {
    let t = [1.5, -0.25, 0.75];
    let a = deviatoric(t);
    assert_eq!(deviatoric(a), a);
    assert!((a[0] + a[1]).abs() < 1e-16);
    assert_eq!(deviatoric([2.0, 2.0, 0.0]), [0.0, 0.0, 0.0]);
}

#[test]
fn block_operations() {
    let mut b = Block::new(2, 3);
    b.push(0, 1, 2.0);
    b.push(1, 2, -1.0);
    b.push(0, 1, 1.0);
    b.push(1, 0, 0.0);
    assert_eq!(b.entries.len(), 3);
    assert_eq!(b.matvec(&[1.0, 1.0, 1.0]), vec![3.0, -1.0]);
    assert_eq!(b.transpose().to_dense(), b.to_dense().transpose());
    assert_eq!(b.compressed().entries.len(), 2);
    assert_eq!(b.bilinear(&[1.0, 2.0], &[0.0, 1.0, 1.0]), 1.0);
    let r = b.restrict(&[None, Some(0)], 1, &[None, None, Some(0)], 1);
    assert_eq!(r.to_dense()[(0, 0)], -1.0);
    assert_eq!(b.scaled(2.0).max_abs(), 6.0);
}

#[test]
fn adjoint_identity() {
    for k in 1..=3 {
        for id in [CaseId::Example1 { mu: 1.0 }, CaseId::Example4] {
            let d = disc(id, 4, k);
            let bs = d.blocks.b_d_star.to_dense();
            let diff = (&bs - d.blocks.b_d.transpose().to_dense()).abs().max() / bs.abs().max();
            assert!(diff < 1e-13, "k={k} {id:?}: {diff}");
        }
    }
}

#[test]
fn stress_form_integration_by_parts() {
    for k in 1..=3 {
        let d = disc(CaseId::Example1 { mu: 1.0 }, 2, k);
        let a = assemble_a_s(&d.mesh, &d.spaces, &d.rule).to_dense();
        let b = assemble_a_s_by_parts(&d.mesh, &d.spaces, &d.rule).to_dense();
        assert!((a - b).abs().max() < 1e-12, "k={k}");
    }
}

#[test]
fn interface_blocks_agree() {
    let d = disc(CaseId::Example2, 4, 2);
    let a = d.blocks.interface_vp.to_dense();
    let b = d.blocks.interface_qu.to_dense();
    assert!((a - b.transpose()).abs().max() < 1e-15);
}

#[test]
fn interface_measure() {
    // (1 . n_S, 1) over the interface equals minus its length for the downward normal
    for k in 1..=2 {
        let d = disc(CaseId::Example1 { mu: 1.0 }, 4, k);
        let (mesh, sp) = (&d.mesh, &d.spaces);
        let ones_u = sp.us.interpolate(mesh, &d.rule, &|_| vec![0.0, 1.0]);
        let ones_p = sp.pd.interpolate(mesh, &d.rule, &|_| vec![1.0]);
        let v = d.blocks.interface_vp.bilinear(&ones_u.values, &ones_p.values);
        assert!((v + 1.0).abs() < 1e-13, "{v}");
        let m = d.blocks.interface_pressure.bilinear(&ones_p.values, &ones_p.values);
        assert!((m - 1.0).abs() < 1e-13);
    }
}

#[test]
fn stabilization_is_semidefinite() {
    let d = disc(CaseId::Example1 { mu: 1.0 }, 2, 2);
    for b in [&d.blocks.stab, &d.blocks.normal_trace, &d.blocks.interface_pressure, &d.blocks.mass_darcy] {
        assert!(relative_min_eigenvalue(b) > -1e-12);
    }
    assert!(relative_min_eigenvalue(&d.blocks.mass_darcy) > 1e-8);
}

#[test]
fn stress_mass_kernel_dimension() {
    for k in 1..=3 {
        let d = disc(CaseId::Example1 { mu: 1.0 }, 2, k);
        let m = d.blocks.mass_sigma.to_dense();
        let ev = m.symmetric_eigenvalues();
        let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let zero = ev.iter().filter(|v| v.abs() < 1e-12 * max).count();
        assert_eq!(zero, d.mesh.n_stokes * dim_p(k - 1), "k={k}");
        assert!(ev.iter().all(|v| *v > -1e-12 * max));
    }
}

#[test]
fn stress_mass_scales_with_viscosity() {
    let mesh = build_coupled_mesh(ManufacturedCase::new(CaseId::Zero).stokes, ManufacturedCase::new(CaseId::Zero).darcy, 2).unwrap();
    let sp = Spaces::build(&mesh, 1).unwrap();
    let rule = make_quadrature(1).unwrap();
    let a = assemble_mass_sigma(&mesh, &sp, &rule, &MaterialParams::new(1.0, 1.0, 1.0, 1.0).unwrap()).to_dense();
    let b = assemble_mass_sigma(&mesh, &sp, &rule, &MaterialParams::new(0.5, 1.0, 1.0, 1.0).unwrap()).to_dense();
    assert!((a * 2.0 - b).abs().max() < 1e-14);
}

#[test]
fn monolithic_matrix_is_symmetric() {
    let d = disc(CaseId::Example1 { mu: 1.0 }, 2, 2);
    let m = d.monolithic_system().unwrap().matrix.to_dense();
    assert!((&m - m.transpose()).abs().max() < 1e-13 * m.abs().max());
}

#[test]
fn zero_data_gives_zero_rhs() {
    let d = disc(CaseId::Zero, 2, 1);
    let r = &d.rhs;
    assert!(r.sigma.iter().chain(&r.us).chain(&r.pd).chain(&r.pd_data).all(|v| *v == 0.0));
}

#[test]
fn corrections_only_touch_interface_rows() {
    let case = ManufacturedCase::new(CaseId::Example1 { mu: 1.0 });
    let d = disc(case.id, 2, 1);
    let plain = assemble_rhs_with(&case, &d.mesh, &d.spaces, &d.rule, &d.params, false);
    assert_eq!(plain.sigma, d.rhs.sigma);
    let changed: Vec<usize> = (0..plain.us.len()).filter(|&i| plain.us[i] != d.rhs.us[i]).collect();
    assert!(!changed.is_empty());
    let touching: Vec<usize> = d.mesh.interface.iter().map(|&e| d.mesh.edges[e].left).collect();
    for i in changed {
        let owner = d.spaces.us.elements.iter().find(|le| le.dofs.contains(&i)).unwrap().tri;
        assert!(touching.contains(&owner));
    }
}

#[test]
fn robin_blocks_validation() {
    let d = disc(CaseId::Example2, 2, 1);
    assert!(build_robin_blocks(&d.blocks, &d.rhs, &d.spaces, 0.0, 0.1).is_err());
    assert!(build_robin_blocks(&d.blocks, &d.rhs, &d.spaces, 1.0, -0.1).is_err());
    let (p, f) = build_robin_blocks(&d.blocks, &d.rhs, &d.spaces, 1.0, 0.5).unwrap();
    assert_eq!(p.n(), d.spaces.ud.n_dofs() + d.spaces.pd.n_free);
    assert_eq!(f.n(), d.spaces.sigma.n_dofs() + d.spaces.us.n_dofs());
}

#[test]
fn monolithic_layout() {
    let d = disc(CaseId::Example1 { mu: 1.0 }, 2, 1);
    let s = d.monolithic_system().unwrap();
    assert_eq!(s.n(), d.spaces.n_unknowns());
    assert_eq!(s.offsets.total, s.rhs.len());
    assert_eq!(s.offsets.us, d.spaces.sigma.n_dofs());
    assert!(s.to_sparse().is_ok());
}

#[test]
fn symmetric_forms_are_symmetric_on_random_vectors() {
    let d = disc(CaseId::Example3 { mu: 1.0 }, 2, 2);
    for (name, b) in [("stab", &d.blocks.stab), ("mass_sigma", &d.blocks.mass_sigma), ("mass_darcy", &d.blocks.mass_darcy)] {
        let x = random(b.rows, 1);
        let y = random(b.rows, 2);
        let a = b.bilinear(&x, &y);
        let c = b.bilinear(&y, &x);
        assert!((a - c).abs() < 1e-12 * (1.0 + a.abs()), "{name}");
    }
}

fn max_errors(id: CaseId, k: usize, n: usize) -> [f64; 4] {
    let d = disc(id, n, k);
    let s = solve_monolithic(&d).unwrap();
    let case = d.case;
    let mut e = [0.0f64; 4];
    for t in d.mesh.stokes_triangles() {
        let (pts, _) = element_quadrature(&d.mesh, t, &d.rule);
        let u = d.spaces.us.evaluate(&d.mesh, t, &s.us.values, &pts);
        let p = s.recover_pressure(&d, t, &pts);
        for (q, x) in pts.iter().enumerate() {
            let ex = case.u_s(*x);
            e[0] = e[0].max((u[2 * q] - ex[0]).abs()).max((u[2 * q + 1] - ex[1]).abs());
            e[1] = e[1].max((p[q] - case.p_s(*x)).abs());
        }
    }
    for t in d.mesh.darcy_triangles() {
        let (pts, _) = element_quadrature(&d.mesh, t, &d.rule);
        let u = d.spaces.ud.evaluate(&d.mesh, t, &s.ud.values, &pts);
        let p = d.spaces.pd.evaluate(&d.mesh, t, &s.pd.values, &pts);
        for (q, x) in pts.iter().enumerate() {
            let ex = case.u_d(*x);
            e[2] = e[2].max((u[2 * q] - ex[0]).abs()).max((u[2 * q + 1] - ex[1]).abs());
            e[3] = e[3].max((p[q] - case.p_d(*x)).abs());
        }
    }
    e
}

#[test]
fn polynomial_solution_is_reproduced() {
    for k in 2..=3 {
        for n in [1, 2] {
            let e = max_errors(CaseId::Polynomial, k, n);
            assert!(e.iter().all(|v| *v < 1e-10), "k={k} n={n}: {e:?}");
        }
    }
}

#[test]
fn polynomial_solution_is_not_reproduced_at_lowest_degree() {
    let e = max_errors(CaseId::Polynomial, 1, 2);
    assert!(e[0] > 1e-4);
}
