//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). Failures are
//! reported but the exit status is zero unless `ACCEPTANCE_STRICT=1`.

use std::f64::consts::PI;
use std::time::Instant;

use stokes_darcy::case::{CaseId, ManufacturedCase};
use stokes_darcy::harness::*;
use stokes_darcy::mesh::{build_coupled_mesh, CoupledMesh, Rect};
use stokes_darcy::quadrature::QuadratureRule;
use stokes_darcy::solve::{run_ddm, solve_monolithic, DdmOptions, Discretization};
use stokes_darcy::spaces::{build_space, element_quadrature, interpolate_ih, interpolate_jh, DofSpace, SpaceKind};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn fmt4(a: [f64; 4]) -> String {
    format!("({:.2}, {:.2}, {:.2}, {:.2})", a[0], a[1], a[2], a[3])
}

fn within_order(o: [f64; 4], k: usize, tol: f64) -> bool {
    let want = [k + 1, k, k + 1, k + 1];
    (0..4).all(|i| (o[i] - want[i] as f64).abs() <= tol)
}

/// Printed errors of the mu = 1 table, per degree, rows n = 2..32.
const TABLE_MU1: [[[f64; 4]; 5]; 3] = [
    [
        [2.42e-02, 5.61e-01, 1.69e-02, 6.90e-03],
        [6.70e-03, 3.02e-01, 4.10e-03, 1.70e-03],
        [1.70e-03, 1.56e-01, 9.45e-04, 4.29e-04],
        [4.44e-04, 7.95e-02, 2.46e-04, 1.07e-04],
        [1.12e-04, 4.01e-02, 6.09e-05, 2.68e-05],
    ],
    [
        [2.80e-03, 8.71e-02, 7.86e-04, 3.00e-04],
        [3.91e-04, 2.35e-02, 8.64e-05, 3.69e-05],
        [5.25e-05, 6.20e-03, 1.02e-05, 4.58e-06],
        [6.79e-06, 1.60e-03, 1.27e-06, 5.73e-07],
        [8.64e-07, 4.04e-04, 1.58e-07, 7.16e-08],
    ],
    [
        [2.19e-04, 7.60e-03, 4.96e-05, 7.61e-06],
        [1.42e-05, 1.00e-03, 2.33e-06, 4.18e-07],
        [9.00e-07, 1.29e-04, 1.31e-07, 2.58e-08],
        [5.66e-08, 1.64e-05, 7.80e-09, 1.61e-09],
        [3.55e-09, 2.06e-06, 4.77e-10, 1.00e-10],
    ],
];

const ORDER_TOL: f64 = 0.15;
const MAGNITUDE_FACTOR: f64 = 2.0;

/// Full table range for every degree; the k = 3 allowance to stop at n = 16
/// is not needed.
fn levels(_k: usize) -> Vec<usize> {
    vec![2, 4, 8, 16, 32]
}

fn criterion_1() -> Outcome {
    let case = ManufacturedCase::new(CaseId::Example1 { mu: 1.0 });
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let t = Instant::now();
        let rows = convergence_study(case, k, &levels(k), SolveMode::Monolithic).expect("sweep");
        let secs = t.elapsed().as_secs_f64();
        let o = rows.last().unwrap().orders.unwrap();
        let orders_ok = within_order(o, k, ORDER_TOL);
        let mut worst = 1.0f64;
        for (i, r) in rows.iter().enumerate() {
            let e = r.errors.unwrap().as_array();
            for v in 0..4 {
                let ratio = e[v] / TABLE_MU1[k - 1][i][v];
                worst = worst.max(ratio.max(1.0 / ratio));
            }
        }
        let budget = if k == 1 { 60.0 } else { 600.0 };
        let ok = orders_ok && worst <= MAGNITUDE_FACTOR && secs < budget;
        pass &= ok;
        parts.push(format!("k={k}: orders {} worst ratio {:.3} time {:.1}s", fmt4(o), worst, secs));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_2() -> Outcome {
    let case = ManufacturedCase::new(CaseId::Example1 { mu: 1e-4 });
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let rows = convergence_study(case, k, &levels(k), SolveMode::Monolithic).expect("sweep");
        let o = rows.last().unwrap().orders.unwrap();
        pass &= within_order(o, k, ORDER_TOL);
        let mut s = format!("k={k}: orders {}", fmt4(o));
        if k == 1 {
            let e = rows.last().unwrap().errors.unwrap().u_s;
            let ratio = e / 2.17e-4;
            pass &= ratio <= MAGNITUDE_FACTOR && ratio >= 1.0 / MAGNITUDE_FACTOR;
            s += &format!(" u_s(n=32) {e:.3e} vs 2.17e-4");
        }
        parts.push(s);
    }
    Outcome::new(pass, parts.join("; "))
}

/// Continuity residual relative to max|u_S| for monolithic solves.
fn relative_continuity(case: ManufacturedCase, n: usize) -> f64 {
    let d = Discretization::new(case, n, 1).expect("discretization");
    let s = solve_monolithic(&d).expect("solve");
    interface_continuity_residual(&s, &d) / max_fluid_velocity(&s, &d)
}

const CONTINUITY_TOL: f64 = 1e-8;

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    for id in [CaseId::Example1 { mu: 1.0 }, CaseId::Example2, CaseId::Example3 { mu: 1.0 }] {
        for n in [4, 8, 16] {
            worst = worst.max(relative_continuity(ManufacturedCase::new(id), n));
        }
    }
    Outcome::new(worst <= CONTINUITY_TOL, format!("max relative residual {worst:.2e} (tolerance {CONTINUITY_TOL:.0e})"))
}

fn ddm_rows(dp: f64, df: f64, ns: &[usize]) -> Vec<stokes_darcy::harness::ConvergenceRow> {
    let opts = DdmOptions::new(dp, df).unwrap();
    convergence_study(ManufacturedCase::new(CaseId::Example2), 1, ns, SolveMode::Ddm(opts)).expect("sweep")
}

fn iterations(rows: &[stokes_darcy::harness::ConvergenceRow]) -> Vec<usize> {
    rows.iter().map(|r| r.iterations.expect("converged")).collect()
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.windows(2).all(|w| w[1] > w[0])
}

fn criterion_4(sweeps: &mut Vec<(String, Vec<stokes_darcy::harness::ConvergenceRow>)>) -> Outcome {
    let ns = [4, 8, 16];
    let small = ddm_rows(0.1, 0.1, &ns);
    let large = ddm_rows(0.5, 0.5, &ns);
    let a = iterations(&small);
    let b = iterations(&large);
    let target = [22.0, 42.0, 76.0];
    let within = a.iter().zip(target).all(|(&i, t)| (i as f64 - t).abs() <= 0.3 * t);
    let pass_small = within && strictly_increasing(&a);
    let pass_large = strictly_increasing(&b) && b[0] > 100;
    sweeps.push(("delta=0.1".into(), small));
    sweeps.push(("delta=0.5".into(), large));
    Outcome::new(
        pass_small && pass_large,
        format!("delta=0.1: {a:?} vs [22, 42, 76] ({}); delta=0.5: {b:?} ({})", ok(pass_small), ok(pass_large)),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "miss"
    }
}

fn spread(v: &[usize]) -> usize {
    v.iter().max().unwrap() - v.iter().min().unwrap()
}

fn criterion_5(sweeps: &mut Vec<(String, Vec<stokes_darcy::harness::ConvergenceRow>)>) -> Outcome {
    let ns = [4, 8, 16, 32];
    let quarter = ddm_rows(1.0, 0.25, &ns);
    let half = ddm_rows(1.0, 0.5, &ns);
    let q = iterations(&quarter);
    let h = iterations(&half);
    let pass_q = q.iter().all(|&i| (i as f64 - 16.0).abs() <= 5.0) && spread(&q) <= 2;
    let pass_h = h.iter().all(|&i| i as f64 >= 0.7 * 28.0 && i as f64 <= 1.3 * 30.0) && spread(&h) <= 2;
    sweeps.push(("df=1/4".into(), quarter));
    sweeps.push(("df=1/2".into(), half));
    Outcome::new(pass_q && pass_h, format!("df=1/4: {q:?} ({}); df=1/2: {h:?} ({})", ok(pass_q), ok(pass_h)))
}

fn criterion_6(sweeps: &[(String, Vec<stokes_darcy::harness::ConvergenceRow>)]) -> Outcome {
    let mono = convergence_study(ManufacturedCase::new(CaseId::Example2), 1, &[4, 8, 16, 32], SolveMode::Monolithic).expect("sweep");
    let mut worst = 0.0f64;
    for (_, rows) in sweeps {
        for r in rows {
            let m = mono.iter().find(|m| m.n == r.n).unwrap().errors.unwrap().as_array();
            let e = r.errors.unwrap().as_array();
            for i in 0..4 {
                worst = worst.max((m[i] - e[i]).abs());
            }
        }
    }
    Outcome::new(worst <= 1e-5, format!("max |DDM - monolithic| error difference {worst:.2e} over {} sweeps", sweeps.len()))
}

fn cycle_rate(df: f64, n: usize) -> f64 {
    let d = Discretization::new(ManufacturedCase::new(CaseId::Example2), n, 1).unwrap();
    let r = run_ddm(&d, &DdmOptions::new(1.0, df).unwrap()).expect("ddm");
    fitted_rate(&r.history, 1, 2).expect("history too short")
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for ratio in [0.5, 0.25] {
        let r16 = cycle_rate(ratio, 16);
        let r8 = cycle_rate(ratio, 8);
        let r32 = cycle_rate(ratio, 32);
        let dev = (r16 - ratio) / ratio;
        let var = (r8 - r32).abs() / r8.max(r32);
        let ok_rate = dev.abs() <= 0.3;
        let ok_var = var < 0.1;
        pass &= ok_rate && ok_var;
        parts.push(format!(
            "ratio {ratio}: rate {r16:.3} ({:+.0}%, {}), n=8/32 {r8:.3}/{r32:.3} ({:.1}%, {})",
            100.0 * dev,
            ok(ok_rate),
            100.0 * var,
            ok(ok_var)
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_8() -> Outcome {
    let mut failed = Vec::new();
    let mut count = 0;
    for k in 1..=3 {
        for c in check_invariants(ManufacturedCase::new(CaseId::Example1 { mu: 1.0 }), 2, k).expect("checks") {
            count += 1;
            if !c.pass {
                failed.push(format!("{} k={k} ({:.2e} > {:.0e})", c.name, c.value, c.tolerance));
            }
        }
    }
    let detail = if failed.is_empty() { format!("{count} checks over k=1..3 at n=2") } else { failed.join(", ") };
    Outcome::new(failed.is_empty(), detail)
}

fn unit_square_pair(n: usize) -> CoupledMesh {
    build_coupled_mesh(Rect::new(0.0, 1.0, 1.0, 2.0).unwrap(), Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), n).unwrap()
}

fn l2_distance(m: &CoupledMesh, sp: &DofSpace, c: &[f64], f: &dyn Fn([f64; 2]) -> Vec<f64>) -> f64 {
    let rule = QuadratureRule::with_degree(12);
    let nc = sp.kind.ncomp();
    let mut s = 0.0;
    for le in &sp.elements {
        let (pts, w) = element_quadrature(m, le.tri, &rule);
        let v = sp.evaluate(m, le.tri, c, &pts);
        for q in 0..pts.len() {
            let ex = f(pts[q]);
            for comp in 0..nc {
                s += w[q] * (v[q * nc + comp] - ex[comp]).powi(2);
            }
        }
    }
    s.sqrt()
}

fn interpolation_orders(k: usize) -> (f64, f64) {
    let q = |p: [f64; 2]| (PI * p[0]).sin() * (PI * p[1]).cos();
    let v = |p: [f64; 2]| [(PI * p[0]).cos() * p[1].exp(), (2.0 * p[0] + p[1]).sin()];
    let mut eq = Vec::new();
    let mut ev = Vec::new();
    for n in [8, 16] {
        let m = unit_square_pair(n);
        let rule = QuadratureRule::with_degree(2 * k + 2);
        let pd = build_space(SpaceKind::PD, &m, k).unwrap();
        let ud = build_space(SpaceKind::UD, &m, k).unwrap();
        let ih = interpolate_ih(&pd, &m, &rule, &q).unwrap();
        eq.push(l2_distance(&m, &pd, &ih.values, &|p| vec![q(p)]));
        let jh = interpolate_jh(&ud, &m, &rule, &v).unwrap();
        ev.push(l2_distance(&m, &ud, &jh.values, &|p| v(p).to_vec()));
    }
    ((eq[0] / eq[1]).log2(), (ev[0] / ev[1]).log2())
}

fn criterion_9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=2 {
        let (rp, rv) = interpolation_orders(k);
        let target = (k + 1) as f64;
        pass &= (rp - target).abs() <= ORDER_TOL && (rv - target).abs() <= ORDER_TOL;
        parts.push(format!("k={k}: I_h {rp:.2}, J_h {rv:.2}"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_10() -> Outcome {
    let ns = [4, 8, 16];
    let mut pass = true;
    let mut counts: Vec<Vec<usize>> = Vec::new();
    for mu in [1.0, 1e-2, 1e-4] {
        let opts = DdmOptions::new(mu, mu / 4.0).unwrap();
        let rows = convergence_study(ManufacturedCase::new(CaseId::Example3 { mu }), 1, &ns, SolveMode::Ddm(opts)).expect("sweep");
        let its: Vec<Option<usize>> = rows.iter().map(|r| r.iterations).collect();
        pass &= its.iter().all(Option::is_some);
        counts.push(its.into_iter().map(|i| i.unwrap_or(usize::MAX)).collect());
    }
    for j in 0..ns.len() {
        pass &= counts[0][j] <= counts[1][j] && counts[1][j] <= counts[2][j];
    }
    let cavity = ManufacturedCase::new(CaseId::Example4);
    let mut cavity_its = Vec::new();
    let mut worst = 0.0f64;
    for n in ns {
        let d = Discretization::new(cavity, n, 1).unwrap();
        match run_ddm(&d, &DdmOptions::new(1.0, 0.25).unwrap()) {
            Ok(r) => cavity_its.push(r.iterations),
            Err(_) => pass = false,
        }
        worst = worst.max(relative_continuity(cavity, n));
    }
    pass &= worst <= CONTINUITY_TOL;
    Outcome::new(
        pass,
        format!(
            "Example 3 iterations (mu=1, 1e-2, 1e-4) x n=4/8/16: {counts:?}; Example 4 iterations {cavity_its:?}, continuity {worst:.2e}"
        ),
    )
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").map(|v| v == "1").unwrap_or(false);
    let mut sweeps = Vec::new();
    let report = |i: usize, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!("{} criterion {i}: {} [{:.1}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail, t.elapsed().as_secs_f64());
        o.pass
    };
    let mut results = vec![
        report(1, &mut criterion_1),
        report(2, &mut criterion_2),
        report(3, &mut criterion_3),
        report(4, &mut || criterion_4(&mut sweeps)),
    ];
    results.push(report(5, &mut || criterion_5(&mut sweeps)));
    results.push(report(6, &mut || criterion_6(&sweeps)));
    results.push(report(7, &mut criterion_7));
    results.push(report(8, &mut criterion_8));
    results.push(report(9, &mut criterion_9));
    results.push(report(10, &mut criterion_10));
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
