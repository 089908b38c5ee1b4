//! Error norms, convergence sweeps, invariant checks and example runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::case::{CaseId, ManufacturedCase};
use crate::error::{Error, Result};
use crate::mesh::{EdgeClass, Region};
use crate::assembly::MaterialParams;
use crate::quadrature::{make_quadrature, QuadratureRule};
use crate::solve::{run_ddm, solve_monolithic, DdmOptions, Discretization, Solution};
use crate::spaces::{edge_quadrature, element_quadrature, frob};

/// Variable names in table order.
pub const VARIABLES: [&str; 4] = ["u_s", "sigma", "u_d", "p_d"];

/// L2 errors of (fluid velocity, stress, porous velocity, porous pressure).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRecord {
    pub u_s: f64,
    pub sigma: f64,
    pub u_d: f64,
    pub p_d: f64,
}

impl ErrorRecord {
    pub fn as_array(&self) -> [f64; 4] {
        [self.u_s, self.sigma, self.u_d, self.p_d]
    }
}

/// Rule used for reported errors: degree 4k + 4, so that errors do not
/// depend on the quadrature at the printed precision.
pub fn error_rule(k: usize) -> QuadratureRule {
    QuadratureRule::with_degree(4 * k + 4)
}

/// L2 errors against the exact fields, integrated with `rule`.
pub fn l2_errors(sol: &Solution, disc: &Discretization, rule: &QuadratureRule) -> Result<ErrorRecord> {
    let case = &disc.case;
    if !case.has_exact() {
        return Err(Error::Unsupported("this case has no exact solution".into()));
    }
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let fluid: Vec<(f64, f64)> = mesh
        .stokes_triangles()
        .into_par_iter()
        .map(|t| {
            let (pts, w) = element_quadrature(mesh, t, rule);
            let u = sp.us.evaluate(mesh, t, &sol.us.values, &pts);
            let s = sp.sigma.evaluate(mesh, t, &sol.sigma.values, &pts);
            let (mut eu, mut es) = (0.0, 0.0);
            for (q, p) in pts.iter().enumerate() {
                let ue = case.u_s(*p);
                let se = case.sigma(*p);
                eu += w[q] * ((u[2 * q] - ue[0]).powi(2) + (u[2 * q + 1] - ue[1]).powi(2));
                let d = [s[3 * q] - se[0], s[3 * q + 1] - se[1], s[3 * q + 2] - se[2]];
                es += w[q] * frob(&d, &d);
            }
            (eu, es)
        })
        .collect();
    let porous: Vec<(f64, f64)> = mesh
        .darcy_triangles()
        .into_par_iter()
        .map(|t| {
            let (pts, w) = element_quadrature(mesh, t, rule);
            let u = sp.ud.evaluate(mesh, t, &sol.ud.values, &pts);
            let pv = sp.pd.evaluate(mesh, t, &sol.pd.values, &pts);
            let (mut eu, mut ep) = (0.0, 0.0);
            for (q, p) in pts.iter().enumerate() {
                let ue = case.u_d(*p);
                eu += w[q] * ((u[2 * q] - ue[0]).powi(2) + (u[2 * q + 1] - ue[1]).powi(2));
                ep += w[q] * (pv[q] - case.p_d(*p)).powi(2);
            }
            (eu, ep)
        })
        .collect();
    let sum = |v: &[(f64, f64)]| v.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let (a, b) = sum(&fluid);
    let (c, d) = sum(&porous);
    Ok(ErrorRecord { u_s: a.sqrt(), sigma: b.sqrt(), u_d: c.sqrt(), p_d: d.sqrt() })
}

/// Monolithic or Robin-Robin solves in a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolveMode {
    Monolithic,
    Ddm(DdmOptions),
}

/// One refinement level of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub k: usize,
    pub n: usize,
    pub h: f64,
    /// Unknowns of the monolithic system.
    pub dofs: usize,
    pub errors: Option<ErrorRecord>,
    /// log2 ratios against the previous row.
    pub orders: Option<[f64; 4]>,
    pub iterations: Option<usize>,
    /// Set when the solve of this row failed.
    pub failure: Option<String>,
    /// Robin-Robin increments per iteration (empty for monolithic rows).
    pub history: Vec<(f64, f64)>,
}

/// Observed order between two consecutive levels with mesh ratio `n1 / n0`.
pub fn observed_order(e0: f64, e1: f64, n0: usize, n1: usize) -> f64 {
    (e0 / e1).ln() / (n1 as f64 / n0 as f64).ln()
}

/// Solve one level and measure errors.
pub fn solve_level(case: ManufacturedCase, k: usize, n: usize, mode: &SolveMode) -> Result<(Discretization, Solution, Option<(usize, Vec<(f64, f64)>)>)> {
    solve_level_with(case, MaterialParams::for_case(&case), k, n, mode)
}

/// As `solve_level` with explicit material parameters.
pub fn solve_level_with(
    case: ManufacturedCase,
    params: MaterialParams,
    k: usize,
    n: usize,
    mode: &SolveMode,
) -> Result<(Discretization, Solution, Option<(usize, Vec<(f64, f64)>)>)> {
    let disc = Discretization::with_options(case, n, k, params, make_quadrature(k)?, true)?;
    let (sol, its) = match mode {
        SolveMode::Monolithic => (solve_monolithic(&disc)?, None),
        SolveMode::Ddm(o) => {
            let r = run_ddm(&disc, o)?;
            (r.solution, Some((r.iterations, r.history)))
        }
    };
    Ok((disc, sol, its))
}

/// Sweep over mesh levels; failing levels are reported in their row and the sweep continues.
pub fn convergence_study(case: ManufacturedCase, k: usize, ns: &[usize], mode: SolveMode) -> Result<Vec<ConvergenceRow>> {
    convergence_study_with(case, MaterialParams::for_case(&case), k, ns, mode)
}

/// As `convergence_study` with explicit material parameters.
pub fn convergence_study_with(
    case: ManufacturedCase,
    params: MaterialParams,
    k: usize,
    ns: &[usize],
    mode: SolveMode,
) -> Result<Vec<ConvergenceRow>> {
    if ns.is_empty() {
        return Err(Error::Config("empty mesh list".into()));
    }
    make_quadrature(k)?;
    let mut rows: Vec<ConvergenceRow> = ns
        .par_iter()
        .map(|&n| {
            let level = solve_level_with(case, params, k, n, &mode).and_then(|(disc, sol, its)| {
                let errors = if case.has_exact() { Some(l2_errors(&sol, &disc, &error_rule(k))?) } else { None };
                Ok((disc.spaces.n_unknowns(), errors, its))
            });
            match level {
                Ok((dofs, errors, ddm)) => {
                    let (iterations, history) = match ddm {
                        Some((i, h)) => (Some(i), h),
                        None => (None, Vec::new()),
                    };
                    ConvergenceRow { k, n, h: 1.0 / n as f64, dofs, errors, orders: None, iterations, failure: None, history }
                }
                Err(e) => ConvergenceRow {
                    k,
                    n,
                    h: 1.0 / n as f64,
                    dofs: 0,
                    errors: None,
                    orders: None,
                    iterations: None,
                    failure: Some(e.to_string()),
                    history: Vec::new(),
                },
            }
        })
        .collect();
    for i in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[i - 1].errors, rows[i].errors) {
            let (a, b) = (a.as_array(), b.as_array());
            let (n0, n1) = (rows[i - 1].n, rows[i].n);
            rows[i].orders = Some(std::array::from_fn(|j| observed_order(a[j], b[j], n0, n1)));
        }
    }
    Ok(rows)
}

/// `variable,h_inv,error,order`, variables in table order.
pub fn rows_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("variable,h_inv,error,order\n");
    for (j, var) in VARIABLES.iter().enumerate() {
        for r in rows {
            let err = r.errors.map(|e| format!("{:.6e}", e.as_array()[j])).unwrap_or_else(|| "nan".into());
            let ord = r.orders.map(|o| format!("{:.4}", o[j])).unwrap_or_default();
            let _ = writeln!(s, "{var},{},{err},{ord}", r.n);
        }
    }
    s
}

/// `h_inv,iterations`.
pub fn iterations_to_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("h_inv,iterations\n");
    for r in rows {
        let it = r.iterations.map(|i| i.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{it}", r.n);
    }
    s
}

/// `iter,res_stokes,res_darcy`.
pub fn history_to_csv(history: &[(f64, f64)]) -> String {
    let mut s = String::from("iter,res_stokes,res_darcy\n");
    for (i, (a, b)) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{a:.6e},{b:.6e}", i + 1);
    }
    s
}

/// Geometric rate of the increments `res_stokes + res_darcy` from a
/// least-squares fit of their logarithm, skipping the first `skip` entries and
/// reported per `stride` iterations. Even and odd iterates of the Jacobi
/// exchange form separate chains, so a stride of 2 gives the rate per full
/// exchange cycle.
pub fn fitted_rate(history: &[(f64, f64)], skip: usize, stride: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = history
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, h)| h.0 + h.1 > 0.0)
        .map(|(i, h)| (i as f64, (h.0 + h.1).ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    Some((num / den * stride as f64).exp())
}

/// Max over interface quadrature points of |u_S.n_S - u_D.n_S|.
pub fn interface_continuity_residual(sol: &Solution, disc: &Discretization) -> f64 {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let mut r: f64 = 0.0;
    for &e in &mesh.interface {
        let (pts, _, _) = edge_quadrature(mesh, e, &disc.rule);
        let (ts, td) = mesh.interface_pair(e);
        let n = mesh.edges[e].normal;
        let us = sp.us.evaluate(mesh, ts, &sol.us.values, &pts);
        let ud = sp.ud.evaluate(mesh, td, &sol.ud.values, &pts);
        for q in 0..pts.len() {
            let jump = (us[2 * q] - ud[2 * q]) * n[0] + (us[2 * q + 1] - ud[2 * q + 1]) * n[1];
            r = r.max(jump.abs());
        }
    }
    r
}

/// Max |u_S,h| over fluid quadrature points.
pub fn max_fluid_velocity(sol: &Solution, disc: &Discretization) -> f64 {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let mut m: f64 = 0.0;
    for t in mesh.stokes_triangles() {
        let (pts, _) = element_quadrature(mesh, t, &disc.rule);
        let u = sp.us.evaluate(mesh, t, &sol.us.values, &pts);
        for q in 0..pts.len() {
            m = m.max(u[2 * q].hypot(u[2 * q + 1]));
        }
    }
    m
}

/// Local conservation residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConservationResiduals {
    /// Max over fluid triangles and components of the momentum residual tested with a constant.
    pub stokes: f64,
    /// Max over dual cells of |flux out of the cell - integral of the source|.
    pub darcy: f64,
    /// Scale for relative checks: max over dual cells of the source integral magnitude plus flux magnitude.
    pub darcy_scale: f64,
}

/// Flux out of a set of sub-triangles through their boundary.
fn cell_flux(sol: &Solution, disc: &Discretization, cell: &[usize]) -> (f64, f64) {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let mut flux = 0.0;
    let mut mag = 0.0;
    for &t in cell {
        for &e in &mesh.triangles[t].edges {
            let ed = &mesh.edges[e];
            // skip edges interior to the cell
            if ed.adjacent().iter().all(|a| cell.contains(a)) && ed.adjacent().len() == 2 {
                continue;
            }
            let (pts, w, _) = edge_quadrature(mesh, e, &disc.rule);
            let u = sp.ud.evaluate(mesh, t, &sol.ud.values, &pts);
            let s = ed.side_sign(t);
            for q in 0..pts.len() {
                let un = u[2 * q] * ed.normal[0] + u[2 * q + 1] * ed.normal[1];
                flux += w[q] * s * un;
                mag += w[q] * un.abs();
            }
        }
    }
    (flux, mag)
}

/// Fluid momentum residuals tested with piecewise-constant vectors and porous
/// dual-cell mass balance for every cell whose pressure test function is free.
pub fn conservation_residuals(sol: &Solution, disc: &Discretization) -> Result<ConservationResiduals> {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let sys = disc.monolithic_system()?;
    let x = sol.to_vector(sp);
    let ax = sys.matrix.matvec(&x);
    let o = sys.offsets;
    let mut stokes: f64 = 0.0;
    for t in mesh.stokes_triangles() {
        let (pts, w) = element_quadrature(mesh, t, &disc.rule);
        let tab = sp.us.tabulate(mesh, t, &pts);
        let dofs = &sp.us.element(t).dofs;
        for c in 0..2 {
            let mut r = 0.0;
            for (b, &dof) in dofs.iter().enumerate() {
                let coef: f64 = (0..pts.len()).map(|q| w[q] * tab.v(b, q, c)).sum();
                r += coef * (ax[o.us + dof] - sys.rhs[o.us + dof]);
            }
            stokes = stokes.max(r.abs());
        }
    }
    let mut darcy: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (e, ed) in mesh.edges.iter().enumerate() {
        if !matches!(ed.class, EdgeClass::DarcyPrimalInterior | EdgeClass::Interface) {
            continue;
        }
        let cell = mesh.dual_element(e)?;
        let (flux, mag) = cell_flux(sol, disc, &cell);
        let mut src = 0.0;
        for &t in &cell {
            let (pts, w) = element_quadrature(mesh, t, &disc.rule);
            src += pts.iter().zip(&w).map(|(p, w)| w * disc.case.f_d(*p)).sum::<f64>();
        }
        darcy = darcy.max((flux - src).abs());
        scale = scale.max(src.abs() + mag);
    }
    Ok(ConservationResiduals { stokes, darcy, darcy_scale: scale })
}

/// Inputs of an example run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleParams {
    pub k: usize,
    pub mu: f64,
    pub ns: Vec<usize>,
    /// Robin parameters; `None` runs monolithic sweeps only.
    pub ddm: Option<DdmOptions>,
    /// Samples per unit length for field output.
    pub sample_density: usize,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams { k: 1, mu: 1.0, ns: vec![2, 4, 8, 16, 32], ddm: None, sample_density: 20 }
    }
}

/// Files produced by an example run, as (file name, contents).
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleBundle {
    pub rows: Vec<ConvergenceRow>,
    pub files: Vec<(String, String)>,
    /// Iterations of the Robin-Robin run on the finest mesh.
    pub iterations: Option<usize>,
    /// Interface continuity residual of a monolithic solve on the finest mesh.
    pub continuity: f64,
}

impl ExampleBundle {
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            out.push(p);
        }
        Ok(out)
    }
}

/// `x,y,value` samples of a scalar on a uniform grid of one region.
fn sample_region(
    disc: &Discretization,
    region: Region,
    density: usize,
    eval: &dyn Fn(usize, [f64; 2]) -> f64,
) -> String {
    let r = if region == Region::Stokes { disc.mesh.stokes_rect } else { disc.mesh.darcy_rect };
    let nx = ((r.xmax - r.xmin) * density as f64).round().max(1.0) as usize;
    let ny = ((r.ymax - r.ymin) * density as f64).round().max(1.0) as usize;
    let mut s = String::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let p = [r.xmin + (r.xmax - r.xmin) * i as f64 / nx as f64, r.ymin + (r.ymax - r.ymin) * j as f64 / ny as f64];
            if let Some(t) = disc.mesh.locate(p, region) {
                let _ = writeln!(s, "{:.6},{:.6},{:.6e}", p[0], p[1], eval(t, p));
            }
        }
    }
    s
}

fn field_samples(sol: &Solution, disc: &Discretization, density: usize) -> (String, String) {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let speed = |space: &crate::spaces::DofSpace, c: &[f64], t: usize, p: [f64; 2]| {
        let u = space.evaluate(mesh, t, c, &[p]);
        u[0].hypot(u[1])
    };
    let mut vel = String::from("x,y,value\n");
    vel += &sample_region(disc, Region::Stokes, density, &|t, p| speed(&sp.us, &sol.us.values, t, p));
    vel += &sample_region(disc, Region::DarcySub, density, &|t, p| speed(&sp.ud, &sol.ud.values, t, p));
    let mut pre = String::from("x,y,value\n");
    pre += &sample_region(disc, Region::Stokes, density, &|t, p| sol.recover_pressure(disc, t, &[p])[0]);
    pre += &sample_region(disc, Region::DarcySub, density, &|t, p| sp.pd.evaluate(mesh, t, &sol.pd.values, &[p])[0]);
    (vel, pre)
}

/// Run one of the shipped examples: convergence table (monolithic), optional
/// Robin-Robin run on the finest mesh with its iteration series, and field samples.
pub fn run_example(id: u32, params: &ExampleParams) -> Result<ExampleBundle> {
    let case = ManufacturedCase::new(CaseId::from_number(id, params.mu)?);
    if params.ns.is_empty() {
        return Err(Error::Config("empty mesh list".into()));
    }
    let finest = *params.ns.iter().max().unwrap();
    let mut files = Vec::new();
    let rows = if case.has_exact() {
        let rows = convergence_study(case, params.k, &params.ns, SolveMode::Monolithic)?;
        if let Some(f) = rows.iter().find_map(|r| r.failure.clone()) {
            return Err(Error::Solver(f));
        }
        files.push(("errors.csv".to_string(), rows_to_csv(&rows)));
        rows
    } else {
        Vec::new()
    };
    let disc = Discretization::new(case, finest, params.k)?;
    let mono = solve_monolithic(&disc)?;
    let continuity = interface_continuity_residual(&mono, &disc);
    let mut iterations = None;
    let shown = match &params.ddm {
        Some(o) => {
            let r = run_ddm(&disc, o)?;
            files.push(("iterations.csv".to_string(), history_to_csv(&r.history)));
            iterations = Some(r.iterations);
            r.solution
        }
        None => mono,
    };
    let (vel, pre) = field_samples(&shown, &disc, params.sample_density);
    files.push(("samples_speed.csv".to_string(), vel));
    files.push(("samples_pressure.csv".to_string(), pre));
    Ok(ExampleBundle { rows, files, iterations, continuity })
}

/// Outcome of one invariant check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        CheckResult { name, value, tolerance, pass: value <= tolerance }
    }
}

/// Smallest eigenvalue of a symmetric block relative to its largest magnitude.
pub fn relative_min_eigenvalue(b: &crate::assembly::Block) -> f64 {
    let m = b.to_dense();
    let sym = (&m + m.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max == 0.0 {
        return 0.0;
    }
    ev.iter().cloned().fold(f64::INFINITY, f64::min) / max
}

/// Max deviation from the identity of DOF functionals applied to local basis functions.
pub fn duality_defect(disc: &Discretization) -> f64 {
    let (mesh, sp) = (&disc.mesh, &disc.spaces);
    let mut worst: f64 = 0.0;
    for space in [&sp.sigma, &sp.us, &sp.ud, &sp.pd] {
        for le in &space.elements {
            for b in 0..le.dofs.len() {
                let f = space.apply_functionals(mesh, le.tri, &disc.rule, &|p| {
                    space.tabulate(mesh, le.tri, &[p]).value(b, 0).to_vec()
                });
                for (a, v) in f.iter().enumerate() {
                    let target = if a == b { 1.0 } else { 0.0 };
                    worst = worst.max((v - target).abs());
                }
            }
        }
    }
    worst
}

/// Invariant suite on one mesh: adjoint identity, deviatoric operator, kernel of
/// the stress mass, semi-definiteness of the stabilization, basis duality,
/// nonsingularity, interface continuity and local conservation.
pub fn check_invariants(case: ManufacturedCase, n: usize, k: usize) -> Result<Vec<CheckResult>> {
    use crate::assembly::deviatoric;
    let disc = Discretization::new(case, n, k)?;
    let b = &disc.blocks;
    let mut out = Vec::new();

    // relative to the largest entry: entries grow like 1/h in the moment basis
    let bs = b.b_d_star.to_dense();
    let diff = (&bs - b.b_d.transpose().to_dense()).abs().max() / bs.abs().max().max(f64::MIN_POSITIVE);
    out.push(CheckResult::at_most("adjoint", diff, 1e-13));

    let mut dev: f64 = 0.0;
    for t in [[1.0, 2.0, 3.0], [-0.5, 4.0, 0.25], [7.0, 7.0, 0.0]] {
        let a = deviatoric(t);
        let aa = deviatoric(a);
        dev = dev.max((0..3).map(|i| (aa[i] - a[i]).abs()).fold(0.0, f64::max));
        let kernel = deviatoric([t[0], t[0], 0.0]);
        dev = dev.max(kernel.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    out.push(CheckResult::at_most("deviatoric", dev, 1e-15));

    let ms = b.mass_sigma.to_dense();
    let ev = ((&ms + ms.transpose()) * 0.5).symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let zero = ev.iter().filter(|v| v.abs() <= 1e-12 * max).count();
    let expected = disc.mesh.n_stokes * crate::basis::dim_p(k - 1);
    out.push(CheckResult {
        name: "stress_mass_kernel",
        value: zero as f64,
        tolerance: expected as f64,
        pass: zero == expected,
    });

    let psd = [&b.stab, &b.normal_trace, &b.interface_pressure, &b.mass_darcy]
        .iter()
        .map(|m| relative_min_eigenvalue(m))
        .fold(f64::INFINITY, f64::min);
    out.push(CheckResult::at_most("stabilization_psd", -psd, 1e-12));

    out.push(CheckResult::at_most("duality", duality_defect(&disc), 1e-10));

    let sys = disc.monolithic_system()?;
    let dense = sys.matrix.to_dense();
    let sv = dense.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|s| **s > 1e-12 * smax).count();
    out.push(CheckResult {
        name: "nonsingular",
        value: (sys.n() - rank) as f64,
        tolerance: 0.0,
        pass: rank == sys.n(),
    });

    let sol = solve_monolithic(&disc)?;
    let umax = max_fluid_velocity(&sol, &disc).max(f64::MIN_POSITIVE);
    out.push(CheckResult::at_most("continuity", interface_continuity_residual(&sol, &disc) / umax, 1e-8));
    let cons = conservation_residuals(&sol, &disc)?;
    out.push(CheckResult::at_most("darcy_conservation", cons.darcy / cons.darcy_scale.max(f64::MIN_POSITIVE), 1e-10));
    out.push(CheckResult::at_most("stokes_conservation", cons.stokes, 1e-10));
    Ok(out)
}
