//! Sparse direct solves, the monolithic coupled solve and the Robin-Robin iteration.

use std::sync::OnceLock;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::prelude::*;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Par, Side};

use crate::assembly::{assemble_rhs_with, build_monolithic, build_robin_blocks, Block, BlockSystem, Blocks, MaterialParams, RhsParts};
use crate::case::ManufacturedCase;
use crate::error::{Error, Result};
use crate::mesh::{build_coupled_mesh, CoupledMesh};
use crate::quadrature::{make_quadrature, QuadratureRule};
use crate::spaces::{FieldCoefficients, Spaces};

/// Relative residual above which a direct solve is reported as failed.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Supernodal LDL^T with AMD ordering and sign-guided regularisation of tiny
/// pivots; the perturbation is removed by iterative refinement.
struct SymmetricFactor {
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
}

impl SymmetricFactor {
    fn new(matrix: &Block, signs: &[i8], scale: f64) -> Option<Self> {
        let n = matrix.rows;
        let lower: Vec<Triplet<usize, usize, f64>> =
            matrix.entries.iter().filter(|e| e.0 >= e.1).map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::try_new_from_triplets(n, n, &lower).ok()?;
        let params = CholeskySymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Amd, params).ok()?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default())).ok()?;
        let reg = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: REGULARIZATION_DELTA * scale,
            dynamic_regularization_epsilon: REGULARIZATION_EPSILON * scale,
        };
        symbolic
            .factorize_numeric_ldlt(&mut values, a.as_ref(), Side::Lower, reg, Par::Seq, MemStack::new(&mut mem), Default::default())
            .ok()?;
        Some(SymmetricFactor { symbolic, values })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let f = LdltRef::new(&self.symbolic, &self.values);
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let mut mem = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        f.solve_in_place_with_conj(Conj::No, x.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..n).map(|i| x[(i, 0)]).collect()
    }
}

const REGULARIZATION_DELTA: f64 = 1e-9;
const REGULARIZATION_EPSILON: f64 = 1e-12;
const REFINEMENT_STEPS: usize = 10;

/// Sparse direct factorisation, reusable for many right-hand sides.
pub struct Factorization {
    symmetric: Option<SymmetricFactor>,
    lu: OnceLock<std::result::Result<Lu<usize, f64>, String>>,
    matrix: Block,
    norm: f64,
}

impl Factorization {
    /// LU factorisation.
    pub fn new(matrix: &Block) -> Result<Self> {
        let f = Self::prepare(matrix)?;
        f.lu()?;
        Ok(f)
    }

    /// Factorisation of a symmetric matrix whose pivots have the given signs
    /// (+1 or -1 per unknown); only the lower triangle is factorised. Needs far
    /// less memory than LU on saddle-point systems. Solves are refined against
    /// the full matrix and fall back to LU when they miss the residual tolerance.
    pub fn symmetric(matrix: &Block, signs: &[i8]) -> Result<Self> {
        if signs.len() != matrix.rows {
            return Err(Error::Internal(format!("{} signs for {} unknowns", signs.len(), matrix.rows)));
        }
        let mut f = Self::prepare(matrix)?;
        f.symmetric = SymmetricFactor::new(&f.matrix, signs, f.norm);
        if f.symmetric.is_none() {
            f.lu()?;
        }
        Ok(f)
    }

    fn prepare(matrix: &Block) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::Internal(format!("matrix is {}x{}", matrix.rows, matrix.cols)));
        }
        let matrix = matrix.compressed();
        if matrix.entries.iter().any(|e| !e.2.is_finite()) {
            return Err(Error::Solver("matrix has non-finite entries".into()));
        }
        let norm = matrix.max_abs();
        Ok(Factorization { symmetric: None, lu: OnceLock::new(), matrix, norm })
    }

    fn lu(&self) -> Result<&Lu<usize, f64>> {
        let m = &self.matrix;
        self.lu
            .get_or_init(|| {
                let trip: Vec<Triplet<usize, usize, f64>> = m.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
                let sp = SparseColMat::try_new_from_triplets(m.rows, m.cols, &trip).map_err(|e| format!("sparse matrix construction failed: {e:?}"))?;
                sp.sp_lu().map_err(|e| format!("LU factorisation failed: {e:?}"))
            })
            .as_ref()
            .map_err(|e| Error::Solver(e.clone()))
    }

    pub fn n(&self) -> usize {
        self.matrix.rows
    }

    /// Relative residual of `x`, or None when it is not finite.
    fn residual(&self, x: &[f64], rhs: &[f64]) -> Option<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let ax = self.matrix.matvec(x);
        let res = ax.iter().zip(rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = self.norm * xn + bn;
        Some(if scale > 0.0 { res / scale } else { 0.0 })
    }

    /// Componentwise backward error max_i |b - Ax|_i / (|A||x| + |b|)_i.
    fn componentwise_error(&self, x: &[f64], rhs: &[f64]) -> (f64, Vec<f64>) {
        let mut r = rhs.to_vec();
        let mut scale: Vec<f64> = rhs.iter().map(|v| v.abs()).collect();
        for &(i, j, v) in &self.matrix.entries {
            r[i] -= v * x[j];
            scale[i] += (v * x[j]).abs();
        }
        let w = r.iter().zip(&scale).fold(0.0f64, |m, (ri, si)| if *si > 0.0 { m.max(ri.abs() / si) } else { m.max(ri.abs()) });
        (w, r)
    }

    fn refined(&self, s: &SymmetricFactor, rhs: &[f64]) -> Option<Vec<f64>> {
        let mut x = s.solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let (mut omega, mut r) = self.componentwise_error(&x, rhs);
        for _ in 0..REFINEMENT_STEPS {
            if omega <= 4.0 * f64::EPSILON {
                break;
            }
            let d = s.solve(&r);
            let y: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + di).collect();
            if y.iter().any(|v| !v.is_finite()) {
                break;
            }
            let (w, ry) = self.componentwise_error(&y, rhs);
            if w >= omega {
                break;
            }
            x = y;
            omega = w;
            r = ry;
        }
        self.residual(&x, rhs).is_some_and(|res| res <= RESIDUAL_TOLERANCE).then_some(x)
    }

    /// Solve and check the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.n() {
            return Err(Error::Internal(format!("right-hand side has length {}, expected {}", rhs.len(), self.n())));
        }
        if let Some(x) = self.symmetric.as_ref().and_then(|s| self.refined(s, rhs)) {
            return Ok(x);
        }
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        let x = self.lu()?.solve(&b);
        let x: Vec<f64> = (0..rhs.len()).map(|i| x[(i, 0)]).collect();
        match self.residual(&x, rhs) {
            None => Err(Error::Solver("solution has non-finite entries (singular system?)".into())),
            Some(r) if r > RESIDUAL_TOLERANCE => Err(Error::Solver(format!("relative residual {r:.3e} after direct solve"))),
            Some(_) => Ok(x),
        }
    }
}

/// Pivot signs for consecutive unknown blocks of the given lengths.
fn pivot_signs(blocks: &[(usize, i8)]) -> Vec<i8> {
    blocks.iter().flat_map(|&(n, s)| std::iter::repeat_n(s, n)).collect()
}

/// One-shot sparse direct solve.
pub fn solve_sparse(matrix: &Block, rhs: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(matrix)?.solve(rhs)
}

/// Mesh, spaces, blocks and data of one coupled problem.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub case: ManufacturedCase,
    pub mesh: CoupledMesh,
    pub spaces: Spaces,
    pub rule: QuadratureRule,
    pub params: MaterialParams,
    pub blocks: Blocks,
    pub rhs: RhsParts,
}

impl Discretization {
    pub fn new(case: ManufacturedCase, n: usize, k: usize) -> Result<Self> {
        let rule = make_quadrature(k)?;
        Self::with_options(case, n, k, MaterialParams::for_case(&case), rule, true)
    }

    pub fn with_options(
        case: ManufacturedCase,
        n: usize,
        k: usize,
        params: MaterialParams,
        rule: QuadratureRule,
        corrections: bool,
    ) -> Result<Self> {
        make_quadrature(k)?;
        MaterialParams::new(params.mu, params.kappa, params.slip, params.gamma)?;
        let mesh = build_coupled_mesh(case.stokes, case.darcy, n)?;
        Self::on_mesh(case, mesh, k, params, rule, corrections)
    }

    pub fn on_mesh(
        case: ManufacturedCase,
        mesh: CoupledMesh,
        k: usize,
        params: MaterialParams,
        rule: QuadratureRule,
        corrections: bool,
    ) -> Result<Self> {
        let spaces = Spaces::build(&mesh, k)?;
        let blocks = Blocks::assemble(&mesh, &spaces, &rule, &params);
        let rhs = assemble_rhs_with(&case, &mesh, &spaces, &rule, &params, corrections);
        Ok(Discretization { case, mesh, spaces, rule, params, blocks, rhs })
    }

    pub fn k(&self) -> usize {
        self.spaces.k
    }

    pub fn monolithic_system(&self) -> Result<BlockSystem> {
        build_monolithic(&self.blocks, &self.rhs, &self.spaces)
    }
}

/// Discrete fields of a coupled solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub sigma: FieldCoefficients,
    pub us: FieldCoefficients,
    pub ud: FieldCoefficients,
    /// Porous pressure on every DOF, prescribed slots included.
    pub pd: FieldCoefficients,
}

impl Solution {
    /// Fluid pressure -tr(sigma)/2 at points of a fluid triangle.
    pub fn recover_pressure(&self, disc: &Discretization, tri: usize, points: &[[f64; 2]]) -> Vec<f64> {
        let s = disc.spaces.sigma.evaluate(&disc.mesh, tri, &self.sigma.values, points);
        (0..points.len()).map(|q| -0.5 * (s[3 * q] + s[3 * q + 1])).collect()
    }

    /// Stack the unknowns in monolithic order.
    pub fn to_vector(&self, sp: &Spaces) -> Vec<f64> {
        let mut v = self.sigma.values.clone();
        v.extend_from_slice(&self.us.values);
        v.extend_from_slice(&self.ud.values);
        v.extend(self.pd.free_values(&sp.pd));
        v
    }
}

fn split_fluid(sp: &Spaces, x: &[f64]) -> (FieldCoefficients, FieldCoefficients) {
    let ns = sp.sigma.n_dofs();
    (
        FieldCoefficients { kind: sp.sigma.kind, values: x[..ns].to_vec() },
        FieldCoefficients { kind: sp.us.kind, values: x[ns..ns + sp.us.n_dofs()].to_vec() },
    )
}

fn split_porous(sp: &Spaces, x: &[f64], prescribed: &[f64]) -> (FieldCoefficients, FieldCoefficients) {
    let nd = sp.ud.n_dofs();
    (
        FieldCoefficients { kind: sp.ud.kind, values: x[..nd].to_vec() },
        FieldCoefficients::from_free(&sp.pd, &x[nd..], prescribed),
    )
}

/// Solve the coupled problem in one sparse system.
pub fn solve_monolithic(disc: &Discretization) -> Result<Solution> {
    let sys = disc.monolithic_system()?;
    let o = sys.offsets;
    let signs = pivot_signs(&[(o.us - o.sigma, -1), (o.ud - o.us, 1), (o.pd - o.ud, 1), (o.total - o.pd, -1)]);
    let x = Factorization::symmetric(&sys.matrix, &signs)?.solve(&sys.rhs)?;
    let sp = &disc.spaces;
    let (sigma, us) = split_fluid(sp, &x[..o.ud]);
    let (ud, pd) = split_porous(sp, &x[o.ud..], &disc.rhs.pd_data);
    Ok(Solution { sigma, us, ud, pd })
}

/// Robin transmission data: Legendre moments per interface edge,
/// `[edge * (k + 1) + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RobinState {
    /// Data seen by the fluid subproblem.
    pub fluid: Vec<f64>,
    /// Data seen by the porous subproblem.
    pub porous: Vec<f64>,
}

impl RobinState {
    pub fn zeros(disc: &Discretization) -> Self {
        let n = disc.mesh.interface.len() * (disc.k() + 1);
        RobinState { fluid: vec![0.0; n], porous: vec![0.0; n] }
    }
}

/// Robin parameters of the two subproblems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinParams {
    /// Porous-side parameter (> 0).
    pub dp: f64,
    /// Fluid-side parameter (>= 0).
    pub df: f64,
}

impl RobinParams {
    pub fn new(dp: f64, df: f64) -> Result<Self> {
        if !(dp > 0.0 && dp.is_finite()) || !(df >= 0.0 && df.is_finite()) {
            return Err(Error::Config(format!("Robin parameters need dp > 0 and df >= 0, got dp={dp}, df={df}")));
        }
        Ok(RobinParams { dp, df })
    }
}

/// Factorised subproblems of the Robin-Robin iteration.
pub struct RobinSolver<'a> {
    disc: &'a Discretization,
    pub params: RobinParams,
    porous: Factorization,
    fluid: Factorization,
    porous_rhs: Vec<f64>,
    fluid_rhs: Vec<f64>,
}

impl<'a> RobinSolver<'a> {
    pub fn new(disc: &'a Discretization, params: RobinParams) -> Result<Self> {
        RobinParams::new(params.dp, params.df)?;
        let (ds, ss) = build_robin_blocks(&disc.blocks, &disc.rhs, &disc.spaces, params.dp, params.df)?;
        let sp = &disc.spaces;
        let porous_signs = pivot_signs(&[(sp.ud.n_dofs(), 1), (sp.pd.n_free, -1)]);
        let fluid_signs = pivot_signs(&[(sp.sigma.n_dofs(), -1), (sp.us.n_dofs(), 1)]);
        let (porous, fluid) = rayon::join(
            || Factorization::symmetric(&ds.matrix, &porous_signs),
            || Factorization::symmetric(&ss.matrix, &fluid_signs),
        );
        Ok(RobinSolver { disc, params, porous: porous?, fluid: fluid?, porous_rhs: ds.rhs, fluid_rhs: ss.rhs })
    }

    /// Porous subproblem with data `g`: returns (u_D, p_D).
    pub fn porous_solve(&self, g: &[f64]) -> Result<(FieldCoefficients, FieldCoefficients)> {
        let sp = &self.disc.spaces;
        let nd = sp.ud.n_dofs();
        let load = self.disc.blocks.trace_porous.matvec(g);
        let mut b = self.porous_rhs.clone();
        for (i, v) in load.iter().enumerate() {
            if let Some(f) = sp.pd.free_index[i] {
                b[nd + f] -= v / self.params.dp;
            }
        }
        let x = self.porous.solve(&b)?;
        Ok(split_porous(sp, &x, &self.disc.rhs.pd_data))
    }

    /// Fluid subproblem with data `g`: returns (sigma, u_S).
    pub fn fluid_solve(&self, g: &[f64]) -> Result<(FieldCoefficients, FieldCoefficients)> {
        let sp = &self.disc.spaces;
        let ns = sp.sigma.n_dofs();
        let load = self.disc.blocks.trace_fluid.matvec(g);
        let mut b = self.fluid_rhs.clone();
        for (i, v) in load.iter().enumerate() {
            b[ns + i] -= v;
        }
        let x = self.fluid.solve(&b)?;
        Ok(split_fluid(sp, &x))
    }

    /// Edge moments of the porous pressure trace.
    pub fn pressure_trace(&self, pd: &FieldCoefficients) -> Vec<f64> {
        self.disc.blocks.trace_porous.transpose().matvec(&pd.values)
    }

    /// Edge moments of the fluid normal velocity trace.
    pub fn normal_velocity_trace(&self, us: &FieldCoefficients) -> Vec<f64> {
        self.disc.blocks.trace_fluid.transpose().matvec(&us.values)
    }
}

/// New transmission data from the porous pressure trace and fluid normal velocity trace.
pub fn robin_update(state: &RobinState, pressure: &[f64], normal_velocity: &[f64], params: RobinParams) -> RobinState {
    let r = params.df / params.dp;
    let fluid = pressure.iter().zip(&state.porous).map(|(p, g)| p * (1.0 + r) - g * r).collect();
    let porous = state
        .fluid
        .iter()
        .zip(normal_velocity)
        .map(|(g, u)| g + (params.df + params.dp) * u)
        .collect();
    RobinState { fluid, porous }
}

/// Options of the Robin-Robin iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DdmOptions {
    pub params: RobinParams,
    pub tol: f64,
    pub max_iter: usize,
}

impl DdmOptions {
    pub fn new(dp: f64, df: f64) -> Result<Self> {
        Ok(DdmOptions { params: RobinParams::new(dp, df)?, tol: 1e-6, max_iter: 100_000 })
    }
}

/// Outcome of a converged Robin-Robin iteration.
#[derive(Clone, Debug)]
pub struct DdmResult {
    pub solution: Solution,
    pub iterations: usize,
    /// Per iteration: (fluid velocity increment, porous velocity increment).
    pub history: Vec<(f64, f64)>,
    pub state: RobinState,
}

/// Robin-Robin iteration from zero data; the two subproblems of an
/// iteration are independent and run concurrently.
pub fn run_ddm(disc: &Discretization, opts: &DdmOptions) -> Result<DdmResult> {
    run_ddm_from(disc, opts, RobinState::zeros(disc))
}

/// Robin-Robin iteration from given transmission data.
pub fn run_ddm_from(disc: &Discretization, opts: &DdmOptions, initial: RobinState) -> Result<DdmResult> {
    let ng = disc.mesh.interface.len() * (disc.k() + 1);
    if initial.fluid.len() != ng || initial.porous.len() != ng {
        return Err(Error::Usage(format!("Robin data must have {ng} moments per side")));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::Config("tolerance must be positive and max_iter nonzero".into()));
    }
    let solver = RobinSolver::new(disc, opts.params)?;
    let sp = &disc.spaces;
    let mass = &disc.blocks.mass_darcy;
    let kappa = disc.params.kappa;
    let mut state = initial;
    let mut us_prev = vec![0.0; sp.us.n_dofs()];
    let mut ud_prev = vec![0.0; sp.ud.n_dofs()];
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let (porous, fluid) = rayon::join(|| solver.porous_solve(&state.porous), || solver.fluid_solve(&state.fluid));
        let (ud, pd) = porous?;
        let (sigma, us) = fluid?;
        let du: Vec<f64> = us.values.iter().zip(&us_prev).map(|(a, b)| a - b).collect();
        let dd: Vec<f64> = ud.values.iter().zip(&ud_prev).map(|(a, b)| a - b).collect();
        let rs = du.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rd = (kappa * mass.bilinear(&dd, &dd)).max(0.0).sqrt();
        history.push((rs, rd));
        if !(rs.is_finite() && rd.is_finite()) {
            return Err(Error::NonConvergence { iterations: it, last: f64::NAN, history });
        }
        let p_tr = solver.pressure_trace(&pd);
        let u_tr = solver.normal_velocity_trace(&us);
        if rs + rd <= opts.tol {
            return Ok(DdmResult { solution: Solution { sigma, us, ud, pd }, iterations: it, history, state });
        }
        state = robin_update(&state, &p_tr, &u_tr, opts.params);
        us_prev = us.values;
        ud_prev = ud.values;
    }
    let last = history.last().map(|h| h.0 + h.1).unwrap_or(f64::NAN);
    Err(Error::NonConvergence { iterations: opts.max_iter, last, history })
}

/// Fixed point of the Robin data for a given coupled solution.
pub fn robin_fixed_point(disc: &Discretization, sol: &Solution, params: RobinParams) -> Result<RobinState> {
    let solver = RobinSolver::new(disc, params)?;
    let p = solver.pressure_trace(&sol.pd);
    let u = solver.normal_velocity_trace(&sol.us);
    Ok(RobinState {
        fluid: p.iter().zip(&u).map(|(p, u)| p - params.df * u).collect(),
        porous: p.iter().zip(&u).map(|(p, u)| p + params.dp * u).collect(),
    })
}
