//! Bilinear-form blocks, right-hand sides and the global block systems.

use faer::sparse::{SparseColMat, Triplet};
use nalgebra::DMatrix;

use crate::basis::dim_p;
use crate::case::ManufacturedCase;
use crate::error::{Error, Result};
use crate::mesh::{CoupledMesh, EdgeClass};
use crate::quadrature::QuadratureRule;
use crate::spaces::{edge_legendre_table, edge_quadrature, element_quadrature, frob, DofSpace, Spaces, Tabulation};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// Viscosity.
    pub mu: f64,
    /// Scalar permeability (K = kappa I).
    pub kappa: f64,
    /// Beavers-Joseph-Saffman slip coefficient.
    pub slip: f64,
    /// Interior-penalty constant.
    pub gamma: f64,
}

impl MaterialParams {
    pub fn new(mu: f64, kappa: f64, slip: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("mu", mu), ("kappa", kappa), ("G", slip), ("gamma", gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(MaterialParams { mu, kappa, slip, gamma })
    }

    pub fn for_case(case: &ManufacturedCase) -> Self {
        MaterialParams { mu: case.mu, kappa: case.kappa, slip: case.slip, gamma: 1.0 }
    }
}

/// Trace-free part of a symmetric tensor (xx, yy, xy).
pub fn deviatoric(t: [f64; 3]) -> [f64; 3] {
    let h = 0.5 * (t[0] + t[1]);
    [t[0] - h, t[1] - h, t[2]]
}

/// Sparse matrix in coordinate form; duplicates are summed.
#[derive(Clone, Debug, Default)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Block {
    pub fn new(rows: usize, cols: usize) -> Self {
        Block { rows, cols, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn transpose(&self) -> Block {
        Block { rows: self.cols, cols: self.rows, entries: self.entries.iter().map(|&(i, j, v)| (j, i, v)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Block {
        Block { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|&(i, j, v)| (i, j, s * v)).collect() }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, j, v)| x[i] * v * y[j]).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Sum duplicates and sort by (column, row).
    pub fn compressed(&self) -> Block {
        let mut e = self.entries.clone();
        e.sort_by_key(|&(i, j, _)| (j, i));
        let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(e.len());
        for (i, j, v) in e {
            match out.last_mut() {
                Some(l) if l.0 == i && l.1 == j => l.2 += v,
                _ => out.push((i, j, v)),
            }
        }
        Block { rows: self.rows, cols: self.cols, entries: out }
    }

    /// Keep rows/columns with a mapped index and renumber them.
    pub fn restrict(&self, row_map: &[Option<usize>], nrows: usize, col_map: &[Option<usize>], ncols: usize) -> Block {
        let entries = self
            .entries
            .iter()
            .filter_map(|&(i, j, v)| match (row_map[i], col_map[j]) {
                (Some(a), Some(b)) => Some((a, b, v)),
                _ => None,
            })
            .collect();
        Block { rows: nrows, cols: ncols, entries }
    }

    pub fn max_abs(&self) -> f64 {
        self.compressed().entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }
}

fn identity_map(n: usize) -> Vec<Option<usize>> {
    (0..n).map(Some).collect()
}

/// Scatter a dense local matrix through two DOF maps.
fn scatter(block: &mut Block, rows: &[usize], cols: &[usize], local: &[f64]) {
    let nc = cols.len();
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            block.push(i, j, local[a * nc + b]);
        }
    }
}

fn tensor_normal(t: &[f64], n: [f64; 2]) -> [f64; 2] {
    [t[0] * n[0] + t[2] * n[1], t[2] * n[0] + t[1] * n[1]]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// ((2 mu)^{-1} A sigma, w) over the fluid region.
pub fn assemble_mass_sigma(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Block {
    let s = &sp.sigma;
    let mut block = Block::new(s.n_dofs(), s.n_dofs());
    let c = 0.5 / params.mu;
    for le in &s.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let t = s.tabulate(mesh, le.tri, &pts);
        let nb = t.nb;
        let mut local = vec![0.0; nb * nb];
        for q in 0..pts.len() {
            for a in 0..nb {
                let da = deviatoric([t.v(a, q, 0), t.v(a, q, 1), t.v(a, q, 2)]);
                for b in 0..nb {
                    local[a * nb + b] += w[q] * c * frob(&da, t.value(b, q));
                }
            }
        }
        scatter(&mut block, &le.dofs, &le.dofs, &local);
    }
    block
}

/// Unweighted L2 Gram matrix of a space.
pub fn assemble_gram(mesh: &CoupledMesh, space: &DofSpace, rule: &QuadratureRule) -> Block {
    let mut block = Block::new(space.n_dofs(), space.n_dofs());
    for le in &space.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let t = space.tabulate(mesh, le.tri, &pts);
        let nb = t.nb;
        let mut local = vec![0.0; nb * nb];
        for q in 0..pts.len() {
            for a in 0..nb {
                for b in 0..nb {
                    local[a * nb + b] += w[q] * crate::spaces::inner(space.kind, t.value(a, q), t.value(b, q));
                }
            }
        }
        scatter(&mut block, &le.dofs, &le.dofs, &local);
    }
    block
}

/// (K^{-1} u, v) over the porous region.
pub fn assemble_mass_darcy(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Block {
    assemble_gram(mesh, &sp.ud, rule).scaled(1.0 / params.kappa)
}

/// Fluid edges carrying jump terms: interior edges and the outer fluid boundary.
fn stokes_jump_edges(mesh: &CoupledMesh) -> impl Iterator<Item = usize> + '_ {
    mesh.edges
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.class, EdgeClass::StokesInterior | EdgeClass::StokesBoundary))
        .map(|(i, _)| i)
}

/// Sides of an edge with their jump signs.
fn sides(mesh: &CoupledMesh, e: usize) -> Vec<(usize, f64)> {
    let ed = &mesh.edges[e];
    match ed.right {
        Some(r) => vec![(ed.left, 1.0), (r, -1.0)],
        None => vec![(ed.left, 1.0)],
    }
}

/// a_S(w, v) = (w, eps_h(v)) - sum over interior and outer fluid edges of ({w n}, [v]).
/// Rows: stress DOFs, columns: fluid velocity DOFs.
pub fn assemble_a_s(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> Block {
    let (ss, us) = (&sp.sigma, &sp.us);
    let mut block = Block::new(ss.n_dofs(), us.n_dofs());
    for le in &ss.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let ts = ss.tabulate(mesh, le.tri, &pts);
        let tu = us.tabulate(mesh, le.tri, &pts);
        let mut local = vec![0.0; ts.nb * tu.nb];
        for q in 0..pts.len() {
            for a in 0..ts.nb {
                for b in 0..tu.nb {
                    local[a * tu.nb + b] += w[q] * frob(ts.value(a, q), &tu.sym_grad(b, q));
                }
            }
        }
        scatter(&mut block, &le.dofs, &us.element(le.tri).dofs, &local);
    }
    for e in stokes_jump_edges(mesh) {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let n = mesh.edges[e].normal;
        let sd = sides(mesh, e);
        let avg = if sd.len() == 2 { 0.5 } else { 1.0 };
        let tabs: Vec<(Tabulation, Tabulation)> =
            sd.iter().map(|&(t, _)| (ss.tabulate(mesh, t, &pts), us.tabulate(mesh, t, &pts))).collect();
        for (ia, &(ta, _)) in sd.iter().enumerate() {
            for (ib, &(tb, sb)) in sd.iter().enumerate() {
                let (tsig, _) = &tabs[ia];
                let (_, tvel) = &tabs[ib];
                let mut local = vec![0.0; tsig.nb * tvel.nb];
                for q in 0..pts.len() {
                    for a in 0..tsig.nb {
                        let wn = tensor_normal(tsig.value(a, q), n);
                        for b in 0..tvel.nb {
                            local[a * tvel.nb + b] -= w[q] * avg * sb * dot(&wn, tvel.value(b, q));
                        }
                    }
                }
                scatter(&mut block, &ss.element(ta).dofs, &us.element(tb).dofs, &local);
            }
        }
    }
    block
}

/// The integrated-by-parts form -(div_h w, v) + sum_interior ([w n], {v}) + sum_interface (w n, v),
/// equal to `assemble_a_s` on discrete pairs.
pub fn assemble_a_s_by_parts(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> Block {
    let (ss, us) = (&sp.sigma, &sp.us);
    let mut block = Block::new(ss.n_dofs(), us.n_dofs());
    for le in &ss.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let ts = ss.tabulate(mesh, le.tri, &pts);
        let tu = us.tabulate(mesh, le.tri, &pts);
        let mut local = vec![0.0; ts.nb * tu.nb];
        for q in 0..pts.len() {
            for a in 0..ts.nb {
                let d = ts.tensor_div(a, q);
                for b in 0..tu.nb {
                    local[a * tu.nb + b] -= w[q] * dot(&d, tu.value(b, q));
                }
            }
        }
        scatter(&mut block, &le.dofs, &us.element(le.tri).dofs, &local);
    }
    let edges = mesh
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.class, EdgeClass::StokesInterior | EdgeClass::Interface))
        .map(|(i, _)| i);
    for e in edges {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let n = mesh.edges[e].normal;
        let sd: Vec<(usize, f64)> = if mesh.edges[e].class == EdgeClass::Interface {
            vec![(mesh.edges[e].left, 1.0)]
        } else {
            sides(mesh, e)
        };
        let avg = if sd.len() == 2 { 0.5 } else { 1.0 };
        for &(ta, sa) in &sd {
            let tsig = ss.tabulate(mesh, ta, &pts);
            for &(tb, _) in &sd {
                let tvel = us.tabulate(mesh, tb, &pts);
                let mut local = vec![0.0; tsig.nb * tvel.nb];
                for q in 0..pts.len() {
                    for a in 0..tsig.nb {
                        let wn = tensor_normal(tsig.value(a, q), n);
                        for b in 0..tvel.nb {
                            local[a * tvel.nb + b] += w[q] * sa * avg * dot(&wn, tvel.value(b, q));
                        }
                    }
                }
                scatter(&mut block, &ss.element(ta).dofs, &us.element(tb).dofs, &local);
            }
        }
    }
    block
}

/// Jump penalty gamma/h_e ([u], [v]) on interior and outer fluid edges.
pub fn assemble_jump_penalty(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Block {
    let us = &sp.us;
    let mut block = Block::new(us.n_dofs(), us.n_dofs());
    for e in stokes_jump_edges(mesh) {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let c = params.gamma / mesh.edges[e].length;
        let sd = sides(mesh, e);
        let tabs: Vec<Tabulation> = sd.iter().map(|&(t, _)| us.tabulate(mesh, t, &pts)).collect();
        for (ia, &(ta, sa)) in sd.iter().enumerate() {
            for (ib, &(tb, sb)) in sd.iter().enumerate() {
                let (x, y) = (&tabs[ia], &tabs[ib]);
                let mut local = vec![0.0; x.nb * y.nb];
                for q in 0..pts.len() {
                    for a in 0..x.nb {
                        for b in 0..y.nb {
                            local[a * y.nb + b] += w[q] * c * sa * sb * dot(x.value(a, q), y.value(b, q));
                        }
                    }
                }
                scatter(&mut block, &us.element(ta).dofs, &us.element(tb).dofs, &local);
            }
        }
    }
    block
}

/// Fluid-side interface mass of a scalar trace: (u . d, v . d) with d the normal or tangent.
fn interface_trace_mass(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, tangential: bool) -> Block {
    let us = &sp.us;
    let mut block = Block::new(us.n_dofs(), us.n_dofs());
    for &e in &mesh.interface {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let ed = &mesh.edges[e];
        let d = if tangential { ed.tangent } else { ed.normal };
        let t = us.tabulate(mesh, ed.left, &pts);
        let mut local = vec![0.0; t.nb * t.nb];
        for q in 0..pts.len() {
            for a in 0..t.nb {
                let ta = dot(t.value(a, q), &d);
                for b in 0..t.nb {
                    local[a * t.nb + b] += w[q] * ta * dot(t.value(b, q), &d);
                }
            }
        }
        let dofs = &us.element(ed.left).dofs;
        scatter(&mut block, dofs, dofs, &local);
    }
    block
}

/// (1/G)(u . t, v . t) on the interface.
pub fn assemble_slip(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Block {
    interface_trace_mass(mesh, sp, rule, true).scaled(1.0 / params.slip)
}

/// (u . n_S, v . n_S) on the interface.
pub fn assemble_normal_trace_mass(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> Block {
    interface_trace_mass(mesh, sp, rule, false)
}

/// Jump penalty plus slip term.
pub fn assemble_stabilization(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Block {
    let mut s = assemble_jump_penalty(mesh, sp, rule, params);
    s.entries.extend(assemble_slip(mesh, sp, rule, params).entries);
    s
}

/// Interface coupling blocks: (v_S . n_S, p_D) as fluid-velocity x pressure and
/// (u_S . n_S, q_D) as pressure x fluid-velocity, integrated independently.
pub fn assemble_interface_blocks(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> (Block, Block) {
    let (us, pd) = (&sp.us, &sp.pd);
    let mut vp = Block::new(us.n_dofs(), pd.n_dofs());
    let mut qu = Block::new(pd.n_dofs(), us.n_dofs());
    for &e in &mesh.interface {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let (ts, td) = mesh.interface_pair(e);
        let n = mesh.edges[e].normal;
        let tu = us.tabulate(mesh, ts, &pts);
        let tp = pd.tabulate(mesh, td, &pts);
        let mut a_loc = vec![0.0; tu.nb * tp.nb];
        let mut b_loc = vec![0.0; tp.nb * tu.nb];
        for q in 0..pts.len() {
            for a in 0..tu.nb {
                let un = dot(tu.value(a, q), &n);
                for b in 0..tp.nb {
                    a_loc[a * tp.nb + b] += w[q] * un * tp.v(b, q, 0);
                }
            }
            for b in 0..tp.nb {
                let pq = tp.v(b, q, 0);
                for a in 0..tu.nb {
                    b_loc[b * tu.nb + a] += w[q] * pq * dot(tu.value(a, q), &n);
                }
            }
        }
        scatter(&mut vp, &us.element(ts).dofs, &pd.element(td).dofs, &a_loc);
        scatter(&mut qu, &pd.element(td).dofs, &us.element(ts).dofs, &b_loc);
    }
    (vp, qu)
}

/// Interface mass of the porous pressure, (p, q) on the interface.
pub fn assemble_interface_pressure_mass(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> Block {
    let pd = &sp.pd;
    let mut block = Block::new(pd.n_dofs(), pd.n_dofs());
    for &e in &mesh.interface {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let (_, td) = mesh.interface_pair(e);
        let t = pd.tabulate(mesh, td, &pts);
        let mut local = vec![0.0; t.nb * t.nb];
        for q in 0..pts.len() {
            for a in 0..t.nb {
                for b in 0..t.nb {
                    local[a * t.nb + b] += w[q] * t.v(a, q, 0) * t.v(b, q, 0);
                }
            }
        }
        let dofs = &pd.element(td).dofs;
        scatter(&mut block, dofs, dofs, &local);
    }
    block
}

/// The porous pair: `b` (pressure x velocity) with
/// b(u, q) = sum_dual (u . n, [q]) - (u, grad q), and `b_star` (velocity x pressure) with
/// b*(p, v) = -sum_primal-interior (p, [v . n]) + (p, div v) - sum_{interface, outer} (v . n_D, p).
pub fn assemble_b_d_pair(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> (Block, Block) {
    let (ud, pd) = (&sp.ud, &sp.pd);
    let mut b = Block::new(pd.n_dofs(), ud.n_dofs());
    let mut bs = Block::new(ud.n_dofs(), pd.n_dofs());
    for le in &ud.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let tu = ud.tabulate(mesh, le.tri, &pts);
        let tp = pd.tabulate(mesh, le.tri, &pts);
        let mut lb = vec![0.0; tp.nb * tu.nb];
        let mut ls = vec![0.0; tu.nb * tp.nb];
        for q in 0..pts.len() {
            for a in 0..tp.nb {
                let gq = [tp.g(a, q, 0, 0), tp.g(a, q, 0, 1)];
                for c in 0..tu.nb {
                    lb[a * tu.nb + c] -= w[q] * dot(&gq, tu.value(c, q));
                    ls[c * tp.nb + a] += w[q] * tp.v(a, q, 0) * tu.div(c, q);
                }
            }
        }
        let pdofs = &pd.element(le.tri).dofs;
        scatter(&mut b, pdofs, &le.dofs, &lb);
        scatter(&mut bs, &le.dofs, pdofs, &ls);
    }
    for (e, ed) in mesh.edges.iter().enumerate() {
        let (pts, w, _) = match ed.class {
            EdgeClass::DarcyDual
            | EdgeClass::DarcyPrimalInterior
            | EdgeClass::DarcyPrimalBoundary
            | EdgeClass::Interface => edge_quadrature(mesh, e, rule),
            _ => continue,
        };
        let n = ed.normal;
        match ed.class {
            EdgeClass::DarcyDual => {
                // normal trace of u from the lower-id side, jump of q across the edge
                let t1 = ed.left;
                let tu = ud.tabulate(mesh, t1, &pts);
                for (tq, sq) in sides(mesh, e) {
                    let tp = pd.tabulate(mesh, tq, &pts);
                    let mut lb = vec![0.0; tp.nb * tu.nb];
                    for q in 0..pts.len() {
                        for a in 0..tp.nb {
                            for c in 0..tu.nb {
                                lb[a * tu.nb + c] += w[q] * sq * tp.v(a, q, 0) * dot(tu.value(c, q), &n);
                            }
                        }
                    }
                    scatter(&mut b, &pd.element(tq).dofs, &ud.element(t1).dofs, &lb);
                }
            }
            EdgeClass::DarcyPrimalInterior => {
                let t1 = ed.left;
                let tp = pd.tabulate(mesh, t1, &pts);
                for (tv, sv) in sides(mesh, e) {
                    let tu = ud.tabulate(mesh, tv, &pts);
                    let mut ls = vec![0.0; tu.nb * tp.nb];
                    for q in 0..pts.len() {
                        for c in 0..tu.nb {
                            let vn = dot(tu.value(c, q), &n);
                            for a in 0..tp.nb {
                                ls[c * tp.nb + a] -= w[q] * sv * vn * tp.v(a, q, 0);
                            }
                        }
                    }
                    scatter(&mut bs, &ud.element(tv).dofs, &pd.element(t1).dofs, &ls);
                }
            }
            EdgeClass::DarcyPrimalBoundary | EdgeClass::Interface => {
                // outward porous normal: n_e on the outer boundary, -n_e on the interface
                let (t, nd) = if ed.class == EdgeClass::Interface {
                    (ed.right.unwrap(), [-n[0], -n[1]])
                } else {
                    (ed.left, n)
                };
                let tu = ud.tabulate(mesh, t, &pts);
                let tp = pd.tabulate(mesh, t, &pts);
                let mut ls = vec![0.0; tu.nb * tp.nb];
                for q in 0..pts.len() {
                    for c in 0..tu.nb {
                        let vn = dot(tu.value(c, q), &nd);
                        for a in 0..tp.nb {
                            ls[c * tp.nb + a] -= w[q] * vn * tp.v(a, q, 0);
                        }
                    }
                }
                scatter(&mut bs, &ud.element(t).dofs, &pd.element(t).dofs, &ls);
            }
            _ => unreachable!(),
        }
    }
    (b, bs)
}

/// Interface trace operators for the Robin data: `fluid[v][(i, j)] = (psi_j, v . n_S)_e`
/// and `porous[q][(i, j)] = (psi_j, q)_e` for interface edge i and Legendre index j.
pub fn assemble_interface_traces(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule) -> (Block, Block) {
    let k = sp.k;
    let ng = mesh.interface.len() * (k + 1);
    let mut fluid = Block::new(sp.us.n_dofs(), ng);
    let mut porous = Block::new(sp.pd.n_dofs(), ng);
    for (i, &e) in mesh.interface.iter().enumerate() {
        let (pts, w, ts) = edge_quadrature(mesh, e, rule);
        let leg = edge_legendre_table(k, mesh.edges[e].length, &ts);
        let (tsk, tdk) = mesh.interface_pair(e);
        let n = mesh.edges[e].normal;
        let tu = sp.us.tabulate(mesh, tsk, &pts);
        let tp = sp.pd.tabulate(mesh, tdk, &pts);
        let cols: Vec<usize> = (0..=k).map(|j| i * (k + 1) + j).collect();
        let mut lf = vec![0.0; tu.nb * (k + 1)];
        let mut lp = vec![0.0; tp.nb * (k + 1)];
        for q in 0..pts.len() {
            for j in 0..=k {
                let l = leg[j * pts.len() + q];
                for a in 0..tu.nb {
                    lf[a * (k + 1) + j] += w[q] * l * dot(tu.value(a, q), &n);
                }
                for a in 0..tp.nb {
                    lp[a * (k + 1) + j] += w[q] * l * tp.v(a, q, 0);
                }
            }
        }
        scatter(&mut fluid, &sp.us.element(tsk).dofs, &cols, &lf);
        scatter(&mut porous, &sp.pd.element(tdk).dofs, &cols, &lp);
    }
    (fluid, porous)
}

/// All bilinear-form blocks of the coupled problem.
#[derive(Clone, Debug)]
pub struct Blocks {
    pub mass_sigma: Block,
    pub a_s: Block,
    pub stab: Block,
    pub normal_trace: Block,
    pub interface_vp: Block,
    pub interface_qu: Block,
    pub mass_darcy: Block,
    pub b_d: Block,
    pub b_d_star: Block,
    pub interface_pressure: Block,
    pub trace_fluid: Block,
    pub trace_porous: Block,
}

impl Blocks {
    pub fn assemble(mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> Self {
        let (interface_vp, interface_qu) = assemble_interface_blocks(mesh, sp, rule);
        let (b_d, b_d_star) = assemble_b_d_pair(mesh, sp, rule);
        let (trace_fluid, trace_porous) = assemble_interface_traces(mesh, sp, rule);
        Blocks {
            mass_sigma: assemble_mass_sigma(mesh, sp, rule, params),
            a_s: assemble_a_s(mesh, sp, rule),
            stab: assemble_stabilization(mesh, sp, rule, params),
            normal_trace: assemble_normal_trace_mass(mesh, sp, rule),
            interface_vp,
            interface_qu,
            mass_darcy: assemble_mass_darcy(mesh, sp, rule, params),
            b_d,
            b_d_star,
            interface_pressure: assemble_interface_pressure_mass(mesh, sp, rule),
            trace_fluid,
            trace_porous,
        }
    }

    pub fn named(&self) -> Vec<(&'static str, &Block)> {
        vec![
            ("mass_sigma", &self.mass_sigma),
            ("a_s", &self.a_s),
            ("stab", &self.stab),
            ("normal_trace", &self.normal_trace),
            ("interface_vp", &self.interface_vp),
            ("interface_qu", &self.interface_qu),
            ("mass_darcy", &self.mass_darcy),
            ("b_d", &self.b_d),
            ("b_d_star", &self.b_d_star),
            ("interface_pressure", &self.interface_pressure),
            ("trace_fluid", &self.trace_fluid),
            ("trace_porous", &self.trace_porous),
        ]
    }
}

/// Right-hand-side pieces on the full DOF ranges of each space.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsParts {
    /// -(w n, g) on the outer fluid boundary.
    pub sigma: Vec<f64>,
    /// (f_S, v) + gamma/h (g, v) on the outer fluid boundary, plus interface corrections.
    pub us: Vec<f64>,
    /// -(projected f_D, q), plus the interface mass correction.
    pub pd: Vec<f64>,
    /// Prescribed moments on the outer porous boundary.
    pub pd_data: Vec<f64>,
}

/// Assemble the right-hand side. With `corrections` the interface residuals of
/// the exact fields are added where the interface conditions enter the scheme.
pub fn assemble_rhs_with(
    case: &ManufacturedCase,
    mesh: &CoupledMesh,
    sp: &Spaces,
    rule: &QuadratureRule,
    params: &MaterialParams,
    corrections: bool,
) -> RhsParts {
    let (ss, us, pd) = (&sp.sigma, &sp.us, &sp.pd);
    let mut sigma = vec![0.0; ss.n_dofs()];
    let mut uv = vec![0.0; us.n_dofs()];
    let mut pv = vec![0.0; pd.n_dofs()];

    for le in &us.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let t = us.tabulate(mesh, le.tri, &pts);
        let f: Vec<[f64; 2]> = pts.iter().map(|p| case.f_s(*p)).collect();
        for (a, &dof) in le.dofs.iter().enumerate() {
            uv[dof] += (0..pts.len()).map(|q| w[q] * dot(&f[q], t.value(a, q))).sum::<f64>();
        }
    }
    for e in mesh.edges_of(EdgeClass::StokesBoundary) {
        let (pts, w, _) = edge_quadrature(mesh, e, rule);
        let ed = &mesh.edges[e];
        let n = ed.normal;
        let c = params.gamma / ed.length;
        let g: Vec<[f64; 2]> = pts.iter().map(|p| case.stokes_data(*p)).collect();
        let ts = ss.tabulate(mesh, ed.left, &pts);
        let tu = us.tabulate(mesh, ed.left, &pts);
        for (a, &dof) in ss.element(ed.left).dofs.iter().enumerate() {
            sigma[dof] -= (0..pts.len()).map(|q| w[q] * dot(&tensor_normal(ts.value(a, q), n), &g[q])).sum::<f64>();
        }
        for (a, &dof) in us.element(ed.left).dofs.iter().enumerate() {
            uv[dof] += (0..pts.len()).map(|q| w[q] * c * dot(&g[q], tu.value(a, q))).sum::<f64>();
        }
    }

    // porous source projected onto P_{k-1} per sub-triangle
    let ninner = dim_p(sp.k - 1);
    for le in &pd.elements {
        let (pts, w) = element_quadrature(mesh, le.tri, rule);
        let geo = crate::basis::ElementGeometry::new(mesh.tri_coords(le.tri));
        let (modal, _) = crate::basis::modal_scalar(&pd.modal, &geo, &pts);
        let np = pts.len();
        let f: Vec<f64> = pts.iter().map(|p| case.f_d(*p)).collect();
        let coef: Vec<f64> = (0..ninner).map(|i| (0..np).map(|q| w[q] * f[q] * modal[i * np + q]).sum()).collect();
        let proj: Vec<f64> = (0..np).map(|q| (0..ninner).map(|i| coef[i] * modal[i * np + q]).sum()).collect();
        let t = pd.tabulate(mesh, le.tri, &pts);
        for (a, &dof) in le.dofs.iter().enumerate() {
            pv[dof] -= (0..np).map(|q| w[q] * proj[q] * t.v(a, q, 0)).sum::<f64>();
        }
    }

    if corrections && case.has_exact() {
        for &e in &mesh.interface {
            let (pts, w, _) = edge_quadrature(mesh, e, rule);
            let ed = &mesh.edges[e];
            let (n, tg) = (ed.normal, ed.tangent);
            let (ts, td) = mesh.interface_pair(e);
            let tu = us.tabulate(mesh, ts, &pts);
            let tp = pd.tabulate(mesh, td, &pts);
            let r1: Vec<f64> = pts.iter().map(|p| case.r1(*p, n)).collect();
            let r2: Vec<f64> = pts.iter().map(|p| case.r2(*p, n)).collect();
            let r3: Vec<f64> = pts.iter().map(|p| case.r3(*p, n, tg)).collect();
            for (a, &dof) in us.element(ts).dofs.iter().enumerate() {
                uv[dof] += (0..pts.len())
                    .map(|q| {
                        let v = tu.value(a, q);
                        w[q] * (-r2[q] * dot(v, &n) + r3[q] * dot(v, &tg) / params.slip)
                    })
                    .sum::<f64>();
            }
            for (a, &dof) in pd.element(td).dofs.iter().enumerate() {
                pv[dof] += (0..pts.len()).map(|q| w[q] * r1[q] * tp.v(a, q, 0)).sum::<f64>();
            }
        }
    }

    let pd_data = pd.constrained_values(mesh, rule, &|p| case.darcy_data(p));
    RhsParts { sigma, us: uv, pd: pv, pd_data }
}

pub fn assemble_rhs(case: &ManufacturedCase, mesh: &CoupledMesh, sp: &Spaces, rule: &QuadratureRule, params: &MaterialParams) -> RhsParts {
    assemble_rhs_with(case, mesh, sp, rule, params, true)
}

/// Positions of the unknown groups in a global vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Offsets {
    pub sigma: usize,
    pub us: usize,
    pub ud: usize,
    pub pd: usize,
    pub total: usize,
}

/// Sparse global matrix with its right-hand side.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub offsets: Offsets,
    pub matrix: Block,
    pub rhs: Vec<f64>,
}

impl BlockSystem {
    pub fn n(&self) -> usize {
        self.matrix.rows
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> =
            self.matrix.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.matrix.rows, self.matrix.cols, &trip)
            .map_err(|e| Error::Internal(format!("sparse matrix construction failed: {e:?}")))
    }
}

fn place(dst: &mut Block, src: &Block, r0: usize, c0: usize, scale: f64) {
    for &(i, j, v) in &src.entries {
        dst.push(r0 + i, c0 + j, scale * v);
    }
}

fn check_dims(b: &Block, rows: usize, cols: usize, name: &str) -> Result<()> {
    if b.rows != rows || b.cols != cols {
        return Err(Error::Internal(format!(
            "block {name} is {}x{}, expected {rows}x{cols}",
            b.rows, b.cols
        )));
    }
    Ok(())
}

fn check_blocks(blocks: &Blocks, sp: &Spaces) -> Result<()> {
    let (ns, nu, nd, np) = (sp.sigma.n_dofs(), sp.us.n_dofs(), sp.ud.n_dofs(), sp.pd.n_dofs());
    check_dims(&blocks.mass_sigma, ns, ns, "mass_sigma")?;
    check_dims(&blocks.a_s, ns, nu, "a_s")?;
    check_dims(&blocks.stab, nu, nu, "stab")?;
    check_dims(&blocks.normal_trace, nu, nu, "normal_trace")?;
    check_dims(&blocks.interface_vp, nu, np, "interface_vp")?;
    check_dims(&blocks.interface_qu, np, nu, "interface_qu")?;
    check_dims(&blocks.mass_darcy, nd, nd, "mass_darcy")?;
    check_dims(&blocks.b_d, np, nd, "b_d")?;
    check_dims(&blocks.b_d_star, nd, np, "b_d_star")?;
    check_dims(&blocks.interface_pressure, np, np, "interface_pressure")
}

/// Split the porous-pressure columns of b* into free and prescribed parts and
/// return the velocity-row load generated by the prescribed values.
fn constrained_load(blocks: &Blocks, sp: &Spaces, rhs: &RhsParts) -> Vec<f64> {
    let mut load = vec![0.0; sp.ud.n_dofs()];
    for &(i, j, v) in &blocks.b_d_star.entries {
        if sp.pd.constrained[j] {
            load[i] += v * rhs.pd_data[j];
        }
    }
    load
}

/// Symmetric coupled system, unknowns ordered (sigma, u_S, u_D, free p_D):
/// [[-M_s, A, 0, 0], [A^T, S, 0, I], [0, 0, M_D, -B*], [0, I^T, -B, 0]].
pub fn build_monolithic(blocks: &Blocks, rhs: &RhsParts, sp: &Spaces) -> Result<BlockSystem> {
    check_blocks(blocks, sp)?;
    let (ns, nu, nd) = (sp.sigma.n_dofs(), sp.us.n_dofs(), sp.ud.n_dofs());
    let np = sp.pd.n_free;
    let off = Offsets { sigma: 0, us: ns, ud: ns + nu, pd: ns + nu + nd, total: ns + nu + nd + np };
    let mut m = Block::new(off.total, off.total);
    let pf = &sp.pd.free_index;
    place(&mut m, &blocks.mass_sigma, off.sigma, off.sigma, -1.0);
    place(&mut m, &blocks.a_s, off.sigma, off.us, 1.0);
    place(&mut m, &blocks.a_s.transpose(), off.us, off.sigma, 1.0);
    place(&mut m, &blocks.stab, off.us, off.us, 1.0);
    place(&mut m, &blocks.interface_vp.restrict(&identity_map(nu), nu, pf, np), off.us, off.pd, 1.0);
    place(&mut m, &blocks.interface_qu.restrict(pf, np, &identity_map(nu), nu), off.pd, off.us, 1.0);
    place(&mut m, &blocks.mass_darcy, off.ud, off.ud, 1.0);
    place(&mut m, &blocks.b_d_star.restrict(&identity_map(nd), nd, pf, np), off.ud, off.pd, -1.0);
    place(&mut m, &blocks.b_d.restrict(pf, np, &identity_map(nd), nd), off.pd, off.ud, -1.0);

    let mut b = vec![0.0; off.total];
    b[..ns].copy_from_slice(&rhs.sigma);
    b[off.us..off.us + nu].copy_from_slice(&rhs.us);
    b[off.ud..off.ud + nd].copy_from_slice(&constrained_load(blocks, sp, rhs));
    for (i, v) in rhs.pd.iter().enumerate() {
        if let Some(f) = pf[i] {
            b[off.pd + f] = *v;
        }
    }
    Ok(BlockSystem { offsets: off, matrix: m, rhs: b })
}

/// Matrices of the two Robin subproblems: porous [[M_D, -B*], [-B, -(1/dp) M_G]]
/// on (u_D, free p_D) and fluid [[-M_s, A], [A^T, S + df N_G]] on (sigma, u_S).
/// The right-hand sides carry only the data that does not depend on the Robin state.
pub fn build_robin_blocks(blocks: &Blocks, rhs: &RhsParts, sp: &Spaces, dp: f64, df: f64) -> Result<(BlockSystem, BlockSystem)> {
    check_blocks(blocks, sp)?;
    if !(dp > 0.0) || !(df >= 0.0) {
        return Err(Error::Config(format!("Robin parameters must satisfy dp > 0, df >= 0 (got {dp}, {df})")));
    }
    let (ns, nu, nd) = (sp.sigma.n_dofs(), sp.us.n_dofs(), sp.ud.n_dofs());
    let np = sp.pd.n_free;
    let pf = &sp.pd.free_index;

    let doff = Offsets { sigma: 0, us: 0, ud: 0, pd: nd, total: nd + np };
    let mut dm = Block::new(doff.total, doff.total);
    place(&mut dm, &blocks.mass_darcy, 0, 0, 1.0);
    place(&mut dm, &blocks.b_d_star.restrict(&identity_map(nd), nd, pf, np), 0, nd, -1.0);
    place(&mut dm, &blocks.b_d.restrict(pf, np, &identity_map(nd), nd), nd, 0, -1.0);
    if dp.is_finite() {
        place(&mut dm, &blocks.interface_pressure.restrict(pf, np, pf, np), nd, nd, -1.0 / dp);
    }
    let mut db = vec![0.0; doff.total];
    db[..nd].copy_from_slice(&constrained_load(blocks, sp, rhs));
    for (i, v) in rhs.pd.iter().enumerate() {
        if let Some(f) = pf[i] {
            db[nd + f] = *v;
        }
    }

    let soff = Offsets { sigma: 0, us: ns, ud: ns + nu, pd: ns + nu, total: ns + nu };
    let mut sm = Block::new(soff.total, soff.total);
    place(&mut sm, &blocks.mass_sigma, 0, 0, -1.0);
    place(&mut sm, &blocks.a_s, 0, ns, 1.0);
    place(&mut sm, &blocks.a_s.transpose(), ns, 0, 1.0);
    place(&mut sm, &blocks.stab, ns, ns, 1.0);
    place(&mut sm, &blocks.normal_trace, ns, ns, df);
    let mut sb = vec![0.0; soff.total];
    sb[..ns].copy_from_slice(&rhs.sigma);
    sb[ns..].copy_from_slice(&rhs.us);

    Ok((BlockSystem { offsets: doff, matrix: dm, rhs: db }, BlockSystem { offsets: soff, matrix: sm, rhs: sb }))
}
