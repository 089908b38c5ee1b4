//! The four discrete spaces: DOF maps, dual bases, evaluation and the
//! moment interpolants.

use nalgebra::DMatrix;

use crate::basis::{dim_p, legendre_edge, modal_scalar, ElementGeometry, OrthoBasis};
use crate::error::{Error, Result};
use crate::mesh::{CoupledMesh, EdgeClass, Region};
use crate::quadrature::QuadratureRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    /// Symmetric stress tensors, components (xx, yy, xy) in P_{k-1}.
    SigmaS,
    /// Fluid velocity in (P_k)^2.
    US,
    /// Porous velocity with continuous normal moments on dual edges.
    UD,
    /// Porous pressure with continuous moments on primal edges.
    PD,
}

impl SpaceKind {
    pub fn ncomp(self) -> usize {
        match self {
            SpaceKind::SigmaS => 3,
            SpaceKind::US | SpaceKind::UD => 2,
            SpaceKind::PD => 1,
        }
    }

    pub fn region(self) -> Region {
        match self {
            SpaceKind::SigmaS | SpaceKind::US => Region::Stokes,
            SpaceKind::UD | SpaceKind::PD => Region::DarcySub,
        }
    }
}

/// Frobenius product of symmetric tensors stored as (xx, yy, xy).
pub fn frob(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]
}

/// Pointwise inner product of two values of a space's field type.
pub fn inner(kind: SpaceKind, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        SpaceKind::SigmaS => frob(a, b),
        _ => a.iter().zip(b).map(|(x, y)| x * y).sum(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofRole {
    EdgeMoment { edge: usize, moment: usize },
    InteriorMoment { element: usize, component: usize, index: usize },
}

#[derive(Clone, Debug)]
pub struct LocalElement {
    pub tri: usize,
    pub dofs: Vec<usize>,
    /// Local basis i = sum_m dual[(m, i)] * modal_m; `None` means modal.
    pub dual: Option<DMatrix<f64>>,
    /// Condition number of the local functional matrix.
    pub condition: f64,
}

/// Basis values at points. Layout `val[(b * np + q) * nc + c]`,
/// `grad[((b * np + q) * nc + c) * 2 + d]`.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub nb: usize,
    pub np: usize,
    pub nc: usize,
    pub val: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn v(&self, b: usize, q: usize, c: usize) -> f64 {
        self.val[(b * self.np + q) * self.nc + c]
    }

    #[inline]
    pub fn g(&self, b: usize, q: usize, c: usize, d: usize) -> f64 {
        self.grad[((b * self.np + q) * self.nc + c) * 2 + d]
    }

    pub fn value(&self, b: usize, q: usize) -> &[f64] {
        let s = (b * self.np + q) * self.nc;
        &self.val[s..s + self.nc]
    }

    /// Divergence of a vector basis function.
    pub fn div(&self, b: usize, q: usize) -> f64 {
        self.g(b, q, 0, 0) + self.g(b, q, 1, 1)
    }

    /// Symmetric gradient (xx, yy, xy) of a vector basis function.
    pub fn sym_grad(&self, b: usize, q: usize) -> [f64; 3] {
        [self.g(b, q, 0, 0), self.g(b, q, 1, 1), 0.5 * (self.g(b, q, 0, 1) + self.g(b, q, 1, 0))]
    }

    /// Row-wise divergence of a tensor basis function.
    pub fn tensor_div(&self, b: usize, q: usize) -> [f64; 2] {
        [self.g(b, q, 0, 0) + self.g(b, q, 2, 1), self.g(b, q, 2, 0) + self.g(b, q, 1, 1)]
    }
}

#[derive(Clone, Debug)]
pub struct DofSpace {
    pub kind: SpaceKind,
    pub degree: usize,
    pub modal: OrthoBasis,
    pub elements: Vec<LocalElement>,
    elem_of_tri: Vec<usize>,
    pub roles: Vec<DofRole>,
    pub constrained: Vec<bool>,
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
    /// First DOF of the moment block attached to an edge.
    pub edge_block: Vec<Option<usize>>,
    pub max_condition: f64,
}

/// Points and weights of a rule mapped onto a triangle.
pub fn element_quadrature(mesh: &CoupledMesh, tri: usize, rule: &QuadratureRule) -> (Vec<[f64; 2]>, Vec<f64>) {
    let geo = ElementGeometry::new(mesh.tri_coords(tri));
    let pts = rule.tri_points.iter().map(|r| geo.to_physical(*r)).collect();
    let w = rule.tri_weights.iter().map(|w| w * geo.det.abs()).collect();
    (pts, w)
}

/// Edge quadrature: physical points, weights, and parameters in [0, 1]
/// measured from the lexicographically smaller endpoint.
pub fn edge_quadrature(mesh: &CoupledMesh, e: usize, rule: &QuadratureRule) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
    let [a, b] = mesh.edge_coords(e);
    let h = mesh.edges[e].length;
    let pts = rule.edge_points.iter().map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect();
    let w = rule.edge_weights.iter().map(|w| w * h).collect();
    (pts, w, rule.edge_points.clone())
}

/// Legendre values `[j * np + q]` at edge parameters.
pub fn edge_legendre_table(k: usize, h: f64, params: &[f64]) -> Vec<f64> {
    let np = params.len();
    let mut out = vec![0.0; (k + 1) * np];
    let mut tmp = vec![0.0; k + 1];
    for (q, &t) in params.iter().enumerate() {
        legendre_edge(k, t, h, &mut tmp);
        for j in 0..=k {
            out[j * np + q] = tmp[j];
        }
    }
    out
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Build one of the four spaces on a coupled mesh.
pub fn build_space(kind: SpaceKind, mesh: &CoupledMesh, k: usize) -> Result<DofSpace> {
    if !(1..=3).contains(&k) {
        return Err(Error::Unsupported(format!("polynomial degree {k} (supported: 1..=3)")));
    }
    let modal_degree = if kind == SpaceKind::SigmaS { k - 1 } else { k };
    let modal = OrthoBasis::new(modal_degree);
    let nm = modal.len();
    let ninner = dim_p(k - 1);
    let ntri = mesh.triangles.len();
    let mut space = DofSpace {
        kind,
        degree: k,
        modal,
        elements: Vec::new(),
        elem_of_tri: vec![usize::MAX; ntri],
        roles: Vec::new(),
        constrained: Vec::new(),
        free_index: Vec::new(),
        n_free: 0,
        edge_block: vec![None; mesh.edges.len()],
        max_condition: 1.0,
    };
    let rule = QuadratureRule::with_degree(2 * k + 2);
    let tris: Vec<usize> = match kind.region() {
        Region::Stokes => mesh.stokes_triangles().collect(),
        Region::DarcySub => mesh.darcy_triangles().collect(),
    };
    for &t in &tris {
        let mut dofs = Vec::new();
        match kind {
            SpaceKind::SigmaS | SpaceKind::US => {
                for c in 0..kind.ncomp() {
                    for i in 0..nm {
                        dofs.push(space.roles.len());
                        space.roles.push(DofRole::InteriorMoment { element: t, component: c, index: i });
                        space.constrained.push(false);
                    }
                }
            }
            SpaceKind::UD | SpaceKind::PD => {
                let local_edges: &[usize] = if kind == SpaceKind::UD { &[1, 2] } else { &[0] };
                for &le in local_edges {
                    let e = mesh.triangles[t].edges[le];
                    let start = match space.edge_block[e] {
                        Some(s) => s,
                        None => {
                            let s = space.roles.len();
                            let fixed = mesh.edges[e].class == EdgeClass::DarcyPrimalBoundary;
                            for j in 0..=k {
                                space.roles.push(DofRole::EdgeMoment { edge: e, moment: j });
                                space.constrained.push(fixed);
                            }
                            space.edge_block[e] = Some(s);
                            s
                        }
                    };
                    dofs.extend(start..start + k + 1);
                }
                for c in 0..kind.ncomp() {
                    for i in 0..ninner {
                        dofs.push(space.roles.len());
                        space.roles.push(DofRole::InteriorMoment { element: t, component: c, index: i });
                        space.constrained.push(false);
                    }
                }
            }
        }
        let mut le = LocalElement { tri: t, dofs, dual: None, condition: 1.0 };
        if matches!(kind, SpaceKind::UD | SpaceKind::PD) {
            let v = space.functional_matrix(mesh, t, &rule);
            let cond = condition_number(&v);
            let inv = v.try_inverse().ok_or_else(|| {
                Error::Construction(format!("singular local functional matrix on element {t}"))
            })?;
            if !cond.is_finite() || cond > 1e12 {
                return Err(Error::Construction(format!(
                    "ill-conditioned local functional matrix on element {t} (cond {cond:.3e})"
                )));
            }
            le.dual = Some(inv);
            le.condition = cond;
            space.max_condition = space.max_condition.max(cond);
        }
        space.elem_of_tri[t] = space.elements.len();
        space.elements.push(le);
    }
    let mut next = 0;
    space.free_index = space
        .constrained
        .iter()
        .map(|&c| {
            if c {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect();
    space.n_free = next;
    Ok(space)
}

impl DofSpace {
    pub fn n_dofs(&self) -> usize {
        self.roles.len()
    }

    pub fn local_dim(&self) -> usize {
        self.modal.len() * self.kind.ncomp()
    }

    pub fn element_of(&self, tri: usize) -> Option<&LocalElement> {
        self.elem_of_tri.get(tri).and_then(|&i| self.elements.get(i))
    }

    pub fn element(&self, tri: usize) -> &LocalElement {
        self.element_of(tri).expect("triangle does not belong to this space")
    }

    pub fn n_constrained(&self) -> usize {
        self.constrained.iter().filter(|&&c| c).count()
    }

    fn comp_factor(&self, c: usize) -> f64 {
        if self.kind == SpaceKind::SigmaS && c == 2 {
            std::f64::consts::FRAC_1_SQRT_2
        } else {
            1.0
        }
    }

    /// Modal functions (component-major) at points.
    fn tabulate_modal(&self, mesh: &CoupledMesh, tri: usize, points: &[[f64; 2]]) -> Tabulation {
        let geo = ElementGeometry::new(mesh.tri_coords(tri));
        let (sv, sg) = modal_scalar(&self.modal, &geo, points);
        let n = self.modal.len();
        let nc = self.kind.ncomp();
        let np = points.len();
        let nb = n * nc;
        let mut val = vec![0.0; nb * np * nc];
        let mut grad = vec![0.0; nb * np * nc * 2];
        for c in 0..nc {
            let f = self.comp_factor(c);
            for i in 0..n {
                let b = c * n + i;
                for q in 0..np {
                    val[(b * np + q) * nc + c] = f * sv[i * np + q];
                    for d in 0..2 {
                        grad[((b * np + q) * nc + c) * 2 + d] = f * sg[(i * np + q) * 2 + d];
                    }
                }
            }
        }
        Tabulation { nb, np, nc, val, grad }
    }

    /// Local functional matrix `V[l][m] = functional_l(modal_m)`.
    fn functional_matrix(&self, mesh: &CoupledMesh, tri: usize, rule: &QuadratureRule) -> DMatrix<f64> {
        let k = self.degree;
        let nl = self.local_dim();
        let nc = self.kind.ncomp();
        let n = self.modal.len();
        let ninner = dim_p(k - 1);
        let mut v = DMatrix::zeros(nl, nl);
        let local_edges: &[usize] = if self.kind == SpaceKind::UD { &[1, 2] } else { &[0] };
        let mut row = 0;
        for &le in local_edges {
            let e = mesh.triangles[tri].edges[le];
            let (pts, w, ts) = edge_quadrature(mesh, e, rule);
            let leg = edge_legendre_table(k, mesh.edges[e].length, &ts);
            let tab = self.tabulate_modal(mesh, tri, &pts);
            let nrm = mesh.edges[e].normal;
            for j in 0..=k {
                for m in 0..nl {
                    let mut s = 0.0;
                    for q in 0..pts.len() {
                        let trace = if nc == 2 { tab.v(m, q, 0) * nrm[0] + tab.v(m, q, 1) * nrm[1] } else { tab.v(m, q, 0) };
                        s += w[q] * trace * leg[j * pts.len() + q];
                    }
                    v[(row + j, m)] = s;
                }
            }
            row += k + 1;
        }
        // interior moments against the leading (orthonormal) modal functions
        for c in 0..nc {
            for i in 0..ninner {
                v[(row, c * n + i)] = 1.0;
                row += 1;
            }
        }
        v
    }

    /// Local basis at physical points of element `tri` (no containment check).
    pub fn tabulate(&self, mesh: &CoupledMesh, tri: usize, points: &[[f64; 2]]) -> Tabulation {
        let modal = self.tabulate_modal(mesh, tri, points);
        let le = self.element(tri);
        match &le.dual {
            None => modal,
            Some(d) => {
                let nb = modal.nb;
                let per_val = modal.np * modal.nc;
                let mut val = vec![0.0; modal.val.len()];
                let mut grad = vec![0.0; modal.grad.len()];
                for b in 0..nb {
                    for m in 0..nb {
                        let c = d[(m, b)];
                        if c == 0.0 {
                            continue;
                        }
                        for s in 0..per_val {
                            val[b * per_val + s] += c * modal.val[m * per_val + s];
                        }
                        for s in 0..2 * per_val {
                            grad[b * 2 * per_val + s] += c * modal.grad[m * 2 * per_val + s];
                        }
                    }
                }
                Tabulation { nb, np: modal.np, nc: modal.nc, val, grad }
            }
        }
    }

    /// Checked basis evaluation.
    pub fn eval_basis(&self, mesh: &CoupledMesh, tri: usize, points: &[[f64; 2]]) -> Result<Tabulation> {
        if self.element_of(tri).is_none() {
            return Err(Error::Usage(format!("triangle {tri} is not an element of {:?}", self.kind)));
        }
        let geo = ElementGeometry::new(mesh.tri_coords(tri));
        for p in points {
            if !ElementGeometry::contains_reference(geo.to_reference(*p), 1e-10) {
                return Err(Error::Usage(format!("point ({}, {}) outside element {tri}", p[0], p[1])));
            }
        }
        Ok(self.tabulate(mesh, tri, points))
    }

    /// Field values `[q * nc + c]` on one element from a full coefficient vector.
    pub fn evaluate(&self, mesh: &CoupledMesh, tri: usize, coeffs: &[f64], points: &[[f64; 2]]) -> Vec<f64> {
        let tab = self.tabulate(mesh, tri, points);
        let le = self.element(tri);
        let nc = tab.nc;
        let mut out = vec![0.0; points.len() * nc];
        for (b, &dof) in le.dofs.iter().enumerate() {
            let a = coeffs[dof];
            if a == 0.0 {
                continue;
            }
            for q in 0..points.len() {
                for c in 0..nc {
                    out[q * nc + c] += a * tab.v(b, q, c);
                }
            }
        }
        out
    }

    /// Values of all DOF functionals of `tri` applied to a field.
    pub fn apply_functionals(
        &self,
        mesh: &CoupledMesh,
        tri: usize,
        rule: &QuadratureRule,
        field: &dyn Fn([f64; 2]) -> Vec<f64>,
    ) -> Vec<f64> {
        let k = self.degree;
        let nc = self.kind.ncomp();
        let mut out = Vec::with_capacity(self.local_dim());
        let (pts, w) = element_quadrature(mesh, tri, rule);
        let vals: Vec<Vec<f64>> = pts.iter().map(|p| field(*p)).collect();
        let modal = self.tabulate_modal(mesh, tri, &pts);
        match self.kind {
            SpaceKind::SigmaS | SpaceKind::US => {
                for m in 0..modal.nb {
                    let s: f64 = (0..pts.len()).map(|q| w[q] * inner(self.kind, modal.value(m, q), &vals[q])).sum();
                    out.push(s);
                }
            }
            SpaceKind::UD | SpaceKind::PD => {
                let local_edges: &[usize] = if self.kind == SpaceKind::UD { &[1, 2] } else { &[0] };
                for &le in local_edges {
                    let e = mesh.triangles[tri].edges[le];
                    let (ep, ew, ts) = edge_quadrature(mesh, e, rule);
                    let leg = edge_legendre_table(k, mesh.edges[e].length, &ts);
                    let nrm = mesh.edges[e].normal;
                    for j in 0..=k {
                        let mut s = 0.0;
                        for q in 0..ep.len() {
                            let f = field(ep[q]);
                            let tr = if nc == 2 { f[0] * nrm[0] + f[1] * nrm[1] } else { f[0] };
                            s += ew[q] * tr * leg[j * ep.len() + q];
                        }
                        out.push(s);
                    }
                }
                let n = self.modal.len();
                for c in 0..nc {
                    for i in 0..dim_p(k - 1) {
                        let s: f64 = (0..pts.len()).map(|q| w[q] * modal.v(c * n + i, q, c) * vals[q][c]).sum();
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    /// Moment interpolant (L2 projection for the modal spaces).
    pub fn interpolate(
        &self,
        mesh: &CoupledMesh,
        rule: &QuadratureRule,
        field: &dyn Fn([f64; 2]) -> Vec<f64>,
    ) -> FieldCoefficients {
        let mut values = vec![0.0; self.n_dofs()];
        for le in &self.elements {
            let f = self.apply_functionals(mesh, le.tri, rule, field);
            for (dof, v) in le.dofs.iter().zip(f) {
                values[*dof] = v;
            }
        }
        FieldCoefficients { kind: self.kind, values }
    }

    /// Edge L2 projection of boundary data into the constrained slots (zero elsewhere).
    pub fn constrained_values(&self, mesh: &CoupledMesh, rule: &QuadratureRule, data: &dyn Fn([f64; 2]) -> f64) -> Vec<f64> {
        let k = self.degree;
        let mut out = vec![0.0; self.n_dofs()];
        for (e, blk) in self.edge_block.iter().enumerate() {
            let Some(start) = *blk else { continue };
            if !self.constrained[start] {
                continue;
            }
            let (pts, w, ts) = edge_quadrature(mesh, e, rule);
            let leg = edge_legendre_table(k, mesh.edges[e].length, &ts);
            for j in 0..=k {
                out[start + j] = (0..pts.len()).map(|q| w[q] * data(pts[q]) * leg[j * pts.len() + q]).sum();
            }
        }
        out
    }
}

/// Coefficients of a discrete field; `values` covers every DOF, constrained
/// slots holding their prescribed data.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldCoefficients {
    pub kind: SpaceKind,
    pub values: Vec<f64>,
}

impl FieldCoefficients {
    pub fn zeros(space: &DofSpace) -> Self {
        FieldCoefficients { kind: space.kind, values: vec![0.0; space.n_dofs()] }
    }

    /// Merge free values with prescribed constrained values.
    pub fn from_free(space: &DofSpace, free: &[f64], prescribed: &[f64]) -> Self {
        let values = (0..space.n_dofs())
            .map(|i| match space.free_index[i] {
                Some(f) => free[f],
                None => prescribed[i],
            })
            .collect();
        FieldCoefficients { kind: space.kind, values }
    }

    pub fn free_values(&self, space: &DofSpace) -> Vec<f64> {
        let mut out = vec![0.0; space.n_free];
        for (i, v) in self.values.iter().enumerate() {
            if let Some(f) = space.free_index[i] {
                out[f] = *v;
            }
        }
        out
    }
}

/// The four spaces on one mesh.
#[derive(Clone, Debug)]
pub struct Spaces {
    pub k: usize,
    pub sigma: DofSpace,
    pub us: DofSpace,
    pub ud: DofSpace,
    pub pd: DofSpace,
}

impl Spaces {
    pub fn build(mesh: &CoupledMesh, k: usize) -> Result<Self> {
        Ok(Spaces {
            k,
            sigma: build_space(SpaceKind::SigmaS, mesh, k)?,
            us: build_space(SpaceKind::US, mesh, k)?,
            ud: build_space(SpaceKind::UD, mesh, k)?,
            pd: build_space(SpaceKind::PD, mesh, k)?,
        })
    }

    /// Unknowns of the monolithic system.
    pub fn n_unknowns(&self) -> usize {
        self.sigma.n_free + self.us.n_free + self.ud.n_free + self.pd.n_free
    }
}

/// Pressure moment interpolant of a scalar field.
pub fn interpolate_ih(space: &DofSpace, mesh: &CoupledMesh, rule: &QuadratureRule, q: &dyn Fn([f64; 2]) -> f64) -> Result<FieldCoefficients> {
    if space.kind != SpaceKind::PD {
        return Err(Error::Usage("pressure interpolant needs the porous pressure space".into()));
    }
    Ok(space.interpolate(mesh, rule, &|p| vec![q(p)]))
}

/// Velocity moment interpolant of a vector field.
pub fn interpolate_jh(space: &DofSpace, mesh: &CoupledMesh, rule: &QuadratureRule, v: &dyn Fn([f64; 2]) -> [f64; 2]) -> Result<FieldCoefficients> {
    if space.kind != SpaceKind::UD {
        return Err(Error::Usage("velocity interpolant needs the porous velocity space".into()));
    }
    Ok(space.interpolate(mesh, rule, &|p| v(p).to_vec()))
}
