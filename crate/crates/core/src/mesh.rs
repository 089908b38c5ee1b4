//! Structured criss-cross triangulations of the fluid and porous rectangles,
//! the staggered refinement of the porous mesh and the matched interface.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        if !(xmin < xmax && ymin < ymax) {
            return Err(Error::Config(format!(
                "degenerate rectangle ({xmin},{xmax})x({ymin},{ymax})"
            )));
        }
        Ok(Rect { xmin, xmax, ymin, ymax })
    }

    pub fn area(&self) -> f64 {
        (self.xmax - self.xmin) * (self.ymax - self.ymin)
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.xmin - tol && p[0] <= self.xmax + tol && p[1] >= self.ymin - tol && p[1] <= self.ymax + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Stokes,
    DarcySub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    StokesInterior,
    StokesBoundary,
    DarcyPrimalInterior,
    DarcyPrimalBoundary,
    DarcyDual,
    Interface,
}

impl EdgeClass {
    pub const ALL: [EdgeClass; 6] = [
        EdgeClass::StokesInterior,
        EdgeClass::StokesBoundary,
        EdgeClass::DarcyPrimalInterior,
        EdgeClass::DarcyPrimalBoundary,
        EdgeClass::DarcyDual,
        EdgeClass::Interface,
    ];
}

#[derive(Clone, Debug)]
pub struct Triangle {
    /// Counterclockwise vertex ids.
    pub vertices: [usize; 3],
    pub region: Region,
    /// Primal cell of a Darcy sub-triangle.
    pub parent: Option<usize>,
    /// `edges[i]` joins `vertices[i]` and `vertices[(i + 1) % 3]`.
    pub edges: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoints in ascending lexicographic coordinate order.
    pub vertices: [usize; 2],
    pub class: EdgeClass,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub length: f64,
    /// Lower-id adjacent triangle; the normal points away from it.
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn adjacent(&self) -> Vec<usize> {
        match self.right {
            Some(r) => vec![self.left, r],
            None => vec![self.left],
        }
    }

    /// +1 for the lower-id side, -1 for the other one.
    pub fn side_sign(&self, tri: usize) -> f64 {
        if tri == self.left {
            1.0
        } else {
            -1.0
        }
    }
}

/// A primal triangle of the porous mesh together with its centroid split.
#[derive(Clone, Debug)]
pub struct PrimalCell {
    pub vertices: [usize; 3],
    pub center: usize,
    pub subs: [usize; 3],
}

/// Plain triangulation of one rectangle on an integer lattice.
#[derive(Clone, Debug)]
pub struct RegionMesh {
    /// Lattice keys; coordinate = key / scale.
    pub keys: Vec<(i64, i64)>,
    pub triangles: Vec<[usize; 3]>,
    pub scale: i64,
}

impl RegionMesh {
    pub fn coords(&self, v: usize) -> [f64; 2] {
        let (a, b) = self.keys[v];
        [a as f64 / self.scale as f64, b as f64 / self.scale as f64]
    }
}

/// Porous mesh after centroid refinement.
#[derive(Clone, Debug)]
pub struct StaggeredMesh {
    pub keys: Vec<(i64, i64)>,
    pub scale: i64,
    pub primal: Vec<[usize; 3]>,
    pub centers: Vec<usize>,
    /// Sub-triangles with their parent index; local edge 0 is the primal edge.
    pub subs: Vec<([usize; 3], usize)>,
}

fn grid_count(len: f64, n: usize, what: &str) -> Result<i64> {
    let c = len * n as f64;
    let r = c.round();
    if r < 1.0 || (c - r).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "{what} = {len} is not a whole number of cells of size 1/{n}"
        )));
    }
    Ok(r as i64)
}

fn lattice(v: f64, n: usize) -> Result<i64> {
    let c = v * n as f64;
    if (c - c.round()).abs() > 1e-9 {
        return Err(Error::Config(format!("coordinate {v} is not on the 1/{n} grid")));
    }
    Ok(c.round() as i64)
}

/// Criss-cross triangulation with lattice unit `1 / (6 n)`.
pub fn build_rect_criss_cross(rect: Rect, n: usize) -> Result<RegionMesh> {
    build_rect_on_lattice(rect, n, 6 * n as i64)
}

fn build_rect_on_lattice(rect: Rect, n: usize, scale: i64) -> Result<RegionMesh> {
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    if scale % (6 * n as i64) != 0 {
        return Err(Error::Internal("lattice scale must be a multiple of 6n".into()));
    }
    let nx = grid_count(rect.xmax - rect.xmin, n, "width")?;
    let ny = grid_count(rect.ymax - rect.ymin, n, "height")?;
    let i0 = lattice(rect.xmin, n)?;
    let j0 = lattice(rect.ymin, n)?;
    let step = scale / n as i64;
    let mut keys = Vec::new();
    let mut index: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vid = |k: (i64, i64), keys: &mut Vec<(i64, i64)>| -> usize {
        *index.entry(k).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity((4 * nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            let x0 = (i0 + i) * step;
            let y0 = (j0 + j) * step;
            let a = vid((x0, y0), &mut keys);
            let b = vid((x0 + step, y0), &mut keys);
            let c = vid((x0 + step, y0 + step), &mut keys);
            let d = vid((x0, y0 + step), &mut keys);
            let m = vid((x0 + step / 2, y0 + step / 2), &mut keys);
            triangles.push([a, b, m]);
            triangles.push([b, c, m]);
            triangles.push([c, d, m]);
            triangles.push([d, a, m]);
        }
    }
    Ok(RegionMesh { keys, triangles, scale })
}

/// Split every primal triangle into three sub-triangles at its centroid.
pub fn build_staggered_darcy(primal: &RegionMesh) -> Result<StaggeredMesh> {
    let mut keys = primal.keys.clone();
    let mut centers = Vec::with_capacity(primal.triangles.len());
    let mut subs = Vec::with_capacity(3 * primal.triangles.len());
    for (p, t) in primal.triangles.iter().enumerate() {
        let sx: i64 = t.iter().map(|&v| primal.keys[v].0).sum();
        let sy: i64 = t.iter().map(|&v| primal.keys[v].1).sum();
        if sx % 3 != 0 || sy % 3 != 0 {
            return Err(Error::Internal("centroid not on lattice".into()));
        }
        keys.push((sx / 3, sy / 3));
        let c = keys.len() - 1;
        centers.push(c);
        for i in 0..3 {
            subs.push(([t[i], t[(i + 1) % 3], c], p));
        }
    }
    Ok(StaggeredMesh { keys, scale: primal.scale, primal: primal.triangles.clone(), centers, subs })
}

/// Both regions, their edges and the interface.
#[derive(Clone, Debug)]
pub struct CoupledMesh {
    pub stokes_rect: Rect,
    pub darcy_rect: Rect,
    pub n: usize,
    pub vertices: Vec<[f64; 2]>,
    /// Stokes triangles first, then Darcy sub-triangles.
    pub triangles: Vec<Triangle>,
    pub n_stokes: usize,
    pub primal: Vec<PrimalCell>,
    pub edges: Vec<Edge>,
    /// Interface edge ids ordered along the interface.
    pub interface: Vec<usize>,
    pub h: f64,
}

fn shares_full_edge(a: &Rect, b: &Rect) -> bool {
    let eq = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
    let horizontal = eq(a.xmin, b.xmin) && eq(a.xmax, b.xmax) && (eq(a.ymin, b.ymax) || eq(a.ymax, b.ymin));
    let vertical = eq(a.ymin, b.ymin) && eq(a.ymax, b.ymax) && (eq(a.xmin, b.xmax) || eq(a.xmax, b.xmin));
    horizontal || vertical
}

fn overlaps(a: &Rect, b: &Rect) -> bool {
    a.xmin < b.xmax && b.xmin < a.xmax && a.ymin < b.ymax && b.ymin < a.ymax
}

/// Coupled mesh with the same resolution on both sides.
pub fn build_coupled_mesh(stokes: Rect, darcy: Rect, n: usize) -> Result<CoupledMesh> {
    build_coupled_mesh_with(stokes, darcy, n, n)
}

/// Coupled mesh with separate resolutions; the interface must still match.
pub fn build_coupled_mesh_with(stokes: Rect, darcy: Rect, n_stokes: usize, n_darcy: usize) -> Result<CoupledMesh> {
    if !shares_full_edge(&stokes, &darcy) {
        return Err(Error::Config("the two rectangles must share one full side".into()));
    }
    assemble(stokes, darcy, n_stokes, n_darcy, true)
}

impl CoupledMesh {
    /// Two regions without a common interface (test configurations only).
    pub fn disjoint(stokes: Rect, darcy: Rect, n: usize) -> Result<CoupledMesh> {
        if overlaps(&stokes, &darcy) {
            return Err(Error::Config("rectangles overlap".into()));
        }
        assemble(stokes, darcy, n, n, false)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn assemble(stokes: Rect, darcy: Rect, n_s: usize, n_d: usize, coupled: bool) -> Result<CoupledMesh> {
    if n_s == 0 || n_d == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let lcm = (n_s as i64) * (n_d as i64) / gcd(n_s as i64, n_d as i64);
    let scale = 6 * lcm;
    let smesh = build_rect_on_lattice(stokes, n_s, scale)?;
    let dmesh = build_staggered_darcy(&build_rect_on_lattice(darcy, n_d, scale)?)?;

    let mut keymap: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut add = |k: (i64, i64), vertices: &mut Vec<[f64; 2]>| -> usize {
        *keymap.entry(k).or_insert_with(|| {
            vertices.push([k.0 as f64 / scale as f64, k.1 as f64 / scale as f64]);
            vertices.len() - 1
        })
    };
    let smap: Vec<usize> = smesh.keys.iter().map(|&k| add(k, &mut vertices)).collect();
    let dmap: Vec<usize> = dmesh.keys.iter().map(|&k| add(k, &mut vertices)).collect();

    let mut triangles = Vec::new();
    for t in &smesh.triangles {
        triangles.push(Triangle {
            vertices: [smap[t[0]], smap[t[1]], smap[t[2]]],
            region: Region::Stokes,
            parent: None,
            edges: [usize::MAX; 3],
        });
    }
    let n_stokes = triangles.len();
    let mut primal: Vec<PrimalCell> = dmesh
        .primal
        .iter()
        .zip(&dmesh.centers)
        .map(|(t, &c)| PrimalCell {
            vertices: [dmap[t[0]], dmap[t[1]], dmap[t[2]]],
            center: dmap[c],
            subs: [usize::MAX; 3],
        })
        .collect();
    for (s, (t, p)) in dmesh.subs.iter().enumerate() {
        let id = triangles.len();
        triangles.push(Triangle {
            vertices: [dmap[t[0]], dmap[t[1]], dmap[t[2]]],
            region: Region::DarcySub,
            parent: Some(*p),
            edges: [usize::MAX; 3],
        });
        primal[*p].subs[s % 3] = id;
    }

    // edge topology
    let mut emap: HashMap<(usize, usize), usize> = HashMap::new();
    let mut adj: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut ends: Vec<(usize, usize)> = Vec::new();
    for (ti, t) in triangles.iter_mut().enumerate() {
        for i in 0..3 {
            let a = t.vertices[i];
            let b = t.vertices[(i + 1) % 3];
            let key = (a.min(b), a.max(b));
            let e = *emap.entry(key).or_insert_with(|| {
                adj.push(Vec::new());
                ends.push(key);
                adj.len() - 1
            });
            adj[e].push((ti, i));
            t.edges[i] = e;
        }
    }

    let mut edges = Vec::with_capacity(adj.len());
    for (e, sides) in adj.iter().enumerate() {
        if sides.is_empty() || sides.len() > 2 {
            return Err(Error::Construction(format!("edge {e} has {} neighbours", sides.len())));
        }
        let left = sides.iter().map(|s| s.0).min().unwrap();
        let right = sides.iter().map(|s| s.0).find(|&t| t != left);
        let (a, b) = ends[e];
        let pa = vertices[a];
        let pb = vertices[b];
        let lex = |p: [f64; 2]| (p[0], p[1]);
        let ordered = if lex(pa) <= lex(pb) { [a, b] } else { [b, a] };
        let p0 = vertices[ordered[0]];
        let p1 = vertices[ordered[1]];
        let d = [p1[0] - p0[0], p1[1] - p0[1]];
        let length = d[0].hypot(d[1]);
        let mut normal = [d[1] / length, -d[0] / length];
        let lt = &triangles[left];
        let opp = lt.vertices.iter().copied().find(|&v| v != a && v != b).unwrap();
        let po = vertices[opp];
        if (po[0] - p0[0]) * normal[0] + (po[1] - p0[1]) * normal[1] > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let tangent = [-normal[1], normal[0]];
        let lreg = triangles[left].region;
        let rreg = right.map(|r| triangles[r].region);
        let class = match (lreg, rreg) {
            (Region::Stokes, Some(Region::Stokes)) => EdgeClass::StokesInterior,
            (Region::Stokes, None) => EdgeClass::StokesBoundary,
            (Region::Stokes, Some(Region::DarcySub)) => EdgeClass::Interface,
            (Region::DarcySub, _) => {
                let center = primal[triangles[left].parent.unwrap()].center;
                if a == center || b == center {
                    EdgeClass::DarcyDual
                } else if right.is_some() {
                    EdgeClass::DarcyPrimalInterior
                } else {
                    EdgeClass::DarcyPrimalBoundary
                }
            }
        };
        edges.push(Edge { vertices: ordered, class, normal, tangent, length, left, right });
    }

    // interface matching
    let mut interface: Vec<usize> =
        edges.iter().enumerate().filter(|(_, e)| e.class == EdgeClass::Interface).map(|(i, _)| i).collect();
    if coupled {
        let on_gamma = |p: [f64; 2]| {
            let eps = 1e-12;
            let on_h = (stokes.ymin - darcy.ymax).abs() < eps || (stokes.ymax - darcy.ymin).abs() < eps;
            if on_h {
                let y = if (stokes.ymin - darcy.ymax).abs() < eps { stokes.ymin } else { stokes.ymax };
                (p[1] - y).abs() < eps
            } else {
                let x = if (stokes.xmin - darcy.xmax).abs() < eps { stokes.xmin } else { stokes.xmax };
                (p[0] - x).abs() < eps
            }
        };
        let unmatched = edges
            .iter()
            .filter(|e| matches!(e.class, EdgeClass::StokesBoundary | EdgeClass::DarcyPrimalBoundary))
            .filter(|e| on_gamma(vertices[e.vertices[0]]) && on_gamma(vertices[e.vertices[1]]))
            .count();
        if unmatched > 0 || interface.is_empty() {
            return Err(Error::Construction(format!(
                "interface discretizations do not match ({unmatched} unpaired edges)"
            )));
        }
    }
    interface.sort_by(|&a, &b| {
        let pa = vertices[edges[a].vertices[0]];
        let pb = vertices[edges[b].vertices[0]];
        (pa[0], pa[1]).partial_cmp(&(pb[0], pb[1])).unwrap()
    });

    let h = triangles
        .iter()
        .map(|t| {
            let mut d: f64 = 0.0;
            for i in 0..3 {
                let p = vertices[t.vertices[i]];
                let q = vertices[t.vertices[(i + 1) % 3]];
                d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
            d
        })
        .fold(0.0, f64::max);

    Ok(CoupledMesh { stokes_rect: stokes, darcy_rect: darcy, n: n_s, vertices, triangles, n_stokes, primal, edges, interface, h })
}

impl CoupledMesh {
    pub fn stokes_triangles(&self) -> std::ops::Range<usize> {
        0..self.n_stokes
    }

    pub fn darcy_triangles(&self) -> std::ops::Range<usize> {
        self.n_stokes..self.triangles.len()
    }

    pub fn tri_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let v = &self.triangles[t].vertices;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.tri_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn edge_coords(&self, e: usize) -> [[f64; 2]; 2] {
        let ed = &self.edges[e];
        [self.vertices[ed.vertices[0]], self.vertices[ed.vertices[1]]]
    }

    pub fn edges_of(&self, class: EdgeClass) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.class == class).map(|(i, _)| i)
    }

    pub fn count(&self, class: EdgeClass) -> usize {
        self.edges_of(class).count()
    }

    /// Stokes triangle and Darcy sub-triangle on either side of an interface edge.
    pub fn interface_pair(&self, e: usize) -> (usize, usize) {
        let ed = &self.edges[e];
        (ed.left, ed.right.expect("interface edge has two sides"))
    }

    /// Sub-triangles forming the dual cell of a primal or interface edge.
    pub fn dual_element(&self, e: usize) -> Result<Vec<usize>> {
        let ed = self.edges.get(e).ok_or_else(|| Error::Usage(format!("no edge {e}")))?;
        match ed.class {
            EdgeClass::DarcyPrimalInterior => Ok(vec![ed.left, ed.right.unwrap()]),
            EdgeClass::DarcyPrimalBoundary => Ok(vec![ed.left]),
            EdgeClass::Interface => Ok(vec![ed.right.unwrap()]),
            c => Err(Error::Usage(format!("edge {e} of class {c:?} has no dual element"))),
        }
    }

    /// V - E + T for one region.
    pub fn euler_characteristic(&self, region: Region) -> i64 {
        let tris: Vec<usize> = (0..self.triangles.len()).filter(|&t| self.triangles[t].region == region).collect();
        let mut vs: Vec<usize> = tris.iter().flat_map(|&t| self.triangles[t].vertices).collect();
        vs.sort_unstable();
        vs.dedup();
        let mut es: Vec<usize> = tris.iter().flat_map(|&t| self.triangles[t].edges).collect();
        es.sort_unstable();
        es.dedup();
        vs.len() as i64 - es.len() as i64 + tris.len() as i64
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len()).filter(|&t| self.triangles[t].region == region).map(|t| self.signed_area(t)).sum()
    }

    /// Local index (0..3) of edge `e` in triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> usize {
        self.triangles[t].edges.iter().position(|&x| x == e).expect("edge not on triangle")
    }

    /// Triangle containing a point, if any.
    pub fn locate(&self, p: [f64; 2], region: Region) -> Option<usize> {
        let range = match region {
            Region::Stokes => self.stokes_triangles(),
            Region::DarcySub => self.darcy_triangles(),
        };
        range.into_iter().find(|&t| {
            let [a, b, c] = self.tri_coords(t);
            let s = |u: [f64; 2], v: [f64; 2]| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
            let tol = -1e-12;
            s(a, b) >= tol && s(b, c) >= tol && s(c, a) >= tol
        })
    }
}
