//! Orthonormal modal polynomials on triangles, Legendre polynomials on edges
//! and affine element maps.

use nalgebra::DMatrix;

/// Number of polynomials of total degree at most `p` in two variables.
pub fn dim_p(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Exponents `(a, b)` of `x^a y^b`, ordered by total degree.
pub fn monomials(p: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(p));
    for d in 0..=p {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Hierarchical L2-orthonormal basis of P_p on the reference triangle;
/// the first `dim_p(q)` functions span P_q for every `q <= p`.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    pub degree: usize,
    pub exps: Vec<(usize, usize)>,
    /// Row i holds the monomial coefficients of function i.
    pub coeffs: DMatrix<f64>,
}

impl OrthoBasis {
    pub fn new(degree: usize) -> Self {
        let exps = monomials(degree);
        let n = exps.len();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            let a = exps[i].0 + exps[j].0;
            let b = exps[i].1 + exps[j].1;
            factorial(a) * factorial(b) / factorial(a + b + 2)
        });
        let l = gram.cholesky().expect("monomial Gram matrix is SPD").l();
        let coeffs = l.try_inverse().expect("triangular factor invertible");
        OrthoBasis { degree, exps, coeffs }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Values and reference gradients at `(xi, eta)`.
    pub fn eval(&self, xi: f64, eta: f64, val: &mut [f64], dxi: &mut [f64], deta: &mut [f64]) {
        let n = self.len();
        let p = self.degree;
        let mut px = vec![1.0; p + 1];
        let mut py = vec![1.0; p + 1];
        for i in 1..=p {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        let mono: Vec<(f64, f64, f64)> = self
            .exps
            .iter()
            .map(|&(a, b)| {
                let v = px[a] * py[b];
                let dx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let dy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                (v, dx, dy)
            })
            .collect();
        for i in 0..n {
            let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
            for (j, m) in mono.iter().enumerate().take(i + 1) {
                let c = self.coeffs[(i, j)];
                v += c * m.0;
                dx += c * m.1;
                dy += c * m.2;
            }
            val[i] = v;
            dxi[i] = dx;
            deta[i] = dy;
        }
    }
}

/// Orthonormal Legendre polynomials on an edge of length `h`, parameter `t` in [0, 1].
pub fn legendre_edge(k: usize, t: f64, h: f64, out: &mut [f64]) {
    let x = 2.0 * t - 1.0;
    let mut p0 = 1.0;
    let mut p1 = x;
    for (j, o) in out.iter_mut().enumerate().take(k + 1) {
        let pj = match j {
            0 => 1.0,
            1 => x,
            _ => {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *o = ((2 * j + 1) as f64 / h).sqrt() * pj;
    }
}

/// Affine map from the reference triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        ElementGeometry { origin: v[0], jac, inv, det }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [self.inv[0][0] * d[0] + self.inv[0][1] * d[1], self.inv[1][0] * d[0] + self.inv[1][1] * d[1]]
    }

    /// Whether a reference point lies in the closed reference triangle.
    pub fn contains_reference(r: [f64; 2], tol: f64) -> bool {
        r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1.0 + tol
    }
}

/// Scalar orthonormal modal functions of an element evaluated at physical points.
/// Layout: `val[i * np + q]`, `grad[(i * np + q) * 2 + d]`.
pub fn modal_scalar(basis: &OrthoBasis, geo: &ElementGeometry, points: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    let n = basis.len();
    let np = points.len();
    let scale = 1.0 / (2.0 * geo.area()).sqrt();
    let mut val = vec![0.0; n * np];
    let mut grad = vec![0.0; n * np * 2];
    let mut v = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    for (q, p) in points.iter().enumerate() {
        let r = geo.to_reference(*p);
        basis.eval(r[0], r[1], &mut v, &mut dx, &mut dy);
        for i in 0..n {
            val[i * np + q] = v[i] * scale;
            // grad_x = J^{-T} grad_ref
            grad[(i * np + q) * 2] = (geo.inv[0][0] * dx[i] + geo.inv[1][0] * dy[i]) * scale;
            grad[(i * np + q) * 2 + 1] = (geo.inv[0][1] * dx[i] + geo.inv[1][1] * dy[i]) * scale;
        }
    }
    (val, grad)
}
