//! Exact solutions, sources and boundary data of the shipped test problems.

use std::f64::consts::PI;

use nalgebra::{Const, SVector};
use num_dual::{hessian, Dual2Vec, DualNum};

use crate::error::{Error, Result};
use crate::mesh::Rect;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CaseId {
    /// Smooth solution that violates the interface conditions.
    Example1 { mu: f64 },
    /// Interface-exact solution on the half-height strips.
    Example2,
    /// Interface-exact solution with slip coefficient 1/mu.
    Example3 { mu: f64 },
    /// Lid-driven cavity over a porous bed; no exact solution.
    Example4,
    /// Low-degree polynomial solution contained in the k = 2 spaces.
    Polynomial,
    /// Everything zero.
    Zero,
}

impl CaseId {
    pub fn from_number(id: u32, mu: f64) -> Result<Self> {
        match id {
            1 => Ok(CaseId::Example1 { mu }),
            2 => Ok(CaseId::Example2),
            3 => Ok(CaseId::Example3 { mu }),
            4 => Ok(CaseId::Example4),
            _ => Err(Error::Config(format!("unknown example {id} (expected 1..=4)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub id: CaseId,
    pub stokes: Rect,
    pub darcy: Rect,
    pub mu: f64,
    /// Slip coefficient of the Beavers-Joseph-Saffman condition.
    pub slip: f64,
    /// Scalar permeability.
    pub kappa: f64,
}

fn rect(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Rect {
    Rect { xmin, xmax, ymin, ymax }
}

/// Exact (u_x, u_y, fluid pressure, porous pressure).
fn fields<D: DualNum<Primitive = f64> + Copy>(id: CaseId, x: D, y: D) -> [D; 4] {
    let c = |v: f64| x * 0.0 + v;
    match id {
        CaseId::Example1 { .. } => {
            let ux = -((y * (PI / 2.0)).cos().powi(2)) * (x * (PI / 2.0)).sin();
            let uy = (x * (PI / 2.0)).cos() * ((y * PI).sin() + y * PI) * 0.25;
            let p = -(x * (PI / 2.0)).cos() * y * (PI / 4.0);
            [ux, uy, p, p]
        }
        CaseId::Example2 => {
            let e = (y * 0.5).exp();
            let ux = -(x * PI).sin() * e / (2.0 * PI * PI);
            let uy = (x * PI).cos() * e / PI;
            let ps = -(x * PI).cos() * e / PI;
            [ux, uy, ps, ps * 2.0]
        }
        CaseId::Example3 { .. } => {
            let ym = y - 1.0;
            let ux = x * x * ym * ym + y;
            let uy = -(x * ym.powi(3)) * (2.0 / 3.0);
            let p = (-(x * PI).sin() * PI + 2.0) * (y * PI).cos();
            [ux, uy, p, p]
        }
        CaseId::Polynomial => [x * x + y, -(x * y) * 2.0, x - y, x * y + 1.0],
        CaseId::Example4 | CaseId::Zero => [c(0.0), c(0.0), c(0.0), c(0.0)],
    }
}

/// Value, gradient and Hessian of one exact scalar field.
fn derivatives(id: CaseId, which: usize, p: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let (v, g, h) = hessian(
        |z: SVector<Dual2Vec<f64, Const<2>>, 2>| fields(id, z[0], z[1])[which],
        &SVector::from(p),
    );
    (v, [g[0], g[1]], [[h[(0, 0)], h[(0, 1)]], [h[(1, 0)], h[(1, 1)]]])
}

impl ManufacturedCase {
    pub fn new(id: CaseId) -> Self {
        let (stokes, darcy, mu, slip) = match id {
            CaseId::Example1 { mu } => (rect(0.0, 1.0, 1.0, 2.0), rect(0.0, 1.0, 0.0, 1.0), mu, 1.0),
            CaseId::Example2 => {
                (rect(0.0, 1.0, 0.5, 1.0), rect(0.0, 1.0, 0.0, 0.5), 1.0, 2.0 / (1.0 + 4.0 * PI * PI))
            }
            CaseId::Example3 { mu } => (rect(0.0, 1.0, 1.0, 2.0), rect(0.0, 1.0, 0.0, 1.0), mu, 1.0 / mu),
            CaseId::Example4 => (rect(0.0, 1.0, 1.0, 1.25), rect(0.0, 1.0, 0.25, 1.0), 1.0, 1.0),
            CaseId::Polynomial | CaseId::Zero => (rect(0.0, 1.0, 1.0, 2.0), rect(0.0, 1.0, 0.0, 1.0), 1.0, 1.0),
        };
        ManufacturedCase { id, stokes, darcy, mu, slip, kappa: 1.0 }
    }

    pub fn has_exact(&self) -> bool {
        !matches!(self.id, CaseId::Example4)
    }

    /// Whether the exact fields satisfy all three interface conditions.
    pub fn interface_exact(&self) -> bool {
        !matches!(self.id, CaseId::Example1 { .. })
    }

    pub fn u_s(&self, p: [f64; 2]) -> [f64; 2] {
        let f = fields(self.id, p[0], p[1]);
        [f[0], f[1]]
    }

    pub fn grad_u_s(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let (_, gx, _) = derivatives(self.id, 0, p);
        let (_, gy, _) = derivatives(self.id, 1, p);
        [gx, gy]
    }

    pub fn p_s(&self, p: [f64; 2]) -> f64 {
        fields(self.id, p[0], p[1])[2]
    }

    pub fn p_d(&self, p: [f64; 2]) -> f64 {
        fields(self.id, p[0], p[1])[3]
    }

    /// Stress 2 mu eps(u) - p I as (xx, yy, xy).
    pub fn sigma(&self, p: [f64; 2]) -> [f64; 3] {
        let g = self.grad_u_s(p);
        let ps = self.p_s(p);
        [
            2.0 * self.mu * g[0][0] - ps,
            2.0 * self.mu * g[1][1] - ps,
            self.mu * (g[0][1] + g[1][0]),
        ]
    }

    /// Darcy velocity -K grad p.
    pub fn u_d(&self, p: [f64; 2]) -> [f64; 2] {
        let (_, g, _) = derivatives(self.id, 3, p);
        [-self.kappa * g[0], -self.kappa * g[1]]
    }

    /// Momentum source -div(sigma).
    pub fn f_s(&self, p: [f64; 2]) -> [f64; 2] {
        if !self.has_exact() {
            return [0.0, 0.0];
        }
        let (_, _, hx) = derivatives(self.id, 0, p);
        let (_, _, hy) = derivatives(self.id, 1, p);
        let (_, gp, _) = derivatives(self.id, 2, p);
        let mu = self.mu;
        let dx = 2.0 * mu * (hx[0][0] + 0.5 * (hx[1][1] + hy[0][1])) - gp[0];
        let dy = 2.0 * mu * (0.5 * (hx[0][1] + hy[0][0]) + hy[1][1]) - gp[1];
        [-dx, -dy]
    }

    /// Mass source div(u_D).
    pub fn f_d(&self, p: [f64; 2]) -> f64 {
        match self.id {
            CaseId::Example4 => 2.0 * (PI * p[0]).sin(),
            _ => {
                let (_, _, h) = derivatives(self.id, 3, p);
                -self.kappa * (h[0][0] + h[1][1])
            }
        }
    }

    /// Velocity data on the outer fluid boundary.
    pub fn stokes_data(&self, p: [f64; 2]) -> [f64; 2] {
        match self.id {
            CaseId::Example4 => {
                if (p[1] - self.stokes.ymax).abs() < 1e-12 {
                    [(PI * p[0]).sin(), 0.0]
                } else {
                    [0.0, 0.0]
                }
            }
            _ => self.u_s(p),
        }
    }

    /// Pressure data on the outer porous boundary.
    pub fn darcy_data(&self, p: [f64; 2]) -> f64 {
        self.p_d(p)
    }

    /// Mass residual u_S.n_S - u_D.n_S.
    pub fn r1(&self, p: [f64; 2], n: [f64; 2]) -> f64 {
        if !self.has_exact() {
            return 0.0;
        }
        let us = self.u_s(p);
        let ud = self.u_d(p);
        (us[0] - ud[0]) * n[0] + (us[1] - ud[1]) * n[1]
    }

    /// Normal stress residual -sigma n.n - p_D.
    pub fn r2(&self, p: [f64; 2], n: [f64; 2]) -> f64 {
        if !self.has_exact() {
            return 0.0;
        }
        let s = self.sigma(p);
        let sn = [s[0] * n[0] + s[2] * n[1], s[2] * n[0] + s[1] * n[1]];
        -(sn[0] * n[0] + sn[1] * n[1]) - self.p_d(p)
    }

    /// Slip residual u.t + G sigma n.t.
    pub fn r3(&self, p: [f64; 2], n: [f64; 2], t: [f64; 2]) -> f64 {
        if !self.has_exact() {
            return 0.0;
        }
        let s = self.sigma(p);
        let sn = [s[0] * n[0] + s[2] * n[1], s[2] * n[0] + s[1] * n[1]];
        let u = self.u_s(p);
        u[0] * t[0] + u[1] * t[1] + self.slip * (sn[0] * t[0] + sn[1] * t[1])
    }
}
