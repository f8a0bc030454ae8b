//! The sphere benchmark with stream function φ = z − x².
//!
//! The velocity is the rotated gradient ∇φ × x, which on the unit sphere is
//! u*(x, y, z) = (−y, x + 2xz, −2xy), and the pressure is p*(x, y, z) = −x.

use std::ops::{Add, Mul, Neg, Sub};

use crate::{Mat3, Vec3};

/// Exact velocity, pressure and load of the sphere benchmark.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchmarkSolution;

pub fn benchmark() -> BenchmarkSolution {
    BenchmarkSolution
}

trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn c(v: f64) -> Self;
}

impl Scalar for f64 {
    fn c(v: f64) -> Self {
        v
    }
}

fn velocity_poly<T: Scalar>([x, y, z]: [T; 3]) -> [T; 3] {
    let two = T::c(2.0);
    [-y, x + two * x * z, -(two * x * y)]
}

fn pressure_poly<T: Scalar>([x, _, _]: [T; 3]) -> T {
    -x
}

impl BenchmarkSolution {
    pub fn stream(&self, y: &Vec3) -> f64 {
        y.z - y.x * y.x
    }

    /// u* at a point of the sphere. The polynomial is also used off the surface.
    pub fn velocity(&self, y: &Vec3) -> Vec3 {
        let [a, b, c] = velocity_poly([y.x, y.y, y.z]);
        Vec3::new(a, b, c)
    }

    /// Jacobian of the velocity polynomial.
    pub fn velocity_jacobian(&self, y: &Vec3) -> Mat3 {
        Mat3::new(0.0, -1.0, 0.0, 1.0 + 2.0 * y.z, 0.0, 2.0 * y.x, -2.0 * y.y, -2.0 * y.x, 0.0)
    }

    pub fn pressure(&self, y: &Vec3) -> f64 {
        pressure_poly([y.x, y.y, y.z])
    }

    /// The load f(x, y, z) = (−x² − y + 1, x(6z − y + 1), −x(6y + z)).
    pub fn load(&self, y: &Vec3) -> Vec3 {
        let (x, yy, z) = (y.x, y.y, y.z);
        Vec3::new(-x * x - yy + 1.0, x * (6.0 * z - yy + 1.0), -x * (6.0 * yy + z))
    }

    /// Strong residuals at a sphere point of
    /// −P div E(u) + u − ∇p − f and −½P div ∇u − ½Ku + u − ∇p − f with K = 1,
    /// computed from second derivatives of the degree-zero extension.
    pub fn strong_residuals(&self, y: &Vec3) -> (Vec3, Vec3) {
        let x = [Jet2::var(y.x, 0), Jet2::var(y.y, 1), Jet2::var(y.z, 2)];
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let inv = r.recip();
        let yy = [x[0] * inv, x[1] * inv, x[2] * inv];
        let u = velocity_poly(yy);
        let p = pressure_poly(yy);
        // P(x) and DU(x) as first-order jets.
        let proj: [[Jet1; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let v = yy[i] * yy[j];
                Jet1 { v: f64::from(u8::from(i == j)) - v.v, g: v.g.map(|d| -d) }
            })
        });
        let du: [[Jet1; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| Jet1 { v: u[i].g[j], g: u[i].h[j] }));
        let grad: [[Jet1; 3]; 3] = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = Jet1::default();
                for a in 0..3 {
                    for b in 0..3 {
                        s = s + proj[i][a] * du[a][b] * proj[b][j];
                    }
                }
                s
            })
        });
        let pv: Mat3 = Mat3::from_fn(|i, j| proj[i][j].v);
        let div = |t: &dyn Fn(usize, usize) -> Jet1| -> Vec3 {
            Vec3::from_fn(|i, _| {
                let mut s = 0.0;
                for j in 0..3 {
                    let e = t(i, j);
                    for k in 0..3 {
                        s += pv[(j, k)] * e.g[k];
                    }
                }
                s
            })
        };
        let sym = div(&|i, j| (grad[i][j] + grad[j][i]) * 0.5);
        let full = div(&|i, j| grad[i][j]);
        let uv = Vec3::new(u[0].v, u[1].v, u[2].v);
        let gp = pv * Vec3::new(p.g[0], p.g[1], p.g[2]);
        let f = self.load(y);
        let r1 = -(pv * sym) + uv - gp - f;
        let r2 = -(pv * full) * 0.5 - uv * 0.5 + uv - gp - f;
        (r1, r2)
    }
}

/// Value and gradient in three variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Jet1 {
    v: f64,
    g: [f64; 3],
}

impl Add for Jet1 {
    type Output = Jet1;
    fn add(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v + o.v, g: std::array::from_fn(|k| self.g[k] + o.g[k]) }
    }
}

impl Mul for Jet1 {
    type Output = Jet1;
    fn mul(self, o: Jet1) -> Jet1 {
        Jet1 { v: self.v * o.v, g: std::array::from_fn(|k| self.g[k] * o.v + self.v * o.g[k]) }
    }
}

impl Mul<f64> for Jet1 {
    type Output = Jet1;
    fn mul(self, s: f64) -> Jet1 {
        Jet1 { v: self.v * s, g: self.g.map(|d| d * s) }
    }
}

/// Value, gradient and Hessian in three variables.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Jet2 {
    v: f64,
    g: [f64; 3],
    h: [[f64; 3]; 3],
}

impl Jet2 {
    fn var(v: f64, k: usize) -> Self {
        let mut g = [0.0; 3];
        g[k] = 1.0;
        Jet2 { v, g, h: [[0.0; 3]; 3] }
    }

    /// φ(self) for a scalar function with derivatives d0, d1, d2.
    fn chain(self, d0: f64, d1: f64, d2: f64) -> Self {
        Jet2 {
            v: d0,
            g: self.g.map(|a| d1 * a),
            h: std::array::from_fn(|i| std::array::from_fn(|j| d1 * self.h[i][j] + d2 * self.g[i] * self.g[j])),
        }
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Scalar for Jet2 {
    fn c(v: f64) -> Self {
        Jet2 { v, ..Default::default() }
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            g: std::array::from_fn(|k| self.g[k] + o.g[k]),
            h: std::array::from_fn(|i| std::array::from_fn(|j| self.h[i][j] + o.h[i][j])),
        }
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 { v: -self.v, g: self.g.map(|d| -d), h: self.h.map(|r| r.map(|d| -d)) }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            g: std::array::from_fn(|k| self.g[k] * o.v + self.v * o.g[k]),
            h: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    self.h[i][j] * o.v + self.g[i] * o.g[j] + self.g[j] * o.g[i] + self.v * o.h[i][j]
                })
            }),
        }
    }
}
