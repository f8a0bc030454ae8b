//! Exact surface oracle, order-k_g parametric lift and pointwise geometry.

mod curvature;
mod flatten;

pub use curvature::{curvature_field, CurvatureApproximation, CurvatureMode};
pub use flatten::{
    flatten_macroelement, loglog_slope, measure_patches, patch_rate_study, verify_patch_rates, FlatPatch,
    PatchMeasurements, RateReport, FLATTEN_THRESHOLD,
};

use std::fmt::Debug;
use std::io::Write;
use std::sync::Arc;

use crate::basis::{LagrangeBasis, NodeKind, ShapeEval};
use crate::error::{Error, Result};
use crate::mesh::FlatMesh;
use crate::{Mat3, Mat3x2, Vec3};

/// Largest supported geometry order.
pub const MAX_GEOMETRY_ORDER: usize = 5;

/// Closest-point data of a smooth closed surface.
pub trait SurfaceOracle: Debug + Send + Sync {
    /// Closest point on the surface.
    fn project(&self, x: &Vec3) -> Vec3;
    /// Unit normal at a surface point.
    fn normal(&self, y: &Vec3) -> Vec3;
    /// Gaussian curvature at a surface point.
    fn gauss_curvature(&self, y: &Vec3) -> f64;
    /// Jacobian of the closest-point map at `x`.
    fn projection_jacobian(&self, x: &Vec3) -> Mat3;

    fn tangential_projection(&self, y: &Vec3) -> Mat3 {
        let n = self.normal(y);
        Mat3::identity() - n * n.transpose()
    }
}

/// The unit sphere.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitSphere;

impl SurfaceOracle for UnitSphere {
    fn project(&self, x: &Vec3) -> Vec3 {
        x / x.norm()
    }

    fn normal(&self, y: &Vec3) -> Vec3 {
        y / y.norm()
    }

    fn gauss_curvature(&self, _y: &Vec3) -> f64 {
        1.0
    }

    fn projection_jacobian(&self, x: &Vec3) -> Mat3 {
        let r = x.norm();
        let n = x / r;
        (Mat3::identity() - n * n.transpose()) / r
    }
}

/// Oracle quantities at the closest point π(x).
#[derive(Debug, Clone, Copy)]
pub struct ExactData {
    pub point: Vec3,
    pub normal: Vec3,
    pub projection: Mat3,
    pub gauss: f64,
}

/// Geometric quantities of the parametric surface at one point.
#[derive(Debug, Clone, Copy)]
pub struct GeometryData {
    pub x: Vec3,
    /// Jacobian of the element map with respect to reference coordinates.
    pub df: Mat3x2,
    /// DF (DFᵀDF)⁻¹: maps reference gradients to surface gradients.
    pub df_pinv_t: Mat3x2,
    pub mu: f64,
    /// Reference gradient of μ_h.
    pub mu_grad: [f64; 2],
    pub normal: Vec3,
    pub p: Mat3,
    pub q: Mat3,
    /// Weingarten map −∇n_h.
    pub weingarten: Mat3,
    pub gauss: f64,
    pub exact: ExactData,
}

impl GeometryData {
    /// Surface gradient of a scalar with the given reference gradient.
    pub fn surface_gradient(&self, g: [f64; 2]) -> Vec3 {
        self.df_pinv_t.column(0) * g[0] + self.df_pinv_t.column(1) * g[1]
    }
}

/// Order-k_g Lagrange interpolation of the closest-point map on every flat triangle.
#[derive(Debug, Clone)]
pub struct ParametricGeometry {
    mesh: Arc<FlatMesh>,
    oracle: Arc<dyn SurfaceOracle>,
    basis: LagrangeBasis,
    /// Node coefficients, `basis.len()` per element.
    coeffs: Vec<Vec3>,
}

/// Flat position of a local Lagrange node, computed identically from every element sharing it.
fn flat_node(mesh: &FlatMesh, t: usize, kind: NodeKind, idx: [usize; 3], k: usize) -> Vec3 {
    let tri = mesh.triangles[t];
    match kind {
        NodeKind::Vertex(j) => mesh.vertices[tri[j]],
        NodeKind::Edge(e, s) => {
            let (ga, gb) = (tri[e], tri[(e + 1) % 3]);
            let (lo, hi, pos) = if ga < gb { (ga, gb, s) } else { (gb, ga, k - s) };
            let (a, b) = (mesh.vertices[lo], mesh.vertices[hi]);
            a + (b - a) * (pos as f64 / k as f64)
        }
        NodeKind::Interior(_) => {
            let v = mesh.corners(t);
            (v[0] * idx[0] as f64 + v[1] * idx[1] as f64 + v[2] * idx[2] as f64) / k as f64
        }
    }
}

/// Lift the flat mesh to the order-`kg` parametric surface.
pub fn lift_geometry(mesh: Arc<FlatMesh>, oracle: Arc<dyn SurfaceOracle>, kg: usize) -> Result<ParametricGeometry> {
    if !(1..=MAX_GEOMETRY_ORDER).contains(&kg) {
        return Err(Error::Config(format!("geometry order {kg} outside 1..={MAX_GEOMETRY_ORDER}")));
    }
    let basis = LagrangeBasis::new(kg);
    let mut coeffs = Vec::with_capacity(mesh.num_triangles() * basis.len());
    for t in 0..mesh.num_triangles() {
        for (i, &kind) in basis.kinds.iter().enumerate() {
            let x = flat_node(&mesh, t, kind, basis.indices[i], kg);
            // Mesh vertices already lie on the surface.
            coeffs.push(if matches!(kind, NodeKind::Vertex(_)) { x } else { oracle.project(&x) });
        }
    }
    Ok(ParametricGeometry { mesh, oracle, basis, coeffs })
}

impl ParametricGeometry {
    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn mesh(&self) -> &Arc<FlatMesh> {
        &self.mesh
    }

    pub fn oracle(&self) -> &Arc<dyn SurfaceOracle> {
        &self.oracle
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_triangles()
    }

    /// Geometry node coefficients of element `t`.
    pub fn element_nodes(&self, t: usize) -> &[Vec3] {
        let n = self.basis.len();
        &self.coeffs[t * n..(t + 1) * n]
    }

    /// Shape functions of the geometry basis at `xi`, with Hessians.
    pub fn tabulate(&self, xi: [f64; 2]) -> ShapeEval {
        self.basis.eval(xi, true)
    }

    /// World point of element `t` at `xi`.
    pub fn point(&self, t: usize, xi: [f64; 2]) -> Vec3 {
        if self.order() == 1 {
            return self.mesh.affine_point(t, xi);
        }
        let s = self.basis.eval(xi, false);
        self.element_nodes(t).iter().zip(&s.values).map(|(c, v)| c * *v).sum()
    }

    /// All geometric data at reference point `xi` of element `t`.
    pub fn geometry_data(&self, t: usize, xi: [f64; 2]) -> Result<GeometryData> {
        let shape = if self.order() == 1 { ShapeEval::default() } else { self.tabulate(xi) };
        self.data_with(t, xi, &shape)
    }

    /// As [`Self::geometry_data`] with a precomputed tabulation (ignored for k_g = 1).
    pub fn data_with(&self, t: usize, xi: [f64; 2], shape: &ShapeEval) -> Result<GeometryData> {
        let (x, x1, x2, x11, x12, x22);
        if self.order() == 1 {
            let [a, b, c] = self.mesh.corners(t);
            x1 = b - a;
            x2 = c - a;
            x = a + x1 * xi[0] + x2 * xi[1];
            x11 = Vec3::zeros();
            x12 = Vec3::zeros();
            x22 = Vec3::zeros();
        } else {
            let nodes = self.element_nodes(t);
            let mut acc = [Vec3::zeros(); 6];
            for (i, c) in nodes.iter().enumerate() {
                let g = shape.grads[i];
                let h = shape.hessians[i];
                acc[0] += c * shape.values[i];
                acc[1] += c * g[0];
                acc[2] += c * g[1];
                acc[3] += c * h[0][0];
                acc[4] += c * h[0][1];
                acc[5] += c * h[1][1];
            }
            [x, x1, x2, x11, x12, x22] = acc;
        }
        let nvec = x1.cross(&x2);
        let mu = nvec.norm();
        if !(mu > 1e-14) {
            return Err(Error::Geometry(format!("degenerate Jacobian on element {t} (mu = {mu:e})")));
        }
        let n = nvec / mu;
        let df = Mat3x2::from_columns(&[x1, x2]);
        let g11 = x1.dot(&x1);
        let g12 = x1.dot(&x2);
        let g22 = x2.dot(&x2);
        let det = g11 * g22 - g12 * g12;
        let gi = [[g22 / det, -g12 / det], [-g12 / det, g11 / det]];
        let c0 = x1 * gi[0][0] + x2 * gi[1][0];
        let c1 = x1 * gi[0][1] + x2 * gi[1][1];
        let df_pinv_t = Mat3x2::from_columns(&[c0, c1]);
        let p = Mat3::identity() - n * n.transpose();
        let dn1 = x11.cross(&x2) + x1.cross(&x12);
        let dn2 = x12.cross(&x2) + x1.cross(&x22);
        let mu_grad = [n.dot(&dn1), n.dot(&dn2)];
        let d1 = p * dn1 / mu;
        let d2 = p * dn2 / mu;
        let weingarten = -(d1 * c0.transpose() + d2 * c1.transpose());
        let tr = weingarten.trace();
        let gauss = 0.5 * (tr * tr - (weingarten * weingarten).trace());
        let y = self.oracle.project(&x);
        let en = self.oracle.normal(&y);
        let exact = ExactData {
            point: y,
            normal: en,
            projection: Mat3::identity() - en * en.transpose(),
            gauss: self.oracle.gauss_curvature(&y),
        };
        Ok(GeometryData { x, df, df_pinv_t, mu, mu_grad, normal: n, p, q: n * n.transpose(), weingarten, gauss, exact })
    }

    /// Write the lifted surface as OFF, each element split into k_g² flat pieces.
    pub fn write_off<W: Write>(&self, mut out: W) -> Result<()> {
        let k = self.order();
        let mut verts = Vec::new();
        let mut faces = Vec::new();
        for t in 0..self.num_elements() {
            let mut local = vec![vec![0usize; k + 1]; k + 1];
            for i in 0..=k {
                for j in 0..=k - i {
                    local[i][j] = verts.len();
                    verts.push(self.point(t, [j as f64 / k as f64, i as f64 / k as f64]));
                }
            }
            for i in 0..k {
                for j in 0..k - i {
                    faces.push([local[i][j], local[i][j + 1], local[i + 1][j]]);
                    if j + 1 < k - i {
                        faces.push([local[i][j + 1], local[i + 1][j + 1], local[i + 1][j]]);
                    }
                }
            }
        }
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} 0", verts.len(), faces.len())?;
        for v in &verts {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
        }
        for [a, b, c] in &faces {
            writeln!(out, "3 {a} {b} {c}")?;
        }
        Ok(())
    }
}
