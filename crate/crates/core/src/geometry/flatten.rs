use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};

use super::{lift_geometry, ParametricGeometry, UnitSphere};
use crate::error::{Error, Result};
use crate::mesh::{build_icosphere, mesh_size, vertex_star_partitioning, FlatMesh, Macroelement};
use crate::quadrature::triangle_rule;
use crate::{Mat3x2, Vec3};

/// Largest allowed ‖n_j − n̄‖ between a member normal and the mean patch normal.
pub const FLATTEN_THRESHOLD: f64 = 0.5;

/// A macroelement mapped into the tangent plane of its seed element.
#[derive(Debug, Clone)]
pub struct FlatPatch {
    pub patch: Macroelement,
    pub origin: Vec3,
    /// Orthonormal tangent basis of the seed element.
    pub tangent: [Vec3; 2],
    /// Per member: [⟨tᵃ, P̂_j tᵇ⟩]ₐᵦ.
    pub maps: Vec<Matrix2<f64>>,
    /// Per member: det of the map.
    pub mu_bar: Vec<f64>,
    /// Per member: ‖(t¹, t²) − (P̂_j t¹, P̂_j t²)‖, the displacement of the projected basis.
    pub basis_shift: Vec<f64>,
    /// Per member: images of the corners in the plane.
    pub flat_coords: Vec<[Vector2<f64>; 3]>,
    /// Per member: Jacobian of reference coordinates to flat coordinates.
    pub reference_jacobians: Vec<Matrix2<f64>>,
}

/// Flatten `patch` onto the seed tangent plane by projected tangent bases.
pub fn flatten_macroelement(mesh: &FlatMesh, patch: &Macroelement, geom: &ParametricGeometry) -> Result<FlatPatch> {
    if geom.num_elements() != mesh.num_triangles() {
        return Err(Error::Mismatch("geometry and mesh differ in element count".into()));
    }
    if !patch.members.contains(&patch.seed) || !patch.is_edge_connected(mesh) {
        return Err(Error::Flattening("patch is not an edge-connected set containing its seed".into()));
    }
    let seed = patch.seed;
    let [a, b, _] = mesh.corners(seed);
    let n = mesh.normal(seed);
    let t1 = (b - a).normalize();
    let t2 = n.cross(&t1);
    let mean = patch.members.iter().fold(Vec3::zeros(), |s, &t| s + mesh.normal(t));
    if mean.norm() < 1e-12 {
        return Err(Error::Flattening("patch normals cancel".into()));
    }
    let mean = mean.normalize();
    let mut maps = Vec::with_capacity(patch.members.len());
    let mut mu_bar = Vec::with_capacity(patch.members.len());
    let mut basis_shift = Vec::with_capacity(patch.members.len());
    let mut flat_coords = Vec::with_capacity(patch.members.len());
    let mut reference_jacobians = Vec::with_capacity(patch.members.len());
    let to_plane = |x: Vec3| Vector2::new(t1.dot(&(x - a)), t2.dot(&(x - a)));
    for &t in &patch.members {
        let nj = mesh.normal(t);
        let dev = (nj - mean).norm();
        if dev >= FLATTEN_THRESHOLD {
            return Err(Error::Flattening(format!(
                "normal deviation {dev:.3} on triangle {t} exceeds {FLATTEN_THRESHOLD}"
            )));
        }
        let m = if t == seed {
            Matrix2::identity()
        } else {
            let pt = |v: Vec3| v - nj * nj.dot(&v);
            let (p1, p2) = (pt(t1), pt(t2));
            Matrix2::new(t1.dot(&p1), t1.dot(&p2), t2.dot(&p1), t2.dot(&p2))
        };
        let c = mesh.corners(t);
        let fc = [to_plane(c[0]), to_plane(c[1]), to_plane(c[2])];
        let j = Matrix2::from_columns(&[fc[1] - fc[0], fc[2] - fc[0]]);
        mu_bar.push(m.determinant());
        basis_shift.push(if t == seed { 0.0 } else { Vector2::new(nj.dot(&t1), nj.dot(&t2)).norm() });
        maps.push(m);
        flat_coords.push(fc);
        reference_jacobians.push(j);
    }
    Ok(FlatPatch {
        patch: patch.clone(),
        origin: a,
        tangent: [t1, t2],
        maps,
        mu_bar,
        basis_shift,
        flat_coords,
        reference_jacobians,
    })
}

impl FlatPatch {
    /// Deviation of π̄ from the identity on member `j`, measured on the projected tangent basis.
    /// The planar matrix M_j − I = −wwᵀ only sees the square of this O(h) tilt.
    pub fn deviation(&self, j: usize) -> f64 {
        self.basis_shift[j]
    }

    /// Signed area of member `j` in the plane.
    pub fn flat_area(&self, j: usize) -> f64 {
        0.5 * self.reference_jacobians[j].determinant()
    }

    /// Derivative of F_h = π_h ∘ π̄⁻¹ with respect to flat coordinates.
    pub fn df_h(&self, geom: &ParametricGeometry, j: usize, xi: [f64; 2]) -> Result<Mat3x2> {
        let d = geom.geometry_data(self.patch.members[j], xi)?;
        let inv = self.jacobian_inverse(j)?;
        Ok(d.df * inv)
    }

    /// Integration element of F_h and its flat-coordinate gradient.
    pub fn mu_h(&self, geom: &ParametricGeometry, j: usize, xi: [f64; 2]) -> Result<(f64, Vector2<f64>)> {
        let d = geom.geometry_data(self.patch.members[j], xi)?;
        let inv = self.jacobian_inverse(j)?;
        let det = self.reference_jacobians[j].determinant().abs();
        let grad = inv.transpose() * Vector2::new(d.mu_grad[0], d.mu_grad[1]) / det;
        Ok((d.mu / det, grad))
    }

    fn jacobian_inverse(&self, j: usize) -> Result<Matrix2<f64>> {
        self.reference_jacobians[j]
            .try_inverse()
            .ok_or_else(|| Error::Flattening(format!("member {j} degenerates in the plane")))
    }

    /// True when every member keeps its orientation and no two members overlap.
    pub fn is_conforming(&self) -> bool {
        self.reference_jacobians.iter().all(|j| j.determinant() > 0.0)
    }
}

/// Worst-case patch quantities on one mesh level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMeasurements {
    pub h: f64,
    /// max |μ̄ − 1|
    pub mu_bar: f64,
    /// max ‖(t¹, t²) − (P̂_j t¹, P̂_j t²)‖
    pub flattening: f64,
    /// max |μ_h − 1|
    pub mu_h: f64,
    /// max ‖D μ_h‖
    pub dmu_h: f64,
    /// max ‖⟦D F_h⟧‖ over interior patch edges
    pub df_jump: f64,
}

fn sample_points() -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]];
    pts.extend(triangle_rule(4).expect("valid degree").points);
    pts
}

fn local_vertex_coords(mesh: &FlatMesh, t: usize, v: usize) -> [f64; 2] {
    match mesh.triangles[t].iter().position(|&w| w == v) {
        Some(0) => [0.0, 0.0],
        Some(1) => [1.0, 0.0],
        Some(2) => [0.0, 1.0],
        _ => unreachable!("vertex {v} not on triangle {t}"),
    }
}

/// Measure all patch quantities of a flattened partitioning.
pub fn measure_patches(geom: &ParametricGeometry, patches: &[FlatPatch]) -> Result<PatchMeasurements> {
    let mesh = geom.mesh();
    let pts = sample_points();
    let mut m =
        PatchMeasurements { h: mesh_size(mesh), mu_bar: 0.0, flattening: 0.0, mu_h: 0.0, dmu_h: 0.0, df_jump: 0.0 };
    for fp in patches {
        for j in 0..fp.patch.members.len() {
            m.mu_bar = m.mu_bar.max((fp.mu_bar[j] - 1.0).abs());
            m.flattening = m.flattening.max(fp.deviation(j));
            for &xi in &pts {
                let (mu, grad) = fp.mu_h(geom, j, xi)?;
                m.mu_h = m.mu_h.max((mu - 1.0).abs());
                m.dmu_h = m.dmu_h.max(grad.norm());
            }
        }
        for (i, j, e) in fp.patch.interior_edges(mesh) {
            let [va, vb] = mesh.edges[e].vertices;
            let (ti, tj) = (fp.patch.members[i], fp.patch.members[j]);
            let (ai, bi) = (local_vertex_coords(mesh, ti, va), local_vertex_coords(mesh, ti, vb));
            let (aj, bj) = (local_vertex_coords(mesh, tj, va), local_vertex_coords(mesh, tj, vb));
            for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let lerp = |p: [f64; 2], q: [f64; 2]| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                let di = fp.df_h(geom, i, lerp(ai, bi))?;
                let dj = fp.df_h(geom, j, lerp(aj, bj))?;
                m.df_jump = m.df_jump.max((di - dj).norm());
            }
        }
    }
    Ok(m)
}

/// Least-squares exponents of each patch quantity against h.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub levels: Vec<PatchMeasurements>,
    pub mu_bar: f64,
    pub flattening: f64,
    pub mu_h: f64,
    pub dmu_h: f64,
    pub df_jump: f64,
}

/// Slope of log y against log x; NaN if any value is not positive.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 || y.iter().chain(x).any(|&v| !(v > 0.0)) {
        return f64::NAN;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Fit exponents over at least three levels.
pub fn verify_patch_rates(levels: &[PatchMeasurements]) -> Result<RateReport> {
    if levels.len() < 3 {
        return Err(Error::Config(format!("rate fit needs at least 3 levels, got {}", levels.len())));
    }
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let fit = |f: fn(&PatchMeasurements) -> f64| loglog_slope(&h, &levels.iter().map(f).collect::<Vec<_>>());
    Ok(RateReport {
        levels: levels.to_vec(),
        mu_bar: fit(|l| l.mu_bar),
        flattening: fit(|l| l.flattening),
        mu_h: fit(|l| l.mu_h),
        dmu_h: fit(|l| l.dmu_h),
        df_jump: fit(|l| l.df_jump),
    })
}

/// Flatten every vertex star of the sphere icosphere at each level and fit exponents.
pub fn patch_rate_study(kg: usize, levels: std::ops::RangeInclusive<usize>) -> Result<RateReport> {
    let mut out = Vec::new();
    for level in levels {
        let mesh = Arc::new(build_icosphere(level)?);
        let geom = lift_geometry(mesh.clone(), Arc::new(UnitSphere), kg)?;
        let patches = vertex_star_partitioning(&mesh)
            .iter()
            .map(|p| flatten_macroelement(&mesh, p, &geom))
            .collect::<Result<Vec<_>>>()?;
        out.push(measure_patches(&geom, &patches)?);
    }
    verify_patch_rates(&out)
}
