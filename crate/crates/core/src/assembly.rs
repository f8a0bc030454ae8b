//! Assembly of the discrete forms a₁, a₂, b₁, b₂, s_h, the load, pressure mass and norm matrices.
//!
//! For a velocity basis function ψ eₖ the projected gradient is
//! ∇(P_h ψ eₖ) = (P_h eₖ) ⊗ ∇ψ + (n_h)ₖ ψ W_h, and div(P_h ψ eₖ) is its trace.

use std::fmt;

use rayon::prelude::*;

use crate::basis::ShapeEval;
use crate::error::{Error, Result};
use crate::geometry::{CurvatureApproximation, GeometryData, ParametricGeometry};
use crate::mesh::mesh_size;
use crate::quadrature::{triangle_rule, QuadratureRule, MAX_DEGREE};
use crate::spaces::MixedSpace;
use crate::sparse::CsrMatrix;
use crate::{Mat3, Vec3};

/// Viscous form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormA {
    /// Symmetric gradient plus mass.
    A1,
    /// Full gradient, curvature correction, plus mass.
    A2,
}

/// Divergence coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormB {
    /// ⟨q, div P_h u⟩
    B1,
    /// −⟨∇q, u⟩, needs continuous pressure.
    B2,
}

impl TryFrom<u8> for FormA {
    type Error = Error;
    fn try_from(i: u8) -> Result<Self> {
        match i {
            1 => Ok(FormA::A1),
            2 => Ok(FormA::A2),
            _ => Err(Error::Config(format!("form a{i} does not exist; use 1 or 2"))),
        }
    }
}

impl TryFrom<u8> for FormB {
    type Error = Error;
    fn try_from(j: u8) -> Result<Self> {
        match j {
            1 => Ok(FormB::B1),
            2 => Ok(FormB::B2),
            _ => Err(Error::Config(format!("form b{j} does not exist; use 1 or 2"))),
        }
    }
}

impl fmt::Display for FormA {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormA::A1 => "1",
            FormA::A2 => "2",
        })
    }
}

impl fmt::Display for FormB {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FormB::B1 => "1",
            FormB::B2 => "2",
        })
    }
}

/// Default quadrature exactness 2·max(velocity degree, k_g) + 2.
pub fn default_quadrature_degree(mixed: &MixedSpace, geom: &ParametricGeometry) -> usize {
    (2 * mixed.velocity.element.degree().max(geom.order()) + 2).min(MAX_DEGREE)
}

/// Coefficients of a symmetric velocity form
/// sym·⟨E,E⟩ + full·⟨G,G⟩ + (mass + curvature·K♯)·⟨P u, P v⟩ + normal·⟨u·n, v·n⟩.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VelocityForm {
    pub sym: f64,
    pub full: f64,
    pub mass: f64,
    pub curvature: f64,
    pub normal: f64,
}

impl VelocityForm {
    pub fn a1() -> Self {
        VelocityForm { sym: 1.0, mass: 1.0, ..Default::default() }
    }

    pub fn a2() -> Self {
        VelocityForm { full: 0.5, mass: 1.0, curvature: -0.5, ..Default::default() }
    }

    pub fn penalty(eta: f64, h: f64) -> Self {
        VelocityForm { normal: eta / h, ..Default::default() }
    }

    /// |||·|||₁² : ‖∇P_h v‖² + ‖P_h v‖² + h⁻²‖Q_h v‖²
    pub fn norm1(h: f64) -> Self {
        VelocityForm { full: 1.0, mass: 1.0, normal: 1.0 / (h * h), ..Default::default() }
    }

    /// |||·|||²_{A_h} : ‖∇P_h v‖² + ‖P_h v‖² + s_h(v, v)
    pub fn energy(eta: f64, h: f64) -> Self {
        VelocityForm { full: 1.0, mass: 1.0, normal: eta / h, ..Default::default() }
    }
}

/// Tabulated shape functions at the quadrature points.
struct Tabulation {
    geo: Vec<ShapeEval>,
    vel: Vec<ShapeEval>,
    pre: Vec<ShapeEval>,
}

impl Tabulation {
    fn new(mixed: &MixedSpace, geom: &ParametricGeometry, rule: &QuadratureRule) -> Self {
        Tabulation {
            geo: rule.points.iter().map(|&xi| geom.tabulate(xi)).collect(),
            vel: rule.points.iter().map(|&xi| mixed.velocity.element.eval(xi)).collect(),
            pre: rule.points.iter().map(|&xi| mixed.pressure.element.eval(xi)).collect(),
        }
    }
}

/// Velocity basis quantities at one point, indexed by c·nloc + i.
#[derive(Debug, Clone)]
pub struct VelocityPoint {
    pub grad: Vec<Mat3>,
    pub proj: Vec<Vec3>,
    pub normal: Vec<f64>,
    pub div: Vec<f64>,
}

impl VelocityPoint {
    pub fn new(d: &GeometryData, shape: &ShapeEval) -> Self {
        let nloc = shape.values.len();
        let mut grad = Vec::with_capacity(3 * nloc);
        let mut proj = Vec::with_capacity(3 * nloc);
        let mut normal = Vec::with_capacity(3 * nloc);
        let mut div = Vec::with_capacity(3 * nloc);
        let g: Vec<Vec3> = shape.grads.iter().map(|&r| d.surface_gradient(r)).collect();
        let trw = d.weingarten.trace();
        for c in 0..3 {
            let pe = d.p.column(c).into_owned();
            let nc = d.normal[c];
            for i in 0..nloc {
                let psi = shape.values[i];
                grad.push(pe * g[i].transpose() + d.weingarten * (nc * psi));
                proj.push(pe * psi);
                normal.push(nc * psi);
                div.push(g[i][c] + nc * psi * trw);
            }
        }
        VelocityPoint { grad, proj, normal, div }
    }
}

fn frob(a: &Mat3, b: &Mat3) -> f64 {
    a.component_mul(b).sum()
}

struct Ctx<'a> {
    mixed: &'a MixedSpace,
    geom: &'a ParametricGeometry,
    rule: QuadratureRule,
    tab: Tabulation,
}

impl<'a> Ctx<'a> {
    fn new(mixed: &'a MixedSpace, geom: &'a ParametricGeometry, degree: Option<usize>) -> Result<Self> {
        if mixed.velocity.mesh().num_triangles() != geom.num_elements() {
            return Err(Error::Mismatch("space and geometry live on different meshes".into()));
        }
        let rule = triangle_rule(degree.unwrap_or_else(|| default_quadrature_degree(mixed, geom)))?;
        let tab = Tabulation::new(mixed, geom, &rule);
        Ok(Ctx { mixed, geom, rule, tab })
    }

    fn velocity_globals(&self, t: usize) -> Vec<usize> {
        let dofs = self.mixed.velocity.element_dofs(t);
        let n = self.mixed.velocity.dim();
        (0..3).flat_map(|c| dofs.iter().map(move |&d| c * n + d)).collect()
    }

    /// Run `local` on every element in parallel and merge triplets in element order.
    fn collect<F>(&self, nrows: usize, ncols: usize, local: F) -> Result<CsrMatrix>
    where
        F: Fn(usize) -> Result<Vec<(usize, usize, f64)>> + Sync + Send,
    {
        let parts = (0..self.geom.num_elements()).into_par_iter().map(local).collect::<Result<Vec<_>>>()?;
        let all: Vec<_> = parts.into_iter().flatten().collect();
        Ok(CsrMatrix::from_triplets(nrows, ncols, &all))
    }

    fn point(&self, t: usize, q: usize) -> Result<GeometryData> {
        self.geom.data_with(t, self.rule.points[q], &self.tab.geo[q])
    }

    fn velocity_matrices(
        &self,
        forms: &[VelocityForm],
        curvature: Option<&CurvatureApproximation>,
    ) -> Result<Vec<CsrMatrix>> {
        if forms.iter().any(|f| f.curvature != 0.0) && curvature.is_none() {
            return Err(Error::Config("the a2 form needs a curvature approximation".into()));
        }
        let nv = self.mixed.velocity_dim();
        let nl = 3 * self.mixed.velocity.local_len();
        let parts = (0..self.geom.num_elements())
            .into_par_iter()
            .map(|t| {
                let mut local = vec![vec![0.0; nl * nl]; forms.len()];
                for q in 0..self.rule.len() {
                    let d = self.point(t, q)?;
                    let vp = VelocityPoint::new(&d, &self.tab.vel[q]);
                    let k = match curvature {
                        Some(c) if forms.iter().any(|f| f.curvature != 0.0) => c.eval(t, self.rule.points[q], &d)?,
                        _ => 0.0,
                    };
                    let w = self.rule.weights[q] * d.mu;
                    let sym: Vec<Mat3> = vp.grad.iter().map(|g| (g + g.transpose()) * 0.5).collect();
                    for l in 0..nl {
                        for m in l..nl {
                            let gg = frob(&vp.grad[l], &vp.grad[m]);
                            let ss = frob(&sym[l], &sym[m]);
                            let pp = vp.proj[l].dot(&vp.proj[m]);
                            let nn = vp.normal[l] * vp.normal[m];
                            for (f, loc) in forms.iter().zip(local.iter_mut()) {
                                let v = f.sym * ss + f.full * gg + (f.mass + f.curvature * k) * pp + f.normal * nn;
                                loc[l * nl + m] += w * v;
                            }
                        }
                    }
                }
                let globals = self.velocity_globals(t);
                let out: Vec<Vec<(usize, usize, f64)>> = local
                    .iter()
                    .map(|loc| {
                        let mut trip = Vec::with_capacity(nl * nl);
                        for l in 0..nl {
                            for m in 0..nl {
                                let v = if m >= l { loc[l * nl + m] } else { loc[m * nl + l] };
                                trip.push((globals[l], globals[m], v));
                            }
                        }
                        trip
                    })
                    .collect();
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mats = Vec::with_capacity(forms.len());
        for f in 0..forms.len() {
            let all: Vec<_> = parts.iter().flat_map(|p| p[f].iter().copied()).collect();
            mats.push(CsrMatrix::from_triplets(nv, nv, &all));
        }
        Ok(mats)
    }

    fn coupling(&self, form: FormB) -> Result<CsrMatrix> {
        if form == FormB::B2 && !self.mixed.pressure.element.is_continuous() {
            return Err(Error::Config(format!(
                "the b2 form needs a continuous pressure space, but {} has a discontinuous pressure",
                self.mixed.tag
            )));
        }
        let nl = 3 * self.mixed.velocity.local_len();
        let nvl = self.mixed.velocity.local_len();
        let npl = self.mixed.pressure.local_len();
        self.collect(self.mixed.pressure_dim(), self.mixed.velocity_dim(), |t| {
            let mut local = vec![0.0; npl * nl];
            for q in 0..self.rule.len() {
                let d = self.point(t, q)?;
                let w = self.rule.weights[q] * d.mu;
                let ps = &self.tab.pre[q];
                match form {
                    FormB::B1 => {
                        let vp = VelocityPoint::new(&d, &self.tab.vel[q]);
                        for j in 0..npl {
                            for l in 0..nl {
                                local[j * nl + l] += w * ps.values[j] * vp.div[l];
                            }
                        }
                    }
                    FormB::B2 => {
                        let vs = &self.tab.vel[q];
                        for j in 0..npl {
                            let gq = d.surface_gradient(ps.grads[j]);
                            for c in 0..3 {
                                for i in 0..nvl {
                                    local[j * nl + c * nvl + i] -= w * gq[c] * vs.values[i];
                                }
                            }
                        }
                    }
                }
            }
            let vg = self.velocity_globals(t);
            let pg = self.mixed.pressure.element_dofs(t);
            let mut trip = Vec::with_capacity(npl * nl);
            for j in 0..npl {
                for l in 0..nl {
                    trip.push((pg[j], vg[l], local[j * nl + l]));
                }
            }
            Ok(trip)
        })
    }

    fn pressure_mass(&self) -> Result<(CsrMatrix, Vec<f64>)> {
        let npl = self.mixed.pressure.local_len();
        let np = self.mixed.pressure_dim();
        let mass = self.collect(np, np, |t| {
            let mut local = vec![0.0; npl * npl];
            for q in 0..self.rule.len() {
                let d = self.point(t, q)?;
                let w = self.rule.weights[q] * d.mu;
                let v = &self.tab.pre[q].values;
                for a in 0..npl {
                    for b in 0..npl {
                        local[a * npl + b] += w * v[a] * v[b];
                    }
                }
            }
            let pg = self.mixed.pressure.element_dofs(t);
            Ok((0..npl * npl).map(|k| (pg[k / npl], pg[k % npl], local[k])).collect())
        })?;
        let parts = (0..self.geom.num_elements())
            .into_par_iter()
            .map(|t| {
                let mut local = vec![0.0; npl];
                for q in 0..self.rule.len() {
                    let d = self.point(t, q)?;
                    let w = self.rule.weights[q] * d.mu;
                    for (a, v) in self.tab.pre[q].values.iter().enumerate() {
                        local[a] += w * v;
                    }
                }
                Ok(local)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mean = vec![0.0; np];
        for (t, local) in parts.iter().enumerate() {
            for (a, &d) in self.mixed.pressure.element_dofs(t).iter().enumerate() {
                mean[d] += local[a];
            }
        }
        Ok((mass, mean))
    }

    /// Elementwise ⟨∇q, ∇r⟩; for a broken space this is the broken gradient.
    fn pressure_stiffness(&self) -> Result<CsrMatrix> {
        let npl = self.mixed.pressure.local_len();
        let np = self.mixed.pressure_dim();
        self.collect(np, np, |t| {
            let mut local = vec![0.0; npl * npl];
            for q in 0..self.rule.len() {
                let d = self.point(t, q)?;
                let w = self.rule.weights[q] * d.mu;
                let g: Vec<Vec3> = self.tab.pre[q].grads.iter().map(|&g| d.surface_gradient(g)).collect();
                for a in 0..npl {
                    for b in 0..npl {
                        local[a * npl + b] += w * g[a].dot(&g[b]);
                    }
                }
            }
            let pg = self.mixed.pressure.element_dofs(t);
            Ok((0..npl * npl).map(|k| (pg[k / npl], pg[k % npl], local[k])).collect())
        })
    }

    fn rhs(&self, f: &(dyn Fn(&Vec3) -> Vec3 + Sync)) -> Result<Vec<f64>> {
        let nvl = self.mixed.velocity.local_len();
        let parts = (0..self.geom.num_elements())
            .into_par_iter()
            .map(|t| {
                let mut local = vec![0.0; 3 * nvl];
                for q in 0..self.rule.len() {
                    let d = self.point(t, q)?;
                    let w = self.rule.weights[q] * d.mu;
                    let fv = f(&d.exact.point);
                    let vs = &self.tab.vel[q].values;
                    for c in 0..3 {
                        for i in 0..nvl {
                            local[c * nvl + i] += w * fv[c] * vs[i];
                        }
                    }
                }
                Ok(local)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; self.mixed.velocity_dim()];
        for (t, local) in parts.iter().enumerate() {
            for (l, &g) in self.velocity_globals(t).iter().enumerate() {
                out[g] += local[l];
            }
        }
        Ok(out)
    }
}

/// Viscous matrix of a₁ or a₂.
pub fn assemble_a(
    form: FormA,
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    curvature: Option<&CurvatureApproximation>,
    quad_degree: Option<usize>,
) -> Result<CsrMatrix> {
    let f = match form {
        FormA::A1 => VelocityForm::a1(),
        FormA::A2 => VelocityForm::a2(),
    };
    Ok(Ctx::new(mixed, geom, quad_degree)?.velocity_matrices(&[f], curvature)?.remove(0))
}

/// Tangentiality penalty η h⁻¹ ⟨u·n_h, v·n_h⟩.
pub fn assemble_sh(mixed: &MixedSpace, geom: &ParametricGeometry, eta: f64, h: f64) -> Result<CsrMatrix> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("mesh size must be positive, got {h}")));
    }
    Ok(Ctx::new(mixed, geom, None)?.velocity_matrices(&[VelocityForm::penalty(eta, h)], None)?.remove(0))
}

/// Matrix of any [`VelocityForm`].
pub fn assemble_velocity_form(
    form: VelocityForm,
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    curvature: Option<&CurvatureApproximation>,
    quad_degree: Option<usize>,
) -> Result<CsrMatrix> {
    Ok(Ctx::new(mixed, geom, quad_degree)?.velocity_matrices(&[form], curvature)?.remove(0))
}

/// Matrix of |||·|||₁².
pub fn assemble_norm1(mixed: &MixedSpace, geom: &ParametricGeometry, h: f64) -> Result<CsrMatrix> {
    assemble_velocity_form(VelocityForm::norm1(h), mixed, geom, None, None)
}

/// Coupling matrix with rows indexed by pressure and columns by velocity.
pub fn assemble_b(
    form: FormB,
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    quad_degree: Option<usize>,
) -> Result<CsrMatrix> {
    Ctx::new(mixed, geom, quad_degree)?.coupling(form)
}

/// Pressure mass matrix and mean vector (∫ q_i).
pub fn assemble_pressure_mass(mixed: &MixedSpace, geom: &ParametricGeometry) -> Result<(CsrMatrix, Vec<f64>)> {
    Ctx::new(mixed, geom, None)?.pressure_mass()
}

/// Pressure stiffness matrix ⟨∇_{Γ_h} q, ∇_{Γ_h} r⟩.
pub fn assemble_pressure_stiffness(mixed: &MixedSpace, geom: &ParametricGeometry) -> Result<CsrMatrix> {
    Ctx::new(mixed, geom, None)?.pressure_stiffness()
}

/// Load vector ⟨f∘π, v⟩ against the full velocity basis.
pub fn assemble_rhs(
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    f: &(dyn Fn(&Vec3) -> Vec3 + Sync),
) -> Result<Vec<f64>> {
    Ctx::new(mixed, geom, None)?.rhs(f)
}

/// Settings for [`assemble_system`].
#[derive(Debug, Clone, Copy)]
pub struct SystemConfig<'a> {
    pub form_a: FormA,
    pub form_b: FormB,
    pub eta: f64,
    pub curvature: Option<&'a CurvatureApproximation>,
    pub quad_degree: Option<usize>,
}

/// All matrices and vectors of the discrete problem.
#[derive(Debug, Clone)]
pub struct StokesSystem {
    pub a: CsrMatrix,
    pub s: CsrMatrix,
    pub b: CsrMatrix,
    pub mp: CsrMatrix,
    pub mean: Vec<f64>,
    pub rhs: Vec<f64>,
    /// |||·|||₁² matrix.
    pub n1: CsrMatrix,
    /// |||·|||²_{A_h} matrix.
    pub na: CsrMatrix,
    pub form_a: FormA,
    pub form_b: FormB,
    pub eta: f64,
    pub h: f64,
    /// Smallest K♯_h at quadrature points (a₂ only).
    pub min_curvature: Option<f64>,
}

impl StokesSystem {
    pub fn velocity_dim(&self) -> usize {
        self.a.nrows
    }

    pub fn pressure_dim(&self) -> usize {
        self.b.nrows
    }

    /// A + S
    pub fn velocity_block(&self) -> CsrMatrix {
        self.a.add(1.0, &self.s, 1.0).expect("A and S share a shape")
    }
}

/// Assemble every block of the discrete problem with load `f`.
pub fn assemble_system(
    mixed: &MixedSpace,
    geom: &ParametricGeometry,
    config: &SystemConfig<'_>,
    f: &(dyn Fn(&Vec3) -> Vec3 + Sync),
) -> Result<StokesSystem> {
    if !(config.eta > 0.0) {
        return Err(Error::Config(format!("penalty weight must be positive, got {}", config.eta)));
    }
    if config.form_a == FormA::A2 && config.curvature.is_none() {
        return Err(Error::Config("the a2 form needs a curvature approximation".into()));
    }
    let ctx = Ctx::new(mixed, geom, config.quad_degree)?;
    let b = ctx.coupling(config.form_b)?;
    let h = mesh_size(geom.mesh());
    let af = match config.form_a {
        FormA::A1 => VelocityForm::a1(),
        FormA::A2 => VelocityForm::a2(),
    };
    let curvature = if config.form_a == FormA::A2 { config.curvature } else { None };
    let mut mats = ctx.velocity_matrices(
        &[af, VelocityForm::penalty(config.eta, h), VelocityForm::norm1(h), VelocityForm::energy(config.eta, h)],
        curvature,
    )?;
    let na = mats.pop().expect("four matrices");
    let n1 = mats.pop().expect("three matrices");
    let s = mats.pop().expect("two matrices");
    let a = mats.pop().expect("one matrix");
    let (mp, mean) = ctx.pressure_mass()?;
    let rhs = ctx.rhs(f)?;
    let min_curvature = match curvature {
        Some(c) => Some(min_curvature(&ctx, c)?),
        None => None,
    };
    Ok(StokesSystem {
        a,
        s,
        b,
        mp,
        mean,
        rhs,
        n1,
        na,
        form_a: config.form_a,
        form_b: config.form_b,
        eta: config.eta,
        h,
        min_curvature,
    })
}

fn min_curvature(ctx: &Ctx<'_>, c: &CurvatureApproximation) -> Result<f64> {
    let mins = (0..ctx.geom.num_elements())
        .into_par_iter()
        .map(|t| {
            let mut m = f64::INFINITY;
            for q in 0..ctx.rule.len() {
                let d = ctx.point(t, q)?;
                m = m.min(c.eval(t, ctx.rule.points[q], &d)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mins.into_iter().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{curvature_field, lift_geometry, CurvatureMode, UnitSphere};
    use crate::mesh::{build_icosphere, FlatMesh};
    use crate::spaces::{build_pair, PairTag};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn setup(level: usize, kg: usize, tag: PairTag) -> (ParametricGeometry, MixedSpace) {
        let g = lift_geometry(Arc::new(build_icosphere(level).unwrap()), Arc::new(UnitSphere), kg).unwrap();
        let m = build_pair(tag, &g, true).unwrap();
        (g, m)
    }

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn form_indices() {
        assert_eq!(FormA::try_from(2).unwrap(), FormA::A2);
        assert!(FormA::try_from(3).is_err());
        assert!(FormB::try_from(0).is_err());
    }

    #[test]
    fn symmetry_and_psd() {
        let (g, m) = setup(1, 2, PairTag::TaylorHood(2));
        let c = curvature_field(&g, CurvatureMode::Intrinsic).unwrap();
        for a in [
            assemble_a(FormA::A1, &m, &g, None, None).unwrap(),
            assemble_a(FormA::A2, &m, &g, Some(&c), None).unwrap(),
            assemble_sh(&m, &g, 1.0, 0.3).unwrap(),
            assemble_norm1(&m, &g, 0.3).unwrap(),
        ] {
            assert!(a.relative_asymmetry() <= 1e-10);
        }
        let s = assemble_sh(&m, &g, 1.0, 0.3).unwrap();
        let min = s.to_dense().symmetric_eigenvalues().min();
        assert!(min > -1e-12 * s.max_abs());
        let n1 = assemble_norm1(&m, &g, 0.3).unwrap();
        assert!(n1.to_dense().symmetric_eigenvalues().min() > 0.0);
        let (mp, _) = assemble_pressure_mass(&m, &g).unwrap();
        assert!(mp.relative_asymmetry() <= 1e-10);
        assert!(mp.to_dense().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn a2_needs_curvature() {
        let (g, m) = setup(0, 1, PairTag::TaylorHood(2));
        assert!(matches!(assemble_a(FormA::A2, &m, &g, None, None), Err(Error::Config(_))));
    }

    #[test]
    fn b2_rejects_broken_pressure() {
        let (g, m) = setup(0, 1, PairTag::P2P0);
        assert!(matches!(assemble_b(FormB::B2, &m, &g, None), Err(Error::Config(_))));
        let (g, m) = setup(0, 1, PairTag::CrouzeixRaviart);
        assert!(matches!(assemble_b(FormB::B2, &m, &g, None), Err(Error::Config(_))));
    }

    #[test]
    fn b2_kills_constants() {
        let (g, m) = setup(1, 2, PairTag::TaylorHood(2));
        let b = assemble_b(FormB::B2, &m, &g, None).unwrap();
        let v = random(m.velocity_dim(), 3);
        let ones = vec![1.0; m.pressure_dim()];
        let bv = b.mul_vec(&v);
        let s: f64 = bv.iter().zip(&ones).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-12 * bv.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
    }

    #[test]
    fn normal_field_on_flat_patch() {
        // Affine elements: a constant normal field has P_h u = 0 and zero projected gradient.
        let (g, m) = setup(1, 1, PairTag::TaylorHood(2));
        let a = assemble_a(FormA::A1, &m, &g, None, None).unwrap();
        let t = 11;
        let n = g.mesh().normal(t);
        // Element-local contribution: restrict the quadratic form to DOFs owned by this element only.
        let local_mesh = {
            let c = g.mesh().corners(t);
            Arc::new(FlatMesh::new(c.to_vec(), vec![[0, 1, 2]], 0).unwrap())
        };
        let lg = lift_geometry(local_mesh, Arc::new(UnitSphere), 1).unwrap();
        let lm = build_pair(PairTag::TaylorHood(2), &lg, false).unwrap();
        let la = assemble_a(FormA::A1, &lm, &lg, None, None).unwrap();
        let u = lm.interpolate_velocity(&lg, |_| n);
        assert!(la.quad_form(&u, &u).abs() < 1e-14);
        assert!(a.nnz() > 0);
    }

    #[test]
    fn penalty_kernel_and_scaling() {
        let (g, m) = setup(1, 1, PairTag::TaylorHood(2));
        let s1 = assemble_sh(&m, &g, 1.0, 0.5).unwrap();
        let s2 = assemble_sh(&m, &g, 2.0, 0.5).unwrap();
        for (x, y) in s1.data.iter().zip(&s2.data) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1e-300));
        }
        // A tangential field on one flat element lies in the kernel.
        let t = 4;
        let c = g.mesh().corners(t);
        let local = Arc::new(FlatMesh::new(c.to_vec(), vec![[0, 1, 2]], 0).unwrap());
        let lg = lift_geometry(local, Arc::new(UnitSphere), 1).unwrap();
        let lm = build_pair(PairTag::TaylorHood(2), &lg, false).unwrap();
        let ls = assemble_sh(&lm, &lg, 1.0, 0.5).unwrap();
        let d = lg.geometry_data(0, [0.2, 0.2]).unwrap();
        let tangent = d.df * nalgebra::Vector2::new(0.3, -0.7);
        let u = lm.interpolate_velocity(&lg, |x| tangent * (1.0 + x.x));
        assert!(ls.quad_form(&u, &u).abs() < 1e-12);
    }

    #[test]
    fn penalty_of_normal_field() {
        let (g, m) = setup(2, 2, PairTag::TaylorHood(2));
        let h = mesh_size(g.mesh());
        let s = assemble_sh(&m, &g, 1.0, h).unwrap();
        let u = m.interpolate_velocity(&g, |x| x / x.norm());
        let got = s.quad_form(&u, &u);
        let area = 4.0 * std::f64::consts::PI;
        assert!((got * h / area - 1.0).abs() < 1e-2, "{}", got * h / area);
    }

    #[test]
    fn norm1_scaling() {
        let (g, m) = setup(1, 2, PairTag::TaylorHood(2));
        let u = m.interpolate_velocity(&g, |x| x / x.norm());
        let base =
            assemble_velocity_form(VelocityForm { full: 1.0, mass: 1.0, ..Default::default() }, &m, &g, None, None)
                .unwrap()
                .quad_form(&u, &u);
        let a = assemble_norm1(&m, &g, 0.4).unwrap().quad_form(&u, &u) - base;
        let b = assemble_norm1(&m, &g, 0.2).unwrap().quad_form(&u, &u) - base;
        assert!((b / a - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rhs_basics() {
        let (g, m) = setup(2, 2, PairTag::TaylorHood(2));
        assert!(assemble_rhs(&m, &g, &|_| Vec3::zeros()).unwrap().iter().all(|&v| v == 0.0));
        let c = Vec3::new(0.3, -1.0, 2.0);
        let r = assemble_rhs(&m, &g, &|_| c).unwrap();
        let u = m.interpolate_velocity(&g, |_| c);
        let got: f64 = r.iter().zip(&u).map(|(a, b)| a * b).sum();
        let (_, mean) = assemble_pressure_mass(&m, &g).unwrap();
        let area: f64 = mean.iter().sum();
        assert!((got - c.norm_squared() * area).abs() < 1e-10);
    }

    #[test]
    fn mean_is_mass_times_one() {
        let (g, m) = setup(1, 2, PairTag::CrouzeixRaviart);
        let (mp, mean) = assemble_pressure_mass(&m, &g).unwrap();
        let m1 = mp.mul_vec(&vec![1.0; m.pressure_dim()]);
        for (a, b) in m1.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn pressure_stiffness_of_coordinate() {
        let (g, m) = setup(4, 2, PairTag::TaylorHood(3));
        let k = assemble_pressure_stiffness(&m, &g).unwrap();
        let ones = vec![1.0; m.pressure_dim()];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-10));
        // ∫ |∇_Γ x|² = ∫ (1 − x²) = 8π/3 on the unit sphere
        let q = m.pressure.lagrange_interpolate(&g, |y| y.x);
        let e = k.quad_form(&q, &q);
        assert!((e - 8.0 * std::f64::consts::PI / 3.0).abs() < 1e-3, "{e}");
    }

    #[test]
    fn quadrature_saturation() {
        // Affine elements give polynomial integrands, so the default degree is already exact.
        let (g, m) = setup(1, 1, PairTag::TaylorHood(2));
        let d = default_quadrature_degree(&m, &g);
        let a = assemble_a(FormA::A1, &m, &g, None, Some(d)).unwrap();
        let b = assemble_a(FormA::A1, &m, &g, None, Some(d + 2)).unwrap();
        let scale = a.max_abs();
        for (r, c, v) in a.triplets() {
            assert!((v - b.get(r, c)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let (g, m) = setup(1, 2, PairTag::Mini);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a1 = one.install(|| assemble_a(FormA::A1, &m, &g, None, None).unwrap());
        let a2 = assemble_a(FormA::A1, &m, &g, None, None).unwrap();
        assert_eq!(a1, a2);
    }
}
