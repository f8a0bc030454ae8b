//! Scalar finite element spaces on the parametric surface and the mixed pairs built from them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::basis::{bubble, LagrangeBasis, NodeKind, ShapeEval};
use crate::error::{Error, Result};
use crate::geometry::ParametricGeometry;
use crate::mesh::FlatMesh;
use crate::Vec3;

/// Reference element family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Continuous Lagrange of order r.
    Lagrange(usize),
    /// Continuous Lagrange of order r plus the cubic element bubble.
    LagrangeBubble(usize),
    /// Discontinuous Lagrange of order r ≥ 1.
    Broken(usize),
    /// Discontinuous piecewise constants.
    BrokenConstant,
}

/// Topological association of a local degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Vertex,
    Edge,
    Interior,
    Bubble,
    /// Element-private DOF of a broken space.
    Element,
}

/// Shape functions of one family on the reference triangle.
#[derive(Debug, Clone)]
pub struct LocalElement {
    pub family: Family,
    lagrange: Option<LagrangeBasis>,
}

impl LocalElement {
    pub fn new(family: Family) -> Self {
        let lagrange = match family {
            Family::Lagrange(r) | Family::LagrangeBubble(r) | Family::Broken(r) => Some(LagrangeBasis::new(r)),
            Family::BrokenConstant => None,
        };
        LocalElement { family, lagrange }
    }

    /// Approximation order r of the family (bubble enrichment does not raise it).
    pub fn order(&self) -> usize {
        match self.family {
            Family::Lagrange(r) | Family::LagrangeBubble(r) | Family::Broken(r) => r,
            Family::BrokenConstant => 0,
        }
    }

    /// Highest polynomial degree of any shape function.
    pub fn degree(&self) -> usize {
        match self.family {
            Family::LagrangeBubble(r) => r.max(3),
            _ => self.order(),
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.family, Family::Lagrange(_) | Family::LagrangeBubble(_))
    }

    pub fn len(&self) -> usize {
        match self.family {
            Family::Lagrange(_) | Family::Broken(_) => self.lagrange.as_ref().map_or(0, LagrangeBasis::len),
            Family::LagrangeBubble(_) => self.lagrange.as_ref().map_or(0, LagrangeBasis::len) + 1,
            Family::BrokenConstant => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reference coordinates of the DOF functionals (point evaluations).
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let center = [1.0 / 3.0, 1.0 / 3.0];
        match &self.lagrange {
            None => vec![center],
            Some(b) => {
                let mut n: Vec<_> = (0..b.len()).map(|i| b.node(i)).collect();
                if matches!(self.family, Family::LagrangeBubble(_)) {
                    n.push(center);
                }
                n
            }
        }
    }

    pub fn kinds(&self) -> Vec<DofKind> {
        match (&self.lagrange, self.family) {
            (_, Family::BrokenConstant) | (_, Family::Broken(_)) => vec![DofKind::Element; self.len()],
            (Some(b), fam) => {
                let mut k: Vec<_> = b
                    .kinds
                    .iter()
                    .map(|n| match n {
                        NodeKind::Vertex(_) => DofKind::Vertex,
                        NodeKind::Edge(..) => DofKind::Edge,
                        NodeKind::Interior(_) => DofKind::Interior,
                    })
                    .collect();
                if matches!(fam, Family::LagrangeBubble(_)) {
                    k.push(DofKind::Bubble);
                }
                k
            }
            (None, _) => unreachable!("Lagrange families carry a basis"),
        }
    }

    /// Values and reference gradients of all shape functions at `xi`.
    pub fn eval(&self, xi: [f64; 2]) -> ShapeEval {
        let mut out = ShapeEval::with_len(self.len());
        match &self.lagrange {
            None => {
                out.values[0] = 1.0;
            }
            Some(b) => {
                b.eval_into(xi, &mut out, 0, false);
                if matches!(self.family, Family::LagrangeBubble(_)) {
                    let (v, g, h) = bubble(xi);
                    let i = b.len();
                    out.values[i] = v;
                    out.grads[i] = g;
                    out.hessians[i] = h;
                }
            }
        }
        out
    }
}

/// A scalar space on the parametric surface with its global DOF map.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub element: LocalElement,
    mesh: Arc<FlatMesh>,
    dofs: Vec<usize>,
    ndofs: usize,
}

impl ScalarSpace {
    pub fn new(mesh: Arc<FlatMesh>, family: Family) -> Self {
        let element = LocalElement::new(family);
        let nloc = element.len();
        let nt = mesh.num_triangles();
        let mut dofs = Vec::with_capacity(nt * nloc);
        let ndofs = match (family, &element.lagrange) {
            (Family::Broken(_), _) | (Family::BrokenConstant, _) => {
                dofs.extend(0..nt * nloc);
                nt * nloc
            }
            (_, Some(b)) => {
                let r = b.order;
                let nv = mesh.num_vertices();
                let ne = mesh.num_edges();
                let nint = b.len() - 3 - 3 * (r - 1);
                let interior_base = nv + ne * (r - 1);
                let bubble_base = interior_base + nt * nint;
                for t in 0..nt {
                    let tri = mesh.triangles[t];
                    for &kind in &b.kinds {
                        let d = match kind {
                            NodeKind::Vertex(j) => tri[j],
                            NodeKind::Edge(e, s) => {
                                let (ga, gb) = (tri[e], tri[(e + 1) % 3]);
                                let slot = if ga < gb { s - 1 } else { r - 1 - s };
                                nv + mesh.triangle_edges[t][e] * (r - 1) + slot
                            }
                            NodeKind::Interior(n) => interior_base + t * nint + n,
                        };
                        dofs.push(d);
                    }
                    if matches!(family, Family::LagrangeBubble(_)) {
                        dofs.push(bubble_base + t);
                    }
                }
                bubble_base + if matches!(family, Family::LagrangeBubble(_)) { nt } else { 0 }
            }
            (_, None) => unreachable!("Lagrange families carry a basis"),
        };
        ScalarSpace { element, mesh, dofs, ndofs }
    }

    pub fn dim(&self) -> usize {
        self.ndofs
    }

    pub fn mesh(&self) -> &Arc<FlatMesh> {
        &self.mesh
    }

    pub fn local_len(&self) -> usize {
        self.element.len()
    }

    /// Global indices of the local DOFs of element `t`.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.element.len();
        &self.dofs[t * n..(t + 1) * n]
    }

    /// Local shape values and reference gradients (identical on every element).
    pub fn evaluate_basis(&self, _element: usize, xi: [f64; 2]) -> ShapeEval {
        self.element.eval(xi)
    }

    /// Value of the discrete function with coefficients `c` at `xi` on element `t`.
    pub fn evaluate(&self, c: &[f64], t: usize, xi: [f64; 2]) -> f64 {
        let s = self.element.eval(xi);
        self.element_dofs(t).iter().zip(&s.values).map(|(&d, v)| c[d] * v).sum()
    }

    /// Nodal interpolant of a function of the world point on Γ_h.
    ///
    /// The bubble coefficient matches the value at the barycenter after the
    /// Lagrange part is fixed, so every function of the space is reproduced.
    pub fn lagrange_interpolate(&self, geom: &ParametricGeometry, f: impl Fn(&Vec3) -> f64) -> Vec<f64> {
        let mut c = vec![0.0; self.ndofs];
        let mut done = vec![false; self.ndofs];
        let nodes = self.element.nodes();
        let kinds = self.element.kinds();
        let center = self.element.eval([1.0 / 3.0, 1.0 / 3.0]);
        for t in 0..self.mesh.num_triangles() {
            let dofs = self.element_dofs(t);
            for (i, &d) in dofs.iter().enumerate() {
                if kinds[i] != DofKind::Bubble && !done[d] {
                    c[d] = f(&geom.point(t, nodes[i]));
                    done[d] = true;
                }
            }
            if let Some(ib) = kinds.iter().position(|&k| k == DofKind::Bubble) {
                let x = geom.point(t, nodes[ib]);
                let partial: f64 = (0..dofs.len()).filter(|&i| i != ib).map(|i| c[dofs[i]] * center.values[i]).sum();
                c[dofs[ib]] = f(&x) - partial;
                done[dofs[ib]] = true;
            }
        }
        c
    }
}

/// Mixed pair identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairTag {
    /// Taylor–Hood (P_k, P_{k−1}), k ≥ 2.
    TaylorHood(usize),
    /// (P1 + bubble, P1).
    Mini,
    /// (P2 + bubble, broken P1).
    CrouzeixRaviart,
    /// (P2, broken P0).
    P2P0,
    /// (P1, P1): unstable, kept only as a negative control.
    P1P1,
}

impl fmt::Display for PairTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairTag::TaylorHood(k) => write!(f, "th:{k}"),
            PairTag::Mini => write!(f, "mini"),
            PairTag::CrouzeixRaviart => write!(f, "cr"),
            PairTag::P2P0 => write!(f, "p2p0"),
            PairTag::P1P1 => write!(f, "p1p1-unsafe"),
        }
    }
}

impl FromStr for PairTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mini" => Ok(PairTag::Mini),
            "cr" => Ok(PairTag::CrouzeixRaviart),
            "p2p0" => Ok(PairTag::P2P0),
            "p1p1-unsafe" => Ok(PairTag::P1P1),
            _ => s
                .strip_prefix("th:")
                .and_then(|k| k.parse().ok())
                .map(PairTag::TaylorHood)
                .ok_or_else(|| Error::Config(format!("unknown element '{s}'"))),
        }
    }
}

impl PairTag {
    pub fn families(&self) -> (Family, Family) {
        match *self {
            PairTag::TaylorHood(k) => (Family::Lagrange(k), Family::Lagrange(k - 1)),
            PairTag::Mini => (Family::LagrangeBubble(1), Family::Lagrange(1)),
            PairTag::CrouzeixRaviart => (Family::LagrangeBubble(2), Family::Broken(1)),
            PairTag::P2P0 => (Family::Lagrange(2), Family::BrokenConstant),
            PairTag::P1P1 => (Family::Lagrange(1), Family::Lagrange(1)),
        }
    }

    /// Reject orders outside 2..=5 for Taylor–Hood and the P1–P1 pair unless `allow_unsafe`.
    pub fn validate(&self, allow_unsafe: bool) -> Result<()> {
        match *self {
            PairTag::TaylorHood(k) if k < 2 => Err(Error::Config(format!("Taylor-Hood needs order k >= 2, got {k}"))),
            PairTag::TaylorHood(k) if k > 5 => {
                Err(Error::Config(format!("Taylor-Hood order {k} above the supported maximum 5")))
            }
            PairTag::P1P1 if !allow_unsafe => {
                Err(Error::Config("the P1-P1 pair is unstable; pass the unsafe flag to build it".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn pressure_continuous(&self) -> bool {
        LocalElement::new(self.families().1).is_continuous()
    }
}

/// Velocity space [S_h]³ and pressure space Q_h.
#[derive(Debug, Clone)]
pub struct MixedSpace {
    pub tag: PairTag,
    /// Scalar space used for each of the three velocity components.
    pub velocity: ScalarSpace,
    pub pressure: ScalarSpace,
    /// k_u = min(r_v, r_q + 1).
    pub k_u: usize,
}

impl MixedSpace {
    /// Scalar velocity dimension.
    pub fn velocity_scalar_dim(&self) -> usize {
        self.velocity.dim()
    }

    /// Vector velocity dimension, component-major.
    pub fn velocity_dim(&self) -> usize {
        3 * self.velocity.dim()
    }

    pub fn pressure_dim(&self) -> usize {
        self.pressure.dim()
    }

    /// Global index of component `c` of scalar DOF `s`.
    pub fn velocity_index(&self, c: usize, s: usize) -> usize {
        c * self.velocity.dim() + s
    }

    /// Componentwise nodal interpolant of a vector field.
    pub fn interpolate_velocity(&self, geom: &ParametricGeometry, f: impl Fn(&Vec3) -> Vec3) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.velocity_dim());
        for c in 0..3 {
            out.extend(self.velocity.lagrange_interpolate(geom, |x| f(x)[c]));
        }
        out
    }

    /// Evaluate a velocity coefficient vector at a point.
    pub fn evaluate_velocity(&self, u: &[f64], t: usize, xi: [f64; 2]) -> Vec3 {
        let n = self.velocity.dim();
        Vec3::new(
            self.velocity.evaluate(&u[..n], t, xi),
            self.velocity.evaluate(&u[n..2 * n], t, xi),
            self.velocity.evaluate(&u[2 * n..], t, xi),
        )
    }
}

/// Build a mixed pair on `geom`'s mesh. The P1–P1 pair needs `allow_unsafe`.
pub fn build_pair(tag: PairTag, geom: &ParametricGeometry, allow_unsafe: bool) -> Result<MixedSpace> {
    tag.validate(allow_unsafe)?;
    let (fv, fq) = tag.families();
    let velocity = ScalarSpace::new(geom.mesh().clone(), fv);
    let pressure = ScalarSpace::new(geom.mesh().clone(), fq);
    let k_u = velocity.element.order().min(pressure.element.order() + 1);
    Ok(MixedSpace { tag, velocity, pressure, k_u })
}
