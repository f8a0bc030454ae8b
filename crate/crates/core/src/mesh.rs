//! Piecewise-flat triangulations of the unit sphere and vertex-star patches.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::Vec3;

/// Largest refinement level accepted by [`build_icosphere`].
pub const MAX_LEVEL: usize = 8;

/// An edge given by its sorted vertex pair and up to two incident triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.triangles[1].is_some()
    }
}

/// Conforming triangulation with vertices on the surface.
///
/// Local edge `j` of a triangle joins local vertices `j` and `(j+1) % 3`.
#[derive(Debug, Clone)]
pub struct FlatMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Edge index of each local edge of each triangle.
    pub triangle_edges: Vec<[usize; 3]>,
    pub level: usize,
}

impl FlatMesh {
    /// Build edge structures for the given triangles. Fails on non-manifold edges.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, level: usize) -> Result<Self> {
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 2);
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + 3);
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Geometry(format!("triangle {t} references a missing vertex")));
            }
            let mut te = [0; 3];
            for j in 0..3 {
                let (a, b) = (tri[j], tri[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], triangles: [None, None] });
                    edges.len() - 1
                });
                let slot = &mut edges[e].triangles;
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else if slot[1].is_none() {
                    slot[1] = Some(t);
                } else {
                    return Err(Error::Geometry(format!("edge {key:?} has more than two triangles")));
                }
                te[j] = e;
            }
            triangle_edges.push(te);
        }
        Ok(FlatMesh { vertices, triangles, edges, triangle_edges, level })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    pub fn is_closed(&self) -> bool {
        self.edges.iter().all(Edge::is_interior)
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Affine map of the reference triangle onto triangle `t`.
    pub fn affine_point(&self, t: usize, xi: [f64; 2]) -> Vec3 {
        let [a, b, c] = self.corners(t);
        a + (b - a) * xi[0] + (c - a) * xi[1]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit normal of the flat triangle, oriented by vertex order.
    pub fn normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn barycenter(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.corners(t);
        (a + b + c) / 3.0
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    /// Ratio of longest edge to inscribed-circle diameter.
    pub fn shape_ratio(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        let per = (b - a).norm() + (c - b).norm() + (a - c).norm();
        let rho = 4.0 * self.area(t) / per;
        self.diameter(t) / rho
    }

    pub fn max_shape_ratio(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.shape_ratio(t)).fold(0.0, f64::max)
    }

    /// Triangles incident to each vertex, in increasing triangle order.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut star = vec![Vec::new(); self.num_vertices()];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                star[v].push(t);
            }
        }
        star
    }

    /// Write the mesh as ASCII OFF.
    pub fn write_off<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "OFF")?;
        writeln!(out, "{} {} {}", self.num_vertices(), self.num_triangles(), self.num_edges())?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
        }
        for [a, b, c] in &self.triangles {
            writeln!(out, "3 {a} {b} {c}")?;
        }
        Ok(())
    }
}

fn icosahedron() -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let p = 0.5 * (1.0 + 5f64.sqrt());
    let raw = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|r| Vec3::new(r[0], r[1], r[2]).normalize()).collect::<Vec<_>>();
    let mut faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for f in &mut faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            f.swap(1, 2);
        }
    }
    (vertices, faces)
}

/// Red-refined icosahedron with every new vertex projected onto the unit sphere.
pub fn build_icosphere(level: usize) -> Result<FlatMesh> {
    if level > MAX_LEVEL {
        return Err(Error::Resource(format!("icosphere level {level} exceeds the limit {MAX_LEVEL}")));
    }
    let (mut vertices, mut faces) = icosahedron();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 2);
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let m = (vertices[key.0] + vertices[key.1]) * 0.5;
                vertices.push(m / m.norm());
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([ab, b, bc]);
            next.push([ca, bc, c]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    FlatMesh::new(vertices, faces, level)
}

/// Largest edge length over all triangles.
pub fn mesh_size(mesh: &FlatMesh) -> f64 {
    (0..mesh.num_triangles()).map(|t| mesh.diameter(t)).fold(0.0, f64::max)
}

/// An edge-connected patch of triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Macroelement {
    /// Member triangles in increasing order.
    pub members: Vec<usize>,
    /// Member whose barycenter is nearest the patch barycenter.
    pub seed: usize,
    pub interior_vertices: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
}

impl Macroelement {
    /// Build a patch from its members, choosing the seed and classifying vertices.
    pub fn new(mesh: &FlatMesh, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        let center = members.iter().map(|&t| mesh.barycenter(t)).sum::<Vec3>() / members.len() as f64;
        let mut seed = members[0];
        let mut best = f64::INFINITY;
        for &t in &members {
            let d = (mesh.barycenter(t) - center).norm();
            if d < best {
                best = d;
                seed = t;
            }
        }
        // A vertex is interior when every triangle around it belongs to the patch.
        let mut count: HashMap<usize, usize> = HashMap::new();
        for &t in &members {
            for &v in &mesh.triangles[t] {
                *count.entry(v).or_default() += 1;
            }
        }
        let star = |v: usize| mesh.triangles.iter().filter(|tri| tri.contains(&v)).count();
        let mut interior = Vec::new();
        let mut boundary = Vec::new();
        let mut verts: Vec<_> = count.into_iter().collect();
        verts.sort_unstable();
        for (v, c) in verts {
            if c == star(v) {
                interior.push(v);
            } else {
                boundary.push(v);
            }
        }
        Macroelement { members, seed, interior_vertices: interior, boundary_vertices: boundary }
    }

    /// Pairs of member positions sharing an edge, with the shared edge index.
    pub fn interior_edges(&self, mesh: &FlatMesh) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (i, &a) in self.members.iter().enumerate() {
            for (j, &b) in self.members.iter().enumerate().skip(i + 1) {
                for &e in &mesh.triangle_edges[a] {
                    if mesh.triangle_edges[b].contains(&e) {
                        out.push((i, j, e));
                    }
                }
            }
        }
        out
    }

    pub fn is_edge_connected(&self, mesh: &FlatMesh) -> bool {
        let n = self.members.len();
        if n == 0 {
            return false;
        }
        let links = self.interior_edges(mesh);
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &(a, b, _) in &links {
                let other = if a == i {
                    b
                } else if b == i {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// One patch per vertex holding all triangles around it.
pub fn vertex_star_partitioning(mesh: &FlatMesh) -> Vec<Macroelement> {
    let star = mesh.vertex_triangles();
    let center = |members: &[usize]| members.iter().map(|&t| mesh.barycenter(t)).sum::<Vec3>() / members.len() as f64;
    star.into_iter()
        .enumerate()
        .map(|(v, members)| {
            let c = center(&members);
            let mut seed = members[0];
            let mut best = f64::INFINITY;
            for &t in &members {
                let d = (mesh.barycenter(t) - c).norm();
                if d < best {
                    best = d;
                    seed = t;
                }
            }
            let mut ring: Vec<usize> = members.iter().flat_map(|&t| mesh.triangles[t]).filter(|&w| w != v).collect();
            ring.sort_unstable();
            ring.dedup();
            Macroelement { members, seed, interior_vertices: vec![v], boundary_vertices: ring }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (level, v, f, e) in [(0, 12, 20, 30), (1, 42, 80, 120), (2, 162, 320, 480)] {
            let m = build_icosphere(level).unwrap();
            assert_eq!((m.num_vertices(), m.num_triangles(), m.num_edges()), (v, f, e));
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_closed());
            for x in &m.vertices {
                assert!((x.norm() - 1.0).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn level_guard() {
        assert!(matches!(build_icosphere(MAX_LEVEL + 1), Err(Error::Resource(_))));
    }

    #[test]
    fn outward_orientation() {
        let m = build_icosphere(2).unwrap();
        for t in 0..m.num_triangles() {
            assert!(m.normal(t).dot(&m.barycenter(t)) > 0.0);
        }
    }

    #[test]
    fn coarse_edge_length() {
        let m = build_icosphere(0).unwrap();
        let exact = 4.0 / (10.0 + 2.0 * 5f64.sqrt()).sqrt();
        assert!((mesh_size(&m) - exact).abs() < 1e-12);
    }

    #[test]
    fn size_halves() {
        let hs: Vec<f64> = (1..=4).map(|l| mesh_size(&build_icosphere(l).unwrap())).collect();
        for w in hs.windows(2) {
            let r = w[1] / w[0];
            assert!((0.45..=0.55).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn single_triangle_size() {
        let v = vec![Vec3::zeros(), Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, 4.0, 0.0)];
        let m = FlatMesh::new(v, vec![[0, 1, 2]], 0).unwrap();
        assert_eq!(mesh_size(&m), 5.0);
        assert!(!m.is_closed());
    }

    #[test]
    fn stars() {
        let m0 = build_icosphere(0).unwrap();
        let p0 = vertex_star_partitioning(&m0);
        assert_eq!(p0.len(), 12);
        assert!(p0.iter().all(|p| p.members.len() == 5));

        let m1 = build_icosphere(1).unwrap();
        let p1 = vertex_star_partitioning(&m1);
        assert_eq!(p1.len(), 42);
        assert!(p1[..12].iter().all(|p| p.members.len() == 5));
        assert!(p1[12..].iter().all(|p| p.members.len() == 6));
        assert_eq!(p1.iter().map(|p| p.members.len()).sum::<usize>(), 3 * m1.num_triangles());
        let mut mult = vec![0; m1.num_triangles()];
        for p in &p1 {
            assert!(p.is_edge_connected(&m1));
            assert!(p.members.contains(&p.seed));
            for &t in &p.members {
                mult[t] += 1;
            }
        }
        assert!(mult.iter().all(|&c| c == 3));
    }

    #[test]
    fn macroelement_constructor_matches_star() {
        let m = build_icosphere(1).unwrap();
        let stars = vertex_star_partitioning(&m);
        let p = Macroelement::new(&m, stars[20].members.clone());
        assert_eq!(p, stars[20]);
    }

    #[test]
    fn off_output() {
        let m = build_icosphere(0).unwrap();
        let mut buf = Vec::new();
        m.write_off(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("OFF"));
        assert_eq!(lines.next(), Some("12 20 30"));
        assert_eq!(s.lines().filter(|l| l.starts_with("3 ")).count(), 20);
    }
}
