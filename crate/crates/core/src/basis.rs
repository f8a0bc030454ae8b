//! Lagrange and bubble shape functions on the reference triangle.
//!
//! Barycentric coordinates are λ₀ = 1 − ξ₁ − ξ₂, λ₁ = ξ₁, λ₂ = ξ₂. Nodes of the
//! order-k Lagrange element are ordered vertices first, then the interior
//! points of edges (0,1), (1,2), (2,0) walking from the first to the second
//! vertex, then interior nodes.

const DLAMBDA: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Where a local node sits on the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Vertex(usize),
    /// Local edge and position `1..k` along it.
    Edge(usize, usize),
    Interior(usize),
}

/// Nodal Lagrange basis of order `k ≥ 1`.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    pub order: usize,
    /// Barycentric multi-indices summing to `order`.
    pub indices: Vec<[usize; 3]>,
    pub kinds: Vec<NodeKind>,
}

/// Values, gradients and optionally Hessians of all shape functions at a point.
#[derive(Debug, Clone, Default)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub hessians: Vec<[[f64; 2]; 2]>,
}

impl ShapeEval {
    pub fn with_len(n: usize) -> Self {
        ShapeEval { values: vec![0.0; n], grads: vec![[0.0; 2]; n], hessians: vec![[[0.0; 2]; 2]; n] }
    }
}

/// Number of Lagrange nodes of order `k`.
pub fn lagrange_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

impl LagrangeBasis {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Lagrange order must be positive");
        let k = order;
        let mut indices = vec![[k, 0, 0], [0, k, 0], [0, 0, k]];
        let mut kinds = vec![NodeKind::Vertex(0), NodeKind::Vertex(1), NodeKind::Vertex(2)];
        for e in 0..3 {
            let (a, b) = (e, (e + 1) % 3);
            for s in 1..k {
                let mut idx = [0; 3];
                idx[a] = k - s;
                idx[b] = s;
                indices.push(idx);
                kinds.push(NodeKind::Edge(e, s));
            }
        }
        let mut n = 0;
        for i1 in 1..k {
            for i2 in 1..k - i1 {
                indices.push([k - i1 - i2, i1, i2]);
                kinds.push(NodeKind::Interior(n));
                n += 1;
            }
        }
        LagrangeBasis { order, indices, kinds }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Reference coordinates of node `i`.
    pub fn node(&self, i: usize) -> [f64; 2] {
        let k = self.order as f64;
        [self.indices[i][1] as f64 / k, self.indices[i][2] as f64 / k]
    }

    /// Evaluate all shape functions at `xi`, writing into `out` starting at `offset`.
    pub fn eval_into(&self, xi: [f64; 2], out: &mut ShapeEval, offset: usize, hessians: bool) {
        let k = self.order;
        let lam = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
        // g_a(t) = prod_{s<a} (k t − s)/(s + 1), with first and second derivatives.
        let mut g = vec![[[0.0; 3]; 3]; k + 1];
        for (m, &t) in lam.iter().enumerate() {
            let (mut v, mut d1, mut d2) = (1.0, 0.0, 0.0);
            g[0][m] = [1.0, 0.0, 0.0];
            for s in 0..k {
                let c = 1.0 / (s as f64 + 1.0);
                let f = (k as f64 * t - s as f64) * c;
                let df = k as f64 * c;
                d2 = d2 * f + 2.0 * d1 * df;
                d1 = d1 * f + v * df;
                v *= f;
                g[s + 1][m] = [v, d1, d2];
            }
        }
        for (i, idx) in self.indices.iter().enumerate() {
            let f = [g[idx[0]][0], g[idx[1]][1], g[idx[2]][2]];
            let val = f[0][0] * f[1][0] * f[2][0];
            // Partial derivatives with respect to each barycentric coordinate.
            let dl = [f[0][1] * f[1][0] * f[2][0], f[0][0] * f[1][1] * f[2][0], f[0][0] * f[1][0] * f[2][1]];
            let mut grad = [0.0; 2];
            for m in 0..3 {
                grad[0] += dl[m] * DLAMBDA[m][0];
                grad[1] += dl[m] * DLAMBDA[m][1];
            }
            out.values[offset + i] = val;
            out.grads[offset + i] = grad;
            if hessians {
                let mut hl = [[0.0; 3]; 3];
                for m in 0..3 {
                    for n in 0..3 {
                        let mut p = 1.0;
                        for (r, fr) in f.iter().enumerate() {
                            p *= if m == n && r == m {
                                fr[2]
                            } else if r == m || r == n {
                                fr[1]
                            } else {
                                fr[0]
                            };
                        }
                        hl[m][n] = p;
                    }
                }
                let mut h = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        for m in 0..3 {
                            for n in 0..3 {
                                h[a][b] += hl[m][n] * DLAMBDA[m][a] * DLAMBDA[n][b];
                            }
                        }
                    }
                }
                out.hessians[offset + i] = h;
            }
        }
    }

    pub fn eval(&self, xi: [f64; 2], hessians: bool) -> ShapeEval {
        let mut out = ShapeEval::with_len(self.len());
        self.eval_into(xi, &mut out, 0, hessians);
        out
    }
}

/// Cubic bubble 27 λ₀λ₁λ₂ with gradient and Hessian.
pub fn bubble(xi: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
    let (x, y) = (xi[0], xi[1]);
    let l0 = 1.0 - x - y;
    let v = 27.0 * l0 * x * y;
    let gx = 27.0 * y * (l0 - x);
    let gy = 27.0 * x * (l0 - y);
    let hxx = -54.0 * y;
    let hyy = -54.0 * x;
    let hxy = 27.0 * (l0 - x - y);
    (v, [gx, gy], [[hxx, hxy], [hxy, hyy]])
}
