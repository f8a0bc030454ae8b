//! Sparse factorization of symmetric indefinite matrices.
//!
//! The primary path is a supernodal LBLᵀ with an AMD ordering. Pivoting stays inside
//! supernodes, so a probe solve checks the factor and a general LU takes over when
//! the probe residual is poor.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::solvers::Solve;
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat, Par, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Relative probe residual above which the LBLᵀ factor is rejected.
const PROBE_TOL: f64 = 1e-9;

enum Kind {
    Lblt { symbolic: SymbolicCholesky<usize>, values: Vec<f64>, subdiag: Vec<f64>, fwd: Vec<usize>, inv: Vec<usize> },
    Lu(Lu<usize, f64>),
}

/// Factor of a symmetric matrix supporting repeated solves.
pub struct SymmetricFactor {
    kind: Kind,
    n: usize,
}

impl std::fmt::Debug for SymmetricFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            Kind::Lblt { .. } => "lblt",
            Kind::Lu(_) => "lu",
        };
        f.debug_struct("SymmetricFactor").field("n", &self.n).field("kind", &kind).finish()
    }
}

fn lower(m: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
    let t: Vec<_> = m.triplets().filter(|&(r, c, _)| r >= c).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(m.nrows, m.ncols, &t)
        .map_err(|e| Error::Mismatch(format!("sparse conversion failed: {e:?}")))
}

fn lblt(m: &CsrMatrix) -> Result<Kind> {
    let n = m.nrows;
    let a = lower(m)?;
    let params = CholeskySymbolicParams {
        supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
        ..Default::default()
    };
    let symbolic = factorize_symbolic_cholesky(a.symbolic(), Side::Lower, SymmetricOrdering::Amd, params)
        .map_err(|e| Error::Singular(format!("symbolic factorization failed: {e:?}")))?;
    let mut values = vec![0.0; symbolic.len_val()];
    let mut subdiag = vec![0.0; n];
    let mut fwd = vec![0; n];
    let mut inv = vec![0; n];
    let par = Par::Seq;
    let mut mem = MemBuffer::new(symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(par, Default::default()));
    symbolic.factorize_numeric_intranode_lblt(
        &mut values,
        &mut subdiag,
        &mut fwd,
        &mut inv,
        a.as_ref(),
        Side::Lower,
        par,
        MemStack::new(&mut mem),
        Default::default(),
    );
    Ok(Kind::Lblt { symbolic, values, subdiag, fwd, inv })
}

impl SymmetricFactor {
    /// Factor a square matrix that is symmetric up to rounding.
    pub fn new(m: &CsrMatrix) -> Result<Self> {
        if m.nrows != m.ncols {
            return Err(Error::Mismatch(format!("cannot factor a {}x{} matrix", m.nrows, m.ncols)));
        }
        let n = m.nrows;
        let f = SymmetricFactor { kind: lblt(m)?, n };
        if f.probe(m) {
            return Ok(f);
        }
        let lu = m.to_faer()?.sp_lu().map_err(|e| Error::Singular(format!("factorization failed: {e:?}")))?;
        Ok(SymmetricFactor { kind: Kind::Lu(lu), n })
    }

    pub fn is_lblt(&self) -> bool {
        matches!(self.kind, Kind::Lblt { .. })
    }

    fn probe(&self, m: &CsrMatrix) -> bool {
        let b: Vec<f64> = (0..self.n).map(|i| 1.0 + (0.37 * i as f64).sin()).collect();
        let x = self.solve(&b);
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        let r: f64 = m.mul_vec(&x).iter().zip(&b).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        r <= PROBE_TOL * (m.max_abs() * xn + bn)
    }

    /// One solve without refinement.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
        match &self.kind {
            Kind::Lblt { symbolic, values, subdiag, fwd, inv } => {
                // fwd and inv come from the factorization and are inverse to each other.
                let perm = unsafe { PermRef::new_unchecked(fwd, inv, self.n) };
                let f = IntranodeLbltRef::new(symbolic, values, subdiag, perm);
                let mut mem = MemBuffer::new(f.solve_in_place_scratch::<f64>(1, Par::Seq));
                f.solve_in_place_with_conj(Conj::No, b.as_mut(), Par::Seq, MemStack::new(&mut mem));
            }
            Kind::Lu(lu) => lu.solve_in_place(b.as_mut()),
        }
        (0..r.len()).map(|i| b[(i, 0)]).collect()
    }
}
