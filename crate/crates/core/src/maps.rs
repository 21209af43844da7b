//! Positive maps through the Choi–Jamiołkowski correspondence.
//!
//! Convention: `Λ(|i⟩⟨j|)` is the `(i, j)` block of the Choi matrix, so the
//! Choi matrix `Σ |i⟩⟨j| ⊗ Λ(|i⟩⟨j|)` of a witness `W` on `C^{d_A} ⊗ C^{d_B}` is
//! `W` itself and `Λ(X) = Tr_A[(X^T ⊗ 1) W]`. Block-positive `W` gives a
//! positive map; the identity map has the unnormalized `|Φ⟩⟨Φ|` as Choi matrix
//! and the transposition has SWAP.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{BipartiteDims, DensityMatrix, HermitianOperator};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoiMap {
    pub choi: HermitianOperator,
    pub d_in: usize,
    pub d_out: usize,
}

impl ChoiMap {
    /// Choi matrix of a Hermiticity-preserving linear map given by its action.
    pub fn from_fn(d_in: usize, d_out: usize, map: impl Fn(&CMatrix) -> CMatrix) -> Result<Self> {
        let dims = BipartiteDims::new(d_in, d_out)?;
        let mut choi = CMatrix::zeros(d_in * d_out, d_in * d_out);
        for i in 0..d_in {
            for j in 0..d_in {
                let mut unit = CMatrix::zeros(d_in, d_in);
                unit[(i, j)] = linalg::ONE;
                let block = map(&unit);
                if block.shape() != (d_out, d_out) {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{d_out}x{d_out}"),
                        got: format!("{}x{}", block.nrows(), block.ncols()),
                    });
                }
                choi.view_mut((i * d_out, j * d_out), (d_out, d_out)).copy_from(&block);
            }
        }
        Ok(Self {
            choi: HermitianOperator::new(dims, choi)?,
            d_in,
            d_out,
        })
    }

    fn block(&self, i: usize, j: usize) -> CMatrix {
        self.choi
            .matrix()
            .view((i * self.d_out, j * self.d_out), (self.d_out, self.d_out))
            .into_owned()
    }
}

/// The map whose Choi matrix is `w`.
pub fn witness_to_map(w: &HermitianOperator) -> ChoiMap {
    let dims = w.dims();
    ChoiMap {
        choi: w.clone(),
        d_in: dims.d_a,
        d_out: dims.d_b,
    }
}

/// Inverse of [`witness_to_map`].
pub fn map_to_witness(map: &ChoiMap) -> HermitianOperator {
    map.choi.clone()
}

/// `Λ(X) = Σ_ij X_ij Λ(|i⟩⟨j|)`.
pub fn apply_map(map: &ChoiMap, x: &CMatrix) -> Result<CMatrix> {
    if x.shape() != (map.d_in, map.d_in) {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", map.d_in),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let mut out = CMatrix::zeros(map.d_out, map.d_out);
    for i in 0..map.d_in {
        for j in 0..map.d_in {
            out += map.block(i, j) * x[(i, j)];
        }
    }
    Ok(out)
}

/// `(Λ ⊗ id)(ρ̄)`, with `Λ` acting on the first factor of the complex conjugate of `ρ`.
///
/// Its expectation in `Σ_b |b,b⟩` equals `Tr(Wρ)`, so whenever the witness
/// detects `ρ` this operator has a negative eigenvalue.
pub fn extend_map(map: &ChoiMap, rho: &DensityMatrix) -> Result<CMatrix> {
    let dims = rho.dims();
    if dims.d_a != map.d_in {
        return Err(Error::DimensionMismatch {
            expected: format!("first factor of dimension {}", map.d_in),
            got: dims.to_string(),
        });
    }
    let (d_b, d_out) = (dims.d_b, map.d_out);
    let conj = rho.matrix().map(|z| z.conj());
    let mut out = CMatrix::zeros(d_out * d_b, d_out * d_b);
    for i in 0..map.d_in {
        for j in 0..map.d_in {
            let r = conj.view((i * d_b, j * d_b), (d_b, d_b));
            out += map.block(i, j).kronecker(&r);
        }
    }
    Ok(out)
}

/// Minimum eigenvalue of [`extend_map`]; negative means `ρ` is detected.
pub fn detect_via_map(map: &ChoiMap, rho: &DensityMatrix) -> Result<f64> {
    Ok(linalg::min_eigenvalue(&extend_map(map, rho)?))
}
