//! Dense bipartite operators on `H_A ⊗ H_B`.
//!
//! Basis index convention: `i = d_B·a + b` for `|a⟩_A ⊗ |b⟩_B`. Every
//! convention-sensitive routine (partial transpose, partial trace, the JSON
//! schema) relies on it.

use std::ops::{Add, Deref, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BipartiteDims {
    pub d_a: usize,
    pub d_b: usize,
}

impl BipartiteDims {
    pub fn new(d_a: usize, d_b: usize) -> Result<Self> {
        if d_a < 2 || d_b < 2 {
            return Err(Error::InvalidDims { d_a, d_b });
        }
        Ok(Self { d_a, d_b })
    }

    pub fn total(&self) -> usize {
        self.d_a * self.d_b
    }

    /// True for 2×2 and 2×3 (either order), where PPT is equivalent to separability.
    pub fn ppt_is_sufficient(&self) -> bool {
        self.total() <= 6
    }
}

impl std::fmt::Display for BipartiteDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.d_a, self.d_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Dense Hermitian matrix acting on `H_A ⊗ H_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    dims: BipartiteDims,
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity (entrywise, `1e-12`), then stores the
    /// exactly Hermitian part.
    pub fn new(dims: BipartiteDims, matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(dims, matrix, tol::HERMITIAN_TOL)
    }

    pub fn with_tolerance(dims: BipartiteDims, matrix: CMatrix, tolerance: f64) -> Result<Self> {
        let d = dims.total();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: format!("{d}x{d} for dims {dims}"),
                got: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let dev = linalg::max_hermitian_deviation(&matrix);
        if !(dev <= tolerance) {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::from_hermitian_part(dims, &matrix))
    }

    /// Keeps the Hermitian part of `matrix` without checking how far it was from Hermitian.
    pub(crate) fn from_hermitian_part(dims: BipartiteDims, matrix: &CMatrix) -> Self {
        Self {
            dims,
            matrix: linalg::hermitian_part(matrix),
        }
    }

    pub fn identity(dims: BipartiteDims) -> Self {
        let d = dims.total();
        Self {
            dims,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn zeros(dims: BipartiteDims) -> Self {
        let d = dims.total();
        Self {
            dims,
            matrix: CMatrix::zeros(d, d),
        }
    }

    /// `|v⟩⟨v|` (no normalization applied).
    pub fn projector(dims: BipartiteDims, v: &CVector) -> Result<Self> {
        if v.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total().to_string(),
                got: v.len().to_string(),
            });
        }
        Ok(Self::from_hermitian_part(dims, &linalg::outer(v)))
    }

    /// Projector onto the span of orthonormal `columns`.
    pub fn subspace_projector(dims: BipartiteDims, columns: &CMatrix) -> Result<Self> {
        if columns.nrows() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total().to_string(),
                got: columns.nrows().to_string(),
            });
        }
        Ok(Self::from_hermitian_part(dims, &(columns * columns.adjoint())))
    }

    /// Real diagonal operator.
    pub fn diagonal(dims: BipartiteDims, entries: &[f64]) -> Result<Self> {
        if entries.len() != dims.total() {
            return Err(Error::DimensionMismatch {
                expected: dims.total().to_string(),
                got: entries.len().to_string(),
            });
        }
        let d = entries.len();
        let m = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                ZERO
            }
        });
        Ok(Self { dims, matrix: m })
    }

    pub fn dims(&self) -> BipartiteDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    /// `Tr(self · other)`, which is real for Hermitian arguments.
    pub fn trace_product(&self, other: &HermitianOperator) -> Result<f64> {
        self.check_same_dims(other)?;
        let n = self.matrix.nrows();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.matrix[(i, j)] * other.matrix[(j, i)];
            }
        }
        Ok(acc.re)
    }

    pub fn expectation(&self, v: &CVector) -> f64 {
        linalg::quad_form(&self.matrix, v)
    }

    pub fn product_expectation(&self, v: &ProductVector) -> f64 {
        self.expectation(&v.tensor())
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    pub fn distance(&self, other: &HermitianOperator) -> f64 {
        linalg::frobenius(&(&self.matrix - &other.matrix))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dims: self.dims,
            matrix: self.matrix.scale(s),
        }
    }

    pub fn normalized_frobenius(&self) -> Self {
        let n = self.frobenius_norm();
        if n > 0.0 {
            self.scale(1.0 / n)
        } else {
            self.clone()
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        linalg::eigh(&self.matrix)
    }

    pub fn partial_transpose(&self, subsystem: Subsystem) -> Self {
        partial_transpose(self, subsystem)
    }

    /// Shorthand for the partial transpose on `B`.
    pub fn pt(&self) -> Self {
        partial_transpose(self, Subsystem::B)
    }

    /// Trace over `traced`, leaving an operator on the other factor.
    pub fn partial_trace(&self, traced: Subsystem) -> CMatrix {
        let BipartiteDims { d_a, d_b } = self.dims;
        let m = &self.matrix;
        match traced {
            Subsystem::A => CMatrix::from_fn(d_b, d_b, |b, bp| {
                (0..d_a).map(|a| m[(a * d_b + b, a * d_b + bp)]).sum()
            }),
            Subsystem::B => CMatrix::from_fn(d_a, d_a, |a, ap| {
                (0..d_b).map(|b| m[(a * d_b + b, ap * d_b + b)]).sum()
            }),
        }
    }

    /// `⟨e|_A M |e⟩_A`, a `d_B × d_B` matrix.
    pub fn contract_a(&self, e: &CVector) -> CMatrix {
        contract_a(&self.matrix, self.dims, e)
    }

    /// `⟨f|_B M |f⟩_B`, a `d_A × d_A` matrix.
    pub fn contract_b(&self, f: &CVector) -> CMatrix {
        contract_b(&self.matrix, self.dims, f)
    }

    /// True when `M² = M` within `tolerance` (Frobenius).
    pub fn is_projector(&self, tolerance: f64) -> bool {
        linalg::frobenius(&(&self.matrix * &self.matrix - &self.matrix)) <= tolerance
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -tol::PSD_FLOOR
    }

    pub fn spectral_split(&self, rank_tol: f64) -> SpectralSplit {
        spectral_split(self, rank_tol)
    }

    pub fn pseudo_inverse(&self, rank_tol: f64) -> Self {
        pseudo_inverse(self, rank_tol)
    }

    fn check_same_dims(&self, other: &HermitianOperator) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.to_string(),
                got: other.dims.to_string(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &HermitianOperator) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(self + other)
    }

    pub fn try_sub(&self, other: &HermitianOperator) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(self - other)
    }
}

/// Panics on mismatched dimensions; use [`HermitianOperator::try_add`] for a checked variant.
impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        assert_eq!(self.dims, rhs.dims, "dimension mismatch");
        HermitianOperator {
            dims: self.dims,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        assert_eq!(self.dims, rhs.dims, "dimension mismatch");
        HermitianOperator {
            dims: self.dims,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

pub(crate) fn contract_a(m: &CMatrix, dims: BipartiteDims, e: &CVector) -> CMatrix {
    let BipartiteDims { d_a, d_b } = dims;
    let mut out = CMatrix::zeros(d_b, d_b);
    for a in 0..d_a {
        for ap in 0..d_a {
            let w = e[a].conj() * e[ap];
            if w == ZERO {
                continue;
            }
            for b in 0..d_b {
                for bp in 0..d_b {
                    out[(b, bp)] += w * m[(a * d_b + b, ap * d_b + bp)];
                }
            }
        }
    }
    linalg::hermitian_part(&out)
}

pub(crate) fn contract_b(m: &CMatrix, dims: BipartiteDims, f: &CVector) -> CMatrix {
    let BipartiteDims { d_a, d_b } = dims;
    let mut out = CMatrix::zeros(d_a, d_a);
    for b in 0..d_b {
        for bp in 0..d_b {
            let w = f[b].conj() * f[bp];
            if w == ZERO {
                continue;
            }
            for a in 0..d_a {
                for ap in 0..d_a {
                    out[(a, ap)] += w * m[(a * d_b + b, ap * d_b + bp)];
                }
            }
        }
    }
    linalg::hermitian_part(&out)
}

/// Transpose on one tensor factor: `⟨a b|M^{T_B}|a' b'⟩ = ⟨a b'|M|a' b⟩`.
pub fn partial_transpose(m: &HermitianOperator, subsystem: Subsystem) -> HermitianOperator {
    let BipartiteDims { d_a, d_b } = m.dims;
    let d = d_a * d_b;
    let src = &m.matrix;
    let matrix = CMatrix::from_fn(d, d, |i, j| {
        let (a, b) = (i / d_b, i % d_b);
        let (ap, bp) = (j / d_b, j % d_b);
        match subsystem {
            Subsystem::B => src[(a * d_b + bp, ap * d_b + b)],
            Subsystem::A => src[(ap * d_b + b, a * d_b + bp)],
        }
    });
    HermitianOperator { dims: m.dims, matrix }
}

/// Unit-trace positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(HermitianOperator);

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > tol::TRACE_TOL {
            return Err(Error::NotDensity(format!("trace {tr} differs from 1")));
        }
        let min = op.min_eigenvalue();
        if min < -tol::PSD_FLOOR {
            return Err(Error::NotDensity(format!("min eigenvalue {min:e}")));
        }
        Ok(Self(op))
    }

    /// Rescales a PSD operator to unit trace.
    pub fn normalize(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if !(tr > 0.0) {
            return Err(Error::NotDensity(format!("nonpositive trace {tr}")));
        }
        let mut scaled = op.scale(1.0 / tr);
        // exact unit trace after rounding
        let residual = 1.0 - scaled.trace();
        let d = scaled.dims.total();
        for i in 0..d {
            scaled.matrix[(i, i)].re += residual / d as f64;
        }
        Self::new(scaled)
    }

    pub fn maximally_mixed(dims: BipartiteDims) -> Self {
        Self(HermitianOperator::identity(dims).scale(1.0 / dims.total() as f64))
    }

    /// `|v⟩⟨v|/⟨v|v⟩`.
    pub fn pure(dims: BipartiteDims, v: &CVector) -> Result<Self> {
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::NotDensity("zero state vector".into()));
        }
        Self::new(HermitianOperator::projector(dims, &v.unscale(n))?)
    }

    pub fn from_product(v: &ProductVector) -> Self {
        Self(HermitianOperator::from_hermitian_part(
            v.dims(),
            &linalg::outer(&v.tensor()),
        ))
    }

    pub fn as_operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn into_operator(self) -> HermitianOperator {
        self.0
    }
}

impl Deref for DensityMatrix {
    type Target = HermitianOperator;
    fn deref(&self) -> &HermitianOperator {
        &self.0
    }
}

/// Pair of unit vectors `(e, f)` representing `|e⟩_A ⊗ |f⟩_B`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductVector {
    e: CVector,
    f: CVector,
}

impl ProductVector {
    /// Normalizes both factors.
    pub fn new(e: CVector, f: CVector) -> Result<Self> {
        let (ne, nf) = (e.norm(), f.norm());
        if !(ne > 0.0 && nf > 0.0) {
            return Err(Error::Parameter("product factor has zero norm".into()));
        }
        if e.len() < 2 || f.len() < 2 {
            return Err(Error::InvalidDims {
                d_a: e.len(),
                d_b: f.len(),
            });
        }
        Ok(Self {
            e: e.unscale(ne),
            f: f.unscale(nf),
        })
    }

    /// Computational basis product `|a⟩|b⟩`.
    pub fn basis(dims: BipartiteDims, a: usize, b: usize) -> Self {
        let e = CVector::from_fn(dims.d_a, |i, _| if i == a { ONE } else { ZERO });
        let f = CVector::from_fn(dims.d_b, |i, _| if i == b { ONE } else { ZERO });
        Self { e, f }
    }

    pub fn e(&self) -> &CVector {
        &self.e
    }

    pub fn f(&self) -> &CVector {
        &self.f
    }

    pub fn dims(&self) -> BipartiteDims {
        BipartiteDims {
            d_a: self.e.len(),
            d_b: self.f.len(),
        }
    }

    pub fn tensor(&self) -> CVector {
        linalg::kron_vec(&self.e, &self.f)
    }

    /// `(e, f*)`.
    pub fn partial_conjugate(&self) -> Self {
        Self {
            e: self.e.clone(),
            f: linalg::conj_vec(&self.f),
        }
    }

    /// Same ray with each factor's first nonzero component real positive.
    pub fn phase_fixed(&self) -> Self {
        Self {
            e: linalg::fix_phase(&self.e),
            f: linalg::fix_phase(&self.f),
        }
    }

    /// `|⟨self|other⟩|` of the tensor vectors.
    pub fn overlap(&self, other: &ProductVector) -> f64 {
        (self.e.dotc(&other.e) * self.f.dotc(&other.f)).norm()
    }
}

/// Range/kernel split of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct SpectralSplit {
    pub range_projector: HermitianOperator,
    pub kernel_projector: HermitianOperator,
    pub rank: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    range_basis: CMatrix,
    kernel_basis: CMatrix,
}

impl SpectralSplit {
    /// Orthonormal columns spanning the range.
    pub fn range_basis(&self) -> &CMatrix {
        &self.range_basis
    }

    /// Orthonormal columns spanning the kernel.
    pub fn kernel_basis(&self) -> &CMatrix {
        &self.kernel_basis
    }
}

/// Eigenvalues with `|λ| ≤ rank_tol·max(1, |λ|_max)` are assigned to the kernel.
pub fn spectral_split(m: &HermitianOperator, rank_tol: f64) -> SpectralSplit {
    let (vals, vecs) = m.eigh();
    let d = vals.len();
    let scale = vals.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let threshold = rank_tol * scale;
    let (range_idx, kernel_idx): (Vec<usize>, Vec<usize>) =
        (0..d).partition(|&k| vals[k].abs() > threshold);
    let gather = |idx: &[usize]| {
        let mut out = CMatrix::zeros(d, idx.len());
        for (c, &k) in idx.iter().enumerate() {
            out.set_column(c, &vecs.column(k));
        }
        out
    };
    let range_basis = gather(&range_idx);
    let kernel_basis = gather(&kernel_idx);
    SpectralSplit {
        range_projector: HermitianOperator::from_hermitian_part(
            m.dims,
            &(&range_basis * range_basis.adjoint()),
        ),
        kernel_projector: HermitianOperator::from_hermitian_part(
            m.dims,
            &(&kernel_basis * kernel_basis.adjoint()),
        ),
        rank: range_idx.len(),
        eigenvalues: vals,
        range_basis,
        kernel_basis,
    }
}

/// Moore–Penrose inverse, inverting only eigenvalues above the rank threshold.
pub fn pseudo_inverse(m: &HermitianOperator, rank_tol: f64) -> HermitianOperator {
    let (vals, vecs) = m.eigh();
    let d = vals.len();
    let scale = vals.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let threshold = rank_tol * scale;
    let mut out = CMatrix::zeros(d, d);
    for k in 0..d {
        if vals[k].abs() > threshold {
            let v = vecs.column(k);
            out += (v * v.adjoint()).scale(1.0 / vals[k]);
        }
    }
    HermitianOperator::from_hermitian_part(m.dims, &out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PptReport {
    pub is_ppt: bool,
    pub min_pt_eigenvalue: f64,
}

/// Positivity of the partial transpose on `B`.
pub fn ppt_check(rho: &DensityMatrix) -> PptReport {
    let min = rho.pt().min_eigenvalue();
    PptReport {
        is_ppt: min >= -tol::PSD_FLOOR,
        min_pt_eigenvalue: min,
    }
}

/// JSON layout: `{"dims":[d_A,d_B],"matrix":[[[re,im],...],...]}`, row-major.
#[derive(Serialize, Deserialize)]
struct OperatorJson {
    dims: [usize; 2],
    matrix: Vec<Vec<[f64; 2]>>,
}

impl Serialize for HermitianOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dims.total();
        let matrix = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let z = self.matrix[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        OperatorJson {
            dims: [self.dims.d_a, self.dims.d_b],
            matrix,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = OperatorJson::deserialize(d)?;
        operator_from_json_parts(raw).map_err(D::Error::custom)
    }
}

fn operator_from_json_parts(raw: OperatorJson) -> Result<HermitianOperator> {
    let dims = BipartiteDims::new(raw.dims[0], raw.dims[1])?;
    let d = dims.total();
    if raw.matrix.len() != d || raw.matrix.iter().any(|row| row.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: format!("{d}x{d} matrix"),
            got: format!("{} rows", raw.matrix.len()),
        });
    }
    let m = CMatrix::from_fn(d, d, |i, j| {
        let [re, im] = raw.matrix[i][j];
        Complex64::new(re, im)
    });
    HermitianOperator::with_tolerance(dims, m, tol::JSON_HERMITIAN_TOL)
}

impl HermitianOperator {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: OperatorJson = serde_json::from_str(text)?;
        operator_from_json_parts(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("operator serialization is infallible")
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

#[derive(Serialize, Deserialize)]
struct ProductVectorJson {
    e: Vec<[f64; 2]>,
    f: Vec<[f64; 2]>,
}

impl Serialize for ProductVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pack = |v: &CVector| v.iter().map(|z| [z.re, z.im]).collect();
        ProductVectorJson {
            e: pack(&self.e),
            f: pack(&self.f),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ProductVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = ProductVectorJson::deserialize(d)?;
        let unpack = |v: &[[f64; 2]]| {
            CVector::from_iterator(v.len(), v.iter().map(|[re, im]| Complex64::new(*re, *im)))
        };
        ProductVector::new(unpack(&raw.e), unpack(&raw.f)).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims22() -> BipartiteDims {
        BipartiteDims::new(2, 2).unwrap()
    }

    fn phi_plus() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![
            Complex64::new(s, 0.0),
            ZERO,
            ZERO,
            Complex64::new(s, 0.0),
        ]);
        DensityMatrix::pure(dims22(), &v).unwrap()
    }

    #[test]
    fn rejects_small_dims() {
        assert!(matches!(
            BipartiteDims::new(1, 4),
            Err(Error::InvalidDims { .. })
        ));
    }

    #[test]
    fn identity_is_fixed_by_partial_transpose() {
        let id = HermitianOperator::identity(dims22());
        assert_eq!(id.pt(), id);
        assert_eq!(id.partial_transpose(Subsystem::A), id);
    }

    #[test]
    fn partial_transpose_of_phi_plus() {
        let vals = phi_plus().pt().eigenvalues();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn ppt_check_fixtures() {
        let mixed = ppt_check(&DensityMatrix::maximally_mixed(dims22()));
        assert!(mixed.is_ppt);
        assert!((mixed.min_pt_eigenvalue - 0.25).abs() < 1e-12);
        let ent = ppt_check(&phi_plus());
        assert!(!ent.is_ppt);
        assert!((ent.min_pt_eigenvalue + 0.5).abs() < 1e-12);
    }

    #[test]
    fn spectral_split_fixtures() {
        let s = HermitianOperator::identity(dims22()).spectral_split(tol::RANK_TOL);
        assert_eq!(s.rank, 4);
        assert!(s.kernel_projector.frobenius_norm() < 1e-12);

        let v = ProductVector::basis(dims22(), 0, 0);
        let p = DensityMatrix::from_product(&v);
        let s = p.spectral_split(tol::RANK_TOL);
        assert_eq!(s.rank, 1);
        assert!(s.range_projector.distance(&p) < 1e-12);
    }

    #[test]
    fn pseudo_inverse_fixtures() {
        let id = HermitianOperator::identity(dims22());
        assert!(id.pseudo_inverse(tol::RANK_TOL).distance(&id) < 1e-12);
        let m = HermitianOperator::diagonal(dims22(), &[2.0, 0.0, 0.0, 0.0]).unwrap();
        let expected = HermitianOperator::diagonal(dims22(), &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!(m.pseudo_inverse(tol::RANK_TOL).distance(&expected) < 1e-12);
    }

    #[test]
    fn partial_traces_of_product() {
        let v = ProductVector::basis(BipartiteDims::new(2, 3).unwrap(), 1, 2);
        let rho = DensityMatrix::from_product(&v);
        let ra = rho.partial_trace(Subsystem::B);
        let rb = rho.partial_trace(Subsystem::A);
        assert!((ra[(1, 1)].re - 1.0).abs() < 1e-15 && ra[(0, 0)].norm() < 1e-15);
        assert!((rb[(2, 2)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_rejects_non_hermitian() {
        let text = r#"{"dims":[2,2],"matrix":[[[1,0],[1,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]],[[0,0],[0,0],[0,0],[0,0]]]}"#;
        assert!(matches!(
            HermitianOperator::from_json(text),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let op = phi_plus().into_operator();
        let back = HermitianOperator::from_json(&op.to_json()).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn density_rejects_bad_trace() {
        let op = HermitianOperator::identity(dims22());
        assert!(matches!(DensityMatrix::new(op), Err(Error::NotDensity(_))));
    }

    #[test]
    fn product_vector_conjugate_and_phase() {
        let e = CVector::from_vec(vec![Complex64::new(0.0, 1.0), ONE]);
        let f = CVector::from_vec(vec![Complex64::new(0.0, 2.0), Complex64::new(1.0, 1.0)]);
        let v = ProductVector::new(e, f).unwrap();
        assert!((v.tensor().norm() - 1.0).abs() < 1e-14);
        let c = v.partial_conjugate();
        assert_eq!(c.f()[0], v.f()[0].conj());
        let fixed = v.phase_fixed();
        assert!(fixed.e()[0].im.abs() < 1e-15 && fixed.e()[0].re > 0.0);
        assert!((fixed.overlap(&v) - 1.0).abs() < 1e-14);
    }
}
