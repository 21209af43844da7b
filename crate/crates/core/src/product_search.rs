//! Minimization of Hermitian forms over normalized product vectors.
//!
//! The workhorse is an alternating ("see-saw") scheme: with `e` fixed the
//! objective is a Hermitian form in `f`, minimized by the lowest eigenvector of
//! the contracted `d_B × d_B` matrix, and symmetrically for `e`. Every
//! half-step is an exact minimization, so the objective never increases.
//! Global minima are approximated by taking the best of many Haar-random
//! starts; nothing here is a certified bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::operator::{self, ppt_check, BipartiteDims, DensityMatrix, HermitianOperator, ProductVector};
use crate::sample::{haar_vector, stream_rng};
use crate::tol;

pub const DEFAULT_RESTARTS: usize = 200;
pub const DEFAULT_MAX_SWEEPS: usize = 200;
pub const DEFAULT_SWEEP_TOL: f64 = 1e-12;
const POLISH_MAX_SWEEPS: usize = 20_000;
/// Minimizers at or below this value are refined before being classified as zeros.
const POLISH_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeeSawOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    /// Stop once a sweep lowers the objective by less than this.
    pub tol: f64,
    pub seed: u64,
}

impl SeeSawOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tol: DEFAULT_SWEEP_TOL,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::Parameter("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductMinResult {
    pub value: f64,
    pub argmin: ProductVector,
    pub restarts_used: usize,
    /// Whether the winning restart met the sweep tolerance before the sweep cap.
    pub converged: bool,
}

/// `⟨e,f|M₁|e,f⟩ + ⟨e,f*|M₂|e,f*⟩`, with the second term optional.
#[derive(Clone, Copy)]
pub(crate) struct ProductForm<'a> {
    dims: BipartiteDims,
    direct: &'a CMatrix,
    conjugated: Option<&'a CMatrix>,
}

impl<'a> ProductForm<'a> {
    pub(crate) fn plain(m: &'a HermitianOperator) -> Self {
        Self {
            dims: m.dims(),
            direct: m.matrix(),
            conjugated: None,
        }
    }

    pub(crate) fn with_conjugate(m: &'a HermitianOperator, conj: &'a HermitianOperator) -> Self {
        Self {
            dims: m.dims(),
            direct: m.matrix(),
            conjugated: Some(conj.matrix()),
        }
    }

    pub(crate) fn value(&self, e: &CVector, f: &CVector) -> f64 {
        let mut v = linalg::quad_form(self.direct, &linalg::kron_vec(e, f));
        if let Some(c) = self.conjugated {
            v += linalg::quad_form(c, &linalg::kron_vec(e, &linalg::conj_vec(f)));
        }
        v
    }

    /// Hermitian matrix `F_e` with `value(e, f) = f† F_e f`.
    pub(crate) fn matrix_for_f(&self, e: &CVector) -> CMatrix {
        let mut m = operator::contract_a(self.direct, self.dims, e);
        if let Some(c) = self.conjugated {
            m += operator::contract_a(c, self.dims, e).map(|z| z.conj());
        }
        m
    }

    /// Hermitian matrix `E_f` with `value(e, f) = e† E_f e`.
    pub(crate) fn matrix_for_e(&self, f: &CVector) -> CMatrix {
        let mut m = operator::contract_b(self.direct, self.dims, f);
        if let Some(c) = self.conjugated {
            m += operator::contract_b(c, self.dims, &linalg::conj_vec(f));
        }
        m
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Run {
    pub value: f64,
    pub e: CVector,
    pub f: CVector,
    pub converged: bool,
    /// Objective after each sweep; only filled when tracing.
    pub history: Vec<f64>,
}

impl Run {
    pub(crate) fn product(&self) -> ProductVector {
        ProductVector::new(self.e.clone(), self.f.clone()).expect("eigenvectors are unit")
    }
}

/// One see-saw descent from `e0`, updating `f` first.
pub(crate) fn see_saw(
    form: &ProductForm<'_>,
    e0: CVector,
    max_sweeps: usize,
    tol: f64,
    trace: bool,
) -> Run {
    let mut e = e0;
    let (mut value, mut f) = linalg::min_eigvec(&form.matrix_for_f(&e));
    let mut history = Vec::new();
    if trace {
        history.push(value);
    }
    let mut converged = false;
    for _ in 0..max_sweeps {
        let (_, new_e) = linalg::min_eigvec(&form.matrix_for_e(&f));
        e = new_e;
        let (v, new_f) = linalg::min_eigvec(&form.matrix_for_f(&e));
        f = new_f;
        let prev = value;
        value = v;
        if trace {
            history.push(value);
        }
        if (prev - value).abs() < tol {
            converged = true;
            break;
        }
    }
    Run {
        value: form.value(&e, &f),
        e,
        f,
        converged,
        history,
    }
}

/// Continues a descent until the objective stops improving at machine scale.
pub(crate) fn polish(form: &ProductForm<'_>, run: Run) -> Run {
    let mut e = run.e;
    let mut f = run.f;
    let mut value = run.value;
    for _ in 0..POLISH_MAX_SWEEPS {
        if value <= 1e-24 {
            break;
        }
        let (_, new_e) = linalg::min_eigvec(&form.matrix_for_e(&f));
        let (v, new_f) = linalg::min_eigvec(&form.matrix_for_f(&new_e));
        if !(v < value) {
            break;
        }
        let gain = value - v;
        e = new_e;
        f = new_f;
        value = v;
        if gain <= 1e-20 + 1e-9 * value.abs() {
            break;
        }
    }
    Run {
        value: form.value(&e, &f),
        e,
        f,
        converged: true,
        history: run.history,
    }
}

/// All restarts, in restart order. Restart `i` draws its start from stream `i` of the seed.
pub(crate) fn multi_start(form: &ProductForm<'_>, opts: &SeeSawOptions) -> Vec<Run> {
    let d_a = form.dims.d_a;
    (0..opts.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(opts.seed, i as u64);
            let e0 = haar_vector(d_a, &mut rng);
            see_saw(form, e0, opts.max_sweeps, opts.tol, false)
        })
        .collect()
}

/// Lowest value; ties go to the lowest restart index.
pub(crate) fn best_run(runs: Vec<Run>) -> Run {
    let mut best: Option<Run> = None;
    for r in runs {
        match &best {
            Some(b) if !(r.value < b.value) => {}
            _ => best = Some(r),
        }
    }
    best.expect("at least one restart")
}

pub(crate) fn minimize_form(form: &ProductForm<'_>, opts: &SeeSawOptions) -> Result<ProductMinResult> {
    opts.validate()?;
    let best = best_run(multi_start(form, opts));
    let best = if best.value <= POLISH_THRESHOLD {
        polish(form, best)
    } else {
        best
    };
    Ok(ProductMinResult {
        value: best.value,
        argmin: best.product(),
        restarts_used: opts.restarts,
        converged: best.converged,
    })
}

/// Estimate of `inf ⟨e,f|M|e,f⟩` over unit product vectors.
pub fn min_product_expectation(m: &HermitianOperator, restarts: usize, seed: u64) -> Result<ProductMinResult> {
    min_product_expectation_with(m, &SeeSawOptions::new(restarts, seed))
}

pub fn min_product_expectation_with(m: &HermitianOperator, opts: &SeeSawOptions) -> Result<ProductMinResult> {
    minimize_form(&ProductForm::plain(m), opts)
}

/// Estimate of `sup ⟨e,f|M|e,f⟩`, computed as `-inf` of `-M`.
pub fn max_product_expectation(m: &HermitianOperator, restarts: usize, seed: u64) -> Result<ProductMinResult> {
    let neg = m.scale(-1.0);
    let mut r = min_product_expectation(&neg, restarts, seed)?;
    r.value = -r.value;
    Ok(r)
}

/// Minimum of `F(e,f) = ⟨e,f|P_K(ρ)|e,f⟩ + ⟨e,f*|P_K(ρ^{T_B})|e,f*⟩`.
///
/// `F` vanishes exactly at product vectors `|e,f⟩ ∈ R(ρ)` with `|e,f*⟩ ∈ R(ρ^{T_B})`.
pub fn range_product_minimum(rho: &DensityMatrix, restarts: usize, seed: u64) -> Result<ProductMinResult> {
    let ppt = ppt_check(rho);
    if !ppt.is_ppt {
        return Err(Error::Precondition(format!(
            "range search needs a PPT state (min PT eigenvalue {:e})",
            ppt.min_pt_eigenvalue
        )));
    }
    let kernel = rho.spectral_split(tol::RANK_TOL).kernel_projector;
    let kernel_pt = rho.pt().spectral_split(tol::RANK_TOL).kernel_projector;
    range_form_minimum(&kernel, &kernel_pt, &SeeSawOptions::new(restarts, seed))
}

pub(crate) fn range_form_minimum(
    kernel: &HermitianOperator,
    kernel_pt: &HermitianOperator,
    opts: &SeeSawOptions,
) -> Result<ProductMinResult> {
    let form = ProductForm::with_conjugate(kernel, kernel_pt);
    minimize_form(&form, opts)
}

/// Out-of-range amplitude `(‖K₁†|e,f⟩‖² + ‖K₂†|e,f*⟩‖²)^{1/2}` from kernel bases.
///
/// Unlike the quadratic form with the kernel projectors, this resolves
/// amplitudes down to machine precision rather than its square root.
pub fn range_residual(kernel_basis: &CMatrix, kernel_pt_basis: &CMatrix, v: &ProductVector) -> f64 {
    let a = kernel_basis.adjoint() * v.tensor();
    let b = kernel_pt_basis.adjoint() * v.partial_conjugate().tensor();
    (a.norm_squared() + b.norm_squared()).sqrt()
}

/// Continues the range see-saw from `v` while [`range_residual`] keeps
/// shrinking, so a vector found at the resolution limit of the search ends up
/// inside both ranges to working precision.
pub fn refine_in_range(kernel_basis: &CMatrix, kernel_pt_basis: &CMatrix, v: &ProductVector) -> ProductVector {
    let dims = v.dims();
    let d = dims.total();
    let k1 = HermitianOperator::from_hermitian_part(dims, &(kernel_basis * kernel_basis.adjoint()));
    let k2 = HermitianOperator::from_hermitian_part(dims, &(kernel_pt_basis * kernel_pt_basis.adjoint()));
    debug_assert_eq!(k1.matrix().nrows(), d);
    let form = ProductForm::with_conjugate(&k1, &k2);
    let mut best = v.clone();
    let mut residual = range_residual(kernel_basis, kernel_pt_basis, &best);
    let mut f = v.f().clone();
    let mut stalled = 0;
    for _ in 0..POLISH_MAX_SWEEPS {
        if residual <= 1e-15 {
            break;
        }
        let (_, e) = linalg::min_eigvec(&form.matrix_for_e(&f));
        let (_, new_f) = linalg::min_eigvec(&form.matrix_for_f(&e));
        f = new_f;
        let cand = ProductVector::new(e, f.clone()).expect("eigenvectors are unit");
        let r = range_residual(kernel_basis, kernel_pt_basis, &cand);
        if r < residual {
            stalled = if r > 0.999 * residual { stalled + 1 } else { 0 };
            best = cand;
            residual = r;
        } else {
            stalled += 1;
        }
        if stalled >= 20 {
            break;
        }
    }
    best
}

/// A product vector `|e,f⟩ ∈ R(ρ)` with `|e,f*⟩ ∈ R(ρ^{T_B})`, if the search finds one.
pub fn range_product_search(rho: &DensityMatrix, restarts: usize, seed: u64) -> Result<Option<ProductVector>> {
    let min = range_product_minimum(rho, restarts, seed)?;
    Ok((min.value <= tol::ZERO_TOL).then_some(min.argmin))
}

/// Distinct product vectors on which a form vanishes.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ZeroSet {
    pub vectors: Vec<ProductVector>,
    pub span_dim: usize,
}

impl ZeroSet {
    pub fn from_vectors(vectors: Vec<ProductVector>) -> Self {
        let span_dim = span_dimension(&vectors);
        Self { vectors, span_dim }
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Tensor vectors as columns of a `d × n` matrix.
    pub fn tensor_matrix(&self, dims: BipartiteDims) -> CMatrix {
        let d = dims.total();
        let mut m = CMatrix::zeros(d, self.vectors.len());
        for (c, v) in self.vectors.iter().enumerate() {
            m.set_column(c, &v.tensor());
        }
        m
    }

    /// Orthonormal basis of the span of the tensor vectors.
    pub fn span_basis(&self, dims: BipartiteDims) -> CMatrix {
        linalg::orthonormal_span(&self.tensor_matrix(dims), tol::SPAN_TOL)
    }

    /// `{(e, f*)}`, the zero set of the partially transposed form.
    pub fn partial_conjugates(&self) -> Self {
        Self::from_vectors(self.vectors.iter().map(|v| v.partial_conjugate()).collect())
    }

    fn push_unique(&mut self, v: ProductVector) -> bool {
        let v = v.phase_fixed();
        if self
            .vectors
            .iter()
            .any(|u| u.overlap(&v) > 1.0 - tol::DEDUP_TOL)
        {
            return false;
        }
        self.vectors.push(v);
        true
    }
}

/// Rank of the Gram matrix of the tensor vectors at tolerance `1e-8`.
pub fn span_dimension(vectors: &[ProductVector]) -> usize {
    let Some(first) = vectors.first() else {
        return 0;
    };
    let d = first.dims().total();
    let mut frame = CMatrix::zeros(d, d);
    for v in vectors {
        let t = v.tensor();
        frame += &t * t.adjoint();
    }
    linalg::eigvalsh(&frame)
        .into_iter()
        .filter(|&x| x > tol::SPAN_TOL)
        .count()
}

/// Collects distinct product vectors `|e,f⟩` with `|⟨e,f|W|e,f⟩| ≤ 1e-9`.
pub fn collect_zero_set(w: &HermitianOperator, restarts: usize, seed: u64) -> Result<ZeroSet> {
    collect_zero_set_with(w, &SeeSawOptions::new(restarts, seed))
}

pub fn collect_zero_set_with(w: &HermitianOperator, opts: &SeeSawOptions) -> Result<ZeroSet> {
    opts.validate()?;
    let form = ProductForm::plain(w);
    let runs = multi_start(&form, opts);
    let polished: Vec<Run> = runs
        .into_par_iter()
        .map(|r| {
            if r.value <= POLISH_THRESHOLD {
                polish(&form, r)
            } else {
                r
            }
        })
        .collect();
    let min = polished.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    if min < -tol::ZERO_TOL {
        return Err(Error::NotAWitness(min));
    }
    let mut set = ZeroSet::default();
    for r in &polished {
        if r.value.abs() <= tol::ZERO_TOL {
            set.push_unique(r.product());
        }
    }
    set.span_dim = span_dimension(&set.vectors);
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::sample::haar_product;
    use num_complex::Complex64;

    fn dims(a: usize, b: usize) -> BipartiteDims {
        BipartiteDims::new(a, b).unwrap()
    }

    fn phi_plus_witness() -> HermitianOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]);
        let p = HermitianOperator::projector(dims(2, 2), &v).unwrap();
        &HermitianOperator::identity(dims(2, 2)).scale(0.5) - &p
    }

    #[test]
    fn identity_minimum_is_one() {
        let r = min_product_expectation(&HermitianOperator::identity(dims(2, 4)), 10, 1).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_restarts_rejected() {
        let id = HermitianOperator::identity(dims(2, 2));
        assert!(matches!(min_product_expectation(&id, 0, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn max_entangled_overlap_is_half() {
        let w = phi_plus_witness();
        let r = min_product_expectation(&w, 20, 3).unwrap();
        assert!(r.value.abs() < 1e-10, "{}", r.value);
        let t = r.argmin.tensor();
        let overlap = (t[0] + t[3]).norm_sqr() / 2.0;
        assert!((overlap - 0.5).abs() < 1e-8);
    }

    #[test]
    fn see_saw_is_monotone() {
        let mut rng = stream_rng(11, 0);
        let d = dims(2, 4);
        let g = CMatrix::from_fn(8, 8, |_, _| {
            Complex64::new(rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng), 0.3)
        });
        let m = HermitianOperator::from_hermitian_part(d, &g);
        let form = ProductForm::plain(&m);
        for s in 0..20 {
            let mut r2 = stream_rng(12, s);
            let run = see_saw(&form, haar_vector(2, &mut r2), 200, 0.0, true);
            for w in run.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{:?}", run.history);
            }
        }
    }

    #[test]
    fn minimum_dominates_lowest_eigenvalue_and_samples() {
        let d = dims(2, 3);
        let mut rng = stream_rng(5, 0);
        let g = CMatrix::from_fn(6, 6, |_, _| {
            Complex64::new(
                rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng),
                rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, &mut rng),
            )
        });
        let m = HermitianOperator::from_hermitian_part(d, &g);
        let r = min_product_expectation(&m, 50, 2).unwrap();
        assert!(r.value >= m.min_eigenvalue() - 1e-12);
        assert!((m.product_expectation(&r.argmin) - r.value).abs() < 1e-10);
        for _ in 0..10_000 {
            let p = haar_product(d, &mut rng);
            assert!(m.product_expectation(&p) >= r.value - 1e-8);
        }
    }

    #[test]
    fn diagonal_minimum_equals_lowest_eigenvalue() {
        let m = HermitianOperator::diagonal(dims(2, 2), &[0.3, -0.7, 1.2, 0.1]).unwrap();
        let r = min_product_expectation(&m, 10, 0).unwrap();
        assert!((r.value + 0.7).abs() < 1e-12);
    }

    #[test]
    fn sup_via_negation() {
        let m = HermitianOperator::diagonal(dims(2, 2), &[0.3, -0.7, 1.2, 0.1]).unwrap();
        let r = max_product_expectation(&m, 10, 0).unwrap();
        assert!((r.value - 1.2).abs() < 1e-12);
    }

    #[test]
    fn range_search_on_pure_product() {
        let d = dims(2, 4);
        let mut rng = stream_rng(9, 0);
        let v = haar_product(d, &mut rng);
        let rho = DensityMatrix::from_product(&v);
        let found = range_product_search(&rho, 20, 4).unwrap().expect("found");
        assert!(found.overlap(&v) > 1.0 - 1e-8);
    }

    #[test]
    fn range_search_on_full_rank_state() {
        let rho = DensityMatrix::maximally_mixed(dims(2, 2));
        assert!(range_product_search(&rho, 5, 0).unwrap().is_some());
    }

    #[test]
    fn range_search_rejects_npt() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]);
        let rho = DensityMatrix::pure(dims(2, 2), &v).unwrap();
        assert!(matches!(range_product_search(&rho, 5, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn span_dimension_fixtures() {
        let d = dims(2, 4);
        assert_eq!(span_dimension(&[]), 0);
        let basis: Vec<_> = (0..2)
            .flat_map(|a| (0..4).map(move |b| ProductVector::basis(d, a, b)))
            .collect();
        assert_eq!(span_dimension(&basis), 8);
        let v = ProductVector::basis(d, 1, 2);
        assert_eq!(span_dimension(&vec![v; 5]), 1);
    }

    #[test]
    fn zero_set_of_identity_is_empty() {
        let z = collect_zero_set(&HermitianOperator::identity(dims(2, 2)), 10, 0).unwrap();
        assert!(z.is_empty());
        assert_eq!(z.span_dim, 0);
    }

    #[test]
    fn zero_set_of_phi_plus_witness_spans() {
        let z = collect_zero_set(&phi_plus_witness(), 40, 0).unwrap();
        assert!(z.vectors.len() >= 16);
        assert_eq!(z.span_dim, 4);
    }

    #[test]
    fn zero_set_rejects_non_witness() {
        let m = HermitianOperator::diagonal(dims(2, 2), &[-1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(collect_zero_set(&m, 5, 0), Err(Error::NotAWitness(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let w = phi_plus_witness();
        let a = min_product_expectation(&w, 16, 42).unwrap();
        let b = min_product_expectation(&w, 16, 42).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.argmin, b.argmin);
    }
}
