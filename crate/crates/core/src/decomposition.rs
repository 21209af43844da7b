//! Splitting PPT states into a separable part and an edge remainder by
//! repeatedly subtracting admissible product projectors.
//!
//! A product vector `|e,f⟩` is admissible for `ρ` when `|e,f⟩ ∈ R(ρ)` and
//! `|e,f*⟩ ∈ R(ρ^{T_B})`. Subtracting `λ|e,f⟩⟨e,f|` with
//! `λ = min(1/⟨e,f|ρ⁺|e,f⟩, 1/⟨e,f*|(ρ^{T_B})⁺|e,f*⟩)` keeps the remainder PSD
//! and PPT while lowering the rank of `ρ`, of `ρ^{T_B}`, or both, so the loop
//! ends after at most `r(ρ) + r(ρ^{T_B})` steps.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{ppt_check, BipartiteDims, DensityMatrix, HermitianOperator, ProductVector, Subsystem};
use crate::product_search::{range_form_minimum, range_product_minimum, refine_in_range, SeeSawOptions};
use crate::sample::derive_seed;
use crate::tol;

/// Rejected subtractions tolerated per step before the remainder is declared edge.
pub const MAX_REJECTIONS: usize = 50;
/// Subtractions smaller than this are rejected.
const MIN_LAMBDA: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct SubtractionStep {
    pub vector: ProductVector,
    pub lambda: f64,
    /// `(r(ρ), r(ρ^{T_B}))` before the step.
    pub rank_before: (usize, usize),
    pub rank_after: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct Subtraction {
    pub lambda: f64,
    /// Unit-trace remainder; `None` when the state was the projector itself.
    pub next: Option<DensityMatrix>,
    pub step: SubtractionStep,
}

fn ranks(rho: &HermitianOperator) -> (usize, usize) {
    (
        rho.spectral_split(tol::RANK_TOL).rank,
        rho.pt().spectral_split(tol::RANK_TOL).rank,
    )
}

/// Clipping aims well inside the PSD floor so renormalizing the remainder
/// cannot push it back out.
const CLIP_FLOOR: f64 = 0.25 * tol::PSD_FLOOR;

fn admissible_remainder(rho: &HermitianOperator, proj: &HermitianOperator, lambda: f64) -> bool {
    let rest = (rho - &proj.scale(lambda)).scale(1.0 / (1.0 - lambda));
    rest.min_eigenvalue() >= -CLIP_FLOOR && rest.pt().min_eigenvalue() >= -CLIP_FLOOR
}

/// Removes the largest admissible multiple of `|e,f⟩⟨e,f|` from `ρ`.
pub fn subtract_product(rho: &DensityMatrix, v: &ProductVector) -> Result<Subtraction> {
    if v.dims() != rho.dims() {
        return Err(Error::DimensionMismatch {
            expected: rho.dims().to_string(),
            got: v.dims().to_string(),
        });
    }
    let ppt = ppt_check(rho);
    if !ppt.is_ppt {
        return Err(Error::Precondition(format!(
            "subtraction needs a PPT state (min PT eigenvalue {:e})",
            ppt.min_pt_eigenvalue
        )));
    }
    let rho_pt = rho.pt();
    let split = rho.spectral_split(tol::RANK_TOL);
    let split_pt = rho_pt.spectral_split(tol::RANK_TOL);
    let t = v.tensor();
    let tc = v.partial_conjugate().tensor();
    let out_of_range = split.kernel_projector.expectation(&t);
    let out_of_range_pt = split_pt.kernel_projector.expectation(&tc);
    if out_of_range > tol::ZERO_TOL || out_of_range_pt > tol::ZERO_TOL {
        return Err(Error::RangeCriterion(format!(
            "kernel weights {out_of_range:e} (ρ) and {out_of_range_pt:e} (ρ^T_B) exceed {:e}",
            tol::ZERO_TOL
        )));
    }

    let inv = rho.pseudo_inverse(tol::RANK_TOL).expectation(&t);
    let inv_pt = rho_pt.pseudo_inverse(tol::RANK_TOL).expectation(&tc);
    let mut lambda = (1.0 / inv).min(1.0 / inv_pt).min(1.0);
    let proj = HermitianOperator::projector(rho.dims(), &t)?;
    let rank_before = (split.rank, split_pt.rank);

    if 1.0 - lambda <= tol::TRACE_TOL {
        return Ok(Subtraction {
            lambda: 1.0,
            next: None,
            step: SubtractionStep {
                vector: v.clone(),
                lambda: 1.0,
                rank_before,
                rank_after: (0, 0),
            },
        });
    }

    if !admissible_remainder(rho, &proj, lambda) {
        // largest λ' ≤ λ keeping both remainders above the clipping floor
        let (mut lo, mut hi) = (0.0, lambda);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if admissible_remainder(rho, &proj, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lambda = lo;
    }
    if lambda < MIN_LAMBDA {
        return Err(Error::StepRejected(lambda));
    }

    let rest = rho.as_operator() - &proj.scale(lambda);
    let next = DensityMatrix::normalize(rest)?;
    let rank_after = ranks(&next);
    if rank_after.0 + rank_after.1 >= rank_before.0 + rank_before.1 {
        return Err(Error::StepRejected(lambda));
    }
    Ok(Subtraction {
        lambda,
        next: Some(next),
        step: SubtractionStep {
            vector: v.clone(),
            lambda,
            rank_before,
            rank_after,
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub vector: ProductVector,
}

/// `ρ = (1 − p)·Σ_k w_k |e_k,f_k⟩⟨e_k,f_k| + p·δ`.
#[derive(Clone, Debug, Serialize)]
pub struct EdgeDecomposition {
    pub p: f64,
    #[serde(rename = "components")]
    pub separable_part: Vec<Component>,
    #[serde(rename = "delta")]
    pub edge_part: Option<DensityMatrix>,
    pub steps: Vec<SubtractionStep>,
}

impl EdgeDecomposition {
    pub fn reconstruct(&self, dims: BipartiteDims) -> HermitianOperator {
        let d = dims.total();
        let mut m = CMatrix::zeros(d, d);
        for c in &self.separable_part {
            m += linalg::outer(&c.vector.tensor()).scale((1.0 - self.p) * c.weight);
        }
        if let Some(delta) = &self.edge_part {
            m += delta.matrix().scale(self.p);
        }
        HermitianOperator::from_hermitian_part(dims, &m)
    }

    /// True when the whole state was written as a mixture of product projectors.
    pub fn is_separable(&self) -> bool {
        self.edge_part.is_none()
    }
}

/// Greedy decomposition: subtract the best admissible product vector found by
/// the range search until none is left. `p` is not minimal in general.
pub fn decompose_edge(rho: &DensityMatrix, restarts: usize, seed: u64) -> Result<EdgeDecomposition> {
    let ppt = ppt_check(rho);
    if !ppt.is_ppt {
        return Err(Error::Precondition(format!(
            "decomposition needs a PPT state (min PT eigenvalue {:e})",
            ppt.min_pt_eigenvalue
        )));
    }
    let (r0, r0_pt) = ranks(rho);
    let max_steps = r0 + r0_pt;

    let mut current = rho.clone();
    let mut remaining = 1.0;
    let mut absolute: Vec<(f64, ProductVector)> = Vec::new();
    let mut steps = Vec::new();
    let mut consumed = false;

    'outer: while steps.len() < max_steps {
        let mut rejections = 0;
        let sub = loop {
            let attempt_seed = derive_seed(seed, (steps.len() * (MAX_REJECTIONS + 1) + rejections) as u64);
            let min = range_product_minimum(&current, restarts, attempt_seed)?;
            if min.value > tol::ZERO_TOL {
                break 'outer;
            }
            let k1 = current.spectral_split(tol::RANK_TOL);
            let k2 = current.pt().spectral_split(tol::RANK_TOL);
            let v = refine_in_range(k1.kernel_basis(), k2.kernel_basis(), &min.argmin);
            match subtract_product(&current, &v) {
                Ok(s) => break s,
                Err(Error::StepRejected(_)) | Err(Error::RangeCriterion(_)) => {
                    rejections += 1;
                    if rejections >= MAX_REJECTIONS {
                        break 'outer;
                    }
                }
                Err(e) => return Err(e),
            }
        };
        match sub.next {
            Some(next) => {
                absolute.push((remaining * sub.lambda, sub.step.vector.clone()));
                remaining *= 1.0 - sub.lambda;
                steps.push(sub.step);
                current = next;
            }
            None => {
                absolute.push((remaining, sub.step.vector.clone()));
                remaining = 0.0;
                steps.push(sub.step);
                consumed = true;
                break;
            }
        }
    }

    let p = if consumed { 0.0 } else { remaining };
    let sep_total: f64 = absolute.iter().map(|(w, _)| w).sum();
    let separable_part = absolute
        .into_iter()
        .map(|(w, vector)| Component {
            weight: if sep_total > 0.0 { w / sep_total } else { 0.0 },
            vector,
        })
        .collect();
    Ok(EdgeDecomposition {
        p,
        separable_part,
        edge_part: (!consumed).then_some(current),
        steps,
    })
}

/// No admissible product vector exists (by multi-start search) and the state
/// is entangled. In 2×2 and 2×3 every PPT state is separable, so the answer
/// there is always `false`.
pub fn is_edge(delta: &DensityMatrix, restarts: usize, seed: u64) -> Result<bool> {
    let min = range_product_minimum(delta, restarts, seed)?;
    if delta.dims().ppt_is_sufficient() {
        return Ok(false);
    }
    Ok(min.value > tol::ZERO_TOL)
}

/// Two subspaces of `H_A ⊗ H_B` given by orthonormal columns.
#[derive(Clone, Debug)]
pub struct SubspacePair {
    h_a: CMatrix,
    h_b: CMatrix,
}

impl SubspacePair {
    pub fn new(h_a: CMatrix, h_b: CMatrix) -> Result<Self> {
        for basis in [&h_a, &h_b] {
            let k = basis.ncols();
            let gram = basis.adjoint() * basis;
            if linalg::frobenius(&(gram - CMatrix::identity(k, k))) > 1e-10 {
                return Err(Error::Parameter("subspace basis is not orthonormal".into()));
            }
        }
        if h_a.nrows() != h_b.nrows() {
            return Err(Error::DimensionMismatch {
                expected: h_a.nrows().to_string(),
                got: h_b.nrows().to_string(),
            });
        }
        Ok(Self { h_a, h_b })
    }

    /// `(R(δ), R(δ^{T_B}))`.
    pub fn ranges_of(delta: &DensityMatrix) -> Self {
        Self {
            h_a: delta.spectral_split(tol::RANK_TOL).range_basis().clone(),
            h_b: delta.pt().spectral_split(tol::RANK_TOL).range_basis().clone(),
        }
    }

    pub fn h_a(&self) -> &CMatrix {
        &self.h_a
    }

    pub fn h_b(&self) -> &CMatrix {
        &self.h_b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubspaceConditions {
    /// No `|e,f⟩ ∈ H^a` with `|e,f*⟩ ∈ H^b`.
    pub cond_i: bool,
    /// Matching ranges of the reduced projectors (conjugated on the `B` side for `H^b`).
    pub cond_ii: bool,
    /// `dim H^x` exceeds both reduced ranks, for `x = a, b`.
    pub cond_iii: bool,
}

fn reduced_range(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = linalg::eigh(m);
    let scale = vals.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let n = vals.len();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        if vals[k].abs() > tol::RANK_TOL * scale {
            let v = vecs.column(k);
            out += v * v.adjoint();
        }
    }
    out
}

fn reduced_rank(m: &CMatrix) -> usize {
    reduced_range(m).diagonal().iter().map(|z| z.re).sum::<f64>().round() as usize
}

pub fn validate_subspace_pair(
    pair: &SubspacePair,
    dims: BipartiteDims,
    restarts: usize,
    seed: u64,
) -> Result<SubspaceConditions> {
    if pair.h_a.nrows() != dims.total() {
        return Err(Error::DimensionMismatch {
            expected: dims.total().to_string(),
            got: pair.h_a.nrows().to_string(),
        });
    }
    let p_a = HermitianOperator::subspace_projector(dims, &pair.h_a)?;
    let p_b = HermitianOperator::subspace_projector(dims, &pair.h_b)?;
    let id = HermitianOperator::identity(dims);
    let comp_a = &id - &p_a;
    let comp_b = &id - &p_b;
    let min = range_form_minimum(&comp_a, &comp_b, &SeeSawOptions::new(restarts, seed))?;
    let cond_i = min.value > tol::ZERO_TOL;

    let same = |x: &CMatrix, y: &CMatrix| linalg::frobenius(&(reduced_range(x) - reduced_range(y))) <= 1e-8;
    let a_b = p_a.partial_trace(Subsystem::B);
    let b_b = p_b.partial_trace(Subsystem::B);
    let a_a = p_a.partial_trace(Subsystem::A);
    let b_a = p_b.partial_trace(Subsystem::A).map(|z| z.conj());
    let cond_ii = same(&a_b, &b_b) && same(&a_a, &b_a);

    let exceeds = |p: &HermitianOperator, dim: usize| {
        let ra = reduced_rank(&p.partial_trace(Subsystem::A));
        let rb = reduced_rank(&p.partial_trace(Subsystem::B));
        dim > ra.max(rb)
    };
    let cond_iii = exceeds(&p_a, pair.h_a.ncols()) && exceeds(&p_b, pair.h_b.ncols());

    Ok(SubspaceConditions {
        cond_i,
        cond_ii,
        cond_iii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::rho_b;
    use crate::sample::{haar_product, stream_rng};

    fn dims(a: usize, b: usize) -> BipartiteDims {
        BipartiteDims::new(a, b).unwrap()
    }

    #[test]
    fn single_product_admixture_is_split_off() {
        // 0.9·ρ_b(0.5) + 0.1·|e,f⟩⟨e,f|: the search lands at the resolution
        // limit of the kernel form, and refinement has to finish the job
        let edge = rho_b(0.5).unwrap();
        let mut rng = stream_rng(0, 77);
        let sep = crate::sample::separable_mixture(edge.dims(), 1, &mut rng);
        let mix = &edge.as_operator().scale(0.9) + &sep.as_operator().scale(0.1);
        let rho = DensityMatrix::normalize(mix).unwrap();

        let k1 = rho.spectral_split(tol::RANK_TOL);
        let k2 = rho.pt().spectral_split(tol::RANK_TOL);
        let found = range_product_minimum(&rho, 200, 0).unwrap().argmin;
        let refined = refine_in_range(k1.kernel_basis(), k2.kernel_basis(), &found);
        let before = crate::product_search::range_residual(k1.kernel_basis(), k2.kernel_basis(), &found);
        let after = crate::product_search::range_residual(k1.kernel_basis(), k2.kernel_basis(), &refined);
        assert!(after <= before && after <= 1e-12, "{before:e} -> {after:e}");

        let dec = decompose_edge(&rho, 200, 0).unwrap();
        assert!(!dec.steps.is_empty());
        assert!(dec.p < 0.9 + 1e-9);
        assert!(dec.reconstruct(rho.dims()).distance(&rho) <= 1e-12);
        assert!(is_edge(dec.edge_part.as_ref().unwrap(), 200, 1).unwrap());
    }

    #[test]
    fn subtract_from_maximally_mixed() {
        let rho = DensityMatrix::maximally_mixed(dims(2, 2));
        let s = subtract_product(&rho, &ProductVector::basis(dims(2, 2), 0, 0)).unwrap();
        assert!((s.lambda - 0.25).abs() < 1e-12);
        let expected = HermitianOperator::diagonal(dims(2, 2), &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!(s.next.unwrap().distance(&expected) < 1e-12);
        assert_eq!(s.step.rank_before, (4, 4));
        assert_eq!(s.step.rank_after, (3, 3));
    }

    #[test]
    fn subtract_from_classical_mixture() {
        let d = dims(2, 2);
        let op = HermitianOperator::diagonal(d, &[0.5, 0.0, 0.0, 0.5]).unwrap();
        let rho = DensityMatrix::new(op).unwrap();
        let s = subtract_product(&rho, &ProductVector::basis(d, 0, 0)).unwrap();
        assert!((s.lambda - 0.5).abs() < 1e-12);
        let expected = HermitianOperator::diagonal(d, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(s.next.unwrap().distance(&expected) < 1e-12);
    }

    #[test]
    fn subtracting_the_state_itself_consumes_it() {
        let v = ProductVector::basis(dims(2, 3), 1, 2);
        let s = subtract_product(&DensityMatrix::from_product(&v), &v).unwrap();
        assert!(s.next.is_none());
        assert_eq!(s.lambda, 1.0);
    }

    #[test]
    fn subtraction_out_of_range_is_rejected() {
        let rho = rho_b(0.5).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let v = haar_product(rho.dims(), &mut rng);
            assert!(matches!(subtract_product(&rho, &v), Err(Error::RangeCriterion(_))));
        }
    }

    #[test]
    fn pure_product_decomposes_trivially() {
        let mut rng = stream_rng(4, 0);
        let v = haar_product(dims(2, 4), &mut rng);
        let dec = decompose_edge(&DensityMatrix::from_product(&v), 20, 0).unwrap();
        assert_eq!(dec.p, 0.0);
        assert_eq!(dec.separable_part.len(), 1);
        assert!((dec.separable_part[0].weight - 1.0).abs() < 1e-12);
        assert!(dec.separable_part[0].vector.overlap(&v) > 1.0 - 1e-8);
    }

    #[test]
    fn maximally_mixed_qubits_are_separable() {
        let rho = DensityMatrix::maximally_mixed(dims(2, 2));
        let dec = decompose_edge(&rho, 50, 3).unwrap();
        assert_eq!(dec.p, 0.0);
        assert!(dec.edge_part.is_none());
        assert!(dec.reconstruct(rho.dims()).distance(&rho) < 1e-8);
        assert!(dec.steps.len() <= 8);
        let total: f64 = dec.separable_part.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn family_member_is_its_own_edge() {
        let rho = rho_b(0.5).unwrap();
        let dec = decompose_edge(&rho, 200, 0).unwrap();
        assert_eq!(dec.p, 1.0);
        assert!(dec.steps.is_empty());
        assert!(dec.edge_part.unwrap().distance(&rho) < 1e-15);
    }

    #[test]
    fn edge_checks() {
        assert!(is_edge(&rho_b(0.5).unwrap(), 200, 0).unwrap());
        assert!(!is_edge(&rho_b(0.0).unwrap(), 200, 0).unwrap());
        assert!(!is_edge(&rho_b(1.0).unwrap(), 200, 0).unwrap());
        assert!(!is_edge(&DensityMatrix::maximally_mixed(dims(2, 4)), 20, 0).unwrap());
        assert!(!is_edge(&DensityMatrix::maximally_mixed(dims(3, 3)), 20, 0).unwrap());
    }

    #[test]
    fn full_space_pair_fails_first_condition() {
        let d = dims(2, 4);
        let id = CMatrix::identity(8, 8);
        let pair = SubspacePair::new(id.clone(), id).unwrap();
        let c = validate_subspace_pair(&pair, d, 20, 0).unwrap();
        assert!(!c.cond_i);
        // reduced ranks are full: 8 > max(4, 2)
        assert!(c.cond_ii && c.cond_iii);
    }

    #[test]
    fn family_ranges_form_a_strange_pair() {
        // reduced ranks from numpy: Tr_A → 4, Tr_B → 2 for both subspaces of dim 5
        let rho = rho_b(0.5).unwrap();
        let pair = SubspacePair::ranges_of(&rho);
        assert_eq!(pair.h_a().ncols(), 5);
        let c = validate_subspace_pair(&pair, rho.dims(), 200, 1).unwrap();
        assert_eq!(
            c,
            SubspaceConditions {
                cond_i: true,
                cond_ii: true,
                cond_iii: true
            }
        );
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let m = CMatrix::from_element(8, 2, linalg::ONE);
        assert!(SubspacePair::new(m.clone(), m).is_err());
    }
}
