//! Nondecomposable entanglement witnesses for edge states.
//!
//! For an edge state `δ`, `W = P + Q^{T_B} − (ε/c)·C` with `P`, `Q` the
//! kernel projectors of `δ` and `δ^{T_B}`, `ε` the minimum of `P + Q^{T_B}` over
//! product vectors and `c` the maximum of `C`, is nonnegative on every product
//! vector while `Tr(Wδ) < 0`. Witnesses are then sharpened by subtracting
//! decomposable operators `D = P' + Q'^{T_B}` that vanish on the current zero
//! set `p_W`, as long as the result stays nonnegative on products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::operator::{ppt_check, BipartiteDims, DensityMatrix, HermitianOperator};
use crate::product_search::{
    collect_zero_set, max_product_expectation, min_product_expectation, ZeroSet, DEFAULT_RESTARTS,
};
use crate::sample::{derive_seed, haar_product, haar_vector, stream_rng};
use crate::tol;

pub const DEFAULT_SAFETY: f64 = 0.9;
/// Random product vectors drawn when verifying that an operator is a witness.
pub const VERIFY_SAMPLES: usize = 100_000;
/// Halvings of a subtracted amount before giving up on it.
pub const MAX_HALVINGS: usize = 5;
/// Random rank-one candidates added to the complement projectors in each round.
pub const RANDOM_CANDIDATES: usize = 20;
/// Subtraction amounts at or below this count as zero.
pub const LAMBDA_FLOOR: f64 = 1e-8;
const RATIO_MAX_SWEEPS: usize = 200;

/// `Tr(W·ρ)`; negative values witness entanglement.
pub fn detects(w: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    w.trace_product(rho.as_operator())
}

fn check_safety(safety: f64) -> Result<()> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(Error::Parameter(format!("safety {safety} outside (0, 1]")));
    }
    Ok(())
}

/// Smallest `⟨e,f|W|e,f⟩` over `samples` Haar-random product vectors.
pub fn sampled_product_minimum(w: &HermitianOperator, samples: usize, seed: u64) -> f64 {
    let dims = w.dims();
    let chunks = 64usize;
    let per = samples.div_ceil(chunks);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let n = per.min(samples.saturating_sub(c * per));
            (0..n)
                .map(|_| w.product_expectation(&haar_product(dims, &mut rng)))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Multi-start minimum and random sampling both stay above `-1e-9`.
fn passes_witness_check(w: &HermitianOperator, restarts: usize, samples: usize, seed: u64) -> Result<bool> {
    let m = min_product_expectation(w, restarts, derive_seed(seed, 0))?.value;
    if m < -tol::ZERO_TOL {
        return Ok(false);
    }
    Ok(samples == 0 || sampled_product_minimum(w, samples, derive_seed(seed, 1)) >= -tol::ZERO_TOL)
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessConstruction {
    pub p: HermitianOperator,
    pub q: HermitianOperator,
    pub c_operator: HermitianOperator,
    /// Estimated minimum of `P + Q^{T_B}` over product vectors.
    pub epsilon: f64,
    /// Amount actually used, `safety·epsilon` (possibly halved after verification).
    pub epsilon_used: f64,
    /// Estimated maximum of `C` over product vectors.
    pub c: f64,
    pub w: HermitianOperator,
}

impl WitnessConstruction {
    /// `P + Q^{T_B}`.
    pub fn decomposable_part(&self) -> HermitianOperator {
        &self.p + &self.q.pt()
    }
}

/// Witness detecting the edge state `delta`, built from its kernel projectors.
pub fn construct_edge_witness(
    delta: &DensityMatrix,
    c_operator: &HermitianOperator,
    safety: f64,
    restarts: usize,
    seed: u64,
) -> Result<WitnessConstruction> {
    check_safety(safety)?;
    if c_operator.dims() != delta.dims() {
        return Err(Error::DimensionMismatch {
            expected: delta.dims().to_string(),
            got: c_operator.dims().to_string(),
        });
    }
    if !crate::decomposition::is_edge(delta, restarts, derive_seed(seed, 10))? {
        return Err(Error::Precondition("state is not an edge state".into()));
    }
    if c_operator.min_eigenvalue() < -tol::PSD_FLOOR {
        return Err(Error::Precondition("C must be positive semidefinite".into()));
    }
    let overlap = detects(c_operator, delta)?;
    if !(overlap > 0.0) {
        return Err(Error::Precondition(format!("Tr(δC) = {overlap:e} must be positive")));
    }

    let p = delta.spectral_split(tol::RANK_TOL).kernel_projector;
    let q = delta.pt().spectral_split(tol::RANK_TOL).kernel_projector;
    let w_delta = &p + &q.pt();
    let epsilon = min_product_expectation(&w_delta, restarts, derive_seed(seed, 11))?.value;
    if epsilon <= 1e-8 {
        return Err(Error::DegenerateEdge(epsilon));
    }
    let c = if *c_operator == HermitianOperator::identity(delta.dims()) {
        1.0
    } else {
        max_product_expectation(c_operator, restarts, derive_seed(seed, 12))?.value
    };

    let mut epsilon_used = safety * epsilon;
    let mut w = &w_delta - &c_operator.scale(epsilon_used / c);
    for _ in 0..MAX_HALVINGS {
        if sampled_product_minimum(&w, VERIFY_SAMPLES, derive_seed(seed, 13)) >= -tol::ZERO_TOL {
            break;
        }
        epsilon_used *= 0.5;
        w = &w_delta - &c_operator.scale(epsilon_used / c);
    }
    Ok(WitnessConstruction {
        p,
        q,
        c_operator: c_operator.clone(),
        epsilon,
        epsilon_used,
        c,
        w,
    })
}

/// `W − safety·ε·1` with `ε` the product minimum of `W`; unchanged when `ε ≤ 0`.
pub fn shift_to_tangent(w: &HermitianOperator, safety: f64, restarts: usize, seed: u64) -> Result<HermitianOperator> {
    check_safety(safety)?;
    let m = min_product_expectation(w, restarts, seed)?.value;
    if m < -tol::ZERO_TOL {
        return Err(Error::NotAWitness(m));
    }
    if m <= tol::ZERO_TOL {
        return Ok(w.clone());
    }
    Ok(w - &HermitianOperator::identity(w.dims()).scale(safety * m))
}

/// `D = P + Q^{T_B}` with `P, Q ⪰ 0`.
#[derive(Clone, Debug, Serialize)]
pub struct DecomposableOperator {
    pub p: HermitianOperator,
    pub q: HermitianOperator,
    #[serde(skip)]
    combined: HermitianOperator,
}

impl DecomposableOperator {
    pub fn new(p: HermitianOperator, q: HermitianOperator) -> Result<Self> {
        if p.dims() != q.dims() {
            return Err(Error::DimensionMismatch {
                expected: p.dims().to_string(),
                got: q.dims().to_string(),
            });
        }
        for (name, m) in [("P", &p), ("Q", &q)] {
            let min = m.min_eigenvalue();
            if min < -tol::PSD_FLOOR {
                return Err(Error::Parameter(format!(
                    "{name} is not positive semidefinite (min eigenvalue {min:e})"
                )));
            }
        }
        let combined = &p + &q.pt();
        Ok(Self { p, q, combined })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.combined
    }
}

/// `sup {t : A − tB ⪰ 0}` for `A, B ⪰ 0` and a minimizing direction of `f†Af / f†Bf`.
///
/// Directions in the kernel of `A` on which `B` is nonzero force `0`; if `B`
/// vanishes wherever `A` does, only the range of `A` matters.
fn pencil_min(a: &CMatrix, b: &CMatrix) -> (f64, CVector) {
    let (alpha, u) = linalg::eigh(a);
    let n = alpha.len();
    let a_scale = alpha.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let b_scale = linalg::eigvalsh(b).iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let thr = 1e-12 * a_scale;
    let (range, kernel): (Vec<usize>, Vec<usize>) = (0..n).partition(|&k| alpha[k] > thr);
    if !kernel.is_empty() {
        let mut k = CMatrix::zeros(n, kernel.len());
        for (c, &i) in kernel.iter().enumerate() {
            k.set_column(c, &u.column(i));
        }
        let (top, g) = linalg::max_eigvec(&(k.adjoint() * b * &k));
        if top > 1e-12 * b_scale {
            return (0.0, &k * g);
        }
    }
    if range.is_empty() {
        return (f64::INFINITY, u.column(0).into_owned());
    }
    let mut s = CMatrix::zeros(n, range.len());
    for (c, &i) in range.iter().enumerate() {
        s.set_column(c, &u.column(i).scale(1.0 / alpha[i].sqrt()));
    }
    let (mu, g) = linalg::max_eigvec(&(s.adjoint() * b * &s));
    if !(mu > 1e-300) {
        return (f64::INFINITY, u.column(range[0]).into_owned());
    }
    let f = &s * g;
    let norm = f.norm();
    (1.0 / mu, f.unscale(norm))
}

/// One alternating descent of `⟨e,f|W|e,f⟩ / ⟨e,f|D|e,f⟩` from `e0`.
fn ratio_see_saw(w: &HermitianOperator, d: &HermitianOperator, e0: CVector) -> f64 {
    let mut e = e0;
    let (mut value, mut f) = pencil_min(&w.contract_a(&e), &d.contract_a(&e));
    for _ in 0..RATIO_MAX_SWEEPS {
        let (_, new_e) = pencil_min(&w.contract_b(&f), &d.contract_b(&f));
        e = new_e;
        let (v, new_f) = pencil_min(&w.contract_a(&e), &d.contract_a(&e));
        f = new_f;
        let prev = value;
        value = v;
        if value == 0.0 || (prev.is_finite() && (prev - value).abs() <= 1e-13 * value.abs().max(1e-300)) {
            break;
        }
    }
    value
}

/// Multi-start estimate of `inf_e [D_e^{-1/2} W_e D_e^{-1/2}]_min`, the largest
/// `λ` with `W − λD` nonnegative on products. No safety factor applied.
pub fn lambda0_estimate(w: &HermitianOperator, d: &DecomposableOperator, restarts: usize, seed: u64) -> Result<f64> {
    if restarts < 1 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    if w.dims() != d.operator().dims() {
        return Err(Error::DimensionMismatch {
            expected: w.dims().to_string(),
            got: d.operator().dims().to_string(),
        });
    }
    let d_a = w.dims().d_a;
    let values: Vec<f64> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            ratio_see_saw(w, d.operator(), haar_vector(d_a, &mut rng))
        })
        .collect();
    let best = values.into_iter().fold(f64::INFINITY, f64::min);
    if best.is_infinite() {
        return Err(Error::Parameter("D vanishes on every product vector".into()));
    }
    Ok(best.max(0.0))
}

/// `max(0, safety·λ₀)` for the subtraction `W − λ₀·D`.
pub fn compute_lambda0(
    w: &HermitianOperator,
    d: &DecomposableOperator,
    safety: f64,
    restarts: usize,
    seed: u64,
) -> Result<f64> {
    check_safety(safety)?;
    Ok((safety * lambda0_estimate(w, d, restarts, seed)?).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimalityCertificate {
    /// Both zero sets span the whole space.
    OptimalBySpan,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizationStep {
    pub d: DecomposableOperator,
    /// Estimated `λ₀` for `d`.
    pub lambda0: f64,
    /// Amount actually subtracted after verification.
    pub lambda_used: f64,
    pub span_pw: usize,
    pub span_pwt: usize,
    pub candidate: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    /// Final witness, unit Frobenius norm.
    pub witness: HermitianOperator,
    /// Final witness before normalization.
    #[serde(skip)]
    pub witness_raw: HermitianOperator,
    pub zero_set: ZeroSet,
    pub zero_set_pt: ZeroSet,
    pub optimal_certificate: OptimalityCertificate,
    pub nd_certificate: Option<DensityMatrix>,
    pub symmetric: bool,
    pub steps: Vec<OptimizationStep>,
}

impl WitnessReport {
    pub fn span_pw(&self) -> usize {
        self.zero_set.span_dim
    }

    pub fn span_pwt(&self) -> usize {
        self.zero_set_pt.span_dim
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOptions {
    /// Defaults to `2·d_A·d_B`.
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub random_candidates: usize,
    pub verify_samples: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 16,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            random_candidates: RANDOM_CANDIDATES,
            verify_samples: VERIFY_SAMPLES,
        }
    }
}

/// Zero set of `W` plus the partial conjugates, which form the zero set of `W^{T_B}`.
fn zero_sets(w: &HermitianOperator, previous: &ZeroSet, restarts: usize, seed: u64) -> Result<(ZeroSet, ZeroSet)> {
    let found = collect_zero_set(w, restarts, seed)?;
    let mut vectors: Vec<_> = previous
        .vectors
        .iter()
        .filter(|v| w.product_expectation(v).abs() <= tol::ZERO_TOL)
        .cloned()
        .collect();
    for v in found.vectors {
        if !vectors.iter().any(|u| u.overlap(&v) > 1.0 - tol::DEDUP_TOL) {
            vectors.push(v);
        }
    }
    let zs = ZeroSet::from_vectors(vectors);
    let pt = ZeroSet::from_vectors(zs.partial_conjugates().vectors);
    Ok((zs, pt))
}

fn complement_projector(dims: BipartiteDims, basis: &CMatrix) -> (HermitianOperator, CMatrix) {
    let comp = linalg::orthogonal_complement(basis);
    (
        HermitianOperator::from_hermitian_part(dims, &(&comp * comp.adjoint())),
        comp,
    )
}

fn random_in(comp: &CMatrix, rng: &mut rand_chacha::ChaCha8Rng) -> CVector {
    let g = haar_vector(comp.ncols(), rng);
    comp * g
}

/// Step (I) candidates: complement projectors of the zero-set spans plus random
/// rank-one operators from the same complements.
fn candidates(
    dims: BipartiteDims,
    zs: &ZeroSet,
    zs_pt: &ZeroSet,
    symmetric: bool,
    random: usize,
    seed: u64,
) -> Result<Vec<(String, DecomposableOperator)>> {
    let zero = HermitianOperator::zeros(dims);
    let mut out = Vec::new();
    let mut rng = stream_rng(seed, 0);
    if symmetric {
        let mut both = zs.tensor_matrix(dims);
        let pt = zs_pt.tensor_matrix(dims);
        both = CMatrix::from_columns(
            &both
                .column_iter()
                .chain(pt.column_iter())
                .map(|c| c.into_owned())
                .collect::<Vec<_>>(),
        );
        let basis = if both.ncols() == 0 {
            CMatrix::zeros(dims.total(), 0)
        } else {
            linalg::orthonormal_span(&both, tol::SPAN_TOL)
        };
        let (r, comp) = complement_projector(dims, &basis);
        if comp.ncols() == 0 {
            return Ok(out);
        }
        out.push(("complement-symmetric".to_string(), DecomposableOperator::new(r.clone(), r)?));
        for k in 0..random {
            let x = random_in(&comp, &mut rng);
            let px = HermitianOperator::projector(dims, &x)?;
            out.push((format!("random-symmetric-{k}"), DecomposableOperator::new(px.clone(), px)?));
        }
        return Ok(out);
    }

    let (p, comp_p) = complement_projector(dims, &zs.span_basis(dims));
    let (q, comp_q) = complement_projector(dims, &zs_pt.span_basis(dims));
    let has_p = comp_p.ncols() > 0;
    let has_q = comp_q.ncols() > 0;
    if has_p && has_q {
        out.push(("complement-both".to_string(), DecomposableOperator::new(p.clone(), q.clone())?));
    }
    if has_p {
        out.push(("complement-p".to_string(), DecomposableOperator::new(p, zero.clone())?));
    }
    if has_q {
        out.push(("complement-q".to_string(), DecomposableOperator::new(zero.clone(), q)?));
    }
    for k in 0..random {
        let pp = if has_p {
            HermitianOperator::projector(dims, &random_in(&comp_p, &mut rng))?
        } else {
            zero.clone()
        };
        let qq = if has_q {
            HermitianOperator::projector(dims, &random_in(&comp_q, &mut rng))?
        } else {
            zero.clone()
        };
        if has_p || has_q {
            out.push((format!("random-{k}"), DecomposableOperator::new(pp, qq)?));
        }
    }
    Ok(out)
}

/// Finite-step sharpening: repeatedly subtract `λ₀·D` for admissible
/// decomposable `D` until both zero sets span the space or no candidate
/// enlarges them.
pub fn optimize_witness(w: &HermitianOperator, opts: &OptimizeOptions) -> Result<WitnessReport> {
    let dims = w.dims();
    let full = dims.total();
    let m = min_product_expectation(w, opts.restarts, derive_seed(opts.seed, 100))?.value;
    if m < -tol::ZERO_TOL {
        return Err(Error::NotAWitness(m));
    }
    let symmetric = w.distance(&w.pt()) <= 1e-9;
    let mut current = w.clone();
    let (mut zs, mut zs_pt) = zero_sets(&current, &ZeroSet::default(), opts.restarts, derive_seed(opts.seed, 101))?;
    let mut steps = Vec::new();
    let mut certificate = OptimalityCertificate::Unknown;

    for it in 0..opts.max_iters {
        let done = if symmetric {
            zs.span_dim == full
        } else {
            zs.span_dim == full && zs_pt.span_dim == full
        };
        if done {
            certificate = OptimalityCertificate::OptimalBySpan;
            break;
        }
        let it_seed = derive_seed(opts.seed, 1000 + it as u64);
        let pool = candidates(dims, &zs, &zs_pt, symmetric, opts.random_candidates, derive_seed(it_seed, 0))?;
        let mut scored: Vec<(usize, f64, f64)> = pool
            .par_iter()
            .enumerate()
            .map(|(k, (_, d))| {
                let lam = lambda0_estimate(&current, d, opts.restarts, derive_seed(it_seed, 1 + k as u64))
                    .unwrap_or(0.0);
                (k, lam, lam * d.operator().frobenius_norm())
            })
            .collect();
        scored.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

        let before = zs.span_dim + zs_pt.span_dim;
        let mut accepted = false;
        for (k, lam, _) in scored {
            if !(lam > LAMBDA_FLOOR) {
                break;
            }
            let (label, d) = &pool[k];
            let verify_seed = derive_seed(it_seed, 500 + k as u64);
            let mut used = lam;
            let mut next = None;
            for _ in 0..=MAX_HALVINGS {
                let cand = &current - &d.operator().scale(used);
                if passes_witness_check(&cand, opts.restarts, opts.verify_samples, verify_seed)? {
                    next = Some(cand);
                    break;
                }
                used *= 0.5;
            }
            let Some(next) = next else { continue };
            // subtracting the whole witness (or more) leaves nothing that detects entanglement
            if next.min_eigenvalue() >= -tol::PSD_FLOOR {
                continue;
            }
            let Ok((nzs, nzs_pt)) = zero_sets(&next, &zs, opts.restarts, derive_seed(verify_seed, 7)) else {
                continue;
            };
            if nzs.span_dim + nzs_pt.span_dim > before {
                steps.push(OptimizationStep {
                    d: d.clone(),
                    lambda0: lam,
                    lambda_used: used,
                    span_pw: nzs.span_dim,
                    span_pwt: nzs_pt.span_dim,
                    candidate: label.clone(),
                });
                current = next;
                zs = nzs;
                zs_pt = nzs_pt;
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    if certificate == OptimalityCertificate::Unknown {
        let done = zs.span_dim == full && (symmetric || zs_pt.span_dim == full);
        if done {
            certificate = OptimalityCertificate::OptimalBySpan;
        }
    }
    Ok(WitnessReport {
        witness: current.normalized_frobenius(),
        witness_raw: current,
        zero_set: zs,
        zero_set_pt: zs_pt,
        optimal_certificate: certificate,
        nd_certificate: None,
        symmetric,
        steps,
    })
}

/// Admissible candidates for the current zero sets of a report (used to check
/// that an optimal witness leaves nothing to subtract).
pub fn admissible_candidates(report: &WitnessReport, random: usize, seed: u64) -> Result<Vec<DecomposableOperator>> {
    let dims = report.witness.dims();
    Ok(candidates(dims, &report.zero_set, &report.zero_set_pt, report.symmetric, random, seed)?
        .into_iter()
        .map(|(_, d)| d)
        .collect())
}

/// Outcome of matching `W + λ*·1 = P + Q^{T_B}` with `R(P) ⊆ K(δ)`, `R(Q) ⊆ K(δ^{T_B})`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CanonicalForm {
    pub holds: bool,
    /// The shift `λ*` (the `ε` of the canonical form).
    pub shift: f64,
    pub residual: f64,
    pub p_min_eigenvalue: f64,
    pub q_min_eigenvalue: f64,
}

/// Hermitian basis of `k×k` matrices mapped through `K · H · K†`.
fn embedded_hermitian_basis(k: &CMatrix) -> Vec<CMatrix> {
    let r = k.ncols();
    let mut out = Vec::new();
    let unit = |i: usize, j: usize, z: num_complex::Complex64| {
        let mut h = CMatrix::zeros(r, r);
        h[(i, j)] = z;
        h[(j, i)] = z.conj();
        h
    };
    for i in 0..r {
        out.push(k * unit(i, i, linalg::ONE) * k.adjoint());
        for j in (i + 1)..r {
            out.push(k * unit(i, j, linalg::ONE) * k.adjoint());
            out.push(k * unit(i, j, num_complex::Complex64::new(0.0, 1.0)) * k.adjoint());
        }
    }
    out
}

/// Least-squares fit of `W = P + Q^{T_B} − λ*·1` over Hermitian `P`, `Q` supported
/// on the kernels of `δ` and `δ^{T_B}`; holds when the residual is below `1e-8`,
/// `λ* ≥ 0` and both fitted parts are PSD. The residual is affine in `λ*`, so the
/// shift comes out of the same solve. Mismatched dimensions give `holds = false`.
pub fn canonical_form_check(w: &HermitianOperator, delta: &DensityMatrix) -> CanonicalForm {
    let fail = CanonicalForm {
        holds: false,
        shift: f64::NAN,
        residual: f64::INFINITY,
        p_min_eigenvalue: f64::NAN,
        q_min_eigenvalue: f64::NAN,
    };
    if w.dims() != delta.dims() {
        return fail;
    }
    let dims = w.dims();
    let d = dims.total();
    let k1 = delta.spectral_split(tol::RANK_TOL).kernel_basis().clone();
    let k2 = delta.pt().spectral_split(tol::RANK_TOL).kernel_basis().clone();
    let p_basis = embedded_hermitian_basis(&k1);
    let q_basis: Vec<CMatrix> = embedded_hermitian_basis(&k2)
        .into_iter()
        .map(|m| HermitianOperator::from_hermitian_part(dims, &m).pt().into_matrix())
        .collect();
    let mut columns: Vec<CMatrix> = vec![-CMatrix::identity(d, d)];
    columns.extend(p_basis.iter().cloned());
    columns.extend(q_basis.iter().cloned());

    let rows = 2 * d * d;
    let a = nalgebra::DMatrix::<f64>::from_fn(rows, columns.len(), |r, c| {
        let z = columns[c][(r / 2 / d, (r / 2) % d)];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let b = nalgebra::DVector::<f64>::from_fn(rows, |r, _| {
        let z = w.matrix()[(r / 2 / d, (r / 2) % d)];
        if r % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let svd = a.clone().svd(true, true);
    let Ok(x) = svd.solve(&b, 1e-12) else {
        return fail;
    };
    let residual = (&a * &x - &b).norm();
    let shift = x[0];
    let mut p = CMatrix::zeros(d, d);
    for (j, m) in p_basis.iter().enumerate() {
        p += m.scale(x[1 + j]);
    }
    let mut q_pt = CMatrix::zeros(d, d);
    for (j, m) in q_basis.iter().enumerate() {
        q_pt += m.scale(x[1 + p_basis.len() + j]);
    }
    let q = HermitianOperator::from_hermitian_part(dims, &q_pt).pt();
    let p_min = linalg::min_eigenvalue(&p);
    let q_min = q.min_eigenvalue();
    CanonicalForm {
        holds: residual <= 1e-8 && shift >= -1e-10 && p_min >= -1e-8 && q_min >= -1e-8,
        shift,
        residual,
        p_min_eigenvalue: p_min,
        q_min_eigenvalue: q_min,
    }
}

/// First PPT candidate detected by `W` (`Tr(Wρ) < −1e-10`).
pub fn nondecomposability_certificate(w: &HermitianOperator, candidates: &[DensityMatrix]) -> Option<DensityMatrix> {
    candidates
        .iter()
        .filter(|rho| rho.dims() == w.dims())
        .find(|rho| {
            ppt_check(rho).is_ppt && detects(w, rho).is_ok_and(|v| v < -tol::DETECTION_TOL)
        })
        .cloned()
}

/// Family grid (for 2×4) followed by `random` rejection-sampled PPT states.
pub fn default_certificate_candidates(dims: BipartiteDims, random: usize, seed: u64) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::new();
    if dims == crate::family::family_dims() {
        for b in crate::family::default_grid(39) {
            out.push(crate::family::rho_b(b)?);
        }
    }
    let sampled: Vec<DensityMatrix> = (0..random)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            crate::sample::random_ppt(dims, &mut rng)
        })
        .collect::<Result<_>>()?;
    out.extend(sampled);
    Ok(out)
}

/// `W` is a positive multiple of a projector.
fn is_scaled_projector(w: &HermitianOperator) -> bool {
    let top = w.eigenvalues().last().copied().unwrap_or(0.0);
    top > 0.0 && w.scale(1.0 / top).is_projector(1e-8)
}

/// Necessary condition for extremality: an optimal witness in canonical form
/// for `delta`, or a (partially transposed) projector.
pub fn extremality_necessary(report: &WitnessReport, delta: &DensityMatrix) -> bool {
    let w = &report.witness;
    if is_scaled_projector(w) || is_scaled_projector(&w.pt()) {
        return true;
    }
    report.optimal_certificate == OptimalityCertificate::OptimalBySpan && canonical_form_check(w, delta).holds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::rho_b;
    use crate::linalg::ZERO;
    use num_complex::Complex64;

    fn dims22() -> BipartiteDims {
        BipartiteDims::new(2, 2).unwrap()
    }

    fn phi_plus() -> HermitianOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = CVector::from_vec(vec![Complex64::new(s, 0.0), ZERO, ZERO, Complex64::new(s, 0.0)]);
        HermitianOperator::projector(dims22(), &v).unwrap()
    }

    fn flip_witness() -> HermitianOperator {
        &HermitianOperator::identity(dims22()).scale(0.5) - &phi_plus()
    }

    #[test]
    fn detects_fixtures() {
        let w = flip_witness();
        let phi = DensityMatrix::new(phi_plus()).unwrap();
        assert!((detects(&w, &phi).unwrap() + 0.5).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(dims22());
        assert!((detects(&w, &mixed).unwrap() - 0.25).abs() < 1e-12);
        let other = DensityMatrix::maximally_mixed(BipartiteDims::new(2, 3).unwrap());
        assert!(detects(&w, &other).is_err());
    }

    #[test]
    fn edge_witness_for_family_member() {
        let delta = rho_b(0.5).unwrap();
        let id = HermitianOperator::identity(delta.dims());
        let wc = construct_edge_witness(&delta, &id, 0.9, 200, 0).unwrap();
        // two independent numpy routes (see-saw, BFGS over angles) give 0.00511140276398339
        assert!((wc.epsilon - 0.005_111_402_763_983_39).abs() < 1e-9, "{}", wc.epsilon);
        assert_eq!(wc.c, 1.0);
        assert!((wc.epsilon_used - 0.9 * wc.epsilon).abs() < 1e-15);
        let tr = detects(&wc.w, &delta).unwrap();
        assert!((tr + wc.epsilon_used / wc.c * detects(&id, &delta).unwrap()).abs() < 1e-10);
        assert!(tr < 0.0);
        assert!(linalg::frobenius(&(wc.p.matrix() * delta.matrix())) <= 1e-10);
        assert!(linalg::frobenius(&(wc.q.matrix() * delta.pt().matrix())) <= 1e-10);
    }

    #[test]
    fn edge_witness_rejects_non_edge() {
        let rho = rho_b(0.0).unwrap();
        let id = HermitianOperator::identity(rho.dims());
        assert!(matches!(
            construct_edge_witness(&rho, &id, 0.9, 50, 0),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            construct_edge_witness(&rho_b(0.5).unwrap(), &id, 1.5, 50, 0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn shift_fixtures() {
        let w = flip_witness();
        let same = shift_to_tangent(&w, 0.9, 20, 0).unwrap();
        assert!(same.distance(&w) < 1e-15);

        let two = &HermitianOperator::identity(dims22()).scale(2.0) - &phi_plus().scale(2.0);
        let shifted = shift_to_tangent(&two, 1.0, 40, 0).unwrap();
        assert!(shifted.distance(&flip_witness().scale(2.0)) < 1e-9);
        assert!(!collect_zero_set(&shifted, 20, 1).unwrap().is_empty());

        let bad = HermitianOperator::diagonal(dims22(), &[-1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(shift_to_tangent(&bad, 0.9, 10, 0), Err(Error::NotAWitness(_))));
    }

    #[test]
    fn lambda0_fixtures() {
        let delta = rho_b(0.5).unwrap();
        let wc = construct_edge_witness(&delta, &HermitianOperator::identity(delta.dims()), 0.9, 100, 0).unwrap();
        let id = DecomposableOperator::new(HermitianOperator::identity(delta.dims()), HermitianOperator::zeros(delta.dims())).unwrap();
        let lam = lambda0_estimate(&wc.w, &id, 100, 1).unwrap();
        let min = min_product_expectation(&wc.w, 100, 2).unwrap().value;
        assert!((lam - min).abs() < 1e-10, "{lam} vs {min}");

        let w_psd = HermitianOperator::diagonal(delta.dims(), &[1.0, 2.0, 0.5, 0.0, 3.0, 1.0, 1.0, 2.0]).unwrap();
        let dw = DecomposableOperator::new(w_psd.clone(), HermitianOperator::zeros(delta.dims())).unwrap();
        assert!((lambda0_estimate(&w_psd, &dw, 50, 0).unwrap() - 1.0).abs() < 1e-10);
        assert!((compute_lambda0(&w_psd, &dw, 0.9, 50, 0).unwrap() - 0.9).abs() < 1e-10);
    }

    #[test]
    fn decomposable_operator_rejects_indefinite_parts() {
        let bad = HermitianOperator::diagonal(dims22(), &[-1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            DecomposableOperator::new(bad, HermitianOperator::zeros(dims22())),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn pencil_handles_shared_kernel() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(2.0, 0.0), ZERO]));
        let b = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(1.0, 0.0), ZERO]));
        assert!((pencil_min(&a, &b).0 - 2.0).abs() < 1e-14);
        let b2 = CMatrix::from_diagonal(&CVector::from_vec(vec![ZERO, Complex64::new(1.0, 0.0)]));
        assert_eq!(pencil_min(&a, &b2).0, 0.0);
        assert!(pencil_min(&a, &CMatrix::zeros(2, 2)).0.is_infinite());
    }

    #[test]
    fn flip_witness_is_left_unchanged() {
        // ½·1 − Φ+ = (P_{Ψ−})^{T_B}: p_W = {(e, ē)} spans C⁴, but its partial
        // conjugates {(e, e)} only span the symmetric subspace. The sole admissible
        // D is W itself, and W − λW is just a rescaling, so nothing is accepted.
        let opts = OptimizeOptions {
            restarts: 60,
            verify_samples: 1000,
            ..OptimizeOptions::default()
        };
        let r = optimize_witness(&flip_witness(), &opts).unwrap();
        assert!(r.steps.is_empty());
        assert_eq!((r.span_pw(), r.span_pwt()), (4, 3));
        assert_eq!(r.optimal_certificate, OptimalityCertificate::Unknown);
        assert!(r.witness.distance(&flip_witness().normalized_frobenius()) < 1e-12);
    }

    #[test]
    fn full_spans_leave_no_candidates() {
        let dims = dims22();
        let mut rng = stream_rng(3, 0);
        let vectors: Vec<_> = (0..6).map(|_| haar_product(dims, &mut rng)).collect();
        let zs = ZeroSet::from_vectors(vectors);
        let r = WitnessReport {
            witness: flip_witness(),
            witness_raw: flip_witness(),
            zero_set_pt: zs.partial_conjugates(),
            zero_set: zs,
            optimal_certificate: OptimalityCertificate::OptimalBySpan,
            nd_certificate: None,
            symmetric: false,
            steps: vec![],
        };
        assert!(admissible_candidates(&r, 100, 0).unwrap().is_empty());
    }

    #[test]
    fn canonical_form_fixtures() {
        let delta = rho_b(0.5).unwrap();
        let id = HermitianOperator::identity(delta.dims());
        let wc = construct_edge_witness(&delta, &id, 0.9, 100, 0).unwrap();
        let c = canonical_form_check(&wc.w, &delta);
        assert!(c.holds, "{c:?}");
        assert!((c.shift - wc.epsilon_used).abs() < 1e-9);

        let c0 = canonical_form_check(&wc.decomposable_part(), &delta);
        assert!(c0.holds && c0.shift.abs() < 1e-10);

        assert!(!canonical_form_check(&flip_witness(), &delta).holds);
        let mut rng = stream_rng(2, 0);
        let g = crate::sample::random_density(delta.dims(), &mut rng);
        assert!(!canonical_form_check(&(g.as_operator() - &id.scale(0.01)), &delta).holds);
    }

    #[test]
    fn certificates() {
        let delta = rho_b(0.5).unwrap();
        let wc = construct_edge_witness(&delta, &HermitianOperator::identity(delta.dims()), 0.9, 100, 0).unwrap();
        let cert = nondecomposability_certificate(&wc.w, std::slice::from_ref(&delta)).unwrap();
        assert_eq!(cert, delta);

        let cands = default_certificate_candidates(dims22(), 200, 0).unwrap();
        assert!(nondecomposability_certificate(&flip_witness(), &cands).is_none());
    }

    #[test]
    fn extremality_projector_branch() {
        let r = WitnessReport {
            witness: phi_plus().normalized_frobenius(),
            witness_raw: phi_plus(),
            zero_set: ZeroSet::default(),
            zero_set_pt: ZeroSet::default(),
            optimal_certificate: OptimalityCertificate::Unknown,
            nd_certificate: None,
            symmetric: true,
            steps: vec![],
        };
        let delta = rho_b(0.5).unwrap();
        assert!(extremality_necessary(&r, &delta));
        let wc = construct_edge_witness(&delta, &HermitianOperator::identity(delta.dims()), 0.9, 100, 0).unwrap();
        let unopt = WitnessReport {
            witness: wc.w.normalized_frobenius(),
            witness_raw: wc.w.clone(),
            ..r
        };
        assert!(!extremality_necessary(&unopt, &delta));
    }
}
