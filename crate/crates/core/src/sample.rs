//! Seeded random states and product vectors.
//!
//! All randomness is derived from a 64-bit seed. Independent subtasks draw
//! from separate ChaCha streams ([`stream_rng`]), so results do not depend on
//! how work is scheduled across threads.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::operator::{ppt_check, BipartiteDims, DensityMatrix, HermitianOperator, ProductVector};

/// Maximum number of draws for rejection-sampled PPT states.
pub const REJECTION_BUDGET: usize = 100_000;

/// RNG for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a seed (splitmix64 finalizer) to give each subtask its own seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Haar-random unit vector in `C^n`.
pub fn haar_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v.unscale(norm);
        }
    }
}

pub fn haar_product<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> ProductVector {
    ProductVector::new(haar_vector(dims.d_a, rng), haar_vector(dims.d_b, rng))
        .expect("Haar vectors are nonzero")
}

/// Uniform weights on the probability simplex.
pub fn dirichlet_uniform<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Convex combination of `components` Haar-random product projectors.
pub fn separable_mixture<R: Rng + ?Sized>(
    dims: BipartiteDims,
    components: usize,
    rng: &mut R,
) -> DensityMatrix {
    let weights = dirichlet_uniform(components.max(1), rng);
    let d = dims.total();
    let mut m = CMatrix::zeros(d, d);
    for w in weights {
        let t = haar_product(dims, rng).tensor();
        m += (&t * t.adjoint()).scale(w);
    }
    DensityMatrix::normalize(HermitianOperator::from_hermitian_part(dims, &m))
        .expect("mixture of projectors is a state")
}

/// Hilbert–Schmidt random state `G G† / Tr(G G†)` with `G` complex Ginibre.
pub fn random_density<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> DensityMatrix {
    let d = dims.total();
    let g = CMatrix::from_fn(d, d, |_, _| complex_normal(rng));
    DensityMatrix::normalize(HermitianOperator::from_hermitian_part(dims, &(&g * g.adjoint())))
        .expect("Ginibre product is PSD")
}

/// Rejection-samples [`random_density`] until the partial transpose is positive.
pub fn random_ppt<R: Rng + ?Sized>(dims: BipartiteDims, rng: &mut R) -> Result<DensityMatrix> {
    for _ in 0..REJECTION_BUDGET {
        let rho = random_density(dims, rng);
        if ppt_check(&rho).is_ppt {
            return Ok(rho);
        }
    }
    Err(Error::Sampling(format!(
        "no PPT state in {REJECTION_BUDGET} draws for dims {dims}"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    PureProduct,
    SeparableMixture,
    RandomDensity,
    RandomPpt,
}

#[derive(Clone, Debug)]
pub enum Sample {
    Product(ProductVector),
    State(DensityMatrix),
}

/// Deterministic draw of `kind` for `seed`. Separable mixtures use `4·d` components.
pub fn sample(kind: SampleKind, dims: BipartiteDims, seed: u64) -> Result<Sample> {
    let mut rng = stream_rng(seed, 0);
    Ok(match kind {
        SampleKind::PureProduct => Sample::Product(haar_product(dims, &mut rng)),
        SampleKind::SeparableMixture => {
            Sample::State(separable_mixture(dims, 4 * dims.total(), &mut rng))
        }
        SampleKind::RandomDensity => Sample::State(random_density(dims, &mut rng)),
        SampleKind::RandomPpt => Sample::State(random_ppt(dims, &mut rng)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_state() {
        let dims = BipartiteDims::new(2, 4).unwrap();
        for kind in [
            SampleKind::SeparableMixture,
            SampleKind::RandomDensity,
            SampleKind::RandomPpt,
        ] {
            let (Sample::State(a), Sample::State(b)) =
                (sample(kind, dims, 7).unwrap(), sample(kind, dims, 7).unwrap())
            else {
                panic!("expected states");
            };
            assert_eq!(a, b);
        }
    }

    #[test]
    fn pure_product_is_normalized() {
        let dims = BipartiteDims::new(2, 4).unwrap();
        for seed in 0..50 {
            let Sample::Product(v) = sample(SampleKind::PureProduct, dims, seed).unwrap() else {
                panic!("expected product");
            };
            assert!((v.e().norm() - 1.0).abs() < 1e-12);
            assert!((v.f().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_mixtures_are_ppt() {
        let dims = BipartiteDims::new(2, 2).unwrap();
        for seed in 0..1000 {
            let Sample::State(rho) = sample(SampleKind::SeparableMixture, dims, seed).unwrap()
            else {
                panic!("expected state");
            };
            assert!(ppt_check(&rho).is_ppt);
        }
    }

    #[test]
    fn random_ppt_passes_check() {
        let dims = BipartiteDims::new(2, 4).unwrap();
        let mut rng = stream_rng(3, 1);
        let rho = random_ppt(dims, &mut rng).unwrap();
        assert!(ppt_check(&rho).is_ppt);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).random();
        let b: u64 = stream_rng(1, 1).random();
        assert_ne!(a, b);
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
    }
}
