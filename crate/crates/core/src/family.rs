//! The one-parameter family of 2×4 PPT states `ρ_b`, `b ∈ [0, 1]`, and
//! detection scans of witnesses and maps built from one member.
//!
//! Matrix layout (before dividing by `7b + 1`): `b` on the diagonal of the
//! `|0⟩_A` block and at `|1,1⟩`, `|1,2⟩`; couplings `b` between `|0,k⟩` and
//! `|1,k+1⟩` for `k = 0, 1, 2`; a `{|1,0⟩, |1,3⟩}` block with diagonal
//! `(1+b)/2` and off-diagonal `√(1−b²)/2`. Members with `0 < b < 1` are edge
//! states; `b = 0` and `b = 1` are separable.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::maps::{detect_via_map, witness_to_map};
use crate::operator::{BipartiteDims, DensityMatrix, HermitianOperator};
use crate::tol;
use crate::witness::{construct_edge_witness, detects, optimize_witness, OptimizeOptions, WitnessConstruction, WitnessReport};
use num_complex::Complex64;

pub fn family_dims() -> BipartiteDims {
    BipartiteDims { d_a: 2, d_b: 4 }
}

pub fn rho_b(b: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Parameter(format!("b = {b} outside [0, 1]")));
    }
    let mut m = [[0.0f64; 8]; 8];
    for i in 0..4 {
        m[i][i] = b;
    }
    m[5][5] = b;
    m[6][6] = b;
    for (i, j) in [(0, 5), (1, 6), (2, 7)] {
        m[i][j] = b;
        m[j][i] = b;
    }
    let diag = (1.0 + b) / 2.0;
    let off = (1.0 - b * b).max(0.0).sqrt() / 2.0;
    m[4][4] = diag;
    m[7][7] = diag;
    m[4][7] = off;
    m[7][4] = off;
    let norm = 7.0 * b + 1.0;
    let matrix = CMatrix::from_fn(8, 8, |i, j| Complex64::new(m[i][j] / norm, 0.0));
    DensityMatrix::new(HermitianOperator::new(family_dims(), matrix)?)
}

/// `{0.025, 0.05, …, 0.975}` for `steps = 39`: `steps` interior points of `(0, 1)`.
pub fn default_grid(steps: usize) -> Vec<f64> {
    let n = steps as f64 + 1.0;
    (1..=steps).map(|k| k as f64 / n).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanPoint {
    pub b_prime: f64,
    #[serde(rename = "tr_W_rho")]
    pub tr_w_rho: f64,
    pub min_eig_map: f64,
    pub detected_by_witness: bool,
    pub detected_by_map: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyScanRow {
    pub b_source: f64,
    pub optimized: bool,
    /// Largest grid `b'` detected by the witness, if any.
    pub b_detected_max_witness: Option<f64>,
    pub b_detected_max_map: Option<f64>,
    pub grid: Vec<f64>,
    pub points: Vec<ScanPoint>,
    #[serde(skip)]
    pub witness: Option<HermitianOperator>,
}

impl FamilyScanRow {
    pub fn witness_detected(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.detected_by_witness)
            .map(|p| p.b_prime)
            .collect()
    }

    pub fn map_detected(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.detected_by_map)
            .map(|p| p.b_prime)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ScanOptions {
    pub optimize: bool,
    pub restarts: usize,
    pub seed: u64,
    pub safety: f64,
    pub max_iters: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            optimize: false,
            restarts: crate::product_search::DEFAULT_RESTARTS,
            seed: 0,
            safety: crate::witness::DEFAULT_SAFETY,
            max_iters: 16,
        }
    }
}

/// Witness (and optional optimization report) built from `ρ_{b_source}`.
pub fn source_witness(
    b_source: f64,
    opts: &ScanOptions,
) -> Result<(WitnessConstruction, Option<WitnessReport>)> {
    if !(b_source > 0.0 && b_source < 1.0) {
        return Err(Error::Parameter(format!("b_source = {b_source} must lie in (0, 1)")));
    }
    let delta = rho_b(b_source)?;
    let c = HermitianOperator::identity(delta.dims());
    let construction = construct_edge_witness(&delta, &c, opts.safety, opts.restarts, opts.seed)?;
    let report = if opts.optimize {
        let o = OptimizeOptions {
            max_iters: opts.max_iters,
            restarts: opts.restarts,
            seed: crate::sample::derive_seed(opts.seed, 1),
            ..OptimizeOptions::default()
        };
        Some(optimize_witness(&construction.w, &o)?)
    } else {
        None
    };
    Ok((construction, report))
}

/// Evaluates a witness and its map on `ρ_{b'}` for each grid point.
pub fn scan_with_witness(
    b_source: f64,
    optimized: bool,
    w: &HermitianOperator,
    grid: &[f64],
) -> Result<FamilyScanRow> {
    if grid.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::Parameter("grid points must lie in [0, 1]".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = w.normalized_frobenius();
    let map = witness_to_map(&w);
    let d_b = family_dims().d_b as f64;
    let points = sorted
        .par_iter()
        .map(|&bp| {
            let rho = rho_b(bp)?;
            let tr = detects(&w, &rho)?;
            let min_eig = detect_via_map(&map, &rho)?;
            Ok(ScanPoint {
                b_prime: bp,
                tr_w_rho: tr,
                min_eig_map: min_eig,
                detected_by_witness: tr < -tol::DETECTION_TOL,
                // the maximally entangled probe has norm² d_B
                detected_by_map: min_eig < -tol::DETECTION_TOL / d_b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_of = |pred: fn(&ScanPoint) -> bool| {
        points.iter().filter(|p| pred(p)).map(|p| p.b_prime).fold(None, |acc: Option<f64>, b| {
            Some(acc.map_or(b, |a| a.max(b)))
        })
    };
    Ok(FamilyScanRow {
        b_source,
        optimized,
        b_detected_max_witness: max_of(|p| p.detected_by_witness),
        b_detected_max_map: max_of(|p| p.detected_by_map),
        grid: sorted,
        points,
        witness: Some(w),
    })
}

/// Builds the witness from `ρ_{b_source}`, optionally optimizes it, and scans the grid.
pub fn scan_family(b_source: f64, grid: &[f64], opts: &ScanOptions) -> Result<FamilyScanRow> {
    let (construction, report) = source_witness(b_source, opts)?;
    let w = match &report {
        Some(r) => r.witness.clone(),
        None => construction.w.clone(),
    };
    scan_with_witness(b_source, report.is_some(), &w, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ppt_check;

    #[test]
    fn validation_gate() {
        for k in 0..=10 {
            let b = k as f64 / 10.0;
            let rho = rho_b(b).unwrap();
            assert!((rho.trace() - 1.0).abs() < 1e-12);
            assert!(rho.min_eigenvalue() >= -1e-12, "b = {b}");
            assert!(ppt_check(&rho).is_ppt, "b = {b}");
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(rho_b(1.5), Err(Error::Parameter(_))));
        assert!(matches!(rho_b(-0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn continuous_in_b() {
        for b in default_grid(39) {
            let d = rho_b(b).unwrap().distance(&rho_b(b + 1e-6).unwrap());
            assert!(d <= 1e-4);
        }
    }

    #[test]
    fn ranks_match_oracle() {
        // independent numpy eigendecomposition: rank 5 for ρ and ρ^{T_B} at b = 0.5
        let rho = rho_b(0.5).unwrap();
        assert_eq!(rho.spectral_split(tol::RANK_TOL).rank, 5);
        assert_eq!(rho.pt().spectral_split(tol::RANK_TOL).rank, 5);
        assert_eq!(rho_b(0.0).unwrap().spectral_split(tol::RANK_TOL).rank, 1);
    }

    #[test]
    fn grid_is_open_and_sorted() {
        let g = default_grid(39);
        assert_eq!(g.len(), 39);
        assert!((g[0] - 0.025).abs() < 1e-15 && (g[38] - 0.975).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
