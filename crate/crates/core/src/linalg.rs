//! Dense complex Hermitian linear algebra: eigendecomposition with a
//! deterministic phase convention, matrix exponentials, ordered exponentials,
//! and spectral norms. Everything downstream treats this module as its
//! numerical oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QacError, Result};

/// Absolute tolerance for the Hermiticity invariant.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Eigenvalues closer than this are treated as a degenerate cluster.
pub const DEGENERACY_TOL: f64 = 1e-10;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// A dense d-by-d complex Hermitian matrix in energy units.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermiticity to within [`HERMITICITY_TOL`] (absolute, entrywise).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(QacError::Validation(format!(
                "operator must be square with dim >= 1, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let d = matrix.nrows();
        for j in 0..d {
            for l in 0..=j {
                let diff = matrix[(j, l)] - matrix[(l, j)].conj();
                if diff.norm() > HERMITICITY_TOL {
                    return Err(QacError::Validation(format!(
                        "entry ({j},{l}) deviates from Hermiticity by {:.3e}",
                        diff.norm()
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Builds the operator from real entries (row-major), validating symmetry.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        assert_eq!(rows.len(), dim * dim);
        let m = CMatrix::from_fn(dim, dim, |r, c| Complex64::new(rows[r * dim + c], 0.0));
        Self::new(m)
    }

    /// Zero operator of the given dimension.
    pub fn zero(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    /// Identity scaled by `x`.
    pub fn scaled_identity(dim: usize, x: f64) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim) * Complex64::new(x, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `a*self + b*other`; the linear combination of Hermitians is Hermitian.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(QacError::Validation(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let m = &self.matrix * Complex64::new(a, 0.0) + &other.matrix * Complex64::new(b, 0.0);
        Ok(Self { matrix: m })
    }

    /// Spectral norm (largest eigenvalue magnitude).
    pub fn operator_norm(&self) -> f64 {
        let eig = eig_hermitian(self).expect("validated Hermitian operator must diagonalise");
        eig.eigenvalues
            .iter()
            .fold(0.0f64, |acc, &e| acc.max(e.abs()))
    }

    /// Re-symmetrises tiny numerical drift: (A + A†)/2. The drift must already
    /// be within [`HERMITICITY_TOL`]; this only cleans round-off.
    pub fn symmetrized(matrix: CMatrix) -> Result<Self> {
        let adj = matrix.adjoint();
        Self::new((matrix + adj) * Complex64::new(0.5, 0.0))
    }
}

/// Eigendecomposition of a Hermitian operator with eigenvalues sorted
/// ascending and a deterministic eigenvector phase convention.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Sorted ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector paired with `eigenvalues[j]`.
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    /// Reconstructs `V diag(E) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.eigenvalues.len();
        let diag = CMatrix::from_fn(d, d, |r, c| {
            if r == c {
                Complex64::new(self.eigenvalues[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &self.eigenvectors * diag * self.eigenvectors.adjoint()
    }

    /// Eigenvector `k` as a state.
    pub fn state(&self, k: usize) -> StateVector {
        StateVector::new_unchecked(self.eigenvectors.column(k).into_owned())
    }

    /// `min(E_k - E_{k-1}, E_{k+1} - E_k)`, skipping absent neighbours.
    pub fn gap_at(&self, k: usize) -> Result<f64> {
        let n = self.eigenvalues.len();
        if k >= n {
            return Err(QacError::Range(format!(
                "eigenstate index {k} out of range for dim {n}"
            )));
        }
        let mut gap = f64::INFINITY;
        if k > 0 {
            gap = gap.min(self.eigenvalues[k] - self.eigenvalues[k - 1]);
        }
        if k + 1 < n {
            gap = gap.min(self.eigenvalues[k + 1] - self.eigenvalues[k]);
        }
        if !gap.is_finite() {
            // dim 1: no other levels, treat as unbounded gap
            gap = f64::INFINITY;
        }
        Ok(gap)
    }
}

/// A complex amplitude vector, unit-norm unless explicitly sub-normalized.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: CVector,
    sub_normalized: bool,
}

impl StateVector {
    /// Requires Euclidean norm 1 to within 1e-12.
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(QacError::Validation(format!(
                "state norm {n} deviates from 1 by more than 1e-12"
            )));
        }
        Ok(Self {
            amplitudes,
            sub_normalized: false,
        })
    }

    /// Accepts any norm <= 1 (+ slack); flags the state sub-normalized.
    pub fn new_sub_normalized(amplitudes: CVector) -> Result<Self> {
        let n = amplitudes.norm();
        if n > 1.0 + 1e-9 {
            return Err(QacError::Validation(format!(
                "sub-normalized state has norm {n} > 1"
            )));
        }
        Ok(Self {
            amplitudes,
            sub_normalized: true,
        })
    }

    pub(crate) fn new_unchecked(amplitudes: CVector) -> Self {
        Self {
            amplitudes,
            sub_normalized: false,
        }
    }

    /// Basis state |index> of the given dimension.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self::new_unchecked(v)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn is_sub_normalized(&self) -> bool {
        self.sub_normalized
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Plain Euclidean distance.
    pub fn distance(&self, other: &Self) -> f64 {
        (&self.amplitudes - &other.amplitudes).norm()
    }

    /// Distance minimised over a global phase:
    /// `min_phi || self - e^{i phi} other || = sqrt(2 - 2|<self|other>|)`
    /// for unit vectors. States are rays, so bound checks against prepared
    /// states use this measure.
    pub fn distance_aligned(&self, other: &Self) -> f64 {
        let a2 = self.amplitudes.norm_squared();
        let b2 = other.amplitudes.norm_squared();
        let ov = self.amplitudes.dotc(&other.amplitudes).norm();
        (a2 + b2 - 2.0 * ov).max(0.0).sqrt()
    }

    pub fn overlap(&self, other: &Self) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm()
    }
}

/// Hermitian eigendecomposition with sorted eigenvalues, a deterministic
/// phase convention (the largest-magnitude component of each eigenvector is
/// made real positive), and deterministic orthonormalisation of degenerate
/// clusters.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<SpectralDecomposition> {
    let d = h.dim();
    let sym = nalgebra::SymmetricEigen::new(h.matrix().clone());
    // sort ascending, permuting columns alongside
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        sym.eigenvalues[a]
            .partial_cmp(&sym.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &sym.eigenvectors.column(i));
    }

    // degenerate clusters: rebuild an orthonormal basis of the eigenspace
    // from the projector applied to canonical basis vectors, in index order;
    // rebuilding a k-dimensional cluster whose eigenvalues span w moves the
    // reconstruction by at most w sqrt(k) in Frobenius norm
    let mut cluster_penalty_sq = 0.0f64;
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && eigenvalues[end] - eigenvalues[end - 1] <= DEGENERACY_TOL {
            end += 1;
        }
        if end - start > 1 {
            let span = eigenvalues[end - 1] - eigenvalues[start];
            cluster_penalty_sq += span * span * (end - start) as f64;
            deterministic_cluster_basis(&mut vectors, start, end)?;
        }
        start = end;
    }
    let cluster_penalty = cluster_penalty_sq.sqrt();

    // phase convention
    for c in 0..d {
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for r in 0..d {
            let m = vectors[(r, c)].norm();
            if m > best_mag + 1e-15 {
                best_mag = m;
                best = r;
            }
        }
        let pivot = vectors[(best, c)];
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for r in 0..d {
                vectors[(r, c)] *= phase;
            }
        }
    }

    let dec = SpectralDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    };

    let recon = dec.reconstruct();
    let scale = frobenius_norm(h.matrix());
    // relative check with an absolute floor: rebuilding cluster bases moves
    // the reconstruction by up to the combined cluster spans, and noise-scale
    // matrices must not be rejected on meaningless ratios
    let tol = 1e-10 * scale.max(1.0) + cluster_penalty + 1e-18 * d as f64;
    let err = frobenius_norm(&(recon - h.matrix()));
    if err > tol {
        return Err(QacError::Validation(format!(
            "eigendecomposition reconstruction error {err:.3e} exceeds {tol:.3e}"
        )));
    }
    Ok(dec)
}

/// Replaces the eigenvector columns `start..end` (a degenerate cluster) by the
/// orthonormal basis obtained from projecting canonical basis vectors onto the
/// cluster's eigenspace in index order.
fn deterministic_cluster_basis(vectors: &mut CMatrix, start: usize, end: usize) -> Result<()> {
    let d = vectors.nrows();
    let k = end - start;
    // projector onto the cluster span
    let mut proj = CMatrix::zeros(d, d);
    for c in start..end {
        let v = vectors.column(c);
        proj += v * v.adjoint();
    }
    let mut accepted: Vec<CVector> = Vec::with_capacity(k);
    for i in 0..d {
        if accepted.len() == k {
            break;
        }
        let mut w: CVector = proj.column(i).into_owned();
        for a in &accepted {
            let coef = a.dotc(&w);
            w -= a * coef;
        }
        let n = w.norm();
        if n > 1e-8 {
            accepted.push(w / Complex64::new(n, 0.0));
        }
    }
    if accepted.len() != k {
        return Err(QacError::Validation(
            "failed to build a deterministic basis for a degenerate cluster".into(),
        ));
    }
    for (j, a) in accepted.into_iter().enumerate() {
        vectors.set_column(start + j, &a);
    }
    Ok(())
}

/// `e^{-iHt}` via spectral synthesis.
pub fn expm_i(h: &HermitianOperator, t: f64) -> Result<CMatrix> {
    let dec = eig_hermitian(h)?;
    Ok(expm_from_decomposition(&dec, t))
}

/// `e^{-iHt}` from a precomputed decomposition of `H`.
pub fn expm_from_decomposition(dec: &SpectralDecomposition, t: f64) -> CMatrix {
    let d = dec.eigenvalues.len();
    let mut scaled = dec.eigenvectors.clone();
    for (c, &e) in dec.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -e * t);
        for r in 0..d {
            scaled[(r, c)] *= phase;
        }
    }
    scaled * dec.eigenvectors.adjoint()
}

/// Midpoint-rule ordered exponential of `i D(s)` over `[s0, s1]` with a fixed
/// step count: the product of `exp(i D(s_j + delta/2) delta)` applied
/// left-to-right in increasing `s`.
pub fn ordered_exponential<F>(generator: F, s0: f64, s1: f64, steps: usize) -> Result<CMatrix>
where
    F: Fn(f64) -> Result<HermitianOperator>,
{
    if steps == 0 {
        return Err(QacError::Range("ordered exponential needs steps >= 1".into()));
    }
    let delta = (s1 - s0) / steps as f64;
    let mut u: Option<CMatrix> = None;
    for j in 0..steps {
        let mid = s0 + (j as f64 + 0.5) * delta;
        let d_mid = generator(mid)?;
        // dU/ds = iD U  <=>  step factor e^{iD delta} = expm_i(D, -delta)
        let factor = expm_i(&d_mid, -delta)?;
        u = Some(match u {
            None => factor,
            Some(acc) => factor * acc,
        });
    }
    Ok(u.expect("steps >= 1"))
}

/// Outcome of the step-doubling refinement contract.
#[derive(Debug, Clone)]
pub struct RefinedProduct {
    pub product: CMatrix,
    /// Operator-norm distance between the last two refinement iterates.
    pub achieved_tolerance: f64,
    pub steps: usize,
}

/// Ordered exponential with the refinement contract: step counts are doubled
/// until successive products differ by less than `tolerance` in operator
/// norm. Errors out past `max_doublings`, carrying the last distance.
pub fn ordered_exponential_converged<F>(
    generator: F,
    s0: f64,
    s1: f64,
    initial_steps: usize,
    tolerance: f64,
    max_doublings: usize,
) -> Result<RefinedProduct>
where
    F: Fn(f64) -> Result<HermitianOperator>,
{
    let mut steps = initial_steps.max(1);
    let mut prev = ordered_exponential(&generator, s0, s1, steps)?;
    let mut last_dist = f64::INFINITY;
    for _ in 0..max_doublings {
        steps *= 2;
        let next = ordered_exponential(&generator, s0, s1, steps)?;
        last_dist = spectral_norm(&(&next - &prev));
        if last_dist < tolerance {
            return Ok(RefinedProduct {
                product: next,
                achieved_tolerance: last_dist,
                steps,
            });
        }
        prev = next;
    }
    Err(QacError::Convergence {
        context: format!("ordered exponential on [{s0}, {s1}] stalled at {steps} steps"),
        residual: last_dist,
        tolerance,
    })
}

/// Spectral norm of a general complex matrix via the Hermitian
/// eigendecomposition of `A† A`.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    let herm = HermitianOperator::symmetrized(gram)
        .expect("Gram matrix is Hermitian up to round-off");
    let dec = eig_hermitian(&herm).expect("Gram matrix diagonalises");
    dec.eigenvalues
        .iter()
        .fold(0.0f64, |acc, &e| acc.max(e))
        .max(0.0)
        .sqrt()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|| U†U - I ||` in spectral norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let d = u.ncols();
    let gram = u.adjoint() * u;
    spectral_norm(&(gram - CMatrix::identity(d, d)))
}

/// Pauli matrices, used throughout tests and model generators.
pub mod pauli {
    use super::*;

    pub fn x() -> HermitianOperator {
        HermitianOperator::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn y() -> HermitianOperator {
        let m = CMatrix::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, 0.0),
        });
        HermitianOperator::new(m).unwrap()
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator::from_real_rows(2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }
}
