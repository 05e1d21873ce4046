//! Built-in model generators: the search-problem projector pair restricted to
//! its two-dimensional invariant subspace, seeded random gapped families, and
//! transverse-field chains. All randomness is driven by caller-supplied seeds
//! so reports are bit-reproducible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{QacError, Result};
use crate::family::InterpolationFamily;
use crate::linalg::{CMatrix, HermitianOperator};

/// Which built-in model to generate.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// Projector pair for an unstructured search over `size` elements,
    /// restricted to the invariant plane spanned by the marked state and the
    /// uniform superposition.
    Grover { size: u64 },
    /// Rejection-sampled Hermitian pair whose path gap at `level` stays at or
    /// above `gap_floor` on a 201-point scan.
    RandomGapped {
        dim: usize,
        gap_floor: f64,
        seed: u64,
        level: usize,
    },
    /// Transverse-field chain: `H0` is the field term alone, `H1` the full
    /// chain Hamiltonian.
    Ising { sites: usize, field: f64 },
    /// Caller-supplied matrices.
    Explicit {
        h0: HermitianOperator,
        h1: HermitianOperator,
    },
}

/// Generates the interpolation family for a model description.
pub fn generate_model(spec: &ModelSpec) -> Result<InterpolationFamily> {
    match spec {
        ModelSpec::Grover { size } => grover_family(*size),
        ModelSpec::RandomGapped {
            dim,
            gap_floor,
            seed,
            level,
        } => random_gapped_family(*dim, *gap_floor, *seed, *level),
        ModelSpec::Ising { sites, field } => ising_family(*sites, *field),
        ModelSpec::Explicit { h0, h1 } => {
            InterpolationFamily::with_measured_bounds(h0.clone(), h1.clone())
        }
    }
}

/// A Hermitian matrix with unit operator norm, Gaussian-seeded.
pub fn random_hermitian_unit_norm(dim: usize, rng: &mut ChaCha8Rng) -> HermitianOperator {
    let mut m = CMatrix::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..=r {
            if r == c {
                m[(r, c)] = Complex64::new(gaussian(rng), 0.0);
            } else {
                let z = Complex64::new(gaussian(rng), gaussian(rng))
                    * std::f64::consts::FRAC_1_SQRT_2;
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
    }
    let h = HermitianOperator::new(m).expect("constructed Hermitian");
    let norm = h.operator_norm().max(1e-12);
    h.linear_combination(1.0 / norm, &HermitianOperator::zero(dim), 0.0)
        .expect("same dim")
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on explicit uniforms keeps the stream stable across rand
    // versions
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian matrix.
fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let qr = g.qr();
    qr.q()
}

/// The two-dimensional invariant-subspace pair for unstructured search:
/// in the orthonormal basis (marked state, its complement within the uniform
/// superposition), `H1 = diag(0, 1)` and `H0 = I - |phi><phi|`.
pub fn grover_family(size: u64) -> Result<InterpolationFamily> {
    if size < 2 {
        return Err(QacError::Range("search size must be at least 2".into()));
    }
    let k = size as f64;
    let h1 = HermitianOperator::from_real_rows(2, &[0.0, 0.0, 0.0, 1.0])?;
    let c = 1.0 / k; // |<m|phi>|^2
    let off = -(c * (1.0 - c)).sqrt();
    let h0 = HermitianOperator::from_real_rows(2, &[1.0 - c, off, off, c])?;
    InterpolationFamily::new(h0, h1, 1.0, 2.0)
}

/// Rejection-samples a Hermitian pair whose instantaneous gap at `level`
/// stays at or above `gap_floor` across a 201-point path scan. Same seed,
/// same matrices.
pub fn random_gapped_family(
    dim: usize,
    gap_floor: f64,
    seed: u64,
    level: usize,
) -> Result<InterpolationFamily> {
    if dim < 2 || level >= dim {
        return Err(QacError::Range(format!(
            "need dim >= 2 and level < dim, got dim = {dim}, level = {level}"
        )));
    }
    if gap_floor <= 0.0 {
        return Err(QacError::Range("gap_floor must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _attempt in 0..10_000 {
        // jittered ladder with spacing comfortably above the floor
        let mut ladder = Vec::with_capacity(dim);
        let mut e = 0.0;
        for _ in 0..dim {
            ladder.push(e);
            e += gap_floor * (3.0 + rng.gen_range(0.0..1.5));
        }
        let center = ladder.iter().sum::<f64>() / dim as f64;
        let diag = CMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                Complex64::new(ladder[r] - center, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let v0 = random_unitary(dim, &mut rng);
        let twist = random_hermitian_unit_norm(dim, &mut rng);
        let rot = crate::linalg::expm_i(&twist, 0.6)?;
        let v1 = &v0 * rot;
        let h0 = HermitianOperator::symmetrized(&v0 * &diag * v0.adjoint())?;
        let h1 = HermitianOperator::symmetrized(&v1 * &diag * v1.adjoint())?;
        let fam = InterpolationFamily::with_measured_bounds(h0, h1)?;
        let mut ok = true;
        for i in 0..=200 {
            let s = i as f64 / 200.0;
            if fam.gap(s, level)? < gap_floor {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(fam);
        }
    }
    Err(QacError::Infeasible(format!(
        "no gapped pair found in 10000 draws; try a smaller gap_floor than {gap_floor}"
    )))
}

fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let scale = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = scale * b[(k, l)];
                }
            }
        }
    }
    out
}

fn site_operator(op: &CMatrix, site: usize, sites: usize) -> CMatrix {
    let mut out = DMatrix::identity(1, 1).map(|x: f64| Complex64::new(x, 0.0));
    for i in 0..sites {
        let factor = if i == site {
            op.clone()
        } else {
            CMatrix::identity(2, 2)
        };
        out = kron(&out, &factor);
    }
    out
}

/// Open transverse-field chain on up to 10 sites:
/// `H0 = -field sum_i X_i`, `H1 = H0 - sum_i Z_i Z_{i+1}`.
pub fn ising_family(sites: usize, field: f64) -> Result<InterpolationFamily> {
    if sites == 0 || sites > 10 {
        return Err(QacError::Range("sites must lie in 1..=10".into()));
    }
    let x = crate::linalg::pauli::x();
    let z = crate::linalg::pauli::z();
    let dim = 1usize << sites;
    let mut field_term = CMatrix::zeros(dim, dim);
    for i in 0..sites {
        field_term += site_operator(x.matrix(), i, sites) * Complex64::new(-field, 0.0);
    }
    let mut coupling = CMatrix::zeros(dim, dim);
    for i in 0..sites.saturating_sub(1) {
        let zz = site_operator(z.matrix(), i, sites) * site_operator(z.matrix(), i + 1, sites);
        coupling -= zz;
    }
    let h0 = HermitianOperator::symmetrized(field_term.clone())?;
    let h1 = HermitianOperator::symmetrized(field_term + coupling)?;
    InterpolationFamily::with_measured_bounds(h0, h1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grover_small_case_gap() {
        let fam = grover_family(4).unwrap();
        // gap at the path midpoint for a 4-element search is exactly 1/2
        assert_relative_eq!(fam.gap(0.5, 0).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(fam.gap(0.0, 0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(fam.gap(1.0, 0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn grover_rejects_tiny_size() {
        assert!(grover_family(1).is_err());
    }

    #[test]
    fn random_gapped_is_reproducible_and_gapped() {
        let a = random_gapped_family(6, 0.3, 7, 0).unwrap();
        let b = random_gapped_family(6, 0.3, 7, 0).unwrap();
        for (x, y) in a.h0().matrix().iter().zip(b.h0().matrix().iter()) {
            assert_eq!(x, y);
        }
        for i in 0..=20 {
            assert!(a.gap(i as f64 / 20.0, 0).unwrap() >= 0.3);
        }
        let c = random_gapped_family(6, 0.3, 8, 0).unwrap();
        assert!((a.h0().matrix() - c.h0().matrix()).iter().any(|z| z.norm() > 1e-9));
    }

    #[test]
    fn ising_two_sites() {
        let fam = ising_family(2, 1.0).unwrap();
        assert_eq!(fam.dim(), 4);
        for i in 0..=10 {
            assert!(fam.gap(i as f64 / 10.0, 0).unwrap() > 1e-6);
        }
    }

    #[test]
    fn ising_rejects_oversized_chain() {
        assert!(ising_family(11, 1.0).is_err());
    }
}
