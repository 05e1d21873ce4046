//! The linear interpolation `H(s) = (1-s) H0 + s H1`, its derivative, spectral
//! gaps, and numeric block-encoding combinators. Block encodings are
//! materialized as explicit small unitaries so the combinator identities are
//! directly testable.

use num_complex::Complex64;

use crate::error::{QacError, Result};
use crate::linalg::{
    eig_hermitian, spectral_norm, CMatrix, HermitianOperator, SpectralDecomposition,
};

/// The pair `(H0, H1)` with validated norm promises `alpha >= max(||H0||,||H1||)`
/// and `beta >= ||H1 - H0||`.
#[derive(Debug, Clone)]
pub struct InterpolationFamily {
    h0: HermitianOperator,
    h1: HermitianOperator,
    alpha: f64,
    beta: f64,
}

impl InterpolationFamily {
    /// Validates dimensions and the norm promises (with 1e-9 slack).
    pub fn new(h0: HermitianOperator, h1: HermitianOperator, alpha: f64, beta: f64) -> Result<Self> {
        if h0.dim() != h1.dim() {
            return Err(QacError::Validation(format!(
                "H0 and H1 must share dim, got {} vs {}",
                h0.dim(),
                h1.dim()
            )));
        }
        let n0 = h0.operator_norm();
        let n1 = h1.operator_norm();
        if alpha < n0.max(n1) - 1e-9 {
            return Err(QacError::Validation(format!(
                "alpha = {alpha} below max(||H0||, ||H1||) = {}",
                n0.max(n1)
            )));
        }
        let diff = h1.linear_combination(1.0, &h0, -1.0)?;
        let nd = diff.operator_norm();
        if beta < nd - 1e-9 {
            return Err(QacError::Validation(format!(
                "beta = {beta} below ||H1 - H0|| = {nd}"
            )));
        }
        Ok(Self { h0, h1, alpha, beta })
    }

    /// Constructor with the tightest valid promises, measured numerically.
    pub fn with_measured_bounds(h0: HermitianOperator, h1: HermitianOperator) -> Result<Self> {
        let alpha = h0.operator_norm().max(h1.operator_norm());
        let beta = h1.linear_combination(1.0, &h0, -1.0)?.operator_norm();
        Self::new(h0, h1, alpha, beta)
    }

    pub fn h0(&self) -> &HermitianOperator {
        &self.h0
    }

    pub fn h1(&self) -> &HermitianOperator {
        &self.h1
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    /// `H(s) = (1-s) H0 + s H1` for `s` in `[0, 1]`.
    pub fn evaluate(&self, s: f64) -> Result<HermitianOperator> {
        if !(0.0..=1.0).contains(&s) {
            return Err(QacError::Range(format!("s = {s} outside [0, 1]")));
        }
        self.h0.linear_combination(1.0 - s, &self.h1, s)
    }

    /// `H' = H1 - H0`, constant for the linear interpolation.
    pub fn derivative(&self) -> HermitianOperator {
        self.h1
            .linear_combination(1.0, &self.h0, -1.0)
            .expect("dims validated at construction")
    }

    /// Spectral decomposition of `H(s)`.
    pub fn spectral(&self, s: f64) -> Result<SpectralDecomposition> {
        eig_hermitian(&self.evaluate(s)?)
    }

    /// `min(E_k - E_{k-1}, E_{k+1} - E_k)` of `H(s)`, boundary indices skipped.
    pub fn gap(&self, s: f64, k: usize) -> Result<f64> {
        self.spectral(s)?.gap_at(k)
    }

    /// Minimum of `gap(s, k)` over a uniform scan with golden-section
    /// refinement around the grid minimum. Returns `(s_min, gap_min)`.
    pub fn gap_scan(&self, k: usize, grid_points: usize) -> Result<(f64, f64)> {
        let n = grid_points.max(3);
        let mut best_s = 0.0;
        let mut best_g = f64::INFINITY;
        for i in 0..n {
            let s = i as f64 / (n - 1) as f64;
            let g = self.gap(s, k)?;
            if g < best_g {
                best_g = g;
                best_s = s;
            }
        }
        let step = 1.0 / (n - 1) as f64;
        let mut lo = (best_s - step).max(0.0);
        let mut hi = (best_s + step).min(1.0);
        let phi = 0.5 * (3.0 - 5.0f64.sqrt());
        for _ in 0..40 {
            let a = lo + phi * (hi - lo);
            let b = hi - phi * (hi - lo);
            let ga = self.gap(a, k)?;
            let gb = self.gap(b, k)?;
            if ga < gb {
                hi = b;
                if ga < best_g {
                    best_g = ga;
                    best_s = a;
                }
            } else {
                lo = a;
                if gb < best_g {
                    best_g = gb;
                    best_s = b;
                }
            }
        }
        Ok((best_s, best_g))
    }
}

/// A materialized block encoding: `encoded / normalization` equals the
/// top-left block of the witness unitary to 1e-10.
#[derive(Debug, Clone)]
pub struct BlockEncodingDescriptor {
    pub encoded: HermitianOperator,
    pub normalization: f64,
    pub ancilla_qubits: u32,
    /// `2^ancilla_qubits * dim`.
    pub unitary_dim: usize,
    witness: CMatrix,
}

impl BlockEncodingDescriptor {
    fn new(
        encoded: HermitianOperator,
        normalization: f64,
        ancilla_qubits: u32,
        witness: CMatrix,
    ) -> Result<Self> {
        let dim = encoded.dim();
        let unitary_dim = (1usize << ancilla_qubits) * dim;
        if witness.nrows() != unitary_dim {
            return Err(QacError::Config(format!(
                "witness dim {} does not match 2^{ancilla_qubits} * {dim}",
                witness.nrows()
            )));
        }
        if encoded.operator_norm() > normalization + 1e-9 {
            return Err(QacError::Validation(
                "encoded norm exceeds the block-encoding normalization".into(),
            ));
        }
        let desc = Self {
            encoded,
            normalization,
            ancilla_qubits,
            unitary_dim,
            witness,
        };
        let defect = desc.block_defect();
        if defect > 1e-10 {
            return Err(QacError::Validation(format!(
                "witness top-left block deviates from encoded/normalization by {defect:.3e}"
            )));
        }
        Ok(desc)
    }

    pub fn witness(&self) -> &CMatrix {
        &self.witness
    }

    /// Top-left `d x d` block of the witness: `(<0| ⊗ I) U (|0> ⊗ I)`.
    pub fn top_left_block(&self) -> CMatrix {
        let d = self.encoded.dim();
        self.witness.view((0, 0), (d, d)).into_owned()
    }

    /// Spectral-norm distance between the top-left block and
    /// `encoded / normalization`.
    pub fn block_defect(&self) -> f64 {
        let target = self.encoded.matrix() / Complex64::new(self.normalization, 0.0);
        spectral_norm(&(self.top_left_block() - target))
    }

    /// `|| W† W - I ||` of the witness.
    pub fn witness_unitarity_defect(&self) -> f64 {
        crate::linalg::unitarity_defect(&self.witness)
    }
}

/// Reflection-style single-ancilla witness for `H / alpha`:
/// `[[H/a, sqrt(I-(H/a)^2)], [sqrt(I-(H/a)^2), -H/a]]`, a `2d x 2d` unitary.
pub fn block_encode_plain(h: &HermitianOperator, alpha: f64) -> Result<BlockEncodingDescriptor> {
    let d = h.dim();
    if alpha <= 0.0 {
        return Err(QacError::Range("normalization must be positive".into()));
    }
    if h.operator_norm() > alpha + 1e-9 {
        return Err(QacError::Validation(
            "||H|| exceeds the requested normalization".into(),
        ));
    }
    let dec = eig_hermitian(h)?;
    let mut a_block = CMatrix::zeros(d, d);
    let mut b_block = CMatrix::zeros(d, d);
    for (c, &e) in dec.eigenvalues.iter().enumerate() {
        let lam = (e / alpha).clamp(-1.0, 1.0);
        let comp = (1.0 - lam * lam).max(0.0).sqrt();
        let v = dec.eigenvectors.column(c);
        let proj = v * v.adjoint();
        a_block += &proj * Complex64::new(lam, 0.0);
        b_block += proj * Complex64::new(comp, 0.0);
    }
    let mut w = CMatrix::zeros(2 * d, 2 * d);
    w.view_mut((0, 0), (d, d)).copy_from(&a_block);
    w.view_mut((0, d), (d, d)).copy_from(&b_block);
    w.view_mut((d, 0), (d, d)).copy_from(&b_block);
    w.view_mut((d, d), (d, d)).copy_from(&(-&a_block));
    BlockEncodingDescriptor::new(h.clone(), alpha, 1, w)
}

/// `sel O_H = |0><0| ⊗ O_{H0} + |1><1| ⊗ O_{H1}` on one extra control qubit.
fn select_oracle(w0: &CMatrix, w1: &CMatrix) -> CMatrix {
    let n = w0.nrows();
    let mut sel = CMatrix::zeros(2 * n, 2 * n);
    sel.view_mut((0, 0), (n, n)).copy_from(w0);
    sel.view_mut((n, n), (n, n)).copy_from(w1);
    sel
}

/// A single-qubit gate on the control qubit, tensored with the identity on
/// the `n`-dimensional rest.
fn control_gate(g: [[Complex64; 2]; 2], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    for (bi, row) in g.iter().enumerate() {
        for (bj, &val) in row.iter().enumerate() {
            for k in 0..n {
                m[(bi * n + k, bj * n + k)] = val;
            }
        }
    }
    m
}

fn hadamard() -> [[Complex64; 2]; 2] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[s, s], [s, -s]]
}

/// `R(theta) = e^{-i 2 pi theta Y}`, angle in turns:
/// `R(theta)|0> = cos(2 pi theta)|0> + sin(2 pi theta)|1>`.
pub fn rotation_y(theta_turns: f64) -> [[Complex64; 2]; 2] {
    let a = 2.0 * std::f64::consts::PI * theta_turns;
    let (sin, cos) = a.sin_cos();
    [
        [Complex64::new(cos, 0.0), Complex64::new(-sin, 0.0)],
        [Complex64::new(sin, 0.0), Complex64::new(cos, 0.0)],
    ]
}

fn gate_mul(a: [[Complex64; 2]; 2], b: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn transpose_gate(g: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[g[0][0], g[1][0]], [g[0][1], g[1][1]]]
}

/// Block encoding of `H' = H1 - H0` with normalization `2 alpha` and one
/// ancilla more than the plain witnesses: the witness is
/// `(Had ⊗ I) (sel O_H) ((X·Z·Had) ⊗ I)`.
pub fn block_encode_difference(fam: &InterpolationFamily) -> Result<BlockEncodingDescriptor> {
    let alpha = fam.alpha();
    let w0 = block_encode_plain(fam.h0(), alpha)?;
    let w1 = block_encode_plain(fam.h1(), alpha)?;
    let n = w0.unitary_dim;
    let sel = select_oracle(w0.witness(), w1.witness());
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let x = [[zero, one], [one, zero]];
    let z = [[one, zero], [zero, -one]];
    // X·Z·Had sends |0> to -|->, cancelling the sign of <+| sel O_H |-> so the
    // block comes out as (H1 - H0)/(2 alpha)
    let x_z_had = gate_mul(x, gate_mul(z, hadamard()));
    let witness = control_gate(hadamard(), n) * sel * control_gate(x_z_had, n);
    let encoded = fam.derivative();
    BlockEncodingDescriptor::new(encoded, 2.0 * alpha, w0.ancilla_qubits + 1, witness)
}

/// Exact rotation angle for the interpolant block encoding, in turns.
pub fn interpolation_angle(s: f64) -> f64 {
    s.sqrt().asin() / (2.0 * std::f64::consts::PI)
}

/// Rounds an angle in turns to the nearest `b`-bit fraction of a turn,
/// ties to even.
pub fn quantize_turns(theta: f64, bits: u32) -> f64 {
    let scale = (1u64 << bits) as f64;
    round_ties_even(theta * scale) / scale
}

fn round_ties_even(x: f64) -> f64 {
    let floor = x.floor();
    let frac = x - floor;
    if (frac - 0.5).abs() < f64::EPSILON {
        // tie: pick the even neighbour
        if (floor as i64) % 2 == 0 {
            floor
        } else {
            floor + 1.0
        }
    } else {
        x.round()
    }
}

/// Outcome of [`block_encode_interpolant`].
#[derive(Debug, Clone)]
pub struct QuantizedInterpolant {
    pub descriptor: BlockEncodingDescriptor,
    /// `|| H(s) - H~(s) ||`, measured.
    pub perturbation: f64,
    /// `4 pi alpha |theta(s) - theta~/2^b|`, the certified bound (0 when exact).
    pub perturbation_bound: f64,
}

/// Block encoding of `H(s)` with normalization `alpha` using the rotation
/// construction `(R(theta)† ⊗ I)(sel O_H)(R(theta) ⊗ I)` with
/// `theta(s) = arcsin(sqrt(s)) / (2 pi)`. With `angle_bits = Some(b)` the
/// rotation angle is replaced by its nearest `b`-bit value, encoding a
/// perturbed `H~(s)`; the measured `||H(s) - H~(s)||` is verified against the
/// bound `4 pi alpha |theta - theta~/2^b|`.
pub fn block_encode_interpolant(
    fam: &InterpolationFamily,
    s: f64,
    angle_bits: Option<u32>,
) -> Result<QuantizedInterpolant> {
    if !(0.0..=1.0).contains(&s) {
        return Err(QacError::Range(format!("s = {s} outside [0, 1]")));
    }
    let alpha = fam.alpha();
    let w0 = block_encode_plain(fam.h0(), alpha)?;
    let w1 = block_encode_plain(fam.h1(), alpha)?;
    let n = w0.unitary_dim;
    let sel = select_oracle(w0.witness(), w1.witness());
    let theta = interpolation_angle(s);
    let (theta_used, bound) = match angle_bits {
        None => (theta, 0.0),
        Some(b) => {
            let q = quantize_turns(theta, b);
            (q, 4.0 * std::f64::consts::PI * alpha * (theta - q).abs())
        }
    };
    let rot = rotation_y(theta_used);
    let rot_adj = transpose_gate(rot); // real rotation: adjoint = transpose
    let witness = control_gate(rot_adj, n) * sel * control_gate(rot, n);
    let d = fam.dim();
    let block = witness.view((0, 0), (d, d)).into_owned();
    let encoded = HermitianOperator::symmetrized(block * Complex64::new(alpha, 0.0))?;
    let exact = fam.evaluate(s)?;
    let perturbation = spectral_norm(&(encoded.matrix() - exact.matrix()));
    if angle_bits.is_none() && perturbation > 1e-9 * alpha.max(1.0) {
        return Err(QacError::Validation(format!(
            "exact interpolant encoding deviates from H(s) by {perturbation:.3e}"
        )));
    }
    if angle_bits.is_some() && perturbation > bound + 1e-9 {
        return Err(QacError::Validation(format!(
            "quantized interpolant perturbation {perturbation:.3e} exceeds its bound {bound:.3e}"
        )));
    }
    let descriptor = BlockEncodingDescriptor::new(encoded, alpha, w0.ancilla_qubits + 1, witness)?;
    Ok(QuantizedInterpolant {
        descriptor,
        perturbation,
        perturbation_bound: bound,
    })
}
