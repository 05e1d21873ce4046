//! The Gaussian-integral filter function, the exact continuation operator
//! built from it, the finite (T, N) discretisation, the residual and
//! discretisation error bounds, and sufficient parameter selection.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QacError, Result};
use crate::family::InterpolationFamily;
use crate::linalg::{eig_hermitian, spectral_norm, CMatrix, HermitianOperator};

/// `(Delta, T, N)` plus the error target and norm bounds they were chosen for.
#[derive(Debug, Clone)]
pub struct QacParams {
    /// Filter width Delta (energy units), > 0.
    pub delta: f64,
    /// Integration cutoff T (time units), > 0.
    pub t_total: f64,
    /// Number of lattice points per half-axis.
    pub n_steps: u64,
    /// Error target in (0, 1).
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Bound on the path-averaged derivative norm.
    pub h_prime_avg: f64,
    /// Gap lower bound, > 0.
    pub gamma: f64,
}

impl QacParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        delta: f64,
        t_total: f64,
        n_steps: u64,
        epsilon: f64,
        alpha: f64,
        beta: f64,
        h_prime_avg: f64,
        gamma: f64,
    ) -> Result<Self> {
        if delta <= 0.0 || t_total <= 0.0 || n_steps == 0 {
            return Err(QacError::Range(
                "delta, T must be positive and N >= 1".into(),
            ));
        }
        if gamma > 0.0 && delta > gamma + 1e-12 {
            return Err(QacError::Range(format!(
                "delta = {delta} exceeds the gap bound gamma = {gamma}"
            )));
        }
        Ok(Self {
            delta,
            t_total,
            n_steps,
            epsilon,
            alpha,
            beta,
            h_prime_avg,
            gamma,
        })
    }

    /// Lattice spacing `T / N`.
    pub fn step(&self) -> f64 {
        self.t_total / self.n_steps as f64
    }

    /// Normalization `N_{Delta,T} = int_0^T W_Delta`.
    pub fn normalization(&self) -> f64 {
        weight_antiderivative(self.t_total, self.delta)
    }
}

/// Sufficient `(Delta, T, N)` for a target error `epsilon`, splitting the
/// error budget three ways: the filter-width term, the time-tail term, and
/// the lattice term each get `epsilon / 3`.
pub fn choose_parameters(
    alpha: f64,
    h_prime_avg: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<QacParams> {
    if alpha <= 0.0 || h_prime_avg <= 0.0 || gamma <= 0.0 {
        return Err(QacError::Range("alpha, <||H'||>, gamma must be positive".into()));
    }
    if !(0.0..1.0).contains(&epsilon) || epsilon == 0.0 {
        return Err(QacError::Range("epsilon must lie in (0, 1)".into()));
    }
    let log1 = (3.0 * h_prime_avg / (gamma * epsilon)).ln();
    if log1 <= 0.0 {
        return Err(QacError::Infeasible(format!(
            "3 <||H'||> / (gamma epsilon) = {:.3e} <= 1",
            3.0 * h_prime_avg / (gamma * epsilon)
        )));
    }
    let delta = gamma / (2.0 * log1).sqrt();
    // exp(-(delta T)^2 / 2) <= delta eps / (6 sqrt(2 pi) <||H'||>) needs the
    // factor 2 inside the square root
    let log2 = (6.0 * (2.0 * std::f64::consts::PI).sqrt() * h_prime_avg / (delta * epsilon)).ln();
    if log2 <= 0.0 {
        return Err(QacError::Infeasible(
            "time-tail logarithm is non-positive".into(),
        ));
    }
    let t_total = (2.0 * log2).sqrt() / delta;
    if t_total * delta < 1.0 {
        return Err(QacError::Infeasible(format!(
            "T Delta = {:.3} < 1; error target too loose for these norms",
            t_total * delta
        )));
    }
    let n_f = (6.0 * (2.0 / std::f64::consts::PI).sqrt() * alpha * h_prime_avg * t_total
        / (delta * epsilon))
        .ceil();
    if !n_f.is_finite() || n_f < 1.0 {
        return Err(QacError::Infeasible("lattice count overflowed".into()));
    }
    QacParams::new(
        delta,
        t_total,
        n_f as u64,
        epsilon,
        alpha,
        h_prime_avg,
        h_prime_avg,
        gamma,
    )
}

/// The filter function: `W(t) = erfc(delta t / sqrt(2)) / 2` for `t >= 0`,
/// extended oddly to `t < 0`.
pub fn filter_w(t: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    let half = 0.5 * libm::erfc(delta * t.abs() / std::f64::consts::SQRT_2);
    if t >= 0.0 {
        half
    } else {
        -half
    }
}

/// `int_0^t W(u) du` in closed form:
/// `[u erfc(delta u / sqrt(2)) - sqrt(2/pi)/delta (e^{-delta^2 u^2/2} - 1)] / 2`.
/// The Gaussian term enters with a minus sign; differentiating confirms the
/// derivative is `W(t)` and the `t -> inf` limit is `1/(sqrt(2 pi) delta)`.
pub fn weight_antiderivative(t: f64, delta: f64) -> f64 {
    if t.is_infinite() {
        return 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * delta);
    }
    let g = (-0.5 * delta * delta * t * t).exp();
    0.5 * (t * libm::erfc(delta * t / std::f64::consts::SQRT_2)
        - (2.0 / std::f64::consts::PI).sqrt() / delta * (g - 1.0))
}

/// `int_{t1}^{t2} W(t) dt` for `0 <= t1 <= t2` (`t2` may be infinite).
pub fn weight_integral(t1: f64, t2: f64, delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(QacError::Range("delta must be positive".into()));
    }
    if t1 < 0.0 || t2 < t1 {
        return Err(QacError::Range(format!(
            "need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}"
        )));
    }
    Ok((weight_antiderivative(t2, delta) - weight_antiderivative(t1, delta)).max(0.0))
}

/// Normalized lattice weights `W_n = int_{(n-1)T/N}^{nT/N} W / N_{Delta,T}`.
#[derive(Debug, Clone)]
pub struct WeightTable {
    /// `W_1 .. W_N`, nonnegative, summing to 1.
    pub weights: Vec<f64>,
    /// `N_{Delta,T}`.
    pub normalization: f64,
}

/// Builds the weight table for `params`, validating the sum and monotonicity
/// invariants.
pub fn weights(params: &QacParams) -> Result<WeightTable> {
    let n = params.n_steps;
    let h = params.step();
    let delta = params.delta;
    let norm = params.normalization();
    let norm_cap = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * delta);
    if norm > norm_cap * (1.0 + 1e-12) {
        return Err(QacError::Validation(format!(
            "normalization {norm} exceeds its closed-form cap {norm_cap}"
        )));
    }
    let mut w = Vec::with_capacity(n as usize);
    let mut prev_f = 0.0;
    // Kahan sum keeps the unit-sum invariant at machine precision for large N
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut prev_w = f64::INFINITY;
    for i in 1..=n {
        let f = weight_antiderivative(i as f64 * h, delta);
        let wi = ((f - prev_f) / norm).max(0.0);
        prev_f = f;
        if wi > prev_w + 1e-13 {
            return Err(QacError::Validation(format!(
                "weights must be nonincreasing, violated at n = {i}"
            )));
        }
        prev_w = wi;
        let y = wi - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        w.push(wi);
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(QacError::Validation(format!(
            "weight sum deviates from 1 by {:.3e}",
            (sum - 1.0).abs()
        )));
    }
    Ok(WeightTable {
        weights: w,
        normalization: norm,
    })
}

/// `(1 - e^{-w^2/(2 delta^2)}) / w`, stable near `w = 0`.
fn filter_response(omega: f64, delta: f64) -> f64 {
    let u = omega * omega / (2.0 * delta * delta);
    if u < 1e-4 {
        // series in u keeps full relative accuracy through the removable zero
        omega / (2.0 * delta * delta) * (1.0 - u / 2.0 + u * u / 6.0)
    } else {
        (1.0 - (-u).exp()) / omega
    }
}

/// The exact continuation operator at `(s, delta)` via its spectral closed
/// form: in the eigenbasis of `H(s)`, entry `(j, l)` is
/// `i H'_{jl} (1 - e^{-w^2/(2 delta^2)}) / w` with `w = E_j - E_l`, zero on
/// the diagonal.
pub fn exact_qac(fam: &InterpolationFamily, s: f64, delta: f64) -> Result<HermitianOperator> {
    if delta <= 0.0 {
        return Err(QacError::Range("delta must be positive".into()));
    }
    let dec = fam.spectral(s)?;
    let d = fam.dim();
    let hp = fam.derivative();
    let hp_eig = dec.eigenvectors.adjoint() * hp.matrix() * &dec.eigenvectors;
    let mut out = CMatrix::zeros(d, d);
    for j in 0..d {
        for l in 0..d {
            if j == l {
                continue;
            }
            let omega = dec.eigenvalues[j] - dec.eigenvalues[l];
            out[(j, l)] = Complex64::new(0.0, filter_response(omega, delta)) * hp_eig[(j, l)];
        }
    }
    let back = &dec.eigenvectors * out * dec.eigenvectors.adjoint();
    HermitianOperator::symmetrized(back)
}

/// Largest angular frequency a family can produce: twice the larger of the
/// endpoint norms, with head-room.
fn omega_bound(fam: &InterpolationFamily) -> f64 {
    2.0 * fam.h0().operator_norm().max(fam.h1().operator_norm()) * (1.0 + 1e-9) + 1e-12
}

const DIRECT_KERNEL_LIMIT: u64 = 1 << 16;
const KERNEL_SIZE_CAP: u64 = 1 << 27;

/// Precomputed evaluator for the lattice sine sum
/// `S(w) = sum_{n=1}^{N} a_n sin(w n T/N)` with
/// `a_n = int_{(n-1)T/N}^{nT/N} W`, which fully determines the discretised
/// continuation operator. Small lattices are summed directly; large lattices
/// go through a Chebyshev interpolant built from exact sums at Chebyshev
/// nodes and certified against exact sums at probe frequencies.
#[derive(Debug, Clone)]
pub struct QacKernel {
    delta: f64,
    t_total: f64,
    n_steps: u64,
    h: f64,
    /// `N_{Delta,T}` = sum of the raw weights.
    pub normalization: f64,
    repr: KernelRepr,
}

#[derive(Debug, Clone)]
enum KernelRepr {
    Direct { raw_weights: Vec<f64> },
    Chebyshev { omega_max: f64, coeffs: Vec<f64> },
}

impl QacKernel {
    /// Builds the evaluator for frequencies up to `omega_max` in magnitude.
    pub fn build(params: &QacParams, omega_max: f64) -> Result<Self> {
        let n = params.n_steps;
        if n > KERNEL_SIZE_CAP {
            return Err(QacError::Infeasible(format!(
                "lattice size {n} exceeds the kernel cap {KERNEL_SIZE_CAP}"
            )));
        }
        let h = params.step();
        let delta = params.delta;
        let mut raw = Vec::with_capacity(n as usize);
        let mut prev_f = 0.0;
        for i in 1..=n {
            let f = weight_antiderivative(i as f64 * h, delta);
            raw.push((f - prev_f).max(0.0));
            prev_f = f;
        }
        let normalization = params.normalization();
        if n <= DIRECT_KERNEL_LIMIT {
            return Ok(Self {
                delta,
                t_total: params.t_total,
                n_steps: n,
                h,
                normalization,
                repr: KernelRepr::Direct { raw_weights: raw },
            });
        }

        let band = omega_max * params.t_total;
        let mut points = ((band + 16.0 * band.cbrt() + 64.0).ceil() as usize).max(129);
        let tol = 1e-12 * normalization.max(1e-300);
        loop {
            let coeffs = chebyshev_fit(&raw, h, omega_max, points);
            let worst = (0..33)
                .map(|p| {
                    let w = omega_max * (0.013 + 0.97 * p as f64 / 32.0);
                    let exact = direct_sine_sum(&raw, h, w);
                    let fitted = clenshaw_odd(&coeffs, w / omega_max);
                    (exact - fitted).abs()
                })
                .fold(0.0f64, f64::max);
            if worst <= tol {
                return Ok(Self {
                    delta,
                    t_total: params.t_total,
                    n_steps: n,
                    h,
                    normalization,
                    repr: KernelRepr::Chebyshev { omega_max, coeffs },
                });
            }
            points *= 2;
            if points > (1 << 14) {
                return Err(QacError::Convergence {
                    context: "lattice kernel interpolation".into(),
                    residual: worst,
                    tolerance: tol,
                });
            }
        }
    }

    /// Builds the evaluator sized for every frequency `fam` can produce.
    pub fn for_family(params: &QacParams, fam: &InterpolationFamily) -> Result<Self> {
        Self::build(params, omega_bound(fam))
    }

    pub fn n_steps(&self) -> u64 {
        self.n_steps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    /// `S(w)`; odd in `w`.
    pub fn sine_sum(&self, omega: f64) -> f64 {
        match &self.repr {
            KernelRepr::Direct { raw_weights } => direct_sine_sum(raw_weights, self.h, omega),
            KernelRepr::Chebyshev { omega_max, coeffs } => {
                debug_assert!(omega.abs() <= *omega_max * (1.0 + 1e-9));
                clenshaw_odd(coeffs, omega / omega_max)
            }
        }
    }
}

/// Exact `sum a_n sin(w n h)` by incremental phase rotation, re-synchronised
/// every 4096 steps to stop drift over very long lattices.
fn direct_sine_sum(raw_weights: &[f64], h: f64, omega: f64) -> f64 {
    let phi = omega * h;
    let (sin_p, cos_p) = phi.sin_cos();
    let mut acc = 0.0f64;
    let mut comp = 0.0f64;
    let mut s = 0.0f64; // sin(w n h) at n = 0
    let mut c = 1.0f64;
    for (idx, &a) in raw_weights.iter().enumerate() {
        let n = idx as u64 + 1;
        if n.is_multiple_of(4096) {
            let (sn, cn) = (phi * n as f64).sin_cos();
            s = sn;
            c = cn;
        } else {
            let s_new = s * cos_p + c * sin_p;
            let c_new = c * cos_p - s * sin_p;
            s = s_new;
            c = c_new;
        }
        let y = a * s - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    acc
}

/// Chebyshev coefficients (first-kind nodes) of `x -> S(omega_max x)`,
/// evaluated from exact lattice sums in parallel.
fn chebyshev_fit(raw_weights: &[f64], h: f64, omega_max: f64, points: usize) -> Vec<f64> {
    let values: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|j| {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / points as f64;
            direct_sine_sum(raw_weights, h, omega_max * theta.cos())
        })
        .collect();
    let mut coeffs = vec![0.0f64; points];
    for (k, ck) in coeffs.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, v) in values.iter().enumerate() {
            let theta = std::f64::consts::PI * (j as f64 + 0.5) / points as f64;
            acc += v * (k as f64 * theta).cos();
        }
        *ck = 2.0 * acc / points as f64;
    }
    coeffs[0] *= 0.5;
    coeffs
}

/// Clenshaw evaluation of a Chebyshev series at `x` in `[-1, 1]`.
fn clenshaw_odd(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0f64;
    let mut b2 = 0.0f64;
    for &ck in coeffs.iter().rev() {
        let b0 = 2.0 * x * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    b1 - x * b2
}

/// The discretised continuation operator
/// `D = sum_{n=+-1..+-N} (signed lattice weight) e^{iH(s) nT/N} H' e^{-iH(s) nT/N}`
/// evaluated through the lattice sine sum in the eigenbasis of `H(s)`.
pub fn discretized_qac_with(
    fam: &InterpolationFamily,
    s: f64,
    kernel: &QacKernel,
) -> Result<HermitianOperator> {
    let dec = fam.spectral(s)?;
    let d = fam.dim();
    let hp = fam.derivative();
    let hp_eig = dec.eigenvectors.adjoint() * hp.matrix() * &dec.eigenvectors;
    let mut out = CMatrix::zeros(d, d);
    for j in 0..d {
        for l in 0..d {
            if j == l {
                continue;
            }
            let omega = dec.eigenvalues[j] - dec.eigenvalues[l];
            out[(j, l)] = Complex64::new(0.0, 2.0 * kernel.sine_sum(omega)) * hp_eig[(j, l)];
        }
    }
    let back = &dec.eigenvectors * out * dec.eigenvectors.adjoint();
    HermitianOperator::symmetrized(back)
}

/// Convenience wrapper that builds a fresh kernel; prefer
/// [`QacKernel::for_family`] + [`discretized_qac_with`] when evaluating at
/// many `s` values.
pub fn discretized_qac(
    fam: &InterpolationFamily,
    s: f64,
    params: &QacParams,
) -> Result<HermitianOperator> {
    let kernel = QacKernel::for_family(params, fam)?;
    discretized_qac_with(fam, s, &kernel)
}

/// Literal term-by-term evaluation of the defining sum, one matrix
/// conjugation per lattice point. Independent of the kernel path; test and
/// certification oracle only, cost `O(N d^3)`.
pub fn discretized_qac_reference(
    fam: &InterpolationFamily,
    s: f64,
    params: &QacParams,
) -> Result<HermitianOperator> {
    let h_s = fam.evaluate(s)?;
    let dec = eig_hermitian(&h_s)?;
    let hp = fam.derivative();
    let d = fam.dim();
    let step = params.step();
    let mut acc = CMatrix::zeros(d, d);
    for n in 1..=params.n_steps {
        let a_n = weight_integral((n - 1) as f64 * step, n as f64 * step, params.delta)?;
        let t_n = n as f64 * step;
        let u = crate::linalg::expm_from_decomposition(&dec, -t_n); // e^{iH t_n}
        let conj_pos = &u * hp.matrix() * u.adjoint();
        // the n < 0 weight integral is the negative mirror of the n > 0 one
        let conj_neg = u.adjoint() * hp.matrix() * &u;
        acc += (conj_pos - conj_neg) * Complex64::new(a_n, 0.0);
    }
    HermitianOperator::symmetrized(acc)
}

/// A measured quantity `lhs` and the bound `rhs` it must not exceed.
#[derive(Debug, Clone, Copy)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

/// Residual of the continuation generator on eigenstate `k`:
/// `lhs = || d/ds psi_k - i D(s) psi_k ||` with the derivative from
/// first-order perturbation theory, against
/// `rhs = exp(-gap^2/(2 delta^2)) ||H'|| / gap`.
pub fn qac_residual(
    fam: &InterpolationFamily,
    s: f64,
    k: usize,
    delta: f64,
) -> Result<BoundCheck> {
    let dec = fam.spectral(s)?;
    let gap = dec.gap_at(k)?;
    if gap <= 1e-8 {
        return Err(QacError::GapViolation(format!(
            "gap {gap:.3e} at s = {s}, k = {k} below 1e-8"
        )));
    }
    let d = fam.dim();
    let hp = fam.derivative();
    let hp_eig = dec.eigenvectors.adjoint() * hp.matrix() * &dec.eigenvectors;
    // component j of (d/ds psi_k - i D psi_k) in the eigenbasis collapses to
    // H'_{jk} e^{-w^2/(2 delta^2)} / (E_k - E_j)
    let mut lhs_sq = 0.0;
    for j in 0..d {
        if j == k {
            continue;
        }
        let omega = dec.eigenvalues[k] - dec.eigenvalues[j];
        let damp = (-omega * omega / (2.0 * delta * delta)).exp();
        lhs_sq += (hp_eig[(j, k)].norm() * damp / omega).powi(2);
    }
    let rhs = (-gap * gap / (2.0 * delta * delta)).exp() * hp.operator_norm() / gap;
    Ok(BoundCheck {
        lhs: lhs_sq.sqrt(),
        rhs,
    })
}

/// `lhs = ||exact - discretised||` against the tail-plus-lattice bound
/// `rhs = 2 sqrt(2 pi) ||H'|| e^{-d^2T^2/2}/d + 2 sqrt(2/pi) ||H|| ||H'|| T/(d N)`.
pub fn discretization_check(
    fam: &InterpolationFamily,
    s: f64,
    params: &QacParams,
) -> Result<BoundCheck> {
    let exact = exact_qac(fam, s, params.delta)?;
    let disc = discretized_qac(fam, s, params)?;
    let lhs = spectral_norm(&(exact.matrix() - disc.matrix()));
    let hp_norm = fam.derivative().operator_norm();
    let h_norm = fam.evaluate(s)?.operator_norm();
    let delta = params.delta;
    let t = params.t_total;
    let tail = 2.0
        * (2.0 * std::f64::consts::PI).sqrt()
        * hp_norm
        * (-0.5 * delta * delta * t * t).exp()
        / delta;
    let lattice = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * h_norm * hp_norm * t
        / (delta * params.n_steps as f64);
    Ok(BoundCheck {
        lhs,
        rhs: tail + lattice,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli;
    use approx::assert_relative_eq;

    fn zx_family() -> InterpolationFamily {
        InterpolationFamily::with_measured_bounds(pauli::z(), pauli::x()).unwrap()
    }

    /// Adaptive Simpson quadrature, test oracle.
    #[allow(clippy::too_many_arguments)]
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec<F: Fn(f64) -> f64 + Copy>(
            f: F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let m = 0.5 * (a + b);
        let fa = f(a);
        let fm = f(m);
        let fb = f(b);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn filter_at_zero_is_half() {
        assert_relative_eq!(filter_w(0.0, 1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn filter_is_odd() {
        let v = filter_w(0.7, 1.3);
        assert_relative_eq!(filter_w(-0.7, 1.3), -v, epsilon = 1e-15);
    }

    #[test]
    fn filter_value_matches_tail_quadrature() {
        // W(t) = int_t^inf w; quadrature of the Gaussian density as oracle
        let delta = 1.0f64;
        let w_density =
            |t: f64| delta / (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * delta * delta * t * t).exp();
        let oracle = simpson(w_density, 1.0, 14.0, 1e-14);
        assert_relative_eq!(filter_w(1.0, 1.0), oracle, epsilon = 1e-12);
        assert_relative_eq!(filter_w(1.0, 1.0), 0.15865525393145707, epsilon = 1e-10);
    }

    #[test]
    fn weight_integral_cases() {
        assert_eq!(weight_integral(0.3, 0.3, 1.2).unwrap(), 0.0);
        let delta = 0.8;
        let total = weight_integral(0.0, f64::INFINITY, delta).unwrap();
        assert_relative_eq!(
            total,
            1.0 / ((2.0 * std::f64::consts::PI).sqrt() * delta),
            epsilon = 1e-14
        );
        assert!(weight_integral(1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn weight_integral_matches_adaptive_quadrature() {
        let val = weight_integral(0.0, 1.0, 1.0).unwrap();
        let oracle = simpson(|t| filter_w(t, 1.0), 0.0, 1.0, 1e-13);
        assert!((val - oracle).abs() < 1e-10, "{val} vs {oracle}");
    }

    #[test]
    fn weights_table_invariants() {
        let params = QacParams::new(1.0, 2.0, 2, 0.1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let table = weights(&params).unwrap();
        assert_eq!(table.weights.len(), 2);
        assert!(table.weights[0] > table.weights[1]);
        assert!(table.weights[1] > 0.0);
        assert_relative_eq!(table.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        // each entry against quadrature
        for (i, &w) in table.weights.iter().enumerate() {
            let oracle = simpson(|t| filter_w(t, 1.0), i as f64, i as f64 + 1.0, 1e-13)
                / table.normalization;
            assert!((w - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_single_step() {
        let params = QacParams::new(1.0, 3.0, 1, 0.1, 1.0, 1.0, 1.0, 1.0).unwrap();
        let table = weights(&params).unwrap();
        assert_relative_eq!(table.weights[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn weights_concentrate_for_wide_filter() {
        // Delta T >> 1: the first cell carries nearly all mass
        let params = QacParams::new(8.0, 4.0, 8, 0.1, 1.0, 1.0, 1.0, 8.0).unwrap();
        let table = weights(&params).unwrap();
        assert!(table.weights[0] > 0.999);
    }

    #[test]
    fn exact_qac_vanishes_without_drive() {
        let fam = InterpolationFamily::with_measured_bounds(pauli::z(), pauli::z()).unwrap();
        let d = exact_qac(&fam, 0.4, 1.0).unwrap();
        assert!(d.operator_norm() < 1e-14);
    }

    #[test]
    fn exact_qac_vanishes_for_commuting_diagonal_family() {
        let h0 = HermitianOperator::from_real_rows(2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let h1 = HermitianOperator::from_real_rows(2, &[0.3, 0.0, 0.0, 2.0]).unwrap();
        let fam = InterpolationFamily::with_measured_bounds(h0, h1).unwrap();
        let d = exact_qac(&fam, 0.5, 0.7).unwrap();
        assert!(d.operator_norm() < 1e-14);
    }

    #[test]
    fn exact_qac_zx_closed_form() {
        // H(0) = Z, H' = X - Z: off-diagonal magnitude (1 - e^{-2})/2 in the
        // eigenbasis, i.e. 0.432332... times the Y Pauli there
        let fam = zx_family();
        let d = exact_qac(&fam, 0.0, 1.0).unwrap();
        let dec = fam.spectral(0.0).unwrap();
        let d_eig = dec.eigenvectors.adjoint() * d.matrix() * &dec.eigenvectors;
        let expect = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_relative_eq!(expect, 0.432332358381693, epsilon = 1e-12);
        assert!(d_eig[(0, 0)].norm() < 1e-12);
        assert!(d_eig[(1, 1)].norm() < 1e-12);
        assert_relative_eq!(d_eig[(0, 1)].norm(), expect, epsilon = 1e-10);
        // entry (0,1) is -i * expect: matches expect * Y in this ordering
        assert_relative_eq!(d_eig[(0, 1)].im, -expect, epsilon = 1e-10);
    }

    #[test]
    fn exact_qac_matches_time_quadrature_oracle() {
        // independent oracle: int W(t) e^{iHt} H' e^{-iHt} dt truncated at
        // |t| = 12/delta, Simpson on each entry via matrix samples
        let fam = zx_family();
        let delta = 1.0;
        let s = 0.0;
        let dec = fam.spectral(s).unwrap();
        let hp = fam.derivative();
        let cutoff = 12.0 / delta;
        let steps = 3000usize;
        let dt = cutoff / steps as f64;
        let mut acc = CMatrix::zeros(2, 2);
        // the filter is odd with a jump at t = 0, so fold the negative
        // half-axis into the positive one and Simpson the smooth integrand
        for i in 0..=steps {
            let t = i as f64 * dt;
            let coef = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let u = crate::linalg::expm_from_decomposition(&dec, -t);
            let fwd = &u * hp.matrix() * u.adjoint();
            let bwd = u.adjoint() * hp.matrix() * &u;
            acc += (fwd - bwd) * Complex64::new(coef * filter_w(t, delta) * dt / 3.0, 0.0);
        }
        let d = exact_qac(&fam, s, delta).unwrap();
        assert!(spectral_norm(&(d.matrix() - acc)) < 1e-8);
    }

    #[test]
    fn discretized_qac_zero_drive() {
        let fam = InterpolationFamily::with_measured_bounds(pauli::x(), pauli::x()).unwrap();
        let params = QacParams::new(1.0, 4.0, 32, 0.1, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(discretized_qac(&fam, 0.2, &params).unwrap().operator_norm() < 1e-14);
    }

    #[test]
    fn discretized_qac_matches_reference_summation() {
        let fam = zx_family();
        for (t, n) in [(2.0, 7u64), (4.0, 33), (0.5, 1)] {
            let params = QacParams::new(0.9, t, n, 0.1, 1.0, 2.0, 2.0, 0.9).unwrap();
            let fast = discretized_qac(&fam, 0.3, &params).unwrap();
            let refr = discretized_qac_reference(&fam, 0.3, &params).unwrap();
            assert!(
                spectral_norm(&(fast.matrix() - refr.matrix())) < 1e-12,
                "mismatch at T={t}, N={n}"
            );
        }
    }

    #[test]
    fn discretized_qac_single_step_short_time() {
        // N = 1, T -> 0+: a single conjugation pair with weight int_0^T W
        let fam = zx_family();
        let t = 1e-4;
        let params = QacParams::new(1.0, t, 1, 0.1, 1.0, 2.0, 2.0, 1.0).unwrap();
        let fast = discretized_qac(&fam, 0.0, &params).unwrap();
        let refr = discretized_qac_reference(&fam, 0.0, &params).unwrap();
        assert!(spectral_norm(&(fast.matrix() - refr.matrix())) < 1e-13);
        // weight ~ T/2 as T -> 0, and the commutator structure survives
        let a1 = weight_integral(0.0, t, 1.0).unwrap();
        assert_relative_eq!(a1, t / 2.0, epsilon = 1e-6);
        assert!(fast.operator_norm() > 0.0);
    }

    #[test]
    fn discretized_norm_bound() {
        let fam = zx_family();
        let params = QacParams::new(0.8, 6.0, 128, 0.1, 1.0, 2.0, 2.0, 0.8).unwrap();
        let d = discretized_qac(&fam, 0.5, &params).unwrap();
        let cap = 2.0 * params.normalization() * fam.beta();
        assert!(d.operator_norm() <= cap + 1e-9);
    }

    #[test]
    fn kernel_direct_vs_chebyshev_agree() {
        // force the table path with a lattice above the direct limit
        let params = QacParams::new(0.5, 8.0, (1 << 16) + 11, 0.1, 1.0, 2.0, 2.0, 0.5).unwrap();
        let kernel = QacKernel::build(&params, 4.0).unwrap();
        let mut raw = Vec::new();
        let h = params.step();
        let mut prev = 0.0;
        for i in 1..=params.n_steps {
            let f = weight_antiderivative(i as f64 * h, params.delta);
            raw.push(f - prev);
            prev = f;
        }
        for p in 0..9 {
            let w = -4.0 + p as f64;
            let exact = direct_sine_sum(&raw, h, w);
            assert!((kernel.sine_sum(w) - exact).abs() < 1e-11, "omega = {w}");
        }
    }

    #[test]
    fn residual_zero_drive() {
        let fam = InterpolationFamily::with_measured_bounds(pauli::z(), pauli::z()).unwrap();
        let chk = qac_residual(&fam, 0.1, 0, 0.5).unwrap();
        assert!(chk.lhs < 1e-14);
        assert!(chk.rhs < 1e-14);
    }

    #[test]
    fn residual_commuting_diagonal() {
        let h0 = HermitianOperator::from_real_rows(2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let h1 = HermitianOperator::from_real_rows(2, &[0.5, 0.0, 0.0, 3.0]).unwrap();
        let fam = InterpolationFamily::with_measured_bounds(h0, h1).unwrap();
        let chk = qac_residual(&fam, 0.5, 0, 0.4).unwrap();
        assert!(chk.lhs < 1e-14);
        assert!(chk.holds(1e-9));
    }

    #[test]
    fn residual_bound_zx() {
        let fam = zx_family();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            let gap = fam.gap(s, 0).unwrap();
            let chk = qac_residual(&fam, s, 0, gap / 2.0).unwrap();
            assert!(chk.holds(1e-9), "s = {s}: {} > {}", chk.lhs, chk.rhs);
        }
    }

    #[test]
    fn discretization_bound_zx() {
        let fam = zx_family();
        let mut prev_lhs = f64::INFINITY;
        for n in [64u64, 512] {
            let params = QacParams::new(1.0, 6.0, n, 0.1, 1.0, 2.0, 2.0, 1.0).unwrap();
            let chk = discretization_check(&fam, 0.0, &params).unwrap();
            assert!(chk.holds(1e-9), "N = {n}: {} > {}", chk.lhs, chk.rhs);
            assert!(chk.lhs < prev_lhs);
            prev_lhs = chk.lhs;
        }
        // doubling T collapses the tail term while the bound keeps holding
        let params = QacParams::new(1.0, 12.0, 512, 0.1, 1.0, 2.0, 2.0, 1.0).unwrap();
        let tail = 2.0 * (2.0 * std::f64::consts::PI).sqrt() * fam.derivative().operator_norm()
            * (-0.5 * 144.0f64).exp();
        assert!(tail < 1e-7);
        assert!(discretization_check(&fam, 0.0, &params).unwrap().holds(1e-9));
    }

    #[test]
    fn choose_parameters_closed_form() {
        let p = choose_parameters(1.0, 1.0, 0.5, 1e-3).unwrap();
        assert_relative_eq!(p.delta, 0.5 / (2.0 * 6000.0f64.ln()).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(p.delta, 0.11986, epsilon = 1e-5);
        assert!(p.t_total * p.delta >= 1.0);
    }

    #[test]
    fn choose_parameters_monotone_in_epsilon() {
        let p1 = choose_parameters(1.0, 1.0, 0.5, 1e-2).unwrap();
        let p2 = choose_parameters(1.0, 1.0, 0.5, 1e-3).unwrap();
        assert!(p2.n_steps >= 10 * p1.n_steps);
        assert!(p2.t_total >= p1.t_total);
        assert!(p2.delta <= p1.delta);
    }

    #[test]
    fn choose_parameters_gap_scaling() {
        // halving gamma at least quadruples the leading lattice estimate
        // up to the slowly varying log factors
        let p1 = choose_parameters(1.0, 1.0, 0.5, 1e-3).unwrap();
        let p2 = choose_parameters(1.0, 1.0, 0.25, 1e-3).unwrap();
        assert!(p2.n_steps as f64 >= 3.5 * p1.n_steps as f64);
    }

    #[test]
    fn choose_parameters_rejects_infeasible() {
        assert!(choose_parameters(1.0, 1e-6, 10.0, 0.9).is_err());
    }
}
