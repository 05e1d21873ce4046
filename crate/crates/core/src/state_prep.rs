//! Amplitude encoding of the lattice weights by a cascade of conditional
//! rotations: exact and angle-quantized variants, the per-level angle tables,
//! and the bit decomposition of rotation angles into elementary factors.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{QacError, Result};
use crate::linalg::StateVector;
use crate::qac::{weight_integral, weights, QacParams};

/// Rotation angles in turns, one vector per qubit level; level `i` holds
/// `2^i` entries, each in `[0, 1/4]`.
#[derive(Debug, Clone)]
pub struct AngleTable {
    pub levels: Vec<Vec<f64>>,
}

impl AngleTable {
    fn validate(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (i, level) in levels.iter().enumerate() {
            if level.len() != 1 << i {
                return Err(QacError::Validation(format!(
                    "level {i} must hold {} angles, found {}",
                    1 << i,
                    level.len()
                )));
            }
            for (k, &a) in level.iter().enumerate() {
                if !(0.0..=0.25 + 1e-12).contains(&a) {
                    return Err(QacError::Validation(format!(
                        "angle ({i},{k}) = {a} outside [0, 1/4]"
                    )));
                }
            }
        }
        Ok(Self { levels })
    }

    pub fn qubit_count(&self) -> usize {
        self.levels.len()
    }
}

fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Conditional-rotation angles for an arbitrary nonnegative weight, given as
/// an interval-mass function on `[0, 2^{ceil(log N)} T/N]`:
/// `eta_{i,k} = arcsin(sqrt(right-half mass / region mass)) / (2 pi)`,
/// zero where the region mass vanishes.
pub fn angles<F>(mass: F, params: &QacParams) -> Result<AngleTable>
where
    F: Fn(f64, f64) -> f64,
{
    let qubits = ceil_log2(params.n_steps);
    let h = params.step();
    let span = (1u64 << qubits) as f64 * h;
    let mut levels = Vec::with_capacity(qubits as usize);
    for i in 0..qubits {
        let regions = 1usize << i;
        let width = span / regions as f64;
        let mut level = Vec::with_capacity(regions);
        for k in 0..regions {
            let left = k as f64 * width;
            let right = left + width;
            let mid = 0.5 * (left + right);
            let total = mass(left, right);
            let upper = mass(mid, right);
            if total < 0.0 || upper < -1e-15 {
                return Err(QacError::Validation(format!(
                    "negative mass on region ({i},{k})"
                )));
            }
            let eta = if total <= 0.0 {
                0.0
            } else {
                (upper.max(0.0) / total).min(1.0).sqrt().asin() / (2.0 * std::f64::consts::PI)
            };
            level.push(eta);
        }
        levels.push(level);
    }
    AngleTable::validate(levels)
}

/// Angles for the default lattice weight: the filter function, taken as zero
/// past the cutoff `T`.
pub fn default_angles(params: &QacParams) -> Result<AngleTable> {
    let t_cut = params.t_total;
    let delta = params.delta;
    angles(
        |a, b| {
            let a = a.min(t_cut);
            let b = b.min(t_cut);
            if b <= a {
                0.0
            } else {
                weight_integral(a, b, delta).unwrap_or(0.0)
            }
        },
        params,
    )
}

/// Runs the rotation cascade: each level-`i` region amplitude splits into
/// `(cos, sin)` of `2 pi eta_{i,k}` over its two children.
pub fn cascade_amplitudes(table: &AngleTable) -> Vec<f64> {
    let mut amps = vec![1.0f64];
    for level in &table.levels {
        let mut next = vec![0.0f64; amps.len() * 2];
        for (k, &a) in amps.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * level[k];
            next[2 * k] = a * phase.cos();
            next[2 * k + 1] = a * phase.sin();
        }
        amps = next;
    }
    amps
}

fn state_from_amplitudes(amps: &[f64]) -> Result<StateVector> {
    let v = DVector::from_iterator(amps.len(), amps.iter().map(|&a| Complex64::new(a, 0.0)));
    let n = v.norm();
    StateVector::new(v / Complex64::new(n.max(1e-300), 0.0))
}

/// The exact cascade output: amplitudes `(sqrt(W_1), ..., sqrt(W_N), 0, ...)`
/// on `2^{ceil(log N)}` slots.
pub fn build_state_exact(params: &QacParams) -> Result<StateVector> {
    if params.n_steps > 1 << 20 {
        return Err(QacError::Range("lattice above 2^20 slots".into()));
    }
    let table = default_angles(params)?;
    let amps = cascade_amplitudes(&table);
    let state = state_from_amplitudes(&amps)?;
    // invariant: the cascade reproduces the square-rooted weights
    let w = weights(params)?;
    for (n, &wn) in w.weights.iter().enumerate() {
        let expect = wn.max(0.0).sqrt();
        let got = state.amplitudes()[n].re;
        if (got - expect).abs() > 1e-12 {
            return Err(QacError::Validation(format!(
                "cascade amplitude {n} deviates from sqrt(W) by {:.3e}",
                (got - expect).abs()
            )));
        }
    }
    Ok(state)
}

/// Cascade with every angle replaced by its nearest `b`-bit fraction of a
/// turn. Returns the state and the certified distance bound
/// `ceil(log N) * 2 pi * 2^{-(b+1)}`.
pub fn build_state_quantized(params: &QacParams, b: u32) -> Result<(StateVector, f64)> {
    if b == 0 {
        return Err(QacError::Range("need at least one angle bit".into()));
    }
    let exact_table = default_angles(params)?;
    let quant_levels: Vec<Vec<f64>> = exact_table
        .levels
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|&eta| crate::family::quantize_turns(eta, b))
                .collect()
        })
        .collect();
    let quant = AngleTable {
        levels: quant_levels,
    };
    let amps = cascade_amplitudes(&quant);
    let state = state_from_amplitudes(&amps)?;
    let qubits = exact_table.qubit_count() as f64;
    let bound = qubits * 2.0 * std::f64::consts::PI * 2f64.powi(-(b as i32 + 1));
    let exact = build_state_exact(params)?;
    let distance = exact.distance(&state);
    if distance > bound + 1e-12 {
        return Err(QacError::Validation(format!(
            "quantized cascade distance {distance:.3e} exceeds its bound {bound:.3e}"
        )));
    }
    Ok((state, bound))
}

/// Product over the set bits `k` of `x` of the rotations `R(2^{k-b})` (angles
/// in turns); equals `R(x/2^b)` exactly by angle additivity, asserted to
/// 1e-14.
pub fn rotation_bit_decomposition(x: u64, b: u32) -> Result<[[f64; 2]; 2]> {
    if b == 0 || x >= (1u64 << b) {
        return Err(QacError::Range(format!("x = {x} needs more than {b} bits")));
    }
    let mut out = [[1.0, 0.0], [0.0, 1.0]];
    for k in 0..b {
        if (x >> k) & 1 == 1 {
            let theta = 2f64.powi(k as i32 - b as i32);
            out = mul2(rot2(theta), out);
        }
    }
    let direct = rot2(x as f64 / (1u64 << b) as f64);
    for r in 0..2 {
        for c in 0..2 {
            if (out[r][c] - direct[r][c]).abs() > 1e-14 {
                return Err(QacError::Validation(format!(
                    "bit-decomposed rotation deviates at ({r},{c}) by {:.3e}",
                    (out[r][c] - direct[r][c]).abs()
                )));
            }
        }
    }
    Ok(out)
}

fn rot2(theta_turns: f64) -> [[f64; 2]; 2] {
    let a = 2.0 * std::f64::consts::PI * theta_turns;
    [[a.cos(), -a.sin()], [a.sin(), a.cos()]]
}

fn mul2(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(delta: f64, t: f64, n: u64) -> QacParams {
        QacParams::new(delta, t, n, 0.1, 1.0, 1.0, 1.0, delta).unwrap()
    }

    #[test]
    fn uniform_weight_angles_are_eighth_turns() {
        let p = params(1.0, 4.0, 8);
        let table = angles(|a, b| b - a, &p).unwrap();
        assert_eq!(table.qubit_count(), 3);
        assert_eq!(table.levels[0].len(), 1);
        for level in &table.levels {
            for &eta in level {
                assert_relative_eq!(eta, 0.125, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn left_supported_weight_gives_zero_top_angle() {
        let p = params(1.0, 4.0, 8);
        // mass only below the global midpoint
        let table = angles(
            |a, b| {
                let cut: f64 = 2.0;
                (b.min(cut) - a.min(cut)).max(0.0)
            },
            &p,
        )
        .unwrap();
        assert_eq!(table.levels[0][0], 0.0);
    }

    #[test]
    fn default_angles_match_quadrature_ratios() {
        let p = params(1.0, 4.0, 8);
        let table = default_angles(&p).unwrap();
        // cross-check one mid-level angle against direct integral ratios
        let h = p.step();
        let width = 4.0 * h; // level 1 regions on [0, 8h]
        for k in 0..2 {
            let left = k as f64 * width;
            let right = left + width;
            let mid = 0.5 * (left + right);
            let num = weight_integral(mid.min(4.0), right.min(4.0), 1.0).unwrap();
            let den = weight_integral(left.min(4.0), right.min(4.0), 1.0).unwrap();
            let expect = (num / den).sqrt().asin() / (2.0 * std::f64::consts::PI);
            assert_relative_eq!(table.levels[1][k], expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn exact_state_matches_weight_roots() {
        let p = params(1.0, 4.0, 8);
        let state = build_state_exact(&p).unwrap();
        let w = weights(&p).unwrap();
        for (n, &wn) in w.weights.iter().enumerate() {
            assert_relative_eq!(state.amplitudes()[n].re, wn.sqrt(), epsilon = 1e-12);
        }
        // nonnegative real amplitudes all the way
        for a in state.amplitudes().iter() {
            assert!(a.re >= -1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn single_slot_state() {
        let p = params(1.0, 3.0, 1);
        let state = build_state_exact(&p).unwrap();
        assert_eq!(state.dim(), 1);
        assert_relative_eq!(state.amplitudes()[0].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn quantized_state_within_bound() {
        let p = params(1.0, 4.0, 8);
        let (state, bound) = build_state_quantized(&p, 6).unwrap();
        let exact = build_state_exact(&p).unwrap();
        assert!(exact.distance(&state) <= bound + 1e-12);
        assert!(bound <= 3.0 * 2.0 * std::f64::consts::PI * 2f64.powi(-7) + 1e-15);
        // generous bits leave (almost) no distance
        let (fine, _) = build_state_quantized(&p, 40).unwrap();
        assert!(exact.distance(&fine) <= 1e-9);
    }

    #[test]
    fn exactly_representable_angles_quantize_losslessly() {
        // uniform weight: all angles are 1/8 turn, representable in 3 bits,
        // so the quantized cascade coincides with the exact one
        let p = params(1.0, 4.0, 4);
        let table = angles(|a, b| b - a, &p).unwrap();
        let quant = AngleTable {
            levels: table
                .levels
                .iter()
                .map(|l| {
                    l.iter()
                        .map(|&e| crate::family::quantize_turns(e, 3))
                        .collect()
                })
                .collect(),
        };
        let exact = state_from_amplitudes(&cascade_amplitudes(&table)).unwrap();
        let rounded = state_from_amplitudes(&cascade_amplitudes(&quant)).unwrap();
        assert!(exact.distance(&rounded) <= 1e-14);
    }

    #[test]
    fn rotation_decomposition_cases() {
        let id = rotation_bit_decomposition(0, 4).unwrap();
        assert_relative_eq!(id[0][0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(id[0][1], 0.0, epsilon = 1e-15);
        // x = 2^{b-1}: rotation by half a turn = diag(-1, -1)
        let half = rotation_bit_decomposition(8, 4).unwrap();
        assert_relative_eq!(half[0][0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(half[1][1], -1.0, epsilon = 1e-14);
        // x = 5, b = 4: R(1/16) R(4/16) = R(5/16)
        let five = rotation_bit_decomposition(5, 4).unwrap();
        let direct = rot2(5.0 / 16.0);
        for r in 0..2 {
            for c in 0..2 {
                assert_relative_eq!(five[r][c], direct[r][c], epsilon = 1e-14);
            }
        }
        assert!(rotation_bit_decomposition(16, 4).is_err());
    }
}
