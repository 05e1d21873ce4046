//! Theorem-level invariants that tie several modules together: the flow
//! generated by the exact continuation operator tracks eigenstates within the
//! integrated residual bound, the discretised flow obeys the composite
//! three-term bound under the sufficient parameter choice, and the segmented
//! Dyson pipeline stays within its per-segment certificates end to end.

use qac_core::dyson::run_algorithm1;
use qac_core::ground_state::run_algorithm2;
use qac_core::linalg::{ordered_exponential_converged, pauli, spectral_norm};
use qac_core::models::random_gapped_family;
use qac_core::qac::{
    choose_parameters, discretized_qac_with, exact_qac, qac_residual, QacKernel,
};
use qac_core::InterpolationFamily;

fn zx_family() -> InterpolationFamily {
    InterpolationFamily::with_measured_bounds(pauli::z(), pauli::x()).unwrap()
}

/// Trapezoid rule on a uniform grid.
fn trapezoid(values: &[f64], step: f64) -> f64 {
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * values[0] + inner + 0.5 * values[values.len() - 1])
}

#[test]
fn exact_flow_tracks_eigenstate_within_integrated_residual() {
    for (fam, k) in [
        (zx_family(), 0usize),
        (random_gapped_family(4, 0.4, 21, 1).unwrap(), 1),
    ] {
        let delta = fam.gap_scan(k, 101).unwrap().1 / 2.0;
        let tol = 1e-6;
        let flow = ordered_exponential_converged(
            |s| exact_qac(&fam, s, delta),
            0.0,
            1.0,
            64,
            tol,
            22,
        )
        .unwrap();
        let start = fam.spectral(0.0).unwrap().state(k);
        let target = fam.spectral(1.0).unwrap().state(k);
        let moved = {
            let v = &flow.product * start.amplitudes();
            qac_core::StateVector::new_sub_normalized(v / num_complex::Complex64::new(1.0, 0.0))
                .unwrap()
        };
        let lhs = target.distance_aligned(&moved);
        // integrate the residual bound over the path
        let grid: Vec<f64> = (0..=100)
            .map(|i| {
                let s = i as f64 / 100.0;
                qac_residual(&fam, s, k, delta).unwrap().rhs
            })
            .collect();
        let rhs = trapezoid(&grid, 0.01);
        assert!(
            lhs <= rhs + 2.0 * tol,
            "flow error {lhs} exceeds integrated residual {rhs}"
        );
    }
}

#[test]
fn discretized_flow_obeys_composite_bound() {
    // the three-term composite bound under the sufficient parameter choice,
    // at two error targets
    let fam = zx_family();
    for eps in [1e-2, 1e-3] {
        let gamma = fam.gap_scan(0, 101).unwrap().1;
        let params = choose_parameters(fam.alpha(), fam.beta(), gamma, eps).unwrap();
        let kernel = QacKernel::for_family(&params, &fam).unwrap();
        let tol = eps / 20.0;
        let flow = ordered_exponential_converged(
            |s| discretized_qac_with(&fam, s, &kernel),
            0.0,
            1.0,
            256,
            tol,
            20,
        )
        .unwrap();
        let start = fam.spectral(0.0).unwrap().state(0);
        let target = fam.spectral(1.0).unwrap().state(0);
        let moved = &flow.product * start.amplitudes();
        let lhs = {
            let ov = target.amplitudes().dotc(&moved).norm();
            (1.0 + moved.norm_squared() - 2.0 * ov).max(0.0).sqrt()
        };
        // composite bound evaluated by trapezoid integration over the path
        let grid: Vec<f64> = (0..=100)
            .map(|i| {
                let s = i as f64 / 100.0;
                let h_norm = fam.evaluate(s).unwrap().operator_norm();
                let hp = fam.derivative().operator_norm();
                let g = fam.gap(s, 0).unwrap();
                let d = params.delta;
                hp * ((-g * g / (2.0 * d * d)).exp() / g
                    + 2.0 * (2.0 * std::f64::consts::PI).sqrt()
                        * (-0.5 * d * d * params.t_total * params.t_total).exp()
                        / d
                    + 2.0 * (2.0 / std::f64::consts::PI).sqrt() * h_norm * params.t_total
                        / (d * params.n_steps as f64))
            })
            .collect();
        let rhs = trapezoid(&grid, 0.01);
        assert!(rhs <= eps, "parameter selection missed its target: {rhs} > {eps}");
        assert!(
            lhs <= rhs + 2.0 * tol,
            "eps = {eps}: flow error {lhs} exceeds composite bound {rhs}"
        );
    }
}

#[test]
fn segmented_pipeline_tracks_its_own_flow() {
    // the composed Dyson segments stay within the summed per-segment
    // certificates of the ordered exponential they approximate
    let fam = zx_family();
    let eps = 1e-1;
    let (_, _, run) = run_algorithm1(&fam, 0, eps).unwrap();
    let kernel = QacKernel::for_family(&run.params, &fam).unwrap();
    let oracle = ordered_exponential_converged(
        |s| discretized_qac_with(&fam, s, &kernel),
        0.0,
        1.0,
        512,
        eps / 50.0,
        18,
    )
    .unwrap();
    let distance = spectral_norm(&(&run.final_operator - &oracle.product));
    let budget: f64 = run.segments.iter().map(|s| s.dyson_error_estimate).sum();
    assert!(
        distance <= budget + eps / 10.0,
        "composite distance {distance} exceeds summed certificates {budget}"
    );
    assert!(spectral_norm(&run.final_operator) <= 1.0 + budget + 1e-9);
}

#[test]
fn ground_state_pipeline_reaches_tight_targets() {
    // the end-to-end ground-state run at the tightest standard target
    let fam = zx_family();
    let gamma1 = fam.gap(1.0, 0).unwrap();
    let (_, measured, _) = run_algorithm2(&fam, gamma1, 1e-3).unwrap();
    assert!(measured <= 1e-3, "qubit family: {measured}");

    let fam = random_gapped_family(8, 0.3, 55, 0).unwrap();
    let gamma1 = fam.gap(1.0, 0).unwrap();
    let (_, measured, _) = run_algorithm2(&fam, gamma1, 1e-3).unwrap();
    assert!(measured <= 1e-3, "random family: {measured}");
}

#[test]
fn exact_generator_is_offdiagonal_in_instantaneous_basis() {
    for seed in [1u64, 2, 3] {
        let fam = random_gapped_family(6, 0.3, seed, 0).unwrap();
        for i in 0..=4 {
            let s = i as f64 / 4.0;
            let d = exact_qac(&fam, s, 0.4).unwrap();
            let dec = fam.spectral(s).unwrap();
            let d_eig = dec.eigenvectors.adjoint() * d.matrix() * &dec.eigenvectors;
            for j in 0..6 {
                assert!(
                    d_eig[(j, j)].norm() <= 1e-10,
                    "seed {seed}, s = {s}: diagonal entry {j} is {}",
                    d_eig[(j, j)].norm()
                );
            }
        }
    }
}
