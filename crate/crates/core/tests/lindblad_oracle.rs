//! Cross-checks of the RK4 master-equation propagator against reference
//! routes that share none of its code: the dense exponential of the
//! vectorized generator, and a plain classical rate-equation integrator for
//! the incoherent limit.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use qwdm::graphs::cycle_graph;
use qwdm::lindblad::{build_generator, propagate, AmplitudeConvention, DensityMatrix};
use qwdm_oracles::{cycle_rate_matrix, integrate_rate_equation, Amplitude, CycleGenerator};

fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).norm()))
}

// Substeps sized so RK4 truncation stays below the 1e-8 oracle tolerance at
// each horizon.
fn substeps_for(tau: f64) -> usize {
    if tau <= 0.6 {
        64
    } else {
        (tau / 0.6 * 256.0).ceil() as usize
    }
}

#[test]
fn propagator_matches_superoperator_exponential() {
    let g = cycle_graph(8).unwrap();
    for &omega in &[0.0, 0.3, 0.5, 1.0] {
        let liouv = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
        let oracle = CycleGenerator::new(8, omega, Amplitude::Linear);
        for &tau in &[0.06, 0.6, 6.0] {
            let rho0 = DensityMatrix::pure_basis_state(8, 0);
            let rk4 = propagate(&liouv, &rho0, tau, substeps_for(tau)).unwrap();
            let reference = oracle.evolve_expm(rho0.entries(), tau);
            let err = max_abs_diff(rk4.entries(), &reference);
            assert!(
                err <= 1e-8,
                "omega={omega} tau={tau}: max-abs difference {err:.3e}"
            );
        }
    }
}

#[test]
fn propagator_matches_expm_from_mixed_states() {
    // Same check from a non-basis start: an even superposition projector
    // mixed with a basis state keeps coherences in play.
    let g = cycle_graph(8).unwrap();
    let mut entries = Array2::<C64>::zeros((8, 8));
    for i in 0..8 {
        for j in 0..8 {
            entries[[i, j]] = C64::new(0.5 / 8.0, 0.0);
        }
    }
    entries[[3, 3]] += C64::new(0.5, 0.0);
    let rho0 = DensityMatrix::from_entries(entries).unwrap();
    for &omega in &[0.0, 0.5, 1.0] {
        let liouv = build_generator(&g, omega, AmplitudeConvention::Linear).unwrap();
        let oracle = CycleGenerator::new(8, omega, Amplitude::Linear);
        let rk4 = propagate(&liouv, &rho0, 0.6, 64).unwrap();
        let reference = oracle.evolve_expm(rho0.entries(), 0.6);
        let err = max_abs_diff(rk4.entries(), &reference);
        assert!(err <= 1e-8, "omega={omega}: {err:.3e}");
    }
}

#[test]
fn incoherent_populations_follow_rate_equation() {
    let g = cycle_graph(8).unwrap();
    for (conv, amp) in [
        (AmplitudeConvention::Linear, Amplitude::Linear),
        (AmplitudeConvention::Sqrt, Amplitude::Sqrt),
    ] {
        let liouv = build_generator(&g, 1.0, conv).unwrap();
        let rate = cycle_rate_matrix(8, amp);
        let mut p0 = vec![0.0; 8];
        p0[0] = 1.0;
        for &tau in &[0.6, 3.0] {
            let rho = propagate(
                &liouv,
                &DensityMatrix::pure_basis_state(8, 0),
                tau,
                substeps_for(tau).max(512),
            )
            .unwrap();
            let reference = integrate_rate_equation(&rate, &p0, tau, 4096);
            for i in 0..8 {
                let got = rho.populations().probs()[i];
                assert!(
                    (got - reference[i]).abs() < 1e-8,
                    "{conv:?} tau={tau} node {i}: {got} vs {}",
                    reference[i]
                );
            }
        }
    }
}

#[test]
fn sqrt_convention_is_linear_at_double_time_on_cycles() {
    // On 2-regular graphs the two amplitude rules differ by a global time
    // rescale of 1/2 in the dissipator; at omega = 1 that is exact.
    let g = cycle_graph(8).unwrap();
    let linear = build_generator(&g, 1.0, AmplitudeConvention::Linear).unwrap();
    let sqrt = build_generator(&g, 1.0, AmplitudeConvention::Sqrt).unwrap();
    let rho0 = DensityMatrix::pure_basis_state(8, 2);
    let slow = propagate(&linear, &rho0, 1.2, 128).unwrap();
    let fast = propagate(&sqrt, &rho0, 0.6, 64).unwrap();
    let err = max_abs_diff(slow.entries(), fast.entries());
    assert!(err < 1e-9, "time-rescale mismatch {err:.3e}");
}
