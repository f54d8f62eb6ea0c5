//! Truncated Fourier series of the interaction-picture Hamiltonian against
//! the directly rotated one.

use std::f64::consts::PI;

use spinforge::linalg::frobenius;
use spinforge::models::{fourier_reconstruction, interaction_hamiltonian, HamiltonianSpec};
use spinforge::spincore::CollectiveOps;

const ORDER: i32 = 10;
const SAMPLES: usize = 16;

#[test]
fn reconstruction_matches_rotated_hamiltonian() {
    for n in [1usize, 2, 5, 8, 13, 20] {
        let ops = CollectiveOps::<f64>::new(n).unwrap();
        for (delta, alpha) in [(0.0, 0.0), (0.31 * n as f64, 0.0), (-1.7, 0.8)] {
            let spec = HamiltonianSpec::driven_at_working_point(1.0, delta, 2.0 * PI * 100.0 * n as f64, alpha);
            let period = 2.0 * PI / spec.omega;
            for k in 0..SAMPLES {
                let t = period * k as f64 / SAMPLES as f64;
                let exact = interaction_hamiltonian(&spec, &ops, t).unwrap();
                let approx = fourier_reconstruction(&spec, &ops, t, ORDER).unwrap();
                let err = frobenius(&(&approx - &exact));
                let scale = frobenius(&exact).max(1e-300);
                assert!(err < 1e-3 * scale, "N={n} δ={delta} α={alpha} t={t}: {err:e} vs {scale:e}");
            }
        }
    }
}

#[test]
fn series_converges_with_order() {
    let ops = CollectiveOps::<f64>::new(12).unwrap();
    let spec = HamiltonianSpec::driven_at_working_point(1.0, 2.0, 500.0, 0.3);
    let t = 0.37 * 2.0 * PI / spec.omega;
    let exact = interaction_hamiltonian(&spec, &ops, t).unwrap();
    let errs: Vec<f64> = [4, 6, 8, 10]
        .iter()
        .map(|&m| frobenius(&(fourier_reconstruction(&spec, &ops, t, m).unwrap() - &exact)))
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}
