use fockforge::analytic::{build_phi_n, escalate, TargetSpec};
use fockforge::fockspace::{
    annihilation_op, anticommutator, coherent_amplitudes, displaced_fock, squeezed_vacuum,
    DensityMatrix, FockDim, StateVector,
};
use fockforge::metrics::{
    displaced_fock_fidelity, displaced_fock_reference, fidelity, mean_occupation,
    quadrature_moments, uhlmann_fidelity, FidelityMode,
};
use fockforge::{CVector, C64};
use proptest::prelude::*;

fn dim(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn phi(n: u32, zeta: f64) -> StateVector {
    let spec = TargetSpec::new(n, zeta).unwrap();
    escalate(1e-10, |d| build_phi_n(&spec, d)).unwrap().0
}

#[test]
fn resemblance_to_displaced_fock_grows_with_squeezing() {
    let f: Vec<f64> = [0.7, 0.9, 0.99]
        .iter()
        .map(|&z| {
            let p = phi(5, z);
            let reference = displaced_fock_reference(5, FidelityMode::Raw, p.dims()[0]).unwrap();
            fidelity(&p, &reference).unwrap()
        })
        .collect();
    assert!(f[2] > f[1] && f[1] > f[0], "{f:?}");
}

#[test]
fn corrected_fidelity_monotone_toward_fock() {
    for n in 0..=5u32 {
        let f: Vec<f64> = [0.5, 0.9, 0.99, 0.999]
            .iter()
            .map(|&z| {
                let spec = TargetSpec::new(n, z).unwrap();
                let p = phi(n, z);
                displaced_fock_fidelity(&p, n as usize, FidelityMode::corrected_for(&spec)).unwrap()
            })
            .collect();
        if n == 0 {
            assert!(f.iter().all(|v| (v - 1.0).abs() < 1e-9), "{f:?}");
        } else {
            assert!(f.windows(2).all(|w| w[1] > w[0]), "n={n}: {f:?}");
        }
    }
}

#[test]
fn raw_reference_has_unit_fidelity_with_itself() {
    let d = dim(50);
    for n in 0..4 {
        let psi = StateVector::from_amplitudes(
            displaced_fock(C64::from(-(n as f64 + 0.5).sqrt()), n, d),
            vec![d],
        )
        .unwrap();
        let f = displaced_fock_fidelity(&psi, n, FidelityMode::Raw).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
    }
}

#[test]
fn occupation_near_target_at_strong_squeezing() {
    for n in 0..=5u32 {
        let spec = TargetSpec::new(n, 0.99).unwrap();
        let p = phi(n, 0.99);
        let d = p.dims()[0];
        let FidelityMode::DisplacementCorrected { alpha } = FidelityMode::corrected_for(&spec)
        else {
            unreachable!()
        };
        let undo = fockforge::fockspace::displacement_op(C64::from(-alpha), d);
        let back =
            StateVector::from_amplitudes(undo.apply(p.amplitudes()).unwrap(), vec![d]).unwrap();
        let mean_n = mean_occupation(&back).unwrap();
        assert!((mean_n - n as f64).abs() < 0.05, "n={n}: {mean_n}");
    }
}

#[test]
fn squeezed_vacuum_moments() {
    let m = quadrature_moments(&squeezed_vacuum(0.5, dim(60))).unwrap();
    assert!((m.var_q - (-1.0f64).exp() / 2.0).abs() < 1e-9);
    assert!((m.var_p - 1.0f64.exp() / 2.0).abs() < 1e-9);
}

#[test]
fn uhlmann_agrees_with_overlap_on_pure_states() {
    let a = phi(2, 0.6);
    let b = phi(2, 0.7).resized(a.dims()[0]).unwrap();
    let pure = fidelity(&a, &b).unwrap();
    let mixed = uhlmann_fidelity(&a.to_density(), &b.to_density()).unwrap();
    assert!((pure - mixed).abs() < 1e-9, "{pure} vs {mixed}");
}

fn coherent(re: f64, im: f64, d: FockDim) -> StateVector {
    StateVector::from_amplitudes(coherent_amplitudes(C64::new(re, im), d), vec![d]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn anticommutator_tracks_occupation(n in 0u32..5, zeta in 0.0f64..0.9) {
        let p = phi(n, zeta);
        let d = p.dims()[0];
        let b = annihilation_op(d);
        let ac = anticommutator(&b, &b.adjoint()).unwrap();
        let lhs = ac.expectation(&p).unwrap().re;
        let rhs = 2.0 * mean_occupation(&p).unwrap() + 1.0;
        prop_assert!((lhs - rhs).abs() < 1e-8, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn uncertainty_product_bounded(n in 0u32..5, zeta in 0.0f64..0.95) {
        let m = quadrature_moments(&phi(n, zeta)).unwrap();
        prop_assert!(m.var_q * m.var_p >= 0.25 - 1e-6);
    }

    #[test]
    fn mixtures_obey_uncertainty(re in -2.0f64..2.0, im in -2.0f64..2.0, w in 0.0f64..1.0, nbar in 0.0f64..2.0) {
        let d = dim(60);
        let c = coherent(re, im, d).to_density();
        let th = DensityMatrix::thermal(nbar, d).unwrap();
        let mixed = c.matrix() * C64::from(w) + th.matrix() * C64::from(1.0 - w);
        let rho = DensityMatrix::from_matrix(mixed, vec![d]).unwrap();
        let m = quadrature_moments(&rho).unwrap();
        prop_assert!(m.var_q * m.var_p >= 0.25 - 1e-6);
    }

    #[test]
    fn fidelity_symmetric_and_bounded(a in -1.5f64..1.5, b in -1.5f64..1.5) {
        let d = dim(50);
        let (x, y) = (coherent(a, 0.0, d), coherent(b, 0.0, d));
        let fxy = fidelity(&x, &y).unwrap();
        let fyx = fidelity(&y, &x).unwrap();
        prop_assert!((fxy - fyx).abs() < 1e-12);
        prop_assert!((fxy - (-(a - b).powi(2)).exp()).abs() < 1e-9);
        let z: CVector = x.amplitudes().clone();
        prop_assert!((z.norm() - 1.0).abs() < 1e-9);
    }
}
