use fockforge::analytic::{build_phi_n, escalate, CouplingSet, TargetSpec};
use fockforge::dynamics::{
    build_effective_single_mode, build_two_mode_model, evolve, lindblad_rhs, steady_state_with,
    SteadyStateControl,
};
use fockforge::fockspace::{inf_norm, DensityMatrix, FockDim, StateVector};
use fockforge::metrics::{fidelity, uhlmann_fidelity};
use proptest::prelude::*;

fn dim(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn resolved_phi(spec: &TargetSpec) -> StateVector {
    escalate(1e-10, |d| build_phi_n(spec, d)).unwrap().0
}

#[test]
fn dark_state_is_stationary() {
    for n in 0..=3 {
        for zeta in [0.3, 0.6, 0.9] {
            let spec = TargetSpec::new(n, zeta).unwrap();
            let phi = resolved_phi(&spec);
            let d = phi.dims()[0];
            let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();

            let eff = build_effective_single_mode(&c, d).unwrap();
            let r = inf_norm(&lindblad_rhs(&eff, &phi.to_density()).unwrap());
            assert!(r < 1e-7, "effective n={n} zeta={zeta}: {r}");

            let cav = dim(3);
            let full = build_two_mode_model(&c, cav, d).unwrap();
            let dark =
                DensityMatrix::product(&StateVector::vacuum(cav).to_density(), &phi.to_density())
                    .unwrap();
            let r = inf_norm(&lindblad_rhs(&full, &dark).unwrap());
            assert!(r < 1e-7, "two-mode n={n} zeta={zeta}: {r}");
        }
    }
}

#[test]
fn effective_steady_state_matches_closed_form() {
    let spec = TargetSpec::new(1, 0.7).unwrap();
    let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
    let d = dim(40);
    let model = build_effective_single_mode(&c, d).unwrap();
    let ss =
        steady_state_with(&model, &model.ground_state(), SteadyStateControl::default()).unwrap();
    let f = fidelity(&ss.state, &build_phi_n(&spec, d).unwrap()).unwrap();
    assert!(f > 0.999, "{f} after t = {}", ss.elapsed);
    let rep = &ss.report;
    assert!(rep.trace_drift < 1e-6 && rep.hermiticity_drift < 1e-8);
    let tail = &rep.metric_history[rep.metric_history.len() - 5..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{tail:?}");
}

#[test]
fn coupling_scale_only_rescales_time() {
    let spec = TargetSpec::new(0, 0.5).unwrap();
    let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
    let d = dim(30);
    let s = 2.0;
    let slow = build_effective_single_mode(&c, d).unwrap();
    let fast = build_effective_single_mode(&c.scaled(s), d).unwrap();
    let rho0 = slow.ground_state();

    let a = evolve(&slow, &rho0, 8.0, 8).unwrap();
    let b = evolve(&fast, &rho0, 8.0 / (s * s), 8).unwrap();
    let gap = a.final_state.trace_distance(&b.final_state).unwrap();
    assert!(gap < 1e-6, "{gap}");

    let ctl = SteadyStateControl {
        tolerance: 1e-10,
        max_time: 600.0,
        ..Default::default()
    };
    let ss_slow = steady_state_with(&slow, &rho0, ctl).unwrap();
    let ss_fast = steady_state_with(&fast, &rho0, ctl).unwrap();
    assert!(ss_slow.converged && ss_fast.converged);
    let f = uhlmann_fidelity(&ss_slow.state, &ss_fast.state).unwrap();
    assert!(f > 1.0 - 1e-8, "{f}");
    let ratio = ss_slow.elapsed / ss_fast.elapsed;
    assert!((ratio - s * s).abs() < 0.75, "time ratio {ratio}");
}

#[test]
fn effective_and_full_models_agree_in_good_cavity_limit() {
    let spec = TargetSpec::new(0, 0.5).unwrap();
    let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
    let d = dim(20);
    let eff = build_effective_single_mode(&c, d).unwrap();
    let full = build_two_mode_model(&c, dim(4), d).unwrap();
    let ctl = SteadyStateControl {
        tolerance: 1e-7,
        max_time: 400.0,
        ..Default::default()
    };
    let a = steady_state_with(&eff, &eff.ground_state(), ctl).unwrap();
    let b = steady_state_with(&full, &full.ground_state(), ctl).unwrap();
    assert!(a.converged && b.converged);
    let mech = b.state.partial_trace(1).unwrap();
    let f = uhlmann_fidelity(&a.state, &mech).unwrap();
    assert!(f > 0.99, "{f}");
    assert!(mech.purity() > 0.99);
    let tail = &b.report.metric_history[b.report.metric_history.len() - 5..];
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "{tail:?}");
}

#[test]
fn thermal_start_reaches_same_state() {
    let spec = TargetSpec::new(1, 0.5).unwrap();
    let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
    let d = dim(40);
    let model = build_effective_single_mode(&c, d).unwrap();
    let ctl = SteadyStateControl::default();
    let cold = steady_state_with(&model, &model.ground_state(), ctl).unwrap();
    let warm = steady_state_with(&model, &DensityMatrix::thermal(2.0, d).unwrap(), ctl).unwrap();
    assert!(cold.converged && warm.converged);
    let f = uhlmann_fidelity(&cold.state, &warm.state).unwrap();
    assert!(f > 1.0 - 1e-6, "{f}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generator_preserves_trace_and_hermiticity(
        gm in 0.1f64..2.0, zeta in 0.0f64..0.95, g0 in 0.0f64..1.0, seed in 0u64..1000,
    ) {
        let d = dim(12);
        let c = CouplingSet::new(gm, zeta * gm, g0, 10.0).unwrap();
        let model = build_two_mode_model(&c, dim(3), d).unwrap();
        let nbar = (seed % 7) as f64 * 0.2;
        let rho = DensityMatrix::product(
            &DensityMatrix::thermal(0.3, dim(3)).unwrap(),
            &DensityMatrix::thermal(nbar, d).unwrap(),
        ).unwrap();
        let out = lindblad_rhs(&model, &rho).unwrap();
        prop_assert!(out.trace().norm() < 1e-10 * inf_norm(rho.matrix()).max(1.0));
        prop_assert!(inf_norm(&(&out - out.adjoint())) < 1e-12 * inf_norm(&out).max(1.0));
    }
}
