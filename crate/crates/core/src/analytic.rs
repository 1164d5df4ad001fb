//! Closed-form side of the model: coupling conditions, the stabilized state
//! `|φₙ⟩`, its position wavefunction, and the operators whose kernel it is.
//!
//! The dark-state operator is `A = G₋ b + G₊ b† + G₀ {b, b†}`. With the
//! resonant choice `G₀ = √(G₊G₋ / (2(2n+1)))` and `ζ = G₊/G₋`, conjugating by
//! the displacement `D(ξₙ/√2)`, `ξₙ = −√(ζ(1+2n))`, turns `A` into
//! `G₋(1−ζ) b + 2G₀ (b†b − n)`, whose kernel is a finite superposition of
//! `|0⟩..|n⟩`.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::fockspace::{
    annihilation_op, anticommutator, displaced_fock, FockDim, QuantumOperator, StateVector,
};
use crate::hermite::{binomial, hermite};
use crate::phasespace::RealGrid1D;
use crate::{CVector, Error, Result, C64};

/// Kernel states with a second-smallest/smallest singular value ratio below
/// this are flagged as not well separated.
pub const KERNEL_SEPARATION_MIN: f64 = 100.0;

/// Coupling rates of the linearized model, all in the same angular-frequency
/// unit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSet {
    pub g_minus: f64,
    pub g_plus: f64,
    pub g_zero: f64,
    pub kappa: f64,
    /// Set when any input amplitude was negative and its magnitude was used.
    #[serde(default)]
    pub sign_normalized: bool,
}

impl CouplingSet {
    pub fn new(g_minus: f64, g_plus: f64, g_zero: f64, kappa: f64) -> Result<Self> {
        for (name, v) in [("G-", g_minus), ("G+", g_plus), ("G0", g_zero)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::Config(format!(
                "cavity decay rate must be positive, got {kappa}"
            )));
        }
        Ok(Self {
            g_minus,
            g_plus,
            g_zero,
            kappa,
            sign_normalized: false,
        })
    }

    /// Couplings that stabilize `target`: `G₊ = ζ G₋` and the resonant `G₀`.
    pub fn resonant(g_minus: f64, target: &TargetSpec, kappa: f64) -> Result<Self> {
        let g_plus = target.zeta * g_minus;
        let g_zero = resonant_coupling(g_plus, g_minus, target.n)?;
        Self::new(g_minus, g_plus, g_zero, kappa)
    }

    pub fn is_stable(&self) -> bool {
        self.g_plus < self.g_minus
    }

    /// All three drive couplings multiplied by `s`; κ unchanged.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            g_minus: self.g_minus * s,
            g_plus: self.g_plus * s,
            g_zero: self.g_zero * s,
            ..*self
        }
    }

    pub fn max_coupling(&self) -> f64 {
        self.g_minus.max(self.g_plus).max(self.g_zero)
    }

    /// `√(G₋² − G₊²)`; zero outside the stable regime.
    pub fn bogoliubov_gain(&self) -> f64 {
        (self.g_minus * self.g_minus - self.g_plus * self.g_plus)
            .max(0.0)
            .sqrt()
    }
}

/// Maps single-photon couplings and steady intracavity amplitudes onto the
/// linearized rates `G± = g₁ α±`, `G₀ = g₂ α₀`.
pub fn physical_to_couplings(
    g1: f64,
    g2: f64,
    alpha_minus: f64,
    alpha_zero: f64,
    alpha_plus: f64,
    kappa: f64,
) -> Result<CouplingSet> {
    let raw = [g1 * alpha_minus, g1 * alpha_plus, g2 * alpha_zero];
    let flipped = raw.iter().any(|&v| v < 0.0);
    let mut set = CouplingSet::new(raw[0].abs(), raw[1].abs(), raw[2].abs(), kappa)?;
    set.sign_normalized = flipped;
    Ok(set)
}

/// `G₀ = √(G₊G₋ / (2(2n+1)))`.
pub fn resonant_coupling(g_plus: f64, g_minus: f64, n: u32) -> Result<f64> {
    if !(g_plus >= 0.0 && g_minus >= 0.0) || !g_plus.is_finite() || !g_minus.is_finite() {
        return Err(Error::Config(format!(
            "couplings must be finite and non-negative, got G+ = {g_plus}, G- = {g_minus}"
        )));
    }
    Ok((g_plus * g_minus / (2.0 * (2.0 * n as f64 + 1.0))).sqrt())
}

/// `ζ = tanh r = G₊/G₋`, defined only in the stable regime.
pub fn zeta_of(couplings: &CouplingSet) -> Result<f64> {
    if couplings.g_minus == 0.0 {
        return Err(Error::Config(
            "G- = 0 leaves the squeezing undefined".into(),
        ));
    }
    if couplings.g_plus >= couplings.g_minus {
        return Err(Error::Unstable {
            g_plus: couplings.g_plus,
            g_minus: couplings.g_minus,
        });
    }
    Ok(couplings.g_plus / couplings.g_minus)
}

/// Target Fock index `n` and squeezing `ζ ∈ [0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub n: u32,
    pub zeta: f64,
}

impl TargetSpec {
    pub fn new(n: u32, zeta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::Config(format!(
                "zeta must lie in [0, 1) (zeta = 1 is the unstable G+ = G- point), got {zeta}"
            )));
        }
        Ok(Self { n, zeta })
    }

    /// Squeezing parameter `r = atanh ζ`.
    pub fn squeezing(&self) -> f64 {
        self.zeta.atanh()
    }
}

/// Shift, superposition ratio and closed-form normalization of `|φₙ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    /// Position shift `ξₙ = −√(ζ(1+2n))`.
    pub xi: f64,
    /// `cₙ = (1−ζ)√(ζ(1+2n))/(4ζ)`; infinite in the ζ = 0 vacuum limit.
    pub c: f64,
    /// `𝒩ₙ = ₂F₁(−n, −n; 1; cₙ⁻²)^{−1/2}`.
    pub norm: f64,
}

impl PhiParams {
    pub fn is_vacuum_limit(&self) -> bool {
        self.c.is_infinite()
    }

    /// Coherent amplitude `ξₙ/√2` of the displacement in `|φₙ⟩`.
    pub fn displacement(&self) -> f64 {
        self.xi * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// `₂F₁(−n, −n; 1; x) = Σₖ C(n,k)² xᵏ`, evaluated as the terminating sum.
pub fn hyp2f1_terminating(n: u32, x: f64) -> f64 {
    let n = n as usize;
    (0..=n)
        .map(|k| {
            let c = binomial(n, k);
            c * c * x.powi(k as i32)
        })
        .sum()
}

pub fn phi_params(spec: &TargetSpec) -> PhiParams {
    if spec.zeta == 0.0 {
        return PhiParams {
            xi: 0.0,
            c: f64::INFINITY,
            norm: 1.0,
        };
    }
    let root = (spec.zeta * (1.0 + 2.0 * spec.n as f64)).sqrt();
    let c = (1.0 - spec.zeta) * root / (4.0 * spec.zeta);
    PhiParams {
        xi: -root,
        c,
        norm: hyp2f1_terminating(spec.n, 1.0 / (c * c)).powf(-0.5),
    }
}

/// Coefficients `𝒩ₙ C(n,k) cₙ⁻ᵏ`, `k = 0..=n`, in the closed form written in
/// terms of `cₙ` and `𝒩ₙ`. Unit norm by construction of `𝒩ₙ`.
///
/// These are *not* the Fock amplitudes of the dark state for `n ≥ 1`: the
/// Hermite expansion behind them treats `H_k(x)e^{−x²/2}` as `|k⟩` without its
/// `(2ᵏk!)^{−1/2}` factor and drops a factor 4 in the shift. See
/// [`superposition_coefficients`] for the amplitudes that `A` annihilates.
pub fn literal_superposition(spec: &TargetSpec) -> Vec<f64> {
    let params = phi_params(spec);
    let n = spec.n as usize;
    if params.is_vacuum_limit() {
        return unit_first(n);
    }
    (0..=n)
        .map(|k| params.norm * binomial(n, k) * params.c.powi(-(k as i32)))
        .collect()
}

fn unit_first(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    v[0] = 1.0;
    v
}

/// Normalized amplitudes on `|0⟩..|n⟩` of the undisplaced superposition
/// annihilated by `G₋(1−ζ) b + 2G₀(b†b − n)`:
/// `χₖ ∝ C(n,k) √k! (2√2 cₙ)^{−k}`.
pub fn superposition_coefficients(spec: &TargetSpec) -> Vec<f64> {
    let params = phi_params(spec);
    let n = spec.n as usize;
    if params.is_vacuum_limit() {
        return unit_first(n);
    }
    // Scaled by (2√2 c)^n so that ζ → 1 (c → 0) cannot overflow.
    let u = 2.0 * std::f64::consts::SQRT_2 * params.c;
    let mut sqrt_fact = 1.0;
    let mut raw = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            sqrt_fact *= (k as f64).sqrt();
        }
        raw.push(binomial(n, k) * sqrt_fact * u.powi((n - k) as i32));
    }
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    raw.into_iter().map(|v| v / norm).collect()
}

fn displaced_superposition(spec: &TargetSpec, coefs: &[f64], d: FockDim) -> CVector {
    let alpha = C64::from(phi_params(spec).displacement());
    let mut amps = CVector::zeros(d.get());
    for (k, &coef) in coefs.iter().enumerate() {
        if coef != 0.0 {
            amps += displaced_fock(alpha, k, d) * C64::from(coef);
        }
    }
    amps
}

/// The state built from [`literal_superposition`] with the same displacement
/// as [`build_phi_n`]. Kept for comparison only.
pub fn build_literal_phi_n(spec: &TargetSpec, d: FockDim) -> Result<StateVector> {
    if spec.n as usize >= d.get() {
        return Err(Error::Config(format!(
            "target level {} does not fit in {} levels",
            spec.n,
            d.get()
        )));
    }
    StateVector::from_amplitudes(
        displaced_superposition(spec, &literal_superposition(spec), d),
        vec![d],
    )
}

/// `|φₙ⟩ = D(ξₙ/√2) Σₖ χₖ |k⟩` on `d` levels. Logs a warning when the top
/// 10% of levels hold more than `1e−8`.
pub fn build_phi_n(spec: &TargetSpec, d: FockDim) -> Result<StateVector> {
    let n = spec.n as usize;
    if n >= d.get() {
        return Err(Error::Config(format!(
            "target level {n} does not fit in {} levels",
            d.get()
        )));
    }
    let amps = displaced_superposition(spec, &superposition_coefficients(spec), d);
    let state = StateVector::from_amplitudes(amps, vec![d])?;
    let tail = state.tail_mass();
    if tail > 1e-8 {
        log::warn!(
            "φ_{} at ζ = {} on {} levels has tail mass {tail:.3e}",
            spec.n,
            spec.zeta,
            d.get()
        );
    }
    Ok(state)
}

/// Outcome of growing the truncation until a state is resolved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub dim: usize,
    pub tail_mass: f64,
    /// True if the cap was hit before the tail mass fell below the target.
    pub capped: bool,
}

pub const ESCALATION_START: usize = 40;
pub const ESCALATION_CAP: usize = 400;

/// Grows the truncation from 40 by factors of 1.5 (cap 400) until the top
/// 10% of levels of `build(d)` hold less than `tail_tol`.
pub fn escalate<F>(tail_tol: f64, mut build: F) -> Result<(StateVector, Escalation)>
where
    F: FnMut(FockDim) -> Result<StateVector>,
{
    let mut n = ESCALATION_START;
    loop {
        let state = build(FockDim::new(n)?)?;
        let tail = state.tail_mass();
        if tail < tail_tol || n >= ESCALATION_CAP {
            let esc = Escalation {
                dim: n,
                tail_mass: tail,
                capped: tail >= tail_tol,
            };
            if esc.capped {
                log::warn!("truncation cap {n} reached with tail mass {tail:.3e}");
            }
            return Ok((state, esc));
        }
        n = ((n as f64 * 1.5).ceil() as usize).min(ESCALATION_CAP);
    }
}

/// `G₋ b + G₊ b† + G₀ {b, b†}` on one truncated mode.
pub fn build_dark_operator(couplings: &CouplingSet, d: FockDim) -> QuantumOperator {
    let b = annihilation_op(d);
    let bd = b.adjoint();
    let ac = anticommutator(&b, &bd).expect("same dims");
    b.scaled(C64::from(couplings.g_minus))
        .plus(&bd.scaled(C64::from(couplings.g_plus)))
        .and_then(|m| m.plus(&ac.scaled(C64::from(couplings.g_zero))))
        .expect("same dims")
}

/// The nonlinear annihilator `f = 𝒢β + √(cosh r sinh r / (2(2n+1))) {b†, b}`
/// with `β = cosh r b + sinh r b†` and `𝒢 = √(G₋² − G₊²)`.
#[derive(Clone, Debug)]
pub struct AnnihilatorF {
    /// The operator exactly as written above.
    pub literal: QuantumOperator,
    /// Same with the nonlinear coefficient multiplied by `𝒢`; equal to
    /// [`build_dark_operator`] whenever `G₀` is the resonant value.
    pub rescaled: QuantumOperator,
    pub gain: f64,
    pub nonlinear_coefficient: f64,
}

pub fn build_annihilator_f(
    couplings: &CouplingSet,
    spec: &TargetSpec,
    d: FockDim,
) -> Result<AnnihilatorF> {
    let zeta = zeta_of(couplings)?;
    if (zeta - spec.zeta).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "couplings give zeta = {zeta} but the target asks for {}",
            spec.zeta
        )));
    }
    let r = zeta.atanh();
    let gain = couplings.bogoliubov_gain();
    let coef = (r.cosh() * r.sinh() / (2.0 * (2.0 * spec.n as f64 + 1.0))).sqrt();
    let b = annihilation_op(d);
    let bd = b.adjoint();
    let beta = b
        .scaled(C64::from(r.cosh()))
        .plus(&bd.scaled(C64::from(r.sinh())))?;
    let ac = anticommutator(&bd, &b)?;
    let linear = beta.scaled(C64::from(gain));
    Ok(AnnihilatorF {
        literal: linear.plus(&ac.scaled(C64::from(coef)))?,
        rescaled: linear.plus(&ac.scaled(C64::from(gain * coef)))?,
        gain,
        nonlinear_coefficient: coef,
    })
}

/// Approximate kernel of a single-mode operator.
#[derive(Clone, Debug)]
pub struct KernelState {
    pub state: StateVector,
    /// Smallest singular value, `‖op·state‖`.
    pub residual: f64,
    /// Second-smallest over smallest singular value.
    pub separation_ratio: f64,
    pub well_separated: bool,
}

/// Right singular vector of the smallest singular value (full SVD), with
/// the global phase fixed so the largest amplitude is real positive.
pub fn kernel_state(op: &QuantumOperator) -> Result<KernelState> {
    if !op.is_single_mode() {
        return Err(Error::Config(
            "kernel_state expects a single-mode operator".into(),
        ));
    }
    let svd = SVD::new(op.matrix().clone(), false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::InvalidState("SVD did not return right vectors".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let (lo, next) = (order[0], order[1]);
    let v = v_t.row(lo).adjoint();
    let state = StateVector::from_amplitudes(v, op.dims().to_vec())?.with_canonical_phase();
    let residual = sv[lo];
    let separation_ratio = if residual > 0.0 {
        sv[next] / residual
    } else {
        f64::INFINITY
    };
    Ok(KernelState {
        state,
        residual,
        separation_ratio,
        well_separated: separation_ratio >= KERNEL_SEPARATION_MIN,
    })
}

/// Unnormalized `φₙ(q) = e^{−(q−ξₙ)²/2} Hₙ(q − ξₙ + 2cₙ)`; the vacuum
/// Gaussian `e^{−q²/2}` at ζ = 0.
pub fn position_wavefunction(spec: &TargetSpec, q: f64) -> f64 {
    let params = phi_params(spec);
    if params.is_vacuum_limit() {
        return (-0.5 * q * q).exp();
    }
    let x = q - params.xi;
    (-0.5 * x * x).exp() * hermite(spec.n as usize, x + 2.0 * params.c)
}

/// [`position_wavefunction`] sampled on `grid` and scaled so that the
/// Riemann sum of `|φ|²` is one.
pub fn normalized_position_wavefunction(spec: &TargetSpec, grid: &RealGrid1D) -> Vec<f64> {
    let mut vals: Vec<f64> = grid
        .points()
        .map(|q| position_wavefunction(spec, q))
        .collect();
    let mass: f64 = vals.iter().map(|v| v * v).sum::<f64>() * grid.step();
    let scale = mass.sqrt().recip();
    vals.iter_mut().for_each(|v| *v *= scale);
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::number_op;
    use approx::assert_abs_diff_eq;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn fidelity(a: &StateVector, b: &StateVector) -> f64 {
        a.inner(b).unwrap().norm_sqr()
    }

    #[test]
    fn physical_mapping() {
        let c = physical_to_couplings(1e-3, 2e-3, 1000.0, 0.0, 500.0, 0.1).unwrap();
        assert_abs_diff_eq!(c.g_minus, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g_plus, 0.5, epsilon = 1e-12);
        assert_eq!(c.g_zero, 0.0);
        assert!(!c.sign_normalized);
        let c = physical_to_couplings(1e-3, 2e-3, -1000.0, 10.0, 500.0, 0.1).unwrap();
        assert_abs_diff_eq!(c.g_minus, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.g_zero, 0.02, epsilon = 1e-12);
        assert!(c.sign_normalized);
        assert!(physical_to_couplings(1e-3, 0.0, 1.0, 1.0, 1.0, 0.0).is_err());
        assert!(physical_to_couplings(1e-3, 0.0, 1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn resonant_values() {
        assert_abs_diff_eq!(
            resonant_coupling(1.0, 1.0, 0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(resonant_coupling(0.0, 3.0, 4).unwrap(), 0.0);
        // √(0.49/22), checked with mpmath at 50 digits: 0.14924050144892729...
        assert_abs_diff_eq!(
            resonant_coupling(0.49, 1.0, 5).unwrap(),
            0.149_240_501_448_927_3,
            epsilon = 1e-15
        );
        assert!(resonant_coupling(-0.1, 1.0, 1).is_err());
    }

    #[test]
    fn zeta_ratio_and_stability() {
        let c = CouplingSet::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(zeta_of(&c).unwrap(), 0.0);
        let c = CouplingSet::new(1.0, 0.9, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(zeta_of(&c).unwrap(), 0.9, epsilon = 1e-15);
        let c = CouplingSet::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(zeta_of(&c), Err(Error::Unstable { .. })));
        assert!(!c.is_stable());
        let c = CouplingSet::new(0.0, 0.0, 0.0, 1.0).unwrap();
        assert!(matches!(zeta_of(&c), Err(Error::Config(_))));
    }

    #[test]
    fn target_validation() {
        assert!(TargetSpec::new(1, 1.0).is_err());
        assert!(TargetSpec::new(1, -0.1).is_err());
        assert!(TargetSpec::new(1, f64::NAN).is_err());
        assert!(TargetSpec::new(3, 0.0).is_ok());
    }

    #[test]
    fn params_n1_half() {
        let p = phi_params(&TargetSpec::new(1, 0.5).unwrap());
        assert_abs_diff_eq!(p.xi, -1.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.c, 0.306_186_217_847_897_2, epsilon = 1e-15);
        assert_abs_diff_eq!(1.0 / (p.c * p.c), 32.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.norm, (3.0f64 / 35.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn params_n0_and_n5() {
        for zeta in [0.1, 0.5, 0.95] {
            let p = phi_params(&TargetSpec::new(0, zeta).unwrap());
            assert_eq!(p.norm, 1.0);
        }
        let p = phi_params(&TargetSpec::new(5, 0.9).unwrap());
        assert_abs_diff_eq!(p.xi, -3.146_426_544_510_455, epsilon = 1e-14);
        assert_abs_diff_eq!(p.c, 0.087_400_737_347_512_64, epsilon = 1e-15);
    }

    #[test]
    fn vacuum_limit() {
        let spec = TargetSpec::new(3, 0.0).unwrap();
        let p = phi_params(&spec);
        assert!(p.is_vacuum_limit());
        assert_eq!(p.xi, 0.0);
        let s = build_phi_n(&spec, dim(10)).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        assert_eq!(position_wavefunction(&spec, 1.0), (-0.5f64).exp());
    }

    #[test]
    fn normalization_two_routes() {
        for n in 0..6u32 {
            for zeta in [0.3, 0.7, 0.99] {
                let spec = TargetSpec::new(n, zeta).unwrap();
                let p = phi_params(&spec);
                let raw: f64 = (0..=n as usize)
                    .map(|k| (binomial(n as usize, k) * p.c.powi(-(k as i32))).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((p.norm * raw - 1.0).abs() < 1e-12, "n={n} ζ={zeta}");
                let lit: f64 = literal_superposition(&spec).iter().map(|v| v * v).sum();
                assert!((lit - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn n0_is_coherent() {
        let spec = TargetSpec::new(0, 0.5).unwrap();
        let d = dim(40);
        let s = build_phi_n(&spec, d).unwrap();
        let coh = StateVector::from_amplitudes(
            crate::fockspace::coherent_amplitudes(C64::from(-0.5), d),
            vec![d],
        )
        .unwrap();
        assert!((fidelity(&s, &coh) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn n1_superposition_ratio() {
        // Kernel recursion of G₋(1−ζ)b + 2G₀(b†b − 1): χ₀/χ₁ = (1−ζ)G₋/(2G₀) = √3/2
        let spec = TargetSpec::new(1, 0.5).unwrap();
        let chi = superposition_coefficients(&spec);
        assert_abs_diff_eq!(chi[0] / chi[1], 3f64.sqrt() / 2.0, epsilon = 1e-14);
        let p = phi_params(&spec);
        assert_abs_diff_eq!(
            chi[0] / chi[1],
            2.0 * std::f64::consts::SQRT_2 * p.c,
            epsilon = 1e-14
        );
        let lit = literal_superposition(&spec);
        assert_abs_diff_eq!(lit[0] / lit[1], p.c, epsilon = 1e-14);
        assert_abs_diff_eq!(p.displacement(), -0.75f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn dark_operator_annihilates_phi() {
        for &(n, zeta) in &[(1u32, 0.5), (2, 0.7), (4, 0.9)] {
            let spec = TargetSpec::new(n, zeta).unwrap();
            let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
            let d = dim(60);
            let phi = build_phi_n(&spec, d).unwrap();
            let res = build_dark_operator(&c, d)
                .apply(phi.amplitudes())
                .unwrap()
                .norm();
            assert!(res < 1e-7, "n={n} ζ={zeta}: {res:e}");
        }
    }

    #[test]
    fn literal_superposition_is_not_annihilated() {
        let spec = TargetSpec::new(1, 0.5).unwrap();
        let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
        let d = dim(40);
        let alpha = C64::from(phi_params(&spec).displacement());
        let lit = literal_superposition(&spec);
        let v = displaced_fock(alpha, 0, d) * C64::from(lit[0])
            + displaced_fock(alpha, 1, d) * C64::from(lit[1]);
        let res = build_dark_operator(&c, d).apply(&v).unwrap().norm();
        assert!(res > 0.1, "{res}");
    }

    #[test]
    fn kernel_of_ladder_and_number_ops() {
        let d = dim(40);
        let k = kernel_state(&annihilation_op(d)).unwrap();
        assert!(k.residual < 1e-12);
        assert!((k.state.amplitudes()[0].re - 1.0).abs() < 1e-12);
        assert!(k.well_separated);

        let shifted = number_op(d)
            .minus(
                &QuantumOperator::identity(vec![d])
                    .unwrap()
                    .scaled(C64::from(2.0)),
            )
            .unwrap();
        let k = kernel_state(&shifted).unwrap();
        assert!((k.state.amplitudes()[2].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cooling_and_squeezing_kernels() {
        let d = dim(60);
        let cool = CouplingSet::new(1.0, 0.0, 0.0, 1.0).unwrap();
        let k = kernel_state(&build_dark_operator(&cool, d)).unwrap();
        assert!((fidelity(&k.state, &StateVector::vacuum(d)) - 1.0).abs() < 1e-12);

        let sq = CouplingSet::new(1.0, 0.6, 0.0, 1.0).unwrap();
        let k = kernel_state(&build_dark_operator(&sq, d)).unwrap();
        let r = 0.6f64.atanh();
        let target = crate::fockspace::squeezed_vacuum(r, d);
        assert!(1.0 - fidelity(&k.state, &target) < 1e-10);
    }

    #[test]
    fn displaced_fock_limit_kernel() {
        let d = dim(80);
        let n = 2u32;
        let g0 = resonant_coupling(1.0, 1.0, n).unwrap();
        let c = CouplingSet::new(1.0, 1.0, g0, 1.0).unwrap();
        let k = kernel_state(&build_dark_operator(&c, d)).unwrap();
        let target = StateVector::from_amplitudes(
            displaced_fock(C64::from(-(2.5f64).sqrt()), 2, d),
            vec![d],
        )
        .unwrap();
        let f = fidelity(&k.state, &target);
        assert!(1.0 - f < 1e-8, "{f}");
    }

    #[test]
    fn kernel_matches_phi() {
        let spec = TargetSpec::new(1, 0.7).unwrap();
        let c = CouplingSet::resonant(1.0, &spec, 10.0).unwrap();
        let d = dim(100);
        let k = kernel_state(&build_dark_operator(&c, d)).unwrap();
        let phi = build_phi_n(&spec, d).unwrap();
        assert!(1.0 - fidelity(&k.state, &phi) < 1e-8);
    }

    #[test]
    fn annihilator_f_limits() {
        let d = dim(30);
        let spec = TargetSpec::new(2, 0.0).unwrap();
        let c = CouplingSet::resonant(1.3, &spec, 1.0).unwrap();
        let f = build_annihilator_f(&c, &spec, d).unwrap();
        let expected = annihilation_op(d).scaled(C64::from(1.3));
        assert!((f.literal.matrix() - expected.matrix()).camax() < 1e-14);

        // Nonlinear coefficient decays as 1/√n at fixed r.
        let small = build_annihilator_f(
            &CouplingSet::resonant(1.0, &TargetSpec::new(1, 0.5).unwrap(), 1.0).unwrap(),
            &TargetSpec::new(1, 0.5).unwrap(),
            d,
        )
        .unwrap();
        let big_spec = TargetSpec::new(1000, 0.5).unwrap();
        let big = build_annihilator_f(
            &CouplingSet::resonant(1.0, &big_spec, 1.0).unwrap(),
            &big_spec,
            d,
        )
        .unwrap();
        assert!(big.nonlinear_coefficient < small.nonlinear_coefficient / 10.0);

        let spec = TargetSpec::new(1, 0.6).unwrap();
        let c = CouplingSet::resonant(1.0, &spec, 1.0).unwrap();
        let f = build_annihilator_f(&c, &spec, d).unwrap();
        let dark = build_dark_operator(&c, d);
        assert!((f.rescaled.matrix() - dark.matrix()).camax() < 1e-13);

        let unstable = CouplingSet::new(1.0, 1.0, 0.1, 1.0).unwrap();
        assert!(build_annihilator_f(&unstable, &spec, d).is_err());
        let mismatched = CouplingSet::new(1.0, 0.5, 0.1, 1.0).unwrap();
        assert!(build_annihilator_f(&mismatched, &spec, d).is_err());
    }

    #[test]
    fn wavefunction_zero_count() {
        let spec = TargetSpec::new(5, 0.9).unwrap();
        let grid = RealGrid1D::new(-12.0, 12.0, 0.001).unwrap();
        let vals: Vec<f64> = grid
            .points()
            .map(|q| position_wavefunction(&spec, q))
            .collect();
        let changes = vals.windows(2).filter(|w| w[0] * w[1] < 0.0).count();
        assert_eq!(changes, 5);
    }

    #[test]
    fn n0_wavefunction_centered() {
        let spec = TargetSpec::new(0, 0.4).unwrap();
        let xi = phi_params(&spec).xi;
        let grid = RealGrid1D::new(-10.0, 10.0, 0.01).unwrap();
        let psi = normalized_position_wavefunction(&spec, &grid);
        let mean: f64 = grid.points().zip(&psi).map(|(q, v)| q * v * v).sum::<f64>() * grid.step();
        assert!((mean - xi).abs() < 1e-10);
    }

    #[test]
    fn escalation_grows_until_resolved() {
        let spec = TargetSpec::new(5, 0.99).unwrap();
        let (state, esc) = escalate(1e-10, |d| build_phi_n(&spec, d)).unwrap();
        assert!(!esc.capped);
        assert!(esc.tail_mass < 1e-10);
        assert_eq!(state.dim(), esc.dim);
    }
}
