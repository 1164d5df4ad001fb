//! Scalar diagnostics shared by tests, reports and acceptance runs.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::analytic::{build_phi_n, phi_params, TargetSpec};
use crate::fockspace::{
    displaced_fock, momentum_op, number_op, position_op, DensityMatrix, FockDim, QuantumOperator,
    StateVector,
};
use crate::{CMatrix, Error, Result, C64};

/// Borrowed pure or mixed state.
#[derive(Clone, Copy, Debug)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(s: &'a DensityMatrix) -> Self {
        StateRef::Mixed(s)
    }
}

impl StateRef<'_> {
    pub fn dims(&self) -> &[FockDim] {
        match self {
            StateRef::Pure(s) => s.dims(),
            StateRef::Mixed(r) => r.dims(),
        }
    }

    pub fn expectation(&self, op: &QuantumOperator) -> Result<C64> {
        match self {
            StateRef::Pure(s) => op.expectation(s),
            StateRef::Mixed(r) => r.expectation(op),
        }
    }

    pub fn tail_mass(&self) -> f64 {
        match self {
            StateRef::Pure(s) => s.tail_mass(),
            StateRef::Mixed(r) => r.tail_mass(),
        }
    }

    fn single_mode_dim(&self) -> Result<FockDim> {
        match self.dims() {
            [d] => Ok(*d),
            dims => Err(Error::Config(format!(
                "expected a single-mode state, got dims {dims:?}"
            ))),
        }
    }
}

/// `|⟨a|b⟩|²`, or `⟨b|ρ|b⟩` when `a` is mixed.
pub fn fidelity<'a>(a: impl Into<StateRef<'a>>, b: &StateVector) -> Result<f64> {
    let f = match a.into() {
        StateRef::Pure(s) => s.inner(b)?.norm_sqr(),
        StateRef::Mixed(r) => {
            if r.dims() != b.dims() {
                return Err(Error::DimMismatch(format!(
                    "{:?} vs {:?}",
                    r.dims(),
                    b.dims()
                )));
            }
            let v = b.amplitudes();
            v.dotc(&(r.matrix() * v)).re
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(m.clone());
    let mut vecs = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        vecs.column_mut(j).scale_mut(s);
    }
    &vecs * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²` between two mixed states.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimMismatch(format!(
            "{:?} vs {:?}",
            rho.dims(),
            sigma.dims()
        )));
    }
    let s = psd_sqrt(rho.matrix());
    let inner = &s * sigma.matrix() * &s;
    let inner = (&inner + inner.adjoint()) * C64::from(0.5);
    let eigenvalues = SymmetricEigen::new(inner).eigenvalues;
    // rounding noise on the null space would otherwise add ~√ε per level
    let floor = 1e-13 * eigenvalues.amax();
    let tr: f64 = eigenvalues
        .iter()
        .filter(|&&l| l > floor)
        .map(|&l| l.sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

pub fn purity<'a>(state: impl Into<StateRef<'a>>) -> f64 {
    match state.into() {
        StateRef::Pure(_) => 1.0,
        StateRef::Mixed(r) => r.purity(),
    }
}

/// How [`displaced_fock_fidelity`] builds its reference state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityMode {
    /// Against `D(−√(n+½))|n⟩`.
    Raw,
    /// Against `D(α)|n⟩`, i.e. `|⟨n|D(−α)|ψ⟩|²`, with `α` the state's own
    /// displacement.
    DisplacementCorrected { alpha: f64 },
}

impl FidelityMode {
    /// Corrected mode using the displacement `ξₙ/√2` carried by `|φₙ⟩`.
    pub fn corrected_for(spec: &TargetSpec) -> Self {
        FidelityMode::DisplacementCorrected {
            alpha: phi_params(spec).displacement(),
        }
    }
}

/// `D(α)|n⟩` with `α` chosen by `mode`.
pub fn displaced_fock_reference(n: usize, mode: FidelityMode, d: FockDim) -> Result<StateVector> {
    if n >= d.get() {
        return Err(Error::Config(format!(
            "Fock level {n} outside a {}-level space",
            d.get()
        )));
    }
    let alpha = match mode {
        FidelityMode::Raw => -(n as f64 + 0.5).sqrt(),
        FidelityMode::DisplacementCorrected { alpha } => alpha,
    };
    StateVector::from_amplitudes(displaced_fock(C64::from(alpha), n, d), vec![d])
}

pub fn displaced_fock_fidelity(psi: &StateVector, n: usize, mode: FidelityMode) -> Result<f64> {
    let d = StateRef::Pure(psi).single_mode_dim()?;
    fidelity(psi, &displaced_fock_reference(n, mode, d)?)
}

/// First and second quadrature moments with `q = (b+b†)/√2`,
/// `p = (b−b†)/(i√2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_q: f64,
    pub var_q: f64,
    pub mean_p: f64,
    pub var_p: f64,
}

pub fn quadrature_moments<'a>(state: impl Into<StateRef<'a>>) -> Result<Moments> {
    let state = state.into();
    let d = state.single_mode_dim()?;
    let q = position_op(d);
    let p = momentum_op(d);
    let q2 = q.compose(&q)?;
    let p2 = p.compose(&p)?;
    let mean_q = state.expectation(&q)?.re;
    let mean_p = state.expectation(&p)?.re;
    Ok(Moments {
        mean_q,
        var_q: state.expectation(&q2)?.re - mean_q * mean_q,
        mean_p,
        var_p: state.expectation(&p2)?.re - mean_p * mean_p,
    })
}

pub fn mean_occupation<'a>(state: impl Into<StateRef<'a>>) -> Result<f64> {
    let state = state.into();
    let d = state.single_mode_dim()?;
    Ok(state.expectation(&number_op(d))?.re)
}

/// Diagnostics of a single-mode state against the stabilized target `|φₙ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub fidelity_vs_target: f64,
    pub purity: f64,
    pub mean_q: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub mean_n: f64,
    pub tail_mass: f64,
    /// Fidelity with `D(−√(n+½))|n⟩`.
    pub displaced_fock_raw: f64,
    /// Fidelity with `D(ξₙ/√2)|n⟩`.
    pub displaced_fock_corrected: f64,
}

impl StateReport {
    pub fn against_target<'a>(state: impl Into<StateRef<'a>>, spec: &TargetSpec) -> Result<Self> {
        let state = state.into();
        let d = state.single_mode_dim()?;
        let target = build_phi_n(spec, d)?;
        let moments = quadrature_moments(state)?;
        let n = spec.n as usize;
        let fock =
            |mode| -> Result<f64> { fidelity(state, &displaced_fock_reference(n, mode, d)?) };
        Ok(Self {
            fidelity_vs_target: fidelity(state, &target)?,
            purity: purity(state),
            mean_q: moments.mean_q,
            var_q: moments.var_q,
            var_p: moments.var_p,
            mean_n: mean_occupation(state)?,
            tail_mass: state.tail_mass(),
            displaced_fock_raw: fock(FidelityMode::Raw)?,
            displaced_fock_corrected: fock(FidelityMode::corrected_for(spec))?,
        })
    }
}
