//! Dense operators and states on truncated Fock spaces.
//!
//! A single mode keeps the levels `|0⟩..|dim−1⟩`. Two-mode objects are
//! Kronecker products in (cavity, mechanics) order, so the basis index of
//! `|i⟩_cav ⊗ |j⟩_mech` is `i * dim_mech + j`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance used when an operator is asserted Hermitian.
pub const HERMITIAN_REL_TOL: f64 = 1e-12;
/// Absolute tolerance on the Hermiticity and trace of a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a density matrix.
pub const POSITIVITY_TOL: f64 = -1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Number of retained Fock levels of one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!(
                "Fock truncation must keep at least 2 levels, got {dim}"
            )));
        }
        Ok(Self(dim))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Number of levels counted by the truncation-health metric (top 10%).
    pub fn tail_levels(self) -> usize {
        self.0.div_ceil(10).max(1)
    }
}

impl TryFrom<usize> for FockDim {
    type Error = Error;
    fn try_from(dim: usize) -> Result<Self> {
        Self::new(dim)
    }
}

impl From<FockDim> for usize {
    fn from(d: FockDim) -> usize {
        d.0
    }
}

fn side_of(dims: &[FockDim]) -> usize {
    dims.iter().map(|d| d.get()).product()
}

fn check_mode_count(dims: &[FockDim]) -> Result<()> {
    if dims.is_empty() || dims.len() > 2 {
        return Err(Error::Config(format!(
            "operators act on one or two modes, got {}",
            dims.len()
        )));
    }
    Ok(())
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &CMatrix) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry magnitude of `m − m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A dense operator on a one- or two-mode truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOperator {
    matrix: CMatrix,
    dims: Vec<FockDim>,
    hermitian: bool,
}

impl QuantumOperator {
    pub fn new(matrix: CMatrix, dims: Vec<FockDim>) -> Result<Self> {
        check_mode_count(&dims)?;
        let side = side_of(&dims);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimMismatch(format!(
                "matrix is {}x{} but the dims {:?} require side {side}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        Ok(Self {
            matrix,
            dims,
            hermitian: false,
        })
    }

    pub fn identity(dims: Vec<FockDim>) -> Result<Self> {
        let side = side_of(&dims);
        Self::new(CMatrix::identity(side, side), dims)
    }

    pub fn zeros(dims: Vec<FockDim>) -> Result<Self> {
        let side = side_of(&dims);
        Self::new(CMatrix::zeros(side, side), dims)
    }

    /// Checks `‖M − M†‖∞ < 1e−12·‖M‖∞` and records the result.
    pub fn assert_hermitian(mut self) -> Result<Self> {
        let scale = inf_norm(&self.matrix);
        let defect = inf_norm(&(&self.matrix - self.matrix.adjoint()));
        if defect > HERMITIAN_REL_TOL * scale {
            return Err(Error::InvalidState(format!(
                "operator is not Hermitian: ‖M − M†‖∞ = {defect:.3e} with ‖M‖∞ = {scale:.3e}"
            )));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dims(&self) -> &[FockDim] {
        &self.dims
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_single_mode(&self) -> bool {
        self.dims.len() == 1
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            dims: self.dims.clone(),
            hermitian: self.hermitian,
        }
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    /// Operator product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Self::new(&self.matrix * &other.matrix, self.dims.clone())
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Self::new(&self.matrix + &other.matrix, self.dims.clone())
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Self::new(&self.matrix - &other.matrix, self.dims.clone())
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            matrix: &self.matrix * factor,
            dims: self.dims.clone(),
            hermitian: self.hermitian && factor.im == 0.0,
        }
    }

    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.side() {
            return Err(Error::DimMismatch(format!(
                "vector of length {} for operator of side {}",
                v.len(),
                self.side()
            )));
        }
        Ok(&self.matrix * v)
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        let ov = self.apply(psi.amplitudes())?;
        Ok(psi.amplitudes().dotc(&ov))
    }
}

fn single(d: FockDim, matrix: CMatrix) -> QuantumOperator {
    QuantumOperator {
        matrix,
        dims: vec![d],
        hermitian: false,
    }
}

/// Ladder operator with `⟨m|b|m+1⟩ = √(m+1)`.
pub fn annihilation_op(d: FockDim) -> QuantumOperator {
    let n = d.get();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        m[(k, k + 1)] = C64::from(((k + 1) as f64).sqrt());
    }
    single(d, m)
}

pub fn creation_op(d: FockDim) -> QuantumOperator {
    annihilation_op(d).adjoint()
}

/// `b†b`, diagonal with entries `0..dim−1`.
pub fn number_op(d: FockDim) -> QuantumOperator {
    let n = d.get();
    let m = CMatrix::from_diagonal(&CVector::from_fn(n, |k, _| C64::from(k as f64)));
    QuantumOperator {
        matrix: m,
        dims: vec![d],
        hermitian: true,
    }
}

/// `q = (b + b†)/√2`.
pub fn position_op(d: FockDim) -> QuantumOperator {
    let b = annihilation_op(d);
    let m = (b.matrix() + b.matrix().adjoint()) * C64::from(std::f64::consts::FRAC_1_SQRT_2);
    QuantumOperator {
        matrix: m,
        dims: vec![d],
        hermitian: true,
    }
}

/// `p = (b − b†)/(i√2)`.
pub fn momentum_op(d: FockDim) -> QuantumOperator {
    let b = annihilation_op(d);
    let m = (b.matrix() - b.matrix().adjoint())
        * (C64::new(0.0, -1.0) * std::f64::consts::FRAC_1_SQRT_2);
    QuantumOperator {
        matrix: m,
        dims: vec![d],
        hermitian: true,
    }
}

pub fn anticommutator(a: &QuantumOperator, b: &QuantumOperator) -> Result<QuantumOperator> {
    a.check_same_dims(b)?;
    let m = a.matrix() * b.matrix() + b.matrix() * a.matrix();
    QuantumOperator::new(m, a.dims.clone())
}

pub fn commutator(a: &QuantumOperator, b: &QuantumOperator) -> Result<QuantumOperator> {
    a.check_same_dims(b)?;
    let m = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    QuantumOperator::new(m, a.dims.clone())
}

/// Kronecker product of two single-mode operators, `a` on the first mode.
pub fn tensor(a: &QuantumOperator, b: &QuantumOperator) -> Result<QuantumOperator> {
    if !a.is_single_mode() || !b.is_single_mode() {
        return Err(Error::Config(
            "tensor product is only defined for single-mode factors".into(),
        ));
    }
    Ok(QuantumOperator {
        matrix: a.matrix().kronecker(b.matrix()),
        dims: vec![a.dims[0], b.dims[0]],
        hermitian: a.hermitian && b.hermitian,
    })
}

fn warn_large_displacement(alpha: C64, d: FockDim) {
    if alpha.norm_sqr() > d.get() as f64 / 4.0 {
        log::warn!(
            "displacement |α|² = {:.3} exceeds dim/4 = {:.2}; truncation error likely",
            alpha.norm_sqr(),
            d.get() as f64 / 4.0
        );
    }
}

/// `D(α) = exp(α b† − α* b)` by matrix exponential of the truncated generator.
/// Exactly unitary on the truncated space.
pub fn displacement_op(alpha: C64, d: FockDim) -> QuantumOperator {
    warn_large_displacement(alpha, d);
    if alpha == ZERO {
        return QuantumOperator::identity(vec![d]).expect("valid dims");
    }
    let b = annihilation_op(d);
    let generator = b.matrix().adjoint() * alpha - b.matrix() * alpha.conj();
    single(d, generator.exp())
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Generalized Laguerre polynomials `L_j^{(a)}(x)` for `j = 0..=n`.
fn laguerre_all(n: usize, a: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(1.0 + a - x);
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + a - x) * out[j] - (jf + a) * out[j - 1]) / (jf + 1.0);
        out.push(next);
    }
    out
}

/// `D(α)` from the closed-form matrix elements
/// `⟨m|D(α)|n⟩ = √(n!/m!) α^{m−n} e^{−|α|²/2} L_n^{(m−n)}(|α|²)` for `m ≥ n`
/// (and the mirrored form with `−α*` above the diagonal).
///
/// These are the untruncated matrix elements restricted to the kept levels,
/// so unlike [`displacement_op`] the result is not exactly unitary near the
/// top of the space.
pub fn displacement_op_laguerre(alpha: C64, d: FockDim) -> QuantumOperator {
    warn_large_displacement(alpha, d);
    let n = d.get();
    if alpha == ZERO {
        return QuantumOperator::identity(vec![d]).expect("valid dims");
    }
    let x = alpha.norm_sqr();
    let ln_r = alpha.norm().ln();
    let theta = alpha.arg();
    let lnf = ln_factorials(n);
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        // k = |row − col|; lower triangle uses α, upper uses −α*.
        let lag = laguerre_all(n - 1 - k, k as f64, x);
        for (low, &l) in lag.iter().enumerate() {
            let high = low + k;
            if l == 0.0 {
                continue;
            }
            let ln_mag = 0.5 * (lnf[low] - lnf[high]) + k as f64 * ln_r - 0.5 * x + l.abs().ln();
            let mag = ln_mag.exp() * l.signum();
            let below = C64::from_polar(mag, k as f64 * theta);
            m[(high, low)] = below;
            if k > 0 {
                // (−α*)^k = |α|^k e^{ik(π − θ)}
                m[(low, high)] = C64::from_polar(mag, k as f64 * (std::f64::consts::PI - theta));
            }
        }
    }
    single(d, m)
}

/// Coherent-state amplitudes `e^{−|α|²/2} α^m/√m!` truncated to `d` levels,
/// without renormalization.
pub fn coherent_amplitudes(alpha: C64, d: FockDim) -> CVector {
    let n = d.get();
    let mut v = CVector::zeros(n);
    v[0] = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for m in 1..n {
        v[m] = v[m - 1] * alpha / (m as f64).sqrt();
    }
    v
}

/// Exact amplitudes of `D(α)|k⟩` on the kept levels, without renormalization.
///
/// Uses `D(α)|k⟩ = (b† − α*) D(α)|k−1⟩ / √k`; each step only couples
/// neighbouring levels, so no truncation error enters the kept amplitudes.
pub fn displaced_fock(alpha: C64, k: usize, d: FockDim) -> CVector {
    let n = d.get();
    let mut v = coherent_amplitudes(alpha, d);
    let ac = alpha.conj();
    for j in 1..=k {
        let mut next = CVector::zeros(n);
        for m in 0..n {
            let raise = if m > 0 {
                v[m - 1] * (m as f64).sqrt()
            } else {
                ZERO
            };
            next[m] = (raise - ac * v[m]) / (j as f64).sqrt();
        }
        v = next;
    }
    v
}

/// Squeezed vacuum annihilated by `cosh r·b + sinh r·b†`; `Var(q) = e^{−2r}/2`.
pub fn squeezed_vacuum(r: f64, d: FockDim) -> StateVector {
    let n = d.get();
    let t = r.tanh();
    let mut v = CVector::zeros(n);
    v[0] = C64::from(r.cosh().powf(-0.5));
    let mut k = 0;
    while k + 2 < n {
        let ratio = -t * (((k + 1) as f64) / ((k + 2) as f64)).sqrt();
        v[k + 2] = v[k] * ratio;
        k += 2;
    }
    StateVector::from_amplitudes(v, vec![d]).expect("non-zero amplitudes")
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
    dims: Vec<FockDim>,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero or non-finite vector.
    pub fn from_amplitudes(amplitudes: CVector, dims: Vec<FockDim>) -> Result<Self> {
        check_mode_count(&dims)?;
        if amplitudes.len() != side_of(&dims) {
            return Err(Error::DimMismatch(format!(
                "{} amplitudes for dims {:?}",
                amplitudes.len(),
                dims
            )));
        }
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(format!(
                "cannot normalize a vector of norm {norm}"
            )));
        }
        Ok(Self {
            amplitudes: amplitudes / C64::from(norm),
            dims,
        })
    }

    pub fn fock(n: usize, d: FockDim) -> Result<Self> {
        if n >= d.get() {
            return Err(Error::Config(format!(
                "Fock level {n} outside a {}-level space",
                d.get()
            )));
        }
        let mut v = CVector::zeros(d.get());
        v[n] = ONE;
        Ok(Self {
            amplitudes: v,
            dims: vec![d],
        })
    }

    pub fn vacuum(d: FockDim) -> Self {
        Self::fock(0, d).expect("dim >= 2")
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[FockDim] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Largest probability held in the top 10% of levels of any mode.
    pub fn tail_mass(&self) -> f64 {
        let probs: Vec<f64> = self.amplitudes.iter().map(|z| z.norm_sqr()).collect();
        tail_mass_of_diagonal(&probs, &self.dims)
    }

    /// Same state with the global phase chosen so the largest-magnitude
    /// amplitude is real and positive.
    pub fn with_canonical_phase(mut self) -> Self {
        let (_, pivot) =
            self.amplitudes
                .iter()
                .enumerate()
                .fold((0usize, ZERO), |best, (i, &z)| {
                    if z.norm() > best.1.norm() {
                        (i, z)
                    } else {
                        best
                    }
                });
        if pivot != ZERO {
            let phase = pivot.conj() / pivot.norm();
            self.amplitudes *= phase;
        }
        self
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            dims: self.dims.clone(),
        }
    }

    /// Re-expresses the state on a space with more (or fewer) levels. Fails if
    /// dropped levels carry more than `1e−12` probability.
    pub fn resized(&self, d: FockDim) -> Result<StateVector> {
        if self.dims.len() != 1 {
            return Err(Error::Config("resize is single-mode only".into()));
        }
        let n = d.get();
        let dropped: f64 = self.amplitudes.iter().skip(n).map(|z| z.norm_sqr()).sum();
        if dropped > 1e-12 {
            return Err(Error::InvalidState(format!(
                "resizing to {n} levels drops probability {dropped:.3e}"
            )));
        }
        let v = CVector::from_fn(n, |i, _| self.amplitudes.get(i).copied().unwrap_or(ZERO));
        StateVector::from_amplitudes(v, vec![d])
    }
}

fn tail_mass_of_diagonal(probs: &[f64], dims: &[FockDim]) -> f64 {
    match dims {
        [d] => {
            let n = d.get();
            probs[n - d.tail_levels()..].iter().sum()
        }
        [d0, d1] => {
            let (n0, n1) = (d0.get(), d1.get());
            let (t0, t1) = (n0 - d0.tail_levels(), n1 - d1.tail_levels());
            let mut first = 0.0;
            let mut second = 0.0;
            for i in 0..n0 {
                for j in 0..n1 {
                    let p = probs[i * n1 + j];
                    if i >= t0 {
                        first += p;
                    }
                    if j >= t1 {
                        second += p;
                    }
                }
            }
            first.max(second)
        }
        _ => unreachable!("mode count checked at construction"),
    }
}

/// A mixed state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    dims: Vec<FockDim>,
}

impl DensityMatrix {
    /// Validates Hermiticity and unit trace within `1e−10` and a minimum
    /// eigenvalue of at least `−1e−8`.
    pub fn from_matrix(matrix: CMatrix, dims: Vec<FockDim>) -> Result<Self> {
        check_mode_count(&dims)?;
        let side = side_of(&dims);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimMismatch(format!(
                "density matrix is {}x{} for dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                dims
            )));
        }
        let herm = hermiticity_defect(&matrix);
        if herm > DENSITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = matrix.trace();
        if (tr - ONE).norm() > DENSITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let rho = Self { matrix, dims };
        let min = rho.min_eigenvalue();
        if min < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Symmetrizes and rescales to unit trace without further checks.
    pub(crate) fn hermitized(mut matrix: CMatrix, dims: Vec<FockDim>) -> Self {
        let adj = matrix.adjoint();
        matrix += adj;
        matrix *= C64::from(0.5);
        let tr = matrix.trace().re;
        matrix /= C64::from(tr);
        Self { matrix, dims }
    }

    /// Thermal state `∝ Σ (n̄/(1+n̄))^k |k⟩⟨k|`, renormalized on the kept levels.
    pub fn thermal(mean_occupation: f64, d: FockDim) -> Result<Self> {
        if !(mean_occupation >= 0.0) || !mean_occupation.is_finite() {
            return Err(Error::Config(format!(
                "thermal occupation must be finite and non-negative, got {mean_occupation}"
            )));
        }
        let n = d.get();
        let ratio = mean_occupation / (1.0 + mean_occupation);
        let weights: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = weights.iter().sum();
        let diag = CVector::from_fn(n, |k, _| C64::from(weights[k] / total));
        Ok(Self {
            matrix: CMatrix::from_diagonal(&diag),
            dims: vec![d],
        })
    }

    /// Product state `a ⊗ b` of two single-mode states.
    pub fn product(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        if a.dims.len() != 1 || b.dims.len() != 1 {
            return Err(Error::Config(
                "product states need single-mode factors".into(),
            ));
        }
        Ok(Self {
            matrix: a.matrix.kronecker(&b.matrix),
            dims: vec![a.dims[0], b.dims[0]],
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> &[FockDim] {
        &self.dims
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// `tr ρ²`.
    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// The eigenvector with the largest eigenvalue, and that eigenvalue.
    pub fn dominant_state(&self) -> (StateVector, f64) {
        let (vals, vecs) = self.eigen();
        let (idx, &top) = vals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty spectrum");
        let v = vecs.column(idx).into_owned();
        let state = StateVector::from_amplitudes(v, self.dims.clone())
            .expect("eigenvectors are normalized")
            .with_canonical_phase();
        (state, top)
    }

    pub fn expectation(&self, op: &QuantumOperator) -> Result<C64> {
        if op.dims() != self.dims.as_slice() {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                op.dims(),
                self.dims
            )));
        }
        // tr(ρ O) = Σ_ij ρ_ij O_ji
        let mut acc = ZERO;
        for (j, col) in self.matrix.column_iter().enumerate() {
            for (i, &r) in col.iter().enumerate() {
                acc += r * op.matrix()[(j, i)];
            }
        }
        Ok(acc)
    }

    /// Reduced state of mode `keep` (0 = cavity, 1 = mechanics).
    pub fn partial_trace(&self, keep: usize) -> Result<DensityMatrix> {
        let [d0, d1] = self.dims[..] else {
            return Err(Error::Config("partial trace needs a two-mode state".into()));
        };
        let (n0, n1) = (d0.get(), d1.get());
        let m = &self.matrix;
        let reduced = match keep {
            0 => CMatrix::from_fn(n0, n0, |a, b| {
                (0..n1).map(|j| m[(a * n1 + j, b * n1 + j)]).sum()
            }),
            1 => CMatrix::from_fn(n1, n1, |a, b| {
                (0..n0).map(|i| m[(i * n1 + a, i * n1 + b)]).sum()
            }),
            _ => return Err(Error::Config(format!("no mode with index {keep}"))),
        };
        Ok(DensityMatrix {
            matrix: reduced,
            dims: vec![if keep == 0 { d0 } else { d1 }],
        })
    }

    pub fn tail_mass(&self) -> f64 {
        let probs: Vec<f64> = self.matrix.diagonal().iter().map(|z| z.re).collect();
        tail_mass_of_diagonal(&probs, &self.dims)
    }

    /// `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(trace_norm_hermitian(&self.matrix - &other.matrix) * 0.5)
    }
}

pub(crate) fn trace_norm_hermitian(m: CMatrix) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .sum()
}
