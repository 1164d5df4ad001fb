//! Lindblad evolution of the linearized cavity–mechanics model and of its
//! adiabatically eliminated single-mode version.
//!
//! The generator is `−i[H, ρ] + Σ γ (L ρ L† − ½{L†L, ρ})`. Time stepping is
//! classical fourth-order Runge–Kutta with a fixed step; between checkpoints
//! the state is re-Hermitized and renormalized.

use serde::{Deserialize, Serialize};

use crate::analytic::{build_dark_operator, CouplingSet};
use crate::fockspace::{
    annihilation_op, hermiticity_defect, tensor, DensityMatrix, FockDim, QuantumOperator,
    StateVector,
};
use crate::{CMatrix, Error, Result, C64};

/// Default cavity truncation for the two-mode model.
pub const DEFAULT_CAVITY_DIM: usize = 6;

/// Target trace distance between full- and half-step runs.
pub const DISCRETIZATION_TOL: f64 = 1e-6;
const MAX_STEP_HALVINGS: u32 = 6;
/// Largest step factor inside the stability region of the integrator.
pub const MAX_STEP_FACTOR: f64 = 2.5;

/// Hamiltonian plus weighted jump operators.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    hamiltonian: QuantumOperator,
    jumps: Vec<(QuantumOperator, f64)>,
}

impl LindbladModel {
    pub fn new(hamiltonian: QuantumOperator, jumps: Vec<(QuantumOperator, f64)>) -> Result<Self> {
        let hamiltonian = if hamiltonian.is_hermitian() {
            hamiltonian
        } else {
            hamiltonian.assert_hermitian()?
        };
        for (op, rate) in &jumps {
            if op.dims() != hamiltonian.dims() {
                return Err(Error::DimMismatch(format!(
                    "jump operator on {:?}, Hamiltonian on {:?}",
                    op.dims(),
                    hamiltonian.dims()
                )));
            }
            if !(*rate > 0.0) || !rate.is_finite() {
                return Err(Error::Config(format!(
                    "jump rates must be positive, got {rate}"
                )));
            }
        }
        Ok(Self { hamiltonian, jumps })
    }

    pub fn hamiltonian(&self) -> &QuantumOperator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[(QuantumOperator, f64)] {
        &self.jumps
    }

    pub fn dims(&self) -> &[FockDim] {
        self.hamiltonian.dims()
    }

    /// Pure ground state `|0…0⟩⟨0…0|`.
    pub fn ground_state(&self) -> DensityMatrix {
        let side = self.hamiltonian.side();
        let mut v = crate::CVector::zeros(side);
        v[0] = C64::new(1.0, 0.0);
        StateVector::from_amplitudes(v, self.dims().to_vec())
            .expect("unit vector")
            .to_density()
    }

    /// Bound on the spectral radius of the generator in the Hilbert–Schmidt
    /// norm: `(λmax(H) − λmin(H)) + 2 Σ γ ‖L‖₂²`, taking the smaller of the
    /// bounds for the model as given and for its gauge-equivalent form with
    /// each `L` shifted by minus its mean diagonal.
    pub fn spectral_bound(&self) -> f64 {
        let plain = Self::bound_for(
            self.hamiltonian.matrix(),
            self.jumps.iter().map(|(l, g)| (l.matrix().clone(), *g)),
        );
        let (h, jumps) = self.centred();
        plain.min(Self::bound_for(&h, jumps.into_iter()))
    }

    /// `L → L + c`, `H → H + (i/2) Σ γ (c L† − c* L)` leaves the generator
    /// unchanged; `c` is chosen as `−tr L / N`.
    fn centred(&self) -> (CMatrix, Vec<(CMatrix, f64)>) {
        let side = self.hamiltonian.side() as f64;
        let mut h = self.hamiltonian.matrix().clone();
        let mut jumps = Vec::with_capacity(self.jumps.len());
        for (l, g) in &self.jumps {
            let l = l.matrix();
            let c = -l.trace() / side;
            let correction = (l.adjoint() * c - l * c.conj()) * C64::new(0.0, 0.5 * g);
            h += correction;
            let mut shifted = l.clone();
            for k in 0..shifted.nrows() {
                shifted[(k, k)] += c;
            }
            jumps.push((shifted, *g));
        }
        (h, jumps)
    }

    fn bound_for(h: &CMatrix, jumps: impl Iterator<Item = (CMatrix, f64)>) -> f64 {
        let hermitian = (h + h.adjoint()) * C64::from(0.5);
        let ev = hermitian.symmetric_eigenvalues();
        let dissipative = jumps.fold(0.0, |acc, (l, g)| {
            let ldl = l.adjoint() * &l;
            acc + 2.0 * g * ldl.symmetric_eigenvalues().max()
        });
        ev.max() - ev.min() + dissipative
    }
}

/// `H = −(d† ⊗ A + d ⊗ A†)` with `A` the dark-state operator, and cavity
/// decay `d ⊗ I` at rate κ.
pub fn build_two_mode_model(
    couplings: &CouplingSet,
    d_cav: FockDim,
    d_mech: FockDim,
) -> Result<LindbladModel> {
    let d = annihilation_op(d_cav);
    let a = build_dark_operator(couplings, d_mech);
    let pump = tensor(&d.adjoint(), &a)?;
    let h = pump.plus(&pump.adjoint())?.scaled(C64::from(-1.0));
    let id_mech = QuantumOperator::identity(vec![d_mech])?;
    let decay = tensor(&d, &id_mech)?;
    LindbladModel::new(h.assert_hermitian()?, vec![(decay, couplings.kappa)])
}

/// Single-mode model after eliminating the cavity: `H = 0` and one jump
/// `L = (2/√κ) A` at unit rate.
pub fn build_effective_single_mode(
    couplings: &CouplingSet,
    d_mech: FockDim,
) -> Result<LindbladModel> {
    if couplings.max_coupling() > 0.2 * couplings.kappa {
        log::warn!(
            "adiabatic elimination assumes G ≪ κ; max G = {} with κ = {}",
            couplings.max_coupling(),
            couplings.kappa
        );
    }
    let jump =
        build_dark_operator(couplings, d_mech).scaled(C64::from(2.0 / couplings.kappa.sqrt()));
    let h = QuantumOperator::zeros(vec![d_mech])?.assert_hermitian()?;
    LindbladModel::new(h, vec![(jump, 1.0)])
}

/// Dense evaluation of the Lindblad generator on `rho`.
pub fn lindblad_rhs(model: &LindbladModel, rho: &DensityMatrix) -> Result<CMatrix> {
    if rho.dims() != model.dims() {
        return Err(Error::DimMismatch(format!(
            "state on {:?}, model on {:?}",
            rho.dims(),
            model.dims()
        )));
    }
    let r = rho.matrix();
    let h = model.hamiltonian.matrix();
    let mut out = (h * r - r * h) * C64::new(0.0, -1.0);
    for (l, rate) in &model.jumps {
        let l = l.matrix();
        let ld = l.adjoint();
        let ldl = &ld * l;
        out += (l * r * &ld - (&ldl * r + r * &ldl) * C64::from(0.5)) * C64::from(*rate);
    }
    Ok(out)
}

/// Compressed sparse rows.
struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &CMatrix) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    /// `out = self · x`, all matrices column-major and square.
    fn left_mul(&self, x: &CMatrix, out: &mut CMatrix) {
        let n = x.nrows();
        for (col, dst) in x
            .as_slice()
            .chunks_exact(n)
            .zip(out.as_mut_slice().chunks_exact_mut(n))
        {
            for (i, o) in dst.iter_mut().enumerate() {
                *o = self.row(i).map(|(k, v)| v * col[k]).sum();
            }
        }
    }

    /// `out += s · y · self†`.
    fn right_mul_adjoint_add(&self, y: &CMatrix, s: C64, out: &mut CMatrix) {
        let n = y.nrows();
        let ys = y.as_slice();
        for (j, dst) in out.as_mut_slice().chunks_exact_mut(n).enumerate() {
            for (k, v) in self.row(j) {
                let c = v.conj() * s;
                for (o, &y) in dst.iter_mut().zip(&ys[k * n..(k + 1) * n]) {
                    *o += c * y;
                }
            }
        }
    }
}

/// Generator in the form `−iKρ + iρK† + Σ γ LρL†` with
/// `K = H − (i/2)Σ γ L†L`, applied with sparse operators.
struct Generator {
    effective: Csr,
    jumps: Vec<(Csr, f64)>,
    scratch: CMatrix,
}

impl Generator {
    fn new(model: &LindbladModel) -> Self {
        let mut k = model.hamiltonian.matrix().clone();
        for (l, rate) in &model.jumps {
            let ldl = l.matrix().adjoint() * l.matrix();
            k -= ldl * C64::new(0.0, 0.5 * rate);
        }
        let n = k.nrows();
        Self {
            effective: Csr::from_dense(&k),
            jumps: model
                .jumps
                .iter()
                .map(|(l, r)| (Csr::from_dense(l.matrix()), *r))
                .collect(),
            scratch: CMatrix::zeros(n, n),
        }
    }

    fn apply(&mut self, rho: &CMatrix, out: &mut CMatrix) {
        self.effective.left_mul(rho, out);
        for z in out.as_mut_slice() {
            *z = C64::new(z.im, -z.re);
        }
        self.effective
            .right_mul_adjoint_add(rho, C64::new(0.0, 1.0), out);
        for (l, rate) in &self.jumps {
            l.left_mul(rho, &mut self.scratch);
            l.right_mul_adjoint_add(&self.scratch, C64::from(*rate), out);
        }
    }
}

/// Tunables of the fixed-step integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Step is `factor / LindbladModel::spectral_bound`. Fourth-order
    /// Runge–Kutta is stable on the left half-disc of radius 2.6.
    pub factor: f64,
    /// Growth of mean occupation over `max(initial, 1)` that counts as
    /// divergence.
    pub divergence_factor: f64,
    /// Re-run the first checkpoint interval at half step, halving the step
    /// until the discretization error is below [`DISCRETIZATION_TOL`].
    pub check_discretization: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            factor: 2.0,
            divergence_factor: 10.0,
            check_discretization: true,
        }
    }
}

/// Evolution outcome.
#[derive(Clone, Debug)]
pub struct EvolutionReport {
    pub final_state: DensityMatrix,
    /// Checkpoint times, starting at 0.
    pub times: Vec<f64>,
    /// Largest `|tr ρ − 1|` seen before a renormalization.
    pub trace_drift: f64,
    /// Largest entry of `ρ − ρ†` seen before a re-Hermitization.
    pub hermiticity_drift: f64,
    /// Trace distance between the last two checkpoints.
    pub convergence_metric: f64,
    /// Trace distance between successive checkpoints.
    pub metric_history: Vec<f64>,
    /// Total mean occupation at every checkpoint.
    pub occupations: Vec<f64>,
    pub diverged: bool,
    pub step: f64,
    /// Trace distance between full- and half-step runs over the first
    /// interval.
    pub discretization_error: Option<f64>,
}

/// Serializable summary without the state itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub times: Vec<f64>,
    pub trace_drift: f64,
    pub hermiticity_drift: f64,
    pub convergence_metric: f64,
    pub metric_history: Vec<f64>,
    pub occupations: Vec<f64>,
    pub diverged: bool,
    pub divergence_rule: String,
    pub step: f64,
    pub discretization_error: Option<f64>,
}

impl EvolutionReport {
    pub fn summary(&self, control: &StepControl) -> EvolutionSummary {
        EvolutionSummary {
            times: self.times.clone(),
            trace_drift: self.trace_drift,
            hermiticity_drift: self.hermiticity_drift,
            convergence_metric: self.convergence_metric,
            metric_history: self.metric_history.clone(),
            occupations: self.occupations.clone(),
            diverged: self.diverged,
            divergence_rule: format!(
                "mean occupation > {} x max(initial, 1)",
                control.divergence_factor
            ),
            step: self.step,
            discretization_error: self.discretization_error,
        }
    }
}

/// Total mean occupation summed over modes.
pub fn total_occupation(rho: &CMatrix, dims: &[FockDim]) -> f64 {
    let diag = rho.diagonal();
    match dims {
        [_] => diag.iter().enumerate().map(|(k, z)| k as f64 * z.re).sum(),
        [_, d1] => {
            let n1 = d1.get();
            diag.iter()
                .enumerate()
                .map(|(idx, z)| ((idx / n1) + (idx % n1)) as f64 * z.re)
                .sum()
        }
        _ => unreachable!("mode count checked at construction"),
    }
}

/// `y += a x`
fn axpy(y: &mut CMatrix, a: f64, x: &CMatrix) {
    for (yi, xi) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yi += xi * a;
    }
}

struct Integrator {
    generator: Generator,
    rho: CMatrix,
    k: [CMatrix; 4],
    tmp: CMatrix,
    step: f64,
}

impl Integrator {
    fn new(model: &LindbladModel, rho0: &CMatrix, step: f64) -> Self {
        let n = rho0.nrows();
        let z = || CMatrix::zeros(n, n);
        Self {
            generator: Generator::new(model),
            rho: rho0.clone(),
            k: [z(), z(), z(), z()],
            tmp: z(),
            step,
        }
    }

    fn rk4_step(&mut self, h: f64) {
        let [k1, k2, k3, k4] = &mut self.k;
        self.generator.apply(&self.rho, k1);
        self.tmp.copy_from(&self.rho);
        axpy(&mut self.tmp, 0.5 * h, k1);
        self.generator.apply(&self.tmp, k2);
        self.tmp.copy_from(&self.rho);
        axpy(&mut self.tmp, 0.5 * h, k2);
        self.generator.apply(&self.tmp, k3);
        self.tmp.copy_from(&self.rho);
        axpy(&mut self.tmp, h, k3);
        self.generator.apply(&self.tmp, k4);
        let w = h / 6.0;
        axpy(&mut self.rho, w, k1);
        axpy(&mut self.rho, 2.0 * w, k2);
        axpy(&mut self.rho, 2.0 * w, k3);
        axpy(&mut self.rho, w, k4);
    }

    /// Advances by `dt` with the largest step ≤ `self.step` that divides it.
    fn advance(&mut self, dt: f64) {
        let steps = (dt / self.step).ceil().max(1.0) as usize;
        let h = dt / steps as f64;
        for _ in 0..steps {
            self.rk4_step(h);
        }
    }
}

fn validate_initial(model: &LindbladModel, rho0: &DensityMatrix) -> Result<()> {
    if rho0.dims() != model.dims() {
        return Err(Error::DimMismatch(format!(
            "initial state on {:?}, model on {:?}",
            rho0.dims(),
            model.dims()
        )));
    }
    Ok(())
}

/// State of a running evolution with checkpoint bookkeeping.
struct Run {
    integrator: Integrator,
    dims: Vec<FockDim>,
    control: StepControl,
    previous: DensityMatrix,
    occupation_limit: f64,
    report: EvolutionReport,
    time: f64,
}

impl Run {
    fn start(model: &LindbladModel, rho0: &DensityMatrix, control: StepControl) -> Result<Self> {
        validate_initial(model, rho0)?;
        if !(control.factor > 0.0 && control.factor <= MAX_STEP_FACTOR) {
            return Err(Error::Config(format!(
                "step factor must lie in (0, {MAX_STEP_FACTOR}], got {}",
                control.factor
            )));
        }
        let bound = model.spectral_bound();
        let step = if bound > 0.0 {
            control.factor / bound
        } else {
            control.factor
        };
        let n0 = total_occupation(rho0.matrix(), rho0.dims());
        Ok(Self {
            integrator: Integrator::new(model, rho0.matrix(), step),
            dims: rho0.dims().to_vec(),
            control,
            previous: rho0.clone(),
            occupation_limit: control.divergence_factor * n0.max(1.0),
            report: EvolutionReport {
                final_state: rho0.clone(),
                times: vec![0.0],
                trace_drift: 0.0,
                hermiticity_drift: 0.0,
                convergence_metric: f64::INFINITY,
                metric_history: Vec::new(),
                occupations: vec![n0],
                diverged: false,
                step,
                discretization_error: None,
            },
            time: 0.0,
        })
    }

    /// Runs the first interval at the current step and at half of it, halving
    /// the step until the two agree to [`DISCRETIZATION_TOL`] in trace
    /// distance. Leaves the integrator at the end of the interval.
    fn refine_step(&mut self, model: &LindbladModel, dt: f64) -> Result<()> {
        let start = self.integrator.rho.clone();
        self.integrator.advance(dt);
        let mut coarse = DensityMatrix::hermitized(self.integrator.rho.clone(), self.dims.clone());
        let mut err;
        let mut halvings = 0;
        loop {
            let mut fine = Integrator::new(model, &start, self.integrator.step * 0.5);
            fine.advance(dt);
            let fine_state = DensityMatrix::hermitized(fine.rho.clone(), self.dims.clone());
            err = coarse.trace_distance(&fine_state)?;
            if err <= DISCRETIZATION_TOL || halvings == MAX_STEP_HALVINGS {
                break;
            }
            halvings += 1;
            self.integrator.step *= 0.5;
            self.integrator.rho = fine.rho;
            coarse = fine_state;
        }
        if err > DISCRETIZATION_TOL {
            log::warn!("discretization error {err:.3e} over the first interval");
        }
        self.report.step = self.integrator.step;
        self.report.discretization_error = Some(err);
        Ok(())
    }

    /// Advances one interval and records a checkpoint. Returns false once the
    /// run has diverged.
    fn checkpoint(&mut self, model: &LindbladModel, dt: f64) -> Result<bool> {
        if self.control.check_discretization && self.report.discretization_error.is_none() {
            self.refine_step(model, dt)?;
        } else {
            self.integrator.advance(dt);
        }
        self.time += dt;

        let raw = &self.integrator.rho;
        let tr = raw.trace();
        self.report.trace_drift = self
            .report
            .trace_drift
            .max((tr - C64::new(1.0, 0.0)).norm());
        self.report.hermiticity_drift = self.report.hermiticity_drift.max(hermiticity_defect(raw));
        let finite = raw.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            self.report.diverged = true;
            self.report.times.push(self.time);
            return Ok(false);
        }
        let state = DensityMatrix::hermitized(raw.clone(), self.dims.clone());
        self.integrator.rho.copy_from(state.matrix());

        let occ = total_occupation(state.matrix(), &self.dims);
        let metric = state.trace_distance(&self.previous)?;
        self.report.times.push(self.time);
        self.report.occupations.push(occ);
        self.report.metric_history.push(metric);
        self.report.convergence_metric = metric;
        self.previous = state.clone();
        self.report.final_state = state;
        if occ > self.occupation_limit {
            self.report.diverged = true;
            return Ok(false);
        }
        Ok(true)
    }
}

/// Evolves `rho0` to `t_final` with `checkpoints` evenly spaced checkpoints
/// and the default [`StepControl`].
pub fn evolve(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    checkpoints: usize,
) -> Result<EvolutionReport> {
    evolve_with(model, rho0, t_final, checkpoints, StepControl::default())
}

pub fn evolve_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    t_final: f64,
    checkpoints: usize,
    control: StepControl,
) -> Result<EvolutionReport> {
    if !(t_final > 0.0) || checkpoints == 0 {
        return Err(Error::Config(format!(
            "need t_final > 0 and at least one checkpoint, got {t_final} and {checkpoints}"
        )));
    }
    let mut run = Run::start(model, rho0, control)?;
    let dt = t_final / checkpoints as f64;
    for _ in 0..checkpoints {
        if !run.checkpoint(model, dt)? {
            break;
        }
    }
    Ok(run.report)
}

/// Convergence detection for [`steady_state_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateControl {
    /// Trace distance between successive checkpoints that counts as converged.
    pub tolerance: f64,
    /// Time between checkpoints.
    pub interval: f64,
    /// Evolution time budget.
    pub max_time: f64,
    pub step: StepControl,
}

impl Default for SteadyStateControl {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            interval: 1.0,
            max_time: 500.0,
            step: StepControl::default(),
        }
    }
}

/// Long-time limit of an evolution.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub state: DensityMatrix,
    pub converged: bool,
    pub diverged: bool,
    pub convergence_metric: f64,
    pub elapsed: f64,
    pub report: EvolutionReport,
}

pub fn steady_state(model: &LindbladModel, rho0: &DensityMatrix) -> Result<SteadyState> {
    steady_state_with(model, rho0, SteadyStateControl::default())
}

/// Evolves until successive checkpoints are closer than the tolerance in
/// trace distance, the run diverges, or the time budget is spent. A
/// non-converged result is returned, flagged, rather than treated as an error.
pub fn steady_state_with(
    model: &LindbladModel,
    rho0: &DensityMatrix,
    control: SteadyStateControl,
) -> Result<SteadyState> {
    if !(control.interval > 0.0) || !(control.max_time >= control.interval) {
        return Err(Error::Config(format!(
            "need 0 < interval <= max_time, got {} and {}",
            control.interval, control.max_time
        )));
    }
    let mut run = Run::start(model, rho0, control.step)?;
    let mut converged = false;
    while run.time + 0.5 * control.interval < control.max_time {
        if !run.checkpoint(model, control.interval)? {
            break;
        }
        if run.report.convergence_metric < control.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "no steady state within t = {} (last metric {:.3e}, diverged = {})",
            run.time,
            run.report.convergence_metric,
            run.report.diverged
        );
    }
    Ok(SteadyState {
        state: run.report.final_state.clone(),
        converged,
        diverged: run.report.diverged,
        convergence_metric: run.report.convergence_metric,
        elapsed: run.time,
        report: run.report,
    })
}
