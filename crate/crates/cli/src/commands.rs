use std::path::Path;

use fockforge::analytic::{
    build_annihilator_f, build_dark_operator, build_literal_phi_n, build_phi_n, escalate,
    kernel_state, phi_params, superposition_coefficients, CouplingSet, Escalation, TargetSpec,
};
use fockforge::dynamics::{
    build_effective_single_mode, build_two_mode_model, evolve_with, steady_state_with,
    LindbladModel,
};
use fockforge::fockspace::{
    displacement_op, number_op, DensityMatrix, FockDim, QuantumOperator, StateVector,
};
use fockforge::metrics::{
    displaced_fock_reference, fidelity, mean_occupation, purity, quadrature_moments, FidelityMode,
    StateRef, StateReport,
};
use fockforge::phasespace::{negativity_volume, wigner, NEGATIVITY_CONVENTION};
use fockforge::C64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, Model, RunConfig};
use crate::output::{sidecar, write_json, write_rows, write_wigner_csv};
use crate::CliError;

/// Tail mass below which automatically escalated truncations stop growing.
pub const TAIL_TOLERANCE: f64 = 1e-10;
/// Mechanical truncation for dynamics when none is given.
pub const DEFAULT_DYNAMICS_DIM: usize = 60;
/// Residuals and fidelity defects above this are flagged in `verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-7;

/// Runs the configured command. Writes any files it produces and returns
/// the JSON report.
pub fn run(cfg: &RunConfig) -> Result<Value, CliError> {
    let body = match cfg.command {
        Command::Couplings => cmd_couplings(cfg)?,
        Command::State => cmd_state(cfg)?,
        Command::Verify => cmd_verify(cfg)?,
        Command::Evolve => cmd_evolve(cfg)?,
        Command::Wigner => cmd_wigner(cfg)?,
        Command::Sweep => cmd_sweep(cfg)?,
    };
    let report = json!({
        "command": cfg.command.name(),
        "config": cfg,
        "result": body,
    });
    if let Some(out) = &cfg.out {
        let path = match cfg.command {
            Command::Wigner | Command::Sweep => sidecar(out),
            _ => out.clone(),
        };
        write_json(&path, &report)?;
    }
    Ok(report)
}

/// `φₙ` on the configured truncation, or on an escalated one.
pub fn target_state(
    cfg: &RunConfig,
    spec: &TargetSpec,
) -> Result<(StateVector, Escalation), CliError> {
    Ok(match cfg.dim {
        Some(d) => {
            let state = build_phi_n(spec, FockDim::new(d)?)?;
            let tail_mass = state.tail_mass();
            (
                state,
                Escalation {
                    dim: d,
                    tail_mass,
                    capped: false,
                },
            )
        }
        None => escalate(TAIL_TOLERANCE, |d| build_phi_n(spec, d))?,
    })
}

fn cmd_couplings(cfg: &RunConfig) -> Result<Value, CliError> {
    let spec = cfg.target()?;
    let c = cfg.couplings()?;
    let mut out = json!({
        "G_minus": c.g_minus,
        "G_plus": c.g_plus,
        "G_0": c.g_zero,
        "kappa": c.kappa,
        "zeta": spec.zeta,
        "squeezing_r": spec.squeezing(),
        "stable": c.is_stable(),
    });
    if spec.zeta == 0.0 {
        out["note"] = json!("vacuum target");
    }
    Ok(out)
}

fn cmd_state(cfg: &RunConfig) -> Result<Value, CliError> {
    let spec = cfg.target()?;
    let (state, esc) = target_state(cfg, &spec)?;
    let params = phi_params(&spec);
    let amplitudes: Vec<[f64; 2]> = state.amplitudes().iter().map(|z| [z.re, z.im]).collect();
    Ok(json!({
        "xi": finite_or_null(params.xi),
        "c": finite_or_null(params.c),
        "norm": params.norm,
        "displacement": params.displacement(),
        "superposition": superposition_coefficients(&spec),
        "truncation": esc,
        "report": StateReport::against_target(&state, &spec)?,
        "amplitudes": amplitudes,
    }))
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Serialize)]
struct KernelCheck {
    fidelity_vs_analytic: f64,
    residual: f64,
    separation_ratio: f64,
    well_separated: bool,
}

fn residual(op: &QuantumOperator, psi: &StateVector) -> Result<f64, CliError> {
    Ok(op.apply(psi.amplitudes())?.norm())
}

fn cmd_verify(cfg: &RunConfig) -> Result<Value, CliError> {
    let c = cfg.couplings()?;
    let mut out = serde_json::Map::new();
    if !c.is_stable() {
        out.insert(
            "displaced_fock_limit".into(),
            displaced_fock_limit(cfg, &c)?,
        );
        return Ok(Value::Object(out));
    }
    let spec = cfg.target()?;
    let (phi, esc) = target_state(cfg, &spec)?;
    let d = FockDim::new(esc.dim)?;
    let a = build_dark_operator(&c, d);
    let dark_residual = residual(&a, &phi)?;

    let kernel = kernel_state(&a)?;
    let kernel_fid = fidelity(&kernel.state, &phi)?;

    let printed = build_literal_phi_n(&spec, d)?;
    let f = build_annihilator_f(&c, &spec, d)?;
    let literal_kernel = kernel_state(&f.literal)?;
    let rescaled_kernel = kernel_state(&f.rescaled)?;
    let literal_vs_dark = fidelity(&literal_kernel.state, &kernel.state)?;

    let flagged = esc.capped
        || dark_residual > VERIFY_TOLERANCE * a.inf_norm()
        || 1.0 - kernel_fid > VERIFY_TOLERANCE;

    out.insert("truncation".into(), json!(esc));
    out.insert(
        "dark_operator".into(),
        json!({
            "residual": dark_residual,
            "relative_residual": dark_residual / a.inf_norm(),
        }),
    );
    out.insert(
        "kernel".into(),
        json!(KernelCheck {
            fidelity_vs_analytic: kernel_fid,
            residual: kernel.residual,
            separation_ratio: kernel.separation_ratio,
            well_separated: kernel.well_separated,
        }),
    );
    out.insert(
        "printed_coefficients".into(),
        json!({
            "fidelity_vs_analytic": fidelity(&printed, &phi)?,
            "dark_residual": residual(&a, &printed)?,
        }),
    );
    out.insert(
        "annihilator_f".into(),
        json!({
            "gain": f.gain,
            "nonlinear_coefficient": f.nonlinear_coefficient,
            "literal_kernel_vs_dark_kernel": literal_vs_dark,
            "literal_kernel_vs_analytic": fidelity(&literal_kernel.state, &phi)?,
            "literal_residual_on_analytic": residual(&f.literal, &phi)?,
            "rescaled_kernel_vs_analytic": fidelity(&rescaled_kernel.state, &phi)?,
            "rescaled_residual_on_analytic": residual(&f.rescaled, &phi)?,
            "note": "the literal operator matches the dark operator only when the gain is 1; \
                     the rescaled one multiplies the nonlinear term by the gain",
        }),
    );
    out.insert(
        "state_report".into(),
        json!(StateReport::against_target(&phi, &spec)?),
    );
    out.insert("flagged".into(), json!(flagged));
    Ok(Value::Object(out))
}

/// Kernel of the dark operator at `G₊ = G₋` and the eigenrelation
/// `b†b D(√(n+½))|φ⟩ = n D(√(n+½))|φ⟩`.
fn displaced_fock_limit(cfg: &RunConfig, c: &CouplingSet) -> Result<Value, CliError> {
    if !cfg.allow_unstable || c.g_plus != c.g_minus {
        return Err(fockforge::Error::Unstable {
            g_plus: c.g_plus,
            g_minus: c.g_minus,
        }
        .into());
    }
    let n = cfg
        .n
        .ok_or_else(|| CliError::Config("the displaced-Fock check needs n".into()))?;
    let d = FockDim::new(cfg.dim.unwrap_or(100).max(n as usize + 2))?;
    let kernel = kernel_state(&build_dark_operator(c, d))?;
    let shift = displacement_op(C64::from((n as f64 + 0.5).sqrt()), d);
    let shifted = shift.apply(kernel.state.amplitudes())?;
    let eigen_residual = (number_op(d).apply(&shifted)? - &shifted * C64::from(n as f64)).norm();
    let reference = displaced_fock_reference(n as usize, FidelityMode::Raw, d)?;
    Ok(json!({
        "dim": d.get(),
        "kernel_residual": kernel.residual,
        "separation_ratio": kernel.separation_ratio,
        "eigen_residual": eigen_residual,
        "fidelity_vs_displaced_fock": fidelity(&kernel.state, &reference)?,
        "tail_mass": kernel.state.tail_mass(),
    }))
}

#[derive(Serialize)]
struct MechanicsSummary {
    purity: f64,
    mean_q: f64,
    var_q: f64,
    mean_p: f64,
    var_p: f64,
    mean_n: f64,
    tail_mass: f64,
    /// Fidelity with `D(−√(n+½))|n⟩`.
    displaced_fock_raw: f64,
}

fn mechanics_summary(rho: &DensityMatrix, n: u32) -> Result<MechanicsSummary, CliError> {
    let m = quadrature_moments(rho)?;
    let d = rho.dims()[0];
    Ok(MechanicsSummary {
        purity: purity(rho),
        mean_q: m.mean_q,
        var_q: m.var_q,
        mean_p: m.mean_p,
        var_p: m.var_p,
        mean_n: mean_occupation(rho)?,
        tail_mass: StateRef::from(rho).tail_mass(),
        displaced_fock_raw: fidelity(
            rho,
            &displaced_fock_reference(n as usize, FidelityMode::Raw, d)?,
        )?,
    })
}

/// Model and initial state for `evolve`.
pub fn dynamics_setup(cfg: &RunConfig) -> Result<(LindbladModel, DensityMatrix), CliError> {
    let c = cfg.couplings()?;
    if !c.is_stable() && !cfg.allow_unstable {
        return Err(fockforge::Error::Unstable {
            g_plus: c.g_plus,
            g_minus: c.g_minus,
        }
        .into());
    }
    let dm = FockDim::new(dynamics_dim(cfg)?)?;
    let mech0 = match cfg.evolve.thermal_start {
        Some(nth) if nth > 0.0 => DensityMatrix::thermal(nth, dm)?,
        _ => StateVector::vacuum(dm).to_density(),
    };
    Ok(match cfg.evolve.model {
        Model::Effective => (build_effective_single_mode(&c, dm)?, mech0),
        Model::TwoMode => {
            let dc = FockDim::new(cfg.cav_dim)?;
            let cav0 = StateVector::vacuum(dc).to_density();
            (
                build_two_mode_model(&c, dc, dm)?,
                DensityMatrix::product(&cav0, &mech0)?,
            )
        }
    })
}

fn dynamics_dim(cfg: &RunConfig) -> Result<usize, CliError> {
    if let Some(d) = cfg.dim {
        return Ok(d);
    }
    Ok(match (cfg.evolve.model, cfg.target()) {
        (Model::Effective, Ok(spec)) => target_state(cfg, &spec)?.1.dim,
        _ => DEFAULT_DYNAMICS_DIM,
    })
}

fn cmd_evolve(cfg: &RunConfig) -> Result<Value, CliError> {
    let (model, rho0) = dynamics_setup(cfg)?;
    let e = &cfg.evolve;
    let control = e.step_control();
    let (report, converged) = if e.steady {
        let ss = steady_state_with(&model, &rho0, e.steady_control())?;
        (ss.report, Some(ss.converged))
    } else {
        (
            evolve_with(&model, &rho0, e.t_final, e.checkpoints, control)?,
            None,
        )
    };
    let n = cfg.n.expect("checked at resolution");
    let state = &report.final_state;
    let (mech, cavity_vacuum) = match e.model {
        Model::Effective => (state.clone(), None),
        Model::TwoMode => {
            let cav = state.partial_trace(0)?;
            let vac = StateVector::vacuum(cav.dims()[0]);
            (state.partial_trace(1)?, Some(fidelity(&cav, &vac)?))
        }
    };
    let mut out = serde_json::Map::new();
    out.insert(
        "dims".into(),
        json!(model.dims().iter().map(|d| d.get()).collect::<Vec<_>>()),
    );
    out.insert("evolution".into(), json!(report.summary(&control)));
    out.insert("converged".into(), json!(converged));
    out.insert("mechanics".into(), json!(mechanics_summary(&mech, n)?));
    out.insert("cavity_vacuum_fidelity".into(), json!(cavity_vacuum));
    if let Ok(spec) = cfg.target() {
        out.insert(
            "target_report".into(),
            json!(StateReport::against_target(&mech, &spec)?),
        );
    }
    Ok(Value::Object(out))
}

fn cmd_wigner(cfg: &RunConfig) -> Result<Value, CliError> {
    let spec = cfg.target()?;
    let (phi, esc) = target_state(cfg, &spec)?;
    let (qg, pg) = cfg.grid.grids()?;
    let w = wigner(&phi, &qg, &pg)?;
    let out = cfg.out.as_deref().expect("checked at resolution");
    write_wigner_csv(out, &w)?;
    Ok(json!({
        "csv": out.display().to_string(),
        "rows": qg.len() * pg.len(),
        "truncation": esc,
        "normalization": w.normalization(),
        "negativity_volume": negativity_volume(&w),
        "negativity_convention": NEGATIVITY_CONVENTION,
        "min": extremum(w.min()),
        "max": extremum(w.max()),
        "max_imaginary": w.max_imaginary,
        "boundary_mass": {"q": w.boundary_mass.0, "p": w.boundary_mass.1},
        "marginal_skewness": w.marginal_skewness(),
        "negative_minima_at_p0": w.negative_minima_along_p(0.0),
    }))
}

fn extremum(e: fockforge::phasespace::Extremum) -> Value {
    json!({"q": e.q, "p": e.p, "w": e.w})
}

pub const SWEEP_HEADER: [&str; 14] = [
    "n",
    "zeta",
    "dim",
    "capped",
    "fidelity_vs_target",
    "purity",
    "mean_q",
    "var_q",
    "var_p",
    "mean_n",
    "tail_mass",
    "displaced_fock_raw",
    "displaced_fock_corrected",
    "error",
];

/// Same text as the number in a JSON report.
fn number(v: f64) -> String {
    serde_json::to_string(&v).expect("plain f64")
}

fn sweep_point(cfg: &RunConfig, n: u32, zeta: f64) -> Vec<String> {
    let computed = (|| -> Result<(Escalation, StateReport), CliError> {
        let spec = TargetSpec::new(n, zeta)?;
        let (phi, esc) = target_state(cfg, &spec)?;
        Ok((esc, StateReport::against_target(&phi, &spec)?))
    })();
    let mut row = vec![n.to_string(), number(zeta)];
    match computed {
        Ok((esc, r)) => {
            row.push(esc.dim.to_string());
            row.push(esc.capped.to_string());
            for v in [
                r.fidelity_vs_target,
                r.purity,
                r.mean_q,
                r.var_q,
                r.var_p,
                r.mean_n,
                r.tail_mass,
                r.displaced_fock_raw,
                r.displaced_fock_corrected,
            ] {
                row.push(number(v));
            }
            row.push(String::new());
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), SWEEP_HEADER.len() - 3));
            row.push(e.to_string());
        }
    }
    row
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Value, CliError> {
    let points: Vec<(u32, f64)> = cfg
        .sweep
        .ns
        .iter()
        .flat_map(|&n| cfg.sweep.zetas.iter().map(move |&z| (n, z)))
        .collect();
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|&(n, z)| sweep_point(cfg, n, z))
        .collect();
    let out: &Path = cfg.out.as_deref().expect("checked at resolution");
    write_rows(out, &SWEEP_HEADER, &rows)?;
    let failures = rows
        .iter()
        .filter(|r| !r[SWEEP_HEADER.len() - 1].is_empty())
        .count();
    Ok(json!({
        "csv": out.display().to_string(),
        "rows": rows.len(),
        "failures": failures,
    }))
}
