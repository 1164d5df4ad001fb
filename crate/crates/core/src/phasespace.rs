//! Position/momentum wavefunctions and Wigner functions of pure single-mode
//! states.
//!
//! The Wigner function is evaluated from the wavefunction as
//! `W(q,p) = (1/π) ∫ dy e^{2ipy} ψ*(q+y) ψ(q−y)`, with `y` sampled on the
//! step of the q grid so that `q ± y` land on grid nodes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fockspace::{DensityMatrix, StateVector};
use crate::hermite::hermite_functions;
use crate::{CVector, Error, Result, C64};

/// Largest probability allowed outside the q or p range of a Wigner grid.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-4;
/// Largest imaginary residue tolerated before it is discarded.
pub const IMAGINARY_TOL: f64 = 1e-10;
/// Purity required before a mixed state is replaced by its dominant
/// eigenvector.
pub const PURITY_FOR_WIGNER: f64 = 0.999;
/// Integrand products below this magnitude are skipped.
const UNDERFLOW_CUTOFF: f64 = 1e-300;
/// Convention tag recorded with negativity volumes.
pub const NEGATIVITY_CONVENTION: &str = "sum of |min(W,0)| dq dp (not doubled)";

/// Uniform grid `min, min+step, …` up to `max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealGrid1D {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RealGrid1D {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && step.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if step <= 0.0 || max <= min {
            return Err(Error::Config(format!(
                "grid needs max > min and step > 0, got [{min}, {max}] step {step}"
            )));
        }
        if (max - min) / step > 1e6 {
            return Err(Error::Config(format!(
                "grid [{min}, {max}] with step {step} exceeds 1e6 intervals"
            )));
        }
        Ok(Self { min, max, step })
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Index of the node closest to `x`, if `x` lies within half a step of one.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let f = (x - self.min) / self.step;
        let i = f.round();
        if i < 0.0 || i as usize >= self.len() || (f - i).abs() > 0.5 {
            return None;
        }
        Some(i as usize)
    }
}

fn single_mode_coeffs(psi: &StateVector) -> Result<&CVector> {
    if psi.dims().len() != 1 {
        return Err(Error::Config(
            "phase-space representations are single-mode only".into(),
        ));
    }
    if psi.tail_mass() > 1e-8 {
        log::warn!(
            "state has tail mass {:.3e}; wavefunction may carry truncation error",
            psi.tail_mass()
        );
    }
    Ok(psi.amplitudes())
}

/// `Σ_k c_k phase_k ⟨x|k⟩` using a caller-provided Hermite buffer.
fn synthesize(coeffs: &[C64], x: f64, buf: &mut [f64]) -> C64 {
    hermite_functions(coeffs.len(), x, buf);
    coeffs.iter().zip(buf.iter()).map(|(c, &h)| c * h).sum()
}

fn check_finite(vals: &[C64]) -> Result<()> {
    if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidState("non-finite wavefunction sample".into()));
    }
    Ok(())
}

/// `ψ(q) = Σ_k c_k ⟨q|k⟩` at every node of `grid`.
pub fn state_to_position(psi: &StateVector, grid: &RealGrid1D) -> Result<Vec<C64>> {
    let coeffs = single_mode_coeffs(psi)?.as_slice();
    let mut buf = vec![0.0; coeffs.len()];
    let vals: Vec<C64> = grid
        .points()
        .map(|q| synthesize(coeffs, q, &mut buf))
        .collect();
    check_finite(&vals)?;
    Ok(vals)
}

fn momentum_coeffs(coeffs: &CVector) -> Vec<C64> {
    // ⟨p|k⟩ = (−i)^k ⟨q=p|k⟩
    let phases = [
        C64::new(1.0, 0.0),
        C64::new(0.0, -1.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
    ];
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * phases[k % 4])
        .collect()
}

/// Momentum-space wavefunction `ψ̃(p)` at every node of `grid`.
pub fn state_to_momentum(psi: &StateVector, grid: &RealGrid1D) -> Result<Vec<C64>> {
    let coeffs = momentum_coeffs(single_mode_coeffs(psi)?);
    let mut buf = vec![0.0; coeffs.len()];
    let vals: Vec<C64> = grid
        .points()
        .map(|p| synthesize(&coeffs, p, &mut buf))
        .collect();
    check_finite(&vals)?;
    Ok(vals)
}

/// Half-width beyond which every kept oscillator eigenfunction has
/// decayed below ~e^{−72}.
fn support_radius(dim: usize) -> f64 {
    (2.0 * dim as f64 + 1.0).sqrt() + 12.0
}

/// Probability outside `[grid.min, grid.max]` of the density sampled by
/// `sampler`, integrated with the grid step over the support window.
fn outside_mass(coeffs: &[C64], grid: &RealGrid1D, buf: &mut [f64]) -> f64 {
    let radius = support_radius(coeffs.len());
    let h = grid.step;
    let mut mass = 0.0;
    let mut x = grid.min - h;
    while x > -radius {
        mass += synthesize(coeffs, x, buf).norm_sqr() * h;
        x -= h;
    }
    let mut x = grid.min + grid.len() as f64 * h;
    while x < radius {
        mass += synthesize(coeffs, x, buf).norm_sqr() * h;
        x += h;
    }
    mass
}

/// Wigner function sampled on a rectangular grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub q_grid: RealGrid1D,
    pub p_grid: RealGrid1D,
    /// `values[(i, j)] = W(q_i, p_j)`.
    pub values: DMatrix<f64>,
    /// Largest discarded imaginary part.
    pub max_imaginary: f64,
    /// Probability outside the q range and outside the p range.
    pub boundary_mass: (f64, f64),
}

/// Position and momentum extremum of a Wigner grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub q: f64,
    pub p: f64,
    pub w: f64,
}

impl WignerGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Riemann sum `Σ W Δq Δp`.
    pub fn normalization(&self) -> f64 {
        self.values.sum() * self.q_grid.step * self.p_grid.step
    }

    pub fn min(&self) -> Extremum {
        self.extremum(|a, b| a < b)
    }

    pub fn max(&self) -> Extremum {
        self.extremum(|a, b| a > b)
    }

    fn extremum(&self, better: impl Fn(f64, f64) -> bool) -> Extremum {
        let mut best = (0, 0, self.values[(0, 0)]);
        for j in 0..self.values.ncols() {
            for i in 0..self.values.nrows() {
                let v = self.values[(i, j)];
                if better(v, best.2) {
                    best = (i, j, v);
                }
            }
        }
        Extremum {
            q: self.q_grid.point(best.0),
            p: self.p_grid.point(best.1),
            w: best.2,
        }
    }

    /// `P(q_i) = Σ_j W(q_i, p_j) Δp`.
    pub fn q_marginal(&self) -> Vec<f64> {
        self.values
            .row_iter()
            .map(|row| row.sum() * self.p_grid.step)
            .collect()
    }

    /// Absolute standardized third moment of the q marginal; zero for a
    /// distribution symmetric about its mean.
    pub fn marginal_skewness(&self) -> f64 {
        let marg = self.q_marginal();
        let total: f64 = marg.iter().sum();
        let qs: Vec<f64> = self.q_grid.points().collect();
        let mean = qs.iter().zip(&marg).map(|(q, w)| q * w).sum::<f64>() / total;
        let central = |k: i32| {
            qs.iter()
                .zip(&marg)
                .map(|(q, w)| (q - mean).powi(k) * w)
                .sum::<f64>()
                / total
        };
        (central(3) / central(2).powf(1.5)).abs()
    }

    /// Values along the row of p nodes closest to `p`.
    pub fn cut_at_p(&self, p: f64) -> Option<Vec<f64>> {
        let j = self.p_grid.index_of(p)?;
        Some(self.values.column(j).iter().copied().collect())
    }

    /// Strict local minima with `W < 0` along the `p` cut.
    pub fn negative_minima_along_p(&self, p: f64) -> Option<usize> {
        let cut = self.cut_at_p(p)?;
        Some(
            cut.windows(3)
                .filter(|w| w[1] < 0.0 && w[1] < w[0] && w[1] < w[2])
                .count(),
        )
    }
}

/// `Σ |min(W, 0)| Δq Δp`; see [`NEGATIVITY_CONVENTION`].
pub fn negativity_volume(w: &WignerGrid) -> f64 {
    w.values
        .iter()
        .filter(|&&v| v < 0.0)
        .fold(0.0, |acc, v| acc - v)
        * w.q_grid.step
        * w.p_grid.step
}

/// Wavefunction samples on the q lattice extended to cover the support.
struct Lattice {
    /// Index of `q_grid.min` inside `values`.
    offset: usize,
    values: Vec<C64>,
}

fn extended_lattice(coeffs: &[C64], q_grid: &RealGrid1D) -> Lattice {
    let h = q_grid.step;
    let radius = support_radius(coeffs.len());
    let below = ((q_grid.min + radius) / h).ceil().max(0.0) as usize;
    let top = q_grid.max;
    let above = ((radius - top) / h).ceil().max(0.0) as usize;
    let total = below + q_grid.len() + above;
    let values = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; coeffs.len()],
            |buf, idx| {
                let x = q_grid.min + (idx as f64 - below as f64) * h;
                synthesize(coeffs, x, buf)
            },
        )
        .collect();
    Lattice {
        offset: below,
        values,
    }
}

/// Wigner function of a pure single-mode state.
///
/// Fails with [`Error::GridTooNarrow`] if more than [`BOUNDARY_MASS_LIMIT`]
/// of probability lies outside either axis range.
pub fn wigner(psi: &StateVector, q_grid: &RealGrid1D, p_grid: &RealGrid1D) -> Result<WignerGrid> {
    let coeffs = single_mode_coeffs(psi)?.as_slice().to_vec();
    let mut buf = vec![0.0; coeffs.len()];
    let q_out = outside_mass(&coeffs, q_grid, &mut buf);
    if q_out > BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooNarrow {
            axis: "q",
            mass: q_out,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }
    let mom = momentum_coeffs(psi.amplitudes());
    let p_out = outside_mass(&mom, p_grid, &mut buf);
    if p_out > BOUNDARY_MASS_LIMIT {
        return Err(Error::GridTooNarrow {
            axis: "p",
            mass: p_out,
            limit: BOUNDARY_MASS_LIMIT,
        });
    }

    let lattice = extended_lattice(&coeffs, q_grid);
    check_finite(&lattice.values)?;
    let h = q_grid.step;
    let nq = q_grid.len();
    let np = p_grid.len();
    let total = lattice.values.len();

    let rows: Vec<(Vec<f64>, f64)> = (0..nq)
        .into_par_iter()
        .map(|i| {
            let centre = lattice.offset + i;
            let reach = centre.min(total - 1 - centre);
            // g_k = ψ*(q + y_k) ψ(q − y_k) for k = −reach..=reach
            let products: Vec<(f64, C64)> = (-(reach as isize)..=reach as isize)
                .filter_map(|k| {
                    let plus = lattice.values[(centre as isize + k) as usize];
                    let minus = lattice.values[(centre as isize - k) as usize];
                    let g = plus.conj() * minus;
                    (g.norm() >= UNDERFLOW_CUTOFF).then_some((k as f64 * h, g))
                })
                .collect();
            let mut row = Vec::with_capacity(np);
            let mut max_im = 0.0f64;
            for j in 0..np {
                let p = p_grid.point(j);
                let acc: C64 = products
                    .iter()
                    .map(|&(y, g)| C64::from_polar(1.0, 2.0 * p * y) * g)
                    .sum();
                let w = acc * (h / std::f64::consts::PI);
                max_im = max_im.max(w.im.abs());
                row.push(w.re);
            }
            (row, max_im)
        })
        .collect();

    let max_imaginary = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    if max_imaginary > IMAGINARY_TOL {
        return Err(Error::InvalidState(format!(
            "Wigner quadrature left an imaginary residue of {max_imaginary:.3e}"
        )));
    }
    let values = DMatrix::from_fn(nq, np, |i, j| rows[i].0[j]);
    Ok(WignerGrid {
        q_grid: *q_grid,
        p_grid: *p_grid,
        values,
        max_imaginary,
        boundary_mass: (q_out, p_out),
    })
}

/// Wigner function at a single phase-space point, integrating over `y`
/// with step `step` out to the support radius of the state.
pub fn wigner_point(psi: &StateVector, q: f64, p: f64, step: f64) -> Result<f64> {
    let coeffs = single_mode_coeffs(psi)?.as_slice();
    let mut buf = vec![0.0; coeffs.len()];
    let radius = support_radius(coeffs.len()) + q.abs();
    let kmax = (radius / step).ceil() as isize;
    let mut acc = C64::new(0.0, 0.0);
    for k in -kmax..=kmax {
        let y = k as f64 * step;
        let plus = synthesize(coeffs, q + y, &mut buf);
        let minus = synthesize(coeffs, q - y, &mut buf);
        acc += C64::from_polar(1.0, 2.0 * p * y) * plus.conj() * minus;
    }
    let w = acc * (step / std::f64::consts::PI);
    if w.im.abs() > IMAGINARY_TOL {
        return Err(Error::InvalidState(format!(
            "Wigner point has imaginary residue {:.3e}",
            w.im
        )));
    }
    Ok(w.re)
}

/// Wigner function of a nearly pure mixed state through its dominant
/// eigenvector. Refuses states with purity at or below 0.999.
pub fn wigner_of_density(
    rho: &DensityMatrix,
    q_grid: &RealGrid1D,
    p_grid: &RealGrid1D,
) -> Result<WignerGrid> {
    let purity = rho.purity();
    if purity <= PURITY_FOR_WIGNER {
        return Err(Error::InvalidState(format!(
            "purity {purity:.6} too low for a wavefunction-based Wigner function"
        )));
    }
    let (psi, _) = rho.dominant_state();
    wigner(&psi, q_grid, p_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{coherent_amplitudes, FockDim};
    use std::f64::consts::PI;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn grid_basics() {
        let g = RealGrid1D::new(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(
            g.points().collect::<Vec<_>>(),
            vec![-1.0, -0.5, 0.0, 0.5, 1.0]
        );
        assert_eq!(g.index_of(0.1), Some(2));
        assert_eq!(g.index_of(3.0), None);
        assert!(RealGrid1D::new(1.0, 1.0, 0.1).is_err());
        assert!(RealGrid1D::new(0.0, 1.0, 0.0).is_err());
        assert!(RealGrid1D::new(0.0, 1e7, 1.0).is_err());
        let fine = RealGrid1D::new(-12.0, 12.0, 0.01).unwrap();
        assert_eq!(fine.len(), 2401);
    }

    #[test]
    fn vacuum_wavefunction() {
        let g = RealGrid1D::new(-3.0, 3.0, 0.25).unwrap();
        let psi = state_to_position(&StateVector::vacuum(dim(10)), &g).unwrap();
        for (q, v) in g.points().zip(&psi) {
            let want = PI.powf(-0.25) * (-0.5 * q * q).exp();
            assert!((v.re - want).abs() < 1e-15 && v.im == 0.0);
        }
    }

    #[test]
    fn coherent_wavefunction_centre() {
        let d = dim(40);
        let alpha = 1.3;
        let s = StateVector::from_amplitudes(coherent_amplitudes(C64::from(alpha), d), vec![d])
            .unwrap();
        let g = RealGrid1D::new(-10.0, 10.0, 0.01).unwrap();
        let psi = state_to_position(&s, &g).unwrap();
        let mean: f64 = g
            .points()
            .zip(&psi)
            .map(|(q, v)| q * v.norm_sqr())
            .sum::<f64>()
            * g.step;
        assert!(
            (mean - std::f64::consts::SQRT_2 * alpha).abs() < 1e-10,
            "{mean}"
        );
        let peak = g
            .points()
            .zip(&psi)
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert!((peak - std::f64::consts::SQRT_2 * alpha).abs() < 0.011);
    }

    #[test]
    fn vacuum_and_one_photon_at_origin() {
        let g = RealGrid1D::new(-6.0, 6.0, 0.05).unwrap();
        let vac = wigner(&StateVector::vacuum(dim(10)), &g, &g).unwrap();
        let o = g.index_of(0.0).unwrap();
        assert!((vac.value(o, o) - 1.0 / PI).abs() < 1e-10);
        assert!(negativity_volume(&vac) < 1e-10);
        assert!((vac.normalization() - 1.0).abs() < 1e-6);

        let one = wigner(&StateVector::fock(1, dim(10)).unwrap(), &g, &g).unwrap();
        assert!((one.value(o, o) + 1.0 / PI).abs() < 1e-10);
        assert!(one.max_imaginary < 1e-12);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = RealGrid1D::new(-1.0, 1.0, 0.05).unwrap();
        let wide = RealGrid1D::new(-6.0, 6.0, 0.05).unwrap();
        let err = wigner(&StateVector::vacuum(dim(10)), &g, &wide).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow { axis: "q", .. }));
        let err = wigner(&StateVector::vacuum(dim(10)), &wide, &g).unwrap_err();
        assert!(matches!(err, Error::GridTooNarrow { axis: "p", .. }));
    }

    #[test]
    fn point_evaluation_matches_grid() {
        let g = RealGrid1D::new(-6.0, 6.0, 0.05).unwrap();
        let s = StateVector::fock(2, dim(12)).unwrap();
        let w = wigner(&s, &g, &g).unwrap();
        let (i, j) = (g.index_of(0.5).unwrap(), g.index_of(-1.0).unwrap());
        let pt = wigner_point(&s, 0.5, -1.0, 0.05).unwrap();
        assert!((w.value(i, j) - pt).abs() < 1e-12);
    }

    #[test]
    fn mixed_states_need_purity() {
        let g = RealGrid1D::new(-6.0, 6.0, 0.1).unwrap();
        let th = DensityMatrix::thermal(0.5, dim(20)).unwrap();
        assert!(wigner_of_density(&th, &g, &g).is_err());
        let pure = StateVector::fock(1, dim(20)).unwrap().to_density();
        let w = wigner_of_density(&pure, &g, &g).unwrap();
        let o = g.index_of(0.0).unwrap();
        assert!((w.value(o, o) + 1.0 / PI).abs() < 1e-10);
    }
}
