//! Discrete state evolution over an oriented loop.
//!
//! At every loop point the state is re-expanded in the local biorthonormal
//! basis and each component is advanced by its own eigenvalue:
//!
//! ```text
//! c_{n,j+1} = ⟨θ_{n,j+1}|Ψ_j⟩ · exp(-i ω_{n,j+1} Δt_j)
//! Ψ_{j+1}   = Σ_n c_{n,j+1} |ψ_{n,j+1}⟩
//! ```
//!
//! `Δt_j` is therefore the dwell at point `j + 1`. A zero dwell is a pure
//! change of basis and leaves the physical vector untouched.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{
    check_ep_clearance, eigensystem_at, EigenOptions, Eigensystem, HamiltonianFamily, ParameterPoint, C64,
};
use crate::path::{Direction, OrientedLoop, ParameterLoop};
use crate::scheduler::Schedule;

/// Largest exponent accepted by a raw [`step`] before it reports overflow.
const MAX_GROWTH_EXPONENT: f64 = 700.0;

/// Input/output modes: the two eigenstates at the loop's start point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

impl Mode {
    pub fn index(self) -> usize {
        match self {
            Mode::A => 0,
            Mode::B => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::A => "A",
            Mode::B => "B",
        }
    }

    pub fn other(self) -> Mode {
        match self {
            Mode::A => Mode::B,
            Mode::B => Mode::A,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub psi: DVector<C64>,
    pub coeffs: DVector<C64>,
    pub step_index: usize,
    pub eigensystem: Arc<Eigensystem>,
}

impl EvolutionState {
    /// State `Σ_n c_n |ψ_n⟩` at `step_index` of some traversal.
    pub fn from_coefficients(eigensystem: Arc<Eigensystem>, coeffs: DVector<C64>, step_index: usize) -> Result<Self> {
        if coeffs.len() != eigensystem.dimension() {
            return Err(Error::invalid("coefficient count does not match dimension"));
        }
        let psi = eigensystem.right_matrix() * &coeffs;
        Ok(Self {
            psi,
            coeffs,
            step_index,
            eigensystem,
        })
    }

    /// Expands an arbitrary physical vector in the basis of `eigensystem`.
    pub fn from_vector(eigensystem: Arc<Eigensystem>, psi: DVector<C64>, step_index: usize) -> Result<Self> {
        if psi.len() != eigensystem.dimension() {
            return Err(Error::invalid("state length does not match dimension"));
        }
        let coeffs = eigensystem.project(&psi);
        Ok(Self {
            psi,
            coeffs,
            step_index,
            eigensystem,
        })
    }

    /// Divides `psi` and `coeffs` by `|psi|`; returns the factor removed.
    pub fn renormalize(&mut self) -> f64 {
        let norm = self.psi.norm();
        if norm > 0.0 && norm.is_finite() {
            let inv = C64::new(1.0 / norm, 0.0);
            self.psi *= inv;
            self.coeffs *= inv;
        }
        norm
    }
}

pub fn init_state(start: &Arc<Eigensystem>, mode: Mode) -> Result<EvolutionState> {
    let n = start.dimension();
    let mut coeffs = DVector::from_element(n, C64::new(0.0, 0.0));
    coeffs[mode.index()] = C64::new(1.0, 0.0);
    EvolutionState::from_coefficients(start.clone(), coeffs, 0)
}

/// One application of the difference iteration onto the eigensystem `next`.
pub fn step(state: &EvolutionState, next: &Arc<Eigensystem>, dt: f64) -> Result<EvolutionState> {
    check_dt(dt)?;
    if next.dimension() != state.psi.len() {
        return Err(Error::invalid("eigensystem dimension does not match state"));
    }
    let growth = next.eigenvalues().iter().map(|w| w.im * dt).fold(f64::NEG_INFINITY, f64::max);
    if growth > MAX_GROWTH_EXPONENT {
        return Err(Error::Step(format!(
            "amplitude growth e^{growth:.1} overflows; renormalize the state between steps"
        )));
    }
    let coeffs = propagate_coefficients(next, &state.psi, dt, 0.0);
    let psi = next.right_matrix() * &coeffs;
    Ok(EvolutionState {
        psi,
        coeffs,
        step_index: state.step_index + 1,
        eigensystem: next.clone(),
    })
}

/// Like [`step`], but divides out `exp(max_n Im ω_n · dt)` and the norm of the
/// result. Returns the natural log of the total factor removed.
pub fn step_normalized(state: &EvolutionState, next: &Arc<Eigensystem>, dt: f64) -> Result<(EvolutionState, f64)> {
    check_dt(dt)?;
    if next.dimension() != state.psi.len() {
        return Err(Error::invalid("eigensystem dimension does not match state"));
    }
    let shift = next.eigenvalues().iter().map(|w| w.im * dt).fold(f64::NEG_INFINITY, f64::max);
    let coeffs = propagate_coefficients(next, &state.psi, dt, shift);
    let psi = next.right_matrix() * &coeffs;
    let mut out = EvolutionState {
        psi,
        coeffs,
        step_index: state.step_index + 1,
        eigensystem: next.clone(),
    };
    let norm = out.renormalize();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidState("state vanished during propagation".into()));
    }
    Ok((out, shift + norm.ln()))
}

fn check_dt(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::Step(format!("dwell must be finite and non-negative, got {dt}")));
    }
    Ok(())
}

/// `⟨θ_n|psi⟩ · exp(-i ω_n dt - shift)` for every `n`.
fn propagate_coefficients(es: &Eigensystem, psi: &DVector<C64>, dt: f64, shift: f64) -> DVector<C64> {
    let mut a = es.project(psi);
    if dt != 0.0 || shift != 0.0 {
        for (c, w) in a.iter_mut().zip(es.eigenvalues()) {
            let phase = C64::new(0.0, -1.0) * w * dt - shift;
            *c *= phase.exp();
        }
    }
    a
}

fn proportions_of(coeffs: &DVector<C64>) -> Result<Vec<f64>> {
    let weights: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidState("all coefficients vanish".into()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// `P_n = |c_n|² / Σ_m |c_m|²`.
pub fn proportions(state: &EvolutionState) -> Result<Vec<f64>> {
    proportions_of(&state.coeffs)
}

/// `ω̄ = Σ_n P_n ω_n`.
pub fn weighted_eigenvalue(state: &EvolutionState) -> Result<C64> {
    let p = proportions(state)?;
    Ok(p.iter()
        .zip(state.eigensystem.eigenvalues())
        .map(|(p, w)| w * *p)
        .sum())
}

/// Covectors and vectors of the two start-point eigenstates.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub theta_a: DVector<C64>,
    pub theta_b: DVector<C64>,
    pub psi_a: DVector<C64>,
    pub psi_b: DVector<C64>,
}

impl ModeBasis {
    pub fn from_start(start: &Eigensystem) -> Self {
        Self {
            theta_a: start.left_covector(0),
            theta_b: start.left_covector(1),
            psi_a: start.right_vector(0),
            psi_b: start.right_vector(1),
        }
    }

    pub fn psi(&self, mode: Mode) -> &DVector<C64> {
        match mode {
            Mode::A => &self.psi_a,
            Mode::B => &self.psi_b,
        }
    }

    /// `(ζ_A, ζ_B)` of a physical vector.
    pub fn project(&self, psi: &DVector<C64>) -> Result<(f64, f64)> {
        let a = self.theta_a.transpose() * psi;
        let b = self.theta_b.transpose() * psi;
        let (wa, wb) = (a[0].norm_sqr(), b[0].norm_sqr());
        let total = wa + wb;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidState("state has no component in modes A and B".into()));
        }
        Ok((wa / total, wb / total))
    }
}

/// `ζ_{A,B} = |⟨θ_{A,B}|Ψ⟩|² / Σ_{A,B} |⟨θ|Ψ⟩|²`.
pub fn mode_projection(state: &EvolutionState, basis: &ModeBasis) -> Result<(f64, f64)> {
    basis.project(&state.psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub j: usize,
    pub point: ParameterPoint,
    pub dt: f64,
    pub t_cum: f64,
    pub proportions: Vec<f64>,
    pub omega_bar: C64,
    pub zeta_a: f64,
    pub zeta_b: f64,
    /// `dC/dt` over the interval arriving at this point; `+∞` for a jump and
    /// 0 at the start point.
    pub speed: f64,
    /// Natural log of the norm factor divided out at this step.
    pub log_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub direction: Direction,
    pub mode: Mode,
    pub schedule: Schedule,
    pub samples: Vec<TraceSample>,
}

impl EvolutionTrace {
    pub fn end(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    /// `(ζ_A, ζ_B)` at the last sample.
    pub fn end_zeta(&self) -> Result<(f64, f64)> {
        self.end()
            .map(|s| (s.zeta_a, s.zeta_b))
            .ok_or_else(|| Error::InvalidState("empty trace".into()))
    }

    pub fn total_time(&self) -> f64 {
        self.end().map(|s| s.t_cum).unwrap_or(0.0)
    }
}

/// Eigensystems along one traversal of a loop, computed once with path gauge
/// continuity and shared by every schedule evaluated on that traversal.
#[derive(Debug, Clone)]
pub struct EigenPath {
    direction: Direction,
    points: Vec<ParameterPoint>,
    arc_coords: Vec<f64>,
    eigensystems: Vec<Arc<Eigensystem>>,
    basis: ModeBasis,
}

impl EigenPath {
    pub fn compute(family: &dyn HamiltonianFamily, oriented: &OrientedLoop, opts: &EigenOptions) -> Result<Self> {
        if family.dimension() < 2 {
            return Err(Error::invalid("family dimension must be at least 2"));
        }
        check_ep_clearance(family, oriented.points(), opts.ep_radius)?;
        let mut eigensystems: Vec<Arc<Eigensystem>> = Vec::with_capacity(oriented.points().len());
        for p in oriented.points() {
            let prev = eigensystems.last().map(|e| e.as_ref());
            eigensystems.push(Arc::new(eigensystem_at(family, *p, prev, opts)?));
        }
        let basis = ModeBasis::from_start(&eigensystems[0]);
        Ok(Self {
            direction: oriented.direction(),
            points: oriented.points().to_vec(),
            arc_coords: oriented.arc_coords().to_vec(),
            eigensystems,
            basis,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn n_intervals(&self) -> usize {
        self.points.len() - 1
    }

    pub fn eigensystems(&self) -> &[Arc<Eigensystem>] {
        &self.eigensystems
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn initial_state(&self, mode: Mode) -> Result<EvolutionState> {
        init_state(&self.eigensystems[0], mode)
    }

    fn check_dwells(&self, dwells: &[f64]) -> Result<()> {
        if dwells.len() != self.n_intervals() {
            return Err(Error::invalid(format!(
                "schedule has {} dwells, loop has {} intervals",
                dwells.len(),
                self.n_intervals()
            )));
        }
        Ok(())
    }

    /// Full trace for a dwell vector given in this traversal's order.
    pub fn trace(&self, schedule: &Schedule, mode: Mode) -> Result<EvolutionTrace> {
        let dwells = schedule.dwells_for(self.direction);
        self.check_dwells(&dwells)?;
        let mut state = self.initial_state(mode)?;
        let mut samples = Vec::with_capacity(self.points.len());
        samples.push(self.sample(&state, 0.0, 0.0, 0.0, 0.0)?);
        let mut t_cum = 0.0;
        for (j, &dt) in dwells.iter().enumerate() {
            let (next, log_scale) = step_normalized(&state, &self.eigensystems[j + 1], dt)?;
            state = next;
            t_cum += dt;
            let dc = self.arc_coords[j + 1] - self.arc_coords[j];
            let speed = if dt == 0.0 { f64::INFINITY } else { dc / dt };
            samples.push(self.sample(&state, dt, t_cum, speed, log_scale)?);
        }
        Ok(EvolutionTrace {
            direction: self.direction,
            mode,
            schedule: schedule.clone(),
            samples,
        })
    }

    fn sample(&self, state: &EvolutionState, dt: f64, t_cum: f64, speed: f64, log_scale: f64) -> Result<TraceSample> {
        let proportions = proportions(state)?;
        let omega_bar = weighted_eigenvalue(state)?;
        let (zeta_a, zeta_b) = mode_projection(state, &self.basis)?;
        Ok(TraceSample {
            j: state.step_index,
            point: self.points[state.step_index],
            dt,
            t_cum,
            proportions,
            omega_bar,
            zeta_a,
            zeta_b,
            speed,
            log_scale,
        })
    }

    /// `(ζ_A, ζ_B)` at the end of the traversal, for dwells already in this
    /// traversal's order. Zero dwells leave the physical vector unchanged, so
    /// only points with a positive dwell are visited.
    pub fn end_projection(&self, dwells: &[f64], mode: Mode) -> Result<(f64, f64)> {
        self.check_dwells(dwells)?;
        let mut psi = self.basis.psi(mode).clone();
        for (j, &dt) in dwells.iter().enumerate() {
            if dt == 0.0 {
                continue;
            }
            check_dt(dt)?;
            let es = &self.eigensystems[j + 1];
            let shift = es.eigenvalues().iter().map(|w| w.im * dt).fold(f64::NEG_INFINITY, f64::max);
            let c = propagate_coefficients(es, &psi, dt, shift);
            psi = es.right_matrix() * c;
            let norm = psi.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::InvalidState("state vanished during propagation".into()));
            }
            psi /= C64::new(norm, 0.0);
        }
        self.basis.project(&psi)
    }
}

/// Eigensystem caches for both traversal directions of one loop.
#[derive(Debug, Clone)]
pub struct PathPair {
    pub ccw: Arc<EigenPath>,
    pub cw: Arc<EigenPath>,
}

impl PathPair {
    pub fn compute(family: &dyn HamiltonianFamily, lp: &ParameterLoop, opts: &EigenOptions) -> Result<Self> {
        Ok(Self {
            ccw: Arc::new(EigenPath::compute(family, &lp.orient(Direction::Ccw), opts)?),
            cw: Arc::new(EigenPath::compute(family, &lp.orient(Direction::Cw), opts)?),
        })
    }

    pub fn get(&self, direction: Direction) -> &Arc<EigenPath> {
        match direction {
            Direction::Ccw => &self.ccw,
            Direction::Cw => &self.cw,
        }
    }

    pub fn n_intervals(&self) -> usize {
        self.ccw.n_intervals()
    }
}

/// Builds the eigensystem cache for `oriented` and traces `schedule` on it.
pub fn run_trace(
    oriented: &OrientedLoop,
    family: &dyn HamiltonianFamily,
    schedule: &Schedule,
    mode: Mode,
    opts: &EigenOptions,
) -> Result<EvolutionTrace> {
    EigenPath::compute(family, oriented, opts)?.trace(schedule, mode)
}
