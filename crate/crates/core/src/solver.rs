//! Splitting integrator for `∂t F + v·∇x F = (M[F] − F)/ε` on the torus.
//!
//! Transport is a conservative finite-volume update per velocity node, one
//! axis at a time. Relaxation blends each cell toward its discrete
//! equilibrium with the exact exponential weights, so the per-cell discrete
//! density and momentum are untouched.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{KineticField, PeriodicField};
use crate::equilibrium::{discrete_maxwellian, moments, slice_entropy, GasParams};
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitting {
    /// Relaxation then transport.
    Lie,
    /// Half relaxation, full transport, half relaxation.
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportScheme {
    Upwind1,
    MusclMinmod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub cfl: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub splitting: Splitting,
    pub transport: TransportScheme,
    /// Time between observer calls.
    pub output_interval: f64,
    /// Abort when a cell leaves `|ρ − 1| ≤ e`, `|u| ≤ e`.
    pub envelope: Option<f64>,
    /// Measure the entropy change of every relaxation step.
    pub track_entropy: bool,
    /// Overrides the CFL-derived step. Still checked against the bound.
    pub dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 1.0,
            epsilon: 1.0,
            splitting: Splitting::Strang,
            transport: TransportScheme::MusclMinmod,
            output_interval: 0.1,
            envelope: None,
            track_entropy: false,
            dt: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SolverConfig(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return bad(format!(
                "output interval must be positive, got {}",
                self.output_interval
            ));
        }
        if let Some(e) = self.envelope {
            if !(e > 0.0) {
                return bad(format!("envelope must be positive, got {e}"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

/// Largest stable transport step `cfl · min Δx / L` for velocity half-width `L`.
pub fn cfl_limit(field: &KineticField, cfl: f64) -> f64 {
    cfl * field.spatial().min_spacing() / field.velocity().half_width()
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub field: KineticField,
    pub t: f64,
    pub steps: u64,
    /// Largest `H_after − H_before` seen across a relaxation step (entropy tracking).
    pub max_entropy_increase: f64,
    /// Relaxation steps whose total entropy went up by more than round-off.
    pub entropy_violations: u64,
    /// Largest number of Newton iterations used by the equilibrium correction.
    pub max_correction_iterations: usize,
}

impl SolverState {
    pub fn new(field: KineticField, t: f64) -> Self {
        Self {
            field,
            t,
            steps: 0,
            max_entropy_increase: f64::NEG_INFINITY,
            entropy_violations: 0,
            max_correction_iterations: 0,
        }
    }
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// One transport step of length `dt`, swept axis by axis.
pub fn transport_step(
    field: &mut KineticField,
    dt: f64,
    cfl: f64,
    scheme: TransportScheme,
) -> Result<()> {
    let limit = cfl_limit(field, cfl);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let spatial = field.spatial_arc().clone();
    let velocity = field.velocity_arc().clone();
    let nv = velocity.len();
    let mut faces = vec![0.0; field.data().len()];
    for axis in 0..spatial.dim() {
        let lambda = dt / spatial.spacing()[axis];
        let nu: Vec<f64> = velocity.nodes().iter().map(|v| v[axis] * lambda).collect();
        let src = field.data();
        // faces[cell] holds the upwind state on the face cell + ½.
        faces
            .par_chunks_mut(nv)
            .enumerate()
            .for_each(|(cell, out)| {
                let l = spatial.neighbor(cell, axis, -1) * nv;
                let c = cell * nv;
                let r = spatial.neighbor(cell, axis, 1) * nv;
                let rr = spatial.neighbor(cell, axis, 2) * nv;
                for (k, o) in out.iter_mut().enumerate() {
                    let n = nu[k];
                    *o = match scheme {
                        TransportScheme::Upwind1 => {
                            if n >= 0.0 {
                                src[c + k]
                            } else {
                                src[r + k]
                            }
                        }
                        TransportScheme::MusclMinmod => {
                            if n >= 0.0 {
                                let slope =
                                    minmod(src[r + k] - src[c + k], src[c + k] - src[l + k]);
                                src[c + k] + 0.5 * (1.0 - n) * slope
                            } else {
                                let slope =
                                    minmod(src[rr + k] - src[r + k], src[r + k] - src[c + k]);
                                src[r + k] - 0.5 * (1.0 + n) * slope
                            }
                        }
                    };
                }
            });
        let faces_ref = &faces;
        field
            .data_mut()
            .par_chunks_mut(nv)
            .enumerate()
            .for_each(|(cell, out)| {
                let l = spatial.neighbor(cell, axis, -1) * nv;
                let c = cell * nv;
                for (k, o) in out.iter_mut().enumerate() {
                    *o -= nu[k] * (faces_ref[c + k] - faces_ref[l + k]);
                }
            });
    }
    Ok(())
}

/// Per-step summary of a relaxation sweep.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxationReport {
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub max_iterations: usize,
}

/// `F ← e^(−dt/ε) F + (1 − e^(−dt/ε)) M̂[F]` in every cell.
pub fn relaxation_step(
    field: &mut KineticField,
    params: &GasParams,
    dt: f64,
    epsilon: f64,
    envelope: Option<f64>,
    track_entropy: bool,
) -> Result<RelaxationReport> {
    let velocity = field.velocity_arc().clone();
    let g = &*velocity;
    let nv = g.len();
    let theta = -(-dt / epsilon).exp_m1();
    let keep = 1.0 - theta;
    let per_cell: Vec<(f64, f64, usize)> = field
        .data_mut()
        .par_chunks_mut(nv)
        .enumerate()
        .map_init(
            || vec![0.0; nv],
            |eq, (cell, slice)| {
                let target = moments(slice, g);
                let state = target.macro_state(cell)?;
                if let Some(e) = envelope {
                    let drho = (state.rho - 1.0).abs();
                    let speed = state.speed();
                    if drho > e || speed > e {
                        return Err(Error::Envelope {
                            cell,
                            drho,
                            speed,
                            envelope: e,
                        });
                    }
                }
                let before = if track_entropy {
                    slice_entropy(slice, g, params)
                } else {
                    0.0
                };
                let sol = discrete_maxwellian(params, g, &target, cell, eq)?;
                for (f, m) in slice.iter_mut().zip(eq.iter()) {
                    *f = keep * *f + theta * m;
                }
                let after = if track_entropy {
                    slice_entropy(slice, g, params)
                } else {
                    0.0
                };
                Ok((before, after, sol.iterations))
            },
        )
        .collect::<Result<_>>()?;
    let vol = field.spatial().cell_volume();
    Ok(RelaxationReport {
        entropy_before: vol * pairwise_sum(per_cell.len(), |i| per_cell[i].0),
        entropy_after: vol * pairwise_sum(per_cell.len(), |i| per_cell[i].1),
        max_iterations: per_cell.iter().map(|c| c.2).max().unwrap_or(0),
    })
}

/// Kinetic BGK solver bound to one gas model and configuration.
#[derive(Debug, Clone)]
pub struct Solver {
    params: GasParams,
    cfg: SolverConfig,
}

/// Result of [`Solver::run`]; on abort the trajectory holds everything
/// observed before the failure.
#[derive(Debug)]
pub struct RunOutcome<R> {
    pub trajectory: Vec<R>,
    pub state: SolverState,
    pub abort: Option<Error>,
}

impl Solver {
    pub fn new(params: &GasParams, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            params: params.clone(),
            cfg,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn params(&self) -> &GasParams {
        &self.params
    }

    fn relax(&self, s: &mut SolverState, dt: f64) -> Result<()> {
        let rep = relaxation_step(
            &mut s.field,
            &self.params,
            dt,
            self.cfg.epsilon,
            self.cfg.envelope,
            self.cfg.track_entropy,
        )?;
        s.max_correction_iterations = s.max_correction_iterations.max(rep.max_iterations);
        if self.cfg.track_entropy {
            let inc = rep.entropy_after - rep.entropy_before;
            s.max_entropy_increase = s.max_entropy_increase.max(inc);
            if inc > 1e-12 * rep.entropy_before.abs() {
                s.entropy_violations += 1;
            }
        }
        Ok(())
    }

    /// Advances by one split step of length `dt`.
    pub fn step(&self, s: &mut SolverState, dt: f64) -> Result<()> {
        match self.cfg.splitting {
            Splitting::Lie => {
                self.relax(s, dt)?;
                transport_step(&mut s.field, dt, self.cfg.cfl, self.cfg.transport)?;
            }
            Splitting::Strang => {
                self.relax(s, 0.5 * dt)?;
                transport_step(&mut s.field, dt, self.cfg.cfl, self.cfg.transport)?;
                self.relax(s, 0.5 * dt)?;
            }
        }
        s.t += dt;
        s.steps += 1;
        Ok(())
    }

    /// `n` steps of length `dt`. Inside the block, the trailing and leading
    /// Strang half relaxations are fused into one full relaxation; this is
    /// exact because relaxation leaves the cell moments, hence `M̂`, unchanged.
    pub fn advance(&self, s: &mut SolverState, n: u64, dt: f64) -> Result<()> {
        match self.cfg.splitting {
            Splitting::Lie => {
                for _ in 0..n {
                    self.step(s, dt)?;
                }
            }
            Splitting::Strang => {
                if n == 0 {
                    return Ok(());
                }
                self.relax(s, 0.5 * dt)?;
                for i in 0..n {
                    transport_step(&mut s.field, dt, self.cfg.cfl, self.cfg.transport)?;
                    self.relax(s, if i + 1 == n { 0.5 * dt } else { dt })?;
                    s.t += dt;
                    s.steps += 1;
                }
            }
        }
        Ok(())
    }

    /// Step count and step length covering an interval of length `span`.
    pub fn substeps(&self, field: &KineticField, span: f64) -> Result<(u64, f64)> {
        let limit = cfl_limit(field, self.cfg.cfl);
        let target = self.cfg.dt.unwrap_or(limit);
        if target > limit * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: target, limit });
        }
        let n = (span / target * (1.0 - 1e-12)).ceil().max(1.0);
        Ok((n as u64, span / n))
    }

    /// Advances from `(initial, t0)` to `t_end`, calling `observe` at `t0` and at
    /// every multiple of the output interval (plus `t_end`).
    pub fn run<R>(
        &self,
        initial: KineticField,
        t0: f64,
        mut observe: impl FnMut(&SolverState) -> Result<R>,
    ) -> RunOutcome<R> {
        let mut state = SolverState::new(initial, t0);
        let mut trajectory = Vec::new();
        let abort = (|| -> Result<()> {
            trajectory.push(observe(&state)?);
            let interval = self.cfg.output_interval;
            let mut tick = (t0 / interval * (1.0 + 1e-12)).floor() as u64;
            while state.t < self.cfg.t_end * (1.0 - 1e-12) {
                tick += 1;
                let next = (tick as f64 * interval).min(self.cfg.t_end);
                let (n, dt) = self.substeps(&state.field, next - state.t)?;
                self.advance(&mut state, n, dt)?;
                state.t = next;
                trajectory.push(observe(&state)?);
            }
            Ok(())
        })()
        .err();
        if let Some(e) = &abort {
            log::warn!("run aborted at t = {}: {e}", state.t);
        }
        RunOutcome {
            trajectory,
            state,
            abort,
        }
    }
}
