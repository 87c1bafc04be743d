//! Finite-volume reference for the isentropic Euler system
//! `∂t ρ + ∇·m = 0`, `∂t m + ∇·(m⊗m/ρ) + ∇ρ^γ = 0`.
//!
//! Rusanov fluxes on minmod-reconstructed conservative states, SSP-RK2 in
//! time, periodic in every direction.

use std::sync::Arc;

use rayon::prelude::*;

use crate::discretization::{KineticField, MacroField, SpatialGrid};
use crate::equilibrium::{moments, RHO_FLOOR};
use crate::numeric::pairwise_sum;
use crate::{Error, Result, MAX_DIM};

/// Density and momentum on a spatial grid, stored per cell as `(ρ, m_1..m_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerState {
    spatial: Arc<SpatialGrid>,
    data: Vec<f64>,
}

impl EulerState {
    pub fn new(spatial: Arc<SpatialGrid>, rho: &[f64], momentum: &[f64]) -> Result<Self> {
        let d = spatial.dim();
        let n = spatial.len();
        if rho.len() != n || momentum.len() != n * d {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} densities and {} momenta, got {} and {}",
                n * d,
                rho.len(),
                momentum.len()
            )));
        }
        let mut data = Vec::with_capacity(n * (d + 1));
        for c in 0..n {
            data.push(rho[c]);
            data.extend_from_slice(&momentum[c * d..(c + 1) * d]);
        }
        let s = Self { spatial, data };
        s.check_vacuum()?;
        Ok(s)
    }

    /// Builds `(ρ, m)` from closures of the cell centre.
    pub fn from_fn(
        spatial: Arc<SpatialGrid>,
        rho: impl Fn(&crate::Vector) -> f64,
        velocity: impl Fn(&crate::Vector) -> crate::Vector,
    ) -> Result<Self> {
        let d = spatial.dim();
        let mut r = Vec::with_capacity(spatial.len());
        let mut m = Vec::with_capacity(spatial.len() * d);
        for c in 0..spatial.len() {
            let x = spatial.center(c);
            let rc = rho(&x);
            let u = velocity(&x);
            r.push(rc);
            m.extend(u[..d].iter().map(|ua| rc * ua));
        }
        Self::new(spatial, &r, &m)
    }

    /// Quadrature moments `(∫F, ∫vF)` of a kinetic field, cell by cell.
    pub fn from_kinetic(field: &KineticField) -> Result<Self> {
        let spatial = field.spatial_arc().clone();
        let d = spatial.dim();
        let g = field.velocity();
        let mut data = Vec::with_capacity(spatial.len() * (d + 1));
        for s in field.slices() {
            let m = moments(s, g);
            data.push(m.rho);
            data.extend_from_slice(&m.momentum[..d]);
        }
        let s = Self { spatial, data };
        s.check_vacuum()?;
        Ok(s)
    }

    pub fn spatial(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn spatial_arc(&self) -> &Arc<SpatialGrid> {
        &self.spatial
    }

    fn width(&self) -> usize {
        self.spatial.dim() + 1
    }

    pub fn rho(&self, cell: usize) -> f64 {
        self.data[cell * self.width()]
    }

    pub fn momentum(&self, cell: usize) -> &[f64] {
        let w = self.width();
        &self.data[cell * w + 1..(cell + 1) * w]
    }

    pub fn density_field(&self) -> MacroField {
        let rho = (0..self.spatial.len()).map(|c| self.rho(c)).collect();
        MacroField::from_data(self.spatial.clone(), 1, rho).expect("shape fixed")
    }

    /// `u = m / ρ` with `d` components per cell.
    pub fn velocity_field(&self) -> MacroField {
        let u = (0..self.spatial.len())
            .flat_map(|c| {
                let r = self.rho(c);
                self.momentum(c)
                    .iter()
                    .map(move |m| m / r)
                    .collect::<Vec<_>>()
            })
            .collect();
        MacroField::from_data(self.spatial.clone(), self.spatial.dim(), u).expect("shape fixed")
    }

    /// `(∫ρ, ∫m)` with the fixed pairwise reduction.
    pub fn totals(&self) -> (f64, [f64; MAX_DIM]) {
        let w = self.width();
        let vol = self.spatial.cell_volume();
        let n = self.spatial.len();
        let mass = vol * pairwise_sum(n, |c| self.data[c * w]);
        let mut mom = [0.0; MAX_DIM];
        for (a, m) in mom.iter_mut().enumerate().take(w - 1) {
            *m = vol * pairwise_sum(n, |c| self.data[c * w + 1 + a]);
        }
        (mass, mom)
    }

    fn check_vacuum(&self) -> Result<()> {
        for c in 0..self.spatial.len() {
            let rho = self.rho(c);
            if !(rho > RHO_FLOOR) {
                return Err(Error::Vacuum { cell: c, rho });
            }
        }
        Ok(())
    }

    /// Largest `Σ_a (|u_a| + √(γρ^(γ−1))) / Δx_a` over the grid.
    fn max_rate(&self, gamma: f64) -> f64 {
        let d = self.spatial.dim();
        let h = self.spatial.spacing();
        (0..self.spatial.len())
            .map(|c| {
                let r = self.rho(c);
                let sound = (gamma * r.powf(gamma - 1.0)).sqrt();
                let m = self.momentum(c);
                (0..d)
                    .map(|a| ((m[a] / r).abs() + sound) / h[a])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest step allowed at Courant number `cfl`.
    pub fn stable_dt(&self, gamma: f64, cfl: f64) -> f64 {
        cfl / self.max_rate(gamma)
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

/// Physical flux along `axis` and the local wave speed.
fn flux(u: &[f64], axis: usize, gamma: f64, out: &mut [f64]) -> f64 {
    let rho = u[0];
    let va = u[1 + axis] / rho;
    out[0] = u[1 + axis];
    for j in 0..u.len() - 1 {
        out[1 + j] = u[1 + j] * va;
    }
    out[1 + axis] += rho.powf(gamma);
    va.abs() + (gamma * rho.powf(gamma - 1.0)).sqrt()
}

/// `−Σ_a ∂_a F_a(U)` by Rusanov fluxes on minmod reconstructions.
fn rhs(s: &EulerState, gamma: f64) -> Result<Vec<f64>> {
    let w = s.width();
    let grid = &*s.spatial;
    let u = &s.data;
    let mut out = vec![0.0; u.len()];
    for axis in 0..grid.dim() {
        let inv_h = 1.0 / grid.spacing()[axis];
        // faces[cell] = numerical flux through the face cell + ½.
        let faces: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .flat_map_iter(|cell| {
                let l = grid.neighbor(cell, axis, -1) * w;
                let c = cell * w;
                let r = grid.neighbor(cell, axis, 1) * w;
                let rr = grid.neighbor(cell, axis, 2) * w;
                let mut ul = [0.0; MAX_DIM + 1];
                let mut ur = [0.0; MAX_DIM + 1];
                for q in 0..w {
                    ul[q] = u[c + q] + 0.5 * minmod(u[r + q] - u[c + q], u[c + q] - u[l + q]);
                    ur[q] = u[r + q] - 0.5 * minmod(u[rr + q] - u[r + q], u[r + q] - u[c + q]);
                }
                let mut fl = [0.0; MAX_DIM + 1];
                let mut fr = [0.0; MAX_DIM + 1];
                let sl = flux(&ul[..w], axis, gamma, &mut fl[..w]);
                let sr = flux(&ur[..w], axis, gamma, &mut fr[..w]);
                let speed = sl.max(sr);
                (0..w).map(move |q| 0.5 * (fl[q] + fr[q]) - 0.5 * speed * (ur[q] - ul[q]))
            })
            .collect();
        out.par_chunks_mut(w).enumerate().for_each(|(cell, o)| {
            let l = grid.neighbor(cell, axis, -1) * w;
            let c = cell * w;
            for q in 0..w {
                o[q] -= (faces[c + q] - faces[l + q]) * inv_h;
            }
        });
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Vacuum {
            cell: 0,
            rho: f64::NAN,
        });
    }
    Ok(out)
}

/// One SSP-RK2 step of length `dt`.
pub fn euler_step(s: &EulerState, dt: f64, gamma: f64, cfl: f64) -> Result<EulerState> {
    let limit = s.stable_dt(gamma, cfl);
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt, limit });
    }
    let k1 = rhs(s, gamma)?;
    let mut stage = s.clone();
    for (x, k) in stage.data.iter_mut().zip(&k1) {
        *x += dt * k;
    }
    stage.check_vacuum()?;
    let k2 = rhs(&stage, gamma)?;
    let mut next = s.clone();
    for ((x, y), k) in next.data.iter_mut().zip(&stage.data).zip(&k2) {
        *x = 0.5 * *x + 0.5 * (y + dt * k);
    }
    next.check_vacuum()?;
    Ok(next)
}

/// Advances to `t_end` with CFL-adapted steps, or with a fixed `dt` when given
/// (the last step is shortened to land on `t_end`).
pub fn euler_run(
    initial: &EulerState,
    gamma: f64,
    t_end: f64,
    cfl: f64,
    dt: Option<f64>,
) -> Result<EulerState> {
    let mut s = initial.clone();
    let mut t = 0.0;
    while t < t_end * (1.0 - 1e-14) {
        let step = dt.unwrap_or_else(|| s.stable_dt(gamma, cfl)).min(t_end - t);
        s = euler_step(&s, step, gamma, cfl)?;
        t += step;
    }
    Ok(s)
}

/// Grid L¹ norms `(‖ρ_k − ρ_e‖, Σ_a ‖u_k,a − u_e,a‖)`.
pub fn kinetic_vs_euler_error(kinetic: &EulerState, euler: &EulerState) -> Result<(f64, f64)> {
    if kinetic.spatial != euler.spatial {
        return Err(Error::ShapeMismatch(
            "kinetic and Euler grids differ".into(),
        ));
    }
    let vol = kinetic.spatial.cell_volume();
    let n = kinetic.spatial.len();
    let d = kinetic.spatial.dim();
    let rho = vol * pairwise_sum(n, |c| (kinetic.rho(c) - euler.rho(c)).abs());
    let u = vol
        * pairwise_sum(n, |c| {
            let (rk, re) = (kinetic.rho(c), euler.rho(c));
            (0..d)
                .map(|a| (kinetic.momentum(c)[a] / rk - euler.momentum(c)[a] / re).abs())
                .sum()
        });
    Ok((rho, u))
}
