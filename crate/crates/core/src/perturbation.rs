//! Weighted perturbation around the global equilibrium and the operators of
//! the linearized problem.
//!
//! A distribution is written `F = M0 + M0^w f` with `w = (n−2)/(2n)` and
//! `M0 = M(1, 0)`. The hydrodynamic subspace is spanned by `M0^w` and
//! `v_j M0^w`; its orthonormal basis is
//!
//! ```text
//! e_1     = (nγ c^(2/n))^(1/2) M0^w
//! e_{1+j} = (n  c^(2/n))^(1/2) v_j M0^w
//! ```
//!
//! The factor `c^(2/n)` comes from `∂ρ M = nγ ρ^(γ−2) c (…)_+^((n−2)/2)`:
//! it is what makes the linear part of `M[F] − M0` an orthogonal projection.
//! The projection is `P f = Σ ⟨f, e_i⟩ e_i`, the linear operator is
//! `L = P − I`, and the nonlinear remainder is evaluated exactly as
//! `Γ(f) = M0^(−w) (M[F] − M0) − P f`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{KineticField, MacroField, PeriodicField};
use crate::equilibrium::{moments, GasParams, MacroState, VelocityGrid};
use crate::numeric::pairwise_sum;
use crate::{Error, Result, Vector, MAX_DIM};

/// Cells with `M0 ≤ M_FLOOR_RELATIVE · max M0` are excluded from the weighted
/// perturbation.
pub const M_FLOOR_RELATIVE: f64 = 1e-12;

/// Default admissible deviation of the discrete Gram matrix from the identity.
pub const DEFAULT_GRAM_TOLERANCE: f64 = 1e-6;

/// Default bound on `|ρ − 1|` and `|u|` for the perturbative regime.
pub const DEFAULT_ENVELOPE: f64 = 0.5;

/// The weight `M0^w` on the velocity grid together with its cutoff mask.
#[derive(Debug, Clone)]
pub struct PerturbationWeight {
    exponent: f64,
    m_floor: f64,
    m0: Vec<f64>,
    weight: Vec<f64>,
    inv_weight: Vec<f64>,
    masked: Vec<bool>,
}

impl PerturbationWeight {
    pub fn new(p: &GasParams, g: &VelocityGrid) -> Result<Self> {
        p.require_perturbation_weight()?;
        let exponent = p.weight_exponent();
        let m0 = g.maxwellian(p, &MacroState::rest(1.0));
        let max = m0.iter().copied().fold(0.0, f64::max);
        let m_floor = M_FLOOR_RELATIVE * max;
        let masked: Vec<bool> = m0.iter().map(|&m| m <= m_floor).collect();
        let weight = m0.iter().map(|&m| m.powf(exponent)).collect::<Vec<_>>();
        let inv_weight = weight
            .iter()
            .zip(&masked)
            .map(|(&w, &out)| if out { 0.0 } else { 1.0 / w })
            .collect();
        Ok(Self {
            exponent,
            m_floor,
            m0,
            weight,
            inv_weight,
            masked,
        })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn m_floor(&self) -> f64 {
        self.m_floor
    }

    /// `M0` sampled on the grid.
    pub fn m0(&self) -> &[f64] {
        &self.m0
    }

    /// `M0^w` on every node.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// `M0^(−w)`, zero on masked nodes.
    pub fn inv_weight(&self) -> &[f64] {
        &self.inv_weight
    }

    pub fn masked(&self) -> &[bool] {
        &self.masked
    }
}

/// The `d + 1` orthonormal vectors spanning the hydrodynamic subspace.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionBasis {
    #[serde(skip)]
    vectors: Vec<Vec<f64>>,
    gram: Vec<f64>,
    deviation: f64,
    density_scale: f64,
    momentum_scale: f64,
}

impl ProjectionBasis {
    /// Builds the basis without checking the Gram matrix.
    pub fn build_unchecked(p: &GasParams, g: &VelocityGrid, w: &PerturbationWeight) -> Self {
        let dim = p.dim();
        let c_factor = p.c().powf(2.0 / p.n());
        let density_scale = p.n() * p.gamma() * c_factor;
        let momentum_scale = p.n() * c_factor;
        let mut vectors = Vec::with_capacity(dim + 1);
        let s0 = density_scale.sqrt();
        vectors.push(w.weight.iter().map(|&x| s0 * x).collect::<Vec<_>>());
        let s1 = momentum_scale.sqrt();
        for j in 0..dim {
            vectors.push(
                w.weight
                    .iter()
                    .zip(g.nodes())
                    .map(|(&x, v)| s1 * v[j] * x)
                    .collect::<Vec<_>>(),
            );
        }
        let nb = dim + 1;
        let mut gram = vec![0.0; nb * nb];
        let mut deviation = 0.0_f64;
        for i in 0..nb {
            for j in 0..nb {
                let gij = g.inner(&vectors[i], &vectors[j]);
                gram[i * nb + j] = gij;
                let target = if i == j { 1.0 } else { 0.0 };
                deviation = deviation.max((gij - target).abs());
            }
        }
        Self {
            vectors,
            gram,
            deviation,
            density_scale,
            momentum_scale,
        }
    }

    /// Builds the basis, rejecting grids whose Gram matrix deviates from the
    /// identity by more than `tolerance`.
    pub fn build(
        p: &GasParams,
        g: &VelocityGrid,
        w: &PerturbationWeight,
        tolerance: f64,
    ) -> Result<Self> {
        let basis = Self::build_unchecked(p, g, w);
        if basis.deviation > tolerance {
            return Err(Error::GramDeviation {
                deviation: basis.deviation,
                tolerance,
            });
        }
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i]
    }

    /// Row-major `(d+1) × (d+1)` Gram matrix under the grid quadrature.
    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// `max |G − I|`.
    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    /// `nγ c^(2/n)`, the coefficient in `a = nγ c^(2/n) ∫ f M0^w dv`.
    pub fn density_scale(&self) -> f64 {
        self.density_scale
    }

    /// `n c^(2/n)`, the coefficient in `b = n c^(2/n) ∫ v f M0^w dv`.
    pub fn momentum_scale(&self) -> f64 {
        self.momentum_scale
    }
}

/// Γ evaluated on one velocity slice.
#[derive(Debug, Clone)]
pub struct NonlinearTerm {
    pub value: Vec<f64>,
    /// `Σ |M[F] − M0|` quadrature mass on masked nodes, discarded from Γ.
    pub leakage: f64,
    pub state: MacroState,
}

/// Perturbation framework bound to one velocity grid.
#[derive(Debug, Clone)]
pub struct Perturbation {
    params: GasParams,
    grid: Arc<VelocityGrid>,
    weight: PerturbationWeight,
    basis: ProjectionBasis,
    envelope: f64,
}

impl Perturbation {
    pub fn new(params: &GasParams, grid: Arc<VelocityGrid>, gram_tolerance: f64) -> Result<Self> {
        if grid.dim() != params.dim() {
            return Err(Error::ShapeMismatch(format!(
                "velocity grid dimension {} != model dimension {}",
                grid.dim(),
                params.dim()
            )));
        }
        let weight = PerturbationWeight::new(params, &grid)?;
        let basis = ProjectionBasis::build(params, &grid, &weight, gram_tolerance)?;
        Ok(Self {
            params: params.clone(),
            grid,
            weight,
            basis,
            envelope: DEFAULT_ENVELOPE,
        })
    }

    pub fn with_envelope(mut self, envelope: f64) -> Self {
        self.envelope = envelope;
        self
    }

    pub fn params(&self) -> &GasParams {
        &self.params
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<VelocityGrid> {
        &self.grid
    }

    pub fn weight(&self) -> &PerturbationWeight {
        &self.weight
    }

    pub fn basis(&self) -> &ProjectionBasis {
        &self.basis
    }

    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// `f = (F − M0) M0^(−w)` on one slice; returns the discarded leakage mass.
    pub fn to_perturbation_slice(&self, big_f: &[f64], f: &mut [f64]) -> f64 {
        let w = &self.weight;
        let mut leak = 0.0;
        for k in 0..f.len() {
            let diff = big_f[k] - w.m0[k];
            if w.masked[k] {
                f[k] = 0.0;
                leak += diff.abs();
            } else {
                f[k] = diff * w.inv_weight[k];
            }
        }
        leak * self.grid.weight()
    }

    /// `F = M0 + M0^w f` on one slice (masked nodes return `M0`).
    pub fn from_perturbation_slice(&self, f: &[f64], big_f: &mut [f64]) {
        let w = &self.weight;
        for k in 0..f.len() {
            big_f[k] = if w.masked[k] {
                w.m0[k]
            } else {
                w.m0[k] + w.weight[k] * f[k]
            };
        }
    }

    /// Converts a distribution field into its perturbation, returning the
    /// total leakage `∬_masked |F − M0| dv dx`.
    pub fn to_perturbation(&self, big_f: &KineticField) -> Result<(KineticField, f64)> {
        self.check_grid(big_f)?;
        let nv = self.grid.len();
        let mut f = big_f.clone();
        let leaks: Vec<f64> = f
            .data_mut()
            .par_chunks_mut(nv)
            .zip(big_f.data().par_chunks(nv))
            .map(|(out, src)| self.to_perturbation_slice(src, out))
            .collect();
        let leakage = big_f.spatial().cell_volume() * pairwise_sum(leaks.len(), |i| leaks[i]);
        Ok((f, leakage))
    }

    pub fn from_perturbation(&self, f: &KineticField) -> Result<KineticField> {
        self.check_grid(f)?;
        let nv = self.grid.len();
        let mut out = f.clone();
        out.data_mut()
            .par_chunks_mut(nv)
            .zip(f.data().par_chunks(nv))
            .for_each(|(dst, src)| self.from_perturbation_slice(src, dst));
        Ok(out)
    }

    fn check_grid(&self, field: &KineticField) -> Result<()> {
        if field.velocity() != &*self.grid {
            return Err(Error::ShapeMismatch(
                "field velocity grid differs from basis grid".into(),
            ));
        }
        Ok(())
    }

    /// `⟨f, e_i⟩` for every basis vector.
    pub fn coefficients(&self, f: &[f64]) -> Vector1 {
        let mut out = [0.0; MAX_DIM + 1];
        for (i, o) in out.iter_mut().enumerate().take(self.basis.len()) {
            *o = self.grid.inner(f, &self.basis.vectors[i]);
        }
        out
    }

    pub fn project_into(&self, f: &[f64], out: &mut [f64]) {
        let coeffs = self.coefficients(f);
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &ci) in coeffs.iter().enumerate().take(self.basis.len()) {
            for (o, e) in out.iter_mut().zip(&self.basis.vectors[i]) {
                *o += ci * e;
            }
        }
    }

    /// `P f = Σ ⟨f, e_i⟩ e_i`.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.project_into(f, &mut out);
        out
    }

    /// `L f = P f − f`.
    pub fn linear_op(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.project(f);
        for (o, x) in out.iter_mut().zip(f) {
            *o -= x;
        }
        out
    }

    /// `(I − P) f`.
    pub fn micro_part(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.project(f);
        for (o, x) in out.iter_mut().zip(f) {
            *o = x - *o;
        }
        out
    }

    /// Exact nonlinear remainder `Γ(f) = M0^(−w)(M[F] − M0) − P f`.
    pub fn nonlinear_op(&self, f: &[f64]) -> Result<NonlinearTerm> {
        self.nonlinear_op_at(f, 0)
    }

    pub(crate) fn nonlinear_op_at(&self, f: &[f64], cell: usize) -> Result<NonlinearTerm> {
        let nv = self.grid.len();
        let mut big_f = vec![0.0; nv];
        self.from_perturbation_slice(f, &mut big_f);
        let state = moments(&big_f, &self.grid).macro_state(cell)?;
        let drho = (state.rho - 1.0).abs();
        let speed = state.speed();
        if drho > self.envelope || speed > self.envelope {
            return Err(Error::Envelope {
                cell,
                drho,
                speed,
                envelope: self.envelope,
            });
        }
        let m = self.grid.maxwellian(&self.params, &state);
        let mut value = self.project(f);
        let w = &self.weight;
        let mut leak = 0.0;
        for k in 0..nv {
            let diff = m[k] - w.m0[k];
            if w.masked[k] {
                value[k] = 0.0;
                leak += diff.abs();
            } else {
                value[k] = diff * w.inv_weight[k] - value[k];
            }
        }
        Ok(NonlinearTerm {
            value,
            leakage: leak * self.grid.weight(),
            state,
        })
    }

    /// Macroscopic coefficients `(a, b)` with `P f = (a + v·b) M0^w`.
    pub fn macro_coeffs_slice(&self, f: &[f64]) -> (f64, Vector) {
        let g = &*self.grid;
        let wt = &self.weight.weight;
        let a = self.basis.density_scale * g.integrate(|k| f[k] * wt[k]);
        let mut b = [0.0; MAX_DIM];
        for (j, bj) in b.iter_mut().enumerate().take(g.dim()) {
            *bj = self.basis.momentum_scale * g.integrate(|k| g.node(k)[j] * f[k] * wt[k]);
        }
        (a, b)
    }

    /// `(a, b)` as macroscopic fields (`b` has `d` components).
    pub fn macro_coeffs(&self, f: &KineticField) -> Result<(MacroField, MacroField)> {
        self.check_grid(f)?;
        let dim = self.params.dim();
        let coeffs: Vec<(f64, Vector)> = f
            .data()
            .par_chunks(self.grid.len())
            .map(|s| self.macro_coeffs_slice(s))
            .collect();
        let spatial = f.spatial_arc().clone();
        let a = MacroField::from_data(spatial.clone(), 1, coeffs.iter().map(|c| c.0).collect())?;
        let b = MacroField::from_data(
            spatial,
            dim,
            coeffs.iter().flat_map(|c| c.1[..dim].to_vec()).collect(),
        )?;
        Ok((a, b))
    }

    /// Applies a per-slice velocity operator to every cell of a field.
    pub fn map_slices(
        &self,
        f: &KineticField,
        op: impl Fn(&[f64], &mut [f64]) + Sync,
    ) -> KineticField {
        let nv = self.grid.len();
        let mut out = f.clone();
        out.data_mut()
            .par_chunks_mut(nv)
            .zip(f.data().par_chunks(nv))
            .for_each(|(dst, src)| op(src, dst));
        out
    }

    /// `P f` applied cell by cell.
    pub fn project_field(&self, f: &KineticField) -> KineticField {
        self.map_slices(f, |src, dst| self.project_into(src, dst))
    }

    /// Γ applied cell by cell; returns the field and the total leakage.
    pub fn nonlinear_field(&self, f: &KineticField) -> Result<(KineticField, f64)> {
        let nv = self.grid.len();
        let terms: Vec<NonlinearTerm> = f
            .data()
            .par_chunks(nv)
            .enumerate()
            .map(|(cell, s)| self.nonlinear_op_at(s, cell))
            .collect::<Result<_>>()?;
        let mut out = f.clone();
        for (dst, t) in out.data_mut().chunks_mut(nv).zip(&terms) {
            dst.copy_from_slice(&t.value);
        }
        let leakage = f.spatial().cell_volume() * pairwise_sum(terms.len(), |i| terms[i].leakage);
        Ok((out, leakage))
    }

    /// `(∬ M0^w f, ∬ v M0^w f)`: mass and momentum carried by the perturbation.
    pub fn perturbation_moments(&self, f: &KineticField) -> (f64, Vector) {
        let wt = &self.weight.weight;
        let mass = f.integrate_against(wt);
        let mut mom = [0.0; MAX_DIM];
        for (j, m) in mom.iter_mut().enumerate().take(self.params.dim()) {
            let g: Vec<f64> = wt
                .iter()
                .zip(self.grid.nodes())
                .map(|(&x, v)| x * v[j])
                .collect();
            *m = f.integrate_against(&g);
        }
        (mass, mom)
    }
}

/// Coefficients against the `d + 1` basis vectors (unused entries are zero).
pub type Vector1 = [f64; MAX_DIM + 1];
