//! Measured quantities along a trajectory: the spatial energy functional,
//! macro/micro norms, the coercivity identity, macro-micro residuals, decay
//! fits and conservation drift.

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::{
    multi_index_derivative, multi_indices, spatial_derivative, KineticField, MacroField,
    MultiIndex, PeriodicField,
};
use crate::equilibrium::{kinetic_entropy, moments};
use crate::numeric::{fit_line, pairwise_sum};
use crate::perturbation::Perturbation;
use crate::{Error, Result};

/// Highest derivative order accepted by the energy functional.
pub const MAX_ORDER: usize = 4;

/// Energies at or below this value are treated as underflow by [`fit_decay`].
pub const DECAY_FLOOR: f64 = 1e-24;

/// Minimum number of samples in a decay-fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

/// `∬|g|²`, `∬|Pg|²`, `∬|(I−P)g|²` and `∬ (Lg) g` for one field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SplitNorms {
    pub total: f64,
    pub macro_part: f64,
    pub micro_part: f64,
    pub linear: f64,
}

impl std::ops::AddAssign for SplitNorms {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.macro_part += o.macro_part;
        self.micro_part += o.micro_part;
        self.linear += o.linear;
    }
}

pub fn split_norms(pt: &Perturbation, g: &KineticField) -> SplitNorms {
    let vg = pt.grid();
    let per_cell: Vec<[f64; 4]> = g
        .data()
        .par_chunks(vg.len())
        .map(|s| {
            let pg = pt.project(s);
            let lg = pt.linear_op(s);
            let ig = pt.micro_part(s);
            [
                vg.inner(s, s),
                vg.inner(&pg, &pg),
                vg.inner(&ig, &ig),
                vg.inner(&lg, s),
            ]
        })
        .collect();
    let vol = g.spatial().cell_volume();
    let sum = |j: usize| vol * pairwise_sum(per_cell.len(), |i| per_cell[i][j]);
    SplitNorms {
        total: sum(0),
        macro_part: sum(1),
        micro_part: sum(2),
        linear: sum(3),
    }
}

fn check_order(order: usize, stencil_order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::MultiIndexTooLarge {
            order,
            max: MAX_ORDER,
        });
    }
    if stencil_order != 2 && stencil_order != 4 {
        return Err(Error::InvalidStencilOrder(stencil_order));
    }
    Ok(())
}

/// `∂^α f` for every `|α| ≤ order`, in [`multi_indices`] order.
fn derivatives<T: PeriodicField + Sync + Send>(
    f: &T,
    order: usize,
    stencil_order: usize,
) -> Result<Vec<(MultiIndex, T)>> {
    multi_indices(f.spatial().dim(), order)
        .into_par_iter()
        .map(|alpha| {
            let d = multi_index_derivative(f, &alpha, order, stencil_order)?;
            Ok((alpha, d))
        })
        .collect()
}

/// Energy per derivative order: entry `k` is `Σ_{|α|=k} ‖∂^α f‖²`.
pub fn energy_functional(f: &KineticField, order: usize, stencil_order: usize) -> Result<Vec<f64>> {
    check_order(order, stencil_order)?;
    let mut out = vec![0.0; order + 1];
    for (alpha, d) in derivatives(f, order, stencil_order)? {
        out[alpha.order()] += d.norm_sq();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoercivityReport {
    /// `Σ_α ⟨L∂^αf, ∂^αf⟩ + Σ_α ‖(I−P)∂^αf‖²`.
    pub defect: f64,
    /// `−Σ_α ⟨L∂^αf, ∂^αf⟩ / Σ_α ‖∂^αf‖²` (zero for `f = 0`).
    pub delta_hat: f64,
    pub energy: f64,
}

/// Norms of every `∂^α f` split into macro and micro parts, by multi-index.
pub fn split_norms_by_index(
    pt: &Perturbation,
    f: &KineticField,
    order: usize,
    stencil_order: usize,
) -> Result<Vec<(MultiIndex, SplitNorms)>> {
    check_order(order, stencil_order)?;
    Ok(derivatives(f, order, stencil_order)?
        .into_iter()
        .map(|(alpha, d)| (alpha, split_norms(pt, &d)))
        .collect())
}

fn coercivity_from(norms: &[(MultiIndex, SplitNorms)]) -> CoercivityReport {
    let mut s = SplitNorms::default();
    for (_, n) in norms {
        s += *n;
    }
    let delta_hat = if s.total > 0.0 {
        (-s.linear / s.total).clamp(0.0, 1.0)
    } else {
        0.0
    };
    CoercivityReport {
        defect: s.linear + s.micro_part,
        delta_hat,
        energy: s.total,
    }
}

pub fn coercivity_defect(
    pt: &Perturbation,
    f: &KineticField,
    order: usize,
    stencil_order: usize,
) -> Result<CoercivityReport> {
    Ok(coercivity_from(&split_norms_by_index(
        pt,
        f,
        order,
        stencil_order,
    )?))
}

/// `v·∇x g` with central differences.
pub fn streaming(g: &KineticField, stencil_order: usize) -> Result<KineticField> {
    let vg = g.velocity_arc().clone();
    let nv = vg.len();
    let mut out = KineticField::zeros(g.spatial_arc().clone(), vg.clone());
    for axis in 0..g.spatial().dim() {
        let d = spatial_derivative(g, axis, stencil_order)?;
        out.data_mut()
            .par_chunks_mut(nv)
            .zip(d.data().par_chunks(nv))
            .for_each(|(o, s)| {
                for k in 0..nv {
                    o[k] += vg.node(k)[axis] * s[k];
                }
            });
    }
    Ok(out)
}

/// Macro-micro residual norms. All entries are squared `L²_x` norms; ratios
/// are reported, never compared against a constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroMicroReport {
    /// `‖∂^α a‖²` for every `|α| ≤ N`.
    pub a_norms: Vec<f64>,
    /// `‖∂^α b‖²` (summed over components) for every `|α| ≤ N`.
    pub b_norms: Vec<f64>,
    /// `Σ_{|α|≤N−1} ‖∂^α ⟨ℓ, ψ⟩‖²` for each `ψ ∈ {1, v_i, v_i v_j} M0^w`.
    pub ell_norms: Vec<f64>,
    /// Same for `h = Γ(f)`.
    pub h_norms: Vec<f64>,
    /// `Σ ‖P∂^αf‖² / Σ ‖(I−P)∂^αf‖²`.
    pub macro_micro_ratio: f64,
    /// `Σ_{1≤|α|≤N} ‖∂^α(a, b)‖²` divided by the micro, ℓ and h contributions.
    pub ab_ratio: f64,
    pub leakage: f64,
}

/// Velocity weights `{1, v_i, v_i v_j (i ≤ j)} M0^w`.
fn moment_basis(pt: &Perturbation) -> Vec<Vec<f64>> {
    let g = pt.grid();
    let w = pt.weight().weight();
    let d = g.dim();
    let mut out = vec![w.to_vec()];
    for i in 0..d {
        out.push((0..g.len()).map(|k| g.node(k)[i] * w[k]).collect());
    }
    for i in 0..d {
        for j in i..d {
            out.push(
                (0..g.len())
                    .map(|k| g.node(k)[i] * g.node(k)[j] * w[k])
                    .collect(),
            );
        }
    }
    out
}

fn coefficient_field(g: &KineticField, basis: &[Vec<f64>]) -> MacroField {
    let vg = g.velocity();
    let data: Vec<f64> = g
        .data()
        .par_chunks(vg.len())
        .flat_map_iter(|s| basis.iter().map(move |psi| vg.inner(s, psi)))
        .collect();
    MacroField::from_data(g.spatial_arc().clone(), basis.len(), data).expect("shape fixed")
}

fn per_component_norms(f: &MacroField, order: usize, stencil_order: usize) -> Result<Vec<f64>> {
    let nc = f.components();
    let vol = f.spatial().cell_volume();
    let mut out = vec![0.0; nc];
    for (_, d) in derivatives(f, order, stencil_order)? {
        let data = d.data();
        for (c, o) in out.iter_mut().enumerate() {
            *o += vol * pairwise_sum(f.spatial().len(), |i| data[i * nc + c].powi(2));
        }
    }
    Ok(out)
}

/// Evaluates `a`, `b`, `ℓ{(I−P)f} = (I−P)(v·∇f) − (I−P)Γ(f) − v·∇(I−P)f` and
/// `h = Γ(f)`, the time derivative of the micro part having been replaced by
/// the equation's right side.
pub fn macro_micro_report(
    pt: &Perturbation,
    f: &KineticField,
    order: usize,
    stencil_order: usize,
) -> Result<MacroMicroReport> {
    check_order(order, stencil_order)?;
    let (a, b) = pt.macro_coeffs(f)?;
    let norms = |m: &MacroField| -> Result<Vec<f64>> {
        derivatives(m, order, stencil_order)?
            .into_iter()
            .map(|(_, d)| Ok(d.norm_sq()))
            .collect()
    };
    let a_norms = norms(&a)?;
    let b_norms = norms(&b)?;

    let (gamma, leakage) = pt.nonlinear_field(f)?;
    let micro = pt.map_slices(f, |s, o| o.copy_from_slice(&pt.micro_part(s)));
    let vf = streaming(f, stencil_order)?;
    let v_micro = streaming(&micro, stencil_order)?;
    let ell = pt.map_slices(&vf, |s, o| o.copy_from_slice(&pt.micro_part(s)));
    let gamma_micro = pt.map_slices(&gamma, |s, o| o.copy_from_slice(&pt.micro_part(s)));
    let ell = ell
        .axpby(1.0, &gamma_micro, -1.0)
        .axpby(1.0, &v_micro, -1.0);

    let basis = moment_basis(pt);
    let lower = order.saturating_sub(1);
    let ell_norms = per_component_norms(&coefficient_field(&ell, &basis), lower, stencil_order)?;
    let h_norms = per_component_norms(&coefficient_field(&gamma, &basis), lower, stencil_order)?;

    let split = split_norms_by_index(pt, f, order, stencil_order)?;
    let (mut pm, mut im) = (0.0, 0.0);
    for (_, s) in &split {
        pm += s.macro_part;
        im += s.micro_part;
    }
    let macro_micro_ratio = if im > 0.0 { pm / im } else { f64::INFINITY };
    let grad_ab: f64 = a_norms.iter().chain(&b_norms).sum::<f64>() - a_norms[0] - b_norms[0];
    let rhs = im + ell_norms.iter().sum::<f64>() + h_norms.iter().sum::<f64>();
    let ab_ratio = if rhs > 0.0 { grad_ab / rhs } else { 0.0 };
    Ok(MacroMicroReport {
        a_norms,
        b_norms,
        ell_norms,
        h_norms,
        macro_micro_ratio,
        ab_ratio,
        leakage,
    })
}

/// One row of the trajectory table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub momentum: Vec<f64>,
    pub entropy: f64,
    pub energy_total: f64,
    pub energy: Vec<f64>,
    pub p_norm2: f64,
    pub ip_norm2: f64,
    pub leakage: f64,
    pub delta_hat: f64,
    /// `∬ M0^w f`.
    pub perturbation_mass: f64,
    /// `∬ v M0^w f`.
    pub perturbation_momentum: Vec<f64>,
    /// Largest `|ρ − 1|` over the cells.
    pub max_density_deviation: f64,
    /// Largest `|u|` over the cells.
    pub max_speed: f64,
}

impl DiagnosticsRecord {
    /// Column names; the documented columns come first.
    pub fn header(dim: usize, order: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "mass".to_string()];
        h.extend((1..=dim).map(|i| format!("momentum_{i}")));
        h.push("entropy".into());
        h.push("E_total".into());
        h.extend((0..=order).map(|k| format!("E_{k}")));
        for c in ["P_norm2", "IP_norm2", "leakage", "delta_hat", "pert_mass"] {
            h.push(c.into());
        }
        h.extend((1..=dim).map(|i| format!("pert_momentum_{i}")));
        h.push("max_drho".into());
        h.push("max_speed".into());
        h
    }

    pub fn row(&self) -> Vec<f64> {
        let mut r = vec![self.t, self.mass];
        r.extend(&self.momentum);
        r.push(self.entropy);
        r.push(self.energy_total);
        r.extend(&self.energy);
        r.extend([
            self.p_norm2,
            self.ip_norm2,
            self.leakage,
            self.delta_hat,
            self.perturbation_mass,
        ]);
        r.extend(&self.perturbation_momentum);
        r.push(self.max_density_deviation);
        r.push(self.max_speed);
        r
    }
}

/// Computes [`DiagnosticsRecord`]s for fields on one grid.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pt: Perturbation,
    order: usize,
    stencil_order: usize,
}

impl Diagnostics {
    pub fn new(pt: Perturbation, order: usize, stencil_order: usize) -> Result<Self> {
        check_order(order, stencil_order)?;
        let p = pt.params();
        let bound = p.decay_gamma_bound(order);
        if p.gamma() > bound {
            log::warn!(
                "gamma = {} exceeds {bound:.6} for N = {order}; decay is not guaranteed, running anyway",
                p.gamma()
            );
        }
        Ok(Self {
            pt,
            order,
            stencil_order,
        })
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.pt
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn header(&self) -> Vec<String> {
        DiagnosticsRecord::header(self.pt.params().dim(), self.order)
    }

    pub fn record(&self, big_f: &KineticField, t: f64) -> Result<DiagnosticsRecord> {
        let dim = self.pt.params().dim();
        let vg = big_f.velocity();
        let ones = vec![1.0; vg.len()];
        let mass = big_f.integrate_against(&ones);
        let momentum = (0..dim)
            .map(|a| {
                let va: Vec<f64> = vg.nodes().iter().map(|v| v[a]).collect();
                big_f.integrate_against(&va)
            })
            .collect();
        let (mut max_drho, mut max_speed) = (0.0_f64, 0.0_f64);
        for (cell, s) in big_f.slices().enumerate() {
            let st = moments(s, vg).macro_state(cell)?;
            max_drho = max_drho.max((st.rho - 1.0).abs());
            max_speed = max_speed.max(st.speed());
        }
        let entropy = kinetic_entropy(big_f, self.pt.params());

        let (f, leakage) = self.pt.to_perturbation(big_f)?;
        let split = split_norms_by_index(&self.pt, &f, self.order, self.stencil_order)?;
        let mut energy = vec![0.0; self.order + 1];
        for (alpha, s) in &split {
            energy[alpha.order()] += s.total;
        }
        let coer = coercivity_from(&split);
        let zero = &split[0].1;
        let (pm, pmom) = self.pt.perturbation_moments(&f);
        Ok(DiagnosticsRecord {
            t,
            mass,
            momentum,
            entropy,
            energy_total: energy.iter().sum(),
            energy,
            p_norm2: zero.macro_part,
            ip_norm2: zero.micro_part,
            leakage,
            delta_hat: coer.delta_hat,
            perturbation_mass: pm,
            perturbation_momentum: pmom[..dim].to_vec(),
            max_density_deviation: max_drho,
            max_speed,
        })
    }
}

/// Least-squares fit of `ln E = intercept − λ t` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub t0: f64,
    pub t1: f64,
    pub lambda: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn fit_decay(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::Fit(format!("empty window [{t0}, {t1}]")));
    }
    if times.len() != energies.len() {
        return Err(Error::Fit("times and energies differ in length".into()));
    }
    let tol = 1e-9 * t1.abs().max(1.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= t0 - tol && **t <= t1 + tol)
        .map(|(&t, &e)| (t, e))
        .unzip();
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in [{t0}, {t1}], need at least {MIN_FIT_SAMPLES}",
            xs.len()
        )));
    }
    if let Some(e) = ys.iter().find(|&&e| !(e > DECAY_FLOOR)) {
        return Err(Error::Fit(format!(
            "energy {e:e} at or below the floor {DECAY_FLOOR:e}"
        )));
    }
    let logs: Vec<f64> = ys.iter().map(|e| e.ln()).collect();
    let line = fit_line(&xs, &logs).ok_or_else(|| Error::Fit("degenerate window".into()))?;
    Ok(DecayFit {
        t0,
        t1,
        lambda: -line.slope,
        intercept: line.intercept,
        r_squared: line.r_squared,
        samples: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    /// `max |mass(t) − mass(0)| / mass(0)`.
    pub mass_drift: f64,
    /// `max_t max_i |momentum_i(t) − momentum_i(0)|`.
    pub momentum_drift: f64,
    pub max_perturbation_mass: f64,
    pub max_perturbation_momentum: f64,
}

pub fn conservation_report(records: &[DiagnosticsRecord]) -> ConservationReport {
    let mut rep = ConservationReport {
        mass_drift: 0.0,
        momentum_drift: 0.0,
        max_perturbation_mass: 0.0,
        max_perturbation_momentum: 0.0,
    };
    let Some(first) = records.first() else {
        return rep;
    };
    for r in records {
        rep.mass_drift = rep
            .mass_drift
            .max((r.mass - first.mass).abs() / first.mass.abs());
        for (a, b) in r.momentum.iter().zip(&first.momentum) {
            rep.momentum_drift = rep.momentum_drift.max((a - b).abs());
        }
        rep.max_perturbation_mass = rep.max_perturbation_mass.max(r.perturbation_mass.abs());
        for p in &r.perturbation_momentum {
            rep.max_perturbation_momentum = rep.max_perturbation_momentum.max(p.abs());
        }
    }
    rep
}
