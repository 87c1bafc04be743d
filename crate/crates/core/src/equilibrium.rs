//! Model constants, the compactly supported equilibrium, velocity quadrature,
//! moments and the kinetic entropy.
//!
//! The equilibrium attached to a density `ρ` and bulk velocity `u` is
//!
//! ```text
//! M(ρ, u; v) = c · ( 2γ/(γ−1) · ρ^(γ−1) − |v − u|² )_+^(n/2)
//! ```
//!
//! with `n = 2/(γ−1) − d`. Its first three moments are `ρ`, `ρu` and
//! `ρ|u|² + d ρ^γ`, and its centred second moment is the isotropic pressure
//! tensor `ρ^γ I`.

use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::discretization::{KineticField, PeriodicField};
use crate::numeric::{pairwise_sum, solve_dense};
use crate::{Error, Result, Vector, MAX_DIM};

/// Densities at or below this value have no equilibrium (defined as zero).
pub const RHO_FLOOR: f64 = 1e-13;

/// Default velocity box margin as a fraction of the support radius.
pub const DEFAULT_VELOCITY_MARGIN: f64 = 0.1;

/// Newton tolerance of the discrete equilibrium correction (relative to ρ).
pub const CORRECTION_TOLERANCE: f64 = 1e-13;
pub const CORRECTION_MAX_ITERATIONS: usize = 20;

/// The constant pack defining the model for a given `(γ, d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasParams {
    gamma: f64,
    dim: usize,
    n: f64,
    c: f64,
    support_radius: f64,
}

impl GasParams {
    /// Derives `n`, `c` and the support radius of `M0` from `(γ, d)`.
    pub fn new(gamma: f64, dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDimension { dim, max: MAX_DIM });
        }
        let upper = 1.0 + 2.0 / dim as f64;
        if !(gamma > 1.0 && gamma < upper) {
            return Err(Error::GammaOutOfRange { gamma, dim, upper });
        }
        let d = dim as f64;
        let n = 2.0 / (gamma - 1.0) - d;
        let radius_sq = 2.0 * gamma / (gamma - 1.0);
        // Logarithmic form keeps c representable when γ → 1 and n is large.
        let ln_c = -radius_sq.ln() / (gamma - 1.0) + ln_gamma(gamma / (gamma - 1.0))
            - 0.5 * d * std::f64::consts::PI.ln()
            - ln_gamma(0.5 * n + 1.0);
        Ok(Self {
            gamma,
            dim,
            n,
            c: ln_c.exp(),
            support_radius: radius_sq.sqrt(),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// Normalization constant `c` of the equilibrium.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Radius of the velocity support of `M0`, `R = sqrt(2γ/(γ−1))`.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// `2γ/(γ−1)`, the squared support radius at unit density.
    pub fn radius_sq(&self) -> f64 {
        2.0 * self.gamma / (self.gamma - 1.0)
    }

    /// Support radius of `M(ρ, ·)`.
    pub fn support_radius_at(&self, rho: f64) -> f64 {
        (self.radius_sq() * rho.powf(self.gamma - 1.0)).sqrt()
    }

    /// Exponent `w = (n−2)/(2n)` of the perturbation weight `M0^w`.
    pub fn weight_exponent(&self) -> f64 {
        (self.n - 2.0) / (2.0 * self.n)
    }

    /// Whether the weighted perturbation `F = M0 + M0^w f` is defined (`n > 2`).
    pub fn has_perturbation_weight(&self) -> bool {
        self.n > 2.0
    }

    pub fn require_perturbation_weight(&self) -> Result<()> {
        if self.has_perturbation_weight() {
            Ok(())
        } else {
            Err(Error::WeightUndefined {
                n: self.n,
                gamma: self.gamma,
                dim: self.dim,
            })
        }
    }

    /// Upper end of the γ range for which global exponential decay is
    /// established with `N = order` derivatives: `1 + 2/(4N + 6 + d)`.
    pub fn decay_gamma_bound(&self, order: usize) -> f64 {
        1.0 + 2.0 / (4.0 * order as f64 + 6.0 + self.dim as f64)
    }

    /// Kinetic entropy density `H(F, v) = |v|²F/2 + F^(1+2/n) / (2 c^(2/n) (1+2/n))`.
    pub fn entropy_density(&self, f: f64, speed_sq: f64) -> f64 {
        if f <= 0.0 {
            return 0.0;
        }
        let p = 1.0 + 2.0 / self.n;
        0.5 * speed_sq * f + f.powf(p) / (2.0 * self.c.powf(2.0 / self.n) * p)
    }
}

/// Density and bulk velocity feeding the equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacroState {
    pub rho: f64,
    pub u: Vector,
}

impl MacroState {
    pub fn new(rho: f64, u: &[f64]) -> Self {
        let mut v = [0.0; MAX_DIM];
        v[..u.len()].copy_from_slice(u);
        Self { rho, u: v }
    }

    pub fn rest(rho: f64) -> Self {
        Self {
            rho,
            u: [0.0; MAX_DIM],
        }
    }

    pub fn speed(&self) -> f64 {
        norm(&self.u)
    }
}

pub(crate) fn norm(v: &Vector) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Evaluates the equilibrium `M(ρ, u; v)`.
pub fn maxwellian(p: &GasParams, m: &MacroState, v: &Vector) -> f64 {
    if m.rho <= RHO_FLOOR {
        return 0.0;
    }
    let base = p.radius_sq() * m.rho.powf(p.gamma - 1.0) - dist_sq(v, &m.u, p.dim);
    if base > 0.0 {
        p.c * base.powf(0.5 * p.n)
    } else {
        0.0
    }
}

#[inline]
fn dist_sq(v: &Vector, u: &Vector, dim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..dim {
        let d = v[a] - u[a];
        s += d * d;
    }
    s
}

/// Tensor-product midpoint quadrature on the box `[−L, L]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    dim: usize,
    points_per_axis: Vec<usize>,
    half_width: f64,
    spacing: Vec<f64>,
    weight: f64,
    nodes: Vec<Vector>,
    speed_sq: Vec<f64>,
}

impl VelocityGrid {
    /// Grid on `[−R(1+margin), R(1+margin)]^d` for the model's support radius `R`.
    pub fn for_params(p: &GasParams, points_per_axis: &[usize], margin: f64) -> Result<Self> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "velocity margin must be >= 0, got {margin}"
            )));
        }
        Self::new(p.dim, points_per_axis, p.support_radius * (1.0 + margin))
    }

    pub fn new(dim: usize, points_per_axis: &[usize], half_width: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDimension { dim, max: MAX_DIM });
        }
        if points_per_axis.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} velocity point counts, got {}",
                points_per_axis.len()
            )));
        }
        if points_per_axis.iter().any(|&k| k < 2) {
            return Err(Error::InvalidGrid(
                "need at least 2 velocity points per axis".into(),
            ));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "invalid velocity half-width {half_width}"
            )));
        }
        let spacing: Vec<f64> = points_per_axis
            .iter()
            .map(|&k| 2.0 * half_width / k as f64)
            .collect();
        let total: usize = points_per_axis.iter().product();
        let mut nodes = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut v = [0.0; MAX_DIM];
            for a in 0..dim {
                // Symmetric under v -> -v: node i and node N-1-i are exact negatives.
                let k = points_per_axis[a];
                v[a] = (2.0 * idx[a] as f64 + 1.0 - k as f64) * 0.5 * spacing[a];
            }
            nodes.push(v);
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < points_per_axis[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        let speed_sq = nodes
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum())
            .collect();
        let weight = spacing.iter().product();
        Ok(Self {
            dim,
            points_per_axis: points_per_axis.to_vec(),
            half_width,
            spacing,
            weight,
            nodes,
            speed_sq,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points_per_axis
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Quadrature weight of every node (uniform cells).
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn nodes(&self) -> &[Vector] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Vector {
        &self.nodes[k]
    }

    pub fn speed_sq(&self) -> &[f64] {
        &self.speed_sq
    }

    /// Largest absolute node coordinate on any axis.
    pub fn max_speed(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.half_width - 0.5 * self.spacing[a])
            .fold(0.0, f64::max)
    }

    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// Index of the node mirrored through the origin.
    pub fn mirror(&self, k: usize) -> usize {
        self.len() - 1 - k
    }

    /// `Σ_k w g(k)` with the fixed pairwise reduction.
    pub fn integrate<F: Fn(usize) -> f64>(&self, g: F) -> f64 {
        self.weight * pairwise_sum(self.len(), g)
    }

    /// Discrete `L²_v` inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.integrate(|k| f[k] * g[k])
    }

    /// Samples `M(ρ, u)` on the nodes.
    pub fn sample_maxwellian(&self, p: &GasParams, m: &MacroState, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(&self.nodes) {
            *o = maxwellian(p, m, v);
        }
    }

    pub fn maxwellian(&self, p: &GasParams, m: &MacroState) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.sample_maxwellian(p, m, &mut out);
        out
    }

    /// Whether the support ball of `M(ρ, u)` lies inside the box.
    pub fn contains_support(&self, p: &GasParams, m: &MacroState) -> bool {
        let r = p.support_radius_at(m.rho);
        (0..self.dim).all(|a| m.u[a].abs() + r <= self.half_width)
    }
}

/// Quadrature moments `(∫F, ∫vF, ∫|v|²F)` of one velocity slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub rho: f64,
    pub momentum: Vector,
    pub energy: f64,
}

impl Moments {
    /// Converts to a macro state, rejecting densities at or below [`RHO_FLOOR`].
    pub fn macro_state(&self, cell: usize) -> Result<MacroState> {
        if !(self.rho > RHO_FLOOR) {
            return Err(Error::DensityFloor {
                cell,
                rho: self.rho,
                floor: RHO_FLOOR,
            });
        }
        let mut u = [0.0; MAX_DIM];
        for (ua, ma) in u.iter_mut().zip(&self.momentum) {
            *ua = ma / self.rho;
        }
        Ok(MacroState { rho: self.rho, u })
    }
}

pub fn moments(f: &[f64], g: &VelocityGrid) -> Moments {
    debug_assert_eq!(f.len(), g.len());
    let rho = g.integrate(|k| f[k]);
    let mut momentum = [0.0; MAX_DIM];
    for (a, m) in momentum.iter_mut().enumerate().take(g.dim) {
        *m = g.integrate(|k| g.nodes[k][a] * f[k]);
    }
    let energy = g.integrate(|k| g.speed_sq[k] * f[k]);
    Moments {
        rho,
        momentum,
        energy,
    }
}

/// Centred second moment `∫ (v−u)⊗(v−u) F dv`, row-major `d × d`.
pub fn pressure_tensor(f: &[f64], g: &VelocityGrid, u: &Vector) -> Vec<f64> {
    let d = g.dim;
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = g.integrate(|k| {
                let v = &g.nodes[k];
                (v[i] - u[i]) * (v[j] - u[j]) * f[k]
            });
        }
    }
    out
}

/// `∫ H(F, v) dv` for one velocity slice.
pub fn slice_entropy(f: &[f64], g: &VelocityGrid, p: &GasParams) -> f64 {
    g.integrate(|k| p.entropy_density(f[k], g.speed_sq[k]))
}

/// `∬ H(F, v) dv dx` over a phase-space field.
pub fn kinetic_entropy(field: &KineticField, p: &GasParams) -> f64 {
    let g = field.velocity();
    let nv = g.len();
    let data = field.data();
    let cell_volume = field.spatial().cell_volume();
    cell_volume
        * pairwise_sum(field.spatial().len(), |cell| {
            slice_entropy(&data[cell * nv..(cell + 1) * nv], g, p)
        })
}

/// Outcome of the discrete equilibrium correction.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteEquilibrium {
    /// Parameters `(ρ*, u*)` whose sampled equilibrium reproduces the target
    /// discrete moments.
    pub state: MacroState,
    pub iterations: usize,
    pub residual: f64,
}

/// Finds `(ρ*, u*)` such that the grid quadrature of `M(ρ*, u*)` reproduces
/// the discrete density and momentum `target`, writing the sampled
/// equilibrium into `out`.
///
/// The family `c(A − |v−u|²)_+^(n/2)` is exactly the set of minimizers of the
/// discrete entropy `Σ w H(F_k, v_k)` under fixed discrete mass and momentum,
/// so `out` is the discrete entropy minimizer.
pub fn discrete_maxwellian(
    p: &GasParams,
    g: &VelocityGrid,
    target: &Moments,
    cell: usize,
    out: &mut [f64],
) -> Result<DiscreteEquilibrium> {
    let dim = p.dim;
    let target_state = target.macro_state(cell)?;
    let rho = target.rho;
    let mut state = target_state;
    let nk = dim + 1;
    let mut kernel = vec![0.0; g.len()];
    let mut jac = [0.0; (MAX_DIM + 1) * (MAX_DIM + 1)];
    let mut rhs = [0.0; MAX_DIM + 1];
    let mut polished = false;
    let mut iterations = 0;

    let fail = |reason: String| Error::Correction { cell, reason };

    loop {
        // out = M, kernel = c B^((n-2)/2) on the support.
        let a = p.radius_sq() * state.rho.powf(p.gamma - 1.0);
        for (k, v) in g.nodes.iter().enumerate() {
            let base = a - dist_sq(v, &state.u, dim);
            if base > 0.0 {
                let kk = p.c * base.powf(0.5 * p.n - 1.0);
                kernel[k] = kk;
                out[k] = kk * base;
            } else {
                kernel[k] = 0.0;
                out[k] = 0.0;
            }
        }
        let m = moments(out, g);
        rhs[0] = rho - m.rho;
        for j in 0..dim {
            rhs[1 + j] = target.momentum[j] - m.momentum[j];
        }
        let residual = rhs[..nk].iter().fold(0.0_f64, |r, x| r.max(x.abs())) / rho;
        if !residual.is_finite() {
            return Err(fail("non-finite residual".into()));
        }
        if residual <= CORRECTION_TOLERANCE {
            // One extra Newton step drives the quadratic iteration to round-off.
            if polished || iterations >= CORRECTION_MAX_ITERATIONS || residual == 0.0 {
                return Ok(DiscreteEquilibrium {
                    state,
                    iterations,
                    residual,
                });
            }
            polished = true;
        } else if iterations >= CORRECTION_MAX_ITERATIONS {
            return Err(fail(format!(
                "no convergence after {iterations} iterations (residual {residual:e})"
            )));
        }
        iterations += 1;

        // Jacobian of (mass, momentum) with respect to (ρ*, u*).
        let drho = p.n * p.gamma * state.rho.powf(p.gamma - 2.0);
        let s0 = g.integrate(|k| kernel[k]);
        if s0 <= 0.0 {
            return Err(fail("equilibrium support contains no grid node".into()));
        }
        jac[0] = drho * s0;
        for j in 0..dim {
            jac[1 + j] = p.n * g.integrate(|k| (g.nodes[k][j] - state.u[j]) * kernel[k]);
        }
        for i in 0..dim {
            jac[(1 + i) * nk] = drho * g.integrate(|k| g.nodes[k][i] * kernel[k]);
            for j in 0..dim {
                jac[(1 + i) * nk + 1 + j] =
                    p.n * g.integrate(|k| g.nodes[k][i] * (g.nodes[k][j] - state.u[j]) * kernel[k]);
            }
        }
        if solve_dense(&mut jac[..nk * nk], &mut rhs[..nk], nk).is_none() {
            return Err(fail("singular Jacobian".into()));
        }
        let mut step = 1.0;
        while state.rho + step * rhs[0] <= 0.0 {
            step *= 0.5;
            if step < 1e-8 {
                return Err(fail("density update would become non-positive".into()));
            }
        }
        state.rho += step * rhs[0];
        for j in 0..dim {
            state.u[j] += step * rhs[1 + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> (GasParams, VelocityGrid) {
        let p = GasParams::new(1.1, 1).unwrap();
        let g = VelocityGrid::for_params(&p, &[512], DEFAULT_VELOCITY_MARGIN).unwrap();
        (p, g)
    }

    #[test]
    fn derived_constants() {
        let p = GasParams::new(1.1, 1).unwrap();
        assert!((p.n() - 19.0).abs() < 1e-12);
        let p = GasParams::new(1.5, 2).unwrap();
        assert!((p.n() - 2.0).abs() < 1e-12);
        assert!((p.support_radius() - 6f64.sqrt()).abs() < 1e-14);
        assert!((p.radius_sq() - 6.0).abs() < 1e-13);
    }

    #[test]
    fn normalization_constant_against_factorial_oracle() {
        // γ = 1.1, d = 1: c = 22^-10 · Γ(11) / (√π Γ(10.5)),
        // Γ(11) = 10!, Γ(10.5) = (19!!/2^10) √π.
        let p = GasParams::new(1.1, 1).unwrap();
        let fact10: f64 = (1..=10).map(f64::from).product();
        let dfact19: f64 = (1..=19).step_by(2).map(f64::from).product();
        let gamma_10_5 = dfact19 / 1024.0 * std::f64::consts::PI.sqrt();
        let expected = 22f64.powi(-10) * fact10 / (std::f64::consts::PI.sqrt() * gamma_10_5);
        // γ = 1.1 is not exact in binary, so n and the exponents carry O(1e-15) shifts.
        assert!(
            (p.c() / expected - 1.0).abs() < 1e-12,
            "{} vs {}",
            p.c(),
            expected
        );
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(matches!(
            GasParams::new(1.0, 1),
            Err(Error::GammaOutOfRange { .. })
        ));
        assert!(matches!(
            GasParams::new(3.0, 1),
            Err(Error::GammaOutOfRange { .. })
        ));
        assert!(matches!(
            GasParams::new(2.0, 2),
            Err(Error::GammaOutOfRange { .. })
        ));
        assert!(matches!(
            GasParams::new(f64::NAN, 1),
            Err(Error::GammaOutOfRange { .. })
        ));
        assert!(matches!(
            GasParams::new(1.1, 0),
            Err(Error::InvalidDimension { .. })
        ));
    }

    #[test]
    fn unit_mass_of_global_equilibrium() {
        let (p, g) = reference();
        let m0 = g.maxwellian(&p, &MacroState::rest(1.0));
        let mass = moments(&m0, &g).rho;
        assert!((mass - 1.0).abs() < 1e-13, "{mass}");
    }

    #[test]
    fn equilibrium_point_values() {
        let p = GasParams::new(1.1, 1).unwrap();
        let m = MacroState::rest(1.0);
        let r = p.support_radius();
        assert_eq!(maxwellian(&p, &m, &[r, 0.0, 0.0]), 0.0);
        assert_eq!(maxwellian(&p, &m, &[-r * 1.01, 0.0, 0.0]), 0.0);
        let centre = p.c() * p.radius_sq().powf(p.n() / 2.0);
        assert!((maxwellian(&p, &m, &[0.0; 3]) / centre - 1.0).abs() < 1e-15);
        assert_eq!(maxwellian(&p, &MacroState::rest(0.0), &[0.0; 3]), 0.0);
    }

    #[test]
    fn moments_at_shifted_state() {
        let p = GasParams::new(1.5, 2).unwrap();
        // n = 2: M is a paraboloid with a kink; a fine grid is needed.
        let g = VelocityGrid::new(2, &[400, 400], 5.0).unwrap();
        let f = g.maxwellian(&p, &MacroState::new(2.0, &[1.0, 0.0]));
        let m = moments(&f, &g);
        let expected = 2.0 + 2.0 * 2f64.powf(1.5);
        assert!((expected - 7.656854).abs() < 1e-6);
        assert!((m.energy / expected - 1.0).abs() < 1e-4, "{}", m.energy);
        assert!((m.rho / 2.0 - 1.0).abs() < 1e-4);
        assert!((m.momentum[0] / 2.0 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_field_moments_and_entropy() {
        let (p, g) = reference();
        let z = vec![0.0; g.len()];
        let m = moments(&z, &g);
        assert_eq!((m.rho, m.momentum, m.energy), (0.0, [0.0; 3], 0.0));
        assert_eq!(slice_entropy(&z, &g, &p), 0.0);
        assert!(m.macro_state(3).is_err());
    }

    #[test]
    fn grid_is_symmetric_with_positive_weights() {
        let g = VelocityGrid::new(2, &[6, 5], 2.0).unwrap();
        assert!(g.weight() > 0.0);
        assert!((g.weight() * g.len() as f64 - g.box_volume()).abs() < 1e-12);
        for k in 0..g.len() {
            let (a, b) = (g.node(k), g.node(g.mirror(k)));
            assert_eq!(a[0], -b[0]);
            assert_eq!(a[1], -b[1]);
        }
    }

    #[test]
    fn support_continuity_across_boundary() {
        let p = GasParams::new(1.1, 1).unwrap();
        let m = MacroState::rest(1.0);
        let r = p.support_radius();
        for eps in [1e-3, 1e-5, 1e-8] {
            let inside = maxwellian(&p, &m, &[r - eps, 0.0, 0.0]);
            let outside = maxwellian(&p, &m, &[r + eps, 0.0, 0.0]);
            assert_eq!(outside, 0.0);
            assert!(inside < 1e-15, "jump {inside} at eps {eps}");
        }
    }

    #[test]
    fn discrete_correction_matches_moments_exactly() {
        let p = GasParams::new(1.1, 1).unwrap();
        let g = VelocityGrid::for_params(&p, &[24], DEFAULT_VELOCITY_MARGIN).unwrap();
        let target = Moments {
            rho: 1.2,
            momentum: [0.3 * 1.2, 0.0, 0.0],
            energy: 0.0,
        };
        let mut out = vec![0.0; g.len()];
        let eq = discrete_maxwellian(&p, &g, &target, 0, &mut out).unwrap();
        let m = moments(&out, &g);
        assert!((m.rho - target.rho).abs() <= 1e-14 * target.rho);
        assert!((m.momentum[0] - target.momentum[0]).abs() <= 1e-14 * target.rho);
        // Coarse grid: the corrected parameters move away from the analytic ones.
        assert!((eq.state.rho - 1.2).abs() > 0.0);
    }
}
