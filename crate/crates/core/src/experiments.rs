//! Experiment drivers shared by the command-line tool and the test suites:
//! initial data, the identity suite, decay runs, the hydrodynamic-limit sweep
//! and the generic simulation driver.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;

use crate::config::{InitFamily, RunConfig};
use crate::diagnostics::{
    conservation_report, fit_decay, ConservationReport, DecayFit, Diagnostics, DiagnosticsRecord,
};
use crate::discretization::{KineticField, PeriodicField, Snapshot, SpatialGrid};
use crate::equilibrium::{
    moments, pressure_tensor, slice_entropy, GasParams, MacroState, VelocityGrid,
};
use crate::euler_ref::{euler_run, kinetic_vs_euler_error, EulerState};
use crate::numeric::solve_dense;
use crate::output::CsvSink;
use crate::perturbation::Perturbation;
use crate::rng::SplitMix64;
use crate::solver::{RunOutcome, Solver, SolverConfig};
use crate::{Error, Result, Vector, MAX_DIM};

/// `(ρ, u)` of the named macroscopic families at position `x`.
fn family_state(cfg: &RunConfig, x: &Vector) -> MacroState {
    let phase: f64 = (0..cfg.dim)
        .map(|a| 2.0 * std::f64::consts::PI * cfg.init.k[a] as f64 / cfg.lengths[a] * x[a])
        .sum();
    let amp = cfg.init.amplitude;
    match cfg.init.family {
        InitFamily::DensityMode => MacroState::rest(1.0 + amp * phase.cos()),
        InitFamily::VelocityMode => {
            let mut u = [0.0; MAX_DIM];
            u[0] = amp * phase.sin();
            MacroState { rho: 1.0, u }
        }
        _ => MacroState::rest(1.0),
    }
}

fn phase(cfg: &RunConfig, x: &Vector) -> f64 {
    (0..cfg.dim)
        .map(|a| 2.0 * std::f64::consts::PI * cfg.init.k[a] as f64 / cfg.lengths[a] * x[a])
        .sum()
}

/// Initial phase-space field and start time for a configuration.
pub fn initial_field(cfg: &RunConfig) -> Result<(KineticField, f64)> {
    let params = cfg.params();
    if cfg.init.family == InitFamily::Snapshot {
        let path = cfg.init.snapshot.as_ref().expect("validated");
        let snap = Snapshot::read(path)
            .map_err(|e| Error::config("init.snapshot", format!("{}: {e}", path.display())))?;
        if snap.gamma != cfg.gamma || snap.field.spatial().dim() != cfg.dim {
            return Err(Error::config(
                "init.snapshot",
                format!(
                    "snapshot has γ = {}, d = {}",
                    snap.gamma,
                    snap.field.spatial().dim()
                ),
            ));
        }
        return Ok((snap.field, snap.time));
    }
    let spatial = Arc::new(cfg.spatial_grid());
    let velocity = Arc::new(cfg.velocity_grid()?);
    let field = if cfg.init.family == InitFamily::BasisPerturbation {
        let pt = Perturbation::new(&params, velocity.clone(), f64::INFINITY)?;
        let s = spatial.clone();
        let f = KineticField::from_fn(spatial.clone(), velocity.clone(), |cell, out| {
            let g = cfg.init.amplitude * phase(cfg, &s.center(cell)).cos();
            out.iter_mut().for_each(|o| *o = 0.0);
            for (i, &ci) in cfg.init.coeffs.iter().enumerate() {
                for (o, e) in out.iter_mut().zip(pt.basis().vector(i)) {
                    *o += g * ci * e;
                }
            }
        });
        pt.from_perturbation(&f)?
    } else {
        let mut bad = None;
        let s = spatial.clone();
        let field = KineticField::from_fn(spatial.clone(), velocity.clone(), |cell, out| {
            let m = family_state(cfg, &s.center(cell));
            if bad.is_none() && !velocity.contains_support(&params, &m) {
                bad = Some(cell);
            }
            velocity.sample_maxwellian(&params, &m, out);
        });
        if let Some(cell) = bad {
            return Err(Error::config(
                "grid.velocity_margin",
                format!("equilibrium support in cell {cell} exceeds the velocity box"),
            ));
        }
        field
    };
    if field.min() < 0.0 {
        return Err(Error::config(
            "init.amplitude",
            format!("initial data is negative (min {:e})", field.min()),
        ));
    }
    Ok((field, 0.0))
}

/// Removes the total mass and momentum carried by the perturbation by
/// subtracting a spatially constant combination of basis vectors.
pub fn remove_perturbation_moments(
    pt: &Perturbation,
    big_f: &KineticField,
) -> Result<KineticField> {
    let (mut f, _) = pt.to_perturbation(big_f)?;
    let dim = pt.params().dim();
    let nb = dim + 1;
    let (mass, mom) = pt.perturbation_moments(&f);
    let mut rhs = [0.0; MAX_DIM + 1];
    rhs[0] = mass;
    rhs[1..nb].copy_from_slice(&mom[..dim]);
    // Column i: moments of a unit amount of e_i spread over the torus.
    let vol = f.spatial().volume();
    let g = pt.grid();
    let w = pt.weight().weight();
    let mut mat = vec![0.0; nb * nb];
    for i in 0..nb {
        let e = pt.basis().vector(i);
        mat[i] = vol * g.integrate(|k| w[k] * e[k]);
        for j in 0..dim {
            mat[(1 + j) * nb + i] = vol * g.integrate(|k| g.node(k)[j] * w[k] * e[k]);
        }
    }
    solve_dense(&mut mat, &mut rhs[..nb], nb)
        .ok_or_else(|| Error::ShapeMismatch("singular moment matrix".into()))?;
    let nv = g.len();
    let mut shift = vec![0.0; nv];
    for (i, &beta) in rhs[..nb].iter().enumerate() {
        for (s, e) in shift.iter_mut().zip(pt.basis().vector(i)) {
            *s += beta * e;
        }
    }
    for chunk in f.data_mut().chunks_mut(nv) {
        for (x, s) in chunk.iter_mut().zip(&shift) {
            *x -= s;
        }
    }
    pt.from_perturbation(&f)
}

/// Everything a simulation produced, including a partial trajectory on abort.
#[derive(Debug)]
pub struct Simulation {
    pub records: Vec<DiagnosticsRecord>,
    pub final_field: KineticField,
    pub final_time: f64,
    pub steps: u64,
    pub max_entropy_increase: f64,
    pub entropy_violations: u64,
    pub snapshots: Vec<PathBuf>,
    pub abort: Option<Error>,
}

/// Where a simulation writes its side products.
#[derive(Default)]
pub struct Sinks<'a> {
    pub csv: Option<&'a mut CsvSink>,
    /// Directory and cadence for snapshots.
    pub snapshots: Option<(&'a Path, f64)>,
}

fn is_multiple(t: f64, interval: f64) -> bool {
    let q = t / interval;
    (q - q.round()).abs() <= 1e-9 * q.abs().max(1.0)
}

/// Runs the kinetic solver, recording diagnostics at the output cadence.
pub fn simulate(
    diag: &Diagnostics,
    solver: &Solver,
    initial: KineticField,
    t0: f64,
    mut sinks: Sinks<'_>,
) -> Simulation {
    let gamma = solver.params().gamma();
    let mut snapshots = Vec::new();
    let RunOutcome {
        trajectory,
        state,
        abort,
    } = solver.run(initial, t0, |s| {
        let rec = diag.record(&s.field, s.t)?;
        if let Some(csv) = sinks.csv.as_deref_mut() {
            csv.write_row(&rec.row())?;
        }
        if let Some((dir, every)) = sinks.snapshots {
            let last = s.t >= solver.config().t_end * (1.0 - 1e-12);
            if is_multiple(s.t, every) || last {
                let index = (s.t / every).round() as u64;
                let path = if is_multiple(s.t, every) {
                    dir.join(format!("snapshot_{index:06}.bin"))
                } else {
                    dir.join("snapshot_final.bin")
                };
                Snapshot {
                    gamma,
                    time: s.t,
                    field: s.field.clone(),
                }
                .write(&path)?;
                snapshots.push(path);
            }
        }
        Ok(rec)
    });
    Simulation {
        records: trajectory,
        final_time: state.t,
        steps: state.steps,
        max_entropy_increase: state.max_entropy_increase,
        entropy_violations: state.entropy_violations,
        final_field: state.field,
        snapshots,
        abort,
    }
}

fn diagnostics_for(cfg: &RunConfig, velocity: Arc<VelocityGrid>) -> Result<Diagnostics> {
    let pt = Perturbation::new(&cfg.params(), velocity, cfg.gram_tolerance)?;
    Diagnostics::new(pt, cfg.diagnostics_order, cfg.stencil_order)
}

/// Outcome of a decay experiment.
#[derive(Debug)]
pub struct DecayOutcome {
    pub simulation: Simulation,
    pub fit: Result<DecayFit>,
    pub conservation: ConservationReport,
    /// `E(f)(t_end) / E(f)(t_0)`.
    pub energy_ratio: f64,
}

/// Decay run: initial data from the configured family with the perturbation's
/// total mass and momentum projected out, then a fit of `ln E(f)`.
pub fn decay(cfg: &RunConfig, csv: Option<&mut CsvSink>) -> Result<DecayOutcome> {
    let (initial, t0) = initial_field(cfg)?;
    let diag = diagnostics_for(cfg, initial.velocity_arc().clone())?;
    let initial = remove_perturbation_moments(diag.perturbation(), &initial)?;
    let solver_cfg = SolverConfig {
        track_entropy: true,
        ..cfg.solver.clone()
    };
    let solver = Solver::new(&cfg.params(), solver_cfg)?;
    let simulation = simulate(
        &diag,
        &solver,
        initial,
        t0,
        Sinks {
            csv,
            snapshots: None,
        },
    );
    let times: Vec<f64> = simulation.records.iter().map(|r| r.t).collect();
    let energies: Vec<f64> = simulation.records.iter().map(|r| r.energy_total).collect();
    let fit = fit_decay(&times, &energies, cfg.decay_window);
    let conservation = conservation_report(&simulation.records);
    let energy_ratio = match (energies.first(), energies.last()) {
        (Some(&a), Some(&b)) if a > 0.0 => b / a,
        _ => f64::NAN,
    };
    Ok(DecayOutcome {
        simulation,
        fit,
        conservation,
        energy_ratio,
    })
}

/// One row of the hydrodynamic-limit table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydroRow {
    pub epsilon: f64,
    pub l1_rho: f64,
    pub l1_u: f64,
}

impl HydroRow {
    pub const HEADER: [&'static str; 3] = ["epsilon", "l1_rho_error", "l1_u_error"];
}

/// One kinetic run per `ε` plus one Euler run from the kinetic initial moments.
pub fn hydro_limit(cfg: &RunConfig) -> Result<Vec<HydroRow>> {
    let (initial, _) = initial_field(cfg)?;
    let euler0 = EulerState::from_kinetic(&initial)?;
    let euler = euler_run(
        &euler0,
        cfg.gamma,
        cfg.solver.t_end,
        cfg.euler_cfl,
        cfg.euler_dt,
    )?;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    for &epsilon in &cfg.epsilons {
        let solver_cfg = SolverConfig {
            epsilon,
            output_interval: cfg.solver.t_end,
            ..cfg.solver.clone()
        };
        let solver = Solver::new(&cfg.params(), solver_cfg)?;
        let out = solver.run(initial.clone(), 0.0, |_| Ok(()));
        if let Some(e) = out.abort {
            return Err(e);
        }
        let kinetic = EulerState::from_kinetic(&out.state.field)?;
        let (l1_rho, l1_u) = kinetic_vs_euler_error(&kinetic, &euler)?;
        log::info!("epsilon = {epsilon:e}: L1 errors rho {l1_rho:e}, u {l1_u:e}");
        rows.push(HydroRow {
            epsilon,
            l1_rho,
            l1_u,
        });
    }
    Ok(rows)
}

/// Generic driver: diagnostics CSV plus snapshots at the configured cadence.
pub fn run(cfg: &RunConfig, csv: &mut CsvSink, snapshot_dir: &Path) -> Result<Simulation> {
    let (initial, t0) = initial_field(cfg)?;
    let diag = diagnostics_for(cfg, initial.velocity_arc().clone())?;
    let solver = Solver::new(&cfg.params(), cfg.solver.clone())?;
    let snapshots = cfg.snapshot_interval.map(|every| (snapshot_dir, every));
    Ok(simulate(
        &diag,
        &solver,
        initial,
        t0,
        Sinks {
            csv: Some(csv),
            snapshots,
        },
    ))
}

/// Diagnostics column names for a configuration.
pub fn diagnostics_header(cfg: &RunConfig) -> Vec<String> {
    DiagnosticsRecord::header(cfg.dim, cfg.diagnostics_order)
}

/// One line of the identity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub gamma: f64,
    pub dim: usize,
    pub velocity_points: Vec<usize>,
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Draws an admissible `(ρ, u)` with `ρ ∈ [0.5, 2]`, `|u| ≤ 0.2R`, whose
/// support lies inside the velocity box.
pub fn sample_state(p: &GasParams, g: &VelocityGrid, rng: &mut SplitMix64) -> MacroState {
    let umax = 0.2 * p.support_radius();
    loop {
        let rho = rng.uniform(0.5, 2.0);
        let mut u = [0.0; MAX_DIM];
        for ua in u.iter_mut().take(p.dim()) {
            *ua = rng.uniform(-umax, umax);
        }
        let m = MacroState { rho, u };
        if m.speed() <= umax && g.contains_support(p, &m) {
            return m;
        }
    }
}

/// Largest relative error of the quadrature moments `(ρ, ρu, ρ|u|² + dρ^γ)`.
pub fn moment_identity_error(p: &GasParams, g: &VelocityGrid, states: &[MacroState]) -> f64 {
    let d = p.dim();
    let mut worst = 0.0_f64;
    for m in states {
        let f = g.maxwellian(p, m);
        let mo = moments(&f, g);
        let u2: f64 = m.u[..d].iter().map(|x| x * x).sum();
        let energy = m.rho * u2 + d as f64 * m.rho.powf(p.gamma());
        worst = worst.max((mo.rho - m.rho).abs() / m.rho);
        for a in 0..d {
            worst = worst.max((mo.momentum[a] - m.rho * m.u[a]).abs() / m.rho);
        }
        worst = worst.max((mo.energy - energy).abs() / energy);
    }
    worst
}

/// A nonnegative non-equilibrium slice whose equilibrium fits in the box.
pub fn random_nonnegative_slice(
    p: &GasParams,
    g: &VelocityGrid,
    rng: &mut SplitMix64,
    index: usize,
) -> Vec<f64> {
    loop {
        let f: Vec<f64> = if index.is_multiple_of(2) {
            let base = g.maxwellian(p, &sample_state(p, g, rng));
            base.iter().map(|x| x * rng.uniform(0.1, 1.9)).collect()
        } else {
            let r = 0.5 * p.support_radius();
            g.speed_sq()
                .iter()
                .map(|&v2| {
                    if v2 < r * r {
                        rng.uniform(0.0, 1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let Ok(state) = moments(&f, g).macro_state(0) else {
            continue;
        };
        if g.contains_support(p, &state) {
            return f;
        }
    }
}

/// Random perturbation slice: uniform in `[−1, 1]` off the mask, zero on it.
pub fn random_perturbation_slice(pt: &Perturbation, rng: &mut SplitMix64) -> Vec<f64> {
    pt.weight()
        .masked()
        .iter()
        .map(|&m| if m { 0.0 } else { rng.uniform(-1.0, 1.0) })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Spread `max/min − 1` of `‖Γ(εf̂)‖/ε²` over the given `ε` values for a unit
/// seeded direction `f̂`.
pub fn nonlinear_scaling_spread(
    pt: &Perturbation,
    seed: u64,
    epsilons: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let g = pt.grid();
    let mut rng = SplitMix64::new(seed);
    let dir = random_perturbation_slice(pt, &mut rng);
    let n = g.inner(&dir, &dir).sqrt();
    let ratios = epsilons
        .iter()
        .map(|&eps| {
            let f: Vec<f64> = dir.iter().map(|x| eps * x / n).collect();
            let gamma = pt.nonlinear_op(&f)?;
            Ok(g.inner(&gamma.value, &gamma.value).sqrt() / (eps * eps))
        })
        .collect::<Result<Vec<f64>>>()?;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok((hi / lo - 1.0, ratios))
}

/// The equilibrium and perturbation identity suite on the configured grid.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let p = cfg.params();
    let d = p.dim();
    let g = Arc::new(cfg.velocity_grid()?);
    let mut checks = Vec::new();
    let mut rng = SplitMix64::new(cfg.seed);

    // Equilibrium.
    let m0 = g.maxwellian(&p, &MacroState::rest(1.0));
    let mass = g.integrate(|k| m0[k]);
    checks.push(Check::new(
        "mass_normalization",
        (mass - 1.0).abs(),
        1e-6,
        "|∫M0 dv − 1|",
    ));

    let states: Vec<MacroState> = (0..cfg.verify_samples)
        .map(|_| sample_state(&p, &g, &mut rng))
        .collect();
    let err = moment_identity_error(&p, &g, &states);
    checks.push(Check::new(
        "moment_identity",
        err,
        1e-6,
        format!(
            "max relative error of (ρ, ρu, ρ|u|²+dρ^γ) over {} states",
            states.len()
        ),
    ));
    let half: Vec<usize> = cfg
        .velocity_points
        .iter()
        .map(|&k| (k / 2).max(2))
        .collect();
    let coarse = VelocityGrid::new(d, &half, g.half_width())?;
    let coarse_states: Vec<MacroState> = states
        .iter()
        .copied()
        .filter(|m| coarse.contains_support(&p, m))
        .collect();
    let coarse_err = moment_identity_error(&p, &coarse, &coarse_states);
    checks.push(Check::new(
        "moment_refinement",
        err,
        coarse_err.max(1e-13),
        format!("error on the grid vs. on the half-resolution grid ({coarse_err:e}); round-off floor 1e-13"),
    ));

    let mut iso = 0.0_f64;
    for m in &states {
        let f = g.maxwellian(&p, m);
        let t = pressure_tensor(&f, &g, &m.u);
        let pr = m.rho.powf(p.gamma());
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { pr } else { 0.0 };
                iso = iso.max((t[i * d + j] - target).abs() / pr);
            }
        }
    }
    checks.push(Check::new(
        "pressure_isotropy",
        iso,
        1e-6,
        "max |∫(v−u)⊗(v−u)M − ρ^γ I| / ρ^γ",
    ));

    let mut worst_entropy = f64::NEG_INFINITY;
    for i in 0..cfg.verify_samples {
        let f = random_nonnegative_slice(&p, &g, &mut rng, i);
        let state = moments(&f, &g).macro_state(0)?;
        let m = g.maxwellian(&p, &state);
        worst_entropy = worst_entropy.max(slice_entropy(&m, &g, &p) - slice_entropy(&f, &g, &p));
    }
    checks.push(Check::new(
        "entropy_minimization",
        worst_entropy,
        1e-10,
        "max ∫H(M[F]) − ∫H(F) over random nonnegative F",
    ));

    // Perturbation framework.
    if !p.has_perturbation_weight() {
        checks.push(Check::new(
            "perturbation_weight",
            f64::INFINITY,
            0.0,
            format!("n = {} ≤ 2: the weighted perturbation is undefined", p.n()),
        ));
    } else {
        let pt = Perturbation::new(&p, g.clone(), f64::INFINITY)?;
        let dev = pt.basis().deviation();
        let verdict = if dev > cfg.gram_tolerance {
            "; velocity grid too coarse to resolve the basis"
        } else {
            ""
        };
        checks.push(Check::new(
            "gram_deviation",
            dev,
            cfg.gram_tolerance,
            format!("max |G − I| of the projection basis{verdict}"),
        ));

        let kernel = p.c();
        let e = 0.5 * (p.n() - 2.0);
        let ker: Vec<f64> = g
            .speed_sq()
            .iter()
            .map(|&v2| kernel * (p.radius_sq() - v2).max(0.0).powf(e))
            .collect();
        let i1 = p.n() * p.gamma() * g.integrate(|k| ker[k]);
        let i2 = p.n() * g.integrate(|k| g.node(k)[0].powi(2) * ker[k]);
        checks.push(Check::new(
            "closed_form_density",
            (i1 - 1.0).abs(),
            1e-6,
            "|nγ ∫ c (R² − |v|²)_+^((n−2)/2) dv − 1|",
        ));
        checks.push(Check::new(
            "closed_form_momentum",
            (i2 - 1.0).abs(),
            1e-6,
            "|n ∫ v₁² c (R² − |v|²)_+^((n−2)/2) dv − 1|",
        ));

        let mut kern = 0.0_f64;
        for i in 0..pt.basis().len() {
            let l = pt.linear_op(pt.basis().vector(i));
            kern = kern.max(g.inner(&l, &l).sqrt());
        }
        checks.push(Check::new("projection_kernel", kern, 1e-10, "max ‖L e_i‖"));

        let (mut coer, mut idem) = (0.0_f64, 0.0_f64);
        for _ in 0..cfg.verify_random_fields {
            let f = random_perturbation_slice(&pt, &mut rng);
            let nf2 = g.inner(&f, &f);
            let lf = pt.linear_op(&f);
            let micro = pt.micro_part(&f);
            coer = coer.max((g.inner(&lf, &f) + g.inner(&micro, &micro)).abs() / nf2);
            let pf = pt.project(&f);
            let ppf = pt.project(&pf);
            idem = idem.max(max_abs_diff(&pf, &ppf) / nf2.sqrt());
        }
        checks.push(Check::new(
            "coercivity_identity",
            coer,
            1e-10,
            format!(
                "max |⟨Lf,f⟩ + ‖(I−P)f‖²| / ‖f‖² over {} fields",
                cfg.verify_random_fields
            ),
        ));
        checks.push(Check::new(
            "projection_idempotence",
            idem,
            1e-10,
            "max ‖P²f − Pf‖∞ / ‖f‖",
        ));

        let (spread, ratios) = nonlinear_scaling_spread(&pt, cfg.seed, &[1e-2, 1e-3, 1e-4])?;
        checks.push(Check::new(
            "nonlinear_quadratic",
            spread,
            0.2,
            format!("‖Γ(εf̂)‖/ε² for ε = 1e-2, 1e-3, 1e-4: {ratios:?}"),
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        gamma: cfg.gamma,
        dim: d,
        velocity_points: cfg.velocity_points.clone(),
        passed,
        checks,
    })
}

/// Builds a 1-D torus field from macroscopic data; used by tests and examples.
pub fn equilibrium_field(
    p: &GasParams,
    spatial: Arc<SpatialGrid>,
    velocity: Arc<VelocityGrid>,
    state: impl Fn(&Vector) -> MacroState,
) -> KineticField {
    let s = spatial.clone();
    KineticField::from_fn(spatial, velocity.clone(), |cell, out| {
        velocity.sample_maxwellian(p, &state(&s.center(cell)), out)
    })
}
