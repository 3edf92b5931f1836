//! The nonlinear vorticity equation `∂ₜω + u·∇ω = Δω` with measure data.
//!
//! In decomposed mode the retained atoms of the initial measure become
//! Oseen vortices with fixed centers, evaluated in closed form, and only
//! the remainder `ω̃ = ω − Σ ωᵢ` is put on the grid. Each `ωᵢ` solves the
//! heat equation and `uᵢ·∇ωᵢ = 0`, so subtracting leaves
//!
//! `∂ₜω̃ = Δω̃ − ∇·((u_O + ũ)ω̃) − Σ_{i≠j} uⱼ·∇ωᵢ − ũ·∇ω_O`,
//!
//! with `u_O`, `ω_O` the background sums and `ũ` the velocity of `ω̃`.
//! Direct mode puts the whole heat-smoothed measure on the grid.

use std::fs;
use std::path::Path;

use ndarray::Zip;
use serde_json::json;

use crate::biot_savart::{decay_tolerance, velocity_free_space_unchecked};
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::io::measure_hash;
use crate::measure::{AtomicDecomposition, FiniteMeasure};
use crate::oseen::{OseenBackground, OseenVortex};
use crate::propagators::{
    drift_step_bound, flux_divergence, if_rk4_step, march, uniform_outputs, Clock, StepControl,
    StepperConfig, Trajectory,
};
use crate::scalar::Real;

/// Oseen backgrounds plus a gridded remainder at time `t`.
#[derive(Clone, Debug)]
pub struct VortexSystem<T: Real> {
    pub background: OseenBackground<T>,
    pub remainder: ScalarField<T>,
    pub t: T,
}

impl<T: Real> VortexSystem<T> {
    pub fn grid(&self) -> &Grid<T> {
        self.remainder.grid()
    }

    /// `Σαᵢ + ∫ω̃`.
    pub fn circulation(&self) -> T {
        self.background.circulation() + self.remainder.integral()
    }

    pub fn vorticity(&self) -> ScalarField<T> {
        &self.background.vorticity(self.grid(), self.t) + &self.remainder
    }

    pub fn velocity(&self) -> VectorField<T> {
        self.background
            .velocity(self.grid(), self.t)
            .add(&velocity_free_space_unchecked(&self.remainder))
    }

    /// `‖ω‖_{L¹}`, with the quadrature refined until the background cores
    /// are resolved: a Gaussian of variance `2t` sampled at spacing `h`
    /// integrates with relative error near `exp(-4π²t/h²)`, so the spacing
    /// is reduced to at most `√t`. The remainder is interpolated.
    pub fn l1_norm(&self) -> Result<T> {
        let grid = self.grid();
        let h = grid.spacing();
        let r = if self.background.is_empty() {
            1
        } else {
            (h / self.t.sqrt()).ceil().to_usize().unwrap_or(1).max(1)
        };
        if r == 1 {
            return self.vorticity().lp_norm(T::one());
        }
        let fine = Grid::new(grid.n() * r, grid.box_size())?;
        let xs = fine.coords();
        let rem = ScalarField::new(&fine, self.remainder.sample_tensor(&xs, &xs))?;
        (&self.background.vorticity(&fine, self.t) + &rem).lp_norm(T::one())
    }
}

/// Decomposes `mu` at threshold `epsilon` and sets up the system at `t0`:
/// one exact Oseen vortex per retained atom and `e^{t0Δ}μ₀` on the grid.
pub fn initialize_from_measure<T: Real>(
    mu: &FiniteMeasure<T>,
    epsilon: T,
    t0: T,
    grid: &Grid<T>,
) -> Result<(VortexSystem<T>, AtomicDecomposition<T>)> {
    if !(t0 > T::zero()) || !t0.is_finite() {
        return Err(Error::Domain(format!("t0 must be positive, got {t0}")));
    }
    let dec = mu.decompose(epsilon)?;
    let reach = T::lit(6.0) * t0.sqrt();
    for (alpha, z) in &dec.retained {
        if grid.margin(*z) < reach {
            return Err(Error::Margin(format!(
                "vortex {alpha} at ({}, {}) lies within 6√t0 of the box boundary",
                z[0], z[1]
            )));
        }
    }
    if dec.d.is_finite() && t0 > dec.d * dec.d / T::lit(100.0) {
        log::warn!(
            "t0 = {t0} is not small against d² = {}; the vortices already overlap",
            dec.d * dec.d
        );
    }
    let remainder = dec.remainder.heat_smooth(t0, grid)?;
    let background = OseenBackground::new(
        dec.retained
            .iter()
            .map(|(alpha, z)| OseenVortex::new(*alpha, *z))
            .collect(),
    );
    Ok((
        VortexSystem {
            background,
            remainder,
            t: t0,
        },
        dec,
    ))
}

/// Speed bound of the system at its current time.
fn system_speed<T: Real>(sys: &VortexSystem<T>) -> T {
    sys.background.max_speed(sys.t) + velocity_free_space_unchecked(&sys.remainder).max_norm()
}

fn step_cap<T: Real>(cfg: &StepperConfig<T>, t: T) -> Option<T> {
    matches!(cfg.control, StepControl::Cfl(_)).then(|| t / T::lit(50.0))
}

/// Right-hand side of the remainder equation at time `s`, without `Δω̃`.
fn remainder_rhs<T: Real>(bg: &OseenBackground<T>, w: &ScalarField<T>, s: T) -> ScalarField<T> {
    let grid = w.grid();
    let u_tilde = velocity_free_space_unchecked(w);
    if bg.is_empty() {
        return -&flux_divergence(&u_tilde, w);
    }
    let u = bg.velocity(grid, s).add(&u_tilde);
    let grad_o = bg.vorticity_gradient(grid, s);
    let coupling = Zip::from(u_tilde.x.values())
        .and(u_tilde.y.values())
        .and(grad_o.x.values())
        .and(grad_o.y.values())
        .map_collect(|ux, uy, gx, gy| *ux * *gx + *uy * *gy);
    let mut out = flux_divergence(&u, w);
    let cross = if bg.vortices.len() > 1 {
        Some(bg.cross_advection(grid, s))
    } else {
        None
    };
    Zip::from(out.values_mut()).and(&coupling).for_each(|o, c| *o = -(*o + *c));
    if let Some(cross) = cross {
        Zip::from(out.values_mut()).and(cross.values()).for_each(|o, c| *o = *o - *c);
    }
    out
}

/// Advances the remainder by `dt`; backgrounds move only through `t`.
pub fn step_decomposed<T: Real>(
    sys: &VortexSystem<T>,
    dt: T,
    cfg: &StepperConfig<T>,
) -> Result<VortexSystem<T>> {
    let h = sys.grid().spacing();
    let speed = system_speed(sys);
    if speed > T::zero() && dt > h / (T::lit(2.0) * speed) * (T::one() + T::lit(1e-12)) {
        return Err(Error::Stability {
            dt: dt.as_f64(),
            bound: (h / (T::lit(2.0) * speed)).as_f64(),
        });
    }
    advance_remainder(&sys.background, &sys.remainder, sys.t, dt, cfg).map(|remainder| {
        VortexSystem {
            background: sys.background.clone(),
            remainder,
            t: sys.t + dt,
        }
    })
}

fn advance_remainder<T: Real>(
    bg: &OseenBackground<T>,
    w: &ScalarField<T>,
    t: T,
    dt: T,
    cfg: &StepperConfig<T>,
) -> Result<ScalarField<T>> {
    if_rk4_step(w, t, dt, cfg.dealias, |v, s| Ok(remainder_rhs(bg, v, s)))
}

/// One step of the full equation with `u` the free-space velocity of `ω`
/// and the advection in divergence form.
pub fn step_direct<T: Real>(
    omega: &ScalarField<T>,
    dt: T,
    cfg: &StepperConfig<T>,
) -> Result<ScalarField<T>> {
    let sys = VortexSystem {
        background: OseenBackground::default(),
        remainder: omega.clone(),
        t: T::one(),
    };
    Ok(step_decomposed(&sys, dt, cfg)?.remainder)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The whole vorticity on the grid.
    Direct,
    /// Oseen backgrounds in closed form, remainder on the grid.
    Decomposed,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Decomposed => "decomposed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig<T: Real> {
    pub grid: Grid<T>,
    /// `stepper.sample_interval` is the snapshot spacing in `τ = ln t`.
    pub stepper: StepperConfig<T>,
    pub t0: T,
    pub t_end: T,
    pub mode: Mode,
}

impl<T: Real> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > T::zero()) || !(self.t_end > self.t0) || !self.t_end.is_finite() {
            return Err(Error::Domain(format!(
                "need 0 < t0 < t_end, got t0 = {}, t_end = {}",
                self.t0, self.t_end
            )));
        }
        Ok(())
    }

    /// Snapshot times, evenly spaced in `ln t`, ending at `t_end`.
    pub fn snapshot_times(&self) -> Vec<T> {
        let span = (self.t_end / self.t0).ln();
        uniform_outputs(T::zero(), span, self.stepper.sample_interval)
            .into_iter()
            .map(|s| if s == span { self.t_end } else { self.t0 * s.exp() })
            .collect()
    }
}

/// A completed run: the remainder trajectory (the full field in direct
/// mode) with the backgrounds needed to rebuild `ω`.
#[derive(Clone, Debug)]
pub struct SolverRun<T: Real> {
    pub config: RunConfig<T>,
    pub initial: FiniteMeasure<T>,
    pub decomposition: Option<AtomicDecomposition<T>>,
    pub background: OseenBackground<T>,
    pub remainder: Trajectory<T>,
    /// `√t ‖u(t)‖_∞` at each snapshot.
    pub velocity_scale: Vec<T>,
}

impl<T: Real> SolverRun<T> {
    pub fn grid(&self) -> &Grid<T> {
        &self.config.grid
    }

    pub fn times(&self) -> &[T] {
        self.remainder.times()
    }

    pub fn system(&self, k: usize) -> VortexSystem<T> {
        VortexSystem {
            background: self.background.clone(),
            remainder: self.remainder.states()[k].clone(),
            t: self.remainder.times()[k],
        }
    }

    /// Total vorticity at snapshot `k`.
    pub fn vorticity(&self, k: usize) -> ScalarField<T> {
        self.system(k).vorticity()
    }

    pub fn is_decomposed(&self) -> bool {
        self.config.mode == Mode::Decomposed
    }

    /// The same run seen on a coarser grid whose nodes are a subset.
    pub fn restricted_to(&self, coarse: &Grid<T>) -> Result<SolverRun<T>> {
        let mut traj = Trajectory::new(Clock::Time);
        for (t, w) in self.remainder.times().iter().zip(self.remainder.states()) {
            traj.push(*t, w.restrict_to(coarse)?)?;
        }
        let mut config = self.config.clone();
        config.grid = coarse.clone();
        Ok(SolverRun {
            config,
            initial: self.initial.clone(),
            decomposition: self.decomposition.clone(),
            background: self.background.clone(),
            remainder: traj,
            velocity_scale: self.velocity_scale.clone(),
        })
    }

    /// Writes the remainder snapshots, `series.csv` and `run.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.remainder.dump(dir)?;
        let cfg = &self.config;
        let (control, value) = match cfg.stepper.control {
            StepControl::Fixed(dt) => ("dt", dt.as_f64()),
            StepControl::Cfl(c) => ("cfl", c.as_f64()),
        };
        let snapshots: Vec<_> = self
            .times()
            .iter()
            .enumerate()
            .map(|(k, t)| json!({"index": k, "t": t.as_f64(), "file": format!("w_t_{k}.fld")}))
            .collect();
        let manifest = json!({
            "grid_n": cfg.grid.n(),
            "box_l": cfg.grid.box_size().as_f64(),
            "mode": cfg.mode.name(),
            "t0": cfg.t0.as_f64(),
            "t_end": cfg.t_end.as_f64(),
            "step_control": control,
            "step_value": value,
            "dealias": cfg.stepper.dealias,
            "snapshot_dtau": cfg.stepper.sample_interval.as_f64(),
            "epsilon": self.decomposition.as_ref().map(|d| d.epsilon.as_f64()),
            "backgrounds": self.background.vortices.iter()
                .map(|v| json!({"alpha": v.alpha.as_f64(), "z": [v.z[0].as_f64(), v.z[1].as_f64()]}))
                .collect::<Vec<_>>(),
            "measure_sha256": measure_hash(&self.initial),
            "snapshots": snapshots,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Format(e.to_string()))?;
        fs::write(dir.join("run.json"), text)?;
        Ok(())
    }
}

/// Decompose, initialize and march to `t_end`, storing geometric
/// snapshots. Every snapshot must satisfy `‖ω(t)‖_{L¹} ≤ ‖μ‖(1 + 10⁻⁶)`.
pub fn solve_cauchy<T: Real>(
    mu: &FiniteMeasure<T>,
    epsilon: T,
    config: &RunConfig<T>,
) -> Result<SolverRun<T>> {
    config.validate()?;
    let grid = &config.grid;
    let (sys, dec) = match config.mode {
        Mode::Decomposed => {
            let (sys, dec) = initialize_from_measure(mu, epsilon, config.t0, grid)?;
            (sys, Some(dec))
        }
        Mode::Direct => (
            VortexSystem {
                background: OseenBackground::default(),
                remainder: mu.heat_smooth(config.t0, grid)?,
                t: config.t0,
            },
            None,
        ),
    };
    sys.remainder.check_decay(decay_tolerance())?;
    let tv = mu.total_variation();
    let mut traj = Trajectory::new(Clock::Time);
    let mut scales = Vec::new();
    let background = sys.background.clone();
    let mut record = |t: T, w: &ScalarField<T>| -> Result<()> {
        w.check_decay(decay_tolerance())?;
        let state = VortexSystem {
            background: background.clone(),
            remainder: w.clone(),
            t,
        };
        let l1 = state.l1_norm()?;
        if l1 > tv * (T::one() + T::lit(1e-6)) {
            return Err(Error::Invariant(format!(
                "‖ω({t})‖₁ = {l1:e} exceeds ‖μ‖ = {tv:e}"
            )));
        }
        scales.push(t.sqrt() * state.velocity().max_norm());
        traj.push(t, w.clone())
    };
    record(config.t0, &sys.remainder)?;
    let h = grid.spacing();
    let cfg = config.stepper;
    let bg = &sys.background;
    march(
        &sys.remainder,
        config.t0,
        &config.snapshot_times(),
        |w, t| {
            let speed = bg.max_speed(t) + velocity_free_space_unchecked(w).max_norm();
            cfg.step_size(h, speed, step_cap(&cfg, t))
        },
        // the step-size callback already enforced the stability bound
        |w, t, dt| advance_remainder(bg, w, t, dt, &cfg),
        &mut record,
    )?;
    Ok(SolverRun {
        config: config.clone(),
        initial: mu.clone(),
        decomposition: dec,
        background: sys.background,
        remainder: traj,
        velocity_scale: scales,
    })
}

/// The nonlinear equation in self-similar variables about the origin,
/// `∂_τw = ℒw − u^w·∇w`, from `τ = 0` to `tau_end`.
///
/// For `ω(x, t) = w(x/√t, ln t)/t` this is the vorticity equation from
/// `t = 1`; `‖w(τ) − αG‖_{L^p}` equals `t^{1−1/p}‖ω(t) − (α/t)G(·/√t)‖_{L^p}`.
pub fn evolve_self_similar_nonlinear<T: Real>(
    w0: &ScalarField<T>,
    tau_end: T,
    cfg: &StepperConfig<T>,
) -> Result<Trajectory<T>> {
    if !(tau_end > T::zero()) || !tau_end.is_finite() {
        return Err(Error::Domain(format!("tau_end must be positive, got {tau_end}")));
    }
    w0.check_decay(decay_tolerance())?;
    let grid = w0.grid().clone();
    let half = T::lit(0.5);
    let drift = VectorField::from_fn(&grid, |p| [p[0] * half, p[1] * half]);
    let mut traj = Trajectory::new(Clock::Tau);
    traj.push(T::zero(), w0.clone())?;
    let h = grid.spacing();
    let cap = drift_step_bound(&grid);
    march(
        w0,
        T::zero(),
        &uniform_outputs(T::zero(), tau_end, cfg.sample_interval),
        |w, _| {
            let speed = velocity_free_space_unchecked(w).max_norm();
            cfg.step_size(h, speed, Some(cap))
        },
        |w, tau, dt| {
            if_rk4_step(w, tau, dt, cfg.dealias, |v, _| {
                let u = velocity_free_space_unchecked(v).sub(&drift);
                Ok(-&flux_divergence(&u, v))
            })
        },
        |tau, w| {
            w.check_decay(decay_tolerance())?;
            traj.push(tau, w.clone())
        },
    )?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::oseen::gaussian_profile;

    fn grid(n: usize, l: f64) -> Grid<f64> {
        Grid::new(n, l).unwrap()
    }

    fn run_config(g: &Grid<f64>, t0: f64, t_end: f64, mode: Mode) -> RunConfig<f64> {
        RunConfig {
            grid: g.clone(),
            stepper: StepperConfig::cfl(0.5).unwrap().sampled_every(0.5).unwrap(),
            t0,
            t_end,
            mode,
        }
    }

    fn pair(a: [f64; 2], ma: f64, b: [f64; 2], mb: f64) -> FiniteMeasure<f64> {
        FiniteMeasure::new(vec![Atom::new(a, ma), Atom::new(b, mb)], None).unwrap()
    }

    #[test]
    fn initialization_examples() {
        let g = grid(128, 16.0);
        let (sys, dec) =
            initialize_from_measure(&FiniteMeasure::dirac(1.0, [0.0, 0.0]), 0.1, 1e-2, &g).unwrap();
        assert_eq!(sys.background.vortices, vec![OseenVortex::new(1.0, [0.0, 0.0])]);
        assert_eq!(sys.remainder.max_abs(), 0.0);
        assert!(dec.d.is_infinite());

        let (sys, dec) =
            initialize_from_measure(&pair([0.0, 0.0], 1.0, [4.0, 0.0], 1.0), 0.1, 1e-2, &g).unwrap();
        assert_eq!(sys.background.vortices.len(), 2);
        assert_eq!(sys.remainder.max_abs(), 0.0);
        assert_eq!(dec.d, 4.0);
        assert_eq!(sys.circulation(), 2.0);

        let dens = ScalarField::from_fn(&g, |p| gaussian_profile([p[0] - 1.0, p[1]]));
        let mu = FiniteMeasure::from_density(dens.clone()).unwrap();
        let (sys, _) = initialize_from_measure(&mu, 0.3, 0.05, &g).unwrap();
        assert!(sys.background.is_empty());
        assert!((&sys.remainder - &dens.heat_flow(0.05)).max_abs() < 1e-15);

        assert!(matches!(
            initialize_from_measure(&mu, 0.3, 0.0, &g),
            Err(Error::Domain(_))
        ));
        let edge = FiniteMeasure::dirac(1.0, [7.9, 0.0]);
        assert!(matches!(
            initialize_from_measure(&edge, 0.1, 1e-2, &g),
            Err(Error::Margin(_))
        ));
    }

    #[test]
    fn single_background_leaves_remainder_at_zero() {
        let g = grid(128, 16.0);
        let cfg = StepperConfig::cfl(0.5).unwrap();
        let (mut sys, _) =
            initialize_from_measure(&FiniteMeasure::dirac(10.0, [0.5, 0.0]), 0.1, 1e-2, &g).unwrap();
        for _ in 0..5 {
            sys = step_decomposed(&sys, 1e-4, &cfg).unwrap();
        }
        assert_eq!(sys.remainder.max_abs(), 0.0);
        assert!((sys.t - 1.05e-2).abs() < 1e-15);
    }

    #[test]
    fn cross_advection_sources_remainder_linearly_in_dt() {
        let g = grid(256, 16.0);
        let cfg = StepperConfig::cfl(0.5).unwrap().dealiased(false);
        let (sys, _) =
            initialize_from_measure(&pair([-2.0, 0.0], 1.0, [2.0, 0.0], 1.0), 0.1, 0.05, &g).unwrap();
        let growth = |dt: f64| {
            step_decomposed(&sys, dt, &cfg)
                .unwrap()
                .remainder
                .lp_norm(1.0)
                .unwrap()
        };
        let a = growth(2e-3);
        let b = growth(1e-3);
        assert!(b > 0.0);
        assert!((a / b - 2.0).abs() < 0.05, "{a} {b}");
    }

    #[test]
    fn direct_step_follows_oseen_and_keeps_circulation() {
        let g = grid(128, 40.0);
        let cfg = StepperConfig::fixed(0.02).unwrap();
        let v = OseenVortex::new(1.0, [0.0, 0.0]);
        let mut w = ScalarField::from_fn(&g, |x| v.vorticity(x, 1.0));
        let c0 = w.integral();
        for _ in 0..25 {
            w = step_direct(&w, 0.02, &cfg).unwrap();
        }
        let exact = ScalarField::from_fn(&g, |x| v.vorticity(x, 1.5));
        let err = (&w - &exact).lp_norm(1.0).unwrap() / exact.lp_norm(1.0).unwrap();
        assert!(err < 1e-7, "{err}");
        assert!((w.integral() - c0).abs() < 1e-13);
        assert_eq!(step_direct(&g.zeros(), 0.1, &cfg).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn single_atom_run_is_exact_oseen() {
        let g = grid(128, 24.0);
        let run = solve_cauchy(
            &FiniteMeasure::dirac(1.0, [0.0, 0.0]),
            0.1,
            &run_config(&g, 1e-2, 1.0, Mode::Decomposed),
        )
        .unwrap();
        assert_eq!(*run.times().last().unwrap(), 1.0);
        let v = OseenVortex::new(1.0, [0.0, 0.0]);
        for (k, row) in run.remainder.series().iter().enumerate() {
            assert!(row.l1 < 1e-8);
            let t = run.times()[k];
            let exact = ScalarField::from_fn(&g, |x| v.vorticity(x, t));
            assert_eq!((&run.vorticity(k) - &exact).max_abs(), 0.0);
        }
    }

    #[test]
    fn zero_measure_stays_zero() {
        let g = grid(64, 16.0);
        let cfg = RunConfig {
            stepper: StepperConfig::fixed(0.05).unwrap().sampled_every(0.5).unwrap(),
            ..run_config(&g, 0.1, 1.0, Mode::Decomposed)
        };
        let run = solve_cauchy(&FiniteMeasure::<f64>::zero(), 0.1, &cfg).unwrap();
        assert!(run.remainder.states().iter().all(|w| w.max_abs() == 0.0));
    }

    #[test]
    fn two_vortex_run_invariants() {
        let g = grid(192, 24.0);
        let cfg = RunConfig {
            stepper: StepperConfig::cfl(0.5)
                .unwrap()
                .sampled_every(0.5)
                .unwrap()
                .dealiased(false),
            ..run_config(&g, 0.05, 0.3, Mode::Decomposed)
        };
        let run = solve_cauchy(&pair([0.0, 0.0], 1.0, [4.0, 0.0], 1.0), 0.1, &cfg).unwrap();
        for k in 0..run.times().len() {
            let w = run.vorticity(k);
            assert!((w.integral() - 2.0).abs() < 1e-10);
            assert!(run.system(k).l1_norm().unwrap() <= 2.0 * (1.0 + 1e-6));
            assert!(w.values().iter().all(|v| *v >= -1e-8 * w.max_abs()));
        }
        assert!(run.remainder.series().last().unwrap().l1 > 1e-6);
    }

    #[test]
    fn direct_and_decomposed_modes_agree() {
        let g = grid(128, 24.0);
        let mu = pair([-1.0, 0.0], 1.0, [1.5, 0.5], -0.5);
        let mk = |mode| RunConfig {
            stepper: StepperConfig::cfl(0.25).unwrap().sampled_every(0.35).unwrap(),
            ..run_config(&g, 0.5, 1.0, mode)
        };
        let a = solve_cauchy(&mu, 0.1, &mk(Mode::Direct)).unwrap();
        let b = solve_cauchy(&mu, 0.1, &mk(Mode::Decomposed)).unwrap();
        assert_eq!(a.times(), b.times());
        let k = a.times().len() - 1;
        let (wa, wb) = (a.vorticity(k), b.vorticity(k));
        let err = (&wa - &wb).lp_norm(1.0).unwrap() / wa.lp_norm(1.0).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn snapshot_times_are_geometric() {
        let g = grid(64, 16.0);
        let mut cfg = run_config(&g, 0.01, 1.0, Mode::Direct);
        cfg.stepper = cfg.stepper.sampled_every(100f64.ln() / 4.0).unwrap();
        let ts = cfg.snapshot_times();
        assert_eq!(ts.len(), 4);
        assert!((ts[0] - 0.01 * 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(ts[3], 1.0);
        assert!(run_config(&g, 1.0, 0.5, Mode::Direct).validate().is_err());
    }

    #[test]
    fn run_manifest_written() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid(64, 16.0);
        let run = solve_cauchy(
            &FiniteMeasure::dirac(1.0, [0.0, 0.0]),
            0.1,
            &run_config(&g, 0.1, 0.3, Mode::Decomposed),
        )
        .unwrap();
        run.write(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("run.json")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["mode"], "decomposed");
        assert_eq!(v["snapshots"].as_array().unwrap().len(), run.times().len());
        assert_eq!(v["measure_sha256"].as_str().unwrap().len(), 64);
        assert!(dir.path().join("series.csv").exists());
    }

    #[test]
    fn self_similar_gaussian_is_steady() {
        let g = grid(128, 40.0);
        let w0 = ScalarField::from_fn(&g, gaussian_profile).scaled(5.0);
        let cfg = StepperConfig::cfl(0.5).unwrap().sampled_every(0.5).unwrap();
        let traj = evolve_self_similar_nonlinear(&w0, 1.0, &cfg).unwrap();
        let (_, last) = traj.last().unwrap();
        assert!((last - &w0).max_abs() < 1e-6 * w0.max_abs());
    }
}
