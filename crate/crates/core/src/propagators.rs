//! Linear evolutions by time stepping, and decay-rate fits.
//!
//! Every stepper here is integrating-factor RK4 (Lawson): the Laplacian is
//! integrated exactly through `e^{-|k|² dt}` and the remaining terms are
//! explicit. All explicit terms are written in divergence form, or are
//! projected to zero mean, so the `k = 0` mode and with it `∫ω` is carried
//! by the exact factor alone.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Zip};

use crate::biot_savart::{decay_tolerance, velocity_free_space_unchecked};
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::io::write_field;
use crate::oseen::{gaussian_gradient, velocity_profile, velocity_profile_max, OseenBackground, OseenVortex};
use crate::scalar::Real;
use crate::spectral::C;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepControl<T: Real> {
    /// Fixed step (shortened where needed to land on output times).
    Fixed(T),
    /// Step chosen as `cfl · h / max|U|`, capped by the other bounds.
    Cfl(T),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scheme {
    #[default]
    IntegratingFactorRk4,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperConfig<T: Real> {
    pub control: StepControl<T>,
    pub scheme: Scheme,
    /// Apply the 2/3 rule to the explicit terms.
    pub dealias: bool,
    /// Spacing of stored snapshots, in the clock of the evolution.
    pub sample_interval: T,
}

impl<T: Real> StepperConfig<T> {
    pub fn fixed(dt: T) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Domain(format!("dt must be positive, got {dt}")));
        }
        Ok(Self::with_control(StepControl::Fixed(dt)))
    }

    pub fn cfl(c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::Domain(format!("cfl number must be positive, got {c}")));
        }
        Ok(Self::with_control(StepControl::Cfl(c)))
    }

    fn with_control(control: StepControl<T>) -> Self {
        StepperConfig {
            control,
            scheme: Scheme::IntegratingFactorRk4,
            dealias: true,
            sample_interval: T::lit(0.1),
        }
    }

    pub fn sampled_every(mut self, interval: T) -> Result<Self> {
        if !(interval > T::zero()) || !interval.is_finite() {
            return Err(Error::Domain(format!(
                "sample interval must be positive, got {interval}"
            )));
        }
        self.sample_interval = interval;
        Ok(self)
    }

    pub fn dealiased(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    /// Step size given a speed bound `max|U|` and an extra cap (`None` for
    /// no cap). A fixed step larger than `h/(2 max|U|)` or the cap is a
    /// [`Error::Stability`].
    pub(crate) fn step_size(&self, h: T, speed: T, cap: Option<T>) -> Result<T> {
        let cfl_bound = if speed > T::zero() {
            T::lit(0.5) * h / speed
        } else {
            T::infinity()
        };
        let cap = cap.unwrap_or_else(T::infinity);
        match self.control {
            StepControl::Fixed(dt) => {
                let bound = cfl_bound.min(cap);
                if dt > bound * (T::one() + T::lit(1e-12)) {
                    return Err(Error::Stability {
                        dt: dt.as_f64(),
                        bound: bound.as_f64(),
                    });
                }
                Ok(dt)
            }
            StepControl::Cfl(c) => {
                let dt = if speed > T::zero() { c * h / speed } else { T::infinity() };
                let dt = dt.min(cap);
                if !dt.is_finite() {
                    return Err(Error::Domain(
                        "cfl step control needs a nonzero speed or a cap".into(),
                    ));
                }
                Ok(dt)
            }
        }
    }
}

/// Spectral projection applied to explicit terms: optional 2/3 rule and a
/// zeroed mean mode.
struct Projector {
    keep: Array2<bool>,
}

impl Projector {
    fn new<T: Real>(grid: &Grid<T>, dealias: bool) -> Self {
        let n = grid.n();
        let keep = Array2::from_shape_fn((n, n), |(a, b)| {
            (a, b) != (0, 0) && (!dealias || (grid.keeps_mode(a) && grid.keeps_mode(b)))
        });
        Projector { keep }
    }

    fn apply<T: Real>(&self, f: &ScalarField<T>) -> Array2<C<T>> {
        let mut s = f.spectrum().clone();
        Zip::from(&mut s).and(&self.keep).for_each(|v, k| {
            if !*k {
                *v = C::new(T::zero(), T::zero());
            }
        });
        s
    }
}

/// One Lawson RK4 step of `∂ₜw = Δw + N(w, t)`.
pub(crate) fn if_rk4_step<T, F>(
    w: &ScalarField<T>,
    t: T,
    dt: T,
    dealias: bool,
    mut rhs: F,
) -> Result<ScalarField<T>>
where
    T: Real,
    F: FnMut(&ScalarField<T>, T) -> Result<ScalarField<T>>,
{
    let grid = w.grid().clone();
    let n = grid.n();
    let k = grid.wavenumbers();
    let half = dt * T::lit(0.5);
    let e = Array2::from_shape_fn((n, n), |(a, b)| (-(k[a] * k[a] + k[b] * k[b]) * half).exp());
    let proj = Projector::new(&grid, dealias);
    let u = w.spectrum().clone();
    let field = |s: Array2<C<T>>| ScalarField::from_spectrum(&grid, s);

    let k1 = proj.apply(&rhs(w, t)?);
    let mut stage = u.clone();
    Zip::from(&mut stage).and(&k1).and(&e).for_each(|s, k1, e| *s = (*s + *k1 * half) * *e);
    let k2 = proj.apply(&rhs(&field(stage), t + half)?);

    let mut stage = u.clone();
    Zip::from(&mut stage).and(&k2).and(&e).for_each(|s, k2, e| *s = *s * *e + *k2 * half);
    let k3 = proj.apply(&rhs(&field(stage), t + half)?);

    let mut stage = u.clone();
    Zip::from(&mut stage).and(&k3).and(&e).for_each(|s, k3, e| *s = (*s * *e + *k3 * dt) * *e);
    let k4 = proj.apply(&rhs(&field(stage), t + dt)?);

    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    let mut out = u;
    Zip::from(&mut out)
        .and(&k1)
        .and(&k2)
        .and(&k3)
        .and(&e)
        .for_each(|s, k1, k2, k3, e| {
            let e2 = *e * *e;
            *s = *s * e2 + (*k1 * e2 + (*k2 + *k3) * (*e * two)) * sixth;
        });
    Zip::from(&mut out).and(&k4).for_each(|s, k4| *s = *s + *k4 * sixth);
    Ok(field(out))
}

/// `∇·(U f)` evaluated pseudo-spectrally.
pub(crate) fn flux_divergence<T: Real>(u: &VectorField<T>, f: &ScalarField<T>) -> ScalarField<T> {
    let fx = ScalarField::new(f.grid(), u.x.values() * f.values()).expect("shape matches");
    let fy = ScalarField::new(f.grid(), u.y.values() * f.values()).expect("shape matches");
    VectorField { x: fx, y: fy }.divergence()
}

/// A velocity field prescribed as a function of time.
pub trait VelocityProvider<T: Real> {
    fn velocity(&self, grid: &Grid<T>, t: T) -> VectorField<T>;

    /// Upper bound on `max|U|` over `[t, t + dt]` for steps starting at
    /// `t`. The default samples the field at `t`.
    fn speed_bound(&self, grid: &Grid<T>, t: T) -> T {
        self.velocity(grid, t).max_norm()
    }
}

impl<T: Real> VelocityProvider<T> for OseenBackground<T> {
    fn velocity(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        OseenBackground::velocity(self, grid, t)
    }

    /// The analytic bound `Σ|αᵢ| max|v^G| / √t`, which decreases in `t`.
    fn speed_bound(&self, _grid: &Grid<T>, t: T) -> T {
        self.max_speed(t)
    }
}

impl<T: Real, F> VelocityProvider<T> for F
where
    F: Fn(&Grid<T>, T) -> VectorField<T>,
{
    fn velocity(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        self(grid, t)
    }
}

fn advect_diffuse_step_impl<T: Real, V: VelocityProvider<T> + ?Sized>(
    omega: &ScalarField<T>,
    velocity: &V,
    t: T,
    dt: T,
    dealias: bool,
) -> Result<ScalarField<T>> {
    let grid = omega.grid().clone();
    let speed = velocity.speed_bound(&grid, t);
    if speed > T::zero() {
        let bound = grid.spacing() / (T::lit(2.0) * speed);
        if dt > bound * (T::one() + T::lit(1e-12)) {
            return Err(Error::Stability {
                dt: dt.as_f64(),
                bound: bound.as_f64(),
            });
        }
    }
    if_rk4_step(omega, t, dt, dealias, |w, s| {
        Ok(-&flux_divergence(&velocity.velocity(&grid, s), w))
    })
}

/// One step of `∂ₜω + U·∇ω = Δω` from `t` to `t + dt`, with `U` assumed
/// divergence-free and the advection taken as `∇·(Uω)`, dealiased.
pub fn advect_diffuse_step<T: Real, V: VelocityProvider<T> + ?Sized>(
    omega: &ScalarField<T>,
    velocity: &V,
    t: T,
    dt: T,
) -> Result<ScalarField<T>> {
    advect_diffuse_step_impl(omega, velocity, t, dt, true)
}

/// Advances `w` from `t0` through each of `outputs` (increasing, all past
/// `t0`), asking `max_dt(w, t)` before every step and calling `record` at
/// each output. Steps are shortened evenly so outputs are hit exactly.
pub(crate) fn march<T, S, D, R>(
    w0: &ScalarField<T>,
    t0: T,
    outputs: &[T],
    mut max_dt: D,
    mut step: S,
    mut record: R,
) -> Result<ScalarField<T>>
where
    T: Real,
    D: FnMut(&ScalarField<T>, T) -> Result<T>,
    S: FnMut(&ScalarField<T>, T, T) -> Result<ScalarField<T>>,
    R: FnMut(T, &ScalarField<T>) -> Result<()>,
{
    let mut w = w0.clone();
    let mut t = t0;
    for &target in outputs {
        if target < t {
            return Err(Error::Domain(format!(
                "output times must increase: {target} after {t}"
            )));
        }
        while t < target {
            let remaining = target - t;
            let cap = max_dt(&w, t)?;
            let steps = (remaining / cap * (T::one() - T::lit(1e-12)))
                .ceil()
                .max(T::one());
            let dt = remaining / steps;
            w = step(&w, t, dt)?;
            t = if steps == T::one() { target } else { t + dt };
        }
        record(t, &w)?;
    }
    Ok(w)
}

/// Evenly spaced output times `start + k·interval` up to and including `end`.
pub(crate) fn uniform_outputs<T: Real>(start: T, end: T, interval: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let t = start + interval * T::from_usize_lossy(k);
        if t >= end - interval * T::lit(1e-9) {
            out.push(end);
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

/// `S_N(t, s) f`: advection-diffusion from `s` to `t` under the frozen
/// Oseen background of `vortices`.
///
/// With [`StepControl::Cfl`] the step is also capped at `t/50`, which
/// resolves the `1/√t` growth of the background velocity at early times.
pub fn propagate_sn<T: Real>(
    vortices: &[OseenVortex<T>],
    f: &ScalarField<T>,
    s: T,
    t: T,
    cfg: &StepperConfig<T>,
) -> Result<ScalarField<T>> {
    if !(s > T::zero()) || !(t > s) || !t.is_finite() {
        return Err(Error::Domain(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    f.check_decay(decay_tolerance())?;
    let background = OseenBackground::new(vortices.to_vec());
    let grid = f.grid().clone();
    let h = grid.spacing();
    let cap = matches!(cfg.control, StepControl::Cfl(_));
    let out = march(
        f,
        s,
        &[t],
        |_, now| {
            let c = cap.then(|| now / T::lit(50.0));
            cfg.step_size(h, background.max_speed(now), c)
        },
        |w, now, dt| advect_diffuse_step_impl(w, &background, now, dt, cfg.dealias),
        |_, _| Ok(()),
    )?;
    out.check_decay(decay_tolerance())?;
    Ok(out)
}

/// Which clock a trajectory is sampled in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    /// Self-similar time `τ`.
    Tau,
    /// Physical time `t`.
    Time,
}

impl Clock {
    fn tag(self) -> &'static str {
        match self {
            Clock::Tau => "tau",
            Clock::Time => "t",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRow<T: Real> {
    pub index: usize,
    pub time: T,
    pub l1: T,
    pub l2: T,
    pub linf: T,
    /// `L²(m)` norm with `m = 1.5`.
    pub l2m15: T,
    /// `L²(m)` norm with `m = 3`.
    pub l2m30: T,
    pub circulation: T,
}

impl<T: Real> SeriesRow<T> {
    fn of(index: usize, time: T, f: &ScalarField<T>) -> Result<Self> {
        Ok(SeriesRow {
            index,
            time,
            l1: f.lp_norm(T::one())?,
            l2: f.lp_norm(T::lit(2.0))?,
            linf: f.max_abs(),
            l2m15: f.weighted_norm(T::lit(2.0), T::lit(1.5))?,
            l2m30: f.weighted_norm(T::lit(2.0), T::lit(3.0))?,
            circulation: f.integral(),
        })
    }
}

/// Time-stamped snapshots with their norm series.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    clock: Clock,
    times: Vec<T>,
    states: Vec<ScalarField<T>>,
    series: Vec<SeriesRow<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(clock: Clock) -> Self {
        Trajectory {
            clock,
            times: Vec::new(),
            states: Vec::new(),
            series: Vec::new(),
        }
    }

    /// Appends a snapshot; times must increase.
    pub fn push(&mut self, time: T, state: ScalarField<T>) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(time > last) {
                return Err(Error::Domain(format!(
                    "snapshot time {time} does not follow {last}"
                )));
            }
        }
        self.series.push(SeriesRow::of(self.times.len(), time, &state)?);
        self.times.push(time);
        self.states.push(state);
        Ok(())
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[ScalarField<T>] {
        &self.states
    }

    pub fn series(&self) -> &[SeriesRow<T>] {
        &self.series
    }

    pub fn last(&self) -> Option<(T, &ScalarField<T>)> {
        self.times.last().map(|t| (*t, self.states.last().expect("same length")))
    }

    /// The snapshot closest to `time`.
    pub fn nearest(&self, time: T) -> Option<(T, &ScalarField<T>)> {
        let k = (0..self.len()).min_by(|&a, &b| {
            (self.times[a] - time)
                .abs()
                .partial_cmp(&(self.times[b] - time).abs())
                .expect("finite times")
        })?;
        Some((self.times[k], &self.states[k]))
    }

    /// Writes `w_<clock>_<index>.fld` per snapshot and `series.csv`.
    pub fn dump(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (k, state) in self.states.iter().enumerate() {
            write_field(&dir.join(format!("w_{}_{k}.fld", self.clock.tag())), state)?;
        }
        let mut csv = String::from("index,time,l1,l2,linf,l2m15,l2m30,circulation\n");
        for r in &self.series {
            writeln!(
                csv,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.index,
                r.time.as_f64(),
                r.l1.as_f64(),
                r.l2.as_f64(),
                r.linf.as_f64(),
                r.l2m15.as_f64(),
                r.l2m30.as_f64(),
                r.circulation.as_f64()
            )
            .expect("writing to a string");
        }
        fs::write(dir.join("series.csv"), csv)?;
        Ok(())
    }
}

/// Drift bound for the explicit `½∇·(ξw)` term: `dt ≤ 4h/L`.
pub fn drift_step_bound<T: Real>(grid: &Grid<T>) -> T {
    T::lit(4.0) * grid.spacing() / grid.box_size()
}

/// Steps `∂_τw = ℒw + extra(w)` from `τ = 0` and records a trajectory.
fn evolve_self_similar<T, F>(
    w0: &ScalarField<T>,
    tau_end: T,
    cfg: &StepperConfig<T>,
    speed: T,
    mut extra: F,
) -> Result<Trajectory<T>>
where
    T: Real,
    F: FnMut(&ScalarField<T>) -> ScalarField<T>,
{
    if !(tau_end > T::zero()) || !tau_end.is_finite() {
        return Err(Error::Domain(format!("tau_end must be positive, got {tau_end}")));
    }
    w0.check_decay(decay_tolerance())?;
    let grid = w0.grid().clone();
    let xs = grid.coords();
    let half = T::lit(0.5);
    let drift_x = Array2::from_shape_fn((grid.n(), grid.n()), |(i, _)| xs[i] * half);
    let drift_y = Array2::from_shape_fn((grid.n(), grid.n()), |(_, j)| xs[j] * half);
    let drift = VectorField {
        x: ScalarField::new(&grid, drift_x).expect("shape matches"),
        y: ScalarField::new(&grid, drift_y).expect("shape matches"),
    };
    let mut traj = Trajectory::new(Clock::Tau);
    traj.push(T::zero(), w0.clone())?;
    let outputs = uniform_outputs(T::zero(), tau_end, cfg.sample_interval);
    let h = grid.spacing();
    let cap = drift_step_bound(&grid);
    march(
        w0,
        T::zero(),
        &outputs,
        |_, _| cfg.step_size(h, speed, Some(cap)),
        |w, tau, dt| {
            if_rk4_step(w, tau, dt, cfg.dealias, |v, _| {
                Ok(&flux_divergence(&drift, v) + &extra(v))
            })
        },
        |tau, w| traj.push(tau, w.clone()),
    )?;
    Ok(traj)
}

/// `v^G` sampled on `grid`.
fn profile_velocity<T: Real>(grid: &Grid<T>) -> VectorField<T> {
    VectorField::from_fn(grid, velocity_profile)
}

/// `𝒮₁`: `∂_τw + α v^G·∇w = ℒw` from `w0` at `τ = 0` to `tau_end`.
pub fn evolve_s1<T: Real>(
    alpha: T,
    w0: &ScalarField<T>,
    tau_end: T,
    cfg: &StepperConfig<T>,
) -> Result<Trajectory<T>> {
    let grid = w0.grid().clone();
    let vg = profile_velocity(&grid).scaled(alpha);
    let speed = alpha.abs() * velocity_profile_max::<T>();
    evolve_self_similar(w0, tau_end, cfg, speed, |w| -&flux_divergence(&vg, w))
}

/// `T_α`: the linearization at `αG`,
/// `∂_τw + α(v^G·∇w + v·∇G) = ℒw` with `v` the velocity of `w`.
///
/// `v` is the whole-plane Biot-Savart velocity for every input, so the
/// coupling carries no periodic-image error whatever `∫w` is.
pub fn evolve_t_alpha<T: Real>(
    alpha: T,
    w0: &ScalarField<T>,
    tau_end: T,
    cfg: &StepperConfig<T>,
) -> Result<Trajectory<T>> {
    let grid = w0.grid().clone();
    let vg = profile_velocity(&grid).scaled(alpha);
    let grad_g = VectorField::from_fn(&grid, gaussian_gradient);
    let speed = alpha.abs() * velocity_profile_max::<T>();
    evolve_self_similar(w0, tau_end, cfg, speed, |w| {
        let advect = flux_divergence(&vg, w);
        if alpha == T::zero() {
            return -&advect;
        }
        let v = velocity_free_space_unchecked(w);
        let coupling = Zip::from(v.x.values())
            .and(v.y.values())
            .and(grad_g.x.values())
            .and(grad_g.y.values())
            .map_collect(|vx, vy, gx, gy| alpha * (*vx * *gx + *vy * *gy));
        let coupling = ScalarField::new(&grid, coupling).expect("shape matches");
        -&(&advect + &coupling)
    })
}

/// Which norm a decay fit tracks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpec<T: Real> {
    Lp(T),
    /// `L^q(m)`.
    Weighted { q: T, m: T },
}

impl<T: Real> NormSpec<T> {
    pub fn eval(&self, f: &ScalarField<T>) -> Result<T> {
        match *self {
            NormSpec::Lp(p) => f.lp_norm(p),
            NormSpec::Weighted { q, m } => f.weighted_norm(q, m),
        }
    }
}

/// Least-squares fit of `ln ‖w(τ)‖` against `τ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit<T: Real> {
    pub taus: Vec<T>,
    pub norms: Vec<T>,
    pub rate: T,
    /// RMS deviation of `ln‖w‖` from the fitted line.
    pub residual: T,
}

/// Norms below this are treated as numerical noise.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Fits the log-linear decay of `(taus, norms)`.
pub fn fit_log_linear<T: Real>(taus: Vec<T>, norms: Vec<T>) -> Result<DecayFit<T>> {
    if taus.len() != norms.len() {
        return Err(Error::Mismatch("sample counts differ".into()));
    }
    if taus.len() < 5 {
        return Err(Error::Domain(format!(
            "a decay fit needs at least 5 samples, got {}",
            taus.len()
        )));
    }
    if let Some(v) = norms.iter().find(|v| !(**v > T::lit(NOISE_FLOOR))) {
        return Err(Error::Degenerate(format!(
            "norm {v:e} is at the noise floor {NOISE_FLOOR:e}"
        )));
    }
    let count = T::from_usize_lossy(taus.len());
    let ys: Vec<T> = norms.iter().map(|v| v.ln()).collect();
    let mx = taus.iter().copied().sum::<T>() / count;
    let my = ys.iter().copied().sum::<T>() / count;
    let sxx: T = taus.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let sxy: T = taus.iter().zip(&ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    if !(sxx > T::zero()) {
        return Err(Error::Degenerate("all samples share one time".into()));
    }
    let rate = sxy / sxx;
    let residual = (taus
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = *y - my - rate * (*x - mx);
            r * r
        })
        .sum::<T>()
        / count)
        .sqrt();
    Ok(DecayFit {
        taus,
        norms,
        rate,
        residual,
    })
}

/// Decay rate of `norm` along `traj` over snapshots with time in `window`.
pub fn fit_decay<T: Real>(
    traj: &Trajectory<T>,
    norm: NormSpec<T>,
    window: (T, T),
) -> Result<DecayFit<T>> {
    let slack = T::lit(1e-9) * (T::one() + window.1.abs());
    let mut taus = Vec::new();
    let mut norms = Vec::new();
    for (t, w) in traj.times().iter().zip(traj.states()) {
        if *t >= window.0 - slack && *t <= window.1 + slack {
            taus.push(*t);
            norms.push(norm.eval(w)?);
        }
    }
    fit_log_linear(taus, norms)
}
