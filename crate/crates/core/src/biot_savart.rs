//! Velocity from vorticity, `u = K ⊛ ω` with `K(x) = x^⊥ / (2π|x|²)`.
//!
//! Two reconstructions are provided. [`velocity_periodic`] inverts the curl
//! on the torus and is only meaningful for zero circulation.
//! [`velocity_free_space`] convolves with the whole-plane kernel.
//!
//! The free-space path works with the stream function
//! `ψ = (-ln|x| / 2π) ⊛ ω` on a `2n × 2n` zero-padded torus, where the
//! discrete convolution is aperiodic for sources and targets inside the box.
//! The logarithm is integrable but singular, so the plain lattice sum is
//! only `O(h²)`; the origin weight and a `Δ` correction below come from the
//! Euler-Maclaurin expansion of the lattice sum and lift it to `O(h⁶)`.
//! Velocity is then `(∂₂ψ, -∂₁ψ)`, differentiated spectrally on the padded
//! torus, where it is divergence-free to round-off.

use ndarray::{s, Array2, Zip};

use crate::error::{Error, Result};
use crate::field::{lp_norm_of, Grid, ScalarField, VectorField};
use crate::scalar::Real;
use crate::spectral::C;

/// `lim (∫ K φ - Σ'_{j≠0} K(j) φ(j)) / φ(0)` on the unit lattice for the
/// log kernel `K = -ln|x| / 2π`.
pub(crate) const LATTICE_ORIGIN_WEIGHT: f64 = 0.208_577_793_300_113_03;
/// Coefficient of the `Δφ(0)` term in the same expansion.
pub(crate) const LATTICE_LAPLACIAN_WEIGHT: f64 = 0.003_866_948;

/// Relative size `|ω|` may reach at the box edge before the box stops
/// standing in for the plane.
pub(crate) fn decay_tolerance<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(100.0))
}

fn total_circulation_check<T: Real>(omega: &ScalarField<T>) -> Result<()> {
    let l1 = omega.lp_norm(T::one())?;
    let gamma = omega.integral();
    let tol = T::lit(1e-8).max(T::epsilon() * T::lit(100.0));
    if gamma.abs() > tol * l1 {
        return Err(Error::Circulation {
            circulation: gamma.as_f64(),
            tolerance: (tol * l1).as_f64(),
        });
    }
    Ok(())
}

/// Spectral inversion of the curl on the periodic box. Requires
/// `|∫ω| < 1e-8 ‖ω‖₁`; the mean mode is discarded.
pub fn velocity_periodic<T: Real>(omega: &ScalarField<T>) -> Result<VectorField<T>> {
    total_circulation_check(omega)?;
    let grid = omega.grid();
    let k = grid.wavenumbers();
    let kd = grid.derivative_wavenumbers();
    let spec = omega.spectrum();
    let i = C::new(T::zero(), T::one());
    let mut ux = Array2::zeros(spec.dim());
    let mut uy = Array2::zeros(spec.dim());
    Zip::indexed(&mut ux)
        .and(&mut uy)
        .for_each(|(a, b), vx: &mut C<T>, vy: &mut C<T>| {
            let k2 = k[a] * k[a] + k[b] * k[b];
            if k2 == T::zero() {
                return;
            }
            let psi = spec[[a, b]] / k2;
            *vx = psi * i * kd[b];
            *vy = -(psi * i * kd[a]);
        });
    Ok(VectorField {
        x: ScalarField::from_spectrum(grid, ux),
        y: ScalarField::from_spectrum(grid, uy),
    })
}

/// Spectral multiplier of the corrected log kernel on the padded grid,
/// including the `h²` quadrature weight.
fn kernel_multiplier<T: Real>(grid: &Grid<T>) -> &Array2<T> {
    grid.plans().kernel.get_or_init(|| {
        let n = grid.n();
        let m = 2 * n;
        let h = grid.spacing();
        let four_pi = T::lit(4.0) * T::PI();
        let offset = |j: usize| {
            let j = if j < n { j as i64 } else { j as i64 - m as i64 };
            T::from_i64(j).unwrap() * h
        };
        let mut kernel = Array2::from_shape_fn((m, m), |(a, b)| {
            if a == 0 && b == 0 {
                return C::new(T::zero(), T::zero());
            }
            let (x, y) = (offset(a), offset(b));
            C::new(-(x * x + y * y).ln() / four_pi, T::zero())
        });
        grid.plans().padded().forward(&mut kernel);

        let h2 = h * h;
        let origin = (T::lit(LATTICE_ORIGIN_WEIGHT) - h.ln() / T::TAU()) * h2;
        let lap = T::lit(LATTICE_LAPLACIAN_WEIGHT) * h2 * h2;
        let kp = padded_wavenumbers(grid);
        Array2::from_shape_fn((m, m), |(a, b)| {
            kernel[[a, b]].re * h2 + origin - lap * (kp[a] * kp[a] + kp[b] * kp[b])
        })
    })
}

fn padded_wavenumbers<T: Real>(grid: &Grid<T>) -> Vec<T> {
    let m = 2 * grid.n();
    let base = T::TAU() / (grid.box_size() * T::lit(2.0));
    (0..m)
        .map(|j| {
            let j = if j <= m / 2 { j as i64 } else { j as i64 - m as i64 };
            T::from_i64(j).unwrap() * base
        })
        .collect()
}

fn padded_derivative_wavenumbers<T: Real>(grid: &Grid<T>) -> Vec<T> {
    let mut k = padded_wavenumbers(grid);
    k[grid.n()] = T::zero();
    k
}

/// Stream function spectrum on the padded grid.
fn padded_stream_spectrum<T: Real>(omega: &ScalarField<T>) -> Array2<C<T>> {
    let grid = omega.grid();
    let n = grid.n();
    let mut w = Array2::zeros((2 * n, 2 * n));
    Zip::from(w.slice_mut(s![..n, ..n]))
        .and(omega.values())
        .for_each(|dst: &mut C<T>, v| *dst = C::new(*v, T::zero()));
    grid.plans().padded().forward_sparse_rows(&mut w, n);
    let mult = kernel_multiplier(grid);
    Zip::from(&mut w).and(mult).for_each(|z, m| *z = *z * *m);
    w
}

fn check_free_space_margin<T: Real>(omega: &ScalarField<T>) -> Result<()> {
    omega.check_decay(decay_tolerance())
}

/// Whole-plane Biot-Savart velocity sampled on `omega`'s grid.
///
/// Fails with [`Error::Margin`] unless `ω` has decayed at the box edge.
pub fn velocity_free_space<T: Real>(omega: &ScalarField<T>) -> Result<VectorField<T>> {
    check_free_space_margin(omega)?;
    Ok(velocity_free_space_unchecked(omega))
}

pub(crate) fn velocity_free_space_unchecked<T: Real>(omega: &ScalarField<T>) -> VectorField<T> {
    let grid = omega.grid();
    let n = grid.n();
    if omega.max_abs() == T::zero() {
        return VectorField::zeros(grid);
    }
    let psi = padded_stream_spectrum(omega);
    let kd = padded_derivative_wavenumbers(grid);
    // u_x + i u_y, both real, packed into one inverse transform
    let mut packed = Array2::from_shape_fn(psi.dim(), |(a, b)| {
        let p = psi[[a, b]];
        let ux = p * C::new(T::zero(), kd[b]);
        let uy = -(p * C::new(T::zero(), kd[a]));
        ux + uy * C::new(T::zero(), T::one())
    });
    grid.plans().padded().inverse_leading_rows(&mut packed, n);
    let block = packed.slice(s![..n, ..n]);
    let ux = block.mapv(|z| z.re);
    let uy = block.mapv(|z| z.im);
    VectorField {
        x: ScalarField::new(grid, ux).expect("shape matches"),
        y: ScalarField::new(grid, uy).expect("shape matches"),
    }
}

/// Curl and divergence of the free-space velocity, differentiated on the
/// padded torus where the reconstruction lives, restricted to the box.
///
/// Differentiating the `n`-grid samples instead measures the Gibbs error of
/// the non-periodic `1/r` tail, not the reconstruction.
pub fn free_space_curl_divergence<T: Real>(
    omega: &ScalarField<T>,
) -> Result<(ScalarField<T>, ScalarField<T>)> {
    check_free_space_margin(omega)?;
    let grid = omega.grid();
    let n = grid.n();
    let psi = padded_stream_spectrum(omega);
    let kd = padded_derivative_wavenumbers(grid);
    let i = C::new(T::zero(), T::one());
    let plan = grid.plans().padded();
    // go through physical space once so the round-off of u counts
    let mut ux = Array2::from_shape_fn(psi.dim(), |(a, b)| psi[[a, b]] * i * kd[b]);
    let mut uy = Array2::from_shape_fn(psi.dim(), |(a, b)| -(psi[[a, b]] * i * kd[a]));
    plan.inverse(&mut ux);
    plan.inverse(&mut uy);
    ux.mapv_inplace(|z| C::new(z.re, T::zero()));
    uy.mapv_inplace(|z| C::new(z.re, T::zero()));
    plan.forward(&mut ux);
    plan.forward(&mut uy);
    let mut packed = Array2::from_shape_fn(ux.dim(), |(a, b)| {
        let curl = (uy[[a, b]] * kd[a] - ux[[a, b]] * kd[b]) * i;
        let div = (ux[[a, b]] * kd[a] + uy[[a, b]] * kd[b]) * i;
        curl + div * i
    });
    plan.inverse_leading_rows(&mut packed, n);
    let block = packed.slice(s![..n, ..n]);
    Ok((
        ScalarField::new(grid, block.mapv(|z| z.re)).expect("shape matches"),
        ScalarField::new(grid, block.mapv(|z| z.im)).expect("shape matches"),
    ))
}

/// Max of `|div u|` over the box for the free-space velocity (see
/// [`free_space_curl_divergence`]).
pub fn free_space_divergence<T: Real>(omega: &ScalarField<T>) -> Result<T> {
    Ok(free_space_curl_divergence(omega)?.1.max_abs())
}

/// `∫` over the exterior of the square `[-a, a]²` of `(|Γ|/2π)^q r^{e-2}`.
/// Requires `e < 0`.
pub(crate) fn exterior_power_integral<T: Real>(gamma: T, q: T, e: T, a: T) -> T {
    // 4 sides, each ∫_{-π/4}^{π/4} ∫_{a/cosθ}^∞ r^{e-1} dr dθ
    let steps = 2000;
    let lo = -T::FRAC_PI_4();
    let dt = T::FRAC_PI_2() / T::from_usize_lossy(steps);
    let mut acc = T::zero();
    for k in 0..=steps {
        let th = lo + dt * T::from_usize_lossy(k);
        let w = if k == 0 || k == steps {
            T::one()
        } else if k % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        acc = acc + w * th.cos().powf(-e);
    }
    let angular = acc * dt / T::lit(3.0);
    T::lit(4.0) * a.powf(e) / (-e) * angular * (gamma.abs() / T::TAU()).powf(q)
}

/// `∫ |f|^q` using the midpoint rule on the cells centered at nodes
/// `1..n-1`, i.e. over the symmetric square of half-width `L/2 - h/2`.
fn interior_power_sum<T: Real>(f: &Array2<T>, q: T, h2: T) -> T {
    let n = f.nrows();
    let inner = f.slice(s![1..n, 1..n]);
    inner.iter().map(|v| v.abs().powf(q)).sum::<T>() * h2
}

/// `‖u‖_{L^q} / ‖ω‖_{L^p}` with `1/q = 1/p - 1/2`, for the whole-plane
/// velocity. The part of `‖u‖_q^q` outside the box is added in closed form
/// from the far field `Γ/(2πr)`.
pub fn hls_ratio<T: Real>(omega: &ScalarField<T>, p: T) -> Result<T> {
    if !(p > T::one() && p < T::lit(2.0)) {
        return Err(Error::Domain(format!("HLS exponent p must lie in (1, 2), got {p}")));
    }
    let denom = omega.lp_norm(p)?;
    if denom == T::zero() {
        return Err(Error::Domain("HLS ratio of the zero field".into()));
    }
    let q = T::lit(2.0) * p / (T::lit(2.0) - p);
    let u = velocity_free_space(omega)?;
    let grid = omega.grid();
    let speed = u.magnitude();
    let inside = interior_power_sum(speed.values(), q, grid.cell_area());
    let a = grid.half_width() - grid.spacing() * T::lit(0.5);
    let tail = exterior_power_integral(omega.integral(), q, T::lit(2.0) - q, a);
    Ok((inside + tail).powf(q.recip()) / denom)
}

/// `‖b^{m-2/q} u‖_{L^q}` with `b = (1 + |x|²)^{1/2}` and `u` the free-space
/// velocity. Needs `q > 2` and either `m ∈ (0, 1)`, or `m ∈ (1, 2)` with zero
/// circulation. For nonzero circulation the far-field tail outside the box
/// is added in closed form; for zero circulation it decays fast enough to
/// be dropped.
pub fn weighted_velocity_norm<T: Real>(omega: &ScalarField<T>, q: T, m: T) -> Result<T> {
    if !(q > T::lit(2.0)) || !q.is_finite() {
        return Err(Error::Domain(format!("q must exceed 2, got {q}")));
    }
    let low = m > T::zero() && m < T::one();
    let high = m > T::one() && m < T::lit(2.0);
    if !low && !high {
        return Err(Error::Domain(format!("weight exponent m = {m} not in (0,1) or (1,2)")));
    }
    if high {
        total_circulation_check(omega).map_err(|_| {
            Error::Domain(format!(
                "m = {m} in (1, 2) needs zero circulation, got {:e}",
                omega.integral().as_f64()
            ))
        })?;
    }
    if omega.max_abs() == T::zero() {
        return Ok(T::zero());
    }
    let u = velocity_free_space(omega)?;
    let grid = omega.grid();
    let exponent = m - T::lit(2.0) / q;
    let xs = grid.coords();
    let weighted = Zip::indexed(u.x.values())
        .and(u.y.values())
        .map_collect(|(i, j), a, b| {
            let r2 = xs[i] * xs[i] + xs[j] * xs[j];
            (*a * *a + *b * *b).sqrt() * (T::one() + r2).powf(exponent * T::lit(0.5))
        });
    let mut total = interior_power_sum(&weighted, q, grid.cell_area());
    if low {
        let a = grid.half_width() - grid.spacing() * T::lit(0.5);
        total = total + exterior_power_integral(omega.integral(), q, m * q - q, a);
    }
    Ok(total.powf(q.recip()))
}

/// Plain `L^q` norm of a free-space velocity on the grid, without tails.
pub fn velocity_lp_norm<T: Real>(u: &VectorField<T>, q: T) -> Result<T> {
    let mag = u.magnitude();
    lp_norm_of(mag.values().iter().copied(), q, u.grid().cell_area())
}
