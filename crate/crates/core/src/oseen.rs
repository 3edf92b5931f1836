//! Closed-form Lamb-Oseen profiles.
//!
//! `G(ξ) = e^{-|ξ|²/4} / (4π)` and its Biot-Savart velocity
//! `v^G(ξ) = ξ^⊥ (1 - e^{-|ξ|²/4}) / (2π|ξ|²)`, with `x^⊥ = (-x₂, x₁)`.

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField, VectorField};
use crate::scalar::{norm2, Point, Real};

const SERIES_CUTOFF: f64 = 1e-4;

pub fn gaussian_profile<T: Real>(xi: Point<T>) -> T {
    (-norm2(xi) * T::lit(0.25)).exp() / (T::lit(4.0) * T::PI())
}

/// `∇G(ξ) = -ξ G(ξ) / 2`.
pub fn gaussian_gradient<T: Real>(xi: Point<T>) -> Point<T> {
    let g = gaussian_profile(xi) * T::lit(-0.5);
    [xi[0] * g, xi[1] * g]
}

/// The scalar factor `φ(|ξ|²)` with `v^G(ξ) = φ ξ^⊥`.
fn velocity_factor<T: Real>(r2: T) -> T {
    let tau = T::TAU();
    if r2 < T::lit(SERIES_CUTOFF * SERIES_CUTOFF) {
        // (1 - e^{-s})/s = 1 - s/2 + s²/6 with s = r²/4
        let s = r2 * T::lit(0.25);
        (T::one() - s * T::lit(0.5) + s * s / T::lit(6.0)) / (T::lit(4.0) * tau)
    } else {
        -(-r2 * T::lit(0.25)).exp_m1() / (tau * r2)
    }
}

pub fn velocity_profile<T: Real>(xi: Point<T>) -> Point<T> {
    let f = velocity_factor(norm2(xi));
    [-xi[1] * f, xi[0] * f]
}

/// Largest value of `|v^G|`, attained at `|ξ| ≈ 2.24181`.
pub fn velocity_profile_max<T: Real>() -> T {
    T::lit(0.050_784_168_788_538_9)
}

/// A point vortex that has diffused for time `t`: `α/t G((x-z)/√t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OseenVortex<T: Real> {
    pub alpha: T,
    pub z: Point<T>,
}

impl<T: Real> OseenVortex<T> {
    pub fn new(alpha: T, z: Point<T>) -> Self {
        OseenVortex { alpha, z }
    }

    fn xi(&self, x: Point<T>, t: T) -> Point<T> {
        let s = t.sqrt().recip();
        [(x[0] - self.z[0]) * s, (x[1] - self.z[1]) * s]
    }

    pub fn vorticity(&self, x: Point<T>, t: T) -> T {
        self.alpha / t * gaussian_profile(self.xi(x, t))
    }

    pub fn velocity(&self, x: Point<T>, t: T) -> Point<T> {
        let v = velocity_profile(self.xi(x, t));
        let c = self.alpha / t.sqrt();
        [v[0] * c, v[1] * c]
    }

    pub fn vorticity_gradient(&self, x: Point<T>, t: T) -> Point<T> {
        let g = gaussian_gradient(self.xi(x, t));
        let c = self.alpha / (t * t.sqrt());
        [g[0] * c, g[1] * c]
    }

    /// `∂ω/∂t`, which equals `Δω` for the exact profile.
    pub fn vorticity_rate(&self, x: Point<T>, t: T) -> T {
        let r2 = norm2(self.xi(x, t));
        self.vorticity(x, t) * (r2 * T::lit(0.25) - T::one()) / t
    }

    /// Bound on `|u|` over the plane.
    pub fn max_speed(&self, t: T) -> T {
        self.alpha.abs() * velocity_profile_max::<T>() / t.sqrt()
    }
}

fn check_time<T: Real>(t: T) -> Result<()> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// Samples the vorticity and velocity of `v` at time `t`.
pub fn oseen_fields<T: Real>(
    v: &OseenVortex<T>,
    t: T,
    grid: &Grid<T>,
) -> Result<(ScalarField<T>, VectorField<T>)> {
    check_time(t)?;
    let omega = ScalarField::from_fn(grid, |x| v.vorticity(x, t));
    let u = VectorField::from_fn(grid, |x| v.velocity(x, t));
    Ok((omega, u))
}

/// Max-norm of `∂ₜω - Δω + u·∇ω` with the time derivative analytic and the
/// spatial derivatives spectral.
pub fn oseen_residual<T: Real>(v: &OseenVortex<T>, t: T, grid: &Grid<T>) -> Result<T> {
    let (omega, u) = oseen_fields(v, t, grid)?;
    omega.check_decay(T::lit(1e-10))?;
    let rate = ScalarField::from_fn(grid, |x| v.vorticity_rate(x, t));
    let advection = u.dot_gradient(&omega);
    let residual = &(&rate - &omega.laplacian()) + &advection;
    Ok(residual.max_abs())
}

/// A sum of Oseen vortices with fixed centers, evaluated analytically.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OseenBackground<T: Real> {
    pub vortices: Vec<OseenVortex<T>>,
}

impl<T: Real> OseenBackground<T> {
    pub fn new(vortices: Vec<OseenVortex<T>>) -> Self {
        OseenBackground { vortices }
    }

    pub fn is_empty(&self) -> bool {
        self.vortices.is_empty()
    }

    pub fn circulation(&self) -> T {
        self.vortices.iter().map(|v| v.alpha).sum()
    }

    pub fn vorticity(&self, grid: &Grid<T>, t: T) -> ScalarField<T> {
        ScalarField::from_fn(grid, |x| self.vortices.iter().map(|v| v.vorticity(x, t)).sum())
    }

    pub fn velocity(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        VectorField::from_fn(grid, |x| {
            self.vortices.iter().fold([T::zero(); 2], |acc, v| {
                let u = v.velocity(x, t);
                [acc[0] + u[0], acc[1] + u[1]]
            })
        })
    }

    pub fn vorticity_gradient(&self, grid: &Grid<T>, t: T) -> VectorField<T> {
        VectorField::from_fn(grid, |x| {
            self.vortices.iter().fold([T::zero(); 2], |acc, v| {
                let g = v.vorticity_gradient(x, t);
                [acc[0] + g[0], acc[1] + g[1]]
            })
        })
    }

    /// `Σ_{i≠j} u_j·∇ω_i`: the advection of each vortex by the others. The
    /// self terms vanish identically and are skipped.
    pub fn cross_advection(&self, grid: &Grid<T>, t: T) -> ScalarField<T> {
        let vs = &self.vortices;
        ScalarField::from_fn(grid, |x| {
            let mut total = T::zero();
            for (i, vi) in vs.iter().enumerate() {
                let g = vi.vorticity_gradient(x, t);
                for (j, vj) in vs.iter().enumerate() {
                    if i != j {
                        let u = vj.velocity(x, t);
                        total = total + u[0] * g[0] + u[1] * g[1];
                    }
                }
            }
            total
        })
    }

    /// Bound on `|u|` over the plane.
    pub fn max_speed(&self, t: T) -> T {
        self.vortices.iter().map(|v| v.max_speed(t)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn profile_values() {
        assert_relative_eq!(gaussian_profile([0.0, 0.0]), 0.079_577_471_545_947_67, epsilon = 1e-16);
        assert_relative_eq!(gaussian_profile([2.0, 0.0]), (-1.0f64).exp() / (4.0 * PI), epsilon = 1e-16);
        assert!((gaussian_profile([2.0f64, 0.0]) - 0.029_274_915_762_159_58).abs() < 1e-16);
        assert_eq!(velocity_profile([0.0f64, 0.0]), [0.0, 0.0]);
        let v = velocity_profile([1.0, 0.0]);
        assert_eq!(v[0], 0.0);
        assert_relative_eq!(v[1], (1.0 - (-0.25f64).exp()) / (2.0 * PI), epsilon = 1e-16);
        assert!((v[1] - 0.035_205_0).abs() < 1e-7);
        let far = velocity_profile([100.0, 0.0]);
        assert!((far[1] - 1.0 / (200.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn series_branch_is_continuous() {
        for r in [0.99e-4f64, 1.01e-4, 1e-5, 3e-3] {
            let a = velocity_factor(r * r);
            // alternating series for (1 - e^{-s})/s
            let s = r * r / 4.0;
            let mut term = 1.0;
            let mut series = 0.0;
            for k in 1..12 {
                series += term;
                term *= -s / (k as f64 + 1.0);
            }
            let direct = series / (8.0 * PI);
            assert_relative_eq!(a, direct, max_relative = 1e-14);
        }
    }

    #[test]
    fn maximum_speed_constant() {
        // the maximum of φ(r²) r over a fine radial scan
        let best = (1..200_000)
            .map(|k| {
                let r = k as f64 * 2e-5;
                velocity_factor(r * r) * r
            })
            .fold(0.0, f64::max);
        assert!((best - velocity_profile_max::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn fields_integrate_to_alpha() {
        let grid = Grid::new(256, 40.0).unwrap();
        let (omega, _) = oseen_fields(&OseenVortex::new(1.0, [0.0, 0.0]), 1.0, &grid).unwrap();
        assert_relative_eq!(omega.integral(), 1.0, epsilon = 1e-10);
        assert_relative_eq!(omega.max_abs(), 1.0 / (4.0 * PI), epsilon = 1e-15);
        let (omega4, _) = oseen_fields(&OseenVortex::new(1.0, [0.0, 0.0]), 4.0, &grid).unwrap();
        assert_relative_eq!(omega4.max_abs(), 1.0 / (16.0 * PI), epsilon = 1e-15);
        assert!(oseen_fields(&OseenVortex::new(1.0, [0.0, 0.0]), 0.0, &grid).is_err());
    }

    #[test]
    fn fields_linear_in_alpha() {
        let grid = Grid::new(32, 10.0).unwrap();
        let (w1, u1) = oseen_fields(&OseenVortex::new(1.0, [0.5, -1.0]), 0.7, &grid).unwrap();
        let (w2, u2) = oseen_fields(&OseenVortex::new(2.0, [0.5, -1.0]), 0.7, &grid).unwrap();
        assert!((&w2 - &w1.scaled(2.0)).max_abs() == 0.0);
        assert!(u2.sub(&u1.scaled(2.0)).max_norm() == 0.0);
    }

    #[test]
    fn residual_vanishes() {
        let grid = Grid::new(256, 40.0).unwrap();
        let r1 = oseen_residual(&OseenVortex::new(1.0, [0.0, 0.0]), 1.0, &grid).unwrap();
        assert!(r1 < 1e-8, "{r1}");
        let r100 = oseen_residual(&OseenVortex::new(100.0, [0.0, 0.0]), 1.0, &grid).unwrap();
        assert!(r100 < 1e-6, "{r100}");
        let r0 = oseen_residual(&OseenVortex::new(0.0, [0.0, 0.0]), 1.0, &grid).unwrap();
        assert_eq!(r0, 0.0);
        let edge = oseen_residual(&OseenVortex::new(1.0, [19.0, 0.0]), 1.0, &grid);
        assert!(matches!(edge, Err(Error::Margin(_))));
    }

    #[test]
    fn scaling_covariance() {
        let v = OseenVortex::new(1.3, [0.0, 0.0]);
        for lambda in [0.5, 2.0, 3.0] {
            for x in [[0.3, -0.2], [1.5, 2.0], [-4.0, 0.1]] {
                let t = 0.8;
                let lx = [lambda * x[0], lambda * x[1]];
                let lhs = v.vorticity(lx, lambda * lambda * t);
                assert_relative_eq!(lhs, v.vorticity(x, t) / (lambda * lambda), max_relative = 1e-14);
                let lu = v.velocity(lx, lambda * lambda * t);
                let u = v.velocity(x, t);
                assert_relative_eq!(lu[1], u[1] / lambda, max_relative = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn gradient_identity(x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let h = 1e-5;
            let g = gaussian_gradient([x, y]);
            let fd = (gaussian_profile([x + h, y]) - gaussian_profile([x - h, y])) / (2.0 * h);
            prop_assert!((g[0] - fd).abs() < 1e-10);
            prop_assert!((g[0] + 0.5 * x * gaussian_profile([x, y])).abs() < 1e-16);
        }

        #[test]
        fn velocity_is_perpendicular_to_gradient(x in -20.0f64..20.0, y in -20.0f64..20.0) {
            let v = velocity_profile([x, y]);
            let g = gaussian_gradient([x, y]);
            prop_assert!((v[0] * g[0] + v[1] * g[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn perpendicularity_at_many_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut worst = 0.0f64;
        for _ in 0..1_000_000 {
            let p: Point<f64> = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
            let v = velocity_profile(p);
            let g = gaussian_gradient(p);
            worst = worst.max((v[0] * g[0] + v[1] * g[1]).abs());
        }
        assert!(worst < 1e-14, "{worst}");
    }
}
