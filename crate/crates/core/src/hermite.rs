//! Hermite functions adapted to the Gaussian `G`.
//!
//! With `g(x) = e^{-x²/4} / √(4π)` (so `G(ξ) = g(ξ₁) g(ξ₂)`), the
//! derivatives `∂ᵃg` are orthogonal for the weight `1/g` and have squared
//! norm `a! / 2ᵃ`. [`hermite_1d`] returns the normalized functions
//! `eₐ = ∂ᵃg / √(a!/2ᵃ)`. Tensor products `eₐ(ξ₁) e_b(ξ₂)` are eigenfunctions
//! of `Δ + ½ξ·∇ + 1` with eigenvalue `-(a+b)/2`.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::{Grid, ScalarField};
use crate::scalar::Real;

/// Rows `0..count` hold `eₐ` sampled at `xs`.
///
/// Evaluated through the orthonormal Hermite functions `φₐ(y)`, `y = x/2`,
/// which obey a recurrence free of overflow: `eₐ(x) = (-1)ᵃ π^{1/4}
/// φₐ(y) e^{-y²/2} / √(4π)`.
pub fn hermite_1d<T: Real>(count: usize, xs: &[T]) -> Array2<T> {
    let mut out = Array2::zeros((count, xs.len()));
    let pref = T::PI().powf(T::lit(0.25)) / (T::lit(4.0) * T::PI()).sqrt();
    for (j, &x) in xs.iter().enumerate() {
        let y = x * T::lit(0.5);
        let damp = (-y * y * T::lit(0.5)).exp();
        // φ₀ = π^{-1/4} e^{-y²/2}; φₐ₊₁ = √(2/(a+1)) y φₐ - √(a/(a+1)) φₐ₋₁
        let mut prev = T::zero();
        let mut cur = T::PI().powf(T::lit(-0.25)) * damp;
        for a in 0..count {
            let sign = if a % 2 == 0 { T::one() } else { -T::one() };
            out[[a, j]] = sign * pref * cur * damp;
            let af = T::from_usize_lossy(a);
            let next = (T::lit(2.0) / (af + T::one())).sqrt() * y * cur
                - (af / (af + T::one())).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

/// Rows `0..count` hold `dₐ = eₐ / g` at `xs`, the polynomials dual to
/// [`hermite_1d`]: `∫ dₐ e_b = δₐ_b`. Avoids dividing by `g` in the tails.
pub fn hermite_dual_1d<T: Real>(count: usize, xs: &[T]) -> Array2<T> {
    let mut out = Array2::zeros((count, xs.len()));
    let pref = T::PI().powf(T::lit(0.25));
    for (j, &x) in xs.iter().enumerate() {
        let y = x * T::lit(0.5);
        let mut prev = T::zero();
        let mut cur = T::PI().powf(T::lit(-0.25));
        for a in 0..count {
            let sign = if a % 2 == 0 { T::one() } else { -T::one() };
            out[[a, j]] = sign * pref * cur;
            let af = T::from_usize_lossy(a);
            let next = (T::lit(2.0) / (af + T::one())).sqrt() * y * cur
                - (af / (af + T::one())).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    out
}

/// `eₐ(ξ₁) e_b(ξ₂)` on `grid`.
pub fn hermite_mode<T: Real>(grid: &Grid<T>, a: usize, b: usize) -> ScalarField<T> {
    let xs = grid.coords();
    let h = hermite_1d(a.max(b) + 1, &xs);
    let values = Array2::from_shape_fn((grid.n(), grid.n()), |(i, j)| h[[a, i]] * h[[b, j]]);
    ScalarField::new(grid, values).expect("shape matches")
}

/// A random finite Hermite expansion `Σ c_ab eₐ⊗e_b` over total orders
/// `min_order..=max_order`, with independent standard normal coefficients.
///
/// The generator is ChaCha20 seeded from the 64-bit `seed` (counter based,
/// platform independent). With `min_order ≥ 1` the field has zero mean.
pub fn seeded_field<T: Real>(
    grid: &Grid<T>,
    seed: u64,
    min_order: usize,
    max_order: usize,
) -> ScalarField<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let xs = grid.coords();
    let h = hermite_1d(max_order + 1, &xs);
    let mut coeffs = Array2::<T>::zeros((max_order + 1, max_order + 1));
    for order in min_order..=max_order {
        for a in 0..=order {
            let c: f64 = StandardNormal.sample(&mut rng);
            coeffs[[a, order - a]] = T::lit(c);
        }
    }
    // F = Hᵀ C H
    let values = h.t().dot(&coeffs).dot(&h);
    ScalarField::new(grid, values).expect("shape matches")
}

/// The default test field of the toolkit: orders 1 to 4, zero mean.
pub fn band_limited_field<T: Real>(grid: &Grid<T>, seed: u64) -> ScalarField<T> {
    seeded_field(grid, seed, 1, 4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oseen::{gaussian_gradient, gaussian_profile};

    #[test]
    fn low_modes_are_gaussian_derivatives() {
        let grid = Grid::new(128, 40.0).unwrap();
        let e00 = hermite_mode(&grid, 0, 0);
        let g = ScalarField::from_fn(&grid, gaussian_profile);
        assert!((&e00 - &g).max_abs() < 1e-16);
        // e₁ = ∂g / √(1/2)
        let e10 = hermite_mode(&grid, 1, 0);
        let d1 = ScalarField::from_fn(&grid, |p| gaussian_gradient(p)[0] * 2f64.sqrt());
        assert!((&e10 - &d1).max_abs() < 1e-16);
    }

    #[test]
    fn orthonormal_in_gaussian_weight() {
        // ∫ eₐ e_b / g over a fine 1D grid; g⁻¹ is evaluated directly, fine
        // for moderate orders on |x| ≤ 30
        let n = 3000;
        let l = 60.0;
        let h = l / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| -l / 2.0 + j as f64 * h).collect();
        let e = hermite_1d(12, &xs);
        for a in 0..12 {
            for b in 0..12 {
                let s: f64 = (0..n)
                    .map(|j| {
                        let g = (-xs[j] * xs[j] / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt();
                        e[[a, j]] * e[[b, j]] / g
                    })
                    .sum::<f64>()
                    * h;
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-9, "{a} {b} {s}");
            }
        }
    }

    #[test]
    fn modes_are_fokker_planck_eigenfunctions() {
        let grid = Grid::new(128, 40.0).unwrap();
        for (a, b) in [(1, 0), (2, 1), (3, 3), (6, 2)] {
            let e = hermite_mode(&grid, a, b);
            let lap = e.laplacian();
            let grad = e.gradient();
            let xs = grid.coords();
            let mut worst = 0.0f64;
            for i in 0..grid.n() {
                for j in 0..grid.n() {
                    let l = lap.values()[[i, j]]
                        + 0.5 * (xs[i] * grad.x.values()[[i, j]] + xs[j] * grad.y.values()[[i, j]])
                        + e.values()[[i, j]];
                    let want = -((a + b) as f64) / 2.0 * e.values()[[i, j]];
                    worst = worst.max((l - want).abs());
                }
            }
            assert!(worst < 1e-10, "({a},{b}): {worst}");
        }
    }

    #[test]
    fn duals_are_biorthogonal() {
        let n = 1200;
        let l = 60.0;
        let h = l / n as f64;
        let xs: Vec<f64> = (0..n).map(|j| -l / 2.0 + j as f64 * h).collect();
        let e = hermite_1d(20, &xs);
        let d = hermite_dual_1d(20, &xs);
        let gram = d.dot(&e.t()) * h;
        for a in 0..20 {
            for b in 0..20 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[[a, b]] - want).abs() < 1e-11, "{a} {b}");
            }
        }
        // d₁ = e₁/g = -x/√2
        assert!((d[[1, 700]] + xs[700] / 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn seeded_field_is_deterministic_and_mean_zero() {
        let grid = Grid::new(64, 30.0).unwrap();
        let a = band_limited_field::<f64>(&grid, 42);
        let b = band_limited_field::<f64>(&grid, 42);
        let c = band_limited_field::<f64>(&grid, 43);
        assert_eq!(a.values(), b.values());
        assert!((&a - &c).max_abs() > 1e-3);
        assert!(a.integral().abs() < 1e-14);
        let with_mean = seeded_field::<f64>(&grid, 42, 0, 4);
        assert!(with_mean.integral().abs() > 1e-3);
    }
}
