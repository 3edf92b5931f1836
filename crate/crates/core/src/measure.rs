//! Finite signed measures: finitely many point masses plus a gridded density.
//!
//! A measure with infinitely many atoms has to be truncated by the caller;
//! atoms lighter than about `1e-14` of the total variation carry no
//! information at double precision.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use crate::scalar::{dist, Point, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom<T: Real> {
    pub position: Point<T>,
    pub mass: T,
}

impl<T: Real> Atom<T> {
    pub fn new(position: Point<T>, mass: T) -> Self {
        Atom { position, mass }
    }
}

/// Canonical atom order: descending `|mass|`, ties by `(x, y)` ascending.
fn canonical_order<T: Real>(a: &Atom<T>, b: &Atom<T>) -> Ordering {
    b.mass
        .abs()
        .partial_cmp(&a.mass.abs())
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.position[0].partial_cmp(&b.position[0]).unwrap_or(Ordering::Equal))
        .then_with(|| a.position[1].partial_cmp(&b.position[1]).unwrap_or(Ordering::Equal))
}

#[derive(Clone, Debug)]
pub struct FiniteMeasure<T: Real> {
    atoms: Vec<Atom<T>>,
    density: Option<ScalarField<T>>,
}

impl<T: Real> FiniteMeasure<T> {
    /// Zero-mass atoms are dropped. Fails on non-finite data or repeated
    /// positions.
    pub fn new(atoms: Vec<Atom<T>>, density: Option<ScalarField<T>>) -> Result<Self> {
        let mut atoms: Vec<Atom<T>> = atoms.into_iter().filter(|a| a.mass != T::zero()).collect();
        for a in &atoms {
            if !(a.mass.is_finite() && a.position[0].is_finite() && a.position[1].is_finite()) {
                return Err(Error::Domain(format!("non-finite atom {a:?}")));
            }
        }
        atoms.sort_by(canonical_order);
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.position == a.position) {
                return Err(Error::Domain(format!(
                    "two atoms at ({}, {})",
                    a.position[0], a.position[1]
                )));
            }
        }
        if let Some(d) = &density {
            if d.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("density has non-finite values".into()));
            }
        }
        Ok(FiniteMeasure { atoms, density })
    }

    pub fn zero() -> Self {
        FiniteMeasure {
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn dirac(mass: T, position: Point<T>) -> Self {
        FiniteMeasure::new(vec![Atom::new(position, mass)], None).expect("single finite atom")
    }

    pub fn from_density(density: ScalarField<T>) -> Result<Self> {
        FiniteMeasure::new(Vec::new(), Some(density))
    }

    /// Atoms in canonical order.
    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&ScalarField<T>> {
        self.density.as_ref()
    }

    pub fn scaled(&self, c: T) -> Self {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.position, a.mass * c))
            .collect();
        FiniteMeasure::new(atoms, self.density.as_ref().map(|d| d.scaled(c)))
            .expect("scaling keeps a valid measure")
    }

    /// Adds `density` to the absolutely continuous part.
    pub fn with_added_density(&self, density: &ScalarField<T>) -> Result<Self> {
        let merged = match &self.density {
            None => density.clone(),
            Some(d) => {
                d.same_grid(density)?;
                d + density
            }
        };
        FiniteMeasure::new(self.atoms.clone(), Some(merged))
    }

    fn density_l1(&self) -> T {
        self.density
            .as_ref()
            .map(|d| d.lp_norm(T::one()).expect("p = 1 is valid"))
            .unwrap_or_else(T::zero)
    }

    /// `Σ|mᵢ| + ∫|f|`.
    pub fn total_variation(&self) -> T {
        atomic_mass(&self.atoms) + self.density_l1()
    }

    /// `Σ|mᵢ|`, ignoring the density.
    pub fn atomic_norm(&self) -> T {
        atomic_mass(&self.atoms)
    }

    /// `μ(R²) = Σmᵢ + ∫f`.
    pub fn total_mass(&self) -> T {
        let atoms: T = self.atoms.iter().map(|a| a.mass).sum();
        atoms
            + self
                .density
                .as_ref()
                .map(|d| d.integral())
                .unwrap_or_else(T::zero)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= T::zero())
            && self
                .density
                .as_ref()
                .is_none_or(|d| d.values().iter().all(|v| *v >= T::zero()))
    }

    /// Splits off the smallest prefix of atoms (canonical order) whose
    /// complement has atomic mass at most `epsilon`.
    pub fn decompose(&self, epsilon: T) -> Result<AtomicDecomposition<T>> {
        if !(epsilon > T::zero()) {
            return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
        }
        // tail[k] = Σ_{i ≥ k} |mᵢ|
        let mut tail = vec![T::zero(); self.atoms.len() + 1];
        for k in (0..self.atoms.len()).rev() {
            tail[k] = tail[k + 1] + self.atoms[k].mass.abs();
        }
        let keep = (0..=self.atoms.len())
            .find(|&k| tail[k] <= epsilon)
            .expect("the empty tail has zero mass");
        let retained: Vec<(T, Point<T>)> = self.atoms[..keep]
            .iter()
            .map(|a| (a.mass, a.position))
            .collect();
        let remainder = FiniteMeasure {
            atoms: self.atoms[keep..].to_vec(),
            density: self.density.clone(),
        };
        let m_pp = retained.iter().map(|(m, _)| m.abs()).sum();
        let mut d = T::infinity();
        for i in 0..retained.len() {
            for j in i + 1..retained.len() {
                d = d.min(dist(retained[i].1, retained[j].1));
            }
        }
        Ok(AtomicDecomposition {
            retained,
            remainder,
            epsilon,
            m_pp,
            d,
        })
    }

    /// Samples `e^{tΔ}μ` on `grid`: exact heat kernels for the atoms and a
    /// spectral heat multiplier for the density.
    ///
    /// Every atom must sit at least `6√t` inside the box. A density on a
    /// different grid is interpolated onto `grid` first. The sampled atoms
    /// integrate to their mass to within `exp(-4π² t/h²)`, so `t` should be
    /// at least `h²`.
    pub fn heat_smooth(&self, t: T, grid: &Grid<T>) -> Result<ScalarField<T>> {
        if !(t > T::zero()) || !t.is_finite() {
            return Err(Error::Domain(format!("heat time must be positive, got {t}")));
        }
        let reach = T::lit(6.0) * t.sqrt();
        for a in &self.atoms {
            if grid.margin(a.position) < reach {
                return Err(Error::Margin(format!(
                    "atom at ({}, {}) lies within 6√t = {} of the box boundary",
                    a.position[0], a.position[1], reach
                )));
            }
        }
        let mut out = match &self.density {
            None => grid.zeros(),
            Some(d) => {
                let on_grid = if d.grid() == grid {
                    d.clone()
                } else {
                    let xs = grid.coords();
                    ScalarField::new(grid, d.sample_tensor(&xs, &xs))?
                };
                on_grid.heat_flow(t)
            }
        };
        if !self.atoms.is_empty() {
            let xs = grid.coords();
            let four_t = T::lit(4.0) * t;
            let norm = (T::PI() * four_t).recip();
            let values = out.values_mut();
            for a in &self.atoms {
                // separable: e^{-|x-z|²/4t} = e^{-(x-z₁)²/4t} e^{-(y-z₂)²/4t}
                let gx: Vec<T> = xs
                    .iter()
                    .map(|x| (-(*x - a.position[0]).powi(2) / four_t).exp())
                    .collect();
                let gy: Vec<T> = xs
                    .iter()
                    .map(|y| (-(*y - a.position[1]).powi(2) / four_t).exp() * norm * a.mass)
                    .collect();
                for (i, row) in values.outer_iter_mut().enumerate() {
                    for (v, g) in row.into_iter().zip(&gy) {
                        *v = *v + gx[i] * *g;
                    }
                }
            }
        }
        Ok(out)
    }
}

fn atomic_mass<T: Real>(atoms: &[Atom<T>]) -> T {
    atoms.iter().map(|a| a.mass.abs()).sum()
}

/// `μ = Σ αᵢ δ_{zᵢ} + μ₀` with `‖μ₀‖_pp ≤ ε`.
#[derive(Clone, Debug)]
pub struct AtomicDecomposition<T: Real> {
    /// `(αᵢ, zᵢ)` in canonical order.
    pub retained: Vec<(T, Point<T>)>,
    pub remainder: FiniteMeasure<T>,
    pub epsilon: T,
    /// `Σ|αᵢ|`.
    pub m_pp: T,
    /// Minimum separation of the retained centers, `+∞` when fewer than two.
    pub d: T,
}

/// Default splitting threshold: 5% of the total variation. This is a
/// heuristic; the threshold is a tuning parameter with no canonical value.
pub fn default_epsilon<T: Real>(mu: &FiniteMeasure<T>) -> T {
    let tv = mu.total_variation();
    if tv > T::zero() {
        T::lit(0.05) * tv
    } else {
        T::lit(0.05)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oseen::gaussian_profile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_density(grid: &Grid<f64>, center: Point<f64>) -> ScalarField<f64> {
        ScalarField::from_fn(grid, |p| {
            gaussian_profile([p[0] - center[0], p[1] - center[1]])
        })
    }

    #[test]
    fn norms() {
        let grid = Grid::new(128, 30.0).unwrap();
        let f = unit_density(&grid, [3.0, 0.0]).scaled(-1.0);
        let mu = FiniteMeasure::new(
            vec![Atom::new([0.0, 0.0], 2.0), Atom::new([1.0, 0.0], -3.0)],
            Some(f.clone()),
        )
        .unwrap();
        assert_relative_eq!(mu.total_variation(), 6.0, epsilon = 1e-10);
        assert_eq!(mu.atomic_norm(), 5.0);
        assert_relative_eq!(mu.total_mass(), -2.0, epsilon = 1e-10);
        assert_eq!(FiniteMeasure::<f64>::zero().total_variation(), 0.0);
        assert_eq!(FiniteMeasure::dirac(1.0, [0.0, 0.0]).total_variation(), 1.0);
        assert_eq!(FiniteMeasure::from_density(f).unwrap().atomic_norm(), 0.0);
        let small = FiniteMeasure::new(
            vec![
                Atom::new([0.0, 0.0], 0.5),
                Atom::new([1.0, 0.0], 0.25),
                Atom::new([2.0, 0.0], 0.125),
            ],
            None,
        )
        .unwrap();
        assert_eq!(small.atomic_norm(), 0.875);
    }

    #[test]
    fn canonical_order_and_validation() {
        let mu = FiniteMeasure::new(
            vec![
                Atom::new([1.0, 0.0], 1.0),
                Atom::new([0.0, 5.0], -1.0),
                Atom::new([0.0, 2.0], 1.0),
                Atom::new([3.0, 3.0], 4.0),
                Atom::new([9.0, 9.0], 0.0),
            ],
            None,
        )
        .unwrap();
        let pos: Vec<_> = mu.atoms().iter().map(|a| a.position).collect();
        assert_eq!(pos, vec![[3.0, 3.0], [0.0, 2.0], [0.0, 5.0], [1.0, 0.0]]);
        let dup = FiniteMeasure::new(
            vec![Atom::new([1.0, 0.0], 1.0), Atom::new([1.0, 0.0], 2.0)],
            None,
        );
        assert!(dup.is_err());
        assert!(FiniteMeasure::new(vec![Atom::new([f64::NAN, 0.0], 1.0)], None).is_err());
    }

    fn geometric(k: usize) -> FiniteMeasure<f64> {
        let atoms = (0..k)
            .map(|i| Atom::new([i as f64, 0.0], 0.5f64.powi(i as i32 + 1)))
            .collect();
        FiniteMeasure::new(atoms, None).unwrap()
    }

    #[test]
    fn decompose_examples() {
        let dec = geometric(12).decompose(0.3).unwrap();
        assert_eq!(dec.retained.len(), 2);
        assert!(dec.remainder.atomic_norm() <= 0.3);
        assert_eq!(dec.d, 1.0);

        let dec = FiniteMeasure::dirac(5.0f64, [0.0, 0.0]).decompose(0.1).unwrap();
        assert_eq!(dec.retained, vec![(5.0, [0.0, 0.0])]);
        assert_eq!(dec.remainder.atomic_norm(), 0.0);
        assert!(dec.d.is_infinite());

        let grid = Grid::new(32, 20.0).unwrap();
        let dens = FiniteMeasure::from_density(unit_density(&grid, [0.0, 0.0])).unwrap();
        let dec = dens.decompose(0.01).unwrap();
        assert!(dec.retained.is_empty());
        assert!(dec.remainder.density().is_some());
        assert!(FiniteMeasure::<f64>::zero().decompose(0.0).is_err());
    }

    /// Smallest prefix length by brute force.
    fn enumerate_prefix(masses: &[f64], eps: f64) -> usize {
        (0..=masses.len())
            .find(|&k| masses[k..].iter().map(|m| m.abs()).sum::<f64>() <= eps)
            .unwrap()
    }

    proptest! {
        #[test]
        fn decompose_matches_enumeration(
            masses in prop::collection::vec(-5.0f64..5.0, 0..12),
            eps in 0.01f64..5.0,
        ) {
            let atoms: Vec<_> = masses
                .iter()
                .enumerate()
                .map(|(i, m)| Atom::new([i as f64, -(i as f64)], *m))
                .collect();
            let mu = FiniteMeasure::new(atoms, None).unwrap();
            let sorted: Vec<f64> = mu.atoms().iter().map(|a| a.mass).collect();
            let dec = mu.decompose(eps).unwrap();
            prop_assert_eq!(dec.retained.len(), enumerate_prefix(&sorted, eps));
            prop_assert!(dec.remainder.atomic_norm() <= eps);
            prop_assert!(dec.m_pp <= mu.atomic_norm() + 1e-12);
            prop_assert!(dec.retained.iter().all(|(a, _)| *a != 0.0));
            if dec.retained.len() <= 1 {
                prop_assert!(dec.d.is_infinite());
            }
            // idempotent on the remainder
            let again = dec.remainder.decompose(eps).unwrap();
            prop_assert!(again.retained.is_empty());
            prop_assert!(again.m_pp <= eps);
            prop_assert!((mu.total_variation() - mu.atomic_norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_smoothing() {
        let grid = Grid::new(128, 30.0).unwrap();
        let f = FiniteMeasure::dirac(1.0, [0.0, 0.0]).heat_smooth(1.0, &grid).unwrap();
        assert_relative_eq!(f.max_abs(), 1.0 / (4.0 * std::f64::consts::PI), epsilon = 1e-15);
        assert_eq!(FiniteMeasure::<f64>::zero().heat_smooth(1.0, &grid).unwrap().max_abs(), 0.0);
        let f3 = FiniteMeasure::dirac(3.0, [0.0, 0.0]).heat_smooth(1.0, &grid).unwrap();
        assert!((&f3 - &f.scaled(3.0)).max_abs() < 1e-16);
        let edge = FiniteMeasure::dirac(1.0, [13.0, 0.0]).heat_smooth(1.0, &grid);
        assert!(matches!(edge, Err(Error::Margin(_))));
        assert!(FiniteMeasure::dirac(1.0, [0.0, 0.0]).heat_smooth(0.0, &grid).is_err());
    }

    #[test]
    fn heat_smoothing_preserves_mass() {
        let grid = Grid::new(128, 30.0).unwrap();
        let dens = unit_density(&grid, [2.0, -1.0]).scaled(0.4);
        let mu = FiniteMeasure::new(
            vec![Atom::new([0.0, 0.0], 1.0), Atom::new([-3.0, 1.0], -0.7)],
            Some(dens),
        )
        .unwrap();
        // the sampled heat kernel integrates exactly once t is a few h²
        for t in [0.05, 0.3, 1.0] {
            let f = mu.heat_smooth(t, &grid).unwrap();
            assert!((f.integral() - mu.total_mass()).abs() < 1e-10 * mu.total_variation());
        }
    }

    #[test]
    fn heat_smoothing_scaling_covariance() {
        let grid = Grid::new(64, 30.0).unwrap();
        let mu = FiniteMeasure::dirac(1.0f64, [0.0, 0.0]);
        let (t, lambda) = (0.5f64, 2.0f64);
        let a = mu.heat_smooth(t, &grid).unwrap();
        let b = mu.heat_smooth(lambda * lambda * t, &grid).unwrap();
        // grid nodes x with λx also a node: x_j = -15 + j h, λ = 2 maps j ↦ 2j - 32
        for j in 16..48 {
            for k in 16..48 {
                let lhs = b.values()[[2 * j - 32, 2 * k - 32]];
                let rhs = a.values()[[j, k]] / (lambda * lambda);
                assert!((lhs - rhs).abs() <= 1e-15 * rhs.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn density_on_another_grid_is_interpolated() {
        let fine = Grid::new(128, 30.0).unwrap();
        let coarse = Grid::new(64, 30.0).unwrap();
        let mu = FiniteMeasure::from_density(unit_density(&fine, [0.5, 0.0])).unwrap();
        let f = mu.heat_smooth(0.5, &coarse).unwrap();
        let direct = FiniteMeasure::from_density(unit_density(&coarse, [0.5, 0.0]))
            .unwrap()
            .heat_smooth(0.5, &coarse)
            .unwrap();
        assert!((&f - &direct).max_abs() < 1e-12);
    }

    #[test]
    fn default_epsilon_is_fraction_of_variation() {
        let mu = FiniteMeasure::dirac(-4.0, [1.0, 1.0]);
        assert_relative_eq!(default_epsilon(&mu), 0.2);
    }
}
