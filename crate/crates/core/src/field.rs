//! Gridded scalar and vector fields on a centered periodic box.
//!
//! The box `[-L/2, L/2)^2` is sampled at `x_j = -L/2 + j h`, `h = L/n`.
//! Every field of interest decays like a Gaussian, so the periodic box
//! stands in for the plane as long as fields are negligible at its edge.
//! Array index `[i, j]` is the sample at `(x_i, y_j)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use ndarray::{Array2, Zip};

use crate::error::{Error, Result};
use crate::oseen;
use crate::scalar::{Point, Real};
use crate::spectral::{self, Plans, C};

#[derive(Clone)]
pub struct Grid<T: Real> {
    n: usize,
    box_size: T,
    plans: Arc<Plans<T>>,
}

impl<T: Real> PartialEq for Grid<T> {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.box_size == other.box_size
    }
}

impl<T: Real> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid {{ n: {}, box_size: {} }}", self.n, self.box_size)
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n: usize, box_size: T) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::Domain(format!(
                "grid size must be even and at least 16, got {n}"
            )));
        }
        if !(box_size > T::zero()) || !box_size.is_finite() {
            return Err(Error::Domain(format!(
                "box size must be positive, got {box_size}"
            )));
        }
        Ok(Grid {
            n,
            box_size,
            plans: Arc::new(Plans::new(n)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_size(&self) -> T {
        self.box_size
    }

    pub fn spacing(&self) -> T {
        self.box_size / T::from_usize_lossy(self.n)
    }

    pub fn cell_area(&self) -> T {
        let h = self.spacing();
        h * h
    }

    pub fn half_width(&self) -> T {
        self.box_size * T::lit(0.5)
    }

    pub fn coord(&self, j: usize) -> T {
        -self.half_width() + T::from_usize_lossy(j) * self.spacing()
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.n).map(|j| self.coord(j)).collect()
    }

    pub fn point(&self, i: usize, j: usize) -> Point<T> {
        [self.coord(i), self.coord(j)]
    }

    /// Signed integer mode number of DFT index `j`, in `-n/2+1 ..= n/2`.
    pub fn mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j <= n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber of DFT index `j`.
    pub fn wavenumber(&self, j: usize) -> T {
        T::from_i64(self.mode(j)).unwrap() * T::TAU() / self.box_size
    }

    /// Wavenumber used by odd-order derivatives: the Nyquist mode has no
    /// real-valued derivative and is dropped.
    pub fn derivative_wavenumber(&self, j: usize) -> T {
        if j == self.n / 2 {
            T::zero()
        } else {
            self.wavenumber(j)
        }
    }

    pub fn wavenumbers(&self) -> Vec<T> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }

    pub fn derivative_wavenumbers(&self) -> Vec<T> {
        (0..self.n).map(|j| self.derivative_wavenumber(j)).collect()
    }

    /// 2/3-rule mask along one axis.
    pub fn keeps_mode(&self, j: usize) -> bool {
        3 * self.mode(j).unsigned_abs() as usize <= self.n
    }

    /// Distance from `p` to the box boundary (negative outside).
    pub fn margin(&self, p: Point<T>) -> T {
        let hw = self.half_width();
        (hw - p[0].abs()).min(hw - p[1].abs())
    }

    /// FFT plans (and cached kernels) shared by every field on this grid.
    pub(crate) fn plans(&self) -> &Plans<T> {
        &self.plans
    }

    pub fn zeros(&self) -> ScalarField<T> {
        ScalarField::zeros(self)
    }
}

pub struct ScalarField<T: Real> {
    grid: Grid<T>,
    values: Array2<T>,
    spectrum: OnceLock<Array2<C<T>>>,
}

impl<T: Real> Clone for ScalarField<T> {
    fn clone(&self) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.clone(),
            spectrum: self.spectrum.clone(),
        }
    }
}

impl<T: Real> fmt::Debug for ScalarField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: &Grid<T>, values: Array2<T>) -> Result<Self> {
        if values.dim() != (grid.n, grid.n) {
            return Err(Error::Domain(format!(
                "values of shape {:?} do not match grid n = {}",
                values.dim(),
                grid.n
            )));
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().to_owned()
        };
        Ok(ScalarField {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: Array2::zeros((grid.n, grid.n)),
            spectrum: OnceLock::new(),
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let xs = grid.coords();
        let values = Array2::from_shape_fn((grid.n, grid.n), |(i, j)| f([xs[i], xs[j]]));
        ScalarField {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Builds a field from spectral coefficients (the real part of the
    /// inverse transform is kept).
    pub fn from_spectrum(grid: &Grid<T>, spectrum: Array2<C<T>>) -> Self {
        let mut work = spectrum;
        grid.plans.base.inverse(&mut work);
        let values = spectral::real_part(&work);
        ScalarField {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    /// Mutable access; drops any cached spectrum.
    pub fn values_mut(&mut self) -> &mut Array2<T> {
        self.spectrum = OnceLock::new();
        &mut self.values
    }

    /// Unnormalized DFT of the samples, computed once and cached.
    pub fn spectrum(&self) -> &Array2<C<T>> {
        self.spectrum.get_or_init(|| {
            let mut work = spectral::to_complex(&self.values);
            self.grid.plans.base.forward(&mut work);
            work
        })
    }

    /// Recomputes the transform and compares it with the cache, if any.
    pub fn spectrum_is_consistent(&self, tol: T) -> bool {
        match self.spectrum.get() {
            None => true,
            Some(cached) => {
                let mut fresh = spectral::to_complex(&self.values);
                self.grid.plans.base.forward(&mut fresh);
                let scale = T::one().max(self.max_abs() * T::from_usize_lossy(self.grid.n.pow(2)));
                cached
                    .iter()
                    .zip(fresh.iter())
                    .all(|(a, b)| (*a - *b).norm() <= tol * scale)
            }
        }
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    /// Rectangle-rule integral (spectrally accurate for smooth periodic data).
    pub fn integral(&self) -> T {
        self.values.sum() * self.grid.cell_area()
    }

    /// `L^p` norm by rectangle-rule quadrature; `p = ∞` gives the grid max.
    pub fn lp_norm(&self, p: T) -> Result<T> {
        lp_norm_of(self.values.iter().copied(), p, self.grid.cell_area())
    }

    /// `||(1 + |x|^2)^{m/2} f||_{L^q}` with the weight on centered coordinates.
    pub fn weighted_norm(&self, q: T, m: T) -> Result<T> {
        if m < T::zero() || !m.is_finite() {
            return Err(Error::Domain(format!("weight exponent m = {m} must be >= 0")));
        }
        if m == T::zero() {
            return self.lp_norm(q);
        }
        let weight = weight_array(&self.grid, m, T::zero());
        lp_norm_of(
            self.values.iter().zip(weight.iter()).map(|(v, w)| *v * *w),
            q,
            self.grid.cell_area(),
        )
    }

    pub fn gradient(&self) -> VectorField<T> {
        let kd = self.grid.derivative_wavenumbers();
        let spec = self.spectrum();
        let i = C::new(T::zero(), T::one());
        let dx = Array2::from_shape_fn(spec.dim(), |(a, b)| spec[[a, b]] * i * kd[a]);
        let dy = Array2::from_shape_fn(spec.dim(), |(a, b)| spec[[a, b]] * i * kd[b]);
        VectorField {
            x: ScalarField::from_spectrum(&self.grid, dx),
            y: ScalarField::from_spectrum(&self.grid, dy),
        }
    }

    pub fn laplacian(&self) -> ScalarField<T> {
        let k = self.grid.wavenumbers();
        let spec = self.spectrum();
        let lap = Array2::from_shape_fn(spec.dim(), |(a, b)| {
            spec[[a, b]] * -(k[a] * k[a] + k[b] * k[b])
        });
        ScalarField::from_spectrum(&self.grid, lap)
    }

    /// Exact heat flow `e^{tΔ}` on the periodic box.
    pub fn heat_flow(&self, t: T) -> ScalarField<T> {
        let k = self.grid.wavenumbers();
        let spec = self.spectrum();
        let out = Array2::from_shape_fn(spec.dim(), |(a, b)| {
            spec[[a, b]] * (-(k[a] * k[a] + k[b] * k[b]) * t).exp()
        });
        ScalarField::from_spectrum(&self.grid, out)
    }

    /// `f - (∫f) G`, the projection onto zero-mean fields along the Oseen profile.
    pub fn project_mean_zero(&self) -> ScalarField<T> {
        let mass = self.integral();
        let mut out = self.clone();
        let xs = self.grid.coords();
        Zip::indexed(out.values_mut()).for_each(|(i, j), v| {
            *v = *v - mass * oseen::gaussian_profile([xs[i], xs[j]]);
        });
        out
    }

    pub fn scaled(&self, c: T) -> ScalarField<T> {
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values * c,
            spectrum: OnceLock::new(),
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> ScalarField<T> {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.mapv(f),
            spectrum: OnceLock::new(),
        }
    }

    /// Pointwise product with a function of position.
    pub fn multiplied_by(&self, f: impl Fn(Point<T>) -> T) -> ScalarField<T> {
        let xs = self.grid.coords();
        let mut out = self.clone();
        Zip::indexed(out.values_mut()).for_each(|(i, j), v| *v = *v * f([xs[i], xs[j]]));
        out
    }

    /// Largest `|f|` within `cells` grid cells of the boundary.
    pub fn boundary_max(&self, cells: usize) -> T {
        let n = self.grid.n;
        let mut m = T::zero();
        for ((i, j), v) in self.values.indexed_iter() {
            let edge = i.min(n - 1 - i).min(j).min(n - 1 - j);
            if edge < cells {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Fails with [`Error::Margin`] unless the field has decayed to
    /// `rel_tol * max|f|` along the outer ring of the box.
    pub fn check_decay(&self, rel_tol: T) -> Result<()> {
        let peak = self.max_abs();
        if peak == T::zero() {
            return Ok(());
        }
        let ring = self.boundary_max(2.max(self.grid.n / 64));
        if ring > rel_tol * peak {
            return Err(Error::Margin(format!(
                "field reaches {:e} of its peak at the box boundary (tolerance {:e})",
                (ring / peak).as_f64(),
                rel_tol.as_f64()
            )));
        }
        Ok(())
    }

    /// Subsamples onto a grid whose nodes are a subset of this grid's.
    pub fn restrict_to(&self, coarse: &Grid<T>) -> Result<ScalarField<T>> {
        if coarse.box_size != self.grid.box_size || self.grid.n % coarse.n != 0 {
            return Err(Error::Mismatch(format!(
                "cannot restrict {:?} onto {:?}",
                self.grid, coarse
            )));
        }
        let step = self.grid.n / coarse.n;
        let values = self
            .values
            .slice(ndarray::s![..;step, ..;step])
            .to_owned();
        ScalarField::new(coarse, values)
    }

    /// Trigonometric interpolation onto the tensor product of `xs` and `ys`.
    /// Targets outside the box evaluate to zero.
    pub fn sample_tensor(&self, xs: &[T], ys: &[T]) -> Array2<T> {
        let ix = interpolation_matrix(&self.grid, xs);
        let iy = interpolation_matrix(&self.grid, ys);
        ix.dot(&self.values).dot(&iy.t())
    }

    pub fn same_grid(&self, other: &ScalarField<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch(format!(
                "fields live on different grids: {:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }
}

/// Rows interpolate the periodic band-limited interpolant at `targets`.
/// Rows for targets outside `[-L/2, L/2]` are zero.
pub(crate) fn interpolation_matrix<T: Real>(grid: &Grid<T>, targets: &[T]) -> Array2<T> {
    let n = grid.n;
    let nf = T::from_usize_lossy(n);
    let xs = grid.coords();
    let hw = grid.half_width();
    let tiny = T::lit(1e-12);
    Array2::from_shape_fn((targets.len(), n), |(a, j)| {
        let x = targets[a];
        if x.abs() > hw {
            return T::zero();
        }
        let delta = T::TAU() * (x - xs[j]) / grid.box_size;
        let half = delta * T::lit(0.5);
        let s = half.sin();
        if s.abs() < tiny {
            // delta is a multiple of 2π: interpolation node
            let c = (nf * half).cos() / half.cos();
            return c;
        }
        (nf * half).sin() * half.cos() / (s * nf)
    })
}

pub(crate) fn weight_array<T: Real>(grid: &Grid<T>, m: T, extra_exponent: T) -> Array2<T> {
    let xs = grid.coords();
    let half = m * T::lit(0.5) + extra_exponent;
    Array2::from_shape_fn((grid.n, grid.n), |(i, j)| {
        (T::one() + xs[i] * xs[i] + xs[j] * xs[j]).powf(half)
    })
}

pub(crate) fn lp_norm_of<T: Real>(
    values: impl Iterator<Item = T>,
    p: T,
    cell_area: T,
) -> Result<T> {
    if p.is_nan() || p < T::one() {
        return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.fold(T::zero(), |acc, v| acc.max(v.abs())));
    }
    if p == T::one() {
        return Ok(values.map(|v| v.abs()).sum::<T>() * cell_area);
    }
    if p == T::lit(2.0) {
        return Ok((values.map(|v| v * v).sum::<T>() * cell_area).sqrt());
    }
    let s: T = values.map(|v| v.abs().powf(p)).sum();
    Ok((s * cell_area).powf(p.recip()))
}

impl<'a, T: Real> Add for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn add(self, rhs: Self) -> ScalarField<T> {
        assert!(self.grid == rhs.grid, "fields on different grids");
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values + &rhs.values,
            spectrum: OnceLock::new(),
        }
    }
}

impl<'a, T: Real> Sub for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn sub(self, rhs: Self) -> ScalarField<T> {
        assert!(self.grid == rhs.grid, "fields on different grids");
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values - &rhs.values,
            spectrum: OnceLock::new(),
        }
    }
}

impl<'a, T: Real> Mul<T> for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn mul(self, c: T) -> ScalarField<T> {
        self.scaled(c)
    }
}

impl<'a, T: Real> Neg for &'a ScalarField<T> {
    type Output = ScalarField<T>;
    fn neg(self) -> ScalarField<T> {
        self.scaled(-T::one())
    }
}

/// Two scalar components on one grid.
#[derive(Clone, Debug)]
pub struct VectorField<T: Real> {
    pub x: ScalarField<T>,
    pub y: ScalarField<T>,
}

impl<T: Real> VectorField<T> {
    pub fn new(x: ScalarField<T>, y: ScalarField<T>) -> Result<Self> {
        x.same_grid(&y)?;
        Ok(VectorField { x, y })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        VectorField {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(Point<T>) -> Point<T>) -> Self {
        let xs = grid.coords();
        let n = grid.n;
        let mut vx = Array2::zeros((n, n));
        let mut vy = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let v = f([xs[i], xs[j]]);
                vx[[i, j]] = v[0];
                vy[[i, j]] = v[1];
            }
        }
        VectorField {
            x: ScalarField::new(grid, vx).expect("shape matches"),
            y: ScalarField::new(grid, vy).expect("shape matches"),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.x.grid()
    }

    pub fn divergence(&self) -> ScalarField<T> {
        let kd = self.grid().derivative_wavenumbers();
        let sx = self.x.spectrum();
        let sy = self.y.spectrum();
        let i = C::new(T::zero(), T::one());
        let div = Array2::from_shape_fn(sx.dim(), |(a, b)| {
            (sx[[a, b]] * kd[a] + sy[[a, b]] * kd[b]) * i
        });
        ScalarField::from_spectrum(self.grid(), div)
    }

    /// `∂₁u₂ − ∂₂u₁`.
    pub fn curl(&self) -> ScalarField<T> {
        let kd = self.grid().derivative_wavenumbers();
        let sx = self.x.spectrum();
        let sy = self.y.spectrum();
        let i = C::new(T::zero(), T::one());
        let curl = Array2::from_shape_fn(sx.dim(), |(a, b)| {
            (sy[[a, b]] * kd[a] - sx[[a, b]] * kd[b]) * i
        });
        ScalarField::from_spectrum(self.grid(), curl)
    }

    pub fn magnitude(&self) -> ScalarField<T> {
        let values = Zip::from(self.x.values())
            .and(self.y.values())
            .map_collect(|a, b| (*a * *a + *b * *b).sqrt());
        ScalarField::new(self.grid(), values).expect("shape matches")
    }

    pub fn max_norm(&self) -> T {
        self.magnitude().max_abs()
    }

    /// `L^q` norm of the Euclidean magnitude.
    pub fn lp_norm(&self, q: T) -> Result<T> {
        self.magnitude().lp_norm(q)
    }

    pub fn scaled(&self, c: T) -> VectorField<T> {
        VectorField {
            x: self.x.scaled(c),
            y: self.y.scaled(c),
        }
    }

    pub fn add(&self, other: &VectorField<T>) -> VectorField<T> {
        VectorField {
            x: &self.x + &other.x,
            y: &self.y + &other.y,
        }
    }

    pub fn sub(&self, other: &VectorField<T>) -> VectorField<T> {
        VectorField {
            x: &self.x - &other.x,
            y: &self.y - &other.y,
        }
    }

    /// Pointwise dot product with the gradient of `f`.
    pub fn dot_gradient(&self, f: &ScalarField<T>) -> ScalarField<T> {
        let g = f.gradient();
        let values = Zip::from(self.x.values())
            .and(self.y.values())
            .and(g.x.values())
            .and(g.y.values())
            .map_collect(|ux, uy, gx, gy| *ux * *gx + *uy * *gy);
        ScalarField::new(self.grid(), values).expect("shape matches")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g(p: Point<f64>) -> f64 {
        oseen::gaussian_profile(p)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::<f64>::new(15, 1.0).is_err());
        assert!(Grid::<f64>::new(8, 1.0).is_err());
        assert!(Grid::<f64>::new(16, 0.0).is_err());
        let grid = Grid::<f64>::new(16, 4.0).unwrap();
        assert_eq!(grid.coord(0), -2.0);
        assert_eq!(grid.mode(8), 8);
        assert_eq!(grid.mode(9), -7);
        assert_eq!(grid.derivative_wavenumber(8), 0.0);
    }

    #[test]
    fn gaussian_norms() {
        let grid = Grid::new(256, 40.0).unwrap();
        let f = ScalarField::from_fn(&grid, g);
        assert_relative_eq!(f.lp_norm(1.0).unwrap(), 1.0, epsilon = 1e-10);
        let l2 = (8.0 * std::f64::consts::PI).powf(-0.5);
        assert_relative_eq!(f.lp_norm(2.0).unwrap(), l2, epsilon = 1e-12);
        assert_relative_eq!(f.weighted_norm(2.0, 0.0).unwrap(), l2, epsilon = 1e-12);
        assert_relative_eq!(
            f.lp_norm(f64::INFINITY).unwrap(),
            1.0 / (4.0 * std::f64::consts::PI),
            epsilon = 1e-15
        );
        assert_eq!(grid.zeros().lp_norm(3.0).unwrap(), 0.0);
        assert!(f.lp_norm(0.5).is_err());
        assert!(f.weighted_norm(0.5, 1.0).is_err());
        assert!(f.weighted_norm(2.0, -1.0).is_err());
    }

    #[test]
    fn laplacian_matches_drift_identity() {
        // ∇G = -ξG/2, hence ΔG = -div(ξG/2)
        let grid = Grid::new(256, 40.0).unwrap();
        let f = ScalarField::from_fn(&grid, g);
        let drift = VectorField::from_fn(&grid, |p| [0.5 * p[0] * g(p), 0.5 * p[1] * g(p)]);
        let residual = &f.laplacian() + &drift.divergence();
        assert!(residual.max_abs() < 1e-8, "{}", residual.max_abs());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let grid = Grid::new(32, 5.0).unwrap();
        let c = ScalarField::from_fn(&grid, |_| 3.5);
        assert!(c.gradient().max_norm() < 1e-13);
    }

    #[test]
    fn projection_removes_mass() {
        let grid = Grid::new(256, 40.0).unwrap();
        let f = ScalarField::from_fn(&grid, g);
        assert!(f.project_mean_zero().max_abs() < 1e-15);

        let d1 = ScalarField::from_fn(&grid, |p| -0.5 * p[0] * g(p));
        let mixed = ScalarField::from_fn(&grid, |p| 2.0 * g(p) - 0.5 * p[0] * g(p));
        let diff = &mixed.project_mean_zero() - &d1;
        assert!(diff.max_abs() < 1e-10);
        let same = &d1.project_mean_zero() - &d1;
        assert!(same.max_abs() < 1e-15);
    }

    #[test]
    fn spectral_round_trip_and_parseval() {
        let grid = Grid::new(64, 20.0).unwrap();
        let f = ScalarField::from_fn(&grid, |p| g([p[0] - 1.0, p[1]]) * (1.0 + p[1].sin()));
        let back = ScalarField::from_spectrum(&grid, f.spectrum().clone());
        assert!((&back - &f).max_abs() < 1e-12 * f.max_abs().max(1.0));
        let energy: f64 = f.spectrum().iter().map(|z| z.norm_sqr()).sum::<f64>()
            * grid.cell_area()
            / (grid.n() * grid.n()) as f64;
        assert_relative_eq!(f.lp_norm(2.0).unwrap().powi(2), energy, max_relative = 1e-10);
        assert!(f.spectrum_is_consistent(1e-12));
    }

    #[test]
    fn mutation_invalidates_spectrum() {
        let grid = Grid::new(16, 4.0).unwrap();
        let mut f = ScalarField::from_fn(&grid, |p: Point<f64>| p[0].cos());
        let _ = f.spectrum();
        f.values_mut()[[3, 3]] = 10.0;
        assert!(f.spectrum_is_consistent(1e-12));
        let s = f.spectrum()[[0, 0]].re;
        assert_relative_eq!(s, f.values().sum(), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_norms_converge_spectrally() {
        for p in [1.0, 2.0, 4.0 / 3.0] {
            let a = ScalarField::from_fn(&Grid::new(128, 40.0).unwrap(), g)
                .lp_norm(p)
                .unwrap();
            let b = ScalarField::from_fn(&Grid::new(256, 40.0).unwrap(), g)
                .lp_norm(p)
                .unwrap();
            assert!((a - b).abs() < 1e-10, "p = {p}: {a} vs {b}");
        }
    }

    #[test]
    fn interpolation_reproduces_band_limited_data() {
        let grid = Grid::new(96, 30.0).unwrap();
        let f = ScalarField::from_fn(&grid, |p| g([0.7 * p[0], p[1] - 0.3]));
        let targets = [-3.21, -0.05, 0.0, 1.234, 4.9, 14.99];
        let out = f.sample_tensor(&targets, &targets);
        for (a, x) in targets.iter().enumerate() {
            for (b, y) in targets.iter().enumerate() {
                let exact = g([0.7 * x, y - 0.3]);
                assert!((out[[a, b]] - exact).abs() < 1e-12, "{x} {y}");
            }
        }
        // nodes map to themselves
        let nodes = grid.coords();
        let same = f.sample_tensor(&nodes, &nodes);
        assert!((same - f.values()).iter().all(|d| d.abs() < 1e-13));
    }

    #[test]
    fn restriction_picks_shared_nodes() {
        let fine = Grid::new(64, 10.0).unwrap();
        let coarse = Grid::new(32, 10.0).unwrap();
        let f = ScalarField::from_fn(&fine, |p| p[0] + 2.0 * p[1]);
        let r = f.restrict_to(&coarse).unwrap();
        let direct = ScalarField::from_fn(&coarse, |p| p[0] + 2.0 * p[1]);
        assert!((&r - &direct).max_abs() < 1e-14);
        assert!(coarse.zeros().restrict_to(&fine).is_err());
    }

    #[test]
    fn single_precision_gaussian_mass() {
        let grid = Grid::<f32>::new(128, 40.0).unwrap();
        let f = ScalarField::from_fn(&grid, oseen::gaussian_profile);
        assert!((f.integral() - 1.0).abs() < 1e-5);
        let lap = f.laplacian();
        assert!(lap.integral().abs() < 1e-5);
    }
}
