//! Scalar functionals of solutions: distance to the Oseen vortex, the
//! remainder norms `M` and distances `Δ` of the decomposed solver, localized
//! norms of the diffuse part, and the spectrum of the linearization around
//! `G`.
//!
//! The spectrum is computed in `f64` only; the eigen-solver needs
//! `nalgebra::RealField`, and single precision cannot resolve the
//! eigenvalues to the accuracy the checks ask for.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Complex, DMatrix, DVector, Schur};
use ndarray::{Array2, Zip};

use crate::biot_savart::{velocity_free_space, velocity_free_space_unchecked};
use crate::error::{Error, Result};
use crate::field::{lp_norm_of, Grid, ScalarField};
use crate::hermite::{hermite_1d, hermite_dual_1d};
use crate::oseen::{gaussian_gradient, velocity_profile, OseenBackground, OseenVortex};
use crate::scalar::{dist, norm2, Point, Real};
use crate::solver::SolverRun;

/// Default weight exponent of the `L²(m)` diagnostics.
pub const DEFAULT_M: f64 = 3.0;

fn check_p<T: Real>(p: T, what: &str) -> Result<()> {
    if p.is_nan() || p < T::one() {
        return Err(Error::Domain(format!("{what} must be >= 1, got {p}")));
    }
    Ok(())
}

fn check_m<T: Real>(m: T) -> Result<()> {
    if !(m >= T::zero()) || !m.is_finite() {
        return Err(Error::Domain(format!("weight exponent must be finite and >= 0, got {m}")));
    }
    Ok(())
}

/// `t^{1-1/p}` with `p = ∞` giving `t`.
fn lp_scale<T: Real>(t: T, p: T) -> T {
    if p.is_infinite() {
        t
    } else {
        t.powf(T::one() - p.recip())
    }
}

/// `t^{1-1/p} ‖ω - (α/t) G(·/√t)‖_p`, the vortex centered at the origin.
pub fn oseen_distance<T: Real>(omega: &ScalarField<T>, t: T, alpha: T, p: T) -> Result<T> {
    check_p(p, "p")?;
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let v = OseenVortex::new(alpha, [T::zero(), T::zero()]);
    let exact = ScalarField::from_fn(omega.grid(), |x| v.vorticity(x, t));
    Ok(lp_scale(t, p) * (omega - &exact).lp_norm(p)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OseenDistanceRow {
    pub t: f64,
    pub p: f64,
    pub value: f64,
}

pub fn write_oseen_distance_csv(path: &Path, rows: &[OseenDistanceRow]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,p,value")?;
    for r in rows {
        writeln!(w, "{:e},{},{:e}", r.t, r.p, r.value)?;
    }
    w.flush()?;
    Ok(())
}

fn bump<T: Real>(x: T) -> T {
    if x > T::zero() {
        (-x.recip()).exp()
    } else {
        T::zero()
    }
}

/// Smooth radial cutoff: 1 for `r ≤ 1/4`, 0 for `r ≥ 1/3`.
pub fn cutoff<T: Real>(r: T) -> T {
    let s = (r - T::lit(0.25)) * T::lit(12.0);
    if s <= T::zero() {
        return T::one();
    }
    if s >= T::one() {
        return T::zero();
    }
    let a = bump(T::one() - s);
    a / (a + bump(s))
}

/// Weights `χ₀, χ₁, …, χ_N` with `χᵢ = cutoff(|x - zᵢ| / d)` and
/// `χ₀ = 1 - Σχᵢ`. `d` is the smallest pairwise distance between centers,
/// or the box size when there is a single center.
pub fn partition_of_unity<T: Real>(grid: &Grid<T>, centers: &[Point<T>]) -> Vec<ScalarField<T>> {
    let mut d = T::infinity();
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[i + 1..] {
            d = d.min(dist(*a, *b));
        }
    }
    if !d.is_finite() {
        d = grid.box_size();
    }
    let mut parts: Vec<ScalarField<T>> = centers
        .iter()
        .map(|z| ScalarField::from_fn(grid, |x| cutoff(dist(x, *z) / d)))
        .collect();
    let rest = ScalarField::from_fn(grid, |_| T::one());
    let rest = parts.iter().fold(rest, |acc, c| &acc - c);
    parts.insert(0, rest);
    parts
}

/// `‖w‖_{L²(m)}` of the self-similar image `w(ξ) = s f(z + √s ξ)`,
/// evaluated on `f`'s own grid by the change of variables
/// `‖w‖² = s ∫ (1 + |x - z|²/s)^m f(x)² dx`.
pub fn self_similar_weighted_norm<T: Real>(f: &ScalarField<T>, z: Point<T>, s: T, m: T) -> T {
    let grid = f.grid();
    let xs = grid.coords();
    let mut acc = T::zero();
    for (idx, &v) in f.values().indexed_iter() {
        let r2 = norm2([xs[idx.0] - z[0], xs[idx.1] - z[1]]);
        acc = acc + (T::one() + r2 / s).powf(m) * v * v;
    }
    (s * acc * grid.cell_area()).sqrt()
}

/// Which family of functionals a [`ContractionSeries`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionKind {
    /// `M₀, Mᵢ, M` of one run.
    Remainder,
    /// `Δ₀, Δᵢ, Δ` between two runs, plus the sup `L¹` distance.
    Distance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContractionRow<T: Real> {
    pub t: T,
    /// Index 0 is the diffuse part, `i ≥ 1` the part attributed to vortex `i`.
    pub parts: Vec<T>,
    pub total: T,
    /// Running sup of `‖ω⁽¹⁾ - ω⁽²⁾‖₁` (distance series only).
    pub l1: Option<T>,
}

/// Running suprema over the snapshots of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionSeries<T: Real> {
    pub kind: ContractionKind,
    pub m: T,
    pub rows: Vec<ContractionRow<T>>,
}

impl<T: Real> ContractionSeries<T> {
    pub fn last(&self) -> Option<&ContractionRow<T>> {
        self.rows.last()
    }

    pub fn totals(&self) -> Vec<T> {
        self.rows.iter().map(|r| r.total).collect()
    }

    /// True when every column is nondecreasing in `t`.
    pub fn is_nondecreasing(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[0].total <= w[1].total
                && w[0].parts.iter().zip(&w[1].parts).all(|(a, b)| a <= b)
                && match (w[0].l1, w[1].l1) {
                    (Some(a), Some(b)) => a <= b,
                    _ => true,
                }
        })
    }

    /// `contraction.csv`: `t,M0,…,MN,M` or `t,Delta0,…,DeltaN,Delta,L1`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        let stem = match self.kind {
            ContractionKind::Remainder => "M",
            ContractionKind::Distance => "Delta",
        };
        let parts = self.rows.first().map_or(1, |r| r.parts.len());
        let mut header = vec!["t".to_string()];
        header.extend((0..parts).map(|i| format!("{stem}{i}")));
        header.push(stem.to_string());
        if self.kind == ContractionKind::Distance {
            header.push("L1".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for r in &self.rows {
            let mut cols = vec![format!("{:e}", r.t)];
            cols.extend(r.parts.iter().map(|v| format!("{v:e}")));
            cols.push(format!("{:e}", r.total));
            if let Some(l1) = r.l1 {
                cols.push(format!("{l1:e}"));
            }
            writeln!(w, "{}", cols.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The per-snapshot functionals before taking suprema.
fn raw_parts<T: Real>(
    rem: &ScalarField<T>,
    t: T,
    background: &OseenBackground<T>,
    chis: &[ScalarField<T>],
    m: T,
) -> Result<Vec<T>> {
    let area = rem.grid().cell_area();
    let diffuse = Zip::from(rem.values())
        .and(chis[0].values())
        .map_collect(|&w, &c| w * c);
    let mut out = vec![t.powf(T::lit(0.25)) * lp_norm_of(diffuse.iter().copied(), T::lit(4.0 / 3.0), area)?];
    for (v, chi) in background.vortices.iter().zip(&chis[1..]) {
        let local = ScalarField::new(
            rem.grid(),
            Zip::from(rem.values())
                .and(chi.values())
                .map_collect(|&w, &c| w * c / v.alpha),
        )?;
        out.push(self_similar_weighted_norm(&local, v.z, t, m));
    }
    Ok(out)
}

fn running_sup<T: Real>(rows: &mut [ContractionRow<T>]) {
    let mut best: Option<ContractionRow<T>> = None;
    for r in rows.iter_mut() {
        if let Some(b) = &best {
            for (p, q) in r.parts.iter_mut().zip(&b.parts) {
                *p = p.max(*q);
            }
            if let (Some(a), Some(q)) = (r.l1.as_mut(), b.l1) {
                *a = a.max(q);
            }
        }
        r.total = r.parts.iter().fold(T::zero(), |a, &b| a.max(b));
        best = Some(r.clone());
    }
}

fn require_decomposed<T: Real>(run: &SolverRun<T>) -> Result<()> {
    if !run.is_decomposed() {
        return Err(Error::Mode("the diagnostic needs a decomposed run".into()));
    }
    Ok(())
}

fn centers<T: Real>(bg: &OseenBackground<T>) -> Vec<Point<T>> {
    bg.vortices.iter().map(|v| v.z).collect()
}

/// Running suprema of `s^{1/4}‖χ₀ω̃‖_{4/3}` and of the self-similar
/// `L²(m)` norms of `χᵢω̃/αᵢ` around each center.
pub fn remainder_norms<T: Real>(run: &SolverRun<T>, m: T) -> Result<ContractionSeries<T>> {
    require_decomposed(run)?;
    check_m(m)?;
    let chis = partition_of_unity(run.grid(), &centers(&run.background));
    let mut rows = Vec::with_capacity(run.times().len());
    for (&t, rem) in run.times().iter().zip(run.remainder.states()) {
        let parts = raw_parts(rem, t, &run.background, &chis, m)?;
        rows.push(ContractionRow {
            t,
            parts,
            total: T::zero(),
            l1: None,
        });
    }
    running_sup(&mut rows);
    Ok(ContractionSeries {
        kind: ContractionKind::Remainder,
        m,
        rows,
    })
}

/// Running suprema of the same functionals applied to the difference of
/// two runs' remainders, normalized by the first run's circulations, plus
/// the sup `L¹` distance of the full vorticities.
pub fn solution_distance<T: Real>(
    a: &SolverRun<T>,
    b: &SolverRun<T>,
    m: T,
) -> Result<ContractionSeries<T>> {
    require_decomposed(a)?;
    require_decomposed(b)?;
    check_m(m)?;
    if a.grid() != b.grid() {
        return Err(Error::Mismatch(format!(
            "grids differ: n = {}, L = {} vs n = {}, L = {}",
            a.grid().n(),
            a.grid().box_size(),
            b.grid().n(),
            b.grid().box_size()
        )));
    }
    let (ta, tb) = (a.times(), b.times());
    let same_times = ta.len() == tb.len()
        && ta
            .iter()
            .zip(tb)
            .all(|(x, y)| (*x - *y).abs() <= T::lit(1e-9) * x.abs().max(y.abs()));
    if !same_times {
        return Err(Error::Mismatch("snapshot times differ".into()));
    }
    let (ca, cb) = (centers(&a.background), centers(&b.background));
    let tol = T::lit(1e-12) * a.grid().box_size();
    if ca.len() != cb.len() || ca.iter().zip(&cb).any(|(p, q)| dist(*p, *q) > tol) {
        return Err(Error::Mismatch("background centers differ".into()));
    }
    let chis = partition_of_unity(a.grid(), &ca);
    let mut rows = Vec::with_capacity(ta.len());
    for k in 0..ta.len() {
        let diff = &a.remainder.states()[k] - &b.remainder.states()[k];
        let parts = raw_parts(&diff, ta[k], &a.background, &chis, m)?;
        let l1 = (&a.vorticity(k) - &b.vorticity(k)).lp_norm(T::one())?;
        rows.push(ContractionRow {
            t: ta[k],
            parts,
            total: T::zero(),
            l1: Some(l1),
        });
    }
    running_sup(&mut rows);
    Ok(ContractionSeries {
        kind: ContractionKind::Distance,
        m,
        rows,
    })
}

/// Cutoff applied around the chosen center in [`localized_diffuse_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Localization {
    /// `e^{-|x - zᵢ|²/(8t)}`.
    Gaussian,
    /// No cutoff.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizedRow<T: Real> {
    pub t: T,
    /// `t^{1-1/p} ‖ω̃ χ‖_p`.
    pub vorticity: T,
    /// `t^{1/2-1/q} ‖ũ χ‖_q`.
    pub velocity: T,
}

/// Norms of the remainder and its velocity near center `i`, one row per
/// snapshot.
pub fn localized_diffuse_norm<T: Real>(
    run: &SolverRun<T>,
    i: usize,
    p: T,
    q: T,
    localization: Localization,
) -> Result<Vec<LocalizedRow<T>>> {
    require_decomposed(run)?;
    check_p(p, "p")?;
    check_p(q, "q")?;
    let z = run
        .background
        .vortices
        .get(i)
        .map(|v| v.z)
        .ok_or_else(|| Error::Domain(format!("no vortex with index {i}")))?;
    let grid = run.grid();
    let area = grid.cell_area();
    let mut out = Vec::with_capacity(run.times().len());
    for (&t, rem) in run.times().iter().zip(run.remainder.states()) {
        let chi = match localization {
            Localization::Gaussian => ScalarField::from_fn(grid, |x| {
                let r = norm2([x[0] - z[0], x[1] - z[1]]) / t;
                (-r / T::lit(8.0)).exp()
            }),
            Localization::None => ScalarField::from_fn(grid, |_| T::one()),
        };
        let w = Zip::from(rem.values()).and(chi.values()).map_collect(|&a, &c| a * c);
        let vorticity = lp_scale(t, p) * lp_norm_of(w.iter().copied(), p, area)?;
        let u = velocity_free_space_unchecked(rem);
        let speed = Zip::from(u.x.values())
            .and(u.y.values())
            .and(chi.values())
            .map_collect(|&a, &b, &c| (a * a + b * b).sqrt() * c);
        let qexp = if q.is_infinite() {
            T::lit(0.5)
        } else {
            T::lit(0.5) - q.recip()
        };
        let velocity = t.powf(qexp) * lp_norm_of(speed.iter().copied(), q, area)?;
        out.push(LocalizedRow { t, vorticity, velocity });
    }
    Ok(out)
}

pub fn write_localized_csv<T: Real>(path: &Path, rows: &[LocalizedRow<T>]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,vorticity,velocity")?;
    for r in rows {
        writeln!(w, "{:e},{:e},{:e}", r.t, r.vorticity, r.velocity)?;
    }
    w.flush()?;
    Ok(())
}

/// Grid used to assemble the Hermite-Galerkin matrices for `basis_n`
/// functions per direction. Modes up to order `N` reach `|ξ| ≈ 2√(2N)`; the
/// box leaves room for their products with the dual polynomials and the
/// spacing keeps the Biot-Savart error near `1e-9`.
pub fn spectrum_grid(basis_n: usize) -> Result<Grid<f64>> {
    let l = (8.5 * (basis_n as f64).sqrt()).max(32.0).ceil();
    let n = 32 * (l / (0.15 * 32.0)).ceil() as usize;
    Grid::new(n, l)
}

fn index(basis_n: usize, a: usize, b: usize) -> usize {
    a * basis_n + b
}

/// The linearization `Λ_α w = ℒw - α (v^G·∇w + v^w·∇G)` in the basis
/// `e_a ⊗ e_b`, `a, b < N`, which is orthonormal for `∫ f g / G`.
///
/// `ℒ` is diagonal there with entries `-(a+b)/2`; only the coupling
/// `C w = v^G·∇w + v^w·∇G` is assembled by quadrature. It does not depend on
/// `α`, so one assembly serves every `α`.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    basis_n: usize,
    coupling: DMatrix<f64>,
}

impl LinearizedOperator {
    pub fn assemble(basis_n: usize) -> Result<Self> {
        if basis_n < 2 {
            return Err(Error::Domain(format!("basis size must be at least 2, got {basis_n}")));
        }
        let nb = basis_n;
        let grid = spectrum_grid(nb)?;
        let n = grid.n();
        let xs = grid.coords();
        let e = hermite_1d(nb + 1, &xs);
        let dual = hermite_dual_1d(nb, &xs);
        let area = grid.cell_area();
        let vg = Array2::from_shape_fn((n, n), |(i, j)| velocity_profile([xs[i], xs[j]]));
        let gg = Array2::from_shape_fn((n, n), |(i, j)| gaussian_gradient([xs[i], xs[j]]));
        let project = |f: &Array2<f64>| -> Array2<f64> { dual.dot(f).dot(&dual.t()) * area };
        let mode = |a: usize, b: usize| -> Array2<f64> {
            Array2::from_shape_fn((n, n), |(i, j)| e[[a, i]] * e[[b, j]])
        };
        let mut coupling = DMatrix::zeros(nb * nb, nb * nb);
        for a in 0..nb {
            for b in 0..nb {
                // ∂₁e_ab = √((a+1)/2) e_{a+1,b}
                let ca = ((a + 1) as f64 / 2.0).sqrt();
                let cb = ((b + 1) as f64 / 2.0).sqrt();
                let w = ScalarField::new(&grid, mode(a, b))?;
                let u = velocity_free_space(&w)?;
                let (ux, uy) = (u.x.values(), u.y.values());
                let f = Array2::from_shape_fn((n, n), |(i, j)| {
                    let v = vg[[i, j]];
                    let g = gg[[i, j]];
                    v[0] * ca * e[[a + 1, i]] * e[[b, j]]
                        + v[1] * cb * e[[a, i]] * e[[b + 1, j]]
                        + ux[[i, j]] * g[0]
                        + uy[[i, j]] * g[1]
                });
                let col = project(&f);
                let k = index(nb, a, b);
                for c in 0..nb {
                    for d in 0..nb {
                        coupling[(index(nb, c, d), k)] = col[[c, d]];
                    }
                }
            }
        }
        Ok(LinearizedOperator { basis_n, coupling })
    }

    pub fn basis_n(&self) -> usize {
        self.basis_n
    }

    /// `C`, indexed by `a N + b`.
    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    fn order(&self, k: usize) -> usize {
        k / self.basis_n + k % self.basis_n
    }

    /// Basis indices kept: all, or all but `(0, 0)`.
    fn kept(&self, mean_zero: bool) -> Vec<usize> {
        let start = usize::from(mean_zero);
        (start..self.basis_n * self.basis_n).collect()
    }

    fn block(&self, alpha: f64, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| {
            let (i, j) = (idx[r], idx[c]);
            let diag = if i == j { -(self.order(i) as f64) / 2.0 } else { 0.0 };
            diag - alpha * self.coupling[(i, j)]
        })
    }

    /// Dense `Λ_α` on the kept basis functions.
    pub fn matrix(&self, alpha: f64, mean_zero: bool) -> DMatrix<f64> {
        self.block(alpha, &self.kept(mean_zero))
    }

    /// Eigenvalues of `Λ_α` with the translation and scaling modes labeled.
    ///
    /// `ξ ↦ -ξ` commutes with `Λ_α`, so the even and odd total orders are
    /// diagonalized separately.
    pub fn spectrum(&self, alpha: f64, mean_zero: bool) -> Result<SpectrumReport> {
        let kept = self.kept(mean_zero);
        let (even, odd): (Vec<usize>, Vec<usize>) =
            kept.iter().partition(|&&k| self.order(k) % 2 == 0);
        let even_m = self.block(alpha, &even);
        let odd_m = self.block(alpha, &odd);
        let even_ev = eigenvalues(even_m)?;
        let odd_ev = eigenvalues(odd_m.clone())?;

        let mut labeled_modes = Vec::new();
        if let Some(ev) = nearest_in(&odd_ev, Complex::new(-0.5, 0.0)) {
            let t1 = odd.iter().position(|&k| k == index(self.basis_n, 1, 0));
            let t2 = odd.iter().position(|&k| k == index(self.basis_n, 0, 1));
            let correlation = match (t1, t2) {
                (Some(p), Some(q)) => Some(translation_correlation(&odd_m, ev.re, p, q)?),
                _ => None,
            };
            labeled_modes.push(LabeledMode {
                label: ModeLabel::Translation,
                eigenvalue: ev,
                correlation,
            });
        }
        if let Some(ev) = nearest_in(&even_ev, Complex::new(-1.0, 0.0)) {
            labeled_modes.push(LabeledMode {
                label: ModeLabel::Scaling,
                eigenvalue: ev,
                correlation: None,
            });
        }

        let mut eigenvalues: Vec<Complex<f64>> = even_ev.into_iter().chain(odd_ev).collect();
        eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        Ok(SpectrumReport {
            alpha,
            basis_n: self.basis_n,
            mean_zero,
            eigenvalues,
            labeled_modes,
        })
    }
}

fn eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let dim = m.nrows();
    let schur = Schur::try_new(m, f64::EPSILON, 1000 * dim)
        .ok_or_else(|| Error::Convergence(format!("Schur iteration on a {dim}x{dim} block")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

fn nearest_in(values: &[Complex<f64>], z: Complex<f64>) -> Option<Complex<f64>> {
    values
        .iter()
        .copied()
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
}

/// Inverse iteration near `shift`; returns the fraction of the resulting
/// vector's norm carried by basis entries `p` and `q`.
fn translation_correlation(m: &DMatrix<f64>, shift: f64, p: usize, q: usize) -> Result<f64> {
    let dim = m.nrows();
    // offset keeps the shifted matrix invertible when the eigenvalue is exact
    let sigma = shift + 1e-7 * shift.abs().max(1.0);
    let shifted = m - DMatrix::identity(dim, dim) * sigma;
    let lu = shifted.lu();
    let mut x = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    for _ in 0..6 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::Convergence("singular matrix in inverse iteration".into()))?;
        let nrm = x.norm();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::Convergence("inverse iteration lost the vector".into()));
        }
        x /= nrm;
    }
    Ok((x[p] * x[p] + x[q] * x[q]).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeLabel {
    /// `∂₁G`, `∂₂G`, eigenvalue `-1/2` for every `α`.
    Translation,
    /// Eigenvalue nearest `-1`.
    Scaling,
}

impl ModeLabel {
    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::Translation => "translation",
            ModeLabel::Scaling => "scaling",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledMode {
    pub label: ModeLabel,
    pub eigenvalue: Complex<f64>,
    /// Share of the eigenvector in `span{e_10, e_01}` (translation only).
    pub correlation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub alpha: f64,
    pub basis_n: usize,
    pub mean_zero: bool,
    /// Sorted by descending real part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub labeled_modes: Vec<LabeledMode>,
}

impl SpectrumReport {
    pub fn max_real(&self) -> f64 {
        self.eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re)
    }

    pub fn nearest(&self, z: Complex<f64>) -> Option<Complex<f64>> {
        nearest_in(&self.eigenvalues, z)
    }

    /// Number of eigenvalues within `tol` of `z`.
    pub fn multiplicity(&self, z: Complex<f64>, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|&&w| (w - z).norm() <= tol).count()
    }

    pub fn mode(&self, label: ModeLabel) -> Option<&LabeledMode> {
        self.labeled_modes.iter().find(|m| m.label == label)
    }

    fn label_of(&self, z: Complex<f64>) -> &'static str {
        self.labeled_modes
            .iter()
            .find(|m| (m.eigenvalue - z).norm() <= 1e-6)
            .map_or("", |m| m.label.name())
    }
}

/// `linearized_spectrum`: assemble and diagonalize in one call.
pub fn linearized_spectrum(alpha: f64, basis_n: usize, mean_zero: bool) -> Result<SpectrumReport> {
    if basis_n < 16 {
        return Err(Error::Domain(format!("basis size must be at least 16, got {basis_n}")));
    }
    LinearizedOperator::assemble(basis_n)?.spectrum(alpha, mean_zero)
}

/// `spectrum.csv`: `alpha,re,im,label`, one row per eigenvalue.
pub fn write_spectrum_csv(path: &Path, reports: &[SpectrumReport]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "alpha,re,im,label")?;
    for r in reports {
        for z in &r.eigenvalues {
            writeln!(w, "{},{:e},{:e},{}", r.alpha, z.re, z.im, r.label_of(*z))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_columns(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect())
}

/// Writes `plots.gp` in `dir`, with one PNG plot per known CSV present.
pub fn write_plot_script(dir: &Path) -> Result<PathBuf> {
    let mut script = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n",
    );
    let mut plot = |name: &str, body: String| {
        script.push_str(&format!("\nset output '{}.png'\n{body}\nunset logscale\n", name));
    };
    if dir.join("oseen_distance.csv").exists() {
        plot(
            "oseen_distance",
            "set logscale xy\nset xlabel 't'\nplot 'oseen_distance.csv' using 1:3 with linespoints".into(),
        );
    }
    for (file, name) in [("contraction.csv", "contraction"), ("localized.csv", "localized")] {
        let path = dir.join(file);
        if path.exists() {
            let cols = csv_columns(&path)?.len();
            plot(
                name,
                format!("set logscale xy\nset xlabel 't'\nplot for [c=2:{cols}] '{file}' using 1:c with lines"),
            );
        }
    }
    if dir.join("spectrum.csv").exists() {
        plot(
            "spectrum",
            "set xlabel 'Re'\nset ylabel 'Im'\nplot 'spectrum.csv' using 2:3 with points pt 7 ps 0.5".into(),
        );
    }
    if dir.join("series.csv").exists() {
        plot(
            "series",
            "set logscale y\nplot 'series.csv' using 2:3 with lines, '' using 2:4 with lines".into(),
        );
    }
    let path = dir.join("plots.gp");
    fs::write(&path, script)?;
    Ok(path)
}
