//! Parametric non-Hermitian Hamiltonians and their biorthonormal eigensystems.
//!
//! A [`HamiltonianFamily`] maps a point of the two-dimensional parameter plane
//! to a complex square matrix. The eigensystem of that matrix is returned with
//! eigenvalues sorted by decreasing imaginary part (ties broken by decreasing
//! real part), unit-norm right eigenvectors and left covectors normalized so
//! that `⟨θ_m|ψ_n⟩ = δ_mn`.
//!
//! Exceptional points are found as zeros of the discriminant of the
//! characteristic polynomial, which vanishes exactly where two eigenvalues
//! coalesce.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default exclusion radius around exceptional points, in parameter distance.
pub const EP_EXCLUSION_RADIUS: f64 = 1e-6;

/// Default bound on the condition number of the eigenvector matrix.
pub const DEFAULT_COND_BOUND: f64 = 1e8;

/// Relative tolerance under which two imaginary parts count as tied.
const IM_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterPoint {
    pub x: f64,
    pub y: f64,
}

impl ParameterPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for ParameterPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A map from the parameter plane to `N × N` complex matrices.
pub trait HamiltonianFamily: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    /// Matrix at `p`. Callers are expected to have checked that `p` is finite.
    fn matrix_at(&self, p: ParameterPoint) -> DMatrix<C64>;

    fn evaluate(&self, p: ParameterPoint) -> Result<DMatrix<C64>> {
        if !p.is_finite() {
            return Err(Error::invalid(format!("non-finite parameter point {p}")));
        }
        Ok(self.matrix_at(p))
    }
}

/// Two coupled modes with detuning `x` and gain/loss contrast `y`:
/// `[[x + iy, 1], [1, -x - iy]]`.
///
/// Exceptional points sit at `(0, ±1)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoupledGainLoss;

impl HamiltonianFamily for CoupledGainLoss {
    fn dimension(&self) -> usize {
        2
    }

    fn matrix_at(&self, p: ParameterPoint) -> DMatrix<C64> {
        let z = C64::new(p.x, p.y);
        let one = C64::new(1.0, 0.0);
        DMatrix::from_row_slice(2, 2, &[z, one, one, -z])
    }
}

/// `H(x, y) = H₀ + x·Hₓ + y·H_y` for user supplied complex matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    constant: DMatrix<C64>,
    along_x: DMatrix<C64>,
    along_y: DMatrix<C64>,
}

impl AffineFamily {
    pub fn new(constant: DMatrix<C64>, along_x: DMatrix<C64>, along_y: DMatrix<C64>) -> Result<Self> {
        let n = constant.nrows();
        if n < 2 {
            return Err(Error::invalid("family dimension must be at least 2"));
        }
        for (name, m) in [("constant", &constant), ("x", &along_x), ("y", &along_y)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::invalid(format!(
                    "matrix `{name}` is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::invalid(format!("matrix `{name}` has non-finite entries")));
            }
        }
        Ok(Self {
            constant,
            along_x,
            along_y,
        })
    }
}

impl HamiltonianFamily for AffineFamily {
    fn dimension(&self) -> usize {
        self.constant.nrows()
    }

    fn matrix_at(&self, p: ParameterPoint) -> DMatrix<C64> {
        &self.constant
            + &self.along_x * C64::new(p.x, 0.0)
            + &self.along_y * C64::new(p.y, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Upper bound on the eigenvector-matrix condition number.
    pub cond_bound: f64,
    /// Exclusion radius around exceptional points (parameter distance). Also
    /// used as the relative eigenvalue separation below which a matrix is
    /// treated as defective.
    pub ep_radius: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            cond_bound: DEFAULT_COND_BOUND,
            ep_radius: EP_EXCLUSION_RADIUS,
        }
    }
}

/// Sorted eigenvalues with paired right vectors and left covectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem {
    point: Option<ParameterPoint>,
    eigenvalues: Vec<C64>,
    /// Column `n` is `|ψ_n⟩`.
    right: DMatrix<C64>,
    /// Row `n` is `⟨θ_n|`.
    left: DMatrix<C64>,
    condition: f64,
}

impl Eigensystem {
    pub fn point(&self) -> Option<ParameterPoint> {
        self.point
    }

    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn right_vector(&self, n: usize) -> DVector<C64> {
        self.right.column(n).into_owned()
    }

    /// The covector `⟨θ_n|` as a plain coefficient vector (already conjugated:
    /// `⟨θ_n|v⟩ = Σ_k θ[k]·v[k]`).
    pub fn left_covector(&self, n: usize) -> DVector<C64> {
        self.left.row(n).transpose()
    }

    pub fn right_matrix(&self) -> &DMatrix<C64> {
        &self.right
    }

    pub fn left_matrix(&self) -> &DMatrix<C64> {
        &self.left
    }

    /// Condition number of the right eigenvector matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `Σ_n ω_n |ψ_n⟩⟨θ_n|`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.right * d * &self.left
    }

    /// Projections `⟨θ_n|v⟩` of `v` on every eigenvector.
    pub fn project(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.left * v
    }

    /// Multiplies `|ψ_n⟩` by `phases[n]` and `⟨θ_n|` by its inverse. Physical
    /// quantities are unchanged; only the gauge moves.
    pub fn regauged(&self, phases: &[C64]) -> Result<Eigensystem> {
        if phases.len() != self.dimension() {
            return Err(Error::invalid("one phase per eigenvector required"));
        }
        let mut out = self.clone();
        for (n, ph) in phases.iter().enumerate() {
            if (ph.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("gauge factors must have unit modulus"));
            }
            let mut col = out.right.column_mut(n);
            col *= *ph;
            let mut row = out.left.row_mut(n);
            row *= ph.conj();
        }
        Ok(out)
    }

    fn with_point(mut self, p: ParameterPoint) -> Self {
        self.point = Some(p);
        self
    }
}

/// Diagonalizes `matrix`.
///
/// When `previous` is given, each right vector is rotated so that its overlap
/// with the same-index vector of `previous` is real and non-negative;
/// otherwise the first largest-modulus component is made real positive.
pub fn eigensystem(
    matrix: &DMatrix<C64>,
    previous: Option<&Eigensystem>,
    opts: &EigenOptions,
) -> Result<Eigensystem> {
    let n = matrix.nrows();
    if n < 2 || matrix.ncols() != n {
        return Err(Error::invalid(format!(
            "expected a square matrix of size >= 2, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    if let Some(prev) = previous {
        if prev.dimension() != n {
            return Err(Error::invalid("previous eigensystem has a different dimension"));
        }
    }

    let (values, vectors) = if n == 2 {
        eig_2x2(matrix, opts)?
    } else {
        eig_dense(matrix, opts)?
    };

    // Sort eigenpairs.
    let scale = values.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    let order = sorted_order(&values, IM_TIE_TOL * scale);
    let eigenvalues: Vec<C64> = order.iter().map(|&k| values[k]).collect();
    let mut right = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = vectors.column(src).into_owned();
        let norm = v.norm();
        v /= C64::new(norm, 0.0);
        let phase = match previous {
            Some(prev) => {
                let overlap = prev.right.column(dst).dotc(&v);
                if overlap.norm() > 0.0 {
                    overlap.conj() / overlap.norm()
                } else {
                    standalone_phase(&v)
                }
            }
            None => standalone_phase(&v),
        };
        v *= phase;
        right.set_column(dst, &v);
    }

    let condition = condition_number(&right);
    if !condition.is_finite() || condition > opts.cond_bound {
        return Err(Error::Degeneracy {
            point: None,
            reason: format!(
                "eigenvector condition number {condition:.3e} exceeds bound {:.3e}",
                opts.cond_bound
            ),
        });
    }
    let left = invert(&right).ok_or_else(|| Error::Degeneracy {
        point: None,
        reason: "eigenvector matrix is singular".into(),
    })?;

    Ok(Eigensystem {
        point: None,
        eigenvalues,
        right,
        left,
        condition,
    })
}

/// [`eigensystem`] of `family` at `p`; errors name the offending point.
pub fn eigensystem_at(
    family: &dyn HamiltonianFamily,
    p: ParameterPoint,
    previous: Option<&Eigensystem>,
    opts: &EigenOptions,
) -> Result<Eigensystem> {
    let m = family.evaluate(p)?;
    match eigensystem(&m, previous, opts) {
        Ok(es) => Ok(es.with_point(p)),
        Err(Error::Degeneracy { reason, .. }) => Err(Error::Degeneracy {
            point: Some(p),
            reason,
        }),
        Err(e) => Err(e),
    }
}

/// Compares by imaginary part (descending), then real part (descending).
pub fn eigen_order(a: &C64, b: &C64, tie_tol: f64) -> Ordering {
    if (a.im - b.im).abs() > tie_tol {
        b.im.total_cmp(&a.im)
    } else {
        b.re.total_cmp(&a.re)
    }
}

fn sorted_order(values: &[C64], tie_tol: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[j]
            .im
            .total_cmp(&values[i].im)
            .then(values[j].re.total_cmp(&values[i].re))
    });
    // Near-ties in Im are resolved by Re; a bounded bubble pass keeps the
    // comparator out of `sort_by`, which requires a strict total order.
    for _ in 0..values.len() {
        let mut swapped = false;
        for k in 0..idx.len() - 1 {
            let (a, b) = (values[idx[k]], values[idx[k + 1]]);
            if eigen_order(&a, &b, tie_tol) == Ordering::Greater {
                idx.swap(k, k + 1);
                swapped = true;
            }
        }
        if !swapped {
            break;
        }
    }
    idx
}

fn standalone_phase(v: &DVector<C64>) -> C64 {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (k, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mod {
            best_mod = m;
            best = k;
        }
    }
    let z = v[best];
    if z.norm() == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        z.conj() / z.norm()
    }
}

fn check_separation(values: &[C64], opts: &EigenOptions) -> Result<()> {
    let scale = values.iter().map(|z| z.norm()).fold(1.0_f64, f64::max);
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let sep = (values[i] - values[j]).norm();
            if sep <= opts.ep_radius * scale {
                return Err(Error::Degeneracy {
                    point: None,
                    reason: format!(
                        "eigenvalues {} and {} coalesce (separation {sep:.3e})",
                        values[i], values[j]
                    ),
                });
            }
        }
    }
    Ok(())
}

fn eig_2x2(m: &DMatrix<C64>, opts: &EigenOptions) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let diff = a - d;
    let root = (diff * diff + b * c * 4.0).sqrt();
    let half = C64::new(0.5, 0.0);
    let values = vec![(a + d + root) * half, (a + d - root) * half];
    check_separation(&values, opts)?;

    let mut vectors = DMatrix::<C64>::zeros(2, 2);
    for (k, &lambda) in values.iter().enumerate() {
        let u = [b, lambda - a];
        let w = [lambda - d, c];
        let nu = u[0].norm_sqr() + u[1].norm_sqr();
        let nw = w[0].norm_sqr() + w[1].norm_sqr();
        let v = if nu >= nw { u } else { w };
        if nu.max(nw) == 0.0 {
            return Err(Error::Degeneracy {
                point: None,
                reason: "matrix is a multiple of the identity".into(),
            });
        }
        vectors[(0, k)] = v[0];
        vectors[(1, k)] = v[1];
    }
    Ok((values, vectors))
}

fn eig_dense(m: &DMatrix<C64>, opts: &EigenOptions) -> Result<(Vec<C64>, DMatrix<C64>)> {
    let n = m.nrows();
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-14, 10_000).ok_or_else(|| {
        Error::Degeneracy {
            point: None,
            reason: "Schur iteration did not converge".into(),
        }
    })?;
    let (q, t) = schur.unpack();
    let tnorm = t.norm().max(1.0);
    for j in 0..n {
        for i in j + 1..n {
            if t[(i, j)].norm() > 1e-10 * tnorm {
                return Err(Error::Degeneracy {
                    point: None,
                    reason: "Schur form is not triangular".into(),
                });
            }
        }
    }
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    check_separation(&values, opts)?;

    // Eigenvectors of the triangular factor by back substitution.
    let tiny = f64::EPSILON * tnorm;
    let mut y = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lambda = values[k];
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut denom = t[(i, i)] - lambda;
            if denom.norm() < tiny {
                denom = C64::new(tiny, 0.0);
            }
            y[(i, k)] = -acc / denom;
        }
    }
    Ok((values, q * y))
}

fn condition_number(v: &DMatrix<C64>) -> f64 {
    if v.nrows() == 2 {
        let det = (v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)]).norm();
        let fro = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if det == 0.0 {
            return f64::INFINITY;
        }
        let s1_sq = 0.5 * (fro + (fro * fro - 4.0 * det * det).max(0.0).sqrt());
        return s1_sq / det;
    }
    let sv = v.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn invert(v: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    if v.nrows() == 2 {
        let det = v[(0, 0)] * v[(1, 1)] - v[(0, 1)] * v[(1, 0)];
        if det.norm() == 0.0 {
            return None;
        }
        let inv = DMatrix::from_row_slice(
            2,
            2,
            &[v[(1, 1)] / det, -v[(0, 1)] / det, -v[(1, 0)] / det, v[(0, 0)] / det],
        );
        return Some(inv);
    }
    v.clone().try_inverse()
}

/// Discriminant of the characteristic polynomial of `m` (up to a nonzero
/// constant factor). Vanishes exactly where two eigenvalues coalesce.
pub fn discriminant(m: &DMatrix<C64>) -> C64 {
    let n = m.nrows();
    if n == 2 {
        let diff = m[(0, 0)] - m[(1, 1)];
        return diff * diff + m[(0, 1)] * m[(1, 0)] * 4.0;
    }
    // Characteristic polynomial by Faddeev-LeVerrier; coeffs[k] multiplies λ^k.
    let mut coeffs = vec![C64::new(0.0, 0.0); n + 1];
    coeffs[n] = C64::new(1.0, 0.0);
    let identity = DMatrix::<C64>::identity(n, n);
    let mut mk = DMatrix::<C64>::zeros(n, n);
    for k in 1..=n {
        mk = m * &mk + &identity * coeffs[n - k + 1];
        let amk = m * &mk;
        coeffs[n - k] = -amk.trace() / (k as f64);
    }
    let deriv: Vec<C64> = (1..=n).map(|k| coeffs[k] * (k as f64)).collect();
    // Sylvester matrix of p (degree n) and p' (degree n - 1).
    let size = 2 * n - 1;
    let mut syl = DMatrix::<C64>::zeros(size, size);
    for row in 0..n - 1 {
        for (k, c) in coeffs.iter().rev().enumerate() {
            syl[(row, row + k)] = *c;
        }
    }
    for row in 0..n {
        for (k, c) in deriv.iter().rev().enumerate() {
            syl[(n - 1 + row, row + k)] = *c;
        }
    }
    syl.determinant()
}

/// Axis-aligned rectangle of the parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.x_min, self.x_max, self.y_min, self.y_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("region bounds must be finite"));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::invalid("region must have positive width and height"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ParameterPoint, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }

    /// Smallest region holding all `points`, grown by `margin` on every side.
    pub fn bounding(points: &[ParameterPoint], margin: f64) -> Result<Region> {
        if points.is_empty() {
            return Err(Error::invalid("no points to bound"));
        }
        let mut r = Region::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in points {
            r.x_min = r.x_min.min(p.x);
            r.x_max = r.x_max.max(p.x);
            r.y_min = r.y_min.min(p.y);
            r.y_max = r.y_max.max(p.y);
        }
        r.x_min -= margin;
        r.x_max += margin;
        r.y_min -= margin;
        r.y_max += margin;
        Ok(r)
    }
}

const EP_SEED_GRID: usize = 48;
const EP_LOCATION_TOL: f64 = 1e-9;

/// Exceptional points of `family` inside `region`.
///
/// The discriminant is sampled on a grid; every local minimum of its modulus
/// seeds a damped Newton iteration on `(Re D, Im D)` with a finite-difference
/// Jacobian. Converged zeros inside the region are returned, deduplicated and
/// sorted by `(x, y)`.
pub fn locate_eps(family: &dyn HamiltonianFamily, region: &Region) -> Result<Vec<ParameterPoint>> {
    region.validate()?;
    let nx = EP_SEED_GRID;
    let ny = EP_SEED_GRID;
    let xs: Vec<f64> = (0..=nx)
        .map(|i| region.x_min + (region.x_max - region.x_min) * i as f64 / nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|i| region.y_min + (region.y_max - region.y_min) * i as f64 / ny as f64)
        .collect();
    let disc = |x: f64, y: f64| discriminant(&family.matrix_at(ParameterPoint::new(x, y)));

    let mut grid = vec![vec![0.0; ny + 1]; nx + 1];
    let mut max_abs = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let v = disc(x, y).norm();
            grid[i][j] = v;
            max_abs = max_abs.max(v);
        }
    }
    let accept = 1e-9 * max_abs.max(1.0);
    let span = (region.x_max - region.x_min).max(region.y_max - region.y_min);

    let mut found: Vec<ParameterPoint> = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let v = grid[i][j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii > nx as i64 || jj > ny as i64 {
                        continue;
                    }
                    if grid[ii as usize][jj as usize] < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            if let Some(p) = newton_on_discriminant(&disc, xs[i], ys[j], span, accept) {
                if region.contains(&p, 1e-12)
                    && !found.iter().any(|q| q.distance(&p) < 10.0 * EP_LOCATION_TOL)
                {
                    found.push(p);
                }
            }
        }
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Ok(found)
}

fn newton_on_discriminant(
    disc: &dyn Fn(f64, f64) -> C64,
    x0: f64,
    y0: f64,
    span: f64,
    accept: f64,
) -> Option<ParameterPoint> {
    let (mut x, mut y) = (x0, y0);
    let mut f = disc(x, y);
    let h = 1e-7 * span.max(1.0);
    for _ in 0..80 {
        if f.norm() == 0.0 {
            return Some(ParameterPoint::new(x, y));
        }
        let fx = (disc(x + h, y) - disc(x - h, y)) / (2.0 * h);
        let fy = (disc(x, y + h) - disc(x, y - h)) / (2.0 * h);
        // Solve [[fx.re, fy.re], [fx.im, fy.im]] [dx, dy] = -[f.re, f.im].
        let det = fx.re * fy.im - fy.re * fx.im;
        if det.abs() < 1e-300 {
            return None;
        }
        let dx = -(f.re * fy.im - fy.re * f.im) / det;
        let dy = -(fx.re * f.im - f.re * fx.im) / det;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (nx, ny) = (x + t * dx, y + t * dy);
            let nf = disc(nx, ny);
            if nf.norm() < f.norm() || t * (dx.hypot(dy)) < 1e-15 * span.max(1.0) {
                x = nx;
                y = ny;
                f = nf;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        if (t * dx).hypot(t * dy) < 1e-14 * span.max(1.0) {
            break;
        }
        if x.abs() > 1e6 || y.abs() > 1e6 {
            return None;
        }
    }
    (f.norm() <= accept).then(|| ParameterPoint::new(x, y))
}

/// Fails if any point lies within `ep_radius` of an exceptional point.
pub fn check_ep_clearance(
    family: &dyn HamiltonianFamily,
    points: &[ParameterPoint],
    ep_radius: f64,
) -> Result<Vec<ParameterPoint>> {
    let region = Region::bounding(points, (10.0 * ep_radius).max(1e-3))?;
    let eps = locate_eps(family, &region)?;
    for p in points {
        for ep in &eps {
            if p.distance(ep) < ep_radius {
                return Err(Error::Degeneracy {
                    point: Some(*p),
                    reason: format!("within {ep_radius:e} of exceptional point {ep}"),
                });
            }
        }
    }
    Ok(eps)
}

/// Evenly spaced samples; a single sample sits at `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::invalid(format!("axis {name} has invalid bounds")));
        }
        if self.count == 0 {
            return Err(Error::invalid(format!("axis {name} needs at least one sample")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SheetGrid {
    pub x: Axis,
    pub y: Axis,
}

impl Default for SheetGrid {
    fn default() -> Self {
        Self {
            x: Axis::new(-1.5, 1.5, 60),
            y: Axis::new(-0.5, 2.5, 60),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SheetNode {
    pub point: ParameterPoint,
    pub eigenvalues: Vec<C64>,
}

/// Sorted eigenvalues at every node of `grid` (row-major in `y`, then `x`).
pub fn sheet_sample(
    family: &dyn HamiltonianFamily,
    grid: &SheetGrid,
    opts: &EigenOptions,
) -> Result<Vec<SheetNode>> {
    grid.x.validate("x")?;
    grid.y.validate("y")?;
    let xs = grid.x.values();
    let ys = grid.y.values();
    let mut points = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            points.push(ParameterPoint::new(x, y));
        }
    }
    check_ep_clearance(family, &points, opts.ep_radius)?;
    points
        .into_iter()
        .map(|p| {
            let es = eigensystem_at(family, p, None, opts)?;
            Ok(SheetNode {
                point: p,
                eigenvalues: es.eigenvalues().to_vec(),
            })
        })
        .collect()
}
