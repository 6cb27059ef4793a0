#![allow(dead_code)]

use epsteer::hamiltonian::{ParameterPoint, C64};
use nalgebra::{DMatrix, DVector};

/// Roots of `ω² = z² + 1` with `z = x + iy`, sorted by imaginary part
/// descending, real part descending on ties.
pub fn quadratic_eigenvalues(p: ParameterPoint) -> [C64; 2] {
    let z = C64::new(p.x, p.y);
    let s = (z * z + 1.0).sqrt();
    let mut w = [s, -s];
    w.sort_by(|a, b| b.im.total_cmp(&a.im).then(b.re.total_cmp(&a.re)));
    w
}

pub fn builtin_matrix(p: ParameterPoint) -> DMatrix<C64> {
    let z = C64::new(p.x, p.y);
    let one = C64::new(1.0, 0.0);
    DMatrix::from_row_slice(2, 2, &[z, one, one, -z])
}

/// `exp(−iH dt)·psi` by a dense Padé matrix exponential.
pub fn dense_propagate(h: &DMatrix<C64>, psi: &DVector<C64>, dt: f64) -> DVector<C64> {
    let a = h * C64::new(0.0, -dt);
    a.exp() * psi
}

pub fn relative_error(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn near_builtin_ep(p: ParameterPoint, radius: f64) -> bool {
    p.distance(&ParameterPoint::new(0.0, 1.0)) < radius || p.distance(&ParameterPoint::new(0.0, -1.0)) < radius
}

pub fn max_abs<'a>(entries: impl IntoIterator<Item = &'a C64>) -> f64 {
    entries.into_iter().map(|c| c.norm()).fold(0.0, f64::max)
}
