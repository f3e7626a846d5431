//! Plain covariance-matrix algebra used as an oracle. Quadratures are
//! ordered `(x0, p0, x1, p1, ...)` and the vacuum has variance 1/2.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn omega(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| match (r % 2, r / 2 == c / 2, c % 2) {
        (0, true, 1) => 1.0,
        (1, true, 0) => -1.0,
        _ => 0.0,
    })
}

pub fn vacuum(n: usize) -> DMatrix<f64> {
    DMatrix::identity(2 * n, 2 * n) * 0.5
}

/// `(x_a, p_a, x_b, p_b, X_1, P_1, X_2, P_2)` two-cell pulse, plus cell `a`,
/// minus cell `b`, written on a full `2n`-dimensional phase space.
pub fn pulse(n: usize, a: usize, b: usize, l1: usize, l2: usize, kappa: f64) -> DMatrix<f64> {
    let k = kappa / 2f64.sqrt();
    let mut s = DMatrix::identity(2 * n, 2 * n);
    let (xa, pa, xb, pb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
    s[(2 * l1, pa)] += k;
    s[(2 * l1, xb)] += k;
    s[(2 * l2, xa)] += k;
    s[(2 * l2, pb)] += k;
    s[(xa, 2 * l1 + 1)] += k;
    s[(pb, 2 * l1 + 1)] -= k;
    s[(pa, 2 * l2 + 1)] -= k;
    s[(xb, 2 * l2 + 1)] += k;
    s
}

/// Single-mode QND `X_L += κ P_A`, `X_A += κ P_L`.
pub fn qnd(n: usize, atom: usize, light: usize, kappa: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * n, 2 * n);
    s[(2 * light, 2 * atom + 1)] = kappa;
    s[(2 * atom, 2 * light + 1)] = kappa;
    s
}

pub fn sandwich(s: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    s * c * s.transpose()
}

/// Gaussian conditioning of `(mean, cov)` on quadrature `k` taking `value`;
/// nothing is removed.
pub fn condition(mean: &DVector<f64>, cov: &DMatrix<f64>, k: usize, value: f64) -> (DVector<f64>, DMatrix<f64>) {
    let col = cov.column(k).into_owned();
    let v = cov[(k, k)];
    (mean + &col * ((value - mean[k]) / v), cov - &col * col.transpose() / v)
}

/// Sub-matrix on the listed quadratures.
pub fn select(cov: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| cov[(idx[r], idx[c])])
}

/// Quadrature indices of the listed modes.
pub fn quads(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

/// `uᵀ C u`.
pub fn form(cov: &DMatrix<f64>, u: &[f64]) -> f64 {
    let u = DVector::from_column_slice(u);
    (u.transpose() * cov * &u)[(0, 0)]
}
