//! Exact Gaussian-state engine.
//!
//! A [`GaussianState`] is a list of labelled bosonic modes described by the
//! first and second moments of their quadratures. Quadratures are ordered
//! `(X0, P0, X1, P1, ...)` and use the `[X, P] = i` convention, so every
//! vacuum quadrature has variance 1/2.
//!
//! All operations take `&self` and return a new state. Measurement removes
//! the measured mode from the state.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// Variance of either quadrature of the vacuum.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Default slack for the uncertainty-relation check.
pub const PHYSICALITY_TOLERANCE: f64 = 1e-10;

/// A measured quadrature with variance at or below this is treated as sharp.
const DEGENERATE_VARIANCE: f64 = 1e-14;

/// Index of a mode inside a [`GaussianState`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeRef(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quadrature {
    X,
    P,
}

impl Quadrature {
    fn offset(self) -> usize {
        match self {
            Quadrature::X => 0,
            Quadrature::P => 1,
        }
    }
}

impl ModeRef {
    pub fn index(self) -> usize {
        self.0
    }

    fn quad(self, q: Quadrature) -> usize {
        2 * self.0 + q.offset()
    }
}

/// Result of a homodyne measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementOutcome {
    pub value: f64,
    pub measured_mode: ModeRef,
    pub quadrature: Quadrature,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    labels: Vec<String>,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Vacuum on `n_modes` modes labelled `m0, m1, ...`.
pub fn vacuum_state(n_modes: usize) -> Result<GaussianState> {
    GaussianState::vacuum(n_modes)
}

/// The symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]` on `n_modes` modes.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for m in 0..n_modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// QND coupling on `(X_A, P_A, X_L, P_L)`:
/// `X_L += κ P_A`, `X_A += κ P_L`, momenta unchanged.
pub fn qnd_matrix(kappa: f64) -> Matrix4<f64> {
    let mut s = Matrix4::identity();
    s[(2, 1)] = kappa;
    s[(0, 3)] = kappa;
    s
}

impl GaussianState {
    pub fn vacuum(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return invalid("a state needs at least one mode");
        }
        Self::vacuum_labeled((0..n_modes).map(|m| format!("m{m}")))
    }

    pub fn vacuum_labeled<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return invalid("a state needs at least one mode");
        }
        let dim = 2 * labels.len();
        Ok(Self { labels, mean: DVector::zeros(dim), cov: DMatrix::identity(dim, dim) * VACUUM_VARIANCE })
    }

    /// Builds a state from explicit moments. The covariance must be symmetric
    /// to 1e-12 relative; it is not checked against the uncertainty relation
    /// (see [`GaussianState::check_physical`]).
    pub fn from_moments(labels: Vec<String>, mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * labels.len();
        if labels.is_empty() {
            return invalid("a state needs at least one mode");
        }
        if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
            return invalid(format!(
                "moment sizes ({}, {}x{}) do not match {} modes",
                mean.len(),
                cov.nrows(),
                cov.ncols(),
                labels.len()
            ));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return invalid("moments must be finite");
        }
        let scale = cov.amax().max(f64::MIN_POSITIVE);
        if (&cov - cov.transpose()).amax() > 1e-12 * scale {
            return invalid("covariance matrix is not symmetric");
        }
        let mut state = Self { labels, mean, cov };
        state.symmetrize();
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Looks a mode up by label.
    pub fn mode(&self, label: &str) -> Option<ModeRef> {
        self.labels.iter().position(|l| l == label).map(ModeRef)
    }

    fn check_mode(&self, mode: ModeRef) -> Result<()> {
        if mode.0 < self.n_modes() {
            Ok(())
        } else {
            invalid(format!("mode index {} out of range for {} modes", mode.0, self.n_modes()))
        }
    }

    /// Appends a vacuum mode; the new mode gets the last index.
    pub fn with_vacuum_mode(&self, label: impl Into<String>) -> Self {
        let dim = self.mean.len();
        let mut cov = DMatrix::zeros(dim + 2, dim + 2);
        cov.view_mut((0, 0), (dim, dim)).copy_from(&self.cov);
        cov[(dim, dim)] = VACUUM_VARIANCE;
        cov[(dim + 1, dim + 1)] = VACUUM_VARIANCE;
        let mut labels = self.labels.clone();
        labels.push(label.into());
        Self { labels, mean: self.mean.clone().resize_vertically(dim + 2, 0.0), cov }
    }

    pub fn mode_mean(&self, mode: ModeRef) -> Result<(f64, f64)> {
        self.check_mode(mode)?;
        Ok((self.mean[mode.quad(Quadrature::X)], self.mean[mode.quad(Quadrature::P)]))
    }

    /// The 2x2 covariance block of one mode.
    pub fn mode_cov(&self, mode: ModeRef) -> Result<Matrix2<f64>> {
        self.check_mode(mode)?;
        let i = mode.quad(Quadrature::X);
        Ok(self.cov.fixed_view::<2, 2>(i, i).into_owned())
    }

    pub fn quadrature_mean(&self, mode: ModeRef, q: Quadrature) -> Result<f64> {
        self.check_mode(mode)?;
        Ok(self.mean[mode.quad(q)])
    }

    pub fn quadrature_variance(&self, mode: ModeRef, q: Quadrature) -> Result<f64> {
        self.check_mode(mode)?;
        let i = mode.quad(q);
        Ok(self.cov[(i, i)])
    }

    pub fn quadrature_covariance(&self, a: (ModeRef, Quadrature), b: (ModeRef, Quadrature)) -> Result<f64> {
        self.check_mode(a.0)?;
        self.check_mode(b.0)?;
        Ok(self.cov[(a.0.quad(a.1), b.0.quad(b.1))])
    }

    /// Mean of the linear combination `Σ c_k q_k`.
    pub fn combination_mean(&self, terms: &[(ModeRef, Quadrature, f64)]) -> Result<f64> {
        let mut total = 0.0;
        for &(m, q, c) in terms {
            self.check_mode(m)?;
            total += c * self.mean[m.quad(q)];
        }
        Ok(total)
    }

    /// Variance of the linear combination `Σ c_k q_k`.
    pub fn combination_variance(&self, terms: &[(ModeRef, Quadrature, f64)]) -> Result<f64> {
        for &(m, _, _) in terms {
            self.check_mode(m)?;
        }
        let mut total = 0.0;
        for &(mi, qi, ci) in terms {
            for &(mj, qj, cj) in terms {
                total += ci * cj * self.cov[(mi.quad(qi), mj.quad(qj))];
            }
        }
        Ok(total)
    }

    /// Marginal state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[ModeRef]) -> Result<Self> {
        if modes.is_empty() {
            return invalid("reduced state needs at least one mode");
        }
        let mut idx = Vec::with_capacity(2 * modes.len());
        for (k, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..k].contains(&m) {
                return invalid(format!("mode {} listed twice", m.0));
            }
            idx.push(m.quad(Quadrature::X));
            idx.push(m.quad(Quadrature::P));
        }
        Ok(Self {
            labels: modes.iter().map(|m| self.labels[m.0].clone()).collect(),
            mean: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            cov: DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]),
        })
    }

    /// Drops a mode without measuring it.
    pub fn trace_out(&self, mode: ModeRef) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes() == 1 {
            return invalid("cannot trace out the only mode");
        }
        let keep: Vec<ModeRef> = (0..self.n_modes()).filter(|&m| m != mode.0).map(ModeRef).collect();
        self.reduced(&keep)
    }

    pub fn displace(&self, mode: ModeRef, dx: f64, dp: f64) -> Result<Self> {
        self.check_mode(mode)?;
        let mut out = self.clone();
        out.mean[mode.quad(Quadrature::X)] += dx;
        out.mean[mode.quad(Quadrature::P)] += dp;
        Ok(out)
    }

    /// Applies `matrix` to the quadratures of `modes` (in the listed order,
    /// `X` before `P`) and the identity elsewhere. The matrix is not required
    /// to be symplectic.
    fn transform(&self, modes: &[ModeRef], matrix: &DMatrix<f64>) -> Result<Self> {
        let k = 2 * modes.len();
        if matrix.nrows() != k || matrix.ncols() != k {
            return invalid(format!("expected a {k}x{k} matrix, got {}x{}", matrix.nrows(), matrix.ncols()));
        }
        let mut idx = Vec::with_capacity(k);
        for (pos, &m) in modes.iter().enumerate() {
            self.check_mode(m)?;
            if modes[..pos].contains(&m) {
                return invalid(format!("mode {} listed twice", m.0));
            }
            idx.push(m.quad(Quadrature::X));
            idx.push(m.quad(Quadrature::P));
        }
        let dim = self.mean.len();
        let mut s = DMatrix::identity(dim, dim);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                s[(i, j)] = matrix[(r, c)];
            }
        }
        let mut out = Self { labels: self.labels.clone(), mean: &s * &self.mean, cov: &s * &self.cov * s.transpose() };
        out.symmetrize();
        Ok(out)
    }

    /// Applies a symplectic matrix to the listed modes. Fails if `matrix` is
    /// not symplectic to 1e-10.
    pub fn apply_symplectic(&self, modes: &[ModeRef], matrix: &DMatrix<f64>) -> Result<Self> {
        let omega = symplectic_form(modes.len());
        if matrix.nrows() == omega.nrows()
            && matrix.ncols() == omega.ncols()
            && (matrix * &omega * matrix.transpose() - &omega).amax() > 1e-10
        {
            return invalid("matrix is not symplectic");
        }
        self.transform(modes, matrix)
    }

    /// QND interaction between an atomic and a light mode:
    /// `X_L ← X_L + κ P_A`, `X_A ← X_A + κ P_L`.
    pub fn apply_qnd(&self, atom: ModeRef, light: ModeRef, kappa: f64) -> Result<Self> {
        if atom == light {
            return invalid("QND coupling needs two distinct modes");
        }
        if !kappa.is_finite() {
            return invalid("coupling must be finite");
        }
        let s = qnd_matrix(kappa);
        self.transform(&[atom, light], &DMatrix::from_iterator(4, 4, s.iter().copied()))
    }

    /// Phase-space rotation `X ← X cos φ + P sin φ`, `P ← −X sin φ + P cos φ`.
    pub fn rotate(&self, mode: ModeRef, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        self.transform(&[mode], &DMatrix::from_row_slice(2, 2, &[c, s, -s, c]))
    }

    /// Two-mode squeezing that reduces the variances of `x_a + p_b` and
    /// `p_a + x_b` to `e^{-2r}` (from 1 for vacuum input). This is the EPR
    /// correlation of two oppositely oriented spin ensembles.
    pub fn two_mode_squeeze(&self, a: ModeRef, b: ModeRef, r: f64) -> Result<Self> {
        if a == b {
            return invalid("two-mode squeezing needs two distinct modes");
        }
        if !r.is_finite() || r < 0.0 {
            return invalid("squeezing parameter must be finite and non-negative");
        }
        let (ch, sh) = (r.cosh(), r.sinh());
        #[rustfmt::skip]
        let s = DMatrix::from_row_slice(4, 4, &[
            ch,  0.0, 0.0, -sh,
            0.0, ch,  -sh, 0.0,
            0.0, -sh, ch,  0.0,
            -sh, 0.0, 0.0, ch,
        ]);
        self.transform(&[a, b], &s)
    }

    /// Linear feed-forward `target ← target + gain · source` on the moments.
    ///
    /// This is the ensemble-averaged effect of measuring `source` and
    /// displacing `target` by `gain` times the outcome. It is only a valid
    /// quantum channel once `source` is discarded.
    pub fn add_quadrature(
        &self,
        target: (ModeRef, Quadrature),
        source: (ModeRef, Quadrature),
        gain: f64,
    ) -> Result<Self> {
        self.check_mode(target.0)?;
        self.check_mode(source.0)?;
        if target.0 == source.0 {
            return invalid("feed-forward source and target must be different modes");
        }
        let (modes, t, s) = if target.0 < source.0 {
            ([target.0, source.0], target.1.offset(), 2 + source.1.offset())
        } else {
            ([source.0, target.0], 2 + target.1.offset(), source.1.offset())
        };
        let mut m = DMatrix::identity(4, 4);
        m[(t, s)] = gain;
        self.transform(&modes, &m)
    }

    /// Decoherence by admixture of vacuum:
    /// `q ← β q + sqrt(1 − β²) q_vac` on both quadratures of `mode`.
    pub fn apply_beta_decay(&self, mode: ModeRef, beta: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if !(0.0..=1.0).contains(&beta) {
            return invalid(format!("beta must lie in [0, 1], got {beta}"));
        }
        let mut out = self.clone();
        for q in [Quadrature::X, Quadrature::P] {
            let i = mode.quad(q);
            out.mean[i] *= beta;
            for j in 0..out.cov.ncols() {
                out.cov[(i, j)] *= beta;
                out.cov[(j, i)] *= beta;
            }
            out.cov[(i, i)] += (1.0 - beta * beta) * VACUUM_VARIANCE;
        }
        out.symmetrize();
        Ok(out)
    }

    /// `var(P_a1) + var(P_a2)`; below 1 certifies entanglement of the two modes.
    pub fn duan_sum(&self, a1: ModeRef, a2: ModeRef) -> Result<f64> {
        if a1 == a2 {
            return invalid("Duan sum needs two distinct modes");
        }
        Ok(self.quadrature_variance(a1, Quadrature::P)? + self.quadrature_variance(a2, Quadrature::P)?)
    }

    /// Conditions on quadrature `q` of `mode` having taken `value`, then
    /// removes the mode. The conditioned covariance does not depend on `value`.
    pub fn condition(&self, mode: ModeRef, q: Quadrature, value: f64) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes() == 1 {
            return invalid("cannot measure the only mode");
        }
        if !value.is_finite() {
            return invalid("measurement value must be finite");
        }
        let k = mode.quad(q);
        let keep: Vec<usize> = (0..self.mean.len()).filter(|&i| i / 2 != mode.0).collect();
        let var = self.cov[(k, k)];
        let n = keep.len();
        let mut mean = DVector::from_iterator(n, keep.iter().map(|&i| self.mean[i]));
        let mut cov = DMatrix::from_fn(n, n, |r, c| self.cov[(keep[r], keep[c])]);
        if var > DEGENERATE_VARIANCE {
            let cross = DVector::from_iterator(n, keep.iter().map(|&i| self.cov[(i, k)]));
            mean.axpy((value - self.mean[k]) / var, &cross, 1.0);
            cov.ger(-1.0 / var, &cross, &cross, 1.0);
        }
        let mut labels = self.labels.clone();
        labels.remove(mode.0);
        let mut out = Self { labels, mean, cov };
        out.symmetrize();
        Ok(out)
    }

    /// Homodyne measurement of `q` on `mode`. The outcome is drawn from the
    /// Gaussian marginal; the returned state is conditioned on it and no
    /// longer contains `mode`. A sharp (zero-variance) quadrature yields its
    /// mean exactly and consumes no randomness.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        mode: ModeRef,
        q: Quadrature,
        rng: &mut R,
    ) -> Result<(MeasurementOutcome, Self)> {
        self.check_mode(mode)?;
        let k = mode.quad(q);
        let var = self.cov[(k, k)];
        let value = if var > DEGENERATE_VARIANCE {
            let z: f64 = rng.sample(StandardNormal);
            self.mean[k] + var.sqrt() * z
        } else {
            self.mean[k]
        };
        let state = self.condition(mode, q, value)?;
        Ok((MeasurementOutcome { value, measured_mode: mode, quadrature: q }, state))
    }

    pub fn measure_x<R: Rng + ?Sized>(&self, mode: ModeRef, rng: &mut R) -> Result<(MeasurementOutcome, Self)> {
        self.measure(mode, Quadrature::X, rng)
    }

    /// Symplectic eigenvalues in ascending order. Each is ≥ 1/2 for a
    /// physical state and exactly 1/2 for every mode of a pure state.
    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        // ν² are the eigenvalues of K Ωᵀ C Ω K with K = C^{1/2}, each twice.
        let eig = self.cov.clone().symmetric_eigen();
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        let omega = symplectic_form(self.n_modes());
        let m = &root * omega.transpose() * &self.cov * &omega * &root;
        let m = (&m + m.transpose()) * 0.5;
        let mut nu2: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        nu2.sort_by(f64::total_cmp);
        nu2.chunks(2).map(|pair| (0.5 * (pair[0] + pair[1])).max(0.0).sqrt()).collect()
    }

    /// Checks the uncertainty relation: every symplectic eigenvalue must be at
    /// least `1/2 − tol`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let smallest = self.symplectic_eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if smallest < VACUUM_VARIANCE - tol {
            Err(Error::Unphysical(smallest))
        } else {
            Ok(())
        }
    }

    fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov += t;
        self.cov *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const A: ModeRef = ModeRef(0);
    const L: ModeRef = ModeRef(1);

    #[test]
    fn vacuum_moments() {
        for n in 1..=3 {
            let s = vacuum_state(n).unwrap();
            assert_eq!(s.mean(), &DVector::zeros(2 * n));
            assert_eq!(s.cov(), &(DMatrix::identity(2 * n, 2 * n) * 0.5));
            for nu in s.symplectic_eigenvalues() {
                assert!((nu - 0.5).abs() < 1e-12);
            }
        }
        assert!(matches!(vacuum_state(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn displacement_round_trip() {
        let v = vacuum_state(2).unwrap();
        assert_eq!(v.displace(A, 0.0, 0.0).unwrap(), v);
        let d = v.displace(A, 1.0, 0.0).unwrap();
        assert_eq!(d.mode_mean(A).unwrap(), (1.0, 0.0));
        assert_eq!(d.cov(), v.cov());
        let back = d.displace(A, -1.0, -0.0).unwrap();
        assert_eq!(back, v);
        assert!(v.displace(ModeRef(2), 1.0, 1.0).is_err());
    }

    #[test]
    fn qnd_moments_at_unit_coupling() {
        let s = vacuum_state(2).unwrap().apply_qnd(A, L, 1.0).unwrap();
        assert!((s.quadrature_variance(L, Quadrature::X).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.quadrature_variance(A, Quadrature::X).unwrap() - 1.0).abs() < 1e-15);
        assert!((s.quadrature_variance(A, Quadrature::P).unwrap() - 0.5).abs() < 1e-15);
        let c = s.quadrature_covariance((L, Quadrature::X), (A, Quadrature::P)).unwrap();
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn qnd_identity_and_errors() {
        let v = vacuum_state(2).unwrap().displace(A, 0.3, -0.2).unwrap();
        assert_eq!(v.apply_qnd(A, L, 0.0).unwrap(), v);
        assert!(v.apply_qnd(A, A, 1.0).is_err());
    }

    #[test]
    fn qnd_matrix_is_symplectic() {
        let omega = symplectic_form(2);
        for kappa in [-3.0, 0.1, 1.0, 7.5] {
            let s = DMatrix::from_iterator(4, 4, qnd_matrix(kappa).iter().copied());
            assert!((&s * &omega * s.transpose() - &omega).amax() < 1e-12);
        }
    }

    #[test]
    fn conditional_variance_after_qnd() {
        for (kappa, expected) in [(1.0, 0.25), (2.0, 0.1)] {
            let s = vacuum_state(2).unwrap().apply_qnd(A, L, kappa).unwrap();
            let c = s.condition(L, Quadrature::X, 0.37).unwrap();
            assert_eq!(c.n_modes(), 1);
            let var_p = c.quadrature_variance(ModeRef(0), Quadrature::P).unwrap();
            assert!((var_p - expected).abs() < 1e-14, "{kappa}: {var_p}");
        }
    }

    #[test]
    fn measuring_uncorrelated_mode_leaves_vacuum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = vacuum_state(2).unwrap();
        let (out, rest) = v.measure_x(A, &mut rng).unwrap();
        assert_eq!(out.measured_mode, A);
        assert_eq!(out.quadrature, Quadrature::X);
        assert_eq!(rest, GaussianState::vacuum_labeled(["m1"]).unwrap());
    }

    #[test]
    fn degenerate_measurement_is_exact() {
        let v = GaussianState::from_moments(
            vec!["a".into(), "b".into()],
            DVector::from_vec(vec![0.7, 0.0, 0.0, 0.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1e6, 0.5, 0.5])),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (out, rest) = v.measure_x(A, &mut rng).unwrap();
        assert_eq!(out.value, 0.7);
        assert_eq!(rest.cov(), &(DMatrix::identity(2, 2) * 0.5));
    }

    #[test]
    fn beta_decay_limits() {
        let s = vacuum_state(2).unwrap().apply_qnd(A, L, 1.3).unwrap().displace(A, 0.4, 0.9).unwrap();
        assert_eq!(s.apply_beta_decay(A, 1.0).unwrap(), s);
        let d = s.apply_beta_decay(A, 0.0).unwrap();
        assert_eq!(d.mode_mean(A).unwrap(), (0.0, 0.0));
        assert_eq!(d.mode_cov(A).unwrap(), Matrix2::identity() * 0.5);
        for q in [Quadrature::X, Quadrature::P] {
            for r in [Quadrature::X, Quadrature::P] {
                assert_eq!(d.quadrature_covariance((A, q), (L, r)).unwrap(), 0.0);
            }
        }
        assert!(s.apply_beta_decay(A, 1.01).is_err());
        assert!(s.apply_beta_decay(A, -0.1).is_err());
    }

    #[test]
    fn beta_decay_admixture_value() {
        let s = GaussianState::from_moments(
            vec!["a".into()],
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.25])),
        )
        .unwrap();
        let d = s.apply_beta_decay(A, 0.65).unwrap();
        let expected = 0.65_f64.powi(2) * 0.25 + (1.0 - 0.65_f64.powi(2)) * 0.5;
        assert!((d.quadrature_variance(A, Quadrature::P).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.394375).abs() < 1e-12);
    }

    #[test]
    fn duan_sum_vacuum_and_errors() {
        let v = vacuum_state(2).unwrap();
        assert_eq!(v.duan_sum(A, L).unwrap(), 1.0);
        assert!(v.duan_sum(A, A).is_err());
    }

    #[test]
    fn two_mode_squeeze_correlations() {
        let r: f64 = 0.8;
        let s = vacuum_state(2).unwrap().two_mode_squeeze(A, L, r).unwrap();
        let plus = s.combination_variance(&[(A, Quadrature::X, 1.0), (L, Quadrature::P, 1.0)]).unwrap();
        let minus = s.combination_variance(&[(A, Quadrature::P, 1.0), (L, Quadrature::X, 1.0)]).unwrap();
        assert!((plus - (-2.0 * r).exp()).abs() < 1e-12);
        assert!((minus - (-2.0 * r).exp()).abs() < 1e-12);
        for nu in s.symplectic_eigenvalues() {
            assert!((nu - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn quarter_turn_swaps_quadratures() {
        let s = vacuum_state(1).unwrap().displace(A, 1.0, 2.0).unwrap();
        let r = s.rotate(A, std::f64::consts::FRAC_PI_2).unwrap();
        let (x, p) = r.mode_mean(A).unwrap();
        assert!((x - 2.0).abs() < 1e-15 && (p + 1.0).abs() < 1e-15);
    }

    #[test]
    fn feed_forward_then_trace() {
        // x_target += g x_source, source discarded: variance adds g² · 1/2.
        let s = vacuum_state(2)
            .unwrap()
            .displace(L, 0.5, 0.0)
            .unwrap()
            .add_quadrature((A, Quadrature::X), (L, Quadrature::X), 2.0)
            .unwrap()
            .trace_out(L)
            .unwrap();
        assert!((s.quadrature_variance(A, Quadrature::X).unwrap() - 2.5).abs() < 1e-15);
        assert!((s.quadrature_mean(A, Quadrature::X).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unphysical_state_is_flagged() {
        let s = GaussianState::from_moments(
            vec!["a".into()],
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.1, 0.5])),
        )
        .unwrap();
        assert!(matches!(s.check_physical(1e-10), Err(Error::Unphysical(_))));
        assert!(vacuum_state(3).unwrap().check_physical(1e-10).is_ok());
    }

    #[test]
    fn rejects_asymmetric_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.5]);
        assert!(GaussianState::from_moments(vec!["a".into()], DVector::zeros(2), cov).is_err());
    }

    #[test]
    fn apply_symplectic_rejects_non_symplectic() {
        let v = vacuum_state(1).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert!(v.apply_symplectic(&[A], &m).is_err());
        let sq = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let s = v.apply_symplectic(&[A], &sq).unwrap();
        assert!((s.quadrature_variance(A, Quadrature::X).unwrap() - 2.0).abs() < 1e-15);
    }
}
