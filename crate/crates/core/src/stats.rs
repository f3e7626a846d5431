//! Small sample-statistics helpers shared by the Monte Carlo drivers.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample covariance (N − 1 normalization).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1) as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

/// Ordinary least squares `y = slope · x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let slope = covariance(xs, ys) / variance(xs);
    LinearFit { slope, intercept: mean(ys) - slope * mean(xs) }
}

/// Sample covariance matrix of the columns of `rows`.
pub fn covariance_matrix<const D: usize>(rows: &[[f64; D]]) -> ([f64; D], [[f64; D]; D]) {
    let n = rows.len() as f64;
    let mut mu = [0.0; D];
    for r in rows {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = [[0.0; D]; D];
    for r in rows {
        for i in 0..D {
            for j in 0..D {
                cov[i][j] += (r[i] - mu[i]) * (r[j] - mu[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        for c in row.iter_mut() {
            *c /= n - 1.0;
        }
    }
    (mu, cov)
}
