//! Multivariate normal and Wishart draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draws from `N(Q^-1 r, Q^-1)` given the precision `Q` and `r`.
pub fn mvn_canonical<R: Rng + ?Sized>(
    q: DMatrix<f64>,
    r: &DVector<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = r.len();
    let chol = q.clone().cholesky().ok_or_else(|| {
        Error::Model(format!(
            "posterior precision is not positive definite (condition number {:.3e})",
            condition_number(&q)
        ))
    })?;
    let mean = chol.solve(r);
    let z = DVector::from_fn(n, |_, _| std_normal(rng));
    let lt = chol.l().transpose();
    let dev = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Model("singular Cholesky factor".into()))?;
    Ok(mean + dev)
}

/// Ratio of the largest to the smallest absolute eigenvalue.
pub fn condition_number(q: &DMatrix<f64>) -> f64 {
    let sym = (q + q.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())));
    if lo == 0.0 { f64::INFINITY } else { hi / lo }
}

/// Wishart draw with `df` degrees of freedom and scale matrix `scale`
/// (mean `df * scale`), by the Bartlett decomposition.
pub fn wishart<R: Rng + ?Sized>(df: f64, scale: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = scale.nrows();
    if df <= (p as f64) - 1.0 {
        return Err(Error::Model(format!(
            "Wishart degrees of freedom {df} too small for dimension {p}"
        )));
    }
    let l = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("Wishart scale is not positive definite".into()))?
        .l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi = ChiSquared::new(df - i as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = std_normal(rng);
        }
    }
    let la = l * a;
    Ok(&la * la.transpose())
}
