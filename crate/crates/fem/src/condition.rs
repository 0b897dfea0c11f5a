use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::solve::Cholesky;
use crate::{FemError, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Relative change of the Rayleigh quotient between iterations.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 10_000, seed: 7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub kappa: f64,
    pub iterations: (usize, usize),
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Dominant eigenvalue of the SPD operator `apply` by power iteration.
fn power(n: usize, apply: impl Fn(&[f64]) -> Vec<f64>, opts: &EigenOptions) -> Result<(f64, usize), FemError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for it in 1..=opts.max_iter {
        let mut w = apply(&v);
        let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if normalize(&mut w) == 0.0 {
            return Ok((0.0, it));
        }
        v = w;
        if it > 1 && (rq - lambda).abs() <= opts.tol * rq.abs() {
            return Ok((rq, it));
        }
        lambda = rq;
    }
    Err(FemError::EstimateFailed(opts.max_iter))
}

/// 2-norm condition number of an SPD matrix: the largest eigenvalue by power
/// iteration, the smallest by inverse iteration through `factor`.
pub fn condition_number(matrix: &SparseMatrix, factor: &Cholesky, opts: &EigenOptions) -> Result<ConditionEstimate, FemError> {
    if factor.dim() != matrix.n {
        return Err(FemError::Parameter("factorization does not match the matrix".into()));
    }
    let (lambda_max, i1) = power(matrix.n, |v| matrix.matvec(v), opts)?;
    let (inv, i2) = power(matrix.n, |v| factor.solve(v), opts)?;
    if inv <= 0.0 {
        return Err(FemError::Singular("non-positive inverse eigenvalue".into()));
    }
    let lambda_min = 1.0 / inv;
    Ok(ConditionEstimate { lambda_max, lambda_min, kappa: lambda_max / lambda_min, iterations: (i1, i2) })
}
