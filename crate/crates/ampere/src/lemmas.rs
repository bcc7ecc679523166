//! Matrix inequalities on nonnegative symmetric matrices and the exponent quadratic.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sym2::SymmetricMatrix2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixLemmaVerdict {
    /// det(λA+(1−λ)B)^θ ≥ λ det(A)^θ + (1−λ) det(B)^θ
    pub concavity: bool,
    /// det A det B ≤ (tr(AB)/n)^n
    pub trace_det: bool,
    /// Ab·b ≥ |b|²/tr(A⁻¹); `None` when A is singular.
    pub uv_trace: Option<bool>,
}

impl MatrixLemmaVerdict {
    pub fn all(&self) -> bool {
        self.concavity && self.trace_det && self.uv_trace.unwrap_or(true)
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(1.0f64, |s, v| s.max(v.abs()))
}

fn check_psd(m: &DMatrix<f64>, tol_psd: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > tol_psd * scale_of(m) {
        return Err(Error::NotPsd(format!("asymmetry {asym:e}")));
    }
    let lo = min_eigenvalue(m);
    if lo < -tol_psd * scale_of(m) {
        return Err(Error::NotPsd(format!("eigenvalue {lo:e}")));
    }
    Ok(lo)
}

fn geq(lhs: f64, rhs: f64, slack: f64) -> bool {
    lhs >= rhs - slack * lhs.abs().max(rhs.abs()).max(1.0)
}

/// Evaluates the three inequalities for PSD `a`, `b`, weight `lambda`, exponent `theta` and vector `v`.
pub fn matrix_lemma_checks(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    lambda: f64,
    theta: f64,
    v: &DVector<f64>,
    tol_psd: f64,
    slack: f64,
) -> Result<MatrixLemmaVerdict> {
    let n = a.nrows();
    if b.nrows() != n || v.len() != n {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0,1]")));
    }
    if !(0.0..=1.0 / n as f64 + 1e-15).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta {theta} outside [0,1/n]")));
    }
    let amin = check_psd(a, tol_psd)?;
    check_psd(b, tol_psd)?;
    let pdet = |m: &DMatrix<f64>| m.determinant().max(0.0);
    let mix = a * lambda + b * (1.0 - lambda);
    let concavity = geq(
        pdet(&mix).powf(theta),
        lambda * pdet(a).powf(theta) + (1.0 - lambda) * pdet(b).powf(theta),
        slack,
    );
    let tr = (a * b).trace();
    let trace_det = geq((tr / n as f64).max(0.0).powi(n as i32), pdet(a) * pdet(b), slack);
    let uv_trace = if amin > tol_psd * scale_of(a) {
        a.clone().try_inverse().map(|inv| {
            let lhs = (a * v).dot(v);
            geq(lhs, v.norm_squared() / inv.trace(), slack)
        })
    } else {
        None
    };
    Ok(MatrixLemmaVerdict { concavity, trace_det, uv_trace })
}

pub fn sym2_to_dmatrix(m: &SymmetricMatrix2) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m.a11, m.a12, m.a12, m.a22])
}

/// Random PSD matrix GGᵀ; with `rank < n` the result is singular.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, rank, |_, _| rng.gen_range(-1.0..1.0));
    &g * g.transpose()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub pairs: usize,
    pub failures: usize,
    pub singular: usize,
}

/// Property sweep over seeded random pairs in dimension `n`.
pub fn random_sweep<R: Rng>(rng: &mut R, pairs: usize, n: usize, slack: f64) -> Result<SweepReport> {
    let mut failures = 0;
    let mut singular = 0;
    for k in 0..pairs {
        let ra = if k % 10 == 9 { n - 1 } else { n };
        let a = random_psd(rng, n, ra.max(1));
        let b = random_psd(rng, n, n);
        let lambda = rng.gen_range(0.0..=1.0);
        let theta = rng.gen_range(0.0..=1.0 / n as f64);
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let r = matrix_lemma_checks(&a, &b, lambda, theta, &v, 1e-12, slack)?;
        if r.uv_trace.is_none() {
            singular += 1;
        }
        if !r.all() {
            failures += 1;
        }
    }
    Ok(SweepReport { pairs, failures, singular })
}

/// 8α² − (n²−4n+12)α + 2(n−1)²
pub fn exponent_polynomial(n: f64, alpha: f64) -> f64 {
    8.0 * alpha * alpha - (n * n - 4.0 * n + 12.0) * alpha + 2.0 * (n - 1.0) * (n - 1.0)
}

/// Real roots of the exponent quadratic; empty when the discriminant is negative.
pub fn exponent_roots(n: f64) -> Vec<f64> {
    let b = n * n - 4.0 * n + 12.0;
    let disc = b * b - 64.0 * (n - 1.0) * (n - 1.0);
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![b / 16.0];
    }
    let s = disc.sqrt();
    vec![(b - s) / 16.0, (b + s) / 16.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_is_equality() {
        let i = DMatrix::<f64>::identity(2, 2);
        let v = DVector::from_vec(vec![0.3, -0.7]);
        let r = matrix_lemma_checks(&i, &i, 0.5, 0.5, &v, 1e-12, 1e-12).unwrap();
        assert!(r.all());
        let lhs = (i.clone() * 0.5 + i.clone() * 0.5).determinant().powf(0.5);
        assert_eq!(lhs, 1.0);
    }

    #[test]
    fn diagonal_pair() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let mix: DMatrix<f64> = &a * 0.5 + &b * 0.5;
        assert_eq!(mix.determinant().powf(0.5), 2.5);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matrix_lemma_checks(&a, &b, 0.5, 0.5, &v, 1e-12, 1e-12).unwrap().all());
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let i = DMatrix::<f64>::identity(2, 2);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(matrix_lemma_checks(&a, &i, 0.5, 0.5, &v, 1e-12, 1e-12), Err(Error::NotPsd(_))));
    }

    #[test]
    fn sweep_higher_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3, 5] {
            let r = random_sweep(&mut rng, 200, n, 1e-12).unwrap();
            assert_eq!(r.failures, 0);
        }
    }

    #[test]
    fn exponent_root_at_ten() {
        assert_eq!(exponent_polynomial(10.0, 4.5), 0.0);
        assert_eq!(exponent_roots(10.0), vec![4.5]);
        for n in 3..10 {
            assert!(exponent_roots(n as f64).is_empty());
        }
        assert_eq!(exponent_roots(11.0).len(), 2);
    }
}
