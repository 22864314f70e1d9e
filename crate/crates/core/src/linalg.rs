//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Matrix2};

const PADE_ORDER: usize = 6;

/// Matrix exponential by scaling and squaring with a diagonal [6/6] Padé
/// approximant. The argument is scaled until its 1-norm is at most 1/2, where
/// the truncation error of the approximant is below double precision.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let coeffs = pade_coefficients(PADE_ORDER);
    let ident = DMatrix::<f64>::identity(n, n);
    let mut power = ident.clone();
    let mut num = &ident * coeffs[0];
    let mut den = &ident * coeffs[0];
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &scaled;
        num += &power * c;
        if k % 2 == 0 {
            den += &power * c;
        } else {
            den -= &power * c;
        }
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn pade_coefficients(q: usize) -> Vec<f64> {
    let mut c = vec![1.0; q + 1];
    for k in 1..=q {
        c[k] = c[k - 1] * (q + 1 - k) as f64 / (k as f64 * (2 * q + 1 - k) as f64);
    }
    c
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Returns `L` with `L Lᵀ = S` for a symmetric positive semidefinite `S`.
/// Negative eigenvalues from round-off are clamped to zero.
pub fn psd_factor(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut l = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let root = lambda.max(0.0).sqrt();
        l.column_mut(j).scale_mut(root);
    }
    l
}

pub fn min_eigenvalue_2(m: &Matrix2<f64>) -> f64 {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    half_tr - (half_diff * half_diff + off * off).sqrt()
}

pub fn to_matrix2(m: &DMatrix<f64>) -> Matrix2<f64> {
    assert_eq!(m.shape(), (2, 2));
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

pub fn from_matrix2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]])
}

pub fn dvector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}
