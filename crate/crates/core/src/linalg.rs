//! Small dense kernels with a fixed summation order.
//!
//! Every matrix-vector product in the crate goes through [`mat_vec_into`], so
//! two evaluations of the same product are bit-identical. The matrix game
//! relies on this to make `F(x*) = 0` hold exactly.

use nalgebra::DMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out = a · x`, accumulated column by column.
pub fn mat_vec_into(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    assert_eq!(a.ncols(), x.len());
    assert_eq!(a.nrows(), out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (col, &xj) in a.column_iter().zip(x) {
        for (o, &aij) in out.iter_mut().zip(col.iter()) {
            *o += aij * xj;
        }
    }
}

pub fn mat_vec(a: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    mat_vec_into(a, x, &mut out);
    out
}

/// `xᵀ a x` without allocating; `a` must be square.
pub fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    assert!(a.nrows() == n && a.ncols() == n);
    a.as_slice()
        .chunks_exact(n.max(1))
        .zip(x)
        .map(|(col, &xj)| xj * dot_lanes(col, x))
        .sum()
}

/// Dot product with four interleaved accumulators.
fn dot_lanes(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = dot(ca.remainder(), cb.remainder());
    for (u, v) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += u[l] * v[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Largest singular value via the symmetric eigenproblem of `aᵀa`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let ata = a.transpose() * a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max).max(0.0).sqrt()
}

/// Extreme eigenvalues of the symmetric part `(a + aᵀ)/2`.
pub fn sym_part_eig_range(a: &DMatrix<f64>) -> (f64, f64) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}
