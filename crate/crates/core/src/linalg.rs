//! Small dense complex helpers shared by the solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Factorizes a Hermitian positive-definite matrix. Returns `None` when the
/// matrix is not numerically positive definite.
pub fn hpd_factor(a: CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    // Cholesky reads only the lower triangle; symmetrize so that rounding in the
    // upper triangle cannot leak into the factor.
    let n = a.nrows();
    let mut h = a;
    for i in 0..n {
        h[(i, i)] = Complex64::new(h[(i, i)].re, 0.0);
        for j in 0..i {
            let avg = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            h[(i, j)] = avg;
            h[(j, i)] = avg.conj();
        }
    }
    // The complex factorization takes complex square roots of the pivots, so a
    // negative pivot shows up as a non-real diagonal entry instead of a failure.
    let chol = Cholesky::new(h)?;
    let l = chol.l_dirty();
    let ok = (0..n).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

/// `sum_i |x_i|^2`
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Phase of `z` in `[0, 2pi)`, with `arg(0) = 0`.
pub fn phase_of(z: Complex64) -> f64 {
    if z == Complex64::new(0.0, 0.0) {
        return 0.0;
    }
    let p = z.im.atan2(z.re);
    if p < 0.0 {
        let wrapped = p + std::f64::consts::TAU;
        // atan2 can return -0.0 or tiny negatives that round to TAU
        if wrapped >= std::f64::consts::TAU {
            0.0
        } else {
            wrapped
        }
    } else {
        p
    }
}

/// `e^{j psi}`
#[inline]
pub fn unit(psi: f64) -> Complex64 {
    Complex64::from_polar(1.0, psi)
}
