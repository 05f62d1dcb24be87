//! Small dense complex linear algebra used throughout: Hermitian
//! eigendecompositions, Hermitian matrix functions, guarded inversion.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::{cre, CMatrix, Real};

/// Max-abs deviation from Hermitian symmetry.
pub fn hermitian_deviation<T: Real>(a: &CMatrix<T>) -> T {
    let mut dev = T::zero();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = a[(i, j)] - a[(j, i)].conj();
            let m = d.re.abs().max(d.im.abs());
            if m > dev {
                dev = m;
            }
        }
    }
    dev
}

/// `(A + A*) / 2`.
pub fn real_part<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    (a + a.adjoint()) * cre(T::lit(0.5))
}

/// `(A - A*) / 2i`.
pub fn imag_part<T: Real>(a: &CMatrix<T>) -> CMatrix<T> {
    (a - a.adjoint()) * Complex::new(T::zero(), T::lit(-0.5))
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn hermitian_eigh<T: Real>(a: &CMatrix<T>) -> (DVector<T>, CMatrix<T>) {
    let n = a.nrows();
    let sym = real_part(a);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues<T: Real>(a: &CMatrix<T>) -> Vec<T> {
    let sym = real_part(a);
    let mut v: Vec<T> = sym.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// `f(A)` for Hermitian `A` through its eigendecomposition.
pub fn hermitian_function<T, F>(a: &CMatrix<T>, f: F) -> Result<CMatrix<T>>
where
    T: Real,
    F: Fn(T) -> Complex<T>,
{
    let (vals, vecs) = hermitian_eigh(a);
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let fv = f(lam);
        if !crate::scalar::is_finite_cx(fv) {
            return Err(Error::FunctionUndefinedAtEigenvalue { eigenvalue: lam.as_f64() });
        }
        for i in 0..scaled.nrows() {
            scaled[(i, j)] *= fv;
        }
    }
    Ok(scaled * vecs.adjoint())
}

/// Singular values, descending.
pub fn singular_values<T: Real>(a: &CMatrix<T>) -> Vec<T> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<T> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Operator 2-norm.
pub fn spectral_norm<T: Real>(a: &CMatrix<T>) -> T {
    singular_values(a).first().copied().unwrap_or_else(T::zero)
}

/// Relative floor below which a matrix is treated as singular.
pub const SINGULAR_FLOOR: f64 = 1e-12;

/// Inverse with a singular-value floor: fails with [`Error::SingularPencil`]
/// when `sigma_min < floor * sigma_max`.
pub fn guarded_inverse<T: Real>(a: &CMatrix<T>, floor: f64) -> Result<CMatrix<T>> {
    let s = singular_values(a);
    let (smax, smin) = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => (hi, lo),
        _ => return Ok(a.clone()),
    };
    let ratio = if smax > T::zero() { smin / smax } else { T::zero() };
    if ratio < T::lit(floor) || !ratio.is_finite() {
        return Err(Error::SingularPencil { ratio: ratio.as_f64() });
    }
    a.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularPencil { ratio: ratio.as_f64() })
}

/// Embeds a real matrix as a complex one.
pub fn complexify<T: Real>(a: &DMatrix<T>) -> CMatrix<T> {
    a.map(|x| cre(x))
}

/// Block-diagonal assembly.
pub fn block_diagonal<T: Real>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::<T>::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}

/// Max-abs entry.
pub fn max_abs<T: Real>(a: &CMatrix<T>) -> T {
    a.iter()
        .map(|z| z.re.hypot(z.im))
        .fold(T::zero(), |acc, x| if x > acc { x } else { acc })
}
