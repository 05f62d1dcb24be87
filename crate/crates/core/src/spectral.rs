//! Spectral representation of the potential `T = T* >= 0` and the functional
//! calculus every other module is built on.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{complexify, hermitian_deviation, hermitian_eigh, max_abs};
use crate::scalar::{cabs, cre, csqrt_principal, cx, tol, CMatrix, CVector, Real};

/// Eigenvalues in `[-NEGATIVE_FLOOR, 0)` are clamped to zero.
pub const NEGATIVE_FLOOR: f64 = 1e-10;

/// Square root with the cut along `[0, inf)` and image in the closed upper
/// half-plane.
///
/// Realized as `i * sqrt(-w)` with the principal root. On the cut itself the
/// limit from the upper edge is returned, so `branch_sqrt(4) = 2` and
/// `branch_sqrt(-4) = 2i`.
pub fn branch_sqrt<T: Real>(w: Complex<T>) -> Complex<T> {
    if w.im.is_zero() {
        return if w.re > T::zero() {
            cre(w.re.sqrt())
        } else {
            cx(T::zero(), (-w.re).sqrt())
        };
    }
    let p = csqrt_principal(-w);
    cx(-p.im, p.re)
}

/// `T` given by its eigenvalues (ascending, non-negative) and orthonormal
/// eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure<T: Real> {
    eigenvalues: DVector<T>,
    eigenvectors: CMatrix<T>,
    essential_edge: Option<T>,
}

impl<T: Real> SpectralMeasure<T> {
    /// Diagonal `T` in the standard basis.
    pub fn from_diagonal(values: &[T]) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty potential".into()));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
        let mut u = CMatrix::<T>::zeros(n, n);
        let mut vals = DVector::<T>::zeros(n);
        for (col, &src) in idx.iter().enumerate() {
            u[(src, col)] = cre(T::one());
            vals[col] = clamp_eigenvalue(values[src])?;
        }
        Ok(Self { eigenvalues: vals, eigenvectors: u, essential_edge: None })
    }

    /// Eigendecomposition entry point for a Hermitian positive semi-definite matrix.
    pub fn from_matrix(h: &CMatrix<T>) -> Result<Self> {
        if h.nrows() == 0 || h.nrows() != h.ncols() {
            return Err(Error::InvalidArgument("potential must be a non-empty square matrix".into()));
        }
        let scale = T::one().max(max_abs(h));
        let dev = hermitian_deviation(h);
        if dev > tol::<T>(1e-10) * scale {
            return Err(Error::NotHermitian { deviation: dev.as_f64() });
        }
        let (vals, vecs) = hermitian_eigh(h);
        let vals = vals
            .iter()
            .map(|&v| clamp_eigenvalue(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { eigenvalues: DVector::from_vec(vals), eigenvectors: vecs, essential_edge: None })
    }

    /// Assembles a measure from already-computed parts, checking orthonormality.
    pub fn from_parts(eigenvalues: Vec<T>, eigenvectors: CMatrix<T>) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.nrows() != n || eigenvectors.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch { expected: n, got: eigenvectors.ncols() });
        }
        let gram = eigenvectors.adjoint() * &eigenvectors - CMatrix::<T>::identity(n, n);
        if max_abs(&gram) > tol::<T>(1e-12) * T::lit(n as f64) {
            return Err(Error::InvalidArgument("eigenvectors are not orthonormal".into()));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            eigenvalues[a].partial_cmp(&eigenvalues[b]).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut u = CMatrix::<T>::zeros(n, n);
        let mut vals = DVector::<T>::zeros(n);
        for (col, &src) in idx.iter().enumerate() {
            u.set_column(col, &eigenvectors.column(src));
            vals[col] = clamp_eigenvalue(eigenvalues[src])?;
        }
        Ok(Self { eigenvalues: vals, eigenvectors: u, essential_edge: None })
    }

    /// Potential operator `-d^2/dx^2 + q` on `(0, length)` with Dirichlet ends,
    /// discretized by the 3-point stencil on `q_samples.len()` interior points.
    pub fn from_schrodinger_1d(q_samples: &[T], interval_length: T) -> Result<Self> {
        let n = q_samples.len();
        if n < 3 {
            return Err(Error::TooFewSamples { required: 3, got: n });
        }
        if !(interval_length > T::zero()) {
            return Err(Error::InvalidArgument("interval length must be positive".into()));
        }
        if let Some((index, &value)) = q_samples.iter().enumerate().find(|(_, q)| !(**q >= T::zero())) {
            return Err(Error::NegativePotential { index, value: value.as_f64() });
        }
        let h = interval_length / T::lit((n + 1) as f64);
        let inv_h2 = T::one() / (h * h);
        let mut a = DMatrix::<T>::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = T::lit(2.0) * inv_h2 + q_samples[i];
            if i + 1 < n {
                a[(i, i + 1)] = -inv_h2;
                a[(i + 1, i)] = -inv_h2;
            }
        }
        let eig = SymmetricEigen::new(a);
        let vals: Vec<T> = eig.eigenvalues.iter().copied().collect();
        Self::from_parts(vals, complexify(&eig.eigenvectors))
    }

    /// Declares `t1 = inf sigma_ess(T)` for models standing in for an unbounded operator.
    pub fn with_essential_edge(mut self, t1: T) -> Self {
        self.essential_edge = Some(t1);
        self
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<T> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix<T> {
        &self.eigenvectors
    }

    pub fn essential_edge(&self) -> Option<T> {
        self.essential_edge
    }

    pub fn inf_spectrum(&self) -> T {
        self.eigenvalues[0]
    }

    pub fn max_spectrum(&self) -> T {
        self.eigenvalues[self.dim() - 1]
    }

    /// `U diag(values) U*`.
    pub fn synthesize(&self, values: &[Complex<T>]) -> CMatrix<T> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= v;
            }
        }
        scaled * u.adjoint()
    }

    /// `phi(T) = U diag(phi(t_j)) U*`.
    pub fn apply_function<F>(&self, phi: F) -> Result<CMatrix<T>>
    where
        F: Fn(T) -> Complex<T>,
    {
        let vals = self
            .eigenvalues
            .iter()
            .map(|&t| {
                let v = phi(t);
                if crate::scalar::is_finite_cx(v) {
                    Ok(v)
                } else {
                    Err(Error::FunctionUndefinedAtEigenvalue { eigenvalue: t.as_f64() })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.synthesize(&vals))
    }

    /// The matrix `T` itself.
    pub fn matrix(&self) -> CMatrix<T> {
        let vals: Vec<_> = self.eigenvalues.iter().map(|&t| cre(t)).collect();
        self.synthesize(&vals)
    }

    /// `sqrt(T)`.
    pub fn sqrt(&self) -> CMatrix<T> {
        let vals: Vec<_> = self.eigenvalues.iter().map(|&t| cre(t.sqrt())).collect();
        self.synthesize(&vals)
    }

    /// `dim ran E_T([0, t))`: eigenvalues strictly below `t`.
    pub fn counting_function(&self, t: T) -> usize {
        self.eigenvalues.iter().take_while(|&&v| v < t).count()
    }

    /// `(t0, t1)`: bottom of the spectrum and the declared essential edge
    /// (`+inf` when none was declared).
    pub fn spectrum_edges(&self) -> (T, T) {
        let t1 = self.essential_edge.unwrap_or_else(|| T::lit(f64::INFINITY));
        (self.inf_spectrum(), t1)
    }

    /// Coordinates in the eigenbasis, `U* h`.
    pub fn to_eigenbasis(&self, h: &CVector<T>) -> CVector<T> {
        self.eigenvectors.adjoint() * h
    }

    pub fn from_eigenbasis(&self, c: &CVector<T>) -> CVector<T> {
        &self.eigenvectors * c
    }

    /// Distance from `t` to the nearest eigenvalue.
    pub fn distance_to_spectrum(&self, t: T) -> T {
        self.eigenvalues
            .iter()
            .map(|&v| (v - t).abs())
            .fold(T::lit(f64::INFINITY), |a, b| if b < a { b } else { a })
    }

    /// Eigenvalue closest to `t`.
    pub fn nearest_eigenvalue(&self, t: T) -> T {
        let mut best = self.eigenvalues[0];
        for &v in self.eigenvalues.iter() {
            if (v - t).abs() < (best - t).abs() {
                best = v;
            }
        }
        best
    }

    /// Distinct eigenvalues `(value, multiplicity)`, merging within `merge_tol`.
    pub fn distinct_eigenvalues(&self, merge_tol: T) -> Vec<(T, usize)> {
        let mut out: Vec<(T, usize)> = Vec::new();
        for &v in self.eigenvalues.iter() {
            match out.last_mut() {
                Some((w, k)) if (v - *w).abs() <= merge_tol => *k += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

fn clamp_eigenvalue<T: Real>(v: T) -> Result<T> {
    if v >= T::zero() {
        Ok(v)
    } else if v >= -tol::<T>(NEGATIVE_FLOOR) {
        Ok(T::zero())
    } else {
        Err(Error::NegativeSpectrum { eigenvalue: v.as_f64() })
    }
}

/// `|branch_sqrt(w)^2 - w| / |w|`, handy in tests and diagnostics.
pub fn branch_sqrt_residual<T: Real>(w: Complex<T>) -> T {
    let r = branch_sqrt(w);
    let n = cabs(w);
    if n.is_zero() {
        cabs(r)
    } else {
        cabs(r * r - w) / n
    }
}
