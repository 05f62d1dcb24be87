//! Self-adjoint realizations of `-d^2/dx^2 + T` on the half-line.
//!
//! Every realization other than the Dirichlet one is the Robin condition
//! `f'(0) = B f(0)` for a Hermitian `B`. Resolvents come from the Krein formula
//!
//! ```text
//! (A_B - z)^{-1} f = (A_D - z)^{-1} f + gamma(z) (B - M(z))^{-1} gamma(conj z)* f
//! ```
//!
//! with `gamma(z) h = exp(i x sqrt(z - T)) h`. All integrals against grid data
//! are exact for the piecewise-linear interpolant of the data, so the only
//! discretization error is interpolation of `f` (order `h^2`).

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, hermitian_deviation, max_abs, SINGULAR_FLOOR};
use crate::scalar::{cabs, cexp, cre, cx, CMatrix, CVector, Real};
use crate::spectral::{branch_sqrt, SpectralMeasure};
use crate::triplets::TripletTransform;
use crate::weyl::{base_value_or_limit, TripletTag};

/// Hermiticity tolerance for matrix parameters.
pub const PARAMETER_HERMITIAN_TOL: f64 = 1e-10;

/// Which named realization a parameter stands for, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterLabel {
    Dirichlet,
    Neumann,
    Krein,
    Custom,
}

/// `ker Gamma_0` or `ker(Gamma_1 - B Gamma_0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ParameterKind<T: Real> {
    DirichletRelation,
    Matrix(CMatrix<T>),
}

/// A self-adjoint boundary condition, relative to one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionParameter<T: Real> {
    pub kind: ParameterKind<T>,
    pub triplet: TripletTag,
    pub label: ParameterLabel,
}

impl<T: Real> ExtensionParameter<T> {
    /// Matrix parameter without validation. Use [`try_matrix`](Self::try_matrix)
    /// for untrusted input.
    pub fn matrix(b: CMatrix<T>, triplet: TripletTag) -> Self {
        Self { kind: ParameterKind::Matrix(b), triplet, label: ParameterLabel::Custom }
    }

    /// Matrix parameter, checked square and Hermitian.
    pub fn try_matrix(b: CMatrix<T>, triplet: TripletTag) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::DimensionMismatch { expected: b.nrows(), got: b.ncols() });
        }
        let dev = hermitian_deviation(&b);
        if dev > T::lit(PARAMETER_HERMITIAN_TOL) * max_abs(&b).max(T::one()) {
            return Err(Error::NotHermitian { deviation: dev.as_f64() });
        }
        Ok(Self::matrix(b, triplet))
    }

    pub fn dirichlet(triplet: TripletTag) -> Self {
        Self { kind: ParameterKind::DirichletRelation, triplet, label: ParameterLabel::Dirichlet }
    }

    pub fn with_label(mut self, label: ParameterLabel) -> Self {
        self.label = label;
        self
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self.kind, ParameterKind::DirichletRelation)
    }

    pub fn as_matrix(&self) -> Option<&CMatrix<T>> {
        match &self.kind {
            ParameterKind::Matrix(b) => Some(b),
            ParameterKind::DirichletRelation => None,
        }
    }

    /// The matrix `B` of the condition `f'(0) = B f(0)` (base triplet).
    pub fn base_matrix(&self, m: &SpectralMeasure<T>) -> Result<CMatrix<T>> {
        let b = self.as_matrix().ok_or(Error::DirichletParameter)?;
        if b.nrows() != m.dim() || b.ncols() != m.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), got: b.nrows() });
        }
        Ok(match self.triplet {
            TripletTag::Base => b.clone(),
            TripletTag::Regularized => TripletTransform::for_measure(m)?.restore_matrix(b),
        })
    }
}

/// The three distinguished realizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CanonicalKind {
    Dirichlet,
    Neumann,
    Krein,
}

/// Dirichlet `f(0) = 0`, Neumann `f'(0) = 0`, Krein `f'(0) + sqrt(T) f(0) = 0`,
/// expressed relative to `triplet`.
pub fn canonical_parameter<T: Real>(
    m: &SpectralMeasure<T>,
    kind: CanonicalKind,
    triplet: TripletTag,
) -> ExtensionParameter<T> {
    let n = m.dim();
    let base = match kind {
        CanonicalKind::Dirichlet => return ExtensionParameter::dirichlet(triplet),
        CanonicalKind::Neumann => {
            ExtensionParameter::matrix(CMatrix::zeros(n, n), TripletTag::Base).with_label(ParameterLabel::Neumann)
        }
        CanonicalKind::Krein => {
            ExtensionParameter::matrix(-m.sqrt(), TripletTag::Base).with_label(ParameterLabel::Krein)
        }
    };
    match triplet {
        TripletTag::Base => base,
        TripletTag::Regularized => TripletTransform::for_measure(m)
            .expect("Im M(i) = Re sqrt(i - T) is positive definite for PSD T")
            .transform_parameter(&base),
    }
}

/// Uniform grid `x_k = k h`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformGrid<T> {
    pub h: T,
    pub n: usize,
}

impl<T: Real> UniformGrid<T> {
    /// Grid on `[0, length]` with spacing as close to `h` as divides `length`.
    pub fn new(h: T, length: T) -> Result<Self> {
        if !(h > T::zero()) || !(length > T::zero()) || !h.is_finite() || !length.is_finite() {
            return Err(Error::BadGrid(format!("need h > 0 and L > 0, got h = {h}, L = {length}")));
        }
        let n = (length / h).round().as_f64().max(1.0) as usize;
        if n < 2 {
            return Err(Error::BadGrid(format!("h = {h} leaves fewer than two cells on [0, {length}]")));
        }
        Ok(Self { h: length / T::lit(n as f64), n })
    }

    pub fn length(&self) -> T {
        self.h * T::lit(self.n as f64)
    }

    pub fn x(&self, k: usize) -> T {
        self.h * T::lit(k as f64)
    }

    pub fn points(&self) -> impl Iterator<Item = T> + '_ {
        (0..=self.n).map(move |k| self.x(k))
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Vector-valued samples on a [`UniformGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T: Real> {
    grid: UniformGrid<T>,
    values: Vec<CVector<T>>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: UniformGrid<T>, values: Vec<CVector<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
        }
        let dim = values[0].len();
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
            }
            if !v.iter().all(|c| crate::scalar::is_finite_cx(*c)) {
                return Err(Error::InvalidArgument("grid function has non-finite values".into()));
            }
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: UniformGrid<T>, dim: usize) -> Self {
        Self { grid, values: vec![CVector::zeros(dim); grid.len()] }
    }

    pub fn from_fn(grid: UniformGrid<T>, dim: usize, mut f: impl FnMut(T) -> CVector<T>) -> Result<Self> {
        let values: Vec<_> = grid.points().map(&mut f).collect();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: values[0].len() });
        }
        Self::new(grid, values)
    }

    /// `x -> phi(x) v` for a scalar profile `phi`.
    pub fn scalar_profile(grid: UniformGrid<T>, v: &CVector<T>, phi: impl Fn(T) -> T) -> Self {
        let values = grid.points().map(|x| v * cre(phi(x))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.grid
    }

    pub fn h(&self) -> T {
        self.grid.h
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[CVector<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [CVector<T>] {
        &mut self.values
    }

    pub fn at(&self, k: usize) -> &CVector<T> {
        &self.values[k]
    }

    /// Trapezoid-rule `integral <f(x), g(x)> dx`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let n = self.values.len();
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let w = if k == 0 || k + 1 == n { T::lit(0.5) } else { T::one() };
            acc += a.dotc(b) * cre(w);
        }
        acc * cre(self.grid.h)
    }

    /// Trapezoid-rule L2 norm.
    pub fn l2_norm(&self) -> T {
        self.inner(self).re.max(T::zero()).sqrt()
    }

    pub fn max_norm(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// `self - other`; grids must match.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CVector<T>, &CVector<T>) -> CVector<T>) -> Result<Self> {
        if self.grid.n != other.grid.n || (self.grid.h - other.grid.h).abs() > T::lit(1e-12) * self.grid.h {
            return Err(Error::GridMismatch);
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, values })
    }

    /// Relative L2 distance `||self - other|| / ||other||` (0 when both vanish).
    pub fn relative_l2_error(&self, reference: &Self) -> Result<T> {
        let d = self.sub(reference)?.l2_norm();
        let r = reference.l2_norm();
        Ok(if r > T::zero() { d / r } else { d })
    }

    /// Coordinates in the eigenbasis of `m`, channel-major.
    fn channels(&self, m: &SpectralMeasure<T>) -> Vec<Vec<Complex<T>>> {
        let u_star = m.eigenvectors().adjoint();
        let mut out = vec![Vec::with_capacity(self.values.len()); m.dim()];
        for v in &self.values {
            let c = &u_star * v;
            for (j, ch) in out.iter_mut().enumerate() {
                ch.push(c[j]);
            }
        }
        out
    }

    fn from_channels(grid: UniformGrid<T>, m: &SpectralMeasure<T>, ch: &[Vec<Complex<T>>]) -> Self {
        let u = m.eigenvectors();
        let values = (0..grid.len())
            .map(|k| u * CVector::from_iterator(ch.len(), ch.iter().map(|c| c[k])))
            .collect();
        Self { grid, values }
    }
}

/// `omega_j = sqrt(z - t_j)` with `Im omega_j > 0`, or `RealSpectralPoint`.
fn decaying_roots<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>) -> Result<Vec<Complex<T>>> {
    if z.im.is_zero() && z.re >= m.inf_spectrum() {
        return Err(Error::RealSpectralPoint { re: z.re.as_f64(), im: z.im.as_f64() });
    }
    Ok(m.eigenvalues().iter().map(|&t| branch_sqrt(z - cre(t))).collect())
}

/// `(e^c - 1) / c` and `(e^c (c - 1) + 1) / c^2`, with series near 0.
fn cell_weights<T: Real>(c: Complex<T>) -> (Complex<T>, Complex<T>) {
    if cabs(c) < T::lit(0.5) {
        // E1 = sum c^k/(k+1)!, E2 = sum c^k/((k+2) k!)
        let mut e1 = Complex::new(T::zero(), T::zero());
        let mut e2 = Complex::new(T::zero(), T::zero());
        let mut pow_over_fact = Complex::new(T::one(), T::zero());
        for k in 0..24 {
            let kf = T::lit(k as f64);
            e1 += pow_over_fact / cre(kf + T::one());
            e2 += pow_over_fact / cre(kf + T::lit(2.0));
            pow_over_fact = pow_over_fact * c / cre(kf + T::one());
        }
        (e1, e2)
    } else {
        let ec = cexp(c);
        let one = cre(T::one());
        ((ec - one) / c, (ec * (c - one) + one) / (c * c))
    }
}

/// `left_k = integral_0^{x_k} e^{i w (x_k - y)} f(y) dy` and
/// `right_k = integral_{x_k}^{L} e^{i w (y - x_k)} f(y) dy` for the
/// piecewise-linear interpolant of `f`. Both recursions only multiply by
/// `|e^{i w h}| <= 1`.
fn channel_integrals<T: Real>(omega: Complex<T>, h: T, f: &[Complex<T>]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let n = f.len();
    let c = cx(-omega.im * h, omega.re * h);
    let step = cexp(c);
    let (e1, e2) = cell_weights(c);
    let hc = cre(h);
    let zero = Complex::new(T::zero(), T::zero());
    let mut left = vec![zero; n];
    let mut right = vec![zero; n];
    for k in 0..n - 1 {
        left[k + 1] = step * left[k] + hc * (f[k + 1] * e1 + (f[k] - f[k + 1]) * e2);
    }
    for k in (0..n - 1).rev() {
        right[k] = step * right[k + 1] + hc * (f[k] * e1 + (f[k + 1] - f[k]) * e2);
    }
    (left, right)
}

/// `x -> exp(i x sqrt(z - T)) h` on the grid.
pub fn gamma_apply<T: Real>(
    m: &SpectralMeasure<T>,
    z: Complex<T>,
    h: &CVector<T>,
    grid: UniformGrid<T>,
) -> Result<GridFunction<T>> {
    if h.len() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: h.len() });
    }
    let omegas = decaying_roots(m, z)?;
    let c = m.eigenvectors().adjoint() * h;
    let ch: Vec<Vec<_>> = omegas
        .iter()
        .enumerate()
        .map(|(j, &w)| grid.points().map(|x| cexp(cx(-w.im * x, w.re * x)) * c[j]).collect())
        .collect();
    let mut out = GridFunction::from_channels(grid, m, &ch);
    out.values[0] = h.clone();
    Ok(out)
}

/// `gamma(conj z)* f = integral_0^L exp(i x sqrt(z - T)) f(x) dx`.
pub fn gamma_adjoint_apply<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>, f: &GridFunction<T>) -> Result<CVector<T>> {
    if f.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: f.dim() });
    }
    let omegas = decaying_roots(m, z)?;
    let ch = f.channels(m);
    let coeffs = CVector::from_iterator(
        m.dim(),
        omegas.iter().zip(&ch).map(|(&w, fj)| channel_integrals(w, f.h(), fj).1[0]),
    );
    Ok(m.eigenvectors() * coeffs)
}

/// Dirichlet resolvent through the Green kernel
/// `(i / 2w)(e^{i w |x - y|} - e^{i w (x + y)})`, `w = sqrt(z - t_j)`.
/// `f` is extended by zero beyond the grid.
pub fn dirichlet_resolvent_apply<T: Real>(
    m: &SpectralMeasure<T>,
    z: Complex<T>,
    f: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if f.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: f.dim() });
    }
    let omegas = decaying_roots(m, z)?;
    let grid = f.grid();
    let ch = f.channels(m);
    let out: Vec<Vec<_>> = omegas
        .iter()
        .zip(&ch)
        .map(|(&w, fj)| {
            let (left, right) = channel_integrals(w, grid.h, fj);
            let pref = cx(T::zero(), T::lit(0.5)) / w;
            let c0 = right[0];
            let mut g: Vec<_> = (0..grid.len())
                .map(|k| {
                    let x = grid.x(k);
                    pref * (left[k] + right[k] - cexp(cx(-w.im * x, w.re * x)) * c0)
                })
                .collect();
            g[0] = Complex::new(T::zero(), T::zero());
            g
        })
        .collect();
    Ok(GridFunction::from_channels(grid, m, &out))
}

/// Resolvent of the Robin realization `f'(0) = B f(0)` by the Krein formula.
pub fn krein_resolvent_apply<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    z: Complex<T>,
    f: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let b = p.base_matrix(m)?;
    let gd = dirichlet_resolvent_apply(m, z, f)?;
    let k = guarded_inverse(&(b - base_value_or_limit(m, z)), SINGULAR_FLOOR)?;
    let coeff = k * gamma_adjoint_apply(m, z, f)?;
    gd.add(&gamma_apply(m, z, &coeff, f.grid())?)
}

/// Resolvent of any realization: Dirichlet by the Green kernel, others by the Krein formula.
pub fn resolvent_apply<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    z: Complex<T>,
    f: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if p.is_dirichlet() {
        dirichlet_resolvent_apply(m, z, f)
    } else {
        krein_resolvent_apply(m, p, z, f)
    }
}

/// Integral kernel `K(x, y; z)` of `(A_p - z)^{-1}`.
pub fn resolvent_kernel<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    z: Complex<T>,
    x: T,
    y: T,
) -> Result<CMatrix<T>> {
    let omegas = decaying_roots(m, z)?;
    let e = |s: T, w: Complex<T>| cexp(cx(-w.im * s, w.re * s));
    let green: Vec<_> = omegas
        .iter()
        .map(|&w| cx(T::zero(), T::lit(0.5)) / w * (e((x - y).abs(), w) - e(x + y, w)))
        .collect();
    let mut k = m.synthesize(&green);
    if !p.is_dirichlet() {
        let b = p.base_matrix(m)?;
        let pencil = guarded_inverse(&(b - base_value_or_limit(m, z)), SINGULAR_FLOOR)?;
        let gx = m.synthesize(&omegas.iter().map(|&w| e(x, w)).collect::<Vec<_>>());
        let gy = m.synthesize(&omegas.iter().map(|&w| e(y, w)).collect::<Vec<_>>());
        k += gx * pencil * gy;
    }
    Ok(k)
}

/// Eigenvalues at or below this count as zero for [`krein_kernel_basis`].
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-12;

/// `x -> exp(-x sqrt(t_j)) v_j` for every eigenpair: a basis of the kernel
/// of the Krein realization.
pub fn krein_kernel_basis<T: Real>(m: &SpectralMeasure<T>, grid: UniformGrid<T>) -> Result<Vec<GridFunction<T>>> {
    if m.eigenvalues().iter().any(|&t| t <= T::lit(ZERO_EIGENVALUE_TOL)) {
        return Err(Error::ZeroEigenvalue);
    }
    Ok(m.eigenvalues()
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let v = m.eigenvectors().column(j).into_owned();
            let rt = t.sqrt();
            GridFunction::scalar_profile(grid, &v, |x| (-x * rt).exp())
        })
        .collect())
}

/// Truncation length `30 / min_j Im sqrt(z - t_j)`, clamped to `[10, 1e4]`.
pub fn default_truncation<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>) -> Result<T> {
    let min_im = decaying_roots(m, z)?
        .iter()
        .map(|w| w.im)
        .fold(T::lit(f64::INFINITY), |a, b| if b < a { b } else { a });
    let l = T::lit(30.0) / min_im;
    Ok(l.max(T::lit(10.0)).min(T::lit(1e4)))
}

/// Default grid spacing for resolvent computations.
pub const DEFAULT_SPACING: f64 = 1.0 / 200.0;

/// `max_k |(-g'' + T g - z g - f)(x_k)|` over interior nodes, with
/// second differences for `g''`.
pub fn interior_residual<T: Real>(
    m: &SpectralMeasure<T>,
    z: Complex<T>,
    g: &GridFunction<T>,
    f: Option<&GridFunction<T>>,
) -> T {
    let t = m.matrix();
    let h2 = cre(g.h() * g.h());
    let v = g.values();
    let mut worst = T::zero();
    for k in 1..v.len() - 1 {
        let mut r = -(&v[k + 1] - &v[k] * cre(T::lit(2.0)) + &v[k - 1]) / h2 + &t * &v[k] - &v[k] * z;
        if let Some(f) = f {
            r -= f.at(k);
        }
        let n = r.norm();
        if n > worst {
            worst = n;
        }
    }
    worst
}

/// One-sided second-order estimate of `g'(0)`.
pub fn boundary_derivative<T: Real>(g: &GridFunction<T>) -> CVector<T> {
    let v = g.values();
    (&v[1] * cre(T::lit(4.0)) - &v[0] * cre(T::lit(3.0)) - &v[2]) / cre(T::lit(2.0) * g.h())
}

/// `|g'(0) - B g(0)|` for a matrix parameter or `|g(0)|` for Dirichlet.
pub fn boundary_residual<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    g: &GridFunction<T>,
) -> Result<T> {
    if p.is_dirichlet() {
        return Ok(g.at(0).norm());
    }
    let b = p.base_matrix(m)?;
    Ok((boundary_derivative(g) - b * g.at(0)).norm())
}
