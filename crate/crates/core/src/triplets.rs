//! Regularized boundary triplets and their direct sums.
//!
//! A transform `(R, Q)` with `R = (Im M(i))^{1/2}` and `Q = Re M(i)` maps a
//! triplet `{Gamma_0, Gamma_1}` to `{R Gamma_0, R^{-1}(Gamma_1 - Q Gamma_0)}`.
//! Its Weyl function is `R^{-1}(M(z) - Q) R^{-1}`, which equals `iI` at
//! `z = i`. A matrix parameter moves along as `R^{-1}(B - Q) R^{-1}`, which
//! keeps `ker(Gamma_1 - B Gamma_0)` fixed:
//!
//! ```text
//! Gamma~_1 - B~ Gamma~_0 = R^{-1}(Gamma_1 - Q Gamma_0) - R^{-1}(B - Q) Gamma_0
//!                        = R^{-1}(Gamma_1 - B Gamma_0).
//! ```
//!
//! For the half-line model every block is regularized separately and the
//! Weyl function of the sum is block diagonal.

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{block_diagonal, hermitian_eigenvalues, hermitian_function, imag_part, real_part};
use crate::realizations::{ExtensionParameter, ParameterKind};
use crate::scalar::{cre, cx, tol, CMatrix, CVector, Real};
use crate::spectral::SpectralMeasure;
use crate::weyl::{base_value_or_limit, weyl_base, TripletTag};

/// Smallest admissible eigenvalue of `Im M(i)`.
pub const MIN_IMAG_EIGENVALUE: f64 = 1e-12;

/// `(R, Q)` taking a source triplet to its regularized form.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletTransform<T: Real> {
    r: CMatrix<T>,
    r_inv: CMatrix<T>,
    q: CMatrix<T>,
    pub source: TripletTag,
    pub target: TripletTag,
}

impl<T: Real> TripletTransform<T> {
    /// Transform built from the value of a Weyl function at `z = i`.
    pub fn regularize(m_at_i: &CMatrix<T>) -> Result<Self> {
        let im = imag_part(m_at_i);
        let min_eig = hermitian_eigenvalues(&im).first().copied().unwrap_or_else(T::zero);
        if !(min_eig >= tol::<T>(MIN_IMAG_EIGENVALUE)) {
            return Err(Error::DegenerateImaginaryPart { min_eigenvalue: min_eig.as_f64() });
        }
        let r = hermitian_function(&im, |v| cre(v.sqrt()))?;
        let r_inv = hermitian_function(&im, |v| cre(T::one() / v.sqrt()))?;
        Ok(Self { r, r_inv, q: real_part(m_at_i), source: TripletTag::Base, target: TripletTag::Regularized })
    }

    /// Regularization of the base triplet of `-d^2/dx^2 + T`.
    pub fn for_measure(m: &SpectralMeasure<T>) -> Result<Self> {
        Self::regularize(&weyl_base(m, cx(T::zero(), T::one()))?.value)
    }

    /// The identity transform `R = I`, `Q = 0`.
    pub fn identity(dim: usize) -> Self {
        Self {
            r: CMatrix::identity(dim, dim),
            r_inv: CMatrix::identity(dim, dim),
            q: CMatrix::zeros(dim, dim),
            source: TripletTag::Base,
            target: TripletTag::Base,
        }
    }

    pub fn r(&self) -> &CMatrix<T> {
        &self.r
    }

    pub fn r_inv(&self) -> &CMatrix<T> {
        &self.r_inv
    }

    pub fn q(&self) -> &CMatrix<T> {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    /// `R^{-1} (M - Q) R^{-*}`; `R` is Hermitian except after composition.
    pub fn transform_weyl(&self, m_value: &CMatrix<T>) -> CMatrix<T> {
        &self.r_inv * (m_value - &self.q) * self.r_inv.adjoint()
    }

    /// `R^{-1} (B - Q) R^{-1}`.
    pub fn transform_matrix(&self, b: &CMatrix<T>) -> CMatrix<T> {
        self.transform_weyl(b)
    }

    /// Inverse of [`transform_matrix`](Self::transform_matrix): `R B~ R* + Q`.
    pub fn restore_matrix(&self, b_tilde: &CMatrix<T>) -> CMatrix<T> {
        &self.r * b_tilde * self.r.adjoint() + &self.q
    }

    /// Parameter expressed relative to the target triplet. The Dirichlet
    /// relation is `ker Gamma_0 = ker Gamma~_0` and passes through unchanged.
    pub fn transform_parameter(&self, p: &ExtensionParameter<T>) -> ExtensionParameter<T> {
        match &p.kind {
            ParameterKind::DirichletRelation => ExtensionParameter { triplet: self.target, ..p.clone() },
            ParameterKind::Matrix(b) => ExtensionParameter {
                kind: ParameterKind::Matrix(self.transform_matrix(b)),
                triplet: self.target,
                label: p.label,
            },
        }
    }

    /// Composition: apply `self`, then `next`.
    pub fn then(&self, next: &TripletTransform<T>) -> TripletTransform<T> {
        // S^{-1}(M - Q - R Qn R*)S^{-*} with S = R Rn
        let s = &self.r * &next.r;
        let s_inv = &next.r_inv * &self.r_inv;
        let q = &self.q + &self.r * &next.q * self.r.adjoint();
        TripletTransform { r: s, r_inv: s_inv, q, source: self.source, target: next.target }
    }
}

/// Closed-form expressions for the regularized triplet of the half-line model.
pub mod closed_form {
    use super::*;

    /// `Re sqrt(i - T) = 2^{-1/2} (T + sqrt(1 + T^2))^{-1/2}`.
    pub fn re_sqrt_i_minus<T: Real>(lam: T) -> T {
        let s = lam + (T::one() + lam * lam).sqrt();
        T::one() / (T::lit(2.0).sqrt() * s.sqrt())
    }

    /// `Im sqrt(i - T) = 2^{-1/2} (T + sqrt(1 + T^2))^{1/2}`.
    pub fn im_sqrt_i_minus<T: Real>(lam: T) -> T {
        let s = lam + (T::one() + lam * lam).sqrt();
        s.sqrt() / T::lit(2.0).sqrt()
    }

    /// Regularized Krein parameter
    /// `(sqrt 2 sqrt T + sqrt(T + sqrt(1 + T^2)))^{-1} (T + sqrt(1 + T^2))^{-1/2}`.
    pub fn krein_parameter<T: Real>(lam: T) -> T {
        let s = lam + (T::one() + lam * lam).sqrt();
        T::one() / ((T::lit(2.0).sqrt() * lam.sqrt() + s.sqrt()) * s.sqrt())
    }

    /// Regularized Neumann parameter `T + sqrt(1 + T^2)`.
    pub fn neumann_parameter<T: Real>(lam: T) -> T {
        lam + (T::one() + lam * lam).sqrt()
    }

    /// Regularized Weyl function `(i sqrt(z - T) + Im sqrt(i - T)) / Re sqrt(i - T)`.
    pub fn regularized_weyl<T: Real>(z: Complex<T>, lam: T) -> Complex<T> {
        (crate::weyl::base_symbol(z, lam) + cre(im_sqrt_i_minus(lam))) / cre(re_sqrt_i_minus(lam))
    }

    /// Matrix versions through the functional calculus of `T`.
    pub fn apply<T: Real>(m: &SpectralMeasure<T>, f: fn(T) -> T) -> CMatrix<T> {
        let vals: Vec<_> = m.eigenvalues().iter().map(|&l| cre(f(l))).collect();
        m.synthesize(&vals)
    }

    pub fn regularized_weyl_matrix<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>) -> CMatrix<T> {
        let vals: Vec<_> = m.eigenvalues().iter().map(|&l| regularized_weyl(z, l)).collect();
        m.synthesize(&vals)
    }
}

/// Half-open spectral window `[lo, hi)` of one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window<T> {
    pub lo: T,
    pub hi: T,
}

/// Finite direct sum `T = T_1 + T_2 + ...` of potential slices, each with its
/// own regularized triplet.
#[derive(Debug, Clone)]
pub struct BlockModel<T: Real> {
    blocks: Vec<SpectralMeasure<T>>,
    windows: Vec<Window<T>>,
    transforms: Vec<TripletTransform<T>>,
    /// Columns map each block's coordinates into the ambient space (only
    /// for models built by [`BlockModel::slice`]).
    embedding: Option<CMatrix<T>>,
    unbounded_tail: bool,
}

impl<T: Real> BlockModel<T> {
    /// Blocks with unit windows `[n, n + 1)` inferred from each block's bottom.
    pub fn new(blocks: Vec<SpectralMeasure<T>>) -> Result<Self> {
        let windows = blocks
            .iter()
            .map(|b| {
                let lo = b.inf_spectrum().floor();
                Window { lo, hi: lo + T::one() }
            })
            .collect();
        Self::with_windows(blocks, windows)
    }

    /// Blocks with explicitly declared windows (pairwise disjoint, increasing).
    pub fn with_windows(blocks: Vec<SpectralMeasure<T>>, windows: Vec<Window<T>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("block model needs at least one block".into()));
        }
        if blocks.len() != windows.len() {
            return Err(Error::DimensionMismatch { expected: blocks.len(), got: windows.len() });
        }
        for (k, (b, w)) in blocks.iter().zip(&windows).enumerate() {
            if !(w.lo < w.hi) {
                return Err(Error::InvalidArgument(format!("window {k} is empty")));
            }
            if b.eigenvalues().iter().any(|&v| v < w.lo || v >= w.hi) {
                return Err(Error::InvalidArgument(format!(
                    "block {k} has spectrum outside its window [{}, {})",
                    w.lo, w.hi
                )));
            }
            if k > 0 && windows[k - 1].hi > w.lo {
                return Err(Error::InvalidArgument(format!("window {k} overlaps its predecessor")));
            }
        }
        let transforms = blocks.iter().map(TripletTransform::for_measure).collect::<Result<Vec<_>>>()?;
        Ok(Self { blocks, windows, transforms, embedding: None, unbounded_tail: false })
    }

    /// Slices `m` into `T E_T([k w, (k + 1) w))`, keeping non-empty windows.
    pub fn slice(m: &SpectralMeasure<T>, width: T) -> Result<Self> {
        if !(width > T::zero()) {
            return Err(Error::InvalidArgument("window width must be positive".into()));
        }
        let mut groups: Vec<(i64, Vec<usize>)> = Vec::new();
        for (j, &v) in m.eigenvalues().iter().enumerate() {
            let k = (v / width).floor().as_f64() as i64;
            match groups.last_mut() {
                Some((kk, idx)) if *kk == k => idx.push(j),
                _ => groups.push((k, vec![j])),
            }
        }
        let mut blocks = Vec::new();
        let mut windows = Vec::new();
        let mut embedding = CMatrix::<T>::zeros(m.dim(), m.dim());
        let mut col = 0;
        for (k, idx) in &groups {
            let vals: Vec<T> = idx.iter().map(|&j| m.eigenvalues()[j]).collect();
            blocks.push(SpectralMeasure::from_diagonal(&vals)?);
            let lo = width * T::lit(*k as f64);
            windows.push(Window { lo, hi: lo + width });
            for &j in idx {
                embedding.set_column(col, &m.eigenvectors().column(j));
                col += 1;
            }
        }
        let mut model = Self::with_windows(blocks, windows)?;
        model.embedding = Some(embedding);
        Ok(model)
    }

    /// Treat the last block as repeating indefinitely: the assembled
    /// measure then declares `t1` = bottom of the last block.
    pub fn with_unbounded_tail(mut self) -> Self {
        self.unbounded_tail = true;
        self
    }

    pub fn blocks(&self) -> &[SpectralMeasure<T>] {
        &self.blocks
    }

    pub fn windows(&self) -> &[Window<T>] {
        &self.windows
    }

    pub fn transforms(&self) -> &[TripletTransform<T>] {
        &self.transforms
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    /// Block offsets into the direct-sum coordinates.
    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.blocks.len());
        let mut acc = 0;
        for b in &self.blocks {
            off.push(acc);
            acc += b.dim();
        }
        off
    }

    /// `T_1 + T_2 + ...` as one measure in direct-sum coordinates.
    pub fn assembled_measure(&self) -> Result<SpectralMeasure<T>> {
        let mats: Vec<_> = self.blocks.iter().map(|b| b.matrix()).collect();
        let m = SpectralMeasure::from_matrix(&block_diagonal(&mats))?;
        Ok(match (self.unbounded_tail, self.blocks.last()) {
            (true, Some(last)) => m.with_essential_edge(last.inf_spectrum()),
            _ => m,
        })
    }

    /// Maps a direct-sum matrix back to the ambient space of the sliced measure.
    pub fn to_ambient(&self, a: &CMatrix<T>) -> Option<CMatrix<T>> {
        self.embedding.as_ref().map(|v| v * a * v.adjoint())
    }

    /// Bottom of the spectrum over all blocks.
    pub fn inf_spectrum(&self) -> T {
        self.blocks
            .iter()
            .map(|b| b.inf_spectrum())
            .fold(T::lit(f64::INFINITY), |a, b| if b < a { b } else { a })
    }

    /// Direct sum of the per-block regularized Weyl values at `z`.
    pub fn direct_sum_weyl(&self, z: Complex<T>) -> Result<CMatrix<T>> {
        if z.im.is_zero() && z.re >= self.inf_spectrum() {
            return Err(Error::OnSpectrumWithoutLimit { t: z.re.as_f64() });
        }
        let parts = self
            .blocks
            .iter()
            .zip(&self.transforms)
            .map(|(b, tt)| Ok(tt.transform_weyl(&weyl_base(b, z)?.value)))
            .collect::<Result<Vec<_>>>()?;
        Ok(block_diagonal(&parts))
    }

    /// Blockwise regularized Krein parameters `R_n^{-1}(-sqrt(T_n) - Q_n) R_n^{-1}`.
    pub fn krein_parameter(&self) -> CMatrix<T> {
        let parts: Vec<_> = self
            .blocks
            .iter()
            .zip(&self.transforms)
            .map(|(b, tt)| tt.transform_matrix(&(-b.sqrt())))
            .collect();
        block_diagonal(&parts)
    }

    /// The direct sum of the per-block transforms as a single transform.
    pub fn summed_transform(&self) -> TripletTransform<T> {
        let r: Vec<_> = self.transforms.iter().map(|t| t.r.clone()).collect();
        let ri: Vec<_> = self.transforms.iter().map(|t| t.r_inv.clone()).collect();
        let q: Vec<_> = self.transforms.iter().map(|t| t.q.clone()).collect();
        TripletTransform {
            r: block_diagonal(&r),
            r_inv: block_diagonal(&ri),
            q: block_diagonal(&q),
            source: TripletTag::Base,
            target: TripletTag::Regularized,
        }
    }
}

/// Result of probing `((B~K - M~(-x))^{-1} h, h)` as `x` decreases to 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub x: Vec<f64>,
    /// `None` where the pencil was singular (point skipped).
    pub values: Vec<Option<f64>>,
    pub strictly_increasing: bool,
    pub threshold: f64,
    pub crossed_threshold: bool,
    /// Least-squares exponent `p` in `value ~ x^{-p}` over the valid points.
    pub rate_exponent: Option<f64>,
}

/// Default level the Krein quadratic form must exceed to count as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e3;

/// Probes the divergence of the Krein-parameter Weyl function of the sum on
/// the negative half-axis. `x_grid` must be positive and decreasing, with
/// all points at least `1e-8`.
pub fn krein_divergence_check<T: Real>(
    bm: &BlockModel<T>,
    h: &CVector<T>,
    x_grid: &[T],
    threshold: f64,
) -> Result<DivergenceReport> {
    if h.len() != bm.dim() {
        return Err(Error::DimensionMismatch { expected: bm.dim(), got: h.len() });
    }
    if x_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if x_grid.iter().any(|&x| x < T::lit(1e-8)) || x_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::BadGrid("x grid must be decreasing with min >= 1e-8".into()));
    }
    let offsets = bm.offsets();
    let mut values = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let z = cre(-x);
        let mut acc = T::zero();
        let mut singular = false;
        for ((b, tt), &off) in bm.blocks.iter().zip(&bm.transforms).zip(&offsets) {
            let k = b.dim();
            let hb = h.rows(off, k).into_owned();
            if hb.iter().all(|c| c.re.is_zero() && c.im.is_zero()) {
                continue;
            }
            let bk = tt.transform_matrix(&(-b.sqrt()));
            let mt = tt.transform_weyl(&base_value_or_limit(b, z));
            match crate::linalg::guarded_inverse(&(bk - mt), crate::linalg::SINGULAR_FLOOR) {
                Ok(inv) => acc += (hb.adjoint() * inv * &hb)[(0, 0)].re,
                Err(Error::SingularPencil { .. }) => {
                    singular = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        values.push(if singular { None } else { Some(acc.as_f64()) });
    }
    let valid: Vec<(f64, f64)> = x_grid
        .iter()
        .zip(&values)
        .filter_map(|(&x, v)| v.map(|v| (x.as_f64(), v)))
        .collect();
    let strictly_increasing = valid.windows(2).all(|w| w[1].1 > w[0].1);
    let crossed_threshold = valid.last().map(|&(_, v)| v > threshold).unwrap_or(false);
    let rate_exponent = {
        let pts: Vec<(f64, f64)> = valid.iter().filter(|(_, v)| *v > 0.0).map(|&(x, v)| (x.ln(), v.ln())).collect();
        if pts.len() >= 2 {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            (sxx > 0.0).then(|| -sxy / sxx)
        } else {
            None
        }
    };
    Ok(DivergenceReport {
        x: x_grid.iter().map(|x| x.as_f64()).collect(),
        values,
        strictly_increasing,
        threshold,
        crossed_threshold,
        rate_exponent,
    })
}
