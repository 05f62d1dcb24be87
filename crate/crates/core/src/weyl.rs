//! Weyl functions of the half-line realizations and their boundary values.
//!
//! The base triplet is `Gamma_0 f = f(0)`, `Gamma_1 f = f'(0)`, whose Weyl
//! function is `M(z) = i sqrt(z - T)` with the branch of
//! [`branch_sqrt`](crate::spectral::branch_sqrt). Every other realization with
//! a matrix parameter `B` (boundary condition `f'(0) = B f(0)`) has the Weyl
//! function `M_B(z) = (B - M(z))^{-1}`.

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, hermitian_function, imag_part, real_part, spectral_norm, SINGULAR_FLOOR};
use crate::realizations::{ExtensionParameter, ParameterKind, ParameterLabel};
use crate::scalar::{cre, cx, CMatrix, Real};
use crate::spectral::{branch_sqrt, SpectralMeasure};
use crate::triplets::TripletTransform;

/// Distance below which a real evaluation point counts as hitting an eigenvalue.
pub const COLLISION_TOL: f64 = 1e-9;

/// Which boundary triplet a value or parameter refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletTag {
    Base,
    Regularized,
}

/// Realization whose Weyl function was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub enum Realization<T: Real> {
    DirichletBase,
    Neumann,
    Krein,
    Robin(CMatrix<T>),
}

impl<T: Real> Realization<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Realization::DirichletBase => "dirichlet",
            Realization::Neumann => "neumann",
            Realization::Krein => "krein",
            Realization::Robin(_) => "robin",
        }
    }
}

/// A value `M(z)` (or `M_B(z)`) at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzSample<T: Real> {
    pub z: Complex<T>,
    pub value: CMatrix<T>,
    pub realization: Realization<T>,
    pub triplet: TripletTag,
}

impl<T: Real> HerglotzSample<T> {
    /// Smallest eigenvalue of `Im value`.
    pub fn min_imag_eigenvalue(&self) -> T {
        crate::linalg::hermitian_eigenvalues(&imag_part(&self.value))
            .first()
            .copied()
            .unwrap_or_else(T::zero)
    }

    pub fn imag(&self) -> CMatrix<T> {
        imag_part(&self.value)
    }
}

/// `M(z) = i sqrt(z - T)` for `z` off `[t0, inf)`.
pub fn weyl_base<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>) -> Result<HerglotzSample<T>> {
    if z.im.is_zero() && z.re >= m.inf_spectrum() {
        return Err(Error::OnSpectrumWithoutLimit { t: z.re.as_f64() });
    }
    let value = m.apply_function(|lam| base_symbol(z, lam))?;
    Ok(HerglotzSample { z, value, realization: Realization::DirichletBase, triplet: TripletTag::Base })
}

#[inline]
pub(crate) fn base_symbol<T: Real>(z: Complex<T>, lam: T) -> Complex<T> {
    let w = branch_sqrt(z - cre(lam));
    cx(-w.im, w.re)
}

/// `M(t + i0)` evaluated in closed form.
fn base_boundary<T: Real>(m: &SpectralMeasure<T>, t: T) -> CMatrix<T> {
    let vals: Vec<_> = m.eigenvalues().iter().map(|&lam| base_symbol(cre(t), lam)).collect();
    m.synthesize(&vals)
}

/// Real-axis boundary value `M_kind(t + i0)` from the closed forms:
/// Dirichlet `i sqrt(t - T)`, Neumann `i (t - T)^{-1/2}`,
/// Krein `t^{-1} (i sqrt(t - T) - sqrt(T))`, Robin `(B - M(t + i0))^{-1}`.
pub fn boundary_value<T: Real>(
    m: &SpectralMeasure<T>,
    kind: &Realization<T>,
    t: T,
) -> Result<HerglotzSample<T>> {
    let z = cre(t);
    let value = match kind {
        Realization::DirichletBase => base_boundary(m, t),
        Realization::Neumann => {
            check_collision(m, t)?;
            let vals: Vec<_> = m
                .eigenvalues()
                .iter()
                .map(|&lam| cx(T::zero(), T::one()) / branch_sqrt(cre(t - lam)))
                .collect();
            m.synthesize(&vals)
        }
        Realization::Krein => {
            if t.abs() < T::lit(COLLISION_TOL) {
                return Err(Error::KreinAtZero);
            }
            let vals: Vec<_> = m
                .eigenvalues()
                .iter()
                .map(|&lam| (base_symbol(z, lam) - cre(lam.sqrt())) / cre(t))
                .collect();
            m.synthesize(&vals)
        }
        Realization::Robin(b) => {
            let base = base_boundary(m, t);
            guarded_inverse(&(b - base), SINGULAR_FLOOR)?
        }
    };
    Ok(HerglotzSample { z, value, realization: kind.clone(), triplet: TripletTag::Base })
}

fn check_collision<T: Real>(m: &SpectralMeasure<T>, t: T) -> Result<()> {
    if m.distance_to_spectrum(t) < T::lit(COLLISION_TOL) {
        return Err(Error::EigenvalueCollision { t: t.as_f64(), eigenvalue: m.nearest_eigenvalue(t).as_f64() });
    }
    Ok(())
}

/// Base Weyl function at any admissible point: the analytic value off the
/// real axis and the upper-edge boundary value on it.
pub(crate) fn base_value_or_limit<T: Real>(m: &SpectralMeasure<T>, z: Complex<T>) -> CMatrix<T> {
    let vals: Vec<_> = m.eigenvalues().iter().map(|&lam| base_symbol(z, lam)).collect();
    m.synthesize(&vals)
}

/// `M_B(z) = (B - M_tag(z))^{-1}`, with `M_tag` the base or regularized Weyl
/// function. A parameter given relative to the other triplet is converted.
///
/// Real `z` uses the boundary value `M(t + i0)`.
pub fn weyl_of_extension<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    z: Complex<T>,
    triplet: TripletTag,
) -> Result<HerglotzSample<T>> {
    let b_base = match &p.kind {
        ParameterKind::DirichletRelation => return Err(Error::DirichletParameter),
        ParameterKind::Matrix(b) => b,
    };
    if b_base.nrows() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: b_base.nrows() });
    }
    let base = base_value_or_limit(m, z);
    let value = match triplet {
        TripletTag::Base => {
            let b = match p.triplet {
                TripletTag::Base => b_base.clone(),
                TripletTag::Regularized => TripletTransform::for_measure(m)?.restore_matrix(b_base),
            };
            guarded_inverse(&(b - base), SINGULAR_FLOOR)?
        }
        TripletTag::Regularized => {
            let tt = TripletTransform::for_measure(m)?;
            let b = match p.triplet {
                TripletTag::Base => tt.transform_matrix(b_base),
                TripletTag::Regularized => b_base.clone(),
            };
            guarded_inverse(&(b - tt.transform_weyl(&base)), SINGULAR_FLOOR)?
        }
    };
    let realization = match p.label {
        ParameterLabel::Neumann => Realization::Neumann,
        ParameterLabel::Krein => Realization::Krein,
        _ => Realization::Robin(b_base.clone()),
    };
    Ok(HerglotzSample { z, value, realization, triplet })
}

/// Estimate of the invariant maximal normal function at `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFunctionEstimate {
    pub t: f64,
    pub value: f64,
    pub y_grid: Vec<f64>,
    /// `(1 + sqrt 2)(1 + t^2)^{1/4}`.
    pub bound: f64,
}

/// Smallest `y` on the geometric grid used by the normal-function estimates.
pub const NORMAL_FUNCTION_Y_MIN: f64 = 1e-10;

/// Geometric grid `1, r, r^2, ...` of `count` points down to
/// [`NORMAL_FUNCTION_Y_MIN`].
pub fn geometric_y_grid<T: Real>(count: usize) -> Vec<T> {
    let r = T::lit(NORMAL_FUNCTION_Y_MIN).powf(T::one() / T::lit((count - 1) as f64));
    let mut y = T::one();
    (0..count)
        .map(|_| {
            let cur = y;
            y *= r;
            cur
        })
        .collect()
}

/// Analytic bound `(1 + sqrt 2)(1 + t^2)^{1/4}` for the base Weyl function.
pub fn normal_function_bound(t: f64) -> f64 {
    (1.0 + std::f64::consts::SQRT_2) * (1.0 + t * t).powf(0.25)
}

/// Supremum over `y in (0, 1]` of
/// `|| (Im M(i))^{-1/2} (M(t + iy) - Re M(i)) (Im M(i))^{-1/2} ||`
/// for an arbitrary Weyl function, sampled on a geometric grid.
pub fn max_normal_function_of<T, F>(weyl: F, t: T, y_count: usize) -> Result<NormalFunctionEstimate>
where
    T: Real,
    F: Fn(Complex<T>) -> Result<CMatrix<T>>,
{
    if y_count < 8 {
        return Err(Error::InvalidArgument(format!("y_count must be at least 8, got {y_count}")));
    }
    let m_i = weyl(cx(T::zero(), T::one()))?;
    let im = imag_part(&m_i);
    let re = real_part(&m_i);
    let floor = T::lit(1e-300);
    let im_inv_sqrt = hermitian_function(&im, |v| {
        if v > floor {
            cre(T::one() / v.sqrt())
        } else {
            cre(T::lit(f64::NAN))
        }
    })
    .map_err(|e| match e {
        Error::FunctionUndefinedAtEigenvalue { eigenvalue } => {
            Error::DegenerateImaginaryPart { min_eigenvalue: eigenvalue }
        }
        other => other,
    })?;
    let grid = geometric_y_grid::<T>(y_count);
    let mut best = T::zero();
    for &y in &grid {
        let v = weyl(cx(t, y))?;
        let sandwiched = &im_inv_sqrt * (v - &re) * &im_inv_sqrt;
        let n = spectral_norm(&sandwiched);
        if n > best {
            best = n;
        }
    }
    Ok(NormalFunctionEstimate {
        t: t.as_f64(),
        value: best.as_f64(),
        y_grid: grid.iter().map(|y| y.as_f64()).collect(),
        bound: normal_function_bound(t.as_f64()),
    })
}

/// Invariant maximal normal function of the base Weyl function `i sqrt(z - T)`.
pub fn invariant_max_normal<T: Real>(
    m: &SpectralMeasure<T>,
    t: T,
    y_count: usize,
) -> Result<NormalFunctionEstimate> {
    max_normal_function_of(|z| Ok(base_value_or_limit(m, z)), t, y_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, max_abs};
    use crate::realizations::{canonical_parameter, CanonicalKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn diag(v: &[f64]) -> SpectralMeasure<f64> {
        SpectralMeasure::from_diagonal(v).unwrap()
    }

    fn scalar(s: &HerglotzSample<f64>) -> Complex<f64> {
        s.value[(0, 0)]
    }

    #[test]
    fn weyl_base_examples() {
        let v = scalar(&weyl_base(&diag(&[0.0]), cx(0.0, 1.0)).unwrap());
        assert!((v - cx(-S, S)).norm() < 1e-15);
        let v = weyl_base(&diag(&[1.0, 4.0]), cre(0.0)).unwrap().value;
        assert!((v[(0, 0)] - cre(-1.0)).norm() < 1e-15 && (v[(1, 1)] - cre(-2.0)).norm() < 1e-15);
        let v = scalar(&weyl_base(&diag(&[1.0]), cre(-3.0)).unwrap());
        assert!((v - cre(-2.0)).norm() < 1e-15);
        assert!(matches!(
            weyl_base(&diag(&[1.0]), cre(1.5)),
            Err(Error::OnSpectrumWithoutLimit { .. })
        ));
    }

    #[test]
    fn boundary_value_examples() {
        let v = scalar(&boundary_value(&diag(&[1.0]), &Realization::DirichletBase, 5.0).unwrap());
        assert!((v - cx(0.0, 2.0)).norm() < 1e-15);

        let k = boundary_value(&diag(&[1.0, 9.0]), &Realization::Krein, 4.0).unwrap();
        let im = k.imag();
        assert!((im[(0, 0)].re - 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert!(im[(1, 1)].norm() < 1e-15);

        let v = scalar(&boundary_value(&diag(&[1.0]), &Realization::Neumann, 2.0).unwrap());
        assert!((v - cx(0.0, 1.0)).norm() < 1e-15);

        assert!(matches!(
            boundary_value(&diag(&[1.0]), &Realization::Neumann, 1.0 + 1e-12),
            Err(Error::EigenvalueCollision { .. })
        ));
        assert!(matches!(
            boundary_value(&diag(&[1.0]), &Realization::Krein, 0.0),
            Err(Error::KreinAtZero)
        ));
    }

    #[test]
    fn dirichlet_boundary_imag_is_projected_root() {
        let m = diag(&[0.5, 2.0, 7.0]);
        for &t in &[0.1, 1.0, 3.0, 10.0] {
            let im = boundary_value(&m, &Realization::DirichletBase, t).unwrap().imag();
            for (j, &lam) in m.eigenvalues().iter().enumerate() {
                let want = if lam < t { (t - lam).sqrt() } else { 0.0 };
                assert!((im[(j, j)].re - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn weyl_of_extension_examples() {
        let m = diag(&[1.0]);
        let neumann = canonical_parameter(&m, CanonicalKind::Neumann, TripletTag::Base);
        let v = scalar(&weyl_of_extension(&m, &neumann, cre(2.0), TripletTag::Base).unwrap());
        assert!((v - cx(0.0, 1.0)).norm() < 1e-15);

        let krein = canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base);
        let v = scalar(&weyl_of_extension(&m, &krein, cre(2.0), TripletTag::Base).unwrap());
        assert!((v - cx(-0.5, 0.5)).norm() < 1e-15);
        // closed form (1/z)(i sqrt(z - T) - sqrt T)
        let z = cre(2.0);
        let closed = (base_symbol(z, 1.0) - cre(1.0)) / z;
        assert!((v - closed).norm() < 1e-15);

        // (1 - e^{3 pi i / 4})^{-1} by scalar arithmetic
        let m0 = diag(&[0.0]);
        let b = ExtensionParameter::matrix(CMatrix::identity(1, 1), TripletTag::Base);
        let v = scalar(&weyl_of_extension(&m0, &b, cx(0.0, 1.0), TripletTag::Base).unwrap());
        let want = cre(1.0) / (cre(1.0) - cx(-S, S));
        assert!((v - want).norm() < 1e-15);
        assert!((v - cx(0.5, 0.20710678118654752)).norm() < 1e-12);

        let d = canonical_parameter(&m, CanonicalKind::Dirichlet, TripletTag::Base);
        assert!(matches!(
            weyl_of_extension(&m, &d, cx(0.0, 1.0), TripletTag::Base),
            Err(Error::DirichletParameter)
        ));
    }

    #[test]
    fn singular_pencil_is_typed() {
        // B - M(-3) = -2 - (-2) = 0 for T = 1
        let m = diag(&[1.0]);
        let b = ExtensionParameter::matrix(CMatrix::from_element(1, 1, cre(-2.0)), TripletTag::Base);
        assert!(matches!(
            weyl_of_extension(&m, &b, cre(-3.0), TripletTag::Base),
            Err(Error::SingularPencil { .. })
        ));
    }

    #[test]
    fn extension_covariant_under_regularization() {
        let m = diag(&[0.3, 1.7]);
        let b = ExtensionParameter::matrix(
            CMatrix::from_row_slice(2, 2, &[cre(0.4), cx(0.1, 0.2), cx(0.1, -0.2), cre(-0.9)]),
            TripletTag::Base,
        );
        let z = cx(0.7, 0.4);
        let base = weyl_of_extension(&m, &b, z, TripletTag::Base).unwrap().value;
        let reg = weyl_of_extension(&m, &b, z, TripletTag::Regularized).unwrap().value;
        let tt = TripletTransform::for_measure(&m).unwrap();
        let want = tt.r() * base * tt.r();
        assert!(max_abs(&(reg - want)) < 1e-10);
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> SpectralMeasure<f64> {
        let g = CMatrix::<f64>::from_fn(n, n, |_, _| cx(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        SpectralMeasure::from_matrix(&(g.adjoint() * g)).unwrap()
    }

    #[test]
    fn herglotz_and_symmetry_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = rng.random_range(1..5);
            let m = random_psd(&mut rng, n);
            let z = cx(rng.random_range(-5.0..10.0), rng.random_range(0.01..5.0));
            let s = weyl_base(&m, z).unwrap();
            assert!(s.min_imag_eigenvalue() >= -1e-10);
            let lower = weyl_base(&m, z.conj()).unwrap().value;
            assert!(spectral_norm(&(lower - s.value.adjoint())) <= 1e-12);
            let b = CMatrix::<f64>::from_fn(n, n, |_, _| cx(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)));
            let b = real_part(&b);
            let p = ExtensionParameter::matrix(b, TripletTag::Base);
            let mb = weyl_of_extension(&m, &p, z, TripletTag::Base).unwrap();
            assert!(mb.min_imag_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn monotone_on_the_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let m = random_psd(&mut rng, 3);
            let t0 = m.inf_spectrum();
            let x1 = t0 - rng.random_range(0.5..5.0);
            let x2 = x1 + rng.random_range(0.0..(t0 - x1));
            let d = weyl_base(&m, cre(x2)).unwrap().value - weyl_base(&m, cre(x1)).unwrap().value;
            assert!(hermitian_eigenvalues(&d)[0] >= -1e-10);
        }
    }

    #[test]
    fn neumann_diverges_at_eigenvalues() {
        let m = diag(&[1.0, 3.0]);
        let v = boundary_value(&m, &Realization::Neumann, 3.0 + 1e-8).unwrap().value;
        assert!(spectral_norm(&v) > 1e3);
    }

    #[test]
    fn dirichlet_rank_matches_counting() {
        let m = diag(&[0.5, 1.0, 1.0, 4.0]);
        for &t in &[-1.0, 0.7, 2.0, 5.0] {
            let im = boundary_value(&m, &Realization::DirichletBase, t).unwrap().imag();
            let rank = hermitian_eigenvalues(&im).iter().filter(|&&v| v > 1e-8).count();
            assert_eq!(rank, m.counting_function(t));
        }
    }

    #[test]
    fn max_normal_function_examples() {
        let est = invariant_max_normal(&diag(&[0.0]), 0.0, 64).unwrap();
        assert!((est.value - 1.0).abs() < 1e-6, "{}", est.value);
        assert!((est.bound - (1.0 + std::f64::consts::SQRT_2)).abs() < 1e-12);
        assert_eq!(est.y_grid.len(), 64);
        assert_eq!(est.y_grid[0], 1.0);

        let est = invariant_max_normal(&diag(&[1.0]), -5.0, 64).unwrap();
        assert!(est.value <= (1.0 + std::f64::consts::SQRT_2) * 26f64.powf(0.25));

        assert!(invariant_max_normal(&diag(&[1.0]), 0.0, 4).is_err());
    }

    /// Per-channel scalar oracle for diagonal `T`:
    /// `max_y max_j |i sqrt(t + iy - t_j) + Im sqrt(i - t_j)| / Re sqrt(i - t_j)`.
    fn scalar_normal_oracle(eigs: &[f64], t: f64, ys: &[f64]) -> f64 {
        let mut best: f64 = 0.0;
        for &lam in eigs {
            let r = branch_sqrt(cx(-lam, 1.0));
            for &y in ys {
                let w = branch_sqrt(cx(t - lam, y));
                best = best.max((cx(-w.im + r.im, w.re)).norm() / r.re);
            }
        }
        best
    }

    #[test]
    fn max_normal_function_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let eigs: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..6.0)).collect();
            let t = rng.random_range(-10.0..20.0);
            let est = invariant_max_normal(&diag(&eigs), t, 32).unwrap();
            let want = scalar_normal_oracle(&eigs, t, &est.y_grid);
            assert!((est.value - want).abs() < 1e-10 * want.max(1.0), "{} vs {want}", est.value);
        }
    }

    #[test]
    fn max_normal_function_bound_on_moderate_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let m = random_psd(&mut rng, 3);
            for t in [-5.0, -1.0, 0.0, 0.5, 1.0] {
                let est = invariant_max_normal(&m, t, 32).unwrap();
                assert!(est.value <= est.bound + 1e-8, "t = {t}: {} > {}", est.value, est.bound);
            }
        }
    }

    #[test]
    fn max_normal_function_exceeds_bound_for_large_t() {
        // T = 4, t = 10, y -> 0: |sqrt 6 i + Im sqrt(i - 4)| / Re sqrt(i - 4) = 12.78 > 7.65
        let est = invariant_max_normal(&diag(&[4.0]), 10.0, 64).unwrap();
        let r = branch_sqrt(cx(-4.0, 1.0));
        let want = (6f64 + r.im * r.im).sqrt() / r.re;
        assert!((est.value - want).abs() < 1e-6 * want);
        assert!((want - 12.785).abs() < 1e-3);
        assert!(est.value > est.bound);
    }

    #[test]
    fn neumann_normal_function_blows_up_near_eigenvalue() {
        let m = diag(&[1.0]);
        let p = canonical_parameter(&m, CanonicalKind::Neumann, TripletTag::Base);
        let est = max_normal_function_of(
            |z| weyl_of_extension(&m, &p, z, TripletTag::Base).map(|s| s.value),
            1.0,
            64,
        )
        .unwrap();
        assert!(est.value > 1e3, "{}", est.value);
    }
}
