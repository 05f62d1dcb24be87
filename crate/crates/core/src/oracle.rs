//! Finite-difference oracle for `-d^2/dx^2 + T`, independent of the
//! analytic path: it only ever sees the matrix `T` in the original basis.
//!
//! Every discretization is a block-tridiagonal Hermitian pencil `(K, M)`
//! with `M` positive definite; eigenvalues solve `K v = lambda M v` and
//! resolvents solve `(K - z M) g = M f`.
//!
//! Boundary rows:
//!
//! * Dirichlet: the boundary node is not an unknown.
//! * Robin `f'(0) = B f(0)` (three-point stencil): the ghost value
//!   `f_{-1} = f_1 - 2 h B f_0` turns row 0 into
//!   `(2 f_0 - 2 f_1 + 2 h B f_0) / h^2 + T f_0`. Halving that row (and its
//!   mass) makes `K` Hermitian: diagonal `1/h^2 + B/h + T/2`, coupling
//!   `-1/h^2`, mass `1/2`.
//! * Neumann at either end: the same construction with `B = 0`.
//!
//! The interval `[0, pi]` defaults to the compact fourth-order (Numerov)
//! pencil `K = -D_2 + N T`, `M = N`, with `N = tridiag(1, 10, 1) / 12`. Its
//! Dirichlet and Neumann rows come from odd and even reflection, which are
//! exact for those conditions.

use nalgebra::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_deviation, hermitian_eigenvalues};
use crate::realizations::{ExtensionParameter, GridFunction, UniformGrid};
use crate::scalar::{cre, CMatrix, CVector, Real};
use crate::spectral::SpectralMeasure;

/// Boundary condition at one end of the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary<T: Real> {
    Dirichlet,
    Neumann,
    /// `f'(0) = B f(0)` at the left end.
    Robin(CMatrix<T>),
}

impl<T: Real> Boundary<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
            Boundary::Robin(_) => "robin",
        }
    }
}

/// Conditions at both ends of `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalBc {
    DD,
    NN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Second order.
    ThreePoint,
    /// Fourth order, mass matrix `tridiag(1, 10, 1) / 12`.
    Numerov,
}

/// Hermitian block-tridiagonal pencil on a uniform grid.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator<T: Real> {
    grid: UniformGrid<T>,
    left: Boundary<T>,
    right: Boundary<T>,
    stencil: Stencil,
    dim: usize,
    /// Grid index of the first unknown.
    first: usize,
    k_diag: Vec<CMatrix<T>>,
    /// `k_off[i]` is the block at (i, i + 1); the block at (i + 1, i) is its adjoint.
    k_off: Vec<CMatrix<T>>,
    m_diag: Vec<CMatrix<T>>,
    m_off: Vec<CMatrix<T>>,
    pub label: String,
}

impl<T: Real> DiscretizedOperator<T> {
    fn assemble(
        t: &CMatrix<T>,
        grid: UniformGrid<T>,
        left: Boundary<T>,
        right: Boundary<T>,
        stencil: Stencil,
        label: String,
    ) -> Result<Self> {
        let dim = t.nrows();
        let n = grid.n;
        let first = usize::from(left == Boundary::Dirichlet);
        let last = if right == Boundary::Dirichlet { n - 1 } else { n };
        if last < first {
            return Err(Error::BadGrid("no interior unknowns".into()));
        }
        let h = grid.h;
        let inv_h2 = cre(T::one() / (h * h));
        let id = CMatrix::<T>::identity(dim, dim);
        let (w_diag, w_off) = match stencil {
            Stencil::ThreePoint => (T::one(), T::zero()),
            Stencil::Numerov => (T::lit(10.0 / 12.0), T::lit(1.0 / 12.0)),
        };
        let interior_k = &id * (inv_h2 * cre(T::lit(2.0))) + t * cre(w_diag);
        let off_k = &id * (-inv_h2) + t * cre(w_off);
        let interior_m = &id * cre(w_diag);
        let off_m = &id * cre(w_off);
        let count = last - first + 1;
        let mut k_diag = vec![interior_k.clone(); count];
        let mut m_diag = vec![interior_m.clone(); count];
        let k_off = vec![off_k; count - 1];
        let m_off = vec![off_m; count - 1];
        let half = cre(T::lit(0.5));
        match &left {
            Boundary::Dirichlet => {}
            Boundary::Neumann => {
                k_diag[0] = &interior_k * half;
                m_diag[0] = &interior_m * half;
            }
            Boundary::Robin(b) => {
                if stencil != Stencil::ThreePoint {
                    return Err(Error::InvalidArgument("Robin rows need the three-point stencil".into()));
                }
                if b.nrows() != dim || b.ncols() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: b.nrows() });
                }
                k_diag[0] = &interior_k * half + b * cre(T::one() / h);
                m_diag[0] = &interior_m * half;
            }
        }
        match &right {
            Boundary::Dirichlet => {}
            Boundary::Neumann => {
                k_diag[count - 1] = &interior_k * half;
                m_diag[count - 1] = &interior_m * half;
            }
            Boundary::Robin(_) => {
                return Err(Error::InvalidArgument("Robin condition is only supported at x = 0".into()));
            }
        }
        Ok(Self { grid, left, right, stencil, dim, first, k_diag, k_off, m_diag, m_off, label })
    }

    pub fn grid(&self) -> UniformGrid<T> {
        self.grid
    }

    pub fn h(&self) -> T {
        self.grid.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn left(&self) -> &Boundary<T> {
        &self.left
    }

    pub fn right(&self) -> &Boundary<T> {
        &self.right
    }

    /// Number of unknown grid nodes.
    pub fn nodes(&self) -> usize {
        self.k_diag.len()
    }

    /// Order of the assembled matrices.
    pub fn size(&self) -> usize {
        self.nodes() * self.dim
    }

    /// `K + c M`, whose spectrum is shifted by `c`.
    pub fn shifted(&self, c: T) -> Self {
        let mut out = self.clone();
        for (k, m) in out.k_diag.iter_mut().zip(&self.m_diag) {
            *k += m * cre(c);
        }
        for (k, m) in out.k_off.iter_mut().zip(&self.m_off) {
            *k += m * cre(c);
        }
        out
    }

    fn dense(blocks_d: &[CMatrix<T>], blocks_o: &[CMatrix<T>], dim: usize) -> CMatrix<T> {
        let n = blocks_d.len() * dim;
        let mut a = CMatrix::zeros(n, n);
        for (i, d) in blocks_d.iter().enumerate() {
            a.view_mut((i * dim, i * dim), (dim, dim)).copy_from(d);
        }
        for (i, o) in blocks_o.iter().enumerate() {
            a.view_mut((i * dim, (i + 1) * dim), (dim, dim)).copy_from(o);
            a.view_mut(((i + 1) * dim, i * dim), (dim, dim)).copy_from(&o.adjoint());
        }
        a
    }

    /// Dense stiffness matrix `K` (small problems and tests only).
    pub fn stiffness_dense(&self) -> CMatrix<T> {
        Self::dense(&self.k_diag, &self.k_off, self.dim)
    }

    /// Dense mass matrix `M`.
    pub fn mass_dense(&self) -> CMatrix<T> {
        Self::dense(&self.m_diag, &self.m_off, self.dim)
    }

    /// Largest deviation of the diagonal blocks from Hermitian symmetry;
    /// off-diagonal blocks are stored once and are symmetric by construction.
    pub fn hermitian_deviation(&self) -> T {
        self.k_diag
            .iter()
            .chain(&self.m_diag)
            .map(hermitian_deviation)
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Number of eigenvalues below `sigma` (inertia of `K - sigma M` by
    /// block LDL*), or `None` when a pivot block is singular.
    pub fn count_below(&self, sigma: T) -> Option<usize> {
        let s = cre(sigma);
        let tiny = T::lit(1e-300);
        if self.dim == 1 {
            let mut count = 0;
            let mut prev = Complex::new(T::zero(), T::zero());
            for i in 0..self.nodes() {
                let mut p = (self.k_diag[i][(0, 0)] - s * self.m_diag[i][(0, 0)]).re;
                if i > 0 {
                    let e = self.k_off[i - 1][(0, 0)] - s * self.m_off[i - 1][(0, 0)];
                    p -= e.norm_sqr() / prev.re;
                }
                if p.abs() <= tiny || !p.is_finite() {
                    return None;
                }
                if p < T::zero() {
                    count += 1;
                }
                prev = cre(p);
            }
            return Some(count);
        }
        let mut count = 0;
        let mut prev: Option<CMatrix<T>> = None;
        for i in 0..self.nodes() {
            let mut p = &self.k_diag[i] - &self.m_diag[i] * s;
            if let Some(sp) = &prev {
                let e = &self.k_off[i - 1] - &self.m_off[i - 1] * s;
                let x = sp.clone().lu().solve(&e)?;
                p -= e.adjoint() * x;
            }
            let eig = hermitian_eigenvalues(&p);
            let scale = eig.iter().map(|v| v.abs()).fold(T::one(), |a, b| if b > a { b } else { a });
            if eig.iter().any(|v| v.abs() <= T::lit(1e-14) * scale || !v.is_finite()) {
                return None;
            }
            count += eig.iter().filter(|&&v| v < T::zero()).count();
            prev = Some(p);
        }
        Some(count)
    }

    fn robust_count(&self, sigma: T) -> usize {
        let mut s = sigma;
        let step = T::lit(1e-13) * sigma.abs().max(T::one());
        for _ in 0..8 {
            if let Some(c) = self.count_below(s) {
                return c;
            }
            s += step;
        }
        self.count_below(s + step * T::lit(1e3)).unwrap_or(0)
    }

    /// Multiplies the stored pencil block rows against unknown-node values.
    fn apply_blocks(diag: &[CMatrix<T>], off: &[CMatrix<T>], v: &[CVector<T>]) -> Vec<CVector<T>> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut r = &diag[i] * &v[i];
                if i + 1 < n {
                    r += &off[i] * &v[i + 1];
                }
                if i > 0 {
                    r += off[i - 1].adjoint() * &v[i - 1];
                }
                r
            })
            .collect()
    }

    fn unknowns_of(&self, f: &GridFunction<T>) -> Result<Vec<CVector<T>>> {
        let g = f.grid();
        if g.n != self.grid.n || (g.h - self.grid.h).abs() > T::lit(1e-12) * self.grid.h {
            return Err(Error::GridMismatch);
        }
        if f.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: f.dim() });
        }
        Ok(f.values()[self.first..self.first + self.nodes()].to_vec())
    }

    fn embed(&self, u: Vec<CVector<T>>) -> GridFunction<T> {
        let mut out = GridFunction::zeros(self.grid, self.dim);
        for (i, v) in u.into_iter().enumerate() {
            out.values_mut()[self.first + i] = v;
        }
        out
    }

    /// `max_i |((K - z M) g - M f)_i|` over unknown nodes.
    pub fn residual(&self, z: Complex<T>, g: &GridFunction<T>, f: &GridFunction<T>) -> Result<T> {
        let gu = self.unknowns_of(g)?;
        let fu = self.unknowns_of(f)?;
        let kg = Self::apply_blocks(&self.k_diag, &self.k_off, &gu);
        let mg = Self::apply_blocks(&self.m_diag, &self.m_off, &gu);
        let mf = Self::apply_blocks(&self.m_diag, &self.m_off, &fu);
        Ok(kg
            .iter()
            .zip(&mg)
            .zip(&mf)
            .map(|((a, b), c)| (a - b * z - c).norm())
            .fold(T::zero(), |a, b| if b > a { b } else { a }))
    }
}

/// Half-line `[0, L]` with the realization's condition at 0 and a Dirichlet
/// cap at `L`, three-point stencil.
pub fn discretize_halfline<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    length: T,
    h: T,
) -> Result<DiscretizedOperator<T>> {
    if !(h > T::zero()) || h > length / T::lit(10.0) {
        return Err(Error::BadGrid(format!("need 0 < h <= L/10, got h = {h}, L = {length}")));
    }
    let grid = UniformGrid::new(h, length)?;
    let left = if p.is_dirichlet() { Boundary::Dirichlet } else { Boundary::Robin(p.base_matrix(m)?) };
    let label = format!("halfline[{}] L={length} h={}", crate::multiplicity::realization_name(p), grid.h);
    DiscretizedOperator::assemble(&m.matrix(), grid, left, Boundary::Dirichlet, Stencil::ThreePoint, label)
}

/// `[0, pi]` with Dirichlet or Neumann conditions at both ends, Numerov stencil.
pub fn discretize_interval<T: Real>(m: &SpectralMeasure<T>, bc: IntervalBc, h: T) -> Result<DiscretizedOperator<T>> {
    discretize_interval_with(m, bc, h, Stencil::Numerov)
}

pub fn discretize_interval_with<T: Real>(
    m: &SpectralMeasure<T>,
    bc: IntervalBc,
    h: T,
    stencil: Stencil,
) -> Result<DiscretizedOperator<T>> {
    let pi = T::pi();
    if !(h > T::zero()) || h > pi / T::lit(20.0) {
        return Err(Error::BadGrid(format!("need 0 < h <= pi/20, got h = {h}")));
    }
    let grid = UniformGrid::new(h, pi)?;
    let end = match bc {
        IntervalBc::DD => Boundary::Dirichlet,
        IntervalBc::NN => Boundary::Neumann,
    };
    let label = format!("interval[{bc:?}] h={}", grid.h);
    DiscretizedOperator::assemble(&m.matrix(), grid, end.clone(), end, stencil, label)
}

/// The `k` smallest eigenvalues of the pencil, ascending, by inertia bisection.
pub fn spectrum<T: Real>(d: &DiscretizedOperator<T>, k: usize) -> Result<Vec<T>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if k > d.size() {
        return Err(Error::InvalidArgument(format!("asked for {k} eigenvalues of a size-{} operator", d.size())));
    }
    let mut lo0 = -T::one();
    let mut guard = 0;
    while d.robust_count(lo0) > 0 {
        lo0 *= T::lit(4.0);
        guard += 1;
        if guard > 200 {
            return Err(Error::SolverFailure("no lower bound for the spectrum".into()));
        }
    }
    let mut hi0 = T::one();
    guard = 0;
    while d.robust_count(hi0) < k {
        hi0 *= T::lit(4.0);
        guard += 1;
        if guard > 200 {
            return Err(Error::SolverFailure("no upper bound for the spectrum".into()));
        }
    }
    let mut lo = vec![lo0; k];
    let mut hi = vec![hi0; k];
    let rel = T::lit(4.0) * T::eps().max(T::lit(1e-15));
    for i in 0..k {
        let mut iters = 0;
        while hi[i] - lo[i] > rel * lo[i].abs().max(hi[i].abs()).max(T::one()) {
            let mid = (lo[i] + hi[i]) * T::lit(0.5);
            if mid <= lo[i] || mid >= hi[i] {
                break;
            }
            let c = d.robust_count(mid);
            for j in i..k {
                if c > j {
                    if mid < hi[j] {
                        hi[j] = mid;
                    }
                } else if mid > lo[j] {
                    lo[j] = mid;
                }
            }
            iters += 1;
            if iters > 400 {
                return Err(Error::SolverFailure(format!("bisection stalled on eigenvalue {i}")));
            }
        }
    }
    Ok(lo.iter().zip(&hi).map(|(&a, &b)| (a + b) * T::lit(0.5)).collect())
}

/// Solves `(K - z M) g = M f` by block elimination; Dirichlet nodes of `g` are 0.
pub fn oracle_resolvent_apply<T: Real>(
    d: &DiscretizedOperator<T>,
    z: Complex<T>,
    f: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let fu = d.unknowns_of(f)?;
    let shift_err = || Error::ShiftOnSpectrum { re: z.re.as_f64(), im: z.im.as_f64() };
    if z.im.abs() <= T::lit(1e-10) * z.re.abs().max(T::one()) {
        let eps = T::lit(1e-10) * z.re.abs().max(T::one());
        if d.count_below(z.re - eps) != d.count_below(z.re + eps) || d.count_below(z.re).is_none() {
            return Err(shift_err());
        }
    }
    let rhs = DiscretizedOperator::apply_blocks(&d.m_diag, &d.m_off, &fu);
    let n = d.nodes();
    let a: Vec<CMatrix<T>> = d.k_diag.iter().zip(&d.m_diag).map(|(k, m)| k - m * z).collect();
    let upper: Vec<CMatrix<T>> = d.k_off.iter().zip(&d.m_off).map(|(k, m)| k - m * z).collect();
    let lower: Vec<CMatrix<T>> = d.k_off.iter().zip(&d.m_off).map(|(k, m)| k.adjoint() - m.adjoint() * z).collect();
    let mut piv: Vec<CMatrix<T>> = Vec::with_capacity(n);
    let mut y: Vec<CVector<T>> = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 {
            piv.push(a[0].clone());
            y.push(rhs[0].clone());
        } else {
            let lu = piv[i - 1].clone().lu();
            let l_times = lu.solve(&upper[i - 1]).ok_or_else(shift_err)?;
            let yv = lu.solve(&y[i - 1]).ok_or_else(shift_err)?;
            piv.push(&a[i] - &lower[i - 1] * l_times);
            y.push(&rhs[i] - &lower[i - 1] * yv);
        }
    }
    let mut x = vec![CVector::<T>::zeros(d.dim); n];
    for i in (0..n).rev() {
        let mut r = y[i].clone();
        if i + 1 < n {
            r -= &upper[i] * &x[i + 1];
        }
        x[i] = piv[i].clone().lu().solve(&r).ok_or_else(shift_err)?;
        if !x[i].iter().all(|c| crate::scalar::is_finite_cx(*c)) {
            return Err(shift_err());
        }
    }
    Ok(d.embed(x))
}

/// The `count` smallest values of `{k^2 + t_j}` with `k >= 1` (DD) or `k >= 0` (NN).
pub fn interval_spectrum_formula<T: Real>(m: &SpectralMeasure<T>, bc: IntervalBc, count: usize) -> Vec<T> {
    let k0 = match bc {
        IntervalBc::DD => 1,
        IntervalBc::NN => 0,
    };
    let mut vals: Vec<T> = (k0..=count + k0)
        .flat_map(|k| m.eigenvalues().iter().map(move |&t| T::lit((k * k) as f64) + t))
        .collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    vals.truncate(count);
    vals
}

/// Boundary-value tolerance for [`energy_identity_check`].
pub const BOUNDARY_TOL: f64 = 1e-8;

/// Relative residual of `||(-d^2 + T) f||^2 = ||f''||^2 + ||T f||^2 + 2 (f', T f')`
/// with finite-difference derivatives and trapezoid quadrature.
pub fn energy_identity_check<T: Real>(m: &SpectralMeasure<T>, f: &GridFunction<T>) -> Result<T> {
    if f.dim() != m.dim() {
        return Err(Error::DimensionMismatch { expected: m.dim(), got: f.dim() });
    }
    let v = f.values();
    let n = v.len();
    if n < 6 {
        return Err(Error::TooFewSamples { required: 6, got: n });
    }
    let h = f.h();
    let c = |x: f64| cre(T::lit(x));
    // fourth-order one-sided derivative at 0
    let d0 = (&v[0] * c(-25.0) + &v[1] * c(48.0) - &v[2] * c(36.0) + &v[3] * c(16.0) - &v[4] * c(3.0))
        / cre(T::lit(12.0) * h);
    if v[0].norm() > T::lit(BOUNDARY_TOL) || d0.norm() > T::lit(BOUNDARY_TOL) {
        return Err(Error::BoundaryViolation { value: v[0].norm().as_f64(), derivative: d0.norm().as_f64() });
    }
    let inv_2h = cre(T::one() / (T::lit(2.0) * h));
    let inv_h2 = cre(T::one() / (h * h));
    let first: Vec<CVector<T>> = (0..n)
        .map(|k| match k {
            0 => (&v[1] * c(4.0) - &v[0] * c(3.0) - &v[2]) * inv_2h,
            k if k == n - 1 => (&v[k] * c(3.0) - &v[k - 1] * c(4.0) + &v[k - 2]) * inv_2h,
            k => (&v[k + 1] - &v[k - 1]) * inv_2h,
        })
        .collect();
    let second: Vec<CVector<T>> = (0..n)
        .map(|k| match k {
            0 => (&v[0] * c(2.0) - &v[1] * c(5.0) + &v[2] * c(4.0) - &v[3]) * inv_h2,
            k if k == n - 1 => (&v[k] * c(2.0) - &v[k - 1] * c(5.0) + &v[k - 2] * c(4.0) - &v[k - 3]) * inv_h2,
            k => (&v[k + 1] - &v[k] * c(2.0) + &v[k - 1]) * inv_h2,
        })
        .collect();
    let t = m.matrix();
    let trap = |g: &dyn Fn(usize) -> T| {
        let mut s = T::zero();
        for k in 0..n {
            let w = if k == 0 || k == n - 1 { T::lit(0.5) } else { T::one() };
            s += w * g(k);
        }
        s * h
    };
    let lhs = trap(&|k| (&t * &v[k] - &second[k]).norm_squared());
    let rhs = trap(&|k| second[k].norm_squared())
        + trap(&|k| (&t * &v[k]).norm_squared())
        + T::lit(2.0) * trap(&|k| first[k].dotc(&(&t * &first[k])).re);
    if lhs.is_zero() {
        return Ok(rhs.abs());
    }
    Ok((lhs - rhs).abs() / lhs)
}

/// Moving-window integrals of a sampled potential at increasing distance from 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KatoProfile {
    /// Distances `r = |x|` of the window centers, increasing.
    pub r: Vec<f64>,
    /// `max(integral_{|x - y| <= w} q(y) dy)` over the centers `x = ±r` in the box.
    pub values: Vec<f64>,
    pub window: f64,
    pub peak: f64,
    pub edge_value: f64,
    pub threshold: f64,
    /// Edge value at most `threshold * peak`.
    pub consistent: bool,
}

/// Default relative level below which the window integrals count as vanishing.
pub const KATO_THRESHOLD: f64 = 1e-3;

/// Window integrals `integral_{|x - y| <= window} q(y) dy` for `q` sampled at
/// `x0 + k dx`; beyond the box `q` is held at its boundary value.
pub fn kato_condition_check(q: &[f64], x0: f64, dx: f64, window: f64, threshold: f64) -> Result<KatoProfile> {
    if q.len() < 2 {
        return Err(Error::TooFewSamples { required: 2, got: q.len() });
    }
    if !(dx > 0.0) || !(window > 0.0) {
        return Err(Error::InvalidArgument("dx and window must be positive".into()));
    }
    let n = q.len();
    let x_end = x0 + dx * (n - 1) as f64;
    let mut cum = vec![0.0; n];
    for k in 1..n {
        cum[k] = cum[k - 1] + 0.5 * dx * (q[k - 1] + q[k]);
    }
    // antiderivative of the piecewise-linear interpolant, extended by constants
    let anti = |x: f64| -> f64 {
        if x <= x0 {
            return q[0] * (x - x0);
        }
        if x >= x_end {
            return cum[n - 1] + q[n - 1] * (x - x_end);
        }
        let k = (((x - x0) / dx).floor() as usize).min(n - 2);
        let s = x - (x0 + dx * k as f64);
        let slope = (q[k + 1] - q[k]) / dx;
        cum[k] + q[k] * s + 0.5 * slope * s * s
    };
    let window_integral = |x: f64| anti(x + window) - anti(x - window);
    let mut centers: Vec<f64> = (0..n).map(|k| (x0 + dx * k as f64).abs()).collect();
    centers.sort_by(f64::total_cmp);
    centers.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * dx);
    let mut values = Vec::with_capacity(centers.len());
    for &r in &centers {
        let mut v = f64::NEG_INFINITY;
        for x in [r, -r] {
            if x >= x0 - 1e-12 * dx && x <= x_end + 1e-12 * dx {
                v = v.max(window_integral(x).abs());
            }
        }
        values.push(v);
    }
    let peak = values.iter().copied().fold(0.0, f64::max);
    let edge_value = *values.last().unwrap();
    Ok(KatoProfile {
        r: centers,
        values,
        window,
        peak,
        edge_value,
        threshold,
        consistent: edge_value <= threshold * peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realizations::{canonical_parameter, CanonicalKind};
    use crate::scalar::cx;
    use crate::weyl::TripletTag;
    use std::f64::consts::PI;

    fn diag(v: &[f64]) -> SpectralMeasure<f64> {
        SpectralMeasure::from_diagonal(v).unwrap()
    }

    fn dirichlet() -> ExtensionParameter<f64> {
        ExtensionParameter::dirichlet(TripletTag::Base)
    }

    #[test]
    fn stiffness_is_hermitian_and_matches_dense_eigensolver() {
        let t = CMatrix::<f64>::from_row_slice(2, 2, &[cre(1.0), cx(0.3, 0.2), cx(0.3, -0.2), cre(0.5)]);
        let m = SpectralMeasure::from_matrix(&t).unwrap();
        let b = CMatrix::from_row_slice(2, 2, &[cre(-0.4), cx(0.1, 0.5), cx(0.1, -0.5), cre(0.2)]);
        let p = ExtensionParameter::matrix(b, TripletTag::Base);
        let d = discretize_halfline(&m, &p, 3.0, 0.1).unwrap();
        assert!(d.hermitian_deviation() < 1e-10);
        let k = d.stiffness_dense();
        assert!(hermitian_deviation(&k) < 1e-10);
        // M is diagonal here, so the pencil is similar to M^{-1/2} K M^{-1/2}
        let mh = d.mass_dense().map(|c| cre(1.0 / c.re.sqrt().max(1e-300)));
        let mut s = k.clone();
        for i in 0..s.nrows() {
            for j in 0..s.ncols() {
                s[(i, j)] *= mh[(i, i)] * mh[(j, j)];
            }
        }
        let dense = hermitian_eigenvalues(&s);
        let got = spectrum(&d, 6).unwrap();
        for (a, b) in got.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn numerov_pencil_matches_generalized_dense_solution() {
        let m = diag(&[0.5, 2.0]);
        let d = discretize_interval(&m, IntervalBc::NN, PI / 40.0).unwrap();
        // Cholesky-free check: every computed lambda makes K - lambda M singular
        let k = d.stiffness_dense();
        let mm = d.mass_dense();
        for lam in spectrum(&d, 5).unwrap() {
            let s = crate::linalg::singular_values(&(&k - &mm * cre(lam)));
            assert!(*s.last().unwrap() < 1e-8 * s[0], "{lam}");
        }
    }

    #[test]
    fn interval_examples() {
        let m = diag(&[0.5, 2.0]);
        let h = PI / 400.0;
        let dd = spectrum(&discretize_interval(&m, IntervalBc::DD, h).unwrap(), 6).unwrap();
        for (a, b) in dd.iter().zip([1.5, 3.0, 4.5, 6.0, 9.5, 11.0]) {
            assert!((a - b).abs() < 1e-2);
        }
        let nn = spectrum(&discretize_interval(&m, IntervalBc::NN, h).unwrap(), 4).unwrap();
        for (a, b) in nn.iter().zip([0.5, 1.5, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-2);
        }
        let zero = diag(&[0.0]);
        let s = spectrum(&discretize_interval(&zero, IntervalBc::DD, h).unwrap(), 5).unwrap();
        for (k, v) in s.iter().enumerate() {
            assert!((v - ((k + 1) * (k + 1)) as f64).abs() < 1e-2);
        }
        assert!(matches!(discretize_interval(&m, IntervalBc::DD, 0.5), Err(Error::BadGrid(_))));
    }

    #[test]
    fn interval_first_twenty_match_formula() {
        let m = diag(&[0.5, 2.0]);
        for bc in [IntervalBc::DD, IntervalBc::NN] {
            let got = spectrum(&discretize_interval(&m, bc, PI / 400.0).unwrap(), 20).unwrap();
            let want = interval_spectrum_formula(&m, bc, 20);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-2, "{bc:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn formula_examples() {
        let m = diag(&[0.5, 2.0]);
        assert_eq!(interval_spectrum_formula(&m, IntervalBc::DD, 6), vec![1.5, 3.0, 4.5, 6.0, 9.5, 11.0]);
        assert_eq!(interval_spectrum_formula(&m, IntervalBc::NN, 4), vec![0.5, 1.5, 2.0, 3.0]);
        assert_eq!(interval_spectrum_formula(&diag(&[0.0]), IntervalBc::DD, 4), vec![1.0, 4.0, 9.0, 16.0]);
        let big = diag(&[100.0, 0.0]);
        assert_eq!(interval_spectrum_formula(&big, IntervalBc::DD, 3), vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn richardson_order_two_for_three_point() {
        let m = diag(&[0.5]);
        let exact = 1.5;
        let errs: Vec<f64> = [PI / 40.0, PI / 80.0, PI / 160.0]
            .iter()
            .map(|&h| {
                let d = discretize_interval_with(&m, IntervalBc::DD, h, Stencil::ThreePoint).unwrap();
                (spectrum(&d, 1).unwrap()[0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{ratio}");
        }
        let nerrs: Vec<f64> = [PI / 40.0, PI / 80.0]
            .iter()
            .map(|&h| {
                let d = discretize_interval_with(&m, IntervalBc::NN, h, Stencil::ThreePoint).unwrap();
                (spectrum(&d, 2).unwrap()[1] - 1.5).abs()
            })
            .collect();
        assert!((3.5..=4.5).contains(&(nerrs[0] / nerrs[1])));
    }

    #[test]
    fn numerov_is_order_four() {
        let m = diag(&[0.5]);
        let errs: Vec<f64> = [PI / 20.0, PI / 40.0]
            .iter()
            .map(|&h| (spectrum(&discretize_interval(&m, IntervalBc::DD, h).unwrap(), 3).unwrap()[2] - 9.5).abs())
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((14.0..=18.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn shift_moves_spectrum() {
        let m = diag(&[0.5, 2.0]);
        let d = discretize_interval(&m, IntervalBc::DD, PI / 100.0).unwrap();
        let a = spectrum(&d, 5).unwrap();
        let b = spectrum(&d.shifted(3.25), 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((y - x - 3.25).abs() < 1e-10);
        }
    }

    #[test]
    fn halfline_examples() {
        let m = diag(&[1.0]);
        let d = discretize_halfline(&m, &dirichlet(), 30.0, 1.0 / 200.0).unwrap();
        let low = spectrum(&d, 3).unwrap();
        assert!(low[0] >= 1.0 - 1e-2 && low[0] < 1.02);
        let mut prev = f64::INFINITY;
        let mut gaps = Vec::new();
        for l in [10.0, 20.0, 40.0] {
            let dd = spectrum(&discretize_halfline(&m, &dirichlet(), l, 1.0 / 100.0).unwrap(), 1).unwrap()[0];
            let nn = canonical_parameter(&m, CanonicalKind::Neumann, TripletTag::Base);
            let nv = spectrum(&discretize_halfline(&m, &nn, l, 1.0 / 100.0).unwrap(), 1).unwrap()[0];
            assert!(dd > 1.0 && dd < prev, "{dd}");
            prev = dd;
            gaps.push(dd - nv);
        }
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        let k = canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base);
        let kv = spectrum(&discretize_halfline(&m, &k, 40.0, 1.0 / 200.0).unwrap(), 2).unwrap();
        assert!(kv[0].abs() < 1e-2 && kv[1] > 0.9);
        assert!(matches!(discretize_halfline(&m, &k, 1.0, 0.5), Err(Error::BadGrid(_))));
    }

    #[test]
    fn lowest_eigenvalue_is_non_negative() {
        let m = diag(&[0.3, 1.4]);
        for kind in [CanonicalKind::Dirichlet, CanonicalKind::Neumann, CanonicalKind::Krein] {
            let p = canonical_parameter(&m, kind, TripletTag::Base);
            let low = spectrum(&discretize_halfline(&m, &p, 20.0, 0.02).unwrap(), 1).unwrap()[0];
            assert!(low >= -1e-8, "{kind:?}: {low}");
        }
        for bc in [IntervalBc::DD, IntervalBc::NN] {
            assert!(spectrum(&discretize_interval(&m, bc, PI / 50.0).unwrap(), 1).unwrap()[0] >= -1e-8);
        }
    }

    #[test]
    fn resolvent_solve_is_exact_and_matches_analytic() {
        let m = diag(&[1.0]);
        let v = CVector::from_element(1, cre(1.0));
        let grid = UniformGrid::new(1.0 / 200.0, 30.0).unwrap();
        let f = GridFunction::scalar_profile(grid, &v, |x: f64| (-(x - 2.0) * (x - 2.0)).exp());
        for p in [
            dirichlet(),
            canonical_parameter(&m, CanonicalKind::Neumann, TripletTag::Base),
            canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base),
        ] {
            let d = discretize_halfline(&m, &p, 30.0, 1.0 / 200.0).unwrap();
            let z = cre(-1.0);
            let g = oracle_resolvent_apply(&d, z, &f).unwrap();
            assert!(d.residual(z, &g, &f).unwrap() < 1e-10);
            let analytic = crate::realizations::resolvent_apply(&m, &p, z, &f).unwrap();
            let err = g.relative_l2_error(&analytic).unwrap();
            assert!(err < 1e-3, "{:?}: {err}", p.label);
        }
    }

    #[test]
    fn resolvent_converges_at_order_two() {
        let m = diag(&[1.0, 2.5]);
        let v = CVector::from_vec(vec![cre(1.0), cx(0.0, 1.0)]);
        let p = canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base);
        let z = cx(0.5, 1.0);
        let errs: Vec<f64> = [0.02, 0.01]
            .iter()
            .map(|&h| {
                let grid = UniformGrid::new(h, 30.0).unwrap();
                let f = GridFunction::scalar_profile(grid, &v, |x: f64| (-(x - 2.0) * (x - 2.0)).exp());
                let d = discretize_halfline(&m, &p, 30.0, h).unwrap();
                let g = oracle_resolvent_apply(&d, z, &f).unwrap();
                g.relative_l2_error(&crate::realizations::resolvent_apply(&m, &p, z, &f).unwrap()).unwrap()
            })
            .collect();
        let ratio = errs[0] / errs[1];
        assert!((3.5..=4.5).contains(&ratio), "{errs:?}");
    }

    #[test]
    fn shift_on_spectrum_is_rejected() {
        let m = diag(&[0.5]);
        let d = discretize_interval(&m, IntervalBc::DD, PI / 100.0).unwrap();
        let lam = spectrum(&d, 1).unwrap()[0];
        let f = GridFunction::scalar_profile(d.grid(), &CVector::from_element(1, cre(1.0)), |x| x.sin());
        assert!(matches!(oracle_resolvent_apply(&d, cre(lam), &f), Err(Error::ShiftOnSpectrum { .. })));
        assert!(oracle_resolvent_apply(&d, cre(lam + 0.3), &f).is_ok());
        let wrong = GridFunction::zeros(UniformGrid::new(0.1, 2.0).unwrap(), 1);
        assert!(matches!(oracle_resolvent_apply(&d, cre(0.0), &wrong), Err(Error::GridMismatch)));
    }

    fn test_function(grid: UniformGrid<f64>, v: &CVector<f64>) -> GridFunction<f64> {
        GridFunction::scalar_profile(grid, v, |x| x * x * (-x).exp())
    }

    #[test]
    fn energy_identity_examples() {
        let grid = UniformGrid::new(1.0 / 400.0, 40.0).unwrap();
        let v = CVector::from_element(1, cre(1.0));
        let r = energy_identity_check(&diag(&[1.0]), &test_function(grid, &v)).unwrap();
        assert!(r <= 1e-4, "{r}");
        assert_eq!(energy_identity_check(&diag(&[1.0]), &GridFunction::zeros(grid, 1)).unwrap(), 0.0);
        let r0 = energy_identity_check(&diag(&[0.0]), &test_function(grid, &v)).unwrap();
        assert!(r0 <= 1e-10);
        let bad = GridFunction::scalar_profile(grid, &v, |x| x * (-x).exp());
        assert!(matches!(energy_identity_check(&diag(&[1.0]), &bad), Err(Error::BoundaryViolation { .. })));
    }

    #[test]
    fn energy_identity_non_diagonal() {
        let t = CMatrix::<f64>::from_row_slice(2, 2, &[cre(2.0), cx(0.5, 0.5), cx(0.5, -0.5), cre(1.0)]);
        let m = SpectralMeasure::from_matrix(&t).unwrap();
        let grid = UniformGrid::new(1.0 / 400.0, 40.0).unwrap();
        let v = CVector::from_vec(vec![cre(1.0), cx(0.2, -0.7)]);
        assert!(energy_identity_check(&m, &test_function(grid, &v)).unwrap() <= 1e-4);
    }

    #[test]
    fn kato_examples() {
        let dx = 0.01;
        let xs: Vec<f64> = (0..=4000).map(|k| -20.0 + dx * k as f64).collect();
        let q: Vec<f64> = xs.iter().map(|x| (-x.abs()).exp()).collect();
        let prof = kato_condition_check(&q, -20.0, dx, 1.0, KATO_THRESHOLD).unwrap();
        assert!(prof.consistent);
        for (r, v) in prof.r.iter().zip(&prof.values) {
            if *r >= 1.0 {
                let want = 2.0 * 1f64.sinh() * (-r).exp();
                assert!((v - want).abs() < 1e-4 * want.max(1e-12) + 1e-9, "{r}: {v} vs {want}");
            }
        }
        assert!(prof.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));

        let ones = vec![1.0; 4001];
        let prof = kato_condition_check(&ones, -20.0, dx, 1.0, KATO_THRESHOLD).unwrap();
        assert!(!prof.consistent);
        assert!(prof.values.iter().all(|v| (v - 2.0).abs() < 1e-9));

        let bump: Vec<f64> = xs.iter().map(|x| if x.abs() < 2.0 { 1.0 - x.abs() / 2.0 } else { 0.0 }).collect();
        let prof = kato_condition_check(&bump, -20.0, dx, 1.0, KATO_THRESHOLD).unwrap();
        for (r, v) in prof.r.iter().zip(&prof.values) {
            if *r > 3.0 + 1e-9 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(prof.consistent);
    }
}
