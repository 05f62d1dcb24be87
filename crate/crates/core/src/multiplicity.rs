//! Spectral multiplicity `d_{M_B}(t) = rank Im M_B(t + i0)` on real grids and
//! the comparisons built from it.
//!
//! For a matrix parameter the rank is taken in congruence form: with
//! `X = B - M(t + i0)`,
//!
//! ```text
//! Im (B - M)^{-1} = X^{-1} (Im M) X^{-*},
//! ```
//!
//! which stays Hermitian PSD in floating point and avoids subtracting two
//! nearly equal inverses.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, imag_part, singular_values, SINGULAR_FLOOR};
use crate::realizations::{ExtensionParameter, ParameterLabel};
use crate::scalar::{cre, CMatrix, Real};
use crate::spectral::SpectralMeasure;
use crate::weyl::base_value_or_limit;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Grid points closer than this to `sigma(T) ∪ {0}` are moved and flagged.
pub const EXCLUSION_RADIUS: f64 = 1e-6;
/// Offset used when moving a flagged point off `sigma(T) ∪ {0}` or off a singular pencil.
pub const PERTURBATION: f64 = 1e-5;

/// Multiplicity of one realization on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityTable {
    pub t_grid: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Points that were moved before evaluation (eigenvalue, zero or singular pencil).
    pub exceptional: Vec<bool>,
    /// Where each rank was actually evaluated.
    pub evaluated_at: Vec<f64>,
    pub realization: String,
    pub rank_tol: f64,
    pub dim: usize,
}

impl MultiplicityTable {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn exceptional_count(&self) -> usize {
        self.exceptional.iter().filter(|&&e| e).count()
    }
}

/// Name written to tables and reports.
pub fn realization_name<T: Real>(p: &ExtensionParameter<T>) -> &'static str {
    match p.label {
        ParameterLabel::Dirichlet => "dirichlet",
        ParameterLabel::Neumann => "neumann",
        ParameterLabel::Krein => "krein",
        ParameterLabel::Custom => "robin",
    }
}

/// `n` equally spaced points on `[a, b]`.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Number of singular values above `rank_tol * max(1, ||a||)`.
pub fn numerical_rank<T: Real>(a: &CMatrix<T>, rank_tol: f64) -> usize {
    let s = singular_values(a);
    let norm = s.first().copied().unwrap_or_else(T::zero);
    let cut = T::lit(rank_tol) * norm.max(T::one());
    s.iter().filter(|&&v| v > cut).count()
}

/// `Im M_p(t + i0)`; `None` when the pencil is singular at `t`.
fn imag_boundary<T: Real>(m: &SpectralMeasure<T>, b: Option<&CMatrix<T>>, t: T) -> Result<Option<CMatrix<T>>> {
    let mb = base_value_or_limit(m, cre(t));
    let im = imag_part(&mb);
    match b {
        None => Ok(Some(im)),
        Some(b) => match guarded_inverse(&(b - &mb), SINGULAR_FLOOR) {
            Ok(xi) => Ok(Some(&xi * im * xi.adjoint())),
            Err(Error::SingularPencil { .. }) => Ok(None),
            Err(e) => Err(e),
        },
    }
}

fn near_excluded<T: Real>(m: &SpectralMeasure<T>, t: T) -> bool {
    let r = T::lit(EXCLUSION_RADIUS);
    t.abs() < r || m.distance_to_spectrum(t) < r
}

/// Ranks of `Im M_p(t + i0)` over `t_grid`.
///
/// Points within [`EXCLUSION_RADIUS`] of `sigma(T) ∪ {0}`, and points where
/// `B - M(t + i0)` is singular, are evaluated at a nearby point (right side
/// first) and flagged exceptional.
pub fn multiplicity_table<T: Real>(
    m: &SpectralMeasure<T>,
    p: &ExtensionParameter<T>,
    t_grid: &[T],
    rank_tol: f64,
) -> Result<MultiplicityTable> {
    if t_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let b = if p.is_dirichlet() { None } else { Some(p.base_matrix(m)?) };
    let delta = T::lit(PERTURBATION);
    let mut ranks = Vec::with_capacity(t_grid.len());
    let mut exceptional = Vec::with_capacity(t_grid.len());
    let mut evaluated_at = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut flagged = near_excluded(m, t);
        let candidates: Vec<T> = if flagged {
            vec![t + delta, t - delta, t + delta * T::lit(10.0)]
        } else {
            vec![t, t + delta, t - delta]
        };
        let mut found = None;
        for (k, &s) in candidates.iter().enumerate() {
            if k > 0 || flagged {
                flagged = true;
                if near_excluded(m, s) {
                    continue;
                }
            }
            if let Some(im) = imag_boundary(m, b.as_ref(), s)? {
                found = Some((s, numerical_rank(&im, rank_tol)));
                break;
            }
        }
        let (s, r) = found.ok_or_else(|| {
            Error::SolverFailure(format!("no regular point of B - M(t + i0) near t = {t}"))
        })?;
        ranks.push(r);
        exceptional.push(flagged);
        evaluated_at.push(s.as_f64());
    }
    Ok(MultiplicityTable {
        t_grid: t_grid.iter().map(|t| t.as_f64()).collect(),
        ranks,
        exceptional,
        evaluated_at,
        realization: realization_name(p).to_string(),
        rank_tol,
        dim: m.dim(),
    })
}

/// Real interval with optional infinite right end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: true }
    }

    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self { lo, hi, lo_closed: true, hi_closed: false }
    }

    pub fn ray(lo: f64) -> Self {
        Self { lo, hi: f64::INFINITY, lo_closed: true, hi_closed: false }
    }

    pub fn contains(&self, t: f64) -> bool {
        let left = if self.lo_closed { t >= self.lo } else { t > self.lo };
        let right = if self.hi_closed { t <= self.hi } else { t < self.hi };
        left && right
    }

    /// Zero Lebesgue measure.
    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }
}

/// A piece of a support description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SupportPiece {
    Point(f64),
    Interval(Interval),
}

/// Sorted, pairwise disjoint intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct AcBand {
    pub intervals: Vec<Interval>,
}

impl AcBand {
    pub fn whole_line() -> Self {
        Self { intervals: vec![Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY, lo_closed: false, hi_closed: false }] }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(t))
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// `[t0, inf)`: absolutely continuous spectrum of the Dirichlet realization.
pub fn ac_band<T: Real>(m: &SpectralMeasure<T>) -> AcBand {
    AcBand { intervals: vec![Interval::ray(m.inf_spectrum().as_f64())] }
}

/// Drops Lebesgue-null pieces and merges overlapping or touching intervals.
/// Endpoint closedness of touching intervals is ignored (null sets).
pub fn ac_closure(support: &[SupportPiece]) -> AcBand {
    let mut ivs: Vec<Interval> = support
        .iter()
        .filter_map(|p| match p {
            SupportPiece::Interval(i) if !i.is_degenerate() => Some(*i),
            _ => None,
        })
        .collect();
    ivs.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
    let mut out: Vec<Interval> = Vec::new();
    for i in ivs {
        match out.last_mut() {
            Some(cur) if i.lo <= cur.hi => {
                if i.hi > cur.hi {
                    cur.hi = i.hi;
                    cur.hi_closed = i.hi_closed;
                } else if i.hi == cur.hi {
                    cur.hi_closed |= i.hi_closed;
                }
            }
            _ => out.push(i),
        }
    }
    AcBand { intervals: out }
}

/// Outcome of a pointwise rank comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equal,
    ALeqB,
    BLeqA,
    Incomparable,
}

fn same_grid(a: &MultiplicityTable, b: &MultiplicityTable) -> bool {
    a.t_grid.len() == b.t_grid.len()
        && a.t_grid.iter().zip(&b.t_grid).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// Compares ranks at grid points inside `subset` that are non-exceptional in both tables.
pub fn compare_tables(a: &MultiplicityTable, b: &MultiplicityTable, subset: &AcBand) -> Result<Verdict> {
    if !same_grid(a, b) {
        return Err(Error::GridMismatch);
    }
    let (mut less, mut greater) = (false, false);
    for k in 0..a.len() {
        if a.exceptional[k] || b.exceptional[k] || !subset.contains(a.t_grid[k]) {
            continue;
        }
        less |= a.ranks[k] < b.ranks[k];
        greater |= a.ranks[k] > b.ranks[k];
    }
    Ok(match (less, greater) {
        (false, false) => Verdict::Equal,
        (true, false) => Verdict::ALeqB,
        (false, true) => Verdict::BLeqA,
        (true, true) => Verdict::Incomparable,
    })
}

/// A point where the Dirichlet multiplicity exceeds that of another realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub t: f64,
    pub dirichlet_rank: usize,
    pub parameter_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterVerdict {
    pub index: usize,
    pub pass: bool,
    /// Ranks agree at every compared point.
    pub equal: bool,
    pub first_violation: Option<Violation>,
    pub exceptional_points: usize,
}

/// Result of checking `d_M(t) <= d_{M_B}(t)` for a family of parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcMinimalityReport {
    pub pass: bool,
    pub parameters: Vec<ParameterVerdict>,
    pub grid_points: usize,
    pub grid_range: (f64, f64),
    pub dirichlet_exceptional: usize,
    pub rank_tol: f64,
}

/// `d_M(t) <= d_{M_B}(t)` at all grid points non-exceptional for both.
pub fn verify_ac_minimality<T: Real>(
    m: &SpectralMeasure<T>,
    parameters: &[ExtensionParameter<T>],
    t_grid: &[T],
    rank_tol: f64,
) -> Result<AcMinimalityReport> {
    if parameters.is_empty() {
        return Err(Error::InvalidArgument("need at least one parameter".into()));
    }
    let dirichlet = multiplicity_table(m, &ExtensionParameter::dirichlet(crate::weyl::TripletTag::Base), t_grid, rank_tol)?;
    let mut verdicts = Vec::with_capacity(parameters.len());
    for (index, p) in parameters.iter().enumerate() {
        let table = multiplicity_table(m, p, t_grid, rank_tol)?;
        let mut first_violation = None;
        let mut equal = true;
        for k in 0..table.len() {
            if dirichlet.exceptional[k] || table.exceptional[k] {
                continue;
            }
            let (d, r) = (dirichlet.ranks[k], table.ranks[k]);
            equal &= d == r;
            if d > r && first_violation.is_none() {
                first_violation = Some(Violation { t: table.t_grid[k], dirichlet_rank: d, parameter_rank: r });
            }
        }
        verdicts.push(ParameterVerdict {
            index,
            pass: first_violation.is_none(),
            equal,
            first_violation,
            exceptional_points: table.exceptional_count(),
        });
    }
    let lo = dirichlet.t_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = dirichlet.t_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(AcMinimalityReport {
        pass: verdicts.iter().all(|v| v.pass),
        parameters: verdicts,
        grid_points: dirichlet.len(),
        grid_range: (lo, hi),
        dirichlet_exceptional: dirichlet.exceptional_count(),
        rank_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_part;
    use crate::realizations::{canonical_parameter, CanonicalKind};
    use crate::scalar::cx;
    use crate::weyl::TripletTag;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(v: &[f64]) -> SpectralMeasure<f64> {
        SpectralMeasure::from_diagonal(v).unwrap()
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix<f64> {
        let g = CMatrix::<f64>::from_fn(n, n, |_, _| cx(rng.random_range(-scale..scale), rng.random_range(-scale..scale)));
        real_part(&g)
    }

    #[test]
    fn table_examples() {
        let m = diag(&[1.0, 4.0]);
        let grid = [0.5, 2.0, 5.0];
        for kind in [CanonicalKind::Dirichlet, CanonicalKind::Neumann, CanonicalKind::Krein] {
            let p = canonical_parameter(&m, kind, TripletTag::Base);
            let t = multiplicity_table(&m, &p, &grid, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(t.ranks, vec![0, 1, 2], "{kind:?}");
            assert!(t.exceptional.iter().all(|e| !e));
        }
        let d = ExtensionParameter::dirichlet(TripletTag::Base);
        assert!(matches!(multiplicity_table(&m, &d, &[], 1e-8), Err(Error::EmptyGrid)));
    }

    #[test]
    fn regularized_parameter_gives_same_table() {
        let m = diag(&[0.3, 2.0]);
        let grid = linear_grid(-1.0, 6.0, 50);
        let base = canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base);
        let reg = canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Regularized);
        let a = multiplicity_table(&m, &base, &grid, DEFAULT_RANK_TOL).unwrap();
        let b = multiplicity_table(&m, &reg, &grid, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(a.ranks, b.ranks);
    }

    #[test]
    fn points_on_spectrum_are_flagged() {
        let m = diag(&[1.0, 4.0]);
        let d = ExtensionParameter::dirichlet(TripletTag::Base);
        let t = multiplicity_table(&m, &d, &[0.0, 1.0, 4.0, 1.0 + 5e-7, 3.0], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(t.exceptional, vec![true, true, true, true, false]);
        assert_eq!(t.ranks, vec![0, 1, 2, 1, 1]);
        assert!(t.evaluated_at[1] > 1.0 + EXCLUSION_RADIUS);
    }

    #[test]
    fn singular_pencil_point_is_flagged() {
        // B - M(-3) = 0 for T = 1, B = -2
        let m = diag(&[1.0]);
        let p = ExtensionParameter::matrix(CMatrix::from_element(1, 1, cre(-2.0)), TripletTag::Base);
        let t = multiplicity_table(&m, &p, &[-3.0, -2.0, 2.0], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(t.exceptional, vec![true, false, false]);
        assert_eq!(t.ranks, vec![0, 0, 1]);
    }

    #[test]
    fn dirichlet_table_is_counting_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(1..7);
            let g = random_hermitian(&mut rng, n, 1.0);
            let m = SpectralMeasure::from_matrix(&(&g * &g)).unwrap();
            let grid = linear_grid(0.0, m.max_spectrum() + 5.0, 200);
            let t = multiplicity_table(&m, &ExtensionParameter::dirichlet(TripletTag::Base), &grid, 1e-8).unwrap();
            for (k, &x) in grid.iter().enumerate() {
                if !t.exceptional[k] {
                    assert_eq!(t.ranks[k], m.counting_function(x));
                }
                assert!(t.ranks[k] <= n);
            }
        }
    }

    #[test]
    fn ac_band_examples() {
        assert_eq!(ac_band(&diag(&[0.5, 2.0])).intervals, vec![Interval::ray(0.5)]);
        assert_eq!(ac_band(&diag(&[0.0])).intervals, vec![Interval::ray(0.0)]);
        let q = vec![0.0; 200];
        let m = SpectralMeasure::from_schrodinger_1d(&q, std::f64::consts::PI).unwrap();
        let band = ac_band(&m);
        assert!((band.intervals[0].lo - 1.0).abs() < 1e-3);
        assert!(band.intervals[0].hi.is_infinite());
    }

    #[test]
    fn ac_closure_examples() {
        let s = [
            SupportPiece::Interval(Interval::closed(1.0, 2.0)),
            SupportPiece::Point(3.0),
            SupportPiece::Interval(Interval::closed(2.0, 4.0)),
        ];
        assert_eq!(ac_closure(&s).intervals, vec![Interval::closed(1.0, 4.0)]);
        assert!(ac_closure(&[]).is_empty());
        let s = [
            SupportPiece::Interval(Interval::half_open(0.0, 1.0)),
            SupportPiece::Interval(Interval::half_open(1.0, 2.0)),
        ];
        assert_eq!(ac_closure(&s).intervals, vec![Interval::half_open(0.0, 2.0)]);
        let degenerate = [SupportPiece::Interval(Interval::closed(5.0, 5.0))];
        assert!(ac_closure(&degenerate).is_empty());
    }

    #[test]
    fn compare_examples() {
        let m = diag(&[1.0, 4.0]);
        let grid = linear_grid(0.0, 10.0, 400);
        let d = multiplicity_table(&m, &ExtensionParameter::dirichlet(TripletTag::Base), &grid, 1e-8).unwrap();
        let n = multiplicity_table(&m, &canonical_parameter(&m, CanonicalKind::Neumann, TripletTag::Base), &grid, 1e-8).unwrap();
        let all = AcBand::whole_line();
        assert_eq!(compare_tables(&d, &n, &all).unwrap(), Verdict::Equal);
        assert_eq!(compare_tables(&d, &d, &all).unwrap(), Verdict::Equal);

        let mut bigger = d.clone();
        bigger.ranks[200] += 1;
        assert_eq!(compare_tables(&d, &bigger, &all).unwrap(), Verdict::ALeqB);
        assert_eq!(compare_tables(&bigger, &d, &all).unwrap(), Verdict::BLeqA);
        let mut mixed = bigger.clone();
        mixed.ranks[300] -= 1;
        assert_eq!(compare_tables(&d, &mixed, &all).unwrap(), Verdict::Incomparable);
        let outside = AcBand { intervals: vec![Interval::closed(20.0, 30.0)] };
        assert_eq!(compare_tables(&d, &mixed, &outside).unwrap(), Verdict::Equal);

        let other = multiplicity_table(&m, &ExtensionParameter::dirichlet(TripletTag::Base), &grid[..10], 1e-8).unwrap();
        assert!(matches!(compare_tables(&d, &other, &all), Err(Error::GridMismatch)));
    }

    #[test]
    fn ac_minimality_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = diag(&[1.0, 4.0]);
        let mut params: Vec<_> = (0..20)
            .map(|_| ExtensionParameter::matrix(random_hermitian(&mut rng, 2, 3.0), TripletTag::Base))
            .collect();
        params.push(canonical_parameter(&m, CanonicalKind::Krein, TripletTag::Base));
        let grid = linear_grid(0.0, 10.0, 200);
        let rep = verify_ac_minimality(&m, &params, &grid, DEFAULT_RANK_TOL).unwrap();
        assert!(rep.pass);
        assert!(rep.parameters.last().unwrap().equal);
        assert_eq!(rep.grid_points, 200);

        let s = diag(&[0.5]);
        let b5 = ExtensionParameter::matrix(CMatrix::from_element(1, 1, cre(5.0)), TripletTag::Base);
        let grid = linear_grid(0.6, 8.0, 50);
        let t = multiplicity_table(&s, &b5, &grid, DEFAULT_RANK_TOL).unwrap();
        assert!(t.ranks.iter().all(|&r| r == 1));
        assert!(verify_ac_minimality(&s, &[], &grid, 1e-8).is_err());
    }

    fn pieces() -> impl Strategy<Value = Vec<SupportPiece>> {
        prop::collection::vec(
            prop_oneof![
                (-10.0f64..10.0).prop_map(SupportPiece::Point),
                (-10.0f64..10.0, 0.0f64..5.0, any::<bool>(), any::<bool>()).prop_map(|(lo, w, a, b)| {
                    SupportPiece::Interval(Interval { lo, hi: lo + w, lo_closed: a, hi_closed: b })
                }),
            ],
            0..8,
        )
    }

    proptest! {
        #[test]
        fn ac_closure_is_idempotent(s in pieces()) {
            let once = ac_closure(&s);
            let again: Vec<_> = once.intervals.iter().map(|i| SupportPiece::Interval(*i)).collect();
            prop_assert_eq!(ac_closure(&again), once.clone());
            for w in once.intervals.windows(2) {
                prop_assert!(w[0].hi < w[1].lo);
            }
        }

        #[test]
        fn ac_closure_is_monotone(s in pieces(), extra in pieces(), probe in -10.0f64..15.0) {
            let small = ac_closure(&s);
            let mut all = s.clone();
            all.extend(extra);
            let big = ac_closure(&all);
            // interior points of the smaller closure stay covered
            let inside = small.intervals.iter().any(|i| probe > i.lo && probe < i.hi);
            if inside {
                prop_assert!(big.contains(probe));
            }
        }
    }
}
