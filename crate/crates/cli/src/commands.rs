use std::f64::consts::PI;

use halfline::linalg::{hermitian_eigenvalues, imag_part, spectral_norm};
use halfline::multiplicity::{multiplicity_table, realization_name, MultiplicityTable, DEFAULT_RANK_TOL};
use halfline::oracle::{discretize_halfline, discretize_interval, interval_spectrum_formula, oracle_resolvent_apply, spectrum, IntervalBc};
use halfline::realizations::{canonical_parameter, resolvent_apply, CanonicalKind, GridFunction, UniformGrid};
use halfline::scalar::{cre, cx, CMatrix, CVector, Cx};
use halfline::triplets::BlockModel;
use halfline::weyl::{boundary_value, weyl_base, weyl_of_extension, Realization};
use halfline::{suite, Error, TripletTag};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{build_measure, BcSpec, ConfigError, RunConfig};

/// Command output: a JSON document, a CSV table and the number of failed checks.
pub struct Report {
    pub json: Value,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub failed_checks: usize,
}

pub enum Failure {
    Config(String),
    Numerical(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numerical(e)
    }
}

pub struct Flags {
    pub seed: Option<u64>,
    pub rank_tol: Option<f64>,
    pub grid_n: Option<usize>,
}

fn pair(c: Cx<f64>) -> [f64; 2] {
    [c.re, c.im]
}

fn matrix_json(a: &CMatrix<f64>) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| pair(a[(i, j)])).collect()).collect()
}

fn rank_tol(cfg: &RunConfig, flags: &Flags) -> Result<f64, Failure> {
    let tol = flags.rank_tol.or(cfg.rank_tol).unwrap_or(DEFAULT_RANK_TOL);
    if !(tol > 0.0) {
        return Err(Failure::Config("rank-tol must be positive".into()));
    }
    Ok(tol)
}

fn table_rows(table: &MultiplicityTable) -> Vec<Vec<String>> {
    (0..table.len())
        .map(|k| {
            vec![
                table.t_grid[k].to_string(),
                table.ranks[k].to_string(),
                table.exceptional[k].to_string(),
                table.realization.clone(),
                table.rank_tol.to_string(),
            ]
        })
        .collect()
}

const TABLE_HEADER: [&str; 5] = ["t", "rank", "exceptional", "realization", "rank_tol"];

#[derive(Serialize)]
struct WeylRow {
    z: [f64; 2],
    value: Vec<Vec<[f64; 2]>>,
    min_imag_eigenvalue: f64,
    max_imag_eigenvalue: f64,
    herglotz_ok: bool,
}

/// `M_B(z)` (or `M(z)` for Dirichlet) at each configured point.
pub fn weyl_eval(cfg: &RunConfig) -> Result<Report, Failure> {
    let m = cfg.measure()?;
    let p = cfg.parameter(&m)?;
    let tol = cfg.herglotz_tol.unwrap_or(1e-10);
    let mut out = Vec::new();
    let mut rows = Vec::new();
    let mut failed = 0;
    for z in cfg.z_list(&[(0.0, 1.0)]) {
        let value = if !p.is_dirichlet() {
            weyl_of_extension(&m, &p, z, p.triplet)?.value
        } else if z.im == 0.0 && z.re >= m.inf_spectrum() {
            boundary_value(&m, &Realization::DirichletBase, z.re)?.value
        } else {
            weyl_base(&m, z)?.value
        };
        let eig = hermitian_eigenvalues(&imag_part(&value));
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        // Im M >= 0 above the axis and <= 0 below it
        let ok = if z.im > 0.0 { lo >= -tol } else if z.im < 0.0 { hi <= tol } else { true };
        if !ok {
            failed += 1;
        }
        for i in 0..value.nrows() {
            for j in 0..value.ncols() {
                rows.push(vec![
                    z.re.to_string(),
                    z.im.to_string(),
                    i.to_string(),
                    j.to_string(),
                    value[(i, j)].re.to_string(),
                    value[(i, j)].im.to_string(),
                    lo.to_string(),
                    ok.to_string(),
                ]);
            }
        }
        out.push(WeylRow { z: pair(z), value: matrix_json(&value), min_imag_eigenvalue: lo, max_imag_eigenvalue: hi, herglotz_ok: ok });
    }
    Ok(Report {
        json: json!({
            "command": "weyl-eval",
            "realization": realization_name(&p),
            "triplet": p.triplet,
            "herglotz_tol": tol,
            "samples": out,
            "failed_checks": failed,
        }),
        header: vec!["z_re", "z_im", "row", "col", "re", "im", "min_imag_eigenvalue", "herglotz_ok"],
        rows,
        failed_checks: failed,
    })
}

/// Multiplicity table; for Dirichlet it is also checked against the counting function.
pub fn multiplicity(cfg: &RunConfig, flags: &Flags) -> Result<Report, Failure> {
    let m = cfg.measure()?;
    let p = cfg.parameter(&m)?;
    let grid = cfg.t_grid(&m, flags.grid_n)?;
    let table = multiplicity_table(&m, &p, &grid, rank_tol(cfg, flags)?)?;
    let mut mismatches = 0;
    if p.is_dirichlet() {
        for k in 0..table.len() {
            if !table.exceptional[k] && table.ranks[k] != m.counting_function(table.t_grid[k]) {
                mismatches += 1;
            }
        }
    }
    Ok(Report {
        json: json!({
            "command": "multiplicity",
            "table": table,
            "counting_function_checked": p.is_dirichlet(),
            "failed_checks": mismatches,
        }),
        header: TABLE_HEADER.to_vec(),
        rows: table_rows(&table),
        failed_checks: mismatches,
    })
}

#[derive(Serialize)]
struct EigenRow {
    k: usize,
    formula: f64,
    oracle: f64,
    abs_error: f64,
    /// `|lambda_h - lambda_2h| / 15`, the fourth-order Richardson estimate.
    error_estimate: f64,
    pass: bool,
}

/// Interval eigenvalues from the oracle next to `{k^2 + t_j}`.
pub fn spectrum_interval(cfg: &RunConfig, flags: &Flags) -> Result<Report, Failure> {
    let m = cfg.measure()?;
    let bc = match cfg.interval_bc.unwrap_or(BcSpec::DD) {
        BcSpec::DD => IntervalBc::DD,
        BcSpec::NN => IntervalBc::NN,
    };
    let count = cfg.eigen_count.unwrap_or(20);
    let cells = flags.grid_n.unwrap_or(400);
    if cells < 40 || !cells.is_multiple_of(2) {
        return Err(Failure::Config("grid-n for spectrum-interval must be even and at least 40".into()));
    }
    let h = PI / cells as f64;
    let fine = spectrum(&discretize_interval(&m, bc, h)?, count)?;
    let coarse = spectrum(&discretize_interval(&m, bc, 2.0 * h)?, count)?;
    let formula = interval_spectrum_formula(&m, bc, count);
    let rows: Vec<EigenRow> = (0..count)
        .map(|k| {
            let abs_error = (fine[k] - formula[k]).abs();
            let error_estimate = (fine[k] - coarse[k]).abs() / 15.0;
            // a factor 2 covers the pre-asymptotic drift of the estimate
            let pass = abs_error <= 2.0 * error_estimate + 1e-10 * formula[k].abs().max(1.0);
            EigenRow { k, formula: formula[k], oracle: fine[k], abs_error, error_estimate, pass }
        })
        .collect();
    let failed = rows.iter().filter(|r| !r.pass).count();
    let csv = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.formula.to_string(),
                r.oracle.to_string(),
                r.abs_error.to_string(),
                r.error_estimate.to_string(),
                r.pass.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        json: json!({
            "command": "spectrum-interval",
            "bc": bc,
            "h": h,
            "eigenvalues": rows,
            "failed_checks": failed,
        }),
        header: vec!["k", "formula", "oracle", "abs_error", "error_estimate", "pass"],
        rows: csv,
        failed_checks: failed,
    })
}

#[derive(Serialize)]
struct ResolventRow {
    z: [f64; 2],
    error: f64,
    error_half: f64,
    ratio: f64,
    pass: bool,
}

/// Krein-formula resolvent against the oracle for `f = exp(-(x - 2)^2) v`,
/// `v = (1, ..., 1) / sqrt(dim)`, at `h` and `h/2`.
pub fn resolvent_check(cfg: &RunConfig, flags: &Flags) -> Result<Report, Failure> {
    let m = cfg.measure()?;
    let p = cfg.parameter(&m)?;
    let (mut h, length) = cfg.x_grid.map(|x| (x.h, x.length)).unwrap_or((1.0 / 200.0, 30.0));
    if let Some(n) = flags.grid_n {
        if n == 0 {
            return Err(Failure::Config("grid-n must be positive".into()));
        }
        h = length / n as f64;
    }
    let tol = cfg.resolvent_tol.unwrap_or(1e-3);
    let v = CVector::from_element(m.dim(), cre(1.0 / (m.dim() as f64).sqrt()));
    let error_at = |z: Cx<f64>, h: f64| -> Result<f64, Error> {
        let grid = UniformGrid::new(h, length)?;
        let f = GridFunction::scalar_profile(grid, &v, |x: f64| (-(x - 2.0) * (x - 2.0)).exp());
        let analytic = resolvent_apply(&m, &p, z, &f)?;
        let fd = oracle_resolvent_apply(&discretize_halfline(&m, &p, length, h)?, z, &f)?;
        fd.relative_l2_error(&analytic)
    };
    let mut rows = Vec::new();
    for z in cfg.z_list(&[(-1.0, 0.0), (1.0, 1.0), (3.0, 0.5)]) {
        let error = error_at(z, h)?;
        let error_half = error_at(z, h / 2.0)?;
        rows.push(ResolventRow { z: pair(z), error, error_half, ratio: error / error_half, pass: error <= tol });
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    let csv = rows
        .iter()
        .map(|r| {
            vec![
                r.z[0].to_string(),
                r.z[1].to_string(),
                r.error.to_string(),
                r.error_half.to_string(),
                r.ratio.to_string(),
                r.pass.to_string(),
            ]
        })
        .collect();
    Ok(Report {
        json: json!({
            "command": "resolvent-check",
            "realization": realization_name(&p),
            "h": h,
            "length": length,
            "tolerance": tol,
            "cases": rows,
            "failed_checks": failed,
        }),
        header: vec!["z_re", "z_im", "error", "error_half", "ratio", "pass"],
        rows: csv,
        failed_checks: failed,
    })
}

#[derive(Serialize)]
struct BlockRow {
    index: usize,
    window: [f64; 2],
    dim: usize,
    deviation: f64,
}

/// Regularized direct sum of the configured blocks; checks `M~(i) = i I`.
pub fn triplet_sum(cfg: &RunConfig) -> Result<Report, Failure> {
    if cfg.blocks.is_empty() {
        return Err(Failure::Config("triplet-sum needs a non-empty `blocks` list".into()));
    }
    let blocks = cfg.blocks.iter().map(build_measure).collect::<Result<Vec<_>, _>>()?;
    let model = BlockModel::new(blocks)?;
    let tol = cfg.regularization_tol.unwrap_or(1e-10);
    let i = cx(0.0, 1.0);
    let deviation = |a: &CMatrix<f64>| spectral_norm(&(a - CMatrix::<f64>::identity(a.nrows(), a.ncols()) * i));
    let mut rows = Vec::new();
    for (k, (b, tt)) in model.blocks().iter().zip(model.transforms()).enumerate() {
        let base = weyl_base(b, i)?.value;
        let w = model.windows()[k];
        rows.push(BlockRow { index: k, window: [w.lo, w.hi], dim: b.dim(), deviation: deviation(&tt.transform_weyl(&base)) });
    }
    let sum = deviation(&model.direct_sum_weyl(i)?);
    let failed = rows.iter().filter(|r| !(r.deviation <= tol)).count() + usize::from(!(sum <= tol));
    let mut csv: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![r.index.to_string(), r.window[0].to_string(), r.window[1].to_string(), r.dim.to_string(), r.deviation.to_string()]
        })
        .collect();
    csv.push(vec!["sum".into(), String::new(), String::new(), model.dim().to_string(), sum.to_string()]);
    Ok(Report {
        json: json!({
            "command": "triplet-sum",
            "blocks": rows,
            "direct_sum_dim": model.dim(),
            "direct_sum_deviation": sum,
            "tolerance": tol,
            "pass": failed == 0,
            "failed_checks": failed,
        }),
        header: vec!["block", "window_lo", "window_hi", "dim", "deviation"],
        rows: csv,
        failed_checks: failed,
    })
}

/// Discretized 1-D Schrödinger operator as `T`: Dirichlet, Neumann and Krein
/// multiplicity tables and their agreement off `sigma(T) ∪ {0}`.
pub fn schrodinger_demo(cfg: &RunConfig, flags: &Flags) -> Result<Report, Failure> {
    let m = cfg.measure()?;
    let grid = cfg.t_grid(&m, flags.grid_n)?;
    let tol = rank_tol(cfg, flags)?;
    let tables = [CanonicalKind::Dirichlet, CanonicalKind::Neumann, CanonicalKind::Krein]
        .iter()
        .map(|&k| multiplicity_table(&m, &canonical_parameter(&m, k, TripletTag::Base), &grid, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let mut compared = 0;
    let mut mismatches = 0;
    for k in 0..grid.len() {
        if tables.iter().any(|t| t.exceptional[k]) {
            continue;
        }
        compared += 1;
        if tables.iter().any(|t| t.ranks[k] != tables[0].ranks[k]) {
            mismatches += 1;
        }
    }
    let lowest: Vec<f64> = m.eigenvalues().iter().take(10).copied().collect();
    Ok(Report {
        json: json!({
            "command": "schrodinger-demo",
            "dim": m.dim(),
            "lowest_eigenvalues": lowest,
            "tables": tables,
            "compared_points": compared,
            "failed_checks": mismatches,
        }),
        header: TABLE_HEADER.to_vec(),
        rows: tables.iter().flat_map(table_rows).collect(),
        failed_checks: mismatches,
    })
}

/// Full acceptance suite; each criterion line goes to stderr.
pub fn verify_all(cfg: Option<&RunConfig>, flags: &Flags) -> Report {
    let seed = flags.seed.or(cfg.and_then(|c| c.seed)).unwrap_or(suite::DEFAULT_SEED);
    let report = suite::run_all(seed);
    for c in &report.criteria {
        eprintln!("{}", c.line());
    }
    let rows = report
        .criteria
        .iter()
        .map(|c| {
            vec![
                c.id.to_string(),
                c.name.to_string(),
                c.pass.to_string(),
                c.metric.to_string(),
                c.tolerance.to_string(),
                c.checks.to_string(),
                c.failures.to_string(),
            ]
        })
        .collect();
    let failed = report.failed();
    Report {
        json: serde_json::to_value(&report).expect("report serializes"),
        header: vec!["id", "name", "pass", "metric", "tolerance", "checks", "failures"],
        rows,
        failed_checks: failed,
    }
}
