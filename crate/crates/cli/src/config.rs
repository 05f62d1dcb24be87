//! JSON run configuration. Complex numbers are `[re, im]` pairs (a bare
//! number is read as real); matrices are row-major arrays of rows.

use std::path::{Path, PathBuf};

use halfline::realizations::{canonical_parameter, CanonicalKind, ExtensionParameter};
use halfline::scalar::{cx, CMatrix};
use halfline::{SpectralMeasure, TripletTag};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum CNum {
    Real(f64),
    Pair([f64; 2]),
}

impl CNum {
    fn parts(self) -> (f64, f64) {
        match self {
            CNum::Real(r) => (r, 0.0),
            CNum::Pair([r, i]) => (r, i),
        }
    }
}

pub type MatrixSpec = Vec<Vec<CNum>>;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Diagonal(Vec<f64>),
    Matrix(MatrixSpec),
    Schrodinger1d { q: Vec<f64>, length: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Dirichlet,
    Neumann,
    Krein,
}

#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TripletSpec {
    #[default]
    Base,
    Regularized,
}

impl From<TripletSpec> for TripletTag {
    fn from(t: TripletSpec) -> Self {
        match t {
            TripletSpec::Base => TripletTag::Base,
            TripletSpec::Regularized => TripletTag::Regularized,
        }
    }
}

/// Either a named realization or a Hermitian `B` relative to `triplet`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationSpec {
    pub kind: Option<KindSpec>,
    pub matrix: Option<MatrixSpec>,
    #[serde(default)]
    pub triplet: TripletSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum TGridSpec {
    Points { points: Vec<f64> },
    Linear { start: f64, end: f64, n: usize },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGridSpec {
    pub h: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "UPPERCASE")]
pub enum BcSpec {
    DD,
    NN,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: Option<Format>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: Option<PotentialSpec>,
    pub realization: Option<RealizationSpec>,
    pub t_grid: Option<TGridSpec>,
    pub z: Vec<CNum>,
    pub x_grid: Option<XGridSpec>,
    /// Blocks for `triplet-sum`, each with spectrum in one unit window.
    pub blocks: Vec<PotentialSpec>,
    pub interval_bc: Option<BcSpec>,
    pub eigen_count: Option<usize>,
    pub rank_tol: Option<f64>,
    pub herglotz_tol: Option<f64>,
    pub regularization_tol: Option<f64>,
    pub resolvent_tol: Option<f64>,
    pub seed: Option<u64>,
    pub output: OutputSpec,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("herglotz_tol", self.herglotz_tol),
            ("regularization_tol", self.regularization_tol),
            ("resolvent_tol", self.resolvent_tol),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(bad(format!("{name} must be positive")));
                }
            }
        }
        match &self.t_grid {
            Some(TGridSpec::Points { points }) if points.is_empty() => return Err(bad("t_grid.points is empty")),
            Some(TGridSpec::Linear { n, start, end }) if *n == 0 || !(start <= end) => {
                return Err(bad("t_grid needs n >= 1 and start <= end"))
            }
            _ => {}
        }
        if let Some(x) = &self.x_grid {
            if !(x.h > 0.0) || !(x.length > x.h) {
                return Err(bad("x_grid needs 0 < h < length"));
            }
        }
        if self.eigen_count == Some(0) {
            return Err(bad("eigen_count must be positive"));
        }
        Ok(())
    }

    pub fn measure(&self) -> Result<SpectralMeasure<f64>, ConfigError> {
        let spec = self.potential.as_ref().ok_or_else(|| bad("missing `potential`"))?;
        build_measure(spec)
    }

    /// Dirichlet unless a realization is given.
    pub fn parameter(&self, m: &SpectralMeasure<f64>) -> Result<ExtensionParameter<f64>, ConfigError> {
        let spec = self.realization.clone().unwrap_or_default();
        let tag = TripletTag::from(spec.triplet);
        match (spec.kind, &spec.matrix) {
            (Some(_), Some(_)) => Err(bad("realization takes `kind` or `matrix`, not both")),
            (None, Some(rows)) => {
                let b = build_matrix(rows)?;
                if b.nrows() != m.dim() {
                    return Err(bad(format!("realization matrix is {}x{}, potential has dim {}", b.nrows(), b.ncols(), m.dim())));
                }
                ExtensionParameter::try_matrix(b, tag).map_err(|e| bad(format!("realization: {e}")))
            }
            (kind, None) => {
                let kind = match kind.unwrap_or(KindSpec::Dirichlet) {
                    KindSpec::Dirichlet => CanonicalKind::Dirichlet,
                    KindSpec::Neumann => CanonicalKind::Neumann,
                    KindSpec::Krein => CanonicalKind::Krein,
                };
                Ok(canonical_parameter(m, kind, tag))
            }
        }
    }

    /// The configured t-grid, or `[0, max sigma(T) + 5]` with 200 points;
    /// `grid_n` overrides the point count of a linear grid.
    pub fn t_grid(&self, m: &SpectralMeasure<f64>, grid_n: Option<usize>) -> Result<Vec<f64>, ConfigError> {
        let (start, end, n) = match &self.t_grid {
            Some(TGridSpec::Points { points }) => return Ok(points.clone()),
            Some(TGridSpec::Linear { start, end, n }) => (*start, *end, *n),
            None => (0.0, m.max_spectrum() + 5.0, 200),
        };
        let n = grid_n.unwrap_or(n);
        if n == 0 {
            return Err(bad("grid-n must be positive"));
        }
        Ok(halfline::multiplicity::linear_grid(start, end, n))
    }

    pub fn z_list(&self, default: &[(f64, f64)]) -> Vec<halfline::scalar::Cx<f64>> {
        if self.z.is_empty() {
            default.iter().map(|&(r, i)| cx(r, i)).collect()
        } else {
            self.z.iter().map(|c| c.parts()).map(|(r, i)| cx(r, i)).collect()
        }
    }
}

pub fn build_matrix(rows: &MatrixSpec) -> Result<CMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(bad("matrix must be square and non-empty"));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let (r, im) = rows[i][j].parts();
        cx(r, im)
    }))
}

pub fn build_measure(spec: &PotentialSpec) -> Result<SpectralMeasure<f64>, ConfigError> {
    let m = match spec {
        PotentialSpec::Diagonal(v) => SpectralMeasure::from_diagonal(v),
        PotentialSpec::Matrix(rows) => SpectralMeasure::from_matrix(&build_matrix(rows)?),
        PotentialSpec::Schrodinger1d { q, length } => SpectralMeasure::from_schrodinger_1d(q, *length),
    };
    m.map_err(|e| bad(format!("potential: {e}")))
}
