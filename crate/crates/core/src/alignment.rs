//! Orthogonal Procrustes alignment between two embedding spaces.
//!
//! Seed pairs are stored column-wise: `X` and `Y` are `d × m` with the
//! source (resp. target) vector of pair `i` in column `i`. The cross product
//! `M = Y·Xᵀ` is then `d × d`, and with `M = U·Σ·Vᵀ` the map
//! `W = U·Vᵀ` minimises `‖W·X − Y‖_F` over orthogonal `W`.
//!
//! Map files (`.omap`) are text: a header
//! `<d> <source_lang> <target_lang> <preprocessing>` followed by `d` rows of
//! `d` space-separated values at 9 significant digits.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, Axis, Zip};

use crate::dataset::{Role, SeedDictionary};
use crate::embedding::{EmbeddingSpace, Preprocessing};
use crate::error::{Error, Result};
use crate::numfmt::format_sig9;
use crate::svd::jacobi_svd;

/// Singular values below this fraction of the largest are reported as
/// rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Orthogonality tolerance applied to maps read from text.
const LOADED_ORTHOGONALITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    matrix: Array2<f64>,
    source_language: String,
    target_language: String,
    /// Number of pairs the map was fitted on; unknown for loaded maps.
    seed_size: Option<usize>,
    preprocessing: Preprocessing,
}

impl OrthogonalMap {
    pub fn new(
        matrix: Array2<f64>,
        source_language: impl Into<String>,
        target_language: impl Into<String>,
        preprocessing: Preprocessing,
        seed_size: Option<usize>,
    ) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(Error::invalid(format!("map matrix must be square, got {r}x{c}")));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("map matrix has non-finite entries"));
        }
        Ok(OrthogonalMap {
            matrix,
            source_language: source_language.into(),
            target_language: target_language.into(),
            seed_size,
            preprocessing,
        })
    }

    pub fn identity(d: usize, source: &str, target: &str, preprocessing: Preprocessing) -> Self {
        OrthogonalMap::new(Array2::eye(d), source, target, preprocessing, None)
            .expect("identity is a valid map")
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn source_language(&self) -> &str {
        &self.source_language
    }

    pub fn target_language(&self) -> &str {
        &self.target_language
    }

    pub fn seed_size(&self) -> Option<usize> {
        self.seed_size
    }

    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    /// `max |WᵀW − I|`.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.matrix)
    }
}

pub fn orthogonality_error(w: &Array2<f64>) -> f64 {
    let gram = w.t().dot(w);
    gram.indexed_iter()
        .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Fit diagnostics alongside the map.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub singular_values: Array1<f64>,
    /// Singular values below `RANK_TOLERANCE · σ_max`.
    pub rank_deficiency: usize,
    pub pairs: usize,
}

/// Fits `W` on the dictionary pairs whose role is in `roles`.
pub fn procrustes_fit(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    dict: &SeedDictionary,
    roles: &[Role],
) -> Result<OrthogonalMap> {
    procrustes_fit_with_report(source, target, dict, roles).map(|(map, _)| map)
}

pub fn procrustes_fit_with_report(
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    dict: &SeedDictionary,
    roles: &[Role],
) -> Result<(OrthogonalMap, FitReport)> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: source.dim(),
            found: target.dim(),
            context: "target space vs source space".into(),
        });
    }
    if source.preprocessing() != target.preprocessing() {
        return Err(Error::invalid(format!(
            "source preprocessed with {} but target with {}",
            source.preprocessing(),
            target.preprocessing()
        )));
    }
    let mut pairs = Vec::new();
    for id in dict.ids_with_roles(roles) {
        pairs.push((source.require(id)?, target.require(id)?));
    }
    if pairs.is_empty() {
        return Err(Error::invalid("no dictionary pairs selected for fitting"));
    }

    let cross = cross_product(source, target, &pairs);
    let (w, singular_values) = orthogonal_factor(&cross)?;

    let sigma_max = singular_values[0];
    let rank_deficiency = singular_values
        .iter()
        .filter(|&&s| s < RANK_TOLERANCE * sigma_max || sigma_max == 0.0)
        .count();
    if rank_deficiency > 0 {
        log::warn!(
            "cross-covariance is rank deficient: {rank_deficiency} of {} singular values below {RANK_TOLERANCE:e}·σ_max; map is not unique",
            singular_values.len()
        );
    }
    let map = OrthogonalMap::new(
        w,
        source.language(),
        target.language(),
        source.preprocessing(),
        Some(pairs.len()),
    )?;
    let report = FitReport {
        singular_values,
        rank_deficiency,
        pairs: pairs.len(),
    };
    Ok((map, report))
}

/// `M = Σ_i y_i x_iᵀ` accumulated in pair order.
fn cross_product(source: &EmbeddingSpace, target: &EmbeddingSpace, pairs: &[(usize, usize)]) -> Array2<f64> {
    let d = source.dim();
    let mut m = Array2::<f64>::zeros((d, d));
    for &(s, t) in pairs {
        let x = source.vector(s);
        let y = target.vector(t);
        for (a, mut row) in m.axis_iter_mut(Axis(0)).enumerate() {
            let ya = y[a];
            Zip::from(&mut row).and(&x).for_each(|m, &xb| *m += ya * xb);
        }
    }
    m
}

/// `U·Vᵀ` from the SVD of `m`, together with its singular values.
pub fn orthogonal_factor(m: &Array2<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    let svd = jacobi_svd(m)?;
    Ok((svd.u.dot(&svd.v.t()), svd.singular_values))
}

/// Replaces every vector `x` by `W·x`.
pub fn apply_map(map: &OrthogonalMap, space: &EmbeddingSpace) -> Result<EmbeddingSpace> {
    if map.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: map.dim(),
            found: space.dim(),
            context: format!("applying {}→{} map", map.source_language, map.target_language),
        });
    }
    let w = &map.matrix;
    let mut out = Array2::<f64>::zeros(space.vectors().dim());
    // Row-parallel; each output row is an independent fixed-order reduction.
    Zip::from(out.rows_mut())
        .and(space.vectors().rows())
        .par_for_each(|mut dst, src| {
            for (a, w_row) in w.rows().into_iter().enumerate() {
                dst[a] = w_row.iter().zip(src.iter()).map(|(p, q)| p * q).sum();
            }
        });
    space.replace_vectors(out, space.preprocessing())
}

pub fn render_map(map: &OrthogonalMap) -> String {
    let mut out = format!(
        "{} {} {} {}\n",
        map.dim(),
        map.source_language,
        map.target_language,
        map.preprocessing
    );
    for row in map.matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format_sig9(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_map(text: &str, origin: &str) -> Result<OrthogonalMap> {
    let Some(body) = text.strip_suffix('\n') else {
        return Err(Error::format(origin, text.split('\n').count().max(1), "missing trailing newline"));
    };
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let fields: Vec<&str> = header.split(' ').collect();
    let [d, source, target, preprocessing] = fields[..] else {
        return Err(Error::format(origin, 1, format!("malformed header {header:?}")));
    };
    let digits = !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit());
    let d: usize = match d.parse::<usize>() {
        Ok(d) if digits && d > 0 => d,
        _ => return Err(Error::format(origin, 1, format!("invalid dimension {d:?}"))),
    };
    if source.is_empty() || target.is_empty() {
        return Err(Error::format(origin, 1, "empty language code"));
    }
    let preprocessing: Preprocessing = preprocessing
        .parse()
        .map_err(|e: Error| Error::format(origin, 1, e.to_string()))?;
    let mut values = Vec::with_capacity(d * d);
    let mut rows = 0;
    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        rows += 1;
        if rows > d {
            return Err(Error::format(origin, lineno, format!("more than {d} rows")));
        }
        let mut count = 0;
        for token in line.split(' ') {
            count += 1;
            let v: f64 = token
                .parse()
                .map_err(|_| Error::format(origin, lineno, format!("invalid value {token:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(origin, lineno, format!("non-finite value {token:?}")));
            }
            values.push(v);
        }
        if count != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: count,
                context: format!("{origin} line {lineno}"),
            });
        }
    }
    if rows != d {
        return Err(Error::format(origin, rows + 2, format!("expected {d} rows, found {rows}")));
    }
    let matrix = Array2::from_shape_vec((d, d), values).expect("shape checked");
    let err = orthogonality_error(&matrix);
    if err > LOADED_ORTHOGONALITY_TOLERANCE {
        return Err(Error::format(
            origin,
            0,
            format!("matrix is not orthogonal (max |WᵀW − I| = {err:e})"),
        ));
    }
    OrthogonalMap::new(matrix, source, target, preprocessing, None)
}

pub fn load_map(path: impl AsRef<Path>) -> Result<OrthogonalMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_map(&text, &path.display().to_string())
}

pub fn save_map(map: &OrthogonalMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for lang in [&map.source_language, &map.target_language] {
        if lang.is_empty() || lang.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("language code {lang:?} cannot be written")));
        }
    }
    fs::write(path, render_map(map)).map_err(|e| Error::io(path, e))
}
