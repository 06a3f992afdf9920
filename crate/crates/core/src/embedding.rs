//! Concept-embedding spaces and the `.cvec` text format.
//!
//! A `.cvec` file is UTF-8 text:
//!
//! ```text
//! <n> <d>
//! <concept_id>\t<surface_form>\t<v1> <v2> ... <vd>
//! ...
//! ```
//!
//! The header is two ASCII decimals separated by one space. Each of the `n`
//! rows holds a concept identifier, its surface form (which may contain
//! spaces, never tabs) and `d` components separated by single spaces.
//! Components are written rounded to 9 significant digits. No other
//! whitespace is allowed and the file ends with a newline.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::numfmt::format_sig9;

/// Tolerance on row norms for spaces flagged as normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

/// Language-tagged concept vocabulary with one dense vector per concept.
///
/// Immutable once built; every constructor validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSpace {
    language: String,
    ids: Vec<String>,
    forms: Vec<String>,
    vectors: Array2<f64>,
    preprocessing: Preprocessing,
    index: HashMap<String, usize>,
}

impl EmbeddingSpace {
    pub fn new(
        language: impl Into<String>,
        ids: Vec<String>,
        forms: Vec<String>,
        vectors: Array2<f64>,
    ) -> Result<Self> {
        let (n, d) = vectors.dim();
        if n == 0 || ids.is_empty() {
            return Err(Error::invalid("embedding space must hold at least one concept"));
        }
        if d == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if ids.len() != n || forms.len() != n {
            return Err(Error::invalid(format!(
                "{} ids and {} forms for {} vectors",
                ids.len(),
                forms.len(),
                n
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (row, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::invalid(format!("duplicate concept id {id}")));
            }
        }
        if let Some(((row, _), _)) = vectors.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in vector of concept {}",
                ids[row]
            )));
        }
        Ok(EmbeddingSpace {
            language: language.into(),
            ids,
            forms,
            vectors,
            preprocessing: Preprocessing::None,
            index,
        })
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn forms(&self) -> &[String] {
        &self.forms
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn vector(&self, row: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(row)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Whether rows were scaled to unit length by [`normalize_space`].
    pub fn is_normalized(&self) -> bool {
        self.preprocessing != Preprocessing::None
    }

    /// Scheme last applied by [`normalize_space`]; `None` for raw vectors.
    pub fn preprocessing(&self) -> Preprocessing {
        self.preprocessing
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Row index of `id`, or a `MissingConcept` error.
    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::MissingConcept {
            id: id.to_string(),
            language: self.language.clone(),
        })
    }

    /// New space holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<EmbeddingSpace> {
        let ids = rows.iter().map(|&r| self.ids[r].clone()).collect();
        let forms = rows.iter().map(|&r| self.forms[r].clone()).collect();
        let vectors = self.vectors.select(Axis(0), rows);
        let mut space = EmbeddingSpace::new(self.language.clone(), ids, forms, vectors)?;
        space.preprocessing = self.preprocessing;
        Ok(space)
    }

    /// Same vocabulary with a replacement matrix of identical shape.
    pub(crate) fn replace_vectors(
        &self,
        vectors: Array2<f64>,
        preprocessing: Preprocessing,
    ) -> Result<Self> {
        if vectors.dim() != self.vectors.dim() {
            return Err(Error::invalid("replacement matrix shape differs"));
        }
        if let Some(((row, _), _)) = vectors.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value in vector of concept {}",
                self.ids[row]
            )));
        }
        Ok(EmbeddingSpace {
            language: self.language.clone(),
            ids: self.ids.clone(),
            forms: self.forms.clone(),
            vectors,
            preprocessing,
            index: self.index.clone(),
        })
    }
}

/// Vector preprocessing applied before alignment and retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Preprocessing {
    #[default]
    Unit,
    CenterThenUnit,
    None,
}

impl Preprocessing {
    pub fn as_str(self) -> &'static str {
        match self {
            Preprocessing::Unit => "unit",
            Preprocessing::CenterThenUnit => "center_then_unit",
            Preprocessing::None => "none",
        }
    }
}

impl fmt::Display for Preprocessing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preprocessing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Preprocessing::Unit),
            "center_then_unit" => Ok(Preprocessing::CenterThenUnit),
            "none" => Ok(Preprocessing::None),
            other => Err(Error::invalid(format!(
                "unknown preprocessing scheme {other:?} (expected unit, center_then_unit or none)"
            ))),
        }
    }
}

pub(crate) fn l2_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Applies `scheme` and returns the preprocessed space.
pub fn normalize_space(space: &EmbeddingSpace, scheme: Preprocessing) -> Result<EmbeddingSpace> {
    let mut vectors = space.vectors.clone();
    match scheme {
        Preprocessing::None => return space.replace_vectors(vectors, Preprocessing::None),
        Preprocessing::Unit => {}
        Preprocessing::CenterThenUnit => {
            let n = vectors.nrows() as f64;
            let mut means = Array1::<f64>::zeros(vectors.ncols());
            for row in vectors.rows() {
                means += &row;
            }
            means /= n;
            for mut row in vectors.rows_mut() {
                row -= &means;
            }
        }
    }
    for (i, mut row) in vectors.rows_mut().into_iter().enumerate() {
        let norm = l2_norm(row.view());
        if norm == 0.0 {
            return Err(Error::ZeroNorm(space.ids[i].clone()));
        }
        row.mapv_inplace(|x| x / norm);
    }
    space.replace_vectors(vectors, scheme)
}

/// Reads and validates a `.cvec` file.
///
/// The space's language tag is the file stem (`fr.cvec` gives `fr`); use
/// [`EmbeddingSpace::with_language`] to override it.
pub fn load_space(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingSpace> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::format(&origin, 0, format!("invalid UTF-8: {e}")))?;
    let language = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_space(&text, &origin, &language, expected_dim)
}

fn parse_count(token: &str) -> Option<usize> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

/// Parses `.cvec` text. `origin` labels error messages.
pub fn parse_space(
    text: &str,
    origin: &str,
    language: &str,
    expected_dim: Option<usize>,
) -> Result<EmbeddingSpace> {
    if text.is_empty() {
        return Err(Error::format(origin, 1, "empty file"));
    }
    let Some(body) = text.strip_suffix('\n') else {
        let last = text.split('\n').count();
        return Err(Error::format(origin, last, "missing trailing newline"));
    };
    let mut lines = body.split('\n');
    let header = lines.next().unwrap_or_default();
    let (n, d) = match header.split_once(' ') {
        Some((n, d)) => match (parse_count(n), parse_count(d)) {
            (Some(n), Some(d)) => (n, d),
            _ => return Err(Error::format(origin, 1, format!("malformed header {header:?}"))),
        },
        None => return Err(Error::format(origin, 1, format!("malformed header {header:?}"))),
    };
    if n == 0 || d == 0 {
        return Err(Error::format(origin, 1, "header must declare n >= 1 and d >= 1"));
    }
    if let Some(expected) = expected_dim {
        if expected != d {
            return Err(Error::DimensionMismatch {
                expected,
                found: d,
                context: format!("{origin} header"),
            });
        }
    }

    let mut ids = Vec::with_capacity(n);
    let mut forms = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * d);
    let mut seen = HashMap::with_capacity(n);
    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        if offset >= n {
            return Err(Error::format(origin, lineno, format!("more than {n} rows")));
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(form), Some(block), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::format(
                origin,
                lineno,
                "expected <id>\\t<form>\\t<vector>",
            ));
        };
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::format(origin, lineno, format!("invalid concept id {id:?}")));
        }
        if form.is_empty() || form.contains(['\r', '\n']) {
            return Err(Error::format(origin, lineno, "invalid surface form"));
        }
        if let Some(first) = seen.insert(id.to_string(), lineno) {
            return Err(Error::format(
                origin,
                lineno,
                format!("duplicate concept id {id} (first on line {first})"),
            ));
        }
        let mut count = 0;
        for token in block.split(' ') {
            count += 1;
            let value: f64 = token.parse().map_err(|_| {
                Error::format(origin, lineno, format!("invalid component {token:?}"))
            })?;
            if !value.is_finite() {
                return Err(Error::format(
                    origin,
                    lineno,
                    format!("non-finite value {token:?}"),
                ));
            }
            if count <= d {
                values.push(value);
            }
        }
        if count != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: count,
                context: format!("{origin} line {lineno}"),
            });
        }
        ids.push(id.to_string());
        forms.push(form.to_string());
    }
    if ids.len() != n {
        return Err(Error::format(
            origin,
            ids.len() + 2,
            format!("header declares {n} rows, found {}", ids.len()),
        ));
    }
    let vectors = Array2::from_shape_vec((n, d), values).expect("shape checked while parsing");
    EmbeddingSpace::new(language, ids, forms, vectors)
}

/// Renders a space in `.cvec` text form.
pub fn render_space(space: &EmbeddingSpace) -> String {
    let mut out = format!("{} {}\n", space.len(), space.dim());
    for (i, row) in space.vectors.rows().into_iter().enumerate() {
        out.push_str(&space.ids[i]);
        out.push('\t');
        out.push_str(&space.forms[i]);
        out.push('\t');
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            out.push_str(&format_sig9(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_space(space: &EmbeddingSpace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(form) = space.forms.iter().find(|f| f.contains(['\t', '\n', '\r'])) {
        return Err(Error::invalid(format!(
            "surface form {form:?} cannot be written (contains a tab or newline)"
        )));
    }
    if let Some(id) = space.ids.iter().find(|id| id.chars().any(char::is_whitespace)) {
        return Err(Error::invalid(format!("concept id {id:?} contains whitespace")));
    }
    fs::write(path, render_space(space)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn space(rows: Array2<f64>) -> EmbeddingSpace {
        let ids = (0..rows.nrows()).map(|i| format!("{i:08}-n")).collect();
        let forms = (0..rows.nrows()).map(|i| format!("w{i}")).collect();
        EmbeddingSpace::new("xx", ids, forms, rows).unwrap()
    }

    #[test]
    fn parses_two_by_three() {
        let text = "2 3\na-n\tcat\t1 2 3\nb-n\tdog\t-0.5 0 1e-3\n";
        let s = parse_space(text, "t", "en", None).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        assert_eq!(s.ids(), ["a-n", "b-n"]);
        assert_eq!(s.vector(1)[2], 1e-3);
        assert_eq!(s.language(), "en");
    }

    #[test]
    fn short_row_names_its_line() {
        let text = "2 3\na-n\tcat\t1 2 3\nb-n\tdog\t1 2\n";
        let err = parse_space(text, "t", "en", None).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2, .. }));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn nan_is_rejected() {
        let text = "1 2\na-n\tcat\tnan 1\n";
        let err = parse_space(text, "t", "en", None).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
        let text = "1 2\na-n\tcat\t1 inf\n";
        assert!(parse_space(text, "t", "en", None).is_err());
    }

    #[test]
    fn grammar_violations() {
        let cases = [
            ("", "empty"),
            ("1 2\na-n\tcat\t1 2", "trailing newline"),
            ("1  2\na-n\tcat\t1 2\n", "header"),
            ("x 2\na-n\tcat\t1 2\n", "header"),
            ("2 2\na-n\tcat\t1 2\n", "found 1"),
            ("1 2\na-n\tcat\t1 2\nb-n\tcat\t1 2\n", "more than"),
            ("2 2\na-n\tcat\t1 2\na-n\tdog\t1 2\n", "duplicate"),
            ("1 2\na-n\tcat\t1  2\n", "invalid component"),
            ("1 2\na-n\tcat\t1 2 \n", "invalid component"),
            ("1 2\na-n cat\t1 2\n", "expected"),
            ("1 2\na-n\tcat\t1 2\r\n", "invalid component"),
            ("0 2\n", "n >= 1"),
        ];
        for (text, needle) in cases {
            let err = parse_space(text, "t", "en", None).unwrap_err();
            assert!(err.to_string().contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn expected_dim_is_enforced() {
        let text = "1 2\na-n\tcat\t1 2\n";
        assert!(parse_space(text, "t", "en", Some(2)).is_ok());
        assert!(matches!(
            parse_space(text, "t", "en", Some(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unit_scheme_scales_rows() {
        let s = normalize_space(&space(array![[3.0, 4.0]]), Preprocessing::Unit).unwrap();
        assert!((s.vector(0)[0] - 0.6).abs() < 1e-15);
        assert!((s.vector(0)[1] - 0.8).abs() < 1e-15);
        assert!(s.is_normalized());
    }

    #[test]
    fn none_scheme_is_bitwise_identity() {
        let raw = space(array![[0.1, -7.25], [1e-300, 3.0]]);
        let s = normalize_space(&raw, Preprocessing::None).unwrap();
        for (a, b) in raw.vectors().iter().zip(s.vectors()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(!s.is_normalized());
    }

    #[test]
    fn center_then_unit() {
        let s = normalize_space(&space(array![[1.0, 0.0], [3.0, 0.0]]), Preprocessing::CenterThenUnit)
            .unwrap();
        assert_eq!(s.vectors(), &array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn zero_row_reports_concept() {
        let err = normalize_space(&space(array![[1.0, 0.0], [0.0, 0.0]]), Preprocessing::Unit)
            .unwrap_err();
        assert!(matches!(err, Error::ZeroNorm(ref id) if id == "00000001-n"));
    }

    #[test]
    fn empty_space_is_rejected() {
        let err = EmbeddingSpace::new("en", vec![], vec![], Array2::zeros((0, 3))).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn form_with_space_survives_render() {
        let s = EmbeddingSpace::new(
            "en",
            vec!["a-n".into()],
            vec!["ice cream".into()],
            array![[0.25, -1.0]],
        )
        .unwrap();
        let text = render_space(&s);
        assert_eq!(text, "1 2\na-n\tice cream\t0.25 -1\n");
        let back = parse_space(&text, "t", "en", None).unwrap();
        assert_eq!(back.forms(), ["ice cream"]);
    }

    #[test]
    fn missing_file_is_io() {
        let err = load_space("/nonexistent/dir/x.cvec", None).unwrap_err();
        assert!(err.is_io());
    }
}
