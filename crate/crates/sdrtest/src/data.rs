//! Dataset representation, CSV ingestion, and response slicing.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::config::TIE_WARN_FRACTION;
use crate::error::{Error, Result};

/// A regression dataset: n×p design matrix, response vector, and predictor
/// names. Requires n > p ≥ 1, unique names, and finite entries throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || y.len() != n {
            return Err(Error::EmptyData(format!(
                "design is {n}x{p} with response length {}",
                y.len()
            )));
        }
        if n <= p {
            return Err(Error::TooFewObservations { n, p });
        }
        if names.len() != p {
            return Err(Error::EmptyData(format!(
                "{} names for {p} predictors",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        for j in 0..p {
            for i in 0..n {
                if !x[(i, j)].is_finite() {
                    return Err(Error::NonFinite {
                        row: i + 1,
                        column: names[j].clone(),
                    });
                }
            }
        }
        for i in 0..n {
            if !y[i].is_finite() {
                return Err(Error::NonFinite {
                    row: i + 1,
                    column: "<response>".to_string(),
                });
            }
        }
        Ok(Dataset { x, y, names })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Position of a predictor by name.
    pub fn position(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Dataset restricted to the given predictor positions (order kept).
    pub fn select(&self, keep: &[usize]) -> Result<Dataset> {
        for &j in keep {
            if j >= self.p() {
                return Err(Error::PredictorIndex {
                    index: j,
                    p: self.p(),
                });
            }
        }
        let cols: Vec<_> = keep.iter().map(|&j| self.x.column(j).into_owned()).collect();
        let x = DMatrix::from_columns(&cols);
        let names = keep.iter().map(|&j| self.names[j].clone()).collect();
        Dataset::new(x, self.y.clone(), names)
    }
}

/// Strict CSV: comma separator, one header row, '.' decimal point, no quoting.
pub fn load_csv(path: &Path, response: &str) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, response)
}

pub fn parse_csv(text: &str, response: &str) -> Result<Dataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyData("file has no header row".to_string()))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    for (i, name) in columns.iter().enumerate() {
        if columns[..i].contains(name) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }
    let resp_idx = columns
        .iter()
        .position(|c| c == response)
        .ok_or_else(|| Error::MissingColumn(response.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::EmptyData(format!(
                "row {} has {} fields, expected {}",
                lineno + 1,
                fields.len(),
                columns.len()
            )));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (j, field) in fields.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::NonNumericCell {
                row: lineno + 1,
                column: columns[j].clone(),
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row: lineno + 1,
                    column: columns[j].clone(),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyData("file has a header but no data rows".to_string()));
    }

    let n = rows.len();
    let p = columns.len() - 1;
    if p == 0 {
        return Err(Error::EmptyData("no predictor columns besides the response".to_string()));
    }
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        let mut k = 0;
        for (j, &v) in row.iter().enumerate() {
            if j == resp_idx {
                y[i] = v;
            } else {
                x[(i, k)] = v;
                k += 1;
            }
        }
    }
    let names = columns
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != resp_idx)
        .map(|(_, c)| c.clone())
        .collect();
    Dataset::new(x, y, names)
}

/// Renders a dataset back to the same CSV dialect, predictors first and the
/// response last. Floats print in shortest round-trip form, so a load of the
/// output reproduces the dataset bit for bit.
pub fn render_csv(data: &Dataset, response: &str, slices: Option<&SlicedResponse>) -> String {
    let mut out = String::new();
    for name in data.names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(response);
    if slices.is_some() {
        out.push_str(",slice");
    }
    out.push('\n');
    for i in 0..data.n() {
        for j in 0..data.p() {
            let _ = write!(out, "{},", data.x()[(i, j)]);
        }
        let _ = write!(out, "{}", data.y()[i]);
        if let Some(s) = slices {
            let _ = write!(out, ",{}", s.labels()[i] + 1);
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(data: &Dataset, response: &str, path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(data, response, None))?;
    Ok(())
}

/// Response discretized into slices.
///
/// Labels are 0-based slice indices in observation order; slices are ordered
/// by response value. `tie_warning` is set when more than 10% of slice
/// boundaries fall inside a run of tied response values, in which case the
/// assignment of the tied observations is decided by original row order.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicedResponse {
    labels: Vec<usize>,
    h: usize,
    counts: Vec<usize>,
    props: DVector<f64>,
    roots: DVector<f64>,
    tie_warning: bool,
}

impl SlicedResponse {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of slices actually formed (may be below the request when the
    /// response has few distinct values).
    pub fn h(&self) -> usize {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Slice proportions f̂_y = n_y / n.
    pub fn props(&self) -> &DVector<f64> {
        &self.props
    }

    /// Square roots ĝ_y = √f̂_y.
    pub fn roots(&self) -> &DVector<f64> {
        &self.roots
    }

    pub fn tie_warning(&self) -> bool {
        self.tie_warning
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// Discretizes the response into `h` equal-frequency slices.
///
/// Observations are ordered by response value with original index as the tie
/// break; the first (n mod h) slices receive ⌈n/h⌉ observations and the rest
/// ⌊n/h⌋. When the response has at most `h` distinct values, each distinct
/// value becomes its own slice instead.
pub fn slice_response(y: &DVector<f64>, h: usize) -> Result<SlicedResponse> {
    let n = y.len();
    if h < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 slices, got {h}"
        )));
    }
    if h > n {
        return Err(Error::TooManySlices { h, n });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[a].partial_cmp(&y[b])
            .expect("response entries are finite")
            .then(a.cmp(&b))
    });

    let mut distinct: Vec<f64> = Vec::new();
    for &i in &order {
        if distinct.last() != Some(&y[i]) {
            distinct.push(y[i]);
        }
    }
    if distinct.len() < 2 {
        return Err(Error::ConstantResponse);
    }

    let mut labels = vec![0usize; n];
    let h_actual;
    let mut tied_boundaries = 0usize;
    if distinct.len() <= h {
        // Categorical mode: one slice per distinct value.
        h_actual = distinct.len();
        for &i in &order {
            let slice = distinct
                .iter()
                .position(|&v| v == y[i])
                .expect("value collected above");
            labels[i] = slice;
        }
    } else {
        h_actual = h;
        let base = n / h;
        let extra = n % h;
        let mut start = 0;
        for slice in 0..h {
            let len = base + usize::from(slice < extra);
            for &i in &order[start..start + len] {
                labels[i] = slice;
            }
            if slice > 0 && y[order[start - 1]] == y[order[start]] {
                tied_boundaries += 1;
            }
            start += len;
        }
    }

    let mut counts = vec![0usize; h_actual];
    for &l in &labels {
        counts[l] += 1;
    }
    debug_assert_eq!(counts.iter().sum::<usize>(), n);
    let props = DVector::from_iterator(h_actual, counts.iter().map(|&c| c as f64 / n as f64));
    let roots = props.map(f64::sqrt);
    let tie_warning =
        h_actual == h && tied_boundaries as f64 > TIE_WARN_FRACTION * (h - 1) as f64;

    Ok(SlicedResponse {
        labels,
        h: h_actual,
        counts,
        props,
        roots,
        tie_warning,
    })
}
