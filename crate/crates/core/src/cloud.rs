//! Point clouds and representative maps.
//!
//! Both types store coordinates row-major in a single flat buffer so that the
//! solver can operate on them without reshaping. Index `n` always refers to the
//! same point throughout the pipeline.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points `x_0, …, x_{N-1}` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major coordinate buffer.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCloud("dimension must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::InvalidCloud("cloud must contain at least one point".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} coordinates do not split into rows of length {dim}",
                coords.len()
            )));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidCloud(format!(
                "point {} has a non-finite coordinate",
                pos / dim
            )));
        }
        Ok(Self { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidCloud("cloud must contain at least one point".into()))?;
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for (n, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidCloud(format!(
                    "point {n} has {} coordinates, expected {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Self::new(dim, coords)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    /// Always false: a valid cloud holds at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, n: usize) -> &[f64] {
        &self.coords[n * self.dim..(n + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    #[inline]
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.coords
    }

    /// Arithmetic mean of all points.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for p in self.points() {
            for (m, &c) in mean.iter_mut().zip(p) {
                *m += c;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Returns the cloud with its points reordered so that new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut coords = Vec::with_capacity(self.coords.len());
        for &p in perm {
            coords.extend_from_slice(self.point(p));
        }
        Self {
            dim: self.dim,
            coords,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&CloudJson::from(self)).expect("cloud serialization cannot fail")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: CloudJson = serde_json::from_str(s)?;
        let cloud = Self::from_rows(&raw.points)?;
        if cloud.dim != raw.dim {
            return Err(Error::DimensionMismatch {
                expected: raw.dim,
                found: cloud.dim,
            });
        }
        Ok(cloud)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows_csv(writer, self.points())
    }

    /// Reads a headerless CSV with one point per row.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let (dim, coords) = read_rows_csv(reader, origin, None)?;
        Self::new(dim, coords)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            let mut s = String::new();
            std::io::BufReader::new(file).read_to_string(&mut s)?;
            Self::from_json_str(&s)
        } else {
            Self::read_csv(file, path)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CloudJson {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl From<&PointCloud> for CloudJson {
    fn from(cloud: &PointCloud) -> Self {
        Self {
            dim: cloud.dim,
            points: cloud.points().map(<[f64]>::to_vec).collect(),
        }
    }
}

/// The map `n ↦ y_n` assigning every data point its representative.
#[derive(Debug, Clone, PartialEq)]
pub struct Representatives {
    dim: usize,
    values: Vec<f64>,
}

impl Representatives {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidCloud(format!(
                "{} values do not split into rows of length {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("representatives"));
        }
        Ok(Self { dim, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    /// The identity map `y_n = x_n`.
    pub fn identity(cloud: &PointCloud) -> Self {
        Self {
            dim: cloud.dim,
            values: cloud.coords.clone(),
        }
    }

    /// Every point mapped to the same vector.
    pub fn constant(n: usize, value: &[f64]) -> Self {
        Self {
            dim: value.len(),
            values: value.repeat(n),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn values(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    #[inline]
    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn from_flat_unchecked(dim: usize, values: Vec<f64>) -> Self {
        Self { dim, values }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.value(p));
        }
        Self {
            dim: self.dim,
            values,
        }
    }

    /// Mean squared distance `(1/N) Σ |y_n - z_n|²` to another map of the same shape.
    pub fn mean_sq_distance(&self, other: &Self) -> Result<f64> {
        self.check_shape(other.dim, other.len())?;
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.len() as f64)
    }

    pub(crate) fn check_shape(&self, dim: usize, n: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.dim,
            });
        }
        if self.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_rows_csv(writer, self.values())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let (dim, values) = read_rows_csv(reader, origin, None)?;
        Self::new(dim, values)
    }
}

/// Euclidean distance. Every distance in the crate goes through this function so
/// that independently built graphs agree bit for bit.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub(crate) fn write_rows_csv<'a, W: Write>(
    writer: W,
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in rows {
        w.write_record(row.iter().map(|&c| fmt_f64(c)))?;
    }
    w.flush()?;
    Ok(())
}

/// Parses headerless numeric CSV rows. With `skip_last` set, the trailing column
/// of every row is returned separately as a raw string (used for label columns).
pub(crate) fn read_rows_csv<R: Read>(
    reader: R,
    origin: &Path,
    skip_last: Option<&mut Vec<String>>,
) -> Result<(usize, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut dim = None;
    let mut coords = Vec::new();
    let mut extra = skip_last;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fields: Vec<&str> = record.iter().collect();
        if let Some(extra) = extra.as_deref_mut() {
            let last = fields
                .pop()
                .ok_or_else(|| parse_err(line, "missing label column".into()))?;
            extra.push(last.to_string());
        }
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(parse_err(
                    line,
                    format!("expected {d} coordinates, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(line, format!("cannot parse `{f}` as a number")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite coordinate `{f}`")));
            }
            coords.push(v);
        }
    }
    match dim {
        Some(d) if d > 0 => Ok((d, coords)),
        _ => Err(parse_err(0, "no coordinates found".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(PointCloud::new(0, vec![1.0]).is_err());
        assert!(PointCloud::new(2, vec![]).is_err());
        assert!(PointCloud::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(PointCloud::new(1, vec![f64::NAN]).is_err());
        assert!(PointCloud::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let cloud = PointCloud::from_rows(&[
            [0.1, -3.0e-300],
            [std::f64::consts::PI, 1.0 / 3.0],
            [f64::MAX, f64::MIN_POSITIVE],
        ])
        .unwrap();
        let back = PointCloud::from_json_str(&cloud.to_json_string()).unwrap();
        for (a, b) in cloud.as_flat().iter().zip(back.as_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_dim_must_match_rows() {
        let err = PointCloud::from_json_str(r#"{"dim":3,"points":[[1,2]]}"#).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn csv_round_trip_and_line_numbers() {
        let cloud = PointCloud::from_rows(&[[0.1, 0.2], [1.0 / 7.0, -2.5]]).unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let back = PointCloud::read_csv(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(cloud, back);

        let bad = "1,2\n3,4\n5,x\n";
        match PointCloud::read_csv(bad.as_bytes(), Path::new("bad.csv")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mean_of_points() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [2.0, 4.0]]).unwrap();
        assert_eq!(cloud.mean(), vec![1.0, 2.0]);
    }
}
