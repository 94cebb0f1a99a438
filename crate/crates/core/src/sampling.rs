//! Empirical distributions, sphere directions, Gaussian noise and dataset
//! ingestion.

use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

/// `n` points in `R^d` with implicit uniform weights.
///
/// `noise_key` names the noise stream used when the set is smoothed; two
/// sets with the same key receive identical noise along a direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    n: usize,
    d: usize,
    points: Vec<f64>,
    noise_key: u64,
}

impl SampleSet {
    /// Build from row-major data of length `n * d`.
    pub fn from_flat(n: usize, d: usize, points: Vec<f64>, noise_key: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if d == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if points.len() != n * d {
            return Err(invalid(format!(
                "expected {} values for {n}x{d} points, got {}",
                n * d,
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            n,
            d,
            points,
            noise_key,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], noise_key: u64) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(invalid(format!(
                "row {bad} has {} columns, expected {d}",
                rows[bad].len()
            )));
        }
        Self::from_flat(rows.len(), d, rows.concat(), noise_key)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn noise_key(&self) -> u64 {
        self.noise_key
    }

    pub fn with_noise_key(mut self, key: u64) -> Self {
        self.noise_key = key;
        self
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, indices: &[usize], noise_key: u64) -> Result<Self> {
        let mut pts = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(invalid(format!("row index {i} out of range {}", self.n)));
            }
            pts.extend_from_slice(self.row(i));
        }
        Self::from_flat(indices.len(), self.d, pts, noise_key)
    }
}

/// A unit vector in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("direction must have finite non-zero norm"));
        }
        Ok(Self(v.into_iter().map(|x| x / norm).collect()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Direction `index` of the family named by `stream`: a normalized vector
/// of `d` standard normals drawn from `stream.child(index)`.
pub fn sphere_direction(stream: &RngStream, d: usize, index: usize) -> Result<Direction> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    let mut g = stream.child(index as u64).generator();
    loop {
        let v: Vec<f64> = (0..d).map(|_| g.standard_normal()).collect();
        let norm2: f64 = v.iter().map(|x| x * x).sum();
        // probability-zero event; redraw
        if norm2 > 0.0 {
            return Direction::new(v);
        }
    }
}

/// `count` directions uniform on `S^{d-1}`. Direction `l` depends only on
/// `(stream, l)`, so the first `L` directions of a larger family coincide
/// with a family of size `L`.
pub fn sample_sphere(stream: &RngStream, d: usize, count: usize) -> Result<Vec<Direction>> {
    if count == 0 {
        return Err(invalid("projection count must be at least 1"));
    }
    (0..count).map(|l| sphere_direction(stream, d, l)).collect()
}

/// `count` iid draws from `N(0, sigma^2)`.
pub fn gaussian_noise(stream: &RngStream, count: usize, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![0.0; count]);
    }
    let mut z = stream.standard_normals(count);
    for v in &mut z {
        *v *= sigma;
    }
    Ok(z)
}

/// `n` iid samples from the diagonal Gaussian `N(mean, diag(scale^2))`.
pub fn gen_gaussian(
    stream: &RngStream,
    n: usize,
    mean: &[f64],
    scale: &[f64],
    noise_key: u64,
) -> Result<SampleSet> {
    let d = mean.len();
    if d != scale.len() {
        return Err(Error::DimensionMismatch {
            left: d,
            right: scale.len(),
        });
    }
    if let Some(s) = scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(invalid(format!("scale entries must be positive, got {s}")));
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut g = stream.generator();
    let mut pts = Vec::with_capacity(n * d);
    for _ in 0..n {
        for k in 0..d {
            pts.push(mean[k] + scale[k] * g.standard_normal());
        }
    }
    SampleSet::from_flat(n, d, pts, noise_key)
}

/// Isotropic convenience wrapper: mean `shift * 1_d`, scale `std * 1_d`.
pub fn gen_isotropic(
    stream: &RngStream,
    n: usize,
    d: usize,
    shift: f64,
    std: f64,
    noise_key: u64,
) -> Result<SampleSet> {
    gen_gaussian(stream, n, &vec![shift; d], &vec![std; d], noise_key)
}

/// `k` distinct row indices out of `n` (partial Fisher-Yates).
pub fn choose_rows(stream: &RngStream, n: usize, k: usize) -> Result<Vec<usize>> {
    if k > n {
        return Err(invalid(format!(
            "cannot draw {k} rows from a dataset of {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut g = stream.generator();
    for i in 0..k {
        let j = i + g.below((n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    Ok(idx)
}

/// Reads a comma-separated file of decimal numbers. A first row containing
/// any non-numeric cell is taken as a header and skipped. Row and column
/// positions in errors are 1-based and count the header.
pub fn load_csv(path: impl AsRef<Path>, noise_key: u64) -> Result<SampleSet> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |row: usize, column: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };

    let mut d = None;
    let mut pts = Vec::new();
    let mut n = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_err(row, 0, e.to_string()))?;
        let parsed: Vec<std::result::Result<f64, _>> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        if r == 0 && parsed.iter().any(|p| p.is_err()) {
            // header
            d = Some(record.len());
            continue;
        }
        let width = *d.get_or_insert(record.len());
        if record.len() != width {
            return Err(csv_err(
                row,
                record.len().min(width) + 1,
                format!("ragged row: {} columns, expected {width}", record.len()),
            ));
        }
        for (c, (cell, value)) in record.iter().zip(parsed).enumerate() {
            match value {
                Ok(v) if v.is_finite() => pts.push(v),
                Ok(_) => return Err(csv_err(row, c + 1, format!("non-finite value {cell:?}"))),
                Err(_) => return Err(csv_err(row, c + 1, format!("non-numeric cell {cell:?}"))),
            }
        }
        n += 1;
    }
    match d {
        Some(d) if n > 0 && d > 0 => SampleSet::from_flat(n, d, pts, noise_key),
        _ => Err(Error::EmptyDataset),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn sphere_d1_is_plus_minus_one() {
        let dirs = sample_sphere(&RngStream::new(99), 1, 100).unwrap();
        assert!(dirs.iter().all(|u| u.as_slice()[0].abs() == 1.0));
        assert!(dirs.iter().any(|u| u.as_slice()[0] > 0.0));
        assert!(dirs.iter().any(|u| u.as_slice()[0] < 0.0));
    }

    #[test]
    fn sphere_unit_norm() {
        for u in sample_sphere(&RngStream::new(1), 17, 500).unwrap() {
            let norm = u.as_slice().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sphere_mean_vanishes_d3_seed7() {
        let dirs = sample_sphere(&RngStream::new(7), 3, 10_000).unwrap();
        let mut mean = [0.0; 3];
        for u in &dirs {
            for k in 0..3 {
                mean[k] += u.as_slice()[k] / dirs.len() as f64;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 0.05, "{norm}");
    }

    #[test]
    fn sphere_quadrant_fraction_d2() {
        let dirs = sample_sphere(&RngStream::new(5), 2, 100_000).unwrap();
        let q = dirs
            .iter()
            .filter(|u| {
                let a = u.as_slice()[1].atan2(u.as_slice()[0]);
                (0.0..std::f64::consts::FRAC_PI_2).contains(&a)
            })
            .count() as f64
            / dirs.len() as f64;
        assert!((q - 0.25).abs() < 0.01, "{q}");
    }

    #[test]
    fn sphere_prefix_is_stable() {
        let s = RngStream::new(4);
        let small = sample_sphere(&s, 5, 10).unwrap();
        let large = sample_sphere(&s, 5, 100).unwrap();
        assert_eq!(small[..], large[..10]);
    }

    #[test]
    fn sphere_rejects_zero_dim_and_count() {
        assert!(sample_sphere(&RngStream::new(0), 0, 3).is_err());
        assert!(sample_sphere(&RngStream::new(0), 3, 0).is_err());
    }

    #[test]
    fn noise_zero_sigma() {
        assert_eq!(
            gaussian_noise(&RngStream::new(1), 5, 0.0).unwrap(),
            vec![0.0; 5]
        );
        assert!(gaussian_noise(&RngStream::new(1), 5, -1.0).is_err());
    }

    #[test]
    fn noise_moments_sigma3() {
        let z = gaussian_noise(&RngStream::new(1), 1_000_000, 3.0).unwrap();
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((2.99..=3.01).contains(&std), "{std}");
        assert!(mean.abs() <= 0.01 * 3.0, "{mean}");
    }

    #[test]
    fn noise_scales_same_draws() {
        let s = RngStream::new(8);
        let a = gaussian_noise(&s, 10, 1.0).unwrap();
        let b = gaussian_noise(&s, 10, 2.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x * 2.5, *y);
        }
    }

    #[test]
    fn gaussian_generator_moments() {
        let mean = [2.0, -1.0, 0.0];
        let scale = [1.0, 0.5, 3.0];
        let xs = gen_gaussian(&RngStream::new(3), 200_000, &mean, &scale, 0).unwrap();
        for k in 0..3 {
            let col: Vec<f64> = xs.rows().map(|r| r[k]).collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (col.len() as f64 - 1.0);
            assert!((m - mean[k]).abs() < 0.02 * scale[k], "{k}: {m}");
            assert!((v.sqrt() / scale[k] - 1.0).abs() < 0.01, "{k}: {v}");
        }
    }

    #[test]
    fn gaussian_generator_errors() {
        let s = RngStream::new(0);
        assert!(gen_gaussian(&s, 3, &[0.0, 0.0], &[1.0], 0).is_err());
        assert!(gen_gaussian(&s, 3, &[0.0], &[0.0], 0).is_err());
        assert!(gen_gaussian(&s, 0, &[0.0], &[1.0], 0).is_err());
        let one = gen_gaussian(&s, 1, &[5.0], &[1.0], 0).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn choose_rows_distinct() {
        let mut idx = choose_rows(&RngStream::new(2), 50, 20).unwrap();
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 20);
        assert!(choose_rows(&RngStream::new(2), 5, 6).is_err());
    }

    #[test]
    fn csv_plain() {
        let f = csv_file("0,1\n2,3\n");
        let s = load_csv(f.path(), 0).unwrap();
        assert_eq!((s.len(), s.dim()), (2, 2));
        assert_eq!(s.as_flat(), &[0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_header() {
        let f = csv_file("a,b\n0,1\n");
        let s = load_csv(f.path(), 0).unwrap();
        assert_eq!((s.len(), s.dim()), (1, 2));
    }

    #[test]
    fn csv_empty() {
        let f = csv_file("");
        assert_eq!(
            load_csv(f.path(), 0).unwrap_err().to_string(),
            "empty dataset"
        );
        let f = csv_file("a,b\n");
        assert!(matches!(load_csv(f.path(), 0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn csv_ragged_and_non_numeric() {
        let f = csv_file("0,1\n2\n");
        match load_csv(f.path(), 0) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        let f = csv_file("0,1\n2,x\n");
        match load_csv(f.path(), 0) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        let f = csv_file("0,1\n2,inf\n");
        assert!(matches!(load_csv(f.path(), 0), Err(Error::Csv { .. })));
    }

    #[test]
    fn sample_set_rejects_nan() {
        assert!(SampleSet::from_flat(1, 2, vec![0.0, f64::NAN], 0).is_err());
        assert!(SampleSet::from_flat(0, 2, vec![], 0).is_err());
        assert!(SampleSet::from_flat(1, 0, vec![], 0).is_err());
    }
}
