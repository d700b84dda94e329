//! Dataset ingestion and synthesis: IDX (MNIST) files, headered CSV, and
//! seeded isotropic Gaussian samples.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Identifier of the Gaussian sampling algorithm.
///
/// `Pcg64` (PCG XSL-RR 128/64) seeded with `seed_from_u64(seed)`; uniforms are
/// 53-bit `f64` draws in `[0, 1)`. Each pair `(a, b)` gives `u₁ = 1 − a`,
/// `u₂ = b` and the two normals `√(−2 ln u₁)·cos 2πu₂`, `√(−2 ln u₁)·sin 2πu₂`,
/// emitted in that order. Samples fill the matrix row by row and are then
/// multiplied by `√variance`.
pub const GAUSSIAN_ALGORITHM: &str = "pcg64-boxmuller-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Idx,
    Csv,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Samples × features.
    pub inputs: DMatrix<f64>,
    pub labels: Option<Vec<u32>>,
    pub source: Source,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, labels: Option<Vec<u32>>, source: Source) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidInput("dataset has no samples".into()));
        }
        if let Some((i, j)) = first_non_finite(&inputs) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at sample {i}, feature {j}"
            )));
        }
        if let Some(l) = &labels {
            if l.len() != inputs.nrows() {
                return Err(Error::DimensionMismatch {
                    context: "dataset labels",
                    expected: inputs.nrows().to_string(),
                    found: l.len().to_string(),
                });
            }
        }
        Ok(Self {
            inputs,
            labels,
            source,
            seed: None,
        })
    }

    pub fn samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn features(&self) -> usize {
        self.inputs.ncols()
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let inputs = DMatrix::from_fn(idx.len(), self.features(), |i, j| self.inputs[(idx[i], j)]);
        Dataset {
            inputs,
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            source: self.source,
            seed: self.seed,
        }
    }

    /// Contiguous rows `start..start + len`.
    pub fn range(&self, start: usize, len: usize) -> Dataset {
        let idx: Vec<usize> = (start..start + len).collect();
        self.subset(&idx)
    }

    /// Number of classes implied by the largest label.
    pub fn classes(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |&m| m as usize + 1)
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, file: &str) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(b) => Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
        None => Err(Error::IdxTruncated {
            file: file.to_string(),
            offset: bytes.len(),
            needed: offset + 4 - bytes.len(),
        }),
    }
}

/// Parses an IDX header and returns `(dimension sizes, payload offset)`.
fn idx_header(bytes: &[u8], expected_magic: u32, file: &str) -> Result<(Vec<usize>, usize)> {
    let magic = be_u32(bytes, 0, file)?;
    if magic != expected_magic {
        return Err(Error::IdxBadMagic {
            file: file.to_string(),
            expected: expected_magic,
            found: magic,
        });
    }
    let ndims = (magic & 0xff) as usize;
    let dims = (0..ndims)
        .map(|i| be_u32(bytes, 4 + 4 * i, file).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let offset = 4 + 4 * ndims;
    let declared: usize = dims.iter().product();
    let actual = bytes.len() - offset;
    if actual < declared {
        return Err(Error::IdxTruncated {
            file: file.to_string(),
            offset: bytes.len(),
            needed: declared - actual,
        });
    }
    if actual > declared {
        return Err(Error::IdxSizeMismatch {
            file: file.to_string(),
            offset,
            declared,
            actual,
        });
    }
    Ok((dims, offset))
}

/// Decodes an IDX image file; pixels are scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], file: &str) -> Result<DMatrix<f64>> {
    let (dims, offset) = idx_header(bytes, IDX_IMAGES_MAGIC, file)?;
    let (count, pixels) = (dims[0], dims[1] * dims[2]);
    let payload = &bytes[offset..];
    Ok(DMatrix::from_fn(count, pixels, |i, j| {
        payload[i * pixels + j] as f64 / 255.0
    }))
}

pub fn parse_idx_labels(bytes: &[u8], file: &str) -> Result<Vec<u32>> {
    let (_, offset) = idx_header(bytes, IDX_LABELS_MAGIC, file)?;
    Ok(bytes[offset..].iter().map(|&b| b as u32).collect())
}

/// Loads an IDX image/label pair; gzip-compressed files are detected and inflated.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = parse_idx_images(&read_maybe_gz(images_path)?, &images_path.display().to_string())?;
    let labels = parse_idx_labels(&read_maybe_gz(labels_path)?, &labels_path.display().to_string())?;
    if images.nrows() != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: images.nrows(),
            labels: labels.len(),
        });
    }
    Dataset::new(images, Some(labels), Source::Idx)
}

/// Serialises images and labels back into IDX bytes (pixels rounded from `[0, 1]`).
pub fn encode_idx(images: &DMatrix<f64>, rows: usize, cols: usize, labels: &[u32]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::with_capacity(16 + images.len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for v in [images.nrows(), rows, cols] {
        img.extend_from_slice(&(v as u32).to_be_bytes());
    }
    for i in 0..images.nrows() {
        for j in 0..images.ncols() {
            img.push((images[(i, j)] * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend(labels.iter().map(|&l| l as u8));
    (img, lab)
}

/// Box–Muller normal stream over a seeded `Pcg64`, as described by
/// [`GAUSSIAN_ALGORITHM`].
#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: Pcg64,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Pcg64::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2: f64 = self.rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Uniform draw in `[lo, hi)` from the underlying generator.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn rng_mut(&mut self) -> &mut Pcg64 {
        &mut self.rng
    }
}

/// `n` standard normal draws from the documented [`GAUSSIAN_ALGORITHM`].
pub fn standard_normals(n: usize, seed: u64) -> Vec<f64> {
    let mut g = GaussianStream::new(seed);
    (0..n).map(|_| g.next_normal()).collect()
}

/// Record that regenerates a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub n: usize,
    pub d: usize,
    pub variance: f64,
    pub seed: u64,
    pub algorithm: String,
}

impl SyntheticManifest {
    pub fn regenerate(&self) -> Result<Dataset> {
        if self.algorithm != GAUSSIAN_ALGORITHM {
            return Err(Error::InvalidParameter(format!(
                "unknown sampling algorithm '{}'",
                self.algorithm
            )));
        }
        sample_gaussian(self.n, self.d, self.variance, self.seed)
    }
}

/// `n` i.i.d. samples of `N(0, variance · I_d)`.
pub fn sample_gaussian(n: usize, d: usize, variance: f64, seed: u64) -> Result<Dataset> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive, got {variance}"
        )));
    }
    if n < 2 || d < 1 {
        return Err(Error::InvalidParameter(format!(
            "need n ≥ 2 and d ≥ 1, got n = {n}, d = {d}"
        )));
    }
    let z = standard_normals(n * d, seed);
    let s = variance.sqrt();
    let inputs = DMatrix::from_row_iterator(n, d, z.into_iter().map(|v| v * s));
    let mut ds = Dataset::new(inputs, None, Source::Synthetic)?;
    ds.seed = Some(seed);
    Ok(ds)
}

pub fn manifest_for(n: usize, d: usize, variance: f64, seed: u64) -> SyntheticManifest {
    SyntheticManifest {
        n,
        d,
        variance,
        seed,
        algorithm: GAUSSIAN_ALGORITHM.to_string(),
    }
}

/// Reads a headered CSV (one row per sample). With `has_labels`, the column
/// named `label` holds integer class ids and is removed from the inputs.
pub fn load_csv(path: &Path, has_labels: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), has_labels)
}

pub fn read_csv<R: Read>(reader: R, has_labels: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Csv {
            row: 0,
            column: 0,
            message: e.to_string(),
        })?
        .clone();
    let width = header.len();
    let label_col = if has_labels {
        Some(header.iter().position(|h| h == "label").ok_or(Error::Csv {
            row: 0,
            column: 0,
            message: "no 'label' column in header".into(),
        })?)
    } else {
        None
    };
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let row = rows + 1;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(Error::Csv {
                    row,
                    column: 0,
                    message: e.to_string(),
                })
            }
        }
        if record.len() != width {
            return Err(Error::Csv {
                row,
                column: record.len().min(width),
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_col {
                let l = cell.parse::<u32>().map_err(|_| Error::Csv {
                    row,
                    column: j,
                    message: format!("label '{cell}' is not a non-negative integer"),
                })?;
                labels.push(l);
            } else {
                let v = cell.parse::<f64>().map_err(|_| Error::Csv {
                    row,
                    column: j,
                    message: format!("'{cell}' is not a number"),
                })?;
                values.push(v);
            }
        }
        rows += 1;
    }
    let cols = width - usize::from(label_col.is_some());
    let inputs = DMatrix::from_row_slice(rows, cols, &values);
    Dataset::new(inputs, label_col.map(|_| labels), Source::Csv)
}

/// Writes a headered CSV (`x0, x1, …` plus `label` when given) with 17
/// significant digits, so every `f64` reads back bit-exactly.
pub fn save_csv(m: &DMatrix<f64>, labels: Option<&[u32]>, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(file), m, labels).map_err(|e| Error::io(path, e))
}

pub fn write_csv<W: Write>(mut w: W, m: &DMatrix<f64>, labels: Option<&[u32]>) -> std::io::Result<()> {
    let mut header: Vec<String> = (0..m.ncols()).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let mut cells: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        if let Some(l) = labels {
            cells.push(l[i].to_string());
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Vec<u8>, Vec<u8>) {
        let mut img = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        img.extend_from_slice(&[0, 255, 51, 102, 255, 0, 0, 204]);
        let lab = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        (img, lab)
    }

    #[test]
    fn idx_fixture_decodes_exactly() {
        let (img, lab) = fixture();
        let m = parse_idx_images(&img, "img").unwrap();
        assert_eq!(
            m,
            DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 0.8])
        );
        assert_eq!(parse_idx_labels(&lab, "lab").unwrap(), vec![7, 3]);
    }

    #[test]
    fn idx_errors_carry_offsets() {
        let (mut img, _) = fixture();
        img[3] = 2;
        match parse_idx_images(&img, "img") {
            Err(Error::IdxBadMagic { found, .. }) => assert_eq!(found, 0x802),
            other => panic!("{other:?}"),
        }
        let (img, _) = fixture();
        match parse_idx_images(&img[..20], "img") {
            Err(Error::IdxTruncated { offset, needed, .. }) => assert_eq!((offset, needed), (20, 4)),
            other => panic!("{other:?}"),
        }
        let mut long = img.clone();
        long.push(9);
        match parse_idx_images(&long, "img") {
            Err(Error::IdxSizeMismatch { offset, declared, actual, .. }) => {
                assert_eq!((offset, declared, actual), (16, 8, 9))
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_idx_images(&img[..2], "img"), Err(Error::IdxTruncated { .. })));
    }

    #[test]
    fn encode_roundtrip() {
        let (img, lab) = fixture();
        let m = parse_idx_images(&img, "img").unwrap();
        let (img2, lab2) = encode_idx(&m, 2, 2, &[7, 3]);
        assert_eq!((img2, lab2), (img, lab));
    }

    #[test]
    fn gaussian_sampler_moments_and_determinism() {
        let ds = sample_gaussian(5000, 5, 1.0, 42).unwrap();
        let cov = crate::linalg::covariance(&ds.inputs);
        for i in 0..5 {
            assert!((cov[(i, i)] - 1.0).abs() < 0.05);
            for j in 0..i {
                assert!((cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()).abs() < 0.05);
            }
        }
        let again = sample_gaussian(5000, 5, 1.0, 42).unwrap();
        assert_eq!(ds.inputs, again.inputs);
        let small = sample_gaussian(5000, 5, 0.3, 1).unwrap();
        let c = crate::linalg::covariance(&small.inputs);
        assert!((0..5).all(|i| (c[(i, i)] / 0.3 - 1.0).abs() < 0.05));
        assert!(sample_gaussian(10, 2, 0.0, 1).is_err());
    }

    #[test]
    fn manifest_regenerates() {
        let m = manifest_for(20, 3, 0.7, 9);
        let json = serde_json::to_string(&m).unwrap();
        let back: SyntheticManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.regenerate().unwrap().inputs, sample_gaussian(20, 3, 0.7, 9).unwrap().inputs);
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let m = DMatrix::from_row_slice(3, 2, &[0.1, -2.5e-17, 1.0 / 3.0, 7.0, f64::MAX, -0.0]);
        let mut buf = Vec::new();
        write_csv(&mut buf, &m, Some(&[1, 0, 2])).unwrap();
        let ds = read_csv(&buf[..], true).unwrap();
        assert_eq!(ds.inputs, m);
        assert_eq!(ds.labels, Some(vec![1, 0, 2]));

        let ragged = "a,b\n1,2\n3\n";
        match read_csv(ragged.as_bytes(), false) {
            Err(Error::Csv { row, .. }) => assert_eq!(row, 2),
            other => panic!("{other:?}"),
        }
        match read_csv("a,b\n1,x\n".as_bytes(), false) {
            Err(Error::Csv { row, column, .. }) => assert_eq!((row, column), (1, 1)),
            other => panic!("{other:?}"),
        }
        assert!(read_csv("a,b\n1,2\n".as_bytes(), true).is_err());
    }
}
