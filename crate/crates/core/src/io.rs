//! File formats.
//!
//! A cube is stored as a pair of files sharing a base path: `<base>.json`
//! holds the header and `<base>.raw` the payload of little-endian binary32
//! values, band-interleaved-by-pixel (all bands of pixel 0, then pixel 1, in
//! row-major pixel order). Endmember fields use the same pairing with their
//! own header. Matrices that users edit by hand (endmembers, scaling
//! factors, label maps) are plain CSV without a header row.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EndmemberField, HsiCube};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub dtype: String,
    pub interleave: String,
    pub byte_order: String,
}

impl CubeHeader {
    fn new(rows: usize, cols: usize, bands: usize) -> Self {
        Self {
            rows,
            cols,
            bands,
            dtype: "f32".into(),
            interleave: "bip".into(),
            byte_order: "le".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub endmembers: usize,
    pub dtype: String,
    /// Pixel-major; within a pixel, endmember-major; within an endmember, bands.
    pub layout: String,
    pub byte_order: String,
}

/// Returns `(<base>.json, <base>.raw)`; a trailing `.json`/`.raw` on `path`
/// is ignored so either member of the pair can be named.
pub fn pair_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("raw") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut header = base.clone().into_os_string();
    header.push(".json");
    let mut payload = base.into_os_string();
    payload.push(".raw");
    (header.into(), payload.into())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("json encode: {e}")))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn decode_f32(bytes: &[u8]) -> Result<Vec<f64>> {
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("payload contains non-finite values".into()));
    }
    Ok(values)
}

fn encode_f32<'a>(values: impl Iterator<Item = &'a f64>) -> Vec<u8> {
    values.flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

fn check_header_tags(dtype: &str, byte_order: &str) -> Result<()> {
    if dtype != "f32" {
        return Err(Error::Format(format!("unsupported dtype {dtype:?}")));
    }
    if byte_order != "le" {
        return Err(Error::Format(format!("unsupported byte order {byte_order:?}")));
    }
    Ok(())
}

pub fn read_cube(path: &Path) -> Result<HsiCube> {
    let (hpath, ppath) = pair_paths(path);
    let header: CubeHeader = read_json(&hpath)?;
    check_header_tags(&header.dtype, &header.byte_order)?;
    if header.interleave != "bip" {
        return Err(Error::Format(format!(
            "unsupported interleave {:?}",
            header.interleave
        )));
    }
    if header.rows == 0 || header.cols == 0 || header.bands == 0 {
        return Err(Error::InvalidInput("empty cube rejected".into()));
    }
    let bytes = read_bytes(&ppath)?;
    let expected = header.rows * header.cols * header.bands * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "payload size mismatch: header implies {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values = decode_f32(&bytes)?;
    let data = DMatrix::from_vec(header.bands, header.rows * header.cols, values);
    HsiCube::new(data, header.rows, header.cols)
}

pub fn write_cube(cube: &HsiCube, path: &Path) -> Result<()> {
    let (hpath, ppath) = pair_paths(path);
    let header = CubeHeader::new(cube.rows(), cube.cols(), cube.bands());
    let text = serde_json::to_string(&header)
        .map_err(|e| Error::Format(format!("json encode: {e}")))?;
    write_bytes(&hpath, text.as_bytes())?;
    // column-major storage is already band-interleaved-by-pixel
    write_bytes(&ppath, &encode_f32(cube.data().iter()))
}

pub fn read_field(path: &Path) -> Result<(EndmemberField, usize, usize)> {
    let (hpath, ppath) = pair_paths(path);
    let header: FieldHeader = read_json(&hpath)?;
    check_header_tags(&header.dtype, &header.byte_order)?;
    let (l, p, n) = (header.bands, header.endmembers, header.rows * header.cols);
    if l == 0 || p == 0 || n == 0 {
        return Err(Error::InvalidInput("empty endmember field rejected".into()));
    }
    let bytes = read_bytes(&ppath)?;
    if bytes.len() != l * p * n * 4 {
        return Err(Error::Format(format!(
            "payload size mismatch: header implies {} bytes, found {}",
            l * p * n * 4,
            bytes.len()
        )));
    }
    let values = decode_f32(&bytes)?;
    let mats = values
        .chunks_exact(l * p)
        .map(|c| DMatrix::from_column_slice(l, p, c))
        .collect();
    Ok((EndmemberField::new(mats)?, header.rows, header.cols))
}

pub fn write_field(field: &EndmemberField, rows: usize, cols: usize, path: &Path) -> Result<()> {
    if rows * cols != field.pixels() {
        return Err(Error::Shape("field pixel count differs from rows*cols".into()));
    }
    let (hpath, ppath) = pair_paths(path);
    let header = FieldHeader {
        rows,
        cols,
        bands: field.bands(),
        endmembers: field.endmembers(),
        dtype: "f32".into(),
        layout: "pixel,endmember,band".into(),
        byte_order: "le".into(),
    };
    let text = serde_json::to_string(&header)
        .map_err(|e| Error::Format(format!("json encode: {e}")))?;
    write_bytes(&hpath, text.as_bytes())?;
    write_bytes(&ppath, &encode_f32(field.mats().iter().flat_map(|m| m.iter())))
}

/// Parses a headerless numeric CSV into a matrix with one row per line.
pub fn parse_csv_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|e| {
                    Error::Format(format!("csv line {}: {e} in {f:?}", i + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Format(format!(
                    "csv line {} has {} fields, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Format("csv is empty".into()));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

pub fn format_csv_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
    parse_csv_matrix(&text)
}

pub fn write_csv_matrix(m: &DMatrix<f64>, path: &Path) -> Result<()> {
    write_bytes(path, format_csv_matrix(m).as_bytes())
}

/// Writes a label map as `rows` lines of `cols` comma-separated integers.
pub fn write_labels_csv(labels: &[usize], rows: usize, cols: usize, path: &Path) -> Result<()> {
    if labels.len() != rows * cols {
        return Err(Error::Shape("label count differs from rows*cols".into()));
    }
    let mut out = String::new();
    for r in 0..rows {
        let line: Vec<String> = labels[r * cols..(r + 1) * cols]
            .iter()
            .map(usize::to_string)
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

pub fn read_labels_csv(path: &Path) -> Result<(Vec<usize>, usize, usize)> {
    let m = read_csv_matrix(path)?;
    let mut labels = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Format(format!("label {v} is not a nonnegative integer")));
            }
            labels.push(v as usize);
        }
    }
    Ok((labels, m.nrows(), m.ncols()))
}

/// Binary (P5) PGM of a `[0, 1]` map; values are clamped then scaled to 255.
pub fn encode_pgm(values: &[f64], rows: usize, cols: usize) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(
        values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write_pgm(values: &[f64], rows: usize, cols: usize, path: &Path) -> Result<()> {
    if values.len() != rows * cols {
        return Err(Error::Shape("pgm value count differs from rows*cols".into()));
    }
    write_bytes(path, &encode_pgm(values, rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smallest_cube_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        fs::write(
            base.with_extension("json"),
            r#"{"rows":1,"cols":1,"bands":2,"dtype":"f32","interleave":"bip","byte_order":"le"}"#,
        )
        .unwrap();
        let mut payload = 0.5f32.to_le_bytes().to_vec();
        payload.extend(0.25f32.to_le_bytes());
        fs::write(base.with_extension("raw"), payload).unwrap();
        let cube = read_cube(&base).unwrap();
        assert_eq!(cube.pixel(0).as_slice(), &[0.5, 0.25]);
    }

    #[test]
    fn one_pixel_payload_is_eight_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        let cube = HsiCube::new(DMatrix::from_vec(2, 1, vec![0.5, 0.25]), 1, 1).unwrap();
        write_cube(&cube, &base).unwrap();
        assert_eq!(fs::read(base.with_extension("raw")).unwrap().len(), 8);
        let header = fs::read_to_string(base.with_extension("json")).unwrap();
        assert_eq!(
            header,
            r#"{"rows":1,"cols":1,"bands":2,"dtype":"f32","interleave":"bip","byte_order":"le"}"#
        );
    }

    #[test]
    fn size_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        fs::write(
            base.with_extension("json"),
            r#"{"rows":2,"cols":1,"bands":2,"dtype":"f32","interleave":"bip","byte_order":"le"}"#,
        )
        .unwrap();
        fs::write(base.with_extension("raw"), [0u8; 12]).unwrap();
        let err = read_cube(&base).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_cube(Path::new("/nonexistent/cube")).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn non_finite_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("c");
        fs::write(
            base.with_extension("json"),
            r#"{"rows":1,"cols":1,"bands":1,"dtype":"f32","interleave":"bip","byte_order":"le"}"#,
        )
        .unwrap();
        fs::write(base.with_extension("raw"), f32::NAN.to_le_bytes()).unwrap();
        assert!(read_cube(&base).is_err());
    }

    #[test]
    fn random_cube_round_trips_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..4 * 4 * 8).map(|_| rng.random::<f32>() as f64).collect();
        let cube = HsiCube::new(DMatrix::from_vec(8, 16, values), 4, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_cube(&cube, &a).unwrap();
        let back = read_cube(&a).unwrap();
        assert_eq!(back, cube);
        write_cube(&back, &b).unwrap();
        assert_eq!(
            fs::read(a.with_extension("raw")).unwrap(),
            fs::read(b.with_extension("raw")).unwrap()
        );
    }

    #[test]
    fn field_round_trips() {
        let mats = (0..6)
            .map(|n| DMatrix::from_fn(3, 2, |i, j| (n * 6 + i * 2 + j) as f64 * 0.25))
            .collect();
        let field = EndmemberField::new(mats).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field");
        write_field(&field, 2, 3, &path).unwrap();
        let (back, rows, cols) = read_field(&path).unwrap();
        assert_eq!((rows, cols), (2, 3));
        assert_eq!(back, field);
    }

    #[test]
    fn csv_matrix_layout() {
        let m = parse_csv_matrix("0.1,0.2\n0.3,0.4\n0.5,0.6\n").unwrap();
        assert_eq!(m.shape(), (3, 2));
        assert_eq!(m[(2, 1)], 0.6);
        assert_eq!(parse_csv_matrix(&format_csv_matrix(&m)).unwrap(), m);
        assert!(parse_csv_matrix("1,2\n3\n").is_err());
    }

    #[test]
    fn pgm_maps_unit_interval() {
        let bytes = encode_pgm(&[0.0, 1.0, 0.5, 2.0, -1.0, 0.25], 2, 3);
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0, 255, 128, 255, 0, 64]);
    }
}
