//! Matrix file formats and content digests.
//!
//! Delimited: comma separated, header `model_id,<text ids...>`, one row per model.
//! Values are written with 17 significant digits so they parse back bit-exactly.
//!
//! Binary: `b"MMAP1"`, version byte `1`, `K` and `N` as little-endian `u64`, then
//! `K * N` little-endian `f64` values in row-major order. Identifiers are not
//! stored and come back as `m0.., t0..`.

use std::io::{BufRead, Read, Write};

use ndarray::{Array2, ArrayView2};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::matrix::LikelihoodMatrix;

pub const BINARY_MAGIC: &[u8; 5] = b"MMAP1";
pub const BINARY_VERSION: u8 = 1;
const HEADER_LEN: usize = 5 + 1 + 8 + 8;

/// Renders a float with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Splits a delimited line on commas. Identifiers must not contain commas.
pub fn split_line(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

pub fn parse_f64(cell: &str, row: usize, col: usize) -> Result<f64> {
    cell.parse::<f64>().map_err(|e| Error::Parse {
        row,
        col,
        msg: format!("{cell:?}: {e}"),
    })
}

/// Reads a labelled matrix. Lines starting with `#` are metadata and skipped.
pub fn read_labelled<R: BufRead>(reader: R) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let mut header: Option<Vec<String>> = None;
    let mut row_ids = Vec::new();
    let mut data = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let row = lineno + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells = split_line(&line);
        match &header {
            None => header = Some(cells[1..].iter().map(|s| s.to_string()).collect()),
            Some(h) => {
                if cells.len() != h.len() + 1 {
                    return Err(Error::Parse {
                        row,
                        col: cells.len(),
                        msg: format!("expected {} cells, found {}", h.len() + 1, cells.len()),
                    });
                }
                row_ids.push(cells[0].to_string());
                for (col, cell) in cells[1..].iter().enumerate() {
                    data.push(parse_f64(cell, row, col + 2)?);
                }
            }
        }
    }
    let col_ids = header.ok_or_else(|| Error::Parse {
        row: 0,
        col: 0,
        msg: "missing header".into(),
    })?;
    let values = Array2::from_shape_vec((row_ids.len(), col_ids.len()), data)
        .map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok((row_ids, col_ids, values))
}

pub fn write_labelled<W: Write>(
    mut w: W,
    corner: &str,
    row_ids: &[String],
    col_ids: &[String],
    values: ArrayView2<'_, f64>,
) -> Result<()> {
    write!(w, "{corner}")?;
    for id in col_ids {
        write!(w, ",{id}")?;
    }
    writeln!(w)?;
    for (id, row) in row_ids.iter().zip(values.outer_iter()) {
        write!(w, "{id}")?;
        for v in row {
            write!(w, ",{}", format_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_delimited<R: BufRead>(reader: R) -> Result<LikelihoodMatrix> {
    let (models, texts, values) = read_labelled(reader)?;
    LikelihoodMatrix::new(values, models, texts)
}

pub fn write_delimited<W: Write>(w: W, l: &LikelihoodMatrix) -> Result<()> {
    write_labelled(w, "model_id", l.model_ids(), l.text_ids(), l.values())
}

pub fn write_binary<W: Write>(mut w: W, values: ArrayView2<'_, f64>) -> Result<()> {
    let (k, n) = values.dim();
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&[BINARY_VERSION])?;
    w.write_all(&(k as u64).to_le_bytes())?;
    w.write_all(&(n as u64).to_le_bytes())?;
    for v in values.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary_values<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 6 || &bytes[..5] != BINARY_MAGIC {
        return Err(Error::UnsupportedFormat("missing MMAP1 magic".into()));
    }
    if bytes[5] != BINARY_VERSION {
        return Err(Error::UnsupportedFormat(format!("version {}", bytes[5])));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptFile("truncated header".into()));
    }
    let k = u64::from_le_bytes(bytes[6..14].try_into().unwrap());
    let n = u64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let expected = k
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| Error::CorruptFile(format!("dimensions {k}x{n} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::CorruptFile(format!(
            "payload has {} bytes, dimensions {k}x{n} need {expected}",
            payload.len()
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((k as usize, n as usize), data).map_err(|e| Error::CorruptFile(e.to_string()))
}

pub fn read_binary<R: Read>(r: R) -> Result<LikelihoodMatrix> {
    LikelihoodMatrix::from_array(read_binary_values(r)?)
}

/// Hex SHA-256 over shape, identifiers and little-endian values.
pub fn digest_matrix(values: ArrayView2<'_, f64>, row_ids: &[String], col_ids: &[String]) -> String {
    let mut h = Sha256::new();
    let (k, n) = values.dim();
    h.update((k as u64).to_le_bytes());
    h.update((n as u64).to_le_bytes());
    for id in row_ids.iter().chain(col_ids) {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id.as_bytes());
    }
    for v in values.iter() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn truncated_payload_is_corrupt() {
        let mut buf = Vec::new();
        write_binary(&mut buf, array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        buf.pop();
        assert!(matches!(read_binary(&buf[..]), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn bad_magic_and_version_are_unsupported() {
        assert!(matches!(read_binary(&b"NOPE!\x01"[..]), Err(Error::UnsupportedFormat(_))));
        let mut buf = Vec::new();
        write_binary(&mut buf, array![[1.0, 2.0], [3.0, 4.0]].view()).unwrap();
        buf[5] = 2;
        assert!(matches!(read_binary(&buf[..]), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn overflowing_dimensions_are_corrupt() {
        let mut buf = BINARY_MAGIC.to_vec();
        buf.push(1);
        buf.extend(u64::MAX.to_le_bytes());
        buf.extend(3u64.to_le_bytes());
        assert!(matches!(read_binary(&buf[..]), Err(Error::CorruptFile(_))));
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let text = "model_id,a,b\nm0,1.0,2.0\nm1,3.0,oops\n";
        match read_delimited(text.as_bytes()) {
            Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comment_lines_are_skipped() {
        let text = "# version: 1\nmodel_id,a,b\nm0,1.0,2.0\nm1,3.0,4.0\n";
        let l = read_delimited(text.as_bytes()).unwrap();
        assert_eq!(l.text_ids(), ["a", "b"]);
        assert_eq!(l.values()[[1, 1]], 4.0);
    }

    proptest! {
        #[test]
        fn formats_round_trip_bit_exactly(
            k in 2usize..6, n in 2usize..8,
            data in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 60)
        ) {
            let values = Array2::from_shape_fn((k, n), |(i, j)| data[i * n + j]);
            let l = LikelihoodMatrix::from_array(values.clone()).unwrap();
            let mut text = Vec::new();
            write_delimited(&mut text, &l).unwrap();
            let back = read_delimited(&text[..]).unwrap();
            let mut bin = Vec::new();
            write_binary(&mut bin, l.values()).unwrap();
            let back_bin = read_binary(&bin[..]).unwrap();
            for ((a, b), c) in values.iter().zip(back.values().iter()).zip(back_bin.values().iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
                prop_assert_eq!(a.to_bits(), c.to_bits());
            }
        }
    }
}
