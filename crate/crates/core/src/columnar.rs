//! Columnar text format for sets of complex matrices.
//!
//! ```text
//! # seed=42
//! k,row,col,re,im
//! 0,0,0,0.123,-0.456
//! ```
//!
//! One row per matrix entry, indices 0-based, values printed with the
//! shortest representation that parses back to the same `f64`. The optional
//! leading comment records the RNG seed.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{JcasError, Result};
use crate::linalg::{CMat, C64};

pub const HEADER: [&str; 5] = ["k", "row", "col", "re", "im"];

pub fn write_matrices<'a, W: Write>(
    mut out: W,
    seed: Option<u64>,
    matrices: impl IntoIterator<Item = (usize, &'a CMat)>,
) -> Result<()> {
    if let Some(seed) = seed {
        writeln!(out, "# seed={seed}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for (k, m) in matrices {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                w.write_record([
                    k.to_string(),
                    r.to_string(),
                    c.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrices_to_path<'a>(
    path: impl AsRef<Path>,
    seed: Option<u64>,
    matrices: impl IntoIterator<Item = (usize, &'a CMat)>,
) -> Result<()> {
    let file = std::io::BufWriter::new(File::create(path)?);
    write_matrices(file, seed, matrices)
}

/// Matrices keyed by index, plus the recorded seed if any.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub seed: Option<u64>,
    pub matrices: BTreeMap<usize, CMat>,
}

pub fn read_matrices<R: Read>(input: R, origin: &Path) -> Result<MatrixFile> {
    let fmt = |reason: String| JcasError::Format {
        path: origin.to_path_buf(),
        reason,
    };
    let mut reader = BufReader::new(input);
    let mut seed = None;
    let mut body = String::new();
    let mut line = String::new();
    while reader.read_line(&mut line)? > 0 {
        if let Some(comment) = line.trim().strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("seed=") {
                seed = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| fmt(format!("bad seed comment `{}`", line.trim())))?,
                );
            }
        } else {
            body.push_str(&line);
        }
        line.clear();
    }

    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(fmt(format!("expected header {HEADER:?}, found {headers:?}")));
    }
    let mut entries: BTreeMap<usize, Vec<(usize, usize, C64)>> = BTreeMap::new();
    for (line_no, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let idx = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| fmt(format!("row {}: bad index `{}`", line_no + 1, &rec[i])))
        };
        let val = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| fmt(format!("row {}: bad value `{}`", line_no + 1, &rec[i])))
        };
        entries
            .entry(idx(0)?)
            .or_default()
            .push((idx(1)?, idx(2)?, C64::new(val(3)?, val(4)?)));
    }

    let mut matrices = BTreeMap::new();
    for (k, list) in entries {
        let rows = list.iter().map(|e| e.0).max().unwrap_or(0) + 1;
        let cols = list.iter().map(|e| e.1).max().unwrap_or(0) + 1;
        if list.len() != rows * cols {
            return Err(fmt(format!(
                "matrix {k}: {} entries for a {rows}x{cols} shape",
                list.len()
            )));
        }
        let mut m = CMat::from_element(rows, cols, C64::new(f64::NAN, 0.0));
        for (r, c, z) in list {
            m[(r, c)] = z;
        }
        if m.iter().any(|z| z.re.is_nan()) {
            return Err(fmt(format!("matrix {k}: duplicate or missing entries")));
        }
        matrices.insert(k, m);
    }
    Ok(MatrixFile { seed, matrices })
}

pub fn read_matrices_from_path(path: impl AsRef<Path>) -> Result<MatrixFile> {
    let path = path.as_ref();
    read_matrices(File::open(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_exact(
            vals in proptest::collection::vec(-1e6f64..1e6, 12),
            seed in any::<u64>(),
        ) {
            let a = CMat::from_iterator(2, 3, vals[..6].iter().zip(&vals[6..]).map(|(&r, &i)| C64::new(r, i)));
            let b = a.adjoint();
            let mut buf = Vec::new();
            write_matrices(&mut buf, Some(seed), [(0, &a), (5, &b)]).unwrap();
            let back = read_matrices(buf.as_slice(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.seed, Some(seed));
            prop_assert_eq!(&back.matrices[&0], &a);
            prop_assert_eq!(&back.matrices[&5], &b);
        }
    }

    #[test]
    fn rejects_wrong_header() {
        let err = read_matrices("a,b\n1,2\n".as_bytes(), Path::new("mem")).unwrap_err();
        assert!(matches!(err, JcasError::Format { .. }));
    }

    #[test]
    fn rejects_missing_entry() {
        let text = "k,row,col,re,im\n0,0,0,1,0\n0,1,1,1,0\n";
        assert!(read_matrices(text.as_bytes(), Path::new("mem")).is_err());
    }
}
