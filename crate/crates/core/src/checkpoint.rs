//! Plain-text weight dumps that round-trip bit-exactly.
//!
//! One line per parameter: `name rows cols` followed by each value's IEEE-754
//! bits in hex.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gradcore::{Matrix, Param};

pub fn encode(params: &[&Param]) -> String {
    let mut out = String::new();
    for p in params {
        let (r, c) = p.value.shape();
        write!(out, "{} {} {}", p.name, r, c).unwrap();
        for v in p.value.data() {
            write!(out, " {:016x}", v.to_bits()).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn decode(text: &str) -> Result<Vec<Param>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Checkpoint(format!("line {}: {what}", i + 1));
            let mut parts = line.split_ascii_whitespace();
            let name = parts.next().ok_or_else(|| bad("missing name"))?;
            let rows: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad row count"))?;
            let cols: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad column count"))?;
            let data = parts
                .map(|h| u64::from_str_radix(h, 16).map(f64::from_bits).map_err(|_| bad("bad value")))
                .collect::<Result<Vec<f64>>>()?;
            Ok(Param::new(name, Matrix::new(rows, cols, data)?))
        })
        .collect()
}

pub fn save(path: impl AsRef<Path>, params: &[&Param]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(params)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: impl AsRef<Path>) -> Result<Vec<Param>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&text)
}

/// Copies loaded values into `targets`, matching by name and shape.
pub fn restore(targets: Vec<&mut Param>, loaded: &[Param]) -> Result<()> {
    for t in targets {
        let src = loaded
            .iter()
            .find(|p| p.name == t.name)
            .ok_or_else(|| Error::Checkpoint(format!("no entry for `{}`", t.name)))?;
        if src.value.shape() != t.value.shape() {
            return Err(Error::Checkpoint(format!(
                "`{}` has shape {:?}, expected {:?}",
                t.name,
                src.value.shape(),
                t.value.shape()
            )));
        }
        t.value = src.value.clone();
    }
    Ok(())
}
