//! Plain file formats.
//!
//! Field file: the 4 bytes `FLD2`, then `n` as a little-endian `u64`, then
//! `L` as a little-endian `f64`, then the `n²` samples as little-endian
//! `f64` in row-major order (`[i, j]` is the sample at `(x_i, y_j)`, `i`
//! varying slowest).
//!
//! Measure file: a `measure v1` header, then lines `atom <x> <y> <mass>`
//! and at most one `density <path>` naming a field file, relative to the
//! measure file. `#` starts a comment.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};
use crate::measure::{Atom, FiniteMeasure};
use crate::scalar::Real;

const FIELD_MAGIC: &[u8; 4] = b"FLD2";

pub fn encode_field<T: Real>(f: &ScalarField<T>) -> Vec<u8> {
    let n = f.grid().n();
    let mut out = Vec::with_capacity(20 + 8 * n * n);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&f.grid().box_size().as_f64().to_le_bytes());
    for v in f.values().iter() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn decode_field<T: Real>(bytes: &[u8]) -> Result<ScalarField<T>> {
    if bytes.len() < 20 || &bytes[..4] != FIELD_MAGIC {
        return Err(Error::Format("missing FLD2 header".into()));
    }
    let word = |k: usize| -> [u8; 8] { bytes[k..k + 8].try_into().expect("8 bytes") };
    let n = u64::from_le_bytes(word(4)) as usize;
    let l = f64::from_le_bytes(word(12));
    let expected = n
        .checked_mul(n)
        .and_then(|m| m.checked_mul(8))
        .and_then(|m| m.checked_add(20))
        .ok_or_else(|| Error::Format(format!("implausible grid size {n}")))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "field file holds {} bytes, expected {expected} for n = {n}",
            bytes.len()
        )));
    }
    let grid = Grid::new(n, T::lit(l)).map_err(|e| Error::Format(e.to_string()))?;
    let values: Vec<T> = bytes[20..]
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect();
    let values = Array2::from_shape_vec((n, n), values).expect("length checked");
    ScalarField::new(&grid, values)
}

pub fn write_field<T: Real>(path: &Path, f: &ScalarField<T>) -> Result<()> {
    fs::write(path, encode_field(f))?;
    Ok(())
}

pub fn read_field<T: Real>(path: &Path) -> Result<ScalarField<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_field(&bytes)
}

/// One row of a norms table.
#[derive(Clone, Debug, PartialEq)]
pub struct NormRecord {
    pub t: f64,
    pub quantity: String,
    pub p: f64,
    pub m: f64,
    pub value: f64,
}

/// Writes `t,quantity,p,m,value`.
pub fn write_norms_csv(path: &Path, rows: &[NormRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,quantity,p,m,value")?;
    for r in rows {
        writeln!(w, "{:e},{},{},{},{:e}", r.t, r.quantity, r.p, r.m, r.value)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a measure file. A density path is resolved against `base_dir`.
pub fn parse_measure<T: Real>(text: &str, base_dir: &Path) -> Result<FiniteMeasure<T>> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "measure v1")) => {}
        _ => return Err(Error::Format("measure file must start with `measure v1`".into())),
    }
    let mut atoms = Vec::new();
    let mut density = None;
    for (k, line) in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Format(format!("line {}: cannot parse `{line}`", k + 1));
        match words.as_slice() {
            ["atom", x, y, m] => {
                let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
                atoms.push(Atom::new([T::lit(num(x)?), T::lit(num(y)?)], T::lit(num(m)?)));
            }
            ["density", path] => {
                if density.is_some() {
                    return Err(Error::Format("more than one density line".into()));
                }
                density = Some(read_field(&base_dir.join(path))?);
            }
            _ => return Err(bad()),
        }
    }
    FiniteMeasure::new(atoms, density)
}

pub fn read_measure<T: Real>(path: &Path) -> Result<FiniteMeasure<T>> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_measure(&text, base)
}

/// Writes `mu` as a measure file; the density, if any, goes next to it as
/// `<stem>.density.fld`.
pub fn write_measure<T: Real>(path: &Path, mu: &FiniteMeasure<T>) -> Result<()> {
    let mut text = String::from("measure v1\n");
    for a in mu.atoms() {
        text.push_str(&format!(
            "atom {:e} {:e} {:e}\n",
            a.position[0].as_f64(),
            a.position[1].as_f64(),
            a.mass.as_f64()
        ));
    }
    if let Some(d) = mu.density() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "measure".into());
        let name = format!("{stem}.density.fld");
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        write_field(&dir.join(&name), d)?;
        text.push_str(&format!("density {name}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// SHA-256 over the canonical atom list and density samples.
pub fn measure_hash<T: Real>(mu: &FiniteMeasure<T>) -> String {
    let mut h = Sha256::new();
    for a in mu.atoms() {
        h.update(b"atom");
        h.update(a.position[0].as_f64().to_le_bytes());
        h.update(a.position[1].as_f64().to_le_bytes());
        h.update(a.mass.as_f64().to_le_bytes());
    }
    if let Some(d) = mu.density() {
        h.update(b"density");
        h.update(encode_field(d));
    }
    h.finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oseen::gaussian_profile;

    #[test]
    fn field_round_trip() {
        let grid = Grid::new(16, 3.5).unwrap();
        let f = ScalarField::from_fn(&grid, |p| p[0] * 2.0 - p[1] * p[1]);
        let bytes = encode_field(&f);
        assert_eq!(&bytes[..4], b"FLD2");
        assert_eq!(bytes.len(), 20 + 8 * 256);
        let g: ScalarField<f64> = decode_field(&bytes).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.grid(), f.grid());
        assert!(decode_field::<f64>(&bytes[..100]).is_err());
        assert!(decode_field::<f64>(b"FLD1aaaaaaaaaaaaaaaaaaaa").is_err());
    }

    #[test]
    fn measure_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(32, 20.0).unwrap();
        let dens = ScalarField::from_fn(&grid, |p| 0.1 * gaussian_profile([p[0] - 3.0, p[1]]));
        let mu = FiniteMeasure::new(
            vec![Atom::new([0.0, 0.0], 1.0), Atom::new([4.0, 0.0], -0.5)],
            Some(dens),
        )
        .unwrap();
        let path = dir.path().join("mu.txt");
        write_measure(&path, &mu).unwrap();
        let back: FiniteMeasure<f64> = read_measure(&path).unwrap();
        assert_eq!(back.atoms(), mu.atoms());
        assert_eq!(back.density().unwrap().values(), mu.density().unwrap().values());
        assert_eq!(measure_hash(&back), measure_hash(&mu));
        assert_ne!(measure_hash(&back), measure_hash(&mu.scaled(2.0)));
    }

    #[test]
    fn measure_parse_errors() {
        let here = Path::new(".");
        assert!(parse_measure::<f64>("atom 0 0 1\n", here).is_err());
        assert!(parse_measure::<f64>("measure v1\natom 0 0\n", here).is_err());
        assert!(parse_measure::<f64>("measure v1\natom 0 0 x\n", here).is_err());
        let mu = parse_measure::<f64>("# comment\nmeasure v1\n\natom 1 2 3 # trailing\n", here).unwrap();
        assert_eq!(mu.atoms()[0].mass, 3.0);
    }

    #[test]
    fn norms_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.csv");
        write_norms_csv(
            &path,
            &[NormRecord {
                t: 1.0,
                quantity: "omega".into(),
                p: 2.0,
                m: 0.0,
                value: 0.5,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert!(text.starts_with("t,quantity,p,m,value\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
