//! Feature matrix export: CSV with `record_id` first, and a binary cache.
//!
//! Cache layout (little endian):
//! `b"FKFM"`, `u16` version, `u16` hash length, hash bytes, `u64` rows,
//! `u64` cols, then per row a `u32`-prefixed id followed by `cols` `f64`s.

use std::io::{self, Read, Write};

use crate::matrix::Matrix;

const CACHE_MAGIC: &[u8; 4] = b"FKFM";
const CACHE_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub matrix: Matrix,
    pub config_hash: String,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    /// Header `record_id,f0,f1,...`; values in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.cols() + 1);
        header.push("record_id".to_string());
        header.extend((0..self.cols()).map(|j| format!("f{j}")));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.cols() + 1);
        for (id, values) in self.ids.iter().zip(self.matrix.iter_rows()) {
            row.clear();
            row.push(id.clone());
            row.extend(values.iter().map(|&v| crate::fmt_f64(v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_cache<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        let hash = self.config_hash.as_bytes();
        w.write_all(&(hash.len() as u16).to_le_bytes())?;
        w.write_all(hash)?;
        w.write_all(&(self.rows() as u64).to_le_bytes())?;
        w.write_all(&(self.cols() as u64).to_le_bytes())?;
        for (id, values) in self.ids.iter().zip(self.matrix.iter_rows()) {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    /// Reads a cache; fails unless it was written for `expected_hash`.
    pub fn read_cache<R: Read>(mut r: R, expected_hash: &str) -> io::Result<FeatureMatrix> {
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("not a feature cache".into()));
        }
        let version = read_u16(&mut r)?;
        if version != CACHE_VERSION {
            return Err(bad(format!("unsupported feature cache version {version}")));
        }
        let hash_len = read_u16(&mut r)? as usize;
        let mut hash = vec![0u8; hash_len];
        r.read_exact(&mut hash)?;
        let hash = String::from_utf8(hash).map_err(|e| bad(e.to_string()))?;
        if hash != expected_hash {
            return Err(bad(format!(
                "cache built for config {hash}, wanted {expected_hash}"
            )));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let mut ids = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows.saturating_mul(cols).min(1 << 28));
        let mut buf = [0u8; 8];
        for _ in 0..rows {
            let id_len = read_u32(&mut r)? as usize;
            let mut id = vec![0u8; id_len];
            r.read_exact(&mut id)?;
            ids.push(String::from_utf8(id).map_err(|e| bad(e.to_string()))?);
            for _ in 0..cols {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
        }
        Ok(FeatureMatrix {
            ids,
            matrix: Matrix::new(rows, cols, data),
            config_hash: hash,
        })
    }
}

fn read_u16<R: Read>(r: &mut R) -> io::Result<u16> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
