//! Field export formats.
//!
//! Binary grid: `n_side` as u64, `L` as f64, then n² f64 values row-major
//! (rows indexed by y), all little-endian.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::GridField;
use crate::error::{Error, Result};

impl GridField {
    pub fn write_binary(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(&(self.n_side() as u64).to_le_bytes())?;
        out.write_all(&self.box_size().to_le_bytes())?;
        for v in self.values() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::GridFormat(e.to_string()))?;
        if bytes.len() < 16 {
            return Err(Error::GridFormat("truncated header".into()));
        }
        let n = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
        let box_size = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let expected = n
            .checked_mul(n)
            .and_then(|c| c.checked_mul(8))
            .and_then(|c| c.checked_add(16))
            .ok_or_else(|| Error::GridFormat(format!("grid size {n} overflows")))?;
        if bytes.len() != expected {
            return Err(Error::GridFormat(format!(
                "n_side {n} needs {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        let values = bytes[16..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        GridField::new(n, box_size, values)
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_binary(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_binary(std::io::BufReader::new(file))
    }

    /// `x,y,value` rows, one per node.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let h = self.spacing();
        let n = self.n_side();
        w.write_record(["x", "y", "value"]).map_err(|e| Error::csv(path, e))?;
        for j in 0..n {
            for (i, v) in self.row(j).iter().enumerate() {
                w.write_record([
                    format_float(i as f64 * h),
                    format_float(j as f64 * h),
                    format_float(*v),
                ])
                .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}
