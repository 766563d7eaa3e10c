//! Versioned binary model checkpoints, little-endian throughout.
//!
//! ```text
//! magic    8 bytes  "GDFMODEL"
//! version  u32
//! variant  u8       0 = network, 1 = compact
//! inputs   u32
//! hidden   u32      0 for compact
//! scales   2 x f64  failure and restoration rate caps
//! mean     inputs x f64
//! std      inputs x f64
//! count    u64
//! params   count x f64
//! ```

use std::fs;
use std::path::Path;

use gdf_core::ode::{Normalizer, OutageModel, RateModel, RateNetwork};

use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 8] = b"GDFMODEL";
pub const VERSION: u32 = 1;

pub fn encode(model: &OutageModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (variant, hidden) = match &model.failure {
        RateModel::Network(n) => (0u8, n.hidden),
        RateModel::Constant { .. } => (1u8, 0),
    };
    out.push(variant);
    out.extend_from_slice(&(model.input_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(hidden as u32).to_le_bytes());
    let floats = [model.failure.rate_scale(), model.restoration.rate_scale()]
        .into_iter()
        .chain(model.normalizer.mean.iter().copied())
        .chain(model.normalizer.std.iter().copied());
    for v in floats {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let params = model.params();
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> CliResult<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CliError::Data(format!("checkpoint truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> CliResult<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> CliResult<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> CliResult<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> CliResult<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode(bytes: &[u8]) -> CliResult<OutageModel> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(CliError::Data("not a model checkpoint".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CliError::Data(format!(
            "checkpoint version {version} is not supported (expected {VERSION})"
        )));
    }
    let variant = c.take(1)?[0];
    let inputs = c.u32()? as usize;
    let hidden = c.u32()? as usize;
    let (fs, rs) = (c.f64()?, c.f64()?);
    let mean = c.f64s(inputs)?;
    let std = c.f64s(inputs)?;
    let count = c.u64()? as usize;
    let mut model = match variant {
        0 => OutageModel {
            failure: RateModel::Network(RateNetwork::zeros(inputs, hidden, fs)),
            restoration: RateModel::Network(RateNetwork::zeros(inputs, hidden, rs)),
            normalizer: Normalizer { mean, std },
        },
        1 => {
            let mut m = OutageModel::new_compact(inputs, 0.0, 0.0);
            m.failure.set_rate_scale(fs);
            m.restoration.set_rate_scale(rs);
            m.normalizer = Normalizer { mean, std };
            m
        }
        v => return Err(CliError::Data(format!("unknown model variant {v}"))),
    };
    if count != model.num_params() {
        return Err(CliError::Data(format!(
            "checkpoint holds {count} parameters, model needs {}",
            model.num_params()
        )));
    }
    let params = c.f64s(count)?;
    if c.at != bytes.len() {
        return Err(CliError::Data("trailing bytes after checkpoint".into()));
    }
    model.set_params(&params)?;
    Ok(model)
}

pub fn save(path: &Path, model: &OutageModel) -> CliResult<()> {
    fs::write(path, encode(model)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> CliResult<OutageModel> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}
