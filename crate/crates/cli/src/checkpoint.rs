//! Binary MPS checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "SU2QLMPS1"            magic, 9 bytes
//! u32                    version
//! f64 t, f64 g1, f64 eps, u64 L, u32 N_M
//! u64                    orthogonality center
//! per site:
//!   u64                  number of blocks
//!   per block:
//!     u32 q, u8 ell      left label
//!     u32                physical label
//!     u32 q, u8 ell      right label
//!     u64 rows, u64 cols
//!     rows * cols f64    row-major entries
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use su2qlm::model::GaugeSiteBasis;
use su2qlm::mps::SymmetricMps;
use su2qlm::symtensor::{BlockTensor, ChargeLabel};
use su2qlm::ModelParams;

use crate::CliError;

pub const MAGIC: &[u8; 9] = b"SU2QLMPS1";
pub const VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> CliError {
    CliError::Checkpoint(msg.into())
}

pub fn encode(state: &SymmetricMps) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let p = state.params();
    out.extend_from_slice(&p.t.to_le_bytes());
    out.extend_from_slice(&p.g1.to_le_bytes());
    out.extend_from_slice(&p.eps.to_le_bytes());
    out.extend_from_slice(&(p.len as u64).to_le_bytes());
    out.extend_from_slice(&p.n_matter.to_le_bytes());
    out.extend_from_slice(&(state.center() as u64).to_le_bytes());
    for t in state.tensors() {
        out.extend_from_slice(&(t.blocks().len() as u64).to_le_bytes());
        for (l, b, r, m) in t.iter() {
            out.extend_from_slice(&l.q.to_le_bytes());
            out.push(l.ell);
            out.extend_from_slice(&(b as u32).to_le_bytes());
            out.extend_from_slice(&r.q.to_le_bytes());
            out.push(r.ell);
            out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
            for x in m.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CliError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| corrupt("truncated file"))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, CliError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, CliError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CliError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CliError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn label(&mut self) -> Result<ChargeLabel, CliError> {
        let q = self.u32()?;
        Ok(ChargeLabel::new(q, self.u8()?))
    }
}

pub fn decode(data: &[u8]) -> Result<SymmetricMps, CliError> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let (t, g1, eps) = (c.f64()?, c.f64()?, c.f64()?);
    let len = usize::try_from(c.u64()?).map_err(|_| corrupt("length overflow"))?;
    // every site stores at least its block count
    if len > data.len() / 8 {
        return Err(corrupt(format!("chain length {len} exceeds the file size")));
    }
    let n_matter = c.u32()?;
    let params = ModelParams::with_couplings(t, g1, eps, len, n_matter).map_err(|e| corrupt(e.to_string()))?;
    let center = c.u64()? as usize;
    let mut tensors = Vec::with_capacity(len);
    for site in 0..len {
        let mut tensor = BlockTensor::new(GaugeSiteBasis::shared(params.site_kind(site)));
        let blocks = c.u64()?;
        for _ in 0..blocks {
            let left = c.label()?;
            let b = c.u32()? as usize;
            let right = c.label()?;
            let rows = c.u64()? as usize;
            let cols = c.u64()? as usize;
            let n = rows.checked_mul(cols).filter(|&n| n <= data.len() / 8).ok_or_else(|| corrupt("block too large"))?;
            let vals = (0..n).map(|_| c.f64()).collect::<Result<Vec<_>, _>>()?;
            if tensor.right_label(left, b) != Some(right) {
                return Err(corrupt(format!("site {site}: labels {left} -{b}-> {right} violate the selection rules")));
            }
            let m = Array2::from_shape_vec((rows, cols), vals).map_err(|e| corrupt(e.to_string()))?;
            tensor.insert(left, b, m).map_err(|e| corrupt(e.to_string()))?;
        }
        tensors.push(tensor);
    }
    if c.pos != data.len() {
        return Err(corrupt("trailing bytes"));
    }
    SymmetricMps::from_canonical(&params, tensors, center).map_err(|e| corrupt(e.to_string()))
}

pub fn save(state: &SymmetricMps, path: &Path) -> Result<(), CliError> {
    let bytes = encode(state);
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    f.write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?;
    f.sync_all().map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<SymmetricMps, CliError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    decode(&buf)
}
