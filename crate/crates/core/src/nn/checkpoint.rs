//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic    8 bytes  "OODMIXCK"
//! version  u32      1
//! layers   u32      L
//! dims     L+1 x u64
//! per layer: weights (in*out f64, row-major), biases (out f64)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{Layer, MlpModel};
use crate::numerics::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"OODMIXCK";
const VERSION: u32 = 1;
// Sanity bound against corrupt headers allocating huge buffers.
const MAX_WIDTH: u64 = 1 << 20;

pub fn write_checkpoint<W: Write>(model: &MlpModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(model.layers().len() as u32).to_le_bytes())?;
    for d in model.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for l in model.layers() {
        for v in l.weights.values().iter().chain(&l.biases) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_layers = read_u32(&mut r)? as usize;
    if n_layers == 0 {
        return Err(Error::Checkpoint("no layers".into()));
    }
    let mut dims = Vec::with_capacity(n_layers + 1);
    for _ in 0..=n_layers {
        let d = read_u64(&mut r)?;
        if d == 0 || d > MAX_WIDTH {
            return Err(Error::Checkpoint(format!("layer width {d} out of range")));
        }
        dims.push(d as usize);
    }
    let mut layers = Vec::with_capacity(n_layers);
    for w in dims.windows(2) {
        let weights = read_f64s(&mut r, w[0] * w[1])?;
        let biases = read_f64s(&mut r, w[1])?;
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::Checkpoint("non-finite bias".into()));
        }
        let weights = Matrix::from_vec(w[0], w[1], weights)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        layers.push(Layer { weights, biases });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    MlpModel::from_layers(layers)
}

pub fn save_checkpoint(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpModel> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    #[test]
    fn roundtrip_is_bit_exact() {
        let mut rng = RngState::new(8, "init");
        let m = MlpModel::new(&[2, 7, 5, 4], &mut rng).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 4 * 8 + m.param_count() * 8);
        let back = read_checkpoint(&buf[..]).unwrap();
        let a: Vec<u64> = m.flatten().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.flatten().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.dims(), m.dims());
    }

    #[test]
    fn rejects_corruption() {
        let m = MlpModel::zeros(&[2, 3]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[8] = 2;
        assert!(matches!(read_checkpoint(&bad[..]), Err(Error::Checkpoint(_))));
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(&long[..]).is_err());
    }
}
