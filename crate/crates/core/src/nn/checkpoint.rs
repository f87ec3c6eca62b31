//! Binary checkpoint of a [`NetworkState`].
//!
//! Layout, all integers u64 and all reals f64, little-endian:
//!
//! ```text
//! "DDL1"
//! input_dim, n_hidden, hidden_dims[0..n_hidden], output_dim, seed
//! per layer (input side first):
//!     weights (out × in, row-major), bias,
//!     m_weights, v_weights, m_bias, v_bias
//! t_adam
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::matrix::Matrix;
use super::network::{DenseLayer, NetworkState};
use super::spec::NetworkSpec;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DDL1";
/// Refuses dimensions beyond this to avoid absurd allocations on corrupt input.
const MAX_DIM: u64 = 1 << 24;

pub fn write_checkpoint<W: Write>(state: &NetworkState, mut w: W) -> std::io::Result<()> {
    let spec = &state.spec;
    w.write_all(MAGIC)?;
    let put_u64 = |w: &mut W, v: u64| w.write_all(&v.to_le_bytes());
    put_u64(&mut w, spec.input_dim as u64)?;
    put_u64(&mut w, spec.hidden_dims.len() as u64)?;
    for &d in &spec.hidden_dims {
        put_u64(&mut w, d as u64)?;
    }
    put_u64(&mut w, spec.output_dim as u64)?;
    put_u64(&mut w, spec.seed)?;
    for layer in &state.layers {
        for block in [
            layer.weights.as_slice(),
            &layer.bias,
            layer.m_weights.as_slice(),
            layer.v_weights.as_slice(),
            &layer.m_bias,
            &layer.v_bias,
        ] {
            write_reals(&mut w, block)?;
        }
    }
    put_u64(&mut w, state.t_adam)?;
    w.flush()
}

fn write_reals<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn to_bytes(state: &NetworkState) -> Vec<u8> {
    let mut out = Vec::new();
    write_checkpoint(state, &mut out).expect("writing to a Vec cannot fail");
    out
}

struct Reader<'a, R> {
    inner: R,
    path: &'a Path,
}

impl<R: Read> Reader<'_, R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| self.err(e))?;
        Ok(buf)
    }

    fn err(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(self.path, "truncated checkpoint")
        } else {
            Error::io(self.path, e)
        }
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes::<8>()?))
    }

    fn dim(&mut self) -> Result<usize> {
        let d = self.u64()?;
        if d > MAX_DIM {
            return Err(Error::format(self.path, format!("implausible dimension {d}")));
        }
        Ok(d as usize)
    }

    fn reals(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; n * 8];
        self.inner.read_exact(&mut raw).map_err(|e| self.err(e))?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }
}

/// Reads a checkpoint; `path` is only used in error messages.
pub fn read_checkpoint<R: Read>(inner: R, path: &Path) -> Result<NetworkState> {
    let mut r = Reader { inner, path };
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::format(path, "bad magic, expected DDL1"));
    }
    let input_dim = r.dim()?;
    let n_hidden = r.dim()?;
    if n_hidden > 1024 {
        return Err(Error::format(path, format!("implausible layer count {n_hidden}")));
    }
    let hidden_dims = (0..n_hidden).map(|_| r.dim()).collect::<Result<Vec<_>>>()?;
    let output_dim = r.dim()?;
    let seed = r.u64()?;
    let spec = NetworkSpec {
        input_dim,
        hidden_dims,
        output_dim,
        seed,
    };
    spec.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let mut layers = Vec::with_capacity(n_hidden + 1);
    for (i, o) in spec.layer_shapes() {
        let weights = Matrix::from_vec(o, i, r.reals(o * i)?);
        let bias = r.reals(o)?;
        let m_weights = Matrix::from_vec(o, i, r.reals(o * i)?);
        let v_weights = Matrix::from_vec(o, i, r.reals(o * i)?);
        let m_bias = r.reals(o)?;
        let v_bias = r.reals(o)?;
        layers.push(DenseLayer {
            weights,
            bias,
            m_weights,
            v_weights,
            m_bias,
            v_bias,
        });
    }
    let t_adam = r.u64()?;
    let mut trailing = [0u8; 1];
    match r.inner.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::format(path, "trailing bytes after checkpoint")),
        Err(e) => return Err(Error::io(path, e)),
    }
    Ok(NetworkState {
        spec,
        layers,
        t_adam,
    })
}

pub fn save(state: &NetworkState, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(state)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkState> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::network::init_network;

    fn sample_state() -> NetworkState {
        let spec = NetworkSpec::new(3, vec![4, 2], 2, 99).unwrap();
        let mut s = init_network(&spec).unwrap();
        s.layers[1].m_bias[0] = 0.5;
        s.layers[0].v_weights.set(1, 2, 1e-300);
        s.t_adam = 17;
        s
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let state = sample_state();
        let bytes = to_bytes(&state);
        let back = read_checkpoint(&bytes[..], Path::new("mem")).unwrap();
        assert_eq!(back, state);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&sample_state());
        assert_eq!(&bytes[..4], b"DDL1");
        let word = |i: usize| u64::from_le_bytes(bytes[4 + 8 * i..12 + 8 * i].try_into().unwrap());
        assert_eq!(
            [word(0), word(1), word(2), word(3), word(4), word(5)],
            [3, 2, 4, 2, 2, 99]
        );
        let n_reals = 3 * (4 * 3 + 2 * 4 + 2 * 2) + 3 * (4 + 2 + 2);
        assert_eq!(bytes.len(), 4 + 6 * 8 + n_reals * 8 + 8);
        assert_eq!(u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap()), 17);
    }

    #[test]
    fn rejects_corruption() {
        let mut bytes = to_bytes(&sample_state());
        let p = Path::new("x");
        assert!(read_checkpoint(&bytes[..bytes.len() - 1], p).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(read_checkpoint(&longer[..], p).is_err());
        bytes[0] = b'X';
        assert!(read_checkpoint(&bytes[..], p).is_err());
    }
}
