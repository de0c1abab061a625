//! Flat binary parameter checkpoints.
//!
//! Layout: five little-endian `u64` header fields — magic, input dim, hidden
//! dim, class count, head count (1 for a single-head net, 3 for the shared
//! multi-head net) — followed by the flat parameter vector as little-endian
//! `f64`s in the order defined by `flat_params`. Round trips are bit-exact.

use std::fs;
use std::path::Path;

use super::{Head, Matrix, MlpNet, MultiHeadNet};
use crate::error::{Error, Result};

const MAGIC: u64 = 0x6e65_745f_636b_7074; // "net_ckpt"

fn encode(dims: [u64; 4], params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (5 + params.len()));
    out.extend_from_slice(&MAGIC.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for p in params {
        out.extend_from_slice(&p.to_bits().to_le_bytes());
    }
    out
}

fn decode(path: &Path) -> Result<([u64; 4], Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 40 || bytes.len() % 8 != 0 {
        return Err(Error::InvalidData(format!(
            "checkpoint {} is truncated",
            path.display()
        )));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * (i + 1)].try_into().unwrap());
    if word(0) != MAGIC {
        return Err(Error::InvalidData(format!(
            "checkpoint {} has an unknown format",
            path.display()
        )));
    }
    let dims = [word(1), word(2), word(3), word(4)];
    let params = (5..bytes.len() / 8)
        .map(|i| f64::from_bits(word(i)))
        .collect();
    Ok((dims, params))
}

pub fn save_mlp(net: &MlpNet, path: &Path) -> Result<()> {
    let dims = [
        net.input_dim() as u64,
        net.hidden_dim() as u64,
        net.num_classes() as u64,
        1,
    ];
    fs::write(path, encode(dims, &net.flat_params())).map_err(|e| Error::io(path, e))
}

pub fn load_mlp(path: &Path) -> Result<MlpNet> {
    let ([input, hidden, classes, heads], params) = decode(path)?;
    if heads != 1 {
        return Err(Error::InvalidData(format!(
            "checkpoint {} holds a {heads}-head network",
            path.display()
        )));
    }
    let (input, hidden, classes) = (input as usize, hidden as usize, classes as usize);
    let expected = input * hidden + hidden + hidden * classes + classes;
    if params.len() != expected {
        return Err(Error::Shape {
            what: format!("checkpoint {}", path.display()),
            expected,
            got: params.len(),
        });
    }
    let mut net = MlpNet {
        w_in: Matrix::zeros(input, hidden),
        b_in: vec![0.0; hidden],
        w_out: Matrix::zeros(hidden, classes),
        b_out: vec![0.0; classes],
    };
    net.set_flat_params(&params);
    Ok(net)
}

pub fn save_multi_head(net: &MultiHeadNet, path: &Path) -> Result<()> {
    let dims = [
        net.input_dim() as u64,
        net.hidden_dim() as u64,
        net.num_classes() as u64,
        3,
    ];
    fs::write(path, encode(dims, &net.flat_params())).map_err(|e| Error::io(path, e))
}

pub fn load_multi_head(path: &Path) -> Result<MultiHeadNet> {
    let ([input, hidden, classes, heads], params) = decode(path)?;
    if heads != 3 {
        return Err(Error::InvalidData(format!(
            "checkpoint {} holds a {heads}-head network",
            path.display()
        )));
    }
    let (input, hidden, classes) = (input as usize, hidden as usize, classes as usize);
    let expected = input * hidden + hidden + 3 * (hidden * classes + classes);
    if params.len() != expected {
        return Err(Error::Shape {
            what: format!("checkpoint {}", path.display()),
            expected,
            got: params.len(),
        });
    }
    let head = || Head {
        w: Matrix::zeros(hidden, classes),
        b: vec![0.0; classes],
    };
    let mut net = MultiHeadNet {
        w_in: Matrix::zeros(input, hidden),
        b_in: vec![0.0; hidden],
        heads: [head(), head(), head()],
    };
    net.set_flat_params(&params);
    Ok(net)
}
