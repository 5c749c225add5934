//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic          8 bytes   "DQSACKPT"
//! version        u32       1
//! num_channels   u32
//! input_width    u32
//! lstm_width     u32
//! head_width     u32
//! config_hash    u64
//! array_count    u32
//! per array:
//!   name_len     u16
//!   name         name_len bytes, UTF-8
//!   rank         u32
//!   dims         rank x u64
//!   values       prod(dims) x f64 (IEEE-754 bits, little-endian)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::network::{Architecture, NetworkParams, ARRAY_NAMES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DQSACKPT";
pub const VERSION: u32 = 1;

/// Parameters plus the hash of the config that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub config_hash: u64,
}

pub fn encode(params: &NetworkParams, config_hash: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * params.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let a = params.arch;
    for w in [a.num_channels, a.input_width, a.lstm_width, a.head_width] {
        out.extend_from_slice(&(w as u32).to_le_bytes());
    }
    out.extend_from_slice(&config_hash.to_le_bytes());
    out.extend_from_slice(&(ARRAY_NAMES.len() as u32).to_le_bytes());
    for (name, t) in ARRAY_NAMES.iter().zip(params.arrays()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let arch = Architecture {
        num_channels: cur.u32()? as usize,
        input_width: cur.u32()? as usize,
        lstm_width: cur.u32()? as usize,
        head_width: cur.u32()? as usize,
    };
    arch.validate()?;
    let config_hash = cur.u64()?;
    let count = cur.u32()? as usize;
    if count != ARRAY_NAMES.len() {
        return Err(Error::Checkpoint(format!(
            "expected 12 arrays, found {count}"
        )));
    }
    let mut params = NetworkParams::zeros(arch);
    for (expected, t) in ARRAY_NAMES.iter().zip(params.arrays_mut()) {
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
        if name != *expected {
            return Err(Error::Checkpoint(format!(
                "expected array {expected}, found {name}"
            )));
        }
        let rank = cur.u32()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u64()? as usize);
        }
        if dims != t.shape() {
            return Err(Error::Checkpoint(format!(
                "array {name} has shape {dims:?}, architecture implies {:?}",
                t.shape()
            )));
        }
        for v in t.data_mut() {
            *v = f64::from_le_bytes(cur.take(8)?.try_into().expect("8 bytes"));
        }
    }
    if cur.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(Checkpoint {
        params,
        config_hash,
    })
}

pub fn save(path: &Path, params: &NetworkParams, config_hash: u64) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(params, config_hash))
        .map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn file_round_trip_is_bit_exact() {
        let arch = Architecture::new(2).with_widths(3, 4, 5);
        let mut p = NetworkParams::init(arch, &mut ChaCha8Rng::seed_from_u64(4));
        p.input.bias.data_mut()[0] = -0.0;
        p.input.bias.data_mut()[1] = f64::MIN_POSITIVE / 3.0;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        save(&path, &p, 0xDEAD_BEEF).unwrap();
        let ck = load(&path).unwrap();
        assert_eq!(ck.config_hash, 0xDEAD_BEEF);
        for (a, b) in p.arrays().iter().zip(ck.params.arrays()) {
            let bits_a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let arch = Architecture::new(1).with_widths(2, 2, 2);
        let bytes = encode(&NetworkParams::zeros(arch), 1);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut version = bytes;
        version[8] = 9;
        assert!(decode(&version).is_err());
    }
}
