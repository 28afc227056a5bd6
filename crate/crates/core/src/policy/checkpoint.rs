//! Binary checkpoint codec.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes  "CCCPOLCY"
//! version      u32
//! arch tag     u8       0 = tabular, 1 = feedforward (tanh)
//! inputs       u32
//! n_hidden     u32      feedforward only
//! hidden[i]    u32      feedforward only, n_hidden entries
//! actions      u32
//! n_params     u64
//! params       f64 x n_params
//! crc32        u32      over every preceding byte
//! ```

use alloc::string::ToString;
use alloc::vec::Vec;

use super::{Architecture, PolicyParams};
use crate::{CheckpointError, Result};

pub const MAGIC: [u8; 8] = *b"CCCPOLCY";
pub const FORMAT_VERSION: u32 = 1;

const TAG_TABULAR: u8 = 0;
const TAG_FEEDFORWARD: u8 = 1;

pub fn encode(policy: &PolicyParams) -> Vec<u8> {
    let params = policy.params();
    let mut out = Vec::with_capacity(64 + params.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match policy.architecture() {
        Architecture::Tabular { inputs, actions } => {
            out.push(TAG_TABULAR);
            out.extend_from_slice(&(*inputs as u32).to_le_bytes());
            out.extend_from_slice(&(*actions as u32).to_le_bytes());
        }
        Architecture::Feedforward { inputs, hidden, actions } => {
            out.push(TAG_FEEDFORWARD);
            out.extend_from_slice(&(*inputs as u32).to_le_bytes());
            out.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
            for h in hidden {
                out.extend_from_slice(&(*h as u32).to_le_bytes());
            }
            out.extend_from_slice(&(*actions as u32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Corrupt("truncated"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<PolicyParams> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    if bytes.len() < MAGIC.len() + 8 {
        return Err(CheckpointError::Corrupt("truncated").into());
    }
    let mut r = Reader { bytes: &bytes[MAGIC.len()..] };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version).into());
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
        return Err(CheckpointError::Corrupt("checksum mismatch").into());
    }
    let mut r = Reader { bytes: &body[MAGIC.len() + 4..] };
    let arch = match r.u8()? {
        TAG_TABULAR => {
            let inputs = r.u32()? as usize;
            let actions = r.u32()? as usize;
            Architecture::Tabular { inputs, actions }
        }
        TAG_FEEDFORWARD => {
            let inputs = r.u32()? as usize;
            let n_hidden = r.u32()? as usize;
            if n_hidden > 64 {
                return Err(CheckpointError::Corrupt("implausible layer count").into());
            }
            let hidden = (0..n_hidden).map(|_| r.u32().map(|h| h as usize)).collect::<Result<Vec<_>, _>>()?;
            let actions = r.u32()? as usize;
            Architecture::Feedforward { inputs, hidden, actions }
        }
        _ => return Err(CheckpointError::Corrupt("unknown architecture tag").into()),
    };
    let n = r.u64()? as usize;
    if arch.validate().is_err() || n != arch.param_count() {
        return Err(CheckpointError::Corrupt("parameter count does not match architecture").into());
    }
    if r.bytes.len() != n * 8 {
        return Err(CheckpointError::Corrupt("payload length does not match parameter count").into());
    }
    let params = r.bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    PolicyParams::from_parts(arch, params)
}

/// Like [`decode`], but refuses checkpoints of any other architecture.
pub fn decode_expecting(bytes: &[u8], expected: &Architecture) -> Result<PolicyParams> {
    let policy = decode(bytes)?;
    if policy.architecture() != expected {
        return Err(CheckpointError::ArchitectureMismatch {
            expected: expected.to_string(),
            found: policy.architecture().to_string(),
        }
        .into());
    }
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::Error;

    fn sample() -> PolicyParams {
        let mut rng = rng_from_seed(3);
        PolicyParams::random(Architecture::feedforward(7, &[4, 3], 5), 1.0, &mut rng).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let q = decode(&encode(&p)).unwrap();
        assert_eq!(p.architecture(), q.architecture());
        let bits = |x: &PolicyParams| x.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&p), bits(&q));

        let t = PolicyParams::tabular(&[alloc::vec![1.0, -0.0], alloc::vec![f64::MIN_POSITIVE, 2.5]]).unwrap();
        assert_eq!(bits(&decode(&encode(&t)).unwrap()), bits(&t));
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = encode(&sample());
        for cut in [0, 5, 12, 20, bytes.len() - 1] {
            let err = decode(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, Error::Checkpoint(CheckpointError::Corrupt(_) | CheckpointError::BadMagic)),
                "cut {cut}: {err:?}"
            );
        }
    }

    #[test]
    fn bit_flip_fails_checksum() {
        let mut bytes = encode(&sample());
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x10;
        assert_eq!(decode(&bytes).unwrap_err(), Error::Checkpoint(CheckpointError::Corrupt("checksum mismatch")));
    }

    #[test]
    fn version_and_magic_checked() {
        let mut bytes = encode(&sample());
        bytes[8] = 9;
        assert_eq!(decode(&bytes).unwrap_err(), Error::Checkpoint(CheckpointError::UnsupportedVersion(9)));
        let mut bytes = encode(&sample());
        bytes[0] = b'X';
        assert_eq!(decode(&bytes).unwrap_err(), Error::Checkpoint(CheckpointError::BadMagic));
    }

    #[test]
    fn architecture_mismatch_is_explicit() {
        let bytes = encode(&sample());
        let other = Architecture::feedforward(7, &[3, 4], 5);
        assert!(matches!(
            decode_expecting(&bytes, &other),
            Err(Error::Checkpoint(CheckpointError::ArchitectureMismatch { .. }))
        ));
    }
}
