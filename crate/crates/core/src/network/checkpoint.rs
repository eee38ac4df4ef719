//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size   | field                                         |
//! |--------|--------|-----------------------------------------------|
//! | 0      | 8      | magic `TWNNCKPT`                               |
//! | 8      | 4      | format version (`u32`, currently 1)           |
//! | 12     | 32     | SHA-256 digest of the run configuration text  |
//! | 44     | 8      | parameter count `n` (`u64`)                   |
//! | 52     | 8·n    | flat parameters as IEEE-754 `f64`              |
//!
//! Nothing follows the parameters; trailing bytes are rejected.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"TWNNCKPT";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 32 + 8;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint truncated or padded: expected {expected} bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("checkpoint digest does not match the configuration")]
    DigestMismatch,
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub digest: [u8; 32],
    pub params: Vec<f64>,
}

pub fn config_digest(config_text: &str) -> [u8; 32] {
    Sha256::digest(config_text.as_bytes()).into()
}

impl Checkpoint {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(CheckpointError::Length { expected: HEADER_LEN, found: bytes.len() });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(CheckpointError::Version(version));
        }
        let digest: [u8; 32] = bytes[12..44].try_into().expect("32 bytes");
        let n = u64::from_le_bytes(bytes[44..52].try_into().expect("8 bytes")) as usize;
        let expected = HEADER_LEN + 8 * n;
        if bytes.len() != expected {
            return Err(CheckpointError::Length { expected, found: bytes.len() });
        }
        let params = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { digest, params })
    }

    pub fn write(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CheckpointError> {
        Self::decode(&fs::read(path)?)
    }

    pub fn verify(&self, config_text: &str) -> Result<(), CheckpointError> {
        if self.digest != config_digest(config_text) {
            return Err(CheckpointError::DigestMismatch);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(params in proptest::collection::vec(any::<f64>(), 0..64), text in ".{0,40}") {
            let c = Checkpoint { digest: config_digest(&text), params };
            let d = Checkpoint::decode(&c.encode()).unwrap();
            prop_assert_eq!(c.digest, d.digest);
            prop_assert_eq!(c.params.len(), d.params.len());
            for (a, b) in c.params.iter().zip(&d.params) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = Checkpoint { digest: [0; 32], params: vec![1.0] }.encode();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::decode(&bytes), Err(CheckpointError::BadMagic)));
    }

    #[test]
    fn truncated_and_versioned() {
        let bytes = Checkpoint { digest: [0; 32], params: vec![1.0, 2.0] }.encode();
        assert!(matches!(Checkpoint::decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Length { .. })));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        assert!(matches!(Checkpoint::decode(&v2), Err(CheckpointError::Version(2))));
    }

    #[test]
    fn header_layout() {
        let bytes = Checkpoint { digest: [7; 32], params: vec![0.5] }.encode();
        assert_eq!(bytes.len(), 60);
        assert_eq!(&bytes[0..8], b"TWNNCKPT");
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[44..52], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[52..60], &0.5f64.to_le_bytes());
    }
}
