//! Flat binary encoding of network parameters.
//!
//! Layout, all little-endian:
//! `b"CIQP"`, format version `u32`, size count `u32`, the layer sizes as
//! `u32`s, then per layer the row-major weights followed by the biases as
//! raw `f64` bits. The blob length is exact; trailing bytes are rejected.

use alloc::vec::Vec;

use super::Mlp;
use crate::{Error, Result};

pub(crate) const MAGIC: [u8; 4] = *b"CIQP";
pub(crate) const VERSION: u32 = 1;

/// Each layer size must fit a u32 and stay small enough that products cannot
/// overflow usize on 32-bit hosts.
const MAX_LAYER_SIZE: u32 = 1 << 20;

impl Mlp {
    /// Serialize the parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let params: usize = self
            .sizes
            .windows(2)
            .map(|p| p[0] * p[1] + p[1])
            .sum::<usize>();
        let mut out = Vec::with_capacity(12 + 4 * self.sizes.len() + 8 * params);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in 0..self.weights.len() {
            for w in &self.weights[l] {
                out.extend_from_slice(&w.to_le_bytes());
            }
            for b in &self.biases[l] {
                out.extend_from_slice(&b.to_le_bytes());
            }
        }
        out
    }

    /// Parse a blob produced by [`Self::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Malformed("bad magic"));
        }
        if r.u32()? != VERSION {
            return Err(Error::Malformed("unsupported version"));
        }
        let n_sizes = r.u32()? as usize;
        if n_sizes < 2 {
            return Err(Error::Malformed("fewer than two layer sizes"));
        }
        let mut sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            let s = r.u32()?;
            if s == 0 || s > MAX_LAYER_SIZE {
                return Err(Error::Malformed("layer size out of range"));
            }
            sizes.push(s as usize);
        }
        let mut weights = Vec::with_capacity(n_sizes - 1);
        let mut biases = Vec::with_capacity(n_sizes - 1);
        for pair in sizes.windows(2) {
            weights.push(r.f64s(pair[0] * pair[1])?);
            biases.push(r.f64s(pair[1])?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Malformed("trailing bytes"));
        }
        Mlp::from_parts(sizes, weights, biases)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(Error::Malformed("truncated payload"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let b = self.take(8 * n)?;
        Ok(b.chunks_exact(8)
            .map(|c| {
                f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]])
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn round_trip_is_bitwise_exact() {
        let net = Mlp::new(&[4, 32, 32, 2], &mut rng::stream(3, 0)).unwrap();
        let blob = net.to_bytes();
        let back = Mlp::from_bytes(&blob).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn header_starts_with_magic_and_version() {
        let net = Mlp::new(&[2, 2], &mut rng::stream(0, 0)).unwrap();
        let blob = net.to_bytes();
        assert_eq!(&blob[..4], b"CIQP");
        assert_eq!(u32::from_le_bytes(blob[4..8].try_into().unwrap()), 1);
    }

    #[test]
    fn rejects_corruption() {
        let net = Mlp::new(&[3, 5, 2], &mut rng::stream(1, 0)).unwrap();
        let blob = net.to_bytes();

        let mut bad_magic = blob.clone();
        bad_magic[0] = b'X';
        assert_eq!(
            Mlp::from_bytes(&bad_magic).unwrap_err(),
            Error::Malformed("bad magic")
        );

        let mut bad_version = blob.clone();
        bad_version[4] = 9;
        assert_eq!(
            Mlp::from_bytes(&bad_version).unwrap_err(),
            Error::Malformed("unsupported version")
        );

        let truncated = &blob[..blob.len() - 5];
        assert_eq!(
            Mlp::from_bytes(truncated).unwrap_err(),
            Error::Malformed("truncated payload")
        );

        let mut trailing = blob.clone();
        trailing.push(0);
        assert_eq!(
            Mlp::from_bytes(&trailing).unwrap_err(),
            Error::Malformed("trailing bytes")
        );

        assert_eq!(
            Mlp::from_bytes(&[]).unwrap_err(),
            Error::Malformed("truncated payload")
        );
    }

    proptest! {
        #[test]
        fn round_trip_arbitrary_shapes(
            seed in 0u64..1000,
            a in 1usize..6,
            b in 1usize..6,
            c in 1usize..6,
        ) {
            let net = Mlp::new(&[a, b, c], &mut rng::stream(seed, 0)).unwrap();
            prop_assert_eq!(Mlp::from_bytes(&net.to_bytes()).unwrap(), net);
        }
    }
}
