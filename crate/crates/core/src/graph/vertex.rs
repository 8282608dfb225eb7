use std::fmt;

use crate::error::{Error, Result};
use crate::rng::absorb;

/// Largest lattice dimension a [`VertexId`] can carry.
pub const MAX_DIM: usize = 4;

/// Lattice point; coordinates beyond the family's dimension are zero.
pub type Point = [i32; MAX_DIM];

const TAG_LATTICE: u8 = 0;
const TAG_SPINE: u8 = 1;
const TAG_HAIR: u8 = 2;

/// Length of the fixed-width byte encoding of any vertex.
pub const ENCODED_LEN: usize = 1 + 4 * MAX_DIM;

/// A vertex of one of the supported infinite graphs.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexId {
    /// Point of `Z^d`.
    Lattice(Point),
    /// Vertex `i` of the half-line spine `{0, 1, 2, ...}`.
    Spine(u64),
    /// Pendant vertex `index` (1-based) hanging off the `anchor`-th (1-based) anchor.
    Hair { anchor: u32, index: u32 },
}

impl VertexId {
    pub const fn origin() -> Self {
        VertexId::Lattice([0; MAX_DIM])
    }

    /// Lattice point from up to [`MAX_DIM`] coordinates.
    pub fn lattice(coords: &[i32]) -> Self {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates");
        let mut p = [0; MAX_DIM];
        p[..coords.len()].copy_from_slice(coords);
        VertexId::Lattice(p)
    }

    pub fn point(&self) -> Option<&Point> {
        match self {
            VertexId::Lattice(p) => Some(p),
            _ => None,
        }
    }

    /// Fixed-width byte encoding: tag byte followed by little-endian fields, zero padded.
    pub fn encode(&self) -> [u8; ENCODED_LEN] {
        let mut out = [0u8; ENCODED_LEN];
        match *self {
            VertexId::Lattice(p) => {
                out[0] = TAG_LATTICE;
                for (i, c) in p.iter().enumerate() {
                    out[1 + 4 * i..5 + 4 * i].copy_from_slice(&c.to_le_bytes());
                }
            }
            VertexId::Spine(i) => {
                out[0] = TAG_SPINE;
                out[1..9].copy_from_slice(&i.to_le_bytes());
            }
            VertexId::Hair { anchor, index } => {
                out[0] = TAG_HAIR;
                out[1..5].copy_from_slice(&anchor.to_le_bytes());
                out[5..9].copy_from_slice(&index.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != ENCODED_LEN {
            return Err(Error::InvalidArgument(format!(
                "vertex encoding must be {ENCODED_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let word32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let padding_clear = |from: usize| bytes[from..].iter().all(|&b| b == 0);
        match bytes[0] {
            TAG_LATTICE => {
                let mut p = [0; MAX_DIM];
                for (i, c) in p.iter_mut().enumerate() {
                    *c = word32(1 + 4 * i) as i32;
                }
                Ok(VertexId::Lattice(p))
            }
            TAG_SPINE if padding_clear(9) => {
                Ok(VertexId::Spine(u64::from_le_bytes(bytes[1..9].try_into().unwrap())))
            }
            TAG_HAIR if padding_clear(9) => Ok(VertexId::Hair { anchor: word32(1), index: word32(5) }),
            tag => Err(Error::InvalidArgument(format!("bad vertex encoding (tag {tag})"))),
        }
    }

    /// Folds the vertex into a hash key; injective up to the 64-bit mixing.
    #[inline]
    pub(crate) fn absorb_into(&self, key: u64) -> u64 {
        match *self {
            VertexId::Lattice(p) => {
                let lo = (p[0] as u32 as u64) | ((p[1] as u32 as u64) << 32);
                let hi = (p[2] as u32 as u64) | ((p[3] as u32 as u64) << 32);
                absorb(absorb(key, lo), hi)
            }
            VertexId::Spine(i) => absorb(absorb(key ^ 0x5151, i), u64::MAX),
            VertexId::Hair { anchor, index } => {
                absorb(absorb(key ^ 0xa1a1, ((anchor as u64) << 32) | index as u64), u64::MAX - 1)
            }
        }
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexId::Lattice(p) => write!(f, "({},{},{},{})", p[0], p[1], p[2], p[3]),
            VertexId::Spine(i) => write!(f, "spine {i}"),
            VertexId::Hair { anchor, index } => write!(f, "hair {anchor}.{index}"),
        }
    }
}

/// Undirected edge stored with its endpoints in canonical (ascending) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    lo: VertexId,
    hi: VertexId,
}

impl Edge {
    pub fn new(u: VertexId, v: VertexId) -> Result<Self> {
        if u == v {
            return Err(Error::InvalidEdge(format!("self-loop at {u}")));
        }
        Ok(Self::canonical(u, v))
    }

    #[inline]
    pub(crate) fn canonical(u: VertexId, v: VertexId) -> Self {
        if u < v {
            Edge { lo: u, hi: v }
        } else {
            Edge { lo: v, hi: u }
        }
    }

    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.lo, self.hi)
    }

    pub fn touches(&self, v: &VertexId) -> bool {
        self.lo == *v || self.hi == *v
    }

    pub fn other(&self, v: &VertexId) -> Option<VertexId> {
        if self.lo == *v {
            Some(self.hi)
        } else if self.hi == *v {
            Some(self.lo)
        } else {
            None
        }
    }
}
