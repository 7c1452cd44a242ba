//! Binary symmetric channel over the protected region of serialized packets.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::codec::{CodedPacket, PacketLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("bit error rate {0} is outside [0, 1]")]
    Epsilon(f64),
}

/// Link indices used when deriving per-link random streams.
pub mod link {
    pub const SOURCE: u64 = 0;
    pub const HOP1: u64 = 1;
    pub const HOP2: u64 = 2;
    pub const RELAY: u64 = 3;
    pub const DATA: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub epsilon: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ChannelError::Epsilon(epsilon));
        }
        Ok(Self { epsilon, seed })
    }
}

/// Independent ChaCha8 stream for `(master seed, trial, link)`.
pub fn stream_rng(master: u64, trial: u64, link: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((trial << 8) | (link & 0xFF));
    rng
}

/// Stateful BSC. Flip positions are drawn by geometric skipping, so the
/// cost is proportional to the number of flips rather than the bit count.
#[derive(Debug, Clone)]
pub struct BinarySymmetricChannel {
    epsilon: f64,
    gap: Option<Geometric>,
    rng: ChaCha8Rng,
}

impl BinarySymmetricChannel {
    pub fn new(cfg: ChannelConfig) -> Result<Self, ChannelError> {
        Self::with_rng(cfg.epsilon, ChaCha8Rng::seed_from_u64(cfg.seed))
    }

    pub fn with_rng(epsilon: f64, rng: ChaCha8Rng) -> Result<Self, ChannelError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ChannelError::Epsilon(epsilon));
        }
        let gap = (epsilon > 0.0 && epsilon < 1.0)
            .then(|| Geometric::new(epsilon).expect("0 < epsilon < 1"));
        Ok(Self { epsilon, gap, rng })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Sorted positions in `0..n` that the channel flips.
    pub fn flip_positions(&mut self, n: usize) -> Vec<usize> {
        if self.epsilon >= 1.0 {
            return (0..n).collect();
        }
        let Some(gap) = &self.gap else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut pos = 0u64;
        loop {
            pos = pos.saturating_add(gap.sample(&mut self.rng));
            if pos >= n as u64 {
                return out;
            }
            out.push(pos as usize);
            pos += 1;
        }
    }

    /// Number of flips in `n` bits.
    pub fn flip_count(&mut self, n: usize) -> usize {
        self.flip_positions(n).len()
    }

    /// Copies `bytes`, flipping each bit inside `range` (bit indices, MSB
    /// first) independently with probability epsilon.
    pub fn transmit(&mut self, bytes: &[u8], range: Range<usize>) -> Vec<u8> {
        let mut out = bytes.to_vec();
        for off in self.flip_positions(range.len()) {
            let bit = range.start + off;
            out[bit / 8] ^= 0x80 >> (bit % 8);
        }
        out
    }

    /// In-place equivalent of serialize, [`transmit`](Self::transmit) over
    /// the protected range, deserialize. Returns the number of flipped bits.
    pub fn corrupt(&mut self, packet: &mut CodedPacket, layout: &PacketLayout) -> usize {
        let flips = self.flip_positions(layout.protected_bits());
        for &off in &flips {
            flip_protected_bit(packet, layout, off);
        }
        flips.len()
    }

    pub fn transmit_packet(&mut self, packet: &CodedPacket, layout: &PacketLayout) -> CodedPacket {
        let mut p = packet.clone();
        self.corrupt(&mut p, layout);
        p
    }
}

/// Flips bit `offset` of the protected region of `p`.
pub fn flip_protected_bit(p: &mut CodedPacket, layout: &PacketLayout, offset: usize) {
    let q = layout.q as usize;
    let seg_len = layout.symbols_per_packet / layout.segments;
    let n_p = layout.segment_bits();
    let k = offset / n_p;
    if k >= layout.segments {
        p.outer_crc ^= 0x80 >> (offset - k * n_p);
        return;
    }
    let inner = offset % n_p;
    if inner < seg_len * q {
        let sym = k * seg_len + inner / q;
        p.symbols[sym] ^= 1 << (q - 1 - inner % q);
    } else {
        p.inner_crcs[k] ^= 0x80 >> (inner - seg_len * q);
    }
}
