use std::ops::Range;

use super::{CodecError, CodedPacket, GenerationConfig};

/// Bit-exact wire format of a coded packet, most significant bit first:
///
/// ```text
/// [group_id:16][coefficients: g*q][segment 0: (l/s)*q | ICRC 8] ... [OCRC 8]
/// ```
///
/// Everything after the coefficients is the channel-exposed region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketLayout {
    pub generation_size: usize,
    pub symbols_per_packet: usize,
    pub segments: usize,
    pub q: u8,
}

struct BitWriter {
    bytes: Vec<u8>,
    len: usize,
}

impl BitWriter {
    fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: vec![0; bits.div_ceil(8)],
            len: 0,
        }
    }

    fn put(&mut self, value: u32, width: u8) {
        for i in (0..width).rev() {
            if (value >> i) & 1 == 1 {
                self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
            }
            self.len += 1;
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn take(&mut self, width: u8) -> u32 {
        let mut v = 0u32;
        for _ in 0..width {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u32;
            self.pos += 1;
        }
        v
    }
}

impl PacketLayout {
    pub fn new(cfg: &GenerationConfig) -> Self {
        Self {
            generation_size: cfg.generation_size,
            symbols_per_packet: cfg.symbols_per_packet,
            segments: cfg.segments,
            q: cfg.q(),
        }
    }

    fn segment_len(&self) -> usize {
        self.symbols_per_packet / self.segments
    }

    pub fn header_bits(&self) -> usize {
        16 + self.generation_size * self.q as usize
    }

    /// Bits in one segment plus its ICRC (`N_p`).
    pub fn segment_bits(&self) -> usize {
        self.segment_len() * self.q as usize + 8
    }

    pub fn protected_bits(&self) -> usize {
        self.segments * self.segment_bits() + 8
    }

    pub fn total_bits(&self) -> usize {
        self.header_bits() + self.protected_bits()
    }

    pub fn total_bytes(&self) -> usize {
        self.total_bits().div_ceil(8)
    }

    /// Bit range the channel may corrupt.
    pub fn protected_range(&self) -> Range<usize> {
        self.header_bits()..self.total_bits()
    }

    pub fn serialize(&self, p: &CodedPacket) -> Vec<u8> {
        let q = self.q;
        let mut w = BitWriter::with_capacity(self.total_bits());
        w.put(p.group_id as u32, 16);
        for &c in &p.coefficients {
            w.put(c as u32, q);
        }
        for (k, seg) in p.symbols.chunks(self.segment_len()).enumerate() {
            for &s in seg {
                w.put(s as u32, q);
            }
            w.put(p.inner_crcs[k] as u32, 8);
        }
        w.put(p.outer_crc as u32, 8);
        debug_assert_eq!(w.len, self.total_bits());
        w.bytes
    }

    pub fn deserialize(&self, bytes: &[u8]) -> Result<CodedPacket, CodecError> {
        if bytes.len() != self.total_bytes() {
            return Err(CodecError::Malformed(format!(
                "expected {} bytes, got {}",
                self.total_bytes(),
                bytes.len()
            )));
        }
        let q = self.q;
        let mut r = BitReader { bytes, pos: 0 };
        let group_id = r.take(16) as u16;
        let coefficients = (0..self.generation_size).map(|_| r.take(q) as u8).collect();
        let mut symbols = Vec::with_capacity(self.symbols_per_packet);
        let mut inner_crcs = Vec::with_capacity(self.segments);
        for _ in 0..self.segments {
            for _ in 0..self.segment_len() {
                symbols.push(r.take(q) as u8);
            }
            inner_crcs.push(r.take(8) as u8);
        }
        let outer_crc = r.take(8) as u8;
        Ok(CodedPacket {
            group_id,
            coefficients,
            symbols,
            inner_crcs,
            outer_crc,
        })
    }
}
