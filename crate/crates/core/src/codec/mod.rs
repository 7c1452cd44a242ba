//! Dependent-group encoding for dense (RLNC) and sparse (SNC) network coding,
//! coded packet framing with per-segment and whole-packet CRCs, decoding and
//! recoding.

mod basis;
mod decode;
mod encode;
mod layout;

pub use basis::CoefficientBasis;
pub use decode::{decode, partial_decode, recode, recode_with};
pub use encode::{draw_coefficients, encode_group, Encoder};
pub use layout::PacketLayout;

use std::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::crc::{Crc8, CrcSpec};
use crate::galois::{Field, FieldSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("received rank {rank} is below generation size {generation_size}")]
    RankDeficient { rank: usize, generation_size: usize },
    #[error("cannot recode from an empty buffer")]
    EmptyBuffer,
    #[error("malformed packet: {0}")]
    Malformed(String),
}

/// Parameters shared by encoder, channel framing and decoder for one
/// generation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationConfig {
    /// Original packets per generation (`g`).
    pub generation_size: usize,
    /// Symbols per packet (`l`).
    pub symbols_per_packet: usize,
    /// Segments per packet (`s`); must divide `l`.
    pub segments: usize,
    /// Coded packets per dependent group (`R`).
    pub group_size: usize,
    pub field: FieldSpec,
    pub crc: CrcSpec,
    /// Nonzero coefficients per vector (`w`); `None` for dense coding.
    pub sparsity: Option<usize>,
    /// Append the GF-sum row that closes each group. When disabled each group
    /// is just `R - 1` independent coded packets.
    pub append_dependent: bool,
}

impl GenerationConfig {
    pub fn dense(g: usize, l: usize, s: usize, group_size: usize) -> Self {
        Self {
            generation_size: g,
            symbols_per_packet: l,
            segments: s,
            group_size,
            field: FieldSpec::GF256,
            crc: CrcSpec::E7,
            sparsity: None,
            append_dependent: true,
        }
    }

    pub fn sparse(g: usize, l: usize, s: usize, group_size: usize, w: usize) -> Self {
        Self {
            sparsity: Some(w),
            ..Self::dense(g, l, s, group_size)
        }
    }

    /// Plain coding without dependent rows: every packet is a fresh random
    /// combination.
    pub fn plain(g: usize, l: usize, s: usize) -> Self {
        Self {
            append_dependent: false,
            ..Self::dense(g, l, s, g + 1)
        }
    }

    pub fn with_field(mut self, field: FieldSpec) -> Self {
        self.field = field;
        self
    }

    pub fn with_sparsity(mut self, w: Option<usize>) -> Self {
        self.sparsity = w;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let (g, l, s, r) = (
            self.generation_size,
            self.symbols_per_packet,
            self.segments,
            self.group_size,
        );
        let fail = |m: String| Err(CodecError::Config(m));
        if g == 0 || l == 0 || s == 0 {
            return fail(format!("g={g}, l={l}, s={s} must all be positive"));
        }
        if g > u16::MAX as usize {
            return fail(format!("g={g} exceeds 65535"));
        }
        if l % s != 0 {
            return fail(format!("l={l} is not a multiple of s={s}"));
        }
        if r <= 2 || r > g + 1 {
            return fail(format!(
                "group size R={r} must satisfy 2 < R <= g+1 = {}",
                g + 1
            ));
        }
        if let Some(w) = self.sparsity {
            if w == 0 || w > g {
                return fail(format!("sparsity w={w} must satisfy 1 <= w <= g={g}"));
            }
            // Binary weight-w vectors span only the even-weight subspace for
            // even w, and a single vector for w = g.
            if self.field.q() == 1 && g > 1 && (w % 2 == 0 || w == g) {
                return fail(format!(
                    "over GF(2) sparsity w={w} cannot reach full rank; use odd w < g={g}"
                ));
            }
        }
        Ok(())
    }

    pub fn field(&self) -> &'static Field {
        Field::shared(self.field)
    }

    pub fn crc_engine(&self) -> &'static Crc8 {
        Crc8::shared(self.crc)
    }

    pub fn q(&self) -> u8 {
        self.field.q()
    }

    pub fn segment_len(&self) -> usize {
        self.symbols_per_packet / self.segments
    }

    pub fn segment_range(&self, k: usize) -> Range<usize> {
        let n = self.segment_len();
        k * n..(k + 1) * n
    }

    /// Segment index of a symbol column.
    pub fn segment_of(&self, column: usize) -> usize {
        column / self.segment_len()
    }

    /// Coded packets emitted per group.
    pub fn packets_per_group(&self) -> usize {
        if self.append_dependent {
            self.group_size
        } else {
            self.group_size - 1
        }
    }

    /// Payload bits carried by one packet (`l * q`).
    pub fn payload_bits(&self) -> usize {
        self.symbols_per_packet * self.q() as usize
    }
}

/// One of the `g` source packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginalPacket {
    pub symbols: Vec<u8>,
}

impl OriginalPacket {
    pub fn new(symbols: Vec<u8>) -> Self {
        Self { symbols }
    }

    pub fn random<R: Rng + ?Sized>(cfg: &GenerationConfig, rng: &mut R) -> Self {
        let f = cfg.field();
        Self {
            symbols: (0..cfg.symbols_per_packet).map(|_| f.random(rng)).collect(),
        }
    }

    pub fn random_generation<R: Rng + ?Sized>(cfg: &GenerationConfig, rng: &mut R) -> Vec<Self> {
        (0..cfg.generation_size)
            .map(|_| Self::random(cfg, rng))
            .collect()
    }
}

/// A coded packet: coefficient vector, `l` coded symbols split into `s`
/// segments, one CRC per segment and one over all coded symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub group_id: u16,
    pub coefficients: Vec<u8>,
    pub symbols: Vec<u8>,
    pub inner_crcs: Vec<u8>,
    pub outer_crc: u8,
}

impl CodedPacket {
    /// Builds a packet and attaches freshly computed CRCs.
    pub fn new(
        group_id: u16,
        coefficients: Vec<u8>,
        symbols: Vec<u8>,
        cfg: &GenerationConfig,
    ) -> Self {
        let mut p = Self {
            group_id,
            coefficients,
            symbols,
            inner_crcs: vec![0; cfg.segments],
            outer_crc: 0,
        };
        p.refresh_crcs(cfg);
        p
    }

    pub fn refresh_crcs(&mut self, cfg: &GenerationConfig) {
        let crc = cfg.crc_engine();
        let q = cfg.q();
        for k in 0..cfg.segments {
            self.inner_crcs[k] = crc.checksum_symbols(&self.symbols[cfg.segment_range(k)], q);
        }
        self.outer_crc = crc.checksum_symbols(&self.symbols, q);
    }

    pub fn segment(&self, cfg: &GenerationConfig, k: usize) -> &[u8] {
        &self.symbols[cfg.segment_range(k)]
    }

    /// Whether the outer CRC verifies the coded symbols.
    pub fn outer_ok(&self, cfg: &GenerationConfig) -> bool {
        cfg.crc_engine()
            .verify_symbols(&self.symbols, cfg.q(), self.outer_crc)
    }

    pub fn inner_ok(&self, cfg: &GenerationConfig, k: usize) -> bool {
        cfg.crc_engine()
            .verify_symbols(self.segment(cfg, k), cfg.q(), self.inner_crcs[k])
    }

    /// Every inner CRC and the outer CRC verify.
    pub fn self_consistent(&self, cfg: &GenerationConfig) -> bool {
        self.outer_ok(cfg) && (0..cfg.segments).all(|k| self.inner_ok(cfg, k))
    }

    /// Same coefficients and coded symbols; CRC bytes are ignored.
    pub fn same_content(&self, other: &CodedPacket) -> bool {
        self.coefficients == other.coefficients && self.symbols == other.symbols
    }
}

/// `R` coded packets whose rows sum to zero (when the dependent row is
/// appended).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependentGroup {
    pub group_id: u16,
    pub packets: Vec<CodedPacket>,
}
