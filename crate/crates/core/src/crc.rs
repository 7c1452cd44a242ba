//! CRC-8 with zero initial value and zero final XOR, processed
//! most-significant bit first without reflection.
//!
//! Zero initialisation keeps the checksum XOR-linear, which both the
//! correction search (syndrome arithmetic) and the false-positive analysis
//! rely on.

use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CrcError {
    #[error("codeword length {0} must exceed the 8 checksum bits")]
    TooShort(usize),
    #[error("codeword length {0} too long for exact weight counts (max 135)")]
    TooLong(usize),
}

/// Generator polynomial of a CRC-8: `x^8` plus the low eight bits in
/// `divisor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrcSpec {
    divisor: u8,
}

impl Default for CrcSpec {
    fn default() -> Self {
        Self::E7
    }
}

impl CrcSpec {
    /// Generator `0x1E7`.
    pub const E7: CrcSpec = CrcSpec { divisor: 0xE7 };

    pub const fn new(divisor: u8) -> Self {
        Self { divisor }
    }

    pub fn divisor(&self) -> u8 {
        self.divisor
    }

    /// Full degree-8 generator with the implicit leading term.
    pub fn generator(&self) -> u16 {
        0x100 | self.divisor as u16
    }
}

/// Table-driven CRC-8 engine.
#[derive(Debug, Clone)]
pub struct Crc8 {
    spec: CrcSpec,
    table: [u8; 256],
}

static STANDARD: LazyLock<Crc8> = LazyLock::new(|| Crc8::new(CrcSpec::E7));
static CUSTOM: LazyLock<Mutex<HashMap<CrcSpec, &'static Crc8>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

impl Crc8 {
    pub fn new(spec: CrcSpec) -> Self {
        let mut table = [0u8; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut reg = i as u8;
            for _ in 0..8 {
                reg = if reg & 0x80 != 0 {
                    (reg << 1) ^ spec.divisor
                } else {
                    reg << 1
                };
            }
            *slot = reg;
        }
        Self { spec, table }
    }

    /// Engine for the default `0xE7` divisor.
    pub fn standard() -> &'static Crc8 {
        &STANDARD
    }

    /// Shared engine for `spec`, built on first use.
    pub fn shared(spec: CrcSpec) -> &'static Crc8 {
        if spec == CrcSpec::E7 {
            return &STANDARD;
        }
        let mut cache = CUSTOM.lock().expect("crc cache poisoned");
        cache
            .entry(spec)
            .or_insert_with(|| Box::leak(Box::new(Crc8::new(spec))))
    }

    pub fn spec(&self) -> CrcSpec {
        self.spec
    }

    #[inline]
    fn step_bit(&self, reg: u8, bit: bool) -> u8 {
        let feedback = (reg >> 7 != 0) ^ bit;
        let reg = reg << 1;
        if feedback {
            reg ^ self.spec.divisor
        } else {
            reg
        }
    }

    /// Checksum of whole bytes.
    pub fn checksum(&self, bytes: &[u8]) -> u8 {
        bytes
            .iter()
            .fold(0u8, |reg, &b| self.table[(reg ^ b) as usize])
    }

    /// Checksum of an arbitrary bit sequence.
    pub fn checksum_bits<I: IntoIterator<Item = bool>>(&self, bits: I) -> u8 {
        bits.into_iter().fold(0u8, |reg, b| self.step_bit(reg, b))
    }

    /// Checksum of a run of `q`-bit symbols, each stored in one byte.
    pub fn checksum_symbols(&self, symbols: &[u8], q: u8) -> u8 {
        match q {
            8 => self.checksum(symbols),
            _ => self.checksum_bits(
                symbols
                    .iter()
                    .flat_map(|&s| (0..q).rev().map(move |i| s >> i & 1 == 1)),
            ),
        }
    }

    pub fn verify_symbols(&self, symbols: &[u8], q: u8, received: u8) -> bool {
        self.checksum_symbols(symbols, q) == received
    }

    pub fn verify_bits<I: IntoIterator<Item = bool>>(&self, bits: I, received: u8) -> bool {
        self.checksum_bits(bits) == received
    }

    /// `out[i]` is the checksum of the `nbits`-bit message whose only set bit
    /// is bit `i` (counting from the first transmitted bit). By linearity,
    /// flipping a set of message bits changes the checksum by the XOR of
    /// their entries.
    pub fn unit_syndromes(&self, nbits: usize) -> Vec<u8> {
        let mut out = vec![0u8; nbits];
        // the last message bit contributes x^8 mod G
        let mut reg = self.spec.divisor;
        for slot in out.iter_mut().rev() {
            *slot = reg;
            reg = self.step_bit(reg, false);
        }
        out
    }

    /// Number of valid `message || crc` codewords of each Hamming weight for
    /// codewords of `n_p` bits.
    ///
    /// Exhaustive over all messages when `n_p <= 32`, otherwise a dynamic
    /// program over the 256 register states.
    pub fn weight_distribution(&self, n_p: usize) -> Result<WeightDistribution, CrcError> {
        if n_p <= 8 {
            return Err(CrcError::TooShort(n_p));
        }
        if n_p > 135 {
            return Err(CrcError::TooLong(n_p));
        }
        if n_p <= 32 {
            Ok(self.weight_distribution_exhaustive(n_p))
        } else {
            Ok(self.weight_distribution_dp(n_p))
        }
    }

    /// Gray-code walk over every message; each step flips one message bit and
    /// XORs its syndrome into the running checksum.
    pub fn weight_distribution_exhaustive(&self, n_p: usize) -> WeightDistribution {
        let k = n_p - 8;
        assert!(k <= 24, "exhaustive enumeration limited to 24 message bits");
        let syn = self.unit_syndromes(k);
        let mut counts = vec![0u128; n_p + 1];
        let mut msg = 0u32;
        let mut crc = 0u8;
        counts[0] += 1;
        for i in 1u32..(1 << k) {
            let bit = i.trailing_zeros() as usize;
            msg ^= 1 << bit;
            // bit 0 of `msg` is the last transmitted message bit
            crc ^= syn[k - 1 - bit];
            counts[(msg.count_ones() + crc.count_ones()) as usize] += 1;
        }
        WeightDistribution {
            codeword_length: n_p,
            counts,
        }
    }

    pub fn weight_distribution_dp(&self, n_p: usize) -> WeightDistribution {
        let k = n_p - 8;
        // hist[reg][w]: messages so far with register `reg` and weight `w`
        let mut hist = vec![vec![0u128; k + 1]; 256];
        hist[0][0] = 1;
        for step in 0..k {
            let mut next = vec![vec![0u128; k + 1]; 256];
            for (reg, row) in hist.iter().enumerate() {
                for (w, &c) in row.iter().enumerate().take(step + 1) {
                    if c == 0 {
                        continue;
                    }
                    next[self.step_bit(reg as u8, false) as usize][w] += c;
                    next[self.step_bit(reg as u8, true) as usize][w + 1] += c;
                }
            }
            hist = next;
        }
        let mut counts = vec![0u128; n_p + 1];
        for (reg, row) in hist.iter().enumerate() {
            let extra = (reg as u8).count_ones() as usize;
            for (w, &c) in row.iter().enumerate() {
                counts[w + extra] += c;
            }
        }
        WeightDistribution {
            codeword_length: n_p,
            counts,
        }
    }
}

/// `counts[w]` valid codewords of Hamming weight `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightDistribution {
    pub codeword_length: usize,
    pub counts: Vec<u128>,
}

impl WeightDistribution {
    pub fn count(&self, w: usize) -> u128 {
        self.counts.get(w).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().sum()
    }

    /// Smallest nonzero weight with a valid codeword.
    pub fn min_distance(&self) -> Option<usize> {
        (1..self.counts.len()).find(|&w| self.counts[w] > 0)
    }
}
