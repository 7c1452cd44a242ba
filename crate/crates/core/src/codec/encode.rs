use rand::seq::index::sample;
use rand::Rng;

use super::{
    CodecError, CodedPacket, CoefficientBasis, DependentGroup, GenerationConfig, OriginalPacket,
};

/// Draws one coefficient vector: uniform over the field in dense mode, or
/// exactly `w` nonzeros at uniformly chosen positions in sparse mode.
pub fn draw_coefficients<R: Rng + ?Sized>(cfg: &GenerationConfig, rng: &mut R) -> Vec<u8> {
    let f = cfg.field();
    let g = cfg.generation_size;
    match cfg.sparsity {
        None => (0..g).map(|_| f.random(rng)).collect(),
        Some(w) => {
            let mut row = vec![0u8; g];
            for pos in sample(rng, g, w) {
                row[pos] = f.random_nonzero(rng);
            }
            row
        }
    }
}

/// Holds one generation and emits dependent groups on demand.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: GenerationConfig,
    // g x l, row-major
    data: Vec<u8>,
    next_group: u16,
}

impl Encoder {
    pub fn new(originals: &[OriginalPacket], cfg: &GenerationConfig) -> Result<Self, CodecError> {
        cfg.validate()?;
        if originals.len() != cfg.generation_size {
            return Err(CodecError::Config(format!(
                "expected {} originals, got {}",
                cfg.generation_size,
                originals.len()
            )));
        }
        let order = cfg.field.order();
        let mut data = Vec::with_capacity(cfg.generation_size * cfg.symbols_per_packet);
        for p in originals {
            if p.symbols.len() != cfg.symbols_per_packet {
                return Err(CodecError::Config(format!(
                    "original has {} symbols, expected {}",
                    p.symbols.len(),
                    cfg.symbols_per_packet
                )));
            }
            if p.symbols.iter().any(|&s| s as usize >= order) {
                return Err(CodecError::Config("symbol outside the field".into()));
            }
            data.extend_from_slice(&p.symbols);
        }
        Ok(Self {
            cfg: cfg.clone(),
            data,
            next_group: 0,
        })
    }

    pub fn config(&self) -> &GenerationConfig {
        &self.cfg
    }

    fn original(&self, i: usize) -> &[u8] {
        let l = self.cfg.symbols_per_packet;
        &self.data[i * l..(i + 1) * l]
    }

    /// `coefficients x P`.
    pub fn combine(&self, coefficients: &[u8]) -> Vec<u8> {
        let f = self.cfg.field();
        let mut out = vec![0u8; self.cfg.symbols_per_packet];
        for (i, &c) in coefficients.iter().enumerate() {
            f.axpy(&mut out, c, self.original(i));
        }
        out
    }

    /// Next group with random coefficients. The first `R - 1` rows are
    /// redrawn until mutually independent.
    pub fn next_group<R: Rng + ?Sized>(&mut self, rng: &mut R) -> DependentGroup {
        let cfg = &self.cfg;
        let mut basis = CoefficientBasis::new(cfg.field(), cfg.generation_size);
        let rows: Vec<Vec<u8>> = (0..cfg.group_size - 1)
            .map(|_| loop {
                let row = draw_coefficients(cfg, rng);
                if basis.insert(&row).is_some() {
                    break row;
                }
            })
            .collect();
        self.group_from_rows(rows)
            .expect("rows drawn from the configured generation")
    }

    /// Builds a group from explicit rows for the first `R - 1` packets.
    pub fn group_from_rows(&mut self, rows: Vec<Vec<u8>>) -> Result<DependentGroup, CodecError> {
        let cfg = &self.cfg;
        if rows.len() != cfg.group_size - 1 {
            return Err(CodecError::Config(format!(
                "expected {} coefficient rows, got {}",
                cfg.group_size - 1,
                rows.len()
            )));
        }
        if rows.iter().any(|r| r.len() != cfg.generation_size) {
            return Err(CodecError::Config("coefficient row has wrong width".into()));
        }
        let id = self.next_group;
        self.next_group = self.next_group.wrapping_add(1);
        let mut packets: Vec<CodedPacket> = rows
            .into_iter()
            .map(|c| {
                let symbols = self.combine(&c);
                CodedPacket::new(id, c, symbols, cfg)
            })
            .collect();
        if cfg.append_dependent {
            let mut coef = vec![0u8; cfg.generation_size];
            let mut sym = vec![0u8; cfg.symbols_per_packet];
            for p in &packets {
                coef.iter_mut()
                    .zip(&p.coefficients)
                    .for_each(|(a, b)| *a ^= b);
                sym.iter_mut().zip(&p.symbols).for_each(|(a, b)| *a ^= b);
            }
            packets.push(CodedPacket::new(id, coef, sym, cfg));
        }
        Ok(DependentGroup {
            group_id: id,
            packets,
        })
    }
}

/// One-shot group encoding.
pub fn encode_group<R: Rng + ?Sized>(
    originals: &[OriginalPacket],
    cfg: &GenerationConfig,
    group_id: u16,
    rng: &mut R,
) -> Result<DependentGroup, CodecError> {
    let mut enc = Encoder::new(originals, cfg)?;
    enc.next_group = group_id;
    Ok(enc.next_group(rng))
}
