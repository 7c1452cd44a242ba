use rand::Rng;

use super::{CodecError, CodedPacket, CoefficientBasis, GenerationConfig, OriginalPacket};
use crate::galois::FieldMatrix;

fn reception_matrix<'a, I>(packets: I, cfg: &GenerationConfig) -> FieldMatrix
where
    I: IntoIterator<Item = &'a CodedPacket>,
{
    let rows: Vec<Vec<u8>> = packets
        .into_iter()
        .map(|p| {
            let mut row = Vec::with_capacity(cfg.generation_size + cfg.symbols_per_packet);
            row.extend_from_slice(&p.coefficients);
            row.extend_from_slice(&p.symbols);
            row
        })
        .collect();
    FieldMatrix::from_rows(&rows)
}

/// Solves `C P = P'` for the originals. Redundant packets are skipped.
pub fn decode(
    packets: &[CodedPacket],
    cfg: &GenerationConfig,
) -> Result<Vec<OriginalPacket>, CodecError> {
    let g = cfg.generation_size;
    let mut basis = CoefficientBasis::new(cfg.field(), g);
    let chosen: Vec<&CodedPacket> = packets
        .iter()
        .filter(|p| !basis.is_full() && basis.insert(&p.coefficients).is_some())
        .collect();
    if chosen.len() < g {
        return Err(CodecError::RankDeficient {
            rank: chosen.len(),
            generation_size: g,
        });
    }
    let red = reception_matrix(chosen, cfg)
        .rref(cfg.field(), 0..g, false)
        .expect("nonempty matrix");
    Ok((0..g)
        .map(|i| OriginalPacket::new(red.matrix.row(i)[g..].to_vec()))
        .collect())
}

/// Originals recoverable from `packets` so far, as `(index, packet)` pairs in
/// index order.
pub fn partial_decode(
    packets: &[CodedPacket],
    cfg: &GenerationConfig,
) -> Vec<(usize, OriginalPacket)> {
    if packets.is_empty() {
        return Vec::new();
    }
    let g = cfg.generation_size;
    let red = reception_matrix(packets, cfg)
        .rref(cfg.field(), 0..g, false)
        .expect("nonempty matrix");
    let mut out: Vec<(usize, OriginalPacket)> = (0..red.rank)
        .filter_map(|r| {
            let row = red.matrix.row(r);
            let pivot = red.pivot_columns[r];
            row[..g]
                .iter()
                .enumerate()
                .all(|(c, &v)| c == pivot || v == 0)
                .then(|| (pivot, OriginalPacket::new(row[g..].to_vec())))
        })
        .collect();
    out.sort_by_key(|(i, _)| *i);
    out
}

/// Linear combination of `packets` with the given scalars; CRCs are computed
/// afresh. The group id of the first input is kept.
pub fn recode_with(
    packets: &[CodedPacket],
    scalars: &[u8],
    cfg: &GenerationConfig,
) -> Result<CodedPacket, CodecError> {
    let first = packets.first().ok_or(CodecError::EmptyBuffer)?;
    assert_eq!(packets.len(), scalars.len(), "one scalar per packet");
    let f = cfg.field();
    let mut coef = vec![0u8; cfg.generation_size];
    let mut sym = vec![0u8; cfg.symbols_per_packet];
    for (p, &c) in packets.iter().zip(scalars) {
        f.axpy(&mut coef, c, &p.coefficients);
        f.axpy(&mut sym, c, &p.symbols);
    }
    Ok(CodedPacket::new(first.group_id, coef, sym, cfg))
}

/// Random linear combination of `packets`; the scalar vector is redrawn if
/// it comes out all zero.
pub fn recode<R: Rng + ?Sized>(
    packets: &[CodedPacket],
    cfg: &GenerationConfig,
    rng: &mut R,
) -> Result<CodedPacket, CodecError> {
    if packets.is_empty() {
        return Err(CodecError::EmptyBuffer);
    }
    let f = cfg.field();
    let scalars = loop {
        let s: Vec<u8> = packets.iter().map(|_| f.random(rng)).collect();
        if s.iter().any(|&x| x != 0) {
            break s;
        }
    };
    recode_with(packets, &scalars, cfg)
}
