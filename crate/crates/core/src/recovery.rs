//! Partial-packet recovery: error-location estimation from dependent
//! groups, correction by bit-flip search checked against segment CRCs, and
//! dependency discovery among sparse-coded packets.

use thiserror::Error;

use crate::codec::{CodedPacket, GenerationConfig};
use crate::galois::{Field, FieldMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecoveryError {
    #[error("elimination produced no zero-coefficient row")]
    NoDependentRow,
    #[error("search exhausted after {trials} trials")]
    Exhausted { trials: u64 },
    #[error("segment fails its CRC but has no suspect columns")]
    NoSuspects,
    #[error("invalid recovery config: {0}")]
    Config(String),
}

/// Valid (OCRC-verified or recovered) and invalid received packets.
#[derive(Debug, Clone, Default)]
pub struct PacketBuffers {
    pub valid: Vec<CodedPacket>,
    pub invalid: Vec<CodedPacket>,
}

impl PacketBuffers {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files the packet by its outer CRC; returns whether it was valid.
    pub fn insert(&mut self, packet: CodedPacket, cfg: &GenerationConfig) -> bool {
        let ok = packet.outer_ok(cfg);
        if ok {
            self.valid.push(packet);
        } else {
            self.invalid.push(packet);
        }
        ok
    }

    pub fn len(&self) -> usize {
        self.valid.len() + self.invalid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.valid.clear();
        self.invalid.clear();
    }

    /// Valid packets first, then invalid ones. Indices returned by
    /// [`find_dependent_group`] refer to this order.
    pub fn iter(&self) -> impl Iterator<Item = &CodedPacket> {
        self.valid.iter().chain(&self.invalid)
    }
}

/// Sorted symbol columns flagged as inconsistent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BrokenVector {
    columns: Vec<usize>,
}

impl BrokenVector {
    pub fn new(mut columns: Vec<usize>) -> Self {
        columns.sort_unstable();
        columns.dedup();
        Self { columns }
    }

    /// Nonzero positions of a symbol row.
    pub fn from_row(row: &[u8]) -> Self {
        Self {
            columns: row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn contains(&self, column: usize) -> bool {
        self.columns.binary_search(&column).is_ok()
    }

    /// Columns falling in segment `k`.
    pub fn in_segment(&self, cfg: &GenerationConfig, k: usize) -> &[usize] {
        let r = cfg.segment_range(k);
        let lo = self.columns.partition_point(|&c| c < r.start);
        let hi = self.columns.partition_point(|&c| c < r.end);
        &self.columns[lo..hi]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecoveryConfig {
    /// Largest number of bits flipped at once in a segment.
    pub max_flip_weight: usize,
    /// CRC evaluations allowed per segment.
    pub max_trials_per_segment: u64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            max_flip_weight: 3,
            max_trials_per_segment: 1 << 20,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<(), RecoveryError> {
        if self.max_flip_weight == 0 || self.max_trials_per_segment == 0 {
            return Err(RecoveryError::Config(
                "max_flip_weight and max_trials_per_segment must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn reception_rows<'a>(packets: impl IntoIterator<Item = &'a CodedPacket>) -> Vec<Vec<u8>> {
    packets
        .into_iter()
        .map(|p| {
            let mut row = p.coefficients.clone();
            row.extend_from_slice(&p.symbols);
            row
        })
        .collect()
}

/// Locates inconsistent columns of a received dependent group.
///
/// Eliminates `[coefficients | symbols]` pivoting only in the coefficient
/// block; the symbol part of the zero-coefficient row(s) flags the columns.
pub fn estimate(
    group: &[CodedPacket],
    cfg: &GenerationConfig,
) -> Result<BrokenVector, RecoveryError> {
    if group.is_empty() {
        return Err(RecoveryError::NoDependentRow);
    }
    let g = cfg.generation_size;
    let red = FieldMatrix::from_rows(&reception_rows(group))
        .rref(cfg.field(), 0..g, false)
        .map_err(|_| RecoveryError::NoDependentRow)?;
    let zero = red.zero_rows(0..g);
    if zero.is_empty() {
        return Err(RecoveryError::NoDependentRow);
    }
    let mut cols = Vec::new();
    for r in zero {
        cols.extend(
            red.matrix.row(r)[g..]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0)
                .map(|(i, _)| i),
        );
    }
    Ok(BrokenVector::new(cols))
}

/// A set of buffered packets found to be linearly dependent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependentSet {
    /// Indices into [`PacketBuffers::iter`] order.
    pub members: Vec<usize>,
    pub broken: BrokenVector,
}

/// Provenance-tracked elimination over all buffered packets. Returns the
/// first zero-coefficient row's contributing packets and its flagged
/// columns, or `None` when the buffered coefficient rows are independent.
pub fn find_dependent_group(
    buffers: &PacketBuffers,
    cfg: &GenerationConfig,
) -> Option<DependentSet> {
    if buffers.is_empty() {
        return None;
    }
    let g = cfg.generation_size;
    let red = FieldMatrix::from_rows(&reception_rows(buffers.iter()))
        .rref(cfg.field(), 0..g, true)
        .ok()?;
    let r = *red.zero_rows(0..g).first()?;
    let prov = red.provenance.as_ref().expect("tracked");
    Some(DependentSet {
        members: prov[r].iter().copied().collect(),
        broken: BrokenVector::from_row(&red.matrix.row(r)[g..]),
    })
}

/// Result of a successful segment search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub symbols: Vec<u8>,
    /// Number of bits flipped.
    pub weight: usize,
    pub trials: u64,
}

/// Calls `f` on each `k`-subset of `0..n` in lexicographic order until it
/// returns true. Returns the number of subsets visited and whether `f`
/// accepted one.
fn for_each_combination(
    n: usize,
    k: usize,
    budget: u64,
    mut f: impl FnMut(&[usize]) -> bool,
) -> (u64, bool) {
    if k > n || budget == 0 {
        return (0, false);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut visited = 0u64;
    loop {
        visited += 1;
        if f(&idx) {
            return (visited, true);
        }
        if visited == budget {
            return (visited, false);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return (visited, false);
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Searches bit-flip patterns over the suspect symbols of segment `k` until
/// the segment's inner CRC verifies.
///
/// Suspects are the columns of `broken` inside the segment. Patterns are
/// tried by increasing weight, and in lexicographic order of transmitted bit
/// position within a weight. A segment that already verifies is returned
/// unchanged with zero trials.
pub fn correct_segment(
    packet: &CodedPacket,
    k: usize,
    broken: &BrokenVector,
    cfg: &GenerationConfig,
    rcfg: &RecoveryConfig,
) -> Result<Correction, RecoveryError> {
    let crc = cfg.crc_engine();
    let q = cfg.q() as usize;
    let range = cfg.segment_range(k);
    let seg = &packet.symbols[range.clone()];
    let target = crc.checksum_symbols(seg, q as u8) ^ packet.inner_crcs[k];
    if target == 0 {
        return Ok(Correction {
            symbols: seg.to_vec(),
            weight: 0,
            trials: 0,
        });
    }
    let suspects = broken.in_segment(cfg, k);
    if suspects.is_empty() {
        return Err(RecoveryError::NoSuspects);
    }
    let unit = crc.unit_syndromes(seg.len() * q);
    // (symbol offset within segment, bit mask, syndrome), transmitted order
    let bits: Vec<(usize, u8, u8)> = suspects
        .iter()
        .flat_map(|&c| {
            let off = c - range.start;
            (0..q).map(move |b| (off, 1u8 << (q - 1 - b), off * q + b))
        })
        .map(|(off, mask, pos)| (off, mask, unit[pos]))
        .collect();

    let mut trials = 0u64;
    for w in 1..=rcfg.max_flip_weight.min(bits.len()) {
        let budget = rcfg.max_trials_per_segment - trials;
        let mut hit: Option<Vec<usize>> = None;
        let (visited, found) = for_each_combination(bits.len(), w, budget, |idx| {
            let s = idx.iter().fold(0u8, |acc, &i| acc ^ bits[i].2);
            if s == target {
                hit = Some(idx.to_vec());
                true
            } else {
                false
            }
        });
        trials += visited;
        if found {
            let mut symbols = seg.to_vec();
            for i in hit.expect("found") {
                symbols[bits[i].0] ^= bits[i].1;
            }
            return Ok(Correction {
                symbols,
                weight: w,
                trials,
            });
        }
        if trials >= rcfg.max_trials_per_segment {
            break;
        }
    }
    Err(RecoveryError::Exhausted { trials })
}

/// State of one packet after a recovery attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketStatus {
    /// Verified on arrival.
    Valid,
    /// Corrected by search and verified by its outer CRC.
    Recovered,
    /// Rebuilt from the other members of its dependency.
    Reconstructed,
    /// Still corrupted; discarded.
    Invalid,
}

impl PacketStatus {
    pub fn usable(self) -> bool {
        !matches!(self, PacketStatus::Invalid)
    }

    pub fn was_repaired(self) -> bool {
        matches!(self, PacketStatus::Recovered | PacketStatus::Reconstructed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepairOutcome {
    /// Members after repair, in input order. Repaired members carry
    /// recomputed CRCs; invalid members are as received.
    pub packets: Vec<CodedPacket>,
    pub status: Vec<PacketStatus>,
    pub trials: u64,
}

impl RepairOutcome {
    pub fn repaired(&self) -> impl Iterator<Item = (usize, &CodedPacket)> {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| s.was_repaired())
            .map(|(i, _)| (i, &self.packets[i]))
    }
}

/// Repairs members of a dependency `sum(lambda[i] * members[i]) = 0`.
///
/// With two or more invalid members every invalid packet is searched
/// segment by segment using `broken`; corrected packets must also pass their
/// outer CRC. Whenever a single member is left invalid it is rebuilt from
/// the others. Stops as soon as every member is usable.
pub fn repair_dependency(
    members: &[CodedPacket],
    lambda: &[u8],
    valid: &[bool],
    broken: &BrokenVector,
    cfg: &GenerationConfig,
    rcfg: &RecoveryConfig,
) -> RepairOutcome {
    let n = members.len();
    let mut packets = members.to_vec();
    let mut status: Vec<PacketStatus> = valid
        .iter()
        .map(|&v| {
            if v {
                PacketStatus::Valid
            } else {
                PacketStatus::Invalid
            }
        })
        .collect();
    let mut trials = 0u64;
    let invalid_count = |st: &[PacketStatus]| st.iter().filter(|s| !s.usable()).count();

    if invalid_count(&status) >= 2 {
        for j in 0..n {
            if status[j].usable() {
                continue;
            }
            if invalid_count(&status) <= 1 {
                break;
            }
            let mut candidate = packets[j].clone();
            let mut ok = true;
            for k in 0..cfg.segments {
                match correct_segment(&candidate, k, broken, cfg, rcfg) {
                    Ok(c) => {
                        trials += c.trials;
                        candidate.symbols[cfg.segment_range(k)].copy_from_slice(&c.symbols);
                    }
                    // left as received; the outer CRC decides
                    Err(RecoveryError::NoSuspects) => {}
                    Err(RecoveryError::Exhausted { trials: t }) => {
                        trials += t;
                        ok = false;
                        break;
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && candidate.outer_ok(cfg) {
                candidate.refresh_crcs(cfg);
                packets[j] = candidate;
                status[j] = PacketStatus::Recovered;
            }
        }
    }

    if invalid_count(&status) == 1 {
        let j = status
            .iter()
            .position(|s| !s.usable())
            .expect("one invalid");
        if lambda[j] != 0 {
            let f = cfg.field();
            let mut coef = vec![0u8; cfg.generation_size];
            let mut sym = vec![0u8; cfg.symbols_per_packet];
            for i in (0..n).filter(|&i| i != j) {
                f.axpy(&mut coef, lambda[i], &packets[i].coefficients);
                f.axpy(&mut sym, lambda[i], &packets[i].symbols);
            }
            let inv = f.inv_raw(lambda[j]);
            f.scale(&mut coef, inv);
            f.scale(&mut sym, inv);
            debug_assert_eq!(coef, packets[j].coefficients);
            packets[j] = CodedPacket::new(
                packets[j].group_id,
                packets[j].coefficients.clone(),
                sym,
                cfg,
            );
            status[j] = PacketStatus::Reconstructed;
        }
    }
    RepairOutcome {
        packets,
        status,
        trials,
    }
}

/// Recovery for one complete dependent group (`R` packets whose sum is
/// zero). Estimation runs only when at least two members are invalid.
pub fn recover_group(
    group: &[CodedPacket],
    cfg: &GenerationConfig,
    rcfg: &RecoveryConfig,
) -> RepairOutcome {
    let valid: Vec<bool> = group.iter().map(|p| p.outer_ok(cfg)).collect();
    let invalid = valid.iter().filter(|v| !**v).count();
    let broken = if invalid >= 2 {
        estimate(group, cfg).unwrap_or_default()
    } else {
        BrokenVector::default()
    };
    repair_dependency(group, &vec![1u8; group.len()], &valid, &broken, cfg, rcfg)
}

#[derive(Debug, Clone)]
struct TrackedRow {
    coefficients: Vec<u8>,
    // combination over packet ids producing this row
    combination: Vec<u8>,
}

/// Incremental form of dependency discovery. Keeps a reduced basis of the
/// coefficient vectors seen so far, each row remembering which packets it
/// was built from. A packet whose coefficients fall in the span yields a
/// relation over packet ids.
#[derive(Debug, Clone)]
pub struct DependencyTracker {
    field: &'static Field,
    width: usize,
    rows: Vec<TrackedRow>,
    pivot_row: Vec<Option<usize>>,
}

fn axpy_grow(field: &Field, dst: &mut Vec<u8>, c: u8, src: &[u8]) {
    if dst.len() < src.len() {
        dst.resize(src.len(), 0);
    }
    field.axpy(&mut dst[..src.len()], c, src);
}

impl DependencyTracker {
    pub fn new(field: &'static Field, width: usize) -> Self {
        Self {
            field,
            width,
            rows: Vec::new(),
            pivot_row: vec![None; width],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Adds packet `id`'s coefficients. Returns `(id, lambda)` pairs with
    /// nonzero `lambda` summing the coefficient vectors to zero when the new
    /// vector is dependent, `None` otherwise.
    pub fn push(&mut self, id: usize, coefficients: &[u8]) -> Option<Vec<(usize, u8)>> {
        let f = self.field;
        let mut v = coefficients.to_vec();
        let mut comb = vec![0u8; id + 1];
        comb[id] = 1;
        for c in 0..self.width {
            if v[c] != 0 {
                if let Some(r) = self.pivot_row[c] {
                    let s = v[c];
                    let row = &self.rows[r];
                    f.axpy(&mut v, s, &row.coefficients);
                    axpy_grow(f, &mut comb, s, &row.combination);
                }
            }
        }
        let Some(pivot) = v.iter().position(|&x| x != 0) else {
            return Some(
                comb.iter()
                    .enumerate()
                    .filter(|(_, &l)| l != 0)
                    .map(|(i, &l)| (i, l))
                    .collect(),
            );
        };
        let inv = f.inv_raw(v[pivot]);
        f.scale(&mut v, inv);
        f.scale(&mut comb, inv);
        for row in &mut self.rows {
            let s = row.coefficients[pivot];
            if s != 0 {
                f.axpy(&mut row.coefficients, s, &v);
                axpy_grow(f, &mut row.combination, s, &comb);
            }
        }
        self.pivot_row[pivot] = Some(self.rows.len());
        self.rows.push(TrackedRow {
            coefficients: v,
            combination: comb,
        });
        None
    }
}
