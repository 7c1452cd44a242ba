//! Intermediate node: buffers each dependent group, optionally recovers its
//! partial packets, and forwards recoded packets.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::codec::{recode, CodedPacket, GenerationConfig};
use crate::recovery::{recover_group, RecoveryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardPolicy {
    RecodeOnValid,
    StoreAndForward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayConfig {
    pub recovery_enabled: bool,
    pub recoding_enabled: bool,
    pub forward_policy: ForwardPolicy,
}

impl RelayConfig {
    /// Recover, then recode from valid and recovered packets.
    pub fn fprac() -> Self {
        Self {
            recovery_enabled: true,
            recoding_enabled: true,
            forward_policy: ForwardPolicy::RecodeOnValid,
        }
    }

    /// Recode from valid packets only; partial packets are dropped.
    pub fn recode_only() -> Self {
        Self {
            recovery_enabled: false,
            ..Self::fprac()
        }
    }

    /// Forward every packet as received, partial or not.
    pub fn store_and_forward() -> Self {
        Self {
            recovery_enabled: false,
            recoding_enabled: false,
            forward_policy: ForwardPolicy::StoreAndForward,
        }
    }
}

#[derive(Debug, Default, Clone)]
struct GroupBuffer {
    received: Vec<CodedPacket>,
    valid: Vec<CodedPacket>,
}

/// Counters accumulated by a relay.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct RelayStats {
    pub received: usize,
    pub corrupted: usize,
    pub recovered: usize,
    /// Repairs refused by the acceptance check.
    pub rejected: usize,
    pub forwarded: usize,
}

#[derive(Debug, Clone)]
pub struct Relay {
    cfg: RelayConfig,
    gen: GenerationConfig,
    recovery: RecoveryConfig,
    groups: BTreeMap<u16, GroupBuffer>,
    rng: ChaCha8Rng,
    stats: RelayStats,
}

impl Relay {
    pub fn new(
        cfg: RelayConfig,
        gen: GenerationConfig,
        recovery: RecoveryConfig,
        rng: ChaCha8Rng,
    ) -> Self {
        Self {
            cfg,
            gen,
            recovery,
            groups: BTreeMap::new(),
            rng,
            stats: RelayStats::default(),
        }
    }

    pub fn stats(&self) -> RelayStats {
        self.stats
    }

    /// Packets held for groups that have not completed yet.
    pub fn buffered(&self) -> usize {
        self.groups.values().map(|g| g.received.len()).sum()
    }

    fn emit(&mut self, group: u16, fallback: &CodedPacket) -> CodedPacket {
        let buf = &self.groups[&group];
        if self.cfg.recoding_enabled {
            recode(&buf.valid, &self.gen, &mut self.rng).expect("nonempty valid buffer")
        } else {
            fallback.clone()
        }
    }

    /// Handles one arriving packet and returns what to send downstream.
    pub fn on_receive(&mut self, packet: CodedPacket) -> Vec<CodedPacket> {
        self.on_receive_checked(packet, &|_| true)
    }

    /// As [`on_receive`](Self::on_receive), but a repaired packet is only
    /// used when `accept` approves it.
    pub fn on_receive_checked(
        &mut self,
        packet: CodedPacket,
        accept: &dyn Fn(&CodedPacket) -> bool,
    ) -> Vec<CodedPacket> {
        self.stats.received += 1;
        let valid = packet.outer_ok(&self.gen);
        if !valid {
            self.stats.corrupted += 1;
        }
        if self.cfg.forward_policy == ForwardPolicy::StoreAndForward {
            self.stats.forwarded += 1;
            return vec![packet];
        }

        let id = packet.group_id;
        let mut out = Vec::new();
        let buf = self.groups.entry(id).or_default();
        buf.received.push(packet.clone());
        if valid {
            buf.valid.push(packet.clone());
            out.push(self.emit(id, &packet));
        }

        if self.groups[&id].received.len() == self.gen.packets_per_group() {
            let buf = self.groups.remove(&id).expect("present");
            if self.cfg.recovery_enabled {
                let outcome = recover_group(&buf.received, &self.gen, &self.recovery);
                let mut valid = buf.valid;
                for (_, p) in outcome.repaired() {
                    if !accept(p) {
                        self.stats.rejected += 1;
                        continue;
                    }
                    self.stats.recovered += 1;
                    valid.push(p.clone());
                    out.push(if self.cfg.recoding_enabled {
                        recode(&valid, &self.gen, &mut self.rng).expect("nonempty")
                    } else {
                        p.clone()
                    });
                }
            }
        }
        self.stats.forwarded += out.len();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{stream_rng, BinarySymmetricChannel};
    use crate::codec::{Encoder, OriginalPacket, PacketLayout};
    use crate::galois::FieldMatrix;
    use rand::SeedableRng;

    fn setup(seed: u64) -> (GenerationConfig, Encoder, ChaCha8Rng) {
        let cfg = GenerationConfig::dense(12, 40, 4, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let orig = OriginalPacket::random_generation(&cfg, &mut rng);
        let enc = Encoder::new(&orig, &cfg).unwrap();
        (cfg, enc, rng)
    }

    #[test]
    fn store_and_forward_is_identity() {
        let (cfg, mut enc, mut rng) = setup(1);
        let lay = PacketLayout::new(&cfg);
        let mut relay = Relay::new(
            RelayConfig::store_and_forward(),
            cfg.clone(),
            RecoveryConfig::default(),
            stream_rng(1, 0, 3),
        );
        let mut ch = BinarySymmetricChannel::with_rng(0.01, stream_rng(1, 0, 1)).unwrap();
        for p in enc.next_group(&mut rng).packets {
            let rx = ch.transmit_packet(&p, &lay);
            assert_eq!(relay.on_receive(rx.clone()), vec![rx]);
        }
        assert_eq!(relay.buffered(), 0);
    }

    #[test]
    fn clean_group_yields_one_recoded_packet_per_arrival() {
        let (cfg, mut enc, mut rng) = setup(2);
        let mut relay = Relay::new(
            RelayConfig::fprac(),
            cfg.clone(),
            RecoveryConfig::default(),
            stream_rng(2, 0, 3),
        );
        let grp = enc.next_group(&mut rng).packets;
        let mut sent = Vec::new();
        for p in &grp {
            sent.extend(relay.on_receive(p.clone()));
        }
        assert_eq!(sent.len(), cfg.group_size);
        assert_eq!(relay.buffered(), 0);
        let f = cfg.field();
        let span: Vec<Vec<u8>> = grp.iter().map(|p| p.coefficients.clone()).collect();
        for r in &sent {
            assert!(r.self_consistent(&cfg));
            assert_eq!(r.symbols, enc.combine(&r.coefficients));
            let mut with = span.clone();
            with.push(r.coefficients.clone());
            assert_eq!(
                FieldMatrix::from_rows(&with).rank(f),
                FieldMatrix::from_rows(&span).rank(f)
            );
        }
    }

    #[test]
    fn recovery_adds_one_packet_per_recovered_member() {
        let (cfg, mut enc, mut rng) = setup(3);
        let grp = enc.next_group(&mut rng).packets;
        let mut rx = grp.clone();
        rx[0].symbols[2] ^= 0x10;
        rx[3].symbols[25] ^= 0x01;
        let run = |rc: RelayConfig| {
            let mut relay = Relay::new(
                rc,
                cfg.clone(),
                RecoveryConfig::default(),
                stream_rng(3, 0, 3),
            );
            let n: usize = rx.iter().map(|p| relay.on_receive(p.clone()).len()).sum();
            (n, relay.stats())
        };
        let (with, st) = run(RelayConfig::fprac());
        let (without, _) = run(RelayConfig::recode_only());
        assert_eq!(with, without + 2);
        assert_eq!(st.recovered, 2);
        assert_eq!(st.corrupted, 2);
    }
}
