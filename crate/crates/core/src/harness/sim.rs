use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::{
    CodingMode, Feedback, HarnessError, MetricsRow, RecoveryMode, ScenarioConfig, Topology,
    TrialRecord, Verification,
};
use crate::channel::{link, stream_rng, BinarySymmetricChannel};
use crate::codec::{
    decode, CodedPacket, CoefficientBasis, Encoder, GenerationConfig, OriginalPacket, PacketLayout,
};
use crate::recovery::{
    recover_group, repair_dependency, BrokenVector, DependencyTracker, RecoveryConfig,
};
use crate::relay::Relay;

/// All trials of one scenario and their averages.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub trials: Vec<TrialRecord>,
    pub metrics: MetricsRow,
}

enum Repair {
    Off,
    /// Buffer each dependent group and recover it when complete.
    Groups(BTreeMap<u16, Vec<CodedPacket>>),
    /// Look for a dependency after every arrival.
    Tracker {
        tracker: DependencyTracker,
        store: Vec<CodedPacket>,
        valid: Vec<bool>,
    },
}

struct Destination<'a> {
    gen: &'a GenerationConfig,
    rcfg: &'a RecoveryConfig,
    // true content of any coded packet, from its coefficients
    truth: Encoder,
    reject_false: bool,
    false_recoveries: usize,
    basis: CoefficientBasis,
    innovative: Vec<CodedPacket>,
    decode_times: Vec<usize>,
    repair: Repair,
    corrupted: usize,
    recovered: usize,
    search_trials: u64,
}

impl<'a> Destination<'a> {
    fn new(
        gen: &'a GenerationConfig,
        rcfg: &'a RecoveryConfig,
        truth: Encoder,
        reject_false: bool,
        repair: Repair,
    ) -> Self {
        Self {
            gen,
            rcfg,
            truth,
            reject_false,
            false_recoveries: 0,
            basis: CoefficientBasis::new(gen.field(), gen.generation_size),
            innovative: Vec::new(),
            decode_times: vec![0; gen.generation_size],
            repair,
            corrupted: 0,
            recovered: 0,
            search_trials: 0,
        }
    }

    fn done(&self) -> bool {
        self.basis.is_full()
    }

    fn accept(&mut self, p: CodedPacket, t: usize) {
        if let Some(newly) = self.basis.insert(&p.coefficients) {
            for i in newly {
                self.decode_times[i] = t;
            }
            self.innovative.push(p);
        }
    }

    fn receive(&mut self, p: CodedPacket, t: usize) {
        let ok = p.outer_ok(self.gen);
        if !ok {
            self.corrupted += 1;
        } else {
            self.accept(p.clone(), t);
        }
        let mut repaired = Vec::new();
        match &mut self.repair {
            Repair::Off => {}
            Repair::Groups(groups) => {
                let id = p.group_id;
                let buf = groups.entry(id).or_default();
                buf.push(p);
                if buf.len() == self.gen.packets_per_group() {
                    let grp = groups.remove(&id).expect("present");
                    let out = recover_group(&grp, self.gen, self.rcfg);
                    self.search_trials += out.trials;
                    for (_, q) in out.repaired() {
                        if self.truth.combine(&q.coefficients) != q.symbols {
                            self.false_recoveries += 1;
                            if self.reject_false {
                                continue;
                            }
                        }
                        repaired.push(q.clone());
                    }
                }
            }
            Repair::Tracker {
                tracker,
                store,
                valid,
            } => {
                let id = store.len();
                store.push(p);
                valid.push(ok);
                if let Some(rel) = tracker.push(id, &store[id].coefficients) {
                    let flags: Vec<bool> = rel.iter().map(|&(i, _)| valid[i]).collect();
                    let invalid = flags.iter().filter(|v| !**v).count();
                    if invalid > 0 {
                        let f = self.gen.field();
                        let members: Vec<CodedPacket> =
                            rel.iter().map(|&(i, _)| store[i].clone()).collect();
                        let lambda: Vec<u8> = rel.iter().map(|&(_, l)| l).collect();
                        let broken = if invalid >= 2 {
                            let mut sum = vec![0u8; self.gen.symbols_per_packet];
                            for (m, &l) in members.iter().zip(&lambda) {
                                f.axpy(&mut sum, l, &m.symbols);
                            }
                            BrokenVector::from_row(&sum)
                        } else {
                            BrokenVector::default()
                        };
                        let out = repair_dependency(
                            &members, &lambda, &flags, &broken, self.gen, self.rcfg,
                        );
                        self.search_trials += out.trials;
                        for (k, q) in out.repaired() {
                            if self.truth.combine(&q.coefficients) != q.symbols {
                                self.false_recoveries += 1;
                                if self.reject_false {
                                    continue;
                                }
                            }
                            let i = rel[k].0;
                            store[i] = q.clone();
                            valid[i] = true;
                            repaired.push(q.clone());
                        }
                    }
                }
            }
        }
        for q in repaired {
            if self.truth.combine(&q.coefficients) == q.symbols {
                self.recovered += 1;
            }
            self.accept(q, t);
        }
    }
}

struct TrialSetup {
    originals: Vec<OriginalPacket>,
    encoder: Encoder,
    source: rand_chacha::ChaCha8Rng,
    hop1: BinarySymmetricChannel,
}

fn setup(
    sc: &ScenarioConfig,
    gen: &GenerationConfig,
    trial: usize,
) -> Result<TrialSetup, HarnessError> {
    let t = trial as u64;
    let originals = OriginalPacket::random_generation(gen, &mut stream_rng(sc.seed, t, link::DATA));
    let encoder = Encoder::new(&originals, gen)?;
    Ok(TrialSetup {
        originals,
        encoder,
        source: stream_rng(sc.seed, t, link::SOURCE),
        hop1: BinarySymmetricChannel::with_rng(sc.epsilon, stream_rng(sc.seed, t, link::HOP1))?,
    })
}

fn finish(
    trial: usize,
    t: usize,
    dest: Destination,
    originals: &[OriginalPacket],
    compute: Option<f64>,
    counts: Option<(usize, usize, usize)>,
) -> TrialRecord {
    let started = Instant::now();
    let decoded_ok = decode(&dest.innovative, dest.gen).is_ok_and(|d| d == originals);
    let compute = compute.map(|c| c + started.elapsed().as_secs_f64());
    let (corrupted, recovered, false_recoveries) =
        counts.unwrap_or((dest.corrupted, dest.recovered, dest.false_recoveries));
    TrialRecord {
        trial,
        total_transmissions: t,
        corrupted,
        recovered,
        false_recoveries,
        decode_times: dest.decode_times,
        search_trials: dest.search_trials,
        compute_secs: compute,
        decoded_ok,
    }
}

fn single_hop_trial(
    sc: &ScenarioConfig,
    gen: &GenerationConfig,
    rcfg: &RecoveryConfig,
    repair: Repair,
    trial: usize,
) -> Result<TrialRecord, HarnessError> {
    let lay = PacketLayout::new(gen);
    let mut st = setup(sc, gen, trial)?;
    let reject = sc.verification == Verification::Oracle;
    let mut dest = Destination::new(gen, rcfg, st.encoder.clone(), reject, repair);
    let mut compute = sc.timing.then_some(0.0);
    let mut t = 0usize;
    'run: loop {
        for p in st.encoder.next_group(&mut st.source).packets {
            t += 1;
            let rx = st.hop1.transmit_packet(&p, &lay);
            let started = Instant::now();
            dest.receive(rx, t);
            if let Some(c) = compute.as_mut() {
                *c += started.elapsed().as_secs_f64();
            }
            if dest.done() && sc.feedback == Feedback::Packet {
                break 'run;
            }
        }
        if dest.done() {
            break;
        }
        if t >= sc.max_transmissions {
            return Err(HarnessError::NoConvergence {
                trial,
                limit: sc.max_transmissions,
            });
        }
    }
    Ok(finish(trial, t, dest, &st.originals, compute, None))
}

fn two_hop_trial(
    sc: &ScenarioConfig,
    gen: &GenerationConfig,
    rcfg: &RecoveryConfig,
    trial: usize,
) -> Result<TrialRecord, HarnessError> {
    let lay = PacketLayout::new(gen);
    let mut st = setup(sc, gen, trial)?;
    let tr = trial as u64;
    let mut hop2 =
        BinarySymmetricChannel::with_rng(sc.epsilon_hop2(), stream_rng(sc.seed, tr, link::HOP2))?;
    let mut relay = Relay::new(
        sc.relay_config(),
        gen.clone(),
        *rcfg,
        stream_rng(sc.seed, tr, link::RELAY),
    );
    let reject = sc.verification == Verification::Oracle;
    let truth = st.encoder.clone();
    let wrong = std::cell::Cell::new(0usize);
    let check = |p: &CodedPacket| {
        let ok = truth.combine(&p.coefficients) == p.symbols;
        if !ok {
            wrong.set(wrong.get() + 1);
        }
        ok || !reject
    };
    let mut dest = Destination::new(gen, rcfg, truth.clone(), reject, Repair::Off);
    let mut compute = sc.timing.then_some(0.0);
    let mut t = 0usize;
    'run: loop {
        for p in st.encoder.next_group(&mut st.source).packets {
            t += 1;
            let rx = st.hop1.transmit_packet(&p, &lay);
            let started = Instant::now();
            let out = relay.on_receive_checked(rx, &check);
            if let Some(c) = compute.as_mut() {
                *c += started.elapsed().as_secs_f64();
            }
            for o in out {
                t += 1;
                dest.receive(hop2.transmit_packet(&o, &lay), t);
                if dest.done() && sc.feedback == Feedback::Packet {
                    break 'run;
                }
            }
        }
        if dest.done() {
            break;
        }
        if t >= sc.max_transmissions {
            return Err(HarnessError::NoConvergence {
                trial,
                limit: sc.max_transmissions,
            });
        }
    }
    let stats = relay.stats();
    let correct = stats.recovered + stats.rejected - wrong.get();
    Ok(finish(
        trial,
        t,
        dest,
        &st.originals,
        compute,
        Some((stats.corrupted, correct, wrong.get())),
    ))
}

fn run_trials<F>(
    sc: &ScenarioConfig,
    gen: &GenerationConfig,
    f: F,
) -> Result<Simulation, HarnessError>
where
    F: Fn(usize) -> Result<TrialRecord, HarnessError> + Sync,
{
    let trials = (0..sc.trials)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<_>, _>>()?;
    let bits = PacketLayout::new(gen).total_bits();
    Ok(Simulation {
        config: sc.clone(),
        metrics: MetricsRow::from_trials(sc, bits, &trials),
        trials,
    })
}

fn prepare(sc: &ScenarioConfig) -> Result<(GenerationConfig, RecoveryConfig), HarnessError> {
    sc.validate()?;
    Ok((sc.generation()?, sc.recovery_config()))
}

/// Source and destination over one noisy link. With recovery enabled the
/// destination repairs each dependent group once all of its packets arrived.
pub fn run_point_to_point(sc: &ScenarioConfig) -> Result<Simulation, HarnessError> {
    if sc.topology != Topology::PointToPoint {
        return Err(HarnessError::Config(
            "point-to-point run needs that topology".into(),
        ));
    }
    let (gen, rcfg) = prepare(sc)?;
    let groups = sc.recovery == RecoveryMode::Fprac && gen.append_dependent;
    run_trials(sc, &gen, |t| {
        let repair = if groups {
            Repair::Groups(BTreeMap::new())
        } else {
            Repair::Off
        };
        single_hop_trial(sc, &gen, &rcfg, repair, t)
    })
}

/// Source, relay and destination. Both hops count towards the total; the
/// destination keeps only packets that verify.
pub fn run_two_hop(sc: &ScenarioConfig) -> Result<Simulation, HarnessError> {
    if sc.topology != Topology::TwoHop {
        return Err(HarnessError::Config(
            "two-hop run needs that topology".into(),
        ));
    }
    let (gen, rcfg) = prepare(sc)?;
    if !gen.append_dependent && sc.recovery == RecoveryMode::Fprac {
        return Err(HarnessError::Config(
            "relay recovery needs dependent rows".into(),
        ));
    }
    run_trials(sc, &gen, |t| two_hop_trial(sc, &gen, &rcfg, t))
}

/// Sparse coding over one link. With recovery enabled every arrival that
/// closes a linear dependency among received packets triggers a repair of
/// that dependency's partial members.
pub fn run_snc(sc: &ScenarioConfig) -> Result<Simulation, HarnessError> {
    if sc.mode != CodingMode::Snc || sc.topology != Topology::PointToPoint {
        return Err(HarnessError::Config(
            "sparse run needs snc mode over one link".into(),
        ));
    }
    let (gen, rcfg) = prepare(sc)?;
    run_trials(sc, &gen, |t| {
        let repair = match sc.recovery {
            RecoveryMode::Fprac => Repair::Tracker {
                tracker: DependencyTracker::new(gen.field(), gen.generation_size),
                store: Vec::new(),
                valid: Vec::new(),
            },
            RecoveryMode::Disabled => Repair::Off,
        };
        single_hop_trial(sc, &gen, &rcfg, repair, t)
    })
}

/// Dispatches on topology and mode.
pub fn run(sc: &ScenarioConfig) -> Result<Simulation, HarnessError> {
    match (sc.topology, sc.mode) {
        (Topology::TwoHop, _) => run_two_hop(sc),
        (Topology::PointToPoint, CodingMode::Snc) => run_snc(sc),
        (Topology::PointToPoint, CodingMode::Dense) => run_point_to_point(sc),
    }
}
