//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). A FAIL line is reported, not
//! hidden; set `ACCEPTANCE_STRICT=1` to turn any FAIL into a nonzero exit.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flyprac::analysis::binomial;
use flyprac::channel::{stream_rng, BinarySymmetricChannel};
use flyprac::codec::{
    decode, CodedPacket, CoefficientBasis, Encoder, GenerationConfig, OriginalPacket, PacketLayout,
};
use flyprac::crc::{Crc8, CrcSpec};
use flyprac::galois::{Field, FieldSpec};
use flyprac::harness::validate::{self, Check, Scale};
use flyprac::harness::{
    run, sweep, CodingMode, Feedback, GridSpec, RecoveryMode, ScenarioConfig, Topology, TrialRecord,
};
use flyprac::recovery::{estimate, find_dependent_group, DependencyTracker, PacketBuffers};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn from_checks(checks: &[Check]) -> Outcome {
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
    let detail = checks
        .iter()
        .map(|c| format!("{} = {:.6e} (ref {:.6e})", c.name, c.value, c.reference))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(failed.is_empty(), detail)
}

fn analyze_column(args: &[&str], column: &str) -> Vec<f64> {
    let out = Command::new(env!("CARGO_BIN_EXE_flyprac"))
        .arg("analyze")
        .args(args)
        .output()
        .expect("cli runs");
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let idx = rdr
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == column)
        .expect("column");
    rdr.records()
        .map(|r| r.unwrap()[idx].parse().unwrap())
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn criterion_1() -> Outcome {
    let a = analyze_column(&["--epsilon", "1e-5", "-R", "5"], "p_fpe")[0];
    let b = analyze_column(&["--epsilon", "1e-3", "-R", "50"], "p_fpe")[0];
    outcome(
        rel(a, 7.99696e-9) <= 1e-4 && rel(b, 6.6106e-3) <= 1e-4,
        format!("R=5 eps=1e-5: {a:.6e}; R=50 eps=1e-3: {b:.6e}"),
    )
}

fn criterion_2() -> Outcome {
    let e = analyze_column(
        &[
            "--epsilon",
            "1e-3",
            "-R",
            "11,21,51",
            "-l",
            "50",
            "-g",
            "100",
        ],
        "E_ic",
    );
    let points = [4.213, 7.735, 16.757];
    let mut pass = e.iter().zip(points).all(|(x, p)| rel(*x, p) <= 1e-3);
    let identity = validate::inconsistent_column_points();
    pass &= identity.iter().all(|c| c.pass);
    outcome(
        pass,
        format!(
            "E_ic R=11,21,51: {:.4} {:.4} {:.4}; closed-form identity held at {} points",
            e[0],
            e[1],
            e[2],
            identity.len() - 3
        ),
    )
}

fn criterion_3() -> Outcome {
    from_checks(&validate::estimation_monte_carlo(Scale::Full, 3))
}

fn criterion_4() -> Outcome {
    let checks = validate::segment_recovery(Scale::Full, 4);
    let mut o = from_checks(&checks[..1]);
    let product = checks[1..3].iter().all(|c| c.pass);
    let one_minus = checks[3..5].iter().all(|c| c.pass);
    let dev = |cs: &[Check]| {
        cs.iter()
            .map(|c| (c.value - c.reference).abs())
            .fold(0.0, f64::max)
    };
    o.pass &= product;
    o.detail += &format!(
        "; product reading max deviation {:.1e} (within: {product}); one-minus reading max deviation {:.1e} (within: {one_minus}); adopted: product",
        dev(&checks[1..3]),
        dev(&checks[3..5])
    );
    o
}

fn criterion_5() -> Outcome {
    let sc = ScenarioConfig {
        g: 100,
        l: 700,
        s: 4,
        epsilon: 5e-5,
        recovery: RecoveryMode::Disabled,
        trials: 500,
        seed: 5,
        ..Default::default()
    };
    let m = run(&sc).unwrap().metrics;
    let bits = PacketLayout::new(&sc.generation().unwrap()).protected_bits();
    let analytic = 100.0 / (1.0 - 5e-5f64).powi(bits as i32);
    let mean = m.total_transmissions;
    outcome(
        (mean - 133.0).abs() <= 3.0 && rel(mean, analytic) <= 0.02,
        format!("mean {mean:.2} over 500 trials; analytic {analytic:.2}"),
    )
}

fn ratio_scenario(g: usize, s: usize, r: usize, seed: u64) -> f64 {
    let sc = ScenarioConfig {
        g,
        l: 900,
        s,
        r,
        epsilon: 1e-4,
        feedback: Feedback::Group,
        trials: 100,
        seed,
        ..Default::default()
    };
    run(&sc).unwrap().metrics.recovery_ratio
}

fn criterion_6() -> Outcome {
    let ratios: Vec<f64> = [2, 5, 10, 25]
        .iter()
        .map(|&s| ratio_scenario(50, s, 25, 6))
        .collect();
    let monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let s2 = (ratios[0] - 0.29).abs() <= 0.10;
    let s25 = (ratios[3] - 0.96).abs() <= 0.10;
    outcome(
        monotone && s2 && s25,
        format!(
            "ratios s=2,5,10,25: {:.1}% {:.1}% {:.1}% {:.1}%; s=2 in band: {s2}; s=25 in band: {s25}; monotone: {monotone}",
            100.0 * ratios[0],
            100.0 * ratios[1],
            100.0 * ratios[2],
            100.0 * ratios[3]
        ),
    )
}

fn criterion_7() -> Outcome {
    let r10 = ratio_scenario(100, 5, 10, 7);
    let r50 = ratio_scenario(100, 5, 50, 7);
    outcome(
        r10 - r50 >= 0.10 && (r10 - 0.896).abs() <= 0.10 && (r50 - 0.729).abs() <= 0.10,
        format!("R=10: {:.1}%; R=50: {:.1}%", 100.0 * r10, 100.0 * r50),
    )
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `n` fair coin flips.
fn sign_test(wins: usize, n: usize) -> f64 {
    (wins..=n)
        .map(|k| binomial(n as u64, k as u64))
        .sum::<f64>()
        / 2f64.powi(n as i32)
}

fn paired(a: &[TrialRecord], b: &[TrialRecord], f: impl Fn(&TrialRecord) -> f64) -> (usize, usize) {
    let better = a.iter().zip(b).filter(|(x, y)| f(x) < f(y)).count();
    let worse = a.iter().zip(b).filter(|(x, y)| f(x) > f(y)).count();
    (better, worse)
}

fn criterion_8() -> Outcome {
    let base = ScenarioConfig {
        topology: Topology::TwoHop,
        g: 50,
        l: 500,
        s: 4,
        r: 10,
        epsilon: 1e-4,
        trials: 200,
        seed: 8,
        ..Default::default()
    };
    let on = run(&base).unwrap();
    let off = run(&ScenarioConfig {
        recovery: RecoveryMode::Disabled,
        ..base
    })
    .unwrap();
    let (better, worse) = paired(&on.trials, &off.trials, |t| t.total_transmissions as f64);
    let p = sign_test(better, better + worse);
    let mean_on = on.metrics.total_transmissions;
    let mean_off = off.metrics.total_transmissions;
    let magnitude = rel(mean_on, 202.0) <= 0.15;
    let benefit = mean_on <= mean_off && p < 0.01;
    outcome(
        magnitude && benefit,
        format!(
            "g=50: relay recovery on {mean_on:.1}, off {mean_off:.1}; within 15% of 202: {magnitude}; on lower in {better}, higher in {worse} of 200 pairs, sign test p = {p:.1e}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let base = ScenarioConfig {
        mode: CodingMode::Snc,
        w: 2,
        g: 100,
        l: 800,
        s: 4,
        r: 5,
        epsilon: 1e-4,
        trials: 200,
        seed: 9,
        ..Default::default()
    };
    let fprac = run(&base).unwrap();
    let discard = run(&ScenarioConfig {
        recovery: RecoveryMode::Disabled,
        ..base
    })
    .unwrap();
    let (f, d) = (&fprac.metrics, &discard.metrics);
    let (better, worse) = paired(&fprac.trials, &discard.trials, |t| t.add());
    let pass = rel(f.add, 106.9) <= 0.15
        && rel(f.total_transmissions, 326.2) <= 0.15
        && rel(d.add, 161.0) <= 0.15
        && rel(d.total_transmissions, 485.5) <= 0.15
        && f.add < d.add;
    outcome(
        pass,
        format!(
            "FPRAC ADD {:.1} total {:.1}; discard ADD {:.1} total {:.1}; FPRAC ADD lower in {better}, higher in {worse} of 200 pairs",
            f.add, f.total_transmissions, d.add, d.total_transmissions
        ),
    )
}

fn random_config(rng: &mut ChaCha8Rng) -> GenerationConfig {
    let g = rng.random_range(2..=12);
    let s = rng.random_range(1..=4);
    let l = s * rng.random_range(1..=8);
    let mut cfg = if rng.random_bool(0.2) {
        GenerationConfig::plain(g, l, s)
    } else {
        GenerationConfig::dense(g, l, s, rng.random_range(3..=g + 1))
    };
    if rng.random_bool(0.3) {
        cfg = cfg.with_field(FieldSpec::GF2);
    }
    if rng.random_bool(0.3) {
        cfg = cfg.with_sparsity(Some(rng.random_range(1..=g)));
    }
    cfg
}

fn round_trip(n: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for _ in 0..n {
        let cfg = random_config(&mut rng);
        if cfg.validate().is_err() {
            continue;
        }
        let orig = OriginalPacket::random_generation(&cfg, &mut rng);
        let mut enc = Encoder::new(&orig, &cfg).unwrap();
        let mut basis = CoefficientBasis::new(cfg.field(), cfg.generation_size);
        let mut got = Vec::new();
        while !basis.is_full() {
            for p in enc.next_group(&mut rng).packets {
                basis.insert(&p.coefficients);
                got.push(p);
            }
        }
        if decode(&got, &cfg).map_err(|e| e.to_string())? != orig {
            return Err("decoded data differs".into());
        }
        checked += 1;
    }
    Ok(format!("{checked} random configs decode exactly"))
}

fn crc_linearity(n: usize) -> Result<String, String> {
    let crc = Crc8::shared(CrcSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..n {
        let len = rng.random_range(1..64);
        let a: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let b: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
        if crc.checksum_symbols(&x, 8) != crc.checksum_symbols(&a, 8) ^ crc.checksum_symbols(&b, 8)
        {
            return Err("crc(a ^ b) != crc(a) ^ crc(b)".into());
        }
    }
    Ok(format!("{n} random pairs"))
}

fn dependent_rows(n: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut groups = 0;
    while groups < n {
        let cfg = random_config(&mut rng);
        if cfg.validate().is_err() || !cfg.append_dependent {
            continue;
        }
        let f = cfg.field();
        let orig = OriginalPacket::random_generation(&cfg, &mut rng);
        let grp = Encoder::new(&orig, &cfg)
            .unwrap()
            .next_group(&mut rng)
            .packets;
        let (last, rest) = grp.split_last().unwrap();
        let mut coef = vec![0u8; cfg.generation_size];
        let mut sym = vec![0u8; cfg.symbols_per_packet];
        for p in rest {
            f.axpy(&mut coef, 1, &p.coefficients);
            f.axpy(&mut sym, 1, &p.symbols);
        }
        if coef != last.coefficients || sym != last.symbols {
            return Err("last row is not the sum of the others".into());
        }
        groups += 1;
    }
    Ok(format!("{n} groups"))
}

fn estimation_ground_truth(n: u64) -> Result<String, String> {
    let mut flagged_total = 0usize;
    for t in 0..n {
        let mut rng = stream_rng(13, t, 0);
        let gf2 = t % 2 == 0;
        let mut cfg = GenerationConfig::dense(6, 24, 3, 7);
        if gf2 {
            cfg = cfg.with_field(FieldSpec::GF2);
        }
        let lay = PacketLayout::new(&cfg);
        let orig = OriginalPacket::random_generation(&cfg, &mut rng);
        let grp = Encoder::new(&orig, &cfg)
            .unwrap()
            .next_group(&mut rng)
            .packets;
        let mut ch = BinarySymmetricChannel::with_rng(0.01, stream_rng(13, t, 1)).unwrap();
        let rx: Vec<CodedPacket> = grp.iter().map(|p| ch.transmit_packet(p, &lay)).collect();
        let broken = estimate(&rx, &cfg).map_err(|e| e.to_string())?;
        for j in 0..cfg.symbols_per_packet {
            let xor = rx
                .iter()
                .zip(&grp)
                .fold(0u8, |acc, (a, b)| acc ^ a.symbols[j] ^ b.symbols[j]);
            let corrupted = rx
                .iter()
                .zip(&grp)
                .any(|(a, b)| a.symbols[j] != b.symbols[j]);
            if broken.contains(j) && !corrupted {
                return Err(format!("trial {t}: column {j} flagged without corruption"));
            }
            if (xor != 0) != broken.contains(j) {
                return Err(format!(
                    "trial {t}: column {j} flag disagrees with the error sum"
                ));
            }
        }
        flagged_total += broken.len();
    }
    Ok(format!(
        "{n} groups, {flagged_total} flagged columns, all sound and complete"
    ))
}

/// Naive rank by elimination, written independently of the library.
fn naive_rank(field: &Field, rows: &[Vec<u8>]) -> usize {
    let mut m = rows.to_vec();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        let inv = field.inv_raw(m[rank][c]);
        for i in 0..m.len() {
            if i != rank && m[i][c] != 0 {
                let f = field.mul_raw(m[i][c], inv);
                let pivot = m[rank].clone();
                for (x, &y) in m[i].iter_mut().zip(&pivot) {
                    *x ^= field.mul_raw(f, y);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Some nonempty subset XORs to zero, by enumeration.
fn gf2_subset_dependent(rows: &[Vec<u8>]) -> bool {
    (1u32..1 << rows.len()).any(|mask| {
        let mut acc = vec![0u8; rows[0].len()];
        for (i, r) in rows.iter().enumerate() {
            if mask >> i & 1 == 1 {
                acc.iter_mut().zip(r).for_each(|(a, b)| *a ^= b);
            }
        }
        acc.iter().all(|&x| x == 0)
    })
}

fn dependency_discovery(n: u64) -> Result<String, String> {
    let mut checked = 0;
    for t in 0..n {
        let mut rng = stream_rng(14, t, 0);
        let (field_spec, w) = if t % 2 == 0 {
            (FieldSpec::GF2, 3)
        } else {
            (FieldSpec::GF256, 2)
        };
        let cfg = GenerationConfig::plain(10, 4, 1)
            .with_sparsity(Some(w))
            .with_field(field_spec);
        let f = cfg.field();
        let orig = OriginalPacket::random_generation(&cfg, &mut rng);
        let mut enc = Encoder::new(&orig, &cfg).unwrap();
        let mut pool: Vec<CodedPacket> = Vec::new();
        let mut tracker = DependencyTracker::new(f, 10);
        'fill: loop {
            for p in enc.next_group(&mut rng).packets {
                let id = pool.len();
                pool.push(p);
                if let Some(rel) = tracker.push(id, &pool[id].coefficients) {
                    let mut sum = vec![0u8; 10];
                    for &(i, l) in &rel {
                        f.axpy(&mut sum, l, &pool[i].coefficients);
                    }
                    let rows: Vec<Vec<u8>> = rel
                        .iter()
                        .map(|&(i, _)| pool[i].coefficients.clone())
                        .collect();
                    if sum.iter().any(|&x| x != 0) || naive_rank(f, &rows) >= rows.len() {
                        return Err(format!(
                            "instance {t}: incremental relation is not a dependency"
                        ));
                    }
                    if rows.len() <= 8
                        && field_spec == FieldSpec::GF2
                        && !gf2_subset_dependent(&rows)
                    {
                        return Err(format!("instance {t}: subset oracle finds no dependency"));
                    }
                    break 'fill;
                }
            }
        }
        let mut buffers = PacketBuffers::new();
        for p in &pool {
            buffers.insert(p.clone(), &cfg);
        }
        let set = find_dependent_group(&buffers, &cfg)
            .ok_or(format!("instance {t}: batch search found nothing"))?;
        let all: Vec<&CodedPacket> = buffers.iter().collect();
        let rows: Vec<Vec<u8>> = set
            .members
            .iter()
            .map(|&i| all[i].coefficients.clone())
            .collect();
        if naive_rank(f, &rows) >= rows.len() {
            return Err(format!("instance {t}: batch group is independent"));
        }
        if rows.len() <= 8 && field_spec == FieldSpec::GF2 && !gf2_subset_dependent(&rows) {
            return Err(format!("instance {t}: subset oracle rejects batch group"));
        }
        checked += 1;
    }
    Ok(format!("{checked} sparse instances, incremental and batch"))
}

fn csv_determinism() -> Result<String, String> {
    let text = "[base]\ng = 16\nl = 64\ns = 4\nR = 5\ntrials = 6\nseed = 77\n[grid]\nepsilon = [1e-4, 1e-3]\nrecovery = [\"fprac\", \"none\"]\n";
    let grid = GridSpec::from_toml(text).map_err(|e| e.to_string())?;
    let run_with = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let mut buf = Vec::new();
        pool.install(|| sweep(&grid, &mut buf))
            .map_err(|e| e.to_string())?;
        Ok::<_, String>(buf)
    };
    let a = run_with(1)?;
    let b = run_with(1)?;
    let c = run_with(3)?;
    if a != b || a != c {
        return Err("CSV bytes differ between runs".into());
    }
    Ok(format!(
        "{} bytes identical across runs and worker counts",
        a.len()
    ))
}

fn criterion_10() -> Outcome {
    let parts: Vec<(&str, Result<String, String>)> = vec![
        ("round trip", round_trip(300)),
        ("crc linearity", crc_linearity(10_000)),
        ("dependent row", dependent_rows(300)),
        (
            "estimation vs ground truth",
            estimation_ground_truth(10_000),
        ),
        ("dependency discovery", dependency_discovery(400)),
        ("csv determinism", csv_determinism()),
    ];
    let pass = parts.iter().all(|(_, r)| r.is_ok());
    let detail = parts
        .iter()
        .map(|(n, r)| match r {
            Ok(m) => format!("{n}: ok ({m})"),
            Err(e) => format!("{n}: FAILED ({e})"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("column false positive closed form", criterion_1),
        ("expected inconsistent columns", criterion_2),
        ("estimation closed form vs simulation", criterion_3),
        ("segment recovery arbitration", criterion_4),
        ("discard baseline transmissions", criterion_5),
        ("recovery ratio vs segments", criterion_6),
        ("recovery ratio vs group size", criterion_7),
        ("relay recovery benefit", criterion_8),
        ("sparse coding decoding delay", criterion_9),
        ("property suites", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} [{:.1}s]: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
