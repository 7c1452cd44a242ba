//! Closed-form failure probabilities for estimation and correction, plus
//! Monte-Carlo estimators that exercise the real encoder, channel and
//! recovery code.

use crate::crc::WeightDistribution;

/// Natural log of `C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

pub fn binomial(n: u64, k: u64) -> f64 {
    ln_binomial(n, k).exp()
}

/// `x^k (1-x)^(n-k)` evaluated in log space; exact at the endpoints.
fn pow_mix(x: f64, k: u64, n: u64) -> f64 {
    let a = if k == 0 { 0.0 } else { k as f64 * x.ln() };
    let b = if n == k {
        0.0
    } else {
        (n - k) as f64 * (-x).ln_1p()
    };
    (a + b).exp()
}

/// Binomial pmf.
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

/// Probability that a `b`-bit symbol arrives intact.
pub fn p_symbol_ok(eps: f64, b: u32) -> f64 {
    (1.0 - eps).powi(b as i32)
}

/// Probability that all `r` symbols of a column arrive intact.
pub fn p_column_ok(eps: f64, b: u32, r: u32) -> f64 {
    p_symbol_ok(eps, b).powi(r as i32)
}

/// Expected number of inconsistent columns among `l`, by the binomial sum.
///
/// This is the quantity that grows with `R` for a single dependent group. A
/// decode-then-recode consistency check over the whole generation uses
/// `R = g + 1` and so is constant in `R`; plots labelling the two the other
/// way round have the legend swapped.
pub fn expected_inconsistent_columns(eps: f64, b: u32, r: u32, l: u32) -> f64 {
    let p = p_column_ok(eps, b, r);
    let q = 1.0 - p;
    if q <= 0.0 {
        return 0.0;
    }
    if p <= 0.0 {
        return l as f64;
    }
    (1..=l as u64)
        .map(|i| i as f64 * binomial_pmf(l as u64, i, q))
        .sum()
}

/// `l (1 - P_column_ok)`.
pub fn expected_inconsistent_columns_closed(eps: f64, b: u32, r: u32, l: u32) -> f64 {
    l as f64 * (1.0 - p_column_ok(eps, b, r))
}

/// Probability that an even, nonzero number of `r` bits flip.
pub fn p_even(eps: f64, r: u32) -> f64 {
    (1..=r as u64 / 2)
        .map(|i| binomial(r as u64, 2 * i) * pow_mix(eps, 2 * i, r as u64))
        .sum()
}

/// Probability that none of `r` bits flips.
pub fn p_all_zero(eps: f64, r: u32) -> f64 {
    (1.0 - eps).powi(r as i32)
}

/// Probability that a column hides its corruption: in every bit position
/// the flips across the `r` symbols cancel, and at least one position has
/// flips.
pub fn p_fpe_round(eps: f64, r: u32, b: u32) -> f64 {
    let pe = p_even(eps, r);
    let p0 = p_all_zero(eps, r);
    (1..=b)
        .map(|i| binomial(b as u64, i as u64) * pe.powi(i as i32) * p0.powi((b - i) as i32))
        .sum()
}

/// Probability that none of `l` columns hides its corruption.
pub fn p_no_estimation_failure(eps: f64, r: u32, b: u32, l: u32) -> f64 {
    (1.0 - p_fpe_round(eps, r, b)).powi(l as i32)
}

/// Probability that a segment+CRC codeword of `N_p` bits suffers an
/// undetectable error pattern.
pub fn p_undetected(wd: &WeightDistribution, eps: f64) -> f64 {
    let n = wd.codeword_length as u64;
    (1..=n)
        .filter(|&i| wd.count(i as usize) > 0)
        .map(|i| wd.count(i as usize) as f64 * pow_mix(eps, i, n))
        .sum()
}

/// How the per-weight no-false-positive factor is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsrReading {
    /// The product of per-trial survival probabilities.
    Product,
    /// One minus that product.
    OneMinus,
}

impl PsrReading {
    pub fn label(self) -> &'static str {
        match self {
            PsrReading::Product => "product",
            PsrReading::OneMinus => "one_minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsrOptions {
    pub reading: PsrReading,
    /// Stop the outer sum once the remaining binomial error-weight mass is
    /// below this.
    pub tail_cutoff: f64,
}

impl Default for PsrOptions {
    fn default() -> Self {
        Self {
            reading: PsrReading::Product,
            tail_cutoff: 1e-15,
        }
    }
}

/// Chance that a trial flipping `alpha2` bits against an error of weight
/// `alpha1` never lands on a wrong codeword, over all overlaps `j` in
/// `j_min..=j_max`.
fn no_false_positive(
    wd: &WeightDistribution,
    alpha1: u64,
    alpha2: u64,
    j_max: u64,
    reading: PsrReading,
) -> f64 {
    let n = wd.codeword_length as u64;
    let j_min = (alpha1 + alpha2).saturating_sub(n);
    let mut ln_prod = 0.0;
    let mut j = j_min;
    while j <= j_max {
        let h = alpha1 + alpha2 - 2 * j;
        if h <= n {
            let p_valid = wd.count(h as usize) as f64 / binomial(n, h);
            let ln_trials = ln_binomial(alpha2, j) + ln_binomial(n - alpha2, alpha2 - j);
            if p_valid >= 1.0 {
                ln_prod = f64::NEG_INFINITY;
            } else if p_valid > 0.0 && ln_trials.is_finite() {
                ln_prod += ln_trials.exp() * (-p_valid).ln_1p();
            }
        }
        j += 1;
    }
    let prod = ln_prod.exp();
    match reading {
        PsrReading::Product => prod,
        PsrReading::OneMinus => 1.0 - prod,
    }
}

/// Probability of successfully recovering a segment by weight-ordered
/// search, summing `(1-eps)^(N_p-a1) eps^a1` times the no-false-positive
/// factor for each error weight `a1`.
///
/// The weight term carries no `C(N_p, a1)` pattern count, so beyond
/// `a1 = 0` each weight contributes a single pattern; the result is a lower
/// bound on the true success probability, and with the product reading it
/// is `(1-eps)^N_p + eps (1-eps)^(N_p-1) + ...` at short segments.
pub fn p_successful_segment_recovery(wd: &WeightDistribution, eps: f64, opts: PsrOptions) -> f64 {
    let n = wd.codeword_length as u64;
    let mut total = 0.0;
    let mut tail = 1.0;
    for a1 in 0..=n {
        let weight = pow_mix(eps, a1, n);
        let mut factor = 1.0;
        for a2 in 0..=a1 {
            factor *= match (a1, a2) {
                (0, 0) => 1.0,
                _ if a2 < a1 => no_false_positive(wd, a1, a2, a2, opts.reading),
                _ => no_false_positive(wd, a1, a2, a2 - 1, opts.reading),
            };
        }
        total += weight * factor;
        tail -= binomial_pmf(n, a1, eps);
        if tail < opts.tail_cutoff {
            break;
        }
    }
    total
}

/// Probability of a false positive during correction.
pub fn p_fpc(wd: &WeightDistribution, eps: f64, opts: PsrOptions) -> f64 {
    1.0 - p_successful_segment_recovery(wd, eps, opts)
}

/// Parameters for one analytic evaluation row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisParams {
    pub epsilon: f64,
    pub b: u32,
    pub r: u32,
    pub l: u32,
    pub s: u32,
    pub g: u32,
}

impl AnalysisParams {
    /// Segment plus CRC length in bits.
    pub fn n_p(&self) -> usize {
        (self.l / self.s * self.b) as usize + 8
    }
}

/// Every closed-form quantity at one parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub params: AnalysisParams,
    pub p_symbol_ok: f64,
    pub p_column_ok: f64,
    pub expected_inconsistent_columns: f64,
    pub p_even: f64,
    pub p_all_zero: f64,
    pub p_fpe_round: f64,
    pub p_no_estimation_failure: f64,
    /// `None` when the segment is too long for the weight enumerator.
    pub p_undetected: Option<f64>,
    pub p_sr_product: Option<f64>,
    pub p_sr_one_minus: Option<f64>,
}

impl AnalysisRow {
    pub const HEADER: [&'static str; 17] = [
        "epsilon",
        "b",
        "R",
        "l",
        "s",
        "g",
        "N_p",
        "p_symbol_ok",
        "p_column_ok",
        "E_ic",
        "p_even",
        "p_zero",
        "p_fpe",
        "p_no_estimation_failure",
        "p_undetected",
        "p_sr_product",
        "p_sr_one_minus",
    ];

    pub fn evaluate(params: AnalysisParams, crc: &crate::crc::Crc8) -> Self {
        let AnalysisParams {
            epsilon, b, r, l, ..
        } = params;
        let wd = crc.weight_distribution(params.n_p()).ok();
        let psr = |reading| {
            wd.as_ref().map(|w| {
                p_successful_segment_recovery(
                    w,
                    epsilon,
                    PsrOptions {
                        reading,
                        ..Default::default()
                    },
                )
            })
        };
        Self {
            params,
            p_symbol_ok: p_symbol_ok(epsilon, b),
            p_column_ok: p_column_ok(epsilon, b, r),
            expected_inconsistent_columns: expected_inconsistent_columns(epsilon, b, r, l),
            p_even: p_even(epsilon, r),
            p_all_zero: p_all_zero(epsilon, r),
            p_fpe_round: p_fpe_round(epsilon, r, b),
            p_no_estimation_failure: p_no_estimation_failure(epsilon, r, b, l),
            p_undetected: wd.as_ref().map(|w| p_undetected(w, epsilon)),
            p_sr_product: psr(PsrReading::Product),
            p_sr_one_minus: psr(PsrReading::OneMinus),
        }
    }

    pub fn record(&self) -> Vec<String> {
        let p = &self.params;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
        let mut out = vec![
            format!("{}", p.epsilon),
            p.b.to_string(),
            p.r.to_string(),
            p.l.to_string(),
            p.s.to_string(),
            p.g.to_string(),
            p.n_p().to_string(),
        ];
        out.extend(
            [
                self.p_symbol_ok,
                self.p_column_ok,
                self.expected_inconsistent_columns,
                self.p_even,
                self.p_all_zero,
                self.p_fpe_round,
                self.p_no_estimation_failure,
            ]
            .iter()
            .map(|x| format!("{x:.10e}")),
        );
        out.push(opt(self.p_undetected));
        out.push(opt(self.p_sr_product));
        out.push(opt(self.p_sr_one_minus));
        out
    }
}

/// Monte-Carlo estimators.
pub mod mc {
    use rand::seq::index::sample;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use rayon::prelude::*;

    use super::binomial_pmf;
    use crate::channel::{link, stream_rng, BinarySymmetricChannel};
    use crate::codec::{CodedPacket, Encoder, GenerationConfig, OriginalPacket, PacketLayout};
    use crate::crc::Crc8;
    use crate::galois::FieldSpec;
    use crate::recovery::{correct_segment, estimate, BrokenVector, RecoveryConfig};

    /// Event count out of a number of draws.
    #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
    pub struct Tally {
        pub events: u64,
        pub total: u64,
    }

    impl Tally {
        pub fn rate(&self) -> f64 {
            if self.total == 0 {
                0.0
            } else {
                self.events as f64 / self.total as f64
            }
        }

        /// Binomial standard error of [`rate`](Self::rate).
        pub fn std_error(&self) -> f64 {
            let p = self.rate();
            (p * (1.0 - p) / self.total.max(1) as f64).sqrt()
        }

        fn merge(self, o: Tally) -> Tally {
            Tally {
                events: self.events + o.events,
                total: self.total + o.total,
            }
        }
    }

    fn chunked<F>(chunks: u64, seed: u64, f: F) -> Tally
    where
        F: Fn(u64, ChaCha8Rng) -> Tally + Sync,
    {
        (0..chunks)
            .into_par_iter()
            .map(|c| f(c, stream_rng(seed, c, link::SOURCE)))
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Tally::default(), Tally::merge)
    }

    /// Fraction of `b`-bit symbols hit by at least one flip.
    pub fn symbol_corruption(eps: f64, b: u32, symbols: u64, seed: u64) -> Tally {
        let per = 1_000_000u64;
        let chunks = symbols.div_ceil(per);
        chunked(chunks, seed, |c, rng| {
            let n = per.min(symbols - c * per);
            let mut ch = BinarySymmetricChannel::with_rng(eps, rng).expect("valid epsilon");
            let mut hit = 0u64;
            let mut last = usize::MAX;
            for pos in ch.flip_positions((n * b as u64) as usize) {
                let sym = pos / b as usize;
                if sym != last {
                    hit += 1;
                    last = sym;
                }
            }
            Tally {
                events: hit,
                total: n,
            }
        })
    }

    /// Per-group estimation outcome against ground truth.
    #[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
    pub struct EstimationTally {
        /// Columns simulated.
        pub columns: u64,
        /// Corrupted columns missing from the broken vector.
        pub hidden_columns: u64,
        pub groups: u64,
        /// Groups in which no corrupted column was missed.
        pub clean_estimates: u64,
    }

    impl EstimationTally {
        fn merge(self, o: Self) -> Self {
            Self {
                columns: self.columns + o.columns,
                hidden_columns: self.hidden_columns + o.hidden_columns,
                groups: self.groups + o.groups,
                clean_estimates: self.clean_estimates + o.clean_estimates,
            }
        }

        pub fn column_rate(&self) -> f64 {
            self.hidden_columns as f64 / self.columns.max(1) as f64
        }

        pub fn group_success_rate(&self) -> f64 {
            self.clean_estimates as f64 / self.groups.max(1) as f64
        }
    }

    /// Encodes dependent groups of size `r` (with `g = r - 1`), passes them
    /// through a BSC and estimates broken columns by elimination. A column is
    /// hidden when some symbol in it was corrupted but it is not flagged.
    pub fn estimation(
        field: FieldSpec,
        r: usize,
        eps: f64,
        l: usize,
        groups: u64,
        seed: u64,
    ) -> EstimationTally {
        let cfg = GenerationConfig::dense(r - 1, l, 1, r).with_field(field);
        let lay = PacketLayout::new(&cfg);
        (0..groups)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(seed, t, link::SOURCE);
                let orig = OriginalPacket::random_generation(&cfg, &mut rng);
                let grp = Encoder::new(&orig, &cfg)
                    .expect("valid config")
                    .next_group(&mut rng);
                let mut ch = BinarySymmetricChannel::with_rng(eps, stream_rng(seed, t, link::HOP1))
                    .expect("valid epsilon");
                let rx: Vec<CodedPacket> = grp
                    .packets
                    .iter()
                    .map(|p| ch.transmit_packet(p, &lay))
                    .collect();
                let broken = estimate(&rx, &cfg).expect("dependent group");
                let mut hidden = 0u64;
                for j in 0..l {
                    let corrupted = rx
                        .iter()
                        .zip(&grp.packets)
                        .any(|(a, b)| a.symbols[j] != b.symbols[j]);
                    if corrupted && !broken.contains(j) {
                        hidden += 1;
                    }
                }
                EstimationTally {
                    columns: l as u64,
                    hidden_columns: hidden,
                    groups: 1,
                    clean_estimates: (hidden == 0) as u64,
                }
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(EstimationTally::default(), EstimationTally::merge)
    }

    /// Stratified estimate of the undetected-error probability for
    /// `n_p`-bit codewords: for each error weight up to `max_weight`,
    /// samples random patterns of that weight and counts the codewords,
    /// then weights by the binomial mass. Returns the estimate and the
    /// number of codeword hits.
    pub fn undetected_error(
        crc: &Crc8,
        n_p: usize,
        eps: f64,
        max_weight: usize,
        samples_per_weight: u64,
        seed: u64,
    ) -> (f64, u64) {
        let syn = crc.unit_syndromes(n_p - 8);
        let mut estimate = 0.0;
        let mut hits_total = 0u64;
        for w in 1..=max_weight.min(n_p) {
            let chunks = 64u64;
            let per = samples_per_weight.div_ceil(chunks);
            let t = chunked(chunks, seed ^ (w as u64) << 32, |_, mut rng| {
                let mut hits = 0;
                for _ in 0..per {
                    let mut s = 0u8;
                    for pos in sample(&mut rng, n_p, w) {
                        s ^= if pos < n_p - 8 {
                            syn[pos]
                        } else {
                            0x80 >> (pos - (n_p - 8))
                        };
                    }
                    hits += (s == 0) as u64;
                }
                Tally {
                    events: hits,
                    total: per,
                }
            });
            hits_total += t.events;
            estimate += binomial_pmf(n_p as u64, w as u64, eps) * t.rate();
        }
        (estimate, hits_total)
    }

    /// Segment recovery with full column knowledge: a GF(2) segment of
    /// `n_p - 8` payload bits plus its CRC passes a BSC, the suspects are
    /// exactly the corrupted payload bits, and success means the search
    /// returns the original payload.
    pub fn segment_recovery(
        n_p: usize,
        eps: f64,
        trials: u64,
        rcfg: RecoveryConfig,
        seed: u64,
    ) -> Tally {
        let bits = n_p - 8;
        let cfg = GenerationConfig::dense(2, bits, 1, 3).with_field(FieldSpec::GF2);
        let lay = PacketLayout::new(&cfg);
        let chunks = 256u64;
        let per = trials.div_ceil(chunks);
        chunked(chunks, seed, |c, mut rng| {
            let mut ch = BinarySymmetricChannel::with_rng(eps, stream_rng(seed, c, link::HOP1))
                .expect("valid epsilon");
            let mut ok = 0;
            for _ in 0..per {
                let payload: Vec<u8> = (0..bits).map(|_| rng.random_range(0..2u8)).collect();
                let sent = CodedPacket::new(0, vec![1, 0], payload, &cfg);
                let rx = ch.transmit_packet(&sent, &lay);
                let broken = BrokenVector::new(
                    (0..bits)
                        .filter(|&i| rx.symbols[i] != sent.symbols[i])
                        .collect(),
                );
                if let Ok(c) = correct_segment(&rx, 0, &broken, &cfg, &rcfg) {
                    ok += (c.symbols == sent.symbols) as u64;
                }
            }
            Tally {
                events: ok,
                total: per,
            }
        })
    }
}
