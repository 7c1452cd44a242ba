//! Closed forms checked against reference points and against Monte-Carlo
//! runs of the real encoder, channel and recovery code.

use crate::analysis::{self, mc, PsrOptions, PsrReading};
use crate::crc::{Crc8, CrcSpec};
use crate::galois::FieldSpec;
use crate::recovery::RecoveryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// Small sample sizes; finishes in seconds but the statistical checks
    /// are loose.
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    /// Allowed deviation, relative to `reference` when `relative` is set.
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

impl Check {
    pub fn relative(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            relative: true,
            pass: ((value - reference) / reference).abs() <= tolerance,
        }
    }

    pub fn absolute(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            relative: false,
            pass: (value - reference).abs() <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: got {:.6e}, reference {:.6e}, tolerance {}{}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.reference,
            self.tolerance,
            if self.relative {
                " relative"
            } else {
                " absolute"
            }
        )
    }
}

/// Column false-positive probability at two reference points.
pub fn fpe_points() -> Vec<Check> {
    vec![
        Check::relative(
            "p_fpe R=5 eps=1e-5",
            analysis::p_fpe_round(1e-5, 5, 8),
            7.99696e-9,
            1e-4,
        ),
        Check::relative(
            "p_fpe R=50 eps=1e-3",
            analysis::p_fpe_round(1e-3, 50, 8),
            6.6106e-3,
            1e-4,
        ),
    ]
}

/// Expected inconsistent columns at `l = 50`, `eps = 1e-3`, plus the
/// closed-form identity.
pub fn inconsistent_column_points() -> Vec<Check> {
    let mut out: Vec<Check> = [(11, 4.213), (21, 7.735), (51, 16.757)]
        .into_iter()
        .map(|(r, v)| {
            Check::relative(
                format!("E_ic R={r}"),
                analysis::expected_inconsistent_columns(1e-3, 8, r, 50),
                v,
                1e-3,
            )
        })
        .collect();
    for r in [3u32, 11, 21, 51, 101] {
        let sum = analysis::expected_inconsistent_columns(1e-3, 8, r, 50);
        let closed = 50.0 * (1.0 - analysis::p_column_ok(1e-3, 8, r));
        out.push(Check::relative(
            format!("E_ic identity R={r}"),
            sum,
            closed,
            1e-12,
        ));
    }
    out
}

/// Monte-Carlo hidden-column frequency against the closed form, `R = 20`,
/// both fields and two error rates.
pub fn estimation_monte_carlo(scale: Scale, seed: u64) -> Vec<Check> {
    let (l, groups) = match scale {
        Scale::Quick => (2_000, 100),
        Scale::Full => (10_000, 500),
    };
    let mut out = Vec::new();
    for (field, b) in [(FieldSpec::GF2, 1u32), (FieldSpec::GF256, 8)] {
        for eps in [1e-3, 1e-2] {
            let t = mc::estimation(field, 20, eps, l, groups, seed);
            out.push(Check::relative(
                format!(
                    "hidden columns GF(2^{b}) R=20 eps={eps} ({} columns)",
                    t.columns
                ),
                t.column_rate(),
                analysis::p_fpe_round(eps, 20, b),
                0.10,
            ));
        }
    }
    out
}

/// Segment recovery with full column knowledge at `N_p = 15`, and the two
/// readings of the no-false-positive term at the reference points.
pub fn segment_recovery(scale: Scale, seed: u64) -> Vec<Check> {
    let trials = match scale {
        Scale::Quick => 100_000,
        Scale::Full => 2_000_000,
    };
    let t = mc::segment_recovery(15, 1e-3, trials, RecoveryConfig::default(), seed);
    let mut out = vec![Check::absolute(
        "segment recovery N_p=15 eps=1e-3 (simulated)",
        t.rate(),
        0.989,
        0.005,
    )];
    let crc = Crc8::shared(CrcSpec::default());
    for reading in [PsrReading::Product, PsrReading::OneMinus] {
        for (n_p, v) in [(15, 0.986091), (23, 0.978230)] {
            let wd = crc.weight_distribution(n_p).expect("short segment");
            let p = analysis::p_successful_segment_recovery(
                &wd,
                1e-3,
                PsrOptions {
                    reading,
                    ..Default::default()
                },
            );
            out.push(Check::absolute(
                format!("p_sr N_p={n_p} ({})", reading.label()),
                p,
                v,
                0.005,
            ));
        }
    }
    out
}

/// Undetected-error probability against weight-stratified sampling.
pub fn undetected_error(scale: Scale, seed: u64) -> Vec<Check> {
    let samples = match scale {
        Scale::Quick => 200_000,
        Scale::Full => 4_000_000,
    };
    let crc = Crc8::shared(CrcSpec::default());
    [15usize, 23]
        .into_iter()
        .map(|n_p| {
            let wd = crc.weight_distribution(n_p).expect("short segment");
            let (est, _) = mc::undetected_error(crc, n_p, 1e-3, 8, samples, seed);
            Check::relative(
                format!("p_undetected N_p={n_p} eps=1e-3"),
                est,
                analysis::p_undetected(&wd, 1e-3),
                0.2,
            )
        })
        .collect()
}

/// Every check in order.
pub fn validate(scale: Scale, seed: u64) -> Vec<Check> {
    let mut out = fpe_points();
    out.extend(inconsistent_column_points());
    out.extend(estimation_monte_carlo(scale, seed));
    out.extend(segment_recovery(scale, seed));
    out.extend(undetected_error(scale, seed));
    out
}
