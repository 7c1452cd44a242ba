use super::ScenarioConfig;

/// Outcome of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// Packets sent on all links until the destination decoded.
    pub total_transmissions: usize,
    /// Packets whose outer CRC failed on arrival at the recovering node.
    pub corrupted: usize,
    /// Partial packets correctly recovered or reconstructed and used.
    pub recovered: usize,
    /// Repairs that passed every CRC but differ from the sent packet.
    pub false_recoveries: usize,
    /// Transmission count at which each original became decodable.
    pub decode_times: Vec<usize>,
    pub search_trials: u64,
    /// Seconds spent in recovery and decoding, when measured.
    pub compute_secs: Option<f64>,
    /// Decoded data equals the originals.
    pub decoded_ok: bool,
}

impl TrialRecord {
    /// Average decoding delay.
    pub fn add(&self) -> f64 {
        if self.decode_times.is_empty() {
            return 0.0;
        }
        self.decode_times.iter().sum::<usize>() as f64 / self.decode_times.len() as f64
    }
}

/// Trial averages for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trials: usize,
    pub total_transmissions: f64,
    pub total_transmissions_sd: f64,
    pub corrupted: f64,
    pub recovered: f64,
    pub false_recoveries: f64,
    /// Pooled over trials: all recovered over all corrupted, 0 when nothing
    /// was corrupted.
    pub recovery_ratio: f64,
    pub add: f64,
    /// Seconds on the wire at `data_rate`.
    pub completion_time_model: f64,
    pub completion_time_wall: Option<f64>,
    /// Payload bits per second of modeled plus measured time.
    pub goodput: f64,
    pub decode_failures: usize,
    pub search_trials: f64,
}

impl MetricsRow {
    pub fn from_trials(sc: &ScenarioConfig, packet_bits: usize, trials: &[TrialRecord]) -> Self {
        let n = trials.len().max(1) as f64;
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| trials.iter().map(f).sum::<f64>() / n;
        let total = mean(&|t| t.total_transmissions as f64);
        let var = trials
            .iter()
            .map(|t| (t.total_transmissions as f64 - total).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        let corrupted: usize = trials.iter().map(|t| t.corrupted).sum();
        let recovered: usize = trials.iter().map(|t| t.recovered).sum();
        let model = |t: &TrialRecord| (t.total_transmissions * packet_bits) as f64 / sc.data_rate;
        let wall = sc.timing.then(|| mean(&|t| t.compute_secs.unwrap_or(0.0)));
        let payload_bits = (sc.g * sc.l * sc.q as usize) as f64;
        Self {
            trials: trials.len(),
            total_transmissions: total,
            total_transmissions_sd: var.sqrt(),
            corrupted: corrupted as f64 / n,
            recovered: recovered as f64 / n,
            false_recoveries: mean(&|t| t.false_recoveries as f64),
            recovery_ratio: if corrupted == 0 {
                0.0
            } else {
                recovered as f64 / corrupted as f64
            },
            add: mean(&|t| t.add()),
            completion_time_model: mean(&model),
            completion_time_wall: wall,
            goodput: mean(&|t| payload_bits / (model(t) + t.compute_secs.unwrap_or(0.0))),
            decode_failures: trials.iter().filter(|t| !t.decoded_ok).count(),
            search_trials: mean(&|t| t.search_trials as f64),
        }
    }
}
