//! Simulated wireless link: fixed data rate, per-byte energy, one-way
//! latency. Counters are exact so bandwidth/energy accounting can be
//! asserted in closed form.

/// 100 Mbps, 100 nJ/B, 10 ms.
pub const DEFAULT_RATE_BPS: f64 = 100e6;
pub const DEFAULT_ENERGY_PER_BYTE: f64 = 1e-7;
pub const DEFAULT_LATENCY_S: f64 = 10e-3;

#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub rate_bps: f64,
    pub energy_per_byte: f64,
    pub latency_s: f64,
    pub bytes_sent: u64,
    pub energy_spent: f64,
    pub deliveries: Vec<DeliveryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryRecord {
    pub sent_at: f64,
    pub arrival: f64,
    pub bytes: usize,
    pub energy: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            rate_bps: DEFAULT_RATE_BPS,
            energy_per_byte: DEFAULT_ENERGY_PER_BYTE,
            latency_s: DEFAULT_LATENCY_S,
            bytes_sent: 0,
            energy_spent: 0.0,
            deliveries: Vec::new(),
        }
    }
}

impl ChannelModel {
    pub fn transfer_time(&self, bytes: usize) -> f64 {
        self.latency_s + 8.0 * bytes as f64 / self.rate_bps
    }

    /// Accounts one message of `bytes` handed to the link at `sent_at`.
    pub fn send(&mut self, bytes: usize, sent_at: f64) -> DeliveryRecord {
        let energy = bytes as f64 * self.energy_per_byte;
        let rec = DeliveryRecord {
            sent_at,
            arrival: sent_at + self.transfer_time(bytes),
            bytes,
            energy,
        };
        self.bytes_sent += bytes as u64;
        self.energy_spent += energy;
        self.deliveries.push(rec);
        rec
    }
}

/// Per-round and aggregate bandwidth statistics for a finished session.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    /// (round index, bytes, required bit/s to sustain the target fps).
    pub per_round: Vec<(u64, u64, f64)>,
    pub mean_required_bps: f64,
    pub p95_required_bps: f64,
    pub total_bytes: u64,
    pub total_energy: f64,
}

/// `required = 8 * bytes / (frame_interval / target_fps)` per LoD round.
pub fn bandwidth_report(
    round_bytes: &[(u64, u64)],
    frame_interval: u32,
    target_fps: f64,
    total_energy: f64,
) -> BandwidthReport {
    let window = frame_interval as f64 / target_fps;
    let per_round: Vec<(u64, u64, f64)> = round_bytes
        .iter()
        .map(|&(round, bytes)| (round, bytes, 8.0 * bytes as f64 / window))
        .collect();
    let mut rates: Vec<f64> = per_round.iter().map(|r| r.2).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = if rates.is_empty() {
        0.0
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    let p95 = if rates.is_empty() {
        0.0
    } else {
        let ix = ((rates.len() as f64 * 0.95).ceil() as usize).clamp(1, rates.len()) - 1;
        rates[ix]
    };
    BandwidthReport {
        total_bytes: per_round.iter().map(|r| r.1).sum(),
        per_round,
        mean_required_bps: mean,
        p95_required_bps: p95,
        total_energy,
    }
}
