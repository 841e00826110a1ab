// SPDX-License-Identifier: Apache-2.0
//! Run metrics and their JSON / CSV forms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Width of one latency histogram bucket, in cycles.
pub const HISTOGRAM_BUCKET: u64 = 10;

/// Event counters kept for every run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub flits_injected: u64,
    pub flits_ejected: u64,
    pub retransmissions: u64,
    pub corrected_flits: u64,
    pub ddrm_episodes: u64,
    pub rab_flags: u64,
    pub bypasses_kept: u64,
    pub links_marked: u64,
    pub escalations: u64,
    pub pcr_mismatches: u64,
    pub soft_events: u64,
    pub soft_masked: u64,
    pub packets_killed: u64,
    pub blocked_timeouts: u64,
    pub no_route_drops: u64,
    pub corrupted_deliveries: u64,
    pub duplicate_ejections: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub injected_packets: u64,
    pub delivered_packets: u64,
    pub lost_packets: u64,
    /// Mean of tail-ejection minus creation cycle over delivered packets.
    pub average_packet_latency: f64,
    /// Delivered flits per cycle per node.
    pub throughput: f64,
    /// Delivered over injected, in percent.
    pub arrival_rate: f64,
    /// Bucket start cycle to packet count.
    pub latency_histogram: BTreeMap<u64, u64>,
    pub simulation_cycles: u64,
    pub counters: Counters,
}

impl MetricsReport {
    pub const CSV_COLUMNS: [&'static str; 14] = [
        "injected_packets",
        "delivered_packets",
        "lost_packets",
        "average_packet_latency",
        "throughput",
        "arrival_rate",
        "simulation_cycles",
        "retransmissions",
        "ddrm_episodes",
        "rab_flags",
        "bypasses_kept",
        "links_marked",
        "pcr_mismatches",
        "packets_killed",
    ];

    pub fn csv_header() -> String {
        Self::CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let c = &self.counters;
        format!(
            "{},{},{},{:.4},{:.6},{:.4},{},{},{},{},{},{},{},{}",
            self.injected_packets,
            self.delivered_packets,
            self.lost_packets,
            self.average_packet_latency,
            self.throughput,
            self.arrival_rate,
            self.simulation_cycles,
            c.retransmissions,
            c.ddrm_episodes,
            c.rab_flags,
            c.bypasses_kept,
            c.links_marked,
            c.pcr_mismatches,
            c.packets_killed
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn is_conserved(&self) -> bool {
        self.delivered_packets + self.lost_packets == self.injected_packets && self.counters.duplicate_ejections == 0
    }
}

/// Latency samples folded into mean and histogram.
#[derive(Debug, Clone, Default)]
pub(crate) struct LatencyStats {
    sum: u128,
    count: u64,
    histogram: BTreeMap<u64, u64>,
}

impl LatencyStats {
    pub fn record(&mut self, latency: u64) {
        self.sum += u128::from(latency);
        self.count += 1;
        *self.histogram.entry(latency / HISTOGRAM_BUCKET * HISTOGRAM_BUCKET).or_default() += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum as f64 / self.count as f64
        }
    }

    pub fn histogram(&self) -> BTreeMap<u64, u64> {
        self.histogram.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_and_buckets() {
        let mut s = LatencyStats::default();
        for l in [5, 12, 19, 40] {
            s.record(l);
        }
        assert_eq!(s.mean(), 19.0);
        assert_eq!(s.histogram().get(&10), Some(&2));
    }

    #[test]
    fn csv_matches_header() {
        let r = MetricsReport {
            injected_packets: 1,
            delivered_packets: 1,
            lost_packets: 0,
            average_packet_latency: 3.0,
            throughput: 0.1,
            arrival_rate: 100.0,
            latency_histogram: BTreeMap::new(),
            simulation_cycles: 9,
            counters: Counters::default(),
        };
        assert_eq!(r.csv_row().split(',').count(), MetricsReport::CSV_COLUMNS.len());
        assert!(r.is_conserved());
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
