//! Network throughput traces: parsing, synthesis and exact download-time
//! integration.
//!
//! A trace is a piecewise-constant throughput signal sampled at strictly
//! increasing timestamps. Sessions longer than the trace wrap around modulo
//! the last timestamp, the usual trace-replay convention, so any trace can
//! drive a session of any length.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

/// Lowest throughput a synthesized trace will report, in Mbps. Keeps the
/// positivity invariant and guarantees downloads terminate.
pub const SYNTH_FLOOR_MBPS: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: expected `timestamp_s throughput_mbps`, got {found:?}")]
    Malformed { line: usize, found: String },
    #[error("line {line}: timestamp {ts} does not increase over {prev}")]
    NonIncreasing { line: usize, ts: f64, prev: f64 },
    #[error("line {line}: throughput must be positive, got {value}")]
    NonPositive { line: usize, value: f64 },
    #[error("trace validation failed: {0}")]
    Invalid(String),
}

/// A time-stamped piecewise-constant throughput signal in Mbps.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputTrace {
    /// (timestamp seconds, throughput Mbps), timestamps strictly increasing.
    pub samples: Vec<(f64, f64)>,
    pub name: String,
}

impl ThroughputTrace {
    /// Builds a trace from raw samples, checking all invariants.
    pub fn new(samples: Vec<(f64, f64)>, name: impl Into<String>) -> Result<Self, TraceError> {
        if samples.is_empty() {
            return Err(TraceError::Invalid("trace needs at least one sample".into()));
        }
        if samples[0].0 < 0.0 {
            return Err(TraceError::Invalid(format!(
                "first timestamp must be >= 0, got {}",
                samples[0].0
            )));
        }
        for (i, &(ts, tp)) in samples.iter().enumerate() {
            if !ts.is_finite() || !tp.is_finite() {
                return Err(TraceError::Invalid(format!("non-finite sample at index {i}")));
            }
            if tp <= 0.0 {
                return Err(TraceError::Invalid(format!(
                    "throughput must be positive, got {tp} at index {i}"
                )));
            }
            if i > 0 && ts <= samples[i - 1].0 {
                return Err(TraceError::Invalid(format!(
                    "timestamps must strictly increase, {ts} after {} at index {i}",
                    samples[i - 1].0
                )));
            }
        }
        Ok(Self { samples, name: name.into() })
    }

    /// Throughput in Mbps at `time` seconds: the value of the last sample
    /// with timestamp <= time. Before the first timestamp the first sample's
    /// value applies; past the last timestamp the trace wraps modulo the last
    /// timestamp.
    pub fn throughput_at(&self, time: f64) -> f64 {
        debug_assert!(time >= 0.0);
        let last_ts = self.samples.last().unwrap().0;
        let t = if time > last_ts && last_ts > 0.0 { time % last_ts } else { time };
        match self.samples.partition_point(|&(ts, _)| ts <= t) {
            0 => self.samples[0].1,
            idx => self.samples[idx - 1].1,
        }
    }

    /// Total Mbit delivered over one trace cycle, and the cycle length in
    /// seconds. `None` when the trace has a single sample or zero span
    /// (constant rate, nothing to wrap).
    fn cycle(&self) -> Option<(f64, f64)> {
        let last_ts = self.samples.last().unwrap().0;
        if self.samples.len() < 2 || last_ts <= 0.0 {
            return None;
        }
        let mut volume = 0.0;
        for (start, end, rate) in self.cycle_segments() {
            volume += rate * (end - start);
        }
        Some((volume, last_ts))
    }

    /// Constant-rate segments (start, end, rate) covering [0, last_ts).
    /// The last sample's value holds only at the wrap instant itself, so it
    /// never contributes a segment.
    fn cycle_segments(&self) -> Vec<(f64, f64, f64)> {
        let mut segs = Vec::with_capacity(self.samples.len());
        let (first_ts, first_tp) = self.samples[0];
        if first_ts > 0.0 {
            segs.push((0.0, first_ts, first_tp));
        }
        for w in self.samples.windows(2) {
            segs.push((w[0].0, w[1].0, w[0].1));
        }
        segs
    }

    /// Exact time to deliver `payload_mbit` starting at `start_time`, under
    /// the piecewise-constant (looping) rate. Returns (end_time, duration).
    pub fn integrate_download(&self, start_time: f64, payload_mbit: f64) -> (f64, f64) {
        debug_assert!(start_time >= 0.0 && payload_mbit >= 0.0);
        if payload_mbit <= 0.0 {
            return (start_time, 0.0);
        }
        let Some((cycle_volume, cycle_len)) = self.cycle() else {
            // Constant rate everywhere.
            let duration = payload_mbit / self.samples[0].1;
            return (start_time + duration, duration);
        };

        let segs = self.cycle_segments();
        let mut remaining = payload_mbit;
        let mut elapsed = 0.0;
        // Position within the current cycle.
        let mut pos = if start_time >= cycle_len { start_time % cycle_len } else { start_time };

        loop {
            for &(seg_start, seg_end, rate) in &segs {
                if seg_end <= pos {
                    continue;
                }
                let from = pos.max(seg_start);
                let capacity = rate * (seg_end - from);
                if remaining <= capacity {
                    elapsed += (from - pos) + remaining / rate;
                    let duration = elapsed;
                    return (start_time + duration, duration);
                }
                remaining -= capacity;
                elapsed += seg_end - pos;
                pos = seg_end;
            }
            // Cycle exhausted; skip whole cycles in bulk before resuming.
            pos = 0.0;
            if remaining > cycle_volume {
                let full = (remaining / cycle_volume).floor();
                remaining -= full * cycle_volume;
                elapsed += full * cycle_len;
                if remaining <= 0.0 {
                    // Payload was an exact multiple of the cycle volume.
                    return (start_time + elapsed, elapsed);
                }
            }
        }
    }
}

/// Parses the two-column trace format: one `timestamp_s throughput_mbps`
/// pair per line, `#` comments and blank lines ignored.
pub fn parse_trace(text: &str) -> Result<ThroughputTrace, TraceError> {
    let mut samples = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [ts_s, tp_s] = fields.as_slice() else {
            return Err(TraceError::Malformed { line, found: content.to_string() });
        };
        let (Ok(ts), Ok(tp)) = (ts_s.parse::<f64>(), tp_s.parse::<f64>()) else {
            return Err(TraceError::Malformed { line, found: content.to_string() });
        };
        if let Some(&(prev, _)) = samples.last() {
            if ts <= prev {
                return Err(TraceError::NonIncreasing { line, ts, prev });
            }
        }
        if tp <= 0.0 {
            return Err(TraceError::NonPositive { line, value: tp });
        }
        samples.push((ts, tp));
    }
    ThroughputTrace::new(samples, "trace")
}

/// Renders a trace back to the two-column file format.
pub fn format_trace(trace: &ThroughputTrace) -> String {
    let mut out = String::new();
    for &(ts, tp) in &trace.samples {
        out.push_str(&format!("{ts:.6} {tp:.6}\n"));
    }
    out
}

/// Synthesizes a Markov-modulated throughput trace.
///
/// One sample is emitted every `step` seconds until `duration` is covered.
/// At each step after the first, the chain switches uniformly to one of the
/// other states with probability `transition_prob`; the emitted throughput is
/// drawn from the current state's Gaussian, clipped below at
/// [`SYNTH_FLOOR_MBPS`]. Deterministic per seed.
pub fn synth_trace(
    seed: u64,
    duration: f64,
    states: &[(f64, f64)],
    transition_prob: f64,
    step: f64,
) -> Result<ThroughputTrace, TraceError> {
    if states.is_empty() {
        return Err(TraceError::Invalid("state list must not be empty".into()));
    }
    if duration <= 0.0 || step <= 0.0 {
        return Err(TraceError::Invalid("duration and step must be positive".into()));
    }
    if !(0.0..=1.0).contains(&transition_prob) {
        return Err(TraceError::Invalid(format!(
            "transition_prob must be in [0,1], got {transition_prob}"
        )));
    }
    for &(mean, std) in states {
        if mean <= 0.0 || std < 0.0 {
            return Err(TraceError::Invalid(format!(
                "state (mean {mean}, std {std}) must have mean > 0 and std >= 0"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = 0usize;
    let mut samples = Vec::new();
    let mut t = 0.0;
    while t < duration {
        if t > 0.0 && states.len() > 1 && rng.gen::<f64>() < transition_prob {
            let mut next = rng.gen_range(0..states.len() - 1);
            if next >= state {
                next += 1;
            }
            state = next;
        }
        let (mean, std) = states[state];
        let tp = Normal::new(mean, std)
            .expect("validated state parameters")
            .sample(&mut rng)
            .max(SYNTH_FLOOR_MBPS);
        samples.push((t, tp));
        t += step;
    }
    ThroughputTrace::new(samples, format!("synth-{seed}"))
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn arb_trace() -> impl Strategy<Value = ThroughputTrace> {
        (
            proptest::collection::vec((0.01f64..20.0, 0.05f64..50.0), 1..12),
            0.0f64..5.0,
        )
            .prop_map(|(gaps, first_ts)| {
                let mut ts = first_ts;
                let samples = gaps
                    .into_iter()
                    .map(|(gap, tp)| {
                        let s = (ts, tp);
                        ts += gap;
                        s
                    })
                    .collect();
                ThroughputTrace::new(samples, "prop").unwrap()
            })
    }

    proptest! {
        #[test]
        fn download_is_additive(trace in arb_trace(),
                                start in 0.0f64..40.0,
                                payload in 0.001f64..200.0) {
            let (end, d) = trace.integrate_download(start, payload);
            let (mid, d1) = trace.integrate_download(start, payload / 2.0);
            let (end2, d2) = trace.integrate_download(mid, payload / 2.0);
            prop_assert!((end2 - end).abs() <= 1e-9 * end.abs().max(1.0));
            prop_assert!(((d1 + d2) - d).abs() <= 1e-9 * d.abs().max(1.0));
        }

        #[test]
        fn duration_strictly_increases_in_payload(trace in arb_trace(),
                                                  start in 0.0f64..40.0,
                                                  payload in 0.001f64..100.0,
                                                  extra in 0.01f64..100.0) {
            let (_, d) = trace.integrate_download(start, payload);
            let (_, d_more) = trace.integrate_download(start, payload + extra);
            prop_assert!(d_more > d);
        }

        #[test]
        fn wrapped_lookup_matches_definition(trace in arb_trace(), time in 0.0f64..500.0) {
            let last_ts = trace.samples.last().unwrap().0;
            let direct = trace.throughput_at(time);
            if time > last_ts && last_ts > 0.0 {
                prop_assert_eq!(direct, trace.throughput_at(time % last_ts));
            }
            prop_assert!(direct > 0.0);
        }
    }
}
