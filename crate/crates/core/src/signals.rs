//! Piecewise-constant admissible controls, the shift flow and the weak* metric.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("control range channel {channel}: lower bound {lo} exceeds upper bound {hi}")]
    BadRange { channel: usize, lo: f64, hi: f64 },
    #[error("switch times must be finite and strictly increasing")]
    UnsortedSwitches,
    #[error("expected {expected} values for {switches} switch times, got {got}")]
    PieceCount { switches: usize, expected: usize, got: usize },
    #[error("channel mismatch: expected {expected}, got {got}")]
    Channels { expected: usize, got: usize },
    #[error("non-finite control value")]
    NonFinite,
    #[error("need at least {min} levels per channel, got {got}")]
    Levels { min: usize, got: usize },
}

/// Compact box `U = Π [lo_k, hi_k] ⊂ ℝ^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRange {
    bounds: Vec<(f64, f64)>,
}

impl ControlRange {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, SignalError> {
        if bounds.is_empty() {
            return Err(SignalError::Channels { expected: 1, got: 0 });
        }
        for (channel, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(SignalError::BadRange { channel, lo, hi });
            }
        }
        Ok(ControlRange { bounds })
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn channels(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, value: &[f64]) -> bool {
        value.len() == self.bounds.len()
            && value.iter().zip(&self.bounds).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    /// Max over channels of the interval length.
    pub fn diameter(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max)
    }

    pub fn contains_zero(&self) -> bool {
        self.bounds.iter().all(|(lo, hi)| *lo <= 0.0 && 0.0 <= *hi)
    }
}

/// Piecewise-constant control `u: ℝ → U`.
///
/// With switch times `s_1 < … < s_K`, value `values[0]` holds on
/// `(-∞, s_1)`, `values[j]` on `[s_j, s_{j+1})` and `values[K]` on `[s_K, ∞)`.
/// Adjacent equal values are merged, so equal signals have equal
/// representations.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    switches: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn constant(value: Vec<f64>) -> Self {
        ControlSignal { switches: Vec::new(), values: vec![value] }
    }

    pub fn zero(channels: usize) -> Self {
        Self::constant(vec![0.0; channels])
    }

    pub fn from_pieces(switches: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        if values.len() != switches.len() + 1 {
            return Err(SignalError::PieceCount {
                switches: switches.len(),
                expected: switches.len() + 1,
                got: values.len(),
            });
        }
        if switches.iter().any(|s| !s.is_finite()) || switches.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SignalError::UnsortedSwitches);
        }
        let m = values[0].len();
        for v in &values {
            if v.len() != m {
                return Err(SignalError::Channels { expected: m, got: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(SignalError::NonFinite);
            }
        }
        Ok(Self::normalized(switches, values))
    }

    fn normalized(switches: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        let mut out_s = Vec::with_capacity(switches.len());
        let mut out_v: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut values = values.into_iter();
        out_v.push(values.next().expect("at least one value"));
        for (s, v) in switches.into_iter().zip(values) {
            if *out_v.last().unwrap() != v {
                out_s.push(s);
                out_v.push(v);
            }
        }
        ControlSignal { switches: out_s, values: out_v }
    }

    pub fn switches(&self) -> &[f64] {
        &self.switches
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn channels(&self) -> usize {
        self.values[0].len()
    }

    /// Smallest `S` such that the signal is constant outside `[-S, S]`.
    pub fn window(&self) -> f64 {
        self.switches.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    #[inline]
    pub fn value_at(&self, t: f64) -> &[f64] {
        let idx = self.switches.partition_point(|&s| s <= t);
        &self.values[idx]
    }

    pub fn is_admissible(&self, range: &ControlRange) -> bool {
        self.values.iter().all(|v| range.contains(v))
    }

    /// `θ_t u = u(t + ·)`.
    pub fn shift(&self, t: f64) -> ControlSignal {
        if t == 0.0 {
            return self.clone();
        }
        ControlSignal {
            switches: self.switches.iter().map(|s| s - t).collect(),
            values: self.values.clone(),
        }
    }

    /// Equals `self` on `(-∞, switch)` and `other(· - switch)` on `[switch, ∞)`.
    pub fn concatenate(&self, other: &ControlSignal, switch: f64) -> ControlSignal {
        let keep = self.switches.partition_point(|&s| s < switch);
        let mut switches: Vec<f64> = self.switches[..keep].to_vec();
        let mut values: Vec<Vec<f64>> = self.values[..=keep].to_vec();
        switches.push(switch);
        values.push(other.value_at(0.0).to_vec());
        let first = other.switches.partition_point(|&s| s <= 0.0);
        for (s, v) in other.switches[first..].iter().zip(&other.values[first + 1..]) {
            let t = s + switch;
            if t > *switches.last().unwrap() {
                switches.push(t);
                values.push(v.clone());
            } else {
                *values.last_mut().unwrap() = v.clone();
            }
        }
        Self::normalized(switches, values)
    }

    /// Constant pieces covering `[a, b]` (requires `a <= b`), in time order.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, &[f64])> {
        let mut out = Vec::new();
        let mut start = a;
        let mut idx = self.switches.partition_point(|&s| s <= a);
        while idx < self.switches.len() && self.switches[idx] < b {
            let s = self.switches[idx];
            out.push((start, s, self.values[idx].as_slice()));
            start = s;
            idx += 1;
        }
        out.push((start, b, self.values[idx].as_slice()));
        out
    }
}

#[derive(Serialize, Deserialize)]
struct SignalRepr {
    breakpoints: Vec<f64>,
    values: Vec<Vec<f64>>,
    window: f64,
}

impl Serialize for ControlSignal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let window = self.window();
        let mut breakpoints = Vec::with_capacity(self.switches.len() + 1);
        breakpoints.push(-window - 1.0);
        breakpoints.extend_from_slice(&self.switches);
        SignalRepr { breakpoints, values: self.values.clone(), window }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ControlSignal {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = SignalRepr::deserialize(deserializer)?;
        if repr.breakpoints.is_empty() || repr.breakpoints.len() != repr.values.len() {
            return Err(serde::de::Error::custom("breakpoints and values must have equal nonzero length"));
        }
        if repr.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom("breakpoints must be strictly increasing"));
        }
        ControlSignal::from_pieces(repr.breakpoints[1..].to_vec(), repr.values)
            .map_err(serde::de::Error::custom)
    }
}

/// One constant piece of a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub weights: Vec<f64>,
}

/// Compactly supported piecewise-constant `y ∈ L¹(ℝ, ℝ^m)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub segments: Vec<Segment>,
}

impl TestFunction {
    pub fn indicator(start: f64, end: f64, weights: Vec<f64>) -> Self {
        TestFunction { segments: vec![Segment { start, end, weights }] }
    }

    pub fn l1_norm(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.end - s.start) * s.weights.iter().map(|w| w * w).sum::<f64>().sqrt())
            .sum()
    }
}

/// Finite ordered family `y_1, …, y_N` with weights `2^{-i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricBasis {
    channels: usize,
    window: f64,
    functions: Vec<TestFunction>,
}

impl MetricBasis {
    pub fn new(channels: usize, functions: Vec<TestFunction>) -> Result<Self, SignalError> {
        let mut window: f64 = 0.0;
        for f in &functions {
            for s in &f.segments {
                if s.weights.len() != channels {
                    return Err(SignalError::Channels { expected: channels, got: s.weights.len() });
                }
                window = window.max(s.start.abs()).max(s.end.abs());
            }
        }
        Ok(MetricBasis { channels, window, functions })
    }

    /// Indicators of the dyadic subintervals of `[-window, window]` down to
    /// `depth`, coarse to fine, one per channel: `channels · (2^{depth+1} - 1)`
    /// functions.
    pub fn dyadic(channels: usize, window: f64, depth: u32) -> Self {
        let mut functions = Vec::new();
        for level in 0..=depth {
            let n = 1usize << level;
            let width = 2.0 * window / n as f64;
            for j in 0..n {
                let start = -window + j as f64 * width;
                let end = if j + 1 == n { window } else { start + width };
                for ch in 0..channels {
                    let mut weights = vec![0.0; channels];
                    weights[ch] = 1.0;
                    functions.push(TestFunction::indicator(start, end, weights));
                }
            }
        }
        MetricBasis { channels, window, functions }
    }

    /// Default basis for chain period `t`: window `2t + 1`, depth 4.
    pub fn for_period(channels: usize, t: f64) -> Self {
        MetricBasis::dyadic(channels, 2.0 * t + 1.0, 4)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Support radius: every test function vanishes outside `[-window, window]`.
    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// `∫ ⟨u - v, w⟩` over `[a, b]` on the common refinement of both signals.
fn integrate_difference(u: &ControlSignal, v: &ControlSignal, seg: &Segment) -> f64 {
    let (a, b) = (seg.start, seg.end);
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = Vec::new();
    cuts.push(a);
    cuts.extend(u.switches.iter().copied().filter(|&s| s > a && s < b));
    cuts.extend(v.switches.iter().copied().filter(|&s| s > a && s < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        let mid = 0.5 * (p + q);
        let du = u.value_at(mid);
        let dv = v.value_at(mid);
        let mut inner = 0.0;
        for ((x, y), wk) in du.iter().zip(dv).zip(&seg.weights) {
            inner += (x - y) * wk;
        }
        total += inner * (q - p);
    }
    total
}

/// Truncated weak* distance `Σ_i 2^{-i} |∫⟨u-v,y_i⟩| / (1 + |∫⟨u-v,y_i⟩|)`.
pub fn weak_star_distance(
    u: &ControlSignal,
    v: &ControlSignal,
    basis: &MetricBasis,
) -> Result<f64, SignalError> {
    if u.channels() != v.channels() {
        return Err(SignalError::Channels { expected: u.channels(), got: v.channels() });
    }
    if u.channels() != basis.channels {
        return Err(SignalError::Channels { expected: basis.channels, got: u.channels() });
    }
    let mut total = 0.0;
    let mut weight = 1.0;
    for f in &basis.functions {
        weight *= 0.5;
        let integral: f64 = f.segments.iter().map(|s| integrate_difference(u, v, s)).sum();
        let a = integral.abs();
        total += weight * a / (1.0 + a);
    }
    Ok(total)
}

/// Uniform grid of constant controls, `levels` values per channel including
/// both endpoints, in lexicographic channel order.
pub fn sample_controls(range: &ControlRange, levels: usize) -> Result<Vec<ControlSignal>, SignalError> {
    if levels < 2 && range.bounds.iter().any(|(lo, hi)| lo != hi) {
        return Err(SignalError::Levels { min: 2, got: levels });
    }
    let grids: Vec<Vec<f64>> = range
        .bounds
        .iter()
        .map(|&(lo, hi)| {
            if lo == hi {
                vec![lo]
            } else {
                (0..levels)
                    .map(|j| {
                        if j + 1 == levels {
                            hi
                        } else {
                            lo + j as f64 * (hi - lo) / (levels - 1) as f64
                        }
                    })
                    .collect()
            }
        })
        .collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for g in &grids {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                g.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    Ok(out.into_iter().map(ControlSignal::constant).collect())
}

/// Random piecewise-constant control on `[t0, t1]` with `pieces` pieces whose
/// values are drawn uniformly from `range`; constant outside the interval.
pub fn random_signal<R: Rng + ?Sized>(
    range: &ControlRange,
    t0: f64,
    t1: f64,
    pieces: usize,
    rng: &mut R,
) -> ControlSignal {
    let mut switches: Vec<f64> = (1..pieces.max(1)).map(|_| rng.gen_range(t0..t1)).collect();
    switches.sort_by(f64::total_cmp);
    switches.dedup();
    let values = (0..=switches.len())
        .map(|_| {
            range
                .bounds
                .iter()
                .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
                .collect()
        })
        .collect();
    ControlSignal::normalized(switches, values)
}
