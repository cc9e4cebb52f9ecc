//! Spike encoders for inputs normalized to `[0, 1]`, their decoders, and a
//! plug-in estimate of the information carried per spike.
//!
//! The hybrid encoder runs one integrator per channel. Channel `i` receives a
//! constant drive `g * x_i` with `g = v_th_base` and fires against the
//! input-modulated threshold `v_th_base * (1 - alpha * x_i)`, subtracting the
//! threshold on every spike. Larger inputs see both a stronger drive and a
//! lower threshold, so they fire earlier and at least as often.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::snn::SpikeTrain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    Rate,
    Latency,
    #[default]
    Hybrid,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rate => "rate",
            Scheme::Latency => "latency",
            Scheme::Hybrid => "hybrid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rate" => Some(Scheme::Rate),
            "latency" => Some(Scheme::Latency),
            "hybrid" => Some(Scheme::Hybrid),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EncoderConfig {
    pub scheme: Scheme,
    pub timesteps: usize,
    /// Threshold modulation gain of the hybrid scheme.
    pub alpha: f64,
    pub v_th_base: f64,
    /// Seed of the rate encoder's Bernoulli draws.
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            scheme: Scheme::Hybrid,
            timesteps: 20,
            alpha: 0.5,
            v_th_base: 1.0,
            seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timesteps == 0 {
            return Err(Error::Config("encoder timesteps must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("encoder alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.v_th_base > 0.0 && self.v_th_base.is_finite()) {
            return Err(Error::Config(format!(
                "encoder threshold must be positive, got {}",
                self.v_th_base
            )));
        }
        Ok(())
    }
}

fn check_unit_range(x: &[f64]) -> Result<()> {
    let bad: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| !(0.0..=1.0).contains(*v))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::InputOutOfRange { indices: bad })
    }
}

/// Encodes with whichever scheme `cfg` selects.
pub fn encode(x: &[f64], cfg: &EncoderConfig) -> Result<SpikeTrain> {
    match cfg.scheme {
        Scheme::Rate => encode_rate(x, cfg),
        Scheme::Latency => encode_latency(x, cfg),
        Scheme::Hybrid => encode_hybrid(x, cfg),
    }
}

/// Bernoulli(x_i) spike per channel per step. One uniform draw is consumed
/// for every (step, channel) pair regardless of `x`, so a channel's spikes
/// depend only on the seed and its own value.
pub fn encode_rate(x: &[f64], cfg: &EncoderConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    check_unit_range(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut train = SpikeTrain::new(x.len(), cfg.timesteps);
    for t in 0..cfg.timesteps {
        for (s, &xi) in train.frame_mut(t).iter_mut().zip(x) {
            *s = rng.gen::<f64>() < xi;
        }
    }
    Ok(train)
}

/// Single spike at step `ceil(T * (1 - x))` clamped to `[0, T - 1]`; zero
/// inputs stay silent.
pub fn encode_latency(x: &[f64], cfg: &EncoderConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    check_unit_range(x)?;
    let t_max = cfg.timesteps;
    let mut train = SpikeTrain::new(x.len(), t_max);
    for (i, &xi) in x.iter().enumerate() {
        if xi > 0.0 {
            let t = ((t_max as f64) * (1.0 - xi)).ceil() as usize;
            train.set(t.min(t_max - 1), i, true);
        }
    }
    Ok(train)
}

/// Input-modulated firing threshold `v_th_base * (1 - alpha * x)`.
pub fn hybrid_threshold(x: f64, cfg: &EncoderConfig) -> f64 {
    cfg.v_th_base * (1.0 - cfg.alpha * x)
}

/// Continuous number of drive steps the hybrid integrator needs to reach its
/// threshold, `threshold / (g * x)`. Strictly decreasing in `x` over
/// `(0, 1]`; `None` for `x = 0`. The first spike lands on step
/// `ceil(crossing) - 1`.
pub fn hybrid_crossing_time(x: f64, cfg: &EncoderConfig) -> Option<f64> {
    (x > 0.0).then(|| hybrid_threshold(x, cfg) / (cfg.v_th_base * x))
}

pub fn encode_hybrid(x: &[f64], cfg: &EncoderConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    check_unit_range(x)?;
    let mut thresholds = Vec::with_capacity(x.len());
    for (i, &xi) in x.iter().enumerate() {
        let th = hybrid_threshold(xi, cfg);
        if th <= 0.0 {
            return Err(Error::ThresholdNonPositive { channel: i, threshold: th });
        }
        thresholds.push(th);
    }
    let gain = cfg.v_th_base;
    let mut v = vec![0.0; x.len()];
    let mut train = SpikeTrain::new(x.len(), cfg.timesteps);
    for t in 0..cfg.timesteps {
        let frame = train.frame_mut(t);
        for i in 0..x.len() {
            v[i] += gain * x[i];
            if v[i] >= thresholds[i] {
                frame[i] = true;
                v[i] -= thresholds[i];
            }
        }
    }
    Ok(train)
}

/// Per-channel spike count divided by the horizon.
pub fn decode_rate(train: &SpikeTrain) -> Vec<f64> {
    let t = train.n_timesteps() as f64;
    train.counts().into_iter().map(|c| c as f64 / t).collect()
}

pub fn decode_latency(train: &SpikeTrain) -> Vec<f64> {
    let t_max = train.n_timesteps() as f64;
    (0..train.n_neurons())
        .map(|i| match train.first_spike(i) {
            None => 0.0,
            Some(0) => 1.0,
            Some(t) => (1.0 - (t as f64 - 0.5) / t_max).clamp(0.0, 1.0),
        })
        .collect()
}

/// Inverts the hybrid code from both its rate and its timing.
///
/// With `r = g x / threshold(x) = x / (1 - alpha x)`, a channel that fired
/// `c < T` times has `r` in `[c/T, (c+1)/T)`, one that fired on every step
/// has `r >= 1`, and a first spike on step `f` places `r` in
/// `[1/(f+1), 1/f)`. The two intervals are intersected, mapped back through
/// `x = r / (1 + alpha r)` and the midpoint is returned.
pub fn decode_hybrid(train: &SpikeTrain, cfg: &EncoderConfig) -> Vec<f64> {
    let t_max = train.n_timesteps();
    let tf = t_max as f64;
    let x_of_r = |r: f64| (r / (1.0 + cfg.alpha * r)).clamp(0.0, 1.0);
    let counts = train.counts();
    (0..train.n_neurons())
        .map(|i| {
            let c = counts[i] as usize;
            let (mut lo, mut hi) = if c >= t_max {
                (1.0, f64::INFINITY)
            } else {
                (c as f64 / tf, (c as f64 + 1.0) / tf)
            };
            if let Some(f) = train.first_spike(i) {
                let f_lo = 1.0 / (f as f64 + 1.0);
                let f_hi = if f == 0 { f64::INFINITY } else { 1.0 / f as f64 };
                // Rounding in the integrator can leave the intervals disjoint;
                // keep the count interval in that case.
                if f_lo < hi && f_hi > lo {
                    lo = lo.max(f_lo);
                    hi = hi.min(f_hi);
                }
            }
            let (x_lo, x_hi) = (x_of_r(lo), if hi.is_finite() { x_of_r(hi) } else { 1.0 });
            0.5 * (x_lo + x_hi)
        })
        .collect()
}

/// Decodes a train produced by the scheme in `cfg`.
pub fn decode(train: &SpikeTrain, cfg: &EncoderConfig) -> Vec<f64> {
    match cfg.scheme {
        Scheme::Rate => decode_rate(train),
        Scheme::Latency => decode_latency(train),
        Scheme::Hybrid => decode_hybrid(train, cfg),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeFidelity {
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    /// Mean spikes per encoded value.
    pub spikes_per_value: f64,
}

/// Encodes every sample with `cfg` (sample `k` uses seed `cfg.seed + k`),
/// decodes it again and measures the reconstruction error.
pub fn decode_fidelity(samples: &[Vec<f64>], cfg: &EncoderConfig) -> Result<DecodeFidelity> {
    if samples.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let (mut sum, mut max, mut n, mut spikes) = (0.0, 0.0f64, 0usize, 0u64);
    for (k, x) in samples.iter().enumerate() {
        let cfg_k = EncoderConfig {
            seed: cfg.seed.wrapping_add(k as u64),
            ..*cfg
        };
        let train = encode(x, &cfg_k)?;
        spikes += train.total_spikes();
        for (xh, xv) in decode(&train, &cfg_k).iter().zip(x) {
            let e = (xh - xv).abs();
            sum += e;
            max = max.max(e);
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    Ok(DecodeFidelity {
        mean_abs_error: sum / n,
        max_abs_error: max,
        spikes_per_value: spikes as f64 / n,
    })
}

/// Which error statistic a horizon search has to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FidelityTarget {
    Max,
    Mean,
}

/// Smallest horizon in `1..=max_t` whose decode error on `samples` is within
/// `tolerance`, together with its fidelity.
pub fn matched_horizon(
    samples: &[Vec<f64>],
    cfg: &EncoderConfig,
    target: FidelityTarget,
    tolerance: f64,
    max_t: usize,
) -> Result<Option<(usize, DecodeFidelity)>> {
    for t in 1..=max_t {
        let c = EncoderConfig { timesteps: t, ..*cfg };
        let f = decode_fidelity(samples, &c)?;
        let err = match target {
            FidelityTarget::Max => f.max_abs_error,
            FidelityTarget::Mean => f.mean_abs_error,
        };
        if err <= tolerance {
            return Ok(Some((t, f)));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfficiencyReport {
    /// Plug-in estimate of I(X; S) per channel in bits, averaged over channels.
    pub mutual_info_bits: f64,
    /// Mean spikes per encoded value (per sample and channel).
    pub n_spikes: f64,
    pub total_spikes: u64,
    /// Bits per spike: `mutual_info_bits / n_spikes`, zero without spikes.
    pub eta: f64,
}

/// Equal-width bin of `x` in `[0, 1]`.
pub fn bin_index(x: f64, bins: usize) -> usize {
    ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Plug-in mutual information in bits between two discrete variables given
/// as paired observations.
pub fn plugin_mutual_information<A: Ord + Copy, B: Ord + Copy>(pairs: &[(A, B)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let mut joint: BTreeMap<(A, B), usize> = BTreeMap::new();
    let mut pa: BTreeMap<A, usize> = BTreeMap::new();
    let mut pb: BTreeMap<B, usize> = BTreeMap::new();
    for &(a, b) in pairs {
        *joint.entry((a, b)).or_default() += 1;
        *pa.entry(a).or_default() += 1;
        *pb.entry(b).or_default() += 1;
    }
    let n = pairs.len() as f64;
    let mi: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let c = c as f64;
            c / n * (c * n / (pa[&a] as f64 * pb[&b] as f64)).log2()
        })
        .sum();
    mi.max(0.0)
}

/// Spike efficiency of an encoding over a sample of inputs and their trains.
/// Inputs are discretized into `bins` equal-width bins; the spike side of
/// each channel is its spike count.
pub fn spike_efficiency(inputs: &[Vec<f64>], trains: &[SpikeTrain], bins: usize) -> Result<EfficiencyReport> {
    if inputs.is_empty() {
        return Err(Error::Empty("sample"));
    }
    if inputs.len() != trains.len() {
        return Err(Error::Config(format!(
            "{} inputs but {} spike trains",
            inputs.len(),
            trains.len()
        )));
    }
    if bins < 2 {
        return Err(Error::Config("spike efficiency needs at least 2 bins".into()));
    }
    let channels = inputs[0].len();
    for (k, (x, s)) in inputs.iter().zip(trains).enumerate() {
        if x.len() != channels || s.n_neurons() != channels {
            return Err(Error::Config(format!("sample {k} has inconsistent channel count")));
        }
    }
    if channels == 0 {
        return Err(Error::Empty("channel set"));
    }
    let counts: Vec<Vec<u64>> = trains.iter().map(SpikeTrain::counts).collect();
    let total_spikes: u64 = counts.iter().flatten().sum();
    let mut mi_sum = 0.0;
    for c in 0..channels {
        let pairs: Vec<(usize, u64)> = inputs
            .iter()
            .zip(&counts)
            .map(|(x, n)| (bin_index(x[c], bins), n[c]))
            .collect();
        mi_sum += plugin_mutual_information(&pairs);
    }
    let mutual_info_bits = mi_sum / channels as f64;
    let n_spikes = total_spikes as f64 / (inputs.len() * channels) as f64;
    let eta = if n_spikes > 0.0 { mutual_info_bits / n_spikes } else { 0.0 };
    Ok(EfficiencyReport {
        mutual_info_bits,
        n_spikes,
        total_spikes,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: Scheme, t: usize) -> EncoderConfig {
        EncoderConfig {
            scheme,
            timesteps: t,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn rate_extremes() {
        let tr = encode_rate(&[0.0, 1.0], &cfg(Scheme::Rate, 50)).unwrap();
        assert_eq!(tr.counts(), vec![0, 50]);
    }

    #[test]
    fn rate_half_within_three_sigma() {
        let tr = encode_rate(&[0.5], &cfg(Scheme::Rate, 1000)).unwrap();
        let n = tr.total_spikes() as f64;
        let sigma = (1000.0f64 * 0.25).sqrt();
        assert!((n - 500.0).abs() <= 3.0 * sigma, "{n}");
    }

    #[test]
    fn rate_is_reproducible() {
        let x = [0.2, 0.7, 0.4];
        let c = cfg(Scheme::Rate, 64);
        assert_eq!(encode_rate(&x, &c).unwrap(), encode_rate(&x, &c).unwrap());
    }

    #[test]
    fn out_of_range_lists_indices() {
        let err = encode_rate(&[0.5, 1.2, -0.1, 0.3], &cfg(Scheme::Rate, 4)).unwrap_err();
        match err {
            Error::InputOutOfRange { indices } => assert_eq!(indices, vec![1, 2]),
            e => panic!("{e}"),
        }
        assert!(encode_hybrid(&[f64::NAN], &cfg(Scheme::Hybrid, 4)).is_err());
    }

    #[test]
    fn hybrid_zero_input_silent() {
        let c = cfg(Scheme::Hybrid, 30);
        assert_eq!(hybrid_threshold(0.0, &c), 1.0);
        assert_eq!(encode_hybrid(&[0.0], &c).unwrap().total_spikes(), 0);
    }

    #[test]
    fn hybrid_threshold_arithmetic() {
        let c = EncoderConfig { alpha: 0.5, v_th_base: 1.0, ..Default::default() };
        assert_eq!(hybrid_threshold(1.0, &c), 0.5);
    }

    #[test]
    fn hybrid_rejects_nonpositive_threshold() {
        let c = EncoderConfig { alpha: 1.5, ..cfg(Scheme::Hybrid, 5) };
        let err = encode_hybrid(&[0.2, 0.9], &c).unwrap_err();
        assert!(matches!(err, Error::ThresholdNonPositive { channel: 1, .. }));
    }

    #[test]
    fn hybrid_larger_input_fires_earlier() {
        let c = cfg(Scheme::Hybrid, 20);
        let tr = encode_hybrid(&[0.9, 0.3], &c).unwrap();
        assert!(tr.first_spike(0).unwrap() < tr.first_spike(1).unwrap());
        assert!(hybrid_crossing_time(0.9, &c).unwrap() < hybrid_crossing_time(0.3, &c).unwrap());
    }

    #[test]
    fn latency_single_spike() {
        let tr = encode_latency(&[0.0, 1.0, 0.5, 0.01], &cfg(Scheme::Latency, 10)).unwrap();
        assert_eq!(tr.counts(), vec![0, 1, 1, 1]);
        assert_eq!(tr.first_spike(1), Some(0));
        assert_eq!(tr.first_spike(2), Some(5));
        assert_eq!(tr.first_spike(3), Some(9));
    }

    #[test]
    fn decode_rate_trivial() {
        assert_eq!(decode_rate(&SpikeTrain::new(3, 8)), vec![0.0; 3]);
        let tr = encode_rate(&[1.0], &cfg(Scheme::Rate, 8)).unwrap();
        assert_eq!(decode_rate(&tr), vec![1.0]);
    }

    #[test]
    fn hybrid_decode_recovers_grid() {
        let c = cfg(Scheme::Hybrid, 40);
        // Below 1 / (1 + alpha) the channel does not fire on every step.
        let xs: Vec<f64> = (0..=13).map(|k| k as f64 / 20.0).collect();
        let tr = encode_hybrid(&xs, &c).unwrap();
        for (xh, x) in decode_hybrid(&tr, &c).iter().zip(&xs) {
            assert!((xh - x).abs() < 0.03, "{x} -> {xh}");
        }
    }

    #[test]
    fn hybrid_saturated_channels_decode_to_band_midpoint() {
        let c = cfg(Scheme::Hybrid, 40);
        let knee = 1.0 / (1.0 + c.alpha);
        let xs = [0.7, 0.85, 1.0];
        let tr = encode_hybrid(&xs, &c).unwrap();
        assert!(tr.counts().iter().all(|&n| n == 40));
        for xh in decode_hybrid(&tr, &c) {
            assert!((xh - 0.5 * (knee + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn mutual_information_of_separating_code_is_one_bit() {
        let pairs: Vec<(usize, u64)> = (0..100).map(|i| (i % 2, (i % 2) as u64 * 5)).collect();
        assert!((plugin_mutual_information(&pairs) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_carries_no_information() {
        let c = cfg(Scheme::Rate, 20);
        let inputs: Vec<Vec<f64>> = (0..30).map(|_| vec![0.4, 0.4]).collect();
        let trains: Vec<SpikeTrain> = inputs
            .iter()
            .enumerate()
            .map(|(k, x)| encode_rate(x, &EncoderConfig { seed: k as u64, ..c }).unwrap())
            .collect();
        let r = spike_efficiency(&inputs, &trains, 4).unwrap();
        assert_eq!(r.mutual_info_bits, 0.0);
        assert_eq!(r.eta, 0.0);
    }

    #[test]
    fn efficiency_requires_sample() {
        assert!(matches!(spike_efficiency(&[], &[], 4), Err(Error::Empty(_))));
    }
}
