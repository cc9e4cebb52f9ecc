//! Activity-driven threshold adaptation at inference time.
//!
//! Each weighted layer shares one threshold. After every step the layer's
//! mean output activity `A[t]` is measured and the threshold for step `t + 1`
//! becomes
//!
//! ```text
//! v_th(t + 1) = clamp(v_th_base * (1 + gamma * (A_target - A[t])), th_min, th_max)
//! ```
//!
//! so a quiet layer gets a higher threshold and a busy one a lower threshold.
//! [`AdaptMode::Homeostatic`] flips the sign of the correction instead.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::snn::{check_input_train, NetworkTopology, SimState, Simulator, SpikeTrain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AdaptMode {
    /// Raise the threshold when activity is below target.
    #[default]
    Gating,
    /// Lower the threshold when activity is below target.
    Homeostatic,
}

impl AdaptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptMode::Gating => "gating",
            AdaptMode::Homeostatic => "homeostatic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gating" => Some(AdaptMode::Gating),
            "homeostatic" => Some(AdaptMode::Homeostatic),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    /// Desired mean spikes per neuron per step.
    pub a_target: f64,
    pub gamma: f64,
    /// Lower clamp, as a multiple of the layer's base threshold.
    pub th_min: f64,
    /// Upper clamp, as a multiple of the layer's base threshold.
    pub th_max: f64,
    /// Number of steps averaged into `A[t]`.
    pub window: usize,
    pub mode: AdaptMode,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            a_target: 0.05,
            gamma: 0.1,
            th_min: 0.5,
            th_max: 2.0,
            window: 1,
            mode: AdaptMode::Gating,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_target > 0.0 && self.a_target < 1.0) {
            return Err(Error::Config(format!("a_target must lie in (0, 1), got {}", self.a_target)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.th_min > 0.0 && self.th_min < self.th_max && self.th_max.is_finite()) {
            return Err(Error::Config(format!(
                "need 0 < th_min < th_max, got {} and {}",
                self.th_min, self.th_max
            )));
        }
        if self.window == 0 {
            return Err(Error::Config("activity window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mean spike rate of a population at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivityStat {
    pub a_t: f64,
    pub window: usize,
}

impl ActivityStat {
    pub fn from_spikes(spikes: &[bool]) -> Self {
        let n = spikes.len().max(1) as f64;
        ActivityStat {
            a_t: spikes.iter().filter(|&&s| s).count() as f64 / n,
            window: 1,
        }
    }
}

/// Clamped threshold for the observed activity.
pub fn adapt_threshold(v_th_base: f64, activity: ActivityStat, cfg: &AdaptConfig) -> f64 {
    let err = match cfg.mode {
        AdaptMode::Gating => cfg.a_target - activity.a_t,
        AdaptMode::Homeostatic => activity.a_t - cfg.a_target,
    };
    let th = v_th_base * (1.0 + cfg.gamma * err);
    th.clamp(cfg.th_min * v_th_base, cfg.th_max * v_th_base)
}

/// Sliding mean over the last `window` activity samples.
#[derive(Clone, Debug)]
struct ActivityWindow {
    samples: VecDeque<f64>,
    window: usize,
}

impl ActivityWindow {
    fn new(window: usize) -> Self {
        ActivityWindow {
            samples: VecDeque::with_capacity(window),
            window,
        }
    }

    fn push(&mut self, a: f64) -> ActivityStat {
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back(a);
        ActivityStat {
            a_t: self.samples.iter().sum::<f64>() / self.samples.len() as f64,
            window: self.window,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivityRecord {
    pub t: usize,
    pub layer: usize,
    pub a_t: f64,
    /// Threshold computed from `a_t`, in effect from step `t + 1`.
    pub v_th: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveRun {
    pub state: SimState,
    pub trajectory: Vec<ActivityRecord>,
}

impl AdaptiveRun {
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("t,layer,a_t,v_th_adapted\n");
        for r in &self.trajectory {
            s.push_str(&format!("{},{},{},{}\n", r.t, r.layer, r.a_t, r.v_th));
        }
        s
    }
}

/// Simulates `net` with per-layer thresholds adapted from each layer's own
/// output one step earlier. Pooling layers are not adapted.
pub fn run_adaptive(
    net: &NetworkTopology,
    input: &SpikeTrain,
    cfg: &AdaptConfig,
) -> Result<(SpikeTrain, AdaptiveRun)> {
    cfg.validate()?;
    check_input_train(net, input)?;
    let mut sim = Simulator::new(net)?;
    let bases: Vec<Option<f64>> = net.layers().iter().map(|l| l.params().map(|p| p.v_th_base)).collect();
    let mut windows: Vec<ActivityWindow> = bases.iter().map(|_| ActivityWindow::new(cfg.window)).collect();
    let mut output = SpikeTrain::new(net.n_out(), net.n_timesteps());
    let mut trajectory = Vec::new();
    for t in 0..net.n_timesteps() {
        let out = sim.step(input.frame(t))?;
        output.frame_mut(t).copy_from_slice(out);
        for (k, base) in bases.iter().enumerate() {
            let Some(base) = *base else { continue };
            let a = ActivityStat::from_spikes(sim.layer_output(k)).a_t;
            let stat = windows[k].push(a);
            let th = adapt_threshold(base, stat, cfg);
            sim.set_threshold(k, th);
            trajectory.push(ActivityRecord {
                t,
                layer: k,
                a_t: stat.a_t,
                v_th: th,
            });
        }
    }
    Ok((
        output,
        AdaptiveRun {
            state: sim.into_state(),
            trajectory,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{run_network, LayerSpec, NeuronParams};

    fn stat(a: f64) -> ActivityStat {
        ActivityStat { a_t: a, window: 1 }
    }

    #[test]
    fn fixed_point_at_target() {
        let cfg = AdaptConfig { gamma: 3.0, a_target: 0.2, ..Default::default() };
        assert_eq!(adapt_threshold(1.3, stat(0.2), &cfg), 1.3);
    }

    #[test]
    fn quiet_layer_raises_threshold() {
        let cfg = AdaptConfig { gamma: 0.5, a_target: 0.1, ..Default::default() };
        assert!((adapt_threshold(1.0, stat(0.0), &cfg) - 1.05).abs() < 1e-15);
    }

    #[test]
    fn busy_layer_clamps_low() {
        let cfg = AdaptConfig { gamma: 50.0, ..Default::default() };
        assert_eq!(adapt_threshold(2.0, stat(1.0), &cfg), 1.0);
        let cfg = AdaptConfig { gamma: 50.0, a_target: 0.9, ..Default::default() };
        assert_eq!(adapt_threshold(2.0, stat(0.0), &cfg), 4.0);
    }

    #[test]
    fn homeostatic_flips_sign() {
        let cfg = AdaptConfig { gamma: 0.5, a_target: 0.1, mode: AdaptMode::Homeostatic, ..Default::default() };
        assert!(adapt_threshold(1.0, stat(0.0), &cfg) < 1.0);
    }

    #[test]
    fn windowed_mean() {
        let mut w = ActivityWindow::new(2);
        assert_eq!(w.push(1.0).a_t, 1.0);
        assert_eq!(w.push(0.0).a_t, 0.5);
        assert_eq!(w.push(0.0).a_t, 0.0);
    }

    #[test]
    fn zero_gamma_matches_static_run() {
        let p = NeuronParams::new(0.8, 0.7).unwrap();
        let l0 = LayerSpec::dense(3, 2, vec![0.5, 0.3, -0.1, 0.2, 0.6, 0.4], p).unwrap();
        let net = NetworkTopology::new(vec![l0], 12).unwrap();
        let mut input = SpikeTrain::new(3, 12);
        for t in 0..12 {
            input.set(t, t % 3, true);
        }
        let cfg = AdaptConfig { gamma: 0.0, ..Default::default() };
        let (a, run) = run_adaptive(&net, &input, &cfg).unwrap();
        let (b, st) = run_network(&net, &input).unwrap();
        assert_eq!(a, b);
        assert_eq!(run.state, st);
        assert!(run.trajectory.iter().all(|r| r.v_th == 0.7));
    }

    #[test]
    fn config_validation() {
        assert!(AdaptConfig { th_min: 2.0, th_max: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdaptConfig { a_target: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdaptConfig { window: 0, ..Default::default() }.validate().is_err());
    }
}
