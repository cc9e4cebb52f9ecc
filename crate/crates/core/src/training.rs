//! Surrogate-gradient training through time.
//!
//! The forward pass records, per weighted layer and step, the pre-reset
//! potential `u[t] = beta * v[t-1] + W x[t]` and the output `s[t]`. In
//! [`GradMode::HardForward`] the outputs are the binary spikes of the
//! simulator and the backward pass swaps the step derivative for a boxcar of
//! half-width `w * v_th` and height `1 / (2 w v_th)`. In
//! [`GradMode::SmoothForward`] the step itself is replaced by a sigmoid, so
//! the backward pass is the exact derivative of what was computed.
//!
//! Pooling layers use the same machinery with the child-spike sum in place of
//! `u` and a threshold of one half.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Sample;
use crate::encoding::{encode, EncoderConfig};
use crate::error::{Error, Result};
use crate::hardware::{hw_loss, map_greedy, map_optimize, ChipModel, MapperConfig, Mapping, SynapseGraph};
use crate::seed::derive_indexed;
use crate::snn::{check_input_train, classify_counts, run_network, LayerKind, NetworkTopology, ResetMode, SpikeTrain};

const POOL_CENTER: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GradMode {
    #[default]
    HardForward,
    SmoothForward,
}

impl GradMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GradMode::HardForward => "hard_forward",
            GradMode::SmoothForward => "smooth_forward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hard_forward" | "hard" => Some(GradMode::HardForward),
            "smooth_forward" | "smooth" => Some(GradMode::SmoothForward),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight of the mapping cost in the reported total loss.
    pub lambda_hw: f64,
    /// Boxcar half-width, in threshold units.
    pub surrogate_width: f64,
    pub grad_mode: GradMode,
    /// Sigmoid slope for smooth mode, per threshold unit. `None` picks the
    /// slope that matches the boxcar height at threshold.
    pub steepness: Option<f64>,
    /// Initial weights are uniform in `+-init_gain / sqrt(fan_in)`.
    pub init_gain: f64,
    pub seed: u64,
    /// Compute per-sample gradients of a batch on the rayon pool. The
    /// reduction order is fixed, so results do not depend on this flag.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.003,
            lambda_hw: 0.0,
            surrogate_width: 0.5,
            grad_mode: GradMode::HardForward,
            steepness: None,
            init_gain: 1.0,
            seed: 0,
            parallel: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda_hw >= 0.0 && self.lambda_hw.is_finite()) {
            return bad(format!("lambda_hw must be >= 0, got {}", self.lambda_hw));
        }
        if !(self.surrogate_width > 0.0 && self.surrogate_width.is_finite()) {
            return bad(format!("surrogate_width must be positive, got {}", self.surrogate_width));
        }
        if let Some(k) = self.steepness {
            if !(k > 0.0 && k.is_finite()) {
                return bad(format!("steepness must be positive, got {k}"));
            }
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return bad(format!("init_gain must be positive, got {}", self.init_gain));
        }
        Ok(())
    }

    fn slope(&self) -> f64 {
        self.steepness.unwrap_or(2.0 / self.surrogate_width)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LayerTrace {
    /// Pre-reset potential, or child sum for pooling, at `[t * n_out + i]`.
    u: Vec<f64>,
    /// Output activity at `[t * n_out + i]`.
    s: Vec<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    mode: GradMode,
    width: f64,
    slope: f64,
    n_timesteps: usize,
    input: Vec<f64>,
    layers: Vec<LayerTrace>,
    counts: Vec<f64>,
}

impl Trace {
    /// Summed output activity per output neuron.
    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n_timesteps(&self) -> usize {
        self.n_timesteps
    }

    /// Output layer activity, thresholded at one half.
    pub fn output_train(&self) -> SpikeTrain {
        let last = self.layers.last().expect("trace has layers");
        let n = self.counts.len();
        let mut out = SpikeTrain::new(n, self.n_timesteps);
        for t in 0..self.n_timesteps {
            for i in 0..n {
                out.set(t, i, last.s[t * n + i] >= 0.5);
            }
        }
        out
    }

    /// Activity of layer `k` (`[t * n_out + i]`).
    pub fn layer_activity(&self, k: usize) -> &[f64] {
        &self.layers[k].s
    }

    /// Input plus network activity. In hard mode this is the spike count.
    pub fn total_activity(&self) -> f64 {
        self.input.iter().sum::<f64>() + self.layers.iter().map(|l| l.s.iter().sum::<f64>()).sum::<f64>()
    }
}

/// Runs the network, keeping the per-step potentials and outputs. In hard
/// mode the outputs equal those of [`run_network`] bit for bit.
pub fn forward_with_trace(net: &NetworkTopology, input: &SpikeTrain, cfg: &TrainConfig) -> Result<Trace> {
    cfg.validate()?;
    check_input_train(net, input)?;
    net.check_finite()?;
    let steps = net.n_timesteps();
    let n_in = net.n_in();
    let mut x0 = vec![0.0; steps * n_in];
    for t in 0..steps {
        for (j, &s) in input.frame(t).iter().enumerate() {
            x0[t * n_in + j] = if s { 1.0 } else { 0.0 };
        }
    }
    let slope = cfg.slope();
    let smooth = cfg.grad_mode == GradMode::SmoothForward;
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(net.layers().len());
    for (k, layer) in net.layers().iter().enumerate() {
        let (n_l_in, n_out) = (layer.n_in(), layer.n_out());
        let x = if k == 0 { &x0 } else { &layers[k - 1].s };
        let mut u = vec![0.0; steps * n_out];
        let mut s = vec![0.0; steps * n_out];
        let mut v = vec![0.0; n_out];
        let mut acc = vec![0.0; n_out];
        for t in 0..steps {
            let xt = &x[t * n_l_in..(t + 1) * n_l_in];
            acc.iter_mut().for_each(|a| *a = 0.0);
            weighted_input(layer, xt, &mut acc);
            let ut = &mut u[t * n_out..(t + 1) * n_out];
            let st = &mut s[t * n_out..(t + 1) * n_out];
            match layer.params() {
                None => {
                    for i in 0..n_out {
                        ut[i] = acc[i];
                        st[i] = if smooth {
                            sigmoid(slope * (acc[i] - POOL_CENTER))
                        } else if acc[i] >= 1.0 {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
                Some(p) => {
                    let th = p.v_th_base;
                    for i in 0..n_out {
                        let ui = p.beta * v[i] + acc[i];
                        ut[i] = ui;
                        if smooth {
                            let si = sigmoid(slope * (ui - th) / th);
                            st[i] = si;
                            v[i] = match p.reset_mode {
                                ResetMode::Subtract => ui - th * si,
                                ResetMode::Hard => ui * (1.0 - si) + p.v_reset * si,
                            };
                        } else if ui >= th {
                            st[i] = 1.0;
                            v[i] = p.reset(ui, th);
                        } else {
                            v[i] = ui;
                        }
                    }
                }
            }
        }
        layers.push(LayerTrace { u, s });
    }
    let n_out = net.n_out();
    let last = &layers.last().expect("network has layers").s;
    let mut counts = vec![0.0; n_out];
    for t in 0..steps {
        for i in 0..n_out {
            counts[i] += last[t * n_out + i];
        }
    }
    Ok(Trace {
        mode: cfg.grad_mode,
        width: cfg.surrogate_width,
        slope,
        n_timesteps: steps,
        input: x0,
        layers,
        counts,
    })
}

/// `acc += W x`, visiting nonzero inputs in ascending order like the
/// simulator does.
fn weighted_input(layer: &crate::snn::LayerSpec, x: &[f64], acc: &mut [f64]) {
    let w = layer.weights();
    let n_in = layer.n_in();
    match layer.kind() {
        LayerKind::Dense => {
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                for (i, a) in acc.iter_mut().enumerate() {
                    *a += w[i * n_in + j] * xj;
                }
            }
        }
        LayerKind::Conv2d(_) => {
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                for tap in layer.taps(j) {
                    acc[tap.post as usize] += w[tap.param as usize] * xj;
                }
            }
        }
        LayerKind::Pool2x2(_) => {
            for (j, &xj) in x.iter().enumerate() {
                if xj == 0.0 {
                    continue;
                }
                for tap in layer.taps(j) {
                    acc[tap.post as usize] += xj;
                }
            }
        }
    }
}

/// Softmax cross-entropy over output counts. Returns the loss and its
/// gradient with respect to the counts.
pub fn task_loss(counts: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = counts.iter().map(|c| (c - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() - (counts[target] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| e / z - if i == target { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Per-layer gradients, laid out like [`crate::snn::LayerSpec::weights`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros(net: &NetworkTopology) -> Self {
        Gradients {
            layers: net.layers().iter().map(|l| vec![0.0; l.weights().len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.layers.iter_mut().flatten().for_each(|g| *g *= f);
    }

    pub fn max_abs(&self) -> f64 {
        self.layers.iter().flatten().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Loss and weight gradient for one sample. The mapping cost does not depend
/// on the weights, so only the task loss contributes.
pub fn backward(net: &NetworkTopology, trace: &Trace, target: usize) -> Result<(f64, Gradients)> {
    let steps = trace.n_timesteps;
    let shape_ok = trace.layers.len() == net.layers().len()
        && steps == net.n_timesteps()
        && trace.input.len() == steps * net.n_in()
        && trace
            .layers
            .iter()
            .zip(net.layers())
            .all(|(lt, l)| lt.s.len() == steps * l.n_out());
    if !shape_ok {
        return Err(Error::Config("trace was not produced by this network".into()));
    }
    if target >= net.n_out() {
        return Err(Error::Config(format!(
            "target class {target} outside the {} output neurons",
            net.n_out()
        )));
    }
    let (loss, dcounts) = task_loss(&trace.counts, target);
    let mut grads = Gradients::zeros(net);
    // dL/d(output activity) of the layer being processed, `[t * n + i]`.
    let mut gs: Vec<f64> = (0..steps).flat_map(|_| dcounts.iter().cloned()).collect();
    let hard = trace.mode == GradMode::HardForward;
    for (k, layer) in net.layers().iter().enumerate().rev() {
        let (n_in, n_out) = (layer.n_in(), layer.n_out());
        let lt = &trace.layers[k];
        let x = if k == 0 { &trace.input } else { &trace.layers[k - 1].s };
        let mut gx = vec![0.0; steps * n_in];
        let mut du = vec![0.0; n_out];
        let mut gv = vec![0.0; n_out];
        for t in (0..steps).rev() {
            let row = t * n_out;
            match layer.params() {
                None => {
                    for i in 0..n_out {
                        let z = lt.u[row + i] - POOL_CENTER;
                        du[i] = gs[row + i] * surrogate(hard, z, 1.0, trace.width, trace.slope, lt.s[row + i]);
                    }
                }
                Some(p) => {
                    let th = p.v_th_base;
                    for i in 0..n_out {
                        let (u, s) = (lt.u[row + i], lt.s[row + i]);
                        let (dv_ds, dv_du) = match p.reset_mode {
                            ResetMode::Subtract => (-th, 1.0),
                            ResetMode::Hard => (p.v_reset - u, 1.0 - s),
                        };
                        let ds = gs[row + i] + gv[i] * dv_ds;
                        let fprime = surrogate(hard, (u - th) / th, th, trace.width, trace.slope, s);
                        du[i] = ds * fprime + gv[i] * dv_du;
                        gv[i] = p.beta * du[i];
                    }
                }
            }
            let xt = &x[t * n_in..(t + 1) * n_in];
            let gxt = &mut gx[t * n_in..(t + 1) * n_in];
            let w = layer.weights();
            let gw = &mut grads.layers[k];
            match layer.kind() {
                LayerKind::Dense => {
                    for i in 0..n_out {
                        let d = du[i];
                        if d == 0.0 {
                            continue;
                        }
                        let wrow = &w[i * n_in..(i + 1) * n_in];
                        let grow = &mut gw[i * n_in..(i + 1) * n_in];
                        for j in 0..n_in {
                            grow[j] += d * xt[j];
                            gxt[j] += wrow[j] * d;
                        }
                    }
                }
                LayerKind::Conv2d(_) => {
                    for j in 0..n_in {
                        for tap in layer.taps(j) {
                            let d = du[tap.post as usize];
                            gw[tap.param as usize] += d * xt[j];
                            gxt[j] += w[tap.param as usize] * d;
                        }
                    }
                }
                LayerKind::Pool2x2(_) => {
                    for j in 0..n_in {
                        for tap in layer.taps(j) {
                            gxt[j] += du[tap.post as usize];
                        }
                    }
                }
            }
        }
        gs = gx;
    }
    Ok((loss, grads))
}

/// `ds/du` at normalized distance `z` from threshold `th`.
fn surrogate(hard: bool, z: f64, th: f64, width: f64, slope: f64, s: f64) -> f64 {
    if hard {
        if z.abs() <= width {
            1.0 / (2.0 * width * th)
        } else {
            0.0
        }
    } else {
        slope * s * (1.0 - s) / th
    }
}

/// Fills every weighted layer with uniform values in `+-gain / sqrt(fan_in)`.
pub fn init_weights(net: &mut NetworkTopology, gain: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in net.layers_mut() {
        let fan_in = match layer.kind() {
            LayerKind::Dense => layer.n_in(),
            LayerKind::Conv2d(c) => c.in_channels * c.kernel * c.kernel,
            LayerKind::Pool2x2(_) => continue,
        };
        let a = gain / (fan_in as f64).sqrt();
        for w in layer.weights_mut() {
            *w = rng.gen_range(-a..a);
        }
    }
}

/// Redraws the incoming weights of units that are stuck on `probe`, working
/// front to back, until none are left or `max_rounds` redraws have been
/// spent. Returns the redraw count.
///
/// A unit must fire on, and stay below saturation (a spike every step) on,
/// at least a quarter of the probe samples; a readout unit is judged on the
/// samples of its own class. A stuck unit's potential rarely enters the
/// surrogate window, and a readout that is quiet on its own class never
/// learns to fire for it.
pub fn revive_stuck(
    net: &mut NetworkTopology,
    probe: &[Sample],
    encoder: &EncoderConfig,
    gain: f64,
    seed: u64,
    max_rounds: usize,
) -> Result<usize> {
    if probe.is_empty() {
        return Ok(0);
    }
    let trains = probe
        .iter()
        .enumerate()
        .map(|(k, s)| {
            encode(
                &s.features,
                &EncoderConfig {
                    seed: derive_indexed(encoder.seed, &[k as u64]),
                    ..*encoder
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let everyone: Vec<usize> = (0..probe.len()).collect();
    let n_out = net.n_out();
    let by_class: Vec<Vec<usize>> = (0..n_out)
        .map(|j| {
            let own: Vec<usize> = (0..probe.len()).filter(|&k| probe[k].label == j).collect();
            if own.is_empty() {
                everyone.clone()
            } else {
                own
            }
        })
        .collect();
    let last = net.layers().len() - 1;
    let t_max = net.n_timesteps() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for round in 0..max_rounds {
        let counts = trains
            .par_iter()
            .map(|t| run_network(net, t).map(|(_, st)| st.spike_counts))
            .collect::<Result<Vec<_>>>()?;
        // (fires often enough, unsaturated often enough) over `who`.
        let live = |pop: usize, i: usize, who: &[usize]| {
            let quorum = who.len().div_ceil(4);
            let on = who.iter().filter(|&&k| counts[k][pop][i] > 0).count() >= quorum;
            let off = who.iter().filter(|&&k| counts[k][pop][i] < t_max).count() >= quorum;
            (on, off)
        };
        let mut changed = false;
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let (rows, row_len): (Vec<usize>, usize) = match *layer.kind() {
                LayerKind::Dense => {
                    let who = |o: usize| if l == last { &by_class[o][..] } else { &everyone[..] };
                    let dead = (0..layer.n_out()).filter(|&o| live(l + 1, o, who(o)) != (true, true)).collect();
                    (dead, layer.n_in())
                }
                LayerKind::Conv2d(c) => {
                    let plane = c.out_h() * c.out_w();
                    let dead = (0..c.out_channels)
                        .filter(|&ch| {
                            let (on, off) = (0..plane)
                                .map(|i| live(l + 1, ch * plane + i, &everyone))
                                .fold((false, false), |a, b| (a.0 || b.0, a.1 || b.1));
                            !(on && off)
                        })
                        .collect();
                    (dead, c.in_channels * c.kernel * c.kernel)
                }
                LayerKind::Pool2x2(_) => continue,
            };
            if rows.is_empty() {
                continue;
            }
            let a = gain / (row_len as f64).sqrt();
            let w = layer.weights_mut();
            for r in rows {
                for x in &mut w[r * row_len..(r + 1) * row_len] {
                    *x = rng.gen_range(-a..a);
                }
            }
            changed = true;
            break;
        }
        if !changed {
            return Ok(round);
        }
    }
    Ok(max_rounds)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub hw_loss: f64,
    pub total_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
    pub spikes_per_inference: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,task_loss,hw_loss,total_loss,train_acc,val_acc,spikes_per_inference\n");
        for r in &self.epochs {
            let val = r.val_acc.map(|v| v.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.epoch, r.task_loss, r.hw_loss, r.total_loss, r.train_acc, val, r.spikes_per_inference
            ));
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub net: NetworkTopology,
    pub mapping: Mapping,
    pub history: History,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// Mean input plus network spikes per sample.
    pub spikes_per_inference: f64,
    /// Samples for which no output neuron fired.
    pub low_confidence: usize,
}

fn check_samples(net: &NetworkTopology, samples: &[Sample]) -> Result<()> {
    for (k, s) in samples.iter().enumerate() {
        if s.features.len() != net.n_in() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                what: "sample features",
                expected: net.n_in(),
                actual: s.features.len(),
            });
        }
        if s.label >= net.n_out() {
            return Err(Error::Config(format!(
                "sample {k} label {} exceeds the network's {} outputs",
                s.label,
                net.n_out()
            )));
        }
    }
    Ok(())
}

fn encoder_for(net: &NetworkTopology, encoder: &EncoderConfig) -> Result<()> {
    if encoder.timesteps != net.n_timesteps() {
        return Err(Error::Config(format!(
            "encoder horizon {} differs from the network's {} timesteps",
            encoder.timesteps,
            net.n_timesteps()
        )));
    }
    encoder.validate()
}

/// Classifies every sample with the simulator. Sample `k` is encoded with
/// seed `derive_indexed(encoder.seed, [k])`.
pub fn evaluate(net: &NetworkTopology, samples: &[Sample], encoder: &EncoderConfig) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    encoder_for(net, encoder)?;
    check_samples(net, samples)?;
    let results: Vec<(bool, bool, u64)> = samples
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let cfg = EncoderConfig {
                seed: derive_indexed(encoder.seed, &[k as u64]),
                ..*encoder
            };
            let input = encode(&s.features, &cfg)?;
            let (out, state) = run_network(net, &input)?;
            let pred = classify_counts(&out.counts());
            Ok((pred.class == s.label, pred.low_confidence, state.total_spikes()))
        })
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    Ok(Evaluation {
        accuracy: results.iter().filter(|r| r.0).count() as f64 / n,
        spikes_per_inference: results.iter().map(|r| r.2 as f64).sum::<f64>() / n,
        low_confidence: results.iter().filter(|r| r.1).count(),
    })
}

/// Index of the largest count, ties to the lowest index.
fn argmax(c: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in c.iter().enumerate() {
        if x > c[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD on the task loss, refreshing the core mapping after every
/// epoch. Weights are used as given; call [`init_weights`] first for a fresh
/// network.
pub fn train(
    mut net: NetworkTopology,
    train_set: &[Sample],
    val_set: &[Sample],
    chip: &ChipModel,
    encoder: &EncoderConfig,
    mapper: &MapperConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    mapper.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    encoder_for(&net, encoder)?;
    check_samples(&net, train_set)?;
    check_samples(&net, val_set)?;
    let graph = SynapseGraph::from_topology(&net);
    let mut mapping = map_greedy(&graph, chip)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = History::default();
    for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let (mut loss_sum, mut correct, mut spikes) = (0.0, 0usize, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            let per_sample = |&idx: &usize| -> Result<(f64, Gradients, bool, f64)> {
                let s = &train_set[idx];
                let enc = EncoderConfig {
                    seed: derive_indexed(encoder.seed, &[epoch as u64, idx as u64]),
                    ..*encoder
                };
                let input = encode(&s.features, &enc)?;
                let trace = forward_with_trace(&net, &input, cfg)?;
                let (loss, g) = backward(&net, &trace, s.label)?;
                Ok((loss, g, argmax(trace.counts()) == s.label, trace.total_activity()))
            };
            let results: Vec<_> = if cfg.parallel {
                batch.par_iter().map(per_sample).collect::<Result<_>>()?
            } else {
                batch.iter().map(per_sample).collect::<Result<_>>()?
            };
            let mut grad = Gradients::zeros(&net);
            for (loss, g, ok, sp) in &results {
                loss_sum += loss;
                correct += *ok as usize;
                spikes += sp;
                grad.add(g);
            }
            grad.scale(-cfg.learning_rate / batch.len() as f64);
            for (layer, g) in net.layers_mut().iter_mut().zip(&grad.layers) {
                for (w, d) in layer.weights_mut().iter_mut().zip(g) {
                    *w += d;
                }
            }
            if net.check_finite().is_err() {
                return Err(Error::NonFinite {
                    layer: 0,
                    what: "weights after an update (lower the learning rate)",
                });
            }
        }
        mapping = map_optimize(&graph, chip, mapper, &mapping)?;
        let hw = hw_loss(&mapping, chip, mapper)?;
        let n = train_set.len() as f64;
        let task = loss_sum / n;
        let val_acc = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(&net, val_set, encoder)?.accuracy)
        };
        history.epochs.push(EpochRecord {
            epoch: epoch + 1,
            task_loss: task,
            hw_loss: hw,
            total_loss: task + cfg.lambda_hw * hw,
            train_acc: correct as f64 / n,
            val_acc,
            spikes_per_inference: spikes / n,
        });
    }
    Ok(TrainOutcome { net, mapping, history })
}

fn shuffle(v: &mut [usize], rng: &mut impl Rng) {
    use rand::seq::SliceRandom;
    v.shuffle(rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::{LayerSpec, NeuronParams};

    fn tiny() -> NetworkTopology {
        let p = NeuronParams::new(0.9, 1.0).unwrap();
        let l0 = LayerSpec::dense(3, 2, vec![0.6, -0.2, 0.9, 0.3, 0.8, -0.4], p).unwrap();
        let l1 = LayerSpec::dense(2, 2, vec![1.2, -0.3, 0.1, 0.9], p).unwrap();
        NetworkTopology::new(vec![l0, l1], 6).unwrap()
    }

    fn pattern(n: usize, steps: usize) -> SpikeTrain {
        let mut s = SpikeTrain::new(n, steps);
        for t in 0..steps {
            for j in 0..n {
                s.set(t, j, (t + 2 * j) % 3 != 0);
            }
        }
        s
    }

    #[test]
    fn hard_trace_matches_simulator() {
        let net = tiny();
        let input = pattern(3, 6);
        let trace = forward_with_trace(&net, &input, &TrainConfig::default()).unwrap();
        let (out, state) = run_network(&net, &input).unwrap();
        assert_eq!(trace.output_train(), out);
        assert_eq!(trace.total_activity(), state.total_spikes() as f64);
    }

    #[test]
    fn zero_weights_give_uniform_readout() {
        let p = NeuronParams::default();
        let l0 = LayerSpec::dense(2, 4, vec![0.0; 8], p).unwrap();
        let net = NetworkTopology::new(vec![l0], 5).unwrap();
        let trace = forward_with_trace(&net, &pattern(2, 5), &TrainConfig::default()).unwrap();
        let (loss, _) = backward(&net, &trace, 1).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn silent_input_has_zero_gradient() {
        let net = tiny();
        let trace = forward_with_trace(&net, &SpikeTrain::new(3, 6), &TrainConfig::default()).unwrap();
        let (_, g) = backward(&net, &trace, 0).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn steep_smooth_forward_approaches_hard() {
        let net = tiny();
        let input = pattern(3, 6);
        let hard = forward_with_trace(&net, &input, &TrainConfig::default()).unwrap();
        let cfg = TrainConfig {
            grad_mode: GradMode::SmoothForward,
            steepness: Some(1e3),
            ..Default::default()
        };
        let smooth = forward_with_trace(&net, &input, &cfg).unwrap();
        for (a, b) in hard.counts().iter().zip(smooth.counts()) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn task_loss_gradient() {
        let (l, g) = task_loss(&[1.0, 3.0, 0.0], 1);
        let z = 1f64.exp() + 3f64.exp() + 1.0;
        assert!((l - (z.ln() - 3.0)).abs() < 1e-12);
        assert!((g.iter().sum::<f64>()).abs() < 1e-12);
        assert!(g[1] < 0.0 && g[0] > 0.0);
    }

    #[test]
    fn bad_target_and_trace_rejected() {
        let net = tiny();
        let trace = forward_with_trace(&net, &pattern(3, 6), &TrainConfig::default()).unwrap();
        assert!(backward(&net, &trace, 2).is_err());
        let mut other = tiny();
        other.set_n_timesteps(4).unwrap();
        assert!(backward(&other, &trace, 0).is_err());
    }

    #[test]
    fn init_respects_fan_in() {
        let mut net = tiny();
        init_weights(&mut net, 1.0, 3);
        let a = 1.0 / 3f64.sqrt();
        assert!(net.layers()[0].weights().iter().all(|w| w.abs() < a));
        let mut again = tiny();
        init_weights(&mut again, 1.0, 3);
        assert_eq!(net, again);
    }
}
