//! Discrete-time leaky integrate-and-fire simulation.
//!
//! Each weighted layer integrates its input current into the membrane,
//! `v <- beta * v + sum_j w_ij * s_j`, fires wherever `v >= threshold`, and
//! then resets (subtract `threshold`, or jump to `v_reset`). The input current
//! of a neuron is always accumulated from `0.0` over active presynaptic
//! indices in ascending order before it is added to the decayed potential, so
//! results are reproducible bit-for-bit by any simulator that follows the
//! same order.
//!
//! Layers run in sequence within a timestep: layer `k` sees layer `k - 1`'s
//! spikes from the same step. Potentials start at zero for every run.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResetMode {
    /// `v <- v - v_th` after a spike.
    #[default]
    Subtract,
    /// `v <- v_reset` after a spike.
    Hard,
}

impl ResetMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ResetMode::Subtract => "subtract",
            ResetMode::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "subtract" => Some(ResetMode::Subtract),
            "hard" => Some(ResetMode::Hard),
            _ => None,
        }
    }
}

/// Per-layer neuron constants. `beta = exp(-dt / tau_m)`; resting potential
/// is fixed at zero and membrane resistance is folded into the weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronParams {
    pub beta: f64,
    pub v_th_base: f64,
    /// Only used in [`ResetMode::Hard`].
    pub v_reset: f64,
    pub reset_mode: ResetMode,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            beta: 0.9,
            v_th_base: 1.0,
            v_reset: 0.0,
            reset_mode: ResetMode::Subtract,
        }
    }
}

impl NeuronParams {
    pub fn new(beta: f64, v_th_base: f64) -> Result<Self> {
        let p = NeuronParams {
            beta,
            v_th_base,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_hard_reset(mut self, v_reset: f64) -> Self {
        self.reset_mode = ResetMode::Hard;
        self.v_reset = v_reset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if !(self.v_th_base > 0.0 && self.v_th_base.is_finite()) {
            return Err(Error::Config(format!(
                "v_th_base must be positive, got {}",
                self.v_th_base
            )));
        }
        if !self.v_reset.is_finite() {
            return Err(Error::Config("v_reset must be finite".into()));
        }
        Ok(())
    }

    /// Potential after a spike fired from pre-reset potential `v`.
    #[inline]
    pub fn reset(&self, v: f64, threshold: f64) -> f64 {
        match self.reset_mode {
            ResetMode::Subtract => v - threshold,
            ResetMode::Hard => self.v_reset,
        }
    }
}

/// Stride-1 2-D convolution geometry. Neurons are laid out channel-major:
/// index `(c * h + y) * w + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
}

impl ConvShape {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.padding + 1).saturating_sub(self.kernel)
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.padding + 1).saturating_sub(self.kernel)
    }

    pub fn n_in(&self) -> usize {
        self.in_channels * self.in_h * self.in_w
    }

    pub fn n_out(&self) -> usize {
        self.out_channels * self.out_h() * self.out_w()
    }

    pub fn n_kernel(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("conv2d needs nonzero kernel and channel counts".into()));
        }
        if self.out_h() == 0 || self.out_w() == 0 {
            return Err(Error::Config(format!(
                "conv2d kernel {} does not fit a {}x{} input with padding {}",
                self.kernel, self.in_h, self.in_w, self.padding
            )));
        }
        Ok(())
    }
}

/// Non-overlapping 2x2 spike pooling; odd trailing rows/columns are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolShape {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl PoolShape {
    pub fn out_h(&self) -> usize {
        self.in_h / 2
    }

    pub fn out_w(&self) -> usize {
        self.in_w / 2
    }

    pub fn n_in(&self) -> usize {
        self.channels * self.in_h * self.in_w
    }

    pub fn n_out(&self) -> usize {
        self.channels * self.out_h() * self.out_w()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Conv2d(ConvShape),
    Pool2x2(PoolShape),
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv2d(_) => "conv2d",
            LayerKind::Pool2x2(_) => "pool2x2",
        }
    }
}

/// One structural synapse of a sparse layer: presynaptic neuron `pre` (the
/// index into the fan-out table) drives `post` through parameter `param`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tap {
    pub post: u32,
    pub param: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    kind: LayerKind,
    n_in: usize,
    n_out: usize,
    params: Option<NeuronParams>,
    /// Trainable parameters: the `n_out x n_in` row-major matrix for dense
    /// layers, the `[out_c][in_c][ky][kx]` kernel for conv layers, empty for
    /// pooling.
    weights: Vec<f64>,
    /// Per-presynaptic-neuron targets for conv and pool layers, sorted by
    /// `post`. Empty for dense layers, whose fan-out is every output.
    fan_out: Vec<Vec<Tap>>,
}

impl LayerSpec {
    pub fn dense(n_in: usize, n_out: usize, weights: Vec<f64>, params: NeuronParams) -> Result<Self> {
        params.validate()?;
        if n_in == 0 || n_out == 0 {
            return Err(Error::Config("dense layer needs nonzero n_in and n_out".into()));
        }
        if weights.len() != n_in * n_out {
            return Err(Error::DimensionMismatch {
                layer: 0,
                what: "weight matrix",
                expected: n_in * n_out,
                actual: weights.len(),
            });
        }
        Ok(LayerSpec {
            kind: LayerKind::Dense,
            n_in,
            n_out,
            params: Some(params),
            weights,
            fan_out: Vec::new(),
        })
    }

    pub fn conv2d(shape: ConvShape, kernel: Vec<f64>, params: NeuronParams) -> Result<Self> {
        params.validate()?;
        shape.validate()?;
        if kernel.len() != shape.n_kernel() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                what: "conv kernel",
                expected: shape.n_kernel(),
                actual: kernel.len(),
            });
        }
        Ok(LayerSpec {
            kind: LayerKind::Conv2d(shape),
            n_in: shape.n_in(),
            n_out: shape.n_out(),
            params: Some(params),
            weights: kernel,
            fan_out: conv_taps(&shape),
        })
    }

    pub fn pool2x2(shape: PoolShape) -> Result<Self> {
        if shape.n_out() == 0 {
            return Err(Error::Config(format!(
                "pool2x2 needs at least a 2x2 input, got {}x{}",
                shape.in_h, shape.in_w
            )));
        }
        Ok(LayerSpec {
            kind: LayerKind::Pool2x2(shape),
            n_in: shape.n_in(),
            n_out: shape.n_out(),
            params: None,
            weights: Vec::new(),
            fan_out: pool_taps(&shape),
        })
    }

    pub fn kind(&self) -> &LayerKind {
        &self.kind
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn params(&self) -> Option<&NeuronParams> {
        self.params.as_ref()
    }

    pub fn params_mut(&mut self) -> Option<&mut NeuronParams> {
        self.params.as_mut()
    }

    pub fn has_weights(&self) -> bool {
        self.params.is_some()
    }

    /// Trainable parameters (see field docs for layout).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// The layer as an `n_out x n_in` row-major synaptic matrix. Conv layers
    /// are lowered to their equivalent sparse matrix; pooling has no weights.
    pub fn dense_weights(&self) -> Option<Vec<f64>> {
        match self.kind {
            LayerKind::Dense => Some(self.weights.clone()),
            LayerKind::Conv2d(_) => {
                let mut m = vec![0.0; self.n_in * self.n_out];
                for (pre, taps) in self.fan_out.iter().enumerate() {
                    for t in taps {
                        m[t.post as usize * self.n_in + pre] = self.weights[t.param as usize];
                    }
                }
                Some(m)
            }
            LayerKind::Pool2x2(_) => None,
        }
    }

    /// Number of structural synapses leaving presynaptic neuron `pre`.
    pub fn fan_out(&self, pre: usize) -> usize {
        match self.kind {
            LayerKind::Dense => self.n_out,
            _ => self.fan_out[pre].len(),
        }
    }

    pub fn n_synapses(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.n_in * self.n_out,
            _ => self.fan_out.iter().map(Vec::len).sum(),
        }
    }

    /// Visits every structural synapse as `(pre, post, param_index)`, in
    /// ascending `pre` then ascending `post`. Pool synapses report param 0.
    pub fn for_each_synapse(&self, mut f: impl FnMut(usize, usize, usize)) {
        match self.kind {
            LayerKind::Dense => {
                for pre in 0..self.n_in {
                    for post in 0..self.n_out {
                        f(pre, post, post * self.n_in + pre);
                    }
                }
            }
            _ => {
                for (pre, taps) in self.fan_out.iter().enumerate() {
                    for t in taps {
                        f(pre, t.post as usize, t.param as usize);
                    }
                }
            }
        }
    }

    pub(crate) fn taps(&self, pre: usize) -> &[Tap] {
        &self.fan_out[pre]
    }

    /// Adds `W * s` into `acc` for the binary input `s`, visiting active
    /// inputs in ascending order. Returns the number of synaptic operations.
    pub(crate) fn accumulate(&self, in_spikes: &[bool], acc: &mut [f64]) -> u64 {
        let mut sops = 0u64;
        match self.kind {
            LayerKind::Dense => {
                for (j, _) in in_spikes.iter().enumerate().filter(|(_, &s)| s) {
                    for (i, a) in acc.iter_mut().enumerate() {
                        *a += self.weights[i * self.n_in + j];
                    }
                    sops += self.n_out as u64;
                }
            }
            LayerKind::Conv2d(_) => {
                for (j, _) in in_spikes.iter().enumerate().filter(|(_, &s)| s) {
                    for t in &self.fan_out[j] {
                        acc[t.post as usize] += self.weights[t.param as usize];
                    }
                    sops += self.fan_out[j].len() as u64;
                }
            }
            LayerKind::Pool2x2(_) => {
                for (j, _) in in_spikes.iter().enumerate().filter(|(_, &s)| s) {
                    for t in &self.fan_out[j] {
                        acc[t.post as usize] += 1.0;
                    }
                    sops += self.fan_out[j].len() as u64;
                }
            }
        }
        sops
    }

    fn check_finite(&self, layer: usize) -> Result<()> {
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { layer, what: "weights" });
        }
        if let Some(p) = &self.params {
            if !(p.beta.is_finite() && p.v_th_base.is_finite() && p.v_reset.is_finite()) {
                return Err(Error::NonFinite { layer, what: "neuron parameters" });
            }
        }
        Ok(())
    }
}

fn conv_taps(s: &ConvShape) -> Vec<Vec<Tap>> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut fan_out = vec![Vec::new(); s.n_in()];
    for oc in 0..s.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let post = ((oc * oh + oy) * ow + ox) as u32;
                for ic in 0..s.in_channels {
                    for ky in 0..s.kernel {
                        for kx in 0..s.kernel {
                            let iy = (oy + ky) as isize - s.padding as isize;
                            let ix = (ox + kx) as isize - s.padding as isize;
                            if iy < 0 || ix < 0 || iy >= s.in_h as isize || ix >= s.in_w as isize {
                                continue;
                            }
                            let pre = (ic * s.in_h + iy as usize) * s.in_w + ix as usize;
                            let param = (((oc * s.in_channels + ic) * s.kernel + ky) * s.kernel + kx) as u32;
                            fan_out[pre].push(Tap { post, param });
                        }
                    }
                }
            }
        }
    }
    // `post` ascends with `oc` outermost, so each list is already sorted.
    fan_out
}

fn pool_taps(s: &PoolShape) -> Vec<Vec<Tap>> {
    let (oh, ow) = (s.out_h(), s.out_w());
    let mut fan_out = vec![Vec::new(); s.n_in()];
    for c in 0..s.channels {
        for y in 0..oh * 2 {
            for x in 0..ow * 2 {
                let pre = (c * s.in_h + y) * s.in_w + x;
                let post = ((c * oh + y / 2) * ow + x / 2) as u32;
                fan_out[pre].push(Tap { post, param: 0 });
            }
        }
    }
    fan_out
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkTopology {
    layers: Vec<LayerSpec>,
    n_timesteps: usize,
}

impl NetworkTopology {
    pub fn new(layers: Vec<LayerSpec>, n_timesteps: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layer list"));
        }
        if n_timesteps == 0 {
            return Err(Error::Config("n_timesteps must be at least 1".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::DimensionMismatch {
                    layer: k + 1,
                    what: "input",
                    expected: pair[0].n_out,
                    actual: pair[1].n_in,
                });
            }
        }
        Ok(NetworkTopology { layers, n_timesteps })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerSpec] {
        &mut self.layers
    }

    pub fn n_timesteps(&self) -> usize {
        self.n_timesteps
    }

    pub fn set_n_timesteps(&mut self, t: usize) -> Result<()> {
        if t == 0 {
            return Err(Error::Config("n_timesteps must be at least 1".into()));
        }
        self.n_timesteps = t;
        Ok(())
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    /// Population sizes: the input population followed by each layer's output.
    pub fn population_sizes(&self) -> Vec<usize> {
        std::iter::once(self.n_in())
            .chain(self.layers.iter().map(LayerSpec::n_out))
            .collect()
    }

    /// Total neurons including the input population.
    pub fn n_neurons(&self) -> usize {
        self.population_sizes().iter().sum()
    }

    pub fn n_synapses(&self) -> usize {
        self.layers.iter().map(LayerSpec::n_synapses).sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (k, l) in self.layers.iter().enumerate() {
            l.check_finite(k)?;
        }
        Ok(())
    }
}

/// Time-major binary spike record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpikeTrain {
    n_neurons: usize,
    n_timesteps: usize,
    bits: Vec<bool>,
}

impl SpikeTrain {
    pub fn new(n_neurons: usize, n_timesteps: usize) -> Self {
        SpikeTrain {
            n_neurons,
            n_timesteps,
            bits: vec![false; n_neurons * n_timesteps],
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_timesteps(&self) -> usize {
        self.n_timesteps
    }

    pub fn frame(&self, t: usize) -> &[bool] {
        &self.bits[t * self.n_neurons..(t + 1) * self.n_neurons]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [bool] {
        &mut self.bits[t * self.n_neurons..(t + 1) * self.n_neurons]
    }

    pub fn get(&self, t: usize, neuron: usize) -> bool {
        self.bits[t * self.n_neurons + neuron]
    }

    /// Panics if `(t, neuron)` is out of range.
    pub fn set(&mut self, t: usize, neuron: usize, fired: bool) {
        assert!(t < self.n_timesteps && neuron < self.n_neurons, "spike ({t}, {neuron}) out of range");
        self.bits[t * self.n_neurons + neuron] = fired;
    }

    pub fn total_spikes(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn counts(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.n_neurons];
        for t in 0..self.n_timesteps {
            for (n, &s) in self.frame(t).iter().enumerate() {
                c[n] += s as u64;
            }
        }
        c
    }

    pub fn first_spike(&self, neuron: usize) -> Option<usize> {
        (0..self.n_timesteps).find(|&t| self.get(t, neuron))
    }

    /// Events as `(t, neuron)` in time-major order.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_neurons.max(1);
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i / n, i % n))
    }
}

/// Simulation state. Spike counts are indexed by population: entry 0 is the
/// input population, entry `k + 1` is layer `k`'s output.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub v: Vec<Vec<f64>>,
    pub spike_counts: Vec<Vec<u64>>,
    pub sop_count: u64,
    pub steps: usize,
}

impl SimState {
    pub fn new(net: &NetworkTopology) -> Self {
        SimState {
            v: net
                .layers
                .iter()
                .map(|l| vec![0.0; if l.has_weights() { l.n_out } else { 0 }])
                .collect(),
            spike_counts: net.population_sizes().into_iter().map(|n| vec![0; n]).collect(),
            sop_count: 0,
            steps: 0,
        }
    }

    pub fn total_spikes(&self) -> u64 {
        self.spike_counts.iter().flatten().sum()
    }

    /// Spikes emitted by simulated layers, excluding the input population.
    pub fn network_spikes(&self) -> u64 {
        self.spike_counts.iter().skip(1).flatten().sum()
    }

    pub fn n_neurons(&self) -> usize {
        self.spike_counts.iter().map(Vec::len).sum()
    }

    /// Adds another run's event counts into this one; potentials are left
    /// untouched.
    pub fn absorb(&mut self, other: &SimState) {
        for (a, b) in self.spike_counts.iter_mut().zip(&other.spike_counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.sop_count += other.sop_count;
        self.steps += other.steps;
    }
}

/// Advances one layer by one timestep with the given firing threshold,
/// writing output spikes into `out`. Returns the synaptic operations
/// performed. Pooling layers ignore `v` and `threshold`.
pub fn step_layer(
    layer_index: usize,
    layer: &LayerSpec,
    v: &mut [f64],
    in_spikes: &[bool],
    threshold: f64,
    out: &mut [bool],
) -> Result<u64> {
    let mismatch = |what, expected, actual| Error::DimensionMismatch {
        layer: layer_index,
        what,
        expected,
        actual,
    };
    if in_spikes.len() != layer.n_in {
        return Err(mismatch("input spike vector", layer.n_in, in_spikes.len()));
    }
    if out.len() != layer.n_out {
        return Err(mismatch("output spike vector", layer.n_out, out.len()));
    }
    let mut acc = vec![0.0; layer.n_out];
    let sops = layer.accumulate(in_spikes, &mut acc);
    match &layer.params {
        None => {
            for (o, a) in out.iter_mut().zip(&acc) {
                *o = *a >= 1.0;
            }
        }
        Some(p) => {
            if v.len() != layer.n_out {
                return Err(mismatch("membrane state", layer.n_out, v.len()));
            }
            for ((vi, o), a) in v.iter_mut().zip(out.iter_mut()).zip(&acc) {
                *vi = p.beta * *vi + a;
                *o = *vi >= threshold;
                if *o {
                    *vi = p.reset(*vi, threshold);
                }
            }
        }
    }
    Ok(sops)
}

/// Stateful stepper over a whole network. Thresholds are per layer and may be
/// changed between steps.
pub struct Simulator<'a> {
    net: &'a NetworkTopology,
    state: SimState,
    thresholds: Vec<f64>,
    frames: Vec<Vec<bool>>,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a NetworkTopology) -> Result<Self> {
        net.check_finite()?;
        Ok(Simulator {
            net,
            state: SimState::new(net),
            thresholds: net
                .layers
                .iter()
                .map(|l| l.params.map_or(1.0, |p| p.v_th_base))
                .collect(),
            frames: net.layers.iter().map(|l| vec![false; l.n_out]).collect(),
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn set_threshold(&mut self, layer: usize, threshold: f64) {
        self.thresholds[layer] = threshold;
    }

    /// Output spikes of layer `k` from the most recent step.
    pub fn layer_output(&self, k: usize) -> &[bool] {
        &self.frames[k]
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Runs one timestep and returns the last layer's spikes.
    pub fn step(&mut self, input: &[bool]) -> Result<&[bool]> {
        if input.len() != self.net.n_in() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                what: "input frame",
                expected: self.net.n_in(),
                actual: input.len(),
            });
        }
        for (n, &s) in input.iter().enumerate() {
            self.state.spike_counts[0][n] += s as u64;
        }
        for (k, layer) in self.net.layers.iter().enumerate() {
            let (before, rest) = self.frames.split_at_mut(k);
            let src: &[bool] = if k == 0 { input } else { &before[k - 1] };
            let out = &mut rest[0];
            self.state.sop_count +=
                step_layer(k, layer, &mut self.state.v[k], src, self.thresholds[k], out)?;
            for (n, &s) in out.iter().enumerate() {
                self.state.spike_counts[k + 1][n] += s as u64;
            }
        }
        self.state.steps += 1;
        Ok(self.frames.last().map(Vec::as_slice).unwrap_or(&[]))
    }

    pub fn into_state(self) -> SimState {
        self.state
    }
}

pub(crate) fn check_input_train(net: &NetworkTopology, input: &SpikeTrain) -> Result<()> {
    if input.n_neurons() != net.n_in() || input.n_timesteps() != net.n_timesteps() {
        return Err(Error::TrainShape {
            expected_neurons: net.n_in(),
            expected_steps: net.n_timesteps(),
            neurons: input.n_neurons(),
            steps: input.n_timesteps(),
        });
    }
    Ok(())
}

/// Simulates `net` over its full horizon. Deterministic in its inputs.
pub fn run_network(net: &NetworkTopology, input: &SpikeTrain) -> Result<(SpikeTrain, SimState)> {
    check_input_train(net, input)?;
    let mut sim = Simulator::new(net)?;
    let mut output = SpikeTrain::new(net.n_out(), net.n_timesteps());
    for t in 0..net.n_timesteps() {
        let out = sim.step(input.frame(t))?;
        output.frame_mut(t).copy_from_slice(out);
    }
    Ok((output, sim.into_state()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prediction {
    pub class: usize,
    /// Set when no output neuron fired.
    pub low_confidence: bool,
}

/// Argmax of per-neuron spike counts, ties to the lowest index.
pub fn classify(output: &SpikeTrain) -> Prediction {
    classify_counts(&output.counts())
}

pub fn classify_counts(counts: &[u64]) -> Prediction {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Prediction {
        class: best,
        low_confidence: counts.iter().all(|&c| c == 0),
    }
}
