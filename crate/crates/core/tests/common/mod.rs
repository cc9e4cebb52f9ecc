//! Oracles shared by the integration tests: a straight-line LIF reference,
//! random network generators, exhaustive placement and finite differences.
#![allow(dead_code)]

use edgespike::hardware::{ChipModel, MapperConfig, SynapseGraph};
use edgespike::snn::{ConvShape, LayerKind, LayerSpec, NetworkTopology, NeuronParams, PoolShape, SpikeTrain};
use edgespike::training::{backward, forward_with_trace, task_loss, GradMode, TrainConfig};
use rand::Rng;

// ------------------------------------------------------------ reference LIF

pub struct Reference {
    /// `spikes[k][t][i]`: layer `k`, step `t`, neuron `i`.
    pub spikes: Vec<Vec<Vec<bool>>>,
    pub v: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub sops: u64,
}

/// Presynaptic contributions `(pre, weight)` of one postsynaptic neuron, in
/// ascending `pre`. Built from the layer geometry, not the library's tap lists.
fn inputs_of(layer: &LayerSpec, post: usize) -> Vec<(usize, f64)> {
    let w = layer.weights();
    match *layer.kind() {
        LayerKind::Dense => (0..layer.n_in()).map(|j| (j, w[post * layer.n_in() + j])).collect(),
        LayerKind::Conv2d(c) => {
            let (oh, ow) = (c.out_h(), c.out_w());
            let oc = post / (oh * ow);
            let oy = (post / ow) % oh;
            let ox = post % ow;
            let mut v = Vec::new();
            for ic in 0..c.in_channels {
                for ky in 0..c.kernel {
                    for kx in 0..c.kernel {
                        let iy = (oy + ky) as isize - c.padding as isize;
                        let ix = (ox + kx) as isize - c.padding as isize;
                        if iy < 0 || ix < 0 || iy >= c.in_h as isize || ix >= c.in_w as isize {
                            continue;
                        }
                        let pre = (ic * c.in_h + iy as usize) * c.in_w + ix as usize;
                        let k = ((oc * c.in_channels + ic) * c.kernel + ky) * c.kernel + kx;
                        v.push((pre, w[k]));
                    }
                }
            }
            v
        }
        LayerKind::Pool2x2(p) => {
            let (oh, ow) = (p.out_h(), p.out_w());
            let c = post / (oh * ow);
            let y = (post / ow) % oh;
            let x = post % ow;
            let mut v = Vec::new();
            for dy in 0..2 {
                for dx in 0..2 {
                    v.push(((c * p.in_h + 2 * y + dy) * p.in_w + 2 * x + dx, 1.0));
                }
            }
            v
        }
    }
}

pub fn reference_run(net: &NetworkTopology, input: &SpikeTrain) -> Reference {
    let layers = net.layers();
    let steps = net.n_timesteps();
    let wiring: Vec<Vec<Vec<(usize, f64)>>> =
        layers.iter().map(|l| (0..l.n_out()).map(|i| inputs_of(l, i)).collect()).collect();
    let mut v: Vec<Vec<f64>> = layers
        .iter()
        .map(|l| vec![0.0; if l.params().is_some() { l.n_out() } else { 0 }])
        .collect();
    let mut spikes = vec![Vec::new(); layers.len()];
    let mut counts: Vec<Vec<u64>> = net.population_sizes().iter().map(|&n| vec![0; n]).collect();
    let mut sops = 0u64;
    for t in 0..steps {
        let mut prev: Vec<bool> = input.frame(t).to_vec();
        for (n, &s) in prev.iter().enumerate() {
            counts[0][n] += s as u64;
        }
        for (k, layer) in layers.iter().enumerate() {
            let mut out = vec![false; layer.n_out()];
            for i in 0..layer.n_out() {
                let mut acc = 0.0;
                for &(j, w) in &wiring[k][i] {
                    if prev[j] {
                        acc += w;
                        sops += 1;
                    }
                }
                match layer.params() {
                    None => out[i] = acc >= 1.0,
                    Some(p) => {
                        let th = p.v_th_base;
                        let u = p.beta * v[k][i] + acc;
                        out[i] = u >= th;
                        v[k][i] = match (out[i], p.reset_mode) {
                            (false, _) => u,
                            (true, edgespike::snn::ResetMode::Subtract) => u - th,
                            (true, edgespike::snn::ResetMode::Hard) => p.v_reset,
                        };
                    }
                }
            }
            for (n, &s) in out.iter().enumerate() {
                counts[k + 1][n] += s as u64;
            }
            spikes[k].push(out.clone());
            prev = out;
        }
    }
    Reference { spikes, v, counts, sops }
}

// ---------------------------------------------------------- random networks

pub fn random_params(rng: &mut impl Rng) -> NeuronParams {
    let p = NeuronParams::new(rng.gen_range(0.5..=1.0), rng.gen_range(0.4..1.6)).unwrap();
    if rng.gen_bool(0.4) {
        p.with_hard_reset(rng.gen_range(-0.3..0.3))
    } else {
        p
    }
}

fn weights(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// A random network of at most `max_neurons` neurons (input included) and
/// at most three layers. Mostly dense chains, sometimes conv + pool + dense.
pub fn random_net(rng: &mut impl Rng, max_neurons: usize, max_t: usize) -> NetworkTopology {
    let t = rng.gen_range(1..=max_t);
    if max_neurons >= 21 && rng.gen_bool(0.25) {
        // 1x3x3 input, 2 channels of 2x2 conv, pooling, dense readout: 9 + 8 + 2 + n_out.
        let conv = ConvShape {
            in_channels: 1,
            in_h: 3,
            in_w: 3,
            out_channels: 2,
            kernel: 2,
            padding: 0,
        };
        let pool = PoolShape {
            channels: 2,
            in_h: 2,
            in_w: 2,
        };
        let n_out = rng.gen_range(1..=(max_neurons - 19).min(4));
        let layers = vec![
            LayerSpec::conv2d(conv, weights(rng, conv.n_kernel(), -0.6, 1.0), random_params(rng)).unwrap(),
            LayerSpec::pool2x2(pool).unwrap(),
            LayerSpec::dense(2, n_out, weights(rng, 2 * n_out, -0.5, 1.5), random_params(rng)).unwrap(),
        ];
        return NetworkTopology::new(layers, t).unwrap();
    }
    let n_layers = rng.gen_range(1..=3);
    let mut sizes = vec![rng.gen_range(1..=8)];
    for _ in 0..n_layers {
        let used: usize = sizes.iter().sum();
        let room = max_neurons.saturating_sub(used);
        if room == 0 {
            break;
        }
        sizes.push(rng.gen_range(1..=room.min(10)));
    }
    if sizes.len() == 1 {
        sizes[0] = sizes[0].min(max_neurons - 1);
        sizes.push(1);
    }
    let layers = sizes
        .windows(2)
        .map(|w| LayerSpec::dense(w[0], w[1], weights(rng, w[0] * w[1], -0.7, 1.2), random_params(rng)).unwrap())
        .collect();
    NetworkTopology::new(layers, t).unwrap()
}

pub fn random_input(rng: &mut impl Rng, n: usize, t: usize) -> SpikeTrain {
    let p = rng.gen_range(0.1..0.9);
    let mut s = SpikeTrain::new(n, t);
    for step in 0..t {
        for i in 0..n {
            s.set(step, i, rng.gen_bool(p));
        }
    }
    s
}

/// Index of the first mismatch between the library run and the reference,
/// or `None` when they agree bit for bit.
pub fn compare_with_reference(net: &NetworkTopology, input: &SpikeTrain) -> Option<String> {
    let (out, state) = edgespike::snn::run_network(net, input).unwrap();
    let r = reference_run(net, input);
    let last = r.spikes.last().unwrap();
    for t in 0..net.n_timesteps() {
        if out.frame(t) != last[t].as_slice() {
            return Some(format!("output spikes differ at step {t}"));
        }
    }
    if state.spike_counts != r.counts {
        return Some("spike counts differ".into());
    }
    if state.sop_count != r.sops {
        return Some(format!("sop count {} vs {}", state.sop_count, r.sops));
    }
    for (k, (a, b)) in state.v.iter().zip(&r.v).enumerate() {
        if a.iter().map(|x| x.to_bits()).ne(b.iter().map(|x| x.to_bits())) {
            return Some(format!("potentials of layer {k} differ"));
        }
    }
    None
}

// ------------------------------------------------------ exhaustive placement

/// Loss of an assignment recomputed from scratch, `None` when it breaks a
/// capacity.
pub fn placement_loss(graph: &SynapseGraph, chip: &ChipModel, cfg: &MapperConfig, assign: &[usize]) -> Option<f64> {
    let mut neurons = vec![0usize; chip.n_cores];
    let mut syn = vec![0usize; chip.n_cores];
    for (n, &c) in assign.iter().enumerate() {
        neurons[c] += 1;
        syn[c] += graph.edges().iter().filter(|e| e.1 as usize == n).count();
    }
    if neurons.iter().any(|&n| n > chip.neurons_per_core) || syn.iter().any(|&s| s > chip.synapses_per_core) {
        return None;
    }
    let used = neurons.iter().filter(|&&n| n > 0).count();
    let inter = graph.edges().iter().filter(|e| assign[e.0 as usize] != assign[e.1 as usize]).count();
    let total = graph.n_synapses();
    let mem: usize = syn.iter().sum();
    let traffic = if total == 0 { 0.0 } else { inter as f64 / total as f64 };
    Some(
        cfg.beta1 * used as f64 / chip.n_cores as f64
            + cfg.beta2 * traffic
            + cfg.beta3 * mem as f64 / (chip.n_cores * chip.synapses_per_core) as f64,
    )
}

/// Minimum loss over every assignment of neurons to cores.
pub fn brute_force_optimum(graph: &SynapseGraph, chip: &ChipModel, cfg: &MapperConfig) -> Option<f64> {
    let n = graph.n_neurons();
    let mut assign = vec![0usize; n];
    let mut best: Option<f64> = None;
    loop {
        if let Some(l) = placement_loss(graph, chip, cfg, &assign) {
            best = Some(best.map_or(l, |b: f64| b.min(l)));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            assign[i] += 1;
            if assign[i] < chip.n_cores {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

pub fn small_chip(n_cores: usize, neurons_per_core: usize, synapses_per_core: usize) -> ChipModel {
    ChipModel {
        name: "small".into(),
        n_cores,
        neurons_per_core,
        synapses_per_core,
        ..ChipModel::desk16()
    }
}

/// A random placement instance with at most `max_neurons` neurons and
/// `max_cores` cores; capacities are loose enough that one exists.
pub fn random_instance(rng: &mut impl Rng, max_neurons: usize, max_cores: usize) -> (SynapseGraph, ChipModel, MapperConfig) {
    let n = rng.gen_range(2..=max_neurons);
    let cores = rng.gen_range(2..=max_cores);
    let density = rng.gen_range(0.1..0.5);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(density) {
                edges.push((a as u32, b as u32));
            }
        }
    }
    let graph = SynapseGraph::from_edges(n, edges);
    let max_in = (0..n).map(|i| graph.in_degree(i)).max().unwrap_or(0);
    let npc = rng.gen_range(n.div_ceil(cores)..=n);
    let spc = (max_in.max(1) * rng.gen_range(2..=n)).max(graph.n_synapses().div_ceil(cores) + max_in);
    let cfg = MapperConfig {
        beta1: rng.gen_range(0.1..2.0),
        beta2: rng.gen_range(0.1..2.0),
        beta3: rng.gen_range(0.0..2.0),
        ..MapperConfig::default()
    };
    (graph, small_chip(cores, npc, spc), cfg)
}

// ------------------------------------------------------- finite differences

pub fn smooth_cfg() -> TrainConfig {
    TrainConfig {
        grad_mode: GradMode::SmoothForward,
        ..TrainConfig::default()
    }
}

pub fn smooth_loss(net: &NetworkTopology, input: &SpikeTrain, target: usize, cfg: &TrainConfig) -> f64 {
    let tr = forward_with_trace(net, input, cfg).unwrap();
    task_loss(tr.counts(), target).0
}

/// Worst relative error between the backward pass and a five-point central
/// difference over coordinates with `|g| > floor`, and how many were checked.
pub fn gradient_check(net: &NetworkTopology, input: &SpikeTrain, target: usize, floor: f64) -> (f64, usize) {
    let cfg = smooth_cfg();
    let tr = forward_with_trace(net, input, &cfg).unwrap();
    let (_, g) = backward(net, &tr, target).unwrap();
    let h = 1e-3;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..net.layers().len() {
        for i in 0..net.layers()[k].weights().len() {
            let at = |d: f64| {
                let mut n = net.clone();
                n.layers_mut()[k].weights_mut()[i] += d;
                smooth_loss(&n, input, target, &cfg)
            };
            let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            let a = g.layers[k][i];
            if a.abs() <= floor {
                continue;
            }
            checked += 1;
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()));
        }
    }
    (worst, checked)
}

/// Tiny dense net of at most eight neurons including its inputs.
pub fn tiny_net(rng: &mut impl Rng) -> NetworkTopology {
    let t = rng.gen_range(1..=5);
    let n_in = rng.gen_range(1..=3);
    let hidden = rng.gen_range(0..=3);
    let n_out = rng.gen_range(1..=(8 - n_in - hidden).min(3));
    let mut sizes = vec![n_in];
    if hidden > 0 {
        sizes.push(hidden);
    }
    sizes.push(n_out);
    let layers = sizes
        .windows(2)
        .map(|w| LayerSpec::dense(w[0], w[1], weights(rng, w[0] * w[1], -0.8, 1.6), random_params(rng)).unwrap())
        .collect();
    NetworkTopology::new(layers, t).unwrap()
}
