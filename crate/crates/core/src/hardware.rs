//! Abstract multi-core neuromorphic chip and neuron-to-core placement.
//!
//! The placement objective is
//!
//! ```text
//! L_hw = b1 * cores_used / n_cores + b2 * C_inter / C_total + b3 * M_syn / M_max
//! ```
//!
//! where `C_inter` counts synapses whose endpoints sit on different cores,
//! `C_total` counts every synapse of the network, `M_syn` is the synaptic
//! memory in use (each synapse stored once, on its postsynaptic core) and
//! `M_max` is the chip-wide synapse capacity. Only the partition matters, so
//! the loss is invariant under relabeling cores.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::snn::NetworkTopology;

#[derive(Clone, Debug, PartialEq)]
pub struct ChipModel {
    pub name: String,
    pub n_cores: usize,
    pub neurons_per_core: usize,
    pub synapses_per_core: usize,
    /// Energy per synaptic operation, picojoules.
    pub e_sop_pj: f64,
    /// Energy per spike event, picojoules.
    pub e_spike_pj: f64,
    /// Multiplier on `e_spike_pj` for spikes that leave their core.
    pub inter_core_cost: f64,
    /// Optional energy per neuron update (one per neuron per step), picojoules.
    pub e_neuron_update_pj: f64,
    /// Optional routing overhead per core-leaving spike, picojoules.
    pub e_routing_pj: f64,
}

impl ChipModel {
    fn with_capacity(name: &str, n_cores: usize, neurons_per_core: usize, synapses_per_core: usize) -> Self {
        ChipModel {
            name: name.to_string(),
            n_cores,
            neurons_per_core,
            synapses_per_core,
            e_sop_pj: 2.0,
            e_spike_pj: 20.0,
            inter_core_cost: 1.0,
            e_neuron_update_pj: 0.0,
            e_routing_pj: 0.0,
        }
    }

    /// 128 cores, ~1M neurons, 120M synapses.
    pub fn loihi2_like() -> Self {
        Self::with_capacity("loihi2-like", 128, 8192, 937_500)
    }

    /// 4096 cores of 256 neurons and 256x256 synapses (~1M neurons, ~256M synapses).
    pub fn truenorth_like() -> Self {
        Self::with_capacity("truenorth-like", 4096, 256, 65_536)
    }

    /// Sixteen small cores, sized for the desk-scale presets.
    pub fn desk16() -> Self {
        ChipModel {
            inter_core_cost: 2.0,
            ..Self::with_capacity("desk16", 16, 96, 4096)
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "loihi2-like" => Some(Self::loihi2_like()),
            "truenorth-like" => Some(Self::truenorth_like()),
            "desk16" => Some(Self::desk16()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 3] = ["loihi2-like", "truenorth-like", "desk16"];

    pub fn validate(&self) -> Result<()> {
        if self.n_cores == 0 || self.neurons_per_core == 0 || self.synapses_per_core == 0 {
            return Err(Error::Config(format!("chip {}: capacities must be positive", self.name)));
        }
        for (k, v) in [
            ("e_sop_pj", self.e_sop_pj),
            ("e_spike_pj", self.e_spike_pj),
            ("inter_core_cost", self.inter_core_cost),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("chip {}: {k} must be positive, got {v}", self.name)));
            }
        }
        for (k, v) in [
            ("e_neuron_update_pj", self.e_neuron_update_pj),
            ("e_routing_pj", self.e_routing_pj),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("chip {}: {k} must be >= 0, got {v}", self.name)));
            }
        }
        Ok(())
    }

    pub fn neuron_capacity(&self) -> usize {
        self.n_cores * self.neurons_per_core
    }

    /// Chip-wide synapse capacity `M_max`.
    pub fn synapse_capacity(&self) -> usize {
        self.n_cores * self.synapses_per_core
    }
}

/// Neuron-level synapse graph of a network. Neuron ids are global: the input
/// population first, then each layer's outputs in order.
#[derive(Clone, Debug)]
pub struct SynapseGraph {
    n_neurons: usize,
    edges: Vec<(u32, u32)>,
    /// Undirected neighbor lists `(neighbor, multiplicity)`, sorted.
    adjacency: Vec<Vec<(u32, u32)>>,
    in_degree: Vec<u32>,
}

impl SynapseGraph {
    pub fn from_topology(net: &NetworkTopology) -> Self {
        let mut edges = Vec::with_capacity(net.n_synapses());
        let mut offset = 0usize;
        for layer in net.layers() {
            let post_offset = offset + layer.n_in();
            layer.for_each_synapse(|pre, post, _| {
                edges.push(((offset + pre) as u32, (post_offset + post) as u32));
            });
            offset = post_offset;
        }
        Self::from_edges(net.n_neurons(), edges)
    }

    /// Directed `(pre, post)` edges over `n_neurons` neurons. Panics on an
    /// out-of-range endpoint.
    pub fn from_edges(n_neurons: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_neurons];
        let mut in_degree = vec![0u32; n_neurons];
        for &(a, b) in &edges {
            assert!((a as usize) < n_neurons && (b as usize) < n_neurons, "edge ({a}, {b}) out of range");
            in_degree[b as usize] += 1;
            if a != b {
                adjacency[a as usize].push((b, 1));
                adjacency[b as usize].push((a, 1));
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        SynapseGraph {
            n_neurons,
            edges,
            adjacency,
            in_degree,
        }
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn n_synapses(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn in_degree(&self, n: usize) -> usize {
        self.in_degree[n] as usize
    }

    fn weight_between(&self, a: usize, b: usize) -> u32 {
        let list = &self.adjacency[a];
        list.binary_search_by_key(&(b as u32), |e| e.0)
            .map(|i| list[i].1)
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct MappingStats {
    pub n_cores_used: usize,
    pub inter_core_synapses: usize,
    pub total_synapses: usize,
    pub synaptic_memory_used: usize,
}

/// Assignment of every neuron to one core, with its derived statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct Mapping {
    assignment: Vec<usize>,
    core_neurons: Vec<usize>,
    core_synapses: Vec<usize>,
    stats: MappingStats,
}

impl Mapping {
    /// Validates `assignment` against the graph and chip capacities.
    pub fn new(graph: &SynapseGraph, chip: &ChipModel, assignment: Vec<usize>) -> Result<Self> {
        if assignment.len() != graph.n_neurons {
            return Err(Error::InvalidMapping(format!(
                "{} neurons assigned, network has {}",
                assignment.len(),
                graph.n_neurons
            )));
        }
        let mut core_neurons = vec![0usize; chip.n_cores];
        let mut core_synapses = vec![0usize; chip.n_cores];
        for (n, &c) in assignment.iter().enumerate() {
            if c >= chip.n_cores {
                return Err(Error::InvalidMapping(format!(
                    "neuron {n} on core {c}, chip has {} cores",
                    chip.n_cores
                )));
            }
            core_neurons[c] += 1;
            core_synapses[c] += graph.in_degree(n);
        }
        for c in 0..chip.n_cores {
            if core_neurons[c] > chip.neurons_per_core {
                return Err(Error::InvalidMapping(format!(
                    "core {c} holds {} neurons, capacity {}",
                    core_neurons[c], chip.neurons_per_core
                )));
            }
            if core_synapses[c] > chip.synapses_per_core {
                return Err(Error::InvalidMapping(format!(
                    "core {c} holds {} synapses, capacity {}",
                    core_synapses[c], chip.synapses_per_core
                )));
            }
        }
        let inter = graph
            .edges
            .iter()
            .filter(|&&(a, b)| assignment[a as usize] != assignment[b as usize])
            .count();
        let stats = MappingStats {
            n_cores_used: core_neurons.iter().filter(|&&n| n > 0).count(),
            inter_core_synapses: inter,
            total_synapses: graph.n_synapses(),
            synaptic_memory_used: core_synapses.iter().sum(),
        };
        Ok(Mapping {
            assignment,
            core_neurons,
            core_synapses,
            stats,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn stats(&self) -> &MappingStats {
        &self.stats
    }

    pub fn n_cores(&self) -> usize {
        self.core_neurons.len()
    }

    pub fn core_of(&self, neuron: usize) -> usize {
        self.assignment[neuron]
    }

    /// Per neuron: whether its spikes must travel to at least one other core.
    pub fn spike_leaves_core(&self, graph: &SynapseGraph) -> Vec<bool> {
        let mut out = vec![false; self.assignment.len()];
        for &(a, b) in &graph.edges {
            if self.assignment[a as usize] != self.assignment[b as usize] {
                out[a as usize] = true;
            }
        }
        out
    }

    fn check_chip(&self, chip: &ChipModel) -> Result<()> {
        if self.core_neurons.len() != chip.n_cores {
            return Err(Error::InvalidMapping(format!(
                "mapping built for {} cores, chip has {}",
                self.core_neurons.len(),
                chip.n_cores
            )));
        }
        for c in 0..chip.n_cores {
            if self.core_neurons[c] > chip.neurons_per_core || self.core_synapses[c] > chip.synapses_per_core {
                return Err(Error::InvalidMapping(format!("core {c} exceeds chip capacity")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapperConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Maximum local-search passes.
    pub max_iters: usize,
    pub seed: u64,
    /// Instances with at most this many neurons are finished by exhaustive
    /// branch-and-bound after local search.
    pub exact_limit: usize,
}

impl Default for MapperConfig {
    fn default() -> Self {
        MapperConfig {
            beta1: 1.0,
            beta2: 1.0,
            beta3: 1.0,
            max_iters: 50,
            seed: 0,
            exact_limit: 12,
        }
    }
}

impl MapperConfig {
    pub fn validate(&self) -> Result<()> {
        let b = [self.beta1, self.beta2, self.beta3];
        if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("mapper weights must be finite and >= 0".into()));
        }
        if b.iter().all(|&x| x == 0.0) {
            return Err(Error::Config("mapper weights must not all be zero".into()));
        }
        Ok(())
    }
}

fn loss_terms(cfg: &MapperConfig, chip: &ChipModel, used: usize, inter: usize, total: usize, mem: usize) -> f64 {
    let traffic = if total == 0 { 0.0 } else { inter as f64 / total as f64 };
    cfg.beta1 * used as f64 / chip.n_cores as f64
        + cfg.beta2 * traffic
        + cfg.beta3 * mem as f64 / chip.synapse_capacity() as f64
}

/// Hardware loss of a mapping. `C_inter / C_total` is taken as zero for a
/// network without synapses.
pub fn hw_loss(mapping: &Mapping, chip: &ChipModel, cfg: &MapperConfig) -> Result<f64> {
    mapping.check_chip(chip)?;
    let s = &mapping.stats;
    Ok(loss_terms(
        cfg,
        chip,
        s.n_cores_used,
        s.inter_core_synapses,
        s.total_synapses,
        s.synaptic_memory_used,
    ))
}

fn check_feasible(graph: &SynapseGraph, chip: &ChipModel) -> Result<()> {
    chip.validate()?;
    if graph.n_neurons > chip.neuron_capacity() {
        return Err(Error::Capacity(format!(
            "neuron count {} exceeds chip neuron capacity {} ({} cores x {})",
            graph.n_neurons,
            chip.neuron_capacity(),
            chip.n_cores,
            chip.neurons_per_core
        )));
    }
    if graph.n_synapses() > chip.synapse_capacity() {
        return Err(Error::Capacity(format!(
            "synapse count {} exceeds chip synapse capacity {}",
            graph.n_synapses(),
            chip.synapse_capacity()
        )));
    }
    if let Some(n) = (0..graph.n_neurons).find(|&n| graph.in_degree(n) > chip.synapses_per_core) {
        return Err(Error::Capacity(format!(
            "neuron {n} has fan-in {} above per-core synapse capacity {}",
            graph.in_degree(n),
            chip.synapses_per_core
        )));
    }
    Ok(())
}

/// Breadth-first construction: neurons are visited in BFS order over the
/// undirected synapse graph (lowest id first) and packed onto the current core
/// until a capacity binds, then the next core is opened.
pub fn map_greedy(graph: &SynapseGraph, chip: &ChipModel) -> Result<Mapping> {
    check_feasible(graph, chip)?;
    let n = graph.n_neurons;
    let mut assignment = vec![usize::MAX; n];
    let mut neurons = vec![0usize; chip.n_cores];
    let mut synapses = vec![0usize; chip.n_cores];
    let fits = |c: usize, nrn: &[usize], syn: &[usize], deg: usize| {
        nrn[c] < chip.neurons_per_core && syn[c] + deg <= chip.synapses_per_core
    };
    let mut current = 0usize;
    let mut visited = vec![false; n];
    let mut queue = VecDeque::new();
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let deg = graph.in_degree(v);
            while current < chip.n_cores && !fits(current, &neurons, &synapses, deg) {
                current += 1;
            }
            let core = if current < chip.n_cores {
                current
            } else {
                // Next-fit exhausted the chip; fall back to first fit.
                (0..chip.n_cores)
                    .find(|&c| fits(c, &neurons, &synapses, deg))
                    .ok_or_else(|| {
                        Error::Capacity(format!(
                            "no core can take neuron {v} (fan-in {deg}); per-core capacity binds"
                        ))
                    })?
            };
            assignment[v] = core;
            neurons[core] += 1;
            synapses[core] += deg;
            for &(u, _) in &graph.adjacency[v] {
                if !visited[u as usize] {
                    visited[u as usize] = true;
                    queue.push_back(u as usize);
                }
            }
        }
    }
    Mapping::new(graph, chip, assignment)
}

/// Uniformly random valid placement: neurons in shuffled order, each on a
/// random core that still has room.
pub fn map_random(graph: &SynapseGraph, chip: &ChipModel, rng: &mut impl Rng) -> Result<Mapping> {
    check_feasible(graph, chip)?;
    let mut order: Vec<usize> = (0..graph.n_neurons).collect();
    order.shuffle(rng);
    let mut neurons = vec![0usize; chip.n_cores];
    let mut synapses = vec![0usize; chip.n_cores];
    let mut assignment = vec![0usize; graph.n_neurons];
    let mut open = Vec::with_capacity(chip.n_cores);
    for v in order {
        let deg = graph.in_degree(v);
        open.clear();
        open.extend(
            (0..chip.n_cores)
                .filter(|&c| neurons[c] < chip.neurons_per_core && synapses[c] + deg <= chip.synapses_per_core),
        );
        let &core = open
            .choose(rng)
            .ok_or_else(|| Error::Capacity(format!("random placement found no core for neuron {v}")))?;
        assignment[v] = core;
        neurons[core] += 1;
        synapses[core] += deg;
    }
    Mapping::new(graph, chip, assignment)
}

struct SearchState<'a> {
    graph: &'a SynapseGraph,
    chip: &'a ChipModel,
    k: usize,
    assign: Vec<usize>,
    core_n: Vec<usize>,
    core_s: Vec<usize>,
    /// `conn[n * k + c]`: synapse count between neuron `n` and core `c`.
    conn: Vec<u32>,
    w_used: f64,
    w_cut: f64,
}

impl<'a> SearchState<'a> {
    fn new(graph: &'a SynapseGraph, chip: &'a ChipModel, cfg: &MapperConfig, init: &Mapping) -> Self {
        let k = chip.n_cores;
        let mut conn = vec![0u32; graph.n_neurons * k];
        for (n, list) in graph.adjacency.iter().enumerate() {
            for &(u, w) in list {
                conn[n * k + init.assignment[u as usize]] += w;
            }
        }
        let total = graph.n_synapses();
        SearchState {
            graph,
            chip,
            k,
            assign: init.assignment.clone(),
            core_n: init.core_neurons.clone(),
            core_s: init.core_synapses.clone(),
            conn,
            w_used: cfg.beta1 / k as f64,
            w_cut: if total == 0 { 0.0 } else { cfg.beta2 / total as f64 },
        }
    }

    fn move_delta(&self, n: usize, b: usize) -> Option<f64> {
        let a = self.assign[n];
        if a == b
            || self.core_n[b] >= self.chip.neurons_per_core
            || self.core_s[b] + self.graph.in_degree(n) > self.chip.synapses_per_core
        {
            return None;
        }
        let d_cut = self.conn[n * self.k + a] as f64 - self.conn[n * self.k + b] as f64;
        let d_used = (self.core_n[b] == 0) as i32 - (self.core_n[a] == 1) as i32;
        Some(self.w_used * d_used as f64 + self.w_cut * d_cut)
    }

    fn swap_delta(&self, n: usize, m: usize) -> Option<f64> {
        let (a, b) = (self.assign[n], self.assign[m]);
        if a == b {
            return None;
        }
        let (cn_b, cm_a) = (self.conn[n * self.k + b], self.conn[m * self.k + a]);
        if cn_b == 0 && cm_a == 0 {
            return None;
        }
        let (dn, dm) = (self.graph.in_degree(n), self.graph.in_degree(m));
        if self.core_s[a] + dm - dn > self.chip.synapses_per_core
            || self.core_s[b] + dn - dm > self.chip.synapses_per_core
        {
            return None;
        }
        let w = self.graph.weight_between(n, m) as f64;
        let d_cut = self.conn[n * self.k + a] as f64 - cn_b as f64 + self.conn[m * self.k + b] as f64
            - cm_a as f64
            + 2.0 * w;
        Some(self.w_cut * d_cut)
    }

    fn apply_move(&mut self, n: usize, b: usize) {
        let a = self.assign[n];
        let deg = self.graph.in_degree(n);
        self.core_n[a] -= 1;
        self.core_s[a] -= deg;
        self.core_n[b] += 1;
        self.core_s[b] += deg;
        self.assign[n] = b;
        for &(u, w) in &self.graph.adjacency[n] {
            let u = u as usize;
            self.conn[u * self.k + a] -= w;
            self.conn[u * self.k + b] += w;
        }
    }

    fn local_search(&mut self, cfg: &MapperConfig) {
        const EPS: f64 = 1e-12;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..self.graph.n_neurons).collect();
        order.shuffle(&mut rng);
        for _ in 0..cfg.max_iters {
            let mut improved = false;
            for &n in &order {
                for b in 0..self.k {
                    if self.move_delta(n, b).is_some_and(|d| d < -EPS) {
                        self.apply_move(n, b);
                        improved = true;
                        break;
                    }
                }
            }
            for (i, &n) in order.iter().enumerate() {
                for &m in &order[i + 1..] {
                    if self.swap_delta(n, m).is_some_and(|d| d < -EPS) {
                        let (a, b) = (self.assign[n], self.assign[m]);
                        self.apply_move(n, b);
                        self.apply_move(m, a);
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
}

/// Exhaustive branch-and-bound over canonical labelings (cores are
/// interchangeable, so neuron `i` only tries cores `0..=max_used + 1`).
/// Returns an assignment strictly cheaper than `bound`, if one exists.
fn exact_search(graph: &SynapseGraph, chip: &ChipModel, cfg: &MapperConfig, bound: f64) -> Option<Vec<usize>> {
    struct Ctx<'a> {
        graph: &'a SynapseGraph,
        chip: &'a ChipModel,
        w_used: f64,
        w_cut: f64,
        assign: Vec<usize>,
        core_n: Vec<usize>,
        core_s: Vec<usize>,
        best: f64,
        best_assign: Option<Vec<usize>>,
    }
    fn dfs(c: &mut Ctx, i: usize, used: usize, cut: usize) {
        let cost = c.w_used * used as f64 + c.w_cut * cut as f64;
        if cost >= c.best - 1e-12 {
            return;
        }
        if i == c.graph.n_neurons {
            c.best = cost;
            c.best_assign = Some(c.assign.clone());
            return;
        }
        let deg = c.graph.in_degree(i);
        for core in 0..(used + 1).min(c.chip.n_cores) {
            if c.core_n[core] >= c.chip.neurons_per_core || c.core_s[core] + deg > c.chip.synapses_per_core {
                continue;
            }
            let added: usize = c.graph.adjacency[i]
                .iter()
                .filter(|&&(u, _)| (u as usize) < i && c.assign[u as usize] != core)
                .map(|&(_, w)| w as usize)
                .sum();
            c.assign[i] = core;
            c.core_n[core] += 1;
            c.core_s[core] += deg;
            dfs(c, i + 1, used.max(core + 1), cut + added);
            c.core_n[core] -= 1;
            c.core_s[core] -= deg;
        }
        c.assign[i] = usize::MAX;
    }
    let total = graph.n_synapses();
    let constant = cfg.beta3 * total as f64 / chip.synapse_capacity() as f64;
    let mut ctx = Ctx {
        graph,
        chip,
        w_used: cfg.beta1 / chip.n_cores as f64,
        w_cut: if total == 0 { 0.0 } else { cfg.beta2 / total as f64 },
        assign: vec![usize::MAX; graph.n_neurons],
        core_n: vec![0; chip.n_cores],
        core_s: vec![0; chip.n_cores],
        best: bound - constant,
        best_assign: None,
    };
    dfs(&mut ctx, 0, 0, 0);
    ctx.best_assign
}

/// Improves `init` by first-improvement local search over single-neuron
/// moves and pairwise swaps, in a seeded scan order. Small instances (see
/// [`MapperConfig::exact_limit`]) are then solved exactly. The result never
/// has a higher loss than `init`.
pub fn map_optimize(graph: &SynapseGraph, chip: &ChipModel, cfg: &MapperConfig, init: &Mapping) -> Result<Mapping> {
    cfg.validate()?;
    chip.validate()?;
    init.check_chip(chip)?;
    if init.assignment.len() != graph.n_neurons {
        return Err(Error::InvalidMapping("initial mapping does not match the network".into()));
    }
    let init_loss = hw_loss(init, chip, cfg)?;
    let mut st = SearchState::new(graph, chip, cfg, init);
    st.local_search(cfg);
    let mut best = Mapping::new(graph, chip, st.assign)?;
    let mut best_loss = hw_loss(&best, chip, cfg)?;
    if graph.n_neurons <= cfg.exact_limit {
        if let Some(a) = exact_search(graph, chip, cfg, best_loss) {
            best = Mapping::new(graph, chip, a)?;
            best_loss = hw_loss(&best, chip, cfg)?;
        }
    }
    if best_loss < init_loss {
        Ok(best)
    } else {
        Ok(init.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtilizationReport {
    pub cores_used: usize,
    pub n_cores: usize,
    pub synapses_used: usize,
    pub synapse_capacity: usize,
    pub inter_core_synapses: usize,
    pub total_synapses: usize,
    /// Set when the mapping places no neurons.
    pub degenerate: bool,
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl UtilizationReport {
    pub fn core_utilization_pct(&self) -> f64 {
        pct(self.cores_used, self.n_cores)
    }

    pub fn memory_utilization_pct(&self) -> f64 {
        pct(self.synapses_used, self.synapse_capacity)
    }

    pub fn inter_core_traffic_pct(&self) -> f64 {
        pct(self.inter_core_synapses, self.total_synapses)
    }
}

pub fn utilization_report(mapping: &Mapping, chip: &ChipModel) -> UtilizationReport {
    let s = mapping.stats;
    UtilizationReport {
        cores_used: s.n_cores_used,
        n_cores: chip.n_cores,
        synapses_used: s.synaptic_memory_used,
        synapse_capacity: chip.synapse_capacity(),
        inter_core_synapses: s.inter_core_synapses,
        total_synapses: s.total_synapses,
        degenerate: mapping.assignment.is_empty(),
    }
}
