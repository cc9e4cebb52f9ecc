//! Linear event-energy accounting.
//!
//! `E = e_sop * N_sop + e_spike * N_spikes`, with spikes that leave their
//! core (when a mapping is supplied) charged `inter_core_cost` times the spike
//! energy. Two optional terms, neuron updates and per-spike routing overhead,
//! default to zero.

use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::hardware::ChipModel;
use crate::snn::SimState;

/// Operations counted per synaptic operation when reporting efficiency
/// (accumulate + compare).
pub const OPS_PER_SOP: f64 = 2.0;

pub const EFFICIENCY_FORMULA: &str =
    "efficiency [GOp/s/W] = 2 * n_sop / (wall_time * power) / 1e9 = 2 * n_sop / e_total[J] / 1e9";

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub encode: Duration,
    pub network: Duration,
    pub decode: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.encode + self.network + self.decode
    }
}

impl std::ops::AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.encode += o.encode;
        self.network += o.network;
        self.decode += o.decode;
    }
}

/// Energy per component, picojoules.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBreakdown {
    pub synaptic_ops: f64,
    pub spike_communication: f64,
    pub neuron_updates: f64,
    pub routing: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub n_sop: u64,
    pub n_spikes: u64,
    /// Spikes whose source neuron has a postsynaptic target on another core.
    pub n_inter_core_spikes: u64,
    pub n_neuron_updates: u64,
    pub e_sop_pj: f64,
    pub e_spike_pj: f64,
    pub inter_core_cost: f64,
    pub breakdown: EnergyBreakdown,
    pub e_total_pj: f64,
    pub latency: Option<StageTimings>,
}

impl EnergyReport {
    pub fn e_total_joules(&self) -> f64 {
        self.e_total_pj * 1e-12
    }

    /// Giga-operations per second per watt, `None` without energy.
    pub fn gops_per_watt(&self) -> Option<f64> {
        (self.e_total_pj > 0.0).then(|| OPS_PER_SOP * self.n_sop as f64 / self.e_total_joules() / 1e9)
    }

    pub fn csv_header() -> &'static str {
        "n_sop,n_spikes,n_inter_core_spikes,e_sop_j,e_spike_j,e_neuron_j,e_routing_j,e_total_j,gops_per_w,encode_ms,network_ms,decode_ms"
    }

    pub fn csv_row(&self) -> String {
        let b = &self.breakdown;
        let ms = |d: Duration| format!("{:.6}", d.as_secs_f64() * 1e3);
        let (enc, net, dec) = match &self.latency {
            Some(l) => (ms(l.encode), ms(l.network), ms(l.decode)),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{},{},{},{}",
            self.n_sop,
            self.n_spikes,
            self.n_inter_core_spikes,
            b.synaptic_ops * 1e-12,
            b.spike_communication * 1e-12,
            b.neuron_updates * 1e-12,
            b.routing * 1e-12,
            self.e_total_joules(),
            self.gops_per_watt().map(|g| format!("{g:.6}")).unwrap_or_default(),
            enc,
            net,
            dec
        )
    }

    /// Human-readable summary with the efficiency formula in its header.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let total = self.e_total_pj;
        let share = |x: f64| if total > 0.0 { 100.0 * x / total } else { 0.0 };
        let b = &self.breakdown;
        let _ = writeln!(s, "# {EFFICIENCY_FORMULA}");
        let _ = writeln!(s, "{:<22} {:>16} {:>8}", "component", "energy (J)", "share");
        for (name, e) in [
            ("synaptic ops", b.synaptic_ops),
            ("spike communication", b.spike_communication),
            ("neuron updates", b.neuron_updates),
            ("routing overhead", b.routing),
        ] {
            let _ = writeln!(s, "{:<22} {:>16.6e} {:>7.1}%", name, e * 1e-12, share(e));
        }
        let _ = writeln!(s, "{:<22} {:>16.6e}", "total", self.e_total_joules());
        let _ = writeln!(s, "synaptic ops: {}  spikes: {} ({} inter-core)", self.n_sop, self.n_spikes, self.n_inter_core_spikes);
        match self.gops_per_watt() {
            Some(g) => {
                let _ = writeln!(s, "efficiency: {g:.3} GOp/s/W");
            }
            None => {
                let _ = writeln!(s, "efficiency: undefined (no energy)");
            }
        }
        if let Some(l) = &self.latency {
            let _ = writeln!(
                s,
                "latency (ms): encode {:.3}, network {:.3}, decode {:.3}, total {:.3}",
                l.encode.as_secs_f64() * 1e3,
                l.network.as_secs_f64() * 1e3,
                l.decode.as_secs_f64() * 1e3,
                l.total().as_secs_f64() * 1e3
            );
        }
        s
    }
}

/// Accounts the events of a finished simulation. `leaves_core`, when given,
/// flags for every neuron (global order: input population first) whether its
/// spikes cross to another core.
pub fn account(
    sim: &SimState,
    chip: &ChipModel,
    leaves_core: Option<&[bool]>,
    timings: Option<StageTimings>,
) -> Result<EnergyReport> {
    chip.validate()?;
    let counts = sim.spike_counts.iter().flatten();
    let (mut n_spikes, mut n_inter) = (0u64, 0u64);
    match leaves_core {
        Some(flags) => {
            if flags.len() != sim.n_neurons() {
                return Err(Error::InvalidMapping(format!(
                    "routing covers {} neurons, simulation has {}",
                    flags.len(),
                    sim.n_neurons()
                )));
            }
            for (&c, &cross) in counts.zip(flags) {
                n_spikes += c;
                if cross {
                    n_inter += c;
                }
            }
        }
        None => n_spikes = counts.sum(),
    }
    let stateful: usize = sim.v.iter().map(Vec::len).sum();
    let n_neuron_updates = (stateful * sim.steps) as u64;
    let n_intra = n_spikes - n_inter;
    let breakdown = EnergyBreakdown {
        synaptic_ops: chip.e_sop_pj * sim.sop_count as f64,
        spike_communication: chip.e_spike_pj * (n_intra as f64 + chip.inter_core_cost * n_inter as f64),
        neuron_updates: chip.e_neuron_update_pj * n_neuron_updates as f64,
        routing: chip.e_routing_pj * n_inter as f64,
    };
    let e_total_pj =
        breakdown.synaptic_ops + breakdown.spike_communication + breakdown.neuron_updates + breakdown.routing;
    Ok(EnergyReport {
        n_sop: sim.sop_count,
        n_spikes,
        n_inter_core_spikes: n_inter,
        n_neuron_updates,
        e_sop_pj: chip.e_sop_pj,
        e_spike_pj: chip.e_spike_pj,
        inter_core_cost: chip.inter_core_cost,
        breakdown,
        e_total_pj,
        latency: timings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub n_spikes: u64,
    pub e_total_j: f64,
    /// `first.n_spikes / row.n_spikes`; `None` when undefined.
    pub spike_reduction: Option<f64>,
    /// `first.e_total / row.e_total`; `None` when undefined.
    pub energy_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den != 0.0 && num.is_finite() && den.is_finite()).then(|| num / den)
}

/// Ratios of every report against the first one.
pub fn compare(reports: &[EnergyReport], labels: &[String]) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::Empty("report list"));
    }
    if reports.len() < 2 {
        return Err(Error::Config("comparison needs at least two reports".into()));
    }
    if labels.len() != reports.len() {
        return Err(Error::Config(format!("{} labels for {} reports", labels.len(), reports.len())));
    }
    let base = &reports[0];
    let rows = reports
        .iter()
        .zip(labels)
        .map(|(r, l)| ComparisonRow {
            label: l.clone(),
            n_spikes: r.n_spikes,
            e_total_j: r.e_total_joules(),
            spike_reduction: ratio(base.n_spikes as f64, r.n_spikes as f64),
            energy_factor: ratio(base.e_total_pj, r.e_total_pj),
        })
        .collect();
    Ok(Comparison { rows })
}

impl Comparison {
    pub fn to_markdown(&self) -> String {
        let fmt = |r: Option<f64>| r.map(|x| format!("{x:.2}x")).unwrap_or_else(|| "undefined".into());
        let mut s = String::from("| Configuration | Spikes | Energy (J) | Spike reduction | Energy factor |\n");
        s.push_str("|---|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.4e} | {} | {} |",
                r.label,
                r.n_spikes,
                r.e_total_j,
                fmt(r.spike_reduction),
                fmt(r.energy_factor)
            );
        }
        s
    }
}
