//! One pipeline per scenario, each turning `(n, seed)` into named metrics.

use crate::erasure::{self, CompletionModel};
use crate::mobility::{MobilityExperiment, MobilitySummary};
use crate::routing::{
    build_dumbbell, compute_loads, leader_backbone, multicast_to_group, multipoint_to_point,
    per_flow_capacity, route_all, route_via_leaders, sample_unicast_pairs,
};
use crate::topology::{
    self, build_graph, connectivity_radius_with, form_clusters, place_nodes, Dim, Regime,
};
use crate::Result;

use super::config::{Params, Scenario};

/// One row of the coded multicast table.
#[derive(Clone, Debug, PartialEq)]
pub struct CodedRow {
    pub k: u64,
    pub p: f64,
    pub n: u64,
    pub q: f64,
    pub t_exact: u64,
    pub t_mc_q: u64,
    pub trials: u64,
    pub seed: u64,
}

impl CodedRow {
    pub const CSV_HEADER: &'static str = "scenario,k,p,n,q,T_exact,T_mc_q,trials,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "coded_multicast,{},{},{},{},{},{},{},{}",
            self.k, self.p, self.n, self.q, self.t_exact, self.t_mc_q, self.trials, self.seed
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct PointOutput {
    pub metrics: Vec<(String, f64)>,
    pub coded: Option<CodedRow>,
    pub mobility: Option<MobilitySummary>,
}

impl PointOutput {
    fn put(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Hop count used by the erasure scenarios.
pub fn hops_for(n: u64, c: f64) -> u32 {
    (c * (n as f64).sqrt()).round() as u32
}

pub fn run_point(scenario: Scenario, params: &Params, n: u64, seed: u64) -> Result<PointOutput> {
    let nu = n as usize;
    match scenario {
        Scenario::Unicast2d => unicast(nu, Dim::Two, params.regime()?, seed),
        Scenario::Unicast3d => unicast(nu, Dim::Three, params.regime()?, seed),
        Scenario::ReceiverBottleneck => receiver(nu, params, seed),
        Scenario::Dumbbell => dumbbell(nu, params, seed),
        Scenario::Cluster => cluster(nu, params, seed),
        Scenario::E2eErasure => e2e(n, params, seed),
        Scenario::HopByHop => hop_by_hop(n, params, seed),
        Scenario::CodedMulticast => coded(n, params, seed),
        Scenario::BlockSynthesis => block(n, params, seed),
        Scenario::Mobility => mobility(nu, params, seed),
    }
}

fn unicast(n: usize, dim: Dim, regime: Regime, seed: u64) -> Result<PointOutput> {
    let t = place_nodes(n, dim, regime, seed)?;
    let radius = t.connectivity_radius()?;
    let graph = build_graph(&t, radius)?;
    let flows = sample_unicast_pairs(n, seed)?;
    let routed = route_all(&graph, &flows)?;
    let loads = compute_loads(&routed);
    let mut caps = per_flow_capacity(&loads, &routed).capacity;
    let mut out = PointOutput::default();
    out.put("capacity_mean", mean(&caps));
    out.put("capacity_min", caps.iter().copied().fold(f64::INFINITY, f64::min));
    out.put("capacity_median", median(&mut caps));
    out.put("mean_hops", routed.mean_hops());
    out.put("max_load", (0..n).map(|v| loads.load(v)).max().unwrap_or(0).into());
    out.put("comm_radius", radius);
    Ok(out)
}

fn receiver(n: usize, params: &Params, seed: u64) -> Result<PointOutput> {
    let regime = params.regime()?;
    let mut t = place_nodes(n, Dim::Two, regime, seed)?;
    let mut out = PointOutput::default();
    if let Some(fraction) = params.group_fraction {
        let radius = t.connectivity_radius()?;
        let graph = build_graph(&t, radius)?;
        let flows = multicast_to_group(n, fraction, seed)?;
        let routed = route_all(&graph, &flows)?;
        let loads = compute_loads(&routed);
        let caps = per_flow_capacity(&loads, &routed).capacity;
        // Every group member hears from all n - 1 other nodes.
        out.put("capacity_max", caps.iter().copied().fold(0.0, f64::max));
        out.put("capacity_bound", 1.0 / (n - 1) as f64);
        out.put("max_rx_load", loads.rx.iter().copied().max().unwrap_or(0).into());
        return Ok(out);
    }
    let sink = t.push_node([0.0; 3])?;
    let radius = connectivity_radius_with(
        n + 1,
        Dim::Two,
        t.region_radius(),
        topology::CONNECTIVITY_CONSTANT_2D,
    )?;
    let graph = build_graph(&t, radius)?;
    let flows = multipoint_to_point(n + 1, sink)?;
    let routed = route_all(&graph, &flows)?;
    let loads = compute_loads(&routed);
    let caps = per_flow_capacity(&loads, &routed).capacity;
    let expected = 1.0 / n as f64;
    out.put("capacity_min", caps.iter().copied().fold(f64::INFINITY, f64::min));
    out.put("capacity_max", caps.iter().copied().fold(0.0, f64::max));
    out.put("capacity_expected", expected);
    out.put("exact_match", f64::from(u8::from(caps.iter().all(|&c| c == expected))));
    out.put("sink_rx_load", loads.rx[sink].into());
    Ok(out)
}

fn dumbbell(n: usize, params: &Params, seed: u64) -> Result<PointOutput> {
    let d = build_dumbbell(n, params.bridges, params.fraction, seed)?;
    let routed = route_all(&d.graph, &d.flows)?;
    let loads = compute_loads(&routed);
    let caps = per_flow_capacity(&loads, &routed).capacity;
    let bound = d.crossing_bound();
    let mut crossing: Vec<f64> = caps
        .iter()
        .zip(&d.crossing)
        .filter_map(|(&c, &x)| x.then_some(c))
        .collect();
    let violations = crossing.iter().filter(|&&c| c > bound).count();
    let mut out = PointOutput::default();
    out.put("crossing_flows", crossing.len() as f64);
    out.put("crossing_bound", bound);
    out.put("bound_violations", violations as f64);
    out.put("crossing_capacity_max", crossing.iter().copied().fold(0.0, f64::max));
    out.put("crossing_capacity_median", median(&mut crossing));
    out.put("busiest_bridge_load", loads.max_tx_over(&d.bridges).into());
    Ok(out)
}

fn cluster(n: usize, params: &Params, seed: u64) -> Result<PointOutput> {
    let t = place_nodes(n, Dim::Two, params.regime()?, seed)?;
    let radius = t.connectivity_radius()?;
    let assignment = form_clusters(&t, params.g)?;
    let backbone = leader_backbone(&t, &assignment, radius)?;
    let flows = sample_unicast_pairs(n, seed)?;
    let routed = route_via_leaders(&assignment, &backbone, &flows)?;
    let loads = compute_loads(&routed);
    let caps = per_flow_capacity(&loads, &routed).capacity;
    let leaders = assignment.leaders();
    let mut inter: Vec<f64> = flows
        .flows
        .iter()
        .zip(&caps)
        .filter(|(f, _)| assignment.cluster_of(f.source) != assignment.cluster_of(f.destinations[0]))
        .map(|(_, &c)| c)
        .collect();
    let mut all = caps.clone();
    let mut out = PointOutput::default();
    out.put("clusters", assignment.len() as f64);
    out.put("backbone_radius", backbone.comm_radius());
    out.put("capacity_mean", mean(&caps));
    out.put("capacity_median", median(&mut all));
    if !inter.is_empty() {
        out.put("inter_capacity_median", median(&mut inter));
    }
    out.put("max_leader_tx", loads.max_tx_over(&leaders).into());
    out.put(
        "max_leader_load",
        leaders.iter().map(|&l| loads.load(l)).max().unwrap_or(0).into(),
    );
    out.put("mean_hops", routed.mean_hops());
    if params.g == 0.0 {
        let plain = route_all(&build_graph(&t, radius)?, &flows)?;
        out.put("paths_match_plain", f64::from(u8::from(plain == routed)));
    }
    Ok(out)
}

fn e2e(n: u64, params: &Params, seed: u64) -> Result<PointOutput> {
    let h = hops_for(n, params.c);
    let r = erasure::simulate_e2e_transfer(h, params.p, params.packets, params.max_slots, seed)?;
    let mut out = PointOutput::default();
    out.put("hops", h.into());
    out.put("throughput", r.throughput);
    out.put("success_probability", erasure::e2e_success_probability(h, params.p));
    out.put("per_flow_throughput", r.throughput / (n as f64).sqrt());
    out.put("complete", f64::from(u8::from(r.complete)));
    out.put("slots_used", r.slots_used as f64);
    Ok(out)
}

fn hop_by_hop(n: u64, params: &Params, seed: u64) -> Result<PointOutput> {
    let h = hops_for(n, params.c);
    let r = erasure::simulate_hop_by_hop(h, params.p, params.packets, seed)?;
    let mut out = PointOutput::default();
    out.put("hops", h.into());
    out.put("steady_throughput", r.steady_throughput);
    out.put("steady_stderr", r.steady_stderr);
    out.put("steady_attempts", r.steady_attempts as f64);
    out.put("steady_successes", r.steady_successes as f64);
    out.put("steady_delivery_rate", r.steady_delivery_rate);
    out.put("transfer_throughput", r.transfer.throughput);
    Ok(out)
}

pub(crate) fn per_packet_metric(k: u64) -> String {
    format!("per_packet_k{k}")
}

fn coded(n: u64, params: &Params, seed: u64) -> Result<PointOutput> {
    let model = CompletionModel::new(params.k, params.p, n, params.q)?;
    let t_exact = erasure::min_completion_slots(&model);
    let samples = erasure::simulate_coded_multicast(&model, params.trials, seed)?;
    let t_mc = samples.quantile(params.q);
    let mut out = PointOutput::default();
    out.put("T_exact", t_exact as f64);
    out.put("T_mc_q", t_mc as f64);
    out.put("mc_mean", samples.mean());
    out.put("abs_diff", t_exact.abs_diff(t_mc) as f64);
    out.put("per_packet_time", t_exact as f64 / params.k as f64);
    for &k in &params.k_list {
        let t = erasure::min_completion_slots(&CompletionModel::new(k, params.p, n, params.q)?);
        out.put(&per_packet_metric(k), t as f64 / k as f64);
    }
    out.coded = Some(CodedRow {
        k: params.k,
        p: params.p,
        n,
        q: params.q,
        t_exact,
        t_mc_q: t_mc,
        trials: params.trials,
        seed,
    });
    Ok(out)
}

fn block(n: u64, params: &Params, seed: u64) -> Result<PointOutput> {
    let r = erasure::simulate_block_synthesis(&params.blocks(), params.p, n, params.q, seed)?;
    let delayed = r
        .synthesized_delay
        .iter()
        .zip(&r.first_block_delay)
        .filter(|(s, f)| s > f)
        .count();
    let mut out = PointOutput::default();
    out.put("sequential_total", r.sequential_total as f64);
    out.put("synthesized_total", r.synthesized_total as f64);
    out.put("group_slots", r.group_slots as f64);
    out.put("handoff_total", r.handoff_slots.iter().sum::<u64>() as f64);
    out.put("sequential_per_packet", r.sequential_per_packet);
    out.put("synthesized_per_packet", r.synthesized_per_packet);
    out.put("synthesized_per_packet_total", r.synthesized_per_packet_total);
    out.put("receivers_delayed", delayed as f64);
    for (i, &slot) in r.release_slots.iter().enumerate() {
        out.put(&format!("release_slot_{}", i + 1), slot as f64);
    }
    Ok(out)
}

fn mobility(n: usize, params: &Params, seed: u64) -> Result<PointOutput> {
    let exp = MobilityExperiment {
        n,
        slots: params.slots,
        rate: params.rate,
        seed,
        density: params.density,
        drain_slots: params.drain_slots,
    };
    let (s, _) = exp.run()?;
    let mut out = PointOutput::default();
    out.put("throughput_per_node", s.throughput_per_node);
    out.put("mean_delay", s.mean_delay);
    out.put("p50", s.p50);
    out.put("p90", s.p90);
    out.put("p99", s.p99);
    out.put("delivered_fraction", s.delivered_fraction);
    out.put("delivered", s.delivered as f64);
    out.put("max_source_queue", s.max_source_queue as f64);
    out.put("undersampled", f64::from(u8::from(s.undersampled)));
    out.mobility = Some(s);
    Ok(out)
}
