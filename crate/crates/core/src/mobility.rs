//! Two-hop relaying among mobile nodes.
//!
//! Nodes random-walk on a torus of square cells and can talk only to nodes in
//! the same cell. A source hands its packet to any node it meets, and that
//! relay carries it until it meets the destination. Packets never take a
//! second relay.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rand::Rng;

use crate::error::invalid;
use crate::rng::{self, Bernoulli, SimRng};
use crate::routing::random_derangement;
use crate::topology::NodeId;
use crate::Result;

/// Nodes per cell in the extended regime.
pub const DEFAULT_DENSITY: f64 = 1.0;

/// Fewer deliveries than this and a result is flagged as under-sampled.
pub const MIN_DELIVERIES: u64 = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    pub source: NodeId,
    pub destination: NodeId,
    pub created: u64,
    pub relay: Option<NodeId>,
    pub pickup: Option<u64>,
    pub delivered: Option<u64>,
}

/// Conservation snapshot: `created = delivered + in_flight + queued`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PacketCounts {
    pub created: u64,
    pub delivered: u64,
    pub in_flight: u64,
    pub queued: u64,
}

#[derive(Clone, Debug)]
pub struct MobilityWorld {
    width: u32,
    height: u32,
    cells: Vec<(u32, u32)>,
    destination: Vec<Option<NodeId>>,
    source_queue: Vec<VecDeque<usize>>,
    relay_buffer: Vec<BTreeMap<NodeId, VecDeque<usize>>>,
    ledger: Vec<PacketRecord>,
    step: u64,
    seed: u64,
    traffic: Option<Bernoulli>,
    counts: PacketCounts,
    exchanges_last_slot: usize,
    rng: SimRng,
}

impl MobilityWorld {
    /// `n` nodes on a `grid_side x grid_side` torus with
    /// `grid_side = round(sqrt(n / density))`.
    pub fn new(n: usize, density: f64, rate: f64, seed: u64) -> Result<Self> {
        if !(density > 0.0) {
            return Err(invalid("density must be positive"));
        }
        let side = ((n as f64 / density).sqrt().round() as u32).max(1);
        Self::on_grid(n, side, side, rate, seed)
    }

    /// `n` nodes on an explicit `width x height` torus, placed uniformly.
    pub fn on_grid(n: usize, width: u32, height: u32, rate: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least one node"));
        }
        if width == 0 || height == 0 {
            return Err(invalid("torus dimensions must be positive"));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(invalid(format!("packet rate {rate} outside [0, 1]")));
        }
        let mut rng = rng::stream(seed, rng::tag::MOBILITY, n as u64);
        let destination = if n >= 2 {
            random_derangement(n, &mut rng).into_iter().map(Some).collect()
        } else {
            vec![None]
        };
        let cells = (0..n)
            .map(|_| (rng.gen_range(0..width), rng.gen_range(0..height)))
            .collect();
        Ok(Self {
            width,
            height,
            cells,
            destination,
            source_queue: vec![VecDeque::new(); n],
            relay_buffer: vec![BTreeMap::new(); n],
            ledger: Vec::new(),
            step: 0,
            seed,
            traffic: (rate > 0.0).then(|| Bernoulli::new(rate)),
            counts: PacketCounts {
                created: 0,
                delivered: 0,
                in_flight: 0,
                queued: 0,
            },
            exchanges_last_slot: 0,
            rng,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn grid(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn cell(&self, node: NodeId) -> (u32, u32) {
        self.cells[node]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn destination(&self, node: NodeId) -> Option<NodeId> {
        self.destination[node]
    }

    pub fn ledger(&self) -> &[PacketRecord] {
        &self.ledger
    }

    pub fn counts(&self) -> PacketCounts {
        self.counts
    }

    pub fn source_queue_len(&self, node: NodeId) -> usize {
        self.source_queue[node].len()
    }

    pub fn exchanges_last_slot(&self) -> usize {
        self.exchanges_last_slot
    }

    /// Stop creating packets; the world keeps moving and delivering.
    pub fn stop_traffic(&mut self) {
        self.traffic = None;
    }

    /// One slot: create packets, exchange among co-located nodes, then move.
    pub fn advance(&mut self) {
        self.generate();
        self.exchange();
        self.walk();
        self.step += 1;
    }

    fn generate(&mut self) {
        let Some(traffic) = self.traffic else { return };
        for u in 0..self.len() {
            let Some(d) = self.destination[u] else { continue };
            if traffic.sample(&mut self.rng) {
                let id = self.ledger.len();
                self.ledger.push(PacketRecord {
                    source: u,
                    destination: d,
                    created: self.step,
                    relay: None,
                    pickup: None,
                    delivered: None,
                });
                self.source_queue[u].push_back(id);
                self.counts.created += 1;
                self.counts.queued += 1;
            }
        }
    }

    fn holds_for(&self, u: NodeId, v: NodeId) -> bool {
        (self.destination[u] == Some(v) && !self.source_queue[u].is_empty())
            || self.relay_buffer[u].get(&v).is_some_and(|q| !q.is_empty())
    }

    /// Deliver the oldest packet `u` holds for `v`.
    fn deliver(&mut self, u: NodeId, v: NodeId) {
        let own = (self.destination[u] == Some(v))
            .then(|| self.source_queue[u].front().copied())
            .flatten();
        let relayed = self.relay_buffer[u].get(&v).and_then(|q| q.front().copied());
        let id = match (own, relayed) {
            (Some(a), Some(b)) if b < a => {
                self.pop_relayed(u, v);
                self.counts.in_flight -= 1;
                b
            }
            (None, Some(b)) => {
                self.pop_relayed(u, v);
                self.counts.in_flight -= 1;
                b
            }
            (Some(a), _) => {
                self.source_queue[u].pop_front();
                self.counts.queued -= 1;
                a
            }
            (None, None) => unreachable!("deliver called without a packet"),
        };
        self.ledger[id].delivered = Some(self.step);
        self.counts.delivered += 1;
    }

    fn pop_relayed(&mut self, u: NodeId, v: NodeId) {
        let q = self.relay_buffer[u].get_mut(&v).expect("buffer exists");
        q.pop_front();
        if q.is_empty() {
            self.relay_buffer[u].remove(&v);
        }
    }

    fn hand_off(&mut self, u: NodeId, relay: NodeId) {
        let id = self.source_queue[u].pop_front().expect("source has a packet");
        let d = self.ledger[id].destination;
        self.ledger[id].relay = Some(relay);
        self.ledger[id].pickup = Some(self.step);
        self.relay_buffer[relay].entry(d).or_default().push_back(id);
        self.counts.queued -= 1;
        self.counts.in_flight += 1;
    }

    /// Within each cell, pair nodes greedily by ascending id: first every pair
    /// that can complete a delivery, then source-to-relay handoffs among the
    /// nodes still free. Each node joins at most one exchange, which moves one
    /// packet.
    fn exchange(&mut self) {
        let n = self.len();
        let mut order: Vec<(u64, NodeId)> = (0..n)
            .map(|u| {
                let (x, y) = self.cells[u];
                (u64::from(y) * u64::from(self.width) + u64::from(x), u)
            })
            .collect();
        order.sort_unstable();
        let mut busy = vec![false; n];
        let mut exchanges = 0;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && order[end].0 == order[start].0 {
                end += 1;
            }
            if end - start >= 2 {
                let group: Vec<NodeId> = order[start..end].iter().map(|&(_, u)| u).collect();
                exchanges += self.exchange_in_cell(&group, &mut busy);
            }
            start = end;
        }
        self.exchanges_last_slot = exchanges;
    }

    fn exchange_in_cell(&mut self, group: &[NodeId], busy: &mut [bool]) -> usize {
        let mut count = 0;
        for (i, &u) in group.iter().enumerate() {
            if busy[u] {
                continue;
            }
            for &v in &group[i + 1..] {
                if busy[v] {
                    continue;
                }
                if self.holds_for(u, v) {
                    self.deliver(u, v);
                } else if self.holds_for(v, u) {
                    self.deliver(v, u);
                } else {
                    continue;
                }
                busy[u] = true;
                busy[v] = true;
                count += 1;
                break;
            }
        }
        for (i, &u) in group.iter().enumerate() {
            if busy[u] {
                continue;
            }
            for &v in &group[i + 1..] {
                if busy[v] {
                    continue;
                }
                if !self.source_queue[u].is_empty() {
                    self.hand_off(u, v);
                } else if !self.source_queue[v].is_empty() {
                    self.hand_off(v, u);
                } else {
                    continue;
                }
                busy[u] = true;
                busy[v] = true;
                count += 1;
                break;
            }
        }
        count
    }

    /// Each node stays, or steps left, right, up or down, with probability
    /// 1/5 each, wrapping around the torus.
    fn walk(&mut self) {
        let (w, h) = (self.width, self.height);
        for cell in &mut self.cells {
            let (x, y) = *cell;
            *cell = match self.rng.gen_range(0..5u8) {
                0 => (x, y),
                1 => ((x + w - 1) % w, y),
                2 => ((x + 1) % w, y),
                3 => (x, (y + h - 1) % h),
                _ => (x, (y + 1) % h),
            };
        }
    }
}

/// Advance a world by one slot.
pub fn step_world(mut world: MobilityWorld) -> MobilityWorld {
    world.advance();
    world
}

#[derive(Clone, Debug, PartialEq)]
pub struct MobilitySummary {
    pub n: usize,
    pub slots: u64,
    pub rate: f64,
    pub seed: u64,
    /// Packets delivered within the first `slots` slots, per slot, per node.
    pub throughput_per_node: f64,
    pub mean_delay: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    /// Delivered share of the packets created, counted at the end of the run.
    pub delivered_fraction: f64,
    pub delivered: u64,
    pub created: u64,
    /// Largest source queue seen at the end of the traffic window.
    pub max_source_queue: usize,
    pub undersampled: bool,
}

impl MobilitySummary {
    pub const CSV_HEADER: &'static str =
        "n,slots,rate,seed,throughput_per_node,mean_delay,p50,p90,p99,delivered_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.slots,
            self.rate,
            self.seed,
            self.throughput_per_node,
            self.mean_delay,
            self.p50,
            self.p90,
            self.p99,
            self.delivered_fraction
        )
    }
}

pub fn write_summary_csv<W: Write>(rows: &[MobilitySummary], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", MobilitySummary::CSV_HEADER)?;
    for row in rows {
        writeln!(w, "{}", row.csv_row())?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobilityExperiment {
    pub n: usize,
    pub slots: u64,
    pub rate: f64,
    pub seed: u64,
    pub density: f64,
    /// Extra slots after traffic stops, so late packets can still arrive.
    pub drain_slots: u64,
}

impl MobilityExperiment {
    pub fn new(n: usize, slots: u64, rate: f64, seed: u64) -> Self {
        Self {
            n,
            slots,
            rate,
            seed,
            density: DEFAULT_DENSITY,
            drain_slots: 0,
        }
    }

    pub fn run(&self) -> Result<(MobilitySummary, MobilityWorld)> {
        if self.slots == 0 {
            return Err(invalid("need at least one slot"));
        }
        let mut world = MobilityWorld::new(self.n, self.density, self.rate, self.seed)?;
        for _ in 0..self.slots {
            world.advance();
        }
        let in_window = world.counts().delivered;
        let max_source_queue = (0..world.len()).map(|u| world.source_queue_len(u)).max().unwrap_or(0);
        world.stop_traffic();
        for _ in 0..self.drain_slots {
            world.advance();
        }
        let mut delays: Vec<u64> = world
            .ledger()
            .iter()
            .filter_map(|p| p.delivered.map(|d| d - p.created))
            .collect();
        delays.sort_unstable();
        let counts = world.counts();
        let mean_delay = if delays.is_empty() {
            0.0
        } else {
            delays.iter().sum::<u64>() as f64 / delays.len() as f64
        };
        let summary = MobilitySummary {
            n: self.n,
            slots: self.slots,
            rate: self.rate,
            seed: self.seed,
            throughput_per_node: in_window as f64 / self.slots as f64 / self.n as f64,
            mean_delay,
            p50: nearest_rank(&delays, 0.5),
            p90: nearest_rank(&delays, 0.9),
            p99: nearest_rank(&delays, 0.99),
            delivered_fraction: if counts.created == 0 {
                0.0
            } else {
                counts.delivered as f64 / counts.created as f64
            },
            delivered: counts.delivered,
            created: counts.created,
            max_source_queue,
            undersampled: counts.delivered < MIN_DELIVERIES,
        };
        Ok((summary, world))
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx] as f64
}

/// Run with unit density and no drain.
pub fn run_mobility_experiment(n: usize, slots: u64, rate: f64, seed: u64) -> Result<MobilitySummary> {
    MobilityExperiment::new(n, slots, rate, seed).run().map(|(s, _)| s)
}
