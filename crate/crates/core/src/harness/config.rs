use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::topology::Regime;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    #[serde(rename = "unicast2d")]
    Unicast2d,
    #[serde(rename = "unicast3d")]
    Unicast3d,
    ReceiverBottleneck,
    Dumbbell,
    Cluster,
    E2eErasure,
    HopByHop,
    CodedMulticast,
    BlockSynthesis,
    Mobility,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::Unicast2d,
        Scenario::Unicast3d,
        Scenario::ReceiverBottleneck,
        Scenario::Dumbbell,
        Scenario::Cluster,
        Scenario::E2eErasure,
        Scenario::HopByHop,
        Scenario::CodedMulticast,
        Scenario::BlockSynthesis,
        Scenario::Mobility,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Unicast2d => "unicast2d",
            Scenario::Unicast3d => "unicast3d",
            Scenario::ReceiverBottleneck => "receiver_bottleneck",
            Scenario::Dumbbell => "dumbbell",
            Scenario::Cluster => "cluster",
            Scenario::E2eErasure => "e2e_erasure",
            Scenario::HopByHop => "hop_by_hop",
            Scenario::CodedMulticast => "coded_multicast",
            Scenario::BlockSynthesis => "block_synthesis",
            Scenario::Mobility => "mobility",
        }
    }

    /// What `n` means for this scenario and what gets measured.
    pub fn describe(self) -> &'static str {
        match self {
            Scenario::Unicast2d => "n nodes in a disk, random pairs; per-flow capacity and hop count",
            Scenario::Unicast3d => "n nodes in a ball, random pairs; per-flow capacity",
            Scenario::ReceiverBottleneck => "n nodes all sending to one extra sink; per-flow capacity",
            Scenario::Dumbbell => "two half-disks joined by B bridges; crossing-flow capacity",
            Scenario::Cluster => "n^(1-g) clusters routed through leaders; per-flow capacity and leader load",
            Scenario::E2eErasure => "H = round(C sqrt(n)) hops, end-to-end retransmission; throughput",
            Scenario::HopByHop => "H = round(C sqrt(n)) hops, per-link retransmission; steady throughput",
            Scenario::CodedMulticast => "n receivers of a k-packet coded file; completion slots",
            Scenario::BlockSynthesis => "J transmitters pooling blocks for n receivers; per-packet slots",
            Scenario::Mobility => "n walkers on a torus, two-hop relaying; throughput and delay",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// Scenario parameters. Each scenario reads only the ones it needs.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Cluster exponent: `n^(1-g)` clusters of about `n^g` nodes.
    pub g: f64,
    /// Dumbbell bridge count.
    pub bridges: usize,
    /// Dumbbell crossing fraction.
    pub fraction: f64,
    /// Erasure probability.
    pub p: f64,
    /// Hop-count constant: `H = round(c sqrt(n))`.
    pub c: f64,
    /// Coded multicast file size.
    pub k: u64,
    /// File sizes for the per-packet completion check.
    pub k_list: Vec<u64>,
    /// Target completion probability.
    pub q: f64,
    pub trials: u64,
    /// Block synthesis: transmitter count and per-transmitter block size,
    /// unless `block_sizes` lists them explicitly.
    pub transmitters: usize,
    pub block_size: u64,
    pub block_sizes: Option<Vec<u64>>,
    /// Packets per transfer (erasure scenarios).
    pub packets: u64,
    /// Slot budget for end-to-end transfers.
    pub max_slots: u64,
    /// Mobility traffic window, per-node packet rate, density and drain.
    pub slots: u64,
    pub rate: f64,
    pub density: f64,
    pub drain_slots: u64,
    /// Placement regime for the routing scenarios.
    pub regime: String,
    /// Receiver bottleneck: share of nodes in a multicast group instead of
    /// one sink. Unset means multipoint-to-point.
    pub group_fraction: Option<f64>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            g: 0.5,
            bridges: 2,
            fraction: 0.5,
            p: 0.1,
            c: 1.0,
            k: 100,
            k_list: vec![10, 100, 1000],
            q: 0.9,
            trials: 10_000,
            transmitters: 4,
            block_size: 25,
            block_sizes: None,
            packets: 10_000,
            max_slots: 20_000_000,
            slots: 40_000,
            rate: 0.005,
            density: 1.0,
            drain_slots: 0,
            regime: "dense".into(),
            group_fraction: None,
        }
    }
}

impl Params {
    pub fn regime(&self) -> Result<Regime> {
        self.regime.parse()
    }

    pub fn blocks(&self) -> Vec<u64> {
        self.block_sizes
            .clone()
            .unwrap_or_else(|| vec![self.block_size; self.transmitters])
    }
}

/// Pass bands. Exponent tolerances left unset fall back to per-scenario
/// defaults (see [`Tolerances::capacity_exponent_for`]).
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub capacity_exponent: Option<f64>,
    pub hops_exponent: f64,
    pub leader_load_exponent: f64,
    /// Relative band on the end-to-end log-linear slope.
    pub slope_rel: f64,
    /// Monte-Carlo sigmas for the hop-by-hop throughput.
    pub sigma: f64,
    /// Standard errors allowed on the hop-by-hop slope against H.
    pub slope_stderrs: f64,
    /// Exact versus Monte-Carlo completion quantile.
    pub mc_slots: u64,
    /// Largest allowed completion growth from smallest to largest n.
    pub gap_slots: u64,
    /// Largest allowed mobility throughput ratio across n.
    pub throughput_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            capacity_exponent: None,
            hops_exponent: 0.1,
            leader_load_exponent: 0.15,
            slope_rel: 0.1,
            sigma: 3.0,
            slope_stderrs: 1.0,
            mc_slots: 2,
            gap_slots: 25,
            throughput_ratio: 2.0,
        }
    }
}

impl Tolerances {
    pub fn capacity_exponent_for(&self, scenario: Scenario) -> f64 {
        self.capacity_exponent.unwrap_or(match scenario {
            Scenario::Unicast3d => 0.12,
            Scenario::Dumbbell => 0.1,
            _ => 0.15,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n_list: Vec<u64>,
    #[serde(default = "one")]
    pub repeats: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn one() -> u32 {
    1
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, n_list: Vec<u64>, repeats: u32, seed: u64) -> Self {
        Self {
            scenario,
            n_list,
            repeats,
            seed,
            params: Params::default(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config(e))))
    }

    /// Check everything that can be checked before running.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_list must be strictly ascending".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        let p = &self.params;
        let t = &self.tolerances;
        let min_n = *self.n_list.first().expect("non-empty");
        let prob = |name: &str, v: f64| -> Result<()> {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                bad(format!("{name} = {v} outside [0, 1)"))
            }
        };
        let open = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                bad(format!("{name} = {v} outside (0, 1)"))
            }
        };
        p.regime()
            .map_err(|_| Error::Config(format!("unknown regime '{}'", p.regime)))?;
        if [t.hops_exponent, t.leader_load_exponent, t.slope_rel, t.sigma, t.slope_stderrs, t.throughput_ratio]
            .iter()
            .chain(t.capacity_exponent.iter())
            .any(|&x| !(x >= 0.0))
        {
            return bad("tolerances must be non-negative".into());
        }
        match self.scenario {
            Scenario::Unicast2d | Scenario::Unicast3d if min_n < 2 => {
                return bad("unicast scenarios need n >= 2".into())
            }
            Scenario::ReceiverBottleneck => {
                if min_n < 1 {
                    return bad("receiver_bottleneck needs n >= 1".into());
                }
                if let Some(f) = p.group_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return bad(format!("group_fraction = {f} outside (0, 1]"));
                    }
                    if min_n < 2 {
                        return bad("multicast groups need n >= 2".into());
                    }
                }
            }
            Scenario::Dumbbell => {
                if p.bridges == 0 {
                    return bad("bridges must be at least 1".into());
                }
                if !(p.fraction > 0.0 && p.fraction <= 1.0) {
                    return bad(format!("fraction = {} outside (0, 1]", p.fraction));
                }
                if self.n_list.iter().any(|&n| n < 4 || n % 2 != 0) {
                    return bad("dumbbell n values must be even and at least 4".into());
                }
                if self.n_list.iter().any(|&n| p.bridges as u64 > n) {
                    return bad("more bridges than nodes".into());
                }
            }
            Scenario::Cluster => {
                if !(0.0..=1.0).contains(&p.g) {
                    return bad(format!("g = {} outside [0, 1]", p.g));
                }
                if min_n < 2 {
                    return bad("cluster needs n >= 2".into());
                }
            }
            Scenario::E2eErasure | Scenario::HopByHop => {
                prob("p", p.p)?;
                if !(p.c > 0.0) {
                    return bad("c must be positive".into());
                }
                if p.packets == 0 {
                    return bad("packets must be at least 1".into());
                }
                if self.n_list.iter().any(|&n| (p.c * (n as f64).sqrt()).round() < 1.0) {
                    return bad("every n must give at least one hop".into());
                }
            }
            Scenario::CodedMulticast => {
                prob("p", p.p)?;
                open("q", p.q)?;
                if p.k == 0 || p.k_list.contains(&0) {
                    return bad("file sizes must be at least 1".into());
                }
                if p.trials == 0 {
                    return bad("trials must be at least 1".into());
                }
                if min_n < 1 {
                    return bad("coded_multicast needs n >= 1".into());
                }
            }
            Scenario::BlockSynthesis => {
                prob("p", p.p)?;
                open("q", p.q)?;
                let blocks = p.blocks();
                if blocks.len() < 2 || blocks.contains(&0) {
                    return bad("block synthesis needs at least two non-empty blocks".into());
                }
                if min_n < 1 {
                    return bad("block_synthesis needs n >= 1".into());
                }
            }
            Scenario::Mobility => {
                if !(0.0..=1.0).contains(&p.rate) {
                    return bad(format!("rate = {} outside [0, 1]", p.rate));
                }
                if !(p.density > 0.0) {
                    return bad("density must be positive".into());
                }
                if p.slots == 0 {
                    return bad("slots must be at least 1".into());
                }
                if min_n < 1 {
                    return bad("mobility needs n >= 1".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn strip_config(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
