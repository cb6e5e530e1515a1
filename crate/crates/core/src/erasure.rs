//! Loss recovery over erasure channels.
//!
//! Covers end-to-end retransmission over a multi-hop path, hop-by-hop
//! retransmission, single-hop coded multicast and block synthesis across
//! several transmitters. Erasures are independent per slot and per link or
//! receiver. Coded transmission assumes an ideal rateless code: any `k`
//! received packets recover a `k`-packet file.

use crate::error::invalid;
use crate::rng::{self, Bernoulli};
use crate::{par, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErasureChannel {
    p: f64,
}

impl ErasureChannel {
    pub fn new(p: f64) -> Result<Self> {
        check_p(p)?;
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(invalid(format!("erasure probability {p} outside [0, 1)")));
    }
    Ok(())
}

/// File size `k`, erasure probability `p`, receiver count `n`, target
/// completion probability `q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompletionModel {
    pub k: u64,
    pub p: f64,
    pub n: u64,
    pub q: f64,
}

impl CompletionModel {
    pub fn new(k: u64, p: f64, n: u64, q: f64) -> Result<Self> {
        if k == 0 {
            return Err(invalid("file size k must be at least 1"));
        }
        if n == 0 {
            return Err(invalid("receiver count n must be at least 1"));
        }
        check_p(p)?;
        if !(q > 0.0 && q < 1.0) {
            return Err(invalid(format!("target probability {q} outside (0, 1)")));
        }
        Ok(Self { k, p, n, q })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferResult {
    pub slots_used: u64,
    pub packets_delivered: u64,
    pub throughput: f64,
    /// False when the slot budget ran out before every packet arrived.
    pub complete: bool,
}

impl TransferResult {
    fn new(slots_used: u64, packets_delivered: u64, complete: bool) -> Self {
        let throughput = if slots_used == 0 {
            0.0
        } else {
            packets_delivered as f64 / slots_used as f64
        };
        Self {
            slots_used,
            packets_delivered,
            throughput,
            complete,
        }
    }
}

/// `(1-p)^H`: chance that one attempt survives all `H` hops.
pub fn e2e_success_probability(hops: u32, p: f64) -> f64 {
    (f64::from(hops) * (-p).ln_1p()).exp()
}

/// End-to-end retransmission: every slot the source sends its head-of-line
/// packet across all `hops` links; it arrives only if no link erases it, and
/// otherwise the source tries again next slot.
pub fn simulate_e2e_transfer(
    hops: u32,
    p: f64,
    k: u64,
    max_slots: u64,
    seed: u64,
) -> Result<TransferResult> {
    check_p(p)?;
    if hops == 0 || k == 0 {
        return Err(invalid("need at least one hop and one packet"));
    }
    let erase = Bernoulli::new(p);
    let mut rng = rng::stream(seed, rng::tag::E2E, u64::from(hops));
    let mut delivered = 0;
    let mut slots = 0;
    while delivered < k && slots < max_slots {
        slots += 1;
        if (0..hops).all(|_| !erase.sample(&mut rng)) {
            delivered += 1;
        }
    }
    Ok(TransferResult::new(slots, delivered, delivered == k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HopByHopResult {
    /// Whole transfer, pipeline fill and drain included.
    pub transfer: TransferResult,
    /// Success ratio of link transmissions after warm-up: packets a busy link
    /// moves per slot.
    pub steady_throughput: f64,
    /// Binomial standard error of `steady_throughput`.
    pub steady_stderr: f64,
    /// Link transmissions counted after warm-up, and how many succeeded.
    pub steady_attempts: u64,
    pub steady_successes: u64,
    /// Packets delivered per slot after warm-up, counted until the last
    /// delivery.
    pub steady_delivery_rate: f64,
}

/// Warm-up in slots per hop.
pub const WARMUP_SLOTS_PER_HOP: u64 = 10;

/// Store-and-forward with per-link acknowledgment. The source holds all `k`
/// packets; every node with a queued packet transmits it on its outgoing link
/// each slot and keeps it until the hop succeeds. A packet advances at most
/// one hop per slot. Measurement starts after `10 H` slots.
pub fn simulate_hop_by_hop(hops: u32, p: f64, k: u64, seed: u64) -> Result<HopByHopResult> {
    check_p(p)?;
    if hops == 0 || k == 0 {
        return Err(invalid("need at least one hop and one packet"));
    }
    let h = hops as usize;
    let warmup = WARMUP_SLOTS_PER_HOP * u64::from(hops);
    let erase = Bernoulli::new(p);
    let mut rng = rng::stream(seed, rng::tag::HOP_BY_HOP, u64::from(hops));
    // queue[i] waits to cross link i; queue[h] is the destination.
    let mut queue = vec![0u64; h + 1];
    queue[0] = k;
    let mut slot = 0u64;
    let (mut attempts, mut successes) = (0u64, 0u64);
    let mut delivered_at_warmup = 0;
    while queue[h] < k {
        if slot == warmup {
            delivered_at_warmup = queue[h];
        }
        let measuring = slot >= warmup;
        for link in (0..h).rev() {
            if queue[link] == 0 {
                continue;
            }
            let ok = !erase.sample(&mut rng);
            if measuring {
                attempts += 1;
                successes += u64::from(ok);
            }
            if ok {
                queue[link] -= 1;
                queue[link + 1] += 1;
            }
        }
        slot += 1;
    }
    let theta = if attempts == 0 {
        1.0 - p
    } else {
        successes as f64 / attempts as f64
    };
    let stderr = if attempts == 0 {
        0.0
    } else {
        (theta * (1.0 - theta) / attempts as f64).sqrt()
    };
    let steady_delivery_rate = if slot > warmup {
        (k - delivered_at_warmup) as f64 / (slot - warmup) as f64
    } else {
        0.0
    };
    Ok(HopByHopResult {
        transfer: TransferResult::new(slot, k, true),
        steady_throughput: theta,
        steady_stderr: stderr,
        steady_attempts: attempts,
        steady_successes: successes,
        steady_delivery_rate,
    })
}

/// `ln(m!)` for `m = 0..=max`.
fn ln_factorials(max: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for m in 1..=max {
        acc += (m as f64).ln();
        out.push(acc);
    }
    out
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// `ln P(Binomial(t, 1-p) >= k)` for `0 < p < 1`, summing whichever tail is
/// smaller in log space.
fn ln_binomial_upper_tail(t: u64, k: u64, p: f64, lf: &[f64]) -> f64 {
    if k > t {
        return f64::NEG_INFINITY;
    }
    if k == 0 {
        return 0.0;
    }
    let (ln_s, ln_e) = ((-p).ln_1p(), p.ln());
    let term = |j: u64| {
        lf[t as usize] - lf[j as usize] - lf[(t - j) as usize]
            + j as f64 * ln_s
            + (t - j) as f64 * ln_e
    };
    let mean = t as f64 * (1.0 - p);
    if (k as f64) > mean {
        log_sum_exp((k..=t).map(term))
    } else {
        let lower = log_sum_exp((0..k).map(term)).exp();
        (-lower).ln_1p()
    }
}

/// Probability that each of `n` independent receivers collects at least `k`
/// of `t` transmitted coded packets.
pub fn completion_probability(k: u64, p: f64, n: u64, t: u64) -> f64 {
    if t < k {
        return 0.0;
    }
    if p == 0.0 {
        return 1.0;
    }
    let lf = ln_factorials(t);
    (n as f64 * ln_binomial_upper_tail(t, k, p, &lf)).exp()
}

/// Smallest `T >= k` with `P(Binomial(T, 1-p) >= k)^n >= q`.
pub fn min_completion_slots(model: &CompletionModel) -> u64 {
    let CompletionModel { k, p, n, q } = *model;
    if p == 0.0 {
        return k;
    }
    let target = q.ln();
    let mut cap = 2 * k + 64;
    let mut lf = ln_factorials(cap);
    let mut t = k;
    loop {
        if t > cap {
            cap *= 2;
            lf = ln_factorials(cap);
        }
        if n as f64 * ln_binomial_upper_tail(t, k, p, &lf) >= target {
            return t;
        }
        t += 1;
    }
}

/// Completion slots over Monte-Carlo trials, sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletionSamples {
    pub sorted: Vec<u64>,
}

impl CompletionSamples {
    /// Smallest sample `x` such that at least a fraction `q` of trials
    /// finished by `x`.
    pub fn quantile(&self, q: f64) -> u64 {
        let m = self.sorted.len();
        let idx = ((q * m as f64).ceil() as usize).clamp(1, m) - 1;
        self.sorted[idx]
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<u64>() as f64 / self.sorted.len() as f64
    }
}

/// Slots until a receiver has collected `k` packets.
fn slots_to_collect(k: u64, erase: &Bernoulli, rng: &mut rng::SimRng) -> u64 {
    let mut got = 0;
    let mut slots = 0;
    while got < k {
        slots += 1;
        if !erase.sample(rng) {
            got += 1;
        }
    }
    slots
}

/// Per trial the completion slot is the latest, over the `n` receivers, of the
/// slot delivering that receiver's `k`-th packet.
pub fn simulate_coded_multicast(model: &CompletionModel, trials: u64, seed: u64) -> Result<CompletionSamples> {
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let erase = Bernoulli::new(model.p);
    let mut sorted = par::map_range(trials as usize, |i| {
        let mut rng = rng::stream(seed, rng::tag::CODED_TRIAL, i as u64);
        (0..model.n)
            .map(|_| slots_to_collect(model.k, &erase, &mut rng))
            .max()
            .unwrap_or(0)
    });
    sorted.sort_unstable();
    Ok(CompletionSamples { sorted })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockSynthesisReport {
    pub block_sizes: Vec<u64>,
    /// Per block, slots to multicast it alone to all receivers.
    pub sequential_slots: Vec<u64>,
    pub sequential_total: u64,
    /// `sequential_total / k`.
    pub sequential_per_packet: f64,
    /// Slots transmitter `i+1` spends collecting the running block from
    /// transmitter `i`, for `i = 1..J-1`.
    pub handoff_slots: Vec<u64>,
    /// Slots the last transmitter spends multicasting the full block.
    pub group_slots: u64,
    pub synthesized_total: u64,
    /// `group_slots / k`: time the receivers spend per packet.
    pub synthesized_per_packet: f64,
    /// `synthesized_total / k`, handoffs included.
    pub synthesized_per_packet_total: f64,
    /// Slot at which each transmitter may stop: its data is held by a
    /// successor (or, for the last, delivered to the group).
    pub release_slots: Vec<u64>,
    /// Per receiver, sampled slots to receive the first block alone.
    pub first_block_delay: Vec<u64>,
    /// Per receiver, sampled slots to receive the whole synthesized file.
    pub synthesized_delay: Vec<u64>,
}

/// Compare `J` transmitters sending their blocks one after another against
/// synthesizing one block of size `k = sum k_i`.
///
/// In the synthesized arm transmitter `i+1` first receives the running block
/// of size `k_1 + ... + k_i` from transmitter `i` as a single extra receiver
/// on the same channel, then codes it together with its own packets. The
/// last transmitter multicasts the full block to the `n` receivers. Every
/// phase targets `q^(1/J)` so both arms aim at the same overall guarantee.
pub fn simulate_block_synthesis(
    block_sizes: &[u64],
    p: f64,
    n: u64,
    q: f64,
    seed: u64,
) -> Result<BlockSynthesisReport> {
    let j = block_sizes.len();
    if j < 2 {
        return Err(invalid("block synthesis needs at least two transmitters"));
    }
    if block_sizes.contains(&0) {
        return Err(invalid("every block needs at least one packet"));
    }
    let q_phase = q.powf(1.0 / j as f64);
    let slots = |k: u64, receivers: u64| -> Result<u64> {
        Ok(min_completion_slots(&CompletionModel::new(k, p, receivers, q_phase)?))
    };
    let total_k: u64 = block_sizes.iter().sum();

    let sequential_slots = block_sizes
        .iter()
        .map(|&b| slots(b, n))
        .collect::<Result<Vec<_>>>()?;
    let sequential_total: u64 = sequential_slots.iter().sum();

    let mut handoff_slots = Vec::with_capacity(j - 1);
    let mut release_slots = Vec::with_capacity(j);
    let mut running = 0;
    let mut clock = 0;
    for &b in &block_sizes[..j - 1] {
        running += b;
        let h = slots(running, 1)?;
        clock += h;
        handoff_slots.push(h);
        release_slots.push(clock);
    }
    let group_slots = slots(total_k, n)?;
    let handoff_total = clock;
    let synthesized_total = handoff_total + group_slots;
    release_slots.push(synthesized_total);

    let erase = Bernoulli::new(p);
    let (first_block_delay, synthesized_delay) = (0..n)
        .map(|r| {
            let mut rng = rng::stream(seed, rng::tag::SYNTHESIS, r);
            let first = slots_to_collect(block_sizes[0], &erase, &mut rng);
            let whole = handoff_total + slots_to_collect(total_k, &erase, &mut rng);
            (first, whole)
        })
        .unzip();

    Ok(BlockSynthesisReport {
        block_sizes: block_sizes.to_vec(),
        sequential_per_packet: sequential_total as f64 / total_k as f64,
        sequential_slots,
        sequential_total,
        handoff_slots,
        group_slots,
        synthesized_total,
        synthesized_per_packet: group_slots as f64 / total_k as f64,
        synthesized_per_packet_total: synthesized_total as f64 / total_k as f64,
        release_slots,
        first_block_delay,
        synthesized_delay,
    })
}
