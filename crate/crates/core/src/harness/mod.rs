//! Scenario sweeps: run every `(n, repeat)` point, fit exponents over the
//! per-n medians and judge them against the analytic laws.

mod config;
mod output;
mod scenarios;

use std::collections::BTreeMap;
use std::fmt;

pub use config::{Params, Scenario, ScenarioConfig, Tolerances};
pub use output::{
    fit_metric, read_results_csv, write_checks_csv, write_results, write_rows_csv, RESULTS_HEADER,
    SUMMARY_HEADER,
};
pub use scenarios::{hops_for, run_point, CodedRow, PointOutput};

use crate::laws::{self, fit_exponent, fit_linear, fit_log_linear, ExponentFit, ScalingSeries};
use crate::mobility::MobilitySummary;
use crate::rng::derive_seed;
use crate::topology::Dim;
use crate::{par, Result};

use scenarios::{median, per_packet_metric};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub scenario: Scenario,
    pub n: u64,
    pub repeat: u32,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

/// A sweep point that errored.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub n: u64,
    pub repeat: u32,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// `|observed - expected| <= tolerance`.
    Within,
    /// `observed <= expected + tolerance`.
    AtMost,
    /// `observed >= expected - tolerance`.
    AtLeast,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Within => "within",
            Relation::AtMost => "at_most",
            Relation::AtLeast => "at_least",
        })
    }
}

/// One verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub relation: Relation,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub stderr: Option<f64>,
    pub r_squared: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, relation: Relation, observed: f64, expected: f64, tolerance: f64) -> Self {
        let pass = match relation {
            Relation::Within => (observed - expected).abs() <= tolerance,
            Relation::AtMost => observed <= expected + tolerance,
            Relation::AtLeast => observed >= expected - tolerance,
        };
        Self {
            name: name.into(),
            relation,
            observed,
            expected,
            tolerance,
            stderr: None,
            r_squared: None,
            pass,
        }
    }

    fn with_fit(mut self, fit: &ExponentFit) -> Self {
        self.stderr = Some(fit.stderr);
        self.r_squared = Some(fit.r_squared);
        self
    }
}

/// Log-log fit of one metric over the per-n medians, plus the same fit over
/// the per-n means.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricFit {
    pub metric: String,
    pub points: usize,
    pub median: ExponentFit,
    pub mean_exponent: f64,
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    /// Canonically sorted by `(n, repeat, metric)`.
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub checks: Vec<Check>,
    pub fits: Vec<MetricFit>,
    pub coded: Vec<CodedRow>,
    pub mobility: Vec<MobilitySummary>,
}

impl SweepResult {
    pub fn empty(config: ScenarioConfig) -> Self {
        Self {
            config,
            rows: Vec::new(),
            failures: Vec::new(),
            checks: Vec::new(),
            fits: Vec::new(),
            coded: Vec::new(),
            mobility: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Values of `metric` grouped by n, in repeat order.
    pub fn values_by_n(&self, metric: &str) -> BTreeMap<u64, Vec<f64>> {
        values_by_n(&self.rows, metric)
    }

    /// Median over repeats for each n that has the metric.
    pub fn medians(&self, metric: &str) -> Vec<(u64, f64)> {
        medians(&self.rows, metric)
    }
}

/// Substream seed for one sweep point.
pub fn point_seed(seed: u64, n: u64, repeat: u32) -> u64 {
    derive_seed(seed, &[n, u64::from(repeat)])
}

/// Run a full sweep. Invalid configs fail up front; a point that errors is
/// recorded as a failure and the sweep goes on.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SweepResult> {
    config.validate()?;
    let jobs: Vec<(u64, u32)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.repeats).map(move |r| (n, r)))
        .collect();
    let outputs = par::map(&jobs, |&(n, repeat)| {
        let seed = point_seed(config.seed, n, repeat);
        (n, repeat, seed, run_point(config.scenario, &config.params, n, seed))
    });
    let mut result = SweepResult::empty(config.clone());
    for (n, repeat, seed, out) in outputs {
        match out {
            Ok(point) => {
                for (metric, value) in point.metrics {
                    result.rows.push(Row {
                        scenario: config.scenario,
                        n,
                        repeat,
                        seed,
                        metric,
                        value,
                    });
                }
                result.coded.extend(point.coded);
                result.mobility.extend(point.mobility);
            }
            Err(e) => result.failures.push(Failure {
                n,
                repeat,
                seed,
                error: e.to_string(),
            }),
        }
    }
    result
        .rows
        .sort_by(|a, b| (a.n, a.repeat, &a.metric).cmp(&(b.n, b.repeat, &b.metric)));
    result.fits = fit_all(&result.rows);
    result.checks = evaluate(config, &result.rows);
    Ok(result)
}

fn values_by_n(rows: &[Row], metric: &str) -> BTreeMap<u64, Vec<f64>> {
    let mut out: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric) {
        out.entry(r.n).or_default().push(r.value);
    }
    out
}

fn medians(rows: &[Row], metric: &str) -> Vec<(u64, f64)> {
    values_by_n(rows, metric)
        .into_iter()
        .map(|(n, mut v)| (n, median(&mut v)))
        .collect()
}

fn series(label: &str, points: &[(u64, f64)]) -> ScalingSeries {
    ScalingSeries {
        label: label.to_string(),
        points: points.iter().map(|&(n, v)| (n as f64, v)).collect(),
    }
}

/// Every metric that is positive over at least three distinct n.
fn fit_all(rows: &[Row]) -> Vec<MetricFit> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    names
        .into_iter()
        .filter_map(|metric| {
            let by_n = values_by_n(rows, metric);
            let med: Vec<(u64, f64)> = by_n.iter().map(|(&n, v)| (n, median(&mut v.clone()))).collect();
            let avg: Vec<(u64, f64)> = by_n
                .iter()
                .map(|(&n, v)| (n, v.iter().sum::<f64>() / v.len() as f64))
                .collect();
            let m = fit_exponent(&series(metric, &med)).ok()?;
            let a = fit_exponent(&series(metric, &avg)).ok()?;
            Some(MetricFit {
                metric: metric.to_string(),
                points: med.len(),
                median: m,
                mean_exponent: a.exponent,
            })
        })
        .collect()
}

/// Exponent check of `metric`'s per-n medians against the log-log slope of
/// `law` over the same n. Sweeps with fewer than three n values get no
/// exponent verdict; sweeps that lost points to failures get a failing one.
fn exponent_check(
    config: &ScenarioConfig,
    rows: &[Row],
    name: &str,
    metric: &str,
    law: impl Fn(u64) -> f64,
    tolerance: f64,
) -> Option<Check> {
    if config.n_list.len() < 3 {
        return None;
    }
    let med = medians(rows, metric);
    let predicted = fit_exponent(&series("law", &config.n_list.iter().map(|&n| (n, law(n))).collect::<Vec<_>>()))
        .map(|f| f.exponent)
        .unwrap_or(f64::NAN);
    Some(match fit_exponent(&series(metric, &med)) {
        Ok(fit) => Check::new(name, Relation::Within, fit.exponent, predicted, tolerance).with_fit(&fit),
        Err(_) => Check::new(name, Relation::Within, f64::NAN, predicted, tolerance),
    })
}

fn count_where(rows: &[Row], metric: &str, pred: impl Fn(f64) -> bool) -> f64 {
    rows.iter().filter(|r| r.metric == metric && pred(r.value)).count() as f64
}

/// Points expected but missing (failed runs).
fn missing_points(config: &ScenarioConfig, rows: &[Row], metric: &str) -> f64 {
    let expected = config.n_list.len() as f64 * f64::from(config.repeats);
    expected - count_where(rows, metric, |_| true)
}

fn evaluate(config: &ScenarioConfig, rows: &[Row]) -> Vec<Check> {
    let p = &config.params;
    let t = &config.tolerances;
    let cap_tol = t.capacity_exponent_for(config.scenario);
    let mut checks = Vec::new();
    let mut push = |c: Option<Check>| checks.extend(c);
    match config.scenario {
        Scenario::Unicast2d => {
            push(exponent_check(config, rows, "capacity_exponent", "capacity_median", |n| {
                laws::law_unicast(n as usize, Dim::Two)
            }, cap_tol));
            push(exponent_check(config, rows, "hops_exponent", "mean_hops", |n| (n as f64).sqrt(), t.hops_exponent));
        }
        Scenario::Unicast3d => {
            push(exponent_check(config, rows, "capacity_exponent", "capacity_median", |n| {
                laws::law_unicast(n as usize, Dim::Three)
            }, cap_tol));
        }
        Scenario::ReceiverBottleneck => {
            if p.group_fraction.is_some() {
                let over = rows
                    .iter()
                    .filter(|r| r.metric == "capacity_max")
                    .filter(|r| r.value > 1.0 / (r.n - 1) as f64)
                    .count();
                push(Some(Check::new("capacity_above_bound", Relation::Within, over as f64, 0.0, 0.0)));
            } else {
                let wrong = count_where(rows, "exact_match", |v| v != 1.0)
                    + missing_points(config, rows, "exact_match");
                push(Some(Check::new("capacity_exactly_1_over_n", Relation::Within, wrong, 0.0, 0.0)));
                push(exponent_check(config, rows, "capacity_exponent", "capacity_max", |n| {
                    laws::law_receiver_bottleneck(n as usize)
                }, cap_tol));
            }
        }
        Scenario::Dumbbell => {
            let (b, f) = (p.bridges, p.fraction);
            push(exponent_check(config, rows, "crossing_capacity_exponent", "crossing_capacity_median", |n| {
                laws::law_topological_bottleneck(n as usize, b, f).unwrap_or(f64::NAN)
            }, cap_tol));
            let violations: f64 = rows
                .iter()
                .filter(|r| r.metric == "bound_violations")
                .map(|r| r.value)
                .sum::<f64>()
                + missing_points(config, rows, "bound_violations");
            push(Some(Check::new("crossing_bound_violations", Relation::Within, violations, 0.0, 0.0)));
        }
        Scenario::Cluster => {
            let g = p.g;
            // Inter-cluster flows carry the law. With a single cluster there
            // are none, so fall back to all flows.
            let inter = count_where(rows, "inter_capacity_median", |_| true);
            let metric = if inter > 0.0 && inter == count_where(rows, "capacity_median", |_| true) {
                "inter_capacity_median"
            } else {
                "capacity_median"
            };
            push(exponent_check(config, rows, "capacity_exponent", metric, |n| {
                laws::law_cluster(n as usize, g).unwrap_or(f64::NAN)
            }, cap_tol));
            push(exponent_check(config, rows, "leader_load_exponent", "max_leader_tx", |n| {
                1.0 / laws::law_cluster(n as usize, g).unwrap_or(f64::NAN)
            }, t.leader_load_exponent));
            if g == 0.0 {
                let wrong = count_where(rows, "paths_match_plain", |v| v != 1.0)
                    + missing_points(config, rows, "paths_match_plain");
                push(Some(Check::new("g0_paths_match_plain", Relation::Within, wrong, 0.0, 0.0)));
            }
        }
        Scenario::E2eErasure => {
            let hops = medians(rows, "hops");
            let thr = medians(rows, "throughput");
            let pts: Vec<(f64, f64)> = hops.iter().zip(&thr).map(|(h, v)| (h.1, v.1)).collect();
            let predicted = (-p.p).ln_1p();
            let tol = t.slope_rel * predicted.abs();
            let s = ScalingSeries {
                label: "throughput".into(),
                points: pts,
            };
            if config.n_list.len() >= 3 {
                push(Some(match fit_log_linear(&s) {
                    Ok(fit) => Check::new("log_linear_slope", Relation::Within, fit.exponent, predicted, tol).with_fit(&fit),
                    Err(_) => Check::new("log_linear_slope", Relation::Within, f64::NAN, predicted, tol),
                }));
            }
        }
        Scenario::HopByHop => {
            let att = values_by_n(rows, "steady_attempts");
            let suc = values_by_n(rows, "steady_successes");
            let hops = medians(rows, "hops");
            let target = 1.0 - p.p;
            let mut pooled = Vec::new();
            for (&n, a) in &att {
                let attempts: f64 = a.iter().sum();
                let successes: f64 = suc[&n].iter().sum();
                let theta = successes / attempts;
                let sigma = (theta * (1.0 - theta) / attempts).sqrt();
                let h = hops.iter().find(|x| x.0 == n).map_or(f64::NAN, |x| x.1);
                pooled.push((h, theta));
                push(Some(Check::new(
                    format!("steady_throughput_h{h}"),
                    Relation::Within,
                    theta,
                    target,
                    t.sigma * sigma,
                )));
            }
            let wrong = missing_points(config, rows, "steady_attempts");
            push(Some(Check::new("failed_points", Relation::Within, wrong, 0.0, 0.0)));
            let s = ScalingSeries {
                label: "steady_throughput".into(),
                points: pooled,
            };
            if config.n_list.len() >= 3 {
                push(Some(match fit_linear(&s) {
                    Ok(fit) => Check::new("slope_vs_hops", Relation::Within, fit.exponent, 0.0, t.slope_stderrs * fit.stderr)
                        .with_fit(&fit),
                    Err(_) => Check::new("slope_vs_hops", Relation::Within, f64::NAN, 0.0, 0.0),
                }));
            }
        }
        Scenario::CodedMulticast => {
            for (n, diffs) in values_by_n(rows, "abs_diff") {
                let worst = diffs.iter().copied().fold(0.0, f64::max);
                push(Some(Check::new(
                    format!("exact_vs_mc_n{n}"),
                    Relation::AtMost,
                    worst,
                    0.0,
                    t.mc_slots as f64,
                )));
            }
            let exact = medians(rows, "T_exact");
            if exact.len() >= 2 {
                let gap = exact[exact.len() - 1].1 - exact[0].1;
                push(Some(Check::new("completion_gap", Relation::AtMost, gap, 0.0, t.gap_slots as f64)));
            }
            if p.k_list.len() >= 2 {
                let mut ks = p.k_list.clone();
                ks.sort_unstable();
                for &n in &config.n_list {
                    let per: Vec<f64> = ks
                        .iter()
                        .map(|&k| {
                            medians(rows, &per_packet_metric(k))
                                .into_iter()
                                .find(|x| x.0 == n)
                                .map_or(f64::NAN, |x| x.1)
                        })
                        .collect();
                    let bad = per.windows(2).filter(|w| !(w[1] < w[0])).count();
                    push(Some(Check::new(
                        format!("per_packet_decreasing_n{n}"),
                        Relation::Within,
                        bad as f64,
                        0.0,
                        0.0,
                    )));
                }
            }
            let wrong = missing_points(config, rows, "T_exact");
            push(Some(Check::new("failed_points", Relation::Within, wrong, 0.0, 0.0)));
        }
        Scenario::BlockSynthesis => {
            let seq = medians(rows, "sequential_per_packet");
            let syn = medians(rows, "synthesized_per_packet");
            for ((n, s), (_, y)) in seq.iter().zip(&syn) {
                push(Some(Check::new(
                    format!("synthesized_per_packet_n{n}"),
                    Relation::AtMost,
                    *y,
                    *s,
                    0.0,
                )));
            }
            for (n, v) in values_by_n(rows, "receivers_delayed") {
                push(Some(Check::new(
                    format!("receivers_delayed_n{n}"),
                    Relation::AtLeast,
                    v.iter().copied().fold(f64::INFINITY, f64::min),
                    1.0,
                    0.0,
                )));
            }
            let wrong = missing_points(config, rows, "synthesized_total");
            push(Some(Check::new("failed_points", Relation::Within, wrong, 0.0, 0.0)));
        }
        Scenario::Mobility => {
            let thr = medians(rows, "throughput_per_node");
            if thr.len() >= 2 {
                let hi = thr.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
                let lo = thr.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
                push(Some(Check::new("throughput_ratio", Relation::AtMost, hi / lo, 0.0, t.throughput_ratio)));
                let delay = medians(rows, "mean_delay");
                let bad = delay.windows(2).filter(|w| !(w[1].1 > w[0].1)).count();
                push(Some(Check::new("delay_increasing", Relation::Within, bad as f64, 0.0, 0.0)));
            }
            let under = count_where(rows, "undersampled", |v| v != 0.0);
            push(Some(Check::new("undersampled_points", Relation::Within, under, 0.0, 0.0)));
            let wrong = missing_points(config, rows, "mean_delay");
            push(Some(Check::new("failed_points", Relation::Within, wrong, 0.0, 0.0)));
        }
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations() {
        assert!(Check::new("a", Relation::Within, 1.05, 1.0, 0.1).pass);
        assert!(!Check::new("a", Relation::Within, 1.2, 1.0, 0.1).pass);
        assert!(Check::new("a", Relation::AtMost, 1.0, 1.0, 0.0).pass);
        assert!(!Check::new("a", Relation::AtLeast, 0.5, 1.0, 0.0).pass);
        assert!(!Check::new("a", Relation::Within, f64::NAN, 1.0, 0.1).pass);
    }

    #[test]
    fn invalid_config_fails_before_running() {
        let cfg = ScenarioConfig::new(Scenario::Unicast2d, vec![], 1, 0);
        assert!(run_scenario(&cfg).is_err());
    }

    #[test]
    fn every_n_repeat_pair_once_per_metric() {
        let cfg = ScenarioConfig::new(Scenario::Unicast2d, vec![16, 32, 64], 3, 4);
        let res = run_scenario(&cfg).unwrap();
        let mut keys: Vec<_> = res
            .rows
            .iter()
            .filter(|r| r.metric == "capacity_median")
            .map(|r| (r.n, r.repeat))
            .collect();
        keys.dedup();
        assert_eq!(keys.len() + res.failures.len(), 9);
    }

    #[test]
    fn failing_point_does_not_stop_the_sweep() {
        // Two bridges cannot sit more than one radius apart at n = 4.
        let cfg = ScenarioConfig::new(Scenario::Dumbbell, vec![4, 40], 1, 1);
        let res = run_scenario(&cfg).unwrap();
        assert_eq!(res.failures.len(), 1);
        assert_eq!(res.failures[0].n, 4);
        assert!(res.rows.iter().any(|r| r.n == 40));
        assert!(!res.all_pass());
    }

    #[test]
    fn point_seeds_differ() {
        assert_ne!(point_seed(1, 64, 0), point_seed(1, 64, 1));
        assert_ne!(point_seed(1, 64, 0), point_seed(1, 128, 0));
        assert_eq!(point_seed(7, 64, 3), point_seed(7, 64, 3));
    }
}
