//! Load scaling by trace replay, capacity sweeps and the instance-count
//! advisor.
//!
//! A desk-scale trace stands in for a larger population: copy `c` of it is
//! cyclically shifted by a random offset over the trace horizon, and the
//! copies are superposed. A fractional multiplier keeps each procedure of the
//! last copy with the fractional probability. Traces built for a larger
//! multiplier contain those built for a smaller one.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use super::{run, QueueNetworkConfig};
use crate::signaling::{sort_messages, ControlMessage, MessageType, SignalingTrace};
use crate::stochastic::RandomStream;
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct BaseProcedure {
    start: f64,
    ue_id: u32,
    messages: Vec<(MessageType, f64)>,
}

#[derive(Debug, Clone)]
pub struct LoadReplay {
    procedures: Vec<BaseProcedure>,
    base_users: usize,
    horizon: f64,
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl LoadReplay {
    /// `trace` must cover `base_users` users over `[0, horizon)`.
    pub fn new(trace: &SignalingTrace, base_users: usize, horizon: f64, seed: u64) -> Result<Self> {
        if base_users == 0 {
            return Err(Error::param("base_users", "must be >= 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", format!("must be finite and > 0, got {horizon}")));
        }
        let mut grouped: BTreeMap<u64, BaseProcedure> = BTreeMap::new();
        for m in &trace.messages {
            let p = grouped.entry(m.procedure_id).or_insert_with(|| BaseProcedure {
                start: m.time,
                ue_id: m.ue_id,
                messages: Vec::new(),
            });
            p.start = p.start.min(m.time);
            p.messages.push((m.msg, m.time));
        }
        let mut procedures: Vec<BaseProcedure> = grouped
            .into_values()
            .map(|mut p| {
                for (_, t) in &mut p.messages {
                    *t -= p.start;
                }
                p.start = p.start.rem_euclid(horizon);
                p
            })
            .collect();
        procedures.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.ue_id.cmp(&b.ue_id)));
        Ok(Self {
            procedures,
            base_users,
            horizon,
            seed,
        })
    }

    pub fn base_users(&self) -> usize {
        self.base_users
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Procedures per second in the base trace.
    pub fn base_rate(&self) -> f64 {
        self.procedures.len() as f64 / self.horizon
    }

    fn offset(&self, copy: usize) -> f64 {
        RandomStream::substream(self.seed, copy as u64).uniform() * self.horizon
    }

    fn keep(&self, copy: usize, index: usize, probability: f64) -> bool {
        if probability >= 1.0 {
            return true;
        }
        let h = splitmix64(self.seed ^ splitmix64(copy as u64) ^ splitmix64(!(index as u64)));
        ((h >> 11) as f64 / (1u64 << 53) as f64) < probability
    }

    /// Replay at `multiplier` times the base load, keeping procedures whose
    /// shifted start falls in `[0, window)`. Returns the trace and the number
    /// of procedures it holds.
    pub fn build(&self, multiplier: f64, window: f64) -> Result<(SignalingTrace, usize)> {
        if !(multiplier >= 0.0 && multiplier.is_finite()) {
            return Err(Error::param("multiplier", format!("must be finite and >= 0, got {multiplier}")));
        }
        if !(window > 0.0 && window <= self.horizon) {
            return Err(Error::param(
                "window_s",
                format!("must lie in (0, {}], got {window}", self.horizon),
            ));
        }
        let n = self.procedures.len();
        let full = multiplier.floor() as usize;
        let fraction = multiplier - full as f64;
        let copies = if fraction > 0.0 { full + 1 } else { full };
        let starts_before = |t: f64| self.procedures.partition_point(|p| p.start < t);
        let mut messages = Vec::new();
        let mut kept = 0;
        for copy in 0..copies {
            let probability = if copy < full { 1.0 } else { fraction };
            let o = self.offset(copy);
            let h = self.horizon;
            // Start `s` maps to `s + o` below `h - o`, and to `s + o - h` above.
            let ranges = [
                (0, starts_before((window - o).min(h - o).max(0.0))),
                (starts_before(h - o), starts_before((h - o + window).min(h))),
            ];
            for (lo, hi) in ranges {
                for index in lo..hi {
                    if !self.keep(copy, index, probability) {
                        continue;
                    }
                    let p = &self.procedures[index];
                    let mut start = p.start + o;
                    if start >= h {
                        start -= h;
                    }
                    kept += 1;
                    let procedure_id = (copy * n + index) as u64;
                    let ue_id = p
                        .ue_id
                        .wrapping_add((copy * self.base_users) as u32);
                    messages.extend(p.messages.iter().map(|&(msg, dt)| ControlMessage {
                        time: start + dt,
                        ue_id,
                        msg,
                        procedure_id,
                    }));
                }
            }
        }
        sort_messages(&mut messages);
        Ok((SignalingTrace { messages }, kept))
    }

    pub fn build_for_users(&self, users: usize, window: f64) -> Result<(SignalingTrace, usize)> {
        self.build(users as f64 / self.base_users as f64, window)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub user_counts: Vec<usize>,
    pub instances: Vec<usize>,
    pub budget_s: f64,
    pub window_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub users: usize,
    pub m: usize,
    pub procedures_per_s: f64,
    pub mean_delay_s: f64,
}

impl SweepPoint {
    pub fn feasible(&self, budget_s: f64) -> bool {
        self.mean_delay_s <= budget_s
    }
}

/// Mean delay for every `(users, m)` pair, users-major order.
pub fn capacity_sweep(
    replay: &LoadReplay,
    cfg: &QueueNetworkConfig,
    settings: &SweepSettings,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    if settings.user_counts.is_empty() || settings.instances.is_empty() {
        return Err(Error::param("sweep", "user_counts and instances must be nonempty"));
    }
    if !(settings.budget_s > 0.0) {
        return Err(Error::param("budget_s", format!("must be > 0, got {}", settings.budget_s)));
    }
    if settings.instances.contains(&0) {
        return Err(Error::param("sweep.instances", "must all be >= 1"));
    }
    let traces: Vec<(SignalingTrace, usize)> = settings
        .user_counts
        .par_iter()
        .map(|&u| replay.build_for_users(u, settings.window_s))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..settings.user_counts.len())
        .flat_map(|u| (0..settings.instances.len()).map(move |m| (u, m)))
        .collect();
    jobs.par_iter()
        .enumerate()
        .map(|(k, &(ui, mi))| {
            let (trace, kept) = &traces[ui];
            let m = settings.instances[mi];
            let mut stream = RandomStream::substream(seed, k as u64);
            let out = run(trace, &cfg.with_instances(m), &mut stream)?;
            Ok(SweepPoint {
                users: settings.user_counts[ui],
                m,
                procedures_per_s: *kept as f64 / settings.window_s,
                mean_delay_s: out.stats.overall.mean,
            })
        })
        .collect()
}

/// Largest tested user count meeting the budget, per instance count.
pub fn sweep_capacities(points: &[SweepPoint], budget_s: f64) -> Vec<(usize, Option<SweepPoint>)> {
    let mut by_m: BTreeMap<usize, Option<SweepPoint>> = BTreeMap::new();
    for p in points {
        let best = by_m.entry(p.m).or_default();
        if p.feasible(budget_s) && best.is_none_or(|b| p.users > b.users) {
            *best = Some(*p);
        }
    }
    by_m.into_iter().collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "users,m,procedures_per_s,mean_delay_s")?;
    for p in points {
        writeln!(out, "{},{},{:.6},{:.9e}", p.users, p.m, p.procedures_per_s, p.mean_delay_s)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub m: usize,
    pub multiplier: f64,
    pub users: f64,
    pub procedures_per_s: f64,
    pub mean_delay_s: f64,
}

/// Largest load multiplier whose mean delay stays within `budget_s`, found by
/// doubling then bisection to a relative width of `rel_tol`.
pub fn capacity_search(
    replay: &LoadReplay,
    cfg: &QueueNetworkConfig,
    budget_s: f64,
    window_s: f64,
    rel_tol: f64,
    seed: u64,
) -> Result<CapacityEstimate> {
    cfg.validate()?;
    if !(budget_s > 0.0 && budget_s.is_finite()) {
        return Err(Error::param("budget_s", format!("must be finite and > 0, got {budget_s}")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::param("rel_tol", "must be > 0"));
    }
    let evaluate = |k: f64| -> Result<(f64, f64)> {
        let (trace, kept) = replay.build(k, window_s)?;
        let mut stream = RandomStream::substream(seed, 0);
        let out = run(&trace, cfg, &mut stream)?;
        Ok((out.stats.overall.mean, kept as f64 / window_s))
    };
    let mut lo = (0.0, (0.0, 0.0));
    let mut hi = 1.0;
    loop {
        let r = evaluate(hi)?;
        if r.0 > budget_s {
            break;
        }
        lo = (hi, r);
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Model("delay budget never exceeded".into()));
        }
    }
    while hi - lo.0 > rel_tol * hi {
        let mid = 0.5 * (lo.0 + hi);
        let r = evaluate(mid)?;
        if r.0 <= budget_s {
            lo = (mid, r);
        } else {
            hi = mid;
        }
    }
    let (multiplier, (mean_delay_s, procedures_per_s)) = lo;
    Ok(CapacityEstimate {
        m: cfg.instances,
        multiplier,
        users: multiplier * replay.base_users() as f64,
        procedures_per_s,
        mean_delay_s,
    })
}

/// Users up to which the advisor fit was calibrated.
pub const ADVISOR_VALID_UP_TO: f64 = 1.2e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Advice {
    pub instances: u64,
    pub within_fit_range: bool,
}

/// Instances needed for `users` users: `ceil(2.5e-6 u + 0.0636)`, at least 1.
pub fn scaling_advisor(users: u64) -> Advice {
    let u = users as f64;
    let m = (2.50e-6 * u + 6.36e-2).ceil().max(1.0) as u64;
    Advice {
        instances: m,
        within_fit_range: u <= ADVISOR_VALID_UP_TO,
    }
}
