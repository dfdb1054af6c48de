//! Queueing model of the datacenter hosting the vMME pool.
//!
//! Each control message visits, in order, the ingress balancer, the shared
//! state database (with probability `db_probability`), one NFV instance
//! picked by the balancer, and the egress switch. Every station is a single
//! FIFO server.

mod calendar;
mod engine;
mod replay;

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use calendar::EventCalendar;
pub use engine::{least_loaded, simulate, EngineOutput, Hop, HopRecord, JobOutcome, StationStats};
pub use replay::{
    capacity_search, capacity_sweep, scaling_advisor, sweep_capacities, write_sweep_csv, Advice,
    CapacityEstimate, LoadReplay, SweepPoint, SweepSettings, ADVISOR_VALID_UP_TO,
};

use crate::signaling::{MessageType, ProcedureKind, SignalingTrace};
use crate::stochastic::RandomStream;
use crate::{Error, Result};

/// Instructions executed by an NFV instance per message type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstructionCounts {
    pub sr1: f64,
    pub sr2: f64,
    pub sr3: f64,
    pub srr1: f64,
    pub srr2: f64,
    pub srr3: f64,
    pub hr1: f64,
    pub hr2: f64,
}

impl Default for InstructionCounts {
    fn default() -> Self {
        Self {
            sr1: 1.45e6,
            sr2: 1.07e6,
            sr3: 1.06e6,
            srr1: 1.07e6,
            srr2: 1.07e6,
            srr3: 1.06e6,
            hr1: 1.07e6,
            hr2: 1.07e6,
        }
    }
}

impl InstructionCounts {
    pub fn get(&self, msg: MessageType) -> f64 {
        match msg {
            MessageType::Sr1 => self.sr1,
            MessageType::Sr2 => self.sr2,
            MessageType::Sr3 => self.sr3,
            MessageType::Srr1 => self.srr1,
            MessageType::Srr2 => self.srr2,
            MessageType::Srr3 => self.srr3,
            MessageType::Hr1 => self.hr1,
            MessageType::Hr2 => self.hr2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcessingProfile {
    /// Operations per second of one NFV instance.
    pub cpu_capacity: f64,
    pub instructions: InstructionCounts,
}

impl Default for ProcessingProfile {
    fn default() -> Self {
        Self {
            cpu_capacity: 11.38e9,
            instructions: InstructionCounts::default(),
        }
    }
}

impl ProcessingProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.cpu_capacity > 0.0 && self.cpu_capacity.is_finite()) {
            return Err(Error::param(
                "cpu_capacity",
                format!("must be finite and > 0, got {}", self.cpu_capacity),
            ));
        }
        for msg in MessageType::ALL {
            let n = self.instructions.get(msg);
            if !(n > 0.0 && n.is_finite()) {
                let field = format!("instructions.{}", msg.to_string().to_lowercase());
                return Err(Error::param(field, format!("must be finite and > 0, got {n}")));
            }
        }
        Ok(())
    }
}

/// NFV processing time of one message.
pub fn nfv_service_time(msg: MessageType, profile: &ProcessingProfile) -> f64 {
    profile.instructions.get(msg) / profile.cpu_capacity
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceModel {
    /// Service time equals its mean.
    #[default]
    Deterministic,
    /// Exponential service time with the same mean.
    Exponential,
}

impl ServiceModel {
    pub fn sample(self, mean: f64, stream: &mut RandomStream) -> f64 {
        match self {
            ServiceModel::Deterministic => mean,
            ServiceModel::Exponential => -mean * stream.open_uniform().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueueNetworkConfig {
    /// Packets per second.
    pub balancer_rate: f64,
    /// Transactions per second.
    pub db_rate: f64,
    pub db_probability: f64,
    /// Packets per second.
    pub egress_rate: f64,
    pub instances: usize,
    pub service_model: ServiceModel,
    pub nfv_profile: ProcessingProfile,
}

impl Default for QueueNetworkConfig {
    fn default() -> Self {
        Self {
            balancer_rate: 120_000.0,
            db_rate: 100_000.0,
            db_probability: 1.0,
            egress_rate: 5e6,
            instances: 1,
            service_model: ServiceModel::Deterministic,
            nfv_profile: ProcessingProfile::default(),
        }
    }
}

impl QueueNetworkConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, rate) in [
            ("balancer_rate", self.balancer_rate),
            ("db_rate", self.db_rate),
            ("egress_rate", self.egress_rate),
        ] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(Error::param(field, format!("must be finite and > 0, got {rate}")));
            }
        }
        if !(0.0..=1.0).contains(&self.db_probability) {
            return Err(Error::param(
                "db_probability",
                format!("must lie in [0, 1], got {}", self.db_probability),
            ));
        }
        if self.instances == 0 {
            return Err(Error::param("instances", "must be >= 1"));
        }
        self.nfv_profile.validate().map_err(|e| e.within("nfv_profile"))
    }

    pub fn with_instances(&self, instances: usize) -> Self {
        Self { instances, ..*self }
    }

    pub fn station_names(&self) -> Vec<String> {
        let mut names = vec!["balancer".to_string(), "db".to_string()];
        names.extend((0..self.instances).map(|i| format!("nfv{i}")));
        names.push("egress".to_string());
        names
    }

    fn egress_station(&self) -> usize {
        2 + self.instances
    }
}

const BALANCER: usize = 0;
const DATABASE: usize = 1;
const FIRST_NFV: usize = 2;

/// Summary of a set of delays. Percentiles use the nearest-rank rule.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DelaySummary {
    pub count: u64,
    pub mean: f64,
    pub p95: f64,
    pub p99: f64,
    pub max: f64,
}

impl DelaySummary {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let rank = |p: f64| values[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Self {
            count: n as u64,
            mean: values.iter().sum::<f64>() / n as f64,
            p95: rank(0.95),
            p99: rank(0.99),
            max: values[n - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationUtilization {
    pub name: String,
    pub served: u64,
    pub busy_s: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayStats {
    /// Per-message sojourn, in [`MessageType::ALL`] order.
    pub per_type: Vec<(MessageType, DelaySummary)>,
    pub overall: DelaySummary,
    /// Sum of the sojourns of a procedure's messages.
    pub per_procedure: Vec<(ProcedureKind, DelaySummary)>,
    pub stations: Vec<StationUtilization>,
    /// First arrival to last departure.
    pub span_s: f64,
}

impl DelayStats {
    pub fn write_delays_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "msg_type,count,mean_s,p95_s,p99_s,max_s")?;
        let rows = self
            .per_type
            .iter()
            .map(|(m, s)| (m.to_string(), s))
            .chain(std::iter::once(("overall".to_string(), &self.overall)));
        for (name, s) in rows {
            writeln!(
                out,
                "{name},{},{:.9e},{:.9e},{:.9e},{:.9e}",
                s.count, s.mean, s.p95, s.p99, s.max
            )?;
        }
        Ok(())
    }

    pub fn write_utilization_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "station,served,busy_s,utilization")?;
        for s in &self.stations {
            writeln!(out, "{},{},{:.9},{:.6}", s.name, s.served, s.busy_s, s.utilization)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageRecord {
    pub arrival: f64,
    pub departure: f64,
    pub msg: MessageType,
    pub ue_id: u32,
    pub procedure_id: u64,
    /// 0-based NFV instance.
    pub instance: usize,
    pub visited_db: bool,
    pub hops: Vec<HopRecord>,
}

impl MessageRecord {
    pub fn sojourn(&self) -> f64 {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub stats: DelayStats,
    pub records: Vec<MessageRecord>,
}

/// Push a trace through the chain.
pub fn run(trace: &SignalingTrace, cfg: &QueueNetworkConfig, stream: &mut RandomStream) -> Result<RunOutput> {
    run_with(trace, cfg, stream, false)
}

/// As [`run`], also recording every hop of every message.
pub fn run_detailed(
    trace: &SignalingTrace,
    cfg: &QueueNetworkConfig,
    stream: &mut RandomStream,
) -> Result<RunOutput> {
    run_with(trace, cfg, stream, true)
}

fn run_with(
    trace: &SignalingTrace,
    cfg: &QueueNetworkConfig,
    stream: &mut RandomStream,
    record_hops: bool,
) -> Result<RunOutput> {
    cfg.validate()?;
    trace.check_ordered()?;
    let messages = &trace.messages;
    let arrivals: Vec<f64> = messages.iter().map(|m| m.time).collect();
    let nfv_times: Vec<f64> = MessageType::ALL
        .iter()
        .map(|&m| nfv_service_time(m, &cfg.nfv_profile))
        .collect();
    let model = cfg.service_model;
    let nfv = FIRST_NFV..FIRST_NFV + cfg.instances;
    let egress = cfg.egress_station();
    let mut choices: Vec<(usize, bool)> = Vec::with_capacity(messages.len());

    let out = simulate(egress + 1, &arrivals, record_hops, |i, _, loads| {
        let msg = messages[i].msg;
        let mut hops = Vec::with_capacity(4);
        hops.push(Hop {
            station: BALANCER,
            service: model.sample(1.0 / cfg.balancer_rate, stream),
        });
        let instance = least_loaded(&loads[nfv.clone()]);
        let visit_db = stream.uniform() < cfg.db_probability;
        if visit_db {
            hops.push(Hop {
                station: DATABASE,
                service: model.sample(1.0 / cfg.db_rate, stream),
            });
        }
        let kind_index = MessageType::ALL.iter().position(|&m| m == msg).expect("known type");
        hops.push(Hop {
            station: FIRST_NFV + instance,
            service: model.sample(nfv_times[kind_index], stream),
        });
        hops.push(Hop {
            station: egress,
            service: model.sample(1.0 / cfg.egress_rate, stream),
        });
        choices.push((instance, visit_db));
        hops
    })?;

    let records: Vec<MessageRecord> = out
        .jobs
        .iter()
        .zip(messages)
        .zip(&choices)
        .map(|((job, m), &(instance, visited_db))| MessageRecord {
            arrival: job.arrival,
            departure: job.departure,
            msg: m.msg,
            ue_id: m.ue_id,
            procedure_id: m.procedure_id,
            instance,
            visited_db,
            hops: job.hops.clone(),
        })
        .collect();
    let stats = summarize(&records, &out, cfg);
    Ok(RunOutput { stats, records })
}

fn summarize(records: &[MessageRecord], out: &EngineOutput, cfg: &QueueNetworkConfig) -> DelayStats {
    let mut by_type: Vec<Vec<f64>> = vec![Vec::new(); MessageType::ALL.len()];
    let mut procedures: HashMap<u64, (ProcedureKind, f64, u8)> = HashMap::new();
    for r in records {
        let idx = MessageType::ALL.iter().position(|&m| m == r.msg).expect("known type");
        by_type[idx].push(r.sojourn());
        let entry = procedures
            .entry(r.procedure_id)
            .or_insert((r.msg.kind(), 0.0, 0));
        entry.1 += r.sojourn();
        entry.2 += 1;
    }
    let overall = DelaySummary::from_values(records.iter().map(MessageRecord::sojourn).collect());
    let per_type = MessageType::ALL
        .iter()
        .zip(by_type)
        .map(|(&m, v)| (m, DelaySummary::from_values(v)))
        .collect();
    let mut proc_sums: Vec<(u64, ProcedureKind, f64)> = procedures
        .into_iter()
        .filter(|(_, (kind, _, n))| *n == kind.message_count())
        .map(|(id, (kind, sum, _))| (id, kind, sum))
        .collect();
    proc_sums.sort_by_key(|p| p.0);
    let per_procedure = ProcedureKind::ALL
        .iter()
        .map(|&k| {
            let v = proc_sums.iter().filter(|p| p.1 == k).map(|p| p.2).collect();
            (k, DelaySummary::from_values(v))
        })
        .collect();
    let span = out.span();
    let stations = cfg
        .station_names()
        .into_iter()
        .zip(&out.stations)
        .map(|(name, s)| StationUtilization {
            name,
            served: s.served,
            busy_s: s.busy_time,
            utilization: if span > 0.0 { s.busy_time / span } else { 0.0 },
        })
        .collect();
    DelayStats {
        per_type,
        overall,
        per_procedure,
        stations,
        span_s: span,
    }
}
