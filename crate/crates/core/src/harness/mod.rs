//! Command implementations behind the `vmme` binary.
//!
//! Every command is a pure function of the configuration (seed included):
//! files it writes are byte-identical across runs.

mod config;

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{AnalyticsConfig, ExperimentConfig, SweepConfig};

use crate::analytics::{derive_inputs, predict, DerivedInputs};
use crate::mobility::{init_user, trajectory_crossings, CrossingEvent};
use crate::qnet::{
    capacity_sweep, run, scaling_advisor, sweep_capacities, write_sweep_csv, LoadReplay,
    SweepSettings,
};
use crate::signaling::{build_trace, empirical_rates, ProcedureKind, ProcedureRates, SignalingTrace};
use crate::stochastic::{Distribution, RandomStream};
use crate::traffic::{SessionTrace, TrafficModel};
use crate::{Error, Result};

/// Separate seed for a consumer other than the per-UE streams.
fn derived_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

const ANALYTICS_TAG: u64 = 1;
const QNET_TAG: u64 = 2;
const REPLAY_TAG: u64 = 3;

/// Activity timelines and cell crossings of every user.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub sessions: Vec<SessionTrace>,
    pub crossings: Vec<Vec<CrossingEvent>>,
}

/// UE `i` draws traffic from substream `2i` and mobility from `2i + 1`.
pub fn generate_population(cfg: &ExperimentConfig) -> Result<Population> {
    cfg.validate()?;
    let traffic = TrafficModel::new(&cfg.traffic, cfg.link)?;
    let speed = Distribution::new(cfg.speed.clone())?;
    let per_ue: Vec<(SessionTrace, Vec<CrossingEvent>)> = (0..cfg.num_users)
        .into_par_iter()
        .map(|i| {
            let ue = i as u32;
            let mut ts = RandomStream::substream(cfg.seed, 2 * i as u64);
            let sessions = traffic.generate_user_timeline(ue, cfg.sim_duration_s, &cfg.mix, &mut ts)?;
            let mut ms = RandomStream::substream(cfg.seed, 2 * i as u64 + 1);
            let kin = init_user(&cfg.grid, &speed, &mut ms);
            let crossings = trajectory_crossings(&kin, &cfg.grid, ue, 0.0, cfg.sim_duration_s);
            Ok((sessions, crossings))
        })
        .collect::<Result<_>>()?;
    let (sessions, crossings) = per_ue.into_iter().unzip();
    Ok(Population {
        sessions,
        crossings,
    })
}

pub fn population_trace(cfg: &ExperimentConfig, pop: &Population, inactivity_timer: f64) -> Result<SignalingTrace> {
    build_trace(&pop.sessions, &pop.crossings, inactivity_timer, &cfg.signaling)
}

pub fn derive_rate_inputs(cfg: &ExperimentConfig) -> Result<DerivedInputs> {
    derive_inputs(
        &cfg.mix,
        &cfg.traffic,
        cfg.link,
        &cfg.grid,
        &cfg.speed,
        cfg.inactivity_timer_s,
        cfg.analytics.samples,
        derived_seed(cfg.seed, ANALYTICS_TAG),
    )
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn procedure_counts(trace: &SignalingTrace) -> [usize; 3] {
    let mut counts = [0; 3];
    for (_, p) in trace.procedures() {
        counts[ProcedureKind::ALL.iter().position(|&k| k == p.kind).expect("kind")] += 1;
    }
    counts
}

fn write_rates_csv(path: &Path, rows: &[(f64, ProcedureRates)]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "T_I_s,lambda_sr,lambda_srr,lambda_hr")?;
        for (t, r) in rows {
            writeln!(w, "{t},{:.9e},{:.9e},{:.9e}", r.sr, r.srr, r.hr)?;
        }
        Ok(())
    })
}

/// Generate the population and write `trace.csv`.
pub fn cmd_generate_trace(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let pop = generate_population(cfg)?;
    let trace = population_trace(cfg, &pop, cfg.inactivity_timer_s)?;
    ensure_dir(out_dir)?;
    let path = out_dir.join("trace.csv");
    write_file(&path, |w| trace.write_csv(w))?;
    let counts = procedure_counts(&trace);
    let rates = empirical_rates(&trace, cfg.num_users, cfg.sim_duration_s)?;
    let mut report = String::new();
    writeln!(report, "wrote {} ({} messages)", path.display(), trace.len()).unwrap();
    for (kind, (n, r)) in ProcedureKind::ALL
        .iter()
        .zip(counts.iter().zip([rates.sr, rates.srr, rates.hr]))
    {
        writeln!(report, "{kind}: {n} procedures, {r:.6e} per user per second").unwrap();
    }
    writeln!(report, "total: {:.6e} procedures per user per second", rates.total()).unwrap();
    Ok(report)
}

/// Analytic rates over the timer sweep, optionally with simulated rates and
/// their RMSE.
pub fn cmd_predict_rates(cfg: &ExperimentConfig, out_dir: &Path, empirical: bool) -> Result<String> {
    if cfg.timer_sweep_s.is_empty() {
        return Err(Error::param("timer_sweep_s", "must be nonempty"));
    }
    let derived = derive_rate_inputs(cfg)?;
    let analytic: Vec<(f64, ProcedureRates)> = cfg
        .timer_sweep_s
        .iter()
        .map(|&t| Ok((t, predict(&derived.inputs.with_timer(t))?)))
        .collect::<Result<_>>()?;
    ensure_dir(out_dir)?;
    write_rates_csv(&out_dir.join("rates.csv"), &analytic)?;
    let i = &derived.inputs;
    let mut report = String::new();
    writeln!(report, "sessions sampled: {}", derived.sessions).unwrap();
    writeln!(report, "lambda_s = {:.6e} ± {:.1e} 1/s", i.lambda_s, derived.lambda_s_se).unwrap();
    writeln!(report, "n_bar = {:.4} ± {:.4}", i.n_bar, derived.n_bar_se).unwrap();
    writeln!(report, "t_on = {:.4} ± {:.4} s", i.t_on, derived.t_on_se).unwrap();
    writeln!(report, "sessions deferred = {:.4}", derived.deferred_fraction).unwrap();
    writeln!(report, "ccr = {:.6e} 1/s", i.ccr).unwrap();
    writeln!(report, "wrote {}", out_dir.join("rates.csv").display()).unwrap();
    if empirical {
        let pop = generate_population(cfg)?;
        let simulated: Vec<(f64, ProcedureRates)> = cfg
            .timer_sweep_s
            .iter()
            .map(|&t| {
                let trace = population_trace(cfg, &pop, t)?;
                Ok((t, empirical_rates(&trace, cfg.num_users, cfg.sim_duration_s)?))
            })
            .collect::<Result<_>>()?;
        write_rates_csv(&out_dir.join("rates_empirical.csv"), &simulated)?;
        let rmse = |f: fn(&ProcedureRates) -> f64| {
            let sq: f64 = analytic
                .iter()
                .zip(&simulated)
                .map(|((_, a), (_, s))| (f(a) - f(s)).powi(2))
                .sum();
            (sq / analytic.len() as f64).sqrt()
        };
        writeln!(report, "wrote {}", out_dir.join("rates_empirical.csv").display()).unwrap();
        writeln!(
            report,
            "rmse: sr {:.3e}, srr {:.3e}, hr {:.3e}",
            rmse(|r| r.sr),
            rmse(|r| r.srr),
            rmse(|r| r.hr)
        )
        .unwrap();
    }
    Ok(report)
}

/// Run the queue network on a trace file.
pub fn cmd_simulate(cfg: &ExperimentConfig, trace_path: &Path, out_dir: &Path) -> Result<String> {
    let file = File::open(trace_path).map_err(|e| Error::io(trace_path, e))?;
    let trace = SignalingTrace::read_csv(BufReader::new(file))?;
    let mut stream = RandomStream::new(derived_seed(cfg.seed, QNET_TAG));
    let out = run(&trace, &cfg.qnet, &mut stream)?;
    ensure_dir(out_dir)?;
    write_file(&out_dir.join("delays.csv"), |w| out.stats.write_delays_csv(w))?;
    write_file(&out_dir.join("utilization.csv"), |w| out.stats.write_utilization_csv(w))?;
    let s = &out.stats.overall;
    let mut report = String::new();
    writeln!(
        report,
        "{} messages, mean {:.6e} s, p95 {:.6e} s, p99 {:.6e} s, max {:.6e} s",
        s.count, s.mean, s.p95, s.p99, s.max
    )
    .unwrap();
    for (kind, p) in &out.stats.per_procedure {
        if p.count > 0 {
            writeln!(report, "{kind} procedure delay: mean {:.6e} s over {}", p.mean, p.count).unwrap();
        }
    }
    for st in &out.stats.stations {
        writeln!(report, "{}: utilization {:.4}", st.name, st.utilization).unwrap();
    }
    writeln!(report, "wrote {}", out_dir.join("delays.csv").display()).unwrap();
    Ok(report)
}

/// Ordinary least-squares fit `y = a x + b`.
pub fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Users at which the published fit was quoted.
pub const REFERENCE_POPULATIONS: [u64; 3] = [374_740, 773_210, 1_173_900];

/// Replay the base trace at each configured population and instance count.
pub fn cmd_capacity_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<String> {
    let pop = generate_population(cfg)?;
    let base = population_trace(cfg, &pop, cfg.inactivity_timer_s)?;
    let replay = LoadReplay::new(
        &base,
        cfg.num_users,
        cfg.sim_duration_s,
        derived_seed(cfg.seed, REPLAY_TAG),
    )?;
    let budget_s = cfg.sweep.budget_ms * 1e-3;
    let settings = SweepSettings {
        user_counts: cfg.sweep.user_counts.clone(),
        instances: cfg.sweep.instances.clone(),
        budget_s,
        window_s: cfg.sweep.window_s,
    };
    let points = capacity_sweep(&replay, &cfg.qnet, &settings, derived_seed(cfg.seed, QNET_TAG))?;
    ensure_dir(out_dir)?;
    let path = out_dir.join("sweep.csv");
    write_file(&path, |w| write_sweep_csv(&points, w))?;

    let mut report = String::new();
    writeln!(report, "wrote {}", path.display()).unwrap();
    let capacities = sweep_capacities(&points, budget_s);
    let mut fit_points = Vec::new();
    for (m, cap) in &capacities {
        match cap {
            Some(p) => {
                writeln!(
                    report,
                    "m={m}: capacity {} users ({:.1} procedures/s, mean delay {:.3e} s)",
                    p.users, p.procedures_per_s, p.mean_delay_s
                )
                .unwrap();
                fit_points.push((p.users as f64, *m as f64));
            }
            None => {
                writeln!(report, "m={m}: no tested population meets the budget").unwrap();
            }
        }
    }
    match least_squares(&fit_points) {
        Some((a, b)) => writeln!(report, "fit over measured capacities: m = {a:.3e} * users + {b:.4}").unwrap(),
        None => writeln!(report, "fit over measured capacities: not enough points").unwrap(),
    }
    let populations = fit_points
        .iter()
        .map(|p| p.0 as u64)
        .chain(REFERENCE_POPULATIONS);
    for u in populations {
        writeln!(report, "{}", advise_line(u)).unwrap();
    }
    Ok(report)
}

fn advise_line(users: u64) -> String {
    let a = scaling_advisor(users);
    let note = if a.within_fit_range { "" } else { " (outside the fitted range)" };
    format!("advisor({users}) = {}{note}", a.instances)
}

pub fn cmd_advise(users: u64) -> String {
    advise_line(users) + "\n"
}

/// Output directory: the override if given, else the configured one.
pub fn output_dir(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf)
}
