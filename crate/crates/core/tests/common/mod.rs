#![allow(dead_code)]

use std::collections::BTreeMap;

use vmme::mobility::CrossingEvent;
use vmme::signaling::{MessageType, ProcedureKind, SignalingTrace};
use vmme::stochastic::RandomStream;
use vmme::traffic::{ActivityPeriod, Application, SessionTrace};

pub const HORIZON: f64 = 1000.0;

/// Random activity timeline and crossings for one UE. Start/end instants are
/// sometimes reused as crossing times to exercise ties. With
/// `positive_gaps`, consecutive periods never touch.
pub fn random_ue(ue: u32, stream: &mut RandomStream, positive_gaps: bool) -> (SessionTrace, Vec<CrossingEvent>) {
    let n = stream.index(9);
    let mut periods = Vec::with_capacity(n);
    let mut t = 200.0 * stream.uniform();
    for _ in 0..n {
        if t >= HORIZON {
            break;
        }
        let len = 0.5 + 60.0 * stream.uniform();
        let end = (t + len).min(HORIZON);
        periods.push(ActivityPeriod {
            start: t,
            end,
            app: Application::Web,
            session: 0,
        });
        let gap = match stream.index(4) {
            0 if !positive_gaps => 0.0,
            0 | 1 => 30.0 * stream.uniform() + 1e-3,
            _ => 150.0 * stream.uniform() + 1e-3,
        };
        t = end + gap;
    }
    let mut times: Vec<f64> = (0..stream.index(12)).map(|_| HORIZON * stream.uniform()).collect();
    for p in &periods {
        if stream.index(5) == 0 {
            times.push(p.start);
        }
        if stream.index(5) == 0 {
            times.push(p.end);
        }
    }
    times.retain(|&t| t < HORIZON);
    times.sort_by(f64::total_cmp);
    let crossings = times
        .into_iter()
        .map(|time| CrossingEvent {
            time,
            ue_id: ue,
            from_cell: 0,
            to_cell: 1,
        })
        .collect();
    let starts = periods.first().map(|p| vec![p.start]).unwrap_or_default();
    (
        SessionTrace {
            ue_id: ue,
            horizon: HORIZON,
            periods,
            session_starts: starts,
        },
        crossings,
    )
}

/// Procedures of one UE in id order: `(kind, start)`.
pub fn per_ue_procedures(trace: &SignalingTrace) -> BTreeMap<u32, Vec<(ProcedureKind, f64)>> {
    let mut out: BTreeMap<u32, Vec<(ProcedureKind, f64)>> = BTreeMap::new();
    for (_, p) in trace.procedures() {
        out.entry(p.ue_id).or_default().push((p.kind, p.start));
    }
    out
}

/// Oracle for the connection state: active at `t` when some period started
/// at or before `t` and the latest such period ended no more than `t_i`
/// before `t`.
pub fn active_at(periods: &[ActivityPeriod], t: f64, t_i: f64) -> bool {
    periods
        .iter()
        .rev()
        .find(|p| p.start <= t)
        .is_some_and(|p| t <= p.end + t_i)
}

/// Every message belongs to a complete procedure with the right spacing.
pub fn check_messages(trace: &SignalingTrace, gap: f64) -> Result<(), String> {
    let mut by_id: BTreeMap<u64, Vec<(MessageType, f64)>> = BTreeMap::new();
    for m in &trace.messages {
        by_id.entry(m.procedure_id).or_default().push((m.msg, m.time));
    }
    for (id, msgs) in by_id {
        let kind = msgs[0].0.kind();
        if msgs.len() != kind.message_count() as usize {
            return Err(format!("procedure {id} has {} messages", msgs.len()));
        }
        for (i, (m, t)) in msgs.iter().enumerate() {
            if m.kind() != kind || m.index() as usize != i + 1 {
                return Err(format!("procedure {id} message {i} is {m}"));
            }
            if (t - msgs[0].1 - gap * i as f64).abs() > 1e-9 {
                return Err(format!("procedure {id} message {m} at {t}"));
            }
        }
    }
    Ok(())
}

/// Procedure sequence of one UE matches `(SR HR* SRR)* (SR HR*)?`, every HR
/// happens while active, every crossing while active produces an HR, and the
/// SR/SRR surplus is 1 exactly when the UE is active at the horizon.
pub fn check_ue(
    sessions: &SessionTrace,
    crossings: &[CrossingEvent],
    t_i: f64,
    procs: &[(ProcedureKind, f64)],
) -> Result<(), String> {
    let mut active = false;
    for &(kind, _) in procs {
        active = match (active, kind) {
            (false, ProcedureKind::Sr) => true,
            (true, ProcedureKind::Hr) => true,
            (true, ProcedureKind::Srr) => false,
            _ => return Err(format!("{kind} out of order in {procs:?}")),
        };
    }
    let hr: Vec<f64> = procs.iter().filter(|p| p.0 == ProcedureKind::Hr).map(|p| p.1).collect();
    for &t in &hr {
        if !active_at(&sessions.periods, t, t_i) {
            return Err(format!("HR at {t} while idle"));
        }
    }
    let expected: Vec<f64> = crossings
        .iter()
        .map(|c| c.time)
        .filter(|&t| active_at(&sessions.periods, t, t_i))
        .collect();
    if expected != hr {
        return Err(format!("HR times {hr:?}, expected {expected:?}"));
    }
    let periods = &sessions.periods;
    let want_sr: Vec<f64> = periods
        .iter()
        .enumerate()
        .filter(|(i, p)| *i == 0 || periods[i - 1].end + t_i < p.start)
        .map(|(_, p)| p.start)
        .collect();
    let want_srr: Vec<f64> = periods
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.end + t_i))
        .filter(|&(i, d)| d < sessions.horizon && periods.get(i + 1).is_none_or(|n| d < n.start))
        .map(|(_, d)| d)
        .collect();
    let times = |k: ProcedureKind| -> Vec<f64> { procs.iter().filter(|p| p.0 == k).map(|p| p.1).collect() };
    if times(ProcedureKind::Sr) != want_sr || times(ProcedureKind::Srr) != want_srr {
        return Err(format!("SR/SRR instants {procs:?}, expected SR {want_sr:?} SRR {want_srr:?}"));
    }
    let sr = procs.iter().filter(|p| p.0 == ProcedureKind::Sr).count();
    let srr = procs.iter().filter(|p| p.0 == ProcedureKind::Srr).count();
    let last_end = sessions.periods.last().map(|p| p.end);
    let active_at_end = last_end.is_some_and(|e| e + t_i >= sessions.horizon);
    if sr - srr != usize::from(active_at_end) {
        return Err(format!("{sr} SR vs {srr} SRR, active at end: {active_at_end}"));
    }
    Ok(())
}
