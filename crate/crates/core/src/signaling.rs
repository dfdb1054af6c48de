//! Per-user connection state machine and the control-message trace it
//! produces.
//!
//! A user in `Idle` that starts an activity period triggers a Service Request
//! (three messages). When a period ends the inactivity timer is armed; if it
//! expires before the next period the Service Release (three messages) runs
//! and the user returns to `Idle`. Cell crossings while `Active` trigger an
//! X2 handover (two messages).

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mobility::CrossingEvent;
use crate::traffic::SessionTrace;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcedureKind {
    Sr,
    Srr,
    Hr,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 3] = [ProcedureKind::Sr, ProcedureKind::Srr, ProcedureKind::Hr];

    pub fn message_count(self) -> u8 {
        match self {
            ProcedureKind::Sr | ProcedureKind::Srr => 3,
            ProcedureKind::Hr => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProcedureKind::Sr => "SR",
            ProcedureKind::Srr => "SRR",
            ProcedureKind::Hr => "HR",
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProcedureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "SR" => Ok(ProcedureKind::Sr),
            "SRR" => Ok(ProcedureKind::Srr),
            "HR" => Ok(ProcedureKind::Hr),
            other => Err(format!("unknown procedure {other:?}")),
        }
    }
}

/// One MME-visible message of a procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageType {
    #[serde(rename = "SR1")]
    Sr1,
    #[serde(rename = "SR2")]
    Sr2,
    #[serde(rename = "SR3")]
    Sr3,
    #[serde(rename = "SRR1")]
    Srr1,
    #[serde(rename = "SRR2")]
    Srr2,
    #[serde(rename = "SRR3")]
    Srr3,
    #[serde(rename = "HR1")]
    Hr1,
    #[serde(rename = "HR2")]
    Hr2,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::Sr1,
        MessageType::Sr2,
        MessageType::Sr3,
        MessageType::Srr1,
        MessageType::Srr2,
        MessageType::Srr3,
        MessageType::Hr1,
        MessageType::Hr2,
    ];

    /// Message number `index` (1-based) of `kind`.
    pub fn new(kind: ProcedureKind, index: u8) -> Option<Self> {
        use MessageType::*;
        Some(match (kind, index) {
            (ProcedureKind::Sr, 1) => Sr1,
            (ProcedureKind::Sr, 2) => Sr2,
            (ProcedureKind::Sr, 3) => Sr3,
            (ProcedureKind::Srr, 1) => Srr1,
            (ProcedureKind::Srr, 2) => Srr2,
            (ProcedureKind::Srr, 3) => Srr3,
            (ProcedureKind::Hr, 1) => Hr1,
            (ProcedureKind::Hr, 2) => Hr2,
            _ => return None,
        })
    }

    pub fn kind(self) -> ProcedureKind {
        use MessageType::*;
        match self {
            Sr1 | Sr2 | Sr3 => ProcedureKind::Sr,
            Srr1 | Srr2 | Srr3 => ProcedureKind::Srr,
            Hr1 | Hr2 => ProcedureKind::Hr,
        }
    }

    /// 1-based position within the procedure.
    pub fn index(self) -> u8 {
        use MessageType::*;
        match self {
            Sr1 | Srr1 | Hr1 => 1,
            Sr2 | Srr2 | Hr2 => 2,
            Sr3 | Srr3 => 3,
        }
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind(), self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlMessage {
    /// Arrival at the datacenter ingress, seconds.
    pub time: f64,
    pub ue_id: u32,
    pub msg: MessageType,
    pub procedure_id: u64,
}

/// Spacing between consecutive messages of one procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProcedureTiming {
    pub inter_message_gap_s: f64,
}

impl Default for ProcedureTiming {
    fn default() -> Self {
        Self {
            inter_message_gap_s: 0.020,
        }
    }
}

impl ProcedureTiming {
    pub fn validate(&self) -> Result<()> {
        let g = self.inter_message_gap_s;
        if g.is_finite() && g >= 0.0 {
            Ok(())
        } else {
            Err(Error::param("inter_message_gap_s", format!("must be finite and >= 0, got {g}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnectionMode {
    Idle,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeConnState {
    pub mode: ConnectionMode,
    /// Armed only while `Active` between activity periods.
    pub timer_deadline: Option<f64>,
}

impl Default for UeConnState {
    fn default() -> Self {
        Self {
            mode: ConnectionMode::Idle,
            timer_deadline: None,
        }
    }
}

/// A procedure instance before message expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Procedure {
    pub kind: ProcedureKind,
    pub ue_id: u32,
    /// Time of the first message.
    pub start: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum UeEvent {
    // Declaration order is the tie-break at equal times.
    PeriodEnd,
    PeriodStart,
    Crossing,
}

/// Run the connection state machine of one user.
///
/// Events at or after the session horizon are ignored, so users that are
/// active at the end of the run keep an unmatched Service Request.
pub fn ue_procedures(
    sessions: &SessionTrace,
    crossings: &[CrossingEvent],
    inactivity_timer: f64,
) -> Result<Vec<Procedure>> {
    let ue = sessions.ue_id;
    let horizon = sessions.horizon;
    let mut prev_end = f64::NEG_INFINITY;
    for (i, p) in sessions.periods.iter().enumerate() {
        if !(p.end > p.start) || p.start < prev_end {
            return Err(Error::input(
                i + 1,
                format!("activity periods of UE {ue} are not ordered and disjoint"),
            ));
        }
        prev_end = p.end;
    }
    for (i, c) in crossings.iter().enumerate() {
        if c.ue_id != ue {
            return Err(Error::input(i + 1, format!("crossing for UE {} given to UE {ue}", c.ue_id)));
        }
        if i > 0 && c.time < crossings[i - 1].time {
            return Err(Error::input(i + 1, format!("crossings of UE {ue} are not time-ordered")));
        }
    }

    let mut events: Vec<(f64, UeEvent)> =
        Vec::with_capacity(2 * sessions.periods.len() + crossings.len());
    for p in &sessions.periods {
        events.push((p.start, UeEvent::PeriodStart));
        events.push((p.end, UeEvent::PeriodEnd));
    }
    events.extend(crossings.iter().map(|c| (c.time, UeEvent::Crossing)));
    events.retain(|&(t, kind)| t < horizon || kind == UeEvent::PeriodEnd);
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut state = UeConnState::default();
    let mut out = Vec::new();
    let emit = |out: &mut Vec<Procedure>, kind, start| {
        out.push(Procedure {
            kind,
            ue_id: ue,
            start,
        })
    };
    // Fire the timer if it runs out strictly before `t`.
    let expire = |state: &mut UeConnState, out: &mut Vec<Procedure>, t: f64| {
        if let Some(deadline) = state.timer_deadline {
            if deadline < t && deadline < horizon {
                emit(out, ProcedureKind::Srr, deadline);
                *state = UeConnState::default();
            }
        }
    };

    for (t, event) in events {
        expire(&mut state, &mut out, t);
        match event {
            UeEvent::PeriodStart => {
                if state.mode == ConnectionMode::Idle {
                    emit(&mut out, ProcedureKind::Sr, t);
                    state.mode = ConnectionMode::Active;
                }
                state.timer_deadline = None;
            }
            UeEvent::PeriodEnd => {
                state.timer_deadline = Some(t + inactivity_timer);
            }
            UeEvent::Crossing => {
                if state.mode == ConnectionMode::Active {
                    emit(&mut out, ProcedureKind::Hr, t);
                }
            }
        }
    }
    expire(&mut state, &mut out, horizon);
    Ok(out)
}

/// Time-ordered control messages of a whole population.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SignalingTrace {
    pub messages: Vec<ControlMessage>,
}

impl SignalingTrace {
    /// Expand procedures into messages. Procedure ids follow the order of
    /// `(start, ue_id, per-UE order)`.
    pub fn from_procedures(mut procedures: Vec<Procedure>, timing: &ProcedureTiming) -> Self {
        procedures.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.ue_id.cmp(&b.ue_id)));
        let gap = timing.inter_message_gap_s;
        let mut messages = Vec::with_capacity(procedures.len() * 3);
        for (id, p) in procedures.iter().enumerate() {
            for index in 1..=p.kind.message_count() {
                messages.push(ControlMessage {
                    time: p.start + gap * f64::from(index - 1),
                    ue_id: p.ue_id,
                    msg: MessageType::new(p.kind, index).expect("index within procedure"),
                    procedure_id: id as u64,
                });
            }
        }
        sort_messages(&mut messages);
        Self { messages }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Reconstruct procedure instances (first message time as start), ordered
    /// by procedure id.
    pub fn procedures(&self) -> Vec<(u64, Procedure)> {
        let mut seen = HashSet::new();
        let mut out: Vec<(u64, Procedure)> = self
            .messages
            .iter()
            .filter(|m| m.msg.index() == 1 && seen.insert(m.procedure_id))
            .map(|m| {
                (
                    m.procedure_id,
                    Procedure {
                        kind: m.msg.kind(),
                        ue_id: m.ue_id,
                        start: m.time,
                    },
                )
            })
            .collect();
        out.sort_by_key(|&(id, _)| id);
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,ue_id,procedure,message,procedure_id")?;
        for m in &self.messages {
            writeln!(
                out,
                "{:.9},{},{},{},{}",
                m.time,
                m.ue_id,
                m.msg.kind(),
                m.msg.index(),
                m.procedure_id
            )?;
        }
        Ok(())
    }

    /// Parse a trace file. Errors carry the 1-based line number.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut messages = Vec::new();
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(header)) if header.trim() == "time_s,ue_id,procedure,message,procedure_id" => {}
            Some(Ok(header)) => {
                return Err(Error::input(1, format!("unexpected header {header:?}")));
            }
            Some(Err(e)) => return Err(Error::input(1, e.to_string())),
            None => return Err(Error::input(1, "missing header")),
        }
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::input(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::input(lineno, format!("expected 5 fields, got {}", fields.len())));
            }
            let bad = |what: &str| Error::input(lineno, format!("invalid {what}: {line:?}"));
            let time: f64 = fields[0].parse().map_err(|_| bad("time_s"))?;
            if !time.is_finite() {
                return Err(bad("time_s"));
            }
            let ue_id: u32 = fields[1].parse().map_err(|_| bad("ue_id"))?;
            let kind: ProcedureKind = fields[2].parse().map_err(|_| bad("procedure"))?;
            let index: u8 = fields[3].parse().map_err(|_| bad("message"))?;
            let msg = MessageType::new(kind, index).ok_or_else(|| bad("message"))?;
            let procedure_id: u64 = fields[4].parse().map_err(|_| bad("procedure_id"))?;
            if let Some(prev) = messages.last() {
                let prev: &ControlMessage = prev;
                if time < prev.time {
                    return Err(Error::input(lineno, "rows are not sorted by time"));
                }
            }
            messages.push(ControlMessage {
                time,
                ue_id,
                msg,
                procedure_id,
            });
        }
        Ok(Self { messages })
    }

    /// Error unless messages are sorted by time.
    pub fn check_ordered(&self) -> Result<()> {
        for (i, w) in self.messages.windows(2).enumerate() {
            if !(w[1].time >= w[0].time) {
                return Err(Error::input(i + 2, "trace is not sorted by time"));
            }
        }
        Ok(())
    }
}

pub fn sort_messages(messages: &mut [ControlMessage]) {
    messages.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.procedure_id.cmp(&b.procedure_id))
            .then(a.msg.index().cmp(&b.msg.index()))
    });
}

/// Run every user's state machine and merge the result into one trace.
///
/// `crossings[i]` belongs to `sessions[i]`.
pub fn build_trace(
    sessions: &[SessionTrace],
    crossings: &[Vec<CrossingEvent>],
    inactivity_timer: f64,
    timing: &ProcedureTiming,
) -> Result<SignalingTrace> {
    if !(inactivity_timer >= 0.0) {
        return Err(Error::param(
            "inactivity_timer_s",
            format!("must be >= 0, got {inactivity_timer}"),
        ));
    }
    timing.validate()?;
    if sessions.len() != crossings.len() {
        return Err(Error::input(
            0,
            format!("{} session traces but {} crossing lists", sessions.len(), crossings.len()),
        ));
    }
    let per_ue: Vec<Vec<Procedure>> = sessions
        .par_iter()
        .zip(crossings.par_iter())
        .map(|(s, c)| ue_procedures(s, c, inactivity_timer))
        .collect::<Result<_>>()?;
    Ok(SignalingTrace::from_procedures(
        per_ue.into_iter().flatten().collect(),
        timing,
    ))
}

/// Per-user procedure rates, procedures per second.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProcedureRates {
    pub sr: f64,
    pub srr: f64,
    pub hr: f64,
}

impl ProcedureRates {
    pub fn total(&self) -> f64 {
        self.sr + self.srr + self.hr
    }
}

/// Procedure instances (not messages) per user per second.
pub fn empirical_rates(
    trace: &SignalingTrace,
    num_users: usize,
    duration: f64,
) -> Result<ProcedureRates> {
    if !(duration > 0.0) {
        return Err(Error::param("duration", format!("must be > 0, got {duration}")));
    }
    if num_users == 0 {
        return Err(Error::param("num_users", "must be >= 1"));
    }
    let mut counts = [0usize; 3];
    let mut seen = HashSet::new();
    for m in &trace.messages {
        if seen.insert(m.procedure_id) {
            let slot = match m.msg.kind() {
                ProcedureKind::Sr => 0,
                ProcedureKind::Srr => 1,
                ProcedureKind::Hr => 2,
            };
            counts[slot] += 1;
        }
    }
    let norm = num_users as f64 * duration;
    Ok(ProcedureRates {
        sr: counts[0] as f64 / norm,
        srr: counts[1] as f64 / norm,
        hr: counts[2] as f64 / norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::{ActivityPeriod, Application};

    fn timeline(periods: &[(f64, f64)], horizon: f64) -> SessionTrace {
        SessionTrace {
            ue_id: 0,
            horizon,
            periods: periods
                .iter()
                .map(|&(start, end)| ActivityPeriod {
                    start,
                    end,
                    app: Application::Web,
                    session: 0,
                })
                .collect(),
            session_starts: vec![periods.first().map_or(0.0, |p| p.0)],
        }
    }

    fn crossing(time: f64) -> CrossingEvent {
        CrossingEvent {
            time,
            ue_id: 0,
            from_cell: 0,
            to_cell: 1,
        }
    }

    #[test]
    fn hand_traced_sr_and_srr() {
        let trace = build_trace(
            &[timeline(&[(100.0, 150.0)], 1000.0)],
            &[vec![]],
            10.0,
            &ProcedureTiming::default(),
        )
        .unwrap();
        let got: Vec<(String, f64)> = trace
            .messages
            .iter()
            .map(|m| (m.msg.to_string(), m.time))
            .collect();
        let want = [
            ("SR1", 100.0),
            ("SR2", 100.02),
            ("SR3", 100.04),
            ("SRR1", 160.0),
            ("SRR2", 160.02),
            ("SRR3", 160.04),
        ];
        assert_eq!(got.len(), want.len());
        for ((name, t), (wname, wt)) in got.iter().zip(want) {
            assert_eq!(name, wname);
            assert!((t - wt).abs() < 1e-9);
        }
    }

    #[test]
    fn short_gap_cancels_timer() {
        let p = ue_procedures(&timeline(&[(0.0, 10.0), (15.0, 20.0)], 100.0), &[], 10.0).unwrap();
        let kinds: Vec<_> = p.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, [ProcedureKind::Sr, ProcedureKind::Srr]);
        assert_eq!(p[1].start, 30.0);
    }

    #[test]
    fn handover_only_while_active() {
        let tl = timeline(&[(0.0, 10.0)], 100.0);
        let p = ue_procedures(&tl, &[crossing(5.0)], 10.0).unwrap();
        assert!(p.iter().any(|p| p.kind == ProcedureKind::Hr && p.start == 5.0));
        // After the timer ran out at t=20 the user is idle.
        let p = ue_procedures(&tl, &[crossing(25.0)], 10.0).unwrap();
        assert!(p.iter().all(|p| p.kind != ProcedureKind::Hr));
        // Still active while the timer runs.
        let p = ue_procedures(&tl, &[crossing(15.0)], 10.0).unwrap();
        assert!(p.iter().any(|p| p.kind == ProcedureKind::Hr));
    }

    #[test]
    fn handover_messages_are_spaced() {
        let trace = build_trace(
            &[timeline(&[(0.0, 10.0)], 100.0)],
            &[vec![crossing(5.0)]],
            10.0,
            &ProcedureTiming::default(),
        )
        .unwrap();
        let hr: Vec<_> = trace.messages.iter().filter(|m| m.msg.kind() == ProcedureKind::Hr).collect();
        assert_eq!(hr.len(), 2);
        assert_eq!(hr[0].msg, MessageType::Hr1);
        assert!((hr[1].time - 5.02).abs() < 1e-12);
    }

    #[test]
    fn active_at_horizon_keeps_unmatched_sr() {
        let p = ue_procedures(&timeline(&[(90.0, 95.0)], 100.0), &[], 10.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].kind, ProcedureKind::Sr);
    }

    #[test]
    fn infinite_timer_means_one_sr() {
        let tl = timeline(&[(1.0, 2.0), (50.0, 60.0), (500.0, 600.0)], 1000.0);
        let p = ue_procedures(&tl, &[], f64::INFINITY).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn unordered_input_rejected() {
        let tl = timeline(&[(10.0, 20.0), (15.0, 30.0)], 100.0);
        assert!(matches!(ue_procedures(&tl, &[], 1.0), Err(Error::Input { .. })));
        let tl = timeline(&[(10.0, 20.0)], 100.0);
        assert!(ue_procedures(&tl, &[crossing(5.0), crossing(4.0)], 1.0).is_err());
        assert!(build_trace(&[tl], &[vec![]], -1.0, &ProcedureTiming::default()).is_err());
    }

    #[test]
    fn rates_count_procedures_not_messages() {
        let trace = build_trace(
            &[timeline(&[(10.0, 20.0)], 100.0)],
            &[vec![]],
            f64::INFINITY,
            &ProcedureTiming::default(),
        )
        .unwrap();
        assert_eq!(trace.len(), 3);
        let r = empirical_rates(&trace, 1, 100.0).unwrap();
        assert!((r.sr - 0.01).abs() < 1e-15);
        assert_eq!(r.srr, 0.0);
        let empty = empirical_rates(&SignalingTrace::default(), 5, 10.0).unwrap();
        assert_eq!(empty.total(), 0.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let trace = build_trace(
            &[timeline(&[(1.0, 2.0), (40.0, 41.0)], 100.0)],
            &[vec![crossing(1.5)]],
            5.0,
            &ProcedureTiming::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,ue_id,procedure,message,procedure_id\n1.000000000,0,SR,1,0\n"));
        let back = SignalingTrace::read_csv(&buf[..]).unwrap();
        assert_eq!(back, trace);

        let bad = "time_s,ue_id,procedure,message,procedure_id\n1.0,0,SR,1,0\n2.0,0,HR,3,1\n";
        match SignalingTrace::read_csv(bad.as_bytes()) {
            Err(Error::Input { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let unsorted = "time_s,ue_id,procedure,message,procedure_id\n2.0,0,SR,1,0\n1.0,0,SR,2,0\n";
        assert!(SignalingTrace::read_csv(unsorted.as_bytes()).is_err());
    }
}
