mod common;

use common::{check_messages, check_ue, per_ue_procedures, random_ue};
use proptest::prelude::*;
use vmme::signaling::{build_trace, ProcedureKind, ProcedureTiming};
use vmme::stochastic::RandomStream;

const UES: u32 = 10_000;

fn population(seed: u64, positive_gaps: bool) -> (Vec<vmme::traffic::SessionTrace>, Vec<Vec<vmme::mobility::CrossingEvent>>) {
    (0..UES)
        .map(|ue| random_ue(ue, &mut RandomStream::substream(seed, ue as u64), positive_gaps))
        .unzip()
}

#[test]
fn state_machine_matches_oracle_over_random_timelines() {
    let (sessions, crossings) = population(1, false);
    let timing = ProcedureTiming::default();
    for t_i in [0.0, 0.5, 10.0, 40.0, 300.0, f64::INFINITY] {
        let trace = build_trace(&sessions, &crossings, t_i, &timing).unwrap();
        trace.check_ordered().unwrap();
        check_messages(&trace, timing.inter_message_gap_s).unwrap();
        let procs = per_ue_procedures(&trace);
        for (s, c) in sessions.iter().zip(&crossings) {
            let p = procs.get(&s.ue_id).map(Vec::as_slice).unwrap_or(&[]);
            if let Err(e) = check_ue(s, c, t_i, p) {
                panic!("T_I={t_i}, UE {}: {e}", s.ue_id);
            }
        }
    }
}

#[test]
fn zero_timer_releases_after_every_period() {
    let (sessions, crossings) = population(2, true);
    let trace = build_trace(&sessions, &crossings, 0.0, &ProcedureTiming::default()).unwrap();
    let procs = per_ue_procedures(&trace);
    for s in &sessions {
        let p = procs.get(&s.ue_id).cloned().unwrap_or_default();
        let sr = p.iter().filter(|x| x.0 == ProcedureKind::Sr).count();
        assert_eq!(sr, s.periods.len(), "UE {}", s.ue_id);
    }
}

#[test]
fn infinite_timer_connects_once() {
    let (sessions, crossings) = population(3, false);
    let trace = build_trace(&sessions, &crossings, f64::INFINITY, &ProcedureTiming::default()).unwrap();
    let procs = per_ue_procedures(&trace);
    for s in &sessions {
        let p = procs.get(&s.ue_id).cloned().unwrap_or_default();
        let sr = p.iter().filter(|x| x.0 == ProcedureKind::Sr).count();
        let srr = p.iter().filter(|x| x.0 == ProcedureKind::Srr).count();
        assert_eq!(sr, usize::from(!s.periods.is_empty()));
        assert_eq!(srr, 0);
    }
}

proptest! {
    #[test]
    fn single_ue_oracle(seed in any::<u64>(), t_i in prop_oneof![Just(0.0), 0.0f64..200.0, Just(f64::INFINITY)]) {
        let (s, c) = random_ue(0, &mut RandomStream::new(seed), false);
        let trace = build_trace(&[s.clone()], &[c.clone()], t_i, &ProcedureTiming::default()).unwrap();
        let procs = per_ue_procedures(&trace);
        let p = procs.get(&0).map(Vec::as_slice).unwrap_or(&[]);
        prop_assert!(check_ue(&s, &c, t_i, p).is_ok(), "{:?}", check_ue(&s, &c, t_i, p));
    }
}
