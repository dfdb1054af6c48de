//! Generic open network of single-server FIFO stations.
//!
//! Every job carries a fixed route (station and service time per hop) that is
//! resolved when it enters the network. The router sees the committed load of
//! every station: jobs routed through it that have not yet left it.

use std::collections::VecDeque;

use super::calendar::EventCalendar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub station: usize,
    pub service: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopRecord {
    pub station: usize,
    pub arrival: f64,
    pub start: f64,
    pub departure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub arrival: f64,
    pub departure: f64,
    /// Filled only when hop recording is enabled.
    pub hops: Vec<HopRecord>,
}

impl JobOutcome {
    pub fn sojourn(&self) -> f64 {
        self.departure - self.arrival
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StationStats {
    pub served: u64,
    pub busy_time: f64,
    pub total_wait: f64,
}

impl StationStats {
    pub fn mean_wait(&self) -> f64 {
        if self.served == 0 {
            0.0
        } else {
            self.total_wait / self.served as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOutput {
    /// Indexed like the arrival slice.
    pub jobs: Vec<JobOutcome>,
    pub stations: Vec<StationStats>,
    pub first_arrival: f64,
    pub last_departure: f64,
}

impl EngineOutput {
    /// Observation span from the first arrival to the last departure.
    pub fn span(&self) -> f64 {
        if self.jobs.is_empty() {
            0.0
        } else {
            self.last_departure - self.first_arrival
        }
    }
}

struct ActiveJob {
    job: usize,
    route: Vec<Hop>,
    next: usize,
    hop_arrival: f64,
    hop_start: f64,
    hops: Vec<HopRecord>,
}

#[derive(Default)]
struct Station {
    queue: VecDeque<usize>,
    in_service: Option<usize>,
}

struct Network {
    stations: Vec<Station>,
    stats: Vec<StationStats>,
    committed: Vec<usize>,
    slots: Vec<ActiveJob>,
    free: Vec<usize>,
    calendar: EventCalendar<usize>,
}

impl Network {
    fn start(&mut self, slot: usize, station: usize, now: f64) {
        let job = &mut self.slots[slot];
        job.hop_start = now;
        self.stats[station].total_wait += now - job.hop_arrival;
        let service = job.route[job.next].service;
        self.stations[station].in_service = Some(slot);
        self.calendar.schedule(now + service, station);
    }

    fn enter(&mut self, slot: usize, now: f64) {
        let job = &mut self.slots[slot];
        job.hop_arrival = now;
        let station = job.route[job.next].station;
        if self.stations[station].in_service.is_none() {
            self.start(slot, station, now);
        } else {
            self.stations[station].queue.push_back(slot);
        }
    }
}

/// Simulate the network for jobs arriving at the given sorted times.
///
/// `route(job, now, committed)` returns the hops of a job at its arrival.
/// External arrivals are processed before departures scheduled for the same
/// instant; departures at equal times follow their scheduling order.
pub fn simulate<R>(
    num_stations: usize,
    arrivals: &[f64],
    record_hops: bool,
    mut route: R,
) -> Result<EngineOutput>
where
    R: FnMut(usize, f64, &[usize]) -> Vec<Hop>,
{
    for (i, w) in arrivals.windows(2).enumerate() {
        if !(w[1] >= w[0]) {
            return Err(Error::input(i + 2, "arrivals are not sorted by time"));
        }
    }
    if let Some(t) = arrivals.iter().find(|t| !t.is_finite()) {
        return Err(Error::input(0, format!("non-finite arrival time {t}")));
    }
    let mut net = Network {
        stations: (0..num_stations).map(|_| Station::default()).collect(),
        stats: vec![StationStats::default(); num_stations],
        committed: vec![0; num_stations],
        slots: Vec::new(),
        free: Vec::new(),
        calendar: EventCalendar::new(),
    };
    let mut jobs: Vec<JobOutcome> = arrivals
        .iter()
        .map(|&arrival| JobOutcome {
            arrival,
            departure: f64::NAN,
            hops: Vec::new(),
        })
        .collect();
    let mut last_departure = f64::NEG_INFINITY;
    let mut next_arrival = 0;

    loop {
        let take_arrival = next_arrival < arrivals.len()
            && net
                .calendar
                .peek_time()
                .is_none_or(|t| arrivals[next_arrival] <= t);
        if take_arrival {
            let now = arrivals[next_arrival];
            let hops = route(next_arrival, now, &net.committed);
            if hops.is_empty() {
                return Err(Error::Model(format!("job {next_arrival} has an empty route")));
            }
            for h in &hops {
                if h.station >= num_stations || !(h.service >= 0.0 && h.service.is_finite()) {
                    return Err(Error::Model(format!("job {next_arrival} has an invalid hop {h:?}")));
                }
                net.committed[h.station] += 1;
            }
            let job = ActiveJob {
                job: next_arrival,
                route: hops,
                next: 0,
                hop_arrival: now,
                hop_start: now,
                hops: Vec::new(),
            };
            let slot = match net.free.pop() {
                Some(s) => {
                    net.slots[s] = job;
                    s
                }
                None => {
                    net.slots.push(job);
                    net.slots.len() - 1
                }
            };
            net.enter(slot, now);
            next_arrival += 1;
            continue;
        }
        let Some((now, station)) = net.calendar.pop() else {
            break;
        };
        let slot = net.stations[station]
            .in_service
            .take()
            .expect("departure from a busy station");
        {
            let job = &mut net.slots[slot];
            let st = &mut net.stats[station];
            st.served += 1;
            st.busy_time += now - job.hop_start;
            if record_hops {
                job.hops.push(HopRecord {
                    station,
                    arrival: job.hop_arrival,
                    start: job.hop_start,
                    departure: now,
                });
            }
        }
        net.committed[station] -= 1;
        if let Some(waiting) = net.stations[station].queue.pop_front() {
            net.start(waiting, station, now);
        }
        net.slots[slot].next += 1;
        if net.slots[slot].next < net.slots[slot].route.len() {
            net.enter(slot, now);
        } else {
            let job = &mut net.slots[slot];
            let out = &mut jobs[job.job];
            out.departure = now;
            out.hops = std::mem::take(&mut job.hops);
            last_departure = last_departure.max(now);
            net.free.push(slot);
        }
    }

    Ok(EngineOutput {
        first_arrival: arrivals.first().copied().unwrap_or(0.0),
        last_departure: if jobs.is_empty() { 0.0 } else { last_departure },
        jobs,
        stations: net.stats,
    })
}

/// Index of the smallest load, lowest index on ties.
pub fn least_loaded(loads: &[usize]) -> usize {
    let mut best = 0;
    for (i, &l) in loads.iter().enumerate() {
        if l < loads[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::RandomStream;
    use proptest::prelude::*;

    #[test]
    fn least_loaded_picks_lowest_index_on_ties() {
        assert_eq!(least_loaded(&[0, 0, 0]), 0);
        assert_eq!(least_loaded(&[2, 1, 3]), 1);
        assert_eq!(least_loaded(&[1, 0, 0]), 1);
    }

    #[test]
    fn tandem_deterministic_by_hand() {
        // Two jobs, two stations with service 1 and 2.
        let out = simulate(2, &[0.0, 0.5], true, |_, _, _| {
            vec![
                Hop { station: 0, service: 1.0 },
                Hop { station: 1, service: 2.0 },
            ]
        })
        .unwrap();
        assert_eq!(out.jobs[0].departure, 3.0);
        // Second job: station 0 from 1 to 2, waits at station 1 until 3.
        assert_eq!(out.jobs[1].departure, 5.0);
        assert_eq!(out.jobs[1].hops[1].start, 3.0);
        assert_eq!(out.stations[0].total_wait, 0.5);
        assert_eq!(out.stations[1].total_wait, 1.0);
        assert_eq!(out.stations[1].busy_time, 4.0);
        assert_eq!(out.span(), 5.0);
    }

    #[test]
    fn committed_load_counts_en_route_jobs() {
        let mut seen = Vec::new();
        simulate(2, &[0.0, 0.0, 0.0], false, |_, _, loads| {
            seen.push(loads.to_vec());
            let target = least_loaded(loads);
            vec![Hop { station: target, service: 1.0 }]
        })
        .unwrap();
        assert_eq!(seen, [vec![0, 0], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn unsorted_arrivals_rejected() {
        let r = simulate(1, &[1.0, 0.5], false, |_, _, _| vec![Hop { station: 0, service: 1.0 }]);
        assert!(matches!(r, Err(Error::Input { line: 2, .. })));
        let r = simulate(1, &[1.0], false, |_, _, _| vec![Hop { station: 3, service: 1.0 }]);
        assert!(r.is_err());
    }

    fn poisson(rate: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut s = RandomStream::new(seed);
        let mut t = 0.0;
        (0..n)
            .map(|_| {
                t -= s.open_uniform().ln() / rate;
                t
            })
            .collect()
    }

    #[test]
    fn md1_wait_matches_pollaczek_khinchine() {
        let service = 1e-5;
        let arrivals = poisson(50_000.0, 1_000_000, 11);
        let out = simulate(1, &arrivals, false, |_, _, _| vec![Hop { station: 0, service }]).unwrap();
        let rho = 0.5;
        let want = rho * service / (2.0 * (1.0 - rho));
        let got = out.stations[0].mean_wait();
        assert!((got - want).abs() / want < 0.03, "{got} vs {want}");
        let util = out.stations[0].busy_time / out.span();
        assert!((util - rho).abs() / rho < 0.01, "{util}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn fifo_and_conservation(
            gaps in proptest::collection::vec(0.0f64..2.0, 1..200),
            services in proptest::collection::vec((0usize..3, 0.01f64..3.0), 1..4),
        ) {
            let mut t = 0.0;
            let arrivals: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
            let route: Vec<Hop> = services.iter().map(|&(station, service)| Hop { station, service }).collect();
            let out = simulate(3, &arrivals, true, |_, _, _| route.clone()).unwrap();
            prop_assert_eq!(out.jobs.len(), arrivals.len());
            let served: u64 = out.stations.iter().map(|s| s.served).sum();
            prop_assert_eq!(served as usize, arrivals.len() * route.len());
            for j in &out.jobs {
                prop_assert!(j.departure >= j.arrival);
                prop_assert_eq!(j.hops.len(), route.len());
            }
            // Identical routes: departure order at every hop follows arrival order.
            for h in 0..route.len() {
                for w in out.jobs.windows(2) {
                    prop_assert!(w[1].hops[h].departure >= w[0].hops[h].departure);
                    prop_assert!(w[1].hops[h].start >= w[0].hops[h].start);
                }
            }
            // Work conservation: a job waits only while the station is busy.
            for s in 0..3 {
                let mut visits: Vec<HopRecord> = out.jobs.iter().flat_map(|j| j.hops.iter().copied()).filter(|h| h.station == s).collect();
                visits.sort_by(|a, b| a.start.total_cmp(&b.start));
                for w in visits.windows(2) {
                    if w[1].start > w[1].arrival {
                        prop_assert_eq!(w[1].start, w[0].departure);
                    }
                }
            }
        }
    }
}
