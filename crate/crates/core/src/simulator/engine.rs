//! One replication: an event list over arrivals and service completions.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::{Dispatch, Layout};
use crate::error::{Error, Result};
use crate::queueing::ServiceDist;

/// Waiting jobs across all servers above this signal a misconfiguration.
pub const QUEUE_GUARD: usize = 10_000_000;

/// One job of the event trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub job: u64,
    /// 1-based SLA class.
    pub class: usize,
    /// 0-based server index across all groups.
    pub server: usize,
    pub arrival: f64,
    pub start: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct RepStats {
    pub wait_sum: Vec<f64>,
    pub measured: Vec<u64>,
    pub queue_area: Vec<f64>,
    pub departures: Vec<u64>,
    pub busy: Vec<f64>,
    pub window: f64,
}

#[derive(Clone, Copy)]
struct Job {
    id: u64,
    class: usize,
    arrival: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Arrival,
    Departure(usize),
}

#[derive(Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Server {
    busy_since: Option<f64>,
    in_service: Option<Job>,
    queues: Vec<VecDeque<Job>>,
}

pub(crate) struct Replication<'a, R: Rng> {
    pub layout: &'a Layout,
    pub rates: &'a [f64],
    pub dist: &'a ServiceDist,
    pub dispatch: Dispatch,
    pub warmup: u64,
    pub measured: u64,
    pub rng: R,
}

impl<R: Rng> Replication<'_, R> {
    pub fn run(mut self, mut trace: Option<&mut Vec<TraceRecord>>) -> Result<RepStats> {
        let layout = self.layout;
        let classes = self.rates.len();
        let total_rate: f64 = self.rates.iter().sum();
        let interarrival = Exp::new(total_rate).map_err(|e| Error::Simulation(format!("arrival rate: {e}")))?;
        let pick_class = WeightedIndex::new(self.rates).map_err(|e| Error::Simulation(format!("class rates: {e}")))?;

        let mut servers: Vec<Server> = Vec::new();
        let mut first_server = Vec::with_capacity(layout.groups.len());
        for group in &layout.groups {
            first_server.push(servers.len());
            let lanes = if group.priority { group.classes.len() } else { 1 };
            for _ in 0..group.servers {
                servers.push(Server { busy_since: None, in_service: None, queues: vec![VecDeque::new(); lanes] });
            }
        }
        let mut rr = vec![0usize; layout.groups.len()];

        let mut st = RepStats {
            wait_sum: vec![0.0; classes],
            measured: vec![0; classes],
            queue_area: vec![0.0; classes],
            departures: vec![0; classes],
            busy: vec![0.0; servers.len()],
            window: 0.0,
        };
        let mut waiting = vec![0usize; classes];
        let mut waiting_total = 0usize;
        let (mut open, mut close) = (f64::NAN, f64::NAN);
        let mut started_measured = 0u64;
        let mut next_id = 0u64;
        let mut seq = 0u64;
        let mut last = 0.0f64;
        let end_id = self.warmup + self.measured;

        let mut heap = BinaryHeap::new();
        heap.push(Event { time: interarrival.sample(&mut self.rng), seq, kind: Kind::Arrival });
        seq += 1;

        while started_measured < self.measured {
            let ev = heap.pop().ok_or_else(|| Error::Simulation("event list ran dry".into()))?;
            let now = ev.time;
            // Queue-length areas inside the measurement window.
            if open.is_finite() {
                let a = last.max(open);
                let b = if close.is_finite() { now.min(close) } else { now };
                if b > a {
                    for (area, &w) in st.queue_area.iter_mut().zip(&waiting) {
                        *area += w as f64 * (b - a);
                    }
                }
            }
            last = now;

            match ev.kind {
                Kind::Arrival => {
                    let id = next_id;
                    next_id += 1;
                    if id == self.warmup {
                        open = now;
                    }
                    if id == end_id {
                        close = now;
                        for (i, s) in servers.iter_mut().enumerate() {
                            if let Some(t0) = s.busy_since.take() {
                                st.busy[i] += (now - t0.max(open)).max(0.0);
                                s.busy_since = Some(now);
                            }
                        }
                    }
                    heap.push(Event { time: now + interarrival.sample(&mut self.rng), seq, kind: Kind::Arrival });
                    seq += 1;

                    let class = pick_class.sample(&mut self.rng);
                    let g = layout.class_group[class];
                    let group = &layout.groups[g];
                    let local = match self.dispatch {
                        Dispatch::Random => self.rng.random_range(0..group.servers),
                        Dispatch::RoundRobin => {
                            let k = rr[g];
                            rr[g] = (k + 1) % group.servers;
                            k
                        }
                    };
                    let si = first_server[g] + local;
                    let job = Job { id, class, arrival: now };
                    if servers[si].in_service.is_none() {
                        self.start(
                            &mut servers[si],
                            si,
                            job,
                            now,
                            &mut heap,
                            &mut seq,
                            &mut st,
                            &mut started_measured,
                            &mut trace,
                        );
                        if servers[si].busy_since.is_none() {
                            servers[si].busy_since = Some(now);
                        }
                    } else {
                        let lane = if group.priority { class - group.classes[0] } else { 0 };
                        servers[si].queues[lane].push_back(job);
                        waiting[class] += 1;
                        waiting_total += 1;
                        if waiting_total > QUEUE_GUARD {
                            return Err(Error::Simulation(format!(
                                "more than {QUEUE_GUARD} jobs waiting; the configuration is effectively unstable"
                            )));
                        }
                    }
                }
                Kind::Departure(si) => {
                    let done = servers[si].in_service.take().expect("departure from an idle server");
                    if open.is_finite() && !close.is_finite() {
                        st.departures[done.class] += 1;
                    }
                    let next = servers[si].queues.iter_mut().find_map(|q| q.pop_front());
                    match next {
                        Some(job) => {
                            waiting[job.class] -= 1;
                            waiting_total -= 1;
                            self.start(
                                &mut servers[si],
                                si,
                                job,
                                now,
                                &mut heap,
                                &mut seq,
                                &mut st,
                                &mut started_measured,
                                &mut trace,
                            );
                        }
                        None => {
                            if let Some(t0) = servers[si].busy_since.take() {
                                if open.is_finite() {
                                    let b = if close.is_finite() { now.min(close) } else { now };
                                    st.busy[si] += (b - t0.max(open)).max(0.0);
                                }
                            }
                        }
                    }
                }
            }
        }
        if !close.is_finite() {
            close = last;
            for (i, s) in servers.iter().enumerate() {
                if let Some(t0) = s.busy_since {
                    st.busy[i] += (close - t0.max(open)).max(0.0);
                }
            }
        }
        st.window = close - open;
        Ok(st)
    }

    #[allow(clippy::too_many_arguments)]
    fn start(
        &mut self,
        server: &mut Server,
        si: usize,
        job: Job,
        now: f64,
        heap: &mut BinaryHeap<Event>,
        seq: &mut u64,
        st: &mut RepStats,
        started_measured: &mut u64,
        trace: &mut Option<&mut Vec<TraceRecord>>,
    ) {
        if job.id >= self.warmup && job.id < self.warmup + self.measured {
            st.wait_sum[job.class] += now - job.arrival;
            st.measured[job.class] += 1;
            *started_measured += 1;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRecord { job: job.id, class: job.class + 1, server: si, arrival: job.arrival, start: now });
        }
        server.in_service = Some(job);
        heap.push(Event { time: now + self.dist.sample(&mut self.rng), seq: *seq, kind: Kind::Departure(si) });
        *seq += 1;
    }
}
