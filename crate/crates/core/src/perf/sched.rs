//! Discrete-event simulation of chunked host-to-device transfer, compute
//! and device-to-host transfer over three single-server resources.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::Serialize;

/// Durations of one chunk's three dependent tasks, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChunkTimes {
    pub input: f64,
    pub compute: f64,
    pub output: f64,
}

impl ChunkTimes {
    fn get(&self, stage: usize) -> f64 {
        [self.input, self.compute, self.output][stage]
    }

    pub fn max(&self) -> f64 {
        self.input.max(self.compute).max(self.output)
    }
}

/// When one task ran.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaskSpan {
    pub chunk: usize,
    /// 0 = host to device, 1 = compute, 2 = device to host.
    pub stage: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub makespan: f64,
    pub spans: Vec<TaskSpan>,
}

#[derive(Debug, PartialEq)]
struct Event {
    time: f64,
    seq: u64,
    chunk: usize,
    stage: usize,
}

impl Eq for Event {}

impl Ord for Event {
    // Min-heap on (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Sim<'t> {
    tasks: &'t [ChunkTimes],
    now: f64,
    seq: u64,
    heap: BinaryHeap<Event>,
    busy: [bool; 3],
    ready: [VecDeque<usize>; 3],
    spans: Vec<TaskSpan>,
}

impl Sim<'_> {
    fn start(&mut self, chunk: usize, stage: usize) {
        let end = self.now + self.tasks[chunk].get(stage);
        self.busy[stage] = true;
        self.spans.push(TaskSpan {
            chunk,
            stage,
            start: self.now,
            end,
        });
        self.seq += 1;
        self.heap.push(Event {
            time: end,
            seq: self.seq,
            chunk,
            stage,
        });
    }

    fn dispatch(&mut self) {
        for stage in 0..3 {
            if !self.busy[stage] {
                if let Some(chunk) = self.ready[stage].pop_front() {
                    self.start(chunk, stage);
                }
            }
        }
    }
}

/// Overlapped mode: each resource serves its ready tasks in chunk order and
/// different chunks may occupy different resources at the same time.
pub fn simulate_overlapped(tasks: &[ChunkTimes]) -> Schedule {
    let mut sim = Sim {
        tasks,
        now: 0.0,
        seq: 0,
        heap: BinaryHeap::new(),
        busy: [false; 3],
        ready: Default::default(),
        spans: Vec::with_capacity(tasks.len() * 3),
    };
    sim.ready[0].extend(0..tasks.len());
    sim.dispatch();
    while let Some(ev) = sim.heap.pop() {
        sim.now = ev.time;
        sim.busy[ev.stage] = false;
        if ev.stage < 2 {
            sim.ready[ev.stage + 1].push_back(ev.chunk);
        }
        sim.dispatch();
    }
    Schedule {
        makespan: sim.now,
        spans: sim.spans,
    }
}

/// Serial mode: every input transfer, then every compute, then every output
/// transfer, one task at a time.
pub fn simulate_serial(tasks: &[ChunkTimes]) -> Schedule {
    let mut now = 0.0;
    let mut spans = Vec::with_capacity(tasks.len() * 3);
    for stage in 0..3 {
        for (chunk, t) in tasks.iter().enumerate() {
            let end = now + t.get(stage);
            spans.push(TaskSpan {
                chunk,
                stage,
                start: now,
                end,
            });
            now = end;
        }
    }
    Schedule {
        makespan: now,
        spans,
    }
}

/// Closed-form overlapped makespan for `n` equal chunks.
pub fn pipeline_bound(chunk: ChunkTimes, n: usize) -> f64 {
    chunk.input + chunk.compute + chunk.output + (n.saturating_sub(1)) as f64 * chunk.max()
}
