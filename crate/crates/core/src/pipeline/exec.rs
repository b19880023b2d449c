//! Runs a set of stages either on dedicated threads, on a fixed pool of
//! worker threads, or cooperatively on the calling thread.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

use super::port::Probe;
use super::stages::{Stage, StageReport, Step};
use super::ExecMode;

/// How long a dedicated stage waits on a stream before re-checking the
/// abort flag and the stall watchdog.
const POLL: Duration = Duration::from_millis(20);
/// Steps a cooperative worker gives one stage before moving on.
const BURST: usize = 256;

#[repr(align(128))]
#[derive(Default)]
struct Counter(AtomicU64);

struct Control<'p> {
    abort: AtomicBool,
    progress: Vec<Counter>,
    error: Mutex<Option<Error>>,
    probes: &'p [Probe],
    stall_timeout: Duration,
}

impl Control<'_> {
    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.abort.store(true, Ordering::SeqCst);
    }

    fn aborted(&self) -> bool {
        self.abort.load(Ordering::Relaxed)
    }

    fn total_progress(&self) -> u64 {
        self.progress
            .iter()
            .map(|c| c.0.load(Ordering::Relaxed))
            .sum()
    }

    fn stalled(&self, waited: Duration) -> Error {
        let dump = self
            .probes
            .iter()
            .map(|p| format!("{}={}/{}", p.name, p.len(), p.capacity))
            .collect::<Vec<_>>()
            .join(", ");
        Error::Stalled {
            seconds: waited.as_secs_f64(),
            dump,
        }
    }
}

/// Tracks how long global progress has been flat.
struct Watchdog {
    seen: u64,
    since: Instant,
}

impl Watchdog {
    fn new(ctl: &Control) -> Self {
        Self {
            seen: ctl.total_progress(),
            since: Instant::now(),
        }
    }

    fn check(&mut self, ctl: &Control) -> Result<()> {
        let now = ctl.total_progress();
        if now != self.seen {
            self.seen = now;
            self.since = Instant::now();
            return Ok(());
        }
        let waited = self.since.elapsed();
        if waited >= ctl.stall_timeout {
            return Err(ctl.stalled(waited));
        }
        Ok(())
    }
}

type BoxedStage<'a> = Box<dyn Stage + 'a>;

/// Drive one stage with blocking (timed) stream operations.
fn run_dedicated(mut stage: BoxedStage<'_>, slot: usize, ctl: &Control) -> StageReport {
    let mut watch = Watchdog::new(ctl);
    while !ctl.aborted() {
        match stage.step(Some(POLL)) {
            Ok(Step::Progress) => {
                ctl.progress[slot].0.fetch_add(1, Ordering::Relaxed);
            }
            Ok(Step::Blocked) => {
                if let Err(e) = watch.check(ctl) {
                    ctl.fail(e);
                }
            }
            Ok(Step::Done) => break,
            Err(e) => ctl.fail(e),
        }
    }
    stage.report()
}

/// Round-robin several stages with non-blocking stream operations. When
/// `exclusive` is set these are the only live stages, so a full round with
/// no progress is a certain deadlock.
fn run_cooperative(
    stages: Vec<BoxedStage<'_>>,
    slot: usize,
    ctl: &Control,
    exclusive: bool,
) -> Vec<StageReport> {
    let mut live: Vec<Option<BoxedStage<'_>>> = stages.into_iter().map(Some).collect();
    let mut reports = Vec::with_capacity(live.len());
    let mut watch = Watchdog::new(ctl);
    let mut idle_rounds = 0u32;
    while !ctl.aborted() {
        let mut progressed = false;
        let mut remaining = 0;
        for entry in &mut live {
            let Some(stage) = entry else { continue };
            let mut done = false;
            for _ in 0..BURST {
                match stage.step(None) {
                    Ok(Step::Progress) => progressed = true,
                    Ok(Step::Blocked) => break,
                    Ok(Step::Done) => {
                        done = true;
                        progressed = true;
                        break;
                    }
                    Err(e) => {
                        ctl.fail(e);
                        break;
                    }
                }
            }
            if done {
                reports.push(entry.take().unwrap().report());
            } else {
                remaining += 1;
            }
        }
        if remaining == 0 {
            break;
        }
        if progressed {
            ctl.progress[slot].0.fetch_add(1, Ordering::Relaxed);
            idle_rounds = 0;
            continue;
        }
        if exclusive {
            ctl.fail(ctl.stalled(Duration::ZERO));
            break;
        }
        if let Err(e) = watch.check(ctl) {
            ctl.fail(e);
            break;
        }
        idle_rounds += 1;
        if idle_rounds < 64 {
            thread::yield_now();
        } else {
            thread::sleep(Duration::from_micros(50));
        }
    }
    reports.extend(live.into_iter().flatten().map(|s| s.report()));
    reports
}

pub(crate) fn execute<'a>(
    stages: Vec<BoxedStage<'a>>,
    probes: &[Probe],
    mode: ExecMode,
    stall_timeout: Duration,
) -> Result<Vec<StageReport>> {
    let n = stages.len();
    let workers = match mode {
        ExecMode::SingleThreaded => 1,
        ExecMode::Concurrent { max_workers } => max_workers.unwrap_or(n).clamp(1, n),
    };
    let ctl = Control {
        abort: AtomicBool::new(false),
        progress: (0..workers).map(|_| Counter::default()).collect(),
        error: Mutex::new(None),
        probes,
        stall_timeout,
    };

    let reports = if matches!(mode, ExecMode::SingleThreaded) {
        run_cooperative(stages, 0, &ctl, true)
    } else {
        let mut groups: Vec<Vec<BoxedStage<'a>>> = (0..workers).map(|_| Vec::new()).collect();
        for (i, s) in stages.into_iter().enumerate() {
            groups[i % workers].push(s);
        }
        thread::scope(|scope| {
            let handles: Vec<_> = groups
                .into_iter()
                .enumerate()
                .map(|(slot, mut group)| {
                    let ctl = &ctl;
                    let name = group
                        .first()
                        .map(|s| s.name().to_owned())
                        .unwrap_or_default();
                    thread::Builder::new()
                        .name(name)
                        .spawn_scoped(scope, move || {
                            if group.len() == 1 {
                                vec![run_dedicated(group.pop().unwrap(), slot, ctl)]
                            } else {
                                run_cooperative(group, slot, ctl, false)
                            }
                        })
                        .expect("spawn pipeline worker")
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| match h.join() {
                    Ok(r) => r,
                    Err(_) => {
                        ctl.fail(Error::StageFailed {
                            stage: "worker".into(),
                            reason: "panicked".into(),
                        });
                        Vec::new()
                    }
                })
                .collect()
        })
    };

    if let Some(e) = ctl.error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(reports)
}
