//! Rank communicator: the collectives and boundary messages the parallel
//! planner and generator need, plus an in-process backend that runs one
//! thread per rank.
//!
//! Reductions and scans combine contributions in ascending rank order so
//! their results match a left-to-right sequential sum bit for bit.

use std::any::Any;
use std::collections::HashMap;
use std::panic::AssertUnwindSafe;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use crate::error::CommError;

/// Type-erased collective contribution.
pub type Payload = Arc<dyn Any + Send + Sync>;

/// A partition boundary `n_k` announced by the rank whose block contains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryMsg {
    pub k: usize,
    pub node: u64,
    /// Cumulative cost of all nodes before `node`.
    pub cost_before: f64,
    pub from: usize,
}

pub trait Communicator {
    fn rank(&self) -> usize;
    fn size(&self) -> usize;

    /// Every rank contributes one value and receives all of them in rank
    /// order. `op` names the call site; ranks disagreeing on it is an error.
    fn exchange(&self, op: &'static str, value: Payload) -> Result<Vec<Payload>, CommError>;

    fn send_boundary(&self, to: usize, msg: BoundaryMsg) -> Result<(), CommError>;

    /// Blocks until `expected` boundary messages have arrived and returns them.
    fn recv_boundaries(&self, expected: usize) -> Result<Vec<BoundaryMsg>, CommError>;

    fn all_gather<T>(&self, op: &'static str, value: T) -> Result<Vec<T>, CommError>
    where
        T: Clone + Send + Sync + 'static,
        Self: Sized,
    {
        self.exchange(op, Arc::new(value))?
            .into_iter()
            .map(|p| {
                p.downcast_ref::<T>().cloned().ok_or(CommError::Mismatch {
                    epoch: 0,
                    rank: self.rank(),
                    expected: op,
                    got: "payload of another type",
                })
            })
            .collect()
    }

    /// Sum over ranks, accumulated in rank order starting from zero.
    fn all_reduce_sum(&self, x: f64) -> Result<f64, CommError>
    where
        Self: Sized,
    {
        let all = self.all_gather("all_reduce_sum", x)?;
        Ok(all.iter().fold(0.0, |acc, v| acc + v))
    }

    /// Sum of the contributions of ranks `0..rank`; rank 0 receives zero.
    fn exclusive_scan_sum(&self, x: f64) -> Result<f64, CommError>
    where
        Self: Sized,
    {
        let all = self.all_gather("exclusive_scan_sum", x)?;
        Ok(all[..self.rank()].iter().fold(0.0, |acc, v| acc + v))
    }

    fn barrier(&self) -> Result<(), CommError>
    where
        Self: Sized,
    {
        self.all_gather("barrier", ()).map(|_| ())
    }
}

/// Available communicator implementations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    InProc,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inproc" => Ok(Backend::InProc),
            other => Err(format!("unknown backend {other:?} (available: inproc)")),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::InProc => f.write_str("inproc"),
        }
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

struct Slot {
    ops: Vec<Option<&'static str>>,
    values: Vec<Option<Payload>>,
    arrived: usize,
    taken: usize,
}

#[derive(Default)]
struct Mailbox {
    queue: Mutex<Vec<BoundaryMsg>>,
    ready: Condvar,
}

struct Shared {
    size: usize,
    timeout: Duration,
    slots: Mutex<HashMap<u64, Slot>>,
    complete: Condvar,
    mailboxes: Vec<Mailbox>,
    aborted: AtomicBool,
}

impl Shared {
    fn abort(&self) {
        self.aborted.store(true, Ordering::SeqCst);
        // Take each lock so no waiter misses the wakeup between its check and wait.
        drop(lock(&self.slots));
        self.complete.notify_all();
        for mb in &self.mailboxes {
            drop(lock(&mb.queue));
            mb.ready.notify_all();
        }
    }

    fn is_aborted(&self) -> bool {
        self.aborted.load(Ordering::SeqCst)
    }
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// One rank's handle on an in-process world.
pub struct InProcComm {
    rank: usize,
    epoch: std::cell::Cell<u64>,
    shared: Arc<Shared>,
}

impl InProcComm {
    fn fail(&self, err: CommError) -> CommError {
        self.shared.abort();
        err
    }
}

impl Communicator for InProcComm {
    fn rank(&self) -> usize {
        self.rank
    }

    fn size(&self) -> usize {
        self.shared.size
    }

    fn exchange(&self, op: &'static str, value: Payload) -> Result<Vec<Payload>, CommError> {
        let shared = &*self.shared;
        let size = shared.size;
        let epoch = self.epoch.get();
        self.epoch.set(epoch + 1);
        let deadline = Instant::now() + shared.timeout;

        let mut slots = lock(&shared.slots);
        if shared.is_aborted() {
            return Err(CommError::Aborted);
        }
        let slot = slots.entry(epoch).or_insert_with(|| Slot {
            ops: vec![None; size],
            values: vec![None; size],
            arrived: 0,
            taken: 0,
        });
        slot.ops[self.rank] = Some(op);
        slot.values[self.rank] = Some(value);
        slot.arrived += 1;
        if slot.arrived == size {
            shared.complete.notify_all();
        }
        loop {
            if shared.is_aborted() {
                return Err(CommError::Aborted);
            }
            if slots[&epoch].arrived == size {
                break;
            }
            let now = Instant::now();
            if now >= deadline {
                drop(slots);
                return Err(self.fail(CommError::Timeout {
                    rank: self.rank,
                    op,
                }));
            }
            slots = shared
                .complete
                .wait_timeout(slots, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        let slot = slots.get_mut(&epoch).expect("slot present until all ranks read it");
        let first = slot.ops[0].unwrap_or("?");
        if let Some((rank, got)) = slot
            .ops
            .iter()
            .enumerate()
            .find_map(|(r, o)| o.filter(|o| *o != first).map(|o| (r, o)))
        {
            drop(slots);
            return Err(self.fail(CommError::Mismatch {
                epoch,
                rank,
                expected: first,
                got,
            }));
        }
        let out = slot
            .values
            .iter()
            .map(|v| v.clone().expect("every rank contributed"))
            .collect();
        slot.taken += 1;
        if slot.taken == size {
            slots.remove(&epoch);
        }
        Ok(out)
    }

    fn send_boundary(&self, to: usize, msg: BoundaryMsg) -> Result<(), CommError> {
        let size = self.shared.size;
        if to >= size {
            return Err(self.fail(CommError::BadRank { to, size }));
        }
        let mb = &self.shared.mailboxes[to];
        lock(&mb.queue).push(msg);
        mb.ready.notify_all();
        Ok(())
    }

    fn recv_boundaries(&self, expected: usize) -> Result<Vec<BoundaryMsg>, CommError> {
        let shared = &*self.shared;
        let mb = &shared.mailboxes[self.rank];
        let deadline = Instant::now() + shared.timeout;
        let mut queue = lock(&mb.queue);
        while queue.len() < expected {
            if shared.is_aborted() {
                return Err(CommError::Aborted);
            }
            let now = Instant::now();
            if now >= deadline {
                drop(queue);
                return Err(self.fail(CommError::Timeout {
                    rank: self.rank,
                    op: "recv_boundaries",
                }));
            }
            queue = mb
                .ready
                .wait_timeout(queue, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        Ok(queue.drain(..expected).collect())
    }
}

/// Runs `body` once per rank on its own thread and returns the per-rank
/// results in rank order.
///
/// If any rank fails the world is aborted so blocked ranks return promptly;
/// the first non-abort error is reported.
pub fn run_inproc<T, F>(size: usize, timeout: Duration, body: F) -> Result<Vec<T>, CommError>
where
    T: Send,
    F: Fn(&InProcComm) -> Result<T, CommError> + Sync,
{
    assert!(size > 0, "world needs at least one rank");
    let shared = Arc::new(Shared {
        size,
        timeout,
        slots: Mutex::new(HashMap::new()),
        complete: Condvar::new(),
        mailboxes: (0..size).map(|_| Mailbox::default()).collect(),
        aborted: AtomicBool::new(false),
    });
    let results: Vec<Result<T, CommError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..size)
            .map(|rank| {
                let comm = InProcComm {
                    rank,
                    epoch: std::cell::Cell::new(0),
                    shared: Arc::clone(&shared),
                };
                let body = &body;
                let shared = Arc::clone(&shared);
                std::thread::Builder::new()
                    .name(format!("rank-{rank}"))
                    .spawn_scoped(scope, move || {
                        let out = std::panic::catch_unwind(AssertUnwindSafe(|| body(&comm)))
                            .unwrap_or(Err(CommError::RankPanicked(rank)));
                        if out.is_err() {
                            shared.abort();
                        }
                        out
                    })
                    .expect("spawn rank thread")
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(rank, h)| {
                h.join().unwrap_or_else(|_| {
                    shared.abort();
                    Err(CommError::RankPanicked(rank))
                })
            })
            .collect()
    });

    let mut first_abort = None;
    let mut out = Vec::with_capacity(size);
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(CommError::Aborted) => first_abort = Some(CommError::Aborted),
            Err(e) => return Err(e),
        }
    }
    match first_abort {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
