//! Deterministic single-threaded discrete-event executor.
//!
//! All concurrent activities (clients, monitor, termination detector) are
//! `'static` futures driven by one scheduler that owns the virtual clock.
//! Events fire in `(time, sequence)` order, so a run is a pure function of
//! its configuration and seeds. Network latency is modeled by scheduling
//! closures at a later virtual time, never by real sleeping; an optional
//! pacing mode replays the same schedule against the wall clock.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::sync::{Arc, Mutex};
use std::task::{Context, Poll, Wake, Waker};

/// Simulated milliseconds.
pub type Ms = u64;

enum EventAction {
    Wake(Waker),
    Call(Box<dyn FnOnce()>),
}

struct Event {
    at: Ms,
    seq: u64,
    action: EventAction,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

type TaskFuture = Pin<Box<dyn Future<Output = ()>>>;

struct Inner {
    now: Ms,
    next_seq: u64,
    next_task: usize,
    events: BinaryHeap<Reverse<Event>>,
    tasks: std::collections::HashMap<usize, TaskFuture>,
}

struct TaskWaker {
    id: usize,
    ready: Arc<Mutex<VecDeque<usize>>>,
}

impl Wake for TaskWaker {
    fn wake(self: Arc<Self>) {
        self.ready.lock().unwrap().push_back(self.id);
    }
}

/// Handle to the simulation; cheap to clone and share within the thread.
#[derive(Clone)]
pub struct Sim {
    inner: Rc<RefCell<Inner>>,
    ready: Arc<Mutex<VecDeque<usize>>>,
}

impl Default for Sim {
    fn default() -> Self {
        Self::new()
    }
}

impl Sim {
    pub fn new() -> Self {
        Sim {
            inner: Rc::new(RefCell::new(Inner {
                now: 0,
                next_seq: 0,
                next_task: 0,
                events: BinaryHeap::new(),
                tasks: std::collections::HashMap::new(),
            })),
            ready: Arc::new(Mutex::new(VecDeque::new())),
        }
    }

    /// Current virtual time.
    pub fn now(&self) -> Ms {
        self.inner.borrow().now
    }

    /// Monotone event sequence counter; used by loggers to obtain a total
    /// order on records that share a timestamp.
    pub fn next_seq(&self) -> u64 {
        let mut inner = self.inner.borrow_mut();
        let s = inner.next_seq;
        inner.next_seq += 1;
        s
    }

    pub fn spawn(&self, fut: impl Future<Output = ()> + 'static) {
        let id = {
            let mut inner = self.inner.borrow_mut();
            let id = inner.next_task;
            inner.next_task += 1;
            inner.tasks.insert(id, Box::pin(fut));
            id
        };
        self.ready.lock().unwrap().push_back(id);
    }

    /// Schedule `f` to run at virtual time `at` (clamped to now).
    pub fn call_at(&self, at: Ms, f: impl FnOnce() + 'static) {
        let mut inner = self.inner.borrow_mut();
        let at = at.max(inner.now);
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.events.push(Reverse(Event {
            at,
            seq,
            action: EventAction::Call(Box::new(f)),
        }));
    }

    pub fn call_in(&self, delay: Ms, f: impl FnOnce() + 'static) {
        let at = self.now() + delay;
        self.call_at(at, f);
    }

    fn schedule_wake(&self, at: Ms, waker: Waker) {
        let mut inner = self.inner.borrow_mut();
        let at = at.max(inner.now);
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.events.push(Reverse(Event {
            at,
            seq,
            action: EventAction::Wake(waker),
        }));
    }

    pub fn sleep(&self, delay: Ms) -> Sleep {
        Sleep {
            sim: self.clone(),
            at: self.now() + delay,
            scheduled: false,
        }
    }

    pub fn sleep_until(&self, at: Ms) -> Sleep {
        Sleep {
            sim: self.clone(),
            at,
            scheduled: false,
        }
    }

    fn poll_task(&self, id: usize) {
        let fut = self.inner.borrow_mut().tasks.remove(&id);
        let Some(mut fut) = fut else { return };
        let waker = Waker::from(Arc::new(TaskWaker {
            id,
            ready: self.ready.clone(),
        }));
        let mut cx = Context::from_waker(&waker);
        if fut.as_mut().poll(&mut cx).is_pending() {
            self.inner.borrow_mut().tasks.insert(id, fut);
        }
    }

    fn drain_ready(&self) {
        loop {
            let id = self.ready.lock().unwrap().pop_front();
            match id {
                Some(id) => self.poll_task(id),
                None => break,
            }
        }
    }

    /// Run until the event queue is exhausted. Tasks still blocked on a
    /// channel that can never receive again are dropped. Returns the final
    /// virtual time.
    pub fn run(&self) -> Ms {
        self.run_paced(None)
    }

    /// Like [`run`](Sim::run) but, when `pace` is given, holds back event
    /// processing so one virtual millisecond takes `1.0 / pace` real
    /// milliseconds (pace 1.0 = real time). Timestamps stay virtual, so a
    /// paced run produces byte-identical outputs to an unpaced one.
    pub fn run_paced(&self, pace: Option<f64>) -> Ms {
        let start = std::time::Instant::now();
        loop {
            self.drain_ready();
            let (at, action) = {
                let mut inner = self.inner.borrow_mut();
                match inner.events.pop() {
                    None => return inner.now,
                    Some(Reverse(ev)) => {
                        inner.now = ev.at;
                        (ev.at, ev.action)
                    }
                }
            };
            if let Some(pace) = pace {
                let due = std::time::Duration::from_millis((at as f64 / pace) as u64);
                let elapsed = start.elapsed();
                if due > elapsed {
                    std::thread::sleep(due - elapsed);
                }
            }
            match action {
                EventAction::Wake(w) => w.wake(),
                EventAction::Call(f) => f(),
            }
        }
    }
}

pub struct Sleep {
    sim: Sim,
    at: Ms,
    scheduled: bool,
}

impl Future for Sleep {
    type Output = ();
    fn poll(mut self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<()> {
        if self.sim.now() >= self.at {
            return Poll::Ready(());
        }
        if !self.scheduled {
            self.sim.schedule_wake(self.at, cx.waker().clone());
            self.scheduled = true;
        }
        Poll::Pending
    }
}

/// Single-consumer channel for in-simulation message passing.
pub fn channel<T>() -> (Sender<T>, Receiver<T>) {
    let inner = Rc::new(RefCell::new(ChanInner {
        queue: VecDeque::new(),
        waker: None,
    }));
    (
        Sender {
            inner: inner.clone(),
        },
        Receiver { inner },
    )
}

struct ChanInner<T> {
    queue: VecDeque<T>,
    waker: Option<Waker>,
}

pub struct Sender<T> {
    inner: Rc<RefCell<ChanInner<T>>>,
}

impl<T> Clone for Sender<T> {
    fn clone(&self) -> Self {
        Sender {
            inner: self.inner.clone(),
        }
    }
}

impl<T> Sender<T> {
    pub fn send(&self, v: T) {
        let mut inner = self.inner.borrow_mut();
        inner.queue.push_back(v);
        if let Some(w) = inner.waker.take() {
            w.wake();
        }
    }
}

pub struct Receiver<T> {
    inner: Rc<RefCell<ChanInner<T>>>,
}

impl<T> Receiver<T> {
    pub fn recv(&self) -> Recv<'_, T> {
        Recv { chan: self }
    }

    pub fn try_recv(&self) -> Option<T> {
        self.inner.borrow_mut().queue.pop_front()
    }
}

pub struct Recv<'a, T> {
    chan: &'a Receiver<T>,
}

impl<T> Future for Recv<'_, T> {
    type Output = T;
    fn poll(self: Pin<&mut Self>, cx: &mut Context<'_>) -> Poll<T> {
        let mut inner = self.chan.inner.borrow_mut();
        match inner.queue.pop_front() {
            Some(v) => Poll::Ready(v),
            None => {
                inner.waker = Some(cx.waker().clone());
                Poll::Pending
            }
        }
    }
}

/// Shared stop flag: set once by the termination detector (or the wall-time
/// cap), polled by every activity.
#[derive(Clone, Default)]
pub struct StopSignal(Rc<std::cell::Cell<bool>>);

impl StopSignal {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn set(&self) {
        self.0.set(true);
    }
    pub fn is_set(&self) -> bool {
        self.0.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sleep_orders_by_time_then_seq() {
        let sim = Sim::new();
        let log: Rc<RefCell<Vec<(Ms, u32)>>> = Rc::new(RefCell::new(Vec::new()));
        for (i, d) in [(1u32, 30u64), (2, 10), (3, 10), (4, 20)] {
            let sim2 = sim.clone();
            let log2 = log.clone();
            sim.spawn(async move {
                sim2.sleep(d).await;
                log2.borrow_mut().push((sim2.now(), i));
            });
        }
        let end = sim.run();
        assert_eq!(end, 30);
        assert_eq!(*log.borrow(), vec![(10, 2), (10, 3), (20, 4), (30, 1)]);
    }

    #[test]
    fn call_at_runs_in_order_and_clamps_to_now() {
        let sim = Sim::new();
        let log: Rc<RefCell<Vec<u32>>> = Rc::new(RefCell::new(Vec::new()));
        let l1 = log.clone();
        let l2 = log.clone();
        let l3 = log.clone();
        let sim2 = sim.clone();
        sim.call_at(5, move || {
            l1.borrow_mut().push(1);
            // Stale target in the past: runs "now", after already-queued ties.
            sim2.call_at(0, move || l3.borrow_mut().push(3));
        });
        sim.call_at(5, move || l2.borrow_mut().push(2));
        sim.run();
        assert_eq!(*log.borrow(), vec![1, 2, 3]);
    }

    #[test]
    fn channel_wakes_receiver() {
        let sim = Sim::new();
        let (tx, rx) = channel::<u32>();
        let got: Rc<RefCell<Vec<(Ms, u32)>>> = Rc::new(RefCell::new(Vec::new()));
        let got2 = got.clone();
        let sim2 = sim.clone();
        sim.spawn(async move {
            for _ in 0..2 {
                let v = rx.recv().await;
                got2.borrow_mut().push((sim2.now(), v));
            }
        });
        let txc = tx.clone();
        sim.call_at(7, move || txc.send(41));
        sim.call_at(9, move || tx.send(42));
        sim.run();
        assert_eq!(*got.borrow(), vec![(7, 41), (9, 42)]);
    }

    #[test]
    fn identical_runs_produce_identical_traces() {
        fn trace() -> Vec<(Ms, u32)> {
            let sim = Sim::new();
            let log: Rc<RefCell<Vec<(Ms, u32)>>> = Rc::new(RefCell::new(Vec::new()));
            for i in 0..5u32 {
                let sim2 = sim.clone();
                let log2 = log.clone();
                sim.spawn(async move {
                    for round in 0..3u64 {
                        sim2.sleep(1 + (u64::from(i) + round) % 3).await;
                        log2.borrow_mut().push((sim2.now(), i));
                    }
                });
            }
            sim.run();
            let out = log.borrow().clone();
            out
        }
        assert_eq!(trace(), trace());
    }
}
