use alloc::vec::Vec;

use crate::rng::CounterRng;

/// One environment step as seen by an off-policy learner.
///
/// `base` and `next_base` are the base-policy actions at `obs` and
/// `next_obs`; the executed action was `base + residual`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub base: Vec<f64>,
    pub residual: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub next_base: Vec<f64>,
    pub done: bool,
    pub truncated: bool,
}

/// Row-major minibatch.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Batch {
    pub len: usize,
    pub obs: Vec<f64>,
    pub base: Vec<f64>,
    pub residual: Vec<f64>,
    pub reward: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub next_base: Vec<f64>,
    pub done: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let mut b = Batch::default();
        for t in ts {
            b.push(t);
        }
        b
    }

    fn push(&mut self, t: &Transition) {
        self.len += 1;
        self.obs.extend_from_slice(&t.obs);
        self.base.extend_from_slice(&t.base);
        self.residual.extend_from_slice(&t.residual);
        self.reward.push(t.reward);
        self.next_obs.extend_from_slice(&t.next_obs);
        self.next_base.extend_from_slice(&t.next_base);
        self.done.push(if t.done { 1.0 } else { 0.0 });
    }
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::new(), head: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest-first iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (a, b) = self.items.split_at(self.head);
        b.iter().chain(a.iter())
    }

    /// Uniform sampling with replacement.
    pub fn sample(&self, n: usize, rng: &mut CounterRng) -> Batch {
        let mut b = Batch::default();
        if self.items.is_empty() {
            return b;
        }
        for _ in 0..n {
            b.push(&self.items[rng.below(self.items.len())]);
        }
        b
    }

    /// Rebuilds a buffer from oldest-first transitions.
    pub fn from_ordered(capacity: usize, ordered: Vec<Transition>) -> Self {
        let mut r = ReplayBuffer::new(capacity);
        for t in ordered {
            r.push(t);
        }
        r
    }
}
