use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Order in which activated nodes are taken off the agenda.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerPolicy {
    /// Stack: last activated, first updated.
    Lifo,
    /// Queue; a node activated twice is queued twice.
    Fifo,
    /// Queue holding each node at most once. A re-activated node moves to the back.
    FifoDedup,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 3] = [
        SchedulerPolicy::Lifo,
        SchedulerPolicy::Fifo,
        SchedulerPolicy::FifoDedup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerPolicy::Lifo => "lifo",
            SchedulerPolicy::Fifo => "fifo",
            SchedulerPolicy::FifoDedup => "fifo-dedup",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lifo" | "stack" => Ok(SchedulerPolicy::Lifo),
            "fifo" => Ok(SchedulerPolicy::Fifo),
            "fifo-dedup" => Ok(SchedulerPolicy::FifoDedup),
            other => Err(format!(
                "unknown policy `{other}` (expected lifo, fifo or fifo-dedup)"
            )),
        }
    }
}

/// Pending activations.
#[derive(Clone, Debug)]
pub struct Agenda {
    policy: SchedulerPolicy,
    queue: VecDeque<usize>,
    /// Membership flags, maintained for the dedup policy only.
    queued: Vec<bool>,
}

impl Agenda {
    pub fn new(policy: SchedulerPolicy, nodes: usize) -> Self {
        Self {
            policy,
            queue: VecDeque::new(),
            queued: vec![false; nodes],
        }
    }

    pub fn push(&mut self, node: usize) {
        if self.policy == SchedulerPolicy::FifoDedup {
            if self.queued[node] {
                let at = self
                    .queue
                    .iter()
                    .position(|&n| n == node)
                    .expect("queued flag tracks queue contents");
                self.queue.remove(at);
            }
            self.queued[node] = true;
        }
        self.queue.push_back(node);
    }

    pub fn pop(&mut self) -> Option<usize> {
        let node = match self.policy {
            SchedulerPolicy::Lifo => self.queue.pop_back(),
            SchedulerPolicy::Fifo | SchedulerPolicy::FifoDedup => self.queue.pop_front(),
        }?;
        self.queued[node] = false;
        Some(node)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Entries in pop order for FIFO policies, reverse pop order for LIFO.
    pub fn entries(&self) -> impl Iterator<Item = usize> + '_ {
        self.queue.iter().copied()
    }
}
