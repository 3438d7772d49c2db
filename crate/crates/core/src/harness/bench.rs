//! Scheduler benchmark: the same batch of simultaneous observations propagated
//! under each agenda policy, with activation counts and oracle deviations.

use std::io::{self, Write};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use super::generate::{random_polytree_with, seeded_rng, PolytreeConfig};
use super::HarnessError;
use crate::bms::{BeliefState, SchedulerPolicy, DEFAULT_TOLERANCE};
use crate::net::{exact_posterior, Evidence, NetError, VariableNetwork};

/// Largest belief deviation from the enumeration oracle a run may show.
pub const MAX_ORACLE_DEVIATION: f64 = 1e-6;

/// Activation counts published for a 24-node, 23-link tree given 8 simultaneous
/// observations. Shown next to measurements; never asserted.
pub const REFERENCE_COUNTS: [(SchedulerPolicy, u64); 3] = [
    (SchedulerPolicy::Lifo, 195),
    (SchedulerPolicy::Fifo, 108),
    (SchedulerPolicy::FifoDedup, 71),
];

pub const CSV_HEADER: &str = "seed,trial,policy,nodes,links,evidence,activations,micros";

#[derive(Clone, Debug, Serialize)]
pub struct PolicyRun {
    pub policy: SchedulerPolicy,
    pub activations: u64,
    pub micros: u64,
    /// `None` when the network is too large for the enumeration oracle.
    pub max_deviation: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkRecord {
    pub seed: u64,
    pub trial: usize,
    pub nodes: usize,
    pub links: usize,
    pub evidence: usize,
    pub runs: Vec<PolicyRun>,
    /// Largest belief difference between any two policies.
    pub policy_spread: f64,
    pub failure: Option<String>,
}

impl BenchmarkRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn activations(&self, policy: SchedulerPolicy) -> Option<u64> {
        self.runs
            .iter()
            .find(|r| r.policy == policy)
            .map(|r| r.activations)
    }
}

#[derive(Clone, Debug)]
pub struct TreeBenchConfig {
    pub nodes: usize,
    pub max_states: usize,
    pub evidence: usize,
    pub trials: usize,
    pub seed: u64,
    pub policies: Vec<SchedulerPolicy>,
    pub tolerance: f64,
}

impl TreeBenchConfig {
    pub fn new(nodes: usize, evidence: usize, trials: usize, seed: u64) -> Self {
        Self {
            nodes,
            max_states: 2,
            evidence,
            trials,
            seed,
            policies: SchedulerPolicy::ALL.to_vec(),
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_micros() as u64)
}

#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    (f(), 0)
}

fn trial_rng(seed: u64, trial: usize) -> rand_chacha::ChaCha8Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Picks `k` distinct leaves with random hard states, in posting order.
fn sample_evidence(
    network: &VariableNetwork,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Evidence>, HarnessError> {
    let leaves = network.leaves();
    if k > leaves.len() {
        return Err(HarnessError::NotEnoughLeaves {
            wanted: k,
            leaves: leaves.len(),
        });
    }
    Ok(sample(rng, leaves.len(), k)
        .into_iter()
        .map(|i| {
            let node = network.node(leaves[i]);
            let s = rng.gen_range(0..node.states.len());
            Evidence::hard(&node.id, &node.states[s])
        })
        .collect())
}

fn run_trial(
    network: &Arc<VariableNetwork>,
    evidence: &[Evidence],
    policies: &[SchedulerPolicy],
    tolerance: f64,
    seed: u64,
    trial: usize,
) -> BenchmarkRecord {
    let mut record = BenchmarkRecord {
        seed,
        trial,
        nodes: network.len(),
        links: network.link_count(),
        evidence: evidence.len(),
        runs: Vec::new(),
        policy_spread: 0.0,
        failure: None,
    };
    let mut base = BeliefState::init_equilibrium(Arc::clone(network));
    for e in evidence {
        if let Err(err) = base.post_evidence(e) {
            record.failure = Some(err.to_string());
            return record;
        }
    }
    let oracle = match exact_posterior(network, evidence) {
        Ok(m) => Some(m),
        Err(NetError::TooLarge(_)) => None,
        Err(err) => {
            record.failure = Some(format!("oracle: {err}"));
            return record;
        }
    };

    let mut beliefs: Vec<Vec<Vec<f64>>> = Vec::new();
    for &policy in policies {
        let mut state = base.clone();
        let (outcome, micros) = timed(|| state.propagate_to_equilibrium(policy, tolerance));
        let activations = match outcome {
            Ok(n) => n,
            Err(err) => {
                record.failure = Some(format!("{policy}: {err}"));
                return record;
            }
        };
        let bel: Vec<Vec<f64>> = (0..network.len())
            .map(|n| state.belief_at(n, false).map(<[f64]>::to_vec))
            .collect::<Result<_, _>>()
            .expect("agenda is empty after propagation");
        let max_deviation = oracle.as_ref().map(|m| {
            network
                .nodes()
                .iter()
                .zip(&bel)
                .flat_map(|(node, b)| b.iter().zip(&m[&node.id]).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        });
        if let Some(dev) = max_deviation {
            if dev > MAX_ORACLE_DEVIATION && record.failure.is_none() {
                record.failure = Some(format!("{policy}: deviation {dev:e} from oracle"));
            }
        }
        record.runs.push(PolicyRun {
            policy,
            activations,
            micros,
            max_deviation,
        });
        beliefs.push(bel);
    }
    for a in &beliefs {
        for b in &beliefs {
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                record.policy_spread = record.policy_spread.max((x - y).abs());
            }
        }
    }
    if record.policy_spread > 10.0 * tolerance && record.failure.is_none() {
        record.failure = Some(format!(
            "policies disagree by {:e}",
            record.policy_spread
        ));
    }
    record
}

/// `trials` independent evidence batches of `k` leaves on one network.
pub fn scheduler_benchmark(
    network: &Arc<VariableNetwork>,
    k: usize,
    policies: &[SchedulerPolicy],
    seed: u64,
    trials: usize,
) -> Result<Vec<BenchmarkRecord>, HarnessError> {
    (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let evidence = sample_evidence(network, k, &mut rng)?;
            Ok(run_trial(network, &evidence, policies, DEFAULT_TOLERANCE, seed, trial))
        })
        .collect()
}

/// A fresh random tree per trial. Trees with fewer than `evidence` leaves are
/// redrawn from the same trial stream.
pub fn random_tree_benchmark(config: &TreeBenchConfig) -> Result<Vec<BenchmarkRecord>, HarnessError> {
    if config.evidence > config.nodes.saturating_sub(1).max(1) {
        return Err(HarnessError::NotEnoughLeaves {
            wanted: config.evidence,
            leaves: config.nodes.saturating_sub(1).max(1),
        });
    }
    let shape = PolytreeConfig::tree(config.nodes, config.max_states);
    Ok((0..config.trials)
        .map(|trial| {
            let mut rng = trial_rng(config.seed, trial);
            let network = loop {
                let net = random_polytree_with(&shape, &mut rng);
                if net.leaves().len() >= config.evidence {
                    break Arc::new(net);
                }
            };
            let evidence = sample_evidence(&network, config.evidence, &mut rng)
                .expect("leaf count checked above");
            run_trial(
                &network,
                &evidence,
                &config.policies,
                config.tolerance,
                config.seed,
                trial,
            )
        })
        .collect())
}

pub fn write_csv<W: Write + ?Sized>(records: &[BenchmarkRecord], timing: bool, out: &mut W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        for run in &r.runs {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.seed,
                r.trial,
                run.policy,
                r.nodes,
                r.links,
                r.evidence,
                run.activations,
                if timing { run.micros } else { 0 }
            )?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchmarkSummary {
    pub trials: usize,
    pub failures: usize,
    /// Median activation count per policy over successful trials.
    pub medians: Vec<(SchedulerPolicy, f64)>,
    /// Trials where LIFO >= FIFO >= FIFO-dedup does not hold.
    pub ordering_violations: usize,
    pub max_policy_spread: f64,
    pub max_deviation: Option<f64>,
}

impl BenchmarkSummary {
    pub fn median(&self, policy: SchedulerPolicy) -> Option<f64> {
        self.medians
            .iter()
            .find(|(p, _)| *p == policy)
            .map(|&(_, m)| m)
    }

    /// Median counts satisfy LIFO >= FIFO >= FIFO-dedup.
    pub fn ordering_holds(&self) -> bool {
        match (
            self.median(SchedulerPolicy::Lifo),
            self.median(SchedulerPolicy::Fifo),
            self.median(SchedulerPolicy::FifoDedup),
        ) {
            (Some(l), Some(f), Some(d)) => l >= f && f >= d,
            _ => false,
        }
    }
}

fn median(mut values: Vec<u64>) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    }
}

pub fn summarize(records: &[BenchmarkRecord]) -> BenchmarkSummary {
    let ok: Vec<&BenchmarkRecord> = records.iter().filter(|r| !r.failed()).collect();
    let policies: Vec<SchedulerPolicy> = SchedulerPolicy::ALL
        .into_iter()
        .filter(|p| ok.iter().any(|r| r.activations(*p).is_some()))
        .collect();
    let medians = policies
        .iter()
        .map(|&p| (p, median(ok.iter().filter_map(|r| r.activations(p)).collect())))
        .collect();
    let ordering_violations = ok
        .iter()
        .filter(|r| {
            let get = |p| r.activations(p);
            match (
                get(SchedulerPolicy::Lifo),
                get(SchedulerPolicy::Fifo),
                get(SchedulerPolicy::FifoDedup),
            ) {
                (Some(l), Some(f), Some(d)) => !(l >= f && f >= d),
                _ => false,
            }
        })
        .count();
    let deviations: Vec<f64> = ok
        .iter()
        .flat_map(|r| r.runs.iter().filter_map(|run| run.max_deviation))
        .collect();
    BenchmarkSummary {
        trials: records.len(),
        failures: records.len() - ok.len(),
        medians,
        ordering_violations,
        max_policy_spread: ok.iter().map(|r| r.policy_spread).fold(0.0, f64::max),
        max_deviation: (!deviations.is_empty()).then(|| deviations.into_iter().fold(0.0, f64::max)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::VariableNode;

    fn chain(len: usize) -> Arc<VariableNetwork> {
        let mut nodes = vec![VariableNode::root("n0", "", &["a", "b"], vec![0.3, 0.7])];
        for i in 1..len {
            nodes.push(VariableNode::child(
                &format!("n{i}"),
                "",
                &["a", "b"],
                &[&format!("n{}", i - 1)],
                vec![vec![0.8, 0.2], vec![0.25, 0.75]],
            ));
        }
        Arc::new(VariableNetwork::new(nodes).unwrap())
    }

    #[test]
    fn single_evidence_on_a_chain_is_policy_independent() {
        let records = scheduler_benchmark(&chain(6), 1, &SchedulerPolicy::ALL, 1, 5).unwrap();
        for r in &records {
            assert!(!r.failed(), "{:?}", r.failure);
            let counts: Vec<u64> = r.runs.iter().map(|run| run.activations).collect();
            assert!(counts.windows(2).all(|w| w[0] == w[1]), "{counts:?}");
            assert!(r.runs.iter().all(|run| run.max_deviation.unwrap() < 1e-9));
        }
    }

    #[test]
    fn too_many_observations_is_an_error() {
        assert!(matches!(
            scheduler_benchmark(&chain(4), 2, &SchedulerPolicy::ALL, 1, 1),
            Err(HarnessError::NotEnoughLeaves { .. })
        ));
    }

    #[test]
    fn csv_shape_and_reproducibility() {
        let config = TreeBenchConfig::new(10, 3, 4, 11);
        let a = random_tree_benchmark(&config).unwrap();
        let b = random_tree_benchmark(&config).unwrap();
        let mut out_a = Vec::new();
        let mut out_b = Vec::new();
        write_csv(&a, false, &mut out_a).unwrap();
        write_csv(&b, false, &mut out_b).unwrap();
        assert_eq!(out_a, out_b);
        let text = String::from_utf8(out_a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn median_handles_even_counts() {
        assert_eq!(median(vec![4, 1, 3, 2]), 2.5);
        assert_eq!(median(vec![5, 1, 3]), 3.0);
    }
}
