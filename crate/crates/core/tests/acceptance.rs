//! Acceptance suite. Runs every top-level criterion and prints one PASS/FAIL
//! line each; exits nonzero if any fails.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use helm_core::bms::BeliefState;
use helm_core::compiler::{compile_bms, compile_prospector, CLASS_NODE};
use helm_core::harness::{
    compare_engines, random_naive_bayes, random_polytree_with, random_tree_benchmark, seeded_rng,
    single_attribute_cases, summarize, PolytreeConfig, TreeBenchConfig, REFERENCE_COUNTS,
};
use helm_core::merit::{answer_outcomes, merit, StateTarget};
use helm_core::net::{exact_posterior, save_network, Evidence, Network, VariableNetwork};
use helm_core::prospector::PropositionState;
use helm_core::session::Session;
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn max_belief_error(state: &BeliefState, net: &VariableNetwork, evidence: &[Evidence]) -> Result<f64, String> {
    let exact = exact_posterior(net, evidence).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (n, node) in net.nodes().iter().enumerate() {
        let bel = state.belief_at(n, false).map_err(|e| e.to_string())?;
        for (x, y) in bel.iter().zip(&exact[&node.id]) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

fn random_evidence(net: &VariableNetwork, rng: &mut impl Rng) -> Vec<Evidence> {
    let count = rng.gen_range(0..=net.len().min(4));
    let mut picked: Vec<usize> = (0..net.len()).collect();
    picked.shuffle(rng);
    picked
        .into_iter()
        .take(count)
        .map(|n| {
            let node = net.node(n);
            let k = node.states.len();
            match rng.gen_range(0..3) {
                0 if k == 2 => Evidence::graded(&node.id, rng.gen_range(0.05..0.95)),
                1 => Evidence::virtual_likelihood(&node.id, (0..k).map(|_| rng.gen_range(0.05..1.0)).collect()),
                _ => Evidence::hard(&node.id, &node.states[rng.gen_range(0..k)]),
            }
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    const TREES: u64 = 500;
    let mut rng = seeded_rng(2024);
    let mut worst: f64 = 0.0;
    let mut multi_parent = 0;
    for _ in 0..TREES {
        let config = PolytreeConfig {
            nodes: rng.gen_range(1..=12),
            max_states: 4,
            flip_probability: 0.4,
            max_parents: 3,
        };
        let net = Arc::new(random_polytree_with(&config, &mut rng));
        if (0..net.len()).any(|n| net.parents_of(n).len() > 1) {
            multi_parent += 1;
        }
        let evidence = random_evidence(&net, &mut rng);
        let mut state = BeliefState::init_equilibrium(Arc::clone(&net));
        for e in &evidence {
            state.post_evidence(e).map_err(|e| e.to_string())?;
        }
        state.propagate().map_err(|e| e.to_string())?;
        worst = worst.max(max_belief_error(&state, &net, &evidence)?);
    }
    check(
        worst <= 1e-6,
        format!("{TREES} polytrees ({multi_parent} with multi-parent nodes), max |BEL - exact| = {worst:.2e} (tol 1e-6)"),
    )
}

fn prospector_exactness() -> Outcome {
    let mut worst: f64 = 0.0;
    let model = stern_model();
    let props = Arc::new(compile_prospector(&model).map_err(|e| e.to_string())?);
    let vars = compile_bms(&model).map_err(|e| e.to_string())?;
    let classes = model.class_ids();
    for obs in model.observations() {
        for (state, value) in [("detected", 1.0), ("not-detected", 0.0)] {
            let mut p = PropositionState::new(Arc::clone(&props));
            p.post_graded_evidence(&obs.id, value).map_err(|e| e.to_string())?;
            p.propagate();
            let exact = exact_posterior(&vars, &[Evidence::hard(&obs.id, state)]).map_err(|e| e.to_string())?;
            for (ci, c) in classes.iter().enumerate() {
                worst = worst.max((p.probability(c).unwrap() - exact[CLASS_NODE][ci]).abs());
            }
        }
    }
    let stern_worst = worst;
    const MODELS: u64 = 100;
    for seed in 0..MODELS {
        let (props, vars) = random_naive_bayes(seed);
        let props = Arc::new(props);
        for f in 1..vars.len() {
            let id = &vars.node(f).id;
            for (state, value) in [("true", 1.0), ("false", 0.0)] {
                let mut p = PropositionState::new(Arc::clone(&props));
                p.post_graded_evidence(id, value).map_err(|e| e.to_string())?;
                p.propagate();
                let exact = exact_posterior(&vars, &[Evidence::hard(id, state)]).map_err(|e| e.to_string())?;
                worst = worst.max((p.probability("c").unwrap() - exact["c"][0]).abs());
            }
        }
    }
    check(
        worst <= 1e-6,
        format!("stern model max error {stern_worst:.2e}; with {MODELS} naive-Bayes models max error {worst:.2e} (tol 1e-6)"),
    )
}

fn engine_agreement() -> Outcome {
    let model = stern();
    let cases = single_attribute_cases(&model);
    let report = compare_engines(&model, &cases).map_err(|e| e.to_string())?;
    let tops: Vec<String> = report
        .cases
        .iter()
        .map(|c| format!("{}={}", c.evidence[0].node.trim_start_matches("stern-appears-"), c.bms[0].0))
        .collect();
    check(
        cases.len() == 6 && report.top_agreements == 6,
        format!(
            "{}/{} single-attribute cases agree on the top class [{}]; mean rank difference {:.2}",
            report.top_agreements,
            cases.len(),
            tops.join(", "),
            report.mean_rank_difference
        ),
    )
}

fn scheduler_ordering() -> Outcome {
    let started = Instant::now();
    let records = random_tree_benchmark(&TreeBenchConfig::new(24, 8, 100, 7)).map_err(|e| e.to_string())?;
    let summary = summarize(&records);
    let elapsed = started.elapsed().as_secs_f64();
    let medians: Vec<String> = summary
        .medians
        .iter()
        .map(|(p, m)| format!("{p} {m}"))
        .collect();
    let reference: Vec<String> = REFERENCE_COUNTS.iter().map(|(p, c)| format!("{p} {c}")).collect();
    check(
        summary.failures == 0 && summary.ordering_holds() && summary.max_policy_spread <= 1e-8 && elapsed < 30.0,
        format!(
            "medians [{}] (reference [{}]); {} per-trial ordering violations; policy spread {:.1e}; oracle deviation {:.1e}; {} failures; {elapsed:.1}s",
            medians.join(", "),
            reference.join(", "),
            summary.ordering_violations,
            summary.max_policy_spread,
            summary.max_deviation.unwrap_or(f64::NAN),
            summary.failures
        ),
    )
}

/// `sum_a P(a) |q_a - q_now|` from exact enumeration alone.
fn brute_force_delta(net: &VariableNetwork, evidence: &[Evidence], q: &str, target: &StateTarget) -> f64 {
    let ti = net.index_of(&target.node).unwrap();
    let si = net.node(ti).state_index(&target.state).unwrap();
    let now = exact_posterior(net, evidence).unwrap();
    let qi = net.index_of(q).unwrap();
    let mut delta = 0.0;
    for (k, s) in net.node(qi).states.iter().enumerate() {
        let p = now[q][k];
        if p <= 1e-15 {
            continue;
        }
        let mut with = evidence.to_vec();
        with.push(Evidence::hard(q, s));
        let after = exact_posterior(net, &with).unwrap();
        delta += p * (after[&target.node][si] - now[&target.node][si]).abs();
    }
    delta
}

struct MeritStats {
    questions: usize,
    worst: f64,
    worst_martingale: f64,
}

fn check_merits(
    stats: &mut MeritStats,
    net: &Arc<VariableNetwork>,
    evidence: &[Evidence],
    target: &StateTarget,
    questions: &[String],
) -> Result<(), String> {
    let mut state = BeliefState::init_equilibrium(Arc::clone(net));
    for e in evidence {
        state.post_evidence(e).map_err(|e| e.to_string())?;
    }
    state.propagate().map_err(|e| e.to_string())?;
    let now = helm_core::merit::WhatIf::tracked(&state, target).map_err(|e| e.to_string())?;
    for q in questions {
        if evidence.iter().any(|e| &e.node == q) {
            continue;
        }
        let record = merit(&state, q, target).map_err(|e| e.to_string())?;
        let cost = net.node(net.index_of(q).unwrap()).cost;
        let expected = brute_force_delta(net, evidence, q, target) / cost;
        stats.worst = stats.worst.max((record.merit - expected).abs());
        let outcomes = answer_outcomes(&state, q, target).map_err(|e| e.to_string())?;
        let drift: f64 = outcomes.iter().map(|o| o.probability * (o.tracked - now)).sum();
        stats.worst_martingale = stats.worst_martingale.max(drift.abs());
        stats.questions += 1;
    }
    Ok(())
}

fn merit_correctness() -> Outcome {
    let mut stats = MeritStats {
        questions: 0,
        worst: 0.0,
        worst_martingale: 0.0,
    };
    // stern model: every question, fresh and after each possible first answer
    let model = stern();
    let net = Arc::clone(&model.variables);
    let mut starts: Vec<Vec<Evidence>> = vec![vec![]];
    for case in single_attribute_cases(&model) {
        starts.push(case);
    }
    for evidence in &starts {
        let mut session = Session::start("m", Arc::clone(&model), helm_core::session::EngineKind::Bms);
        for e in evidence {
            session.volunteer(e.clone()).map_err(|e| e.to_string())?;
        }
        let top = session.ranking().map_err(|e| e.to_string())?[0].0.clone();
        let target = StateTarget::new(CLASS_NODE, &top);
        check_merits(&mut stats, &net, evidence, &target, &model.askables())?;
        // the session asks the brute-force argmax (lowest id among ties)
        if let Some(q) = session.ask().map_err(|e| e.to_string())? {
            let mut best: Option<(f64, String)> = None;
            let mut ids: Vec<&String> = model.observations.iter().map(|o| &o.id).collect();
            ids.sort();
            for id in ids {
                if evidence.iter().any(|e| &e.node == id) {
                    continue;
                }
                let d = brute_force_delta(&net, evidence, id, &target);
                if best.as_ref().is_none_or(|(b, _)| d > b + 1e-12) {
                    best = Some((d, id.clone()));
                }
            }
            if best.map(|b| b.1) != Some(q.question.clone()) {
                return Err(format!("session asked {} but brute force prefers another", q.question));
            }
        }
    }
    let stern_questions = stats.questions;
    const TREES: u64 = 50;
    let mut rng = seeded_rng(77);
    for _ in 0..TREES {
        let config = PolytreeConfig {
            nodes: rng.gen_range(2..=8),
            max_states: 3,
            flip_probability: 0.4,
            max_parents: 2,
        };
        let mut net = random_polytree_with(&config, &mut rng);
        // uneven costs exercise the division
        let mut nodes = net.nodes().to_vec();
        for node in &mut nodes {
            node.cost = rng.gen_range(1..=4) as f64 / 2.0;
        }
        net = VariableNetwork::new(nodes).map_err(|e| e.to_string())?;
        let net = Arc::new(net);
        let mut evidence = random_evidence(&net, &mut rng);
        evidence.truncate(2);
        let t = rng.gen_range(0..net.len());
        let node = net.node(t);
        let target = StateTarget::new(&node.id, &node.states[rng.gen_range(0..node.states.len())]);
        evidence.retain(|e| e.node != target.node);
        let questions: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).collect();
        check_merits(&mut stats, &net, &evidence, &target, &questions)?;
    }
    check(
        stats.worst <= 1e-9 && stats.worst_martingale < 1e-6,
        format!(
            "{} questions ({stern_questions} on the stern model, rest on {TREES} polytrees): max |merit - brute force| = {:.2e} (tol 1e-9), max martingale drift {:.2e} (tol 1e-6)",
            stats.questions, stats.worst, stats.worst_martingale
        ),
    )
}

fn compiler_goldens() -> Outcome {
    let model = stern_model();
    let bms = compile_bms(&model).map_err(|e| e.to_string())?;
    let mut mismatched = Vec::new();
    for (kind, text) in [
        ("bms", save_network(&Network::Variable(bms.clone()))),
        ("prospector", save_network(&Network::Proposition(compile_prospector(&model).map_err(|e| e.to_string())?))),
    ] {
        let path = repo_root().join(format!("models/golden/stern-plan-view.{kind}.json"));
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if golden != text {
            mismatched.push(kind);
        }
    }
    let stern = bms.node(bms.index_of("stern").unwrap());
    let entry = |obs: &str, ty: &str| {
        let row = stern.state_index(ty).unwrap();
        bms.node(bms.index_of(obs).unwrap()).table[row][0]
    };
    let tapered = entry("stern-appears-tapered", "sverdlov");
    let square = entry("stern-appears-square", "sverdlov");
    let round = entry("stern-appears-round", "virginia");
    check(
        mismatched.is_empty() && tapered == 1.0 && square == 0.1 && round == 0.0,
        format!(
            "goldens {}; tapered|sverdlov = {tapered}, square|sverdlov = {square}, round|virginia = {round}",
            if mismatched.is_empty() { "identical".to_string() } else { format!("differ: {mismatched:?}") }
        ),
    )
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn session_replay() -> Outcome {
    let mut replay_worst: f64 = 0.0;
    let mut permuted_worst: f64 = 0.0;
    let mut orders = 0;
    for i in 0..FIXTURES {
        let fixture = load_fixture(i);
        let model = model_named(&fixture.model);
        let replayed = Session::replay("r", Arc::clone(&model), fixture.engine, fixture.journal.clone())
            .map_err(|e| format!("journal {i}: {e}"))?
            .beliefs()
            .map_err(|e| e.to_string())?;
        let diff = |b: &std::collections::BTreeMap<String, Vec<f64>>| {
            fixture
                .beliefs
                .iter()
                .flat_map(|(id, v)| v.iter().zip(&b[id]).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        };
        replay_worst = replay_worst.max(diff(&replayed));
        for mut order in permutations(&fixture.journal) {
            for (k, e) in order.iter_mut().enumerate() {
                e.seq = k as u64 + 1;
            }
            let beliefs = Session::replay("p", Arc::clone(&model), fixture.engine, order)
                .map_err(|e| format!("journal {i}: {e}"))?
                .beliefs()
                .map_err(|e| e.to_string())?;
            permuted_worst = permuted_worst.max(diff(&beliefs));
            orders += 1;
        }
    }
    check(
        replay_worst <= 1e-9 && permuted_worst <= 1e-6,
        format!(
            "{FIXTURES} journals: replay max error {replay_worst:.2e} (tol 1e-9); {orders} evidence orders max error {permuted_worst:.2e} (tol 1e-6)"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("oracle equivalence (bms)", oracle_equivalence),
        ("prospector exactness", prospector_exactness),
        ("engine agreement", engine_agreement),
        ("scheduler ordering", scheduler_ordering),
        ("merit correctness", merit_correctness),
        ("compiler goldens", compiler_goldens),
        ("session replay", session_replay),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
