//! The plan-view stern model end to end: compilation, both engines, sessions.

mod common;

use std::sync::Arc;

use common::*;
use helm_core::compiler::{class_priors, compile_bms, compile_prospector, fit_id, CLASS_NODE};
use helm_core::net::{
    exact_posterior, load_network, save_network, validate, Evidence, EvidenceForm, Network,
};
use helm_core::prospector::{PropositionState, EPSILON};
use helm_core::session::{EngineKind, Session, SessionStatus, StopReason};

const TAPERED: &str = "stern-appears-tapered";
const ROUND: &str = "stern-appears-round";
const SQUARE: &str = "stern-appears-square";

fn golden_path(kind: &str) -> std::path::PathBuf {
    repo_root().join(format!("models/golden/stern-plan-view.{kind}.json"))
}

#[test]
fn goldens() {
    let model = stern_model();
    let bms = save_network(&Network::Variable(compile_bms(&model).unwrap()));
    let prospector = save_network(&Network::Proposition(compile_prospector(&model).unwrap()));
    for (kind, text) in [("bms", bms), ("prospector", prospector)] {
        let path = golden_path(kind);
        if blessing() {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &text).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert!(golden == text, "{} differs from the compiled network", path.display());
    }
}

#[test]
fn bms_structure_and_table_entries() {
    let net = compile_bms(&stern_model()).unwrap();
    assert_eq!(net.len(), 5);
    assert_eq!(net.link_count(), 4);
    let class = net.require(CLASS_NODE).unwrap();
    assert_eq!(net.cardinality(class), 10);
    assert_eq!(net.cardinality(net.require("stern").unwrap()), 5);
    let stern = net.node(net.require("stern").unwrap());
    let sverdlov = stern.state_index("sverdlov").unwrap();
    let virginia = stern.state_index("virginia").unwrap();
    let row = |obs: &str, ty: usize| net.node(net.require(obs).unwrap()).table[ty].clone();
    assert_eq!(row(TAPERED, sverdlov)[0], 1.0);
    assert_eq!(row(SQUARE, sverdlov)[0], 0.1);
    assert_eq!(row(ROUND, virginia)[0], 0.0);
    assert_eq!(row(SQUARE, virginia)[0], 1.0);
    assert!(validate(&Network::Variable(net.clone())).is_valid());

    let text = save_network(&Network::Variable(net.clone()));
    let back = load_network(&text).unwrap();
    assert_eq!(back.as_variable().unwrap(), &net);
}

#[test]
fn prospector_parameters_match_counting() {
    let model = stern_model();
    let props = compile_prospector(&model).unwrap();
    assert!(validate(&Network::Proposition(props.clone())).is_valid());
    let text = save_network(&Network::Proposition(props.clone()));
    assert_eq!(load_network(&text).unwrap().as_proposition().unwrap(), &props);

    let observations = model.observations();
    let priors = class_priors(&model).unwrap();
    for (k, obs) in observations.iter().enumerate() {
        let p_e = counting_detection(&model, k);
        let leaf = props.node(props.require(&obs.id).unwrap());
        assert!((leaf.prior - p_e).abs() < 1e-12, "{}", obs.id);
        let seen = counting_posterior(&model, &[(k, true)]);
        let unseen = counting_posterior(&model, &[(k, false)]);
        for (ci, class) in model.classes.iter().enumerate() {
            let link = props
                .links()
                .iter()
                .find(|l| l.antecedent == obs.id && l.consequent == fit_id("stern", &class.id))
                .unwrap();
            let clamp = |p: f64| p.clamp(EPSILON, 1.0 - EPSILON);
            assert!((link.lambda1 - clamp(seen[ci])).abs() < 1e-12, "{} {}", obs.id, class.id);
            assert!((link.lambda2 - clamp(unseen[ci])).abs() < 1e-12, "{} {}", obs.id, class.id);
        }
    }
    assert!((counting_detection(&model, 2) - 0.1).abs() < 1e-12);
    assert!((counting_detection(&model, 1) - 0.47).abs() < 1e-12);
    assert!((counting_detection(&model, 0) - 0.12).abs() < 1e-12);
    assert!(priors.iter().all(|&p| p == 0.1));

    let link = |from: &str, to: &str| {
        props
            .links()
            .iter()
            .find(|l| l.antecedent == from && l.consequent == fit_id("stern", to))
            .unwrap()
            .clone()
    };
    let tapered = link(TAPERED, "sverdlov");
    assert_eq!((tapered.lambda1, tapered.lambda2), (1.0 - EPSILON, EPSILON));
    let round = link(ROUND, "belknap");
    assert!((round.lambda1 - 0.1 / 0.47).abs() < 1e-12);
    assert!((round.lambda1 - 0.2128).abs() < 1e-4);
}

#[test]
fn both_compilations_share_one_joint() {
    let model = stern_model();
    let net = compile_bms(&model).unwrap();
    let ids = model.class_ids();
    for (k, obs) in model.observations().iter().enumerate() {
        for (state, seen) in [("detected", true), ("not-detected", false)] {
            let exact = exact_posterior(&net, &[Evidence::hard(&obs.id, state)]).unwrap();
            let counted = counting_posterior(&model, &[(k, seen)]);
            for (ci, _) in ids.iter().enumerate() {
                assert!((exact[CLASS_NODE][ci] - counted[ci]).abs() < 1e-9);
            }
        }
    }
}

fn prospector_state() -> PropositionState {
    PropositionState::new(Arc::new(compile_prospector(&stern_model()).unwrap()))
}

#[test]
fn prospector_graded_evidence() {
    let mut state = prospector_state();
    state.post_graded_evidence(TAPERED, 1.0).unwrap();
    state.propagate();
    assert_eq!(state.probability(TAPERED).unwrap(), 1.0 - EPSILON);

    let mut neutral = prospector_state();
    let before = neutral.snapshot();
    let prior = neutral.probability(ROUND).unwrap();
    neutral.post_graded_evidence(ROUND, prior).unwrap();
    neutral.propagate();
    for (id, p) in neutral.snapshot() {
        assert!((p - before[&id]).abs() < 1e-12, "{id}");
    }

    let mut graded = prospector_state();
    let base = graded.probability("sverdlov").unwrap();
    graded.post_graded_evidence(TAPERED, 0.75).unwrap();
    graded.propagate();
    let after = graded.probability("sverdlov").unwrap();
    assert!(after > base);
    let net = compile_bms(&stern_model()).unwrap();
    let exact = exact_posterior(&net, &[Evidence::graded(TAPERED, 0.75)]).unwrap();
    let sverdlov = stern_model().class_ids().iter().position(|c| c == "sverdlov").unwrap();
    assert!(exact[CLASS_NODE][sverdlov] > 0.1);
}

#[test]
fn prospector_rankings() {
    let state = prospector_state();
    let ranking = state.rank_classes().unwrap();
    let ids: Vec<&str> = ranking.iter().map(|(id, _)| id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    assert!(ranking.iter().all(|(_, p)| (p - 0.1).abs() < 1e-12));

    let mut tapered = prospector_state();
    tapered.post_graded_evidence(TAPERED, 1.0).unwrap();
    tapered.propagate();
    assert_eq!(tapered.rank_classes().unwrap()[0].0, "sverdlov");

    let mut round = prospector_state();
    round.post_graded_evidence(ROUND, 1.0).unwrap();
    round.propagate();
    let ranking = round.rank_classes().unwrap();
    let position = |id: &str| ranking.iter().position(|(c, _)| c == id).unwrap();
    let model = stern_model();
    let comp = &model.components[0];
    for class in &model.classes {
        if comp.weights[&comp.membership[&class.id]]["round"] > 0 {
            assert!(position("virginia") > position(&class.id), "{}", class.id);
        }
    }
}

#[test]
fn sessions_on_the_stern_model() {
    let bms = Session::start("b", stern(), EngineKind::Bms);
    let ranking = bms.ranking().unwrap();
    assert_eq!(ranking[0].0, "bainbridge");
    assert!(ranking.iter().all(|(_, p)| (p - 0.1).abs() < 1e-12));
    let prospector = Session::start("p", stern(), EngineKind::Prospector);
    assert!(prospector.ranking().unwrap().iter().all(|(_, p)| (p - 0.1).abs() < 1e-12));

    for kind in EngineKind::ALL {
        let mut s = Session::start("s", stern(), kind);
        s.volunteer(Evidence::hard(TAPERED, "detected")).unwrap();
        assert_eq!(s.ranking().unwrap()[0].0, "sverdlov", "{kind}");

        let mut u = Session::start("u", stern(), kind);
        let before = u.ranking().unwrap();
        u.volunteer(Evidence::virtual_likelihood(ROUND, vec![1.0, 1.0])).unwrap();
        let after = u.ranking().unwrap();
        assert_eq!(before.len(), after.len());
        for ((a, p), (b, q)) in before.iter().zip(&after) {
            assert_eq!(a, b);
            assert!((p - q).abs() < 1e-12);
        }
    }
}

#[test]
fn invalid_model_is_rejected_with_a_reason() {
    let text = stern_text().replace("\"tapered\": 10", "\"tapered\": 12");
    let err = helm_core::session::CompiledModel::from_json("bad", &text).unwrap_err();
    assert!(err.to_string().contains("outside 0..=10"), "{err}");
}

#[test]
fn questions_run_out() {
    for kind in EngineKind::ALL {
        let mut s = Session::start("s", stern(), kind);
        for q in [SQUARE, ROUND, TAPERED] {
            s.answer(q, EvidenceForm::Hard("not-detected".into())).unwrap();
        }
        assert!(s.ask().unwrap().is_none(), "{kind}");
        assert_eq!(
            s.stop_check(1.01).unwrap(),
            SessionStatus::Stopped(StopReason::Exhausted)
        );
    }
}

#[test]
fn stop_thresholds() {
    // round seen, square not: Belknap and Leahy lead
    let mut s = Session::start("s", stern(), EngineKind::Bms);
    s.volunteer(Evidence::hard(TAPERED, "detected")).unwrap();
    let top = s.ranking().unwrap()[0].1;
    assert!(top >= 0.95);
    assert_eq!(s.stop_check(0.95).unwrap(), SessionStatus::Stopped(StopReason::Confident));

    let mut never = Session::start("n", stern(), EngineKind::Bms);
    never.volunteer(Evidence::hard(TAPERED, "detected")).unwrap();
    assert_eq!(never.stop_check(1.01).unwrap(), SessionStatus::Active);
    never.answer(ROUND, EvidenceForm::Hard("not-detected".into())).unwrap();
    never.answer(SQUARE, EvidenceForm::Hard("not-detected".into())).unwrap();
    assert_eq!(
        never.stop_check(1.01).unwrap(),
        SessionStatus::Stopped(StopReason::Exhausted)
    );
    let err = never.volunteer(Evidence::hard(ROUND, "detected")).unwrap_err();
    assert_eq!(err.code(), "session-stopped");

    let mut low = Session::start("l", stern(), EngineKind::Bms);
    low.answer(ROUND, EvidenceForm::Hard("detected".into())).unwrap();
    low.answer(SQUARE, EvidenceForm::Hard("not-detected".into())).unwrap();
    low.answer(TAPERED, EvidenceForm::Hard("not-detected".into())).unwrap();
    assert!(low.ranking().unwrap()[0].1 < 0.95);
    assert_eq!(low.stop_check(0.95).unwrap(), SessionStatus::Stopped(StopReason::Exhausted));
}
