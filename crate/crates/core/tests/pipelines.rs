use std::collections::BTreeMap;
use std::process::Command;

use pwdlab::distlearn::amplification_count;
use pwdlab::harness::config::{bundled, BUNDLED};
use pwdlab::harness::report::csv_string;
use pwdlab::harness::{run_experiment, run_trial, PipelineKind, ScenarioSpec};
use pwdlab::model::{model_error, Concept, EvalMode, Gen};
use pwdlab::reductions::{forward_learn, gamma_dispatch, reverse_events, ProvenanceKind};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pwdlab"))
}

#[test]
fn one_trial_csv_is_byte_identical() {
    let mut spec = bundled("reverse-gaussian-unhealthy").unwrap();
    spec.trials = 2;
    let a = csv_string(&run_experiment(&spec, false).unwrap().rows).unwrap();
    let b = csv_string(&run_experiment(&spec, false).unwrap().rows).unwrap();
    assert_eq!(a, b);
    spec.seed += 1;
    let c = csv_string(&run_experiment(&spec, false).unwrap().rows).unwrap();
    assert_ne!(a, c);
}

#[test]
fn cli_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .args(["run", "--scenario", "reverse-gaussian-unhealthy", "--trials", "1", "--seed", "7", "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.csv"), run("b.csv"));
}

#[test]
fn malformed_config_exits_with_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{
            "name": "bad", "pipeline": "forward", "n": 4,
            "family": {"kind": "bernoulli-product", "k": 2},
            "concept": {"kind": "dictator", "variable": 1},
            "targets": {"kind": "explicit",
                "p0": {"family": "bernoulli-product", "biases": [0.5, 1.2]},
                "p1": {"family": "bernoulli-product", "biases": [0.5, 0.5]}}
        }"#,
    )
    .unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("targets.p0"), "{stderr}");
}

#[test]
fn unknown_subcommand_and_suite_are_usage_errors() {
    assert_eq!(bin().arg("sideways").status().unwrap().code(), Some(2));
    assert_eq!(bin().args(["verify", "nope"]).status().unwrap().code(), Some(2));
}

#[test]
fn failed_assertion_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = bundled("forward-product-easy").unwrap();
    spec.pipeline = PipelineKind::Direct;
    spec.trials = 2;
    let path = dir.path().join("direct.json");
    std::fs::write(&path, spec.to_json()).unwrap();
    let out = bin()
        .args(["run", "--assert", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_subcommand_emits_json() {
    let out = bin().args(["verify", "lab-identity"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v[0]["suite"], "lab-identity");
    assert_eq!(v[0]["passed"], true);
}

#[test]
fn events_subcommand_lists_the_product_class() {
    let out = bin().args(["events", "--scenario", "forward-product-easy"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["events"].as_array().unwrap().len(), 16);
}

#[test]
fn saved_scenarios_round_trip() {
    for (name, _) in BUNDLED {
        let spec = bundled(name).unwrap();
        let text = spec.to_json();
        let again = ScenarioSpec::from_json(&text).unwrap();
        assert_eq!(again.to_json(), text);
    }
}

#[test]
fn gamma_dispatch_covers_every_bundled_scenario() {
    for (name, _) in BUNDLED {
        let spec = bundled(name).unwrap();
        for t in 0..5 {
            let d = gamma_dispatch(&spec.target(t), &spec.pipeline_config()).unwrap();
            assert!(d.covered(), "{name} trial {t}: {d:?}");
        }
    }
}

#[test]
fn forward_list_bookkeeping_and_soundness() {
    let spec = bundled("forward-product-easy").unwrap();
    let target = spec.target(0);
    let gen = Gen::new(&target, spec.params.draw_budget);
    let cfg = spec.pipeline_config();
    let out = forward_learn(&gen, &cfg, spec.trial_seed(0).child(1)).unwrap();
    let r = amplification_count(cfg.delta).unwrap();

    // One group of entries per learned grid pair; a group holds one model per
    // pair of side fits, so r^2 when both sides were fed.
    let mut groups: BTreeMap<(usize, u64, u64), Vec<usize>> = BTreeMap::new();
    for e in &out.candidates.entries {
        if e.provenance.kind == ProvenanceKind::ForwardEvent {
            let p = &e.provenance;
            let key = (p.event.unwrap(), p.p_hat.unwrap().to_bits(), p.q_hat.unwrap().to_bits());
            groups.entry(key).or_default().push(e.model);
        }
    }
    assert_eq!(groups.len(), out.stats.pairs_learned);
    let mut full = 0;
    for models in groups.values() {
        let h = &out.candidates.models[models[0]].hypothesis;
        assert!([1, r, r * r].contains(&models.len()));
        if !matches!(h, Concept::ConstantZero | Concept::ConstantOne) && models.len() == r * r {
            full += 1;
        }
    }
    assert!(full > 0);
    assert_eq!(out.candidates.count(ProvenanceKind::ForwardDirect), r);
    let expected: usize = groups.values().map(Vec::len).sum::<usize>() + r;
    assert_eq!(out.candidates.len(), expected);
    assert_eq!(out.stats.pairs_learned + out.stats.pairs_skipped, out.stats.events * guess_pairs(cfg.xi.unwrap()));

    // The selected model is within 3 eps of the best candidate.
    let mut best = f64::INFINITY;
    for m in &out.candidates.models {
        best = best.min(model_error(&target, m, EvalMode::Exact).unwrap().value);
    }
    let chosen = model_error(&target, &out.chosen, EvalMode::Exact).unwrap().value;
    assert!(chosen <= best + 3.0 * cfg.epsilon, "{chosen} vs {best}");
    assert!(out.stats.draws_used <= spec.params.draw_budget);
}

fn guess_pairs(xi: f64) -> usize {
    pwdlab::cccn::guess_grid(xi).unwrap().pairs.len()
}

#[test]
fn reverse_builds_both_component_orders() {
    let spec = bundled("reverse-gaussian-easy").unwrap();
    let (row, out) = run_trial(&spec, 0, false).unwrap();
    let fit = out.stats.mixture.as_ref().unwrap();
    assert!(out.stats.health.as_ref().unwrap().healthy, "{:?} {:?}", out.stats.health, fit);
    let cfg = spec.pipeline_config();
    let events = reverse_events(fit, cfg.gamma(), cfg.bounds.m_cap, cfg.mixture_alpha).unwrap();
    for order in 0..2 {
        assert!(events.iter().any(|e| e.order == order && e.construction == "half-kl"));
    }
    assert!(out.candidates.count(ProvenanceKind::ReverseMixture) > 0);
    assert!(out.candidates.count(ProvenanceKind::ReverseDirect) > 0);
    assert!(row.err_t <= spec.params.epsilon);
}

#[test]
fn exhausted_budget_fails_loudly() {
    let mut spec = bundled("reverse-gaussian-unhealthy").unwrap();
    spec.params.draw_budget = 10_000;
    assert!(matches!(run_trial(&spec, 0, false), Err(pwdlab::Error::BudgetExhausted { .. })));
}
