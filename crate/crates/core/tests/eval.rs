mod common;

use std::path::Path;

use scenesmith_core::eval::{
    compute_metrics, judge_case, metrics_from_counts, run_suite, run_suite_with, CaseOutcome, Check, Dataset, EvalError,
};
use scenesmith_core::llm::{BackendConfig, LlmBackend, ScriptedMock};
use scenesmith_core::plan::execute_plan;
use scenesmith_core::planner::{NonInteractive, Planner, PlannerOptions, PromptToggles};
use scenesmith_core::retrieval::MockEmbedder;
use scenesmith_core::{Action, ActionPlan};

fn smoke() -> Dataset {
    Dataset::load(&common::repo_root().join("fixtures/eval/smoke.json")).unwrap()
}

#[test]
fn smoke_suite_matches_the_hand_tally() {
    let registry = common::sample_registry();
    let report = run_suite(
        &smoke(),
        &registry,
        &MockEmbedder::default(),
        PlannerOptions::default(),
        &BackendConfig::replay(std::path::PathBuf::from("unused.json")),
    )
    .unwrap();
    let (total, executed, correct) = common::SMOKE_TALLY;
    let m = report.metrics;
    assert_eq!((m.total, m.executed, m.correct), (total, executed, correct));
    assert!((m.er_at_1 - 100.0 * executed as f64 / total as f64).abs() < 1e-9);
    assert!((m.sr_at_1 - 100.0 * correct as f64 / executed as f64).abs() < 1e-9);

    let by_id = |id: &str| report.cases.iter().find(|c| c.id == id).unwrap();
    assert!(!by_id("pond_boats").executed);
    assert!(by_id("pond_boats").error.as_deref().unwrap().contains("boat.layout"));
    let city = by_id("city_block");
    assert!(city.executed && !city.correct);
    assert_eq!(city.failed_checks.len(), 1);
    assert!(!by_id("crystal_cave").executed);
    let ids: Vec<&str> = report.cases.iter().map(|c| c.id.as_str()).collect();
    let order: Vec<String> = smoke().cases.iter().map(|c| c.id.clone()).collect();
    assert_eq!(ids, order, "outcomes follow dataset order");

    let md = report.to_markdown();
    assert!(md.contains("| 10 | 8 | 7 | 80.00 | 87.50 |"), "{md}");
    let again = run_suite(
        &smoke(),
        &registry,
        &MockEmbedder::default(),
        PlannerOptions::default(),
        &BackendConfig::replay(std::path::PathBuf::from("unused.json")),
    )
    .unwrap();
    assert_eq!(again.to_json(), report.to_json());
}

#[test]
fn checks_flag_outliers() {
    let registry = common::sample_registry();
    let plan = ActionPlan {
        seed: 0,
        actions: vec![
            Action::ImportAsset {
                id: "rock".into(),
                object: "rock".into(),
                asset: "rock_boulder_01".into(),
                transform: None,
                layout: Some("rock.layout".into()),
            },
            Action::PlaceLayout {
                id: "rock.layout".into(),
                object: "rock".into(),
                layout: scenesmith_core::layout::LayoutSpec::Grid {
                    origin: [10.0, 10.0],
                    rows: 1,
                    cols: 3,
                    spacing: 40.0,
                    jitter: 0.0,
                    seed: 0,
                },
                project_to_terrain: false,
            },
        ],
    };
    let (scene, report) = execute_plan(&plan, &registry);
    assert!(report.all_executed());
    let inside = Check::AllInside {
        object: Some("rock".into()),
        region: scenesmith_core::Region::rect([0.0, 0.0], [80.0, 80.0]),
    };
    let err = inside.evaluate(&scene, &plan).unwrap_err();
    assert!(err.contains("rock"), "{err}");
    assert!(Check::MinSeparation { object: None, distance: 39.9 }.evaluate(&scene, &plan).is_ok());
    assert!(Check::MinSeparation { object: None, distance: 40.1 }.evaluate(&scene, &plan).is_err());
    assert!(Check::HasTerrain.evaluate(&scene, &plan).is_err());
    assert!(Check::InstanceCount { object: None, min: 3, max: Some(3) }.evaluate(&scene, &plan).is_ok());
    assert!(Check::InstanceCount { object: Some("tree".into()), min: 1, max: None }.evaluate(&scene, &plan).is_err());

    let case = scenesmith_core::eval::EvalCase {
        id: "c".into(),
        description: "rocks".into(),
        checks: vec![inside, Check::ActionKinds { kinds: vec!["place_layout".into()] }],
        cassette: None,
    };
    let outcome = judge_case(&case, &scene, &plan, &report);
    assert!(outcome.executed && !outcome.correct);
    assert_eq!(outcome.failed_checks.len(), 1);
}

#[test]
fn metric_edge_cases() {
    assert!(matches!(compute_metrics(&[]), Err(EvalError::EmptyOutcomes)));
    let none = CaseOutcome { id: "a".into(), executed: false, correct: false, failed_checks: vec![], error: None };
    let m = compute_metrics(&[none]).unwrap();
    assert_eq!(m.er_at_1, 0.0);
    assert!(m.sr_undefined);
    let m = metrics_from_counts(3, 3, 1).unwrap();
    assert!((m.sr_at_1 - 100.0 / 3.0).abs() < 1e-9);
}

#[test]
fn dataset_validation() {
    let p = Path::new("d.json");
    assert!(Dataset::parse(r#"{"schema": "eval/1", "cases": []}"#, p).is_err());
    assert!(Dataset::parse(r#"{"schema": "eval/2", "cases": [{"id": "a", "description": "x", "checks": [{"check": "has_terrain"}]}]}"#, p).is_err());
    let dup = r#"{"schema": "eval/1", "cases": [
        {"id": "a", "description": "x", "checks": [{"check": "has_terrain"}]},
        {"id": "a", "description": "y", "checks": [{"check": "has_terrain"}]}]}"#;
    assert!(Dataset::parse(dup, p).unwrap_err().to_string().contains("duplicate"));
    let no_checks = r#"{"schema": "eval/1", "cases": [{"id": "a", "description": "x", "checks": []}]}"#;
    assert!(Dataset::parse(no_checks, p).is_err());
    let typo = r#"{"schema": "eval/1", "cases": [{"id": "a", "description": "x", "checks": [{"check": "has_terrain"}], "casette": "c"}]}"#;
    assert!(Dataset::parse(typo, p).is_err());
    let ok = r#"{"schema": "eval/1", "cases": [{"id": "a", "description": "x", "checks": [{"check": "has_terrain"}], "cassette": "c.json"}]}"#;
    let ds = Dataset::parse(ok, Path::new("/data/sets/d.json")).unwrap();
    assert_eq!(ds.cases[0].cassette.as_deref(), Some(Path::new("/data/sets/c.json")));
}

#[test]
fn backend_failures_count_as_not_executed() {
    let registry = common::sample_registry();
    let ds = smoke();
    let report = run_suite_with(&ds, &registry, &MockEmbedder::default(), PlannerOptions::default(), |_| {
        Ok(Box::new(ScriptedMock::new("m", Vec::<String>::new())) as Box<dyn LlmBackend>)
    })
    .unwrap();
    assert_eq!(report.metrics.executed, 0);
    assert!(report.metrics.sr_undefined);
    assert!(report.cases.iter().all(|c| c.error.is_some()));
}

#[test]
fn ablated_prompt_run_completes_from_its_own_cassette() {
    let registry = common::sample_registry();
    let embedder = MockEmbedder::default();
    let llm = BackendConfig::replay(common::repo_root().join("transcripts/pine_forest_no_examples.json")).build().unwrap();
    let opts = PlannerOptions {
        seed: 42,
        toggles: PromptToggles::from_components("R,T,D,F").unwrap(),
        ..PlannerOptions::default()
    };
    let out = Planner::new(&registry, llm.as_ref(), &embedder, opts)
        .unwrap()
        .generate("a pine forest by a lake", &mut NonInteractive)
        .unwrap();
    assert!(out.report.run.all_executed());
    assert!(out.report.planner.attempts.iter().any(|a| a.attempt > 1), "the ablated run needed retries");
    assert_eq!(out.report.planner.prompt_components, "R,T,D,F");

    // The same cassette does not match a full-prompt run.
    let llm = BackendConfig::replay(common::repo_root().join("transcripts/pine_forest_no_examples.json")).build().unwrap();
    assert!(Planner::new(&registry, llm.as_ref(), &embedder, common::options(42))
        .unwrap()
        .generate("a pine forest by a lake", &mut NonInteractive)
        .is_err());
}
