mod common;

use scenesmith_core::layout::LayoutSpec;
use scenesmith_core::plan::{execute_on, execute_plan, validate_plan, DiagnosticCode, PlanError, INVOCATION_KEY};
use scenesmith_core::registry::{ParamValue, ParamValues};
use scenesmith_core::{Action, ActionPlan, Region, SceneGraph, TerrainParams};

fn terrain(h: f64) -> Action {
    Action::GenerateTerrain { id: "terrain".into(), params: TerrainParams::flat(20.0, 11, h) }
}

fn asset(id: &str, asset: &str, layout: Option<&str>) -> Action {
    Action::ImportAsset {
        id: id.into(),
        object: id.into(),
        asset: asset.into(),
        transform: None,
        layout: layout.map(str::to_string),
    }
}

fn grid(id: &str, source: &str, rows: usize, cols: usize, project: bool) -> Action {
    Action::PlaceLayout {
        id: id.into(),
        object: source.into(),
        layout: LayoutSpec::Grid { origin: [5.0, 5.0], rows, cols, spacing: 4.0, jitter: 0.0, seed: 0 },
        project_to_terrain: project,
    }
}

fn codes(plan: &ActionPlan) -> Vec<DiagnosticCode> {
    validate_plan(plan, &common::sample_registry(), None).into_iter().map(|d| d.code).collect()
}

#[test]
fn projected_grid_on_flat_terrain() {
    let plan = ActionPlan {
        seed: 1,
        actions: vec![terrain(5.0), asset("rock", "rock_boulder_01", Some("rock.layout")), grid("rock.layout", "rock", 2, 2, true)],
    };
    assert!(codes(&plan).is_empty());
    let (scene, report) = execute_plan(&plan, &common::sample_registry());
    assert!(report.all_executed());
    assert_eq!(report.instance_count, 4);
    assert_eq!(scene.instances.len(), 4);
    for inst in &scene.instances {
        assert_eq!(inst.transform.position.z, 5.0);
        assert!(inst.terrain_projected);
        assert_eq!(inst.asset_ref, "asset:rock_boulder_01");
        assert_eq!(inst.object_name(), Some("rock"));
    }
    let positions: Vec<[f64; 2]> = scene.instances.iter().map(|i| [i.transform.position.x, i.transform.position.y]).collect();
    assert_eq!(positions, [[5.0, 5.0], [9.0, 5.0], [5.0, 9.0], [9.0, 9.0]]);
}

#[test]
fn validation_diagnostics() {
    assert!(codes(&ActionPlan::new(0)).is_empty());

    let early = ActionPlan {
        seed: 0,
        actions: vec![asset("rock", "rock_boulder_01", Some("rock.layout")), grid("rock.layout", "rock", 1, 1, true), terrain(0.0)],
    };
    assert_eq!(codes(&early), [DiagnosticCode::Ordering]);

    let backwards = ActionPlan {
        seed: 0,
        actions: vec![grid("rock.layout", "rock", 1, 1, false), asset("rock", "rock_boulder_01", Some("rock.layout"))],
    };
    assert_eq!(codes(&backwards), [DiagnosticCode::Ordering]);

    let unknown = ActionPlan {
        seed: 0,
        actions: vec![
            Action::InvokeApi {
                id: "x".into(),
                object: "x".into(),
                plugin: "volcano".into(),
                params: ParamValues::new(),
                count: 1,
                transform: None,
                layout: None,
                update_existing: false,
            },
            asset("y", "no_such_asset", None),
            asset("y", "rock_boulder_01", Some("missing")),
        ],
    };
    assert_eq!(
        codes(&unknown),
        [DiagnosticCode::UnknownPlugin, DiagnosticCode::UnknownAsset, DiagnosticCode::DuplicateActionId, DiagnosticCode::UnresolvedReference]
    );

    let house = |params: ParamValues, count| Action::InvokeApi {
        id: "house".into(),
        object: "house".into(),
        plugin: "building".into(),
        params,
        count,
        transform: None,
        layout: None,
        update_existing: false,
    };
    assert_eq!(codes(&ActionPlan { seed: 0, actions: vec![house(ParamValues::new(), 1)] }), [DiagnosticCode::MissingRequired]);
    let styled: ParamValues = [("style".to_string(), ParamValue::Str("modern".into()))].into_iter().collect();
    assert_eq!(codes(&ActionPlan { seed: 0, actions: vec![house(styled.clone(), 3)] }), [DiagnosticCode::CountWithoutLayout]);
    let mut tall = styled;
    tall.insert("floors".into(), ParamValue::Int(900));
    assert_eq!(codes(&ActionPlan { seed: 0, actions: vec![house(tall, 1)] }), [DiagnosticCode::InvalidParams]);

    let mismatched = ActionPlan {
        seed: 0,
        actions: vec![
            asset("a", "rock_boulder_01", Some("b.layout")),
            asset("b", "rock_small_02", Some("b.layout")),
            grid("b.layout", "b", 1, 1, false),
        ],
    };
    assert_eq!(codes(&mismatched), [DiagnosticCode::LayoutMismatch]);

    let bad_terrain = ActionPlan {
        seed: 0,
        actions: vec![Action::GenerateTerrain { id: "t".into(), params: TerrainParams::flat(20.0, 1, 0.0) }],
    };
    assert_eq!(codes(&bad_terrain), [DiagnosticCode::InvalidTerrain]);

    // An edit may project onto terrain the scene already has.
    let mut scene = SceneGraph::new(0);
    scene.terrain = Some(scenesmith_core::terrain::generate_heightfield(&TerrainParams::flat(20.0, 11, 2.0)).unwrap());
    let edit = ActionPlan {
        seed: 0,
        actions: vec![asset("rock", "rock_boulder_01", Some("rock.layout")), grid("rock.layout", "rock", 1, 1, true)],
    };
    assert!(validate_plan(&edit, &common::sample_registry(), Some(&scene)).is_empty());
    let report = execute_on(&mut scene, &edit, &common::sample_registry());
    assert!(report.all_executed());
    assert_eq!(scene.instances[0].transform.position.z, 2.0);
}

#[test]
fn failures_are_isolated_per_action() {
    let plan = ActionPlan {
        seed: 0,
        actions: vec![
            asset("a", "rock_boulder_01", Some("a.layout")),
            Action::PlaceLayout {
                id: "a.layout".into(),
                object: "a".into(),
                layout: LayoutSpec::Scatter { region: Region::disc([0.0, 0.0], -1.0), count: 3, min_separation: 0.0, seed: 0, exclusions: vec![] },
                project_to_terrain: false,
            },
            asset("b", "bench_wood_01", Some("b.layout")),
            grid("b.layout", "b", 1, 3, false),
        ],
    };
    let (scene, report) = execute_plan(&plan, &common::sample_registry());
    assert_eq!(report.total, 4);
    assert_eq!(report.executed_count, 3);
    let failed: Vec<&str> = report.failures().map(|f| f.id.as_str()).collect();
    assert_eq!(failed, ["a.layout"]);
    assert_eq!(scene.instances.len(), 3);
}

#[test]
fn execution_is_repeatable_and_survives_serialization() {
    let registry = common::sample_registry();
    let plan = ActionPlan {
        seed: 11,
        actions: vec![
            Action::GenerateTerrain {
                id: "terrain".into(),
                params: TerrainParams { roughness: 0.4, elevation_range: 6.0, seed: 3, ..TerrainParams::flat(60.0, 31, 0.0) },
            },
            Action::InvokeApi {
                id: "tree".into(),
                object: "tree".into(),
                plugin: "tree".into(),
                params: [("species".to_string(), ParamValue::Str("birch".into()))].into_iter().collect(),
                count: 40,
                transform: None,
                layout: Some("tree.layout".into()),
                update_existing: false,
            },
            Action::PlaceLayout {
                id: "tree.layout".into(),
                object: "tree".into(),
                layout: LayoutSpec::Scatter {
                    region: Region::rect([0.0, 0.0], [60.0, 60.0]),
                    count: 40,
                    min_separation: 3.0,
                    seed: 77,
                    exclusions: vec![],
                },
                project_to_terrain: true,
            },
        ],
    };
    let (a, ra) = execute_plan(&plan, &registry);
    let (b, rb) = execute_plan(&plan, &registry);
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(ra.to_json(), rb.to_json());
    let back = ActionPlan::from_json(&plan.to_json()).unwrap();
    let (c, _) = execute_plan(&back, &registry);
    assert_eq!(c.to_json(), a.to_json());
    assert_eq!(a.instances.len(), 40);
    let record = &a.metadata[&format!("{INVOCATION_KEY}tree")];
    let record: serde_json::Value = serde_json::from_str(record).unwrap();
    assert_eq!(record["params"]["species"], "birch");
    assert_eq!(record["params"]["height"], 8.0, "defaults filled at execution");
}

#[test]
fn plan_parse_errors_carry_locations() {
    assert!(matches!(ActionPlan::from_json(r#"{"schema": "plan/2", "seed": 0, "actions": []}"#), Err(PlanError::VersionUnsupported(_))));
    assert!(matches!(ActionPlan::from_json(r#"{"seed": 0, "actions": []}"#), Err(PlanError::VersionUnsupported(_))));
    let text = "{\"schema\": \"plan/1\", \"seed\": 0, \"actions\": [\n  {\"action\": \"teleport\", \"id\": \"x\"}\n]}";
    match ActionPlan::from_json(text) {
        Err(PlanError::Parse { line, message, .. }) => {
            assert_eq!(line, 2);
            assert!(message.starts_with("actions[0]"), "{message}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn format_doc_lists_every_diagnostic_code() {
    let doc = std::fs::read_to_string(common::repo_root().join("docs/plan-format.md")).unwrap();
    use DiagnosticCode::*;
    for code in [
        DuplicateActionId,
        UnknownPlugin,
        UnknownAsset,
        InvalidParams,
        MissingRequired,
        InvalidTerrain,
        UnresolvedReference,
        LayoutMismatch,
        CountWithoutLayout,
        Ordering,
    ] {
        let name = serde_json::to_value(code).unwrap();
        let name = name.as_str().unwrap();
        assert!(doc.contains(&format!("`{name}`")), "{name} missing from the format doc");
    }
}
