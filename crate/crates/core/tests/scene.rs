use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenesmith_core::camera::{camera_basis, compute_framing_camera, PREVIEW_MARGIN};
use scenesmith_core::layout::LayoutSpec;
use scenesmith_core::scene::SceneError;
use scenesmith_core::terrain::{generate_heightfield, Valley};
use scenesmith_core::{Aabb, AssetInstance, Region, SceneGraph, TerrainParams, Transform, Vec3};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn instance(i: usize, x: f64, y: f64) -> AssetInstance {
    AssetInstance::new(format!("tree_{i:03}"), "api:tree", Transform::at(Vec3::new(x, y, 0.0))).with_tag("object:tree")
}

#[test]
fn adding_one_instance_changes_only_its_own_entry() {
    let mut scene = SceneGraph::new(7);
    for i in 0..499 {
        scene.add_instance(instance(i, i as f64, 2.0 * i as f64)).unwrap();
    }
    let before: serde_json::Value = serde_json::from_str(&scene.to_json()).unwrap();
    scene.add_instance(instance(499, 1.0, 1.0)).unwrap();
    let after: serde_json::Value = serde_json::from_str(&scene.to_json()).unwrap();
    let (a, b) = (before["instances"].as_array().unwrap(), after["instances"].as_array().unwrap());
    assert_eq!(b.len(), 500);
    assert_eq!(&b[..499], &a[..]);
    assert_eq!(b[499]["id"], "tree_499");
    let mut rest_a = before.clone();
    let mut rest_b = after.clone();
    rest_a.as_object_mut().unwrap().remove("instances");
    rest_b.as_object_mut().unwrap().remove("instances");
    assert_eq!(rest_a, rest_b);
}

#[test]
fn scene_rejects_duplicates_bad_transforms_and_other_schemas() {
    let mut scene = SceneGraph::new(0);
    scene.add_instance(instance(0, 0.0, 0.0)).unwrap();
    assert!(matches!(scene.add_instance(instance(0, 1.0, 0.0)), Err(SceneError::DuplicateId(_))));
    let mut bad = instance(1, 0.0, 0.0);
    bad.transform.scale = Vec3::new(0.0, 1.0, 1.0);
    assert!(matches!(scene.add_instance(bad), Err(SceneError::InvalidInstance { .. })));
    let mut nan = instance(2, 0.0, 0.0);
    nan.transform.position.x = f64::NAN;
    assert!(scene.add_instance(nan).is_err());

    let text = scene.to_json();
    assert!(text.ends_with('\n'));
    assert!(matches!(SceneGraph::from_json(&text.replace("scene/1", "scene/9")), Err(SceneError::SchemaUnsupported(_))));
    assert!(matches!(SceneGraph::from_json("[1]"), Err(SceneError::Parse { .. })));
    assert!(SceneGraph::from_json(&text.replace("\"seed\"", "\"sed\"")).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    scene.save(&path).unwrap();
    assert_eq!(SceneGraph::load(&path).unwrap(), scene);
}

#[test]
fn aabb_matches_a_coordinate_scan() {
    let mut r = rng(1);
    let pts: Vec<Vec3> = (0..1000)
        .map(|_| Vec3::new(r.random_range(-50.0..50.0), r.random_range(-5.0..80.0), r.random_range(0.0..3.0)))
        .collect();
    let b = Aabb::from_points(pts.iter().copied()).unwrap();
    let fold = |f: fn(&Vec3) -> f64, init: f64, pick: fn(f64, f64) -> f64| pts.iter().map(f).fold(init, pick);
    assert_eq!(b.min.x, fold(|p| p.x, f64::INFINITY, f64::min));
    assert_eq!(b.min.y, fold(|p| p.y, f64::INFINITY, f64::min));
    assert_eq!(b.min.z, fold(|p| p.z, f64::INFINITY, f64::min));
    assert_eq!(b.max.x, fold(|p| p.x, f64::NEG_INFINITY, f64::max));
    assert_eq!(b.max.y, fold(|p| p.y, f64::NEG_INFINITY, f64::max));
    assert_eq!(b.max.z, fold(|p| p.z, f64::NEG_INFINITY, f64::max));
    assert!(pts.iter().all(|p| b.contains(*p)));
    assert!(Aabb::from_points(std::iter::empty()).is_err());
}

#[test]
fn framing_camera_keeps_every_corner_in_view() {
    let mut r = rng(2);
    for _ in 0..200 {
        let min = Vec3::new(r.random_range(-20.0..20.0), r.random_range(-20.0..20.0), r.random_range(-5.0..5.0));
        let ext = Vec3::new(r.random_range(0.01..10.0), r.random_range(0.01..10.0), r.random_range(0.01..10.0));
        let aabb = Aabb { min, max: min + ext };
        let fov: f64 = r.random_range(20.0..100.0);
        let dir = Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..-0.1));
        let cam = compute_framing_camera(&aabb, fov, PREVIEW_MARGIN, dir).unwrap();
        let (_, _, forward) = camera_basis(cam.transform.rotation);
        let want = dir.normalized().unwrap();
        assert!((forward - want).length() < 1e-9, "camera looks along the view direction");
        let half = (fov.to_radians() * 0.5).sin();
        for c in aabb.corners() {
            let to = c - cam.transform.position;
            let along = to.dot(forward);
            assert!(along > 0.0, "corner behind the camera");
            // Angle from the optical axis stays within the half field of view.
            let perp = (to - forward.scale(along)).length();
            assert!(perp / to.length() <= half + 1e-9);
        }
    }
    assert!(compute_framing_camera(&Aabb { min: Vec3::ZERO, max: Vec3::ONE }, 0.0, 1.0, Vec3::ONE).is_err());
    assert!(compute_framing_camera(&Aabb { min: Vec3::ZERO, max: Vec3::ONE }, 60.0, 0.5, Vec3::ONE).is_err());
    let point = compute_framing_camera(&Aabb { min: Vec3::ONE, max: Vec3::ONE }, 60.0, 1.0, Vec3::ONE).unwrap();
    assert!(point.distance > 0.0);
}

#[test]
fn obj_export_counts() {
    let mut scene = SceneGraph::new(0);
    scene.terrain = Some(generate_heightfield(&TerrainParams::flat(10.0, 5, 0.0)).unwrap());
    for i in 0..3 {
        scene.add_instance(instance(i, 2.0 + i as f64, 2.0)).unwrap();
    }
    let obj = scene.to_obj();
    let v = obj.lines().filter(|l| l.starts_with("v ")).count();
    let f = obj.lines().filter(|l| l.starts_with("f ")).count();
    assert_eq!(v, 25 + 3 * 8);
    assert_eq!(f, 16 + 3 * 6);
    let max_index = obj
        .lines()
        .filter(|l| l.starts_with("f "))
        .flat_map(|l| l.split_whitespace().skip(1).map(|t| t.parse::<usize>().unwrap()).collect::<Vec<_>>())
        .max()
        .unwrap();
    assert_eq!(max_index, v);
}

#[test]
fn bilinear_sampling_matches_an_independent_formula() {
    let p = TerrainParams { roughness: 0.7, elevation_range: 12.0, seed: 5, ..TerrainParams::flat(40.0, 21, 3.0) };
    let hf = generate_heightfield(&p).unwrap();
    let mut r = rng(3);
    for _ in 0..100 {
        let (x, y): (f64, f64) = (r.random_range(0.0..40.0), r.random_range(0.0..40.0));
        let (fx, fy) = (x / 2.0, y / 2.0);
        let (c, w) = ((fx.floor() as usize).min(19), (fy.floor() as usize).min(19));
        let (tx, ty) = (fx - c as f64, fy - w as f64);
        let h = |c: usize, r: usize| hf.heights[r * 21 + c];
        let top = h(c, w) + (h(c + 1, w) - h(c, w)) * tx;
        let bottom = h(c, w + 1) + (h(c + 1, w + 1) - h(c, w + 1)) * tx;
        let want = top + (bottom - top) * ty;
        assert!((hf.sample_height(x, y).unwrap() - want).abs() < 1e-9);
    }
}

#[test]
fn valley_transect_descends_toward_the_centerline() {
    let p = TerrainParams {
        valley: Some(Valley { path: vec![[0.0, 50.0], [100.0, 50.0]], depth: 10.0, width: 20.0 }),
        ..TerrainParams::flat(100.0, 101, 30.0)
    };
    let hf = generate_heightfield(&p).unwrap();
    let col = 40;
    let transect: Vec<f64> = (0..=50).map(|row| hf.height_at_node(col, row)).collect();
    assert!(transect.windows(2).all(|w| w[1] <= w[0]), "heights fall toward y = 50");
    assert_eq!(transect[50], 20.0);
    assert_eq!(transect[0], 30.0);
    assert_eq!(hf.height_at_node(col, 30), 30.0, "corridor edge untouched");
    for row in 50..=100 {
        assert_eq!(hf.height_at_node(col, row), hf.height_at_node(col, 100 - row), "symmetric about the centerline");
    }
}

#[test]
fn linear_lateral_offset_shifts_by_the_offset() {
    let base = LayoutSpec::Linear { path: vec![[0.0, 0.0], [10.0, 0.0]], spacing: 2.0, lateral_offset: 0.0, align_to_tangent: false };
    let shifted =
        LayoutSpec::Linear { path: vec![[0.0, 0.0], [10.0, 0.0]], spacing: 2.0, lateral_offset: 1.0, align_to_tangent: false };
    let a = base.generate().unwrap();
    let b = shifted.generate().unwrap();
    assert_eq!(a.len(), 6);
    for (p, q) in a.positions().zip(b.positions()) {
        assert!((((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt() - 1.0).abs() < 1e-12);
        assert_eq!(q[1] - p[1], 1.0, "left normal of +X is +Y");
    }
}

#[test]
fn nested_children_stay_in_disjoint_sub_regions() {
    let left = Region::rect([0.0, 0.0], [10.0, 20.0]);
    let right = Region::rect([12.0, 0.0], [20.0, 20.0]);
    let spec = LayoutSpec::Nested {
        parent: Region::rect([0.0, 0.0], [20.0, 20.0]),
        children: vec![
            LayoutSpec::Scatter { region: left.clone(), count: 15, min_separation: 1.5, seed: 1, exclusions: vec![] },
            LayoutSpec::AreaFill { region: right.clone(), footprint: [2.0, 2.0], gap: 0.5, orientation: 0.0 },
        ],
    };
    let p = spec.generate().unwrap();
    assert!(p.len() > 15);
    for pt in &p.points {
        let pos = [pt.transform.position.x, pt.transform.position.y];
        match pt.group[..] {
            [0] => assert!(left.contains(pos) && !right.contains(pos)),
            [1] => assert!(right.contains(pos) && !left.contains(pos)),
            ref g => panic!("unexpected group {g:?}"),
        }
    }
    let escaping = LayoutSpec::Nested {
        parent: Region::rect([0.0, 0.0], [5.0, 5.0]),
        children: vec![LayoutSpec::Scatter { region: left, count: 1, min_separation: 0.0, seed: 0, exclusions: vec![] }],
    };
    assert!(escaping.generate().is_err());
}

#[test]
fn area_fill_counts_cells_that_fit() {
    // 10 m square, 2 m footprint, 1 m gap: 3 m pitch fits three per axis.
    let spec = LayoutSpec::AreaFill { region: Region::rect([0.0, 0.0], [10.0, 10.0]), footprint: [2.0, 2.0], gap: 1.0, orientation: 0.0 };
    let p = spec.generate().unwrap();
    assert_eq!(p.len(), 9);
    let too_big = LayoutSpec::AreaFill { region: Region::rect([0.0, 0.0], [1.0, 1.0]), footprint: [2.0, 2.0], gap: 0.0, orientation: 0.0 };
    let p = too_big.generate().unwrap();
    assert!(p.is_empty() && p.flags.footprint_too_large);
    let skewed = LayoutSpec::AreaFill { region: Region::rect([0.0, 0.0], [10.0, 10.0]), footprint: [2.0, 2.0], gap: 1.0, orientation: 45.0 };
    assert!(skewed.generate().is_err());
}

#[test]
fn regions_validate_their_shapes() {
    assert!(Region::rect([1.0, 1.0], [0.0, 2.0]).validate().is_err());
    assert!(Region::disc([0.0, 0.0], 0.0).validate().is_err());
    assert!(Region::annulus([0.0, 0.0], 3.0, 2.0).validate().is_err());
    let bowtie = Region::Polygon { vertices: vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0]] };
    assert!(bowtie.validate().is_err());
    let tri = Region::Polygon { vertices: vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]] };
    assert!(tri.validate().is_ok());
    assert!((tri.area() - 8.0).abs() < 1e-12);
    assert!(tri.contains([1.0, 1.0]) && !tri.contains([3.0, 3.0]));
    let ring = Region::annulus([0.0, 0.0], 1.0, 2.0);
    assert!(!ring.contains([0.5, 0.0]) && ring.contains([1.5, 0.0]));
}
