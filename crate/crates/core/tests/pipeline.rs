use proptest::prelude::*;
use seamcut::cutter::apply_seams;
use seamcut::flatten::flatten_cut;
use seamcut::mesh::{parse_obj, write_obj};
use seamcut::neural::{checkpoint, generate, make_synthetic_dataset, GenerationConfig, Model, ModelConfig};
use seamcut::sampler::sample_condition;
use seamcut::segment::{boundary_cleanliness, refine_labels, LabelField};
use seamcut::shapes::grid;

#[test]
fn synthetic_shapes_unwrap_after_an_obj_round_trip() {
    for shape in make_synthetic_dataset(6, 21).unwrap() {
        let (mesh, warnings) = parse_obj(&write_obj(&shape.mesh)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(mesh.faces(), shape.mesh.faces());
        for (a, b) in mesh.vertices().iter().zip(shape.mesh.vertices()) {
            assert!((0..3).all(|i| (a[i] - b[i]).abs() <= 1e-8));
        }
        let (cut, report) = apply_seams(&mesh, &shape.seam).unwrap();
        assert!(report.non_disk_charts().is_empty(), "{:?}", shape.family);
        assert_eq!(cut.applied_seam_edges.len(), shape.seam_edges.len());
        let atlas = flatten_cut(&cut).unwrap();
        assert!(atlas.mean_energy.unwrap().is_finite());
        let textured = atlas.textured_mesh(&cut.cut_mesh).unwrap();
        let (back, warnings) = parse_obj(&write_obj(&textured)).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(back.face_count(), mesh.face_count());
    }
}

#[test]
fn checkpointed_model_generates_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let model = Model::new(ModelConfig::tiny(16), 3).unwrap();
    checkpoint::save(&path, &model, None, None).unwrap();
    let a = checkpoint::load(&path).unwrap().model;
    let b = checkpoint::load(&path).unwrap().model;
    let shape = &make_synthetic_dataset(1, 4).unwrap()[0];
    let cloud = sample_condition(&shape.mesh, 256, 0, 0.0).unwrap();
    let gen = GenerationConfig { ratio: 0.2, temperature: 1.0, top_k: 0, seed: 9, max_segments: 6 };
    let ga = generate(&a, &cloud.points, shape.mesh.vertex_count(), &gen).unwrap();
    let gb = generate(&b, &cloud.points, shape.mesh.vertex_count(), &gen).unwrap();
    assert_eq!(ga.tokens, gb.tokens);
    assert!(ga.emitted <= 6);
    assert_eq!(ga.tokens.len(), 6 * ga.emitted + 2);
}

fn partition() -> impl Strategy<Value = (usize, usize, Vec<usize>, Vec<u32>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(nx, ny)| {
        let n = 2 * nx * ny;
        (Just(nx), Just(ny), prop::collection::vec(0usize..5, n), prop::collection::vec(0u32..4, n))
    })
}

proptest! {
    #[test]
    fn refinement_is_constant_per_patch_idempotent_and_never_less_clean((nx, ny, owner, labels) in partition()) {
        let mesh = grid(nx, ny, 1.0, 1.0);
        let mut charts = vec![Vec::new(); 5];
        for (f, &c) in owner.iter().enumerate() {
            charts[c].push(f);
        }
        charts.retain(|c| !c.is_empty());
        let field = LabelField { labels };
        let refined = refine_labels(&charts, &field).unwrap();
        for (c, faces) in charts.iter().enumerate() {
            prop_assert!(faces.iter().all(|&f| refined.labels[f] == refined.patches[c].label));
            prop_assert_eq!(refined.patches[c].counts.values().sum::<usize>(), faces.len());
        }
        let again = refine_labels(&charts, &LabelField { labels: refined.labels.clone() }).unwrap();
        prop_assert_eq!(&again.labels, &refined.labels);
        let raw = boundary_cleanliness(&field.labels, &charts, &mesh);
        let clean = boundary_cleanliness(&refined.labels, &charts, &mesh);
        prop_assert!(clean >= raw);
        prop_assert_eq!(clean, 1.0);
    }
}
