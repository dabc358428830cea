use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use seamcut::cutter::{apply_seams, connect_geodesic, cut_along_edges};
use seamcut::flatten::flatten_cut;
use seamcut::mesh::normalize_to_unit_cube;
use seamcut::neural::{Model, ModelConfig};
use seamcut::sampler::sample_condition;
use seamcut::shapes::{grid, sphere_with_seam, tube};
use seamcut::Codec;

fn codec(c: &mut Criterion) {
    let codec = Codec::default();
    let (mesh, seam) = sphere_with_seam(32, 24, 1.0);
    let (unit, _) = normalize_to_unit_cube(&mesh).unwrap();
    let v = unit.vertices();
    let seq = codec.canonicalize(seam.iter().map(|e| (v[e.a()], v[e.b()]))).unwrap();
    c.bench_function("codec/encode_decode_88_segments", |b| {
        b.iter(|| codec.decode(&codec.encode(black_box(&seq)).unwrap()).unwrap())
    });
}

fn geometry(c: &mut Criterion) {
    let (mesh, seam) = sphere_with_seam(32, 24, 1.0);
    let (unit, _) = normalize_to_unit_cube(&mesh).unwrap();
    let codec = Codec::default();
    let v = unit.vertices();
    let seq = codec.canonicalize(seam.iter().map(|e| (v[e.a()], v[e.b()]))).unwrap();
    c.bench_function("cutter/apply_seams_sphere", |b| b.iter(|| apply_seams(black_box(&mesh), &seq).unwrap()));
    let g = grid(24, 24, 1.0, 1.0);
    c.bench_function("cutter/geodesic_corner_to_corner", |b| {
        b.iter(|| connect_geodesic(black_box(&[[0, g.vertex_count() - 1]]), &g))
    });
    let (t, line) = tube(48, 24, 1.0, 2.0);
    let cut = cut_along_edges(&t, &line.into_iter().collect()).unwrap();
    c.bench_function("flatten/lscm_tube_48x24", |b| b.iter(|| flatten_cut(black_box(&cut)).unwrap()));
    c.bench_function("sampler/condition_4096", |b| {
        b.iter(|| sample_condition(black_box(&mesh), 4096, 0, 0.0).unwrap())
    });
}

fn neural(c: &mut Criterion) {
    let config = ModelConfig::tiny(64);
    let model = Model::new(config.clone(), 0).unwrap();
    let (mesh, _) = sphere_with_seam(16, 12, 1.0);
    let cloud = sample_condition(&mesh, 512, 0, 0.0).unwrap();
    let cond = model.encode(&cloud.points, 3).unwrap().tokens;
    let tokens: Vec<u32> = std::iter::once(config.bins).chain((0..120).map(|i| (i * 37) % config.bins)).collect();
    c.bench_function("neural/full_forward_121_tokens", |b| b.iter(|| model.logits(black_box(&tokens), &cond).unwrap()));
    c.bench_function("neural/cached_decode_121_tokens", |b| {
        b.iter(|| {
            let mut s = model.start(&cond);
            for &t in &tokens {
                black_box(model.step(&mut s, t).unwrap());
            }
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = codec, geometry, neural
}
criterion_main!(benches);
