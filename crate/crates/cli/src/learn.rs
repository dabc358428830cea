use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use seamcut::mesh::{load_obj, normalize_to_unit_cube, save_obj};
use seamcut::neural::checkpoint;
use seamcut::neural::train::teacher_forced_accuracy;
use seamcut::neural::{
    generate as sample_seam, make_synthetic_dataset, GenerationConfig, Model, ModelConfig, TrainConfig, TrainExample,
    Trainer,
};
use seamcut::sampler::sample_condition;
use seamcut::{Codec, SeamFile, TriMesh};
use serde::Serialize;

use crate::geometry::{load_seams, unwrap_mesh};
use crate::report::{sibling, CliResult, Failure, PipelineReport};

fn write(path: &Path, text: String) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| Failure::Internal(format!("{}: {e}", path.display())))
}

/// Meshes in `dir`, sorted by name, skipping outputs of `unwrap`/`eval`.
fn list_meshes(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "obj"))
        .filter(|p| !p.to_string_lossy().ends_with(".unwrapped.obj"))
        .collect();
    out.sort();
    if out.is_empty() {
        return Err(Failure::Input(format!("no .obj files in {}", dir.display())));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ManifestEntry {
    mesh: String,
    seams: String,
    family: seamcut::neural::Family,
    vertices: usize,
    faces: usize,
    segments: usize,
    ratio: f64,
}

pub fn synth(count: usize, seed: u64, out: &Path) -> CliResult<()> {
    if count == 0 {
        return Err(Failure::Input("count must be at least 1".into()));
    }
    let mut rep = PipelineReport::new("synth", seed);
    let shapes = rep.stage("generate", |_| Ok(make_synthetic_dataset(count, seed)?))?;
    create_dir(out)?;
    let manifest = rep.stage("write", |_| {
        let mut manifest = Vec::with_capacity(shapes.len());
        for (i, s) in shapes.iter().enumerate() {
            let mesh = out.join(format!("shape_{i:04}.obj"));
            let seams = out.join(format!("shape_{i:04}.seams.json"));
            save_obj(&s.mesh, &mesh)?;
            SeamFile::from_sequence(&s.seam).save(&seams)?;
            manifest.push(ManifestEntry {
                mesh: mesh.file_name().unwrap().to_string_lossy().into(),
                seams: seams.file_name().unwrap().to_string_lossy().into(),
                family: s.family,
                vertices: s.mesh.vertex_count(),
                faces: s.mesh.face_count(),
                segments: s.seam.len(),
                ratio: s.ratio(),
            });
        }
        Ok(manifest)
    })?;
    let path = out.join("manifest.json");
    write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    rep.count("shapes", shapes.len());
    rep.output("manifest", &path);
    let report = out.join("synth.json");
    rep.output("report", &report);
    rep.save(&report)
}

/// Neural preset selection shared by train, generate and eval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Desk,
    Toy,
    Full,
}

impl Preset {
    pub fn config(self) -> ModelConfig {
        match self {
            Preset::Desk => ModelConfig::default(),
            Preset::Toy => ModelConfig::tiny(64),
            Preset::Full => ModelConfig::full(),
        }
    }
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub loss: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub resume: Option<PathBuf>,
    pub log_every: usize,
}

fn load_example(mesh_path: &Path, codec: &Codec, budget: usize, seed: u64) -> CliResult<TrainExample> {
    let mesh = load_obj(mesh_path)?;
    let seq = load_seams(&sibling(mesh_path, "seams.json"), &mesh, codec)?;
    if seq.len() > codec.max_segments {
        return Err(Failure::Input(format!(
            "{}: {} segments exceed the model limit of {}",
            mesh_path.display(),
            seq.len(),
            codec.max_segments
        )));
    }
    let (unit, _) = normalize_to_unit_cube(&mesh)?;
    let cloud = sample_condition(&unit, budget, seed, 0.0)?;
    Ok(TrainExample { points: cloud.points, tokens: codec.encode(&seq)? })
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    let mut rep = PipelineReport::new("train", a.train.seed);
    rep.input("data", &a.data);
    let (model, adam) = match &a.resume {
        Some(path) => {
            rep.input("resume", path);
            let ck = checkpoint::load(path)?;
            if ck.model.config != a.model {
                return Err(Failure::Input("checkpoint configuration does not match the requested model".into()));
            }
            (ck.model, ck.adam)
        }
        None => (Model::new(a.model.clone(), a.train.seed)?, None),
    };
    let codec = model.config.codec()?;
    let budget = a.train.point_budget;
    let data = rep.stage("load", |_| {
        list_meshes(&a.data)?
            .iter()
            .filter(|p| sibling(p, "seams.json").exists())
            .enumerate()
            .map(|(i, p)| load_example(p, &codec, budget, a.train.seed.wrapping_add(i as u64)))
            .collect::<CliResult<Vec<_>>>()
    })?;
    if data.is_empty() {
        return Err(Failure::Input("no meshes with seam files found".into()));
    }
    rep.count("examples", data.len());
    let mut trainer = match adam {
        Some(adam) => Trainer::resume(model, a.train.clone(), adam)?,
        None => Trainer::new(model, a.train.clone())?,
    };
    let every = a.log_every;
    rep.stage("train", |_| {
        trainer.run(&data, |r| {
            if every > 0 && r.step % every == 0 {
                eprintln!("step {} ce {:.5} kl {:.5} acc {:.4}", r.step, r.ce_loss, r.kl_loss, r.accuracy);
            }
        })?;
        Ok(())
    })?;
    let last = trainer.history.last().copied();
    rep.count("steps", trainer.adam.step);
    rep.metric("first_ce_loss", trainer.history.first().map(|r| r.ce_loss));
    rep.metric("final_ce_loss", last.map(|r| r.ce_loss));
    rep.metric("final_kl_loss", last.map(|r| r.kl_loss));
    rep.metric("final_batch_accuracy", last.map(|r| r.accuracy));
    rep.metric("max_abs_mean_logvar", trainer.history.iter().map(|r| r.mean_logvar.abs()).fold(0.0, f64::max));
    let probe = data.len().min(20);
    let acc = rep.stage("evaluate", |_| {
        let mut total = 0.0;
        for ex in &data[..probe] {
            total += teacher_forced_accuracy(&trainer.model, ex)?;
        }
        Ok(total / probe as f64)
    })?;
    rep.metric("teacher_forced_accuracy", acc);
    let loss = a.loss.unwrap_or_else(|| sibling(&a.out, "loss.csv"));
    rep.stage("write", |_| {
        checkpoint::save(&a.out, &trainer.model, Some(&trainer.config), Some(&trainer.adam))?;
        trainer.save_history(&loss)?;
        Ok(())
    })?;
    rep.output("checkpoint", &a.out);
    rep.output("loss", &loss);
    let report = a.report.unwrap_or_else(|| sibling(&a.out, "train.json"));
    rep.output("report", &report);
    rep.save(&report)
}

pub struct SampleArgs {
    pub checkpoint: PathBuf,
    pub expect: Option<ModelConfig>,
    pub bins: u32,
    pub gen: GenerationConfig,
    pub budget: Option<usize>,
}

fn load_model(a: &SampleArgs) -> CliResult<(Model, usize)> {
    let ck = checkpoint::load(&a.checkpoint)?;
    if let Some(expect) = &a.expect {
        if *expect != ck.model.config {
            return Err(Failure::Input("checkpoint configuration does not match the runtime configuration".into()));
        }
    }
    if ck.model.config.bins != a.bins {
        return Err(Failure::Input(format!(
            "checkpoint uses {} bins, runtime asks for {}",
            ck.model.config.bins, a.bins
        )));
    }
    let budget = a.budget.or(ck.train.map(|t| t.point_budget)).unwrap_or(seamcut::sampler::DEFAULT_BUDGET);
    Ok((ck.model, budget))
}

fn sample_for_mesh(
    model: &Model,
    mesh: &TriMesh,
    budget: usize,
    gen: &GenerationConfig,
) -> CliResult<seamcut::neural::Generated> {
    let (unit, _) = normalize_to_unit_cube(mesh)?;
    let cloud = sample_condition(&unit, budget, gen.seed, 0.0)?;
    Ok(sample_seam(model, &cloud.points, mesh.vertex_count(), gen)?)
}

pub fn generate(
    input: &Path,
    a: SampleArgs,
    out: Option<PathBuf>,
    tokens: Option<PathBuf>,
    report: Option<PathBuf>,
) -> CliResult<()> {
    let mut rep = PipelineReport::new("generate", a.gen.seed);
    rep.input("mesh", input);
    rep.input("checkpoint", &a.checkpoint);
    a.gen.validate()?;
    if let Some(w) = a.gen.advisory_warning() {
        rep.warn(w);
    }
    let (model, budget) = rep.stage("load", |_| load_model(&a))?;
    let mesh = load_obj(input)?;
    let g = rep.stage("sample", |_| sample_for_mesh(&model, &mesh, budget, &a.gen))?;
    if g.truncated {
        rep.warn(format!("no EOS within {} segments; stream truncated", g.emitted));
    }
    let (lo, hi) = model.config.bucket_range(g.bucket);
    rep.count("point_budget", budget);
    rep.count("emitted_segments", g.emitted);
    rep.count("segments", g.sequence.len());
    rep.count("target_segments", a.gen.target_segments(mesh.vertex_count()));
    rep.count("bucket", g.bucket);
    rep.metric("bucket_range", [lo, hi]);
    rep.metric("in_bucket", g.emitted >= lo && g.emitted <= hi);
    rep.metric("truncated", g.truncated);
    rep.metric("ratio", a.gen.ratio);
    rep.metric("temperature", a.gen.temperature);
    rep.metric("top_k", a.gen.top_k);
    let out = out.unwrap_or_else(|| sibling(input, "seams.json"));
    rep.stage("write", |_| {
        SeamFile::from_sequence(&g.sequence).save(&out)?;
        if let Some(t) = &tokens {
            std::fs::write(t, g.tokens.to_le_bytes()?).map_err(|e| Failure::Internal(e.to_string()))?;
        }
        Ok(())
    })?;
    rep.output("seams", &out);
    if let Some(t) = &tokens {
        rep.output("tokens", t);
    }
    let report = report.unwrap_or_else(|| sibling(input, "generate.json"));
    rep.output("report", &report);
    rep.save(&report)
}

pub struct EvalArgs {
    pub dir: PathBuf,
    pub sample: SampleArgs,
    /// Fixed ratio; `None` uses each mesh's reference seam ratio when present.
    pub ratio: Option<f64>,
    pub out: Option<PathBuf>,
    pub objs: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub limit: Option<usize>,
}

struct EvalRow {
    mesh: String,
    vertices: usize,
    ratio: f64,
    emitted: usize,
    segments: usize,
    seam_edges: usize,
    repair_edges: usize,
    charts: usize,
    mean_energy: Option<f64>,
    truncated: bool,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let mut rep = PipelineReport::new("eval", a.sample.gen.seed);
    rep.input("dir", &a.dir);
    rep.input("checkpoint", &a.sample.checkpoint);
    let (model, budget) = rep.stage("load", |_| load_model(&a.sample))?;
    let mut meshes = list_meshes(&a.dir)?;
    if let Some(n) = a.limit {
        meshes.truncate(n);
    }
    let objs = a.objs.clone().unwrap_or_else(|| a.dir.join("eval"));
    create_dir(&objs)?;
    let rows = rep.stage("evaluate", |rep| {
        let mut rows = Vec::with_capacity(meshes.len());
        for path in &meshes {
            let mesh = load_obj(path)?;
            let reference = sibling(path, "seams.json");
            let ratio = match a.ratio {
                Some(r) => r,
                None if reference.exists() => {
                    let n = SeamFile::load(&reference)?.segments.len();
                    (n as f64 / mesh.vertex_count() as f64).clamp(1e-6, 1.0 - 1e-6)
                }
                None => 0.2,
            };
            let gen = GenerationConfig { ratio, ..a.sample.gen.clone() };
            let g = sample_for_mesh(&model, &mesh, budget, &gen)?;
            let mut sub = PipelineReport::new("eval-mesh", gen.seed);
            let u = unwrap_mesh(&mesh, &g.sequence, true, &mut sub)?;
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            let obj = objs.join(format!("{stem}.unwrapped.obj"));
            save_obj(&u.atlas.textured_mesh(&u.cut.cut_mesh)?, &obj)?;
            for w in sub.warnings {
                rep.warnings.push(format!("{stem}: {w}"));
            }
            rows.push(EvalRow {
                mesh: stem,
                vertices: mesh.vertex_count(),
                ratio,
                emitted: g.emitted,
                segments: g.sequence.len(),
                seam_edges: u.cut.applied_seam_edges.len(),
                repair_edges: u.repair_edges,
                charts: u.cut.charts.len(),
                mean_energy: u.atlas.mean_energy,
                truncated: g.truncated,
            });
        }
        Ok(rows)
    })?;
    let mut csv = String::from(
        "mesh,vertices,ratio,emitted_segments,segments,seam_edges,repair_edges,charts,mean_energy,truncated\n",
    );
    for r in &rows {
        let e = r.mean_energy.map_or(String::new(), |e| format!("{e}"));
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.mesh, r.vertices, r.ratio, r.emitted, r.segments, r.seam_edges, r.repair_edges, r.charts, e, r.truncated
        )
        .expect("string write");
    }
    let out = a.out.unwrap_or_else(|| a.dir.join("eval.csv"));
    write(&out, csv)?;
    let finite: Vec<f64> = rows.iter().filter_map(|r| r.mean_energy).filter(|e| e.is_finite()).collect();
    rep.count("meshes", rows.len());
    rep.count("finite_means", finite.len());
    rep.count("repaired_meshes", rows.iter().filter(|r| r.repair_edges > 0).count());
    rep.metric("mean_energy", (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64));
    rep.output("csv", &out);
    rep.output("objs", &objs);
    let report = a.report.unwrap_or_else(|| a.dir.join("eval.json"));
    rep.output("report", &report);
    rep.save(&report)
}
