use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use seamcut::cutter::{apply_seams, cut_along_edges, disk_cut_edges, CutReport, CutResult};
use seamcut::extract::{extract_seams, validate_uv_layout};
use seamcut::flatten::{flatten_cut, UVAtlas};
use seamcut::mesh::unit_cube_transform;
use seamcut::mesh::{load_obj, save_obj};
use seamcut::segment::{boundary_cleanliness, refine_labels, LabelField};
use seamcut::{Codec, SeamFile, SeamSequence, TriMesh};

use crate::report::{sibling, CliResult, Failure, PipelineReport};

pub struct ExtractArgs {
    pub input: PathBuf,
    pub out: Option<PathBuf>,
    pub islands: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub validate: bool,
    pub codec: Codec,
    pub seed: u64,
}

pub fn extract(a: ExtractArgs) -> CliResult<()> {
    let mut rep = PipelineReport::new("extract", a.seed);
    rep.input("mesh", &a.input);
    let mesh = rep.stage("load", |_| Ok(load_obj(&a.input)?))?;
    let (edges, seq) = rep.stage("extract", |_| Ok(extract_seams(&mesh, &a.codec)?))?;
    rep.count("seam_edges", edges.len());
    rep.count("islands", edges.islands.len());
    rep.count("segments", seq.len());
    let mut clean = true;
    if a.validate {
        let v = rep.stage("validate", |_| Ok(validate_uv_layout(&mesh, &a.codec)?))?;
        clean = v.is_clean();
        rep.metric("validation", &v);
    }
    let out = a.out.unwrap_or_else(|| sibling(&a.input, "seams.json"));
    let islands = a.islands.unwrap_or_else(|| sibling(&a.input, "islands.json"));
    rep.stage("write", |_| {
        SeamFile::from_sequence(&seq).save(&out)?;
        edges.save(&islands)?;
        Ok(())
    })?;
    rep.output("seams", &out);
    rep.output("islands", &islands);
    let report = a.report.unwrap_or_else(|| sibling(&a.input, "extract.json"));
    rep.output("report", &report);
    rep.save(&report)?;
    if !clean {
        return Err(Failure::Input("UV layout validation failed; see the report".into()));
    }
    Ok(())
}

/// Loads a seam file into the mesh's unit-cube frame.
pub fn load_seams(path: &Path, mesh: &TriMesh, codec: &Codec) -> CliResult<SeamSequence> {
    let file = SeamFile::load(path)?;
    if file.segments.is_empty() {
        return Ok(SeamSequence::default());
    }
    let t = unit_cube_transform(mesh.vertices())?;
    let pairs: Vec<_> = if file.normalized {
        file.pairs().collect()
    } else {
        file.pairs().map(|(p, q)| (t.apply(p), t.apply(q))).collect()
    };
    Ok(codec.canonicalize(pairs)?)
}

pub struct Unwrapped {
    pub cut: CutResult,
    pub cut_report: CutReport,
    pub atlas: UVAtlas,
    pub repair_edges: usize,
}

/// Cut, optionally repair non-disk charts, then flatten and pack.
pub fn unwrap_mesh(
    mesh: &TriMesh,
    seam: &SeamSequence,
    repair: bool,
    rep: &mut PipelineReport,
) -> CliResult<Unwrapped> {
    let (mut cut, cut_report) = rep.stage("cut", |_| Ok(apply_seams(mesh, seam)?))?;
    for w in &cut_report.warnings {
        rep.warn(w.clone());
    }
    let mut repair_edges = 0;
    let non_disk: Vec<String> = cut_report
        .non_disk_charts()
        .iter()
        .map(|c| {
            format!("chart {} (euler {}, {} boundary loops, genus {})", c.chart, c.euler, c.boundary_loops, c.genus)
        })
        .collect();
    if !non_disk.is_empty() {
        if !repair {
            rep.metric("non_disk_charts", cut_report.non_disk_charts());
            return Err(Failure::Topology(format!("non-disk charts: {}", non_disk.join("; "))));
        }
        cut = rep.stage("repair", |_| {
            let extra = disk_cut_edges(&cut);
            repair_edges = extra.len();
            let mut edges: BTreeSet<_> = cut.applied_seam_edges.edges.clone();
            edges.extend(cut.unopened_edges.iter().copied());
            edges.extend(extra);
            Ok(cut_along_edges(mesh, &edges)?)
        })?;
        if let Some(c) = cut.chart_topology().iter().find(|c| !c.is_disk()) {
            return Err(Failure::Topology(format!("chart {} is still not a disk after repair", c.chart)));
        }
    }
    let atlas = rep.stage("flatten", |_| Ok(flatten_cut(&cut)?))?;
    rep.count("seam_edges", cut.applied_seam_edges.len());
    rep.count("repair_edges", repair_edges);
    rep.count("charts", cut.charts.len());
    rep.count("duplicated_vertices", cut.duplicated_vertices());
    rep.count("skipped_faces", atlas.skipped);
    rep.count("dropped_segments", cut_report.dropped_pairs.len());
    rep.count("unopened_edges", cut.unopened_edges.len());
    rep.metric("mean_energy", atlas.mean_energy);
    rep.metric("pack_utilization", atlas.packing.utilization());
    Ok(Unwrapped { cut, cut_report, atlas, repair_edges })
}

pub struct UnwrapArgs {
    pub input: PathBuf,
    pub seams: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub repair: bool,
    pub codec: Codec,
    pub seed: u64,
}

pub fn unwrap(a: UnwrapArgs) -> CliResult<()> {
    let mut rep = PipelineReport::new("unwrap", a.seed);
    let seams = a.seams.unwrap_or_else(|| sibling(&a.input, "seams.json"));
    rep.input("mesh", &a.input);
    rep.input("seams", &seams);
    let report = a.report.unwrap_or_else(|| sibling(&a.input, "unwrap.json"));
    let (mesh, seq) = rep.stage("load", |_| {
        let mesh = load_obj(&a.input)?;
        let seq = load_seams(&seams, &mesh, &a.codec)?;
        Ok((mesh, seq))
    })?;
    rep.count("segments", seq.len());
    let result = unwrap_mesh(&mesh, &seq, a.repair, &mut rep);
    let u = match result {
        Ok(u) => u,
        Err(e) => {
            rep.output("report", &report);
            rep.save(&report)?;
            return Err(e);
        }
    };
    let out = a.out.unwrap_or_else(|| sibling(&a.input, "unwrapped.obj"));
    rep.stage("write", |_| {
        let textured = u.atlas.textured_mesh(&u.cut.cut_mesh)?;
        save_obj(&textured, &out)?;
        Ok(())
    })?;
    rep.metric("charts", u.atlas.report().charts);
    rep.metric("cut", &u.cut_report);
    rep.output("mesh", &out);
    rep.output("report", &report);
    rep.save(&report)
}

pub struct SegmentArgs {
    pub input: PathBuf,
    pub seams: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub codec: Codec,
    pub seed: u64,
}

pub fn segment(a: SegmentArgs) -> CliResult<()> {
    let mut rep = PipelineReport::new("segment", a.seed);
    let seams = a.seams.unwrap_or_else(|| sibling(&a.input, "seams.json"));
    let labels = a.labels.unwrap_or_else(|| sibling(&a.input, "labels.json"));
    rep.input("mesh", &a.input);
    rep.input("seams", &seams);
    rep.input("labels", &labels);
    let (mesh, seq, field) = rep.stage("load", |_| {
        let mesh = load_obj(&a.input)?;
        let seq = load_seams(&seams, &mesh, &a.codec)?;
        Ok((mesh, seq, LabelField::load(&labels)?))
    })?;
    if field.labels.len() != mesh.face_count() {
        return Err(Failure::Input(format!("{} labels for {} faces", field.labels.len(), mesh.face_count())));
    }
    let (cut, _) = rep.stage("cut", |_| Ok(apply_seams(&mesh, &seq)?))?;
    let refined = rep.stage("refine", |_| Ok(refine_labels(&cut.charts, &field)?))?;
    let before = boundary_cleanliness(&field.labels, &cut.charts, &mesh);
    let after = boundary_cleanliness(&refined.labels, &cut.charts, &mesh);
    rep.count("patches", cut.charts.len());
    rep.count("relabeled_faces", field.labels.iter().zip(&refined.labels).filter(|(a, b)| a != b).count());
    rep.metric("cleanliness_raw", before);
    rep.metric("cleanliness_refined", after);
    let out = a.out.unwrap_or_else(|| sibling(&a.input, "refined_labels.json"));
    rep.stage("write", |_| Ok(refined.save(&out)?))?;
    rep.output("labels", &out);
    let report = a.report.unwrap_or_else(|| sibling(&a.input, "segment.json"));
    rep.output("report", &report);
    rep.save(&report)
}
