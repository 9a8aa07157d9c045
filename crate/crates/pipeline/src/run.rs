//! Stage orchestration. Every stage reads its inputs from the run directory
//! and writes its outputs there, so a run started at any stage reproduces the
//! full chain given the upstream artifacts.

use std::cell::OnceCell;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use log::{info, warn};
use orgscope_core::enhance::{enhance_frame, EnhancedFrame};
use orgscope_core::features::{frame_tables, rotation_rate, FrameInput, FrameTables, V3};
use orgscope_core::flow::{correspondence, track_points, FlowField};
use orgscope_core::linking::{link_frames, marker_features, Linkage, MarkerFeatures};
use orgscope_core::mocap::{default_min_dist_um, find_markers, MocapMarker};
use orgscope_core::multimesh::{build_multimesh, export_tables};
use orgscope_core::segment::{
    assign_voxels_to_nodes, classify_and_split, segment_frame, Segmentation, VoxelClass,
};
use orgscope_core::volume::{center_of_mass, compute_scale_sigmas};
use orgscope_core::{Frame, Grid, ScaleSpace, Shape, VolumeMeta};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};
use crate::layout::Layout;
use crate::tables::{
    linkages_from_table, linkages_table, markers_from_table, markers_table, read_table,
    tracks_table, write_jsonl, write_table,
};
use crate::tiffio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Enhance,
    Segment,
    Mocap,
    Link,
    Flow,
    Features,
    Multimesh,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Enhance,
        Stage::Segment,
        Stage::Mocap,
        Stage::Link,
        Stage::Flow,
        Stage::Features,
        Stage::Multimesh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Enhance => "enhance",
            Stage::Segment => "segment",
            Stage::Mocap => "mocap",
            Stage::Link => "link",
            Stage::Flow => "flow",
            Stage::Features => "features",
            Stage::Multimesh => "multimesh",
        }
    }
}

/// Identifier column counts of the written feature tables.
pub const FEATURE_LEVELS: [(&str, usize); 5] = [
    ("voxels", 9),
    ("nodes", 7),
    ("branches", 3),
    ("organelles", 2),
    ("image", 1),
];

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub status: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: RunConfig,
    pub frames: usize,
    pub shape_zyx: [usize; 3],
    pub stages: Vec<StageRecord>,
    pub files: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    meta: VolumeMeta,
    layout: Layout,
    raw: OnceCell<Vec<Frame>>,
    scales: ScaleSpace,
}

fn tag<T>(r: Result<T>, stage: Stage, frame: Option<usize>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage.name(), frame))
}

impl Ctx<'_> {
    fn raw(&self) -> Result<&[Frame]> {
        if let Some(f) = self.raw.get() {
            return Ok(f);
        }
        let frames = tiffio::load_input(self.cfg, &self.meta)?;
        if frames.is_empty() {
            return Err(PipelineError::format(
                &self.cfg.input,
                "input has no frames",
            ));
        }
        Ok(self.raw.get_or_init(|| frames))
    }

    fn n_frames(&self) -> Result<usize> {
        Ok(self.raw()?.len())
    }

    fn shape(&self) -> Result<Shape> {
        Ok(self.raw()?[0].shape())
    }

    fn mkdirs(&self, t: usize) -> Result<()> {
        let d = self.layout.frame_dir(t);
        std::fs::create_dir_all(&d).map_err(PipelineError::io(d))
    }

    fn enhance(&self) -> Result<()> {
        let frames = self.raw()?;
        for (t, frame) in frames.iter().enumerate() {
            let ef = tag(
                enhance_frame(frame, &self.scales, self.cfg.chunk_size).map_err(Into::into),
                Stage::Enhance,
                Some(t),
            )?;
            self.mkdirs(t)?;
            tiffio::write_f32(&self.layout.preprocessed(t), &ef.values)?;
            tiffio::write_u8(&self.layout.scale_index(t), &ef.scale_index)?;
        }
        Ok(())
    }

    fn segment(&self) -> Result<()> {
        let shape = self.shape()?;
        for t in 0..self.n_frames()? {
            let ef = EnhancedFrame {
                values: tiffio::read_f32(&self.layout.preprocessed(t), Some(shape))?,
                scale_index: tiffio::read_u8(&self.layout.scale_index(t), Some(shape))?,
            };
            let seg = tag(
                segment_frame(&ef, &self.meta).map_err(Into::into),
                Stage::Segment,
                Some(t),
            )?;
            if seg.organelle_count == 0 {
                warn!("frame {t}: segmentation is empty");
            }
            tiffio::write_u32(&self.layout.organelles(t), &seg.organelles)?;
            tiffio::write_u32(&self.layout.branches(t), &seg.branches)?;
            tiffio::write_u8(&self.layout.skeleton(t), &skeleton_codes(&seg))?;
            tiffio::write_f64(&self.layout.distance(t), &seg.distance)?;
        }
        Ok(())
    }

    fn mocap(&self) -> Result<()> {
        let shape = self.shape()?;
        let frames = self.raw()?;
        let min_dist = self
            .cfg
            .min_peak_dist_um
            .unwrap_or_else(|| default_min_dist_um(&self.meta));
        let mut all = Vec::with_capacity(frames.len());
        for (t, frame) in frames.iter().enumerate() {
            let mask = tiffio::read_u32(&self.layout.organelles(t), Some(shape))?.map(|&l| l != 0);
            let dist = tiffio::read_f64(&self.layout.distance(t), Some(shape))?;
            let ms = find_markers(
                &dist,
                &mask,
                &frame.values,
                &self.scales,
                &self.meta,
                min_dist,
                t,
            );
            info!("frame {t}: {} markers", ms.len());
            all.push(ms);
        }
        write_table(&self.layout.markers(), &markers_table(&all))
    }

    fn markers(&self) -> Result<Vec<Vec<MocapMarker>>> {
        let p = self.layout.markers();
        markers_from_table(&p, &read_table(&p, 6)?, self.n_frames()?)
    }

    fn linkages(&self) -> Result<Vec<Vec<Linkage>>> {
        let p = self.layout.linkages();
        linkages_from_table(&p, &read_table(&p, 4)?, self.n_frames()?.saturating_sub(1))
    }

    fn link(&self) -> Result<()> {
        let shape = self.shape()?;
        let frames = self.raw()?;
        let markers = self.markers()?;
        let mut feats: Vec<Vec<MarkerFeatures>> = Vec::with_capacity(frames.len());
        if frames.len() > 1 {
            for (t, frame) in frames.iter().enumerate() {
                let pre = tiffio::read_f32(&self.layout.preprocessed(t), Some(shape))?;
                feats.push(
                    markers[t]
                        .iter()
                        .map(|m| marker_features(m, &frame.values, &pre, &self.meta))
                        .collect(),
                );
            }
        }
        let links: Vec<Vec<Linkage>> = (0..frames.len().saturating_sub(1))
            .map(|t| {
                link_frames(
                    &markers[t],
                    &markers[t + 1],
                    &feats[t],
                    &feats[t + 1],
                    &self.meta,
                    self.cfg.max_speed_um_s,
                )
            })
            .collect();
        write_table(&self.layout.linkages(), &linkages_table(&links))
    }

    /// Forward fields `t → t + 1` and backward fields `t → t - 1`, indexed by
    /// the frame they start from.
    fn fields(&self) -> Result<(Vec<FlowField>, Vec<FlowField>)> {
        let n = self.n_frames()?;
        let max = self.cfg.max_step_um();
        let mut fwd: Vec<FlowField> = (0..n).map(|_| FlowField::empty(max)).collect();
        let mut bwd: Vec<FlowField> = (0..n).map(|_| FlowField::empty(max)).collect();
        if n > 1 {
            let markers = self.markers()?;
            let links = self.linkages()?;
            for t in 0..n - 1 {
                fwd[t] = FlowField::forward(&markers[t], &markers[t + 1], &links[t], max);
                bwd[t + 1] = FlowField::backward(&markers[t], &markers[t + 1], &links[t], max);
            }
        }
        Ok((fwd, bwd))
    }

    fn flow(&self) -> Result<()> {
        let shape = self.shape()?;
        let n = self.n_frames()?;
        let (fwd, bwd) = self.fields()?;
        let mut org = tiffio::read_u32(&self.layout.organelles(0), Some(shape))?;
        let mut br = tiffio::read_u32(&self.layout.branches(0), Some(shape))?;
        tiffio::write_u32(&self.layout.reassigned_organelles(0), &org)?;
        tiffio::write_u32(&self.layout.reassigned_branches(0), &br)?;
        for t in 0..n.saturating_sub(1) {
            let mask =
                tiffio::read_u32(&self.layout.organelles(t + 1), Some(shape))?.map(|&l| l != 0);
            let labeled = org.map(|&l| l != 0);
            let corr = correspondence(&labeled, &mask, &fwd[t], &bwd[t + 1], &self.meta);
            org = corr.apply(&org);
            br = corr.apply(&br);
            tiffio::write_u32(&self.layout.reassigned_organelles(t + 1), &org)?;
            tiffio::write_u32(&self.layout.reassigned_branches(t + 1), &br)?;
        }
        let markers = self.markers()?;
        let seeds: Vec<[f64; 3]> = markers[0].iter().map(|m| m.coord_um).collect();
        let tracks = track_points(&seeds, &fwd[..n - 1]);
        write_table(&self.layout.tracks(), &tracks_table(&tracks, &self.meta))
    }

    fn load_segmentation(&self, t: usize, shape: Shape) -> Result<Segmentation> {
        let organelles = tiffio::read_u32(&self.layout.organelles(t), Some(shape))?;
        let branches = tiffio::read_u32(&self.layout.branches(t), Some(shape))?;
        let skel = tiffio::read_u8(&self.layout.skeleton(t), Some(shape))?.map(|&c| c != 0);
        let distance = tiffio::read_f64(&self.layout.distance(t), Some(shape))?;
        let organelle_count = organelles.as_slice().iter().copied().max().unwrap_or(0);
        let branch_count = branches.as_slice().iter().copied().max().unwrap_or(0);
        let skeleton = classify_and_split(&skel, self.meta.is_3d);
        let nodes = assign_voxels_to_nodes(&organelles, organelle_count, &skeleton, &self.meta);
        Ok(Segmentation {
            mask: organelles.map(|&l| l != 0),
            organelles,
            organelle_count,
            skeleton,
            branches,
            branch_count,
            nodes,
            distance,
        })
    }

    fn features(&self) -> Result<()> {
        let shape = self.shape()?;
        let frames = self.raw()?;
        let n = frames.len();
        let dt = self.meta.dt;
        let (fwd, bwd) = self.fields()?;
        let com: Vec<Option<V3>> = frames.iter().map(|f| center_of_mass(f).ok()).collect();
        let sample = |field: &FlowField, p: &V3| {
            let v = field.at(p);
            v.anchored.then_some(v.v_um)
        };
        let mut tables = FrameTables::default();
        for t in 0..n {
            let seg = self.load_segmentation(t, shape)?;
            let structure = tiffio::read_f32(&self.layout.preprocessed(t), Some(shape))?;
            let r_org = tiffio::read_u32(&self.layout.reassigned_organelles(t), Some(shape))?;
            let r_br = tiffio::read_u32(&self.layout.reassigned_branches(t), Some(shape))?;
            let positions: Vec<V3> = seg
                .mask
                .coords()
                .into_iter()
                .map(|c| self.meta.to_um(c))
                .collect();
            let f: Vec<Option<V3>> = positions
                .iter()
                .map(|p| (t + 1 < n).then(|| sample(&fwd[t], p)).flatten())
                .collect();
            let b: Vec<Option<V3>> = positions
                .iter()
                .map(|p| (t >= 1).then(|| sample(&bwd[t], p)).flatten())
                .collect();
            // angular velocity of the previous frame at each back-tracked position
            let prev: Vec<Option<V3>> = positions
                .iter()
                .zip(&b)
                .map(|(p, d)| {
                    let d = (*d)?;
                    let q = [p[0] + d[0], p[1] + d[1], p[2] + d[2]];
                    let v01 = (t >= 2)
                        .then(|| sample(&bwd[t - 1], &q))
                        .flatten()
                        .map(|v| v.map(|x| -x / dt));
                    let v12 = sample(&fwd[t - 1], &q).map(|v| v.map(|x| x / dt));
                    rotation_rate(v01, v12, dt)
                })
                .collect();
            let input = FrameInput {
                frame_index: t,
                meta: &self.meta,
                raw: &frames[t].values,
                structure: &structure,
                seg: &seg,
                reassigned_organelles: &r_org,
                reassigned_branches: &r_br,
                fwd: &f,
                bwd: &b,
                prev_ang_vel: &prev,
                com_prev: t.checked_sub(1).and_then(|s| com[s]),
                com: com[t],
                com_next: com.get(t + 1).copied().flatten(),
            };
            tables.extend(frame_tables(&input));
        }
        let dir = self.layout.root.join("features");
        std::fs::create_dir_all(&dir).map_err(PipelineError::io(dir))?;
        let FrameTables {
            voxels,
            nodes,
            branches,
            organelles,
            image,
        } = tables;
        for (table, (level, _)) in [voxels, nodes, branches, organelles, image]
            .iter()
            .zip(FEATURE_LEVELS)
        {
            write_table(&self.layout.features(level), table)?;
        }
        Ok(())
    }

    fn multimesh(&self) -> Result<()> {
        let shape = self.shape()?;
        let n = self.n_frames()?;
        let nodes = read_table(&self.layout.features("nodes"), 7)?;
        let dir = self.layout.root.join("multimesh");
        std::fs::create_dir_all(&dir).map_err(PipelineError::io(dir))?;
        let feats: Vec<&str> = self
            .cfg
            .multimesh_features
            .iter()
            .map(String::as_str)
            .collect();
        for name in &feats {
            if nodes.column_index(name).is_none() {
                return Err(PipelineError::Config(format!(
                    "multimesh feature {name:?} is not a node table column"
                )));
            }
        }
        for t in 0..n {
            let skel = tiffio::read_u8(&self.layout.skeleton(t), Some(shape))?.map(|&c| c != 0);
            let meshes = build_multimesh(&skel.coords());
            let mut frame_nodes = orgscope_core::features::Table::new(
                nodes.id_columns.clone(),
                nodes.columns.clone(),
            );
            for (ids, vals) in nodes.ids.iter().zip(&nodes.values) {
                if ids[0] == t as i64 {
                    frame_nodes.push(ids.clone(), vals.clone());
                }
            }
            let (nt, et) = export_tables(t, &meshes, &frame_nodes, &feats);
            write_table(&self.layout.multimesh(t, "nodes", "csv"), &nt)?;
            write_table(&self.layout.multimesh(t, "edges", "csv"), &et)?;
            if self.cfg.jsonl {
                write_jsonl(&self.layout.multimesh(t, "nodes", "jsonl"), &nt, "node")?;
                write_jsonl(&self.layout.multimesh(t, "edges", "jsonl"), &et, "edge")?;
            }
        }
        Ok(())
    }

    fn run_stage(&self, s: Stage) -> Result<()> {
        match s {
            Stage::Enhance => self.enhance(),
            Stage::Segment => self.segment(),
            Stage::Mocap => self.mocap(),
            Stage::Link => self.link(),
            Stage::Flow => self.flow(),
            Stage::Features => self.features(),
            Stage::Multimesh => self.multimesh(),
        }
    }
}

fn skeleton_codes(seg: &Segmentation) -> Grid<u8> {
    let mut g = Grid::filled(seg.mask.shape(), 0u8);
    for (c, class) in seg.skeleton.voxels.iter().zip(&seg.skeleton.classes) {
        let code = match class {
            VoxelClass::LoneTip => 1,
            VoxelClass::Tip => 2,
            VoxelClass::Edge => 3,
            VoxelClass::Junction => 4,
        };
        g.set(*c, code);
    }
    g
}

fn preflight(cfg: &RunConfig) -> Result<()> {
    if !cfg.input.is_file() {
        return Err(PipelineError::Config(format!(
            "input {} does not exist",
            cfg.input.display()
        )));
    }
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(PipelineError::io(out))?;
    let probe = out.join(".orgscope-write-probe");
    std::fs::write(&probe, b"").map_err(PipelineError::io(&probe))?;
    std::fs::remove_file(&probe).map_err(PipelineError::io(&probe))?;
    Ok(())
}

/// Run stages `from..=to`, reusing artifacts of earlier stages.
pub fn run(cfg: &RunConfig, from: Stage, to: Stage) -> Result<Manifest> {
    let meta = cfg.validate()?;
    preflight(cfg)?;
    let threads = cfg.effective_threads()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg, meta, from, to))
}

fn run_in_pool(cfg: &RunConfig, meta: VolumeMeta, from: Stage, to: Stage) -> Result<Manifest> {
    let ctx = Ctx {
        cfg,
        scales: compute_scale_sigmas(&meta)?,
        meta,
        layout: Layout::new(&cfg.output),
        raw: OnceCell::new(),
    };
    let n = tag(ctx.n_frames(), from, None)?;
    if n == 1 && to >= Stage::Link {
        warn!(
            "input has a single frame; linking and flow are empty and motility features are null"
        );
    }
    let mut stages = Vec::new();
    for s in Stage::ALL {
        if s < from || s > to {
            stages.push(StageRecord {
                name: s.name(),
                status: if s < from { "cached" } else { "skipped" },
                seconds: 0.0,
            });
            continue;
        }
        info!("stage {}", s.name());
        let start = Instant::now();
        tag(ctx.run_stage(s), s, None)?;
        stages.push(StageRecord {
            name: s.name(),
            status: "ran",
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        frames: n,
        shape_zyx: ctx.shape()?.0,
        stages,
        files: ctx
            .layout
            .list_files()
            .map_err(PipelineError::io(&ctx.layout.root))?,
    };
    write_manifest(&ctx.layout.manifest(), &manifest)?;
    Ok(manifest)
}

fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let text =
        serde_json::to_string_pretty(m).map_err(|e| PipelineError::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(PipelineError::io(path))
}
