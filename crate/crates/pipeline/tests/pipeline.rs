mod common;

use std::collections::BTreeSet;
use std::path::Path;

use common::*;
use orgscope::run::FEATURE_LEVELS;
use orgscope::tables::read_table;
use orgscope::{run, Layout, PipelineError, RunConfig, Stage};
use orgscope_core::features::{
    branch_columns, organelle_columns, voxel_columns, voxel_scalar_columns, NODE_COLUMNS, STATS,
};

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn header(p: &Path) -> Vec<String> {
    let text = String::from_utf8(read(p)).unwrap();
    text.lines()
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

fn two_frame_run(dir: &Path) -> RunConfig {
    let input = dir.join("input.tif");
    write_input(&input, &network_frames(2, [0.0, 0.0, 0.2]));
    let cfg = volumetric_config(&input, &dir.join("out"));
    run(&cfg, Stage::Enhance, Stage::Multimesh).unwrap();
    cfg
}

#[test]
fn full_run_artifacts_and_caching() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = two_frame_run(dir.path());
    let layout = Layout::new(&cfg.output);

    // manifest lists every produced file
    let manifest: serde_json::Value = serde_json::from_slice(&read(&layout.manifest())).unwrap();
    let listed: BTreeSet<String> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(listed.len(), layout.list_files().unwrap().len());
    for t in 0..2 {
        for p in [
            layout.preprocessed(t),
            layout.organelles(t),
            layout.branches(t),
            layout.skeleton(t),
            layout.distance(t),
            layout.reassigned_organelles(t),
            layout.reassigned_branches(t),
            layout.multimesh(t, "nodes", "csv"),
            layout.multimesh(t, "edges", "csv"),
        ] {
            let rel = p
                .strip_prefix(&cfg.output)
                .unwrap()
                .to_string_lossy()
                .to_string();
            assert!(listed.contains(&rel), "{rel} not in manifest");
        }
    }
    assert_eq!(manifest["frames"], 2);

    // feature headers are identifiers followed by the documented columns
    let voxel_ids = ["frame", "z", "y", "x", "organelle", "branch", "node"];
    let h = header(&layout.features("voxels"));
    assert_eq!(&h[..7], voxel_ids);
    assert_eq!(h[9..].to_vec(), voxel_columns(true));
    let h = header(&layout.features("nodes"));
    assert_eq!(h[7..15].to_vec(), NODE_COLUMNS.map(String::from).to_vec());
    assert_eq!(
        h.len(),
        7 + NODE_COLUMNS.len() + voxel_scalar_columns().len() * STATS.len()
    );
    let h = header(&layout.features("branches"));
    assert_eq!(&h[..3], ["frame", "branch", "organelle"]);
    let own = branch_columns(true);
    assert_eq!(
        h[3..3 + own.len()].to_vec(),
        own.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    );
    let h = header(&layout.features("organelles"));
    let own = organelle_columns(true);
    assert_eq!(
        h[2..2 + own.len()].to_vec(),
        own.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    );
    assert_eq!(header(&layout.features("image"))[0], "frame");
    for (level, n_ids) in FEATURE_LEVELS {
        let t = read_table(&layout.features(level), n_ids).unwrap();
        assert!(!t.is_empty(), "{level} table is empty");
    }

    // frame 1 carries only labels present in frame 0
    let l0 = orgscope::tiffio::read_u32(&layout.reassigned_organelles(0), None).unwrap();
    let l1 = orgscope::tiffio::read_u32(&layout.reassigned_organelles(1), None).unwrap();
    let s0 = orgscope_core::flow::label_set(&l0);
    let s1 = orgscope_core::flow::label_set(&l1);
    assert!(!s1.is_empty() && s1.is_subset(&s0));

    // the translating network moves along x; frame-0 velocities must be anchored
    let vox = read_table(&layout.features("voxels"), 9).unwrap();
    let frame = vox.id_column("frame").unwrap();
    let vx = vox.column("lin_vel_raw_x").unwrap();
    let anchored: Vec<f64> = frame
        .iter()
        .zip(&vx)
        .filter(|(f, _)| **f == 0)
        .filter_map(|(_, v)| *v)
        .collect();
    assert!(!anchored.is_empty());
    let mean = anchored.iter().sum::<f64>() / anchored.len() as f64;
    assert!((mean - 0.2).abs() < 0.05, "mean x velocity {mean}");

    // rerunning from features reproduces every downstream file byte for byte
    let mut before = Vec::new();
    for (level, _) in FEATURE_LEVELS {
        before.push(read(&layout.features(level)));
    }
    for t in 0..2 {
        before.push(read(&layout.multimesh(t, "nodes", "csv")));
        before.push(read(&layout.multimesh(t, "edges", "csv")));
    }
    let m = run(&cfg, Stage::Features, Stage::Multimesh).unwrap();
    assert_eq!(m.stages[0].status, "cached");
    let mut after = Vec::new();
    for (level, _) in FEATURE_LEVELS {
        after.push(read(&layout.features(level)));
    }
    for t in 0..2 {
        after.push(read(&layout.multimesh(t, "nodes", "csv")));
        after.push(read(&layout.multimesh(t, "edges", "csv")));
    }
    assert!(before == after, "cached rerun differs from the full run");
}

#[test]
fn stage_without_upstream_artifacts_fails_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.tif");
    write_input(&input, &network_frames(1, [0.0; 3]));
    let cfg = volumetric_config(&input, &dir.path().join("out"));
    let err = run(&cfg, Stage::Features, Stage::Features).unwrap_err();
    let msg = err.to_string();
    assert!(msg.starts_with("stage features"), "{msg}");
    assert!(msg.contains("organelles.tif"), "{msg}");
    match err {
        PipelineError::Stage { source, .. } => {
            assert!(matches!(*source, PipelineError::MissingArtifact(_)))
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn single_frame_runs_with_null_motility() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.tif");
    write_input(&input, &network_frames(1, [0.0; 3]));
    let mut cfg = volumetric_config(&input, &dir.path().join("out"));
    cfg.dim_order = "ZYX".into();
    cfg.jsonl = true;
    run(&cfg, Stage::Enhance, Stage::Multimesh).unwrap();
    let layout = Layout::new(&cfg.output);
    assert!(read_table(&layout.linkages(), 4).unwrap().is_empty());
    let vox = read_table(&layout.features("voxels"), 9).unwrap();
    assert!(!vox.is_empty());
    assert!(vox
        .column("lin_vel_mag_raw")
        .unwrap()
        .iter()
        .all(Option::is_none));
    assert!(vox
        .column("intensity_raw")
        .unwrap()
        .iter()
        .all(Option::is_some));
    let jsonl = String::from_utf8(read(&layout.multimesh(0, "edges", "jsonl"))).unwrap();
    for line in jsonl.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["type"], "edge");
    }
}

#[test]
fn invalid_configuration_is_rejected_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = volumetric_config(&dir.path().join("missing.tif"), &dir.path().join("out"));
    assert!(matches!(
        run(&cfg, Stage::Enhance, Stage::Multimesh),
        Err(PipelineError::Config(_))
    ));
    assert!(!dir.path().join("out").exists());

    let input = dir.path().join("input.tif");
    write_input(&input, &network_frames(2, [0.0; 3]));
    let mut cfg = volumetric_config(&input, &dir.path().join("out"));
    cfg.dim_order = "TYX".into();
    let err = run(&cfg, Stage::Enhance, Stage::Enhance).unwrap_err();
    assert!(err.to_string().contains("slices"), "{err}");
}

#[test]
fn cli_runs_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.tif");
    write_input(&input, &network_frames(1, [0.0; 3]));
    let exe = env!("CARGO_BIN_EXE_orgscope");
    let out = dir.path().join("out");
    let toml = dir.path().join("run.toml");
    std::fs::write(
        &toml,
        format!(
            "input = {:?}\noutput = {:?}\ndim_order = \"ZYX\"\nspacing_x = 0.2\nspacing_z = 0.4\n",
            input, out
        ),
    )
    .unwrap();
    let status = std::process::Command::new(exe)
        .args(["run", "--config"])
        .arg(&toml)
        .args(["--to", "segment", "--threads", "1", "--log-level", "warn"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("frames/t0000/organelles.tif").exists());
    assert!(!out.join("markers.csv").exists());

    let status = std::process::Command::new(exe)
        .args(["mocap", "--config"])
        .arg(&toml)
        .args(["--log-level", "error"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("markers.csv").exists());

    let o = std::process::Command::new(exe)
        .args(["features", "--config"])
        .arg(&toml)
        .args(["--output"])
        .arg(dir.path().join("elsewhere"))
        .output()
        .unwrap();
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stage features"), "{err}");
}
