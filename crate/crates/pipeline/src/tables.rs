//! CSV and JSON Lines serialization of feature tables and per-stage records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use orgscope_core::features::Table;
use orgscope_core::linking::{Direction, Linkage};
use orgscope_core::mocap::MocapMarker;
use orgscope_core::VolumeMeta;

use crate::error::{PipelineError, Result};

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_table(path: &Path, t: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(PipelineError::csv(path))?;
    let header: Vec<&str> = t
        .id_columns
        .iter()
        .chain(&t.columns)
        .map(String::as_str)
        .collect();
    w.write_record(&header).map_err(PipelineError::csv(path))?;
    for (ids, vals) in t.ids.iter().zip(&t.values) {
        let row: Vec<String> = ids
            .iter()
            .map(|i| i.to_string())
            .chain(vals.iter().map(|&v| cell(v)))
            .collect();
        w.write_record(&row).map_err(PipelineError::csv(path))?;
    }
    w.flush().map_err(PipelineError::io(path))?;
    Ok(())
}

/// Read a table whose first `n_ids` columns are integer identifiers.
pub fn read_table(path: &Path, n_ids: usize) -> Result<Table> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(PipelineError::csv(path))?;
    let header: Vec<String> = r
        .headers()
        .map_err(PipelineError::csv(path))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < n_ids {
        return Err(PipelineError::format(
            path,
            "fewer columns than identifiers",
        ));
    }
    let mut t = Table::new(header[..n_ids].to_vec(), header[n_ids..].to_vec());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(PipelineError::csv(path))?;
        let bad = |what: &str| PipelineError::format(path, format!("row {}: {what}", line + 1));
        let ids = rec
            .iter()
            .take(n_ids)
            .map(|s| s.parse::<i64>().map_err(|_| bad(&format!("bad id {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let vals = rec
            .iter()
            .skip(n_ids)
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|_| bad(&format!("bad value {s:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        t.push(ids, vals);
    }
    Ok(t)
}

/// One JSON object per row, keys in column order, nulls as `null`.
pub fn write_jsonl(path: &Path, t: &Table, kind: &str) -> Result<()> {
    let file = File::create(path).map_err(PipelineError::io(path))?;
    let mut w = BufWriter::new(file);
    for (ids, vals) in t.ids.iter().zip(&t.values) {
        let mut obj = serde_json::Map::new();
        obj.insert("type".into(), kind.into());
        for (k, v) in t.id_columns.iter().zip(ids) {
            obj.insert(k.clone(), (*v).into());
        }
        for (k, v) in t.columns.iter().zip(vals) {
            let j = v
                .and_then(serde_json::Number::from_f64)
                .map_or(serde_json::Value::Null, serde_json::Value::Number);
            obj.insert(k.clone(), j);
        }
        serde_json::to_writer(&mut w, &obj)
            .map_err(|e| PipelineError::format(path, e.to_string()))?;
        w.write_all(b"\n").map_err(PipelineError::io(path))?;
    }
    w.flush().map_err(PipelineError::io(path))?;
    Ok(())
}

fn ids(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

const MARKER_IDS: [&str; 6] = ["frame", "marker", "z", "y", "x", "scale_index"];
const MARKER_COLS: [&str; 4] = ["z_um", "y_um", "x_um", "radius_um"];

pub fn markers_table(markers: &[Vec<MocapMarker>]) -> Table {
    let mut t = Table::new(ids(&MARKER_IDS), ids(&MARKER_COLS));
    for (f, ms) in markers.iter().enumerate() {
        for (k, m) in ms.iter().enumerate() {
            t.push(
                vec![
                    f as i64,
                    k as i64,
                    m.coord[0] as i64,
                    m.coord[1] as i64,
                    m.coord[2] as i64,
                    m.scale_index as i64,
                ],
                vec![
                    Some(m.coord_um[0]),
                    Some(m.coord_um[1]),
                    Some(m.coord_um[2]),
                    Some(m.radius_um),
                ],
            );
        }
    }
    t
}

/// Markers grouped by frame; `n_frames` fixes the number of groups.
pub fn markers_from_table(
    path: &Path,
    t: &Table,
    n_frames: usize,
) -> Result<Vec<Vec<MocapMarker>>> {
    let mut out = vec![Vec::new(); n_frames];
    for (ids, vals) in t.ids.iter().zip(&t.values) {
        let bad = || PipelineError::format(path, "malformed marker row");
        if ids.len() != MARKER_IDS.len() || vals.len() != MARKER_COLS.len() {
            return Err(bad());
        }
        let f = usize::try_from(ids[0]).map_err(|_| bad())?;
        let frame = out.get_mut(f).ok_or_else(bad)?;
        if ids[1] != frame.len() as i64 {
            return Err(PipelineError::format(path, "marker rows out of order"));
        }
        let coord = [ids[2], ids[3], ids[4]].map(|v| v.max(0) as usize);
        let v = |k: usize| vals[k].ok_or_else(bad);
        frame.push(MocapMarker {
            frame_index: f,
            coord,
            coord_um: [v(0)?, v(1)?, v(2)?],
            radius_um: v(3)?,
            scale_index: ids[5].max(0) as usize,
        });
    }
    Ok(out)
}

const LINK_IDS: [&str; 4] = ["frame", "src", "dst", "forward"];

/// Linkages from frame `t` to `t + 1`, tagged with `t`.
pub fn linkages_table(links: &[Vec<Linkage>]) -> Table {
    let mut t = Table::new(ids(&LINK_IDS), ids(&["cost"]));
    for (f, ls) in links.iter().enumerate() {
        for l in ls {
            t.push(
                vec![
                    f as i64,
                    l.src as i64,
                    l.dst as i64,
                    (l.direction == Direction::Forward) as i64,
                ],
                vec![Some(l.cost)],
            );
        }
    }
    t
}

pub fn linkages_from_table(
    path: &Path,
    t: &Table,
    n_intervals: usize,
) -> Result<Vec<Vec<Linkage>>> {
    let mut out = vec![Vec::new(); n_intervals];
    for (ids, vals) in t.ids.iter().zip(&t.values) {
        let bad = || PipelineError::format(path, "malformed linkage row");
        if ids.len() != LINK_IDS.len() || vals.len() != 1 {
            return Err(bad());
        }
        let f = usize::try_from(ids[0]).map_err(|_| bad())?;
        out.get_mut(f).ok_or_else(bad)?.push(Linkage {
            src: usize::try_from(ids[1]).map_err(|_| bad())?,
            dst: usize::try_from(ids[2]).map_err(|_| bad())?,
            cost: vals[0].ok_or_else(bad)?,
            direction: if ids[3] == 1 {
                Direction::Forward
            } else {
                Direction::Backward
            },
        });
    }
    Ok(out)
}

/// Point tracks: one row per seed and frame.
pub fn tracks_table(tracks: &[Vec<([f64; 3], bool)>], meta: &VolumeMeta) -> Table {
    let cols: Vec<&str> = if meta.is_3d {
        vec!["z_um", "y_um", "x_um"]
    } else {
        vec!["y_um", "x_um"]
    };
    let mut t = Table::new(ids(&["track", "frame", "anchored"]), ids(&cols));
    let skip = if meta.is_3d { 0 } else { 1 };
    for (k, tr) in tracks.iter().enumerate() {
        for (f, (p, anchored)) in tr.iter().enumerate() {
            t.push(
                vec![k as i64, f as i64, *anchored as i64],
                p[skip..].iter().map(|&v| Some(v)).collect(),
            );
        }
    }
    t
}
