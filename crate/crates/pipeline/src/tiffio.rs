//! Multi-page TIFF stacks: input hyperstacks and per-frame artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use orgscope_core::{Frame, Grid, Shape, VolumeMeta};
use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;

use crate::config::RunConfig;
use crate::error::{PipelineError, Result};

/// Pages of one file, each `height × width` in row-major order.
#[derive(Debug)]
pub struct Pages {
    pub width: usize,
    pub height: usize,
    pub description: Option<String>,
    pub pages: Vec<DecodingResult>,
}

pub fn read_pages(path: &Path) -> Result<Pages> {
    let file = File::open(path).map_err(PipelineError::io(path))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(PipelineError::tiff(path))?
        .with_limits(Limits::unlimited());
    let description = dec.get_tag_ascii_string(Tag::ImageDescription).ok();
    let (w, h) = dec.dimensions().map_err(PipelineError::tiff(path))?;
    let mut pages = Vec::new();
    loop {
        let dims = dec.dimensions().map_err(PipelineError::tiff(path))?;
        if dims != (w, h) {
            return Err(PipelineError::format(
                path,
                format!(
                    "page {} is {}x{}, expected {w}x{h}",
                    pages.len(),
                    dims.0,
                    dims.1
                ),
            ));
        }
        let img = dec.read_image().map_err(PipelineError::tiff(path))?;
        if samples(&img) != w as usize * h as usize {
            return Err(PipelineError::format(
                path,
                "multi-sample pixels are unsupported; expected grayscale pages",
            ));
        }
        pages.push(img);
        if !dec.more_images() {
            break;
        }
        dec.next_image().map_err(PipelineError::tiff(path))?;
    }
    Ok(Pages {
        width: w as usize,
        height: h as usize,
        description,
        pages,
    })
}

fn samples(r: &DecodingResult) -> usize {
    match r {
        DecodingResult::U8(v) => v.len(),
        DecodingResult::U16(v) => v.len(),
        DecodingResult::U32(v) => v.len(),
        DecodingResult::U64(v) => v.len(),
        DecodingResult::F16(v) => v.len(),
        DecodingResult::F32(v) => v.len(),
        DecodingResult::F64(v) => v.len(),
        DecodingResult::I8(v) => v.len(),
        DecodingResult::I16(v) => v.len(),
        DecodingResult::I32(v) => v.len(),
        DecodingResult::I64(v) => v.len(),
    }
}

fn to_f64(r: &DecodingResult) -> Vec<f64> {
    match r {
        DecodingResult::U8(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::U16(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::U32(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::U64(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::F16(v) => v.iter().map(|&x| x.to_f64()).collect(),
        DecodingResult::F32(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::F64(v) => v.clone(),
        DecodingResult::I8(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::I16(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::I32(v) => v.iter().map(|&x| x as f64).collect(),
        DecodingResult::I64(v) => v.iter().map(|&x| x as f64).collect(),
    }
}

/// Value of `key=N` in an ImageJ-style description.
pub fn description_field(desc: &str, key: &str) -> Option<usize> {
    desc.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim().parse().ok())?
    })
}

fn imagej_description(sizes: &[(char, usize)]) -> String {
    let images: usize = sizes.iter().map(|s| s.1).product();
    let mut d = format!("ImageJ=1.11a\nimages={images}\n");
    for &(axis, n) in sizes {
        let key = match axis {
            'C' => "channels",
            'Z' => "slices",
            'T' => "frames",
            _ => continue,
        };
        d.push_str(&format!("{key}={n}\n"));
    }
    if sizes.len() > 1 {
        d.push_str("hyperstack=true\n");
    }
    d
}

/// Lengths of the non-`YX` axes of `order`, from the configuration, the file
/// description, or the page count for a single unknown axis.
pub fn axis_sizes(order: &str, pages: &Pages, cfg: &RunConfig, path: &Path) -> Result<Vec<usize>> {
    let desc = pages.description.as_deref().unwrap_or("");
    let recorded = |axis: char| match axis {
        'T' => description_field(desc, "frames"),
        'Z' => cfg.size_z.or_else(|| description_field(desc, "slices")),
        'C' => cfg.size_c.or_else(|| description_field(desc, "channels")),
        _ => None,
    };
    for (axis, key) in [('T', "frames"), ('Z', "slices"), ('C', "channels")] {
        if let Some(n) = description_field(desc, key) {
            if n > 1 && !order.contains(axis) {
                return Err(PipelineError::format(
                    path,
                    format!("file records {key}={n} but dim_order {order} has no {axis} axis"),
                ));
            }
        }
    }
    let axes: Vec<char> = order[..order.len() - 2].chars().collect();
    let mut sizes: Vec<Option<usize>> = axes.iter().map(|&a| recorded(a)).collect();
    let n = pages.pages.len();
    let unknown: Vec<usize> = (0..axes.len()).filter(|&i| sizes[i].is_none()).collect();
    match unknown.len() {
        0 => {}
        1 => {
            let known: usize = sizes.iter().flatten().product();
            if known == 0 || !n.is_multiple_of(known) {
                return Err(PipelineError::format(
                    path,
                    format!("{n} pages do not divide into axes of {order}"),
                ));
            }
            sizes[unknown[0]] = Some(n / known);
        }
        _ => {
            return Err(PipelineError::format(
                path,
                format!("cannot infer axis lengths of {order} from {n} pages; set size_z/size_c"),
            ))
        }
    }
    let sizes: Vec<usize> = sizes.into_iter().flatten().collect();
    if sizes.iter().product::<usize>() != n {
        return Err(PipelineError::format(
            path,
            format!("axis lengths {sizes:?} for {order} disagree with {n} pages"),
        ));
    }
    Ok(sizes)
}

/// Read the input stack into per-time-point frames of the selected channel.
pub fn load_input(cfg: &RunConfig, meta: &VolumeMeta) -> Result<Vec<Frame>> {
    let path = cfg.input.as_path();
    let pages = read_pages(path)?;
    let order = cfg.dim_order.to_ascii_uppercase();
    let sizes = axis_sizes(&order, &pages, cfg, path)?;
    let axes: Vec<char> = order[..order.len() - 2].chars().collect();
    let size_of = |a: char| axes.iter().position(|&x| x == a).map_or(1, |i| sizes[i]);
    let (nt, nz, nc) = (size_of('T'), size_of('Z'), size_of('C'));
    if cfg.channel >= nc {
        return Err(PipelineError::Config(format!(
            "channel {} out of range; input has {nc} channel(s)",
            cfg.channel
        )));
    }
    let mut strides = vec![1usize; axes.len()];
    for i in (0..axes.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * sizes[i + 1];
    }
    let page_of = |t: usize, z: usize| -> usize {
        axes.iter()
            .zip(&strides)
            .map(|(&a, &s)| {
                s * match a {
                    'T' => t,
                    'Z' => z,
                    _ => cfg.channel,
                }
            })
            .sum()
    };
    let shape = Shape::new(nz, pages.height, pages.width);
    let mut frames = Vec::with_capacity(nt);
    for t in 0..nt {
        let mut data = Vec::with_capacity(shape.len());
        for z in 0..nz {
            data.extend(
                to_f64(&pages.pages[page_of(t, z)])
                    .into_iter()
                    .map(|v| v as f32),
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(PipelineError::format(
                path,
                format!("non-finite intensity at frame {t}, voxel {i}"),
            ));
        }
        frames.push(Frame::new(Grid::from_vec(shape, data)?, meta.clone())?);
    }
    Ok(frames)
}

fn write_pages<C>(path: &Path, shape: Shape, data: &[C::Inner], desc: &str) -> Result<()>
where
    C: colortype::ColorType,
    [C::Inner]: tiff::encoder::TiffValue,
{
    let [nz, ny, nx] = shape.0;
    assert_eq!(data.len(), shape.len());
    let file = File::create(path).map_err(PipelineError::io(path))?;
    let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(PipelineError::tiff(path))?;
    let page = ny * nx;
    for z in 0..nz {
        let mut img = enc
            .new_image::<C>(nx as u32, ny as u32)
            .map_err(PipelineError::tiff(path))?;
        if z == 0 {
            img.encoder()
                .write_tag(Tag::ImageDescription, desc)
                .map_err(PipelineError::tiff(path))?;
        }
        img.write_data(&data[z * page..(z + 1) * page])
            .map_err(PipelineError::tiff(path))?;
    }
    Ok(())
}

fn stack_description(shape: Shape) -> String {
    imagej_description(&[('Z', shape.0[0])])
}

pub fn write_f32(path: &Path, g: &Grid<f32>) -> Result<()> {
    write_pages::<colortype::Gray32Float>(
        path,
        g.shape(),
        g.as_slice(),
        &stack_description(g.shape()),
    )
}

pub fn write_f64(path: &Path, g: &Grid<f64>) -> Result<()> {
    write_pages::<colortype::Gray64Float>(
        path,
        g.shape(),
        g.as_slice(),
        &stack_description(g.shape()),
    )
}

pub fn write_u32(path: &Path, g: &Grid<u32>) -> Result<()> {
    write_pages::<colortype::Gray32>(path, g.shape(), g.as_slice(), &stack_description(g.shape()))
}

pub fn write_u8(path: &Path, g: &Grid<u8>) -> Result<()> {
    write_pages::<colortype::Gray8>(path, g.shape(), g.as_slice(), &stack_description(g.shape()))
}

/// Write a `T × Z` float hyperstack in `TZYX` page order.
pub fn write_hyperstack_f32(path: &Path, frames: &[Grid<f32>]) -> Result<()> {
    let shape = frames
        .first()
        .map(|g| g.shape())
        .ok_or_else(|| PipelineError::format(path, "no frames to write"))?;
    if frames.iter().any(|g| g.shape() != shape) {
        return Err(PipelineError::format(path, "frames differ in shape"));
    }
    let [nz, ny, nx] = shape.0;
    let data: Vec<f32> = frames
        .iter()
        .flat_map(|g| g.as_slice().iter().copied())
        .collect();
    let desc = imagej_description(&[('T', frames.len()), ('Z', nz)]);
    write_pages::<colortype::Gray32Float>(path, Shape::new(frames.len() * nz, ny, nx), &data, &desc)
}

fn stack_shape(p: &Pages) -> Shape {
    Shape::new(p.pages.len(), p.height, p.width)
}

fn check_shape(path: &Path, p: &Pages, expect: Option<Shape>) -> Result<Shape> {
    let s = stack_shape(p);
    match expect {
        Some(e) if e != s => Err(PipelineError::format(
            path,
            format!("stack shape {:?} differs from expected {:?}", s.0, e.0),
        )),
        _ => Ok(s),
    }
}

fn open(path: &Path) -> Result<Pages> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_path_buf()));
    }
    read_pages(path)
}

pub fn read_f32(path: &Path, expect: Option<Shape>) -> Result<Grid<f32>> {
    let p = open(path)?;
    let shape = check_shape(path, &p, expect)?;
    let mut data = Vec::with_capacity(shape.len());
    for page in &p.pages {
        match page {
            DecodingResult::F32(v) => data.extend_from_slice(v),
            _ => return Err(PipelineError::format(path, "expected 32-bit float pages")),
        }
    }
    Ok(Grid::from_vec(shape, data)?)
}

pub fn read_f64(path: &Path, expect: Option<Shape>) -> Result<Grid<f64>> {
    let p = open(path)?;
    let shape = check_shape(path, &p, expect)?;
    let mut data = Vec::with_capacity(shape.len());
    for page in &p.pages {
        match page {
            DecodingResult::F64(v) => data.extend_from_slice(v),
            _ => return Err(PipelineError::format(path, "expected 64-bit float pages")),
        }
    }
    Ok(Grid::from_vec(shape, data)?)
}

pub fn read_u32(path: &Path, expect: Option<Shape>) -> Result<Grid<u32>> {
    let p = open(path)?;
    let shape = check_shape(path, &p, expect)?;
    let mut data = Vec::with_capacity(shape.len());
    for page in &p.pages {
        match page {
            DecodingResult::U32(v) => data.extend_from_slice(v),
            DecodingResult::U16(v) => data.extend(v.iter().map(|&x| x as u32)),
            DecodingResult::U8(v) => data.extend(v.iter().map(|&x| x as u32)),
            _ => {
                return Err(PipelineError::format(
                    path,
                    "expected unsigned integer label pages",
                ))
            }
        }
    }
    Ok(Grid::from_vec(shape, data)?)
}

pub fn read_u8(path: &Path, expect: Option<Shape>) -> Result<Grid<u8>> {
    let p = open(path)?;
    let shape = check_shape(path, &p, expect)?;
    let mut data = Vec::with_capacity(shape.len());
    for page in &p.pages {
        match page {
            DecodingResult::U8(v) => data.extend_from_slice(v),
            _ => return Err(PipelineError::format(path, "expected 8-bit pages")),
        }
    }
    Ok(Grid::from_vec(shape, data)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(order: &str, input: &Path) -> RunConfig {
        RunConfig {
            input: input.to_path_buf(),
            output: "out".into(),
            dim_order: order.into(),
            spacing_x: Some(0.1),
            spacing_z: Some(0.2),
            ..RunConfig::default()
        }
    }

    #[test]
    fn label_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.tif");
        let shape = Shape::new(3, 4, 5);
        let g = Grid::from_vec(shape, (0..60u32).map(|v| v * 70_001).collect()).unwrap();
        write_u32(&p, &g).unwrap();
        assert_eq!(read_u32(&p, Some(shape)).unwrap(), g);
        assert!(read_u32(&p, Some(Shape::new(2, 4, 5))).is_err());
        assert!(read_f32(&p, None).is_err());
    }

    #[test]
    fn float_round_trips_are_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let shape = Shape::planar(3, 7);
        let f: Vec<f32> = (0..21).map(|i| (i as f32).sin() * 1e-3).collect();
        let g = Grid::from_vec(shape, f).unwrap();
        let p = dir.path().join("f.tif");
        write_f32(&p, &g).unwrap();
        assert_eq!(read_f32(&p, None).unwrap(), g);
        let d = g.map(|&v| v as f64 / 3.0);
        let q = dir.path().join("d.tif");
        write_f64(&q, &d).unwrap();
        assert_eq!(read_f64(&q, None).unwrap(), d);
    }

    #[test]
    fn missing_artifact_is_reported() {
        let err = read_u32(Path::new("/nonexistent/x.tif"), None).unwrap_err();
        assert!(matches!(err, PipelineError::MissingArtifact(_)));
    }

    #[test]
    fn hyperstack_loads_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.tif");
        let shape = Shape::new(2, 3, 4);
        let frames: Vec<Grid<f32>> = (0..3)
            .map(|t| {
                Grid::from_vec(shape, (0..24).map(|i| (100 * t + i) as f32).collect()).unwrap()
            })
            .collect();
        write_hyperstack_f32(&p, &frames).unwrap();
        let c = cfg("TZYX", &p);
        let loaded = load_input(&c, &c.meta().unwrap()).unwrap();
        assert_eq!(loaded.len(), 3);
        for (a, b) in loaded.iter().zip(&frames) {
            assert_eq!(&a.values, b);
        }
        // wrong axis count is rejected
        let bad = cfg("TYX", &p);
        assert!(load_input(&bad, &bad.meta().unwrap()).is_err());
    }

    #[test]
    fn channel_selection() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.tif");
        // T=2, C=2 as consecutive pages, written as plain planar pages
        let shape = Shape::new(4, 2, 2);
        let data: Vec<f32> = (0..16).map(|i| i as f32 + 1.0).collect();
        write_pages::<colortype::Gray32Float>(&p, shape, &data, "").unwrap();
        let mut c = cfg("TCYX", &p);
        c.size_c = Some(2);
        c.channel = 1;
        let loaded = load_input(&c, &c.meta().unwrap()).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].values.as_slice(), &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(loaded[1].values.as_slice(), &[13.0, 14.0, 15.0, 16.0]);
        c.channel = 2;
        assert!(load_input(&c, &c.meta().unwrap()).is_err());
    }

    #[test]
    fn description_fields() {
        let d = imagej_description(&[('T', 4), ('Z', 7)]);
        assert_eq!(description_field(&d, "frames"), Some(4));
        assert_eq!(description_field(&d, "slices"), Some(7));
        assert_eq!(description_field(&d, "images"), Some(28));
        assert_eq!(description_field(&d, "channels"), None);
    }
}
