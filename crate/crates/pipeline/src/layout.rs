//! On-disk artifact layout of a run directory.

use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn frame_dir(&self, t: usize) -> PathBuf {
        self.root.join("frames").join(format!("t{t:04}"))
    }

    pub fn preprocessed(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("preprocessed.tif")
    }

    pub fn scale_index(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("scale_index.tif")
    }

    pub fn organelles(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("organelles.tif")
    }

    pub fn branches(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("branches.tif")
    }

    /// Skeleton voxel classes: 0 background, 1 lone tip, 2 tip, 3 edge,
    /// 4 junction.
    pub fn skeleton(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("skeleton.tif")
    }

    pub fn distance(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("distance.tif")
    }

    pub fn reassigned_organelles(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("reassigned_organelles.tif")
    }

    pub fn reassigned_branches(&self, t: usize) -> PathBuf {
        self.frame_dir(t).join("reassigned_branches.tif")
    }

    pub fn markers(&self) -> PathBuf {
        self.root.join("markers.csv")
    }

    pub fn linkages(&self) -> PathBuf {
        self.root.join("linkages.csv")
    }

    pub fn tracks(&self) -> PathBuf {
        self.root.join("tracks.csv")
    }

    pub fn features(&self, level: &str) -> PathBuf {
        self.root.join("features").join(format!("{level}.csv"))
    }

    pub fn multimesh(&self, t: usize, kind: &str, ext: &str) -> PathBuf {
        self.root
            .join("multimesh")
            .join(format!("t{t:04}_{kind}.{ext}"))
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    /// All files below the root except the manifest, as sorted relative paths.
    pub fn list_files(&self) -> std::io::Result<Vec<String>> {
        fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
            for e in std::fs::read_dir(dir)? {
                let p = e?.path();
                if p.is_dir() {
                    walk(&p, out)?;
                } else {
                    out.push(p);
                }
            }
            Ok(())
        }
        let mut files = Vec::new();
        walk(&self.root, &mut files)?;
        let manifest = self.manifest();
        let mut rel: Vec<String> = files
            .into_iter()
            .filter(|p| *p != manifest)
            .filter_map(|p| {
                p.strip_prefix(&self.root)
                    .ok()
                    .map(|r| r.to_string_lossy().replace('\\', "/"))
            })
            .collect();
        rel.sort();
        Ok(rel)
    }
}
