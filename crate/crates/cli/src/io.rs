use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use svdres_core::imagestack::load_image;
use svdres_core::Image;

fn is_png(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

/// PNG files of `dir`, sorted by file name. A file path yields itself.
pub fn list_pngs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("cannot read directory {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_png(p))
        .collect();
    out.sort();
    Ok(out)
}

fn subdirs(path: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("cannot read directory {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "images".into())
}

/// A task name with the clean/degraded file paths of each pair.
pub struct PairPaths {
    pub task: String,
    pub clean: PathBuf,
    pub degraded: PathBuf,
}

/// Matches degraded files to clean files by name. When `degraded` holds
/// subdirectories each one is a task; otherwise the whole directory is one
/// task named `task` or after the directory.
pub fn pair_paths(clean: &Path, degraded: &Path, task: Option<&str>) -> Result<Vec<PairPaths>> {
    let groups: Vec<(String, PathBuf)> = match subdirs(degraded)? {
        dirs if dirs.is_empty() => vec![(
            task.map(str::to_owned).unwrap_or_else(|| dir_name(degraded)),
            degraded.into(),
        )],
        dirs => dirs.into_iter().map(|d| (dir_name(&d), d)).collect(),
    };
    let mut out = Vec::new();
    for (name, dir) in groups {
        for d in list_pngs(&dir)? {
            let file = d.file_name().expect("listed file has a name");
            let c = clean.join(file);
            if !c.is_file() {
                bail!("no clean image for {} (expected {})", d.display(), c.display());
            }
            out.push(PairPaths {
                task: name.clone(),
                clean: c,
                degraded: d,
            });
        }
    }
    if out.is_empty() {
        bail!("no PNG files found under {}", degraded.display());
    }
    Ok(out)
}

pub fn load(p: &Path) -> Result<Image> {
    load_image(p).with_context(|| format!("cannot load {}", p.display()))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

/// `stats.json` -> `stats_tasks.csv` beside it.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}
